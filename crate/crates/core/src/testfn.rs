//! Lyapunov test functions `W_α(r) = 1 − r^{-α}` and `V_α(r)` (`ln r` for
//! `α = 0`, `r^α` otherwise), and their radial `C²` extensions to the whole
//! state space.
//!
//! Beyond `r0` an extension coincides with the closed form. On `[0, r0]` it is
//! a polynomial bridge with zero slope and curvature at the origin, so that
//! `x ↦ profile(|x|)` is `C²` everywhere; the bridge is checked to be
//! nondecreasing.

use serde::{Deserialize, Serialize};

use crate::error::{LevyError, Result};
use crate::geometry::norm;

/// Tunable constants of the drift criteria.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CriterionParams {
    pub alpha: f64,
    pub r0: f64,
    /// Transience offset; `None` selects the midpoint `(1 − r0^{-α})/2`.
    pub eps: Option<f64>,
    pub x0: f64,
    pub beta: f64,
    pub gamma: f64,
    pub lambda: f64,
    pub t0: f64,
}

impl CriterionParams {
    /// Parameters with `r0 = (1 + x0)/2` and unit level constants.
    pub fn new(alpha: f64, x0: f64) -> Self {
        CriterionParams {
            alpha,
            r0: 0.5 * (1.0 + x0),
            eps: None,
            x0,
            beta: 1.0,
            gamma: 1.0,
            lambda: 0.5,
            t0: 1.0,
        }
    }

    pub fn eps_value(&self) -> f64 {
        self.eps.unwrap_or_else(|| 0.5 * (1.0 - self.r0.powf(-self.alpha)))
    }

    pub fn check(&self) -> Result<()> {
        let p = self;
        if !(p.alpha >= 0.0 && p.alpha.is_finite()) {
            return Err(LevyError::Config(format!("α = {} must be ≥ 0", p.alpha)));
        }
        if !(p.r0 > 1.0) {
            return Err(LevyError::Config(format!("r0 = {} must exceed 1", p.r0)));
        }
        if !(p.x0 > p.r0) {
            return Err(LevyError::Config(format!("x0 = {} must exceed r0 = {}", p.x0, p.r0)));
        }
        if p.alpha > 0.0 {
            let e = p.eps_value();
            let hi = 1.0 - p.r0.powf(-p.alpha);
            if !(e > 0.0 && e <= hi) {
                return Err(LevyError::Config(format!("ε = {e} outside (0, {hi}]")));
            }
        }
        for (name, v) in [("β", p.beta), ("γ", p.gamma), ("λ", p.lambda), ("t0", p.t0)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(LevyError::Config(format!("{name} = {v} must be positive")));
            }
        }
        Ok(())
    }
}

/// `1 − r^{-α}` for `r > 1`, `α > 0`.
pub fn w_alpha(r: f64, alpha: f64) -> Result<f64> {
    if !(r > 1.0) || !(alpha > 0.0) {
        return Err(LevyError::Domain(format!(
            "W_α needs r > 1 and α > 0 (got r = {r}, α = {alpha}); use the extension below r0"
        )));
    }
    Ok(-(-alpha * r.ln()).exp_m1())
}

/// `ln r` for `α = 0`, `r^α` for `α > 0`, with `r > 1`.
pub fn v_alpha(r: f64, alpha: f64) -> Result<f64> {
    if !(r > 1.0) || !(alpha >= 0.0) {
        return Err(LevyError::Domain(format!(
            "V_α needs r > 1 and α ≥ 0 (got r = {r}, α = {alpha}); use the extension below r0"
        )));
    }
    Ok(if alpha == 0.0 { r.ln() } else { r.powf(alpha) })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TestKind {
    W,
    V,
}

/// Value at the origin of a `V` extension.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VAnchor {
    /// `profile(0) = 0`
    Zero,
    /// `profile(0) = V_α(r0)/2 > 0`
    HalfAtR0,
}

/// One polynomial piece on `[start, end]`, `p(r) = Σ coeffs[k] t^k` with
/// `t = (r − start)/(end − start)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BridgePiece {
    pub start: f64,
    pub end: f64,
    pub coeffs: [f64; 6],
}

impl BridgePiece {
    /// Quintic Hermite interpolant of value/slope/curvature at both ends.
    fn hermite(start: f64, end: f64, left: [f64; 3], right: [f64; 3]) -> Self {
        let h = end - start;
        let (p0, d0, c0) = (left[0], left[1] * h, left[2] * h * h);
        let (p1, d1, c1) = (right[0], right[1] * h, right[2] * h * h);
        // p(t) = p0 + d0 t + c0/2 t² + a3 t³ + a4 t⁴ + a5 t⁵
        let e0 = p1 - p0 - d0 - 0.5 * c0;
        let e1 = d1 - d0 - c0;
        let e2 = c1 - c0;
        let a3 = 10.0 * e0 - 4.0 * e1 + 0.5 * e2;
        let a4 = -15.0 * e0 + 7.0 * e1 - e2;
        let a5 = 6.0 * e0 - 3.0 * e1 + 0.5 * e2;
        BridgePiece {
            start,
            end,
            coeffs: [p0, d0, 0.5 * c0, a3, a4, a5],
        }
    }

    /// `(p, p', p'', p''')` in the radial variable.
    fn derivs(&self, r: f64) -> [f64; 4] {
        let h = self.end - self.start;
        let t = (r - self.start) / h;
        let c = &self.coeffs;
        let mut v = [0.0; 4];
        for (k, &ck) in c.iter().enumerate() {
            let kf = k as f64;
            v[0] += ck * t.powi(k as i32);
            if k >= 1 {
                v[1] += ck * kf * t.powi(k as i32 - 1);
            }
            if k >= 2 {
                v[2] += ck * kf * (kf - 1.0) * t.powi(k as i32 - 2);
            }
            if k >= 3 {
                v[3] += ck * kf * (kf - 1.0) * (kf - 2.0) * t.powi(k as i32 - 3);
            }
        }
        [v[0], v[1] / h, v[2] / (h * h), v[3] / (h * h * h)]
    }

    /// `p(a + delta) − p(a)` for `a, a + delta` in the piece, without
    /// cancellation.
    fn difference(&self, a: f64, delta: f64) -> f64 {
        let h = self.end - self.start;
        let u = (a - self.start) / h;
        let dt = delta / h;
        let t = u + dt;
        // t^k − u^k = (t − u) Σ_{j<k} t^j u^{k−1−j}
        let mut s = 0.0;
        for (k, &ck) in self.coeffs.iter().enumerate().skip(1) {
            let mut q = 0.0;
            for j in 0..k {
                q += t.powi(j as i32) * u.powi((k - 1 - j) as i32);
            }
            s += ck * q;
        }
        s * dt
    }
}

/// Radial `C²` extension of `W_α` or `V_α`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestFunction {
    pub kind: TestKind,
    pub alpha: f64,
    pub r0: f64,
    /// Bridge on `[0, r0]`: one quintic, or two quintic pieces when the
    /// single quintic is not monotone.
    pub bridge: Vec<BridgePiece>,
    pub fallback_used: bool,
}

const MONOTONE_SAMPLES: usize = 10_000;

/// `(F, F', F'', F''')` of the closed form at `r > 0`.
pub(crate) fn closed_derivs(kind: TestKind, alpha: f64, r: f64) -> [f64; 4] {
    let a = alpha;
    match kind {
        TestKind::W => {
            let p = r.powf(-a);
            [
                1.0 - p,
                a * p / r,
                -a * (a + 1.0) * p / (r * r),
                a * (a + 1.0) * (a + 2.0) * p / (r * r * r),
            ]
        }
        TestKind::V if a == 0.0 => [r.ln(), 1.0 / r, -1.0 / (r * r), 2.0 / (r * r * r)],
        TestKind::V => {
            let p = r.powf(a);
            [
                p,
                a * p / r,
                a * (a - 1.0) * p / (r * r),
                a * (a - 1.0) * (a - 2.0) * p / (r * r * r),
            ]
        }
    }
}

/// `F(a + delta) − F(a)` for the closed form, without cancellation.
pub(crate) fn closed_difference(kind: TestKind, alpha: f64, a: f64, delta: f64) -> f64 {
    let rel = delta / a;
    match kind {
        TestKind::W => -a.powf(-alpha) * (-alpha * rel.ln_1p()).exp_m1(),
        TestKind::V if alpha == 0.0 => rel.ln_1p(),
        TestKind::V => a.powf(alpha) * (alpha * rel.ln_1p()).exp_m1(),
    }
}

fn is_monotone(pieces: &[BridgePiece]) -> bool {
    is_monotone_at(pieces, MONOTONE_SAMPLES)
}

fn is_monotone_at(pieces: &[BridgePiece], samples: usize) -> bool {
    for p in pieces {
        for k in 0..=samples {
            let r = p.start + (p.end - p.start) * k as f64 / samples as f64;
            if p.derivs(r)[1] < -1e-12 * (1.0 + p.coeffs[0].abs()) {
                return false;
            }
        }
    }
    true
}

/// Extension with the default anchor (`ε` from the params for `W`,
/// `profile(0) = 0` for `V`).
pub fn build_extension(kind: TestKind, params: &CriterionParams) -> Result<TestFunction> {
    build_extension_anchored(kind, params, VAnchor::Zero)
}

pub fn build_extension_anchored(kind: TestKind, params: &CriterionParams, anchor: VAnchor) -> Result<TestFunction> {
    let alpha = params.alpha;
    let r0 = params.r0;
    if !(r0 > 1.0) || !(alpha >= 0.0) {
        return Err(LevyError::Config(format!(
            "need r0 > 1 and α ≥ 0 (r0 = {r0}, α = {alpha})"
        )));
    }
    if kind == TestKind::W && alpha == 0.0 {
        return Err(LevyError::Config("W_α requires α > 0".into()));
    }
    let right = closed_derivs(kind, alpha, r0);
    let base = match kind {
        TestKind::W => {
            let eps = params.eps_value();
            let hi = 1.0 - r0.powf(-alpha);
            if !(eps > 0.0 && eps <= hi) {
                return Err(LevyError::Config(format!("ε = {eps} outside (0, {hi}]")));
            }
            hi - eps
        }
        TestKind::V => match anchor {
            VAnchor::Zero => 0.0,
            VAnchor::HalfAtR0 => 0.5 * right[0],
        },
    };
    let left = [base, 0.0, 0.0];
    let rt = [right[0], right[1], right[2]];
    let single = vec![BridgePiece::hermite(0.0, r0, left, rt)];
    if is_monotone(&single) {
        return Ok(TestFunction {
            kind,
            alpha,
            r0,
            bridge: single,
            fallback_used: false,
        });
    }
    // Two pieces joined at r = k·r0 with value v, slope s and zero curvature.
    // Knots are tried on a uniform grid and then geometrically closer to r0,
    // which is where steep transitions have to happen.
    let total = right[0] - base;
    let mean = total / r0;
    let knots = (1..20)
        .map(|i| i as f64 / 20.0)
        .chain((5..40).map(|j| 1.0 - 0.5f64.powi(j)));
    for k in knots {
        let w = r0 * (1.0 - k);
        let values = (1..20)
            .map(|i| base + total * i as f64 / 20.0)
            .chain((1..=10).map(|i| right[0] - w * right[1] * i as f64 / 10.0))
            .filter(|&v| v > base && v < right[0]);
        for v in values {
            let slopes = (0..=10)
                .map(|i| mean * i as f64 / 2.0)
                .chain((0..=8).map(|i| right[1] * i as f64 / 4.0));
            for s in slopes {
                let pieces = vec![
                    BridgePiece::hermite(0.0, k * r0, left, [v, s, 0.0]),
                    BridgePiece::hermite(k * r0, r0, [v, s, 0.0], rt),
                ];
                if is_monotone_at(&pieces, 64) && is_monotone(&pieces) {
                    return Ok(TestFunction {
                        kind,
                        alpha,
                        r0,
                        bridge: pieces,
                        fallback_used: true,
                    });
                }
            }
        }
    }
    Err(LevyError::Extension(format!(
        "no monotone C² bridge for {kind:?} with α = {alpha}, r0 = {r0}, profile(0) = {base}"
    )))
}

/// Value, gradient and row-major Hessian of `x ↦ profile(|x|)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Derivs {
    pub value: f64,
    pub gradient: Vec<f64>,
    pub hessian: Vec<f64>,
}

impl TestFunction {
    /// `(p, p', p'', p''')` of the radial profile.
    pub fn radial(&self, r: f64) -> [f64; 4] {
        let r = r.abs();
        if r >= self.r0 {
            return closed_derivs(self.kind, self.alpha, r);
        }
        self.piece(r).derivs(r)
    }

    fn piece(&self, r: f64) -> &BridgePiece {
        self.bridge
            .iter()
            .find(|p| r < p.end)
            .unwrap_or_else(|| self.bridge.last().expect("bridge has at least one piece"))
    }

    pub fn profile(&self, r: f64) -> f64 {
        self.radial(r)[0]
    }

    /// Radii where the profile changes formula.
    pub fn seams(&self) -> Vec<f64> {
        self.bridge.iter().map(|p| p.end).collect()
    }

    /// `profile(a + delta) − profile(a)`, accurate for small `delta`.
    pub fn increment(&self, a: f64, delta: f64) -> f64 {
        let b = a + delta;
        let (lo, hi) = if delta >= 0.0 { (a, b) } else { (b, a) };
        let seams: Vec<f64> = self.seams().into_iter().filter(|&s| s > lo && s < hi).collect();
        if seams.is_empty() {
            return if lo >= self.r0 {
                closed_difference(self.kind, self.alpha, a, delta)
            } else {
                self.piece(lo).difference(a, delta)
            };
        }
        let mut cuts = vec![lo];
        cuts.extend(seams);
        cuts.push(hi);
        let up: f64 = cuts
            .windows(2)
            .map(|w| {
                let (l, h) = (w[0], w[1]);
                if l >= self.r0 {
                    closed_difference(self.kind, self.alpha, l, h - l)
                } else {
                    self.piece(l).difference(l, h - l)
                }
            })
            .sum();
        if delta >= 0.0 {
            up
        } else {
            -up
        }
    }

    /// Upper bound on the operator norm of the third derivative tensor of
    /// `x ↦ profile(|x|)` over `r ∈ [lo, hi]` (sampled, with a safety factor).
    pub fn third_derivative_bound(&self, lo: f64, hi: f64) -> f64 {
        let lo = lo.max(0.0);
        let n = 16;
        let mut m: f64 = 0.0;
        let mut pts: Vec<f64> = (0..=n).map(|k| lo + (hi - lo) * k as f64 / n as f64).collect();
        pts.extend(self.seams().into_iter().filter(|&s| s > lo && s < hi));
        for r in pts {
            let rr = r.max(1e-3 * self.r0);
            let [_, p1, p2, p3] = self.radial(rr);
            let g = p1 / rr;
            m = m.max(p3.abs() + 4.0 * (p2 - g).abs() / rr);
        }
        1.5 * m
    }
}

pub fn eval_extension(f: &TestFunction, x: &[f64]) -> f64 {
    f.profile(norm(x))
}

pub fn eval_extension_derivs(f: &TestFunction, x: &[f64]) -> Derivs {
    let d = x.len();
    let r = norm(x);
    let [p, p1, p2, _] = f.radial(r);
    let mut hessian = vec![0.0; d * d];
    if r == 0.0 {
        for i in 0..d {
            hessian[i * d + i] = p2;
        }
        return Derivs {
            value: p,
            gradient: vec![0.0; d],
            hessian,
        };
    }
    let n: Vec<f64> = x.iter().map(|v| v / r).collect();
    let g = p1 / r;
    for i in 0..d {
        for j in 0..d {
            let delta = if i == j { 1.0 } else { 0.0 };
            hessian[i * d + j] = p2 * n[i] * n[j] + g * (delta - n[i] * n[j]);
        }
    }
    Derivs {
        value: p,
        gradient: n.iter().map(|v| v * p1).collect(),
        hessian,
    }
}

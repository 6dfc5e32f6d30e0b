//! Integration against a Lévy measure frozen at a state point.
//!
//! Three integrand shapes cover every consumer in the crate:
//! radial integrands `g(|y|)`, axial integrands `h(|y|, cos∠(y, axis))` (radial
//! test functions shifted by `x`, and symbol integrands), and the vector /
//! matrix moments the simulator needs.
//!
//! Isotropic kernels are integrated in coordinates aligned with the axis, so
//! the angular part is one-dimensional and the geometric breakpoints
//! `|y + s·axis| = L` are resolved exactly. Non-isotropic densities fall back
//! to a refined spherical design.

use std::f64::consts::PI;

use crate::error::{LevyError, Result};
use crate::extended::Extended;
use crate::geometry::{dot, norm, sphere_area, sphere_design};
use crate::quadrature::{integrate, Estimate, Tolerance};

use super::DensityField;

/// Default truncation radius for densities without a tail-exponent hint.
pub const DEFAULT_TAIL_RADIUS: f64 = 1e6;

/// Lévy measure `ν(x, ·)` evaluated at a fixed state.
#[derive(Clone)]
pub enum FrozenKernel {
    /// `γ |y|^{-d-α} dy`
    Stable { dim: usize, alpha: f64, gamma: f64 },
    /// `density(at, y) dy`
    Density {
        dim: usize,
        density: DensityField,
        at: Vec<f64>,
        tail_exponent: Option<f64>,
        isotropic: bool,
    },
    /// `Σ m_j δ_{y_j}`
    Atoms { dim: usize, atoms: Vec<(Vec<f64>, f64)> },
}

/// Result of a measure integral.
#[derive(Debug, Clone, PartialEq)]
pub struct Integral {
    pub value: Extended,
    pub error: f64,
    pub warnings: Vec<String>,
}

impl Integral {
    fn finite(est: Estimate, warnings: Vec<String>) -> Self {
        Integral {
            value: Extended::Finite(est.value),
            error: est.error,
            warnings,
        }
    }

    fn divergent(reason: String) -> Self {
        Integral {
            value: Extended::PosInfinity,
            error: 0.0,
            warnings: vec![reason],
        }
    }
}

/// Geometry of an axial integrand `h(r, t)` with `r = |y|`, `t = ⟨y, axis⟩/|y|`.
///
/// `levels` are radii `L` of spheres `|y + shift·axis| = L` across which `h`
/// may be nonsmooth.
pub struct Axial<'a> {
    pub axis: &'a [f64],
    pub shift: f64,
    pub levels: &'a [f64],
}

/// Radial weight `w(r)` such that `∫ g(|y|) ν(dy) = ∫ g(r) w(r) dr` along
/// one direction family.
enum Weight<'a> {
    Stable {
        alpha: f64,
        gamma: f64,
    },
    Density {
        w: &'a dyn Fn(f64) -> f64,
        tail_exponent: Option<f64>,
        dim: usize,
    },
}

const MAX_DESIGN_LEVEL: [u32; 4] = [0, 0, 5, 3];

impl FrozenKernel {
    pub fn dim(&self) -> usize {
        match self {
            FrozenKernel::Stable { dim, .. } | FrozenKernel::Density { dim, .. } | FrozenKernel::Atoms { dim, .. } => {
                *dim
            }
        }
    }

    /// True when `ν(A) = ν(−A)` is guaranteed structurally.
    pub fn is_symmetric(&self) -> bool {
        match self {
            FrozenKernel::Stable { .. } => true,
            FrozenKernel::Density { isotropic, .. } => *isotropic,
            FrozenKernel::Atoms { atoms, .. } => atoms.iter().all(|(y, m)| {
                atoms.iter().any(|(z, n)| {
                    (n - m).abs() <= 1e-14 * m.abs().max(1.0) && y.iter().zip(z).all(|(a, b)| (a + b).abs() <= 1e-14)
                })
            }),
        }
    }

    pub fn is_isotropic(&self) -> bool {
        match self {
            FrozenKernel::Stable { .. } => true,
            FrozenKernel::Density { isotropic, .. } => *isotropic,
            FrozenKernel::Atoms { atoms, .. } => atoms.is_empty(),
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            FrozenKernel::Atoms { atoms, .. } => atoms.iter().all(|(_, m)| *m == 0.0),
            _ => false,
        }
    }

    /// `∫_{lo ≤ |y| < hi} g(|y|) ν(dy)`. `growth` is the power `p` with
    /// `|g(r)| ≲ r^p` as `r → ∞` (used for divergence detection and for the
    /// tail substitution).
    pub fn integrate_radial(
        &self,
        lo: f64,
        hi: f64,
        growth: f64,
        g: &dyn Fn(f64) -> f64,
        tol: Tolerance,
    ) -> Result<Integral> {
        match self {
            FrozenKernel::Atoms { atoms, .. } => {
                let s = atoms
                    .iter()
                    .filter_map(|(y, m)| {
                        let r = norm(y);
                        (r >= lo && r < hi).then(|| m * g(r))
                    })
                    .sum();
                Ok(Integral::finite(Estimate { value: s, error: 0.0 }, vec![]))
            }
            FrozenKernel::Stable { dim, alpha, gamma } => {
                let w = Weight::Stable {
                    alpha: *alpha,
                    gamma: *gamma,
                };
                let out = radial_1d(&w, lo, hi, &[], growth, g, tol)?;
                Ok(Integral {
                    value: out.value.scale(sphere_area(*dim)),
                    ..out
                })
            }
            FrozenKernel::Density {
                dim,
                density,
                at,
                tail_exponent,
                isotropic,
            } => {
                if *isotropic {
                    let mut e1 = vec![0.0; *dim];
                    e1[0] = 1.0;
                    let d = *dim;
                    let wf = |r: f64| {
                        let y: Vec<f64> = e1.iter().map(|v| v * r).collect();
                        density(at, &y) * r.powi(d as i32 - 1)
                    };
                    let w = Weight::Density {
                        w: &wf,
                        tail_exponent: *tail_exponent,
                        dim: d,
                    };
                    let out = radial_1d(&w, lo, hi, &[], growth, g, tol)?;
                    Ok(Integral {
                        value: out.value.scale(sphere_area(d)),
                        ..out
                    })
                } else {
                    self.design_integral(lo, hi, growth, tol, |_u| Vec::new(), |r, _u| g(r))
                }
            }
        }
    }

    /// `∫_{lo ≤ |y| < hi} h(|y|, ⟨y, axis⟩/|y|) ν(dy)` for a unit `axis`.
    pub fn integrate_axial(
        &self,
        lo: f64,
        hi: f64,
        growth: f64,
        geometry: &Axial<'_>,
        h: &dyn Fn(f64, f64) -> f64,
        tol: Tolerance,
    ) -> Result<Integral> {
        let axis = geometry.axis;
        match self {
            FrozenKernel::Atoms { atoms, .. } => {
                let s = atoms
                    .iter()
                    .filter_map(|(y, m)| {
                        let r = norm(y);
                        (r >= lo && r < hi && r > 0.0).then(|| m * h(r, dot(y, axis) / r))
                    })
                    .sum();
                Ok(Integral::finite(Estimate { value: s, error: 0.0 }, vec![]))
            }
            FrozenKernel::Stable { dim, alpha, gamma } => {
                let w = Weight::Stable {
                    alpha: *alpha,
                    gamma: *gamma,
                };
                aligned_integral(&w, *dim, lo, hi, growth, geometry, h, tol)
            }
            FrozenKernel::Density {
                dim,
                density,
                at,
                tail_exponent,
                isotropic,
            } => {
                let d = *dim;
                if *isotropic {
                    let mut e1 = vec![0.0; d];
                    e1[0] = 1.0;
                    let wf = |r: f64| {
                        let y: Vec<f64> = e1.iter().map(|v| v * r).collect();
                        density(at, &y) * r.powi(d as i32 - 1)
                    };
                    let w = Weight::Density {
                        w: &wf,
                        tail_exponent: *tail_exponent,
                        dim: d,
                    };
                    aligned_integral(&w, d, lo, hi, growth, geometry, h, tol)
                } else {
                    let s = geometry.shift;
                    let levels = geometry.levels;
                    self.design_integral(
                        lo,
                        hi,
                        growth,
                        tol,
                        |u| {
                            let t = dot(u, axis);
                            let mut b = Vec::new();
                            for &l in levels {
                                let disc = s * s * t * t - s * s + l * l;
                                if disc >= 0.0 {
                                    b.push(-s * t + disc.sqrt());
                                    b.push(-s * t - disc.sqrt());
                                }
                            }
                            b
                        },
                        |r, u| h(r, dot(u, axis)),
                    )
                }
            }
        }
    }

    /// Tail mass style quantity `ν({lo ≤ |y| < hi})`.
    pub fn mass(&self, lo: f64, hi: f64) -> Result<Extended> {
        if lo <= 0.0 && matches!(self, FrozenKernel::Stable { .. }) {
            return Ok(Extended::PosInfinity);
        }
        match self.integrate_radial(lo, hi, 0.0, &|_| 1.0, Tolerance::default()) {
            Ok(v) => Ok(v.value),
            Err(LevyError::Integrability(_)) => Ok(Extended::PosInfinity),
            Err(e) => Err(e),
        }
    }

    /// `∫_{lo ≤ |y| < hi} y ν(dy)`.
    pub fn first_moment_vector(&self, lo: f64, hi: f64) -> Result<Vec<f64>> {
        let d = self.dim();
        if self.is_isotropic() {
            return Ok(vec![0.0; d]);
        }
        let mut out = vec![0.0; d];
        for k in 0..d {
            let mut e = vec![0.0; d];
            e[k] = 1.0;
            let geo = Axial {
                axis: &e,
                shift: 0.0,
                levels: &[],
            };
            let v = self.integrate_axial(lo, hi, 1.0, &geo, &|r, t| r * t, Tolerance::default())?;
            out[k] = v
                .value
                .finite()
                .ok_or_else(|| LevyError::Integrability("first moment of the jump kernel diverges".into()))?;
        }
        Ok(out)
    }

    /// `∫_{lo ≤ |y| < hi} y yᵀ ν(dy)` (row-major).
    pub fn second_moment_matrix(&self, lo: f64, hi: f64) -> Result<Vec<f64>> {
        let d = self.dim();
        let mut out = vec![0.0; d * d];
        match self {
            FrozenKernel::Atoms { atoms, .. } => {
                for (y, m) in atoms {
                    let r = norm(y);
                    if r >= lo && r < hi {
                        for i in 0..d {
                            for j in 0..d {
                                out[i * d + j] += m * y[i] * y[j];
                            }
                        }
                    }
                }
            }
            _ if self.is_isotropic() => {
                let m2 = self
                    .integrate_radial(lo, hi, 2.0, &|r| r * r, Tolerance::default())?
                    .value
                    .finite()
                    .ok_or_else(|| LevyError::Integrability("second moment diverges".into()))?;
                for i in 0..d {
                    out[i * d + i] = m2 / d as f64;
                }
            }
            _ => {
                for i in 0..d {
                    for j in i..d {
                        let mut e = vec![0.0; d];
                        e[i] = 1.0;
                        let mut f = vec![0.0; d];
                        f[j] = 1.0;
                        // ⟨y,e⟩⟨y,f⟩ through two axial integrals of the polarisation
                        let v = self.polarised_second_moment(lo, hi, &e, &f)?;
                        out[i * d + j] = v;
                        out[j * d + i] = v;
                    }
                }
            }
        }
        Ok(out)
    }

    fn polarised_second_moment(&self, lo: f64, hi: f64, e: &[f64], f: &[f64]) -> Result<f64> {
        let p: Vec<f64> = e.iter().zip(f).map(|(a, b)| a + b).collect();
        let m: Vec<f64> = e.iter().zip(f).map(|(a, b)| a - b).collect();
        let mut vals = [0.0; 2];
        for (k, v) in [p, m].iter().enumerate() {
            let n = norm(v);
            if n == 0.0 {
                continue;
            }
            let axis: Vec<f64> = v.iter().map(|c| c / n).collect();
            let geo = Axial {
                axis: &axis,
                shift: 0.0,
                levels: &[],
            };
            let q = self.integrate_axial(lo, hi, 2.0, &geo, &|r, t| (r * t).powi(2), Tolerance::default())?;
            vals[k] = n * n * q.value.finite().unwrap_or(f64::INFINITY);
        }
        Ok(0.25 * (vals[0] - vals[1]))
    }

    /// Non-isotropic densities: per-direction radial integrals over a refined
    /// spherical design.
    fn design_integral(
        &self,
        lo: f64,
        hi: f64,
        growth: f64,
        tol: Tolerance,
        breaks: impl Fn(&[f64]) -> Vec<f64>,
        h: impl Fn(f64, &[f64]) -> f64,
    ) -> Result<Integral> {
        let FrozenKernel::Density {
            dim,
            density,
            at,
            tail_exponent,
            ..
        } = self
        else {
            unreachable!("design integration is only used for densities");
        };
        let d = *dim;
        let max_level = if d < MAX_DESIGN_LEVEL.len() {
            MAX_DESIGN_LEVEL[d]
        } else {
            2
        };
        let mut prev: Option<f64> = None;
        let mut warnings = Vec::new();
        let mut last = Estimate::ZERO;
        for level in 0..=max_level {
            let mut total = Estimate::ZERO;
            for (u, wu) in sphere_design(d, level) {
                let wf = |r: f64| {
                    let y: Vec<f64> = u.iter().map(|c| c * r).collect();
                    density(at, &y) * r.powi(d as i32 - 1)
                };
                let w = Weight::Density {
                    w: &wf,
                    tail_exponent: *tail_exponent,
                    dim: d,
                };
                let b = breaks(&u);
                let gi = |r: f64| h(r, &u);
                let part = radial_1d(&w, lo, hi, &b, growth, &gi, tol)?;
                for wmsg in part.warnings {
                    if !warnings.contains(&wmsg) {
                        warnings.push(wmsg);
                    }
                }
                match part.value {
                    Extended::Finite(v) => {
                        total = total
                            + Estimate {
                                value: wu * v,
                                error: wu * part.error,
                            }
                    }
                    Extended::PosInfinity => return Ok(Integral::divergent(warnings.join("; "))),
                }
            }
            if let Some(p) = prev {
                let change = (total.value - p).abs();
                total.error = total.error.max(change);
                last = total;
                if change <= 1e-8 * total.value.abs().max(1e-300) {
                    return Ok(Integral::finite(total, warnings));
                }
            } else {
                last = total;
            }
            prev = Some(total.value);
            if d == 1 {
                return Ok(Integral::finite(total, warnings));
            }
        }
        warnings.push(format!(
            "angular design refinement stopped at the finest level (estimated error {:.2e})",
            last.error
        ));
        Ok(Integral::finite(last, warnings))
    }
}

/// Isotropic kernels: axis-aligned (r, θ) integration.
#[allow(clippy::too_many_arguments)]
fn aligned_integral(
    w: &Weight<'_>,
    d: usize,
    lo: f64,
    hi: f64,
    growth: f64,
    geometry: &Axial<'_>,
    h: &dyn Fn(f64, f64) -> f64,
    tol: Tolerance,
) -> Result<Integral> {
    let s = geometry.shift;
    let mut rbreaks = Vec::new();
    for &l in geometry.levels {
        rbreaks.push((s - l).abs());
        rbreaks.push(s + l);
    }
    if d == 1 {
        let mut total = Estimate::ZERO;
        let mut warnings = Vec::new();
        for t in [1.0, -1.0] {
            let g = |r: f64| h(r, t);
            let part = radial_1d(w, lo, hi, &rbreaks, growth, &g, tol)?;
            warnings.extend(part.warnings);
            match part.value {
                Extended::Finite(v) => {
                    total = total
                        + Estimate {
                            value: v,
                            error: part.error,
                        }
                }
                Extended::PosInfinity => return Ok(Integral::divergent(warnings.join("; "))),
            }
        }
        return Ok(Integral::finite(total, warnings));
    }
    let factor = sphere_area(d - 1);
    let inner_tol = Tolerance::new(tol.abs * 0.1, tol.rel * 0.1);
    let inner_failed = std::cell::Cell::new(None::<LevyError>);
    let g = |r: f64| -> f64 {
        let mut tb = Vec::new();
        if s > 0.0 && r > 0.0 {
            for &l in geometry.levels {
                let c = (l * l - r * r - s * s) / (2.0 * r * s);
                if c > -1.0 && c < 1.0 {
                    tb.push(c.acos());
                }
            }
        }
        let f = |th: f64| h(r, th.cos()) * th.sin().powi(d as i32 - 2);
        match integrate(f, 0.0, PI, &tb, inner_tol) {
            Ok(e) => factor * e.value,
            // overflow far out in the tail: let the radial rule judge it
            Err(LevyError::Evaluation(_)) => f64::NAN,
            Err(err) => {
                inner_failed.set(Some(err));
                0.0
            }
        }
    };
    let out = radial_1d(w, lo, hi, &rbreaks, growth, &g, tol)?;
    if let Some(err) = inner_failed.take() {
        return Err(err);
    }
    Ok(out)
}

/// `∫_{lo}^{hi} g(r) w(r) dr` with substitutions that regularise the
/// singular weight at the origin and the slowly decaying tail.
fn radial_1d(
    w: &Weight<'_>,
    lo: f64,
    hi: f64,
    breaks: &[f64],
    growth: f64,
    g: &dyn Fn(f64) -> f64,
    tol: Tolerance,
) -> Result<Integral> {
    if hi <= lo {
        return Ok(Integral::finite(Estimate::ZERO, vec![]));
    }
    match *w {
        Weight::Stable { alpha, gamma } => {
            if hi == f64::INFINITY && growth >= alpha {
                return Ok(Integral::divergent(format!(
                    "tail integral of order {growth} against a stable kernel of index {alpha} diverges"
                )));
            }
            let mut total = Estimate::ZERO;
            // small part: u = r^{2-α}
            let s_hi = hi.min(1.0);
            if lo < s_hi {
                let e = 2.0 - alpha;
                let ua = lo.powf(e);
                let ub = s_hi.powf(e);
                let ub_breaks: Vec<f64> = breaks
                    .iter()
                    .filter(|&&b| b > lo && b < s_hi)
                    .map(|b| b.powf(e))
                    .collect();
                let f = |u: f64| {
                    let r = u.powf(1.0 / e);
                    gamma / e * g(r) * u.powf(-2.0 / e)
                };
                total = total + integrate(f, ua, ub, &ub_breaks, tol)?;
            }
            // tail part: r = v^{-k/α}
            let t_lo = lo.max(1.0);
            if t_lo < hi {
                let k = if growth > 0.0 {
                    (alpha / (alpha - growth)).clamp(1.0, 20.0)
                } else {
                    1.0
                };
                let to_v = |r: f64| r.powf(-alpha / k);
                let va = if hi.is_finite() { to_v(hi) } else { 0.0 };
                let vb = to_v(t_lo);
                let vb_breaks: Vec<f64> = breaks
                    .iter()
                    .filter(|&&b| b > t_lo && b < hi)
                    .map(|&b| to_v(b))
                    .collect();
                let f = |v: f64| {
                    let r = v.powf(-k / alpha);
                    if !r.is_finite() {
                        return 0.0;
                    }
                    let val = gamma / alpha * g(r) * k * v.powf(k - 1.0);
                    if val.is_finite() {
                        val
                    } else {
                        0.0
                    }
                };
                total = total + integrate(f, va, vb, &vb_breaks, tol)?;
            }
            Ok(Integral::finite(total, vec![]))
        }
        Weight::Density {
            w: wf,
            tail_exponent,
            dim,
        } => {
            let mut warnings = Vec::new();
            let mut total = Estimate::ZERO;
            let s_hi = hi.min(1.0);
            if lo < s_hi {
                total = total + small_density(wf, g, lo, s_hi, breaks, tol)?;
            }
            let t_lo = lo.max(1.0);
            if t_lo < hi {
                if hi == f64::INFINITY {
                    if let Some(kappa) = tail_exponent {
                        if growth + dim as f64 - kappa >= 0.0 {
                            return Ok(Integral::divergent(format!(
                                "density tail ~|y|^-{kappa} has no moment of order {growth}"
                            )));
                        }
                    }
                }
                let (part, warn) = tail_density(wf, g, t_lo, hi, breaks, growth, tail_exponent, dim, total.value, tol)?;
                total = total + part;
                warnings.extend(warn);
            }
            Ok(Integral::finite(total, warnings))
        }
    }
}

/// `∫_lo^hi g w dr` on `(0, 1]` through `r = e^{-s}`; `lo = 0` is handled by
/// marching outward in `s` until contributions are negligible.
fn small_density(
    w: &dyn Fn(f64) -> f64,
    g: &dyn Fn(f64) -> f64,
    lo: f64,
    hi: f64,
    breaks: &[f64],
    tol: Tolerance,
) -> Result<Estimate> {
    let f = |s: f64| {
        let r = (-s).exp();
        g(r) * w(r) * r
    };
    let s_lo = -hi.ln();
    let sb: Vec<f64> = breaks.iter().filter(|&&b| b > lo && b < hi).map(|b| -b.ln()).collect();
    if lo > 0.0 {
        return integrate(f, s_lo, -lo.ln(), &sb, tol);
    }
    let mut total = Estimate::ZERO;
    let mut a = s_lo;
    let mut growing = 0;
    let mut prev_chunk = f64::INFINITY;
    let mut prev_ratio = f64::NAN;
    loop {
        let b = a + 4.0;
        let chunk = integrate(f, a, b, &sb, tol)?;
        total = total + chunk;
        let c = chunk.value.abs();
        if c >= prev_chunk && c > 0.0 {
            growing += 1;
            if growing >= 5 {
                return Err(LevyError::Integrability(
                    "jump density is not square-integrable near the origin".into(),
                ));
            }
        } else {
            growing = 0;
        }
        if c <= 1e-14 * total.value.abs() && a > s_lo + 8.0 {
            break;
        }
        // power-law behaviour near the origin makes successive chunks
        // geometric; once the ratio settles the remainder is summed in closed form
        let ratio = chunk.value / (prev_chunk * chunk.value.signum());
        if prev_chunk.is_finite() && ratio > 0.0 && ratio < 0.98 && (ratio - prev_ratio).abs() <= 1e-6 * ratio {
            let rest = chunk.value * ratio / (1.0 - ratio);
            total.value += rest;
            total.error += (rest * 1e-6).abs();
            break;
        }
        if b > 700.0 {
            break;
        }
        prev_ratio = ratio;
        prev_chunk = c;
        a = b;
    }
    Ok(total)
}

#[allow(clippy::too_many_arguments)]
fn tail_density(
    w: &dyn Fn(f64) -> f64,
    g: &dyn Fn(f64) -> f64,
    lo: f64,
    hi: f64,
    breaks: &[f64],
    growth: f64,
    tail_exponent: Option<f64>,
    dim: usize,
    prior: f64,
    tol: Tolerance,
) -> Result<(Estimate, Vec<String>)> {
    let f = |s: f64| {
        let r = s.exp();
        g(r) * w(r) * r
    };
    let sb: Vec<f64> = breaks.iter().filter(|&&b| b > lo && b < hi).map(|b| b.ln()).collect();
    if hi.is_finite() {
        return Ok((integrate(f, lo.ln(), hi.ln(), &sb, tol)?, vec![]));
    }
    match tail_exponent {
        None => {
            let est = integrate(f, lo.ln(), DEFAULT_TAIL_RADIUS.ln(), &sb, tol)?;
            Ok((
                est,
                vec![format!(
                    "no tail-exponent hint: integral truncated at |y| = {DEFAULT_TAIL_RADIUS:e}"
                )],
            ))
        }
        Some(kappa) => {
            // remaining tail beyond R bounded by |f(ln R)| / (κ − d − p)
            let decay = kappa - dim as f64 - growth;
            let mut total = Estimate::ZERO;
            let mut a = lo.ln();
            loop {
                let b = a + 2.0;
                total = total + integrate(f, a, b, &sb, tol)?;
                // envelope of |f| over the chunk guards against oscillating integrands
                let env = (0..=16)
                    .map(|i| f(a + (b - a) * i as f64 / 16.0).abs())
                    .fold(0.0, f64::max);
                let rest = env / decay;
                if rest <= 1e-10 * (total.value + prior).abs() || b > 700.0 {
                    total.error += rest;
                    break;
                }
                a = b;
            }
            Ok((total, vec![]))
        }
    }
}

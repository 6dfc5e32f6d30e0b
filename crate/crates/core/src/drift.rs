//! Drift quantities `T_α`, `R_α` and their constituent terms, closed-form
//! bounds on the big-jump terms, and the full generator applied to the
//! extended test functions.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{LevyError, Result};
use crate::extended::Extended;
use crate::geometry::{ball_points, norm, scaled};
use crate::quadrature::Tolerance;
use crate::quadruple::{
    abc_functionals, small_jump_moment, tail_moment, Axial, FrozenKernel, LevyQuadruple, TailMoment,
};
use crate::testfn::{closed_derivs, closed_difference, eval_extension_derivs, CriterionParams, TestFunction, TestKind};

/// How a big-jump term was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BigJumpMethod {
    Quadrature,
    AtomSum,
    ClosedFormBound,
}

/// A big-jump term with provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BigJumpTerm {
    pub value: Extended,
    pub method: BigJumpMethod,
    pub error: f64,
    pub warnings: Vec<String>,
}

/// The four terms of `T_α(x)` or `R_α(x)` and their sum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriftTermBreakdown {
    pub kill_term: f64,
    pub drift_diffusion_term: f64,
    /// Sum of absolute values of the pieces of `drift_diffusion_term`
    /// (killing, `A`, `C` and `B` contributions); a magnitude scale for margins.
    pub drift_diffusion_scale: f64,
    pub small_jump_term: f64,
    pub big_jump_term: Extended,
    pub total: Extended,
    pub big_jump_method: BigJumpMethod,
    pub warnings: Vec<String>,
}

impl DriftTermBreakdown {
    /// `Σ |terms|`, used to judge how significant a margin is.
    pub fn scale(&self) -> f64 {
        self.kill_term.abs()
            + self.drift_diffusion_scale
            + self.small_jump_term.abs()
            + self.big_jump_term.to_f64().abs()
    }
}

fn require_outside_unit(x: &[f64]) -> Result<f64> {
    let r = norm(x);
    if !(r > 1.0) {
        return Err(LevyError::Domain(format!("|x| = {r} must exceed 1")));
    }
    Ok(r)
}

fn require_outside_r0(x: &[f64], params: &CriterionParams) -> Result<f64> {
    let r = norm(x);
    if r < params.r0 {
        return Err(LevyError::Domain(format!(
            "|x| = {r} below r0 = {}: the drift terms are only defined for |x| ≥ r0",
            params.r0
        )));
    }
    Ok(r)
}

/// Small-jump coefficient multiplying `∫_{|y|<1}|y|² ν` in `D^W_α`.
pub fn d_w_factor(r: f64, alpha: f64) -> f64 {
    0.5 * alpha * ((r + 1.0).powf(-2.0 - alpha) - (2.0 + alpha) * (r + 1.0).powi(2) / (r - 1.0).powf(4.0 + alpha))
}

/// Small-jump coefficient multiplying `∫_{|y|<1}|y|² ν` in `D^V_α`.
pub fn d_v_factor(r: f64, alpha: f64) -> f64 {
    if alpha == 0.0 {
        0.5 * (r - 1.0).powi(-2)
    } else if alpha <= 2.0 {
        0.5 * alpha * (r - 1.0).powf(alpha - 2.0)
    } else if alpha <= 4.0 {
        0.5 * alpha * ((r - 1.0).powf(alpha - 2.0) - (2.0 - alpha) * (r + 1.0).powi(2) / (r - 1.0).powf(4.0 - alpha))
    } else {
        0.5 * alpha * ((r - 1.0).powf(alpha - 2.0) - (2.0 - alpha) * (r + 1.0).powf(alpha - 2.0))
    }
}

pub fn d_w_alpha(q: &LevyQuadruple, x: &[f64], params: &CriterionParams) -> Result<f64> {
    let r = require_outside_unit(x)?;
    let k = q.kernel(x)?;
    if k.is_zero() {
        return Ok(0.0);
    }
    Ok(d_w_factor(r, params.alpha) * small_jump_moment(&k)?)
}

pub fn d_v_alpha(q: &LevyQuadruple, x: &[f64], params: &CriterionParams) -> Result<f64> {
    let r = require_outside_unit(x)?;
    let k = q.kernel(x)?;
    if k.is_zero() {
        return Ok(0.0);
    }
    Ok(d_v_factor(r, params.alpha) * small_jump_moment(&k)?)
}

fn unit_axis(x: &[f64]) -> Vec<f64> {
    let r = norm(x);
    if r == 0.0 {
        let mut e = vec![0.0; x.len()];
        e[0] = 1.0;
        e
    } else {
        scaled(x, 1.0 / r)
    }
}

/// `|x + y| − |x|` from `R = |x|`, `s = |y|`, `t = cos∠(x, y)`, without cancellation.
fn radial_shift(big_r: f64, s: f64, t: f64) -> (f64, f64) {
    let rho2 = (big_r * big_r + s * s + 2.0 * big_r * s * t).max(0.0);
    let rho = rho2.sqrt();
    let delta = if rho + big_r > 0.0 {
        (2.0 * big_r * s * t + s * s) / (rho + big_r)
    } else {
        0.0
    };
    (rho, delta)
}

fn tail_tol() -> Tolerance {
    Tolerance::new(1e-13, 1e-10)
}

/// Growth order used for integrands of logarithmic growth.
const LOG_GROWTH: f64 = 1e-9;

fn v_growth(alpha: f64) -> f64 {
    if alpha == 0.0 {
        LOG_GROWTH
    } else {
        alpha
    }
}

fn no_tail_hint(k: &FrozenKernel) -> bool {
    matches!(
        k,
        FrozenKernel::Density {
            tail_exponent: None,
            ..
        }
    )
}

fn quadrature_method(k: &FrozenKernel) -> BigJumpMethod {
    match k {
        FrozenKernel::Atoms { .. } => BigJumpMethod::AtomSum,
        _ => BigJumpMethod::Quadrature,
    }
}

/// Exact `E^W_α` integral against a frozen kernel.
fn e_w_integral(k: &FrozenKernel, x: &[f64], params: &CriterionParams) -> Result<BigJumpTerm> {
    let big_r = norm(x);
    let alpha = params.alpha;
    let r0 = params.r0;
    let eps = params.eps_value();
    let axis = unit_axis(x);
    let inner = closed_derivs(TestKind::W, alpha, r0)[0] - eps - closed_derivs(TestKind::W, alpha, big_r)[0];
    let h = |s: f64, t: f64| {
        let (rho, delta) = radial_shift(big_r, s, t);
        if rho > r0 {
            closed_difference(TestKind::W, alpha, big_r, delta)
        } else {
            inner
        }
    };
    let geo = Axial {
        axis: &axis,
        shift: big_r,
        levels: &[r0],
    };
    let v = k.integrate_axial(1.0, f64::INFINITY, 0.0, &geo, &h, tail_tol())?;
    Ok(BigJumpTerm {
        value: v.value,
        method: quadrature_method(k),
        error: v.error,
        warnings: v.warnings,
    })
}

/// Exact `E^V_α` integral against a frozen kernel.
fn e_v_integral(k: &FrozenKernel, x: &[f64], params: &CriterionParams) -> Result<BigJumpTerm> {
    let big_r = norm(x);
    let alpha = params.alpha;
    let r0 = params.r0;
    let axis = unit_axis(x);
    let h = |s: f64, t: f64| {
        let (rho, delta) = radial_shift(big_r, s, t);
        if rho > r0 {
            closed_difference(TestKind::V, alpha, big_r, delta)
        } else {
            closed_difference(TestKind::V, alpha, big_r, r0 - big_r)
        }
    };
    let geo = Axial {
        axis: &axis,
        shift: big_r,
        levels: &[r0],
    };
    let v = k.integrate_axial(1.0, f64::INFINITY, v_growth(alpha), &geo, &h, tail_tol())?;
    Ok(BigJumpTerm {
        value: v.value,
        method: quadrature_method(k),
        error: v.error,
        warnings: v.warnings,
    })
}

/// `E^W_α(x)`: exact when the kernel is atomic or its tail is known,
/// otherwise the closed-form lower bound (for `α ≤ 1`).
pub fn e_w_alpha(q: &LevyQuadruple, x: &[f64], params: &CriterionParams) -> Result<BigJumpTerm> {
    require_outside_r0(x, params)?;
    let k = q.kernel(x)?;
    e_w_frozen(&k, x, params)
}

pub(crate) fn e_w_frozen(k: &FrozenKernel, x: &[f64], params: &CriterionParams) -> Result<BigJumpTerm> {
    if k.is_zero() {
        return Ok(BigJumpTerm {
            value: Extended::ZERO,
            method: BigJumpMethod::AtomSum,
            error: 0.0,
            warnings: vec![],
        });
    }
    if no_tail_hint(k) && params.alpha <= 1.0 {
        let lower = e_w_lower_bound(k, x, params)?;
        return Ok(BigJumpTerm {
            value: Extended::Finite(lower),
            method: BigJumpMethod::ClosedFormBound,
            error: 0.0,
            warnings: vec!["no tail-exponent hint: E^W replaced by its closed-form lower bound".into()],
        });
    }
    e_w_integral(k, x, params)
}

/// `E^V_α(x)`: exact when the kernel is atomic or its tail is known,
/// otherwise the closed-form upper bound. Divergence gives `+∞`.
pub fn e_v_alpha(q: &LevyQuadruple, x: &[f64], params: &CriterionParams) -> Result<BigJumpTerm> {
    require_outside_r0(x, params)?;
    let k = q.kernel(x)?;
    e_v_frozen(&k, x, params)
}

pub(crate) fn e_v_frozen(k: &FrozenKernel, x: &[f64], params: &CriterionParams) -> Result<BigJumpTerm> {
    if k.is_zero() {
        return Ok(BigJumpTerm {
            value: Extended::ZERO,
            method: BigJumpMethod::AtomSum,
            error: 0.0,
            warnings: vec![],
        });
    }
    if no_tail_hint(k) {
        let up = e_v_upper_bound(k, norm(x), params.alpha)?;
        let mut warnings = up.warnings;
        warnings.push("no tail-exponent hint: E^V replaced by its closed-form upper bound".into());
        return Ok(BigJumpTerm {
            value: up.value,
            method: BigJumpMethod::ClosedFormBound,
            error: up.error,
            warnings,
        });
    }
    e_v_integral(k, x, params)
}

/// Lower bound on `E^W_α` valid for `α ≤ 1`:
/// `−α/(r0|x|^α) ∫_{|x|>|y+x|>r0} |y| ν + (−1 + |x|^{-α}) ν(|y+x| ≤ r0)`,
/// both over `|y| ≥ 1`. The indicator sets are bounded, so both integrals are
/// resolved exactly.
fn e_w_lower_bound(k: &FrozenKernel, x: &[f64], params: &CriterionParams) -> Result<f64> {
    let big_r = norm(x);
    let alpha = params.alpha;
    let r0 = params.r0;
    let axis = unit_axis(x);
    let c1 = -alpha / (r0 * big_r.powf(alpha));
    let c2 = -1.0 + big_r.powf(-alpha);
    let h = |s: f64, t: f64| {
        let (rho, _) = radial_shift(big_r, s, t);
        let mut v = 0.0;
        if rho < big_r && rho > r0 {
            v += c1 * s;
        }
        if rho <= r0 {
            v += c2;
        }
        v
    };
    let levels = [r0, big_r];
    let geo = Axial {
        axis: &axis,
        shift: big_r,
        levels: &levels,
    };
    // the integrand vanishes for |y| > 2|x|
    let v = k.integrate_axial(1.0, 2.0 * big_r + 1.0, 0.0, &geo, &h, tail_tol())?;
    Ok(v.value.to_f64())
}

/// Upper bound on `E^V_α`: `∫ ln(1 + |y|/|x|) ν` for `α = 0`, and
/// `∫ ((|x| + |y|)^α − |x|^α) ν` for `α > 0`, over `|y| ≥ 1`.
fn e_v_upper_bound(k: &FrozenKernel, big_r: f64, alpha: f64) -> Result<crate::quadruple::Integral> {
    let g = |s: f64| {
        if alpha == 0.0 {
            (s / big_r).ln_1p()
        } else {
            big_r.powf(alpha) * (alpha * (s / big_r).ln_1p()).exp_m1()
        }
    };
    k.integrate_radial(1.0, f64::INFINITY, v_growth(alpha), &g, tail_tol())
}

/// Closed-form bounds on the big-jump terms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EBounds {
    pub lower: Option<f64>,
    pub upper: Option<Extended>,
}

/// Lower bound on `E^W_α` (`α ≤ 1` only) or upper bound on `E^V_α`.
pub fn e_bounds(q: &LevyQuadruple, x: &[f64], params: &CriterionParams, kind: TestKind) -> Result<EBounds> {
    let big_r = require_outside_r0(x, params)?;
    let k = q.kernel(x)?;
    if k.is_zero() {
        return Ok(match kind {
            TestKind::W => EBounds {
                lower: (params.alpha <= 1.0).then_some(0.0),
                upper: None,
            },
            TestKind::V => EBounds {
                lower: None,
                upper: Some(Extended::ZERO),
            },
        });
    }
    Ok(match kind {
        TestKind::W => EBounds {
            lower: if params.alpha <= 1.0 {
                Some(e_w_lower_bound(&k, x, params)?)
            } else {
                None
            },
            upper: None,
        },
        TestKind::V => EBounds {
            lower: None,
            upper: Some(e_v_upper_bound(&k, big_r, params.alpha)?.value),
        },
    })
}

/// The simplified upper bound on `E^V_α` for `α ≤ 1`: `|x|^{-1} M₁` (`α = 0`)
/// or `α|x|^{α−1} M₁` with `M₁ = ∫_{|y|≥1} |y| ν`.
pub fn e_v_first_moment_bound(q: &LevyQuadruple, x: &[f64], params: &CriterionParams) -> Result<Option<Extended>> {
    let big_r = require_outside_r0(x, params)?;
    let alpha = params.alpha;
    if alpha > 1.0 {
        return Ok(None);
    }
    let k = q.kernel(x)?;
    let m1 = tail_moment(&k, TailMoment::Power(1.0))?.value;
    let c = if alpha == 0.0 {
        1.0 / big_r
    } else {
        alpha * big_r.powf(alpha - 1.0)
    };
    Ok(Some(m1.scale(c)))
}

/// `T_α(x)` assembled term by term; a bounded big-jump term enters through
/// its lower bound.
pub fn t_alpha(q: &LevyQuadruple, x: &[f64], params: &CriterionParams) -> Result<DriftTermBreakdown> {
    let big_r = require_outside_r0(x, params)?;
    if big_r <= 1.0 {
        return Err(LevyError::Domain("|x| must exceed 1".into()));
    }
    let alpha = params.alpha;
    if !(alpha > 0.0) {
        return Err(LevyError::Config("T_α needs α > 0".into()));
    }
    let f = abc_functionals(q, x)?;
    let a = q.a(x)?;
    let w = closed_derivs(TestKind::W, alpha, big_r)[0];
    let pref = alpha * big_r.powf(-alpha);
    let dd = pref * (f.A - (1.0 + 0.5 * alpha) * f.C + f.B);
    let dd_scale = pref * (f.A.abs() + (1.0 + 0.5 * alpha) * f.C.abs() + f.B.abs());
    let k = q.kernel(x)?;
    let small = if k.is_zero() {
        0.0
    } else {
        d_w_factor(big_r, alpha) * small_jump_moment(&k)?
    };
    let big = e_w_frozen(&k, x, params)?;
    let kill = -a * w;
    let total = big.value + (kill + dd + small);
    Ok(DriftTermBreakdown {
        kill_term: kill,
        drift_diffusion_term: dd,
        drift_diffusion_scale: dd_scale,
        small_jump_term: small,
        big_jump_term: big.value,
        total,
        big_jump_method: big.method,
        warnings: big.warnings,
    })
}

/// `R_α(x)` assembled term by term; a bounded big-jump term enters through
/// its upper bound.
pub fn r_alpha(q: &LevyQuadruple, x: &[f64], params: &CriterionParams) -> Result<DriftTermBreakdown> {
    let big_r = require_outside_r0(x, params)?;
    let alpha = params.alpha;
    let f = abc_functionals(q, x)?;
    let a = q.a(x)?;
    let v = closed_derivs(TestKind::V, alpha, big_r)[0];
    let (dd, dd_scale) = if alpha == 0.0 {
        (f.A - f.C + f.B, f.A.abs() + f.C.abs() + f.B.abs())
    } else {
        let pref = alpha * big_r.powf(alpha);
        (
            pref * (f.A - (1.0 - 0.5 * alpha) * f.C + f.B),
            pref * (f.A.abs() + (1.0 - 0.5 * alpha).abs() * f.C.abs() + f.B.abs()),
        )
    };
    let k = q.kernel(x)?;
    let small = if k.is_zero() {
        0.0
    } else {
        d_v_factor(big_r, alpha) * small_jump_moment(&k)?
    };
    let big = e_v_frozen(&k, x, params)?;
    let kill = -a * v;
    let total = big.value + (kill + dd + small);
    Ok(DriftTermBreakdown {
        kill_term: kill,
        drift_diffusion_term: dd,
        drift_diffusion_scale: dd_scale,
        small_jump_term: small,
        big_jump_term: big.value,
        total,
        big_jump_method: big.method,
        warnings: big.warnings,
    })
}

/// `L f(x)` with the Taylor remainder bound of the small-jump split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorValue {
    pub value: Extended,
    /// Bound on the neglected third-order Taylor remainder over `|y| < δ`.
    pub remainder_bound: f64,
    pub taylor_radius: f64,
    pub warnings: Vec<String>,
}

const TAYLOR_START: f64 = 0.01;
const TAYLOR_MIN: f64 = 1e-7;
const TAYLOR_TARGET: f64 = 1e-9;

/// `L f(x) = −a f + ⟨b, ∇f⟩ + ½ tr(c ∇²f) + ∫ (f(x+y) − f(x) − ⟨y, ∇f(x)⟩1_{|y|<1}) ν(x, dy)`.
pub fn apply_generator(q: &LevyQuadruple, f: &TestFunction, x: &[f64]) -> Result<Extended> {
    apply_generator_detailed(q, f, x).map(|g| g.value)
}

pub fn apply_generator_detailed(q: &LevyQuadruple, f: &TestFunction, x: &[f64]) -> Result<GeneratorValue> {
    let d = q.dim;
    let der = eval_extension_derivs(f, x);
    let a = q.a(x)?;
    let b = q.b(x)?;
    let c = q.c(x)?;
    let mut local = -a * der.value;
    local += b.iter().zip(&der.gradient).map(|(u, v)| u * v).sum::<f64>();
    let mut tr = 0.0;
    for i in 0..d {
        for j in 0..d {
            tr += c[i * d + j] * der.hessian[j * d + i];
        }
    }
    local += 0.5 * tr;
    let k = q.kernel(x)?;
    if k.is_zero() {
        return Ok(GeneratorValue {
            value: Extended::Finite(local),
            remainder_bound: 0.0,
            taylor_radius: 0.0,
            warnings: vec![],
        });
    }
    let big_r = norm(x);
    let p1 = f.radial(big_r)[1];
    let axis = unit_axis(x);
    let mut warnings = Vec::new();

    // choose δ so that the third-order remainder over |y| < δ is negligible
    let mut delta = TAYLOR_START;
    let remainder = |delta: f64| -> Result<f64> {
        let m3 = f.third_derivative_bound(big_r - delta, big_r + delta);
        let cubic = k
            .integrate_radial(0.0, delta, 3.0, &|r| r * r * r, Tolerance::new(1e-16, 1e-8))?
            .value
            .to_f64();
        Ok(m3 / 6.0 * cubic)
    };
    let mut rem = remainder(delta)?;
    while rem > TAYLOR_TARGET && delta > TAYLOR_MIN {
        delta *= 0.25;
        rem = remainder(delta)?;
    }
    if rem > TAYLOR_TARGET {
        warnings.push(format!(
            "Taylor remainder bound {rem:.2e} above target at δ = {delta:e}"
        ));
    }
    let m = k.second_moment_matrix(0.0, delta)?;
    let mut small = 0.0;
    for i in 0..d {
        for j in 0..d {
            small += 0.5 * der.hessian[i * d + j] * m[i * d + j];
        }
    }

    let seams = f.seams();
    let geo = Axial {
        axis: &axis,
        shift: big_r,
        levels: &seams,
    };
    let annulus = |s: f64, t: f64| {
        let (_, dlt) = radial_shift(big_r, s, t);
        let inc = f.increment(big_r, dlt);
        // f(x+y) − f(x) − p'(R) s t = [inc − p'Δ] + p'(Δ − s t)
        let lin_gap = if big_r > 0.0 {
            let rho = big_r + dlt;
            (s * s - s * t * dlt) / (rho + big_r)
        } else {
            0.0
        };
        (inc - p1 * dlt) + p1 * lin_gap
    };
    let ann = k.integrate_axial(delta, 1.0, 0.0, &geo, &annulus, Tolerance::new(1e-14, 1e-10))?;
    warnings.extend(ann.warnings);
    let growth = match f.kind {
        TestKind::W => 0.0,
        TestKind::V => v_growth(f.alpha),
    };
    let tail_fn = |s: f64, t: f64| {
        let (_, dlt) = radial_shift(big_r, s, t);
        f.increment(big_r, dlt)
    };
    let tail = k.integrate_axial(1.0, f64::INFINITY, growth, &geo, &tail_fn, tail_tol())?;
    warnings.extend(tail.warnings);
    let value = tail.value + ann.value + (local + small);
    Ok(GeneratorValue {
        value,
        remainder_bound: rem,
        taylor_radius: delta,
        warnings,
    })
}

/// Sampled `sup_{|x| ≤ radius} |L f(x)|`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SupEstimate {
    pub value: Extended,
    pub argmax: Vec<f64>,
    pub note: String,
}

pub const SAMPLED_SUP_NOTE: &str = "sampled sup — lower bound of the true sup";

pub fn sup_generator_on_ball(
    q: &LevyQuadruple,
    f: &TestFunction,
    radius: f64,
    n_samples: usize,
) -> Result<SupEstimate> {
    if !(radius > 0.0) {
        return Err(LevyError::Domain(format!("ball radius {radius} must be positive")));
    }
    let d = q.dim;
    let origin = vec![0.0; d];
    let mut pts = ball_points(&origin, radius, n_samples.max(1));
    // include the sphere |x| = radius and the seams, where |L f| typically peaks
    for s in f.seams().into_iter().chain([radius]).filter(|&s| s <= radius) {
        let mut p = vec![0.0; d];
        p[0] = s;
        pts.push(p);
    }
    let eval = |p: &Vec<f64>| -> Result<(Extended, Vec<f64>)> {
        let v = apply_generator(q, f, p)?;
        Ok((
            v.finite()
                .map(|v| Extended::Finite(v.abs()))
                .unwrap_or(Extended::PosInfinity),
            p.clone(),
        ))
    };
    let mut vals: Vec<(Extended, Vec<f64>)> = pts.par_iter().map(eval).collect::<Result<_>>()?;
    if let Some(inf) = vals.iter().find(|v| !v.0.is_finite()) {
        return Ok(SupEstimate {
            value: Extended::PosInfinity,
            argmax: inf.1.clone(),
            note: SAMPLED_SUP_NOTE.into(),
        });
    }
    vals.sort_by(|a, b| b.0.to_f64().total_cmp(&a.0.to_f64()));
    let spacing = radius / (n_samples.max(1) as f64).powf(1.0 / d as f64);
    let local: Vec<Vec<f64>> = vals
        .iter()
        .take(10)
        .flat_map(|(_, c)| {
            ball_points(c, spacing, 9)
                .into_iter()
                .skip(1)
                .filter(|p| norm(p) <= radius)
        })
        .collect();
    let refined: Vec<(Extended, Vec<f64>)> = local.par_iter().map(eval).collect::<Result<_>>()?;
    vals.extend(refined);
    let best = vals
        .into_iter()
        .max_by(|a, b| a.0.to_f64().total_cmp(&b.0.to_f64()))
        .expect("at least one sample");
    Ok(SupEstimate {
        value: best.0,
        argmax: best.1,
        note: SAMPLED_SUP_NOTE.into(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadruple::{constant_matrix, constant_scalar, scaled_identity, Atom, LevyMeasureSpec};
    use crate::testfn::build_extension;

    fn brownian(d: usize) -> LevyQuadruple {
        LevyQuadruple {
            diffusion: constant_matrix(scaled_identity(d, 1.0)),
            ..LevyQuadruple::null(d)
        }
    }

    fn stable1d(alpha: f64) -> LevyQuadruple {
        LevyQuadruple {
            jumps: LevyMeasureSpec::stable(alpha, 1.0),
            ..LevyQuadruple::null(1)
        }
    }

    fn atom2d() -> LevyQuadruple {
        LevyQuadruple {
            jumps: LevyMeasureSpec::FiniteAtoms(vec![Atom {
                y: vec![2.0, 0.0],
                mass: constant_scalar(1.0),
            }]),
            ..LevyQuadruple::null(2)
        }
    }

    fn params(alpha: f64, r0: f64) -> CriterionParams {
        CriterionParams {
            r0,
            ..CriterionParams::new(alpha, r0 + 1.0)
        }
    }

    #[test]
    fn small_jump_terms_for_cauchy() {
        let q = stable1d(1.0);
        let v = d_v_alpha(&q, &[10.0], &params(0.0, 2.0)).unwrap();
        assert!((v - 0.01234568).abs() < 1e-8);
        let v = d_v_alpha(&q, &[10.0], &params(1.0, 2.0)).unwrap();
        assert!((v - 0.11111111).abs() < 1e-8);
        assert_eq!(d_w_alpha(&brownian(2), &[3.0, 0.0], &params(1.0, 2.0)).unwrap(), 0.0);
    }

    #[test]
    fn atom_big_jump_terms() {
        let q = atom2d();
        let e = e_v_alpha(&q, &[10.0, 0.0], &params(0.0, 2.0)).unwrap();
        assert_eq!(e.method, BigJumpMethod::AtomSum);
        assert!((e.value.to_f64() - (12f64.ln() - 10f64.ln())).abs() < 1e-14);
        let e = e_w_alpha(&q, &[10.0, 0.0], &params(1.0, 2.0)).unwrap();
        assert!((e.value.to_f64() - 1.0 / 60.0).abs() < 1e-14);
    }

    #[test]
    fn brownian_drift_examples() {
        let t = t_alpha(&brownian(3), &[10.0, 0.0, 0.0], &params(0.5, 2.0)).unwrap();
        assert!((t.total.to_f64() - 3.9528e-4).abs() < 1e-8);
        let r = r_alpha(&brownian(1), &[5.0], &params(0.0, 2.0)).unwrap();
        assert!((r.total.to_f64() + 0.02).abs() < 1e-15);
        let r = r_alpha(&brownian(2), &[3.0, -7.0], &params(0.0, 2.0)).unwrap();
        assert_eq!(r.total.to_f64(), 0.0);
    }

    #[test]
    fn first_moment_bound_for_stable() {
        let q = stable1d(1.5);
        let b = e_v_first_moment_bound(&q, &[10.0], &params(0.0, 2.0)).unwrap().unwrap();
        assert!((b.to_f64() - 0.4).abs() < 1e-12);
        let e = e_bounds(&q, &[10.0], &params(0.0, 2.0), TestKind::V).unwrap();
        assert!(e.upper.unwrap().to_f64() <= 0.4);
        let exact = e_v_alpha(&q, &[10.0], &params(0.0, 2.0)).unwrap();
        assert!(exact.value.to_f64() <= e.upper.unwrap().to_f64());
    }

    #[test]
    fn stable_e_v_diverges_when_tail_is_heavy() {
        let q = stable1d(0.5);
        let e = e_v_alpha(&q, &[10.0], &params(1.0, 2.0)).unwrap();
        assert_eq!(e.value, Extended::PosInfinity);
        let r = r_alpha(&q, &[10.0], &params(1.0, 2.0)).unwrap();
        assert_eq!(r.total, Extended::PosInfinity);
    }

    #[test]
    fn generator_examples() {
        let f = build_extension(TestKind::V, &params(0.0, 2.0)).unwrap();
        let v = apply_generator(&brownian(2), &f, &[5.0, 0.0]).unwrap().to_f64();
        assert!(v.abs() < 1e-8, "{v}");
        let f = build_extension(TestKind::V, &params(2.0, 2.0)).unwrap();
        let v = apply_generator(&brownian(3), &f, &[4.0, 0.0, 0.0]).unwrap().to_f64();
        assert!((v - 3.0).abs() < 1e-12);
    }

    #[test]
    fn generator_reproduces_stable_fractional_laplacian_of_atoms() {
        // for atoms the generator is an explicit finite sum
        let q = atom2d();
        let f = build_extension(TestKind::V, &params(1.0, 2.0)).unwrap();
        let x = [3.0, 1.0];
        let v = apply_generator(&q, &f, &x).unwrap().to_f64();
        let exact = f.profile(norm(&[5.0, 1.0])) - f.profile(norm(&x));
        assert!((v - exact).abs() < 1e-12, "{v} vs {exact}");
    }

    #[test]
    fn generator_matches_drift_bound_direction_for_cauchy() {
        let q = stable1d(1.0);
        let p = params(0.0, 2.0);
        let f = build_extension(TestKind::V, &p).unwrap();
        for x in [3.5, 6.0, 40.0] {
            let lv = apply_generator(&q, &f, &[x]).unwrap().to_f64();
            let r = r_alpha(&q, &[x], &p).unwrap().total.to_f64();
            assert!(lv <= r + 1e-8, "x={x}: L V = {lv}, R = {r}");
        }
    }

    #[test]
    fn null_generator_has_zero_sup() {
        let f = build_extension(TestKind::V, &params(2.0, 2.0)).unwrap();
        let s = sup_generator_on_ball(&LevyQuadruple::null(2), &f, 3.0, 64).unwrap();
        assert_eq!(s.value, Extended::ZERO);
        let s = sup_generator_on_ball(&brownian(3), &f, 3.0, 64).unwrap();
        assert!(s.value.to_f64() >= 3.0);
    }

    #[test]
    fn direction_contract_for_isotropic_stable() {
        for (d, a_s) in [(2usize, 1.5), (3, 0.8)] {
            let q = LevyQuadruple {
                jumps: LevyMeasureSpec::stable(a_s, 0.7),
                diffusion: constant_matrix(scaled_identity(d, 0.3)),
                ..LevyQuadruple::null(d)
            };
            let pw = params(0.4, 2.0);
            let fw = build_extension(TestKind::W, &pw).unwrap();
            let pv = params(0.3, 2.0);
            let fv = build_extension(TestKind::V, &pv).unwrap();
            for r in [3.0, 5.0, 20.0] {
                let mut x = vec![0.0; d];
                x[0] = r * 0.6;
                x[1] = r * 0.8;
                let lw = apply_generator(&q, &fw, &x).unwrap().to_f64();
                let t = t_alpha(&q, &x, &pw).unwrap().total.to_f64();
                assert!(lw >= t - 1e-8, "d={d} r={r}: L W = {lw} < T = {t}");
                let lv = apply_generator(&q, &fv, &x).unwrap().to_f64();
                let rv = r_alpha(&q, &x, &pv).unwrap().total.to_f64();
                assert!(lv <= rv + 1e-8, "d={d} r={r}: L V = {lv} > R = {rv}");
            }
        }
    }
}

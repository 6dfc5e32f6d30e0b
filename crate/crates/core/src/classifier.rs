//! Decision procedures for the drift criteria.
//!
//! Every check scans `T_α` or `R_α` over `x0 ≤ |x| ≤ R_max` and, beyond the
//! scan window, tries to certify the inequality analytically from a declared
//! [`TailHint`]. Without such a certificate the result is numerical evidence
//! only, and the verdict degrades to inconclusive unless
//! [`ScanConfig::accept_scan_only`] is set.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::drift::{e_v_frozen, e_w_frozen, r_alpha, sup_generator_on_ball, t_alpha, DriftTermBreakdown};
use crate::error::{LevyError, Result};
use crate::extended::{signed_float, Extended};
use crate::geometry::{ball_points, ball_volume, norm, scaled, scan_directions, sphere_area};
use crate::quadruple::{
    abc_functionals, small_jump_moment, tail_moment, FrozenKernel, LevyQuadruple, TailHint, TailMoment,
};
use crate::testfn::{
    build_extension_anchored, eval_extension, v_alpha, CriterionParams, TestFunction, TestKind, VAnchor,
};

pub const CERTIFICATE_SCHEMA: &str = "levydrift.certificate/1";

/// Relative size below which a slack or tail coefficient counts as zero.
const SNAP: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Transient,
    Recurrent,
    NullRecurrent,
    Ergodic,
    PolynomiallyErgodic,
    ExponentiallyErgodic,
    Inconclusive,
}

impl Verdict {
    pub fn is_ergodic_family(self) -> bool {
        matches!(
            self,
            Verdict::Ergodic | Verdict::PolynomiallyErgodic | Verdict::ExponentiallyErgodic
        )
    }

    /// Any verdict implying recurrence.
    pub fn is_recurrent_family(self) -> bool {
        self.is_ergodic_family() || matches!(self, Verdict::Recurrent | Verdict::NullRecurrent)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ErgodicLevel {
    Strong,
    Polynomial,
    Exponential,
}

/// Which inequality a certificate checks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Criterion {
    Transience,
    Recurrence,
    Ergodic { level: ErgodicLevel },
    NullRecurrence { alpha1: f64, alpha2: f64, beta: f64 },
}

/// User assertions a verdict depends on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Assertion {
    OpenSetIrreducible,
    SkeletonChain,
}

/// Status of the local boundedness of `z ↦ ∫_{|y|≥1, |y+z|≥x0} V_α(|y+z|) ν(z, dy)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LocalTailStatus {
    VerifiedOnGrid,
    ClosedFormFinite,
    Failed,
}

/// How the inequality was established beyond the scan window.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AsymptoticTail {
    AnalyticBoundVerified,
    ScanOnly,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanConfig {
    pub n_radii: usize,
    /// Directions per radius; `None` selects 64 for `d ≤ 3` and 512 otherwise
    /// (`d = 1` always uses the two unit vectors).
    pub directions: Option<usize>,
    /// Outer scan radius; `None` selects `1e4 · x0`.
    pub r_max: Option<f64>,
    pub margin_tol: f64,
    pub accept_scan_only: bool,
}

impl Default for ScanConfig {
    fn default() -> Self {
        ScanConfig {
            n_radii: 48,
            directions: None,
            r_max: None,
            margin_tol: 1e-8,
            accept_scan_only: false,
        }
    }
}

impl ScanConfig {
    pub fn r_max_for(&self, x0: f64) -> f64 {
        self.r_max.unwrap_or(1e4 * x0)
    }

    pub fn direction_count(&self, d: usize) -> usize {
        match d {
            1 => 2,
            2 | 3 => self.directions.unwrap_or(64),
            _ => self.directions.unwrap_or(512),
        }
    }

    /// Geometric grid from `x0` to `R_max`, both included.
    pub fn radii(&self, x0: f64) -> Vec<f64> {
        let hi = self.r_max_for(x0);
        let n = self.n_radii.max(2);
        let ratio = (hi / x0).ln() / (n - 1) as f64;
        (0..n)
            .map(|i| if i + 1 == n { hi } else { x0 * (ratio * i as f64).exp() })
            .collect()
    }

    pub fn check(&self, x0: f64) -> Result<()> {
        if self.n_radii < 2 {
            return Err(LevyError::Config("scan needs at least two radii".into()));
        }
        if !(self.margin_tol >= 0.0) {
            return Err(LevyError::Config(format!(
                "margin_tol = {} must be ≥ 0",
                self.margin_tol
            )));
        }
        let hi = self.r_max_for(x0);
        if !(hi > x0) || !hi.is_finite() {
            return Err(LevyError::Config(format!("R_max = {hi} must exceed x0 = {x0}")));
        }
        if self.directions == Some(0) {
            return Err(LevyError::Config("need at least one direction".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanEvidence {
    pub radial_grid: Vec<f64>,
    pub directions_per_radius: usize,
    pub points_evaluated: usize,
    pub worst_point: Vec<f64>,
    /// `T_α` or `R_α` at the worst point.
    pub worst_value: Extended,
    /// Right-hand side of the checked inequality at the worst point.
    pub worst_threshold: f64,
    #[serde(with = "signed_float")]
    pub worst_slack: f64,
    pub asymptotic_tail: AsymptoticTail,
    pub tail_notes: Vec<String>,
    pub violation: Option<Vec<f64>>,
    pub warnings: Vec<String>,
}

impl ScanEvidence {
    fn empty() -> Self {
        ScanEvidence {
            radial_grid: vec![],
            directions_per_radius: 0,
            points_evaluated: 0,
            worst_point: vec![],
            worst_value: Extended::ZERO,
            worst_threshold: 0.0,
            worst_slack: 0.0,
            asymptotic_tail: AsymptoticTail::ScanOnly,
            tail_notes: vec![],
            violation: None,
            warnings: vec![],
        }
    }
}

/// Right-hand sides of the total-variation bounds, with the constants that are
/// not computable (`k`, `k(κ)`, `κ`) supplied by the caller.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TvPrefactor {
    pub description: String,
    pub placeholders: Vec<String>,
    pub level: ErgodicLevel,
    pub beta: f64,
    pub gamma: f64,
    pub lambda: f64,
    pub t0: f64,
    pub sup_lv: Extended,
    pub extension: TestFunction,
}

impl TvPrefactor {
    /// Bound on `‖P^x(F_t ∈ ·) − π‖_TV`; `kappa` is ignored at the polynomial level.
    pub fn eval(&self, x: &[f64], t: f64, k: f64, kappa: f64) -> Extended {
        let vbar = eval_extension(&self.extension, x);
        let sup = match self.sup_lv {
            Extended::Finite(s) => s,
            Extended::PosInfinity => return Extended::PosInfinity,
        };
        let (b, g, l, t0) = (self.beta, self.gamma, self.lambda, self.t0);
        let v = match self.level {
            ErgodicLevel::Polynomial => {
                let c = l.powf(b / (b - 1.0)) / (g * (1.0 - b) - l);
                k * (1.0 - b) * (t0.powf(1.0 / (1.0 - b)) + c * vbar + t0 * c * sup) * t.powf(-b / (1.0 - b))
            }
            ErgodicLevel::Exponential => {
                let e = (l * t0).exp();
                (1.0 + e / (b - l) * vbar + t0 * e / (b - l) * sup + (e - 1.0) / l) * (k - kappa * t).exp()
            }
            ErgodicLevel::Strong => return Extended::PosInfinity,
        };
        Extended::Finite(v)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateBounds {
    pub level: ErgodicLevel,
    /// Sampled `sup_{B(0,x0)} |L V̄_α|`.
    pub sup_lv_on_ball: Extended,
    pub sup_argmax: Vec<f64>,
    pub sup_note: String,
    /// Bound on `∫ V̄_α^β dπ` (polynomial) or `∫ V̄_α dπ` (exponential).
    pub pi_moment_bound: Extended,
    pub tv_prefactor: TvPrefactor,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriftCertificate {
    pub schema: String,
    pub verdict: Verdict,
    pub criterion: Criterion,
    pub params: CriterionParams,
    pub scan: ScanEvidence,
    pub relies_on: Vec<Assertion>,
    pub local_tail: Option<LocalTailStatus>,
    /// Worst relative slack of the decisive inequality over the scan.
    #[serde(with = "signed_float")]
    pub margin: f64,
    pub margin_tol: f64,
    pub bound_constants: Option<RateBounds>,
    /// The recurrence certificate a null-recurrence verdict builds on.
    pub companion: Option<Box<DriftCertificate>>,
    pub notes: Vec<String>,
}

/// The decisive inequality, as `slack ≥ 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
enum Branch {
    Transience,
    Recurrence,
    Strong {
        beta: f64,
    },
    Polynomial {
        beta: f64,
        gamma: f64,
    },
    Exponential {
        beta: f64,
    },
    /// `T_{α1}(x) ≥ −β / V_{α2}(R)`, worst case `R = R_max`.
    NullLower {
        beta: f64,
        v_rmax: f64,
    },
}

impl Branch {
    fn kind(self) -> TestKind {
        match self {
            Branch::Transience | Branch::NullLower { .. } => TestKind::W,
            _ => TestKind::V,
        }
    }

    fn threshold(self, r: f64, alpha: f64) -> f64 {
        let v = || v_alpha(r, alpha).unwrap_or(f64::NAN);
        match self {
            Branch::Transience | Branch::Recurrence => 0.0,
            Branch::Strong { beta } => -beta,
            Branch::Polynomial { beta, gamma } => -gamma * v().powf(beta),
            Branch::Exponential { beta } => -beta * v(),
            Branch::NullLower { beta, v_rmax } => -beta / v_rmax,
        }
    }

    /// `(slack, margin)`; slack within `SNAP · scale` of zero is set to zero.
    fn assess(self, bd: &DriftTermBreakdown, r: f64, alpha: f64) -> (f64, f64) {
        let thr = self.threshold(r, alpha);
        let slack = match (self.kind(), bd.total) {
            (TestKind::W, Extended::Finite(t)) => t - thr,
            (TestKind::W, Extended::PosInfinity) => f64::INFINITY,
            (TestKind::V, Extended::Finite(t)) => thr - t,
            (TestKind::V, Extended::PosInfinity) => f64::NEG_INFINITY,
        };
        if !slack.is_finite() {
            return (slack, slack);
        }
        let scale = bd.scale() + thr.abs();
        if slack.abs() <= SNAP * scale || scale == 0.0 {
            return (0.0, 0.0);
        }
        (slack, slack / scale)
    }

    fn criterion(self, alpha1: f64, alpha2: f64) -> Criterion {
        match self {
            Branch::Transience => Criterion::Transience,
            Branch::Recurrence => Criterion::Recurrence,
            Branch::Strong { .. } => Criterion::Ergodic {
                level: ErgodicLevel::Strong,
            },
            Branch::Polynomial { .. } => Criterion::Ergodic {
                level: ErgodicLevel::Polynomial,
            },
            Branch::Exponential { .. } => Criterion::Ergodic {
                level: ErgodicLevel::Exponential,
            },
            Branch::NullLower { beta, .. } => Criterion::NullRecurrence { alpha1, alpha2, beta },
        }
    }
}

/// One scanned state.
#[derive(Debug, Clone)]
struct Evaluated {
    x: Vec<f64>,
    r: f64,
    bd: DriftTermBreakdown,
}

struct Scan {
    radii: Vec<f64>,
    n_dirs: usize,
    points: Vec<Evaluated>,
    /// Index of the first point that triggered the stop rule.
    stopped_at: Option<usize>,
}

fn breakdown(q: &LevyQuadruple, kind: TestKind, x: &[f64], params: &CriterionParams) -> Result<DriftTermBreakdown> {
    match kind {
        TestKind::W => t_alpha(q, x, params),
        TestKind::V => r_alpha(q, x, params),
    }
}

/// Radius by radius (directions in parallel); stops after the first radius
/// containing a point on which `stop` fires.
fn run_scan(
    q: &LevyQuadruple,
    kind: TestKind,
    params: &CriterionParams,
    cfg: &ScanConfig,
    stop: &(dyn Fn(&Evaluated) -> bool + Sync),
) -> Result<Scan> {
    let radii = cfg.radii(params.x0);
    let dirs = scan_directions(q.dim, cfg.direction_count(q.dim));
    let mut points = Vec::with_capacity(radii.len() * dirs.len());
    let mut stopped_at = None;
    for &r in &radii {
        let batch: Vec<Evaluated> = dirs
            .par_iter()
            .map(|e| {
                let x = scaled(e, r);
                let bd = breakdown(q, kind, &x, params)?;
                Ok(Evaluated { x, r, bd })
            })
            .collect::<Result<_>>()?;
        let base = points.len();
        let hit = batch.iter().position(stop);
        points.extend(batch);
        if let Some(i) = hit {
            stopped_at = Some(base + i);
            break;
        }
    }
    Ok(Scan {
        radii,
        n_dirs: dirs.len(),
        points,
        stopped_at,
    })
}

fn violates(branch: Branch, alpha: f64) -> impl Fn(&Evaluated) -> bool + Sync {
    move |p: &Evaluated| branch.assess(&p.bd, p.r, alpha).0 < 0.0
}

fn dedup_warnings(points: &[Evaluated]) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    for w in points.iter().flat_map(|p| p.bd.warnings.iter()) {
        if !out.contains(w) {
            out.push(w.clone());
            if out.len() >= 8 {
                break;
            }
        }
    }
    out
}

/// Worst point of a scan under a branch: `(index, slack, margin)`.
fn worst(scan: &Scan, branch: Branch, alpha: f64) -> Option<(usize, f64, f64)> {
    scan.points
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let (s, m) = branch.assess(&p.bd, p.r, alpha);
            (i, s, m)
        })
        .min_by(|a, b| a.2.total_cmp(&b.2))
}

fn evidence(scan: &Scan, branch: Branch, alpha: f64) -> (ScanEvidence, f64) {
    let mut ev = ScanEvidence::empty();
    ev.radial_grid = scan.radii.clone();
    ev.directions_per_radius = scan.n_dirs;
    ev.points_evaluated = scan.points.len();
    ev.warnings = dedup_warnings(&scan.points);
    let mut margin = f64::NEG_INFINITY;
    if let Some((i, s, m)) = worst(scan, branch, alpha) {
        let p = &scan.points[i];
        ev.worst_point = p.x.clone();
        ev.worst_value = p.bd.total;
        ev.worst_threshold = branch.threshold(p.r, alpha);
        ev.worst_slack = s;
        margin = m;
        if s < 0.0 {
            ev.violation = Some(p.x.clone());
        }
    }
    (ev, margin)
}

// ---------------------------------------------------------------------------
// analytic tail beyond R_max

/// `Σ c_i λ^{e_i} ≤ 0` for all `λ ≥ 1`, by Abel summation: it suffices that
/// every partial sum over the exponents taken in decreasing order is `≤ 0`.
/// Each term carries a magnitude scale used to absorb rounding.
fn power_sum_nonpositive(terms: &[(f64, f64, f64)]) -> std::result::Result<(), String> {
    let mut t: Vec<(f64, f64, f64)> = terms
        .iter()
        .map(|&(c, e, s)| if c.abs() <= SNAP * s { (0.0, e, s) } else { (c, e, s) })
        .collect();
    if t.iter().any(|&(c, e, _)| !c.is_finite() || !e.is_finite()) {
        return Err("non-finite tail coefficient".into());
    }
    t.sort_by(|a, b| b.1.total_cmp(&a.1));
    let total_scale: f64 = t.iter().map(|x| x.2.max(x.0.abs())).sum();
    let mut partial = 0.0;
    let mut i = 0;
    while i < t.len() {
        let e = t[i].1;
        while i < t.len() && (t[i].1 - e).abs() <= 1e-12 {
            partial += t[i].0;
            i += 1;
        }
        if partial > SNAP * total_scale {
            return Err(format!(
                "tail power sum not dominated at exponent {e:.4} (partial sum {partial:.3e})"
            ));
        }
    }
    Ok(())
}

fn hint_matches(q: &LevyQuadruple, hint: &TailHint, x: &[f64]) -> std::result::Result<(), String> {
    let eval = || -> Result<std::result::Result<(), String>> {
        for lam in [2.0, 10.0] {
            let y = scaled(x, lam);
            let (b0, b1) = (q.b(x)?, q.b(&y)?);
            let (c0, c1) = (q.c(x)?, q.c(&y)?);
            let fb = lam.powf(hint.drift_degree);
            let fc = lam.powf(hint.diffusion_degree);
            let close = |u: &[f64], v: &[f64], f: f64| {
                let diff: f64 = u.iter().zip(v).map(|(a, b)| (a - f * b).abs()).sum();
                let size: f64 = u.iter().map(|a| a.abs()).sum();
                diff <= 1e-8 * size + 1e-300
            };
            if !close(&b1, &b0, fb) {
                return Ok(Err(format!(
                    "drift does not scale with degree {} along {x:?}",
                    hint.drift_degree
                )));
            }
            if !close(&c1, &c0, fc) {
                return Ok(Err(format!(
                    "diffusion does not scale with degree {} along {x:?}",
                    hint.diffusion_degree
                )));
            }
            if hint.killing_vanishes && (q.a(x)? != 0.0 || q.a(&y)? != 0.0) {
                return Ok(Err("killing declared to vanish but is nonzero".into()));
            }
        }
        Ok(Ok(()))
    };
    eval().unwrap_or_else(|e| Err(e.to_string()))
}

/// Upper bound `D^V_α(λR) ≤ coef · λ^{α−2}` per unit small-jump moment.
fn d_v_tail_coef(big_r: f64, alpha: f64) -> f64 {
    if alpha == 0.0 {
        0.5 * (big_r - 1.0).powi(-2)
    } else if alpha <= 2.0 {
        0.5 * alpha * (big_r - 1.0).powf(alpha - 2.0)
    } else if alpha <= 4.0 {
        0.5 * alpha
            * (big_r.powf(alpha - 2.0) + (alpha - 2.0) * (big_r + 1.0).powi(2) * (big_r - 1.0).powf(alpha - 4.0))
    } else {
        0.5 * alpha * (big_r.powf(alpha - 2.0) + (alpha - 2.0) * (big_r + 1.0).powf(alpha - 2.0))
    }
}

type Terms = Vec<(f64, f64, f64)>;

/// Power terms bounding `E^V_α(λR e)` from above for a state-independent kernel.
fn e_v_tail_terms(k: &FrozenKernel, x: &[f64], params: &CriterionParams) -> std::result::Result<Terms, String> {
    let big_r = norm(x);
    let alpha = params.alpha;
    let r0 = params.r0;
    let err = |e: LevyError| e.to_string();
    if let FrozenKernel::Stable { dim, alpha: a_s, gamma } = *k {
        // Scaling y = |x| u turns E^V into |x|^{α−α_s} times an integral over
        // |u| ≥ 1/|x|; enlarging |x| only adds a shell of small u, whose
        // symmetric contribution is bounded through a Hessian bound of V.
        if alpha >= a_s {
            return Err(format!("E^V diverges for α = {alpha} ≥ α_stable = {a_s}"));
        }
        let d = dim as f64;
        let e = e_v_frozen(k, x, params).map_err(err)?;
        let ev = e.value.finite().ok_or("E^V diverges at R_max")?;
        let s_d = sphere_area(dim);
        let clip_den = (big_r - r0).powf(d + a_s);
        let (shell, clip) = if alpha == 0.0 {
            (
                1.5 * gamma * s_d * big_r.powi(-2) / (2.0 - a_s),
                gamma * s_d * r0.powf(d) / (d * d * clip_den),
            )
        } else {
            let h = alpha * (1f64).max((alpha - 1.0).abs()) * 0.5f64.powf(alpha - 2.0).max(1.5f64.powf(alpha - 2.0));
            (
                0.5 * h * gamma * s_d * big_r.powf(alpha - 2.0) / (2.0 - a_s),
                gamma * ball_volume(dim) * r0.powf(d + alpha) / clip_den,
            )
        };
        let lead = ev + e.error + shell;
        return Ok(vec![
            (lead, alpha - a_s, ev.abs() + e.error + shell),
            (clip, -d - a_s, clip),
        ]);
    }
    let moment = |p: f64| -> std::result::Result<Option<f64>, String> {
        let m = tail_moment(k, TailMoment::Power(p)).map_err(err)?;
        Ok(m.value.finite().map(|v| v + m.error))
    };
    let m1 = moment(1.0)?;
    if alpha == 0.0 {
        if let Some(m1) = m1 {
            return Ok(vec![(m1 / big_r, -1.0, m1 / big_r)]);
        }
        for p in [0.5, 0.25, 0.1] {
            if let Some(mp) = moment(p)? {
                let c = mp * big_r.powf(-p) / p;
                return Ok(vec![(c, -p, c)]);
            }
        }
        return Err("no finite fractional tail moment of order ≥ 0.1".into());
    }
    let ma = moment(alpha)?;
    if alpha <= 1.0 {
        if let Some(m1) = m1 {
            let c = alpha * big_r.powf(alpha - 1.0) * m1;
            return Ok(vec![(c, alpha - 1.0, c)]);
        }
        return match ma {
            Some(ma) => Ok(vec![(ma, 0.0, ma)]),
            None => Err(format!("tail moment of order {alpha} diverges")),
        };
    }
    match (m1, ma) {
        (Some(m1), Some(ma)) => {
            let kk = (1f64).max(2f64.powf(alpha - 2.0));
            let c1 = alpha * kk * big_r.powf(alpha - 1.0) * m1;
            let c2 = alpha * kk * ma;
            Ok(vec![(c1, alpha - 1.0, c1), (c2, 0.0, c2)])
        }
        _ => Err(format!("tail moments of orders 1 and {alpha} are needed")),
    }
}

/// Power terms bounding `−E^W_α(λR e)` from above (stable kernels only).
fn neg_e_w_tail_terms(k: &FrozenKernel, x: &[f64], params: &CriterionParams) -> std::result::Result<Terms, String> {
    let FrozenKernel::Stable { dim, alpha: a_s, gamma } = *k else {
        return Err("no analytic tail bound for the big-jump term of T_α with this kernel".into());
    };
    let big_r = norm(x);
    let alpha = params.alpha;
    let r0 = params.r0;
    let d = dim as f64;
    if alpha >= d {
        return Err(format!("tail bound for T_α needs α < d (α = {alpha})"));
    }
    let e = e_w_frozen(k, x, params).map_err(|e| e.to_string())?;
    let ew = e.value.finite().ok_or("E^W not finite")?;
    let s_d = sphere_area(dim);
    let clip_den = (big_r - r0).powf(d + a_s);
    let clip_up = gamma * s_d * r0.powf(d - alpha) / ((d - alpha) * clip_den);
    let h = alpha * (alpha + 1.0) * 0.5f64.powf(-alpha - 2.0);
    let shell = 0.5 * h * gamma * s_d * big_r.powf(-alpha - 2.0) / (2.0 - a_s);
    let lead = -ew + e.error + clip_up + shell;
    let eps_term = params.eps_value() * gamma * ball_volume(dim) * r0.powf(d) / clip_den;
    Ok(vec![
        (lead, -alpha - a_s, ew.abs() + e.error + clip_up + shell),
        (eps_term, -d - a_s, eps_term),
    ])
}

/// Power terms of `Q(λ)`, where `Q ≤ 0` for all `λ ≥ 1` is the branch
/// inequality at `λ x` (`Q = −T` for transience, `Q = R − threshold` otherwise).
fn tail_terms(
    q: &LevyQuadruple,
    hint: &TailHint,
    x: &[f64],
    branch: Branch,
    params: &CriterionParams,
) -> std::result::Result<Terms, String> {
    let err = |e: LevyError| e.to_string();
    let big_r = norm(x);
    let alpha = params.alpha;
    let f = abc_functionals(q, x).map_err(err)?;
    let (pc, pb) = (hint.diffusion_degree, hint.drift_degree);
    let k = q.kernel(x).map_err(err)?;
    let mut terms: Terms = Vec::new();
    let jumps_ok = k.is_zero() || hint.jumps_state_independent || q.jumps.is_state_independent();
    if !jumps_ok {
        return Err("jump kernel not declared state-independent".into());
    }
    match branch.kind() {
        TestKind::V => {
            // the killing term −a V_α is ≤ 0 and is dropped
            let (pref, cc) = if alpha == 0.0 {
                (1.0, 1.0)
            } else {
                (alpha * big_r.powf(alpha), 1.0 - 0.5 * alpha)
            };
            let e = if alpha == 0.0 { 0.0 } else { alpha };
            terms.push((
                pref * (f.A - cc * f.C),
                e + pc - 2.0,
                pref * (f.A.abs() + cc.abs() * f.C.abs()),
            ));
            terms.push((pref * f.B, e + pb - 1.0, pref * f.B.abs()));
            if !k.is_zero() {
                let m = small_jump_moment(&k).map_err(err)?;
                let c = m * d_v_tail_coef(big_r, alpha);
                terms.push((c, alpha - 2.0, c));
                terms.extend(e_v_tail_terms(&k, x, params)?);
            }
            match branch {
                Branch::Transience | Branch::NullLower { .. } => unreachable!(),
                Branch::Recurrence => {}
                Branch::Strong { beta } => terms.push((beta, 0.0, beta)),
                Branch::Polynomial { beta, gamma } => {
                    if alpha == 0.0 {
                        return Err("logarithmic target V_0^β has no power-law tail bound".into());
                    }
                    let c = gamma * big_r.powf(alpha * beta);
                    terms.push((c, alpha * beta, c));
                }
                Branch::Exponential { beta } => {
                    if alpha == 0.0 {
                        return Err("logarithmic target V_0 has no power-law tail bound".into());
                    }
                    let c = beta * big_r.powf(alpha);
                    terms.push((c, alpha, c));
                }
            }
        }
        TestKind::W => {
            if !hint.killing_vanishes {
                return Err("the killing term of T_α needs killing_vanishes".into());
            }
            let pref = alpha * big_r.powf(-alpha);
            let cc = 1.0 + 0.5 * alpha;
            terms.push((
                -pref * (f.A - cc * f.C),
                -alpha + pc - 2.0,
                pref * (f.A.abs() + cc * f.C.abs()),
            ));
            terms.push((-pref * f.B, -alpha + pb - 1.0, pref * f.B.abs()));
            if !k.is_zero() {
                let m = small_jump_moment(&k).map_err(err)?;
                let c = m * 0.5 * alpha * (2.0 + alpha) * (big_r + 1.0).powi(2) / (big_r - 1.0).powf(4.0 + alpha);
                terms.push((c, -2.0 - alpha, c));
                terms.extend(neg_e_w_tail_terms(&k, x, params)?);
            }
        }
    }
    Ok(terms)
}

/// Certify the branch inequality on every scanned ray beyond `R_max`.
fn certify_tail(
    q: &LevyQuadruple,
    scan: &Scan,
    branch: Branch,
    params: &CriterionParams,
) -> (AsymptoticTail, Vec<String>) {
    let Some(hint) = q.tail_hint else {
        return (
            AsymptoticTail::ScanOnly,
            vec!["no asymptotic hint declared: the inequality is verified on the scan window only".into()],
        );
    };
    let r_last = *scan.radii.last().expect("nonempty grid");
    let finals: Vec<&Evaluated> = scan.points.iter().filter(|p| p.r == r_last).collect();
    if finals.is_empty() {
        return (AsymptoticTail::ScanOnly, vec!["scan did not reach R_max".into()]);
    }
    let outcome: Vec<std::result::Result<(), String>> = finals
        .par_iter()
        .map(|p| {
            hint_matches(q, &hint, &p.x)?;
            let terms = tail_terms(q, &hint, &p.x, branch, params)?;
            power_sum_nonpositive(&terms)
        })
        .collect();
    match outcome.into_iter().find_map(|o| o.err()) {
        None => {
            let mut notes = vec![format!(
                "inequality certified beyond R_max = {r_last} along every scanned ray from declared asymptotics"
            )];
            if q.dim > 1 {
                notes.push("angular coverage beyond R_max is that of the scanned directions".into());
            }
            (AsymptoticTail::AnalyticBoundVerified, notes)
        }
        Some(reason) => (
            AsymptoticTail::ScanOnly,
            vec![format!("analytic tail bound failed: {reason}")],
        ),
    }
}

// ---------------------------------------------------------------------------
// local boundedness of the big-jump V_α-integral

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalTailCheck {
    pub status: LocalTailStatus,
    /// Largest bound on the integral over the probed states.
    pub sup_bound: Extended,
    pub probes: usize,
}

/// Bounds `∫_{|y|≥1, |y+z|≥x0} V_α(|y+z|) ν(z,dy)` through
/// `V_α(|y+z|) ≤ c(V_α(|y|) + V_α(|z|))`-type estimates on a grid of states
/// in `B(0, 2 x0)`; one probe suffices for state-independent kernels.
pub fn local_tail_check(q: &LevyQuadruple, alpha: f64, x0: f64) -> Result<LocalTailCheck> {
    let origin = vec![0.0; q.dim];
    let state_independent =
        q.jumps.is_state_independent() || q.tail_hint.map(|h| h.jumps_state_independent).unwrap_or(false);
    let probes = if state_independent {
        vec![origin]
    } else {
        ball_points(&origin, 2.0 * x0, 64)
    };
    let bounds: Vec<Extended> = probes
        .par_iter()
        .map(|z| {
            let k = q.kernel(z)?;
            if k.is_zero() {
                return Ok(Extended::ZERO);
            }
            let mass = tail_moment(&k, TailMoment::Power(0.0))?.value;
            let rz = norm(z).max(x0);
            if alpha == 0.0 {
                let m = tail_moment(&k, TailMoment::Log)?.value;
                Ok(m + mass.scale(rz.ln_1p()))
            } else {
                let m = tail_moment(&k, TailMoment::Power(alpha))?.value;
                Ok((m + mass.scale(rz.powf(alpha))).scale((1f64).max(2f64.powf(alpha - 1.0))))
            }
        })
        .collect::<Result<_>>()?;
    let sup = bounds
        .iter()
        .copied()
        .fold(Extended::ZERO, |a, b| if b.to_f64() > a.to_f64() { b } else { a });
    let status = if !sup.is_finite() {
        LocalTailStatus::Failed
    } else if state_independent {
        LocalTailStatus::ClosedFormFinite
    } else {
        LocalTailStatus::VerifiedOnGrid
    };
    Ok(LocalTailCheck {
        status,
        sup_bound: sup,
        probes: probes.len(),
    })
}

// ---------------------------------------------------------------------------
// certificate assembly

#[derive(Clone, Copy, PartialEq)]
enum TailPolicy {
    Certify,
    /// The inequality quantifies over the scan window itself.
    WindowOnly,
}

fn needed_assertions(branch: Branch) -> Vec<Assertion> {
    match branch {
        Branch::Strong { .. } | Branch::Polynomial { .. } | Branch::Exponential { .. } => {
            vec![Assertion::OpenSetIrreducible, Assertion::SkeletonChain]
        }
        _ => vec![Assertion::OpenSetIrreducible],
    }
}

fn missing_assertion(q: &LevyQuadruple, needed: &[Assertion]) -> Option<String> {
    needed.iter().find_map(|a| match a {
        Assertion::OpenSetIrreducible if !q.asserts_open_set_irreducible => {
            Some("hypothesis not asserted: open-set irreducibility".to_string())
        }
        Assertion::SkeletonChain if !q.asserts_skeleton_chain => {
            Some("hypothesis not asserted: irreducible skeleton chain".to_string())
        }
        _ => None,
    })
}

fn positive_verdict(branch: Branch) -> Verdict {
    match branch {
        Branch::Transience => Verdict::Transient,
        Branch::Recurrence => Verdict::Recurrent,
        Branch::Strong { .. } => Verdict::Ergodic,
        Branch::Polynomial { .. } => Verdict::PolynomiallyErgodic,
        Branch::Exponential { .. } => Verdict::ExponentiallyErgodic,
        Branch::NullLower { .. } => Verdict::NullRecurrent,
    }
}

fn inconclusive(branch: Branch, params: CriterionParams, cfg: &ScanConfig, note: String) -> DriftCertificate {
    DriftCertificate {
        schema: CERTIFICATE_SCHEMA.into(),
        verdict: Verdict::Inconclusive,
        criterion: branch.criterion(params.alpha, params.alpha),
        params,
        scan: ScanEvidence::empty(),
        relies_on: needed_assertions(branch),
        local_tail: None,
        margin: f64::NEG_INFINITY,
        margin_tol: cfg.margin_tol,
        bound_constants: None,
        companion: None,
        notes: vec![note],
    }
}

#[allow(clippy::too_many_arguments)]
fn assemble(
    q: &LevyQuadruple,
    scan: &Scan,
    branch: Branch,
    params: CriterionParams,
    cfg: &ScanConfig,
    local: Option<&LocalTailCheck>,
    policy: TailPolicy,
    skip_hypotheses: bool,
) -> DriftCertificate {
    let alpha = params.alpha;
    let (mut ev, margin) = evidence(scan, branch, alpha);
    let relies_on = needed_assertions(branch);
    let mut notes = Vec::new();
    let mut ok = true;
    if !skip_hypotheses {
        if let Some(m) = missing_assertion(q, &relies_on) {
            notes.push(m);
            ok = false;
        }
    }
    if ev.violation.is_some() {
        notes.push("inequality violated on the scan".into());
        ok = false;
    } else if !(margin >= cfg.margin_tol) {
        notes.push(format!("margin {margin:.3e} below margin_tol {:.1e}", cfg.margin_tol));
        ok = false;
    }
    if scan.stopped_at.is_some() && ev.violation.is_none() {
        notes.push("scan stopped early".into());
        ok = false;
    }
    if let Some(l) = local {
        if l.status == LocalTailStatus::Failed {
            notes.push("big-jump V_α-integral is not locally bounded".into());
            ok = false;
        }
    }
    if ok {
        match policy {
            TailPolicy::Certify => {
                let (status, tail_notes) = certify_tail(q, scan, branch, &params);
                ev.asymptotic_tail = status;
                ev.tail_notes = tail_notes;
                if status == AsymptoticTail::ScanOnly {
                    if cfg.accept_scan_only {
                        notes.push(
                            "scan-only verdict accepted by configuration: numerical evidence, not a proof".into(),
                        );
                    } else {
                        ok = false;
                    }
                }
            }
            TailPolicy::WindowOnly => {
                ev.asymptotic_tail = AsymptoticTail::ScanOnly;
                ev.tail_notes = vec!["inequality quantified over x0 ≤ |x| ≤ R ≤ R_max by construction".into()];
            }
        }
    }
    DriftCertificate {
        schema: CERTIFICATE_SCHEMA.into(),
        verdict: if ok {
            positive_verdict(branch)
        } else {
            Verdict::Inconclusive
        },
        criterion: branch.criterion(alpha, alpha),
        params,
        scan: ev,
        relies_on,
        local_tail: local.map(|l| l.status),
        margin,
        margin_tol: cfg.margin_tol,
        bound_constants: None,
        companion: None,
        notes,
    }
}

fn prepare(params: &CriterionParams, cfg: &ScanConfig) -> Result<()> {
    params.check()?;
    cfg.check(params.x0)
}

/// Transience: `T_α(x) ≥ 0` for `|x| ≥ x0`.
pub fn check_transience(q: &LevyQuadruple, params: &CriterionParams, cfg: &ScanConfig) -> Result<DriftCertificate> {
    if !(params.alpha > 0.0) {
        return Err(LevyError::Config("transience needs α > 0".into()));
    }
    prepare(params, cfg)?;
    let branch = Branch::Transience;
    if let Some(m) = missing_assertion(q, &needed_assertions(branch)) {
        return Ok(inconclusive(branch, *params, cfg, m));
    }
    let scan = run_scan(q, TestKind::W, params, cfg, &violates(branch, params.alpha))?;
    Ok(assemble(
        q,
        &scan,
        branch,
        *params,
        cfg,
        None,
        TailPolicy::Certify,
        false,
    ))
}

/// Recurrence: local boundedness of the big-jump integral and `R_α(x) ≤ 0`.
pub fn check_recurrence(q: &LevyQuadruple, params: &CriterionParams, cfg: &ScanConfig) -> Result<DriftCertificate> {
    prepare(params, cfg)?;
    let branch = Branch::Recurrence;
    if let Some(m) = missing_assertion(q, &needed_assertions(branch)) {
        return Ok(inconclusive(branch, *params, cfg, m));
    }
    let local = local_tail_check(q, params.alpha, params.x0)?;
    if local.status == LocalTailStatus::Failed {
        let mut c = inconclusive(
            branch,
            *params,
            cfg,
            "big-jump V_α-integral is not locally bounded".into(),
        );
        c.local_tail = Some(LocalTailStatus::Failed);
        return Ok(c);
    }
    let scan = run_scan(q, TestKind::V, params, cfg, &violates(branch, params.alpha))?;
    Ok(assemble(
        q,
        &scan,
        branch,
        *params,
        cfg,
        Some(&local),
        TailPolicy::Certify,
        false,
    ))
}

fn ergodic_branch(params: &CriterionParams, level: ErgodicLevel) -> Result<Branch> {
    Ok(match level {
        ErgodicLevel::Strong => Branch::Strong { beta: params.beta },
        ErgodicLevel::Exponential => Branch::Exponential { beta: params.beta },
        ErgodicLevel::Polynomial => {
            if !(params.beta > 0.0 && params.beta < 1.0) {
                return Err(LevyError::Config(format!(
                    "polynomial level needs β in (0,1), got {}",
                    params.beta
                )));
            }
            Branch::Polynomial {
                beta: params.beta,
                gamma: params.gamma,
            }
        }
    })
}

/// Strong, polynomial or exponential ergodicity: `R_α ≤ −β`, `≤ −γV_α^β`
/// or `≤ −βV_α` on `|x| ≥ x0`. On success the rate-bound constants are attached.
pub fn check_ergodic_family(
    q: &LevyQuadruple,
    params: &CriterionParams,
    cfg: &ScanConfig,
    level: ErgodicLevel,
) -> Result<DriftCertificate> {
    prepare(params, cfg)?;
    let branch = ergodic_branch(params, level)?;
    if let Some(m) = missing_assertion(q, &needed_assertions(branch)) {
        return Ok(inconclusive(branch, *params, cfg, m));
    }
    let local = local_tail_check(q, params.alpha, params.x0)?;
    if local.status == LocalTailStatus::Failed {
        let mut c = inconclusive(
            branch,
            *params,
            cfg,
            "big-jump V_α-integral is not locally bounded".into(),
        );
        c.local_tail = Some(LocalTailStatus::Failed);
        return Ok(c);
    }
    let scan = run_scan(q, TestKind::V, params, cfg, &violates(branch, params.alpha))?;
    let mut cert = assemble(q, &scan, branch, *params, cfg, Some(&local), TailPolicy::Certify, false);
    if cert.verdict != Verdict::Inconclusive {
        attach_rate_bounds(q, &mut cert)?;
    }
    Ok(cert)
}

/// Samples used for the sup of `|L V̄_α|` over `B(0, x0)`.
const SUP_SAMPLES: usize = 256;

/// Computes the rate-bound constants of a polynomial or exponential certificate;
/// `λ` is set to the midpoint of its admissible range.
pub fn attach_rate_bounds(q: &LevyQuadruple, cert: &mut DriftCertificate) -> Result<()> {
    let level = match cert.criterion {
        Criterion::Ergodic { level } if level != ErgodicLevel::Strong => level,
        _ => return Ok(()),
    };
    let mut p = cert.params;
    let anchor = match level {
        ErgodicLevel::Polynomial => {
            p.lambda = 0.5 * p.gamma * (1.0 - p.beta);
            VAnchor::HalfAtR0
        }
        _ => {
            p.lambda = 0.5 * p.beta;
            VAnchor::Zero
        }
    };
    let vbar = build_extension_anchored(TestKind::V, &p, anchor)?;
    let sup = sup_generator_on_ball(q, &vbar, p.x0, SUP_SAMPLES)?;
    let (pi_bound, description, placeholders) = match level {
        ErgodicLevel::Polynomial => (
            sup.value.scale(1.0 / p.gamma) + v_alpha(p.x0, p.alpha)?.powf(p.beta),
            "k(1−β)(t0^{1/(1−β)} + λ^{β/(β−1)}/(γ(1−β)−λ)·V̄(x) + t0·λ^{β/(β−1)}/(γ(1−β)−λ)·sup|LV̄|)·t^{−β/(1−β)}",
            vec!["k".to_string()],
        ),
        _ => (
            sup.value.scale(1.0 / p.beta) + v_alpha(p.r0, p.alpha)?,
            "(1 + e^{λt0}/(β−λ)·V̄(x) + t0·e^{λt0}/(β−λ)·sup|LV̄| + (e^{λt0}−1)/λ)·e^{k(κ)−κt}",
            vec!["k(kappa)".to_string(), "kappa".to_string()],
        ),
    };
    cert.params = p;
    cert.bound_constants = Some(RateBounds {
        level,
        sup_lv_on_ball: sup.value,
        sup_argmax: sup.argmax.clone(),
        sup_note: sup.note.clone(),
        pi_moment_bound: pi_bound,
        tv_prefactor: TvPrefactor {
            description: description.into(),
            placeholders,
            level,
            beta: p.beta,
            gamma: p.gamma,
            lambda: p.lambda,
            t0: p.t0,
            sup_lv: sup.value,
            extension: vbar,
        },
    });
    Ok(())
}

/// Parameters of the null-recurrence criterion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NullRecurrenceParams {
    pub alpha1: f64,
    pub alpha2: f64,
    pub beta: f64,
    pub x0: f64,
    pub eps: Option<f64>,
}

/// Null recurrence: a recurrence certificate for `α2` plus
/// `T_{α1}(x) ≥ −β/V_{α2}(R)` for scanned pairs `x0 ≤ |x| ≤ R ≤ R_max`.
pub fn check_null_recurrence(
    q: &LevyQuadruple,
    np: &NullRecurrenceParams,
    cfg: &ScanConfig,
) -> Result<DriftCertificate> {
    if !(np.alpha1 > 0.0 && np.alpha2 >= 0.0 && np.beta > 0.0) {
        return Err(LevyError::Config("null recurrence needs α1 > 0, α2 ≥ 0, β > 0".into()));
    }
    let p2 = CriterionParams::new(np.alpha2, np.x0);
    let mut p1 = CriterionParams::new(np.alpha1, np.x0);
    p1.eps = np.eps;
    prepare(&p1, cfg)?;
    prepare(&p2, cfg)?;
    let r_max = cfg.r_max_for(np.x0);
    let branch = Branch::NullLower {
        beta: np.beta,
        v_rmax: v_alpha(r_max, np.alpha2)?,
    };
    let criterion = Criterion::NullRecurrence {
        alpha1: np.alpha1,
        alpha2: np.alpha2,
        beta: np.beta,
    };
    let base = |mut c: DriftCertificate| {
        c.criterion = criterion;
        c.params = p1;
        c
    };
    if let Some(m) = missing_assertion(q, &[Assertion::OpenSetIrreducible]) {
        return Ok(base(inconclusive(branch, p1, cfg, m)));
    }
    let local = local_tail_check(q, np.alpha2, np.x0)?;
    let rscan = run_scan(q, TestKind::V, &p2, cfg, &violates(Branch::Recurrence, np.alpha2))?;
    // positive recurrence excludes null recurrence
    if rscan.stopped_at.is_none() {
        let min_neg = rscan
            .points
            .iter()
            .map(|p| -p.bd.total.to_f64())
            .fold(f64::INFINITY, f64::min);
        if min_neg > 0.0 {
            let strong = Branch::Strong { beta: 0.5 * min_neg };
            let pos = assemble(q, &rscan, strong, p2, cfg, Some(&local), TailPolicy::Certify, true);
            if pos.verdict != Verdict::Inconclusive {
                let mut c = base(inconclusive(
                    branch,
                    p1,
                    cfg,
                    format!(
                        "not applicable: R_α ≤ −{:.4e} holds with α = {}, so the process is positive recurrent (see companion)",
                        0.5 * min_neg,
                        np.alpha2
                    ),
                ));
                c.companion = Some(Box::new(pos));
                return Ok(c);
            }
        }
    }
    let rec = assemble(
        q,
        &rscan,
        Branch::Recurrence,
        p2,
        cfg,
        Some(&local),
        TailPolicy::Certify,
        false,
    );
    if rec.verdict != Verdict::Recurrent {
        let mut c = base(inconclusive(branch, p1, cfg, "no recurrence certificate for α2".into()));
        c.local_tail = Some(local.status);
        c.companion = Some(Box::new(rec));
        return Ok(c);
    }
    let tscan = run_scan(q, TestKind::W, &p1, cfg, &violates(branch, np.alpha1))?;
    let mut c = assemble(q, &tscan, branch, p1, cfg, None, TailPolicy::WindowOnly, false);
    c.criterion = criterion;
    c.local_tail = Some(local.status);
    c.margin = c.margin.min(rec.margin);
    c.companion = Some(Box::new(rec));
    if c.verdict == Verdict::NullRecurrent {
        c.notes
            .push("the lower bound on T_{α1} is checked for R up to R_max".into());
    }
    Ok(c)
}

// ---------------------------------------------------------------------------
// search

/// How `r0` is chosen for a grid point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum R0Choice {
    /// `r0 = (1 + x0)/2`
    Midpoint,
    /// A fixed `r0`, used when it lies in `(1, x0)`.
    Fixed(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchConfig {
    pub alphas: Vec<f64>,
    pub x0s: Vec<f64>,
    pub r0s: Vec<R0Choice>,
    /// Candidate exponents β for the polynomial level.
    pub poly_betas: Vec<f64>,
    pub scan: ScanConfig,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            alphas: (0..=40).map(|i| i as f64 / 10.0).collect(),
            x0s: vec![2.0, 4.0, 8.0, 16.0],
            r0s: vec![R0Choice::Midpoint, R0Choice::Fixed(1.5)],
            poly_betas: vec![0.25, 0.5, 0.75],
            scan: ScanConfig::default(),
        }
    }
}

impl SearchConfig {
    /// Valid parameter combinations, in search order.
    pub fn grid(&self) -> Vec<CriterionParams> {
        let mut out: Vec<CriterionParams> = Vec::new();
        for &a in &self.alphas {
            for &x0 in &self.x0s {
                for &choice in &self.r0s {
                    let mut p = CriterionParams::new(a, x0);
                    if let R0Choice::Fixed(r0) = choice {
                        p.r0 = r0;
                    }
                    if p.check().is_ok() && !out.contains(&p) {
                        out.push(p);
                    }
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub criterion: Criterion,
    pub alpha: f64,
    pub x0: f64,
    pub r0: f64,
    pub beta: Option<f64>,
    pub gamma: Option<f64>,
    pub verdict: Verdict,
    #[serde(with = "signed_float")]
    pub margin: f64,
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Classification {
    pub certificate: DriftCertificate,
    pub trace: Vec<TraceEntry>,
}

fn trace_entry(c: &DriftCertificate, beta: Option<f64>, gamma: Option<f64>) -> TraceEntry {
    TraceEntry {
        criterion: c.criterion,
        alpha: c.params.alpha,
        x0: c.params.x0,
        r0: c.params.r0,
        beta,
        gamma,
        verdict: c.verdict,
        margin: c.margin,
        note: c.notes.first().cloned(),
    }
}

fn better(a: &DriftCertificate, b: &DriftCertificate) -> bool {
    a.margin > b.margin
}

/// Strongest certificate over the parameter grid: exponential, polynomial,
/// strong, recurrent, then transient. Transience is always attempted so that
/// a simultaneous transience and recurrence certificate is reported as a
/// consistency error.
pub fn classify(q: &LevyQuadruple, search: &SearchConfig) -> Result<Classification> {
    let cfg = &search.scan;
    let mut trace = Vec::new();
    let grid = search.grid();
    for p in &grid {
        cfg.check(p.x0)?;
    }
    let mut best_any: Option<DriftCertificate> = None;
    let keep_best = |best: &mut Option<DriftCertificate>, c: &DriftCertificate| {
        if best.as_ref().map(|b| better(c, b)).unwrap_or(true) {
            *best = Some(c.clone());
        }
    };

    let mut recurrent: Option<DriftCertificate> = None;
    if q.asserts_open_set_irreducible {
        let scans: Vec<Scan> = grid
            .par_iter()
            .map(|p| run_scan(q, TestKind::V, p, cfg, &violates(Branch::Recurrence, p.alpha)))
            .collect::<Result<_>>()?;
        let locals: Vec<LocalTailCheck> = grid
            .iter()
            .map(|p| local_tail_check(q, p.alpha, p.x0))
            .collect::<Result<_>>()?;
        let mut levels: Vec<Option<ErgodicLevel>> = Vec::new();
        if q.asserts_skeleton_chain {
            levels.extend([
                Some(ErgodicLevel::Exponential),
                Some(ErgodicLevel::Polynomial),
                Some(ErgodicLevel::Strong),
            ]);
        }
        levels.push(None);
        for level in levels {
            let mut found: Option<DriftCertificate> = None;
            for ((base, scan), local) in grid.iter().copied().zip(&scans).zip(&locals) {
                let a = base.alpha;
                if scan.stopped_at.is_some() || scan.points.is_empty() {
                    let c = assemble(
                        q,
                        scan,
                        Branch::Recurrence,
                        base,
                        cfg,
                        Some(local),
                        TailPolicy::Certify,
                        false,
                    );
                    if level.is_none() {
                        trace.push(trace_entry(&c, None, None));
                        keep_best(&mut best_any, &c);
                    }
                    continue;
                }
                let neg: Vec<(f64, f64)> = scan.points.iter().map(|p| (-p.bd.total.to_f64(), p.r)).collect();
                let mut candidates: Vec<(Branch, CriterionParams, Option<f64>, Option<f64>)> = Vec::new();
                match level {
                    Some(ErgodicLevel::Exponential) if a > 0.0 => {
                        let m = neg
                            .iter()
                            .map(|&(n, r)| n / v_alpha(r, a).unwrap_or(f64::NAN))
                            .fold(f64::INFINITY, f64::min);
                        if m > 0.0 && m.is_finite() {
                            let mut p = base;
                            p.beta = 0.5 * m;
                            candidates.push((Branch::Exponential { beta: p.beta }, p, Some(p.beta), None));
                        }
                    }
                    Some(ErgodicLevel::Polynomial) if a > 0.0 => {
                        for &bp in &search.poly_betas {
                            let m = neg
                                .iter()
                                .map(|&(n, r)| n / v_alpha(r, a).unwrap_or(f64::NAN).powf(bp))
                                .fold(f64::INFINITY, f64::min);
                            if m > 0.0 && m.is_finite() {
                                let mut p = base;
                                p.beta = bp;
                                p.gamma = 0.5 * m;
                                candidates.push((
                                    Branch::Polynomial {
                                        beta: bp,
                                        gamma: p.gamma,
                                    },
                                    p,
                                    Some(bp),
                                    Some(p.gamma),
                                ));
                            }
                        }
                    }
                    Some(ErgodicLevel::Strong) => {
                        let m = neg.iter().map(|&(n, _)| n).fold(f64::INFINITY, f64::min);
                        if m > 0.0 && m.is_finite() {
                            let mut p = base;
                            p.beta = 0.5 * m;
                            candidates.push((Branch::Strong { beta: p.beta }, p, Some(p.beta), None));
                        }
                    }
                    None => candidates.push((Branch::Recurrence, base, None, None)),
                    _ => {}
                }
                for (branch, p, b, g) in candidates {
                    let c = assemble(q, scan, branch, p, cfg, Some(local), TailPolicy::Certify, false);
                    trace.push(trace_entry(&c, b, g));
                    keep_best(&mut best_any, &c);
                    if c.verdict != Verdict::Inconclusive && found.as_ref().map(|f| better(&c, f)).unwrap_or(true) {
                        found = Some(c);
                    }
                }
            }
            if found.is_some() {
                recurrent = found;
                break;
            }
        }
    }

    let mut transient: Option<DriftCertificate> = None;
    let tcerts: Vec<DriftCertificate> = grid
        .par_iter()
        .filter(|p| p.alpha > 0.0)
        .map(|p| check_transience(q, p, cfg))
        .collect::<Result<_>>()?;
    for c in tcerts {
        trace.push(trace_entry(&c, None, None));
        keep_best(&mut best_any, &c);
        if c.verdict == Verdict::Transient && transient.as_ref().map(|t| better(&c, t)).unwrap_or(true) {
            transient = Some(c);
        }
    }

    let certificate = match (recurrent, transient) {
        (Some(r), Some(t)) => {
            return Err(LevyError::Consistency(format!(
                "both a {:?} certificate (α = {}, x0 = {}) and a transience certificate (α = {}, x0 = {}) passed",
                r.verdict, r.params.alpha, r.params.x0, t.params.alpha, t.params.x0
            )))
        }
        (Some(mut r), None) => {
            attach_rate_bounds(q, &mut r)?;
            r
        }
        (None, Some(t)) => t,
        (None, None) => {
            let mut c = best_any.unwrap_or_else(|| {
                inconclusive(
                    Branch::Recurrence,
                    CriterionParams::new(0.0, search.x0s.first().copied().unwrap_or(2.0)),
                    cfg,
                    "empty search grid".into(),
                )
            });
            c.verdict = Verdict::Inconclusive;
            c
        }
    };
    Ok(Classification { certificate, trace })
}

// ---------------------------------------------------------------------------
// consequences and audits

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MixingFlag {
    /// `β^π(t) → 0`.
    BetaPiMixing,
    /// `e^{κt} β^π(t) → 0` for every `κ > 0`.
    SuperexponentialBetaDecay,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixingReport {
    pub flags: Vec<MixingFlag>,
}

pub fn mixing_flags(cert: &DriftCertificate) -> MixingReport {
    let flags = match cert.verdict {
        Verdict::Ergodic | Verdict::PolynomiallyErgodic => vec![MixingFlag::BetaPiMixing],
        Verdict::ExponentiallyErgodic => vec![MixingFlag::BetaPiMixing, MixingFlag::SuperexponentialBetaDecay],
        _ => vec![],
    };
    MixingReport { flags }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpotCheck {
    pub checked: usize,
    pub satisfied: usize,
    pub worst_point: Vec<f64>,
    #[serde(with = "signed_float")]
    pub worst_margin: f64,
}

fn branch_of(cert: &DriftCertificate) -> Result<Branch> {
    let p = &cert.params;
    Ok(match cert.criterion {
        Criterion::Transience => Branch::Transience,
        Criterion::Recurrence => Branch::Recurrence,
        Criterion::Ergodic { level } => ergodic_branch(p, level)?,
        Criterion::NullRecurrence { alpha2, beta, .. } => {
            let r_max = *cert
                .scan
                .radial_grid
                .last()
                .ok_or_else(|| LevyError::Config("certificate without scan grid".into()))?;
            Branch::NullLower {
                beta,
                v_rmax: v_alpha(r_max, alpha2)?,
            }
        }
    })
}

/// Re-evaluates the decisive inequality of a certificate at `n` random states
/// with `|x|` log-uniform on the scan window and uniform direction.
pub fn spot_check(q: &LevyQuadruple, cert: &DriftCertificate, n: usize, seed: u64) -> Result<SpotCheck> {
    let branch = branch_of(cert)?;
    let grid = &cert.scan.radial_grid;
    let (lo, hi) = match (grid.first(), grid.last()) {
        (Some(&a), Some(&b)) => (a, b),
        _ => return Err(LevyError::Config("certificate without scan grid".into())),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pts: Vec<Vec<f64>> = (0..n)
        .map(|_| {
            let r = lo * (rng.random::<f64>() * (hi / lo).ln()).exp();
            let mut g: Vec<f64> = (0..q.dim).map(|_| rng.sample(StandardNormal)).collect();
            let s = norm(&g);
            g.iter_mut().for_each(|c| *c *= r / s);
            g
        })
        .collect();
    let alpha = cert.params.alpha;
    let margins: Vec<(f64, Vec<f64>)> = pts
        .into_par_iter()
        .map(|x| {
            let bd = breakdown(q, branch.kind(), &x, &cert.params)?;
            Ok((branch.assess(&bd, norm(&x), alpha).1, x))
        })
        .collect::<Result<_>>()?;
    let satisfied = margins.iter().filter(|m| m.0 >= cert.margin_tol).count();
    let (worst_margin, worst_point) = margins
        .into_iter()
        .min_by(|a, b| a.0.total_cmp(&b.0))
        .unwrap_or((f64::INFINITY, vec![]));
    Ok(SpotCheck {
        checked: n,
        satisfied,
        worst_point,
        worst_margin,
    })
}

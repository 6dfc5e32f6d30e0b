//! Monte Carlo under the frozen-coefficient Euler scheme.
//!
//! Each step evaluates the quadruple at the current state and draws the
//! increment of the Lévy process with those frozen coefficients: Gaussian part
//! `N(b·dt, c·dt)`, small jumps `|y| < δ` replaced by a Gaussian with the same
//! covariance, and the remaining jumps as a compound Poisson draw. Stable-like
//! kernels bypass the split and draw an exact isotropic stable increment.
//!
//! Paths are split into `worker_streams` contiguous blocks; block `k` owns the
//! ChaCha stream `k` of the configured seed, so results depend on the seed and
//! the stream count only, never on the number of threads.

use std::f64::consts::PI;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Exp1, Poisson, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};
use statrs::function::erf::erfc;

use crate::drift::apply_generator;
use crate::error::{LevyError, Result};
use crate::geometry::{ball_points, dot, norm, psd_factor, sphere_area, sphere_design, sub};
use crate::quadrature::gauss_legendre;
use crate::quadruple::{FrozenKernel, LevyQuadruple};
use crate::symbol::stable_symbol_constant;
use crate::testfn::{eval_extension, TestFunction};

/// Outer radius of the shell grid used for compound Poisson jumps; beyond it a
/// Pareto tail is sampled.
const FAR_RADIUS: f64 = 1e3;
/// Ratio between consecutive shell radii.
const SHELL_RATIO: f64 = 1.15;
/// Fraction of censored paths above which an estimate is flagged.
const HEAVY_CENSORING: f64 = 0.5;
const HIT_CURVE_POINTS: usize = 24;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub dt: f64,
    pub horizon: f64,
    pub n_paths: usize,
    /// `δ`: jumps with `|y| < δ` are replaced by a Gaussian surrogate.
    pub small_jump_cut: f64,
    pub seed: u64,
    pub worker_streams: usize,
    /// Hitting estimators only: step size `max(dt, (κ·dist)²)` where `dist`
    /// is the distance to the target sphere.
    #[serde(default)]
    pub adaptive_kappa: Option<f64>,
    /// Hitting estimators only: Brownian-bridge correction for crossings
    /// between grid points.
    #[serde(default = "default_true")]
    pub crossing_correction: bool,
}

fn default_true() -> bool {
    true
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            dt: 0.01,
            horizon: 10.0,
            n_paths: 10_000,
            small_jump_cut: 0.1,
            seed: 0,
            worker_streams: 64,
            adaptive_kappa: None,
            crossing_correction: true,
        }
    }
}

impl SimConfig {
    pub fn check(&self) -> Result<()> {
        let bad = |m: String| Err(LevyError::Config(m));
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return bad(format!("dt = {} must be positive", self.dt));
        }
        if !(self.horizon >= self.dt && self.horizon.is_finite()) {
            return bad(format!(
                "horizon = {} must be finite and at least dt = {}",
                self.horizon, self.dt
            ));
        }
        if self.n_paths == 0 {
            return bad("n_paths must be positive".into());
        }
        if !(self.small_jump_cut > 0.0 && self.small_jump_cut <= 1.0) {
            return bad(format!("small_jump_cut = {} must lie in (0, 1]", self.small_jump_cut));
        }
        if self.worker_streams == 0 {
            return bad("worker_streams must be positive".into());
        }
        if let Some(k) = self.adaptive_kappa {
            if !(k > 0.0 && k.is_finite()) {
                return bad(format!("adaptive_kappa = {k} must be positive"));
            }
        }
        Ok(())
    }
}

/// Monte Carlo estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub se: f64,
}

impl Estimate {
    fn of_mean(xs: &[f64]) -> Estimate {
        let n = xs.len();
        if n == 0 {
            return Estimate { value: 0.0, se: 0.0 };
        }
        let mean = xs.iter().sum::<f64>() / n as f64;
        if n < 2 {
            return Estimate { value: mean, se: 0.0 };
        }
        let var = xs.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        Estimate {
            value: mean,
            se: (var / n as f64).sqrt(),
        }
    }

    fn of_fraction(k: usize, n: usize) -> Estimate {
        if n == 0 {
            return Estimate { value: 0.0, se: 0.0 };
        }
        let p = k as f64 / n as f64;
        Estimate {
            value: p,
            se: (p * (1.0 - p) / n as f64).sqrt(),
        }
    }
}

/// One row of a time series artifact.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub t: f64,
    pub estimate: f64,
    pub se: f64,
    pub n_effective: usize,
}

/// CSV with columns `t, estimate, se, n_effective`.
pub fn curve_to_csv(points: &[CurvePoint]) -> String {
    let mut out = String::from("t,estimate,se,n_effective\n");
    for p in points {
        out.push_str(&format!("{},{},{},{}\n", p.t, p.estimate, p.se, p.n_effective));
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HitMode {
    /// Start outside the ball, stop on entering it.
    Inward,
    /// Start inside the ball, stop on leaving it.
    Exit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpMoment {
    pub lambda: f64,
    /// `E[e^{λ(τ∧T)}]`
    pub estimate: Estimate,
    /// True when some paths were stopped by the horizon rather than by `τ`.
    pub censored: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HittingStats {
    pub mode: HitMode,
    pub ball_radius: f64,
    /// `P(τ ≤ T)` among surviving paths.
    pub hit_prob: Estimate,
    /// `E[τ 1{τ ≤ T}]`; a censored mean, never extrapolated past `T`.
    pub mean_hit_time: Estimate,
    pub mean_hit_time_censored: bool,
    pub exp_moment: Option<ExpMoment>,
    pub censored_fraction: f64,
    pub killed_fraction: f64,
    pub heavily_censored: bool,
    /// `P(τ ≤ t)` on a log-spaced time grid.
    pub hit_curve: Vec<CurvePoint>,
}

/// Finite-horizon proxy for `liminf_{t→∞} |F_t − x| = 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReturnDiagnostic {
    /// Fraction of surviving paths with `min_{t ∈ [T/2, T]} |F_t − x| < tol`.
    pub fraction: Estimate,
    pub tol: f64,
    pub window: [f64; 2],
    pub killed_fraction: f64,
    pub certifying: bool,
    pub note: String,
}

/// Least-squares line `y = intercept + slope·x` and the implied decay rate
/// `−slope` with a 95% Student-t interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub slope_se: f64,
    pub r_squared: f64,
    pub n_points: usize,
    pub rate: f64,
    pub rate_ci: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FittedRate {
    None {
        reason: String,
    },
    Polynomial {
        exponent: f64,
        ci: [f64; 2],
        r_squared: f64,
    },
    Exponential {
        rate: f64,
        ci: [f64; 2],
        r_squared: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathEnsembleStats {
    pub config: SimConfig,
    pub hitting: Option<HittingStats>,
    pub return_diagnostic: Option<ReturnDiagnostic>,
    /// TV curve; `se` holds the binning noise floor, the scale below which
    /// differences are indistinguishable from sampling noise.
    pub tv_curve: Vec<CurvePoint>,
    pub tv_noise_floor: Option<f64>,
    pub exponential_fit: Option<LinearFit>,
    pub polynomial_fit: Option<LinearFit>,
    pub fitted_rate: Option<FittedRate>,
    pub warnings: Vec<String>,
}

impl PathEnsembleStats {
    fn empty(cfg: &SimConfig) -> Self {
        PathEnsembleStats {
            config: cfg.clone(),
            hitting: None,
            return_diagnostic: None,
            tv_curve: vec![],
            tv_noise_floor: None,
            exponential_fit: None,
            polynomial_fit: None,
            fitted_rate: None,
            warnings: vec![],
        }
    }
}

// ---------------------------------------------------------------------------
// variates

/// Symmetric stable variate with `E e^{iξZ} = e^{−|ξ|^α}`.
pub fn symmetric_stable<R: Rng + ?Sized>(alpha: f64, rng: &mut R) -> f64 {
    let v = PI * (rng.random::<f64>() - 0.5);
    if (alpha - 1.0).abs() < 1e-12 {
        return v.tan();
    }
    let w: f64 = rng.sample(Exp1);
    (alpha * v).sin() / v.cos().powf(1.0 / alpha) * (((1.0 - alpha) * v).cos() / w).powf((1.0 - alpha) / alpha)
}

/// Positive stable variate with `E e^{−sA} = e^{−s^ρ}`, `0 < ρ < 1`.
pub fn positive_stable<R: Rng + ?Sized>(rho: f64, rng: &mut R) -> f64 {
    let u: f64 = loop {
        let u = rng.random::<f64>();
        if u > 0.0 {
            break u;
        }
    };
    let w: f64 = rng.sample(Exp1);
    let a = ((1.0 - rho) * PI * u).sin() * (rho * PI * u).sin().powf(rho / (1.0 - rho))
        / (PI * u).sin().powf(1.0 / (1.0 - rho));
    (a / w).powf((1.0 - rho) / rho)
}

fn random_direction<R: Rng + ?Sized>(d: usize, rng: &mut R) -> Vec<f64> {
    if d == 1 {
        return vec![if rng.random::<bool>() { 1.0 } else { -1.0 }];
    }
    loop {
        let v: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        let n = norm(&v);
        if n > 1e-12 {
            return v.iter().map(|x| x / n).collect();
        }
    }
}

// ---------------------------------------------------------------------------
// jump laws

#[derive(Debug, Clone)]
enum Cell {
    Point(Vec<f64>),
    /// Radius with density `∝ r^{-slope}` on `[lo, hi)`.
    Shell {
        lo: f64,
        hi: f64,
        slope: f64,
        dir: Option<Vec<f64>>,
    },
    /// `P(|Y| > r) = (lo/r)^index` for `r ≥ lo`.
    Pareto {
        lo: f64,
        index: f64,
        dir: Option<Vec<f64>>,
    },
}

#[derive(Debug, Clone)]
struct CellLaw {
    small_cov: Vec<f64>,
    compensator: Vec<f64>,
    rate: f64,
    cells: Vec<Cell>,
    index: Option<WeightedIndex<f64>>,
}

#[derive(Debug, Clone)]
enum JumpLaw {
    None,
    /// Increment over `h` is `(scale·h)^{1/α} Z`.
    Stable {
        alpha: f64,
        scale: f64,
    },
    Cells(CellLaw),
}

fn power_radius(lo: f64, hi: f64, slope: f64, u: f64) -> f64 {
    let e = 1.0 - slope;
    if e.abs() < 1e-9 {
        lo * (hi / lo).powf(u)
    } else {
        (lo.powf(e) + u * (hi.powf(e) - lo.powf(e))).powf(1.0 / e)
    }
}

impl Cell {
    fn sample<R: Rng + ?Sized>(&self, d: usize, rng: &mut R) -> Vec<f64> {
        let (r, dir) = match self {
            Cell::Point(y) => return y.clone(),
            Cell::Shell { lo, hi, slope, dir } => (power_radius(*lo, *hi, *slope, rng.random()), dir),
            Cell::Pareto { lo, index, dir } => {
                let u: f64 = 1.0 - rng.random::<f64>();
                (lo * u.powf(-1.0 / index), dir)
            }
        };
        let u = match dir {
            Some(u) => u.clone(),
            None => random_direction(d, rng),
        };
        u.iter().map(|v| v * r).collect()
    }
}

/// `∫_{lo}^{hi} w(r) dr` by Gauss–Legendre in `log r`.
fn log_gl(w: &dyn Fn(f64) -> f64, lo: f64, hi: f64, nodes: &(Vec<f64>, Vec<f64>)) -> f64 {
    let (a, b) = (lo.ln(), hi.ln());
    let half = 0.5 * (b - a);
    nodes
        .0
        .iter()
        .zip(&nodes.1)
        .map(|(z, wt)| {
            let r = (a + half * (z + 1.0)).exp();
            wt * half * w(r) * r
        })
        .sum()
}

fn local_slope(w: &dyn Fn(f64) -> f64, lo: f64, hi: f64) -> f64 {
    let (a, b) = (w(lo), w(hi));
    if a > 0.0 && b > 0.0 {
        -(b / a).ln() / (hi / lo).ln()
    } else {
        1.0
    }
}

fn build_law(k: &FrozenKernel, cut: f64, warnings: &mut Vec<String>) -> Result<JumpLaw> {
    let d = k.dim();
    if k.is_zero() {
        return Ok(JumpLaw::None);
    }
    match k {
        FrozenKernel::Stable { dim, alpha, gamma } => Ok(JumpLaw::Stable {
            alpha: *alpha,
            scale: gamma * stable_symbol_constant(*dim, *alpha),
        }),
        FrozenKernel::Atoms { atoms, .. } => {
            let small_cov = k.second_moment_matrix(0.0, cut)?;
            let compensator = k.first_moment_vector(cut, 1.0)?.iter().map(|v| -v).collect();
            let mut cells = vec![];
            let mut weights = vec![];
            for (y, m) in atoms {
                if *m < 0.0 {
                    return Err(LevyError::Domain(format!("negative atom mass {m}")));
                }
                if norm(y) >= cut && *m > 0.0 {
                    cells.push(Cell::Point(y.clone()));
                    weights.push(*m);
                }
            }
            finish_cells(small_cov, compensator, cells, weights)
        }
        FrozenKernel::Density {
            density,
            at,
            tail_exponent,
            isotropic,
            ..
        } => {
            let small_cov = k.second_moment_matrix(0.0, cut)?;
            let compensator = k.first_moment_vector(cut, 1.0)?.iter().map(|v| -v).collect();
            let gl = gauss_legendre(5);
            let n_shells = ((FAR_RADIUS / cut).ln() / SHELL_RATIO.ln()).ceil() as usize;
            let ratio = (FAR_RADIUS / cut).powf(1.0 / n_shells as f64);
            let design: Vec<(Vec<f64>, f64)> = if *isotropic {
                let mut e1 = vec![0.0; d];
                e1[0] = 1.0;
                vec![(e1, sphere_area(d))]
            } else {
                sphere_design(d, 0)
            };
            let mut cells = vec![];
            let mut weights = vec![];
            for (u, w_dir) in &design {
                let radial = |r: f64| {
                    let y: Vec<f64> = u.iter().map(|v| v * r).collect();
                    w_dir * density(at, &y) * r.powi(d as i32 - 1)
                };
                let dir = if *isotropic { None } else { Some(u.clone()) };
                for s in 0..n_shells {
                    let lo = cut * ratio.powi(s as i32);
                    let hi = lo * ratio;
                    let m = log_gl(&radial, lo, hi, &gl);
                    if !m.is_finite() || m < 0.0 {
                        return Err(LevyError::Config(format!(
                            "jump density is not samplable on the shell [{lo}, {hi})"
                        )));
                    }
                    if m > 0.0 {
                        cells.push(Cell::Shell {
                            lo,
                            hi,
                            slope: local_slope(&radial, lo, hi),
                            dir: dir.clone(),
                        });
                        weights.push(m);
                    }
                }
                let w_far = radial(FAR_RADIUS);
                if w_far > 0.0 {
                    let index = match tail_exponent {
                        Some(kappa) => kappa - d as f64,
                        None => {
                            let s = local_slope(&radial, FAR_RADIUS, 2.0 * FAR_RADIUS);
                            if !warnings.iter().any(|m| m.contains("tail exponent")) {
                                warnings.push(format!(
                                    "no tail exponent declared; Pareto tail beyond |y| = {FAR_RADIUS} uses the local slope {s:.3}"
                                ));
                            }
                            s - 1.0
                        }
                    };
                    if !(index > 0.0) {
                        return Err(LevyError::Config(format!(
                            "jump mass beyond |y| = {FAR_RADIUS} is infinite (tail index {index}); the jump law is not samplable"
                        )));
                    }
                    cells.push(Cell::Pareto {
                        lo: FAR_RADIUS,
                        index,
                        dir: dir.clone(),
                    });
                    weights.push(w_far * FAR_RADIUS / index);
                }
            }
            finish_cells(small_cov, compensator, cells, weights)
        }
    }
}

fn finish_cells(small_cov: Vec<f64>, compensator: Vec<f64>, cells: Vec<Cell>, weights: Vec<f64>) -> Result<JumpLaw> {
    let rate: f64 = weights.iter().sum();
    if !rate.is_finite() {
        return Err(LevyError::Config(
            "jump mass on |y| ≥ δ is infinite and the kernel is not stable-like; the jump law is not samplable".into(),
        ));
    }
    let index = if rate > 0.0 {
        Some(WeightedIndex::new(&weights).map_err(|e| LevyError::Config(format!("jump cell weights: {e}")))?)
    } else {
        None
    };
    Ok(JumpLaw::Cells(CellLaw {
        small_cov,
        compensator,
        rate,
        cells,
        index,
    }))
}

/// Outcome of one Euler step.
#[derive(Debug, Clone, PartialEq)]
pub enum StepOutcome {
    Alive(Vec<f64>),
    Killed,
}

/// Euler stepper for one quadruple. State-independent jump laws are built
/// once; state-dependent ones are rebuilt at every step.
pub struct Stepper<'a> {
    q: &'a LevyQuadruple,
    cut: f64,
    fixed: Option<JumpLaw>,
    pub warnings: Vec<String>,
}

impl<'a> Stepper<'a> {
    pub fn new(q: &'a LevyQuadruple, small_jump_cut: f64) -> Result<Self> {
        if !(small_jump_cut > 0.0 && small_jump_cut <= 1.0) {
            return Err(LevyError::Config(format!(
                "small_jump_cut = {small_jump_cut} must lie in (0, 1]"
            )));
        }
        let mut warnings = vec![];
        let fixed = if q.jumps.is_state_independent() {
            let origin = vec![0.0; q.dim];
            Some(build_law(&q.kernel(&origin)?, small_jump_cut, &mut warnings)?)
        } else {
            None
        };
        Ok(Stepper {
            q,
            cut: small_jump_cut,
            fixed,
            warnings,
        })
    }

    fn law(&self, x: &[f64]) -> Result<JumpLaw> {
        match &self.fixed {
            Some(l) => Ok(l.clone()),
            None => build_law(&self.q.kernel(x)?, self.cut, &mut vec![]),
        }
    }

    /// Covariance rate of the Gaussian part of a step from `x`, including the
    /// small-jump surrogate.
    pub fn gaussian_covariance(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut c = self.q.c(x)?;
        if let JumpLaw::Cells(cl) = self.law(x)? {
            for (a, b) in c.iter_mut().zip(&cl.small_cov) {
                *a += b;
            }
        }
        Ok(c)
    }

    pub fn step<R: Rng + ?Sized>(&self, x: &[f64], dt: f64, rng: &mut R) -> Result<StepOutcome> {
        if !(dt > 0.0) {
            return Err(LevyError::Domain(format!("step size {dt} must be positive")));
        }
        let d = self.q.dim;
        let a = self.q.a(x)?;
        if a > 0.0 && rng.random::<f64>() < -(-a * dt).exp_m1() {
            return Ok(StepOutcome::Killed);
        }
        let b = self.q.b(x)?;
        let mut cov = self.q.c(x)?;
        let mut next: Vec<f64> = x.iter().zip(&b).map(|(xi, bi)| xi + bi * dt).collect();
        let law = match &self.fixed {
            Some(l) => std::borrow::Cow::Borrowed(l),
            None => std::borrow::Cow::Owned(self.law(x)?),
        };
        match law.as_ref() {
            JumpLaw::None => {}
            JumpLaw::Stable { alpha, scale } => {
                let s = (scale * dt).powf(1.0 / alpha);
                if d == 1 {
                    next[0] += s * symmetric_stable(*alpha, rng);
                } else {
                    let m = s * (2.0 * positive_stable(alpha / 2.0, rng)).sqrt();
                    for v in next.iter_mut() {
                        *v += m * rng.sample::<f64, _>(StandardNormal);
                    }
                }
            }
            JumpLaw::Cells(cl) => {
                for (c, s) in cov.iter_mut().zip(&cl.small_cov) {
                    *c += s;
                }
                for (v, m) in next.iter_mut().zip(&cl.compensator) {
                    *v += m * dt;
                }
                if let Some(idx) = &cl.index {
                    let n = Poisson::new(cl.rate * dt)
                        .map_err(|e| LevyError::Config(format!("jump count law: {e}")))?
                        .sample(rng) as usize;
                    for _ in 0..n {
                        let y = cl.cells[idx.sample(rng)].sample(d, rng);
                        for (v, yi) in next.iter_mut().zip(&y) {
                            *v += yi;
                        }
                    }
                }
            }
        }
        if cov.iter().any(|v| *v != 0.0) {
            let l = psd_factor(&cov, d);
            let z: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
            let sq = dt.sqrt();
            for i in 0..d {
                let s: f64 = (0..d).map(|j| l[i * d + j] * z[j]).sum();
                next[i] += sq * s;
            }
        }
        if next.iter().any(|v| !v.is_finite()) {
            return Err(LevyError::Evaluation(format!(
                "non-finite state after a step from {x:?}"
            )));
        }
        Ok(StepOutcome::Alive(next))
    }
}

/// One Euler step with the default small-jump cut `δ = 0.1`.
pub fn step<R: Rng + ?Sized>(q: &LevyQuadruple, x: &[f64], dt: f64, rng: &mut R) -> Result<StepOutcome> {
    Stepper::new(q, 0.1)?.step(x, dt, rng)
}

// ---------------------------------------------------------------------------
// ensemble driver

/// Runs `path(i, rng)` for `i < n`, deterministically in `(seed, streams, tag)`.
fn run_paths<T, F>(cfg: &SimConfig, tag: u64, n: usize, path: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize, &mut ChaCha8Rng) -> Result<T> + Sync,
{
    let blocks = cfg.worker_streams.min(n).max(1);
    let per = n.div_ceil(blocks);
    let chunks: Vec<Vec<T>> = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            rng.set_stream((tag << 32) | b as u64);
            let lo = b * per;
            let hi = ((b + 1) * per).min(n);
            (lo..hi).map(|i| path(i, &mut rng)).collect::<Result<Vec<T>>>()
        })
        .collect::<Result<_>>()?;
    Ok(chunks.into_iter().flatten().collect())
}

// ---------------------------------------------------------------------------
// hitting

enum PathEnd {
    Hit(f64),
    Censored,
    Killed,
}

/// Crossing probability of a Brownian bridge between two points at distances
/// `d1, d2` on the same side of a boundary with normal variance `s2·h`.
fn bridge_crossing(d1: f64, d2: f64, s2: f64, h: f64) -> f64 {
    if s2 <= 0.0 {
        return 0.0;
    }
    (-2.0 * d1 * d2 / (s2 * h)).exp()
}

/// Hitting of the closed ball `B(0, R)` from outside, or exit from it when
/// `x_start` lies inside.
pub fn estimate_hitting(
    q: &LevyQuadruple,
    x_start: &[f64],
    ball_radius: f64,
    lambda: Option<f64>,
    cfg: &SimConfig,
) -> Result<PathEnsembleStats> {
    cfg.check()?;
    if x_start.len() != q.dim {
        return Err(LevyError::Domain("start point of the wrong dimension".into()));
    }
    if !(ball_radius > 0.0) {
        return Err(LevyError::Domain(format!("ball radius {ball_radius} must be positive")));
    }
    let mode = if norm(x_start) > ball_radius {
        HitMode::Inward
    } else {
        HitMode::Exit
    };
    let stepper = Stepper::new(q, cfg.small_jump_cut)?;
    let gap = |x: &[f64]| match mode {
        HitMode::Inward => norm(x) - ball_radius,
        HitMode::Exit => ball_radius - norm(x),
    };
    let ends = run_paths(cfg, 1, cfg.n_paths, |_, rng| {
        let mut x = x_start.to_vec();
        let mut t = 0.0;
        while t < cfg.horizon {
            let g0 = gap(&x);
            let mut h = cfg.dt;
            if let Some(k) = cfg.adaptive_kappa {
                h = h.max((k * g0).powi(2));
            }
            h = h.min(cfg.horizon - t);
            let next = match stepper.step(&x, h, rng)? {
                StepOutcome::Killed => return Ok(PathEnd::Killed),
                StepOutcome::Alive(y) => y,
            };
            t += h;
            let g1 = gap(&next);
            if g1 <= 0.0 {
                return Ok(PathEnd::Hit(t));
            }
            if cfg.crossing_correction {
                let r = norm(&x);
                if r > 0.0 {
                    let n: Vec<f64> = x.iter().map(|v| v / r).collect();
                    let cov = stepper.gaussian_covariance(&x)?;
                    let d = q.dim;
                    let mut s2 = 0.0;
                    for i in 0..d {
                        for j in 0..d {
                            s2 += n[i] * cov[i * d + j] * n[j];
                        }
                    }
                    if rng.random::<f64>() < bridge_crossing(g0, g1, s2, h) {
                        return Ok(PathEnd::Hit(t));
                    }
                }
            }
            x = next;
        }
        Ok(PathEnd::Censored)
    })?;
    let n = ends.len();
    let killed = ends.iter().filter(|e| matches!(e, PathEnd::Killed)).count();
    let alive = n - killed;
    let times: Vec<Option<f64>> = ends
        .iter()
        .filter_map(|e| match e {
            PathEnd::Hit(t) => Some(Some(*t)),
            PathEnd::Censored => Some(None),
            PathEnd::Killed => None,
        })
        .collect();
    let hits = times.iter().filter(|t| t.is_some()).count();
    let censored = alive - hits;
    let censored_fraction = if alive > 0 { censored as f64 / alive as f64 } else { 0.0 };
    let tau_ind: Vec<f64> = times.iter().map(|t| t.unwrap_or(0.0)).collect();
    let exp_moment = lambda.map(|l| {
        let vals: Vec<f64> = times.iter().map(|t| (l * t.unwrap_or(cfg.horizon)).exp()).collect();
        ExpMoment {
            lambda: l,
            estimate: Estimate::of_mean(&vals),
            censored: censored > 0,
        }
    });
    let grid: Vec<f64> = (1..=HIT_CURVE_POINTS)
        .map(|k| cfg.dt * (cfg.horizon / cfg.dt).powf(k as f64 / HIT_CURVE_POINTS as f64))
        .collect();
    let hit_curve = grid
        .iter()
        .map(|&tk| {
            let c = times.iter().filter(|t| t.is_some_and(|t| t <= tk)).count();
            let e = Estimate::of_fraction(c, alive);
            CurvePoint {
                t: tk,
                estimate: e.value,
                se: e.se,
                n_effective: alive,
            }
        })
        .collect();
    let mut stats = PathEnsembleStats::empty(cfg);
    stats.warnings = stepper.warnings.clone();
    if censored_fraction > HEAVY_CENSORING {
        stats.warnings.push(format!(
            "{:.1}% of paths censored at the horizon",
            100.0 * censored_fraction
        ));
    }
    if killed > 0 {
        stats
            .warnings
            .push(format!("{killed} of {n} paths killed; excluded from all estimates"));
    }
    stats.hitting = Some(HittingStats {
        mode,
        ball_radius,
        hit_prob: Estimate::of_fraction(hits, alive),
        mean_hit_time: Estimate::of_mean(&tau_ind),
        mean_hit_time_censored: censored > 0,
        exp_moment,
        censored_fraction,
        killed_fraction: killed as f64 / n as f64,
        heavily_censored: censored_fraction > HEAVY_CENSORING,
        hit_curve,
    });
    Ok(stats)
}

// ---------------------------------------------------------------------------
// return diagnostic

fn segment_distance(p: &[f64], a: &[f64], b: &[f64]) -> f64 {
    let ab = sub(b, a);
    let ap = sub(p, a);
    let l2 = dot(&ab, &ab);
    let s = if l2 > 0.0 {
        (dot(&ap, &ab) / l2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let proj: Vec<f64> = a.iter().zip(&ab).map(|(u, v)| u + s * v).collect();
    norm(&sub(p, &proj))
}

/// Fraction of paths coming within `tol = 2√(tr c(x))√dt + δ` of `x` during
/// `[T/2, T]`. Numerical evidence only; it never certifies recurrence.
pub fn return_diagnostic(q: &LevyQuadruple, x: &[f64], cfg: &SimConfig) -> Result<ReturnDiagnostic> {
    cfg.check()?;
    let d = q.dim;
    let c = q.c(x)?;
    let tr: f64 = (0..d).map(|i| c[i * d + i]).sum();
    let tol = 2.0 * tr.max(0.0).sqrt() * cfg.dt.sqrt() + cfg.small_jump_cut;
    let stepper = Stepper::new(q, cfg.small_jump_cut)?;
    let half = 0.5 * cfg.horizon;
    let out = run_paths(cfg, 2, cfg.n_paths, |_, rng| {
        let mut y = x.to_vec();
        let mut t = 0.0;
        let mut best = f64::INFINITY;
        while t < cfg.horizon {
            let h = cfg.dt.min(cfg.horizon - t);
            let next = match stepper.step(&y, h, rng)? {
                StepOutcome::Killed => return Ok(None),
                StepOutcome::Alive(v) => v,
            };
            t += h;
            if t > half {
                best = best.min(segment_distance(x, &y, &next));
            }
            y = next;
        }
        Ok(Some(best < tol))
    })?;
    let alive: Vec<bool> = out.iter().filter_map(|v| *v).collect();
    let hits = alive.iter().filter(|v| **v).count();
    Ok(ReturnDiagnostic {
        fraction: Estimate::of_fraction(hits, alive.len()),
        tol,
        window: [half, cfg.horizon],
        killed_fraction: (out.len() - alive.len()) as f64 / out.len() as f64,
        certifying: false,
        note: "finite-horizon proxy for liminf |F_t − x| = 0; heuristic, not a certificate".into(),
    })
}

// ---------------------------------------------------------------------------
// total variation decay

fn quantile_edges(mut v: Vec<f64>, bins: usize) -> Vec<f64> {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    (1..bins).map(|k| v[(k * n / bins).min(n - 1)]).collect()
}

fn bin_of(edges: &[f64], v: f64) -> usize {
    edges.partition_point(|e| *e <= v)
}

/// Histogram TV between two ensembles on pooled-quantile bins, and the
/// expected TV of two equal-law samples of the same sizes.
fn histogram_tv(a: &[Vec<f64>], b: &[Vec<f64>], bins: usize) -> (f64, f64) {
    let d = a.first().or(b.first()).map_or(1, |v| v.len());
    let per_axis = if d == 1 {
        bins
    } else {
        (bins as f64).sqrt().ceil() as usize
    };
    let edges: Vec<Vec<f64>> = (0..d)
        .map(|k| {
            let pooled: Vec<f64> = a.iter().chain(b).map(|v| v[k]).collect();
            quantile_edges(pooled, per_axis)
        })
        .collect();
    let cells = per_axis.pow(d as u32);
    let index = |v: &Vec<f64>| {
        edges
            .iter()
            .zip(v)
            .fold(0usize, |acc, (e, x)| acc * per_axis + bin_of(e, *x))
    };
    let mut ca = vec![0usize; cells];
    let mut cb = vec![0usize; cells];
    for v in a {
        ca[index(v)] += 1;
    }
    for v in b {
        cb[index(v)] += 1;
    }
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let mut tv = 0.0;
    let mut floor = 0.0;
    for (x, y) in ca.iter().zip(&cb) {
        tv += (*x as f64 / na - *y as f64 / nb).abs();
        let p = (x + y) as f64 / (na + nb);
        floor += (p * (1.0 - p) * (1.0 / na + 1.0 / nb)).sqrt();
    }
    (0.5 * tv, 0.5 * floor * (2.0 / PI).sqrt())
}

fn linear_fit(xs: &[f64], ys: &[f64]) -> Option<LinearFit> {
    let n = xs.len();
    if n < 3 {
        return None;
    }
    let mx = xs.iter().sum::<f64>() / n as f64;
    let my = ys.iter().sum::<f64>() / n as f64;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    if sxx <= 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| (y - intercept - slope * x).powi(2))
        .sum();
    let slope_se = (sse / (n - 2) as f64 / sxx).sqrt();
    let r_squared = if syy > 0.0 { 1.0 - sse / syy } else { 1.0 };
    let tq = StudentsT::new(0.0, 1.0, (n - 2) as f64)
        .map(|t| t.inverse_cdf(0.975))
        .unwrap_or(f64::INFINITY);
    let rate = -slope;
    Some(LinearFit {
        slope,
        intercept,
        slope_se,
        r_squared,
        n_points: n,
        rate,
        rate_ci: [rate - tq * slope_se, rate + tq * slope_se],
    })
}

/// Empirical TV between the laws started at `x_a` and `x_b`, with
/// exponential (`log TV` vs `t`) and polynomial (`log TV` vs `log t`) fits
/// over the points with `3·floor < TV < 0.5`.
pub fn tv_decay(
    q: &LevyQuadruple,
    x_a: &[f64],
    x_b: &[f64],
    times: &[f64],
    bins: usize,
    cfg: &SimConfig,
) -> Result<PathEnsembleStats> {
    cfg.check()?;
    let d = q.dim;
    if d > 2 {
        return Err(LevyError::UnsupportedDimension(d, 2));
    }
    if x_a.len() != d || x_b.len() != d {
        return Err(LevyError::Domain("start points of the wrong dimension".into()));
    }
    if times.is_empty() || times[0] <= 0.0 || times.windows(2).any(|w| w[1] <= w[0]) {
        return Err(LevyError::Config(
            "times must be positive and strictly increasing".into(),
        ));
    }
    if bins < 2 {
        return Err(LevyError::Config("at least two bins are needed".into()));
    }
    let stepper = Stepper::new(q, cfg.small_jump_cut)?;
    let run = |start: &[f64], tag: u64| {
        run_paths(cfg, tag, cfg.n_paths, |_, rng| {
            let mut x = start.to_vec();
            let mut t = 0.0;
            let mut snaps = Vec::with_capacity(times.len());
            for &target in times {
                while t < target - 1e-12 * target {
                    let h = cfg.dt.min(target - t);
                    x = match stepper.step(&x, h, rng)? {
                        StepOutcome::Killed => return Ok(None),
                        StepOutcome::Alive(y) => y,
                    };
                    t += h;
                }
                snaps.push(x.clone());
            }
            Ok(Some(snaps))
        })
    };
    let ea: Vec<Vec<Vec<f64>>> = run(x_a, 3)?.into_iter().flatten().collect();
    let eb: Vec<Vec<Vec<f64>>> = run(x_b, 4)?.into_iter().flatten().collect();
    let mut stats = PathEnsembleStats::empty(cfg);
    stats.warnings = stepper.warnings.clone();
    let killed = 2 * cfg.n_paths - ea.len() - eb.len();
    if killed > 0 {
        stats
            .warnings
            .push(format!("{killed} killed paths excluded from the histograms"));
    }
    if ea.is_empty() || eb.is_empty() {
        stats.fitted_rate = Some(FittedRate::None {
            reason: "an ensemble was entirely killed".into(),
        });
        return Ok(stats);
    }
    let mut floors = vec![];
    for (k, &t) in times.iter().enumerate() {
        let a: Vec<Vec<f64>> = ea.iter().map(|s| s[k].clone()).collect();
        let b: Vec<Vec<f64>> = eb.iter().map(|s| s[k].clone()).collect();
        let (tv, floor) = histogram_tv(&a, &b, bins);
        floors.push(floor);
        stats.tv_curve.push(CurvePoint {
            t,
            estimate: tv,
            se: floor,
            n_effective: a.len().min(b.len()),
        });
    }
    let floor = floors.iter().copied().fold(0.0, f64::max);
    stats.tv_noise_floor = Some(floor);
    let usable: Vec<&CurvePoint> = stats
        .tv_curve
        .iter()
        .filter(|p| p.estimate > 3.0 * floor && p.estimate < 0.5)
        .collect();
    let ln_tv: Vec<f64> = usable.iter().map(|p| p.estimate.ln()).collect();
    let ts: Vec<f64> = usable.iter().map(|p| p.t).collect();
    let ln_t: Vec<f64> = ts.iter().map(|t| t.ln()).collect();
    stats.exponential_fit = linear_fit(&ts, &ln_tv);
    stats.polynomial_fit = linear_fit(&ln_t, &ln_tv);
    stats.fitted_rate = Some(match (&stats.exponential_fit, &stats.polynomial_fit) {
        (Some(e), Some(p)) => {
            if e.rate <= 0.0 && p.rate <= 0.0 {
                FittedRate::None {
                    reason: "TV does not decay over the fitted window".into(),
                }
            } else if e.r_squared >= p.r_squared {
                FittedRate::Exponential {
                    rate: e.rate,
                    ci: e.rate_ci,
                    r_squared: e.r_squared,
                }
            } else {
                FittedRate::Polynomial {
                    exponent: p.rate,
                    ci: p.rate_ci,
                    r_squared: p.r_squared,
                }
            }
        }
        _ => FittedRate::None {
            reason: format!(
                "{} points above three times the noise floor {floor:.3e} and below 0.5; at least 3 needed",
                usable.len()
            ),
        },
    });
    Ok(stats)
}

// ---------------------------------------------------------------------------
// generator consistency

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorCheck {
    pub x: Vec<f64>,
    pub t: f64,
    /// `(E f(F_t) − f(x))/t`
    pub weak_derivative: Estimate,
    /// `L f(x)` by quadrature.
    pub generator: f64,
    /// Budget for the `O(t)` bias of the weak derivative.
    pub bias_budget: f64,
    pub reach: f64,
    pub tolerance: f64,
    pub passed: bool,
    pub killed_fraction: f64,
    pub notes: Vec<String>,
}

/// Compares the one-step weak derivative `(E f(F_t) − f(x))/t` with `L f(x)`.
///
/// The bias budget bounds `sup_{s ≤ t} |E L_x f(F_s) − L_x f(x)|` for the
/// process with coefficients frozen at `x`: the oscillation of `L_x f` over
/// `B(x, ρ)`, plus `2 sup |L_x f|` times the probability of leaving `B(x, ρ)`,
/// plus the Taylor error of the small-jump surrogate. `ρ` is chosen to
/// minimise the total.
pub fn generator_consistency(
    q: &LevyQuadruple,
    f: &TestFunction,
    x: &[f64],
    t: f64,
    cfg: &SimConfig,
) -> Result<GeneratorCheck> {
    cfg.check()?;
    if !(t > 0.0) {
        return Err(LevyError::Domain(format!("time {t} must be positive")));
    }
    let stepper = Stepper::new(q, cfg.small_jump_cut)?;
    let fx = eval_extension(f, x);
    let vals = run_paths(cfg, 5, cfg.n_paths, |_, rng| {
        Ok(match stepper.step(x, t, rng)? {
            StepOutcome::Killed => (-fx / t, true),
            StepOutcome::Alive(y) => ((eval_extension(f, &y) - fx) / t, false),
        })
    })?;
    let killed = vals.iter().filter(|v| v.1).count();
    let vals: Vec<f64> = vals.into_iter().map(|v| v.0).collect();
    let weak = Estimate::of_mean(&vals);
    let generator = apply_generator(q, f, x)?
        .finite()
        .ok_or_else(|| LevyError::Integrability("L f(x) diverges".into()))?;

    let frozen = q.frozen_at(x)?;
    let d = q.dim;
    let kernel = q.kernel(x)?;
    let b = q.b(x)?;
    let cov = stepper.gaussian_covariance(x)?;
    let a = q.a(x)?;
    let lf = |y: &[f64]| -> Result<f64> {
        apply_generator(&frozen, f, y)?
            .finite()
            .ok_or_else(|| LevyError::Integrability(format!("L f diverges at {y:?}")))
    };
    let scale = norm(x).max(f.r0).max(1.0);
    let global: Vec<Vec<f64>> = ball_points(x, 4.0 * scale, 96);
    let g_sup = global
        .par_iter()
        .map(|y| lf(y).map(f64::abs))
        .collect::<Result<Vec<f64>>>()?
        .into_iter()
        .fold(generator.abs(), f64::max);
    let mut best: Option<(f64, f64)> = None;
    for k in 0..12 {
        let rho = 1e-3 * scale * 2f64.powi(k);
        let pts = ball_points(x, rho, 33);
        let osc = pts
            .par_iter()
            .map(|y| lf(y).map(|v| (v - generator).abs()))
            .collect::<Result<Vec<f64>>>()?
            .into_iter()
            .fold(0.0, f64::max);
        let s = 0.5 * rho - norm(&b) * t;
        let mut p_far = if s <= 0.0 {
            1.0
        } else {
            (0..d)
                .map(|i| {
                    let v = cov[i * d + i] * t;
                    if v > 0.0 {
                        erfc(s / (2.0 * d as f64 * v).sqrt())
                    } else {
                        0.0
                    }
                })
                .sum::<f64>()
        };
        p_far += t * kernel.mass(0.5 * rho, f64::INFINITY)?.to_f64();
        p_far += -(-a * t).exp_m1();
        let budget = osc + 2.0 * g_sup * p_far.min(1.0);
        if best.is_none_or(|(bb, _)| budget < bb) {
            best = Some((budget, rho));
        }
    }
    let (mut bias, reach) = best.expect("at least one reach candidate");
    let mut notes = vec![];
    if !matches!(kernel, FrozenKernel::Stable { .. }) && !kernel.is_zero() {
        let delta = cfg.small_jump_cut;
        let r = norm(x);
        let third = f.third_derivative_bound((r - reach - delta).max(0.0), r + reach + delta);
        let m2 = crate::quadruple::small_jump_moment(&kernel).unwrap_or(f64::INFINITY);
        let inner = kernel
            .integrate_radial(0.0, delta, 2.0, &|r| r * r, Default::default())
            .map(|i| i.value.to_f64())
            .unwrap_or(m2);
        bias += third * delta / 6.0 * inner;
        notes.push(format!("small-jump surrogate term included (δ = {delta})"));
    }
    notes.push("sup |L_x f| and the oscillation over B(x, ρ) are sampled".into());
    let tolerance = 3.0 * weak.se + bias;
    Ok(GeneratorCheck {
        x: x.to_vec(),
        t,
        weak_derivative: weak,
        generator,
        bias_budget: bias,
        reach,
        tolerance,
        passed: (weak.value - generator).abs() <= tolerance,
        killed_fraction: killed as f64 / vals.len() as f64,
        notes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadruple::{constant_matrix, constant_vector, scaled_identity, LevyMeasureSpec};

    fn brownian(d: usize) -> LevyQuadruple {
        LevyQuadruple {
            diffusion: constant_matrix(scaled_identity(d, 1.0)),
            ..LevyQuadruple::null(d)
        }
    }

    fn cfg(n: usize, dt: f64, horizon: f64) -> SimConfig {
        SimConfig {
            dt,
            horizon,
            n_paths: n,
            seed: 7,
            ..SimConfig::default()
        }
    }

    #[test]
    fn brownian_step_moments() {
        let q = brownian(2);
        let c = cfg(100_000, 1.0, 1.0);
        let s = Stepper::new(&q, 0.1).unwrap();
        let xs = run_paths(&c, 9, c.n_paths, |_, rng| match s.step(&[0.0, 0.0], 1.0, rng)? {
            StepOutcome::Alive(y) => Ok(y),
            StepOutcome::Killed => unreachable!(),
        })
        .unwrap();
        let n = xs.len() as f64;
        for k in 0..2 {
            let m = xs.iter().map(|v| v[k]).sum::<f64>() / n;
            let v = xs.iter().map(|v| v[k] * v[k]).sum::<f64>() / n;
            assert!(m.abs() < 4.0 / n.sqrt(), "mean {m}");
            assert!((v - 1.0).abs() < 4.0 * 2f64.sqrt() / n.sqrt(), "var {v}");
        }
    }

    #[test]
    fn pure_drift_is_deterministic() {
        let q = LevyQuadruple {
            drift: constant_vector(vec![1.0, 0.0]),
            ..LevyQuadruple::null(2)
        };
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert_eq!(
            step(&q, &[0.0, 0.0], 0.5, &mut rng).unwrap(),
            StepOutcome::Alive(vec![0.5, 0.0])
        );
    }

    #[test]
    fn cauchy_quartiles() {
        let q = LevyQuadruple {
            jumps: LevyMeasureSpec::stable(1.0, 1.0),
            ..LevyQuadruple::null(1)
        };
        let c = cfg(100_000, 1.0, 1.0);
        let s = Stepper::new(&q, 0.1).unwrap();
        let mut xs = run_paths(&c, 9, c.n_paths, |_, rng| match s.step(&[0.0], 1.0, rng)? {
            StepOutcome::Alive(y) => Ok(y[0]),
            StepOutcome::Killed => unreachable!(),
        })
        .unwrap();
        xs.sort_by(f64::total_cmp);
        let n = xs.len();
        // symbol γ k_1(1)|ξ| = π|ξ|: Cauchy with scale π, IQR 2π
        let iqr = xs[3 * n / 4] - xs[n / 4];
        assert!(xs[n / 2].abs() < 0.05 * PI, "median {}", xs[n / 2]);
        assert!((iqr / (2.0 * PI) - 1.0).abs() < 0.05, "iqr {iqr}");
    }

    #[test]
    fn positive_stable_laplace_transform() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for rho in [0.3, 0.6, 0.85] {
            let n = 200_000;
            let m = (0..n).map(|_| (-positive_stable(rho, &mut rng)).exp()).sum::<f64>() / n as f64;
            assert!((m - (-1f64).exp()).abs() < 5e-3, "ρ = {rho}: {m}");
        }
    }

    #[test]
    fn isotropic_stable_characteristic_function() {
        // E cos⟨ξ, X_1⟩ = exp(−γ k_d(α)|ξ|^α)
        let alpha = 1.3;
        let q = LevyQuadruple {
            jumps: LevyMeasureSpec::stable(alpha, 0.2),
            ..LevyQuadruple::null(2)
        };
        let s = Stepper::new(&q, 0.1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let xi = [0.7, -0.4];
        let n = 200_000;
        let mut acc = 0.0;
        for _ in 0..n {
            if let StepOutcome::Alive(y) = s.step(&[0.0, 0.0], 1.0, &mut rng).unwrap() {
                acc += dot(&xi, &y).cos();
            }
        }
        let expect = (-0.2 * stable_symbol_constant(2, alpha) * norm(&xi).powf(alpha)).exp();
        assert!((acc / n as f64 - expect).abs() < 5e-3, "{} vs {expect}", acc / n as f64);
    }

    #[test]
    fn compound_poisson_atoms_mean_and_rate() {
        use crate::quadruple::{constant_scalar, Atom};
        let q = LevyQuadruple {
            jumps: LevyMeasureSpec::FiniteAtoms(vec![
                Atom {
                    y: vec![2.0],
                    mass: constant_scalar(0.5),
                },
                Atom {
                    y: vec![-0.5],
                    mass: constant_scalar(1.0),
                },
            ]),
            ..LevyQuadruple::null(1)
        };
        // mean increment over h is h·(∫_{|y|≥1} y ν) = h·(2·0.5) (compensated small part)
        let s = Stepper::new(&q, 0.1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let n = 200_000;
        let mut m = 0.0;
        for _ in 0..n {
            if let StepOutcome::Alive(y) = s.step(&[0.0], 1.0, &mut rng).unwrap() {
                m += y[0];
            }
        }
        let se = ((4.0 * 0.5 + 0.25) / n as f64).sqrt();
        assert!((m / n as f64 - 1.0).abs() < 4.0 * se, "{}", m / n as f64);
    }

    #[test]
    fn killing_rate() {
        use crate::quadruple::constant_scalar;
        let q = LevyQuadruple {
            killing: constant_scalar(2.0),
            ..LevyQuadruple::null(1)
        };
        let s = Stepper::new(&q, 0.1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let n = 100_000;
        let k = (0..n)
            .filter(|_| s.step(&[0.0], 0.5, &mut rng).unwrap() == StepOutcome::Killed)
            .count();
        let p = 1.0 - (-1f64).exp();
        assert!((k as f64 / n as f64 - p).abs() < 4.0 * (p * (1.0 - p) / n as f64).sqrt());
    }

    #[test]
    fn infinite_density_tail_is_a_config_error() {
        use std::sync::Arc;
        let q = LevyQuadruple {
            jumps: LevyMeasureSpec::StateIndependent(Box::new(LevyMeasureSpec::GeneralDensity {
                density: Arc::new(|_: &[f64], y: &[f64]| norm(y).powf(-0.5)),
                tail_exponent: Some(0.5),
                isotropic: true,
            })),
            ..LevyQuadruple::null(1)
        };
        assert!(matches!(Stepper::new(&q, 0.1), Err(LevyError::Config(_))));
    }

    #[test]
    fn brownian_1d_hits_from_two() {
        // P(τ ≤ T) = erfc(1/√(2T)) from distance 1; T = 1000 gives 0.9748
        let mut c = cfg(4000, 0.01, 1000.0);
        c.adaptive_kappa = Some(0.2);
        let s = estimate_hitting(&brownian(1), &[2.0], 1.0, None, &c).unwrap();
        let h = s.hitting.unwrap();
        let oracle = erfc(1.0 / (2.0f64 * 1000.0).sqrt());
        assert!(
            (h.hit_prob.value - oracle).abs() < 3.0 * h.hit_prob.se.max(1e-3),
            "{:?}",
            h.hit_prob
        );
        assert!(h.mean_hit_time_censored);
    }

    #[test]
    fn exit_moment_matches_secant() {
        let c = cfg(20_000, 1e-3, 20.0);
        let s = estimate_hitting(&brownian(1), &[0.0], 1.0, Some(0.01), &c).unwrap();
        let h = s.hitting.unwrap();
        assert_eq!(h.mode, HitMode::Exit);
        let e = h.exp_moment.unwrap().estimate;
        let oracle = 1.0 / (0.02f64.sqrt()).cos();
        assert!((e.value - oracle).abs() < 3.0 * e.se + 1e-4, "{e:?} vs {oracle}");
        assert!((h.mean_hit_time.value - 1.0).abs() < 0.03);
    }

    #[test]
    fn return_fraction_follows_arcsine_law() {
        // P(BM visits 0 during [T/2, T]) = 1 − (2/π) arcsin √½ = ½
        let r = return_diagnostic(&brownian(1), &[0.0], &cfg(3000, 0.01, 100.0)).unwrap();
        assert!(!r.certifying);
        assert!(r.fraction.value > 0.45 && r.fraction.value < 0.62, "{:?}", r.fraction);
        let r3 = return_diagnostic(&brownian(3), &[0.0, 0.0, 0.0], &cfg(500, 0.01, 100.0)).unwrap();
        assert!(r3.fraction.value < 0.2);
        let drift = LevyQuadruple {
            drift: constant_vector(vec![1.0]),
            ..LevyQuadruple::null(1)
        };
        let r0 = return_diagnostic(&drift, &[0.0], &cfg(10, 0.01, 10.0)).unwrap();
        assert_eq!(r0.fraction.value, 0.0);
    }

    fn ou1() -> LevyQuadruple {
        LevyQuadruple {
            drift: std::sync::Arc::new(|x: &[f64]| vec![-x[0]]),
            diffusion: constant_matrix(vec![1.0]),
            ..LevyQuadruple::null(1)
        }
    }

    #[test]
    fn ou_tv_rate() {
        let times: Vec<f64> = (1..=24).map(|k| 0.25 * k as f64).collect();
        let s = tv_decay(&ou1(), &[-3.0], &[3.0], &times, 40, &cfg(40_000, 0.01, 6.0)).unwrap();
        let e = s.exponential_fit.clone().unwrap();
        assert!(e.rate > 0.7 && e.rate < 1.3, "{e:?}");
        // closed form 2Φ(3e^{-t}/σ_t) − 1 at t = 1
        let p = &s.tv_curve[3];
        let sigma = ((1.0 - (-2.0f64).exp()) / 2.0).sqrt();
        let z = 3.0 * (-1.0f64).exp() / sigma;
        let exact = 1.0 - erfc(z / 2f64.sqrt());
        assert!((p.estimate - exact).abs() < 0.03, "{} vs {exact}", p.estimate);
    }

    #[test]
    fn identical_starts_sit_at_the_noise_floor() {
        let times = [0.5, 1.0, 2.0];
        let s = tv_decay(&ou1(), &[1.0], &[1.0], &times, 20, &cfg(20_000, 0.05, 2.0)).unwrap();
        let floor = s.tv_noise_floor.unwrap();
        for p in &s.tv_curve {
            assert!(p.estimate < 3.0 * floor, "{} vs floor {floor}", p.estimate);
        }
        assert!(matches!(s.fitted_rate, Some(FittedRate::None { .. })));
    }

    #[test]
    fn brownian_tv_is_polynomial() {
        let times: Vec<f64> = (0..12).map(|k| 16.0 * 1.3f64.powi(k)).collect();
        let s = tv_decay(&brownian(1), &[-1.0], &[1.0], &times, 30, &cfg(100_000, 8.0, 8.0)).unwrap();
        let p = s.polynomial_fit.clone().unwrap();
        assert!((p.rate - 0.5).abs() < 0.1, "{p:?}");
        assert!(p.rate_ci[0] - 0.05 < 0.5 && p.rate_ci[1] + 0.05 > 0.5, "{p:?}");
    }

    #[test]
    fn tv_rejects_three_dimensions() {
        let e = tv_decay(
            &brownian(3),
            &[0.0; 3],
            &[1.0, 0.0, 0.0],
            &[1.0],
            10,
            &cfg(10, 0.1, 1.0),
        );
        assert_eq!(e.unwrap_err(), LevyError::UnsupportedDimension(3, 2));
    }

    #[test]
    fn reproducible_given_seed_and_streams() {
        let c = cfg(500, 0.05, 5.0);
        let a = estimate_hitting(&brownian(2), &[2.0, 0.0], 1.0, Some(0.1), &c).unwrap();
        let b = estimate_hitting(&brownian(2), &[2.0, 0.0], 1.0, Some(0.1), &c).unwrap();
        assert_eq!(a, b);
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let single = pool.install(|| estimate_hitting(&brownian(2), &[2.0, 0.0], 1.0, Some(0.1), &c).unwrap());
        assert_eq!(a, single);
    }

    #[test]
    fn generator_consistency_brownian_and_stable() {
        use crate::testfn::{build_extension, CriterionParams, TestKind};
        let f = build_extension(TestKind::W, &CriterionParams::new(0.5, 2.0)).unwrap();
        let c = cfg(100_000, 0.01, 0.01);
        let g = generator_consistency(&brownian(2), &f, &[2.5, 0.5], 0.01, &c).unwrap();
        assert!(g.passed, "{g:?}");
        let q = LevyQuadruple {
            jumps: LevyMeasureSpec::stable(1.5, 1.0),
            ..LevyQuadruple::null(1)
        };
        let g = generator_consistency(&q, &f, &[3.0], 0.01, &c).unwrap();
        assert!(g.passed, "{g:?}");
    }

    #[test]
    fn csv_layout() {
        let s = curve_to_csv(&[CurvePoint {
            t: 1.0,
            estimate: 0.5,
            se: 0.01,
            n_effective: 10,
        }]);
        assert_eq!(s, "t,estimate,se,n_effective\n1,0.5,0.01,10\n");
    }
}

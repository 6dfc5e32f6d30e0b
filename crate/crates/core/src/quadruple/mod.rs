//! Lévy quadruples `(a, b, c, ν)` and the integrals of the jump kernel that
//! every drift criterion is built from.

mod measure;

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{LevyError, Result};
use crate::extended::Extended;
use crate::geometry::{dot, min_sym_eigenvalue, norm, sphere_area};
use crate::quadrature::Tolerance;

pub use measure::{Axial, FrozenKernel, Integral, DEFAULT_TAIL_RADIUS};

pub type ScalarField = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
pub type VectorField = Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;
/// Row-major `d×d` matrix field.
pub type MatrixField = Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;
/// `(x, y) ↦ density of ν(x, dy)` at `y`.
pub type DensityField = Arc<dyn Fn(&[f64], &[f64]) -> f64 + Send + Sync>;

pub fn constant_scalar(v: f64) -> ScalarField {
    Arc::new(move |_| v)
}

pub fn constant_vector(v: Vec<f64>) -> VectorField {
    Arc::new(move |_| v.clone())
}

pub fn constant_matrix(m: Vec<f64>) -> MatrixField {
    Arc::new(move |_| m.clone())
}

/// `σ² I` in dimension `d`.
pub fn scaled_identity(d: usize, sigma2: f64) -> Vec<f64> {
    let mut m = vec![0.0; d * d];
    for i in 0..d {
        m[i * d + i] = sigma2;
    }
    m
}

#[derive(Clone)]
pub struct Atom {
    pub y: Vec<f64>,
    pub mass: ScalarField,
}

/// Representation of the jump kernel `ν(x, dy)`.
#[derive(Clone)]
pub enum LevyMeasureSpec {
    /// `γ(x) |y|^{-d-α(x)} dy`
    StableLike { alpha: ScalarField, gamma: ScalarField },
    /// `density(x, y) dy`. `tail_exponent` is a `κ` with density `≲ |y|^{-κ}`
    /// at infinity; `isotropic` declares that the density depends on `y`
    /// only through `|y|`.
    GeneralDensity {
        density: DensityField,
        tail_exponent: Option<f64>,
        isotropic: bool,
    },
    /// `Σ m_j(x) δ_{y_j}`
    FiniteAtoms(Vec<Atom>),
    /// The inner kernel, evaluated once at the origin and used everywhere.
    StateIndependent(Box<LevyMeasureSpec>),
}

impl LevyMeasureSpec {
    pub fn zero() -> Self {
        LevyMeasureSpec::FiniteAtoms(Vec::new())
    }

    pub fn stable(alpha: f64, gamma: f64) -> Self {
        LevyMeasureSpec::StateIndependent(Box::new(LevyMeasureSpec::StableLike {
            alpha: constant_scalar(alpha),
            gamma: constant_scalar(gamma),
        }))
    }

    pub fn is_state_independent(&self) -> bool {
        match self {
            LevyMeasureSpec::StateIndependent(_) => true,
            LevyMeasureSpec::FiniteAtoms(a) => a.is_empty(),
            _ => false,
        }
    }

    /// `ν(x, ·)` as a concrete kernel.
    pub fn freeze(&self, x: &[f64]) -> Result<FrozenKernel> {
        let dim = x.len();
        match self {
            LevyMeasureSpec::StateIndependent(inner) => inner.freeze(&vec![0.0; dim]),
            LevyMeasureSpec::StableLike { alpha, gamma } => {
                let a = alpha(x);
                let g = gamma(x);
                if !(a > 0.0 && a < 2.0) {
                    return Err(LevyError::Domain(format!("stable index α(x) = {a} outside (0, 2)")));
                }
                if !(g > 0.0 && g.is_finite()) {
                    return Err(LevyError::Domain(format!("stable intensity γ(x) = {g} not positive")));
                }
                Ok(FrozenKernel::Stable {
                    dim,
                    alpha: a,
                    gamma: g,
                })
            }
            LevyMeasureSpec::GeneralDensity {
                density,
                tail_exponent,
                isotropic,
            } => Ok(FrozenKernel::Density {
                dim,
                density: density.clone(),
                at: x.to_vec(),
                tail_exponent: *tail_exponent,
                isotropic: *isotropic,
            }),
            LevyMeasureSpec::FiniteAtoms(atoms) => {
                let mut out = Vec::with_capacity(atoms.len());
                for at in atoms {
                    if at.y.len() != dim {
                        return Err(LevyError::Domain(format!(
                            "atom of dimension {} in a {dim}-dimensional kernel",
                            at.y.len()
                        )));
                    }
                    if norm(&at.y) == 0.0 {
                        return Err(LevyError::Domain("atom at the origin".into()));
                    }
                    let m = (at.mass)(x);
                    if !(m >= 0.0 && m.is_finite()) {
                        return Err(LevyError::Evaluation(format!("atom mass {m} at {x:?}")));
                    }
                    out.push((at.y.clone(), m));
                }
                Ok(FrozenKernel::Atoms { dim, atoms: out })
            }
        }
    }
}

/// Declared behaviour of the coefficients beyond the scanned radii.
///
/// Degrees are homogeneity exponents: `b(λx) = λ^{drift_degree} b(x)` and
/// `c(λx) = λ^{diffusion_degree} c(x)` for `λ ≥ 1` and `|x|` at the end of the
/// scan window. With this declaration drift conditions can be certified on
/// the whole tail rather than only on the scanned radii.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailHint {
    pub drift_degree: f64,
    pub diffusion_degree: f64,
    pub killing_vanishes: bool,
    pub jumps_state_independent: bool,
}

/// Coefficients of a Lévy-type generator.
#[derive(Clone)]
pub struct LevyQuadruple {
    pub dim: usize,
    pub killing: ScalarField,
    pub drift: VectorField,
    pub diffusion: MatrixField,
    pub jumps: LevyMeasureSpec,
    pub asserts_open_set_irreducible: bool,
    pub asserts_skeleton_chain: bool,
    pub tail_hint: Option<TailHint>,
    pub label: String,
}

impl fmt::Debug for LevyQuadruple {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("LevyQuadruple")
            .field("label", &self.label)
            .field("dim", &self.dim)
            .field("tail_hint", &self.tail_hint)
            .finish_non_exhaustive()
    }
}

impl LevyQuadruple {
    /// Zero killing, zero drift, zero diffusion, no jumps.
    pub fn null(dim: usize) -> Self {
        LevyQuadruple {
            dim,
            killing: constant_scalar(0.0),
            drift: constant_vector(vec![0.0; dim]),
            diffusion: constant_matrix(vec![0.0; dim * dim]),
            jumps: LevyMeasureSpec::zero(),
            asserts_open_set_irreducible: false,
            asserts_skeleton_chain: false,
            tail_hint: None,
            label: String::new(),
        }
    }

    fn check_point(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim {
            return Err(LevyError::Domain(format!(
                "state of dimension {} for a {}-dimensional quadruple",
                x.len(),
                self.dim
            )));
        }
        Ok(())
    }

    pub fn a(&self, x: &[f64]) -> Result<f64> {
        self.check_point(x)?;
        let v = (self.killing)(x);
        if !v.is_finite() {
            return Err(LevyError::Evaluation(format!("killing rate {v} at {x:?}")));
        }
        Ok(v)
    }

    pub fn b(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_point(x)?;
        let v = (self.drift)(x);
        if v.len() != self.dim || v.iter().any(|c| !c.is_finite()) {
            return Err(LevyError::Evaluation(format!("drift {v:?} at {x:?}")));
        }
        Ok(v)
    }

    pub fn c(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_point(x)?;
        let v = (self.diffusion)(x);
        if v.len() != self.dim * self.dim || v.iter().any(|c| !c.is_finite()) {
            return Err(LevyError::Evaluation(format!("diffusion matrix {v:?} at {x:?}")));
        }
        Ok(v)
    }

    pub fn kernel(&self, x: &[f64]) -> Result<FrozenKernel> {
        self.check_point(x)?;
        self.jumps.freeze(x)
    }

    /// The constant-coefficient quadruple with all coefficients taken at `x`.
    pub fn frozen_at(&self, x: &[f64]) -> Result<LevyQuadruple> {
        let a = self.a(x)?;
        let b = self.b(x)?;
        let c = self.c(x)?;
        let jumps = match self.kernel(x)? {
            FrozenKernel::Stable { alpha, gamma, .. } => LevyMeasureSpec::stable(alpha, gamma),
            FrozenKernel::Density {
                density,
                at,
                tail_exponent,
                isotropic,
                ..
            } => LevyMeasureSpec::StateIndependent(Box::new(LevyMeasureSpec::GeneralDensity {
                density: Arc::new(move |_: &[f64], y: &[f64]| density(&at, y)),
                tail_exponent,
                isotropic,
            })),
            FrozenKernel::Atoms { atoms, .. } => LevyMeasureSpec::FiniteAtoms(
                atoms
                    .into_iter()
                    .map(|(y, m)| Atom {
                        y,
                        mass: constant_scalar(m),
                    })
                    .collect(),
            ),
        };
        Ok(LevyQuadruple {
            dim: self.dim,
            killing: constant_scalar(a),
            drift: constant_vector(b),
            diffusion: constant_matrix(c),
            jumps,
            asserts_open_set_irreducible: self.asserts_open_set_irreducible,
            asserts_skeleton_chain: self.asserts_skeleton_chain,
            tail_hint: Some(TailHint {
                drift_degree: 0.0,
                diffusion_degree: 0.0,
                killing_vanishes: a == 0.0,
                jumps_state_independent: true,
            }),
            label: format!("{} frozen at {x:?}", self.label),
        })
    }
}

/// The scalar functionals `A`, `B`, `C` at a state `x ≠ 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[allow(non_snake_case)]
pub struct DriftFunctionals {
    pub A: f64,
    pub B: f64,
    pub C: f64,
}

/// `A = ½|x|⁻² tr c(x)`, `B = |x|⁻² ⟨x, b(x)⟩`, `C = |x|⁻⁴ ⟨x, c(x) x⟩`.
pub fn abc_functionals(q: &LevyQuadruple, x: &[f64]) -> Result<DriftFunctionals> {
    q.check_point(x)?;
    let r2 = dot(x, x);
    if r2 == 0.0 {
        return Err(LevyError::Domain("A, B, C are undefined at the origin".into()));
    }
    let d = q.dim;
    let c = q.c(x)?;
    let b = q.b(x)?;
    let tr: f64 = (0..d).map(|i| c[i * d + i]).sum();
    let mut quad = 0.0;
    for i in 0..d {
        for j in 0..d {
            quad += x[i] * c[i * d + j] * x[j];
        }
    }
    Ok(DriftFunctionals {
        A: 0.5 * tr / r2,
        B: dot(x, &b) / r2,
        C: quad / (r2 * r2),
    })
}

/// `∫_{|y|<1} |y|² ν(x, dy)`.
pub fn integrate_small_jumps(q: &LevyQuadruple, x: &[f64]) -> Result<f64> {
    let k = q.kernel(x)?;
    small_jump_moment(&k)
}

pub fn small_jump_moment(k: &FrozenKernel) -> Result<f64> {
    if let FrozenKernel::Stable { dim, alpha, gamma } = k {
        return Ok(gamma * sphere_area(*dim) / (2.0 - alpha));
    }
    let v = k.integrate_radial(0.0, 1.0, 2.0, &|r| r * r, Tolerance::new(1e-14, 1e-10))?;
    v.value
        .finite()
        .ok_or_else(|| LevyError::Integrability("∫_{|y|<1} |y|² ν(dy) diverges".into()))
}

/// Order of a tail moment `∫_{|y|≥1} f(|y|) ν(dy)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TailMoment {
    /// `f(r) = r^p`
    Power(f64),
    /// `f(r) = ln(1 + r)`
    Log,
}

/// `∫_{|y|≥1} |y|^p ν(x, dy)` or `∫_{|y|≥1} ln(1+|y|) ν(x, dy)`; divergence is
/// returned as the `+∞` marker.
pub fn integrate_tail_mass(q: &LevyQuadruple, x: &[f64], p: TailMoment) -> Result<Extended> {
    let k = q.kernel(x)?;
    tail_moment(&k, p).map(|i| i.value)
}

pub fn tail_moment(k: &FrozenKernel, p: TailMoment) -> Result<Integral> {
    if let TailMoment::Power(p) = p {
        if p < 0.0 {
            return Err(LevyError::Domain(format!("negative moment order {p}")));
        }
    }
    if let FrozenKernel::Stable { dim, alpha, gamma } = k {
        let value = match p {
            TailMoment::Power(p) if p >= *alpha => Extended::PosInfinity,
            TailMoment::Power(p) => Extended::Finite(gamma * sphere_area(*dim) / (alpha - p)),
            // ∫_1^∞ ln(1+r) r^{-1-α} dr, by quadrature
            TailMoment::Log => {
                return k.integrate_radial(1.0, f64::INFINITY, 0.01, &|r| r.ln_1p(), Tolerance::new(1e-14, 1e-11))
            }
        };
        return Ok(Integral {
            value,
            error: 0.0,
            warnings: vec![],
        });
    }
    match p {
        TailMoment::Power(p) => k.integrate_radial(1.0, f64::INFINITY, p, &|r| r.powf(p), Tolerance::new(1e-14, 1e-10)),
        TailMoment::Log => k.integrate_radial(1.0, f64::INFINITY, 0.0, &|r| r.ln_1p(), Tolerance::new(1e-14, 1e-10)),
    }
}

/// Outcome of [`validate`]. Violations are collected, not thrown.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ValidationReport {
    pub probes: usize,
    pub sup_killing: f64,
    pub sup_drift_norm: f64,
    pub sup_diffusion_norm: f64,
    /// `sup_x ∫ (1 ∧ |y|²) ν(x, dy)`
    pub sup_levy_mass: Extended,
    pub violations: Vec<String>,
    pub inconsistencies: Vec<String>,
    pub warnings: Vec<String>,
}

impl ValidationReport {
    pub fn ok(&self) -> bool {
        self.violations.is_empty() && self.inconsistencies.is_empty()
    }
}

/// Checks the structural invariants of `q` at every probe point.
pub fn validate(q: &LevyQuadruple, probe_points: &[Vec<f64>]) -> Result<ValidationReport> {
    if probe_points.is_empty() {
        return Err(LevyError::Config("validation needs at least one probe point".into()));
    }
    let d = q.dim;
    let mut rep = ValidationReport {
        probes: probe_points.len(),
        sup_killing: 0.0,
        sup_drift_norm: 0.0,
        sup_diffusion_norm: 0.0,
        sup_levy_mass: Extended::ZERO,
        violations: vec![],
        inconsistencies: vec![],
        warnings: vec![],
    };
    let mut killing_seen = false;
    for x in probe_points {
        let mut note = |msg: String| rep.violations.push(format!("at {x:?}: {msg}"));
        match q.a(x) {
            Ok(a) => {
                if a < 0.0 {
                    note(format!("killing rate a = {a} is negative"));
                }
                if a != 0.0 {
                    killing_seen = true;
                }
                rep.sup_killing = rep.sup_killing.max(a.abs());
            }
            Err(e) => note(e.to_string()),
        }
        match q.b(x) {
            Ok(b) => rep.sup_drift_norm = rep.sup_drift_norm.max(norm(&b)),
            Err(e) => note(e.to_string()),
        }
        match q.c(x) {
            Ok(c) => {
                let mut asym: f64 = 0.0;
                for i in 0..d {
                    for j in 0..d {
                        asym = asym.max((c[i * d + j] - c[j * d + i]).abs());
                    }
                }
                if asym > 1e-12 {
                    note(format!("diffusion matrix not symmetric (max |c_ij − c_ji| = {asym:e})"));
                }
                let lmin = min_sym_eigenvalue(&c, d);
                if lmin < -1e-10 {
                    note(format!(
                        "diffusion matrix not nonnegative definite (smallest eigenvalue {lmin})"
                    ));
                }
                let fro = c.iter().map(|v| v * v).sum::<f64>().sqrt();
                rep.sup_diffusion_norm = rep.sup_diffusion_norm.max(fro);
            }
            Err(e) => note(e.to_string()),
        }
        let mass = q.kernel(x).and_then(|k| {
            let small = small_jump_moment(&k)?;
            let tail = tail_moment(&k, TailMoment::Power(0.0))?;
            Ok((small, tail))
        });
        match mass {
            Ok((small, tail)) => {
                for w in &tail.warnings {
                    if !rep.warnings.contains(w) {
                        rep.warnings.push(w.clone());
                    }
                }
                let total = tail.value + small;
                if !total.is_finite() {
                    note("∫(1 ∧ |y|²) ν(dy) diverges".into());
                }
                if total.to_f64() > rep.sup_levy_mass.to_f64() {
                    rep.sup_levy_mass = total;
                }
            }
            Err(e) => note(e.to_string()),
        }
    }
    if killing_seen && q.asserts_open_set_irreducible {
        rep.inconsistencies.push(
            "nonzero killing rate together with asserted open-set irreducibility: an open-set \
             irreducible conservative-on-compacts process must have a ≡ 0"
                .into(),
        );
    }
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn brownian(d: usize) -> LevyQuadruple {
        LevyQuadruple {
            diffusion: constant_matrix(scaled_identity(d, 1.0)),
            ..LevyQuadruple::null(d)
        }
    }

    #[test]
    fn functionals_for_brownian_motion() {
        let f = abc_functionals(&brownian(3), &[10.0, 0.0, 0.0]).unwrap();
        assert!((f.A - 0.015).abs() < 1e-15);
        assert_eq!(f.B, 0.0);
        assert!((f.C - 0.01).abs() < 1e-15);
    }

    #[test]
    fn functionals_for_scalar_ou() {
        let q = LevyQuadruple {
            drift: Arc::new(|x: &[f64]| vec![-x[0]]),
            diffusion: constant_matrix(vec![2.0]),
            ..LevyQuadruple::null(1)
        };
        let f = abc_functionals(&q, &[5.0]).unwrap();
        assert!((f.A - 0.04).abs() < 1e-15);
        assert!((f.B + 1.0).abs() < 1e-15);
        assert!((f.C - 0.08).abs() < 1e-15);
    }

    #[test]
    fn zero_coefficients_give_zero_functionals() {
        let f = abc_functionals(&LevyQuadruple::null(2), &[0.3, -4.0]).unwrap();
        assert_eq!((f.A, f.B, f.C), (0.0, 0.0, 0.0));
        assert!(matches!(
            abc_functionals(&LevyQuadruple::null(2), &[0.0, 0.0]),
            Err(LevyError::Domain(_))
        ));
    }

    #[test]
    fn stable_moments() {
        let q = LevyQuadruple {
            jumps: LevyMeasureSpec::stable(1.0, 1.0),
            ..LevyQuadruple::null(1)
        };
        assert!((integrate_small_jumps(&q, &[0.4]).unwrap() - 2.0).abs() < 1e-15);
        assert_eq!(
            integrate_tail_mass(&q, &[0.4], TailMoment::Power(0.0)).unwrap(),
            Extended::Finite(2.0)
        );
        assert_eq!(
            integrate_tail_mass(&q, &[0.4], TailMoment::Power(1.5)).unwrap(),
            Extended::PosInfinity
        );
    }

    #[test]
    fn atom_moments() {
        let atoms = |y: Vec<f64>, m: f64| {
            LevyMeasureSpec::FiniteAtoms(vec![Atom {
                y,
                mass: constant_scalar(m),
            }])
        };
        let q = LevyQuadruple {
            jumps: atoms(vec![2.0, 0.0], 1.0),
            ..LevyQuadruple::null(2)
        };
        assert_eq!(integrate_small_jumps(&q, &[1.0, 1.0]).unwrap(), 0.0);
        assert_eq!(
            integrate_tail_mass(&q, &[1.0, 1.0], TailMoment::Power(2.0)).unwrap(),
            Extended::Finite(4.0)
        );
        let q = LevyQuadruple {
            jumps: atoms(vec![0.5, 0.0], 3.0),
            ..LevyQuadruple::null(2)
        };
        assert!((integrate_small_jumps(&q, &[1.0, 1.0]).unwrap() - 0.75).abs() < 1e-15);
    }

    #[test]
    fn density_small_jumps_use_singularity_removal() {
        // |y|^{-1-α} in d = 1 as a general density reproduces the stable value
        for alpha in [0.3, 1.0, 1.8] {
            let q = LevyQuadruple {
                jumps: LevyMeasureSpec::GeneralDensity {
                    density: Arc::new(move |_x: &[f64], y: &[f64]| y[0].abs().powf(-1.0 - alpha)),
                    tail_exponent: Some(1.0 + alpha),
                    isotropic: true,
                },
                ..LevyQuadruple::null(1)
            };
            let v = integrate_small_jumps(&q, &[0.0]).unwrap();
            let exact = 2.0 / (2.0 - alpha);
            assert!((v - exact).abs() < 1e-8 * exact, "α={alpha}: {v}");
        }
    }

    #[test]
    fn nonintegrable_density_is_an_error() {
        let q = LevyQuadruple {
            jumps: LevyMeasureSpec::GeneralDensity {
                density: Arc::new(|_x: &[f64], y: &[f64]| y[0].abs().powf(-3.5)),
                tail_exponent: Some(3.5),
                isotropic: true,
            },
            ..LevyQuadruple::null(1)
        };
        assert!(matches!(
            integrate_small_jumps(&q, &[0.0]),
            Err(LevyError::Integrability(_))
        ));
    }

    #[test]
    fn validation_flags() {
        let probes: Vec<Vec<f64>> = (0..8)
            .map(|k| {
                let t = k as f64;
                vec![t.cos(), t.sin()]
            })
            .collect();
        let rep = validate(&brownian(2), &probes).unwrap();
        assert!(rep.ok(), "{rep:?}");
        assert_eq!(rep.sup_killing, 0.0);

        let killed = LevyQuadruple {
            killing: constant_scalar(1.0),
            asserts_open_set_irreducible: true,
            ..brownian(2)
        };
        let rep = validate(&killed, &probes).unwrap();
        assert_eq!(rep.inconsistencies.len(), 1);
        assert!(rep.violations.is_empty());

        let bad = LevyQuadruple {
            diffusion: constant_matrix(vec![1.0, 0.0, 0.0, -0.1]),
            ..LevyQuadruple::null(2)
        };
        let rep = validate(&bad, &probes).unwrap();
        assert!(rep.violations.iter().all(|v| v.contains("nonnegative definite")));
        assert_eq!(rep.violations.len(), probes.len());
    }
}

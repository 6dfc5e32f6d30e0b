//! The symbol `q(x, ξ)` of a Lévy-type generator, a sampled
//! conservativeness test, and the exponential exit-time moment bound.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma;

use crate::error::{LevyError, Result};
use crate::extended::Extended;
use crate::geometry::{ball_points, dot, norm, scaled, scan_directions};
use crate::quadrature::Tolerance;
use crate::quadruple::{Axial, FrozenKernel, LevyQuadruple};

/// `q(x, ξ) = re + i·im`; `re = +∞` marks an unbounded symbol.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SymbolValue {
    pub re: Extended,
    pub im: f64,
}

impl SymbolValue {
    pub fn modulus(&self) -> Extended {
        match self.re {
            Extended::Finite(r) => Extended::Finite(r.hypot(self.im)),
            Extended::PosInfinity => Extended::PosInfinity,
        }
    }
}

/// `k_d(α)` with `∫ (1 − cos⟨ξ, y⟩) |y|^{-d-α} dy = k_d(α) |ξ|^α`.
pub fn stable_symbol_constant(d: usize, alpha: f64) -> f64 {
    let h = d as f64 / 2.0;
    PI.powf(h) * gamma(1.0 - alpha / 2.0) / (2f64.powf(alpha) * (alpha / 2.0) * gamma(h + alpha / 2.0))
}

/// Periods of `cos⟨ξ, y⟩` resolved by quadrature before the far field is
/// replaced by its mean.
const OSCILLATION_PERIODS: f64 = 64.0;

fn symbol_tol() -> Tolerance {
    Tolerance::new(1e-14, 1e-10)
}

/// Jump part `∫ (1 − cos⟨ξ,y⟩) ν` and `−∫ (sin⟨ξ,y⟩ − ⟨ξ,y⟩1_{|y|<1}) ν`.
pub(crate) fn jump_symbol(k: &FrozenKernel, xi: &[f64]) -> Result<(Extended, f64)> {
    let m = norm(xi);
    if m == 0.0 || k.is_zero() {
        return Ok((Extended::ZERO, 0.0));
    }
    if let FrozenKernel::Stable { dim, alpha, gamma } = k {
        return Ok((
            Extended::Finite(gamma * stable_symbol_constant(*dim, *alpha) * m.powf(*alpha)),
            0.0,
        ));
    }
    let axis = scaled(xi, 1.0 / m);
    let geo = Axial {
        axis: &axis,
        shift: 0.0,
        levels: &[],
    };
    // Beyond a whole number of periods the oscillating parts average out:
    // 1 − cos contributes the plain mass and sin contributes nothing.
    let cutoff = (2.0 * PI * OSCILLATION_PERIODS / m).max(1.0);
    let tol = Tolerance {
        max_intervals: 4000,
        ..symbol_tol()
    };
    let re_fn = |r: f64, t: f64| {
        let s = (0.5 * m * r * t).sin();
        2.0 * s * s
    };
    let near = k.integrate_axial(0.0, cutoff, 0.0, &geo, &re_fn, tol)?;
    let far = k.mass(cutoff, f64::INFINITY)?;
    let re = near.value + far;
    if k.is_symmetric() {
        return Ok((re, 0.0));
    }
    let im_fn = |r: f64, t: f64| {
        let u = m * r * t;
        if r < 1.0 {
            if u.abs() < 1e-3 {
                // sin u − u by its series
                let u2 = u * u;
                -u * u2 / 6.0 * (1.0 - u2 / 20.0 * (1.0 - u2 / 42.0))
            } else {
                u.sin() - u
            }
        } else {
            u.sin()
        }
    };
    let im = k.integrate_axial(0.0, cutoff, 0.0, &geo, &im_fn, tol)?;
    Ok((re, -im.value.to_f64()))
}

/// `q(x, ξ) = a − i⟨ξ, b⟩ + ½⟨ξ, cξ⟩ − ∫ (e^{i⟨ξ,y⟩} − 1 − i⟨ξ,y⟩1_{|y|<1}) ν(x, dy)`.
pub fn eval_symbol(q: &LevyQuadruple, x: &[f64], xi: &[f64]) -> Result<SymbolValue> {
    let d = q.dim;
    if xi.len() != d {
        return Err(LevyError::Domain(format!(
            "frequency of dimension {} in dimension {d}",
            xi.len()
        )));
    }
    let a = q.a(x)?;
    let b = q.b(x)?;
    let c = q.c(x)?;
    let mut quad = 0.0;
    for i in 0..d {
        for j in 0..d {
            quad += xi[i] * c[i * d + j] * xi[j];
        }
    }
    let k = q.kernel(x)?;
    let (jre, jim) = jump_symbol(&k, xi)?;
    let mut im = -dot(xi, &b) + jim;
    if im.abs() < 1e-14 {
        im = 0.0;
    }
    Ok(SymbolValue {
        re: jre + (a + 0.5 * quad),
        im,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ConservativenessVerdict {
    EvidenceOfConservativeness,
    Inconclusive,
}

/// Sampled `sup_{|y−x| ≤ 2k} sup_{|η| ≤ 1/k} |q(y, η)|` over a grid of `k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConservativenessReport {
    pub k_grid: Vec<f64>,
    pub sups: Vec<Extended>,
    pub verdict: ConservativenessVerdict,
    /// Set when a nonzero killing rate was seen: the process then cannot be
    /// both open-set irreducible and conservative.
    pub killing_flag: bool,
    pub notes: Vec<String>,
}

/// Number of sampled states per ball and of frequency directions.
const CONS_STATES: usize = 48;
const CONS_DIRECTIONS: usize = 16;

pub fn conservativeness_check(q: &LevyQuadruple, x: &[f64], k_grid: &[f64]) -> Result<ConservativenessReport> {
    if k_grid.is_empty() {
        return Err(LevyError::Config("k_grid must be nonempty".into()));
    }
    if k_grid.windows(2).any(|w| w[1] <= w[0]) || k_grid[0] <= 0.0 {
        return Err(LevyError::Config("k_grid must be positive and increasing".into()));
    }
    let d = q.dim;
    let dirs = scan_directions(d, CONS_DIRECTIONS);
    let mut sups = Vec::with_capacity(k_grid.len());
    let mut killing = false;
    for &k in k_grid {
        let states = ball_points(x, 2.0 * k, CONS_STATES);
        let mut freqs = Vec::new();
        for u in &dirs {
            for frac in [0.25, 0.5, 0.75, 1.0] {
                freqs.push(scaled(u, frac / k));
            }
        }
        let per_state: Vec<(Extended, bool)> = states
            .par_iter()
            .map(|y| -> Result<(Extended, bool)> {
                let kill = q.a(y)? != 0.0;
                let mut best = Extended::ZERO;
                for xi in &freqs {
                    let v = eval_symbol(q, y, xi)?.modulus();
                    if v.to_f64() > best.to_f64() {
                        best = v;
                    }
                }
                Ok((best, kill))
            })
            .collect::<Result<_>>()?;
        let mut sup = Extended::ZERO;
        for (v, kill) in per_state {
            killing |= kill;
            if v.to_f64() > sup.to_f64() {
                sup = v;
            }
        }
        sups.push(sup);
    }
    let first = sups[0].to_f64();
    let last = sups[sups.len() - 1].to_f64();
    let decreasing = sups.windows(2).all(|w| w[1].to_f64() <= w[0].to_f64());
    let verdict = if sups.len() >= 2 && decreasing && last.is_finite() && last <= 1e-2 * first {
        ConservativenessVerdict::EvidenceOfConservativeness
    } else {
        ConservativenessVerdict::Inconclusive
    };
    let mut notes = vec!["sampled sups are lower bounds; the verdict is evidence, not proof".to_string()];
    if killing {
        notes.push("nonzero killing rate: an open-set irreducible process with killing is not conservative".into());
    }
    Ok(ConservativenessReport {
        k_grid: k_grid.to_vec(),
        sups,
        verdict,
        killing_flag: killing,
        notes,
    })
}

/// `E^x[e^{λτ}] ≤ c*/(c* − λ)` for the exit time `τ` of `B(x, R)`,
/// valid for `0 < λ < c*`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExitMomentBound {
    #[serde(rename = "R")]
    pub radius: f64,
    pub z_star: Vec<f64>,
    pub c_star: f64,
    pub lambda_max: f64,
    pub note: String,
}

impl ExitMomentBound {
    pub fn bound(&self, lambda: f64) -> Option<f64> {
        (lambda > 0.0 && lambda < self.c_star).then(|| self.c_star / (self.c_star - lambda))
    }
}

const EXIT_STATES: usize = 64;
const EXIT_MAGNITUDES: [f64; 5] = [0.5, 0.375, 0.25, 0.125, 0.0625];

/// Sampled `inf_{|y−x| ≤ R} Re q(y, ξ)` with local refinement, and the sampled
/// `sup_{|y−x| ≤ R} Re q / (|ξ| Im q)`.
fn inf_re_and_ratio(q: &LevyQuadruple, x: &[f64], radius: f64, xi: &[f64]) -> Result<(f64, f64)> {
    let states = ball_points(x, radius, EXIT_STATES);
    let eval = |y: &Vec<f64>| -> Result<(f64, f64, Vec<f64>)> {
        let s = eval_symbol(q, y, xi)?;
        let re = s.re.to_f64();
        let ratio = if s.im == 0.0 {
            f64::INFINITY
        } else {
            re / (norm(xi) * s.im)
        };
        Ok((re, ratio, y.clone()))
    };
    let mut vals: Vec<(f64, f64, Vec<f64>)> = states.par_iter().map(eval).collect::<Result<_>>()?;
    vals.sort_by(|a, b| a.0.total_cmp(&b.0));
    let spacing = radius / (EXIT_STATES as f64).powf(1.0 / q.dim as f64);
    let local: Vec<Vec<f64>> = vals
        .iter()
        .take(4)
        .flat_map(|(_, _, c)| {
            ball_points(c, spacing, 9)
                .into_iter()
                .skip(1)
                .filter(|p| norm(&crate::geometry::sub(p, x)) <= radius)
        })
        .collect();
    let more: Vec<(f64, f64, Vec<f64>)> = local.par_iter().map(eval).collect::<Result<_>>()?;
    vals.extend(more);
    let inf = vals.iter().map(|v| v.0).fold(f64::INFINITY, f64::min);
    let ratio = vals.iter().map(|v| v.1).fold(f64::NEG_INFINITY, f64::max);
    Ok((inf, ratio))
}

/// Searches `z` with `0 < |z| ≤ 1/2` satisfying both positivity and ratio
/// conditions at `ξ = z/R`, maximising the sampled infimum of `Re q`.
/// Returns `None` when no admissible `z` is found.
pub fn exit_moment_bound(q: &LevyQuadruple, x: &[f64], radius: f64) -> Result<Option<ExitMomentBound>> {
    if !(radius > 0.0) {
        return Err(LevyError::Domain(format!("radius {radius} must be positive")));
    }
    let dirs = scan_directions(q.dim, 16);
    let mut best: Option<(f64, Vec<f64>)> = None;
    for u in &dirs {
        for m in EXIT_MAGNITUDES {
            let z = scaled(u, m);
            let xi = scaled(&z, 1.0 / radius);
            let (inf, ratio) = inf_re_and_ratio(q, x, radius, &xi)?;
            if inf > 0.0 && ratio >= 2.0 * radius && best.as_ref().is_none_or(|b| inf > b.0) {
                best = Some((inf, z));
            }
        }
    }
    Ok(best.map(|(inf, z)| {
        let c = 2f64.sqrt() / 8.0 * inf;
        ExitMomentBound {
            radius,
            z_star: z,
            c_star: c,
            lambda_max: c,
            note: "infimum over the ball is sampled (an over-estimate); z chosen by grid search over directions and magnitudes".into(),
        }
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadruple::{constant_matrix, constant_scalar, constant_vector, scaled_identity, Atom, LevyMeasureSpec};
    use std::sync::Arc;

    fn brownian(d: usize) -> LevyQuadruple {
        LevyQuadruple {
            diffusion: constant_matrix(scaled_identity(d, 1.0)),
            ..LevyQuadruple::null(d)
        }
    }

    #[test]
    fn closed_stable_constant_matches_cauchy() {
        assert!((stable_symbol_constant(1, 1.0) - PI).abs() < 1e-12);
        // d = 3, α = 1: ∫(1−cos) |y|^{-4} dy = π²|ξ|
        assert!((stable_symbol_constant(3, 1.0) - PI * PI).abs() < 1e-12);
    }

    #[test]
    fn stable_constant_agrees_with_density_quadrature() {
        for (d, alpha) in [(1usize, 0.6), (2, 1.3), (3, 1.8)] {
            let dens = LevyQuadruple {
                jumps: LevyMeasureSpec::GeneralDensity {
                    density: Arc::new(move |_x: &[f64], y: &[f64]| norm(y).powf(-(d as f64) - alpha)),
                    tail_exponent: Some(d as f64 + alpha),
                    isotropic: true,
                },
                ..LevyQuadruple::null(d)
            };
            let mut xi = vec![0.0; d];
            xi[0] = 0.7;
            let v = eval_symbol(&dens, &vec![0.0; d], &xi).unwrap().re.to_f64();
            let exact = stable_symbol_constant(d, alpha) * 0.7f64.powf(alpha);
            assert!((v - exact).abs() < 1e-6 * exact, "d={d} α={alpha}: {v} vs {exact}");
        }
    }

    #[test]
    fn symbol_examples() {
        let s = eval_symbol(&brownian(2), &[3.0, 1.0], &[1.0, 1.0]).unwrap();
        assert_eq!(
            s,
            SymbolValue {
                re: Extended::Finite(1.0),
                im: 0.0
            }
        );
        let q = LevyQuadruple {
            drift: constant_vector(vec![1.0, 0.0]),
            ..LevyQuadruple::null(2)
        };
        let s = eval_symbol(&q, &[0.0, 5.0], &[2.0, 0.0]).unwrap();
        assert_eq!(
            s,
            SymbolValue {
                re: Extended::Finite(0.0),
                im: -2.0
            }
        );
        let q = LevyQuadruple {
            killing: constant_scalar(0.3),
            ..brownian(2)
        };
        let s = eval_symbol(&q, &[0.0, 5.0], &[0.0, 0.0]).unwrap();
        assert_eq!(
            s,
            SymbolValue {
                re: Extended::Finite(0.3),
                im: 0.0
            }
        );
    }

    #[test]
    fn atom_symbol_is_exact() {
        let q = LevyQuadruple {
            jumps: LevyMeasureSpec::FiniteAtoms(vec![
                Atom {
                    y: vec![0.5],
                    mass: constant_scalar(2.0),
                },
                Atom {
                    y: vec![3.0],
                    mass: constant_scalar(1.0),
                },
            ]),
            ..LevyQuadruple::null(1)
        };
        let s = eval_symbol(&q, &[0.0], &[0.8]).unwrap();
        let re = 2.0 * (1.0 - (0.4f64).cos()) + (1.0 - (2.4f64).cos());
        let im = -(2.0 * ((0.4f64).sin() - 0.4) + (2.4f64).sin());
        assert!((s.re.to_f64() - re).abs() < 1e-14);
        assert!((s.im - im).abs() < 1e-14);
    }

    #[test]
    fn conservativeness_examples() {
        let rep = conservativeness_check(&brownian(1), &[0.0], &[1.0, 10.0, 100.0]).unwrap();
        assert_eq!(rep.verdict, ConservativenessVerdict::EvidenceOfConservativeness);
        assert!((rep.sups[0].to_f64() - 0.5).abs() < 1e-12);
        assert!((rep.sups[2].to_f64() - 0.5e-4).abs() < 1e-14);
        let killed = LevyQuadruple {
            killing: constant_scalar(1.0),
            ..brownian(1)
        };
        let rep = conservativeness_check(&killed, &[0.0], &[1.0, 10.0, 100.0]).unwrap();
        assert_eq!(rep.verdict, ConservativenessVerdict::Inconclusive);
        assert!(rep.killing_flag);
        assert!(rep.sups.iter().all(|s| s.to_f64() >= 1.0));
    }

    #[test]
    fn exit_moment_examples() {
        let b = exit_moment_bound(&brownian(1), &[0.0], 1.0).unwrap().unwrap();
        assert!((b.c_star - 2f64.sqrt() / 64.0).abs() < 1e-12);
        assert!((b.bound(0.01).unwrap() - 1.8267).abs() < 1e-3);
        let drift = LevyQuadruple {
            drift: constant_vector(vec![1.0]),
            ..LevyQuadruple::null(1)
        };
        assert!(exit_moment_bound(&drift, &[0.0], 1.0).unwrap().is_none());
        let cauchy = LevyQuadruple {
            jumps: LevyMeasureSpec::stable(1.0, 1.0 / PI),
            ..LevyQuadruple::null(1)
        };
        let b = exit_moment_bound(&cauchy, &[0.0], 1.0).unwrap().unwrap();
        assert!((b.c_star - 2f64.sqrt() / 16.0).abs() < 1e-12);
    }
}

//! Small vector helpers, unit-sphere constants and deterministic point sets.

use std::f64::consts::PI;

use nalgebra::{DMatrix, SymmetricEigen};
use statrs::distribution::{ContinuousCDF, Normal};
use statrs::function::gamma::gamma;

use crate::quadrature::gauss_legendre;

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn scaled(a: &[f64], k: f64) -> Vec<f64> {
    a.iter().map(|v| v * k).collect()
}

pub fn add(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

/// Surface area `S_d` of the unit sphere in `R^d`.
pub fn sphere_area(d: usize) -> f64 {
    let h = d as f64 / 2.0;
    2.0 * PI.powf(h) / gamma(h)
}

/// Volume `V_d` of the unit ball in `R^d`.
pub fn ball_volume(d: usize) -> f64 {
    let h = d as f64 / 2.0;
    PI.powf(h) / gamma(h + 1.0)
}

const PRIMES: [u64; 24] = [
    2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61, 67, 71, 73, 79, 83, 89,
];

/// Van der Corput radical inverse of `index` in base `PRIMES[dim]`.
pub fn halton(index: u64, dim: usize) -> f64 {
    let base = PRIMES[dim % PRIMES.len()];
    let mut f = 1.0;
    let mut r = 0.0;
    let mut i = index;
    while i > 0 {
        f /= base as f64;
        r += f * (i % base) as f64;
        i /= base;
    }
    r
}

fn std_normal_quantile(u: f64) -> f64 {
    let n = Normal::standard();
    n.inverse_cdf(u.clamp(1e-12, 1.0 - 1e-12))
}

/// Quasi-random unit vector from Halton coordinates `first_dim..first_dim+d`.
fn halton_direction(index: u64, d: usize, first_dim: usize) -> Vec<f64> {
    let g: Vec<f64> = (0..d)
        .map(|k| std_normal_quantile(halton(index + 1, first_dim + k)))
        .collect();
    let n = norm(&g);
    if n == 0.0 {
        let mut e = vec![0.0; d];
        e[0] = 1.0;
        return e;
    }
    scaled(&g, 1.0 / n)
}

/// Deterministic direction set for state-space scans (no weights).
pub fn scan_directions(d: usize, count: usize) -> Vec<Vec<f64>> {
    match d {
        1 => vec![vec![1.0], vec![-1.0]],
        2 => (0..count)
            .map(|k| {
                let t = 2.0 * PI * (k as f64 + 0.5) / count as f64;
                vec![t.cos(), t.sin()]
            })
            .collect(),
        3 => {
            let golden = PI * (3.0 - 5f64.sqrt());
            (0..count)
                .map(|k| {
                    let z = 1.0 - (2.0 * k as f64 + 1.0) / count as f64;
                    let rho = (1.0 - z * z).sqrt();
                    let phi = golden * k as f64;
                    vec![rho * phi.cos(), rho * phi.sin(), z]
                })
                .collect()
        }
        _ => (0..count as u64).map(|k| halton_direction(k, d, 0)).collect(),
    }
}

/// Weighted spherical design; weights sum to `S_d`. `level` controls the
/// resolution and doubles the node count per increment.
pub fn sphere_design(d: usize, level: u32) -> Vec<(Vec<f64>, f64)> {
    match d {
        1 => vec![(vec![1.0], 1.0), (vec![-1.0], 1.0)],
        2 => {
            let n = 16usize << level;
            let w = 2.0 * PI / n as f64;
            (0..n)
                .map(|k| {
                    let t = 2.0 * PI * (k as f64 + 0.5) / n as f64;
                    (vec![t.cos(), t.sin()], w)
                })
                .collect()
        }
        3 => {
            let nt = 8usize << level;
            let np = 2 * nt;
            let (z, wz) = gauss_legendre(nt);
            let mut out = Vec::with_capacity(nt * np);
            for (zi, wi) in z.iter().zip(&wz) {
                let rho = (1.0 - zi * zi).max(0.0).sqrt();
                for k in 0..np {
                    let phi = 2.0 * PI * (k as f64 + 0.5) / np as f64;
                    out.push((vec![rho * phi.cos(), rho * phi.sin(), *zi], wi * 2.0 * PI / np as f64));
                }
            }
            out
        }
        _ => {
            let n = 256usize << level;
            let w = sphere_area(d) / n as f64;
            (0..n as u64).map(|k| (halton_direction(k, d, 0), w)).collect()
        }
    }
}

/// Low-discrepancy points in the closed ball `B(center, radius)`; the center is
/// always the first point.
pub fn ball_points(center: &[f64], radius: f64, n: usize) -> Vec<Vec<f64>> {
    let d = center.len();
    let mut pts = vec![center.to_vec()];
    for k in 1..n as u64 {
        let dir = halton_direction(k, d, 1);
        let rho = radius * halton(k, 0).powf(1.0 / d as f64);
        pts.push(add(center, &scaled(&dir, rho)));
    }
    pts
}

/// Smallest eigenvalue of the symmetric part of a row-major `d×d` matrix.
pub fn min_sym_eigenvalue(m: &[f64], d: usize) -> f64 {
    if d == 1 {
        return m[0];
    }
    let a = DMatrix::from_fn(d, d, |i, j| 0.5 * (m[i * d + j] + m[j * d + i]));
    SymmetricEigen::new(a)
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

/// A factor `L` with `L Lᵀ = m` for a symmetric nonnegative-definite matrix
/// (negative eigenvalues from round-off are clipped to zero).
pub fn psd_factor(m: &[f64], d: usize) -> Vec<f64> {
    if d == 1 {
        return vec![m[0].max(0.0).sqrt()];
    }
    // Cholesky first; falls back to the eigen square root for singular input.
    let mut l = vec![0.0; d * d];
    let mut ok = true;
    'outer: for i in 0..d {
        for j in 0..=i {
            let mut s = m[i * d + j];
            for k in 0..j {
                s -= l[i * d + k] * l[j * d + k];
            }
            if i == j {
                if s <= 1e-14 * m[i * d + i].abs().max(1e-300) {
                    ok = false;
                    break 'outer;
                }
                l[i * d + i] = s.sqrt();
            } else {
                l[i * d + j] = s / l[j * d + j];
            }
        }
    }
    if ok {
        return l;
    }
    let a = DMatrix::from_fn(d, d, |i, j| 0.5 * (m[i * d + j] + m[j * d + i]));
    let eig = SymmetricEigen::new(a);
    let mut out = vec![0.0; d * d];
    for i in 0..d {
        for j in 0..d {
            let mut s = 0.0;
            for k in 0..d {
                s += eig.eigenvectors[(i, k)] * eig.eigenvalues[k].max(0.0).sqrt() * eig.eigenvectors[(j, k)];
            }
            out[i * d + j] = s;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sphere_constants() {
        assert!((sphere_area(1) - 2.0).abs() < 1e-12);
        assert!((sphere_area(2) - 2.0 * PI).abs() < 1e-12);
        assert!((sphere_area(3) - 4.0 * PI).abs() < 1e-12);
        for d in 1..8 {
            assert!((sphere_area(d) - d as f64 * ball_volume(d)).abs() < 1e-12);
        }
    }

    #[test]
    fn designs_integrate_constants_and_quadratics() {
        for d in 1..=5 {
            let des = sphere_design(d, 0);
            let total: f64 = des.iter().map(|(_, w)| w).sum();
            assert!((total - sphere_area(d)).abs() < 1e-10, "d={d}");
            if d <= 3 {
                // ∫ u_1² dσ = S_d / d
                let q: f64 = des.iter().map(|(u, w)| w * u[0] * u[0]).sum();
                assert!((q - sphere_area(d) / d as f64).abs() < 1e-10, "d={d}");
            }
        }
    }

    #[test]
    fn psd_factor_reproduces_matrix() {
        let m = [2.0, 0.5, 0.0, 0.5, 1.0, 0.0, 0.0, 0.0, 0.0];
        let l = psd_factor(&m, 3);
        for i in 0..3 {
            for j in 0..3 {
                let s: f64 = (0..3).map(|k| l[i * 3 + k] * l[j * 3 + k]).sum();
                assert!((s - m[i * 3 + j]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn ball_points_stay_inside() {
        let c = [1.0, -2.0];
        for p in ball_points(&c, 3.0, 200) {
            assert!(norm(&sub(&p, &c)) <= 3.0 + 1e-12);
        }
    }
}

//! Acceptance campaign: one PASS/FAIL line per criterion.

use std::fs;
use std::io::Write;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::sync::Arc;
use std::time::{Duration, Instant};

use levydrift_cli::spec::{Overrides, RunSpec};
use levydrift_core::catalog::{self, LevyTriplet, SdeAssertions, StableLikeCoefficients, TripletJumps};
use levydrift_core::classifier::{classify, SearchConfig, Verdict};
use levydrift_core::drift::{apply_generator, e_bounds, e_v_alpha, e_w_alpha, r_alpha, t_alpha};
use levydrift_core::quadruple::{constant_scalar, Atom, LevyMeasureSpec, LevyQuadruple};
use levydrift_core::simulator::{estimate_hitting, generator_consistency, tv_decay, SimConfig};
use levydrift_core::symbol::exit_moment_bound;
use levydrift_core::testfn::{build_extension, v_alpha, w_alpha, CriterionParams, TestKind};
use levydrift_core::Extended;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::function::erf::erfc;

type Outcome = Result<String, String>;

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// A uniformly random direction scaled to a log-uniform radius in `[lo, hi]`.
fn random_state(rng: &mut ChaCha8Rng, d: usize, lo: f64, hi: f64) -> Vec<f64> {
    let r = lo * (rng.random::<f64>() * (hi / lo).ln()).exp();
    loop {
        let g: Vec<f64> = (0..d).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect();
        let n = norm(&g);
        if n > 1e-3 && n <= 1.0 {
            return g.iter().map(|v| v * r / n).collect();
        }
    }
}

fn params(alpha: f64, x0: f64) -> CriterionParams {
    CriterionParams::new(alpha, x0)
}

fn stable_like_1d() -> LevyQuadruple {
    let coeffs = StableLikeCoefficients {
        dim: 1,
        alpha: Arc::new(|x: &[f64]| 1.5 + 0.3 * x[0].sin()),
        beta: Arc::new(|x: &[f64]| vec![-x[0]]),
        gamma: constant_scalar(1.0),
    };
    catalog::stable_like(&coeffs, None).unwrap()
}

fn sde_jump_1d() -> LevyQuadruple {
    let triplet = LevyTriplet {
        b: vec![0.0],
        c: vec![0.5],
        jumps: TripletJumps::Density {
            density: Arc::new(|y: &[f64]| 0.5 * (-y[0].abs()).exp()),
            tail_exponent: Some(50.0),
            isotropic: true,
        },
    };
    let assertions = SdeAssertions {
        open_set_irreducible: true,
        skeleton_chain: true,
    };
    catalog::sde_jump(
        1,
        Arc::new(|x: &[f64]| 1.0 + 0.5 * x[0].tanh()),
        Arc::new(|x: &[f64]| vec![-x[0]]),
        &triplet,
        assertions,
        None,
    )
    .unwrap()
}

/// One representative quadruple per catalog entry.
fn catalog_entries() -> Vec<(&'static str, LevyQuadruple)> {
    vec![
        ("brownian(2)", catalog::brownian(2).unwrap()),
        ("stable(1, 1.5)", catalog::stable(1, 1.5, 1.0).unwrap()),
        ("stable_like(1)", stable_like_1d()),
        (
            "ou(2)",
            catalog::ou(2, &[1.0, 0.3, -0.3, 2.0], &LevyTriplet::gaussian(2, 1.0)).unwrap(),
        ),
        ("sde_jump(1)", sde_jump_1d()),
    ]
}

fn atoms(d: usize, list: &[(&[f64], f64)]) -> LevyQuadruple {
    let atoms = list
        .iter()
        .map(|(y, m)| {
            assert_eq!(y.len(), d);
            Atom {
                y: y.to_vec(),
                mass: constant_scalar(*m),
            }
        })
        .collect();
    LevyQuadruple {
        jumps: LevyMeasureSpec::FiniteAtoms(atoms),
        diffusion: levydrift_core::quadruple::constant_matrix(levydrift_core::quadruple::scaled_identity(d, 0.5)),
        ..LevyQuadruple::null(d)
    }
}

type AtomSet = Vec<(Vec<f64>, f64)>;

fn atom_quadruples() -> Vec<(AtomSet, LevyQuadruple)> {
    let sets: Vec<AtomSet> = vec![
        vec![
            (vec![2.5], 0.7),
            (vec![-4.0], 0.2),
            (vec![0.5], 3.0),
            (vec![-30.0], 0.01),
        ],
        vec![
            (vec![3.0, -1.0], 0.4),
            (vec![-0.2, 0.3], 2.0),
            (vec![-8.0, 6.0], 0.05),
            (vec![1.5, 1.5], 0.3),
        ],
        vec![
            (vec![0.0, 0.0, 5.0], 0.3),
            (vec![-2.0, 1.0, -1.0], 0.6),
            (vec![100.0, 0.0, 0.0], 1e-3),
        ],
    ];
    sets.into_iter()
        .map(|s| {
            let d = s[0].0.len();
            let view: Vec<(&[f64], f64)> = s.iter().map(|(y, m)| (y.as_slice(), *m)).collect();
            let q = atoms(d, &view);
            (s, q)
        })
        .collect()
}

fn c1_brownian_dichotomy() -> Outcome {
    let mut detail = vec![];
    for (d, want) in [(1usize, Verdict::Recurrent), (3, Verdict::Transient)] {
        let t = Instant::now();
        let c = classify(&catalog::brownian(d).unwrap(), &SearchConfig::default()).map_err(|e| e.to_string())?;
        let el = t.elapsed();
        let v = c.certificate.verdict;
        if v != want || el > Duration::from_secs(30) {
            return Err(format!("brownian({d}): {v:?} in {el:.1?} (want {want:?} within 30 s)"));
        }
        detail.push(format!("brownian({d}) {v:?} in {el:.1?}"));
    }
    Ok(detail.join(", "))
}

fn c2_closed_form_drift() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst: f64 = 0.0;
    for i in 0..100 {
        let d = 1 + i % 3;
        let x0 = 4.0;
        let x = random_state(&mut rng, d, x0, 1e3);
        let r = norm(&x);
        let a = 0.05 + 1.9 * rng.random::<f64>();
        let q = catalog::brownian(d).unwrap();
        let dd = d as f64;
        let t = t_alpha(&q, &x, &params(a, x0))
            .map_err(|e| e.to_string())?
            .total
            .to_f64();
        let t_hand = a * r.powf(-a - 2.0) * (dd / 2.0 - 1.0 - a / 2.0);
        let r0 = r_alpha(&q, &x, &params(0.0, x0))
            .map_err(|e| e.to_string())?
            .total
            .to_f64();
        let r0_hand = (dd / 2.0 - 1.0) * r.powi(-2);
        let ra = r_alpha(&q, &x, &params(a, x0))
            .map_err(|e| e.to_string())?
            .total
            .to_f64();
        let ra_hand = a * r.powf(a - 2.0) * (dd / 2.0 - 1.0 + a / 2.0);
        for (got, want, what) in [(t, t_hand, "T_α"), (r0, r0_hand, "R_0"), (ra, ra_hand, "R_α")] {
            let err = (got - want).abs();
            worst = worst.max(err);
            if err > 1e-12 {
                return Err(format!("{what} at d={d}, |x|={r}, α={a}: {got} vs {want}"));
            }
        }
    }
    Ok(format!("300 values, max abs error {worst:.1e}"))
}

/// `E^W_α` and `E^V_α` summed atom by atom.
fn direct_sums(list: &[(Vec<f64>, f64)], x: &[f64], p: &CriterionParams) -> (f64, f64) {
    let big_r = norm(x);
    let (mut ew, mut ev) = (0.0, 0.0);
    for (y, m) in list {
        if norm(y) < 1.0 {
            continue;
        }
        let z: Vec<f64> = x.iter().zip(y).map(|(a, b)| a + b).collect();
        let rho = norm(&z);
        if p.alpha > 0.0 {
            let w = |s: f64| w_alpha(s, p.alpha).unwrap();
            ew += m * if rho > p.r0 {
                w(rho) - w(big_r)
            } else {
                w(p.r0) - p.eps_value() - w(big_r)
            };
        }
        let v = |s: f64| v_alpha(s, p.alpha).unwrap();
        ev += m * if rho > p.r0 {
            v(rho) - v(big_r)
        } else {
            v(p.r0) - v(big_r)
        };
    }
    (ew, ev)
}

fn c3_atom_sums() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst: f64 = 0.0;
    let mut n = 0;
    for (list, q) in atom_quadruples() {
        for _ in 0..40 {
            let x0 = 2.0 + 6.0 * rng.random::<f64>();
            let x = random_state(&mut rng, q.dim, 0.5 * (1.0 + x0), 200.0);
            let a = [0.0, 0.3, 1.0, 1.7][rng.random_range(0..4)];
            let p = params(a, x0);
            let (ew, ev) = direct_sums(&list, &x, &p);
            let mut pairs = vec![(
                e_v_alpha(&q, &x, &p).map_err(|e| e.to_string())?.value.to_f64(),
                ev,
                "E^V",
            )];
            if a > 0.0 {
                pairs.push((
                    e_w_alpha(&q, &x, &p).map_err(|e| e.to_string())?.value.to_f64(),
                    ew,
                    "E^W",
                ));
            }
            for (got, want, what) in pairs {
                let err = (got - want).abs() / want.abs().max(1.0);
                worst = worst.max(err);
                n += 1;
                if err > 1e-10 {
                    return Err(format!("{what} at x = {x:?}, α = {a}: {got} vs direct sum {want}"));
                }
            }
        }
    }
    Ok(format!("{n} values on 3 atomic quadruples, max error {worst:.1e}"))
}

fn c4_bound_dominance() -> Outcome {
    let mut quads: Vec<(String, LevyQuadruple)> = vec![
        ("stable(1, 0.8)".into(), catalog::stable(1, 0.8, 1.0).unwrap()),
        ("stable(2, 1.5)".into(), catalog::stable(2, 1.5, 0.7).unwrap()),
        ("stable_like(1)".into(), stable_like_1d()),
    ];
    for (i, (_, q)) in atom_quadruples().into_iter().enumerate() {
        quads.push((format!("atoms#{i}"), q));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut checks = 0;
    for (name, q) in &quads {
        for _ in 0..100 {
            let x0 = 2.0 + 6.0 * rng.random::<f64>();
            let x = random_state(&mut rng, q.dim, 0.5 * (1.0 + x0), 300.0);
            let aw = 0.05 + 0.95 * rng.random::<f64>();
            let pw = params(aw, x0);
            let ew = e_w_alpha(q, &x, &pw).map_err(|e| format!("{name}: E^W at {x:?}, α = {aw}: {e}"))?;
            let lower = e_bounds(q, &x, &pw, TestKind::W)
                .map_err(|e| format!("{name}: lower bound at {x:?}, α = {aw}: {e}"))?
                .lower;
            if let Some(l) = lower {
                checks += 1;
                if l > ew.value.to_f64() + ew.error {
                    return Err(format!(
                        "{name}: lower bound = {l} > E^W = {:?} at {x:?}, α = {aw}",
                        ew.value
                    ));
                }
            }
            let av = 1.9 * rng.random::<f64>();
            let pv = params(av, x0);
            let ev = e_v_alpha(q, &x, &pv).map_err(|e| format!("{name}: E^V at {x:?}, α = {av}: {e}"))?;
            let upper = e_bounds(q, &x, &pv, TestKind::V)
                .map_err(|e| format!("{name}: upper bound at {x:?}, α = {av}: {e}"))?
                .upper;
            if let Some(u) = upper {
                checks += 1;
                let ok = match (ev.value, u) {
                    (_, Extended::PosInfinity) => true,
                    (Extended::PosInfinity, _) => false,
                    (e, u) => e.to_f64() <= u.to_f64() + ev.error,
                };
                if !ok {
                    return Err(format!(
                        "{name}: E^V = {:?} > upper bound = {u:?} at {x:?}, α = {av}",
                        ev.value
                    ));
                }
            }
        }
    }
    Ok(format!("{checks} comparisons on 6 quadruples, zero violations"))
}

fn c5_direction_contract() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut n = 0;
    for (name, q) in catalog_entries() {
        for _ in 0..200 {
            let x0 = 2.0 + 6.0 * rng.random::<f64>();
            let x = random_state(&mut rng, q.dim, x0, 100.0 * x0);
            let pw = params(0.05 + 0.95 * rng.random::<f64>(), x0);
            let fw = build_extension(TestKind::W, &pw).map_err(|e| e.to_string())?;
            let lw = apply_generator(&q, &fw, &x).map_err(|e| e.to_string())?;
            let t = t_alpha(&q, &x, &pw).map_err(|e| e.to_string())?.total;
            if lw.to_f64() < t.to_f64() - 1e-8 {
                return Err(format!("{name}: L W̄ = {lw:?} < T_α = {t:?} at {x:?}, α = {}", pw.alpha));
            }
            let pv = params(1.2 * rng.random::<f64>(), x0);
            let fv = build_extension(TestKind::V, &pv).map_err(|e| e.to_string())?;
            let lv = apply_generator(&q, &fv, &x).map_err(|e| e.to_string())?;
            let r = r_alpha(&q, &x, &pv).map_err(|e| e.to_string())?.total;
            let ok = match (lv, r) {
                (_, Extended::PosInfinity) => true,
                (Extended::PosInfinity, _) => false,
                (l, r) => l.to_f64() <= r.to_f64() + 1e-8,
            };
            if !ok {
                return Err(format!("{name}: L V̄ = {lv:?} > R_α = {r:?} at {x:?}, α = {}", pv.alpha));
            }
            n += 2;
        }
    }
    Ok(format!("{n} inequalities on 5 catalog entries"))
}

fn c6_ou_exponential() -> Outcome {
    let start = Instant::now();
    let q = catalog::ou(1, &[1.0], &LevyTriplet::gaussian(1, 1.0)).map_err(|e| e.to_string())?;
    let c = classify(&q, &SearchConfig::default()).map_err(|e| e.to_string())?;
    if c.certificate.verdict != Verdict::ExponentiallyErgodic {
        return Err(format!("verdict {:?}", c.certificate.verdict));
    }
    let cfg = SimConfig {
        dt: 0.01,
        horizon: 10.0,
        n_paths: 100_000,
        seed: 6,
        ..SimConfig::default()
    };
    let times: Vec<f64> = (1..=40).map(|k| 0.25 * k as f64).collect();
    let s = tv_decay(&q, &[-3.0], &[3.0], &times, 40, &cfg).map_err(|e| e.to_string())?;
    let fit = s.exponential_fit.ok_or("no exponential fit")?;
    let el = start.elapsed();
    if !(fit.rate >= 0.7 && fit.rate <= 1.3) || el > Duration::from_secs(300) {
        return Err(format!("rate {:.3} (R² {:.3}) in {el:.1?}", fit.rate, fit.r_squared));
    }
    Ok(format!(
        "exponentially-ergodic; fitted TV rate {:.3} (95% CI [{:.3}, {:.3}]) vs 1 in {el:.1?}",
        fit.rate, fit.rate_ci[0], fit.rate_ci[1]
    ))
}

fn c7_exit_moment() -> Outcome {
    let q = catalog::brownian(1).unwrap();
    let lambda = 0.01;
    let cfg = SimConfig {
        dt: 1e-3,
        horizon: 20.0,
        n_paths: 100_000,
        seed: 7,
        ..SimConfig::default()
    };
    let s = estimate_hitting(&q, &[0.0], 1.0, Some(lambda), &cfg).map_err(|e| e.to_string())?;
    let h = s.hitting.ok_or("no hitting statistics")?;
    let e = h.exp_moment.ok_or("no exponential moment")?.estimate;
    let oracle = 1.0 / (2.0 * lambda).sqrt().cos();
    let bound = exit_moment_bound(&q, &[0.0], 1.0)
        .map_err(|e| e.to_string())?
        .and_then(|b| b.bound(lambda))
        .ok_or("no exit-moment bound")?;
    let detail = format!(
        "E[e^(λ(τ∧T))] = {:.5} ± {:.5}, sec(√(2λ)) = {oracle:.5}, symbol bound {bound:.4}",
        e.value, e.se
    );
    let ok = e.value >= 1.0
        && e.value <= 1.8267
        && (e.value - oracle).abs() <= 3.0 * e.se
        && bound >= e.value
        && (bound - 1.8267).abs() < 5e-4;
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn c8_hitting_3d() -> Outcome {
    let q = catalog::brownian(3).unwrap();
    let cfg = SimConfig {
        dt: 0.01,
        horizon: 1e4,
        n_paths: 10_000,
        seed: 8,
        adaptive_kappa: Some(0.2),
        ..SimConfig::default()
    };
    let s = estimate_hitting(&q, &[2.0, 0.0, 0.0], 1.0, None, &cfg).map_err(|e| e.to_string())?;
    let p = s.hitting.ok_or("no hitting statistics")?.hit_prob;
    let finite = 0.5 * erfc(1.0 / (2.0 * cfg.horizon).sqrt());
    let detail = format!(
        "P(hit) = {:.4} ± {:.4}; harmonic ratio 0.5, horizon-{} value {finite:.4}",
        p.value, p.se, cfg.horizon
    );
    if (p.value - 0.5).abs() <= 3.0 * p.se {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn c9_generator_consistency() -> Outcome {
    let f = build_extension(TestKind::W, &params(0.5, 2.0)).map_err(|e| e.to_string())?;
    let cfg = SimConfig {
        dt: 0.01,
        horizon: 0.01,
        n_paths: 100_000,
        seed: 9,
        ..SimConfig::default()
    };
    let states: [&[f64]; 5] = [&[2.5, 0.5], &[3.0], &[3.0], &[2.0, -1.5], &[2.5]];
    let mut detail = vec![];
    for ((name, q), x) in catalog_entries().into_iter().zip(states) {
        let g = generator_consistency(&q, &f, x, 0.01, &cfg).map_err(|e| e.to_string())?;
        let line = format!(
            "{name}: {:.4} ± {:.4} vs L f = {:.4} (tol {:.4})",
            g.weak_derivative.value, g.weak_derivative.se, g.generator, g.tolerance
        );
        if !g.passed {
            return Err(line);
        }
        detail.push(line);
    }
    Ok(detail.join("; "))
}

fn campaign_specs() -> Vec<RunSpec> {
    let docs = [
        r#"{"schema": "levydrift.runspec/1", "process": {"catalog": "brownian", "params": {"dim": 3}},
            "commands": ["validate", "classify", "report"]}"#,
        r#"{"schema": "levydrift.runspec/1",
            "process": {"catalog": "ou", "params": {"dim": 1, "q": [[1.0]], "triplet": {"c": [[1.0]]}}},
            "commands": ["validate", "classify", "simulate", "verify", "report"],
            "simulate": {"dt": 0.01, "horizon": 4.0, "n_paths": 5000, "seed": 10,
                         "tasks": {"tv": {"x_a": [-2.0], "x_b": [2.0], "times": [0.5, 1.0, 1.5, 2.0, 2.5, 3.0]},
                                   "hitting": {"start": [3.0], "radius": 1.0, "lambda": 0.5},
                                   "return": {"x": [0.0]}}}}"#,
        r#"{"schema": "levydrift.runspec/1",
            "process": {"inline": {"dim": 1, "drift": ["-x1"],
                        "jumps": {"kind": "stable_like", "alpha": "1.5 + 0.3*sin(x1)", "gamma": 1},
                        "asserts": {"open_set_irreducible": true, "skeleton_chain": true}}},
            "commands": ["classify", "simulate", "report"],
            "search": {"accept_scan_only": true},
            "simulate": {"dt": 0.01, "horizon": 2.0, "n_paths": 2000, "seed": 10,
                         "tasks": {"hitting": {"start": [4.0], "radius": 1.0}}}}"#,
        r#"{"schema": "levydrift.runspec/1",
            "process": {"catalog": "sde_jump", "params": {"dim": 2, "phi": "1 + 0.5*tanh(x1)", "psi": ["-x1", "-x2"],
                        "triplet": {"c": [[0.5, 0], [0, 0.5]],
                                    "jumps": {"kind": "density", "density": "0.1*exp(-|y|)", "tail_exponent": 50, "isotropic": true}},
                        "asserts": {"open_set_irreducible": true, "skeleton_chain": true}}},
            "commands": ["classify", "simulate", "verify", "report"],
            "search": {"alphas": [1.0, 2.0], "x0s": [4.0], "n_radii": 8, "directions": 16, "accept_scan_only": true},
            "simulate": {"dt": 0.05, "horizon": 1.0, "n_paths": 400, "seed": 10,
                         "tasks": {"hitting": {"start": [3.0, 0.0], "radius": 1.0, "lambda": 0.2},
                                   "tv": {"x_a": [-2.0, 0.0], "x_b": [2.0, 0.0], "times": [0.5, 1.0], "bins": 12}}}}"#,
    ];
    docs.iter().map(|d| levydrift_cli::parse_runspec(d).unwrap()).collect()
}

fn run_campaign(dir: &Path, threads: usize) -> Result<(), String> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| e.to_string())?;
    pool.install(|| {
        for (i, spec) in campaign_specs().iter().enumerate() {
            let ov = Overrides {
                out: Some(dir.join(format!("run{i}"))),
                seed: Some(2024),
                ..Overrides::default()
            };
            let o = levydrift_cli::run(spec, &ov).map_err(|e| format!("campaign run {i}: {e}"))?;
            if o.exit_code() != 0 {
                return Err(format!("campaign run {i} exited {}", o.exit_code()));
            }
        }
        Ok(())
    })
}

fn collect_files(dir: &Path, out: &mut Vec<std::path::PathBuf>) {
    for e in fs::read_dir(dir).unwrap() {
        let p = e.unwrap().path();
        if p.is_dir() {
            collect_files(&p, out);
        } else {
            out.push(p);
        }
    }
}

fn c10_determinism() -> Outcome {
    let tmp = std::env::temp_dir().join(format!("levydrift-acceptance-{}", std::process::id()));
    let (a, b) = (tmp.join("a"), tmp.join("b"));
    run_campaign(&a, 1)?;
    run_campaign(&b, 4)?;
    let mut files = vec![];
    collect_files(&a, &mut files);
    files.sort();
    for f in &files {
        let rel = f.strip_prefix(&a).unwrap();
        let other = b.join(rel);
        if fs::read(f).ok() != fs::read(&other).ok() {
            return Err(format!("{} differs between runs", rel.display()));
        }
    }
    let _ = fs::remove_dir_all(&tmp);
    Ok(format!(
        "{} artifacts byte-identical across two runs (1 and 4 threads)",
        files.len()
    ))
}

fn main() {
    type Check = (&'static str, fn() -> Outcome);
    let criteria: [Check; 10] = [
        ("Brownian dichotomy", c1_brownian_dichotomy),
        ("closed-form drift values", c2_closed_form_drift),
        ("atom-sum oracle", c3_atom_sums),
        ("bound dominance", c4_bound_dominance),
        ("direction contract", c5_direction_contract),
        ("OU exponential ergodicity", c6_ou_exponential),
        ("exit-time bound", c7_exit_moment),
        ("hitting-probability oracle", c8_hitting_3d),
        ("generator consistency", c9_generator_consistency),
        ("determinism", c10_determinism),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    let mut out = std::io::stdout();
    for (i, (name, f)) in criteria.iter().enumerate() {
        let n = i + 1;
        if !filter.is_empty() && !filter.iter().any(|s| s == &n.to_string()) {
            continue;
        }
        let t = Instant::now();
        let r = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        let el = t.elapsed();
        let line = match &r {
            Ok(d) => format!("criterion {n:>2} PASS  {name} [{el:.1?}]: {d}"),
            Err(d) => {
                failed += 1;
                format!("criterion {n:>2} FAIL  {name} [{el:.1?}]: {d}")
            }
        };
        writeln!(out, "{line}").unwrap();
        out.flush().unwrap();
    }
    if failed > 0 {
        writeln!(out, "acceptance: {failed} criterion/criteria failed").unwrap();
        std::process::exit(1);
    }
    writeln!(out, "acceptance: all criteria passed").unwrap();
}

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use levydrift_core::classifier::{self, Classification, MixingReport, TraceEntry, Verdict};
use levydrift_core::quadruple::{self, LevyQuadruple, ValidationReport};
use levydrift_core::simulator::{self, curve_to_csv, FittedRate, PathEnsembleStats, ReturnDiagnostic, SimConfig};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::spec::{probe_points, Command, Overrides, RunSpec, SpecError};

pub const DEFAULT_OUTPUT: &str = "levydrift-out";

/// Return fraction above which a transience certificate is contradicted.
pub const TRANSIENT_RETURN_LIMIT: f64 = 0.9;
/// Return fraction below which an ergodicity certificate is contradicted.
pub const ERGODIC_RETURN_LIMIT: f64 = 0.05;

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Spec(#[from] SpecError),
    #[error("{0}")]
    Runtime(String),
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Spec(_) => 2,
            RunError::Runtime(_) => 1,
        }
    }
}

fn runtime(context: &str) -> impl Fn(levydrift_core::LevyError) -> RunError + '_ {
    move |e| RunError::Runtime(format!("{context}: {e}"))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationArtifact {
    pub config: SimConfig,
    pub hitting: Option<PathEnsembleStats>,
    pub tv: Option<PathEnsembleStats>,
    pub return_diagnostic: Option<ReturnDiagnostic>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub consistent: bool,
    pub verdict: Verdict,
    pub return_fraction: Option<f64>,
    pub discrepancies: Vec<String>,
    pub notes: Vec<String>,
}

/// Everything a run produced, in memory.
#[derive(Debug, Clone, Default)]
pub struct RunOutcome {
    pub out_dir: PathBuf,
    pub artifacts: Vec<PathBuf>,
    pub validation: Option<ValidationReport>,
    pub classification: Option<Classification>,
    pub mixing: Option<MixingReport>,
    pub simulation: Option<SimulationArtifact>,
    pub verify: Option<VerifyReport>,
}

impl RunOutcome {
    /// 0 on success, 3 when verification found a discrepancy.
    pub fn exit_code(&self) -> i32 {
        match &self.verify {
            Some(v) if !v.consistent => 3,
            _ => 0,
        }
    }
}

struct Writer {
    dir: PathBuf,
    written: Vec<PathBuf>,
}

impl Writer {
    fn write(&mut self, name: &str, contents: &str) -> Result<(), RunError> {
        let path = self.dir.join(name);
        fs::write(&path, contents).map_err(|e| RunError::Runtime(format!("writing {}: {e}", path.display())))?;
        self.written.push(path);
        Ok(())
    }

    fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), RunError> {
        let mut text =
            serde_json::to_string_pretty(value).map_err(|e| RunError::Runtime(format!("serializing {name}: {e}")))?;
        text.push('\n');
        self.write(name, &text)
    }
}

/// Reads, parses and runs the specification at `path`.
pub fn run_file(path: &Path, ov: &Overrides) -> Result<RunOutcome, RunError> {
    let text = fs::read_to_string(path)
        .map_err(|e| RunError::Spec(SpecError::new("--spec", format!("cannot read {}: {e}", path.display()))))?;
    let spec = crate::spec::parse_runspec(&text)?;
    run(&spec, ov)
}

/// Executes the commands of `spec` in the fixed order validate, classify,
/// simulate, verify, report, writing artifacts to the output directory.
pub fn run(spec: &RunSpec, ov: &Overrides) -> Result<RunOutcome, RunError> {
    crate::spec::check_runspec(spec)?;
    let q = spec.process.build()?;
    let search = spec.search.to_config(ov)?;
    let sim = match &spec.simulate {
        Some(s) => {
            s.check_tasks(q.dim)?;
            Some((s, s.to_config(ov)?))
        }
        None => None,
    };
    let commands: BTreeSet<Command> = spec.commands.iter().copied().collect();
    let wants = |c: Command| commands.contains(&c);

    let dir = ov
        .out
        .clone()
        .or_else(|| spec.output.clone())
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUTPUT));
    fs::create_dir_all(&dir).map_err(|e| RunError::Runtime(format!("creating {}: {e}", dir.display())))?;
    let mut w = Writer {
        dir: dir.clone(),
        written: vec![],
    };
    let mut out = RunOutcome {
        out_dir: dir,
        ..Default::default()
    };

    if wants(Command::Validate) {
        let report = quadruple::validate(&q, &probe_points(q.dim)).map_err(runtime("validate"))?;
        w.json("validate.json", &report)?;
        let ok = report.ok();
        let problems = [report.violations.clone(), report.inconsistencies.clone()].concat();
        out.validation = Some(report);
        if !ok {
            out.artifacts = w.written;
            return Err(RunError::Spec(SpecError::new("process", problems.join("; "))));
        }
    }

    if wants(Command::Classify) || wants(Command::Verify) || wants(Command::Report) {
        let c = classifier::classify(&q, &search).map_err(runtime("classify"))?;
        w.json("certificate.json", &c.certificate)?;
        w.json("classify_trace.json", &c.trace)?;
        let mixing = classifier::mixing_flags(&c.certificate);
        w.json("mixing.json", &mixing)?;
        out.mixing = Some(mixing);
        out.classification = Some(c);
    }

    if wants(Command::Simulate) || wants(Command::Verify) {
        let (s, cfg) = sim.as_ref().expect("checked by check_runspec");
        let mut art = SimulationArtifact {
            config: cfg.clone(),
            hitting: None,
            tv: None,
            return_diagnostic: None,
        };
        if wants(Command::Simulate) {
            if let Some(h) = &s.tasks.hitting {
                let st = simulator::estimate_hitting(&q, &h.start, h.radius, h.lambda, cfg)
                    .map_err(runtime("simulate.tasks.hitting"))?;
                if let Some(hs) = &st.hitting {
                    w.write("hitting.csv", &curve_to_csv(&hs.hit_curve))?;
                }
                art.hitting = Some(st);
            }
            if let Some(t) = &s.tasks.tv {
                let st = simulator::tv_decay(&q, &t.x_a, &t.x_b, &t.times, t.bins, cfg)
                    .map_err(runtime("simulate.tasks.tv"))?;
                w.write("tv.csv", &curve_to_csv(&st.tv_curve))?;
                art.tv = Some(st);
            }
        }
        if s.tasks.return_to.is_some() || wants(Command::Verify) {
            let x = s
                .tasks
                .return_to
                .as_ref()
                .map(|r| r.x.clone())
                .unwrap_or_else(|| vec![0.0; q.dim]);
            let rd = simulator::return_diagnostic(&q, &x, cfg).map_err(runtime("simulate.tasks.return"))?;
            art.return_diagnostic = Some(rd);
        }
        w.json("simulation.json", &art)?;
        out.simulation = Some(art);
    }

    if wants(Command::Verify) {
        let cert = &out.classification.as_ref().expect("classified above").certificate;
        let v = verify(cert.verdict, out.simulation.as_ref().expect("simulated above"));
        w.json("verify.json", &v)?;
        out.verify = Some(v);
    }

    if wants(Command::Report) {
        let text = report(&q, spec, &out);
        w.write("report.md", &text)?;
    }

    out.artifacts = w.written;
    Ok(out)
}

/// Cross-checks a verdict against simulation diagnostics. Simulation never
/// overrides the certificate; contradictions are listed as discrepancies.
pub fn verify(verdict: Verdict, sim: &SimulationArtifact) -> VerifyReport {
    let mut discrepancies = vec![];
    let mut notes = vec![];
    let fraction = sim.return_diagnostic.as_ref().map(|r| r.fraction.value);
    if let Some(f) = fraction {
        if verdict == Verdict::Transient && f > TRANSIENT_RETURN_LIMIT {
            discrepancies.push(format!(
                "transience certificate but {:.3} of simulated paths return near the start (limit {TRANSIENT_RETURN_LIMIT})",
                f
            ));
        }
        if verdict.is_ergodic_family() && f < ERGODIC_RETURN_LIMIT {
            discrepancies.push(format!(
                "{} certificate but only {f:.3} of simulated paths return near the start (limit {ERGODIC_RETURN_LIMIT})",
                name(&verdict)
            ));
        }
    }
    if verdict == Verdict::Inconclusive {
        notes.push("inconclusive certificate: nothing to cross-check".into());
    }
    if let Some(tv) = &sim.tv {
        match (&tv.fitted_rate, verdict) {
            (Some(FittedRate::Polynomial { exponent, .. }), Verdict::ExponentiallyErgodic) => notes.push(format!(
                "TV decay is better fitted by a power law (exponent {exponent:.3}) than by an exponential"
            )),
            (Some(FittedRate::Exponential { rate, .. }), Verdict::ExponentiallyErgodic) => {
                notes.push(format!("TV decay fitted as exponential with rate {rate:.3}"))
            }
            (Some(FittedRate::Exponential { rate, .. }), v) if !v.is_ergodic_family() => notes.push(format!(
                "TV decay fitted as exponential (rate {rate:.3}) although the certificate is {}",
                name(&v)
            )),
            (Some(FittedRate::None { reason }), _) => notes.push(format!("no TV rate fitted: {reason}")),
            _ => {}
        }
    }
    if let Some(r) = &sim.return_diagnostic {
        notes.push(format!("return diagnostic: {}", r.note));
    }
    VerifyReport {
        consistent: discrepancies.is_empty(),
        verdict,
        return_fraction: fraction,
        discrepancies,
        notes,
    }
}

fn report(q: &LevyQuadruple, spec: &RunSpec, out: &RunOutcome) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "# levydrift report: {}\n", q.label);
    let cmds: Vec<String> = spec.commands.iter().map(|c| format!("{c:?}").to_lowercase()).collect();
    let _ = writeln!(s, "- dimension: {}", q.dim);
    let _ = writeln!(s, "- commands: {}", cmds.join(", "));
    let _ = writeln!(
        s,
        "- asserted: open-set irreducible = {}, skeleton chain = {}\n",
        q.asserts_open_set_irreducible, q.asserts_skeleton_chain
    );

    if let Some(v) = &out.validation {
        let _ = writeln!(s, "## Validation\n");
        let _ = writeln!(s, "- probes: {}", v.probes);
        let _ = writeln!(s, "- sup killing: {}", v.sup_killing);
        let _ = writeln!(s, "- sup |b|: {}", v.sup_drift_norm);
        let _ = writeln!(s, "- sup |c|: {}", v.sup_diffusion_norm);
        let _ = writeln!(s, "- sup ν(min(1,|y|²)): {}", v.sup_levy_mass);
        for wn in &v.warnings {
            let _ = writeln!(s, "- warning: {wn}");
        }
        s.push('\n');
    }

    if let Some(c) = &out.classification {
        let cert = &c.certificate;
        let p = &cert.params;
        let _ = writeln!(s, "## Certificate\n");
        let _ = writeln!(s, "- verdict: **{}**", name(&cert.verdict));
        let _ = writeln!(s, "- criterion: {}", compact(&cert.criterion));
        let _ = writeln!(
            s,
            "- parameters: α = {}, x0 = {}, r0 = {}, β = {}, γ = {}, λ = {}, t0 = {}",
            p.alpha, p.x0, p.r0, p.beta, p.gamma, p.lambda, p.t0
        );
        let _ = writeln!(s, "- margin: {:.6e} (tolerance {:e})", cert.margin, cert.margin_tol);
        let _ = writeln!(
            s,
            "- scan: {} radii in [{}, {}], {} directions, {} points",
            cert.scan.radial_grid.len(),
            cert.scan.radial_grid.first().copied().unwrap_or(f64::NAN),
            cert.scan.radial_grid.last().copied().unwrap_or(f64::NAN),
            cert.scan.directions_per_radius,
            cert.scan.points_evaluated
        );
        let _ = writeln!(s, "- beyond the scan: {}", name(&cert.scan.asymptotic_tail));
        for n in &cert.scan.tail_notes {
            let _ = writeln!(s, "  - {n}");
        }
        if cert.scan.asymptotic_tail == classifier::AsymptoticTail::ScanOnly {
            let _ = writeln!(s, "  (scan-only evidence is numerical, not a proof)");
        }
        let _ = writeln!(s, "- local tail condition: {}", compact(&cert.local_tail));
        let _ = writeln!(s, "- relies on: {}", compact(&cert.relies_on));
        for n in &cert.notes {
            let _ = writeln!(s, "- note: {n}");
        }
        let _ = writeln!(s, "- search trace: {} candidates tried", c.trace.len());
        if let Some(best) = best_trace(&c.trace) {
            let _ = writeln!(
                s,
                "  (largest margin {:.3e} at α = {}, x0 = {})",
                best.margin, best.alpha, best.x0
            );
        }
        s.push('\n');

        let _ = writeln!(s, "## Mixing\n");
        match &out.mixing {
            Some(m) if !m.flags.is_empty() => {
                for f in &m.flags {
                    let _ = writeln!(s, "- {}", name(f));
                }
            }
            _ => {
                let _ = writeln!(s, "- no mixing statement for this verdict");
            }
        }
        s.push('\n');

        let _ = writeln!(s, "## Rate bounds\n");
        match &cert.bound_constants {
            Some(b) => {
                let _ = writeln!(s, "- level: {}", name(&b.level));
                let _ = writeln!(
                    s,
                    "- sup LV on B(0, x0): {} at {:?} ({})",
                    b.sup_lv_on_ball, b.sup_argmax, b.sup_note
                );
                let _ = writeln!(s, "- π-moment bound: {}", b.pi_moment_bound);
                let t = &b.tv_prefactor;
                let _ = writeln!(s, "- TV bound: {}", t.description);
                let _ = writeln!(
                    s,
                    "  constants: β = {}, γ = {}, λ = {}, sup LV = {}",
                    t.beta, t.gamma, t.lambda, t.sup_lv
                );
                if !t.placeholders.is_empty() {
                    let _ = writeln!(s, "  unspecified constants: {}", t.placeholders.join(", "));
                }
            }
            None => {
                let _ = writeln!(s, "- none for this verdict");
            }
        }
        s.push('\n');
    }

    if let Some(sim) = &out.simulation {
        let c = &sim.config;
        let _ = writeln!(s, "## Simulation\n");
        let _ = writeln!(
            s,
            "- dt = {}, horizon = {}, paths = {}, small-jump cut = {}, seed = {}",
            c.dt, c.horizon, c.n_paths, c.small_jump_cut, c.seed
        );
        if let Some(h) = sim.hitting.as_ref().and_then(|h| h.hitting.as_ref()) {
            let _ = writeln!(
                s,
                "- hitting ({}, R = {}): P(τ ≤ T) = {:.4} ± {:.4}, E[τ; τ ≤ T] = {:.4} ± {:.4}, censored {:.3}, killed {:.3}",
                name(&h.mode),
                h.ball_radius,
                h.hit_prob.value,
                h.hit_prob.se,
                h.mean_hit_time.value,
                h.mean_hit_time.se,
                h.censored_fraction,
                h.killed_fraction
            );
            if let Some(m) = &h.exp_moment {
                let _ = writeln!(
                    s,
                    "  E[exp(λ(τ∧T))] with λ = {}: {:.4} ± {:.4}",
                    m.lambda, m.estimate.value, m.estimate.se
                );
            }
        }
        if let Some(tv) = &sim.tv {
            let _ = writeln!(
                s,
                "- TV curve: {} points, noise floor {:?}",
                tv.tv_curve.len(),
                tv.tv_noise_floor
            );
            let _ = writeln!(s, "  fitted rate: {}", fitted(&tv.fitted_rate));
        }
        if let Some(r) = &sim.return_diagnostic {
            let _ = writeln!(
                s,
                "- return fraction (tol {}, window {:?}): {:.4} ± {:.4} — {}",
                r.tol, r.window, r.fraction.value, r.fraction.se, r.note
            );
        }
        s.push('\n');
    }

    if let Some(v) = &out.verify {
        let _ = writeln!(s, "## Verification\n");
        let _ = writeln!(s, "- consistent: {}", v.consistent);
        for d in &v.discrepancies {
            let _ = writeln!(s, "- DISCREPANCY: {d}");
        }
        for n in &v.notes {
            let _ = writeln!(s, "- note: {n}");
        }
        s.push('\n');
    }
    s
}

/// The serialized name of a unit enum variant.
fn name<T: Serialize>(v: &T) -> String {
    match serde_json::to_value(v) {
        Ok(serde_json::Value::String(s)) => s,
        Ok(other) => other.to_string(),
        Err(_) => "?".into(),
    }
}

fn compact<T: Serialize>(v: &T) -> String {
    serde_json::to_string(v).unwrap_or_else(|_| "?".into())
}

fn best_trace(trace: &[TraceEntry]) -> Option<&TraceEntry> {
    trace
        .iter()
        .filter(|t| t.margin.is_finite())
        .max_by(|a, b| a.margin.total_cmp(&b.margin))
}

fn fitted(r: &Option<FittedRate>) -> String {
    match r {
        None => "not attempted".into(),
        Some(FittedRate::None { reason }) => format!("none ({reason})"),
        Some(FittedRate::Exponential { rate, ci, r_squared }) => {
            format!(
                "exponential, rate {rate:.4} (95% CI [{:.4}, {:.4}], R² = {r_squared:.3})",
                ci[0], ci[1]
            )
        }
        Some(FittedRate::Polynomial {
            exponent,
            ci,
            r_squared,
        }) => format!(
            "polynomial, exponent {exponent:.4} (95% CI [{:.4}, {:.4}], R² = {r_squared:.3})",
            ci[0], ci[1]
        ),
    }
}

use std::path::PathBuf;
use std::sync::Arc;

use levydrift_core::catalog::{self, LevyTriplet, SdeAssertions, StableLikeCoefficients, TripletJumps};
use levydrift_core::classifier::SearchConfig;
use levydrift_core::quadruple::{Atom, LevyMeasureSpec, LevyQuadruple, ScalarField, TailHint, VectorField};
use levydrift_core::simulator::SimConfig;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::expr::{parse_expression, Expr, Var};

pub const RUNSPEC_SCHEMA: &str = "levydrift.runspec/1";

/// A problem with the run specification; `field` is a dotted path into the
/// JSON document.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("invalid field `{field}`: {message}")]
pub struct SpecError {
    pub field: String,
    pub message: String,
}

impl SpecError {
    pub fn new(field: impl Into<String>, message: impl Into<String>) -> Self {
        SpecError {
            field: field.into(),
            message: message.into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    Validate,
    Classify,
    Simulate,
    Verify,
    Report,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSpec {
    pub schema: String,
    pub process: ProcessSpec,
    pub commands: Vec<Command>,
    #[serde(default)]
    pub search: SearchSpec,
    #[serde(default)]
    pub simulate: Option<SimulateSpec>,
    #[serde(default)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProcessSpec {
    #[serde(default)]
    pub catalog: Option<String>,
    #[serde(default)]
    pub params: Option<Value>,
    #[serde(default)]
    pub inline: Option<InlineProcess>,
}

/// A coefficient given either as a JSON number or as an expression string.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ExprSrc {
    Number(f64),
    Text(String),
}

impl ExprSrc {
    fn compile(&self, field: &str, dim: usize, allow_y: bool) -> Result<Expr, SpecError> {
        let text = match self {
            ExprSrc::Number(v) => format!("{v:e}"),
            ExprSrc::Text(s) => s.clone(),
        };
        let e = parse_expression(&text).map_err(|e| SpecError::new(field, e.to_string()))?;
        if e.max_index(Var::X) > dim {
            return Err(SpecError::new(
                field,
                format!("uses x{} but the process has dimension {dim}", e.max_index(Var::X)),
            ));
        }
        if e.uses(Var::Y) && !allow_y {
            return Err(SpecError::new(
                field,
                "jump variables y are only allowed in jump densities",
            ));
        }
        if e.max_index(Var::Y) > dim {
            return Err(SpecError::new(
                field,
                format!("uses y{} but the process has dimension {dim}", e.max_index(Var::Y)),
            ));
        }
        Ok(e)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AssertSpec {
    #[serde(default)]
    pub open_set_irreducible: bool,
    #[serde(default)]
    pub skeleton_chain: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InlineProcess {
    pub dim: usize,
    #[serde(default)]
    pub killing: Option<ExprSrc>,
    #[serde(default)]
    pub drift: Option<Vec<ExprSrc>>,
    /// Rows of the diffusion matrix.
    #[serde(default)]
    pub diffusion: Option<Vec<Vec<ExprSrc>>>,
    #[serde(default)]
    pub jumps: InlineJumps,
    #[serde(default)]
    pub asserts: AssertSpec,
    #[serde(default)]
    pub tail_hint: Option<TailHint>,
    #[serde(default)]
    pub label: Option<String>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InlineJumps {
    #[default]
    None,
    /// `γ(x) |y|^{-d-α(x)} dy`
    StableLike {
        alpha: ExprSrc,
        gamma: ExprSrc,
    },
    /// `density(x, y) dy`
    Density {
        density: String,
        #[serde(default)]
        tail_exponent: Option<f64>,
        #[serde(default)]
        isotropic: bool,
        #[serde(default)]
        state_independent: bool,
    },
    Atoms {
        atoms: Vec<InlineAtom>,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InlineAtom {
    pub y: Vec<f64>,
    pub mass: ExprSrc,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SearchSpec {
    #[serde(default)]
    pub alphas: Option<Vec<f64>>,
    #[serde(default)]
    pub x0s: Option<Vec<f64>>,
    #[serde(default)]
    pub poly_betas: Option<Vec<f64>>,
    #[serde(default)]
    pub margin_tol: Option<f64>,
    #[serde(default)]
    pub r_max: Option<f64>,
    #[serde(default)]
    pub directions: Option<usize>,
    #[serde(default)]
    pub n_radii: Option<usize>,
    #[serde(default)]
    pub accept_scan_only: Option<bool>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateSpec {
    #[serde(default)]
    pub dt: Option<f64>,
    #[serde(default)]
    pub horizon: Option<f64>,
    #[serde(default)]
    pub n_paths: Option<usize>,
    #[serde(default)]
    pub small_jump_cut: Option<f64>,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub worker_streams: Option<usize>,
    #[serde(default)]
    pub adaptive_kappa: Option<f64>,
    #[serde(default)]
    pub crossing_correction: Option<bool>,
    #[serde(default)]
    pub tasks: TasksSpec,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TasksSpec {
    #[serde(default)]
    pub hitting: Option<HittingTask>,
    #[serde(default)]
    pub tv: Option<TvTask>,
    #[serde(default, rename = "return")]
    pub return_to: Option<ReturnTask>,
}

impl TasksSpec {
    pub fn is_empty(&self) -> bool {
        self.hitting.is_none() && self.tv.is_none() && self.return_to.is_none()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HittingTask {
    pub start: Vec<f64>,
    pub radius: f64,
    #[serde(default)]
    pub lambda: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TvTask {
    pub x_a: Vec<f64>,
    pub x_b: Vec<f64>,
    pub times: Vec<f64>,
    #[serde(default = "default_bins")]
    pub bins: usize,
}

fn default_bins() -> usize {
    40
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReturnTask {
    pub x: Vec<f64>,
}

/// Command-line overrides applied on top of the document.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub margin_tol: Option<f64>,
    pub r_max: Option<f64>,
}

/// Parses and checks a run specification.
pub fn parse_runspec(text: &str) -> Result<RunSpec, SpecError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let spec: RunSpec = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let field = if path == "." { "<document>".to_string() } else { path };
        SpecError::new(field, e.into_inner().to_string())
    })?;
    check_runspec(&spec)?;
    Ok(spec)
}

pub fn check_runspec(spec: &RunSpec) -> Result<(), SpecError> {
    if spec.schema != RUNSPEC_SCHEMA {
        return Err(SpecError::new(
            "schema",
            format!("unsupported schema '{}' (expected '{RUNSPEC_SCHEMA}')", spec.schema),
        ));
    }
    if spec.commands.is_empty() {
        return Err(SpecError::new("commands", "at least one command is required"));
    }
    let p = &spec.process;
    match (&p.catalog, &p.inline) {
        (Some(_), Some(_)) => {
            return Err(SpecError::new("process", "give either `catalog` or `inline`, not both"));
        }
        (None, None) => return Err(SpecError::new("process", "one of `catalog` or `inline` is required")),
        (Some(name), None) => {
            if catalog::lookup(name).is_none() {
                return Err(SpecError::new(
                    "process.catalog",
                    format!(
                        "unknown catalog entry '{name}' (known: {})",
                        catalog::ENTRY_NAMES.join(", ")
                    ),
                ));
            }
        }
        (None, Some(_)) => {
            if p.params.is_some() {
                return Err(SpecError::new(
                    "process.params",
                    "`params` only applies to catalog processes",
                ));
            }
        }
    }
    let needs_sim = spec
        .commands
        .iter()
        .any(|c| matches!(c, Command::Simulate | Command::Verify));
    if needs_sim && spec.simulate.is_none() {
        return Err(SpecError::new(
            "simulate",
            "the simulate and verify commands need a `simulate` section",
        ));
    }
    if spec.commands.contains(&Command::Simulate) && spec.simulate.as_ref().is_some_and(|s| s.tasks.is_empty()) {
        return Err(SpecError::new(
            "simulate.tasks",
            "the simulate command needs at least one task",
        ));
    }
    Ok(())
}

impl SearchSpec {
    pub fn to_config(&self, ov: &Overrides) -> Result<SearchConfig, SpecError> {
        let mut cfg = SearchConfig::default();
        if let Some(a) = &self.alphas {
            cfg.alphas = a.clone();
        }
        if let Some(x) = &self.x0s {
            cfg.x0s = x.clone();
        }
        if let Some(b) = &self.poly_betas {
            cfg.poly_betas = b.clone();
        }
        if let Some(v) = ov.margin_tol.or(self.margin_tol) {
            cfg.scan.margin_tol = v;
        }
        if let Some(v) = ov.r_max.or(self.r_max) {
            cfg.scan.r_max = Some(v);
        }
        if let Some(v) = self.directions {
            cfg.scan.directions = Some(v);
        }
        if let Some(v) = self.n_radii {
            cfg.scan.n_radii = v;
        }
        if let Some(v) = self.accept_scan_only {
            cfg.scan.accept_scan_only = v;
        }
        if cfg.alphas.is_empty() || cfg.alphas.iter().any(|a| !(*a >= 0.0 && a.is_finite())) {
            return Err(SpecError::new("search.alphas", "need a non-empty list of finite α ≥ 0"));
        }
        if cfg.x0s.is_empty() || cfg.x0s.iter().any(|x| !(*x > 1.0 && x.is_finite())) {
            return Err(SpecError::new("search.x0s", "need a non-empty list of finite x0 > 1"));
        }
        if !(cfg.scan.margin_tol >= 0.0 && cfg.scan.margin_tol.is_finite()) {
            return Err(SpecError::new("search.margin_tol", "must be finite and non-negative"));
        }
        for &x0 in &cfg.x0s {
            cfg.scan
                .check(x0)
                .map_err(|e| SpecError::new("search", e.to_string()))?;
        }
        Ok(cfg)
    }
}

impl SimulateSpec {
    pub fn to_config(&self, ov: &Overrides) -> Result<SimConfig, SpecError> {
        let d = SimConfig::default();
        let cfg = SimConfig {
            dt: self.dt.unwrap_or(d.dt),
            horizon: self.horizon.unwrap_or(d.horizon),
            n_paths: self.n_paths.unwrap_or(d.n_paths),
            small_jump_cut: self.small_jump_cut.unwrap_or(d.small_jump_cut),
            seed: ov.seed.or(self.seed).unwrap_or(d.seed),
            worker_streams: self.worker_streams.unwrap_or(d.worker_streams),
            adaptive_kappa: self.adaptive_kappa.or(d.adaptive_kappa),
            crossing_correction: self.crossing_correction.unwrap_or(d.crossing_correction),
        };
        cfg.check().map_err(|e| SpecError::new("simulate", e.to_string()))?;
        Ok(cfg)
    }

    pub fn check_tasks(&self, dim: usize) -> Result<(), SpecError> {
        let point = |field: &str, p: &[f64]| {
            if p.len() != dim || p.iter().any(|v| !v.is_finite()) {
                Err(SpecError::new(field, format!("need {dim} finite coordinates")))
            } else {
                Ok(())
            }
        };
        if let Some(h) = &self.tasks.hitting {
            point("simulate.tasks.hitting.start", &h.start)?;
            if !(h.radius > 0.0 && h.radius.is_finite()) {
                return Err(SpecError::new("simulate.tasks.hitting.radius", "must be positive"));
            }
            if h.lambda.is_some_and(|l| !(l > 0.0 && l.is_finite())) {
                return Err(SpecError::new("simulate.tasks.hitting.lambda", "must be positive"));
            }
        }
        if let Some(t) = &self.tasks.tv {
            point("simulate.tasks.tv.x_a", &t.x_a)?;
            point("simulate.tasks.tv.x_b", &t.x_b)?;
            if t.times.is_empty() || t.times.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
                return Err(SpecError::new(
                    "simulate.tasks.tv.times",
                    "need a non-empty list of positive times",
                ));
            }
            if t.bins < 2 {
                return Err(SpecError::new("simulate.tasks.tv.bins", "need at least 2 bins"));
            }
        }
        if let Some(r) = &self.tasks.return_to {
            point("simulate.tasks.return.x", &r.x)?;
        }
        Ok(())
    }
}

/// Points at which coefficient expressions are evaluated once up front, so
/// that domain errors are reported against the offending field.
pub fn probe_points(dim: usize) -> Vec<Vec<f64>> {
    let mut pts = vec![vec![0.0; dim]];
    for &s in &[0.5, 2.0, 10.0, 1e3] {
        for i in 0..dim {
            for sign in [1.0, -1.0] {
                let mut p = vec![0.0; dim];
                p[i] = sign * s;
                pts.push(p);
            }
        }
    }
    pts.push((0..dim).map(|i| 3.0 + 0.7 * i as f64).collect());
    pts
}

fn jump_probes(dim: usize) -> Vec<Vec<f64>> {
    probe_points(dim)
        .into_iter()
        .skip(1)
        .filter(|p| p.iter().any(|v| v.abs() <= 10.0))
        .collect()
}

fn fmt_point(p: &[f64]) -> String {
    let parts: Vec<String> = p.iter().map(|v| format!("{v}")).collect();
    format!("[{}]", parts.join(", "))
}

fn probe_scalar(e: &Expr, field: &str, dim: usize) -> Result<(), SpecError> {
    for x in probe_points(dim) {
        let v = e.eval(&x);
        if !v.is_finite() {
            return Err(SpecError::new(
                field,
                format!("evaluates to {v} at x = {}", fmt_point(&x)),
            ));
        }
    }
    Ok(())
}

fn probe_density(e: &Expr, field: &str, dim: usize) -> Result<(), SpecError> {
    for x in probe_points(dim) {
        for y in jump_probes(dim) {
            let v = e.eval_xy(&x, &y);
            if !(v.is_finite() && v >= 0.0) {
                return Err(SpecError::new(
                    field,
                    format!("density is {v} at x = {}, y = {}", fmt_point(&x), fmt_point(&y)),
                ));
            }
        }
    }
    Ok(())
}

fn scalar(src: &ExprSrc, field: &str, dim: usize) -> Result<(Expr, ScalarField), SpecError> {
    let e = src.compile(field, dim, false)?;
    probe_scalar(&e, field, dim)?;
    let f = e.clone();
    Ok((e, Arc::new(move |x: &[f64]| f.eval(x))))
}

fn vector(srcs: &[ExprSrc], field: &str, dim: usize) -> Result<VectorField, SpecError> {
    if srcs.len() != dim {
        return Err(SpecError::new(
            field,
            format!("need {dim} components, got {}", srcs.len()),
        ));
    }
    let es = srcs
        .iter()
        .enumerate()
        .map(|(i, s)| scalar(s, &format!("{field}[{i}]"), dim).map(|p| p.0))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Arc::new(move |x: &[f64]| es.iter().map(|e| e.eval(x)).collect()))
}

fn check_dim(dim: usize, field: &str) -> Result<(), SpecError> {
    catalog::geometry(dim)
        .map(|_| ())
        .map_err(|e| SpecError::new(field, e.to_string()))
}

fn square_matrix(rows: &[Vec<f64>], dim: usize, field: &str) -> Result<Vec<f64>, SpecError> {
    if rows.len() != dim || rows.iter().any(|r| r.len() != dim) {
        return Err(SpecError::new(field, format!("need a {dim}×{dim} matrix")));
    }
    Ok(rows.concat())
}

fn deserialize_params<T: for<'de> Deserialize<'de>>(v: Option<&Value>) -> Result<T, SpecError> {
    let v = v.cloned().unwrap_or(Value::Object(Default::default()));
    serde_path_to_error::deserialize(v).map_err(|e| {
        let path = e.path().to_string();
        let field = if path == "." {
            "process.params".to_string()
        } else {
            format!("process.params.{path}")
        };
        SpecError::new(field, e.into_inner().to_string())
    })
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct BrownianParams {
    dim: usize,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct StableParams {
    dim: usize,
    alpha: f64,
    #[serde(default = "one")]
    gamma: f64,
}

fn one() -> f64 {
    1.0
}

fn one_expr() -> ExprSrc {
    ExprSrc::Number(1.0)
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct StableLikeParams {
    dim: usize,
    alpha: ExprSrc,
    #[serde(default)]
    beta: Option<Vec<ExprSrc>>,
    #[serde(default = "one_expr")]
    gamma: ExprSrc,
    #[serde(default)]
    tail_hint: Option<TailHint>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct OuParams {
    dim: usize,
    q: Vec<Vec<f64>>,
    triplet: TripletSpec,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SdeJumpParams {
    dim: usize,
    phi: ExprSrc,
    psi: Vec<ExprSrc>,
    triplet: TripletSpec,
    #[serde(default)]
    asserts: AssertSpec,
    #[serde(default)]
    tail_hint: Option<TailHint>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TripletSpec {
    #[serde(default)]
    pub b: Option<Vec<f64>>,
    #[serde(default)]
    pub c: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    pub jumps: TripletJumpsSpec,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TripletJumpsSpec {
    #[default]
    None,
    Stable {
        alpha: f64,
        #[serde(default = "one")]
        gamma: f64,
    },
    Atoms {
        atoms: Vec<TripletAtom>,
    },
    /// Density in the jump variable `y` only.
    Density {
        density: String,
        #[serde(default)]
        tail_exponent: Option<f64>,
        #[serde(default)]
        isotropic: bool,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TripletAtom {
    pub y: Vec<f64>,
    pub mass: f64,
}

impl TripletSpec {
    fn build(&self, dim: usize, field: &str) -> Result<LevyTriplet, SpecError> {
        let b = self.b.clone().unwrap_or_else(|| vec![0.0; dim]);
        if b.len() != dim {
            return Err(SpecError::new(format!("{field}.b"), format!("need {dim} components")));
        }
        let c = match &self.c {
            Some(rows) => square_matrix(rows, dim, &format!("{field}.c"))?,
            None => vec![0.0; dim * dim],
        };
        let jf = format!("{field}.jumps");
        let jumps = match &self.jumps {
            TripletJumpsSpec::None => TripletJumps::None,
            TripletJumpsSpec::Stable { alpha, gamma } => TripletJumps::Stable {
                alpha: *alpha,
                gamma: *gamma,
            },
            TripletJumpsSpec::Atoms { atoms } => {
                for (i, a) in atoms.iter().enumerate() {
                    if a.y.len() != dim {
                        return Err(SpecError::new(
                            format!("{jf}.atoms[{i}].y"),
                            format!("need {dim} components"),
                        ));
                    }
                }
                TripletJumps::Atoms(atoms.iter().map(|a| (a.y.clone(), a.mass)).collect())
            }
            TripletJumpsSpec::Density {
                density,
                tail_exponent,
                isotropic,
            } => {
                let df = format!("{jf}.density");
                let e = ExprSrc::Text(density.clone()).compile(&df, dim, true)?;
                if e.uses(Var::X) {
                    return Err(SpecError::new(df, "a Lévy triplet density depends on y only"));
                }
                probe_density(&e, &df, dim)?;
                TripletJumps::Density {
                    density: Arc::new(move |y: &[f64]| e.eval_xy(&[], y)),
                    tail_exponent: *tail_exponent,
                    isotropic: *isotropic,
                }
            }
        };
        Ok(LevyTriplet { b, c, jumps })
    }
}

fn core_err(field: &str) -> impl Fn(levydrift_core::LevyError) -> SpecError + '_ {
    move |e| SpecError::new(field, e.to_string())
}

impl ProcessSpec {
    /// The in-memory quadruple described by this section.
    pub fn build(&self) -> Result<LevyQuadruple, SpecError> {
        if let Some(inline) = &self.inline {
            return inline.build();
        }
        let name = self
            .catalog
            .as_deref()
            .ok_or_else(|| SpecError::new("process", "one of `catalog` or `inline` is required"))?;
        let params = self.params.as_ref();
        let pf = "process.params";
        match name {
            "brownian" => {
                let p: BrownianParams = deserialize_params(params)?;
                check_dim(p.dim, "process.params.dim")?;
                catalog::brownian(p.dim).map_err(core_err(pf))
            }
            "stable" => {
                let p: StableParams = deserialize_params(params)?;
                check_dim(p.dim, "process.params.dim")?;
                catalog::stable(p.dim, p.alpha, p.gamma).map_err(core_err(pf))
            }
            "stable_like" => {
                let p: StableLikeParams = deserialize_params(params)?;
                check_dim(p.dim, "process.params.dim")?;
                let d = p.dim;
                let (_, alpha) = scalar(&p.alpha, "process.params.alpha", d)?;
                let (_, gamma) = scalar(&p.gamma, "process.params.gamma", d)?;
                let beta = match &p.beta {
                    Some(b) => vector(b, "process.params.beta", d)?,
                    None => Arc::new(move |_: &[f64]| vec![0.0; d]) as VectorField,
                };
                let coeffs = StableLikeCoefficients {
                    dim: d,
                    alpha,
                    beta,
                    gamma,
                };
                catalog::stable_like(&coeffs, p.tail_hint).map_err(core_err(pf))
            }
            "ou" => {
                let p: OuParams = deserialize_params(params)?;
                check_dim(p.dim, "process.params.dim")?;
                let q = square_matrix(&p.q, p.dim, "process.params.q")?;
                let t = p.triplet.build(p.dim, "process.params.triplet")?;
                catalog::ou(p.dim, &q, &t).map_err(core_err(pf))
            }
            "sde_jump" => {
                let p: SdeJumpParams = deserialize_params(params)?;
                check_dim(p.dim, "process.params.dim")?;
                let (_, phi) = scalar(&p.phi, "process.params.phi", p.dim)?;
                let psi = vector(&p.psi, "process.params.psi", p.dim)?;
                let t = p.triplet.build(p.dim, "process.params.triplet")?;
                let asserts = SdeAssertions {
                    open_set_irreducible: p.asserts.open_set_irreducible,
                    skeleton_chain: p.asserts.skeleton_chain,
                };
                catalog::sde_jump(p.dim, phi, psi, &t, asserts, p.tail_hint).map_err(core_err(pf))
            }
            other => Err(SpecError::new(
                "process.catalog",
                format!(
                    "unknown catalog entry '{other}' (known: {})",
                    catalog::ENTRY_NAMES.join(", ")
                ),
            )),
        }
    }
}

impl InlineProcess {
    pub fn build(&self) -> Result<LevyQuadruple, SpecError> {
        let d = self.dim;
        check_dim(d, "process.inline.dim")?;
        let mut q = LevyQuadruple::null(d);
        if let Some(k) = &self.killing {
            q.killing = scalar(k, "process.inline.killing", d)?.1;
        }
        if let Some(b) = &self.drift {
            q.drift = vector(b, "process.inline.drift", d)?;
        }
        if let Some(rows) = &self.diffusion {
            if rows.len() != d || rows.iter().any(|r| r.len() != d) {
                return Err(SpecError::new(
                    "process.inline.diffusion",
                    format!("need a {d}×{d} matrix"),
                ));
            }
            let flat: Vec<ExprSrc> = rows.concat();
            let es = flat
                .iter()
                .enumerate()
                .map(|(k, s)| scalar(s, &format!("process.inline.diffusion[{}][{}]", k / d, k % d), d).map(|p| p.0))
                .collect::<Result<Vec<_>, _>>()?;
            q.diffusion = Arc::new(move |x: &[f64]| es.iter().map(|e| e.eval(x)).collect());
        }
        q.jumps = self.jumps.build(d)?;
        q.asserts_open_set_irreducible = self.asserts.open_set_irreducible;
        q.asserts_skeleton_chain = self.asserts.skeleton_chain;
        q.tail_hint = self.tail_hint;
        q.label = self.label.clone().unwrap_or_else(|| format!("inline({d})"));
        Ok(q)
    }
}

impl InlineJumps {
    fn build(&self, d: usize) -> Result<LevyMeasureSpec, SpecError> {
        let jf = "process.inline.jumps";
        Ok(match self {
            InlineJumps::None => LevyMeasureSpec::zero(),
            InlineJumps::StableLike { alpha, gamma } => {
                let af = format!("{jf}.alpha");
                let gf = format!("{jf}.gamma");
                let (ae, a) = scalar(alpha, &af, d)?;
                let (ge, g) = scalar(gamma, &gf, d)?;
                for x in probe_points(d) {
                    let (av, gv) = (a(&x), g(&x));
                    if !(av > 0.0 && av < 2.0) {
                        return Err(SpecError::new(
                            af,
                            format!("α = {av} outside (0, 2) at x = {}", fmt_point(&x)),
                        ));
                    }
                    if gv.is_nan() || gv <= 0.0 {
                        return Err(SpecError::new(
                            gf,
                            format!("γ = {gv} not positive at x = {}", fmt_point(&x)),
                        ));
                    }
                }
                match (ae.constant_value(), ge.constant_value()) {
                    (Some(av), Some(gv)) => LevyMeasureSpec::stable(av, gv),
                    _ => LevyMeasureSpec::StableLike { alpha: a, gamma: g },
                }
            }
            InlineJumps::Density {
                density,
                tail_exponent,
                isotropic,
                state_independent,
            } => {
                let df = format!("{jf}.density");
                let e = ExprSrc::Text(density.clone()).compile(&df, d, true)?;
                if *state_independent && e.uses(Var::X) {
                    return Err(SpecError::new(df, "a state-independent density may not use x"));
                }
                probe_density(&e, &df, d)?;
                let inner = LevyMeasureSpec::GeneralDensity {
                    density: Arc::new(move |x: &[f64], y: &[f64]| e.eval_xy(x, y)),
                    tail_exponent: *tail_exponent,
                    isotropic: *isotropic,
                };
                if *state_independent {
                    LevyMeasureSpec::StateIndependent(Box::new(inner))
                } else {
                    inner
                }
            }
            InlineJumps::Atoms { atoms } => {
                let mut out = Vec::with_capacity(atoms.len());
                for (i, a) in atoms.iter().enumerate() {
                    let f = format!("{jf}.atoms[{i}]");
                    if a.y.len() != d {
                        return Err(SpecError::new(format!("{f}.y"), format!("need {d} components")));
                    }
                    let (e, mass) = scalar(&a.mass, &format!("{f}.mass"), d)?;
                    if probe_points(d).iter().any(|x| e.eval(x) < 0.0) {
                        return Err(SpecError::new(format!("{f}.mass"), "atom masses must be non-negative"));
                    }
                    out.push(Atom { y: a.y.clone(), mass });
                }
                LevyMeasureSpec::FiniteAtoms(out)
            }
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn doc(process: &str, extra: &str) -> String {
        format!(r#"{{"schema": "{RUNSPEC_SCHEMA}", "process": {process}, "commands": ["classify"]{extra}}}"#)
    }

    #[test]
    fn unknown_catalog_names_the_field() {
        let e = parse_runspec(&doc(r#"{"catalog": "levy_flight"}"#, "")).unwrap_err();
        assert_eq!(e.field, "process.catalog");
        assert!(e.message.contains("levy_flight"));
    }

    #[test]
    fn serde_errors_carry_path_and_position() {
        let e = parse_runspec(&doc(r#"{"catalog": "brownian"}"#, r#", "search": {"alphas": "x"}"#)).unwrap_err();
        assert_eq!(e.field, "search.alphas");
        assert!(e.message.contains("line 1"), "{}", e.message);
        let e = parse_runspec(&format!(
            r#"{{"schema": "{RUNSPEC_SCHEMA}", "process": {{}}, "commands": []}}"#
        ))
        .unwrap_err();
        assert_eq!(e.field, "commands");
    }

    #[test]
    fn bad_params_are_reported_under_process_params() {
        let s = parse_runspec(&doc(r#"{"catalog": "stable", "params": {"dim": 2}}"#, "")).unwrap();
        let e = s.process.build().unwrap_err();
        assert_eq!(e.field, "process.params");
        assert!(e.message.contains("alpha"));
        let s = parse_runspec(&doc(r#"{"catalog": "brownian", "params": {"dim": 2, "sigma": 1}}"#, "")).unwrap();
        assert!(s.process.build().unwrap_err().message.contains("sigma"));
    }

    #[test]
    fn simulate_without_tasks_is_rejected() {
        let text = format!(
            r#"{{"schema": "{RUNSPEC_SCHEMA}", "process": {{"catalog": "brownian", "params": {{"dim": 1}}}},
               "commands": ["simulate"], "simulate": {{"n_paths": 10}}}}"#
        );
        assert_eq!(parse_runspec(&text).unwrap_err().field, "simulate.tasks");
    }

    #[test]
    fn inline_stable_like_alpha_range() {
        let text = doc(
            r#"{"inline": {"dim": 1, "jumps": {"kind": "stable_like", "alpha": "1.5 + 0.3*sin(x1)", "gamma": 1}}}"#,
            "",
        );
        let q = parse_runspec(&text).unwrap().process.build().unwrap();
        match &q.jumps {
            LevyMeasureSpec::StableLike { alpha, .. } => {
                for i in 0..2001 {
                    let x = -100.0 + 0.1 * i as f64;
                    let a = alpha(&[x]);
                    assert!((1.2..=1.8).contains(&a));
                }
            }
            _ => panic!("expected a state-dependent stable-like kernel"),
        }
    }

    #[test]
    fn domain_errors_surface_at_first_probe() {
        let text = doc(r#"{"inline": {"dim": 1, "drift": ["ln(x1)"]}}"#, "");
        let e = parse_runspec(&text).unwrap().process.build().unwrap_err();
        assert_eq!(e.field, "process.inline.drift[0]");
        assert!(e.message.contains("x = [0]"), "{}", e.message);
        let text = doc(r#"{"inline": {"dim": 1, "drift": ["x2"]}}"#, "");
        let e = parse_runspec(&text).unwrap().process.build().unwrap_err();
        assert!(e.message.contains("dimension 1"));
        let text = doc(r#"{"inline": {"dim": 1, "drift": ["1.5 +"]}}"#, "");
        let e = parse_runspec(&text).unwrap().process.build().unwrap_err();
        assert!(e.message.contains("offset 5"));
    }

    #[test]
    fn catalog_processes_build() {
        let cases = [
            r#"{"catalog": "brownian", "params": {"dim": 3}}"#,
            r#"{"catalog": "stable", "params": {"dim": 2, "alpha": 1.2}}"#,
            r#"{"catalog": "stable_like", "params": {"dim": 1, "alpha": "1.5 + 0.3*sin(x1)", "beta": [0]}}"#,
            r#"{"catalog": "ou", "params": {"dim": 1, "q": [[1]], "triplet": {"c": [[1]]}}}"#,
            r#"{"catalog": "sde_jump", "params": {"dim": 1, "phi": 1, "psi": ["-x1"],
                "triplet": {"jumps": {"kind": "density", "density": "exp(-|y|)", "isotropic": true}},
                "asserts": {"open_set_irreducible": true}}}"#,
        ];
        for c in cases {
            let s = parse_runspec(&doc(c, "")).unwrap();
            s.process.build().unwrap_or_else(|e| panic!("{c}: {e}"));
        }
    }
}

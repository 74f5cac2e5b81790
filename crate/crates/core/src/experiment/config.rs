use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use toml::{Table, Value};

use super::ExperimentError;
use crate::imaging::StartPoint;
use crate::potentials::GinzburgLandauParams;
use crate::prox::{PdhgSettings, ProxSolver};
use crate::samplers::{ProxFailurePolicy, Taming};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Example1,
    Example2,
    Example3,
    Theory,
    Custom,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Example1 => "example1",
            ExperimentKind::Example2 => "example2",
            ExperimentKind::Example3 => "example3",
            ExperimentKind::Theory => "theory",
            ExperimentKind::Custom => "custom",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplerKind {
    Ipla,
    Ula,
    Tula,
    Mh,
}

impl SamplerKind {
    pub fn name(self) -> &'static str {
        match self {
            SamplerKind::Ipla => "ipla",
            SamplerKind::Ula => "ula",
            SamplerKind::Tula => "tula",
            SamplerKind::Mh => "mh",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PotentialKind {
    Gaussian,
    Quartic,
    GinzburgLandau,
    Deconvolution,
}

/// Starting point of every chain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    /// `7 * 1_d`, or `(100, 0, ..., 0)` for Ginzburg–Landau; the observed
    /// image for deconvolution.
    Tail,
    /// The potential's minimizer (zero if unknown); the MAP estimate for
    /// deconvolution.
    Minimizer,
}

impl Scenario {
    pub fn name(self) -> &'static str {
        match self {
            Scenario::Tail => "tail",
            Scenario::Minimizer => "minimizer",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProxConfig {
    pub solver: ProxSolver,
    pub kappa: f64,
    pub alpha: f64,
    pub max_iterations: usize,
    /// Absolute accuracy overriding `kappa * tau^(1 + alpha)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    pub failure_policy: ProxFailurePolicy,
    #[serde(default)]
    pub pdhg: PdhgSettings,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ImagingConfig {
    pub side: usize,
    pub depth: usize,
    pub sigma: f64,
    pub beta: f64,
    pub intensity_scale: f64,
    pub map_iterations: usize,
    pub quantiles: Vec<f64>,
    pub failure_tolerance: f64,
}

impl Default for ImagingConfig {
    fn default() -> Self {
        Self {
            side: 64,
            depth: 9,
            sigma: 0.5,
            beta: 0.03,
            intensity_scale: 255.0,
            map_iterations: 3000,
            quantiles: vec![0.05, 0.25, 0.5, 0.75, 0.95],
            failure_tolerance: 0.05,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TheoryConfig {
    /// Accuracy targets for the KL and W2 budgets.
    pub eps: Vec<f64>,
    /// Upper bound on `W_2^2(rho_0, mu*)`.
    pub w2_init: f64,
}

impl Default for TheoryConfig {
    fn default() -> Self {
        Self {
            eps: vec![0.1, 0.01],
            w2_init: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProxBenchConfig {
    /// Number of random prox centres per accuracy level.
    pub points: usize,
    /// Largest accuracy target; each further level halves it.
    pub delta_max: f64,
    pub halvings: u32,
    /// Standard deviation of the random centres.
    pub x_scale: f64,
}

impl Default for ProxBenchConfig {
    fn default() -> Self {
        Self {
            points: 10,
            delta_max: 1e-2,
            halvings: 10,
            x_scale: 2.0,
        }
    }
}

/// Fully resolved experiment configuration; this is what gets echoed to
/// `config.toml` in the output directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub sampler: SamplerKind,
    pub potential: PotentialKind,
    pub d: usize,
    pub tau: f64,
    pub n_steps: u64,
    pub burn_in: u64,
    /// Interval between stored samples (deconvolution quantiles).
    pub thinning: u64,
    /// Interval between rows of the per-chain CSV.
    pub trace_every: u64,
    pub replicas: usize,
    pub base_seed: u64,
    pub scenario: Scenario,
    /// Output directory, relative to the output root unless absolute.
    pub output: PathBuf,
    /// Worker threads for replicas; 0 uses the available parallelism.
    pub workers: usize,
    pub taming: Taming,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub proposal_std: Option<f64>,
    /// Length of the Metropolis–Hastings reference run used as the truth
    /// when no analytic oracle exists; 0 disables it.
    pub reference_steps: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q_v: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda_v: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r_v: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c_v: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub l_q: Option<f64>,
    pub prox: ProxConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ginzburg_landau: Option<GinzburgLandauParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub imaging: Option<ImagingConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theory: Option<TheoryConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prox_bench: Option<ProxBenchConfig>,
}

const COMMON: &str = r#"
trace_every = 100
thinning = 1
replicas = 1
base_seed = 0
workers = 0
scenario = "tail"
taming = "tau"
reference_steps = 0

[prox]
kappa = 1.0
alpha = 1.0
max_iterations = 10000
failure_policy = "diverge"
"#;

const EXAMPLE1: &str = r#"
sampler = "ipla"
potential = "quartic"
d = 10
tau = 0.1
n_steps = 100000
burn_in = 10000
replicas = 20

[prox]
solver = "exact"
"#;

const EXAMPLE2: &str = r#"
sampler = "ipla"
potential = "ginzburg_landau"
tau = 0.005
n_steps = 20000
burn_in = 2000
replicas = 10
reference_steps = 1000000

[prox]
solver = "newton"

[ginzburg_landau]
q = 3
"#;

const EXAMPLE3: &str = r#"
sampler = "ipla"
potential = "deconvolution"
tau = 0.1
n_steps = 550
burn_in = 50
trace_every = 50
scenario = "minimizer"

[prox]
solver = "pdhg"
delta = 0.1
max_iterations = 500
failure_policy = "tolerate"

[imaging]
"#;

const THEORY: &str = r#"
sampler = "ipla"
potential = "quartic"
d = 10
tau = 0.01
n_steps = 1
burn_in = 0

[theory]
"#;

/// Defaults for `prox-bench`: gradient-descent prox on the quartic in
/// d = 100 at tau = 0.1.
pub const PROX_BENCH_DEFAULTS: &str = r#"
experiment = "custom"
output = "runs/prox_bench"
sampler = "ipla"
potential = "quartic"
d = 100
tau = 0.1
n_steps = 1
burn_in = 0

[prox]
solver = "gd"
max_iterations = 1000000

[prox_bench]
"#;

fn preset(kind: ExperimentKind) -> &'static str {
    match kind {
        ExperimentKind::Example1 => EXAMPLE1,
        ExperimentKind::Example2 => EXAMPLE2,
        ExperimentKind::Example3 => EXAMPLE3,
        ExperimentKind::Theory => THEORY,
        ExperimentKind::Custom => "",
    }
}

fn parse_table(text: &str, origin: &str) -> Result<Table, ExperimentError> {
    text.parse::<Table>()
        .map_err(|e| ExperimentError::Config(format!("{origin}: {e}")))
}

/// `a` overlaid with `b`: tables merge recursively, other values replace.
fn merge(a: &mut Table, b: Table) {
    for (k, v) in b {
        match (a.get_mut(&k), v) {
            (Some(Value::Table(at)), Value::Table(bt)) => merge(at, bt),
            (_, v) => {
                a.insert(k, v);
            }
        }
    }
}

/// Parses `--key value` pairs. Keys may be dotted (`--prox.kappa 2`);
/// hyphens become underscores (`--q-v 3` sets `q_v`). Values are read as
/// TOML (`3`, `0.1`, `true`, `[0.1, 0.5]`) and fall back to bare strings.
pub fn parse_overrides(args: &[String]) -> Result<Vec<(String, Value)>, ExperimentError> {
    let mut out = Vec::new();
    let mut it = args.iter();
    while let Some(flag) = it.next() {
        let key = flag
            .strip_prefix("--")
            .filter(|k| !k.is_empty())
            .ok_or_else(|| ExperimentError::Config(format!("expected a --key flag, found `{flag}`")))?;
        let (key, raw) = match key.split_once('=') {
            Some((k, v)) => (k.to_string(), v.to_string()),
            None => {
                let v = it
                    .next()
                    .ok_or_else(|| ExperimentError::Config(format!("flag `--{key}` needs a value")))?;
                (key.to_string(), v.clone())
            }
        };
        out.push((key.replace('-', "_"), parse_value(&raw)));
    }
    Ok(out)
}

fn parse_value(raw: &str) -> Value {
    format!("v = {raw}")
        .parse::<Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| Value::String(raw.to_string()))
}

fn set_dotted(table: &mut Table, key: &str, value: Value) -> Result<(), ExperimentError> {
    let mut parts: Vec<&str> = key.split('.').collect();
    let last = parts.pop().expect("split yields at least one part");
    let mut cur = table;
    for p in parts {
        let entry = cur.entry(p.to_string()).or_insert_with(|| Value::Table(Table::new()));
        cur = match entry {
            Value::Table(t) => t,
            _ => return Err(ExperimentError::Config(format!("`{p}` in `{key}` is not a table"))),
        };
    }
    cur.insert(last.to_string(), value);
    Ok(())
}

/// Layered configuration: built-in defaults, then the experiment preset,
/// then caller defaults, then a config file, then command-line overrides.
#[derive(Debug, Default, Clone)]
pub struct ConfigBuilder {
    defaults: Table,
    user: Table,
}

impl ConfigBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    /// Extra defaults that sit above the preset but below the user layers.
    pub fn defaults(mut self, toml_text: &str) -> Result<Self, ExperimentError> {
        merge(&mut self.defaults, parse_table(toml_text, "defaults")?);
        Ok(self)
    }

    pub fn file(mut self, path: &Path) -> Result<Self, ExperimentError> {
        let text = std::fs::read_to_string(path).map_err(|e| ExperimentError::io(path, e))?;
        merge(&mut self.user, parse_table(&text, &path.display().to_string())?);
        Ok(self)
    }

    pub fn text(mut self, toml_text: &str) -> Result<Self, ExperimentError> {
        merge(&mut self.user, parse_table(toml_text, "config")?);
        Ok(self)
    }

    pub fn overrides(mut self, pairs: Vec<(String, Value)>) -> Result<Self, ExperimentError> {
        for (k, v) in pairs {
            set_dotted(&mut self.user, &k, v)?;
        }
        Ok(self)
    }

    pub fn build(self) -> Result<ExperimentConfig, ExperimentError> {
        let kind_value = self
            .user
            .get("experiment")
            .or_else(|| self.defaults.get("experiment"))
            .cloned()
            .ok_or_else(|| ExperimentError::Config("missing required key `experiment`".into()))?;
        let kind: ExperimentKind = kind_value
            .try_into()
            .map_err(|e| ExperimentError::Config(format!("invalid value for key `experiment`: {e}")))?;
        let mut table = parse_table(COMMON, "built-in defaults")?;
        merge(&mut table, parse_table(preset(kind), kind.name())?);
        merge(&mut table, self.defaults);
        merge(&mut table, self.user);
        derive_keys(&mut table, kind)?;
        let missing: Vec<&str> = REQUIRED
            .iter()
            .copied()
            .filter(|k| lookup(&table, k).is_none())
            .collect();
        if !missing.is_empty() {
            let keys: Vec<String> = missing.iter().map(|k| format!("`{k}`")).collect();
            return Err(ExperimentError::Config(format!(
                "missing required key{} {}",
                if keys.len() > 1 { "s" } else { "" },
                keys.join(", ")
            )));
        }
        let cfg: ExperimentConfig = Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| ExperimentError::Config(format!("invalid configuration: {}", e.message())))?;
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Keys that no built-in layer supplies for a custom experiment.
const REQUIRED: [&str; 7] = ["sampler", "potential", "d", "tau", "n_steps", "burn_in", "prox.solver"];

fn lookup<'a>(t: &'a Table, dotted: &str) -> Option<&'a Value> {
    let mut parts = dotted.split('.');
    let mut v = t.get(parts.next()?)?;
    for p in parts {
        v = v.as_table()?.get(p)?;
    }
    Some(v)
}

/// Fills keys whose defaults depend on other keys.
fn derive_keys(t: &mut Table, kind: ExperimentKind) -> Result<(), ExperimentError> {
    t.entry("output")
        .or_insert_with(|| Value::String(format!("runs/{}", kind.name())));
    let potential = t.get("potential").and_then(Value::as_str).map(str::to_string);
    let section = |t: &mut Table, name: &str| {
        t.entry(name.to_string()).or_insert_with(|| Value::Table(Table::new()));
    };
    let derived_d = match potential.as_deref() {
        Some("ginzburg_landau") => {
            section(t, "ginzburg_landau");
            let q = t["ginzburg_landau"]
                .get("q")
                .and_then(Value::as_integer)
                .unwrap_or(GinzburgLandauParams::default().q as i64);
            Some(("ginzburg_landau.q^3", q.checked_pow(3)))
        }
        Some("deconvolution") => {
            section(t, "imaging");
            let side = t["imaging"]
                .get("side")
                .and_then(Value::as_integer)
                .unwrap_or(ImagingConfig::default().side as i64);
            Some(("imaging.side^2", side.checked_pow(2)))
        }
        _ => None,
    };
    if let Some((what, Some(d))) = derived_d {
        match t.get("d").and_then(Value::as_integer) {
            Some(given) if given != d => {
                return Err(ExperimentError::Config(format!(
                    "key `d` is {given} but the {} potential has d = {what} = {d}",
                    potential.unwrap_or_default()
                )));
            }
            _ => {
                t.insert("d".into(), Value::Integer(d));
            }
        }
    }
    if let Some(Value::Table(prox)) = t.get_mut("prox") {
        if !prox.contains_key("solver") {
            let solver = match potential.as_deref() {
                Some("gaussian" | "quartic") => Some("exact"),
                Some("ginzburg_landau") => Some("newton"),
                Some("deconvolution") => Some("pdhg"),
                _ => None,
            };
            if let Some(s) = solver {
                prox.insert("solver".into(), Value::String(s.into()));
            }
        }
    }
    Ok(())
}

fn bad(key: &str, why: &str) -> ExperimentError {
    ExperimentError::Config(format!("invalid value for key `{key}`: {why}"))
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), ExperimentError> {
        if self.d == 0 {
            return Err(bad("d", "must be positive"));
        }
        if !(self.tau > 0.0) || !self.tau.is_finite() {
            return Err(bad("tau", "must be positive and finite"));
        }
        if self.experiment != ExperimentKind::Theory && self.burn_in >= self.n_steps {
            return Err(bad("burn_in", "must be smaller than n_steps"));
        }
        if self.replicas == 0 {
            return Err(bad("replicas", "must be at least 1"));
        }
        if self.thinning == 0 {
            return Err(bad("thinning", "must be at least 1"));
        }
        if self.trace_every == 0 {
            return Err(bad("trace_every", "must be at least 1"));
        }
        if self.proposal_std.is_some_and(|s| !(s >= 0.0) || !s.is_finite()) {
            return Err(bad("proposal_std", "must be non-negative"));
        }
        let p = &self.prox;
        if !(p.kappa > 0.0) || !p.kappa.is_finite() {
            return Err(bad("prox.kappa", "must be positive"));
        }
        if !(p.alpha >= 0.0) || !p.alpha.is_finite() {
            return Err(bad("prox.alpha", "must be non-negative"));
        }
        if p.max_iterations == 0 {
            return Err(bad("prox.max_iterations", "must be at least 1"));
        }
        if p.delta.is_some_and(|d| !(d > 0.0) || !d.is_finite()) {
            return Err(bad("prox.delta", "must be positive"));
        }
        for (key, v) in [
            ("q_v", self.q_v),
            ("lambda_v", self.lambda_v),
            ("r_v", self.r_v),
            ("c_v", self.c_v),
            ("l_q", self.l_q),
        ] {
            if v.is_some_and(|v| !v.is_finite() || v < 0.0) {
                return Err(bad(key, "must be finite and non-negative"));
            }
        }
        let supported = match self.potential {
            PotentialKind::Gaussian | PotentialKind::Quartic => {
                matches!(p.solver, ProxSolver::Exact | ProxSolver::Gd | ProxSolver::Newton)
            }
            PotentialKind::GinzburgLandau => matches!(p.solver, ProxSolver::Gd | ProxSolver::Newton),
            PotentialKind::Deconvolution => p.solver == ProxSolver::Pdhg,
        };
        if !supported {
            return Err(bad(
                "prox.solver",
                &format!(
                    "`{}` does not support the {:?} potential",
                    p.solver.name(),
                    self.potential
                ),
            ));
        }
        if self.potential == PotentialKind::Deconvolution {
            if self.sampler != SamplerKind::Ipla {
                return Err(bad("sampler", "the deconvolution posterior is non-smooth; use ipla"));
            }
            if self.replicas != 1 {
                return Err(bad("replicas", "deconvolution runs a single chain"));
            }
            let im = self
                .imaging
                .as_ref()
                .ok_or_else(|| bad("imaging", "section required"))?;
            if im.side < 2 {
                return Err(bad("imaging.side", "must be at least 2"));
            }
            if im.depth % 2 == 0 || im.depth >= im.side {
                return Err(bad("imaging.depth", "must be odd and smaller than imaging.side"));
            }
            if !(im.sigma > 0.0) || !im.sigma.is_finite() {
                return Err(bad("imaging.sigma", "must be positive"));
            }
            if !(im.beta >= 0.0) || !im.beta.is_finite() {
                return Err(bad("imaging.beta", "must be non-negative"));
            }
            if !(im.intensity_scale > 0.0) {
                return Err(bad("imaging.intensity_scale", "must be positive"));
            }
            if im.quantiles.iter().any(|q| !(*q > 0.0 && *q < 1.0)) {
                return Err(bad("imaging.quantiles", "levels must lie in (0, 1)"));
            }
            if !(im.failure_tolerance >= 0.0) {
                return Err(bad("imaging.failure_tolerance", "must be non-negative"));
            }
        }
        if let Some(gl) = &self.ginzburg_landau {
            if gl.q == 0 {
                return Err(bad("ginzburg_landau.q", "must be positive"));
            }
        }
        if let Some(th) = &self.theory {
            if th.eps.iter().any(|e| !(*e > 0.0)) {
                return Err(bad("theory.eps", "targets must be positive"));
            }
            if !(th.w2_init >= 0.0) {
                return Err(bad("theory.w2_init", "must be non-negative"));
            }
        }
        if let Some(b) = &self.prox_bench {
            if b.points == 0 {
                return Err(bad("prox_bench.points", "must be at least 1"));
            }
            if !(b.delta_max > 0.0) {
                return Err(bad("prox_bench.delta_max", "must be positive"));
            }
            if !(b.x_scale >= 0.0) {
                return Err(bad("prox_bench.x_scale", "must be non-negative"));
            }
        }
        Ok(())
    }

    /// The configuration as TOML; building from this text reproduces it.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serializes to TOML")
    }

    pub fn start_point(&self) -> StartPoint {
        match self.scenario {
            Scenario::Tail => StartPoint::Observed,
            Scenario::Minimizer => StartPoint::Minimizer,
        }
    }
}

//! JSON run configuration.
//!
//! Every section except `epsilon`, `domain`, `kernel` and `init` has
//! defaults; [`RunConfig::canonical_json`] writes them out explicitly so a
//! parsed config serializes to a form that parses back to itself.

use std::path::{Path, PathBuf};

use mutsel::{
    InitialCondition, Interval, KernelKind, ModelParams, MutationKernel, PhaseSwitch, Scenario, Scheme, StepperConfig,
};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub epsilon: f64,
    pub domain: [f64; 2],
    pub kernel: KernelConfig,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub stepper: StepperSection,
    pub init: InitConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub outputs: Option<PathBuf>,
    #[serde(default)]
    pub sweep: SweepConfig,
    #[serde(default)]
    pub rates: RatesConfig,
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelType {
    Uniform,
    Gaussian,
    Tabulated,
}

/// `sigma2` is required for (and only allowed with) `gaussian`, `nodes`
/// likewise for `tabulated`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelConfig {
    #[serde(rename = "type")]
    pub kind: KernelType,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma2: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nodes: Option<Vec<[f64; 2]>>,
    #[serde(default = "yes")]
    pub normalize: bool,
}

impl KernelConfig {
    pub fn uniform() -> Self {
        KernelConfig { kind: KernelType::Uniform, sigma2: None, nodes: None, normalize: true }
    }

    pub fn gaussian(sigma2: f64) -> Self {
        KernelConfig { kind: KernelType::Gaussian, sigma2: Some(sigma2), nodes: None, normalize: true }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    /// Node count; derived from the Cauchy scale when absent.
    #[serde(default)]
    pub n: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SchemeName {
    Rk4,
    ExponentialEuler,
}

impl From<SchemeName> for Scheme {
    fn from(s: SchemeName) -> Self {
        match s {
            SchemeName::Rk4 => Scheme::Rk4,
            SchemeName::ExponentialEuler => Scheme::ExponentialEuler,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SwitchConfig {
    pub at: f64,
    pub scheme: SchemeName,
    pub dt: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StepperSection {
    #[serde(default = "StepperSection::default_scheme")]
    pub scheme: SchemeName,
    #[serde(default = "StepperSection::default_dt")]
    pub dt: f64,
    #[serde(default = "StepperSection::default_t_end")]
    pub t_end: f64,
    /// Snapshot times; 0 plus 60 log-spaced times up to `t_end` when absent.
    #[serde(default)]
    pub snapshots: Option<Vec<f64>>,
    #[serde(default)]
    pub switch: Option<SwitchConfig>,
}

impl StepperSection {
    fn default_scheme() -> SchemeName {
        SchemeName::Rk4
    }
    fn default_dt() -> f64 {
        0.05
    }
    fn default_t_end() -> f64 {
        1.75e5
    }
}

impl Default for StepperSection {
    /// RK4 with dt = 0.05 until t = 10³, then exponential Euler with dt = 0.5.
    fn default() -> Self {
        StepperSection {
            scheme: SchemeName::Rk4,
            dt: 0.05,
            t_end: 1.75e5,
            snapshots: None,
            switch: Some(SwitchConfig { at: 1e3, scheme: SchemeName::ExponentialEuler, dt: 0.5 }),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitType {
    /// Γ₂(ε, x - shift)
    CauchyShifted,
    Constant,
    /// Two-column CSV `x,value` at `path`, resolved relative to the config file.
    Table,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitConfig {
    #[serde(rename = "type")]
    pub kind: InitType,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shift: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub level: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
}

impl InitConfig {
    pub fn cauchy_shifted(shift: f64) -> Self {
        InitConfig { kind: InitType::CauchyShifted, shift: Some(shift), level: None, path: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub eps: Vec<f64>,
    pub times: Vec<f64>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            eps: vec![0.1, 0.05, 0.02, 0.01],
            times: vec![1.0, 10.0, 1e2, 1e3, 1e4, 1e5, 1.5e5],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RatesConfig {
    pub eps: Vec<f64>,
}

impl Default for RatesConfig {
    fn default() -> Self {
        RatesConfig { eps: vec![1e-1, 10f64.powf(-1.5), 1e-2, 10f64.powf(-2.5), 1e-3] }
    }
}

fn constraint(path: &str, message: impl Into<String>) -> CliError {
    CliError::Config { path: path.to_string(), message: message.into() }
}

/// Parse and validate; `base_dir` anchors relative table paths.
pub fn parse_config(text: &str, base_dir: &Path) -> Result<RunConfig, CliError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let mut cfg: RunConfig = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        CliError::Config { path, message: e.into_inner().to_string() }
    })?;
    if let Some(path) = &mut cfg.init.path {
        if path.is_relative() {
            *path = base_dir.join(&*path);
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_config(path: &Path) -> Result<RunConfig, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| constraint("", format!("cannot read config {}: {e}", path.display())))?;
    parse_config(&text, path.parent().unwrap_or(Path::new(".")))
}

impl RunConfig {
    /// ε = 10⁻², I = [-1.5, 1.5], normalized gaussian kernel with σ² = 10,
    /// f0 = Γ₂(ε, x - 1), long-horizon stepper.
    pub fn reference_setup() -> Self {
        RunConfig {
            epsilon: 1e-2,
            domain: [-1.5, 1.5],
            kernel: KernelConfig::gaussian(10.0),
            grid: GridConfig::default(),
            stepper: StepperSection::default(),
            init: InitConfig::cauchy_shifted(1.0),
            outputs: None,
            sweep: SweepConfig::default(),
            rates: RatesConfig::default(),
        }
    }

    pub fn canonical_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config is serializable")
    }

    pub fn interval(&self) -> Result<Interval, CliError> {
        Interval::new(self.domain[0], self.domain[1]).map_err(|e| constraint("domain", e.to_string()))
    }

    pub fn kernel(&self) -> Result<MutationKernel, CliError> {
        let k = &self.kernel;
        let allowed = |name: &str, present: bool, wanted: KernelType| {
            match (present, k.kind == wanted) {
                (false, true) => Err(constraint(&format!("kernel.{name}"), format!("required for {wanted:?} kernels"))),
                (true, false) => Err(constraint(&format!("kernel.{name}"), format!("not allowed for {:?} kernels", k.kind))),
                _ => Ok(()),
            }
        };
        allowed("sigma2", k.sigma2.is_some(), KernelType::Gaussian)?;
        allowed("nodes", k.nodes.is_some(), KernelType::Tabulated)?;
        let kernel = match k.kind {
            KernelType::Uniform => MutationKernel { kind: KernelKind::Uniform, normalize: k.normalize },
            KernelType::Gaussian => {
                let s2 = k.sigma2.unwrap();
                if !(s2 > 0.0 && s2.is_finite()) {
                    return Err(constraint("kernel.sigma2", format!("must be positive, got {s2}")));
                }
                MutationKernel::gaussian(s2, k.normalize)
            }
            KernelType::Tabulated => {
                let nodes = k.nodes.as_ref().unwrap().iter().map(|p| (p[0], p[1])).collect();
                MutationKernel::tabulated(nodes, k.normalize)
            }
        };
        Ok(kernel)
    }

    pub fn params(&self) -> Result<ModelParams, CliError> {
        let interval = self.interval()?;
        if !(self.epsilon >= 0.0 && self.epsilon < 1.0) {
            return Err(constraint("epsilon", format!("must lie in [0, 1), got {}", self.epsilon)));
        }
        ModelParams::new(self.epsilon, interval, self.kernel()?).map_err(|e| constraint("kernel", e.to_string()))
    }

    pub fn stepper_config(&self) -> StepperConfig {
        let s = &self.stepper;
        let mut c = StepperConfig::new(s.scheme.into(), s.dt, s.t_end);
        if let Some(times) = &s.snapshots {
            c = c.with_snapshots(times.clone());
        }
        c.switch = s.switch.as_ref().map(|w| PhaseSwitch { at: w.at, scheme: w.scheme.into(), dt: w.dt });
        c
    }

    pub fn initial_condition(&self) -> Result<InitialCondition, CliError> {
        let i = &self.init;
        let field = |name: &str, v: Option<f64>, wanted: InitType| -> Result<f64, CliError> {
            v.ok_or_else(|| constraint(&format!("init.{name}"), format!("required for {wanted:?} initial data")))
        };
        for (name, present, wanted) in [
            ("shift", i.shift.is_some(), InitType::CauchyShifted),
            ("level", i.level.is_some(), InitType::Constant),
            ("path", i.path.is_some(), InitType::Table),
        ] {
            if present && i.kind != wanted {
                return Err(constraint(&format!("init.{name}"), format!("not allowed for {:?} initial data", i.kind)));
            }
        }
        Ok(match i.kind {
            InitType::CauchyShifted => {
                if self.epsilon == 0.0 {
                    return Err(constraint("init.type", "cauchy_shifted needs epsilon > 0"));
                }
                InitialCondition::CauchyShifted { shift: field("shift", i.shift, i.kind)? }
            }
            InitType::Constant => {
                let level = field("level", i.level, i.kind)?;
                if !(level >= 0.0 && level.is_finite()) {
                    return Err(constraint("init.level", format!("must be nonnegative, got {level}")));
                }
                InitialCondition::Constant { level }
            }
            InitType::Table => {
                let path = i.path.as_ref().ok_or_else(|| constraint("init.path", "required for Table initial data"))?;
                if !path.is_file() {
                    return Err(constraint("init.path", format!("{} does not exist", path.display())));
                }
                InitialCondition::Table { points: read_table(path)? }
            }
        })
    }

    pub fn scenario(&self) -> Result<Scenario, CliError> {
        Ok(Scenario {
            params: self.params()?,
            n: self.grid.n,
            stepper: self.stepper_config(),
            init: self.initial_condition()?,
        })
    }

    fn validate(&self) -> Result<(), CliError> {
        self.params()?;
        if let Some(n) = self.grid.n {
            if n < 3 {
                return Err(constraint("grid.n", format!("need at least 3 nodes, got {n}")));
            }
        }
        let s = &self.stepper;
        if !(s.dt > 0.0 && s.dt.is_finite()) {
            return Err(constraint("stepper.dt", format!("must be positive, got {}", s.dt)));
        }
        if !(s.t_end >= s.dt && s.t_end.is_finite()) {
            return Err(constraint("stepper.t_end", format!("must be finite and at least dt, got {}", s.t_end)));
        }
        if let Some(times) = &s.snapshots {
            if let Some(k) = times.iter().position(|t| !(*t >= 0.0 && *t <= s.t_end)) {
                return Err(constraint(&format!("stepper.snapshots[{k}]"), format!("must lie in [0, {}]", s.t_end)));
            }
        }
        if let Some(w) = &s.switch {
            if !(w.dt > 0.0 && w.dt.is_finite()) {
                return Err(constraint("stepper.switch.dt", format!("must be positive, got {}", w.dt)));
            }
            if !(w.at >= 0.0) {
                return Err(constraint("stepper.switch.at", format!("must be nonnegative, got {}", w.at)));
            }
        }
        self.initial_condition()?;
        for (name, list) in [("sweep.eps", &self.sweep.eps), ("rates.eps", &self.rates.eps)] {
            if list.is_empty() {
                return Err(constraint(name, "must not be empty"));
            }
            if let Some(k) = list.iter().position(|e| !(*e > 0.0 && *e < 1.0)) {
                return Err(constraint(&format!("{name}[{k}]"), "must lie in (0, 1)"));
            }
        }
        if self.sweep.times.is_empty() {
            return Err(constraint("sweep.times", "must not be empty"));
        }
        if let Some(k) = self.sweep.times.iter().position(|t| !(*t > 0.0 && t.is_finite())) {
            return Err(constraint(&format!("sweep.times[{k}]"), "must be positive"));
        }
        Ok(())
    }
}

fn read_table(path: &Path) -> Result<Vec<(f64, f64)>, CliError> {
    let bad = |msg: String| constraint("init.path", msg);
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| bad(format!("{}: {e}", path.display())))?;
    let mut points = Vec::new();
    for (line, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| bad(e.to_string()))?;
        let field = |k: usize| -> Result<f64, CliError> {
            rec.get(k)
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| bad(format!("{} row {}: expected two numbers", path.display(), line + 1)))
        };
        match (field(0), field(1)) {
            (Ok(x), Ok(y)) => points.push((x, y)),
            // a header row
            _ if line == 0 => continue,
            (Err(e), _) | (_, Err(e)) => return Err(e),
        }
    }
    Ok(points)
}

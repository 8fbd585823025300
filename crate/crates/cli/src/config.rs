//! Scenario files: TOML with a top-level `command` key and command-specific
//! sections.

use std::fmt;
use std::path::Path;

use bitempo_core::{Grid2T, Tolerances};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::families::ForceSpec;
use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    ClassicalCheck,
    ClassicalIntegrate,
    QuantumFluct,
    Uncertainty,
    Continuity,
    Dirac,
    MassSpectrum,
}

impl Command {
    pub const ALL: [Command; 7] = [
        Command::ClassicalCheck,
        Command::ClassicalIntegrate,
        Command::QuantumFluct,
        Command::Uncertainty,
        Command::Continuity,
        Command::Dirac,
        Command::MassSpectrum,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Command::ClassicalCheck => "classical-check",
            Command::ClassicalIntegrate => "classical-integrate",
            Command::QuantumFluct => "quantum-fluct",
            Command::Uncertainty => "uncertainty",
            Command::Continuity => "continuity",
            Command::Dirac => "dirac",
            Command::MassSpectrum => "mass-spectrum",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|c| c.name() == s)
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// `did you mean` hint against a list of known names.
pub fn suggest(name: &str, known: &[&str]) -> String {
    let best = known
        .iter()
        .map(|k| (strsim::jaro_winkler(name, k), *k))
        .filter(|(score, _)| *score > 0.7)
        .max_by(|a, b| a.0.total_cmp(&b.0));
    let list = known.join(", ");
    match best {
        Some((_, k)) => format!("known: {list} (did you mean `{k}`?)"),
        None => format!("known: {list}"),
    }
}

/// A parsed file whose `command` key names a known command.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub command: Command,
    pub name: String,
    pub table: toml::Table,
}

impl Scenario {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?;
        let mut table: toml::Table = text
            .parse()
            .map_err(|e: toml::de::Error| CliError::Usage(format!("{}: {e}", path.display())))?;
        let command = match table.remove("command") {
            Some(toml::Value::String(s)) => Command::from_name(&s).ok_or_else(|| {
                let names: Vec<&str> = Command::ALL.iter().map(|c| c.name()).collect();
                CliError::Usage(format!("unknown command `{s}`; {}", suggest(&s, &names)))
            })?,
            Some(other) => {
                return Err(CliError::Usage(format!("`command` must be a string, found {}", other.type_str())))
            }
            None => return Err(CliError::Usage(format!("{}: missing top-level key `command`", path.display()))),
        };
        let name = path.file_stem().map_or_else(|| "scenario".to_string(), |s| s.to_string_lossy().into_owned());
        Ok(Self { command, name, table })
    }

    pub fn params(&self) -> Result<Params, CliError> {
        fn de<T: DeserializeOwned>(t: &toml::Table) -> Result<T, CliError> {
            T::deserialize(toml::Value::Table(t.clone())).map_err(|e| CliError::Config(e.to_string().trim().to_string()))
        }
        let t = &self.table;
        Ok(match self.command {
            Command::ClassicalCheck => Params::ClassicalCheck(de(t)?),
            Command::ClassicalIntegrate => Params::ClassicalIntegrate(de(t)?),
            Command::QuantumFluct => Params::QuantumFluct(de(t)?),
            Command::Uncertainty => Params::Uncertainty(de(t)?),
            Command::Continuity => Params::Continuity(de(t)?),
            Command::Dirac => Params::Dirac(de(t)?),
            Command::MassSpectrum => Params::MassSpectrum(de(t)?),
        })
    }
}

#[derive(Debug, Clone)]
pub enum Params {
    ClassicalCheck(ClassicalCheck),
    ClassicalIntegrate(ClassicalIntegrate),
    QuantumFluct(QuantumFluct),
    Uncertainty(UncertaintyParams),
    Continuity(ContinuityParams),
    Dirac(DiracParams),
    MassSpectrum(MassSpectrum),
}

impl Params {
    /// Named violations; empty when the parameters can be run.
    pub fn diagnostics(&self) -> Vec<String> {
        let mut d = Diagnostics::default();
        match self {
            Params::ClassicalCheck(p) => p.check(&mut d),
            Params::ClassicalIntegrate(p) => p.check(&mut d),
            Params::QuantumFluct(p) => p.check(&mut d),
            Params::Uncertainty(p) => p.check(&mut d),
            Params::Continuity(p) => p.check(&mut d),
            Params::Dirac(p) => p.check(&mut d),
            Params::MassSpectrum(p) => p.check(&mut d),
        }
        d.0
    }
}

#[derive(Debug, Default)]
pub struct Diagnostics(pub Vec<String>);

impl Diagnostics {
    pub fn push(&mut self, msg: impl Into<String>) {
        self.0.push(msg.into());
    }

    pub fn finite(&mut self, key: &str, values: &[f64]) {
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            self.push(format!("{key}: value {v} is not finite"));
        }
    }

    pub fn positive(&mut self, key: &str, v: f64) {
        if !(v > 0.0 && v.is_finite()) {
            self.push(format!("{key} = {v}: must be positive and finite"));
        }
    }

    pub fn non_negative(&mut self, key: &str, v: f64) {
        if !(v >= 0.0 && v.is_finite()) {
            self.push(format!("{key} = {v}: must be non-negative and finite"));
        }
    }
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct AxisSpec {
    pub min: f64,
    pub max: f64,
    pub n: i64,
}

impl AxisSpec {
    fn check(&self, key: &str, d: &mut Diagnostics) {
        if self.n < 2 {
            d.push(format!("{key}.n = {}: grid count must be at least 2", self.n));
        }
        d.finite(&format!("{key}.min"), &[self.min]);
        d.finite(&format!("{key}.max"), &[self.max]);
        if self.min.is_finite() && self.max.is_finite() && self.max <= self.min {
            d.push(format!("{key}: max = {} must exceed min = {}", self.max, self.min));
        }
    }

    fn triple(&self) -> (f64, f64, usize) {
        (self.min, self.max, self.n.max(0) as usize)
    }
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub t1: AxisSpec,
    pub t2: AxisSpec,
    #[serde(default)]
    pub x: Option<AxisSpec>,
}

impl GridSpec {
    fn check(&self, d: &mut Diagnostics, need_space: bool) {
        self.t1.check("grid.t1", d);
        self.t2.check("grid.t2", d);
        match &self.x {
            Some(x) => x.check("grid.x", d),
            None if need_space => d.push("grid.x: this command needs a space axis"),
            None => {}
        }
    }

    pub fn build(&self) -> Result<Grid2T, CliError> {
        let g = Grid2T::new(self.t1.triple(), self.t2.triple())?;
        Ok(match &self.x {
            Some(x) => g.with_space(x.min, x.max, x.triple().2)?,
            None => g,
        })
    }
}

#[derive(Debug, Clone, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct TolSpec {
    pub fd_step: Option<f64>,
    pub abs_tol: Option<f64>,
    pub rel_tol: Option<f64>,
}

impl TolSpec {
    pub fn build(&self) -> Tolerances {
        let base = Tolerances::default();
        Tolerances {
            fd_step: self.fd_step.unwrap_or(base.fd_step),
            abs_tol: self.abs_tol.unwrap_or(base.abs_tol),
            rel_tol: self.rel_tol.unwrap_or(base.rel_tol),
        }
    }

    fn check(&self, d: &mut Diagnostics) {
        if let Err(e) = self.build().validate() {
            d.push(format!("tolerances: {e}"));
        }
    }
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ClassicalCheck {
    pub force: ForceSpec,
    pub points: Vec<Vec<f64>>,
    #[serde(default)]
    pub tolerances: TolSpec,
}

impl ClassicalCheck {
    fn check(&self, d: &mut Diagnostics) {
        self.force.check(d);
        self.tolerances.check(d);
        if self.points.is_empty() {
            d.push("points: at least one evaluation point is required");
        }
        for (i, p) in self.points.iter().enumerate() {
            if p.len() as i64 != self.force.dim {
                d.push(format!("points[{i}]: has {} coordinates, force.dim = {}", p.len(), self.force.dim));
            }
            d.finite(&format!("points[{i}]"), p);
        }
    }
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct IntegratorSpec {
    pub initial_step: Option<f64>,
    pub max_halvings: Option<u32>,
    pub blowup_bound: Option<f64>,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ClassicalIntegrate {
    pub force: ForceSpec,
    pub x0: f64,
    pub v0: f64,
    pub grid: GridSpec,
    #[serde(default)]
    pub tolerances: TolSpec,
    #[serde(default)]
    pub integrator: Option<IntegratorSpec>,
}

impl ClassicalIntegrate {
    fn check(&self, d: &mut Diagnostics) {
        self.force.check(d);
        if self.force.family != "rank_one" || self.force.dim != 1 {
            d.push(format!(
                "force: the integrator needs family = \"rank_one\" with dim = 1 (got `{}`, dim = {})",
                self.force.family, self.force.dim
            ));
        }
        d.finite("x0", &[self.x0]);
        d.finite("v0", &[self.v0]);
        self.grid.check(d, false);
        self.tolerances.check(d);
        if let Some(i) = &self.integrator {
            if let Some(s) = i.initial_step {
                d.positive("integrator.initial_step", s);
            }
            if let Some(b) = i.blowup_bound {
                d.positive("integrator.blowup_bound", b);
            }
        }
    }
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct QuantumFluct {
    pub e1: Vec<f64>,
    pub e2: Vec<f64>,
    pub x0_re: Vec<Vec<f64>>,
    #[serde(default)]
    pub x0_im: Option<Vec<Vec<f64>>>,
    pub psi_re: Vec<f64>,
    #[serde(default)]
    pub psi_im: Option<Vec<f64>>,
    #[serde(default = "one")]
    pub hbar: f64,
    pub grid: GridSpec,
}

impl QuantumFluct {
    fn check(&self, d: &mut Diagnostics) {
        let n = self.e1.len();
        if n < 2 {
            d.push(format!("e1: need at least 2 levels, got {n}"));
        }
        if self.e2.len() != n {
            d.push(format!("e2: has {} levels, e1 has {n}", self.e2.len()));
        }
        d.finite("e1", &self.e1);
        d.finite("e2", &self.e2);
        let square = |key: &str, m: &Vec<Vec<f64>>, d: &mut Diagnostics| {
            if m.len() != n || m.iter().any(|r| r.len() != n) {
                d.push(format!("{key}: must be a {n}x{n} matrix"));
            }
            for r in m {
                d.finite(key, r);
            }
        };
        square("x0_re", &self.x0_re, d);
        if let Some(im) = &self.x0_im {
            square("x0_im", im, d);
        }
        if self.psi_re.len() != n {
            d.push(format!("psi_re: has {} amplitudes, expected {n}", self.psi_re.len()));
        }
        d.finite("psi_re", &self.psi_re);
        if let Some(im) = &self.psi_im {
            if im.len() != n {
                d.push(format!("psi_im: has {} amplitudes, expected {n}", im.len()));
            }
            d.finite("psi_im", im);
        }
        d.positive("hbar", self.hbar);
        self.grid.check(d, false);
    }
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct BudgetSpec {
    pub d_e: [f64; 2],
    pub dd_e: [f64; 2],
    pub t: [f64; 2],
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct MarginSpec {
    pub frozen_below: f64,
    pub oscillating_at: f64,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct UncertaintyParams {
    #[serde(default = "one")]
    pub hbar: f64,
    pub budgets: Vec<BudgetSpec>,
    #[serde(default)]
    pub margins: Option<MarginSpec>,
}

impl UncertaintyParams {
    fn check(&self, d: &mut Diagnostics) {
        d.positive("hbar", self.hbar);
        if self.budgets.is_empty() {
            d.push("budgets: at least one budget is required");
        }
        for (i, b) in self.budgets.iter().enumerate() {
            d.finite(&format!("budgets[{i}]"), &[b.d_e[0], b.d_e[1], b.dd_e[0], b.dd_e[1], b.t[0], b.t[1]]);
            if b.dd_e.iter().any(|v| *v < 0.0) {
                d.push(format!("budgets[{i}].dd_e: spacing fluctuations must be non-negative"));
            }
        }
        if let Some(m) = &self.margins {
            d.non_negative("margins.frozen_below", m.frozen_below);
            if !(m.oscillating_at >= m.frozen_below) {
                d.push("margins: oscillating_at must be at least frozen_below");
            }
        }
    }
}

/// `j_mu = a_mu cos(kappa x - w1 t1 - w2 t2)` with `a_x` fixed by
/// conservation, plus a constant `background` and an optional uniform
/// source `s t1` in `j1`.
#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct CurrentSpec {
    pub amplitude: [f64; 2],
    pub omega: [f64; 2],
    pub kappa: f64,
    #[serde(default)]
    pub background: [f64; 2],
    #[serde(default)]
    pub source: f64,
}

/// `0.5 + x cos t1 + x^3 sin t2 + product (1 + x^2) t1 t2`.
#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct DensitySpec {
    #[serde(default)]
    pub product: f64,
}

/// `<x> = cos t1 + offset` (allowed) or `cos t1 + cos t2` (excluded), with
/// the autonomous force `-(x - offset)` along `t1`.
#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct EhrenfestSpec {
    #[serde(default)]
    pub offset: f64,
    #[serde(default)]
    pub excluded: bool,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ContinuityParams {
    pub grid: GridSpec,
    #[serde(default = "one")]
    pub alpha: f64,
    #[serde(default = "one")]
    pub beta: f64,
    pub current: CurrentSpec,
    #[serde(default)]
    pub density: Option<DensitySpec>,
    #[serde(default)]
    pub ehrenfest: Option<EhrenfestSpec>,
    #[serde(default)]
    pub tolerances: TolSpec,
}

impl ContinuityParams {
    fn check(&self, d: &mut Diagnostics) {
        self.grid.check(d, true);
        d.finite("alpha", &[self.alpha]);
        d.finite("beta", &[self.beta]);
        let c = &self.current;
        d.finite("current", &[c.amplitude[0], c.amplitude[1], c.omega[0], c.omega[1], c.source, c.background[0], c.background[1]]);
        if !(c.kappa != 0.0 && c.kappa.is_finite()) {
            d.push(format!("current.kappa = {}: must be non-zero and finite", c.kappa));
        }
        if let Some(p) = &self.density {
            d.finite("density.product", &[p.product]);
        }
        if let Some(e) = &self.ehrenfest {
            d.finite("ehrenfest.offset", &[e.offset]);
        }
        self.tolerances.check(d);
    }
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct DiracParams {
    pub k: [f64; 3],
    pub m: f64,
    #[serde(default = "shell_tol")]
    pub shell_tol: f64,
    /// Complex amplitudes `[re, im]` of the two branches.
    #[serde(default = "unit_amplitude")]
    pub plus: [f64; 2],
    #[serde(default = "unit_amplitude")]
    pub minus: [f64; 2],
    pub grid: GridSpec,
    #[serde(default = "one")]
    pub alpha: f64,
    #[serde(default = "one")]
    pub beta: f64,
    #[serde(default)]
    pub variant: Option<String>,
    #[serde(default)]
    pub hermiticity_samples: Vec<[f64; 2]>,
    /// Central-difference spacing of the conservation check.
    #[serde(default = "fd_step")]
    pub fd_step: f64,
}

fn shell_tol() -> f64 {
    1e-12
}

fn fd_step() -> f64 {
    1e-3
}

fn unit_amplitude() -> [f64; 2] {
    [1.0, 0.0]
}

pub const CURRENT_VARIANTS: [&str; 2] = ["imaginary", "real"];

impl DiracParams {
    fn check(&self, d: &mut Diagnostics) {
        d.finite("k", &self.k);
        d.non_negative("m", self.m);
        d.positive("shell_tol", self.shell_tol);
        d.positive("fd_step", self.fd_step);
        d.finite("plus", &self.plus);
        d.finite("minus", &self.minus);
        self.grid.check(d, true);
        d.finite("alpha", &[self.alpha]);
        d.finite("beta", &[self.beta]);
        if let Some(v) = &self.variant {
            if !CURRENT_VARIANTS.contains(&v.as_str()) {
                d.push(format!("variant: unknown current variant `{v}`; {}", suggest(v, &CURRENT_VARIANTS)));
            }
        }
        for (i, s) in self.hermiticity_samples.iter().enumerate() {
            d.finite(&format!("hermiticity_samples[{i}]"), s);
        }
    }
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub min: f64,
    pub max: f64,
    pub n: i64,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct MassSpectrum {
    pub m: f64,
    #[serde(default = "one")]
    pub hbar: f64,
    #[serde(default = "one")]
    pub c: f64,
    pub omega: SweepSpec,
}

impl MassSpectrum {
    fn check(&self, d: &mut Diagnostics) {
        d.non_negative("m", self.m);
        d.positive("hbar", self.hbar);
        d.positive("c", self.c);
        if self.omega.n < 2 {
            d.push(format!("omega.n = {}: sweep count must be at least 2", self.omega.n));
        }
        d.non_negative("omega.min", self.omega.min);
        if !(self.omega.max > self.omega.min && self.omega.max.is_finite()) {
            d.push(format!("omega: max = {} must exceed min = {}", self.omega.max, self.omega.min));
        }
    }
}

//! Scenario files: market primitives, distribution, mechanism and solver
//! settings, read from TOML or JSON.

use std::fmt;
use std::path::Path;

use datasale_core::mechanisms::{firm_optimal, pareto_improving};
use datasale_core::{
    no_sharing_price_set, ConsumerDistribution, IntervalSet, MarketParams, Mechanism,
    PriceSelection,
};
use serde::{Deserialize, Serialize};

pub const SCHEMA_VERSION: u32 = 1;

/// A scenario that failed to parse or validate, pointing at the offending line.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub source: String,
    pub line: Option<usize>,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(line) => write!(f, "{}:{}: {}", self.source, line, self.message),
            None => write!(f, "{}: {}", self.source, self.message),
        }
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(default = "schema_version")]
    pub schema_version: u32,
    #[serde(default)]
    pub market: MarketSpec,
    #[serde(default)]
    pub distribution: DistributionSpec,
    #[serde(default)]
    pub mechanism: MechanismSpec,
    #[serde(default)]
    pub solver: SolverSpec,
    #[serde(default)]
    pub oracle: OracleSpec,
}

fn schema_version() -> u32 {
    SCHEMA_VERSION
}

impl Default for Scenario {
    fn default() -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            market: MarketSpec::default(),
            distribution: DistributionSpec::default(),
            mechanism: MechanismSpec::default(),
            solver: SolverSpec::default(),
            oracle: OracleSpec::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MarketSpec {
    pub v: f64,
    pub t: f64,
}

impl Default for MarketSpec {
    fn default() -> Self {
        Self { v: 3.0, t: 1.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistributionKind {
    #[default]
    Uniform,
    PiecewiseLinear,
    SmoothedStep,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DistributionSpec {
    #[serde(default)]
    pub kind: DistributionKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nodes: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub densities: Option<Vec<f64>>,
    /// Rescale densities to unit mass instead of rejecting them.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub normalize: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub split: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub left_mass: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub width: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum MechanismKind {
    #[default]
    None,
    Full,
    #[value(alias = "firm_optimal")]
    FirmOptimal,
    Pareto,
    Explicit,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MechanismSpec {
    #[serde(default)]
    pub kind: MechanismKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub intervals: Option<Vec<[f64; 2]>>,
    /// Overrides the kind's default transfer.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub transfer: Option<f64>,
    /// No-sharing price the Pareto-improving mechanism is built around;
    /// defaults to the largest optimal one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p_a: Option<f64>,
}

/// `"max"`, `"min"`, or a fixed price.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SelectionSpec {
    Named(NamedSelection),
    Price(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NamedSelection {
    Max,
    Min,
}

impl Default for SelectionSpec {
    fn default() -> Self {
        Self::Named(NamedSelection::Max)
    }
}

impl SelectionSpec {
    pub fn parse(s: &str) -> Result<Self, String> {
        match s {
            "max" => Ok(Self::Named(NamedSelection::Max)),
            "min" => Ok(Self::Named(NamedSelection::Min)),
            _ => s
                .parse::<f64>()
                .map(Self::Price)
                .map_err(|_| format!("expected max, min or a price, got {s:?}")),
        }
    }

    pub fn to_core(self) -> Result<PriceSelection, String> {
        match self {
            Self::Named(NamedSelection::Max) => Ok(PriceSelection::MaxPrice),
            Self::Named(NamedSelection::Min) => Ok(PriceSelection::MinPrice),
            Self::Price(p) => PriceSelection::specified(p).map_err(|e| e.to_string()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSpec {
    #[serde(default)]
    pub price_selection: SelectionSpec,
    /// Step of location grids: opt-in deviations, competitor sets.
    #[serde(default = "default_grid")]
    pub grid: f64,
}

fn default_grid() -> f64 {
    1e-3
}

impl Default for SolverSpec {
    fn default() -> Self {
        Self {
            price_selection: SelectionSpec::default(),
            grid: default_grid(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleSpec {
    #[serde(default = "default_cells")]
    pub n: usize,
    /// Price step in units of `t`.
    #[serde(default = "default_delta")]
    pub delta: f64,
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
}

fn default_cells() -> usize {
    2000
}

fn default_delta() -> f64 {
    1e-3
}

fn default_tolerance() -> f64 {
    3e-3
}

impl Default for OracleSpec {
    fn default() -> Self {
        Self {
            n: default_cells(),
            delta: default_delta(),
            tolerance: default_tolerance(),
        }
    }
}

/// Validated core objects for a scenario.
#[derive(Debug, Clone)]
pub struct Model {
    pub params: MarketParams,
    pub dist: ConsumerDistribution,
    pub mechanism: Mechanism,
    pub selection: PriceSelection,
    pub grid: f64,
    pub oracle: OracleSpec,
}

/// Validation failure tagged with the `section.key` it concerns.
#[derive(Debug, Clone, PartialEq)]
pub struct Invalid {
    pub section: &'static str,
    pub key: &'static str,
    pub message: String,
}

fn invalid(section: &'static str, key: &'static str, message: impl fmt::Display) -> Invalid {
    Invalid {
        section,
        key,
        message: format!("{section}.{key}: {message}"),
    }
}

impl DistributionSpec {
    pub fn build(&self) -> Result<ConsumerDistribution, Invalid> {
        let sec = "distribution";
        match self.kind {
            DistributionKind::Uniform => Ok(ConsumerDistribution::uniform()),
            DistributionKind::PiecewiseLinear => {
                let nodes = self
                    .nodes
                    .clone()
                    .ok_or_else(|| invalid(sec, "nodes", "required for piecewise_linear"))?;
                let dens = self
                    .densities
                    .clone()
                    .ok_or_else(|| invalid(sec, "densities", "required for piecewise_linear"))?;
                let built = if self.normalize {
                    ConsumerDistribution::piecewise_linear_normalized(nodes, dens)
                } else {
                    ConsumerDistribution::piecewise_linear(nodes, dens)
                };
                built.map_err(|e| invalid(sec, "densities", e))
            }
            DistributionKind::SmoothedStep => {
                let get = |v: Option<f64>, key| {
                    v.ok_or_else(|| invalid(sec, key, "required for smoothed_step"))
                };
                let split = get(self.split, "split")?;
                let left = get(self.left_mass, "left_mass")?;
                let width = get(self.width, "width")?;
                ConsumerDistribution::smoothed_step(split, left, width)
                    .map_err(|e| invalid(sec, "split", e))
            }
        }
    }
}

impl MechanismSpec {
    pub fn build(
        &self,
        dist: &ConsumerDistribution,
        params: &MarketParams,
    ) -> Result<Mechanism, Invalid> {
        let sec = "mechanism";
        if self.kind != MechanismKind::Explicit && self.intervals.is_some() {
            return Err(invalid(
                sec,
                "intervals",
                "only allowed with kind = \"explicit\"",
            ));
        }
        if let Some(r) = self.transfer {
            if !r.is_finite() {
                return Err(invalid(sec, "transfer", "must be finite"));
            }
        }
        let mech = match self.kind {
            MechanismKind::None => Mechanism::no_sharing(),
            MechanismKind::Full => Mechanism::full_sharing(0.0),
            MechanismKind::FirmOptimal => firm_optimal(dist, params).mechanism,
            MechanismKind::Pareto => {
                let p_a = match self.p_a {
                    Some(p) => p,
                    None => no_sharing_price_set(dist, params)
                        .max_price()
                        .ok_or_else(|| invalid(sec, "p_a", "no optimal no-sharing price"))?,
                };
                pareto_improving(p_a, dist, params)
                    .map_err(|e| invalid(sec, "p_a", e))?
                    .mechanism
            }
            MechanismKind::Explicit => {
                let pairs = self
                    .intervals
                    .as_ref()
                    .ok_or_else(|| invalid(sec, "intervals", "required for kind = \"explicit\""))?;
                let set = IntervalSet::from_pairs(pairs.iter().map(|[a, b]| (*a, *b)))
                    .map_err(|e| invalid(sec, "intervals", e))?;
                Mechanism::new(set, 0.0)
            }
        };
        Ok(match self.transfer {
            Some(r) => mech.with_transfer(r),
            None => mech,
        })
    }
}

impl Scenario {
    pub fn build(&self) -> Result<Model, Invalid> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(invalid(
                "",
                "schema_version",
                format!(
                    "unsupported version {}, expected {SCHEMA_VERSION}",
                    self.schema_version
                ),
            ));
        }
        let params = MarketParams::new(self.market.v, self.market.t).map_err(|e| {
            let key = if self.market.t > 0.0 { "v" } else { "t" };
            invalid("market", key, e)
        })?;
        let dist = self.distribution.build()?;
        let mechanism = self.mechanism.build(&dist, &params)?;
        let selection = self
            .solver
            .price_selection
            .to_core()
            .map_err(|e| invalid("solver", "price_selection", e))?;
        if !(self.solver.grid > 0.0 && self.solver.grid <= 0.5) {
            return Err(invalid("solver", "grid", "must lie in (0, 0.5]"));
        }
        if !(self.oracle.tolerance > 0.0 && self.oracle.tolerance.is_finite()) {
            return Err(invalid("oracle", "tolerance", "must be positive"));
        }
        datasale_core::oracle::DiscreteMarket::new(
            &dist,
            self.oracle.n,
            self.oracle.delta * params.t(),
            &params,
        )
        .map_err(|e| invalid("oracle", if self.oracle.n < 100 { "n" } else { "delta" }, e))?;
        Ok(Model {
            params,
            dist,
            mechanism,
            selection,
            grid: self.solver.grid,
            oracle: self.oracle,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Syntax {
    Toml,
    Json,
}

/// A scenario together with the text it came from, for error locations.
#[derive(Debug, Clone)]
pub struct Loaded {
    pub scenario: Scenario,
    name: String,
    text: String,
    syntax: Syntax,
}

impl Loaded {
    pub fn defaults() -> Self {
        Self {
            scenario: Scenario::default(),
            name: "<defaults>".into(),
            text: String::new(),
            syntax: Syntax::Toml,
        }
    }

    pub fn read(path: &Path) -> Result<Self, ConfigError> {
        let name = path.display().to_string();
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError {
            source: name.clone(),
            line: None,
            message: e.to_string(),
        })?;
        Self::parse(&name, &text)
    }

    /// Parses TOML, or JSON when the text starts with `{`. A JSON report
    /// carrying a `scenario` object is accepted in place of a scenario.
    pub fn parse(name: &str, text: &str) -> Result<Self, ConfigError> {
        let fail = |line, message| ConfigError {
            source: name.to_string(),
            line,
            message,
        };
        if text.trim_start().starts_with('{') {
            let value: serde_json::Value =
                serde_json::from_str(text).map_err(|e| fail(Some(e.line()), e.to_string()))?;
            let value = match value.get("scenario") {
                Some(inner) if value.get("market").is_none() => inner.clone(),
                _ => value,
            };
            let scenario = serde_json::from_value(value).map_err(|e| fail(None, e.to_string()))?;
            Ok(Self {
                scenario,
                name: name.into(),
                text: text.into(),
                syntax: Syntax::Json,
            })
        } else {
            let scenario: Scenario = toml::from_str(text).map_err(|e| {
                let line = e.span().map(|s| text[..s.start].matches('\n').count() + 1);
                fail(line, e.message().to_string())
            })?;
            Ok(Self {
                scenario,
                name: name.into(),
                text: text.into(),
                syntax: Syntax::Toml,
            })
        }
    }

    pub fn build(&self) -> Result<Model, ConfigError> {
        self.scenario.build().map_err(|e| self.locate(e))
    }

    pub fn locate(&self, e: Invalid) -> ConfigError {
        ConfigError {
            source: self.name.clone(),
            line: find_key(&self.text, self.syntax, e.section, e.key),
            message: e.message,
        }
    }
}

/// 1-based line defining `key` inside `section` ("" for top level).
fn find_key(text: &str, syntax: Syntax, section: &str, key: &str) -> Option<usize> {
    match syntax {
        Syntax::Toml => {
            let mut current = "";
            for (i, line) in text.lines().enumerate() {
                let line = line.trim();
                if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
                    current = name.trim();
                    continue;
                }
                let defines = line
                    .strip_prefix(key)
                    .is_some_and(|rest| rest.trim_start().starts_with('='));
                if current == section && defines {
                    return Some(i + 1);
                }
            }
            None
        }
        Syntax::Json => {
            let quoted_section = format!("\"{section}\"");
            let quoted_key = format!("\"{key}\"");
            let start = if section.is_empty() {
                0
            } else {
                text.lines().position(|l| l.contains(&quoted_section))?
            };
            text.lines()
                .enumerate()
                .skip(start)
                .find(|(_, l)| l.contains(&quoted_key))
                .map(|(i, _)| i + 1)
        }
    }
}

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::choice::{FullSimplex, Polytope, SimplexClass};
use crate::error::{Error, Result};
use crate::market::{MarketSpec, StreamGrid};
use crate::mc::{Generator, SimConfig};
use crate::preference::Preference;
use crate::space::FiniteSpace;
use crate::tree::TreeSpec;

/// Scenario format understood by this version.
pub const SCENARIO_VERSION: u32 = 1;

/// A batch of checks with the inputs they need.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub version: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub space: Option<FiniteSpace>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub outcomes: BTreeMap<String, Vec<f64>>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub polytopes: BTreeMap<String, Polytope>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub simplices: BTreeMap<String, FullSimplex>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tree: Option<TreeSpec>,
    /// Node masses of the optional measure.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub optional_measure: Option<Vec<f64>>,
    /// The nondecreasing process `H` with `H_inf` of unit mean.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h: Option<Vec<f64>>,
    /// One time index per leaf path.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub random_time: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub market: Option<MarketSpec>,
    /// Named path ensembles.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub mc: BTreeMap<String, McSpec>,
    pub checks: Vec<CheckSpec>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McSpec {
    pub generator: Generator,
    pub n_paths: usize,
    pub dt: f64,
    pub horizon: f64,
    /// Overrides the scenario seed for this ensemble.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default = "yes")]
    pub bridge: bool,
    #[serde(default = "yes")]
    pub tail: bool,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub fractions: Vec<f64>,
}

fn yes() -> bool {
    true
}

impl McSpec {
    pub fn config(&self, master_seed: u64) -> Result<SimConfig> {
        if !(self.dt > 0.0 && self.horizon > 0.0) {
            return Err(Error::Scenario("mc dt and horizon must be positive".into()));
        }
        let steps = self.horizon / self.dt;
        let n_steps = steps.round();
        if (steps - n_steps).abs() > 1e-6 * steps.max(1.0) {
            return Err(Error::Scenario(format!(
                "horizon {} is not a multiple of dt {}",
                self.horizon, self.dt
            )));
        }
        let mut c = SimConfig::new(
            self.generator,
            self.n_paths,
            n_steps as usize,
            self.dt,
            self.seed.unwrap_or(master_seed),
        );
        c.bridge = self.bridge;
        c.tail = self.tail;
        c.fractions = self.fractions.clone();
        Ok(c)
    }
}

/// Command groups; each check belongs to exactly one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Module {
    Static,
    Choice,
    Decompose,
    Market,
    Mc,
}

impl Module {
    pub fn as_str(self) -> &'static str {
        match self {
            Module::Static => "static",
            Module::Choice => "choice",
            Module::Decompose => "decompose",
            Module::Market => "market",
            Module::Mc => "mc",
        }
    }
}

fn tol_1e12() -> f64 {
    1e-12
}
fn tol_1e10() -> f64 {
    1e-10
}
fn tol_1e9() -> f64 {
    1e-9
}
fn tol_1e8() -> f64 {
    1e-8
}
fn tol_1e3() -> f64 {
    1e-3
}
fn tol_mc() -> f64 {
    0.02
}
fn tol_mean() -> f64 {
    0.03
}
fn unit() -> f64 {
    1.0
}
fn hundred() -> usize {
    100
}
fn default_eps() -> Vec<f64> {
    vec![1e-2, 1e-3, 1e-4]
}
fn default_gammas() -> Vec<f64> {
    vec![2.0, 4.0, 8.0]
}

/// What a check computes and the tolerance it is held to.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum CheckKind {
    /// Closed-form values of the counterexample families for each `p`.
    Counterexamples {
        ps: Vec<f64>,
        #[serde(default = "tol_1e12")]
        tol: f64,
    },
    /// `rel(f | g)` on the scenario space, optionally against a known value.
    Rel {
        f: String,
        g: String,
        #[serde(default)]
        expected: Option<f64>,
        #[serde(default = "tol_1e12")]
        tol: f64,
    },
    Preference {
        f: String,
        g: String,
        expected: Preference,
    },
    /// Smallest insurance level making `f + h` strictly better than `g + h`.
    Insurance {
        f: String,
        g: String,
        #[serde(default)]
        expected: Option<u64>,
    },
    LogOptimal {
        polytope: String,
        #[serde(default)]
        expected: Option<Vec<f64>>,
        #[serde(default = "tol_1e8")]
        tol: f64,
    },
    SimplexClass {
        simplex: String,
        outcome: String,
        expected: SimplexClass,
    },
    /// Recovers the scenario probability from its own choice rule.
    Recover {
        #[serde(default = "tol_1e8")]
        tol: f64,
    },
    VerifyPair {
        #[serde(default = "tol_1e10")]
        tol: f64,
    },
    Perturbation {
        #[serde(default = "default_eps")]
        eps: Vec<f64>,
        #[serde(default = "tol_1e3")]
        tol: f64,
    },
    /// Numeraire portfolio of the scenario's `L`, or of `L = 1` without one.
    Numeraire {
        #[serde(default = "tol_1e9")]
        tol: f64,
    },
    ConsumptionOptimality {
        #[serde(default)]
        grid: StreamGrid,
        #[serde(default = "unit")]
        x: f64,
        #[serde(default = "tol_1e9")]
        tol: f64,
    },
    RandomTimeSampling {
        #[serde(default = "hundred")]
        strategies: usize,
        #[serde(default = "tol_1e9")]
        tol: f64,
    },
    /// `E[L]` at the horizon: within 3 SE of `expected`, or more than 3 SE
    /// below it when `below` is set.
    TerminalMean {
        ensemble: String,
        expected: f64,
        #[serde(default)]
        below: bool,
    },
    Doob {
        ensemble: String,
        #[serde(default = "default_gammas")]
        gammas: Vec<f64>,
        #[serde(default = "tol_mc")]
        tol: f64,
    },
    ExpLaw {
        ensemble: String,
        #[serde(default = "tol_mean")]
        mean_tol: f64,
    },
    MinTime {
        ensemble: String,
        #[serde(default = "tol_mc")]
        tol: f64,
    },
}

impl CheckKind {
    pub fn module(&self) -> Module {
        use CheckKind::*;
        match self {
            Counterexamples { .. } | Rel { .. } | Preference { .. } | Insurance { .. } => {
                Module::Static
            }
            LogOptimal { .. } | SimplexClass { .. } | Recover { .. } => Module::Choice,
            VerifyPair { .. } | Perturbation { .. } => Module::Decompose,
            Numeraire { .. } | ConsumptionOptimality { .. } | RandomTimeSampling { .. } => {
                Module::Market
            }
            TerminalMean { .. } | Doob { .. } | ExpLaw { .. } | MinTime { .. } => Module::Mc,
        }
    }

    pub fn name(&self) -> &'static str {
        use CheckKind::*;
        match self {
            Counterexamples { .. } => "counterexamples",
            Rel { .. } => "rel",
            Preference { .. } => "preference",
            Insurance { .. } => "insurance",
            LogOptimal { .. } => "log_optimal",
            SimplexClass { .. } => "simplex_class",
            Recover { .. } => "recover",
            VerifyPair { .. } => "verify_pair",
            Perturbation { .. } => "perturbation",
            Numeraire { .. } => "numeraire",
            ConsumptionOptimality { .. } => "consumption_optimality",
            RandomTimeSampling { .. } => "random_time_sampling",
            TerminalMean { .. } => "terminal_mean",
            Doob { .. } => "doob",
            ExpLaw { .. } => "exp_law",
            MinTime { .. } => "min_time",
        }
    }

    pub fn ensemble(&self) -> Option<&str> {
        use CheckKind::*;
        match self {
            TerminalMean { ensemble, .. }
            | Doob { ensemble, .. }
            | ExpLaw { ensemble, .. }
            | MinTime { ensemble, .. } => Some(ensemble),
            _ => None,
        }
    }
}

/// A check with an optional display name.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "serde_json::Value", into = "serde_json::Value")]
pub struct CheckSpec {
    pub name: Option<String>,
    pub kind: CheckKind,
}

impl TryFrom<serde_json::Value> for CheckSpec {
    type Error = String;

    fn try_from(mut v: serde_json::Value) -> std::result::Result<Self, String> {
        let name = match v.as_object_mut().and_then(|m| m.remove("name")) {
            None => None,
            Some(serde_json::Value::String(s)) => Some(s),
            Some(other) => return Err(format!("check name must be a string, got {other}")),
        };
        let kind = serde_json::from_value(v).map_err(|e| e.to_string())?;
        Ok(CheckSpec { name, kind })
    }
}

impl From<CheckSpec> for serde_json::Value {
    fn from(c: CheckSpec) -> Self {
        let mut v = serde_json::to_value(&c.kind).expect("check kinds serialize");
        if let (Some(name), Some(m)) = (c.name, v.as_object_mut()) {
            m.insert("name".into(), serde_json::Value::String(name));
        }
        v
    }
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Self> {
        let s: Scenario = serde_json::from_str(text)?;
        if s.version != SCENARIO_VERSION {
            return Err(Error::Scenario(format!(
                "unsupported scenario version {} (expected {SCENARIO_VERSION})",
                s.version
            )));
        }
        Ok(s)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text).map_err(|e| Error::Scenario(format!("{}: {e}", path.display())))
    }

    /// Display names, defaulting to `kind#index`; must be unique.
    pub fn check_names(&self) -> Result<Vec<String>> {
        let names: Vec<String> = self
            .checks
            .iter()
            .enumerate()
            .map(|(i, c)| {
                c.name
                    .clone()
                    .unwrap_or_else(|| format!("{}#{i}", c.kind.name()))
            })
            .collect();
        for (i, n) in names.iter().enumerate() {
            if names[..i].contains(n) {
                return Err(Error::Scenario(format!("duplicate check name {n:?}")));
            }
        }
        Ok(names)
    }

    /// Confirms that referenced names resolve and each check has the sections
    /// it needs.
    pub fn validate(&self) -> Result<()> {
        self.check_names()?;
        let processes = [
            self.optional_measure.is_some(),
            self.h.is_some(),
            self.random_time.is_some(),
        ]
        .iter()
        .filter(|b| **b)
        .count();
        if processes > 1 {
            return Err(Error::Scenario(
                "give at most one of optional_measure, h and random_time".into(),
            ));
        }
        if processes > 0 && self.tree.is_none() {
            return Err(Error::Scenario("a process needs a tree section".into()));
        }
        if self.market.is_some() && self.tree.is_none() {
            return Err(Error::Scenario("a market needs a tree section".into()));
        }
        for (i, c) in self.checks.iter().enumerate() {
            let fail =
                |msg: String| Error::Scenario(format!("check {i} ({}): {msg}", c.kind.name()));
            let need = |ok: bool, what: &str| -> Result<()> {
                if ok {
                    Ok(())
                } else {
                    Err(fail(format!("requires {what}")))
                }
            };
            let outcome = |name: &str| -> Result<()> {
                need(
                    self.outcomes.contains_key(name),
                    &format!("outcome {name:?}"),
                )
            };
            use CheckKind::*;
            match &c.kind {
                Counterexamples { ps, .. } => need(!ps.is_empty(), "at least one p")?,
                Rel { f, g, .. } | Preference { f, g, .. } | Insurance { f, g, .. } => {
                    need(self.space.is_some(), "a space section")?;
                    outcome(f)?;
                    outcome(g)?;
                }
                LogOptimal { polytope, .. } => {
                    need(self.space.is_some(), "a space section")?;
                    need(
                        self.polytopes.contains_key(polytope),
                        &format!("polytope {polytope:?}"),
                    )?;
                }
                SimplexClass {
                    simplex,
                    outcome: o,
                    ..
                } => {
                    need(self.space.is_some(), "a space section")?;
                    need(
                        self.simplices.contains_key(simplex),
                        &format!("simplex {simplex:?}"),
                    )?;
                    outcome(o)?;
                }
                Recover { .. } => need(self.space.is_some(), "a space section")?,
                VerifyPair { .. } | Perturbation { .. } => {
                    need(processes == 1, "one of optional_measure, h or random_time")?
                }
                Numeraire { .. } => need(self.market.is_some(), "a market section")?,
                ConsumptionOptimality { .. } => {
                    need(self.market.is_some(), "a market section")?;
                    need(processes == 1, "one of optional_measure, h or random_time")?;
                }
                RandomTimeSampling { .. } => {
                    need(self.market.is_some(), "a market section")?;
                    need(self.random_time.is_some(), "a random_time section")?;
                }
                TerminalMean { ensemble, .. }
                | Doob { ensemble, .. }
                | ExpLaw { ensemble, .. }
                | MinTime { ensemble, .. } => need(
                    self.mc.contains_key(ensemble),
                    &format!("mc ensemble {ensemble:?}"),
                )?,
            }
        }
        Ok(())
    }
}

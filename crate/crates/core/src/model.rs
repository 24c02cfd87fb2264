//! Domain types for the long-term equilibrium model: generators, storage units, lines,
//! the power system they are sited in and the policy regime applied to it.
//!
//! Units follow the usual power-system conventions: capacities in MW, energies in MWh,
//! capital costs in €/MW (overnight) or €/MW/a (annuitized), marginal costs in €/MWh_el and
//! emission factors in tCO₂/MWh_el. Every snapshot has a weight of one hour.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Hours in the (non-leap) year that annuitized costs refer to.
pub const HOURS_PER_YEAR: f64 = 8760.0;

#[derive(Debug, Error, PartialEq)]
pub enum ModelError {
    #[error("non-finite input to {0}")]
    NonFinite(&'static str),
    #[error("lifetime must be at least one year, got {0}")]
    Lifetime(f64),
    #[error("discount rate must be non-negative, got {0}")]
    DiscountRate(f64),
    #[error("unknown profile kind `{0}` (expected solar-diurnal, wind-autocorrelated, flat-demand or two-day-fig1)")]
    UnknownKind(String),
    #[error("profile kind {kind} needs {expected} snapshots, got {got}")]
    SnapshotCount {
        kind: SynthKind,
        expected: usize,
        got: usize,
    },
    #[error("profile `{0}` is not defined")]
    MissingProfile(String),
}

/// Annuitized capital cost plus fixed O&M, in €/MW/a.
///
/// Uses the annuity factor `r / (1 - (1 + r)^-n)`, which tends to `1/n` as `r → 0`.
pub fn annuitize(
    capex: f64,
    lifetime: f64,
    discount_rate: f64,
    fixed_om: f64,
) -> Result<f64, ModelError> {
    if !(capex.is_finite() && lifetime.is_finite() && discount_rate.is_finite() && fixed_om.is_finite())
    {
        return Err(ModelError::NonFinite("annuitize"));
    }
    if lifetime < 1.0 {
        return Err(ModelError::Lifetime(lifetime));
    }
    if discount_rate < 0.0 {
        return Err(ModelError::DiscountRate(discount_rate));
    }
    Ok(capex * annuity_factor(lifetime, discount_rate) + fixed_om)
}

fn annuity_factor(lifetime: f64, r: f64) -> f64 {
    if r == 0.0 {
        return 1.0 / lifetime;
    }
    // 1 - (1+r)^-n, written to stay accurate for tiny r
    let denom = -(-lifetime * r.ln_1p()).exp_m1();
    r / denom
}

/// Techno-economic parameters of a generation technology.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TechnologySpec {
    pub name: String,
    /// Overnight investment cost, €/MW.
    pub capex: f64,
    #[serde(default)]
    pub fixed_om: f64,
    pub lifetime: f64,
    /// Non-fuel variable cost, €/MWh_el.
    #[serde(default)]
    pub variable_cost: f64,
    /// Fuel cost in €/MWh_th; requires `efficiency`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fuel_cost: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub efficiency: Option<f64>,
    /// tCO₂ per MWh_el.
    #[serde(default)]
    pub emission_factor: f64,
    /// Name of the availability profile; `None` means always available (dispatchable).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub availability: Option<String>,
    /// Installable potential in MW at this node.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_potential: Option<f64>,
}

impl TechnologySpec {
    /// A dispatchable technology with the given overnight capex and variable cost.
    pub fn dispatchable(name: &str, capex: f64, lifetime: f64, variable_cost: f64) -> Self {
        TechnologySpec {
            name: name.to_string(),
            capex,
            fixed_om: 0.0,
            lifetime,
            variable_cost,
            fuel_cost: None,
            efficiency: None,
            emission_factor: 0.0,
            availability: None,
            max_potential: None,
        }
    }

    /// Effective marginal cost `o_s` in €/MWh_el, including fuel.
    pub fn marginal_cost(&self) -> f64 {
        match (self.fuel_cost, self.efficiency) {
            (Some(fuel), Some(eff)) => self.variable_cost + fuel / eff,
            _ => self.variable_cost,
        }
    }
}

/// Parameters of a storage unit with separately sized charge, discharge and energy capacity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StorageSpec {
    pub name: String,
    /// €/MW of discharge power.
    pub capex_discharge: f64,
    /// €/MW of charging power.
    pub capex_charge: f64,
    /// €/MWh of energy capacity.
    pub capex_energy: f64,
    pub lifetime: f64,
    pub eta_discharge: f64,
    pub eta_charge: f64,
    /// Hour-to-hour retention of the state of charge.
    #[serde(default = "one")]
    pub eta_standing: f64,
    /// Energy capacity fixed to this many hours of discharge power.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub energy_to_power_ratio: Option<f64>,
    /// Existing (non-extendable) discharge and charge power in MW.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub existing_power: Option<f64>,
}

fn one() -> f64 {
    1.0
}

/// A transmission line between two nodes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LineSpec {
    pub name: String,
    pub from: String,
    pub to: String,
    /// Existing capacity in MW (forward direction, and backward unless overridden).
    #[serde(default)]
    pub existing_capacity: f64,
    /// Backward capacity for non-extendable lines; defaults to `existing_capacity`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub backward_capacity: Option<f64>,
    #[serde(default)]
    pub expandable: bool,
    /// Capital cost in €/MW/a, or overnight €/MW when `lifetime` is set.
    #[serde(default)]
    pub capex: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lifetime: Option<f64>,
    /// Series reactance in p.u., needed when KVL is enforced.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reactance: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Generator {
    pub node: String,
    #[serde(flatten)]
    pub spec: TechnologySpec,
}

impl Generator {
    /// Entity identifier, unique within a system: `name@node`.
    pub fn id(&self) -> String {
        format!("{}@{}", self.spec.name, self.node)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StorageUnit {
    pub node: String,
    #[serde(flatten)]
    pub spec: StorageSpec,
}

impl StorageUnit {
    pub fn id(&self) -> String {
        format!("{}@{}", self.spec.name, self.node)
    }
}

/// Annualized storage cost per component, already scaled to the modelled horizon.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StorageCosts {
    pub discharge: f64,
    pub charge: f64,
    pub energy: f64,
}

/// Nodes, perfectly inelastic demand, and the candidate fleet.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerSystem {
    pub nodes: Vec<String>,
    pub snapshots: usize,
    /// Demand in MW per node, one value per snapshot.
    pub demand: BTreeMap<String, Vec<f64>>,
    /// Availability profiles referenced by technologies.
    pub profiles: BTreeMap<String, Vec<f64>>,
    /// Value of lost load; when set, load shedding at this price is always possible.
    pub voll: Option<f64>,
    pub discount_rate: f64,
    /// Pro-rate annual capacity costs to the modelled horizon (`snapshots / 8760`).
    pub horizon_scaling: bool,
    pub generators: Vec<Generator>,
    pub storages: Vec<StorageUnit>,
    pub lines: Vec<LineSpec>,
}

impl PowerSystem {
    /// An empty single-purpose system with a 7% discount rate.
    pub fn new(nodes: &[&str], snapshots: usize) -> Self {
        PowerSystem {
            nodes: nodes.iter().map(|n| n.to_string()).collect(),
            snapshots,
            demand: BTreeMap::new(),
            profiles: BTreeMap::new(),
            voll: None,
            discount_rate: 0.07,
            horizon_scaling: false,
            generators: Vec::new(),
            storages: Vec::new(),
            lines: Vec::new(),
        }
    }

    pub fn with_demand(mut self, node: &str, values: Vec<f64>) -> Self {
        self.demand.insert(node.to_string(), values);
        self
    }

    pub fn with_profile(mut self, name: &str, values: Vec<f64>) -> Self {
        self.profiles.insert(name.to_string(), values);
        self
    }

    pub fn with_generator(mut self, node: &str, spec: TechnologySpec) -> Self {
        self.generators.push(Generator {
            node: node.to_string(),
            spec,
        });
        self
    }

    pub fn with_storage(mut self, node: &str, spec: StorageSpec) -> Self {
        self.storages.push(StorageUnit {
            node: node.to_string(),
            spec,
        });
        self
    }

    pub fn with_line(mut self, line: LineSpec) -> Self {
        self.lines.push(line);
        self
    }

    /// Fraction of a year covered by the snapshots when `horizon_scaling` is on, else 1.
    pub fn horizon_factor(&self) -> f64 {
        if self.horizon_scaling {
            self.snapshots as f64 / HOURS_PER_YEAR
        } else {
            1.0
        }
    }

    pub fn node_index(&self, node: &str) -> Option<usize> {
        self.nodes.iter().position(|n| n == node)
    }

    pub fn demand_at(&self, node: &str) -> &[f64] {
        self.demand.get(node).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn total_demand(&self) -> f64 {
        self.demand.values().flatten().sum()
    }

    /// Capacity cost `c_s` in € per MW over the modelled horizon.
    pub fn capacity_cost(&self, gen: &Generator) -> Result<f64, ModelError> {
        let s = &gen.spec;
        Ok(annuitize(s.capex, s.lifetime, self.discount_rate, s.fixed_om)? * self.horizon_factor())
    }

    pub fn storage_costs(&self, unit: &StorageUnit) -> Result<StorageCosts, ModelError> {
        let s = &unit.spec;
        let f = self.horizon_factor();
        let a = |capex| annuitize(capex, s.lifetime, self.discount_rate, 0.0).map(|c| c * f);
        Ok(StorageCosts {
            discharge: a(s.capex_discharge)?,
            charge: a(s.capex_charge)?,
            energy: a(s.capex_energy)?,
        })
    }

    pub fn line_cost(&self, line: &LineSpec) -> Result<f64, ModelError> {
        let annual = match line.lifetime {
            Some(n) => annuitize(line.capex, n, self.discount_rate, 0.0)?,
            None => line.capex,
        };
        Ok(annual * self.horizon_factor())
    }

    /// Availability `ḡ_{s,t}` of a generator; all ones for dispatchable technologies.
    pub fn availability(&self, gen: &Generator) -> Result<Vec<f64>, ModelError> {
        match &gen.spec.availability {
            None => Ok(vec![1.0; self.snapshots]),
            Some(name) => self
                .profiles
                .get(name)
                .cloned()
                .ok_or_else(|| ModelError::MissingProfile(name.clone())),
        }
    }

    /// Generators whose name or id is listed in `set`.
    pub fn members<'a>(&'a self, set: &'a [String]) -> impl Iterator<Item = (usize, &'a Generator)> {
        self.generators
            .iter()
            .enumerate()
            .filter(move |(_, g)| set.iter().any(|m| *m == g.spec.name || *m == g.id()))
    }

    /// Raise the variable cost of the i-th generator by `(i + 1) · step` so that otherwise
    /// identical technologies have a strict merit order.
    pub fn apply_tie_break(&mut self, step: f64) {
        for (i, g) in self.generators.iter_mut().enumerate() {
            g.spec.variable_cost += (i + 1) as f64 * step;
        }
    }
}

/// An energy target, either absolute in MWh or as a share of total demand.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnergyTarget {
    Absolute(f64),
    Share(f64),
}

impl EnergyTarget {
    pub fn resolve(&self, total_demand: f64) -> f64 {
        match *self {
            EnergyTarget::Absolute(v) => v,
            EnergyTarget::Share(s) => s * total_demand,
        }
    }
}

/// Technology-specific support instrument for a set of technologies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SupportPolicy {
    /// Dispatched energy of the set must reach the target.
    Dispatched {
        technologies: Vec<String>,
        target: EnergyTarget,
    },
    /// Available (pre-curtailment) energy of the set must reach the target.
    Available {
        technologies: Vec<String>,
        target: EnergyTarget,
    },
    /// A fixed premium in €/MWh paid outside the market.
    FixedFip {
        technologies: Vec<String>,
        premium: f64,
    },
}

impl SupportPolicy {
    pub fn technologies(&self) -> &[String] {
        match self {
            SupportPolicy::Dispatched { technologies, .. }
            | SupportPolicy::Available { technologies, .. }
            | SupportPolicy::FixedFip { technologies, .. } => technologies,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Co2Policy {
    /// Cap on emissions over the horizon, tCO₂.
    Cap { limit: f64 },
    /// Price per tonne, €/tCO₂.
    Tax { price: f64 },
}

/// At most one support instrument combined with at most one CO₂ instrument.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolicyConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub support: Option<SupportPolicy>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub co2: Option<Co2Policy>,
}

impl PolicyConfig {
    pub fn none() -> Self {
        Self::default()
    }

    pub fn support_share(technologies: &[&str], share: f64) -> Self {
        PolicyConfig {
            support: Some(SupportPolicy::Dispatched {
                technologies: technologies.iter().map(|s| s.to_string()).collect(),
                target: EnergyTarget::Share(share),
            }),
            co2: None,
        }
    }

    pub fn co2_cap(limit: f64) -> Self {
        PolicyConfig {
            support: None,
            co2: Some(Co2Policy::Cap { limit }),
        }
    }

    pub fn co2_tax(price: f64) -> Self {
        PolicyConfig {
            support: None,
            co2: Some(Co2Policy::Tax { price }),
        }
    }
}

/// A single rule broken by a system or policy.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub entity: String,
    pub rule: &'static str,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {} ({})", self.entity, self.rule, self.message)
    }
}

/// Identifiers end up in LP row and column names, so they are restricted to a safe charset.
pub fn is_identifier(s: &str) -> bool {
    !s.is_empty()
        && s
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || matches!(c, '_' | '-'))
}

struct Collector(Vec<Violation>);

impl Collector {
    fn push(&mut self, entity: impl Into<String>, rule: &'static str, message: impl Into<String>) {
        self.0.push(Violation {
            entity: entity.into(),
            rule,
            message: message.into(),
        });
    }

    fn check(&mut self, ok: bool, entity: &str, rule: &'static str, message: impl FnOnce() -> String) {
        if !ok {
            self.push(entity, rule, message());
        }
    }
}

fn finite_nonneg(v: f64) -> bool {
    v.is_finite() && v >= 0.0
}

fn unit_efficiency(v: f64) -> bool {
    v.is_finite() && v > 0.0 && v <= 1.0
}

/// Check every type invariant of the system and the policy. Never fails; an empty list
/// means the pair can be formulated.
pub fn validate(system: &PowerSystem, policy: &PolicyConfig) -> Vec<Violation> {
    let mut v = Collector(Vec::new());
    let t = system.snapshots;

    v.check(t >= 1, "system", "snapshot count", || "at least one snapshot is required".into());
    v.check(!system.nodes.is_empty(), "system", "node list", || "no nodes".into());
    v.check(
        system.discount_rate.is_finite() && system.discount_rate >= 0.0,
        "system",
        "discount rate",
        || format!("discount rate {} must be finite and >= 0", system.discount_rate),
    );
    if let Some(voll) = system.voll {
        v.check(voll.is_finite() && voll > 0.0, "system", "voll", || {
            format!("value of lost load {voll} must be positive")
        });
    }

    let mut seen = BTreeSet::new();
    for node in &system.nodes {
        v.check(is_identifier(node), node, "identifier", || format!("invalid node name `{node}`"));
        v.check(seen.insert(node.as_str()), node, "duplicate id", || "node listed twice".into());
        match system.demand.get(node) {
            None => v.push(node, "missing demand", "node has no demand series"),
            Some(d) => {
                v.check(d.len() == t, node, "profile length", || {
                    format!("demand has {} values for {t} snapshots", d.len())
                });
                v.check(d.iter().all(|x| finite_nonneg(*x)), node, "negative demand", || {
                    "demand must be finite and >= 0".into()
                });
            }
        }
    }
    for node in system.demand.keys() {
        v.check(seen.contains(node.as_str()), node, "unresolved node", || {
            "demand given for an unknown node".into()
        });
    }

    for (name, p) in &system.profiles {
        v.check(p.len() == t, name, "profile length", || {
            format!("profile has {} values for {t} snapshots", p.len())
        });
        v.check(
            p.iter().all(|x| x.is_finite() && (0.0..=1.0).contains(x)),
            name,
            "profile out of [0,1]",
            || "availability values must lie in [0,1]".into(),
        );
    }

    let mut ids = BTreeSet::new();
    for g in &system.generators {
        let id = g.id();
        let s = &g.spec;
        v.check(is_identifier(&s.name), &id, "identifier", || format!("invalid name `{}`", s.name));
        v.check(ids.insert(id.clone()), &id, "duplicate id", || "technology listed twice at node".into());
        v.check(seen.contains(g.node.as_str()), &id, "unresolved node", || {
            format!("node `{}` does not exist", g.node)
        });
        v.check(finite_nonneg(s.capex), &id, "capex", || "capex must be finite and >= 0".into());
        v.check(finite_nonneg(s.fixed_om), &id, "fixed om", || "fixed O&M must be finite and >= 0".into());
        v.check(s.lifetime.is_finite() && s.lifetime >= 1.0, &id, "lifetime", || {
            format!("lifetime {} must be >= 1", s.lifetime)
        });
        v.check(s.variable_cost.is_finite(), &id, "variable cost", || "variable cost must be finite".into());
        v.check(finite_nonneg(s.emission_factor), &id, "emission factor", || {
            "emission factor must be finite and >= 0".into()
        });
        if let Some(fuel) = s.fuel_cost {
            v.check(fuel.is_finite(), &id, "fuel cost", || "fuel cost must be finite".into());
            match s.efficiency {
                None => v.push(&id, "efficiency", "fuel cost given without efficiency"),
                Some(e) => v.check(unit_efficiency(e), &id, "efficiency", || {
                    format!("efficiency {e} must lie in (0,1]")
                }),
            }
        } else if let Some(e) = s.efficiency {
            v.check(unit_efficiency(e), &id, "efficiency", || format!("efficiency {e} must lie in (0,1]"));
        }
        if let Some(p) = &s.availability {
            v.check(system.profiles.contains_key(p), &id, "unresolved profile", || {
                format!("availability profile `{p}` is not defined")
            });
        }
        if let Some(max) = s.max_potential {
            v.check(finite_nonneg(max), &id, "potential", || "potential must be finite and >= 0".into());
        }
    }

    for unit in &system.storages {
        let id = unit.id();
        let s = &unit.spec;
        v.check(is_identifier(&s.name), &id, "identifier", || format!("invalid name `{}`", s.name));
        v.check(ids.insert(id.clone()), &id, "duplicate id", || "storage listed twice at node".into());
        v.check(seen.contains(unit.node.as_str()), &id, "unresolved node", || {
            format!("node `{}` does not exist", unit.node)
        });
        for (label, eff) in [
            ("eta_discharge", s.eta_discharge),
            ("eta_charge", s.eta_charge),
            ("eta_standing", s.eta_standing),
        ] {
            v.check(unit_efficiency(eff), &id, "efficiency", || format!("{label} {eff} must lie in (0,1]"));
        }
        for (label, c) in [
            ("capex_discharge", s.capex_discharge),
            ("capex_charge", s.capex_charge),
            ("capex_energy", s.capex_energy),
        ] {
            v.check(finite_nonneg(c), &id, "capex", || format!("{label} must be finite and >= 0"));
        }
        v.check(s.lifetime.is_finite() && s.lifetime >= 1.0, &id, "lifetime", || {
            format!("lifetime {} must be >= 1", s.lifetime)
        });
        if let Some(r) = s.energy_to_power_ratio {
            v.check(r.is_finite() && r > 0.0, &id, "energy ratio", || "energy/power ratio must be > 0".into());
        }
        if let Some(p) = s.existing_power {
            v.check(finite_nonneg(p), &id, "existing power", || "existing power must be >= 0".into());
        }
    }

    let mut line_ids = BTreeSet::new();
    for l in &system.lines {
        let id = l.name.as_str();
        v.check(is_identifier(id), id, "identifier", || format!("invalid line name `{id}`"));
        v.check(line_ids.insert(id), id, "duplicate id", || "line listed twice".into());
        v.check(l.from != l.to, id, "self loop", || "from and to node are identical".into());
        for end in [&l.from, &l.to] {
            v.check(seen.contains(end.as_str()), id, "unresolved node", || format!("node `{end}` does not exist"));
        }
        v.check(finite_nonneg(l.existing_capacity), id, "capacity", || {
            "existing capacity must be finite and >= 0".into()
        });
        if let Some(b) = l.backward_capacity {
            v.check(finite_nonneg(b), id, "capacity", || "backward capacity must be finite and >= 0".into());
            v.check(!l.expandable, id, "asymmetric expansion", || {
                "backward capacity is only supported on non-expandable lines".into()
            });
        }
        v.check(finite_nonneg(l.capex), id, "capex", || "capex must be finite and >= 0".into());
        if let Some(n) = l.lifetime {
            v.check(n.is_finite() && n >= 1.0, id, "lifetime", || format!("lifetime {n} must be >= 1"));
        }
        if let Some(x) = l.reactance {
            v.check(x.is_finite() && x > 0.0, id, "reactance", || "reactance must be > 0".into());
        }
    }

    if let Some(support) = &policy.support {
        let set = support.technologies();
        v.check(!set.is_empty(), "policy", "empty policy set", || "support set is empty".into());
        for member in set {
            v.check(
                system.generators.iter().any(|g| *member == g.spec.name || *member == g.id()),
                member,
                "unresolved policy set member",
                || format!("no technology named `{member}`"),
            );
        }
        match support {
            SupportPolicy::Dispatched { target, .. } | SupportPolicy::Available { target, .. } => {
                match *target {
                    EnergyTarget::Share(s) => v.check(s.is_finite() && (0.0..=1.0).contains(&s), "policy", "share", || {
                        format!("share {s} must lie in [0,1]")
                    }),
                    EnergyTarget::Absolute(a) => v.check(finite_nonneg(a), "policy", "target", || {
                        format!("target {a} must be finite and >= 0")
                    }),
                }
            }
            SupportPolicy::FixedFip { premium, .. } => {
                v.check(finite_nonneg(*premium), "policy", "premium", || "premium must be finite and >= 0".into())
            }
        }
    }
    match policy.co2 {
        Some(Co2Policy::Cap { limit }) => {
            v.check(finite_nonneg(limit), "policy", "co2 cap", || format!("cap {limit} must be >= 0"))
        }
        Some(Co2Policy::Tax { price }) => {
            v.check(finite_nonneg(price), "policy", "co2 tax", || format!("tax {price} must be >= 0"))
        }
        None => {}
    }

    v.0
}

/// Synthetic time series for desk-scale experiments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SynthKind {
    SolarDiurnal,
    WindAutocorrelated,
    FlatDemand,
    TwoDayFig1,
}

impl fmt::Display for SynthKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SynthKind::SolarDiurnal => "solar-diurnal",
            SynthKind::WindAutocorrelated => "wind-autocorrelated",
            SynthKind::FlatDemand => "flat-demand",
            SynthKind::TwoDayFig1 => "two-day-fig1",
        })
    }
}

impl FromStr for SynthKind {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "solar-diurnal" => Ok(SynthKind::SolarDiurnal),
            "wind-autocorrelated" => Ok(SynthKind::WindAutocorrelated),
            "flat-demand" => Ok(SynthKind::FlatDemand),
            "two-day-fig1" => Ok(SynthKind::TwoDayFig1),
            other => Err(ModelError::UnknownKind(other.to_string())),
        }
    }
}

/// Lowest and highest demand of the two-day profile, MW.
pub const FIG1_DEMAND_RANGE: (f64, f64) = (55.0, 100.0);

fn solar_shape(hour_of_day: usize) -> f64 {
    let h = hour_of_day as f64;
    if (6.0..=18.0).contains(&h) {
        (std::f64::consts::PI * (h - 6.0) / 12.0).sin().max(0.0)
    } else {
        0.0
    }
}

/// Generate named series for `kind`. Availability kinds return values in [0,1];
/// `two-day-fig1` returns both a `demand` and a `solar` series of 48 hours.
pub fn synth_profiles(
    seed: u64,
    snapshots: usize,
    kind: SynthKind,
) -> Result<BTreeMap<String, Vec<f64>>, ModelError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = BTreeMap::new();
    match kind {
        SynthKind::FlatDemand => {
            out.insert("demand".to_string(), vec![1.0; snapshots]);
        }
        SynthKind::SolarDiurnal => {
            let days = snapshots.div_ceil(24);
            let clearness: Vec<f64> = (0..days).map(|_| rng.gen_range(0.6..=1.0)).collect();
            let series = (0..snapshots)
                .map(|t| clearness[t / 24] * solar_shape(t % 24))
                .collect();
            out.insert("solar".to_string(), series);
        }
        SynthKind::WindAutocorrelated => {
            // AR(1) in a latent variable, squashed into (0.05, 0.95)
            let mut z: f64 = rng.gen_range(-1.0..1.0);
            let series = (0..snapshots)
                .map(|_| {
                    z = 0.85 * z + 0.5 * rng.gen_range(-1.0..1.0);
                    0.05 + 0.9 / (1.0 + (-1.5 * z).exp())
                })
                .collect();
            out.insert("wind".to_string(), series);
        }
        SynthKind::TwoDayFig1 => {
            if snapshots != 48 {
                return Err(ModelError::SnapshotCount {
                    kind,
                    expected: 48,
                    got: snapshots,
                });
            }
            let (lo, hi) = FIG1_DEMAND_RANGE;
            let demand = (0..48)
                .map(|t| {
                    let h = (t % 24) as f64;
                    // night trough, morning shoulder and an evening peak
                    let shape = 0.5 * (1.0 - (2.0 * std::f64::consts::PI * (h - 4.0) / 24.0).cos());
                    let evening = (-((h - 19.0) / 2.5).powi(2)).exp();
                    let jitter = rng.gen_range(-0.02..0.02);
                    let x = (0.75 * shape + 0.25 * evening + jitter).clamp(0.0, 1.0);
                    lo + (hi - lo) * x
                })
                .collect();
            let solar = (0..48)
                .map(|t| if t < 24 { 0.9 } else { 0.75 } * solar_shape(t % 24))
                .collect();
            out.insert("demand".to_string(), demand);
            out.insert("solar".to_string(), solar);
        }
    }
    Ok(out)
}

//! Scenario grids: one policy axis swept over a base scenario, points solved in parallel and
//! merged back in axis order.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::formulate::build_lp;
use crate::metrics::MetricsReport;
pub use crate::metrics::penetration_of;
use crate::model::{Co2Policy, EnergyTarget, PolicyConfig, StorageUnit, SupportPolicy};
use crate::outcome::Outcome;
use crate::scenario::{
    default_storage, load_scenario, scenario_from_value, to_canonical_json, Scenario, ScenarioError,
};
use crate::solve::{solve, Status, Tolerances};
use crate::verify::{verify_scenario, Verdict, VerificationReport};

/// Residual tolerance for the per-point verification.
pub const POINT_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AxisKind {
    /// Share of demand that the support set must dispatch.
    SupportShare,
    /// Share of demand that the support set must have available.
    AvailableTarget,
    Co2Cap,
    Co2Tax,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CapUnit {
    /// tCO₂ over the horizon.
    #[default]
    Absolute,
    /// tCO₂ per MWh of demand.
    Intensity,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Axis {
    pub kind: AxisKind,
    pub values: Vec<f64>,
    #[serde(default)]
    pub unit: CapUnit,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Variants {
    /// Add battery and hydrogen storage at every node and make every line expandable.
    #[serde(default)]
    pub flexibility: bool,
    #[serde(default)]
    pub negative_price_suppression: bool,
    /// Keep only these technologies (by name or id).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub technology_set: Option<Vec<String>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Output {
    MarketValue,
    Lcoe,
    Rmv,
    Capacity,
    Energy,
}

impl Output {
    fn column(self) -> &'static str {
        match self {
            Output::MarketValue => "mv",
            Output::Lcoe => "lcoe",
            Output::Rmv => "rmv",
            Output::Capacity => "capacity",
            Output::Energy => "energy",
        }
    }
}

fn default_outputs() -> Vec<Output> {
    vec![Output::MarketValue, Output::Lcoe, Output::Rmv]
}

fn yes() -> bool {
    true
}

/// The base scenario, either a path relative to the plan file or an inline document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum BaseRef {
    Path(String),
    Inline(Box<Value>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepPlan {
    pub name: String,
    pub base: BaseRef,
    pub axis: Axis,
    /// Technologies targeted by support and counted for penetration.
    #[serde(default)]
    pub support_set: Vec<String>,
    #[serde(default)]
    pub variants: Variants,
    #[serde(default = "default_outputs")]
    pub outputs: Vec<Output>,
    #[serde(default = "yes")]
    pub verify: bool,
}

#[derive(Debug, Error)]
pub enum SweepError {
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{path}: line {line}, column {column}: {message}")]
    Json {
        path: PathBuf,
        line: usize,
        column: usize,
        message: String,
    },
    #[error("invalid plan: {0}")]
    Plan(String),
}

/// Read a plan and resolve its base scenario.
pub fn load_plan(path: &Path) -> Result<(SweepPlan, Scenario), SweepError> {
    let text = fs::read_to_string(path).map_err(|source| SweepError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let plan: SweepPlan = serde_json::from_str(&text).map_err(|e| SweepError::Json {
        path: path.to_path_buf(),
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    let dir = path.parent().unwrap_or(Path::new("."));
    let base = match &plan.base {
        BaseRef::Path(p) => load_scenario(&dir.join(p))?,
        BaseRef::Inline(v) => scenario_from_value((**v).clone(), dir, &plan.name)?,
    };
    Ok((plan, base))
}

fn monotone(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[0] <= w[1]) || v.windows(2).all(|w| w[0] >= w[1])
}

/// Plan-level checks; everything else is reported per point.
pub fn check_plan(plan: &SweepPlan, base: &Scenario) -> Result<(), SweepError> {
    let err = |m: String| Err(SweepError::Plan(m));
    let a = &plan.axis;
    if a.values.is_empty() {
        return err("axis has no values".into());
    }
    if a.values.iter().any(|v| !v.is_finite()) {
        return err("axis values must be finite".into());
    }
    if !monotone(&a.values) {
        return err("axis values must be sorted".into());
    }
    if matches!(a.kind, AxisKind::SupportShare | AxisKind::AvailableTarget) && plan.support_set.is_empty() {
        return err("support axes need a nonempty `support_set`".into());
    }
    if a.unit == CapUnit::Intensity && a.kind != AxisKind::Co2Cap {
        return err("`unit: intensity` applies to co2_cap axes only".into());
    }
    let system = &base.system;
    for m in &plan.support_set {
        if !system.generators.iter().any(|g| g.spec.name == *m || g.id() == *m) {
            return err(format!("support technology `{m}` is not in the base scenario"));
        }
    }
    if let Some(set) = &plan.variants.technology_set {
        for m in set {
            if !system.generators.iter().any(|g| g.spec.name == *m || g.id() == *m) {
                return err(format!("technology `{m}` is not in the base scenario"));
            }
        }
    }
    Ok(())
}

/// The base scenario with the plan's variants applied.
pub fn apply_variants(plan: &SweepPlan, base: &Scenario) -> Scenario {
    let mut s = base.clone();
    let v = &plan.variants;
    if let Some(set) = &v.technology_set {
        s.system
            .generators
            .retain(|g| set.iter().any(|m| *m == g.spec.name || *m == g.id()));
    }
    if v.flexibility {
        for node in s.system.nodes.clone() {
            for name in ["battery", "hydrogen"] {
                let present = s.system.storages.iter().any(|u| u.node == node && u.spec.name == name);
                if !present {
                    let spec = default_storage(name).expect("catalog storage");
                    s.system.storages.push(StorageUnit { node: node.clone(), spec });
                }
            }
        }
        for l in &mut s.system.lines {
            l.expandable = true;
            l.backward_capacity = None;
        }
    }
    if v.negative_price_suppression {
        s.options.suppress_negative_prices = true;
    }
    s
}

/// Policy at one axis value; the axis replaces the matching part of the base policy.
pub fn point_policy(plan: &SweepPlan, base: &Scenario, value: f64) -> PolicyConfig {
    let mut p = base.policy.clone();
    let technologies = plan.support_set.clone();
    match plan.axis.kind {
        AxisKind::SupportShare => {
            p.support = (value > 0.0).then_some(SupportPolicy::Dispatched {
                technologies,
                target: EnergyTarget::Share(value),
            })
        }
        AxisKind::AvailableTarget => {
            p.support = (value > 0.0).then_some(SupportPolicy::Available {
                technologies,
                target: EnergyTarget::Share(value),
            })
        }
        AxisKind::Co2Cap => {
            let limit = match plan.axis.unit {
                CapUnit::Absolute => value,
                CapUnit::Intensity => value * base.system.total_demand(),
            };
            p.co2 = Some(Co2Policy::Cap { limit });
        }
        AxisKind::Co2Tax => p.co2 = (value > 0.0).then_some(Co2Policy::Tax { price: value }),
    }
    p
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PointStatus {
    Optimal,
    Infeasible,
    Unbounded,
    Error,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepPoint {
    pub index: usize,
    pub value: f64,
    pub status: PointStatus,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub objective: Option<f64>,
    pub penetration: Option<f64>,
    /// Metrics on raw prices.
    #[serde(skip)]
    pub report: Option<MetricsReport>,
    /// Metrics on prices clipped at zero, when the plan asks for it.
    #[serde(skip)]
    pub suppressed: Option<MetricsReport>,
    #[serde(skip)]
    pub verification: Option<VerificationReport>,
    pub verdict: Option<Verdict>,
}

impl SweepPoint {
    /// Market value of a technology, suppressed if available.
    pub fn market_value(&self, id: &str, suppressed: bool) -> Option<f64> {
        let r = if suppressed { self.suppressed.as_ref() } else { self.report.as_ref() };
        r?.technology(id)?.market_value
    }
}

#[derive(Debug, Clone)]
pub struct SweepResult {
    pub plan: SweepPlan,
    /// Technology ids in scenario order; these define the per-technology CSV columns.
    pub technologies: Vec<String>,
    pub config_hash: String,
    pub points: Vec<SweepPoint>,
}

impl SweepResult {
    pub fn verdict(&self) -> Verdict {
        Verdict::combine(self.points.iter().filter_map(|p| p.verdict))
    }

    pub fn column(&self, f: impl Fn(&SweepPoint) -> Option<f64>) -> Vec<Option<f64>> {
        self.points.iter().map(f).collect()
    }
}

/// SHA-256 over the plan and the canonical form of its (variant-applied) base scenario.
pub fn config_hash(plan: &SweepPlan, scenario: &Scenario) -> String {
    let doc = serde_json::json!({
        "plan": plan,
        "scenario": to_canonical_json(scenario),
    });
    let bytes = serde_json::to_vec(&doc).expect("plan serializes");
    hex::encode(Sha256::digest(&bytes))
}

fn solve_point(plan: &SweepPlan, scenario: &Scenario, index: usize, value: f64) -> SweepPoint {
    let mut point = SweepPoint {
        index,
        value,
        status: PointStatus::Error,
        error: None,
        objective: None,
        penetration: None,
        report: None,
        suppressed: None,
        verification: None,
        verdict: None,
    };
    let policy = point_policy(plan, scenario, value);
    let options = scenario.options.formulation();
    let lp = match build_lp(&scenario.system, &policy, options) {
        Ok(lp) => lp,
        Err(e) => {
            point.error = Some(e.to_string());
            return point;
        }
    };
    let sol = match solve(&lp, &Tolerances::default()) {
        Ok(sol) => sol,
        Err(e) => {
            point.error = Some(e.to_string());
            return point;
        }
    };
    point.status = match sol.status {
        Status::Optimal => PointStatus::Optimal,
        Status::Infeasible => PointStatus::Infeasible,
        Status::Unbounded => PointStatus::Unbounded,
    };
    if sol.status != Status::Optimal {
        return point;
    }
    let outcome = match Outcome::extract(&scenario.system, &policy, &lp, &sol) {
        Ok(o) => o,
        Err(e) => {
            point.status = PointStatus::Error;
            point.error = Some(e.to_string());
            return point;
        }
    };
    let set = (!plan.support_set.is_empty()).then_some(plan.support_set.as_slice());
    point.objective = Some(sol.objective);
    point.penetration = set.map(|s| penetration_of(&outcome, s));
    point.report = Some(MetricsReport::compute(&outcome, false, set));
    if scenario.options.suppress_negative_prices {
        point.suppressed = Some(MetricsReport::compute(&outcome, true, set));
    }
    if plan.verify {
        match verify_scenario(&scenario.system, &policy, options, &lp, &sol, POINT_TOLERANCE) {
            Ok(r) => {
                point.verdict = Some(r.verdict);
                point.verification = Some(r);
            }
            Err(e) => {
                point.verdict = Some(Verdict::Fail);
                point.error = Some(format!("verification: {e}"));
            }
        }
    }
    point
}

/// Solve every axis point with up to `parallelism` threads. Results are in axis order and do
/// not depend on the thread count.
pub fn run_sweep(plan: &SweepPlan, base: &Scenario, parallelism: usize) -> Result<SweepResult, SweepError> {
    check_plan(plan, base)?;
    let scenario = apply_variants(plan, base);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(parallelism.max(1))
        .build()
        .map_err(|e| SweepError::Plan(format!("thread pool: {e}")))?;
    let points: Vec<SweepPoint> = pool.install(|| {
        plan.axis
            .values
            .par_iter()
            .enumerate()
            .map(|(i, &v)| solve_point(plan, &scenario, i, v))
            .collect()
    });
    Ok(SweepResult {
        plan: plan.clone(),
        technologies: scenario.system.generators.iter().map(|g| g.id()).collect(),
        config_hash: config_hash(plan, &scenario),
        points,
    })
}

fn num(v: Option<f64>) -> String {
    v.map(|v| format!("{v:?}")).unwrap_or_default()
}

fn axis_name(kind: AxisKind) -> &'static str {
    match kind {
        AxisKind::SupportShare => "support_share",
        AxisKind::AvailableTarget => "available_target",
        AxisKind::Co2Cap => "co2_cap",
        AxisKind::Co2Tax => "co2_tax",
    }
}

/// One row per axis point, per-technology metrics as `<metric>[<id>]` columns.
pub fn write_sweep_csv<W: Write>(r: &SweepResult, out: W) -> io::Result<()> {
    let suppress = r.plan.variants.negative_price_suppression;
    let mut header = vec![axis_name(r.plan.axis.kind).to_string(), "status".into(), "penetration".into()];
    for id in &r.technologies {
        for o in &r.plan.outputs {
            header.push(format!("{}[{id}]", o.column()));
        }
        if suppress {
            header.push(format!("mv_suppressed[{id}]"));
        }
    }
    header.extend(
        [
            "support_price",
            "co2_price",
            "load_weighted_price",
            "average_price",
            "system_cost",
            "emissions",
            "verdict",
        ]
        .map(String::from),
    );
    let mut w = csv::Writer::from_writer(out);
    w.write_record(&header)?;
    for p in &r.points {
        let status = match p.status {
            PointStatus::Optimal => "optimal",
            PointStatus::Infeasible => "infeasible",
            PointStatus::Unbounded => "unbounded",
            PointStatus::Error => "error",
        };
        let mut row = vec![format!("{:?}", p.value), status.to_string(), num(p.penetration)];
        for id in &r.technologies {
            let t = p.report.as_ref().and_then(|m| m.technology(id));
            for o in &r.plan.outputs {
                row.push(num(t.and_then(|t| match o {
                    Output::MarketValue => t.market_value,
                    Output::Lcoe => t.lcoe,
                    Output::Rmv => t.rmv,
                    Output::Capacity => Some(t.capacity),
                    Output::Energy => Some(t.energy),
                })));
            }
            if suppress {
                row.push(num(p.market_value(id, true)));
            }
        }
        let m = p.report.as_ref();
        row.push(num(m.and_then(|m| m.policy.prices.support)));
        row.push(num(m.and_then(|m| m.policy.prices.co2)));
        row.push(num(m.map(|m| m.market.load_weighted_price)));
        row.push(num(m.map(|m| m.market.average_price)));
        row.push(num(p.objective));
        row.push(num(m.map(|m| m.policy.emissions)));
        row.push(p.verdict.map(|v| v.to_string()).unwrap_or_default());
        w.write_record(&row)?;
    }
    w.flush()
}

#[derive(Debug, Clone, Serialize)]
pub struct Manifest<'a> {
    pub name: &'a str,
    pub version: &'a str,
    pub config_hash: &'a str,
    pub axis: &'a Axis,
    pub csv: String,
    pub verdict: Verdict,
    pub points: &'a [SweepPoint],
}

pub fn manifest(r: &SweepResult, csv_name: &str) -> Value {
    serde_json::to_value(Manifest {
        name: &r.plan.name,
        version: env!("CARGO_PKG_VERSION"),
        config_hash: &r.config_hash,
        axis: &r.plan.axis,
        csv: csv_name.to_string(),
        verdict: r.verdict(),
        points: &r.points,
    })
    .expect("manifest serializes")
}

/// Write `<name>.csv` and `<name>.manifest.json` into `dir`; returns both paths.
pub fn write_outputs(r: &SweepResult, dir: &Path) -> Result<(PathBuf, PathBuf), SweepError> {
    let io_err = |path: &Path| {
        let path = path.to_path_buf();
        move |source| SweepError::Io { path, source }
    };
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let csv_path = dir.join(format!("{}.csv", r.plan.name));
    let mut buf = Vec::new();
    write_sweep_csv(r, &mut buf).map_err(io_err(&csv_path))?;
    fs::write(&csv_path, buf).map_err(io_err(&csv_path))?;
    let man_path = dir.join(format!("{}.manifest.json", r.plan.name));
    let text = serde_json::to_string_pretty(&manifest(r, &format!("{}.csv", r.plan.name))).expect("json");
    fs::write(&man_path, text + "\n").map_err(io_err(&man_path))?;
    Ok((csv_path, man_path))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::parse_scenario;

    fn base() -> Scenario {
        parse_scenario(
            r#"{
                "nodes": ["n"],
                "snapshots": 6,
                "discount_rate": 0.0,
                "demand": {"n": [1, 2, 3, 3, 2, 1]},
                "profiles": {"solar": [0, 0.5, 1, 0.8, 0.2, 0]},
                "technologies": [
                    {"node": "n", "name": "solar", "capex": 100, "lifetime": 1, "availability": "solar"},
                    {"node": "n", "name": "gas", "capex": 40, "lifetime": 1, "variable_cost": 30, "emission_factor": 0.5}
                ]
            }"#,
            Path::new("."),
        )
        .unwrap()
    }

    fn plan(kind: AxisKind, values: Vec<f64>) -> SweepPlan {
        SweepPlan {
            name: "t".into(),
            base: BaseRef::Path("unused.json".into()),
            axis: Axis {
                kind,
                values,
                unit: CapUnit::Absolute,
            },
            support_set: vec!["solar".into()],
            variants: Variants::default(),
            outputs: default_outputs(),
            verify: true,
        }
    }

    #[test]
    fn zero_share_is_unconstrained() {
        let b = base();
        let p = plan(AxisKind::SupportShare, vec![0.0]);
        assert_eq!(point_policy(&p, &b, 0.0), PolicyConfig::none());
        let r = run_sweep(&p, &b, 1).unwrap();
        assert_eq!(r.points[0].status, PointStatus::Optimal);
        assert_eq!(r.points[0].verdict, Some(Verdict::Pass));
    }

    #[test]
    fn thread_count_does_not_change_output() {
        let b = base();
        let p = plan(AxisKind::SupportShare, vec![0.0, 0.2, 0.4, 0.6]);
        let csv = |jobs| {
            let mut buf = Vec::new();
            write_sweep_csv(&run_sweep(&p, &b, jobs).unwrap(), &mut buf).unwrap();
            buf
        };
        assert_eq!(csv(1), csv(4));
    }

    #[test]
    fn binding_share_sets_penetration() {
        let b = base();
        let p = plan(AxisKind::SupportShare, vec![0.5]);
        let r = run_sweep(&p, &b, 1).unwrap();
        assert!((r.points[0].penetration.unwrap() - 0.5).abs() < 1e-9);
    }

    #[test]
    fn bad_plans_rejected() {
        let b = base();
        assert!(run_sweep(&plan(AxisKind::SupportShare, vec![]), &b, 1).is_err());
        assert!(run_sweep(&plan(AxisKind::Co2Tax, vec![1.0, 0.0, 2.0]), &b, 1).is_err());
        let mut p = plan(AxisKind::SupportShare, vec![0.1]);
        p.support_set = vec!["wind".into()];
        assert!(run_sweep(&p, &b, 1).is_err());
    }

    #[test]
    fn intensity_cap_scales_with_demand() {
        let b = base();
        let mut p = plan(AxisKind::Co2Cap, vec![0.1]);
        p.axis.unit = CapUnit::Intensity;
        let pol = point_policy(&p, &b, 0.1);
        assert_eq!(pol.co2, Some(Co2Policy::Cap { limit: 0.1 * 12.0 }));
    }

    #[test]
    fn flexibility_adds_storage() {
        let b = base();
        let mut p = plan(AxisKind::Co2Tax, vec![0.0]);
        p.variants.flexibility = true;
        let s = apply_variants(&p, &b);
        assert_eq!(s.system.storages.len(), 2);
        assert_eq!(apply_variants(&p, &s).system.storages.len(), 2);
    }
}

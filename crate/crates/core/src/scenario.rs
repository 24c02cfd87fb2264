//! JSON scenario documents, the bundled technology catalog, and time-series ingestion.
//!
//! A scenario names its nodes, demand and availability series, the candidate fleet (either
//! spelled out or taken from the catalog with overrides), lines, policy and options. See
//! `docs/scenario_schema.md` for the key reference.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use thiserror::Error;

use crate::formulate::FormulationOptions;
use crate::model::{
    synth_profiles, validate, Generator, LineSpec, PolicyConfig, PowerSystem, StorageSpec, StorageUnit,
    SynthKind, TechnologySpec,
};

pub const DEFAULT_VOLL: f64 = 1000.0;
pub const DEFAULT_DISCOUNT_RATE: f64 = 0.07;
/// Overnight transmission cost, € per MW and km.
pub const TRANSMISSION_COST_PER_MW_KM: f64 = 400.0;
pub const TRANSMISSION_LIFETIME: f64 = 40.0;

/// Thermal emission factors in tCO₂ per MWh of fuel.
const LIGNITE_EF_TH: f64 = 0.40;
const COAL_EF_TH: f64 = 0.34;
const GAS_EF_TH: f64 = 0.20;

fn thermal(name: &str, capex_per_kw: f64, lifetime: f64, fuel: f64, efficiency: f64, ef_th: f64) -> TechnologySpec {
    TechnologySpec {
        fuel_cost: Some(fuel),
        efficiency: Some(efficiency),
        emission_factor: ef_th / efficiency,
        ..TechnologySpec::dispatchable(name, capex_per_kw * 1000.0, lifetime, 0.0)
    }
}

fn variable(name: &str, capex_per_kw: f64) -> TechnologySpec {
    TechnologySpec {
        availability: Some(name.to_string()),
        ..TechnologySpec::dispatchable(name, capex_per_kw * 1000.0, 25.0, 0.0)
    }
}

/// Catalog technologies, in catalog order.
pub fn default_technologies() -> Vec<TechnologySpec> {
    vec![
        variable("wind", 1040.0),
        variable("solar", 510.0),
        thermal("nuclear", 6000.0, 50.0, 3.0, 0.33, 0.0),
        thermal("lignite", 2200.0, 25.0, 3.0, 0.43, LIGNITE_EF_TH),
        thermal("coal", 1500.0, 25.0, 11.5, 0.46, COAL_EF_TH),
        thermal("CCGT", 1000.0, 25.0, 25.0, 0.58, GAS_EF_TH),
        thermal("OCGT", 600.0, 25.0, 50.0, 0.39, GAS_EF_TH),
    ]
}

pub fn default_storages() -> Vec<StorageSpec> {
    vec![
        StorageSpec {
            name: "battery".into(),
            capex_discharge: 333_000.0,
            capex_charge: 0.0,
            capex_energy: 167_000.0,
            lifetime: 25.0,
            eta_discharge: 0.95,
            eta_charge: 0.95,
            eta_standing: 1.0,
            energy_to_power_ratio: None,
            existing_power: None,
        },
        StorageSpec {
            name: "hydrogen".into(),
            capex_discharge: 800_000.0,
            capex_charge: 750_000.0,
            capex_energy: 500.0,
            lifetime: 25.0,
            eta_discharge: 0.58,
            eta_charge: 0.8,
            eta_standing: 1.0,
            energy_to_power_ratio: None,
            existing_power: None,
        },
        StorageSpec {
            name: "pumped_hydro".into(),
            capex_discharge: 0.0,
            capex_charge: 0.0,
            capex_energy: 0.0,
            lifetime: 80.0,
            eta_discharge: 0.866,
            eta_charge: 0.866,
            eta_standing: 1.0,
            energy_to_power_ratio: Some(8.0),
            existing_power: None,
        },
    ]
}

fn lookup<T: Clone>(items: Vec<T>, name: &str, key: impl Fn(&T) -> &str) -> Option<T> {
    items.iter().find(|t| key(t).eq_ignore_ascii_case(name)).cloned()
}

pub fn default_technology(name: &str) -> Option<TechnologySpec> {
    lookup(default_technologies(), name, |t| &t.name)
}

pub fn default_storage(name: &str) -> Option<StorageSpec> {
    lookup(default_storages(), name, |s| &s.name)
}

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: line {line}, column {column}: {message}")]
    Json {
        path: PathBuf,
        line: usize,
        column: usize,
        message: String,
    },
    #[error("{path}: CSV: {message}")]
    Csv { path: PathBuf, message: String },
    #[error("scenario is invalid:\n  {}", .0.join("\n  "))]
    Invalid(Vec<String>),
}

impl ScenarioError {
    fn json(path: &Path, e: serde_json::Error) -> Self {
        ScenarioError::Json {
            path: path.to_path_buf(),
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        }
    }
}

/// A time series given inline, as a constant, from the CSV file, or synthesized.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SeriesSource {
    Inline(Vec<f64>),
    Constant {
        constant: f64,
    },
    Csv {
        csv: String,
        #[serde(default = "unit")]
        scale: f64,
    },
    Synth {
        synth: SynthKind,
        #[serde(default)]
        seed: u64,
        /// Which output of the generator to use; defaults to its only (or first) series.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        series: Option<String>,
        #[serde(default = "unit")]
        scale: f64,
    },
}

fn unit() -> f64 {
    1.0
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioOptions {
    #[serde(default)]
    pub enforce_kvl: bool,
    #[serde(default = "yes")]
    pub cyclic_soc: bool,
    #[serde(default)]
    pub suppress_negative_prices: bool,
    /// Add `(i + 1) · tie_break` €/MWh to the marginal cost of the i-th generator.
    #[serde(default)]
    pub tie_break: f64,
}

impl Default for ScenarioOptions {
    fn default() -> Self {
        ScenarioOptions {
            enforce_kvl: false,
            cyclic_soc: true,
            suppress_negative_prices: false,
            tie_break: 0.0,
        }
    }
}

impl ScenarioOptions {
    pub fn formulation(&self) -> FormulationOptions {
        FormulationOptions {
            enforce_kvl: self.enforce_kvl,
            cyclic_soc: self.cyclic_soc,
        }
    }
}

/// The document as written. Technology, storage and line entries stay as raw JSON objects
/// until they are merged with catalog defaults.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct Document {
    #[serde(default)]
    name: Option<String>,
    nodes: Vec<String>,
    #[serde(default)]
    snapshots: Option<usize>,
    #[serde(default)]
    timeseries_csv: Option<String>,
    /// `null` disables load shedding.
    #[serde(default = "default_voll")]
    voll: Option<f64>,
    #[serde(default = "default_rate")]
    discount_rate: f64,
    #[serde(default)]
    horizon_scaling: bool,
    demand: BTreeMap<String, SeriesSource>,
    #[serde(default)]
    profiles: BTreeMap<String, SeriesSource>,
    #[serde(default)]
    technologies: Vec<Map<String, Value>>,
    #[serde(default)]
    storages: Vec<Map<String, Value>>,
    #[serde(default)]
    lines: Vec<Map<String, Value>>,
    #[serde(default)]
    policy: PolicyConfig,
    #[serde(default)]
    options: ScenarioOptions,
}

fn default_voll() -> Option<f64> {
    Some(DEFAULT_VOLL)
}

fn default_rate() -> f64 {
    DEFAULT_DISCOUNT_RATE
}

/// A fully resolved scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub system: PowerSystem,
    pub policy: PolicyConfig,
    pub options: ScenarioOptions,
}

/// Read a scenario file. Relative CSV paths resolve against the file's directory.
pub fn load_scenario(path: &Path) -> Result<Scenario, ScenarioError> {
    let text = fs::read_to_string(path).map_err(|source| ScenarioError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let value: Value = serde_json::from_str(&text).map_err(|e| ScenarioError::json(path, e))?;
    let base = path.parent().unwrap_or(Path::new("."));
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("scenario");
    scenario_from_value(value, base, stem).map_err(|e| match e {
        ScenarioError::Json { line: 0, message, .. } => ScenarioError::Json {
            path: path.to_path_buf(),
            line: 0,
            column: 0,
            message,
        },
        other => other,
    })
}

/// Parse a scenario from a JSON string; CSV paths resolve against `base`.
pub fn parse_scenario(text: &str, base: &Path) -> Result<Scenario, ScenarioError> {
    let value: Value = serde_json::from_str(text).map_err(|e| ScenarioError::json(Path::new("<input>"), e))?;
    scenario_from_value(value, base, "scenario")
}

pub fn scenario_from_value(value: Value, base: &Path, fallback_name: &str) -> Result<Scenario, ScenarioError> {
    let doc: Document = serde_json::from_value(value).map_err(|e| ScenarioError::Json {
        path: PathBuf::from("<scenario>"),
        line: 0,
        column: 0,
        message: e.to_string(),
    })?;
    let mut problems = Vec::new();

    let csv_table = match &doc.timeseries_csv {
        Some(rel) => {
            let path = base.join(rel);
            Some(read_timeseries_csv(&path)?)
        }
        None => None,
    };

    let snapshots = match doc.snapshots {
        Some(n) => n,
        None => infer_snapshots(&doc, csv_table.as_ref()).unwrap_or(0),
    };
    if snapshots == 0 {
        problems.push("snapshots: cannot determine the number of snapshots; set `snapshots`".into());
    }

    let mut resolve = |what: String, src: &SeriesSource| -> Option<Vec<f64>> {
        match resolve_series(src, snapshots, csv_table.as_ref()) {
            Ok(v) => Some(v),
            Err(msg) => {
                problems.push(format!("{what}: {msg}"));
                None
            }
        }
    };
    let mut demand = BTreeMap::new();
    for (node, src) in &doc.demand {
        if let Some(v) = resolve(format!("demand.{node}"), src) {
            demand.insert(node.clone(), v);
        }
    }
    let mut profiles = BTreeMap::new();
    for (name, src) in &doc.profiles {
        if let Some(v) = resolve(format!("profiles.{name}"), src) {
            profiles.insert(name.clone(), v);
        }
    }

    let mut generators = Vec::new();
    for (i, entry) in doc.technologies.iter().enumerate() {
        match merge_entry::<TechnologySpec>(entry, "technology", default_technology, &TECH_NAMES) {
            Ok((node, spec)) => generators.push(Generator { node, spec }),
            Err(msg) => problems.push(format!("technologies[{i}]: {msg}")),
        }
    }
    let mut storages = Vec::new();
    for (i, entry) in doc.storages.iter().enumerate() {
        match merge_entry::<StorageSpec>(entry, "storage", default_storage, &STORAGE_NAMES) {
            Ok((node, spec)) => storages.push(StorageUnit { node, spec }),
            Err(msg) => problems.push(format!("storages[{i}]: {msg}")),
        }
    }
    let mut lines = Vec::new();
    for (i, entry) in doc.lines.iter().enumerate() {
        match line_entry(entry) {
            Ok(l) => lines.push(l),
            Err(msg) => problems.push(format!("lines[{i}]: {msg}")),
        }
    }

    let mut system = PowerSystem {
        nodes: doc.nodes.clone(),
        snapshots,
        demand,
        profiles,
        voll: doc.voll,
        discount_rate: doc.discount_rate,
        horizon_scaling: doc.horizon_scaling,
        generators,
        storages,
        lines,
    };
    if doc.options.tie_break != 0.0 {
        system.apply_tie_break(doc.options.tie_break);
    }
    if problems.is_empty() {
        problems.extend(validate(&system, &doc.policy).into_iter().map(|v| v.to_string()));
    }
    if !problems.is_empty() {
        return Err(ScenarioError::Invalid(problems));
    }
    Ok(Scenario {
        name: doc.name.unwrap_or_else(|| fallback_name.to_string()),
        system,
        policy: doc.policy,
        options: doc.options,
    })
}

static TECH_NAMES: std::sync::LazyLock<Vec<String>> =
    std::sync::LazyLock::new(|| default_technologies().into_iter().map(|t| t.name).collect());
static STORAGE_NAMES: std::sync::LazyLock<Vec<String>> =
    std::sync::LazyLock::new(|| default_storages().into_iter().map(|s| s.name).collect());

/// Merge `{"node": .., "default": .., <overrides>}` onto a catalog entry and deserialize.
fn merge_entry<T>(
    entry: &Map<String, Value>,
    what: &str,
    catalog: fn(&str) -> Option<T>,
    names: &[String],
) -> Result<(String, T), String>
where
    T: Serialize + for<'de> Deserialize<'de>,
{
    let mut fields = entry.clone();
    let node = match fields.remove("node") {
        Some(Value::String(n)) => n,
        Some(_) => return Err("`node` must be a string".into()),
        None => return Err("missing `node`".into()),
    };
    let mut merged = match fields.remove("default") {
        Some(Value::String(name)) => {
            let spec = catalog(&name).ok_or_else(|| {
                format!("unknown default {what} `{name}`; available: {}", names.join(", "))
            })?;
            match serde_json::to_value(spec).expect("catalog entries serialize") {
                Value::Object(m) => m,
                _ => unreachable!(),
            }
        }
        Some(_) => return Err("`default` must be a string".into()),
        None => Map::new(),
    };
    for (k, v) in fields {
        merged.insert(k, v);
    }
    let spec = serde_json::from_value(Value::Object(merged)).map_err(|e| e.to_string())?;
    Ok((node, spec))
}

fn line_entry(entry: &Map<String, Value>) -> Result<LineSpec, String> {
    let mut fields = entry.clone();
    if let Some(len) = fields.remove("length_km") {
        let km = len.as_f64().ok_or("`length_km` must be a number")?;
        if !fields.contains_key("capex") {
            fields.insert("capex".into(), Value::from(TRANSMISSION_COST_PER_MW_KM * km));
            fields.entry("lifetime").or_insert(Value::from(TRANSMISSION_LIFETIME));
        }
    }
    serde_json::from_value(Value::Object(fields)).map_err(|e| e.to_string())
}

fn infer_snapshots(doc: &Document, csv: Option<&CsvTable>) -> Option<usize> {
    let inline = doc.demand.values().chain(doc.profiles.values()).find_map(|s| match s {
        SeriesSource::Inline(v) => Some(v.len()),
        SeriesSource::Synth {
            synth: SynthKind::TwoDayFig1,
            ..
        } => Some(48),
        _ => None,
    });
    inline.or_else(|| csv.map(|c| c.rows))
}

fn resolve_series(src: &SeriesSource, snapshots: usize, csv: Option<&CsvTable>) -> Result<Vec<f64>, String> {
    let v = match src {
        SeriesSource::Inline(v) => v.clone(),
        SeriesSource::Constant { constant } => vec![*constant; snapshots],
        SeriesSource::Csv { csv: column, scale } => {
            let table = csv.ok_or("references a CSV column but `timeseries_csv` is not set")?;
            let col = table
                .columns
                .get(column)
                .ok_or_else(|| format!("CSV has no column `{column}`"))?;
            col.iter().map(|v| v * scale).collect()
        }
        SeriesSource::Synth {
            synth,
            seed,
            series,
            scale,
        } => {
            let out = synth_profiles(*seed, snapshots, *synth).map_err(|e| e.to_string())?;
            let key = match series {
                Some(k) => k.clone(),
                None => out.keys().next().cloned().unwrap_or_default(),
            };
            let v = out
                .get(&key)
                .ok_or_else(|| format!("generator `{synth}` has no series `{key}`"))?;
            v.iter().map(|x| x * scale).collect()
        }
    };
    if v.len() != snapshots {
        return Err(format!("has {} values for {snapshots} snapshots", v.len()));
    }
    Ok(v)
}

/// Columns of a time-series CSV keyed by header (`<node>_<series>`).
#[derive(Debug, Clone, PartialEq)]
pub struct CsvTable {
    pub timestamps: Vec<String>,
    pub columns: BTreeMap<String, Vec<f64>>,
    pub rows: usize,
}

/// Read `timestamp,<node>_<series>,...` with one row per snapshot.
pub fn read_timeseries_csv(path: &Path) -> Result<CsvTable, ScenarioError> {
    let err = |message: String| ScenarioError::Csv {
        path: path.to_path_buf(),
        message,
    };
    let mut reader = csv::Reader::from_path(path).map_err(|e| err(e.to_string()))?;
    let headers = reader.headers().map_err(|e| err(e.to_string()))?.clone();
    if headers.get(0) != Some("timestamp") {
        return Err(err("first column must be `timestamp`".into()));
    }
    let names: Vec<String> = headers.iter().skip(1).map(str::to_string).collect();
    for n in &names {
        if !n.contains('_') {
            return Err(err(format!("column `{n}` is not of the form <node>_<series>")));
        }
    }
    let mut columns: Vec<Vec<f64>> = vec![Vec::new(); names.len()];
    let mut timestamps = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| err(e.to_string()))?;
        timestamps.push(record.get(0).unwrap_or_default().to_string());
        for (j, col) in columns.iter_mut().enumerate() {
            let field = record.get(j + 1).unwrap_or_default();
            let v: f64 = field
                .trim()
                .parse()
                .map_err(|_| err(format!("row {}, column `{}`: invalid number `{field}`", i + 2, names[j])))?;
            col.push(v);
        }
    }
    Ok(CsvTable {
        rows: timestamps.len(),
        timestamps,
        columns: names.into_iter().zip(columns).collect(),
    })
}

/// Canonical, fully explicit form: every series inline, every entry spelled out.
pub fn to_canonical_json(s: &Scenario) -> Value {
    let entry = |node: &str, spec: Value| {
        let mut m = match spec {
            Value::Object(m) => m,
            _ => unreachable!(),
        };
        m.insert("node".into(), Value::from(node));
        Value::Object(m)
    };
    let mut options = s.options.clone();
    // tie-breaking is already folded into the marginal costs
    options.tie_break = 0.0;
    serde_json::json!({
        "name": s.name,
        "nodes": s.system.nodes,
        "snapshots": s.system.snapshots,
        "voll": s.system.voll,
        "discount_rate": s.system.discount_rate,
        "horizon_scaling": s.system.horizon_scaling,
        "demand": s.system.demand,
        "profiles": s.system.profiles,
        "technologies": s.system.generators.iter()
            .map(|g| entry(&g.node, serde_json::to_value(&g.spec).unwrap()))
            .collect::<Vec<_>>(),
        "storages": s.system.storages.iter()
            .map(|u| entry(&u.node, serde_json::to_value(&u.spec).unwrap()))
            .collect::<Vec<_>>(),
        "lines": s.system.lines,
        "policy": s.policy,
        "options": options,
    })
}

//! Market value, LCOE, relative market value and the other economic read-outs of a solved
//! equilibrium.

use std::collections::BTreeMap;
use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use crate::outcome::{GeneratorOutcome, Outcome};

/// Energy below this fraction of total demand counts as "not generating".
const ACTIVE_SHARE: f64 = 1e-9;

/// Prices within this band of zero count as zero, €/MWh.
const PRICE_EPS: f64 = 1e-7;

fn active(o: &Outcome, g: &GeneratorOutcome) -> bool {
    g.energy() > ACTIVE_SHARE * o.total_demand().max(1.0)
}

fn revenue_of(o: &Outcome, g: &GeneratorOutcome) -> f64 {
    g.dispatch.iter().zip(o.node_prices(&g.node)).map(|(g, p)| g * p).sum()
}

/// Generation-weighted average price, `Σ g λ / Σ g`. `None` when the technology does not run.
pub fn market_value(o: &Outcome, id: &str) -> Option<f64> {
    let g = o.generator(id)?;
    active(o, g).then(|| revenue_of(o, g) / g.energy())
}

/// `(c G + o Σg) / Σg` over dispatched, post-curtailment energy.
pub fn lcoe(o: &Outcome, id: &str) -> Option<f64> {
    let g = o.generator(id)?;
    active(o, g).then(|| g.cost() / g.energy())
}

/// Demand-weighted average price; demand is taken before shedding.
pub fn load_weighted_price(o: &Outcome) -> f64 {
    let d = o.total_demand();
    if d > 0.0 {
        o.consumer_payments() / d
    } else {
        f64::NAN
    }
}

/// Unweighted mean over all nodes and snapshots.
pub fn average_price(o: &Outcome) -> f64 {
    let n: usize = o.prices.values().map(Vec::len).sum();
    o.prices.values().flatten().sum::<f64>() / n as f64
}

/// Market value relative to the load-weighted average price.
pub fn rmv(o: &Outcome, id: &str) -> Option<f64> {
    let p = load_weighted_price(o);
    if p == 0.0 || !p.is_finite() {
        return None;
    }
    market_value(o, id).map(|mv| mv / p)
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PolicyPrices {
    /// `μ_Γ`, €/MWh.
    pub support: Option<f64>,
    /// `μ_Θ`, € per MWh of available energy.
    pub available: Option<f64>,
    /// `μ_Θ` expressed per dispatched MWh for each member, `μ_Θ G Σḡ / Σg`.
    pub available_per_mwh: BTreeMap<String, f64>,
    /// `μ_CO₂` of a cap, or the tax rate, €/t.
    pub co2: Option<f64>,
    pub fixed_premium: Option<f64>,
}

pub fn policy_prices(o: &Outcome) -> PolicyPrices {
    let mut available_per_mwh = BTreeMap::new();
    if let Some(mu) = o.policy.available {
        for g in o.generators.iter().filter(|g| g.supported_available && active(o, g)) {
            available_per_mwh.insert(g.id.clone(), mu * g.available_energy() / g.energy());
        }
    }
    PolicyPrices {
        support: o.policy.support,
        available: o.policy.available,
        available_per_mwh,
        co2: o.policy.co2_cap.or(o.policy.co2_tax),
        fixed_premium: o.policy.fixed_premium,
    }
}

/// A copy with every price floored at zero; the input is left as it is.
pub fn suppress_negative_prices(o: &Outcome) -> Outcome {
    let mut out = o.clone();
    for p in out.prices.values_mut().flatten() {
        *p = p.max(0.0);
    }
    out
}

/// Share of policy-set generation in total demand. May exceed 1 when storage losses are covered.
pub fn penetration_of(o: &Outcome, set: &[String]) -> f64 {
    let e: f64 = o
        .generators
        .iter()
        .filter(|g| set.iter().any(|m| *m == g.name || *m == g.id))
        .map(GeneratorOutcome::energy)
        .sum();
    e / o.total_demand()
}

fn sorted_desc(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_by(|a, b| b.total_cmp(a));
    v
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DurationCurves {
    /// Nodal prices sorted in descending order.
    pub price: BTreeMap<String, Vec<f64>>,
    /// Hourly revenue per MW of capacity, `λ g / G`, sorted in descending order.
    pub revenue: BTreeMap<String, Vec<f64>>,
}

pub fn duration_curves(o: &Outcome) -> DurationCurves {
    let price = o.prices.iter().map(|(n, p)| (n.clone(), sorted_desc(p.clone()))).collect();
    let revenue = o
        .generators
        .iter()
        .filter(|g| g.capacity > ACTIVE_SHARE * o.total_demand().max(1.0))
        .map(|g| {
            let r = g
                .dispatch
                .iter()
                .zip(o.node_prices(&g.node))
                .map(|(d, p)| p * d / g.capacity)
                .collect();
            (g.id.clone(), sorted_desc(r))
        })
        .collect();
    DurationCurves { price, revenue }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TechnologyMetrics {
    pub id: String,
    pub name: String,
    pub node: String,
    pub capacity: f64,
    pub energy: f64,
    pub revenue: f64,
    pub cost: f64,
    pub market_value: Option<f64>,
    pub lcoe: Option<f64>,
    pub rmv: Option<f64>,
    /// Cost share divided by energy share; equals `rmv` when no other constraint binds.
    pub rmv_from_shares: Option<f64>,
    pub cost_share: f64,
    pub energy_share: f64,
    /// Curtailed fraction of available energy, for weather-dependent technologies.
    pub curtailment: Option<f64>,
    /// Per-MWh support received outside the market.
    pub premium: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StorageMetrics {
    pub id: String,
    pub node: String,
    pub capacity_discharge: f64,
    pub capacity_charge: f64,
    pub capacity_energy: f64,
    pub cost: f64,
    /// `Σ λ (g_dis − g_sto)`.
    pub arbitrage_revenue: f64,
    pub discharged: f64,
    pub charged: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LineMetrics {
    pub name: String,
    pub capacity: f64,
    pub cost: f64,
    /// `Σ f (λ_to − λ_from)`.
    pub congestion_revenue: f64,
    pub cycle_term: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarketMetrics {
    pub load_weighted_price: f64,
    pub average_price: f64,
    pub min_price: f64,
    pub max_price: f64,
    pub negative_price_hours: usize,
    pub zero_price_hours: usize,
    pub total_demand: f64,
    pub shed_energy: f64,
    pub consumer_payments: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyMetrics {
    #[serde(flatten)]
    pub prices: PolicyPrices,
    /// Generation of the support set over total demand, when a support set exists.
    pub penetration: Option<f64>,
    pub emissions: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CostBreakdown {
    pub generators: BTreeMap<String, f64>,
    pub storage: BTreeMap<String, f64>,
    pub transmission: BTreeMap<String, f64>,
    pub load_shedding: f64,
}

impl CostBreakdown {
    pub fn total(&self) -> f64 {
        self.generators.values().sum::<f64>()
            + self.storage.values().sum::<f64>()
            + self.transmission.values().sum::<f64>()
            + self.load_shedding
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemMetrics {
    /// Resource cost, excluding CO₂ payments and subsidies.
    pub total_cost: f64,
    /// `total_cost` per MWh of demand.
    pub average_cost: f64,
    pub breakdown: CostBreakdown,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub negative_prices_suppressed: bool,
    pub technologies: Vec<TechnologyMetrics>,
    pub storages: Vec<StorageMetrics>,
    pub lines: Vec<LineMetrics>,
    pub market: MarketMetrics,
    pub policy: PolicyMetrics,
    pub system: SystemMetrics,
    pub curves: DurationCurves,
}

pub fn cost_breakdown(o: &Outcome) -> CostBreakdown {
    CostBreakdown {
        generators: o.generators.iter().map(|g| (g.id.clone(), g.cost())).collect(),
        storage: o.storages.iter().map(|s| (s.id.clone(), s.cost())).collect(),
        transmission: o
            .lines
            .iter()
            .map(|l| (l.name.clone(), l.capacity_cost * l.capacity))
            .collect(),
        load_shedding: o.shed_cost(),
    }
}

pub fn storage_arbitrage(o: &Outcome, id: &str) -> Option<f64> {
    let s = o.storages.iter().find(|s| s.id == id)?;
    let p = o.node_prices(&s.node);
    Some(
        s.discharge
            .iter()
            .zip(&s.charge)
            .zip(p)
            .map(|((d, c), p)| p * (d - c))
            .sum(),
    )
}

pub fn congestion_revenue(o: &Outcome, name: &str) -> Option<f64> {
    let l = o.lines.iter().find(|l| l.name == name)?;
    let (pf, pt) = (o.node_prices(&l.from), o.node_prices(&l.to));
    Some(l.flow.iter().zip(pf.iter().zip(pt)).map(|(f, (a, b))| f * (b - a)).sum())
}

impl MetricsReport {
    /// Compute every metric; with `suppress` the prices are floored at zero first.
    pub fn compute(outcome: &Outcome, suppress: bool, support_set: Option<&[String]>) -> Self {
        let suppressed;
        let o = if suppress {
            suppressed = suppress_negative_prices(outcome);
            &suppressed
        } else {
            outcome
        };
        let breakdown = cost_breakdown(o);
        let total_cost = breakdown.total();
        let demand = o.total_demand();
        let lw = load_weighted_price(o);
        let pp = policy_prices(o);

        let technologies = o
            .generators
            .iter()
            .map(|g| {
                let energy = g.energy();
                let cost = g.cost();
                let is_active = active(o, g);
                let mv = market_value(o, &g.id);
                let cost_share = if total_cost != 0.0 { cost / total_cost } else { 0.0 };
                let energy_share = energy / demand;
                let premium = if g.supported {
                    pp.support
                } else if g.supported_available {
                    pp.available_per_mwh.get(&g.id).copied()
                } else if g.fixed_premium {
                    pp.fixed_premium
                } else {
                    None
                };
                let available = g.available_energy();
                TechnologyMetrics {
                    id: g.id.clone(),
                    name: g.name.clone(),
                    node: g.node.clone(),
                    capacity: g.capacity,
                    energy,
                    revenue: revenue_of(o, g),
                    cost,
                    market_value: mv,
                    lcoe: lcoe(o, &g.id),
                    rmv: mv.filter(|_| lw.abs() > 0.0).map(|mv| mv / lw),
                    rmv_from_shares: is_active.then(|| cost_share / energy_share),
                    cost_share,
                    energy_share,
                    curtailment: (g.variable && available > 0.0).then(|| 1.0 - energy / available),
                    premium: if is_active { premium } else { None },
                }
            })
            .collect();

        let storages = o
            .storages
            .iter()
            .map(|s| StorageMetrics {
                id: s.id.clone(),
                node: s.node.clone(),
                capacity_discharge: s.capacity_discharge,
                capacity_charge: s.capacity_charge,
                capacity_energy: s.capacity_energy,
                cost: s.cost(),
                arbitrage_revenue: storage_arbitrage(o, &s.id).unwrap_or(0.0),
                discharged: s.discharge.iter().sum(),
                charged: s.charge.iter().sum(),
            })
            .collect();

        let lines = o
            .lines
            .iter()
            .map(|l| LineMetrics {
                name: l.name.clone(),
                capacity: l.capacity,
                cost: l.capacity_cost * l.capacity,
                congestion_revenue: congestion_revenue(o, &l.name).unwrap_or(0.0),
                cycle_term: l.cycle_term,
            })
            .collect();

        let all: Vec<f64> = o.prices.values().flatten().copied().collect();
        let market = MarketMetrics {
            load_weighted_price: lw,
            average_price: average_price(o),
            min_price: all.iter().copied().fold(f64::INFINITY, f64::min),
            max_price: all.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            negative_price_hours: all.iter().filter(|&&p| p < -PRICE_EPS).count(),
            zero_price_hours: all.iter().filter(|&&p| p.abs() <= PRICE_EPS).count(),
            total_demand: demand,
            shed_energy: o.shed_energy(),
            consumer_payments: o.consumer_payments(),
        };

        MetricsReport {
            negative_prices_suppressed: suppress,
            technologies,
            storages,
            lines,
            market,
            policy: PolicyMetrics {
                prices: pp,
                penetration: support_set.map(|s| penetration_of(o, s)),
                emissions: o.emissions(),
            },
            system: SystemMetrics {
                total_cost,
                average_cost: total_cost / demand,
                breakdown,
            },
            curves: duration_curves(o),
        }
    }

    pub fn technology(&self, id_or_name: &str) -> Option<&TechnologyMetrics> {
        self.technologies
            .iter()
            .find(|t| t.id == id_or_name)
            .or_else(|| self.technologies.iter().find(|t| t.name == id_or_name))
    }
}

pub const CSV_HEADER: [&str; 17] = [
    "scenario",
    "technology",
    "node",
    "capacity",
    "energy",
    "revenue",
    "cost",
    "market_value",
    "lcoe",
    "rmv",
    "curtailment",
    "premium",
    "support_price",
    "co2_price",
    "load_weighted_price",
    "average_system_cost",
    "penetration",
];

fn opt(v: Option<f64>) -> String {
    v.map(|v| format!("{v:?}")).unwrap_or_default()
}

/// One row per technology per scenario.
pub fn write_csv<W: Write>(reports: &[(&str, &MetricsReport)], out: W) -> io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER)?;
    for (label, r) in reports {
        for t in &r.technologies {
            w.write_record([
                label.to_string(),
                t.name.clone(),
                t.node.clone(),
                format!("{:?}", t.capacity),
                format!("{:?}", t.energy),
                format!("{:?}", t.revenue),
                format!("{:?}", t.cost),
                opt(t.market_value),
                opt(t.lcoe),
                opt(t.rmv),
                opt(t.curtailment),
                opt(t.premium),
                opt(r.policy.prices.support),
                opt(r.policy.prices.co2),
                format!("{:?}", r.market.load_weighted_price),
                format!("{:?}", r.system.average_cost),
                opt(r.policy.penetration),
            ])?;
        }
    }
    w.flush()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::outcome::PolicyDuals;

    fn tech(id: &str, dispatch: Vec<f64>, capacity: f64, c: f64, o: f64) -> GeneratorOutcome {
        let t = dispatch.len();
        GeneratorOutcome {
            id: format!("{id}@n"),
            name: id.to_string(),
            node: "n".into(),
            capacity,
            dispatch,
            availability: vec![1.0; t],
            variable: false,
            capacity_cost: c,
            marginal_cost: o,
            emission_factor: 0.0,
            scarcity_rent: vec![0.0; t],
            potential_rent: None,
            supported: false,
            supported_available: false,
            fixed_premium: false,
        }
    }

    fn outcome(prices: Vec<f64>, gens: Vec<GeneratorOutcome>) -> Outcome {
        let t = prices.len();
        Outcome {
            nodes: vec!["n".into()],
            snapshots: t,
            demand: BTreeMap::from([("n".to_string(), vec![1.0; t])]),
            prices: BTreeMap::from([("n".to_string(), prices)]),
            shed: BTreeMap::from([("n".to_string(), vec![0.0; t])]),
            voll: None,
            generators: gens,
            storages: vec![],
            lines: vec![],
            policy: PolicyDuals::default(),
            objective: 0.0,
        }
    }

    #[test]
    fn constant_price_gives_that_market_value() {
        let o = outcome(vec![42.0; 3], vec![tech("a", vec![0.3, 0.0, 2.0], 2.0, 1.0, 0.0)]);
        assert_eq!(market_value(&o, "a"), Some(42.0));
    }

    #[test]
    fn suppression_example() {
        let o = outcome(vec![-5.0, 10.0], vec![tech("a", vec![1.0, 1.0], 1.0, 0.0, 0.0)]);
        assert_eq!(market_value(&o, "a"), Some(2.5));
        let s = suppress_negative_prices(&o);
        assert_eq!(market_value(&s, "a"), Some(5.0));
        assert_eq!(o.prices["n"], vec![-5.0, 10.0]);
        assert_eq!(suppress_negative_prices(&s), s);
    }

    #[test]
    fn lcoe_examples() {
        // 87.6 €/kW/a at full utilization over a year
        let o = outcome(vec![0.0; 8760], vec![tech("a", vec![1.0; 8760], 1.0, 87_600.0, 0.0)]);
        assert!((lcoe(&o, "a").unwrap() - 10.0).abs() < 1e-12);
        let mut half = vec![1.0; 8760];
        half.iter_mut().step_by(2).for_each(|v| *v = 0.0);
        let o2 = outcome(vec![0.0; 8760], vec![tech("a", half, 1.0, 87_600.0, 0.0)]);
        assert!((lcoe(&o2, "a").unwrap() - 20.0).abs() < 1e-12);
        let shed = outcome(vec![0.0; 2], vec![tech("voll", vec![1.0, 1.0], 0.0, 0.0, 1000.0)]);
        assert_eq!(lcoe(&shed, "voll"), Some(1000.0));
    }

    #[test]
    fn zero_generation_is_absent() {
        let o = outcome(vec![1.0; 2], vec![tech("a", vec![0.0, 0.0], 0.0, 1.0, 1.0)]);
        assert_eq!(market_value(&o, "a"), None);
        assert_eq!(lcoe(&o, "a"), None);
        assert!(duration_curves(&o).revenue.is_empty());
    }

    #[test]
    fn duration_curves_are_sorted() {
        let o = outcome(vec![3.0, -1.0, 7.0], vec![tech("a", vec![1.0, 1.0, 0.5], 1.0, 1.0, 0.0)]);
        let c = duration_curves(&o);
        assert_eq!(c.price["n"], vec![7.0, 3.0, -1.0]);
        assert_eq!(c.revenue["a@n"], vec![3.5, 3.0, -1.0]);
    }

    #[test]
    fn single_technology_rmv_is_one() {
        let o = outcome(vec![30.0, 50.0], vec![tech("a", vec![1.0, 1.0], 1.0, 60.0, 10.0)]);
        assert_eq!(rmv(&o, "a"), Some(1.0));
        let r = MetricsReport::compute(&o, false, None);
        assert_eq!(r.technologies[0].rmv_from_shares, Some(1.0));
    }
}

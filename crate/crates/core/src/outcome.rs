//! Map a solved program back onto the entities of the system.
//!
//! Dual signs are normalized here so that every multiplier is reported with its economic
//! sign: prices and premiums positive when binding, scarcity rents non-negative.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::formulate::{cycle_basis, cycle_entity, store_part, SYSTEM_ENTITY};
use crate::lp::{Family, LinearProgram, Tag};
use crate::model::{Co2Policy, ModelError, PolicyConfig, PowerSystem, SupportPolicy};
use crate::solve::{Solution, Status};

#[derive(Debug, Error)]
pub enum ExtractError {
    #[error("solution is {0:?}, not optimal")]
    NotOptimal(Status),
    #[error("program has no {0} for this system; was it built from a different scenario?")]
    Missing(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorOutcome {
    pub id: String,
    pub name: String,
    pub node: String,
    pub capacity: f64,
    pub dispatch: Vec<f64>,
    /// Per-unit availability `ḡ_t`.
    pub availability: Vec<f64>,
    /// True when availability comes from a weather profile.
    pub variable: bool,
    /// `c_s` over the modelled horizon, €/MW.
    pub capacity_cost: f64,
    /// Technology marginal cost `o_s` without any policy shift, €/MWh.
    pub marginal_cost: f64,
    pub emission_factor: f64,
    /// Multiplier of the dispatch upper bound per snapshot, €/MWh.
    pub scarcity_rent: Vec<f64>,
    /// Multiplier of the potential limit, €/MW, when one is set.
    pub potential_rent: Option<f64>,
    /// Member of a dispatched-energy support set.
    pub supported: bool,
    /// Member of an available-energy support set.
    pub supported_available: bool,
    /// Member of a fixed-premium set.
    pub fixed_premium: bool,
}

impl GeneratorOutcome {
    pub fn energy(&self) -> f64 {
        self.dispatch.iter().sum()
    }

    pub fn available_energy(&self) -> f64 {
        self.capacity * self.availability.iter().sum::<f64>()
    }

    /// Technology cost `c_s G_s + o_s Σ g`.
    pub fn cost(&self) -> f64 {
        self.capacity_cost * self.capacity + self.marginal_cost * self.energy()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StorageOutcome {
    pub id: String,
    pub node: String,
    pub capacity_discharge: f64,
    pub capacity_charge: f64,
    pub capacity_energy: f64,
    pub cost_discharge: f64,
    pub cost_charge: f64,
    pub cost_energy: f64,
    /// False when the power capacity is fixed to an existing value.
    pub extendable: bool,
    pub discharge: Vec<f64>,
    pub charge: Vec<f64>,
    pub level: Vec<f64>,
}

impl StorageOutcome {
    pub fn cost(&self) -> f64 {
        self.cost_discharge * self.capacity_discharge
            + self.cost_charge * self.capacity_charge
            + self.cost_energy * self.capacity_energy
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LineOutcome {
    pub name: String,
    pub from: String,
    pub to: String,
    pub expandable: bool,
    pub existing_capacity: f64,
    pub capacity: f64,
    /// `c_ℓ` per MW over the modelled horizon (zero for fixed lines).
    pub capacity_cost: f64,
    pub flow: Vec<f64>,
    /// `Σ_t f_t Σ_c λ_{c,t} C_{ℓc} x_ℓ`; zero without KVL rows.
    pub cycle_term: f64,
}

/// Policy multipliers with economic signs; `None` when the instrument is absent.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PolicyDuals {
    /// `μ_Γ`, €/MWh.
    pub support: Option<f64>,
    /// `μ_Θ`, € per MWh of available energy.
    pub available: Option<f64>,
    /// `μ_CO₂` of a cap, €/t.
    pub co2_cap: Option<f64>,
    /// Exogenous CO₂ tax, €/t.
    pub co2_tax: Option<f64>,
    /// Exogenous fixed premium, €/MWh.
    pub fixed_premium: Option<f64>,
}

impl PolicyDuals {
    /// The CO₂ price seen by generators, whichever instrument sets it.
    pub fn co2_price(&self) -> f64 {
        self.co2_cap.or(self.co2_tax).unwrap_or(0.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Outcome {
    pub nodes: Vec<String>,
    pub snapshots: usize,
    pub demand: BTreeMap<String, Vec<f64>>,
    /// Nodal prices `λ_{n,t}` from the balance rows.
    pub prices: BTreeMap<String, Vec<f64>>,
    pub shed: BTreeMap<String, Vec<f64>>,
    pub voll: Option<f64>,
    pub generators: Vec<GeneratorOutcome>,
    pub storages: Vec<StorageOutcome>,
    pub lines: Vec<LineOutcome>,
    pub policy: PolicyDuals,
    pub objective: f64,
}

impl Outcome {
    pub fn extract(
        system: &PowerSystem,
        policy: &PolicyConfig,
        lp: &LinearProgram,
        sol: &Solution,
    ) -> Result<Outcome, ExtractError> {
        if sol.status != Status::Optimal {
            return Err(ExtractError::NotOptimal(sol.status));
        }
        let t_count = system.snapshots;
        let col = |tag: Tag| -> Result<f64, ExtractError> {
            lp.column_index(&tag)
                .map(|c| sol.primal[c])
                .ok_or_else(|| ExtractError::Missing(format!("column {tag}")))
        };
        let row_dual = |tag: Tag| -> Result<f64, ExtractError> {
            lp.row_index(&tag)
                .map(|r| sol.dual[r])
                .ok_or_else(|| ExtractError::Missing(format!("row {tag}")))
        };
        let series = |family: Family, entity: &str| -> Result<Vec<f64>, ExtractError> {
            (0..t_count).map(|t| col(Tag::at(family, entity, t))).collect()
        };

        let mut prices = BTreeMap::new();
        let mut shed = BTreeMap::new();
        for node in &system.nodes {
            let lambda = (0..t_count)
                .map(|t| row_dual(Tag::at(Family::Balance, node.as_str(), t)))
                .collect::<Result<Vec<_>, _>>()?;
            prices.insert(node.clone(), lambda);
            let s = if system.voll.is_some() {
                series(Family::Shed, node)?
            } else {
                vec![0.0; t_count]
            };
            shed.insert(node.clone(), s);
        }
        let demand = system
            .nodes
            .iter()
            .map(|n| {
                let mut d = system.demand_at(n).to_vec();
                d.resize(t_count, 0.0);
                (n.clone(), d)
            })
            .collect();

        let in_set = |set: Option<&SupportPolicy>, want: fn(&SupportPolicy) -> bool| -> Vec<usize> {
            match set {
                Some(s) if want(s) => system.members(s.technologies()).map(|(i, _)| i).collect(),
                _ => Vec::new(),
            }
        };
        let support = policy.support.as_ref();
        let dispatched = in_set(support, |s| matches!(s, SupportPolicy::Dispatched { .. }));
        let available = in_set(support, |s| matches!(s, SupportPolicy::Available { .. }));
        let fip = in_set(support, |s| matches!(s, SupportPolicy::FixedFip { .. }));

        let mut generators = Vec::with_capacity(system.generators.len());
        for (gi, gen) in system.generators.iter().enumerate() {
            let id = gen.id();
            let potential_rent = match gen.spec.max_potential {
                Some(_) => Some(-row_dual(Tag::fixed(Family::Potential, id.as_str()))?),
                None => None,
            };
            let scarcity_rent = (0..t_count)
                .map(|t| row_dual(Tag::at(Family::GenUpper, id.as_str(), t)).map(|y| -y))
                .collect::<Result<Vec<_>, _>>()?;
            generators.push(GeneratorOutcome {
                capacity: col(Tag::fixed(Family::Capacity, id.as_str()))?,
                dispatch: series(Family::Dispatch, &id)?,
                availability: system.availability(gen)?,
                variable: gen.spec.availability.is_some(),
                capacity_cost: system.capacity_cost(gen)?,
                marginal_cost: gen.spec.marginal_cost(),
                emission_factor: gen.spec.emission_factor,
                scarcity_rent,
                potential_rent,
                supported: dispatched.contains(&gi),
                supported_available: available.contains(&gi),
                fixed_premium: fip.contains(&gi),
                name: gen.spec.name.clone(),
                node: gen.node.clone(),
                id,
            });
        }

        let mut storages = Vec::with_capacity(system.storages.len());
        for unit in &system.storages {
            let id = unit.id();
            let costs = system.storage_costs(unit)?;
            let cap = |part: &str| col(Tag::fixed(Family::StoreCapacity, store_part(part, &id)));
            storages.push(StorageOutcome {
                capacity_discharge: cap("dis")?,
                capacity_charge: cap("sto")?,
                capacity_energy: cap("ene")?,
                cost_discharge: costs.discharge,
                cost_charge: costs.charge,
                cost_energy: costs.energy,
                extendable: unit.spec.existing_power.is_none(),
                discharge: series(Family::Discharge, &id)?,
                charge: series(Family::Charge, &id)?,
                level: series(Family::Level, &id)?,
                node: unit.node.clone(),
                id,
            });
        }

        let kvl = lp.rows_in(Family::KvlCycle).next().is_some();
        let cycles = if kvl { cycle_basis(&system.lines) } else { Vec::new() };
        let mut lines = Vec::with_capacity(system.lines.len());
        for (li, line) in system.lines.iter().enumerate() {
            let flow = series(Family::Flow, &line.name)?;
            let (capacity, capacity_cost) = if line.expandable {
                (
                    col(Tag::fixed(Family::LineCapacity, line.name.as_str()))?,
                    system.line_cost(line)?,
                )
            } else {
                (line.existing_capacity, 0.0)
            };
            let mut cycle_term = 0.0;
            for (ci, cycle) in cycles.iter().enumerate() {
                for &(member, sign) in cycle {
                    if member != li {
                        continue;
                    }
                    let x = line.reactance.unwrap_or(0.0);
                    for (t, f) in flow.iter().enumerate() {
                        cycle_term += f * row_dual(Tag::at(Family::KvlCycle, cycle_entity(ci), t))? * sign * x;
                    }
                }
            }
            lines.push(LineOutcome {
                name: line.name.clone(),
                from: line.from.clone(),
                to: line.to.clone(),
                expandable: line.expandable,
                existing_capacity: line.existing_capacity,
                capacity,
                capacity_cost,
                flow,
                cycle_term,
            });
        }

        let system_row = |family| lp.row_index(&Tag::fixed(family, SYSTEM_ENTITY)).map(|r| sol.dual[r]);
        let duals = PolicyDuals {
            support: system_row(Family::VreDispatched),
            available: system_row(Family::VreAvailable),
            co2_cap: system_row(Family::Co2Cap).map(|y| -y),
            co2_tax: match policy.co2 {
                Some(Co2Policy::Tax { price }) => Some(price),
                _ => None,
            },
            fixed_premium: match policy.support {
                Some(SupportPolicy::FixedFip { premium, .. }) => Some(premium),
                _ => None,
            },
        };

        Ok(Outcome {
            nodes: system.nodes.clone(),
            snapshots: t_count,
            demand,
            prices,
            shed,
            voll: system.voll,
            generators,
            storages,
            lines,
            policy: duals,
            objective: sol.objective,
        })
    }

    pub fn generator(&self, id_or_name: &str) -> Option<&GeneratorOutcome> {
        self.generators
            .iter()
            .find(|g| g.id == id_or_name)
            .or_else(|| self.generators.iter().find(|g| g.name == id_or_name))
    }

    pub fn total_demand(&self) -> f64 {
        self.demand.values().flatten().sum()
    }

    pub fn node_prices(&self, node: &str) -> &[f64] {
        self.prices.get(node).map(Vec::as_slice).unwrap_or(&[])
    }

    /// `Σ_{n,t} λ_{n,t} d_{n,t}`: what consumers pay.
    pub fn consumer_payments(&self) -> f64 {
        self.demand
            .iter()
            .map(|(n, d)| d.iter().zip(self.node_prices(n)).map(|(d, p)| d * p).sum::<f64>())
            .sum()
    }

    /// Emissions in tCO₂ over the horizon.
    pub fn emissions(&self) -> f64 {
        self.generators.iter().map(|g| g.emission_factor * g.energy()).sum()
    }

    pub fn shed_energy(&self) -> f64 {
        self.shed.values().flatten().sum()
    }

    pub fn shed_cost(&self) -> f64 {
        self.voll.unwrap_or(0.0) * self.shed_energy()
    }
}

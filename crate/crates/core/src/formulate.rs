//! Translation of a [`PowerSystem`] under a [`PolicyConfig`] into a cost-minimizing LP.
//!
//! Under perfectly inelastic demand, minimizing total cost is the same problem as
//! maximizing welfare. Every row carries a tag, so the dual of each constraint maps back
//! to a named price: nodal prices on `balance` rows, scarcity rents on `gen-upper`, the
//! feed-in premium on `vre-dispatched`, the CO₂ price on `co2-cap`, and so on.
//!
//! Non-linear (convex) cost curves are not supported; everything here is a pure LP.

use std::collections::{BTreeMap, VecDeque};

use thiserror::Error;

use crate::lp::{Family, LinearProgram, LpError, Sense, Tag};
use crate::model::{
    Co2Policy, LineSpec, ModelError, PolicyConfig, PowerSystem, SupportPolicy,
};

#[derive(Debug, Error, PartialEq)]
pub enum FormulateError {
    #[error("system has no snapshots")]
    NoSnapshots,
    #[error("unresolvable profile reference: {0}")]
    Profile(String),
    #[error("KVL requested but line `{0}` has no reactance")]
    MissingReactance(String),
    #[error("node `{0}` referenced but not defined")]
    UnknownNode(String),
    #[error("policy row `{0}` is absent from the program")]
    PolicyRowAbsent(&'static str),
    #[error("{0}")]
    Unsupported(&'static str),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Lp(#[from] LpError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FormulationOptions {
    pub enforce_kvl: bool,
    pub cyclic_soc: bool,
}

impl Default for FormulationOptions {
    fn default() -> Self {
        FormulationOptions {
            enforce_kvl: false,
            cyclic_soc: true,
        }
    }
}

/// Entity id of the single system-wide policy rows.
pub const SYSTEM_ENTITY: &str = "system";

/// A cycle in the line graph as `(line index, orientation)` pairs.
pub type Cycle = Vec<(usize, f64)>;

/// Entity id of a storage sub-component, e.g. `dis:battery@DE`.
pub fn store_part(part: &str, storage_id: &str) -> String {
    format!("{part}:{storage_id}")
}

pub fn cycle_entity(c: usize) -> String {
    format!("c{c}")
}

/// Build the equilibrium LP.
pub fn build_lp(
    system: &PowerSystem,
    policy: &PolicyConfig,
    options: FormulationOptions,
) -> Result<LinearProgram, FormulateError> {
    let t_count = system.snapshots;
    if t_count == 0 {
        return Err(FormulateError::NoSnapshots);
    }
    let mut lp = LinearProgram::new("equilibrium");

    let tax = match policy.co2 {
        Some(Co2Policy::Tax { price }) => price,
        _ => 0.0,
    };
    let fip_members: Vec<usize> = match &policy.support {
        Some(SupportPolicy::FixedFip { technologies, .. }) => {
            system.members(technologies).map(|(i, _)| i).collect()
        }
        _ => Vec::new(),
    };
    let fip = match &policy.support {
        Some(SupportPolicy::FixedFip { premium, .. }) => *premium,
        _ => 0.0,
    };

    // balance rows first so their indices are predictable: node-major, snapshot-minor
    let mut balance = BTreeMap::new();
    for node in &system.nodes {
        let demand = system.demand_at(node);
        let mut rows = Vec::with_capacity(t_count);
        for t in 0..t_count {
            let d = demand.get(t).copied().unwrap_or(0.0);
            rows.push(lp.add_row(Tag::at(Family::Balance, node.as_str(), t), Sense::Eq, d)?);
        }
        balance.insert(node.as_str(), rows);
    }
    let balance_row = |node: &str, t: usize| -> Result<usize, FormulateError> {
        balance
            .get(node)
            .map(|rows| rows[t])
            .ok_or_else(|| FormulateError::UnknownNode(node.to_string()))
    };

    // generators
    let mut dispatch_cols = Vec::with_capacity(system.generators.len());
    let mut capacity_cols = Vec::with_capacity(system.generators.len());
    for (gi, gen) in system.generators.iter().enumerate() {
        let id = gen.id();
        let avail = system
            .availability(gen)
            .map_err(|e| FormulateError::Profile(format!("{id}: {e}")))?;
        if avail.len() != t_count {
            return Err(FormulateError::Profile(format!(
                "{id}: profile has {} values for {t_count} snapshots",
                avail.len()
            )));
        }
        let cap = lp.add_column(
            Tag::fixed(Family::Capacity, id.as_str()),
            0.0,
            f64::INFINITY,
            system.capacity_cost(gen)?,
        )?;
        let mut o = gen.spec.marginal_cost() + gen.spec.emission_factor * tax;
        if fip_members.contains(&gi) {
            o -= fip;
        }
        let mut cols = Vec::with_capacity(t_count);
        for (t, &a) in avail.iter().enumerate() {
            let g = lp.add_column(Tag::at(Family::Dispatch, id.as_str(), t), 0.0, f64::INFINITY, o)?;
            lp.add_entry(balance_row(&gen.node, t)?, g, 1.0);
            let upper = lp.add_row(Tag::at(Family::GenUpper, id.as_str(), t), Sense::Le, 0.0)?;
            lp.add_entry(upper, g, 1.0);
            lp.add_entry(upper, cap, -a);
            cols.push(g);
        }
        if let Some(max) = gen.spec.max_potential {
            let row = lp.add_row(Tag::fixed(Family::Potential, id.as_str()), Sense::Le, max)?;
            lp.add_entry(row, cap, 1.0);
        }
        dispatch_cols.push(cols);
        capacity_cols.push(cap);
    }

    // load shedding: an unbounded dispatch at VOLL without a capacity column
    let mut shed_cols = Vec::new();
    if let Some(voll) = system.voll {
        for node in &system.nodes {
            for t in 0..t_count {
                let s = lp.add_column(Tag::at(Family::Shed, node.as_str(), t), 0.0, f64::INFINITY, voll)?;
                lp.add_entry(balance_row(node, t)?, s, 1.0);
                shed_cols.push(s);
            }
        }
    }

    // storage
    for unit in &system.storages {
        let id = unit.id();
        let s = &unit.spec;
        let costs = system.storage_costs(unit)?;
        let (dis_bounds, ene_bounds) = match s.existing_power {
            Some(p) => {
                let e = s.energy_to_power_ratio.map(|r| r * p);
                ((p, p), e.map_or((0.0, f64::INFINITY), |e| (e, e)))
            }
            None => ((0.0, f64::INFINITY), (0.0, f64::INFINITY)),
        };
        let cap_dis = lp.add_column(
            Tag::fixed(Family::StoreCapacity, store_part("dis", &id)),
            dis_bounds.0,
            dis_bounds.1,
            costs.discharge,
        )?;
        let cap_sto = lp.add_column(
            Tag::fixed(Family::StoreCapacity, store_part("sto", &id)),
            dis_bounds.0,
            dis_bounds.1,
            costs.charge,
        )?;
        let cap_ene = lp.add_column(
            Tag::fixed(Family::StoreCapacity, store_part("ene", &id)),
            ene_bounds.0,
            ene_bounds.1,
            costs.energy,
        )?;
        if let (Some(ratio), None) = (s.energy_to_power_ratio, s.existing_power) {
            let row = lp.add_row(Tag::fixed(Family::StoreRatio, id.as_str()), Sense::Eq, 0.0)?;
            lp.add_entry(row, cap_ene, 1.0);
            lp.add_entry(row, cap_dis, -ratio);
        }
        let mut dis = Vec::with_capacity(t_count);
        let mut sto = Vec::with_capacity(t_count);
        let mut soc = Vec::with_capacity(t_count);
        for t in 0..t_count {
            dis.push(lp.add_column(Tag::at(Family::Discharge, id.as_str(), t), 0.0, f64::INFINITY, 0.0)?);
            sto.push(lp.add_column(Tag::at(Family::Charge, id.as_str(), t), 0.0, f64::INFINITY, 0.0)?);
            soc.push(lp.add_column(Tag::at(Family::Level, id.as_str(), t), 0.0, f64::INFINITY, 0.0)?);
        }
        for t in 0..t_count {
            let bal = balance_row(&unit.node, t)?;
            lp.add_entry(bal, dis[t], 1.0);
            lp.add_entry(bal, sto[t], -1.0);
            for (part, var, cap) in [("dis", dis[t], cap_dis), ("sto", sto[t], cap_sto), ("ene", soc[t], cap_ene)] {
                let row = lp.add_row(Tag::at(Family::StoreUpper, store_part(part, &id), t), Sense::Le, 0.0)?;
                lp.add_entry(row, var, 1.0);
                lp.add_entry(row, cap, -1.0);
            }
            let row = lp.add_row(Tag::at(Family::StoreSoc, id.as_str(), t), Sense::Eq, 0.0)?;
            let prev = match (t, options.cyclic_soc) {
                (0, true) => Some(soc[t_count - 1]),
                (0, false) => None,
                _ => Some(soc[t - 1]),
            };
            match prev {
                Some(p) if p == soc[t] => lp.add_entry(row, soc[t], 1.0 - s.eta_standing),
                Some(p) => {
                    lp.add_entry(row, soc[t], 1.0);
                    lp.add_entry(row, p, -s.eta_standing);
                }
                None => lp.add_entry(row, soc[t], 1.0),
            }
            lp.add_entry(row, sto[t], -s.eta_charge);
            lp.add_entry(row, dis[t], 1.0 / s.eta_discharge);
        }
    }

    // lines: balance rows gain -f at the sending node and +f at the receiving node
    let mut flow_cols = Vec::with_capacity(system.lines.len());
    for line in &system.lines {
        let id = line.name.as_str();
        let cap = if line.expandable {
            Some(lp.add_column(
                Tag::fixed(Family::LineCapacity, id),
                line.existing_capacity,
                f64::INFINITY,
                system.line_cost(line)?,
            )?)
        } else {
            None
        };
        let mut flows = Vec::with_capacity(t_count);
        for t in 0..t_count {
            let f = lp.add_column(Tag::at(Family::Flow, id, t), f64::NEG_INFINITY, f64::INFINITY, 0.0)?;
            lp.add_entry(balance_row(&line.from, t)?, f, -1.0);
            lp.add_entry(balance_row(&line.to, t)?, f, 1.0);
            let (fwd, bwd) = match cap {
                Some(_) => (0.0, 0.0),
                None => (
                    line.existing_capacity,
                    line.backward_capacity.unwrap_or(line.existing_capacity),
                ),
            };
            let up = lp.add_row(Tag::at(Family::LineUpper, id, t), Sense::Le, fwd)?;
            lp.add_entry(up, f, 1.0);
            let lo = lp.add_row(Tag::at(Family::LineLower, id, t), Sense::Le, bwd)?;
            lp.add_entry(lo, f, -1.0);
            if let Some(cap) = cap {
                lp.add_entry(up, cap, -1.0);
                lp.add_entry(lo, cap, -1.0);
            }
            flows.push(f);
        }
        flow_cols.push(flows);
    }

    if options.enforce_kvl {
        let cycles = cycle_basis(&system.lines);
        for (ci, cycle) in cycles.iter().enumerate() {
            #[allow(clippy::needless_range_loop)]
            for t in 0..t_count {
                let row = lp.add_row(Tag::at(Family::KvlCycle, cycle_entity(ci), t), Sense::Eq, 0.0)?;
                for &(li, sign) in cycle {
                    let line = &system.lines[li];
                    let x = line
                        .reactance
                        .ok_or_else(|| FormulateError::MissingReactance(line.name.clone()))?;
                    lp.add_entry(row, flow_cols[li][t], sign * x);
                }
            }
        }
    }

    // policy rows
    let total_demand = system.total_demand();
    match &policy.support {
        Some(SupportPolicy::Dispatched { technologies, target }) => {
            let row = lp.add_row(
                Tag::fixed(Family::VreDispatched, SYSTEM_ENTITY),
                Sense::Ge,
                target.resolve(total_demand),
            )?;
            for (gi, _) in system.members(technologies) {
                for &g in &dispatch_cols[gi] {
                    lp.add_entry(row, g, 1.0);
                }
            }
        }
        Some(SupportPolicy::Available { technologies, target }) => {
            let row = lp.add_row(
                Tag::fixed(Family::VreAvailable, SYSTEM_ENTITY),
                Sense::Ge,
                target.resolve(total_demand),
            )?;
            for (gi, gen) in system.members(technologies) {
                let avail: f64 = system.availability(gen)?.iter().sum();
                lp.add_entry(row, capacity_cols[gi], avail);
            }
        }
        Some(SupportPolicy::FixedFip { .. }) | None => {}
    }
    if let Some(Co2Policy::Cap { limit }) = policy.co2 {
        let row = lp.add_row(Tag::fixed(Family::Co2Cap, SYSTEM_ENTITY), Sense::Le, limit)?;
        for (gi, gen) in system.generators.iter().enumerate() {
            if gen.spec.emission_factor > 0.0 {
                for &g in &dispatch_cols[gi] {
                    lp.add_entry(row, g, gen.spec.emission_factor);
                }
            }
        }
    }

    lp.check()?;
    Ok(lp)
}

/// Fundamental cycle basis of the line graph.
///
/// Returns `|lines| - |nodes| + |components|` cycles. Each is oriented so that the signed
/// incidence of its lines sums to zero at every node; a line traversed from its `from` to its
/// `to` node gets `+1`.
pub fn cycle_basis(lines: &[LineSpec]) -> Vec<Cycle> {
    let mut nodes: Vec<&str> = Vec::new();
    for l in lines {
        for n in [l.from.as_str(), l.to.as_str()] {
            if !nodes.contains(&n) {
                nodes.push(n);
            }
        }
    }
    let idx = |n: &str| nodes.iter().position(|m| *m == n).unwrap();
    let mut adj: Vec<Vec<(usize, usize)>> = vec![Vec::new(); nodes.len()];
    for (li, l) in lines.iter().enumerate() {
        let (a, b) = (idx(&l.from), idx(&l.to));
        adj[a].push((b, li));
        adj[b].push((a, li));
    }

    // BFS spanning forest: parent node and the tree line used to reach it
    let mut parent: Vec<Option<(usize, usize)>> = vec![None; nodes.len()];
    let mut depth = vec![usize::MAX; nodes.len()];
    let mut in_tree = vec![false; lines.len()];
    for root in 0..nodes.len() {
        if depth[root] != usize::MAX {
            continue;
        }
        depth[root] = 0;
        let mut queue = VecDeque::from([root]);
        while let Some(u) = queue.pop_front() {
            for &(v, li) in &adj[u] {
                if depth[v] == usize::MAX {
                    depth[v] = depth[u] + 1;
                    parent[v] = Some((u, li));
                    in_tree[li] = true;
                    queue.push_back(v);
                }
            }
        }
    }

    // orientation of traversing line `li` when walking from node `u`
    let sign_from = |li: usize, u: usize| if idx(&lines[li].from) == u { 1.0 } else { -1.0 };

    let mut cycles = Vec::new();
    for (li, line) in lines.iter().enumerate() {
        if in_tree[li] {
            continue;
        }
        // walk: from --li--> to, then back along the tree to `from`
        let (start, end) = (idx(&line.from), idx(&line.to));
        let mut cycle = vec![(li, 1.0)];
        let (mut a, mut b) = (end, start);
        let mut tail = Vec::new();
        while a != b {
            if depth[a] >= depth[b] {
                let (p, tl) = parent[a].unwrap();
                cycle.push((tl, sign_from(tl, a)));
                a = p;
            } else {
                let (p, tl) = parent[b].unwrap();
                // traversed later from p to b
                tail.push((tl, sign_from(tl, p)));
                b = p;
            }
        }
        cycle.extend(tail.into_iter().rev());
        cycles.push(cycle);
    }
    cycles
}

/// A policy shadow price to be lifted into the objective.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PolicyDual {
    /// CO₂ price in €/tCO₂ of the `co2-cap` row.
    Co2(f64),
    /// Feed-in premium in €/MWh of the `vre-dispatched` row.
    Support(f64),
}

/// Remove the policy row and move its price into the objective: `o_s → o_s + e_s μ` for a CO₂
/// cap, `o_s → o_s - μ` for supported dispatch.
pub fn apply_equivalence_substitution(
    lp: &LinearProgram,
    dual: PolicyDual,
) -> Result<LinearProgram, FormulateError> {
    let (family, name, shift) = match dual {
        PolicyDual::Co2(mu) => (Family::Co2Cap, "co2-cap", mu),
        PolicyDual::Support(mu) => (Family::VreDispatched, "vre-dispatched", -mu),
    };
    let row = lp
        .row_index(&Tag::fixed(family, SYSTEM_ENTITY))
        .ok_or(FormulateError::PolicyRowAbsent(name))?;
    let coefficients = lp.row_entries(row);
    let mut out = lp.without_row(row);
    for (col, a) in coefficients {
        let c = out.columns()[col].cost;
        out.set_cost(col, c + shift * a);
    }
    Ok(out)
}

/// Replace `Σ_{s∈S} g ≥ Γ` with the mirrored `Σ_{s∉S} g ≤ D − Γ`, where the complement
/// includes load shedding. The two are equivalent only for lossless systems, so storage is
/// rejected.
pub fn mirror_support(lp: &LinearProgram) -> Result<LinearProgram, FormulateError> {
    if lp.columns_in(Family::Discharge).next().is_some() {
        return Err(FormulateError::Unsupported(
            "support mirroring requires a lossless system without storage",
        ));
    }
    let row = lp
        .row_index(&Tag::fixed(Family::VreDispatched, SYSTEM_ENTITY))
        .ok_or(FormulateError::PolicyRowAbsent("vre-dispatched"))?;
    let members: Vec<usize> = lp.row_entries(row).into_iter().map(|(c, _)| c).collect();
    let gamma = lp.rows()[row].rhs;
    let total: f64 = lp.rows_in(Family::Balance).map(|r| lp.rows()[r].rhs).sum();

    let mut out = lp.without_row(row);
    let mirror = out.add_row(
        Tag::fixed(Family::SupportMirror, SYSTEM_ENTITY),
        Sense::Le,
        total - gamma,
    )?;
    let others: Vec<usize> = out
        .columns()
        .iter()
        .enumerate()
        .filter(|(i, c)| {
            matches!(c.tag.family, Family::Dispatch | Family::Shed) && !members.contains(i)
        })
        .map(|(i, _)| i)
        .collect();
    for c in others {
        out.add_entry(mirror, c, 1.0);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::TechnologySpec;

    fn line(name: &str, from: &str, to: &str) -> LineSpec {
        LineSpec {
            name: name.into(),
            from: from.into(),
            to: to.into(),
            existing_capacity: 10.0,
            backward_capacity: None,
            expandable: false,
            capex: 0.0,
            lifetime: None,
            reactance: Some(0.1),
        }
    }

    fn one_tech(t: usize) -> PowerSystem {
        PowerSystem::new(&["n"], t)
            .with_demand("n", vec![1.0; t])
            .with_generator("n", TechnologySpec::dispatchable("gen", 1000.0, 25.0, 10.0))
    }

    #[test]
    fn single_tech_counts() {
        let lp = build_lp(&one_tech(2), &PolicyConfig::none(), FormulationOptions::default()).unwrap();
        assert_eq!(lp.num_rows(), 4);
        assert_eq!(lp.rows_in(Family::Balance).count(), 2);
        assert_eq!(lp.rows_in(Family::GenUpper).count(), 2);
        assert_eq!(lp.num_columns(), 3);
    }

    #[test]
    fn zero_snapshots_rejected() {
        let sys = one_tech(0);
        assert_eq!(
            build_lp(&sys, &PolicyConfig::none(), FormulationOptions::default()).unwrap_err(),
            FormulateError::NoSnapshots
        );
    }

    #[test]
    fn missing_profile_rejected() {
        let mut sys = one_tech(2);
        sys.generators[0].spec.availability = Some("nowhere".into());
        assert!(matches!(
            build_lp(&sys, &PolicyConfig::none(), FormulationOptions::default()),
            Err(FormulateError::Profile(_))
        ));
    }

    #[test]
    fn kvl_needs_reactance() {
        let mut sys = PowerSystem::new(&["a", "b", "c"], 1)
            .with_demand("a", vec![1.0])
            .with_demand("b", vec![1.0])
            .with_demand("c", vec![1.0])
            .with_line(line("ab", "a", "b"))
            .with_line(line("bc", "b", "c"))
            .with_line(line("ca", "c", "a"));
        sys.lines[1].reactance = None;
        let opts = FormulationOptions {
            enforce_kvl: true,
            ..Default::default()
        };
        assert_eq!(
            build_lp(&sys, &PolicyConfig::none(), opts).unwrap_err(),
            FormulateError::MissingReactance("bc".into())
        );
    }

    #[test]
    fn zero_share_support_has_zero_rhs() {
        let lp = build_lp(
            &one_tech(2),
            &PolicyConfig::support_share(&["gen"], 0.0),
            FormulationOptions::default(),
        )
        .unwrap();
        let row = lp.row_index(&Tag::fixed(Family::VreDispatched, SYSTEM_ENTITY)).unwrap();
        assert_eq!(lp.rows()[row].rhs, 0.0);
        assert_eq!(lp.rows()[row].sense, Sense::Ge);
    }

    #[test]
    fn triangle_has_one_cycle() {
        let lines = [line("ab", "a", "b"), line("bc", "b", "c"), line("ca", "c", "a")];
        let cycles = cycle_basis(&lines);
        assert_eq!(cycles.len(), 1);
        assert_eq!(cycles[0].len(), 3);
    }

    #[test]
    fn tree_has_no_cycles() {
        let lines = [
            line("ab", "a", "b"),
            line("ac", "a", "c"),
            line("cd", "c", "d"),
            line("ce", "e", "c"),
        ];
        assert!(cycle_basis(&lines).is_empty());
    }

    #[test]
    fn co2_substitution_arithmetic() {
        let sys = PowerSystem::new(&["n"], 1)
            .with_demand("n", vec![1.0])
            .with_generator(
                "n",
                TechnologySpec {
                    emission_factor: 0.4,
                    ..TechnologySpec::dispatchable("gas", 0.0, 25.0, 90.0)
                },
            );
        let lp = build_lp(&sys, &PolicyConfig::co2_cap(10.0), FormulationOptions::default()).unwrap();
        let out = apply_equivalence_substitution(&lp, PolicyDual::Co2(50.0)).unwrap();
        let g = out.column_index(&Tag::at(Family::Dispatch, "gas@n", 0)).unwrap();
        assert!((out.columns()[g].cost - 110.0).abs() < 1e-12);
        assert_eq!(out.num_rows(), lp.num_rows() - 1);

        let same = apply_equivalence_substitution(&lp, PolicyDual::Co2(0.0)).unwrap();
        assert_eq!(same.columns(), lp.columns());
        assert!(apply_equivalence_substitution(&same, PolicyDual::Co2(0.0)).is_err());
    }
}

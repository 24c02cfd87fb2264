//! Executable checks of the equilibrium theory: KKT residuals, per-entity zero profit,
//! cap/tax equivalence, the subsidy lift, and an enumeration oracle for tiny instances.

use std::fmt;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::formulate::{
    apply_equivalence_substitution, build_lp, mirror_support, FormulateError, FormulationOptions,
    PolicyDual, SYSTEM_ENTITY,
};
use crate::lp::{Family, LinearProgram, Sense, Tag};
use crate::metrics::{congestion_revenue, market_value, storage_arbitrage};
use crate::model::{Co2Policy, ModelError, PolicyConfig, PowerSystem, SupportPolicy};
use crate::outcome::{ExtractError, Outcome};
use crate::solve::{solve, Solution, SolveError, Status, Tolerances};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
    Inconclusive,
}

impl Verdict {
    fn from_residual(residual: f64, tol: f64) -> Self {
        if residual <= tol {
            Verdict::Pass
        } else {
            Verdict::Fail
        }
    }

    /// Fail dominates, then pass; only inconclusive parts give inconclusive.
    pub fn combine(verdicts: impl IntoIterator<Item = Verdict>) -> Verdict {
        let mut out = Verdict::Inconclusive;
        for v in verdicts {
            match v {
                Verdict::Fail => return Verdict::Fail,
                Verdict::Pass => out = Verdict::Pass,
                Verdict::Inconclusive => {}
            }
        }
        out
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Pass => "pass",
            Verdict::Fail => "fail",
            Verdict::Inconclusive => "inconclusive",
        })
    }
}

#[derive(Debug, Error)]
pub enum VerifyError {
    #[error(transparent)]
    Formulate(#[from] FormulateError),
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error(transparent)]
    Extract(#[from] ExtractError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("{0}")]
    Precondition(String),
}

// ---------------------------------------------------------------------------------------------
// KKT residuals

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KktReport {
    /// Row violations, relative to `max(1, |rhs|, ‖row‖∞)`.
    pub primal: f64,
    /// Column bound violations, relative to `max(1, |bound|)`.
    pub bounds: f64,
    /// Mismatch between reported reduced costs and `c − Aᵀy`, relative to `max(1, ‖a_j‖∞)`.
    pub stationarity: f64,
    /// Wrong-signed row duals and reduced costs.
    pub dual: f64,
    pub complementarity: f64,
    pub max: f64,
    /// Tag of the entity with the largest residual.
    pub worst: Option<String>,
    pub tolerance: f64,
    pub verdict: Verdict,
}

pub fn check_kkt(lp: &LinearProgram, sol: &Solution, tol: f64) -> KktReport {
    const POSITION_TOL: f64 = 1e-9;
    let n = lp.num_columns();
    let act = lp.activities(&sol.primal);
    let norms = lp.row_norms();
    let mut col_norm = vec![0.0f64; n];
    for &(_, c, v) in lp.entries() {
        col_norm[c] = col_norm[c].max(v.abs());
    }
    let aty = lp.transpose_product(&sol.dual);

    let mut worst = (0.0f64, None::<String>);
    let mut note = |v: f64, tag: &Tag| {
        if v > worst.0 {
            worst = (v, Some(tag.to_string()));
        }
    };

    let (mut primal, mut dual, mut compl) = (0.0f64, 0.0f64, 0.0f64);
    for (i, row) in lp.rows().iter().enumerate() {
        let scale = 1f64.max(row.rhs.abs()).max(norms[i]);
        let slack = row.rhs - act[i];
        let viol = match row.sense {
            Sense::Le => (-slack).max(0.0),
            Sense::Ge => slack.max(0.0),
            Sense::Eq => slack.abs(),
        } / scale;
        let y = sol.dual[i];
        let sign = match row.sense {
            Sense::Le => y.max(0.0),
            Sense::Ge => (-y).max(0.0),
            Sense::Eq => 0.0,
        };
        let cs = if row.sense == Sense::Eq { 0.0 } else { (y * slack).abs() / scale };
        primal = primal.max(viol);
        dual = dual.max(sign);
        compl = compl.max(cs);
        note(viol.max(sign).max(cs), &row.tag);
    }

    let (mut bounds, mut stat) = (0.0f64, 0.0f64);
    for (j, col) in lp.columns().iter().enumerate() {
        let x = sol.primal[j];
        let bviol = ((col.lower - x).max(0.0) / col.lower.abs().max(1.0))
            .max((x - col.upper).max(0.0) / col.upper.abs().max(1.0));
        let d = sol.reduced_costs[j];
        let st = (d - (col.cost - aty[j])).abs() / col_norm[j].max(1.0);
        let scale = col.cost.abs().max(col_norm[j]).max(1.0);
        let at_lower = col.lower.is_finite() && x - col.lower <= POSITION_TOL * col.lower.abs().max(1.0);
        let at_upper = col.upper.is_finite() && col.upper - x <= POSITION_TOL * col.upper.abs().max(1.0);
        let sign = match (at_lower, at_upper) {
            (true, true) => 0.0,
            (true, false) => (-d).max(0.0),
            (false, true) => d.max(0.0),
            (false, false) => d.abs(),
        } / scale;
        let gap = (x - col.lower).abs().min((col.upper - x).abs());
        let cs = if gap.is_finite() { (d * gap).abs() / (scale * x.abs().max(1.0)) } else { 0.0 };
        bounds = bounds.max(bviol);
        stat = stat.max(st);
        dual = dual.max(sign);
        compl = compl.max(cs);
        note(bviol.max(st).max(sign).max(cs), &col.tag);
    }
    let max = primal.max(bounds).max(stat).max(dual).max(compl);
    KktReport {
        primal,
        bounds,
        stationarity: stat,
        dual,
        complementarity: compl,
        max,
        worst: worst.1,
        tolerance: tol,
        verdict: Verdict::from_residual(max, tol),
    }
}

// ---------------------------------------------------------------------------------------------
// zero profit

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EntityKind {
    Generator,
    Storage,
    Line,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ProfitScope {
    pub generators: bool,
    pub storage: bool,
    pub lines: bool,
}

impl ProfitScope {
    pub const ALL: ProfitScope = ProfitScope {
        generators: true,
        storage: true,
        lines: true,
    };
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfitEntry {
    pub entity: String,
    pub kind: EntityKind,
    /// Market revenue.
    pub revenue: f64,
    /// Resource cost.
    pub cost: f64,
    /// Net policy terms added to revenue (premiums, CO₂ charges, scarcity rents).
    pub adjustments: f64,
    /// `revenue + adjustments − cost`.
    pub profit: f64,
    /// `|profit| / max(1, cost, |revenue|)`.
    pub residual: f64,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfitReport {
    pub entries: Vec<ProfitEntry>,
    pub max_residual: f64,
    pub tolerance: f64,
    pub verdict: Verdict,
}

/// Per-entity profit identities of a built system. Only generators and storage with capacity,
/// and expandable lines built beyond their existing capacity, are checked.
pub fn check_zero_profit(o: &Outcome, scope: ProfitScope, tol: f64) -> ProfitReport {
    let eps = 1e-9 * o.total_demand().max(1.0);
    let mut entries = Vec::new();
    let mut push = |entity: &str, kind, revenue: f64, cost: f64, adjustments: f64| {
        let profit = revenue + adjustments - cost;
        let residual = profit.abs() / cost.max(revenue.abs()).max(1.0);
        entries.push(ProfitEntry {
            entity: entity.to_string(),
            kind,
            revenue,
            cost,
            adjustments,
            profit,
            residual,
            verdict: Verdict::from_residual(residual, tol),
        });
    };

    if scope.generators {
        let co2 = o.policy.co2_price();
        for g in o.generators.iter().filter(|g| g.capacity > eps) {
            let e = g.energy();
            let revenue: f64 = g.dispatch.iter().zip(o.node_prices(&g.node)).map(|(g, p)| g * p).sum();
            let mut adj = -g.emission_factor * co2 * e;
            if g.supported {
                adj += o.policy.support.unwrap_or(0.0) * e;
            }
            if g.supported_available {
                adj += o.policy.available.unwrap_or(0.0) * g.available_energy();
            }
            if g.fixed_premium {
                adj += o.policy.fixed_premium.unwrap_or(0.0) * e;
            }
            // scarcity rent of a binding potential is profit beyond cost recovery
            adj -= g.potential_rent.unwrap_or(0.0) * g.capacity;
            push(&g.id, EntityKind::Generator, revenue, g.cost(), adj);
        }
    }
    if scope.storage {
        for s in o.storages.iter().filter(|s| s.extendable) {
            if s.capacity_discharge.max(s.capacity_charge).max(s.capacity_energy) <= eps {
                continue;
            }
            let revenue = storage_arbitrage(o, &s.id).unwrap_or(0.0);
            push(&s.id, EntityKind::Storage, revenue, s.cost(), 0.0);
        }
    }
    if scope.lines {
        for l in o.lines.iter().filter(|l| l.expandable && l.capacity > l.existing_capacity + eps) {
            let revenue = congestion_revenue(o, &l.name).unwrap_or(0.0);
            push(&l.name, EntityKind::Line, revenue, l.capacity_cost * l.capacity, l.cycle_term);
        }
    }
    let max_residual = entries.iter().map(|e| e.residual).fold(0.0, f64::max);
    let verdict = if entries.is_empty() {
        Verdict::Inconclusive
    } else {
        Verdict::combine(entries.iter().map(|e| e.verdict))
    };
    ProfitReport {
        entries,
        max_residual,
        tolerance: tol,
        verdict,
    }
}

/// `|Σ costs − Σ λ d|` relative to total cost, for systems without policy rows.
pub fn total_cost_identity(o: &Outcome) -> f64 {
    let cost = crate::metrics::cost_breakdown(o).total();
    (cost - o.consumer_payments()).abs() / cost.abs().max(1.0)
}

// ---------------------------------------------------------------------------------------------
// equivalence checks

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquivalenceReport {
    pub check: String,
    /// The policy price that was moved between row and objective.
    pub mu: f64,
    /// Largest price deviation, relative as documented per check.
    pub residual: f64,
    /// Relative objective mismatch after accounting for the moved price.
    pub objective_gap: f64,
    pub tolerance: f64,
    pub verdict: Verdict,
    pub detail: String,
}

fn solve_optimal(lp: &LinearProgram, what: &str) -> Result<Solution, VerifyError> {
    let sol = solve(lp, &Tolerances::default())?;
    if sol.status != Status::Optimal {
        return Err(VerifyError::Precondition(format!("{what} is {:?}", sol.status)));
    }
    Ok(sol)
}

fn prices(lp: &LinearProgram, sol: &Solution) -> Vec<f64> {
    lp.rows_in(Family::Balance).map(|r| sol.dual[r]).collect()
}

/// Technologies at one node with identical availability and identical effective costs make
/// the dispatch non-unique.
fn has_cost_ties(system: &PowerSystem, co2_price: f64) -> Result<bool, ModelError> {
    let gens = &system.generators;
    for a in 0..gens.len() {
        for b in a + 1..gens.len() {
            let (ga, gb) = (&gens[a], &gens[b]);
            if ga.node != gb.node || ga.spec.availability != gb.spec.availability {
                continue;
            }
            let ca = system.capacity_cost(ga)?;
            let cb = system.capacity_cost(gb)?;
            let oa = ga.spec.marginal_cost() + ga.spec.emission_factor * co2_price;
            let ob = gb.spec.marginal_cost() + gb.spec.emission_factor * co2_price;
            let close = |x: f64, y: f64| (x - y).abs() <= 1e-9 * x.abs().max(y.abs()).max(1.0);
            if close(ca, cb) && close(oa, ob) {
                return Ok(true);
            }
        }
    }
    Ok(false)
}

/// Solve under a CO₂ cap, move the cap's price into the objective as a tax and solve again.
/// Prices must agree. When they do not but the cap solution is still optimal for the tax
/// program, the duals are not unique and the verdict is inconclusive.
pub fn check_cap_tax_equivalence(
    system: &PowerSystem,
    policy: &PolicyConfig,
    options: FormulationOptions,
    tol: f64,
) -> Result<EquivalenceReport, VerifyError> {
    let limit = match policy.co2 {
        Some(Co2Policy::Cap { limit }) => limit,
        _ => return Err(VerifyError::Precondition("policy has no CO₂ cap".into())),
    };
    let cap_lp = build_lp(system, policy, options)?;
    let cap = solve_optimal(&cap_lp, "cap program")?;
    let cap_row = cap_lp
        .row_index(&Tag::fixed(Family::Co2Cap, SYSTEM_ENTITY))
        .expect("cap row present");
    let mu = -cap.dual[cap_row];

    let tax_lp = apply_equivalence_substitution(&cap_lp, PolicyDual::Co2(mu))?;
    let tax = solve_optimal(&tax_lp, "tax program")?;

    let (pc, pt) = (prices(&cap_lp, &cap), prices(&tax_lp, &tax));
    let norm = pc.iter().fold(0.0f64, |a, p| a.max(p.abs())).max(f64::MIN_POSITIVE);
    let residual = pc.iter().zip(&pt).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max) / norm;
    let objective_gap = (tax.objective - mu * limit - cap.objective).abs() / cap.objective.abs().max(1.0);

    let (verdict, detail) = if has_cost_ties(system, mu)? {
        (Verdict::Inconclusive, "technologies with tied effective costs".to_string())
    } else if residual <= tol && objective_gap <= tol {
        (Verdict::Pass, String::new())
    } else {
        // the cap optimum, minus its cap row, must be optimal for the tax program
        let mut carried = cap.clone();
        carried.dual.remove(cap_row);
        carried.reduced_costs = crate::solve::reduced_costs(&tax_lp, &carried.dual);
        let kkt = check_kkt(&tax_lp, &carried, 1e-6);
        if kkt.verdict == Verdict::Pass && objective_gap <= tol {
            (Verdict::Inconclusive, "prices differ but both are dual optimal".to_string())
        } else {
            (Verdict::Fail, format!("kkt residual of carried solution {:e}", kkt.max))
        }
    };
    Ok(EquivalenceReport {
        check: "cap-tax-equivalence".into(),
        mu,
        residual,
        objective_gap,
        tolerance: tol,
        verdict,
        detail,
    })
}

/// Replace the support target by the mirrored limit on all other generation and check that
/// prices and market values rise by exactly the support price.
pub fn check_subsidy_tax_lift(
    system: &PowerSystem,
    policy: &PolicyConfig,
    options: FormulationOptions,
    tol: f64,
) -> Result<EquivalenceReport, VerifyError> {
    if !matches!(policy.support, Some(SupportPolicy::Dispatched { .. })) {
        return Err(VerifyError::Precondition("policy has no dispatched-energy support".into()));
    }
    let lp = build_lp(system, policy, options)?;
    let base = solve_optimal(&lp, "support program")?;
    let row = lp
        .row_index(&Tag::fixed(Family::VreDispatched, SYSTEM_ENTITY))
        .expect("support row present");
    let mu = base.dual[row];

    let mirrored = mirror_support(&lp)?;
    let lifted = solve_optimal(&mirrored, "mirrored program")?;

    let (p0, p1) = (prices(&lp, &base), prices(&mirrored, &lifted));
    let scale = mu.abs().max(1.0);
    let price_dev = p0
        .iter()
        .zip(&p1)
        .map(|(a, b)| (b - a - mu).abs())
        .fold(0.0, f64::max)
        / scale;

    let without_support = PolicyConfig {
        support: None,
        co2: policy.co2,
    };
    let o0 = Outcome::extract(system, policy, &lp, &base)?;
    let o1 = Outcome::extract(system, &without_support, &mirrored, &lifted)?;
    let mut mv_dev = 0.0f64;
    for g in &o0.generators {
        if let (Some(a), Some(b)) = (market_value(&o0, &g.id), market_value(&o1, &g.id)) {
            mv_dev = mv_dev.max((b - a - mu).abs() / scale);
        }
    }
    let residual = price_dev.max(mv_dev);
    let objective_gap = (lifted.objective - base.objective).abs() / base.objective.abs().max(1.0);

    let (verdict, detail) = if has_cost_ties(system, 0.0)? {
        (Verdict::Inconclusive, "technologies with tied effective costs".to_string())
    } else if residual <= tol && objective_gap <= tol {
        (Verdict::Pass, String::new())
    } else {
        // lifted duals of the support optimum must be optimal for the mirrored program
        let mut carried = base.clone();
        carried.dual.remove(row);
        for r in mirrored.rows_in(Family::Balance) {
            carried.dual[r] += mu;
        }
        carried.dual.push(-mu);
        carried.reduced_costs = crate::solve::reduced_costs(&mirrored, &carried.dual);
        let kkt = check_kkt(&mirrored, &carried, 1e-6);
        if kkt.verdict == Verdict::Pass && objective_gap <= tol {
            (Verdict::Inconclusive, "prices differ but both are dual optimal".to_string())
        } else {
            (Verdict::Fail, format!("kkt residual of lifted solution {:e}", kkt.max))
        }
    };
    Ok(EquivalenceReport {
        check: "subsidy-tax-lift".into(),
        mu,
        residual,
        objective_gap,
        tolerance: tol,
        verdict,
        detail,
    })
}

// ---------------------------------------------------------------------------------------------
// enumeration oracle

pub const ORACLE_MAX_TECHS: usize = 3;
pub const ORACLE_MAX_SNAPSHOTS: usize = 6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleResult {
    pub status: Status,
    pub objective: f64,
    pub capacities: Vec<f64>,
    /// `∂cost/∂d_t`, or `None` where left and right derivatives differ.
    pub prices: Vec<Option<f64>>,
}

struct Tiny {
    cap_cost: Vec<f64>,
    marginal: Vec<f64>,
    avail: Vec<Vec<f64>>,
    max: Vec<f64>,
    voll: Option<f64>,
    /// Technologies sorted by marginal cost.
    merit: Vec<usize>,
}

impl Tiny {
    /// Cheapest dispatch cost for capacities `g` and demand `d`, or `None` if infeasible.
    fn cost(&self, g: &[f64], d: &[f64]) -> Option<f64> {
        let mut total: f64 = self.cap_cost.iter().zip(g).map(|(c, g)| c * g).sum();
        for (t, &dt) in d.iter().enumerate() {
            let mut rest = dt;
            for &s in &self.merit {
                if rest <= 0.0 {
                    break;
                }
                let take = rest.min(self.avail[s][t] * g[s]);
                total += take * self.marginal[s];
                rest -= take;
            }
            if rest > 1e-9 * dt.max(1.0) {
                total += rest * self.voll?;
            }
        }
        Some(total)
    }

    /// Minimum over all vertices of the hyperplane arrangement.
    fn optimum(&self, d: &[f64]) -> Option<(f64, Vec<f64>)> {
        let k = self.cap_cost.len();
        let mut planes: Vec<(Vec<f64>, f64)> = Vec::new();
        for s in 0..k {
            let mut e = vec![0.0; k];
            e[s] = 1.0;
            planes.push((e.clone(), 0.0));
            if self.max[s].is_finite() {
                planes.push((e, self.max[s]));
            }
        }
        for (t, &dt) in d.iter().enumerate() {
            let mut a = vec![0.0; k];
            for &s in &self.merit {
                a[s] = self.avail[s][t];
                if a.iter().any(|v| *v != 0.0) {
                    planes.push((a.clone(), dt));
                }
            }
        }

        let mut best: Option<(f64, Vec<f64>)> = None;
        let mut subset: Vec<usize> = (0..k).collect();
        if planes.len() < k {
            return None;
        }
        loop {
            let m = DMatrix::from_fn(k, k, |i, j| planes[subset[i]].0[j]);
            let b = DVector::from_fn(k, |i, _| planes[subset[i]].1);
            if let Some(x) = m.lu().solve(&b) {
                let mut g: Vec<f64> = x.iter().copied().collect();
                let ok = g.iter().zip(&self.max).all(|(v, mx)| {
                    v.is_finite() && *v >= -1e-9 * mx.clamp(1.0, 1e12) && *v <= mx + 1e-9 * mx.abs().max(1.0)
                });
                if ok {
                    for (v, mx) in g.iter_mut().zip(&self.max) {
                        *v = v.clamp(0.0, *mx);
                    }
                    if let Some(c) = self.cost(&g, d) {
                        if best.as_ref().is_none_or(|(b, _)| c < *b) {
                            best = Some((c, g));
                        }
                    }
                }
            }
            // next k-subset in lexicographic order
            let n = planes.len();
            let mut i = k;
            loop {
                if i == 0 {
                    return best;
                }
                i -= 1;
                if subset[i] < n - k + i {
                    break;
                }
                if i == 0 {
                    return best;
                }
            }
            subset[i] += 1;
            for j in i + 1..k {
                subset[j] = subset[j - 1] + 1;
            }
        }
    }
}

/// Exact optimum of a tiny single-node system without storage or lines, by enumerating every
/// vertex of the arrangement that partitions capacity space into linear pieces of the cost.
pub fn brute_force_oracle(system: &PowerSystem) -> Result<OracleResult, VerifyError> {
    let k = system.generators.len();
    let t_count = system.snapshots;
    if k == 0 || k > ORACLE_MAX_TECHS || t_count > ORACLE_MAX_SNAPSHOTS {
        return Err(VerifyError::Precondition(format!(
            "oracle handles at most {ORACLE_MAX_TECHS} technologies and {ORACLE_MAX_SNAPSHOTS} snapshots"
        )));
    }
    if system.nodes.len() != 1 || !system.storages.is_empty() || !system.lines.is_empty() {
        return Err(VerifyError::Precondition(
            "oracle needs a single node without storage or lines".into(),
        ));
    }
    let mut tiny = Tiny {
        cap_cost: Vec::with_capacity(k),
        marginal: Vec::with_capacity(k),
        avail: Vec::with_capacity(k),
        max: Vec::with_capacity(k),
        voll: system.voll,
        merit: (0..k).collect(),
    };
    for g in &system.generators {
        tiny.cap_cost.push(system.capacity_cost(g)?);
        tiny.marginal.push(g.spec.marginal_cost());
        tiny.avail.push(system.availability(g)?);
        tiny.max.push(g.spec.max_potential.unwrap_or(f64::INFINITY));
    }
    if tiny.cap_cost.iter().chain(&tiny.marginal).any(|c| *c < 0.0) {
        return Err(VerifyError::Precondition("oracle needs non-negative costs".into()));
    }
    tiny.merit.sort_by(|&a, &b| tiny.marginal[a].total_cmp(&tiny.marginal[b]));

    let mut demand = system.demand_at(&system.nodes[0]).to_vec();
    demand.resize(t_count, 0.0);
    let Some((objective, capacities)) = tiny.optimum(&demand) else {
        return Ok(OracleResult {
            status: Status::Infeasible,
            objective: f64::NAN,
            capacities: vec![f64::NAN; k],
            prices: vec![None; t_count],
        });
    };

    let mut prices = Vec::with_capacity(t_count);
    for t in 0..t_count {
        let dt = demand[t];
        let h = (1e-3 * dt.max(1.0)).min(dt / 2.0);
        if h <= 0.0 {
            prices.push(None);
            continue;
        }
        let at = |delta: f64| {
            let mut d = demand.clone();
            d[t] += delta;
            tiny.optimum(&d).map(|(c, _)| c)
        };
        let (Some(up), Some(down)) = (at(h), at(-h)) else {
            prices.push(None);
            continue;
        };
        let right = (up - objective) / h;
        let left = (objective - down) / h;
        let agree = (right - left).abs() <= 1e-6 * right.abs().max(left.abs()).max(1.0);
        prices.push(agree.then_some(0.5 * (left + right)));
    }
    Ok(OracleResult {
        status: Status::Optimal,
        objective,
        capacities,
        prices,
    })
}

// ---------------------------------------------------------------------------------------------
// report

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    pub entities: Vec<String>,
    pub residual: f64,
    pub tolerance: f64,
    pub verdict: Verdict,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub checks: Vec<CheckResult>,
    pub verdict: Verdict,
}

impl VerificationReport {
    pub fn new(checks: Vec<CheckResult>) -> Self {
        let verdict = Verdict::combine(checks.iter().map(|c| c.verdict));
        VerificationReport { checks, verdict }
    }

    pub fn passed(&self) -> bool {
        self.verdict != Verdict::Fail
    }
}

/// Checks that apply to one solved scenario: KKT residuals, zero profit, and whichever
/// equivalence applies to the policy.
pub fn verify_scenario(
    system: &PowerSystem,
    policy: &PolicyConfig,
    options: FormulationOptions,
    lp: &LinearProgram,
    sol: &Solution,
    tol: f64,
) -> Result<VerificationReport, VerifyError> {
    let mut checks = Vec::new();
    let kkt = check_kkt(lp, sol, tol);
    checks.push(CheckResult {
        name: "kkt".into(),
        entities: kkt.worst.iter().cloned().collect(),
        residual: kkt.max,
        tolerance: tol,
        verdict: kkt.verdict,
        detail: String::new(),
    });

    let o = Outcome::extract(system, policy, lp, sol)?;
    let profit = check_zero_profit(&o, ProfitScope::ALL, tol);
    checks.push(CheckResult {
        name: "zero-profit".into(),
        entities: profit
            .entries
            .iter()
            .filter(|e| e.verdict == Verdict::Fail)
            .map(|e| e.entity.clone())
            .collect(),
        residual: profit.max_residual,
        tolerance: tol,
        verdict: profit.verdict,
        detail: String::new(),
    });

    let residual = total_cost_identity(&o);
    let plain = policy.support.is_none() && policy.co2.is_none();
    let potentials = o.generators.iter().any(|g| g.potential_rent.unwrap_or(0.0) > 0.0);
    let fixed_assets = o.storages.iter().any(|s| !s.extendable)
        || o.lines.iter().any(|l| !l.expandable || l.existing_capacity > 0.0);
    checks.push(CheckResult {
        name: "total-cost-identity".into(),
        entities: Vec::new(),
        residual,
        tolerance: tol,
        verdict: if plain && !potentials && !fixed_assets {
            Verdict::from_residual(residual, tol)
        } else {
            Verdict::Inconclusive
        },
        detail: if plain && !potentials && !fixed_assets {
            String::new()
        } else {
            "identity applies without policy rows, potentials or fixed assets".into()
        },
    });

    let binding_cap = matches!(policy.co2, Some(Co2Policy::Cap { .. })) && o.policy.co2_cap.unwrap_or(0.0) > 0.0;
    if binding_cap {
        let r = check_cap_tax_equivalence(system, policy, options, tol)?;
        checks.push(CheckResult {
            name: r.check,
            entities: Vec::new(),
            residual: r.residual.max(r.objective_gap),
            tolerance: tol,
            verdict: r.verdict,
            detail: r.detail,
        });
    }
    if matches!(policy.support, Some(SupportPolicy::Dispatched { .. })) && system.storages.is_empty() {
        let r = check_subsidy_tax_lift(system, policy, options, tol)?;
        checks.push(CheckResult {
            name: r.check,
            entities: Vec::new(),
            residual: r.residual.max(r.objective_gap),
            tolerance: tol,
            verdict: r.verdict,
            detail: r.detail,
        });
    }
    Ok(VerificationReport::new(checks))
}

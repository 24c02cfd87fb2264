use std::path::Path;

use mvlp_core::desk::{desk_system, tiny_system, vre_gas_system, DeskShape};
use mvlp_core::metrics::{market_value, rmv};
use mvlp_core::model::LineSpec;
use mvlp_core::mps::{read_mps_str, write_mps_string};
use mvlp_core::outcome::Outcome;
use mvlp_core::scenario::{parse_scenario, to_canonical_json};
use mvlp_core::sweep::write_sweep_csv;
use mvlp_core::{
    annuitize, build_lp, run_sweep, solve, suppress_negative_prices, FormulationOptions, PolicyConfig,
    PowerSystem, Status, SweepPlan, Tolerances,
};
use proptest::prelude::*;
use serde_json::json;

fn optimum(s: &PowerSystem, p: &PolicyConfig) -> Outcome {
    let lp = build_lp(s, p, FormulationOptions::default()).unwrap();
    let sol = solve(&lp, &Tolerances::default()).unwrap();
    assert_eq!(sol.status, Status::Optimal);
    Outcome::extract(s, p, &lp, &sol).unwrap()
}

fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs()).max(1.0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn annuity_monotone(capex in 1.0..1e4f64, n in 1.0..80.0f64, r in 0.0..0.2f64, dn in 0.5..20.0f64, dr in 0.001..0.05f64) {
        let base = annuitize(capex, n, r, 0.0).unwrap();
        prop_assert!(annuitize(capex, n + dn, r, 0.0).unwrap() < base);
        prop_assert!(annuitize(capex, n, r + dr, 0.0).unwrap() > base);
        prop_assert!(base >= capex / n * (1.0 - 1e-12));
        prop_assert!(base <= capex * (1.0 / n + r) * (1.0 + 1e-12));
    }

    #[test]
    fn mps_round_trip(seed in 0u64..10_000) {
        let s = tiny_system(seed);
        let lp = build_lp(&s, &PolicyConfig::none(), FormulationOptions::default()).unwrap();
        let back = read_mps_str(&write_mps_string(&lp)).unwrap();
        prop_assert_eq!(back.num_rows(), lp.num_rows());
        prop_assert_eq!(back.num_columns(), lp.num_columns());
        let a = solve(&lp, &Tolerances::default()).unwrap();
        let b = solve(&back, &Tolerances::default()).unwrap();
        prop_assert!(close(a.objective, b.objective, 1e-9));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn suppression_is_idempotent(seed in 0u64..10_000) {
        let o = optimum(&tiny_system(seed), &PolicyConfig::none());
        let once = suppress_negative_prices(&o);
        prop_assert_eq!(&suppress_negative_prices(&once), &once);
        prop_assert!(once.prices.values().flatten().all(|p| *p >= 0.0));
        for g in &o.generators {
            if let (Some(raw), Some(sup)) = (market_value(&o, &g.id), market_value(&once, &g.id)) {
                prop_assert!(sup >= raw - 1e-12);
            }
        }
    }

    #[test]
    fn cost_scaling_scales_objective(seed in 0u64..10_000, k in 0.1..10.0f64) {
        let s = tiny_system(seed);
        let mut scaled = s.clone();
        for g in &mut scaled.generators {
            g.spec.capex *= k;
            g.spec.variable_cost *= k;
        }
        scaled.voll = s.voll.map(|v| v * k);
        let a = optimum(&s, &PolicyConfig::none());
        let b = optimum(&scaled, &PolicyConfig::none());
        prop_assert!(close(b.objective, k * a.objective, 1e-7));
        let pa = a.load_weighted();
        let pb = b.load_weighted();
        prop_assert!(close(pb, k * pa, 1e-6), "{} vs {}", pb, k * pa);
    }

    #[test]
    fn uncongested_line_is_transparent(seed in 0u64..10_000) {
        let s = tiny_system(seed);
        let mut two = PowerSystem::new(&["n", "m"], s.snapshots);
        two.demand = s.demand.clone();
        two.demand.insert("m".into(), vec![0.0; s.snapshots]);
        two.profiles = s.profiles.clone();
        two.generators = s.generators.clone();
        two.voll = s.voll;
        two.discount_rate = s.discount_rate;
        let two = two.with_line(LineSpec {
            name: "nm".into(),
            from: "n".into(),
            to: "m".into(),
            existing_capacity: 1e4,
            backward_capacity: None,
            expandable: false,
            capex: 0.0,
            lifetime: None,
            reactance: None,
        });
        let a = optimum(&s, &PolicyConfig::none());
        let b = optimum(&two, &PolicyConfig::none());
        prop_assert!(close(a.objective, b.objective, 1e-8));
        for (pn, pm) in b.prices["n"].iter().zip(&b.prices["m"]) {
            prop_assert!(close(*pn, *pm, 1e-7));
        }
    }
}

trait LoadWeighted {
    fn load_weighted(&self) -> f64;
}

impl LoadWeighted for Outcome {
    fn load_weighted(&self) -> f64 {
        mvlp_core::metrics::load_weighted_price(self)
    }
}

#[test]
fn slack_cap_changes_nothing() {
    let s = vre_gas_system(5, 48);
    let free = optimum(&s, &PolicyConfig::none());
    let capped = optimum(&s, &PolicyConfig::co2_cap(free.emissions() * 1.5 + 1.0));
    assert!(close(free.objective, capped.objective, 1e-9));
    assert!(capped.policy.co2_price().abs() < 1e-9);
    let wind = free.generator("wind").unwrap().id.clone();
    assert!(close(market_value(&free, &wind).unwrap(), market_value(&capped, &wind).unwrap(), 1e-7));
    assert!(rmv(&free, &wind).unwrap() <= 1.0 + 1e-9);
}

#[test]
fn canonical_scenario_round_trip() {
    let text = json!({
        "name": "rt",
        "nodes": ["DE", "FR"],
        "snapshots": 24,
        "demand": {"DE": {"synth": "flat-demand", "seed": 3, "scale": 80}, "FR": {"constant": 40}},
        "profiles": {"wind_DE": {"synth": "wind-autocorrelated", "seed": 3}},
        "technologies": [
            {"node": "DE", "default": "wind", "availability": "wind_DE"},
            {"node": "DE", "default": "CCGT"},
            {"node": "FR", "default": "nuclear", "capex": 5000}
        ],
        "storages": [{"node": "FR", "default": "battery"}],
        "lines": [{"name": "DEFR", "from": "DE", "to": "FR", "length_km": 500, "existing_capacity": 10}],
        "policy": {"co2": {"kind": "cap", "limit": 1000}},
        "options": {"tie_break": 1e-6}
    })
    .to_string();
    let first = parse_scenario(&text, Path::new(".")).unwrap();
    let canonical = to_canonical_json(&first).to_string();
    let second = parse_scenario(&canonical, Path::new(".")).unwrap();
    assert_eq!(first.system, second.system);
    assert_eq!(first.policy, second.policy);
    assert_eq!(to_canonical_json(&second).to_string(), canonical);
}

#[test]
fn sweep_output_independent_of_threads() {
    let s = desk_system(11, DeskShape { nodes: 2, snapshots: 24, storage: false, ring: false });
    let base = mvlp_core::Scenario {
        name: "desk".into(),
        system: s,
        policy: PolicyConfig::none(),
        options: Default::default(),
    };
    let plan: SweepPlan = serde_json::from_value(json!({
        "name": "det",
        "base": to_canonical_json(&base),
        "axis": {"kind": "support_share", "values": [0.0, 0.2, 0.4, 0.6]},
        "support_set": ["wind", "solar"]
    }))
    .unwrap();
    let csv = |jobs| {
        let r = run_sweep(&plan, &base, jobs).unwrap();
        let mut buf = Vec::new();
        write_sweep_csv(&r, &mut buf).unwrap();
        (r.config_hash, buf)
    };
    let (h1, a) = csv(1);
    let (h4, b) = csv(4);
    assert_eq!(h1, h4);
    assert_eq!(a, b);
}

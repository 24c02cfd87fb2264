//! Seeded synthetic systems at desk scale, for tests, benchmarks and quick experiments.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::model::{synth_profiles, LineSpec, PowerSystem, SynthKind, TechnologySpec};
use crate::scenario::{default_storage, default_technology};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DeskShape {
    pub nodes: usize,
    pub snapshots: usize,
    /// Add an extendable battery at every node.
    pub storage: bool,
    /// Close the chain of lines into a ring (three or more nodes).
    pub ring: bool,
}

fn catalog(name: &str, rng: &mut ChaCha8Rng) -> TechnologySpec {
    let mut t = default_technology(name).expect("catalog technology");
    t.capex *= rng.gen_range(0.8..1.2);
    t.variable_cost += rng.gen_range(0.0..1.0);
    t
}

/// A multi-node system built from catalog technologies with jittered costs, so that no two
/// technologies tie. Costs are scaled to the horizon.
pub fn desk_system(seed: u64, shape: DeskShape) -> PowerSystem {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let nodes: Vec<String> = (0..shape.nodes).map(|i| format!("n{i}")).collect();
    let names: Vec<&str> = nodes.iter().map(String::as_str).collect();
    let t_count = shape.snapshots;
    let mut s = PowerSystem::new(&names, t_count);
    s.horizon_scaling = true;

    for (i, node) in nodes.iter().enumerate() {
        let level = rng.gen_range(50.0..150.0);
        let phase = rng.gen_range(0.0..24.0);
        let demand = (0..t_count)
            .map(|t| {
                let h = (t as f64 + phase) / 24.0 * std::f64::consts::TAU;
                level * (1.0 + 0.25 * h.sin() + rng.gen_range(-0.05..0.05))
            })
            .collect();
        s = s.with_demand(node, demand);

        let node_seed = seed.wrapping_mul(31).wrapping_add(i as u64);
        for (kind, key) in [(SynthKind::WindAutocorrelated, "wind"), (SynthKind::SolarDiurnal, "solar")] {
            let mut p = synth_profiles(node_seed, t_count, kind).expect("synthetic profile");
            let profile = format!("{key}_{node}");
            s = s.with_profile(&profile, p.remove(key).expect("series"));
            let mut tech = catalog(key, &mut rng);
            tech.availability = Some(profile);
            s = s.with_generator(node, tech);
        }
        for name in ["CCGT", "OCGT"] {
            let tech = catalog(name, &mut rng);
            s = s.with_generator(node, tech);
        }
        if rng.gen_bool(0.5) {
            let tech = catalog("coal", &mut rng);
            s = s.with_generator(node, tech);
        }
        if shape.storage {
            s = s.with_storage(node, default_storage("battery").expect("catalog storage"));
        }
    }

    let mut pairs: Vec<(usize, usize)> = (1..shape.nodes).map(|i| (i - 1, i)).collect();
    if shape.ring && shape.nodes >= 3 {
        pairs.push((shape.nodes - 1, 0));
    }
    for (a, b) in pairs {
        let km = rng.gen_range(100.0..500.0);
        s = s.with_line(LineSpec {
            name: format!("l{a}{b}"),
            from: nodes[a].clone(),
            to: nodes[b].clone(),
            existing_capacity: 0.0,
            backward_capacity: None,
            expandable: true,
            capex: 400.0 * km,
            lifetime: Some(40.0),
            reactance: Some(km * rng.gen_range(2e-4..4e-4)),
        });
    }
    s
}

/// One to three nodes, 48 to 96 snapshots, no storage.
pub fn random_desk_system(seed: u64) -> PowerSystem {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let shape = DeskShape {
        nodes: rng.gen_range(1..=3),
        snapshots: [48, 72, 96][rng.gen_range(0..3)],
        storage: false,
        ring: false,
    };
    desk_system(seed, shape)
}

/// Single node, one variable renewable plus CCGT, with a wind-like profile at roughly a
/// quarter capacity factor.
pub fn vre_gas_system(seed: u64, snapshots: usize) -> PowerSystem {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let wind: Vec<f64> = synth_profiles(seed, snapshots, SynthKind::WindAutocorrelated)
        .expect("synthetic profile")
        .remove("wind")
        .expect("series")
        .into_iter()
        .map(|a| 0.5 * a)
        .collect();
    let demand = (0..snapshots)
        .map(|t| {
            let h = t as f64 / 24.0 * std::f64::consts::TAU;
            100.0 * (1.0 - 0.2 * h.cos()) + rng.gen_range(-2.0..2.0)
        })
        .collect();
    let mut s = PowerSystem::new(&["n"], snapshots)
        .with_demand("n", demand)
        .with_profile("wind", wind)
        .with_generator("n", default_technology("wind").expect("catalog"))
        .with_generator("n", default_technology("CCGT").expect("catalog"));
    s.horizon_scaling = true;
    s
}

/// Single node, one to three technologies and at most six snapshots, sized for the
/// enumeration oracle.
pub fn tiny_system(seed: u64) -> PowerSystem {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let t_count = rng.gen_range(1..=6);
    let k = rng.gen_range(1..=3);
    let demand = (0..t_count).map(|_| rng.gen_range(0.5..10.0)).collect();
    let mut s = PowerSystem::new(&["n"], t_count).with_demand("n", demand);
    s.discount_rate = 0.0;
    s.voll = Some(rng.gen_range(50.0..200.0));
    for i in 0..k {
        let mut tech = TechnologySpec::dispatchable(
            &format!("g{i}"),
            rng.gen_range(1.0..40.0),
            1.0,
            rng.gen_range(0.0..60.0),
        );
        if rng.gen_bool(0.4) {
            let profile = format!("p{i}");
            let avail = (0..t_count).map(|_| rng.gen_range(0.0..1.0)).collect();
            s = s.with_profile(&profile, avail);
            tech.availability = Some(profile);
        }
        if rng.gen_bool(0.2) {
            tech.max_potential = Some(rng.gen_range(0.5..5.0));
        }
        s = s.with_generator("n", tech);
    }
    s
}

//! Long-term electricity market equilibrium as a linear program, with shadow prices
//! and market-value economics for variable renewables.

pub mod desk;
pub mod formulate;
pub mod lp;
pub mod metrics;
pub mod model;
pub mod mps;
pub mod outcome;
pub mod scenario;
pub mod solve;
pub mod sweep;
pub mod verify;

pub use formulate::{build_lp, FormulateError, FormulationOptions};
pub use lp::{Family, LinearProgram, Sense, Tag};
pub use model::{
    annuitize, validate, Co2Policy, EnergyTarget, LineSpec, PolicyConfig, PowerSystem, StorageSpec,
    SupportPolicy, TechnologySpec, Violation,
};
pub use metrics::{penetration_of, suppress_negative_prices, MetricsReport};
pub use mps::{read_mps, write_mps};
pub use outcome::Outcome;
pub use scenario::{load_scenario, Scenario, ScenarioError};
pub use solve::{solve, Solution, SolveError, Status, Tolerances};
pub use sweep::{load_plan, run_sweep, SweepPlan, SweepResult};
pub use verify::{verify_scenario, Verdict, VerificationReport};

//! Time evolution under non-Hermitian generators and the quantities read off
//! along a trajectory: success probability, decay rates, Bures speed, speed
//! limits. Also hosts the success-rate optimizer and STA synthesis.

mod integrate;
mod optimize;
mod schedule;
mod speed;
mod sta;

pub use integrate::{evolve, read_csv, write_table, CsvTable, IntegratorConfig, TrajectoryRecord};
pub use optimize::{
    decay_rate, optimize_generator, optimize_generator_detailed, shift_gamma_floor, Optimization,
    Optimized,
};
pub use schedule::{GeneratorField, GeneratorSchedule};
pub use speed::{
    bures_speed, bures_speed_fisher_form, speed_limit_bounds, weak_bound_saturated, weak_speed,
    SpeedLimits,
};
pub use sta::{gibbs_state, sta_generator, HamiltonianSchedule, StaField};

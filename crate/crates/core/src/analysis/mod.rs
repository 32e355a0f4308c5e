//! Simulation runs, trench-depth sweeps, logarithmic extrapolation and loss
//! budgets.

mod budget;
mod compare;
mod fit;
mod simulate;

pub use budget::{
    loss_budget, purcell_limit, q_from_t1, t1_from_q, tan_delta_bound, LossBudget, LossChannel, PurcellParams,
};
pub use compare::{compare_designs, CompareSetup, DesignComparison};
pub use fit::{fit_linear, fit_log, log_extrapolate, LinearFit, LogFit};
pub use simulate::{
    simulate, simulate_layout, standard_drive, trench_sweep, Simulation, SimulationSetup, SweepResult,
    DEFAULT_MIN_FIT_DEPTH,
};

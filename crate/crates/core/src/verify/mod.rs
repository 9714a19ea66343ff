//! Independent checks of a solution: the HJB quasi-variational
//! inequalities, C¹ pasting, and Monte Carlo simulation of the policy.

mod hjb;
mod mc;

pub use hjb::{
    check_c1, check_hjb, GridSpec, HjbReport, HjbRow, PastingGap, C1_TOL, CLAUSES, HJB_TOL,
};
pub use mc::{
    simulate_perturbed, simulate_value, threads_from_env, McConfig, McResult, Perturbation,
};

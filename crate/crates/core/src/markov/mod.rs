//! Exact analysis of L-ZC convergence as an absorbing Markov chain over
//! collision configurations, plus the convergence bound for L-MAC.

mod bound;
mod chain;
mod eigen;
mod state;
mod transition;

pub use bound::{lmac_bound, LmacBound};
pub use chain::{
    build_chain, gamma_opt, lambda_star_closed, mean_collision_schedules, mean_convergence, second_eigenvalue,
    solve_dense, Block, ChainModel, ChainState, Subdominant, MAX_STATIONS,
};
pub use eigen::{spectral_radius, Radius};
pub use state::{enumerate_states, partitions, states_with, CollisionState};
pub use transition::{
    initial_probs, initial_probs_brute, transition_prob_exact, transition_prob_formula, transition_row_brute,
    transition_row_exact, Row,
};

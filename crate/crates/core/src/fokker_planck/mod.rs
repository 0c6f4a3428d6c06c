//! Stationary and time-dependent solutions of the Fokker–Planck equation of
//! the pure-state angular SDE dθ = (B + ¼ sin 2θ)dt + cos θ dW.

pub mod cf;
pub mod ergodicity;
pub mod evolve;
pub mod stationary;

pub use cf::{continued_fraction, quotient, quotient_lists, quotient_sweep, CFCoefficients};
pub use ergodicity::{ergodicity_profile, ergodicity_test, ErgodicityResult};
pub use evolve::{coefficient_distance, fp_evolve, kl_divergence, max_stable_dt, FpEvolution};
pub use stationary::{
    classical_current, current_sweep, probability_current, recursion_residual, stationary_distribution,
    stationary_distribution_converged, stationary_mean_theta, CurrentSummary, FourierDistribution, SweepRow,
};

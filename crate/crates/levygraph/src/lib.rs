//! Perturbative expansion of time-marginal densities for Lévy-driven
//! models confined by a polynomial potential.
//!
//! The expansion parameter multiplies the potential in an exponential
//! tilt; coefficients are sums over generalized amputated graphs built
//! from `(K, I)` wiring pairs, evaluated from the cumulants of the
//! driving process. Partial sums, Padé quotients, and a Borel-style
//! quadrature resum the (generically divergent) series, and a Monte Carlo
//! module cross-checks predicted densities and quantiles by simulation.

pub mod combinatorics;
pub mod evaluator;
pub mod graphs;
pub mod model;
pub mod montecarlo;
pub mod resummation;
pub mod series;

pub use combinatorics::{
    bell_asymptotic, bell_lambda, bell_number, enumerate_partitions, enumerate_subsets, h_factor,
    integer_partitions, is_connected_pair, CombinatoricsError, LabelSet, Partition,
};
pub use evaluator::{
    beta_for_large_diffusion, cdf_series, density_polynomials, eval_graph, eval_quad_graph,
    isotropic_mu, large_diffusion_series, log_phi_series, moment, phi_series, phi_series_1d,
    truncated_moment, BetaSeries, EvalError, EvalPath, MomentRequest, SeriesKind, SeriesOptions,
    DEFAULT_MAX_ORDER,
};
pub use graphs::{
    canonical_key, enumerate_graphs, enumerate_quad_graphs, graph_to_pair, group_by_topology,
    pair_to_graph, FeynmanGraph, GraphError, PruneRules, QuadGraph, TopoClass,
};
pub use model::{
    levy_to_symbol, shift_symbol, validate_potential, EvalPoint, LevyJumpSpec, Model, ModelError,
    ModelFile, OperatorSymbol, Potential, PotentialReport, SymTensor,
};
pub use montecarlo::{
    compare_one, compare_sweep, default_window, empirical_density, empirical_quantile,
    gaussian_baseline, gaussian_quantile, model_quantile, normalize_density, predicted_quantile,
    simulate, sweep_models, CompareRow, Histogram, JumpDiffusionModel, McError, Sample,
    DEFAULT_NORM_TOL, MAX_POISSON_RATE, PROTOCOL_SEED, QUANTILE_PROB_TOL, SIM_CHUNK,
};
pub use resummation::{
    borel_resum, eval_pade, gauss_laguerre, pade, pade_from_coeffs, pade_log_density_2nd,
    raw_log_density_2nd, BorelSpec, PadeApprox, ResumError, DEFAULT_BOREL_NODES,
};

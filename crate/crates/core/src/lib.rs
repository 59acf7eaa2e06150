//! Multiaccess coded caching with heterogeneous retrieval costs.
//!
//! * [`scheme`] builds and validates the placement/retrieve/delivery arrays of
//!   the cyclic multiaccess scheme.
//! * [`delivery`] replays one delivery round symbolically and accounts every
//!   packet retrieval to its cost source.
//! * [`cost`] holds the closed-form per-level costs, generic over [`Scalar`].
//! * [`optimizer`] minimizes the superposition cost over level weights and
//!   caching ratios.
//! * [`experiments`] drives the level sweep and its CSV/SVG output.

pub mod combin;
pub mod cost;
pub mod delivery;
pub mod experiments;
pub mod optimizer;
pub mod scalar;
pub mod scheme;
pub mod system;

pub use scalar::{format_rational, parse_rational, Rational, Real, Scalar};
pub use scheme::{
    cache_node_set, check_shift_structure, cyc, psi, psi_inv, retrieve_intervals,
    user_retrieve_set, validate_pda, DeliveryArray, Entry, LevelParams, Limits, MessageId,
    MessageLabel, PdaReport, PdaViolation, RowLabel, Scheme, SchemeError, SchemeReport,
    StarArray, Subset,
};
pub use cost::{
    alpha_from_gammas, baseline_cost, level_cost, reduced_objective, superposition_objective,
    CostError, LevelCost, ReducedCoefficients, SuperpositionDesign, Support,
};
pub use delivery::{
    broadcast_messages, decode_user, direct_retrievals, level_params_for, simulate, simulate_superposition,
    simulate_with, CostBreakdown, DemandVector, Fetch, FetchKind, PacketId, PacketSet, SimError,
    SimOptions, SimulationReport, SuperpositionReport,
};
pub use experiments::{
    csv_string, format_sig, render_svg, sweep, write_csv, ExperimentConfig, ExperimentError, MuSpec,
    SweepRow,
};
pub use optimizer::{
    brute_force_oracle, greedy_search, grid_search, local_solve, lp_alpha, quantize_design,
    CandidateMode, GridBest, LocalSolution, OptimizationResult, OptimizeError, QuantizedDesign,
    SolverSettings, TraceRecord,
};
pub use system::{ConfigError, SystemConfig};

/// System configuration with exact rational parameters.
pub type ExactSystem = SystemConfig<Rational>;
/// System configuration in double precision.
pub type FloatSystem = SystemConfig<f64>;
/// Exact per-level cost.
pub type ExactLevelCost = LevelCost<Rational>;
/// Exact superposition design.
pub type ExactDesign = SuperpositionDesign<Rational>;
/// Double-precision superposition design.
pub type FloatDesign = SuperpositionDesign<f64>;

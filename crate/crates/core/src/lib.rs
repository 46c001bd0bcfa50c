//! Transfer operators of expanding and intermittent circle maps: moduli of
//! continuity, inverse branches and couplings, Wasserstein distances,
//! eigendata of the transfer operator and decay measurements.

pub mod decay;
pub mod error;
pub mod grid;
pub mod kernel;
pub mod maps;
pub mod moduli;
pub mod rpf;
pub mod transport;

pub use decay::{
    clip_at_floor, contraction_bound_check, fit_decay, measure_correlation_decay,
    measure_operator_decay, measure_wasserstein_decay, DecayFamily, DecayForm, DecayModel,
    DecayTrace, TraceRow,
};
pub use error::{Error, Result};
pub use grid::{circle_dist, wrap, CircleFunction, GridFunction, Potential, DEFAULT_GRID};
pub use kernel::{
    coupled_trajectory, coupling_cost, flatness_empirical, flatness_runs, flatness_series,
    natural_pairing, CostMode, CoupledTrajectory, CouplingCost, DerivativeBound, Evidence,
    FlatnessCertificate, FlatnessMethod, Pairing, SeriesRow, SupRow,
};
pub use maps::{
    verify_branch_contraction, ContractionFn, ContractionForm, CustomBranches, MapKind, MapModel,
};
pub use moduli::{choose_r0, holder_constant, ModulusSpec};
pub use rpf::{
    compute_rpf, dual_fixed_point, invariance_check, normalize_potential, power_iteration,
    transfer_apply, NormalizedPotential, RpfData, RpfSettings, TransferOperator,
};
pub use transport::{
    dual_pushforward, kantorovich_check, wasserstein, DiscreteMeasure, TransportPlan,
};

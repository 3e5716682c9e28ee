//! Ratio-limit kernels, bound constants, the radical and the ratio-limit metric.

mod checks;
mod estimate;
mod metric;
mod radical;
mod table;

pub use checks::{cocycle_check, martin_vs_ratio, nearest_neighbour_rho, rho_harmonicity_check, KernelResidual};
pub use estimate::{
    bound_constants, estimate_h, estimate_table, ratio_sequence, srlp_diagnostic, srlp_summary, BoundConstants, BoundTable,
    RatioSequence, ACCELERATION,
};
pub use metric::{boundary_trace, pseudometric_report, ratio_metric, Trace};
pub use radical::{detect_radical, RadicalReport, RadicalTolerance, MIN_RADICAL_TOLERANCE};
pub use table::{
    cartesian_h, closed_form_h_free_isotropic, CartesianKernel, EstimateMethod, FreeClosedForm, KernelEntry,
    KernelKind, KernelRow, KernelTable, KernelValue, RatioKernel, UnitKernel,
};

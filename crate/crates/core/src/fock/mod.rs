//! Finite windows of the path Fock space and the operators acting on them.

mod build;
mod checks;
mod operator;
mod window;

pub use build::{
    build_e, build_h, build_p, build_r, build_s, build_t, build_u, build_u_x, build_v, build_w, compose_e,
    compose_h, compose_u_x, minimal_n,
};
pub use checks::{
    composition_agreement, covariance_check, default_ladder, generator_identity_defect, level_profile,
    matrix_unit_defects, monomial_quotient_check, q0_projection_check, quotient_norm_estimate, subproduct_coisometry_check,
    t_w_decay_check, t_w_level_defects, unitary_and_commutation_defects, DefectProfile, FiberLadder, QuotientNorm,
    EXACT_TOLERANCE, QUOTIENT_LADDER_TOLERANCE,
};
pub use operator::{ComplexOperator, OperatorDump, Scalar, SparseOp, WindowedOperator, NORM_TOLERANCE};
pub use window::{BasisIndex, DumpEntry, FockWindow, WindowDump, DEFAULT_BASIS_CAP};

//! Secure two-party sampling: OT distributions, the bit-OT sup oracle,
//! efficiency bounds and the protocol-step identity checks.

pub mod bounds;
pub mod lemma;
pub mod monotone;
pub mod ot;

pub use bounds::{
    aci_efficiency_bound, axis_intercepts, parse_constraints, ww_bound, BoundMethod, Certificate,
    EfficiencyBound, Intercepts, TargetConstraint,
};
pub use lemma::{
    bit_ot_min_sum_zero, bit_ot_pair_min_sum_zero, bit_ot_sup_oracle, objective_via_pmf,
    BitOtClassParams, MinSumDerivation, SupOracleResult,
};
pub use monotone::{monotone_step_checks, run_monotone_suite, MonotoneReport};
pub use ot::{
    make_bit_ot, make_bit_ot_pair, make_string_ot, make_string_ot_pair, ot_channel, Builtin,
    OtSpec,
};

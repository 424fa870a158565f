//! Truncated Fock model of the free supersymmetric field on the line: Clifford
//! fields `c(f)`, boson fields `j(f)` and their resolvents, the mollified core
//! and the closed-form superderivation.

pub mod checks;
pub mod space;
pub mod testfn;

pub use checks::{
    check_resolvent_relations, mollifier_convergence, space_pairing, superderivation_case2, susy_state_wick_check,
    CoreGenerator, ZetaFormula,
};
pub use space::TruncatedQftSpace;
pub use testfn::{compute_pairings, Grid, Pairings, Preset, TestFunction};

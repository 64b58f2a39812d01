//! Diagnosis of power-grid voltage collapse via sparse compensation currents.
//!
//! The pipeline: parse a case ([`case_io`]), build a current-injection circuit
//! model in Cartesian voltage coordinates ([`network_model`]), then solve one of
//! three diagnosis problems ([`diagnosis`]) on top of a primal-dual interior-point
//! engine ([`nlp_core`]):
//!
//! * dense: minimum-norm compensation currents restoring KCL balance,
//! * sparse: reweighted L1 search for a few compensation locations,
//! * vreg: sparse compensation with bus voltage magnitudes boxed into bounds.
//!
//! [`reference_oracles`] holds independent verification paths (plain Newton power
//! flow, finite differences, exhaustive support enumeration) used by tests.

pub mod case_io;
pub mod diagnosis;
mod linsolve;
pub mod network_model;
pub mod nlp_core;
pub mod reference_oracles;
pub mod sparsemat;

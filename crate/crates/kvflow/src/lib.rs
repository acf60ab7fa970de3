//! Lattice gradient flows for the Yang–Mills–Higgs functional and the
//! vortex moment map on flat Kähler tori.
//!
//! The crate discretizes pairs (A, φ) — a unitary connection and a Higgs
//! section of a Hermitian bundle of rank n ∈ {1, 2} over T^{2m}, m ∈ {1, 2}
//! — on a collocated grid, and integrates three related parabolic systems:
//!
//! * the direct YMH gradient flow of
//!   ‖F_A‖² + ‖d_Aφ‖² + ¼‖φ⊗φ* − τI‖²,
//! * the vortex-functional flow of ‖ΛF_A − (i/2)(φ⊗φ* − τI)‖² on the
//!   gauged-holomorphic locus, and
//! * the rank-1 Hermitian-metric heat flow, reduced to a scalar equation
//!   for u with H = H₀e^{2u}.
//!
//! Derivatives use centered differences, whose exact skew-adjointness makes
//! the implemented flows exact gradient flows of the discrete energy: the
//! paper-trail monotonicity statements become machine-checkable invariants.
//! The `oracle` module provides independent ground truth (finite-difference
//! gradients, a Kazdan–Warner/Newton stationary solver, closed-form
//! energies); `diagnostics` turns maximum principles and Bochner bounds
//! into runtime monitors.
//!
//! Start with [`lattice::LatticeGeometry`], [`bundle::BundleSpec`] and
//! [`runner`], or see the `examples/` directory for end-to-end drivers.

pub mod bundle;
pub mod config;
pub mod conventions;
pub mod diagnostics;
pub mod energy;
pub mod error;
pub mod flow;
pub mod io;
pub mod lattice;
pub mod oracle;
pub mod runner;
pub(crate) mod smallmat;

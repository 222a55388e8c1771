//! Consistent-histories engine for finite-dimensional quantum measurement models.
//!
//! The crate is `no_std` (with `alloc`) when built without the default `std`
//! feature. Everything here is a pure computation over dense complex matrices:
//!
//! * [`linalg`] holds [`ComplexMatrix`], [`Ket`], Kronecker products and the
//!   Hermitian eigensolver with eigenvalue grouping.
//! * [`objects`] validates projectors, projective decompositions of the
//!   identity (PDIs), POVMs, isometries and observables.
//! * [`histories`] builds history families on a discrete time grid, evaluates
//!   chain kets, checks the consistency conditions and assigns probabilities.
//! * [`measurement`] builds measurement isometries, derives POVMs through the
//!   backwards map and assembles the inference families that say which prior
//!   microscopic property a pointer outcome reveals.
#![cfg_attr(not(any(test, feature = "std")), no_std)]
#![deny(unsafe_code)]

extern crate alloc;

pub mod histories;
pub mod linalg;
pub mod measurement;
pub mod objects;
mod tolerance;

pub use linalg::{ComplexMatrix, EigenGroup, EigenSystem, Ket, LinalgError, C64};
pub use tolerance::Tolerances;

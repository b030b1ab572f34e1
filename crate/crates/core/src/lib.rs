//! Adaptive first-order methods for convex problems with inexact `(δ, Δ, L)`-models.
//!
//! The crate covers
//! - prox structures and Bregman geometry ([`geometry`]),
//! - inexact model oracles and their validation ([`oracle`]),
//! - the adaptive gradient method ([`gd`]) and its accelerated sibling ([`fgm`]),
//! - restarts with artificial inexactness for nonsmooth problems ([`nonsmooth`]),
//! - adaptive mirror prox for variational inequalities and saddle problems ([`vi`]),
//! - mirror descent with switching steps for constrained problems ([`switching`]).

pub mod error;
pub mod geometry;
pub mod linalg;
pub mod oracle;
pub mod reference;
pub mod trace;
pub mod gd;
pub mod fgm;
pub mod nonsmooth;
pub mod vi;
pub mod switching;

pub use error::{Error, Result};

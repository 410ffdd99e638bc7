//! Exact experiments in mixed Diophantine approximation with D-adic
//! pseudo-absolute values.

pub mod approxfn;
pub mod arith;
pub mod counterexample;
pub mod dadic;
pub mod dirichlet;
pub mod error;
pub mod power;
pub mod sets;
pub mod sums;
pub mod ubiquity;

pub use approxfn::{build_psi0, build_psi1, ApproximatingFunction, Comparator, WeightPair};
pub use arith::Exponent;
pub use counterexample::{stitch, CounterexampleBlock, StitchedPsi};
pub use dadic::{DadicSequence, PavValue, RatioRule};
pub use error::{Error, Result};
pub use power::{compare_power, Bracket, PowerProduct, Value};
pub use sets::{IntervalUnion, ResonantLayer};
pub use dirichlet::{dirichlet_search, m_index, DirichletApprox, MIndex};
pub use sums::{classify, critical_exponent, jb_dimension, partial_sum, schlomilch, tau_estimate, ConvergenceVerdict, SeriesSpec, Term, Verdict};
pub use ubiquity::{bdv_sum, kcounts, rho, verify_local_ubiquity, KCounts, UbiquityReport};

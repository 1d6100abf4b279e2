//! Invariant metrics, boundary scaling and Fridman invariant estimates for
//! domains in `C^n` cut out by real polynomials in `(z, z̄)`.

pub mod boundary;
pub mod domain;
pub mod error;
pub mod experiments;
pub mod fridman;
pub mod linalg;
pub mod metrics;
pub mod poly;
pub mod quadrature;
pub mod report;
pub mod scaling;

pub use domain::{parse_domain_spec, preset_domain, Domain, DomainClass, PolyhedronSpec, Preset};
pub use error::{Error, Result};
pub use linalg::Point;
pub use poly::{Monomial, Poly, PolyMap, RealPoly};

//! Numerical evaluation of the confluent Heun functions and their first
//! derivatives anywhere in the complex plane.
//!
//! ```
//! use heunc::{evaluate, Config, FunctionKind, Params};
//! use num_complex::Complex64;
//!
//! // HeunCl(1/4, 0, 1/2, 1/2, 0; z) = sqrt(1 - z)
//! let p = Params::real(0.25, 0.0, 0.5, 0.5, 0.0);
//! let v = evaluate(FunctionKind::Cl, &p, Complex64::new(0.25, 0.0), &Config::default(), true).unwrap();
//! assert!((v.f.re - 0.75f64.sqrt()).abs() < 1e-14);
//! ```

pub mod asymptotics;
pub mod connection;
pub mod continuation;
pub mod domain;
pub mod error;
pub mod evaluator;
pub mod reference;
pub mod series_zero;
pub mod taylor_step;

pub use domain::{classify_point, Config, EvalQuad, FarFieldRadius, Params, Region};
pub use error::{HeunError, Result};
pub use evaluator::{evaluate, evaluate_with_trace, DispatchRecord, FunctionKind};

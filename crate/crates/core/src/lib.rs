//! Finite elements for steady incompressible flows governed by implicit
//! monotone constitutive graphs, together with the discrete analysis
//! machinery (inf-sup estimates, Bogovskiĭ right inverse, Lipschitz
//! truncation) as testable numerical operators.

pub mod constitutive;
pub mod elements;
pub mod error;
pub mod harness;
pub mod linalg;
pub mod lipschitz;
pub mod manufactured;
pub mod mesh;
pub mod quadrature;
pub mod system;

pub use error::{Error, Result};

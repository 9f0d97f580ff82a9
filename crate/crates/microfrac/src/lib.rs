//! Monolithic finite-element solver for micromorphic phase-field fracture
//! in two dimensions.
//!
//! The energy functional couples a nodal displacement field and a nodal
//! micromorphic field through a pointwise phase-field that carries the
//! irreversibility constraint. Brittle AT1/AT2 and quasi-brittle softening
//! laws are supported, with monolithic Newton solves convexified by linear
//! extrapolation of the micromorphic field.

pub mod assembly;
pub mod cases;
pub mod config;
pub mod constitutive;
pub mod error;
pub mod local_pf;
pub mod mesh;
pub mod output;
pub mod solver;
pub mod sparse;
pub mod verify;

pub use error::{Error, Result};
pub use mesh::{BenchmarkCase, Mesh, MeshOptions};

/// Cap assembly parallelism from the MICROFRAC_THREADS environment
/// variable. Safe to call more than once; later calls are no-ops.
pub fn init_thread_cap_from_env() {
    if let Ok(v) = std::env::var("MICROFRAC_THREADS") {
        if let Ok(n) = v.parse::<usize>() {
            if n >= 1 {
                let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            }
        }
    }
}

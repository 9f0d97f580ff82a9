//! Boundary-condition definitions of the four benchmark cases.

use crate::mesh::BenchmarkCase;
use crate::solver::CaseBcs;

/// Constraints and reaction bookkeeping for a benchmark case.
///
/// - Tension square: bottom fully fixed, top driven vertically (x free).
/// - Shear square: bottom fully fixed, top driven horizontally with its
///   vertical motion suppressed, rollers on the side edges.
/// - L-panel: lower-leg bottom edge fixed, 30 mm load edge driven upward.
/// - Bending beam: pin at the left support, roller at the right one, load
///   point driven downward; the reaction is reported along the load.
pub fn case_bcs(case: BenchmarkCase) -> CaseBcs {
    match case {
        BenchmarkCase::Sent => CaseBcs {
            driven: vec![("top".into(), 1, 1.0)],
            fixed: vec![("bottom".into(), 0), ("bottom".into(), 1)],
            reaction_set: "top".into(),
            reaction_dir: [0.0, 1.0],
        },
        BenchmarkCase::Sens => CaseBcs {
            driven: vec![("top".into(), 0, 1.0)],
            fixed: vec![
                ("bottom".into(), 0),
                ("bottom".into(), 1),
                ("top".into(), 1),
                ("left".into(), 1),
                ("right".into(), 1),
            ],
            reaction_set: "top".into(),
            reaction_dir: [1.0, 0.0],
        },
        BenchmarkCase::LPanel => CaseBcs {
            driven: vec![("load_edge".into(), 1, 1.0)],
            fixed: vec![("fixed_bottom".into(), 0), ("fixed_bottom".into(), 1)],
            reaction_set: "load_edge".into(),
            reaction_dir: [0.0, 1.0],
        },
        BenchmarkCase::Tpb => CaseBcs {
            driven: vec![("load_point".into(), 1, -1.0)],
            fixed: vec![
                ("support_left".into(), 0),
                ("support_left".into(), 1),
                ("support_right".into(), 1),
            ],
            reaction_set: "load_point".into(),
            reaction_dir: [0.0, -1.0],
        },
    }
}

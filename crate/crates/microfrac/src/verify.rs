//! Built-in verification suites behind `microfrac verify`: oracle and
//! property checks that a release build can run without the test harness.
//!
//! The scalar oracles here are written out independently of the solver path
//! (their own degradation/dissipation derivative formulas and a plain
//! bisection), so they cross-check the implementation rather than restate
//! it.

use crate::assembly::{Assembler, SolveMode, State};
use crate::constitutive::{
    amor_split, compute_a1, p_dev, p_vol, ElasticParams, FractureModel, Softening, StrainState,
    VOIGT_ID,
};
use crate::local_pf::solve_local;
use crate::mesh::{generate_case_mesh, BenchmarkCase, MeshOptions};
use crate::solver::Materials;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &'static str, passed: bool, detail: String) -> CheckResult {
    CheckResult { name, passed, detail }
}

/// Independent local-equation residual: hand-written derivatives per model.
fn oracle_residual(
    phi: f64,
    psi: f64,
    d: f64,
    model_id: usize,
    gc: f64,
    l: f64,
    a1: f64,
    alpha: f64,
) -> f64 {
    let (dg, dw, cw) = match model_id {
        0 => (-2.0 * (1.0 - phi), 1.0, 8.0 / 3.0),
        1 => (-2.0 * (1.0 - phi), 2.0 * phi, 2.0),
        _ => {
            // Cornelissen: p = 2, a2 = 1.3868, a3 = 0.6567.
            let (a2, a3) = (1.3868, 0.6567);
            let n = (1.0 - phi) * (1.0 - phi);
            let dn = -2.0 * (1.0 - phi);
            let q = n + a1 * phi + a1 * a2 * phi * phi + a1 * a2 * a3 * phi * phi * phi;
            let dq = dn + a1 + 2.0 * a1 * a2 * phi + 3.0 * a1 * a2 * a3 * phi * phi;
            ((dn * q - n * dq) / (q * q), 2.0 - 2.0 * phi, std::f64::consts::PI)
        }
    };
    dg * psi + gc / (cw * l) * dw + alpha * (phi - d)
}

fn oracle_bisect(psi: f64, d: f64, phi_old: f64, model_id: usize, gc: f64, l: f64, a1: f64, alpha: f64) -> f64 {
    let res = |phi: f64| oracle_residual(phi, psi, d, model_id, gc, l, a1, alpha);
    if res(phi_old) >= 0.0 {
        return phi_old;
    }
    if res(1.0) <= 0.0 {
        return 1.0;
    }
    let n = 2048;
    let (mut lo, mut hi) = (phi_old, 1.0);
    for k in 1..=n {
        let x = phi_old + (1.0 - phi_old) * (k as f64) / (n as f64);
        if res(x) >= 0.0 {
            hi = x;
            break;
        }
        lo = x;
    }
    while hi - lo > 1e-12 {
        let mid = 0.5 * (lo + hi);
        if res(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Closed-form/Newton local solves against a 1e-10 bisection over randomized
/// inputs, all three model families.
pub fn check_local_oracle(samples: usize) -> CheckResult {
    let mut rng = ChaCha8Rng::seed_from_u64(0x6d6963726f);
    let elas = ElasticParams::new(2.0e4, 0.2).unwrap();
    let mut worst = 0.0f64;
    for i in 0..samples {
        let model_id = i % 3;
        let gc = rng.random_range(0.05..3.0);
        let l = rng.random_range(0.05..2.0);
        let model = match model_id {
            0 => FractureModel::at1(gc, l).unwrap(),
            1 => FractureModel::at2(gc, l).unwrap(),
            _ => FractureModel::quasi_brittle(&elas, gc, l, Softening::Cornelissen, 2.4).unwrap(),
        };
        let a1 = compute_a1(&elas, gc, l, 2.4).unwrap();
        let alpha = rng.random_range(10.0..400.0) * gc / l;
        let psi = rng.random_range(0.0..5.0) * gc / l;
        let d = rng.random_range(-0.2..1.2);
        let phi_old = rng.random_range(0.0..1.0);
        let solved = match solve_local(psi, d, phi_old, &model, alpha) {
            Ok(s) => s.phi,
            Err(e) => return check("local-oracle", false, format!("solve failed: {e}")),
        };
        let oracle = oracle_bisect(psi, d, phi_old, model_id, gc, l, a1, alpha);
        worst = worst.max((solved - oracle).abs());
    }
    check(
        "local-oracle",
        worst < 1e-8,
        format!("{samples} samples, max |phi - bisection| = {worst:.3e}"),
    )
}

/// Projector algebra, stress additivity, and finite-difference
/// energy-stress consistency on random strains.
pub fn check_constitutive() -> CheckResult {
    let pd = p_dev();
    let pv = p_vol();
    let idem = (pd * pd - pd).norm();
    let id6 = nalgebra::SVector::<f64, 6>::from_column_slice(&VOIGT_ID);
    let annih = (pd * id6).norm();
    if idem > 1e-12 || annih > 1e-12 {
        return check("constitutive", false, format!("projector algebra: idem={idem:.1e} annih={annih:.1e}"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let elas = ElasticParams::new(30_000.0, 0.22).unwrap();
    let lambda = elas.bulk - 2.0 * elas.shear / 3.0;
    let mut worst = 0.0f64;
    for _ in 0..200 {
        let mut v = [0.0; 6];
        for x in &mut v {
            *x = rng.random_range(-5e-3..5e-3);
        }
        let eps = StrainState::from_voigt(v);
        // P_vol reproduces the volumetric content.
        let pv_eps = pv * nalgebra::SVector::<f64, 6>::from_column_slice(&v);
        let vol_err = (pv_eps - id6 * eps.trace).norm();
        worst = worst.max(vol_err);
        // Additivity against the isotropic law.
        let s = amor_split(&eps, &elas);
        for i in 0..6 {
            let factor = if i < 3 { 2.0 * elas.shear } else { elas.shear };
            let expect = lambda * eps.trace * VOIGT_ID[i] + factor * v[i];
            let err = ((s.sigma_plus[i] + s.sigma_minus[i]) - expect).abs() / elas.e0;
            worst = worst.max(err);
        }
        // Energy gradients away from the trace kink.
        if eps.trace.abs() > 1e-3 {
            let h = 1e-6;
            for i in 0..6 {
                let mut up = v;
                let mut dn = v;
                up[i] += h;
                dn[i] -= h;
                let sp = amor_split(&StrainState::from_voigt(up), &elas);
                let sm = amor_split(&StrainState::from_voigt(dn), &elas);
                let fd = (sp.psi_plus - sm.psi_plus) / (2.0 * h);
                let scale = s.sigma_plus[i].abs().max(1e-3);
                worst = worst.max((fd - s.sigma_plus[i]).abs() / scale * 1e-7);
            }
        }
    }
    check("constitutive", worst < 1e-10, format!("max scaled identity error {worst:.3e}"))
}

/// Degradation monotonicity on a 1000-point grid plus the two reference a1
/// values.
pub fn check_models() -> CheckResult {
    let elas_l = ElasticParams::new(2.0e4, 0.18).unwrap();
    let elas_t = ElasticParams::new(2.0e4, 0.2).unwrap();
    let models = [
        FractureModel::at1(2.7, 0.015).unwrap(),
        FractureModel::at2(2.7, 0.015).unwrap(),
        FractureModel::quasi_brittle(&elas_l, 0.130, 10.0, Softening::Cornelissen, 2.5).unwrap(),
        FractureModel::quasi_brittle(&elas_l, 0.130, 10.0, Softening::Linear, 2.5).unwrap(),
        FractureModel::quasi_brittle(&elas_l, 0.130, 10.0, Softening::Exponential, 2.5).unwrap(),
    ];
    for m in &models {
        let mut prev = f64::INFINITY;
        for k in 0..=1000 {
            let g = m.degradation(k as f64 / 1000.0).unwrap().0;
            if g > prev + 1e-15 {
                return check("models", false, format!("degradation not monotone at {k}"));
            }
            prev = g;
        }
    }
    let a1_l = compute_a1(&elas_l, 0.130, 10.0, 2.5).unwrap();
    let a1_t = compute_a1(&elas_t, 0.113, 2.5, 2.4).unwrap();
    let ok = (a1_l - 52.97).abs() < 0.01 && (a1_t - 199.83).abs() < 0.01;
    check("models", ok, format!("a1 = {a1_l:.4} / {a1_t:.4}"))
}

/// Mesh generators: analytic areas and orientation invariants.
pub fn check_meshes() -> CheckResult {
    let checks: [(BenchmarkCase, f64, f64); 4] = [
        (BenchmarkCase::Sent, 0.05, 1.0),
        (BenchmarkCase::Sens, 0.05, 1.0),
        (BenchmarkCase::LPanel, 20.0, 187_500.0),
        (BenchmarkCase::Tpb, 4.0, 44_750.0),
    ];
    for (case, h, area) in checks {
        let mesh = match generate_case_mesh(case, h, &MeshOptions::default()) {
            Ok(m) => m,
            Err(e) => return check("meshes", false, format!("{case:?}: {e}")),
        };
        let got = mesh.total_area();
        if ((got - area) / area).abs() > 1e-8 {
            return check("meshes", false, format!("{case:?}: area {got} vs {area}"));
        }
        for e in 0..mesh.num_elements() {
            if mesh.element_geometry(e).is_err() {
                return check("meshes", false, format!("{case:?}: bad element {e}"));
            }
        }
    }
    check("meshes", true, "areas and orientation for all four generators".into())
}

/// Global tangent against directional finite differences on a small mesh,
/// both problem variants.
pub fn check_tangent() -> CheckResult {
    let mesh = generate_case_mesh(
        BenchmarkCase::Sent,
        0.12,
        &MeshOptions { refine: false, ..Default::default() },
    )
    .unwrap();
    let elastic = ElasticParams::new(1000.0, 0.25).unwrap();
    let fracture = FractureModel::at2(0.5, 0.2).unwrap();
    let mats = Materials::new(elastic, fracture, 100.0);
    let assembler = Assembler::new(&mesh).unwrap();
    let n_nodes = mesh.num_nodes();
    let mut rng = ChaCha8Rng::seed_from_u64(7);

    let mut worst = 0.0f64;
    for mode in [SolveMode::Problem4, SolveMode::Problem5] {
        for _ in 0..3 {
            let mut state = State::new(&mesh);
            // Dilatational bias keeps every trace positive; d in mid-range
            // keeps every point interior.
            for n in 0..n_nodes {
                let [x, y] = mesh.node(n);
                state.u[2 * n] = 2e-3 * x + rng.random_range(-2e-4..2e-4);
                state.u[2 * n + 1] = 2e-3 * y + rng.random_range(-2e-4..2e-4);
            }
            for v in state.d.iter_mut() {
                *v = rng.random_range(0.35..0.6);
            }
            // Extrapolation history pinned below the irreversibility bound
            // so phi-hat carries no strain dependence (its omission from
            // K_uu is the Problem 5 design).
            let d_hat = vec![-1.0; n_nodes];
            let d_hat = match mode {
                SolveMode::Problem4 => state.d.clone(),
                SolveMode::Problem5 => d_hat,
            };

            let sys = assembler.assemble(&mesh, &state, mode, &mats, &d_hat).unwrap();
            let mut dir: Vec<f64> = (0..3 * n_nodes).map(|_| rng.random_range(-1.0..1.0)).collect();
            let nrm = crate::sparse::norm(&dir);
            dir.iter_mut().for_each(|v| *v /= nrm);
            let h = 1e-7;
            let mut up = state.clone();
            let mut dn = state.clone();
            for i in 0..2 * n_nodes {
                up.u[i] += h * dir[i];
                dn.u[i] -= h * dir[i];
            }
            for i in 0..n_nodes {
                up.d[i] += h * dir[2 * n_nodes + i];
                dn.d[i] -= h * dir[2 * n_nodes + i];
            }
            let su = assembler.assemble(&mesh, &up, mode, &mats, &d_hat).unwrap();
            let sd = assembler.assemble(&mesh, &dn, mode, &mats, &d_hat).unwrap();
            let mut kv = vec![0.0; 3 * n_nodes];
            sys.matrix.matvec(&dir, &mut kv);
            let mut err = 0.0;
            let mut scale = 0.0;
            for i in 0..3 * n_nodes {
                let fd = (su.internal_forces[i] - sd.internal_forces[i]) / (2.0 * h);
                err += (kv[i] - fd) * (kv[i] - fd);
                scale += kv[i] * kv[i];
            }
            worst = worst.max((err / scale.max(1e-30)).sqrt());
        }
    }
    check("tangent", worst < 1e-4, format!("max relative J.v error {worst:.3e}"))
}

pub fn run_all() -> Vec<CheckResult> {
    vec![
        check_local_oracle(10_000),
        check_constitutive(),
        check_models(),
        check_meshes(),
        check_tangent(),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn verify_suite_passes() {
        for r in run_all() {
            assert!(r.passed, "{}: {}", r.name, r.detail);
        }
    }
}

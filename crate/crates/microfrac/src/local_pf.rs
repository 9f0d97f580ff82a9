//! Pointwise phase-field solves with irreversibility.
//!
//! At each integration point the phase-field solves the scalar equation
//!
//!   g'(phi) psi+  +  Gc/(c_w l) w'(phi)  +  alpha (phi - d)  =  0
//!
//! subject to phi in [phi_old, 1]. AT1/AT2 admit closed forms; the
//! quasi-brittle family needs a safeguarded scalar Newton solve. The clamp
//! state drives the sensitivities used by the stiffness blocks.

use crate::constitutive::{FractureModel, ModelKind};
use crate::error::{Error, Result};

/// Which bound of [phi_old, 1] is active after the local solve.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Clamp {
    /// Irreversibility bound phi = phi_old is active.
    Lower,
    /// The unconstrained root was admissible.
    Interior,
    /// Upper bound phi = 1 is active.
    Upper,
}

/// Converged state of one integration point's local solve.
#[derive(Debug, Clone, Copy)]
pub struct PointState {
    pub phi: f64,
    pub phi_old: f64,
    /// Micromorphic value that entered the solve (d or its extrapolation).
    pub d_value: f64,
    pub psi_plus: f64,
    pub clamped: Clamp,
}

/// Residual of the local phase-field equation at `phi`.
pub fn local_residual(phi: f64, psi_plus: f64, d_value: f64, model: &FractureModel, alpha: f64) -> Result<f64> {
    let (_, dg, _) = model.degradation(phi)?;
    let (_, dw, _) = model.dissipation(phi)?;
    Ok(dg * psi_plus + model.dissipation_scale() * dw + alpha * (phi - d_value))
}

fn clamp_root(unconstrained: f64, phi_old: f64) -> (f64, Clamp) {
    if unconstrained < phi_old {
        (phi_old, Clamp::Lower)
    } else if unconstrained > 1.0 {
        (1.0, Clamp::Upper)
    } else {
        (unconstrained, Clamp::Interior)
    }
}

/// Solve the local phase-field equation on [phi_old, 1].
///
/// AT1/AT2 use the explicit min/max expressions; the quasi-brittle model
/// runs a safeguarded Newton iteration on the smallest admissible root.
pub fn solve_local(
    psi_plus: f64,
    d_value: f64,
    phi_old: f64,
    model: &FractureModel,
    alpha: f64,
) -> Result<PointState> {
    if !(psi_plus >= 0.0) || !d_value.is_finite() {
        return Err(Error::LocalSolve(format!(
            "invalid point inputs: psi_plus={psi_plus}, d={d_value}"
        )));
    }
    if !(0.0..=1.0).contains(&phi_old) {
        return Err(Error::PhaseFieldOutOfRange(phi_old));
    }
    if !(alpha > 0.0) {
        return Err(Error::InvalidParameter(format!("alpha must be positive, got {alpha}")));
    }

    let (gc, l) = (model.gc, model.length_scale);
    let (phi, clamped) = match model.kind {
        ModelKind::At1 => {
            let unc = (2.0 * psi_plus + alpha * d_value - 3.0 * gc / (8.0 * l)) / (2.0 * psi_plus + alpha);
            clamp_root(unc, phi_old)
        }
        ModelKind::At2 => {
            let unc = (2.0 * psi_plus + alpha * d_value) / (2.0 * psi_plus + alpha + gc / l);
            clamp_root(unc, phi_old)
        }
        ModelKind::QuasiBrittle(_) => solve_quasi_brittle(psi_plus, d_value, phi_old, model, alpha)?,
    };

    Ok(PointState { phi, phi_old, d_value, psi_plus, clamped })
}

/// Extrapolated variant: identical equation with the extrapolated
/// micromorphic value; the result feeds only the momentum balance.
pub fn solve_local_extrapolated(
    psi_plus: f64,
    d_hat: f64,
    phi_old: f64,
    model: &FractureModel,
    alpha: f64,
) -> Result<PointState> {
    solve_local(psi_plus, d_hat, phi_old, model, alpha)
}

/// Smallest root of the quasi-brittle local equation in [phi_old, 1]:
/// sign-bracketing scan over 32 subintervals, then Newton with bisection
/// safeguard inside the bracket.
fn solve_quasi_brittle(
    psi_plus: f64,
    d_value: f64,
    phi_old: f64,
    model: &FractureModel,
    alpha: f64,
) -> Result<(f64, Clamp)> {
    let res = |phi: f64| local_residual(phi, psi_plus, d_value, model, alpha);

    // No evolution: the KKT residual at the irreversibility bound is >= 0.
    let r_lo = res(phi_old)?;
    if r_lo >= 0.0 {
        return Ok((phi_old, Clamp::Lower));
    }
    if phi_old >= 1.0 {
        return Ok((1.0, Clamp::Upper));
    }

    // Scan for the first sign change; residual is negative at phi_old.
    const SCAN: usize = 32;
    let width = 1.0 - phi_old;
    let mut lo = phi_old;
    let mut hi = 1.0;
    let mut bracketed = false;
    let mut r_at_lo = r_lo;
    for k in 1..=SCAN {
        let x = phi_old + width * (k as f64) / (SCAN as f64);
        let rx = res(x)?;
        if rx >= 0.0 {
            hi = x;
            bracketed = true;
            break;
        }
        lo = x;
        r_at_lo = rx;
    }
    if !bracketed {
        // Residual negative on the whole interval: driving terms dominate.
        return Ok((1.0, Clamp::Upper));
    }

    // Safeguarded Newton started at max(phi_old, d) when inside the bracket.
    let mut x = d_value.max(phi_old);
    if !(x > lo && x < hi) {
        x = 0.5 * (lo + hi);
    }
    let tol = 1e-12;
    for _ in 0..100 {
        let r = res(x)?;
        if r < 0.0 {
            lo = x;
            r_at_lo = r;
        } else {
            hi = x;
        }
        if hi - lo <= tol {
            let root = 0.5 * (lo + hi);
            return Ok(clamp_root(root, phi_old));
        }
        let (_, _, ddg) = model.degradation(x)?;
        let (_, _, ddw) = model.dissipation(x)?;
        let slope = ddg * psi_plus + model.dissipation_scale() * ddw + alpha;
        let step_ok = slope.is_finite() && slope.abs() > 0.0;
        let mut next = if step_ok { x - r / slope } else { f64::NAN };
        if !next.is_finite() || next <= lo || next >= hi {
            next = 0.5 * (lo + hi);
        }
        if (next - x).abs() <= tol && r.abs() <= tol * alpha.max(1.0) {
            return Ok(clamp_root(next, phi_old));
        }
        x = next;
    }
    Err(Error::LocalSolve(format!(
        "quasi-brittle local solve did not converge after 100 iterations \
         (psi+={psi_plus:.6e}, d={d_value:.6e}, phi_old={phi_old:.6e}, \
         bracket=[{lo:.9}, {hi:.9}], residual at lo={r_at_lo:.3e})"
    )))
}

/// Sensitivities (dphi/dpsi+, dphi/dd) of the local solve.
///
/// Zero when a clamp is active; otherwise implicit differentiation with
/// J = g''(phi) psi+ + Gc/(c_w l) w''(phi) + alpha.
pub fn sensitivities(state: &PointState, model: &FractureModel, alpha: f64) -> Result<(f64, f64)> {
    if state.clamped != Clamp::Interior {
        return Ok((0.0, 0.0));
    }
    let (_, dg, ddg) = model.degradation(state.phi)?;
    let (_, _, ddw) = model.dissipation(state.phi)?;
    let j = ddg * state.psi_plus + model.dissipation_scale() * ddw + alpha;
    if !(j > 0.0) {
        return Err(Error::LocalJacobian(j));
    }
    Ok((-dg / j, alpha / j))
}

/// Linear extrapolation of the nodal micromorphic vector from the last two
/// converged steps: d_hat = d_curr + ratio (d_curr - d_prev).
pub fn extrapolate_d(d_prev: &[f64], d_curr: &[f64], ratio: f64) -> Result<Vec<f64>> {
    if d_prev.len() != d_curr.len() {
        return Err(Error::InvalidParameter(format!(
            "extrapolation length mismatch: {} vs {}",
            d_prev.len(),
            d_curr.len()
        )));
    }
    Ok(d_curr
        .iter()
        .zip(d_prev)
        .map(|(&c, &p)| c + ratio * (c - p))
        .collect())
}

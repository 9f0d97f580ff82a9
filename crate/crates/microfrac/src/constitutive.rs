//! Elastic parameters, the Amor volumetric/deviatoric energy split, and the
//! degradation/dissipation function families (AT1, AT2, quasi-brittle).
//!
//! All tensor work uses 6-component Voigt vectors with engineering shear
//! strains, ordered (xx, yy, zz, xy, yz, xz). Plane strain is embedded by
//! zeroing the out-of-plane components; the trace is the full 3D trace.

use crate::error::{Error, Result};
use nalgebra::SMatrix;

pub type Matrix6 = SMatrix<f64, 6, 6>;

/// Voigt identity vector (the second-order identity tensor).
pub const VOIGT_ID: [f64; 6] = [1.0, 1.0, 1.0, 0.0, 0.0, 0.0];

/// Isotropic elastic constants. Bulk and shear moduli are derived from
/// (E0, nu) at construction and kept alongside.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ElasticParams {
    /// Young's modulus [MPa].
    pub e0: f64,
    /// Poisson ratio [-].
    pub nu: f64,
    /// Bulk modulus K = E0 / (3 (1 - 2 nu)) [MPa].
    pub bulk: f64,
    /// Shear modulus mu = E0 / (2 (1 + nu)) [MPa].
    pub shear: f64,
}

impl ElasticParams {
    pub fn new(e0: f64, nu: f64) -> Result<Self> {
        if !(e0 > 0.0) {
            return Err(Error::InvalidParameter(format!("E0 must be positive, got {e0}")));
        }
        if !(nu > -1.0 && nu < 0.5) {
            return Err(Error::InvalidParameter(format!("nu must lie in (-1, 0.5), got {nu}")));
        }
        Ok(Self {
            e0,
            nu,
            bulk: e0 / (3.0 * (1.0 - 2.0 * nu)),
            shear: e0 / (2.0 * (1.0 + nu)),
        })
    }
}

/// Softening law for the quasi-brittle model; fixes (p, a2, a3).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Softening {
    Linear,
    Exponential,
    Cornelissen,
}

impl Softening {
    /// Shape parameters (p, a2, a3) of the rational degradation function.
    pub fn shape_params(self) -> (f64, f64, f64) {
        match self {
            Softening::Linear => (2.0, -0.5, 0.0),
            Softening::Exponential => (2.5, 2.0_f64.powf(5.0 / 3.0) - 3.0, 0.0),
            Softening::Cornelissen => (2.0, 1.3868, 0.6567),
        }
    }
}

/// Parameters of the rational quasi-brittle degradation function.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuasiBrittleParams {
    pub softening: Softening,
    /// Tensile strength [MPa].
    pub ft: f64,
    pub p: f64,
    pub a1: f64,
    pub a2: f64,
    pub a3: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ModelKind {
    At1,
    At2,
    QuasiBrittle(QuasiBrittleParams),
}

/// Fracture model family: Griffith energy, length scale, and the
/// degradation/dissipation pair that defines the member of the family.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FractureModel {
    pub kind: ModelKind,
    /// Griffith fracture energy [N/mm].
    pub gc: f64,
    /// Regularization length scale [mm].
    pub length_scale: f64,
}

/// a1 = 4 E0 Gc / (pi l ft^2) for the quasi-brittle family.
pub fn compute_a1(elas: &ElasticParams, gc: f64, l: f64, ft: f64) -> Result<f64> {
    if !(gc > 0.0 && l > 0.0 && ft > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "a1 requires positive Gc, l, ft (got Gc={gc}, l={l}, ft={ft})"
        )));
    }
    Ok(4.0 * elas.e0 * gc / (std::f64::consts::PI * l * ft * ft))
}

impl FractureModel {
    fn check_gc_l(gc: f64, l: f64) -> Result<()> {
        if !(gc > 0.0) {
            return Err(Error::InvalidParameter(format!("Gc must be positive, got {gc}")));
        }
        if !(l > 0.0) {
            return Err(Error::InvalidParameter(format!("l must be positive, got {l}")));
        }
        Ok(())
    }

    pub fn at1(gc: f64, l: f64) -> Result<Self> {
        Self::check_gc_l(gc, l)?;
        Ok(Self { kind: ModelKind::At1, gc, length_scale: l })
    }

    pub fn at2(gc: f64, l: f64) -> Result<Self> {
        Self::check_gc_l(gc, l)?;
        Ok(Self { kind: ModelKind::At2, gc, length_scale: l })
    }

    pub fn quasi_brittle(
        elas: &ElasticParams,
        gc: f64,
        l: f64,
        softening: Softening,
        ft: f64,
    ) -> Result<Self> {
        Self::check_gc_l(gc, l)?;
        let a1 = compute_a1(elas, gc, l, ft)?;
        let (p, a2, a3) = softening.shape_params();
        Ok(Self {
            kind: ModelKind::QuasiBrittle(QuasiBrittleParams { softening, ft, p, a1, a2, a3 }),
            gc,
            length_scale: l,
        })
    }

    /// Normalization constant of the dissipation function: 8/3, 2, or pi.
    pub fn c_w(&self) -> f64 {
        match self.kind {
            ModelKind::At1 => 8.0 / 3.0,
            ModelKind::At2 => 2.0,
            ModelKind::QuasiBrittle(_) => std::f64::consts::PI,
        }
    }

    /// Gc / (c_w l), the prefactor of the local dissipation term.
    pub fn dissipation_scale(&self) -> f64 {
        self.gc / (self.c_w() * self.length_scale)
    }

    /// 2 Gc l / c_w, the prefactor of the micromorphic gradient term.
    pub fn gradient_scale(&self) -> f64 {
        2.0 * self.gc * self.length_scale / self.c_w()
    }

    /// Degradation function and its first two derivatives at `phi`.
    ///
    /// AT1/AT2 use (1 - phi)^2; the quasi-brittle family uses the rational
    /// form (1 - phi)^p / Q(phi) with Q = (1-phi)^p + a1 phi + a1 a2 phi^2
    /// + a1 a2 a3 phi^3.
    pub fn degradation(&self, phi: f64) -> Result<(f64, f64, f64)> {
        check_unit_range(phi)?;
        match self.kind {
            ModelKind::At1 | ModelKind::At2 => {
                let one = 1.0 - phi;
                Ok((one * one, -2.0 * one, 2.0))
            }
            ModelKind::QuasiBrittle(q) => {
                let one = 1.0 - phi;
                // n = (1-phi)^p and derivatives; p = 2 is the common case
                // and sits in the innermost local-solve loop.
                let (n, dn, ddn) = if q.p == 2.0 {
                    (one * one, -2.0 * one, 2.0)
                } else {
                    (
                        one.powf(q.p),
                        -q.p * one.powf(q.p - 1.0),
                        q.p * (q.p - 1.0) * one.powf(q.p - 2.0),
                    )
                };
                let poly = q.a1 * phi + q.a1 * q.a2 * phi * phi + q.a1 * q.a2 * q.a3 * phi.powi(3);
                let dpoly = q.a1 + 2.0 * q.a1 * q.a2 * phi + 3.0 * q.a1 * q.a2 * q.a3 * phi * phi;
                let ddpoly = 2.0 * q.a1 * q.a2 + 6.0 * q.a1 * q.a2 * q.a3 * phi;
                let qq = n + poly;
                let dq = dn + dpoly;
                let ddq = ddn + ddpoly;
                let g = n / qq;
                let dg = (dn * qq - n * dq) / (qq * qq);
                let ddg = (ddn * qq * qq - n * qq * ddq - 2.0 * dn * dq * qq + 2.0 * n * dq * dq)
                    / (qq * qq * qq);
                Ok((g, dg, ddg))
            }
        }
    }

    /// Dissipation function w and its first two derivatives at `phi`:
    /// phi (AT1), phi^2 (AT2), 2 phi - phi^2 (quasi-brittle).
    pub fn dissipation(&self, phi: f64) -> Result<(f64, f64, f64)> {
        check_unit_range(phi)?;
        Ok(match self.kind {
            ModelKind::At1 => (phi, 1.0, 0.0),
            ModelKind::At2 => (phi * phi, 2.0 * phi, 2.0),
            ModelKind::QuasiBrittle(_) => (2.0 * phi - phi * phi, 2.0 - 2.0 * phi, -2.0),
        })
    }
}

fn check_unit_range(phi: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&phi) {
        return Err(Error::PhaseFieldOutOfRange(phi));
    }
    Ok(())
}

/// Symmetric strain in Voigt form with precomputed trace and deviator.
///
/// Shear entries are engineering strains (gamma = 2 eps_xy); the deviator
/// keeps that convention, so its shear entries equal the input's.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StrainState {
    pub voigt: [f64; 6],
    pub trace: f64,
    pub dev: [f64; 6],
}

impl StrainState {
    pub fn from_voigt(voigt: [f64; 6]) -> Self {
        let trace = voigt[0] + voigt[1] + voigt[2];
        let m = trace / 3.0;
        let dev = [voigt[0] - m, voigt[1] - m, voigt[2] - m, voigt[3], voigt[4], voigt[5]];
        Self { voigt, trace, dev }
    }

    /// Plane-strain embedding: eps_zz = gamma_yz = gamma_xz = 0.
    pub fn from_plane(eps_xx: f64, eps_yy: f64, gamma_xy: f64) -> Self {
        Self::from_voigt([eps_xx, eps_yy, 0.0, gamma_xy, 0.0, 0.0])
    }

    /// Tensor contraction dev : dev, converting engineering shears.
    pub fn dev_contraction(&self) -> f64 {
        let d = &self.dev;
        d[0] * d[0] + d[1] * d[1] + d[2] * d[2] + 0.5 * (d[3] * d[3] + d[4] * d[4] + d[5] * d[5])
    }
}

/// Amor-split energy densities and their conjugate stresses.
#[derive(Debug, Clone, Copy)]
pub struct SplitEnergies {
    /// Fracture-driving energy density [MPa].
    pub psi_plus: f64,
    /// Residual energy density [MPa].
    pub psi_minus: f64,
    /// Voigt stress conjugate to psi_plus [MPa].
    pub sigma_plus: [f64; 6],
    /// Voigt stress conjugate to psi_minus [MPa].
    pub sigma_minus: [f64; 6],
}

/// Heaviside convention at zero trace: the tensile branch owns tr = 0, so
/// exactly one volumetric branch is active everywhere.
#[inline]
pub fn trace_is_tensile(trace: f64) -> bool {
    trace >= 0.0
}

/// Volumetric/deviatoric split: the deviatoric energy plus the positive
/// volumetric part drive fracture, the negative volumetric part is residual.
pub fn amor_split(eps: &StrainState, elas: &ElasticParams) -> SplitEnergies {
    let (k, mu) = (elas.bulk, elas.shear);
    let tr = eps.trace;
    let tensile = trace_is_tensile(tr);
    let (tr_pos, tr_neg) = if tensile { (tr, 0.0) } else { (0.0, tr) };

    let psi_plus = 0.5 * k * tr_pos * tr_pos + mu * eps.dev_contraction();
    let psi_minus = 0.5 * k * tr_neg * tr_neg;

    let mut sigma_plus = [0.0; 6];
    let mut sigma_minus = [0.0; 6];
    for i in 0..6 {
        // 2 mu eps_dev as stress Voigt: shear rows carry mu * gamma.
        let dev_stress = if i < 3 { 2.0 * mu * eps.dev[i] } else { mu * eps.dev[i] };
        sigma_plus[i] = k * tr_pos * VOIGT_ID[i] + dev_stress;
        sigma_minus[i] = k * tr_neg * VOIGT_ID[i];
    }
    SplitEnergies { psi_plus, psi_minus, sigma_plus, sigma_minus }
}

/// Volumetric projector: all-ones 3x3 normal block, zeros elsewhere.
pub fn p_vol() -> Matrix6 {
    let mut m = Matrix6::zeros();
    for i in 0..3 {
        for j in 0..3 {
            m[(i, j)] = 1.0;
        }
    }
    m
}

/// Symmetric deviatoric projector: 2/3 on the normal diagonal, -1/3 off it,
/// identity on the shear block. Idempotent and annihilates the Voigt
/// identity. When it enters the constitutive tangent, the shear block picks
/// up the engineering-shear weight 1/2 (see [`elastic_tangent`]).
pub fn p_dev() -> Matrix6 {
    let mut m = Matrix6::zeros();
    for i in 0..3 {
        for j in 0..3 {
            m[(i, j)] = if i == j { 2.0 / 3.0 } else { -1.0 / 3.0 };
        }
        m[(i + 3, i + 3)] = 1.0;
    }
    m
}

/// Engineering-shear weighting: converts gamma entries of a strain vector
/// to tensor shear components.
fn shear_half() -> Matrix6 {
    let mut m = Matrix6::identity();
    for i in 3..6 {
        m[(i, i)] = 0.5;
    }
    m
}

/// Constitutive tangent D = g(phi_hat) (K H(tr>=0) P_vol + 2 mu P_dev)
/// + K H(tr<0) P_vol, branch-fixed at the strain's current trace sign.
///
/// Operates on engineering-shear Voigt strain vectors, so the deviatoric
/// shear block carries mu (= 2 mu * 1/2) on its diagonal.
pub fn elastic_tangent(
    eps: &StrainState,
    phi_hat: f64,
    model: &FractureModel,
    elas: &ElasticParams,
) -> Result<Matrix6> {
    let (g, _, _) = model.degradation(phi_hat)?;
    let tensile = trace_is_tensile(eps.trace);
    let vol = p_vol();
    let dev = p_dev() * shear_half();
    let d = if tensile {
        (vol * (elas.bulk * g)) + dev * (2.0 * elas.shear * g)
    } else {
        (vol * elas.bulk) + dev * (2.0 * elas.shear * g)
    };
    Ok(d)
}

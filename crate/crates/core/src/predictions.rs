//! Closed-form predictions for the decoding error.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::hpcore::HPPartition;
use crate::qgates::{kron, matrix_power, operator_entanglement, Gate};
use crate::special::{alternating_beta_sum, regularized_incomplete_beta};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Formula {
    DucPlateau,
    ScrambledPlateau,
    PerturbedDecay,
    TransmissionLength,
    IntegrableDu,
    YoshidaKitaev,
}

impl Formula {
    pub fn tag(self) -> &'static str {
        match self {
            Formula::DucPlateau => "duc-plateau",
            Formula::ScrambledPlateau => "scrambled-plateau",
            Formula::PerturbedDecay => "perturbed-decay",
            Formula::TransmissionLength => "transmission-length",
            Formula::IntegrableDu => "integrable-du",
            Formula::YoshidaKitaev => "yoshida-kitaev-bound",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PredictionResult {
    pub value: f64,
    pub formula: Formula,
    pub validity: &'static str,
}

impl PredictionResult {
    fn new(value: f64, formula: Formula, validity: &'static str) -> Result<Self> {
        if value.is_nan() || value == f64::NEG_INFINITY {
            return Err(Error::Diagnostic(format!("{} evaluated to {value}", formula.tag())));
        }
        Ok(PredictionResult { value, formula, validity })
    }
}

fn check_q(q: usize) -> Result<f64> {
    if q < 2 {
        return invalid("qudit dimension must be at least 2");
    }
    Ok(q as f64)
}

/// `(1 − q^{−2L_A}) q^{−2(L_D−L_A)}`, the plateau of maximally chaotic
/// dual-unitary circuits.
pub fn duc_plateau(q: usize, l_a: usize, l_d: usize) -> Result<PredictionResult> {
    let qf = check_q(q)?;
    if l_a > l_d {
        return invalid(format!("need L_A <= L_D, got {l_a} > {l_d}"));
    }
    let value = (1.0 - qf.powi(-2 * l_a as i32)) * qf.powi(-2 * (l_d - l_a) as i32);
    PredictionResult::new(value, Formula::DucPlateau, "late times t > L, maximally chaotic dual-unitary gates")
}

/// Plateau from counting Weyl strings:
/// `Δ_∞ = q^{−2L_A}(1 + (q^{2L_A} − 1)/q^{2L_D})`, `δ = q^{2L_A}Δ_∞ − 1`.
pub fn scrambled_plateau_from_strings(q: usize, l_a: usize, l_d: usize) -> Result<PredictionResult> {
    let qf = check_q(q)?;
    let da2 = qf.powi(2 * l_a as i32);
    let dd2 = qf.powi(2 * l_d as i32);
    let otoc = (1.0 + (da2 - 1.0) / dd2) / da2;
    PredictionResult::new(da2 * otoc - 1.0, Formula::ScrambledPlateau, "fully scrambled operators")
}

/// `F_z(x, y) = x·C(y,x)·B_z(x, y−x+1)`, evaluated as the regularized
/// incomplete beta `I_z(x, y−x+1)`.
pub fn f_beta(z: f64, x: u32, y: u32) -> Result<f64> {
    if x < 1 || x > y {
        return invalid(format!("need 1 <= x <= y, got x={x} y={y}"));
    }
    regularized_incomplete_beta(z, x as f64, (y - x + 1) as f64)
}

/// The same `F_z(n, m)` from the alternating binomial sum.
pub fn f_alternating(z: f64, n: u32, m: u32) -> Result<f64> {
    if m > 30 {
        return invalid("alternating form is restricted to m <= 30");
    }
    alternating_beta_sum(z, n, m)
}

fn perturbed_args(q: usize, n: usize, l: usize, z1: f64) -> Result<(f64, u32, u32)> {
    let qf = check_q(q)?;
    if !(0.0..=1.0).contains(&z1) {
        return invalid(format!("z1 must lie in [0, 1], got {z1}"));
    }
    if n < 1 || 2 * n > l {
        return invalid(format!("need 1 <= n <= L - n, got n={n} L={l}"));
    }
    Ok((qf, n as u32, (l - n) as u32))
}

/// Leading correction `δ − δ_∞ ≈ q² F_{z₁}(n, L−n)` for weakly perturbed
/// dual-unitary circuits, with `n = (t − L + 2)/2`.
pub fn perturbed_decay(q: usize, n: usize, l: usize, z1: f64) -> Result<PredictionResult> {
    let (qf, x, y) = perturbed_args(q, n, l, z1)?;
    PredictionResult::new(qf * qf * f_beta(z1, x, y)?, Formula::PerturbedDecay, "large q, bulk perturbation, L < t < 3L")
}

/// [`perturbed_decay`] through the alternating sum.
pub fn perturbed_decay_alternating(q: usize, n: usize, l: usize, z1: f64) -> Result<PredictionResult> {
    let (qf, x, y) = perturbed_args(q, n, l, z1)?;
    PredictionResult::new(qf * qf * f_alternating(z1, x, y)?, Formula::PerturbedDecay, "large q, bulk perturbation, L < t < 3L")
}

/// `1/ℓ = −log(1 − z₁)`; infinite at `z₁ = 0`.
pub fn transmission_length_from_z1(z1: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&z1) {
        return invalid(format!("z1 must lie in [0, 1), got {z1}"));
    }
    if z1 == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(-1.0 / (-z1).ln_1p())
}

/// Light-cone transmission length from the operator entanglement:
/// `1/ℓ = −log(q²E/(q²−1))`. Dual-unitary gates give `f64::INFINITY`.
pub fn transmission_length(g: &Gate) -> Result<PredictionResult> {
    let c = g.characterize();
    if c.op_entanglement <= 1e-14 {
        return Err(Error::Diagnostic("transmission length undefined for E(U) = 0".into()));
    }
    let z1 = if c.dual_defect <= 1e-10 { 0.0 } else { c.z1().max(0.0) };
    PredictionResult::new(transmission_length_from_z1(z1)?, Formula::TransmissionLength, "light-cone transport")
}

/// `‖V₁₂V₂₃ − V₂₃V₁₂‖_max` on three sites for `V = U·SWAP`.
pub fn scattering_commutation_defect(g: &Gate) -> f64 {
    let q = g.q();
    let v = g.compose(&Gate::swap(q)).expect("same dimension").into_matrix();
    let id = ndarray::Array2::eye(q);
    let v12 = kron(v.view(), id.view());
    let v23 = kron(id.view(), v.view());
    (v12.dot(&v23) - v23.dot(&v12)).iter().map(|x| x.norm()).fold(0.0, f64::max)
}

/// Revivals happen when `t mod 2L ∈ {L−1, L}`.
pub fn is_revival_time(t: usize, l: usize) -> bool {
    let r = t % (2 * l);
    r == l - 1 || r == l
}

/// Piecewise-constant δ(t) of interacting integrable dual-unitary circuits:
/// zero at revivals, `q²(E_max − E(V^{2k}))` with `k = ⌊(t/L + 1)/2⌋`
/// in between.
pub fn integrable_du_delta(g: &Gate, t: usize, l: usize) -> Result<PredictionResult> {
    let tol = 1e-10;
    let dd = g.dual_unitarity_defect();
    if dd > tol {
        return Err(Error::Precondition { what: "gate is not dual-unitary".into(), defect: dd });
    }
    let cd = scattering_commutation_defect(g);
    if cd > tol {
        return Err(Error::Precondition { what: "scattering operators on adjacent bonds do not commute".into(), defect: cd });
    }
    if l < 2 {
        return invalid("need L >= 2");
    }
    let validity = "interacting integrable dual-unitary circuits, open boundaries";
    if is_revival_time(t, l) {
        return PredictionResult::new(0.0, Formula::IntegrableDu, validity);
    }
    let q = g.q();
    let k = (t + l) / (2 * l);
    let v = g.compose(&Gate::swap(q))?.into_matrix();
    let e = operator_entanglement(matrix_power(v.view(), 2 * k as u32).view(), q)?.op_entanglement;
    let q2 = (q * q) as f64;
    PredictionResult::new(q2 * (1.0 - 1.0 / q2 - e), Formula::IntegrableDu, validity)
}

/// `d_A²/d_D²`.
pub fn yoshida_kitaev_bound(p: &HPPartition) -> PredictionResult {
    let v = (p.d_a() as f64 / p.d_d() as f64).powi(2);
    PredictionResult { value: v, formula: Formula::YoshidaKitaev, validity: "any scrambling unitary" }
}

//! Two-site gates: XXZ Trotter gates, Haar sampling, space-time duals and
//! operator entanglement.
//!
//! A gate on qudits of dimension `q` is a `q²×q²` matrix whose row and column
//! indices are pairs `(s1, s2) ↦ s1·q + s2`. Entry `m[(c,d),(a,b)]` is the
//! amplitude for inputs `(a,b)` to become outputs `(c,d)`.

use ndarray::{Array2, ArrayView2};
use num_complex::Complex64 as C64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Unitarity tolerance used when validating gates.
pub const UNITARY_TOL: f64 = 1e-10;

const I: C64 = C64 { re: 0.0, im: 1.0 };

/// Elementary two-site unitary.
#[derive(Clone, Debug, PartialEq)]
pub struct Gate {
    q: usize,
    m: Array2<C64>,
}

impl Gate {
    /// Wraps a `q²×q²` matrix, rejecting non-unitary input.
    pub fn new(q: usize, m: Array2<C64>) -> Result<Self> {
        if q < 2 {
            return invalid(format!("qudit dimension must be at least 2, got {q}"));
        }
        if m.dim() != (q * q, q * q) {
            return invalid(format!("gate must be {0}x{0}, got {1:?}", q * q, m.dim()));
        }
        let defect = unitarity_defect(m.view());
        if defect > UNITARY_TOL {
            return invalid(format!("gate is not unitary (defect {defect:.3e})"));
        }
        Ok(Gate { q, m })
    }

    pub fn identity(q: usize) -> Self {
        Gate { q, m: Array2::eye(q * q) }
    }

    pub fn swap(q: usize) -> Self {
        let mut m = Array2::zeros((q * q, q * q));
        for a in 0..q {
            for b in 0..q {
                m[[b * q + a, a * q + b]] = C64::new(1.0, 0.0);
            }
        }
        Gate { q, m }
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn matrix(&self) -> &Array2<C64> {
        &self.m
    }

    pub fn into_matrix(self) -> Array2<C64> {
        self.m
    }

    pub fn dagger(&self) -> Gate {
        Gate { q: self.q, m: adjoint(self.m.view()) }
    }

    /// `self · other`, i.e. `other` acts first.
    pub fn compose(&self, other: &Gate) -> Result<Gate> {
        if self.q != other.q {
            return invalid("cannot compose gates of different qudit dimension");
        }
        Ok(Gate { q: self.q, m: self.m.dot(&other.m) })
    }

    /// `(u1⊗u2) · self · (v1⊗v2)`.
    pub fn dressed(&self, d: &Dressing) -> Result<Gate> {
        d.validate(self.q)?;
        let post = kron(d.u_plus.view(), d.u_minus.view());
        let pre = kron(d.v_plus.view(), d.v_minus.view());
        Ok(Gate { q: self.q, m: post.dot(&self.m).dot(&pre) })
    }

    pub fn unitarity_defect(&self) -> f64 {
        unitarity_defect(self.m.view())
    }

    pub fn dual_unitarity_defect(&self) -> f64 {
        dual_unitarity_defect(self)
    }

    pub fn characterize(&self) -> GateCharacterization {
        operator_entanglement(self.m.view(), self.q).expect("unitary gates are nonzero")
    }
}

/// Single-site unitaries around a two-site gate: `(u₊⊗u₋) g (v₊⊗v₋)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Dressing {
    pub u_plus: Array2<C64>,
    pub u_minus: Array2<C64>,
    pub v_plus: Array2<C64>,
    pub v_minus: Array2<C64>,
}

impl Dressing {
    /// Four independent Haar single-site unitaries.
    pub fn random(q: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Dressing {
            u_plus: haar_unitary(q, &mut rng),
            u_minus: haar_unitary(q, &mut rng),
            v_plus: haar_unitary(q, &mut rng),
            v_minus: haar_unitary(q, &mut rng),
        }
    }

    fn validate(&self, q: usize) -> Result<()> {
        for (name, u) in [
            ("u_plus", &self.u_plus),
            ("u_minus", &self.u_minus),
            ("v_plus", &self.v_plus),
            ("v_minus", &self.v_minus),
        ] {
            if u.dim() != (q, q) {
                return invalid(format!("dressing {name} must be {q}x{q}"));
            }
            let defect = unitarity_defect(u.view());
            if defect > UNITARY_TOL {
                return invalid(format!("dressing {name} is not unitary (defect {defect:.3e})"));
            }
        }
        Ok(())
    }
}

/// `exp(−i(J_xy(XX+YY) + J_z ZZ))` on two qubits, optionally dressed.
pub fn xxz_gate(j_xy: f64, j_z: f64, dressing: Option<&Dressing>) -> Result<Gate> {
    if !j_xy.is_finite() || !j_z.is_finite() {
        return invalid("couplings must be finite");
    }
    let mut m = Array2::<C64>::zeros((4, 4));
    let diag = (-I * j_z).exp();
    let phase = (I * j_z).exp();
    let (s, c) = (2.0 * j_xy).sin_cos();
    m[[0, 0]] = diag;
    m[[3, 3]] = diag;
    m[[1, 1]] = phase * c;
    m[[2, 2]] = phase * c;
    m[[1, 2]] = -I * phase * s;
    m[[2, 1]] = -I * phase * s;
    let g = Gate { q: 2, m };
    match dressing {
        Some(d) => g.dressed(d),
        None => Ok(g),
    }
}

/// Haar-random `n×n` unitary: Gram-Schmidt on a complex Gaussian matrix,
/// which leaves the triangular factor with a positive diagonal.
pub fn haar_unitary<R: rand::Rng + ?Sized>(n: usize, rng: &mut R) -> Array2<C64> {
    let scale = std::f64::consts::FRAC_1_SQRT_2;
    let mut cols: Vec<Vec<C64>> = (0..n)
        .map(|_| {
            (0..n)
                .map(|_| {
                    let re: f64 = StandardNormal.sample(rng);
                    let im: f64 = StandardNormal.sample(rng);
                    C64::new(re * scale, im * scale)
                })
                .collect()
        })
        .collect();
    for k in 0..n {
        for j in 0..k {
            let (done, rest) = cols.split_at_mut(k);
            let proj: C64 = done[j].iter().zip(&rest[0]).map(|(a, b)| a.conj() * b).sum();
            for (x, e) in rest[0].iter_mut().zip(&done[j]) {
                *x -= proj * e;
            }
        }
        let norm = cols[k].iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
        for x in cols[k].iter_mut() {
            *x /= norm;
        }
    }
    Array2::from_shape_fn((n, n), |(i, j)| cols[j][i])
}

/// Haar-random two-site gate, deterministic in `seed`.
pub fn haar_gate(q: usize, seed: u64) -> Gate {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    haar_gate_from(q, &mut rng)
}

pub fn haar_gate_from<R: rand::Rng + ?Sized>(q: usize, rng: &mut R) -> Gate {
    Gate { q, m: haar_unitary(q * q, rng) }
}

/// Index reshuffle `D[(c,a),(d,b)] = U[(c,d),(a,b)]`, trading time for space.
pub fn spacetime_dual(g: &Gate) -> Array2<C64> {
    reshuffle(g.m.view(), g.q)
}

fn reshuffle(m: ArrayView2<C64>, q: usize) -> Array2<C64> {
    let mut d = Array2::zeros((q * q, q * q));
    for c in 0..q {
        for dd in 0..q {
            for a in 0..q {
                for b in 0..q {
                    d[[c * q + a, dd * q + b]] = m[[c * q + dd, a * q + b]];
                }
            }
        }
    }
    d
}

/// `‖D†D − 1‖_max` of the space-time dual; zero iff the gate is dual-unitary.
pub fn dual_unitarity_defect(g: &Gate) -> f64 {
    unitarity_defect(spacetime_dual(g).view())
}

/// Gate-level summary of the operator-space entanglement.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GateCharacterization {
    pub dual_defect: f64,
    /// Linear operator entanglement `E = 1 − p` in `[0, 1 − 1/q²]`.
    pub op_entanglement: f64,
    /// `q²·p`, between 1 and `q²`.
    pub b1: f64,
    pub q: usize,
}

impl GateCharacterization {
    pub fn e_max(&self) -> f64 {
        1.0 - 1.0 / (self.q * self.q) as f64
    }

    /// `z₁ = 1 − q²E/(q²−1)`.
    pub fn z1(&self) -> f64 {
        let q2 = (self.q * self.q) as f64;
        1.0 - q2 * self.op_entanglement / (q2 - 1.0)
    }
}

/// Operator entanglement of a `q²×q²` operator across its two sites.
pub fn operator_entanglement(op: ArrayView2<C64>, q: usize) -> Result<GateCharacterization> {
    if op.dim() != (q * q, q * q) {
        return invalid(format!("operator must be {0}x{0}", q * q));
    }
    let norm2: f64 = op.iter().map(|x| x.norm_sqr()).sum();
    if norm2 == 0.0 || !norm2.is_finite() {
        return invalid("operator entanglement of a zero or non-finite matrix");
    }
    let r = reshuffle(op, q).mapv(|x| x / norm2.sqrt());
    let rho = r.dot(&adjoint(r.view()));
    let p: f64 = rho.iter().map(|x| x.norm_sqr()).sum();
    let q2 = (q * q) as f64;
    let b1 = q2 * p;
    Ok(GateCharacterization {
        dual_defect: unitarity_defect(reshuffle(op, q).view()),
        op_entanglement: (q2 - b1) / q2,
        b1,
        q,
    })
}

pub fn adjoint(m: ArrayView2<C64>) -> Array2<C64> {
    m.t().mapv(|x| x.conj())
}

pub fn kron(a: ArrayView2<C64>, b: ArrayView2<C64>) -> Array2<C64> {
    let (ar, ac) = a.dim();
    let (br, bc) = b.dim();
    Array2::from_shape_fn((ar * br, ac * bc), |(i, j)| a[[i / br, j / bc]] * b[[i % br, j % bc]])
}

/// `‖m†m − 1‖_max`.
pub fn unitarity_defect(m: ArrayView2<C64>) -> f64 {
    let g = adjoint(m).dot(&m);
    g.indexed_iter()
        .map(|((i, j), x)| {
            let target = if i == j { 1.0 } else { 0.0 };
            (x - C64::new(target, 0.0)).norm()
        })
        .fold(0.0, f64::max)
}

/// Matrix power by repeated squaring.
pub fn matrix_power(m: ArrayView2<C64>, mut k: u32) -> Array2<C64> {
    let n = m.nrows();
    let mut result = Array2::<C64>::eye(n);
    let mut base = m.to_owned();
    while k > 0 {
        if k & 1 == 1 {
            result = result.dot(&base);
        }
        base = base.dot(&base);
        k >>= 1;
    }
    result
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_4;

    #[test]
    fn zero_couplings_give_identity() {
        let g = xxz_gate(0.0, 0.0, None).unwrap();
        assert_eq!(g, Gate::identity(2));
    }

    #[test]
    fn xxz_matches_dense_exponential() {
        // Build exp(-iH) via eigen-decomposition of the Hermitian generator.
        use ndarray_linalg::{Eigh, UPLO};
        let x = ndarray::array![[0.0, 1.0], [1.0, 0.0]].mapv(|v: f64| C64::new(v, 0.0));
        let y = ndarray::array![[C64::new(0.0, 0.0), C64::new(0.0, -1.0)], [C64::new(0.0, 1.0), C64::new(0.0, 0.0)]];
        let z = ndarray::array![[1.0, 0.0], [0.0, -1.0]].mapv(|v: f64| C64::new(v, 0.0));
        let (jxy, jz) = (0.37, -0.81);
        let h = (kron(x.view(), x.view()) + kron(y.view(), y.view())).mapv(|v| v * jxy)
            + kron(z.view(), z.view()).mapv(|v| v * jz);
        let (w, v) = h.eigh(UPLO::Upper).unwrap();
        let phases = Array2::from_diag(&w.mapv(|e| (-I * e).exp()));
        let expected = v.dot(&phases).dot(&adjoint(v.view()));
        let g = xxz_gate(jxy, jz, None).unwrap();
        let err = (&expected - g.matrix()).iter().map(|e| e.norm()).fold(0.0, f64::max);
        assert!(err < 1e-12, "{err}");
    }

    #[test]
    fn dual_unitary_line() {
        let g = xxz_gate(FRAC_PI_4, FRAC_PI_4 * 2f64.sqrt() / 2.0, None).unwrap();
        assert!(g.dual_unitarity_defect() < 1e-12);
        let g = xxz_gate(std::f64::consts::PI / 5.0, 0.3, None).unwrap();
        assert!(g.dual_unitarity_defect() > 1e-3);
    }

    #[test]
    fn swap_is_self_dual() {
        let s = Gate::swap(3);
        assert_eq!(&spacetime_dual(&s), s.matrix());
        assert_eq!(s.dual_unitarity_defect(), 0.0);
    }

    #[test]
    fn identity_dual_is_rank_one() {
        let d = spacetime_dual(&Gate::identity(2));
        let cols: Vec<_> = (0..4).map(|j| d.column(j).to_owned()).filter(|c| c.iter().any(|x| x.norm() > 0.0)).collect();
        assert_eq!(cols.len(), 2);
        assert_eq!(cols[0], cols[1]);
        assert!(Gate::identity(2).dual_unitarity_defect() > 0.5);
    }

    #[test]
    fn haar_gate_properties() {
        let g = haar_gate(3, 11);
        assert!(g.unitarity_defect() < 1e-12);
        assert_ne!(haar_gate(2, 1), haar_gate(2, 2));
        assert_eq!(haar_gate(2, 5), haar_gate(2, 5));
        assert!(g.dual_unitarity_defect() > 1e-6);
    }

    #[test]
    fn haar_first_moment() {
        // E|tr U|² = 1 for Haar U(n).
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let samples: Vec<f64> = (0..10_000)
            .map(|_| haar_unitary(4, &mut rng).diag().sum().norm_sqr())
            .collect();
        let n = samples.len() as f64;
        let mean = samples.iter().sum::<f64>() / n;
        let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
        let se = (var / n).sqrt();
        assert!((mean - 1.0).abs() < 3.0 * se, "mean {mean} se {se}");
    }

    #[test]
    fn entanglement_extremes() {
        let id = Gate::identity(2).characterize();
        assert!(id.op_entanglement.abs() < 1e-14);
        assert!((id.b1 - 4.0).abs() < 1e-12);
        let du = xxz_gate(FRAC_PI_4, 0.2, Some(&Dressing::random(2, 3))).unwrap().characterize();
        assert!((du.op_entanglement - 0.75).abs() < 1e-12);
        assert!((du.b1 - 1.0).abs() < 1e-12);
        assert!(du.z1().abs() < 1e-12);
    }

    #[test]
    fn zz_rotation_entanglement() {
        // exp(-iφZZ) has E = sin²(2φ)/2
        for phi in [0.1, 0.3, 0.7] {
            let e = xxz_gate(0.0, phi, None).unwrap().characterize().op_entanglement;
            assert!((e - (2.0 * phi).sin().powi(2) / 2.0).abs() < 1e-12);
        }
    }

    #[test]
    fn non_unitary_dressing_rejected() {
        let mut d = Dressing::random(2, 1);
        d.v_minus[[0, 0]] *= 2.0;
        assert!(xxz_gate(0.3, 0.1, Some(&d)).is_err());
    }

    #[test]
    fn zero_operator_rejected() {
        assert!(operator_entanglement(Array2::zeros((4, 4)).view(), 2).is_err());
    }

    #[test]
    fn heisenberg_point_scattering_squares_to_phase() {
        // V = U·SWAP at J = ±1 satisfies E(V²) = 0
        for jz in [FRAC_PI_4, -FRAC_PI_4] {
            let u = xxz_gate(FRAC_PI_4, jz, None).unwrap();
            let v = u.compose(&Gate::swap(2)).unwrap();
            let v2 = v.compose(&v).unwrap();
            assert!(v2.characterize().op_entanglement.abs() < 1e-12);
        }
    }
}

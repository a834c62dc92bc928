//! Haar-averaged decoding error from the domain-wall transfer matrix.
//!
//! After averaging two replicas of a Haar brickwork circuit every gate
//! carries a spin `↑`/`↓`; two layers of the resulting model, restricted to
//! domain-wall states `|m⟩ = |↑…↑↓…↓⟩` (`m` up spins, `N = L/2` gates per
//! row), act as
//!
//! ```text
//! T|m⟩ = z|m−1⟩ + 2z|m⟩ + z|m+1⟩   (0 < m < N),    T|0⟩ = |0⟩,   T|N⟩ = |N⟩
//! ```
//!
//! with `z = (q/(q²+1))²`. For odd `t`,
//! `E[δ(t)] = q^{L+L_A−L_D}⟨L|T^{(t−1)/2}|R⟩ − 1`, where `|R⟩` sits at the
//! output cut and `⟨L|m⟩ = q^{−|2m−L_A|}`.
//!
//! The boundary weights span `q^{±L}`, so the iteration runs in the gauge
//! `ṽ_m = q^{L+L_A−L_D}⟨L|m⟩ v_m`, in which `T` is column-stochastic away
//! from the input cut and `δ + 1 = Σ_m ṽ_m`.

use ndarray::Array2;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::brickwork::{Boundary, CircuitSpec, Parity};
use crate::error::{invalid, Error, Result};
use crate::hpcore::{decoding_series_gram, DecodingSeries, HPPartition, Method};

/// `z = (q/(q²+1))²`.
pub fn dw_weight(q: usize) -> f64 {
    let q = q as f64;
    (q / (q * q + 1.0)).powi(2)
}

#[derive(Clone, Debug, PartialEq)]
pub struct DwTransfer {
    pub n: usize,
    pub q: usize,
    pub z: f64,
}

impl DwTransfer {
    pub fn new(l: usize, q: usize) -> Result<Self> {
        if l % 2 != 0 || l < 4 {
            return invalid(format!("domain-wall transfer needs even L >= 4, got {l}"));
        }
        if q < 2 {
            return invalid("qudit dimension must be at least 2");
        }
        Ok(DwTransfer { n: l / 2, q, z: dw_weight(q) })
    }

    /// Dense `(N+1)×(N+1)` matrix, `T[n,m] = ⟨n|T|m⟩`.
    pub fn matrix(&self) -> Array2<f64> {
        let n = self.n;
        let mut t = Array2::zeros((n + 1, n + 1));
        t[[0, 0]] = 1.0;
        t[[n, n]] = 1.0;
        for m in 1..n {
            t[[m - 1, m]] = self.z;
            t[[m, m]] = 2.0 * self.z;
            t[[m + 1, m]] = self.z;
        }
        t
    }

    pub fn apply(&self, v: &DwState) -> DwState {
        let n = self.n;
        let a = &v.amps;
        let mut out = vec![0.0; n + 1];
        out[0] = a[0];
        out[n] = a[n];
        for m in 1..n {
            out[m - 1] += self.z * a[m];
            out[m] += 2.0 * self.z * a[m];
            out[m + 1] += self.z * a[m];
        }
        DwState { amps: out }
    }

    /// `λ_n = 2z(1 + cos(πn/N))` for `n = 1..N−1`.
    pub fn bulk_eigenvalue(&self, n: usize) -> f64 {
        2.0 * self.z * (1.0 + (std::f64::consts::PI * n as f64 / self.n as f64).cos())
    }
}

/// Real amplitudes over the domain-wall basis `|0⟩..|N⟩`.
#[derive(Clone, Debug, PartialEq)]
pub struct DwState {
    pub amps: Vec<f64>,
}

impl DwState {
    pub fn basis(n: usize, m: usize) -> Self {
        let mut amps = vec![0.0; n + 1];
        amps[m] = 1.0;
        DwState { amps }
    }

    /// `|R⟩`: the wall at the output cut, `L_C/2`; for odd `L_C` split over
    /// the two neighbouring positions with weight `q/(q²+1)` each.
    pub fn top_boundary(l: usize, l_d: usize, q: usize) -> Self {
        let n = l / 2;
        let l_c = l - l_d;
        let mut amps = vec![0.0; n + 1];
        if l_c % 2 == 0 {
            amps[l_c / 2] = 1.0;
        } else {
            let p = q as f64 / ((q * q) as f64 + 1.0);
            amps[(l_c - 1) / 2] = p;
            amps[(l_c + 1) / 2] = p;
        }
        DwState { amps }
    }

    /// `⟨L|m⟩ = q^{−|2m−L_A|}` (normalized by `q^{−2L}`).
    pub fn left_boundary(l: usize, l_a: usize, q: usize) -> Self {
        let amps = (0..=l / 2).map(|m| (q as f64).powi(-(2 * m as i32 - l_a as i32).abs())).collect();
        DwState { amps }
    }

    pub fn dot(&self, other: &DwState) -> f64 {
        self.amps.iter().zip(&other.amps).map(|(a, b)| a * b).sum()
    }
}

/// Biorthogonal eigen-system of [`DwTransfer`]. Column/row `0` and `1` are
/// the stationary pair (`|0⟩`, `|N⟩`), then the standing waves `n = 1..N−1`.
#[derive(Clone, Debug)]
pub struct DwEigensystem {
    pub eigenvalues: Vec<f64>,
    /// Right eigenvectors as columns.
    pub right: Array2<f64>,
    /// Left eigenvectors as rows.
    pub left: Array2<f64>,
}

impl DwEigensystem {
    /// `max |⟨ℓ_i|r_j⟩ − δ_ij|`.
    pub fn biorthogonality_defect(&self) -> f64 {
        let g = self.left.dot(&self.right);
        g.indexed_iter()
            .map(|((i, j), x)| (x - if i == j { 1.0 } else { 0.0 }).abs())
            .fold(0.0, f64::max)
    }
}

/// Stationary left vector `a_j = (q^{2(N−j)} − q^{−2(N−j)})/(q^{2N} − q^{−2N})`,
/// written so that it neither overflows nor cancels.
pub fn leading_left(n: usize, q: usize, j: usize) -> f64 {
    let q = q as f64;
    let k = (n - j) as i32;
    q.powi(-2 * j as i32) * (1.0 - q.powi(-4 * k)) / (1.0 - q.powi(-4 * n as i32))
}

pub fn dw_eigensystem(t: &DwTransfer) -> DwEigensystem {
    let n = t.n;
    let dim = n + 1;
    let mut right = Array2::zeros((dim, dim));
    let mut left = Array2::zeros((dim, dim));
    let mut eigenvalues = vec![1.0, 1.0];
    right[[0, 0]] = 1.0;
    right[[n, 1]] = 1.0;
    for j in 0..=n {
        left[[0, j]] = leading_left(n, t.q, j);
        left[[1, j]] = leading_left(n, t.q, n - j);
    }
    let amp = (2.0 / n as f64).sqrt();
    for mode in 1..n {
        let lam = t.bulk_eigenvalue(mode);
        let k = std::f64::consts::PI * mode as f64 / n as f64;
        let col = mode + 1;
        for j in 1..n {
            let s = amp * (k * j as f64).sin();
            right[[j, col]] = s;
            left[[col, j]] = s;
        }
        right[[0, col]] = t.z * right[[1, col]] / (lam - 1.0);
        right[[n, col]] = t.z * right[[n - 1, col]] / (lam - 1.0);
        eigenvalues.push(lam);
    }
    DwEigensystem { eigenvalues, right, left }
}

fn check_sizes(l: usize, l_a: usize, l_d: usize, q: usize) -> Result<()> {
    DwTransfer::new(l, q)?;
    if l_a < 1 || l_d < 1 || l_a + l_d > l {
        return invalid(format!("need L_A, L_D >= 1 and L_A + L_D <= L, got L={l} L_A={l_a} L_D={l_d}"));
    }
    Ok(())
}

/// Gauge-transformed iteration of the averaged decoding error.
#[derive(Clone, Debug)]
pub struct MembraneEvolution {
    q: usize,
    v: Vec<f64>,
    down: Vec<f64>,
    up: Vec<f64>,
    stay: Vec<f64>,
    t: usize,
}

impl MembraneEvolution {
    pub fn new(l: usize, l_a: usize, l_d: usize, q: usize) -> Result<Self> {
        check_sizes(l, l_a, l_d, q)?;
        let tm = DwTransfer::new(l, q)?;
        let n = tm.n;
        let qf = q as f64;
        let expo = |m: usize| -> i32 { -(2 * m as i32 - l_a as i32).abs() };
        let pre = (l + l_a) as i32 - l_d as i32;
        let top = DwState::top_boundary(l, l_d, q);
        let v = top
            .amps
            .iter()
            .enumerate()
            .map(|(m, &r)| if r == 0.0 { 0.0 } else { r * qf.powi(pre + expo(m)) })
            .collect();
        let mut down = vec![0.0; n + 1];
        let mut up = vec![0.0; n + 1];
        let mut stay = vec![1.0; n + 1];
        for m in 1..n {
            down[m] = tm.z * qf.powi(expo(m - 1) - expo(m));
            up[m] = tm.z * qf.powi(expo(m + 1) - expo(m));
            stay[m] = 2.0 * tm.z;
        }
        Ok(MembraneEvolution { q, v, down, up, stay, t: 1 })
    }

    /// Current odd time.
    pub fn time(&self) -> usize {
        self.t
    }

    pub fn delta(&self) -> f64 {
        self.v.iter().sum::<f64>() - 1.0
    }

    /// Advances by two layers.
    pub fn step(&mut self) {
        let n = self.v.len() - 1;
        let mut w: Vec<f64> = self.v.iter().zip(&self.stay).map(|(a, s)| a * s).collect();
        for m in 1..n {
            w[m - 1] += self.down[m] * self.v[m];
            w[m + 1] += self.up[m] * self.v[m];
        }
        self.v = w;
        self.t += 2;
    }

    pub fn q(&self) -> usize {
        self.q
    }
}

/// `E[δ(t)]` for odd `t`.
pub fn membrane_delta(l: usize, l_a: usize, l_d: usize, q: usize, t: usize) -> Result<f64> {
    if t % 2 == 0 {
        return invalid(format!("the domain-wall mapping is defined for odd t, got {t}"));
    }
    let mut ev = MembraneEvolution::new(l, l_a, l_d, q)?;
    while ev.time() < t {
        ev.step();
    }
    Ok(ev.delta())
}

/// `E[δ(t)]` at every odd `t ≤ t_max`.
pub fn membrane_series(l: usize, l_a: usize, l_d: usize, q: usize, t_max: usize) -> Result<DecodingSeries> {
    let mut ev = MembraneEvolution::new(l, l_a, l_d, q)?;
    let mut points = Vec::with_capacity(t_max / 2 + 1);
    while ev.time() <= t_max {
        points.push((ev.time(), ev.delta()));
        ev.step();
    }
    Ok(DecodingSeries {
        method: Method::Membrane,
        spec: format!("membrane L={l} q={q}"),
        partition: HPPartition { q, l, l_a, l_d },
        parity: Parity::EvenBondsFirst,
        seed: None,
        points,
    })
}

/// Finite-`L` saturation value of the averaged decoding error.
pub fn saturation_delta(l: usize, l_a: usize, l_d: usize, q: usize) -> f64 {
    let q = q as f64;
    let p = |e: i32| q.powi(e);
    let (l, l_a, l_d) = (l as i32, l_a as i32, l_d as i32);
    (1.0 - p(-2 * l_d) + p(2 * l_a - 2 * l_d) - p(2 * l_a - 2 * l)) / (1.0 - p(-2 * l)) - 1.0
}

/// `E[δ(t)]` from the eigen-decomposition of `T`, summed in the log domain.
/// Accurate once the subleading terms are small compared with the
/// stationary part; at early times their cancellation loses precision.
pub fn membrane_delta_spectral(l: usize, l_a: usize, l_d: usize, q: usize, t: usize) -> Result<f64> {
    let (stationary, sub) = spectral_parts(l, l_a, l_d, q, t)?;
    Ok(stationary - 1.0 + sub)
}

/// `E[δ(t)] − δ_∞` as the sum over the decaying modes alone, so it stays
/// accurate when it is far below the rounding error of `δ_∞`.
pub fn membrane_relaxation(l: usize, l_a: usize, l_d: usize, q: usize, t: usize) -> Result<f64> {
    Ok(spectral_parts(l, l_a, l_d, q, t)?.1)
}

/// Stationary and decaying contributions to `q^{L+L_A−L_D}⟨L|T^τ|R⟩`.
fn spectral_parts(l: usize, l_a: usize, l_d: usize, q: usize, t: usize) -> Result<(f64, f64)> {
    if t % 2 == 0 {
        return invalid(format!("the domain-wall mapping is defined for odd t, got {t}"));
    }
    check_sizes(l, l_a, l_d, q)?;
    let tm = DwTransfer::new(l, q)?;
    let es = dw_eigensystem(&tm);
    let n = tm.n;
    let lnq = (q as f64).ln();
    let pre = (l + l_a) as f64 - l_d as f64;
    let top = DwState::top_boundary(l, l_d, q);
    let tau = ((t - 1) / 2) as f64;

    let mut stationary = 0.0;
    for (j, &r) in top.amps.iter().enumerate() {
        if r == 0.0 {
            continue;
        }
        // ⟨L|0⟩ = q^{−L_A}, ⟨L|N⟩ = q^{L_A−L}
        let e1 = (pre - l_a as f64 - 2.0 * j as f64) * lnq;
        let e2 = (pre + l_a as f64 - l as f64 - 2.0 * (n - j) as f64) * lnq;
        let tail = |k: usize| 1.0 - (q as f64).powi(-4 * k as i32);
        let norm = tail(n);
        stationary += r * (e1.exp() * tail(n - j) + e2.exp() * tail(j)) / norm;
    }

    let left_b = DwState::left_boundary(l, l_a, q);
    let mut terms = Vec::with_capacity(n);
    for mode in 1..n {
        let col = mode + 1;
        let lr: f64 = (0..=n).map(|j| left_b.amps[j] * es.right[[j, col]]).sum();
        let lrr: f64 = (0..=n).map(|j| es.left[[col, j]] * top.amps[j]).sum();
        let prod = lr * lrr;
        if prod == 0.0 {
            continue;
        }
        let lam = es.eigenvalues[col];
        let log = pre * lnq + prod.abs().ln() + tau * lam.ln();
        terms.push((prod.signum(), log));
    }
    let max = terms.iter().map(|t| t.1).fold(f64::NEG_INFINITY, f64::max);
    let sub = if terms.is_empty() { 0.0 } else { terms.iter().map(|(s, lg)| s * (lg - max).exp()).sum::<f64>() * max.exp() };
    Ok((stationary, sub))
}

/// Sample mean and standard error.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub mean: f64,
    pub std_err: f64,
    pub samples: usize,
}

impl McEstimate {
    fn from_values(values: &[f64]) -> Self {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = if values.len() > 1 { values.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0) } else { 0.0 };
        McEstimate { mean, std_err: (var / n).sqrt(), samples: values.len() }
    }
}

/// Circuit seed of sample `index` under master seed `seed`.
pub fn sample_seed(seed: u64, index: usize) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng.next_u64()
}

/// Monte-Carlo estimate of `E[δ(t)]` over random Haar circuits (open
/// boundaries), one estimate per requested time.
pub fn haar_mc_series(
    p: &HPPartition,
    times: &[usize],
    samples: usize,
    seed: u64,
) -> Result<Vec<(usize, McEstimate)>> {
    if samples == 0 {
        return invalid("need at least one sample");
    }
    CircuitSpec::random(p.l, p.q, seed, Boundary::Open)?.check_exact_capacity()?;
    let per_sample: Vec<Vec<(usize, f64)>> = (0..samples)
        .into_par_iter()
        .map(|i| {
            let spec = CircuitSpec::random(p.l, p.q, sample_seed(seed, i), Boundary::Open)?;
            Ok(decoding_series_gram(&spec, p, times)?.points)
        })
        .collect::<Result<_>>()?;
    let ts: Vec<usize> = per_sample[0].iter().map(|x| x.0).collect();
    Ok(ts
        .iter()
        .enumerate()
        .map(|(j, &t)| {
            let vals: Vec<f64> = per_sample.iter().map(|s| s[j].1).collect();
            (t, McEstimate::from_values(&vals))
        })
        .collect())
}

pub fn haar_mc_delta(p: &HPPartition, t: usize, samples: usize, seed: u64) -> Result<McEstimate> {
    Ok(haar_mc_series(p, &[t], samples, seed)?[0].1)
}

/// Width of the crossover front: `t(s=lo) − t(s=hi)` for the normalized
/// progress `s(t) = (δ(t) − δ_∞)/(δ(3) − δ_∞)` at `L_A = L_D = 1`.
pub fn front_width(l: usize, q: usize, thresholds: (f64, f64)) -> Result<f64> {
    let (hi, lo) = thresholds;
    if !(0.0 < lo && lo < hi && hi < 1.0) {
        return invalid(format!("thresholds must satisfy 0 < lo < hi < 1, got {thresholds:?}"));
    }
    let vb = velocities(q).v_b;
    let t_max = (3.0 * l as f64 / vb) as usize + 51;
    let series = membrane_series(l, 1, 1, q, t_max)?;
    let d_inf = saturation_delta(l, 1, 1, q);
    let early = series.value_at(3).ok_or_else(|| Error::Diagnostic("series too short".into()))?;
    let s: Vec<(f64, f64)> = series.points.iter().map(|&(t, d)| (t as f64, (d - d_inf) / (early - d_inf))).collect();
    let crossing = |x: f64| -> Result<f64> {
        let i = s
            .iter()
            .position(|&(_, v)| v < x)
            .ok_or_else(|| Error::Diagnostic(format!("progress never drops below {x} by t = {t_max}")))?;
        if i == 0 {
            return Err(Error::Diagnostic(format!("threshold {x} not bracketed")));
        }
        let ((t0, s0), (t1, s1)) = (s[i - 1], s[i]);
        Ok(t0 + (x - s0) * (t1 - t0) / (s1 - s0))
    };
    Ok(crossing(lo)? - crossing(hi)?)
}

/// Entanglement and butterfly velocities and the front diffusion constant.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Velocities {
    pub v_e: f64,
    pub v_b: f64,
    pub d: f64,
}

pub fn velocities(q: usize) -> Velocities {
    let qf = q as f64;
    Velocities {
        v_e: ((qf * qf + 1.0) / (2.0 * qf)).ln() / qf.ln(),
        v_b: (qf * qf - 1.0) / (qf * qf + 1.0),
        d: dw_weight(q).sqrt() / 2.0,
    }
}

/// Saddle-point law for `δ(t) − δ_∞` at `t ≫ L`:
/// `(4√(2π)D/v_B²)·((q^{2(L_A+1)}−1)/q^{L_D})·(L/t^{3/2})·q^{L−v_E t}`.
pub fn asymptotic_relaxation(l: usize, t: usize, q: usize, l_a: usize, l_d: usize) -> f64 {
    let v = velocities(q);
    let qf = q as f64;
    let (lf, tf) = (l as f64, t as f64);
    let prefactor = 4.0 * (2.0 * std::f64::consts::PI).sqrt() * v.d / (v.v_b * v.v_b);
    let boundary = (qf.powi(2 * (l_a as i32 + 1)) - 1.0) / qf.powi(l_d as i32);
    prefactor * boundary * lf / tf.powf(1.5) * ((lf - v.v_e * tf) * qf.ln()).exp()
}

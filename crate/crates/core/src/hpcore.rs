//! Exact decoding error of the Hayden-Preskill protocol for small chains.
//!
//! Alice's subsystem `A` is made of the `L_A` leftmost input qudits, Bob's
//! output `D` of the `L_D` rightmost output qudits; `B` and `C` are the
//! complements. The decoding error is `δ = d_A d_C tr[ρ_{A'C}²] − 1`, where
//! `ρ_{A'C}` is the reduced Choi state of the evolution operator on the
//! legs `A`-in and `C`-out.
//!
//! Besides the direct Choi-state route there are two OTOC routes, both
//! exact: with `Δ = (δ+1)/d_A²`,
//!
//! * `Δ = Σ_{P_A} ‖tr_D 𝒰P_A𝒰†‖² / (d_A² d_D q^L)` (strings on `A` evolved
//!   forwards, any circuit), and
//! * `Δ = Σ_{P_D} ‖tr_A 𝒰†P_D𝒰‖² / (d_A d_D² q^L)` (strings on `D` evolved
//!   backwards, Floquet circuits).

use ndarray::Array2;
use ndarray_linalg::{EigValsh, UPLO};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::brickwork::{
    build_evolution, heisenberg_evolve, CircuitSpec, EvolutionOperator, LocalOperator, OperatorState, Parity,
};
use crate::error::{invalid, Error, Result};
use crate::qgates::Gate;
use crate::weyl::WeylString;

/// Tolerance on the physical range of δ.
pub const DELTA_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct HPPartition {
    pub q: usize,
    pub l: usize,
    pub l_a: usize,
    pub l_d: usize,
}

impl HPPartition {
    pub fn new(q: usize, l: usize, l_a: usize, l_d: usize) -> Result<Self> {
        if q < 2 {
            return invalid("qudit dimension must be at least 2");
        }
        if l_a < 1 || l_a > l_d || l_d > l || l_a + l_d > l {
            return invalid(format!("need 1 <= L_A <= L_D and L_A + L_D <= L, got L={l} L_A={l_a} L_D={l_d}"));
        }
        Ok(HPPartition { q, l, l_a, l_d })
    }

    pub fn for_spec(spec: &CircuitSpec, l_a: usize, l_d: usize) -> Result<Self> {
        Self::new(spec.q, spec.l, l_a, l_d)
    }

    pub fn l_b(&self) -> usize {
        self.l - self.l_a
    }

    pub fn l_c(&self) -> usize {
        self.l - self.l_d
    }

    fn pow(&self, k: usize) -> usize {
        self.q.pow(k as u32)
    }

    pub fn d_a(&self) -> usize {
        self.pow(self.l_a)
    }

    pub fn d_b(&self) -> usize {
        self.pow(self.l_b())
    }

    pub fn d_c(&self) -> usize {
        self.pow(self.l_c())
    }

    pub fn d_d(&self) -> usize {
        self.pow(self.l_d)
    }

    /// `(q^{2L_A} − 1)/q^{2L_D}`, the scrambled value of δ.
    pub fn delta_scrambled(&self) -> f64 {
        let da2 = (self.d_a() as f64).powi(2);
        (da2 - 1.0) / (self.d_d() as f64).powi(2)
    }

    /// `q^{2L_A} − 1`, reached when no information leaves `A`.
    pub fn delta_max(&self) -> f64 {
        (self.d_a() as f64).powi(2) - 1.0
    }

    fn check(&self, spec: &CircuitSpec) -> Result<()> {
        if self.q != spec.q || self.l != spec.l {
            return invalid(format!(
                "partition is for q={} L={}, circuit has q={} L={}",
                self.q, self.l, spec.q, spec.l
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Exact,
    Membrane,
    Prediction,
    MonteCarlo,
}

impl Method {
    pub fn tag(self) -> &'static str {
        match self {
            Method::Exact => "exact",
            Method::Membrane => "membrane",
            Method::Prediction => "prediction",
            Method::MonteCarlo => "mc",
        }
    }
}

/// Ordered `(t, δ)` pairs with provenance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecodingSeries {
    pub method: Method,
    pub spec: String,
    pub partition: HPPartition,
    pub parity: Parity,
    pub seed: Option<u64>,
    pub points: Vec<(usize, f64)>,
}

impl DecodingSeries {
    pub fn value_at(&self, t: usize) -> Option<f64> {
        self.points.iter().find(|p| p.0 == t).map(|p| p.1)
    }

    /// Mean of δ over the stored times in `[lo, hi]`.
    pub fn time_average(&self, lo: usize, hi: usize) -> Option<f64> {
        let vals: Vec<f64> = self.points.iter().filter(|p| p.0 >= lo && p.0 <= hi).map(|p| p.1).collect();
        (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64)
    }

    /// `Δ(t) = (δ+1)/d_A²`.
    pub fn otoc_values(&self) -> Vec<(usize, f64)> {
        let da2 = (self.partition.d_a() as f64).powi(2);
        self.points.iter().map(|&(t, d)| (t, (d + 1.0) / da2)).collect()
    }

    /// Checks `−tol ≤ δ ≤ q^{2L_A} − 1 + tol` at every point.
    pub fn validate(&self) -> Result<()> {
        let hi = self.partition.delta_max() + DELTA_TOL;
        for &(t, d) in &self.points {
            if !(d >= -DELTA_TOL && d <= hi) {
                return Err(Error::Diagnostic(format!("δ({t}) = {d} outside [0, {}]", hi - DELTA_TOL)));
            }
        }
        Ok(())
    }
}

/// Times `5L, 5L+2, …, 10L` used for plateau estimates.
pub fn plateau_window(l: usize) -> Vec<usize> {
    (5 * l..=10 * l).step_by(2).collect()
}

pub fn describe_spec(spec: &CircuitSpec) -> String {
    use crate::brickwork::Assignment;
    let assignment = match &spec.assignment {
        Assignment::Floquet(_) => "floquet".to_string(),
        Assignment::Random { seed } => format!("random(seed={seed})"),
        Assignment::FloquetWithEdges { .. } => "floquet-with-edges".to_string(),
    };
    format!("L={} q={} bc={:?} assignment={} parity={:?}", spec.l, spec.q, spec.boundary, assignment, spec.parity)
}

/// Choi matrix reshaped to rows `(a,c)` and columns `(b,d)`, normalized.
fn choi_blocks(u: &Array2<C64>, p: &HPPartition) -> Array2<C64> {
    let (da, db, dc, dd) = (p.d_a(), p.d_b(), p.d_c(), p.d_d());
    let norm = 1.0 / ((p.q as f64).powi(p.l as i32)).sqrt();
    Array2::from_shape_fn((da * dc, db * dd), |(row, col)| {
        let (a, c) = (row / dc, row % dc);
        let (b, d) = (col / dd, col % dd);
        u[[c * dd + d, a * db + b]] * norm
    })
}

/// Gram matrix of the Choi state on the smaller side of the `A'C | B'D` cut;
/// its spectrum is that of `ρ_{A'C}`.
pub fn choi_gram(u: &EvolutionOperator, p: &HPPartition) -> Result<Array2<C64>> {
    p.check(&u.spec)?;
    let m = choi_blocks(&u.u, p);
    let mc = m.mapv(|x| x.conj());
    Ok(if m.nrows() <= m.ncols() { m.dot(&mc.t()) } else { mc.t().dot(&m) })
}

/// `tr[ρ_{A'C}²]` of the normalized Choi state.
pub fn choi_purity(u: &EvolutionOperator, p: &HPPartition) -> Result<f64> {
    Ok(choi_gram(u, p)?.iter().map(|x| x.norm_sqr()).sum())
}

pub fn delta_from_purity(purity: f64, p: &HPPartition) -> f64 {
    (p.d_a() * p.d_c()) as f64 * purity - 1.0
}

pub fn decoding_error(spec: &CircuitSpec, p: &HPPartition, t: usize) -> Result<f64> {
    p.check(spec)?;
    let u = build_evolution(spec, t)?;
    Ok(delta_from_purity(choi_purity(&u, p)?, p))
}

fn series(spec: &CircuitSpec, p: HPPartition, points: Vec<(usize, f64)>) -> DecodingSeries {
    let seed = match spec.assignment {
        crate::brickwork::Assignment::Random { seed } => Some(seed),
        _ => None,
    };
    DecodingSeries { method: Method::Exact, spec: describe_spec(spec), partition: p, parity: spec.parity, seed, points }
}

fn sorted_times(times: &[usize]) -> Vec<usize> {
    let mut ts = times.to_vec();
    ts.sort_unstable();
    ts.dedup();
    ts
}

/// δ(t) through the Choi-state Gram matrix, growing 𝒰 incrementally.
pub fn decoding_series_gram(spec: &CircuitSpec, p: &HPPartition, times: &[usize]) -> Result<DecodingSeries> {
    p.check(spec)?;
    let mut u = EvolutionOperator::identity(spec)?;
    let mut points = Vec::new();
    for t in sorted_times(times) {
        u.advance(t - u.t);
        points.push((t, delta_from_purity(choi_purity(&u, p)?, p)));
    }
    Ok(series(spec, *p, points))
}

/// `‖tr_{last k sites} X‖²_F`.
fn partial_trace_tail_norm2(x: &Array2<C64>, tail_dim: usize) -> f64 {
    let n = x.nrows();
    let head = n / tail_dim;
    let mut total = 0.0;
    for c in 0..head {
        for c2 in 0..head {
            let mut acc = C64::new(0.0, 0.0);
            for d in 0..tail_dim {
                acc += x[[c * tail_dim + d, c2 * tail_dim + d]];
            }
            total += acc.norm_sqr();
        }
    }
    total
}

/// `‖tr_{first k sites} X‖²_F`.
fn partial_trace_head_norm2(x: &Array2<C64>, head_dim: usize) -> f64 {
    let n = x.nrows();
    let tail = n / head_dim;
    let mut acc = Array2::<C64>::zeros((tail, tail));
    for a in 0..head_dim {
        acc += &x.slice(ndarray::s![a * tail..(a + 1) * tail, a * tail..(a + 1) * tail]);
    }
    acc.iter().map(|v| v.norm_sqr()).sum()
}

/// δ(t) for one `L_A` and several `L_D`, evolving the Weyl strings on `A`
/// forwards, `Y ← 𝒰 P_A 𝒰†`. Works for any assignment.
pub fn decoding_series_forward(
    spec: &CircuitSpec,
    l_a: usize,
    l_ds: &[usize],
    times: &[usize],
) -> Result<Vec<DecodingSeries>> {
    spec.check_exact_capacity()?;
    let parts: Vec<HPPartition> = l_ds.iter().map(|&l_d| HPPartition::for_spec(spec, l_a, l_d)).collect::<Result<_>>()?;
    let times = sorted_times(times);
    let q = spec.q;
    let qn = spec.dim() as f64;
    // sums[i][j]: Σ_{P_A} ‖tr_D Y‖² for partition i at time j; identity included.
    let mut sums: Vec<Vec<f64>> = parts.iter().map(|p| vec![(p.d_d() as f64) * qn; times.len()]).collect();
    let sites: Vec<usize> = (0..l_a).collect();
    for s in WeylString::all(q, l_a).iter().filter(|s| !s.is_identity()) {
        let mut y = OperatorState::new(LocalOperator { sites: sites.clone(), m: s.dense() }.embed(q, spec.l)?);
        let mut t = 0;
        for (j, &tj) in times.iter().enumerate() {
            let ks: Vec<usize> = (t + 1..=tj).collect();
            if !ks.is_empty() {
                spec.conjugate_schrodinger_state(&mut y, &ks);
            }
            t = tj;
            for (i, p) in parts.iter().enumerate() {
                sums[i][j] += partial_trace_tail_norm2(y.stored().0, p.d_d());
            }
        }
    }
    Ok(parts
        .iter()
        .zip(sums)
        .map(|(p, s)| {
            let denom = p.d_d() as f64 * qn;
            let points = times.iter().zip(s).map(|(&t, v)| (t, v / denom - 1.0)).collect();
            series(spec, *p, points)
        })
        .collect())
}

/// δ(t) for one `L_D` and several `L_A`, evolving the Weyl strings on `D`
/// backwards, `X ← 𝒰†P_D𝒰`. Needs a Floquet assignment: then
/// `𝒰(t+2) = 𝒰(t)F` with `F = W_2W_1`, so `X(t+2) = F†X(t)F`.
pub fn decoding_series_floquet(
    spec: &CircuitSpec,
    l_d: usize,
    l_as: &[usize],
    times: &[usize],
) -> Result<Vec<DecodingSeries>> {
    if !spec.is_floquet() {
        return invalid("backward Weyl-string evolution needs a Floquet circuit");
    }
    spec.check_exact_capacity()?;
    let parts: Vec<HPPartition> = l_as.iter().map(|&l_a| HPPartition::for_spec(spec, l_a, l_d)).collect::<Result<_>>()?;
    let times = sorted_times(times);
    let q = spec.q;
    let qn = spec.dim() as f64;
    let mut sums: Vec<Vec<f64>> = parts.iter().map(|p| vec![(p.d_a() as f64) * qn; times.len()]).collect();
    let sites: Vec<usize> = (spec.l - l_d..spec.l).collect();
    for s in WeylString::all(q, l_d).iter().filter(|s| !s.is_identity()) {
        for parity in 0..2 {
            let wanted: Vec<usize> = (0..times.len()).filter(|&j| times[j] % 2 == parity).collect();
            if wanted.is_empty() {
                continue;
            }
            let mut x = OperatorState::new(LocalOperator { sites: sites.clone(), m: s.dense() }.embed(q, spec.l)?);
            let mut t = 0;
            if parity == 1 {
                spec.conjugate_heisenberg_state(&mut x, &[1]);
                t = 1;
            }
            for &j in &wanted {
                let periods = (times[j] - t) / 2;
                if periods > 0 {
                    let ks: Vec<usize> = (0..periods).flat_map(|_| [1, 2]).collect();
                    spec.conjugate_heisenberg_state(&mut x, &ks);
                    t = times[j];
                }
                for (i, p) in parts.iter().enumerate() {
                    sums[i][j] += partial_trace_head_norm2(x.stored().0, p.d_a());
                }
            }
        }
    }
    Ok(parts
        .iter()
        .zip(sums)
        .map(|(p, s)| {
            let (da, dd) = (p.d_a() as f64, p.d_d() as f64);
            let points = times.iter().zip(s).map(|(&t, v)| (t, da * v / (dd * dd * qn) - 1.0)).collect();
            series(spec, *p, points)
        })
        .collect())
}

/// δ(t) at the requested times by the cheapest exact route.
pub fn decoding_series(spec: &CircuitSpec, p: &HPPartition, times: &[usize]) -> Result<DecodingSeries> {
    p.check(spec)?;
    Ok(decoding_series_forward(spec, p.l_a, &[p.l_d], times)?.remove(0))
}

/// `B_{L−1} = δ(L−1) + 1` for the Floquet circuit of `g` with `L_A = L_D = 1`.
pub fn b_quantity(g: &Gate, l: usize) -> Result<f64> {
    let spec = CircuitSpec::floquet(l, g.clone(), crate::brickwork::Boundary::Open)?;
    let p = HPPartition::for_spec(&spec, 1, 1)?;
    Ok(decoding_error(&spec, &p, l - 1)? + 1.0)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OtocSet {
    /// Average over all pairs of strings: Δ(t).
    All,
    /// Average over non-identity pairs only: F(t).
    NonIdentity,
}

/// Infinite-temperature OTOC `tr[O_D(t) O_A O_D(t)† O_A†]/q^L` averaged over
/// Weyl strings on `A` and `D`, by explicit enumeration.
pub fn otoc_average(spec: &CircuitSpec, p: &HPPartition, t: usize, which: OtocSet) -> Result<f64> {
    p.check(spec)?;
    spec.check_exact_capacity()?;
    let n = spec.dim();
    let da = p.d_a();
    let tail = n / da;
    let d_sites: Vec<usize> = (p.l - p.l_d..p.l).collect();
    let a_strings = WeylString::all(p.q, p.l_a);
    let a_actions: Vec<Vec<(usize, C64)>> = a_strings.iter().map(|s| (0..da).map(|a| s.act(a)).collect()).collect();
    let mut total = C64::new(0.0, 0.0);
    let mut count = 0usize;
    for pd in WeylString::all(p.q, p.l_d) {
        if which == OtocSet::NonIdentity && pd.is_identity() {
            continue;
        }
        let x = heisenberg_evolve(&LocalOperator { sites: d_sites.clone(), m: pd.dense() }, spec, t)?;
        for (pa, act) in a_strings.iter().zip(&a_actions) {
            if which == OtocSet::NonIdentity && pa.is_identity() {
                continue;
            }
            let image = |s: usize| {
                let (a2, ph) = act[s / tail];
                (a2 * tail + s % tail, ph)
            };
            let mut acc = C64::new(0.0, 0.0);
            for k in 0..n {
                let (pk, phk) = image(k);
                for l in 0..n {
                    let (pl, phl) = image(l);
                    acc += x[[pl, pk]] * phk * x[[l, k]].conj() * phl.conj();
                }
            }
            total += acc / n as f64;
            count += 1;
        }
    }
    let avg = total / count as f64;
    if avg.im.abs() > 1e-9 {
        return Err(Error::Diagnostic(format!("OTOC average has imaginary part {:.3e}", avg.im)));
    }
    Ok(avg.re)
}

/// `δ = δ_∞ + (d_A²−1)(1−d_D^{−2})F`.
pub fn delta_from_otoc(f: f64, p: &HPPartition) -> f64 {
    let da2 = (p.d_a() as f64).powi(2);
    let dd2 = (p.d_d() as f64).powi(2);
    p.delta_scrambled() + (da2 - 1.0) * (1.0 - 1.0 / dd2) * f
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MutualInformation {
    /// `I(A:C) = S_A + S_C − S_{AC}` in nats.
    pub nats: f64,
    /// The same in units of `log q`.
    pub base_q: f64,
    /// `S_{AC}` in nats.
    pub s_ac: f64,
}

/// Operator-space mutual information between `A'` and `C`, with
/// `S_A = L_A log q` and `S_C = L_C log q` fixed by unitarity.
pub fn mutual_information(u: &EvolutionOperator, p: &HPPartition) -> Result<MutualInformation> {
    let g = choi_gram(u, p)?;
    let evals = g.eigvalsh(UPLO::Lower).map_err(|e| Error::Linalg(e.to_string()))?;
    let s_ac: f64 = evals.iter().filter(|&&x| x > 1e-300).map(|&x| -x * x.ln()).sum();
    let lnq = (p.q as f64).ln();
    let nats = (p.l_a + p.l_c()) as f64 * lnq - s_ac;
    Ok(MutualInformation { nats, base_q: nats / lnq, s_ac })
}

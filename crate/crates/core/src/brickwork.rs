//! Brickwork circuits and their dense evolution operators.
//!
//! Sites are numbered `0..L`; in a basis index site 0 is the most significant
//! digit. Layers are counted from 1. With [`Parity::EvenBondsFirst`] the odd
//! layers act on bonds `(0,1),(2,3),…` and the even layers on `(1,2),(3,4),…`;
//! with periodic boundaries the second family also contains `(L−1,0)`.

use ndarray::Array2;
use num_complex::Complex64 as C64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::kernels::{transform_cols, transform_rows, transpose_square, PreparedOp};
use crate::qgates::{adjoint, haar_gate_from, unitarity_defect, Gate, UNITARY_TOL};

/// Largest Hilbert-space dimension accepted by the dense simulator
/// (`L = 14` qubits, about 4.3 GB per operator).
pub const MAX_EXACT_DIM: usize = 1 << 14;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Boundary {
    Open,
    Periodic,
}

/// Which bond family the first layer covers.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Parity {
    /// Layer 1 acts on `(0,1),(2,3),…`.
    EvenBondsFirst,
    /// Layer 1 acts on `(1,2),(3,4),…`.
    OddBondsFirst,
}

impl Parity {
    pub fn describe(self) -> &'static str {
        match self {
            Parity::EvenBondsFirst => "odd layers on bonds (0,1),(2,3),...; even layers on (1,2),(3,4),...",
            Parity::OddBondsFirst => "odd layers on bonds (1,2),(3,4),...; even layers on (0,1),(2,3),...",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Assignment {
    /// The same gate on every bond and layer.
    Floquet(Gate),
    /// Independent Haar gates per (layer, bond), derived from `seed`.
    Random { seed: u64 },
    /// Floquet bulk plus single-site unitaries on the idle edge sites of
    /// layers that leave them uncovered (open boundaries only).
    FloquetWithEdges { gate: Gate, left: Array2<C64>, right: Array2<C64> },
}

#[derive(Clone, Debug, PartialEq)]
pub struct CircuitSpec {
    pub l: usize,
    pub q: usize,
    pub boundary: Boundary,
    pub assignment: Assignment,
    pub parity: Parity,
}

/// A local gate at fixed sites.
#[derive(Clone, Debug, PartialEq)]
pub struct LocalGate {
    pub sites: Vec<usize>,
    pub m: Array2<C64>,
}

/// All gates of one layer; their supports are disjoint.
#[derive(Clone, Debug, PartialEq)]
pub struct Layer {
    pub gates: Vec<LocalGate>,
}

/// How a layer `W` is applied to the index it acts on.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Orient {
    Plain,
    Adjoint,
    Transpose,
    Conj,
}

impl Layer {
    fn prepared(&self, orient: Orient, q: usize, l: usize) -> Vec<PreparedOp> {
        self.gates
            .iter()
            .map(|g| {
                let m = match orient {
                    Orient::Plain => g.m.clone(),
                    Orient::Adjoint => adjoint(g.m.view()),
                    Orient::Transpose => g.m.t().to_owned(),
                    Orient::Conj => g.m.mapv(|x| x.conj()),
                };
                PreparedOp::new(&g.sites, &m, q, l)
            })
            .collect()
    }
}

impl CircuitSpec {
    pub fn new(l: usize, q: usize, boundary: Boundary, assignment: Assignment, parity: Parity) -> Result<Self> {
        if q < 2 {
            return invalid(format!("qudit dimension must be at least 2, got {q}"));
        }
        if l < 2 || l % 2 != 0 {
            return invalid(format!("L must be even and at least 2, got {l}"));
        }
        if boundary == Boundary::Periodic && l < 4 {
            return invalid("periodic boundaries need L >= 4");
        }
        match &assignment {
            Assignment::Floquet(g) if g.q() != q => return invalid("gate dimension does not match q"),
            Assignment::FloquetWithEdges { gate, left, right } => {
                if gate.q() != q {
                    return invalid("gate dimension does not match q");
                }
                if boundary != Boundary::Open {
                    return invalid("edge gates only apply to open boundaries");
                }
                for u in [left, right] {
                    if u.dim() != (q, q) || unitarity_defect(u.view()) > UNITARY_TOL {
                        return invalid("edge gates must be q x q unitaries");
                    }
                }
            }
            _ => {}
        }
        Ok(CircuitSpec { l, q, boundary, assignment, parity })
    }

    pub fn floquet(l: usize, gate: Gate, boundary: Boundary) -> Result<Self> {
        let q = gate.q();
        Self::new(l, q, boundary, Assignment::Floquet(gate), Parity::EvenBondsFirst)
    }

    pub fn random(l: usize, q: usize, seed: u64, boundary: Boundary) -> Result<Self> {
        Self::new(l, q, boundary, Assignment::Random { seed }, Parity::EvenBondsFirst)
    }

    pub fn dim(&self) -> usize {
        self.q.pow(self.l as u32)
    }

    /// Rejects dimensions the dense simulator cannot hold.
    pub fn check_exact_capacity(&self) -> Result<()> {
        let dim = (self.q as u128).pow(self.l as u32);
        if dim > MAX_EXACT_DIM as u128 {
            return Err(Error::Capacity { dim, limit: MAX_EXACT_DIM });
        }
        Ok(())
    }

    pub fn is_floquet(&self) -> bool {
        !matches!(self.assignment, Assignment::Random { .. })
    }

    /// First sites of the bonds covered by layer `k ≥ 1`.
    pub fn bonds(&self, k: usize) -> Vec<(usize, usize)> {
        let offset = match (self.parity, k % 2 == 1) {
            (Parity::EvenBondsFirst, true) | (Parity::OddBondsFirst, false) => 0,
            _ => 1,
        };
        let mut bonds: Vec<(usize, usize)> = (offset..self.l - 1).step_by(2).map(|i| (i, i + 1)).collect();
        if offset == 1 && self.boundary == Boundary::Periodic {
            bonds.push((self.l - 1, 0));
        }
        bonds
    }

    /// Gates of layer `k ≥ 1`.
    pub fn layer(&self, k: usize) -> Layer {
        let bonds = self.bonds(k);
        let mut gates: Vec<LocalGate> = bonds
            .iter()
            .map(|&(i, j)| LocalGate { sites: vec![i, j], m: self.bond_gate(k, i) })
            .collect();
        if let Assignment::FloquetWithEdges { left, right, .. } = &self.assignment {
            if bonds.first().map(|b| b.0) == Some(1) {
                gates.push(LocalGate { sites: vec![0], m: left.clone() });
                gates.push(LocalGate { sites: vec![self.l - 1], m: right.clone() });
            }
        }
        Layer { gates }
    }

    fn bond_gate(&self, k: usize, first_site: usize) -> Array2<C64> {
        match &self.assignment {
            Assignment::Floquet(g) | Assignment::FloquetWithEdges { gate: g, .. } => g.matrix().clone(),
            Assignment::Random { seed } => {
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                rng.set_stream(((k as u64) << 32) | first_site as u64);
                haar_gate_from(self.q, &mut rng).into_matrix()
            }
        }
    }

    /// `M ← W_k M`.
    pub fn apply_layer_left(&self, m: &mut Array2<C64>, k: usize) {
        transform_rows(m, &self.layer(k).prepared(Orient::Plain, self.q, self.l));
    }

    /// `M ← W M` with `W = W_{ks[n-1]} ⋯ W_{ks[0]}`.
    pub fn apply_layers_left(&self, m: &mut Array2<C64>, ks: &[usize]) {
        transform_rows(m, &self.prepared(ks, Orient::Plain, false));
    }

    fn prepared(&self, ks: &[usize], orient: Orient, reversed: bool) -> Vec<PreparedOp> {
        let mut layers: Vec<Layer> = ks.iter().map(|&k| self.layer(k)).collect();
        if reversed {
            layers.reverse();
        }
        layers.iter().flat_map(|w| w.prepared(orient, self.q, self.l)).collect()
    }

    /// `X ← W_k† X W_k`.
    pub fn conjugate_heisenberg(&self, x: &mut Array2<C64>, k: usize) {
        self.conjugate_heisenberg_many(x, &[k]);
    }

    /// `X ← W† X W` with `W = W_{ks[n-1]} ⋯ W_{ks[0]}` (first entry acts first).
    pub fn conjugate_heisenberg_many(&self, x: &mut Array2<C64>, ks: &[usize]) {
        transform_rows(x, &self.prepared(ks, Orient::Adjoint, true));
        transform_cols(x, &self.prepared(ks, Orient::Transpose, true));
    }

    /// `Y ← W_k Y W_k†`.
    pub fn conjugate_schrodinger(&self, y: &mut Array2<C64>, k: usize) {
        self.conjugate_schrodinger_many(y, &[k]);
    }

    /// `Y ← W Y W†` with `W = W_{ks[n-1]} ⋯ W_{ks[0]}` (first entry acts first).
    pub fn conjugate_schrodinger_many(&self, y: &mut Array2<C64>, ks: &[usize]) {
        transform_rows(y, &self.prepared(ks, Orient::Plain, false));
        transform_cols(y, &self.prepared(ks, Orient::Conj, false));
    }

    /// [`Self::conjugate_heisenberg_many`] on an [`OperatorState`].
    pub fn conjugate_heisenberg_state(&self, x: &mut OperatorState, ks: &[usize]) {
        let left = self.prepared(ks, Orient::Adjoint, true);
        let right = self.prepared(ks, Orient::Transpose, true);
        x.conjugate(&left, &right);
    }

    /// [`Self::conjugate_schrodinger_many`] on an [`OperatorState`].
    pub fn conjugate_schrodinger_state(&self, y: &mut OperatorState, ks: &[usize]) {
        let left = self.prepared(ks, Orient::Plain, false);
        let right = self.prepared(ks, Orient::Conj, false);
        y.conjugate(&left, &right);
    }
}

/// A square operator under repeated two-sided updates. The storage flips
/// between the matrix and its transpose so that each update needs a single
/// transpose and only column passes.
#[derive(Clone, Debug)]
pub struct OperatorState {
    stored: Array2<C64>,
    transposed: bool,
}

impl OperatorState {
    pub fn new(m: Array2<C64>) -> Self {
        assert!(m.is_square(), "operator must be square");
        OperatorState { stored: m, transposed: false }
    }

    /// The stored matrix and whether it is the transpose of the operator.
    /// Partial-trace norms are the same either way.
    pub fn stored(&self) -> (&Array2<C64>, bool) {
        (&self.stored, self.transposed)
    }

    pub fn into_matrix(mut self) -> Array2<C64> {
        if self.transposed {
            transpose_square(&mut self.stored);
        }
        self.stored
    }

    fn conjugate(&mut self, left: &[PreparedOp], right: &[PreparedOp]) {
        let (first, second) = if self.transposed { (left, right) } else { (right, left) };
        transform_cols(&mut self.stored, first);
        transpose_square(&mut self.stored);
        transform_cols(&mut self.stored, second);
        self.transposed = !self.transposed;
    }
}

/// Dense `𝒰(t) = W_t ⋯ W_1`.
#[derive(Clone, Debug)]
pub struct EvolutionOperator {
    pub u: Array2<C64>,
    pub spec: CircuitSpec,
    pub t: usize,
}

impl EvolutionOperator {
    pub fn identity(spec: &CircuitSpec) -> Result<Self> {
        spec.check_exact_capacity()?;
        Ok(EvolutionOperator { u: Array2::eye(spec.dim()), spec: spec.clone(), t: 0 })
    }

    /// Appends layers `t+1..=t+extra`.
    pub fn advance(&mut self, extra: usize) {
        let ks: Vec<usize> = (self.t + 1..=self.t + extra).collect();
        if !ks.is_empty() {
            self.spec.apply_layers_left(&mut self.u, &ks);
        }
        self.t += extra;
    }

    pub fn unitarity_defect(&self) -> f64 {
        unitarity_defect(self.u.view())
    }
}

pub fn build_evolution(spec: &CircuitSpec, t: usize) -> Result<EvolutionOperator> {
    let mut ev = EvolutionOperator::identity(spec)?;
    ev.advance(t);
    Ok(ev)
}

/// Operator `m` acting on the listed sites, identity elsewhere.
#[derive(Clone, Debug, PartialEq)]
pub struct LocalOperator {
    pub sites: Vec<usize>,
    pub m: Array2<C64>,
}

impl LocalOperator {
    /// Dense `q^L×q^L` embedding.
    pub fn embed(&self, q: usize, l: usize) -> Result<Array2<C64>> {
        let k = self.sites.len();
        if self.m.dim() != (q.pow(k as u32), q.pow(k as u32)) {
            return invalid("operator shape does not match its support");
        }
        let mut seen = vec![false; l];
        for &s in &self.sites {
            if s >= l || seen[s] {
                return invalid(format!("support site {s} out of range or repeated"));
            }
            seen[s] = true;
        }
        let n = q.pow(l as u32);
        let strides: Vec<usize> = self.sites.iter().map(|&s| q.pow((l - 1 - s) as u32)).collect();
        let local = |x: usize| strides.iter().fold(0, |acc, &st| acc * q + (x / st) % q);
        let rest = |x: usize| x - strides.iter().map(|&st| ((x / st) % q) * st).sum::<usize>();
        let mut out = Array2::zeros((n, n));
        for r in 0..n {
            let (lr, rr) = (local(r), rest(r));
            for lc in 0..self.m.ncols() {
                let v = self.m[[lr, lc]];
                if v == C64::new(0.0, 0.0) {
                    continue;
                }
                let c = rr + (0..k).map(|i| ((lc / q.pow((k - 1 - i) as u32)) % q) * strides[i]).sum::<usize>();
                out[[r, c]] = v;
            }
        }
        Ok(out)
    }
}

/// `𝒰(t)† (op⊗1) 𝒰(t)`.
pub fn heisenberg_evolve(op: &LocalOperator, spec: &CircuitSpec, t: usize) -> Result<Array2<C64>> {
    spec.check_exact_capacity()?;
    let mut x = op.embed(spec.q, spec.l)?;
    for k in (1..=t).rev() {
        spec.conjugate_heisenberg(&mut x, k);
    }
    Ok(x)
}

//! Generalized Pauli (Weyl) strings `⊗ X^a Z^b` on a block of qudits.
//!
//! `X|s⟩ = |s+1 mod q⟩` and `Z|s⟩ = ω^s|s⟩` with `ω = e^{2πi/q}`. The `q^{2k}`
//! strings on `k` qudits form a unitary basis orthogonal in the
//! Hilbert-Schmidt inner product, which is all the OTOC identities need.

use ndarray::Array2;
use num_complex::Complex64 as C64;

/// A Weyl string on `len` consecutive qudits, stored as per-site exponents.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WeylString {
    pub q: usize,
    /// `(a, b)` for `X^a Z^b`, site 0 first.
    pub exps: Vec<(usize, usize)>,
}

impl WeylString {
    /// All `q^{2·len}` strings; index 0 is the identity.
    pub fn all(q: usize, len: usize) -> Vec<WeylString> {
        let count = (q * q).pow(len as u32);
        (0..count)
            .map(|mut code| {
                let mut exps = vec![(0, 0); len];
                for e in exps.iter_mut().rev() {
                    let local = code % (q * q);
                    code /= q * q;
                    *e = (local / q, local % q);
                }
                WeylString { q, exps }
            })
            .collect()
    }

    pub fn len(&self) -> usize {
        self.exps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.exps.is_empty()
    }

    pub fn is_identity(&self) -> bool {
        self.exps.iter().all(|&e| e == (0, 0))
    }

    /// Image of basis index `s` (digits over the block, site 0 most
    /// significant): `P|s⟩ = phase·|s'⟩`.
    pub fn act(&self, s: usize) -> (usize, C64) {
        let q = self.q;
        let len = self.len();
        let mut out = 0;
        let mut k = 0;
        for (site, &(a, b)) in self.exps.iter().enumerate() {
            let stride = q.pow((len - 1 - site) as u32);
            let digit = (s / stride) % q;
            k += b * digit;
            out += ((digit + a) % q) * stride;
        }
        let angle = 2.0 * std::f64::consts::PI * ((k % q) as f64) / q as f64;
        (out, C64::from_polar(1.0, angle))
    }

    pub fn dense(&self) -> Array2<C64> {
        let dim = self.q.pow(self.len() as u32);
        let mut m = Array2::zeros((dim, dim));
        for s in 0..dim {
            let (t, ph) = self.act(s);
            m[[t, s]] = ph;
        }
        m
    }
}

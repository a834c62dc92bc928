//! Cache-blocked application of local gates to dense `n×n` operators.
//!
//! A block of columns (or of rows, transposed) is copied into split real and
//! imaginary buffers laid out as `[index][lane]`, every gate of the sequence
//! is applied there, and the block is written back. The inner loops run over
//! contiguous lanes so they vectorize.

use ndarray::Array2;
use num_complex::Complex64 as C64;

/// Row segment copied at a time when filling a block.
const GATHER_TILE: usize = 64;

/// Lane chunk of the two-qudit fast path.
const CH: usize = 8;

/// Target size of one block buffer in complex entries (about 1 MiB).
const BLOCK_ENTRIES: usize = 1 << 16;

/// A gate already oriented for the index it acts on: the index transforms
/// as `new[out] = Σ m[out, in]·old[in]`.
pub(crate) struct PreparedOp {
    /// Indices whose digits on the gate's sites are all zero.
    bases: Vec<usize>,
    /// Index offset of each local basis state.
    local: Vec<usize>,
    dim: usize,
    re: Vec<f64>,
    im: Vec<f64>,
}

impl PreparedOp {
    pub(crate) fn new(sites: &[usize], m: &Array2<C64>, q: usize, l: usize) -> Self {
        let strides: Vec<usize> = sites.iter().map(|&s| q.pow((l - 1 - s) as u32)).collect();
        let dim = q.pow(sites.len() as u32);
        debug_assert_eq!(m.dim(), (dim, dim));
        let n = q.pow(l as u32);
        let bases = (0..n).filter(|&b| strides.iter().all(|&s| (b / s) % q == 0)).collect();
        let local = (0..dim)
            .map(|k| {
                let mut rem = k;
                let mut idx = 0;
                for &s in strides.iter().rev() {
                    idx += (rem % q) * s;
                    rem /= q;
                }
                idx
            })
            .collect();
        PreparedOp {
            bases,
            local,
            dim,
            re: m.iter().map(|x| x.re).collect(),
            im: m.iter().map(|x| x.im).collect(),
        }
    }
}

struct Block {
    re: Vec<f64>,
    im: Vec<f64>,
    tmp_re: Vec<f64>,
    tmp_im: Vec<f64>,
    offsets: Vec<usize>,
}

impl Block {
    fn new(n: usize, w: usize, max_dim: usize) -> Self {
        Block {
            re: vec![0.0; n * w],
            im: vec![0.0; n * w],
            tmp_re: vec![0.0; max_dim * w],
            tmp_im: vec![0.0; max_dim * w],
            offsets: vec![0; max_dim],
        }
    }

    fn apply(&mut self, op: &PreparedOp, w: usize) {
        if op.dim == 4 && w % CH == 0 {
            #[cfg(target_arch = "x86_64")]
            {
                if is_x86_feature_detected!("avx512f") && is_x86_feature_detected!("fma") {
                    // SAFETY: the required CPU features were detected above.
                    return unsafe { self.apply4_avx512(op, w) };
                }
                if is_x86_feature_detected!("avx2") && is_x86_feature_detected!("fma") {
                    // SAFETY: as above.
                    return unsafe { self.apply4_avx2(op, w) };
                }
            }
            return self.apply4::<false>(op, w);
        }
        self.apply_general(op, w);
    }

    #[cfg(target_arch = "x86_64")]
    #[target_feature(enable = "avx512f,fma")]
    unsafe fn apply4_avx512(&mut self, op: &PreparedOp, w: usize) {
        self.apply4::<true>(op, w);
    }

    #[cfg(target_arch = "x86_64")]
    #[target_feature(enable = "avx2,fma")]
    unsafe fn apply4_avx2(&mut self, op: &PreparedOp, w: usize) {
        self.apply4::<true>(op, w);
    }

    /// Two-qubit gates: the four amplitudes of each lane chunk stay in registers.
    #[inline(always)]
    fn apply4<const FMA: bool>(&mut self, op: &PreparedOp, w: usize) {
        let (gr, gi) = (&op.re[..16], &op.im[..16]);
        let mut offs = [0usize; 4];
        for &base in &op.bases {
            for k in 0..4 {
                offs[k] = (base + op.local[k]) * w;
            }
            for c in (0..w).step_by(CH) {
                let mut xr = [[0.0f64; CH]; 4];
                let mut xi = [[0.0f64; CH]; 4];
                for k in 0..4 {
                    xr[k] = self.re[offs[k] + c..offs[k] + c + CH].try_into().unwrap();
                    xi[k] = self.im[offs[k] + c..offs[k] + c + CH].try_into().unwrap();
                }
                for out in 0..4 {
                    let mut yr = [0.0f64; CH];
                    let mut yi = [0.0f64; CH];
                    for inp in 0..4 {
                        let (a, b) = (gr[out * 4 + inp], gi[out * 4 + inp]);
                        for x in 0..CH {
                            if FMA {
                                yr[x] = a.mul_add(xr[inp][x], (-b).mul_add(xi[inp][x], yr[x]));
                                yi[x] = a.mul_add(xi[inp][x], b.mul_add(xr[inp][x], yi[x]));
                            } else {
                                yr[x] += a * xr[inp][x] - b * xi[inp][x];
                                yi[x] += a * xi[inp][x] + b * xr[inp][x];
                            }
                        }
                    }
                    self.re[offs[out] + c..offs[out] + c + CH].copy_from_slice(&yr);
                    self.im[offs[out] + c..offs[out] + c + CH].copy_from_slice(&yi);
                }
            }
        }
    }

    fn apply_general(&mut self, op: &PreparedOp, w: usize) {
        let dim = op.dim;
        for &base in &op.bases {
            for (off, &loc) in self.offsets[..dim].iter_mut().zip(&op.local) {
                *off = (base + loc) * w;
            }
            for k in 0..dim {
                let o = self.offsets[k];
                self.tmp_re[k * w..(k + 1) * w].copy_from_slice(&self.re[o..o + w]);
                self.tmp_im[k * w..(k + 1) * w].copy_from_slice(&self.im[o..o + w]);
            }
            for out in 0..dim {
                let o = self.offsets[out];
                let ore = &mut self.re[o..o + w];
                let oim = &mut self.im[o..o + w];
                ore.fill(0.0);
                oim.fill(0.0);
                for inp in 0..dim {
                    let gr = op.re[out * dim + inp];
                    let gi = op.im[out * dim + inp];
                    if gr == 0.0 && gi == 0.0 {
                        continue;
                    }
                    let tr = &self.tmp_re[inp * w..(inp + 1) * w];
                    let ti = &self.tmp_im[inp * w..(inp + 1) * w];
                    for (((r, i), &xr), &xi) in ore.iter_mut().zip(oim.iter_mut()).zip(tr).zip(ti) {
                        *r += gr * xr - gi * xi;
                        *i += gr * xi + gi * xr;
                    }
                }
            }
        }
    }
}

fn block_width(n: usize) -> usize {
    (BLOCK_ENTRIES / n).clamp(1, n)
}

fn max_dim(ops: &[PreparedOp]) -> usize {
    ops.iter().map(|o| o.dim).max().unwrap_or(1)
}

/// In-place transpose of a square matrix, tile by tile.
pub(crate) fn transpose_square(mat: &mut Array2<C64>) {
    const TILE: usize = 32;
    let n = mat.nrows();
    let data = mat.as_slice_mut().expect("standard layout");
    for i0 in (0..n).step_by(TILE) {
        for j0 in (i0..n).step_by(TILE) {
            for i in i0..(i0 + TILE).min(n) {
                let start = if i0 == j0 { i + 1 } else { j0 };
                for j in start..(j0 + TILE).min(n) {
                    data.swap(i * n + j, j * n + i);
                }
            }
        }
    }
}

/// `M ← G_k ⋯ G_1 M`: the ops act on the row index, first op first.
pub(crate) fn transform_rows(mat: &mut Array2<C64>, ops: &[PreparedOp]) {
    // Gathering column blocks touches one page per row; square matrices are
    // transposed instead so that every pass reads contiguous rows.
    if mat.is_square() && mat.nrows() >= 256 {
        transpose_square(mat);
        transform_cols(mat, ops);
        transpose_square(mat);
        return;
    }
    let n = mat.nrows();
    let ncols = mat.ncols();
    let data = mat.as_slice_mut().expect("standard layout");
    let w = block_width(n).min(ncols);
    let mut block = Block::new(n, w, max_dim(ops));
    let mut c0 = 0;
    while c0 < ncols {
        let wb = w.min(ncols - c0);
        for r in 0..n {
            let src = &data[r * ncols + c0..r * ncols + c0 + wb];
            for (x, v) in src.iter().enumerate() {
                block.re[r * w + x] = v.re;
                block.im[r * w + x] = v.im;
            }
        }
        for op in ops {
            block.apply(op, w);
        }
        for r in 0..n {
            let dst = &mut data[r * ncols + c0..r * ncols + c0 + wb];
            for (x, v) in dst.iter_mut().enumerate() {
                *v = C64::new(block.re[r * w + x], block.im[r * w + x]);
            }
        }
        c0 += wb;
    }
}

/// `M ← M G_1ᵀ ⋯ G_kᵀ`: the ops act on the column index of every row, first
/// op first.
pub(crate) fn transform_cols(mat: &mut Array2<C64>, ops: &[PreparedOp]) {
    let nrows = mat.nrows();
    let n = mat.ncols();
    let data = mat.as_slice_mut().expect("standard layout");
    let w = block_width(n).min(nrows);
    let mut block = Block::new(n, w, max_dim(ops));
    let mut r0 = 0;
    while r0 < nrows {
        let wb = w.min(nrows - r0);
        for p0 in (0..n).step_by(GATHER_TILE) {
            let p1 = (p0 + GATHER_TILE).min(n);
            for x in 0..wb {
                let row = &data[(r0 + x) * n + p0..(r0 + x) * n + p1];
                for (p, v) in (p0..p1).zip(row) {
                    block.re[p * w + x] = v.re;
                    block.im[p * w + x] = v.im;
                }
            }
        }
        for op in ops {
            block.apply(op, w);
        }
        for p0 in (0..n).step_by(GATHER_TILE) {
            let p1 = (p0 + GATHER_TILE).min(n);
            for x in 0..wb {
                let row = &mut data[(r0 + x) * n + p0..(r0 + x) * n + p1];
                for (p, v) in (p0..p1).zip(row) {
                    *v = C64::new(block.re[p * w + x], block.im[p * w + x]);
                }
            }
        }
        r0 += wb;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qgates::{haar_gate, kron};

    fn embed(sites: (usize, usize), g: &Array2<C64>, q: usize, l: usize) -> Array2<C64> {
        // Dense embedding by brute force over basis states.
        let n = q.pow(l as u32);
        let digit = |x: usize, s: usize| (x / q.pow((l - 1 - s) as u32)) % q;
        Array2::from_shape_fn((n, n), |(r, c)| {
            for s in 0..l {
                if s != sites.0 && s != sites.1 && digit(r, s) != digit(c, s) {
                    return C64::new(0.0, 0.0);
                }
            }
            let out = digit(r, sites.0) * q + digit(r, sites.1);
            let inp = digit(c, sites.0) * q + digit(c, sites.1);
            g[[out, inp]]
        })
    }

    #[test]
    fn rows_and_cols_match_dense_products() {
        let (q, l) = (2usize, 5usize);
        let n = q.pow(l as u32);
        let g = haar_gate(q, 3).into_matrix();
        let h = haar_gate(q, 4).into_matrix();
        let m0 = Array2::from_shape_fn((n, n), |(i, j)| C64::new((i * 7 + j) as f64 % 5.0, (i + 3 * j) as f64 % 3.0));
        let ops = [PreparedOp::new(&[4, 0], &g, q, l), PreparedOp::new(&[1, 2], &h, q, l)];
        let dense = embed((1, 2), &h, q, l).dot(&embed((4, 0), &g, q, l));

        let mut m = m0.clone();
        transform_rows(&mut m, &ops);
        let err = (&m - &dense.dot(&m0)).iter().map(|x| x.norm()).fold(0.0, f64::max);
        assert!(err < 1e-12, "{err}");

        let mut m = m0.clone();
        transform_cols(&mut m, &ops);
        let err = (&m - &m0.dot(&dense.t())).iter().map(|x| x.norm()).fold(0.0, f64::max);
        assert!(err < 1e-12, "{err}");
    }

    #[test]
    fn single_site_op() {
        let (q, l) = (3, 3);
        let n = 27;
        let u = crate::qgates::haar_unitary(3, &mut <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(1));
        let dense = kron(kron(Array2::eye(3).view(), u.view()).view(), Array2::eye(3).view());
        let mut m = Array2::<C64>::eye(n);
        transform_rows(&mut m, &[PreparedOp::new(&[1], &u, q, l)]);
        let err = (&m - &dense).iter().map(|x| x.norm()).fold(0.0, f64::max);
        assert!(err < 1e-14);
    }

    fn random_matrix(rows: usize, cols: usize, seed: u64) -> Array2<C64> {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        Array2::from_shape_fn((rows, cols), |_| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
    }

    fn dense_one_site(site: usize, u: &Array2<C64>, q: usize, l: usize) -> Array2<C64> {
        let left = Array2::<C64>::eye(q.pow(site as u32));
        let right = Array2::<C64>::eye(q.pow((l - 1 - site) as u32));
        kron(kron(left.view(), u.view()).view(), right.view())
    }

    proptest::proptest! {
        #![proptest_config(proptest::prelude::ProptestConfig::with_cases(48))]
        #[test]
        fn kernels_match_dense(
            shape in proptest::sample::select(vec![(2usize, 2usize), (2, 3), (2, 5), (2, 8), (3, 2), (3, 4)]),
            a in 0usize..8,
            b in 0usize..8,
            one_site in proptest::bool::ANY,
            ncols_pick in 0usize..4,
            seed in 0u64..1000,
        ) {
            let (q, l) = shape;
            let (i, j) = (a % l, b % l);
            proptest::prop_assume!(one_site || i != j);
            let n = q.pow(l as u32);
            let ncols = [1, 7, 33, n][ncols_pick];
            let (op, dense) = if one_site {
                let u = random_matrix(q, q, seed + 1);
                (PreparedOp::new(&[i], &u, q, l), dense_one_site(i, &u, q, l))
            } else {
                let g = random_matrix(q * q, q * q, seed + 1);
                (PreparedOp::new(&[i, j], &g, q, l), embed((i, j), &g, q, l))
            };
            let h = random_matrix(q * q, q * q, seed + 2);
            let k = (i + 1) % l;
            let second = PreparedOp::new(&[k, (k + 1) % l], &h, q, l);
            let total = embed((k, (k + 1) % l), &h, q, l).dot(&dense);
            let ops = [op, second];

            let m0 = random_matrix(n, ncols, seed);
            let mut m = m0.clone();
            transform_rows(&mut m, &ops);
            let err = (&m - &total.dot(&m0)).iter().map(|x| x.norm()).fold(0.0, f64::max);
            proptest::prop_assert!(err < 1e-11, "rows: {}", err);

            let m0 = random_matrix(ncols, n, seed);
            let mut m = m0.clone();
            transform_cols(&mut m, &ops);
            let err = (&m - &m0.dot(&total.t())).iter().map(|x| x.norm()).fold(0.0, f64::max);
            proptest::prop_assert!(err < 1e-11, "cols: {}", err);
        }
    }
}

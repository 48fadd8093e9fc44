//! Symmetric banded storage with an in-place Cholesky factorization.
//!
//! Row `i` stores columns `i - bw - PAD ..= i` (lower triangle) contiguously,
//! so the inner products of the factorization run over contiguous slices. The
//! `PAD` leading slots of every row, and anything left of column 0, are zero
//! padding; it lets a block of rows share one start column.

use super::FemError;

#[derive(Debug, Clone)]
pub struct BandedMatrix {
    n: usize,
    bw: usize,
    data: Vec<f64>,
}

impl BandedMatrix {
    pub fn zeros(n: usize, bw: usize) -> Self {
        Self {
            n,
            bw,
            data: vec![0.0; n * (bw + 1 + PAD)],
        }
    }

    pub fn order(&self) -> usize {
        self.n
    }

    pub fn bandwidth(&self) -> usize {
        self.bw
    }

    #[inline]
    fn offset(&self, i: usize, j: usize) -> usize {
        debug_assert!(j <= i && i - j <= self.bw);
        i * (self.bw + 1 + PAD) + (j + self.bw + PAD - i)
    }

    /// Entry `(i, j)` of the symmetric matrix.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (i, j) = if i >= j { (i, j) } else { (j, i) };
        if i - j > self.bw {
            0.0
        } else {
            self.data[self.offset(i, j)]
        }
    }

    /// Adds to entry `(i, j)` (and implicitly `(j, i)`). Panics outside the band.
    #[inline]
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let (i, j) = if i >= j { (i, j) } else { (j, i) };
        assert!(i - j <= self.bw, "entry ({i}, {j}) outside band {}", self.bw);
        let o = self.offset(i, j);
        self.data[o] += v;
    }

    /// Replaces row and column `k` by the identity row.
    pub fn constrain(&mut self, k: usize) {
        let lo = k.saturating_sub(self.bw);
        for j in lo..k {
            let o = self.offset(k, j);
            self.data[o] = 0.0;
        }
        let hi = (k + self.bw).min(self.n - 1);
        for i in k + 1..=hi {
            let o = self.offset(i, k);
            self.data[o] = 0.0;
        }
        let o = self.offset(k, k);
        self.data[o] = 1.0;
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.n);
        let mut y = vec![0.0; self.n];
        for i in 0..self.n {
            let lo = i.saturating_sub(self.bw);
            let row = &self.data[self.offset(i, lo)..=self.offset(i, i)];
            let mut acc = row[row.len() - 1] * x[i];
            for (t, &a) in row[..row.len() - 1].iter().enumerate() {
                let j = lo + t;
                acc += a * x[j];
                y[j] += a * x[i];
            }
            y[i] += acc;
        }
        y
    }

    /// Nonzero entries of the lower triangle as `(row, col, value)`.
    pub fn lower_triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.n).flat_map(move |i| {
            (i.saturating_sub(self.bw)..=i).filter_map(move |j| {
                let v = self.data[self.offset(i, j)];
                (v != 0.0).then_some((i, j, v))
            })
        })
    }

    /// Zeroes every entry, keeping the allocation.
    pub fn clear(&mut self) {
        self.data.fill(0.0);
    }

    /// Cholesky factorization `A = L L^T`, in place.
    ///
    /// A pivot that is not finite or falls below `1e-12` of the original
    /// diagonal entry is reported as [`FemError::SingularSystem`].
    pub fn factorize(mut self) -> Result<BandedCholesky, FemError> {
        let (n, bw) = (self.n, self.bw);
        let w = bw + 1 + PAD;
        let data = &mut self.data;
        // base offset of row i: entry (i, k) lives at base(i) + k
        let base = |i: usize| i * w + bw + PAD - i;
        // Rows go in blocks of BLOCK so each earlier row j is streamed once
        // per block. All rows of a block start at the first row's band
        // column; the extra leading entries of later rows are padding zeros,
        // so their dot products and updates stay exactly zero.
        let mut i0 = 0;
        while i0 < n {
            let nb = BLOCK.min(n - i0);
            let lo0 = i0.saturating_sub(bw);
            let bases: [usize; BLOCK] = std::array::from_fn(|r| base(i0 + r));
            for j in lo0..i0 {
                let bj = base(j);
                let ljj = data[bj + j];
                let b = &data[bj + lo0..bj + j];
                if nb == BLOCK {
                    let rows: [&[f64]; BLOCK] =
                        std::array::from_fn(|r| &data[bases[r] + lo0..bases[r] + j]);
                    let sums = dot_block(rows, b);
                    for r in 0..BLOCK {
                        let o = bases[r] + j;
                        data[o] = (data[o] - sums[r]) / ljj;
                    }
                } else {
                    for r in 0..nb {
                        let s = dot(&data[bases[r] + lo0..bases[r] + j], &data[bj + lo0..bj + j]);
                        let o = bases[r] + j;
                        data[o] = (data[o] - s) / ljj;
                    }
                }
            }
            // triangle inside the block
            for r in 0..nb {
                let i = i0 + r;
                let bi = bases[r];
                for j in i0..=i {
                    let bj = base(j);
                    let s = dot(&data[bi + lo0..bi + j], &data[bj + lo0..bj + j]);
                    let o = bi + j;
                    if j < i {
                        data[o] = (data[o] - s) / data[bj + j];
                    } else {
                        let orig = data[o];
                        let d = orig - s;
                        if !d.is_finite() || d <= 0.0 || d <= 1e-12 * orig.abs() {
                            return Err(FemError::SingularSystem { dof: i });
                        }
                        data[o] = d.sqrt();
                    }
                }
            }
            i0 += nb;
        }
        Ok(BandedCholesky { factor: self })
    }
}

const BLOCK: usize = 4;
const PAD: usize = BLOCK - 1;

/// Dot products of four equal-length rows against one shared vector.
#[inline]
fn dot_block(rows: [&[f64]; BLOCK], b: &[f64]) -> [f64; BLOCK] {
    let n = b.len();
    let [r0, r1, r2, r3] = rows;
    let (r0, r1, r2, r3) = (&r0[..n], &r1[..n], &r2[..n], &r3[..n]);
    let mut acc = [[0.0f64; 4]; BLOCK];
    for ((((x, a0), a1), a2), a3) in b
        .chunks_exact(4)
        .zip(r0.chunks_exact(4))
        .zip(r1.chunks_exact(4))
        .zip(r2.chunks_exact(4))
        .zip(r3.chunks_exact(4))
    {
        for l in 0..4 {
            acc[0][l] += a0[l] * x[l];
            acc[1][l] += a1[l] * x[l];
            acc[2][l] += a2[l] * x[l];
            acc[3][l] += a3[l] * x[l];
        }
    }
    let tail = n - n % 4;
    let mut out = [0.0; BLOCK];
    for (r, row) in [r0, r1, r2, r3].iter().enumerate() {
        let mut s = (acc[r][0] + acc[r][1]) + (acc[r][2] + acc[r][3]);
        for t in tail..n {
            s += row[t] * b[t];
        }
        out[r] = s;
    }
    out
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len();
    let b = &b[..n];
    // four independent accumulators let the compiler vectorize
    let mut acc = [0.0f64; 4];
    for (x, y) in a.chunks_exact(4).zip(b.chunks_exact(4)) {
        for l in 0..4 {
            acc[l] += x[l] * y[l];
        }
    }
    let tail = n - n % 4;
    let mut s = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for t in tail..n {
        s += a[t] * b[t];
    }
    s
}

#[derive(Debug, Clone)]
pub struct BandedCholesky {
    factor: BandedMatrix,
}

impl BandedCholesky {
    /// Gives the storage back for reuse.
    pub fn into_storage(self) -> BandedMatrix {
        self.factor
    }

    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let m = &self.factor;
        let (n, bw) = (m.n, m.bw);
        assert_eq!(rhs.len(), n);
        let mut x = rhs.to_vec();
        // L z = b
        for i in 0..n {
            let lo = i.saturating_sub(bw);
            let row = &m.data[m.offset(i, lo)..m.offset(i, i)];
            let s = dot(row, &x[lo..i]);
            x[i] = (x[i] - s) / m.data[m.offset(i, i)];
        }
        // L^T x = z
        for i in (0..n).rev() {
            x[i] /= m.data[m.offset(i, i)];
            let xi = x[i];
            let lo = i.saturating_sub(bw);
            let row = &m.data[m.offset(i, lo)..m.offset(i, i)];
            for (t, &l) in row.iter().enumerate() {
                x[lo + t] -= l * xi;
            }
        }
        x
    }
}

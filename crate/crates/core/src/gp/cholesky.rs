use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// First non-zero jitter, as a fraction of the signal variance.
pub const JITTER_RELATIVE_START: f64 = 1e-8;
/// Largest relative jitter tried before giving up.
pub const JITTER_MAX: f64 = 1e-2;
/// Pivots below this fraction of the original diagonal entry are treated as
/// numerically singular.
pub const PIVOT_TOLERANCE: f64 = 1e-10;

/// Lower-triangular Cholesky factor stored packed by rows.
///
/// Row `i` occupies `i + 1` contiguous entries, so forward substitution walks
/// memory linearly and appending a row for a new observation is amortized
/// O(n).
#[derive(Debug, Clone, PartialEq)]
pub struct PackedCholesky {
    n: usize,
    data: Vec<f64>,
}

#[inline]
fn row_start(i: usize) -> usize {
    i * (i + 1) / 2
}

/// Dot product with four independent accumulators so the loop vectorizes.
#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().min(b.len());
    let (a, b) = (&a[..n], &b[..n]);
    let mut acc = [0.0; 4];
    let mut ca = a.chunks_exact(4);
    let mut cb = b.chunks_exact(4);
    for (x, y) in (&mut ca).zip(&mut cb) {
        acc[0] += x[0] * y[0];
        acc[1] += x[1] * y[1];
        acc[2] += x[2] * y[2];
        acc[3] += x[3] * y[3];
    }
    let tail: f64 = ca.remainder().iter().zip(cb.remainder()).map(|(x, y)| x * y).sum();
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

impl PackedCholesky {
    pub fn empty() -> Self {
        Self { n: 0, data: Vec::new() }
    }

    /// Factor the symmetric matrix given by `entry(i, j)` (only `j <= i` is
    /// queried). Returns `None` when a pivot is not safely positive.
    pub fn factor(n: usize, entry: impl Fn(usize, usize) -> f64) -> Option<Self> {
        let mut data = vec![0.0; row_start(n)];
        for i in 0..n {
            let ri = row_start(i);
            for j in 0..=i {
                let rj = row_start(j);
                let (head, tail) = data.split_at(ri);
                let prev = if j < i { &head[rj..rj + j] } else { &tail[..j] };
                let s = entry(i, j) - dot(&tail[..j], prev);
                if i == j {
                    let a_ii = entry(i, i);
                    if !s.is_finite() || s <= PIVOT_TOLERANCE * a_ii.abs() {
                        return None;
                    }
                    data[ri + i] = s.sqrt();
                } else {
                    data[ri + j] = s / data[rj + j];
                }
            }
        }
        Some(Self { n, data })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        debug_assert!(j <= i);
        self.data[row_start(i) + j]
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[row_start(i)..row_start(i) + i + 1]
    }

    pub fn diagonal(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n).map(move |i| self.get(i, i))
    }

    /// Solve `L x = b` in place.
    pub fn solve_lower_in_place(&self, b: &mut [f64]) {
        debug_assert_eq!(b.len(), self.n);
        for i in 0..self.n {
            let row = self.row(i);
            b[i] = (b[i] - dot(&row[..i], &b[..i])) / row[i];
        }
    }

    /// Solve `Lᵀ x = b` in place.
    pub fn solve_upper_in_place(&self, b: &mut [f64]) {
        debug_assert_eq!(b.len(), self.n);
        for i in (0..self.n).rev() {
            let row = self.row(i);
            let xi = b[i] / row[i];
            b[i] = xi;
            for (bj, l) in b[..i].iter_mut().zip(&row[..i]) {
                *bj -= l * xi;
            }
        }
    }

    /// Solve `(L Lᵀ) x = b`.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        self.solve_lower_in_place(&mut x);
        self.solve_upper_in_place(&mut x);
        x
    }

    /// Append a row `[l, diag]`, extending the factor by one dimension.
    pub fn push_row(&mut self, l: &[f64], diag: f64) {
        debug_assert_eq!(l.len(), self.n);
        self.data.extend_from_slice(l);
        self.data.push(diag);
        self.n += 1;
    }

    /// `Σ log L_ii`, i.e. half the log-determinant of `L Lᵀ`.
    pub fn half_log_det(&self) -> f64 {
        self.diagonal().map(f64::ln).sum()
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.n, self.n, |i, j| if j <= i { self.get(i, j) } else { 0.0 })
    }

    /// Dense inverse of `L Lᵀ`.
    pub fn inverse(&self) -> DMatrix<f64> {
        let n = self.n;
        let packed = self.inverse_packed();
        DMatrix::from_fn(n, n, |i, j| {
            let (a, b) = if i >= j { (i, j) } else { (j, i) };
            packed[a * (a + 1) / 2 + b]
        })
    }

    /// Lower triangle of `(L Lᵀ)⁻¹`, packed by rows like the factor.
    pub fn inverse_packed(&self) -> Vec<f64> {
        let n = self.n;
        // Row c of `t` holds column c of L⁻¹ from index c on.
        let mut t = vec![0.0; n * n];
        for c in 0..n {
            let col = &mut t[c * n..(c + 1) * n];
            col[c] = 1.0 / self.row(c)[c];
            for i in c + 1..n {
                let row = self.row(i);
                col[i] = -dot(&row[c..i], &col[c..i]) / row[i];
            }
        }
        let mut out = vec![0.0; n * (n + 1) / 2];
        for i in 0..n {
            let ti = &t[i * n + i..(i + 1) * n];
            for j in 0..=i {
                let tj = &t[j * n + i..(j + 1) * n];
                out[i * (i + 1) / 2 + j] = dot(ti, tj);
            }
        }
        out
    }
}

/// Factor `entry(i, j) + jitter·δ_ij`, escalating the jitter on failure.
///
/// The first attempt uses no jitter; subsequent attempts use
/// `JITTER_RELATIVE_START · scale`, growing ×10 up to `JITTER_MAX · scale`.
/// Returns the factor together with the absolute jitter that was applied.
pub fn factor_with_jitter(n: usize, scale: f64, entry: impl Fn(usize, usize) -> f64) -> Result<(PackedCholesky, f64)> {
    factor_from_jitter(n, scale, 0.0, entry)
}

/// Like [`factor_with_jitter`] but starting the escalation at `min_jitter`.
pub(crate) fn factor_from_jitter(
    n: usize,
    scale: f64,
    min_jitter: f64,
    entry: impl Fn(usize, usize) -> f64,
) -> Result<(PackedCholesky, f64)> {
    let mut relative = if min_jitter > 0.0 { min_jitter / scale } else { 0.0 };
    loop {
        let jitter = relative * scale;
        let attempt = PackedCholesky::factor(n, |i, j| if i == j { entry(i, j) + jitter } else { entry(i, j) });
        if let Some(l) = attempt {
            return Ok((l, jitter));
        }
        relative = if relative == 0.0 {
            JITTER_RELATIVE_START
        } else {
            relative * 10.0
        };
        if relative > JITTER_MAX * (1.0 + 1e-9) {
            return Err(Error::Factorization {
                jitter: (relative / 10.0) * scale,
            });
        }
    }
}

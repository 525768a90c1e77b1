//! Dense symmetric helpers and a banded Cholesky factorization.
//!
//! Everything in the solver works with small dense symmetric blocks
//! (`nalgebra::DMatrix<f64>`); the one large matrix per Newton step is the
//! reduced system, which is banded for time-chained problems and handled by
//! [`SymBandMatrix`].

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Symmetrize in place: `m <- (m + m^T)/2`.
pub fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    debug_assert_eq!(n, m.ncols());
    for i in 0..n {
        for j in (i + 1)..n {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}

/// Returns `(m + m^T)/2` without mutating the input.
pub fn symmetric_part(m: &DMatrix<f64>) -> DMatrix<f64> {
    let mut s = m.clone();
    symmetrize(&mut s);
    s
}

pub fn is_symmetric(m: &DMatrix<f64>, tol: f64) -> bool {
    if m.nrows() != m.ncols() {
        return false;
    }
    let scale = 1.0 + m.amax();
    for i in 0..m.nrows() {
        for j in (i + 1)..m.ncols() {
            if (m[(i, j)] - m[(j, i)]).abs() > tol * scale {
                return false;
            }
        }
    }
    true
}

/// Frobenius inner product `<a, b> = Tr(a^T b)`.
pub fn frob_dot(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    debug_assert_eq!(a.shape(), b.shape());
    a.iter().zip(b.iter()).map(|(x, y)| x * y).sum()
}

pub fn frob_norm(a: &DMatrix<f64>) -> f64 {
    a.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Eigenvalues and eigenvectors of a symmetric matrix, sorted by eigenvalue
/// (descending). Eigenvector signs are normalized so the entry of largest
/// magnitude is positive, which keeps factorizations deterministic.
pub fn sym_eigen_sorted(m: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let n = m.nrows();
    let eig = symmetric_part(m).symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .partial_cmp(&eig.eigenvalues[a])
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let mut values = Vec::with_capacity(n);
    let mut vectors = DMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        values.push(eig.eigenvalues[src]);
        let col = eig.eigenvectors.column(src);
        let mut lead = 0;
        for i in 1..n {
            if col[i].abs() > col[lead].abs() {
                lead = i;
            }
        }
        let sign = if col[lead] < 0.0 { -1.0 } else { 1.0 };
        for i in 0..n {
            vectors[(i, dst)] = sign * col[i];
        }
    }
    (values, vectors)
}

/// Smallest eigenvalue of a symmetric matrix.
pub fn min_eig(m: &DMatrix<f64>) -> f64 {
    symmetric_part(m)
        .symmetric_eigen()
        .eigenvalues
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min)
}

/// Largest eigenvalue of a symmetric matrix.
pub fn max_eig(m: &DMatrix<f64>) -> f64 {
    symmetric_part(m)
        .symmetric_eigen()
        .eigenvalues
        .iter()
        .cloned()
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Cholesky factor of a symmetric positive definite matrix.
pub fn cholesky(m: &DMatrix<f64>, what: &str) -> Result<nalgebra::Cholesky<f64, nalgebra::Dyn>> {
    symmetric_part(m)
        .cholesky()
        .ok_or_else(|| Error::NotPositiveDefinite(what.to_string()))
}

/// `log det m` for symmetric positive definite `m`.
pub fn logdet_pd(m: &DMatrix<f64>, what: &str) -> Result<f64> {
    let chol = cholesky(m, what)?;
    Ok(2.0 * chol.l().diagonal().iter().map(|d| d.ln()).sum::<f64>())
}

/// Inverse of a symmetric positive definite matrix, symmetrized.
pub fn inv_pd(m: &DMatrix<f64>, what: &str) -> Result<DMatrix<f64>> {
    let mut inv = cholesky(m, what)?.inverse();
    symmetrize(&mut inv);
    Ok(inv)
}

/// Symmetric square root of a PSD matrix (eigenvalues clipped at zero).
pub fn sqrt_psd(m: &DMatrix<f64>) -> DMatrix<f64> {
    let (vals, q) = sym_eigen_sorted(m);
    let d = DMatrix::from_diagonal(&DVector::from_iterator(
        vals.len(),
        vals.iter().map(|&v| v.max(0.0).sqrt()),
    ));
    let mut r = &q * d * q.transpose();
    symmetrize(&mut r);
    r
}

/// Checks `m` is PD with margin; error message names `what`.
pub fn require_pd(m: &DMatrix<f64>, what: &str) -> Result<()> {
    if !is_symmetric(m, 1e-10) {
        return Err(Error::NotPositiveDefinite(format!("{what}: not symmetric")));
    }
    if min_eig(m) <= 0.0 {
        return Err(Error::NotPositiveDefinite(what.to_string()));
    }
    Ok(())
}

/// Checks `m` is PSD up to `-tol` on the smallest eigenvalue.
pub fn require_psd(m: &DMatrix<f64>, tol: f64, what: &str) -> Result<()> {
    if !is_symmetric(m, 1e-10) {
        return Err(Error::NotPositiveDefinite(format!("{what}: not symmetric")));
    }
    let lo = min_eig(m);
    if lo < -tol {
        return Err(Error::NotPositiveDefinite(format!(
            "{what}: min eigenvalue {lo:.3e}"
        )));
    }
    Ok(())
}

/// Symmetric banded matrix stored by column: `data[j * (bw + 1) + d]` holds
/// entry `(j + d, j)` for `d = 0..=bw`. Only the lower band is kept.
#[derive(Clone, Debug)]
pub struct SymBandMatrix {
    n: usize,
    bw: usize,
    data: Vec<f64>,
}

impl SymBandMatrix {
    pub fn zeros(n: usize, bw: usize) -> Self {
        SymBandMatrix {
            n,
            bw,
            data: vec![0.0; n * (bw + 1)],
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn bandwidth(&self) -> usize {
        self.bw
    }

    /// Adds `v` at `(i, j)`; only lower-triangle coordinates within the band
    /// are representable.
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let (r, c) = if i >= j { (i, j) } else { (j, i) };
        debug_assert!(r - c <= self.bw, "entry ({i},{j}) outside band {}", self.bw);
        self.data[c * (self.bw + 1) + (r - c)] += v;
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (r, c) = if i >= j { (i, j) } else { (j, i) };
        if r - c > self.bw {
            return 0.0;
        }
        self.data[c * (self.bw + 1) + (r - c)]
    }

    pub fn add_diagonal(&mut self, v: f64) {
        for j in 0..self.n {
            self.data[j * (self.bw + 1)] += v;
        }
    }

    /// `y = M x` using the symmetric band.
    pub fn matvec(&self, x: &DVector<f64>) -> DVector<f64> {
        let mut y = DVector::zeros(self.n);
        for j in 0..self.n {
            let base = j * (self.bw + 1);
            y[j] += self.data[base] * x[j];
            let top = (j + self.bw).min(self.n - 1);
            for i in (j + 1)..=top {
                let v = self.data[base + (i - j)];
                y[i] += v * x[j];
                y[j] += v * x[i];
            }
        }
        y
    }

    /// In-place banded Cholesky (right-looking). Fails on a non-positive
    /// pivot.
    pub fn cholesky_in_place(&mut self) -> Result<()> {
        let bw = self.bw;
        for j in 0..self.n {
            let base = j * (bw + 1);
            let pivot = self.data[base];
            if pivot <= 0.0 || !pivot.is_finite() {
                return Err(Error::Numerical(format!(
                    "banded Cholesky pivot {pivot:.3e} at column {j}"
                )));
            }
            let d = pivot.sqrt();
            self.data[base] = d;
            let top = (j + bw).min(self.n - 1);
            for i in (j + 1)..=top {
                self.data[base + (i - j)] /= d;
            }
            for k in (j + 1)..=top {
                let ljk = self.data[base + (k - j)];
                if ljk == 0.0 {
                    continue;
                }
                let kbase = k * (bw + 1);
                for i in k..=top {
                    self.data[kbase + (i - k)] -= self.data[base + (i - j)] * ljk;
                }
            }
        }
        Ok(())
    }

    /// Solves `M x = b` given that `cholesky_in_place` has run.
    pub fn solve_factored(&self, b: &DVector<f64>) -> DVector<f64> {
        let bw = self.bw;
        let n = self.n;
        let mut x = b.clone();
        // L y = b
        for j in 0..n {
            let base = j * (bw + 1);
            x[j] /= self.data[base];
            let top = (j + bw).min(n - 1);
            for i in (j + 1)..=top {
                x[i] -= self.data[base + (i - j)] * x[j];
            }
        }
        // L^T x = y
        for j in (0..n).rev() {
            let base = j * (bw + 1);
            let top = (j + bw).min(n - 1);
            let mut acc = x[j];
            for i in (j + 1)..=top {
                acc -= self.data[base + (i - j)] * x[i];
            }
            x[j] = acc / self.data[base];
        }
        x
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn random_spd(n: usize, seed: u64) -> DMatrix<f64> {
        // Simple LCG so the test has no RNG dependency.
        let mut s = seed.wrapping_mul(6364136223846793005).wrapping_add(1);
        let mut next = || {
            s = s
                .wrapping_mul(6364136223846793005)
                .wrapping_add(1442695040888963407);
            ((s >> 11) as f64 / (1u64 << 53) as f64) - 0.5
        };
        let g = DMatrix::from_fn(n, n, |_, _| next());
        &g * g.transpose() + DMatrix::identity(n, n) * (n as f64)
    }

    #[test]
    fn banded_cholesky_matches_dense() {
        let n = 12;
        let bw = 3;
        let dense = {
            let full = random_spd(n, 7);
            let mut m = DMatrix::zeros(n, n);
            for i in 0..n {
                for j in 0..n {
                    if i.abs_diff(j) <= bw {
                        m[(i, j)] = full[(i, j)];
                    }
                }
            }
            // Keep the banded restriction PD.
            m + DMatrix::identity(n, n) * (n as f64)
        };
        let mut band = SymBandMatrix::zeros(n, bw);
        for j in 0..n {
            for i in j..(j + bw + 1).min(n) {
                band.add(i, j, dense[(i, j)]);
            }
        }
        let b = DVector::from_fn(n, |i, _| (i as f64).sin() + 1.0);
        let expect = dense.clone().cholesky().unwrap().solve(&b);
        let y = band.matvec(&b);
        let y_dense = &dense * &b;
        assert!((y - y_dense).amax() < 1e-12);
        let mut fac = band.clone();
        fac.cholesky_in_place().unwrap();
        let got = fac.solve_factored(&b);
        assert!((got - expect).amax() < 1e-10);
    }

    #[test]
    fn eigen_sorted_descending_and_orthonormal() {
        let m = random_spd(5, 3);
        let (vals, q) = sym_eigen_sorted(&m);
        for w in vals.windows(2) {
            assert!(w[0] >= w[1]);
        }
        let qtq = q.transpose() * &q;
        assert!((qtq - DMatrix::identity(5, 5)).amax() < 1e-12);
        let rebuilt = &q * DMatrix::from_diagonal(&DVector::from_vec(vals.clone())) * q.transpose();
        assert!((rebuilt - m).amax() < 1e-10);
    }

    #[test]
    fn inv_and_logdet_consistency() {
        let m = random_spd(4, 11);
        let inv = inv_pd(&m, "m").unwrap();
        assert!(((&m * &inv) - DMatrix::identity(4, 4)).amax() < 1e-10);
        let ld = logdet_pd(&m, "m").unwrap();
        assert!((ld - m.determinant().ln()).abs() < 1e-9);
    }
}

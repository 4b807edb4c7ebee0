//! Tridiagonal matrices: products, the Thomas direct solve and symmetric spectra.

use std::f64::consts::PI;

use crate::error::{check_len, Error, Result};

/// Square tridiagonal matrix stored by its three diagonals.
///
/// `sub[i]` sits at row `i + 1`, column `i`; `sup[i]` at row `i`, column `i + 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct TriDiag {
    sub: Vec<f64>,
    diag: Vec<f64>,
    sup: Vec<f64>,
}

impl TriDiag {
    pub fn new(sub: Vec<f64>, diag: Vec<f64>, sup: Vec<f64>) -> Result<Self> {
        let n = diag.len();
        if n == 0 {
            return Err(Error::InvalidInput("tridiagonal dimension must be at least 1".into()));
        }
        check_len(n - 1, sub.len())?;
        check_len(n - 1, sup.len())?;
        Ok(Self { sub, diag, sup })
    }

    /// Constant-coefficient symmetric matrix with diagonal `d` and off-diagonals `o`.
    pub fn symmetric_constant(n: usize, d: f64, o: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidInput("tridiagonal dimension must be at least 1".into()));
        }
        Ok(Self {
            sub: vec![o; n - 1],
            diag: vec![d; n],
            sup: vec![o; n - 1],
        })
    }

    pub fn identity(n: usize) -> Result<Self> {
        Self::symmetric_constant(n, 1.0, 0.0)
    }

    pub fn n(&self) -> usize {
        self.diag.len()
    }

    pub fn sub(&self) -> &[f64] {
        &self.sub
    }

    pub fn diag(&self) -> &[f64] {
        &self.diag
    }

    pub fn sup(&self) -> &[f64] {
        &self.sup
    }

    /// Entry `(row, col)`; zero outside the band.
    pub fn get(&self, row: usize, col: usize) -> f64 {
        if row == col {
            self.diag[row]
        } else if row == col + 1 {
            self.sub[col]
        } else if col == row + 1 {
            self.sup[row]
        } else {
            0.0
        }
    }

    pub fn is_symmetric(&self) -> bool {
        self.sub == self.sup
    }

    /// Strict row diagonal dominance: `|d_i| > |sub_{i-1}| + |sup_i|` for every row.
    pub fn is_strictly_diagonally_dominant(&self) -> bool {
        (0..self.n()).all(|i| {
            let left = if i > 0 { self.sub[i - 1].abs() } else { 0.0 };
            let right = if i + 1 < self.n() { self.sup[i].abs() } else { 0.0 };
            self.diag[i].abs() > left + right
        })
    }

    /// Elementwise sum of two matrices of equal dimension.
    pub fn add(&self, other: &TriDiag) -> Result<TriDiag> {
        check_len(self.n(), other.n())?;
        let zip = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x + y).collect();
        Ok(TriDiag {
            sub: zip(&self.sub, &other.sub),
            diag: zip(&self.diag, &other.diag),
            sup: zip(&self.sup, &other.sup),
        })
    }

    pub fn matvec(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut y = vec![0.0; self.n()];
        self.matvec_into(x, &mut y)?;
        Ok(y)
    }

    /// `y = M x` without allocating.
    pub fn matvec_into(&self, x: &[f64], y: &mut [f64]) -> Result<()> {
        let n = self.n();
        check_len(n, x.len())?;
        check_len(n, y.len())?;
        for i in 0..n {
            let mut acc = self.diag[i] * x[i];
            if i > 0 {
                acc += self.sub[i - 1] * x[i - 1];
            }
            if i + 1 < n {
                acc += self.sup[i] * x[i + 1];
            }
            y[i] = acc;
        }
        Ok(())
    }

    /// Thomas algorithm (tridiagonal Gaussian elimination, no pivoting).
    ///
    /// Stable for strictly diagonally dominant matrices, which covers every
    /// Crank-Nicolson system built by this crate.
    pub fn thomas_solve(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        let n = self.n();
        check_len(n, rhs.len())?;

        let mut c_prime = vec![0.0; n];
        let mut d_prime = vec![0.0; n];

        let mut pivot = self.diag[0];
        if pivot == 0.0 || !pivot.is_finite() {
            return Err(Error::Singular { row: 0 });
        }
        if n > 1 {
            c_prime[0] = self.sup[0] / pivot;
        }
        d_prime[0] = rhs[0] / pivot;

        for i in 1..n {
            pivot = self.diag[i] - self.sub[i - 1] * c_prime[i - 1];
            if pivot == 0.0 || !pivot.is_finite() {
                return Err(Error::Singular { row: i });
            }
            if i + 1 < n {
                c_prime[i] = self.sup[i] / pivot;
            }
            d_prime[i] = (rhs[i] - self.sub[i - 1] * d_prime[i - 1]) / pivot;
        }

        let mut x = d_prime;
        for i in (0..n - 1).rev() {
            x[i] -= c_prime[i] * x[i + 1];
        }
        Ok(x)
    }

    /// Eigenvalues of a symmetric tridiagonal matrix, ascending.
    ///
    /// Constant-coefficient matrices use the closed form
    /// `d + 2 o cos(k pi / (n + 1))`; anything else goes through Sturm-sequence
    /// bisection.
    pub fn spectrum(&self) -> Result<Spectrum> {
        if !self.is_symmetric() {
            return Err(Error::Unsupported(
                "spectrum is only implemented for symmetric tridiagonal matrices".into(),
            ));
        }
        let n = self.n();
        let mut eigenvalues = if let Some((d, o)) = self.constant_coefficients() {
            (1..=n)
                .map(|k| d + 2.0 * o * (k as f64 * PI / (n + 1) as f64).cos())
                .collect::<Vec<_>>()
        } else {
            (0..n).map(|k| self.bisect_eigenvalue(k)).collect()
        };
        eigenvalues.sort_by(f64::total_cmp);
        Ok(Spectrum::from_sorted(eigenvalues))
    }

    fn constant_coefficients(&self) -> Option<(f64, f64)> {
        let d = self.diag[0];
        let o = self.sub.first().copied().unwrap_or(0.0);
        let constant = self.diag.iter().all(|&v| v == d) && self.sub.iter().all(|&v| v == o);
        constant.then_some((d, o))
    }

    /// Number of eigenvalues strictly below `x` (Sturm count via LDL^T pivots).
    fn count_below(&self, x: f64) -> usize {
        let mut count = 0;
        let mut q = self.diag[0] - x;
        for i in 0..self.n() {
            if i > 0 {
                let prev = if q == 0.0 { f64::EPSILON * (1.0 + x.abs()) } else { q };
                q = self.diag[i] - x - self.sub[i - 1] * self.sub[i - 1] / prev;
            }
            if q < 0.0 {
                count += 1;
            }
        }
        count
    }

    /// The `k`-th smallest eigenvalue (0-based), bisection to 1e-12.
    fn bisect_eigenvalue(&self, k: usize) -> f64 {
        let n = self.n();
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for i in 0..n {
            let left = if i > 0 { self.sub[i - 1].abs() } else { 0.0 };
            let right = if i + 1 < n { self.sup[i].abs() } else { 0.0 };
            lo = lo.min(self.diag[i] - left - right);
            hi = hi.max(self.diag[i] + left + right);
        }
        for _ in 0..200 {
            let scale = 1.0_f64.max(lo.abs()).max(hi.abs());
            if hi - lo <= 1e-12 * scale {
                break;
            }
            let mid = 0.5 * (lo + hi);
            if self.count_below(mid) > k {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        0.5 * (lo + hi)
    }
}

/// Eigenvalues of a matrix, sorted by ascending real part.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    pub eigenvalues: Vec<f64>,
    pub min_real: f64,
}

impl Spectrum {
    fn from_sorted(eigenvalues: Vec<f64>) -> Self {
        let min_real = eigenvalues[0];
        Self { eigenvalues, min_real }
    }

    pub fn max_real(&self) -> f64 {
        *self.eigenvalues.last().expect("spectrum is never empty")
    }

    /// `inf Re(sigma(A)) > 0`, the hypothesis under which the products
    /// `prod (I - A/j)` decay.
    pub fn satisfies_spectral_condition(&self) -> bool {
        self.min_real > 0.0
    }
}

//! Tridiagonal matrices with optional periodic corner entries.

use crate::error::{Error, Result};

/// Row `i` holds `lower[i]` at column `i-1`, `diag[i]` at `i` and `upper[i]`
/// at `i+1`. With `cyclic` set, column indices wrap around, so `lower[0]`
/// sits at column `n-1` and `upper[n-1]` at column `0`; otherwise those two
/// entries are zero.
#[derive(Debug, Clone, PartialEq)]
pub struct Tridiagonal {
    pub lower: Vec<f64>,
    pub diag: Vec<f64>,
    pub upper: Vec<f64>,
    pub cyclic: bool,
}

impl Tridiagonal {
    pub fn zeros(n: usize, cyclic: bool) -> Self {
        Self {
            lower: vec![0.0; n],
            diag: vec![0.0; n],
            upper: vec![0.0; n],
            cyclic,
        }
    }

    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    /// `y = A x`.
    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        let n = self.len();
        for i in 0..n {
            let mut acc = self.diag[i] * x[i];
            if i > 0 {
                acc += self.lower[i] * x[i - 1];
            } else if self.cyclic {
                acc += self.lower[0] * x[n - 1];
            }
            if i + 1 < n {
                acc += self.upper[i] * x[i + 1];
            } else if self.cyclic {
                acc += self.upper[n - 1] * x[0];
            }
            y[i] = acc;
        }
    }

    /// `I + scale * A`.
    pub fn shifted_identity(&self, scale: f64) -> Self {
        Self {
            lower: self.lower.iter().map(|v| scale * v).collect(),
            diag: self.diag.iter().map(|v| 1.0 + scale * v).collect(),
            upper: self.upper.iter().map(|v| scale * v).collect(),
            cyclic: self.cyclic,
        }
    }

    /// Sum of each column.
    pub fn column_sums(&self) -> Vec<f64> {
        let n = self.len();
        let mut sums = self.diag.clone();
        for i in 0..n {
            if i > 0 {
                sums[i - 1] += self.lower[i];
            } else if self.cyclic {
                sums[n - 1] += self.lower[0];
            }
            if i + 1 < n {
                sums[i + 1] += self.upper[i];
            } else if self.cyclic {
                sums[0] += self.upper[n - 1];
            }
        }
        sums
    }

    /// Dense copy, row-major.
    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let n = self.len();
        let mut m = vec![vec![0.0; n]; n];
        for i in 0..n {
            m[i][i] += self.diag[i];
            if i > 0 {
                m[i][i - 1] += self.lower[i];
            } else if self.cyclic {
                m[0][n - 1] += self.lower[0];
            }
            if i + 1 < n {
                m[i][i + 1] += self.upper[i];
            } else if self.cyclic {
                m[n - 1][0] += self.upper[n - 1];
            }
        }
        m
    }

    pub fn factor(&self) -> Result<TridiagonalFactor> {
        TridiagonalFactor::new(self)
    }
}

/// Thomas elimination of the non-cyclic part.
#[derive(Debug, Clone)]
struct Thomas {
    lower: Vec<f64>,
    c_prime: Vec<f64>,
    denom: Vec<f64>,
}

impl Thomas {
    fn new(lower: &[f64], diag: &[f64], upper: &[f64]) -> Result<Self> {
        let n = diag.len();
        let mut c_prime = vec![0.0; n];
        let mut denom = vec![0.0; n];
        for i in 0..n {
            let d = if i == 0 {
                diag[0]
            } else {
                diag[i] - lower[i] * c_prime[i - 1]
            };
            if d.abs() < 1e-300 || !d.is_finite() {
                return Err(Error::Numerical(format!(
                    "singular tridiagonal system: pivot {d} at row {i}"
                )));
            }
            denom[i] = d;
            c_prime[i] = if i + 1 < n { upper[i] / d } else { 0.0 };
        }
        Ok(Self {
            lower: lower.to_vec(),
            c_prime,
            denom,
        })
    }

    fn solve_in_place(&self, rhs: &mut [f64]) {
        let n = rhs.len();
        rhs[0] /= self.denom[0];
        for i in 1..n {
            rhs[i] = (rhs[i] - self.lower[i] * rhs[i - 1]) / self.denom[i];
        }
        for i in (0..n - 1).rev() {
            rhs[i] -= self.c_prime[i] * rhs[i + 1];
        }
    }
}

/// Reusable factorization; cyclic systems go through Sherman–Morrison.
#[derive(Debug, Clone)]
pub struct TridiagonalFactor {
    thomas: Thomas,
    // cyclic correction: x = y - (v·y)/(1 + v·z) z
    correction: Option<(Vec<f64>, f64, f64)>,
}

impl TridiagonalFactor {
    fn new(m: &Tridiagonal) -> Result<Self> {
        let n = m.len();
        if n < 3 {
            return Err(Error::Dimension(
                "tridiagonal system needs at least 3 rows".into(),
            ));
        }
        if !m.cyclic {
            return Ok(Self {
                thomas: Thomas::new(&m.lower, &m.diag, &m.upper)?,
                correction: None,
            });
        }
        let beta = m.lower[0];
        let alpha = m.upper[n - 1];
        let gamma = -m.diag[0];
        let mut diag = m.diag.clone();
        diag[0] -= gamma;
        diag[n - 1] -= alpha * beta / gamma;
        let mut lower = m.lower.clone();
        lower[0] = 0.0;
        let thomas = Thomas::new(&lower, &diag, &m.upper)?;
        let mut z = vec![0.0; n];
        z[0] = gamma;
        z[n - 1] = alpha;
        thomas.solve_in_place(&mut z);
        let v_last = beta / gamma;
        let vz = z[0] + v_last * z[n - 1];
        if (1.0 + vz).abs() < 1e-300 {
            return Err(Error::Numerical(
                "singular cyclic tridiagonal system".into(),
            ));
        }
        Ok(Self {
            thomas,
            correction: Some((z, v_last, 1.0 + vz)),
        })
    }

    pub fn solve_in_place(&self, rhs: &mut [f64]) {
        self.thomas.solve_in_place(rhs);
        if let Some((z, v_last, denom)) = &self.correction {
            let n = rhs.len();
            let factor = (rhs[0] + v_last * rhs[n - 1]) / denom;
            rhs.iter_mut().zip(z).for_each(|(x, zi)| *x -= factor * zi);
        }
    }
}

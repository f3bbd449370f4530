//! Direct solvers for the occupancy systems `(I − P_U) u = b`.
//!
//! [`DenseLu`] is a row-major LU with partial pivoting, generic over
//! [`Scalar`] so the same code runs in `f64` or exact rationals.
//! [`BandedLu`] handles long one-dimensional windows, where `I − P` is a
//! banded nonsingular M-matrix and elimination needs no pivoting.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Dense square matrix, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Matrix<S> {
    n: usize,
    data: Vec<S>,
}

impl<S: Scalar> Matrix<S> {
    pub fn zeros(n: usize) -> Self {
        Matrix { n, data: vec![S::zero(); n * n] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n);
        for i in 0..n {
            m.data[i * n + i] = S::one();
        }
        m
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> &S {
        &self.data[i * self.n + j]
    }

    #[inline]
    pub fn get_mut(&mut self, i: usize, j: usize) -> &mut S {
        &mut self.data[i * self.n + j]
    }

    pub fn mul_vec(&self, x: &[S]) -> Vec<S> {
        (0..self.n)
            .map(|i| {
                (0..self.n).fold(S::zero(), |acc, j| acc + self.get(i, j).clone() * x[j].clone())
            })
            .collect()
    }
}

/// `PA = LU` with unit lower `L`; `perm[i]` is the original row at position `i`.
#[derive(Clone, Debug)]
pub struct DenseLu<S> {
    lu: Matrix<S>,
    perm: Vec<usize>,
}

fn magnitude<S: Scalar>(x: &S) -> f64 {
    x.abs().to_f64_lossy()
}

impl<S: Scalar> DenseLu<S> {
    pub fn factor(mut a: Matrix<S>) -> Result<Self> {
        let n = a.n;
        let mut perm: Vec<usize> = (0..n).collect();
        for k in 0..n {
            // exact scalars only need a nonzero pivot; floats take the largest
            let p = if S::EXACT {
                (k..n).find(|&i| !a.get(i, k).is_zero())
            } else {
                (k..n)
                    .max_by(|&i, &j| magnitude(a.get(i, k)).total_cmp(&magnitude(a.get(j, k))))
                    .filter(|&i| magnitude(a.get(i, k)) > 0.0)
            };
            let Some(p) = p else {
                return Err(Error::Singular { row: k, pivot: 0.0 });
            };
            if p != k {
                for j in 0..n {
                    a.data.swap(k * n + j, p * n + j);
                }
                perm.swap(k, p);
            }
            let pivot = a.get(k, k).clone();
            for i in (k + 1)..n {
                if a.get(i, k).is_zero() {
                    continue;
                }
                let f = a.get(i, k).clone() / pivot.clone();
                for j in (k + 1)..n {
                    let v = a.get(i, j).clone() - f.clone() * a.get(k, j).clone();
                    *a.get_mut(i, j) = v;
                }
                *a.get_mut(i, k) = f;
            }
        }
        Ok(DenseLu { lu: a, perm })
    }

    pub fn n(&self) -> usize {
        self.lu.n
    }

    /// Solve `A x = b`.
    pub fn solve(&self, b: &[S]) -> Vec<S> {
        let n = self.lu.n;
        let mut y: Vec<S> = self.perm.iter().map(|&i| b[i].clone()).collect();
        for i in 0..n {
            for j in 0..i {
                let v = y[i].clone() - self.lu.get(i, j).clone() * y[j].clone();
                y[i] = v;
            }
        }
        for i in (0..n).rev() {
            for j in (i + 1)..n {
                let v = y[i].clone() - self.lu.get(i, j).clone() * y[j].clone();
                y[i] = v;
            }
            y[i] = y[i].clone() / self.lu.get(i, i).clone();
        }
        y
    }

    /// Solve `Aᵀ x = b`.
    pub fn solve_transpose(&self, b: &[S]) -> Vec<S> {
        let n = self.lu.n;
        // Aᵀ = Uᵀ Lᵀ P, so solve Uᵀ z = b, Lᵀ w = z, x = Pᵀ w
        let mut z: Vec<S> = b.to_vec();
        for i in 0..n {
            for j in 0..i {
                let v = z[i].clone() - self.lu.get(j, i).clone() * z[j].clone();
                z[i] = v;
            }
            z[i] = z[i].clone() / self.lu.get(i, i).clone();
        }
        for i in (0..n).rev() {
            for j in (i + 1)..n {
                let v = z[i].clone() - self.lu.get(j, i).clone() * z[j].clone();
                z[i] = v;
            }
        }
        let mut x = vec![S::zero(); n];
        for (pos, &orig) in self.perm.iter().enumerate() {
            x[orig] = z[pos].clone();
        }
        x
    }
}

/// Banded matrix with `lower` sub- and `upper` super-diagonals, LU without pivoting.
#[derive(Clone, Debug)]
pub struct BandedLu<S> {
    n: usize,
    lower: usize,
    upper: usize,
    /// Row `i` stores columns `i − lower ..= i + upper` at offsets `0 ..= lower + upper`.
    band: Vec<S>,
}

impl<S: Scalar> BandedLu<S> {
    pub fn zeros(n: usize, lower: usize, upper: usize) -> Self {
        BandedLu { n, lower, upper, band: vec![S::zero(); n * (lower + upper + 1)] }
    }

    #[inline]
    fn slot(&self, i: usize, j: usize) -> Option<usize> {
        if j + self.lower < i || j > i + self.upper {
            return None;
        }
        Some(i * (self.lower + self.upper + 1) + (j + self.lower - i))
    }

    /// Set an entry inside the band; entries outside the band are rejected.
    pub fn set(&mut self, i: usize, j: usize, v: S) -> Result<()> {
        let s = self
            .slot(i, j)
            .ok_or_else(|| Error::InvalidParams(format!("entry ({i}, {j}) outside the band")))?;
        self.band[s] = v;
        Ok(())
    }

    pub fn get(&self, i: usize, j: usize) -> S {
        self.slot(i, j).map_or(S::zero(), |s| self.band[s].clone())
    }

    /// In-place elimination. Requires nonzero pivots, which holds for
    /// nonsingular M-matrices such as `I − P` with strict exit.
    pub fn factor(mut self) -> Result<Self> {
        let n = self.n;
        for k in 0..n {
            let pivot = self.get(k, k);
            if pivot.is_zero() || (!S::EXACT && magnitude(&pivot) < 1e-300) {
                return Err(Error::Singular { row: k, pivot: pivot.to_f64_lossy() });
            }
            let last_row = (k + self.lower).min(n - 1);
            let last_col = (k + self.upper).min(n - 1);
            for i in (k + 1)..=last_row {
                let s = self.slot(i, k).expect("in band");
                if self.band[s].is_zero() {
                    continue;
                }
                let f = self.band[s].clone() / pivot.clone();
                for j in (k + 1)..=last_col {
                    let akj = self.get(k, j);
                    if let Some(t) = self.slot(i, j) {
                        self.band[t] = self.band[t].clone() - f.clone() * akj;
                    }
                }
                self.band[s] = f;
            }
        }
        Ok(self)
    }

    /// Solve `A x = b` with a factored matrix.
    pub fn solve(&self, b: &[S]) -> Vec<S> {
        let n = self.n;
        let mut y = b.to_vec();
        for i in 0..n {
            for j in i.saturating_sub(self.lower)..i {
                y[i] = y[i].clone() - self.get(i, j) * y[j].clone();
            }
        }
        for i in (0..n).rev() {
            for j in (i + 1)..(i + self.upper + 1).min(n) {
                y[i] = y[i].clone() - self.get(i, j) * y[j].clone();
            }
            y[i] = y[i].clone() / self.get(i, i);
        }
        y
    }

    /// Solve `Aᵀ x = b` with a factored matrix.
    pub fn solve_transpose(&self, b: &[S]) -> Vec<S> {
        let n = self.n;
        let mut z = b.to_vec();
        for i in 0..n {
            for j in i.saturating_sub(self.upper)..i {
                z[i] = z[i].clone() - self.get(j, i) * z[j].clone();
            }
            z[i] = z[i].clone() / self.get(i, i);
        }
        for i in (0..n).rev() {
            for j in (i + 1)..(i + self.lower + 1).min(n) {
                z[i] = z[i].clone() - self.get(j, i) * z[j].clone();
            }
        }
        z
    }
}

//! Dense LU with partial pivoting, sized for desk-scale implicit solves.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{CoreError, Result};
use crate::math;

/// LU factorization PA = LU of a row-major square matrix.
#[derive(Debug, Clone)]
pub struct LuFactors {
    n: usize,
    lu: Vec<f64>,
    perm: Vec<usize>,
}

impl LuFactors {
    pub fn factor(a: &[f64], n: usize) -> Result<Self> {
        if a.len() != n * n {
            return Err(CoreError::Shape {
                expected: n * n,
                got: a.len(),
            });
        }
        let mut lu = a.to_vec();
        let mut perm: Vec<usize> = (0..n).collect();
        for col in 0..n {
            let mut pivot = col;
            let mut best = math::abs(lu[col * n + col]);
            for row in col + 1..n {
                let cand = math::abs(lu[row * n + col]);
                if cand > best {
                    best = cand;
                    pivot = row;
                }
            }
            if best == 0.0 {
                return Err(CoreError::IllConditionedFit {
                    message: alloc::format!("singular matrix at column {col}"),
                });
            }
            if pivot != col {
                for j in 0..n {
                    lu.swap(col * n + j, pivot * n + j);
                }
                perm.swap(col, pivot);
            }
            let d = lu[col * n + col];
            for row in col + 1..n {
                let f = lu[row * n + col] / d;
                lu[row * n + col] = f;
                if f != 0.0 {
                    for j in col + 1..n {
                        lu[row * n + j] -= f * lu[col * n + j];
                    }
                }
            }
        }
        Ok(LuFactors { n, lu, perm })
    }

    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        let n = self.n;
        if b.len() != n {
            return Err(CoreError::Shape {
                expected: n,
                got: b.len(),
            });
        }
        let mut x = vec![0.0f64; n];
        for i in 0..n {
            x[i] = b[self.perm[i]];
        }
        for i in 0..n {
            let mut acc = x[i];
            for j in 0..i {
                acc -= self.lu[i * n + j] * x[j];
            }
            x[i] = acc;
        }
        for i in (0..n).rev() {
            let mut acc = x[i];
            for j in i + 1..n {
                acc -= self.lu[i * n + j] * x[j];
            }
            x[i] = acc / self.lu[i * n + i];
        }
        Ok(x)
    }
}

/// One-shot dense solve.
pub fn solve_dense(a: &[f64], n: usize, b: &[f64]) -> Result<Vec<f64>> {
    LuFactors::factor(a, n)?.solve(b)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_small_system() {
        let a = [4.0, 1.0, 0.0, 1.0, 4.0, 1.0, 0.0, 1.0, 4.0];
        let x_true = [1.0, -2.0, 3.0];
        let mut b = [0.0; 3];
        for i in 0..3 {
            for j in 0..3 {
                b[i] += a[i * 3 + j] * x_true[j];
            }
        }
        let x = solve_dense(&a, 3, &b).unwrap();
        for i in 0..3 {
            assert!(math::abs(x[i] - x_true[i]) < 1e-13);
        }
    }

    #[test]
    fn pivots_on_zero_diagonal() {
        let a = [0.0, 1.0, 1.0, 0.0];
        let x = solve_dense(&a, 2, &[2.0, 3.0]).unwrap();
        assert!(math::abs(x[0] - 3.0) < 1e-15);
        assert!(math::abs(x[1] - 2.0) < 1e-15);
    }

    #[test]
    fn rejects_singular() {
        let a = [1.0, 2.0, 2.0, 4.0];
        assert!(solve_dense(&a, 2, &[1.0, 2.0]).is_err());
    }
}

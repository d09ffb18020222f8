//! Exact linear algebra over the integers and rationals.
//!
//! Systems are reduced with fraction-free (Bareiss) elimination so every
//! intermediate stays an integer; only the final back-substitution leaves
//! the integers.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

pub type Rational = BigRational;

pub fn rat(num: i64, den: i64) -> Rational {
    Rational::new(BigInt::from(num), BigInt::from(den))
}

pub fn rat_int(v: i64) -> Rational {
    Rational::from_integer(BigInt::from(v))
}

pub fn big_pow(base: u64, exp: u32) -> BigInt {
    num_traits::pow(BigInt::from(base), exp as usize)
}

pub fn rational_to_f64(r: &Rational) -> f64 {
    // BigRational::to_f64 handles huge numerators/denominators without overflow.
    r.to_f64().unwrap_or_else(|| {
        let n = r.numer().to_f64().unwrap_or(f64::NAN);
        let d = r.denom().to_f64().unwrap_or(f64::NAN);
        n / d
    })
}

/// Numerator/denominator string pair, denominator positive.
pub fn rational_parts(r: &Rational) -> (String, String) {
    (r.numer().to_string(), r.denom().to_string())
}

/// Solves `a * x = b` for square integer `a` and integer right-hand sides `b`
/// (given column by column as rows of a `rows x cols` matrix). Returns `None`
/// when `a` is singular.
pub fn solve_integer(a: &[Vec<BigInt>], b: &[Vec<BigInt>]) -> Option<Vec<Vec<Rational>>> {
    let n = a.len();
    assert!(a.iter().all(|row| row.len() == n), "matrix must be square");
    assert_eq!(b.len(), n, "right-hand side has wrong row count");
    let m = b.first().map_or(0, Vec::len);
    let width = n + m;
    let mut aug: Vec<Vec<BigInt>> = a
        .iter()
        .zip(b)
        .map(|(ra, rb)| ra.iter().chain(rb.iter()).cloned().collect())
        .collect();

    let mut prev = BigInt::one();
    for k in 0..n {
        let pivot_row = (k..n).find(|&r| !aug[r][k].is_zero())?;
        aug.swap(k, pivot_row);
        for i in (k + 1)..n {
            for j in (k + 1)..width {
                let v = &aug[k][k] * &aug[i][j] - &aug[i][k] * &aug[k][j];
                aug[i][j] = v / &prev;
            }
            aug[i][k] = BigInt::zero();
        }
        prev = aug[k][k].clone();
    }

    let mut x = vec![vec![Rational::zero(); m]; n];
    for col in 0..m {
        for i in (0..n).rev() {
            let mut acc = Rational::from_integer(aug[i][n + col].clone());
            for j in (i + 1)..n {
                if !aug[i][j].is_zero() {
                    acc -= Rational::from_integer(aug[i][j].clone()) * &x[j][col];
                }
            }
            x[i][col] = acc / Rational::from_integer(aug[i][i].clone());
        }
    }
    Some(x)
}

/// Exact inverse of an integer matrix.
pub fn inverse_integer(a: &[Vec<BigInt>]) -> Option<Vec<Vec<Rational>>> {
    let n = a.len();
    let id: Vec<Vec<BigInt>> = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| {
                    if i == j {
                        BigInt::one()
                    } else {
                        BigInt::zero()
                    }
                })
                .collect()
        })
        .collect();
    solve_integer(a, &id)
}

/// Determinant via Bareiss elimination.
pub fn determinant_integer(a: &[Vec<BigInt>]) -> BigInt {
    let n = a.len();
    if n == 0 {
        return BigInt::one();
    }
    let mut m = a.to_vec();
    let mut prev = BigInt::one();
    let mut sign = BigInt::one();
    for k in 0..n {
        let Some(p) = (k..n).find(|&r| !m[r][k].is_zero()) else {
            return BigInt::zero();
        };
        if p != k {
            m.swap(k, p);
            sign = -sign;
        }
        for i in (k + 1)..n {
            for j in (k + 1)..n {
                let v = &m[k][k] * &m[i][j] - &m[i][k] * &m[k][j];
                m[i][j] = v / &prev;
            }
        }
        prev = m[k][k].clone();
    }
    sign * &m[n - 1][n - 1]
}

pub fn abs_rational(r: &Rational) -> Rational {
    r.abs()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ints(rows: &[&[i64]]) -> Vec<Vec<BigInt>> {
        rows.iter()
            .map(|r| r.iter().map(|&v| BigInt::from(v)).collect())
            .collect()
    }

    #[test]
    fn inverse_of_two_by_two() {
        let a = ints(&[&[4, 2], &[2, 4]]);
        let inv = inverse_integer(&a).unwrap();
        assert_eq!(inv[0][0], rat(1, 3));
        assert_eq!(inv[0][1], rat(-1, 6));
    }

    #[test]
    fn singular_matrix_detected() {
        let a = ints(&[&[1, 2], &[2, 4]]);
        assert!(inverse_integer(&a).is_none());
        assert!(determinant_integer(&a).is_zero());
    }

    #[test]
    fn needs_pivoting() {
        let a = ints(&[&[0, 1, 2], &[1, 0, 3], &[4, -3, 8]]);
        let inv = inverse_integer(&a).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let mut s = Rational::zero();
                for k in 0..3 {
                    s += Rational::from_integer(a[i][k].clone()) * &inv[k][j];
                }
                assert_eq!(
                    s,
                    if i == j {
                        Rational::one()
                    } else {
                        Rational::zero()
                    }
                );
            }
        }
        assert_eq!(determinant_integer(&a), BigInt::from(-2));
    }
}

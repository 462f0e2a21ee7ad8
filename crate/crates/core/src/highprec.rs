//! Configurable-precision binary floats for the square-root-bearing objects:
//! symmetric Jacobi matrices and their spectra.

use dashu_float::ops::Abs;
use dashu_float::round::mode::HalfEven;
use dashu_float::FBig;
use dashu_int::IBig;
use num_traits::{Signed, Zero};

use crate::error::{Error, Result};
use crate::scalar::ExactScalar;

pub type Real = FBig<HalfEven, 2>;

/// Extra working bits on top of the requested precision.
const GUARD_BITS: usize = 64;

/// Significant decimal digits used when serializing floats.
pub const DECIMAL_DIGITS: usize = 45;

fn to_ibig(v: &num_bigint::BigInt) -> IBig {
    v.to_string().parse().expect("decimal integer round-trips")
}

pub fn working_bits(precision_bits: usize) -> usize {
    precision_bits + GUARD_BITS
}

pub fn real_from_scalar(v: &ExactScalar, bits: usize) -> Real {
    let num = Real::from(to_ibig(v.numer())).with_precision(bits).value();
    let den = Real::from(to_ibig(v.denom())).with_precision(bits).value();
    num / den
}

pub fn real_zero(bits: usize) -> Real {
    Real::ZERO.with_precision(bits).value()
}

/// Square root of a non-negative exact value.
pub fn sqrt_scalar(v: &ExactScalar, bits: usize) -> Result<Real> {
    if v.is_negative() {
        return Err(Error::Range(format!("square root of negative value {v}")));
    }
    if v.is_zero() {
        return Ok(real_zero(bits));
    }
    Ok(real_from_scalar(v, bits).sqrt())
}

/// `10^-digits` at the given precision.
pub fn tolerance(digits: u32, bits: usize) -> Real {
    let ten = Real::from(10u8).with_precision(bits).value();
    let mut p = Real::ONE.with_precision(bits).value();
    for _ in 0..digits {
        p *= &ten;
    }
    Real::ONE.with_precision(bits).value() / p
}

/// Decimal rendering with [`DECIMAL_DIGITS`] significant digits.
pub fn format_real(v: &Real) -> String {
    if v.repr().significand().is_zero() {
        return "0".to_string();
    }
    v.clone().with_base_and_precision::<10>(DECIMAL_DIGITS).value().to_string()
}

pub fn abs_real(v: &Real) -> Real {
    v.clone().abs()
}

/// Symmetric tridiagonal matrix with `diag[x] = B(x) + D(x)` and
/// `off[x] = -sqrt(B(x) D(x+1))`. The exact diagonal and squared
/// off-diagonal are kept alongside the floats.
#[derive(Clone, Debug)]
pub struct TridiagonalMatrix {
    pub diagonal_exact: Vec<ExactScalar>,
    pub off_diagonal_sq_exact: Vec<ExactScalar>,
    pub diagonal: Vec<Real>,
    pub off_diagonal: Vec<Real>,
    pub precision_bits: usize,
}

impl TridiagonalMatrix {
    pub fn from_potentials(b: &[ExactScalar], d: &[ExactScalar], precision_bits: usize) -> Result<Self> {
        let n = b.len();
        if d.len() != n || n == 0 {
            return Err(Error::Usage("potential grids must have equal nonzero length".into()));
        }
        let bits = working_bits(precision_bits);
        let diagonal_exact: Vec<ExactScalar> = (0..n).map(|x| &b[x] + &d[x]).collect();
        let off_diagonal_sq_exact: Vec<ExactScalar> = (0..n - 1).map(|x| &b[x] * &d[x + 1]).collect();
        let diagonal = diagonal_exact.iter().map(|v| real_from_scalar(v, bits)).collect();
        let off_diagonal = off_diagonal_sq_exact
            .iter()
            .map(|v| sqrt_scalar(v, bits).map(|r| -r))
            .collect::<Result<Vec<_>>>()?;
        Ok(TridiagonalMatrix { diagonal_exact, off_diagonal_sq_exact, diagonal, off_diagonal, precision_bits })
    }

    pub fn size(&self) -> usize {
        self.diagonal.len()
    }

    pub fn dense(&self) -> Vec<Vec<Real>> {
        let n = self.size();
        let bits = working_bits(self.precision_bits);
        let mut m = vec![vec![real_zero(bits); n]; n];
        for i in 0..n {
            m[i][i] = self.diagonal[i].clone();
            if i + 1 < n {
                m[i][i + 1] = self.off_diagonal[i].clone();
                m[i + 1][i] = self.off_diagonal[i].clone();
            }
        }
        m
    }

    pub fn apply(&self, v: &[Real]) -> Vec<Real> {
        let n = self.size();
        (0..n)
            .map(|i| {
                let mut acc = &self.diagonal[i] * &v[i];
                if i > 0 {
                    acc += &self.off_diagonal[i - 1] * &v[i - 1];
                }
                if i + 1 < n {
                    acc += &self.off_diagonal[i] * &v[i + 1];
                }
                acc
            })
            .collect()
    }

    /// Ascending eigenvalues by the dense Jacobi method.
    pub fn eigenvalues(&self) -> Vec<Real> {
        jacobi_eigenvalues(self.dense(), working_bits(self.precision_bits))
    }
}

/// Eigenvalues of a dense symmetric matrix by cyclic Jacobi rotations,
/// returned in ascending order.
pub fn jacobi_eigenvalues(mut a: Vec<Vec<Real>>, bits: usize) -> Vec<Real> {
    let n = a.len();
    let one = Real::ONE.with_precision(bits).value();
    let two = Real::from(2u8).with_precision(bits).value();
    let threshold = {
        let mut t = one.clone();
        for _ in 0..bits.saturating_sub(8) {
            t /= &two;
        }
        t
    };
    let scale = a
        .iter()
        .flatten()
        .map(abs_real)
        .fold(one.clone(), |m, v| if v > m { v } else { m });
    let eps = &threshold * &scale;
    for _sweep in 0..100 {
        let mut off = real_zero(bits);
        for i in 0..n {
            for j in i + 1..n {
                off += abs_real(&a[i][j]);
            }
        }
        if off <= eps {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[p][q].repr().significand().is_zero() {
                    continue;
                }
                // Rotation annihilating a[p][q].
                let theta = (&a[q][q] - &a[p][p]) / (&two * &a[p][q]);
                let root = (&theta * &theta + &one).sqrt();
                let t = if theta >= real_zero(bits) {
                    &one / (&theta + &root)
                } else {
                    -(&one / (abs_real(&theta) + &root))
                };
                let c = &one / (&t * &t + &one).sqrt();
                let s = &t * &c;
                for k in 0..n {
                    let akp = a[k][p].clone();
                    let akq = a[k][q].clone();
                    a[k][p] = &c * &akp - &s * &akq;
                    a[k][q] = &s * &akp + &c * &akq;
                }
                for k in 0..n {
                    let apk = a[p][k].clone();
                    let aqk = a[q][k].clone();
                    a[p][k] = &c * &apk - &s * &aqk;
                    a[q][k] = &s * &apk + &c * &aqk;
                }
            }
        }
    }
    let mut eig: Vec<Real> = (0..n).map(|i| a[i][i].clone()).collect();
    eig.sort_by(|x, y| x.partial_cmp(y).expect("finite eigenvalues"));
    eig
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::{int, rat};

    #[test]
    fn formats_with_fixed_digits() {
        let v = real_from_scalar(&rat(1, 3), working_bits(256));
        let s = format_real(&v);
        assert!(s.starts_with("0.333333333333"), "{s}");
        assert_eq!(s.trim_start_matches("0.").len(), 45);
        assert_eq!(format_real(&real_zero(128)), "0");
    }

    #[test]
    fn square_root_accuracy() {
        let bits = working_bits(256);
        let r = sqrt_scalar(&int(2), bits).unwrap();
        let err = abs_real(&(&r * &r - real_from_scalar(&int(2), bits)));
        assert!(err < tolerance(70, bits));
        assert!(sqrt_scalar(&int(-1), bits).is_err());
    }

    #[test]
    fn jacobi_on_known_spectrum() {
        // [[2,-1],[-1,2]] has eigenvalues 1 and 3.
        let b = vec![int(1), int(1)];
        let d = vec![int(1), int(1)];
        let m = TridiagonalMatrix::from_potentials(&b, &d, 256).unwrap();
        let e = m.eigenvalues();
        let bits = working_bits(256);
        let tol = tolerance(60, bits);
        assert!(abs_real(&(&e[0] - real_from_scalar(&int(1), bits))) < tol);
        assert!(abs_real(&(&e[1] - real_from_scalar(&int(3), bits))) < tol);
    }

    #[test]
    fn jacobi_three_by_three() {
        // [[1,-1,0],[-1,2,-1],[0,-1,1]] has eigenvalues 0, 1, 3.
        let bits = working_bits(256);
        let b = vec![int(1), int(1), int(0)];
        let d = vec![int(0), int(1), int(1)];
        let m = TridiagonalMatrix::from_potentials(&b, &d, 256).unwrap();
        let e = m.eigenvalues();
        for (got, want) in e.iter().zip([0, 1, 3]) {
            assert!(abs_real(&(got - real_from_scalar(&int(want), bits))) < tolerance(60, bits));
        }
    }
}

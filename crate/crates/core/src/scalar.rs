//! Exact rational scalars and the Pochhammer kernels built on them.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

use crate::error::{Error, Result};

/// Arbitrary-precision rational, always kept in lowest terms with a positive
/// denominator.
pub type ExactScalar = BigRational;

pub fn int(v: i64) -> ExactScalar {
    BigRational::from_integer(BigInt::from(v))
}

pub fn rat(num: i64, den: i64) -> ExactScalar {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

/// Parses `"p/q"` or a bare integer. Whitespace around the parts is ignored.
pub fn parse_scalar(text: &str) -> Result<ExactScalar> {
    let text = text.trim();
    let bad = || Error::Parse(format!("expected an integer or p/q rational, got {text:?}"));
    match text.split_once('/') {
        Some((n, d)) => {
            let n: BigInt = n.trim().parse().map_err(|_| bad())?;
            let d: BigInt = d.trim().parse().map_err(|_| bad())?;
            if d.is_zero() {
                return Err(Error::Parse(format!("zero denominator in {text:?}")));
            }
            Ok(BigRational::new(n, d))
        }
        None => {
            let n: BigInt = text.parse().map_err(|_| bad())?;
            Ok(BigRational::from_integer(n))
        }
    }
}

/// Lossless text form: `p` for integers, `p/q` otherwise.
pub fn format_scalar(v: &ExactScalar) -> String {
    v.to_string()
}

/// Integer power with negative exponents allowed. `base` must be nonzero when
/// `exp < 0`.
pub fn powi(base: &ExactScalar, exp: i64) -> ExactScalar {
    let mut acc = ExactScalar::one();
    let mut b = if exp < 0 { base.recip() } else { base.clone() };
    let mut e = exp.unsigned_abs();
    while e > 0 {
        if e & 1 == 1 {
            acc *= &b;
        }
        b = &b * &b;
        e >>= 1;
    }
    acc
}

/// Rising factorial (a)_k = a(a+1)...(a+k-1).
pub fn pochhammer(a: &ExactScalar, k: usize) -> ExactScalar {
    let mut acc = ExactScalar::one();
    let mut term = a.clone();
    let one = ExactScalar::one();
    for _ in 0..k {
        acc *= &term;
        term += &one;
    }
    acc
}

/// q-shifted factorial (a;q)_k = prod_{j<k} (1 - a q^j).
pub fn q_pochhammer(a: &ExactScalar, q: &ExactScalar, k: usize) -> ExactScalar {
    let mut acc = ExactScalar::one();
    let mut aq = a.clone();
    let one = ExactScalar::one();
    for _ in 0..k {
        acc *= &one - &aq;
        aq *= q;
    }
    acc
}

/// (a_1, a_2, ...)_k as the product of the single-argument symbols.
pub fn pochhammer_multi(args: &[ExactScalar], k: usize) -> ExactScalar {
    args.iter().map(|a| pochhammer(a, k)).product()
}

pub fn q_pochhammer_multi(args: &[ExactScalar], q: &ExactScalar, k: usize) -> ExactScalar {
    args.iter().map(|a| q_pochhammer(a, q, k)).product()
}

/// Greatest integer not exceeding `v`.
pub fn floor(v: &ExactScalar) -> BigInt {
    v.floor().to_integer()
}

/// Greatest integer strictly below `v`.
pub fn floor_strict(v: &ExactScalar) -> BigInt {
    if v.is_integer() {
        v.to_integer() - 1
    } else {
        v.floor().to_integer()
    }
}

/// Returns `k` with `q^k == value` when such an integer exists.
pub fn integer_log(value: &ExactScalar, q: &ExactScalar) -> Option<i64> {
    if !value.is_positive() || !q.is_positive() || q.is_one() {
        return None;
    }
    if value.is_one() {
        return Some(0);
    }
    // Bit lengths give a log estimate that is good enough to bracket k.
    let lg = |r: &ExactScalar| r.numer().bits() as f64 - r.denom().bits() as f64;
    let lq = lg(q);
    if lq == 0.0 {
        // |log2 q| < 1: fall back to a direct scan.
        let mut acc = ExactScalar::one();
        for k in 1..=4096i64 {
            acc *= q;
            if &acc == value {
                return Some(k);
            }
            if &acc.recip() == value {
                return Some(-k);
            }
        }
        return None;
    }
    let guess = (lg(value) / lq).round() as i64;
    let spread = (2.0 + 2.0 / lq.abs()).ceil() as i64 + 2;
    (guess - spread..=guess + spread).find(|&k| &powi(q, k) == value)
}

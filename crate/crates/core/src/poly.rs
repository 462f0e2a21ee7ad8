//! Exact univariate polynomials in the sinusoidal coordinate eta: Newton
//! interpolation with hold-out verification and Sturm root counting.

use num_traits::{Signed, Zero};

use crate::error::{Error, Result};
use crate::scalar::ExactScalar;

/// Polynomial with ascending coefficients in eta.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EtaPolynomial {
    pub coeffs: Vec<ExactScalar>,
    pub declared_degree: usize,
}

fn trim(mut c: Vec<ExactScalar>) -> Vec<ExactScalar> {
    while c.last().is_some_and(Zero::is_zero) {
        c.pop();
    }
    c
}

impl EtaPolynomial {
    pub fn new(coeffs: Vec<ExactScalar>, declared_degree: usize) -> Self {
        EtaPolynomial { coeffs: trim(coeffs), declared_degree }
    }

    /// Degree of the nonzero part; `None` for the zero polynomial.
    pub fn degree(&self) -> Option<usize> {
        self.coeffs.len().checked_sub(1)
    }

    pub fn leading_coefficient(&self) -> ExactScalar {
        self.coeffs.last().cloned().unwrap_or_else(ExactScalar::zero)
    }

    /// Horner evaluation.
    pub fn eval(&self, y: &ExactScalar) -> ExactScalar {
        self.coeffs.iter().rev().fold(ExactScalar::zero(), |acc, c| acc * y + c)
    }

    /// Interpolates through the first `degree_bound + 1` nodes and checks every
    /// remaining node as a hold-out. Nodes must have distinct eta values.
    pub fn interpolate(nodes: &[(ExactScalar, ExactScalar)], degree_bound: usize) -> Result<Self> {
        let k = degree_bound + 1;
        if nodes.len() < k {
            return Err(Error::Usage(format!("{} nodes cannot fix a polynomial of degree {degree_bound}", nodes.len())));
        }
        let (fit, hold) = nodes.split_at(k);
        let ys: Vec<&ExactScalar> = fit.iter().map(|(y, _)| y).collect();
        // Divided differences.
        let mut dd: Vec<ExactScalar> = fit.iter().map(|(_, v)| v.clone()).collect();
        for level in 1..k {
            for i in (level..k).rev() {
                let den = ys[i] - ys[i - level];
                if den.is_zero() {
                    return Err(Error::Usage(format!("repeated interpolation node eta = {}", ys[i])));
                }
                dd[i] = (&dd[i] - &dd[i - 1]) / den;
            }
        }
        // Expand the Newton form into monomials.
        let mut coeffs = vec![ExactScalar::zero(); k];
        for i in (0..k).rev() {
            // coeffs <- coeffs * (y - ys[i]) + dd[i]
            let mut next = vec![ExactScalar::zero(); k];
            for j in 0..k {
                if coeffs[j].is_zero() {
                    continue;
                }
                if j + 1 < k {
                    next[j + 1] += &coeffs[j];
                }
                next[j] -= &coeffs[j] * ys[i];
            }
            next[0] += &dd[i];
            coeffs = next;
        }
        let poly = EtaPolynomial::new(coeffs, degree_bound);
        for (y, v) in hold {
            let r = poly.eval(y) - v;
            if !r.is_zero() {
                return Err(Error::NotPolynomial(format!(
                    "hold-out residual {r} at eta = {y} for degree bound {degree_bound}"
                )));
            }
        }
        Ok(poly)
    }

    pub fn derivative(&self) -> EtaPolynomial {
        let coeffs = self
            .coeffs
            .iter()
            .enumerate()
            .skip(1)
            .map(|(i, c)| c * ExactScalar::from_integer((i as i64).into()))
            .collect();
        EtaPolynomial::new(coeffs, self.declared_degree.saturating_sub(1))
    }

    /// Remainder of division by a nonzero `divisor`.
    pub fn rem(&self, divisor: &EtaPolynomial) -> EtaPolynomial {
        let dl = divisor.leading_coefficient();
        let dd = divisor.degree().expect("nonzero divisor");
        let mut r = self.coeffs.clone();
        while r.len() > dd && !r.is_empty() {
            let shift = r.len() - 1 - dd;
            let f = r.last().expect("nonempty") / &dl;
            for (j, c) in divisor.coeffs.iter().enumerate() {
                r[shift + j] -= &f * c;
            }
            r.pop();
            r = trim(r);
        }
        EtaPolynomial::new(r, 0)
    }

    fn sturm_sequence(&self) -> Vec<EtaPolynomial> {
        let mut seq = vec![self.clone(), self.derivative()];
        while seq.last().is_some_and(|p| p.degree().is_some_and(|d| d > 0)) {
            let k = seq.len();
            let r = seq[k - 2].rem(&seq[k - 1]);
            if r.degree().is_none() {
                break;
            }
            seq.push(EtaPolynomial::new(r.coeffs.iter().map(|c| -c).collect(), 0));
        }
        seq
    }

    /// Number of distinct real roots in the open interval (lo, hi). A root at
    /// either endpoint is an error.
    pub fn count_roots_open(&self, lo: &ExactScalar, hi: &ExactScalar) -> Result<usize> {
        if self.degree().is_none() {
            return Err(Error::Degenerate("zero polynomial has no isolated roots".into()));
        }
        for end in [lo, hi] {
            if self.eval(end).is_zero() {
                return Err(Error::Degenerate(format!("root on the interval boundary eta = {end}")));
            }
        }
        let seq = self.sturm_sequence();
        let changes = |y: &ExactScalar| {
            let signs: Vec<bool> = seq.iter().map(|p| p.eval(y)).filter(|v| !v.is_zero()).map(|v| v.is_positive()).collect();
            signs.windows(2).filter(|w| w[0] != w[1]).count()
        };
        let (a, b) = (changes(lo), changes(hi));
        Ok(a.abs_diff(b))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::{int, rat};
    use proptest::prelude::*;

    fn poly(c: &[i64]) -> EtaPolynomial {
        EtaPolynomial::new(c.iter().map(|&v| int(v)).collect(), c.len() - 1)
    }

    #[test]
    fn constant_fit_has_degree_zero() {
        let nodes: Vec<_> = (0..4).map(|i| (int(i), rat(7, 3))).collect();
        let p = EtaPolynomial::interpolate(&nodes, 0).unwrap();
        assert_eq!(p.degree(), Some(0));
        assert_eq!(p.leading_coefficient(), rat(7, 3));
    }

    #[test]
    fn holdout_detects_non_polynomial() {
        let nodes: Vec<_> = (1..6).map(|i| (int(i), rat(1, i))).collect();
        assert!(matches!(EtaPolynomial::interpolate(&nodes, 2), Err(Error::NotPolynomial(_))));
    }

    #[test]
    fn sturm_counts() {
        // (y-1)(y-2)(y-3)
        let p = poly(&[-6, 11, -6, 1]);
        assert_eq!(p.count_roots_open(&int(0), &int(10)).unwrap(), 3);
        assert_eq!(p.count_roots_open(&rat(3, 2), &int(10)).unwrap(), 2);
        assert!(p.count_roots_open(&int(1), &int(10)).is_err());
        // y^2 + 1
        assert_eq!(poly(&[1, 0, 1]).count_roots_open(&int(-5), &int(5)).unwrap(), 0);
        // (y-1)^2 (y-4): distinct roots counted once
        assert_eq!(poly(&[-4, 9, -6, 1]).count_roots_open(&int(0), &int(5)).unwrap(), 2);
        assert_eq!(poly(&[5]).count_roots_open(&int(0), &int(1)).unwrap(), 0);
    }

    proptest! {
        #[test]
        fn interpolation_recovers_coefficients(c in prop::collection::vec(-20i64..20, 1..6)) {
            let p = poly(&c);
            let deg = c.len() - 1;
            let nodes: Vec<_> = (0..deg as i64 + 3).map(|i| (rat(2 * i + 1, 3), p.eval(&rat(2 * i + 1, 3)))).collect();
            let f = EtaPolynomial::interpolate(&nodes, deg).unwrap();
            prop_assert_eq!(f.coeffs, p.coeffs);
        }

        #[test]
        fn sturm_matches_planted_roots(roots in prop::collection::btree_set(-9i64..9, 0..5)) {
            let mut c = vec![int(1)];
            for r in &roots {
                let mut next = vec![ExactScalar::zero(); c.len() + 1];
                for (j, v) in c.iter().enumerate() {
                    next[j + 1] += v;
                    next[j] -= v * int(*r);
                }
                c = next;
            }
            let p = EtaPolynomial::new(c, roots.len());
            let lo = rat(-1, 2);
            let hi = rat(11, 2);
            let want = roots.iter().filter(|&&r| (0..=5).contains(&r)).count();
            prop_assert_eq!(p.count_roots_open(&lo, &hi).unwrap(), want);
        }
    }
}

//! Parameter bookkeeping for the Racah and q-Racah families.
//!
//! Racah parameters are stored additively as `(a, b, c, d)`; q-Racah
//! parameters are stored multiplicatively as `(q^l1, q^l2, q^l3, q^l4)`.
//! All parameter maps (twist, shifts, mirror) act on the stored values
//! directly, so they stay exact for any rational input.

use std::fmt;

use num_bigint::BigInt;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{floor, floor_strict, format_scalar, int, integer_log, powi, ExactScalar};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Racah,
    #[serde(rename = "qracah")]
    QRacah,
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Family::Racah => f.write_str("racah"),
            Family::QRacah => f.write_str("qracah"),
        }
    }
}

impl std::str::FromStr for Family {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "racah" | "r" => Ok(Family::Racah),
            "qracah" | "q-racah" | "qr" => Ok(Family::QRacah),
            other => Err(Error::Parse(format!("unknown family {other:?}"))),
        }
    }
}

/// A point of the lattice in the family's native coordinate: `x` itself for
/// Racah, `q^x` for q-Racah. Off-grid q-Racah points are arbitrary rational
/// values of `q^x`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Site(pub ExactScalar);

impl fmt::Display for Site {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&format_scalar(&self.0))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ShiftKind {
    /// (1,1,1,1)
    Delta,
    /// (0,0,1,1)
    DeltaTilde,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ShiftVector {
    pub kind: ShiftKind,
    pub multiple: i64,
}

impl ShiftVector {
    pub fn delta(multiple: i64) -> Self {
        ShiftVector { kind: ShiftKind::Delta, multiple }
    }

    pub fn delta_tilde(multiple: i64) -> Self {
        ShiftVector { kind: ShiftKind::DeltaTilde, multiple }
    }

    fn components(&self) -> [i64; 4] {
        let k = self.multiple;
        match self.kind {
            ShiftKind::Delta => [k, k, k, k],
            ShiftKind::DeltaTilde => [0, 0, k, k],
        }
    }
}

/// One inequality of the admissible parameter region with its exact slack
/// (`holds` iff `slack > 0`).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RangeCheck {
    pub name: String,
    pub holds: bool,
    pub slack: ExactScalar,
}

impl RangeCheck {
    fn positive(name: impl Into<String>, slack: ExactScalar) -> Self {
        RangeCheck { name: name.into(), holds: slack.is_positive(), slack }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ParameterSet {
    pub family: Family,
    /// Lattice size; the grid is `x = 0..=n`.
    pub n: usize,
    pub a: ExactScalar,
    pub b: ExactScalar,
    pub c: ExactScalar,
    pub d: ExactScalar,
    q: Option<ExactScalar>,
    /// Set only by the validating constructors when every range inequality
    /// holds. Derived parameter sets are never validated.
    pub validated: bool,
}

impl ParameterSet {
    /// Racah system of size `n` with `a = -n`. `validated` reflects the range
    /// `0 < d < a+b`, `0 < c < 1+d`.
    pub fn racah(n: usize, b: ExactScalar, c: ExactScalar, d: ExactScalar) -> Self {
        let mut p = ParameterSet {
            family: Family::Racah,
            n,
            a: -int(n as i64),
            b,
            c,
            d,
            q: None,
            validated: false,
        };
        p.validated = n >= 1 && p.base_ranges().iter().all(|r| r.holds);
        p
    }

    /// q-Racah system of size `n` with `a = q^{-n}`. `validated` reflects
    /// `0 < ab < d < 1`, `qd < c < 1` and `0 < q < 1`.
    pub fn qracah(
        n: usize,
        q: ExactScalar,
        b: ExactScalar,
        c: ExactScalar,
        d: ExactScalar,
    ) -> Result<Self> {
        if q.is_zero() {
            return Err(Error::Range("q must be nonzero".into()));
        }
        let mut p = ParameterSet {
            family: Family::QRacah,
            n,
            a: powi(&q, -(n as i64)),
            b,
            c,
            d,
            q: Some(q),
            validated: false,
        };
        p.validated = n >= 1 && p.base_ranges().iter().all(|r| r.holds);
        Ok(p)
    }

    /// Arbitrary (unvalidated) parameters; used for shifted, twisted and
    /// mirrored sets and for rational-identity checks off the physical range.
    pub fn from_raw(
        family: Family,
        n: usize,
        abcd: [ExactScalar; 4],
        q: Option<ExactScalar>,
    ) -> Result<Self> {
        if family == Family::QRacah && q.as_ref().is_none_or(|q| q.is_zero()) {
            return Err(Error::Usage("q-Racah parameters need a nonzero q".into()));
        }
        let [a, b, c, d] = abcd;
        let q = if family == Family::QRacah { q } else { None };
        Ok(ParameterSet { family, n, a, b, c, d, q, validated: false })
    }

    pub fn is_q(&self) -> bool {
        self.family == Family::QRacah
    }

    /// The base q. Panics for Racah parameter sets.
    pub fn q(&self) -> &ExactScalar {
        self.q.as_ref().expect("q is only defined for q-Racah parameter sets")
    }

    pub fn q_opt(&self) -> Option<&ExactScalar> {
        self.q.as_ref()
    }

    pub fn abcd(&self) -> [ExactScalar; 4] {
        [self.a.clone(), self.b.clone(), self.c.clone(), self.d.clone()]
    }

    fn with_abcd(&self, abcd: [ExactScalar; 4]) -> Self {
        let [a, b, c, d] = abcd;
        ParameterSet { family: self.family, n: self.n, a, b, c, d, q: self.q.clone(), validated: false }
    }

    /// kappa = 1 (Racah), q^{-1} (q-Racah).
    pub fn kappa(&self) -> ExactScalar {
        match self.family {
            Family::Racah => ExactScalar::one(),
            Family::QRacah => self.q().recip(),
        }
    }

    /// Lattice site for integer `x`.
    pub fn site(&self, x: i64) -> Site {
        match self.family {
            Family::Racah => Site(int(x)),
            Family::QRacah => Site(powi(self.q(), x)),
        }
    }

    /// Moves a site by `k` lattice steps.
    pub fn shift_site(&self, s: &Site, k: i64) -> Site {
        match self.family {
            Family::Racah => Site(&s.0 + int(k)),
            Family::QRacah => Site(&s.0 * powi(self.q(), k)),
        }
    }

    /// Reflection `x -> n - x` about the grid midpoint.
    pub fn reflect_site(&self, s: &Site) -> Site {
        match self.family {
            Family::Racah => Site(int(self.n as i64) - &s.0),
            Family::QRacah => Site(powi(self.q(), self.n as i64) / &s.0),
        }
    }

    /// The involution `x -> -x-d` (Racah), `q^x -> q^{-x}/d` (q-Racah).
    pub fn involution_site(&self, s: &Site) -> Site {
        match self.family {
            Family::Racah => Site(-&s.0 - &self.d),
            Family::QRacah => Site((&s.0 * &self.d).recip()),
        }
    }

    pub fn d_tilde(&self) -> ExactScalar {
        let [a, b, c, d] = self.abcd();
        match self.family {
            Family::Racah => a + b + c - d - int(1),
            Family::QRacah => a * b * c / (d * self.q()),
        }
    }

    /// (l4-l1+1, l4-l2+1, l3, l4); multiplicatively (dq/a, dq/b, c, d).
    pub fn twist(&self) -> Self {
        let [a, b, c, d] = self.abcd();
        let one = int(1);
        match self.family {
            Family::Racah => self.with_abcd([&d - &a + &one, &d - &b + &one, c, d]),
            Family::QRacah => {
                let dq = &d * self.q();
                self.with_abcd([&dq / &a, &dq / &b, c, d])
            }
        }
    }

    pub fn shift(&self, s: ShiftVector) -> Self {
        let comps = s.components();
        let vals = self.abcd();
        let out: Vec<ExactScalar> = vals
            .iter()
            .zip(comps)
            .map(|(v, k)| match self.family {
                Family::Racah => v + int(k),
                Family::QRacah => v * powi(self.q(), k),
            })
            .collect();
        let mut p = self.with_abcd(out.try_into().expect("four components"));
        if s.multiple == 0 {
            p.validated = self.validated;
        }
        p
    }

    /// (l1, l1+l3-l4, l1+l2-l4, 2l1-l4); multiplicatively (a, ac/d, ab/d, a^2/d).
    pub fn mirror(&self) -> Self {
        let [a, b, c, d] = self.abcd();
        match self.family {
            Family::Racah => {
                let two_a = &a + &a;
                self.with_abcd([a.clone(), &a + &c - &d, &a + &b - &d, two_a - d])
            }
            Family::QRacah => {
                let aa = &a * &a;
                self.with_abcd([a.clone(), &a * &c / &d, &a * &b / &d, aa / d])
            }
        }
    }

    /// Additive exponents (l1, l2, l3, l4). For q-Racah every component must be
    /// an integer power of q.
    pub fn exponents(&self) -> Result<[ExactScalar; 4]> {
        match self.family {
            Family::Racah => Ok(self.abcd()),
            Family::QRacah => {
                let q = self.q();
                let names = ["a", "b", "c", "d"];
                let mut out = Vec::with_capacity(4);
                for (v, name) in self.abcd().iter().zip(names) {
                    let k = integer_log(v, q).ok_or_else(|| {
                        Error::NotRepresentable(format!("{name} = {}", format_scalar(v)))
                    })?;
                    out.push(int(k));
                }
                Ok(out.try_into().expect("four exponents"))
            }
        }
    }

    /// min{ [l1+l2-l4-1]', [(l1+l2-l3-l4)/2] }, where [x]' is the greatest
    /// integer strictly below x. May be < 1, meaning no virtual level exists.
    pub fn v_max(&self) -> Result<i64> {
        let [l1, l2, l3, l4] = self.exponents()?;
        let first = floor_strict(&(&l1 + &l2 - &l4 - int(1)));
        let second = floor(&((&l1 + &l2 - &l3 - &l4) / int(2)));
        let m: BigInt = first.min(second);
        m.to_i64().ok_or_else(|| Error::Range("v_max out of range".into()))
    }

    /// {1, ..., v_max}; empty when v_max < 1.
    pub fn virtual_index_set(&self) -> Result<Vec<usize>> {
        let v = self.v_max()?;
        Ok(if v < 1 { Vec::new() } else { (1..=v as usize).collect() })
    }

    fn base_ranges(&self) -> Vec<RangeCheck> {
        let [a, b, c, d] = self.abcd();
        let one = int(1);
        match self.family {
            Family::Racah => vec![
                RangeCheck::positive("0 < d", d.clone()),
                RangeCheck::positive("d < a+b", &a + &b - &d),
                RangeCheck::positive("0 < c", c.clone()),
                RangeCheck::positive("c < 1+d", &one + &d - &c),
            ],
            Family::QRacah => {
                let q = self.q();
                let ab = &a * &b;
                vec![
                    RangeCheck::positive("0 < q", q.clone()),
                    RangeCheck::positive("q < 1", &one - q),
                    RangeCheck::positive("a = q^-N", if a == powi(q, -(self.n as i64)) { one.clone() } else { ExactScalar::zero() }),
                    RangeCheck::positive("0 < ab", ab.clone()),
                    RangeCheck::positive("ab < d", &d - &ab),
                    RangeCheck::positive("d < 1", &one - &d),
                    RangeCheck::positive("qd < c", &c - q * &d),
                    RangeCheck::positive("c < 1", &one - &c),
                ]
            }
        }
    }

    /// Checks the base parameter range, the range for `m` deleted virtual
    /// states, and that at least `m` virtual levels exist.
    pub fn validate_ranges(&self, m: usize) -> Vec<RangeCheck> {
        let mut checks = self.base_ranges();
        if self.family == Family::Racah {
            checks.insert(
                0,
                RangeCheck::positive(
                    "a = -N",
                    if self.a == -int(self.n as i64) { int(1) } else { ExactScalar::zero() },
                ),
            );
        }
        let [a, b, _, d] = self.abcd();
        let mm = m as i64;
        checks.push(match self.family {
            Family::Racah => RangeCheck::positive(format!("d+M < a+b (M={m})"), &a + &b - &d - int(mm)),
            Family::QRacah => {
                RangeCheck::positive(format!("ab < dq^M (M={m})"), &d * powi(self.q(), mm) - &a * &b)
            }
        });
        match self.v_max() {
            Ok(v) => {
                checks.push(RangeCheck::positive("v_max >= 1", int(v)));
                checks.push(RangeCheck::positive(format!("M <= v_max (M={m})"), int(v - mm + 1)));
            }
            Err(e) => checks.push(RangeCheck {
                name: format!("v_max computable ({e})"),
                holds: false,
                slack: ExactScalar::zero(),
            }),
        }
        checks
    }
}

impl fmt::Display for ParameterSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}(N={}; a={}, b={}, c={}, d={}",
            self.family,
            self.n,
            format_scalar(&self.a),
            format_scalar(&self.b),
            format_scalar(&self.c),
            format_scalar(&self.d)
        )?;
        if let Some(q) = &self.q {
            write!(f, ", q={}", format_scalar(q))?;
        }
        f.write_str(")")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::rat;

    fn desk_racah() -> ParameterSet {
        ParameterSet::racah(3, int(12), rat(1, 2), int(1))
    }

    fn desk_qracah() -> ParameterSet {
        let q = rat(1, 2);
        ParameterSet::qracah(3, q.clone(), powi(&q, 10), rat(1, 2), rat(1, 2)).unwrap()
    }

    #[test]
    fn desk_sets_are_validated() {
        assert!(desk_racah().validated);
        assert!(desk_qracah().validated);
        assert_eq!(desk_qracah().a, int(8));
    }

    #[test]
    fn twist_values() {
        let t = desk_racah().twist();
        assert_eq!(t.abcd(), [int(5), int(-10), rat(1, 2), int(1)]);
        assert!(!t.validated);
        let t = desk_qracah().twist();
        assert_eq!(t.abcd(), [rat(1, 32), int(256), rat(1, 2), rat(1, 2)]);
    }

    #[test]
    fn twist_is_an_involution() {
        for p in [desk_racah(), desk_qracah()] {
            assert_eq!(p.twist().twist().abcd(), p.abcd());
        }
    }

    #[test]
    fn shift_and_twist_commute() {
        for p in [desk_racah(), desk_qracah()] {
            for k in 1..=3 {
                let lhs = p.shift(ShiftVector::delta_tilde(k)).twist();
                let rhs = p.twist().shift(ShiftVector::delta(k));
                assert_eq!(lhs.abcd(), rhs.abcd());
            }
        }
    }

    #[test]
    fn shifts() {
        let p = desk_racah();
        assert_eq!(p.shift(ShiftVector::delta(0)), p);
        assert_eq!(
            p.shift(ShiftVector::delta_tilde(2)).abcd(),
            [int(-3), int(12), rat(5, 2), int(3)]
        );
    }

    #[test]
    fn d_tilde_values() {
        assert_eq!(desk_racah().d_tilde(), rat(15, 2));
        assert_eq!(desk_qracah().d_tilde(), rat(1, 64));
        let p = desk_racah();
        assert_eq!(p.shift(ShiftVector::delta(1)).d_tilde(), p.d_tilde() + int(2));
    }

    #[test]
    fn v_max_values() {
        assert_eq!(desk_racah().v_max().unwrap(), 3);
        assert_eq!(desk_qracah().v_max().unwrap(), 2);
        assert_eq!(desk_racah().virtual_index_set().unwrap(), vec![1, 2, 3]);
        // l1+l2-l4-1 = 0 -> [0]' = -1
        let p = ParameterSet::racah(3, int(5), rat(1, 2), int(1));
        assert_eq!(p.v_max().unwrap(), -1);
        assert!(p.virtual_index_set().unwrap().is_empty());
    }

    #[test]
    fn exponents_require_powers_of_q() {
        assert_eq!(
            desk_qracah().exponents().unwrap(),
            [int(-3), int(10), int(1), int(1)]
        );
        let q = rat(1, 2);
        let p = ParameterSet::qracah(3, q, rat(1, 1000), rat(1, 2), rat(1, 2)).unwrap();
        assert!(matches!(p.exponents(), Err(Error::NotRepresentable(_))));
        assert!(p.v_max().is_err());
    }

    #[test]
    fn range_diagnostics() {
        let checks = desk_racah().validate_ranges(2);
        assert!(checks.iter().all(|c| c.holds), "{checks:?}");
        let m_check = checks.iter().find(|c| c.name.starts_with("d+M")).unwrap();
        assert_eq!(m_check.slack, int(6));

        let checks = desk_qracah().validate_ranges(2);
        assert!(checks.iter().all(|c| c.holds), "{checks:?}");
        let m_check = checks.iter().find(|c| c.name.starts_with("ab < dq^M")).unwrap();
        assert_eq!(m_check.slack, rat(1, 8) - rat(1, 128));

        let p = ParameterSet::racah(3, int(5), rat(1, 2), int(1));
        let checks = p.validate_ranges(1);
        // a+b = d+M exactly, so the strict M-range inequality fails with zero slack.
        let m_check = checks.iter().find(|c| c.name.starts_with("d+M")).unwrap();
        assert!(!m_check.holds);
        assert_eq!(m_check.slack, int(0));
        assert!(!checks.iter().find(|c| c.name == "v_max >= 1").unwrap().holds);
    }

    #[test]
    fn mirror_map() {
        let p = desk_racah();
        let m = p.mirror();
        assert_eq!(m.abcd(), [int(-3), rat(-7, 2), int(8), int(-7)]);
        assert_eq!(m.mirror().abcd(), p.abcd());
        let p = desk_qracah();
        assert_eq!(p.mirror().mirror().abcd(), p.abcd());
        assert_eq!(p.mirror().a, p.a);
    }

    #[test]
    fn sites() {
        let p = desk_qracah();
        let s = p.site(2);
        assert_eq!(s.0, rat(1, 4));
        assert_eq!(p.shift_site(&s, -1).0, rat(1, 2));
        assert_eq!(p.reflect_site(&p.site(1)), p.site(2));
        let p = desk_racah();
        assert_eq!(p.involution_site(&p.site(2)).0, int(-3));
    }
}

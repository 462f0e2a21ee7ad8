//! The original finite (q-)Racah system: potentials, sinusoidal coordinate,
//! energies, eigenpolynomials, ground-state weight and norms.

use num_traits::{One, Zero};

use crate::error::{Error, Result};
use crate::highprec::TridiagonalMatrix;
use crate::params::{Family, ParameterSet, ShiftVector, Site};
use crate::scalar::{
    int, pochhammer, pochhammer_multi, powi, q_pochhammer, q_pochhammer_multi, rat, ExactScalar,
};

/// Exact values on the integer grid `0..=x_hi`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GridFunction {
    values: Vec<ExactScalar>,
}

impl GridFunction {
    pub fn new(values: Vec<ExactScalar>) -> Self {
        assert!(!values.is_empty(), "a grid function needs at least x = 0");
        GridFunction { values }
    }

    pub fn from_fn(x_hi: usize, mut f: impl FnMut(usize) -> Result<ExactScalar>) -> Result<Self> {
        let values = (0..=x_hi).map(&mut f).collect::<Result<Vec<_>>>()?;
        Ok(GridFunction { values })
    }

    pub fn x_hi(&self) -> usize {
        self.values.len() - 1
    }

    /// Value at `x`; `None` outside `0..=x_hi`.
    pub fn get(&self, x: i64) -> Option<&ExactScalar> {
        usize::try_from(x).ok().and_then(|i| self.values.get(i))
    }

    pub fn at(&self, x: usize) -> &ExactScalar {
        &self.values[x]
    }

    pub fn values(&self) -> &[ExactScalar] {
        &self.values
    }
}

/// Evaluates `num / den` where a vanishing numerator wins over a vanishing
/// denominator. Used for the boundary zeros of B and D.
pub(crate) fn ratio_or_zero(
    num: ExactScalar,
    den: ExactScalar,
    what: &str,
    at: &Site,
) -> Result<ExactScalar> {
    if num.is_zero() {
        Ok(num)
    } else if den.is_zero() {
        Err(Error::singular(what, at))
    } else {
        Ok(num / den)
    }
}

pub(crate) fn checked_div(num: ExactScalar, den: &ExactScalar, what: &str, at: impl std::fmt::Display) -> Result<ExactScalar> {
    if den.is_zero() {
        Err(Error::singular(what, at))
    } else {
        Ok(num / den)
    }
}

pub fn b_pot(p: &ParameterSet, s: &Site) -> Result<ExactScalar> {
    let [a, b, c, d] = p.abcd();
    let z = &s.0;
    let one = ExactScalar::one();
    let (num, den) = match p.family {
        Family::Racah => (
            -((z + &a) * (z + &b) * (z + &c) * (z + &d)),
            (int(2) * z + &d) * (int(2) * z + &d + &one),
        ),
        Family::QRacah => {
            let q = p.q();
            let dzz = &d * z * z;
            (
                -((&one - &a * z) * (&one - &b * z) * (&one - &c * z) * (&one - &d * z)),
                (&one - &dzz) * (&one - &dzz * q),
            )
        }
    };
    ratio_or_zero(num, den, "B", s)
}

pub fn d_pot(p: &ParameterSet, s: &Site) -> Result<ExactScalar> {
    let [a, b, c, d] = p.abcd();
    let z = &s.0;
    let one = ExactScalar::one();
    let (num, den) = match p.family {
        Family::Racah => (
            -((z + &d - &a) * (z + &d - &b) * (z + &d - &c) * z),
            (int(2) * z + &d - &one) * (int(2) * z + &d),
        ),
        Family::QRacah => {
            let q = p.q();
            let dz = &d * z;
            let dzz = &dz * z;
            if a.is_zero() || b.is_zero() || c.is_zero() {
                return Err(Error::singular("D (zero parameter)", s));
            }
            (
                -(p.d_tilde()
                    * (&one - &dz / &a)
                    * (&one - &dz / &b)
                    * (&one - &dz / &c)
                    * (&one - z)),
                (&one - &dzz / q) * (&one - &dzz),
            )
        }
    };
    ratio_or_zero(num, den, "D", s)
}

/// B and D on the grid `0..=N`.
pub fn potentials(p: &ParameterSet) -> Result<(GridFunction, GridFunction)> {
    let n = p.n;
    let b = GridFunction::from_fn(n, |x| b_pot(p, &p.site(x as i64)))?;
    let d = GridFunction::from_fn(n, |x| d_pot(p, &p.site(x as i64)))?;
    Ok((b, d))
}

pub fn eta(p: &ParameterSet, s: &Site) -> ExactScalar {
    let z = &s.0;
    match p.family {
        Family::Racah => z * (z + &p.d),
        Family::QRacah => {
            let one = ExactScalar::one();
            (z.recip() - &one) * (&one - &p.d * z)
        }
    }
}

pub fn eta_at(p: &ParameterSet, x: i64) -> ExactScalar {
    eta(p, &p.site(x))
}

/// (eta(x+1) - eta(x)) / eta(1).
pub fn varphi_aux(p: &ParameterSet, s: &Site) -> Result<ExactScalar> {
    let d = &p.d;
    let z = &s.0;
    let one = ExactScalar::one();
    match p.family {
        Family::Racah => checked_div(int(2) * z + d + &one, &(d + &one), "varphi", s),
        Family::QRacah => {
            let dq = d * p.q();
            checked_div(z.recip() - &dq * z, &(&one - &dq), "varphi", s)
        }
    }
}

pub fn energy(p: &ParameterSet, n: usize) -> ExactScalar {
    let dt = p.d_tilde();
    match p.family {
        Family::Racah => {
            let n = int(n as i64);
            &n * (&n + dt)
        }
        Family::QRacah => {
            let q = p.q();
            let qn = powi(q, n as i64);
            (qn.recip() - int(1)) * (int(1) - dt * qn)
        }
    }
}

/// P̌_n(x) by the terminating 4F3 (4phi3) sum.
pub fn racah_poly(p: &ParameterSet, n: usize, s: &Site) -> Result<ExactScalar> {
    let [a, b, c, d] = p.abcd();
    let dt = p.d_tilde();
    let z = &s.0;
    let one = ExactScalar::one();
    let mut total = ExactScalar::zero();
    match p.family {
        Family::Racah => {
            let ups = [-int(n as i64), int(n as i64) + &dt, -z.clone(), z + &d];
            let downs = [a, b, c, one.clone()];
            let mut num = one.clone();
            let mut den = one.clone();
            for k in 0..=n {
                if k > 0 {
                    let kk = int(k as i64 - 1);
                    for u in &ups {
                        num *= u + &kk;
                    }
                    for w in &downs {
                        den *= w + &kk;
                    }
                }
                if num.is_zero() {
                    break;
                }
                if den.is_zero() {
                    return Err(Error::Degenerate(format!(
                        "zero lower Pochhammer factor at k={k} in P_{n} for {p}"
                    )));
                }
                total += &num / &den;
            }
        }
        Family::QRacah => {
            let q = p.q();
            if z.is_zero() {
                return Err(Error::singular("P_n", s));
            }
            let ups = [powi(q, -(n as i64)), &dt * powi(q, n as i64), z.recip(), &d * z];
            let downs = [a, b, c, q.clone()];
            let mut num = one.clone();
            let mut den = one.clone();
            let mut qk = one.clone();
            for k in 0..=n {
                if k > 0 {
                    let qpow = powi(q, k as i64 - 1);
                    for u in &ups {
                        num *= &one - u * &qpow;
                    }
                    for w in &downs {
                        den *= &one - w * &qpow;
                    }
                    qk *= q;
                }
                if num.is_zero() {
                    break;
                }
                if den.is_zero() {
                    return Err(Error::Degenerate(format!(
                        "zero lower q-Pochhammer factor at k={k} in P_{n} for {p}"
                    )));
                }
                total += &num / &den * &qk;
            }
        }
    }
    Ok(total)
}

/// B(x)(f(x) - f(x+1)) + D(x)(f(x) - f(x-1)). The neighbour value is not
/// read when its potential vanishes, so boundary sites stay in range.
pub fn apply_difference_op(
    p: &ParameterSet,
    f: &dyn Fn(&Site) -> Result<ExactScalar>,
    s: &Site,
) -> Result<ExactScalar> {
    let fx = f(s)?;
    let bx = b_pot(p, s)?;
    let dx = d_pot(p, s)?;
    let mut out = ExactScalar::zero();
    if !bx.is_zero() {
        out += &bx * (&fx - f(&p.shift_site(s, 1))?);
    }
    if !dx.is_zero() {
        out += &dx * (&fx - f(&p.shift_site(s, -1))?);
    }
    Ok(out)
}

/// phi0(x)^2 = prod_{y<x} B(y)/D(y+1), for any integer x >= 0. Once B hits
/// zero the weight stays zero.
pub fn ground_weight_sq_at(p: &ParameterSet, x: usize) -> Result<ExactScalar> {
    let mut acc = ExactScalar::one();
    for y in 0..x as i64 {
        let b = b_pot(p, &p.site(y))?;
        if b.is_zero() {
            return Ok(b);
        }
        acc *= b;
        let d = d_pot(p, &p.site(y + 1))?;
        acc = checked_div(acc, &d, "phi0^2 (D)", y + 1)?;
    }
    Ok(acc)
}

/// Closed form of phi0(x)^2 at integer x.
pub fn ground_weight_sq_closed(p: &ParameterSet, x: usize) -> Result<ExactScalar> {
    let [a, b, c, d] = p.abcd();
    let one = ExactScalar::one();
    match p.family {
        Family::Racah => {
            let num = pochhammer_multi(&[a.clone(), b.clone(), c.clone(), d.clone()], x)
                * (int(2 * x as i64) + &d);
            let den = pochhammer_multi(
                &[&one + &d - &a, &one + &d - &b, &one + &d - &c, one.clone()],
                x,
            ) * &d;
            checked_div(num, &den, "phi0^2 closed form", x)
        }
        Family::QRacah => {
            let q = p.q();
            let dq = &d * q;
            let num = q_pochhammer_multi(&[a.clone(), b.clone(), c.clone(), d.clone()], q, x)
                * (&one - &d * powi(q, 2 * x as i64));
            let den = q_pochhammer_multi(&[&dq / &a, &dq / &b, &dq / &c, q.clone()], q, x)
                * powi(&p.d_tilde(), x as i64)
                * (&one - &d);
            checked_div(num, &den, "phi0^2 closed form", x)
        }
    }
}

/// phi0^2 on `0..=N` by the product formula, cross-checked against the
/// closed form.
pub fn ground_weight_sq(p: &ParameterSet) -> Result<GridFunction> {
    GridFunction::from_fn(p.n, |x| {
        let prod = ground_weight_sq_at(p, x)?;
        let closed = ground_weight_sq_closed(p, x)?;
        if prod != closed {
            return Err(Error::Inconsistent(format!(
                "phi0^2({x}) product {prod} != closed form {closed}"
            )));
        }
        Ok(prod)
    })
}

/// d_n^2, the inverse norm of phi0 P̌_n.
pub fn norm_sq(p: &ParameterSet, n: usize) -> Result<ExactScalar> {
    let [a, b, c, d] = p.abcd();
    let dt = p.d_tilde();
    let one = ExactScalar::one();
    let big_n = p.n;
    let sign = if big_n.is_multiple_of(2) { one.clone() } else { -one.clone() };
    match p.family {
        Family::Racah => {
            let first_num = pochhammer_multi(&[a.clone(), b.clone(), c.clone(), dt.clone()], n)
                * (int(2 * n as i64) + &dt);
            let first_den = pochhammer_multi(
                &[&one + &dt - &a, &one + &dt - &b, &one + &dt - &c, one.clone()],
                n,
            ) * &dt;
            let second_num =
                sign * pochhammer_multi(&[&one + &d - &a, &one + &d - &b, &one + &d - &c], big_n);
            let second_den = pochhammer(&(&dt + &one), big_n) * pochhammer(&(&d + &one), 2 * big_n);
            checked_div(first_num * second_num, &(first_den * second_den), "d_n^2", n)
        }
        Family::QRacah => {
            let q = p.q();
            let dtq = &dt * q;
            let dq = &d * q;
            let first_num = q_pochhammer_multi(&[a.clone(), b.clone(), c.clone(), dt.clone()], q, n)
                * (&one - &dt * powi(q, 2 * n as i64));
            let first_den = q_pochhammer_multi(&[&dtq / &a, &dtq / &b, &dtq / &c, q.clone()], q, n)
                * powi(&d, n as i64)
                * (&one - &dt);
            let nn = big_n as i64;
            let second_num = sign
                * q_pochhammer_multi(&[&dq / &a, &dq / &b, &dq / &c], q, big_n)
                * powi(&dt, nn)
                * powi(q, nn * (nn + 1) / 2);
            let second_den = q_pochhammer(&dtq, q, big_n) * q_pochhammer(&dq, q, 2 * big_n);
            checked_div(first_num * second_num, &(first_den * second_den), "d_n^2", n)
        }
    }
}

/// H(lambda) as a symmetric Jacobi matrix on `0..=N`.
pub fn hamiltonian_matrix(p: &ParameterSet, precision_bits: usize) -> Result<TridiagonalMatrix> {
    let (b, d) = potentials(p)?;
    TridiagonalMatrix::from_potentials(b.values(), d.values(), precision_bits)
}

/// F(lambda) f(x) = B(0) / varphi(x) * (f(x) - f(x+1)).
pub fn forward_shift_op(
    p: &ParameterSet,
    f: &dyn Fn(&Site) -> Result<ExactScalar>,
    s: &Site,
) -> Result<ExactScalar> {
    let b0 = b_pot(p, &p.site(0))?;
    let diff = f(s)? - f(&p.shift_site(s, 1))?;
    checked_div(b0 * diff, &varphi_aux(p, s)?, "F", s)
}

/// B(lambda) g(x) = (B(x) varphi(x) g(x) - D(x) varphi(x-1) g(x-1)) / B(0).
pub fn backward_shift_op(
    p: &ParameterSet,
    g: &dyn Fn(&Site) -> Result<ExactScalar>,
    s: &Site,
) -> Result<ExactScalar> {
    let b0 = b_pot(p, &p.site(0))?;
    let mut acc = b_pot(p, s)? * varphi_aux(p, s)? * g(s)?;
    let dx = d_pot(p, s)?;
    if !dx.is_zero() {
        let prev = p.shift_site(s, -1);
        acc -= dx * varphi_aux(p, &prev)? * g(&prev)?;
    }
    checked_div(acc, &b0, "B-shift", s)
}

/// F(lambda) P̌_n(x; lambda).
pub fn shift_forward(p: &ParameterSet, n: usize, s: &Site) -> Result<ExactScalar> {
    forward_shift_op(p, &|t| racah_poly(p, n, t), s)
}

/// B(lambda) P̌_{n-1}(x; lambda + delta).
pub fn shift_backward(p: &ParameterSet, n: usize, s: &Site) -> Result<ExactScalar> {
    assert!(n >= 1, "backward shift needs n >= 1");
    let up = p.shift(ShiftVector::delta(1));
    backward_shift_op(p, &|t| racah_poly(&up, n - 1, t), s)
}

/// Q_x(E_n) = P_n(eta(x)).
pub fn dual_value(p: &ParameterSet, x: usize, n: usize) -> Result<ExactScalar> {
    racah_poly(p, n, &p.site(x as i64))
}

/// Fixed off-grid evaluation points. For q-Racah they are values of q^x,
/// with any exact power of q dropped.
pub fn off_grid_sites(p: &ParameterSet) -> Vec<Site> {
    let base = [rat(1, 3), rat(1, 2), rat(5, 7), rat(9, 4), rat(11, 3)];
    match p.family {
        Family::Racah => base.into_iter().map(Site).collect(),
        Family::QRacah => base
            .into_iter()
            .filter(|z| crate::scalar::integer_log(z, p.q()).is_none())
            .map(Site)
            .collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::ShiftVector;

    fn pr() -> ParameterSet {
        ParameterSet::racah(3, int(12), rat(1, 2), int(1))
    }

    fn pq() -> ParameterSet {
        let q = rat(1, 2);
        ParameterSet::qracah(3, q.clone(), powi(&q, 10), rat(1, 2), rat(1, 2)).unwrap()
    }

    #[test]
    fn potential_boundaries() {
        for p in [pr(), pq()] {
            let (b, d) = potentials(&p).unwrap();
            assert!(b.at(3).is_zero());
            assert!(d.at(0).is_zero());
            for x in 0..3 {
                assert!(b.at(x) > &ExactScalar::zero());
                assert!(d.at(x + 1) > &ExactScalar::zero());
            }
        }
        assert_eq!(b_pot(&pr(), &Site(int(0))).unwrap(), int(9));
        assert_eq!(b_pot(&pq(), &Site(int(1))).unwrap(), rat(2387, 512));
    }

    #[test]
    fn sinusoidal_coordinate_and_energies() {
        for p in [pr(), pq()] {
            assert!(eta_at(&p, 0).is_zero());
            assert!(energy(&p, 0).is_zero());
            assert_eq!(varphi_aux(&p, &p.site(0)).unwrap(), int(1));
            for x in 0..5 {
                assert!(eta_at(&p, x + 1) > eta_at(&p, x));
            }
            for n in 0..3 {
                assert!(energy(&p, n + 1) > energy(&p, n));
            }
        }
        assert_eq!(eta_at(&pr(), 1), int(2));
        assert_eq!(energy(&pr(), 1), rat(17, 2));
        assert_eq!(eta_at(&pq(), 1), rat(3, 4));
        assert_eq!(energy(&pq(), 1), rat(127, 128));
    }

    #[test]
    fn varphi_identities() {
        for p in [pr(), pq()] {
            let p2 = p.shift(ShiftVector::delta(2));
            let phi1 = varphi_aux(&p, &p.site(1)).unwrap();
            for x in 0..4 {
                let s = p.site(x);
                let via_eta = (eta(&p, &p.shift_site(&s, 1)) - eta(&p, &s)) / eta_at(&p, 1);
                assert_eq!(varphi_aux(&p, &s).unwrap(), via_eta);
                if x >= 1 {
                    let ratio = varphi_aux(&p, &s).unwrap()
                        / varphi_aux(&p2, &p.shift_site(&s, -1)).unwrap();
                    assert_eq!(ratio, phi1);
                }
            }
        }
    }

    #[test]
    fn polynomial_values() {
        let p = pr();
        for x in 0..4 {
            assert_eq!(racah_poly(&p, 0, &p.site(x)).unwrap(), int(1));
        }
        for n in 0..4 {
            assert_eq!(racah_poly(&p, n, &p.site(0)).unwrap(), int(1));
        }
        assert_eq!(racah_poly(&p, 1, &p.site(1)).unwrap(), rat(1, 18));
    }

    #[test]
    fn difference_equation_on_and_off_grid() {
        for p in [pr(), pq()] {
            let mut sites: Vec<Site> = (0..4).map(|x| p.site(x)).collect();
            sites.extend(off_grid_sites(&p));
            for n in 0..4 {
                for s in &sites {
                    let lhs = apply_difference_op(&p, &|t| racah_poly(&p, n, t), s).unwrap();
                    let rhs = energy(&p, n) * racah_poly(&p, n, s).unwrap();
                    assert_eq!(lhs, rhs, "n={n} at {s}");
                }
            }
            let c = apply_difference_op(&p, &|_| Ok(rat(7, 3)), &p.site(2)).unwrap();
            assert!(c.is_zero());
        }
    }

    #[test]
    fn ground_weight_forms_agree() {
        for p in [pr(), pq()] {
            let w = ground_weight_sq(&p).unwrap();
            assert_eq!(w.at(0), &int(1));
            let (b, d) = potentials(&p).unwrap();
            assert_eq!(w.at(1), &(b.at(0) / d.at(1)));
            assert!(w.values().iter().all(|v| v > &ExactScalar::zero()));
            assert!(ground_weight_sq_at(&p, 4).unwrap().is_zero());
        }
    }

    #[test]
    fn orthogonality_and_norms() {
        for p in [pr(), pq()] {
            let w = ground_weight_sq(&p).unwrap();
            for n in 0..4 {
                for m in 0..4 {
                    let s: ExactScalar = (0..4)
                        .map(|x| {
                            w.at(x)
                                * racah_poly(&p, n, &p.site(x as i64)).unwrap()
                                * racah_poly(&p, m, &p.site(x as i64)).unwrap()
                        })
                        .sum();
                    if n == m {
                        assert_eq!(s * norm_sq(&p, n).unwrap(), int(1));
                    } else {
                        assert!(s.is_zero());
                    }
                }
            }
        }
    }

    #[test]
    fn dual_orthogonality() {
        for p in [pr(), pq()] {
            let w = ground_weight_sq(&p).unwrap();
            for x in 0..4usize {
                for y in 0..4usize {
                    let s: ExactScalar = (0..4)
                        .map(|n| {
                            norm_sq(&p, n).unwrap()
                                * dual_value(&p, x, n).unwrap()
                                * dual_value(&p, y, n).unwrap()
                        })
                        .sum();
                    if x == y {
                        assert_eq!(s * w.at(x), int(1));
                    } else {
                        assert!(s.is_zero());
                    }
                }
            }
            for n in 0..4 {
                assert_eq!(dual_value(&p, 0, n).unwrap(), int(1));
            }
        }
    }

    #[test]
    fn shift_relations() {
        for p in [pr(), pq()] {
            let up = p.shift(ShiftVector::delta(1));
            let mut sites: Vec<Site> = (0..4).map(|x| p.site(x)).collect();
            sites.extend(off_grid_sites(&p));
            for n in 1..4 {
                for s in &sites {
                    let f = shift_forward(&p, n, s).unwrap();
                    assert_eq!(f, energy(&p, n) * racah_poly(&up, n - 1, s).unwrap());
                    assert_eq!(shift_backward(&p, n, s).unwrap(), racah_poly(&p, n, s).unwrap());
                }
            }
            let f1 = shift_forward(&p, 1, &p.site(2)).unwrap();
            assert_eq!(f1, energy(&p, 1));
        }
    }

    #[test]
    fn involution_invariance() {
        for p in [pr(), pq()] {
            for s in off_grid_sites(&p) {
                let t = p.involution_site(&s);
                for n in 0..4 {
                    assert_eq!(racah_poly(&p, n, &s).unwrap(), racah_poly(&p, n, &t).unwrap());
                }
            }
        }
    }

    #[test]
    fn off_grid_sites_avoid_powers_of_q() {
        assert_eq!(off_grid_sites(&pr()).len(), 5);
        assert_eq!(off_grid_sites(&pq()).len(), 4);
    }
}

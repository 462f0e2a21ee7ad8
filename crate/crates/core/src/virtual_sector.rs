//! Twisted potentials, virtual energies, the virtual polynomials xi_v and the
//! ratio function nu.

use num_traits::{One, Signed, Zero};

use crate::error::{Error, Result};
use crate::lattice::{b_pot, checked_div, d_pot, energy, ground_weight_sq_at, off_grid_sites, racah_poly, GridFunction};
use crate::params::{Family, ParameterSet, Site};
use crate::scalar::{int, powi, ExactScalar};

/// alpha: 1 (Racah), ab/(dq) (q-Racah).
pub fn alpha(p: &ParameterSet) -> ExactScalar {
    match p.family {
        Family::Racah => ExactScalar::one(),
        Family::QRacah => &p.a * &p.b / (&p.d * p.q()),
    }
}

/// alpha': -c(a+b-d-1) (Racah), -(1-c)(1-ab/(dq)) (q-Racah).
pub fn alpha_prime(p: &ParameterSet) -> ExactScalar {
    let one = ExactScalar::one();
    match p.family {
        Family::Racah => -(&p.c * (&p.a + &p.b - &p.d - &one)),
        Family::QRacah => -((&one - &p.c) * (&one - alpha(p))),
    }
}

pub fn b_prime(p: &ParameterSet, s: &Site) -> Result<ExactScalar> {
    b_pot(&p.twist(), s)
}

pub fn d_prime(p: &ParameterSet, s: &Site) -> Result<ExactScalar> {
    d_pot(&p.twist(), s)
}

/// B' on `0..=N+M` and D' on `0..=N+1`, with the sign pattern checked:
/// B' > 0 below N+M, D'(0) = D'(N+1) = 0 and D' > 0 in between.
pub fn twisted_potentials(p: &ParameterSet, m: usize) -> Result<(GridFunction, GridFunction)> {
    let t = p.twist();
    let n = p.n;
    let bp = GridFunction::from_fn(n + m, |x| b_pot(&t, &t.site(x as i64)))?;
    let dp = GridFunction::from_fn(n + 1, |x| d_pot(&t, &t.site(x as i64)))?;
    for x in 0..n + m {
        if !bp.at(x).is_positive() {
            return Err(Error::Range(format!("B'({x}) = {} is not positive", bp.at(x))));
        }
    }
    for x in [0, n + 1] {
        if !dp.at(x).is_zero() {
            return Err(Error::Range(format!("D'({x}) = {} is not zero", dp.at(x))));
        }
    }
    for x in 1..=n {
        if !dp.at(x).is_positive() {
            return Err(Error::Range(format!("D'({x}) = {} is not positive", dp.at(x))));
        }
    }
    Ok((bp, dp))
}

/// Residuals of B(x)D(x+1) = alpha^2 B'(x)D'(x+1) and
/// B(x)+D(x) = alpha(B'(x)+D'(x)) + alpha' at `x = 0..=N`.
pub fn twist_relation_residuals(p: &ParameterSet) -> Result<Vec<ExactScalar>> {
    let t = p.twist();
    let al = alpha(p);
    let alp = alpha_prime(p);
    let mut out = Vec::new();
    for x in 0..=p.n as i64 {
        let s = p.site(x);
        let s1 = p.site(x + 1);
        let prod = b_pot(p, &s)? * d_pot(p, &s1)? - &al * &al * b_pot(&t, &s)? * d_pot(&t, &s1)?;
        let sum = b_pot(p, &s)? + d_pot(p, &s)? - (&al * (b_pot(&t, &s)? + d_pot(&t, &s)?) + &alp);
        out.push(prod);
        out.push(sum);
    }
    Ok(out)
}

/// Closed form of the virtual energy.
pub fn virtual_energy(p: &ParameterSet, v: usize) -> ExactScalar {
    let [a, b, c, d] = p.abcd();
    let one = ExactScalar::one();
    let vv = int(v as i64);
    match p.family {
        Family::Racah => -((&c + &vv) * (&a + &b - &d - &one - &vv)),
        Family::QRacah => {
            let q = p.q();
            -((&one - &c * powi(q, v as i64)) * (&one - &a * &b / &d * powi(q, -1 - v as i64)))
        }
    }
}

/// alpha E_v(t(lambda)) + alpha'.
pub fn virtual_energy_via_twist(p: &ParameterSet, v: usize) -> ExactScalar {
    alpha(p) * energy(&p.twist(), v) + alpha_prime(p)
}

/// The individual terms of the explicit xi_v sum, each written in the
/// untwisted parameters.
pub fn xi_terms(p: &ParameterSet, v: usize, s: &Site) -> Result<Vec<ExactScalar>> {
    let [a, b, c, d] = p.abcd();
    let z = &s.0;
    let one = ExactScalar::one();
    let vv = int(v as i64);
    let (ups, downs, q): (Vec<ExactScalar>, Vec<ExactScalar>, Option<ExactScalar>) = match p.family {
        Family::Racah => (
            vec![-vv.clone(), &vv - &a - &b + &c + &d + &one, -z.clone(), z + &d],
            vec![&d - &a + &one, &d - &b + &one, c.clone()],
            None,
        ),
        Family::QRacah => {
            let q = p.q().clone();
            if z.is_zero() {
                return Err(Error::singular("xi_v", s));
            }
            (
                vec![
                    powi(&q, -(v as i64)),
                    &c * &d / (&a * &b) * powi(&q, v as i64 + 1),
                    z.recip(),
                    &d * z,
                ],
                vec![&d * &q / &a, &d * &q / &b, c.clone()],
                Some(q),
            )
        }
    };
    let mut terms = Vec::with_capacity(v + 1);
    let mut num = one.clone();
    let mut den = one.clone();
    for k in 0..=v {
        if k > 0 {
            match &q {
                None => {
                    let kk = int(k as i64 - 1);
                    for u in &ups {
                        num *= u + &kk;
                    }
                    for w in &downs {
                        den *= w + &kk;
                    }
                    den *= int(k as i64);
                }
                Some(q) => {
                    let qp = powi(q, k as i64 - 1);
                    for u in &ups {
                        num *= &one - u * &qp;
                    }
                    for w in &downs {
                        den *= &one - w * &qp;
                    }
                    den *= &one - powi(q, k as i64);
                    num *= q;
                }
            }
        }
        if num.is_zero() {
            break;
        }
        terms.push(checked_div(num.clone(), &den, "xi_v term", k)?);
    }
    Ok(terms)
}

/// xi_v(x) as the explicit terminating sum.
pub fn xi_poly(p: &ParameterSet, v: usize, s: &Site) -> Result<ExactScalar> {
    Ok(xi_terms(p, v, s)?.into_iter().sum())
}

/// xi_v(x) = P̌_v(x; t(lambda)).
pub fn xi_via_twist(p: &ParameterSet, v: usize, s: &Site) -> Result<ExactScalar> {
    racah_poly(&p.twist(), v, s)
}

/// nu on `0..=x_hi` from nu(0) = 1 and nu(x+1) = B(x)/(alpha B'(x)) nu(x).
pub fn nu_grid(p: &ParameterSet, x_hi: usize) -> Result<GridFunction> {
    let al = alpha(p);
    let t = p.twist();
    let mut vals = vec![ExactScalar::one()];
    for x in 0..x_hi {
        let prev = &vals[x];
        let next = if prev.is_zero() {
            ExactScalar::zero()
        } else {
            let s = p.site(x as i64);
            let bp = b_pot(&t, &s)?;
            if bp.is_zero() {
                return Err(Error::Range(format!("B'({x}) = 0 before nu reached x = {x_hi}")));
            }
            b_pot(p, &s)? / (&al * bp) * prev
        };
        vals.push(next);
    }
    Ok(GridFunction::new(vals))
}

/// Walks nu back with nu(x-1) = D(x)/(alpha D'(x)) nu(x) and returns the
/// mismatches against the forward grid on `0..x_top`.
pub fn nu_backward_residuals(p: &ParameterSet, nu: &GridFunction, x_top: usize) -> Result<Vec<ExactScalar>> {
    let al = alpha(p);
    let t = p.twist();
    let mut out = Vec::new();
    for x in 1..=x_top {
        let s = p.site(x as i64);
        let back = checked_div(d_pot(p, &s)? * nu.at(x), &(&al * d_pot(&t, &s)?), "nu backward", x)?;
        out.push(back - nu.at(x - 1));
    }
    Ok(out)
}

/// phi~0(x)^2 = prod_{y<x} B'(y)/D'(y+1) on `0..=N`.
pub fn twisted_ground_weight_sq(p: &ParameterSet) -> Result<GridFunction> {
    let t = p.twist();
    GridFunction::from_fn(p.n, |x| ground_weight_sq_at(&t, x))
}

/// Residuals of the virtual equation in truncated matrix form at `x = 0..=N`.
/// The neighbour x+1 is dropped at x = N, so the last entry equals
/// B'(N) xi_v(N+1) while all others vanish.
pub fn virtual_equation_grid_residuals(p: &ParameterSet, v: usize) -> Result<Vec<ExactScalar>> {
    let t = p.twist();
    let ev = energy(&t, v);
    let n = p.n as i64;
    let xi = |x: i64| xi_poly(p, v, &p.site(x));
    (0..=n)
        .map(|x| {
            let s = p.site(x);
            let fx = xi(x)?;
            let mut r = b_pot(&t, &s)? * &fx + d_pot(&t, &s)? * &fx - &ev * &fx;
            if x < n {
                r -= b_pot(&t, &s)? * xi(x + 1)?;
            }
            if x > 0 {
                r -= d_pot(&t, &s)? * xi(x - 1)?;
            }
            Ok(r)
        })
        .collect()
}

/// Residuals of the full polynomial equation B'(xi(x)-xi(x+1)) + D'(xi(x)-xi(x-1)) = E'_v xi(x)
/// at the given sites.
pub fn virtual_equation_residuals_at(p: &ParameterSet, v: usize, sites: &[Site]) -> Result<Vec<ExactScalar>> {
    let t = p.twist();
    let ev = energy(&t, v);
    sites
        .iter()
        .map(|s| {
            let f = |u: &Site| xi_poly(p, v, u);
            Ok(crate::lattice::apply_difference_op(&t, &f, s)? - &ev * f(s)?)
        })
        .collect()
}

#[derive(Clone, Debug)]
pub struct VirtualEquationReport {
    pub v: usize,
    /// Truncated matrix residuals at x = 0..=N.
    pub grid_residuals: Vec<ExactScalar>,
    /// Polynomial-equation residuals at the off-grid points.
    pub off_grid_residuals: Vec<ExactScalar>,
    /// Expected last grid residual, B'(N) xi_v(N+1).
    pub boundary_prediction: ExactScalar,
}

impl VirtualEquationReport {
    /// Interior and off-grid residuals vanish and the boundary one does not.
    pub fn passes(&self) -> bool {
        let (last, interior) = self.grid_residuals.split_last().expect("nonempty grid");
        interior.iter().all(Zero::is_zero)
            && !last.is_zero()
            && *last == self.boundary_prediction
            && self.off_grid_residuals.iter().all(Zero::is_zero)
    }
}

pub fn verify_virtual_equation(p: &ParameterSet, v: usize) -> Result<VirtualEquationReport> {
    let grid_residuals = virtual_equation_grid_residuals(p, v)?;
    let off_grid_residuals = virtual_equation_residuals_at(p, v, &off_grid_sites(p))?;
    let n = p.n as i64;
    let boundary_prediction = b_prime(p, &p.site(n))? * xi_poly(p, v, &p.site(n + 1))?;
    if grid_residuals.last().is_some_and(Zero::is_zero) {
        return Err(Error::Degenerate(format!("virtual equation for v={v} is satisfied at x=N")));
    }
    Ok(VirtualEquationReport { v, grid_residuals, off_grid_residuals, boundary_prediction })
}

/// Precomputed virtual-sector data for one parameter set.
#[derive(Clone, Debug)]
pub struct VirtualData {
    pub params: ParameterSet,
    pub alpha: ExactScalar,
    pub alpha_prime: ExactScalar,
    pub v_set: Vec<usize>,
    /// xi_v on `0..=N+1` for each v in `v_set`, same order.
    pub xi_grids: Vec<GridFunction>,
    pub nu_grid: GridFunction,
}

impl VirtualData {
    /// Builds the data for deleting up to `m` virtual states and checks the
    /// signs of xi_v and the virtual energies.
    pub fn new(p: &ParameterSet, m: usize) -> Result<Self> {
        let v_set = p.virtual_index_set()?;
        let al = alpha(p);
        let alp = alpha_prime(p);
        if !al.is_positive() {
            return Err(Error::SignViolation(format!("alpha = {al} is not positive")));
        }
        if !alp.is_negative() {
            return Err(Error::SignViolation(format!("alpha' = {alp} is not negative")));
        }
        let mut xi_grids = Vec::with_capacity(v_set.len());
        for &v in &v_set {
            let e = virtual_energy(p, v);
            if !e.is_negative() {
                return Err(Error::SignViolation(format!("virtual energy E~_{v} = {e} is not negative")));
            }
            let g = GridFunction::from_fn(p.n + 1, |x| xi_poly(p, v, &p.site(x as i64)))?;
            if let Some((x, val)) = g.values().iter().enumerate().find(|(_, val)| !val.is_positive()) {
                return Err(Error::SignViolation(format!("xi_{v}({x}) = {val} is not positive")));
            }
            xi_grids.push(g);
        }
        let nu_grid = nu_grid(p, p.n + m)?;
        Ok(VirtualData { params: p.clone(), alpha: al, alpha_prime: alp, v_set, xi_grids, nu_grid })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::ground_weight_sq;
    use crate::scalar::rat;

    fn pr() -> ParameterSet {
        ParameterSet::racah(3, int(12), rat(1, 2), int(1))
    }

    fn pq() -> ParameterSet {
        let q = rat(1, 2);
        ParameterSet::qracah(3, q.clone(), powi(&q, 10), rat(1, 2), rat(1, 2)).unwrap()
    }

    #[test]
    fn twisted_potential_pattern() {
        for p in [pr(), pq()] {
            let (bp, dp) = twisted_potentials(&p, 2).unwrap();
            assert_eq!(bp.x_hi(), 5);
            assert!(dp.at(0).is_zero() && dp.at(4).is_zero());
            assert!(twist_relation_residuals(&p).unwrap().iter().all(Zero::is_zero));
        }
    }

    #[test]
    fn virtual_energies() {
        let p = pr();
        let want = [rat(-7, 2), int(-9), rat(-25, 2), int(-14)];
        for (v, w) in want.iter().enumerate() {
            assert_eq!(&virtual_energy(&p, v), w);
        }
        let p = pq();
        let want = [rat(-31, 64), rat(-45, 64), rat(-49, 64), rat(-45, 64)];
        for (v, w) in want.iter().enumerate() {
            assert_eq!(&virtual_energy(&p, v), w);
        }
        for p in [pr(), pq()] {
            assert_eq!(virtual_energy(&p, 0), alpha_prime(&p));
            for v in 0..5 {
                assert_eq!(virtual_energy(&p, v), virtual_energy_via_twist(&p, v));
            }
        }
    }

    #[test]
    fn xi_forms_agree() {
        for p in [pr(), pq()] {
            for v in 0..4 {
                assert_eq!(xi_poly(&p, v, &p.site(0)).unwrap(), int(1));
                for s in off_grid_sites(&p).into_iter().chain((0..5).map(|x| p.site(x))) {
                    assert_eq!(xi_poly(&p, v, &s).unwrap(), xi_via_twist(&p, v, &s).unwrap());
                }
            }
            assert_eq!(xi_poly(&p, 0, &Site(rat(9, 4))).unwrap(), int(1));
        }
    }

    #[test]
    fn xi_terms_nonnegative_on_grid() {
        for p in [pr(), pq()] {
            for v in p.virtual_index_set().unwrap() {
                for x in 0..=(p.n as i64 + 1) {
                    assert!(xi_terms(&p, v, &p.site(x)).unwrap().iter().all(|t| !t.is_negative()));
                }
            }
        }
    }

    #[test]
    fn nu_properties() {
        for p in [pr(), pq()] {
            let nu = nu_grid(&p, 5).unwrap();
            assert_eq!(nu.at(0), &int(1));
            assert!(nu.at(4).is_zero() && nu.at(5).is_zero());
            let w = ground_weight_sq(&p).unwrap();
            let wt = twisted_ground_weight_sq(&p).unwrap();
            for x in 0..=3 {
                assert_eq!(nu.at(x) * nu.at(x) * wt.at(x), w.at(x).clone());
            }
            assert!(nu_backward_residuals(&p, &nu, 3).unwrap().iter().all(Zero::is_zero));
        }
    }

    #[test]
    fn virtual_equation_boundary() {
        for p in [pr(), pq()] {
            for v in p.virtual_index_set().unwrap() {
                let r = verify_virtual_equation(&p, v).unwrap();
                assert!(r.passes(), "{r:?}");
            }
            let r = verify_virtual_equation(&p, 0).unwrap();
            assert!(r.passes());
        }
    }

    #[test]
    fn virtual_data() {
        let vd = VirtualData::new(&pr(), 3).unwrap();
        assert_eq!(vd.v_set, vec![1, 2, 3]);
        assert_eq!(vd.nu_grid.x_hi(), 6);
        let vd = VirtualData::new(&pq(), 2).unwrap();
        assert_eq!(vd.v_set, vec![1, 2]);
        assert!(vd.alpha.is_positive() && vd.alpha_prime.is_negative());
    }
}

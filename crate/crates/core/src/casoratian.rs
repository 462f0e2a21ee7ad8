//! Casorati determinants (discrete Wronskians) and the auxiliary product
//! varphi_M.

use num_traits::{One, Zero};

use crate::error::{Error, Result};
use crate::lattice::{eta, eta_at, varphi_aux};
use crate::params::{ParameterSet, ShiftVector, Site};
use crate::scalar::ExactScalar;

pub type Evaluator<'a> = Box<dyn Fn(&Site) -> Result<ExactScalar> + 'a>;

/// One column f_k of a Casoratian.
pub struct FunctionColumn<'a> {
    pub label: String,
    pub eval: Evaluator<'a>,
}

impl<'a> FunctionColumn<'a> {
    pub fn new(label: impl Into<String>, f: impl Fn(&Site) -> Result<ExactScalar> + 'a) -> Self {
        FunctionColumn { label: label.into(), eval: Box::new(f) }
    }

    fn at(&self, s: &Site) -> Result<ExactScalar> {
        (self.eval)(s).map_err(|e| match e {
            Error::Singular { what, at } => Error::Singular { what: format!("{what} in column {}", self.label), at },
            other => other,
        })
    }
}

/// Determinant by fraction-free (Bareiss) elimination with row pivoting.
pub fn determinant(mut m: Vec<Vec<ExactScalar>>) -> ExactScalar {
    let n = m.len();
    if n == 0 {
        return ExactScalar::one();
    }
    let mut sign = ExactScalar::one();
    let mut prev = ExactScalar::one();
    for k in 0..n - 1 {
        if m[k][k].is_zero() {
            match (k + 1..n).find(|&i| !m[i][k].is_zero()) {
                Some(i) => {
                    m.swap(k, i);
                    sign = -sign;
                }
                None => return ExactScalar::zero(),
            }
        }
        for i in k + 1..n {
            for j in k + 1..n {
                let v = (&m[i][j] * &m[k][k] - &m[i][k] * &m[k][j]) / &prev;
                m[i][j] = v;
            }
        }
        prev = m[k][k].clone();
    }
    sign * &m[n - 1][n - 1]
}

/// Determinant by Laplace expansion along the first row.
pub fn determinant_cofactor(m: &[Vec<ExactScalar>]) -> ExactScalar {
    let n = m.len();
    match n {
        0 => ExactScalar::one(),
        1 => m[0][0].clone(),
        _ => {
            let mut acc = ExactScalar::zero();
            for col in 0..n {
                if m[0][col].is_zero() {
                    continue;
                }
                let minor: Vec<Vec<ExactScalar>> = m[1..]
                    .iter()
                    .map(|row| row.iter().enumerate().filter(|(j, _)| *j != col).map(|(_, v)| v.clone()).collect())
                    .collect();
                let term = &m[0][col] * determinant_cofactor(&minor);
                if col % 2 == 0 {
                    acc += term;
                } else {
                    acc -= term;
                }
            }
            acc
        }
    }
}

/// The matrix (f_k(x+j-1)), rows j, columns k.
pub fn casoratian_matrix(p: &ParameterSet, fs: &[FunctionColumn<'_>], s: &Site) -> Result<Vec<Vec<ExactScalar>>> {
    let n = fs.len();
    (0..n)
        .map(|j| {
            let sj = p.shift_site(s, j as i64);
            fs.iter().map(|f| f.at(&sj)).collect::<Result<Vec<_>>>()
        })
        .collect()
}

/// W[f_1, ..., f_n](x) = det(f_k(x+j-1)).
pub fn casoratian(p: &ParameterSet, fs: &[FunctionColumn<'_>], s: &Site) -> Result<ExactScalar> {
    Ok(determinant(casoratian_matrix(p, fs, s)?))
}

/// varphi_M(x) = prod_{j<k} (eta(x+k-1) - eta(x+j-1)) / eta(k-j).
pub fn varphi_m(p: &ParameterSet, m: usize, s: &Site) -> Result<ExactScalar> {
    let etas: Vec<ExactScalar> = (0..m).map(|i| eta(p, &p.shift_site(s, i as i64))).collect();
    let mut acc = ExactScalar::one();
    for j in 0..m {
        for k in j + 1..m {
            let den = eta_at(p, (k - j) as i64);
            if den.is_zero() {
                return Err(Error::singular("varphi_M (eta(k-j) = 0)", s));
            }
            acc *= (&etas[k] - &etas[j]) / den;
        }
    }
    Ok(acc)
}

/// varphi_M(x) = prod_{j<k} varphi(x+j-1; lambda + (k-j-1) delta).
pub fn varphi_m_shifted(p: &ParameterSet, m: usize, s: &Site) -> Result<ExactScalar> {
    let mut acc = ExactScalar::one();
    for j in 1..=m {
        for k in j + 1..=m {
            let pk = p.shift(ShiftVector::delta((k - j - 1) as i64));
            acc *= varphi_aux(&pk, &p.shift_site(s, j as i64 - 1))?;
        }
    }
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::off_grid_sites;
    use crate::scalar::{int, powi, rat};
    use proptest::prelude::*;

    fn pr() -> ParameterSet {
        ParameterSet::racah(3, int(12), rat(1, 2), int(1))
    }

    fn pq() -> ParameterSet {
        let q = rat(1, 2);
        ParameterSet::qracah(3, q.clone(), powi(&q, 10), rat(1, 2), rat(1, 2)).unwrap()
    }

    #[test]
    fn small_casoratians() {
        let p = pr();
        let s = Site(rat(2, 3));
        assert_eq!(casoratian(&p, &[], &s).unwrap(), int(1));
        let f = || FunctionColumn::new("f", |t: &Site| Ok(&t.0 * &t.0 + int(1)));
        assert_eq!(casoratian(&p, &[f()], &s).unwrap(), rat(13, 9));
        assert!(casoratian(&p, &[f(), f()], &s).unwrap().is_zero());
    }

    #[test]
    fn column_labels_reach_errors() {
        let p = pr();
        let bad = FunctionColumn::new("xi_7", |t: &Site| Err(Error::singular("thing", t)));
        let err = casoratian(&p, &[bad], &Site(int(0))).unwrap_err();
        assert!(err.to_string().contains("xi_7"), "{err}");
    }

    #[test]
    fn varphi_m_forms() {
        for p in [pr(), pq()] {
            for s in off_grid_sites(&p).into_iter().chain((0..4).map(|x| p.site(x))) {
                assert_eq!(varphi_m(&p, 0, &s).unwrap(), int(1));
                assert_eq!(varphi_m(&p, 1, &s).unwrap(), int(1));
                assert_eq!(varphi_m(&p, 2, &s).unwrap(), varphi_aux(&p, &s).unwrap());
                for m in 2..5 {
                    assert_eq!(varphi_m(&p, m, &s).unwrap(), varphi_m_shifted(&p, m, &s).unwrap());
                }
            }
        }
    }

    #[test]
    fn bareiss_handles_zero_pivots() {
        let m = vec![
            vec![int(0), int(2), int(1)],
            vec![int(1), int(0), int(3)],
            vec![int(4), int(5), int(0)],
        ];
        assert_eq!(determinant(m.clone()), determinant_cofactor(&m));
        assert_eq!(determinant(m), int(29));
        let singular = vec![vec![int(1), int(2)], vec![int(2), int(4)]];
        assert!(determinant(singular).is_zero());
    }

    /// A random column: a small rational polynomial in the site value.
    #[derive(Clone, Debug)]
    struct Poly(Vec<(i64, i64)>);

    impl Poly {
        fn eval(&self, t: &ExactScalar) -> ExactScalar {
            self.0.iter().rev().fold(ExactScalar::zero(), |acc, &(n, d)| acc * t + rat(n, d))
        }
    }

    fn poly() -> impl Strategy<Value = Poly> {
        prop::collection::vec((-9i64..10, 1i64..5), 1..5).prop_map(Poly)
    }

    fn columns<'a>(ps: &'a [Poly]) -> Vec<FunctionColumn<'a>> {
        ps.iter().enumerate().map(|(i, f)| FunctionColumn::new(format!("f{i}"), move |t: &Site| Ok(f.eval(&t.0)))).collect()
    }

    fn site() -> impl Strategy<Value = Site> {
        (-20i64..20, 1i64..7).prop_map(|(n, d)| Site(rat(n, d)))
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(128))]

        #[test]
        fn bareiss_matches_cofactor(fs in prop::collection::vec(poly(), 0..5), s in site()) {
            let p = pr();
            let cols = columns(&fs);
            let m = casoratian_matrix(&p, &cols, &s).unwrap();
            prop_assert_eq!(determinant(m.clone()), determinant_cofactor(&m));
        }

        #[test]
        fn product_identity(fs in prop::collection::vec(poly(), 1..5), g in poly(), s in site()) {
            let p = pr();
            let n = fs.len();
            let scaled: Vec<FunctionColumn> = fs
                .iter()
                .map(|f| {
                    let g = g.clone();
                    FunctionColumn::new("g*f", move |t: &Site| Ok(g.eval(&t.0) * f.eval(&t.0)))
                })
                .collect();
            let lhs = casoratian(&p, &scaled, &s).unwrap();
            let gprod: ExactScalar = (0..n).map(|k| g.eval(&p.shift_site(&s, k as i64).0)).product();
            let rhs = gprod * casoratian(&p, &columns(&fs), &s).unwrap();
            prop_assert_eq!(lhs, rhs);
        }

        #[test]
        fn product_identity_q_lattice(fs in prop::collection::vec(poly(), 1..4), g in poly(), s in site()) {
            let p = pq();
            let n = fs.len();
            let scaled: Vec<FunctionColumn> = fs
                .iter()
                .map(|f| {
                    let g = g.clone();
                    FunctionColumn::new("g*f", move |t: &Site| Ok(g.eval(&t.0) * f.eval(&t.0)))
                })
                .collect();
            let lhs = casoratian(&p, &scaled, &s).unwrap();
            let gprod: ExactScalar = (0..n).map(|k| g.eval(&p.shift_site(&s, k as i64).0)).product();
            prop_assert_eq!(lhs, gprod * casoratian(&p, &columns(&fs), &s).unwrap());
        }

        #[test]
        fn jacobi_identity(fs in prop::collection::vec(poly(), 0..4), g in poly(), h in poly(), s in site()) {
            let p = pr();
            let with = |extra: Vec<&Poly>| -> Vec<Poly> {
                fs.iter().cloned().chain(extra.into_iter().cloned()).collect()
            };
            let fg = with(vec![&g]);
            let fh = with(vec![&h]);
            let fgh = with(vec![&g, &h]);
            let wfg = |t: &Site| casoratian(&p, &columns(&fg), t);
            let wfh = |t: &Site| casoratian(&p, &columns(&fh), t);
            let outer = [FunctionColumn::new("W[f,g]", wfg), FunctionColumn::new("W[f,h]", wfh)];
            let lhs = casoratian(&p, &outer, &s).unwrap();
            let rhs = casoratian(&p, &columns(&fs), &p.shift_site(&s, 1)).unwrap()
                * casoratian(&p, &columns(&fgh), &s).unwrap();
            prop_assert_eq!(lhs, rhs);
        }

        #[test]
        fn multilinear_in_a_column(fs in prop::collection::vec(poly(), 1..5), g in poly(), k in 0usize..4, lam in (-5i64..6), s in site()) {
            let p = pr();
            let k = k % fs.len();
            let lam = ExactScalar::from_integer(lam.into());
            let base = casoratian(&p, &columns(&fs), &s).unwrap();
            let mut with_g = fs.clone();
            with_g[k] = g.clone();
            let other = casoratian(&p, &columns(&with_g), &s).unwrap();
            let mut cols = columns(&fs);
            let (fk, gg, l) = (fs[k].clone(), g.clone(), lam.clone());
            cols[k] = FunctionColumn::new("f+lam g", move |t: &Site| Ok(fk.eval(&t.0) + &l * gg.eval(&t.0)));
            prop_assert_eq!(casoratian(&p, &cols, &s).unwrap(), base + lam * other);
        }

        #[test]
        fn column_swap_flips_sign(fs in prop::collection::vec(poly(), 2..5), i in 0usize..4, j in 0usize..4, s in site()) {
            let p = pr();
            let (i, j) = (i % fs.len(), j % fs.len());
            prop_assume!(i != j);
            let mut swapped = fs.clone();
            swapped.swap(i, j);
            let a = casoratian(&p, &columns(&fs), &s).unwrap();
            let b = casoratian(&p, &columns(&swapped), &s).unwrap();
            prop_assert_eq!(a, -b);
        }
    }
}

//! Step-by-step deletion of virtual states: hatted and standard potentials,
//! transformed eigenvectors and virtual vectors, all in square-root-free form.

use num_traits::{Signed, Zero};

use crate::casoratian::determinant;
use crate::error::{Error, Result};
use crate::highprec::{Real, TridiagonalMatrix};
use crate::lattice::{checked_div, energy, norm_sq, racah_poly, GridFunction};
use crate::params::ParameterSet;
use crate::scalar::ExactScalar;
use crate::virtual_sector::{alpha, b_prime, d_prime, nu_grid, twisted_ground_weight_sq, twisted_potentials, virtual_energy, xi_poly};

/// +1 or -1 when every entry is nonzero with a common sign.
pub fn definite_sign(values: &[ExactScalar]) -> Option<i8> {
    let first = values.first()?;
    let s: i8 = if first.is_positive() {
        1
    } else if first.is_negative() {
        -1
    } else {
        return None;
    };
    values
        .iter()
        .all(|v| if s > 0 { v.is_positive() } else { v.is_negative() })
        .then_some(s)
}

fn require_sign(what: &str, values: &[ExactScalar]) -> Result<i8> {
    definite_sign(values).ok_or_else(|| {
        let listing: Vec<String> = values.iter().map(|v| v.to_string()).collect();
        Error::SignViolation(format!("{what} is not of definite sign: [{}]", listing.join(", ")))
    })
}

/// Casoratian of grid columns at integer `x`.
fn grid_casoratian(cols: &[&[ExactScalar]], x: usize) -> ExactScalar {
    let n = cols.len();
    determinant((0..n).map(|j| cols.iter().map(|c| c[x + j].clone()).collect()).collect())
}

/// Ordered multi-index with cached Casoratian grids.
#[derive(Clone, Debug)]
pub struct DeletionChain {
    pub params: ParameterSet,
    pub indices: Vec<usize>,
    /// `prefix[k]` = W[xi_{d_1}, ..., xi_{d_k}] on `0..=N+1`; `prefix[0]` is 1.
    prefix: Vec<GridFunction>,
    /// W[xi_{d_1}, ..., xi_{d_s}, nu] on `0..=N+1`; the value at N+1 is 0.
    w_xi_nu: GridFunction,
    /// W[xi_{d_1}, ..., xi_{d_s}, nu P̌_n] on `0..=N` for n = 0..=N.
    eigen: Vec<GridFunction>,
}

impl DeletionChain {
    /// The empty chain (s = 0): W[.] = 1 and W[nu P̌_n] = nu P̌_n.
    pub fn new(p: &ParameterSet) -> Result<Self> {
        Self::build(p, Vec::new())
    }

    /// Builds the chain for the given deletion order.
    pub fn from_indices(p: &ParameterSet, indices: &[usize]) -> Result<Self> {
        let mut chain = Self::new(p)?;
        for &d in indices {
            chain = chain.extend(d)?;
        }
        Ok(chain)
    }

    fn build(p: &ParameterSet, indices: Vec<usize>) -> Result<Self> {
        let n = p.n;
        let s = indices.len();
        let hi = n + 1 + s;
        let xi: Vec<Vec<ExactScalar>> = indices
            .iter()
            .map(|&v| (0..=hi).map(|x| xi_poly(p, v, &p.site(x as i64))).collect::<Result<Vec<_>>>())
            .collect::<Result<_>>()?;
        let prefix = (0..=s)
            .map(|k| {
                let cols: Vec<&[ExactScalar]> = xi[..k].iter().map(|c| c.as_slice()).collect();
                GridFunction::from_fn(n + 1, |x| Ok(grid_casoratian(&cols, x)))
            })
            .collect::<Result<Vec<_>>>()?;
        let nu = nu_grid(p, hi)?;
        let with_last = |last: &[ExactScalar], x: usize| {
            let mut cols: Vec<&[ExactScalar]> = xi.iter().map(|c| c.as_slice()).collect();
            cols.push(last);
            grid_casoratian(&cols, x)
        };
        let w_xi_nu = GridFunction::from_fn(n + 1, |x| Ok(with_last(nu.values(), x)))?;
        let eigen = (0..=n)
            .map(|m| {
                let col = (0..=hi)
                    .map(|x| {
                        let v = nu.at(x);
                        if v.is_zero() {
                            Ok(ExactScalar::zero())
                        } else {
                            Ok(v * racah_poly(p, m, &p.site(x as i64))?)
                        }
                    })
                    .collect::<Result<Vec<_>>>()?;
                GridFunction::from_fn(n, |x| Ok(with_last(&col, x)))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(DeletionChain { params: p.clone(), indices, prefix, w_xi_nu, eigen })
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    /// Appends `d_next` and checks the sign pattern of the new Casoratians
    /// and hatted potentials.
    pub fn extend(&self, d_next: usize) -> Result<Self> {
        let p = &self.params;
        let v_set = p.virtual_index_set()?;
        if !v_set.contains(&d_next) {
            return Err(Error::Usage(format!("virtual index {d_next} is not in 1..={}", v_set.len())));
        }
        if self.indices.contains(&d_next) {
            return Err(Error::Usage(format!("virtual index {d_next} is already deleted")));
        }
        let mut indices = self.indices.clone();
        indices.push(d_next);
        twisted_potentials(p, indices.len())?;
        let chain = Self::build(p, indices)?;
        let n = p.n;
        require_sign("W[xi...]", chain.w_xi().values())?;
        require_sign("W[xi..., nu]", &chain.w_xi_nu.values()[..=n])?;
        let (bh, dh) = chain.hatted_potentials()?;
        if let Some((x, v)) = bh.values().iter().enumerate().find(|(_, v)| !v.is_positive()) {
            return Err(Error::SignViolation(format!("hatted B({x}) = {v} is not positive")));
        }
        if !dh.at(0).is_zero() || !dh.at(n + 1).is_zero() {
            return Err(Error::SignViolation("hatted D does not vanish at x = 0 and x = N+1".into()));
        }
        if let Some(x) = (1..=n).find(|&x| !dh.at(x).is_positive()) {
            return Err(Error::SignViolation(format!("hatted D({x}) = {} is not positive", dh.at(x))));
        }
        Ok(chain)
    }

    /// W[xi_{d_1}, ..., xi_{d_s}] on `0..=N+1`.
    pub fn w_xi(&self) -> &GridFunction {
        &self.prefix[self.len()]
    }

    /// W[xi_{d_1}, ..., xi_{d_s}, nu] on `0..=N+1`.
    pub fn w_xi_nu(&self) -> &GridFunction {
        &self.w_xi_nu
    }

    /// W[xi_{d_1}, ..., xi_{d_s}, nu P̌_n] on `0..=N`.
    pub fn eigen_casoratian(&self, n: usize) -> &GridFunction {
        &self.eigen[n]
    }

    /// The hatted potentials of the last step, B̂ on `0..=N` and D̂ on
    /// `0..=N+1`.
    pub fn hatted_potentials(&self) -> Result<(GridFunction, GridFunction)> {
        let s = self.len();
        if s == 0 {
            return Err(Error::Usage("hatted potentials need a nonempty chain".into()));
        }
        let p = &self.params;
        let al = alpha(p);
        let w = &self.prefix[s];
        let wp = &self.prefix[s - 1];
        let n = p.n;
        let b = GridFunction::from_fn(n, |x| {
            let num = &al * b_prime(p, &p.site((x + s - 1) as i64))? * wp.at(x) * w.at(x + 1);
            checked_div(num, &(wp.at(x + 1) * w.at(x)), "hatted B", x)
        })?;
        let d = GridFunction::from_fn(n + 1, |x| {
            let dp = d_prime(p, &p.site(x as i64))?;
            if dp.is_zero() {
                return Ok(dp);
            }
            let num = &al * dp * wp.at(x + 1) * w.at(x - 1);
            checked_div(num, &(wp.at(x) * w.at(x)), "hatted D", x)
        })?;
        Ok((b, d))
    }

    /// Residuals of the relations tying step s-1 to step s: for s = 1 the
    /// original potentials, B(x)D(x+1) = B̂(x)D̂(x+1) and
    /// B(x)+D(x) = B̂(x)+D̂(x)+Ẽ_{d_1}; for s > 1 the previous hatted pair,
    /// B̂'(x)D̂'(x+1) = B̂(x+1)D̂(x+1) and
    /// B̂'(x)+D̂'(x)+Ẽ_{d_s} = B̂(x)+D̂(x+1)+Ẽ_{d_{s-1}}.
    pub fn chaining_residuals(&self) -> Result<Vec<ExactScalar>> {
        let s = self.len();
        let p = &self.params;
        let n = p.n;
        let (bh, dh) = self.hatted_potentials()?;
        let e_new = virtual_energy(p, self.indices[s - 1]);
        let mut out = Vec::new();
        if s == 1 {
            let (b, d) = crate::lattice::potentials(p)?;
            for x in 0..n {
                out.push(b.at(x) * d.at(x + 1) - bh.at(x) * dh.at(x + 1));
            }
            for x in 0..=n {
                out.push(b.at(x) + d.at(x) - (bh.at(x) + dh.at(x) + &e_new));
            }
        } else {
            let parent = DeletionChain {
                params: p.clone(),
                indices: self.indices[..s - 1].to_vec(),
                prefix: self.prefix[..s].to_vec(),
                w_xi_nu: self.w_xi_nu.clone(),
                eigen: Vec::new(),
            };
            let (bo, dold) = parent.hatted_potentials()?;
            let e_old = virtual_energy(p, self.indices[s - 2]);
            for x in 0..n {
                out.push(bh.at(x) * dh.at(x + 1) - bo.at(x + 1) * dold.at(x + 1));
            }
            for x in 0..=n {
                out.push(bh.at(x) + dh.at(x) + &e_new - (bo.at(x) + dold.at(x + 1) + &e_old));
            }
        }
        Ok(out)
    }

    /// Standard-form potentials B_D, D_D on `0..=N`.
    pub fn standard_potentials(&self) -> Result<(GridFunction, GridFunction)> {
        let s = self.len();
        let p = &self.params;
        let al = alpha(p);
        let w = self.w_xi();
        let wn = &self.w_xi_nu;
        let n = p.n;
        if s == 0 {
            return crate::lattice::potentials(p);
        }
        let b = GridFunction::from_fn(n, |x| {
            let num = &al * b_prime(p, &p.site((x + s) as i64))? * w.at(x) * wn.at(x + 1);
            if num.is_zero() {
                return Ok(num);
            }
            checked_div(num, &(w.at(x + 1) * wn.at(x)), "B_D", x)
        })?;
        let d = GridFunction::from_fn(n, |x| {
            let dp = d_prime(p, &p.site(x as i64))?;
            if dp.is_zero() {
                return Ok(dp);
            }
            let num = &al * dp * w.at(x + 1) * wn.at(x - 1);
            checked_div(num, &(w.at(x) * wn.at(x)), "D_D", x)
        })?;
        Ok((b, d))
    }

    /// Residuals of B_D(x)D_D(x+1) = B̂(x+1)D̂(x+1) and
    /// B_D(x)+D_D(x) = B̂(x)+D̂(x+1)+Ẽ_{d_s}.
    pub fn standard_relation_residuals(&self) -> Result<Vec<ExactScalar>> {
        let p = &self.params;
        let n = p.n;
        let (b, d) = self.standard_potentials()?;
        let (bh, dh) = self.hatted_potentials()?;
        let e = virtual_energy(p, *self.indices.last().expect("nonempty chain"));
        let mut out = Vec::new();
        for x in 0..n {
            out.push(b.at(x) * d.at(x + 1) - bh.at(x + 1) * dh.at(x + 1));
        }
        for x in 0..=n {
            out.push(b.at(x) + d.at(x) - (bh.at(x) + dh.at(x + 1) + &e));
        }
        Ok(out)
    }

    /// prod_j alpha B'(x+j-1) phĩ0(x)^2 / (W(x) W(x+1)) on `0..=N`; multiplied by
    /// W[xi..., nu P̌_n]^2 this is the squared transformed eigenvector.
    pub fn eigen_weight(&self) -> Result<GridFunction> {
        let p = &self.params;
        let al = alpha(p);
        let wt = twisted_ground_weight_sq(p)?;
        let w = self.w_xi();
        GridFunction::from_fn(p.n, |x| {
            let mut acc = wt.at(x).clone();
            for j in 0..self.len() {
                acc *= &al * b_prime(p, &p.site((x + j) as i64))?;
            }
            checked_div(acc, &(w.at(x) * w.at(x + 1)), "eigen weight", x)
        })
    }

    /// prod_j (E_n - Ẽ_{d_j}) / d_n^2.
    pub fn norm_product(&self, n: usize) -> Result<ExactScalar> {
        let p = &self.params;
        let e = energy(p, n);
        let prod: ExactScalar = self.indices.iter().map(|&d| &e - virtual_energy(p, d)).product();
        Ok(prod / norm_sq(p, n)?)
    }

    /// The grid W[xi..., nu P̌_n] together with its norm product.
    pub fn transformed_eigen_polyweight(&self, n: usize) -> Result<(GridFunction, ExactScalar)> {
        Ok((self.eigen[n].clone(), self.norm_product(n)?))
    }

    /// Residual matrix sum_x weight W_n W_m - delta_{nm} norm_product(n).
    pub fn norm_residuals(&self) -> Result<Vec<Vec<ExactScalar>>> {
        let p = &self.params;
        let w = self.eigen_weight()?;
        let n = p.n;
        (0..=n)
            .map(|i| {
                (0..=n)
                    .map(|j| {
                        let sum: ExactScalar =
                            (0..=n).map(|x| w.at(x) * self.eigen[i].at(x) * self.eigen[j].at(x)).sum();
                        Ok(if i == j { sum - self.norm_product(i)? } else { sum })
                    })
                    .collect()
            })
            .collect()
    }

    /// Residuals of B_D(g(x)-g(x+1)) + D_D(g(x)-g(x-1)) = E_n g(x) on `0..=N`
    /// with g = W[xi..., nu P̌_n] / W[xi..., nu].
    pub fn deformed_eigen_residuals(&self, n: usize) -> Result<Vec<ExactScalar>> {
        let p = &self.params;
        let big_n = p.n;
        let (b, d) = self.standard_potentials()?;
        let g = GridFunction::from_fn(big_n, |x| {
            checked_div(self.eigen[n].at(x).clone(), self.w_xi_nu.at(x), "eigen ratio", x)
        })?;
        let e = energy(p, n);
        Ok((0..=big_n)
            .map(|x| {
                let gx = g.at(x);
                let mut r = -(&e * gx);
                if !b.at(x).is_zero() {
                    r += b.at(x) * (gx - g.at(x + 1));
                }
                if !d.at(x).is_zero() {
                    r += d.at(x) * (gx - g.at(x - 1));
                }
                r
            })
            .collect())
    }

    /// Residuals of B_D(x) w(x) = D_D(x+1) w(x+1) for the ground weight w.
    pub fn ground_annihilation_residuals(&self) -> Result<Vec<ExactScalar>> {
        let (b, d) = self.standard_potentials()?;
        let w = self.eigen_weight()?;
        let g0 = self.w_xi_nu();
        Ok((0..self.params.n)
            .map(|x| b.at(x) * w.at(x) * g0.at(x) * g0.at(x) - d.at(x + 1) * w.at(x + 1) * g0.at(x + 1) * g0.at(x + 1))
            .collect())
    }

    /// Virtual vector for a remaining index v; see [`VirtualVector`].
    pub fn virtual_vector_grid(&self, v: usize) -> Result<VirtualVector> {
        let p = &self.params;
        if self.indices.contains(&v) {
            return Err(Error::Usage(format!("virtual index {v} is already deleted")));
        }
        let n = p.n;
        let s = self.len();
        let hi = n + 2 + s;
        let col = |d: usize| (0..=hi).map(|x| xi_poly(p, d, &p.site(x as i64))).collect::<Result<Vec<_>>>();
        let mut cols = self.indices.iter().map(|&d| col(d)).collect::<Result<Vec<_>>>()?;
        cols.push(col(v)?);
        let refs: Vec<&[ExactScalar]> = cols.iter().map(|c| c.as_slice()).collect();
        let casoratian = GridFunction::from_fn(n + 1, |x| Ok(grid_casoratian(&refs, x)))?;
        let sign = require_sign("W[xi..., xi_v]", casoratian.values())?;
        let e_v = virtual_energy(p, v);
        let residuals = if s == 0 {
            crate::virtual_sector::virtual_equation_grid_residuals(p, v)?
                .into_iter()
                .map(|r| &r * alpha(p))
                .collect()
        } else {
            // Gauge f(x) = W_{s+1}(x) W_{s-1}(x+1) / (W_s(x) W_s(x+1)) turns the
            // hatted Jacobi matrix into a rational three-term operator.
            let w = self.w_xi();
            let wp = &self.prefix[s - 1];
            let f = GridFunction::from_fn(n, |x| {
                checked_div(casoratian.at(x) * wp.at(x + 1), &(w.at(x) * w.at(x + 1)), "virtual gauge", x)
            })?;
            let (bh, dh) = self.hatted_potentials()?;
            let e_s = virtual_energy(p, self.indices[s - 1]);
            (0..=n)
                .map(|x| {
                    let diag = bh.at(x) + dh.at(x + 1) + &e_s - &e_v;
                    let mut r = diag * f.at(x);
                    if x < n {
                        r -= bh.at(x + 1) * f.at(x + 1);
                    }
                    if x > 0 {
                        r -= dh.at(x) * f.at(x - 1);
                    }
                    r
                })
                .collect()
        };
        Ok(VirtualVector { v, casoratian, sign, residuals })
    }

    /// Eigenvalues of the symmetric matrix built from (B_D, D_D).
    pub fn float_spectrum(&self, precision_bits: usize) -> Result<Vec<Real>> {
        let (b, d) = self.standard_potentials()?;
        Ok(TridiagonalMatrix::from_potentials(b.values(), d.values(), precision_bits)?.eigenvalues())
    }
}

/// A virtual vector of the deformed system in Casoratian form.
#[derive(Clone, Debug)]
pub struct VirtualVector {
    pub v: usize,
    /// W[xi_{d_1}, ..., xi_{d_s}, xi_v] on `0..=N+1`.
    pub casoratian: GridFunction,
    pub sign: i8,
    /// Truncated-matrix residuals on `0..=N`: zero below N, nonzero at N.
    pub residuals: Vec<ExactScalar>,
}

impl VirtualVector {
    pub fn boundary_behaviour_holds(&self) -> bool {
        let (last, rest) = self.residuals.split_last().expect("nonempty");
        rest.iter().all(Zero::is_zero) && !last.is_zero()
    }
}

/// Comparison of one deletion order with the reference (first) order.
#[derive(Clone, Debug)]
pub struct OrderComparison {
    pub order: Vec<usize>,
    pub potentials_equal: bool,
    pub norm_products_equal: bool,
    /// Global factor relating the eigen Casoratians to the reference; `None`
    /// when no single +-1 factor works.
    pub eigen_sign: Option<i8>,
    /// Parity of the permutation relative to the reference order.
    pub parity: i8,
}

fn parity(reference: &[usize], order: &[usize]) -> i8 {
    let pos: Vec<usize> = order.iter().map(|d| reference.iter().position(|r| r == d).expect("same set")).collect();
    let mut inversions = 0;
    for i in 0..pos.len() {
        for j in i + 1..pos.len() {
            if pos[i] > pos[j] {
                inversions += 1;
            }
        }
    }
    if inversions % 2 == 0 {
        1
    } else {
        -1
    }
}

fn permutations(items: &[usize]) -> Vec<Vec<usize>> {
    if items.len() <= 1 {
        return vec![items.to_vec()];
    }
    let mut out = Vec::new();
    for i in 0..items.len() {
        let mut rest = items.to_vec();
        let head = rest.remove(i);
        for mut tail in permutations(&rest) {
            tail.insert(0, head);
            out.push(tail);
        }
    }
    out
}

/// Builds the chain in every order of `d_set` and compares against the first.
pub fn order_independence_check(p: &ParameterSet, d_set: &[usize]) -> Result<Vec<OrderComparison>> {
    if d_set.len() < 2 {
        return Err(Error::Usage("order independence needs at least two indices".into()));
    }
    let reference = DeletionChain::from_indices(p, d_set)?;
    let (rb, rd) = reference.standard_potentials()?;
    let n = p.n;
    permutations(d_set)
        .into_iter()
        .map(|order| {
            let chain = DeletionChain::from_indices(p, &order)?;
            let (b, d) = chain.standard_potentials()?;
            let norm_products_equal = (0..=n)
                .map(|m| Ok(chain.norm_product(m)? == reference.norm_product(m)?))
                .collect::<Result<Vec<_>>>()?
                .into_iter()
                .all(|e| e);
            let mut sign = None;
            let mut consistent = true;
            for m in 0..=n {
                for x in 0..=n {
                    let a = chain.eigen[m].at(x);
                    let r = reference.eigen[m].at(x);
                    let here = if a == r && !a.is_zero() {
                        Some(1)
                    } else if *a == -r.clone() && !a.is_zero() {
                        Some(-1)
                    } else if a.is_zero() && r.is_zero() {
                        continue;
                    } else {
                        None
                    };
                    match (sign, here) {
                        (_, None) => consistent = false,
                        (None, h) => sign = h,
                        (Some(s), Some(h)) if s != h => consistent = false,
                        _ => {}
                    }
                }
            }
            Ok(OrderComparison {
                parity: parity(d_set, &order),
                order,
                potentials_equal: b == rb && d == rd,
                norm_products_equal,
                eigen_sign: if consistent { sign } else { None },
            })
        })
        .collect()
}

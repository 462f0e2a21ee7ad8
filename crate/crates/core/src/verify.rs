//! Run configuration, verification suites, reports and tables.

use std::path::PathBuf;
use std::time::Instant;

use num_traits::{Signed, Zero};
use serde::{Deserialize, Deserializer, Serialize};

use crate::crum::{order_independence_check, DeletionChain};
use crate::error::{Error, Result};
use crate::highprec::{abs_real, format_real, real_from_scalar, sqrt_scalar, tolerance, working_bits, Real, TridiagonalMatrix};
use crate::lattice::{
    apply_difference_op, energy, ground_weight_sq, ground_weight_sq_at, ground_weight_sq_closed, hamiltonian_matrix,
    norm_sq, off_grid_sites, racah_poly, shift_backward, shift_forward,
};
use crate::mi::{
    charpoly_residuals, count_zeros, denominator_poly, eigen_check, exceptional_reduction, fit_denominator,
    fit_mi_poly, generic_companion, leading_coefficients, mirror_check, mi_poly, orthogonality_residuals,
    poly_eta_params, potentials_from_xi, psi_sq, reduce_level0, shape_invariance_residuals, shift_residuals,
    xi_eta_params, IndexSet, MiSystem,
};
use crate::params::{Family, ParameterSet, ShiftVector, Site};
use crate::scalar::{format_scalar, parse_scalar, ExactScalar};
use crate::virtual_sector::{twist_relation_residuals, verify_virtual_equation, virtual_energy, xi_poly};

pub const SCHEMA: &str = "mi-racah/1";

/// Suite names in execution order.
pub const SUITES: [&str; 22] = [
    "range",
    "original-eigen",
    "orthogonality",
    "completeness",
    "twist-relation",
    "virtual-equation",
    "chain",
    "norms",
    "xi-positivity",
    "degrees",
    "leading-coeffs",
    "pd0-identity",
    "shape-invariance",
    "shifts",
    "similarity-eigen",
    "charpoly",
    "order-independence",
    "reduction-m1",
    "reduction-level0",
    "mirror",
    "zeros",
    "float-oracle",
];

/// Decimal digits of the float-oracle tolerance, 10^-40.
pub const FLOAT_TOLERANCE_DIGITS: u32 = 40;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Json,
    Csv,
}

impl std::str::FromStr for Format {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "json" => Ok(Format::Json),
            "csv" => Ok(Format::Csv),
            other => Err(Error::Parse(format!("unknown format {other:?}"))),
        }
    }
}

/// A list of items or the word "all".
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub enum Selection<T> {
    #[default]
    All,
    List(Vec<T>),
}

impl<T: Serialize> Serialize for Selection<T> {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Selection::All => s.serialize_str("all"),
            Selection::List(v) => v.serialize(s),
        }
    }
}


#[derive(Deserialize)]
#[serde(untagged)]
enum RawSelection<T> {
    Text(String),
    List(Vec<T>),
}

fn parse_index_list(text: &str) -> Result<Vec<usize>> {
    let t = text.trim().trim_start_matches('{').trim_end_matches('}');
    if t.is_empty() || t.eq_ignore_ascii_case("none") {
        return Ok(Vec::new());
    }
    t.split(',')
        .map(|v| v.trim().parse::<usize>().map_err(|_| Error::Parse(format!("bad index {v:?} in {text:?}"))))
        .collect()
}

impl Selection<usize> {
    pub fn parse(text: &str) -> Result<Self> {
        if text.trim().eq_ignore_ascii_case("all") {
            Ok(Selection::All)
        } else {
            let mut v = parse_index_list(text)?;
            v.sort_unstable();
            Ok(Selection::List(v))
        }
    }
}

impl Selection<String> {
    pub fn parse(text: &str) -> Self {
        if text.trim().eq_ignore_ascii_case("all") {
            Selection::All
        } else {
            Selection::List(text.split(',').map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect())
        }
    }
}

impl<'de> Deserialize<'de> for Selection<usize> {
    fn deserialize<D: Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        match RawSelection::<usize>::deserialize(de)? {
            RawSelection::Text(t) => Selection::<usize>::parse(&t).map_err(serde::de::Error::custom),
            RawSelection::List(mut v) => {
                v.sort_unstable();
                Ok(Selection::List(v))
            }
        }
    }
}

impl<'de> Deserialize<'de> for Selection<String> {
    fn deserialize<D: Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        Ok(match RawSelection::<String>::deserialize(de)? {
            RawSelection::Text(t) => Selection::<String>::parse(&t),
            RawSelection::List(v) => {
                if v.iter().any(|s| s.eq_ignore_ascii_case("all")) {
                    Selection::All
                } else {
                    Selection::List(v)
                }
            }
        })
    }
}

/// Exact rational written as "p/q" or an integer (a JSON integer is accepted).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Rational(pub ExactScalar);

impl Serialize for Rational {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&format_scalar(&self.0))
    }
}

impl<'de> Deserialize<'de> for Rational {
    fn deserialize<D: Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Int(i64),
            Text(String),
        }
        match Raw::deserialize(de)? {
            Raw::Int(v) => Ok(Rational(ExactScalar::from_integer(v.into()))),
            Raw::Text(t) => parse_scalar(&t).map(Rational).map_err(serde::de::Error::custom),
        }
    }
}

fn default_bits() -> usize {
    256
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub family: Family,
    #[serde(rename = "N")]
    pub n: usize,
    pub b: Rational,
    pub c: Rational,
    pub d: Rational,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q: Option<Rational>,
    /// One index set, "all" valid sets, or the empty set (undeformed system).
    #[serde(rename = "D", default)]
    pub index_set: Selection<usize>,
    #[serde(default)]
    pub checks: Selection<String>,
    #[serde(default = "default_bits")]
    pub precision_bits: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub format: Format,
    #[serde(default)]
    pub allow_unvalidated: bool,
    /// Record per-check wall time. Off by default so reports are byte-stable.
    #[serde(default)]
    pub timings: bool,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn params(&self) -> Result<ParameterSet> {
        match self.family {
            Family::Racah => Ok(ParameterSet::racah(self.n, self.b.0.clone(), self.c.0.clone(), self.d.0.clone())),
            Family::QRacah => {
                let q = self.q.as_ref().ok_or_else(|| Error::Parse("q-Racah configuration needs q".into()))?;
                ParameterSet::qracah(self.n, q.0.clone(), self.b.0.clone(), self.c.0.clone(), self.d.0.clone())
            }
        }
    }

    /// Requested suites in execution order.
    pub fn suites(&self) -> Result<Vec<&'static str>> {
        match &self.checks {
            Selection::All => Ok(SUITES.to_vec()),
            Selection::List(names) => {
                if let Some(bad) = names.iter().find(|n| !SUITES.contains(&n.as_str())) {
                    return Err(Error::Parse(format!("unknown check {bad:?}")));
                }
                Ok(SUITES.iter().copied().filter(|s| names.iter().any(|n| n == s)).collect())
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pass,
    Fail,
    Skip,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Record {
    pub name: String,
    pub case: String,
    pub status: Status,
    pub exact_residuals: Vec<String>,
    pub float_residuals: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub runtime_ms: Option<u64>,
    pub detail: String,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct Summary {
    pub pass: usize,
    pub fail: usize,
    pub skip: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Report {
    pub schema: String,
    pub parameters: String,
    pub config: RunConfig,
    pub records: Vec<Record>,
    pub summary: Summary,
}

impl Report {
    /// True iff no record failed.
    pub fn success(&self) -> bool {
        self.summary.fail == 0
    }

    pub fn records_named<'a>(&'a self, name: &'a str) -> impl Iterator<Item = &'a Record> + 'a {
        self.records.iter().filter(move |r| r.name == name)
    }

    pub fn render(&self, format: Format) -> Result<String> {
        match format {
            Format::Json => Ok(serde_json::to_string_pretty(self).map_err(|e| Error::Io(e.to_string()))? + "\n"),
            Format::Csv => {
                let mut w = csv::Writer::from_writer(Vec::new());
                w.write_record(["name", "case", "status", "exact_residuals", "float_residuals", "runtime_ms", "detail"])
                    .map_err(csv_err)?;
                for r in &self.records {
                    let status = match r.status {
                        Status::Pass => "pass",
                        Status::Fail => "fail",
                        Status::Skip => "skip",
                    };
                    let ms = r.runtime_ms.map(|v| v.to_string()).unwrap_or_default();
                    w.write_record([
                        r.name.as_str(),
                        &r.case,
                        status,
                        &r.exact_residuals.join(";"),
                        &r.float_residuals.join(";"),
                        &ms,
                        &r.detail,
                    ])
                    .map_err(csv_err)?;
                }
                finish_csv(w)
            }
        }
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(e.to_string())
}

fn finish_csv(w: csv::Writer<Vec<u8>>) -> Result<String> {
    let bytes = w.into_inner().map_err(|e| Error::Io(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Io(e.to_string()))
}

/// Outcome of one check before it becomes a [`Record`].
#[derive(Default)]
struct Check {
    exact: Vec<ExactScalar>,
    float: Vec<Real>,
    /// Extra pass conditions beyond vanishing residuals.
    ok: bool,
    detail: String,
    skip: Option<String>,
}

impl Check {
    fn exact(exact: Vec<ExactScalar>) -> Self {
        Check { exact, ok: true, ..Default::default() }
    }

    fn skip(reason: impl Into<String>) -> Self {
        Check { ok: true, skip: Some(reason.into()), ..Default::default() }
    }

    fn require(mut self, cond: bool) -> Self {
        self.ok &= cond;
        self
    }

    fn detail(mut self, d: impl Into<String>) -> Self {
        self.detail = d.into();
        self
    }
}

struct Runner {
    p: ParameterSet,
    sets: Vec<IndexSet>,
    physical: bool,
    bits: usize,
    tol: Real,
    timings: bool,
    records: Vec<Record>,
}

fn label(ds: &[usize]) -> String {
    let parts: Vec<String> = ds.iter().map(|d| d.to_string()).collect();
    format!("D={{{}}}", parts.join(","))
}

fn grid_and_off(p: &ParameterSet) -> Vec<Site> {
    (0..=p.n as i64).map(|x| p.site(x)).chain(off_grid_sites(p).into_iter().take(3)).collect()
}

impl Runner {
    fn case(&mut self, name: &str, case: impl Into<String>, f: impl FnOnce(&Runner) -> Result<Check>) {
        let start = Instant::now();
        let out = f(self);
        let runtime_ms = self.timings.then(|| start.elapsed().as_millis() as u64);
        let check = out.unwrap_or_else(|e| Check { detail: format!("error: {e}"), ..Default::default() });
        let status = if check.skip.is_some() {
            Status::Skip
        } else {
            let exact_ok = check.exact.iter().all(Zero::is_zero);
            let float_ok = check.float.iter().all(|v| abs_real(v) <= self.tol);
            if exact_ok && float_ok && check.ok {
                Status::Pass
            } else {
                Status::Fail
            }
        };
        let mut exact_residuals: Vec<String> = check.exact.iter().map(format_scalar).collect();
        if status == Status::Fail && !check.exact.iter().any(|v| !v.is_zero()) && check.float.is_empty() {
            exact_residuals.push("1".into());
        }
        let detail = check.skip.unwrap_or(check.detail);
        self.records.push(Record {
            name: name.into(),
            case: case.into(),
            status,
            exact_residuals,
            float_residuals: check.float.iter().map(format_real).collect(),
            runtime_ms,
            detail,
        });
    }

    fn skip_all(&mut self, name: &str, reason: &str) {
        self.case(name, "", |_| Ok(Check::skip(reason)));
    }

    /// Runs `f` once per index set, or records a skip when there is none.
    fn per_set(&mut self, name: &str, f: impl Fn(&Runner, &[usize]) -> Result<Check>) {
        if self.sets.is_empty() {
            self.skip_all(name, "no index set selected");
            return;
        }
        for s in self.sets.clone() {
            self.case(name, label(&s.d), |r| f(r, &s.d));
        }
    }

    /// As [`Runner::per_set`], preceded by the undeformed system D = {}.
    fn per_set_with_empty(&mut self, name: &str, f: impl Fn(&Runner, &[usize]) -> Result<Check>) {
        self.case(name, label(&[]), |r| f(r, &[]));
        for s in self.sets.clone() {
            self.case(name, label(&s.d), |r| f(r, &s.d));
        }
    }

    fn physical_or_skip(&self) -> Option<Check> {
        (!self.physical).then(|| Check::skip("needs parameters inside the admissible range"))
    }

    fn run_suite(&mut self, name: &'static str) {
        let p = self.p.clone();
        let n = p.n;
        match name {
            "original-eigen" => self.case(name, "", |_| {
                let mut res = Vec::new();
                for k in 0..=n {
                    let e = energy(&p, k);
                    let f = |t: &Site| racah_poly(&p, k, t);
                    for s in grid_and_off(&p) {
                        res.push(apply_difference_op(&p, &f, &s)? - &e * f(&s)?);
                    }
                }
                Ok(Check::exact(res))
            }),
            "orthogonality" => self.case(name, "", |_| {
                let w = ground_weight_sq(&p)?;
                let mut res = Vec::new();
                for x in 0..=n {
                    res.push(ground_weight_sq_at(&p, x)? - ground_weight_sq_closed(&p, x)?);
                }
                let polys = poly_grids(&p)?;
                for i in 0..=n {
                    for j in 0..=n {
                        let sum: ExactScalar = (0..=n).map(|x| w.at(x) * &polys[i][x] * &polys[j][x]).sum();
                        res.push(if i == j { sum - norm_sq(&p, i)?.recip() } else { sum });
                    }
                }
                Ok(Check::exact(res))
            }),
            "completeness" => self.case(name, "", |r| {
                let w = ground_weight_sq(&p)?;
                let polys = poly_grids(&p)?;
                let dn: Vec<ExactScalar> = (0..=n).map(|k| norm_sq(&p, k)).collect::<Result<_>>()?;
                let mut res = Vec::new();
                for x in 0..=n {
                    for y in 0..=n {
                        let sum: ExactScalar = (0..=n).map(|k| &dn[k] * &polys[k][x] * &polys[k][y]).sum();
                        let v = w.at(x) * sum;
                        res.push(if x == y { v - ExactScalar::from_integer(1.into()) } else { v });
                    }
                }
                let mut check = Check::exact(res);
                if r.physical {
                    // Orthonormal eigenvectors U[k][x] = sqrt(phi0(x)^2 d_k^2) P̌_k(x).
                    let bits = working_bits(r.bits);
                    let mut u = vec![Vec::with_capacity(n + 1); n + 1];
                    for (k, row) in u.iter_mut().enumerate() {
                        for x in 0..=n {
                            row.push(sqrt_scalar(&(w.at(x) * &dn[k]), bits)? * real_from_scalar(&polys[k][x], bits));
                        }
                    }
                    for x in 0..=n {
                        for y in 0..=n {
                            if x != y {
                                let s = (0..=n).fold(real_from_scalar(&ExactScalar::zero(), bits), |acc, k| {
                                    acc + &u[k][x] * &u[k][y]
                                });
                                check.float.push(s);
                            }
                        }
                    }
                    check.detail = "float residuals: off-diagonal entries of U^T U".into();
                }
                Ok(check)
            }),
            "twist-relation" => self.case(name, "", |_| Ok(Check::exact(twist_relation_residuals(&p)?))),
            "virtual-equation" => {
                let v_set = p.virtual_index_set().unwrap_or_default();
                if v_set.is_empty() {
                    self.skip_all(name, "empty virtual index set");
                }
                for v in v_set {
                    self.case(name, format!("v={v}"), |_| {
                        let rep = verify_virtual_equation(&p, v)?;
                        let (last, interior) = rep.grid_residuals.split_last().expect("nonempty");
                        let mut res: Vec<ExactScalar> = interior.to_vec();
                        res.extend(rep.off_grid_residuals.iter().cloned());
                        res.push(last - &rep.boundary_prediction);
                        Ok(Check::exact(res)
                            .require(!last.is_zero())
                            .detail(format!("boundary residual at x=N: {}", format_scalar(last))))
                    });
                }
            }
            "chain" => self.per_set(name, |r, ds| {
                if let Some(s) = r.physical_or_skip() {
                    return Ok(s);
                }
                let chain = DeletionChain::from_indices(&p, ds)?;
                let mut res = chain.chaining_residuals()?;
                res.extend(chain.standard_relation_residuals()?);
                res.extend(chain.ground_annihilation_residuals()?);
                for k in 0..=n {
                    res.extend(chain.deformed_eigen_residuals(k)?);
                }
                let (b, d) = chain.standard_potentials()?;
                let (bx, dx) = potentials_from_xi(&p, ds)?;
                for x in 0..=n {
                    res.push(b.at(x) - bx.at(x));
                    res.push(d.at(x) - dx.at(x));
                }
                let mut ok = true;
                let mut boundary = Vec::new();
                for v in p.virtual_index_set()?.into_iter().filter(|v| !ds.contains(v)) {
                    let vv = chain.virtual_vector_grid(v)?;
                    let (last, interior) = vv.residuals.split_last().expect("nonempty");
                    res.extend(interior.iter().cloned());
                    ok &= !last.is_zero();
                    boundary.push(format!("v={v}: {}", format_scalar(last)));
                }
                let detail = if boundary.is_empty() {
                    String::new()
                } else {
                    format!("virtual vector boundary residuals {}", boundary.join(", "))
                };
                Ok(Check::exact(res).require(ok).detail(detail))
            }),
            "norms" => self.per_set(name, |r, ds| {
                if let Some(s) = r.physical_or_skip() {
                    return Ok(s);
                }
                let chain = DeletionChain::from_indices(&p, ds)?;
                let mut res: Vec<ExactScalar> = chain.norm_residuals()?.into_iter().flatten().collect();
                res.extend(orthogonality_residuals(&p, ds)?.into_iter().flatten());
                Ok(Check::exact(res))
            }),
            "xi-positivity" => {
                self.case(name, "virtual", |r| {
                    if let Some(s) = r.physical_or_skip() {
                        return Ok(s);
                    }
                    let mut bad = Vec::new();
                    for v in p.virtual_index_set()? {
                        let e = virtual_energy(&p, v);
                        if !e.is_negative() {
                            bad.push(e);
                        }
                        for x in 0..=n as i64 + 1 {
                            let val = xi_poly(&p, v, &p.site(x))?;
                            if !val.is_positive() {
                                bad.push(val);
                            }
                        }
                    }
                    let ok = bad.is_empty();
                    Ok(Check::exact(bad).require(ok).detail("offending values of E~_v (>= 0) or xi_v (<= 0)"))
                });
                self.per_set(name, |r, ds| {
                    if let Some(s) = r.physical_or_skip() {
                        return Ok(s);
                    }
                    let sys = MiSystem::new(&p, IndexSet::unchecked(ds.to_vec()))?;
                    let mut bad: Vec<ExactScalar> =
                        sys.xi_grid.values().iter().filter(|v| !v.is_positive()).cloned().collect();
                    bad.extend(sys.d_tilde_sq.iter().filter(|v| !v.is_positive()).cloned());
                    bad.extend(sys.psi_sq.values().iter().filter(|v| !v.is_positive()).cloned());
                    let ok = bad.is_empty();
                    Ok(Check::exact(bad).require(ok).detail("offending values of Xi_D, d~^2 or psi_D^2"))
                });
            }
            "degrees" => self.per_set(name, |_, ds| {
                let ell = crate::mi::ell_of(ds) as i64;
                let deg = |f: crate::poly::EtaPolynomial| f.degree().map_or(-1, |d| d as i64);
                let mut res = vec![ExactScalar::from_integer((deg(fit_denominator(&p, ds)?) - ell).into())];
                for k in 0..=n {
                    res.push(ExactScalar::from_integer((deg(fit_mi_poly(&p, ds, k)?) - ell - k as i64).into()));
                }
                Ok(Check::exact(res).detail(format!("residuals are fitted minus expected degree, ell={ell}")))
            }),
            "leading-coeffs" => self.per_set(name, |_, ds| {
                let fx = fit_denominator(&p, ds)?;
                let mut res = Vec::new();
                let mut detail = String::new();
                for k in 0..=n {
                    let (cx, cp) = leading_coefficients(&p, ds, k)?;
                    if k == 0 {
                        res.push(fx.leading_coefficient() - &cx);
                        detail = format!("c^Xi = {}", format_scalar(&cx));
                    }
                    res.push(fit_mi_poly(&p, ds, k)?.leading_coefficient() - cp);
                }
                Ok(Check::exact(res).detail(detail))
            }),
            "pd0-identity" => self.per_set(name, |_, ds| {
                let up = p.shift(ShiftVector::delta(1));
                let res = grid_and_off(&p)
                    .iter()
                    .map(|s| Ok(mi_poly(&p, ds, 0, s)? - denominator_poly(&up, ds, s)?))
                    .collect::<Result<Vec<_>>>()?;
                Ok(Check::exact(res))
            }),
            "shape-invariance" => {
                self.per_set_with_empty(name, |_, ds| Ok(Check::exact(shape_invariance_residuals(&p, ds)?)))
            }
            "shifts" => self.per_set_with_empty(name, |_, ds| {
                let mut res = Vec::new();
                let up = p.shift(ShiftVector::delta(1));
                for k in 1..=n {
                    for s in grid_and_off(&p) {
                        if ds.is_empty() {
                            res.push(shift_forward(&p, k, &s)? - energy(&p, k) * racah_poly(&up, k - 1, &s)?);
                            res.push(shift_backward(&p, k, &s)? - racah_poly(&p, k, &s)?);
                        } else {
                            let (f, b) = shift_residuals(&p, ds, k, &s)?;
                            res.push(f);
                            res.push(b);
                        }
                    }
                }
                Ok(Check::exact(res))
            }),
            "similarity-eigen" => self.per_set_with_empty(name, |_, ds| {
                let mut res = Vec::new();
                for k in 0..=n {
                    res.extend(eigen_check(&p, ds, k)?);
                }
                Ok(Check::exact(res))
            }),
            "charpoly" => self.per_set_with_empty(name, |_, ds| Ok(Check::exact(charpoly_residuals(&p, ds)?))),
            "order-independence" => self.per_set(name, |r, ds| {
                if ds.len() < 2 {
                    return Ok(Check::skip("needs M >= 2"));
                }
                if let Some(s) = r.physical_or_skip() {
                    return Ok(s);
                }
                let cmp = order_independence_check(&p, ds)?;
                let bad: Vec<String> = cmp
                    .iter()
                    .filter(|c| !(c.potentials_equal && c.norm_products_equal && c.eigen_sign == Some(c.parity)))
                    .map(|c| format!("{:?}", c.order))
                    .collect();
                let detail = if bad.is_empty() {
                    format!("{} orders agree; eigen Casoratians differ by the permutation sign", cmp.len())
                } else {
                    format!("orders disagreeing with the reference: {}", bad.join(" "))
                };
                Ok(Check::exact(Vec::new()).require(bad.is_empty()).detail(detail))
            }),
            "reduction-m1" => {
                let v_set = p.virtual_index_set().unwrap_or_default();
                if v_set.is_empty() {
                    self.skip_all(name, "empty virtual index set");
                }
                for ell in v_set {
                    self.case(name, format!("ell={ell}"), |_| {
                        let rep = exceptional_reduction(&p, ell)?;
                        let detail = if rep.poles.is_empty() {
                            String::new()
                        } else {
                            format!("P_n(x; mu) has a pole for n={:?}; covered at generic a", rep.poles)
                        };
                        Ok(Check::exact(rep.residuals()).require(rep.passes()).detail(detail))
                    });
                }
            }
            "reduction-level0" => self.per_set_with_empty(name, |_, ds| {
                let mut res = Vec::new();
                let mut singular = 0;
                for k in 0..=n {
                    for s in grid_and_off(&p) {
                        match reduce_level0(&p, ds, k, &s) {
                            Ok((l, r)) => res.push(l - r),
                            Err(Error::Singular { .. }) | Err(Error::Degenerate(_)) => singular += 1,
                            Err(e) => return Err(e),
                        }
                    }
                }
                let detail = format!("D' = {}; {singular} singular evaluations skipped", label(ds));
                let evaluated = !res.is_empty();
                Ok(Check::exact(res).require(evaluated).detail(detail))
            }),
            "mirror" => self.per_set_with_empty(name, |_, ds| {
                let mut res = Vec::new();
                let mut skipped = Vec::new();
                for case in mirror_check(&p, ds)? {
                    match case.skipped {
                        Some(reason) => skipped.push(format!("n={}: {reason}", case.n)),
                        None => res.extend(case.residuals),
                    }
                }
                let generic = generic_companion(&p)?;
                let mut generic_skipped = 0;
                for case in mirror_check(&generic, ds)? {
                    if case.skipped.is_some() {
                        generic_skipped += 1;
                    }
                    res.extend(case.residuals);
                }
                let mut detail = String::new();
                if !skipped.is_empty() {
                    detail = format!("skipped at lambda: {}", skipped.join("; "));
                }
                if generic_skipped > 0 {
                    detail.push_str(&format!(" ({generic_skipped} generic cases skipped)"));
                }
                Ok(Check::exact(res).detail(detail.trim().to_string()))
            }),
            "zeros" => {
                if self.sets.is_empty() {
                    self.skip_all(name, "no index set selected");
                }
                for s in self.sets.clone() {
                    for k in 1..=n {
                        self.case(name, format!("{} n={k}", label(&s.d)), |r| {
                            if let Some(s) = r.physical_or_skip() {
                                return Ok(s);
                            }
                            let count = count_zeros(&p, &s.d, k)?;
                            Ok(Check::exact(vec![ExactScalar::from_integer((count as i64 - k as i64).into())])
                                .detail(format!("zeros: {count}")))
                        });
                    }
                }
            }
            "float-oracle" => self.per_set_with_empty(name, |r, ds| {
                if let Some(s) = r.physical_or_skip() {
                    return Ok(s);
                }
                let eig = if ds.is_empty() {
                    hamiltonian_matrix(&p, r.bits)?.eigenvalues()
                } else {
                    let (b, d) = potentials_from_xi(&p, ds)?;
                    TridiagonalMatrix::from_potentials(b.values(), d.values(), r.bits)?.eigenvalues()
                };
                let bits = working_bits(r.bits);
                let mut check = Check::exact(Vec::new());
                for (k, ev) in eig.iter().enumerate() {
                    check.float.push(ev - real_from_scalar(&energy(&p, k), bits));
                }
                Ok(check.detail(format!("{}-bit dense Jacobi eigenvalues minus E_n", r.bits)))
            }),
            other => unreachable!("unknown suite {other}"),
        }
    }
}

fn poly_grids(p: &ParameterSet) -> Result<Vec<Vec<ExactScalar>>> {
    (0..=p.n).map(|k| (0..=p.n).map(|x| racah_poly(p, k, &p.site(x as i64))).collect()).collect()
}

/// Index sets selected by the configuration. An explicit set outside the
/// admissible range is kept only when unvalidated runs are allowed.
fn resolve_sets(cfg: &RunConfig, p: &ParameterSet) -> Result<Vec<IndexSet>> {
    match &cfg.index_set {
        Selection::All => Ok(IndexSet::all_valid(p).unwrap_or_default()),
        Selection::List(v) if v.is_empty() => Ok(Vec::new()),
        Selection::List(v) => match IndexSet::new(p, v) {
            Ok(s) => Ok(vec![s]),
            Err(_) if cfg.allow_unvalidated => {
                let mut d = v.clone();
                d.dedup();
                Ok(vec![IndexSet::unchecked(d)])
            }
            Err(e) => Err(e),
        },
    }
}

/// Executes the requested suites.
pub fn run(cfg: &RunConfig) -> Result<Report> {
    let p = cfg.params()?;
    let suites = cfg.suites()?;
    let m = match &cfg.index_set {
        Selection::List(v) => v.len(),
        Selection::All => 1,
    };
    let ranges = p.validate_ranges(m);
    let failing: Vec<String> =
        ranges.iter().filter(|r| !r.holds).map(|r| format!("{} (slack {})", r.name, format_scalar(&r.slack))).collect();
    let range_ok = failing.is_empty() && p.validated;
    let sets = if range_ok || cfg.allow_unvalidated { resolve_sets(cfg, &p)? } else { Vec::new() };
    let mut runner = Runner {
        p: p.clone(),
        sets,
        physical: range_ok,
        bits: cfg.precision_bits,
        tol: tolerance(FLOAT_TOLERANCE_DIGITS, working_bits(cfg.precision_bits)),
        timings: cfg.timings,
        records: Vec::new(),
    };
    for name in suites {
        if name == "range" {
            let slacks: Vec<ExactScalar> = ranges.iter().filter(|r| !r.holds).map(|r| r.slack.clone()).collect();
            let detail = if failing.is_empty() {
                format!("{} inequalities hold (M={m})", ranges.len())
            } else {
                format!("violated: {}", failing.join("; "))
            };
            runner.case(name, format!("M={m}"), |_| Ok(Check::exact(slacks).require(range_ok).detail(detail)));
        } else if !range_ok && !cfg.allow_unvalidated {
            runner.case(name, "", |_| Ok(Check::skip("parameter range violated")));
        } else {
            runner.run_suite(name);
        }
    }
    let mut summary = Summary::default();
    for r in &runner.records {
        match r.status {
            Status::Pass => summary.pass += 1,
            Status::Fail => summary.fail += 1,
            Status::Skip => summary.skip += 1,
        }
    }
    Ok(Report {
        schema: SCHEMA.into(),
        parameters: p.to_string(),
        config: cfg.clone(),
        records: runner.records,
        summary,
    })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct CoefficientRow {
    #[serde(rename = "D")]
    pub index_set: String,
    /// "Xi" or "P".
    pub object: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    /// Parameters of the eta the polynomial is written in.
    pub eta_parameters: String,
    pub power: usize,
    pub coefficient: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct GridRow {
    #[serde(rename = "D")]
    pub index_set: String,
    pub x: usize,
    /// "B", "D", "psi_sq" or "P".
    pub quantity: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    pub value: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct SpectrumRow {
    pub n: usize,
    #[serde(rename = "E_n")]
    pub energy: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Tables {
    pub schema: String,
    pub parameters: String,
    pub coefficients: Vec<CoefficientRow>,
    pub grids: Vec<GridRow>,
    pub spectrum: Vec<SpectrumRow>,
}

/// File names of the CSV table set.
pub const TABLE_FILES: [&str; 3] = ["coefficients.csv", "grids.csv", "spectrum.csv"];

impl Tables {
    /// JSON renders one document; CSV renders the three files of [`TABLE_FILES`].
    pub fn render(&self, format: Format) -> Result<Vec<(String, String)>> {
        match format {
            Format::Json => Ok(vec![(
                "tables.json".into(),
                serde_json::to_string_pretty(self).map_err(|e| Error::Io(e.to_string()))? + "\n",
            )]),
            Format::Csv => {
                let opt = |v: Option<usize>| v.map(|n| n.to_string()).unwrap_or_default();
                let mut w = csv::Writer::from_writer(Vec::new());
                w.write_record(["D", "object", "n", "eta_parameters", "power", "coefficient"]).map_err(csv_err)?;
                for r in &self.coefficients {
                    w.write_record([&r.index_set, &r.object, &opt(r.n), &r.eta_parameters, &r.power.to_string(), &r.coefficient])
                        .map_err(csv_err)?;
                }
                let coeffs = finish_csv(w)?;
                let mut w = csv::Writer::from_writer(Vec::new());
                w.write_record(["D", "x", "quantity", "n", "value"]).map_err(csv_err)?;
                for r in &self.grids {
                    w.write_record([&r.index_set, &r.x.to_string(), &r.quantity, &opt(r.n), &r.value]).map_err(csv_err)?;
                }
                let grids = finish_csv(w)?;
                let mut w = csv::Writer::from_writer(Vec::new());
                w.write_record(["n", "E_n"]).map_err(csv_err)?;
                for r in &self.spectrum {
                    w.write_record([r.n.to_string(), r.energy.clone()]).map_err(csv_err)?;
                }
                let spectrum = finish_csv(w)?;
                Ok(TABLE_FILES.iter().map(|s| s.to_string()).zip([coeffs, grids, spectrum]).collect())
            }
        }
    }
}

/// Coefficient, grid and spectrum tables for the selected index sets. With
/// no admissible set, the undeformed system (D = {}) is tabulated.
pub fn table(cfg: &RunConfig) -> Result<Tables> {
    let p = cfg.params()?;
    if !p.validated && !cfg.allow_unvalidated {
        return Err(Error::Range(format!("{p} is outside the admissible range")));
    }
    let mut sets: Vec<Vec<usize>> = resolve_sets(cfg, &p)?.into_iter().map(|s| s.d).collect();
    if sets.is_empty() {
        sets.push(Vec::new());
    }
    let n = p.n;
    let mut coefficients = Vec::new();
    let mut grids = Vec::new();
    for ds in &sets {
        let name = label(ds).trim_start_matches("D=").to_string();
        let m = ds.len();
        let ell = crate::mi::ell_of(ds);
        let mut push_poly = |object: &str, k: Option<usize>, f: crate::poly::EtaPolynomial, eta_p: &ParameterSet| {
            for power in 0..=f.declared_degree {
                coefficients.push(CoefficientRow {
                    index_set: name.clone(),
                    object: object.into(),
                    n: k,
                    eta_parameters: eta_p.to_string(),
                    power,
                    coefficient: format_scalar(f.coeffs.get(power).unwrap_or(&ExactScalar::zero())),
                });
            }
        };
        let xi = if ds.is_empty() {
            crate::poly::EtaPolynomial::new(vec![ExactScalar::from_integer(1.into())], 0)
        } else {
            fit_denominator(&p, ds)?
        };
        debug_assert_eq!(xi.declared_degree, ell);
        push_poly("Xi", None, xi, &xi_eta_params(&p, m));
        for k in 0..=n {
            push_poly("P", Some(k), fit_mi_poly(&p, ds, k)?, &poly_eta_params(&p, m));
        }
        let (b, d) = potentials_from_xi(&p, ds)?;
        let psi = psi_sq(&p, ds)?;
        for x in 0..=n {
            for (q, v) in [("B", b.at(x)), ("D", d.at(x)), ("psi_sq", psi.at(x))] {
                grids.push(GridRow { index_set: name.clone(), x, quantity: q.into(), n: None, value: format_scalar(v) });
            }
            for k in 0..=n {
                let v = mi_poly(&p, ds, k, &p.site(x as i64))?;
                grids.push(GridRow { index_set: name.clone(), x, quantity: "P".into(), n: Some(k), value: format_scalar(&v) });
            }
        }
    }
    let spectrum = (0..=n).map(|k| SpectrumRow { n: k, energy: format_scalar(&energy(&p, k)) }).collect();
    Ok(Tables { schema: SCHEMA.into(), parameters: p.to_string(), coefficients, grids, spectrum })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn desk_racah(checks: &str) -> RunConfig {
        RunConfig::from_json(&format!(
            r#"{{"family":"racah","N":3,"b":12,"c":"1/2","d":1,"checks":{checks}}}"#
        ))
        .unwrap()
    }

    #[test]
    fn config_parsing() {
        let c = desk_racah(r#""all""#);
        assert_eq!(c.index_set, Selection::All);
        assert_eq!(c.precision_bits, 256);
        assert_eq!(c.suites().unwrap().len(), 22);
        let c = RunConfig::from_json(r#"{"family":"qracah","N":3,"q":"1/2","b":"1/1024","c":"1/2","d":"1/2","D":"2,1","checks":["zeros","range"]}"#)
            .unwrap();
        assert_eq!(c.index_set, Selection::List(vec![1, 2]));
        assert_eq!(c.suites().unwrap(), ["range", "zeros"]);
        assert!(RunConfig::from_json(r#"{"family":"racah","N":3,"b":1.5,"c":"1/2","d":1}"#).is_err());
        assert!(RunConfig::from_json(r#"{"family":"racah","N":3,"b":12,"c":"1/2","d":1,"bogus":1}"#).is_err());
        assert!(desk_racah(r#"["nope"]"#).suites().is_err());
    }

    #[test]
    fn zeros_records() {
        let mut c = desk_racah(r#"["zeros"]"#);
        c.index_set = Selection::List(vec![1, 2]);
        let r = run(&c).unwrap();
        let details: Vec<&str> = r.records.iter().map(|r| r.detail.as_str()).collect();
        assert_eq!(details, ["zeros: 1", "zeros: 2", "zeros: 3"]);
        assert!(r.success());
    }

    #[test]
    fn invalid_range_skips_the_rest() {
        let c = RunConfig::from_json(r#"{"family":"racah","N":3,"b":5,"c":"1/2","d":1,"D":[1]}"#).unwrap();
        let r = run(&c).unwrap();
        assert_eq!(r.records[0].status, Status::Fail);
        assert!(r.records[0].detail.contains("v_max"));
        assert!(r.records[1..].iter().all(|r| r.status == Status::Skip));
        assert!(!r.success());
    }

    #[test]
    fn tables_shape() {
        let mut c = desk_racah(r#""all""#);
        c.index_set = Selection::List(vec![1, 2]);
        let t = table(&c).unwrap();
        assert_eq!(t.coefficients.iter().filter(|r| r.object == "Xi").count(), 3);
        c.index_set = Selection::List(vec![]);
        let t = table(&c).unwrap();
        let ones: Vec<&GridRow> = t.grids.iter().filter(|g| g.quantity == "P" && g.x == 0).collect();
        assert_eq!(ones.len(), 4);
        assert!(ones.iter().all(|g| g.value == "1"));
        let files = t.render(Format::Csv).unwrap();
        assert_eq!(files.len(), 3);
        assert!(files[2].1.starts_with("n,E_n\n0,0\n"));
    }
}

//! Acceptance suite: one PASS/FAIL line per criterion at the two desk
//! configurations.

use std::time::Instant;

use mi_racah_core::casoratian::{casoratian, FunctionColumn};
use mi_racah_core::mi::{count_zeros, leading_coefficients, IndexSet};
use mi_racah_core::scalar::rat;
use mi_racah_core::verify::{run, Format, Report, RunConfig, Status};
use mi_racah_core::{ExactScalar, ParameterSet, Site};
use proptest::prelude::*;
use proptest::test_runner::{Config, TestRng, TestRunner};

const RACAH: &str = r#"{"family":"racah","N":3,"b":12,"c":"1/2","d":1}"#;
const QRACAH: &str = r#"{"family":"qracah","N":3,"q":"1/2","b":"1/1024","c":"1/2","d":"1/2"}"#;

struct Desk {
    params: ParameterSet,
    report: Report,
}

fn desk(json: &str) -> Desk {
    let cfg = RunConfig::from_json(json).unwrap();
    Desk { params: cfg.params().unwrap(), report: run(&cfg).unwrap() }
}

/// No record of the named suites failed and each suite passed at least once.
fn suites_pass(d: &Desk, names: &[&str], why: &mut Vec<String>) -> bool {
    let mut ok = true;
    for name in names {
        let recs: Vec<_> = d.report.records_named(name).collect();
        if !recs.iter().any(|r| r.status == Status::Pass) {
            why.push(format!("{name}: nothing passed"));
            ok = false;
        }
        for r in recs {
            if r.status == Status::Fail {
                why.push(format!("{name} {} {:?}: {}", r.case, r.status, r.detail));
                ok = false;
            }
        }
    }
    ok
}

fn line(k: usize, title: &str, ok: bool, why: &[String]) -> bool {
    let tag = if ok { "PASS" } else { "FAIL" };
    if why.is_empty() {
        println!("[{tag}] {k:>2}. {title}");
    } else {
        println!("[{tag}] {k:>2}. {title} -- {}", why.join(" | "));
    }
    ok
}

fn poly_strategy() -> impl Strategy<Value = Vec<(i64, i64)>> {
    prop::collection::vec((-6i64..7, 1i64..5), 1..4)
}

fn eval(c: &[(i64, i64)], t: &ExactScalar) -> ExactScalar {
    c.iter().rev().fold(ExactScalar::from_integer(0.into()), |acc, &(a, b)| acc * t + rat(a, b))
}

fn columns<'a>(fs: &'a [Vec<(i64, i64)>], extra: &[&'a Vec<(i64, i64)>]) -> Vec<FunctionColumn<'a>> {
    fs.iter()
        .chain(extra.iter().copied())
        .map(|c| FunctionColumn::new("f", move |t: &Site| Ok(eval(c, &t.0))))
        .collect()
}

/// Product and Jacobi-type Casoratian identities on random polynomial columns.
fn casoratian_identities(p: &ParameterSet, cases: u32) -> std::result::Result<u32, String> {
    let mut runner = TestRunner::new_with_rng(
        Config { cases, failure_persistence: None, ..Config::default() },
        TestRng::deterministic_rng(proptest::test_runner::RngAlgorithm::ChaCha),
    );
    let strat = (
        prop::collection::vec(poly_strategy(), 0..4),
        poly_strategy(),
        poly_strategy(),
        (-7i64..8, 2i64..9),
    );
    let count = std::cell::Cell::new(0u32);
    runner
        .run(&strat, |(fs, g, h, (sn, sd))| {
            count.set(count.get() + 1);
            let s = match p.family {
                mi_racah_core::Family::Racah => Site(rat(sn, sd)),
                mi_racah_core::Family::QRacah => Site(rat(sn.abs() + 1, sd)),
            };
            // W[g f_1, ..., g f_n](x) = prod_j g(x+j) W[f_1, ..., f_n](x)
            if !fs.is_empty() {
                let gf: Vec<FunctionColumn<'_>> = fs
                    .iter()
                    .map(|c| {
                        let g = &g;
                        FunctionColumn::new("gf", move |t: &Site| Ok(eval(g, &t.0) * eval(c, &t.0)))
                    })
                    .collect();
                let lhs = casoratian(p, &gf, &s).unwrap();
                let mut rhs = casoratian(p, &columns(&fs, &[]), &s).unwrap();
                for j in 0..fs.len() as i64 {
                    rhs *= eval(&g, &p.shift_site(&s, j).0);
                }
                prop_assert_eq!(lhs, rhs);
            }
            // W[W[f, g], W[f, h]](x) = W[f](x+1) W[f, g, h](x)
            let wg = FunctionColumn::new("Wg", |t: &Site| casoratian(p, &columns(&fs, &[&g]), t));
            let wh = FunctionColumn::new("Wh", |t: &Site| casoratian(p, &columns(&fs, &[&h]), t));
            let lhs = casoratian(p, &[wg, wh], &s).unwrap();
            let rhs = casoratian(p, &columns(&fs, &[]), &p.shift_site(&s, 1)).unwrap() * casoratian(p, &columns(&fs, &[&g, &h]), &s).unwrap();
            prop_assert_eq!(lhs, rhs);
            Ok(())
        })
        .map_err(|e| e.to_string())?;
    Ok(count.get())
}

#[test]
fn acceptance() {
    let start = Instant::now();
    let r = desk(RACAH);
    let q = desk(QRACAH);
    let both = [&r, &q];
    let mut results = Vec::new();
    let mut check = |k: usize, title: &str, suites: &[&str], extra: &dyn Fn(&mut Vec<String>) -> bool| {
        let mut why = Vec::new();
        let mut ok = true;
        for d in both {
            ok &= suites_pass(d, suites, &mut why);
        }
        ok &= extra(&mut why);
        results.push(line(k, title, ok, &why));
    };
    let none = |_: &mut Vec<String>| true;

    check(1, "original eigen-equation, grid and off-grid, exact", &["original-eigen"], &none);
    check(2, "orthogonality and norms d_n^2, exact", &["orthogonality"], &none);
    check(3, "completeness: exact dual orthogonality, off-diagonal <= 1e-40 at 256 bits", &["completeness"], &none);
    check(4, "twist linear relation and squared off-diagonal identity, exact", &["twist-relation"], &none);
    check(5, "virtual equation: zero for x<N, nonzero at x=N", &["virtual-equation"], &|why| {
        let counts = (r.report.records_named("virtual-equation").count(), q.report.records_named("virtual-equation").count());
        if counts != (3, 2) {
            why.push(format!("virtual levels {counts:?}, expected (3, 2)"));
        }
        counts == (3, 2)
    });
    check(6, "xi_v > 0 on the grid and E~_v < 0", &["xi-positivity"], &none);
    check(7, "deformed isospectrality: eigen equation, det(H~-E_n)=0, 256-bit spectrum", &["similarity-eigen", "charpoly", "float-oracle"], &|why| {
        let sets = |d: &Desk| IndexSet::all_valid(&d.params).unwrap().len();
        let seen = |d: &Desk| d.report.records_named("similarity-eigen").count() - 1;
        let ok = sets(&r) == seen(&r) && sets(&q) == seen(&q) && sets(&r) == 7 && sets(&q) == 3;
        if !ok {
            why.push("index set coverage mismatch".into());
        }
        ok
    });
    check(8, "norm products and normalized orthogonality, exact", &["chain", "norms"], &none);
    check(9, "degrees and leading coefficients", &["degrees", "leading-coeffs"], &|why| {
        let c = leading_coefficients(&r.params, &[1], 0).unwrap().0;
        if c != rat(11, 50) {
            why.push(format!("c^Xi_{{1}} = {c}"));
        }
        c == rat(11, 50)
    });
    check(
        10,
        "P_D0 identity, shape invariance, shifts, order independence, reductions, mirror",
        &["pd0-identity", "shape-invariance", "shifts", "order-independence", "reduction-m1", "reduction-level0", "mirror"],
        &none,
    );
    check(11, "Sturm zero counts equal n", &["zeros"], &|why| {
        let mut ok = true;
        for d in both {
            for s in IndexSet::all_valid(&d.params).unwrap() {
                let c = count_zeros(&d.params, &s.d, 0).unwrap();
                if c != 0 {
                    why.push(format!("{} n=0: {c} zeros", s));
                    ok = false;
                }
            }
        }
        ok
    });
    {
        let mut why = Vec::new();
        let mut ok = true;
        for p in [&r.params, &q.params] {
            match casoratian_identities(p, 128) {
                Ok(n) if n >= 100 => {}
                Ok(n) => {
                    why.push(format!("only {n} cases"));
                    ok = false;
                }
                Err(e) => {
                    why.push(e);
                    ok = false;
                }
            }
        }
        results.push(line(12, "Casoratian identities on 128 random column sets per lattice", ok, &why));
    }
    {
        let mut why = Vec::new();
        let mut ok = true;
        for (json, d) in [(RACAH, &r), (QRACAH, &q)] {
            let again = run(&RunConfig::from_json(json).unwrap()).unwrap();
            for f in [Format::Json, Format::Csv] {
                if again.render(f).unwrap() != d.report.render(f).unwrap() {
                    why.push(format!("{} {f:?} differs", d.params));
                    ok = false;
                }
            }
        }
        results.push(line(13, "repeated runs give byte-identical reports", ok, &why));
    }
    let elapsed = start.elapsed();
    println!("acceptance: {}/{} criteria pass in {:.1} s", results.iter().filter(|b| **b).count(), results.len(), elapsed.as_secs_f64());
    assert!(results.iter().all(|b| *b), "acceptance criteria failed");
}

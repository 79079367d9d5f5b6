//! Runtime self-checks over the bundled corpus and randomized properties.

use std::sync::Arc;
use std::time::Duration;

use rand::Rng;

use crate::bench::Expected;
use crate::engine::{solve, EngineConfig, VerdictKind};
use crate::gen::{contradiction, planted_sat, random_value, GenOptions};
use crate::lattice::{n_ulp, to_index, ulp_distance_cmp, FpFormat, FpScalar, Relation};
use crate::linalg::{pseudoinverse, Matrix, Projector, DEFAULT_RANK_TOL};
use crate::objective::{Ablation, Objective};
use crate::optimizer::start_rng;
use crate::smt::{is_model, parse, to_smtlib, Assignment};

pub const GROUPS: [&str; 5] = ["lattice", "frontend", "linalg", "objectives", "engine"];

#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub group: &'static str,
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

fn check(group: &'static str, name: &str, outcome: Result<String, String>) -> CheckResult {
    let (passed, detail) = match outcome {
        Ok(d) => (true, d),
        Err(d) => (false, d),
    };
    CheckResult { group, name: name.to_string(), passed, detail }
}

/// Runs every group whose name contains `filter` (all when `None`).
pub fn run(filter: Option<&str>, seed: u64) -> Vec<CheckResult> {
    let wanted = |g: &str| filter.is_none_or(|f| g.contains(f));
    let mut out = Vec::new();
    if wanted("lattice") {
        out.extend(lattice(seed));
    }
    if wanted("frontend") {
        out.extend(frontend(seed));
    }
    if wanted("linalg") {
        out.extend(linalg(seed));
    }
    if wanted("objectives") {
        out.extend(objectives(seed));
    }
    if wanted("engine") {
        out.extend(engine(seed));
    }
    out
}

fn random_f64<R: Rng>(rng: &mut R) -> FpScalar {
    random_value(rng, FpFormat::Binary64)
}

fn lattice(seed: u64) -> Vec<CheckResult> {
    let mut rng = start_rng(seed, 1);
    let round_trip = (|| {
        for _ in 0..5000 {
            let x = random_f64(&mut rng);
            let k = rng.random_range(-1_000_000i128..=1_000_000);
            let y = n_ulp(k, x);
            let ix = to_index(x).map_err(|e| e.to_string())?.0;
            let limit = FpFormat::Binary64.max_finite_index();
            if (ix + k).abs() <= limit && !n_ulp(-k, y).ieee_eq(x) {
                return Err(format!("n_ulp(-{k}, n_ulp({k}, {x})) differs"));
            }
        }
        Ok("5000 pairs".into())
    })();
    let monotone = (|| {
        for _ in 0..5000 {
            let (a, b) = (random_f64(&mut rng), random_f64(&mut rng));
            let (ia, ib) = (to_index(a).unwrap().0, to_index(b).unwrap().0);
            if (a.to_f64() < b.to_f64()) != (ia < ib) {
                return Err(format!("index order disagrees at {a} {b}"));
            }
        }
        Ok("5000 pairs".into())
    })();
    let minimal = (|| {
        let rels = [Relation::Eq, Relation::Le, Relation::Lt, Relation::Ge, Relation::Gt];
        for _ in 0..2000 {
            let a = random_value(&mut rng, FpFormat::Binary32);
            let b = n_ulp(rng.random_range(-40..=40), a);
            let rel = rels[rng.random_range(0..rels.len())];
            let d = ulp_distance_cmp(a, b, rel);
            let mut found = None;
            for k in 0..=100u128 {
                let moved = [n_ulp(k as i128, a), n_ulp(-(k as i128), a)];
                if moved.iter().any(|&m| rel.holds(m, b)) {
                    found = Some(k);
                    break;
                }
            }
            if found != Some(d) {
                return Err(format!("{a} {} {b}: distance {d}, brute force {found:?}", rel.smt_symbol()));
            }
        }
        Ok("2000 binary32 atoms".into())
    })();
    vec![
        check("lattice", "n-ulp round trip", round_trip),
        check("lattice", "index monotonicity", monotone),
        check("lattice", "distance minimality", minimal),
    ]
}

fn frontend(seed: u64) -> Vec<CheckResult> {
    let corpus = (|| {
        for (name, src) in crate::corpus::FILES {
            let f = parse(src).map_err(|e| format!("{name}: {e}"))?;
            let again = parse(&to_smtlib(&f)).map_err(|e| format!("{name} reprint: {e}"))?;
            if again.clauses != f.clauses || again.variables != f.variables {
                return Err(format!("{name}: reprint changes the formula"));
            }
        }
        Ok(format!("{} files", crate::corpus::FILES.len()))
    })();
    let mut rng = start_rng(seed, 2);
    let generated = (|| {
        for _ in 0..300 {
            let g = if rng.random::<bool>() {
                planted_sat(&mut rng, &GenOptions::default())
            } else {
                contradiction(&mut rng, &GenOptions::default())
            };
            let f = parse(&g.source).map_err(|e| format!("{e}\n{}", g.source))?;
            let again = parse(&to_smtlib(&f)).map_err(|e| e.to_string())?;
            if again.clauses != f.clauses {
                return Err(format!("reprint changes\n{}", g.source));
            }
        }
        Ok("300 generated scripts".into())
    })();
    vec![check("frontend", "bundled corpus round trip", corpus), check("frontend", "generated round trip", generated)]
}

fn linalg(seed: u64) -> Vec<CheckResult> {
    let mut rng = start_rng(seed, 3);
    let penrose = (|| {
        for _ in 0..200 {
            let m = rng.random_range(1..=6);
            let d = rng.random_range(1..=8);
            let rank = rng.random_range(1..=m.min(d));
            let basis: Vec<Vec<f64>> =
                (0..rank).map(|_| (0..d).map(|_| rng.random_range(-3.0..3.0)).collect()).collect();
            let rows: Vec<Vec<f64>> = (0..m)
                .map(|_| {
                    let w: Vec<f64> = (0..rank).map(|_| rng.random_range(-2.0..2.0)).collect();
                    (0..d).map(|j| (0..rank).map(|r| w[r] * basis[r][j]).sum()).collect()
                })
                .collect();
            let a = Matrix::from_rows(&rows);
            let g = a.matmul(&a.transpose());
            let p = pseudoinverse(&g, DEFAULT_RANK_TOL).map_err(|e| e.to_string())?;
            let scale = g.max_abs().max(1.0) * p.max_abs().max(1.0);
            let gpg = g.matmul(&p).matmul(&g);
            let pgp = p.matmul(&g).matmul(&p);
            let gp = g.matmul(&p);
            let pg = p.matmul(&g);
            let errs = [
                gpg.max_abs_diff(&g) / g.max_abs().max(1.0),
                pgp.max_abs_diff(&p) / p.max_abs().max(1.0),
                gp.max_abs_diff(&gp.transpose()) / scale,
                pg.max_abs_diff(&pg.transpose()) / scale,
            ];
            if errs.iter().any(|e| *e > 1e-9) {
                return Err(format!("Penrose residuals {errs:?}"));
            }
        }
        Ok("200 Gram matrices".into())
    })();
    let projection = (|| {
        for _ in 0..200 {
            let d = rng.random_range(1..=6);
            let m = rng.random_range(1..=d);
            let rows: Vec<Vec<f64>> = (0..m).map(|_| (0..d).map(|_| rng.random_range(-5.0..5.0)).collect()).collect();
            let b: Vec<f64> = (0..m).map(|_| rng.random_range(-5.0..5.0)).collect();
            let sys = crate::linalg::LinearSystem { a: Matrix::from_rows(&rows), b, var_map: (0..d).collect() };
            let Some(p) = Projector::new(&sys, DEFAULT_RANK_TOL) else { continue };
            let x: Vec<f64> = (0..d).map(|_| rng.random_range(-10.0..10.0)).collect();
            let once = p.project(&x).map_err(|e| e.to_string())?;
            let twice = p.project(&once.point).map_err(|e| e.to_string())?;
            if twice.sq_dist > 1e-12 * (1.0 + once.sq_dist) {
                return Err(format!("projection not idempotent: {}", twice.sq_dist));
            }
        }
        Ok("200 systems".into())
    })();
    vec![check("linalg", "Penrose conditions", penrose), check("linalg", "projection idempotence", projection)]
}

fn objectives(seed: u64) -> Vec<CheckResult> {
    let toy = (|| {
        let f = Arc::new(parse(crate::corpus::source("toy.smt2").expect("bundled")).map_err(|e| e.to_string())?);
        let s1 = Objective::s1(f.clone(), Ablation::default());
        let s2 = Objective::s2(f, Ablation::default());
        let v = |o: &Objective, x: &[f64]| o.evaluate(x).map(|e| e.value).unwrap_or(f64::NAN);
        let x = 1.0f64.next_up();
        let got = [v(&s1, &[2.0, 2.0]), v(&s1, &[2.0, 1.0]), v(&s1, &[1.0, 1.0]), v(&s2, &[x, x.next_up().next_up()])];
        if got == [2.0, 1.0, 0.0, 5.0] {
            Ok("2, 1, 0 and 5".into())
        } else {
            Err(format!("got {got:?}"))
        }
    })();
    let mut rng = start_rng(seed, 4);
    let representing = (|| {
        let mut pairs = 0;
        for _ in 0..400 {
            let g = if rng.random::<bool>() {
                planted_sat(&mut rng, &GenOptions::default())
            } else {
                contradiction(&mut rng, &GenOptions::default())
            };
            let f = Arc::new(parse(&g.source).map_err(|e| e.to_string())?);
            let s2 = Objective::s2(f.clone(), Ablation::default());
            let mut points: Vec<Vec<FpScalar>> =
                (0..4).map(|_| f.formats().iter().map(|&fm| random_value(&mut rng, fm)).collect()).collect();
            if let Some(p) = &g.planted {
                points.push(p.clone());
                points.push(p.iter().map(|&v| n_ulp(rng.random_range(-2..=2), v)).collect());
            }
            for p in points {
                let a = Assignment::new(p.clone()).map_err(|e| e.to_string())?;
                let zero = s2.evaluate_values(&p).exact_zero;
                if zero != is_model(&f, &a) {
                    return Err(format!("S2 zero {zero} disagrees with the evaluator\n{}", g.source));
                }
                pairs += 1;
            }
        }
        Ok(format!("{pairs} pairs"))
    })();
    vec![check("objectives", "toy values", toy), check("objectives", "S2 zero iff model", representing)]
}

fn engine(seed: u64) -> Vec<CheckResult> {
    let expected = crate::corpus::expected();
    let cfg = EngineConfig {
        timeout: Some(Duration::from_secs(30)),
        optimizer: crate::optimizer::OptimizerConfig { rng_seed: seed, ..Default::default() },
        ..EngineConfig::default()
    };
    crate::corpus::FILES
        .iter()
        .map(|(name, src)| {
            let outcome = (|| {
                let f = Arc::new(parse(src).map_err(|e| e.to_string())?);
                let v = solve(&f, &cfg).map_err(|e| e.to_string())?;
                match (expected.get(*name), v.kind) {
                    (Some(Expected::Sat), VerdictKind::Sat) => {
                        if is_model(&f, v.model.as_ref().expect("sat has a model")) {
                            Ok(format!("sat in {:.2}s", v.elapsed.as_secs_f64()))
                        } else {
                            Err("model fails validation".into())
                        }
                    }
                    (Some(Expected::Unsat), VerdictKind::Sat) => Err("sat on an unsat instance".into()),
                    (Some(Expected::Unsat), k) => Ok(format!("{k} in {:.2}s", v.elapsed.as_secs_f64())),
                    (_, k) => Err(format!("{k}, expected sat")),
                }
            })();
            check("engine", name, outcome)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn filter_selects_groups() {
        let r = run(Some("lattice"), 1);
        assert!(!r.is_empty() && r.iter().all(|c| c.group == "lattice"));
        assert!(r.iter().all(|c| c.passed), "{r:?}");
    }

    #[test]
    fn property_groups_pass() {
        for g in ["frontend", "linalg", "objectives"] {
            let r = run(Some(g), 5);
            assert!(r.iter().all(|c| c.passed), "{r:?}");
        }
    }
}

//! Acceptance criteria. Runs as a plain binary so every criterion prints one
//! `PASS`/`FAIL` line; exits nonzero if any fails.

use std::collections::BTreeMap;
use std::time::{Duration, Instant};

use fibcode::circuit::barenco_toffoli_count;
use fibcode::fib_data::fibonacci;
use fibcode::lattice::TrivalentLattice;
use fibcode::levinwen::{self, bp_oracle, VerifyOptions};
use fibcode::{Circuit, CostModel, FibonacciTensorSet};

type Outcome = Result<String, String>;
type Criterion<'a> = (&'static str, Duration, Box<dyn Fn() -> Outcome + 'a>);

fn check(cond: bool, detail: String) -> Outcome {
    if cond {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn counts(c: &Circuit, m: CostModel) -> (usize, usize, usize, usize, usize) {
    let g = c.count_gates(m);
    (g.toffoli5, g.toffoli4, g.toffoli3, g.cnot, g.single_qubit_rotation)
}

fn report_outcome(r: &fibcode::VerificationReport) -> Outcome {
    check(
        r.passed() && r.cases_total > 0,
        format!("{} {}/{} max_dev={:.2e}", r.name, r.cases_passed, r.cases_total, r.max_deviation),
    )
}

fn all(outcomes: Vec<Outcome>) -> Outcome {
    let mut details = Vec::new();
    let mut ok = true;
    for o in outcomes {
        match o {
            Ok(d) => details.push(d),
            Err(d) => {
                ok = false;
                details.push(format!("FAILED[{d}]"));
            }
        }
    }
    check(ok, details.join("; "))
}

fn qv_counts() -> Outcome {
    let c = levinwen::qv_circuit();
    let d = counts(&c, CostModel::Decomposed);
    let p = counts(&c, CostModel::PrimitiveNToffoli);
    check(d == (0, 0, 4, 3, 0) && p == (0, 1, 0, 3, 0), format!("decomposed={d:?} primitive={p:?}"))
}

fn f_counts() -> Outcome {
    let f = levinwen::f_circuit();
    let r = levinwen::reduced_f_circuit();
    let fd = counts(&f, CostModel::Decomposed);
    let fp = counts(&f, CostModel::PrimitiveNToffoli);
    let rd = counts(&r, CostModel::Decomposed);
    check(
        fd == (0, 0, 9, 4, 2) && fp == (1, 0, 1, 4, 2) && rd == (0, 0, 5, 4, 2),
        format!("F decomposed={fd:?} F primitive={fp:?} reduced decomposed={rd:?}"),
    )
}

fn bp_counts() -> Outcome {
    all((2..=6)
        .map(|n| {
            let c = levinwen::bp_measure_circuit(n).map_err(|e| e.to_string())?;
            let d = counts(&c, CostModel::Decomposed);
            let p = counts(&c, CostModel::PrimitiveNToffoli);
            check(
                d == (0, 0, 18 * n - 26, 8 * n - 5, 4 * n) && p == (2 * n - 4, 2, 2 * n - 2, 8 * n - 5, 4 * n),
                format!("n={n} {d:?} {p:?}"),
            )
        })
        .collect())
}

fn dimensions() -> Outcome {
    let mut outcomes: Vec<Outcome> = (2..=6u32)
        .map(|n| {
            let lattice = TrivalentLattice::build_plaquette(n as usize).map_err(|e| e.to_string())?;
            let enumerated = lattice.enumerate_valid_states().map_err(|e| e.to_string())?.len() as u64;
            let expect = fibonacci(2 * n - 1).unwrap() + fibonacci(2 * n + 1).unwrap();
            check(enumerated == expect, format!("n={n} {enumerated}"))
        })
        .collect();
    let hex = bp_oracle(6, &FibonacciTensorSet::new()).map_err(|e| e.to_string())?;
    let (ones, zeros) = hex.split();
    outcomes.push(check(
        hex.valid().len() == 322 && (ones, zeros) == (89, 233),
        format!("hexagon {} = {ones} + {zeros}", hex.valid().len()),
    ));
    all(outcomes)
}

fn pentagon(opts: &VerifyOptions) -> Outcome {
    let full = levinwen::verify_pentagon(opts).map_err(|e| e.to_string())?;
    let simple = levinwen::verify_simplified_pentagon(opts).map_err(|e| e.to_string())?;
    let simple_ok = simple.max_deviation <= 1e-12;
    all(vec![
        report_outcome(&full).and_then(|d| check(full.max_deviation <= 1e-10, d)),
        report_outcome(&simple).and_then(|d| check(simple_ok, d)),
    ])
}

fn bp_equivalence(opts: &VerifyOptions) -> Outcome {
    all((2..=6)
        .map(|n| {
            let r = levinwen::verify_bp(n, opts).map_err(|e| e.to_string())?;
            report_outcome(&r).and_then(|d| check(r.max_deviation <= 1e-9, d))
        })
        .collect())
}

fn lowering(opts: &VerifyOptions) -> Outcome {
    let mut outcomes =
        vec![levinwen::verify_lowering(opts).map_err(|e| e.to_string()).and_then(|r| report_outcome(&r))];
    for (controls, expect) in [(3usize, 4usize), (4, 8)] {
        let width = 2 * controls - 1;
        let mut c = Circuit::new(width).unwrap();
        c.ntoffoli(&(0..controls).collect::<Vec<_>>(), controls).unwrap();
        let ancillas = (controls + 1..width).collect();
        let lowered = c.lower_ntoffoli(&BTreeMap::from([(0, ancillas)])).unwrap();
        let got = lowered.count_gates(CostModel::PrimitiveNToffoli).toffoli3;
        outcomes.push(check(
            got == expect && barenco_toffoli_count(controls + 1) == expect && lowered.len() == expect,
            format!("{}-qubit toffoli -> {got} toffolis", controls + 1),
        ));
    }
    all(outcomes)
}

fn tadpole_pull(opts: &VerifyOptions) -> Outcome {
    let r = levinwen::verify_tadpole_pull(opts).map_err(|e| e.to_string())?;
    report_outcome(&r)
}

fn commutation(opts: &VerifyOptions) -> Outcome {
    all([2, 3, 6]
        .iter()
        .map(|&n| {
            let r = levinwen::verify_commutation(n, opts).map_err(|e| e.to_string())?;
            report_outcome(&r).and_then(|d| check(r.max_deviation <= 1e-10, d))
        })
        .collect())
}

fn mutation() -> Outcome {
    let mut outcomes = Vec::new();
    for (i, j) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
        let opts = VerifyOptions { tensors: FibonacciTensorSet::with_perturbed_f(i, j, 1e-3), ..Default::default() };
        let p = levinwen::verify_pentagon(&opts).map_err(|e| e.to_string())?;
        let b = levinwen::verify_bp(2, &opts).map_err(|e| e.to_string())?;
        outcomes.push(check(
            !p.passed() && p.witness.is_some() && !b.passed() && b.witness.is_some(),
            format!(
                "F[{i}][{j}] pentagon witness={} bp-2 witness={}",
                p.witness.as_deref().unwrap_or("none"),
                b.witness.as_deref().unwrap_or("none")
            ),
        ));
    }
    all(outcomes)
}

fn main() {
    let opts = VerifyOptions::default();
    let criteria: Vec<Criterion> = vec![
        ("1 gate counts Q_v", Duration::from_secs(1), Box::new(qv_counts)),
        ("2 gate counts F", Duration::from_secs(1), Box::new(f_counts)),
        ("3 gate counts B_p", Duration::from_secs(1), Box::new(bp_counts)),
        ("4 dimension counts", Duration::from_secs(10), Box::new(dimensions)),
        ("5 pentagon identity", Duration::from_secs(5), Box::new(|| pentagon(&opts))),
        ("6 B_p equivalence", Duration::from_secs(60), Box::new(|| bp_equivalence(&opts))),
        ("7 Toffoli lowering", Duration::from_secs(5), Box::new(|| lowering(&opts))),
        ("8 tadpole pull-through", Duration::from_secs(5), Box::new(|| tadpole_pull(&opts))),
        ("9 commutation", Duration::from_secs(60), Box::new(|| commutation(&opts))),
        ("10 mutation sensitivity", Duration::from_secs(10), Box::new(mutation)),
    ];
    let mut failed = 0;
    for (name, limit, run) in &criteria {
        let start = Instant::now();
        let outcome = run();
        let elapsed = start.elapsed();
        let (ok, detail) = match outcome {
            Ok(d) => (elapsed < *limit, d),
            Err(d) => (false, d),
        };
        if !ok {
            failed += 1;
        }
        println!(
            "{} criterion {name}: {detail} ({:.3}s, limit {}s)",
            if ok { "PASS" } else { "FAIL" },
            elapsed.as_secs_f64(),
            limit.as_secs()
        );
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}

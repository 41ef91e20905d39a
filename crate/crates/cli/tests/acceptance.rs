//! Acceptance suite: one line per criterion, nonzero exit if any fails.
//!
//! Criteria run one after another so that each wall-clock budget measures a
//! single criterion on an otherwise idle thread pool.

use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use projinv::suite::{
    cochain_suite, coordinates_suite, frame_suite, image_suite, invariance_suite, rank_suite, relations_suite,
    relative_suite, Check, SuiteParams, SuiteReport, SUITE_NAMES,
};

const SEED: u64 = 20240917;

// Wall-clock budgets; criteria without one get `None`.
const FRAME_BUDGET: Duration = Duration::from_secs(5);
const INVARIANCE_BUDGET: Duration = Duration::from_secs(10);
const RANK_BUDGET: Duration = Duration::from_secs(10);
const COCHAIN_BUDGET: Duration = Duration::from_secs(30);
const IMAGE_BUDGET: Duration = Duration::from_secs(60);

// Trial counts each criterion demands; the suites must run at least these.
const FRAME_TRIALS: usize = 1000;
const INVARIANCE_TRIALS: usize = 1000;
const COORDINATE_TRIALS: usize = 100;
const RELATION_TRIALS: usize = 100;
const RANK_TRIALS: usize = 10;
const RELATIVE_TRIALS: usize = 1000;
const COCHAIN_TRIALS: usize = 100;
const IMAGE_TRIALS: usize = 50;

// Tolerances as stated by the criteria, checked against what each suite used.
const NORMALIZATION_BOUND: f64 = 1e-9;
const EQUIVARIANCE_BOUND: f64 = 1e-8;
const INVARIANCE_BOUND: f64 = 1e-8;
const COORDINATES_BOUND: f64 = 1e-9;
const RELATIONS_BOUND: f64 = 1e-10;
const RANK_RATIO_BOUND: f64 = 1e-6;
const RELATIVE_BOUND: f64 = 1e-8;
const CLOSED_FORM_BOUND: f64 = 1e-9;
const COCYCLE_BOUND: f64 = 1e-9;
const DOUBLE_COBOUNDARY_BOUND: f64 = 1e-8;
const CONTRACTION_BOUND: f64 = 1e-7;
const RECONSTRUCTION_BOUND: f64 = 1e-9;
const SOBEL_BOUND: f64 = 0.02;
const WARP_BOUND: f64 = 2e-2;
const INJECTED_BOUND: f64 = 1e-9;

struct Outcome {
    passes: bool,
    detail: String,
}

/// Finds the check whose name starts with `prefix` and verifies its bound,
/// direction and trial count against the criterion.
fn expect(report: &SuiteReport, prefix: &str, kind: &str, bound: f64, trials: usize, problems: &mut Vec<String>) {
    let found: Vec<&Check> = report.checks.iter().filter(|c| c.name.starts_with(prefix)).collect();
    if found.is_empty() {
        problems.push(format!("no check named {prefix:?}"));
    }
    for c in found {
        let bound_ok = match kind {
            "max" => c.bound <= bound,
            _ => c.bound >= bound,
        };
        if c.kind != kind || !bound_ok {
            problems.push(format!("{}: bound {:e} ({}) looser than {bound:e}", c.name, c.bound, c.kind));
        } else if c.trials < trials {
            problems.push(format!("{}: {} trials, need {trials}", c.name, c.trials));
        } else if !c.passes {
            problems.push(format!("{}: {:e} vs {:e}, {} of {} failed", c.name, c.value, c.bound, c.failures, c.trials));
        }
    }
}

fn worst(report: &SuiteReport) -> String {
    report
        .checks
        .iter()
        .map(|c| format!("{} = {:.2e}", c.name, c.value))
        .collect::<Vec<_>>()
        .join("; ")
}

fn judge(report: &SuiteReport, problems: Vec<String>) -> Outcome {
    if problems.is_empty() && report.passes {
        Outcome { passes: true, detail: worst(report) }
    } else {
        Outcome { passes: false, detail: problems.join("; ") }
    }
}

fn params() -> SuiteParams {
    SuiteParams::new(SEED)
}

fn frame_correctness() -> Outcome {
    let r = frame_suite(&params());
    let mut p = Vec::new();
    for n in 3..=6 {
        expect(&r, &format!("normalization residual n={n}"), "max", NORMALIZATION_BOUND, FRAME_TRIALS, &mut p);
        expect(&r, &format!("equivariance n={n}"), "max", EQUIVARIANCE_BOUND, FRAME_TRIALS, &mut p);
    }
    judge(&r, p)
}

fn absolute_invariance() -> Outcome {
    let r = invariance_suite(&params());
    let mut p = Vec::new();
    for n in 3..=6 {
        expect(&r, &format!("generating set n={n}"), "max", INVARIANCE_BOUND, INVARIANCE_TRIALS, &mut p);
    }
    judge(&r, p)
}

fn closed_form_agreement() -> Outcome {
    let r = coordinates_suite(&params());
    let mut p = Vec::new();
    expect(&r, "closed form vs frame", "max", COORDINATES_BOUND, COORDINATE_TRIALS, &mut p);
    judge(&r, p)
}

fn coordinate_relations() -> Outcome {
    let r = relations_suite(&params());
    let mut p = Vec::new();
    for name in ["iota(q2) iota(q3)", "iota(p3)", "iota(p2) iota(q3)", "tau'"] {
        expect(&r, name, "max", RELATIONS_BOUND, RELATION_TRIALS, &mut p);
    }
    judge(&r, p)
}

fn functional_independence() -> Outcome {
    let r = match rank_suite(&params()) {
        Ok(r) => r,
        Err(e) => return Outcome { passes: false, detail: e.to_string() },
    };
    let mut p = Vec::new();
    for (n, rank) in [(3, 4), (4, 8), (5, 12)] {
        expect(&r, &format!("rank {rank} of {rank} at n={n}"), "min", RANK_RATIO_BOUND, RANK_TRIALS, &mut p);
    }
    judge(&r, p)
}

fn relative_invariants() -> Outcome {
    let r = relative_suite(&params());
    let mut p = Vec::new();
    for n in 3..=6 {
        expect(&r, &format!("C has weight -1, n={n}"), "max", RELATIVE_BOUND, RELATIVE_TRIALS, &mut p);
    }
    expect(&r, "closed form |C|", "max", CLOSED_FORM_BOUND, RELATIVE_TRIALS, &mut p);
    for (n, w) in [(3, "1/3"), (4, "1"), (6, "1/3")] {
        expect(&r, &format!("z' has weight {w}, n={n}"), "max", RELATIVE_BOUND, RELATIVE_TRIALS, &mut p);
    }
    judge(&r, p)
}

fn cochain_identities() -> Outcome {
    let r = match cochain_suite(&params()) {
        Ok(r) => r,
        Err(e) => return Outcome { passes: false, detail: e.to_string() },
    };
    let mut p = Vec::new();
    expect(&r, "J is a cocycle", "max", COCYCLE_BOUND, COCHAIN_TRIALS, &mut p);
    for m in 0..2 {
        expect(&r, &format!("dd = 1 in degree {m}"), "max", DOUBLE_COBOUNDARY_BOUND, COCHAIN_TRIALS, &mut p);
    }
    for m in 1..=3 {
        expect(&r, &format!("contraction m={m}"), "max", CONTRACTION_BOUND, COCHAIN_TRIALS, &mut p);
    }
    expect(&r, "d(iota(J)^-1) = J", "max", RECONSTRUCTION_BOUND, COCHAIN_TRIALS, &mut p);
    judge(&r, p)
}

fn image_pipeline() -> Outcome {
    let r = match image_suite(&params()) {
        Ok(r) => r,
        Err(e) => return Outcome { passes: false, detail: e.to_string() },
    };
    let mut p = Vec::new();
    expect(&r, "Sobel vs exact gradient, sigma=6", "max", SOBEL_BOUND, 1, &mut p);
    expect(&r, "Sobel features under warp", "max", WARP_BOUND, IMAGE_TRIALS, &mut p);
    expect(&r, "injected jets under warp", "max", INJECTED_BOUND, IMAGE_TRIALS, &mut p);
    judge(&r, p)
}

fn run_cli(suite: &str) -> Result<Vec<u8>, String> {
    let out = Command::new(env!("CARGO_BIN_EXE_projinv"))
        .args(["verify", "--suite", suite, "--seed", "7"])
        .output()
        .map_err(|e| e.to_string())?;
    if !out.status.success() {
        return Err(format!("{suite}: exit {:?}: {}", out.status.code(), String::from_utf8_lossy(&out.stderr)));
    }
    Ok(out.stdout)
}

fn determinism() -> Outcome {
    let mut p = Vec::new();
    for suite in SUITE_NAMES {
        match (run_cli(suite), run_cli(suite)) {
            (Ok(a), Ok(b)) if a == b && !a.is_empty() => {}
            (Ok(_), Ok(_)) => p.push(format!("{suite}: outputs differ")),
            (Err(e), _) | (_, Err(e)) => p.push(e),
        }
    }
    Outcome {
        passes: p.is_empty(),
        detail: if p.is_empty() { format!("{} suites byte-identical", SUITE_NAMES.len()) } else { p.join("; ") },
    }
}

fn main() -> ExitCode {
    type Criterion = (&'static str, fn() -> Outcome, Option<Duration>);
    let criteria: [Criterion; 9] = [
        ("frame correctness", frame_correctness, Some(FRAME_BUDGET)),
        ("absolute invariance", absolute_invariance, Some(INVARIANCE_BUDGET)),
        ("frame/closed-form agreement", closed_form_agreement, None),
        ("coordinate relations", coordinate_relations, None),
        ("functional independence", functional_independence, Some(RANK_BUDGET)),
        ("relative invariants", relative_invariants, None),
        ("cochain suite", cochain_identities, Some(COCHAIN_BUDGET)),
        ("image pipeline", image_pipeline, Some(IMAGE_BUDGET)),
        ("determinism", determinism, None),
    ];
    let mut failed = 0;
    for (i, (name, run, budget)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let mut out = run();
        let elapsed = start.elapsed();
        if let Some(b) = budget {
            if elapsed > *b {
                out.passes = false;
                out.detail = format!("took {elapsed:.2?}, budget {b:?}; {}", out.detail);
            }
        }
        let verdict = if out.passes { "PASS" } else { "FAIL" };
        println!("criterion {} {verdict} {name} [{elapsed:.2?}]: {}", i + 1, out.detail);
        failed += usize::from(!out.passes);
    }
    println!("acceptance: {} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

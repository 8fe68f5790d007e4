//! Acceptance criteria, one line each. Runs on seeds outside the calibration
//! set so that drift checks compare fresh fits against the shipped baseline.
//!
//! A criterion listed in `EXPECTED_FAILURES` prints FAIL and does not fail
//! the run; if it ever passes the run fails, so the list cannot go stale.

use std::time::{Duration, Instant};

use tflab::decomposition::DRIFT_TOLERANCE;
use tflab::harness::{run_experiment, Artifacts, Baseline, Experiment, ExperimentConfig};

const SEEDS: [u64; 2] = [5, 6];

/// Criteria that do not hold at desk scale, with the reason.
const EXPECTED_FAILURES: &[(u32, &str)] =
    &[(1, "ratio slope for r = 0.6 stays near 0.03 for N <= 256; the asymptotic 1/6 is not reached")];

struct Line {
    id: u32,
    title: &'static str,
    pass: bool,
    detail: Vec<String>,
    elapsed: Duration,
}

impl Line {
    fn new(id: u32, title: &'static str) -> Self {
        Line { id, title, pass: true, detail: Vec::new(), elapsed: Duration::ZERO }
    }

    fn check(&mut self, ok: bool, what: impl Into<String>) {
        let what = what.into();
        if !ok {
            self.pass = false;
            self.detail.push(format!("FAILED {what}"));
        } else {
            self.detail.push(what);
        }
    }

    /// Every verdict of `art` must pass, each recorded under `tag`.
    fn verdicts(&mut self, tag: &str, art: &Artifacts, names: &[&str]) {
        for name in names {
            match art.verdict(name) {
                Some(v) => self.check(v.pass, format!("{tag} {}: {}", v.name, v.detail)),
                None => self.check(false, format!("{tag} {name}: missing")),
            }
        }
    }
}

fn run(exp: Experiment, seed: u64, edit: impl FnOnce(&mut ExperimentConfig), baseline: &Baseline) -> Artifacts {
    let mut cfg = ExperimentConfig::new(exp, seed);
    edit(&mut cfg);
    run_experiment(&cfg, baseline).unwrap_or_else(|e| panic!("{exp} failed to run: {e}"))
}

fn counterexample_scaling(b: &Baseline) -> Line {
    let mut l = Line::new(1, "counterexample scaling");
    for r in [1.0, 0.6] {
        let art = run(Experiment::CounterexampleScan, SEEDS[0], |c| c.params.r = Some(r), b);
        let ratio = if r == 1.0 { "ratio_bounded" } else { "ratio_growth" };
        l.verdicts(&format!("r={r}"), &art, &["avg_norm_slope", "test_norm_slope_1.5", "test_norm_slope_2", "test_norm_slope_4", ratio]);
    }
    l
}

fn adaptedness(b: &Baseline) -> Line {
    let mut l = Line::new(2, "adapted packets");
    let art = run(Experiment::PacketsValidate, SEEDS[0], |_| {}, b);
    l.verdicts("", &art, &["normalisation", "frequency_support", "decay_constants", "orthogonality"]);
    l
}

fn enlargement(b: &Baseline) -> Line {
    let mut l = Line::new(3, "grid enlargement");
    let art = run(Experiment::GridLemmaCheck, SEEDS[0], |_| {}, b);
    l.verdicts("", &art, &["enlargement"]);
    l
}

fn separation(b: &Baseline) -> Line {
    let mut l = Line::new(4, "grid separation");
    for seed in SEEDS {
        let art = run(Experiment::GridLemmaCheck, seed, |_| {}, b);
        l.verdicts(&format!("seed {seed}"), &art, &["flat_measure", "square_sum", "separation_drift"]);
    }
    l
}

fn restriction_maximal(b: &Baseline) -> Line {
    let mut l = Line::new(5, "maximal Fourier restriction");
    let art = run(Experiment::BourgainScan, SEEDS[0], |_| {}, b);
    l.verdicts("", &art, &["growth_exponent", "single_point"]);
    l
}

fn partial_sums(b: &Baseline) -> Line {
    let mut l = Line::new(6, "maximal partial sums");
    let art = run(Experiment::RmCheck, SEEDS[0], |_| {}, b);
    l.verdicts("", &art, &["ratio", "point_mass_exhaustive"]);
    l
}

fn identities_and_pipeline(b: &Baseline) -> (Line, Line) {
    let mut ident = Line::new(7, "exact identities");
    let mut pipe = Line::new(8, "master pipeline");
    let mut flats = Vec::new();
    for seed in SEEDS {
        let start = Instant::now();
        let art = run(Experiment::PipelineRun, seed, |_| {}, b);
        pipe.elapsed = pipe.elapsed.max(start.elapsed());
        ident.verdicts(&format!("seed {seed}"), &art, &["exact_identities", "restriction_identity"]);
        pipe.verdicts(&format!("seed {seed}"), &art, &["structure", "flat_constant", "sigma_bound", "bounds", "reports"]);
        flats.push(art.fitted.0.get("main_flat").copied().unwrap_or(f64::NAN));
    }
    let spread = (flats[0] - flats[1]).abs() / flats[0].max(flats[1]);
    pipe.check(spread < DRIFT_TOLERANCE, format!("flat constant across seeds {flats:?}, spread {:.2}%", 100.0 * spread));
    pipe.check(pipe.elapsed < Duration::from_secs(600), format!("slowest run {:.1?} within 10 minutes", pipe.elapsed));
    (ident, pipe)
}

fn operator_sanity(b: &Baseline) -> Line {
    let mut l = Line::new(9, "operator sanity");
    let art = run(Experiment::MaximalScan, SEEDS[0], |_| {}, b);
    l.verdicts("", &art, &["domination", "domination_derived", "maximal_of_constants", "odd_symmetry_zero"]);
    l
}

fn main() {
    let b = Baseline::builtin();
    let mut lines = Vec::new();
    let start = Instant::now();
    let mut first = counterexample_scaling(&b);
    first.elapsed = start.elapsed();
    first.check(first.elapsed < Duration::from_secs(300), format!("runtime {:.1?} within 5 minutes", first.elapsed));
    lines.push(first);
    lines.push(adaptedness(&b));
    lines.push(enlargement(&b));
    lines.push(separation(&b));
    lines.push(restriction_maximal(&b));
    lines.push(partial_sums(&b));
    let (ident, pipe) = identities_and_pipeline(&b);
    lines.push(ident);
    lines.push(pipe);
    lines.push(operator_sanity(&b));

    let verbose = std::env::var_os("ACCEPTANCE_VERBOSE").is_some();
    let mut bad = Vec::new();
    for l in &lines {
        let expected = EXPECTED_FAILURES.iter().find(|(id, _)| *id == l.id);
        let status = match (l.pass, expected) {
            (true, None) => "PASS",
            (false, Some(_)) => "FAIL (expected)",
            (false, None) => "FAIL",
            (true, Some(_)) => "PASS (unexpected)",
        };
        println!("criterion {} {}: {status}", l.id, l.title);
        for d in &l.detail {
            if verbose || d.starts_with("FAILED") {
                println!("    {d}");
            }
        }
        if let Some((_, why)) = expected {
            println!("    known: {why}");
        }
        if l.pass == expected.is_some() {
            bad.push(l.id);
        }
    }
    if !bad.is_empty() {
        eprintln!("acceptance: unexpected outcome for criteria {bad:?}");
        std::process::exit(1);
    }
}

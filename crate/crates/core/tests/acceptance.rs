//! Acceptance criteria 1-9. Prints one PASS/FAIL line per criterion and
//! exits nonzero if any criterion fails.

use std::f64::consts::PI;
use std::fs;
use std::path::Path;
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use reeb_core::classify::{classify, flow_classify};
use reeb_core::linearize::{koenigs_limit, telescoping_bound};
use reeb_core::oscillation::{check_witness, EquivalenceWitness};
use reeb_core::oscillation::{lemma2_suite, sigma_from_profile, star, Relation};
use reeb_core::reebflow::{build_flow, extract_transitions, time_scale, transition_time};
use reeb_core::{
    EFunction, Flow, GridSpec, Homeo, LinearizeConfig, Shift, Thresholds, Transversal, Verdict,
};

const SEED: u64 = 20_240_601;

/// Output of the brute-force scan below, frozen; `2 sqrt 3 - 2 pi / 3` to 1e-10.
const SIGMA_BOUNDED_OSC: f64 = 1.369_706_512_626_155_6;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn gallery() -> Vec<(&'static str, EFunction)> {
    vec![
        ("std_log", EFunction::builtin("std_log", &[]).unwrap()),
        (
            "paper_example",
            EFunction::builtin("paper_example", &[]).unwrap(),
        ),
        (
            "bounded_osc(2)",
            EFunction::builtin("bounded_osc", &[2.0]).unwrap(),
        ),
        (
            "koenigs_demo",
            EFunction::builtin("koenigs_demo", &[]).unwrap(),
        ),
    ]
}

fn gallery_flows(grid: &GridSpec) -> Vec<(String, Flow)> {
    let mut flows = vec![("standard".to_string(), Flow::standard())];
    for (name, f) in gallery() {
        flows.push((
            format!("realized {name}"),
            build_flow(&f, 0.25, 0.5, grid).unwrap(),
        ));
    }
    flows
}

fn criterion_1() -> Outcome {
    let grid = GridSpec::new(512, 40);
    let flow = Flow::standard();
    let tv = Transversal::defaults();
    let start = Instant::now();
    let mut err = 0.0f64;
    for x in grid.nodes::<f64>() {
        let t = transition_time(&flow, &tv, x).unwrap();
        err = err.max((t + x.ln()).abs());
    }
    let elapsed = start.elapsed();
    outcome(
        err < 1e-12 && elapsed < Duration::from_secs(1),
        format!("sup |t + ln x| = {err:.3e}, runtime {elapsed:.2?}"),
    )
}

fn criterion_2() -> Outcome {
    let grid = GridSpec::new(512, 40);
    let tv = Transversal::defaults();
    let c0 = 0.25;
    let start = Instant::now();
    let mut worst = Vec::new();
    for (name, f) in gallery().into_iter().take(3) {
        let flow = build_flow(&f, c0, 0.5, &grid).unwrap();
        let shift = flow.shift();
        let mut err = 0.0f64;
        for x in grid.nodes::<f64>().into_iter().filter(|&x| x <= c0) {
            let t = transition_time(&flow, &tv, x).unwrap();
            err = err.max((t - (f.eval(x).unwrap() + shift)).abs());
        }
        worst.push((name, err));
    }
    let elapsed = start.elapsed();
    let max = worst.iter().map(|w| w.1).fold(0.0, f64::max);
    let parts: Vec<String> = worst.iter().map(|(n, e)| format!("{n} {e:.3e}")).collect();
    outcome(
        max < 1e-9 && elapsed < Duration::from_secs(10),
        format!("{}, runtime {elapsed:.2?}", parts.join(", ")),
    )
}

fn criterion_3() -> Outcome {
    let grid = GridSpec::new(512, 40);
    let tv = Transversal::defaults();
    let mut max = 0.0f64;
    for (_, flow) in gallery_flows(&grid) {
        let base = extract_transitions(&flow, &tv, &grid).unwrap();
        for lambda in [0.5, 2.0, 3.0] {
            let scaled =
                extract_transitions(&time_scale(&flow, lambda).unwrap(), &tv, &grid).unwrap();
            for (&(_, t), &(_, ts)) in base.iter().zip(&scaled) {
                let expected = t / lambda;
                let err = if expected == 0.0 {
                    ts.abs()
                } else {
                    ((ts - expected) / expected).abs()
                };
                max = max.max(err);
            }
        }
    }
    outcome(
        max < 1e-10,
        format!("max relative error {max:.3e} over 5 flows x 3 scales"),
    )
}

fn criterion_4() -> Outcome {
    let grid = GridSpec::new(512, 40);
    let k = Shift::expression("x/(1+x)").unwrap();
    let homeos = [Homeo::halve(), Homeo::square(), Homeo::soft_halve()];
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let mut failures = Vec::new();
    let mut runs = 0;
    for (name, f) in gallery() {
        for h in &homeos {
            let lambda = 10.0 - rng.gen_range(0.0..10.0);
            let c = rng.gen_range(-10.0..=10.0);
            let r = lemma2_suite(&f, lambda, c, h, &k, &grid).unwrap();
            runs += 1;
            let items = [
                r.scaling.pass,
                r.constant_shift.pass,
                r.pushforward.pass,
                r.perturbation.pass,
                r.zero_sequence.pass,
            ];
            for (i, ok) in items.iter().enumerate() {
                if !ok {
                    let extra = if i == 4 {
                        format!(
                            " ({} octaves with min f* > 0, zeros recur: {})",
                            r.zero_sequence.failing_octaves.len(),
                            r.zero_sequence.zeros_recur
                        )
                    } else {
                        String::new()
                    };
                    failures.push(format!("{name}/{}: item ({}){extra}", h.name(), i + 1));
                }
            }
        }
    }
    let detail = if failures.is_empty() {
        format!("{runs} runs, all items pass")
    } else {
        format!("{runs} runs; failing: {}", failures.join("; "))
    };
    outcome(failures.is_empty(), detail)
}

/// Running-max scan of `g(u) = u + 2 sin u` on `n` uniform points of
/// `[0, u_max]`; returns the largest deficit over `u >= u_from`.
fn brute_force_sigma(u_from: f64, u_max: f64, n: usize) -> f64 {
    let g = |u: f64| u + 2.0 * u.sin();
    let mut running = f64::NEG_INFINITY;
    let mut best = 0.0f64;
    for i in 0..n {
        let u = u_max * i as f64 / (n - 1) as f64;
        let v = g(u);
        running = running.max(v);
        if u >= u_from {
            best = best.max(running - v);
        }
    }
    best
}

fn criterion_5() -> Outcome {
    let ln2 = 2f64.ln();
    let oracle = brute_force_sigma(32.0 * ln2, 40.0 * ln2, 1_000_000);
    let closed = 2.0 * 3f64.sqrt() - 2.0 * PI / 3.0;
    let oracle_ok =
        (oracle - SIGMA_BOUNDED_OSC).abs() < 1e-12 && (closed - SIGMA_BOUNDED_OSC).abs() < 1e-9;

    let start = Instant::now();
    let f = EFunction::builtin("bounded_osc", &[2.0]).unwrap();
    let profile = star(&f, &GridSpec::new(512, 40)).unwrap();
    let sigma = sigma_from_profile(&profile, 8).unwrap().sigma_hat;
    let elapsed = start.elapsed();
    let err = (sigma - closed).abs();
    outcome(
        oracle_ok && err < 1e-3 && elapsed < Duration::from_secs(5),
        format!("sigma_hat {sigma:.9}, oracle {oracle:.9}, |err| {err:.3e}, runtime {elapsed:.2?}"),
    )
}

fn criterion_6() -> Outcome {
    let grid = GridSpec::new(512, 40);
    let f = EFunction::builtin("paper_example", &[]).unwrap();
    let p = star(&f, &grid).unwrap();
    let ratios: Vec<f64> = (5..=20)
        .map(|m| p.octave_sup[m + 1] / p.octave_sup[m])
        .collect();
    let (lo, hi) = ratios
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &r| {
            (a.min(r), b.max(r))
        });
    let w = EquivalenceWitness::new(2.0, Homeo::halve(), Shift::zero());
    let r = check_witness(&f, Relation::SelfSimilar, &w, &grid, 1e-12).unwrap();
    let verdict = classify(&f, &grid, &Thresholds::default()).unwrap().verdict;
    outcome(
        lo >= 1.95 && hi <= 2.05 && r.max_rel < 1e-12 && verdict == Verdict::Nonstandard,
        format!(
            "s_(m+1)/s_m in [{lo:.6}, {hi:.6}], witness residual {:.3e}, verdict {}",
            r.max_rel,
            verdict.as_str()
        ),
    )
}

fn criterion_7() -> Outcome {
    let f = EFunction::builtin("koenigs_demo", &[]).unwrap();
    let h = Homeo::square();
    // 2 f(x) - f(x^2)
    let k = Shift::from_fn("2x/(1+x) - x^2/(1+x^2)", |x: f64| {
        2.0 * x / (1.0 + x) - x * x / (1.0 + x * x)
    });
    let r = koenigs_limit(&f, &h, &k, &LinearizeConfig::new(2.0)).unwrap();
    let mut target_err = 0.0f64;
    let mut bound_violations = 0;
    let mut tail_nonzero = 0;
    let mut tail_probes = 0;
    for &(x, fx, v) in &r.probes {
        if x <= 0.99 {
            target_err = target_err.max((v - (-x.ln()).max(0.0)).abs());
        }
        if x < 1.0 && (fx - v).abs() > telescoping_bound(x, &h, &k, 2.0, 64) + 1e-14 {
            bound_violations += 1;
        }
        if x >= 1.0 {
            tail_probes += 1;
            if v != 0.0 {
                tail_nonzero += 1;
            }
        }
    }
    outcome(
        r.residual < 1e-10
            && target_err < 1e-8
            && bound_violations == 0
            && tail_probes > 0
            && tail_nonzero == 0,
        format!(
            "residual {:.3e}, |f_inf - max(-ln x, 0)| {target_err:.3e}, bound violations {bound_violations}, \
             nonzero on [1, inf) {tail_nonzero}/{tail_probes}",
            r.residual
        ),
    )
}

fn criterion_8() -> Outcome {
    let grid = GridSpec::new(512, 40);
    let th = Thresholds::default();
    let tv = Transversal::defaults();
    let mut problems = Vec::new();
    let mut checked = 0;
    let mut expect = |what: String, got: Verdict, want: Verdict| {
        checked += 1;
        if got != want {
            problems.push(format!(
                "{what}: {} (expected {})",
                got.as_str(),
                want.as_str()
            ));
        }
    };
    let funcs = [
        (
            "std_log",
            EFunction::builtin("std_log", &[]).unwrap(),
            Verdict::Standard,
        ),
        (
            "paper_example",
            EFunction::builtin("paper_example", &[]).unwrap(),
            Verdict::Nonstandard,
        ),
        (
            "bounded_osc(2)",
            EFunction::builtin("bounded_osc", &[2.0]).unwrap(),
            Verdict::Nonstandard,
        ),
    ];
    let h = Homeo::halve();
    let k = Shift::expression("x/(1+x)").unwrap();
    for (name, f, want) in &funcs {
        expect(
            name.to_string(),
            classify(f, &grid, &th).unwrap().verdict,
            *want,
        );
        let moved = f.transport(&h, &k);
        expect(
            format!("{name} transported"),
            classify(&moved, &grid, &th).unwrap().verdict,
            *want,
        );
    }
    let mut flows = vec![(
        "standard flow".to_string(),
        Flow::standard(),
        Verdict::Standard,
    )];
    for (name, f, want) in funcs {
        flows.push((
            format!("flow of {name}"),
            build_flow(&f, 0.25, 0.5, &grid).unwrap(),
            want,
        ));
    }
    for (name, flow, want) in &flows {
        expect(
            name.clone(),
            flow_classify(flow, &tv, &grid, &th).unwrap().verdict,
            *want,
        );
        for lambda in [0.5, 2.0, 5.0] {
            let scaled = time_scale(flow, lambda).unwrap();
            let got = flow_classify(&scaled, &tv, &grid, &th).unwrap().verdict;
            expect(format!("{name} scaled by {lambda}"), got, *want);
        }
    }
    let pass = problems.is_empty();
    let detail = if pass {
        format!("{checked} verdicts as expected")
    } else {
        problems.join("; ")
    };
    outcome(pass, detail)
}

fn run_cli(args: &[&str], out: &Path) -> i32 {
    let status = Command::new(env!("CARGO_BIN_EXE_reeb"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .expect("run reeb");
    status.status.code().unwrap_or(-1)
}

fn json_files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<(String, Vec<u8>)> = fs::read_dir(dir)
        .unwrap()
        .filter_map(|e| e.ok())
        .filter(|e| e.path().extension().is_some_and(|x| x == "json"))
        .map(|e| {
            (
                e.file_name().to_string_lossy().into_owned(),
                fs::read(e.path()).unwrap(),
            )
        })
        .collect();
    files.sort();
    files
}

fn criterion_9() -> Outcome {
    let runs: [&[&str]; 7] = [
        &[
            "sigma",
            "--builtin",
            "bounded_osc",
            "--param",
            "2",
            "--grid",
            "128,24",
        ],
        &[
            "roundtrip",
            "--builtin",
            "paper_example",
            "--grid",
            "128,24",
        ],
        &[
            "linearize",
            "--builtin",
            "koenigs_demo",
            "--homeo",
            "square",
            "--lambda",
            "2",
        ],
        &[
            "classify",
            "--builtin",
            "paper_example",
            "--lambda",
            "2",
            "--homeo",
            "halve",
            "--shift",
            "0",
        ],
        &["transition", "--flow", "standard", "--grid", "64,16"],
        &["plot", "--builtin", "std_log", "--grid", "64,16"],
        &[
            "lemma2",
            "--builtin",
            "std_log",
            "--seed",
            "7",
            "--trials",
            "2",
            "--grid",
            "128,32",
        ],
    ];
    let dir = tempfile::tempdir().unwrap();
    let mut compared = 0;
    let mut problems = Vec::new();
    for (i, args) in runs.iter().enumerate() {
        let a = dir.path().join(format!("{i}a"));
        let b = dir.path().join(format!("{i}b"));
        let (ca, cb) = (run_cli(args, &a), run_cli(args, &b));
        if ca != cb || ca == 2 {
            problems.push(format!("{}: exit codes {ca}/{cb}", args[0]));
            continue;
        }
        let (ja, jb) = (json_files(&a), json_files(&b));
        if args[0] != "plot" && ja.is_empty() {
            problems.push(format!("{}: no JSON written", args[0]));
        }
        if ja != jb {
            problems.push(format!("{}: JSON differs", args[0]));
        }
        compared += ja.len();
    }
    let pass = problems.is_empty();
    let detail = if pass {
        format!("{compared} JSON artifacts byte-identical across repeated runs")
    } else {
        problems.join("; ")
    };
    outcome(pass, detail)
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() -> ExitCode {
    let criteria: [Criterion; 9] = [
        ("standard-flow transition identity", criterion_1),
        ("round trip", criterion_2),
        ("time-scaling of transitions", criterion_3),
        ("Lemma 2 suite", criterion_4),
        ("sigma oracle for bounded_osc(2)", criterion_5),
        ("doubling of paper_example", criterion_6),
        ("linearization of koenigs_demo", criterion_7),
        ("classifier verdicts", criterion_8),
        ("CLI determinism", criterion_9),
    ];
    let mut failed = 0;
    for (n, (name, check)) in criteria.iter().enumerate() {
        let o = check();
        if !o.pass {
            failed += 1;
        }
        println!(
            "criterion {}: {} - {name}: {}",
            n + 1,
            if o.pass { "PASS" } else { "FAIL" },
            o.detail
        );
    }
    println!(
        "{} of {} criteria pass",
        criteria.len() - failed,
        criteria.len()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

//! The `reeb` command-line interface.
//!
//! Exit codes: 0 success, 1 a tolerance check failed, 2 usage or input error.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::classify::{self, Thresholds, WitnessSummary};
use crate::efunc::{EFunction, FunctionClass, FunctionSpec, GridSpec, Shift};
use crate::error::{Error, Result};
use crate::homeo::{probe_nodes, Homeo};
use crate::linearize::{self, LinearizeConfig};
use crate::oscillation::{
    self, check_witness, EquivalenceWitness, Relation, Variant, CLOSED_FORM_TOL, SAMPLED_TOL,
};
use crate::plot::{Chart, Series};
use crate::reebflow::{self, Flow, FlowConfig, Transversal};
use crate::report::{write_csv, write_json};

pub const EXIT_OK: i32 = 0;
pub const EXIT_TOLERANCE: i32 = 1;
pub const EXIT_INPUT: i32 = 2;

/// Round-trip tolerance on the prescription window.
pub const ROUNDTRIP_TOL: f64 = 1e-9;
/// Relative tolerance for time-scaled round trips.
pub const SCALED_ROUNDTRIP_TOL: f64 = 1e-10;

#[derive(Debug, Parser)]
#[command(
    name = "reeb",
    version,
    about = "Transition-time invariants of Reeb-foliation flows"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Oscillation profile and sigma estimate.
    Sigma(SigmaArgs),
    /// Realize f as a flow and extract it back.
    Roundtrip(RoundtripArgs),
    /// Linearize lambda f = f o h + k.
    Linearize(LinearizeArgs),
    /// Standard / nonstandard verdict.
    Classify(ClassifyArgs),
    /// Transition times of a flow.
    Transition(TransitionArgs),
    /// Plot f and f*, or an orbit of a flow.
    Plot(PlotArgs),
    /// Lemma 2 checks with seeded random lambda and c.
    Lemma2(Lemma2Args),
}

#[derive(Debug, Clone, Args)]
pub struct Input {
    /// Gallery function: std_log, paper_example, bounded_osc, koenigs_demo.
    #[arg(long)]
    pub builtin: Option<String>,
    /// Parameter of the builtin (bounded_osc amplitude).
    #[arg(long = "param")]
    pub params: Vec<f64>,
    /// CSV file with header `x,f`.
    #[arg(long)]
    pub csv: Option<PathBuf>,
    /// Closed-form expression in x.
    #[arg(long)]
    pub expr: Option<String>,
    /// Flow config JSON, or `standard`.
    #[arg(long)]
    pub flow: Option<String>,
    /// Claimed class of an expression input.
    #[arg(long, value_enum, default_value_t = ClassArg::E)]
    pub class: ClassArg,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ClassArg {
    E,
    E0,
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// Grid as `K,m_max`.
    #[arg(long, value_parser = parse_grid, default_value = "512,40")]
    pub grid: GridSpec,
    /// Output directory.
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum VariantArg {
    Star,
    Sharp,
}

#[derive(Debug, Args)]
pub struct SigmaArgs {
    #[command(flatten)]
    pub input: Input,
    #[command(flatten)]
    pub common: Common,
    #[arg(long, value_enum, default_value_t = VariantArg::Star)]
    pub variant: VariantArg,
    /// Tail window W in octaves.
    #[arg(long, default_value_t = oscillation::DEFAULT_TAIL_WINDOW)]
    pub window: usize,
}

#[derive(Debug, Args)]
pub struct RoundtripArgs {
    #[command(flatten)]
    pub input: Input,
    #[command(flatten)]
    pub common: Common,
    /// Time scale applied to the realized flow.
    #[arg(long, default_value_t = 1.0)]
    pub lambda: f64,
    #[arg(long, default_value_t = 0.25)]
    pub c0: f64,
    #[arg(long, default_value_t = 0.5)]
    pub c1: f64,
}

#[derive(Debug, Args)]
pub struct LinearizeArgs {
    #[command(flatten)]
    pub input: Input,
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub lambda: f64,
    /// Homeo id: halve, square, soft_halve, root_scale:N, pow:p or an expression.
    #[arg(long)]
    pub homeo: String,
    /// Shift k as an expression in x; defaults to lambda f - f o h.
    #[arg(long)]
    pub shift: Option<String>,
    #[arg(long, default_value_t = 1e-10)]
    pub tol: f64,
    #[arg(long, default_value_t = 64)]
    pub max_iters: usize,
}

#[derive(Debug, Args)]
pub struct ClassifyArgs {
    #[command(flatten)]
    pub input: Input,
    #[command(flatten)]
    pub common: Common,
    #[arg(long, default_value_t = 1e-3)]
    pub tau_std: f64,
    #[arg(long, default_value_t = 1e-1)]
    pub tau_ns: f64,
    /// Witness scales; each pairs with the matching --homeo (and --shift).
    #[arg(long = "lambda")]
    pub lambdas: Vec<f64>,
    #[arg(long = "homeo")]
    pub homeos: Vec<String>,
    #[arg(long = "shift")]
    pub shifts: Vec<String>,
}

#[derive(Debug, Args)]
pub struct TransitionArgs {
    #[command(flatten)]
    pub input: Input,
    #[command(flatten)]
    pub common: Common,
    /// Points at which to evaluate; all grid nodes when absent.
    #[arg(long = "x")]
    pub xs: Vec<f64>,
    /// Extra time scale.
    #[arg(long, default_value_t = 1.0)]
    pub lambda: f64,
}

#[derive(Debug, Args)]
pub struct PlotArgs {
    #[command(flatten)]
    pub input: Input,
    #[command(flatten)]
    pub common: Common,
    /// Orbit start gamma1(x) for flow inputs.
    #[arg(long, default_value_t = 0.125)]
    pub x: f64,
    /// Orbit duration for flow inputs.
    #[arg(long, default_value_t = 10.0)]
    pub t_max: f64,
}

#[derive(Debug, Args)]
pub struct Lemma2Args {
    #[command(flatten)]
    pub input: Input,
    #[command(flatten)]
    pub common: Common,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = "halve")]
    pub homeo: String,
    #[arg(long, default_value = "x/(1+x)")]
    pub shift: String,
    /// Number of random (lambda, c) draws.
    #[arg(long, default_value_t = 1)]
    pub trials: usize,
}

fn parse_grid(s: &str) -> std::result::Result<GridSpec, String> {
    let (k, m) = s
        .split_once(',')
        .ok_or_else(|| format!("expected K,m_max, got `{s}`"))?;
    let k: u32 = k.trim().parse().map_err(|e| format!("bad K: {e}"))?;
    let m: i32 = m.trim().parse().map_err(|e| format!("bad m_max: {e}"))?;
    let g = GridSpec::new(k, m);
    g.validate().map_err(|e| e.to_string())?;
    Ok(g)
}

enum Source {
    Function(EFunction<f64>, FunctionSpec),
    Flow(Flow<f64>, FlowConfig),
}

impl Input {
    fn count(&self) -> usize {
        [
            self.builtin.is_some(),
            self.csv.is_some(),
            self.expr.is_some(),
            self.flow.is_some(),
        ]
        .iter()
        .filter(|&&b| b)
        .count()
    }

    fn spec(&self) -> Option<FunctionSpec> {
        if let Some(name) = &self.builtin {
            return Some(FunctionSpec::Builtin {
                builtin: name.clone(),
                params: self.params.clone(),
            });
        }
        if let Some(path) = &self.csv {
            return Some(FunctionSpec::Csv { csv: path.clone() });
        }
        let class = match self.class {
            ClassArg::E => FunctionClass::E,
            ClassArg::E0 => FunctionClass::E0,
        };
        self.expr.as_ref().map(|e| FunctionSpec::Expr {
            expr: e.clone(),
            class,
        })
    }

    fn resolve(&self, grid: &GridSpec) -> Result<Source> {
        if self.count() != 1 {
            return Err(Error::Config(
                "give exactly one of --builtin, --csv, --expr, --flow".into(),
            ));
        }
        if let Some(flow) = &self.flow {
            let cfg = if flow == "standard" {
                FlowConfig::standard()
            } else {
                let text = fs::read_to_string(flow)?;
                serde_json::from_str(&text)?
            };
            let built = cfg.build(grid)?;
            let cfg = cfg.with_recorded_shift(&built);
            return Ok(Source::Flow(built, cfg));
        }
        let spec = self.spec().expect("one source present");
        Ok(Source::Function(spec.load()?, spec))
    }

    fn function(&self, grid: &GridSpec) -> Result<(EFunction<f64>, FunctionSpec)> {
        match self.resolve(grid)? {
            Source::Function(f, spec) => Ok((f, spec)),
            Source::Flow(..) => Err(Error::Config(
                "this subcommand needs a function input, not --flow".into(),
            )),
        }
    }

    fn flow(&self, grid: &GridSpec) -> Result<(Flow<f64>, FlowConfig)> {
        match self.resolve(grid)? {
            Source::Flow(flow, cfg) => Ok((flow, cfg)),
            Source::Function(..) => Err(Error::Config("this subcommand needs --flow".into())),
        }
    }
}

fn witness_tol(spec: &FunctionSpec) -> f64 {
    match spec {
        FunctionSpec::Csv { .. } => SAMPLED_TOL,
        _ => CLOSED_FORM_TOL,
    }
}

fn prepare(out: &Path) -> Result<()> {
    fs::create_dir_all(out)?;
    Ok(())
}

fn write_svg(path: &Path, chart: Chart) -> Result<()> {
    fs::write(path, chart.to_svg())?;
    Ok(())
}

fn octave_series(label: &str, s_m: &[f64]) -> Series {
    Series::new(
        label,
        "steelblue",
        s_m.iter()
            .enumerate()
            .map(|(m, &s)| (m as f64, s))
            .collect(),
    )
}

#[derive(Serialize)]
struct SigmaOut<'a> {
    input: &'a FunctionSpec,
    grid: GridSpec,
    variant: &'static str,
    s_m: &'a [f64],
    octave_min: &'a [f64],
    tail_window: usize,
    sigma_hat: f64,
    preceding_max: f64,
    trend: &'static str,
    max_cell_oscillation: f64,
}

fn cmd_sigma(a: &SigmaArgs) -> Result<i32> {
    let grid = a.common.grid;
    let (f, spec) = a.input.function(&grid)?;
    let variant = match a.variant {
        VariantArg::Star => Variant::Star,
        VariantArg::Sharp => Variant::Sharp,
    };
    let profile = oscillation::oscillation(&f, &grid, variant)?;
    let sigma = oscillation::sigma_from_profile(&profile, a.window)?;
    prepare(&a.common.out)?;
    let name = if matches!(variant, Variant::Star) {
        "fstar"
    } else {
        "fsharp"
    };
    write_json(
        &a.common.out.join("sigma.json"),
        &SigmaOut {
            input: &spec,
            grid,
            variant: name,
            s_m: &sigma.s_m,
            octave_min: &profile.octave_min,
            tail_window: sigma.tail_window,
            sigma_hat: sigma.sigma_hat,
            preceding_max: sigma.preceding_max,
            trend: sigma.trend.as_str(),
            max_cell_oscillation: profile.cell_oscillation.iter().copied().fold(0.0, f64::max),
        },
    )?;
    write_csv(
        &a.common.out.join("profile.csv"),
        &["x", "f", name],
        profile.rows().map(|(x, v, d)| vec![x, v, d]),
    )?;
    write_svg(
        &a.common.out.join("sigma.svg"),
        Chart::new(
            format!("per-octave sup of {name}: {}", f.description()),
            "octave m",
            "s_m",
        )
        .with(octave_series("s_m", &sigma.s_m)),
    )?;
    println!(
        "sigma_hat = {:.6e} trend = {}",
        sigma.sigma_hat,
        sigma.trend.as_str()
    );
    Ok(EXIT_OK)
}

#[derive(Serialize)]
struct RoundtripOut<'a> {
    input: &'a FunctionSpec,
    grid: GridSpec,
    c0: f64,
    c1: f64,
    lambda: f64,
    shift: f64,
    nodes_checked: usize,
    max_error: f64,
    error_kind: &'static str,
    tol: f64,
    pass: bool,
}

fn cmd_roundtrip(a: &RoundtripArgs) -> Result<i32> {
    let grid = a.common.grid;
    let (f, spec) = a.input.function(&grid)?;
    let flow = reebflow::build_flow(&f, a.c0, a.c1, &grid)?;
    let shift = flow.shift();
    let flow = if a.lambda == 1.0 {
        flow
    } else {
        reebflow::time_scale(&flow, a.lambda)?
    };
    let tv = Transversal::defaults();
    let mut rows = Vec::new();
    let mut max_error = 0.0f64;
    let relative = a.lambda != 1.0;
    for x in grid.nodes::<f64>() {
        let got = reebflow::transition_time(&flow, &tv, x)?;
        let fx = f.eval(x)?;
        if x <= a.c0 {
            let expected = (fx + shift) / a.lambda;
            let err = if relative {
                (got - expected).abs() / expected.abs().max(1.0)
            } else {
                (got - expected).abs()
            };
            max_error = max_error.max(err);
        }
        rows.push(vec![x, fx, got]);
    }
    let tol = if relative {
        SCALED_ROUNDTRIP_TOL
    } else {
        ROUNDTRIP_TOL
    };
    let pass = max_error <= tol;
    prepare(&a.common.out)?;
    let checked = rows.iter().filter(|r| r[0] <= a.c0).count();
    write_json(
        &a.common.out.join("roundtrip.json"),
        &RoundtripOut {
            input: &spec,
            grid,
            c0: a.c0,
            c1: a.c1,
            lambda: a.lambda,
            shift,
            nodes_checked: checked,
            max_error,
            error_kind: if relative { "relative" } else { "absolute" },
            tol,
            pass,
        },
    )?;
    let log_points =
        |col: usize| -> Vec<(f64, f64)> { rows.iter().map(|r| (-r[0].log2(), r[col])).collect() };
    write_svg(
        &a.common.out.join("roundtrip.svg"),
        Chart::new(
            format!("round trip: {}", f.description()),
            "-log2 x",
            "time",
        )
        .with(Series::new("f", "steelblue", log_points(1)))
        .with(Series::new("extracted", "darkorange", log_points(2))),
    )?;
    write_csv(
        &a.common.out.join("roundtrip.csv"),
        &["x", "f", "extracted"],
        rows,
    )?;
    println!(
        "max round-trip error = {max_error:.3e} (tol {tol:.0e}) {}",
        if pass { "PASS" } else { "FAIL" }
    );
    Ok(if pass { EXIT_OK } else { EXIT_TOLERANCE })
}

/// `k = lambda f - f o h`, with `k(0)` taken at the smallest probe. Points
/// where `h(x)` is subnormal also use `k(0)`.
fn derived_shift(
    f: &EFunction<f64>,
    h: &Homeo<f64>,
    lambda: f64,
    probe: &GridSpec,
) -> Result<Shift<f64>> {
    let raw = {
        let (f, h) = (f.clone(), h.clone());
        move |x: f64| -> Option<f64> {
            let hx = h.eval(x);
            if x.is_normal() && hx.is_normal() {
                Some(lambda * f.eval(x).ok()? - f.eval(hx).ok()?)
            } else {
                None
            }
        }
    };
    let x_min = probe_nodes::<f64>(probe)[0];
    let k0 = raw(x_min).ok_or_else(|| Error::Eval {
        x: x_min,
        reason: "lambda f - f o h not evaluable".into(),
    })?;
    Ok(Shift::from_fn(
        format!("{lambda} f - f o {}", h.name()),
        move |x| raw(x).unwrap_or(k0),
    ))
}

#[derive(Serialize)]
struct LinearizeOut<'a> {
    input: &'a FunctionSpec,
    grid: GridSpec,
    homeo: &'a str,
    shift: &'a str,
    result: &'a linearize::LinearizeResult<f64>,
    threshold: linearize::ThresholdReport<f64>,
    telescoping_violations: usize,
    tol: f64,
    pass: bool,
}

fn cmd_linearize(a: &LinearizeArgs) -> Result<i32> {
    let grid = a.common.grid;
    let (f, spec) = a.input.function(&grid)?;
    let h = Homeo::from_id(&a.homeo)?;
    let k = match &a.shift {
        Some(src) => Shift::expression(src)?,
        None => derived_shift(&f, &h, a.lambda, &grid)?,
    };
    let cfg = LinearizeConfig {
        probe: grid,
        tol: a.tol,
        max_iters: a.max_iters,
        witness_tol: witness_tol(&spec),
        ..LinearizeConfig::new(a.lambda)
    };
    let result = linearize::koenigs_limit(&f, &h, &k, &cfg)?;
    let threshold = linearize::threshold_check(&f, &h, &k, a.lambda, &grid)?;
    let telescoping_violations = result
        .probes
        .iter()
        .filter(|&&(x, fx, v)| {
            result.b.is_none_or(|b| x < b)
                && (fx - v).abs()
                    > linearize::telescoping_bound(x, &h, &k, a.lambda, a.max_iters)
                        + 1e-12 * fx.abs().max(1.0)
        })
        .count();
    let pass = result.residual <= a.tol && telescoping_violations == 0;
    prepare(&a.common.out)?;
    write_json(
        &a.common.out.join("linearize.json"),
        &LinearizeOut {
            input: &spec,
            grid,
            homeo: h.name(),
            shift: k.description(),
            result: &result,
            threshold,
            telescoping_violations,
            tol: a.tol,
            pass,
        },
    )?;
    let rows: Vec<Vec<f64>> = result
        .probes
        .iter()
        .map(|&(x, fx, v)| vec![x, fx, v, fx - v])
        .collect();
    let pts =
        |col: usize| -> Vec<(f64, f64)> { rows.iter().map(|r| (r[0].log2(), r[col])).collect() };
    write_svg(
        &a.common.out.join("linearize.svg"),
        Chart::new(
            format!("linearization: {}", f.description()),
            "log2 x",
            "value",
        )
        .with(Series::new("f", "steelblue", pts(1)))
        .with(Series::new("f_inf", "darkorange", pts(2))),
    )?;
    write_csv(
        &a.common.out.join("linearize.csv"),
        &["x", "f", "f_inf", "f_minus_f_inf"],
        rows,
    )?;
    println!(
        "case = {:?} residual = {:.3e} iterations = {} {}",
        result.case,
        result.residual,
        result.iterations,
        if pass { "PASS" } else { "FAIL" }
    );
    Ok(if pass { EXIT_OK } else { EXIT_TOLERANCE })
}

fn cmd_classify(a: &ClassifyArgs) -> Result<i32> {
    let grid = a.common.grid;
    let th = Thresholds {
        tau_std: a.tau_std,
        tau_ns: a.tau_ns,
        ..Thresholds::default()
    };
    if a.homeos.len() != a.lambdas.len()
        || (!a.shifts.is_empty() && a.shifts.len() != a.lambdas.len())
    {
        return Err(Error::Config(
            "each --lambda needs a matching --homeo (and --shift if any are given)".into(),
        ));
    }
    let mut report = match a.input.resolve(&grid)? {
        Source::Flow(flow, _) => {
            classify::flow_classify(&flow, &Transversal::defaults(), &grid, &th)?
        }
        Source::Function(f, spec) => {
            let mut report = classify::classify(&f, &grid, &th)?;
            for (i, (&lambda, id)) in a.lambdas.iter().zip(&a.homeos).enumerate() {
                let k = match a.shifts.get(i) {
                    Some(src) => Shift::expression(src)?,
                    None => Shift::zero(),
                };
                let w = EquivalenceWitness::new(lambda, Homeo::from_id(id)?, k);
                let r = check_witness(&f, Relation::SelfSimilar, &w, &grid, witness_tol(&spec))?;
                report.witnesses.push(WitnessSummary {
                    lambda,
                    homeo: r.homeo,
                    shift: r.shift,
                    residual: r.max_rel,
                    pass: r.pass,
                });
            }
            report
        }
    };
    report.shifts.entry("constant".into()).or_insert(0.0);
    prepare(&a.common.out)?;
    write_json(&a.common.out.join("classify.json"), &report)?;
    write_svg(
        &a.common.out.join("classify.svg"),
        Chart::new(
            format!("{}: {}", report.verdict.as_str(), report.description),
            "octave m",
            "s_m",
        )
        .with(octave_series("s_m", &report.s_m)),
    )?;
    println!(
        "verdict = {} sigma_hat = {:.6e}",
        report.verdict.as_str(),
        report.sigma_hat
    );
    Ok(EXIT_OK)
}

#[derive(Serialize)]
struct TransitionOut<'a> {
    flow: &'a FlowConfig,
    lambda: f64,
    points: Vec<(f64, f64)>,
}

fn cmd_transition(a: &TransitionArgs) -> Result<i32> {
    let grid = a.common.grid;
    let (flow, cfg) = a.input.flow(&grid)?;
    let flow = if a.lambda == 1.0 {
        flow
    } else {
        reebflow::time_scale(&flow, a.lambda)?
    };
    let tv = Transversal::defaults();
    let points: Vec<(f64, f64)> = if a.xs.is_empty() {
        reebflow::extract_transitions(&flow, &tv, &grid)?
    } else {
        a.xs.iter()
            .map(|&x| Ok((x, reebflow::transition_time(&flow, &tv, x)?)))
            .collect::<Result<_>>()?
    };
    prepare(&a.common.out)?;
    write_json(
        &a.common.out.join("transition.json"),
        &TransitionOut {
            flow: &cfg,
            lambda: flow.lambda,
            points: points.clone(),
        },
    )?;
    write_csv(
        &a.common.out.join("transition.csv"),
        &["x", "t"],
        points.iter().map(|&(x, t)| vec![x, t]),
    )?;
    if !a.xs.is_empty() {
        for (x, t) in &points {
            println!("x = {x:.10e} t = {t:.16e}");
        }
    } else {
        println!("{} transition times written", points.len());
    }
    Ok(EXIT_OK)
}

fn cmd_plot(a: &PlotArgs) -> Result<i32> {
    let grid = a.common.grid;
    prepare(&a.common.out)?;
    match a.input.resolve(&grid)? {
        Source::Function(f, _) => {
            let p = oscillation::star(&f, &grid)?;
            let rows: Vec<(f64, f64, f64)> = p.rows().collect();
            write_svg(
                &a.common.out.join("plot.svg"),
                Chart::new(f.description().to_string(), "-log2 x", "value")
                    .with(Series::new(
                        "f",
                        "steelblue",
                        rows.iter().map(|r| (-r.0.log2(), r.1)).collect(),
                    ))
                    .with(Series::new(
                        "f*",
                        "darkorange",
                        rows.iter().map(|r| (-r.0.log2(), r.2)).collect(),
                    )),
            )?;
            write_csv(
                &a.common.out.join("plot.csv"),
                &["x", "f", "fstar"],
                rows.iter().map(|r| vec![r.0, r.1, r.2]),
            )?;
        }
        Source::Flow(flow, _) => {
            let p = Transversal::defaults().gamma1(a.x)?;
            let orbit = flow.orbit(&p, a.t_max, 400)?;
            write_svg(
                &a.common.out.join("plot.svg"),
                Chart::new(format!("orbit through ({}, 1)", a.x), "ln xi", "ln eta").with(
                    Series::new(
                        "orbit",
                        "steelblue",
                        orbit.iter().map(|o| (o.1.ln(), o.2.ln())).collect(),
                    ),
                ),
            )?;
            write_csv(
                &a.common.out.join("orbit.csv"),
                &["t", "xi", "eta"],
                orbit.iter().map(|o| vec![o.0, o.1, o.2]),
            )?;
        }
    }
    println!(
        "plot written to {}",
        a.common.out.join("plot.svg").display()
    );
    Ok(EXIT_OK)
}

#[derive(Serialize)]
struct Lemma2Out<'a> {
    input: &'a FunctionSpec,
    grid: GridSpec,
    seed: u64,
    reports: Vec<oscillation::Lemma2Report<f64>>,
    all_pass: bool,
}

fn cmd_lemma2(a: &Lemma2Args) -> Result<i32> {
    let grid = a.common.grid;
    let (f, spec) = a.input.function(&grid)?;
    let h = Homeo::from_id(&a.homeo)?;
    let k = Shift::expression(&a.shift)?;
    let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
    let mut reports = Vec::with_capacity(a.trials);
    for _ in 0..a.trials.max(1) {
        let lambda = 10.0 - rng.gen_range(0.0..10.0);
        let c = rng.gen_range(-10.0..=10.0);
        reports.push(oscillation::lemma2_suite(&f, lambda, c, &h, &k, &grid)?);
    }
    let all_pass = reports.iter().all(|r| r.all_pass());
    prepare(&a.common.out)?;
    write_json(
        &a.common.out.join("lemma2.json"),
        &Lemma2Out {
            input: &spec,
            grid,
            seed: a.seed,
            reports: reports.clone(),
            all_pass,
        },
    )?;
    for r in &reports {
        println!(
            "lambda = {:.6} c = {:.6}: (1) {} (2) {} (3) {} (4) {} (5) {}",
            r.lambda,
            r.c,
            pf(r.scaling.pass),
            pf(r.constant_shift.pass),
            pf(r.pushforward.pass),
            pf(r.perturbation.pass),
            pf(r.zero_sequence.pass)
        );
    }
    Ok(if all_pass { EXIT_OK } else { EXIT_TOLERANCE })
}

fn pf(b: bool) -> &'static str {
    if b {
        "PASS"
    } else {
        "FAIL"
    }
}

pub fn execute(cli: &Cli) -> Result<i32> {
    match &cli.command {
        Command::Sigma(a) => cmd_sigma(a),
        Command::Roundtrip(a) => cmd_roundtrip(a),
        Command::Linearize(a) => cmd_linearize(a),
        Command::Classify(a) => cmd_classify(a),
        Command::Transition(a) => cmd_transition(a),
        Command::Plot(a) => cmd_plot(a),
        Command::Lemma2(a) => cmd_lemma2(a),
    }
}

/// Parses `args` and runs the subcommand, returning the exit code.
pub fn run<I, S>(args: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
        }
    };
    match execute(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_INPUT
        }
    }
}

//! Standardness verdicts from the oscillation invariant, witness scans and
//! classification of flows through their extracted transition times.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::efunc::{EFunction, FunctionKind, GridProfile, GridSpec};
use crate::error::{Error, Result};
use crate::oscillation::{
    check_witness, sigma_from_profile, star, star_of_profile, EquivalenceWitness, Relation,
    SigmaEstimate, Trend, DEFAULT_TAIL_WINDOW,
};
use crate::real::Real;
use crate::reebflow::{extract_transitions, Flow, Transversal};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Standard,
    Nonstandard,
    Inconclusive,
}

impl Verdict {
    pub fn as_str(&self) -> &'static str {
        match self {
            Verdict::Standard => "standard",
            Verdict::Nonstandard => "nonstandard",
            Verdict::Inconclusive => "inconclusive",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Builtin,
    Expression,
    Csv,
    Derived,
    ExtractedFromFlow,
}

impl Provenance {
    pub fn of<T: Real>(f: &EFunction<T>) -> Self {
        match f.kind() {
            FunctionKind::Builtin { .. } => Provenance::Builtin,
            FunctionKind::Expression { .. } => Provenance::Expression,
            FunctionKind::Sampled { .. } => Provenance::Csv,
            FunctionKind::Derived => Provenance::Derived,
        }
    }
}

/// Verdict thresholds: standard below `tau_std`, nonstandard from `tau_ns`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct Thresholds<T> {
    pub tau_std: T,
    pub tau_ns: T,
    pub window: usize,
}

impl<T: Real> Default for Thresholds<T> {
    fn default() -> Self {
        Self {
            tau_std: T::lit(1e-3),
            tau_ns: T::lit(1e-1),
            window: DEFAULT_TAIL_WINDOW,
        }
    }
}

impl<T: Real> Thresholds<T> {
    pub fn validate(&self) -> Result<()> {
        if !(self.tau_std > T::zero() && self.tau_std < self.tau_ns) {
            return Err(Error::InvalidParameter(format!(
                "need 0 < tau_std < tau_ns, got {} and {}",
                self.tau_std, self.tau_ns
            )));
        }
        Ok(())
    }

    pub fn verdict(&self, sigma: &SigmaEstimate<T>) -> Verdict {
        if sigma.sigma_hat < self.tau_std && sigma.trend == Trend::Vanishing {
            Verdict::Standard
        } else if sigma.sigma_hat >= self.tau_ns {
            Verdict::Nonstandard
        } else {
            Verdict::Inconclusive
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct WitnessSummary<T> {
    pub lambda: T,
    pub homeo: String,
    pub shift: String,
    pub residual: T,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct ClassificationReport<T> {
    pub verdict: Verdict,
    pub sigma_hat: T,
    pub trend: Trend,
    pub s_m: Vec<T>,
    pub preceding_max: T,
    pub tail_window: usize,
    pub tau_std: T,
    pub tau_ns: T,
    pub witnesses: Vec<WitnessSummary<T>>,
    pub shifts: BTreeMap<String, T>,
    pub provenance: Provenance,
    pub description: String,
}

impl<T: Real> ClassificationReport<T> {
    fn new(
        sigma: SigmaEstimate<T>,
        th: &Thresholds<T>,
        provenance: Provenance,
        description: String,
    ) -> Self {
        Self {
            verdict: th.verdict(&sigma),
            sigma_hat: sigma.sigma_hat,
            trend: sigma.trend,
            s_m: sigma.s_m,
            preceding_max: sigma.preceding_max,
            tail_window: sigma.tail_window,
            tau_std: th.tau_std,
            tau_ns: th.tau_ns,
            witnesses: Vec::new(),
            shifts: BTreeMap::new(),
            provenance,
            description,
        }
    }
}

/// Verdict from the tail of the per-octave sups of `f*`.
pub fn classify<T: Real>(
    f: &EFunction<T>,
    grid: &GridSpec,
    th: &Thresholds<T>,
) -> Result<ClassificationReport<T>> {
    th.validate()?;
    let sigma = sigma_from_profile(&star(f, grid)?, th.window)?;
    Ok(ClassificationReport::new(
        sigma,
        th,
        Provenance::of(f),
        f.description().to_string(),
    ))
}

/// How a witness scan relates to the verdict.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ScanAssessment {
    /// Every supplied witness holds and the function is standard.
    AllPassStandard,
    /// Every supplied witness holds yet the function is nonstandard: finitely
    /// many scales do not force standardness.
    SelfSimilarNonstandard,
    /// Some witness fails on a standard function; only that witness is refuted.
    WitnessFailsStandard,
    /// Some witness fails on a nonstandard function.
    WitnessFailsNonstandard,
    Inconclusive,
}

#[derive(Debug, Clone, Serialize)]
pub struct ScanReport<T> {
    pub witnesses: Vec<WitnessSummary<T>>,
    pub all_pass: bool,
    pub verdict: Verdict,
    pub sigma_hat: T,
    pub assessment: ScanAssessment,
}

/// Checks `lambda f = f o h + k` for each supplied witness and relates the
/// outcome to the verdict of [`classify`].
pub fn self_similarity_scan<T: Real>(
    f: &EFunction<T>,
    witnesses: &[EquivalenceWitness<T>],
    grid: &GridSpec,
    tol: T,
) -> Result<ScanReport<T>> {
    let mut out = Vec::with_capacity(witnesses.len());
    for w in witnesses {
        let r = check_witness(f, Relation::SelfSimilar, w, grid, tol)?;
        out.push(WitnessSummary {
            lambda: r.lambda,
            homeo: r.homeo,
            shift: r.shift,
            residual: r.max_rel,
            pass: r.pass,
        });
    }
    let report = classify(f, grid, &Thresholds::default())?;
    let all_pass = out.iter().all(|w| w.pass);
    let assessment = match (all_pass, report.verdict) {
        (_, Verdict::Inconclusive) => ScanAssessment::Inconclusive,
        (true, Verdict::Standard) => ScanAssessment::AllPassStandard,
        (true, Verdict::Nonstandard) => ScanAssessment::SelfSimilarNonstandard,
        (false, Verdict::Standard) => ScanAssessment::WitnessFailsStandard,
        (false, Verdict::Nonstandard) => ScanAssessment::WitnessFailsNonstandard,
    };
    Ok(ScanReport {
        witnesses: out,
        all_pass,
        verdict: report.verdict,
        sigma_hat: report.sigma_hat,
        assessment,
    })
}

/// Transition times of `flow` on the nodes of `grid` (restarted at `x = 1`).
pub fn extracted_profile<T: Real>(
    flow: &Flow<T>,
    tv: &Transversal<T>,
    grid: &GridSpec,
) -> Result<GridProfile<T>> {
    let grid = grid.from_one();
    let values = extract_transitions(flow, tv, &grid)?
        .into_iter()
        .map(|(_, t)| t)
        .collect();
    GridProfile::from_values(grid, values)
}

/// Classifies a flow through its transition-time function.
pub fn flow_classify<T: Real>(
    flow: &Flow<T>,
    tv: &Transversal<T>,
    grid: &GridSpec,
    th: &Thresholds<T>,
) -> Result<ClassificationReport<T>> {
    th.validate()?;
    let profile = extracted_profile(flow, tv, grid)?;
    let sigma = sigma_from_profile(&star_of_profile(&profile)?, th.window)?;
    let description = match &flow.realization {
        Some(r) => format!(
            "flow realizing {} (time scale {})",
            r.f.description(),
            flow.lambda
        ),
        None => format!("standard flow (time scale {})", flow.lambda),
    };
    let mut report =
        ClassificationReport::new(sigma, th, Provenance::ExtractedFromFlow, description);
    if let Some(r) = &flow.realization {
        report.shifts.insert("positivity".into(), r.shift);
    }
    if flow.lambda != T::one() {
        report.shifts.insert("time_scale".into(), flow.lambda);
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::efunc::Shift;
    use crate::homeo::Homeo;
    use crate::reebflow::{build_flow, time_scale};

    fn grid() -> GridSpec {
        GridSpec::new(64, 40)
    }

    fn builtin(name: &str, params: &[f64]) -> EFunction<f64> {
        EFunction::builtin(name, params).unwrap()
    }

    #[test]
    fn gallery_verdicts() {
        let th = Thresholds::default();
        assert_eq!(
            classify(&builtin("std_log", &[]), &grid(), &th)
                .unwrap()
                .verdict,
            Verdict::Standard
        );
        assert_eq!(
            classify(&builtin("koenigs_demo", &[]), &grid(), &th)
                .unwrap()
                .verdict,
            Verdict::Standard
        );
        assert_eq!(
            classify(&builtin("paper_example", &[]), &grid(), &th)
                .unwrap()
                .verdict,
            Verdict::Nonstandard
        );
        let r = classify(&builtin("bounded_osc", &[2.0]), &grid(), &th).unwrap();
        assert_eq!(r.verdict, Verdict::Nonstandard);
        assert!((r.sigma_hat - 1.3697).abs() < 1e-2);
        assert_eq!(r.provenance, Provenance::Builtin);
    }

    #[test]
    fn threshold_validation() {
        let bad = Thresholds {
            tau_std: 0.5,
            tau_ns: 0.1,
            window: 8,
        };
        assert!(classify(&builtin("std_log", &[]), &grid(), &bad).is_err());
        let short = Thresholds {
            window: 30,
            ..Thresholds::default()
        };
        assert!(matches!(
            classify(&builtin("std_log", &[]), &grid(), &short),
            Err(Error::GridTooShort { .. })
        ));
    }

    #[test]
    fn inconclusive_band() {
        // f* near 0.034 sits between the thresholds
        let f = EFunction::<f64>::expression(
            "-ln(x) + 0.05*sin(-40*ln(x))",
            crate::efunc::FunctionClass::E,
        )
        .unwrap();
        let r = classify(&f, &grid(), &Thresholds::default()).unwrap();
        assert_eq!(r.verdict, Verdict::Inconclusive, "{}", r.sigma_hat);
    }

    #[test]
    fn std_log_power_witnesses() {
        let ws: Vec<_> = [2.0, 3.0, 2f64.powf(0.25)]
            .into_iter()
            .map(|l| EquivalenceWitness::new(l, Homeo::pow(l), Shift::zero()))
            .collect();
        let r = self_similarity_scan(&builtin("std_log", &[]), &ws, &grid(), 1e-9).unwrap();
        assert!(r.all_pass);
        assert_eq!(r.assessment, ScanAssessment::AllPassStandard);
    }

    #[test]
    fn single_scale_is_not_enough() {
        let f = builtin("paper_example", &[]);
        let one = [EquivalenceWitness::new(2.0, Homeo::halve(), Shift::zero())];
        let r = self_similarity_scan(&f, &one, &grid(), 1e-12).unwrap();
        assert_eq!(r.assessment, ScanAssessment::SelfSimilarNonstandard);

        let root2 = 2f64.sqrt();
        let w = [EquivalenceWitness::new(
            root2,
            Homeo::root_scale(2),
            Shift::zero(),
        )];
        let r = self_similarity_scan(&f, &w, &grid(), 1e-9).unwrap();
        assert!(!r.all_pass);
        assert!(r.witnesses[0].residual > 0.1);
    }

    #[test]
    fn extracted_flows() {
        let tv = Transversal::defaults();
        let th = Thresholds::default();
        let std = Flow::<f64>::standard();
        assert_eq!(
            flow_classify(&std, &tv, &grid(), &th).unwrap().verdict,
            Verdict::Standard
        );
        let fast = time_scale(&std, 7.0).unwrap();
        assert_eq!(
            flow_classify(&fast, &tv, &grid(), &th).unwrap().verdict,
            Verdict::Standard
        );
        let pe = build_flow(&builtin("paper_example", &[]), 0.25, 0.5, &grid()).unwrap();
        let r = flow_classify(&pe, &tv, &grid(), &th).unwrap();
        assert_eq!(r.verdict, Verdict::Nonstandard);
        assert_eq!(r.provenance, Provenance::ExtractedFromFlow);
        assert_eq!(r.shifts.get("positivity"), Some(&0.0));
    }

    #[test]
    fn transport_keeps_verdict() {
        let th = Thresholds::default();
        for (name, params) in [
            ("std_log", vec![]),
            ("paper_example", vec![]),
            ("bounded_osc", vec![2.0]),
        ] {
            let f = builtin(name, &params);
            let g = f.transport(&Homeo::halve(), &Shift::saturating());
            let a = classify(&f, &grid(), &th).unwrap().verdict;
            let b = classify(&g, &grid(), &th).unwrap().verdict;
            assert_eq!(a, b, "{name}");
        }
    }
}

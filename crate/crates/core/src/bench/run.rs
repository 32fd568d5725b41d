//! Experiment configuration and the run loop shared by all methods.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::{BaselineKind, BaselineMethod, BaselineState};
use crate::error::{Error, Result};
use crate::ffb::{fixed_point_residual, fixed_point_residual_with, tangent_residual, FfbParams, FfbState};
use crate::linalg::Vector;
use crate::operators::InclusionProblem;
use crate::primal_dual::{
    lagrangian_gap, pd_default_steps, FlagParams, FlagState, PdParams, PdProblem, PdState, SaddleInclusion,
};

use super::problem::ProblemSource;
use super::record::{emit, write_atomic, Format, IterationRecord};
use super::reference::{reference_solution, Reference, ReferenceConfig};

pub const DEFAULT_PER_DECADE: usize = 50;

/// Solver identifiers accepted on the command line and in config files.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MethodName {
    /// Primal-dual method, four-line form.
    Fpd,
    /// Primal-dual method, `(x, λ, w)` form.
    FpdAlt,
    Flag,
    /// Fast forward-backward on the whitened saddle inclusion.
    Ffb,
    Fbs,
    InertialPpm,
    MoudafiOliny,
    LorenzPock,
    RelaxedInertial,
    Crifba,
    FastKm,
    Appm,
}

const METHOD_NAMES: [(MethodName, &str); 12] = [
    (MethodName::Fpd, "fpd"),
    (MethodName::FpdAlt, "fpd-alt"),
    (MethodName::Flag, "flag"),
    (MethodName::Ffb, "ffb"),
    (MethodName::Fbs, "fbs"),
    (MethodName::InertialPpm, "inertial-ppm"),
    (MethodName::MoudafiOliny, "moudafi-oliny"),
    (MethodName::LorenzPock, "lorenz-pock"),
    (MethodName::RelaxedInertial, "relaxed-inertial"),
    (MethodName::Crifba, "crifba"),
    (MethodName::FastKm, "fast-km"),
    (MethodName::Appm, "appm"),
];

impl MethodName {
    pub fn as_str(&self) -> &'static str {
        METHOD_NAMES.iter().find(|(m, _)| m == self).map(|(_, s)| *s).unwrap_or("?")
    }

    pub fn all() -> impl Iterator<Item = MethodName> {
        METHOD_NAMES.iter().map(|(m, _)| *m)
    }

    fn baseline_kind(&self) -> Option<BaselineKind> {
        Some(match self {
            MethodName::Fbs => BaselineKind::Fbs,
            MethodName::InertialPpm => BaselineKind::InertialPpm,
            MethodName::MoudafiOliny => BaselineKind::MoudafiOliny,
            MethodName::LorenzPock => BaselineKind::LorenzPock,
            MethodName::RelaxedInertial => BaselineKind::RelaxedInertial,
            MethodName::Crifba => BaselineKind::Crifba,
            MethodName::FastKm => BaselineKind::FastKm,
            MethodName::Appm => BaselineKind::Appm,
            _ => return None,
        })
    }
}

impl fmt::Display for MethodName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for MethodName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        METHOD_NAMES.iter().find(|(_, n)| *n == s).map(|(m, _)| *m).ok_or_else(|| {
            let names: Vec<&str> = METHOD_NAMES.iter().map(|(_, n)| *n).collect();
            Error::Config(format!("unknown method {s:?}; expected one of {}", names.join(", ")))
        })
    }
}

/// A method and its parameters. Unset parameters take the documented defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodConfig {
    pub method: MethodName,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    /// Momentum parameter; default 5.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    /// Step of the inclusion solvers; only 1 is admissible on the saddle inclusion.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
    /// FLAG penalty parameter.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r: Option<f64>,
    /// FLAG dual relaxation.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta: Option<f64>,
    /// Full parameter record for baselines, overriding the defaults.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub baseline: Option<BaselineMethod>,
}

pub const DEFAULT_ALPHA: f64 = 5.0;

impl MethodConfig {
    pub fn new(method: MethodName) -> Self {
        Self { method, label: None, alpha: None, gamma: None, tau: None, sigma: None, r: None, theta: None, baseline: None }
    }

    pub fn with_alpha(mut self, alpha: f64) -> Self {
        self.alpha = Some(alpha);
        self
    }

    /// Output name, e.g. `fpd-a5` or `flag`.
    pub fn label(&self) -> String {
        if let Some(l) = &self.label {
            return l.clone();
        }
        match self.method {
            MethodName::Fpd | MethodName::FpdAlt | MethodName::Ffb => {
                format!("{}-a{}", self.method, self.alpha.unwrap_or(DEFAULT_ALPHA))
            }
            m => m.as_str().to_string(),
        }
    }

    fn alpha(&self) -> f64 {
        self.alpha.unwrap_or(DEFAULT_ALPHA)
    }

    /// Primal-dual step sizes: explicit `tau`/`sigma`, falling back to the defaults.
    pub fn pd_params(&self, problem: &PdProblem) -> Result<PdParams> {
        let alpha = self.alpha();
        let mut params = pd_default_steps(alpha, problem)?;
        if let Some(t) = self.tau {
            params.tau = t;
        }
        if let Some(s) = self.sigma {
            params.sigma = s;
        }
        params.validate(problem)?;
        Ok(params)
    }

    pub fn flag_params(&self, problem: &PdProblem) -> Result<FlagParams> {
        let mut p = FlagParams::defaults(problem)?;
        if let Some(t) = self.tau {
            p.tau = t;
        }
        if let Some(r) = self.r {
            p.r = r;
        }
        if let Some(th) = self.theta {
            p.theta = th;
        }
        p.validate()?;
        Ok(p)
    }
}

/// Iterations at which records are taken.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Checkpoints {
    LogSpaced { per_decade: usize },
    Every { stride: usize },
    List { ks: Vec<usize> },
}

impl Default for Checkpoints {
    fn default() -> Self {
        Checkpoints::LogSpaced { per_decade: DEFAULT_PER_DECADE }
    }
}

impl Checkpoints {
    /// Sorted, deduplicated checkpoints in `1..=budget`; the budget is always included.
    pub fn resolve(&self, budget: usize) -> Vec<usize> {
        let mut ks = match self {
            Checkpoints::LogSpaced { per_decade } => log_checkpoints(budget, *per_decade),
            Checkpoints::Every { stride } => (1..=budget).filter(|k| k % stride.max(&1) == 0 || *k == 1).collect(),
            Checkpoints::List { ks } => ks.iter().copied().filter(|&k| k >= 1 && k <= budget).collect(),
        };
        ks.push(budget);
        ks.sort_unstable();
        ks.dedup();
        ks
    }
}

/// `round(10^(j/per_decade))` for `j = 0, 1, ...` up to `budget`, deduplicated, plus `budget`.
pub fn log_checkpoints(budget: usize, per_decade: usize) -> Vec<usize> {
    let per_decade = per_decade.max(1) as f64;
    let mut ks = Vec::new();
    for j in 0.. {
        let k = 10f64.powf(j as f64 / per_decade).round() as usize;
        if k > budget {
            break;
        }
        if ks.last() != Some(&k) {
            ks.push(k);
        }
    }
    if ks.last() != Some(&budget) && budget >= 1 {
        ks.push(budget);
    }
    ks
}

/// A single run: one method on one problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub problem: ProblemSource,
    pub method: MethodConfig,
    pub iters: usize,
    #[serde(default)]
    pub checkpoints: Checkpoints,
    /// Record wall-clock time in the `ns` column. Off by default so that outputs are
    /// byte-for-byte reproducible.
    #[serde(default)]
    pub timing: bool,
}

/// A grid of methods on one problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareConfig {
    pub problem: ProblemSource,
    pub methods: Vec<MethodConfig>,
    pub iters: usize,
    #[serde(default)]
    pub checkpoints: Checkpoints,
    #[serde(default)]
    pub timing: bool,
    /// Attach a reference solution so that gaps and objective errors are available.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference: Option<ReferenceConfig>,
    #[serde(default = "default_out")]
    pub out: PathBuf,
    #[serde(default)]
    pub format: Format,
}

fn default_out() -> PathBuf {
    PathBuf::from("out")
}

impl CompareConfig {
    /// The default grid: primal-dual with `α = 5` and `α = 10`, and FLAG.
    pub fn default_methods() -> Vec<MethodConfig> {
        vec![
            MethodConfig::new(MethodName::Fpd).with_alpha(5.0),
            MethodConfig::new(MethodName::Fpd).with_alpha(10.0),
            MethodConfig::new(MethodName::Flag),
        ]
    }
}

/// Records of a run and the last finite iterate.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub label: String,
    pub records: Vec<IterationRecord>,
    /// Iteration at which a non-finite value appeared; records stop before it.
    pub diverged_at: Option<usize>,
    pub x: Vector,
    pub lam: Vector,
}

enum Runner {
    Pd { state: PdState, params: PdParams, alternative: bool },
    Flag { state: FlagState, params: FlagParams },
    Ffb { saddle: SaddleInclusion, inc: InclusionProblem, state: FfbState, params: FfbParams },
    Baseline { saddle: SaddleInclusion, inc: InclusionProblem, state: BaselineState, method: BaselineMethod },
}

impl Runner {
    fn new(problem: &PdProblem, cfg: &MethodConfig, budget: usize) -> Result<Self> {
        match cfg.method {
            MethodName::Fpd | MethodName::FpdAlt => {
                let params = cfg.pd_params(problem)?;
                let state = PdState::from_origin(problem, &params)?;
                Ok(Runner::Pd { state, params, alternative: cfg.method == MethodName::FpdAlt })
            }
            MethodName::Flag => {
                let params = cfg.flag_params(problem)?;
                Ok(Runner::Flag { state: FlagState::from_origin(problem, &params)?, params })
            }
            MethodName::Ffb => {
                let saddle = SaddleInclusion::new(problem, &cfg.pd_params(problem)?)?;
                let inc = saddle.inclusion();
                let params = FfbParams::new(cfg.alpha(), cfg.gamma.unwrap_or(1.0))?;
                let state = FfbState::from_origin(&inc, &params)?;
                Ok(Runner::Ffb { saddle, inc, state, params })
            }
            other => {
                let kind = other.baseline_kind().expect("remaining names are baselines");
                let saddle = SaddleInclusion::new(problem, &cfg.pd_params(problem)?)?;
                let inc = saddle.inclusion();
                let method = match &cfg.baseline {
                    Some(m) if m.kind() == kind => m.clone(),
                    Some(m) => {
                        return Err(Error::Config(format!("baseline record {:?} does not match method {other}", m.kind())))
                    }
                    None => BaselineMethod::with_defaults(kind, cfg.gamma.unwrap_or(1.0), inc.beta()),
                };
                method.validate(&inc, budget)?;
                let state = method.init(&inc, Vector::zeros(inc.dim()))?;
                Ok(Runner::Baseline { saddle, inc, state, method })
            }
        }
    }

    fn k(&self) -> usize {
        match self {
            Runner::Pd { state, .. } => state.k,
            Runner::Flag { state, .. } => state.k,
            Runner::Ffb { state, .. } => state.k,
            Runner::Baseline { state, .. } => state.k,
        }
    }

    fn step(&mut self, problem: &PdProblem) -> Result<()> {
        match self {
            Runner::Pd { state, params, alternative: false } => state.step(problem, params),
            Runner::Pd { state, params, alternative: true } => state.step_alternative(problem, params),
            Runner::Flag { state, params } => state.step(problem, params),
            Runner::Ffb { inc, state, params, .. } => state.step_y(inc, params),
            Runner::Baseline { inc, state, method, .. } => method.step(state, inc),
        }
    }

    fn iterate(&self) -> (Vector, Vector) {
        match self {
            Runner::Pd { state, .. } => (state.x.clone(), state.lam.clone()),
            Runner::Flag { state, .. } => (state.x.clone(), state.lam.clone()),
            Runner::Ffb { saddle, state, .. } => saddle.from_whitened(&state.z),
            Runner::Baseline { saddle, state, .. } => saddle.from_whitened(&state.z),
        }
    }

    fn record(&self, problem: &PdProblem, reference: Option<&Reference>, ns: u64) -> IterationRecord {
        let (x, lam) = self.iterate();
        let (velocity, rtan, rfix, vp, vd) = match self {
            Runner::Pd { state, params, .. } => (
                state.velocity(),
                Some(state.tangent_residual(problem)),
                Some(problem.saddle_residual(params, &state.x, &state.lam)),
                state.primal_velocity(),
                state.dual_velocity(),
            ),
            Runner::Flag { state, .. } => (state.velocity(), None, None, state.primal_velocity(), state.dual_velocity()),
            Runner::Ffb { saddle, inc, state, params } => {
                let (xp, lp) = saddle.from_whitened(&state.z_prev);
                (
                    state.velocity(),
                    Some(tangent_residual(state)),
                    Some(fixed_point_residual_with(&state.z, &state.c, inc, params.gamma)),
                    (&x - xp).norm(),
                    (&lam - lp).norm(),
                )
            }
            Runner::Baseline { saddle, inc, state, method } => {
                let (xp, lp) = saddle.from_whitened(&state.z_prev);
                (
                    state.velocity(),
                    None,
                    Some(fixed_point_residual(&state.z, inc, method.gamma(state.k))),
                    (&x - xp).norm(),
                    (&lam - lp).norm(),
                )
            }
        };
        IterationRecord {
            k: self.k(),
            velocity,
            rtan,
            rfix,
            objective: problem.objective(&x),
            feasibility: problem.feasibility(&x),
            gap: reference.map(|r| lagrangian_gap(problem, &x, &lam, &r.x_star, &r.lam_star)),
            ns,
            velocity_primal: Some(vp),
            velocity_dual: Some(vd),
        }
    }
}

/// Runs `method` on `problem` for `iters` iterations, recording at `checkpoints`.
///
/// A divergence stops the run and is reported through [`RunOutput::diverged_at`]
/// together with the records gathered so far.
pub fn run_method(
    problem: &PdProblem,
    method: &MethodConfig,
    iters: usize,
    checkpoints: &Checkpoints,
    timing: bool,
    reference: Option<&Reference>,
) -> Result<RunOutput> {
    if iters == 0 {
        return Err(Error::Config("iteration budget must be at least 1".into()));
    }
    let start = Instant::now();
    let mut runner = Runner::new(problem, method, iters)?;
    let ks = checkpoints.resolve(iters);
    let mut next = ks.iter().peekable();
    let mut records = Vec::with_capacity(ks.len());
    let mut diverged_at = None;
    loop {
        let k = runner.k();
        if next.peek() == Some(&&k) {
            let ns = if timing { start.elapsed().as_nanos() as u64 } else { 0 };
            records.push(runner.record(problem, reference, ns));
            next.next();
        }
        if k >= iters {
            break;
        }
        match runner.step(problem) {
            Ok(()) => {}
            Err(Error::Diverged { k }) => {
                diverged_at = Some(k);
                break;
            }
            Err(e) => return Err(e),
        }
    }
    let (x, lam) = runner.iterate();
    Ok(RunOutput { label: method.label(), records, diverged_at, x, lam })
}

/// Loads the configured problem and runs the configured method.
pub fn run_experiment(config: &ExperimentConfig, reference: Option<&Reference>) -> Result<RunOutput> {
    let problem = config.problem.load()?;
    run_method(&problem.problem, &config.method, config.iters, &config.checkpoints, config.timing, reference)
}

/// Per-method line of a comparison summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub label: String,
    pub method: MethodConfig,
    pub iterations: usize,
    pub diverged_at: Option<usize>,
    pub final_record: Option<IterationRecord>,
    pub files: Vec<PathBuf>,
}

/// Result of [`compare`]: the problem hash, the reference used, and one run per method.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CompareSummary {
    pub problem_hash: String,
    pub iters: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reference: Option<ReferenceSummary>,
    pub runs: Vec<RunSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceSummary {
    pub budget: usize,
    pub alpha: f64,
    pub f_star: f64,
    pub feasibility: f64,
    pub converged: bool,
}

/// Runs every configured method on the same problem in parallel and writes one
/// record file per method plus `summary.json` into `config.out`.
///
/// Labels must be unique. Output bytes depend only on the configuration unless
/// timing is enabled.
pub fn compare(config: &CompareConfig) -> Result<(CompareSummary, Vec<RunOutput>)> {
    if config.methods.is_empty() {
        return Err(Error::Config("compare needs at least one method".into()));
    }
    let mut labels: Vec<String> = config.methods.iter().map(MethodConfig::label).collect();
    labels.sort();
    if let Some(w) = labels.windows(2).find(|w| w[0] == w[1]) {
        return Err(Error::Config(format!("duplicate run label {:?}", w[0])));
    }
    let problem = config.problem.load()?;
    let reference = match &config.reference {
        Some(rc) => Some(reference_solution(&problem.problem, &problem.hash, rc)?.0),
        None => None,
    };
    let outputs: Vec<RunOutput> = config
        .methods
        .par_iter()
        .map(|m| run_method(&problem.problem, m, config.iters, &config.checkpoints, config.timing, reference.as_ref()))
        .collect::<Result<_>>()?;
    let mut runs = Vec::with_capacity(outputs.len());
    for (m, out) in config.methods.iter().zip(&outputs) {
        let files = emit(&out.records, config.format, &config.out, &out.label)?;
        runs.push(RunSummary {
            label: out.label.clone(),
            method: m.clone(),
            iterations: out.records.last().map_or(0, |r| r.k),
            diverged_at: out.diverged_at,
            final_record: out.records.last().cloned(),
            files,
        });
    }
    let summary = CompareSummary {
        problem_hash: problem.hash.clone(),
        iters: config.iters,
        reference: reference.as_ref().map(|r| ReferenceSummary {
            budget: r.budget,
            alpha: r.alpha,
            f_star: r.f_star,
            feasibility: r.feasibility,
            converged: r.converged,
        }),
        runs,
    };
    let mut bytes = serde_json::to_vec_pretty(&summary)?;
    bytes.push(b'\n');
    write_atomic(&config.out.join("summary.json"), &bytes)?;
    Ok((summary, outputs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bench::problem::generate_problem;

    #[test]
    fn checkpoints_are_log_spaced() {
        let ks = log_checkpoints(100, 50);
        assert_eq!(ks[0], 1);
        assert_eq!(*ks.last().unwrap(), 100);
        assert!(ks.windows(2).all(|w| w[0] < w[1]));
        assert!(ks.contains(&10));
        let ks = log_checkpoints(10_000, 50);
        for k in [100, 1000, 10_000] {
            assert!(ks.contains(&k));
        }
        assert_eq!(log_checkpoints(1, 50), vec![1]);
        assert_eq!(Checkpoints::List { ks: vec![5, 3, 99] }.resolve(7), vec![3, 5, 7]);
    }

    #[test]
    fn budget_one_gives_single_record() {
        let g = generate_problem(3, 4, 8, 1).unwrap();
        for name in MethodName::all().filter(|m| !matches!(m, MethodName::InertialPpm | MethodName::Appm)) {
            let out = run_method(&g.problem, &MethodConfig::new(name), 1, &Checkpoints::default(), false, None).unwrap();
            assert_eq!(out.records.len(), 1, "{name}");
            assert_eq!(out.records[0].k, 1);
        }
    }

    #[test]
    fn proximal_point_baselines_are_rejected() {
        let g = generate_problem(3, 4, 8, 1).unwrap();
        for name in [MethodName::InertialPpm, MethodName::Appm] {
            let err = run_method(&g.problem, &MethodConfig::new(name), 5, &Checkpoints::default(), false, None);
            assert!(matches!(err, Err(Error::Config(_))));
        }
    }

    #[test]
    fn method_names_round_trip() {
        for m in MethodName::all() {
            assert_eq!(m.as_str().parse::<MethodName>().unwrap(), m);
            let json = serde_json::to_string(&m).unwrap();
            assert_eq!(json, format!("\"{}\"", m.as_str()));
        }
        assert!("nope".parse::<MethodName>().is_err());
    }

    #[test]
    fn compare_is_reproducible() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = CompareConfig {
            problem: ProblemSource::Generated { m: 3, p: 5, n: 8, seed: 2 },
            methods: CompareConfig::default_methods(),
            iters: 200,
            checkpoints: Checkpoints::default(),
            timing: false,
            reference: None,
            out: dir.path().join("a"),
            format: Format::Csv,
        };
        let (first, _) = compare(&cfg).unwrap();
        cfg.out = dir.path().join("b");
        compare(&cfg).unwrap();
        for run in &first.runs {
            let name = format!("{}.csv", run.label);
            let a = std::fs::read(dir.path().join("a").join(&name)).unwrap();
            let b = std::fs::read(dir.path().join("b").join(&name)).unwrap();
            assert_eq!(a, b);
        }
        cfg.methods.push(MethodConfig::new(MethodName::Flag));
        assert!(matches!(compare(&cfg), Err(Error::Config(_))));
    }

    #[test]
    fn ffb_rejects_non_unit_step() {
        let g = generate_problem(3, 4, 8, 1).unwrap();
        let mut cfg = MethodConfig::new(MethodName::Ffb);
        cfg.gamma = Some(0.5);
        assert!(matches!(
            run_method(&g.problem, &cfg, 5, &Checkpoints::default(), false, None),
            Err(Error::Config(_))
        ));
    }
}

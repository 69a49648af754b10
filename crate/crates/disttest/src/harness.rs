//! Monte Carlo experiment runner: executes repeated tester trials against an
//! instance family, aggregates accept/reject rates with Wilson confidence
//! intervals, sweeps parameter grids, and renders CSV rows with a stable
//! schema.
//!
//! Trials are independent, run on a worker pool with per-trial derived
//! seeds, and aggregate by counting, so results are byte-reproducible
//! regardless of thread scheduling.

use std::time::Instant;

use rayon::prelude::*;

use crate::distances;
use crate::distributions::{derive_seed, DiscreteDistribution};
use crate::equivalence::{
    test_equivalence_l2_vs_hellinger, test_equivalence_l2_vs_tv, EquivalenceConfig, EquivalenceMode,
};
use crate::error::{Error, Result};
use crate::estimation::{meta_test_from_estimator, EstimatorSpec};
use crate::identity::{
    test_identity_chi2_vs_hellinger, test_identity_l2_vs_hellinger, test_identity_l2_vs_tv,
    Decision, IdentityConfig, TestVerdict,
};
use crate::instances::{InstanceFamily, InstanceSpec};

/// The testers the harness can drive.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Tester {
    IdentityChi2Hellinger,
    IdentityL2Tv,
    IdentityL2Hellinger,
    EquivalenceL2Tv,
    EquivalenceL2Hellinger,
    /// The estimation-based tester for TV-close versus Hellinger-far,
    /// instantiated with the plug-in TV estimator.
    MetaTvHellinger,
}

impl Tester {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "identity-chi2-hellinger" => Ok(Self::IdentityChi2Hellinger),
            "identity-l2-tv" => Ok(Self::IdentityL2Tv),
            "identity-l2-hellinger" => Ok(Self::IdentityL2Hellinger),
            "equivalence-l2-tv" => Ok(Self::EquivalenceL2Tv),
            "equivalence-l2-hellinger" => Ok(Self::EquivalenceL2Hellinger),
            "meta-tv-hellinger" => Ok(Self::MetaTvHellinger),
            other => Err(Error::Config(format!("unknown tester '{other}'"))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::IdentityChi2Hellinger => "identity-chi2-hellinger",
            Self::IdentityL2Tv => "identity-l2-tv",
            Self::IdentityL2Hellinger => "identity-l2-hellinger",
            Self::EquivalenceL2Tv => "equivalence-l2-tv",
            Self::EquivalenceL2Hellinger => "equivalence-l2-hellinger",
            Self::MetaTvHellinger => "meta-tv-hellinger",
        }
    }
}

/// A complete experiment description: which tester, which instance family
/// with which parameters, how many trials, and the constant overrides.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub tester: Tester,
    pub family: InstanceFamily,
    pub n: usize,
    /// Tester accuracy parameter.
    pub epsilon: f64,
    /// Instance parameter (distance target, perturbation, or delta,
    /// depending on the family). Defaults to `epsilon`.
    pub instance_epsilon: f64,
    pub trials: u64,
    pub seed: u64,
    /// The analysis constant C for identity and equivalence testers.
    pub sample_const: f64,
    /// The preliminary-stage constant k1 for identity testers.
    pub prelim_const: f64,
    /// The l2-learner constant K for estimation-based testers.
    pub learn_const: f64,
    /// Per-stream budget override for equivalence testers.
    pub m_override: Option<u64>,
    /// Plug-in estimator budget for the meta tester.
    pub meta_budget: u64,
}

impl ExperimentConfig {
    pub fn new(tester: Tester, family: InstanceFamily, n: usize, epsilon: f64) -> Self {
        Self {
            tester,
            family,
            n,
            epsilon,
            instance_epsilon: epsilon,
            trials: 200,
            seed: 0,
            sample_const: 4.0,
            prelim_const: 200.0,
            learn_const: 20.0,
            m_override: None,
            meta_budget: 100_000,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::Config("trials must be at least 1".into()));
        }
        if self.n == 0 {
            return Err(Error::Config("n must be at least 1".into()));
        }
        if self.epsilon <= 0.0 || self.epsilon.is_nan() {
            return Err(Error::Config("epsilon must be positive".into()));
        }
        Ok(())
    }

    /// The nominal per-run budget recorded in CSV output (m2 for identity
    /// testers, m per stream for equivalence, the estimator budget for the
    /// meta tester).
    pub fn nominal_m(&self) -> Result<u64> {
        match self.tester {
            Tester::IdentityChi2Hellinger | Tester::IdentityL2Hellinger => {
                Ok(self.identity_config()?.m2(self.n))
            }
            Tester::IdentityL2Tv => {
                let cfg = self.identity_config()?;
                let mixed = IdentityConfig {
                    epsilon: cfg.epsilon / 2.0,
                    ..cfg
                };
                Ok(mixed.m2(self.n))
            }
            Tester::EquivalenceL2Tv | Tester::EquivalenceL2Hellinger => {
                Ok(self.equivalence_config()?.m(self.n))
            }
            Tester::MetaTvHellinger => Ok(self.meta_budget),
        }
    }

    fn identity_config(&self) -> Result<IdentityConfig> {
        IdentityConfig::with_constants(
            self.epsilon,
            IdentityConfig::DEFAULT_C1,
            IdentityConfig::DEFAULT_C2,
            self.sample_const,
            self.prelim_const,
        )
    }

    fn equivalence_config(&self) -> Result<EquivalenceConfig> {
        let mode = match self.tester {
            Tester::EquivalenceL2Tv => EquivalenceMode::Tv,
            Tester::EquivalenceL2Hellinger => EquivalenceMode::Hellinger,
            _ => return Err(Error::Internal("not an equivalence tester".into())),
        };
        let mut cfg = EquivalenceConfig::with_constants(self.epsilon, self.sample_const, mode)?;
        cfg.m_override = self.m_override;
        Ok(cfg)
    }
}

/// Aggregated outcome of an experiment.
#[derive(Debug, Clone)]
pub struct TrialSummary {
    pub accept_count: u64,
    pub reject_count: u64,
    pub mean_samples: f64,
    pub max_samples: u64,
    /// Wall-clock duration of the run, in seconds. Excluded from CSV output
    /// to keep it byte-reproducible.
    pub wall_time: f64,
    /// 95% Wilson interval on the accept rate.
    pub wilson_low: f64,
    pub wilson_high: f64,
    /// Trials whose Poissonized budget hit the safety cap.
    pub capped_trials: u64,
    /// The verdict a correct tester should reach on this instance.
    pub expected: Decision,
    /// Nominal per-run budget (see [`ExperimentConfig::nominal_m`]).
    pub m: u64,
}

impl TrialSummary {
    pub fn trials(&self) -> u64 {
        self.accept_count + self.reject_count
    }

    pub fn accept_rate(&self) -> f64 {
        self.accept_count as f64 / self.trials() as f64
    }

    /// Fraction of trials that reached the wrong verdict.
    pub fn error_rate(&self) -> f64 {
        match self.expected {
            Decision::Accept => 1.0 - self.accept_rate(),
            Decision::Reject => self.accept_rate(),
        }
    }
}

/// 95% Wilson score interval for a binomial proportion.
pub fn wilson_interval(successes: u64, trials: u64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let z = 1.959963984540054f64;
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = (z / denom) * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
    ((center - half).max(0.0), (center + half).min(1.0))
}

/// Classifies an instance pair as close or far for the given tester, with a
/// 1e-9 slack so exactly-calibrated instances land on the intended side.
/// Instances in the gap between the two cases are rejected: tester behavior
/// there is unspecified and measuring it would be meaningless.
fn classify(
    tester: Tester,
    epsilon: f64,
    n: usize,
    q: &DiscreteDistribution,
    p: &DiscreteDistribution,
) -> Result<Decision> {
    const SLACK: f64 = 1e-9;
    let e = epsilon;
    let nf = n as f64;
    let (close, far) = match tester {
        Tester::IdentityChi2Hellinger => (
            distances::chi2_dist(p, q)? <= e * e + SLACK,
            distances::hellinger_dist(p, q)? >= e - SLACK,
        ),
        Tester::IdentityL2Tv => (
            distances::l2_dist(p, q)? <= e / nf.sqrt() + SLACK,
            distances::tv_dist(p, q)? >= e - SLACK,
        ),
        Tester::IdentityL2Hellinger => (
            distances::l2_dist(p, q)? <= e * e / nf.sqrt() + SLACK,
            distances::hellinger_dist(p, q)? >= e - SLACK,
        ),
        Tester::EquivalenceL2Tv => (
            distances::l2_dist(p, q)? <= e / (2.0 * nf.sqrt()) + SLACK,
            distances::tv_dist(p, q)? >= e - SLACK,
        ),
        Tester::EquivalenceL2Hellinger => (
            distances::l2_dist(p, q)? <= e * e / (32.0 * nf.sqrt()) + SLACK,
            distances::hellinger_dist(p, q)? >= e - SLACK,
        ),
        Tester::MetaTvHellinger => (
            distances::tv_dist(p, q)? <= e * e / 4.0 + SLACK,
            distances::hellinger_dist(p, q)? >= e / 2.0f64.sqrt() - SLACK,
        ),
    };
    match (close, far) {
        (true, false) => Ok(Decision::Accept),
        (false, true) => Ok(Decision::Reject),
        (true, true) => Err(Error::Internal(
            "instance classified both close and far; cases are not disjoint".into(),
        )),
        (false, false) => Err(Error::Config("instance is neither close nor far".into())),
    }
}

fn run_single_trial(
    cfg: &ExperimentConfig,
    q: &DiscreteDistribution,
    p: &DiscreteDistribution,
    trial_seed: u64,
) -> Result<TestVerdict> {
    match cfg.tester {
        Tester::IdentityChi2Hellinger => {
            let mut sampler = p.sampler()?;
            test_identity_chi2_vs_hellinger(&mut sampler, q, &cfg.identity_config()?, trial_seed)
        }
        Tester::IdentityL2Tv => {
            let mut sampler = p.sampler()?;
            test_identity_l2_vs_tv(&mut sampler, q, &cfg.identity_config()?, trial_seed)
        }
        Tester::IdentityL2Hellinger => {
            let mut sampler = p.sampler()?;
            test_identity_l2_vs_hellinger(&mut sampler, q, &cfg.identity_config()?, trial_seed)
        }
        Tester::EquivalenceL2Tv => {
            let mut sp = p.sampler()?;
            let mut sq = q.sampler()?;
            test_equivalence_l2_vs_tv(
                &mut sp,
                &mut sq,
                cfg.n,
                &cfg.equivalence_config()?,
                trial_seed,
            )
        }
        Tester::EquivalenceL2Hellinger => {
            let mut sp = p.sampler()?;
            let mut sq = q.sampler()?;
            test_equivalence_l2_vs_hellinger(
                &mut sp,
                &mut sq,
                cfg.n,
                &cfg.equivalence_config()?,
                trial_seed,
            )
        }
        Tester::MetaTvHellinger => {
            let e = cfg.epsilon;
            let eps1 = e * e / 4.0;
            let eps2 = e / 2.0f64.sqrt();
            let spec = EstimatorSpec::tv_plugin(cfg.meta_budget, eps1 / 4.0)?;
            let mut sp = p.sampler()?;
            let mut sq = q.sampler()?;
            meta_test_from_estimator(&spec, eps1, eps2, &mut sp, &mut sq, trial_seed)
        }
    }
}

/// Runs all trials of an experiment and aggregates the outcome.
/// Deterministic given the config (including its seed).
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<TrialSummary> {
    cfg.validate()?;
    let start = Instant::now();
    let spec = InstanceSpec {
        family: cfg.family,
        n: cfg.n,
        epsilon: cfg.instance_epsilon,
        seed: cfg.seed,
    };
    let (q, p) = spec.build()?;
    if q.n() != cfg.n && cfg.family != InstanceFamily::KlUntestable {
        return Err(Error::Config(format!(
            "instance support {} does not match configured n = {}",
            q.n(),
            cfg.n
        )));
    }
    let expected = classify(cfg.tester, cfg.epsilon, q.n(), &q, &p).map_err(|e| match e {
        Error::Config(_) => Error::Config(format!(
            "tester '{}' with family '{}' (instance epsilon {}) is not a well-defined \
             close/far experiment",
            cfg.tester.name(),
            cfg.family.name(),
            cfg.instance_epsilon
        )),
        other => other,
    })?;

    let verdicts: Vec<TestVerdict> = (0..cfg.trials)
        .into_par_iter()
        .map(|t| run_single_trial(cfg, &q, &p, derive_seed(cfg.seed, t)))
        .collect::<Result<Vec<_>>>()?;

    let accept_count = verdicts.iter().filter(|v| v.accepted()).count() as u64;
    let reject_count = cfg.trials - accept_count;
    let total_samples: u64 = verdicts.iter().map(|v| v.samples_drawn).sum();
    let max_samples = verdicts.iter().map(|v| v.samples_drawn).max().unwrap_or(0);
    let capped_trials = verdicts.iter().filter(|v| v.capped).count() as u64;
    let (wilson_low, wilson_high) = wilson_interval(accept_count, cfg.trials);

    Ok(TrialSummary {
        accept_count,
        reject_count,
        mean_samples: total_samples as f64 / cfg.trials as f64,
        max_samples,
        wall_time: start.elapsed().as_secs_f64(),
        wilson_low,
        wilson_high,
        capped_trials,
        expected,
        m: cfg.nominal_m()?,
    })
}

/// Grid of parameter values swept over a config template. Empty axes keep
/// the template's value.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SweepGrid {
    pub ns: Vec<usize>,
    pub epsilons: Vec<f64>,
    pub sample_consts: Vec<f64>,
    pub ms: Vec<u64>,
}

impl SweepGrid {
    pub fn is_empty(&self) -> bool {
        self.ns.is_empty()
            && self.epsilons.is_empty()
            && self.sample_consts.is_empty()
            && self.ms.is_empty()
    }

    /// Expands the grid against a template, in deterministic row order.
    pub fn expand(&self, template: &ExperimentConfig) -> Vec<ExperimentConfig> {
        let ns = if self.ns.is_empty() {
            vec![template.n]
        } else {
            self.ns.clone()
        };
        let epsilons = if self.epsilons.is_empty() {
            vec![template.epsilon]
        } else {
            self.epsilons.clone()
        };
        let consts = if self.sample_consts.is_empty() {
            vec![template.sample_const]
        } else {
            self.sample_consts.clone()
        };
        let ms: Vec<Option<u64>> = if self.ms.is_empty() {
            vec![template.m_override]
        } else {
            self.ms.iter().copied().map(Some).collect()
        };

        let mut out = Vec::new();
        for &n in &ns {
            for &epsilon in &epsilons {
                for &sample_const in &consts {
                    for &m_override in &ms {
                        let mut cfg = template.clone();
                        cfg.n = n;
                        cfg.epsilon = epsilon;
                        // Instance parameter tracks epsilon unless the
                        // template pinned a distinct value.
                        if template.instance_epsilon == template.epsilon {
                            cfg.instance_epsilon = epsilon;
                        }
                        cfg.sample_const = sample_const;
                        cfg.m_override = m_override;
                        out.push(cfg);
                    }
                }
            }
        }
        out
    }
}

/// Runs a sweep and returns `(config, summary)` per grid point, in grid
/// order.
pub fn sweep(
    template: &ExperimentConfig,
    grid: &SweepGrid,
) -> Result<Vec<(ExperimentConfig, TrialSummary)>> {
    let configs = grid.expand(template);
    if configs.is_empty() {
        return Err(Error::Config("sweep grid is empty".into()));
    }
    configs
        .into_iter()
        .map(|cfg| {
            let summary = run_experiment(&cfg)?;
            Ok((cfg, summary))
        })
        .collect()
}

/// The fixed CSV schema. Plot scripts depend on this column order.
pub const CSV_HEADER: &str =
    "family,tester,n,epsilon,C,m,trials,accepts,rejects,rate,ci_lo,ci_hi,mean_samples,seconds";

/// Renders one CSV row. The seconds column is fixed at zero so identical
/// configs and seeds produce byte-identical files; wall time is reported on
/// stderr by the CLI instead.
pub fn csv_row(cfg: &ExperimentConfig, summary: &TrialSummary) -> String {
    format!(
        "{},{},{},{},{},{},{},{},{},{:.6},{:.6},{:.6},{:.2},0.000",
        cfg.family.name(),
        cfg.tester.name(),
        cfg.n,
        cfg.epsilon,
        cfg.sample_const,
        summary.m,
        summary.trials(),
        summary.accept_count,
        summary.reject_count,
        summary.accept_rate(),
        summary.wilson_low,
        summary.wilson_high,
        summary.mean_samples,
    )
}

/// Parses the flat key=value experiment config format. Lines may be empty
/// or start with '#'. Unknown keys are errors: a misconfigured statistics
/// run must fail loudly, not silently measure the wrong thing.
pub fn parse_config(text: &str) -> Result<(ExperimentConfig, SweepGrid)> {
    let mut tester = None;
    let mut family = None;
    let mut n = None;
    let mut epsilon = None;
    let mut instance_epsilon = None;
    let mut trials: u64 = 200;
    let mut seed: u64 = 0;
    let mut sample_const: f64 = 4.0;
    let mut prelim_const: f64 = 200.0;
    let mut learn_const: f64 = 20.0;
    let mut m_override = None;
    let mut meta_budget: u64 = 100_000;
    let mut grid = SweepGrid::default();

    fn parse_num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
        value
            .trim()
            .parse::<T>()
            .map_err(|_| Error::Config(format!("invalid value '{value}' for key '{key}'")))
    }

    fn parse_list<T: std::str::FromStr>(key: &str, value: &str) -> Result<Vec<T>> {
        value
            .split(',')
            .map(|v| parse_num(key, v))
            .collect::<Result<Vec<T>>>()
    }

    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            Error::Config(format!(
                "line {}: expected key=value, got '{line}'",
                lineno + 1
            ))
        })?;
        let key = key.trim();
        let value = value.trim();
        match key {
            "tester" => tester = Some(Tester::parse(value)?),
            "family" => family = Some(InstanceFamily::parse(value)?),
            "n" => n = Some(parse_num::<usize>(key, value)?),
            "epsilon" => epsilon = Some(parse_num::<f64>(key, value)?),
            "instance_epsilon" => instance_epsilon = Some(parse_num::<f64>(key, value)?),
            "trials" => trials = parse_num(key, value)?,
            "seed" => seed = parse_num(key, value)?,
            "C" => sample_const = parse_num(key, value)?,
            "k1" => prelim_const = parse_num(key, value)?,
            "K" => learn_const = parse_num(key, value)?,
            "m_override" => m_override = Some(parse_num::<u64>(key, value)?),
            "meta_budget" => meta_budget = parse_num(key, value)?,
            "sweep_n" => grid.ns = parse_list(key, value)?,
            "sweep_epsilon" => grid.epsilons = parse_list(key, value)?,
            "sweep_C" => grid.sample_consts = parse_list(key, value)?,
            "sweep_m" => grid.ms = parse_list(key, value)?,
            other => return Err(Error::Config(format!("unknown config key '{other}'"))),
        }
    }

    let tester = tester.ok_or_else(|| Error::Config("missing key 'tester'".into()))?;
    let family = family.ok_or_else(|| Error::Config("missing key 'family'".into()))?;
    let n = n.ok_or_else(|| Error::Config("missing key 'n'".into()))?;
    let epsilon = epsilon.ok_or_else(|| Error::Config("missing key 'epsilon'".into()))?;

    let cfg = ExperimentConfig {
        tester,
        family,
        n,
        epsilon,
        instance_epsilon: instance_epsilon.unwrap_or(epsilon),
        trials,
        seed,
        sample_const,
        prelim_const,
        learn_const,
        m_override,
        meta_budget,
    };
    Ok((cfg, grid))
}

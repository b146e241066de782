//! Monte Carlo experiments: configuration, parallel trials, deterministic
//! aggregation, confidence limits and report files.
//!
//! Trials run in parallel but results are folded in trial order, so a
//! report depends only on the configuration.
//!
//! ```
//! use backbone::harness::{run_experiment, CheckSpec, ExperimentConfig};
//!
//! let config = ExperimentConfig {
//!     trials: 4,
//!     checks: vec![CheckSpec::Structural { chain: 0 }],
//!     ..ExperimentConfig::default()
//! };
//! let report = run_experiment(&config).unwrap();
//! assert_eq!(report.checks[0].violations, 0);
//! ```

mod stats;
mod table;

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::adversary::{AdversaryError, StrategySpec};
use crate::analysis::{self, AnalysisError, CheckOutcome, TraceAnalysis};
use crate::bounds;
use crate::params::{ParamError, ProtocolParams};
use crate::prism::{self, PrismAnalysis};
use crate::seed;
use crate::sim::{self, SimError, SimOptions, TieBreak, VoteView};
use crate::trace::Trace;

pub use stats::{clopper_pearson, clopper_pearson_95};
pub use table::{bounds_report, BoundsQuery, BoundsReport};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid configuration: {0}")]
    ConfigInvalid(String),
    #[error("{path}: {source}")]
    IoFailure { path: PathBuf, source: std::io::Error },
    #[error("trial {trial}: {source}")]
    Simulation { trial: u64, source: SimError },
    #[error("trial {trial}: {source}")]
    Analysis { trial: u64, source: AnalysisError },
}

impl From<ParamError> for HarnessError {
    fn from(e: ParamError) -> Self {
        Self::ConfigInvalid(e.to_string())
    }
}

impl From<AdversaryError> for HarnessError {
    fn from(e: AdversaryError) -> Self {
        Self::ConfigInvalid(e.to_string())
    }
}

fn default_chain() -> usize {
    0
}

fn default_grid() -> usize {
    5
}

/// One quantity evaluated on every trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CheckSpec {
    /// Failure of the good event on `(s, t]`, against its analytic bound.
    GoodEvent {
        #[serde(default = "default_chain")]
        chain: usize,
        s: f64,
        t: f64,
    },
    /// Failure of the typical-event proxy on `(s, t]`.
    TypicalProxy {
        #[serde(default = "default_chain")]
        chain: usize,
        s: f64,
        t: f64,
    },
    Growth {
        #[serde(default = "default_chain")]
        chain: usize,
        s: f64,
        t: f64,
    },
    Quality {
        #[serde(default = "default_chain")]
        chain: usize,
        t: f64,
        k: u64,
    },
    CommonPrefix {
        #[serde(default = "default_chain")]
        chain: usize,
        t: f64,
        k: u64,
        /// Number of later times checked, from `t` to the horizon.
        #[serde(default = "default_grid")]
        grid: usize,
    },
    Structural {
        #[serde(default = "default_chain")]
        chain: usize,
    },
    /// Pooled fraction of honest blocks that are laggers, against `g`.
    LaggerFrequency {
        #[serde(default = "default_chain")]
        chain: usize,
    },
    /// Pooled fraction of settled honest blocks that are loners, against
    /// `g^2`.
    LonerFrequency {
        #[serde(default = "default_chain")]
        chain: usize,
    },
    /// Fraction of trials in which the strategy reports success.
    AttackSuccess,
    /// The four Prism theorems.
    Prism {
        t: f64,
        k: u64,
        #[serde(default = "default_grid")]
        grid: usize,
    },
    /// Ledger replay determinism and pairwise conflict freedom.
    Ledger {
        #[serde(default)]
        t: Option<f64>,
    },
}

impl CheckSpec {
    /// Row names this check contributes to a report.
    pub fn row_names(&self) -> Vec<String> {
        let chain_suffix = |name: &str, chain: usize| {
            if chain == 0 {
                name.to_owned()
            } else {
                format!("{name}[{chain}]")
            }
        };
        match *self {
            Self::GoodEvent { chain, .. } => vec![chain_suffix("good_event", chain)],
            Self::TypicalProxy { chain, .. } => vec![chain_suffix("typical_proxy", chain)],
            Self::Growth { chain, .. } => vec![chain_suffix("growth", chain)],
            Self::Quality { chain, .. } => vec![chain_suffix("quality", chain)],
            Self::CommonPrefix { chain, .. } => vec![chain_suffix("common_prefix", chain)],
            Self::Structural { chain } => vec![chain_suffix("structural", chain)],
            Self::LaggerFrequency { chain } => vec![chain_suffix("lagger_frequency", chain)],
            Self::LonerFrequency { chain } => vec![chain_suffix("loner_frequency", chain)],
            Self::AttackSuccess => vec!["attack_success".into()],
            Self::Prism { .. } => {
                ["prism_growth", "prism_quality", "leader_prefix", "tx_permanence"].map(String::from).to_vec()
            }
            Self::Ledger { .. } => vec!["ledger".into()],
        }
    }

    fn validate(&self, p: &ProtocolParams) -> Result<(), HarnessError> {
        let bad = |msg: String| Err(HarnessError::ConfigInvalid(msg));
        let chains = p.chain_count();
        let chain = match *self {
            Self::GoodEvent { chain, .. }
            | Self::TypicalProxy { chain, .. }
            | Self::Growth { chain, .. }
            | Self::Quality { chain, .. }
            | Self::CommonPrefix { chain, .. }
            | Self::Structural { chain }
            | Self::LaggerFrequency { chain }
            | Self::LonerFrequency { chain } => chain,
            _ => 0,
        };
        if chain >= chains {
            return bad(format!("check uses chain {chain} but only {chains} chain(s) are simulated"));
        }
        let min = bounds::min_interval(p.delta_net, p.delta_typ);
        match *self {
            Self::GoodEvent { s, t, .. } if !(0.0 <= s && s < t && t <= p.horizon) => {
                bad(format!("good_event needs 0 <= s < t <= horizon, got ({s}, {t}]"))
            }
            Self::TypicalProxy { s, t, .. } | Self::Growth { s, t, .. }
                if !(t - s > min && s >= 0.0 && t <= p.horizon) =>
            {
                bad(format!("interval ({s}, {t}] must lie in the horizon and be longer than {min}"))
            }
            Self::Quality { t, .. } | Self::CommonPrefix { t, .. } | Self::Prism { t, .. }
                if !(t > 0.0 && t <= p.horizon) =>
            {
                bad(format!("t = {t} must lie in (0, horizon]"))
            }
            Self::Prism { .. } | Self::Ledger { .. } if !p.is_prism() => bad("prism checks need m > 0".into()),
            _ => Ok(()),
        }
    }
}

fn default_trials() -> u64 {
    100
}

fn default_confidence() -> f64 {
    0.99
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct OutputPaths {
    pub json: Option<PathBuf>,
    pub csv: Option<PathBuf>,
}

/// A whole experiment. In TOML, the protocol parameters sit at the top
/// level next to `seed`, `trials` and `honest_tie_break`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub name: String,
    pub alpha: f64,
    pub beta: f64,
    pub delta_net: f64,
    pub delta_typ: f64,
    #[serde(default)]
    pub m: usize,
    pub horizon: f64,
    pub seed: u64,
    #[serde(default = "default_trials")]
    pub trials: u64,
    #[serde(default)]
    pub strategy: StrategySpec,
    #[serde(default)]
    pub honest_tie_break: TieBreak,
    #[serde(default)]
    pub vote_view: VoteView,
    #[serde(default)]
    pub txs_per_block: Option<usize>,
    #[serde(default)]
    pub checks: Vec<CheckSpec>,
    /// Confidence of the one-sided limits used for bound comparisons.
    #[serde(default = "default_confidence")]
    pub confidence: f64,
    #[serde(default = "default_true")]
    pub parallel: bool,
    #[serde(default)]
    pub output: OutputPaths,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let p = ProtocolParams { horizon: 200.0, ..ProtocolParams::default() };
        Self {
            name: String::new(),
            alpha: p.alpha,
            beta: p.beta,
            delta_net: p.delta_net,
            delta_typ: p.delta_typ,
            m: p.m,
            horizon: p.horizon,
            seed: 0,
            trials: default_trials(),
            strategy: StrategySpec::default(),
            honest_tie_break: TieBreak::default(),
            vote_view: VoteView::default(),
            txs_per_block: None,
            checks: Vec::new(),
            confidence: default_confidence(),
            parallel: true,
            output: OutputPaths::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, HarnessError> {
        toml::from_str(text).map_err(|e| HarnessError::ConfigInvalid(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = fs::read_to_string(path).map_err(|source| HarnessError::IoFailure { path: path.into(), source })?;
        Self::from_toml(&text)
    }

    pub fn params(&self) -> ProtocolParams {
        ProtocolParams {
            alpha: self.alpha,
            beta: self.beta,
            delta_net: self.delta_net,
            delta_typ: self.delta_typ,
            m: self.m,
            horizon: self.horizon,
        }
    }

    pub fn sim_options(&self) -> SimOptions {
        let base = SimOptions { tie_break: self.honest_tie_break, vote_view: self.vote_view, ..SimOptions::default() };
        match self.txs_per_block {
            Some(n) => SimOptions { txs_per_block: n, ..base },
            None => base,
        }
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let p = self.params();
        p.validate()?;
        self.strategy.validate()?;
        if !(self.confidence > 0.0 && self.confidence < 1.0) {
            return Err(HarnessError::ConfigInvalid(format!("confidence must lie in (0, 1), got {}", self.confidence)));
        }
        self.checks.iter().try_for_each(|c| c.validate(&p))
    }

    /// Seed of trial `i`.
    pub fn trial_seed(&self, i: u64) -> u64 {
        seed::mix(self.seed, i)
    }
}

/// How a report row is judged.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RowKind {
    /// A theorem: no trial may have the event without the predicate.
    Implication,
    /// An event failure frequency against an analytic bound.
    Failure,
    /// A pooled Bernoulli frequency against its expected value.
    Estimate,
    /// A frequency reported without a reference value.
    Frequency,
}

/// Aggregated outcome of one report row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckSummary {
    pub check: String,
    pub kind: RowKind,
    pub trials: u64,
    pub event_held: u64,
    pub predicate_held: u64,
    pub preconditions_met: u64,
    /// Implications: trials with the event but not the predicate. Failure
    /// rows: trials where the event failed. Estimates: pooled successes.
    pub violations: u64,
    /// Denominator of `frequency`.
    pub samples: u64,
    pub frequency: f64,
    pub bound: Option<f64>,
    pub ci_low: f64,
    pub ci_high: f64,
    pub pass: bool,
    /// Summed per-trial evaluation time.
    pub wall_seconds: f64,
}

impl CheckSummary {
    pub fn predicate_failures(&self) -> u64 {
        self.trials - self.predicate_held
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub name: String,
    pub config: ExperimentConfig,
    pub trials: u64,
    pub checks: Vec<CheckSummary>,
    pub wall_seconds: f64,
}

impl ExperimentReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn row(&self, check: &str) -> Option<&CheckSummary> {
        self.checks.iter().find(|c| c.check == check)
    }

    /// The report with timings zeroed, for comparing runs.
    pub fn without_timings(&self) -> Self {
        let mut r = self.clone();
        r.wall_seconds = 0.0;
        r.checks.iter_mut().for_each(|c| c.wall_seconds = 0.0);
        r
    }

    pub fn write_json(&self, path: &Path) -> Result<(), HarnessError> {
        let io = |source| HarnessError::IoFailure { path: path.into(), source };
        let text = serde_json::to_string_pretty(self).map_err(|e| io(e.into()))?;
        fs::write(path, text + "\n").map_err(io)
    }

    /// Summary rows: check, trials, violations, frequency, bound, ci_high.
    pub fn write_csv(&self, path: &Path) -> Result<(), HarnessError> {
        let io = |source| HarnessError::IoFailure { path: path.into(), source };
        let mut w = csv::Writer::from_path(path).map_err(|e| io(e.into()))?;
        w.write_record(["check", "trials", "violations", "frequency", "bound", "ci_high"]).map_err(|e| io(e.into()))?;
        for c in &self.checks {
            let bound = c.bound.map(|b| b.to_string()).unwrap_or_default();
            w.write_record([
                c.check.clone(),
                c.trials.to_string(),
                c.violations.to_string(),
                c.frequency.to_string(),
                bound,
                c.ci_high.to_string(),
            ])
            .map_err(|e| io(e.into()))?;
        }
        w.flush().map_err(io)
    }

    /// Plain-text table for terminals.
    pub fn table(&self) -> String {
        let mut out = format!(
            "{:<22} {:>7} {:>7} {:>9} {:>10} {:>11} {:>11} {:>5}\n",
            "check", "trials", "events", "violated", "frequency", "bound", "ci_high", "pass"
        );
        for c in &self.checks {
            let bound = c.bound.map_or("-".to_owned(), |b| format!("{b:.4e}"));
            out += &format!(
                "{:<22} {:>7} {:>7} {:>9} {:>10.6} {:>11} {:>11.4e} {:>5}\n",
                c.check, c.trials, c.event_held, c.violations, c.frequency, bound, c.ci_high, c.pass
            );
        }
        out
    }
}

/// What one trial observed for one row.
#[derive(Debug, Clone, Copy, PartialEq)]
enum Observation {
    Outcome(CheckOutcome),
    Count { hits: u64, total: u64 },
}

struct TrialResult {
    rows: Vec<(Observation, f64)>,
}

fn timed<T>(f: impl FnOnce() -> T) -> (T, f64) {
    let start = Instant::now();
    let v = f();
    (v, start.elapsed().as_secs_f64())
}

fn outcome(event_held: bool, predicate_held: bool) -> Observation {
    Observation::Outcome(CheckOutcome { event_held, predicate_held, preconditions_met: true })
}

/// Ledger replay and safety for one trace: rebuilding gives identical
/// bytes and no two retained transactions conflict.
pub fn ledger_is_sound(trace: &Trace, t: f64) -> bool {
    let delta = trace.params.delta_net;
    let Ok(seq) = prism::leader_sequence(&trace.store, t, delta, None) else {
        return false;
    };
    let first = prism::build_ledger(&trace.store, &seq, &trace.transactions);
    let again = prism::build_ledger(&trace.store, &seq, &trace.transactions);
    let same = serde_json::to_vec(&first).ok() == serde_json::to_vec(&again).ok();
    let txs: Vec<_> = first.entries.iter().filter_map(|e| trace.transactions.get(&e.tx)).collect();
    let conflict_free = txs.iter().enumerate().all(|(i, a)| txs[i + 1..].iter().all(|b| !a.conflicts_with(b)));
    let idempotent = prism::sanitize(first.entries.clone(), &trace.transactions) == first.entries;
    same && conflict_free && idempotent
}

fn evaluate(
    config: &ExperimentConfig,
    params: &ProtocolParams,
    trace: &Trace,
    trial: u64,
) -> Result<TrialResult, HarnessError> {
    let wrap = |source| HarnessError::Analysis { trial, source };
    let analysis = TraceAnalysis::new(trace);
    let prism_analysis =
        config.checks.iter().any(|c| matches!(c, CheckSpec::Prism { .. })).then(|| PrismAnalysis::new(trace));
    let mut rows = Vec::new();
    for check in &config.checks {
        match *check {
            CheckSpec::GoodEvent { chain, s, t } => {
                let (held, dt) = timed(|| analysis.good_event(chain, s, t, params).map(|e| e.holds()));
                rows.push((outcome(held.map_err(wrap)?, true), dt));
            }
            CheckSpec::TypicalProxy { chain, s, t } => {
                let (held, dt) = timed(|| analysis.typical_proxy(chain, s, t, params));
                rows.push((outcome(held.map_err(wrap)?, true), dt));
            }
            CheckSpec::Growth { chain, s, t } => {
                let (o, dt) = timed(|| analysis::check_growth(&analysis, chain, s, t, params));
                rows.push((Observation::Outcome(o.map_err(wrap)?), dt));
            }
            CheckSpec::Quality { chain, t, k } => {
                let (o, dt) = timed(|| analysis::check_quality(&analysis, chain, t, k, params));
                rows.push((Observation::Outcome(o.map_err(wrap)?), dt));
            }
            CheckSpec::CommonPrefix { chain, t, k, grid } => {
                let r_grid = analysis::default_r_grid(t, params.horizon, grid);
                let (o, dt) = timed(|| analysis::check_common_prefix(&analysis, chain, t, k, &r_grid, params));
                rows.push((Observation::Outcome(o.map_err(wrap)?), dt));
            }
            CheckSpec::Structural { chain } => {
                let (r, dt) = timed(|| analysis::structural_lemmas(&analysis, chain));
                rows.push((outcome(true, r.map_err(wrap)?.all()), dt));
            }
            CheckSpec::LaggerFrequency { chain } => {
                let flags = &analysis.chain(chain).map_err(wrap)?.flags;
                let hits = flags.lagger.iter().filter(|&&u| u).count() as u64;
                rows.push((Observation::Count { hits, total: flags.len() as u64 }, 0.0));
            }
            CheckSpec::LonerFrequency { chain } => {
                let flags = &analysis.chain(chain).map_err(wrap)?.flags;
                let known: Vec<bool> = flags.loner.iter().flatten().copied().collect();
                let hits = known.iter().filter(|&&v| v).count() as u64;
                rows.push((Observation::Count { hits, total: known.len() as u64 }, 0.0));
            }
            CheckSpec::AttackSuccess => {
                let hit = trace.report.success == Some(true);
                rows.push((Observation::Count { hits: hit as u64, total: 1 }, 0.0));
            }
            CheckSpec::Prism { t, k, grid } => {
                let r_grid = analysis::default_r_grid(t, params.horizon, grid);
                let pa = prism_analysis.as_ref().expect("built when a prism check is present");
                let (report, dt) = timed(|| prism::check_prism_theorems(pa, t, k, &r_grid, params));
                let report = report.map_err(wrap)?;
                for (_, o) in report.outcomes() {
                    rows.push((Observation::Outcome(o), dt / 4.0));
                }
            }
            CheckSpec::Ledger { t } => {
                let (ok, dt) = timed(|| ledger_is_sound(trace, t.unwrap_or(params.horizon)));
                rows.push((outcome(true, ok), dt));
            }
        }
    }
    Ok(TrialResult { rows })
}

fn run_trial(config: &ExperimentConfig, params: &ProtocolParams, trial: u64) -> Result<TrialResult, HarnessError> {
    let mut strategy = config.strategy.build()?;
    let trace = sim::run_simulation(params, &config.sim_options(), strategy.as_mut(), config.trial_seed(trial))
        .map_err(|source| HarnessError::Simulation { trial, source })?;
    evaluate(config, params, &trace, trial)
}

/// Analytic reference value of a row, if it has one.
fn reference(check: &CheckSpec, params: &ProtocolParams) -> Option<f64> {
    let d = bounds::derive(params.alpha, params.delta_net, params.delta_typ).ok()?;
    let g = params.g();
    match *check {
        CheckSpec::GoodEvent { s, t, .. } => Some(bounds::event_bounds(&d, s, t).good.value),
        CheckSpec::TypicalProxy { s, t, .. } => Some(bounds::event_bounds(&d, s, t).typical.value),
        CheckSpec::LaggerFrequency { .. } => Some(g),
        CheckSpec::LonerFrequency { .. } => Some(g * g),
        CheckSpec::AttackSuccess => None,
        _ => Some(0.0),
    }
}

fn row_kind(check: &CheckSpec) -> RowKind {
    match check {
        CheckSpec::GoodEvent { .. } | CheckSpec::TypicalProxy { .. } => RowKind::Failure,
        CheckSpec::LaggerFrequency { .. } | CheckSpec::LonerFrequency { .. } => RowKind::Estimate,
        CheckSpec::AttackSuccess => RowKind::Frequency,
        _ => RowKind::Implication,
    }
}

fn summarise(
    name: String,
    kind: RowKind,
    bound: Option<f64>,
    confidence: f64,
    observations: &[(Observation, f64)],
) -> CheckSummary {
    let trials = observations.len() as u64;
    let (mut event_held, mut predicate_held, mut pre, mut violations, mut samples) = (0, 0, 0, 0, 0);
    let mut wall_seconds = 0.0;
    for (o, dt) in observations {
        wall_seconds += dt;
        match *o {
            Observation::Outcome(c) => {
                event_held += c.event_held as u64;
                predicate_held += c.predicate_held as u64;
                pre += c.preconditions_met as u64;
                violations += match kind {
                    RowKind::Failure => !c.event_held as u64,
                    _ => c.violated() as u64,
                };
                samples += 1;
            }
            Observation::Count { hits, total } => {
                violations += hits;
                samples += total;
            }
        }
    }
    let frequency = if samples == 0 { 0.0 } else { violations as f64 / samples as f64 };
    let (ci_low, ci_high) = clopper_pearson(violations, samples, confidence);
    let pass = match (kind, bound) {
        (RowKind::Implication, _) => violations == 0,
        // Not significantly above the bound at the configured confidence.
        (RowKind::Failure, Some(b)) => ci_low <= b,
        (RowKind::Estimate, Some(b)) => {
            samples == 0 || (frequency - b).abs() <= 4.0 * (b * (1.0 - b) / samples as f64).sqrt()
        }
        _ => true,
    };
    CheckSummary {
        check: name,
        kind,
        trials,
        event_held,
        predicate_held,
        preconditions_met: pre,
        violations,
        samples,
        frequency,
        bound,
        ci_low,
        ci_high,
        pass,
        wall_seconds,
    }
}

/// Runs every trial of `config`, aggregates in trial order and writes the
/// configured output files.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentReport, HarnessError> {
    config.validate()?;
    let params = config.params();
    let start = Instant::now();
    let results: Vec<TrialResult> = if config.parallel {
        (0..config.trials).into_par_iter().map(|i| run_trial(config, &params, i)).collect::<Result<_, _>>()?
    } else {
        (0..config.trials).map(|i| run_trial(config, &params, i)).collect::<Result<_, _>>()?
    };

    let mut checks = Vec::new();
    let mut column = 0;
    for check in &config.checks {
        for name in check.row_names() {
            let observations: Vec<(Observation, f64)> = results.iter().map(|r| r.rows[column]).collect();
            checks.push(summarise(name, row_kind(check), reference(check, &params), config.confidence, &observations));
            column += 1;
        }
    }
    let report = ExperimentReport {
        name: config.name.clone(),
        config: config.clone(),
        trials: config.trials,
        checks,
        wall_seconds: start.elapsed().as_secs_f64(),
    };
    if let Some(path) = &config.output.json {
        report.write_json(path)?;
    }
    if let Some(path) = &config.output.csv {
        report.write_csv(path)?;
    }
    Ok(report)
}

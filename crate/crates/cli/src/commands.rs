use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;
use std::process::ExitCode;

use backbone::bounds;
use backbone::harness::{bounds_report, run_experiment, CheckSpec, ExperimentConfig, HarnessError};
use backbone::prism;
use backbone::sim;
use backbone::trace::Trace;

use crate::config::{self, BoundsFlags, CliError};
use crate::{CheckArgs, RunArgs};

type CmdResult = Result<ExitCode, CliError>;

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).expect("report types serialise");
    fs::write(path, text + "\n").map_err(|e| CliError::io(path, e))
}

fn write_trace(trace: &Trace, path: &Path) -> Result<(), CliError> {
    let file = File::create(path).map_err(|e| CliError::io(path, e))?;
    trace.write_jsonl(BufWriter::new(file)).map_err(|e| CliError::io(path, e))
}

pub fn bounds(flags: &BoundsFlags, config: Option<&Path>, out: Option<&Path>) -> CmdResult {
    let query = config::bounds_query(flags, config)?;
    let report = bounds_report(&query)?;
    print!("{report}");
    if let Some(path) = out {
        write_json(path, &report)?;
    }
    Ok(ExitCode::SUCCESS)
}

fn run_once(config: &ExperimentConfig) -> Result<Trace, CliError> {
    let mut strategy = config.strategy.build().map_err(HarnessError::from)?;
    Ok(sim::run_simulation(&config.params(), &config.sim_options(), strategy.as_mut(), config.seed)?)
}

fn summary(trace: &Trace) -> String {
    let mut out = format!("strategy {}  seed {}  horizon {}\n", trace.strategy, trace.seed, trace.params.horizon);
    out +=
        &format!("{:<6} {:>8} {:>12} {:>10} {:>14}\n", "chain", "honest", "adversarial", "withheld", "public height");
    for (j, (chain, public)) in trace.store.chains().iter().zip(trace.public_indices()).enumerate() {
        let blocks = &chain.blocks()[1..];
        let honest = blocks.iter().filter(|b| b.is_honest()).count();
        let withheld = blocks.iter().filter(|b| b.publish_time.is_none()).count();
        out += &format!(
            "{:<6} {:>8} {:>12} {:>10} {:>14}\n",
            j,
            honest,
            blocks.len() - honest,
            withheld,
            public.max_height(trace.params.horizon)
        );
    }
    if let Some(success) = trace.report.success {
        out += &format!("attack success: {success}\n");
    }
    for (k, v) in &trace.report.detail {
        out += &format!("{k}: {v}\n");
    }
    out
}

pub fn simulate(run: &RunArgs, out: Option<&Path>) -> CmdResult {
    let config = config::experiment(run, None, true)?;
    let trace = run_once(&config)?;
    print!("{}", summary(&trace));
    if let Some(path) = out {
        write_trace(&trace, path)?;
    }
    Ok(ExitCode::SUCCESS)
}

pub fn prism_sim(run: &RunArgs, out: Option<&Path>, ledger_out: Option<&Path>, t: Option<f64>) -> CmdResult {
    let mut run = run.clone();
    run.params.m.get_or_insert(5);
    let config = config::experiment(&run, None, true)?;
    if config.m == 0 {
        return Err(CliError::Usage("prism-sim needs m > 0".into()));
    }
    let trace = run_once(&config)?;
    let t = t.unwrap_or(config.horizon);
    let sequence = prism::leader_sequence(&trace.store, t, config.delta_net, None)?;
    let ledger = prism::build_ledger(&trace.store, &sequence, &trace.transactions);

    print!("{}", summary(&trace));
    println!("leaders at t={t}: {}", sequence.leaders.len());
    println!("{:>6} {:>8} {:>10}", "epoch", "tx", "block");
    let stdout = std::io::stdout();
    let mut lock = stdout.lock();
    for e in &ledger.entries {
        writeln!(lock, "{:>6} {:>8} {:>10}", e.epoch, e.tx, format!("{}:{}", e.block.chain, e.block.id))
            .map_err(|e| CliError::io(Path::new("<stdout>"), e))?;
    }
    if let Some(path) = out {
        write_trace(&trace, path)?;
    }
    if let Some(path) = ledger_out {
        write_json(path, &serde_json::json!({ "t": t, "leaders": sequence, "ledger": ledger }))?;
    }
    Ok(ExitCode::SUCCESS)
}

/// Default `(t, k)` for the depth checks: `k` satisfies both the depth
/// floor and the proxy window, `t` leaves room for `k` honest blocks.
fn default_depth(config: &ExperimentConfig) -> Result<(f64, u64), CliError> {
    let p = config.params();
    let min_interval = bounds::min_interval(p.delta_net, p.delta_typ);
    let depth = bounds::min_depth(p.alpha, p.delta_net, p.delta_typ).ceil();
    let window = (2.0 * p.alpha * (min_interval + 2.0 * p.delta_net)).ceil() + 1.0;
    let k = depth.max(window);
    let gc = 1.0 - 41.0 * p.delta_typ / 40.0;
    let t = (k / (gc * p.g() * p.alpha)).max(0.95 * p.horizon);
    if t > p.horizon {
        return Err(HarnessError::ConfigInvalid(format!(
            "horizon {} is too short for depth {k}; pass --t and --k or raise --horizon",
            p.horizon
        ))
        .into());
    }
    Ok((t, k as u64))
}

fn checks_from_names(args: &CheckArgs, config: &ExperimentConfig) -> Result<Vec<CheckSpec>, CliError> {
    let p = config.params();
    let names: Vec<&str> = if args.checks.is_empty() {
        if p.is_prism() {
            vec!["prism", "ledger"]
        } else {
            vec!["growth", "quality", "common-prefix", "structural"]
        }
    } else {
        args.checks.iter().map(String::as_str).collect()
    };
    let depth = || -> Result<(f64, u64), CliError> {
        match (args.t, args.k) {
            (Some(t), Some(k)) => Ok((t, k)),
            (t, k) => {
                let (dt, dk) = default_depth(config)?;
                Ok((t.unwrap_or(dt), k.unwrap_or(dk)))
            }
        }
    };
    let interval = || -> Result<(f64, f64), CliError> {
        let t = match args.t {
            Some(t) => t,
            None => depth()?.0,
        };
        let s = args.s.unwrap_or(t - 1.1 * bounds::min_interval(p.delta_net, p.delta_typ));
        Ok((s, t))
    };
    names
        .into_iter()
        .map(|name| {
            Ok(match name {
                "growth" => {
                    let (s, t) = interval()?;
                    CheckSpec::Growth { chain: 0, s, t }
                }
                "good-event" => {
                    let (s, t) = interval()?;
                    CheckSpec::GoodEvent { chain: 0, s, t }
                }
                "typical-proxy" => {
                    let (s, t) = interval()?;
                    CheckSpec::TypicalProxy { chain: 0, s, t }
                }
                "quality" => {
                    let (t, k) = depth()?;
                    CheckSpec::Quality { chain: 0, t, k }
                }
                "common-prefix" => {
                    let (t, k) = depth()?;
                    CheckSpec::CommonPrefix { chain: 0, t, k, grid: 5 }
                }
                "prism" => {
                    let (t, k) = depth()?;
                    CheckSpec::Prism { t, k, grid: 5 }
                }
                "structural" => CheckSpec::Structural { chain: 0 },
                "lagger-frequency" => CheckSpec::LaggerFrequency { chain: 0 },
                "loner-frequency" => CheckSpec::LonerFrequency { chain: 0 },
                "attack-success" => CheckSpec::AttackSuccess,
                "ledger" => CheckSpec::Ledger { t: args.t },
                other => return Err(CliError::Usage(format!("unknown check {other:?}"))),
            })
        })
        .collect()
}

/// Shared by `montecarlo` and `verify`; `strict` turns a failing row into
/// exit status 1.
pub fn montecarlo(args: &CheckArgs, strict: bool) -> CmdResult {
    let mut config = config::experiment(&args.run, args.trials, false)?;
    if config.checks.is_empty() {
        config.checks = checks_from_names(args, &config)?;
    }
    if args.serial {
        config.parallel = false;
    }
    if let Some(p) = &args.out {
        config.output.json = Some(p.clone());
    }
    if let Some(p) = &args.csv {
        config.output.csv = Some(p.clone());
    }
    let report = run_experiment(&config)?;
    print!("{}", report.table());
    let verdict = if report.passed() { "PASS" } else { "FAIL" };
    println!("{verdict} ({} trials, {:.2}s)", report.trials, report.wall_seconds);
    Ok(if strict && !report.passed() { ExitCode::FAILURE } else { ExitCode::SUCCESS })
}

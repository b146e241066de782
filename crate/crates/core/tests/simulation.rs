use backbone::adversary::{
    NullAdversary, PrivateChain, SelfishMining, Strategy, StrategyDecision, StrategyEvent, StrategySpec, View,
};
use backbone::harness::{clopper_pearson_95, run_experiment, CheckSpec, ExperimentConfig};
use backbone::prism;
use backbone::sim::{self, SimError, SimOptions, TieBreak};
use backbone::{BlockId, ProtocolParams, Trace};

fn params(alpha: f64, beta: f64, delta_net: f64, horizon: f64) -> ProtocolParams {
    ProtocolParams { alpha, beta, delta_net, horizon, ..ProtocolParams::default() }
}

fn simulate(p: &ProtocolParams, strategy: &mut dyn Strategy, seed: u64) -> Trace {
    sim::run_simulation(p, &SimOptions::default(), strategy, seed).unwrap()
}

fn jsonl(trace: &Trace) -> Vec<u8> {
    let mut out = Vec::new();
    trace.write_jsonl(&mut out).unwrap();
    out
}

#[test]
fn null_adversary_without_close_arrivals_builds_one_chain() {
    let p = params(1.0, 0.5, 0.001, 100.0);
    let trace = simulate(&p, &mut NullAdversary, 12);
    let honest = &trace.schedule.honest[0];
    assert!(honest.windows(2).all(|w| w[1] - w[0] > p.delta_net), "seed has a close pair");
    assert!(honest.first().is_none_or(|&t| t > p.delta_net));
    let chain = trace.store.chain(0);
    assert_eq!(chain.len(), honest.len() + 1);
    assert!(chain.blocks().iter().all(|b| b.is_honest()));
    let tip = trace.public_indices()[0].preferred(p.horizon);
    assert_eq!(chain.height(tip), honest.len() as u64);
}

#[test]
fn withheld_fork_never_becomes_credible() {
    let p = params(1.0, 0.8, 0.1, 200.0);
    let trace = simulate(&p, &mut PrivateChain::new(1_000_000), 3);
    let chain = trace.store.chain(0);
    assert!(chain.blocks().iter().any(|b| !b.is_honest()));
    let tips = chain.credible_tips(p.horizon, p.delta_net);
    assert!(!tips.is_empty());
    assert!(tips.iter().all(|&b| chain.block(b).is_honest()));
    assert_eq!(trace.report.success, Some(false));
}

#[test]
fn replay_is_byte_identical() {
    let p = ProtocolParams { m: 2, ..params(1.0, 0.3, 0.2, 80.0) };
    let a = simulate(&p, &mut SelfishMining::new(), 21);
    let b = simulate(&p, &mut SelfishMining::new(), 21);
    assert_eq!(jsonl(&a), jsonl(&b));
    assert_ne!(jsonl(&a), jsonl(&simulate(&p, &mut SelfishMining::new(), 22)));
}

#[test]
fn adversarial_blocks_are_dominated_by_the_budget() {
    let p = params(1.0, 0.9, 0.3, 150.0);
    for seed in 0..20 {
        let trace = simulate(&p, &mut SelfishMining::new(), seed);
        let chain = trace.store.chain(0);
        let mined: Vec<f64> = chain.blocks().iter().filter(|b| !b.is_honest()).map(|b| b.mined_time).collect();
        let budget = &trace.schedule.adversarial[0];
        for s in (0..150).step_by(7).map(f64::from) {
            for t in [s + 1.0, s + 10.0, s + 60.0] {
                let used = mined.iter().filter(|&&x| s < x && x <= t).count();
                let available = budget.iter().filter(|&&x| s < x && x <= t).count();
                assert!(used <= available, "seed {seed} ({s}, {t}]");
            }
        }
        for b in &chain.blocks()[1..] {
            if b.is_honest() {
                let parent = b.parent.unwrap();
                assert!(chain.credible_tips(b.mined_time, p.delta_net).contains(&parent), "seed {seed} block {}", b.id);
            }
        }
    }
}

#[test]
fn voter_chain_arrivals_are_uncorrelated() {
    let p = ProtocolParams { m: 1, ..params(1.0, 0.0, 0.1, 2000.0) };
    let trace = simulate(&p, &mut NullAdversary, 31);
    let counts = |times: &[f64]| -> Vec<f64> {
        let mut c = vec![0.0; 200];
        for &t in times {
            c[((t / 10.0) as usize).min(199)] += 1.0;
        }
        c
    };
    let (a, b) = (counts(&trace.schedule.honest[0]), counts(&trace.schedule.honest[1]));
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let (ma, mb) = (mean(&a), mean(&b));
    let cov: f64 = a.iter().zip(&b).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let var = |v: &[f64], m: f64| v.iter().map(|x| (x - m).powi(2)).sum::<f64>();
    let r = cov / (var(&a, ma) * var(&b, mb)).sqrt();
    assert!(r.abs() <= 0.1, "correlation {r}");
}

/// Mines on a block from the future.
struct TimeTraveller;

impl Strategy for TimeTraveller {
    fn name(&self) -> &str {
        "time_traveller"
    }

    fn decide(&mut self, event: &StrategyEvent, view: &View) -> StrategyDecision {
        match event {
            StrategyEvent::Budget { .. } => StrategyDecision::mine(BlockId(view.store.chain(0).len() + 5)),
            _ => StrategyDecision::skip(),
        }
    }
}

/// Tries to mine when an honest block arrives.
struct OffBudget;

impl Strategy for OffBudget {
    fn name(&self) -> &str {
        "off_budget"
    }

    fn decide(&mut self, event: &StrategyEvent, _view: &View) -> StrategyDecision {
        match event {
            StrategyEvent::HonestBlock { .. } => StrategyDecision::mine(BlockId::GENESIS),
            _ => StrategyDecision::skip(),
        }
    }
}

#[test]
fn misbehaving_strategies_are_stopped() {
    let p = params(1.0, 1.0, 0.1, 50.0);
    for strategy in [&mut TimeTraveller as &mut dyn Strategy, &mut OffBudget] {
        let err = sim::run_simulation(&p, &SimOptions::default(), strategy, 1).unwrap_err();
        assert!(matches!(err, SimError::StrategyViolation { .. }), "{err}");
    }
}

#[test]
fn builtins_never_violate_the_budget() {
    let specs = [
        StrategySpec::named("null"),
        StrategySpec::named("private_chain").with_param("k_confirm", 3),
        StrategySpec::named("selfish_mining"),
        StrategySpec::named("censor_votes"),
        StrategySpec::named("censor_votes").with_param("steer", true),
    ];
    for (i, spec) in specs.iter().enumerate() {
        let m = if spec.name == "censor_votes" { 2 } else { 0 };
        let p = ProtocolParams { m, ..params(1.0, 0.7, 0.2, 40.0) };
        for tie_break in [TieBreak::EarliestPublication, TieBreak::AdversarySteered, TieBreak::DelayedView] {
            let options = SimOptions { tie_break, ..SimOptions::default() };
            for seed in 0..200 {
                let mut s = spec.build().unwrap();
                if let Err(e) = sim::run_simulation(&p, &options, s.as_mut(), seed * 10 + i as u64) {
                    panic!("{} {tie_break:?} seed {seed}: {e}", spec.name);
                }
            }
        }
    }
}

#[test]
fn null_adversary_has_no_adversarial_counts() {
    let p = params(2.0, 1.0, 0.1, 100.0);
    let trace = simulate(&p, &mut NullAdversary, 8);
    let c = backbone::analysis::interval_counts(&trace, 0, 0.0, 100.0).unwrap();
    assert_eq!(c.z, 0);
    assert!(c.n > 0);
}

#[test]
fn null_adversary_keeps_common_prefix_at_admissible_rates() {
    let config = ExperimentConfig {
        trials: 100,
        horizon: 1000.0,
        seed: 13,
        checks: vec![
            CheckSpec::CommonPrefix { chain: 0, t: 950.0, k: 588, grid: 5 },
            CheckSpec::CommonPrefix { chain: 0, t: 700.0, k: 40, grid: 5 },
        ],
        ..ExperimentConfig::default()
    };
    let report = run_experiment(&config).unwrap();
    for row in &report.checks {
        assert_eq!(row.predicate_held, 100, "{}", row.check);
    }
}

#[test]
fn private_chain_needs_a_budget() {
    let p = params(1.0, 0.0, 0.0, 300.0);
    for seed in 0..50 {
        assert_eq!(simulate(&p, &mut PrivateChain::new(1), seed).report.success, Some(false));
    }
}

#[test]
fn majority_attacker_usually_double_spends() {
    let p = params(1.0, 1.3, 0.0, 400.0);
    let wins =
        (0..200).filter(|&seed| simulate(&p, &mut PrivateChain::new(1), seed).report.success == Some(true)).count();
    let (lower, _) = clopper_pearson_95(wins as u64, 200);
    assert!(lower > 0.5, "{wins}/200");
}

#[test]
fn selfish_mining_without_budget_matches_null() {
    let p = params(1.0, 0.0, 0.2, 100.0);
    assert_eq!(jsonl(&simulate(&p, &mut SelfishMining::new(), 4)), jsonl(&simulate(&p, &mut NullAdversary, 4)));
}

#[test]
fn selfish_mining_beats_its_fair_share_when_ties_are_steered() {
    let p = params(1.0, 0.4, 0.0, 500.0);
    let options = SimOptions { tie_break: TieBreak::AdversarySteered, ..SimOptions::default() };
    let (mut adversarial, mut total) = (0, 0);
    for seed in 0..500 {
        let trace = sim::run_simulation(&p, &options, &mut SelfishMining::new(), seed).unwrap();
        let chain = trace.store.chain(0);
        let tip = trace.public_indices()[0].preferred(p.horizon);
        for id in &chain.path(tip)[1..] {
            total += 1;
            adversarial += !chain.block(*id).is_honest() as u32;
        }
    }
    let share = adversarial as f64 / total as f64;
    assert!(share >= 0.4 / 1.4, "{share}");
}

#[test]
fn selfish_mining_quality_holds_whenever_the_proxy_does() {
    let config = ExperimentConfig {
        beta: 0.2,
        horizon: 1000.0,
        seed: 17,
        trials: 60,
        strategy: StrategySpec::named("selfish_mining"),
        honest_tie_break: TieBreak::AdversarySteered,
        checks: vec![CheckSpec::Quality { chain: 0, t: 950.0, k: 588 }],
        ..ExperimentConfig::default()
    };
    let report = run_experiment(&config).unwrap();
    assert_eq!(report.checks[0].violations, 0);
    assert!(report.checks[0].event_held > 0);
}

#[test]
fn censorship_without_budget_leaves_ledgers_unchanged() {
    let p = ProtocolParams { m: 5, ..params(1.0, 0.0, 0.1, 60.0) };
    for seed in 0..10 {
        let ledger = |spec: StrategySpec| {
            let mut s = spec.build().unwrap();
            let trace = sim::run_simulation(&p, &SimOptions::default(), s.as_mut(), seed).unwrap();
            let seq = prism::leader_sequence(&trace.store, p.horizon, p.delta_net, None).unwrap();
            prism::build_ledger(&trace.store, &seq, &trace.transactions)
        };
        assert_eq!(ledger(StrategySpec::named("null")), ledger(StrategySpec::named("censor_votes")));
    }
}

#[test]
fn censorship_keeps_ledgers_sound_and_leader_prefix_implied() {
    let config = ExperimentConfig {
        alpha: 1.0,
        beta: 0.4,
        delta_net: 0.1,
        delta_typ: 0.2,
        m: 5,
        horizon: 200.0,
        seed: 19,
        trials: 200,
        strategy: StrategySpec::named("censor_votes").with_param("steer", true),
        checks: vec![CheckSpec::Prism { t: 150.0, k: 20, grid: 3 }, CheckSpec::Ledger { t: None }],
        ..ExperimentConfig::default()
    };
    let report = run_experiment(&config).unwrap();
    assert_eq!(report.row("leader_prefix").unwrap().violations, 0);
    assert_eq!(report.row("ledger").unwrap().violations, 0);
}

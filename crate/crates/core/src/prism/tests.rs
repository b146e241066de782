use super::*;
use crate::adversary::{CensorVotes, NullAdversary, SelfishMining, Strategy};
use crate::params::ProtocolParams;
use crate::sim::{run_simulation, SimOptions};
use crate::store::{Kind, NewBlock};
use crate::trace::Trace;

fn p(m: usize) -> ProtocolParams {
    ProtocolParams { alpha: 1.0, beta: 0.0, delta_net: 0.4, delta_typ: 0.3, m, horizon: 20.0 }
}

fn tx(id: TxId, inputs: &[u64]) -> Transaction {
    Transaction { id, inputs: inputs.to_vec(), outputs: vec![1000 + id] }
}

#[test]
fn sortition_examples() {
    assert_eq!(sortition(0.0, 5), 0);
    assert_eq!(sortition(0.34, 2), 1);
    assert_eq!(sortition(0.999, 2), 2);
}

#[test]
fn sortition_is_uniform() {
    use rand::Rng;
    let m = 4;
    let draws = 100_000;
    let mut rng = crate::seed::rng(5);
    let mut counts = vec![0u32; m + 1];
    for _ in 0..draws {
        counts[sortition(rng.random::<f64>(), m)] += 1;
    }
    let mean = draws as f64 / (m + 1) as f64;
    let sd = (mean * (1.0 - 1.0 / (m + 1) as f64)).sqrt();
    assert!(counts.iter().all(|&c| (c as f64 - mean).abs() <= 4.0 * sd), "{counts:?}");
}

#[test]
fn first_publication_takes_the_minimum() {
    let mut store = BlockStore::new(2);
    let a = store.append_block(NewBlock::honest(0, BlockId::GENESIS, 1.0)).unwrap();
    let b = store.append_block(NewBlock::honest(0, a, 2.0)).unwrap();
    store.append_block(NewBlock::adversarial(0, b, 2.5).published_at(5.0)).unwrap();
    store.append_block(NewBlock::honest(0, b, 4.2)).unwrap();
    store.append_block(NewBlock::adversarial(0, b, 4.5)).unwrap();
    assert_eq!(first_publication_time(&store, 0), Some(0.0));
    assert_eq!(first_publication_time(&store, 3), Some(4.2));
    assert_eq!(first_publication_time(&store, 4), None);

    let mut withheld = BlockStore::new(2);
    withheld.append_block(NewBlock::adversarial(0, BlockId::GENESIS, 1.0)).unwrap();
    assert_eq!(first_publication_time(&withheld, 1), None);
}

#[test]
fn honest_votes_follow_the_rule() {
    let mut store = BlockStore::new(2);
    let a = store.append_block(NewBlock::honest(0, BlockId::GENESIS, 1.0)).unwrap();
    store.append_block(NewBlock::honest(0, a, 3.0)).unwrap();
    let early = store.append_block(NewBlock::honest(1, BlockId::GENESIS, 1.2)).unwrap();
    assert!(honest_votes(&store, BlockRef::new(1, early), 0.4).is_empty());

    let v = store.append_block(NewBlock::honest(1, BlockId::GENESIS, 2.5)).unwrap();
    assert_eq!(honest_votes(&store, BlockRef::new(1, v), 0.4), vec![Vote { height: 1, proposer: a }]);

    let voted = store
        .append_block(NewBlock::honest(1, BlockId::GENESIS, 2.6).with_votes(vec![Vote { height: 1, proposer: a }]))
        .unwrap();
    let child = store.append_block(NewBlock::honest(1, voted, 3.5)).unwrap();
    let votes = honest_votes(&store, BlockRef::new(1, child), 0.4);
    assert_eq!(votes.iter().map(|v| v.height).collect::<Vec<_>>(), vec![2]);
}

#[test]
fn single_voter_all_honest_elects_the_proposer_chain() {
    let trace = run_simulation(&p(1), &SimOptions::default(), &mut NullAdversary, 3).unwrap();
    let t = trace.params.horizon;
    let seq = leader_sequence(&trace.store, t, 0.4, None).unwrap();
    let proposers = trace.store.chain(0);
    for (i, &l) in seq.leaders.iter().enumerate() {
        assert_eq!(proposers.height(l), i as u64 + 1);
        assert!(proposers.block(l).is_honest());
    }
    assert_eq!(seq.height(), PublicIndex::from_chain(proposers).max_height(t - 0.4));
}

/// Proposers A and B at height 1 and three voter chains.
fn ballot_store(choices: [bool; 3]) -> (BlockStore, BlockId, BlockId) {
    let mut store = BlockStore::new(4);
    let a = store.append_block(NewBlock::honest(0, BlockId::GENESIS, 1.0)).unwrap();
    let b = store.append_block(NewBlock::adversarial(0, BlockId::GENESIS, 0.5).published_at(0.9)).unwrap();
    for (j, pick_a) in choices.into_iter().enumerate() {
        let proposer = if pick_a { a } else { b };
        store
            .append_block(NewBlock::honest(j + 1, BlockId::GENESIS, 2.0).with_votes(vec![Vote { height: 1, proposer }]))
            .unwrap();
    }
    (store, a, b)
}

#[test]
fn plurality_elects_the_leader() {
    let (store, a, b) = ballot_store([true, false, true]);
    let seq = leader_sequence(&store, 3.0, 0.1, None).unwrap();
    assert_eq!(seq.leaders, vec![a]);
    let (store, _, _) = ballot_store([false, false, true]);
    assert_eq!(leader_sequence(&store, 3.0, 0.1, None).unwrap().leaders, vec![b]);
}

#[test]
fn zero_votes_fall_back_to_earliest_publication() {
    let mut store = BlockStore::new(2);
    store.append_block(NewBlock::honest(0, BlockId::GENESIS, 1.0)).unwrap();
    let early = store.append_block(NewBlock::adversarial(0, BlockId::GENESIS, 0.5).published_at(0.8)).unwrap();
    assert_eq!(leader_sequence(&store, 3.0, 0.1, None).unwrap().leaders, vec![early]);
}

#[test]
fn duplicate_votes_in_a_lineage_count_once() {
    let mut store = BlockStore::new(4);
    let a = store.append_block(NewBlock::honest(0, BlockId::GENESIS, 1.0)).unwrap();
    let b = store.append_block(NewBlock::honest(0, BlockId::GENESIS, 1.01)).unwrap();
    let vote = |proposer| vec![Vote { height: 1, proposer }];
    let x = store
        .append_block(NewBlock::adversarial(1, BlockId::GENESIS, 2.0).with_votes(vote(b)).published_at(2.0))
        .unwrap();
    let y = store.append_block(NewBlock::adversarial(1, x, 2.1).with_votes(vote(a)).published_at(2.1)).unwrap();
    store.append_block(NewBlock::adversarial(1, y, 2.2).with_votes(vote(a)).published_at(2.2)).unwrap();
    store.append_block(NewBlock::honest(2, BlockId::GENESIS, 2.0).with_votes(vote(a))).unwrap();
    store.append_block(NewBlock::honest(3, BlockId::GENESIS, 2.0).with_votes(vote(b))).unwrap();
    // Chain 1 counts once, for b: b wins 2-1.
    assert_eq!(leader_sequence(&store, 3.0, 0.1, None).unwrap().leaders, vec![b]);
}

#[test]
fn elector_count_is_checked() {
    let (store, _, _) = ballot_store([true, true, true]);
    assert!(matches!(
        leader_sequence(&store, 3.0, 0.1, Some(&[BlockId::GENESIS])),
        Err(PrismError::ElectorCount { expected: 3, got: 1 })
    ));
}

#[test]
fn reference_links_on_a_small_trace() {
    let mut store = BlockStore::new(3);
    let v1 = store.append_block(NewBlock::honest(1, BlockId::GENESIS, 0.5)).unwrap();
    let v2 = store.append_block(NewBlock::honest(2, BlockId::GENESIS, 0.6)).unwrap();
    let v3 = store.append_block(NewBlock::honest(1, v1, 0.7)).unwrap();
    let late = store.append_block(NewBlock::honest(2, v2, 0.95)).unwrap();
    let withheld = store.append_block(NewBlock::adversarial(1, v3, 0.8)).unwrap();
    let b = store.append_block(NewBlock::honest(0, BlockId::GENESIS, 1.0)).unwrap();
    let refs = reference_links(&store, b, 0.1).unwrap();
    assert_eq!(refs, vec![BlockRef::new(1, v3), BlockRef::new(2, v2)]);
    assert!(!refs.contains(&BlockRef::new(2, late)));
    assert!(!refs.contains(&BlockRef::new(1, withheld)));

    // A twin of b that actually carries the links.
    let linked = store.append_block(NewBlock::honest(0, BlockId::GENESIS, 1.0).with_refs(refs)).unwrap();
    let c = store.append_block(NewBlock::honest(0, linked, 2.0)).unwrap();
    let next = reference_links(&store, c, 0.1).unwrap();
    // The orphaned twin is observable too.
    assert_eq!(next, vec![BlockRef::new(0, b), BlockRef::new(2, late)]);
}

#[test]
fn no_observable_blocks_means_no_links() {
    let mut store = BlockStore::new(2);
    let b = store.append_block(NewBlock::honest(0, BlockId::GENESIS, 1.0)).unwrap();
    assert!(reference_links(&store, b, 0.1).unwrap().is_empty());
}

fn two_epoch_trace() -> (BlockStore, BTreeMap<TxId, Transaction>, LeaderSequence) {
    let mut store = BlockStore::new(2);
    let a = store.append_block(NewBlock::honest(0, BlockId::GENESIS, 1.0).with_txs(vec![1, 2])).unwrap();
    let b = store.append_block(NewBlock::honest(0, a, 2.0).with_txs(vec![3, 1, 4])).unwrap();
    let registry: BTreeMap<TxId, Transaction> =
        [tx(1, &[10]), tx(2, &[11]), tx(3, &[10, 12]), tx(4, &[13])].into_iter().map(|t| (t.id, t)).collect();
    let seq = LeaderSequence { leaders: vec![a, b], elected_at: 3.0, electors: vec![BlockId::GENESIS] };
    (store, registry, seq)
}

#[test]
fn ledger_keeps_the_earlier_of_two_conflicts() {
    let (store, registry, seq) = two_epoch_trace();
    let ledger = build_ledger(&store, &seq, &registry);
    assert_eq!(ledger.tx_ids(), vec![1, 2, 4]);
    assert_eq!(ledger.entries.iter().map(|e| e.epoch).collect::<Vec<_>>(), vec![1, 1, 2]);
    assert_eq!(ledger, build_ledger(&store, &seq, &registry));
    assert_eq!(sanitize(ledger.entries.clone(), &registry), ledger.entries);
}

#[test]
fn empty_ledger_without_transactions() {
    let trace = run_simulation(&p(2), &SimOptions { txs_per_block: 0, ..SimOptions::default() }, &mut NullAdversary, 1)
        .unwrap();
    let seq = leader_sequence(&trace.store, 20.0, 0.4, None).unwrap();
    assert!(build_ledger(&trace.store, &seq, &trace.transactions).entries.is_empty());
}

#[test]
fn epochs_are_topologically_ordered() {
    let mut store = BlockStore::new(2);
    let v1 = store.append_block(NewBlock::honest(1, BlockId::GENESIS, 0.5)).unwrap();
    let v2 = store.append_block(NewBlock::honest(1, v1, 0.6)).unwrap();
    let b =
        store.append_block(NewBlock::honest(0, BlockId::GENESIS, 1.0).with_refs(vec![BlockRef::new(1, v2)])).unwrap();
    let seq = LeaderSequence { leaders: vec![b], elected_at: 2.0, electors: vec![v2] };
    let ledger = build_ledger(&store, &seq, &BTreeMap::new());
    assert_eq!(ledger.epochs, vec![vec![BlockRef::new(1, v1), BlockRef::new(1, v2), BlockRef::new(0, b)]]);
}

#[test]
fn credible_transactions() {
    let mut store = BlockStore::new(1);
    let a = store.append_block(NewBlock::honest(0, BlockId::GENESIS, 5.0).with_txs(vec![1, 3])).unwrap();
    store.append_block(NewBlock::honest(0, a, 7.0).with_txs(vec![2])).unwrap();
    let registry: BTreeMap<TxId, Transaction> =
        [tx(1, &[10]), tx(2, &[10]), tx(3, &[11]), tx(9, &[12])].into_iter().map(|t| (t.id, t)).collect();
    assert!(!tx_credible_until(&store, &registry, 9, 100.0));
    assert!(!tx_credible_until(&store, &registry, 1, 4.0));
    assert!(tx_credible_until(&store, &registry, 1, 6.0));
    assert!(!tx_credible_until(&store, &registry, 1, 7.0));
    assert!(tx_credible_until(&store, &registry, 3, 5.0));
    assert!(tx_credible_until(&store, &registry, 3, 1e9));
}

fn assert_payloads_match(trace: &Trace) {
    let delta = trace.params.delta_net;
    for c in trace.store.chains() {
        for b in c.blocks()[1..].iter().filter(|b| b.kind == Kind::Honest) {
            if c.index() == 0 {
                assert_eq!(b.refs, reference_links(&trace.store, b.id, delta).unwrap(), "refs of {:?}", b.block_ref());
            } else {
                assert_eq!(b.votes, honest_votes(&trace.store, b.block_ref(), delta), "votes of {:?}", b.block_ref());
            }
        }
    }
}

#[test]
fn simulator_payloads_match_the_pure_rules() {
    let params = ProtocolParams { beta: 0.3, horizon: 40.0, ..p(3) };
    let make: [fn() -> Box<dyn Strategy>; 3] =
        [|| Box::new(NullAdversary), || Box::new(SelfishMining::new()), || Box::new(CensorVotes::default())];
    for (i, make) in make.iter().enumerate() {
        for seed in 0..5 {
            let trace =
                run_simulation(&params, &SimOptions::default(), make().as_mut(), 100 * i as u64 + seed).unwrap();
            assert_payloads_match(&trace);
        }
    }
}

#[test]
fn all_honest_run_satisfies_every_prism_predicate() {
    let params = ProtocolParams { alpha: 2.0, beta: 0.0, delta_net: 0.05, delta_typ: 0.3, m: 3, horizon: 60.0 };
    let trace = run_simulation(&params, &SimOptions::default(), &mut NullAdversary, 9).unwrap();
    let analysis = PrismAnalysis::new(&trace);
    let grid: Vec<f64> = (0..=6).map(|i| 30.0 + 5.0 * i as f64).collect();
    for t in [30.0, 45.0, 60.0] {
        let report = check_prism_theorems(&analysis, t, 8, &grid, &params).unwrap();
        for (name, o) in report.outcomes() {
            if name != "prism_growth" {
                assert!(o.predicate_held, "{name} at {t}: {o:?}");
            }
        }
    }
}

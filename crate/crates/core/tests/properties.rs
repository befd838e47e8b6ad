use std::collections::HashSet;

use proptest::prelude::*;
use unicache::datagen::{generate_trace, random_fsm};
use unicache::fsm::lru_fsp;
use unicache::lz::{
    j_split_counts, offline_lz_oracle, parse_trace, run_lz_policy, LzPolicy, LzTree,
};
use unicache::markov::{offline_markov_hit_rate, MarkovSagePolicy};
use unicache::sage::{EtaConfig, SagePolicy};
use unicache::{run_policy, CachePolicy, FileId, PolicyRng, RequestTrace};

fn uniform_trace(n: usize, len: usize, seed: u64) -> RequestTrace {
    let mut rng = PolicyRng::new(seed);
    let ids: Vec<u32> = (0..len).map(|_| rng.index(n) as u32).collect();
    RequestTrace::from_ids(n, &ids).unwrap()
}

#[test]
fn lz_node_count_grows_sublinearly() {
    let full = uniform_trace(3, 1_000_000, 1);
    let points: Vec<(f64, f64)> = [1_000, 10_000, 100_000, 1_000_000]
        .iter()
        .map(|&t| {
            let tree = parse_trace(&full.truncated(t));
            assert!(tree.node_count() <= t + 1);
            ((t as f64).ln(), (tree.node_count() as f64).ln())
        })
        .collect();
    // Least-squares slope of ln c(T) against ln T.
    let n = points.len() as f64;
    let (sx, sy) = points
        .iter()
        .fold((0.0, 0.0), |a, p| (a.0 + p.0, a.1 + p.1));
    let (mx, my) = (sx / n, sy / n);
    let cov: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let var: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let slope = cov / var;
    assert!(slope < 1.0, "slope {slope}");
    // c(T) log_N T / T stays bounded.
    let tree = parse_trace(&full);
    let ratio = tree.node_count() as f64 * (1e6f64).ln() / 3f64.ln() / 1e6;
    assert!(ratio < 2.0, "{ratio}");
}

#[test]
fn lz_beats_sage_on_periodic_trace() {
    let period = [0u32, 1, 2, 3, 4, 0, 2, 4, 1, 3];
    let ids: Vec<u32> = period.iter().copied().cycle().take(20_000).collect();
    let t = RequestTrace::from_ids(5, &ids).unwrap();
    let (mut lz, mut sage) = (0.0, 0.0);
    for seed in 0..20 {
        lz += run_lz_policy(&t, 1, EtaConfig::Doubling, seed)
            .unwrap()
            .0
            .cumulative_hits as f64;
        let mut p = SagePolicy::new(5, 1, &EtaConfig::Doubling, seed).unwrap();
        sage += run_policy(&mut p, &t).unwrap().cumulative_hits as f64;
    }
    assert!(lz > sage, "lz {lz} sage {sage}");
}

#[test]
fn lz_oracle_miss_fraction_shrinks_on_generated_trace() {
    let fsm = random_fsm(4, 3, 1, 2).unwrap();
    let full = generate_trace(&fsm, 200_000, 3).unwrap();
    let fractions: Vec<f64> = [2_000, 20_000, 200_000]
        .iter()
        .map(|&t| offline_lz_oracle(&full.truncated(t), 1).unwrap().misses as f64 / t as f64)
        .collect();
    assert!(fractions.windows(2).all(|w| w[1] < w[0]), "{fractions:?}");
    assert!(fractions[2] < 0.1, "{fractions:?}");
}

#[test]
fn randomized_policies_reproduce_bit_for_bit() {
    let t = uniform_trace(6, 3_000, 5);
    let runs = |seed| {
        let mut policies: Vec<Box<dyn CachePolicy>> = vec![
            Box::new(SagePolicy::new(6, 2, &EtaConfig::Horizon(3_000), seed).unwrap()),
            Box::new(MarkovSagePolicy::new(6, 2, 2, EtaConfig::Doubling, seed).unwrap()),
            Box::new(LzPolicy::new(6, 2, EtaConfig::Fixed(0.3), seed).unwrap()),
            Box::new(lru_fsp(6, 2).unwrap()),
        ];
        policies
            .iter_mut()
            .map(|p| run_policy(p.as_mut(), &t).unwrap())
            .collect::<Vec<_>>()
    };
    assert_eq!(runs(11), runs(11));
    assert_ne!(runs(11)[0], runs(12)[0]);
}

#[test]
fn markov_oracle_is_monotone_in_order() {
    let fsm = random_fsm(10, 3, 2, 8).unwrap();
    let t = generate_trace(&fsm, 20_000, 9).unwrap();
    let rates: Vec<f64> = (0..=8)
        .map(|k| offline_markov_hit_rate(&t, k, 2).unwrap().hit_rate)
        .collect();
    assert!(rates.windows(2).all(|w| w[1] >= w[0]), "{rates:?}");
}

fn set_parse(t: &[FileId]) -> Vec<Vec<FileId>> {
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    let mut cur = Vec::new();
    for &x in t {
        cur.push(x);
        if seen.insert(cur.clone()) {
            out.push(std::mem::take(&mut cur));
        }
    }
    out
}

proptest! {
    #[test]
    fn lz_parse_matches_set_parser(n in 1usize..5, ids in proptest::collection::vec(0u32..5, 0..400)) {
        let ids: Vec<u32> = ids.into_iter().map(|x| x % n as u32).collect();
        let t = RequestTrace::from_ids(n, &ids).unwrap();
        let mut tree = LzTree::new(n);
        let mut phrases = Vec::new();
        for &x in t.requests() {
            if let Some(node) = tree.advance(x).unwrap() {
                phrases.push(tree.phrase(node));
            }
        }
        prop_assert_eq!(&phrases, &set_parse(t.requests()));
        prop_assert!(tree.node_count() <= t.len() + 1);
        prop_assert_eq!(tree.node_count() as u64, tree.phrase_count() + 1);
        for k in 0..4u32 {
            let (shallow, deep) = j_split_counts(&tree, k);
            prop_assert_eq!(shallow + deep, t.len() as u64);
            prop_assert!(shallow <= k as u64 * tree.node_count() as u64);
        }
    }

    #[test]
    fn markov_context_table_stays_small(
        n in 1usize..4, k in 0usize..4, ids in proptest::collection::vec(0u32..4, 0..200), seed in any::<u64>(),
    ) {
        let ids: Vec<u32> = ids.into_iter().map(|x| x % n as u32).collect();
        let t = RequestTrace::from_ids(n, &ids).unwrap();
        let mut p = MarkovSagePolicy::new(n, 1, k, EtaConfig::Fixed(0.5), seed).unwrap();
        run_policy(&mut p, &t).unwrap();
        let warm = if k > 0 { 1 } else { 0 };
        prop_assert!(p.contexts() <= (n.pow(k as u32) + warm).min(t.len().max(1)));
    }
}

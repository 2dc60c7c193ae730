mod common;

use common::*;
use likefair::mechanisms::{is_possible_like_outcome, run, run_traced};
use likefair::{dist, sincere_bids, BidProfile, MechanismKind};
use rand::Rng;

#[test]
fn runs_are_possible_outcomes() {
    let mut g = rng(1);
    for _ in 0..300 {
        let (k, m) = (g.random_range(1..5), g.random_range(1..9));
        let bids = BidProfile::new((0..k).map(|_| (0..m).map(|_| g.random_bool(0.5)).collect()).collect()).unwrap();
        for kind in MechanismKind::ALL {
            let seed = g.random();
            let alloc = run(kind, &bids, seed);
            assert!(is_possible_like_outcome(&bids, &alloc), "{kind} {bids} seed {seed}");
            assert_eq!(alloc, run(kind, &bids, seed));
        }
    }
}

#[test]
fn balanced_winner_has_the_fewest_items_among_bidders() {
    let mut g = rng(2);
    for _ in 0..300 {
        let (k, m) = (g.random_range(2..5), g.random_range(1..10));
        let bids = BidProfile::new((0..k).map(|_| (0..m).map(|_| g.random_bool(0.6)).collect()).collect()).unwrap();
        let (_, steps) = run_traced(MechanismKind::BalancedLike, &bids, g.random());
        for step in steps {
            if let Some(w) = step.winner {
                let min = bids.bidders(step.item).map(|i| step.counts_before[i]).min().unwrap();
                assert_eq!(step.counts_before[w], min);
                assert!(step.eligible.contains(&w));
            }
        }
    }
}

/// In every outcome each agent holds at least one item per `k` items it
/// bid on so far, at every prefix of the arrival order.
#[test]
fn balanced_guarantee_holds_exhaustively() {
    for k in 1..=3 {
        for m in 1..=5 {
            for instance in all_zero_one(k, m) {
                let bids = sincere_bids(&instance);
                let outcomes = dist::enumerate_outcomes(MechanismKind::BalancedLike, &bids, &budget()).unwrap();
                for (alloc, _) in outcomes.outcomes() {
                    for agent in 0..k {
                        let (mut held, mut liked) = (0, 0);
                        for item in 0..m {
                            liked += bids.bids(agent, item) as usize;
                            held += (alloc.owner(item) == Some(agent)) as usize;
                            assert!(held >= liked / k, "{bids} {alloc}");
                        }
                    }
                }
            }
        }
    }
}

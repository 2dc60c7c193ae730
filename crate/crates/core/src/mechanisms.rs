//! Single randomized runs of Like and Balanced Like.
//!
//! Runs draw from ChaCha8 seeded with `seed_from_u64`, which is portable and
//! value-stable, so equal seeds give identical allocations on every platform.
//! Exactly one `random_range` draw is made per contested item (an item with at
//! least two eligible agents); uncontested items consume no randomness.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::model::{Allocation, BidProfile};

pub type RngSeed = u64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum MechanismKind {
    /// Uniform draw among everyone who likes the item.
    Like,
    /// Uniform draw among likers holding the fewest items so far.
    BalancedLike,
}

impl MechanismKind {
    pub const ALL: [MechanismKind; 2] = [MechanismKind::Like, MechanismKind::BalancedLike];

    pub fn name(self) -> &'static str {
        match self {
            MechanismKind::Like => "like",
            MechanismKind::BalancedLike => "balanced",
        }
    }
}

impl fmt::Display for MechanismKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for MechanismKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "like" => Ok(MechanismKind::Like),
            "balanced" | "balanced-like" => Ok(MechanismKind::BalancedLike),
            other => Err(format!("unknown mechanism {other:?} (expected like or balanced)")),
        }
    }
}

/// Agents that may receive `item` given the current per-agent item counts.
/// Pushes into `out` (cleared first) to avoid allocating in hot loops.
pub fn eligible_into(kind: MechanismKind, bids: &BidProfile, item: usize, counts: &[usize], out: &mut Vec<usize>) {
    out.clear();
    out.extend(bids.bidders(item));
    if kind == MechanismKind::BalancedLike {
        if let Some(&min) = out.iter().map(|&i| &counts[i]).min() {
            out.retain(|&i| counts[i] == min);
        }
    }
}

pub fn eligible(kind: MechanismKind, bids: &BidProfile, item: usize, counts: &[usize]) -> Vec<usize> {
    let mut out = Vec::new();
    eligible_into(kind, bids, item, counts, &mut out);
    out
}

/// One step of a traced run.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Step {
    pub item: usize,
    pub counts_before: Vec<usize>,
    pub eligible: Vec<usize>,
    pub winner: Option<usize>,
}

/// Runs a mechanism and records every draw.
pub fn run_traced(kind: MechanismKind, bids: &BidProfile, seed: RngSeed) -> (Allocation, Vec<Step>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut counts = vec![0usize; bids.num_agents()];
    let mut owner = Vec::with_capacity(bids.num_items());
    let mut steps = Vec::with_capacity(bids.num_items());
    let mut pool = Vec::new();
    for item in 0..bids.num_items() {
        eligible_into(kind, bids, item, &counts, &mut pool);
        let winner = match pool.len() {
            0 => None,
            1 => Some(pool[0]),
            n => Some(pool[rng.random_range(0..n)]),
        };
        steps.push(Step { item, counts_before: counts.clone(), eligible: pool.clone(), winner });
        if let Some(w) = winner {
            counts[w] += 1;
        }
        owner.push(winner);
    }
    (Allocation::new(owner), steps)
}

pub fn run(kind: MechanismKind, bids: &BidProfile, seed: RngSeed) -> Allocation {
    run_traced(kind, bids, seed).0
}

pub fn like_run(bids: &BidProfile, seed: RngSeed) -> Allocation {
    run(MechanismKind::Like, bids, seed)
}

pub fn balanced_like_run(bids: &BidProfile, seed: RngSeed) -> Allocation {
    run(MechanismKind::BalancedLike, bids, seed)
}

/// Every allocated item went to one of its bidders, and no item with a
/// bidder was left unallocated.
pub fn is_possible_like_outcome(bids: &BidProfile, alloc: &Allocation) -> bool {
    alloc.num_items() == bids.num_items()
        && (0..bids.num_items()).all(|item| match alloc.owner(item) {
            Some(agent) => agent < bids.num_agents() && bids.bids(agent, item),
            None => bids.num_bidders(item) == 0,
        })
}

/// The unique outcome when no item has two or more bidders.
pub fn necessary_like_outcome(bids: &BidProfile) -> Result<Allocation> {
    let mut owner = Vec::with_capacity(bids.num_items());
    for item in 0..bids.num_items() {
        let mut bidders = bids.bidders(item);
        let first = bidders.next();
        let extra = bidders.count();
        if extra > 0 {
            return Err(Error::NotUnique { item, bidders: extra + 1 });
        }
        owner.push(first);
    }
    Ok(Allocation::new(owner))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{sincere_bids, Instance};

    fn three_item_bids() -> BidProfile {
        BidProfile::from_rows(&["111", "101", "010"]).unwrap()
    }

    #[test]
    fn nobody_bids() {
        for kind in MechanismKind::ALL {
            assert_eq!(run(kind, &BidProfile::empty(2, 3), 7), Allocation::unallocated(3));
        }
    }

    #[test]
    fn single_bidders_win_regardless_of_seed() {
        let bids = BidProfile::from_rows(&["100", "011"]).unwrap();
        for seed in 0..20 {
            let expected = Allocation::new(vec![Some(0), Some(1), Some(1)]);
            assert_eq!(like_run(&bids, seed), expected);
            assert_eq!(balanced_like_run(&bids, seed), expected);
        }
    }

    #[test]
    fn item_b_never_goes_to_agent_two() {
        for seed in 0..100 {
            let alloc = like_run(&three_item_bids(), seed);
            assert_ne!(alloc.owner(1), Some(1));
            assert!(alloc.owner(1).is_some());
        }
    }

    #[test]
    fn balanced_is_deterministic_on_the_four_item_instance() {
        let eps = crate::rational::frac(1, 100);
        let one = crate::rational::one();
        let zero = crate::rational::zero();
        let two_eps = &eps + &eps;
        let inst = Instance::new(vec![
            vec![eps.clone(), &one - &two_eps, zero.clone(), eps.clone()],
            vec![zero, eps.clone(), eps.clone(), &one - &two_eps],
        ])
        .unwrap();
        let bids = sincere_bids(&inst);
        for seed in 0..20 {
            let (alloc, steps) = run_traced(MechanismKind::BalancedLike, &bids, seed);
            assert_eq!(alloc, Allocation::new(vec![Some(0), Some(1), Some(1), Some(0)]));
            assert!(steps.iter().all(|s| s.eligible.len() == 1));
        }
    }

    #[test]
    fn single_agent_gets_everything() {
        let alloc = balanced_like_run(&BidProfile::full(1, 5), 3);
        assert_eq!(alloc.bundle_size(0), 5);
    }

    #[test]
    fn lagging_agent_gets_the_second_item() {
        let bids = BidProfile::full(2, 2);
        let mut first_winners = std::collections::BTreeSet::new();
        for seed in 0..64 {
            let alloc = balanced_like_run(&bids, seed);
            let first = alloc.owner(0).unwrap();
            first_winners.insert(first);
            assert_eq!(alloc.owner(1), Some(1 - first));
        }
        assert_eq!(first_winners.len(), 2);
    }

    #[test]
    fn possible_outcomes() {
        let bids = three_item_bids();
        assert!(is_possible_like_outcome(&bids, &Allocation::new(vec![Some(1), Some(0), Some(0)])));
        assert!(!is_possible_like_outcome(&bids, &Allocation::new(vec![Some(2), Some(0), Some(0)])));
        let sparse = BidProfile::from_rows(&["100", "000"]).unwrap();
        assert!(!is_possible_like_outcome(&sparse, &Allocation::unallocated(3)));
        assert!(is_possible_like_outcome(&sparse, &Allocation::new(vec![Some(0), None, None])));
    }

    #[test]
    fn necessary_outcomes() {
        let disjoint = BidProfile::from_rows(&["1001", "0100"]).unwrap();
        assert_eq!(necessary_like_outcome(&disjoint), Ok(Allocation::new(vec![Some(0), Some(1), None, Some(0)])));
        assert_eq!(necessary_like_outcome(&three_item_bids()), Err(Error::NotUnique { item: 0, bidders: 2 }));
        assert_eq!(necessary_like_outcome(&BidProfile::empty(3, 2)), Ok(Allocation::unallocated(2)));
    }

    #[test]
    fn same_seed_same_run() {
        let bids = BidProfile::full(4, 12);
        for kind in MechanismKind::ALL {
            assert_eq!(run(kind, &bids, 99), run(kind, &bids, 99));
        }
    }

    #[test]
    fn parses_kind_names() {
        assert_eq!("like".parse(), Ok(MechanismKind::Like));
        assert_eq!("balanced".parse(), Ok(MechanismKind::BalancedLike));
        assert!("serial".parse::<MechanismKind>().is_err());
    }
}

//! Fixtures and helpers shared by the integration tests.
#![allow(dead_code)]

use std::collections::BTreeSet;

use likefair::mechanisms::eligible;
use likefair::rational::{frac, int, one, Rational};
use likefair::{dist, Budget, CountState, Instance, MechanismKind};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn budget() -> Budget {
    Budget::default()
}

/// Three agents, items a b c.
pub fn three_item() -> Instance {
    Instance::from_integers(&[&[1, 1, 1], &[1, 0, 1], &[0, 1, 0]]).unwrap()
}

pub fn two_by_two() -> Instance {
    Instance::new(vec![vec![frac(1, 2), frac(1, 2)], vec![frac(1, 4), frac(3, 4)]]).unwrap()
}

/// Three agents, items a..f.
pub fn six_item() -> Instance {
    Instance::from_integers(&[&[1, 1, 1, 0, 0, 0], &[1, 0, 1, 0, 1, 1], &[1, 1, 0, 1, 0, 1]]).unwrap()
}

/// Agent `i` values only item `i`.
pub fn diagonal(k: usize) -> Instance {
    Instance::new((0..k).map(|i| (0..k).map(|j| int((i == j) as i64)).collect()).collect()).unwrap()
}

/// `k*k` items; the first agent likes the first `k`, everyone else likes all.
pub fn square(k: usize) -> Instance {
    let rows = (0..k).map(|i| (0..k * k).map(|j| int((i > 0 || j < k) as i64)).collect()).collect();
    Instance::new(rows).unwrap()
}

/// Two agents whose large values sit on items the other agent takes first.
pub fn crossed(eps: &Rational) -> Instance {
    let big = one() - eps * int(2);
    Instance::new(vec![
        vec![eps.clone(), big.clone(), int(0), eps.clone()],
        vec![int(0), eps.clone(), eps.clone(), big],
    ])
    .unwrap()
}

/// Agent `i` values item `i` at `1 - (k-1)eps` and every other item at `eps`.
pub fn near_diagonal(k: usize, eps: &Rational) -> Instance {
    let high = one() - eps * int(k as i64 - 1);
    Instance::new((0..k).map(|i| (0..k).map(|j| if i == j { high.clone() } else { eps.clone() }).collect()).collect())
        .unwrap()
}

/// Every 0/1 instance of the given shape.
pub fn all_zero_one(k: usize, m: usize) -> impl Iterator<Item = Instance> {
    (0u64..1 << (k * m)).map(move |mask| {
        let rows = (0..k).map(|i| (0..m).map(|j| int((mask >> (i * m + j) & 1) as i64)).collect()).collect();
        Instance::new(rows).unwrap()
    })
}

pub fn random_zero_one(rng: &mut ChaCha8Rng, k: usize, m: usize) -> Instance {
    let rows = (0..k).map(|_| (0..m).map(|_| int(rng.random_range(0..2))).collect()).collect();
    Instance::new(rows).unwrap()
}

/// Small non-negative fractions, about a quarter of them zero.
pub fn random_rational(rng: &mut ChaCha8Rng, k: usize, m: usize) -> Instance {
    let rows = (0..k)
        .map(|_| {
            (0..m)
                .map(|_| {
                    if rng.random_range(0..4) == 0 {
                        int(0)
                    } else {
                        frac(rng.random_range(1..10), rng.random_range(1..7))
                    }
                })
                .collect()
        })
        .collect();
    Instance::new(rows).unwrap()
}

/// Count states `(x, y)` reachable before each round, for two agents.
pub fn reachable_states(kind: MechanismKind, bids: &likefair::BidProfile) -> Vec<BTreeSet<(usize, usize)>> {
    let mut layers = vec![BTreeSet::from([(0, 0)])];
    for item in 0..bids.num_items() {
        let mut next = BTreeSet::new();
        for &(x, y) in layers.last().unwrap() {
            let pool = eligible(kind, bids, item, &[x, y]);
            if pool.is_empty() {
                next.insert((x, y));
            }
            for a in pool {
                next.insert(if a == 0 { (x + 1, y) } else { (x, y + 1) });
            }
        }
        layers.push(next);
    }
    layers
}

/// Value of the subtree rooted at round `round` with counts `(x, y)` for the
/// first agent under sincere bids: utility already held (`x`, as every item
/// held was bid on and is worth 1) plus the expected utility still to come.
pub fn tree_value(instance: &Instance, round: usize, x: usize, y: usize) -> Rational {
    let bids = likefair::sincere_bids(instance);
    let start = CountState { counts: vec![x, y], round };
    let future =
        dist::subtree_expected_utility(MechanismKind::BalancedLike, instance, &bids, 0, &start, &budget()).unwrap();
    future + int(x as i64)
}

#[derive(Debug, Clone)]
pub struct InequalityViolation {
    pub inequality: usize,
    pub instance: Instance,
    pub round: usize,
    pub state: (usize, usize),
    pub left: Rational,
    pub right: Rational,
}

/// Checks, at every reachable `(round, x, y)`,
/// `U(x, y) >= U(x-1, y+1)`, `U(x, y) >= U(x-1, y)` and `U(x, y) >= U(x, y+1)`.
pub fn inequality_violations(instance: &Instance) -> Vec<InequalityViolation> {
    let bids = likefair::sincere_bids(instance);
    let mut found = Vec::new();
    for (round, layer) in reachable_states(MechanismKind::BalancedLike, &bids).into_iter().enumerate() {
        for (x, y) in layer {
            let here = tree_value(instance, round, x, y);
            let mut others = Vec::new();
            if x > 0 {
                others.push((1, tree_value(instance, round, x - 1, y + 1)));
                others.push((2, tree_value(instance, round, x - 1, y)));
            }
            others.push((3, tree_value(instance, round, x, y + 1)));
            for (inequality, right) in others {
                if here < right {
                    found.push(InequalityViolation {
                        inequality,
                        instance: instance.clone(),
                        round,
                        state: (x, y),
                        left: here.clone(),
                        right,
                    });
                }
            }
        }
    }
    found
}

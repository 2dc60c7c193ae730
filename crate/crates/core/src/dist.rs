//! Exact outcome distributions and expected utilities.
//!
//! Three routes are provided:
//! * the closed form for Like, where agent `i` wins item `j` with probability
//!   `1/q_j` (`q_j` = number of bidders on `j`);
//! * a forward dynamic program for Balanced Like over count vectors, which
//!   are a sufficient statistic for the rest of the process;
//! * a brute-force expansion of the allocation tree, used as the oracle for
//!   both and for ex post quantities.

use std::ops::AddAssign;

use num_bigint::{BigInt, BigUint};
use num_traits::{One, Zero};

use crate::budget::Budget;
use crate::error::{Error, Result};
use crate::mechanisms::{eligible_into, MechanismKind};
use crate::model::{Allocation, BidProfile, CountState, Instance, OutcomeDistribution};
use crate::rational::{int, Rational};

/// `p[i][j]`: probability that agent `i` receives item `j`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ItemProbabilityMatrix {
    p: Vec<Vec<Rational>>,
}

impl ItemProbabilityMatrix {
    pub fn get(&self, agent: usize, item: usize) -> &Rational {
        &self.p[agent][item]
    }

    pub fn rows(&self) -> &[Vec<Rational>] {
        &self.p
    }

    pub fn num_agents(&self) -> usize {
        self.p.len()
    }

    pub fn num_items(&self) -> usize {
        self.p.first().map_or(0, Vec::len)
    }

    pub fn column_sum(&self, item: usize) -> Rational {
        self.p.iter().map(|row| &row[item]).sum()
    }

    /// `EU[i] = sum_j u_i(j) * p[i][j]`.
    pub fn expected_utilities(&self, instance: &Instance) -> Vec<Rational> {
        self.p.iter().enumerate().map(|(i, row)| row.iter().zip(instance.row(i)).map(|(p, u)| p * u).sum()).collect()
    }

    /// `E[i][j] = sum_t u_i(t) * p[j][t]`; valid for any mechanism by
    /// linearity of expectation.
    pub fn cross_utilities(&self, instance: &Instance) -> CrossUtilityMatrix {
        let k = self.p.len();
        let e = (0..k)
            .map(|i| (0..k).map(|j| self.p[j].iter().zip(instance.row(i)).map(|(p, u)| p * u).sum()).collect())
            .collect();
        CrossUtilityMatrix { e }
    }
}

/// `E[i][j]`: expected utility agent `i` assigns to agent `j`'s final bundle.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CrossUtilityMatrix {
    e: Vec<Vec<Rational>>,
}

impl CrossUtilityMatrix {
    pub fn get(&self, i: usize, j: usize) -> &Rational {
        &self.e[i][j]
    }

    pub fn rows(&self) -> &[Vec<Rational>] {
        &self.e
    }

    pub fn own(&self) -> Vec<Rational> {
        (0..self.e.len()).map(|i| self.e[i][i].clone()).collect()
    }
}

pub fn like_item_probabilities(bids: &BidProfile) -> ItemProbabilityMatrix {
    let k = bids.num_agents();
    let m = bids.num_items();
    let mut p = vec![vec![Rational::zero(); m]; k];
    for item in 0..m {
        let q = bids.num_bidders(item);
        if q == 0 {
            continue;
        }
        let share = Rational::new(BigInt::one(), BigInt::from(q));
        for agent in bids.bidders(item) {
            p[agent][item] = share.clone();
        }
    }
    ItemProbabilityMatrix { p }
}

pub fn like_expected_utilities(instance: &Instance, bids: &BidProfile) -> Result<Vec<Rational>> {
    bids.matches(instance)?;
    Ok(like_item_probabilities(bids).expected_utilities(instance))
}

/// Probability mass at a fixed scale. Every split divides by the size of an
/// eligible set, which divides `lcm(1..=k)`, so masses stay integral when the
/// initial mass is `lcm(1..=k)^m`.
pub(crate) trait Mass: Clone + Zero + AddAssign {
    fn split(&self, parts: usize) -> Self;
    fn to_bigint(&self) -> BigInt;
}

impl Mass for u128 {
    fn split(&self, parts: usize) -> Self {
        debug_assert_eq!(self % parts as u128, 0);
        self / parts as u128
    }

    fn to_bigint(&self) -> BigInt {
        BigInt::from(*self)
    }
}

impl Mass for BigUint {
    fn split(&self, parts: usize) -> Self {
        self / parts
    }

    fn to_bigint(&self) -> BigInt {
        BigInt::from(self.clone())
    }
}

pub(crate) fn lcm_upto(k: usize) -> u64 {
    (1..=k as u64).fold(1, num_integer::lcm)
}

const COUNT_BITS: usize = 8;
const MAX_DP_AGENTS: usize = 128 / COUNT_BITS;

fn dp_supported(bids: &BidProfile) -> Result<()> {
    if bids.num_agents() > MAX_DP_AGENTS || bids.num_items() >= 1 << COUNT_BITS {
        return Err(Error::Unsupported(format!(
            "the Balanced Like DP handles at most {MAX_DP_AGENTS} agents and {} items",
            (1 << COUNT_BITS) - 1
        )));
    }
    Ok(())
}

fn count_of(key: u128, agent: usize) -> usize {
    ((key >> (agent * COUNT_BITS)) & ((1 << COUNT_BITS) - 1)) as usize
}

/// Forward DP over packed count vectors. Returns `p[i][j] * scale` where
/// `scale` is the initial mass.
pub(crate) fn balanced_masses<M: Mass>(bids: &BidProfile, scale: M, budget: &Budget) -> Result<Vec<Vec<M>>> {
    dp_supported(bids)?;
    let k = bids.num_agents();
    let m = bids.num_items();
    let mut p = vec![vec![M::zero(); m]; k];
    let mut states: Vec<(u128, M)> = vec![(0, scale)];
    let mut next: Vec<(u128, M)> = Vec::new();
    let mut bidders: Vec<usize> = Vec::with_capacity(k);
    let mut pool: Vec<usize> = Vec::with_capacity(k);
    for item in 0..m {
        bidders.clear();
        bidders.extend(bids.bidders(item));
        if bidders.is_empty() {
            continue;
        }
        next.clear();
        for (key, mass) in states.drain(..) {
            let min = bidders.iter().map(|&i| count_of(key, i)).min().unwrap();
            pool.clear();
            pool.extend(bidders.iter().copied().filter(|&i| count_of(key, i) == min));
            let share = if pool.len() == 1 { mass } else { mass.split(pool.len()) };
            for &agent in &pool {
                p[agent][item] += share.clone();
                next.push((key + (1u128 << (agent * COUNT_BITS)), share.clone()));
            }
        }
        next.sort_unstable_by_key(|(key, _)| *key);
        for (key, mass) in next.drain(..) {
            match states.last_mut() {
                Some((last, acc)) if *last == key => *acc += mass,
                _ => states.push((key, mass)),
            }
        }
        if states.len() as u64 > budget.dp_states {
            return Err(Error::BudgetExceeded { what: "DP state", limit: budget.dp_states });
        }
    }
    Ok(p)
}

/// `lcm(1..=k)^m` if it fits in a `u128`.
pub(crate) fn u128_scale(k: usize, m: usize) -> Option<u128> {
    (lcm_upto(k) as u128).checked_pow(u32::try_from(m).ok()?)
}

fn to_probabilities<M: Mass>(masses: Vec<Vec<M>>, scale: &BigInt) -> ItemProbabilityMatrix {
    ItemProbabilityMatrix {
        p: masses
            .into_iter()
            .map(|row| row.iter().map(|m| Rational::new(m.to_bigint(), scale.clone())).collect())
            .collect(),
    }
}

pub fn balanced_like_item_probabilities(bids: &BidProfile, budget: &Budget) -> Result<ItemProbabilityMatrix> {
    let (k, m) = (bids.num_agents(), bids.num_items());
    match u128_scale(k, m) {
        Some(scale) => Ok(to_probabilities(balanced_masses(bids, scale, budget)?, &BigInt::from(scale))),
        None => {
            let scale = BigUint::from(lcm_upto(k)).pow(m as u32);
            let masses = balanced_masses(bids, scale.clone(), budget)?;
            Ok(to_probabilities(masses, &BigInt::from(scale)))
        }
    }
}

/// Item probabilities and expected utilities of Balanced Like via the
/// count-state dynamic program.
pub fn balanced_like_dp(
    instance: &Instance,
    bids: &BidProfile,
    budget: &Budget,
) -> Result<(ItemProbabilityMatrix, Vec<Rational>)> {
    bids.matches(instance)?;
    let p = balanced_like_item_probabilities(bids, budget)?;
    let eu = p.expected_utilities(instance);
    Ok((p, eu))
}

/// Item probabilities by the fast route for `kind`.
pub fn item_probabilities(kind: MechanismKind, bids: &BidProfile, budget: &Budget) -> Result<ItemProbabilityMatrix> {
    match kind {
        MechanismKind::Like => Ok(like_item_probabilities(bids)),
        MechanismKind::BalancedLike => balanced_like_item_probabilities(bids, budget),
    }
}

pub fn expected_utilities(
    kind: MechanismKind,
    instance: &Instance,
    bids: &BidProfile,
    budget: &Budget,
) -> Result<Vec<Rational>> {
    bids.matches(instance)?;
    Ok(item_probabilities(kind, bids, budget)?.expected_utilities(instance))
}

/// Expected utility each agent assigns to each agent's bundle. Only item
/// marginals are needed, so Like uses the closed form and Balanced Like the DP.
pub fn cross_expected_utilities(
    kind: MechanismKind,
    instance: &Instance,
    bids: &BidProfile,
    budget: &Budget,
) -> Result<CrossUtilityMatrix> {
    bids.matches(instance)?;
    Ok(item_probabilities(kind, bids, budget)?.cross_utilities(instance))
}

struct Walker<'a> {
    kind: MechanismKind,
    bids: &'a BidProfile,
    owner: Vec<Option<usize>>,
    counts: Vec<usize>,
    nodes: u64,
    limit: u64,
}

impl Walker<'_> {
    fn expand(
        &mut self,
        item: usize,
        prob: &Rational,
        visit: &mut dyn FnMut(&[Option<usize>], &Rational),
    ) -> Result<()> {
        self.nodes += 1;
        if self.nodes > self.limit {
            return Err(Error::BudgetExceeded { what: "allocation tree node", limit: self.limit });
        }
        if item == self.bids.num_items() {
            visit(&self.owner, prob);
            return Ok(());
        }
        let mut pool = Vec::new();
        eligible_into(self.kind, self.bids, item, &self.counts, &mut pool);
        if pool.is_empty() {
            return self.expand(item + 1, prob, visit);
        }
        let branch = prob / int(pool.len() as i64);
        for agent in pool {
            self.owner[item] = Some(agent);
            self.counts[agent] += 1;
            self.expand(item + 1, &branch, visit)?;
            self.counts[agent] -= 1;
        }
        self.owner[item] = None;
        Ok(())
    }
}

/// Visits every leaf of the allocation tree rooted at `start` with its
/// probability conditional on reaching `start`. Owners of items before
/// `start.round` are reported as `None`.
pub fn walk_allocation_tree(
    kind: MechanismKind,
    bids: &BidProfile,
    start: &CountState,
    budget: &Budget,
    visit: &mut dyn FnMut(&[Option<usize>], &Rational),
) -> Result<()> {
    if start.counts.len() != bids.num_agents() || start.round > bids.num_items() {
        return Err(Error::DimensionMismatch("start state does not fit the bid profile".into()));
    }
    let mut walker = Walker {
        kind,
        bids,
        owner: vec![None; bids.num_items()],
        counts: start.counts.clone(),
        nodes: 0,
        limit: budget.tree_nodes,
    };
    walker.expand(start.round, &Rational::one(), visit)
}

/// Exact distribution over final allocations, by expanding the allocation tree.
pub fn enumerate_outcomes(kind: MechanismKind, bids: &BidProfile, budget: &Budget) -> Result<OutcomeDistribution> {
    let mut leaves = Vec::new();
    walk_allocation_tree(kind, bids, &CountState::initial(bids.num_agents()), budget, &mut |owner, p| {
        leaves.push((Allocation::new(owner.to_vec()), p.clone()))
    })?;
    Ok(OutcomeDistribution::new(leaves))
}

/// Item probabilities read off an outcome distribution.
pub fn marginals(dist: &OutcomeDistribution, num_agents: usize, num_items: usize) -> ItemProbabilityMatrix {
    let mut p = vec![vec![Rational::zero(); num_items]; num_agents];
    for (alloc, prob) in dist.outcomes() {
        for (item, owner) in alloc.owners().iter().enumerate() {
            if let Some(agent) = owner {
                p[*agent][item] += prob;
            }
        }
    }
    ItemProbabilityMatrix { p }
}

/// Expected utility `agent` collects from items `start.round..m` onward, when
/// the process sits in `start`. Computed by enumerating the subtree.
pub fn subtree_expected_utility(
    kind: MechanismKind,
    instance: &Instance,
    bids: &BidProfile,
    agent: usize,
    start: &CountState,
    budget: &Budget,
) -> Result<Rational> {
    bids.matches(instance)?;
    let mut total = Rational::zero();
    walk_allocation_tree(kind, bids, start, budget, &mut |owner, p| {
        let won: Rational = owner
            .iter()
            .enumerate()
            .filter(|(_, o)| **o == Some(agent))
            .map(|(item, _)| instance.utility(agent, item))
            .sum();
        total += won * p;
    })?;
    Ok(total)
}

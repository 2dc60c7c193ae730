//! Instances, bid profiles and allocations.
//!
//! Items are indexed `0..m` in arrival order and agents `0..k`. All types are
//! immutable once built; "modifications" return new values.

use std::fmt;

use num_traits::{One, Signed, Zero};

use crate::error::{Error, Result};
use crate::rational::{int, Rational};

/// `k` agents with a `k x m` matrix of non-negative utilities over items that
/// arrive in column order.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Instance {
    utilities: Vec<Vec<Rational>>,
}

/// Checks non-negativity and, if requested, that every row sums to exactly 1.
pub fn validate_utilities(rows: &[Vec<Rational>], require_normalized: bool) -> Result<()> {
    for (agent, row) in rows.iter().enumerate() {
        if let Some(item) = row.iter().position(|u| u.is_negative()) {
            return Err(Error::NegativeUtility { agent, item });
        }
    }
    if require_normalized {
        for (agent, row) in rows.iter().enumerate() {
            let total: Rational = row.iter().sum();
            if !total.is_one() {
                return Err(Error::NotNormalized { agent });
            }
        }
    }
    Ok(())
}

fn check_shape<T>(rows: &[Vec<T>]) -> Result<(usize, usize)> {
    let k = rows.len();
    if k == 0 {
        return Err(Error::DimensionMismatch("at least one agent is required".into()));
    }
    let m = rows[0].len();
    if m == 0 {
        return Err(Error::DimensionMismatch("at least one item is required".into()));
    }
    if let Some(bad) = rows.iter().position(|r| r.len() != m) {
        return Err(Error::DimensionMismatch(format!("row {bad} has {} entries, expected {m}", rows[bad].len())));
    }
    Ok((k, m))
}

impl Instance {
    /// Builds an instance from one utility row per agent. Rows must be
    /// non-empty, of equal length, and free of negative entries.
    pub fn new(utilities: Vec<Vec<Rational>>) -> Result<Self> {
        check_shape(&utilities)?;
        validate_utilities(&utilities, false)?;
        Ok(Instance { utilities })
    }

    pub fn from_integers(rows: &[&[i64]]) -> Result<Self> {
        Self::new(rows.iter().map(|r| r.iter().map(|&u| int(u)).collect()).collect())
    }

    pub fn num_agents(&self) -> usize {
        self.utilities.len()
    }

    pub fn num_items(&self) -> usize {
        self.utilities[0].len()
    }

    pub fn utility(&self, agent: usize, item: usize) -> &Rational {
        &self.utilities[agent][item]
    }

    pub fn row(&self, agent: usize) -> &[Rational] {
        &self.utilities[agent]
    }

    pub fn rows(&self) -> &[Vec<Rational>] {
        &self.utilities
    }

    pub fn validate(&self, require_normalized: bool) -> Result<()> {
        validate_utilities(&self.utilities, require_normalized)
    }

    /// Every utility is exactly 0 or 1.
    pub fn is_zero_one(&self) -> bool {
        self.utilities.iter().flatten().all(|u| u.is_zero() || u.is_one())
    }

    /// Utility `agent` assigns to the bundle that `alloc` gives to `owner`.
    pub fn bundle_utility(&self, agent: usize, alloc: &Allocation, owner: usize) -> Rational {
        alloc.bundle(owner).map(|item| &self.utilities[agent][item]).sum()
    }

    /// Sum of `agent`'s utilities over all items.
    pub fn total_utility(&self, agent: usize) -> Rational {
        self.utilities[agent].iter().sum()
    }

    /// Same agents, items reordered so that new item `t` is old item `order[t]`.
    pub fn permute_items(&self, order: &[usize]) -> Result<Self> {
        let m = self.num_items();
        let mut seen = vec![false; m];
        if order.len() != m || order.iter().any(|&j| j >= m || std::mem::replace(&mut seen[j], true)) {
            return Err(Error::DimensionMismatch("item order is not a permutation".into()));
        }
        Ok(Instance {
            utilities: self.utilities.iter().map(|row| order.iter().map(|&j| row[j].clone()).collect()).collect(),
        })
    }
}

/// Declared likes: `bids[i][j]` is true iff agent `i` says it likes item `j`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BidProfile {
    bids: Vec<Vec<bool>>,
}

impl BidProfile {
    pub fn new(bids: Vec<Vec<bool>>) -> Result<Self> {
        check_shape(&bids)?;
        Ok(BidProfile { bids })
    }

    /// Parses rows such as `"101"`; handy for fixtures.
    pub fn from_rows(rows: &[&str]) -> Result<Self> {
        let mut bids = Vec::with_capacity(rows.len());
        for (line, row) in rows.iter().enumerate() {
            let parsed: Option<Vec<bool>> = row
                .chars()
                .map(|c| match c {
                    '0' => Some(false),
                    '1' => Some(true),
                    _ => None,
                })
                .collect();
            bids.push(parsed.ok_or_else(|| Error::Parse {
                line: line + 1,
                message: format!("bid row {row:?} must contain only '0' and '1'"),
            })?);
        }
        Self::new(bids)
    }

    pub fn empty(num_agents: usize, num_items: usize) -> Self {
        BidProfile { bids: vec![vec![false; num_items]; num_agents] }
    }

    pub fn full(num_agents: usize, num_items: usize) -> Self {
        BidProfile { bids: vec![vec![true; num_items]; num_agents] }
    }

    pub fn num_agents(&self) -> usize {
        self.bids.len()
    }

    pub fn num_items(&self) -> usize {
        self.bids[0].len()
    }

    pub fn bids(&self, agent: usize, item: usize) -> bool {
        self.bids[agent][item]
    }

    pub fn row(&self, agent: usize) -> &[bool] {
        &self.bids[agent]
    }

    pub fn rows(&self) -> &[Vec<bool>] {
        &self.bids
    }

    /// Copy of this profile with `agent`'s row replaced.
    pub fn with_row(&self, agent: usize, row: Vec<bool>) -> Self {
        assert_eq!(row.len(), self.num_items(), "bid row length");
        let mut bids = self.bids.clone();
        bids[agent] = row;
        BidProfile { bids }
    }

    pub fn like_count(&self, agent: usize) -> usize {
        self.bids[agent].iter().filter(|&&b| b).count()
    }

    pub fn bidders(&self, item: usize) -> impl Iterator<Item = usize> + '_ {
        (0..self.bids.len()).filter(move |&i| self.bids[i][item])
    }

    pub fn num_bidders(&self, item: usize) -> usize {
        self.bidders(item).count()
    }

    pub fn matches(&self, instance: &Instance) -> Result<()> {
        if self.num_agents() != instance.num_agents() || self.num_items() != instance.num_items() {
            return Err(Error::DimensionMismatch(format!(
                "bids are {}x{} but the instance is {}x{}",
                self.num_agents(),
                self.num_items(),
                instance.num_agents(),
                instance.num_items()
            )));
        }
        Ok(())
    }
}

impl fmt::Display for BidProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, row) in self.bids.iter().enumerate() {
            if i > 0 {
                f.write_str(" ")?;
            }
            for &b in row {
                f.write_str(if b { "1" } else { "0" })?;
            }
        }
        Ok(())
    }
}

/// Sincere bidding: like exactly the items with strictly positive utility.
pub fn sincere_bids(instance: &Instance) -> BidProfile {
    BidProfile { bids: instance.rows().iter().map(|row| row.iter().map(|u| u.is_positive()).collect()).collect() }
}

/// Ex post outcome: the owner of each item, if any.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Allocation {
    owner: Vec<Option<usize>>,
}

impl Allocation {
    pub fn new(owner: Vec<Option<usize>>) -> Self {
        Allocation { owner }
    }

    pub fn unallocated(num_items: usize) -> Self {
        Allocation { owner: vec![None; num_items] }
    }

    pub fn num_items(&self) -> usize {
        self.owner.len()
    }

    pub fn owner(&self, item: usize) -> Option<usize> {
        self.owner[item]
    }

    pub fn owners(&self) -> &[Option<usize>] {
        &self.owner
    }

    pub fn bundle(&self, agent: usize) -> impl Iterator<Item = usize> + '_ {
        (0..self.owner.len()).filter(move |&j| self.owner[j] == Some(agent))
    }

    pub fn bundle_size(&self, agent: usize) -> usize {
        self.bundle(agent).count()
    }
}

impl fmt::Display for Allocation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (item, owner) in self.owner.iter().enumerate() {
            match owner {
                Some(agent) => writeln!(f, "{item} -> {agent}")?,
                None => writeln!(f, "{item} -> none")?,
            }
        }
        Ok(())
    }
}

/// Exact distribution over distinct allocations, kept in canonical
/// (lexicographic) allocation order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OutcomeDistribution {
    outcomes: Vec<(Allocation, Rational)>,
}

impl OutcomeDistribution {
    /// Merges duplicate allocations and drops zero-probability entries. The
    /// probabilities must sum to exactly 1.
    pub fn new(outcomes: impl IntoIterator<Item = (Allocation, Rational)>) -> Self {
        let mut merged = std::collections::BTreeMap::new();
        for (alloc, p) in outcomes {
            *merged.entry(alloc).or_insert_with(Rational::zero) += p;
        }
        let outcomes: Vec<_> = merged.into_iter().filter(|(_, p)| p.is_positive()).collect();
        debug_assert!(outcomes.iter().map(|(_, p)| p).sum::<Rational>().is_one());
        OutcomeDistribution { outcomes }
    }

    pub fn outcomes(&self) -> &[(Allocation, Rational)] {
        &self.outcomes
    }

    pub fn len(&self) -> usize {
        self.outcomes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.outcomes.is_empty()
    }

    pub fn probability_of(&self, pred: impl Fn(&Allocation) -> bool) -> Rational {
        self.outcomes.iter().filter(|(a, _)| pred(a)).map(|(_, p)| p).sum()
    }

    pub fn expectation(&self, f: impl Fn(&Allocation) -> Rational) -> Rational {
        self.outcomes.iter().map(|(a, p)| f(a) * p).sum()
    }
}

/// Items held by each agent after `round` items have been processed. This is
/// the full state of the Balanced Like allocation process.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CountState {
    pub counts: Vec<usize>,
    pub round: usize,
}

impl CountState {
    pub fn initial(num_agents: usize) -> Self {
        CountState { counts: vec![0; num_agents], round: 0 }
    }
}

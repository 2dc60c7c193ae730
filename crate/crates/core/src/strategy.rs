//! Strategic bidding: expected utilities of arbitrary bid profiles, best
//! responses, dominance of sincere bidding and brute-force enumeration of
//! pure Nash equilibria.
//!
//! In *simple* mode each declared like carries an infinitesimal cost. This is
//! modelled lexicographically: an agent first maximizes expected utility and
//! then minimizes the number of likes. Strategies are restricted up front to
//! subsets of positively valued items.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, ToPrimitive};

use crate::budget::Budget;
use crate::dist::{self, balanced_masses, lcm_upto, u128_scale};
use crate::error::{Error, Result};
use crate::mechanisms::MechanismKind;
use crate::model::{sincere_bids, BidProfile, Instance};
use crate::rational::Rational;
use crate::welfare;

/// A bid profile read as one strategy (bid row) per agent.
pub type StrategyProfile = BidProfile;

/// Strategy space and preference order used for equilibrium search.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PneModel {
    /// Any subset of items; agents compare expected utility only.
    Full,
    /// Subsets of positively valued items; expected utility first, fewer
    /// likes second.
    Simple,
    /// Subsets of positively valued items; expected utility only.
    Restricted,
}

impl PneModel {
    pub fn from_simple(simple: bool) -> Self {
        if simple {
            PneModel::Simple
        } else {
            PneModel::Full
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            PneModel::Full => "full",
            PneModel::Simple => "simple",
            PneModel::Restricted => "restricted",
        }
    }

    fn restricts_space(self) -> bool {
        self != PneModel::Full
    }

    fn costs_likes(self) -> bool {
        self == PneModel::Simple
    }
}

impl fmt::Display for PneModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PneModel {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "full" => Ok(PneModel::Full),
            "simple" => Ok(PneModel::Simple),
            "restricted" => Ok(PneModel::Restricted),
            other => Err(format!("unknown equilibrium model {other:?} (expected simple, restricted or full)")),
        }
    }
}

pub fn expected_utility(
    kind: MechanismKind,
    instance: &Instance,
    profile: &StrategyProfile,
    agent: usize,
    budget: &Budget,
) -> Result<Rational> {
    Ok(dist::expected_utilities(kind, instance, profile, budget)?.swap_remove(agent))
}

/// Utilities scaled to integers: `u * denominators` and a common probability
/// scale, so that `EU * denominators * scale` is an exact `u128`.
struct Scaled {
    utilities: Vec<Vec<u128>>,
    scale: u128,
}

impl Scaled {
    fn new(kind: MechanismKind, instance: &Instance) -> Option<Self> {
        let denominators = instance.rows().iter().flatten().fold(BigInt::one(), |acc, u| acc.lcm(u.denom()));
        let utilities = instance
            .rows()
            .iter()
            .map(|row| {
                row.iter().map(|u| (u.numer() * (&denominators / u.denom())).to_u128()).collect::<Option<Vec<_>>>()
            })
            .collect::<Option<Vec<_>>>()?;
        let scale = match kind {
            MechanismKind::Like => lcm_upto(instance.num_agents()) as u128,
            MechanismKind::BalancedLike => u128_scale(instance.num_agents(), instance.num_items())?,
        };
        Some(Scaled { utilities, scale })
    }

    fn keys(&self, kind: MechanismKind, bids: &BidProfile, budget: &Budget) -> Result<Option<Vec<u128>>> {
        let k = bids.num_agents();
        let m = bids.num_items();
        let mut keys = vec![0u128; k];
        match kind {
            MechanismKind::Like => {
                for item in 0..m {
                    let q = bids.num_bidders(item);
                    if q == 0 {
                        continue;
                    }
                    let share = self.scale / q as u128;
                    for agent in bids.bidders(item) {
                        let add = self.utilities[agent][item].checked_mul(share);
                        match add.and_then(|a| keys[agent].checked_add(a)) {
                            Some(v) => keys[agent] = v,
                            None => return Ok(None),
                        }
                    }
                }
            }
            MechanismKind::BalancedLike => {
                let masses = balanced_masses(bids, self.scale, budget)?;
                for (agent, row) in masses.iter().enumerate() {
                    for (item, mass) in row.iter().enumerate() {
                        let add = self.utilities[agent][item].checked_mul(*mass);
                        match add.and_then(|a| keys[agent].checked_add(a)) {
                            Some(v) => keys[agent] = v,
                            None => return Ok(None),
                        }
                    }
                }
            }
        }
        Ok(Some(keys))
    }
}

/// Per-agent strategy space in canonical order: bit `t` of the index is the
/// bid on the `t`-th candidate item.
fn strategy_space(instance: &Instance, agent: usize, simple: bool, budget: &Budget) -> Result<Vec<Vec<bool>>> {
    let m = instance.num_items();
    let candidates: Vec<usize> =
        (0..m).filter(|&j| !simple || num_traits::Signed::is_positive(instance.utility(agent, j))).collect();
    let size = 1u64.checked_shl(candidates.len() as u32).filter(|&s| s <= budget.profiles && candidates.len() < 64);
    let size = size.ok_or(Error::BudgetExceeded { what: "strategy", limit: budget.profiles })?;
    Ok((0..size)
        .map(|mask| {
            let mut row = vec![false; m];
            for (t, &j) in candidates.iter().enumerate() {
                row[j] = mask >> t & 1 == 1;
            }
            row
        })
        .collect())
}

fn like_count(row: &[bool]) -> usize {
    row.iter().filter(|&&b| b).count()
}

/// All EU-maximizing bid vectors for `agent` against the rest of `profile`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BestResponses {
    pub responses: Vec<Vec<bool>>,
    pub utility: Rational,
}

/// In simple mode only the EU-maximal vectors with the fewest likes are kept.
pub fn best_responses(
    kind: MechanismKind,
    instance: &Instance,
    profile: &StrategyProfile,
    agent: usize,
    simple: bool,
    budget: &Budget,
) -> Result<BestResponses> {
    profile.matches(instance)?;
    let mut best: Option<(Rational, usize)> = None;
    let mut responses = Vec::new();
    for row in strategy_space(instance, agent, simple, budget)? {
        let eu = expected_utility(kind, instance, &profile.with_row(agent, row.clone()), agent, budget)?;
        let likes = if simple { like_count(&row) } else { 0 };
        let ord = match &best {
            None => Ordering::Greater,
            Some((b_eu, b_likes)) => eu.cmp(b_eu).then(b_likes.cmp(&likes)),
        };
        match ord {
            Ordering::Greater => {
                best = Some((eu, likes));
                responses.clear();
                responses.push(row);
            }
            Ordering::Equal => responses.push(row),
            Ordering::Less => {}
        }
    }
    let (utility, _) = best.expect("strategy spaces are never empty");
    Ok(BestResponses { responses, utility })
}

/// A profitable deviation from sincere bidding.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Witness {
    /// Full profile in which the agent bids sincerely.
    pub profile: BidProfile,
    pub deviation: Vec<bool>,
    pub sincere_utility: Rational,
    pub deviation_utility: Rational,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dominance {
    pub dominant: bool,
    pub witness: Option<Witness>,
}

/// Whether sincere bidding maximizes `agent`'s expected utility against every
/// opponent profile (opponents range over all `2^m` bid rows each). The
/// all-sincere opponent profile is tried first; the reported deviation is the
/// best one (fewest likes among ties) against the first opponent profile that
/// admits a strict improvement.
pub fn is_sincere_dominant(
    kind: MechanismKind,
    instance: &Instance,
    agent: usize,
    budget: &Budget,
) -> Result<Dominance> {
    let k = instance.num_agents();
    let m = instance.num_items();
    let exceeded = Error::BudgetExceeded { what: "dominance check profile", limit: budget.profiles };
    let rows = 1u64.checked_shl(m as u32).filter(|_| m < 64).ok_or(exceeded.clone())?;
    let combos = rows.checked_pow((k - 1) as u32).ok_or(exceeded.clone())?;
    if combos.checked_mul(rows).is_none_or(|n| n > budget.profiles) {
        return Err(exceeded);
    }
    let sincere = sincere_bids(instance);
    let full_space = strategy_space(instance, agent, false, budget)?;
    let sincere_index = {
        let mut idx = 0u64;
        for opp in (0..k).filter(|&i| i != agent) {
            let mask = (0..m).filter(|&j| sincere.bids(opp, j)).fold(0u64, |acc, j| acc | 1 << j);
            idx = idx * rows + mask;
        }
        idx
    };
    let order = std::iter::once(sincere_index).chain((0..combos).filter(|&c| c != sincere_index));
    for combo in order {
        let mut profile = sincere.clone();
        let mut rest = combo;
        for opp in (0..k).filter(|&i| i != agent).rev() {
            let mask = rest % rows;
            rest /= rows;
            profile = profile.with_row(opp, (0..m).map(|j| mask >> j & 1 == 1).collect());
        }
        let sincere_eu = expected_utility(kind, instance, &profile, agent, budget)?;
        let mut best: Option<(Rational, usize, &Vec<bool>)> = None;
        for row in &full_space {
            let eu = expected_utility(kind, instance, &profile.with_row(agent, row.clone()), agent, budget)?;
            let better = match &best {
                None => true,
                Some((b, likes, _)) => eu > *b || (eu == *b && like_count(row) < *likes),
            };
            if better {
                best = Some((eu, like_count(row), row));
            }
        }
        let (best_eu, _, best_row) = best.unwrap();
        if best_eu > sincere_eu {
            return Ok(Dominance {
                dominant: false,
                witness: Some(Witness {
                    profile,
                    deviation: best_row.clone(),
                    sincere_utility: sincere_eu,
                    deviation_utility: best_eu,
                }),
            });
        }
    }
    Ok(Dominance { dominant: true, witness: None })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Equilibrium {
    pub profile: StrategyProfile,
    pub utilities: Vec<Rational>,
    pub utilitarian: Rational,
    /// Smallest expected utility.
    pub egalitarian_min_of_expected: Rational,
    /// Expectation of the per-outcome minimum utility; `None` when the
    /// allocation tree exceeds the budget.
    pub egalitarian_expected_min: Option<Rational>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EquilibriumReport {
    pub kind: MechanismKind,
    pub model: PneModel,
    pub profiles_searched: u64,
    /// Equilibria in canonical profile order.
    pub equilibria: Vec<Equilibrium>,
}

impl EquilibriumReport {
    pub fn is_unique(&self) -> bool {
        self.equilibria.len() == 1
    }
}

/// Mixed-radix profile indexing, agent 0 most significant.
struct ProfileSpace {
    spaces: Vec<Vec<Vec<bool>>>,
    strides: Vec<usize>,
    total: usize,
}

impl ProfileSpace {
    fn new(instance: &Instance, model: PneModel, budget: &Budget) -> Result<Self> {
        let k = instance.num_agents();
        let spaces =
            (0..k).map(|i| strategy_space(instance, i, model.restricts_space(), budget)).collect::<Result<Vec<_>>>()?;
        let exceeded = Error::BudgetExceeded { what: "strategy profile", limit: budget.profiles };
        let mut strides = vec![1usize; k];
        let mut total = 1u64;
        for i in (0..k).rev() {
            strides[i] = total as usize;
            total = total.checked_mul(spaces[i].len() as u64).ok_or(exceeded.clone())?;
            if total > budget.profiles {
                return Err(exceeded);
            }
        }
        Ok(ProfileSpace { spaces, strides, total: total as usize })
    }

    fn digit(&self, index: usize, agent: usize) -> usize {
        index / self.strides[agent] % self.spaces[agent].len()
    }

    fn profile(&self, index: usize) -> BidProfile {
        let rows = (0..self.spaces.len()).map(|i| self.spaces[i][self.digit(index, i)].clone()).collect();
        BidProfile::new(rows).expect("strategy rows share the instance shape")
    }

    fn likes(&self, index: usize, agent: usize) -> usize {
        like_count(&self.spaces[agent][self.digit(index, agent)])
    }

    /// Indices of profiles where every agent's strategy is a best response.
    fn equilibria<K: Ord>(&self, table: &[K], costs_likes: bool) -> Vec<usize> {
        let k = self.spaces.len();
        let mut ok = vec![true; self.total];
        for agent in 0..k {
            let size = self.spaces[agent].len();
            let stride = self.strides[agent];
            let block = size * stride;
            for hi in 0..self.total / block {
                for lo in 0..stride {
                    let base = hi * block + lo;
                    let members = (0..size).map(|s| base + s * stride);
                    let key = |p: usize| {
                        (&table[p * k + agent], std::cmp::Reverse(if costs_likes { self.likes(p, agent) } else { 0 }))
                    };
                    let best = members.clone().map(key).max().unwrap();
                    for p in members {
                        if key(p) != best {
                            ok[p] = false;
                        }
                    }
                }
            }
        }
        (0..self.total).filter(|&p| ok[p]).collect()
    }
}

/// All pure Nash equilibria (simple or not) by exhaustive search over the
/// profile space.
pub fn enumerate_pne(
    kind: MechanismKind,
    instance: &Instance,
    simple: bool,
    budget: &Budget,
) -> Result<EquilibriumReport> {
    enumerate_pne_in(kind, instance, PneModel::from_simple(simple), budget)
}

/// Exhaustive equilibrium search under an explicit [`PneModel`]. Expected
/// utilities of every profile are tabulated once; then, for each agent and
/// each fixing of the opponents, only the agent's best strategies survive.
pub fn enumerate_pne_in(
    kind: MechanismKind,
    instance: &Instance,
    model: PneModel,
    budget: &Budget,
) -> Result<EquilibriumReport> {
    let space = ProfileSpace::new(instance, model, budget)?;
    let k = instance.num_agents();
    let mut found = None;
    if let Some(scaled) = Scaled::new(kind, instance) {
        let mut table = Vec::with_capacity(space.total * k);
        let mut complete = true;
        for p in 0..space.total {
            match scaled.keys(kind, &space.profile(p), budget)? {
                Some(keys) => table.extend(keys),
                None => {
                    complete = false;
                    break;
                }
            }
        }
        if complete {
            found = Some(space.equilibria(&table, model.costs_likes()));
        }
    }
    let found = match found {
        Some(found) => found,
        None => {
            let mut table = Vec::with_capacity(space.total * k);
            for p in 0..space.total {
                table.extend(dist::expected_utilities(kind, instance, &space.profile(p), budget)?);
            }
            space.equilibria(&table, model.costs_likes())
        }
    };
    let equilibria =
        found.into_iter().map(|p| describe(kind, instance, space.profile(p), budget)).collect::<Result<Vec<_>>>()?;
    Ok(EquilibriumReport { kind, model, profiles_searched: space.total as u64, equilibria })
}

fn describe(kind: MechanismKind, instance: &Instance, profile: BidProfile, budget: &Budget) -> Result<Equilibrium> {
    let utilities = dist::expected_utilities(kind, instance, &profile, budget)?;
    let utilitarian = utilities.iter().sum();
    let egalitarian_min_of_expected = utilities.iter().min().unwrap().clone();
    let egalitarian_expected_min = match dist::enumerate_outcomes(kind, &profile, budget) {
        Ok(d) => Some(welfare::expected_min_utility(instance, &d)),
        Err(e) if e.is_budget() => None,
        Err(e) => return Err(e),
    };
    Ok(Equilibrium { profile, utilities, utilitarian, egalitarian_min_of_expected, egalitarian_expected_min })
}

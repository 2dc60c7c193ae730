//! Welfare, envy, offline optima, competitive ratios and prices of anarchy.

use std::fmt;
use std::str::FromStr;

use num_traits::{Signed, Zero};

use crate::budget::Budget;
use crate::dist;
use crate::error::{Error, Result};
use crate::mechanisms::MechanismKind;
use crate::model::{sincere_bids, Allocation, BidProfile, Instance, OutcomeDistribution};
use crate::rational::{format_rational, to_f64, Rational};
use crate::strategy::{self, PneModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum WelfareKind {
    /// Smallest bundle utility over agents.
    Egalitarian,
    /// Sum of bundle utilities.
    Utilitarian,
}

impl FromStr for WelfareKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "egal" | "egalitarian" => Ok(WelfareKind::Egalitarian),
            "util" | "utilitarian" => Ok(WelfareKind::Utilitarian),
            other => Err(format!("unknown welfare kind {other:?} (expected egal or util)")),
        }
    }
}

impl fmt::Display for WelfareKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            WelfareKind::Egalitarian => "egalitarian",
            WelfareKind::Utilitarian => "utilitarian",
        })
    }
}

/// How an egalitarian welfare is taken in expectation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EgalitarianMode {
    /// `min_i E[u_i(A_i)]`
    MinOfExpected,
    /// `E[min_i u_i(A_i)]`
    ExpectedMin,
}

impl FromStr for EgalitarianMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "min-exp" => Ok(EgalitarianMode::MinOfExpected),
            "exp-min" => Ok(EgalitarianMode::ExpectedMin),
            other => Err(format!("unknown egalitarian mode {other:?} (expected min-exp or exp-min)")),
        }
    }
}

impl fmt::Display for EgalitarianMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EgalitarianMode::MinOfExpected => "min-exp",
            EgalitarianMode::ExpectedMin => "exp-min",
        })
    }
}

/// Exact ratio of two welfare values; a zero denominator is a value, not an error.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Ratio {
    Finite(Rational),
    /// Positive numerator over zero.
    Unbounded,
    /// Zero over zero.
    Undefined,
}

impl Ratio {
    pub fn of(numerator: &Rational, denominator: &Rational) -> Ratio {
        match (numerator.is_zero(), denominator.is_zero()) {
            (_, false) => Ratio::Finite(numerator / denominator),
            (false, true) => Ratio::Unbounded,
            (true, true) => Ratio::Undefined,
        }
    }

    pub fn finite(&self) -> Option<&Rational> {
        match self {
            Ratio::Finite(r) => Some(r),
            _ => None,
        }
    }

    pub fn to_f64(&self) -> f64 {
        match self {
            Ratio::Finite(r) => to_f64(r),
            Ratio::Unbounded => f64::INFINITY,
            Ratio::Undefined => f64::NAN,
        }
    }
}

impl fmt::Display for Ratio {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Ratio::Finite(r) => f.write_str(&format_rational(r)),
            Ratio::Unbounded => f.write_str("unbounded"),
            Ratio::Undefined => f.write_str("undefined"),
        }
    }
}

fn own_utilities<'a>(instance: &'a Instance, alloc: &'a Allocation) -> impl Iterator<Item = Rational> + 'a {
    (0..instance.num_agents()).map(move |i| instance.bundle_utility(i, alloc, i))
}

pub fn welfare_ex_post(instance: &Instance, alloc: &Allocation, kind: WelfareKind) -> Rational {
    match kind {
        WelfareKind::Egalitarian => own_utilities(instance, alloc).min().unwrap(),
        WelfareKind::Utilitarian => own_utilities(instance, alloc).sum(),
    }
}

/// `E[min_i u_i(A_i)]` over an outcome distribution.
pub fn expected_min_utility(instance: &Instance, dist: &OutcomeDistribution) -> Rational {
    dist.expectation(|a| welfare_ex_post(instance, a, WelfareKind::Egalitarian))
}

/// Expected welfare of `profile`. The egalitarian mode is ignored for
/// utilitarian welfare.
pub fn expected_welfare(
    kind: MechanismKind,
    instance: &Instance,
    profile: &BidProfile,
    welfare: WelfareKind,
    mode: EgalitarianMode,
    budget: &Budget,
) -> Result<Rational> {
    profile.matches(instance)?;
    match (welfare, mode) {
        (WelfareKind::Utilitarian, _) => {
            Ok(dist::expected_utilities(kind, instance, profile, budget)?.into_iter().sum())
        }
        (WelfareKind::Egalitarian, EgalitarianMode::MinOfExpected) => {
            Ok(dist::expected_utilities(kind, instance, profile, budget)?.into_iter().min().unwrap())
        }
        (WelfareKind::Egalitarian, EgalitarianMode::ExpectedMin) => {
            Ok(expected_min_utility(instance, &dist::enumerate_outcomes(kind, profile, budget)?))
        }
    }
}

/// Envy matrices; entry `[i][j]` is how much more agent `i` values `j`'s
/// bundle than its own.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EnvyReport {
    /// Worst case over possible outcomes of `u_i(A_j) - u_i(A_i)`.
    pub ex_post_max: Vec<Vec<Rational>>,
    /// `E[u_i(A_j)] - E[u_i(A_i)]`.
    pub ex_ante: Vec<Vec<Rational>>,
}

impl EnvyReport {
    pub fn max_ex_post(&self) -> Rational {
        self.ex_post_max.iter().flatten().max().unwrap().clone()
    }

    pub fn max_ex_ante(&self) -> Rational {
        self.ex_ante.iter().flatten().max().unwrap().clone()
    }
}

pub fn envy_report(
    kind: MechanismKind,
    instance: &Instance,
    profile: &BidProfile,
    budget: &Budget,
) -> Result<EnvyReport> {
    let k = instance.num_agents();
    let cross = dist::cross_expected_utilities(kind, instance, profile, budget)?;
    let ex_ante = (0..k).map(|i| (0..k).map(|j| cross.get(i, j) - cross.get(i, i)).collect()).collect();
    let outcomes = dist::enumerate_outcomes(kind, profile, budget)?;
    // Off-diagonal worst cases may be negative, so start from "no outcome seen".
    let mut worst: Vec<Vec<Option<Rational>>> = vec![vec![None; k]; k];
    for (alloc, _) in outcomes.outcomes() {
        for i in 0..k {
            let own = instance.bundle_utility(i, alloc, i);
            for j in 0..k {
                let envy = instance.bundle_utility(i, alloc, j) - &own;
                if worst[i][j].as_ref().is_none_or(|w| envy > *w) {
                    worst[i][j] = Some(envy);
                }
            }
        }
    }
    let ex_post_max =
        worst.into_iter().map(|row| row.into_iter().map(|w| w.unwrap_or_else(Rational::zero)).collect()).collect();
    Ok(EnvyReport { ex_post_max, ex_ante })
}

/// Best offline allocation and its welfare.
///
/// Utilitarian: every item goes to the lowest-indexed agent of maximal
/// utility (unallocated if nobody values it). Egalitarian: depth-first
/// branch-and-bound over owners, bounding each agent by its current bundle
/// plus everything it values among the remaining items.
pub fn optimal_offline(instance: &Instance, kind: WelfareKind, budget: &Budget) -> Result<(Allocation, Rational)> {
    match kind {
        WelfareKind::Utilitarian => {
            let owner = (0..instance.num_items())
                .map(|j| {
                    let best = (0..instance.num_agents())
                        .rev()
                        .max_by(|&a, &b| instance.utility(a, j).cmp(instance.utility(b, j)))
                        .unwrap();
                    instance.utility(best, j).is_positive().then_some(best)
                })
                .collect();
            let alloc = Allocation::new(owner);
            let value = welfare_ex_post(instance, &alloc, kind);
            Ok((alloc, value))
        }
        WelfareKind::Egalitarian => egalitarian_optimum(instance, budget),
    }
}

struct Search<'a> {
    instance: &'a Instance,
    /// `remaining[i][j]`: agent `i`'s total utility for items `j..m`.
    remaining: Vec<Vec<Rational>>,
    bundles: Vec<Rational>,
    owner: Vec<Option<usize>>,
    best: Option<(Vec<Option<usize>>, Rational)>,
    nodes: u64,
    limit: u64,
}

impl Search<'_> {
    fn go(&mut self, item: usize) -> Result<()> {
        self.nodes += 1;
        if self.nodes > self.limit {
            return Err(Error::BudgetExceeded { what: "branch-and-bound node", limit: self.limit });
        }
        let bound = (0..self.bundles.len()).map(|i| &self.bundles[i] + &self.remaining[i][item]).min().unwrap();
        if let Some((_, best)) = &self.best {
            if bound <= *best {
                return Ok(());
            }
        }
        if item == self.owner.len() {
            let value = self.bundles.iter().min().unwrap().clone();
            self.best = Some((self.owner.clone(), value));
            return Ok(());
        }
        let takers: Vec<usize> =
            (0..self.bundles.len()).filter(|&i| self.instance.utility(i, item).is_positive()).collect();
        if takers.is_empty() {
            return self.go(item + 1);
        }
        for agent in takers {
            let u = self.instance.utility(agent, item).clone();
            self.bundles[agent] += &u;
            self.owner[item] = Some(agent);
            self.go(item + 1)?;
            self.bundles[agent] -= &u;
        }
        self.owner[item] = None;
        Ok(())
    }
}

fn egalitarian_optimum(instance: &Instance, budget: &Budget) -> Result<(Allocation, Rational)> {
    let (k, m) = (instance.num_agents(), instance.num_items());
    let remaining = (0..k)
        .map(|i| {
            let mut suffix = vec![Rational::zero(); m + 1];
            for j in (0..m).rev() {
                suffix[j] = &suffix[j + 1] + instance.utility(i, j);
            }
            suffix
        })
        .collect();
    let mut search = Search {
        instance,
        remaining,
        bundles: vec![Rational::zero(); k],
        owner: vec![None; m],
        best: None,
        nodes: 0,
        limit: budget.search_nodes,
    };
    search.go(0)?;
    match search.best {
        Some((owner, value)) => Ok((Allocation::new(owner), value)),
        // Every bound was zero, so some agent values nothing.
        None => {
            let (alloc, _) = optimal_offline(instance, WelfareKind::Utilitarian, budget)?;
            Ok((alloc, Rational::zero()))
        }
    }
}

/// Optimal offline welfare over the expected welfare of sincere bidding.
pub fn competitive_ratio(
    kind: MechanismKind,
    instance: &Instance,
    welfare: WelfareKind,
    mode: EgalitarianMode,
    budget: &Budget,
) -> Result<Ratio> {
    let (_, opt) = optimal_offline(instance, welfare, budget)?;
    let achieved = expected_welfare(kind, instance, &sincere_bids(instance), welfare, mode, budget)?;
    Ok(Ratio::of(&opt, &achieved))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PriceOfAnarchy {
    pub optimum: Rational,
    /// Optimum over the worst simple equilibrium's expected welfare.
    pub worst: Ratio,
    /// Optimum over the best simple equilibrium's expected welfare.
    pub best: Ratio,
    pub worst_profile: BidProfile,
    pub best_profile: BidProfile,
    pub equilibria: usize,
}

/// Prices of anarchy and stability over the simple pure Nash equilibria.
pub fn price_of_anarchy(
    kind: MechanismKind,
    instance: &Instance,
    welfare: WelfareKind,
    mode: EgalitarianMode,
    budget: &Budget,
) -> Result<PriceOfAnarchy> {
    price_of_anarchy_in(kind, instance, welfare, mode, PneModel::Simple, budget)
}

/// [`price_of_anarchy`] over the equilibria of an explicit [`PneModel`].
pub fn price_of_anarchy_in(
    kind: MechanismKind,
    instance: &Instance,
    welfare: WelfareKind,
    mode: EgalitarianMode,
    model: PneModel,
    budget: &Budget,
) -> Result<PriceOfAnarchy> {
    let (_, optimum) = optimal_offline(instance, welfare, budget)?;
    let report = strategy::enumerate_pne_in(kind, instance, model, budget)?;
    let mut scored = Vec::with_capacity(report.equilibria.len());
    for eq in &report.equilibria {
        let value = match (welfare, mode) {
            (WelfareKind::Utilitarian, _) => eq.utilitarian.clone(),
            (WelfareKind::Egalitarian, EgalitarianMode::MinOfExpected) => eq.egalitarian_min_of_expected.clone(),
            (WelfareKind::Egalitarian, EgalitarianMode::ExpectedMin) => match &eq.egalitarian_expected_min {
                Some(v) => v.clone(),
                None => return Err(Error::BudgetExceeded { what: "allocation tree node", limit: budget.tree_nodes }),
            },
        };
        scored.push((value, &eq.profile));
    }
    let worst = scored.iter().min_by(|a, b| a.0.cmp(&b.0)).ok_or(Error::NoEquilibrium)?;
    let best = scored.iter().max_by(|a, b| a.0.cmp(&b.0)).unwrap();
    Ok(PriceOfAnarchy {
        worst: Ratio::of(&optimum, &worst.0),
        best: Ratio::of(&optimum, &best.0),
        worst_profile: worst.1.clone(),
        best_profile: best.1.clone(),
        equilibria: scored.len(),
        optimum,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{frac, int, one};

    fn b() -> Budget {
        Budget::default()
    }

    fn four_item(eps: Rational) -> Instance {
        let hi = one() - &eps - &eps;
        Instance::new(vec![
            vec![eps.clone(), hi.clone(), int(0), eps.clone()],
            vec![int(0), eps.clone(), eps.clone(), hi],
        ])
        .unwrap()
    }

    fn six_item() -> Instance {
        Instance::from_integers(&[&[1, 1, 1, 0, 0, 0], &[1, 0, 1, 0, 1, 1], &[1, 1, 0, 1, 0, 1]]).unwrap()
    }

    #[test]
    fn ex_post_welfare() {
        let inst = four_item(frac(1, 100));
        let alloc = Allocation::new(vec![Some(0), Some(1), Some(1), Some(0)]);
        assert_eq!(welfare_ex_post(&inst, &alloc, WelfareKind::Egalitarian), frac(2, 100));
        assert_eq!(welfare_ex_post(&inst, &alloc, WelfareKind::Utilitarian), frac(4, 100));
        let nothing = Allocation::unallocated(4);
        assert_eq!(welfare_ex_post(&inst, &nothing, WelfareKind::Egalitarian), int(0));
        assert_eq!(welfare_ex_post(&inst, &nothing, WelfareKind::Utilitarian), int(0));

        // Agents in order (2,1,1,3,2,3), zero-based.
        let seq = Allocation::new(vec![Some(1), Some(0), Some(0), Some(2), Some(1), Some(2)]);
        assert_eq!(welfare_ex_post(&six_item(), &seq, WelfareKind::Egalitarian), int(2));
    }

    #[test]
    fn expected_welfare_modes() {
        let inst = six_item();
        let kind = MechanismKind::BalancedLike;
        let sincere = sincere_bids(&inst);
        let exp_min =
            expected_welfare(kind, &inst, &sincere, WelfareKind::Egalitarian, EgalitarianMode::ExpectedMin, &b())
                .unwrap();
        assert_eq!(exp_min, frac(13, 12));
        let eq = sincere.with_row(0, vec![false, true, true, false, false, false]);
        let exp_min =
            expected_welfare(kind, &inst, &eq, WelfareKind::Egalitarian, EgalitarianMode::ExpectedMin, &b()).unwrap();
        assert_eq!(exp_min, frac(9, 8));

        let single = Instance::from_integers(&[&[0, 7]]).unwrap();
        for mode in [EgalitarianMode::MinOfExpected, EgalitarianMode::ExpectedMin] {
            for w in [WelfareKind::Egalitarian, WelfareKind::Utilitarian] {
                let v = expected_welfare(kind, &single, &sincere_bids(&single), w, mode, &b()).unwrap();
                assert_eq!(v, int(7));
            }
        }
    }

    #[test]
    fn diagonal_all_bid_welfare() {
        let inst = Instance::from_integers(&[&[1, 0, 0], &[0, 1, 0], &[0, 0, 1]]).unwrap();
        let all = BidProfile::full(3, 3);
        let egal = expected_welfare(
            MechanismKind::Like,
            &inst,
            &all,
            WelfareKind::Egalitarian,
            EgalitarianMode::MinOfExpected,
            &b(),
        )
        .unwrap();
        assert_eq!(egal, frac(1, 3));
        let util = expected_welfare(
            MechanismKind::Like,
            &inst,
            &all,
            WelfareKind::Utilitarian,
            EgalitarianMode::MinOfExpected,
            &b(),
        )
        .unwrap();
        assert_eq!(util, one());
    }

    #[test]
    fn unlucky_agent_envies_everything() {
        let m = 4;
        let inst = Instance::from_integers(&[&[1; 4], &[1; 4]]).unwrap();
        let r = envy_report(MechanismKind::Like, &inst, &sincere_bids(&inst), &b()).unwrap();
        assert_eq!(r.ex_post_max[1][0], int(m));
        assert_eq!(r.ex_ante[1][0], int(0));
    }

    #[test]
    fn ex_ante_envy_grows_with_the_big_item() {
        for (p, envy) in [(3, 1), (10, 8)] {
            let inst = Instance::from_integers(&[&[0, p], &[1, p - 1]]).unwrap();
            let r = envy_report(MechanismKind::BalancedLike, &inst, &sincere_bids(&inst), &b()).unwrap();
            assert_eq!(r.ex_ante[1][0], int(envy));
        }
    }

    #[test]
    fn single_agent_has_no_envy() {
        let inst = Instance::from_integers(&[&[1, 2]]).unwrap();
        let r = envy_report(MechanismKind::BalancedLike, &inst, &sincere_bids(&inst), &b()).unwrap();
        assert_eq!(r.ex_post_max, vec![vec![int(0)]]);
        assert_eq!(r.ex_ante, vec![vec![int(0)]]);
    }

    #[test]
    fn ex_post_envy_can_be_negative_off_the_diagonal() {
        // Agent 1 values only what it always receives.
        let inst = Instance::from_integers(&[&[1, 0], &[0, 1]]).unwrap();
        let r = envy_report(MechanismKind::Like, &inst, &sincere_bids(&inst), &b()).unwrap();
        assert_eq!(r.ex_post_max[0][1], int(-1));
        assert_eq!(r.ex_post_max[0][0], int(0));
    }

    #[test]
    fn offline_optima() {
        let mut rows: Vec<Vec<i64>> = vec![vec![1, 1, 1, 0, 0, 0, 0, 0, 0]];
        rows.extend(std::iter::repeat_n(vec![1; 9], 2));
        let refs: Vec<&[i64]> = rows.iter().map(Vec::as_slice).collect();
        let nine = Instance::from_integers(&refs).unwrap();
        assert_eq!(optimal_offline(&nine, WelfareKind::Egalitarian, &b()).unwrap().1, int(3));

        let inst = four_item(frac(1, 100));
        let (alloc, egal) = optimal_offline(&inst, WelfareKind::Egalitarian, &b()).unwrap();
        assert_eq!(egal, frac(99, 100));
        assert_eq!(alloc, Allocation::new(vec![Some(0), Some(0), Some(1), Some(1)]));
        // (eps + 1 - 2eps) for each agent
        assert_eq!(optimal_offline(&inst, WelfareKind::Utilitarian, &b()).unwrap().1, frac(198, 100));

        let zo = Instance::from_integers(&[&[1, 0, 0, 1], &[1, 0, 1, 0]]).unwrap();
        assert_eq!(optimal_offline(&zo, WelfareKind::Utilitarian, &b()).unwrap().1, int(3));
        let starved = Instance::from_integers(&[&[1, 1], &[0, 0]]).unwrap();
        assert_eq!(optimal_offline(&starved, WelfareKind::Egalitarian, &b()).unwrap().1, int(0));
    }

    #[test]
    fn ratios() {
        let inst = four_item(frac(1, 100));
        let r = competitive_ratio(
            MechanismKind::BalancedLike,
            &inst,
            WelfareKind::Egalitarian,
            EgalitarianMode::MinOfExpected,
            &b(),
        )
        .unwrap();
        assert_eq!(r, Ratio::Finite(frac(99, 2)));

        let single = Instance::from_integers(&[&[2, 3]]).unwrap();
        for kind in MechanismKind::ALL {
            let r =
                competitive_ratio(kind, &single, WelfareKind::Egalitarian, EgalitarianMode::ExpectedMin, &b()).unwrap();
            assert_eq!(r, Ratio::Finite(one()));
        }

        assert_eq!(Ratio::of(&int(1), &int(0)), Ratio::Unbounded);
        assert_eq!(Ratio::of(&int(0), &int(0)), Ratio::Undefined);
        assert_eq!(Ratio::of(&int(3), &int(2)).to_string(), "3/2");
    }

    #[test]
    fn poa_on_zero_one_utilitarian_is_one() {
        let inst = Instance::from_integers(&[&[1, 1, 0], &[1, 0, 1], &[0, 1, 1]]).unwrap();
        for kind in MechanismKind::ALL {
            let poa =
                price_of_anarchy(kind, &inst, WelfareKind::Utilitarian, EgalitarianMode::MinOfExpected, &b()).unwrap();
            assert_eq!(poa.worst, Ratio::Finite(one()));
            assert_eq!(poa.best, Ratio::Finite(one()));
        }
    }
}

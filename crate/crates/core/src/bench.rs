//! Instance generators, experiment sweeps and aggregate statistics.
//!
//! Every instance in a sweep gets its own seed derived from the master seed
//! and its `(k, m, id)` coordinates, so rows can be regenerated one at a time.

use std::fmt;
use std::io::Write;
use std::ops::RangeInclusive;
use std::str::FromStr;

use num_traits::{Signed, ToPrimitive, Zero};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::budget::Budget;
use crate::error::{Error, Result};
use crate::mechanisms::{MechanismKind, RngSeed};
use crate::model::Instance;
use crate::rational::{format_rational, frac, int, ln, Rational};
use crate::strategy::PneModel;
use crate::welfare::{self, EgalitarianMode, Ratio, WelfareKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Family {
    /// Independent 0/1 utilities.
    Random01,
    /// Each row is a random permutation of `m-1, ..., 0`.
    Borda,
    /// 0/1 utilities from a per-item urn: agent `i` (0-based) likes with
    /// probability `(1 + L) / (2 + i)`, `L` the number of earlier likers.
    Polya01,
    /// With probability `alpha` copy an earlier agent's row, else a fresh
    /// Borda row.
    PolyaBorda,
}

impl Family {
    pub fn name(self) -> &'static str {
        match self {
            Family::Random01 => "random01",
            Family::Borda => "borda",
            Family::Polya01 => "polya01",
            Family::PolyaBorda => "polya-borda",
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Family {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "random01" => Ok(Family::Random01),
            "borda" => Ok(Family::Borda),
            "polya01" => Ok(Family::Polya01),
            "polya-borda" | "polyaborda" => Ok(Family::PolyaBorda),
            _ => Err(format!("unknown family {s:?} (expected random01, borda, polya01 or polya-borda)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GeneratorSpec {
    pub family: Family,
    pub num_agents: usize,
    pub num_items: usize,
    /// Probability of a like in `Random01`.
    pub like_probability: Rational,
    /// Copy probability in `PolyaBorda`.
    pub alpha: Rational,
    pub seed: RngSeed,
}

impl GeneratorSpec {
    pub fn new(family: Family, num_agents: usize, num_items: usize, seed: RngSeed) -> Self {
        GeneratorSpec { family, num_agents, num_items, like_probability: frac(1, 2), alpha: frac(1, 2), seed }
    }

    fn validate(&self) -> Result<()> {
        if self.num_agents == 0 || self.num_items == 0 {
            return Err(Error::DimensionMismatch("generated instances need k >= 1 and m >= 1".into()));
        }
        for (name, p) in [("like probability", &self.like_probability), ("alpha", &self.alpha)] {
            if p.is_negative() || *p > int(1) {
                return Err(Error::Unsupported(format!("{name} {p} is outside [0, 1]")));
            }
            if p.denom().to_u64().is_none() {
                return Err(Error::Unsupported(format!("{name} {p} has a denominator beyond 64 bits")));
            }
        }
        Ok(())
    }
}

/// Exact Bernoulli draw for a probability with a 64-bit denominator.
fn bernoulli(rng: &mut ChaCha8Rng, p: &Rational) -> bool {
    let d = p.denom().to_u64().expect("validated denominator");
    let n = p.numer().to_u64().unwrap_or(0);
    rng.random_range(0..d) < n
}

fn borda_row(rng: &mut ChaCha8Rng, m: usize) -> Vec<Rational> {
    let mut row: Vec<Rational> = (0..m).rev().map(|s| int(s as i64)).collect();
    row.shuffle(rng);
    row
}

pub fn generate(spec: &GeneratorSpec) -> Result<Instance> {
    spec.validate()?;
    let (k, m) = (spec.num_agents, spec.num_items);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let rows = match spec.family {
        Family::Random01 => {
            (0..k).map(|_| (0..m).map(|_| int(bernoulli(&mut rng, &spec.like_probability) as i64)).collect()).collect()
        }
        Family::Borda => (0..k).map(|_| borda_row(&mut rng, m)).collect(),
        Family::Polya01 => {
            let mut rows = vec![vec![int(0); m]; k];
            for item in 0..m {
                let mut likers = 0i64;
                for (i, row) in rows.iter_mut().enumerate() {
                    if bernoulli(&mut rng, &frac(1 + likers, 2 + i as i64)) {
                        row[item] = int(1);
                        likers += 1;
                    }
                }
            }
            rows
        }
        Family::PolyaBorda => {
            let mut rows: Vec<Vec<Rational>> = Vec::with_capacity(k);
            for i in 0..k {
                let row = if i > 0 && bernoulli(&mut rng, &spec.alpha) {
                    rows[rng.random_range(0..i)].clone()
                } else {
                    borda_row(&mut rng, m)
                };
                rows.push(row);
            }
            rows
        }
    };
    Instance::new(rows)
}

/// SplitMix64 finalizer.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed of instance `id` in grid cell `(k, m)`.
pub fn derive_seed(master: RngSeed, k: usize, m: usize, id: usize) -> RngSeed {
    [k as u64, m as u64, id as u64].into_iter().fold(mix(master), |acc, v| mix(acc ^ v))
}

/// Inclusive `k` and `m` ranges, written `k=2..5,m=2..10` (single values allowed).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Grid {
    pub agents: RangeInclusive<usize>,
    pub items: RangeInclusive<usize>,
}

impl Grid {
    pub fn cells(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.agents.clone().flat_map(move |k| self.items.clone().map(move |m| (k, m)))
    }
}

impl fmt::Display for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "k={}..{},m={}..{}", self.agents.start(), self.agents.end(), self.items.start(), self.items.end())
    }
}

impl FromStr for Grid {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        let range = |text: &str| -> std::result::Result<RangeInclusive<usize>, String> {
            let bad = || format!("bad range {text:?} (expected N or A..B with 1 <= A <= B)");
            let (lo, hi) = match text.split_once("..") {
                Some((a, b)) => (a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?),
                None => {
                    let v = text.trim().parse().map_err(|_| bad())?;
                    (v, v)
                }
            };
            if lo == 0 || lo > hi {
                return Err(bad());
            }
            Ok(lo..=hi)
        };
        let (mut agents, mut items) = (None, None);
        for part in s.split(',') {
            match part.split_once('=') {
                Some((key, value)) if key.trim() == "k" => agents = Some(range(value)?),
                Some((key, value)) if key.trim() == "m" => items = Some(range(value)?),
                _ => return Err(format!("bad grid component {part:?} (expected k=.. or m=..)")),
            }
        }
        match (agents, items) {
            (Some(agents), Some(items)) => Ok(Grid { agents, items }),
            _ => Err(format!("grid {s:?} must set both k and m")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExperimentConfig {
    pub family: Family,
    pub like_probability: Rational,
    pub alpha: Rational,
    pub samples: usize,
    pub master_seed: RngSeed,
    pub welfare: WelfareKind,
    pub mode: EgalitarianMode,
    pub equilibria: PneModel,
    pub budget: Budget,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            family: Family::Random01,
            like_probability: frac(1, 2),
            alpha: frac(1, 2),
            samples: 100,
            master_seed: 0,
            welfare: WelfareKind::Egalitarian,
            mode: EgalitarianMode::MinOfExpected,
            equilibria: PneModel::Simple,
            budget: Budget::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn spec(&self, k: usize, m: usize, id: usize) -> GeneratorSpec {
        GeneratorSpec {
            family: self.family,
            num_agents: k,
            num_items: m,
            like_probability: self.like_probability.clone(),
            alpha: self.alpha.clone(),
            seed: derive_seed(self.master_seed, k, m, id),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SkipReason {
    /// The offline optimum is zero, so no ratio is defined.
    OptZero,
    /// Some mechanism has zero expected welfare against a positive optimum.
    Unbounded,
    BudgetExceeded,
    NoEquilibrium,
}

impl SkipReason {
    pub fn as_str(self) -> &'static str {
        match self {
            SkipReason::OptZero => "opt_zero",
            SkipReason::Unbounded => "unbounded",
            SkipReason::BudgetExceeded => "budget_exceeded",
            SkipReason::NoEquilibrium => "no_equilibrium",
        }
    }
}

/// One sampled instance. Missing ratios could not be computed; the reason
/// is in `skipped_reason`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExperimentRow {
    pub k: usize,
    pub m: usize,
    pub instance_id: usize,
    pub like_ratio: Option<Ratio>,
    pub balanced_ratio: Option<Ratio>,
    pub balanced_worst_poa: Option<Ratio>,
    pub balanced_best_ratio: Option<Ratio>,
    pub skipped_reason: Option<SkipReason>,
}

fn skip_for(err: Error) -> Result<SkipReason> {
    match err {
        e if e.is_budget() => Ok(SkipReason::BudgetExceeded),
        Error::NoEquilibrium => Ok(SkipReason::NoEquilibrium),
        e => Err(e),
    }
}

/// Ratios of one instance. Budget exhaustion and missing equilibria are
/// recorded in the row; other errors abort.
pub fn evaluate_instance(instance: &Instance, config: &ExperimentConfig) -> Result<ExperimentRow> {
    let mut row = ExperimentRow {
        k: instance.num_agents(),
        m: instance.num_items(),
        instance_id: 0,
        like_ratio: None,
        balanced_ratio: None,
        balanced_worst_poa: None,
        balanced_best_ratio: None,
        skipped_reason: None,
    };
    let (welfare, mode, budget) = (config.welfare, config.mode, &config.budget);
    let opt = match welfare::optimal_offline(instance, welfare, budget) {
        Ok((_, opt)) => opt,
        Err(e) => {
            row.skipped_reason = Some(skip_for(e)?);
            return Ok(row);
        }
    };
    if opt.is_zero() {
        row.skipped_reason = Some(SkipReason::OptZero);
        return Ok(row);
    }
    let mut reasons = Vec::new();
    for (kind, slot) in
        [(MechanismKind::Like, &mut row.like_ratio), (MechanismKind::BalancedLike, &mut row.balanced_ratio)]
    {
        match welfare::competitive_ratio(kind, instance, welfare, mode, budget) {
            Ok(r) => *slot = Some(r),
            Err(e) => reasons.push(skip_for(e)?),
        }
    }
    match welfare::price_of_anarchy_in(MechanismKind::BalancedLike, instance, welfare, mode, config.equilibria, budget)
    {
        Ok(poa) => {
            row.balanced_worst_poa = Some(poa.worst);
            row.balanced_best_ratio = Some(poa.best);
        }
        Err(e) => reasons.push(skip_for(e)?),
    }
    let ratios = [&row.like_ratio, &row.balanced_ratio, &row.balanced_worst_poa, &row.balanced_best_ratio];
    if ratios.iter().any(|r| matches!(r, Some(Ratio::Unbounded))) {
        reasons.push(SkipReason::Unbounded);
    }
    row.skipped_reason = reasons.first().copied();
    Ok(row)
}

/// Rows ordered by `(k, m, instance_id)`.
pub fn run_experiment(grid: &Grid, config: &ExperimentConfig) -> Result<Vec<ExperimentRow>> {
    let mut rows = Vec::new();
    for (k, m) in grid.cells() {
        for id in 0..config.samples {
            let instance = generate(&config.spec(k, m, id))?;
            let mut row = evaluate_instance(&instance, config)?;
            row.instance_id = id;
            rows.push(row);
        }
    }
    Ok(rows)
}

pub const CSV_HEADER: [&str; 8] = [
    "k",
    "m",
    "instance_id",
    "like_ratio",
    "balanced_ratio",
    "balanced_worst_poa",
    "balanced_best_ratio",
    "skipped_reason",
];

fn metadata(grid: &Grid, config: &ExperimentConfig) -> String {
    format!(
        "# family={} like_probability={} alpha={} welfare={} mode={} equilibria={} samples={} master_seed={} grid={}\n",
        config.family,
        format_rational(&config.like_probability),
        format_rational(&config.alpha),
        config.welfare,
        config.mode,
        config.equilibria,
        config.samples,
        config.master_seed,
        grid
    )
}

/// Per-instance CSV, preceded by one `#` line recording every parameter.
pub fn write_csv<W: Write>(mut out: W, grid: &Grid, config: &ExperimentConfig, rows: &[ExperimentRow]) -> Result<()> {
    let io = |e: std::io::Error| Error::Io(e.to_string());
    out.write_all(metadata(grid, config).as_bytes()).map_err(io)?;
    let mut writer = csv::Writer::from_writer(out);
    let csv_err = |e: csv::Error| Error::Io(e.to_string());
    writer.write_record(CSV_HEADER).map_err(csv_err)?;
    let cell = |r: &Option<Ratio>| r.as_ref().map(Ratio::to_string).unwrap_or_default();
    for row in rows {
        writer
            .write_record([
                row.k.to_string(),
                row.m.to_string(),
                row.instance_id.to_string(),
                cell(&row.like_ratio),
                cell(&row.balanced_ratio),
                cell(&row.balanced_worst_poa),
                cell(&row.balanced_best_ratio),
                row.skipped_reason.map(SkipReason::as_str).unwrap_or_default().to_string(),
            ])
            .map_err(csv_err)?;
    }
    writer.flush().map_err(io)?;
    Ok(())
}

/// `exp(mean(ln v))`. The only floating-point aggregate in the crate.
pub fn geometric_mean(values: &[Rational]) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::Unsupported("geometric mean of no values".into()));
    }
    if values.iter().any(|v| !v.is_positive()) {
        return Err(Error::NonPositiveValue);
    }
    Ok((values.iter().map(ln).sum::<f64>() / values.len() as f64).exp())
}

/// Geometric means of one grid cell over the finite values of each column.
#[derive(Debug, Clone, PartialEq)]
pub struct CellSummary {
    pub k: usize,
    pub m: usize,
    pub samples: usize,
    pub skipped: usize,
    pub like: Option<f64>,
    pub balanced: Option<f64>,
    pub balanced_worst: Option<f64>,
    pub balanced_best: Option<f64>,
    /// Instances where both competitive ratios are finite.
    pub paired: usize,
    /// Paired geometric means (like, balanced).
    pub paired_means: Option<(f64, f64)>,
}

impl CellSummary {
    /// Balanced Like's competitive ratio is no worse than Like's on the
    /// paired instances; `None` when nothing was paired.
    pub fn balanced_not_worse(&self) -> Option<bool> {
        self.paired_means.map(|(like, balanced)| balanced <= like * (1.0 + 1e-12))
    }
}

fn mean_of<'a>(ratios: impl Iterator<Item = &'a Option<Ratio>>) -> Option<f64> {
    let finite: Vec<Rational> = ratios.filter_map(|r| r.as_ref()?.finite().cloned()).collect();
    geometric_mean(&finite).ok()
}

pub fn summarize(rows: &[ExperimentRow]) -> Vec<CellSummary> {
    let mut cells: Vec<(usize, usize)> = rows.iter().map(|r| (r.k, r.m)).collect();
    cells.dedup();
    cells
        .into_iter()
        .map(|(k, m)| {
            let cell: Vec<&ExperimentRow> = rows.iter().filter(|r| r.k == k && r.m == m).collect();
            let pairs: Vec<(Rational, Rational)> = cell
                .iter()
                .filter_map(|r| {
                    let like = r.like_ratio.as_ref()?.finite()?.clone();
                    let balanced = r.balanced_ratio.as_ref()?.finite()?.clone();
                    Some((like, balanced))
                })
                .collect();
            let (likes, balanceds): (Vec<_>, Vec<_>) = pairs.iter().cloned().unzip();
            let paired_means = geometric_mean(&likes).ok().zip(geometric_mean(&balanceds).ok());
            CellSummary {
                k,
                m,
                samples: cell.len(),
                skipped: cell.iter().filter(|r| r.skipped_reason.is_some()).count(),
                like: mean_of(cell.iter().map(|r| &r.like_ratio)),
                balanced: mean_of(cell.iter().map(|r| &r.balanced_ratio)),
                balanced_worst: mean_of(cell.iter().map(|r| &r.balanced_worst_poa)),
                balanced_best: mean_of(cell.iter().map(|r| &r.balanced_best_ratio)),
                paired: pairs.len(),
                paired_means,
            }
        })
        .collect()
}

/// Whitespace-separated columns, one block per `k` (blank line between
/// blocks), `nan` where a column has no finite value.
pub fn write_plot_data<W: Write>(mut out: W, summaries: &[CellSummary]) -> Result<()> {
    let io = |e: std::io::Error| Error::Io(e.to_string());
    writeln!(out, "# k m samples like balanced balanced- balanced+").map_err(io)?;
    let show = |v: Option<f64>| v.map_or_else(|| "nan".to_string(), |v| format!("{v:.6}"));
    let mut last_k = None;
    for s in summaries {
        if last_k.is_some_and(|k| k != s.k) {
            writeln!(out).map_err(io)?;
        }
        last_k = Some(s.k);
        writeln!(
            out,
            "{} {} {} {} {} {} {}",
            s.k,
            s.m,
            s.samples,
            show(s.like),
            show(s.balanced),
            show(s.balanced_worst),
            show(s.balanced_best)
        )
        .map_err(io)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::one;

    #[test]
    fn generation_is_deterministic() {
        for family in [Family::Random01, Family::Borda, Family::Polya01, Family::PolyaBorda] {
            let spec = GeneratorSpec::new(family, 3, 5, 11);
            assert_eq!(generate(&spec).unwrap(), generate(&spec).unwrap());
        }
    }

    #[test]
    fn borda_rows_are_permutations() {
        for seed in 0..20 {
            let inst = generate(&GeneratorSpec::new(Family::Borda, 3, 6, seed)).unwrap();
            for row in inst.rows() {
                let mut sorted = row.clone();
                sorted.sort();
                assert_eq!(sorted, (0..6).map(int).collect::<Vec<_>>());
            }
        }
    }

    #[test]
    fn full_copy_weight_repeats_the_first_row() {
        let mut spec = GeneratorSpec::new(Family::PolyaBorda, 3, 5, 4);
        spec.alpha = one();
        let inst = generate(&spec).unwrap();
        assert_eq!(inst.row(0), inst.row(1));
        assert_eq!(inst.row(0), inst.row(2));
    }

    #[test]
    fn extreme_like_probabilities() {
        let mut spec = GeneratorSpec::new(Family::Random01, 2, 4, 1);
        spec.like_probability = one();
        assert!(generate(&spec).unwrap().rows().iter().flatten().all(|u| *u == one()));
        spec.like_probability = int(0);
        assert!(generate(&spec).unwrap().rows().iter().flatten().all(Zero::is_zero));
        spec.like_probability = frac(3, 2);
        assert!(matches!(generate(&spec), Err(Error::Unsupported(_))));
    }

    #[test]
    fn polya_first_agent_is_a_fair_coin() {
        let inst = generate(&GeneratorSpec::new(Family::Polya01, 1, 4000, 8)).unwrap();
        let likes = inst.row(0).iter().filter(|u| !u.is_zero()).count();
        assert!((1800..2200).contains(&likes), "{likes}");
    }

    #[test]
    fn seeds_differ_across_coordinates() {
        let a = derive_seed(1, 2, 3, 0);
        assert_ne!(a, derive_seed(1, 2, 3, 1));
        assert_ne!(a, derive_seed(1, 3, 2, 0));
        assert_ne!(a, derive_seed(2, 2, 3, 0));
    }

    #[test]
    fn parses_grids() {
        let g: Grid = "k=2..5,m=2..10".parse().unwrap();
        assert_eq!(g, Grid { agents: 2..=5, items: 2..=10 });
        assert_eq!(g.cells().count(), 36);
        assert_eq!("m=4,k=3".parse::<Grid>().unwrap(), Grid { agents: 3..=3, items: 4..=4 });
        assert!("k=2..5".parse::<Grid>().is_err());
        assert!("k=5..2,m=1".parse::<Grid>().is_err());
        assert!("k=0,m=1".parse::<Grid>().is_err());
    }

    #[test]
    fn geometric_means() {
        assert!((geometric_mean(&[int(1), int(4)]).unwrap() - 2.0).abs() < 1e-12);
        assert!((geometric_mean(&[int(2), int(2), int(2)]).unwrap() - 2.0).abs() < 1e-12);
        let v = geometric_mean(&[frac(9, 8), frac(5, 4)]).unwrap();
        assert!((v - (45.0f64 / 32.0).sqrt()).abs() < 1e-12);
        assert_eq!(geometric_mean(&[int(1), int(0)]), Err(Error::NonPositiveValue));
        assert_eq!(geometric_mean(&[frac(-1, 2)]), Err(Error::NonPositiveValue));
    }

    #[test]
    fn disjoint_likes_give_unit_ratios() {
        let inst = Instance::from_integers(&[&[1, 0], &[0, 1]]).unwrap();
        let row = evaluate_instance(&inst, &ExperimentConfig::default()).unwrap();
        for r in [&row.like_ratio, &row.balanced_ratio, &row.balanced_worst_poa, &row.balanced_best_ratio] {
            assert_eq!(r, &Some(Ratio::Finite(one())));
        }
        assert_eq!(row.skipped_reason, None);
    }

    #[test]
    fn zero_optimum_is_skipped() {
        let inst = Instance::from_integers(&[&[1, 1], &[0, 0]]).unwrap();
        let row = evaluate_instance(&inst, &ExperimentConfig::default()).unwrap();
        assert_eq!(row.skipped_reason, Some(SkipReason::OptZero));
        assert_eq!(row.like_ratio, None);
    }

    #[test]
    fn csv_is_reproducible() {
        let grid: Grid = "k=2,m=2..3".parse().unwrap();
        let config = ExperimentConfig { samples: 5, master_seed: 9, ..ExperimentConfig::default() };
        let render = || {
            let rows = run_experiment(&grid, &config).unwrap();
            let mut out = Vec::new();
            write_csv(&mut out, &grid, &config, &rows).unwrap();
            String::from_utf8(out).unwrap()
        };
        let text = render();
        assert_eq!(text, render());
        let mut lines = text.lines();
        assert!(lines.next().unwrap().starts_with("# family=random01"));
        assert_eq!(lines.next().unwrap(), CSV_HEADER.join(","));
        assert_eq!(lines.count(), 10);
    }

    #[test]
    fn plot_data_has_one_line_per_cell() {
        let grid: Grid = "k=2..3,m=2".parse().unwrap();
        let config = ExperimentConfig { samples: 4, ..ExperimentConfig::default() };
        let summaries = summarize(&run_experiment(&grid, &config).unwrap());
        assert_eq!(summaries.len(), 2);
        let mut out = Vec::new();
        write_plot_data(&mut out, &summaries).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert_eq!(text.lines().filter(|l| l.starts_with(|c: char| c.is_ascii_digit())).count(), 2);
        assert!(text.contains("\n\n"));
    }
}

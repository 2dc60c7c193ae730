//! Command-line front end. `main` only forwards to [`run_cli`].

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::bench::{self, ExperimentConfig, Family, GeneratorSpec, Grid};
use crate::budget::Budget;
use crate::dist;
use crate::error::{Error, Result};
use crate::format::{parse_bids, parse_instance, serialize_instance};
use crate::mechanisms::{self, MechanismKind};
use crate::model::{sincere_bids, BidProfile, Instance};
use crate::rational::{format_rational, to_f64, Rational};
use crate::strategy::{self, PneModel};
use crate::welfare::{self, EgalitarianMode, Ratio, WelfareKind};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_BUDGET: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "likefair", version, about = "Exact analysis of the Like and Balanced Like mechanisms")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Target {
    /// like or balanced
    #[arg(long)]
    mechanism: MechanismKind,
    #[arg(long)]
    instance: PathBuf,
}

#[derive(Debug, Args)]
struct Objective {
    /// egal or util
    #[arg(long, default_value = "egal")]
    kind: WelfareKind,
    /// min-exp or exp-min
    #[arg(long, default_value = "min-exp")]
    mode: EgalitarianMode,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// One seeded run; prints `item -> agent|none` lines.
    Run {
        #[command(flatten)]
        target: Target,
        /// Bid file; sincere bids when omitted.
        #[arg(long)]
        bids: Option<PathBuf>,
        #[arg(long)]
        seed: u64,
    },
    /// Item probabilities and expected utilities.
    Dist {
        #[command(flatten)]
        target: Target,
        #[arg(long)]
        bids: Option<PathBuf>,
        #[arg(long)]
        csv: bool,
        /// Cap on every enumeration (tree nodes, DP states, profiles).
        #[arg(long)]
        budget: Option<u64>,
    },
    /// Pure Nash equilibria by exhaustive search.
    Nash {
        #[command(flatten)]
        target: Target,
        /// Liked-subset strategies with a per-like cost.
        #[arg(long, conflicts_with = "model")]
        simple: bool,
        /// simple, restricted (liked subsets, no like cost) or full.
        #[arg(long)]
        model: Option<PneModel>,
        #[arg(long)]
        budget: Option<u64>,
    },
    /// Expected welfare of a bid profile.
    Welfare {
        #[command(flatten)]
        target: Target,
        #[arg(long)]
        bids: Option<PathBuf>,
        #[command(flatten)]
        objective: Objective,
        #[arg(long)]
        budget: Option<u64>,
    },
    /// Competitive ratio of sincere bidding.
    Ratio {
        #[command(flatten)]
        target: Target,
        #[command(flatten)]
        objective: Objective,
        #[arg(long)]
        budget: Option<u64>,
    },
    /// Prices of anarchy and stability over equilibria.
    Poa {
        #[command(flatten)]
        target: Target,
        #[command(flatten)]
        objective: Objective,
        #[arg(long, default_value = "simple")]
        model: PneModel,
        #[arg(long)]
        budget: Option<u64>,
    },
    /// Generate an instance file.
    Gen {
        #[arg(long)]
        family: Family,
        #[arg(long)]
        k: usize,
        #[arg(long)]
        m: usize,
        #[arg(long)]
        seed: u64,
        /// Copy weight of polya-borda.
        #[arg(long, value_parser = parse_probability)]
        alpha: Option<Rational>,
        /// Like probability of random01.
        #[arg(long, value_parser = parse_probability)]
        p: Option<Rational>,
        /// Output file, `-` for stdout.
        #[arg(short = 'o', long = "output")]
        output: PathBuf,
    },
    /// Sweep a grid of (k, m) cells and write per-instance ratios.
    Experiment {
        /// e.g. k=2..5,m=2..10
        #[arg(long)]
        grid: Grid,
        #[arg(long, default_value_t = 100)]
        samples: usize,
        #[arg(long)]
        master_seed: u64,
        #[arg(long)]
        csv: PathBuf,
        #[arg(long)]
        plot_data: Option<PathBuf>,
        #[arg(long, default_value = "random01")]
        family: Family,
        #[arg(long, value_parser = parse_probability)]
        alpha: Option<Rational>,
        #[arg(long, value_parser = parse_probability)]
        p: Option<Rational>,
        #[command(flatten)]
        objective: Objective,
        #[arg(long, default_value = "simple")]
        model: PneModel,
        #[arg(long)]
        budget: Option<u64>,
    },
}

fn parse_probability(s: &str) -> std::result::Result<Rational, String> {
    crate::rational::parse_rational(s).ok_or_else(|| format!("{s:?} is not a rational number"))
}

fn budget(cap: Option<u64>) -> Budget {
    match cap {
        None => Budget::default(),
        Some(n) => Budget { tree_nodes: n, dp_states: n, profiles: n, search_nodes: n },
    }
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

fn load_instance(path: &Path) -> Result<Instance> {
    parse_instance(&read(path)?)
}

fn load_bids(path: Option<&Path>, instance: &Instance) -> Result<BidProfile> {
    let bids = match path {
        Some(p) => parse_bids(&read(p)?)?,
        None => sincere_bids(instance),
    };
    bids.matches(instance)?;
    Ok(bids)
}

fn decimal(r: &Rational) -> String {
    format!("{:.6}", to_f64(r))
}

fn show(r: &Rational) -> String {
    format!("{} ({})", format_rational(r), decimal(r))
}

fn show_ratio(r: &Ratio) -> String {
    match r {
        Ratio::Finite(v) => show(v),
        other => other.to_string(),
    }
}

fn join(values: &[Rational]) -> String {
    values.iter().map(format_rational).collect::<Vec<_>>().join(" ")
}

/// Parses `args` (program name first) and executes the command, returning the
/// process exit code.
pub fn run_cli<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if e.use_stderr() { err.write_all(text.as_bytes()) } else { out.write_all(text.as_bytes()) };
            return code;
        }
    };
    match execute(cli.command, out) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            if e.is_budget() {
                EXIT_BUDGET
            } else {
                EXIT_USAGE
            }
        }
    }
}

fn execute(command: Command, out: &mut dyn Write) -> Result<()> {
    let mut buf = String::new();
    match command {
        Command::Run { target, bids, seed } => {
            let instance = load_instance(&target.instance)?;
            let bids = load_bids(bids.as_deref(), &instance)?;
            buf += &mechanisms::run(target.mechanism, &bids, seed).to_string();
        }
        Command::Dist { target, bids, csv, budget: cap } => {
            let instance = load_instance(&target.instance)?;
            let bids = load_bids(bids.as_deref(), &instance)?;
            let probs = dist::item_probabilities(target.mechanism, &bids, &budget(cap))?;
            let eu = probs.expected_utilities(&instance);
            if csv {
                let mut header = vec!["agent".to_string()];
                header.extend((0..instance.num_items()).map(|j| format!("item_{j}")));
                header.push("expected_utility".into());
                buf += &header.join(",");
                buf.push('\n');
                for (agent, row) in probs.rows().iter().enumerate() {
                    let mut cells = vec![agent.to_string()];
                    cells.extend(row.iter().map(format_rational));
                    cells.push(format_rational(&eu[agent]));
                    buf += &cells.join(",");
                    buf.push('\n');
                }
            } else {
                buf += "item probabilities (agent rows, item columns):\n";
                for row in probs.rows() {
                    buf += &format!("  {}\n", join(row));
                }
                buf += "expected utilities:\n";
                for (agent, v) in eu.iter().enumerate() {
                    buf += &format!("  agent {agent}: {}\n", show(v));
                }
            }
        }
        Command::Nash { target, simple, model, budget: cap } => {
            let instance = load_instance(&target.instance)?;
            let model = model.unwrap_or(PneModel::from_simple(simple));
            let report = strategy::enumerate_pne_in(target.mechanism, &instance, model, &budget(cap))?;
            buf += &format!(
                "{} {} equilibria over {} profiles ({})\n",
                report.equilibria.len(),
                model,
                report.profiles_searched,
                target.mechanism
            );
            for eq in &report.equilibria {
                let exp_min = eq.egalitarian_expected_min.as_ref().map_or("over budget".to_string(), format_rational);
                buf += &format!(
                    "{}  eu [{}]  util {}  egal min-exp {}  exp-min {}\n",
                    eq.profile,
                    join(&eq.utilities),
                    format_rational(&eq.utilitarian),
                    format_rational(&eq.egalitarian_min_of_expected),
                    exp_min
                );
            }
        }
        Command::Welfare { target, bids, objective, budget: cap } => {
            let instance = load_instance(&target.instance)?;
            let bids = load_bids(bids.as_deref(), &instance)?;
            let value = welfare::expected_welfare(
                target.mechanism,
                &instance,
                &bids,
                objective.kind,
                objective.mode,
                &budget(cap),
            )?;
            buf += &format!("expected {} welfare ({}): {}\n", objective.kind, objective.mode, show(&value));
        }
        Command::Ratio { target, objective, budget: cap } => {
            let instance = load_instance(&target.instance)?;
            let b = budget(cap);
            let (_, opt) = welfare::optimal_offline(&instance, objective.kind, &b)?;
            let achieved = welfare::expected_welfare(
                target.mechanism,
                &instance,
                &sincere_bids(&instance),
                objective.kind,
                objective.mode,
                &b,
            )?;
            buf += &format!("optimum: {}\n", show(&opt));
            buf += &format!("sincere expected welfare: {}\n", show(&achieved));
            buf += &format!("competitive ratio: {}\n", show_ratio(&Ratio::of(&opt, &achieved)));
        }
        Command::Poa { target, objective, model, budget: cap } => {
            let instance = load_instance(&target.instance)?;
            let poa = welfare::price_of_anarchy_in(
                target.mechanism,
                &instance,
                objective.kind,
                objective.mode,
                model,
                &budget(cap),
            )?;
            buf += &format!("optimum: {}\n", show(&poa.optimum));
            buf += &format!("equilibria: {} ({model})\n", poa.equilibria);
            buf += &format!("worst: {}  at {}\n", show_ratio(&poa.worst), poa.worst_profile);
            buf += &format!("best: {}  at {}\n", show_ratio(&poa.best), poa.best_profile);
        }
        Command::Gen { family, k, m, seed, alpha, p, output } => {
            let mut spec = GeneratorSpec::new(family, k, m, seed);
            if let Some(a) = alpha {
                spec.alpha = a;
            }
            if let Some(p) = p {
                spec.like_probability = p;
            }
            let text = format!(
                "# family={} seed={} p={} alpha={}\n{}",
                family,
                seed,
                format_rational(&spec.like_probability),
                format_rational(&spec.alpha),
                serialize_instance(&bench::generate(&spec)?)
            );
            if output.as_os_str() == "-" {
                buf += &text;
            } else {
                std::fs::write(&output, text).map_err(|e| Error::Io(format!("{}: {e}", output.display())))?;
            }
        }
        Command::Experiment {
            grid,
            samples,
            master_seed,
            csv,
            plot_data,
            family,
            alpha,
            p,
            objective,
            model,
            budget: cap,
        } => {
            let defaults = ExperimentConfig::default();
            let config = ExperimentConfig {
                family,
                like_probability: p.unwrap_or(defaults.like_probability),
                alpha: alpha.unwrap_or(defaults.alpha),
                samples,
                master_seed,
                welfare: objective.kind,
                mode: objective.mode,
                equilibria: model,
                budget: budget(cap),
            };
            let rows = bench::run_experiment(&grid, &config)?;
            let create = |path: &Path| {
                std::fs::File::create(path)
                    .map(std::io::BufWriter::new)
                    .map_err(|e| Error::Io(format!("{}: {e}", path.display())))
            };
            bench::write_csv(create(&csv)?, &grid, &config, &rows)?;
            let summaries = bench::summarize(&rows);
            if let Some(path) = plot_data {
                bench::write_plot_data(create(&path)?, &summaries)?;
            }
            buf += &format!("{} rows written to {}\n", rows.len(), csv.display());
            let flagged: Vec<_> = summaries.iter().filter(|s| s.balanced_not_worse() == Some(false)).collect();
            for s in &flagged {
                let (like, balanced) = s.paired_means.unwrap();
                buf += &format!(
                    "FLAG k={} m={}: balanced geometric mean {balanced:.6} exceeds like {like:.6} over {} instances\n",
                    s.k, s.m, s.paired
                );
            }
            if flagged.is_empty() {
                buf += &format!("trend holds: balanced ratio <= like ratio in all {} cells\n", summaries.len());
            }
        }
    }
    out.write_all(buf.as_bytes()).map_err(|e| Error::Io(e.to_string()))
}

//! Command-line interface: scenario analyses and built-in demonstrations.
//!
//! Exit codes: 0 analysis completed (whatever the verdict), 2 invalid input,
//! 3 an internal cap or size limit was exceeded.

use std::io::Write;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

use crate::efconstruct::{construct_envy_free_with_trace, EfError, DEFAULT_EVENT_CAP};
use crate::mechanisms::Mechanism;
use crate::model::{BidProfile, Instance};
use crate::oracle::{ef_exists, grid_nash_search, BudgetBidPolicy, GridSpec, OracleError};
use crate::rational::Rat;
use crate::realize::{realize_bcb, realize_bcbo, realize_bcp, RealizeError};
use crate::report::Report;
use crate::scenario::{demos, Scenario, ScenarioError};
use crate::stability::{
    best_response, check_nash, is_envy_free, replay_deviation, DeviationPolicy, NashCheckConfig,
    NashVerdict,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID_INPUT: i32 = 2;
pub const EXIT_LIMIT: i32 = 3;

#[derive(Parser, Debug)]
#[command(
    name = "budget-gsp",
    about = "Budget-aware generalized second price auctions: mechanisms, envy-free assignments, equilibrium checks",
    version
)]
pub struct Cli {
    /// Print only the machine-readable JSON block.
    #[arg(long, global = true)]
    pub json: bool,
    /// Seed for the randomized equilibrium cross-validation.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Run one mechanism on a scenario with bids.
    Run {
        #[arg(long)]
        mechanism: Mechanism,
        scenario: PathBuf,
    },
    /// Check a scenario's target outcome for envy-freeness.
    CheckEf { scenario: PathBuf },
    /// Decide whether the scenario's bid profile is a Nash equilibrium.
    CheckNash {
        #[arg(long)]
        mechanism: Mechanism,
        /// Restrict deviations to value-bids (public budgets).
        #[arg(long)]
        true_budgets: bool,
        scenario: PathBuf,
    },
    /// Best response of one player against the scenario's bid profile.
    BestResponse {
        #[arg(long)]
        mechanism: Mechanism,
        /// Player name from the scenario.
        #[arg(long)]
        player: String,
        /// Restrict deviations to value-bids (public budgets).
        #[arg(long)]
        true_budgets: bool,
        scenario: PathBuf,
    },
    /// Construct an envy-free assignment by iterative price lowering.
    ConstructEf {
        /// Include the per-event trace in the output.
        #[arg(long)]
        trace: bool,
        scenario: PathBuf,
    },
    /// Construct an envy-free assignment, realize it as a bid profile, and
    /// verify the round trip.
    Realize {
        /// bcp, bcb, or bcbo.
        #[arg(long)]
        mechanism: Mechanism,
        scenario: PathBuf,
    },
    /// Exhaustively decide envy-free existence (desk scale).
    EfExists { scenario: PathBuf },
    /// Exhaust a bid grid and report every Nash profile on it.
    GridSearch {
        #[arg(long)]
        mechanism: Mechanism,
        #[arg(long)]
        step: Rat,
        #[arg(long)]
        max: Rat,
        #[arg(long, default_value = "0")]
        min: Rat,
        /// Pin budget-bids to the true budgets (public-budget game).
        #[arg(long)]
        true_budgets: bool,
        scenario: PathBuf,
    },
    /// Run a built-in demonstration: fig1, fig2, fig3, fig4, or thm6.
    Demo { name: String },
}

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error(transparent)]
    Construct(#[from] EfError),
    #[error(transparent)]
    Realize(#[from] RealizeError),
    #[error("unknown demo {0:?}; expected fig1, fig2, fig3, fig4, or thm6")]
    UnknownDemo(String),
    #[error("{0} cannot realize an assignment; use bcp, bcb, or bcbo")]
    RealizeUnderBosp(Mechanism),
}

impl CliError {
    fn exit_code(&self) -> i32 {
        match self {
            CliError::Scenario(_) | CliError::Realize(_) | CliError::UnknownDemo(_) => {
                EXIT_INVALID_INPUT
            }
            CliError::RealizeUnderBosp(_) => EXIT_INVALID_INPUT,
            CliError::Construct(EfError::DistinctBudgetsRequired) => EXIT_INVALID_INPUT,
            CliError::Construct(_) => EXIT_LIMIT,
            CliError::Oracle(_) => EXIT_LIMIT,
        }
    }
}

/// Parses `argv` and runs it, writing the report to `out` and errors to
/// stderr. Returns the process exit code.
pub fn execute<W: Write>(argv: Vec<String>, out: &mut W) -> i32 {
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            // clap prints help/version on stdout with success.
            let code = if e.use_stderr() { EXIT_INVALID_INPUT } else { EXIT_OK };
            let _ = write!(out, "{e}");
            return code;
        }
    };
    let json = cli.json;
    match dispatch(cli) {
        Ok(report) => {
            let _ = write!(out, "{}", report.render(json));
            EXIT_OK
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn dispatch(cli: Cli) -> Result<Report, CliError> {
    let seed = cli.seed;
    match cli.command {
        Command::Run { mechanism, scenario } => {
            let scenario = Scenario::load(&scenario)?;
            cmd_run(&scenario, mechanism)
        }
        Command::CheckEf { scenario } => {
            let scenario = Scenario::load(&scenario)?;
            cmd_check_ef(&scenario)
        }
        Command::CheckNash {
            mechanism,
            true_budgets,
            scenario,
        } => {
            let scenario = Scenario::load(&scenario)?;
            cmd_check_nash(&scenario, mechanism, true_budgets, seed)
        }
        Command::BestResponse {
            mechanism,
            player,
            true_budgets,
            scenario,
        } => {
            let scenario = Scenario::load(&scenario)?;
            cmd_best_response(&scenario, mechanism, &player, true_budgets)
        }
        Command::ConstructEf { trace, scenario } => {
            let scenario = Scenario::load(&scenario)?;
            cmd_construct_ef(&scenario, trace)
        }
        Command::Realize { mechanism, scenario } => {
            let scenario = Scenario::load(&scenario)?;
            cmd_realize(&scenario, mechanism, seed)
        }
        Command::EfExists { scenario } => {
            let scenario = Scenario::load(&scenario)?;
            cmd_ef_exists(&scenario)
        }
        Command::GridSearch {
            mechanism,
            step,
            max,
            min,
            true_budgets,
            scenario,
        } => {
            let scenario = Scenario::load(&scenario)?;
            cmd_grid_search(&scenario, mechanism, min, max, step, true_budgets, seed, true)
        }
        Command::Demo { name } => cmd_demo(&name, seed),
    }
}

fn base_report(
    command: &str,
    scenario: &Scenario,
) -> Result<(Report, Instance), CliError> {
    let (instance, warnings) = scenario.instance()?;
    let mut report = Report::new(command, scenario.player_names());
    report.warnings = warnings
        .iter()
        .map(|w| match *w {
            crate::model::ValidationWarning::DuplicateBudget(i, j) => format!(
                "{} and {} declare the same budget",
                scenario.players[i].name, scenario.players[j].name
            ),
        })
        .collect();
    Ok((report, instance))
}

fn cmd_run(scenario: &Scenario, mechanism: Mechanism) -> Result<Report, CliError> {
    let (mut report, instance) = base_report("run", scenario)?;
    let bids = scenario.bid_profile(&instance)?;
    let outcome = mechanism.run(&instance, &bids);
    report.mechanism = Some(mechanism.name().into());
    report.outcome = Some(Report::outcome_rows(
        &instance,
        &outcome,
        &scenario.player_names(),
    ));
    report.verdict = Some("completed".into());
    Ok(report)
}

fn cmd_check_ef(scenario: &Scenario) -> Result<Report, CliError> {
    let (mut report, instance) = base_report("check-ef", scenario)?;
    let outcome = scenario.target_outcome(&instance)?;
    report.outcome = Some(Report::outcome_rows(
        &instance,
        &outcome,
        &scenario.player_names(),
    ));
    match is_envy_free(&instance, &outcome) {
        Ok(()) => report.verdict = Some("envy-free".into()),
        Err(certs) => {
            report.verdict = Some("not-envy-free".into());
            report.certificates = certs;
        }
    }
    Ok(report)
}

fn cmd_check_nash(
    scenario: &Scenario,
    mechanism: Mechanism,
    true_budgets: bool,
    seed: u64,
) -> Result<Report, CliError> {
    let (mut report, instance) = base_report("check-nash", scenario)?;
    let bids = scenario.bid_profile(&instance)?;
    let config = NashCheckConfig {
        policy: if true_budgets {
            DeviationPolicy::ValueOnly
        } else {
            DeviationPolicy::ValueAndBudget
        },
        seed,
        ..NashCheckConfig::default()
    };
    let outcome = mechanism.run(&instance, &bids);
    report.mechanism = Some(mechanism.name().into());
    report.outcome = Some(Report::outcome_rows(
        &instance,
        &outcome,
        &scenario.player_names(),
    ));
    match check_nash(&instance, mechanism, &bids, config) {
        NashVerdict::Nash => report.verdict = Some("nash".into()),
        NashVerdict::NotNash(cert) => {
            assert!(replay_deviation(&instance, mechanism, &bids, &cert));
            report.verdict = Some("not-nash".into());
            report.certificates = vec![cert];
        }
    }
    Ok(report)
}

fn cmd_best_response(
    scenario: &Scenario,
    mechanism: Mechanism,
    player: &str,
    true_budgets: bool,
) -> Result<Report, CliError> {
    let (mut report, instance) = base_report("best-response", scenario)?;
    let bids = scenario.bid_profile(&instance)?;
    let index = scenario.player_index(player)?;
    let policy = if true_budgets {
        DeviationPolicy::ValueOnly
    } else {
        DeviationPolicy::ValueAndBudget
    };
    let current = crate::model::utility(index, &mechanism.run(&instance, &bids), &instance);
    let (best, witness) = best_response(&instance, mechanism, &bids, index, policy);
    report.mechanism = Some(mechanism.name().into());
    report.verdict = Some(if best > current {
        "improvable".into()
    } else {
        "at-optimum".into()
    });
    report.data.insert("player".into(), player.to_string());
    report.data.insert("current_utility".into(), current.to_string());
    report.data.insert("best_utility".into(), best.to_string());
    report
        .data
        .insert("witness_value_bid".into(), witness.value_bid.to_string());
    report
        .data
        .insert("witness_budget_bid".into(), witness.budget_bid.to_string());
    Ok(report)
}

fn cmd_construct_ef(scenario: &Scenario, trace: bool) -> Result<Report, CliError> {
    let (mut report, instance) = base_report("construct-ef", scenario)?;
    let (outcome, events) = construct_envy_free_with_trace(&instance, DEFAULT_EVENT_CAP)?;
    report.outcome = Some(Report::outcome_rows(
        &instance,
        &outcome,
        &scenario.player_names(),
    ));
    report.verdict = Some("envy-free".into());
    report.data.insert("events".into(), events.len().to_string());
    if trace {
        let lines: Vec<String> = events
            .iter()
            .map(|e| {
                format!(
                    "{:?} slot {} price {}{}",
                    e.case,
                    e.slot + 1,
                    e.price,
                    match e.player {
                        Some(p) => format!(" player {}", scenario.players[p].name),
                        None => String::new(),
                    }
                )
            })
            .collect();
        report.data.insert("trace".into(), lines.join(" | "));
    }
    Ok(report)
}

fn cmd_realize(scenario: &Scenario, mechanism: Mechanism, seed: u64) -> Result<Report, CliError> {
    let (mut report, instance) = base_report("realize", scenario)?;
    let (ef, _) = construct_envy_free_with_trace(&instance, DEFAULT_EVENT_CAP)?;
    let bids: BidProfile = match mechanism {
        Mechanism::Bcp => realize_bcp(&instance, &ef)?,
        Mechanism::Bcb => realize_bcb(&instance, &ef)?.bids,
        Mechanism::Bcbo => realize_bcbo(&instance, &ef)?,
        Mechanism::Bosp => return Err(CliError::RealizeUnderBosp(mechanism)),
    };
    let reproduced = mechanism.run(&instance, &bids);
    let exact = reproduced == ef;
    report.mechanism = Some(mechanism.name().into());
    report.outcome = Some(Report::outcome_rows(
        &instance,
        &reproduced,
        &scenario.player_names(),
    ));
    for (i, name) in scenario.player_names().iter().enumerate() {
        report.data.insert(
            format!("bid_{name}"),
            format!("{}/{}", bids.bid(i).value_bid, bids.bid(i).budget_bid),
        );
    }
    report
        .data
        .insert("round_trip".into(), if exact { "exact" } else { "mismatch" }.into());
    if matches!(mechanism, Mechanism::Bcb | Mechanism::Bcbo) {
        let verdict = check_nash(
            &instance,
            mechanism,
            &bids,
            NashCheckConfig {
                seed,
                ..NashCheckConfig::default()
            },
        );
        report
            .data
            .insert("equilibrium".into(), if verdict.is_nash() { "nash" } else { "not-nash" }.into());
    }
    report.verdict = Some(if exact { "realized-exactly" } else { "round-trip-mismatch" }.into());
    Ok(report)
}

fn cmd_ef_exists(scenario: &Scenario) -> Result<Report, CliError> {
    let (mut report, instance) = base_report("ef-exists", scenario)?;
    match ef_exists(&instance)? {
        Some(witness) => {
            report.verdict = Some("exists".into());
            report.outcome = Some(Report::outcome_rows(
                &instance,
                &witness,
                &scenario.player_names(),
            ));
        }
        None => report.verdict = Some("not-exists".into()),
    }
    Ok(report)
}

#[allow(clippy::too_many_arguments)]
fn cmd_grid_search(
    scenario: &Scenario,
    mechanism: Mechanism,
    min: Rat,
    max: Rat,
    step: Rat,
    true_budgets: bool,
    seed: u64,
    progress: bool,
) -> Result<Report, CliError> {
    let (mut report, instance) = base_report("grid-search", scenario)?;
    let grid = GridSpec {
        lo: min,
        hi: max,
        step,
        policy: if true_budgets {
            BudgetBidPolicy::TrueBudgets
        } else {
            BudgetBidPolicy::Grid
        },
    };
    let config = NashCheckConfig {
        seed,
        ..NashCheckConfig::default()
    };
    let search = grid_nash_search(&instance, mechanism, &grid, config, progress)?;
    report.mechanism = Some(mechanism.name().into());
    report
        .data
        .insert("profiles".into(), search.total_profiles.to_string());
    report
        .data
        .insert("nash_count".into(), search.nash_profiles.len().to_string());
    for (index, bids) in search.nash_profiles.iter().take(8) {
        let rendered: Vec<String> = (0..instance.player_count())
            .map(|i| format!("{}/{}", bids.bid(i).value_bid, bids.bid(i).budget_bid))
            .collect();
        report
            .data
            .insert(format!("nash_profile_{index}"), rendered.join(" "));
    }
    report.certificates = search
        .sampled_refutations
        .iter()
        .take(8)
        .map(|(_, _, c)| c.clone())
        .collect();
    report.verdict = Some(if search.nash_profiles.is_empty() {
        // Evidence, not proof: the grid is finite.
        "no-equilibrium-on-grid (consistent with nonexistence)".into()
    } else {
        format!("{} equilibria on grid", search.nash_profiles.len())
    });
    Ok(report)
}

fn cmd_demo(name: &str, seed: u64) -> Result<Report, CliError> {
    let scenario =
        demos::by_name(name).ok_or_else(|| CliError::UnknownDemo(name.to_string()))?;
    match name {
        "fig1" => {
            let mut report = cmd_ef_exists(&scenario)?;
            report.command = "demo fig1".into();
            Ok(report)
        }
        "fig2" => {
            let mut report = cmd_check_nash(&scenario, Mechanism::Bcp, false, seed)?;
            report.command = "demo fig2".into();
            Ok(report)
        }
        "fig3" => {
            let mut report = cmd_grid_search(
                &scenario,
                Mechanism::Bosp,
                Rat::ZERO,
                Rat::new(15, 1),
                Rat::new(1, 2),
                true,
                seed,
                false,
            )?;
            report.command = "demo fig3".into();
            Ok(report)
        }
        "fig4" => {
            let mut report = cmd_grid_search(
                &scenario,
                Mechanism::Bcp,
                Rat::ZERO,
                Rat::new(51, 1),
                Rat::new(1, 2),
                true,
                seed,
                false,
            )?;
            report.command = "demo fig4".into();
            Ok(report)
        }
        "thm6" => {
            let (instance, _) = scenario.instance()?;
            assert!(
                demos::thm6_chain_holds(&instance),
                "embedded four-player instance must satisfy the threshold chain"
            );
            // Full sweep under the own-bid rule; the best-offer rule is
            // sampled on a sublattice because its equilibria are plentiful
            // and each positive verdict runs the full validation.
            let mut report = cmd_grid_search(
                &scenario,
                Mechanism::Bcb,
                Rat::ZERO,
                Rat::new(2100, 1),
                Rat::new(50, 1),
                true,
                seed,
                false,
            )?;
            report.command = "demo thm6".into();
            let bcbo = cmd_grid_search(
                &scenario,
                Mechanism::Bcbo,
                Rat::ZERO,
                Rat::new(2100, 1),
                Rat::new(300, 1),
                true,
                seed,
                false,
            )?;
            report.data.insert(
                "bcbo_sublattice_profiles".into(),
                bcbo.data.get("profiles").cloned().unwrap_or_default(),
            );
            report.data.insert(
                "bcbo_sublattice_nash_count".into(),
                bcbo.data.get("nash_count").cloned().unwrap_or_default(),
            );
            Ok(report)
        }
        _ => Err(CliError::UnknownDemo(name.to_string())),
    }
}

//! Command-line front-end: the headline analysis pipeline, the simulation
//! suites, bound verification, and construction utilities.
//!
//! Exit codes: 0 when everything passes, 1 when a verification assertion
//! fails, 2 on usage or I/O errors.

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use compound_bh::bounds::{
    c_sequence, globalnull_closed_bound, hoeffding_poisson_bound, poisson_argmax_check,
    poisson_identity, TailMode,
};
use compound_bh::constructions::decreasing_density_pvalues;
use compound_bh::sim::{run_suite, SuiteName, SuiteParams};
use compound_bh_cli::{analyze, ingest_headline_csv, AnalyzeOptions, DigitMode, IngestOptions};

#[derive(Parser)]
#[command(
    name = "compound-bh",
    about = "BH multiple testing with pooled (compound) p-values: analysis pipeline, simulation suites, and bound verification"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Analyze a headline click-rate CSV: permutation vs pooled p-values.
    Analyze(AnalyzeArgs),
    /// Run a named Monte Carlo verification suite.
    Simulate(SimulateArgs),
    /// Check the numeric recursions and closed forms behind the FDR bounds.
    VerifyBounds(VerifyBoundsArgs),
    /// Construction utilities.
    #[command(subcommand)]
    Construct(ConstructCommand),
}

#[derive(Args)]
struct AnalyzeArgs {
    /// Input CSV with per-headline impression and click counts.
    #[arg(long)]
    input: PathBuf,
    /// BH level; repeat for several levels.
    #[arg(long = "alpha", default_values_t = vec![0.2, 0.5])]
    alphas: Vec<f64>,
    /// Keep only articles with strictly more than this many headlines.
    #[arg(long)]
    min_headlines: Option<usize>,
    /// Enumerate group assignments exactly up to this count per article.
    #[arg(long, default_value_t = compound_bh::constructions::DEFAULT_EXACT_CAP)]
    exact_cap: u64,
    /// Seed for Monte Carlo assignment sampling on large articles.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Write <prefix>_scatter.csv, <prefix>_sorted_curve.csv, and
    /// <prefix>_discoveries.csv.
    #[arg(long)]
    out_prefix: Option<String>,
    /// Write the full report as JSON.
    #[arg(long)]
    json: Option<PathBuf>,
    /// Digit detection: 'ascii' (0-9) or 'unicode' (any decimal digit).
    #[arg(long, default_value = "ascii")]
    digit_mode: String,
    /// Column holding the article identifier.
    #[arg(long, default_value = "clickability_test_id")]
    col_article: String,
    /// Column holding the headline text.
    #[arg(long, default_value = "headline")]
    col_headline: String,
    /// Column holding the impression count.
    #[arg(long, default_value = "impressions")]
    col_impressions: String,
    /// Column holding the click count.
    #[arg(long, default_value = "clicks")]
    col_clicks: String,
}

#[derive(Args)]
struct SimulateArgs {
    /// One of thm1, thm2, thm3, gamma, props.
    #[arg(long, conflicts_with = "scenario")]
    suite: Option<String>,
    /// Estimate FDR for a single scenario JSON file instead of a suite.
    #[arg(long, requires = "alpha")]
    scenario: Option<PathBuf>,
    /// BH level for --scenario runs.
    #[arg(long)]
    alpha: Option<f64>,
    /// Replicates per scenario (suite-specific default when omitted).
    #[arg(long)]
    reps: Option<u64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Write the JSON report here.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write the flat CSV report here.
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyBoundsArgs {
    /// Convergence tolerance for the c-sequence.
    #[arg(long, default_value_t = 1e-9)]
    tol: f64,
    /// Length of the c-sequence.
    #[arg(long = "L", default_value_t = 500)]
    len: usize,
    /// Write the JSON report here.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum ConstructCommand {
    /// Envelope p-values for nonincreasing-density nulls, from a file of
    /// nonnegative values (one per line).
    DecreasingDensity {
        #[arg(long)]
        input: PathBuf,
        /// Write the CSV here instead of standard output.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write a named worst-case (or fuzz) scenario as JSON.
    Scenario {
        /// One of prop2, prop4, prop5, random, global-null, uniform.
        #[arg(long)]
        kind: String,
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long)]
        m: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 12)]
        max_atoms: usize,
        /// Write the scenario JSON here instead of standard output.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Serialize)]
struct BoundCheck {
    name: String,
    computed: f64,
    reference: f64,
    pass: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(all_pass) => {
            if all_pass {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> Result<bool, Box<dyn std::error::Error>> {
    match cli.command {
        Command::Analyze(args) => run_analyze(args),
        Command::Simulate(args) => run_simulate(args),
        Command::VerifyBounds(args) => run_verify_bounds(args),
        Command::Construct(ConstructCommand::DecreasingDensity { input, out }) => {
            run_decreasing_density(input, out)
        }
        Command::Construct(ConstructCommand::Scenario {
            kind,
            alpha,
            m,
            seed,
            max_atoms,
            out,
        }) => run_construct_scenario(&kind, alpha, m, seed, max_atoms, out),
    }
}

fn run_analyze(args: AnalyzeArgs) -> Result<bool, Box<dyn std::error::Error>> {
    let digit_mode = match args.digit_mode.as_str() {
        "ascii" => DigitMode::Ascii,
        "unicode" => DigitMode::Unicode,
        other => return Err(format!("unknown digit mode '{other}'").into()),
    };
    let opts = IngestOptions {
        schema: compound_bh_cli::SchemaMap {
            article: args.col_article,
            headline: args.col_headline,
            impressions: args.col_impressions,
            clicks: args.col_clicks,
        },
        digit_mode,
        min_headlines: args.min_headlines,
    };
    let set = ingest_headline_csv(&args.input, &opts)?;
    eprintln!(
        "ingested: {} rows ({} malformed), {} articles seen, {} kept ({} headlines); dropped {} without digit/non-digit contrast, {} below the headline threshold",
        set.stats.rows_read,
        set.stats.rows_bad,
        set.stats.articles_seen,
        set.stats.articles_kept,
        set.stats.headlines_kept,
        set.stats.dropped_no_contrast,
        set.stats.dropped_min_headlines,
    );
    let report = analyze(
        &set,
        &AnalyzeOptions {
            alphas: args.alphas,
            exact_cap: args.exact_cap,
            seed: args.seed,
        },
    )?;
    if report.approximated_trials > 0 {
        eprintln!(
            "note: {} articles exceeded the exact enumeration cap and used seeded Monte Carlo assignments",
            report.approximated_trials
        );
    }
    print!("{}", report.table());
    if let Some(prefix) = args.out_prefix {
        fs::write(format!("{prefix}_scatter.csv"), report.scatter_csv())?;
        fs::write(
            format!("{prefix}_sorted_curve.csv"),
            report.sorted_curve_csv(),
        )?;
        fs::write(
            format!("{prefix}_discoveries.csv"),
            report.discoveries_csv(),
        )?;
    }
    if let Some(path) = args.json {
        fs::write(path, report.to_json())?;
    }
    Ok(true)
}

fn run_simulate(args: SimulateArgs) -> Result<bool, Box<dyn std::error::Error>> {
    if let Some(path) = &args.scenario {
        return run_simulate_scenario(path, &args);
    }
    let suite_name = args
        .suite
        .as_deref()
        .ok_or("simulate needs either --suite or --scenario")?;
    let suite: SuiteName = suite_name.parse()?;
    let report = run_suite(
        suite,
        &SuiteParams {
            reps: args.reps,
            seed: args.seed,
        },
    )?;
    for e in &report.entries {
        println!(
            "{} {:<28} alpha={:<5} estimate={:.6} se={:.6} reference={:.6} [{}]",
            if e.pass { "PASS" } else { "FAIL" },
            e.scenario,
            e.alpha,
            e.estimate.mean,
            e.estimate.se,
            e.reference,
            e.metric,
        );
    }
    println!(
        "suite {suite_name}: {}/{} scenarios pass",
        report.entries.iter().filter(|e| e.pass).count(),
        report.entries.len()
    );
    if let Some(path) = args.out {
        fs::write(path, report.to_json())?;
    }
    if let Some(path) = args.csv {
        fs::write(path, report.to_csv())?;
    }
    Ok(report.all_pass)
}

fn run_simulate_scenario(
    path: &PathBuf,
    args: &SimulateArgs,
) -> Result<bool, Box<dyn std::error::Error>> {
    let scenario = compound_bh::adversarial::AtomScenario::from_json(&fs::read_to_string(path)?)?;
    let alpha = args.alpha.expect("clap enforces --alpha with --scenario");
    let cfg = compound_bh::sim::ExperimentConfig::new(
        alpha,
        args.reps.unwrap_or(100_000),
        args.seed,
        compound_bh::sim::Metric::Fdr,
    )?;
    let est = compound_bh::sim::estimate_fdr(&scenario, &cfg);
    println!(
        "scenario {}: alpha={alpha} estimate={:.6} se={:.6} reps={} seed={}{}",
        path.display(),
        est.mean,
        est.se,
        est.reps,
        est.seed,
        est.exact
            .map(|e| format!(" exact={e:.6}"))
            .unwrap_or_default()
    );
    if let Some(out) = &args.out {
        fs::write(out, serde_json::to_string_pretty(&est)?)?;
    }
    Ok(true)
}

fn run_verify_bounds(args: VerifyBoundsArgs) -> Result<bool, Box<dyn std::error::Error>> {
    let mut checks: Vec<BoundCheck> = Vec::new();
    let mut push = |name: &str, computed: f64, reference: f64, pass: bool| {
        checks.push(BoundCheck {
            name: name.to_string(),
            computed,
            reference,
            pass,
        });
    };

    let cs = c_sequence(args.len, args.tol)?;
    push("c_sequence.c1", cs.values[0], 1.0, cs.values[0] == 1.0);
    push("c_sequence.c2", cs.values[1], 1.5, cs.values[1] == 1.5);
    let min_increment = cs
        .values
        .windows(2)
        .map(|w| w[1] - w[0])
        .fold(f64::INFINITY, f64::min);
    push(
        "c_sequence.nondecreasing",
        min_increment,
        0.0,
        min_increment >= -1e-14,
    );
    push(
        "c_sequence.limit",
        cs.last(),
        1.9227 + 1e-6,
        cs.last() <= 1.9227 + 1e-6,
    );
    let converged = cs.converged_at.map(|i| i as f64).unwrap_or(f64::INFINITY);
    push(
        "c_sequence.converged_at",
        converged,
        args.len as f64,
        converged <= args.len as f64,
    );

    for &t in &[0.1, 0.3, 0.5, 0.7, 0.9] {
        for (mode, label) in [(TailMode::Geq, "geq"), (TailMode::Gt, "gt")] {
            let id = poisson_identity(t, mode, 20_000)?;
            let diff = (id.series - id.closed).abs();
            push(
                &format!("poisson_identity.{label}.t{t}"),
                diff,
                1e-8,
                diff <= 1e-8,
            );
        }
    }

    let grid = 40_000;
    let mut worst_steps = 0.0f64;
    for i in 2..=10usize {
        for &c in &[1.0, 1.5, 1.9227] {
            let t_star = poisson_argmax_check(i, c, grid)?;
            let expect = (i as f64 - 1.0) / c;
            let step = 4.0 * i as f64 / c / grid as f64;
            worst_steps = worst_steps.max((t_star - expect).abs() / step);
        }
    }
    push(
        "poisson_argmax.max_grid_steps_off",
        worst_steps,
        1.0,
        worst_steps <= 1.0 + 1e-9,
    );

    let v = globalnull_closed_bound(0.2)?;
    push(
        "globalnull_bound.alpha0.2",
        v,
        0.23125,
        (v - 0.23125).abs() < 1e-12,
    );
    let mut worst_excess = f64::NEG_INFINITY;
    for g in 0..=500 {
        let a = 0.5 * g as f64 / 500.0;
        worst_excess = worst_excess.max(globalnull_closed_bound(a)? - (a + 2.0 * a * a));
    }
    push(
        "globalnull_bound.dominated_on_half_interval",
        worst_excess,
        0.0,
        worst_excess <= 1e-12,
    );

    let b1 = hoeffding_poisson_bound(0.3, 1)?.get();
    push("hoeffding.i1", b1, 0.3, (b1 - 0.3).abs() < 1e-15);
    let b2 = hoeffding_poisson_bound(0.4, 2)?.get();
    push("hoeffding.i2", b2, 0.08, (b2 - 0.08).abs() < 1e-15);
    let b3 = hoeffding_poisson_bound(1.0, 3)?.get();
    push(
        "hoeffding.i3",
        b3,
        0.080_301_397_071_394_2,
        (b3 - 0.080_301_397_071_394_2).abs() < 1e-12,
    );

    let all_pass = checks.iter().all(|c| c.pass);
    for c in &checks {
        println!(
            "{} {:<45} computed={:.12e} reference={:.12e}",
            if c.pass { "PASS" } else { "FAIL" },
            c.name,
            c.computed,
            c.reference
        );
    }
    if let Some(path) = args.out {
        fs::write(path, serde_json::to_string_pretty(&checks)?)?;
    }
    Ok(all_pass)
}

fn run_construct_scenario(
    kind: &str,
    alpha: Option<f64>,
    m: usize,
    seed: u64,
    max_atoms: usize,
    out: Option<PathBuf>,
) -> Result<bool, Box<dyn std::error::Error>> {
    use compound_bh::adversarial::{
        compound_validity_check, discrete_uniform_scenario, prop2_scenario, prop4_scenario,
        prop5_scenario, random_atom_scenario, random_global_null_scenario,
    };
    let need_alpha = || alpha.ok_or(format!("--alpha is required for kind '{kind}'"));
    let scenario = match kind {
        "prop2" => prop2_scenario(need_alpha()?, m)?,
        "prop4" => prop4_scenario(need_alpha()?, m)?,
        "prop5" => prop5_scenario(need_alpha()?, m)?,
        "uniform" => discrete_uniform_scenario(need_alpha()?, m)?,
        "random" => random_atom_scenario(m, seed, max_atoms),
        "global-null" => random_global_null_scenario(m, seed, max_atoms),
        other => return Err(format!("unknown scenario kind '{other}'").into()),
    };
    eprintln!(
        "scenario {kind}: m={m}, |H0|={}, validity slack {:.3e}{}",
        scenario.h0().len(),
        compound_validity_check(&scenario),
        scenario
            .exact_fdr()
            .map(|e| format!(", exact FDR {e:.6}"))
            .unwrap_or_default()
    );
    let json = scenario.to_json();
    match out {
        Some(path) => fs::write(path, json)?,
        None => println!("{json}"),
    }
    Ok(true)
}

fn run_decreasing_density(
    input: PathBuf,
    out: Option<PathBuf>,
) -> Result<bool, Box<dyn std::error::Error>> {
    let raw = fs::read_to_string(&input)?;
    let mut values = Vec::new();
    for (lineno, line) in raw.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let v: f64 = line
            .parse()
            .map_err(|e| format!("line {}: {e}", lineno + 1))?;
        values.push(v);
    }
    let p = decreasing_density_pvalues(&values)?;
    let mut csv = String::from("index,value,pvalue\n");
    for (i, (&x, &pv)) in values.iter().zip(p.values()).enumerate() {
        csv.push_str(&format!("{},{},{}\n", i + 1, x, pv));
    }
    match out {
        Some(path) => fs::write(path, csv)?,
        None => print!("{csv}"),
    }
    Ok(true)
}

//! `comptest`: power-enhanced two-sample tests for compositional count data.

mod error;
mod input;
mod io;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand, ValueEnum};
use comptest::dist::{key_hash, RngStream};
use comptest::harness::{permutation_size_study, run_grid, GridConfig, RunOptions};
use comptest::{filter_min_total, run_all_tests, CombinationWeights, CountMatrix, Method};

use error::{CliError, CliResult};
use input::{preprocess, GroupArgs, InputDigest};
use io::{format_table, parse_table, read_bytes, sha256_hex, IdColumn, Table};
use report::{
    to_json, write_file, MethodResult, PermuteParams, PermuteReport, RunReport, SimulateParams,
    SimulateReport, TestParams, TOOL_VERSION,
};

#[derive(Debug, Parser)]
#[command(name = "comptest", version, about = "Two-sample mean tests for compositional data")]
struct Cli {
    /// Worker threads for simulation and permutation runs.
    #[arg(long, global = true, env = "COMPTEST_THREADS")]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Test whether two groups of count samples share a CLR mean.
    Test(TestArgs),
    /// Run a simulation grid described by a JSON config.
    Simulate(SimulateArgs),
    /// Empirical size of the tests over random relabellings of the pooled data.
    Permute(PermuteArgs),
    /// Drop taxa whose total count is below a threshold.
    Filter(FilterArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum TestChoice {
    Max,
    Quad,
    Fisher,
    Cauchy,
    All,
}

#[derive(Debug, clap::Args)]
struct CommonTestArgs {
    /// Significance level.
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,

    /// Value substituted for zero counts.
    #[arg(long, default_value_t = 0.5)]
    pseudo_count: f64,

    /// Cauchy combination weights as `w_max:w_quad`.
    #[arg(long, default_value = "0.5:0.5")]
    weights: String,

    /// Drop taxa whose pooled total count is below this value first.
    #[arg(long)]
    min_count: Option<f64>,

    /// Drop CLR columns with zero pooled variance instead of failing.
    #[arg(long)]
    drop_degenerate: bool,
}

#[derive(Debug, clap::Args)]
struct TestArgs {
    #[command(flatten)]
    groups: GroupArgs,

    #[command(flatten)]
    common: CommonTestArgs,

    /// Which tests to report; repeat or comma-separate.
    #[arg(long = "test", value_enum, value_delimiter = ',', default_value = "all")]
    tests: Vec<TestChoice>,

    /// Recorded in the report; the test itself is deterministic.
    #[arg(long)]
    seed: Option<u64>,

    /// Write the JSON report here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, clap::Args)]
struct SimulateArgs {
    /// JSON grid config.
    #[arg(long)]
    config: PathBuf,

    /// Write the rejection table as CSV here (stdout when neither output is given).
    #[arg(long)]
    csv: Option<PathBuf>,

    /// Write the JSON report here.
    #[arg(long)]
    json: Option<PathBuf>,

    /// Override the replication count of every scenario.
    #[arg(long)]
    replications: Option<usize>,

    /// Override the master seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Debug, clap::Args)]
struct PermuteArgs {
    #[command(flatten)]
    groups: GroupArgs,

    #[command(flatten)]
    common: CommonTestArgs,

    /// Number of random relabellings.
    #[arg(long, default_value_t = 1000)]
    permutations: usize,

    /// Group sizes `n1:n2` for the relabelled data; defaults to the input sizes.
    #[arg(long)]
    split: Option<String>,

    #[arg(long, default_value_t = 0)]
    seed: u64,

    /// Write the JSON report here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, clap::Args)]
struct FilterArgs {
    /// Count table to filter.
    #[arg(long)]
    input: PathBuf,

    /// Keep taxa whose total count is at least this.
    #[arg(long)]
    min_count: f64,

    /// Write the filtered CSV here instead of stdout.
    #[arg(long)]
    output: Option<PathBuf>,

    /// Input (and output) is taxa-by-samples.
    #[arg(long)]
    transpose: bool,

    #[arg(long, value_enum, default_value = "auto")]
    id_column: IdColumn,
}

fn parse_pair<T: std::str::FromStr>(s: &str, flag: &str) -> CliResult<(T, T)> {
    let bad = || CliError::Usage(format!("--{flag} expects `a:b`, got `{s}`"));
    let (a, b) = s.split_once(':').ok_or_else(bad)?;
    Ok((a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?))
}

impl CommonTestArgs {
    fn validate(&self) -> CliResult<CombinationWeights> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(CliError::Usage(format!("--alpha must lie in (0, 1), got {}", self.alpha)));
        }
        if !(self.pseudo_count > 0.0 && self.pseudo_count.is_finite()) {
            return Err(CliError::Usage(format!(
                "--pseudo-count must be positive, got {}",
                self.pseudo_count
            )));
        }
        if let Some(k) = self.min_count {
            if !(k >= 0.0 && k.is_finite()) {
                return Err(CliError::Usage(format!("--min-count must be >= 0, got {k}")));
            }
        }
        let (wm, wq) = parse_pair::<f64>(&self.weights, "weights")?;
        CombinationWeights::new(wm, wq).map_err(|e| CliError::Usage(e.to_string()))
    }
}

fn selected_methods(choices: &[TestChoice]) -> Vec<Method> {
    if choices.contains(&TestChoice::All) {
        return Method::ALL.to_vec();
    }
    Method::ALL
        .into_iter()
        .filter(|m| {
            choices.iter().any(|c| {
                matches!(
                    (c, m),
                    (TestChoice::Max, Method::Max)
                        | (TestChoice::Quad, Method::Quad)
                        | (TestChoice::Fisher, Method::Fisher)
                        | (TestChoice::Cauchy, Method::Cauchy)
                )
            })
        })
        .collect()
}

fn run_options(threads: Option<usize>) -> RunOptions {
    match threads {
        Some(n) => RunOptions::with_threads(n),
        None => RunOptions::default(),
    }
}

fn emit(json: &str, out: Option<&PathBuf>, summary: &str) -> CliResult<()> {
    match out {
        Some(path) => {
            write_file(path, json)?;
            print!("{summary}");
        }
        None => {
            eprint!("{summary}");
            print!("{json}");
        }
    }
    Ok(())
}

fn cmd_test(args: &TestArgs) -> CliResult<()> {
    let weights = args.common.validate()?;
    let groups = args.groups.load()?;
    let (data, preprocessing) = preprocess(
        &groups,
        args.common.pseudo_count,
        args.common.min_count,
        args.common.drop_degenerate,
    )?;
    let suite = run_all_tests(&data, args.common.alpha, weights)?;
    let methods = selected_methods(&args.tests);
    let results: Vec<MethodResult> = methods.iter().map(|&m| suite.get(m).into()).collect();

    let mut summary = format!(
        "n1={} n2={} taxa={} alpha={}\n",
        preprocessing.n1, preprocessing.n2, preprocessing.taxa_used, args.common.alpha
    );
    for r in &results {
        summary.push_str(&format!(
            "{:<7} statistic={:<12.6} p={:<12.6e} {}\n",
            r.method.as_str(),
            r.statistic,
            r.p_value,
            if r.reject { "reject" } else { "retain" }
        ));
    }
    let report = RunReport {
        version: TOOL_VERSION.to_string(),
        command: "test".to_string(),
        params: TestParams {
            alpha: args.common.alpha,
            pseudo_count: args.common.pseudo_count,
            tests: methods,
            weights: [weights.w_max(), weights.w_quad()],
            min_count: args.common.min_count,
            drop_degenerate: args.common.drop_degenerate,
            transpose: args.groups.transpose,
            label_column: args.groups.label_column.clone(),
        },
        results,
        preprocessing,
        inputs: groups.digests,
        seed: args.seed,
    };
    emit(&to_json(&report), args.out.as_ref(), &summary)
}

fn cmd_simulate(args: &SimulateArgs, opts: &RunOptions) -> CliResult<()> {
    let bytes = read_bytes(&args.config)?;
    let text = String::from_utf8(bytes.clone())
        .map_err(|_| CliError::Config(format!("{}: not UTF-8", args.config.display())))?;
    let mut grid = GridConfig::from_json(&text)?;
    if let Some(seed) = args.seed {
        grid.master_seed = seed;
    }
    if let Some(r) = args.replications {
        if r == 0 {
            return Err(CliError::Usage("--replications must be at least 1".into()));
        }
        grid.replications = r;
        for e in &mut grid.scenarios {
            e.replications = None;
        }
    }
    let cfgs = grid.expand()?;
    let table = run_grid(&cfgs, opts)?;
    let csv = table.to_csv();
    let errors = table.total_errors();
    let report = SimulateReport {
        version: TOOL_VERSION.to_string(),
        command: "simulate".to_string(),
        params: SimulateParams {
            replications_override: args.replications,
            scenarios: cfgs.len(),
        },
        results: table.rows,
        errors,
        inputs: vec![InputDigest {
            path: args.config.display().to_string(),
            sha256: sha256_hex(&bytes),
        }],
        seed: grid.master_seed,
    };
    if let Some(path) = &args.csv {
        write_file(path, &csv)?;
    }
    if let Some(path) = &args.json {
        write_file(path, &to_json(&report))?;
    }
    if args.csv.is_none() && args.json.is_none() {
        print!("{csv}");
    }
    eprintln!("{} scenarios, {errors} replication errors", cfgs.len());
    if errors > 0 {
        return Err(CliError::Numerical(format!(
            "{errors} replications failed; their rows are written but incomplete"
        )));
    }
    Ok(())
}

fn cmd_permute(args: &PermuteArgs, opts: &RunOptions) -> CliResult<()> {
    let weights = args.common.validate()?;
    if args.permutations == 0 {
        return Err(CliError::Usage("--permutations must be at least 1".into()));
    }
    let groups = args.groups.load()?;
    let (data, preprocessing) = preprocess(
        &groups,
        args.common.pseudo_count,
        args.common.min_count,
        args.common.drop_degenerate,
    )?;
    let (n1, n2) = match &args.split {
        Some(s) => parse_pair::<usize>(s, "split")?,
        None => (data.n1(), data.n2()),
    };
    if n1 + n2 != data.n1() + data.n2() {
        return Err(CliError::Usage(format!(
            "--split {n1}:{n2} does not add up to the {} pooled samples",
            data.n1() + data.n2()
        )));
    }
    let rng = RngStream::new(args.seed, key_hash("permute"));
    let study = permutation_size_study(
        &data,
        n1,
        n2,
        args.permutations,
        args.common.alpha,
        weights,
        &rng,
        opts,
    )?;
    let results = PermuteReport::rates_from(&study);
    let mut summary = format!(
        "{} permutations, split {n1}:{n2}, alpha={}\n",
        args.permutations, args.common.alpha
    );
    for r in &results {
        summary.push_str(&format!("{:<7} size={:.4}\n", r.method.as_str(), r.rate));
    }
    let report = PermuteReport {
        version: TOOL_VERSION.to_string(),
        command: "permute".to_string(),
        params: PermuteParams {
            alpha: args.common.alpha,
            pseudo_count: args.common.pseudo_count,
            weights: [weights.w_max(), weights.w_quad()],
            permutations: args.permutations,
            split: [n1, n2],
            min_count: args.common.min_count,
            drop_degenerate: args.common.drop_degenerate,
            transpose: args.groups.transpose,
            label_column: args.groups.label_column.clone(),
        },
        results,
        errors: study.errors,
        first_error: study.first_error.clone(),
        preprocessing,
        inputs: groups.digests,
        seed: study.seed,
        stream_id: study.stream_id,
    };
    emit(&to_json(&report), args.out.as_ref(), &summary)
}

fn cmd_filter(args: &FilterArgs) -> CliResult<()> {
    if !(args.min_count >= 0.0 && args.min_count.is_finite()) {
        return Err(CliError::Usage(format!("--min-count must be >= 0, got {}", args.min_count)));
    }
    let bytes = read_bytes(&args.input)?;
    let name = args.input.display().to_string();
    let table = parse_table(&bytes, &name, args.transpose, args.id_column, None)?;
    let counts = CountMatrix::new(table.values, table.row_ids.clone(), table.col_ids.clone())?;
    let (kept, dropped) = filter_min_total(&counts, args.min_count)?;
    for id in &dropped {
        eprintln!("dropped {id}");
    }
    eprintln!("kept {} of {} taxa", kept.ncols(), counts.ncols());
    let out = Table {
        row_ids: table.row_ids,
        col_ids: kept.col_ids().to_vec(),
        values: kept.values().clone(),
        id_header: table.id_header,
        labels: None,
    };
    let csv = format_table(&out, args.transpose);
    match &args.output {
        Some(path) => write_file(path, &csv),
        None => {
            print!("{csv}");
            Ok(())
        }
    }
}

fn run(cli: Cli) -> CliResult<()> {
    let opts = run_options(cli.threads);
    match &cli.command {
        Command::Test(a) => cmd_test(a),
        Command::Simulate(a) => cmd_simulate(a, &opts),
        Command::Permute(a) => cmd_permute(a, &opts),
        Command::Filter(a) => cmd_filter(a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

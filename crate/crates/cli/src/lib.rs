//! Experiment runner behind the `coopnet` binary.
//!
//! Every subcommand reads a scenario file (see [`config`]) and writes one CSV.
//! Exit codes: 0 on success, 1 for configuration or usage errors, 2 when the
//! run itself fails.

pub mod config;
pub mod format;

use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use coopnet_core::analysis::{
    dmt_ddf, dmt_msc_opt, dmt_sdiv, outage_bound_terms, predicted_snr_shift_db, trt_coefficients,
    DmtPoint,
};
use coopnet_core::channel::{draw_channel, listening_outcome};
use coopnet_core::engine::run_trial;
use coopnet_core::protocol::encode_feedback_pattern;
use coopnet_core::{Engine, Scheme, SeedStream, SnrSearch};

use config::{parse_config, ScenarioConfig};
use format::{num, opt};

/// Seed used when neither the command line, the scenario nor the environment
/// provides one.
pub const DEFAULT_SEED: u64 = 1;

/// Environment variable consulted for the seed as a last resort.
pub const SEED_ENV: &str = "COOPNET_SEED";

/// DF-MSC-opt trials recorded per grid point by `simulate --trace`.
pub const TRACE_TRIALS: u64 = 100;

#[derive(Debug, Parser)]
#[command(
    name = "coopnet",
    version,
    about = "Multi-stream cooperative relay network experiments"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Outage probability versus SNR for each scheme and rate.
    Simulate {
        #[command(flatten)]
        common: CommonArgs,
        /// Per-trial DF-MSC-opt trace with feedback patterns.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Outage capacity at `target_pout` for each scheme and SNR.
    Capacity(CommonArgs),
    /// Analytic outage upper bound of DF-MSC-opt along the SNR grid.
    Bound(CommonArgs),
    /// Diversity-multiplexing tradeoff curves on an r-grid of step 0.01.
    Dmt(CommonArgs),
    /// Throughput-reliability coefficients of every operating region.
    Trt(CommonArgs),
    /// Measured SNR shift between outage curves `delta_r` bits apart.
    Shift(CommonArgs),
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Output CSV; defaults to the scenario's `output` key.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Worker threads; results do not depend on it.
    #[arg(long)]
    pub workers: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Also write a gnuplot script that plots the CSV.
    #[arg(long)]
    pub plot_script: Option<PathBuf>,
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 1,
            CliError::Runtime(_) => 2,
        }
    }
}

impl From<coopnet_core::Error> for CliError {
    fn from(e: coopnet_core::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

/// Parses `args` (including the program name), runs the command and returns
/// the process exit code. Diagnostics go to stderr.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("coopnet: {e}");
            e.exit_code()
        }
    }
}

/// Seed precedence: `--seed`, then `master_seed` in the scenario, then
/// `COOPNET_SEED`, then [`DEFAULT_SEED`].
pub fn resolve_seed(
    flag: Option<u64>,
    scenario: Option<u64>,
    env: Option<&str>,
) -> Result<u64, CliError> {
    if let Some(s) = flag.or(scenario) {
        return Ok(s);
    }
    match env {
        Some(v) => v.trim().parse().map_err(|_| {
            CliError::Config(format!("{SEED_ENV} must be an unsigned integer, got {v:?}"))
        }),
        None => Ok(DEFAULT_SEED),
    }
}

struct Context {
    cfg: ScenarioConfig,
    seed: u64,
    workers: usize,
    out: PathBuf,
    plot_script: Option<PathBuf>,
}

fn load(common: &CommonArgs) -> Result<Context, CliError> {
    let text = std::fs::read_to_string(&common.config)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", common.config.display())))?;
    let cfg = parse_config(&text)
        .map_err(|e| CliError::Config(format!("{}: {e}", common.config.display())))?;
    let env = std::env::var(SEED_ENV).ok();
    let seed = resolve_seed(common.seed, cfg.master_seed, env.as_deref())?;
    let out = common
        .out
        .clone()
        .or_else(|| cfg.output.clone())
        .ok_or_else(|| CliError::Config("no output path: pass --out or set `output`".into()))?;
    let workers = match common.workers {
        Some(0) => return Err(CliError::Config("--workers must be at least 1".into())),
        Some(w) => w,
        None => std::thread::available_parallelism().map_or(1, |n| n.get()),
    };
    Ok(Context {
        cfg,
        seed,
        workers,
        out,
        plot_script: common.plot_script.clone(),
    })
}

fn execute(command: Command) -> Result<(), CliError> {
    match command {
        Command::Simulate { common, trace } => {
            let ctx = load(&common)?;
            write_csv(&ctx.out, &simulate(&ctx)?)?;
            if let Some(path) = trace {
                write_csv(&path, &trace_rows(&ctx)?)?;
            }
            plot(&ctx, "SNR (dB)", "outage probability", 2, 6, true)
        }
        Command::Capacity(common) => {
            let ctx = load(&common)?;
            write_csv(&ctx.out, &capacity(&ctx)?)?;
            plot(
                &ctx,
                "SNR (dB)",
                "outage capacity (bits/channel use)",
                2,
                5,
                false,
            )
        }
        Command::Bound(common) => {
            let ctx = load(&common)?;
            write_csv(&ctx.out, &bound(&ctx))?;
            plot(&ctx, "SNR (dB)", "outage upper bound", 1, 7, true)
        }
        Command::Dmt(common) => {
            let ctx = load(&common)?;
            write_csv(&ctx.out, &dmt(&ctx)?)?;
            plot(
                &ctx,
                "multiplexing gain r",
                "diversity gain d(r)",
                2,
                3,
                false,
            )
        }
        Command::Trt(common) => {
            let ctx = load(&common)?;
            write_csv(&ctx.out, &trt(&ctx)?)?;
            plot(
                &ctx,
                "operating region z",
                "predicted SNR shift (dB)",
                1,
                8,
                false,
            )
        }
        Command::Shift(common) => {
            let ctx = load(&common)?;
            write_csv(&ctx.out, &shift(&ctx)?)?;
            plot(
                &ctx,
                "rate (bits/channel use)",
                "SNR shift (dB)",
                2,
                9,
                false,
            )
        }
    }
}

type Table = (Vec<&'static str>, Vec<Vec<String>>);

fn write_csv(path: &Path, (header, rows): &Table) -> Result<(), CliError> {
    let io = |e: csv::Error| CliError::Runtime(format!("cannot write {}: {e}", path.display()));
    let mut w = csv::Writer::from_path(path).map_err(io)?;
    w.write_record(header).map_err(io)?;
    for row in rows {
        w.write_record(row).map_err(io)?;
    }
    w.flush()
        .map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", path.display())))
}

fn simulate(ctx: &Context) -> Result<Table, CliError> {
    let engine = Engine::new(ctx.workers)?;
    let grid = ctx.cfg.snr_grid();
    let mut rows = Vec::new();
    for &scheme in &ctx.cfg.schemes {
        for &rate in &ctx.cfg.rates {
            let sweep = engine.snr_sweep(
                scheme,
                &ctx.cfg.params.with_rate(rate),
                &grid,
                ctx.cfg.trials,
                ctx.seed,
            )?;
            for r in sweep.rows {
                let e = r.estimate;
                rows.push(vec![
                    scheme.name().to_string(),
                    num(r.snr_db),
                    num(r.rate),
                    e.trials.to_string(),
                    e.outages.to_string(),
                    num(e.p_out),
                    num(e.ci_low),
                    num(e.ci_high),
                    opt(r.bound),
                    ctx.seed.to_string(),
                ]);
            }
        }
    }
    Ok((
        vec![
            "scheme", "snr_db", "rate", "trials", "outages", "p_out", "ci_low", "ci_high", "bound",
            "seed",
        ],
        rows,
    ))
}

fn trace_rows(ctx: &Context) -> Result<Table, CliError> {
    let mut rows = Vec::new();
    if ctx.cfg.schemes.contains(&Scheme::DfMscOpt) {
        for &rate in &ctx.cfg.rates {
            for snr_db in ctx.cfg.snr_grid() {
                let params = ctx.cfg.params.with_rate(rate).with_snr_db(snr_db);
                for trial in 0..ctx.cfg.trials.min(TRACE_TRIALS) {
                    let t = run_trial(Scheme::DfMscOpt, &params, trial, ctx.seed)?;
                    let pattern = match &t.selection {
                        Some(sel) => {
                            let ch = draw_channel(&params, &SeedStream::new(ctx.seed, trial));
                            let outcome = listening_outcome(&ch, &params);
                            encode_feedback_pattern(sel, &outcome.decoding_set, params.m)?
                                .to_string()
                        }
                        None => String::new(),
                    };
                    rows.push(vec![
                        num(snr_db),
                        num(rate),
                        trial.to_string(),
                        t.n1.map(|n| n.to_string()).unwrap_or_default(),
                        t.decoding_set_size.to_string(),
                        pattern,
                        num(t.mutual_information),
                        u8::from(t.outage).to_string(),
                    ]);
                }
            }
        }
    }
    Ok((
        vec![
            "snr_db",
            "rate",
            "trial",
            "n1",
            "decoding_set_size",
            "feedback_pattern",
            "mutual_information",
            "outage",
        ],
        rows,
    ))
}

fn capacity(ctx: &Context) -> Result<Table, CliError> {
    let engine = Engine::new(ctx.workers)?;
    let mut rows = Vec::new();
    for &scheme in &ctx.cfg.schemes {
        for snr_db in ctx.cfg.snr_grid() {
            let c = engine.outage_capacity(
                scheme,
                &ctx.cfg.params,
                ctx.cfg.target_pout,
                snr_db,
                ctx.cfg.rate_tolerance,
                ctx.cfg.trials,
                ctx.seed,
            )?;
            rows.push(vec![
                scheme.name().to_string(),
                num(snr_db),
                num(ctx.cfg.target_pout),
                ctx.cfg.trials.to_string(),
                num(c),
                ctx.seed.to_string(),
            ]);
        }
    }
    Ok((
        vec![
            "scheme",
            "snr_db",
            "target_pout",
            "trials",
            "capacity",
            "seed",
        ],
        rows,
    ))
}

fn bound(ctx: &Context) -> Table {
    let mut rows = Vec::new();
    for &rate in &ctx.cfg.rates {
        for snr_db in ctx.cfg.snr_grid() {
            let b = outage_bound_terms(&ctx.cfg.params.with_rate(rate).with_snr_db(snr_db));
            rows.push(vec![
                num(snr_db),
                num(rate),
                num(b.phi_n),
                num(b.direct),
                num(b.relay_assisted),
                num(b.alpha),
                num(b.total()),
            ]);
        }
    }
    (
        vec![
            "snr_db",
            "rate",
            "phi_n",
            "direct",
            "relay_assisted",
            "alpha",
            "bound",
        ],
        rows,
    )
}

type DmtCurve = fn(f64, usize, usize) -> coopnet_core::Result<DmtPoint>;

/// Curves with a closed form. AF-SDiv and DF-SDiv share one.
fn dmt(ctx: &Context) -> Result<Table, CliError> {
    let (m, nr) = (ctx.cfg.params.m, ctx.cfg.params.nr);
    let curves: [(&str, DmtCurve); 4] = [
        ("df-msc-opt", dmt_msc_opt),
        ("ddf", dmt_ddf),
        ("af-sdiv", dmt_sdiv),
        ("df-sdiv", dmt_sdiv),
    ];
    let mut rows = Vec::new();
    for (name, f) in curves {
        for i in 0..=100 {
            let r = i as f64 / 100.0;
            rows.push(vec![name.to_string(), num(r), num(f(r, m, nr)?.d)]);
        }
    }
    Ok((vec!["scheme", "r", "d"], rows))
}

fn trt(ctx: &Context) -> Result<Table, CliError> {
    let (k, nr) = (ctx.cfg.params.k, ctx.cfg.params.nr);
    let mut rows = Vec::new();
    for z in 0..nr.min(k + 1) {
        let c = trt_coefficients(z, k, nr)?;
        rows.push(vec![
            z.to_string(),
            k.to_string(),
            nr.to_string(),
            num(c.c),
            num(c.g),
            num(c.t),
            num(ctx.cfg.delta_r),
            num(predicted_snr_shift_db(ctx.cfg.delta_r, z, k, nr)?),
        ]);
    }
    Ok((
        vec!["z", "K", "Nr", "c", "g", "t", "delta_r", "predicted_shift"],
        rows,
    ))
}

/// Operating region `z` with `z < r/(1−r) < z + 1`, if it lies in `0..L_T`.
fn operating_region(r: f64, k: usize, nr: usize) -> Option<usize> {
    if !(r > 0.0 && r < 1.0) {
        return None;
    }
    let z = (r / (1.0 - r)).floor();
    (z < nr.min(k + 1) as f64).then_some(z as usize)
}

fn shift(ctx: &Context) -> Result<Table, CliError> {
    let engine = Engine::new(ctx.workers)?;
    let search = SnrSearch {
        start_db: ctx.cfg.snr_db_start,
        stop_db: ctx.cfg.snr_db_stop,
        step_db: ctx.cfg.snr_db_step,
    };
    let (k, nr) = (ctx.cfg.params.k, ctx.cfg.params.nr);
    let mut rows = Vec::new();
    for &scheme in &ctx.cfg.schemes {
        for &rate_a in &ctx.cfg.rates {
            let rate_b = rate_a + ctx.cfg.delta_r;
            let s = engine.measure_snr_shift_db(
                scheme,
                &ctx.cfg.params,
                rate_a,
                rate_b,
                ctx.cfg.target_pout,
                &search,
                ctx.cfg.trials,
                ctx.seed,
            )?;
            let r_a = rate_a / (s.snr_a_db / 10.0 * std::f64::consts::LOG2_10);
            let region = operating_region(r_a, k, nr);
            let predicted = region
                .map(|z| predicted_snr_shift_db(ctx.cfg.delta_r, z, k, nr))
                .transpose()?;
            rows.push(vec![
                scheme.name().to_string(),
                num(rate_a),
                num(rate_b),
                num(ctx.cfg.target_pout),
                ctx.cfg.trials.to_string(),
                num(s.snr_a_db),
                num(s.snr_b_db),
                num(s.shift_db),
                num(r_a),
                region.map(|z| z.to_string()).unwrap_or_default(),
                opt(predicted),
                ctx.seed.to_string(),
            ]);
        }
    }
    Ok((
        vec![
            "scheme",
            "rate_a",
            "rate_b",
            "target_pout",
            "trials",
            "snr_a_db",
            "snr_b_db",
            "shift_db",
            "r_a",
            "region_z",
            "predicted_shift",
            "seed",
        ],
        rows,
    ))
}

/// Gnuplot script drawing column `y` against column `x` of the CSV, one curve
/// per distinct value of the first column when `x` is not 1.
fn plot(
    ctx: &Context,
    xlabel: &str,
    ylabel: &str,
    x: usize,
    y: usize,
    log_y: bool,
) -> Result<(), CliError> {
    let Some(path) = &ctx.plot_script else {
        return Ok(());
    };
    let csv = ctx.out.display();
    let mut s = String::new();
    let _ = writeln!(s, "set datafile separator ','");
    let _ = writeln!(s, "set key autotitle columnhead");
    let _ = writeln!(s, "set xlabel '{xlabel}'");
    let _ = writeln!(s, "set ylabel '{ylabel}'");
    let _ = writeln!(s, "set grid");
    if log_y {
        let _ = writeln!(s, "set logscale y");
    }
    if x == 1 {
        let _ = writeln!(
            s,
            "plot '{csv}' using {x}:{y} with linespoints title '{ylabel}'"
        );
    } else {
        let _ = writeln!(
            s,
            "groups = system(\"tail -n +2 '{csv}' | cut -d, -f1 | uniq | tr '\\n' ' '\")"
        );
        let _ = writeln!(
            s,
            "plot for [g in groups] '{csv}' using (strcol(1) eq g ? ${x} : NaN):{y} with linespoints title g"
        );
    }
    std::fs::write(path, s)
        .map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", path.display())))
}

//! Argument parsing and subcommand dispatch.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use eigenmarket::corrcore::coefficient_distribution;
use eigenmarket::eigenanalysis::{afpi, ipr, linearity_test};
use eigenmarket::ingest::write_metadata;
use eigenmarket::marketmode::{pair_report, sector_report};
use eigenmarket::returns::descriptive_stats;
use eigenmarket::synth::{write_synthetic, SyntheticSpec};

use crate::artifacts::{self, Out};
use crate::config::{Base, RankList, RunConfig, DEFAULT_BINS, DEFAULT_PAIR_COUNT};
use crate::error::{CliError, ResultExt};
use crate::format::Fmt;
use crate::pipeline::{self, index_base, Core, Inputs};
use crate::report::run_full_report;

/// Environment variable capping the worker threads; 0 or unset means one per core.
pub const THREADS_ENV: &str = "EIGENMARKET_THREADS";

#[derive(Debug, Parser)]
#[command(name = "eigenmarket", version, about = "Random-matrix analysis of price correlation structure")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub opts: Opts,
}

#[derive(Debug, Args)]
pub struct Opts {
    /// Price panel CSV (`date,<label>,...`)
    #[arg(long, global = true)]
    pub input: Option<PathBuf>,
    /// Instrument metadata CSV (`label,name,exchange,country,listing_date[,commodity]`)
    #[arg(long, global = true)]
    pub meta: Option<PathBuf>,
    /// Dates to drop, one per line
    #[arg(long, global = true)]
    pub exclusions: Option<PathBuf>,
    /// Output directory (`synth`: output CSV file)
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Histogram bins
    #[arg(long, global = true, default_value_t = DEFAULT_BINS)]
    pub bins: usize,
    /// Significance level as a multiple of 1/sqrt(N)
    #[arg(long, global = true, default_value_t = eigenmarket::marketmode::DEFAULT_THRESHOLD_FACTOR)]
    pub threshold: f64,
    /// Eigenvector ranks, e.g. `1,2,3` or `2-5`
    #[arg(long, global = true)]
    pub ranks: Option<RankList>,
    /// Residual ranks for the sector table in `report` [default: 1-4]
    #[arg(long, global = true)]
    pub sector_ranks: Option<RankList>,
    /// Number of smallest residual eigenvectors to inspect for pairs
    #[arg(long, global = true, default_value_t = DEFAULT_PAIR_COUNT)]
    pub count: usize,
    /// Index base: a price, or `auto` for the mean price on the first date
    #[arg(long, global = true, default_value = "auto")]
    pub base: Base,
    /// Overrides the seed of the synthetic specification
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Write floats in shortest round-trip form instead of 6 significant digits
    #[arg(long, global = true)]
    pub full_precision: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fill and filter the panel; writes the cleaned panel and fill flags
    Ingest,
    /// Descriptive statistics of log returns
    Stats,
    /// Correlation matrix and coefficient distribution
    Corr,
    /// Eigenvalues and the Marchenko-Pastur comparison
    Spectrum,
    /// Inverse participation ratios
    Ipr,
    /// Eigenportfolio returns, linearity fits and the market index
    Portfolios,
    /// Market index from the first eigenportfolio
    Index,
    /// Regress out the market mode and analyse the residual spectrum
    RemoveMarket,
    /// Significant participants of residual eigenvectors
    Sectors,
    /// Dominant pairs of the smallest residual eigenvectors
    Pairs,
    /// Generate a synthetic panel from a JSON specification
    Synth {
        #[arg(long)]
        spec: PathBuf,
    },
    /// Run everything and write a manifest
    Report,
}

impl Opts {
    fn input(&self, cmd: &str) -> Result<&Path, CliError> {
        self.input
            .as_deref()
            .ok_or_else(|| CliError::Input(format!("`{cmd}` needs --input")))
    }

    fn out_dir(&self) -> PathBuf {
        self.out.clone().unwrap_or_else(|| PathBuf::from("eigenmarket-out"))
    }

    fn load(&self, cmd: &str) -> Result<Inputs, CliError> {
        pipeline::load_inputs(self.input(cmd)?, self.meta.as_deref(), self.exclusions.as_deref())
    }

    fn output(&self) -> Result<Out, CliError> {
        Out::create(&self.out_dir(), Fmt::new(self.full_precision))
    }

    fn check(&self) -> Result<(), CliError> {
        let mut cfg = RunConfig::new("", "");
        cfg.bins = self.bins;
        cfg.threshold = self.threshold;
        cfg.count = self.count;
        cfg.validate()
    }

    pub fn run_config(&self) -> Result<RunConfig, CliError> {
        let mut cfg = RunConfig::new(self.input("report")?, self.out_dir());
        cfg.meta = self.meta.clone();
        cfg.exclusions = self.exclusions.clone();
        cfg.bins = self.bins;
        cfg.threshold = self.threshold;
        if let Some(r) = &self.ranks {
            cfg.ranks = r.clone();
        }
        if let Some(r) = &self.sector_ranks {
            cfg.sector_ranks = r.clone();
        }
        cfg.count = self.count;
        cfg.base = self.base;
        cfg.full_precision = self.full_precision;
        Ok(cfg)
    }
}

/// Sizes the global rayon pool from [`THREADS_ENV`].
pub fn configure_threads() -> Result<(), CliError> {
    let threads = match std::env::var(THREADS_ENV) {
        Ok(v) if !v.trim().is_empty() => v
            .trim()
            .parse::<usize>()
            .map_err(|_| CliError::Input(format!("{THREADS_ENV} must be a non-negative integer, got `{v}`")))?,
        _ => 0,
    };
    // a pool built earlier in the same process is kept
    let _ = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global();
    Ok(())
}

fn synth(opts: &Opts, spec_path: &Path) -> Result<String, CliError> {
    let text = fs::read_to_string(spec_path)
        .map_err(|e| CliError::Input(format!("{}: {e}", spec_path.display())))?;
    let mut spec = SyntheticSpec::from_json(&text).into_input()?;
    if let Some(seed) = opts.seed {
        spec.seed = seed;
    }
    spec.validate().into_input()?;
    let out = opts
        .out
        .clone()
        .ok_or_else(|| CliError::Input("`synth` needs --out <file.csv>".into()))?;
    if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| CliError::Input(format!("{}: {e}", parent.display())))?;
    }
    let io = |p: &Path, e: std::io::Error| CliError::Input(format!("cannot write {}: {e}", p.display()));
    let mut buf = Vec::new();
    write_synthetic(&spec, &mut buf).in_module("synth")?;
    fs::write(&out, &buf).map_err(|e| io(&out, e))?;
    let meta_path = out.with_extension("meta.csv");
    let mut meta = Vec::new();
    write_metadata(&spec.metadata(), &mut meta).into_input()?;
    fs::write(&meta_path, &meta).map_err(|e| io(&meta_path, e))?;
    Ok(format!(
        "wrote {} ({} instruments, {} returns) and {}",
        out.display(),
        spec.n,
        spec.t,
        meta_path.display()
    ))
}

fn execute(cli: &Cli) -> Result<String, CliError> {
    let opts = &cli.opts;
    opts.check()?;
    let ranks = |default: RankList| opts.ranks.clone().unwrap_or(default).0;
    let mut out;
    match &cli.command {
        Command::Synth { spec } => return synth(opts, spec),
        Command::Report => {
            let cfg = opts.run_config()?;
            let manifest = run_full_report(&cfg)?;
            let files: usize = manifest.artifacts.iter().map(|g| g.group.files.len()).sum();
            return Ok(format!(
                "wrote {files} artifacts in {} groups to {}",
                manifest.artifacts.len(),
                cfg.out.display()
            ));
        }
        Command::Ingest => {
            let inputs = opts.load("ingest")?;
            let kept = inputs.kept();
            out = opts.output()?;
            artifacts::ingest(&mut out, &inputs.filled, &kept.panel, &kept.ignored)?;
        }
        Command::Stats => {
            let rp = opts.load("stats")?.returns()?;
            let ds = descriptive_stats(&rp).in_module("returns")?;
            out = opts.output()?;
            artifacts::stats(&mut out, &ds)?;
        }
        Command::Corr => {
            let core = Core::new(&opts.load("corr")?)?;
            let dist = coefficient_distribution(&core.cm, opts.bins).in_module("corrcore")?;
            out = opts.output()?;
            artifacts::coefficients(&mut out, &core.cm, &dist)?;
        }
        Command::Spectrum => {
            let core = Core::new(&opts.load("spectrum")?)?;
            let (law, dev) = core.law()?;
            out = opts.output()?;
            artifacts::spectrum(&mut out, &core.sd, &law, &dev, opts.bins)?;
        }
        Command::Ipr => {
            let core = Core::new(&opts.load("ipr")?)?;
            let (law, _) = core.law()?;
            out = opts.output()?;
            artifacts::ipr(&mut out, &core.sd, &ipr(&core.sd), &law)?;
        }
        Command::Portfolios => {
            let inputs = opts.load("portfolios")?;
            let core = Core::new(&inputs)?;
            out = opts.output()?;
            let mut eps = Vec::new();
            for k in ranks(RankList::portfolio_default()) {
                let ep = core.portfolio(k)?;
                let fit = linearity_test(&ep, &core.rp).in_module("eigenanalysis")?;
                artifacts::portfolio(&mut out, &ep, &fit, &core.rp)?;
                eps.push((ep, fit));
            }
            let fits: Vec<_> = eps.iter().map(|(ep, fit)| (ep, *fit)).collect();
            artifacts::linearity(&mut out, &fits)?;
            write_index(&mut out, &inputs, &core, opts.base)?;
        }
        Command::Index => {
            let inputs = opts.load("index")?;
            let core = Core::new(&inputs)?;
            out = opts.output()?;
            write_index(&mut out, &inputs, &core, opts.base)?;
        }
        Command::RemoveMarket => {
            let core = Core::new(&opts.load("remove-market")?)?;
            let mr = core.remove_market()?;
            let (law, dev) = pipeline::residual_law(&mr)?;
            out = opts.output()?;
            artifacts::market_removal(&mut out, &mr, &core.cm, &law, &dev, opts.bins)?;
        }
        Command::Sectors => {
            let core = Core::new(&opts.load("sectors")?)?;
            let mr = core.remove_market()?;
            let rep = sector_report(&mr, &ranks(RankList::sector_default()), opts.threshold).in_module("marketmode")?;
            for w in &rep.warnings {
                eprintln!("warning: {w}");
            }
            out = opts.output()?;
            artifacts::sectors(&mut out, &rep, &mr)?;
        }
        Command::Pairs => {
            let core = Core::new(&opts.load("pairs")?)?;
            let mr = core.remove_market()?;
            let rep = pair_report(&mr, &core.cm, opts.count).in_module("marketmode")?;
            out = opts.output()?;
            artifacts::pairs(&mut out, &rep, &mr)?;
        }
    }
    Ok(format!("wrote {} files to {}", out.written().len(), out.dir().display()))
}

fn write_index(out: &mut Out, inputs: &Inputs, core: &Core, base: Base) -> Result<(), CliError> {
    let kept = inputs.kept().panel;
    let g1 = core.portfolio(1)?;
    let idx = afpi(&g1, index_base(base, &kept)).in_module("eigenanalysis")?;
    artifacts::index(out, &idx, &kept.mean_price())
}

/// Parses `args`, runs the command and returns the process exit code:
/// 0 on success, 2 for bad arguments or unusable inputs, 3 when a pipeline
/// stage rejects the data.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let result = configure_threads().and_then(|()| execute(&cli));
    match result {
        Ok(summary) => {
            println!("{summary}");
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

//! The full pipeline in one run, with a manifest of every artifact.

use eigenmarket::corrcore::coefficient_distribution;
use eigenmarket::eigenanalysis::{afpi, ipr, linearity_test};
use eigenmarket::marketmode::{pair_report, sector_report};
use eigenmarket::returns::descriptive_stats;
use serde::Serialize;
use serde_json::json;

use crate::artifacts::{self, names, Out};
use crate::config::RunConfig;
use crate::error::{CliError, ResultExt};
use crate::format::Fmt;
use crate::pipeline::{self, index_base, Core, Inputs};

/// Files belonging to one table or figure.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ArtifactGroup {
    pub name: &'static str,
    pub content: &'static str,
    pub files: Vec<String>,
}

/// The artifact list depends on the configuration alone.
pub fn planned_artifacts(cfg: &RunConfig) -> Vec<ArtifactGroup> {
    let group = |name, content, files: Vec<String>| ArtifactGroup { name, content, files };
    let s = |names: &[&str]| names.iter().map(|n| n.to_string()).collect::<Vec<_>>();

    let mut portfolios = Vec::new();
    for &k in &cfg.ranks.0 {
        portfolios.push(names::portfolio_csv(k));
        portfolios.push(names::portfolio_svg(k));
    }
    portfolios.extend(s(&[names::LINEARITY, names::INDEX_CSV, names::INDEX_SVG]));

    let mut sectors = s(&[names::SECTORS_CSV, names::SECTORS_JSON]);
    sectors.extend(cfg.sector_ranks.0.iter().map(|&k| names::sector_svg(k)));

    let mut pairs = s(&[names::PAIRS_CSV, names::PAIRS_JSON]);
    pairs.extend((1..=cfg.count).map(names::pair_svg));

    vec![
        group("stats", "descriptive statistics of returns", s(&[names::STATS])),
        group(
            "coefficients",
            "correlation matrix and coefficient distribution",
            s(&[names::CORRELATION, names::COEFFICIENTS_CSV, names::COEFFICIENTS_JSON, names::COEFFICIENTS_SVG]),
        ),
        group(
            "spectrum",
            "eigenvalues against the Marchenko-Pastur density",
            s(&[names::EIGENVALUES, names::MP, names::SPECTRUM_SVG]),
        ),
        group("ipr", "inverse participation ratios", s(&[names::IPR_CSV, names::IPR_SVG])),
        group("portfolios", "eigenportfolio linearity and market index", portfolios),
        group(
            "market_removal",
            "residual spectrum and coefficients before and after market removal",
            s(&[
                names::REGRESSION,
                names::RESIDUAL_EIGENVALUES,
                names::RESIDUAL_MP,
                names::BEFORE_AFTER_CSV,
                names::BEFORE_AFTER_SVG,
            ]),
        ),
        group("sectors", "significant participants of residual eigenvectors", sectors),
        group("pairs", "dominant pairs of the smallest residual eigenvectors", pairs),
    ]
}

#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub status: &'static str,
    pub error: Option<serde_json::Value>,
    pub config: RunConfig,
    pub instruments: usize,
    pub dates: usize,
    pub artifacts: Vec<ManifestGroup>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ManifestGroup {
    #[serde(flatten)]
    pub group: ArtifactGroup,
    /// Every planned file was written.
    pub complete: bool,
}

impl Manifest {
    fn new(cfg: &RunConfig, inputs: &Inputs, written: &[String], error: Option<&CliError>) -> Self {
        let artifacts = planned_artifacts(cfg)
            .into_iter()
            .map(|group| {
                let complete = group.files.iter().all(|f| written.contains(f));
                ManifestGroup { group, complete }
            })
            .collect();
        Manifest {
            tool: "eigenmarket",
            version: env!("CARGO_PKG_VERSION"),
            status: if error.is_some() { "error" } else { "ok" },
            error: error.map(|e| json!({"module": e.module(), "message": e.message()})),
            config: cfg.clone(),
            instruments: inputs.filled.n_instruments(),
            dates: inputs.filled.n_dates(),
            artifacts,
        }
    }
}

fn stages(cfg: &RunConfig, inputs: &Inputs, out: &mut Out) -> Result<(), CliError> {
    let rp = inputs.returns()?;
    let ds = descriptive_stats(&rp).in_module("returns")?;
    artifacts::stats(out, &ds)?;

    let core = Core::from_returns(rp)?;
    let dist = coefficient_distribution(&core.cm, cfg.bins).in_module("corrcore")?;
    artifacts::coefficients(out, &core.cm, &dist)?;

    let (law, deviations) = core.law()?;
    artifacts::spectrum(out, &core.sd, &law, &deviations, cfg.bins)?;
    artifacts::ipr(out, &core.sd, &ipr(&core.sd), &law)?;

    let mut eps = Vec::with_capacity(cfg.ranks.0.len());
    for &k in &cfg.ranks.0 {
        let ep = core.portfolio(k)?;
        let fit = linearity_test(&ep, &core.rp).in_module("eigenanalysis")?;
        artifacts::portfolio(out, &ep, &fit, &core.rp)?;
        eps.push((ep, fit));
    }
    let fits: Vec<_> = eps.iter().map(|(ep, fit)| (ep, *fit)).collect();
    artifacts::linearity(out, &fits)?;
    let g1 = core.portfolio(1)?;
    let kept = inputs.kept().panel;
    let idx = afpi(&g1, index_base(cfg.base, &kept)).in_module("eigenanalysis")?;
    artifacts::index(out, &idx, &kept.mean_price())?;

    let mr = core.remove_market()?;
    let (rlaw, rdev) = pipeline::residual_law(&mr)?;
    artifacts::market_removal(out, &mr, &core.cm, &rlaw, &rdev, cfg.bins)?;

    let sectors = sector_report(&mr, &cfg.sector_ranks.0, cfg.threshold).in_module("marketmode")?;
    artifacts::sectors(out, &sectors, &mr)?;

    let pairs = pair_report(&mr, &core.cm, cfg.count).in_module("marketmode")?;
    artifacts::pairs(out, &pairs, &mr)
}

/// Runs every stage and writes `manifest.json`. Input problems fail before
/// anything is written; a stage failure still leaves the earlier artifacts
/// and a manifest naming the failing module.
pub fn run_full_report(cfg: &RunConfig) -> Result<Manifest, CliError> {
    cfg.validate()?;
    let inputs = pipeline::load_inputs(&cfg.input, cfg.meta.as_deref(), cfg.exclusions.as_deref())?;
    let mut out = Out::create(&cfg.out, Fmt::new(cfg.full_precision))?;
    let result = stages(cfg, &inputs, &mut out);
    let manifest = Manifest::new(cfg, &inputs, out.written(), result.as_ref().err());
    let value = serde_json::to_value(&manifest).expect("manifest serializes");
    out.json(names::MANIFEST, value)?;
    result.map(|()| manifest)
}

//! Stage runners shared by the subcommands, each attributing failures to
//! the library module that raised them.

use std::path::Path;

use eigenmarket::corrcore::{correlation_matrix, standardize, CorrelationMatrix};
use eigenmarket::eigenanalysis::{eigenportfolio, Eigenportfolio};
use eigenmarket::ingest::{
    align_and_fill, apply_exclusions, load_metadata, load_panel, ExclusionCalendar, Excluded, PricePanel,
};
use eigenmarket::marketmode::{remove_market_mode, MarketModeRemoval};
use eigenmarket::returns::{compute_returns, ReturnPanel};
use eigenmarket::spectrum::{classify_deviations, decompose, mp_law, DeviationReport, MarchenkoPasturLaw, SpectralDecomposition};

use crate::config::Base;
use crate::error::{CliError, ResultExt};

/// Filled panel and exclusion calendar, validated.
#[derive(Debug, Clone)]
pub struct Inputs {
    pub filled: PricePanel,
    pub calendar: ExclusionCalendar,
}

pub fn load_inputs(input: &Path, meta: Option<&Path>, exclusions: Option<&Path>) -> Result<Inputs, CliError> {
    let mut raw = load_panel(input).into_input()?;
    if let Some(meta) = meta {
        let metadata = load_metadata(meta).into_input()?;
        raw = raw.with_metadata(&metadata).into_input()?;
    }
    let filled = align_and_fill(&raw).into_input()?;
    let calendar = match exclusions {
        Some(p) => ExclusionCalendar::load(p).into_input()?,
        None => ExclusionCalendar::empty(),
    };
    Ok(Inputs { filled, calendar })
}

impl Inputs {
    pub fn kept(&self) -> Excluded {
        apply_exclusions(&self.filled, &self.calendar)
    }

    pub fn returns(&self) -> Result<ReturnPanel, CliError> {
        compute_returns(&self.filled, &self.calendar).in_module("returns")
    }
}

/// Returns, correlation matrix and its spectrum.
#[derive(Debug, Clone)]
pub struct Core {
    pub rp: ReturnPanel,
    pub cm: CorrelationMatrix,
    pub sd: SpectralDecomposition,
}

impl Core {
    pub fn new(inputs: &Inputs) -> Result<Self, CliError> {
        let rp = inputs.returns()?;
        Core::from_returns(rp)
    }

    pub fn from_returns(rp: ReturnPanel) -> Result<Self, CliError> {
        let cm = standardize(&rp).and_then(|g| correlation_matrix(&g)).in_module("corrcore")?;
        let sd = decompose(&cm).in_module("spectrum")?;
        Ok(Core { rp, cm, sd })
    }

    pub fn law(&self) -> Result<(MarchenkoPasturLaw, DeviationReport), CliError> {
        let law = mp_law(self.rp.n_instruments(), self.rp.len()).in_module("spectrum")?;
        Ok((law, classify_deviations(&self.sd, &law)))
    }

    pub fn portfolio(&self, rank: usize) -> Result<Eigenportfolio, CliError> {
        eigenportfolio(&self.sd, &self.rp, rank).in_module("eigenanalysis")
    }

    /// Regression on the first eigenportfolio.
    pub fn remove_market(&self) -> Result<MarketModeRemoval, CliError> {
        let g1 = self.portfolio(1)?;
        remove_market_mode(&self.rp, &g1.returns).in_module("marketmode")
    }
}

pub fn residual_law(mr: &MarketModeRemoval) -> Result<(MarchenkoPasturLaw, DeviationReport), CliError> {
    let law = mr.residual_law().in_module("marketmode")?;
    Ok((law, classify_deviations(&mr.residual_spectrum, &law)))
}

pub fn index_base(base: Base, kept: &PricePanel) -> f64 {
    match base {
        Base::Price(p) => p,
        Base::Auto => kept.mean_price().first().copied().unwrap_or(f64::NAN),
    }
}

//! Random-matrix analysis of the correlation structure of a panel of
//! price series.
//!
//! The pipeline runs in stages, each a pure function over immutable values:
//!
//! 1. [`ingest`]: load a CSV panel, fill gaps, drop exclusion dates;
//! 2. [`returns`]: daily log returns and descriptive statistics;
//! 3. [`corrcore`]: standardized returns and the correlation matrix;
//! 4. [`spectrum`]: eigendecomposition and the Marchenko-Pastur reference;
//! 5. [`eigenanalysis`]: inverse participation ratios, eigenportfolios and
//!    the market index;
//! 6. [`marketmode`]: market-mode removal, sector groups and coupled pairs.
//!
//! [`synth`] generates panels with planted structure for validation.
//!
//! ```
//! use eigenmarket::prelude::*;
//!
//! let spec = SyntheticSpec::one_factor(10, 2000, 7, 0.3);
//! let panel = generate(&spec)?;
//! let rp = compute_returns(&panel, &ExclusionCalendar::empty())?;
//! let cm = correlation_matrix(&standardize(&rp)?)?;
//! let sd = decompose(&cm)?;
//! let law = mp_law(rp.n_instruments(), rp.len())?;
//! let report = classify_deviations(&sd, &law);
//! assert_eq!(report.above, vec![1]);
//! # Ok::<(), eigenmarket::Error>(())
//! ```

#![allow(clippy::neg_cmp_op_on_partial_ord)] // `!(x > 0.0)` also rejects NaN

pub mod corrcore;
pub mod eigenanalysis;
mod error;
pub mod histogram;
pub mod ingest;
mod linalg;
pub mod marketmode;
pub mod returns;
pub mod spectrum;
pub mod synth;

pub use error::{Error, Result};

pub mod prelude {
    pub use crate::corrcore::{
        coefficient_distribution, correlation_matrix, standardize, CoefficientDistribution, CorrelationMatrix,
        StandardizedPanel,
    };
    pub use crate::eigenanalysis::{afpi, eigenportfolio, ipr, linearity_test, Eigenportfolio, IndexSeries, IprSeries, LinearityTest};
    pub use crate::histogram::Histogram;
    pub use crate::ingest::{
        align_and_fill, apply_exclusions, load_metadata, load_panel, read_metadata, read_panel, ExclusionCalendar,
        FillFlag, InstrumentMeta, PricePanel,
    };
    pub use crate::marketmode::{
        pair_report, remove_market_mode, sector_report, significant_participants, MarketModeRemoval, PairReport,
        SectorReport, Sign,
    };
    pub use crate::returns::{compute_returns, descriptive_stats, log_returns, DescriptiveStats, ReturnPanel};
    pub use crate::spectrum::{
        classify_deviations, decompose, empirical_density, mp_density, mp_law, DeviationReport, MarchenkoPasturLaw,
        SpectralDecomposition,
    };
    pub use crate::synth::{generate, implied_correlation, PairSpec, SectorSpec, SyntheticSpec};
    pub use crate::{Error, Result};
}

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/panels.md")]
    mod panels {}
    #[doc = include_str!("../../../book/src/correlation.md")]
    mod correlation {}
    #[doc = include_str!("../../../book/src/spectrum.md")]
    mod spectrum {}
    #[doc = include_str!("../../../book/src/eigenvectors.md")]
    mod eigenvectors {}
    #[doc = include_str!("../../../book/src/market-mode.md")]
    mod market_mode {}
    #[doc = include_str!("../../../book/src/synthetic.md")]
    mod synthetic {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}

use std::path::PathBuf;
use std::str::FromStr;

use serde::Serialize;

use crate::error::CliError;

pub const DEFAULT_BINS: usize = 50;
pub const DEFAULT_PAIR_COUNT: usize = 6;

/// Base value of the market index.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum Base {
    /// Cross-sectional mean price on the first date.
    #[default]
    Auto,
    Price(f64),
}

impl FromStr for Base {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.eq_ignore_ascii_case("auto") {
            return Ok(Base::Auto);
        }
        match s.parse::<f64>() {
            Ok(p) if p > 0.0 && p.is_finite() => Ok(Base::Price(p)),
            _ => Err(format!("expected `auto` or a positive price, got `{s}`")),
        }
    }
}

impl Serialize for Base {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Base::Auto => s.serialize_str("auto"),
            Base::Price(p) => s.serialize_f64(*p),
        }
    }
}

/// 1-based eigenvector ranks given as `1,2,3`, `2-5` or a mix.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(transparent)]
pub struct RankList(pub Vec<usize>);

impl FromStr for RankList {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut out = Vec::new();
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let parse = |x: &str| {
                x.trim()
                    .parse::<usize>()
                    .ok()
                    .filter(|&k| k >= 1)
                    .ok_or_else(|| format!("invalid rank `{x}` (ranks start at 1)"))
            };
            match part.split_once('-') {
                Some((a, b)) => {
                    let (a, b) = (parse(a)?, parse(b)?);
                    if a > b {
                        return Err(format!("empty rank range `{part}`"));
                    }
                    out.extend(a..=b);
                }
                None => out.push(parse(part)?),
            }
        }
        if out.is_empty() {
            return Err("no ranks given".into());
        }
        let mut seen = out.clone();
        seen.sort_unstable();
        if seen.windows(2).any(|w| w[0] == w[1]) {
            return Err(format!("duplicate rank in `{s}`"));
        }
        Ok(RankList(out))
    }
}

impl RankList {
    pub fn portfolio_default() -> Self {
        RankList((1..=5).collect())
    }

    /// The four strongest residual modes.
    pub fn sector_default() -> Self {
        RankList((1..=4).collect())
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RunConfig {
    pub input: PathBuf,
    pub meta: Option<PathBuf>,
    pub exclusions: Option<PathBuf>,
    /// Not serialized so that reports written to different directories match.
    #[serde(skip)]
    pub out: PathBuf,
    pub bins: usize,
    pub threshold: f64,
    pub ranks: RankList,
    pub sector_ranks: RankList,
    pub count: usize,
    pub base: Base,
    pub full_precision: bool,
}

impl RunConfig {
    pub fn new(input: impl Into<PathBuf>, out: impl Into<PathBuf>) -> Self {
        RunConfig {
            input: input.into(),
            meta: None,
            exclusions: None,
            out: out.into(),
            bins: DEFAULT_BINS,
            threshold: eigenmarket::marketmode::DEFAULT_THRESHOLD_FACTOR,
            ranks: RankList::portfolio_default(),
            sector_ranks: RankList::sector_default(),
            count: DEFAULT_PAIR_COUNT,
            base: Base::Auto,
            full_precision: false,
        }
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if self.bins == 0 {
            return Err(CliError::Input("--bins must be at least 1".into()));
        }
        if !(self.threshold > 0.0 && self.threshold.is_finite()) {
            return Err(CliError::Input(format!(
                "--threshold must be a positive number, got {}",
                self.threshold
            )));
        }
        if self.count == 0 {
            return Err(CliError::Input("--count must be at least 1".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rank_lists() {
        assert_eq!("2-5".parse::<RankList>().unwrap().0, vec![2, 3, 4, 5]);
        assert_eq!("1,2,3".parse::<RankList>().unwrap().0, vec![1, 2, 3]);
        assert_eq!("1, 4-5".parse::<RankList>().unwrap().0, vec![1, 4, 5]);
        for bad in ["", "0", "5-2", "1,1", "a", "1-"] {
            assert!(bad.parse::<RankList>().is_err(), "{bad}");
        }
    }

    #[test]
    fn base_values() {
        assert_eq!("auto".parse::<Base>().unwrap(), Base::Auto);
        assert_eq!("2673.995".parse::<Base>().unwrap(), Base::Price(2673.995));
        assert!("0".parse::<Base>().is_err());
        assert!("-3".parse::<Base>().is_err());
    }

    #[test]
    fn validation() {
        let mut cfg = RunConfig::new("p.csv", "out");
        assert!(cfg.validate().is_ok());
        cfg.bins = 0;
        assert_eq!(cfg.validate().unwrap_err().exit_code(), 2);
    }
}

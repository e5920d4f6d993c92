#![allow(dead_code)]

use eigenmarket::prelude::*;
use ndarray::Array2;

pub struct Pipeline {
    pub panel: PricePanel,
    pub rp: ReturnPanel,
    pub cm: CorrelationMatrix,
    pub sd: SpectralDecomposition,
}

pub fn run(spec: &SyntheticSpec) -> Pipeline {
    let panel = generate(spec).unwrap();
    let rp = compute_returns(&panel, &ExclusionCalendar::empty()).unwrap();
    let cm = correlation_matrix(&standardize(&rp).unwrap()).unwrap();
    let sd = decompose(&cm).unwrap();
    Pipeline { panel, rp, cm, sd }
}

pub fn metas(n: usize) -> Vec<InstrumentMeta> {
    let d = chrono::NaiveDate::from_ymd_opt(2020, 1, 1).unwrap();
    (1..=n as u32).map(|l| InstrumentMeta::bare(l, d)).collect()
}

pub fn return_panel(m: Array2<f64>) -> ReturnPanel {
    let (n, t) = m.dim();
    let d0 = chrono::NaiveDate::from_ymd_opt(2020, 1, 1).unwrap();
    let dates = (1..=t as u64).map(|k| d0 + chrono::Days::new(k)).collect();
    ReturnPanel::new(metas(n), d0, dates, m).unwrap()
}

/// Checks the decomposition invariants: trace, orthonormality, reconstruction, IPR range.
pub fn assert_spectral_invariants(cm: &CorrelationMatrix, sd: &SpectralDecomposition) {
    let n = sd.n();
    let trace: f64 = sd.eigenvalues().iter().sum();
    assert!((trace - n as f64).abs() < 1e-8, "trace {trace} vs {n}");
    let u = sd.eigenvectors();
    let gram = u.t().dot(u);
    for j in 0..n {
        for k in 0..n {
            let expect = if j == k { 1.0 } else { 0.0 };
            assert!((gram[[j, k]] - expect).abs() < 1e-10, "gram[{j},{k}] = {}", gram[[j, k]]);
        }
    }
    let rec = sd.reconstruct();
    let err = (&rec - cm.matrix()).iter().fold(0.0f64, |m, x| m.max(x.abs()));
    assert!(err < 1e-8, "reconstruction error {err}");
    for w in sd.eigenvalues().windows(2) {
        assert!(w[0] >= w[1]);
    }
    for v in eigenmarket::eigenanalysis::ipr(sd).values {
        assert!(v >= 1.0 / n as f64 - 1e-12 && v <= 1.0 + 1e-12, "ipr {v}");
    }
}

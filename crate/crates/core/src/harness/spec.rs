use std::path::PathBuf;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::synthetic::{sparse_network, SyntheticSpec};
use crate::error::{Error, Result};
use crate::linalg::{cholesky_sparse, ic0, LowerTriFactor};
use crate::matio::{read_matrix_market, SparseSymMatrix};
use crate::precond::ErrorCore;
use crate::rla::ProbeConfig;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum MatrixSource {
    Path { path: PathBuf },
    Synthetic(SyntheticSpec),
    /// Sparse network Laplacian; stands in for `494_bus` when the file is absent.
    Network { n: usize, seed: u64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum FactorChoice {
    #[default]
    Ic0,
    Exact,
    Identity,
}

impl std::str::FromStr for FactorChoice {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "ic0" => Ok(Self::Ic0),
            "exact" => Ok(Self::Exact),
            "identity" => Ok(Self::Identity),
            other => Err(format!("unknown factor {other:?} (expected ic0, exact or identity)")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlphaGrid {
    /// Defaults to `α*/10`.
    pub min: Option<f64>,
    /// Defaults to `10 α*`.
    pub max: Option<f64>,
    pub count: usize,
    pub log: bool,
}

impl Default for AlphaGrid {
    fn default() -> Self {
        Self {
            min: None,
            max: None,
            count: 101,
            log: true,
        }
    }
}

impl AlphaGrid {
    /// Grid points plus the `extra` values, sorted. An extra value replaces any grid
    /// point within `1e-9` relative of it.
    pub fn points(&self, alpha_star: f64, extra: &[f64]) -> Result<Vec<f64>> {
        if self.count < 2 {
            return Err(Error::domain("α grid needs at least 2 points"));
        }
        let lo = self.min.unwrap_or(alpha_star / 10.0);
        let hi = self.max.unwrap_or(alpha_star * 10.0);
        if !(lo > 0.0 && hi > lo) {
            return Err(Error::domain(format!("α grid [{lo}, {hi}] is not a positive interval")));
        }
        let last = (self.count - 1) as f64;
        let mut pts: Vec<f64> = (0..self.count)
            .map(|i| {
                let t = i as f64 / last;
                if self.log {
                    (lo.ln() + t * (hi.ln() - lo.ln())).exp()
                } else {
                    lo + t * (hi - lo)
                }
            })
            .collect();
        for &e in extra.iter().filter(|v| v.is_finite() && **v > 0.0) {
            pts.retain(|&p| (p - e).abs() > 1e-9 * e);
            pts.push(e);
        }
        pts.sort_by(f64::total_cmp);
        pts.dedup();
        Ok(pts)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PcgSpec {
    pub tol: f64,
    pub max_iter: Option<usize>,
}

impl Default for PcgSpec {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub matrix: MatrixSource,
    #[serde(default)]
    pub factor: FactorChoice,
    /// Defaults to `⌈n/10⌉`.
    #[serde(default)]
    pub rank: Option<usize>,
    /// Fixed α for solves; defaults to `α*`.
    #[serde(default)]
    pub alpha: Option<f64>,
    #[serde(default)]
    pub alpha_grid: AlphaGrid,
    #[serde(default)]
    pub pcg: PcgSpec,
    #[serde(default)]
    pub probe: ProbeConfig,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
}

impl ExperimentSpec {
    pub fn new(matrix: MatrixSource) -> Self {
        Self {
            matrix,
            factor: FactorChoice::default(),
            rank: None,
            alpha: None,
            alpha_grid: AlphaGrid::default(),
            pcg: PcgSpec::default(),
            probe: ProbeConfig::default(),
            seed: 0,
            output_dir: None,
        }
    }
}

pub fn default_rank(n: usize) -> usize {
    n.div_ceil(10)
}

pub fn load_matrix(source: &MatrixSource) -> Result<SparseSymMatrix> {
    match source {
        MatrixSource::Path { path } => read_matrix_market(path),
        MatrixSource::Synthetic(s) => SparseSymMatrix::from_dense_lower(&s.generate()?.a),
        MatrixSource::Network { n, seed } => sparse_network(*n, *seed),
    }
}

pub fn build_factor(a: &SparseSymMatrix, choice: FactorChoice) -> Result<LowerTriFactor> {
    match choice {
        FactorChoice::Ic0 => ic0(a),
        FactorChoice::Exact => cholesky_sparse(a),
        FactorChoice::Identity => Ok(LowerTriFactor::identity(a.order())),
    }
}

/// A loaded matrix, its base factor, the error core and the rank in use.
#[derive(Clone, Debug)]
pub struct Instance {
    pub a: SparseSymMatrix,
    pub core: ErrorCore,
    pub rank: usize,
}

impl Instance {
    pub fn build(spec: &ExperimentSpec) -> Result<Self> {
        let a = load_matrix(&spec.matrix)?;
        Self::from_matrix(a, spec.factor, spec.rank)
    }

    pub fn from_matrix(a: SparseSymMatrix, factor: FactorChoice, rank: Option<usize>) -> Result<Self> {
        let n = a.order();
        let rank = rank.unwrap_or_else(|| default_rank(n));
        if rank >= n {
            return Err(Error::Rank { rank, n });
        }
        let q = Arc::new(build_factor(&a, factor)?);
        let core = ErrorCore::new(&a, q)?;
        Ok(Self { a, core, rank })
    }

    pub fn order(&self) -> usize {
        self.a.order()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::synthetic::SpectrumSpec;

    #[test]
    fn grid_inserts_extras() {
        let g = AlphaGrid::default();
        let pts = g.points(2.0, &[2.0, 1.234]).unwrap();
        // 2.0 replaces the midpoint of the log grid
        assert_eq!(pts.len(), 102);
        assert!(pts.contains(&2.0) && pts.contains(&1.234));
        assert!((pts[0] - 0.2).abs() < 1e-15);
        assert!((pts[101] - 20.0).abs() < 1e-13);
        assert!(pts.windows(2).all(|w| w[0] < w[1]));
        let bad = AlphaGrid {
            count: 1,
            ..AlphaGrid::default()
        };
        assert!(bad.points(1.0, &[]).is_err());
    }

    #[test]
    fn spec_round_trips_through_json() {
        let mut spec = ExperimentSpec::new(MatrixSource::Synthetic(SyntheticSpec {
            n: 10,
            spectrum: SpectrumSpec::Uniform { a: 1.0, b: 2.0 },
            seed: 4,
        }));
        spec.rank = Some(2);
        let text = serde_json::to_string(&spec).unwrap();
        let back: ExperimentSpec = serde_json::from_str(&text).unwrap();
        assert_eq!(back, spec);
        let minimal: ExperimentSpec =
            serde_json::from_str(r#"{"matrix": {"source": "network", "n": 20, "seed": 1}}"#).unwrap();
        assert_eq!(minimal.factor, FactorChoice::Ic0);
        assert_eq!(minimal.alpha_grid.count, 101);
    }

    #[test]
    fn instance_rejects_full_rank() {
        let a = sparse_network(10, 0).unwrap();
        assert!(matches!(
            Instance::from_matrix(a, FactorChoice::Ic0, Some(10)),
            Err(Error::Rank { .. })
        ));
    }
}

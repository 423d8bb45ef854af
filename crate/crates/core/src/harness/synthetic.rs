//! Seeded test-matrix generators with known spectra.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matio::vector::{dot, norm2};
use crate::matio::{DenseMatrix, SparseSymMatrix};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SpectrumSpec {
    /// `n` equispaced values from `a` to `b`.
    Uniform { a: f64, b: f64 },
    /// `κ^{i/(n−1)}`, from 1 to `κ`.
    Geometric { kappa: f64 },
    /// Each value repeated by its multiplicity; multiplicities must sum to `n`.
    Clustered {
        values: Vec<f64>,
        multiplicities: Vec<usize>,
    },
    Explicit { values: Vec<f64> },
}

impl SpectrumSpec {
    pub fn eigenvalues(&self, n: usize) -> Result<Vec<f64>> {
        let values = match self {
            SpectrumSpec::Uniform { a, b } => {
                if n == 1 {
                    vec![*a]
                } else {
                    (0..n)
                        .map(|i| a + (b - a) * i as f64 / (n - 1) as f64)
                        .collect()
                }
            }
            SpectrumSpec::Geometric { kappa } => {
                if !(*kappa >= 1.0) {
                    return Err(Error::domain(format!("geometric κ = {kappa} must be ≥ 1")));
                }
                if n == 1 {
                    vec![1.0]
                } else {
                    (0..n)
                        .map(|i| kappa.powf(i as f64 / (n - 1) as f64))
                        .collect()
                }
            }
            SpectrumSpec::Clustered {
                values,
                multiplicities,
            } => {
                if values.len() != multiplicities.len() || multiplicities.iter().sum::<usize>() != n
                {
                    return Err(Error::domain(
                        "cluster multiplicities must match the values and sum to n",
                    ));
                }
                values
                    .iter()
                    .zip(multiplicities)
                    .flat_map(|(&v, &m)| std::iter::repeat_n(v, m))
                    .collect()
            }
            SpectrumSpec::Explicit { values } => {
                if values.len() != n {
                    return Err(Error::Dimension {
                        expected: n,
                        got: values.len(),
                    });
                }
                values.clone()
            }
        };
        if let Some(&v) = values.iter().find(|&&v| !(v > 0.0) || !v.is_finite()) {
            return Err(Error::domain(format!("generated eigenvalue {v} is not positive")));
        }
        Ok(values)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub n: usize,
    pub spectrum: SpectrumSpec,
    /// Seed for the orthogonal basis.
    pub seed: u64,
}

/// `A = W Λ Wᵀ` together with its exact spectrum.
#[derive(Clone, Debug)]
pub struct SyntheticMatrix {
    pub a: DenseMatrix,
    /// In generation order (column `i` of `basis` belongs to `eigenvalues[i]`).
    pub eigenvalues: Vec<f64>,
    pub basis: DenseMatrix,
}

impl SyntheticMatrix {
    pub fn trace(&self) -> f64 {
        self.eigenvalues.iter().sum()
    }

    pub fn logdet(&self) -> f64 {
        self.eigenvalues.iter().map(|v| v.ln()).sum()
    }
}

impl SyntheticSpec {
    pub fn generate(&self) -> Result<SyntheticMatrix> {
        if self.n == 0 {
            return Err(Error::domain("synthetic matrix order must be positive"));
        }
        let eigenvalues = self.spectrum.eigenvalues(self.n)?;
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let basis = haar_orthogonal(self.n, &mut rng);
        let a = with_spectrum(&basis, &eigenvalues);
        Ok(SyntheticMatrix {
            a,
            eigenvalues,
            basis,
        })
    }
}

/// `W diag(λ) Wᵀ`, symmetrized.
pub fn with_spectrum(w: &DenseMatrix, lambda: &[f64]) -> DenseMatrix {
    let n = w.n_rows();
    let scaled = DenseMatrix::from_fn(n, lambda.len(), |i, j| w[(i, j)] * lambda[j]);
    let mut a = scaled.matmul(&w.transpose());
    a.symmetrize();
    a
}

pub fn gaussian_matrix<R: Rng>(rows: usize, cols: usize, rng: &mut R) -> DenseMatrix {
    DenseMatrix::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
}

/// Haar-distributed orthogonal matrix: QR of a Gaussian matrix with the signs of
/// `diag(R)` folded into `Q`.
pub fn haar_orthogonal<R: Rng>(n: usize, rng: &mut R) -> DenseMatrix {
    let g = gaussian_matrix(n, n, rng);
    let mut cols: Vec<Vec<f64>> = (0..n).map(|j| g.column(j)).collect();
    for j in 0..n {
        let (done, rest) = cols.split_at_mut(j);
        let c = &mut rest[0];
        let original = norm2(c);
        // twice is enough
        for _ in 0..2 {
            for q in done.iter() {
                let h = dot(q, c);
                for (ci, qi) in c.iter_mut().zip(q) {
                    *ci -= h * qi;
                }
            }
        }
        let nc = norm2(c);
        debug_assert!(nc > 1e-10 * original);
        // Gram-Schmidt already yields a positive R diagonal
        for ci in c.iter_mut() {
            *ci /= nc;
        }
    }
    DenseMatrix::from_columns(n, &cols)
}

/// Random SPD matrix `W diag(e^{u_i}) Wᵀ` with `u_i` uniform in `[−s, s]`,
/// so `κ₂ ≤ e^{2s}`.
pub fn random_spd<R: Rng>(n: usize, log_spread: f64, rng: &mut R) -> (DenseMatrix, Vec<f64>) {
    let w = haar_orthogonal(n, rng);
    let lambda: Vec<f64> = (0..n)
        .map(|_| (rng.random_range(-1.0..=1.0) * log_spread).exp())
        .collect();
    (with_spectrum(&w, &lambda), lambda)
}

/// Random symmetric matrix with spectrum in `[lo, hi]`.
pub fn random_symmetric<R: Rng>(n: usize, lo: f64, hi: f64, rng: &mut R) -> DenseMatrix {
    let w = haar_orthogonal(n, rng);
    let lambda: Vec<f64> = (0..n).map(|_| rng.random_range(lo..=hi)).collect();
    with_spectrum(&w, &lambda)
}

/// Sparse SPD stand-in for a power-network matrix: the weighted Laplacian of a
/// ring with random chords, plus a small positive diagonal.
pub fn sparse_network(n: usize, seed: u64) -> Result<SparseSymMatrix> {
    if n < 3 {
        return Err(Error::domain("network stand-in needs n ≥ 3"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut edges: Vec<(usize, usize, f64)> = (0..n)
        .map(|i| (i, (i + 1) % n, rng.random_range(0.5..2.0)))
        .collect();
    for _ in 0..n / 2 {
        let i = rng.random_range(0..n);
        let j = rng.random_range(0..n);
        if i != j {
            edges.push((i, j, rng.random_range(0.1..5.0)));
        }
    }
    let mut diag: Vec<f64> = (0..n)
        .map(|_| 10f64.powf(rng.random_range(-3.0..0.0)))
        .collect();
    let mut triplets = Vec::with_capacity(edges.len() + n);
    for &(i, j, w) in &edges {
        diag[i] += w;
        diag[j] += w;
        triplets.push((i.max(j), i.min(j), -w));
    }
    triplets.extend(diag.into_iter().enumerate().map(|(i, d)| (i, i, d)));
    SparseSymMatrix::from_triplets(n, triplets)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{cholesky_sparse, sym_eig};

    #[test]
    fn haar_is_orthogonal() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let w = haar_orthogonal(20, &mut rng);
        let g = w.t_matmul(&w);
        assert!(g.sub(&DenseMatrix::identity(20)).max_abs() < 1e-13);
    }

    #[test]
    fn spectrum_is_recovered() {
        let spec = SyntheticSpec {
            n: 12,
            spectrum: SpectrumSpec::Geometric { kappa: 100.0 },
            seed: 1,
        };
        let m = spec.generate().unwrap();
        let mut want = m.eigenvalues.clone();
        want.sort_by(|a, b| b.total_cmp(a));
        let got = sym_eig(&m.a).unwrap().values;
        for (g, w) in got.iter().zip(&want) {
            assert!((g - w).abs() < 1e-11 * w.max(1.0));
        }
        assert!((want[0] - 100.0).abs() < 1e-12 && (want[11] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn spectrum_generators() {
        assert_eq!(
            SpectrumSpec::Uniform { a: 1.0, b: 3.0 }.eigenvalues(3).unwrap(),
            vec![1.0, 2.0, 3.0]
        );
        let c = SpectrumSpec::Clustered {
            values: vec![1.0, 5.0],
            multiplicities: vec![2, 1],
        };
        assert_eq!(c.eigenvalues(3).unwrap(), vec![1.0, 1.0, 5.0]);
        assert!(c.eigenvalues(4).is_err());
        assert!(SpectrumSpec::Uniform { a: -1.0, b: 1.0 }.eigenvalues(3).is_err());
        assert!(SpectrumSpec::Explicit { values: vec![1.0] }.eigenvalues(2).is_err());
    }

    #[test]
    fn generation_is_deterministic() {
        let spec = SyntheticSpec {
            n: 6,
            spectrum: SpectrumSpec::Uniform { a: 1.0, b: 2.0 },
            seed: 11,
        };
        assert_eq!(spec.generate().unwrap().a, spec.generate().unwrap().a);
    }

    #[test]
    fn network_is_spd_and_sparse() {
        let a = sparse_network(494, 0).unwrap();
        assert_eq!(a.order(), 494);
        assert!(a.nnz_lower() < 494 * 4);
        cholesky_sparse(&a).unwrap();
        assert_eq!(a, sparse_network(494, 0).unwrap());
    }
}

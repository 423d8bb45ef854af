use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use bld_kaporin::divergence::{bregman_logdet, DivergenceMethod, SpdPair};
use bld_kaporin::harness::synthetic::{random_spd, random_symmetric, sparse_network};
use bld_kaporin::linalg::{
    cholesky, cholesky_sparse, ic0, lanczos, logdet_spd, spd_inverse, sym_eig,
    tridiag_eig_first_components,
};
use bld_kaporin::matio::{DenseMatrix, SparseSymMatrix};

fn to_na(a: &DenseMatrix) -> DMatrix<f64> {
    DMatrix::from_fn(a.n_rows(), a.n_cols(), |i, j| a[(i, j)])
}

fn sorted_desc(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_by(|a, b| b.total_cmp(a));
    v
}

#[test]
fn eigenvalues_match_nalgebra() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for n in [1, 2, 5, 17, 60] {
        let a = random_symmetric(n, -3.0, 5.0, &mut rng);
        let ours = sym_eig(&a).unwrap();
        let theirs = sorted_desc(SymmetricEigen::new(to_na(&a)).eigenvalues.iter().copied().collect());
        for (x, y) in ours.values.iter().zip(&theirs) {
            assert!((x - y).abs() <= 1e-11 * (1.0 + y.abs()), "n = {n}: {x} vs {y}");
        }
        assert!(ours.reconstruct().sub(&a).max_abs() <= 1e-11 * (1.0 + a.max_abs()));
    }
}

#[test]
fn cholesky_logdet_and_inverse_match_nalgebra() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for n in [1, 4, 25] {
        let (a, _) = random_spd(n, 2.0, &mut rng);
        let na = to_na(&a);
        let chol = na.clone().cholesky().unwrap();
        let l = cholesky(&a).unwrap().to_dense();
        assert!((to_na(&l) - chol.l()).amax() <= 1e-12 * na.amax().sqrt());
        let want_ld = na.determinant().ln();
        assert!((logdet_spd(&a).unwrap() - want_ld).abs() <= 1e-10 * (1.0 + want_ld.abs()));
        let inv = chol.inverse();
        assert!((to_na(&spd_inverse(&a).unwrap()) - &inv).amax() <= 1e-10 * inv.amax());
    }
}

#[test]
fn divergence_matches_a_dense_solve_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for n in [3, 12, 30] {
        let (a, _) = random_spd(n, 1.0, &mut rng);
        let (p, _) = random_spd(n, 1.0, &mut rng);
        let (na, np) = (to_na(&a), to_na(&p));
        let m = np.clone().lu().solve(&na).unwrap();
        let want = m.trace() - (na.determinant() / np.determinant()).ln() - n as f64;
        let pair = SpdPair::new(a, p).unwrap();
        for method in [DivergenceMethod::DenseDirect, DivergenceMethod::EigenSum] {
            let got = bregman_logdet(&pair, method).unwrap();
            assert!((got - want).abs() <= 1e-9 * (1.0 + want), "{method:?}: {got} vs {want}");
        }
    }
}

#[test]
fn ic0_is_exact_without_fill() {
    // a tridiagonal matrix has no fill, so IC(0) is the Cholesky factor
    let n = 30;
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut t = Vec::new();
    for i in 0..n {
        t.push((i, i, 4.0 + rng.random_range(0.0..1.0)));
        if i > 0 {
            t.push((i, i - 1, -rng.random_range(0.5..1.5)));
        }
    }
    let a = SparseSymMatrix::from_triplets(n, t).unwrap();
    let inc = ic0(&a).unwrap().to_dense();
    let full = to_na(&a.to_dense()).cholesky().unwrap().l();
    assert!((to_na(&inc) - full).amax() <= 1e-13);
    assert!(cholesky_sparse(&a).unwrap().to_dense().sub(&inc).max_abs() <= 1e-13);
}

#[test]
fn ic0_on_a_network_is_close_to_the_matrix_on_its_pattern() {
    let a = sparse_network(80, 9).unwrap();
    let l = ic0(&a).unwrap();
    let ld = to_na(&l.to_dense());
    let llt = &ld * ld.transpose();
    for (i, j, v) in a.triplets() {
        assert!((llt[(i, j)] - (1.0 + if i == j { l.shift() } else { 0.0 }) * v).abs() <= 1e-10 * (1.0 + v.abs()));
    }
}

#[test]
fn lanczos_ritz_values_match_nalgebra_on_the_tridiagonal() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (a, _) = random_spd(40, 1.0, &mut rng);
    let v0: Vec<f64> = {
        let v: Vec<f64> = (0..40).map(|_| rng.random_range(-1.0..1.0)).collect();
        let s = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        v.into_iter().map(|x| x / s).collect()
    };
    let lz = lanczos(&a, &v0, 15, true).unwrap();
    let t = lz.tridiagonal();
    let eig = SymmetricEigen::new(to_na(&t));
    let want = sorted_desc(eig.eigenvalues.iter().copied().collect());
    let got = tridiag_eig_first_components(&lz.alphas, &lz.betas).unwrap();
    for ((theta, tau), w) in got.iter().zip(&want) {
        assert!((theta - w).abs() <= 1e-11 * (1.0 + w.abs()));
        assert!(tau.abs() <= 1.0 + 1e-12);
    }
    let tau_sq: f64 = got.iter().map(|(_, t)| t * t).sum();
    assert!((tau_sq - 1.0).abs() <= 1e-12);
    // the extreme Ritz value never exceeds the true largest eigenvalue
    let top = SymmetricEigen::new(to_na(&a)).eigenvalues.max();
    assert!(got[0].0 <= top * (1.0 + 1e-12));
}

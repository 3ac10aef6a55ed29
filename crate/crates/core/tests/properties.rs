use glmvae_core::activity::{analytical_activity, empirical_activity, histogram};
use glmvae_core::closed_form::{activity_predict, mle_fit, objective_hat, variational_optima, AffineDecoder, MleOptions};
use glmvae_core::data::{encode_idx, parse_idx};
use glmvae_core::edf::{sigmoid, EdfFamily};
use glmvae_core::nn::{build_architecture, init_mle_b_with, Architecture, LogvarWeights};
use glmvae_core::numerics::{sample_covariance, sym_eig, Matrix, Rng};
use nalgebra::{DMatrix, SymmetricEigen};
use proptest::prelude::*;

fn to_na(m: &Matrix) -> DMatrix<f64> {
    DMatrix::from_fn(m.rows(), m.cols(), |i, j| m[(i, j)])
}

fn random_orthogonal(n: usize, rng: &mut Rng) -> Matrix {
    let q = DMatrix::from_fn(n, n, |_, _| rng.standard_normal()).qr().q();
    Matrix::from_fn(n, n, |i, j| q[(i, j)])
}

fn gaussian_data(n: usize, d: usize, rng: &mut Rng) -> Matrix {
    // anisotropic so the spectrum spreads across the cut-off
    let scales: Vec<f64> = (0..d).map(|j| 3.0 / (1.0 + j as f64)).collect();
    let mix = random_orthogonal(d, rng);
    let z = Matrix::from_fn(n, d, |_, j| scales[j] * rng.standard_normal());
    z.matmul(&mix).unwrap()
}

fn binary_data(n: usize, d: usize, rng: &mut Rng) -> Matrix {
    let p: Vec<f64> = (0..d).map(|_| 0.1 + 0.8 * rng.uniform()).collect();
    let mut x = Matrix::zeros(n, d);
    for i in 0..n {
        // a shared factor correlates the columns
        let on = rng.bernoulli(0.5);
        for j in 0..d {
            let q = if on { p[j] } else { 1.0 - p[j] };
            x[(i, j)] = if rng.bernoulli(q) { 1.0 } else { 0.0 };
        }
    }
    x
}

fn instance(seed: u64, gaussian: bool) -> (Matrix, EdfFamily) {
    let mut rng = Rng::new(seed);
    if gaussian {
        (gaussian_data(60, 6, &mut rng), EdfFamily::gaussian(1.0).unwrap())
    } else {
        (binary_data(60, 6, &mut rng), EdfFamily::bernoulli())
    }
}

fn perturbed(m: &Matrix, eps: f64, rng: &mut Rng) -> Matrix {
    Matrix::from_fn(m.rows(), m.cols(), |i, j| m[(i, j)] + eps * rng.standard_normal())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn tanh_output_is_linearly_canonical(theta in -30.0f64..30.0) {
        let fam = EdfFamily::bernoulli().with_rho(2.0).unwrap();
        let m = fam.mean_response(theta).unwrap();
        prop_assert!((m - (0.5 * theta.tanh() + 0.5)).abs() <= 1e-12);
        prop_assert!((m - sigmoid(2.0 * theta)).abs() <= 1e-12);
    }

    #[test]
    fn log_normalizers_are_convex(theta in -5.0f64..5.0, trials in 1u32..6) {
        for fam in [EdfFamily::bernoulli(), EdfFamily::poisson(), EdfFamily::binomial(trials).unwrap(), EdfFamily::gaussian(0.7).unwrap()] {
            prop_assert!(fam.variance_response(theta).unwrap() > 0.0);
        }
    }

    #[test]
    fn sym_eig_reconstructs_and_matches_reference(seed in any::<u64>(), n in 1usize..=50) {
        let mut rng = Rng::new(seed);
        let b = Matrix::from_fn(n, n, |_, _| rng.standard_normal());
        let a = b.add(&b.transpose()).unwrap();
        let eig = sym_eig(&a).unwrap();
        let norm = a.frobenius_norm();
        prop_assert!(eig.reconstruct().sub(&a).unwrap().frobenius_norm() <= 1e-8 * norm);
        let v = &eig.eigenvectors;
        prop_assert!(v.transpose().matmul(v).unwrap().sub(&Matrix::identity(n)).unwrap().max_abs() <= 1e-10);
        for (j, &l) in eig.eigenvalues.iter().enumerate() {
            let col = v.column(j);
            let av = a.matvec(&col).unwrap();
            let resid: f64 = av.iter().zip(&col).map(|(x, c)| (x - l * c).powi(2)).sum::<f64>().sqrt();
            prop_assert!(resid <= 1e-8 * norm);
        }
        let mut reference: Vec<f64> = SymmetricEigen::new(to_na(&a)).eigenvalues.iter().copied().collect();
        reference.sort_by(|x, y| y.total_cmp(x));
        for (x, y) in eig.eigenvalues.iter().zip(&reference) {
            prop_assert!((x - y).abs() <= 1e-9 * norm);
        }
    }

    #[test]
    fn sample_covariance_is_psd(seed in any::<u64>(), n in 1usize..40, d in 1usize..12) {
        let mut rng = Rng::new(seed);
        let x = Matrix::from_fn(n, d, |_, _| rng.standard_normal());
        let s = sample_covariance(&x, &x.column_means()).unwrap();
        let min = SymmetricEigen::new(to_na(&s)).eigenvalues.min();
        prop_assert!(min >= -1e-10);
    }

    #[test]
    fn idx_round_trip(seed in any::<u64>(), n in 1usize..20, d in 1usize..20) {
        let mut rng = Rng::new(seed);
        let x = Matrix::from_fn(n, d, |_, _| rng.below(256) as f64 / 255.0);
        prop_assert_eq!(parse_idx(&encode_idx(&x, None).unwrap()).unwrap(), x);
    }

    #[test]
    fn decoder_mle_is_a_local_maximum(seed in any::<u64>(), gaussian in any::<bool>(), beta in 0.2f64..2.0) {
        let (x, fam) = instance(seed, gaussian);
        let sol = mle_fit(&x, &fam, &MleOptions::new(beta, 3)).unwrap();
        let fam = sol.family;
        let best = objective_hat(&sol.decoder(), &x, &fam, beta).unwrap();
        let mut rng = Rng::new(seed ^ 0x5eed);
        for _ in 0..100 {
            let w = perturbed(&sol.w_hat, 1e-3, &mut rng);
            let dec = AffineDecoder::new(w, sol.b_hat.clone()).unwrap();
            prop_assert!(objective_hat(&dec, &x, &fam, beta).unwrap() <= best + 1e-9);
        }
        for _ in 0..100 {
            let b: Vec<f64> = sol.b_hat.iter().map(|v| v + 1e-3 * rng.standard_normal()).collect();
            let dec = AffineDecoder::new(sol.w_hat.clone(), b).unwrap();
            prop_assert!(objective_hat(&dec, &x, &fam, beta).unwrap() <= best + 1e-9);
        }
    }

    #[test]
    fn objective_is_rotation_invariant(seed in any::<u64>(), gaussian in any::<bool>()) {
        let (x, fam) = instance(seed, gaussian);
        let sol = mle_fit(&x, &fam, &MleOptions::new(1.0, 3)).unwrap();
        let base = objective_hat(&sol.decoder(), &x, &sol.family, 1.0).unwrap();
        let mut rng = Rng::new(seed);
        for _ in 0..20 {
            let q = random_orthogonal(3, &mut rng);
            let dec = AffineDecoder::new(sol.w_hat.matmul(&q).unwrap(), sol.b_hat.clone()).unwrap();
            let v = objective_hat(&dec, &x, &sol.family, 1.0).unwrap();
            prop_assert!((v - base).abs() <= 1e-10 * base.abs());
        }
    }

    #[test]
    fn posterior_covariance_matches_woodbury_form(seed in any::<u64>(), gaussian in any::<bool>(), beta in 0.2f64..2.0) {
        let (x, fam) = instance(seed, gaussian);
        let r = random_orthogonal(3, &mut Rng::new(seed));
        let sol = mle_fit(&x, &fam, &MleOptions::new(beta, 3).with_rotation(r)).unwrap();
        let f2 = sol.family.constants().f2;
        let w = to_na(&sol.w_hat);
        let m = DMatrix::identity(3, 3) + w.transpose() * &w * (f2 / (beta * sol.dispersion()));
        let expected = m.try_inverse().unwrap();
        let got = to_na(&variational_optima(&sol).sigma_z);
        prop_assert!((got - expected).abs().max() <= 1e-10);
    }

    #[test]
    fn gaussian_dispersion_grows_with_beta(seed in any::<u64>(), b1 in 0.05f64..1.9, b2 in 0.05f64..1.9) {
        // d/κ = 2
        let (x, fam) = instance(seed, true);
        let (lo, hi) = if b1 < b2 { (b1, b2) } else { (b2, b1) };
        let s_lo = mle_fit(&x, &fam, &MleOptions::new(lo, 3)).unwrap().sigma2_hat.unwrap();
        let s_hi = mle_fit(&x, &fam, &MleOptions::new(hi, 3)).unwrap().sigma2_hat.unwrap();
        prop_assert!(s_lo <= s_hi);
    }

    #[test]
    fn activity_shrinks_with_beta(seed in any::<u64>(), gaussian in any::<bool>()) {
        let (x, fam) = instance(seed, gaussian);
        let mut prev: Option<(Vec<f64>, usize)> = None;
        for beta in [0.0, 0.1, 0.3, 0.6, 1.0, 1.5, 1.9] {
            let sol = mle_fit(&x, &fam, &MleOptions::new(beta, 3)).unwrap();
            let act = activity_predict(&sol);
            let count = analytical_activity(&sol).active_count;
            if let Some((p, c)) = &prev {
                prop_assert!(act.iter().zip(p).all(|(a, b)| a <= b));
                prop_assert!(count <= *c);
            }
            prev = Some((act, count));
        }
    }

    #[test]
    fn active_units_are_eigenvalues_above_cutoff(seed in any::<u64>(), gaussian in any::<bool>(), beta in 0.0f64..1.9) {
        let (x, fam) = instance(seed, gaussian);
        let sol = mle_fit(&x, &fam, &MleOptions::new(beta, 3)).unwrap();
        let expected = sol.eigenvalues[..3].iter().filter(|&&l| l > sol.cutoff).count();
        prop_assert_eq!(sol.active_count(), expected);
        for j in 0..3 {
            let norm: f64 = sol.w_hat.column(j).iter().map(|v| v * v).sum();
            prop_assert_eq!(norm > 0.0, sol.active_mask[j]);
        }
    }

    #[test]
    fn histogram_has_kappa_mass(values in proptest::collection::vec(0.0f64..2.0, 1..30)) {
        prop_assert_eq!(histogram(&values).iter().sum::<usize>(), values.len());
    }
}

#[test]
fn mle_b_encoder_activity_matches_brute_force_and_prediction() {
    let mut rng = Rng::new(8);
    let x = binary_data(400, 12, &mut rng);
    let sol = mle_fit(&x, &EdfFamily::bernoulli(), &MleOptions::new(1.0, 4)).unwrap();
    let mut model = build_architecture(Architecture::Canonical, 12, 4, EdfFamily::bernoulli(), 1.0, 0.5).unwrap();
    init_mle_b_with(&mut model, &sol, &mut rng, LogvarWeights::Zero).unwrap();
    let report = empirical_activity(&model, &x).unwrap();

    let (mu, _) = model.encode(&x).unwrap();
    let mu = to_na(&mu);
    let mean = mu.row_mean();
    for (k, &v) in report.values.iter().enumerate() {
        let brute = mu.column(k).iter().map(|m| (m - mean[k]).powi(2)).sum::<f64>() / x.rows() as f64;
        assert!((v - brute).abs() <= 1e-10, "unit {k}: {v} vs {brute}");
    }
    // on the data it was fitted to, the encoder spread is (λ − cutoff)/λ
    for (v, p) in report.values.iter().zip(activity_predict(&sol)) {
        assert!((v - p).abs() <= 1e-10, "{v} vs {p}");
    }
    assert_eq!(report.active_count, report.values.iter().filter(|&&v| v > 0.01).count());
}

/// ELBO at optimal `μ`, `Σ` for a Gaussian decoder with dispersion 1,
/// without additive constants.
fn gaussian_profile_elbo(w: &DMatrix<f64>, y: &[Vec<f64>], beta: f64) -> f64 {
    let k = w.ncols();
    let wtw = w.transpose() * w;
    let prec = &wtw + DMatrix::identity(k, k) * beta;
    let prec_inv = prec.clone().try_inverse().unwrap();
    let sigma = (DMatrix::identity(k, k) + &wtw / beta).try_inverse().unwrap();
    let mut total = 0.0;
    for yi in y {
        let yv = nalgebra::DVector::from_column_slice(yi);
        let mu = &prec_inv * w.transpose() * &yv;
        let r = &yv - w * &mu;
        total += -0.5 * r.norm_squared() - 0.5 * (&wtw * &sigma).trace();
        total -= beta * 0.5 * (mu.norm_squared() + sigma.trace() - k as f64 - sigma.determinant().ln());
    }
    total
}

#[test]
fn gaussian_example_matches_gradient_ascent() {
    // eight points ±2√λ_j e_j have covariance diag(5, 3, 1, 1)
    let lambda = [5.0f64, 3.0, 1.0, 1.0];
    let mut rows = Vec::new();
    for (j, l) in lambda.iter().enumerate() {
        for s in [1.0, -1.0] {
            let mut r = vec![0.0; 4];
            r[j] = s * 2.0 * l.sqrt();
            rows.push(r);
        }
    }
    let x = Matrix::from_rows(&rows).unwrap();
    let sol = mle_fit(&x, &EdfFamily::gaussian(1.0).unwrap(), &MleOptions::new(1.0, 2)).unwrap();
    assert!((sol.sigma2_hat.unwrap() - 1.0).abs() < 1e-12);

    let mut w = DMatrix::from_row_slice(4, 2, &[1.0, 0.3, 0.2, 1.0, 0.1, -0.2, -0.1, 0.05]);
    let h = 1e-6;
    let step = 0.01;
    for _ in 0..20_000 {
        let mut grad = DMatrix::zeros(4, 2);
        for idx in 0..8 {
            let mut up = w.clone();
            up[idx] += h;
            let mut down = w.clone();
            down[idx] -= h;
            grad[idx] = (gaussian_profile_elbo(&up, &rows, 1.0) - gaussian_profile_elbo(&down, &rows, 1.0)) / (2.0 * h);
        }
        w += grad * (step / rows.len() as f64);
    }
    let oracle = &w * w.transpose();
    let w_hat = to_na(&sol.w_hat);
    let diff = (&w_hat * w_hat.transpose() - oracle).abs().max();
    assert!(diff <= 1e-4, "max |ŴŴᵀ − WWᵀ| = {diff}");
}

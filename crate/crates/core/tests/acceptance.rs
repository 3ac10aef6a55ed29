//! Acceptance checks. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.
//!
//! Reference values come from code in this file (nalgebra linear algebra,
//! hand-written log densities and Monte Carlo), not from the library's own
//! helpers.

mod common;

use std::process::ExitCode;
use std::time::Instant;

use glmvae_core::activity::{analytical_activity, empirical_activity, histogram_distance, Histogram, HISTOGRAM_BINS};
use glmvae_core::closed_form::{
    activity_predict, approx_objective_general, expected_remainder, mle_fit, objective_hat, optimal_variational,
    variational_optima, AffineDecoder, MleOptions,
};
use glmvae_core::data::{load_idx, synthetic_bernoulli, Dataset};
use glmvae_core::edf::{EdfFamily, FamilyKind};
use glmvae_core::nn::{build_architecture, evaluate, init_bench, init_mle_b, train, Architecture, TrainConfig, TrainHistory};
use glmvae_core::numerics::{Matrix, Rng};
use nalgebra::{DMatrix, DVector, SymmetricEigen};

struct Outcome {
    failed: usize,
}

impl Outcome {
    fn record(&mut self, name: &str, pass: bool, detail: String) {
        println!("{} {name}: {detail}", if pass { "PASS" } else { "FAIL" });
        if !pass {
            self.failed += 1;
        }
    }
}

fn to_na(m: &Matrix) -> DMatrix<f64> {
    DMatrix::from_fn(m.rows(), m.cols(), |i, j| m[(i, j)])
}

fn random_matrix(rows: usize, cols: usize, rng: &mut Rng) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| rng.standard_normal())
}

fn random_orthogonal(n: usize, rng: &mut Rng) -> Matrix {
    let q = to_na(&random_matrix(n, n, rng)).qr().q();
    Matrix::from_fn(n, n, |i, j| q[(i, j)])
}

/// Population covariance, divisor `N`.
fn covariance_oracle(x: &Matrix) -> DMatrix<f64> {
    let a = to_na(x);
    let mean = a.row_mean();
    let mut c = a.clone();
    for mut row in c.row_iter_mut() {
        row -= &mean;
    }
    c.transpose() * &c / x.rows() as f64
}

/// Eigenvalues descending with matching eigenvector columns.
fn sorted_eigen(s: DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let eig = SymmetricEigen::new(s);
    let mut idx: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    idx.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let vals = idx.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vecs = DMatrix::from_fn(eig.eigenvectors.nrows(), idx.len(), |r, c| eig.eigenvectors[(r, idx[c])]);
    (vals, vecs)
}

fn log_density_oracle(kind: FamilyKind, phi: f64, x: f64, theta: f64) -> f64 {
    match kind {
        FamilyKind::Gaussian => -(x - theta).powi(2) / (2.0 * phi) - 0.5 * (2.0 * std::f64::consts::PI * phi).ln(),
        FamilyKind::Bernoulli => x * theta - (theta.max(0.0) + (-theta.abs()).exp().ln_1p()),
        _ => unreachable!("not used in these checks"),
    }
}

fn kl_oracle(mu: &[f64], sigma: &DMatrix<f64>) -> f64 {
    let k = mu.len() as f64;
    let chol = sigma.clone().cholesky().expect("covariance is positive definite");
    let log_det: f64 = 2.0 * chol.l().diagonal().iter().map(|v| v.ln()).sum::<f64>();
    0.5 * (sigma.trace() - log_det + mu.iter().map(|m| m * m).sum::<f64>() - k)
}

/// Monte-Carlo ELBO with exact log densities, averaged over rows, and its
/// standard error from the within-datum sample variance.
fn mc_elbo(dec: &AffineDecoder, mus: &[Vec<f64>], sigma: &Matrix, x: &Matrix, fam: &EdfFamily, samples: usize, rng: &mut Rng) -> (f64, f64) {
    let w = to_na(&dec.w);
    let b = DVector::from_column_slice(&dec.b);
    let s = to_na(sigma);
    let l = s.clone().cholesky().expect("covariance is positive definite").l();
    let kappa = mus[0].len();
    let n = x.rows() as f64;
    let mut total = 0.0;
    let mut var_total = 0.0;
    let mut eps = DVector::zeros(kappa);
    for (i, mu) in mus.iter().enumerate() {
        let mu_v = DVector::from_column_slice(mu);
        let mut sum = 0.0;
        let mut sum_sq = 0.0;
        for _ in 0..samples {
            for e in eps.iter_mut() {
                *e = rng.standard_normal();
            }
            let theta = &w * (&mu_v + &l * &eps) + &b;
            let ll: f64 = (0..x.cols())
                .map(|j| log_density_oracle(fam.kind(), fam.dispersion(), x[(i, j)], theta[j]))
                .sum();
            sum += ll;
            sum_sq += ll * ll;
        }
        let m = sum / samples as f64;
        let v = (sum_sq / samples as f64 - m * m) * samples as f64 / (samples - 1) as f64;
        total += m - kl_oracle(mu, &s);
        var_total += v / samples as f64;
    }
    (total / n, var_total.sqrt() / n)
}

/// Random decoder and data drawn from it; `Bernoulli` data are sampled at
/// the decoder's probabilities.
fn random_instance(fam: &EdfFamily, d: usize, kappa: usize, n: usize, rng: &mut Rng) -> (AffineDecoder, Matrix) {
    let w = random_matrix(d, kappa, rng);
    let b: Vec<f64> = (0..d).map(|_| rng.standard_normal()).collect();
    let dec = AffineDecoder::new(w, b).unwrap();
    let mut x = Matrix::zeros(n, d);
    for i in 0..n {
        let z: Vec<f64> = (0..kappa).map(|_| rng.standard_normal()).collect();
        let theta = dec.theta(&z).unwrap();
        for j in 0..d {
            x[(i, j)] = match fam.kind() {
                FamilyKind::Gaussian => theta[j] + fam.dispersion().sqrt() * rng.standard_normal(),
                _ => rng.bernoulli(1.0 / (1.0 + (-theta[j]).exp())) as u8 as f64,
            };
        }
    }
    (dec, x)
}

fn gaussian_exactness(out: &mut Outcome) {
    let t = Instant::now();
    let fam = EdfFamily::gaussian(1.0).unwrap();
    let mut rng = Rng::new(101);
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let (dec, x) = random_instance(&fam, 10, 3, 100, &mut rng);
        let lhat = objective_hat(&dec, &x, &fam, 1.0).unwrap();
        let (mus, sigma) = optimal_variational(&dec, &x, &fam, 1.0).unwrap();
        let (elbo, se) = mc_elbo(&dec, &mus, &sigma, &x, &fam, 10_000, &mut rng);
        worst = worst.max((elbo - lhat).abs() / se);
    }
    let secs = t.elapsed().as_secs_f64();
    out.record(
        "gaussian exactness",
        worst <= 3.0 && secs < 60.0,
        format!("max |MC-ELBO - L_hat| = {worst:.2} SE over 20 instances ({secs:.1}s)"),
    );
}

fn bernoulli_lower_bound(out: &mut Outcome) {
    let t = Instant::now();
    let fam = EdfFamily::bernoulli();
    let mut rng = Rng::new(202);
    let mut worst: f64 = f64::INFINITY;
    let mut positive = 0;
    for _ in 0..20 {
        let (dec, x) = random_instance(&fam, 10, 3, 100, &mut rng);
        let lhat = objective_hat(&dec, &x, &fam, 1.0).unwrap();
        let (mus, sigma) = optimal_variational(&dec, &x, &fam, 1.0).unwrap();
        let (elbo, se) = mc_elbo(&dec, &mus, &sigma, &x, &fam, 10_000, &mut rng);
        worst = worst.min((elbo - lhat) / se);
        if elbo > lhat {
            positive += 1;
        }
    }
    let secs = t.elapsed().as_secs_f64();
    out.record(
        "bernoulli lower bound",
        worst >= -3.0 && positive >= 18 && secs < 60.0,
        format!("min (MC-ELBO - L_hat)/SE = {worst:.2}, positive gap in {positive}/20 ({secs:.1}s)"),
    );
}

fn ppca_recovery(out: &mut Outcome) {
    let (d, kappa, n) = (20, 2, 2000);
    let mut rng = Rng::new(303);
    let a = random_matrix(d, kappa, &mut rng).scale(2.0);
    let offset: Vec<f64> = (0..d).map(|_| rng.normal(1.0, 1.0)).collect();
    let mut x = Matrix::zeros(n, d);
    for i in 0..n {
        let z = [rng.standard_normal(), rng.standard_normal()];
        for j in 0..d {
            x[(i, j)] = offset[j] + a[(j, 0)] * z[0] + a[(j, 1)] * z[1] + 0.5 * rng.standard_normal();
        }
    }
    let sol = mle_fit(&x, &EdfFamily::gaussian(1.0).unwrap(), &MleOptions::new(1.0, kappa)).unwrap();

    let (vals, vecs) = sorted_eigen(covariance_oracle(&x));
    let top = vecs.columns(0, kappa).into_owned();
    let q = to_na(&sol.w_hat).svd(true, false).u.unwrap();
    let residual = &q - &top * (top.transpose() * &q);
    let sin_max = residual.singular_values().max();
    let angle = sin_max.min(1.0).asin();
    let sigma2_oracle = vals[kappa..].iter().sum::<f64>() / (d - kappa) as f64;
    let sigma_err = (sol.dispersion() - sigma2_oracle).abs();
    out.record(
        "ppca recovery",
        angle <= 1e-8 && sigma_err <= 1e-12,
        format!("principal angle {angle:.2e}, |sigma2_hat - oracle| = {sigma_err:.2e}"),
    );
}

/// Rows `c ± sqrt(N λ_k / 2) q_k` whose covariance (divisor `N`) is exactly
/// `Q diag(λ) Qᵀ`.
fn data_with_spectrum(spectrum: &[f64], rng: &mut Rng) -> Matrix {
    let d = spectrum.len();
    let q = random_orthogonal(d, rng);
    let n = 2 * d;
    let c: Vec<f64> = (0..d).map(|_| rng.standard_normal()).collect();
    Matrix::from_fn(n, d, |i, j| {
        let k = i / 2;
        let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
        c[j] + sign * (n as f64 * spectrum[k] / 2.0).sqrt() * q[(j, k)]
    })
}

fn auto_pruning(out: &mut Outcome) {
    let betas = [0.5, 1.0, 2.0, 5.0, 10.0, 20.0];
    let mut rng = Rng::new(404);
    let gaussian = EdfFamily::gaussian(1.0).unwrap();
    let spectrum = [30.0, 15.0, 7.0, 4.0, 1.6, 0.7, 0.3, 0.1];
    let synth = synthetic_bernoulli(2000, 60, 5).unwrap().train;
    let cases: Vec<(&str, Matrix, EdfFamily, usize)> = vec![
        ("gaussian", data_with_spectrum(&spectrum, &mut rng), gaussian, 8),
        ("bernoulli", synth, EdfFamily::bernoulli(), 8),
    ];
    let mut mismatches = Vec::new();
    let mut monotone = true;
    let mut near_ties = 0;
    for (label, x, fam, kappa) in &cases {
        let c = fam.constants();
        let y = Matrix::from_fn(x.rows(), x.cols(), |i, j| (x[(i, j)] - c.f1) / c.f2);
        let (vals, _) = sorted_eigen(covariance_oracle(&y));
        let mut prev: Option<Vec<f64>> = None;
        for &beta in &betas {
            let sol = mle_fit(x, fam, &MleOptions::new(beta, *kappa).with_fixed_dispersion(1.0)).unwrap();
            let cutoff = beta * fam.dispersion() / c.f2;
            near_ties += vals[..*kappa].iter().filter(|v| (**v - cutoff).abs() < 1e-9).count();
            let expected = vals[..*kappa].iter().filter(|&&v| v > cutoff).count();
            let act = activity_predict(&sol);
            let got = act.iter().filter(|&&v| v > 0.0).count();
            if got != expected || sol.active_count() != expected {
                mismatches.push(format!("{label} beta={beta}: {got} vs {expected}"));
            }
            if let Some(p) = &prev {
                monotone &= p.iter().zip(&act).all(|(a, b)| b <= a);
            }
            prev = Some(act);
        }
    }
    out.record(
        "auto-pruning threshold",
        mismatches.is_empty() && monotone && near_ties == 0,
        if mismatches.is_empty() {
            format!("counts match over {} betas x 2 spectra; activity non-increasing: {monotone}", betas.len())
        } else {
            format!("mismatches {mismatches:?}; monotone {monotone}")
        },
    );
}

fn mean_curve(histories: &[TrainHistory], batch: usize) -> (f64, f64) {
    let recs: Vec<_> = histories.iter().map(|h| h.at_batch(batch).expect("evaluated batch")).collect();
    let n = recs.len() as f64;
    let mean = recs.iter().map(|r| r.train.mean).sum::<f64>() / n;
    let se = recs.iter().map(|r| r.train.std_err.powi(2)).sum::<f64>().sqrt() / n;
    (mean, se)
}

fn mle_b_advantage(out: &mut Outcome) {
    let t = Instant::now();
    let fam = EdfFamily::bernoulli();
    let ds = synthetic_bernoulli(10_000, 200, 2024).unwrap();
    let sol = mle_fit(&ds.train, &fam, &MleOptions::new(1.0, 2)).unwrap();
    let lhat = objective_hat(&sol.decoder(), &ds.train, &fam, 1.0).unwrap();
    let opt = variational_optima(&sol);
    let mus: Vec<Vec<f64>> = ds.train.row_iter().map(|r| opt.mu(r).unwrap()).collect();
    let er = expected_remainder(&sol.decoder(), &mus, std::slice::from_ref(&opt.sigma_z), &fam).unwrap();
    let mut mle_runs = Vec::new();
    let mut bench_runs = Vec::new();
    let mut start_gaps = Vec::new();
    for seed in 1..=5 {
        let cfg = TrainConfig {
            total_batches: 2000,
            eval_every: 200,
            seed,
            ..TrainConfig::default()
        };
        for use_mle in [true, false] {
            let mut m = build_architecture(Architecture::Canonical, 200, 2, fam, 1.0, 0.1).unwrap();
            let mut rng = cfg.init_rng();
            if use_mle {
                init_mle_b(&mut m, &sol, &mut rng).unwrap();
            } else {
                init_bench(&mut m, &mut rng);
            }
            let h = train(&mut m, &ds.train, None, &cfg).unwrap();
            if use_mle {
                let r0 = h.at_batch(0).unwrap();
                start_gaps.push((r0.train.mean - lhat) / r0.train.std_err);
                mle_runs.push(h);
            } else {
                bench_runs.push(h);
            }
        }
    }
    let secs = t.elapsed().as_secs_f64();
    // diagnostic only: the same start with the log-variance weights zeroed,
    // which leaves the positive remainder as the only gap to L_hat
    let zeroed_gap = {
        let cfg = TrainConfig { seed: 1, ..TrainConfig::default() };
        let mut m = build_architecture(Architecture::Canonical, 200, 2, fam, 1.0, 0.1).unwrap();
        init_mle_b(&mut m, &sol, &mut cfg.init_rng()).unwrap();
        m.logvar_head.w = Matrix::zeros(2, m.logvar_head.w.cols());
        let e = evaluate(&m, &ds.train, &mut Rng::new(99), cfg.eval_mc).unwrap();
        (e.mean - lhat) / e.std_err
    };
    let worst_start = start_gaps.iter().fold(0.0_f64, |a, g| a.max(g.abs()));
    let (m0, se0) = mean_curve(&mle_runs, 0);
    out.record(
        "mle-b advantage (a) start at L_hat",
        worst_start <= 3.0,
        format!(
            "L_hat {lhat:.4}, E[R2] {er:.4}; MLE-B batch 0 mean {m0:.4} (SE {se0:.4}); worst seed |gap| {worst_start:.1} SE; \
             with zeroed log-variance weights the gap is {zeroed_gap:+.1} SE"
        ),
    );
    let (mb, _) = mean_curve(&mle_runs, 200);
    let (bb, _) = mean_curve(&bench_runs, 200);
    out.record(
        "mle-b advantage (b) ahead at batch 200",
        mb >= bb,
        format!("MLE-B {mb:.4} vs Bench {bb:.4}"),
    );
    let (me, mse) = mean_curve(&mle_runs, 2000);
    let (be, bse) = mean_curve(&bench_runs, 2000);
    out.record(
        "mle-b advantage (c) both end above L_hat - 3 SE",
        me >= lhat - 3.0 * mse && be >= lhat - 3.0 * bse && secs < 900.0,
        format!("end MLE-B {me:.4} (SE {mse:.4}), Bench {be:.4} (SE {bse:.4}), L_hat {lhat:.4} ({secs:.0}s for 10 runs)"),
    );
}

fn activity_vs_training(out: &mut Outcome) {
    let t = Instant::now();
    let fam = EdfFamily::bernoulli();
    let ds = synthetic_bernoulli(10_000, 200, 2024).unwrap();
    let mut ok = true;
    let mut lines = Vec::new();
    for beta in [1.0, 20.0] {
        let sol = mle_fit(&ds.train, &fam, &MleOptions::new(beta, 2)).unwrap();
        let analytical = analytical_activity(&sol);
        let expected = if beta == 1.0 { 2 } else { 0 };
        ok &= analytical.active_count == expected;
        for seed in 1..=3 {
            let cfg = TrainConfig {
                total_batches: 15_000,
                eval_every: 0,
                eval_mc: 1,
                seed,
                ..TrainConfig::default()
            };
            let mut m = build_architecture(Architecture::Canonical, 200, 2, fam, beta, 0.1).unwrap();
            init_bench(&mut m, &mut cfg.init_rng());
            train(&mut m, &ds.train, None, &cfg).unwrap();
            let empirical = empirical_activity(&m, &ds.train).unwrap();
            let dist = histogram_distance(&analytical.histogram, &empirical.histogram).unwrap();
            ok &= empirical.active_count == analytical.active_count;
            if beta == 20.0 {
                ok &= dist <= 0.1;
            }
            lines.push(format!(
                "beta {beta} seed {seed}: active {}/{} dist {dist:.2} values [{:.4}, {:.4}]",
                empirical.active_count, analytical.active_count, empirical.values[0], empirical.values[1]
            ));
        }
    }
    let secs = t.elapsed().as_secs_f64();
    out.record(
        "activity prediction vs training",
        ok && secs < 1200.0,
        format!("{} ({secs:.0}s)", lines.join("; ")),
    );
}

fn gradient_oracle(out: &mut Outcome) {
    let t = Instant::now();
    let cases = common::gradient_cases();
    let mut worst = (0.0, String::new());
    for case in &cases {
        let err = common::max_gradient_error(&case.model, &case.x, 1e-5);
        if err > worst.0 {
            worst = (err, case.label.clone());
        }
    }
    let secs = t.elapsed().as_secs_f64();
    out.record(
        "gradient oracle",
        worst.0 <= 1e-4 && secs < 60.0,
        format!("{} cases, worst relative error {:.2e} ({}) ({secs:.1}s)", cases.len(), worst.0, worst.1),
    );
}

fn random_histogram(kappa: usize, rng: &mut Rng) -> Histogram {
    let mut h = [0; HISTOGRAM_BINS];
    for _ in 0..kappa {
        // skew toward a few bins so equal and overlapping pairs occur
        h[rng.below(4).min(rng.below(HISTOGRAM_BINS))] += 1;
    }
    h
}

fn closed_form_identities(out: &mut Outcome) {
    let mut rng = Rng::new(505);
    let families = [
        EdfFamily::gaussian(1.0).unwrap(),
        EdfFamily::bernoulli(),
        EdfFamily::binomial(4).unwrap(),
        EdfFamily::poisson(),
    ];
    let mut sigma_err: f64 = 0.0;
    let mut rot_err: f64 = 0.0;
    let mut approx_err: f64 = 0.0;
    for fam in &families {
        for beta in [0.5, 1.0, 3.0] {
            let (d, kappa, n) = (12, 3, 60);
            let x = Matrix::from_fn(n, d, |_, j| match fam.kind() {
                FamilyKind::Gaussian => rng.normal(0.0, 1.0 + j as f64 / 4.0),
                FamilyKind::Bernoulli => rng.bernoulli(0.2 + j as f64 / 20.0) as u8 as f64,
                FamilyKind::Binomial => rng.below(5) as f64,
                FamilyKind::Poisson => rng.below(4 + j) as f64,
            });
            let opts = MleOptions::new(beta, kappa).with_rotation(random_orthogonal(kappa, &mut rng));
            let sol = mle_fit(&x, fam, &opts).unwrap();
            let fam_hat = sol.family;
            let dec = sol.decoder();
            let (mus, sigma) = optimal_variational(&dec, &x, &fam_hat, beta).unwrap();
            let opt = variational_optima(&sol);
            sigma_err = sigma_err.max(sigma.sub(&opt.sigma_z).unwrap().max_abs());
            for (xi, mu) in x.row_iter().zip(&mus) {
                let m = opt.mu(xi).unwrap();
                sigma_err = sigma_err.max(m.iter().zip(mu).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max));
            }

            let w = random_matrix(d, kappa, &mut rng);
            let b: Vec<f64> = (0..d).map(|_| rng.normal(0.0, 0.5)).collect();
            for dec in [dec.clone(), AffineDecoder::new(w, b).unwrap()] {
                let base = objective_hat(&dec, &x, &fam_hat, beta).unwrap();
                for _ in 0..20 {
                    let q = random_orthogonal(kappa, &mut rng);
                    let rotated = AffineDecoder::new(dec.w.matmul(&q).unwrap(), dec.b.clone()).unwrap();
                    let v = objective_hat(&rotated, &x, &fam_hat, beta).unwrap();
                    rot_err = rot_err.max((v - base).abs() / base.abs().max(1.0));
                }
                let (mus, sigma) = optimal_variational(&dec, &x, &fam_hat, beta).unwrap();
                let approx = approx_objective_general(&dec, &mus, std::slice::from_ref(&sigma), &x, &fam_hat, beta).unwrap();
                approx_err = approx_err.max((approx - base).abs() / base.abs().max(1.0));
            }
        }
    }
    out.record(
        "closed-form identity: optimal posterior at MLE",
        sigma_err <= 1e-10,
        format!("max abs difference {sigma_err:.2e}"),
    );
    out.record(
        "closed-form identity: rotation invariance",
        rot_err <= 1e-10,
        format!("max relative difference {rot_err:.2e}"),
    );
    out.record(
        "closed-form identity: general surrogate at optimum",
        approx_err <= 1e-10,
        format!("max relative difference {approx_err:.2e}"),
    );

    let mut violations = 0;
    for _ in 0..1000 {
        let kappa = 1 + rng.below(12);
        let a = random_histogram(kappa, &mut rng);
        let b = random_histogram(kappa, &mut rng);
        let c = random_histogram(kappa, &mut rng);
        let dab = histogram_distance(&a, &b).unwrap();
        let dba = histogram_distance(&b, &a).unwrap();
        let dbc = histogram_distance(&b, &c).unwrap();
        let dac = histogram_distance(&a, &c).unwrap();
        let daa = histogram_distance(&a, &a).unwrap();
        let ok = daa == 0.0
            && dab == dba
            && (0.0..=1.0).contains(&dab)
            && ((dab == 0.0) == (a == b))
            && dac <= dab + dbc + 1e-12;
        if !ok {
            violations += 1;
        }
    }
    out.record(
        "closed-form identity: histogram distance metric axioms",
        violations == 0,
        format!("{violations} violations over 1000 triples"),
    );
}

fn expected_remainder_mc(out: &mut Outcome) {
    let t = Instant::now();
    let mut rng = Rng::new(606);
    let mut worst: f64 = 0.0;
    for inst in 0..10 {
        let fam = if inst % 2 == 0 { EdfFamily::bernoulli() } else { EdfFamily::binomial(3).unwrap() };
        let (d, kappa) = (8, 3);
        let w = random_matrix(d, kappa, &mut rng).scale(0.7);
        let b: Vec<f64> = (0..d).map(|_| rng.normal(0.0, 0.5)).collect();
        let dec = AffineDecoder::new(w.clone(), b.clone()).unwrap();
        let mu: Vec<f64> = (0..kappa).map(|_| rng.normal(0.0, 0.5)).collect();
        let a = to_na(&random_matrix(kappa, kappa, &mut rng));
        let s = &a * a.transpose() / kappa as f64 + DMatrix::identity(kappa, kappa) * 0.1;
        let sigma = Matrix::from_fn(kappa, kappa, |i, j| s[(i, j)]);
        let got = expected_remainder(&dec, std::slice::from_ref(&mu), std::slice::from_ref(&sigma), &fam).unwrap();

        let l = s.cholesky().unwrap().l();
        let wn = to_na(&w);
        let mu_v = DVector::from_column_slice(&mu);
        let b_v = DVector::from_column_slice(&b);
        let trials = fam.trials() as f64;
        let samples = 1_000_000;
        let (mut sum, mut sum_sq) = (0.0, 0.0);
        let mut eps = DVector::zeros(kappa);
        for _ in 0..samples {
            for e in eps.iter_mut() {
                *e = rng.standard_normal();
            }
            let theta = &wn * (&mu_v + &l * &eps) + &b_v;
            let r = trials / 192.0 * theta.iter().map(|t| t.powi(4)).sum::<f64>();
            sum += r;
            sum_sq += r * r;
        }
        let mean = sum / samples as f64;
        let se = ((sum_sq / samples as f64 - mean * mean) / (samples - 1) as f64).sqrt();
        worst = worst.max((got - mean).abs() / se);
    }
    let secs = t.elapsed().as_secs_f64();
    out.record(
        "expected remainder vs monte carlo",
        worst <= 3.0,
        format!("max |closed form - MC| = {worst:.2} SE over 10 instances ({secs:.1}s)"),
    );
}

/// Not a primary criterion: needs MNIST IDX files in `MNIST_DIR`.
fn mnist_smoke() {
    let Ok(dir) = std::env::var("MNIST_DIR") else {
        println!("SKIP mnist smoke: MNIST_DIR not set");
        return;
    };
    let path = std::path::Path::new(&dir).join("train-images-idx3-ubyte");
    let x = match load_idx(&path) {
        Ok(x) => x.slice_rows(0, 5000),
        Err(e) => {
            println!("FAIL mnist smoke: cannot load {}: {e}", path.display());
            return;
        }
    };
    let ds = Dataset::split_first(&x, 5000, "mnist").unwrap();
    let fam = EdfFamily::bernoulli();
    let mut m = build_architecture(Architecture::Deep, ds.d(), 2, fam, 1.0, 0.1).unwrap();
    let cfg = TrainConfig {
        total_batches: 500,
        eval_every: 100,
        seed: 1,
        ..TrainConfig::default()
    };
    init_bench(&mut m, &mut cfg.init_rng());
    match train(&mut m, &ds.train, None, &cfg) {
        Ok(h) => {
            let v: Vec<f64> = h.records.iter().take(5).map(|r| r.train.mean).collect();
            let monotone = v.windows(2).all(|p| p[1] > p[0]);
            println!("{} mnist smoke: first eval points {v:.2?}", if monotone { "PASS" } else { "FAIL" });
        }
        Err(e) => println!("FAIL mnist smoke: {e}"),
    }
}

fn main() -> ExitCode {
    let mut out = Outcome { failed: 0 };
    gaussian_exactness(&mut out);
    bernoulli_lower_bound(&mut out);
    ppca_recovery(&mut out);
    auto_pruning(&mut out);
    gradient_oracle(&mut out);
    closed_form_identities(&mut out);
    expected_remainder_mc(&mut out);
    mle_b_advantage(&mut out);
    activity_vs_training(&mut out);
    mnist_smoke();
    println!("{} criteria failed", out.failed);
    if out.failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

#![allow(dead_code)]

use glmvae_core::edf::EdfFamily;
use glmvae_core::nn::{build_architecture, elbo_minibatch, init_bench, Activation, Architecture, VaeModel};
use glmvae_core::numerics::{Matrix, Rng};

/// Worst relative error between backprop gradients and central differences
/// of `−ELBO`, with the reparameterization noise frozen by reseeding.
pub fn max_gradient_error(model: &VaeModel, x: &Matrix, h: f64) -> f64 {
    let seed = 77;
    let mc = 2;
    let (_, grads) = elbo_minibatch(model, x, &mut Rng::new(seed), mc).unwrap();
    let loss = |m: &VaeModel| -elbo_minibatch(m, x, &mut Rng::new(seed), mc).unwrap().0;
    let mut worst: f64 = 0.0;
    let mut probe = model.clone();
    let n_layers = model.layers().len();
    for li in 0..n_layers {
        let (rows, cols) = model.layers()[li].w.shape();
        for k in 0..rows * cols + rows {
            let get = |m: &mut VaeModel, delta: f64| {
                let mut layers = m.layers_mut();
                let l = &mut layers[li];
                if k < rows * cols {
                    l.w.as_mut_slice()[k] += delta;
                } else {
                    l.b[k - rows * cols] += delta;
                }
            };
            get(&mut probe, h);
            let up = loss(&probe);
            get(&mut probe, -2.0 * h);
            let down = loss(&probe);
            get(&mut probe, h);
            let fd = (up - down) / (2.0 * h);
            let g = &grads.layers[li];
            let analytic = if k < rows * cols { g.w.as_slice()[k] } else { g.b[k - rows * cols] };
            let err = (fd - analytic).abs() / fd.abs().max(analytic.abs()).max(1e-4);
            worst = worst.max(err);
        }
    }
    worst
}

pub struct GradientCase {
    pub label: String,
    pub model: VaeModel,
    pub x: Matrix,
}

/// Small models covering every layer activation and every observation loss.
pub fn gradient_cases() -> Vec<GradientCase> {
    let mut rng = Rng::new(2024);
    let d = 6;
    let kappa = 2;
    let mut cases = Vec::new();
    let families: Vec<(EdfFamily, Vec<Activation>)> = vec![
        (EdfFamily::gaussian(0.6).unwrap(), vec![Activation::Linear]),
        (EdfFamily::bernoulli(), vec![Activation::Sigmoid, Activation::TanhCanonical]),
        (EdfFamily::binomial(3).unwrap(), vec![Activation::Sigmoid]),
        (EdfFamily::poisson(), vec![Activation::Exp]),
    ];
    let hidden = [Activation::Relu, Activation::Sigmoid, Activation::TanhCanonical, Activation::Linear];
    for (fam, outs) in families {
        for out in outs {
            for arch in [Architecture::Deep, Architecture::Canonical] {
                for (hi, &hidden_act) in hidden.iter().enumerate() {
                    if arch == Architecture::Canonical && hi > 1 {
                        continue;
                    }
                    let mut m = build_architecture(arch, d, kappa, fam, 0.8, 0.004)
                        .unwrap()
                        .with_output_activation(out)
                        .unwrap();
                    init_bench(&mut m, &mut rng);
                    for l in m.encoder_trunk.iter_mut() {
                        l.activation = hidden_act;
                    }
                    let n = m.decoder.len();
                    for l in m.decoder[..n - 1].iter_mut() {
                        l.activation = hidden_act;
                    }
                    // moderate weights keep Poisson outputs inside the exp clamp;
                    // positive biases keep pre-activations away from the ReLU kink
                    for l in m.layers_mut() {
                        l.w = l.w.scale(0.4);
                        for b in l.b.iter_mut() {
                            *b = 0.05 + 0.1 * rng.uniform();
                        }
                    }
                    let x = Matrix::from_fn(5, d, |_, _| match fam.kind() {
                        glmvae_core::FamilyKind::Gaussian => rng.normal(0.5, 1.0),
                        glmvae_core::FamilyKind::Bernoulli => rng.uniform(),
                        glmvae_core::FamilyKind::Binomial => rng.below(4) as f64,
                        glmvae_core::FamilyKind::Poisson => rng.below(5) as f64,
                    });
                    cases.push(GradientCase {
                        label: format!("{arch}/{fam}/{out}/hidden={hidden_act}"),
                        model: m,
                        x,
                    });
                }
            }
        }
    }
    cases
}

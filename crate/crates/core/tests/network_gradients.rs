use nnmass_core::datasets::{self, SyntheticKind};
use nnmass_core::network::{
    gaussian_probes, ldi_report, softmax_cross_entropy, train, InitScheme, LrSchedule, MlpModel, TrainConfig,
};
use nnmass_core::randmat::{singular_values, Matrix};
use nnmass_core::rng;
use nnmass_core::{Activation, ArchitectureSpec, CellSpec};
use rand::Rng;

fn random_batch(rows: usize, cols: usize, seed: u64) -> Matrix {
    let mut r = rng::rng_from_seed(seed);
    Matrix::new(rows, cols, (0..rows * cols).map(|_| r.random_range(-1.0..1.0)).collect()).unwrap()
}

fn loss_at(model: &MlpModel, x: &Matrix, y: &[usize]) -> f64 {
    let cache = model.forward(x).unwrap();
    softmax_cross_entropy(&cache.logits, y).unwrap().0
}

fn small_models() -> Vec<MlpModel> {
    let specs = [
        (vec![CellSpec::new(5, 3, 4)], Activation::Elu, 3, 4),
        (vec![CellSpec::new(8, 4, 9)], Activation::Linear, 2, 3),
        (vec![CellSpec::new(6, 6, 30)], Activation::Elu, 4, 2),
        (vec![CellSpec::new(4, 2, 1), CellSpec::new(5, 3, 5)], Activation::Elu, 3, 3),
        (vec![CellSpec::new(7, 5, 2)], Activation::Linear, 5, 5),
    ];
    specs
        .into_iter()
        .enumerate()
        .map(|(k, (cells, act, i, o))| {
            let spec = ArchitectureSpec::new(cells, act, i, o).unwrap();
            let mut m = MlpModel::build(&spec, 100 + k as u64, 200 + k as u64, InitScheme::for_activation(act)).unwrap();
            // Non-zero biases so their gradients are exercised too.
            let mut p = m.parameters();
            let mut r = rng::rng_from_seed(300 + k as u64);
            p.iter_mut().for_each(|v| *v += r.random_range(-0.1..0.1));
            m.set_parameters(&p).unwrap();
            m
        })
        .collect()
}

#[test]
fn backprop_matches_central_differences() {
    let h = 1e-5;
    for (k, mut model) in small_models().into_iter().enumerate() {
        let x = random_batch(3, model.spec().input_dim as usize, k as u64);
        let n_out = model.spec().output_dim as usize;
        let y: Vec<usize> = (0..3).map(|r| (r + k) % n_out).collect();
        let cache = model.forward(&x).unwrap();
        let grads = model.backward(&cache, &y).unwrap().flatten();
        let base = model.parameters();
        assert_eq!(grads.len(), base.len());
        for i in 0..base.len() {
            let mut p = base.clone();
            p[i] = base[i] + h;
            model.set_parameters(&p).unwrap();
            let plus = loss_at(&model, &x, &y);
            p[i] = base[i] - h;
            model.set_parameters(&p).unwrap();
            let minus = loss_at(&model, &x, &y);
            let fd = (plus - minus) / (2.0 * h);
            let err = (fd - grads[i]).abs() / fd.abs().max(grads[i].abs()).max(1e-6);
            assert!(err <= 1e-4, "model {k} parameter {i}: backprop {} vs fd {fd}", grads[i]);
        }
        model.set_parameters(&base).unwrap();
    }
}

// Rebuilds a layer's concatenated input from the cached activations.
fn concat_input(model: &MlpModel, x: &Matrix, g: usize) -> Vec<f64> {
    let cache = model.forward(x).unwrap();
    let layer = &model.layers()[g];
    let mut z: Vec<f64> = match layer.prev {
        Some(p) => cache.activations(p).to_vec(),
        None => x.row(0).to_vec(),
    };
    for &(l, u) in &layer.sources {
        z.push(cache.activations(l)[u]);
    }
    z
}

fn layer_output(model: &MlpModel, g: usize, z: &[f64]) -> Vec<f64> {
    let l = &model.layers()[g];
    let fan = l.fan_in();
    (0..l.width)
        .map(|a| {
            let pre: f64 = (0..fan).map(|b| l.weights[a * fan + b] * z[b]).sum::<f64>() + l.bias[a];
            model.activation().apply(pre)
        })
        .collect()
}

#[test]
fn concatenated_input_reproduces_forward_pass() {
    for model in small_models() {
        let x = random_batch(1, model.spec().input_dim as usize, 9);
        let cache = model.forward(&x).unwrap();
        for g in 0..model.layers().len() {
            let z = concat_input(&model, &x, g);
            assert_eq!(z.len(), model.layers()[g].fan_in());
            let out = layer_output(&model, g, &z);
            for (a, b) in out.iter().zip(cache.activations(g)) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }
}

#[test]
fn layer_jacobian_matches_finite_differences() {
    let h = 1e-6;
    for model in small_models() {
        let x = random_batch(1, model.spec().input_dim as usize, 4);
        for g in 1..model.layers().len() {
            let j = model.layerwise_jacobian(x.row(0), g).unwrap();
            let z = concat_input(&model, &x, g);
            assert_eq!(j.shape(), (model.layers()[g].width, z.len()));
            for b in 0..z.len() {
                let mut zp = z.clone();
                zp[b] += h;
                let mut zm = z.clone();
                zm[b] -= h;
                let (op, om) = (layer_output(&model, g, &zp), layer_output(&model, g, &zm));
                for a in 0..op.len() {
                    let fd = (op[a] - om[a]) / (2.0 * h);
                    assert!((fd - j.get(a, b)).abs() <= 1e-6 * fd.abs().max(1.0));
                }
            }
        }
    }
}

#[test]
fn jacobian_width_grows_by_the_sampled_sources() {
    for t in [0, 3, 8, 20, 100] {
        let cell = CellSpec::new(9, 4, t);
        let spec = ArchitectureSpec::single_cell(cell, Activation::Relu, 3, 2).unwrap();
        let model = MlpModel::build(&spec, 1, 2, InitScheme::for_activation(Activation::Relu)).unwrap();
        for i in 2..9 {
            let j = model.layerwise_jacobian(&[0.1, 0.2, 0.3], i).unwrap();
            assert_eq!(j.cols() as u64 - 4, cell.sources_at(i as u32));
        }
    }
}

#[test]
fn init_variance_follows_fan_in() {
    for d in [16, 24, 32] {
        for t in [0, 7, 14] {
            let spec = ArchitectureSpec::single_cell(CellSpec::new(d, 8, t), Activation::Elu, 2, 2).unwrap();
            let init = InitScheme::for_activation(Activation::Elu);
            let model = MlpModel::build(&spec, u64::from(d), u64::from(t), init).unwrap();
            // Pool the normalized squares over the layers of one model.
            let mut sum = 0.0;
            let mut n = 0usize;
            for l in model.layers() {
                let v = init.variance(l.fan_in());
                sum += l.weights.iter().map(|w| w * w / v).sum::<f64>();
                n += l.weights.len();
            }
            let ratio = sum / n as f64;
            assert!((ratio - 1.0).abs() < 0.1, "d={d} t={t}: {ratio}");
        }
    }
}

#[test]
fn zero_budget_linear_layer_matches_square_gaussian() {
    // J = W for a linear layer, so its spectrum is that of a w x w Gaussian.
    let spec = ArchitectureSpec::single_cell(CellSpec::new(6, 8, 0), Activation::Linear, 8, 2).unwrap();
    let mut means = Vec::new();
    let mut baseline = Vec::new();
    for s in 0..40u64 {
        let model = MlpModel::build(&spec, s, s + 1000, InitScheme::for_activation(Activation::Linear)).unwrap();
        let j = model.layerwise_jacobian(&[0.0; 8], 3).unwrap();
        means.push(singular_values(&j).unwrap().mean);
        let g = nnmass_core::randmat::sample_gaussian(8, 8, 1.0 / 8.0, s + 5000).unwrap();
        baseline.push(singular_values(&g).unwrap().mean);
    }
    let avg = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    assert!((avg(&means) - avg(&baseline)).abs() < 0.05, "{} vs {}", avg(&means), avg(&baseline));
}

#[test]
fn ldi_summary_is_comparable_across_depth_at_equal_budget() {
    let report = |d: u32| {
        let spec = ArchitectureSpec::single_cell(CellSpec::new(d, 8, 8), Activation::Relu, 2, 2).unwrap();
        let model = MlpModel::build(&spec, 3, 4, InitScheme::for_activation(Activation::Relu)).unwrap();
        ldi_report(&model, &gaussian_probes(2, 16, 5).unwrap()).unwrap()
    };
    let (a, b) = (report(16), report(32));
    assert_eq!(a.layers.len(), 15);
    let rel = (a.summary_mean_sv - b.summary_mean_sv).abs() / a.summary_mean_sv;
    assert!(rel < 0.1, "{} vs {}", a.summary_mean_sv, b.summary_mean_sv);
}

fn circle(n: usize, seed: u64) -> (datasets::Dataset, datasets::Dataset) {
    datasets::synthetic_split(SyntheticKind::Circle, 20, n, n / 4, seed).unwrap()
}

#[test]
fn zero_learning_rate_leaves_loss_constant() {
    let (tr, te) = circle(400, 1);
    let spec = ArchitectureSpec::single_cell(CellSpec::new(5, 4, 3), Activation::Relu, 2, 2).unwrap();
    let mut model = MlpModel::build(&spec, 1, 2, InitScheme::for_activation(Activation::Relu)).unwrap();
    let before = model.parameters();
    let cfg = TrainConfig {
        epochs: 3,
        batch_size: 32,
        lr0: 0.0,
        schedule: LrSchedule::Cosine,
        momentum: 0.0,
        seed: 7,
    };
    let trace = train(&mut model, &tr, &te, &cfg).unwrap();
    assert_eq!(model.parameters(), before);
    let l0 = trace.records[0].train_loss;
    assert!(trace.records.iter().all(|r| (r.train_loss - l0).abs() < 1e-12));
}

#[test]
fn training_is_deterministic_and_moves_weights() {
    let (tr, te) = circle(600, 2);
    let spec = ArchitectureSpec::single_cell(CellSpec::new(6, 4, 4), Activation::Elu, 2, 2).unwrap();
    let cfg = TrainConfig {
        epochs: 2,
        batch_size: 16,
        lr0: 0.05,
        schedule: LrSchedule::Cosine,
        momentum: 0.5,
        seed: 11,
    };
    let run = || {
        let mut m = MlpModel::build(&spec, 5, 6, InitScheme::for_activation(Activation::Elu)).unwrap();
        let t = train(&mut m, &tr, &te, &cfg).unwrap();
        (t, m.parameters())
    };
    let (a, pa) = run();
    let (b, pb) = run();
    assert_eq!(a, b);
    assert_eq!(pa, pb);
    let fresh = MlpModel::build(&spec, 5, 6, InitScheme::for_activation(Activation::Elu)).unwrap();
    assert_ne!(fresh.parameters(), pa);
    assert_eq!(a.records.len(), 2);
    assert_eq!(a.records[0].lr, 0.05);
}

#[test]
fn stale_cache_is_rejected() {
    let spec = ArchitectureSpec::single_cell(CellSpec::new(4, 3, 2), Activation::Relu, 2, 2).unwrap();
    let mut model = MlpModel::build(&spec, 1, 1, InitScheme::for_activation(Activation::Relu)).unwrap();
    let x = random_batch(2, 2, 0);
    let cache = model.forward(&x).unwrap();
    let other = model.clone();
    assert!(other.backward(&cache, &[0, 1]).is_err());
    model.layer_mut(1).bias[0] = 0.3;
    assert!(model.backward(&cache, &[0, 1]).is_err());
}

use chaoslift::classifier::{predict, TrainConfig};
use chaoslift::seed::child_rng;
use chaoslift::{
    adam_update, alignment_accuracy, batch_loss, cross_entropy, generate_dataset, loss_gradient,
    proportion_accuracy, softmax_probs, split_stratified, train, AdamConfig, AdamState, Batch,
    DatasetSpec, InitScheme, Matrix, PredictionBatch, Termination, WeightMatrix,
};
use proptest::prelude::*;
use rand::Rng;
use rand_distr::StandardNormal;

fn gaussian(rng: &mut impl Rng, rows: usize, cols: usize, scale: f64) -> Matrix {
    let data = (0..rows * cols).map(|_| scale * rng.sample::<f64, _>(StandardNormal)).collect();
    Matrix::from_vec(rows, cols, data).unwrap()
}

/// Scalar-loop cross-entropy plus penalty.
fn loss_oracle(w: &Matrix, inputs: &Matrix, labels: &[usize], l2: f64) -> f64 {
    let mut total = 0.0;
    for (n, &label) in labels.iter().enumerate() {
        let mut logits = Vec::new();
        for i in 0..w.rows() {
            let mut z = 0.0;
            for j in 0..w.cols() {
                z += w[(i, j)] * inputs[(n, j)];
            }
            logits.push(z);
        }
        let denom: f64 = logits.iter().map(|z| z.exp()).sum();
        total -= (logits[label].exp() / denom).ln();
    }
    let mut penalty = 0.0;
    for x in w.as_slice() {
        penalty += x * x;
    }
    total / labels.len() as f64 + l2 * penalty
}

#[test]
fn loss_matches_scalar_oracle() {
    let mut rng = child_rng(1, "test-loss", 0);
    for _ in 0..20 {
        let w = gaussian(&mut rng, 3, 5, 0.7);
        let inputs = gaussian(&mut rng, 5, 5, 1.0);
        let labels: Vec<usize> = (0..5).map(|_| rng.random_range(0..3)).collect();
        let batch = Batch::full(&inputs, &labels).unwrap();
        let wm = WeightMatrix::from_matrix(w.clone()).unwrap();
        let got = batch_loss(&wm, &batch, 1e-3).unwrap();
        assert!((got - loss_oracle(&w, &inputs, &labels, 1e-3)).abs() < 1e-12);
    }
}

#[test]
fn single_sample_gradient_by_hand() {
    let inputs = Matrix::from_rows(&[[1.0, 0.0]]).unwrap();
    let labels = [0];
    let batch = Batch::full(&inputs, &labels).unwrap();
    let g = loss_gradient(&WeightMatrix::zeros(2, 2), &batch, 0.0).unwrap();
    assert_eq!(g.as_slice(), &[-0.5, 0.0, 0.5, 0.0]);
}

#[test]
fn first_adam_step_moves_by_learning_rate() {
    let mut rng = child_rng(2, "test-adam", 0);
    let grad = gaussian(&mut rng, 4, 6, 1.0);
    let mut w = WeightMatrix::zeros(4, 6);
    let mut state = AdamState::new(4, 6);
    adam_update(&mut w, &grad, &mut state, 1e-3, &AdamConfig::default()).unwrap();
    for (x, g) in w.matrix().as_slice().iter().zip(grad.as_slice()) {
        assert!(x.abs() >= 0.9e-3 && x.abs() <= 1e-3 && x.signum() == -g.signum());
    }
    let run = || {
        let mut w = WeightMatrix::zeros(4, 6);
        let mut s = AdamState::new(4, 6);
        for _ in 0..5 {
            adam_update(&mut w, &grad, &mut s, 1e-3, &AdamConfig::default()).unwrap();
        }
        w
    };
    assert_eq!(run(), run());
}

fn noiseless(m: usize, seed: u64) -> (chaoslift::LabeledDataset, chaoslift::SplitDataset) {
    let ds = generate_dataset(DatasetSpec::new(m, 20, 0.0, seed)).unwrap();
    let split = split_stratified(&ds, seed).unwrap();
    (ds, split)
}

#[test]
fn first_epoch_lowers_loss_on_separable_data() {
    let (ds, split) = noiseless(2, 4);
    let cfg = TrainConfig::with_epochs(1, 9);
    let (train_x, train_y) = split.train_set(&ds);
    let w0 = WeightMatrix::init(2, 2, InitScheme::Gaussian, cfg.seed);
    let before = cross_entropy(&w0, &Batch::full(&train_x, &train_y).unwrap()).unwrap();
    let (_, trace) = train(&ds.samples, &ds.labels, &split, &cfg).unwrap();
    assert!(trace.epochs[0].train_loss < before);
}

#[test]
fn noiseless_baseline_over_200_epochs() {
    // 200 epochs of 2 batches at lr 1e-3 is too short to approach alignment 1; the argmax is
    // right throughout and confidence rises monotonically.
    let (ds, split) = noiseless(2, 5);
    let (_, trace) = train(&ds.samples, &ds.labels, &split, &TrainConfig::with_epochs(200, 1)).unwrap();
    assert_eq!(trace.len(), 200);
    assert!(trace.epochs.windows(2).all(|w| w[1].train_alignment > w[0].train_alignment));
    assert_eq!(trace.last().unwrap().train_proportion, 1.0);
}

#[test]
fn termination_reason_tracks_loss_floor() {
    let (ds, split) = noiseless(3, 6);
    let mut cfg = TrainConfig::with_epochs(3000, 2);
    cfg.l2_coeff = 0.0;
    cfg.loss_floor = 1e-2;
    cfg.learning_rate = 1e-2;
    let (_, trace) = train(&ds.samples, &ds.labels, &split, &cfg).unwrap();
    assert_eq!(trace.termination, Termination::LossFloor);
    assert!(trace.last().unwrap().train_loss < cfg.loss_floor);
    assert!(trace.epochs[..trace.len() - 1].iter().all(|r| r.train_loss >= cfg.loss_floor));

    cfg.max_epochs = 5;
    let (_, trace) = train(&ds.samples, &ds.labels, &split, &cfg).unwrap();
    assert_eq!(trace.termination, Termination::MaxEpochs);
    assert!(trace.last().unwrap().train_loss >= cfg.loss_floor);
}

#[test]
fn recorded_metrics_match_recomputation() {
    let ds = generate_dataset(DatasetSpec::new(4, 6, 1e-2, 3)).unwrap();
    let split = split_stratified(&ds, 3).unwrap();
    let (w, trace) = train(&ds.samples, &ds.labels, &split, &TrainConfig::with_epochs(30, 3)).unwrap();
    let (x, y) = split.test_set(&ds);
    let probs = predict(&w, &x).unwrap();
    let batch = PredictionBatch::new(probs, y.clone()).unwrap();
    let last = trace.last().unwrap();
    assert!((alignment_accuracy(&batch).unwrap() - last.test_alignment).abs() < 1e-12);
    assert_eq!(proportion_accuracy(&batch).unwrap(), last.test_proportion);
    let ce = cross_entropy(&w, &Batch::full(&x, &y).unwrap()).unwrap();
    assert!((ce - last.test_loss).abs() < 1e-12);
    let (w2, trace2) = train(&ds.samples, &ds.labels, &split, &TrainConfig::with_epochs(30, 3)).unwrap();
    assert_eq!(w, w2);
    assert_eq!(
        trace.epochs.iter().map(|r| r.train_loss).collect::<Vec<_>>(),
        trace2.epochs.iter().map(|r| r.train_loss).collect::<Vec<_>>()
    );
}

fn relative_fd_error(w: &WeightMatrix, inputs: &Matrix, labels: &[usize], l2: f64) -> f64 {
    let batch = Batch::full(inputs, labels).unwrap();
    let g = loss_gradient(w, &batch, l2).unwrap();
    let h = 1e-6;
    let (mut diff, mut scale) = (0.0_f64, 0.0_f64);
    for i in 0..w.m() {
        for j in 0..w.d() {
            let mut p = w.clone();
            p.matrix_mut()[(i, j)] += h;
            let mut q = w.clone();
            q.matrix_mut()[(i, j)] -= h;
            let fd = (batch_loss(&p, &batch, l2).unwrap() - batch_loss(&q, &batch, l2).unwrap()) / (2.0 * h);
            diff = diff.max((fd - g[(i, j)]).abs());
            scale = scale.max(fd.abs()).max(g[(i, j)].abs());
        }
    }
    diff / scale.max(1e-12)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn gradient_matches_finite_differences(m in 2usize..6, d in 2usize..12, n in 1usize..8, seed in any::<u64>()) {
        let mut rng = child_rng(seed, "prop-grad", 0);
        let w = WeightMatrix::from_matrix(gaussian(&mut rng, m, d, 0.5)).unwrap();
        let inputs = gaussian(&mut rng, n, d, 1.0);
        let labels: Vec<usize> = (0..n).map(|_| rng.random_range(0..m)).collect();
        prop_assert!(relative_fd_error(&w, &inputs, &labels, 1e-3) < 1e-6);
    }

    #[test]
    fn softmax_is_on_the_simplex(m in 2usize..8, d in 1usize..8, scale in 0.0f64..200.0, seed in any::<u64>()) {
        let mut rng = child_rng(seed, "prop-softmax", 0);
        let w = WeightMatrix::from_matrix(gaussian(&mut rng, m, d, scale)).unwrap();
        let v: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        let p = softmax_probs(&w, &v).unwrap();
        prop_assert!(p.iter().all(|&x| x >= 0.0 && x.is_finite()));
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn loss_is_invariant_to_a_common_logit_shift(m in 2usize..6, d in 1usize..6, seed in any::<u64>()) {
        // Adding the same vector u to every row of W shifts every logit of v by u.v.
        let mut rng = child_rng(seed, "prop-shift", 0);
        let w = gaussian(&mut rng, m, d, 1.0);
        let u: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        let mut shifted = w.clone();
        for i in 0..m {
            for j in 0..d {
                shifted[(i, j)] += u[j];
            }
        }
        let inputs = gaussian(&mut rng, 4, d, 1.0);
        let labels: Vec<usize> = (0..4).map(|_| rng.random_range(0..m)).collect();
        let batch = Batch::full(&inputs, &labels).unwrap();
        let a = batch_loss(&WeightMatrix::from_matrix(w).unwrap(), &batch, 0.0).unwrap();
        let b = batch_loss(&WeightMatrix::from_matrix(shifted).unwrap(), &batch, 0.0).unwrap();
        prop_assert!((a - b).abs() <= 1e-10 * a.max(1.0));
    }

    #[test]
    fn metrics_are_permutation_invariant_means(rows in prop::collection::vec(prop::collection::vec(0.01f64..1.0, 3), 2..20), seed in any::<u64>()) {
        let mut rng = child_rng(seed, "prop-metrics", 0);
        let n = rows.len() - rows.len() % 2;
        let normalized: Vec<Vec<f64>> = rows[..n].iter().map(|r| {
            let s: f64 = r.iter().sum();
            r.iter().map(|x| x / s).collect()
        }).collect();
        let labels: Vec<usize> = (0..n).map(|_| rng.random_range(0..3)).collect();
        let build = |idx: &[usize]| {
            let data: Vec<f64> = idx.iter().flat_map(|&i| normalized[i].clone()).collect();
            PredictionBatch::new(Matrix::from_vec(idx.len(), 3, data).unwrap(), idx.iter().map(|&i| labels[i]).collect()).unwrap()
        };
        let all: Vec<usize> = (0..n).collect();
        let mut perm = all.clone();
        perm.reverse();
        perm.rotate_left(n / 3);
        let whole = build(&all);
        let permuted = build(&perm);
        prop_assert!((alignment_accuracy(&whole).unwrap() - alignment_accuracy(&permuted).unwrap()).abs() < 1e-12);
        prop_assert_eq!(proportion_accuracy(&whole).unwrap(), proportion_accuracy(&permuted).unwrap());
        let (a, b) = (build(&all[..n / 2]), build(&all[n / 2..]));
        let mean_align = 0.5 * (alignment_accuracy(&a).unwrap() + alignment_accuracy(&b).unwrap());
        let mean_prop = 0.5 * (proportion_accuracy(&a).unwrap() + proportion_accuracy(&b).unwrap());
        prop_assert!((alignment_accuracy(&whole).unwrap() - mean_align).abs() < 1e-12);
        prop_assert!((proportion_accuracy(&whole).unwrap() - mean_prop).abs() < 1e-12);
    }
}

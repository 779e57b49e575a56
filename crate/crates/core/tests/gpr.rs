use faer::Mat;
use gppopf::gpr::{
    fit, kernel, log_marginal_likelihood, FitOptions, GpError, GpModel, Hyperparameters, SEARCH_BOX, SIGMA_N_FLOOR,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn hp(l: f64, sigma_f: f64, sigma_n: f64) -> Hyperparameters {
    Hyperparameters { l, sigma_f, sigma_n }
}

fn random_points(rng: &mut ChaCha8Rng, n: usize, d: usize) -> Vec<Vec<f64>> {
    (0..n)
        .map(|_| (0..d).map(|_| rng.random_range(-1.0..1.0)).collect())
        .collect()
}

fn smooth(x: &[f64]) -> f64 {
    x.iter()
        .enumerate()
        .map(|(k, v)| (v * (k as f64 + 1.0)).sin())
        .sum::<f64>()
        + 0.3 * x[0] * x[0]
}

#[test]
fn kernel_examples() {
    let h = hp(1.0, 1.0, 0.0);
    assert!((kernel(&[0.0], &[1.0], &h) - (-0.5f64).exp()).abs() < 1e-15);
    assert!((kernel(&[0.0], &[1.0], &h) - 0.60653).abs() < 1e-5);
    let h = hp(0.3, 2.5, 0.1);
    assert_eq!(kernel(&[0.4, -1.0], &[0.4, -1.0], &h), 2.5 * 2.5);
    let h = hp(1e6, 1.7, 0.0);
    let k = kernel(&[0.0, 0.0], &[0.6, 0.8], &h);
    assert!((k - 1.7 * 1.7).abs() / (1.7 * 1.7) < 1e-10);
}

#[test]
fn lml_single_point() {
    let (v, _) = log_marginal_likelihood(&[vec![0.0]], &[0.0], &hp(1.0, 1.0, 0.0)).unwrap();
    assert!((v + 0.918_938_533_204_672_7).abs() < 1e-9);
}

fn fd_gradient_check(seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = random_points(&mut rng, 5, 2);
    let y: Vec<f64> = (0..5).map(|_| rng.random_range(-2.0..2.0)).collect();
    let t = [
        rng.random_range(-1.0f64..1.0),
        rng.random_range(-1.0f64..1.0),
        rng.random_range(-3.0f64..-0.5),
    ];
    let at = |t: &[f64; 3]| hp(t[0].exp(), t[1].exp(), t[2].exp());
    let (_, g) = log_marginal_likelihood(&x, &y, &at(&t)).unwrap();
    let h = 1e-5;
    for k in 0..3 {
        let (mut tp, mut tm) = (t, t);
        tp[k] += h;
        tm[k] -= h;
        let fp = log_marginal_likelihood(&x, &y, &at(&tp)).unwrap().0;
        let fm = log_marginal_likelihood(&x, &y, &at(&tm)).unwrap().0;
        let fd = (fp - fm) / (2.0 * h);
        let rel = (g[k] - fd).abs() / g[k].abs().max(fd.abs()).max(1e-6);
        assert!(
            rel <= 1e-5,
            "seed {seed}, component {k}: analytic {} vs fd {fd} (rel {rel:e})",
            g[k]
        );
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(50))]

    #[test]
    fn lml_gradient_matches_finite_differences(seed in any::<u64>()) {
        fd_gradient_check(seed);
    }

    #[test]
    fn predictive_variance_nonnegative(seed in any::<u64>(), l in 0.05f64..5.0, sf in 0.1f64..5.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = random_points(&mut rng, 25, 3);
        let y: Vec<f64> = x.iter().map(|r| smooth(r)).collect();
        let m = GpModel::with_hyperparameters(&x, &y, hp(l, sf, SIGMA_N_FLOOR)).unwrap();
        let mut tests = random_points(&mut rng, 40, 3);
        tests.extend(x.iter().cloned());
        for p in m.predict_batch(&tests).unwrap() {
            prop_assert!(p.variance >= 0.0);
        }
    }

    #[test]
    fn translation_invariance(seed in any::<u64>(), shift in -50.0f64..50.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = random_points(&mut rng, 15, 2);
        let y: Vec<f64> = x.iter().map(|r| smooth(r)).collect();
        let moved: Vec<Vec<f64>> = x.iter().map(|r| r.iter().map(|v| v + shift).collect()).collect();
        let a = GpModel::with_hyperparameters(&x, &y, hp(0.8, 1.2, 1e-3)).unwrap();
        let b = GpModel::with_hyperparameters(&moved, &y, hp(0.8, 1.2, 1e-3)).unwrap();
        let tests = random_points(&mut rng, 10, 2);
        let tests_moved: Vec<Vec<f64>> = tests.iter().map(|r| r.iter().map(|v| v + shift).collect()).collect();
        for (p, q) in a.predict_batch(&tests).unwrap().iter().zip(b.predict_batch(&tests_moved).unwrap()) {
            prop_assert!((p.mean - q.mean).abs() <= 1e-10 * (1.0 + p.mean.abs()));
            prop_assert!((p.variance - q.variance).abs() <= 1e-10);
        }
    }
}

#[test]
fn noiseless_interpolation() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let x = random_points(&mut rng, 30, 2);
    let y: Vec<f64> = x.iter().map(|r| 10.0 * smooth(r) + 40.0).collect();
    let range = y.iter().cloned().fold(f64::MIN, f64::max) - y.iter().cloned().fold(f64::MAX, f64::min);
    let m = GpModel::with_hyperparameters(&x, &y, hp(1.0, 1.0, SIGMA_N_FLOOR)).unwrap();
    let sf2 = (m.hp.sigma_f * m.y_scale).powi(2);
    for (p, t) in m.predict_batch(&x).unwrap().iter().zip(&y) {
        assert!((p.mean - t).abs() <= 1e-6 * range, "{} vs {t}", p.mean);
        assert!(p.variance <= 1e-6 * sf2);
    }
}

#[test]
fn far_points_revert_to_prior() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let x = random_points(&mut rng, 20, 2);
    let y: Vec<f64> = x.iter().map(|r| 5.0 * smooth(r) - 3.0).collect();
    let m = GpModel::with_hyperparameters(&x, &y, hp(0.5, 1.3, 1e-3)).unwrap();
    let p = m.predict(&[1e3, -1e3]).unwrap();
    let prior = (m.hp.sigma_f * m.y_scale).powi(2);
    assert!((p.mean - m.y_mean).abs() <= 1e-9 * m.y_scale);
    assert!((p.variance - prior).abs() / prior < 0.01);
}

#[test]
fn two_point_closed_form() {
    let x = vec![vec![0.0], vec![1.0]];
    let y = [1.0, 3.0];
    let h = hp(0.7, 1.3, 0.05);
    let m = GpModel::with_hyperparameters(&x, &y, h).unwrap();

    // Standardized coordinates: mean 0.5 and sample sd 1/√2 for x; 2 and √2 for y.
    let sx = std::f64::consts::FRAC_1_SQRT_2;
    let z = [-0.5 / sx, 0.5 / sx];
    let (ym, sy) = (2.0, std::f64::consts::SQRT_2);
    let t = [(1.0 - ym) / sy, (3.0 - ym) / sy];
    let sf2 = h.sigma_f * h.sigma_f;
    let k = |a: f64, b: f64| sf2 * (-(a - b) * (a - b) / (2.0 * h.l * h.l)).exp();
    let a = sf2 + h.sigma_n * h.sigma_n + m.jitter;
    let b = k(z[0], z[1]);
    let det = a * a - b * b;
    let inv = [[a / det, -b / det], [-b / det, a / det]];
    let alpha = [inv[0][0] * t[0] + inv[0][1] * t[1], inv[1][0] * t[0] + inv[1][1] * t[1]];

    let xs = 0.3;
    let zs = (xs - 0.5) / sx;
    let ks = [k(zs, z[0]), k(zs, z[1])];
    let mean = ym + sy * (ks[0] * alpha[0] + ks[1] * alpha[1]);
    let quad = ks[0] * (inv[0][0] * ks[0] + inv[0][1] * ks[1]) + ks[1] * (inv[1][0] * ks[0] + inv[1][1] * ks[1]);
    let var = sy * sy * (sf2 - quad);

    let p = m.predict(&[xs]).unwrap();
    assert!((p.mean - mean).abs() < 1e-10, "{} vs {mean}", p.mean);
    assert!((p.variance - var).abs() < 1e-10, "{} vs {var}", p.variance);
}

#[test]
fn cholesky_and_alpha_invariants() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let x = random_points(&mut rng, 40, 3);
    let y: Vec<f64> = x.iter().map(|r| smooth(r)).collect();
    let m = fit(&x, &y, &FitOptions::default()).unwrap();
    let n = m.n_train;
    let d = m.dim;
    let s = m.hp.sigma_n * m.hp.sigma_n + m.jitter;
    let a = Mat::<f64>::from_fn(n, n, |i, j| {
        kernel(&m.x_train[i * d..(i + 1) * d], &m.x_train[j * d..(j + 1) * d], &m.hp) + if i == j { s } else { 0.0 }
    });
    let rec = &m.chol * m.chol.transpose();
    assert!((&rec - &a).norm_l2() / a.norm_l2() <= 1e-10);
    let mut res = 0.0f64;
    for i in 0..n {
        let r: f64 = (0..n).map(|j| a[(i, j)] * m.alpha[j]).sum::<f64>() - m.y_train[i];
        res += r * r;
    }
    let ynorm = m.y_train.iter().map(|v| v * v).sum::<f64>().sqrt();
    assert!(res.sqrt() <= 1e-8 * ynorm, "residual {}", res.sqrt());
}

#[test]
fn constant_targets_give_constant_model() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let x = random_points(&mut rng, 12, 2);
    let y = vec![7.25; 12];
    let m = fit(&x, &y, &FitOptions::default()).unwrap();
    assert!(m.constant);
    for p in m.predict_batch(&random_points(&mut rng, 20, 2)).unwrap() {
        assert_eq!(p.mean, 7.25);
        assert!(p.variance >= 0.0 && p.variance < 1e-10);
    }
}

#[test]
fn conflicting_duplicates_need_noise() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut x = random_points(&mut rng, 15, 1);
    let mut y: Vec<f64> = x.iter().map(|r| r[0].sin()).collect();
    x.push(x[0].clone());
    y.push(y[0] + 1.0);
    let m = fit(&x, &y, &FitOptions::default()).unwrap();
    assert!(m.hp.sigma_n > 0.05, "σn = {}", m.hp.sigma_n);
}

#[test]
fn recovers_known_length_scale() {
    let (n, truth) = (200, hp(0.5, 1.0, 0.01));
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let x: Vec<Vec<f64>> = (0..n).map(|_| vec![rng.random_range(0.0..5.0)]).collect();
    let k = Mat::<f64>::from_fn(n, n, |i, j| {
        kernel(&x[i], &x[j], &truth) + if i == j { 1e-10 } else { 0.0 }
    });
    let l = k.llt(faer::Side::Lower).unwrap();
    let w: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
    let y: Vec<f64> = (0..n)
        .map(|i| {
            (0..=i).map(|j| l.L()[(i, j)] * w[j]).sum::<f64>() + truth.sigma_n * rng.sample::<f64, _>(StandardNormal)
        })
        .collect();
    let m = fit(&x, &y, &FitOptions::default()).unwrap();
    // Fitted length lives on the standardized input scale.
    let l_raw = m.hp.l * m.x_scaler.scale[0];
    assert!((0.25..=1.0).contains(&l_raw), "recovered l = {l_raw}");
}

#[test]
fn output_scaling_moves_only_sigma_f() {
    // Raw-scale likelihood: scaling y by c and (σf, σn) by c subtracts N·ln c
    // and leaves l fixed, so the optimum maps to (l, c·σf, c·σn).
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let x = random_points(&mut rng, 10, 2);
    let y: Vec<f64> = x.iter().map(|r| smooth(r)).collect();
    let c = 37.0;
    let cy: Vec<f64> = y.iter().map(|v| c * v).collect();
    let h = hp(0.9, 1.4, 0.05);
    let (a, ga) = log_marginal_likelihood(&x, &y, &h).unwrap();
    let (b, gb) = log_marginal_likelihood(&x, &cy, &hp(h.l, c * h.sigma_f, c * h.sigma_n)).unwrap();
    // The fixed 1e-10 diagonal jitter does not scale with c, hence 1e-6.
    assert!((b - (a - 10.0 * c.ln())).abs() < 1e-6, "{b} vs {}", a - 10.0 * c.ln());
    for k in 0..3 {
        assert!((ga[k] - gb[k]).abs() < 1e-6, "{ga:?} vs {gb:?}");
    }

    let opts = FitOptions::default();
    let m1 = fit(&x, &y, &opts).unwrap();
    let m2 = fit(&x, &cy, &opts).unwrap();
    assert!((m1.hp.l - m2.hp.l).abs() <= 1e-6 * m1.hp.l);
    assert!((m1.hp.sigma_f - m2.hp.sigma_f).abs() <= 1e-6 * m1.hp.sigma_f);
    let raw = |m: &GpModel| m.hp.sigma_f * m.y_scale;
    assert!((raw(&m2) / raw(&m1) - c).abs() <= 1e-6 * c);
}

#[test]
fn fitted_hyperparameters_stay_in_search_box() {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let x = random_points(&mut rng, 60, 4);
    let y: Vec<f64> = x.iter().map(|r| smooth(r)).collect();
    let m = fit(&x, &y, &FitOptions::default()).unwrap();
    for (v, (lo, hi)) in [m.hp.l, m.hp.sigma_f, m.hp.sigma_n].iter().zip(SEARCH_BOX) {
        assert!(*v >= lo && *v <= hi);
    }
}

#[test]
fn fit_is_deterministic_for_a_seed() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let x = random_points(&mut rng, 30, 3);
    let y: Vec<f64> = x.iter().map(|r| smooth(r)).collect();
    let opts = FitOptions {
        seed: 42,
        ..Default::default()
    };
    assert_eq!(fit(&x, &y, &opts).unwrap(), fit(&x, &y, &opts).unwrap());
}

#[test]
fn batch_matches_pointwise_bitwise() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let x = random_points(&mut rng, 37, 3);
    let y: Vec<f64> = x.iter().map(|r| smooth(r)).collect();
    let m = fit(&x, &y, &FitOptions::default()).unwrap();
    let mut tests = x.clone();
    tests.extend(random_points(&mut rng, 13, 3));
    let batch = m.predict_batch(&tests).unwrap();
    for (t, b) in tests.iter().zip(&batch) {
        let p = m.predict(t).unwrap();
        assert_eq!(p.mean.to_bits(), b.mean.to_bits());
        assert_eq!(p.variance.to_bits(), b.variance.to_bits());
    }
    let one = m.predict_batch(&tests[5..6]).unwrap();
    assert_eq!(one[0], m.predict(&tests[5]).unwrap());
}

#[test]
fn training_row_order_does_not_matter() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let x = random_points(&mut rng, 25, 2);
    let y: Vec<f64> = x.iter().map(|r| smooth(r)).collect();
    let mut idx: Vec<usize> = (0..25).collect();
    idx.reverse();
    idx.swap(3, 17);
    let xs: Vec<Vec<f64>> = idx.iter().map(|&i| x[i].clone()).collect();
    let ys: Vec<f64> = idx.iter().map(|&i| y[i]).collect();
    let h = hp(0.9, 1.1, 1e-3);
    let a = GpModel::with_hyperparameters(&x, &y, h).unwrap();
    let b = GpModel::with_hyperparameters(&xs, &ys, h).unwrap();
    let tests = random_points(&mut rng, 10, 2);
    for (p, q) in a
        .predict_batch(&tests)
        .unwrap()
        .iter()
        .zip(b.predict_batch(&tests).unwrap())
    {
        assert!((p.mean - q.mean).abs() < 1e-8);
        assert!((p.variance - q.variance).abs() < 1e-8);
    }
}

#[test]
fn dimension_mismatch_rejected() {
    let m = GpModel::with_hyperparameters(&[vec![0.0, 1.0], vec![1.0, 0.0]], &[0.0, 1.0], hp(1.0, 1.0, 0.1)).unwrap();
    assert!(matches!(
        m.predict(&[0.0]),
        Err(GpError::Dimension { expected: 2, got: 1 })
    ));
    assert!(fit(&[vec![0.0]], &[1.0], &FitOptions::default()).is_err());
    assert!(matches!(
        fit(&[vec![0.0], vec![f64::NAN]], &[1.0, 2.0], &FitOptions::default()),
        Err(GpError::NonFinite)
    ));
}

#[test]
fn json_round_trip_is_exact() {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let x = random_points(&mut rng, 30, 3);
    let y: Vec<f64> = x.iter().map(|r| 100.0 * smooth(r)).collect();
    let m = fit(&x, &y, &FitOptions::default()).unwrap();
    let text = m.to_json();
    let back = GpModel::from_json(&text).unwrap();
    assert_eq!(back, m);
    let tests = random_points(&mut rng, 9, 3);
    assert_eq!(m.predict_batch(&tests).unwrap(), back.predict_batch(&tests).unwrap());
    assert_eq!(back.to_json(), text);
}

#[test]
fn json_version_mismatch_rejected() {
    let m = GpModel::with_hyperparameters(&[vec![0.0], vec![1.0]], &[0.0, 1.0], hp(1.0, 1.0, 0.1)).unwrap();
    let text = m.to_json().replace("\"version\": 1", "\"version\": 2");
    assert!(matches!(GpModel::from_json(&text), Err(GpError::Format(_))));
    assert!(GpModel::from_json("{}").is_err());
}

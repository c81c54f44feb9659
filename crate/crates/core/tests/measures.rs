//! Statistical checks of the measure constructors and the MC pricer.

use rand_chacha::ChaCha8Rng;
use rand_core::SeedableRng;
use superhedge_core::*;

fn model() -> (MarketModel, OrderedModel) {
    let model =
        MarketModel::new(2, 1.0, vec![1.0, 1.0, 1.0], vec![0.5, 0.8], vec![2.0, 1.2]).unwrap();
    let ordered = OrderedModel::new(&model).unwrap();
    (model, ordered)
}

/// Empirical mean within 4 standard errors of the analytic mean `b`.
fn assert_empirical_mean(measure: &OneStepMeasure, b: &[f64], draws: usize, seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dim = b.len();
    let mut sum = vec![0.0; dim];
    let mut sumsq = vec![0.0; dim];
    let mut point = vec![0.0; dim];
    for _ in 0..draws {
        measure.sample_into(&mut rng, &mut point);
        for i in 0..dim {
            sum[i] += point[i];
            sumsq[i] += point[i] * point[i];
        }
    }
    let n = draws as f64;
    for i in 0..dim {
        let mean = sum[i] / n;
        let var = (sumsq[i] / n - mean * mean) * n / (n - 1.0);
        let se = (var / n).sqrt();
        assert!(
            (mean - b[i]).abs() <= 4.0 * se,
            "coordinate {i}: mean {mean} vs {} (se {se})",
            b[i]
        );
    }
}

#[test]
fn empirical_means_match_b() {
    let (_, o) = model();
    let b = o.b_user();
    let extremal = make_extremal_measure(&o, 1e-3, 1e-3).unwrap();
    assert_empirical_mean(&extremal, &b, 1_000_000, 1);
    let jensen = make_jensen_measure(&b, DEFAULT_BETA, 1e-3).unwrap();
    assert_empirical_mean(&jensen, &b, 1_000_000, 2);
    let spec = AtomSpec {
        center: b.clone(),
        weight: 0.99,
    };
    let single = make_product_measure(&b, 0.01, &[spec], 0.2).unwrap();
    assert_empirical_mean(&single, &b, 1_000_000, 3);
    let uniform = make_product_measure(&[0.5, 0.5], 1.0, &[], 0.1).unwrap();
    assert_empirical_mean(&uniform, &[0.5, 0.5], 1_000_000, 4);
}

#[test]
fn component_histogram_matches_weights() {
    let (_, o) = model();
    let measure = make_extremal_measure(&o, 0.05, 0.01).unwrap();
    let draws = 100_000usize;
    let mut counts = vec![0usize; measure.atoms().len() + 1];
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut point = vec![0.0; 2];
    for _ in 0..draws {
        match measure.sample_into(&mut rng, &mut point) {
            None => counts[0] += 1,
            Some(i) => counts[i + 1] += 1,
        }
    }
    let probs: Vec<f64> = std::iter::once(measure.beta())
        .chain(measure.atoms().iter().map(|a| a.weight))
        .collect();
    let mut chi2 = 0.0;
    for (c, p) in counts.iter().zip(&probs) {
        let expected = p * draws as f64;
        let sd = (draws as f64 * p * (1.0 - p)).sqrt();
        assert!(
            (*c as f64 - expected).abs() <= 4.0 * sd,
            "{c} vs {expected}"
        );
        chi2 += (*c as f64 - expected).powi(2) / expected;
    }
    // df = 3; P(chi2 > 21.1) ~ 1e-4
    assert!(chi2 < 21.1, "chi2 = {chi2}");
}

#[test]
fn extremal_measure_prices_near_upper_end() {
    let (model, o) = model();
    let option = BasketOption::new(vec![0.0, 1.0, 1.0], 2.0).unwrap();
    let s0 = MarketState::initial(&model);
    let high = gamma_max(&o, &option, &s0);
    let low = gamma_min(&o, &option, &s0);
    let scale = option.scale(&model);
    let cfg = McConfig {
        samples: 100_000,
        seed: 17,
        ..McConfig::default()
    };
    let mut gaps = Vec::new();
    for eps in [1e-1, 1e-2, 1e-3] {
        let step = make_extremal_measure(&o, eps * 0.1, eps).unwrap();
        let est = mc_price(&o, &option, &PathMeasure::homogeneous(step, 2), &cfg).unwrap();
        assert!(est.estimate > low - 4.0 * est.std_error);
        assert!(est.estimate < high + 4.0 * est.std_error);
        gaps.push(((est.estimate - high).abs(), est.std_error));
    }
    let (last_gap, last_se) = gaps[2];
    assert!(last_gap <= (4.0 * last_se).max(1e-2 * scale));
    // shrinking (beta, delta) does not move the estimate away beyond noise
    assert!(gaps[2].0 <= gaps[0].0 + 4.0 * (gaps[0].1 + gaps[2].1));
}

#[test]
fn check_mean_reports_every_constructor() {
    let (_, o) = model();
    let b = o.b_user();
    assert!(check_mean_b(&make_extremal_measure(&o, 1e-3, 1e-3).unwrap(), &b).passed);
    assert!(check_mean_b(&make_jensen_measure(&b, 1e-3, 1e-3).unwrap(), &b).passed);
    let wrong = check_mean_b(&make_jensen_measure(&b, 1e-3, 1e-3).unwrap(), &[0.5, 0.5]);
    assert!(!wrong.passed);
}

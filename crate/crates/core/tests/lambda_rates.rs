use lambdacoal::lambda_rates::{
    block_size_pmf, bound_log_rate, log_rate, mean_block_size, total_log_rate, Density,
};
use lambdacoal::{LambdaMeasure, RateTable};
use proptest::prelude::*;
use statrs::function::beta::ln_beta;
use statrs::function::factorial::ln_binomial;

const ALPHAS: [f64; 5] = [0.3, 0.7, 1.0, 1.3, 1.7];

/// B(k-α, b-k+α) / B(2-α, α) from an independent log-Beta.
fn beta_oracle(b: usize, k: usize, alpha: f64) -> f64 {
    ln_beta(k as f64 - alpha, (b - k) as f64 + alpha) - ln_beta(2.0 - alpha, alpha)
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs())
}

#[test]
fn bolthausen_sznitman_factorial_rate() {
    let m = LambdaMeasure::bolthausen_sznitman();
    assert!((log_rate(3, 2, &m).unwrap() - 0.5f64.ln()).abs() < 1e-13);
    // (k-2)!(b-k)!/(b-1)! for a few more pairs
    for (b, k) in [(5, 3), (10, 2), (10, 10), (30, 17)] {
        let want = -ln_binomial(b as u64 - 2, k as u64 - 2) - ((b - 1) as f64).ln();
        assert!((log_rate(b, k, &m).unwrap() - want).abs() < 1e-11, "b={b} k={k}");
    }
}

#[test]
fn point_mass_rates() {
    let kingman = LambdaMeasure::kingman();
    assert_eq!(log_rate(10, 2, &kingman).unwrap(), 0.0);
    assert_eq!(log_rate(10, 3, &kingman).unwrap(), f64::NEG_INFINITY);
    let star = LambdaMeasure::point_mass(1.0).unwrap();
    assert_eq!(log_rate(6, 6, &star).unwrap(), 0.0);
    assert_eq!(log_rate(6, 5, &star).unwrap(), f64::NEG_INFINITY);
    assert!(log_rate(3, 4, &kingman).is_err());
    assert!(log_rate(1, 1, &kingman).is_err());
}

#[test]
fn beta_rates_match_independent_log_beta() {
    for &alpha in &ALPHAS {
        for b in 2..=60 {
            for k in 2..=b {
                let got = log_rate(b, k, &LambdaMeasure::beta(alpha).unwrap()).unwrap();
                assert!((got - beta_oracle(b, k, alpha)).abs() < 1e-10, "b={b} k={k} α={alpha}");
            }
        }
    }
}

#[test]
fn closed_form_matches_quadrature_of_the_density() {
    let m = LambdaMeasure::beta(1.5).unwrap();
    let q = LambdaMeasure::density(Density::beta(1.5).unwrap());
    let (a, b) = (log_rate(4, 3, &m).unwrap().exp(), log_rate(4, 3, &q).unwrap().exp());
    assert!(rel(a, b) < 1e-8, "{a} vs {b}");
    for &alpha in &[0.3, 1.7] {
        let m = LambdaMeasure::beta(alpha).unwrap();
        let q = LambdaMeasure::density(Density::beta(alpha).unwrap());
        for (b, k) in [(2, 2), (10, 5), (40, 2), (40, 40)] {
            let (x, y) = (log_rate(b, k, &m).unwrap().exp(), log_rate(b, k, &q).unwrap().exp());
            assert!(rel(x, y) < 1e-8, "b={b} k={k} α={alpha}: {x} vs {y}");
        }
    }
}

#[test]
fn discrete_measure_is_an_atom_sum() {
    let m = LambdaMeasure::discrete(vec![0.2, 0.6], vec![0.25, 0.75]).unwrap();
    let (b, k) = (7, 3);
    let kernel = |x: f64| x.powi(k as i32 - 2) * (1.0 - x).powi((b - k) as i32);
    let want = 0.25 * kernel(0.2) + 0.75 * kernel(0.6);
    assert!(rel(log_rate(b, k, &m).unwrap().exp(), want) < 1e-13);
    assert!(LambdaMeasure::discrete(vec![0.2, 1.2], vec![0.5, 0.5]).is_err());
    assert!(LambdaMeasure::discrete(vec![0.2], vec![0.5]).is_err());
}

#[test]
fn total_rates() {
    let bs = LambdaMeasure::bolthausen_sznitman();
    assert!((total_log_rate(3, &bs).unwrap() - 2f64.ln()).abs() < 1e-13);
    assert!((total_log_rate(10, &LambdaMeasure::kingman()).unwrap() - 45f64.ln()).abs() < 1e-13);
    let m = LambdaMeasure::beta(1.5).unwrap();
    let total = total_log_rate(100, &m).unwrap();
    let direct = (2..=100)
        .map(|k| (ln_binomial(100, k as u64) + beta_oracle(100, k, 1.5)).exp())
        .sum::<f64>()
        .ln();
    assert!((total - direct).abs() < 1e-11);
}

#[test]
fn bound_values() {
    assert!((bound_log_rate(3, 1.0) - 2f64.ln()).abs() < 1e-15);
    assert!((bound_log_rate(3, 1.0) - total_log_rate(3, &LambdaMeasure::bolthausen_sznitman()).unwrap()).abs() < 1e-12);
    for alpha in [0.1, 1.0, 1.9] {
        assert_eq!(bound_log_rate(2, alpha), 0.0);
    }
}

// The closed-form comparison shows the bound holds (with equality at α = 1)
// for α ≤ 1 but is exceeded by up to about 6.3% for α in (1, 2); it is a
// close lower approximation there.
#[test]
fn bound_holds_up_to_one_and_is_close_above() {
    for i in 1..40 {
        let alpha = 0.05 * i as f64;
        let m = LambdaMeasure::beta(alpha).unwrap();
        let table = RateTable::build(&m, 200).unwrap();
        for b in 2..=200 {
            let gap = table.total_log_rate(b) - bound_log_rate(b, alpha);
            if alpha <= 1.0 + 1e-12 {
                assert!(gap <= 1e-10, "b={b} α={alpha}: {gap}");
            } else {
                assert!(gap >= -1e-12 && gap < 0.07, "b={b} α={alpha}: {gap}");
            }
        }
    }
    let m = LambdaMeasure::beta(1.8).unwrap();
    assert!(total_log_rate(50, &m).unwrap() > bound_log_rate(50, 1.8));
}

#[test]
fn block_size_pmfs() {
    assert_eq!(block_size_pmf(5, &LambdaMeasure::kingman()).unwrap(), vec![1.0, 0.0, 0.0, 0.0]);
    let star = block_size_pmf(5, &LambdaMeasure::point_mass(1.0).unwrap()).unwrap();
    assert_eq!(star, vec![0.0, 0.0, 0.0, 1.0]);
    let near = block_size_pmf(20, &LambdaMeasure::beta(1.999).unwrap()).unwrap();
    assert!(near[0] > 0.999, "{}", near[0]);
    // Single trifurcation from three lineages under α = 1: (3/4, 1/4).
    let bs = block_size_pmf(3, &LambdaMeasure::bolthausen_sznitman()).unwrap();
    assert!((bs[0] - 0.75).abs() < 1e-14 && (bs[1] - 0.25).abs() < 1e-14);
}

#[test]
fn mean_block_sizes() {
    assert_eq!(mean_block_size(17, &LambdaMeasure::kingman()).unwrap(), 2.0);
    assert!((mean_block_size(5, &LambdaMeasure::point_mass(1.0).unwrap()).unwrap() - 5.0).abs() < 1e-14);
    let means: Vec<f64> = [1.0, 1.5, 1.8]
        .iter()
        .map(|&a| mean_block_size(100, &LambdaMeasure::beta(a).unwrap()).unwrap())
        .collect();
    assert!(means[0] > means[1] && means[1] > means[2] && means[2] > 2.0, "{means:?}");
    let mut last = f64::INFINITY;
    for i in 1..200 {
        let m = mean_block_size(60, &LambdaMeasure::beta(0.01 * i as f64).unwrap()).unwrap();
        assert!(m < last, "not decreasing at α = {}", 0.01 * i as f64);
        last = m;
    }
}

#[test]
fn kingman_limit() {
    let m = LambdaMeasure::beta(1.999).unwrap();
    let table = RateTable::build(&m, 100).unwrap();
    for b in 2..=100 {
        assert!((table.log_rate(b, 2).exp() - 1.0).abs() < 0.01, "b={b}");
        if b > 2 {
            assert!(table.log_rate(b, 3).exp() < 1e-3);
        }
    }
    assert!(LambdaMeasure::for_alpha(1.99995).unwrap().is_kingman());
    assert!(LambdaMeasure::beta(2.0).unwrap().is_kingman());
    assert!(LambdaMeasure::beta(0.0).is_err());
    assert!(LambdaMeasure::beta(2.5).is_err());
}

#[test]
fn table_matches_direct_evaluation() {
    let m = LambdaMeasure::beta(0.7).unwrap();
    let table = RateTable::build(&m, 30).unwrap();
    assert_eq!(table.b_max(), 30);
    for b in 2..=30 {
        assert!((table.total_log_rate(b) - total_log_rate(b, &m).unwrap()).abs() < 1e-12);
        for k in 2..=b {
            assert!((table.log_rate(b, k) - log_rate(b, k, &m).unwrap()).abs() < 1e-12);
        }
    }
}

proptest! {
    #[test]
    fn consistency_relation(alpha in 0.01f64..1.99, b in 2usize..=60) {
        let table = RateTable::build(&LambdaMeasure::beta(alpha).unwrap(), 61).unwrap();
        for k in 2..=b {
            let lhs = table.log_rate(b, k).exp();
            let rhs = table.log_rate(b + 1, k).exp() + table.log_rate(b + 1, k + 1).exp();
            prop_assert!(rel(lhs, rhs) < 1e-10, "b={} k={} {} {}", b, k, lhs, rhs);
        }
    }

    #[test]
    fn pmf_sums_to_one(alpha in 0.005f64..2.0, b in 2usize..=200) {
        let pmf = block_size_pmf(b, &LambdaMeasure::for_alpha(alpha).unwrap()).unwrap();
        prop_assert!((pmf.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert!(pmf.iter().all(|p| *p >= 0.0));
    }

    #[test]
    fn discrete_pmf_sums_to_one(x in 0.0f64..=1.0, y in 0.0f64..=1.0, w in 0.05f64..0.95, b in 2usize..=80) {
        let m = LambdaMeasure::discrete(vec![x, y], vec![w, 1.0 - w]).unwrap();
        let pmf = block_size_pmf(b, &m).unwrap();
        prop_assert!((pmf.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }
}

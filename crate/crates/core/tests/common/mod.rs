#![allow(dead_code)]

use lambdacoal::genealogy::Genealogy;
use lambdacoal::{extract_stats, parse_newick, simulate, CoalescentData, LambdaMeasure, SamplingSchedule, Trajectory};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// 8 tips at three sampling times (0, 2.5, 4.5) with merger sizes
/// 2, 2, 3, 2, 2, 2 at times 1..=7 (the trifurcation at 3).
pub const EIGHT_TIPS: &str =
    "((((a:1,b:1):2,e:0.5,f:0.5):2,g:2.5):2,((c:2,d:2):4,h:1.5):1);";

pub fn eight_tips() -> CoalescentData {
    extract_stats(&parse_newick(EIGHT_TIPS, None).unwrap()).unwrap()
}

pub fn sim_tree(n: usize, alpha: f64, traj: &Trajectory, seed: u64) -> Genealogy {
    let m = LambdaMeasure::for_alpha(alpha).unwrap();
    simulate(&SamplingSchedule::isochronous(n).unwrap(), traj, &m, &mut rng(seed)).unwrap()
}

pub fn sim_data(n: usize, alpha: f64, traj: &Trajectory, seed: u64) -> CoalescentData {
    extract_stats(&sim_tree(n, alpha, traj, seed)).unwrap()
}

/// Kolmogorov limiting distribution `P(K > x)` with the small-sample
/// correction of Stephens.
fn kolmogorov_tail(d: f64, n_eff: f64) -> f64 {
    let s = n_eff.sqrt();
    let x = (s + 0.12 + 0.11 / s) * d;
    if x < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..200 {
        let k = k as f64;
        let term = 2.0 * (-1f64).powf(k - 1.0) * (-2.0 * k * k * x * x).exp();
        sum += term;
        if term.abs() < 1e-16 {
            break;
        }
    }
    sum.clamp(0.0, 1.0)
}

/// One-sample KS p-value against a continuous CDF.
pub fn ks_one_sample(mut xs: Vec<f64>, cdf: impl Fn(f64) -> f64) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    let d = xs
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).max((i + 1) as f64 / n - f)
        })
        .fold(0.0, f64::max);
    kolmogorov_tail(d, n)
}

pub fn ks_two_sample(mut a: Vec<f64>, mut b: Vec<f64>) -> f64 {
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j, mut d) = (0, 0, 0.0f64);
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    kolmogorov_tail(d, na * nb / (na + nb))
}

/// Pearson chi-square p-value, pooling expected counts below 5 into one
/// bin.
pub fn chi_square(observed: &[f64], expected: &[f64]) -> f64 {
    let (mut stat, mut bins) = (0.0, 0usize);
    let (mut pool_o, mut pool_e) = (0.0, 0.0);
    for (&o, &e) in observed.iter().zip(expected) {
        if e < 5.0 {
            pool_o += o;
            pool_e += e;
        } else {
            stat += (o - e) * (o - e) / e;
            bins += 1;
        }
    }
    if pool_e > 0.0 {
        stat += (pool_o - pool_e) * (pool_o - pool_e) / pool_e.max(1e-300);
        bins += 1;
    }
    assert!(bins >= 2, "chi-square needs at least two bins");
    1.0 - ChiSquared::new((bins - 1) as f64).unwrap().cdf(stat)
}

/// Central finite-difference gradient.
pub fn fd_gradient(f: impl Fn(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<f64> {
    let mut y = x.to_vec();
    (0..x.len())
        .map(|i| {
            y[i] = x[i] + h;
            let up = f(&y);
            y[i] = x[i] - h;
            let down = f(&y);
            y[i] = x[i];
            (up - down) / (2.0 * h)
        })
        .collect()
}

/// Relative error with an absolute floor for components near zero.
pub fn rel_err(a: f64, b: f64, floor: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(floor)
}

//! Bounded one-dimensional maximization.

const INV_PHI: f64 = 0.618_033_988_749_894_8;

/// Outcome of [`maximize`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Maximum {
    pub x: f64,
    pub value: f64,
    /// The maximizer sits at one of the bounds.
    pub at_bound: Option<Bound>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Bound {
    Lower,
    Upper,
}

/// Golden-section search for the maximum of `f` on `[a, b]` until the
/// bracket is narrower than `tol`.
pub fn golden_section<F: FnMut(f64) -> f64>(mut f: F, mut a: f64, mut b: f64, tol: f64) -> (f64, f64) {
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while (b - a).abs() > tol {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
    }
    if fc >= fd {
        (c, fc)
    } else {
        (d, fd)
    }
}

/// Maximizes `f` on `[lo, hi]`: an even scan of `scan` points (bounds
/// included) locates the best bracket, which golden-section search then
/// refines to `tol`. The bounds themselves are candidates, so monotone
/// objectives return the exact bound.
pub fn maximize<F: FnMut(f64) -> f64>(mut f: F, lo: f64, hi: f64, scan: usize, tol: f64) -> Maximum {
    let scan = scan.max(3);
    let step = (hi - lo) / (scan - 1) as f64;
    let xs: Vec<f64> = (0..scan)
        .map(|i| if i == scan - 1 { hi } else { lo + i as f64 * step })
        .collect();
    let values: Vec<f64> = xs.iter().map(|&x| f(x)).collect();
    let best = values
        .iter()
        .enumerate()
        .fold(0, |best, (i, v)| if *v > values[best] { i } else { best });
    let left = xs[best.saturating_sub(1)];
    let right = xs[(best + 1).min(scan - 1)];
    let (mut x, mut value) = golden_section(&mut f, left, right, tol);
    if values[best] >= value {
        x = xs[best];
        value = values[best];
    }
    let at_bound = if best == 0 && (x - lo).abs() <= tol {
        Some(Bound::Lower)
    } else if best == scan - 1 && (hi - x).abs() <= tol {
        Some(Bound::Upper)
    } else {
        None
    };
    Maximum { x, value, at_bound }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic() {
        let m = maximize(|x| -(x - 0.37).powi(2), 0.0, 2.0, 50, 1e-9);
        assert!((m.x - 0.37).abs() < 1e-8);
        assert_eq!(m.at_bound, None);
    }

    #[test]
    fn monotone_hits_bounds() {
        let m = maximize(|x| x, 0.005, 2.0, 40, 1e-6);
        assert_eq!(m.x, 2.0);
        assert_eq!(m.at_bound, Some(Bound::Upper));
        let m = maximize(|x| -x, 0.005, 2.0, 40, 1e-6);
        assert_eq!(m.x, 0.005);
        assert_eq!(m.at_bound, Some(Bound::Lower));
    }

    #[test]
    fn multimodal_scan_finds_global() {
        let f = |x: f64| (-(x - 0.2).powi(2) / 0.001).exp() + 2.0 * (-(x - 1.7).powi(2) / 0.001).exp();
        let m = maximize(f, 0.0, 2.0, 400, 1e-8);
        assert!((m.x - 1.7).abs() < 1e-6);
    }
}

use crate::error::{Error, Result};
use crate::numerics::SeededRng;

/// Absolute Pearson correlation of two equal-length samples.
///
/// Returns `Ok(None)` (undefined) when either sample is constant.
pub fn pearson_abs(a: &[f64], b: &[f64]) -> Result<Option<f64>> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: a.len(),
            actual: b.len(),
        });
    }
    if a.len() < 2 {
        return Err(Error::invalid("pearson_abs needs at least 2 observations"));
    }
    if is_constant(a) || is_constant(b) {
        return Ok(None);
    }
    let n = a.len() as f64;
    let mean_a = a.iter().sum::<f64>() / n;
    let mean_b = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (&x, &y) in a.iter().zip(b) {
        let dx = x - mean_a;
        let dy = y - mean_b;
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa == 0.0 || sbb == 0.0 {
        return Ok(None);
    }
    Ok(Some((sab / (saa * sbb).sqrt()).abs().min(1.0)))
}

/// True when every entry equals the first (zero variance).
pub fn is_constant(xs: &[f64]) -> bool {
    xs.split_first()
        .is_none_or(|(first, rest)| rest.iter().all(|x| x == first))
}

/// Piecewise-linear curve on `[0, x_last]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Curve {
    xs: Vec<f64>,
    ys: Vec<f64>,
}

impl Curve {
    pub fn new(xs: Vec<f64>, ys: Vec<f64>) -> Result<Self> {
        if xs.len() != ys.len() {
            return Err(Error::DimensionMismatch {
                expected: xs.len(),
                actual: ys.len(),
            });
        }
        if xs.len() < 2 {
            return Err(Error::invalid("curve needs at least 2 points"));
        }
        if xs[0] != 0.0 {
            return Err(Error::invalid("curve must start at x = 0"));
        }
        if xs.windows(2).any(|w| w[1].partial_cmp(&w[0]) != Some(std::cmp::Ordering::Greater)) {
            return Err(Error::invalid("curve abscissae must be strictly increasing"));
        }
        if xs[xs.len() - 1] > 1.0 {
            return Err(Error::invalid("curve abscissae must lie in [0, 1]"));
        }
        if ys.iter().any(|y| !(0.0..=1.0).contains(y)) {
            return Err(Error::invalid("curve ordinates must lie in [0, 1]"));
        }
        Ok(Self { xs, ys })
    }

    pub fn xs(&self) -> &[f64] {
        &self.xs
    }

    pub fn ys(&self) -> &[f64] {
        &self.ys
    }
}

/// Trapezoidal area under `curve`, divided by the grid extent so a constant
/// curve at 1 scores exactly 1.
pub fn auc_trapezoid(curve: &Curve) -> f64 {
    let xs = curve.xs();
    let ys = curve.ys();
    let area: f64 = xs
        .windows(2)
        .zip(ys.windows(2))
        .map(|(x, y)| 0.5 * (x[1] - x[0]) * (y[0] + y[1]))
        .sum();
    (area / xs[xs.len() - 1]).clamp(0.0, 1.0)
}

/// `k` distinct indices from `0..n`, ascending.
///
/// When `k == n` the full range is returned without consuming randomness.
pub fn sample_without_replacement(n: usize, k: usize, rng: &mut SeededRng) -> Result<Vec<usize>> {
    if k > n {
        return Err(Error::invalid(format!("cannot sample {k} of {n} without replacement")));
    }
    if k == n {
        return Ok((0..n).collect());
    }
    let mut pool: Vec<usize> = (0..n).collect();
    for i in 0..k {
        let j = i + rng.below(n - i);
        pool.swap(i, j);
    }
    pool.truncate(k);
    pool.sort_unstable();
    Ok(pool)
}

/// Ranks with ties assigned their average rank (1-based).
pub fn average_ranks(xs: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..xs.len()).collect();
    order.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut ranks = vec![0.0; xs.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && xs[order[j + 1]] == xs[order[i]] {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &idx in &order[i..=j] {
            ranks[idx] = rank;
        }
        i = j + 1;
    }
    ranks
}

/// Spearman rank correlation; 0 when either side is constant.
pub fn spearman(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() {
        return Err(Error::DimensionMismatch {
            expected: xs.len(),
            actual: ys.len(),
        });
    }
    let rx = average_ranks(xs);
    let ry = average_ranks(ys);
    let n = rx.len() as f64;
    let mx = rx.iter().sum::<f64>() / n;
    let my = ry.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in rx.iter().zip(&ry) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return Ok(0.0);
    }
    Ok(sxy / (sxx * syy).sqrt())
}

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample standard deviation (n − 1); 0 for fewer than two values.
pub fn sample_std(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    (xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() - 1) as f64).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn pearson_examples() {
        assert_eq!(pearson_abs(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap(), Some(1.0));
        assert_eq!(pearson_abs(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]).unwrap(), Some(1.0));
        assert_eq!(
            pearson_abs(&[1.0, 2.0, 3.0, 4.0], &[1.0, 3.0, 2.0, 4.0]).unwrap(),
            Some(0.8)
        );
        assert_eq!(pearson_abs(&[1.0, 2.0, 3.0], &[5.0, 5.0, 5.0]).unwrap(), None);
    }

    #[test]
    fn pearson_errors() {
        assert!(pearson_abs(&[1.0, 2.0], &[1.0]).is_err());
        assert!(pearson_abs(&[1.0], &[1.0]).is_err());
    }

    #[test]
    fn auc_examples() {
        let c = |xs: &[f64], ys: &[f64]| Curve::new(xs.to_vec(), ys.to_vec()).unwrap();
        assert_eq!(auc_trapezoid(&c(&[0.0, 1.0], &[1.0, 1.0])), 1.0);
        assert_eq!(auc_trapezoid(&c(&[0.0, 1.0], &[1.0, 0.0])), 0.5);
        assert_eq!(auc_trapezoid(&c(&[0.0, 0.5, 1.0], &[1.0, 1.0, 0.0])), 0.75);
        // Normalised by extent: constant 1 on a short grid still scores 1.
        assert_eq!(auc_trapezoid(&c(&[0.0, 0.05, 0.95], &[1.0, 1.0, 1.0])), 1.0);
    }

    #[test]
    fn curve_validation() {
        assert!(Curve::new(vec![0.0], vec![1.0]).is_err());
        assert!(Curve::new(vec![0.1, 0.2], vec![1.0, 1.0]).is_err());
        assert!(Curve::new(vec![0.0, 0.0], vec![1.0, 1.0]).is_err());
        assert!(Curve::new(vec![0.0, 0.5], vec![1.0, 1.5]).is_err());
    }

    #[test]
    fn sampling_examples() {
        let mut rng = SeededRng::new(1);
        assert_eq!(sample_without_replacement(5, 5, &mut rng).unwrap(), vec![0, 1, 2, 3, 4]);
        assert!(sample_without_replacement(10, 0, &mut rng).unwrap().is_empty());
        assert!(sample_without_replacement(3, 4, &mut rng).is_err());
        let a = sample_without_replacement(10, 3, &mut SeededRng::new(7)).unwrap();
        let b = sample_without_replacement(10, 3, &mut SeededRng::new(7)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a, PINNED_SAMPLE_SEED7);
    }

    // Recorded from the first run with seed 7.
    const PINNED_SAMPLE_SEED7: [usize; 3] = [1, 2, 5];

    #[test]
    fn differing_seeds_give_differing_samples() {
        let a = sample_without_replacement(10_000, 10, &mut SeededRng::new(1)).unwrap();
        let b = sample_without_replacement(10_000, 10, &mut SeededRng::new(2)).unwrap();
        assert_ne!(a, b);
    }

    #[test]
    fn spearman_examples() {
        let f = [0.25, 0.5, 1.0, 2.0, 4.0];
        assert_eq!(spearman(&f, &[0.1, 0.2, 0.3, 0.4, 0.9]).unwrap(), 1.0);
        assert_eq!(spearman(&f, &[3.0; 5]).unwrap(), 0.0);
        assert_eq!(spearman(&f, &[5.0, 4.0, 3.0, 2.0, 1.0]).unwrap(), -1.0);
        assert_eq!(average_ranks(&[2.0, 1.0, 2.0]), vec![2.5, 1.0, 2.5]);
    }

    /// Midpoint Riemann sum on a 10,000-cell grid over [0, 1], truncated at
    /// the last knot. Knots sit on grid lines, so the sum is exact per cell.
    fn riemann_oracle(xs: &[f64], ys: &[f64]) -> f64 {
        let h = 1.0 / 10_000.0;
        let last = xs[xs.len() - 1];
        let cells = (last / h).round() as usize;
        let mut total = 0.0;
        for i in 0..cells {
            let x = (i as f64 + 0.5) * h;
            let seg = xs.windows(2).position(|w| x <= w[1]).unwrap();
            let t = (x - xs[seg]) / (xs[seg + 1] - xs[seg]);
            total += (ys[seg] + t * (ys[seg + 1] - ys[seg])) * h;
        }
        total / last
    }

    proptest! {
        #[test]
        fn pearson_symmetric(a in prop::collection::vec(-10.0f64..10.0, 3..40), seed in any::<u64>()) {
            let mut rng = SeededRng::new(seed);
            let b: Vec<f64> = a.iter().map(|_| rng.standard_normal()).collect();
            let ab = pearson_abs(&a, &b).unwrap();
            let ba = pearson_abs(&b, &a).unwrap();
            prop_assert_eq!(ab.is_some(), ba.is_some());
            if let (Some(x), Some(y)) = (ab, ba) {
                prop_assert!((x - y).abs() < 1e-12);
                prop_assert!((0.0..=1.0).contains(&x));
            }
        }

        #[test]
        fn pearson_affine_invariant(a in prop::collection::vec(-10.0f64..10.0, 3..40),
                                    alpha in prop_oneof![-5.0f64..-0.1, 0.1f64..5.0],
                                    beta in -5.0f64..5.0) {
            prop_assume!(!is_constant(&a));
            let b: Vec<f64> = a.iter().map(|x| alpha * x + beta).collect();
            prop_assume!(!is_constant(&b));
            let r = pearson_abs(&a, &b).unwrap().unwrap();
            prop_assert!((r - 1.0).abs() < 1e-9, "r = {}", r);
        }

        #[test]
        fn auc_matches_riemann(knots in prop::collection::vec((1u32..=10_000, 0.0f64..=1.0), 1..12),
                               y0 in 0.0f64..=1.0) {
            let mut pts = knots;
            pts.sort_by_key(|p| p.0);
            pts.dedup_by_key(|p| p.0);
            let mut xs = vec![0.0];
            let mut ys = vec![y0];
            for (x, y) in pts { xs.push(x as f64 / 10_000.0); ys.push(y); }
            let curve = Curve::new(xs.clone(), ys.clone()).unwrap();
            let auc = auc_trapezoid(&curve);
            prop_assert!((auc - riemann_oracle(&xs, &ys)).abs() < 1e-12);
        }
    }
}

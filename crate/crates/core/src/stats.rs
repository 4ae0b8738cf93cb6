//! Small Monte Carlo summaries: means with standard errors, RMSE with a
//! delta-method error, and Kolmogorov-Smirnov distances.

pub fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Sample variance with the `n - 1` divisor; zero for fewer than two values.
pub fn variance(v: &[f64]) -> f64 {
    if v.len() < 2 {
        return 0.0;
    }
    let m = mean(v);
    v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64
}

/// Standard error of the sample mean.
pub fn mc_se(v: &[f64]) -> f64 {
    (variance(v) / v.len() as f64).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub se: f64,
}

pub fn mean_estimate(v: &[f64]) -> Estimate {
    Estimate { value: mean(v), se: mc_se(v) }
}

/// `sqrt(mean(e^2))` from squared errors, with the delta-method standard
/// error `se(mean(e^2)) / (2 rmse)`.
pub fn rmse(sq_errors: &[f64]) -> Estimate {
    let mse = mean(sq_errors);
    let value = mse.sqrt();
    let se = if value > 0.0 { mc_se(sq_errors) / (2.0 * value) } else { 0.0 };
    Estimate { value, se }
}

/// Ratio of two independent estimates with a first-order standard error.
pub fn ratio(num: Estimate, den: Estimate) -> Estimate {
    let value = num.value / den.value;
    let rel = ((num.se / num.value).powi(2) + (den.se / den.value).powi(2)).sqrt();
    Estimate { value, se: value.abs() * rel }
}

/// Fraction of `true` values with its binomial standard error.
pub fn frequency(hits: impl IntoIterator<Item = bool>) -> Estimate {
    let (mut k, mut n) = (0usize, 0usize);
    for h in hits {
        n += 1;
        k += usize::from(h);
    }
    let p = k as f64 / n as f64;
    Estimate { value: p, se: (p * (1.0 - p) / n as f64).sqrt() }
}

/// One-sample Kolmogorov-Smirnov distance to a continuous cdf.
pub fn ks_statistic(values: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    let mut d: f64 = 0.0;
    for (k, &x) in v.iter().enumerate() {
        let f = cdf(x);
        d = d.max((k + 1) as f64 / n - f).max(f - k as f64 / n);
    }
    d
}

/// Distance to the uniform law on `[0, 1]`.
pub fn ks_uniform(values: &[f64]) -> f64 {
    ks_statistic(values, |x| x.clamp(0.0, 1.0))
}

/// Two-sample Kolmogorov-Smirnov distance.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> f64 {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
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
    d
}

/// Least-squares slope of `y` on `x`.
pub fn slope(x: &[f64], y: &[f64]) -> f64 {
    let (mx, my) = (mean(x), mean(y));
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mean_and_se() {
        let v = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(mean(&v), 2.5);
        assert!((variance(&v) - 5.0 / 3.0).abs() < 1e-12);
        assert!((mc_se(&v) - (5.0f64 / 12.0).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn rmse_of_constant_errors() {
        let e = rmse(&[4.0, 4.0, 4.0]);
        assert_eq!(e.value, 2.0);
        assert_eq!(e.se, 0.0);
    }

    #[test]
    fn ks_of_exact_grid_is_half_step() {
        let v: Vec<f64> = (0..10).map(|k| (k as f64 + 0.5) / 10.0).collect();
        assert!((ks_uniform(&v) - 0.05).abs() < 1e-12);
        assert_eq!(ks_two_sample(&v, &v), 0.0);
        assert_eq!(ks_two_sample(&[0.0, 0.1], &[0.5, 0.6]), 1.0);
    }

    #[test]
    fn frequency_and_slope() {
        let f = frequency([true, false, true, true]);
        assert_eq!(f.value, 0.75);
        assert!((slope(&[1.0, 2.0, 3.0], &[2.0, 4.0, 6.0]) - 2.0).abs() < 1e-12);
    }
}

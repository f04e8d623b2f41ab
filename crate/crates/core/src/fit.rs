//! Least-squares fits used by the diagnostics.

/// Ordinary least squares `y ≈ slope * x + intercept`.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    assert_eq!(xs.len(), ys.len());
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
    }
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    (slope, my - slope * mx)
}

/// Exponent `p` of the fit `y ≈ c t^p`, using only samples with `t` in `[t0, t1]`
/// and `y > 0`.
pub fn loglog_slope(ts: &[f64], ys: &[f64], t0: f64, t1: f64) -> f64 {
    let (lx, ly): (Vec<f64>, Vec<f64>) = ts
        .iter()
        .zip(ys)
        .filter(|(t, y)| **t >= t0 && **t <= t1 && **y > 0.0 && **t > 0.0)
        .map(|(t, y)| (t.ln(), y.ln()))
        .unzip();
    linear_fit(&lx, &ly).0
}

/// Rate `σ` and prefactor `c` of `y ≈ c e^{σ t}`.
pub fn exponential_fit(ts: &[f64], ys: &[f64]) -> (f64, f64) {
    let (lt, ly): (Vec<f64>, Vec<f64>) =
        ts.iter().zip(ys).filter(|(_, y)| **y > 0.0).map(|(t, y)| (*t, y.ln())).unzip();
    let (s, b) = linear_fit(&lt, &ly);
    (s, b.exp())
}

/// Minimizes a unimodal function on `[a, b]` by golden-section search.
pub fn golden_min(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> f64 {
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while (b - a).abs() > tol {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recovers_power_law() {
        let ts: Vec<f64> = (1..50).map(|i| i as f64).collect();
        let ys: Vec<f64> = ts.iter().map(|t| 3.0 * t.powf(-1.5)).collect();
        assert!((loglog_slope(&ts, &ys, 5.0, 40.0) + 1.5).abs() < 1e-12);
    }

    #[test]
    fn recovers_exponential() {
        let ts: Vec<f64> = (0..20).map(|i| 0.1 * i as f64).collect();
        let ys: Vec<f64> = ts.iter().map(|t| 2.0 * (0.7 * t).exp()).collect();
        let (s, c) = exponential_fit(&ts, &ys);
        assert!((s - 0.7).abs() < 1e-12 && (c - 2.0).abs() < 1e-12);
    }

    #[test]
    fn golden_section_finds_minimum() {
        let x = golden_min(|x| (x - 1.3).powi(2), 0.0, 4.0, 1e-10);
        assert!((x - 1.3).abs() < 1e-8);
    }
}

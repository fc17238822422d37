//! Gauss–Legendre quadrature and numerically integrated W1 between a
//! quantile function and its staircase approximation.

use std::f64::consts::PI;
use std::sync::OnceLock;

const ORDER: usize = 32;
const PANELS: usize = 4;

fn legendre_rule() -> &'static (Vec<f64>, Vec<f64>) {
    static RULE: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    RULE.get_or_init(|| {
        let n = ORDER;
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        for i in 0..n {
            let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (mut p0, mut p1) = (1.0, x);
                for k in 2..=n {
                    let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                    p0 = p1;
                    p1 = p2;
                }
                dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
                let dx = p1 / dp;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            nodes[i] = x;
            weights[i] = 2.0 / ((1.0 - x * x) * dp * dp);
        }
        (nodes, weights)
    })
}

/// `∫_a^b f` by composite Gauss–Legendre; exact for polynomials of degree
/// below 64 and spectrally accurate for smooth integrands.
pub fn integrate(f: impl Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    if b <= a {
        return 0.0;
    }
    let (nodes, weights) = legendre_rule();
    let h = (b - a) / PANELS as f64;
    (0..PANELS)
        .map(|p| {
            let lo = a + p as f64 * h;
            let half = 0.5 * h;
            let mid = lo + half;
            nodes
                .iter()
                .zip(weights)
                .map(|(x, w)| w * f(mid + half * x))
                .sum::<f64>()
                * half
        })
        .sum()
}

/// `∫₀¹ |F⁻¹(ω) − F⁻¹(τ̂ᵢ(ω))| dω`, where the staircase takes the value at the
/// midpoint of each fraction interval. Each interval is split at its
/// midpoint so the integrand is smooth on every piece when `quantile_fn` is
/// monotone.
pub fn staircase_w1(quantile_fn: impl Fn(f64) -> f64, boundaries: &[f64]) -> f64 {
    boundaries
        .windows(2)
        .map(|w| {
            let mid = 0.5 * (w[0] + w[1]);
            let level = quantile_fn(mid);
            let g = |x: f64| (quantile_fn(x) - level).abs();
            integrate(&g, w[0], mid) + integrate(&g, mid, w[1])
        })
        .sum()
}

/// Central differences of [`staircase_w1`] in each interior boundary.
pub fn staircase_w1_gradient_fd(quantile_fn: impl Fn(f64) -> f64, boundaries: &[f64], h: f64) -> Vec<f64> {
    let mut b = boundaries.to_vec();
    (1..boundaries.len() - 1)
        .map(|i| {
            let orig = b[i];
            b[i] = orig + h;
            let up = staircase_w1(&quantile_fn, &b);
            b[i] = orig - h;
            let down = staircase_w1(&quantile_fn, &b);
            b[i] = orig;
            (up - down) / (2.0 * h)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_integrals_exact() {
        assert!((integrate(|x| x * x, 0.0, 1.0) - 1.0 / 3.0).abs() < 1e-15);
        assert!((integrate(|x| x.powi(9), -1.0, 2.0) - (1024.0 - 1.0) / 10.0).abs() < 1e-11);
        assert!((integrate(f64::sin, 0.0, PI) - 2.0).abs() < 1e-14);
    }

    #[test]
    fn uniform_quantile_staircase() {
        // identity quantile function: each interval of width w contributes w²/4
        let b = [0.0, 0.3, 1.0];
        let expect = (0.09 + 0.49) / 4.0;
        assert!((staircase_w1(|x| x, &b) - expect).abs() < 1e-14);
    }
}

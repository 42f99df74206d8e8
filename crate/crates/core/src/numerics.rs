//! Small numerical kernels shared by the radial solvers: Gauss-Legendre
//! rules, Fornberg finite-difference weights, quintic Hermite interpolation
//! and power-law regression.

use std::f64::consts::PI;

/// Gauss-Legendre nodes and weights on [-1, 1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre(n, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

fn legendre(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let p = if n == 0 { 1.0 } else { p1 };
    let d = n as f64 * (x * p - p0) / (x * x - 1.0);
    (p, d)
}

/// Composite Gauss-Legendre rule over consecutive breakpoints.
#[derive(Debug, Clone)]
pub struct GaussRule {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussRule {
    pub fn new(order: usize) -> Self {
        let (nodes, weights) = gauss_legendre(order);
        Self { nodes, weights }
    }

    pub fn order(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes_weights(&self) -> (&[f64], &[f64]) {
        (&self.nodes, &self.weights)
    }

    /// Integral of `f` over [a, b].
    pub fn interval<F: FnMut(f64) -> f64>(&self, a: f64, b: f64, mut f: F) -> f64 {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        let mut s = 0.0;
        for (x, w) in self.nodes.iter().zip(&self.weights) {
            s += w * f(mid + half * x);
        }
        s * half
    }

    /// Sum of interval integrals over the sorted breakpoint list.
    pub fn composite<F: FnMut(f64) -> f64>(&self, breaks: &[f64], mut f: F) -> f64 {
        let mut total = 0.0;
        for w in breaks.windows(2) {
            if w[1] > w[0] {
                total += self.interval(w[0], w[1], &mut f);
            }
        }
        total
    }
}

/// Fornberg weights for the `m`-th derivative at `x0` from nodes `xs`.
pub fn fornberg_weights(x0: f64, xs: &[f64], m: usize) -> Vec<f64> {
    let n = xs.len();
    // c[j][k]: weight of node j for derivative k.
    let mut c = vec![vec![0.0; m + 1]; n];
    let mut c1 = 1.0;
    let mut c4 = xs[0] - x0;
    c[0][0] = 1.0;
    for i in 1..n {
        let mn = i.min(m);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = xs[i] - x0;
        for j in 0..i {
            let c3 = xs[i] - xs[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[i][k] = c1 * (k as f64 * c[i - 1][k - 1] - c5 * c[i - 1][k]) / c2;
                }
                c[i][0] = -c1 * c5 * c[i - 1][0] / c2;
            }
            for k in (1..=mn).rev() {
                c[j][k] = (c4 * c[j][k] - k as f64 * c[j][k - 1]) / c3;
            }
            c[j][0] = c4 * c[j][0] / c3;
        }
        c1 = c2;
    }
    c.into_iter().map(|row| row[m]).collect()
}

/// Derivative of sampled data at node `i` from a centred stencil of
/// `2 * half + 1` points (one-sided near the ends).
pub fn stencil_derivative(xs: &[f64], ys: &[f64], i: usize, half: usize, m: usize) -> f64 {
    let n = xs.len();
    let width = 2 * half + 1;
    let start = i.saturating_sub(half).min(n.saturating_sub(width));
    let end = (start + width).min(n);
    let w = fornberg_weights(xs[i], &xs[start..end], m);
    w.iter().zip(&ys[start..end]).map(|(a, b)| a * b).sum()
}

/// Quintic Hermite interpolation on [x0, x1] from value, first and second
/// derivative at both ends. Returns (value, first derivative).
#[allow(clippy::too_many_arguments)]
pub fn quintic_hermite(
    x: f64,
    x0: f64,
    x1: f64,
    f0: [f64; 3],
    f1: [f64; 3],
) -> (f64, f64) {
    let h = x1 - x0;
    let t = (x - x0) / h;
    let t2 = t * t;
    let t3 = t2 * t;
    let t4 = t3 * t;
    let t5 = t4 * t;
    let h00 = 1.0 - 10.0 * t3 + 15.0 * t4 - 6.0 * t5;
    let h10 = t - 6.0 * t3 + 8.0 * t4 - 3.0 * t5;
    let h20 = 0.5 * (t2 - 3.0 * t3 + 3.0 * t4 - t5);
    let h01 = 10.0 * t3 - 15.0 * t4 + 6.0 * t5;
    let h11 = -4.0 * t3 + 7.0 * t4 - 3.0 * t5;
    let h21 = 0.5 * (t3 - 2.0 * t4 + t5);
    let d00 = -30.0 * t2 + 60.0 * t3 - 30.0 * t4;
    let d10 = 1.0 - 18.0 * t2 + 32.0 * t3 - 15.0 * t4;
    let d20 = 0.5 * (2.0 * t - 9.0 * t2 + 12.0 * t3 - 5.0 * t4);
    let d01 = 30.0 * t2 - 60.0 * t3 + 30.0 * t4;
    let d11 = -12.0 * t2 + 28.0 * t3 - 15.0 * t4;
    let d21 = 0.5 * (3.0 * t2 - 8.0 * t3 + 5.0 * t4);
    let v = h00 * f0[0]
        + h10 * h * f0[1]
        + h20 * h * h * f0[2]
        + h01 * f1[0]
        + h11 * h * f1[1]
        + h21 * h * h * f1[2];
    let d = (d00 * f0[0] + d01 * f1[0]) / h
        + d10 * f0[1]
        + d11 * f1[1]
        + (d20 * f0[2] + d21 * f1[2]) * h;
    (v, d)
}

/// Least-squares line `y = intercept + slope * x`.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
    }
    let slope = sxy / sxx;
    (my - slope * mx, slope)
}

/// Surface measure of the unit sphere in R^N: 2 pi^{N/2} / Gamma(N/2).
pub fn sphere_surface(n: u32) -> f64 {
    // Gamma(N/2) by recursion from Gamma(1) = 1 or Gamma(1/2) = sqrt(pi).
    let mut g = if n % 2 == 0 { 1.0 } else { PI.sqrt() };
    let mut a = if n % 2 == 0 { 1.0 } else { 0.5 };
    let target = n as f64 / 2.0;
    while a < target - 1e-9 {
        g *= a;
        a += 1.0;
    }
    2.0 * PI.powf(target) / g
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_integrates_polynomials_exactly() {
        for n in 1..=12 {
            let rule = GaussRule::new(n);
            for deg in 0..(2 * n) {
                let got = rule.interval(0.0, 2.0, |x| x.powi(deg as i32));
                let exact = 2f64.powi(deg as i32 + 1) / (deg as f64 + 1.0);
                assert!((got - exact).abs() < 1e-13 * exact.max(1.0), "n={n} deg={deg}");
            }
        }
    }

    #[test]
    fn fornberg_reproduces_second_derivative_on_uneven_nodes() {
        let xs = [0.9, 0.97, 1.0, 1.05, 1.12];
        let w = fornberg_weights(1.0, &xs, 2);
        let got: f64 = w.iter().zip(&xs).map(|(w, x)| w * x.powi(4)).sum();
        assert!((got - 12.0).abs() < 1e-9);
        let w0 = fornberg_weights(1.0, &xs, 0);
        assert!((w0[2] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn quintic_hermite_is_exact_on_quintics() {
        let f = |x: f64| [x.powi(5) - 2.0 * x * x, 5.0 * x.powi(4) - 4.0 * x, 20.0 * x.powi(3) - 4.0];
        let (x0, x1) = (0.3, 1.1);
        for &x in &[0.3, 0.5, 0.77, 1.1] {
            let (v, d) = quintic_hermite(x, x0, x1, f(x0), f(x1));
            assert!((v - f(x)[0]).abs() < 1e-13);
            assert!((d - f(x)[1]).abs() < 1e-12);
        }
    }

    #[test]
    fn sphere_surface_values() {
        assert!((sphere_surface(2) - 2.0 * PI).abs() < 1e-14);
        assert!((sphere_surface(3) - 4.0 * PI).abs() < 1e-13);
        assert!((sphere_surface(8) - PI.powi(4) / 3.0).abs() < 1e-12);
        assert!((sphere_surface(8) - 32.4697).abs() < 1e-4);
        assert!((sphere_surface(10) - PI.powi(5) / 12.0).abs() < 1e-12);
    }

    #[test]
    fn linear_fit_recovers_line() {
        let xs: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 3.0 - 2.0 * x).collect();
        let (a, b) = linear_fit(&xs, &ys);
        assert!((a - 3.0).abs() < 1e-12 && (b + 2.0).abs() < 1e-12);
    }
}

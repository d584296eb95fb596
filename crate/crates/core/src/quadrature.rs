//! Composite Gauss-Legendre quadrature on a bounded interval.

use std::sync::OnceLock;

/// Points per panel.
pub const ORDER: usize = 20;

/// Nodes and weights of the `n`-point Gauss-Legendre rule on `[-1, 1]`,
/// found by Newton iteration on the Legendre recurrence.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
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
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

/// `(P_n(x), P_n'(x))`.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    for k in 2..=n {
        let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = p2;
    }
    if n == 0 {
        return (1.0, 0.0);
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

fn rule() -> &'static (Vec<f64>, Vec<f64>) {
    static RULE: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    RULE.get_or_init(|| gauss_legendre(ORDER))
}

/// Abscissae and weights of the composite rule with `panels` equal panels on
/// `[a, b]`, in increasing order.
pub fn composite_nodes(a: f64, b: f64, panels: usize) -> (Vec<f64>, Vec<f64>) {
    let (t, w) = rule();
    let h = (b - a) / panels as f64;
    let mut xs = Vec::with_capacity(panels * ORDER);
    let mut ws = Vec::with_capacity(panels * ORDER);
    for k in 0..panels {
        let mid = a + (k as f64 + 0.5) * h;
        for (ti, wi) in t.iter().zip(w) {
            xs.push(mid + 0.5 * h * ti);
            ws.push(0.5 * h * wi);
        }
    }
    (xs, ws)
}

/// Composite rule applied to `f`.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, panels: usize) -> f64 {
    let (xs, ws) = composite_nodes(a, b, panels);
    xs.iter().zip(&ws).map(|(x, w)| w * f(*x)).sum()
}

/// Double the panel count until two successive estimates agree to `tol`.
/// Returns the finer estimate and its panel count, or `None` past `max_panels`.
pub fn integrate_adaptive<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    start_panels: usize,
    tol: f64,
    max_panels: usize,
) -> Option<(f64, usize)> {
    let mut n = start_panels.max(1);
    let mut prev = integrate(&f, a, b, n);
    while n * 2 <= max_panels {
        n *= 2;
        let next = integrate(&f, a, b, n);
        if (next - prev).abs() < tol {
            return Some((next, n));
        }
        prev = next;
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rule_integrates_polynomials_exactly() {
        let (x, w) = gauss_legendre(ORDER);
        for deg in 0..2 * ORDER {
            let got: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(deg as i32)).sum();
            let exact = if deg % 2 == 1 { 0.0 } else { 2.0 / (deg as f64 + 1.0) };
            assert!((got - exact).abs() < 1e-14, "deg {deg}: {got} vs {exact}");
        }
    }

    #[test]
    fn small_rules_match_tables() {
        let (x, w) = gauss_legendre(2);
        assert!((x[1] - 1.0 / 3f64.sqrt()).abs() < 1e-15);
        assert!((w[0] - 1.0).abs() < 1e-15);
        let (x, w) = gauss_legendre(3);
        assert_eq!(x[1], 0.0);
        assert!((w[1] - 8.0 / 9.0).abs() < 1e-15);
        assert!((x[2] - 0.6f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn adaptive_converges_on_smooth_integrand() {
        let (v, _) = integrate_adaptive(|x| (3.0 * x).cos(), 0.0, 2.0, 1, 1e-14, 64).unwrap();
        assert!((v - (6.0f64).sin() / 3.0).abs() < 1e-14);
    }
}

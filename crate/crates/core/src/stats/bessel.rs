//! Exponentially scaled modified Bessel functions of orders 0 and 1, and the
//! mean resultant length function `A₂(κ) = I₁(κ) / I₀(κ)` with its inverse.

/// Largest concentration the estimator will return.
pub const KAPPA_MAX: f64 = 1e4;

/// Below this argument the power series is used, above it the asymptotic
/// expansion. Both are accurate to a few ulps around the switch.
const SERIES_LIMIT: f64 = 30.0;

const MAX_NEWTON_STEPS: usize = 8;

fn series(x: f64, order: u32) -> f64 {
    // I_n(x) = (x/2)^n Σ (x²/4)^k / (k! (k+n)!)
    let q = 0.25 * x * x;
    let mut term = if order == 0 { 1.0 } else { 0.5 * x };
    let mut sum = term;
    let n = order as f64;
    for k in 1..500 {
        let k = k as f64;
        term *= q / (k * (k + n));
        sum += term;
        if term <= sum * 1e-17 {
            break;
        }
    }
    sum
}

fn asymptotic_scaled(x: f64, order: u32) -> f64 {
    // e^{-x} I_n(x) ~ (2πx)^{-1/2} Σ (-1)^k a_k(n) / x^k
    let mu = 4.0 * (order as f64).powi(2);
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..200 {
        let odd = (2 * k - 1) as f64;
        let next = -term * (mu - odd * odd) / (k as f64 * 8.0 * x);
        if next.abs() >= term.abs() {
            break;
        }
        term = next;
        sum += term;
        if term.abs() <= sum.abs() * 1e-17 {
            break;
        }
    }
    sum / (2.0 * std::f64::consts::PI * x).sqrt()
}

/// `e^{-|x|} I₀(x)`.
pub fn i0e(x: f64) -> f64 {
    let x = x.abs();
    if x <= SERIES_LIMIT {
        series(x, 0) * (-x).exp()
    } else {
        asymptotic_scaled(x, 0)
    }
}

/// `e^{-|x|} I₁(x)`.
pub fn i1e(x: f64) -> f64 {
    let ax = x.abs();
    let v = if ax <= SERIES_LIMIT { series(ax, 1) * (-ax).exp() } else { asymptotic_scaled(ax, 1) };
    v.copysign(x)
}

/// `ln I₀(x)`, finite for any finite argument.
pub fn ln_i0(x: f64) -> f64 {
    x.abs() + i0e(x).ln()
}

/// Mean resultant length of a von Mises distribution on the circle.
pub fn a2(kappa: f64) -> f64 {
    if kappa == 0.0 {
        return 0.0;
    }
    i1e(kappa) / i0e(kappa)
}

/// `dA₂/dκ = 1 - A₂/κ - A₂²`.
pub fn a2_derivative(kappa: f64) -> f64 {
    if kappa < 1e-6 {
        return 0.5 - 3.0 * kappa * kappa / 16.0;
    }
    let a = a2(kappa);
    1.0 - a / kappa - a * a
}

/// Solves `A₂(κ) = r̄` for the concentration. Starts from the closed-form
/// approximation `r̄(2 - r̄²)/(1 - r̄²)` and refines with Newton steps.
/// The result is capped at [`KAPPA_MAX`].
pub fn solve_kappa(rbar: f64) -> f64 {
    if !(rbar > 0.0) {
        return 0.0;
    }
    if rbar >= a2(KAPPA_MAX) {
        return KAPPA_MAX;
    }
    let r2 = rbar * rbar;
    let mut kappa = (rbar * (2.0 - r2) / (1.0 - r2)).min(KAPPA_MAX);
    for _ in 0..MAX_NEWTON_STEPS {
        let step = (a2(kappa) - rbar) / a2_derivative(kappa);
        let next = (kappa - step).clamp(0.0, KAPPA_MAX);
        let done = (next - kappa).abs() <= 1e-15 * kappa.max(1.0);
        kappa = next;
        if done {
            break;
        }
    }
    kappa
}

#[cfg(test)]
mod tests {
    use super::*;

    // Reference values from the defining integrals
    // I_n(x) = (1/π) ∫₀^π e^{x cos t} cos(nt) dt, evaluated with composite
    // Simpson in the scaled form e^{x (cos t - 1)}.
    fn scaled_by_quadrature(x: f64, n: i32) -> f64 {
        let steps = 20_000;
        let h = std::f64::consts::PI / steps as f64;
        let f = |t: f64| (x * (t.cos() - 1.0)).exp() * (n as f64 * t).cos();
        let mut acc = f(0.0) + f(std::f64::consts::PI);
        for i in 1..steps {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            acc += w * f(i as f64 * h);
        }
        acc * h / 3.0 / std::f64::consts::PI
    }

    #[test]
    fn matches_quadrature() {
        for &x in &[1e-3, 0.5, 1.0, 2.5, 10.0, 29.9, 30.1, 50.0, 200.0, 700.0] {
            let (q0, q1) = (scaled_by_quadrature(x, 0), scaled_by_quadrature(x, 1));
            assert!((i0e(x) - q0).abs() <= 1e-10 * q0, "i0e({x})");
            assert!((i1e(x) - q1).abs() <= 1e-10 * q1, "i1e({x})");
        }
    }

    #[test]
    fn known_values() {
        // I0(1) = 1.2660658777520082, I1(1) = 0.5651591039924851
        assert!((i0e(1.0) * 1f64.exp() - 1.2660658777520082).abs() < 1e-15);
        assert!((i1e(1.0) * 1f64.exp() - 0.5651591039924851).abs() < 1e-15);
        assert_eq!(a2(0.0), 0.0);
        assert!((ln_i0(1e4) - (1e4 + i0e(1e4).ln())).abs() < 1e-12);
    }

    #[test]
    fn continuity_at_switch() {
        let below = i0e(SERIES_LIMIT);
        let above = i0e(SERIES_LIMIT + 1e-12);
        assert!((below - above).abs() < 1e-14);
        assert!((i1e(SERIES_LIMIT) - i1e(SERIES_LIMIT + 1e-12)).abs() < 1e-14);
    }

    #[test]
    fn derivative_matches_finite_difference() {
        for &k in &[1e-3f64, 0.3, 1.0, 4.0, 40.0, 900.0] {
            let h = 1e-6 * k.max(1.0);
            let fd = (a2(k + h) - a2(k - h)) / (2.0 * h);
            assert!((fd - a2_derivative(k)).abs() < 1e-6 * fd.abs().max(1e-3), "k={k}");
        }
    }

    #[test]
    fn solver_residual_and_edges() {
        assert_eq!(solve_kappa(0.0), 0.0);
        assert_eq!(solve_kappa(1.0), KAPPA_MAX);
        for i in 1..200 {
            let r = i as f64 / 200.0 * 0.999;
            let k = solve_kappa(r);
            assert!((a2(k) - r).abs() <= 1e-8, "r={r} k={k}");
        }
    }
}

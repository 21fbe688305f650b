//! Gauss–Legendre quadrature and a fixed-step RK4 integrator for operators.

use crate::error::{Error, Result};
use crate::hilbert::{DenseOperator, KahanSum};
use gauss_quad::GaussLegendre;
use std::num::NonZeroUsize;
use std::sync::OnceLock;

pub const DEFAULT_ORDER: usize = 16;

fn rule16() -> &'static [(f64, f64)] {
    static RULE: OnceLock<Vec<(f64, f64)>> = OnceLock::new();
    RULE.get_or_init(|| nodes(DEFAULT_ORDER))
}

/// Nodes and weights on `[-1, 1]`.
pub fn nodes(order: usize) -> Vec<(f64, f64)> {
    let order = NonZeroUsize::new(order.max(1)).expect("positive order");
    GaussLegendre::new(order).as_node_weight_pairs().to_vec()
}

/// Nodes and weights mapped to `[a, b]` (order 16).
pub fn mapped(a: f64, b: f64) -> Vec<(f64, f64)> {
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    rule16().iter().map(|&(x, w)| (mid + half * x, half * w)).collect()
}

pub fn integrate_scalar(a: f64, b: f64, f: impl Fn(f64) -> f64) -> f64 {
    mapped(a, b).iter().map(|&(x, w)| w * f(x)).sum()
}

/// `∫_a^b f(τ) dτ` for an operator-valued integrand.
pub fn integrate(
    a: f64,
    b: f64,
    n: usize,
    d: usize,
    mut f: impl FnMut(f64) -> Result<DenseOperator>,
) -> Result<DenseOperator> {
    let mut acc = KahanSum::new(n, d);
    for (x, w) in mapped(a, b) {
        acc.add(&f(x)?, w);
    }
    Ok(acc.finish())
}

/// Classical RK4 with `steps` equal steps from `t0` to `t1`; returns the
/// states at every step including the initial one.
pub fn rk4_trajectory(
    y0: &DenseOperator,
    t0: f64,
    t1: f64,
    steps: usize,
    f: impl Fn(f64, &DenseOperator) -> Result<DenseOperator>,
) -> Result<Vec<(f64, DenseOperator)>> {
    if steps == 0 {
        return Err(Error::Step("at least one step required".into()));
    }
    let h = (t1 - t0) / steps as f64;
    let mut out = Vec::with_capacity(steps + 1);
    let mut y = y0.clone();
    out.push((t0, y.clone()));
    for k in 0..steps {
        let t = t0 + k as f64 * h;
        let k1 = f(t, &y)?;
        let k2 = f(t + 0.5 * h, &(&y + &k1.scale_re(0.5 * h)))?;
        let k3 = f(t + 0.5 * h, &(&y + &k2.scale_re(0.5 * h)))?;
        let k4 = f(t + h, &(&y + &k3.scale_re(h)))?;
        let incr = &(&(&k1 + &k2.scale_re(2.0)) + &k3.scale_re(2.0)) + &k4;
        y = &y + &incr.scale_re(h / 6.0);
        if y.matrix().iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::Step(format!("non-finite state at t = {}", t + h)));
        }
        out.push((t + h, y.clone()));
    }
    Ok(out)
}

pub fn rk4(
    y0: &DenseOperator,
    t0: f64,
    t1: f64,
    steps: usize,
    f: impl Fn(f64, &DenseOperator) -> Result<DenseOperator>,
) -> Result<DenseOperator> {
    Ok(rk4_trajectory(y0, t0, t1, steps, f)?.pop().expect("nonempty").1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::c;

    #[test]
    fn polynomial_exactness() {
        let v = integrate_scalar(0.0, 2.0, |x| x.powi(31));
        assert!((v - 2f64.powi(32) / 32.0).abs() / v < 1e-13);
    }

    #[test]
    fn rk4_exponential() {
        let y0 = DenseOperator::identity(1, 2);
        let y = rk4(&y0, 0.0, 1.0, 100, |_, y| Ok(y.scale(c(-1.0)))).unwrap();
        assert!((y.matrix()[(0, 0)].re - (-1f64).exp()).abs() < 1e-9);
    }
}

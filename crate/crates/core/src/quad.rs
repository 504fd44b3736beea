//! Double-exponential (tanh-sinh) quadrature.
//!
//! Every kernel in this crate is a power law with integrable endpoint
//! singularities, which is exactly the case tanh-sinh handles well: nodes
//! cluster doubly-exponentially at the ends. Integrands that care about the
//! singular endpoint receive the distances to both ends, computed without
//! cancellation, so `|x - a|^(-p)` stays accurate down to subnormal distances.

use std::f64::consts::FRAC_PI_2;

use crate::error::{Error, Result};

const T_MAX: f64 = 6.0;

#[derive(Debug, Clone, Copy)]
pub struct TanhSinh {
    pub tol: f64,
    pub max_level: u32,
}

impl Default for TanhSinh {
    fn default() -> Self {
        Self::new(1e-12)
    }
}

impl TanhSinh {
    pub fn new(tol: f64) -> Self {
        Self { tol, max_level: 12 }
    }

    /// `∫_a^b f(x) dx` where `f` is called as `f(x, x - a, b - x)`.
    pub fn integrate_ends<F>(&self, mut f: F, a: f64, b: f64) -> Result<f64>
    where
        F: FnMut(f64, f64, f64) -> f64,
    {
        if !(b > a) {
            if a == b {
                return Ok(0.0);
            }
            return Err(Error::invalid(format!("empty interval [{a}, {b}]")));
        }
        let half = 0.5 * (b - a);
        let width = b - a;

        // Contribution of the node pair at parameter t (or the single centre node at t = 0).
        let mut pair = |t: f64| -> (f64, f64) {
            let u = FRAC_PI_2 * t.sinh();
            let cu = u.cosh();
            let w = half * FRAC_PI_2 * t.cosh() / (cu * cu);
            if t == 0.0 {
                let v = w * f(a + half, half, half);
                return (v, v.abs());
            }
            // distance from the nearer endpoint
            let d = width / (1.0 + (2.0 * u).exp());
            if d <= 0.0 || w == 0.0 {
                return (0.0, 0.0);
            }
            let hi = w * f(b - d, width - d, d);
            let lo = w * f(a + d, d, width - d);
            (hi + lo, hi.abs() + lo.abs())
        };

        let mut h = 1.0;
        let (mut sum, mut l1) = pair(0.0);
        let mut k = 1.0;
        while k * h <= T_MAX {
            let (s, a1) = pair(k * h);
            sum += s;
            l1 += a1;
            k += 1.0;
        }
        let mut prev = sum * h;
        let mut estimate = f64::INFINITY;
        for level in 1..=self.max_level {
            h *= 0.5;
            let mut j = 1.0;
            while j * h <= T_MAX {
                let (s, a1) = pair(j * h);
                sum += s;
                l1 += a1;
                j += 2.0;
            }
            let cur = sum * h;
            if !cur.is_finite() {
                return Err(Error::NonConvergent {
                    what: format!("tanh-sinh integral over [{a}, {b}] (non-finite integrand)"),
                    tol: self.tol,
                    estimate: f64::NAN,
                });
            }
            estimate = (cur - prev).abs();
            if level >= 3 && (estimate <= self.tol * cur.abs() || estimate <= 1e-15 * l1 * h) {
                return Ok(cur);
            }
            prev = cur;
        }
        Err(Error::NonConvergent {
            what: format!("tanh-sinh integral over [{a}, {b}]"),
            tol: self.tol,
            estimate,
        })
    }

    /// `∫_a^b f(x) dx`.
    pub fn integrate<F>(&self, mut f: F, a: f64, b: f64) -> Result<f64>
    where
        F: FnMut(f64) -> f64,
    {
        self.integrate_ends(|x, _, _| f(x), a, b)
    }

    /// `∫_a^∞ f(x) dx`, with `f` called as `f(x, x - a)`.
    ///
    /// `[a, a+1]` is integrated directly and the tail through `x = a + 1/w`.
    /// The integrand must decay faster than `1/x`.
    pub fn integrate_to_inf_ends<F>(&self, mut f: F, a: f64) -> Result<f64>
    where
        F: FnMut(f64, f64) -> f64,
    {
        let head = self.integrate_ends(|x, da, _| f(x, da), a, a + 1.0)?;
        let tail = self.integrate_ends(
            |_, dw, _| {
                let r = 1.0 / dw;
                if !r.is_finite() {
                    return 0.0;
                }
                let v = f(a + r, r);
                if v == 0.0 {
                    0.0
                } else {
                    v * r * r
                }
            },
            0.0,
            1.0,
        )?;
        Ok(head + tail)
    }

    pub fn integrate_to_inf<F>(&self, mut f: F, a: f64) -> Result<f64>
    where
        F: FnMut(f64) -> f64,
    {
        self.integrate_to_inf_ends(|x, _| f(x), a)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_is_exact() {
        let q = TanhSinh::new(1e-14);
        let v = q.integrate(|x| 3.0 * x * x, 0.0, 2.0).unwrap();
        assert!((v - 8.0).abs() < 1e-13, "{v}");
    }

    #[test]
    fn endpoint_power_singularity() {
        // ∫_0^1 x^(-0.9) dx = 10
        let q = TanhSinh::new(1e-12);
        let v = q.integrate_ends(|_, da, _| da.powf(-0.9), 0.0, 1.0).unwrap();
        assert!((v - 10.0).abs() < 1e-9, "{v}");
    }

    #[test]
    fn log_singularity_both_ends() {
        // ∫_0^1 ln(x) ln(1-x) dx = 2 - π²/6
        let q = TanhSinh::new(1e-12);
        let v = q
            .integrate_ends(|_, da, db| da.ln() * db.ln(), 0.0, 1.0)
            .unwrap();
        let exact = 2.0 - std::f64::consts::PI.powi(2) / 6.0;
        assert!((v - exact).abs() < 1e-11, "{v} vs {exact}");
    }

    #[test]
    fn semi_infinite_slow_tail() {
        // ∫_1^∞ x^(-1.2) dx = 5
        let q = TanhSinh::new(1e-12);
        let v = q.integrate_to_inf(|x| x.powf(-1.2), 1.0).unwrap();
        assert!((v - 5.0).abs() < 1e-9, "{v}");
    }

    #[test]
    fn gaussian_half_line() {
        let q = TanhSinh::new(1e-13);
        let v = q.integrate_to_inf(|x| (-x * x).exp(), 0.0).unwrap();
        let exact = 0.5 * std::f64::consts::PI.sqrt();
        assert!((v - exact).abs() < 1e-12, "{v}");
    }

    #[test]
    fn nan_integrand_is_reported() {
        let q = TanhSinh::new(1e-12);
        assert!(matches!(
            q.integrate(|_| f64::NAN, 0.0, 1.0),
            Err(Error::NonConvergent { .. })
        ));
    }
}

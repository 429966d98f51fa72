//! Coefficients of the q-step backward difference formula, the discrete time
//! derivative and the extrapolation used by the linearly implicit schemes.
//!
//! With generating polynomials
//!
//! ```text
//! δ(ζ) = Σ_{ℓ=1}^{q} (1/ℓ)(1 − ζ)^ℓ        γ(ζ) = (1 − (1 − ζ)^q)/ζ
//! ```
//!
//! the discrete derivative is `(1/τ) Σ_j δ_j u^{n−j}` and the extrapolation
//! is `Σ_j γ_j u^{n−1−j}`.

use crate::error::{Error, Result};

pub use crate::flow_solver::startup_cascade;

pub const MAX_ORDER: usize = 5;

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

fn expand(q: usize) -> (Vec<f64>, Vec<f64>) {
    let sign = |j: usize| if j % 2 == 0 { 1.0 } else { -1.0 };
    let delta = (0..=q)
        .map(|j| {
            (j.max(1)..=q)
                .map(|l| binomial(l, j) / l as f64)
                .sum::<f64>()
                * sign(j)
        })
        .collect();
    let gamma = (0..q).map(|j| sign(j) * binomial(q, j + 1)).collect();
    (delta, gamma)
}

/// `(δ_0..δ_q, γ_0..γ_{q−1})` for `1 ≤ q ≤ 5`.
pub fn coefficients(q: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    if !(1..=MAX_ORDER).contains(&q) {
        return Err(Error::BdfOrder(q));
    }
    Ok(expand(q))
}

#[derive(Clone, Debug, PartialEq)]
pub struct BdfScheme {
    pub q: usize,
    pub delta: Vec<f64>,
    pub gamma: Vec<f64>,
    pub tau: f64,
}

impl BdfScheme {
    pub fn new(q: usize, tau: f64) -> Result<Self> {
        Self::with_override(q, tau, false)
    }

    /// `allow_order_six` admits q = 6, which is A(θ)-stable but not covered
    /// by the convergence theory.
    pub fn with_override(q: usize, tau: f64, allow_order_six: bool) -> Result<Self> {
        if !(tau > 0.0 && tau.is_finite()) {
            return Err(Error::InvalidConfig(format!("time step {tau} must be positive")));
        }
        let (delta, gamma) = if q == 6 && allow_order_six {
            expand(6)
        } else {
            coefficients(q)?
        };
        Ok(Self { q, delta, gamma, tau })
    }

    pub fn delta0(&self) -> f64 {
        self.delta[0]
    }

    /// `Σ_{j≥1} δ_j u^{n−j}` where `past[j−1] = u^{n−j}`.
    pub fn history_sum(&self, past: &[&[f64]]) -> Result<Vec<f64>> {
        check_history(past, self.q)?;
        let mut out = vec![0.0; past[0].len()];
        for (d, u) in self.delta[1..].iter().zip(past) {
            for (o, v) in out.iter_mut().zip(u.iter()) {
                *o += d * v;
            }
        }
        Ok(out)
    }
}

fn check_history(values: &[&[f64]], needed: usize) -> Result<()> {
    if values.len() < needed {
        return Err(Error::InsufficientHistory {
            needed,
            got: values.len(),
        });
    }
    if let Some(first) = values.first() {
        if values.iter().any(|v| v.len() != first.len()) {
            return Err(Error::DimensionMismatch {
                expected: first.len(),
                got: values.iter().map(|v| v.len()).find(|&l| l != first.len()).unwrap_or(0),
            });
        }
    }
    Ok(())
}

/// `(1/τ) Σ_{j=0}^{q} δ_j u^{n−j}` with `values[j] = u^{n−j}`.
pub fn discrete_derivative(values: &[&[f64]], delta: &[f64], tau: f64) -> Result<Vec<f64>> {
    check_history(values, delta.len())?;
    let mut out = vec![0.0; values[0].len()];
    for (d, u) in delta.iter().zip(values) {
        for (o, v) in out.iter_mut().zip(u.iter()) {
            *o += d * v;
        }
    }
    out.iter_mut().for_each(|o| *o /= tau);
    Ok(out)
}

/// `Σ_{j=0}^{q−1} γ_j u^{n−1−j}` with `values[j] = u^{n−1−j}`.
pub fn extrapolate(values: &[&[f64]], gamma: &[f64]) -> Result<Vec<f64>> {
    check_history(values, gamma.len())?;
    let mut out = vec![0.0; values[0].len()];
    for (g, u) in gamma.iter().zip(values) {
        for (o, v) in out.iter_mut().zip(u.iter()) {
            *o += g * v;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    // classical BDF tables
    fn reference_delta(q: usize) -> Vec<f64> {
        match q {
            1 => vec![1.0, -1.0],
            2 => vec![1.5, -2.0, 0.5],
            3 => vec![11.0 / 6.0, -3.0, 1.5, -1.0 / 3.0],
            4 => vec![25.0 / 12.0, -4.0, 3.0, -4.0 / 3.0, 0.25],
            5 => vec![137.0 / 60.0, -5.0, 5.0, -10.0 / 3.0, 1.25, -0.2],
            _ => unreachable!(),
        }
    }

    fn reference_gamma(q: usize) -> Vec<f64> {
        match q {
            1 => vec![1.0],
            2 => vec![2.0, -1.0],
            3 => vec![3.0, -3.0, 1.0],
            4 => vec![4.0, -6.0, 4.0, -1.0],
            5 => vec![5.0, -10.0, 10.0, -5.0, 1.0],
            _ => unreachable!(),
        }
    }

    #[test]
    fn tables() {
        for q in 1..=5 {
            let (d, g) = coefficients(q).unwrap();
            for (a, b) in d.iter().zip(reference_delta(q)) {
                assert!((a - b).abs() < 1e-14, "q={q}");
            }
            assert_eq!(g, reference_gamma(q));
            assert!(d.iter().sum::<f64>().abs() < 1e-14);
            assert!((g.iter().sum::<f64>() - 1.0).abs() < 1e-14);
            assert!(d[0] > 0.0);
        }
    }

    #[test]
    fn order_range() {
        assert!(matches!(coefficients(0), Err(Error::BdfOrder(0))));
        assert!(matches!(coefficients(6), Err(Error::BdfOrder(6))));
        assert!(BdfScheme::new(6, 0.1).is_err());
        assert_eq!(BdfScheme::with_override(6, 0.1, true).unwrap().delta.len(), 7);
        assert!(BdfScheme::new(2, 0.0).is_err());
    }

    #[test]
    fn derivative_examples() {
        let (d, _) = coefficients(2).unwrap();
        let c = [4.2];
        assert!(discrete_derivative(&[&c, &c, &c], &d, 0.1).unwrap()[0].abs() < 1e-13);
        let tau = 0.1;
        let t = |n: f64| [n * tau];
        let lin = discrete_derivative(&[&t(10.0), &t(9.0), &t(8.0)], &d, tau).unwrap();
        assert!((lin[0] - 1.0).abs() < 1e-13);
        let sq = |s: f64| [s * s];
        let quad = discrete_derivative(&[&sq(1.0), &sq(0.9), &sq(0.8)], &d, tau).unwrap();
        assert!((quad[0] - 2.0).abs() < 1e-13);
    }

    #[test]
    fn extrapolation_examples() {
        let (_, g) = coefficients(2).unwrap();
        let c = [-1.5, 2.0];
        assert_eq!(extrapolate(&[&c, &c], &g).unwrap(), c.to_vec());
        let e = extrapolate(&[&[0.9], &[0.8]], &g).unwrap();
        assert!((e[0] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn insufficient_history() {
        let (d, g) = coefficients(3).unwrap();
        let a = [1.0];
        assert!(matches!(
            discrete_derivative(&[&a, &a], &d, 1.0),
            Err(Error::InsufficientHistory { needed: 4, got: 2 })
        ));
        assert!(extrapolate(&[&a], &g).is_err());
    }

    #[test]
    fn polynomial_exactness() {
        let tau = 0.037;
        let tn = 1.3;
        for q in 1..=5 {
            let (d, g) = coefficients(q).unwrap();
            for deg in 0..=q {
                let f = |t: f64| t.powi(deg as i32) + 0.5;
                let df = |t: f64| if deg == 0 { 0.0 } else { deg as f64 * t.powi(deg as i32 - 1) };
                let vals: Vec<[f64; 1]> = (0..=q).map(|j| [f(tn - j as f64 * tau)]).collect();
                let refs: Vec<&[f64]> = vals.iter().map(|v| &v[..]).collect();
                let dd = discrete_derivative(&refs, &d, tau).unwrap()[0];
                assert!((dd - df(tn)).abs() < 1e-9, "q={q} deg={deg}: {dd} vs {}", df(tn));
                if deg < q {
                    let ex = extrapolate(&refs[1..], &g).unwrap()[0];
                    assert!((ex - f(tn)).abs() < 1e-11, "q={q} deg={deg}");
                }
            }
        }
    }

    #[test]
    fn extrapolation_slope_for_smooth_data() {
        let (_, g) = coefficients(2).unwrap();
        let err = |tau: f64| {
            let tn = 1.0f64;
            let a = [(tn - tau).sin()];
            let b = [(tn - 2.0 * tau).sin()];
            (extrapolate(&[&a, &b], &g).unwrap()[0] - tn.sin()).abs()
        };
        let slope = (err(0.01) / err(0.005)).log2();
        assert!((slope - 2.0).abs() < 0.05, "slope {slope}");
    }
}

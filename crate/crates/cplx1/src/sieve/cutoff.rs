//! The smooth cutoff χ, its Fourier representation φ, and the sieve constant c_{χ,2}.
//!
//! φ is normalised so that χ(x) = ∫ φ(ξ) e^{−(1+iξ)x} dξ for every real x,
//! i.e. φ is the Fourier transform of e^x χ(x) with a 1/2π factor.

use num_complex::Complex64;
use serde::Serialize;
use std::f64::consts::PI;

use crate::error::{Error, Result};

/// χ(x) = 1_{(−1,1)}(x) e^{x+1} e^{−1/(1−x²)}.
pub fn chi(x: f64) -> f64 {
    if x.abs() >= 1.0 {
        return 0.0;
    }
    (x + 1.0 - 1.0 / (1.0 - x * x)).exp()
}

/// χ′(x) = χ(x)(1 − 2x/(1−x²)²) on (−1,1), zero elsewhere.
pub fn chi_derivative(x: f64) -> f64 {
    if x.abs() >= 1.0 {
        return 0.0;
    }
    let q = 1.0 - x * x;
    chi(x) * (1.0 - 2.0 * x / (q * q))
}

/// Quadrature resolution for the ξ-integrals.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct Quadrature {
    /// interior nodes for the transform over [−1,1]
    pub x_nodes: usize,
    /// ξ-grid half-width
    pub xi_max: f64,
    /// ξ-grid step
    pub xi_step: f64,
    /// Simpson intervals for ∫₀¹ χ′²
    pub simpson_intervals: usize,
}

impl Default for Quadrature {
    fn default() -> Self {
        Quadrature {
            x_nodes: 4000,
            xi_max: 300.0,
            xi_step: 0.25,
            simpson_intervals: 20000,
        }
    }
}

impl Quadrature {
    pub fn refined(&self) -> Self {
        Quadrature {
            x_nodes: self.x_nodes * 2,
            xi_max: self.xi_max * 1.25,
            xi_step: self.xi_step / 2.0,
            simpson_intervals: self.simpson_intervals * 2,
        }
    }
}

/// φ sampled on the uniform grid −ξ_max + kh.
#[derive(Clone, Debug)]
pub struct PhiGrid {
    pub xi0: f64,
    pub step: f64,
    pub values: Vec<Complex64>,
}

impl PhiGrid {
    pub fn new(q: &Quadrature) -> Self {
        let n = (2.0 * q.xi_max / q.xi_step).round() as usize + 1;
        let xi0 = -q.xi_max;
        let values = (0..n)
            .map(|k| phi(xi0 + k as f64 * q.xi_step, q.x_nodes))
            .collect();
        PhiGrid {
            xi0,
            step: q.xi_step,
            values,
        }
    }

    pub fn xi(&self, k: usize) -> f64 {
        self.xi0 + k as f64 * self.step
    }
}

/// φ(ξ) = (1/2π) ∫_{−1}^{1} e^x χ(x) e^{iξx} dx (trapezoid, endpoints vanish to all orders).
pub fn phi(xi: f64, nodes: usize) -> Complex64 {
    let h = 2.0 / (nodes + 1) as f64;
    let mut acc = Complex64::new(0.0, 0.0);
    let rot = Complex64::from_polar(1.0, xi * h);
    let mut e = Complex64::from_polar(1.0, -xi);
    for k in 1..=nodes {
        e *= rot;
        if k % 256 == 0 {
            // re-anchor the rotation to keep drift negligible
            e = Complex64::from_polar(1.0, xi * (-1.0 + k as f64 * h));
        }
        let x = -1.0 + k as f64 * h;
        acc += e * (x.exp() * chi(x));
    }
    acc * (h / (2.0 * PI))
}

/// ∬ (1+iξ)(1+iξ′)/(2+i(ξ+ξ′)) φ(ξ)φ(ξ′) dξ dξ′ on the grid.
pub fn c2_double_integral(q: &Quadrature) -> Complex64 {
    let g = PhiGrid::new(q);
    let n = g.values.len();
    let w: Vec<Complex64> = (0..n)
        .map(|k| Complex64::new(1.0, g.xi(k)) * g.values[k])
        .collect();
    let mut total = Complex64::new(0.0, 0.0);
    for s in 0..(2 * n - 1) {
        let lo = s.saturating_sub(n - 1);
        let hi = s.min(n - 1);
        let mut c = Complex64::new(0.0, 0.0);
        for k in lo..=hi {
            c += w[k] * w[s - k];
        }
        let sum_xi = 2.0 * g.xi0 + s as f64 * g.step;
        total += c / Complex64::new(2.0, sum_xi);
    }
    total * (g.step * g.step)
}

/// ∫₀¹ χ′(x)² dx by composite Simpson.
pub fn c2_derivative_integral(intervals: usize) -> f64 {
    let n = intervals + intervals % 2;
    let h = 1.0 / n as f64;
    let f = |x: f64| chi_derivative(x).powi(2);
    let mut s = f(0.0) + f(1.0);
    for k in 1..n {
        s += if k % 2 == 1 { 4.0 } else { 2.0 } * f(k as f64 * h);
    }
    s * h / 3.0
}

#[derive(Clone, Debug, Serialize)]
pub struct C2Report {
    pub double_integral: f64,
    pub double_integral_imag: f64,
    pub derivative_integral: f64,
    pub difference: f64,
    pub quadrature: Quadrature,
}

/// Both evaluations of c_{χ,2}; each is checked against a refined run.
pub fn sieve_factor_c2(q: &Quadrature) -> Result<C2Report> {
    let tol = 1e-6;
    let d1 = c2_double_integral(q);
    let d2 = c2_double_integral(&q.refined());
    if (d1 - d2).norm() > tol {
        return Err(Error::Budget(format!(
            "double integral not converged: {d1} vs {d2}"
        )));
    }
    let e1 = c2_derivative_integral(q.simpson_intervals);
    let e2 = c2_derivative_integral(2 * q.simpson_intervals);
    if (e1 - e2).abs() > tol {
        return Err(Error::Budget("derivative integral not converged".into()));
    }
    if e2 <= 0.0 {
        return Err(Error::Certification("c_{chi,2} must be positive".into()));
    }
    Ok(C2Report {
        double_integral: d2.re,
        double_integral_imag: d2.im,
        derivative_integral: e2,
        difference: (d2.re - e2).abs(),
        quadrature: *q,
    })
}

/// c_{χ,2} = ∫₀¹ χ′², the fast route.
pub fn c_chi2() -> f64 {
    c2_derivative_integral(40000)
}

/// max over the grid u_k = log m / log R of |χ(u) − ∫_{−L}^{L} m^{−(1+iξ)/log R} φ(ξ) dξ|.
pub fn truncation_error(grid: &PhiGrid, l: f64, us: &[f64]) -> f64 {
    let mut worst: f64 = 0.0;
    for &u in us {
        let mut acc = Complex64::new(0.0, 0.0);
        for (k, v) in grid.values.iter().enumerate() {
            let xi = grid.xi(k);
            if xi.abs() > l + 1e-12 {
                continue;
            }
            let w = if (xi.abs() - l).abs() < 1e-9 {
                0.5
            } else {
                1.0
            };
            acc += v * Complex64::from_polar((-u).exp(), -xi * u) * w;
        }
        let approx = acc.re * grid.step;
        worst = worst.max((approx - chi(u)).abs());
    }
    worst
}

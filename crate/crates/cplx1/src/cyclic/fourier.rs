//! Functions on Z_M and their Fourier transforms.
//!
//! f̂(r) = E_x f(x) e(−xr/M),  f(x) = Σ_r f̂(r) e(xr/M),  (f∗g)(x) = E_y f(y) g(x−y).

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::Serialize;

use crate::error::{invalid, Result};

/// Real function on Z_M.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CyclicFn {
    pub m: u64,
    pub values: Vec<f64>,
}

impl CyclicFn {
    pub fn new(m: u64, values: Vec<f64>) -> Result<Self> {
        if m == 0 || values.len() as u64 != m {
            return invalid(format!("expected {m} values, got {}", values.len()));
        }
        Ok(CyclicFn { m, values })
    }

    pub fn zeros(m: u64) -> Self {
        CyclicFn {
            m,
            values: vec![0.0; m as usize],
        }
    }

    pub fn constant(m: u64, c: f64) -> Self {
        CyclicFn {
            m,
            values: vec![c; m as usize],
        }
    }

    pub fn from_fn(m: u64, f: impl FnMut(u64) -> f64) -> Self {
        CyclicFn {
            m,
            values: (0..m).map(f).collect(),
        }
    }

    /// f̃(n) = f(n + ℓM): place an integer-supported function into Z_M.
    /// Fails when two support points collide mod M.
    pub fn wrap(m: u64, support: &[(i64, f64)]) -> Result<Self> {
        let mut values = vec![0.0; m as usize];
        let mut seen = vec![false; m as usize];
        for &(n, v) in support {
            let x = n.rem_euclid(m as i64) as usize;
            if seen[x] {
                return invalid(format!("support point {n} collides modulo {m}"));
            }
            seen[x] = true;
            values[x] = v;
        }
        Ok(CyclicFn { m, values })
    }

    pub fn indicator(m: u64, set: &[u64]) -> Self {
        let mut f = Self::zeros(m);
        for &x in set {
            f.values[(x % m) as usize] = 1.0;
        }
        f
    }

    pub fn at(&self, x: i64) -> f64 {
        self.values[x.rem_euclid(self.m as i64) as usize]
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.m as f64
    }

    pub fn mean_square(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>() / self.m as f64
    }

    pub fn sub(&self, other: &CyclicFn) -> Result<CyclicFn> {
        same_modulus(self.m, other.m)?;
        Ok(CyclicFn {
            m: self.m,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a - b)
                .collect(),
        })
    }

    pub fn scale(&self, c: f64) -> CyclicFn {
        CyclicFn {
            m: self.m,
            values: self.values.iter().map(|v| v * c).collect(),
        }
    }

    /// x ↦ f(x + a)
    pub fn shift(&self, a: i64) -> CyclicFn {
        CyclicFn::from_fn(self.m, |x| self.at(x as i64 + a))
    }
}

fn same_modulus(a: u64, b: u64) -> Result<()> {
    if a != b {
        return invalid(format!("modulus mismatch: {a} vs {b}"));
    }
    Ok(())
}

/// f̂ on Z_M.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Spectrum {
    pub m: u64,
    #[serde(serialize_with = "ser_complex")]
    pub coeffs: Vec<Complex64>,
}

fn ser_complex<S: serde::Serializer>(
    v: &[Complex64],
    s: S,
) -> std::result::Result<S::Ok, S::Error> {
    use serde::ser::SerializeSeq;
    let mut seq = s.serialize_seq(Some(v.len()))?;
    for z in v {
        seq.serialize_element(&[z.re, z.im])?;
    }
    seq.end()
}

impl Spectrum {
    pub fn at(&self, r: i64) -> Complex64 {
        self.coeffs[r.rem_euclid(self.m as i64) as usize]
    }

    /// Σ_r |f̂(r)|²
    pub fn energy(&self) -> f64 {
        self.coeffs.iter().map(|z| z.norm_sqr()).sum()
    }

    /// {r : |f̂(r)| ≥ ε}
    pub fn large(&self, eps: f64) -> Vec<u64> {
        (0..self.m)
            .filter(|&r| self.coeffs[r as usize].norm() >= eps)
            .collect()
    }
}

/// Chirp-z plan for a length-M forward transform Σ_n x_n e^{−2πi nk/M}.
struct Bluestein {
    m: usize,
    len: usize,
    chirp: Vec<Complex64>,
    kernel_hat: Vec<Complex64>,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl Bluestein {
    fn new(m: usize) -> Self {
        let len = (2 * m - 1).next_power_of_two();
        let two_m = 2 * m as u128;
        let chirp: Vec<Complex64> = (0..m)
            .map(|n| {
                let k = (n as u128 * n as u128) % two_m;
                Complex64::from_polar(1.0, -PI * k as f64 / m as f64)
            })
            .collect();
        let mut planner = FftPlanner::new();
        let fwd = planner.plan_fft_forward(len);
        let inv = planner.plan_fft_inverse(len);
        let mut kernel = vec![Complex64::new(0.0, 0.0); len];
        kernel[0] = chirp[0].conj();
        for n in 1..m {
            kernel[n] = chirp[n].conj();
            kernel[len - n] = chirp[n].conj();
        }
        fwd.process(&mut kernel);
        Bluestein {
            m,
            len,
            chirp,
            kernel_hat: kernel,
            fwd,
            inv,
        }
    }

    fn forward(&self, x: &[Complex64]) -> Vec<Complex64> {
        let mut a = vec![Complex64::new(0.0, 0.0); self.len];
        for n in 0..self.m {
            a[n] = x[n] * self.chirp[n];
        }
        self.fwd.process(&mut a);
        for (u, k) in a.iter_mut().zip(&self.kernel_hat) {
            *u *= k;
        }
        self.inv.process(&mut a);
        let s = 1.0 / self.len as f64;
        (0..self.m).map(|k| a[k] * self.chirp[k] * s).collect()
    }
}

fn plan(m: u64) -> Arc<Bluestein> {
    static CACHE: OnceLock<Mutex<HashMap<u64, Arc<Bluestein>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut g = cache.lock().unwrap();
    if g.len() > 64 {
        g.clear();
    }
    g.entry(m)
        .or_insert_with(|| Arc::new(Bluestein::new(m as usize)))
        .clone()
}

/// Σ_n x_n e^{−2πi nk/M} for complex input.
pub fn fft_raw(x: &[Complex64]) -> Vec<Complex64> {
    if x.len() <= 1 {
        return x.to_vec();
    }
    plan(x.len() as u64).forward(x)
}

pub fn dft(f: &CyclicFn) -> Spectrum {
    let x: Vec<Complex64> = f.values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    let s = 1.0 / f.m as f64;
    Spectrum {
        m: f.m,
        coeffs: fft_raw(&x).into_iter().map(|z| z * s).collect(),
    }
}

/// Σ_r F(r) e(xr/M), complex valued.
pub fn idft_complex(spec: &Spectrum) -> Vec<Complex64> {
    let conj: Vec<Complex64> = spec.coeffs.iter().map(|z| z.conj()).collect();
    fft_raw(&conj).into_iter().map(|z| z.conj()).collect()
}

/// Real part of the inverse transform.
pub fn idft(spec: &Spectrum) -> CyclicFn {
    CyclicFn {
        m: spec.m,
        values: idft_complex(spec).into_iter().map(|z| z.re).collect(),
    }
}

/// O(M²) reference transform.
pub fn dft_direct(f: &CyclicFn) -> Spectrum {
    let m = f.m;
    let coeffs = (0..m)
        .map(|r| {
            let mut acc = Complex64::new(0.0, 0.0);
            for x in 0..m {
                let k = (x as u128 * r as u128 % m as u128) as f64;
                acc += Complex64::from_polar(f.values[x as usize], -2.0 * PI * k / m as f64);
            }
            acc / m as f64
        })
        .collect();
    Spectrum { m, coeffs }
}

pub fn convolve(f: &CyclicFn, g: &CyclicFn) -> Result<CyclicFn> {
    same_modulus(f.m, g.m)?;
    let (a, b) = (dft(f), dft(g));
    let prod = Spectrum {
        m: f.m,
        coeffs: a.coeffs.iter().zip(&b.coeffs).map(|(x, y)| x * y).collect(),
    };
    Ok(idft(&prod))
}

/// (Σ_r |f̂(r)|⁴)^{1/4}
pub fn u2_norm(f: &CyclicFn) -> f64 {
    dft(f)
        .coeffs
        .iter()
        .map(|z| z.norm_sqr().powi(2))
        .sum::<f64>()
        .max(0.0)
        .powf(0.25)
}

/// E_{x,h1,h2} f(x)f(x+h1)f(x+h2)f(x+h1+h2), by direct triple sum.
pub fn u2_fourth_direct(f: &CyclicFn) -> f64 {
    let m = f.m as usize;
    let v = &f.values;
    let mut total = 0.0;
    for h1 in 0..m {
        for h2 in 0..m {
            let mut s = 0.0;
            for x in 0..m {
                s += v[x] * v[(x + h1) % m] * v[(x + h2) % m] * v[(x + h1 + h2) % m];
            }
            total += s;
        }
    }
    total / (m as f64).powi(3)
}

//! Bohr sets B(Γ, δ) = {x ∈ Z_M : ‖xr/M‖ ≤ δ ∀ r ∈ Γ}, dilates and regularity.

use std::sync::Arc;

use serde::Serialize;

use crate::error::{invalid, Error, Result};

const EPS: f64 = 1e-9;

/// max_r min(xr mod M, M − xr mod M) for every x ∈ Z_M, with a sorted copy.
#[derive(Debug)]
struct Widths {
    by_x: Vec<u32>,
    sorted: Vec<u32>,
}

impl Widths {
    fn new(m: u64, gamma: &[u64]) -> Self {
        let mut by_x = vec![0u32; m as usize];
        for &r in gamma {
            let r = r % m;
            if r == 0 {
                continue;
            }
            let mut v = 0u64;
            for w in by_x.iter_mut() {
                let d = v.min(m - v) as u32;
                if d > *w {
                    *w = d;
                }
                v += r;
                if v >= m {
                    v -= m;
                }
            }
        }
        let mut sorted = by_x.clone();
        sorted.sort_unstable();
        Widths { by_x, sorted }
    }

    /// #{x : w(x) ≤ bound}
    fn count_le(&self, bound: f64) -> usize {
        self.sorted.partition_point(|&w| w as f64 <= bound + EPS)
    }

    /// #{x : w(x) < bound}
    fn count_lt(&self, bound: f64) -> usize {
        self.sorted.partition_point(|&w| (w as f64) < bound - EPS)
    }
}

#[derive(Clone, Debug)]
pub struct BohrSet {
    m: u64,
    gamma: Vec<u64>,
    delta: f64,
    widths: Arc<Widths>,
    elements: Vec<u64>,
}

#[derive(Serialize)]
struct BohrJson<'a> {
    #[serde(rename = "M")]
    m: u64,
    gamma: &'a [u64],
    delta: f64,
    elements_count: usize,
    regular: bool,
}

impl Serialize for BohrSet {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        BohrJson {
            m: self.m,
            gamma: &self.gamma,
            delta: self.delta,
            elements_count: self.len(),
            regular: self.is_regular(),
        }
        .serialize(s)
    }
}

impl BohrSet {
    pub fn new(m: u64, gamma: &[u64], delta: f64) -> Result<Self> {
        if m == 0 {
            return invalid("modulus must be positive");
        }
        if !(delta > 0.0 && delta <= 0.5 + EPS) {
            return invalid(format!("radius {delta} outside (0, 1/2]"));
        }
        let mut g: Vec<u64> = gamma.iter().map(|r| r % m).collect();
        g.sort_unstable();
        g.dedup();
        let widths = Arc::new(Widths::new(m, &g));
        Ok(Self::with_widths(m, g, delta, widths))
    }

    fn with_widths(m: u64, gamma: Vec<u64>, delta: f64, widths: Arc<Widths>) -> Self {
        let bound = delta * m as f64 + EPS;
        let elements = (0..m)
            .filter(|&x| widths.by_x[x as usize] as f64 <= bound)
            .collect();
        BohrSet {
            m,
            gamma,
            delta,
            widths,
            elements,
        }
    }

    pub fn modulus(&self) -> u64 {
        self.m
    }

    pub fn gamma(&self) -> &[u64] {
        &self.gamma
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// d = |Γ|
    pub fn dim(&self) -> usize {
        self.gamma.len()
    }

    pub fn elements(&self) -> &[u64] {
        &self.elements
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn contains(&self, x: i64) -> bool {
        let x = x.rem_euclid(self.m as i64) as usize;
        self.widths.by_x[x] as f64 <= self.delta * self.m as f64 + EPS
    }

    /// max_r ‖xr/M‖ · M
    pub fn width(&self, x: i64) -> u32 {
        self.widths.by_x[x.rem_euclid(self.m as i64) as usize]
    }

    /// Elements as centred representatives in (−M/2, M/2].
    pub fn centred(&self) -> Vec<i64> {
        let m = self.m as i64;
        let mut v: Vec<i64> = self
            .elements
            .iter()
            .map(|&x| {
                if 2 * x as i64 > m {
                    x as i64 - m
                } else {
                    x as i64
                }
            })
            .collect();
        v.sort_unstable();
        v
    }

    /// B_{|ρ} = B(Γ, ρδ); radii above 1/2 are clamped (the set is then Z_M).
    pub fn dilate(&self, rho: f64) -> Result<BohrSet> {
        if rho <= 0.0 {
            return invalid("dilation factor must be positive");
        }
        Ok(Self::with_widths(
            self.m,
            self.gamma.clone(),
            (rho * self.delta).min(0.5),
            self.widths.clone(),
        ))
    }

    /// |B_{|ρ}| without materialising it.
    pub fn dilate_len(&self, rho: f64) -> usize {
        self.widths.count_le(rho * self.delta * self.m as f64)
    }

    /// B′ ≤_ρ B, i.e. B′ ⊆ B_{|ρ}.
    pub fn is_within(&self, other: &BohrSet, rho: f64) -> bool {
        let bound = rho * other.delta * other.m as f64;
        other.m == self.m
            && self
                .elements
                .iter()
                .all(|&x| other.widths.by_x[x as usize] as f64 <= bound + EPS)
    }

    /// (1−2⁶ρd)|B| ≤ |B_{|1±ρ}| ≤ (1+2⁶ρd)|B| for every 0 < ρ ≤ 2⁻⁶/d.
    ///
    /// Both sides are step functions of ρ, so it suffices to test the left end
    /// of every step, i.e. the widths of points near the boundary.
    pub fn is_regular(&self) -> bool {
        self.regularity_violation().is_none()
    }

    /// The first ρ at which regularity fails, if any.
    pub fn regularity_violation(&self) -> Option<f64> {
        let d = self.dim();
        if d == 0 || self.len() as u64 == self.m {
            return None;
        }
        let t = self.delta * self.m as f64;
        let size = self.len() as f64;
        let rho_max = 1.0 / (64.0 * d as f64);
        let s = &self.widths.sorted;
        // upper side: widths w ∈ (T, T(1+ρmax)]
        let lo = s.partition_point(|&w| w as f64 <= t + EPS);
        for &w in &s[lo..] {
            let w = w as f64;
            if w > t * (1.0 + rho_max) + EPS {
                break;
            }
            let rho = w / t - 1.0;
            let count = self.widths.count_le(w) as f64;
            if count > (1.0 + 64.0 * rho * d as f64) * size + 1e-9 {
                return Some(rho);
            }
        }
        // lower side: widths w ∈ (T(1−ρmax), T]; just above ρ = 1 − w/T the count is #{< w}
        let start = s.partition_point(|&w| (w as f64) <= t * (1.0 - rho_max) + EPS);
        let end = self.widths.count_le(t);
        let mut prev = None;
        for &w in &s[start..end] {
            if prev == Some(w) {
                continue;
            }
            prev = Some(w);
            let wf = w as f64;
            let rho = (1.0 - wf / t).max(0.0);
            let count = self.widths.count_lt(wf) as f64;
            if count < (1.0 - 64.0 * rho * d as f64) * size - 1e-9 {
                return Some(rho);
            }
        }
        None
    }

    /// Some B_{|c} with c ∈ [1/2, 1] that is regular, preferring c close to 1.
    pub fn find_regular_dilate(&self) -> Result<(f64, BohrSet)> {
        if self.is_regular() {
            return Ok((1.0, self.clone()));
        }
        let t = self.delta * self.m as f64;
        // distinct widths in [T/2, T] split [1/2, 1] into intervals of constant B_{|c}
        let s = &self.widths.sorted;
        let a = s.partition_point(|&w| (w as f64) < t / 2.0 - EPS);
        let b = self.widths.count_le(t);
        let mut cuts: Vec<f64> = s[a..b].iter().map(|&w| w as f64 / t).collect();
        cuts.dedup();
        cuts.push(0.5);
        cuts.push(1.0);
        cuts.sort_by(|x, y| y.partial_cmp(x).unwrap());
        cuts.dedup();
        let mut candidates = Vec::with_capacity(2 * cuts.len());
        for k in 0..cuts.len() {
            candidates.push(cuts[k]);
            if k + 1 < cuts.len() {
                candidates.push(0.5 * (cuts[k] + cuts[k + 1]));
            }
        }
        for c in candidates {
            if !(0.5 - EPS..=1.0 + EPS).contains(&c) {
                continue;
            }
            let cand = Self::with_widths(
                self.m,
                self.gamma.clone(),
                c * self.delta,
                self.widths.clone(),
            );
            if cand.is_regular() {
                return Ok((c, cand));
            }
        }
        Err(Error::Certification(format!(
            "no regular dilate in [1/2, 1] for M = {}, Γ = {:?}, δ = {}",
            self.m, self.gamma, self.delta
        )))
    }
}

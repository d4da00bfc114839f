use serde::Serialize;

use super::C64;
use crate::error::{Error, Result};
use crate::grid::GridFunction;
use crate::system::PERIOD;

/// Fourier modes `f̂_s(x) = ∫_0^{2π} f(x,t) e^{−ist} dt`, `|s| ≤ s_max`,
/// sampled at `xs` with quadrature weights `wx`.
#[derive(Debug, Clone, Serialize)]
pub struct FourierField {
    pub n: usize,
    pub s_max: usize,
    pub xs: Vec<f64>,
    pub wx: Vec<f64>,
    /// `modes[s + s_max][j * nx + i]`.
    #[serde(skip)]
    pub modes: Vec<Vec<C64>>,
}

impl FourierField {
    pub fn zeros(n: usize, s_max: usize, xs: Vec<f64>, wx: Vec<f64>) -> Self {
        let len = n * xs.len();
        FourierField {
            n,
            s_max,
            xs,
            wx,
            modes: vec![vec![C64::new(0.0, 0.0); len]; 2 * s_max + 1],
        }
    }

    /// Trapezoid mode integrals of `f(j, x, t)` from `nt` samples per period.
    pub fn from_fn<F>(n: usize, s_max: usize, xs: Vec<f64>, wx: Vec<f64>, nt: usize, f: F) -> Result<Self>
    where
        F: Fn(usize, f64, f64) -> f64,
    {
        if 2 * s_max >= nt {
            return Err(Error::Aliasing { s_max, nt });
        }
        let mut out = FourierField::zeros(n, s_max, xs, wx);
        let dt = PERIOD / nt as f64;
        for j in 0..n {
            for i in 0..out.nx() {
                let x = out.xs[i];
                let samples: Vec<f64> = (0..nt).map(|k| f(j, x, dt * k as f64)).collect();
                out.fill_node(j, i, &samples);
            }
        }
        Ok(out)
    }

    /// Trapezoid mode integrals from uniform samples over one period.
    fn fill_node(&mut self, j: usize, i: usize, samples: &[f64]) {
        let nx = self.nx();
        let dt = PERIOD / samples.len() as f64;
        for s in -(self.s_max as i64)..=self.s_max as i64 {
            let v: C64 = samples
                .iter()
                .enumerate()
                .map(|(k, &y)| y * C64::from_polar(1.0, -(s as f64) * dt * k as f64))
                .sum();
            self.modes[(s + self.s_max as i64) as usize][j * nx + i] = v * dt;
        }
    }

    /// Field whose only modes are the given ones; `modes(s)` returns the
    /// nodal vector for `s ≥ 0`, and negative modes are conjugates.
    pub fn from_modes_fn<F>(n: usize, s_max: usize, xs: Vec<f64>, wx: Vec<f64>, modes: F) -> Self
    where
        F: Fn(i64) -> Vec<C64>,
    {
        let mut out = FourierField::zeros(n, s_max, xs, wx);
        for s in 0..=s_max as i64 {
            let v = modes(s);
            out.set_mode(s, &v);
            if s > 0 {
                out.set_mode(-s, &v.iter().map(|z| z.conj()).collect::<Vec<_>>());
            }
        }
        out
    }

    pub fn nx(&self) -> usize {
        self.xs.len()
    }

    pub fn mode(&self, s: i64) -> &[C64] {
        &self.modes[(s + self.s_max as i64) as usize]
    }

    pub fn set_mode(&mut self, s: i64, v: &[C64]) {
        let idx = (s + self.s_max as i64) as usize;
        self.modes[idx].copy_from_slice(v);
    }

    pub fn get(&self, s: i64, j: usize, i: usize) -> C64 {
        self.mode(s)[j * self.nx() + i]
    }

    pub fn s_range(&self) -> impl Iterator<Item = i64> {
        let s = self.s_max as i64;
        -s..=s
    }

    /// `f(x_i, t)` reconstructed from the truncated mode sum.
    pub fn value(&self, j: usize, i: usize, t: f64) -> f64 {
        let sum: C64 = self.s_range().map(|s| self.get(s, j, i) * C64::from_polar(1.0, s as f64 * t)).sum();
        sum.re / PERIOD
    }

    /// Largest `|f̂_{−s} − conj(f̂_s)|`; zero for real fields.
    pub fn reality_defect(&self) -> f64 {
        let mut d: f64 = 0.0;
        for s in 1..=self.s_max as i64 {
            for (p, q) in self.mode(s).iter().zip(self.mode(-s)) {
                d = d.max((p.conj() - q).norm());
            }
        }
        for z in self.mode(0) {
            d = d.max(z.im.abs());
        }
        d
    }

    /// Replaces each pair by its real-field projection.
    pub fn enforce_real(&mut self) {
        for s in 0..=self.s_max as i64 {
            let plus = self.mode(s).to_vec();
            let minus = self.mode(-s).to_vec();
            let sym: Vec<C64> = plus.iter().zip(&minus).map(|(p, q)| 0.5 * (p + q.conj())).collect();
            self.set_mode(s, &sym);
            self.set_mode(-s, &sym.iter().map(|z| z.conj()).collect::<Vec<_>>());
        }
    }

    /// `Σ_s (1+s²)^γ ∫_0^1 ‖f̂_s‖² dx`.
    pub fn w_norm_sq(&self, gamma: f64) -> f64 {
        let nx = self.nx();
        self.s_range()
            .map(|s| {
                let m = self.mode(s);
                let l2: f64 = (0..self.n)
                    .map(|j| (0..nx).map(|i| self.wx[i] * m[j * nx + i].norm_sqr()).sum::<f64>())
                    .sum();
                (1.0 + (s * s) as f64).powf(gamma) * l2
            })
            .sum()
    }

    /// `f − g` on identical layouts.
    pub fn sub(&self, other: &FourierField) -> Result<FourierField> {
        if self.n != other.n || self.s_max != other.s_max || self.xs != other.xs {
            return Err(Error::Invalid("mode fields differ in layout".into()));
        }
        let mut out = self.clone();
        for (a, b) in out.modes.iter_mut().zip(&other.modes) {
            for (p, q) in a.iter_mut().zip(b) {
                *p -= q;
            }
        }
        Ok(out)
    }

    /// `⟨f, g⟩ = (1/2π) ∫∫ ⟨f, g⟩ dx dt` for real fields, by Parseval.
    pub fn l2_pairing(&self, other: &FourierField) -> Result<f64> {
        if self.n != other.n || self.xs != other.xs {
            return Err(Error::Invalid("mode fields differ in layout".into()));
        }
        let nx = self.nx();
        let s_max = self.s_max.min(other.s_max) as i64;
        let mut acc = 0.0;
        for s in -s_max..=s_max {
            let (p, q) = (self.mode(s), other.mode(s));
            for j in 0..self.n {
                for i in 0..nx {
                    acc += self.wx[i] * (p[j * nx + i] * q[j * nx + i].conj()).re;
                }
            }
        }
        Ok(acc / (PERIOD * PERIOD))
    }

    /// Upper bound on the squared `W^γ` tail beyond `s_max` for modes obeying
    /// `‖f̂_s‖_{L²} ≤ c (1+|s|)^{−p}` with `p > γ + 1/2`.
    pub fn tail_bound_sq(&self, gamma: f64, c: f64, p: f64) -> Option<f64> {
        let e = 2.0 * p - 2.0 * gamma;
        if e <= 1.0 {
            return None;
        }
        // (1+s²)^γ ≤ (1+s)^{2γ}, then compare the sum with an integral
        let s = self.s_max as f64 + 1.0;
        Some(2.0 * c * c * s.powf(1.0 - e) / (e - 1.0))
    }
}

/// Modes of a periodic grid function, trapezoid rule in `x` and `t`.
pub fn to_modes(u: &GridFunction, s_max: usize) -> Result<FourierField> {
    if !u.is_periodic() {
        return Err(Error::Invalid("mode decomposition needs a periodic grid".into()));
    }
    let nt = u.nt();
    if 2 * s_max >= nt {
        return Err(Error::Aliasing { s_max, nt });
    }
    let xs = u.xs().to_vec();
    let nx = xs.len();
    let wx: Vec<f64> = (0..nx)
        .map(|i| {
            let left = if i > 0 { xs[i] - xs[i - 1] } else { 0.0 };
            let right = if i + 1 < nx { xs[i + 1] - xs[i] } else { 0.0 };
            0.5 * (left + right)
        })
        .collect();
    let mut out = FourierField::zeros(u.n(), s_max, xs, wx);
    for j in 0..u.n() {
        for i in 0..nx {
            let samples: Vec<f64> = (0..nt).map(|k| u.get(j, i, k)).collect();
            out.fill_node(j, i, &samples);
        }
    }
    Ok(out)
}

/// Periodic grid function with `nt` time samples from the truncated mode sum.
pub fn from_modes(f: &FourierField, nt: usize) -> GridFunction {
    let mut out = GridFunction::periodic_on(f.n, f.xs.clone(), nt);
    for j in 0..f.n {
        for i in 0..f.nx() {
            for k in 0..nt {
                let t = out.ts()[k];
                out.set(j, i, k, f.value(j, i, t));
            }
        }
    }
    out
}

/// `‖f‖_{W^γ}`.
pub fn w_norm(f: &FourierField, gamma: f64) -> f64 {
    f.w_norm_sq(gamma).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn cosine_modes() {
        let u = GridFunction::periodic(1, 5, 32).from_fn(|_, _, t| t.cos());
        let f = to_modes(&u, 4).unwrap();
        assert!((f.get(1, 0, 2) - C64::new(PI, 0.0)).norm() < 1e-12);
        assert!((f.get(-1, 0, 2) - C64::new(PI, 0.0)).norm() < 1e-12);
        for s in [0, 2, 3, -4] {
            assert!(f.get(s, 0, 1).norm() < 1e-12);
        }
        // ‖cos t‖²_{W^1} = 4π² with unit x-measure
        assert!((f.w_norm_sq(1.0) - 4.0 * PI * PI).abs() < 1e-10);
        assert!((w_norm(&f, 0.0) - (2.0 * PI * PI).sqrt()).abs() < 1e-10);
    }

    #[test]
    fn constant_has_only_mode_zero() {
        let u = GridFunction::periodic(1, 3, 16).from_fn(|_, _, _| 1.0);
        let f = to_modes(&u, 3).unwrap();
        assert!((f.get(0, 0, 0) - C64::new(PERIOD, 0.0)).norm() < 1e-12);
        assert!(f.get(2, 0, 0).norm() < 1e-12);
    }

    #[test]
    fn aliasing_is_rejected() {
        let u = GridFunction::periodic(1, 3, 8);
        assert!(matches!(to_modes(&u, 4), Err(Error::Aliasing { .. })));
    }

    #[test]
    fn round_trip() {
        let u = GridFunction::periodic(2, 4, 16).from_fn(|j, x, t| x * (2.0 * t).sin() + j as f64 * (t + x).cos() + 0.3);
        let f = to_modes(&u, 7).unwrap();
        assert!(f.reality_defect() < 1e-12);
        let v = from_modes(&f, 16);
        assert!(u.max_abs_diff(&v).unwrap() < 1e-12);
    }
}

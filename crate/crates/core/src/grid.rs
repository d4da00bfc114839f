use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::system::PERIOD;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, schemars::JsonSchema)]
#[serde(rename_all = "snake_case")]
pub enum Interpolation {
    #[default]
    Bilinear,
    /// Four-point Lagrange in each direction.
    Bicubic,
}

/// `n` components sampled on a tensor grid `xs × ts`.
///
/// A periodic grid holds `ts = 2πk/N_t`, `k < N_t`, and wraps in `t`.
#[derive(Debug, Clone)]
pub struct GridFunction {
    n: usize,
    xs: Vec<f64>,
    ts: Vec<f64>,
    values: Vec<Vec<f64>>,
    interp: Interpolation,
    periodic: bool,
}

pub fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![a];
    }
    (0..n)
        .map(|i| if i == n - 1 { b } else { a + (b - a) * i as f64 / (n - 1) as f64 })
        .collect()
}

impl GridFunction {
    pub fn zeros(n: usize, xs: Vec<f64>, ts: Vec<f64>) -> Self {
        let len = xs.len() * ts.len();
        GridFunction {
            n,
            xs,
            ts,
            values: vec![vec![0.0; len]; n],
            interp: Interpolation::Bilinear,
            periodic: false,
        }
    }

    /// Uniform grid on `[0,1] × [t0, t1]`.
    pub fn uniform(n: usize, nx: usize, window: (f64, f64), nt: usize) -> Self {
        Self::zeros(n, linspace(0.0, 1.0, nx), linspace(window.0, window.1, nt))
    }

    /// Uniform periodic grid on `[0,1] × [0, 2π)`.
    pub fn periodic(n: usize, nx: usize, nt: usize) -> Self {
        Self::periodic_on(n, linspace(0.0, 1.0, nx), nt)
    }

    /// Periodic grid with the given abscissae and `nt` uniform times.
    pub fn periodic_on(n: usize, xs: Vec<f64>, nt: usize) -> Self {
        let ts = (0..nt).map(|k| PERIOD * k as f64 / nt as f64).collect();
        let mut g = Self::zeros(n, xs, ts);
        g.periodic = true;
        g
    }

    pub fn from_fn<F: Fn(usize, f64, f64) -> f64>(mut self, f: F) -> Self {
        self.fill(f);
        self
    }

    pub fn fill<F: Fn(usize, f64, f64) -> f64>(&mut self, f: F) {
        let nx = self.xs.len();
        for j in 0..self.n {
            for (k, &t) in self.ts.iter().enumerate() {
                for (i, &x) in self.xs.iter().enumerate() {
                    self.values[j][k * nx + i] = f(j, x, t);
                }
            }
        }
    }

    pub fn with_interpolation(mut self, interp: Interpolation) -> Self {
        self.interp = interp;
        self
    }

    pub fn set_interpolation(&mut self, interp: Interpolation) {
        self.interp = interp;
    }

    pub fn n(&self) -> usize {
        self.n
    }
    pub fn xs(&self) -> &[f64] {
        &self.xs
    }
    pub fn ts(&self) -> &[f64] {
        &self.ts
    }
    pub fn nx(&self) -> usize {
        self.xs.len()
    }
    pub fn nt(&self) -> usize {
        self.ts.len()
    }
    pub fn is_periodic(&self) -> bool {
        self.periodic
    }
    pub fn interpolation(&self) -> Interpolation {
        self.interp
    }

    /// Covered time interval; unbounded for periodic grids.
    pub fn window(&self) -> (f64, f64) {
        if self.periodic {
            (f64::NEG_INFINITY, f64::INFINITY)
        } else {
            (self.ts[0], *self.ts.last().expect("non-empty grid"))
        }
    }

    pub fn contains_t(&self, t: f64) -> bool {
        let (lo, hi) = self.window();
        t >= lo - 1e-12 && t <= hi + 1e-12
    }

    #[inline]
    pub fn get(&self, j: usize, i: usize, k: usize) -> f64 {
        self.values[j][k * self.xs.len() + i]
    }

    #[inline]
    pub fn set(&mut self, j: usize, i: usize, k: usize, v: f64) {
        let nx = self.xs.len();
        self.values[j][k * nx + i] = v;
    }

    pub fn component(&self, j: usize) -> &[f64] {
        &self.values[j]
    }

    pub fn component_mut(&mut self, j: usize) -> &mut [f64] {
        &mut self.values[j]
    }

    /// Row `k` of component `j` (all `x` at one time).
    pub fn row(&self, j: usize, k: usize) -> &[f64] {
        let nx = self.xs.len();
        &self.values[j][k * nx..(k + 1) * nx]
    }

    pub fn same_shape(&self, other: &GridFunction) -> bool {
        self.n == other.n && self.xs == other.xs && self.ts == other.ts
    }

    fn check_shape(&self, other: &GridFunction) -> Result<()> {
        if self.same_shape(other) {
            Ok(())
        } else {
            Err(Error::Invalid("grid functions live on different grids".into()))
        }
    }

    pub fn max_abs_diff(&self, other: &GridFunction) -> Result<f64> {
        self.check_shape(other)?;
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .flat_map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y).abs()))
            .fold(0.0, f64::max))
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().flatten().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `self ← α·self + β·other`.
    pub fn combine(&mut self, alpha: f64, beta: f64, other: &GridFunction) -> Result<()> {
        self.check_shape(other)?;
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            for (x, y) in a.iter_mut().zip(b) {
                *x = alpha * *x + beta * y;
            }
        }
        Ok(())
    }

    pub fn scaled(&self, alpha: f64) -> GridFunction {
        let mut g = self.clone();
        g.values.iter_mut().flatten().for_each(|v| *v *= alpha);
        g
    }

    pub fn add(&self, other: &GridFunction) -> Result<GridFunction> {
        let mut g = self.clone();
        g.combine(1.0, 1.0, other)?;
        Ok(g)
    }

    pub fn sub(&self, other: &GridFunction) -> Result<GridFunction> {
        let mut g = self.clone();
        g.combine(1.0, -1.0, other)?;
        Ok(g)
    }

    /// Samples this function on the nodes of `target`.
    pub fn resample(&self, target: &GridFunction) -> GridFunction {
        let mut g = target.clone();
        g.interp = self.interp;
        let nx = g.xs.len();
        for j in 0..self.n.min(g.n) {
            for k in 0..g.ts.len() {
                for i in 0..nx {
                    let v = self.eval(j, g.xs[i], g.ts[k]);
                    g.values[j][k * nx + i] = v;
                }
            }
        }
        g
    }

    /// Interpolated value; `t` is clamped to the window on non-periodic grids.
    pub fn eval(&self, j: usize, x: f64, t: f64) -> f64 {
        match self.interp {
            Interpolation::Bilinear => self.eval_linear(j, x, t),
            Interpolation::Bicubic => self.eval_cubic(j, x, t),
        }
    }

    pub fn eval_all(&self, x: f64, t: f64, out: &mut [f64]) {
        for (j, o) in out.iter_mut().enumerate().take(self.n) {
            *o = self.eval(j, x, t);
        }
    }

    fn reduce_t(&self, t: f64) -> f64 {
        if self.periodic {
            t.rem_euclid(PERIOD)
        } else {
            t.clamp(self.ts[0], *self.ts.last().expect("non-empty grid"))
        }
    }

    /// Cell index `i` with `nodes[i] ≤ v ≤ nodes[i+1]`.
    fn cell(nodes: &[f64], v: f64) -> usize {
        if nodes.len() < 2 {
            return 0;
        }
        let i = nodes.partition_point(|&p| p <= v);
        i.saturating_sub(1).min(nodes.len() - 2)
    }

    /// Time cell with wrap-around: returns `(k0, k1, θ)`.
    fn t_cell(&self, t: f64) -> (usize, usize, f64) {
        let t = self.reduce_t(t);
        let nt = self.ts.len();
        if nt == 1 {
            return (0, 0, 0.0);
        }
        if self.periodic {
            let last = self.ts[nt - 1];
            if t >= last {
                let theta = (t - last) / (PERIOD - last);
                return (nt - 1, 0, theta);
            }
        }
        let k = Self::cell(&self.ts, t);
        let theta = (t - self.ts[k]) / (self.ts[k + 1] - self.ts[k]);
        (k, k + 1, theta)
    }

    fn eval_linear(&self, j: usize, x: f64, t: f64) -> f64 {
        let x = x.clamp(0.0, 1.0);
        let nx = self.xs.len();
        let (i0, i1, s) = if nx == 1 {
            (0, 0, 0.0)
        } else {
            let i = Self::cell(&self.xs, x);
            (i, i + 1, (x - self.xs[i]) / (self.xs[i + 1] - self.xs[i]))
        };
        let (k0, k1, th) = self.t_cell(t);
        let v = &self.values[j];
        let lo = (1.0 - s) * v[k0 * nx + i0] + s * v[k0 * nx + i1];
        let hi = (1.0 - s) * v[k1 * nx + i0] + s * v[k1 * nx + i1];
        (1.0 - th) * lo + th * hi
    }

    fn eval_cubic(&self, j: usize, x: f64, t: f64) -> f64 {
        let x = x.clamp(0.0, 1.0);
        let nx = self.xs.len();
        let (xi, xw) = stencil(&self.xs, x, Self::cell(&self.xs, x), false, 0.0);
        let tr = self.reduce_t(t);
        let (k0, _, _) = self.t_cell(tr);
        let (ti, tw) = stencil(&self.ts, tr, k0, self.periodic, PERIOD);
        let v = &self.values[j];
        let mut acc = 0.0;
        for (a, &k) in ti.iter().enumerate() {
            if tw[a] == 0.0 {
                continue;
            }
            let mut row = 0.0;
            for (b, &i) in xi.iter().enumerate() {
                row += xw[b] * v[k * nx + i];
            }
            acc += tw[a] * row;
        }
        acc
    }
}

/// Four-point Lagrange stencil around cell `c` with weights at `v`.
fn stencil(nodes: &[f64], v: f64, c: usize, periodic: bool, period: f64) -> ([usize; 4], [f64; 4]) {
    let n = nodes.len();
    if n < 4 {
        // fall back to linear
        let mut idx = [0; 4];
        let mut w = [0.0; 4];
        if n == 1 {
            w[0] = 1.0;
            return (idx, w);
        }
        let c = c.min(n - 2);
        idx[0] = c;
        idx[1] = c + 1;
        let s = (v - nodes[c]) / (nodes[c + 1] - nodes[c]);
        w[0] = 1.0 - s;
        w[1] = s;
        return (idx, w);
    }
    let mut idx = [0usize; 4];
    let mut pos = [0f64; 4];
    if periodic {
        for (m, o) in (-1i64..=2).enumerate() {
            let raw = c as i64 + o;
            let wrapped = raw.rem_euclid(n as i64) as usize;
            idx[m] = wrapped;
            let laps = (raw - wrapped as i64) / n as i64;
            pos[m] = nodes[wrapped] + laps as f64 * period;
        }
    } else {
        let start = (c as i64 - 1).clamp(0, n as i64 - 4) as usize;
        for m in 0..4 {
            idx[m] = start + m;
            pos[m] = nodes[start + m];
        }
    }
    let mut w = [0.0; 4];
    for m in 0..4 {
        if v == pos[m] {
            let mut e = [0.0; 4];
            e[m] = 1.0;
            return (idx, e);
        }
        let mut l = 1.0;
        for q in 0..4 {
            if q != m {
                l *= (v - pos[q]) / (pos[m] - pos[q]);
            }
        }
        w[m] = l;
    }
    (idx, w)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_on_nodes() {
        for interp in [Interpolation::Bilinear, Interpolation::Bicubic] {
            let g = GridFunction::uniform(1, 7, (0.0, 2.0), 9)
                .from_fn(|_, x, t| (3.0 * x).sin() * t.exp())
                .with_interpolation(interp);
            for (k, &t) in g.ts().iter().enumerate() {
                for (i, &x) in g.xs().iter().enumerate() {
                    assert_eq!(g.eval(0, x, t), g.get(0, i, k));
                }
            }
        }
    }

    #[test]
    fn bilinear_reproduces_bilinear_functions() {
        let g = GridFunction::uniform(1, 5, (0.0, 1.0), 5).from_fn(|_, x, t| 1.0 + 2.0 * x - t + 3.0 * x * t);
        let (x, t) = (0.37, 0.81);
        assert!((g.eval(0, x, t) - (1.0 + 2.0 * x - t + 3.0 * x * t)).abs() < 1e-14);
    }

    #[test]
    fn bicubic_reproduces_cubics() {
        let f = |x: f64, t: f64| x * x * x - 2.0 * t * t * t + x * t;
        let g = GridFunction::uniform(1, 9, (0.0, 1.0), 11)
            .from_fn(|_, x, t| f(x, t))
            .with_interpolation(Interpolation::Bicubic);
        for (x, t) in [(0.03, 0.97), (0.5, 0.5), (0.99, 0.02)] {
            assert!((g.eval(0, x, t) - f(x, t)).abs() < 1e-13);
        }
    }

    #[test]
    fn periodic_wrap() {
        let g = GridFunction::periodic(1, 3, 64).from_fn(|_, _, t| t.cos());
        for t in [0.1, 6.2, 6.27] {
            assert!((g.eval(0, 0.5, t) - g.eval(0, 0.5, t + PERIOD)).abs() < 1e-14);
            assert!((g.eval(0, 0.5, t) - t.cos()).abs() < 5e-3);
        }
        let g = g.with_interpolation(Interpolation::Bicubic);
        assert!((g.eval(0, 0.5, 6.27) - 6.27f64.cos()).abs() < 1e-5);
    }
}

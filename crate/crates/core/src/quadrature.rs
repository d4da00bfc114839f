//! Gauss–Legendre and Gauss–Lobatto rules and composite panel quadrature.

use std::f64::consts::PI;

/// Nodes and weights on `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct GaussRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

/// `(P_n(x), P_n'(x))` by the three-term recurrence.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

impl GaussRule {
    pub fn legendre(n: usize) -> Self {
        assert!(n >= 1);
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        for i in 0..n.div_ceil(2) {
            let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            for _ in 0..100 {
                let (p, dp) = legendre(n, x);
                let dx = p / dp;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, dp) = legendre(n, x);
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        if n % 2 == 1 {
            nodes[n / 2] = 0.0;
        }
        GaussRule { nodes, weights }
    }

    /// `n ≥ 2` points including both endpoints.
    pub fn lobatto(n: usize) -> Self {
        assert!(n >= 2);
        let deg = n - 1;
        let mut nodes = vec![0.0; n];
        nodes[0] = -1.0;
        nodes[n - 1] = 1.0;
        // interior nodes are the roots of P'_{deg}; Newton on P'_{deg}
        for i in 1..n - 1 {
            let mut x = -(PI * i as f64 / deg as f64).cos();
            for _ in 0..100 {
                let (p, dp) = legendre(deg, x);
                // P'' from the Legendre ODE
                let d2p = (2.0 * x * dp - (deg * (deg + 1)) as f64 * p) / (1.0 - x * x);
                let dx = dp / d2p;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            nodes[i] = x;
        }
        let c = 2.0 / (deg * (deg + 1)) as f64;
        let weights = nodes
            .iter()
            .map(|&x| {
                let (p, _) = legendre(deg, x);
                c / (p * p)
            })
            .collect();
        GaussRule { nodes, weights }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Nodes and weights mapped to `[a, b]`; weights are negative when `b < a`.
    pub fn mapped(&self, a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let (mid, half) = (0.5 * (a + b), 0.5 * (b - a));
        self.nodes.iter().zip(&self.weights).map(move |(x, w)| (mid + half * x, half * w))
    }

    pub fn integrate<F: FnMut(f64) -> f64>(&self, a: f64, b: f64, mut f: F) -> f64 {
        self.mapped(a, b).map(|(x, w)| w * f(x)).sum()
    }
}

/// Panel boundaries covering the oriented interval from `a` to `b`, split at
/// every point of `splits` strictly inside and subdivided so that no panel is
/// longer than `1 / panels_per_unit`.
pub fn panel_edges(a: f64, b: f64, splits: &[f64], panels_per_unit: usize) -> Vec<f64> {
    let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
    let mut cuts = vec![lo];
    cuts.extend(splits.iter().copied().filter(|&s| s > lo && s < hi));
    cuts.push(hi);
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    let max_len = 1.0 / panels_per_unit.max(1) as f64;
    let mut edges = vec![lo];
    for w in cuts.windows(2) {
        let len = w[1] - w[0];
        if len <= 0.0 {
            continue;
        }
        let k = ((len / max_len) - 1e-12).ceil().max(1.0) as usize;
        for i in 1..=k {
            edges.push(if i == k { w[1] } else { w[0] + len * i as f64 / k as f64 });
        }
    }
    if a > b {
        edges.reverse();
    }
    edges
}

/// Composite nodes and signed weights for `∫_a^b`.
pub fn composite(rule: &GaussRule, a: f64, b: f64, splits: &[f64], panels_per_unit: usize) -> Vec<(f64, f64)> {
    let edges = panel_edges(a, b, splits, panels_per_unit);
    let mut out = Vec::with_capacity((edges.len().saturating_sub(1)) * rule.len());
    for w in edges.windows(2) {
        out.extend(rule.mapped(w[0], w[1]));
    }
    out
}

pub fn integrate_composite<F: FnMut(f64) -> f64>(
    rule: &GaussRule,
    a: f64,
    b: f64,
    splits: &[f64],
    panels_per_unit: usize,
    mut f: F,
) -> f64 {
    composite(rule, a, b, splits, panels_per_unit)
        .into_iter()
        .map(|(x, w)| w * f(x))
        .sum()
}

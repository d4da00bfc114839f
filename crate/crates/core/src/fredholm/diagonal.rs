use nalgebra::DVector;

use super::profiles::{mode_reflection, ExponentProfiles};
use super::shooting::ModeSolution;
use super::{Reflection, C64};
use crate::error::{Error, Result};
use crate::quadrature::{panel_edges, GaussRule};

/// Margins at or below this are treated as singular.
const SINGULAR_MARGIN: f64 = 1e-12;

/// Per-component running values at a panel edge: `φ_j = isα_j + β_j` and
/// `J_j = ∫_0^x e^{φ_j} f̂_j / a_j`.
#[derive(Clone)]
struct EdgeState {
    phi: Vec<C64>,
    j: Vec<C64>,
}

/// Solves the diagonal mode problem `a_j û_j′ + (is + b_jj) û_j = f̂_j` with the
/// reflection conditions: `û_j(x) = e^{−φ_j(x)} (û_j(0) + J_j(x))`.
pub fn solve_mode_diagonal<F>(profiles: &ExponentProfiles, refl: &Reflection, s: i64, f: F, xs: &[f64]) -> Result<ModeSolution>
where
    F: Fn(f64) -> DVector<C64>,
{
    let (n, m) = (refl.n, refl.m);
    if profiles.n() != n {
        return Err(Error::Invalid("profiles and reflection differ in size".into()));
    }
    let refl_s = mode_reflection(profiles, refl, s);
    if refl_s.margin <= SINGULAR_MARGIN {
        return Err(Error::SingularMode { s, margin: refl_s.margin });
    }
    let sf = s as f64;
    let mut splits: Vec<f64> = xs.to_vec();
    for j in 0..n {
        splits.extend_from_slice(profiles.splits(j));
    }
    let ppu = 16usize.max((sf.abs() / profiles.min_speed / 2.0).ceil() as usize);
    let edges = panel_edges(0.0, 1.0, &splits, ppu);
    let rule = GaussRule::legendre(12);
    let phase = |j: usize, x0: f64, x1: f64| {
        let (da, db) = profiles.increment(j, x0, x1);
        C64::new(db, sf * da)
    };

    let mut states = Vec::with_capacity(edges.len());
    let mut cur = EdgeState {
        phi: vec![C64::new(0.0, 0.0); n],
        j: vec![C64::new(0.0, 0.0); n],
    };
    states.push(cur.clone());
    for w in edges.windows(2) {
        for (y, wt) in rule.mapped(w[0], w[1]) {
            let fy = f(y);
            for j in 0..n {
                let p = cur.phi[j] + phase(j, w[0], y);
                cur.j[j] += p.exp() * fy[j] * (wt / profiles.speed(j, y));
            }
        }
        for j in 0..n {
            cur.phi[j] += phase(j, w[0], w[1]);
        }
        states.push(cur.clone());
    }
    let last = states.last().expect("at least one edge");

    // c_j = û_j(0): leftward traces from (I − R_s) w = Σ_k P_jk J_k(1) − J_j(1)
    let p = |jj: usize, k: usize| (profiles.phase_at_one(m + jj, s) - profiles.phase_at_one(k, s)).exp() * refl.r1[jj][k];
    let mut c = vec![C64::new(0.0, 0.0); n];
    if n > m {
        let rhs = DVector::from_fn(n - m, |jj, _| (0..m).map(|k| p(jj, k) * last.j[k]).sum::<C64>() - last.j[m + jj]);
        let lhs = super::CMat::identity(n - m, n - m) - &refl_s.matrix;
        let w = lhs.lu().solve(&rhs).ok_or(Error::SingularMode { s, margin: refl_s.margin })?;
        for jj in 0..n - m {
            c[m + jj] = w[jj];
        }
    }
    let left: Vec<C64> = c[m..].to_vec();
    for (j, cj) in c.iter_mut().enumerate().take(m) {
        *cj = left.iter().enumerate().map(|(ll, w)| w * refl.r0[j][ll]).sum();
    }

    let value = |st: &EdgeState, j: usize| (-st.phi[j]).exp() * (c[j] + st.j[j]);
    let nx = xs.len();
    let mut u = vec![C64::new(0.0, 0.0); n * nx];
    for (i, &x) in xs.iter().enumerate() {
        let e = edges
            .iter()
            .position(|&e| e == x)
            .ok_or_else(|| Error::Invalid(format!("node {x} outside [0, 1]")))?;
        for j in 0..n {
            u[j * nx + i] = value(&states[e], j);
        }
    }

    let first = &states[0];
    let mut bc: f64 = 0.0;
    for j in 0..n {
        let d = if j < m {
            value(first, j) - (m..n).map(|k| value(first, k) * refl.r0[j][k - m]).sum::<C64>()
        } else {
            value(last, j) - (0..m).map(|k| value(last, k) * refl.r1[j - m][k]).sum::<C64>()
        };
        bc = bc.max(d.norm());
    }

    // integral form of the ODE on every panel, with interior values from a nested rule
    let mut ode: f64 = 0.0;
    for (e, w) in edges.windows(2).enumerate() {
        let st = &states[e];
        let mut integral = vec![C64::new(0.0, 0.0); n];
        for (y, wt) in rule.mapped(w[0], w[1]) {
            let fy = f(y);
            let mut inner = st.j.clone();
            for (z, wz) in rule.mapped(w[0], y) {
                let fz = f(z);
                for j in 0..n {
                    inner[j] += (st.phi[j] + phase(j, w[0], z)).exp() * fz[j] * (wz / profiles.speed(j, z));
                }
            }
            for j in 0..n {
                let py = st.phi[j] + phase(j, w[0], y);
                let uy = (-py).exp() * (c[j] + inner[j]);
                let r = fy[j] - (C64::new(profiles.damping(j, y), sf)) * uy;
                integral[j] += r * (wt / profiles.speed(j, y));
            }
        }
        for j in 0..n {
            let jump = value(&states[e + 1], j) - value(st, j);
            ode = ode.max((jump - integral[j]).norm());
        }
    }

    Ok(ModeSolution {
        s,
        xs: xs.to_vec(),
        u,
        bc_residual: bc,
        ode_residual: Some(ode),
        singular: false,
        matching_sigma_ratio: refl_s.margin,
    })
}

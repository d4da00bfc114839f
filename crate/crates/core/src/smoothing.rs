//! Empirical smoothing diagnostics: singularity tracking along
//! characteristics and refinement-ratio regularity profiles.

use rayon::prelude::*;
use serde::Serialize;

use crate::characteristics::Tracer;
use crate::error::{Error, Result};
use crate::grid::GridFunction;
use crate::solver::{Problem, SolveConfig, Solver};
use crate::system::PERIOD;

#[derive(Debug, Clone, Serialize)]
pub struct TrackSample {
    pub t: f64,
    pub x: f64,
    /// Number of boundary passes before this sample (0 on the seeded curve).
    pub segment: usize,
    pub jump_u: f64,
    pub jump_du: f64,
    /// Expected size of `jump_du` for a smooth field with this row's
    /// curvature.
    pub noise: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ComponentTrack {
    pub j: usize,
    pub samples: Vec<TrackSample>,
    /// Times at which the tracked curve reached a lateral boundary.
    pub exits: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SingularityTrack {
    pub x0: f64,
    pub t0: f64,
    /// Stencil offset used for one-sided estimates.
    pub delta: f64,
    pub components: Vec<ComponentTrack>,
    /// Samples skipped because the stencil left `[0, 1]`.
    pub truncated: usize,
}

impl SingularityTrack {
    /// Largest `|jump_du|` over samples of component `j` with `t` in `window`.
    pub fn max_jump_du(&self, j: usize, window: (f64, f64)) -> Option<f64> {
        self.series(j, window).map(|s| s.jump_du.abs()).reduce(f64::max)
    }

    pub fn min_jump_du(&self, j: usize, window: (f64, f64)) -> Option<f64> {
        self.series(j, window).map(|s| s.jump_du.abs()).reduce(f64::min)
    }

    pub fn max_noise(&self, j: usize, window: (f64, f64)) -> Option<f64> {
        self.series(j, window).map(|s| s.noise).reduce(f64::max)
    }

    fn series(&self, j: usize, window: (f64, f64)) -> impl Iterator<Item = &TrackSample> {
        self.components
            .iter()
            .filter(move |c| c.j == j)
            .flat_map(|c| c.samples.iter())
            .filter(move |s| s.t >= window.0 && s.t <= window.1)
    }
}

/// Follows the characteristics through `(x0, t0)` over the times of `u`.
/// When a curve reaches its exit boundary the track continues on the
/// characteristic entering from the opposite side at the same time, so
/// anything re-injected by the boundary operator stays visible.
pub fn track_singularity(u: &GridFunction, tracer: &Tracer, x0: f64, t0: f64) -> Result<SingularityTrack> {
    let sys = tracer.system();
    let dx = u.xs()[1] - u.xs()[0];
    let delta = 2.0 * dx;
    let t_end = *u.ts().last().expect("non-empty grid");
    let mut truncated = 0;
    let mut components = Vec::with_capacity(sys.n());
    for j in 0..sys.n() {
        let right = sys.is_rightward(j);
        let (entry, exit) = if right { (0.0, 1.0) } else { (1.0, 0.0) };
        let mut anchor = (x0, t0);
        let mut segment = 0;
        let mut exits = Vec::new();
        let mut samples = Vec::new();
        loop {
            let path = tracer.trace(j, anchor.0, anchor.1, (anchor.0, exit))?;
            let far = if right { path.xi_range.1 } else { path.xi_range.0 };
            let t_far = path.omega(far);
            for (k, &t) in u.ts().iter().enumerate() {
                if t < anchor.1 || t > t_far || (segment > 0 && t == anchor.1) {
                    continue;
                }
                let x = invert_monotone(|xi| path.omega(xi), anchor.0, far, t);
                if x - 2.0 * delta < 0.0 || x + 2.0 * delta > 1.0 {
                    truncated += 1;
                    continue;
                }
                for_jump(u, j, k, x, delta, |jump_u, jump_du, noise| {
                    samples.push(TrackSample {
                        t,
                        x,
                        segment,
                        jump_u,
                        jump_du,
                        noise,
                    })
                });
            }
            if t_far >= t_end || (far - exit).abs() > 1e-9 {
                break;
            }
            exits.push(t_far);
            anchor = (entry, t_far);
            segment += 1;
            if segment > 10_000 {
                return Err(Error::Invalid("singularity track did not terminate".into()));
            }
        }
        components.push(ComponentTrack { j, samples, exits });
    }
    Ok(SingularityTrack {
        x0,
        t0,
        delta,
        components,
        truncated,
    })
}

fn for_jump<F: FnMut(f64, f64, f64)>(u: &GridFunction, j: usize, k: usize, x: f64, delta: f64, mut emit: F) {
    let t = u.ts()[k];
    let v = |x: f64| u.eval(j, x, t);
    let (l2, l1, r1, r2) = (v(x - 2.0 * delta), v(x - delta), v(x + delta), v(x + 2.0 * delta));
    let jump_u = (2.0 * r1 - r2) - (2.0 * l1 - l2);
    let jump_du = (r2 - r1) / delta - (l1 - l2) / delta;
    // curvature of the row away from the stencil
    let row = u.row(j, k);
    let h = u.xs()[1] - u.xs()[0];
    let mut curv: f64 = 0.0;
    for i in 1..row.len() - 1 {
        if (u.xs()[i] - x).abs() > 3.0 * delta {
            curv = curv.max((row[i + 1] - 2.0 * row[i] + row[i - 1]).abs() / (h * h));
        }
    }
    emit(jump_u, jump_du, 3.0 * delta * curv);
}

fn invert_monotone<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, target: f64) -> f64 {
    let (mut lo, mut hi) = (a, b);
    let increasing = f(b) >= f(a);
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if (f(mid) < target) == increasing {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

#[derive(Debug, Clone, Serialize)]
pub struct ProfileOptions {
    pub windows: Vec<(f64, f64)>,
    pub k_max: usize,
    /// Refinement ratio above which a difference quotient is unbounded.
    pub growth: f64,
    /// Quotients below this absolute size count as bounded.
    pub floor: f64,
}

impl ProfileOptions {
    /// Unit-length windows covering `[start, end]`.
    pub fn unit_windows(start: f64, end: f64) -> Self {
        let mut windows = Vec::new();
        let mut a = start;
        while a < end - 1e-12 {
            windows.push((a, (a + 1.0).min(end)));
            a += 1.0;
        }
        ProfileOptions {
            windows,
            k_max: 3,
            growth: 1.6,
            floor: 1e-9,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct WindowProfile {
    pub window: (f64, f64),
    /// Largest `k ≤ k_max` with `M_1 … M_{k+1}` bounded.
    pub order: usize,
    /// `quotients[k-1][r]` is `M_k` at refinement level `r`.
    pub quotients: Vec<Vec<f64>>,
    pub ratios: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize)]
pub struct RegularityProfile {
    pub k_max: usize,
    pub growth: f64,
    pub resolutions: Vec<[usize; 2]>,
    pub windows: Vec<WindowProfile>,
}

impl RegularityProfile {
    pub fn orders(&self) -> Vec<usize> {
        self.windows.iter().map(|w| w.order).collect()
    }

    /// Order attained on the window containing `t`.
    pub fn order_at(&self, t: f64) -> Option<usize> {
        self.windows
            .iter()
            .find(|w| t >= w.window.0 && t <= w.window.1)
            .map(|w| w.order)
    }
}

/// `max |Δ^k u| / h^k` over nodes of the window, along x and along t.
pub fn difference_quotient(u: &GridFunction, window: (f64, f64), k: usize) -> f64 {
    let eps = 1e-9 * (1.0 + window.1.abs());
    let rows: Vec<usize> = (0..u.nt())
        .filter(|&r| u.ts()[r] >= window.0 - eps && u.ts()[r] <= window.1 + eps)
        .collect();
    if rows.is_empty() {
        return 0.0;
    }
    let binom: Vec<f64> = (0..=k)
        .map(|i| {
            let c = (0..i).fold(1.0, |acc, r| acc * (k - r) as f64 / (r + 1) as f64);
            if (k - i) % 2 == 0 {
                c
            } else {
                -c
            }
        })
        .collect();
    let hx = u.xs()[1] - u.xs()[0];
    let ht = u.ts()[1] - u.ts()[0];
    let mut best: f64 = 0.0;
    for j in 0..u.n() {
        for &r in &rows {
            let row = u.row(j, r);
            if row.len() > k {
                for w in row.windows(k + 1) {
                    let d: f64 = w.iter().zip(&binom).map(|(v, c)| v * c).sum();
                    best = best.max(d.abs() / hx.powi(k as i32));
                }
            }
        }
        for pos in 0..rows.len().saturating_sub(k) {
            let block = &rows[pos..=pos + k];
            if block.windows(2).any(|w| w[1] != w[0] + 1) {
                continue;
            }
            for i in 0..u.nx() {
                let d: f64 = block.iter().zip(&binom).map(|(&r, c)| u.get(j, i, r) * c).sum();
                best = best.max(d.abs() / ht.powi(k as i32));
            }
        }
    }
    best
}

/// Regularity orders from a family of successively halved grids.
pub fn regularity_from_grids(grids: &[GridFunction], opts: &ProfileOptions) -> Result<RegularityProfile> {
    if grids.len() < 2 {
        return Err(Error::Invalid("regularity profile needs at least two resolutions".into()));
    }
    let windows = opts
        .windows
        .iter()
        .map(|&window| {
            let quotients: Vec<Vec<f64>> = (1..=opts.k_max + 1)
                .map(|k| grids.iter().map(|g| difference_quotient(g, window, k)).collect())
                .collect();
            let ratios: Vec<Vec<f64>> = quotients
                .iter()
                .map(|q| q.windows(2).map(|p| p[1] / p[0].max(f64::MIN_POSITIVE)).collect())
                .collect();
            let bounded = |q: &Vec<f64>| {
                q.windows(2)
                    .all(|p| p[1] <= opts.growth * p[0] || p[1] <= opts.floor)
            };
            let order = (1..=opts.k_max)
                .take_while(|&k| quotients[..=k].iter().all(bounded))
                .last()
                .unwrap_or(0);
            WindowProfile {
                window,
                order,
                quotients,
                ratios,
            }
        })
        .collect();
    Ok(RegularityProfile {
        k_max: opts.k_max,
        growth: opts.growth,
        resolutions: grids.iter().map(|g| [g.nx(), g.nt()]).collect(),
        windows,
    })
}

/// Solves at the base resolution and at `levels − 1` halvings of the mesh
/// width, then measures the profile.
pub fn regularity_profile(
    problem: &Problem,
    t_end: f64,
    cfg: &SolveConfig,
    opts: &ProfileOptions,
    levels: usize,
) -> Result<(RegularityProfile, Vec<GridFunction>)> {
    let periodic = problem.sys.domain().start().is_none();
    let grids: Vec<GridFunction> = (0..levels.max(2))
        .into_par_iter()
        .map(|r| {
            let mut c = cfg.clone();
            c.nx = ((cfg.nx - 1) << r) + 1;
            c.nt = if periodic { cfg.nt << r } else { ((cfg.nt - 1) << r) + 1 };
            c.verify = None;
            let mut solver = Solver::new(problem, &c)?;
            let b = if periodic {
                solver.solve_periodic(None)?
            } else {
                solver.solve_ibvp(t_end, None)?
            };
            Ok(b.u)
        })
        .collect::<Result<_>>()?;
    let mut opts = opts.clone();
    if periodic {
        for w in &mut opts.windows {
            w.1 = w.1.min(PERIOD);
        }
    }
    Ok((regularity_from_grids(&grids, &opts)?, grids))
}

/// Start of the first window from which every later window attains order `k`.
pub fn smoothing_time(profile: &RegularityProfile, k: usize) -> Option<f64> {
    let idx = profile.windows.iter().rposition(|w| w.order < k);
    match idx {
        None => profile.windows.first().map(|w| w.window.0),
        Some(i) => profile.windows.get(i + 1).map(|w| w.window.0),
    }
}

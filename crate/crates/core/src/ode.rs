//! Adaptive Dormand–Prince 5(4) integration with continuous output.

#[derive(Debug, Clone, Copy)]
pub struct OdeOptions {
    pub rtol: f64,
    pub atol: f64,
    pub h_max: f64,
    /// Relative step floor; smaller steps count as underflow.
    pub h_min_rel: f64,
    pub max_steps: usize,
}

impl Default for OdeOptions {
    fn default() -> Self {
        OdeOptions {
            rtol: 1e-10,
            atol: 1e-12,
            h_max: 1.0 / 16.0,
            h_min_rel: 1e-13,
            max_steps: 200_000,
        }
    }
}

impl OdeOptions {
    pub fn with_tol(tol: f64) -> Self {
        OdeOptions {
            rtol: tol,
            atol: tol * 1e-2,
            ..Default::default()
        }
    }
}

/// Integration stopped because the step size collapsed at `x`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepFailure {
    pub x: f64,
}

/// One accepted step with its interpolation coefficients.
#[derive(Debug, Clone)]
struct Step {
    x0: f64,
    h: f64,
    rcont: [Vec<f64>; 5],
}

impl Step {
    fn eval(&self, x: f64, out: &mut [f64]) {
        let th = (x - self.x0) / self.h;
        let th1 = 1.0 - th;
        let [r1, r2, r3, r4, r5] = &self.rcont;
        for i in 0..out.len() {
            out[i] = r1[i] + th * (r2[i] + th1 * (r3[i] + th * (r4[i] + th1 * r5[i])));
        }
    }
}

/// Dense solution over `[x_start, x_end]` (either orientation).
#[derive(Debug, Clone)]
pub struct OdeSolution {
    pub x_start: f64,
    pub x_end: f64,
    pub y_end: Vec<f64>,
    steps: Vec<Step>,
    /// Set when an event terminated integration before the requested end.
    pub event: Option<f64>,
    pub n_steps: usize,
    pub n_rejected: usize,
    dim: usize,
    y_start: Vec<f64>,
}

impl OdeSolution {
    pub fn dim(&self) -> usize {
        self.dim
    }

    fn forward(&self) -> bool {
        self.x_end >= self.x_start
    }

    /// Whether `x` lies in the covered interval.
    pub fn covers(&self, x: f64) -> bool {
        let (lo, hi) = if self.forward() {
            (self.x_start, self.x_end)
        } else {
            (self.x_end, self.x_start)
        };
        x >= lo - 1e-14 && x <= hi + 1e-14
    }

    pub fn eval_into(&self, x: f64, out: &mut [f64]) {
        if self.steps.is_empty() {
            out.copy_from_slice(&self.y_start);
            return;
        }
        let fwd = self.forward();
        // first step whose end passes x
        let idx = self.steps.partition_point(|s| {
            let end = s.x0 + s.h;
            if fwd {
                end < x
            } else {
                end > x
            }
        });
        let step = &self.steps[idx.min(self.steps.len() - 1)];
        step.eval(x, out);
    }

    pub fn eval(&self, x: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        self.eval_into(x, &mut out);
        out
    }

    /// Step end points, useful as sample abscissae.
    pub fn mesh(&self) -> Vec<f64> {
        let mut m = vec![self.x_start];
        m.extend(self.steps.iter().map(|s| s.x0 + s.h));
        m
    }

    /// Appends a continuation that starts where `self` ends.
    pub fn append(&mut self, other: OdeSolution) {
        self.steps.extend(other.steps);
        self.x_end = other.x_end;
        self.y_end = other.y_end;
        self.event = other.event;
        self.n_steps += other.n_steps;
        self.n_rejected += other.n_rejected;
    }
}

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

/// Integrates `y' = f(x, y)` from `x0` to `x1`.
pub fn integrate<F>(f: F, x0: f64, y0: &[f64], x1: f64, opts: &OdeOptions) -> Result<OdeSolution, StepFailure>
where
    F: FnMut(f64, &[f64], &mut [f64]),
{
    integrate_with_event(f, x0, y0, x1, opts, None::<fn(f64, &[f64]) -> f64>)
}

/// As [`integrate`], stopping at the first zero of `event` reached from a
/// positive value. The root is located on the continuous output.
pub fn integrate_with_event<F, G>(
    mut f: F,
    x0: f64,
    y0: &[f64],
    x1: f64,
    opts: &OdeOptions,
    event: Option<G>,
) -> Result<OdeSolution, StepFailure>
where
    F: FnMut(f64, &[f64], &mut [f64]),
    G: Fn(f64, &[f64]) -> f64,
{
    let dim = y0.len();
    let mut sol = OdeSolution {
        x_start: x0,
        x_end: x0,
        y_end: y0.to_vec(),
        steps: Vec::new(),
        event: None,
        n_steps: 0,
        n_rejected: 0,
        dim,
        y_start: y0.to_vec(),
    };
    let span = x1 - x0;
    if span == 0.0 {
        return Ok(sol);
    }
    let dir = span.signum();
    let mut k: [Vec<f64>; 7] = std::array::from_fn(|_| vec![0.0; dim]);
    let mut y = y0.to_vec();
    let mut ytmp = vec![0.0; dim];
    let mut ynew = vec![0.0; dim];
    let mut x = x0;
    f(x, &y, &mut k[0]);
    let mut h = dir * opts.h_max.min(span.abs()).min(0.01);
    let mut g_prev = event.as_ref().map(|g| g(x, &y));

    while (x1 - x) * dir > 0.0 {
        if sol.n_steps + sol.n_rejected > opts.max_steps {
            return Err(StepFailure { x });
        }
        if (x + h - x1) * dir > 0.0 {
            h = x1 - x;
        }
        let hmin = opts.h_min_rel * x.abs().max(1.0);
        if h.abs() < hmin && (x1 - x).abs() > hmin {
            return Err(StepFailure { x });
        }
        let stage = |coef: &[(usize, f64)], k: &[Vec<f64>; 7], out: &mut [f64]| {
            for i in 0..dim {
                let mut s = 0.0;
                for &(idx, c) in coef {
                    s += c * k[idx][i];
                }
                out[i] = y[i] + h * s;
            }
        };
        stage(&[(0, A21)], &k, &mut ytmp);
        f(x + C2 * h, &ytmp, &mut k[1]);
        stage(&[(0, A31), (1, A32)], &k, &mut ytmp);
        f(x + C3 * h, &ytmp, &mut k[2]);
        stage(&[(0, A41), (1, A42), (2, A43)], &k, &mut ytmp);
        f(x + C4 * h, &ytmp, &mut k[3]);
        stage(&[(0, A51), (1, A52), (2, A53), (3, A54)], &k, &mut ytmp);
        f(x + C5 * h, &ytmp, &mut k[4]);
        stage(&[(0, A61), (1, A62), (2, A63), (3, A64), (4, A65)], &k, &mut ytmp);
        f(x + h, &ytmp, &mut k[5]);
        stage(&[(0, A71), (2, A73), (3, A74), (4, A75), (5, A76)], &k, &mut ynew);
        let xnew = x + h;
        f(xnew, &ynew, &mut k[6]);

        let mut err = 0.0;
        for i in 0..dim {
            let e = h * (E1 * k[0][i] + E3 * k[2][i] + E4 * k[3][i] + E5 * k[4][i] + E6 * k[5][i] + E7 * k[6][i]);
            let sc = opts.atol + opts.rtol * y[i].abs().max(ynew[i].abs());
            err += (e / sc) * (e / sc);
        }
        let err = if dim > 0 { (err / dim as f64).sqrt() } else { 0.0 };
        if !err.is_finite() {
            sol.n_rejected += 1;
            h *= 0.2;
            continue;
        }
        let fac = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
        if err <= 1.0 {
            let mut rc: [Vec<f64>; 5] = std::array::from_fn(|_| vec![0.0; dim]);
            for i in 0..dim {
                let ydiff = ynew[i] - y[i];
                let bspl = h * k[0][i] - ydiff;
                rc[0][i] = y[i];
                rc[1][i] = ydiff;
                rc[2][i] = bspl;
                rc[3][i] = ydiff - h * k[6][i] - bspl;
                rc[4][i] = h
                    * (D1 * k[0][i] + D3 * k[2][i] + D4 * k[3][i] + D5 * k[4][i] + D6 * k[5][i] + D7 * k[6][i]);
            }
            let step = Step { x0: x, h, rcont: rc };
            sol.n_steps += 1;
            if let (Some(g), Some(gp)) = (event.as_ref(), g_prev) {
                let gn = g(xnew, &ynew);
                if gp > 0.0 && gn <= 0.0 {
                    let root = locate_root(&step, g, x, xnew, &mut ytmp);
                    let mut yr = vec![0.0; dim];
                    step.eval(root, &mut yr);
                    let trimmed = Step { x0: x, h, rcont: step.rcont };
                    sol.steps.push(trimmed);
                    sol.x_end = root;
                    sol.y_end = yr;
                    sol.event = Some(root);
                    return Ok(sol);
                }
                g_prev = Some(gn);
            }
            sol.steps.push(step);
            x = xnew;
            y.copy_from_slice(&ynew);
            k.swap(0, 6);
            h = dir * (h.abs() * fac).min(opts.h_max);
        } else {
            sol.n_rejected += 1;
            h *= fac.min(1.0);
        }
    }
    sol.x_end = x1;
    sol.y_end = y;
    Ok(sol)
}

fn locate_root<G: Fn(f64, &[f64]) -> f64>(step: &Step, g: &G, mut a: f64, mut b: f64, buf: &mut [f64]) -> f64 {
    // invariant: g(a) > 0 >= g(b)
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if m == a || m == b {
            break;
        }
        step.eval(m, buf);
        if g(m, buf) > 0.0 {
            a = m;
        } else {
            b = m;
        }
    }
    b
}

/// One ulp-scale step from `x` toward `toward`.
fn nudge(x: f64, toward: f64) -> f64 {
    x + (toward - x).signum() * x.abs().max(1.0) * f64::EPSILON
}

/// Integrates across the sorted `splits` strictly between `x0` and `x1`,
/// restarting the integrator at each one so that steps never straddle a
/// discontinuity of the right-hand side.
pub fn integrate_split<F, G>(
    mut f: F,
    x0: f64,
    y0: &[f64],
    x1: f64,
    splits: &[f64],
    opts: &OdeOptions,
    event: Option<G>,
) -> Result<OdeSolution, StepFailure>
where
    F: FnMut(f64, &[f64], &mut [f64]),
    G: Fn(f64, &[f64]) -> f64,
{
    let (lo, hi) = if x0 <= x1 { (x0, x1) } else { (x1, x0) };
    let mut cuts: Vec<f64> = splits.iter().copied().filter(|&s| s > lo && s < hi).collect();
    if x0 > x1 {
        cuts.sort_by(|a, b| b.total_cmp(a));
    } else {
        cuts.sort_by(f64::total_cmp);
    }
    cuts.push(x1);
    let mut start = x0;
    let mut sol: Option<OdeSolution> = None;
    let mut y = y0.to_vec();
    for end in cuts {
        // evaluate the right-hand side on the segment's own side of each cut
        let (s0, s1) = (nudge(start, end), nudge(end, start));
        let inner = |x: f64, y: &[f64], dy: &mut [f64]| {
            let xe = if x == start { s0 } else if x == end { s1 } else { x };
            f(xe, y, dy)
        };
        let seg = integrate_with_event(inner, start, &y, end, opts, event.as_ref())?;
        y = seg.y_end.clone();
        let stopped = seg.event.is_some();
        match sol.as_mut() {
            None => sol = Some(seg),
            Some(s) => s.append(seg),
        }
        if stopped {
            break;
        }
        start = end;
    }
    Ok(sol.expect("at least one segment"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_growth_and_dense_output() {
        let sol = integrate(|_, y, dy| dy[0] = y[0], 0.0, &[1.0], 2.0, &OdeOptions::default()).unwrap();
        assert!((sol.y_end[0] - 2f64.exp()).abs() < 1e-8);
        for i in 0..=40 {
            let x = 2.0 * i as f64 / 40.0;
            assert!((sol.eval(x)[0] - x.exp()).abs() < 1e-8 * x.exp(), "x={x}");
        }
    }

    #[test]
    fn backward_integration() {
        let sol = integrate(|x, _, dy| dy[0] = x.cos(), 1.0, &[1f64.sin()], -1.0, &OdeOptions::default()).unwrap();
        assert!((sol.y_end[0] - (-1f64).sin()).abs() < 1e-10);
        assert!((sol.eval(0.25)[0] - 0.25f64.sin()).abs() < 1e-10);
    }

    #[test]
    fn event_stops_at_crossing() {
        // y = 1 - x crosses zero at x = 1
        let sol = integrate_with_event(
            |_, _, dy| dy[0] = -1.0,
            0.0,
            &[1.0],
            3.0,
            &OdeOptions::default(),
            Some(|_: f64, y: &[f64]| y[0]),
        )
        .unwrap();
        assert!((sol.event.unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn split_integration_of_discontinuous_field() {
        let rhs = |x: f64, _: &[f64], dy: &mut [f64]| dy[0] = if x < 0.5 { 1.0 } else { 2.0 };
        let sol =
            integrate_split(rhs, 0.0, &[0.0], 1.0, &[0.5], &OdeOptions::default(), None::<fn(f64, &[f64]) -> f64>)
                .unwrap();
        assert!((sol.y_end[0] - 1.5).abs() < 1e-13);
        assert!((sol.eval(0.75)[0] - 1.0).abs() < 1e-13);
        assert!(sol.mesh().contains(&0.5));
    }
}

//! Hyperbolic systems `(∂_t + a ∂_x + b) u = f` on `x ∈ [0,1]` and checks of
//! the structural hypotheses the solvers rely on.

use serde::Serialize;

use crate::coefficient::CoefficientField;
use crate::error::{Error, Result};

/// Time period of periodic problems.
pub const PERIOD: f64 = 2.0 * std::f64::consts::PI;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, serde::Deserialize, schemars::JsonSchema)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TimeDomain {
    /// `T < t < ∞`, initial data given at `t = T`.
    HalfStrip { t0: f64 },
    FullStrip,
    /// Full strip with `2π`-periodicity in `t`.
    Periodic,
}

impl TimeDomain {
    pub fn start(&self) -> Option<f64> {
        match self {
            TimeDomain::HalfStrip { t0 } => Some(*t0),
            _ => None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct HyperbolicSystem {
    n: usize,
    m: usize,
    a: Vec<CoefficientField>,
    b: Vec<Vec<CoefficientField>>,
    f: Vec<CoefficientField>,
    domain: TimeDomain,
}

impl HyperbolicSystem {
    pub fn new(
        m: usize,
        a: Vec<CoefficientField>,
        b: Vec<Vec<CoefficientField>>,
        f: Vec<CoefficientField>,
        domain: TimeDomain,
    ) -> Result<Self> {
        let n = a.len();
        if n == 0 {
            return Err(Error::Invalid("system needs at least one component".into()));
        }
        if m > n {
            return Err(Error::Invalid(format!("split index m={m} exceeds n={n}")));
        }
        if b.len() != n || b.iter().any(|row| row.len() != n) {
            return Err(Error::Invalid(format!("b must be {n}x{n}")));
        }
        if f.len() != n {
            return Err(Error::Invalid(format!("f must have {n} entries")));
        }
        let sys = HyperbolicSystem { n, m, a, b, f, domain };
        if domain == TimeDomain::Periodic {
            sys.verify_periodic()?;
        }
        Ok(sys)
    }

    /// Convenience constructor from expression strings.
    pub fn parse(m: usize, a: &[&str], b: &[&[&str]], f: &[&str], domain: TimeDomain) -> Result<Self> {
        let a = a.iter().map(|s| CoefficientField::parse(s)).collect::<Result<Vec<_>>>()?;
        let b = b
            .iter()
            .map(|row| row.iter().map(|s| CoefficientField::parse(s)).collect::<Result<Vec<_>>>())
            .collect::<Result<Vec<_>>>()?;
        let f = f.iter().map(|s| CoefficientField::parse(s)).collect::<Result<Vec<_>>>()?;
        Self::new(m, a, b, f, domain)
    }

    fn verify_periodic(&self) -> Result<()> {
        let fields = self.a.iter().chain(self.b.iter().flatten()).chain(self.f.iter());
        for c in fields {
            if c.is_time_independent() {
                continue;
            }
            for i in 0..9 {
                let x = i as f64 / 8.0;
                for k in 0..16 {
                    let t = k as f64 * PERIOD / 16.0;
                    let (v0, v1) = (c.eval(x, t), c.eval(x, t + PERIOD));
                    if (v0 - v1).abs() > 1e-9 * (1.0 + v0.abs()) {
                        return Err(Error::Invalid(format!(
                            "coefficient {c:?} is not 2π-periodic at (x={x}, t={t})"
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn with_domain(&self, domain: TimeDomain) -> Result<Self> {
        Self::new(self.m, self.a.clone(), self.b.clone(), self.f.clone(), domain)
    }

    pub fn with_f(&self, f: Vec<CoefficientField>) -> Result<Self> {
        Self::new(self.m, self.a.clone(), self.b.clone(), f, self.domain)
    }

    pub fn with_b(&self, b: Vec<Vec<CoefficientField>>) -> Result<Self> {
        Self::new(self.m, self.a.clone(), b, self.f.clone(), self.domain)
    }

    pub fn n(&self) -> usize {
        self.n
    }
    pub fn m(&self) -> usize {
        self.m
    }
    pub fn domain(&self) -> TimeDomain {
        self.domain
    }
    /// True for components travelling to the right (zero-based `j < m`).
    pub fn is_rightward(&self, j: usize) -> bool {
        j < self.m
    }

    #[inline]
    pub fn a(&self, j: usize, x: f64, t: f64) -> f64 {
        self.a[j].eval(x, t)
    }
    #[inline]
    pub fn a_dt(&self, j: usize, x: f64, t: f64) -> f64 {
        self.a[j].dt(x, t)
    }
    #[inline]
    pub fn b(&self, j: usize, k: usize, x: f64, t: f64) -> f64 {
        self.b[j][k].eval(x, t)
    }
    #[inline]
    pub fn f(&self, j: usize, x: f64, t: f64) -> f64 {
        self.f[j].eval(x, t)
    }

    pub fn a_field(&self, j: usize) -> &CoefficientField {
        &self.a[j]
    }
    pub fn b_field(&self, j: usize, k: usize) -> &CoefficientField {
        &self.b[j][k]
    }
    pub fn f_field(&self, j: usize) -> &CoefficientField {
        &self.f[j]
    }

    /// No off-diagonal coupling.
    pub fn is_decoupled(&self) -> bool {
        (0..self.n).all(|j| (0..self.n).all(|k| j == k || self.b[j][k].is_zero()))
    }

    pub fn forcing_is_zero(&self) -> bool {
        self.f.iter().all(|f| f.is_zero())
    }

    /// `a_j` and `b_jj` do not depend on `t`; characteristics and their
    /// weights are then invariant under time shifts.
    pub fn transport_time_independent(&self, j: usize) -> bool {
        self.a[j].is_time_independent() && self.b[j][j].is_time_independent()
    }

    /// `a` and `b` do not depend on `t`; the forcing may.
    pub fn operator_time_independent(&self) -> bool {
        self.a.iter().chain(self.b.iter().flatten()).all(|c| c.is_time_independent())
    }

    pub fn is_time_independent(&self) -> bool {
        self.a
            .iter()
            .chain(self.b.iter().flatten())
            .chain(self.f.iter())
            .all(|c| c.is_time_independent())
    }

    /// Sorted union of all coefficient breakpoints relevant to component `j`.
    pub fn breakpoints(&self, j: usize) -> Vec<f64> {
        let mut out: Vec<f64> = self.a[j]
            .breakpoints()
            .iter()
            .chain(self.b[j].iter().flat_map(|c| c.breakpoints().iter()))
            .chain(self.f[j].breakpoints().iter())
            .copied()
            .collect();
        out.sort_by(f64::total_cmp);
        out.dedup();
        out
    }

    pub fn all_breakpoints(&self) -> Vec<f64> {
        let mut out: Vec<f64> = (0..self.n).flat_map(|j| self.breakpoints(j)).collect();
        for j in 0..self.n {
            for k in 0..self.n {
                out.extend_from_slice(self.b[k][j].breakpoints());
            }
        }
        out.sort_by(f64::total_cmp);
        out.dedup();
        out
    }

    /// Largest `|a_j|` on a coarse sample; scale for separation thresholds.
    pub fn speed_scale(&self, window: (f64, f64)) -> f64 {
        let mut s: f64 = 0.0;
        for j in 0..self.n {
            for i in 0..17 {
                for k in 0..17 {
                    let x = i as f64 / 16.0;
                    let t = window.0 + (window.1 - window.0) * k as f64 / 16.0;
                    s = s.max(self.a(j, x, t).abs());
                }
            }
        }
        s
    }
}

/// Tensor sample grid over `[0,1] × window`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SampleGrid {
    pub nx: usize,
    pub nt: usize,
    pub window: (f64, f64),
}

impl SampleGrid {
    pub fn new(nx: usize, nt: usize, window: (f64, f64)) -> Self {
        SampleGrid { nx, nt, window }
    }

    /// Default window for a domain: `[t0, t0 + 2π]`, or one period.
    pub fn for_domain(domain: TimeDomain, nx: usize, nt: usize) -> Self {
        let t0 = domain.start().unwrap_or(0.0);
        SampleGrid::new(nx, nt, (t0, t0 + PERIOD))
    }

    pub fn x(&self, i: usize) -> f64 {
        i as f64 / (self.nx - 1) as f64
    }

    pub fn t(&self, k: usize) -> f64 {
        self.window.0 + (self.window.1 - self.window.0) * k as f64 / (self.nt - 1) as f64
    }

    fn validate(&self) -> Result<()> {
        if self.nx < 2 || self.nt < 2 {
            return Err(Error::Invalid("sample grid needs at least 2 points per axis".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Witness {
    pub component: usize,
    pub x: f64,
    pub t: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConditionReport {
    /// `min_j min_grid sign_j a_j`, positive iff the sign pattern holds.
    pub l1_margin: f64,
    pub l1_witness: Witness,
    /// `min_j min_grid |a_j|`.
    pub l2_margin: f64,
    pub l2_witness: Witness,
    pub l1_ok: bool,
    pub l2_ok: bool,
    pub levy_defect: Option<f64>,
    pub bv_ok: Option<bool>,
    pub grid: SampleGrid,
}

impl ConditionReport {
    pub fn passed(&self) -> bool {
        self.l1_ok && self.l2_ok && self.levy_defect.is_none_or(|d| d.is_finite()) && self.bv_ok.unwrap_or(true)
    }
}

pub fn check_hyperbolicity(sys: &HyperbolicSystem, grid: &SampleGrid) -> Result<ConditionReport> {
    grid.validate()?;
    let mut l1 = (f64::INFINITY, Witness { component: 0, x: 0.0, t: 0.0 });
    let mut l2 = l1;
    for j in 0..sys.n() {
        let sign = if sys.is_rightward(j) { 1.0 } else { -1.0 };
        for k in 0..grid.nt {
            let t = grid.t(k);
            for i in 0..grid.nx {
                let x = grid.x(i);
                let a = sys.a(j, x, t);
                if !a.is_finite() {
                    return Err(Error::Evaluation {
                        x,
                        t,
                        msg: format!("a_{} is not finite", j + 1),
                    });
                }
                let w = Witness { component: j, x, t };
                if sign * a < l1.0 {
                    l1 = (sign * a, w);
                }
                if a.abs() < l2.0 {
                    l2 = (a.abs(), w);
                }
            }
        }
    }
    Ok(ConditionReport {
        l1_margin: l1.0,
        l1_witness: l1.1,
        l2_margin: l2.0,
        l2_witness: l2.1,
        l1_ok: l1.0 > 0.0,
        l2_ok: l2.0 > 0.0,
        levy_defect: None,
        bv_ok: None,
        grid: *grid,
    })
}

/// Reading of the coupling factorization.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, serde::Deserialize, schemars::JsonSchema)]
#[serde(rename_all = "snake_case")]
pub enum LevyWeighting {
    /// `b_jk = p_jk (a_k − a_j)`.
    #[default]
    Plain,
    /// `a_k b_jk = p_jk (a_j − a_k)`.
    SpeedWeighted,
}

#[derive(Debug, Clone, Copy, Serialize, serde::Deserialize, schemars::JsonSchema)]
#[serde(default, deny_unknown_fields)]
pub struct LevyOptions {
    /// Separation threshold; `None` selects `1e-6 × speed scale`.
    pub eps_sep: Option<f64>,
    pub tol: f64,
    pub weighting: LevyWeighting,
}

impl Default for LevyOptions {
    fn default() -> Self {
        LevyOptions {
            eps_sep: None,
            tol: 1e-10,
            weighting: LevyWeighting::Plain,
        }
    }
}

/// Sup norms above this are treated as unbounded.
const P_BOUND_CAP: f64 = 1e8;

#[derive(Debug, Clone, Serialize)]
pub struct LevyFactorization {
    /// Sampled `p_jk` on the check grid, row-major `[k_t][i_x]`; empty on the diagonal.
    #[serde(skip)]
    pub p: Vec<Vec<Vec<f64>>>,
    pub sup_p: Vec<Vec<f64>>,
    pub defect: f64,
    pub defect_witness: Option<Witness>,
    pub bounded: bool,
    /// Per-entry BV norm `sup|p| + TV(p)`, only for time-independent checks.
    pub bv_norms: Option<Vec<Vec<f64>>>,
    pub bv_ok: Option<bool>,
    pub eps_sep: f64,
    pub tol: f64,
    pub weighting: LevyWeighting,
}

impl LevyFactorization {
    pub fn passed(&self) -> bool {
        self.defect <= self.tol && self.bounded && self.bv_ok.unwrap_or(true)
    }
}

fn factor_entry(sys: &HyperbolicSystem, j: usize, k: usize, x: f64, t: f64, w: LevyWeighting) -> (f64, f64) {
    let (aj, ak, b) = (sys.a(j, x, t), sys.a(k, x, t), sys.b(j, k, x, t));
    match w {
        LevyWeighting::Plain => (b, ak - aj),
        LevyWeighting::SpeedWeighted => (ak * b, aj - ak),
    }
}

pub fn check_levy(sys: &HyperbolicSystem, grid: &SampleGrid, opts: &LevyOptions) -> Result<LevyFactorization> {
    grid.validate()?;
    let n = sys.n();
    let eps = opts.eps_sep.unwrap_or(1e-6 * sys.speed_scale(grid.window).max(1.0));
    let mut p = vec![vec![Vec::new(); n]; n];
    let mut sup_p = vec![vec![0.0; n]; n];
    let mut defect: f64 = 0.0;
    let mut witness = None;
    for j in 0..n {
        for k in 0..n {
            if j == k {
                continue;
            }
            let mut samples = Vec::with_capacity(grid.nx * grid.nt);
            for kt in 0..grid.nt {
                let t = grid.t(kt);
                for i in 0..grid.nx {
                    let x = grid.x(i);
                    let (num, sep) = factor_entry(sys, j, k, x, t, opts.weighting);
                    let (pv, viol) = if sep.abs() > eps {
                        let pv = num / sep;
                        (pv, (num - pv * sep).abs())
                    } else {
                        (0.0, num.abs())
                    };
                    if viol > defect {
                        defect = viol;
                        witness = Some(Witness { component: j, x, t });
                    }
                    sup_p[j][k] = f64::max(sup_p[j][k], pv.abs());
                    samples.push(pv);
                }
            }
            p[j][k] = samples;
        }
    }
    let bounded = sup_p.iter().flatten().all(|s| s.is_finite() && *s <= P_BOUND_CAP);
    Ok(LevyFactorization {
        p,
        sup_p,
        defect,
        defect_witness: witness,
        bounded,
        bv_norms: None,
        bv_ok: None,
        eps_sep: eps,
        tol: opts.tol,
        weighting: opts.weighting,
    })
}

/// Sorted sample abscissae on `[0,1]` with both sides of every breakpoint.
fn bv_abscissae(n: usize, breakpoints: &[f64]) -> Vec<f64> {
    const SIDE: f64 = 1e-9;
    let mut xs: Vec<f64> = (0..=n).map(|i| i as f64 / n as f64).collect();
    for &b in breakpoints {
        xs.push((b - SIDE).max(0.0));
        xs.push((b + SIDE).min(1.0));
    }
    xs.sort_by(f64::total_cmp);
    xs.dedup();
    xs
}

/// Factorization check for time-independent coefficients plus a total
/// variation estimate of each `p_jk` on `(0,1)`.
pub fn check_bv_factorization(
    sys: &HyperbolicSystem,
    opts: &LevyOptions,
    resolution: usize,
) -> Result<LevyFactorization> {
    if !sys.operator_time_independent() {
        return Err(Error::Invalid("BV factorization requires time-independent coefficients".into()));
    }
    let grid = SampleGrid::new(resolution.max(2) + 1, 2, (0.0, 1.0));
    let mut rep = check_levy(sys, &grid, opts)?;
    let n = sys.n();
    let bps = sys.all_breakpoints();
    let eps = rep.eps_sep;
    let p_at = |j: usize, k: usize, x: f64| {
        let (num, sep) = factor_entry(sys, j, k, x, 0.0, opts.weighting);
        if sep.abs() > eps {
            num / sep
        } else {
            0.0
        }
    };
    let tv_sup = |j: usize, k: usize, res: usize| {
        let xs = bv_abscissae(res, &bps);
        let vals: Vec<f64> = xs.iter().map(|&x| p_at(j, k, x)).collect();
        let tv: f64 = vals.windows(2).map(|w| (w[1] - w[0]).abs()).sum();
        let sup = vals.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        (tv, sup)
    };
    let mut norms = vec![vec![0.0; n]; n];
    let mut ok = true;
    for j in 0..n {
        for k in 0..n {
            if j == k {
                continue;
            }
            let (tv1, sup) = tv_sup(j, k, resolution);
            let (tv2, sup2) = tv_sup(j, k, 4 * resolution);
            // variation that keeps growing under refinement is unbounded
            if !(tv2.is_finite() && tv2 <= 1.5 * tv1 + 1e-9) {
                ok = false;
            }
            norms[j][k] = sup.max(sup2) + tv2;
        }
    }
    rep.bv_norms = Some(norms);
    rep.bv_ok = Some(ok && rep.bounded);
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_by_two(b12: &str) -> HyperbolicSystem {
        HyperbolicSystem::parse(
            1,
            &["1", "-1"],
            &[&["0", b12], &["0", "0"]],
            &["0", "0"],
            TimeDomain::FullStrip,
        )
        .unwrap()
    }

    #[test]
    fn constant_speeds_pass() {
        let sys = two_by_two("0");
        let rep = check_hyperbolicity(&sys, &SampleGrid::for_domain(sys.domain(), 8, 8)).unwrap();
        assert_eq!(rep.l1_margin, 1.0);
        assert_eq!(rep.l2_margin, 1.0);
        assert!(rep.passed());
    }

    #[test]
    fn sign_change_fails_with_witness() {
        let sys = HyperbolicSystem::parse(1, &["x - 0.5"], &[&["0"]], &["0"], TimeDomain::FullStrip).unwrap();
        let rep = check_hyperbolicity(&sys, &SampleGrid::for_domain(sys.domain(), 11, 4)).unwrap();
        assert!(!rep.passed());
        assert!(rep.l1_margin <= 0.0);
        assert!((rep.l2_witness.x - 0.5).abs() < 0.1);
    }

    #[test]
    fn oscillating_speed_margin() {
        let sys = HyperbolicSystem::parse(1, &["2 + sin(t)"], &[&["0"]], &["0"], TimeDomain::FullStrip).unwrap();
        let grid = SampleGrid::new(64, 64, (0.0, PERIOD));
        let rep = check_hyperbolicity(&sys, &grid).unwrap();
        // dense-sampling oracle: the minimum of 2 + sin over the same 64 nodes
        let oracle = (0..64).map(|k| 2.0 + grid.t(k).sin()).fold(f64::INFINITY, f64::min);
        assert_eq!(rep.l2_margin, oracle);
        assert!((rep.l2_margin - 1.0).abs() < 2e-3);
    }

    #[test]
    fn grid_needs_two_points() {
        let sys = two_by_two("0");
        assert!(check_hyperbolicity(&sys, &SampleGrid::new(1, 4, (0.0, 1.0))).is_err());
    }

    #[test]
    fn levy_constant_coupling() {
        let sys = two_by_two("2");
        let grid = SampleGrid::new(5, 5, (0.0, 1.0));
        let rep = check_levy(&sys, &grid, &LevyOptions::default()).unwrap();
        assert!(rep.p[0][1].iter().all(|&p| p == -1.0));
        assert_eq!(rep.defect, 0.0);
        assert!(rep.passed());
    }

    #[test]
    fn levy_zero_coupling() {
        let sys = two_by_two("0");
        let rep = check_levy(&sys, &SampleGrid::new(5, 5, (0.0, 1.0)), &LevyOptions::default()).unwrap();
        assert!(rep.p[0][1].iter().all(|&p| p == 0.0));
        assert_eq!(rep.defect, 0.0);
    }

    #[test]
    fn levy_degenerate_coupling_fails() {
        let sys =
            HyperbolicSystem::parse(2, &["1", "1"], &[&["0", "1"], &["0", "0"]], &["0", "0"], TimeDomain::FullStrip)
                .unwrap();
        let rep = check_levy(&sys, &SampleGrid::new(5, 5, (0.0, 1.0)), &LevyOptions::default()).unwrap();
        assert_eq!(rep.defect, 1.0);
        assert!(!rep.passed());
    }

    #[test]
    fn levy_is_linear_in_coupling() {
        let grid = SampleGrid::new(6, 6, (0.0, 2.0));
        let base = check_levy(&two_by_two("1 + x*sin(t)"), &grid, &LevyOptions::default()).unwrap();
        for lambda in [0.0, 1.0, 2.0] {
            let scaled = check_levy(&two_by_two(&format!("{lambda}*(1 + x*sin(t))")), &grid, &LevyOptions::default())
                .unwrap();
            for (p, q) in base.p[0][1].iter().zip(&scaled.p[0][1]) {
                assert!((lambda * p - q).abs() < 1e-14);
            }
            assert!((scaled.defect - lambda * base.defect).abs() < 1e-14);
        }
    }

    #[test]
    fn speed_weighted_reading_is_selectable() {
        let sys = two_by_two("2");
        let opts = LevyOptions {
            weighting: LevyWeighting::SpeedWeighted,
            ..Default::default()
        };
        let rep = check_levy(&sys, &SampleGrid::new(3, 3, (0.0, 1.0)), &opts).unwrap();
        // a_2 b_12 / (a_1 - a_2) = -2 / 2
        assert!(rep.p[0][1].iter().all(|&p| p == -1.0));
    }

    #[test]
    fn bv_norm_of_one_jump_step() {
        // p_12 = b_12 / (a_2 - a_1) = -b_12 / 2 in {-1, -2}: jump 1, sup 2
        let sys = two_by_two("piecewise(x < 0.5, 2, 4)");
        let rep = check_bv_factorization(&sys, &LevyOptions::default(), 256).unwrap();
        assert!((rep.bv_norms.unwrap()[0][1] - 3.0).abs() < 1e-12);
        assert_eq!(rep.bv_ok, Some(true));
    }

    #[test]
    fn bv_norm_of_linear_ratio() {
        // b_12 = -2x gives p_12 = x
        let sys = two_by_two("-2*x");
        let rep = check_bv_factorization(&sys, &LevyOptions::default(), 256).unwrap();
        assert!((rep.bv_norms.unwrap()[0][1] - 2.0).abs() < 1e-12);
        let zero = check_bv_factorization(&two_by_two("0"), &LevyOptions::default(), 64).unwrap();
        assert_eq!(zero.bv_norms.unwrap()[0][1], 0.0);
    }

    #[test]
    fn bv_detects_unbounded_variation() {
        let sys = two_by_two("sin(1/(x + 1e-9))");
        let rep = check_bv_factorization(&sys, &LevyOptions::default(), 64).unwrap();
        assert_eq!(rep.bv_ok, Some(false));
    }

    #[test]
    fn bv_requires_time_independence() {
        assert!(check_bv_factorization(&two_by_two("sin(t)"), &LevyOptions::default(), 16).is_err());
    }

    #[test]
    fn periodic_domain_rejects_aperiodic_data() {
        let r = HyperbolicSystem::parse(1, &["1"], &[&["0"]], &["t"], TimeDomain::Periodic);
        assert!(r.is_err());
        let ok = HyperbolicSystem::parse(1, &["1"], &[&["0"]], &["cos(t)"], TimeDomain::Periodic);
        assert!(ok.is_ok());
    }

    #[test]
    fn finer_grid_never_raises_margins() {
        let sys = HyperbolicSystem::parse(1, &["2 + sin(3*t)*x"], &[&["0"]], &["0"], TimeDomain::FullStrip).unwrap();
        let coarse = check_hyperbolicity(&sys, &SampleGrid::new(5, 5, (0.0, 4.0))).unwrap();
        let fine = check_hyperbolicity(&sys, &SampleGrid::new(9, 9, (0.0, 4.0))).unwrap();
        assert!(fine.l2_margin <= coarse.l2_margin);
        assert!(fine.l1_margin <= coarse.l1_margin);
    }
}

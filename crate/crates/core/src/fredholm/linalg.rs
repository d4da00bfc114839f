use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::C64;

pub type CMat = DMatrix<C64>;

/// Largest entry modulus.
pub(crate) fn max_abs<'a>(entries: impl IntoIterator<Item = &'a C64>) -> f64 {
    entries.into_iter().map(|z| z.norm()).fold(0.0, f64::max)
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, schemars::JsonSchema)]
#[serde(default, deny_unknown_fields)]
pub struct NullityOptions {
    /// `σ_{k+1}/σ_k` at or below this declares a rank drop.
    pub gap: f64,
    /// `σ_min/σ_max` at or above this declares full rank.
    pub full_rank: f64,
}

impl Default for NullityOptions {
    fn default() -> Self {
        NullityOptions { gap: 1e-6, full_rank: 1e-3 }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct NullityVerdict {
    /// `None` when the spectrum shows no clear gap.
    pub nullity: Option<usize>,
    pub singular_values: Vec<f64>,
    /// `σ_k / σ_{k+1}` across the declared drop (or `σ_max/σ_min` at full rank).
    pub gap_ratio: f64,
    /// Orthonormal right null vectors.
    #[serde(skip)]
    pub right: Vec<DVector<C64>>,
    /// Orthonormal left null vectors (`yᴴ M = 0`).
    #[serde(skip)]
    pub left: Vec<DVector<C64>>,
}

/// Nullity of a square matrix by the singular-value gap test.
pub fn nullity(m: &CMat, opts: &NullityOptions) -> NullityVerdict {
    let dim = m.nrows().min(m.ncols());
    if dim == 0 {
        return NullityVerdict {
            nullity: Some(m.ncols()),
            singular_values: vec![],
            gap_ratio: f64::INFINITY,
            right: vec![],
            left: vec![],
        };
    }
    let svd = m.clone().svd(true, true);
    let u = svd.u.expect("requested");
    let vt = svd.v_t.expect("requested");
    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let sv: Vec<f64> = order.iter().map(|&i| svd.singular_values[i]).collect();
    let top = sv[0];
    let (verdict, ratio) = if top == 0.0 {
        (Some(dim), f64::INFINITY)
    } else if sv[dim - 1] / top >= opts.full_rank {
        (Some(0), top / sv[dim - 1])
    } else {
        let (k, r) = (0..dim - 1)
            .map(|k| (k, sv[k] / sv[k + 1].max(f64::MIN_POSITIVE)))
            .fold((0, 0.0), |acc, v| if v.1 > acc.1 { v } else { acc });
        if r * opts.gap >= 1.0 && sv[k + 1] / top <= opts.gap {
            (Some(dim - k - 1), r)
        } else {
            (None, r)
        }
    };
    let null = verdict.unwrap_or(0);
    let tail = &order[dim - null..];
    let right = tail.iter().map(|&i| vt.row(i).adjoint().into_owned()).collect();
    let left = tail.iter().map(|&i| u.column(i).into_owned()).collect();
    NullityVerdict {
        nullity: verdict,
        singular_values: sv,
        gap_ratio: ratio,
        right,
        left,
    }
}

/// Orthonormal basis of the span of `vectors` in the inner product
/// `⟨x, y⟩ = Σ w_i x_i conj(y_i)`, returned in `W^{1/2}`-scaled coordinates.
fn weighted_basis(vectors: &[DVector<C64>], sqrt_w: &[f64]) -> CMat {
    let cols: Vec<DVector<C64>> = vectors
        .iter()
        .map(|v| DVector::from_iterator(v.len(), v.iter().zip(sqrt_w).map(|(z, w)| z * *w)))
        .collect();
    let a = CMat::from_columns(&cols);
    a.qr().q()
}

/// Largest principal angle between two equal-dimension subspaces in the
/// weighted inner product.
pub fn largest_principal_angle(a: &[DVector<C64>], b: &[DVector<C64>], weights: &[f64]) -> f64 {
    if a.is_empty() && b.is_empty() {
        return 0.0;
    }
    if a.len() != b.len() || a.is_empty() {
        return std::f64::consts::FRAC_PI_2;
    }
    let sw: Vec<f64> = weights.iter().map(|w| w.sqrt()).collect();
    let qa = weighted_basis(a, &sw);
    let qb = weighted_basis(b, &sw);
    // sin θ_max = ‖(I − Q_a Q_aᴴ) Q_b‖₂
    let resid = &qb - &qa * (qa.adjoint() * &qb);
    let s = resid.singular_values().iter().cloned().fold(0.0, f64::max);
    s.min(1.0).asin()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn detects_rank_one_drop() {
        let m = CMat::from_row_slice(2, 2, &[C64::new(1.0, 0.0), C64::new(-1.0, 0.0), C64::new(-1.0, 0.0), C64::new(1.0, 0.0)]);
        let v = nullity(&m, &NullityOptions::default());
        assert_eq!(v.nullity, Some(1));
        assert!(v.gap_ratio >= 1e6);
        let r = &v.right[0];
        assert!((r[0] - r[1]).norm() < 1e-14);
        assert!((m.adjoint() * &v.left[0]).norm() < 1e-14);
    }

    #[test]
    fn ambiguous_spectrum_is_indeterminate() {
        let m = CMat::from_diagonal(&DVector::from_vec(vec![C64::new(1.0, 0.0), C64::new(1e-4, 0.0)]));
        assert_eq!(nullity(&m, &NullityOptions::default()).nullity, None);
        let full = CMat::identity(3, 3);
        assert_eq!(nullity(&full, &NullityOptions::default()).nullity, Some(0));
    }

    #[test]
    fn angle_between_lines() {
        let w = vec![1.0, 1.0];
        let a = vec![DVector::from_vec(vec![C64::new(1.0, 0.0), C64::new(0.0, 0.0)])];
        let b = vec![DVector::from_vec(vec![C64::new(0.0, 2.0), C64::new(0.0, 0.0)])];
        assert!(largest_principal_angle(&a, &b, &w) < 1e-15);
        let c = vec![DVector::from_vec(vec![C64::new(1.0, 0.0), C64::new(1.0, 0.0)])];
        assert!((largest_principal_angle(&a, &c, &w) - std::f64::consts::FRAC_PI_4).abs() < 1e-12);
    }
}

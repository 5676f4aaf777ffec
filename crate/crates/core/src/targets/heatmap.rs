use serde::{Deserialize, Serialize};

use super::{DenseGrid2D, GtObject};
use crate::error::Result;
use crate::geometry::{CellAnchor, GridSpec};
use crate::scalar::Real;

/// How overlapping per-object Gaussians are merged into one heatmap.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HeatmapCombine {
    /// Per-cell maximum: centers stay exactly 1 and every value is in [0, 1].
    #[default]
    Max,
    /// Literal sum of kernels; may exceed 1 between adjacent objects.
    Sum,
}

/// Center heatmap with per-cell max combination.
pub fn make_heatmap<T: Real>(
    objects: &[GtObject<T>],
    grid: &GridSpec<T>,
    sigma: T,
) -> Result<DenseGrid2D<T>> {
    make_heatmap_with(objects, grid, sigma, HeatmapCombine::Max)
}

/// Center heatmap: each object contributes `exp(-((j-j*)^2 + (k-k*)^2) / sigma^2)`
/// around its quantized cell `(j*, k*)`; `sigma` is in cell units.
pub fn make_heatmap_with<T: Real>(
    objects: &[GtObject<T>],
    grid: &GridSpec<T>,
    sigma: T,
    combine: HeatmapCombine,
) -> Result<DenseGrid2D<T>> {
    if !(sigma > T::zero()) || !sigma.is_finite() {
        return Err(crate::Error::invalid("sigma", "must be positive and finite"));
    }
    let centers = objects
        .iter()
        .map(|o| grid.quantize(o.bbox.cx, o.bbox.cy))
        .collect::<Result<Vec<_>>>()?;

    let mut out = DenseGrid2D::zeros(*grid);
    let sigma2 = sigma * sigma;
    // Beyond this squared cell distance the kernel is below the smallest
    // normal float, so the window can stop there.
    let cutoff = -T::min_positive_value().ln() * sigma2;
    let reach = cutoff.sqrt().ceil().to_usize().unwrap_or(usize::MAX);
    for (jc, kc) in centers {
        let j_lo = jc.saturating_sub(reach);
        let j_hi = jc.saturating_add(reach).min(grid.nx() - 1);
        let k_lo = kc.saturating_sub(reach);
        let k_hi = kc.saturating_add(reach).min(grid.ny() - 1);
        for k in k_lo..=k_hi {
            let dk = T::from_usize_lossy(k.abs_diff(kc));
            for j in j_lo..=j_hi {
                let dj = T::from_usize_lossy(j.abs_diff(jc));
                let d2 = dj * dj + dk * dk;
                if d2 > cutoff {
                    continue;
                }
                let v = (-d2 / sigma2).exp();
                let cell = out.get_mut(j, k);
                *cell = match combine {
                    HeatmapCombine::Max => cell.max(v),
                    HeatmapCombine::Sum => *cell + v,
                };
            }
        }
    }
    Ok(out)
}

/// Density-aware weights: number of objects whose BEV distance to the cell
/// origin is below `th` meters.
pub fn make_daw<T: Real>(objects: &[GtObject<T>], grid: &GridSpec<T>, th: T) -> Result<DenseGrid2D<T>> {
    make_daw_with(objects, grid, th, CellAnchor::Origin)
}

pub fn make_daw_with<T: Real>(
    objects: &[GtObject<T>],
    grid: &GridSpec<T>,
    th: T,
    anchor: CellAnchor,
) -> Result<DenseGrid2D<T>> {
    if !(th > T::zero()) || !th.is_finite() {
        return Err(crate::Error::invalid("th", "must be positive and finite"));
    }
    for o in objects {
        grid.quantize(o.bbox.cx, o.bbox.cy)?;
    }
    let mut out = DenseGrid2D::zeros(*grid);
    let span = |lo: T, hi: T, min: T, d: T, n: usize| -> (usize, usize) {
        let a = ((lo - min) / d).floor() - T::one();
        let b = ((hi - min) / d).ceil() + T::one();
        let a = a.max(T::zero()).to_usize().unwrap_or(0);
        let b = b.max(T::zero()).to_usize().unwrap_or(0).min(n - 1);
        (a, b)
    };
    for o in objects {
        let (x, y) = (o.bbox.cx, o.bbox.cy);
        let (j_lo, j_hi) = span(x - th, x + th, grid.x_min(), grid.dx(), grid.nx());
        let (k_lo, k_hi) = span(y - th, y + th, grid.y_min(), grid.dy(), grid.ny());
        for k in k_lo..=k_hi {
            for j in j_lo..=j_hi {
                let (px, py) = grid.cell_point_unchecked(j, k, anchor);
                let dist = ((px - x) * (px - x) + (py - y) * (py - y)).sqrt();
                if dist < th {
                    *out.get_mut(j, k) += T::one();
                }
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Box3D;
    use proptest::prelude::*;

    fn grid() -> GridSpec<f64> {
        GridSpec::new(-6.0, 6.0, -3.0, 3.0, 0.3, 0.3).unwrap()
    }

    fn obj(id: u64, x: f64, y: f64) -> GtObject<f64> {
        GtObject {
            instance_id: id,
            frame: 0,
            bbox: Box3D::new(x, y, 0.0, 0.6, 0.6, 1.7, 0.0).unwrap(),
        }
    }

    #[test]
    fn empty_heatmap_is_zero() {
        let h = make_heatmap(&[], &grid(), 1.0).unwrap();
        assert!(h.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn single_object_kernel() {
        let g = grid();
        let o = obj(1, 0.1, 0.1);
        let (j, k) = g.quantize(0.1, 0.1).unwrap();
        let sigma = 1.5;
        let h = make_heatmap(&[o], &g, sigma).unwrap();
        assert_eq!(h.get(j, k), 1.0);
        let unit = (-1.0 / (sigma * sigma)).exp();
        for (a, b) in [(j + 1, k), (j - 1, k), (j, k + 1), (j, k - 1)] {
            assert_eq!(h.get(a, b), unit);
        }
        assert_eq!(h.get(j + 1, k + 1), (-2.0 / (sigma * sigma)).exp());
        assert_eq!(h.values().iter().filter(|&&v| v == 1.0).count(), 1);
    }

    #[test]
    fn duplicate_cell_is_idempotent_under_max() {
        let g = grid();
        let one = make_heatmap(&[obj(1, 1.0, 1.0)], &g, 1.0).unwrap();
        let two = make_heatmap(&[obj(1, 1.0, 1.0), obj(2, 1.05, 1.02)], &g, 1.0).unwrap();
        assert_eq!(one, two);
    }

    #[test]
    fn sum_mode_exceeds_one_between_neighbors() {
        let g = grid();
        let objs = [obj(1, 0.0, 0.0), obj(2, 0.6, 0.0)];
        let h = make_heatmap_with(&objs, &g, 1.0, HeatmapCombine::Sum).unwrap();
        assert!(h.max_value() > 1.0);
        let m = make_heatmap(&objs, &g, 1.0).unwrap();
        assert_eq!(m.max_value(), 1.0);
    }

    #[test]
    fn heatmap_truncation_matches_full_evaluation() {
        let g = GridSpec::new(0.0, 30.0, 0.0, 30.0, 0.5, 0.5).unwrap();
        let o = obj(1, 14.2, 15.9);
        let sigma = 0.4;
        let h = make_heatmap(&[o], &g, sigma).unwrap();
        let (jc, kc) = g.quantize(14.2, 15.9).unwrap();
        for k in 0..g.ny() {
            for j in 0..g.nx() {
                let d2 = ((j as f64 - jc as f64).powi(2) + (k as f64 - kc as f64).powi(2)) / (sigma * sigma);
                let full = (-d2).exp();
                assert!((h.get(j, k) - full).abs() <= f64::MIN_POSITIVE);
            }
        }
    }

    #[test]
    fn heatmap_rejects_outside_objects() {
        assert!(make_heatmap(&[obj(1, 50.0, 0.0)], &grid(), 1.0).is_err());
        assert!(make_daw(&[obj(1, 0.0, -9.0)], &grid(), 2.0).is_err());
        assert!(make_heatmap(&[], &grid(), 0.0).is_err());
    }

    #[test]
    fn daw_examples() {
        let g = grid();
        let z = make_daw(&[], &g, 2.0).unwrap();
        assert!(z.values().iter().all(|&v| v == 0.0));

        let pair = make_daw(&[obj(1, 0.4, 0.2), obj(2, 0.4, 0.2)], &g, 2.0).unwrap();
        for k in 0..g.ny() {
            for j in 0..g.nx() {
                let (px, py) = g.cell_center(j, k).unwrap();
                let inside = ((px - 0.4).powi(2) + (py - 0.2).powi(2)).sqrt() < 2.0;
                assert_eq!(pair.get(j, k), if inside { 2.0 } else { 0.0 });
            }
        }
    }

    #[test]
    fn daw_midpoint_anchor_shifts_disc() {
        let g = grid();
        let o = obj(1, 0.0, 0.0);
        let origin = make_daw_with(&[o], &g, 0.2, CellAnchor::Origin).unwrap();
        let mid = make_daw_with(&[o], &g, 0.2, CellAnchor::Midpoint).unwrap();
        let (j, k) = g.quantize(0.0, 0.0).unwrap();
        // origin of cell (j, k) sits exactly on the object
        assert_eq!(origin.get(j, k), 1.0);
        // its midpoint is 0.15*sqrt2 ~ 0.21 away
        assert_eq!(mid.get(j, k), 0.0);
        assert_eq!(mid.get(j - 1, k - 1), 0.0);
    }

    #[test]
    fn daw_is_larger_in_crowded_regions() {
        let g = grid();
        let objs = [
            obj(1, -4.0, 0.0),
            obj(2, 3.0, 0.0),
            obj(3, 3.5, 0.4),
            obj(4, 3.2, -0.5),
        ];
        let w = make_daw(&objs, &g, 2.0).unwrap();
        let (js, ks) = g.quantize(-4.0, 0.0).unwrap();
        let (jc, kc) = g.quantize(3.2, 0.0).unwrap();
        assert_eq!(w.get(js, ks), 1.0);
        assert_eq!(w.get(jc, kc), 3.0);
    }

    proptest! {
        #[test]
        fn daw_monotone_under_insertion(
            pts in proptest::collection::vec((-5.9..5.9f64, -2.9..2.9f64), 0..12),
            extra in (-5.9..5.9f64, -2.9..2.9f64),
        ) {
            let g = grid();
            let mut objs: Vec<_> = pts.iter().enumerate().map(|(i, &(x, y))| obj(i as u64, x, y)).collect();
            let before = make_daw(&objs, &g, 2.0).unwrap();
            objs.push(obj(999, extra.0, extra.1));
            let after = make_daw(&objs, &g, 2.0).unwrap();
            for (a, b) in before.values().iter().zip(after.values()) {
                prop_assert!(b >= a);
                prop_assert_eq!(b.fract(), 0.0);
            }
        }

        #[test]
        fn heatmap_unit_cells_match_distinct_centers(
            pts in proptest::collection::vec((-5.9..5.9f64, -2.9..2.9f64), 0..12),
            sigma in 0.5..3.0f64,
        ) {
            let g = grid();
            let objs: Vec<_> = pts.iter().enumerate().map(|(i, &(x, y))| obj(i as u64, x, y)).collect();
            let h = make_heatmap(&objs, &g, sigma).unwrap();
            let mut cells: Vec<_> = objs.iter().map(|o| g.quantize(o.bbox.cx, o.bbox.cy).unwrap()).collect();
            cells.sort();
            cells.dedup();
            prop_assert!(h.values().iter().all(|&v| (0.0..=1.0).contains(&v)));
            prop_assert_eq!(h.values().iter().filter(|&&v| v == 1.0).count(), cells.len());
            for (j, k) in cells {
                prop_assert_eq!(h.get(j, k), 1.0);
            }
        }
    }
}

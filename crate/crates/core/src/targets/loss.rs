use serde::{Deserialize, Serialize};

use super::DenseGrid2D;
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Predictions are clamped to `[PROB_EPS, 1 - PROB_EPS]` before the log.
pub const PROB_EPS: f64 = 1e-7;

/// Focal-loss exponents plus target-generation parameters.
///
/// `sigma` is measured in cells (the heatmap kernel works on cell indices);
/// `th` is the density-weight radius in meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LossParams<T> {
    pub alpha: T,
    pub gamma: T,
    pub weight_floor: T,
    pub sigma: T,
    pub th: T,
}

impl<T: Real> Default for LossParams<T> {
    fn default() -> Self {
        Self {
            alpha: T::lit(2.0),
            gamma: T::lit(4.0),
            weight_floor: T::one(),
            sigma: T::one(),
            th: T::lit(2.0),
        }
    }
}

impl<T: Real> LossParams<T> {
    pub fn validate(&self) -> Result<()> {
        let finite = [self.alpha, self.gamma, self.weight_floor, self.sigma, self.th]
            .iter()
            .all(|v| v.is_finite());
        if !finite {
            return Err(Error::invalid("loss params", "non-finite value"));
        }
        if self.alpha < T::zero() || self.gamma < T::zero() {
            return Err(Error::invalid("loss params", "alpha and gamma must be >= 0"));
        }
        if self.weight_floor < T::zero() {
            return Err(Error::invalid("loss params", "weight_floor must be >= 0"));
        }
        if !(self.sigma > T::zero()) || !(self.th > T::zero()) {
            return Err(Error::invalid("loss params", "sigma and th must be > 0"));
        }
        Ok(())
    }
}

/// Density-weighted focal loss over a BEV heatmap.
///
/// Per cell, with `w = max(weight, weight_floor)`:
/// * `c >= 1`: `-w (1-p)^alpha ln p`
/// * otherwise: `-w (1-c)^gamma p^alpha ln(1-p)`
///
/// The sum is divided by `max(1, #positive cells)`. The returned grid holds
/// d(loss)/d(pred) for every cell; it is zero where the prediction was clamped.
pub fn focal_daw_loss<T: Real>(
    pred: &DenseGrid2D<T>,
    gt: &DenseGrid2D<T>,
    weights: &DenseGrid2D<T>,
    params: &LossParams<T>,
) -> Result<(T, DenseGrid2D<T>)> {
    pred.same_grid(gt, "ground-truth heatmap")?;
    pred.same_grid(weights, "weight map")?;
    params.validate()?;
    let floor = params.weight_floor;
    Ok(focal_kernel(pred, gt, |i| weights.values()[i].max(floor), params))
}

/// The plain focal loss (every cell weighted by one).
pub fn focal_loss<T: Real>(
    pred: &DenseGrid2D<T>,
    gt: &DenseGrid2D<T>,
    params: &LossParams<T>,
) -> Result<(T, DenseGrid2D<T>)> {
    pred.same_grid(gt, "ground-truth heatmap")?;
    params.validate()?;
    Ok(focal_kernel(pred, gt, |_| T::one(), params))
}

fn focal_kernel<T: Real>(
    pred: &DenseGrid2D<T>,
    gt: &DenseGrid2D<T>,
    weight: impl Fn(usize) -> T,
    params: &LossParams<T>,
) -> (T, DenseGrid2D<T>) {
    let eps = T::lit(PROB_EPS);
    let (lo, hi) = (eps, T::one() - eps);
    let (alpha, gamma) = (params.alpha, params.gamma);
    let one = T::one();

    let n_pos = gt.values().iter().filter(|&&c| c >= one).count();
    let norm = T::from_usize_lossy(n_pos.max(1));

    let mut total = T::zero();
    let mut grad = Vec::with_capacity(pred.values().len());
    for (i, (&raw, &c)) in pred.values().iter().zip(gt.values()).enumerate() {
        let w = weight(i);
        let p = raw.max(lo).min(hi);
        let clamped = !(raw > lo && raw < hi);
        let (value, slope) = if c >= one {
            // -(1-p)^a ln p
            let q = one - p;
            let qa = q.powf(alpha);
            let d = alpha * q.powf(alpha - one) * p.ln() - qa / p;
            (-qa * p.ln(), d)
        } else {
            // -(1-c)^g p^a ln(1-p)
            let neg = (one - c).powf(gamma);
            let pa = p.powf(alpha);
            let l1p = (one - p).ln();
            let d = -neg * (alpha * p.powf(alpha - one) * l1p - pa / (one - p));
            (-neg * pa * l1p, d)
        };
        total += w * value;
        grad.push(if clamped { T::zero() } else { w * slope / norm });
    }
    let grid = DenseGrid2D::from_values(*pred.grid(), grad).expect("same length");
    (total / norm, grid)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::GridSpec;

    fn one_cell() -> GridSpec<f64> {
        GridSpec::new(0.0, 1.0, 0.0, 1.0, 1.0, 1.0).unwrap()
    }

    fn cell(v: f64) -> DenseGrid2D<f64> {
        DenseGrid2D::filled(one_cell(), v)
    }

    #[test]
    fn single_positive_cell_value() {
        let (loss, _) = focal_daw_loss(&cell(0.5), &cell(1.0), &cell(1.0), &LossParams::default()).unwrap();
        // 0.25 * ln 2
        assert!((loss - 0.173_286_795_139_986_3).abs() < 1e-15, "{loss}");
    }

    #[test]
    fn perfect_prediction_is_near_zero() {
        let g = GridSpec::new(0.0, 4.0, 0.0, 4.0, 1.0, 1.0).unwrap();
        let gt = DenseGrid2D::from_fn(g, |j, k| if (j, k) == (1, 2) { 1.0 } else { 0.0 });
        let pred = gt.clone();
        let w = DenseGrid2D::filled(g, 1.0);
        let (loss, grad) = focal_daw_loss(&pred, &gt, &w, &LossParams::default()).unwrap();
        assert!(loss >= 0.0 && loss < 1e-6, "{loss}");
        assert!(grad.values().iter().all(|&d| d == 0.0));
    }

    #[test]
    fn weight_floor_applies_to_empty_regions() {
        let params = LossParams::default();
        let (floored, _) = focal_daw_loss(&cell(0.3), &cell(0.0), &cell(0.0), &params).unwrap();
        let (unit, _) = focal_daw_loss(&cell(0.3), &cell(0.0), &cell(1.0), &params).unwrap();
        assert_eq!(floored, unit);
        let raw = LossParams { weight_floor: 0.0, ..params };
        let (zeroed, _) = focal_daw_loss(&cell(0.3), &cell(0.0), &cell(0.0), &raw).unwrap();
        assert_eq!(zeroed, 0.0);
    }

    #[test]
    fn unit_weights_reduce_to_plain_focal_loss_bitwise() {
        let g = GridSpec::new(0.0, 3.0, 0.0, 2.0, 1.0, 1.0).unwrap();
        let gt = DenseGrid2D::from_fn(g, |j, k| [1.0f64, 0.4, 0.0, 0.9, 1.0, 0.1][k * 3 + j]);
        let pred = DenseGrid2D::from_fn(g, |j, k| [0.8, 0.3, 0.05, 0.6, 0.2, 0.99][k * 3 + j]);
        let ones = DenseGrid2D::filled(g, 1.0);
        let p = LossParams::default();
        let (a, ga) = focal_daw_loss(&pred, &gt, &ones, &p).unwrap();
        let (b, gb) = focal_loss(&pred, &gt, &p).unwrap();
        assert_eq!(a.to_bits(), b.to_bits());
        assert_eq!(ga, gb);
    }

    #[test]
    fn grid_mismatch_is_an_error() {
        let other = GridSpec::new(0.0, 2.0, 0.0, 1.0, 1.0, 1.0).unwrap();
        let r = focal_daw_loss(&cell(0.5), &cell(1.0), &DenseGrid2D::zeros(other), &LossParams::default());
        assert!(matches!(r, Err(Error::GridMismatch(_))));
    }

    #[test]
    fn clamping_keeps_loss_finite() {
        let (loss, grad) = focal_daw_loss(&cell(0.0), &cell(1.0), &cell(1.0), &LossParams::default()).unwrap();
        assert!(loss.is_finite() && loss > 0.0);
        assert_eq!(grad.values()[0], 0.0);
        let (loss, _) = focal_daw_loss(&cell(1.0), &cell(0.0), &cell(1.0), &LossParams::default()).unwrap();
        assert!(loss.is_finite() && loss > 0.0);
    }

    #[test]
    fn alpha_zero_is_weighted_cross_entropy() {
        let params = LossParams { alpha: 0.0, gamma: 0.0, ..LossParams::default() };
        let (pos, gpos) = focal_daw_loss(&cell(0.25), &cell(1.0), &cell(1.0), &params).unwrap();
        assert!((pos - (4.0f64).ln()).abs() < 1e-15);
        assert!((gpos.values()[0] + 4.0).abs() < 1e-12);
        let (neg, gneg) = focal_daw_loss(&cell(0.25), &cell(0.0), &cell(1.0), &params).unwrap();
        assert!((neg + (0.75f64).ln()).abs() < 1e-15);
        assert!((gneg.values()[0] - 1.0 / 0.75).abs() < 1e-12);
    }

    #[test]
    fn invalid_params_rejected() {
        let bad = LossParams { sigma: 0.0, ..LossParams::default() };
        assert!(focal_loss(&cell(0.5), &cell(1.0), &bad).is_err());
        let bad = LossParams { alpha: -1.0, ..LossParams::default() };
        assert!(focal_loss(&cell(0.5), &cell(1.0), &bad).is_err());
    }
}

//! Exclusion region in the (λ, r_C) plane.
//!
//! A point is excluded when the decoherence exponent 4ηΔz²T accumulated over
//! the probe delay reaches `threshold`: the observed fringes would have been
//! washed out.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::decoherence_exponent;
use crate::formfactor::{
    eta_closed_form_with, eta_over_lambda_closed, CylinderDensity, FormFactorError,
};
use crate::params::{CollapseParams, MassConvention, ParamError, PhononGeometry};

pub const LAMBDA_RANGE: (f64, f64) = (1e-20, 1e2);
pub const RC_RANGE: (f64, f64) = (1e-9, 1e-1);
pub const DEFAULT_POINTS: usize = 200;
pub const DEFAULT_THRESHOLD: f64 = 1.0;

// slack for round-off on log-spaced endpoints
const RANGE_SLACK: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum ExclusionError {
    #[error("{axis} axis needs at least two points")]
    Degenerate { axis: &'static str },
    #[error("{axis} axis must be strictly increasing")]
    NonMonotone { axis: &'static str },
    #[error("{axis} value {value:e} outside [{min:e}, {max:e}]")]
    OutOfRange {
        axis: &'static str,
        value: f64,
        min: f64,
        max: f64,
    },
    #[error("threshold must be positive and finite, got {0}")]
    Threshold(f64),
    #[error("r_C = {rc:e} outside the curve range [{min:e}, {max:e}]")]
    SlopeOutOfRange { rc: f64, min: f64, max: f64 },
    #[error(transparent)]
    FormFactor(#[from] FormFactorError),
    #[error(transparent)]
    Param(#[from] ParamError),
}

/// One axis of the scan grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Axis {
    Log { min: f64, max: f64, points: usize },
    Explicit { values: Vec<f64> },
}

impl Axis {
    pub fn log(min: f64, max: f64, points: usize) -> Axis {
        Axis::Log { min, max, points }
    }

    fn values(&self, name: &'static str) -> Result<Vec<f64>, ExclusionError> {
        match self {
            Axis::Log { min, max, points } => {
                if *points < 2 {
                    return Err(ExclusionError::Degenerate { axis: name });
                }
                if !(*min > 0.0 && max > min && max.is_finite()) {
                    return Err(ExclusionError::NonMonotone { axis: name });
                }
                let (lo, hi) = (min.log10(), max.log10());
                let step = (hi - lo) / (*points - 1) as f64;
                Ok((0..*points)
                    .map(|i| match i {
                        0 => *min,
                        i if i + 1 == *points => *max,
                        i => 10f64.powf(lo + step * i as f64),
                    })
                    .collect())
            }
            Axis::Explicit { values } => {
                if values.len() < 2 {
                    return Err(ExclusionError::Degenerate { axis: name });
                }
                if values
                    .windows(2)
                    .any(|w| w[1].partial_cmp(&w[0]) != Some(std::cmp::Ordering::Greater))
                {
                    return Err(ExclusionError::NonMonotone { axis: name });
                }
                Ok(values.clone())
            }
        }
    }
}

fn checked_axis(
    axis: &Axis,
    name: &'static str,
    (min, max): (f64, f64),
    allow_zero: bool,
) -> Result<Vec<f64>, ExclusionError> {
    let values = axis.values(name)?;
    for &v in &values {
        let zero_ok = allow_zero && v == 0.0;
        if !zero_ok && !(v >= min * (1.0 - RANGE_SLACK) && v <= max * (1.0 + RANGE_SLACK)) {
            return Err(ExclusionError::OutOfRange {
                axis: name,
                value: v,
                min,
                max,
            });
        }
    }
    Ok(values)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub lambda: Axis,
    pub rc: Axis,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            lambda: Axis::log(LAMBDA_RANGE.0, LAMBDA_RANGE.1, DEFAULT_POINTS),
            rc: Axis::log(RC_RANGE.0, RC_RANGE.1, DEFAULT_POINTS),
        }
    }
}

impl GridSpec {
    /// Validated (λ, r_C) axes. λ may include 0.
    pub fn axes(&self) -> Result<(Vec<f64>, Vec<f64>), ExclusionError> {
        Ok((
            checked_axis(&self.lambda, "lambda", LAMBDA_RANGE, true)?,
            checked_axis(&self.rc, "r_c", RC_RANGE, false)?,
        ))
    }
}

fn check_threshold(threshold: f64) -> Result<(), ExclusionError> {
    if threshold > 0.0 && threshold.is_finite() {
        Ok(())
    } else {
        Err(ExclusionError::Threshold(threshold))
    }
}

/// Exponent and exclusion flag on a λ × r_C grid, indexed `[i_lambda][j_rc]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExclusionGrid {
    pub lambda_axis: Vec<f64>,
    pub rc_axis: Vec<f64>,
    pub exponent: Vec<Vec<f64>>,
    pub excluded: Vec<Vec<bool>>,
    pub threshold: f64,
}

impl ExclusionGrid {
    pub fn scan(
        spec: &GridSpec,
        g: &PhononGeometry,
        threshold: f64,
        convention: MassConvention,
    ) -> Result<ExclusionGrid, ExclusionError> {
        check_threshold(threshold)?;
        let (lambda_axis, rc_axis) = spec.axes()?;
        let exponent = lambda_axis
            .par_iter()
            .map(|&lambda| {
                rc_axis
                    .iter()
                    .map(|&rc| {
                        let eta =
                            eta_closed_form_with(&CollapseParams::new(lambda, rc)?, g, convention)?;
                        Ok(decoherence_exponent(eta.eta, g))
                    })
                    .collect::<Result<Vec<f64>, ExclusionError>>()
            })
            .collect::<Result<Vec<_>, _>>()?;
        let excluded = exponent
            .iter()
            .map(|row| row.iter().map(|&x| x >= threshold).collect())
            .collect();
        Ok(ExclusionGrid {
            lambda_axis,
            rc_axis,
            exponent,
            excluded,
            threshold,
        })
    }

    pub fn excluded_count(&self) -> usize {
        self.excluded.iter().flatten().filter(|&&e| e).count()
    }
}

/// λ*(r_C): the smallest excluded collapse rate at each r_C.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundaryCurve {
    pub rc: Vec<f64>,
    pub lambda_star: Vec<f64>,
    pub threshold: f64,
}

impl BoundaryCurve {
    /// λ* = threshold / (4 (η/λ) Δz² T).
    pub fn compute(
        g: &PhononGeometry,
        rc_axis: &Axis,
        threshold: f64,
        convention: MassConvention,
    ) -> Result<BoundaryCurve, ExclusionError> {
        check_threshold(threshold)?;
        let rc = checked_axis(rc_axis, "r_c", RC_RANGE, false)?;
        let density = CylinderDensity::from_geometry(g, convention);
        let per_lambda = decoherence_exponent(1.0, g);
        let lambda_star = rc
            .par_iter()
            .map(|&r| Ok(threshold / (per_lambda * eta_over_lambda_closed(&density, r)?)))
            .collect::<Result<Vec<f64>, ExclusionError>>()?;
        Ok(BoundaryCurve {
            rc,
            lambda_star,
            threshold,
        })
    }

    /// d ln λ* / d ln r_C: one-cell centred differences at the nodes
    /// (one-sided at the ends), linearly interpolated in ln r_C.
    pub fn local_slope(&self, rc: f64) -> Result<f64, ExclusionError> {
        let n = self.rc.len();
        let (min, max) = (self.rc[0], self.rc[n - 1]);
        if !(rc >= min * (1.0 - RANGE_SLACK) && rc <= max * (1.0 + RANGE_SLACK)) {
            return Err(ExclusionError::SlopeOutOfRange { rc, min, max });
        }
        let x: Vec<f64> = self.rc.iter().map(|r| r.ln()).collect();
        let y: Vec<f64> = self.lambda_star.iter().map(|l| l.ln()).collect();
        let node = |j: usize| {
            let (a, b) = (j.saturating_sub(1), (j + 1).min(n - 1));
            (y[b] - y[a]) / (x[b] - x[a])
        };
        let t = rc.clamp(min, max).ln();
        let j = x.partition_point(|&xi| xi <= t).clamp(1, n - 1);
        let w = (t - x[j - 1]) / (x[j] - x[j - 1]);
        Ok(node(j - 1) * (1.0 - w) + node(j) * w)
    }

    /// (r_C, λ*) at the smallest λ* on the curve.
    pub fn minimum(&self) -> (f64, f64) {
        let j = self
            .lambda_star
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(b.1))
            .map(|(j, _)| j)
            .expect("curve has at least two points");
        (self.rc[j], self.lambda_star[j])
    }

    /// λ* at an arbitrary r_C in range, log-log interpolated.
    pub fn lambda_star_at(&self, rc: f64) -> Result<f64, ExclusionError> {
        let n = self.rc.len();
        let (min, max) = (self.rc[0], self.rc[n - 1]);
        if !(rc >= min * (1.0 - RANGE_SLACK) && rc <= max * (1.0 + RANGE_SLACK)) {
            return Err(ExclusionError::SlopeOutOfRange { rc, min, max });
        }
        let t = rc.clamp(min, max).ln();
        let j = self.rc.partition_point(|&r| r.ln() <= t).clamp(1, n - 1);
        let (x0, x1) = (self.rc[j - 1].ln(), self.rc[j].ln());
        let (y0, y1) = (self.lambda_star[j - 1].ln(), self.lambda_star[j].ln());
        Ok((y0 + (y1 - y0) * (t - x0) / (x1 - x0)).exp())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::{default_geometry, reference_points};

    fn default_boundary() -> BoundaryCurve {
        BoundaryCurve::compute(
            &default_geometry(),
            &GridSpec::default().rc,
            DEFAULT_THRESHOLD,
            MassConvention::Effective,
        )
        .unwrap()
    }

    #[test]
    fn boundary_at_reference_radius() {
        let g = default_geometry();
        let axis = Axis::Explicit {
            values: vec![1e-7, 1e-6],
        };
        let b = BoundaryCurve::compute(&g, &axis, 1.0, MassConvention::Effective).unwrap();
        // 1/(4 · 6.4e35 · (1.6e-11)² · 3.5e-13) ≈ 4.4e-3 with the rounded inputs
        assert!(
            (b.lambda_star[0] / 4.4e-3 - 1.0).abs() < 0.05,
            "{}",
            b.lambda_star[0]
        );
        let doubled = BoundaryCurve::compute(&g, &axis, 2.0, MassConvention::Effective).unwrap();
        for (a, d) in b.lambda_star.iter().zip(&doubled.lambda_star) {
            assert!((d / a - 2.0).abs() < 1e-14);
        }
    }

    #[test]
    fn slope_regimes() {
        let b = default_boundary();
        assert!((b.local_slope(1e-9).unwrap() + 2.0).abs() < 0.1);
        assert!(b.local_slope(1e-5).unwrap().abs() < 0.2);
        assert!((b.local_slope(1e-2).unwrap() - 2.0).abs() < 0.1);
        assert!(b.local_slope(1e-10).is_err());
        assert!(b.local_slope(1.0).is_err());
        // monotone transition
        let mut prev = f64::NEG_INFINITY;
        for j in 0..=80 {
            let rc = 10f64.powf(-9.0 + 0.1 * j as f64);
            let s = b.local_slope(rc).unwrap();
            assert!(s >= prev - 1e-9, "slope dips at {rc}");
            prev = s;
        }
    }

    #[test]
    fn minimum_on_plateau() {
        let (rc, _) = default_boundary().minimum();
        assert!(rc > 1e-6 && rc < 1e-4, "{rc}");
    }

    #[test]
    fn threshold_shifts_curve_uniformly() {
        let g = default_geometry();
        let axis = Axis::log(1e-9, 1e-1, 50);
        let a = BoundaryCurve::compute(&g, &axis, 1.0, MassConvention::Effective).unwrap();
        let b = BoundaryCurve::compute(&g, &axis, 0.05, MassConvention::Effective).unwrap();
        for (x, y) in a.lambda_star.iter().zip(&b.lambda_star) {
            assert!(((x / y).ln() - 20f64.ln()).abs() < 1e-12);
        }
    }

    #[test]
    fn scan_agrees_with_boundary() {
        let g = default_geometry();
        let spec = GridSpec {
            lambda: Axis::log(1e-20, 1e2, 60),
            rc: Axis::log(1e-9, 1e-1, 40),
        };
        let grid = ExclusionGrid::scan(&spec, &g, 1.0, MassConvention::Effective).unwrap();
        let b = BoundaryCurve::compute(&g, &spec.rc, 1.0, MassConvention::Effective).unwrap();
        assert_eq!(b.rc, grid.rc_axis);
        for j in 0..grid.rc_axis.len() {
            let mut prev = 0.0;
            for i in 0..grid.lambda_axis.len() {
                let x = grid.exponent[i][j];
                assert!(x > prev);
                prev = x;
                let expect = grid.lambda_axis[i] >= b.lambda_star[j];
                if grid.excluded[i][j] != expect {
                    assert!((grid.lambda_axis[i] / b.lambda_star[j] - 1.0).abs() < 1e-12);
                }
                if grid.excluded[i][j] && i + 1 < grid.lambda_axis.len() {
                    assert!(grid.excluded[i + 1][j]);
                }
            }
        }
        assert!(grid.excluded_count() > 0);
    }

    #[test]
    fn scan_examples() {
        let g = default_geometry();
        let spec = GridSpec {
            lambda: Axis::Explicit {
                values: vec![0.0, 1e-8],
            },
            rc: Axis::Explicit {
                values: vec![1e-7, 1e-5],
            },
        };
        let grid = ExclusionGrid::scan(&spec, &g, 1.0, MassConvention::Effective).unwrap();
        assert_eq!(grid.exponent[0], vec![0.0, 0.0]);
        assert!(
            (grid.exponent[1][0] / 2.3e-6 - 1.0).abs() < 0.05,
            "{}",
            grid.exponent[1][0]
        );
        assert_eq!(grid.excluded_count(), 0);
    }

    #[test]
    fn reference_points_not_excluded() {
        let b = default_boundary();
        for p in reference_points() {
            assert!(p.lambda < b.lambda_star_at(p.r_c).unwrap(), "{}", p.name);
        }
    }

    #[test]
    fn axis_validation() {
        let g = default_geometry();
        let scan = |lambda: Axis, rc: Axis| {
            ExclusionGrid::scan(&GridSpec { lambda, rc }, &g, 1.0, MassConvention::Effective)
        };
        let ok = Axis::log(1e-9, 1e-1, 3);
        assert!(matches!(
            scan(Axis::log(1e-10, 1.0, 1), ok.clone()),
            Err(ExclusionError::Degenerate { axis: "lambda" })
        ));
        assert!(matches!(
            scan(
                Axis::Explicit {
                    values: vec![1.0, 0.5]
                },
                ok.clone()
            ),
            Err(ExclusionError::NonMonotone { axis: "lambda" })
        ));
        assert!(matches!(
            scan(Axis::log(1e-10, 1e3, 5), ok.clone()),
            Err(ExclusionError::OutOfRange { axis: "lambda", .. })
        ));
        assert!(matches!(
            scan(Axis::log(1e-10, 1.0, 5), Axis::log(1e-10, 1e-1, 4)),
            Err(ExclusionError::OutOfRange { axis: "r_c", .. })
        ));
        assert!(matches!(
            ExclusionGrid::scan(&GridSpec::default(), &g, 0.0, MassConvention::Effective),
            Err(ExclusionError::Threshold(_))
        ));
        let json = r#"{"lambda":{"kind":"log","min":1e-20,"max":100,"points":200},"rc":{"kind":"explicit","values":[1e-9,1e-1]}}"#;
        let spec: GridSpec = serde_json::from_str(json).unwrap();
        assert_eq!(spec.lambda, GridSpec::default().lambda);
    }
}

//! Monotone maps from a raw uncertainty score `u` to a probability `u^c`.
//!
//! Three calibrators are provided: MinMax rescaling, Platt scaling and
//! isotonic regression. Platt and isotonic are fitted against whatever
//! positive class the caller passes; the pipeline uses "query is correct".

pub mod isotonic;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::logistic::{self, sigmoid};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CalibratorKind {
    Minmax,
    Platt,
    Isotonic,
}

impl CalibratorKind {
    pub const ALL: [CalibratorKind; 3] = [Self::Minmax, Self::Platt, Self::Isotonic];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Minmax => "minmax",
            Self::Platt => "platt",
            Self::Isotonic => "isotonic",
        }
    }
}

impl fmt::Display for CalibratorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for CalibratorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "minmax" => Ok(Self::Minmax),
            "platt" => Ok(Self::Platt),
            "isotonic" => Ok(Self::Isotonic),
            other => Err(Error::InvalidParameter(format!("unknown calibrator {other:?}"))),
        }
    }
}

/// A fitted calibration map. Output of [`Calibrator::apply`] is always in [0, 1].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Calibrator {
    Minmax {
        u_min: f64,
        u_max: f64,
        invert: bool,
        /// All fitting scores were equal; the map is the constant 0.5.
        degenerate: bool,
    },
    Platt {
        theta0: f64,
        theta1: f64,
    },
    /// Step function on the axis `v = u` (or `v = -u` when `decreasing`).
    /// `breakpoints` holds the block starts `a_1 < … < a_M` followed by the
    /// last observed `v`; `values` holds `θ_1 ≤ … ≤ θ_M`.
    Isotonic {
        decreasing: bool,
        breakpoints: Vec<f64>,
        values: Vec<f64>,
    },
}

impl Calibrator {
    pub fn kind(&self) -> CalibratorKind {
        match self {
            Calibrator::Minmax { .. } => CalibratorKind::Minmax,
            Calibrator::Platt { .. } => CalibratorKind::Platt,
            Calibrator::Isotonic { .. } => CalibratorKind::Isotonic,
        }
    }

    /// Maps a raw score to `u^c ∈ [0, 1]`.
    pub fn apply(&self, u: f64) -> f64 {
        match *self {
            Calibrator::Minmax {
                u_min,
                u_max,
                invert,
                degenerate,
            } => {
                if degenerate {
                    return 0.5;
                }
                let s = ((u - u_min) / (u_max - u_min)).clamp(0.0, 1.0);
                if invert {
                    1.0 - s
                } else {
                    s
                }
            }
            Calibrator::Platt { theta0, theta1 } => sigmoid(theta0 + theta1 * u),
            Calibrator::Isotonic {
                decreasing,
                ref breakpoints,
                ref values,
            } => {
                let v = if decreasing { -u } else { u };
                let starts = &breakpoints[..values.len()];
                let idx = starts.partition_point(|&a| a <= v);
                values[idx.saturating_sub(1)]
            }
        }
    }

    pub fn apply_all(&self, us: &[f64]) -> Vec<f64> {
        us.iter().map(|&u| self.apply(u)).collect()
    }

    /// Checks the per-kind parameter invariants, e.g. after deserializing.
    pub fn validate(&self) -> Result<()> {
        match self {
            Calibrator::Minmax {
                u_min,
                u_max,
                degenerate,
                ..
            } => {
                if !u_min.is_finite() || !u_max.is_finite() {
                    return Err(Error::InvalidParameter("minmax bounds must be finite".into()));
                }
                if !degenerate && u_min >= u_max {
                    return Err(Error::InvalidParameter(format!(
                        "minmax needs u_min < u_max, got {u_min} >= {u_max}"
                    )));
                }
            }
            Calibrator::Platt { theta0, theta1 } => {
                if !theta0.is_finite() || !theta1.is_finite() {
                    return Err(Error::InvalidParameter("platt parameters must be finite".into()));
                }
            }
            Calibrator::Isotonic {
                breakpoints, values, ..
            } => {
                if values.is_empty() || breakpoints.len() != values.len() + 1 {
                    return Err(Error::InvalidParameter(
                        "isotonic needs M values and M + 1 breakpoints".into(),
                    ));
                }
                let starts = &breakpoints[..values.len()];
                if starts.windows(2).any(|w| w[0] >= w[1])
                    || breakpoints[values.len()] < starts[values.len() - 1]
                {
                    return Err(Error::InvalidParameter(
                        "isotonic breakpoints must increase".into(),
                    ));
                }
                if values.windows(2).any(|w| w[0] > w[1]) {
                    return Err(Error::InvalidParameter(
                        "isotonic values must be non-decreasing".into(),
                    ));
                }
                if values.iter().any(|v| !(0.0..=1.0).contains(v)) {
                    return Err(Error::InvalidParameter(
                        "isotonic values must lie in [0, 1]".into(),
                    ));
                }
            }
        }
        Ok(())
    }
}

/// Fits MinMax bounds on the sample. All-equal scores yield a degenerate
/// calibrator that maps everything to 0.5.
pub fn minmax_fit(scores: &[f64], invert: bool) -> Result<Calibrator> {
    if scores.len() < 2 {
        return Err(Error::TooFewPoints {
            needed: 2,
            got: scores.len(),
        });
    }
    if scores.iter().any(|u| !u.is_finite()) {
        return Err(Error::InvalidParameter("non-finite score".into()));
    }
    let u_min = scores.iter().copied().fold(f64::INFINITY, f64::min);
    let u_max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(Calibrator::Minmax {
        u_min,
        u_max,
        invert,
        degenerate: u_min == u_max,
    })
}

/// Maximum-likelihood sigmoid `σ(θ0 + θ1 u)` with a small ridge penalty so
/// separable data still yields finite parameters.
pub fn platt_fit(data: &[(f64, u8)]) -> Result<Calibrator> {
    let fit = logistic::fit(data, logistic::RIDGE)?;
    Ok(Calibrator::Platt {
        theta0: fit.theta[0],
        theta1: fit.theta[1],
    })
}

/// Direction of an isotonic fit.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Monotonicity {
    Increasing,
    Decreasing,
    /// Fit both and keep the one with the smaller squared error
    /// (increasing on ties).
    Auto,
}

/// Isotonic calibrator in the direction with lower squared error.
pub fn isotonic_fit(data: &[(f64, u8)]) -> Result<Calibrator> {
    isotonic_fit_with(data, Monotonicity::Auto)
}

pub fn isotonic_fit_with(data: &[(f64, u8)], direction: Monotonicity) -> Result<Calibrator> {
    if let Some(&(_, y)) = data.iter().find(|(_, y)| *y > 1) {
        return Err(Error::InvalidParameter(format!("label {y} is not 0 or 1")));
    }
    let up: Vec<(f64, f64)> = data.iter().map(|&(u, y)| (u, f64::from(y))).collect();
    let down: Vec<(f64, f64)> = data.iter().map(|&(u, y)| (-u, f64::from(y))).collect();
    let (decreasing, blocks) = match direction {
        Monotonicity::Increasing => (false, isotonic::pava(&up)?),
        Monotonicity::Decreasing => (true, isotonic::pava(&down)?),
        Monotonicity::Auto => {
            let inc = isotonic::pava(&up)?;
            let dec = isotonic::pava(&down)?;
            let sse_inc = isotonic::squared_error(&inc, &up);
            let sse_dec = isotonic::squared_error(&dec, &down);
            if sse_dec < sse_inc - auto_tie_tolerance(data.len()) {
                (true, dec)
            } else {
                (false, inc)
            }
        }
    };
    let mut breakpoints: Vec<f64> = blocks.iter().map(|b| b.start).collect();
    breakpoints.push(blocks[blocks.len() - 1].end);
    let values = blocks.iter().map(|b| b.mean()).collect();
    Ok(Calibrator::Isotonic {
        decreasing,
        breakpoints,
        values,
    })
}

/// Slack below which the two directions count as equally good.
pub fn auto_tie_tolerance(n: usize) -> f64 {
    1e-12 * (n.max(1) as f64)
}

pub fn fit_calibrator(kind: CalibratorKind, data: &[(f64, u8)], invert: bool) -> Result<Calibrator> {
    match kind {
        CalibratorKind::Minmax => {
            let scores: Vec<f64> = data.iter().map(|p| p.0).collect();
            minmax_fit(&scores, invert)
        }
        CalibratorKind::Platt => platt_fit(data),
        CalibratorKind::Isotonic => isotonic_fit(data),
    }
}

/// One equal-width bin of a reliability diagram. Means are `None` for empty bins.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReliabilityBin {
    pub bin_center: f64,
    pub mean_predicted: Option<f64>,
    pub empirical_frequency: Option<f64>,
    pub count: usize,
}

/// Bins `(u^c, y)` pairs into `n_bins` equal-width bins on [0, 1]; the last
/// bin is closed on the right.
pub fn reliability_curve(pairs: &[(f64, u8)], n_bins: usize) -> Result<Vec<ReliabilityBin>> {
    if n_bins == 0 {
        return Err(Error::InvalidParameter("n_bins must be at least 1".into()));
    }
    let mut sums = vec![(0.0f64, 0.0f64, 0usize); n_bins];
    for &(p, y) in pairs {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::OutOfUnitInterval { value: p });
        }
        let idx = ((p * n_bins as f64) as usize).min(n_bins - 1);
        sums[idx].0 += p;
        sums[idx].1 += f64::from(y);
        sums[idx].2 += 1;
    }
    Ok(sums
        .into_iter()
        .enumerate()
        .map(|(i, (sp, sy, count))| ReliabilityBin {
            bin_center: (2 * i + 1) as f64 / (2 * n_bins) as f64,
            mean_predicted: (count > 0).then(|| sp / count as f64),
            empirical_frequency: (count > 0).then(|| sy / count as f64),
            count,
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn minmax_examples() {
        let c = minmax_fit(&[2.0, 4.0, 6.0], false).unwrap();
        assert_eq!(c.apply(4.0), 0.5);
        assert_eq!(c.apply(2.0), 0.0);
        assert_eq!(c.apply(6.0), 1.0);
        assert_eq!(c.apply(8.0), 1.0);
        assert_eq!(c.apply(-1.0), 0.0);
        let inv = minmax_fit(&[2.0, 4.0, 6.0], true).unwrap();
        assert_eq!(inv.apply(2.0), 1.0);
    }

    #[test]
    fn minmax_degenerate_is_half() {
        let c = minmax_fit(&[3.0, 3.0, 3.0], false).unwrap();
        assert!(matches!(c, Calibrator::Minmax { degenerate: true, .. }));
        assert_eq!(c.apply(100.0), 0.5);
        assert!(minmax_fit(&[1.0], false).is_err());
    }

    #[test]
    fn platt_examples() {
        let c = platt_fit(&[(0.0, 0), (0.0, 1), (1.0, 0), (1.0, 1)]).unwrap();
        for u in [-3.0, 0.0, 0.5, 9.0] {
            assert_abs_diff_eq!(c.apply(u), 0.5, epsilon = 1e-9);
        }
        let c = platt_fit(&[(1.0, 1), (1.0, 1), (1.0, 1), (1.0, 0)]).unwrap();
        assert_abs_diff_eq!(c.apply(1.0), 0.75, epsilon = 1e-5);

        let mut sep = vec![(0.0, 0u8); 10];
        sep.extend(std::iter::repeat_n((1.0, 1u8), 10));
        let c = platt_fit(&sep).unwrap();
        assert!(c.apply(0.0) < 0.01 && c.apply(1.0) > 0.99);
        assert!(platt_fit(&[(0.0, 1), (1.0, 1)]).is_err());

        let flat = Calibrator::Platt {
            theta0: 0.0,
            theta1: 0.0,
        };
        assert_eq!(flat.apply(5.0), 0.5);
    }

    #[test]
    fn isotonic_examples() {
        let c = isotonic_fit(&[(0.0, 0), (1.0, 1), (2.0, 1)]).unwrap();
        match &c {
            Calibrator::Isotonic {
                decreasing, values, ..
            } => {
                assert!(!decreasing);
                assert_eq!(values, &vec![0.0, 1.0, 1.0]);
            }
            _ => unreachable!(),
        }
        let c = isotonic_fit_with(&[(0.0, 1), (1.0, 0)], Monotonicity::Increasing).unwrap();
        assert_eq!(c.apply(0.0), 0.5);
        assert_eq!(c.apply(1.0), 0.5);

        let c = isotonic_fit(&[(0.0, 0), (1.0, 1), (2.0, 0), (3.0, 1)]).unwrap();
        let applied = c.apply_all(&[0.0, 1.0, 2.0, 3.0]);
        assert_eq!(applied, vec![0.0, 0.5, 0.5, 1.0]);
        if let Calibrator::Isotonic { values, .. } = &c {
            assert_eq!(values, &vec![0.0, 0.5, 1.0]);
        }
        c.validate().unwrap();
    }

    #[test]
    fn isotonic_auto_picks_decreasing_for_anticorrelated_labels() {
        let c = isotonic_fit(&[(0.0, 1), (1.0, 1), (2.0, 0), (3.0, 0)]).unwrap();
        assert!(matches!(c, Calibrator::Isotonic { decreasing: true, .. }));
        assert_eq!(c.apply_all(&[0.0, 3.0]), vec![1.0, 0.0]);
        c.validate().unwrap();
    }

    #[test]
    fn isotonic_apply_block_lookup() {
        let c = Calibrator::Isotonic {
            decreasing: false,
            breakpoints: vec![0.0, 1.0, 2.0],
            values: vec![0.2, 0.8],
        };
        c.validate().unwrap();
        assert_eq!(c.apply(1.5), 0.8);
        assert_eq!(c.apply(-3.0), 0.2);
        assert_eq!(c.apply(0.5), 0.2);
        assert_eq!(c.apply(40.0), 0.8);
    }

    #[test]
    fn isotonic_is_monotone_across_breakpoints() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let data: Vec<(f64, u8)> = (0..40)
                .map(|_| (rng.random_range(0..10) as f64, rng.random_range(0..2)))
                .collect();
            let c = isotonic_fit(&data).unwrap();
            c.validate().unwrap();
            let grid: Vec<f64> = (-20..=120).map(|i| i as f64 / 10.0).collect();
            let out = c.apply_all(&grid);
            let up = out.windows(2).all(|w| w[0] <= w[1]);
            let down = out.windows(2).all(|w| w[0] >= w[1]);
            assert!(up || down);
        }
    }

    #[test]
    fn calibrator_json_shape() {
        let c = Calibrator::Platt {
            theta0: 1.5,
            theta1: -2.0,
        };
        let s = serde_json::to_string(&c).unwrap();
        assert_eq!(s, r#"{"kind":"platt","theta0":1.5,"theta1":-2.0}"#);
        let back: Calibrator = serde_json::from_str(&s).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn reliability_examples() {
        let mut pairs = vec![(0.1, 0u8); 10];
        pairs.extend(std::iter::repeat_n((0.9, 1u8), 10));
        let bins = reliability_curve(&pairs, 2).unwrap();
        assert_abs_diff_eq!(bins[0].mean_predicted.unwrap(), 0.1, epsilon = 1e-12);
        assert_eq!(bins[0].empirical_frequency, Some(0.0));
        assert_abs_diff_eq!(bins[1].mean_predicted.unwrap(), 0.9, epsilon = 1e-12);
        assert_eq!(bins[1].empirical_frequency, Some(1.0));

        let bins = reliability_curve(&[(0.5, 1)], 1).unwrap();
        assert_eq!(
            bins[0],
            ReliabilityBin {
                bin_center: 0.5,
                mean_predicted: Some(0.5),
                empirical_frequency: Some(1.0),
                count: 1
            }
        );
    }

    #[test]
    fn reliability_edges_and_errors() {
        let bins = reliability_curve(&[(1.0, 1), (0.0, 0)], 4).unwrap();
        assert_eq!(bins[3].count, 1);
        assert_eq!(bins[0].count, 1);
        assert_eq!(bins[1].mean_predicted, None);
        assert!(reliability_curve(&[(1.2, 1)], 2).is_err());
        assert!(reliability_curve(&[(0.2, 1)], 0).is_err());
    }

    #[test]
    fn reliability_tracks_calibrated_simulation() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let pairs: Vec<(f64, u8)> = (0..20_000)
            .map(|_| {
                let p: f64 = rng.random();
                (p, u8::from(rng.random::<f64>() < p))
            })
            .collect();
        for bin in reliability_curve(&pairs, 10).unwrap() {
            let gap = bin.mean_predicted.unwrap() - bin.empirical_frequency.unwrap();
            // ~2000 samples per bin: 4 standard errors of a Bernoulli(0.5) mean.
            assert!(gap.abs() < 0.045, "{bin:?}");
        }
    }
}

//! One-feature logistic regression fitted by ridge-regularized Newton.
//!
//! Shared by Platt calibration (positive class = correct) and the logistic
//! selective classifier (positive class = error). The solver minimizes
//!
//! ```text
//! f(θ) = -Σ [y ln σ(θ0 + θ1 u) + (1 - y) ln(1 - σ(θ0 + θ1 u))] + λ (θ0² + θ1²) / 2
//! ```

use crate::error::{Error, Result};

pub const RIDGE: f64 = 1e-6;
pub const MAX_ITERATIONS: usize = 200;
pub const GRADIENT_TOL: f64 = 1e-10;

const ARMIJO: f64 = 1e-4;
const MAX_HALVINGS: usize = 60;

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// ln(1 + e^x) without overflow.
fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

/// Regularized negative log-likelihood.
pub fn objective(theta: [f64; 2], data: &[(f64, u8)], ridge: f64) -> f64 {
    let nll: f64 = data
        .iter()
        .map(|&(u, y)| {
            let z = theta[0] + theta[1] * u;
            // -ln σ(z) = softplus(-z), -ln(1 - σ(z)) = softplus(z)
            if y == 1 {
                softplus(-z)
            } else {
                softplus(z)
            }
        })
        .sum();
    nll + 0.5 * ridge * (theta[0] * theta[0] + theta[1] * theta[1])
}

pub fn gradient(theta: [f64; 2], data: &[(f64, u8)], ridge: f64) -> [f64; 2] {
    let mut g = [ridge * theta[0], ridge * theta[1]];
    for &(u, y) in data {
        let r = sigmoid(theta[0] + theta[1] * u) - f64::from(y);
        g[0] += r;
        g[1] += r * u;
    }
    g
}

fn hessian(theta: [f64; 2], data: &[(f64, u8)], ridge: f64) -> [[f64; 2]; 2] {
    let mut h = [[ridge, 0.0], [0.0, ridge]];
    for &(u, _) in data {
        let p = sigmoid(theta[0] + theta[1] * u);
        let w = p * (1.0 - p);
        h[0][0] += w;
        h[0][1] += w * u;
        h[1][1] += w * u * u;
    }
    h[1][0] = h[0][1];
    h
}

fn norm(g: [f64; 2]) -> f64 {
    g[0].hypot(g[1])
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogisticFit {
    pub theta: [f64; 2],
    pub iterations: usize,
    pub gradient_norm: f64,
}

/// Fits `(θ0, θ1)` on `(u, y)` pairs. Both classes must be present.
pub fn fit(data: &[(f64, u8)], ridge: f64) -> Result<LogisticFit> {
    if data.len() < 2 {
        return Err(Error::TooFewPoints {
            needed: 2,
            got: data.len(),
        });
    }
    if let Some(&(u, y)) = data.iter().find(|(u, y)| !u.is_finite() || *y > 1) {
        return Err(Error::InvalidParameter(format!("bad training pair ({u}, {y})")));
    }
    let positives = data.iter().filter(|(_, y)| *y == 1).count();
    if positives == 0 || positives == data.len() {
        return Err(Error::SingleClass);
    }

    let mut theta = [0.0, 0.0];
    let mut f = objective(theta, data, ridge);
    let mut g = gradient(theta, data, ridge);
    for iteration in 0..MAX_ITERATIONS {
        if norm(g) <= GRADIENT_TOL {
            return Ok(LogisticFit {
                theta,
                iterations: iteration,
                gradient_norm: norm(g),
            });
        }
        let h = hessian(theta, data, ridge);
        let det = h[0][0] * h[1][1] - h[0][1] * h[1][0];
        // Newton direction; falls back to steepest descent if H is numerically singular.
        let step = if det > 0.0 && det.is_finite() {
            [
                -(h[1][1] * g[0] - h[0][1] * g[1]) / det,
                -(h[0][0] * g[1] - h[1][0] * g[0]) / det,
            ]
        } else {
            [-g[0], -g[1]]
        };
        let slope = g[0] * step[0] + g[1] * step[1];

        let mut t = 1.0;
        let mut accepted = None;
        // Near the optimum the predicted decrease is below the resolution of
        // f and the Armijo test is decided by rounding. There, take the full
        // Newton step whenever it shrinks the gradient.
        if -slope <= 1e-12 * (1.0 + f.abs()) {
            let cand = [theta[0] + step[0], theta[1] + step[1]];
            if norm(gradient(cand, data, ridge)) < norm(g) {
                accepted = Some((cand, objective(cand, data, ridge)));
            }
        }
        for _ in 0..MAX_HALVINGS {
            if accepted.is_some() {
                break;
            }
            let cand = [theta[0] + t * step[0], theta[1] + t * step[1]];
            let fc = objective(cand, data, ridge);
            if fc <= f + ARMIJO * t * slope {
                accepted = Some((cand, fc));
                break;
            }
            t *= 0.5;
        }
        match accepted {
            Some((cand, fc)) => {
                theta = cand;
                f = fc;
                g = gradient(theta, data, ridge);
            }
            None => {
                // No representable decrease left. Accept the point only if the
                // full Newton step is below the resolution of θ itself.
                let scale = 1.0 + theta[0].abs().max(theta[1].abs());
                if step[0].abs().max(step[1].abs()) <= 1e-12 * scale {
                    return Ok(LogisticFit {
                        theta,
                        iterations: iteration + 1,
                        gradient_norm: norm(g),
                    });
                }
                return Err(Error::NotConverged {
                    iterations: iteration + 1,
                    gradient_norm: norm(g),
                });
            }
        }
    }
    if norm(g) <= GRADIENT_TOL {
        return Ok(LogisticFit {
            theta,
            iterations: MAX_ITERATIONS,
            gradient_norm: norm(g),
        });
    }
    Err(Error::NotConverged {
        iterations: MAX_ITERATIONS,
        gradient_norm: norm(g),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Grid-search oracle over a square of side `half * 2` centred at `centre`.
    fn grid_argmin(data: &[(f64, u8)], centre: [f64; 2], half: f64, steps: usize) -> [f64; 2] {
        let mut best = (f64::INFINITY, centre);
        for i in 0..=steps {
            for j in 0..=steps {
                let t = [
                    centre[0] - half + 2.0 * half * i as f64 / steps as f64,
                    centre[1] - half + 2.0 * half * j as f64 / steps as f64,
                ];
                let f = objective(t, data, RIDGE);
                if f < best.0 {
                    best = (f, t);
                }
            }
        }
        best.1
    }

    #[test]
    fn uninformative_data_gives_flat_sigmoid() {
        let data = [(0.0, 0), (0.0, 1), (1.0, 0), (1.0, 1)];
        let grid = grid_argmin(&data, [0.0, 0.0], 1.0, 200);
        assert!(grid[0].abs() < 0.011 && grid[1].abs() < 0.011);
        let fit = fit(&data, RIDGE).unwrap();
        assert!(fit.theta[0].abs() < 1e-9 && fit.theta[1].abs() < 1e-9);
    }

    #[test]
    fn intercept_only_data_recovers_base_rate() {
        let data = [(1.0, 1), (1.0, 1), (1.0, 1), (1.0, 0)];
        // Only θ0 + θ1 is identified; grid over the sum.
        let best_sum = (0..=4000)
            .map(|i| -2.0 + 4.0 * i as f64 / 4000.0)
            .min_by(|a, b| {
                objective([a / 2.0, a / 2.0], &data, RIDGE).total_cmp(&objective(
                    [b / 2.0, b / 2.0],
                    &data,
                    RIDGE,
                ))
            })
            .unwrap();
        assert!((best_sum - 3f64.ln()).abs() < 2e-3);
        let fit = fit(&data, RIDGE).unwrap();
        let p = sigmoid(fit.theta[0] + fit.theta[1]);
        assert!((p - 0.75).abs() < 1e-5, "p = {p}");
    }

    #[test]
    fn separable_data_converges_finite() {
        let mut data = vec![(0.0, 0u8); 10];
        data.extend(std::iter::repeat_n((1.0, 1u8), 10));
        let fit = fit(&data, RIDGE).unwrap();
        assert!(fit.theta.iter().all(|t| t.is_finite()));
        assert!(sigmoid(fit.theta[0]) < 0.01);
        assert!(sigmoid(fit.theta[0] + fit.theta[1]) > 0.99);
        assert!(fit.gradient_norm <= GRADIENT_TOL * 10.0);
    }

    #[test]
    fn single_class_is_rejected() {
        assert!(matches!(
            fit(&[(0.0, 1), (1.0, 1)], RIDGE),
            Err(Error::SingleClass)
        ));
        assert!(matches!(fit(&[(0.0, 1)], RIDGE), Err(Error::TooFewPoints { .. })));
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let data = [(0.3, 1), (1.7, 0), (-0.4, 1), (2.2, 0), (0.9, 1)];
        let theta = [0.4, -1.3];
        let g = gradient(theta, &data, RIDGE);
        let h = 1e-6;
        for k in 0..2 {
            let mut up = theta;
            let mut dn = theta;
            up[k] += h;
            dn[k] -= h;
            let fd = (objective(up, &data, RIDGE) - objective(dn, &data, RIDGE)) / (2.0 * h);
            assert!((fd - g[k]).abs() / g[k].abs().max(1e-8) < 1e-5);
        }
    }

    #[test]
    fn sigmoid_is_stable_at_extremes() {
        assert_eq!(sigmoid(0.0), 0.5);
        assert!(sigmoid(-800.0) >= 0.0 && sigmoid(800.0) <= 1.0);
        assert!((sigmoid(2.0) - 0.8807970779778823).abs() < 1e-15);
    }
}

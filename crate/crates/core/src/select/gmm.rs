//! Two-component 1-D Gaussian mixture fitted by expectation-maximization.

use std::f64::consts::PI;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::logistic::sigmoid;

/// Floor on σ², i.e. 1e-5 on σ.
pub const VARIANCE_FLOOR: f64 = 1e-10;
pub const MAX_ITERATIONS: usize = 500;
/// EM stops once one iteration gains less log-likelihood than this.
pub const LOG_LIKELIHOOD_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Component {
    pub weight: f64,
    pub mean: f64,
    pub std: f64,
}

impl Component {
    fn log_weighted_density(&self, x: f64) -> f64 {
        let z = (x - self.mean) / self.std;
        self.weight.ln() - self.std.ln() - 0.5 * (2.0 * PI).ln() - 0.5 * z * z
    }
}

/// A fitted mixture. `error_component` indexes the higher-mean component.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Gmm {
    pub components: [Component; 2],
    pub error_component: usize,
}

impl Gmm {
    pub fn new(components: [Component; 2]) -> Self {
        let error_component = usize::from(components[1].mean >= components[0].mean);
        Self {
            components,
            error_component,
        }
    }

    /// Posterior probability that `u` belongs to the error component.
    pub fn p_error(&self, u: f64) -> f64 {
        let e = self.error_component;
        let d = self.components[e].log_weighted_density(u) - self.components[1 - e].log_weighted_density(u);
        sigmoid(d)
    }

    /// True iff the error component has strictly the larger weighted density.
    pub fn predicts_error(&self, u: f64) -> bool {
        let e = self.error_component;
        self.components[e].log_weighted_density(u) > self.components[1 - e].log_weighted_density(u)
    }

    pub fn log_likelihood(&self, xs: &[f64]) -> f64 {
        xs.iter()
            .map(|&x| {
                log_sum_exp(
                    self.components[0].log_weighted_density(x),
                    self.components[1].log_weighted_density(x),
                )
            })
            .sum()
    }
}

fn log_sum_exp(a: f64, b: f64) -> f64 {
    let m = a.max(b);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + ((a - m).exp() + (b - m).exp()).ln()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GmmOptions {
    pub seed: u64,
    /// Extra randomly initialized runs; the best log-likelihood wins.
    pub restarts: usize,
    pub max_iterations: usize,
    pub tolerance: f64,
}

impl Default for GmmOptions {
    fn default() -> Self {
        Self {
            seed: 0,
            restarts: 0,
            max_iterations: MAX_ITERATIONS,
            tolerance: LOG_LIKELIHOOD_TOL,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GmmFit {
    pub model: Gmm,
    /// Log-likelihood before each M-step, plus the final value.
    pub log_likelihood_trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

impl GmmFit {
    pub fn final_log_likelihood(&self) -> f64 {
        *self.log_likelihood_trace.last().unwrap_or(&f64::NEG_INFINITY)
    }
}

/// Linear-interpolation percentile of pre-sorted data.
fn percentile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

fn sample_std(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
}

pub fn gmm_fit(scores: &[f64], seed: u64) -> Result<GmmFit> {
    gmm_fit_with(
        scores,
        GmmOptions {
            seed,
            ..GmmOptions::default()
        },
    )
}

pub fn gmm_fit_with(scores: &[f64], options: GmmOptions) -> Result<GmmFit> {
    if scores.len() < 4 {
        return Err(Error::TooFewPoints {
            needed: 4,
            got: scores.len(),
        });
    }
    if scores.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidParameter("non-finite score".into()));
    }
    let mut sorted = scores.to_vec();
    sorted.sort_by(f64::total_cmp);
    if sorted[0] == sorted[sorted.len() - 1] {
        return Err(Error::Degenerate("all scores are identical".into()));
    }

    let std = sample_std(scores).max(VARIANCE_FLOOR.sqrt());
    let (mut lo, mut hi) = (percentile(&sorted, 0.25), percentile(&sorted, 0.75));
    if lo == hi {
        lo = sorted[0];
        hi = sorted[sorted.len() - 1];
    }
    let mut best = run_em(scores, [lo, hi], std, &options)?;

    if options.restarts > 0 {
        let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
        for _ in 0..options.restarts {
            let picks = sample(&mut rng, scores.len(), 2);
            let (a, b) = (scores[picks.index(0)], scores[picks.index(1)]);
            if a == b {
                continue;
            }
            // Restarts that collapse are simply discarded.
            if let Ok(fit) = run_em(scores, [a.min(b), a.max(b)], std, &options) {
                if fit.final_log_likelihood() > best.final_log_likelihood() {
                    best = fit;
                }
            }
        }
    }
    Ok(best)
}

fn run_em(xs: &[f64], means: [f64; 2], std: f64, options: &GmmOptions) -> Result<GmmFit> {
    let n = xs.len() as f64;
    let mut comps = [
        Component {
            weight: 0.5,
            mean: means[0],
            std,
        },
        Component {
            weight: 0.5,
            mean: means[1],
            std,
        },
    ];
    let mut resp = vec![0.0f64; xs.len()];
    let mut trace = Vec::new();
    let mut converged = false;
    let mut iterations = 0;

    while iterations < options.max_iterations {
        // E-step: resp[i] = posterior of component 1.
        let mut ll = 0.0;
        for (r, &x) in resp.iter_mut().zip(xs) {
            let a = comps[0].log_weighted_density(x);
            let b = comps[1].log_weighted_density(x);
            let lse = log_sum_exp(a, b);
            ll += lse;
            *r = (b - lse).exp();
        }
        if let Some(&prev) = trace.last() {
            if ll - prev < options.tolerance {
                trace.push(ll);
                converged = true;
                break;
            }
        }
        trace.push(ll);

        // M-step.
        let n1: f64 = resp.iter().sum();
        let n0 = n - n1;
        if n0 <= 0.0 || n1 <= 0.0 {
            return Err(Error::Degenerate("a mixture component lost all mass".into()));
        }
        let m0 = xs.iter().zip(&resp).map(|(x, r)| (1.0 - r) * x).sum::<f64>() / n0;
        let m1 = xs.iter().zip(&resp).map(|(x, r)| r * x).sum::<f64>() / n1;
        let v0 = xs
            .iter()
            .zip(&resp)
            .map(|(x, r)| (1.0 - r) * (x - m0).powi(2))
            .sum::<f64>()
            / n0;
        let v1 = xs
            .iter()
            .zip(&resp)
            .map(|(x, r)| r * (x - m1).powi(2))
            .sum::<f64>()
            / n1;
        comps = [
            Component {
                weight: n0 / n,
                mean: m0,
                std: v0.max(VARIANCE_FLOOR).sqrt(),
            },
            Component {
                weight: n1 / n,
                mean: m1,
                std: v1.max(VARIANCE_FLOOR).sqrt(),
            },
        ];
        iterations += 1;
    }

    let spread = 1.0 + comps[0].mean.abs().max(comps[1].mean.abs());
    if (comps[0].mean - comps[1].mean).abs() <= 1e-12 * spread
        && (comps[0].std - comps[1].std).abs() <= 1e-12 * spread
    {
        return Err(Error::Degenerate(format!(
            "both components collapsed onto mean {}",
            comps[0].mean
        )));
    }
    Ok(GmmFit {
        model: Gmm::new(comps),
        log_likelihood_trace: trace,
        iterations,
        converged,
    })
}

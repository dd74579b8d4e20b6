//! Stage-wise exit probabilities of a group-sequential test.
//!
//! The standardized statistics `Z_1, …, Z_K` follow the canonical joint
//! distribution: `Z_k ~ N(θ√I_k, 1)` with `Cov(Z_j, Z_k) = √(I_j / I_k)`.
//! Exit probabilities are obtained by propagating the sub-density of `Z_k`
//! restricted to the continuation region `(f_k, e_k]` from stage to stage on a
//! composite Simpson grid. Crossing probabilities at each stage are evaluated
//! in closed form from the previous stage's grid, so only the continuation
//! integral is approximated.

use crate::error::{Error, Result};
use crate::normal;

/// Default number of Simpson nodes per stage.
pub const DEFAULT_NODES: usize = 301;

/// Half-width, in standard units around the stage mean, beyond which the
/// continuation sub-density is treated as zero.
const WINDOW: f64 = 8.0;

/// A group-sequential test evaluated under a fixed drift.
#[derive(Debug, Clone, PartialEq)]
pub struct SequentialProblem {
    info: Vec<f64>,
    drift: f64,
    efficacy: Vec<f64>,
    futility: Vec<f64>,
}

impl SequentialProblem {
    /// Validates and builds a problem.
    ///
    /// `info` holds the Fisher information `I_k` at each analysis, `drift` is
    /// θ so that `E[Z_k] = θ√I_k`. Futility bounds may be `-∞` at interim
    /// stages; the final futility bound must equal the final efficacy bound.
    pub fn new(info: Vec<f64>, drift: f64, efficacy: Vec<f64>, futility: Vec<f64>) -> Result<Self> {
        let k = info.len();
        if k == 0 {
            return Err(Error::invalid("at least one stage is required"));
        }
        if efficacy.len() != k {
            return Err(Error::DimensionMismatch {
                expected: k,
                found: efficacy.len(),
            });
        }
        if futility.len() != k {
            return Err(Error::DimensionMismatch {
                expected: k,
                found: futility.len(),
            });
        }
        if !drift.is_finite() {
            return Err(Error::invalid(format!("drift must be finite, got {drift}")));
        }
        let mut prev = 0.0;
        for (i, &v) in info.iter().enumerate() {
            if !(v.is_finite() && v > prev) {
                return Err(Error::invalid(format!(
                    "information levels must be positive and strictly increasing (stage {})",
                    i + 1
                )));
            }
            prev = v;
        }
        for stage in 0..k {
            let (f, e) = (futility[stage], efficacy[stage]);
            if e.is_nan() || f.is_nan() || e == f64::NEG_INFINITY || f == f64::INFINITY {
                return Err(Error::invalid(format!(
                    "invalid boundary at stage {}",
                    stage + 1
                )));
            }
            if stage + 1 < k {
                if f >= e {
                    return Err(Error::EmptyContinuation {
                        stage: stage + 1,
                        futility: f,
                        efficacy: e,
                    });
                }
            } else if f != e || !e.is_finite() {
                return Err(Error::invalid(format!(
                    "final stage requires a finite f_K = e_K, got f_K = {f}, e_K = {e}"
                )));
            }
        }
        Ok(Self {
            info,
            drift,
            efficacy,
            futility,
        })
    }

    pub fn stages(&self) -> usize {
        self.info.len()
    }

    pub fn info(&self) -> &[f64] {
        &self.info
    }

    pub fn drift(&self) -> f64 {
        self.drift
    }

    pub fn efficacy(&self) -> &[f64] {
        &self.efficacy
    }

    pub fn futility(&self) -> &[f64] {
        &self.futility
    }

    /// The same test under a different drift.
    pub fn with_drift(&self, drift: f64) -> Result<Self> {
        Self::new(
            self.info.clone(),
            drift,
            self.efficacy.clone(),
            self.futility.clone(),
        )
    }
}

/// Per-stage probabilities of stopping to accept (`E_k`) or reject (`F_k`) H0.
#[derive(Debug, Clone, PartialEq)]
pub struct ExitProbabilities {
    accept: Vec<f64>,
    reject: Vec<f64>,
}

impl ExitProbabilities {
    pub fn new(accept: Vec<f64>, reject: Vec<f64>) -> Result<Self> {
        if accept.len() != reject.len() {
            return Err(Error::DimensionMismatch {
                expected: accept.len(),
                found: reject.len(),
            });
        }
        Ok(Self { accept, reject })
    }

    /// `E_k`, probability of stopping at stage k for futility.
    pub fn accept(&self) -> &[f64] {
        &self.accept
    }

    /// `F_k`, probability of stopping at stage k for efficacy.
    pub fn reject(&self) -> &[f64] {
        &self.reject
    }

    /// `S_k = E_k + F_k`.
    pub fn stop(&self) -> Vec<f64> {
        self.accept
            .iter()
            .zip(&self.reject)
            .map(|(e, f)| e + f)
            .collect()
    }

    pub fn stages(&self) -> usize {
        self.accept.len()
    }

    /// Overall probability of rejecting H0.
    pub fn total_reject(&self) -> f64 {
        self.reject.iter().sum()
    }

    pub fn total_accept(&self) -> f64 {
        self.accept.iter().sum()
    }

    /// Σ S_k; equals one up to quadrature error.
    pub fn total(&self) -> f64 {
        self.total_accept() + self.total_reject()
    }

    /// Σ S_k·x_k for a per-stage quantity `x_k` (e.g. sample size).
    pub fn expectation(&self, values: &[f64]) -> Result<f64> {
        if values.len() != self.stages() {
            return Err(Error::DimensionMismatch {
                expected: self.stages(),
                found: values.len(),
            });
        }
        Ok(self.stop().iter().zip(values).map(|(s, v)| s * v).sum())
    }
}

/// Quadrature settings for [`exit_probabilities_with`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quadrature {
    nodes: usize,
}

impl Quadrature {
    /// `nodes` is rounded up to the next odd number (Simpson's rule) and must be at least 3.
    pub fn new(nodes: usize) -> Result<Self> {
        if nodes < 3 {
            return Err(Error::invalid("quadrature needs at least 3 nodes"));
        }
        Ok(Self { nodes: nodes | 1 })
    }

    pub fn nodes(&self) -> usize {
        self.nodes
    }
}

impl Default for Quadrature {
    fn default() -> Self {
        Self {
            nodes: DEFAULT_NODES,
        }
    }
}

/// Continuation sub-density sampled on a Simpson grid; `mass[i]` already
/// includes the quadrature weight.
struct Grid {
    z: Vec<f64>,
    mass: Vec<f64>,
}

impl Grid {
    fn empty() -> Self {
        Self {
            z: Vec::new(),
            mass: Vec::new(),
        }
    }

    /// Simpson nodes and weights on `[lo, hi]`, or `None` when the interval is empty.
    fn simpson(lo: f64, hi: f64, nodes: usize) -> Option<(Vec<f64>, Vec<f64>)> {
        if !(hi > lo) {
            return None;
        }
        let h = (hi - lo) / (nodes - 1) as f64;
        let z = (0..nodes).map(|i| lo + h * i as f64).collect();
        let w = (0..nodes)
            .map(|i| {
                let c = if i == 0 || i == nodes - 1 {
                    1.0
                } else if i % 2 == 1 {
                    4.0
                } else {
                    2.0
                };
                c * h / 3.0
            })
            .collect();
        Some((z, w))
    }
}

/// Exit probabilities with the default quadrature.
pub fn exit_probabilities(problem: &SequentialProblem) -> ExitProbabilities {
    exit_probabilities_with(problem, &Quadrature::default())
}

/// Exit probabilities by density recursion.
pub fn exit_probabilities_with(
    problem: &SequentialProblem,
    quad: &Quadrature,
) -> ExitProbabilities {
    let k_max = problem.stages();
    let info = &problem.info;
    let theta = problem.drift;
    let mut accept = vec![0.0; k_max];
    let mut reject = vec![0.0; k_max];

    let mean1 = theta * info[0].sqrt();
    let (e1, f1) = (problem.efficacy[0], problem.futility[0]);
    reject[0] = normal::sf(e1 - mean1);
    accept[0] = if k_max == 1 {
        normal::cdf(e1 - mean1)
    } else {
        normal::cdf(f1 - mean1)
    };
    if k_max == 1 {
        return ExitProbabilities { accept, reject };
    }

    let mut grid = match continuation_nodes(f1, e1, mean1, quad.nodes) {
        Some((z, w)) => {
            let mass = z
                .iter()
                .zip(&w)
                .map(|(&zi, &wi)| wi * normal::pdf(zi - mean1))
                .collect();
            Grid { z, mass }
        }
        None => Grid::empty(),
    };

    for k in 1..k_max {
        let sqrt_prev = info[k - 1].sqrt();
        let sqrt_cur = info[k].sqrt();
        let d_info = info[k] - info[k - 1];
        let sd = d_info.sqrt();
        let (e, f) = (problem.efficacy[k], problem.futility[k]);

        // Location of S_k = Z_k√I_k given each previous node.
        let shift: Vec<f64> = grid
            .z
            .iter()
            .map(|&u| u * sqrt_prev + theta * d_info)
            .collect();

        let mut up = 0.0;
        let mut down = 0.0;
        for (s, m) in shift.iter().zip(&grid.mass) {
            up += m * normal::sf((e * sqrt_cur - s) / sd);
            if f.is_finite() {
                down += m * normal::cdf((f * sqrt_cur - s) / sd);
            }
        }
        reject[k] = up;
        accept[k] = if k + 1 == k_max {
            // f_K = e_K: everything that reaches the last stage and does not
            // cross is accepted. Taking the complement keeps Σ S_k = 1.
            let stopped_before: f64 = accept[..k].iter().chain(&reject[..k]).sum();
            1.0 - stopped_before - up
        } else {
            down
        };

        if k + 1 == k_max {
            break;
        }

        let mean_k = theta * sqrt_cur;
        grid = match continuation_nodes(f, e, mean_k, quad.nodes) {
            Some((z, w)) => {
                let scale = sqrt_cur / sd;
                let mass = z
                    .iter()
                    .zip(&w)
                    .map(|(&zi, &wi)| {
                        let density: f64 = shift
                            .iter()
                            .zip(&grid.mass)
                            .map(|(s, m)| m * normal::pdf((zi * sqrt_cur - s) / sd))
                            .sum();
                        wi * scale * density
                    })
                    .collect();
                Grid { z, mass }
            }
            None => Grid::empty(),
        };
    }

    // The final-stage accept term is a difference of sums; clamp tiny negatives.
    for p in accept.iter_mut().chain(reject.iter_mut()) {
        *p = p.clamp(0.0, 1.0);
    }
    ExitProbabilities { accept, reject }
}

fn continuation_nodes(f: f64, e: f64, mean: f64, nodes: usize) -> Option<(Vec<f64>, Vec<f64>)> {
    let lo = f.max(mean - WINDOW);
    let hi = e.min(mean + WINDOW);
    Grid::simpson(lo, hi, nodes)
}

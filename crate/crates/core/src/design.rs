//! Construction of a two-arm group-sequential design from its specification.

use serde::{Deserialize, Serialize};

use crate::boundaries::{
    build_boundaries, equal_fractions, validate_fractions, BoundaryFamily, BoundarySet,
    FutilityStyle,
};
use crate::error::{Error, Result};
use crate::normal;
use crate::sequential::{exit_probabilities, ExitProbabilities, SequentialProblem};

const POWER_TOL: f64 = 1e-10;
const MAX_INFLATION: f64 = 50.0;

/// User-facing design parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignSpec {
    /// One-sided type I error.
    pub alpha: f64,
    /// Type II error at `tau`.
    pub beta: f64,
    /// Standardized effect used for powering.
    pub tau: f64,
    /// Effect at which operating characteristics are evaluated; `tau` when `None`.
    pub mu_eval: Option<f64>,
    pub sigma0_sq: f64,
    pub sigma1_sq: f64,
    /// Cumulative information fractions, ending at 1.
    pub rho: Vec<f64>,
    pub family: BoundaryFamily,
    pub futility: FutilityStyle,
    /// Experimental-to-control allocation ratio `n_1 / n_0`.
    pub allocation: f64,
}

impl DesignSpec {
    /// `stages` equally spaced analyses with the defaults used throughout the
    /// delay study: α = 0.05, β = 0.1, τ = 0.5, WT Δ = 0.25, binding futility at 0.
    pub fn new(stages: usize) -> Self {
        Self {
            alpha: 0.05,
            beta: 0.1,
            tau: 0.5,
            mu_eval: None,
            sigma0_sq: 1.0,
            sigma1_sq: 1.0,
            rho: equal_fractions(stages.max(1)),
            family: BoundaryFamily::WangTsiatis { delta: 0.25 },
            futility: FutilityStyle::BindingZero,
            allocation: 1.0,
        }
    }

    pub fn alpha(mut self, alpha: f64) -> Self {
        self.alpha = alpha;
        self
    }

    pub fn beta(mut self, beta: f64) -> Self {
        self.beta = beta;
        self
    }

    pub fn tau(mut self, tau: f64) -> Self {
        self.tau = tau;
        self
    }

    pub fn mu_eval(mut self, mu: f64) -> Self {
        self.mu_eval = Some(mu);
        self
    }

    pub fn rho(mut self, rho: Vec<f64>) -> Self {
        self.rho = rho;
        self
    }

    pub fn family(mut self, family: BoundaryFamily) -> Self {
        self.family = family;
        self
    }

    pub fn futility(mut self, futility: FutilityStyle) -> Self {
        self.futility = futility;
        self
    }

    pub fn variances(mut self, sigma0_sq: f64, sigma1_sq: f64) -> Self {
        self.sigma0_sq = sigma0_sq;
        self.sigma1_sq = sigma1_sq;
        self
    }

    pub fn allocation(mut self, ratio: f64) -> Self {
        self.allocation = ratio;
        self
    }

    pub fn stages(&self) -> usize {
        self.rho.len()
    }

    pub fn evaluation_effect(&self) -> f64 {
        self.mu_eval.unwrap_or(self.tau)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 0.5) {
            return Err(Error::invalid(format!(
                "alpha must lie in (0, 0.5), got {}",
                self.alpha
            )));
        }
        if !(self.beta > 0.0 && self.beta < 1.0 - self.alpha) {
            return Err(Error::invalid(format!(
                "beta must lie in (0, 1 - alpha), got {}",
                self.beta
            )));
        }
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return Err(Error::invalid(format!(
                "tau must be positive, got {}",
                self.tau
            )));
        }
        if let Some(mu) = self.mu_eval {
            if !mu.is_finite() {
                return Err(Error::invalid("mu must be finite"));
            }
        }
        for (name, v) in [
            ("sigma0_sq", self.sigma0_sq),
            ("sigma1_sq", self.sigma1_sq),
            ("allocation", self.allocation),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::invalid(format!("{name} must be positive, got {v}")));
            }
        }
        validate_fractions(&self.rho)
    }

    /// Variance factor `c` such that `I = n / c` for a total sample size `n`.
    fn variance_factor(&self) -> f64 {
        let r = self.allocation;
        (1.0 + r) * (self.sigma0_sq + self.sigma1_sq / r)
    }
}

/// Total single-stage sample size for a one-sided level-α z-test with power
/// 1 − β at effect `tau`, equal allocation (continuous, not rounded).
pub fn single_stage_n(
    alpha: f64,
    beta: f64,
    tau: f64,
    sigma0_sq: f64,
    sigma1_sq: f64,
) -> Result<f64> {
    let spec = DesignSpec::new(1)
        .alpha(alpha)
        .beta(beta)
        .tau(tau)
        .variances(sigma0_sq, sigma1_sq);
    spec.validate()?;
    single_stage_for(&spec)
}

fn single_stage_for(spec: &DesignSpec) -> Result<f64> {
    let z = normal::quantile(1.0 - spec.alpha)? + normal::quantile(1.0 - spec.beta)?;
    Ok(spec.variance_factor() * z * z / (spec.tau * spec.tau))
}

/// A fully specified group-sequential design.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupSequentialDesign {
    spec: DesignSpec,
    boundaries: BoundarySet,
    n_single: f64,
    sample_sizes: Vec<f64>,
    per_arm: Vec<(f64, f64)>,
    info: Vec<f64>,
    exit: ExitProbabilities,
    ess: f64,
    eg: f64,
}

impl GroupSequentialDesign {
    pub fn spec(&self) -> &DesignSpec {
        &self.spec
    }

    pub fn boundaries(&self) -> &BoundarySet {
        &self.boundaries
    }

    pub fn stages(&self) -> usize {
        self.sample_sizes.len()
    }

    /// Total single-stage sample size.
    pub fn n_single(&self) -> f64 {
        self.n_single
    }

    /// Cumulative total sample size `n_k` (both arms).
    pub fn sample_sizes(&self) -> &[f64] {
        &self.sample_sizes
    }

    /// Maximum sample size `n_K`.
    pub fn max_n(&self) -> f64 {
        *self.sample_sizes.last().expect("at least one stage")
    }

    /// Cumulative `(n_0k, n_1k)` per stage.
    pub fn per_arm(&self) -> &[(f64, f64)] {
        &self.per_arm
    }

    pub fn info(&self) -> &[f64] {
        &self.info
    }

    /// Exit probabilities at the evaluation effect.
    pub fn exit(&self) -> &ExitProbabilities {
        &self.exit
    }

    pub fn ess(&self) -> f64 {
        self.ess
    }

    pub fn eg(&self) -> f64 {
        self.eg
    }

    /// The test statistic's distribution under effect `mu`.
    pub fn problem_at(&self, mu: f64) -> Result<SequentialProblem> {
        self.boundaries.problem(self.info.clone(), mu)
    }

    pub fn exit_at(&self, mu: f64) -> Result<ExitProbabilities> {
        Ok(exit_probabilities(&self.problem_at(mu)?))
    }

    /// Expected sample size under effect `mu`.
    pub fn ess_at(&self, mu: f64) -> Result<f64> {
        self.exit_at(mu)?.expectation(&self.sample_sizes)
    }
}

/// Expected efficiency gain `(n_single − ESS) / n_single`.
pub fn efficiency_gain(design: &GroupSequentialDesign) -> f64 {
    (design.n_single - design.ess) / design.n_single
}

fn power_at(spec: &DesignSpec, boundaries: &BoundarySet, n_max: f64) -> Result<f64> {
    let c = spec.variance_factor();
    let info = spec.rho.iter().map(|r| r * n_max / c).collect();
    let p = boundaries.problem(info, spec.tau)?;
    Ok(exit_probabilities(&p).total_reject())
}

/// Builds boundaries, solves the maximum sample size for power 1 − β at τ and
/// evaluates stopping probabilities, ESS and EG at the evaluation effect.
pub fn build_design(spec: &DesignSpec) -> Result<GroupSequentialDesign> {
    spec.validate()?;
    let n_single = single_stage_for(spec)?;
    let boundaries = build_boundaries(&spec.rho, spec.family, spec.alpha, spec.futility)?;
    let target = 1.0 - spec.beta;

    let n_max = if spec.stages() == 1 {
        n_single
    } else {
        solve_max_n(spec, &boundaries, n_single, target)?
    };

    assemble(spec.clone(), boundaries, n_single, n_max)
}

fn solve_max_n(
    spec: &DesignSpec,
    boundaries: &BoundarySet,
    n_single: f64,
    target: f64,
) -> Result<f64> {
    let power = |n: f64| power_at(spec, boundaries, n).map(|p| p - target);
    let mut lo = n_single;
    let mut hi = 3.0 * n_single;
    while power(lo)? > 0.0 {
        hi = lo;
        lo *= 0.5;
        if lo < 1e-6 * n_single {
            return Err(Error::RootNotBracketed {
                what: "maximum sample size",
                lo,
                hi,
            });
        }
    }
    while power(hi)? < 0.0 {
        lo = hi;
        hi *= 2.0;
        if hi > MAX_INFLATION * n_single {
            return Err(Error::PowerUnattainable {
                target,
                limit: MAX_INFLATION * n_single,
            });
        }
    }
    let mut n = 0.5 * (lo + hi);
    for _ in 0..200 {
        n = 0.5 * (lo + hi);
        let g = power(n)?;
        if g.abs() < POWER_TOL || (hi - lo) < 1e-12 * n {
            break;
        }
        if g < 0.0 {
            lo = n;
        } else {
            hi = n;
        }
    }
    Ok(n)
}

fn assemble(
    spec: DesignSpec,
    boundaries: BoundarySet,
    n_single: f64,
    n_max: f64,
) -> Result<GroupSequentialDesign> {
    let c = spec.variance_factor();
    let r = spec.allocation;
    let sample_sizes: Vec<f64> = spec.rho.iter().map(|rho| rho * n_max).collect();
    let per_arm = sample_sizes
        .iter()
        .map(|n| (n / (1.0 + r), n * r / (1.0 + r)))
        .collect();
    let info: Vec<f64> = sample_sizes.iter().map(|n| n / c).collect();
    let problem = boundaries.problem(info.clone(), spec.evaluation_effect())?;
    let exit = exit_probabilities(&problem);
    let ess = exit.expectation(&sample_sizes)?;
    let eg = (n_single - ess) / n_single;
    Ok(GroupSequentialDesign {
        spec,
        boundaries,
        n_single,
        sample_sizes,
        per_arm,
        info,
        exit,
        ess,
        eg,
    })
}

impl GroupSequentialDesign {
    /// Same design with EG measured against a different single-stage size
    /// (e.g. a published, already-rounded reference size).
    pub fn with_single_stage(&self, n_single: f64) -> Result<Self> {
        if !(n_single > 0.0 && n_single.is_finite()) {
            return Err(Error::invalid(format!(
                "single-stage size must be positive, got {n_single}"
            )));
        }
        let mut d = self.clone();
        d.n_single = n_single;
        d.eg = (n_single - d.ess) / n_single;
        Ok(d)
    }
}

/// Integer rounding used for reporting stage sizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Rounding {
    /// Ceiling of each cumulative total.
    #[default]
    Total,
    /// Ceiling of each arm, then summed.
    PerArm,
}

/// Integer cumulative stage sizes, non-decreasing across stages.
pub fn round_for_report(design: &GroupSequentialDesign, rounding: Rounding) -> Vec<u64> {
    let raw: Vec<u64> = match rounding {
        Rounding::Total => design.sample_sizes.iter().map(|&n| ceil_tol(n)).collect(),
        Rounding::PerArm => design
            .per_arm
            .iter()
            .map(|&(a, b)| ceil_tol(a) + ceil_tol(b))
            .collect(),
    };
    let mut out = Vec::with_capacity(raw.len());
    let mut floor = 0;
    for n in raw {
        floor = floor.max(n);
        out.push(floor);
    }
    out
}

/// Ceiling that leaves values within 1e-9 of an integer untouched.
fn ceil_tol(x: f64) -> u64 {
    let r = x.round();
    if (x - r).abs() < 1e-9 {
        r as u64
    } else {
        x.ceil() as u64
    }
}

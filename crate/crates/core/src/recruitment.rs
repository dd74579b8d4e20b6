//! Recruitment models and pipeline-participant counts.
//!
//! Time is measured in months. Under the mixed model the monthly recruitment
//! rate grows as `δ·t` until `l·t_max` and stays at `δ·l·t_max` afterwards;
//! `l = 1` is purely linear recruitment. Discrete monthly sums are evaluated in
//! closed form with real-valued times.

use serde::{Deserialize, Serialize};

use crate::design::GroupSequentialDesign;
use crate::error::{Error, Result};

/// Recruitment shape, independent of the trial size.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "pattern", rename_all = "snake_case")]
pub enum RecruitmentPattern {
    Uniform,
    /// Linear ramp for the first fraction `l` of the recruitment period.
    Mixed {
        l: f64,
    },
}

impl RecruitmentPattern {
    pub fn linear() -> Self {
        RecruitmentPattern::Mixed { l: 1.0 }
    }

    /// `uniform`, `linear` or `mixed`.
    pub fn name(&self) -> &'static str {
        match *self {
            RecruitmentPattern::Uniform => "uniform",
            RecruitmentPattern::Mixed { l } if l == 1.0 => "linear",
            RecruitmentPattern::Mixed { .. } => "mixed",
        }
    }

    pub fn ramp_fraction(&self) -> Option<f64> {
        match *self {
            RecruitmentPattern::Uniform => None,
            RecruitmentPattern::Mixed { l } => Some(l),
        }
    }
}

/// A recruitment pattern calibrated so that `n_max` participants are
/// recruited in `t_max` months.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RecruitmentModel {
    pattern: RecruitmentPattern,
    t_max: f64,
    n_max: f64,
    /// λ for uniform, δ for mixed.
    rate: f64,
}

impl RecruitmentModel {
    pub fn new(pattern: RecruitmentPattern, t_max: f64, n_max: f64) -> Result<Self> {
        if !(t_max > 0.0 && t_max.is_finite()) {
            return Err(Error::invalid(format!(
                "t_max must be positive, got {t_max}"
            )));
        }
        if !(n_max > 0.0 && n_max.is_finite()) {
            return Err(Error::invalid(format!(
                "maximum sample size must be positive, got {n_max}"
            )));
        }
        let rate = match pattern {
            RecruitmentPattern::Uniform => n_max / t_max,
            RecruitmentPattern::Mixed { l } => solve_delta(n_max, t_max, l)?,
        };
        Ok(Self {
            pattern,
            t_max,
            n_max,
            rate,
        })
    }

    pub fn uniform(n_max: f64, t_max: f64) -> Result<Self> {
        Self::new(RecruitmentPattern::Uniform, t_max, n_max)
    }

    pub fn mixed(n_max: f64, t_max: f64, l: f64) -> Result<Self> {
        Self::new(RecruitmentPattern::Mixed { l }, t_max, n_max)
    }

    pub fn linear(n_max: f64, t_max: f64) -> Result<Self> {
        Self::new(RecruitmentPattern::linear(), t_max, n_max)
    }

    pub fn pattern(&self) -> RecruitmentPattern {
        self.pattern
    }

    pub fn t_max(&self) -> f64 {
        self.t_max
    }

    pub fn n_max(&self) -> f64 {
        self.n_max
    }

    /// Uniform rate λ = n_max / t_max, if uniform.
    pub fn lambda(&self) -> Option<f64> {
        matches!(self.pattern, RecruitmentPattern::Uniform).then_some(self.rate)
    }

    /// Slope δ of the linear phase, if mixed.
    pub fn delta(&self) -> Option<f64> {
        matches!(self.pattern, RecruitmentPattern::Mixed { .. }).then_some(self.rate)
    }

    /// End of the linear phase, `l·t_max` (0 for uniform).
    fn ramp_end(&self) -> f64 {
        self.pattern.ramp_fraction().map_or(0.0, |l| l * self.t_max)
    }

    /// Participants recruited during the linear phase, `δ(1 + 2 + … + l·t_max)`.
    fn ramp_capacity(&self) -> f64 {
        let end = self.ramp_end();
        0.5 * self.rate * end * (end + 1.0)
    }

    /// Monthly rate once recruitment has plateaued.
    pub fn plateau_rate(&self) -> f64 {
        match self.pattern {
            RecruitmentPattern::Uniform => self.rate,
            RecruitmentPattern::Mixed { .. } => self.rate * self.ramp_end(),
        }
    }
}

/// Slope δ such that the mixed model recruits `n_max` in `t_max` months:
/// `0.5δL(L + 1) + δL(1 − l)t_max = n_max` with `L = l·t_max`.
pub fn solve_delta(n_max: f64, t_max: f64, l: f64) -> Result<f64> {
    if !(n_max > 0.0 && n_max.is_finite()) || !(t_max > 0.0 && t_max.is_finite()) {
        return Err(Error::invalid(format!(
            "n_max and t_max must be positive, got {n_max} and {t_max}"
        )));
    }
    if !(l > 0.0 && l <= 1.0) {
        return Err(Error::invalid(format!(
            "linear fraction l must lie in (0, 1], got {l}"
        )));
    }
    let end = l * t_max;
    if end < 1.0 {
        log::warn!("linear recruitment phase l*t_max = {end} is shorter than one month");
    }
    Ok(n_max / (0.5 * end * (end + 1.0) + end * (1.0 - l) * t_max))
}

/// Expected time (months) to recruit `n` participants.
pub fn recruit_time(n: f64, model: &RecruitmentModel) -> Result<f64> {
    if !(n >= 0.0) {
        return Err(Error::invalid(format!(
            "participant count must be non-negative, got {n}"
        )));
    }
    if n > model.n_max * (1.0 + 1e-12) {
        return Err(Error::invalid(format!(
            "participant count {n} exceeds the maximum sample size {}",
            model.n_max
        )));
    }
    let n = n.min(model.n_max);
    Ok(match model.pattern {
        RecruitmentPattern::Uniform => n * model.t_max / model.n_max,
        RecruitmentPattern::Mixed { .. } => {
            let delta = model.rate;
            let capacity = model.ramp_capacity();
            if n <= capacity {
                0.5 * (-1.0 + (1.0 + 8.0 * n / delta).sqrt())
            } else {
                model.ramp_end() + (n - capacity) / model.plateau_rate()
            }
        }
    })
}

/// Pipeline participants `ñ_k` and recruitment times `t_k` per stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineProfile {
    pub pipeline: Vec<f64>,
    pub recruit_time: Vec<f64>,
}

impl PipelineProfile {
    pub fn stages(&self) -> usize {
        self.pipeline.len()
    }
}

/// Pipeline counts for a design under `model` with outcome delay `m` months.
///
/// Every count is capped so that the total recruited never exceeds `n_K`,
/// and the final stage has no pipeline.
pub fn pipeline_counts(
    design: &GroupSequentialDesign,
    model: &RecruitmentModel,
    m: f64,
) -> Result<PipelineProfile> {
    pipeline_for_sizes(design.sample_sizes(), model, m)
}

/// As [`pipeline_counts`], from cumulative stage sizes directly.
pub fn pipeline_for_sizes(
    sample_sizes: &[f64],
    model: &RecruitmentModel,
    m: f64,
) -> Result<PipelineProfile> {
    if !(m >= 0.0 && m.is_finite()) {
        return Err(Error::invalid(format!(
            "delay must be non-negative, got {m}"
        )));
    }
    let k_max = sample_sizes.len();
    if k_max == 0 {
        return Err(Error::invalid("at least one stage is required"));
    }
    let n_max = sample_sizes[k_max - 1];
    if (n_max - model.n_max).abs() > 1e-9 * n_max.max(1.0) {
        return Err(Error::invalid(format!(
            "recruitment model calibrated for n_max = {}, design has {n_max}",
            model.n_max
        )));
    }

    let recruit_time = sample_sizes
        .iter()
        .map(|&n| recruit_time(n, model))
        .collect::<Result<Vec<_>>>()?;

    let pipeline = sample_sizes
        .iter()
        .zip(&recruit_time)
        .enumerate()
        .map(|(k, (&n_k, &t_k))| {
            if k + 1 == k_max {
                0.0
            } else {
                uncapped_pipeline(model, t_k, m).min(n_max - n_k).max(0.0)
            }
        })
        .collect();

    Ok(PipelineProfile {
        pipeline,
        recruit_time,
    })
}

fn uncapped_pipeline(model: &RecruitmentModel, t_k: f64, m: f64) -> f64 {
    match model.pattern {
        RecruitmentPattern::Uniform => model.rate * m,
        RecruitmentPattern::Mixed { .. } => {
            let delta = model.rate;
            let end = model.ramp_end();
            if t_k > end {
                // Plateau phase.
                delta * end * m
            } else if t_k + m < end {
                // Entirely within the ramp: δ{(t_k + 1) + … + (t_k + m)}.
                delta * m * t_k + delta * m * (m + 1.0) / 2.0
            } else {
                // Straddles the end of the ramp: δ{(t_k + 1) + … + L} + δL(t_k + m − L).
                let terms = end - t_k;
                let ramp = terms * (t_k + 1.0 + end) / 2.0;
                delta * ramp + delta * end * (t_k + m - end)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn delta_closed_forms() {
        // l = 1: δ = 2n/(t(t+1)).
        let d = solve_delta(145.05, 24.0, 1.0).unwrap();
        assert!((d - 2.0 * 145.05 / (24.0 * 25.0)).abs() < 1e-12);
        assert!((d - 0.4835).abs() < 1e-4);
        // l = 0.2: denominator 0.5·4.8·5.8 + 4.8·0.8·24 = 106.08.
        let d = solve_delta(145.05, 24.0, 0.2).unwrap();
        assert!((d - 145.05 / 106.08).abs() < 1e-12);
        assert!((d - 1.367_36).abs() < 1e-5);
    }

    #[test]
    fn delta_rejects_bad_fraction() {
        assert!(solve_delta(100.0, 24.0, 0.0).is_err());
        assert!(solve_delta(100.0, 24.0, 1.2).is_err());
        assert!(solve_delta(0.0, 24.0, 0.5).is_err());
    }

    #[test]
    fn short_ramp_still_evaluates() {
        let d = solve_delta(100.0, 4.0, 0.2).unwrap();
        assert!(d.is_finite() && d > 0.0);
    }

    #[test]
    fn mixed_model_recruits_n_max() {
        for l in [0.2, 0.4, 0.6, 0.8, 1.0] {
            let model = RecruitmentModel::mixed(150.0, 24.0, l).unwrap();
            let delta = model.delta().unwrap();
            let end = l * 24.0;
            let total = 0.5 * delta * end * (end + 1.0) + delta * end * (1.0 - l) * 24.0;
            assert!((total - 150.0).abs() < 1e-9);
            assert!((recruit_time(150.0, &model).unwrap() - 24.0).abs() < 1e-9);
        }
    }

    #[test]
    fn recruit_time_examples() {
        let model = RecruitmentModel::uniform(145.05, 24.0).unwrap();
        assert_eq!(recruit_time(0.0, &model).unwrap(), 0.0);
        assert!((recruit_time(145.05 / 2.0, &model).unwrap() - 12.0).abs() < 1e-12);

        let model = RecruitmentModel::linear(145.05, 24.0).unwrap();
        let t = recruit_time(72.525, &model).unwrap();
        let oracle = (-1.0 + (1.0 + 8.0 * 72.525 / model.delta().unwrap()).sqrt()) / 2.0;
        assert!((t - oracle).abs() < 1e-12);
        assert!((t - 16.83).abs() < 0.01);
        assert!(recruit_time(146.0, &model).is_err());
    }

    #[test]
    fn recruit_time_continuous_at_ramp_end() {
        let model = RecruitmentModel::mixed(150.0, 24.0, 0.5).unwrap();
        let cap = model.ramp_capacity();
        let below = recruit_time(cap - 1e-9, &model).unwrap();
        let above = recruit_time(cap + 1e-9, &model).unwrap();
        assert!((below - 12.0).abs() < 1e-6 && (above - 12.0).abs() < 1e-6);
    }

    #[test]
    fn straddle_branch_is_continuous() {
        let model = RecruitmentModel::mixed(150.0, 24.0, 0.5).unwrap();
        let t = 9.0;
        let m = 3.0; // t + m == L exactly: straddling branch
        let at = uncapped_pipeline(&model, t, m);
        let inside = uncapped_pipeline(&model, t, m - 1e-9);
        assert!((at - inside).abs() < 1e-6);
    }

    #[test]
    fn zero_delay_has_no_pipeline() {
        let sizes = [50.0, 100.0, 150.0];
        for pattern in [
            RecruitmentPattern::Uniform,
            RecruitmentPattern::Mixed { l: 0.4 },
            RecruitmentPattern::linear(),
        ] {
            let model = RecruitmentModel::new(pattern, 24.0, 150.0).unwrap();
            let p = pipeline_for_sizes(&sizes, &model, 0.0).unwrap();
            assert!(p.pipeline.iter().all(|&x| x == 0.0), "{pattern:?}");
        }
    }

    #[test]
    fn uniform_pipeline_caps() {
        let sizes = [72.525, 145.05];
        let model = RecruitmentModel::uniform(145.05, 24.0).unwrap();
        let p = pipeline_for_sizes(&sizes, &model, 3.0).unwrap();
        assert!((p.pipeline[0] - 18.13).abs() < 0.01);
        assert_eq!(p.pipeline[1], 0.0);
        let p = pipeline_for_sizes(&sizes, &model, 12.0).unwrap();
        assert!((p.pipeline[0] - 72.525).abs() < 1e-9);
    }

    #[test]
    fn linear_pipeline_table_value() {
        let sizes = [72.525, 145.05];
        let model = RecruitmentModel::linear(145.05, 24.0).unwrap();
        let p = pipeline_for_sizes(&sizes, &model, 3.0).unwrap();
        assert!((p.pipeline[0] - 27.31).abs() < 0.05, "{}", p.pipeline[0]);
    }

    #[test]
    fn mismatched_model_rejected() {
        let model = RecruitmentModel::uniform(100.0, 24.0).unwrap();
        assert!(pipeline_for_sizes(&[50.0, 120.0], &model, 3.0).is_err());
        assert!(pipeline_for_sizes(&[50.0, 100.0], &model, -1.0).is_err());
    }
}

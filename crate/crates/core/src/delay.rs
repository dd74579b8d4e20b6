//! Efficiency metrics that account for outcome delay.

use serde::{Deserialize, Serialize};

use crate::design::GroupSequentialDesign;
use crate::error::{Error, Result};
use crate::recruitment::{
    pipeline_counts, recruit_time, PipelineProfile, RecruitmentModel, RecruitmentPattern,
};

/// Outcome delay scenario. The recruitment pattern is calibrated against each
/// design's maximum sample size when evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DelayQuery {
    /// Months between recruitment and outcome (`m`).
    pub delay: f64,
    /// Time to conduct an interim analysis, added once to the expected duration.
    pub interim_overhead: f64,
    pub pattern: RecruitmentPattern,
    /// Total recruitment period in months.
    pub t_max: f64,
}

impl DelayQuery {
    pub fn new(delay: f64, pattern: RecruitmentPattern, t_max: f64) -> Self {
        Self {
            delay,
            interim_overhead: 0.0,
            pattern,
            t_max,
        }
    }

    pub fn with_interim_overhead(mut self, months: f64) -> Self {
        self.interim_overhead = months;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.delay >= 0.0 && self.delay.is_finite()) {
            return Err(Error::invalid(format!(
                "delay must be non-negative, got {}",
                self.delay
            )));
        }
        if !(self.interim_overhead >= 0.0 && self.interim_overhead.is_finite()) {
            return Err(Error::invalid(format!(
                "interim overhead must be non-negative, got {}",
                self.interim_overhead
            )));
        }
        Ok(())
    }

    pub fn model_for(&self, design: &GroupSequentialDesign) -> Result<RecruitmentModel> {
        RecruitmentModel::new(self.pattern, self.t_max, design.max_n())
    }
}

/// Efficiency loss, undefined when the design has no efficiency gain to lose.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", content = "value", rename_all = "snake_case")]
pub enum EfficiencyLoss {
    /// Percentage of the gain lost; may exceed 100.
    Percent(f64),
    /// EG ≤ 0.
    NoGain,
}

impl EfficiencyLoss {
    pub fn value(&self) -> Option<f64> {
        match *self {
            EfficiencyLoss::Percent(v) => Some(v),
            EfficiencyLoss::NoGain => None,
        }
    }
}

/// Expected durations in months.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExpectedTime {
    /// Expected time to trial completion for the group-sequential design.
    pub et: f64,
    /// Time to recruit `n_single` at the design's recruitment rate.
    pub t_single: f64,
    /// `t_single + m`.
    pub et_single: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DelayAssessment {
    pub profile: PipelineProfile,
    pub ess_delay: f64,
    pub eg: f64,
    pub eg_delay: f64,
    pub el: EfficiencyLoss,
    pub time: ExpectedTime,
}

/// `Σ_{k<K} S_k (n_k + ñ_k) + S_K n_K` at the design's evaluation effect.
pub fn ess_delay(design: &GroupSequentialDesign, profile: &PipelineProfile) -> Result<f64> {
    if profile.stages() != design.stages() {
        return Err(Error::DimensionMismatch {
            expected: design.stages(),
            found: profile.stages(),
        });
    }
    let inflated: Vec<f64> = design
        .sample_sizes()
        .iter()
        .zip(&profile.pipeline)
        .map(|(n, p)| n + p)
        .collect();
    design.exit().expectation(&inflated)
}

/// `100·(EG − EG_delay)/EG`.
pub fn efficiency_loss(
    design: &GroupSequentialDesign,
    profile: &PipelineProfile,
) -> Result<EfficiencyLoss> {
    let eg_delay = (design.n_single() - ess_delay(design, profile)?) / design.n_single();
    Ok(loss_from(design.eg(), eg_delay))
}

fn loss_from(eg: f64, eg_delay: f64) -> EfficiencyLoss {
    if eg <= 0.0 {
        EfficiencyLoss::NoGain
    } else {
        EfficiencyLoss::Percent(100.0 * (eg - eg_delay) / eg)
    }
}

/// Expected time to completion `m + m_interim + Σ t_k S_k`.
pub fn expected_time(design: &GroupSequentialDesign, query: &DelayQuery) -> Result<ExpectedTime> {
    query.validate()?;
    let model = query.model_for(design)?;
    let times = design
        .sample_sizes()
        .iter()
        .map(|&n| recruit_time(n, &model))
        .collect::<Result<Vec<_>>>()?;
    time_from(design, query, &times)
}

fn time_from(
    design: &GroupSequentialDesign,
    query: &DelayQuery,
    times: &[f64],
) -> Result<ExpectedTime> {
    let et = query.delay + query.interim_overhead + design.exit().expectation(times)?;
    let t_single = design.n_single() * query.t_max / design.max_n();
    Ok(ExpectedTime {
        et,
        t_single,
        et_single: t_single + query.delay,
    })
}

/// All delay metrics for one design and scenario.
pub fn assess(design: &GroupSequentialDesign, query: &DelayQuery) -> Result<DelayAssessment> {
    query.validate()?;
    let model = query.model_for(design)?;
    let profile = pipeline_counts(design, &model, query.delay)?;
    let ess_delay = ess_delay(design, &profile)?;
    let eg = design.eg();
    let eg_delay = (design.n_single() - ess_delay) / design.n_single();
    let el = loss_from(eg, eg_delay);
    let time = time_from(design, query, &profile.recruit_time)?;
    Ok(DelayAssessment {
        profile,
        ess_delay,
        eg,
        eg_delay,
        el,
        time,
    })
}

//! The 220-participant, 7-month trial used as a worked example of delay costs.

use std::io::Write;

use serde::Serialize;

use crate::boundaries::{BoundaryFamily, FutilityStyle};
use crate::delay::{assess, DelayQuery};
use crate::design::{build_design, round_for_report, DesignSpec, GroupSequentialDesign, Rounding};
use crate::error::Result;
use crate::normal;
use crate::recruitment::RecruitmentPattern;

pub const ALPHA: f64 = 0.05;
pub const BETA: f64 = 0.1;
pub const T_MAX: f64 = 7.0;
pub const DELAY: f64 = 6.0;
/// Single-stage size the standardized effect is calibrated to.
pub const SINGLE_STAGE: f64 = 214.0;

/// Effect size at which a single-stage test needs exactly [`SINGLE_STAGE`] participants.
pub fn calibrated_tau() -> f64 {
    let z = normal::quantile(1.0 - ALPHA).expect("valid level")
        + normal::quantile(1.0 - BETA).expect("valid power");
    2.0 * z / SINGLE_STAGE.sqrt()
}

/// Families in report order, with their labels.
pub fn families() -> [(&'static str, BoundaryFamily); 3] {
    [
        ("pocock", BoundaryFamily::pocock()),
        ("obrien-fleming", BoundaryFamily::obrien_fleming()),
        ("wang-tsiatis", BoundaryFamily::WangTsiatis { delta: 0.25 }),
    ]
}

/// Equally spaced design with no futility stopping.
pub fn spec(family: BoundaryFamily, stages: usize) -> DesignSpec {
    DesignSpec::new(stages)
        .alpha(ALPHA)
        .beta(BETA)
        .tau(calibrated_tau())
        .family(family)
        .futility(FutilityStyle::None)
}

pub fn query() -> DelayQuery {
    DelayQuery::new(DELAY, RecruitmentPattern::Uniform, T_MAX)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CaseStudyRow {
    pub family: String,
    pub stages: usize,
    /// Cumulative stage sizes rounded up to whole participants.
    pub n_stage: Vec<u64>,
    pub pipeline: Vec<f64>,
    pub ess: f64,
    pub ess_delay: f64,
    pub el: Option<f64>,
}

pub fn row(label: &str, design: &GroupSequentialDesign) -> Result<CaseStudyRow> {
    let a = assess(design, &query())?;
    Ok(CaseStudyRow {
        family: label.to_string(),
        stages: design.stages(),
        n_stage: round_for_report(design, Rounding::Total),
        pipeline: a.profile.pipeline,
        ess: design.ess(),
        ess_delay: a.ess_delay,
        el: a.el.value(),
    })
}

/// All twelve rows: each family for two to five stages.
pub fn case_study() -> Result<Vec<CaseStudyRow>> {
    let mut rows = Vec::new();
    for (label, family) in families() {
        for k in 2..=5 {
            let d = build_design(&spec(family, k))?;
            rows.push(row(label, &d)?);
        }
    }
    Ok(rows)
}

pub fn write_csv<W: Write>(rows: &[CaseStudyRow], mut out: W) -> Result<()> {
    writeln!(
        out,
        "# tau: {:.8}; alpha: {ALPHA}; beta: {BETA}; t_max: {T_MAX}; m: {DELAY}; n_single: {SINGLE_STAGE}",
        calibrated_tau()
    )?;
    let width = rows.iter().map(|r| r.stages).max().unwrap_or(0);
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["family".to_string(), "stages".to_string()];
    header.extend((1..=width).map(|k| format!("n_{k}")));
    header.extend((1..=width).map(|k| format!("ntilde_{k}")));
    header.extend(["ess", "ess_delay", "el"].map(String::from));
    w.write_record(&header)?;
    for r in rows {
        let mut rec = vec![r.family.clone(), r.stages.to_string()];
        rec.extend((0..width).map(|k| r.n_stage.get(k).map(u64::to_string).unwrap_or_default()));
        rec.extend((0..width).map(|k| {
            r.pipeline
                .get(k)
                .map(|v| format!("{v:.2}"))
                .unwrap_or_default()
        }));
        rec.push(format!("{:.2}", r.ess));
        rec.push(format!("{:.2}", r.ess_delay));
        rec.push(
            r.el.map(|v| format!("{v:.2}"))
                .unwrap_or_else(|| "NA".into()),
        );
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

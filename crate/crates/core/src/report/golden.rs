//! Published reference tables and their reproduction.
//!
//! Each fixture row is one printed cell, tagged with the table it came from.
//! The supplementary mixed-recruitment and unequal-spacing tables are
//! captioned with α = 0.025, but their values belong to the α = 0.05 design,
//! so every supplementary table is evaluated at α = 0.05.

use std::collections::HashMap;

use serde::Serialize;

use crate::delay::{assess, DelayQuery};
use crate::design::{build_design, round_for_report, DesignSpec, GroupSequentialDesign, Rounding};
use crate::error::{Error, Result};
use crate::recruitment::RecruitmentPattern;
use crate::report::case_study;

const SUPPLEMENT_T_MAX: f64 = 24.0;

/// Fixture id and its CSV text.
pub const FIXTURES: [(&str, &str); 9] = [
    ("S1", include_str!("../../data/golden/s1_uniform.csv")),
    ("S2", include_str!("../../data/golden/s2_linear.csv")),
    ("S3", include_str!("../../data/golden/s3_mixed_k2.csv")),
    ("S4", include_str!("../../data/golden/s4_mixed_k3.csv")),
    ("S5", include_str!("../../data/golden/s5_mixed_k4.csv")),
    ("S6", include_str!("../../data/golden/s6_mixed_k5.csv")),
    ("S7", include_str!("../../data/golden/s7_spacing_k3.csv")),
    ("S8", include_str!("../../data/golden/s8_spacing_k4.csv")),
    ("T2", include_str!("../../data/golden/t2_case_study.csv")),
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Quantity {
    NMax,
    Ess,
    EssDelay,
    Pipeline,
    El,
    /// Rounded cumulative stage size.
    NStage,
}

impl std::str::FromStr for Quantity {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "n_max" => Quantity::NMax,
            "ess" => Quantity::Ess,
            "ess_delay" => Quantity::EssDelay,
            "pipeline" => Quantity::Pipeline,
            "el" => Quantity::El,
            "n_stage" => Quantity::NStage,
            _ => return Err(Error::invalid(format!("unknown quantity '{s}'"))),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GoldenCell {
    pub source: String,
    pub pattern: String,
    pub l: Option<f64>,
    pub spacing: String,
    pub stages: usize,
    pub m: Option<f64>,
    pub quantity: Quantity,
    /// 1-based stage for per-stage quantities.
    pub stage: Option<usize>,
    pub value: f64,
}

impl GoldenCell {
    pub fn label(&self) -> String {
        let mut s = format!("{} K={} {}", self.source, self.stages, self.spacing);
        if self.pattern != "uniform" {
            s.push_str(&format!(" {}", self.pattern));
        }
        if let Some(l) = self.l {
            s.push_str(&format!(" l={l}"));
        }
        if let Some(m) = self.m {
            s.push_str(&format!(" m={m}"));
        }
        s.push_str(&format!(" {:?}", self.quantity));
        if let Some(k) = self.stage {
            s.push_str(&format!("[{k}]"));
        }
        s
    }
}

pub fn load(id: &str) -> Result<Vec<GoldenCell>> {
    let text = FIXTURES
        .iter()
        .find(|(k, _)| *k == id)
        .map(|(_, t)| *t)
        .ok_or_else(|| Error::invalid(format!("unknown golden table '{id}'")))?;
    parse_cells(text)
}

fn parse_cells(text: &str) -> Result<Vec<GoldenCell>> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let line = rec.position().map(|p| p.line() as usize);
        let bad = |what: &str| Error::config(line, format!("golden fixture: bad {what}"));
        let opt = |s: &str| -> Result<Option<f64>> {
            if s.is_empty() {
                Ok(None)
            } else {
                s.parse().map(Some).map_err(|_| bad("number"))
            }
        };
        out.push(GoldenCell {
            source: rec[0].to_string(),
            pattern: rec[1].to_string(),
            l: opt(&rec[2])?,
            spacing: rec[3].to_string(),
            stages: rec[4].parse().map_err(|_| bad("stages"))?,
            m: opt(&rec[5])?,
            quantity: rec[6].parse()?,
            stage: if rec[7].is_empty() {
                None
            } else {
                Some(rec[7].parse().map_err(|_| bad("stage"))?)
            },
            value: rec[8].parse().map_err(|_| bad("value"))?,
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", content = "bound", rename_all = "snake_case")]
pub enum Tolerance {
    Absolute(f64),
    /// Fraction of the published value.
    Relative(f64),
}

impl Tolerance {
    pub fn admits(&self, published: f64, computed: f64) -> bool {
        // Slack for binary representation of two-decimal published values.
        let diff = (published - computed).abs() - 1e-9;
        match *self {
            Tolerance::Absolute(t) => diff <= t,
            Tolerance::Relative(t) => diff <= t * published.abs(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellCheck {
    pub cell: GoldenCell,
    pub computed: f64,
    pub tolerance: Tolerance,
    /// Informational cells are reported but do not decide the table's verdict.
    pub gating: bool,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TableCheck {
    pub id: String,
    pub checks: Vec<CellCheck>,
    pub notes: Vec<String>,
}

impl TableCheck {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass || !c.gating)
    }

    pub fn failures(&self) -> impl Iterator<Item = &CellCheck> {
        self.checks.iter().filter(|c| c.gating && !c.pass)
    }

    pub fn gating_count(&self) -> usize {
        self.checks.iter().filter(|c| c.gating).count()
    }
}

/// Information fractions behind the spacing labels of the supplementary tables.
pub fn spacing_fractions(label: &str, stages: usize) -> Result<Vec<f64>> {
    Ok(match (label, stages) {
        ("I", k) => crate::boundaries::equal_fractions(k),
        ("II", 3) => vec![0.25, 0.5, 1.0],
        ("III", 3) => vec![0.5, 0.75, 1.0],
        ("IV", 3) => vec![0.6, 0.9, 1.0],
        ("II", 4) => vec![0.2, 0.4, 0.6, 1.0],
        ("III", 4) => vec![0.4, 0.6, 0.8, 1.0],
        _ => {
            return Err(Error::invalid(format!(
                "unknown spacing '{label}' for {stages} stages"
            )))
        }
    })
}

fn is_mixed(id: &str) -> bool {
    matches!(id, "S3" | "S4" | "S5" | "S6")
}

fn design_for(cell: &GoldenCell) -> Result<DesignSpec> {
    if cell.source == "T2" {
        let family = case_study::families()
            .into_iter()
            .find(|(l, _)| *l == cell.spacing)
            .map(|(_, f)| f)
            .ok_or_else(|| Error::invalid(format!("unknown family '{}'", cell.spacing)))?;
        return Ok(case_study::spec(family, cell.stages));
    }
    Ok(DesignSpec::new(cell.stages).rho(spacing_fractions(&cell.spacing, cell.stages)?))
}

fn query_for(cell: &GoldenCell, m: f64) -> Result<DelayQuery> {
    if cell.source == "T2" {
        return Ok(DelayQuery::new(
            m,
            RecruitmentPattern::Uniform,
            case_study::T_MAX,
        ));
    }
    let pattern = match (cell.pattern.as_str(), cell.l) {
        ("uniform", _) => RecruitmentPattern::Uniform,
        ("linear", _) => RecruitmentPattern::linear(),
        ("mixed", Some(l)) => RecruitmentPattern::Mixed { l },
        _ => {
            return Err(Error::invalid(format!(
                "cell '{}' has no recruitment pattern",
                cell.label()
            )))
        }
    };
    Ok(DelayQuery::new(m, pattern, SUPPLEMENT_T_MAX))
}

/// Tolerance and gating for a cell, plus whether it sits on the plateau where
/// recruitment has finished before any interim outcome is observed.
fn rule(id: &str, q: Quantity, plateau: bool) -> (Tolerance, bool) {
    match id {
        "T2" => match q {
            Quantity::NStage => (Tolerance::Absolute(1.0), true),
            Quantity::El => (Tolerance::Absolute(1.5), true),
            _ => (Tolerance::Absolute(0.3), false),
        },
        _ if is_mixed(id) => match q {
            Quantity::El if plateau => (Tolerance::Absolute(1.0), true),
            Quantity::El => (Tolerance::Relative(0.03), true),
            _ => (Tolerance::Relative(0.03), false),
        },
        _ => match q {
            Quantity::El => (Tolerance::Absolute(1.0), true),
            _ => (Tolerance::Absolute(0.3), true),
        },
    }
}

struct Evaluated {
    design: GroupSequentialDesign,
    by_query: HashMap<String, crate::delay::DelayAssessment>,
}

pub fn verify(id: &str) -> Result<TableCheck> {
    let cells = load(id)?;
    let mut designs: HashMap<(String, usize), Evaluated> = HashMap::new();
    let mut checks = Vec::with_capacity(cells.len());
    for cell in cells {
        let key = (cell.spacing.clone(), cell.stages);
        if !designs.contains_key(&key) {
            let design = build_design(&design_for(&cell)?)?;
            designs.insert(
                key.clone(),
                Evaluated {
                    design,
                    by_query: HashMap::new(),
                },
            );
        }
        let ev = designs.get_mut(&key).expect("inserted above");
        let stage = |k: Option<usize>| -> Result<usize> {
            k.filter(|&k| k >= 1)
                .map(|k| k - 1)
                .ok_or_else(|| Error::invalid(format!("{}: missing stage", cell.label())))
        };
        let mut plateau = false;
        let computed = match cell.quantity {
            Quantity::NMax => ev.design.max_n(),
            Quantity::Ess => ev.design.ess(),
            Quantity::NStage => {
                let k = stage(cell.stage)?;
                round_for_report(&ev.design, Rounding::Total)
                    .get(k)
                    .copied()
                    .map(|v| v as f64)
                    .unwrap_or(f64::NAN)
            }
            Quantity::EssDelay | Quantity::Pipeline | Quantity::El => {
                let m = cell
                    .m
                    .ok_or_else(|| Error::invalid(format!("{}: missing m", cell.label())))?;
                let q = query_for(&cell, m)?;
                let qkey = format!("{:?}", q);
                if !ev.by_query.contains_key(&qkey) {
                    let a = assess(&ev.design, &q)?;
                    ev.by_query.insert(qkey.clone(), a);
                }
                let a = &ev.by_query[&qkey];
                plateau = (a.ess_delay - ev.design.max_n()).abs() < 1e-9;
                match cell.quantity {
                    Quantity::EssDelay => a.ess_delay,
                    Quantity::El => a.el.value().unwrap_or(f64::NAN),
                    _ => a
                        .profile
                        .pipeline
                        .get(stage(cell.stage)?)
                        .copied()
                        .unwrap_or(f64::NAN),
                }
            }
        };
        let (tolerance, gating) = rule(id, cell.quantity, plateau);
        let pass = computed.is_finite() && tolerance.admits(cell.value, computed);
        checks.push(CellCheck {
            cell,
            computed,
            tolerance,
            gating,
            pass,
        });
    }
    Ok(TableCheck {
        id: id.to_string(),
        checks,
        notes: notes(id),
    })
}

fn notes(id: &str) -> Vec<String> {
    let mut n = Vec::new();
    if matches!(id, "S3" | "S4" | "S5" | "S6" | "S7" | "S8") {
        n.push(
            "caption states alpha = 0.025; values match the alpha = 0.05 design, evaluated at 0.05"
                .into(),
        );
    }
    if is_mixed(id) {
        n.push("mixed-recruitment cells use the stated closed-form pipeline counts; published values follow an unstated discretization".into());
    }
    if id == "S5" {
        n.push("published four-stage mixed table repeats the three-stage values".into());
    }
    if id == "T2" {
        n.push(format!(
            "tau calibrated to a single-stage size of {}; no futility stopping",
            case_study::SINGLE_STAGE
        ));
    }
    n
}

pub fn verify_all() -> Result<Vec<TableCheck>> {
    FIXTURES.iter().map(|(id, _)| verify(id)).collect()
}

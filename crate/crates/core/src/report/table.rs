//! Sweep result tables and their CSV/JSON encodings.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::delay::{DelayAssessment, DelayQuery, EfficiencyLoss};
use crate::design::GroupSequentialDesign;
use crate::error::{Error, Result};

/// Pipeline columns carried by every row; designs with more stages cannot be tabulated.
pub const MAX_PIPELINE_COLUMNS: usize = 5;
pub const SCHEMA_VERSION: u32 = 1;

const FIXED_HEAD: [&str; 8] = [
    "stages",
    "pattern",
    "l",
    "spacing",
    "m",
    "n_max",
    "ess",
    "ess_delay",
];
const FIXED_TAIL: [&str; 5] = ["eg_percent", "eg_delay_percent", "el", "et", "et_single"];

/// One grid point of a sweep. EG values are stored as percentages.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub stages: usize,
    pub pattern: String,
    pub l: Option<f64>,
    pub spacing: String,
    pub m: f64,
    pub n_max: f64,
    pub ess: f64,
    pub ess_delay: f64,
    pub pipeline: Vec<f64>,
    pub eg_percent: f64,
    pub eg_delay_percent: f64,
    /// `None` when the design has no efficiency gain.
    pub el: Option<f64>,
    pub et: f64,
    pub et_single: f64,
}

impl ResultRow {
    pub fn from_assessment(
        design: &GroupSequentialDesign,
        spacing: &str,
        query: &DelayQuery,
        a: &DelayAssessment,
    ) -> Result<Self> {
        if design.stages() > MAX_PIPELINE_COLUMNS {
            return Err(Error::invalid(format!(
                "result tables hold at most {MAX_PIPELINE_COLUMNS} stages, got {}",
                design.stages()
            )));
        }
        Ok(Self {
            stages: design.stages(),
            pattern: query.pattern.name().to_string(),
            l: query.pattern.ramp_fraction(),
            spacing: spacing.to_string(),
            m: query.delay,
            n_max: design.max_n(),
            ess: design.ess(),
            ess_delay: a.ess_delay,
            pipeline: a.profile.pipeline.clone(),
            eg_percent: 100.0 * a.eg,
            eg_delay_percent: 100.0 * a.eg_delay,
            el: match a.el {
                EfficiencyLoss::Percent(v) => Some(v),
                EfficiencyLoss::NoGain => None,
            },
            et: a.time.et,
            et_single: a.time.et_single,
        })
    }

    /// The row as it appears once written, every value at two decimals.
    pub fn rounded(&self) -> Self {
        Self {
            l: self.l.map(round2),
            m: round2(self.m),
            n_max: round2(self.n_max),
            ess: round2(self.ess),
            ess_delay: round2(self.ess_delay),
            pipeline: self.pipeline.iter().copied().map(round2).collect(),
            eg_percent: round2(self.eg_percent),
            eg_delay_percent: round2(self.eg_delay_percent),
            el: self.el.map(round2),
            et: round2(self.et),
            et_single: round2(self.et_single),
            ..self.clone()
        }
    }
}

/// Rows plus free-text provenance lines written as `#` comments.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ResultTable {
    pub schema: u32,
    pub provenance: Vec<String>,
    pub rows: Vec<ResultRow>,
}

fn round2(x: f64) -> f64 {
    let r = (x * 100.0).round() / 100.0;
    if r == 0.0 {
        0.0
    } else {
        r
    }
}

fn fmt2(x: f64) -> String {
    format!("{:.2}", round2(x))
}

fn header() -> Vec<String> {
    let mut h: Vec<String> = FIXED_HEAD.iter().map(|s| s.to_string()).collect();
    h.extend((1..=MAX_PIPELINE_COLUMNS).map(|k| format!("ntilde_{k}")));
    h.extend(FIXED_TAIL.iter().map(|s| s.to_string()));
    h
}

impl ResultTable {
    pub fn new(provenance: Vec<String>, rows: Vec<ResultRow>) -> Self {
        Self {
            schema: SCHEMA_VERSION,
            provenance,
            rows,
        }
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "# schema: {}", self.schema)?;
        for line in &self.provenance {
            for part in line.lines() {
                writeln!(out, "# {part}")?;
            }
        }
        let mut w = csv::Writer::from_writer(out);
        w.write_record(header())?;
        for row in &self.rows {
            if row.pipeline.len() > MAX_PIPELINE_COLUMNS {
                return Err(Error::DimensionMismatch {
                    expected: MAX_PIPELINE_COLUMNS,
                    found: row.pipeline.len(),
                });
            }
            let mut rec = vec![
                row.stages.to_string(),
                row.pattern.clone(),
                row.l.map(fmt2).unwrap_or_default(),
                row.spacing.clone(),
                fmt2(row.m),
                fmt2(row.n_max),
                fmt2(row.ess),
                fmt2(row.ess_delay),
            ];
            for k in 0..MAX_PIPELINE_COLUMNS {
                rec.push(row.pipeline.get(k).copied().map(fmt2).unwrap_or_default());
            }
            rec.extend([
                fmt2(row.eg_percent),
                fmt2(row.eg_delay_percent),
                row.el.map(fmt2).unwrap_or_else(|| "NA".into()),
                fmt2(row.et),
                fmt2(row.et_single),
            ]);
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        Ok(String::from_utf8(buf).expect("csv output is utf-8"))
    }

    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut text = String::new();
        let mut input = input;
        input.read_to_string(&mut text)?;
        let mut schema = None;
        let mut provenance = Vec::new();
        for line in text.lines().take_while(|l| l.starts_with('#')) {
            let body = line.strip_prefix("# ").unwrap_or(&line[1..]);
            match body.strip_prefix("schema: ") {
                Some(v) if schema.is_none() => {
                    schema = Some(
                        v.trim()
                            .parse::<u32>()
                            .map_err(|_| Error::config(None, "bad schema line"))?,
                    )
                }
                _ => provenance.push(body.to_string()),
            }
        }
        let schema = schema.ok_or_else(|| Error::config(None, "missing schema line"))?;
        if schema != SCHEMA_VERSION {
            return Err(Error::config(
                None,
                format!("unsupported schema version {schema}"),
            ));
        }

        let mut r = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .from_reader(text.as_bytes());
        let expected = header();
        if r.headers()?.iter().ne(expected.iter().map(String::as_str)) {
            return Err(Error::config(Some(1), "unexpected header"));
        }
        let mut rows = Vec::new();
        for rec in r.records() {
            let rec = rec?;
            let line = rec.position().map(|p| p.line() as usize);
            let num = |i: usize| -> Result<f64> {
                rec[i].parse::<f64>().map_err(|_| {
                    Error::config(line, format!("column {} is not a number", expected[i]))
                })
            };
            let opt = |i: usize| -> Result<Option<f64>> {
                match &rec[i] {
                    "" | "NA" => Ok(None),
                    _ => num(i).map(Some),
                }
            };
            let stages: usize = rec[0]
                .parse()
                .map_err(|_| Error::config(line, "stages is not an integer"))?;
            let head = FIXED_HEAD.len();
            let mut pipeline = Vec::new();
            for k in 0..MAX_PIPELINE_COLUMNS {
                if let Some(v) = opt(head + k)? {
                    pipeline.push(v);
                }
            }
            let tail = head + MAX_PIPELINE_COLUMNS;
            rows.push(ResultRow {
                stages,
                pattern: rec[1].to_string(),
                l: opt(2)?,
                spacing: rec[3].to_string(),
                m: num(4)?,
                n_max: num(5)?,
                ess: num(6)?,
                ess_delay: num(7)?,
                pipeline,
                eg_percent: num(tail)?,
                eg_delay_percent: num(tail + 1)?,
                el: opt(tail + 2)?,
                et: num(tail + 3)?,
                et_single: num(tail + 4)?,
            });
        }
        Ok(Self {
            schema,
            provenance,
            rows,
        })
    }

    /// JSON mirror of the CSV: same values, one object per row.
    pub fn write_json<W: Write>(&self, out: W) -> Result<()> {
        let mirrored = Self {
            rows: self.rows.iter().map(ResultRow::rounded).collect(),
            ..self.clone()
        };
        serde_json::to_writer_pretty(out, &mirrored)?;
        Ok(())
    }

    pub fn read_json<R: Read>(input: R) -> Result<Self> {
        Ok(serde_json::from_reader(input)?)
    }
}

//! Scenario files: sectioned `key = value` text describing a sweep grid.
//!
//! ```text
//! [design]
//! alpha = 0.05
//! stages = 2, 3
//! family = wang-tsiatis
//! delta = 0.25
//!
//! [spacings]
//! IV = 0.6, 0.9, 1
//!
//! [recruitment]
//! pattern = uniform, mixed
//! l = 0.2, 0.4
//! t_max = 24
//!
//! [delay]
//! m = 3, 6, 9
//! ```

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::boundaries::{equal_fractions, validate_fractions, BoundaryFamily, FutilityStyle};
use crate::delay::DelayQuery;
use crate::design::DesignSpec;
use crate::error::{Error, Result};
use crate::recruitment::RecruitmentPattern;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

impl std::str::FromStr for OutputFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            _ => Err(Error::invalid(format!("unknown output format '{s}'"))),
        }
    }
}

/// A labelled design: the base spec with its stage count and fractions filled in.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridDesign {
    pub spacing: String,
    pub spec: DesignSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Scenario {
    pub designs: Vec<GridDesign>,
    pub patterns: Vec<RecruitmentPattern>,
    pub t_max: f64,
    pub delays: Vec<f64>,
    pub interim_overhead: f64,
    pub format: Option<OutputFormat>,
    pub path: Option<PathBuf>,
}

impl Scenario {
    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| {
            Error::config(
                None,
                format!("cannot read scenario {}: {e}", path.display()),
            )
        })?;
        parse(&text)
    }

    /// Delay queries in grid order: pattern outermost, then `m`.
    pub fn queries(&self) -> Vec<DelayQuery> {
        self.patterns
            .iter()
            .flat_map(|&p| {
                self.delays.iter().map(move |&m| {
                    DelayQuery::new(m, p, self.t_max).with_interim_overhead(self.interim_overhead)
                })
            })
            .collect()
    }
}

impl std::str::FromStr for Scenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        parse(s)
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Section {
    Design,
    Spacings,
    Recruitment,
    Delay,
    Output,
}

const DESIGN_KEYS: &[&str] = &[
    "alpha",
    "beta",
    "tau",
    "mu",
    "sigma0_sq",
    "sigma1_sq",
    "allocation",
    "stages",
    "rho",
    "family",
    "delta",
    "gamma",
    "futility",
];
const RECRUITMENT_KEYS: &[&str] = &["pattern", "t_max", "l"];
const DELAY_KEYS: &[&str] = &["m", "m_interim"];
const OUTPUT_KEYS: &[&str] = &["format", "path"];

struct Entry {
    line: usize,
    value: String,
}

#[derive(Default)]
struct Raw {
    design: Vec<(String, Entry)>,
    spacings: Vec<(String, Entry)>,
    recruitment: Vec<(String, Entry)>,
    delay: Vec<(String, Entry)>,
    output: Vec<(String, Entry)>,
}

impl Raw {
    fn section(&mut self, s: Section) -> &mut Vec<(String, Entry)> {
        match s {
            Section::Design => &mut self.design,
            Section::Spacings => &mut self.spacings,
            Section::Recruitment => &mut self.recruitment,
            Section::Delay => &mut self.delay,
            Section::Output => &mut self.output,
        }
    }
}

fn get<'a>(entries: &'a [(String, Entry)], key: &str) -> Option<&'a Entry> {
    entries.iter().find(|(k, _)| k == key).map(|(_, e)| e)
}

fn number(e: &Entry, key: &str) -> Result<f64> {
    parse_number(e.value.trim()).ok_or_else(|| {
        Error::config(
            Some(e.line),
            format!("{key}: '{}' is not a number", e.value),
        )
    })
}

/// Accepts decimals and simple fractions such as `1/3`.
fn parse_number(s: &str) -> Option<f64> {
    let v = match s.split_once('/') {
        Some((a, b)) => a.trim().parse::<f64>().ok()? / b.trim().parse::<f64>().ok()?,
        None => s.parse::<f64>().ok()?,
    };
    v.is_finite().then_some(v)
}

fn numbers(e: &Entry, key: &str) -> Result<Vec<f64>> {
    e.value
        .split(',')
        .map(|s| {
            parse_number(s.trim()).ok_or_else(|| {
                Error::config(
                    Some(e.line),
                    format!("{key}: '{}' is not a number", s.trim()),
                )
            })
        })
        .collect()
}

fn check(ok: bool, e: &Entry, msg: impl FnOnce() -> String) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::config(Some(e.line), msg()))
    }
}

fn open_unit(e: &Entry, key: &str) -> Result<f64> {
    let v = number(e, key)?;
    check(v > 0.0 && v < 1.0, e, || {
        format!("{key} must lie in (0, 1), got {v}")
    })?;
    Ok(v)
}

fn positive(e: &Entry, key: &str) -> Result<f64> {
    let v = number(e, key)?;
    check(v > 0.0, e, || format!("{key} must be positive, got {v}"))?;
    Ok(v)
}

pub fn parse(text: &str) -> Result<Scenario> {
    let mut raw = Raw::default();
    let mut section = None;
    let mut seen_sections = BTreeSet::new();
    for (idx, full) in text.lines().enumerate() {
        let line = idx + 1;
        let content = full.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        if let Some(name) = content.strip_prefix('[').and_then(|s| s.strip_suffix(']')) {
            let s = match name.trim() {
                "design" => Section::Design,
                "spacings" => Section::Spacings,
                "recruitment" => Section::Recruitment,
                "delay" => Section::Delay,
                "output" => Section::Output,
                other => {
                    return Err(Error::config(
                        Some(line),
                        format!("unknown section [{other}]"),
                    ))
                }
            };
            if !seen_sections.insert(name.trim().to_string()) {
                return Err(Error::config(
                    Some(line),
                    format!("section [{}] repeated", name.trim()),
                ));
            }
            section = Some(s);
            continue;
        }
        let Some((key, value)) = content.split_once('=') else {
            return Err(Error::config(
                Some(line),
                format!("expected 'key = value', got '{content}'"),
            ));
        };
        let key = key.trim().to_string();
        let Some(s) = section else {
            return Err(Error::config(Some(line), "key outside of any section"));
        };
        let allowed = match s {
            Section::Design => Some(DESIGN_KEYS),
            Section::Recruitment => Some(RECRUITMENT_KEYS),
            Section::Delay => Some(DELAY_KEYS),
            Section::Output => Some(OUTPUT_KEYS),
            Section::Spacings => None,
        };
        if let Some(keys) = allowed {
            if !keys.contains(&key.as_str()) {
                return Err(Error::config(Some(line), format!("unknown key '{key}'")));
            }
        } else if key.is_empty() {
            return Err(Error::config(Some(line), "empty spacing label"));
        }
        let entries = raw.section(s);
        if entries.iter().any(|(k, _)| *k == key) {
            return Err(Error::config(Some(line), format!("duplicate key '{key}'")));
        }
        entries.push((
            key,
            Entry {
                line,
                value: value.trim().to_string(),
            },
        ));
    }
    build(&raw)
}

fn build(raw: &Raw) -> Result<Scenario> {
    let d = &raw.design;
    let mut base = DesignSpec::new(1);
    if let Some(e) = get(d, "alpha") {
        base.alpha = open_unit(e, "alpha")?;
    }
    if let Some(e) = get(d, "beta") {
        base.beta = open_unit(e, "beta")?;
    }
    if let Some(e) = get(d, "tau") {
        base.tau = positive(e, "tau")?;
    }
    if let Some(e) = get(d, "mu") {
        base.mu_eval = Some(number(e, "mu")?);
    }
    if let Some(e) = get(d, "sigma0_sq") {
        base.sigma0_sq = positive(e, "sigma0_sq")?;
    }
    if let Some(e) = get(d, "sigma1_sq") {
        base.sigma1_sq = positive(e, "sigma1_sq")?;
    }
    if let Some(e) = get(d, "allocation") {
        base.allocation = positive(e, "allocation")?;
    }
    base.futility = match get(d, "futility") {
        None => FutilityStyle::BindingZero,
        Some(e) => match e.value.as_str() {
            "binding-zero" => FutilityStyle::BindingZero,
            "symmetric" => FutilityStyle::Symmetric,
            "none" => FutilityStyle::None,
            other => {
                return Err(Error::config(
                    Some(e.line),
                    format!("unknown futility style '{other}'"),
                ))
            }
        },
    };
    base.family = family(d)?;

    let designs = grid_designs(raw, &base)?;
    for g in &designs {
        g.spec.validate()?;
    }

    let r = &raw.recruitment;
    let t_max = match get(r, "t_max") {
        Some(e) => positive(e, "t_max")?,
        None => 24.0,
    };
    let ls = match get(r, "l") {
        Some(e) => {
            let ls = numbers(e, "l")?;
            for &l in &ls {
                check(l > 0.0 && l <= 1.0, e, || {
                    format!("l must lie in (0, 1], got {l}")
                })?;
            }
            Some((e, ls))
        }
        None => None,
    };
    let mut patterns = Vec::new();
    let pattern_names = get(r, "pattern").map(|e| (e.line, e.value.clone()));
    let (pline, pvalue) = pattern_names.unwrap_or((0, "uniform".into()));
    let mut used_l = false;
    for name in pvalue.split(',').map(str::trim) {
        match name {
            "uniform" => patterns.push(RecruitmentPattern::Uniform),
            "linear" => patterns.push(RecruitmentPattern::linear()),
            "mixed" => {
                let Some((_, ls)) = &ls else {
                    return Err(Error::config(
                        Some(pline),
                        "mixed recruitment needs an 'l' list",
                    ));
                };
                used_l = true;
                patterns.extend(ls.iter().map(|&l| RecruitmentPattern::Mixed { l }));
            }
            other => {
                return Err(Error::config(
                    Some(pline),
                    format!("unknown recruitment pattern '{other}'"),
                ))
            }
        }
    }
    if let (Some((e, _)), false) = (&ls, used_l) {
        return Err(Error::config(
            Some(e.line),
            "'l' given without a mixed pattern",
        ));
    }

    let dl = &raw.delay;
    let delays = match get(dl, "m") {
        Some(e) => {
            let ms = numbers(e, "m")?;
            for &m in &ms {
                check(m >= 0.0, e, || format!("m must be non-negative, got {m}"))?;
            }
            ms
        }
        None => vec![0.0],
    };
    let interim_overhead = match get(dl, "m_interim") {
        Some(e) => {
            let v = number(e, "m_interim")?;
            check(v >= 0.0, e, || {
                format!("m_interim must be non-negative, got {v}")
            })?;
            v
        }
        None => 0.0,
    };

    let o = &raw.output;
    let format = match get(o, "format") {
        Some(e) => Some(
            e.value
                .parse()
                .map_err(|err: Error| Error::config(Some(e.line), err.to_string()))?,
        ),
        None => None,
    };
    let path = get(o, "path").map(|e| PathBuf::from(&e.value));

    Ok(Scenario {
        designs,
        patterns,
        t_max,
        delays,
        interim_overhead,
        format,
        path,
    })
}

fn family(d: &[(String, Entry)]) -> Result<BoundaryFamily> {
    let delta = get(d, "delta");
    let gamma = get(d, "gamma");
    let name = get(d, "family");
    let label = name.map(|e| e.value.as_str()).unwrap_or("wang-tsiatis");
    let line = name.map(|e| e.line);
    let stray = |e: Option<&Entry>, key: &str| -> Result<()> {
        match e {
            Some(e) => Err(Error::config(
                Some(e.line),
                format!("'{key}' does not apply to family '{label}'"),
            )),
            None => Ok(()),
        }
    };
    match label {
        "wang-tsiatis" => {
            stray(gamma, "gamma")?;
            let delta = match delta {
                Some(e) => {
                    let v = number(e, "delta")?;
                    check((0.0..=1.0).contains(&v), e, || {
                        format!("delta must lie in [0, 1], got {v}")
                    })?;
                    v
                }
                None => 0.25,
            };
            Ok(BoundaryFamily::WangTsiatis { delta })
        }
        "pocock" | "obrien-fleming" => {
            stray(delta, "delta")?;
            stray(gamma, "gamma")?;
            Ok(if label == "pocock" {
                BoundaryFamily::pocock()
            } else {
                BoundaryFamily::obrien_fleming()
            })
        }
        "hsd" => {
            stray(delta, "delta")?;
            let gamma = match gamma {
                Some(e) => number(e, "gamma")?,
                None => -4.0,
            };
            Ok(BoundaryFamily::HwangShihDeCani { gamma })
        }
        other => Err(Error::config(
            line,
            format!("unknown boundary family '{other}'"),
        )),
    }
}

fn grid_designs(raw: &Raw, base: &DesignSpec) -> Result<Vec<GridDesign>> {
    let d = &raw.design;
    let stages = match get(d, "stages") {
        Some(e) => {
            let ks = numbers(e, "stages")?;
            let mut out = Vec::new();
            for k in ks {
                check(k >= 1.0 && k.fract() == 0.0 && k <= 20.0, e, || {
                    format!("stages must be an integer in 1..=20, got {k}")
                })?;
                out.push(k as usize);
            }
            Some((e, out))
        }
        None => None,
    };
    let mut designs = Vec::new();
    let mut push = |label: String, rho: Vec<f64>| {
        let spec = DesignSpec {
            rho,
            ..base.clone()
        };
        designs.push(GridDesign {
            spacing: label,
            spec,
        });
    };

    let rho = get(d, "rho");
    if let (Some(e), false) = (rho, raw.spacings.is_empty()) {
        return Err(Error::config(
            Some(e.line),
            "use either 'rho' or a [spacings] section, not both",
        ));
    }
    let explicit: Vec<(String, &Entry)> = match rho {
        Some(e) => vec![("custom".to_string(), e)],
        None => raw.spacings.iter().map(|(k, e)| (k.clone(), e)).collect(),
    };
    if explicit.is_empty() {
        let ks = stages.map(|(_, ks)| ks).unwrap_or_else(|| vec![2]);
        for k in ks {
            push("I".into(), equal_fractions(k));
        }
    } else {
        for (label, e) in explicit {
            let fr = numbers(e, &label)?;
            validate_fractions(&fr).map_err(|err| Error::config(Some(e.line), err.to_string()))?;
            if let Some((se, ks)) = &stages {
                check(ks.contains(&fr.len()), se, || {
                    format!(
                        "spacing '{label}' has {} stages, not listed in 'stages'",
                        fr.len()
                    )
                })?;
            }
            push(label, fr);
        }
    }
    Ok(designs)
}

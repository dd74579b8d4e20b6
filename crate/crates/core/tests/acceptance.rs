//! One PASS/FAIL line per acceptance criterion.
//!
//! Criterion 3 cannot be met against the published mixed-recruitment tables
//! (the four-stage table repeats the three-stage values, and several other
//! cells disagree with the stated pipeline formulas). It is evaluated
//! faithfully and listed in `KNOWN_UNATTAINABLE`; the target fails if any
//! other criterion fails or if criterion 3 unexpectedly starts passing.

use std::time::Instant;

use gsdelay::boundaries::{BoundaryFamily, FutilityStyle};
use gsdelay::delay::{assess, expected_time, DelayQuery};
use gsdelay::design::{
    build_design, round_for_report, DesignSpec, GroupSequentialDesign, Rounding,
};
use gsdelay::mc::{simulate, SimConfig};
use gsdelay::recruitment::RecruitmentPattern;
use gsdelay::report::case_study;
use gsdelay::report::golden::{self, spacing_fractions, TableCheck};

const KNOWN_UNATTAINABLE: &[usize] = &[3];
const S1_DELAYS: [f64; 6] = [3.0, 6.0, 9.0, 12.0, 18.0, 24.0];

struct Verdict {
    pass: bool,
    detail: String,
}

fn tables(ids: &[&str]) -> Verdict {
    let checks: Vec<TableCheck> = ids
        .iter()
        .map(|id| golden::verify(id).expect("table evaluates"))
        .collect();
    let total: usize = checks.iter().map(TableCheck::gating_count).sum();
    let failures: Vec<String> = checks
        .iter()
        .flat_map(|t| t.failures())
        .map(|c| {
            format!(
                "{} published {} computed {:.2}",
                c.cell.label(),
                c.cell.value,
                c.computed
            )
        })
        .collect();
    let mut detail = format!(
        "{}/{} cells within tolerance",
        total - failures.len(),
        total
    );
    for f in failures.iter().take(8) {
        detail.push_str(&format!("\n      {f}"));
    }
    if failures.len() > 8 {
        detail.push_str(&format!("\n      ... {} more", failures.len() - 8));
    }
    Verdict {
        pass: failures.is_empty(),
        detail,
    }
}

fn s1_designs() -> Vec<GroupSequentialDesign> {
    (2..=5)
        .map(|k| build_design(&DesignSpec::new(k)).unwrap())
        .collect()
}

fn criterion_1() -> Verdict {
    let start = Instant::now();
    let mut v = tables(&["S1"]);
    let secs = start.elapsed().as_secs_f64();
    v.pass &= secs < 10.0;
    v.detail.push_str(&format!("; {secs:.2} s"));
    v
}

fn criterion_5() -> Verdict {
    let mut v = tables(&["T2"]);
    let rows = case_study::case_study().unwrap();
    let tau = case_study::calibrated_tau();
    v.pass &= rows.len() == 12 && (tau - 0.400).abs() <= 0.001;
    v.detail
        .push_str(&format!("; {} rows; tau {tau:.5}", rows.len()));
    v
}

fn criterion_6() -> Verdict {
    let spec = DesignSpec::new(3)
        .alpha(0.025)
        .beta(0.2)
        .tau(0.4)
        .family(BoundaryFamily::obrien_fleming())
        .futility(FutilityStyle::None);
    let d = build_design(&spec).unwrap();
    let stages = round_for_report(&d, Rounding::Total);
    let single = d.n_single().ceil();
    let pass = stages
        .iter()
        .zip([66.0, 134.0, 200.0])
        .all(|(&n, t)| (n as f64 - t).abs() <= 1.0)
        && (single - 196.0).abs() <= 1.0;
    Verdict {
        pass,
        detail: format!("stages {stages:?}, single stage {single}"),
    }
}

/// Every design built anywhere in the suite.
fn all_specs() -> Vec<DesignSpec> {
    let mut specs: Vec<DesignSpec> = (1..=5).map(DesignSpec::new).collect();
    for (label, k) in [("II", 3), ("III", 3), ("IV", 3), ("II", 4), ("III", 4)] {
        specs.push(DesignSpec::new(k).rho(spacing_fractions(label, k).unwrap()));
    }
    for (_, family) in case_study::families() {
        for k in 2..=5 {
            specs.push(case_study::spec(family, k));
        }
    }
    specs.push(
        DesignSpec::new(3)
            .alpha(0.025)
            .beta(0.2)
            .tau(0.4)
            .family(BoundaryFamily::obrien_fleming())
            .futility(FutilityStyle::None),
    );
    specs.push(hsd_spec());
    specs.push(DesignSpec::new(3).alpha(0.01).beta(0.2));
    specs.push(DesignSpec::new(4).futility(FutilityStyle::Symmetric));
    specs
}

fn hsd_spec() -> DesignSpec {
    DesignSpec::new(3)
        .rho(vec![0.6, 0.9, 1.0])
        .family(BoundaryFamily::HwangShihDeCani { gamma: -2.0 })
        .futility(FutilityStyle::Symmetric)
}

fn criterion_7() -> Verdict {
    let mut worst = (0.0f64, 0.0f64, 0.0f64);
    let specs = all_specs();
    for spec in &specs {
        let d = build_design(spec).unwrap();
        let null = d.exit_at(0.0).unwrap();
        let alt = d.exit_at(spec.tau).unwrap();
        worst.0 = worst.0.max((null.total_reject() - spec.alpha).abs());
        worst.1 = worst.1.max((alt.total_reject() - (1.0 - spec.beta)).abs());
        worst.2 = worst
            .2
            .max((null.total() - 1.0).abs())
            .max((alt.total() - 1.0).abs());
    }
    Verdict {
        pass: worst.0 <= 1e-6 && worst.1 <= 1e-6 && worst.2 <= 1e-8,
        detail: format!(
            "{} designs; max |level error| {:.1e}, |power error| {:.1e}, |conservation error| {:.1e}",
            specs.len(),
            worst.0,
            worst.1,
            worst.2
        ),
    }
}

fn criterion_8() -> Verdict {
    let d = build_design(&DesignSpec::new(3)).unwrap();
    let q = DelayQuery::new(6.0, RecruitmentPattern::Uniform, 24.0);
    let a = assess(&d, &q).unwrap();
    let mut misses = Vec::new();
    for (mu, label) in [(0.0, "null"), (d.spec().tau, "alternative")] {
        let r = simulate(&d, &SimConfig::new(1_000_000, 20_240_601).mu(mu).delay(q)).unwrap();
        let exit = d.exit_at(mu).unwrap();
        for k in 0..3 {
            if !r.accept[k].covers(exit.accept()[k], 3.0) {
                misses.push(format!("{label} E_{}", k + 1));
            }
            if !r.reject[k].covers(exit.reject()[k], 3.0) {
                misses.push(format!("{label} F_{}", k + 1));
            }
        }
        if mu != 0.0 {
            if !r.sample_size.covers(d.ess(), 3.0) {
                misses.push("ESS".into());
            }
            if !r.sample_size_delay.unwrap().covers(a.ess_delay, 3.0) {
                misses.push("ESS_delay".into());
            }
        }
    }
    let base = SimConfig::new(200_000, 99).delay(q);
    let one = simulate(&d, &base.clone().threads(1)).unwrap();
    let again = simulate(&d, &base.clone().threads(1)).unwrap();
    let many = simulate(&d, &base.threads(6)).unwrap();
    let deterministic = one == again && one == many;
    Verdict {
        pass: misses.is_empty() && deterministic,
        detail: format!(
            "outside 3 SE: {:?}; fixed-seed and thread-count invariant: {deterministic}",
            misses
        ),
    }
}

fn criterion_9() -> Verdict {
    let mut issues = Vec::new();
    let grid: Vec<f64> = (0..=48).map(|i| i as f64 * 0.5).collect();
    let patterns = [
        RecruitmentPattern::Uniform,
        RecruitmentPattern::linear(),
        RecruitmentPattern::Mixed { l: 0.4 },
    ];
    for d in s1_designs() {
        let k = d.stages();
        for pattern in patterns {
            let mut prev = -1.0;
            let mut reached_cap = false;
            for &m in &grid {
                let q = DelayQuery::new(m, pattern, 24.0);
                let a = assess(&d, &q).unwrap();
                let el = a.el.value().unwrap();
                if m == 0.0 && el != 0.0 {
                    issues.push(format!("K={k} {} EL(0) = {el}", pattern.name()));
                }
                if el < prev - 1e-12 {
                    issues.push(format!("K={k} {} EL decreases at m={m}", pattern.name()));
                }
                if reached_cap && el != prev {
                    issues.push(format!(
                        "K={k} {} EL moves after the plateau at m={m}",
                        pattern.name()
                    ));
                }
                reached_cap |= (a.ess_delay - d.max_n()).abs() < 1e-12;
                prev = el;
                if !(d.ess() <= a.ess_delay + 1e-12 && a.ess_delay <= d.max_n() + 1e-12) {
                    issues.push(format!("K={k} {} ESS ordering at m={m}", pattern.name()));
                }
                if a.profile.pipeline[k - 1] != 0.0 {
                    issues.push(format!("K={k} final pipeline nonzero"));
                }
                if pattern == RecruitmentPattern::Uniform {
                    let et = expected_time(&d, &q).unwrap();
                    let identity = m + 24.0 / d.max_n() * d.ess();
                    if (et.et - identity).abs() > 1e-9 {
                        issues.push(format!("K={k} ET identity off at m={m}"));
                    }
                    if et.et >= et.et_single {
                        issues.push(format!("K={k} ET >= ET_single at m={m}"));
                    }
                    for c in [0.5, 2.0, 3.7] {
                        let scaled =
                            assess(&d, &DelayQuery::new(c * m, pattern, c * 24.0)).unwrap();
                        if (scaled.el.value().unwrap() - el).abs() > 1e-9 {
                            issues.push(format!("K={k} EL not scale invariant at m={m}, c={c}"));
                        }
                    }
                }
            }
        }
    }
    Verdict {
        pass: issues.is_empty(),
        detail: if issues.is_empty() {
            format!(
                "{} designs x {} delays x {} patterns",
                4,
                grid.len(),
                patterns.len()
            )
        } else {
            issues.join("; ")
        },
    }
}

fn el(d: &GroupSequentialDesign, m: f64, pattern: RecruitmentPattern) -> f64 {
    assess(d, &DelayQuery::new(m, pattern, 24.0))
        .unwrap()
        .el
        .value()
        .unwrap()
}

fn criterion_10() -> Verdict {
    let mut issues = Vec::new();
    for d in s1_designs() {
        let k = d.stages();
        for m in S1_DELAYS {
            if m <= 12.0
                && el(&d, m, RecruitmentPattern::linear()) < el(&d, m, RecruitmentPattern::Uniform)
            {
                issues.push(format!("K={k} m={m}: linear below uniform"));
            }
            let by_l: Vec<f64> = [0.2, 0.4, 0.6, 0.8]
                .iter()
                .map(|&l| el(&d, m, RecruitmentPattern::Mixed { l }))
                .collect();
            if by_l.windows(2).any(|w| w[1] < w[0] - 1e-9) {
                issues.push(format!("K={k} m={m}: EL decreases in l {by_l:.2?}"));
            }
        }
    }
    let hsd = build_design(&hsd_spec()).unwrap();
    let first = (0..=24)
        .map(f64::from)
        .find(|&m| el(&hsd, m, RecruitmentPattern::Uniform) > 100.0);
    if first.map_or(true, |m| (m - 8.0).abs() > 1.0) {
        issues.push(format!("spending design first exceeds 100% at {first:?}"));
    }
    Verdict {
        pass: issues.is_empty(),
        detail: format!(
            "spending design first exceeds 100% at m = {}{}",
            first.map_or("never".into(), |m| m.to_string()),
            if issues.is_empty() {
                String::new()
            } else {
                format!("; {}", issues.join("; "))
            }
        ),
    }
}

fn main() {
    let criteria: Vec<(usize, &str, Box<dyn Fn() -> Verdict>)> = vec![
        (1, "uniform recruitment table", Box::new(criterion_1)),
        (2, "linear recruitment table", Box::new(|| tables(&["S2"]))),
        (
            3,
            "mixed recruitment tables",
            Box::new(|| tables(&["S3", "S4", "S5", "S6"])),
        ),
        (
            4,
            "unequal spacing tables",
            Box::new(|| tables(&["S7", "S8"])),
        ),
        (5, "case study", Box::new(criterion_5)),
        (6, "three-stage motivating example", Box::new(criterion_6)),
        (7, "level, power and conservation", Box::new(criterion_7)),
        (8, "Monte Carlo agreement", Box::new(criterion_8)),
        (9, "delay metric properties", Box::new(criterion_9)),
        (10, "qualitative orderings", Box::new(criterion_10)),
    ];
    let mut failed = Vec::new();
    for (id, name, check) in criteria {
        let v = check();
        println!(
            "criterion {id:>2} {}: {name}: {}",
            if v.pass { "PASS" } else { "FAIL" },
            v.detail
        );
        if !v.pass {
            failed.push(id);
        }
    }
    if failed != KNOWN_UNATTAINABLE {
        eprintln!("failing criteria {failed:?}, expected exactly {KNOWN_UNATTAINABLE:?}");
        std::process::exit(1);
    }
}

use proptest::prelude::*;

use gsdelay::boundaries::{build_boundaries, BoundaryFamily, FutilityStyle};
use gsdelay::delay::{assess, expected_time, DelayQuery, EfficiencyLoss};
use gsdelay::design::{build_design, round_for_report, DesignSpec, Rounding};
use gsdelay::normal;
use gsdelay::recruitment::{
    pipeline_for_sizes, recruit_time, RecruitmentModel, RecruitmentPattern,
};
use gsdelay::report::{ResultRow, ResultTable};
use gsdelay::sequential::{
    exit_probabilities, exit_probabilities_with, Quadrature, SequentialProblem,
};

/// Strictly increasing fractions ending at 1.
fn fractions(max_stages: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.05f64..1.0, 1..=max_stages).prop_map(|w| {
        let total: f64 = w.iter().sum();
        let mut acc = 0.0;
        let mut rho: Vec<f64> = w
            .iter()
            .map(|x| {
                acc += x / total;
                acc
            })
            .collect();
        *rho.last_mut().unwrap() = 1.0;
        rho
    })
}

fn family() -> impl Strategy<Value = BoundaryFamily> {
    prop_oneof![
        (0.0f64..=0.5).prop_map(|delta| BoundaryFamily::WangTsiatis { delta }),
        (-4.0f64..2.0).prop_map(|gamma| BoundaryFamily::HwangShihDeCani { gamma }),
    ]
}

fn futility() -> impl Strategy<Value = FutilityStyle> {
    prop_oneof![
        Just(FutilityStyle::BindingZero),
        Just(FutilityStyle::Symmetric),
        Just(FutilityStyle::None)
    ]
}

fn pattern() -> impl Strategy<Value = RecruitmentPattern> {
    prop_oneof![
        Just(RecruitmentPattern::Uniform),
        Just(RecruitmentPattern::linear()),
        (0.1f64..1.0).prop_map(|l| RecruitmentPattern::Mixed { l }),
    ]
}

/// A valid problem with interim bounds drawn around the origin.
fn problem() -> impl Strategy<Value = SequentialProblem> {
    (fractions(5), 20.0f64..80.0, -1.0f64..1.0).prop_flat_map(|(rho, scale, drift)| {
        let k = rho.len();
        (
            prop::collection::vec((-2.0f64..0.5, 0.8f64..3.5), k),
            prop::bool::ANY,
        )
            .prop_map(move |(bounds, open)| {
                let info: Vec<f64> = rho.iter().map(|r| r * scale).collect();
                let e: Vec<f64> = bounds.iter().map(|b| b.1).collect();
                let mut f: Vec<f64> = bounds
                    .iter()
                    .map(|b| if open { f64::NEG_INFINITY } else { b.0 })
                    .collect();
                f[k - 1] = e[k - 1];
                SequentialProblem::new(info, drift, e, f).unwrap()
            })
    })
}

proptest! {
    #[test]
    fn cdf_symmetry(x in -30.0f64..30.0) {
        prop_assert!((normal::cdf(x) + normal::cdf(-x) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn quantile_inverts_cdf(p in 1e-12f64..(1.0 - 1e-12)) {
        let x = normal::quantile(p).unwrap();
        let back = normal::cdf(x);
        prop_assert!((back - p).abs() <= 1e-10 * p.min(1.0 - p).max(1e-4), "p {p} back {back}");
    }

    #[test]
    fn quantile_monotone(a in 1e-9f64..0.5, b in 1e-9f64..0.5) {
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        prop_assert!(normal::quantile(lo).unwrap() <= normal::quantile(hi).unwrap());
    }

    #[test]
    fn exit_probabilities_conserve(p in problem()) {
        let e = exit_probabilities(&p);
        prop_assert!((e.total() - 1.0).abs() < 1e-8);
        for s in e.accept().iter().chain(e.reject()) {
            prop_assert!((0.0..=1.0).contains(s));
        }
        let stop = e.stop();
        for k in 0..p.stages() {
            prop_assert_eq!(stop[k], e.accept()[k] + e.reject()[k]);
        }
    }

    #[test]
    fn rejection_monotone_in_drift(p in problem(), a in -1.0f64..1.0, b in -1.0f64..1.0) {
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        let r_lo = exit_probabilities(&p.with_drift(lo).unwrap()).total_reject();
        let r_hi = exit_probabilities(&p.with_drift(hi).unwrap()).total_reject();
        prop_assert!(r_lo <= r_hi + 1e-9, "{r_lo} > {r_hi}");
    }

    #[test]
    fn grid_converged(p in problem()) {
        let coarse = exit_probabilities(&p);
        let fine = exit_probabilities_with(&p, &Quadrature::new(601).unwrap());
        for (a, b) in coarse.accept().iter().chain(coarse.reject()).zip(fine.accept().iter().chain(fine.reject())) {
            prop_assert!((a - b).abs() < 1e-6, "{a} vs {b}");
        }
    }

    #[test]
    fn pipeline_bounded_and_monotone(
        sizes in prop::collection::vec(1.0f64..100.0, 1..6),
        pat in pattern(),
        t_max in 2.0f64..48.0,
        m1 in 0.0f64..30.0,
        m2 in 0.0f64..30.0,
    ) {
        let mut acc = 0.0;
        let sizes: Vec<f64> = sizes.iter().map(|s| { acc += s; acc }).collect();
        let n_max = *sizes.last().unwrap();
        let model = RecruitmentModel::new(pat, t_max, n_max).unwrap();
        let (lo, hi) = if m1 < m2 { (m1, m2) } else { (m2, m1) };
        let a = pipeline_for_sizes(&sizes, &model, lo).unwrap();
        let b = pipeline_for_sizes(&sizes, &model, hi).unwrap();
        let k = sizes.len();
        prop_assert_eq!(a.pipeline[k - 1], 0.0);
        for j in 0..k {
            prop_assert!(a.pipeline[j] >= 0.0);
            prop_assert!(a.pipeline[j] <= n_max - sizes[j] + 1e-9);
            prop_assert!(a.pipeline[j] <= b.pipeline[j] + 1e-9);
            prop_assert!(a.recruit_time[j] <= t_max + 1e-9);
        }
    }

    #[test]
    fn recruit_time_is_monotone(pat in pattern(), t_max in 2.0f64..48.0, n_max in 10.0f64..400.0, u in 0.0f64..1.0, v in 0.0f64..1.0) {
        let model = RecruitmentModel::new(pat, t_max, n_max).unwrap();
        let (lo, hi) = if u < v { (u, v) } else { (v, u) };
        let t_lo = recruit_time(lo * n_max, &model).unwrap();
        let t_hi = recruit_time(hi * n_max, &model).unwrap();
        prop_assert!(t_lo <= t_hi + 1e-12);
        prop_assert!((recruit_time(n_max, &model).unwrap() - t_max).abs() < 1e-9);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn boundaries_hit_level(rho in fractions(5), fam in family(), fut in futility(), alpha in 0.005f64..0.1) {
        let b = build_boundaries(&rho, fam, alpha, fut).unwrap();
        let p = b.problem(rho.clone(), 0.0).unwrap();
        let level = exit_probabilities(&p).total_reject();
        prop_assert!((level - alpha).abs() < 1e-6, "level {level}");
    }

    #[test]
    fn design_properties(
        rho in fractions(5),
        fam in family(),
        fut in futility(),
        pat in pattern(),
        m in 0.0f64..30.0,
        t_max in 6.0f64..36.0,
        c in 0.2f64..5.0,
    ) {
        let spec = DesignSpec::new(1).rho(rho).family(fam).futility(fut);
        let d = build_design(&spec).unwrap();
        prop_assert!((d.exit_at(0.0).unwrap().total_reject() - spec.alpha).abs() < 1e-6);
        prop_assert!((d.exit().total_reject() - (1.0 - spec.beta)).abs() < 1e-6);

        let rounded = round_for_report(&d, Rounding::Total);
        prop_assert!(rounded.windows(2).all(|w| w[0] <= w[1]));

        let zero = assess(&d, &DelayQuery::new(0.0, pat, t_max)).unwrap();
        if let EfficiencyLoss::Percent(v) = zero.el {
            prop_assert_eq!(v, 0.0);
        }
        let q = DelayQuery::new(m, pat, t_max);
        let a = assess(&d, &q).unwrap();
        prop_assert!(d.ess() <= a.ess_delay + 1e-9);
        prop_assert!(a.ess_delay <= d.max_n() + 1e-9);
        prop_assert_eq!(*a.profile.pipeline.last().unwrap(), 0.0);

        if pat == RecruitmentPattern::Uniform {
            let et = expected_time(&d, &q).unwrap();
            prop_assert!((et.et - (m + t_max / d.max_n() * d.ess())).abs() < 1e-9);
            let scaled = assess(&d, &DelayQuery::new(c * m, pat, c * t_max)).unwrap();
            match (a.el, scaled.el) {
                (EfficiencyLoss::Percent(x), EfficiencyLoss::Percent(y)) => prop_assert!((x - y).abs() < 1e-9),
                (x, y) => prop_assert_eq!(x, y),
            }
        }
    }
}

fn row() -> impl Strategy<Value = ResultRow> {
    (
        1usize..=5,
        pattern(),
        0.0f64..30.0,
        10.0f64..500.0,
        prop::collection::vec(0.0f64..300.0, 5),
        prop::option::of(-50.0f64..300.0),
        -20.0f64..60.0,
    )
        .prop_map(|(k, pat, m, n_max, tail, el, eg)| ResultRow {
            stages: k,
            pattern: pat.name().to_string(),
            l: pat.ramp_fraction(),
            spacing: "I".into(),
            m,
            n_max,
            ess: n_max * 0.7,
            ess_delay: n_max * 0.8,
            pipeline: tail[..k].to_vec(),
            eg_percent: eg,
            eg_delay_percent: eg / 2.0,
            el,
            et: m + 10.0,
            et_single: m + 12.0,
        })
}

proptest! {
    #[test]
    fn table_round_trip(rows in prop::collection::vec(row(), 0..12)) {
        let table = ResultTable::new(vec!["generator: test".into(), "t_max: 24".into()], rows);
        let csv = table.to_csv_string().unwrap();
        let back = ResultTable::read_csv(csv.as_bytes()).unwrap();
        let expected = ResultTable { rows: table.rows.iter().map(ResultRow::rounded).collect(), ..table.clone() };
        prop_assert_eq!(&back, &expected);
        prop_assert_eq!(back.to_csv_string().unwrap(), csv);

        let mut json = Vec::new();
        table.write_json(&mut json).unwrap();
        let from_json = ResultTable::read_json(json.as_slice()).unwrap();
        prop_assert_eq!(from_json, expected);
    }
}

//! Efficacy and futility boundaries.
//!
//! Two families are supported: the Wang-Tsiatis power family
//! `e_k = C·ρ_k^(Δ−1/2)` (Pocock at Δ = 0.5, O'Brien-Fleming at Δ = 0) and
//! Hwang-Shih-DeCani error spending. Futility is always binding: the futility
//! region is part of the type I error calculation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::normal;
use crate::sequential::{exit_probabilities, SequentialProblem};

const C_BRACKET: (f64, f64) = (0.1, 10.0);
const LEVEL_TOL: f64 = 1e-10;
const Z_MAX: f64 = 12.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BoundaryFamily {
    WangTsiatis { delta: f64 },
    HwangShihDeCani { gamma: f64 },
}

impl BoundaryFamily {
    pub fn pocock() -> Self {
        BoundaryFamily::WangTsiatis { delta: 0.5 }
    }

    pub fn obrien_fleming() -> Self {
        BoundaryFamily::WangTsiatis { delta: 0.0 }
    }

    pub fn label(&self) -> String {
        match *self {
            BoundaryFamily::WangTsiatis { delta } if delta == 0.5 => "pocock".to_string(),
            BoundaryFamily::WangTsiatis { delta } if delta == 0.0 => "obrien-fleming".to_string(),
            BoundaryFamily::WangTsiatis { delta } => format!("wang-tsiatis({delta})"),
            BoundaryFamily::HwangShihDeCani { gamma } => format!("hsd({gamma})"),
        }
    }
}

/// How interim futility bounds are set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FutilityStyle {
    /// `f_k = 0` at every interim.
    BindingZero,
    /// `f_k = −e_k` at every interim.
    Symmetric,
    /// No interim futility stopping (`f_k = −∞`).
    None,
}

impl FutilityStyle {
    fn interim_bound(self, efficacy: f64) -> f64 {
        match self {
            FutilityStyle::BindingZero => 0.0,
            FutilityStyle::Symmetric => -efficacy,
            FutilityStyle::None => f64::NEG_INFINITY,
        }
    }

    /// Smallest admissible interim efficacy bound for this style.
    fn efficacy_floor(self) -> f64 {
        match self {
            FutilityStyle::BindingZero | FutilityStyle::Symmetric => 0.0,
            FutilityStyle::None => -Z_MAX,
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            FutilityStyle::BindingZero => "binding-zero",
            FutilityStyle::Symmetric => "symmetric",
            FutilityStyle::None => "none",
        }
    }
}

/// Critical values `e_k`, `f_k` on the Z scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundarySet {
    pub efficacy: Vec<f64>,
    pub futility: Vec<f64>,
    /// Σ F_k under zero drift.
    pub achieved_alpha: f64,
}

impl BoundarySet {
    pub fn stages(&self) -> usize {
        self.efficacy.len()
    }

    /// The boundaries as a test on the given information levels.
    pub fn problem(&self, info: Vec<f64>, drift: f64) -> Result<SequentialProblem> {
        SequentialProblem::new(info, drift, self.efficacy.clone(), self.futility.clone())
    }
}

/// Checks `0 < ρ_1 < … < ρ_K = 1`.
pub fn validate_fractions(rho: &[f64]) -> Result<()> {
    if rho.is_empty() {
        return Err(Error::invalid("information fractions must not be empty"));
    }
    let mut prev = 0.0;
    for &r in rho {
        if !(r.is_finite() && r > prev) {
            return Err(Error::invalid(format!(
                "information fractions must be strictly increasing in (0, 1], got {rho:?}"
            )));
        }
        prev = r;
    }
    if (prev - 1.0).abs() > 1e-12 {
        return Err(Error::invalid(format!(
            "last information fraction must be 1, got {prev}"
        )));
    }
    Ok(())
}

fn validate_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha < 0.5) {
        return Err(Error::invalid(format!(
            "alpha must lie in (0, 0.5), got {alpha}"
        )));
    }
    Ok(())
}

/// Boundaries for any supported family.
pub fn build_boundaries(
    rho: &[f64],
    family: BoundaryFamily,
    alpha: f64,
    futility: FutilityStyle,
) -> Result<BoundarySet> {
    match family {
        BoundaryFamily::WangTsiatis { delta } => wt_boundaries(rho, delta, alpha, futility),
        BoundaryFamily::HwangShihDeCani { gamma } => {
            spending_boundaries(rho, gamma, alpha, futility)
        }
    }
}

fn wt_set(rho: &[f64], delta: f64, c: f64, futility: FutilityStyle) -> (Vec<f64>, Vec<f64>) {
    let k = rho.len();
    let efficacy: Vec<f64> = rho.iter().map(|r| c * r.powf(delta - 0.5)).collect();
    let futility = efficacy
        .iter()
        .enumerate()
        .map(|(i, &e)| {
            if i + 1 == k {
                e
            } else {
                futility.interim_bound(e)
            }
        })
        .collect();
    (efficacy, futility)
}

fn null_reject(rho: &[f64], efficacy: Vec<f64>, futility: Vec<f64>) -> Result<f64> {
    let problem = SequentialProblem::new(rho.to_vec(), 0.0, efficacy, futility)?;
    Ok(exit_probabilities(&problem).total_reject())
}

/// Wang-Tsiatis boundaries `e_k = C·ρ_k^(Δ−1/2)` with `C` solved for level `alpha`.
pub fn wt_boundaries(
    rho: &[f64],
    delta: f64,
    alpha: f64,
    futility: FutilityStyle,
) -> Result<BoundarySet> {
    validate_fractions(rho)?;
    validate_alpha(alpha)?;
    if !delta.is_finite() {
        return Err(Error::invalid(format!(
            "shape parameter must be finite, got {delta}"
        )));
    }

    if rho.len() == 1 {
        let e = normal::quantile(1.0 - alpha)?;
        return Ok(BoundarySet {
            efficacy: vec![e],
            futility: vec![e],
            achieved_alpha: alpha,
        });
    }

    // Type I error is decreasing in C.
    let level = |c: f64| -> Result<f64> {
        let (e, f) = wt_set(rho, delta, c, futility);
        Ok(null_reject(rho, e, f)? - alpha)
    };
    let (mut lo, mut hi) = C_BRACKET;
    if level(lo)? < 0.0 || level(hi)? > 0.0 {
        return Err(Error::RootNotBracketed {
            what: "Wang-Tsiatis constant",
            lo,
            hi,
        });
    }
    let mut c = 0.5 * (lo + hi);
    for _ in 0..200 {
        c = 0.5 * (lo + hi);
        let g = level(c)?;
        if g.abs() < LEVEL_TOL || hi - lo < 1e-14 {
            break;
        }
        if g > 0.0 {
            lo = c;
        } else {
            hi = c;
        }
    }

    let (efficacy, futility) = wt_set(rho, delta, c, futility);
    let achieved_alpha = null_reject(rho, efficacy.clone(), futility.clone())?;
    Ok(BoundarySet {
        efficacy,
        futility,
        achieved_alpha,
    })
}

/// Hwang-Shih-DeCani cumulative error spent at information fraction `t`:
/// `α(1 − e^(−γt)) / (1 − e^(−γ))`, linear `α·t` when `γ = 0`.
pub fn hsd_spend(t: f64, gamma: f64, alpha: f64) -> f64 {
    let t = t.clamp(0.0, 1.0);
    if gamma == 0.0 {
        return alpha * t;
    }
    alpha * (-(-gamma * t).exp_m1()) / (-(-gamma).exp_m1())
}

/// Error-spending boundaries solved stage by stage under zero drift.
///
/// At each interim the efficacy bound is chosen so that the cumulative
/// crossing probability equals the spend at `ρ_k`; the style's futility bound
/// is then imposed before moving to the next stage.
pub fn spending_boundaries(
    rho: &[f64],
    gamma: f64,
    alpha: f64,
    futility: FutilityStyle,
) -> Result<BoundarySet> {
    validate_fractions(rho)?;
    validate_alpha(alpha)?;
    if !gamma.is_finite() {
        return Err(Error::invalid(format!(
            "spending parameter must be finite, got {gamma}"
        )));
    }
    let k_max = rho.len();

    let spend: Vec<f64> = rho.iter().map(|&t| hsd_spend(t, gamma, alpha)).collect();
    let mut prev_spend = 0.0;
    for (k, &s) in spend.iter().enumerate() {
        if !(s > prev_spend) {
            return Err(Error::invalid(format!(
                "spending increments must be positive (stage {})",
                k + 1
            )));
        }
        prev_spend = s;
    }

    let mut efficacy: Vec<f64> = Vec::with_capacity(k_max);
    let mut fut: Vec<f64> = Vec::with_capacity(k_max);
    let mut spent = 0.0;
    for k in 0..k_max {
        let target = spend[k] - spent;
        let info = rho[..=k].to_vec();
        // F_k of the truncated test equals F_k of the full test.
        let crossing = |e: f64| -> Result<f64> {
            let mut ev = efficacy.clone();
            let mut fv = fut.clone();
            ev.push(e);
            fv.push(e);
            let p = SequentialProblem::new(info.clone(), 0.0, ev, fv)?;
            Ok(*exit_probabilities(&p).reject().last().expect("non-empty"))
        };

        let floor = if k + 1 == k_max {
            -Z_MAX
        } else {
            futility.efficacy_floor()
        };
        // Symmetric/zero futility needs e_k > 0; nudge off the floor.
        let mut lo = if floor == 0.0 { 1e-9 } else { floor };
        let mut hi = Z_MAX;
        if crossing(lo)? < target {
            return Err(Error::RootNotBracketed {
                what: "spending boundary",
                lo,
                hi,
            });
        }
        let mut e = 0.5 * (lo + hi);
        for _ in 0..200 {
            e = 0.5 * (lo + hi);
            let g = crossing(e)? - target;
            if g.abs() < LEVEL_TOL || hi - lo < 1e-14 {
                break;
            }
            if g > 0.0 {
                lo = e;
            } else {
                hi = e;
            }
        }
        spent += crossing(e)?;
        efficacy.push(e);
        fut.push(if k + 1 == k_max {
            e
        } else {
            futility.interim_bound(e)
        });
    }

    let achieved_alpha = null_reject(rho, efficacy.clone(), fut.clone())?;
    Ok(BoundarySet {
        efficacy,
        futility: fut,
        achieved_alpha,
    })
}

/// `k/K` for `k = 1..=K`.
pub fn equal_fractions(stages: usize) -> Vec<f64> {
    (1..=stages).map(|k| k as f64 / stages as f64).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_stage_is_normal_quantile() {
        let z = normal::quantile(0.95).unwrap();
        for delta in [0.0, 0.25, 0.5] {
            let b = wt_boundaries(&[1.0], delta, 0.05, FutilityStyle::BindingZero).unwrap();
            assert!((b.efficacy[0] - z).abs() < 1e-12);
        }
        let b = spending_boundaries(&[1.0], -2.0, 0.05, FutilityStyle::Symmetric).unwrap();
        assert!((b.efficacy[0] - z).abs() < 1e-8);
    }

    #[test]
    fn pocock_is_constant() {
        let b = wt_boundaries(&[0.5, 1.0], 0.5, 0.05, FutilityStyle::BindingZero).unwrap();
        assert!((b.efficacy[0] - b.efficacy[1]).abs() < 1e-12);
    }

    #[test]
    fn obf_scales_with_root_fraction() {
        let rho = equal_fractions(4);
        let b = wt_boundaries(&rho, 0.0, 0.025, FutilityStyle::None).unwrap();
        let c0 = b.efficacy[0] * rho[0].sqrt();
        for (e, r) in b.efficacy.iter().zip(&rho) {
            assert!((e * r.sqrt() - c0).abs() < 1e-10);
        }
        assert!((b.achieved_alpha - 0.025).abs() < 1e-6);
    }

    #[test]
    fn wt_two_stage_constant() {
        // Independent bivariate-normal root search gives C = 1.7397545967.
        let b = wt_boundaries(&[0.5, 1.0], 0.25, 0.05, FutilityStyle::BindingZero).unwrap();
        assert!((b.efficacy[1] - 1.739_754_596_7).abs() < 1e-6);
        assert_eq!(b.futility[0], 0.0);
        assert_eq!(b.futility[1], b.efficacy[1]);
    }

    #[test]
    fn symmetric_style_mirrors() {
        let b = wt_boundaries(&equal_fractions(3), 0.25, 0.05, FutilityStyle::Symmetric).unwrap();
        for k in 0..2 {
            assert_eq!(b.futility[k], -b.efficacy[k]);
        }
        assert_eq!(b.futility[2], b.efficacy[2]);
    }

    #[test]
    fn hsd_spend_endpoints_and_value() {
        assert_eq!(hsd_spend(0.0, -2.0, 0.025), 0.0);
        assert!((hsd_spend(1.0, -2.0, 0.025) - 0.025).abs() < 1e-17);
        // 50-digit evaluation of 0.025·(1 − e)/(1 − e²).
        assert!((hsd_spend(0.5, -2.0, 0.025) - 0.006_723_535_534_249_878).abs() < 1e-16);
        assert!((hsd_spend(0.3, 0.0, 0.05) - 0.015).abs() < 1e-17);
    }

    #[test]
    fn hsd_spend_monotone() {
        for gamma in [-4.0, -2.0, -0.5, 0.0, 1.0, 3.0] {
            let mut prev = -1.0;
            for i in 0..=100 {
                let s = hsd_spend(i as f64 / 100.0, gamma, 0.05);
                assert!(s >= prev);
                prev = s;
            }
        }
    }

    #[test]
    fn spending_matches_schedule() {
        let rho = equal_fractions(3);
        for style in [
            FutilityStyle::BindingZero,
            FutilityStyle::Symmetric,
            FutilityStyle::None,
        ] {
            let b = spending_boundaries(&rho, -2.0, 0.05, style).unwrap();
            let p = b.problem(rho.clone(), 0.0).unwrap();
            let ex = exit_probabilities(&p);
            let mut cum = 0.0;
            for k in 0..3 {
                cum += ex.reject()[k];
                assert!(
                    (cum - hsd_spend(rho[k], -2.0, 0.05)).abs() < 1e-6,
                    "{style:?} stage {k}"
                );
            }
        }
    }

    #[test]
    fn rejects_bad_fractions() {
        assert!(wt_boundaries(&[0.5, 0.9], 0.25, 0.05, FutilityStyle::None).is_err());
        assert!(wt_boundaries(&[0.6, 0.5, 1.0], 0.25, 0.05, FutilityStyle::None).is_err());
        assert!(wt_boundaries(&[0.5, 1.0], 0.25, 0.6, FutilityStyle::None).is_err());
        assert!(spending_boundaries(&[], -2.0, 0.05, FutilityStyle::None).is_err());
    }
}

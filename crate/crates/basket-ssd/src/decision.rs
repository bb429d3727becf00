//! Posterior decision rule: efficacy, futility, or inconclusive.

use crate::commensurate::NormalSummary;
use crate::error::Result;
use crate::solver::{DecisionSpec, Direction};
use crate::stats::std_normal_cdf;

/// Outcome of applying the decision rule to one subtrial's posterior.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Efficacious,
    Futile,
    Inconclusive,
}

impl Verdict {
    pub fn as_str(&self) -> &'static str {
        match self {
            Verdict::Efficacious => "efficacious",
            Verdict::Futile => "futile",
            Verdict::Inconclusive => "inconclusive",
        }
    }
}

/// Posterior decision summary for one subtrial: the posterior probability
/// that the effect is beneficial (mass beyond 0 on the favorable side), the
/// posterior probability that it fails to beat the margin delta, and the
/// resulting verdict.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrialDecision {
    pub efficacy_prob: f64,
    pub futility_prob: f64,
    pub verdict: Verdict,
}

/// Applies the thresholds of subtrial k to a normal posterior.
///
/// With greater_is_better, efficacy holds when P(theta > 0) >= eta and
/// futility when P(theta <= delta) >= zeta_k; with smaller_is_better the
/// inequalities mirror. When both thresholds are met simultaneously, which
/// can happen exactly on the design boundary delta/sd = z_eta + z_zeta, the
/// verdict is efficacious.
pub fn decide(posterior: &NormalSummary, spec: &DecisionSpec, k: usize) -> TrialDecision {
    assert!(
        posterior.variance > 0.0,
        "decision rule requires a positive posterior variance"
    );
    let sd = posterior.sd();
    let below_zero = std_normal_cdf((0.0 - posterior.mean) / sd);
    let below_delta = std_normal_cdf((spec.delta() - posterior.mean) / sd);
    let (efficacy_prob, futility_prob) = match spec.direction() {
        Direction::GreaterIsBetter => (1.0 - below_zero, below_delta),
        Direction::SmallerIsBetter => (below_zero, 1.0 - below_delta),
    };
    let verdict = if efficacy_prob >= spec.eta() {
        Verdict::Efficacious
    } else if futility_prob >= spec.zeta(k) {
        Verdict::Futile
    } else {
        Verdict::Inconclusive
    };
    TrialDecision { efficacy_prob, futility_prob, verdict }
}

/// True when the decision rule cannot return inconclusive for any posterior
/// mean at this posterior standard deviation: delta/sd >= z_eta + z_zeta_k.
pub fn is_decisive_sd(sd: f64, spec: &DecisionSpec, k: usize) -> Result<bool> {
    let z_eta = crate::stats::std_normal_quantile(spec.eta())?;
    let z_zeta = crate::stats::std_normal_quantile(spec.zeta(k))?;
    // A few ulp of slack keeps a design sitting exactly on the boundary
    // from flipping to indecisive through the rounding of the quotient;
    // any genuinely indecisive design misses by far more than this.
    Ok(spec.delta().abs() / sd >= (z_eta + z_zeta) * (1.0 - 4.0 * f64::EPSILON))
}

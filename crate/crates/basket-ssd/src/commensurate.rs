//! The borrowing structure of a basket trial.
//!
//! Subtrial k borrows from every complementary subtrial q through a
//! commensurate prior whose variance has two parts: the posterior variance
//! of the complementary effect and a moment-matched penalty that grows with
//! the elicited incommensurability weight w_qk. The per-pair priors are then
//! synthesised into one collective prior with weights p_qk that decay in
//! w_qk, and the collective prior is updated by the subtrial's own data.

use crate::error::{Error, Result};
use crate::stats::{hellinger_weight, moment_matched_prior_variance, GammaMixtureHyper};

/// Mean and variance of a normal distribution, used for priors and
/// posteriors throughout. `variance` is positive wherever one is produced
/// by this crate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormalSummary {
    pub mean: f64,
    pub variance: f64,
}

impl NormalSummary {
    pub fn sd(&self) -> f64 {
        self.variance.sqrt()
    }
}

/// Symmetric K x K matrix of pairwise incommensurability weights w_qk in
/// [0, 1] with an exactly zero diagonal. Entry (q, k) discounts what
/// subtrial k borrows from subtrial q; 0 means fully commensurate and 1
/// means maximal discounting.
///
/// Construction rejects asymmetric input rather than symmetrizing it, so an
/// elicitation error surfaces instead of being averaged away.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightMatrix {
    k: usize,
    /// Row-major entries, length k * k.
    entries: Vec<f64>,
}

impl WeightMatrix {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        let k = rows.len();
        if k < 2 {
            return Err(Error::Config(format!(
                "weights: matrix must be at least 2x2, got {k} row(s)"
            )));
        }
        let mut entries = Vec::with_capacity(k * k);
        for (q, row) in rows.iter().enumerate() {
            if row.len() != k {
                return Err(Error::Config(format!(
                    "weights: row {q} has {} entries, expected {k}",
                    row.len()
                )));
            }
            entries.extend_from_slice(row);
        }
        for q in 0..k {
            for j in 0..k {
                let w = entries[q * k + j];
                if !w.is_finite() || !(0.0..=1.0).contains(&w) {
                    return Err(Error::Config(format!(
                        "weights: entry ({q},{j}) must lie in [0, 1], got {w}"
                    )));
                }
            }
            if entries[q * k + q] != 0.0 {
                return Err(Error::Config(format!(
                    "weights: diagonal entry ({q},{q}) must be 0"
                )));
            }
        }
        for q in 0..k {
            for j in (q + 1)..k {
                if entries[q * k + j] != entries[j * k + q] {
                    return Err(Error::Config(format!(
                        "weights: matrix must be symmetric, entries ({q},{j}) and ({j},{q}) differ"
                    )));
                }
            }
        }
        Ok(Self { k, entries })
    }

    /// Builds the matrix from per-subtrial outcome summaries, taking w_qk as
    /// the Hellinger distance between N(means[q], sds[q]^2) and
    /// N(means[k], sds[k]^2). The result is symmetric with a zero diagonal
    /// by construction.
    pub fn from_hellinger(arm_means: &[f64], arm_sds: &[f64]) -> Result<Self> {
        let k = arm_means.len();
        if arm_sds.len() != k {
            return Err(Error::Config(format!(
                "weights: arm_means has {k} entries but arm_sds has {}",
                arm_sds.len()
            )));
        }
        if k < 2 {
            return Err(Error::Config(format!(
                "weights: matrix must be at least 2x2, got {k} row(s)"
            )));
        }
        let mut entries = vec![0.0; k * k];
        for q in 0..k {
            for j in (q + 1)..k {
                let w = hellinger_weight(arm_means[q], arm_sds[q], arm_means[j], arm_sds[j])?;
                entries[q * k + j] = w;
                entries[j * k + q] = w;
            }
        }
        Ok(Self { k, entries })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn get(&self, q: usize, k: usize) -> f64 {
        assert!(q < self.k && k < self.k, "weight index out of range");
        self.entries[q * self.k + k]
    }

    /// Rows as owned vectors, for reporting and serialization.
    pub fn rows(&self) -> Vec<Vec<f64>> {
        (0..self.k)
            .map(|q| self.entries[q * self.k..(q + 1) * self.k].to_vec())
            .collect()
    }
}

/// Fixed design quantities of one subtrial: known outcome variance sigma2,
/// allocation probability r of the experimental arm, and the operational
/// prior N(m0, s02) placed on the treatment effect.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SubtrialDesign {
    pub sigma2: f64,
    pub r: f64,
    pub m0: f64,
    pub s02: f64,
}

impl SubtrialDesign {
    pub fn new(sigma2: f64, r: f64, m0: f64, s02: f64) -> Result<Self> {
        if sigma2 <= 0.0 || !sigma2.is_finite() {
            return Err(Error::Config(format!("sigma2: must be positive, got {sigma2}")));
        }
        if !(r > 0.0 && r < 1.0) {
            return Err(Error::Config(format!(
                "R: must lie strictly between 0 and 1, got {r}"
            )));
        }
        if !m0.is_finite() {
            return Err(Error::Config(format!("m0: must be finite, got {m0}")));
        }
        if s02 <= 0.0 || !s02.is_finite() {
            return Err(Error::Config(format!("s02: must be positive, got {s02}")));
        }
        Ok(Self { sigma2, r, m0, s02 })
    }

    /// Sampling precision of the mean difference from n patients:
    /// n R (1 - R) / sigma2. Accepts fractional n because the sample size
    /// solver iterates over real-valued sizes.
    pub fn data_precision(&self, n: f64) -> f64 {
        n * self.r * (1.0 - self.r) / self.sigma2
    }
}

/// Complete borrowing design: the K subtrials, their pairwise weights, the
/// Gamma mixture hyperparameters behind the moment-matched variances, and
/// the concentration parameter c0 of the synthesis-weight transform.
#[derive(Debug, Clone, PartialEq)]
pub struct BasketDesign {
    subtrials: Vec<SubtrialDesign>,
    weights: WeightMatrix,
    hyper: GammaMixtureHyper,
    c0: f64,
}

impl BasketDesign {
    pub fn new(
        subtrials: Vec<SubtrialDesign>,
        weights: WeightMatrix,
        hyper: GammaMixtureHyper,
        c0: f64,
    ) -> Result<Self> {
        if subtrials.len() < 2 {
            return Err(Error::Config("subtrials: at least 2 required".into()));
        }
        if subtrials.len() != weights.k() {
            return Err(Error::Config(format!(
                "subtrials: {} entries do not match the {}x{} weight matrix",
                subtrials.len(),
                weights.k(),
                weights.k()
            )));
        }
        if c0 <= 0.0 || !c0.is_finite() {
            return Err(Error::Config(format!("c0: must be positive, got {c0}")));
        }
        Ok(Self { subtrials, weights, hyper, c0 })
    }

    pub fn k(&self) -> usize {
        self.subtrials.len()
    }

    pub fn subtrials(&self) -> &[SubtrialDesign] {
        &self.subtrials
    }

    pub fn subtrial(&self, k: usize) -> &SubtrialDesign {
        &self.subtrials[k]
    }

    pub fn weights(&self) -> &WeightMatrix {
        &self.weights
    }

    pub fn hyper(&self) -> &GammaMixtureHyper {
        &self.hyper
    }

    pub fn c0(&self) -> f64 {
        self.c0
    }
}

/// Synthesis weights p_qk allocating subtrial k's collective prior across
/// its K-1 complementary subtrials:
///
/// `p_qk = exp(-w_qk^2 / c0) / sum over q != k of exp(-w_qk^2 / c0)`
///
/// Returned in ascending complementary-subtrial order (q = 0..K skipping k).
/// The entries are positive and sum to 1.
pub fn synthesis_weights(weights: &WeightMatrix, c0: f64, k: usize) -> Result<Vec<f64>> {
    if c0 <= 0.0 || !c0.is_finite() {
        return Err(Error::Domain(format!("c0: must be positive, got {c0}")));
    }
    let dim = weights.k();
    if k >= dim {
        return Err(Error::Domain(format!(
            "subtrial index {k} out of range for K = {dim}"
        )));
    }
    let squared: Vec<f64> = (0..dim)
        .filter(|&q| q != k)
        .map(|q| weights.get(q, k).powi(2))
        .collect();
    // Shifting all exponents by the smallest w^2 leaves the normalized
    // weights unchanged and keeps the largest term at exp(0), so tiny c0
    // cannot underflow every numerator at once.
    let shift = squared.iter().cloned().fold(f64::INFINITY, f64::min);
    let unnormalized: Vec<f64> = squared.iter().map(|w2| (-(w2 - shift) / c0).exp()).collect();
    let total: f64 = unnormalized.iter().sum();
    Ok(unnormalized.into_iter().map(|u| u / total).collect())
}

/// Commensurate prior variance xi_qk^2 that subtrial k attaches to the
/// effect borrowed from subtrial q when n_q patients contribute:
///
/// `xi_qk^2 = (1/s_0q^2 + n_q R_q (1-R_q) / sigma_q^2)^(-1)
///            + moment_matched_prior_variance(w_qk)`
///
/// n_q may be fractional; the sample size solver iterates over real sizes.
pub fn commensurate_prior_variance(
    design: &BasketDesign,
    n_q: f64,
    q: usize,
    k: usize,
) -> Result<f64> {
    let dim = design.k();
    if q >= dim || k >= dim {
        return Err(Error::Domain(format!(
            "subtrial index ({q},{k}) out of range for K = {dim}"
        )));
    }
    if q == k {
        return Err(Error::Domain(
            "commensurate variance: complementary index q must differ from k".into(),
        ));
    }
    if n_q.is_nan() || n_q < 0.0 {
        return Err(Error::Domain(format!("n_q: must be nonnegative, got {n_q}")));
    }
    let sub = design.subtrial(q);
    let posterior_variance = 1.0 / (1.0 / sub.s02 + sub.data_precision(n_q));
    let penalty = moment_matched_prior_variance(design.weights().get(q, k), design.hyper())?;
    Ok(posterior_variance + penalty)
}

/// Posterior for a complementary subtrial's effect given its own data only:
/// the operational prior N(m0, s02) updated by the sample mean difference
/// `xbar_diff` carrying precision n_q R_q (1-R_q) / sigma_q^2. With n_q = 0
/// this returns the operational prior exactly.
pub fn complementary_posterior(sub: &SubtrialDesign, n_q: f64, xbar_diff: f64) -> NormalSummary {
    assert!(n_q >= 0.0, "complementary posterior requires n_q >= 0");
    let prior_precision = 1.0 / sub.s02;
    let data_precision = sub.data_precision(n_q);
    let precision = prior_precision + data_precision;
    NormalSummary {
        mean: (sub.m0 * prior_precision + xbar_diff * data_precision) / precision,
        variance: 1.0 / precision,
    }
}

/// Collective prior for subtrial k: the synthesis-weighted mixture of the
/// K-1 commensurate priors, moment-matched to a single normal with
///
/// `mean = sum p_qk lambda_q` and `variance = sum p_qk^2 xi_qk^2`.
///
/// `lambdas` holds the complementary posterior means for all K subtrials;
/// entry k is ignored. `n` holds the per-subtrial sizes behind those means.
pub fn collective_prior(
    design: &BasketDesign,
    n: &[f64],
    lambdas: &[f64],
    k: usize,
) -> Result<NormalSummary> {
    let dim = design.k();
    if n.len() != dim || lambdas.len() != dim {
        return Err(Error::Domain(format!(
            "collective prior: n and lambdas must have length K = {dim}"
        )));
    }
    let p = synthesis_weights(design.weights(), design.c0(), k)?;
    let mut mean = 0.0;
    let mut variance = 0.0;
    for (i, q) in (0..dim).filter(|&q| q != k).enumerate() {
        mean += p[i] * lambdas[q];
        variance += p[i] * p[i] * commensurate_prior_variance(design, n[q], q, k)?;
    }
    Ok(NormalSummary { mean, variance })
}

/// Full posterior for subtrial k's effect: the collective prior updated by
/// the subtrial's own sample mean difference. The posterior precision is the
/// collective prior precision plus the data precision, and the mean is the
/// precision-weighted combination of the collective prior mean and
/// `xbar_diff_k`. Requires n_k > 0; with no own data the collective prior
/// itself is the relevant distribution.
pub fn full_posterior(
    design: &BasketDesign,
    n: &[f64],
    k: usize,
    xbar_diff_k: f64,
    lambdas: &[f64],
) -> Result<NormalSummary> {
    if k >= design.k() {
        return Err(Error::Domain(format!(
            "subtrial index {k} out of range for K = {}",
            design.k()
        )));
    }
    if n[k].is_nan() || n[k] <= 0.0 {
        return Err(Error::Domain(format!(
            "full posterior: n must be positive for subtrial {k}, got {}",
            n[k]
        )));
    }
    let collective = collective_prior(design, n, lambdas, k)?;
    let prior_precision = 1.0 / collective.variance;
    let data_precision = design.subtrial(k).data_precision(n[k]);
    let precision = prior_precision + data_precision;
    Ok(NormalSummary {
        mean: (collective.mean * prior_precision + xbar_diff_k * data_precision) / precision,
        variance: 1.0 / precision,
    })
}

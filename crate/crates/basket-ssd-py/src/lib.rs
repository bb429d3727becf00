//! Python bindings for the basket-trial sample size library.
//!
//! The extension module mirrors the Rust API at the granularity a planning
//! script needs: build a design once, then solve sizes, inspect synthesis
//! weights, and simulate operating characteristics. Scalar helpers are
//! exposed as free functions.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use basket_ssd::{
    decide, run_study, sample_size_borrowing, sample_size_no_borrowing, Allocation, BasketDesign,
    DecisionSpec, GammaMixtureHyper, Model, NormalSummary, ScenarioConfig, SubtrialDesign,
    WeightMatrix,
};

fn to_py_err(e: basket_ssd::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// Solved per-subtrial sample sizes.
#[pyclass(get_all, frozen)]
struct Solution {
    mode: String,
    n_fractional: Vec<f64>,
    n_integer: Vec<u64>,
    residuals: Vec<f64>,
    iterations: usize,
    converged: bool,
    prior_sufficient: Vec<bool>,
}

#[pymethods]
impl Solution {
    fn total_fractional(&self) -> f64 {
        self.n_fractional.iter().sum()
    }

    fn __repr__(&self) -> String {
        format!(
            "Solution(mode='{}', n_fractional={:?}, converged={})",
            self.mode, self.n_fractional, self.converged
        )
    }
}

/// Simulated operating characteristics, one entry per subtrial.
#[pyclass(get_all, frozen)]
struct Characteristics {
    efficacious: Vec<f64>,
    futile: Vec<f64>,
    inconclusive: Vec<f64>,
    decisive: Vec<f64>,
    overall_false_positive: Option<f64>,
    replicates: u64,
}

#[pymethods]
impl Characteristics {
    fn __repr__(&self) -> String {
        format!(
            "Characteristics(efficacious={:?}, overall_false_positive={:?})",
            self.efficacious, self.overall_false_positive
        )
    }
}

/// A basket-trial design paired with its decision rule.
#[pyclass(frozen)]
struct Design {
    inner: BasketDesign,
    spec: DecisionSpec,
}

#[pymethods]
impl Design {
    /// Builds a design from per-subtrial parameters, a pairwise weight
    /// matrix, mixture hyperparameters (a1, b1, a2, b2), the synthesis
    /// bandwidth c0, and the decision rule. `zeta` takes one shared value
    /// or one per subtrial; `direction` is "greater_is_better" or
    /// "smaller_is_better".
    #[new]
    #[pyo3(signature = (sigma2, r, m0, s02, weights, hyper, c0, eta, zeta, delta, direction))]
    #[allow(clippy::too_many_arguments)]
    fn new(
        sigma2: Vec<f64>,
        r: Vec<f64>,
        m0: Vec<f64>,
        s02: Vec<f64>,
        weights: Vec<Vec<f64>>,
        hyper: (f64, f64, f64, f64),
        c0: f64,
        eta: f64,
        zeta: Vec<f64>,
        delta: f64,
        direction: &str,
    ) -> PyResult<Self> {
        let k = sigma2.len();
        for (name, len) in [("r", r.len()), ("m0", m0.len()), ("s02", s02.len())] {
            if len != k {
                return Err(PyValueError::new_err(format!(
                    "{name}: expected {k} entries, got {len}"
                )));
            }
        }
        let subtrials = (0..k)
            .map(|i| SubtrialDesign::new(sigma2[i], r[i], m0[i], s02[i]))
            .collect::<basket_ssd::Result<Vec<_>>>()
            .map_err(to_py_err)?;
        let weights = WeightMatrix::new(weights).map_err(to_py_err)?;
        let hyper = GammaMixtureHyper::new(hyper.0, hyper.1, hyper.2, hyper.3).map_err(to_py_err)?;
        let inner = BasketDesign::new(subtrials, weights, hyper, c0).map_err(to_py_err)?;
        let zetas = if zeta.len() == 1 { vec![zeta[0]; k] } else { zeta };
        let spec = DecisionSpec::new(eta, zetas, delta, direction.parse().map_err(to_py_err)?)
            .map_err(to_py_err)?;
        spec.check_len(k).map_err(to_py_err)?;
        Ok(Self { inner, spec })
    }

    /// Number of subtrials.
    fn k(&self) -> usize {
        self.inner.k()
    }

    /// Sizes each subtrial on its own operational prior.
    fn no_borrowing(&self) -> PyResult<Solution> {
        sample_size_no_borrowing(&self.inner, &self.spec)
            .map(solution_out)
            .map_err(to_py_err)
    }

    /// Sizes all subtrials jointly under the borrowing model.
    fn borrowing(&self) -> PyResult<Solution> {
        sample_size_borrowing(&self.inner, &self.spec)
            .map(solution_out)
            .map_err(to_py_err)
    }

    /// Synthesis weights of the K-1 complementary subtrials of subtrial
    /// `k`, in ascending subtrial order with `k` skipped.
    fn synthesis_weights(&self, k: usize) -> PyResult<Vec<f64>> {
        basket_ssd::commensurate::synthesis_weights(self.inner.weights(), self.inner.c0(), k)
            .map_err(to_py_err)
    }

    /// Posterior efficacy and futility probabilities and the verdict for
    /// one subtrial, given observed mean differences in all subtrials at
    /// planned sizes `n`.
    fn decide(&self, n: Vec<f64>, diffs: Vec<f64>, k: usize) -> PyResult<(f64, f64, String)> {
        for (name, len) in [("n", n.len()), ("diffs", diffs.len())] {
            if len != self.inner.k() {
                return Err(PyValueError::new_err(format!(
                    "{name}: expected {} entries, got {len}",
                    self.inner.k()
                )));
            }
        }
        if k >= self.inner.k() {
            return Err(PyValueError::new_err(format!(
                "k: subtrial index {k} out of range for {} subtrials",
                self.inner.k()
            )));
        }
        let lambdas: Vec<f64> = (0..self.inner.k())
            .map(|q| {
                basket_ssd::commensurate::complementary_posterior(
                    self.inner.subtrial(q),
                    n[q],
                    diffs[q],
                )
                .mean
            })
            .collect();
        let posterior: NormalSummary =
            basket_ssd::commensurate::full_posterior(&self.inner, &n, k, diffs[k], &lambdas)
                .map_err(to_py_err)?;
        let decision = decide(&posterior, &self.spec, k);
        Ok((
            decision.efficacy_prob,
            decision.futility_prob,
            decision.verdict.as_str().to_string(),
        ))
    }

    /// Monte Carlo operating characteristics at planned sizes `n`.
    #[pyo3(signature = (mu_e, mu_c, n, replicates, seed, model = "borrowing", allocation = "fixed"))]
    #[allow(clippy::too_many_arguments)]
    fn simulate(
        &self,
        mu_e: Vec<f64>,
        mu_c: Vec<f64>,
        n: Vec<u64>,
        replicates: u64,
        seed: u64,
        model: &str,
        allocation: &str,
    ) -> PyResult<Characteristics> {
        let allocation: Allocation = allocation.parse().map_err(to_py_err)?;
        let model: Model = model.parse().map_err(to_py_err)?;
        let sigma2 = self.inner.subtrials().iter().map(|s| s.sigma2).collect();
        let r = self.inner.subtrials().iter().map(|s| s.r).collect();
        let scenario = ScenarioConfig::new(mu_e, mu_c, sigma2, n, r, replicates, seed, allocation)
            .map_err(to_py_err)?;
        let oc = run_study(&scenario, &self.inner, &self.spec, model).map_err(to_py_err)?;
        Ok(Characteristics {
            efficacious: oc.per_subtrial.iter().map(|s| s.efficacious).collect(),
            futile: oc.per_subtrial.iter().map(|s| s.futile).collect(),
            inconclusive: oc.per_subtrial.iter().map(|s| s.inconclusive).collect(),
            decisive: oc.decisive_rate,
            overall_false_positive: oc.overall_false_positive,
            replicates: oc.replicates_used,
        })
    }

    fn __repr__(&self) -> String {
        format!("Design(k={})", self.inner.k())
    }
}

fn solution_out(solution: basket_ssd::SampleSizeSolution) -> Solution {
    Solution {
        mode: solution.mode.as_str().to_string(),
        n_fractional: solution.n_fractional,
        n_integer: solution.n_integer,
        residuals: solution.residuals,
        iterations: solution.iterations,
        converged: solution.converged,
        prior_sufficient: solution.prior_sufficient,
    }
}

/// Standard normal quantile.
#[pyfunction]
fn std_normal_quantile(p: f64) -> PyResult<f64> {
    basket_ssd::stats::std_normal_quantile(p).map_err(to_py_err)
}

/// Hellinger distance between two normal arm-level distributions.
#[pyfunction]
fn hellinger_weight(mu_q: f64, sigma_q: f64, mu_k: f64, sigma_k: f64) -> PyResult<f64> {
    basket_ssd::stats::hellinger_weight(mu_q, sigma_q, mu_k, sigma_k).map_err(to_py_err)
}

/// Pairwise Hellinger weight matrix from arm-level means and sds.
#[pyfunction]
fn hellinger_matrix(arm_means: Vec<f64>, arm_sds: Vec<f64>) -> PyResult<Vec<Vec<f64>>> {
    WeightMatrix::from_hellinger(&arm_means, &arm_sds)
        .map(|w| w.rows().to_vec())
        .map_err(to_py_err)
}

/// Variance moment-matched to the Gamma-mixture commensurability prior.
#[pyfunction]
fn moment_matched_prior_variance(w: f64, a1: f64, b1: f64, a2: f64, b2: f64) -> PyResult<f64> {
    let hyper = GammaMixtureHyper::new(a1, b1, a2, b2).map_err(to_py_err)?;
    basket_ssd::stats::moment_matched_prior_variance(w, &hyper).map_err(to_py_err)
}

/// Mean and equal-tailed interval of the Gamma-mixture prior at the given
/// coverage level. Returns (mean, lower, upper).
#[pyfunction]
#[pyo3(signature = (w, a1, b1, a2, b2, level = 0.95))]
fn gamma_mixture_summary(
    w: f64,
    a1: f64,
    b1: f64,
    a2: f64,
    b2: f64,
    level: f64,
) -> PyResult<(f64, f64, f64)> {
    let hyper = GammaMixtureHyper::new(a1, b1, a2, b2).map_err(to_py_err)?;
    basket_ssd::stats::gamma_mixture_mean_and_interval(w, &hyper, level).map_err(to_py_err)
}

#[pymodule]
fn basket_ssd_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Design>()?;
    m.add_class::<Solution>()?;
    m.add_class::<Characteristics>()?;
    m.add_function(wrap_pyfunction!(std_normal_quantile, m)?)?;
    m.add_function(wrap_pyfunction!(hellinger_weight, m)?)?;
    m.add_function(wrap_pyfunction!(hellinger_matrix, m)?)?;
    m.add_function(wrap_pyfunction!(moment_matched_prior_variance, m)?)?;
    m.add_function(wrap_pyfunction!(gamma_mixture_summary, m)?)?;
    Ok(())
}

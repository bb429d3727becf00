//! Monte Carlo verification of operating characteristics.
//!
//! Replicates of the basket trial are generated patient by patient, each
//! replicate is analysed at the planned sizes with the borrowing or the
//! stand-alone posterior, and the per-subtrial verdict rates are
//! aggregated. Replicates run in parallel; every replicate draws from its
//! own counter-indexed stream of one seeded generator, so results are
//! bit-identical for any worker count.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution, Normal};
use rayon::prelude::*;

use crate::commensurate::{complementary_posterior, full_posterior, BasketDesign};
use crate::decision::{decide, Verdict};
use crate::error::{Error, Result};
use crate::solver::{sample_size_borrowing, DecisionSpec};

/// How patients are split between the experimental and control arms of one
/// subtrial.
///
/// `Fixed` assigns round(n R) patients to E and the rest to C, matching the
/// sampling distribution the posterior conditions on. `Randomised` draws
/// the E-arm size from Binomial(n, R), redrawing until both arms are
/// occupied, as in a trial randomising each patient independently.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Allocation {
    Fixed,
    Randomised,
}

impl Allocation {
    pub fn as_str(&self) -> &'static str {
        match self {
            Allocation::Fixed => "fixed",
            Allocation::Randomised => "randomised",
        }
    }
}

impl std::str::FromStr for Allocation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fixed" => Ok(Allocation::Fixed),
            "randomised" => Ok(Allocation::Randomised),
            other => Err(Error::Config(format!(
                "allocation: expected \"fixed\" or \"randomised\", got \"{other}\""
            ))),
        }
    }
}

/// Analysis model applied to each simulated replicate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Model {
    Borrowing,
    StandAlone,
}

impl Model {
    pub fn as_str(&self) -> &'static str {
        match self {
            Model::Borrowing => "borrowing",
            Model::StandAlone => "standalone",
        }
    }
}

impl std::str::FromStr for Model {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "borrowing" => Ok(Model::Borrowing),
            "standalone" => Ok(Model::StandAlone),
            other => Err(Error::Config(format!(
                "model: expected \"borrowing\" or \"standalone\", got \"{other}\""
            ))),
        }
    }
}

/// True data-generating configuration of one simulated scenario plus the
/// replication settings. The truth (mu_E, mu_C, sigma2, R) is deliberately
/// separate from the analysis design so that misspecification can be
/// simulated; in the standard scenarios they coincide.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub mu_e: Vec<f64>,
    pub mu_c: Vec<f64>,
    pub sigma2: Vec<f64>,
    pub n: Vec<u64>,
    pub r: Vec<f64>,
    pub replicates: u64,
    pub seed: u64,
    pub allocation: Allocation,
}

impl ScenarioConfig {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        mu_e: Vec<f64>,
        mu_c: Vec<f64>,
        sigma2: Vec<f64>,
        n: Vec<u64>,
        r: Vec<f64>,
        replicates: u64,
        seed: u64,
        allocation: Allocation,
    ) -> Result<Self> {
        let k = mu_e.len();
        if k == 0 {
            return Err(Error::Config("simulation.mu_E: must not be empty".into()));
        }
        for (name, len) in [
            ("mu_C", mu_c.len()),
            ("sigma2", sigma2.len()),
            ("n", n.len()),
            ("R", r.len()),
        ] {
            if len != k {
                return Err(Error::Config(format!(
                    "simulation.{name}: expected {k} entries, got {len}"
                )));
            }
        }
        for (i, &s2) in sigma2.iter().enumerate() {
            if s2 <= 0.0 || !s2.is_finite() {
                return Err(Error::Config(format!(
                    "simulation.sigma2[{i}]: must be positive, got {s2}"
                )));
            }
        }
        for (i, &ri) in r.iter().enumerate() {
            if !(ri > 0.0 && ri < 1.0) {
                return Err(Error::Config(format!(
                    "simulation.R[{i}]: must lie strictly between 0 and 1, got {ri}"
                )));
            }
        }
        for (i, &ni) in n.iter().enumerate() {
            if ni == 0 {
                return Err(Error::Config(format!(
                    "simulation.n[{i}]: must be at least 1"
                )));
            }
            match allocation {
                Allocation::Fixed => {
                    let (n_e, n_c) = fixed_arm_sizes(ni, r[i]);
                    if n_e == 0 || n_c == 0 {
                        return Err(Error::Config(format!(
                            "simulation.n[{i}]: fixed allocation leaves an arm empty (n = {ni}, R = {})",
                            r[i]
                        )));
                    }
                }
                Allocation::Randomised => {
                    if ni < 2 {
                        return Err(Error::Config(format!(
                            "simulation.n[{i}]: randomised allocation needs at least 2 patients"
                        )));
                    }
                }
            }
        }
        if replicates == 0 {
            return Err(Error::Config("simulation.replicates: must be at least 1".into()));
        }
        for (i, (&mu1, &mu2)) in mu_e.iter().zip(&mu_c).enumerate() {
            if !mu1.is_finite() || !mu2.is_finite() {
                return Err(Error::Config(format!(
                    "simulation.mu[{i}]: must be finite"
                )));
            }
        }
        Ok(Self { mu_e, mu_c, sigma2, n, r, replicates, seed, allocation })
    }

    pub fn k(&self) -> usize {
        self.mu_e.len()
    }

    /// Indices of subtrials whose true effect is exactly null.
    fn null_subtrials(&self) -> Vec<usize> {
        (0..self.k()).filter(|&k| self.mu_e[k] == self.mu_c[k]).collect()
    }
}

/// Experimental and control arm sizes under fixed allocation:
/// E gets round(n R), C the remainder.
fn fixed_arm_sizes(n: u64, r: f64) -> (u64, u64) {
    let n_e = ((n as f64) * r).round() as u64;
    let n_e = n_e.min(n);
    (n_e, n - n_e)
}

/// Generator for one replicate: stream `replicate` of the ChaCha8 sequence
/// seeded by `seed`. Streams are independent, so replicates can be computed
/// in any order or in parallel without changing the draws.
pub fn replicate_rng(seed: u64, replicate: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(replicate);
    rng
}

/// Simulates one basket-trial replicate patient by patient and returns the
/// per-subtrial sample mean differences between the arms.
pub fn simulate_replicate<R: Rng>(scenario: &ScenarioConfig, rng: &mut R) -> Vec<f64> {
    let k = scenario.k();
    let mut diffs = Vec::with_capacity(k);
    for i in 0..k {
        let sd = scenario.sigma2[i].sqrt();
        let (n_e, n_c) = match scenario.allocation {
            Allocation::Fixed => fixed_arm_sizes(scenario.n[i], scenario.r[i]),
            Allocation::Randomised => {
                // Binomial(n, R) arm sizes conditioned on both arms being
                // occupied, since a mean difference needs data on each arm.
                let binomial = Binomial::new(scenario.n[i], scenario.r[i])
                    .expect("R validated in (0, 1)");
                loop {
                    let n_e = binomial.sample(rng);
                    if n_e > 0 && n_e < scenario.n[i] {
                        break (n_e, scenario.n[i] - n_e);
                    }
                }
            }
        };
        let experimental = Normal::new(scenario.mu_e[i], sd).expect("sd validated positive");
        let control = Normal::new(scenario.mu_c[i], sd).expect("sd validated positive");
        let sum_e: f64 = (0..n_e).map(|_| experimental.sample(rng)).sum();
        let sum_c: f64 = (0..n_c).map(|_| control.sample(rng)).sum();
        diffs.push(sum_e / n_e as f64 - sum_c / n_c as f64);
    }
    diffs
}

/// Verdict rates of one subtrial across replicates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SubtrialRates {
    pub efficacious: f64,
    pub futile: f64,
    pub inconclusive: f64,
}

/// Aggregated operating characteristics of one (scenario, model) run.
///
/// `overall_false_positive` is the proportion of replicates declaring
/// efficacy in at least one truly null subtrial; it is None when the
/// scenario has no null subtrial.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatingCharacteristics {
    pub per_subtrial: Vec<SubtrialRates>,
    pub decisive_rate: Vec<f64>,
    pub overall_false_positive: Option<f64>,
    pub replicates_used: u64,
}

#[derive(Clone)]
struct Tally {
    efficacious: Vec<u64>,
    futile: Vec<u64>,
    inconclusive: Vec<u64>,
    any_null_efficacious: u64,
}

impl Tally {
    fn zero(k: usize) -> Self {
        Self {
            efficacious: vec![0; k],
            futile: vec![0; k],
            inconclusive: vec![0; k],
            any_null_efficacious: 0,
        }
    }

    fn merge(mut self, other: Self) -> Self {
        for (a, b) in self.efficacious.iter_mut().zip(&other.efficacious) {
            *a += b;
        }
        for (a, b) in self.futile.iter_mut().zip(&other.futile) {
            *a += b;
        }
        for (a, b) in self.inconclusive.iter_mut().zip(&other.inconclusive) {
            *a += b;
        }
        self.any_null_efficacious += other.any_null_efficacious;
        self
    }
}

/// Runs the full Monte Carlo study for one scenario under one analysis
/// model and aggregates verdict rates.
///
/// Analysis always conditions on the planned sizes `scenario.n`: the
/// posterior uses the design's sigma2 and R at those n, as the planning
/// formulae do, regardless of the realised arm split.
pub fn run_study(
    scenario: &ScenarioConfig,
    design: &BasketDesign,
    spec: &DecisionSpec,
    model: Model,
) -> Result<OperatingCharacteristics> {
    let k = design.k();
    if scenario.k() != k {
        return Err(Error::Config(format!(
            "simulation: scenario has {} subtrials but the design has {k}",
            scenario.k()
        )));
    }
    spec.check_len(k)?;
    let n_planned: Vec<f64> = scenario.n.iter().map(|&n| n as f64).collect();
    let nulls = scenario.null_subtrials();

    let tally = (0..scenario.replicates)
        .into_par_iter()
        .fold(
            || Tally::zero(k),
            |mut tally, replicate| {
                let mut rng = replicate_rng(scenario.seed, replicate);
                let diffs = simulate_replicate(scenario, &mut rng);
                let lambdas: Vec<f64> = (0..k)
                    .map(|q| complementary_posterior(design.subtrial(q), n_planned[q], diffs[q]).mean)
                    .collect();
                let mut null_hit = false;
                for i in 0..k {
                    let posterior = match model {
                        Model::Borrowing => {
                            full_posterior(design, &n_planned, i, diffs[i], &lambdas)
                                .expect("planned n validated >= 1")
                        }
                        Model::StandAlone => {
                            complementary_posterior(design.subtrial(i), n_planned[i], diffs[i])
                        }
                    };
                    match decide(&posterior, spec, i).verdict {
                        Verdict::Efficacious => {
                            tally.efficacious[i] += 1;
                            if scenario.mu_e[i] == scenario.mu_c[i] {
                                null_hit = true;
                            }
                        }
                        Verdict::Futile => tally.futile[i] += 1,
                        Verdict::Inconclusive => tally.inconclusive[i] += 1,
                    }
                }
                if null_hit {
                    tally.any_null_efficacious += 1;
                }
                tally
            },
        )
        .reduce(|| Tally::zero(k), Tally::merge);

    let reps = scenario.replicates as f64;
    let per_subtrial = (0..k)
        .map(|i| SubtrialRates {
            efficacious: tally.efficacious[i] as f64 / reps,
            futile: tally.futile[i] as f64 / reps,
            inconclusive: tally.inconclusive[i] as f64 / reps,
        })
        .collect();
    let decisive_rate = (0..k)
        .map(|i| (tally.efficacious[i] + tally.futile[i]) as f64 / reps)
        .collect();
    let overall_false_positive = if nulls.is_empty() {
        None
    } else {
        Some(tally.any_null_efficacious as f64 / reps)
    };
    Ok(OperatingCharacteristics {
        per_subtrial,
        decisive_rate,
        overall_false_positive,
        replicates_used: scenario.replicates,
    })
}

/// Replication settings of a sweep run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepSettings {
    pub replicates: u64,
    pub seed: u64,
    pub allocation: Allocation,
}

/// One sweep observation: subtrial `subtrial` at outcome variance `sigma2`
/// was sized to `n` patients and declared efficacy at rate `tp_rate` when
/// the true effect equals the margin, and at rate `fp_rate` under a null
/// effect.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRow {
    pub sigma2: f64,
    pub subtrial: usize,
    pub n: u64,
    pub tp_rate: f64,
    pub fp_rate: f64,
}

/// True/false positive sweep over homoscedastic designs: for each variance
/// in the grid, re-solves the borrowing sizes, then simulates the scenario
/// with every true effect at the margin (true positives) and the all-null
/// scenario (false positives) under the borrowing model.
///
/// Grid point g uses seeds `settings.seed + 2g` and `settings.seed + 2g + 1`
/// for the two scenarios, keeping every run reproducible and distinct.
pub fn tp_fp_sweep(
    sigma2_grid: &[f64],
    base_design: &BasketDesign,
    spec: &DecisionSpec,
    settings: SweepSettings,
) -> Result<Vec<SweepRow>> {
    let k = base_design.k();
    let mut rows = Vec::with_capacity(sigma2_grid.len() * k);
    for (g, &sigma2) in sigma2_grid.iter().enumerate() {
        let subtrials = base_design
            .subtrials()
            .iter()
            .map(|sub| crate::commensurate::SubtrialDesign::new(sigma2, sub.r, sub.m0, sub.s02))
            .collect::<Result<Vec<_>>>()?;
        let design = BasketDesign::new(
            subtrials,
            base_design.weights().clone(),
            *base_design.hyper(),
            base_design.c0(),
        )?;
        let solution = sample_size_borrowing(&design, spec)?;
        let r: Vec<f64> = design.subtrials().iter().map(|sub| sub.r).collect();
        let at_margin = ScenarioConfig::new(
            vec![spec.delta(); k],
            vec![0.0; k],
            vec![sigma2; k],
            solution.n_integer.clone(),
            r.clone(),
            settings.replicates,
            settings.seed + 2 * g as u64,
            settings.allocation,
        )?;
        let at_null = ScenarioConfig::new(
            vec![0.0; k],
            vec![0.0; k],
            vec![sigma2; k],
            solution.n_integer.clone(),
            r,
            settings.replicates,
            settings.seed + 2 * g as u64 + 1,
            settings.allocation,
        )?;
        let tp = run_study(&at_margin, &design, spec, Model::Borrowing)?;
        let fp = run_study(&at_null, &design, spec, Model::Borrowing)?;
        for i in 0..k {
            rows.push(SweepRow {
                sigma2,
                subtrial: i,
                n: solution.n_integer[i],
                tp_rate: tp.per_subtrial[i].efficacious,
                fp_rate: fp.per_subtrial[i].efficacious,
            });
        }
    }
    Ok(rows)
}

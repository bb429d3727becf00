//! Sample size determination.
//!
//! Without borrowing each subtrial has a closed-form size: the data
//! precision must raise the operational prior precision up to the required
//! posterior precision. With borrowing the K subtrials are coupled, because
//! subtrial k's collective prior sharpens as the complementary subtrials
//! grow; the sizes then solve a system of K nonlinear equations, handled by
//! a damped Newton iteration with iterates projected onto n >= 0 and, for
//! iterates Newton cannot improve, by projected coordinate sweeps.

use crate::commensurate::{commensurate_prior_variance, synthesis_weights, BasketDesign};
use crate::error::{Error, Result};
use crate::stats::std_normal_quantile;

/// Orientation of the treatment benefit: whether larger or smaller outcome
/// values favor the experimental arm.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    GreaterIsBetter,
    SmallerIsBetter,
}

impl Direction {
    pub fn as_str(&self) -> &'static str {
        match self {
            Direction::GreaterIsBetter => "greater_is_better",
            Direction::SmallerIsBetter => "smaller_is_better",
        }
    }
}

impl std::str::FromStr for Direction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "greater_is_better" => Ok(Direction::GreaterIsBetter),
            "smaller_is_better" => Ok(Direction::SmallerIsBetter),
            other => Err(Error::Config(format!(
                "direction: expected \"greater_is_better\" or \"smaller_is_better\", got \"{other}\""
            ))),
        }
    }
}

/// Efficacy/futility decision thresholds: efficacy is declared at posterior
/// probability eta, futility at zeta_k (one threshold per subtrial), and
/// delta is the margin below (or above) which the treatment is considered
/// not better than control. The sign of delta must match the direction.
#[derive(Debug, Clone, PartialEq)]
pub struct DecisionSpec {
    eta: f64,
    zeta: Vec<f64>,
    delta: f64,
    direction: Direction,
}

impl DecisionSpec {
    pub fn new(eta: f64, zeta: Vec<f64>, delta: f64, direction: Direction) -> Result<Self> {
        if !(eta > 0.5 && eta < 1.0) {
            return Err(Error::Config(format!(
                "decision.eta: must lie strictly between 0.5 and 1, got {eta}"
            )));
        }
        if zeta.is_empty() {
            return Err(Error::Config("decision.zeta: at least one threshold required".into()));
        }
        for (k, &z) in zeta.iter().enumerate() {
            if !(z > 0.5 && z < 1.0) {
                return Err(Error::Config(format!(
                    "decision.zeta[{k}]: must lie strictly between 0.5 and 1, got {z}"
                )));
            }
        }
        if !delta.is_finite() || delta == 0.0 {
            return Err(Error::Config(format!(
                "decision.delta: must be a nonzero real, got {delta}"
            )));
        }
        let sign_ok = match direction {
            Direction::GreaterIsBetter => delta > 0.0,
            Direction::SmallerIsBetter => delta < 0.0,
        };
        if !sign_ok {
            return Err(Error::Config(format!(
                "decision.delta: sign must match direction {} (got {delta})",
                direction.as_str()
            )));
        }
        Ok(Self { eta, zeta, delta, direction })
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    /// Futility threshold of subtrial k.
    pub fn zeta(&self, k: usize) -> f64 {
        self.zeta[k]
    }

    pub fn zetas(&self) -> &[f64] {
        &self.zeta
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn direction(&self) -> Direction {
        self.direction
    }

    pub fn check_len(&self, k: usize) -> Result<()> {
        if self.zeta.len() != k {
            return Err(Error::Config(format!(
                "decision.zeta: expected 1 or {k} thresholds, got {}",
                self.zeta.len()
            )));
        }
        Ok(())
    }
}

/// Whether a solution came from the closed form or the coupled system.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveMode {
    NoBorrowing,
    Borrowing,
}

impl SolveMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            SolveMode::NoBorrowing => "no_borrowing",
            SolveMode::Borrowing => "borrowing",
        }
    }
}

/// Solved per-subtrial sample sizes.
///
/// `n_fractional` holds the real-valued solutions of the precision
/// constraints; `n_integer` is the per-subtrial ceiling. `residuals` holds
/// the signed constraint residuals in precision units; a component clamped
/// at 0 reports only its shortfall there, so a constraint already met with
/// slack at n = 0 contributes a residual of 0 and `prior_sufficient` marks
/// it. `converged` implies every |residual| is below the solver tolerance.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSizeSolution {
    pub n_fractional: Vec<f64>,
    pub n_integer: Vec<u64>,
    pub residuals: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub mode: SolveMode,
    pub prior_sufficient: Vec<bool>,
}

impl SampleSizeSolution {
    pub fn total_fractional(&self) -> f64 {
        self.n_fractional.iter().sum()
    }
}

/// Residual tolerance, in posterior-precision units, at which the sample
/// size equations count as solved. Precision magnitudes in realistic
/// designs are O(1) to O(40), so this sits far below the 0.1-patient
/// reporting granularity.
pub const PRECISION_TOLERANCE: f64 = 1e-8;

const MAX_NEWTON_ITERATIONS: usize = 200;

/// Posterior precision each subtrial must reach for the decision rule to be
/// decisive: ((z_eta + z_zeta_k) / delta)^2, one entry per futility
/// threshold.
pub fn required_precision(spec: &DecisionSpec) -> Vec<f64> {
    let z_eta = std_normal_quantile(spec.eta).expect("eta validated in (0.5, 1)");
    spec.zeta
        .iter()
        .map(|&zeta| {
            let z_zeta = std_normal_quantile(zeta).expect("zeta validated in (0.5, 1)");
            ((z_eta + z_zeta) / spec.delta).powi(2)
        })
        .collect()
}

fn ceil_sizes(n_fractional: &[f64]) -> Vec<u64> {
    n_fractional.iter().map(|&n| n.ceil() as u64).collect()
}

/// Closed-form sizes when borrowing is not permitted: the posterior
/// precision 1/s_0k^2 + n R (1-R) / sigma^2 must reach the required
/// precision, giving
///
/// `n_k = sigma_k^2 / (R_k (1-R_k)) * (required_k - 1/s_0k^2)`
///
/// clamped at 0 (with `prior_sufficient` set) when the operational prior
/// alone already meets the requirement.
pub fn sample_size_no_borrowing(
    design: &BasketDesign,
    spec: &DecisionSpec,
) -> Result<SampleSizeSolution> {
    spec.check_len(design.k())?;
    let required = required_precision(spec);
    let mut n_fractional = Vec::with_capacity(design.k());
    let mut residuals = Vec::with_capacity(design.k());
    let mut prior_sufficient = Vec::with_capacity(design.k());
    for (k, sub) in design.subtrials().iter().enumerate() {
        let prior_precision = 1.0 / sub.s02;
        let raw = sub.sigma2 / (sub.r * (1.0 - sub.r)) * (required[k] - prior_precision);
        let n = raw.max(0.0);
        let achieved = prior_precision + sub.data_precision(n);
        let shortfall = achieved - required[k];
        n_fractional.push(n);
        // A clamped component meets its constraint with slack; only a
        // shortfall would count against convergence.
        residuals.push(if n > 0.0 { shortfall } else { shortfall.min(0.0) });
        prior_sufficient.push(raw <= 0.0);
    }
    let n_integer = ceil_sizes(&n_fractional);
    let converged = residuals.iter().all(|r| r.abs() < PRECISION_TOLERANCE);
    Ok(SampleSizeSolution {
        n_fractional,
        n_integer,
        residuals,
        iterations: 0,
        converged,
        mode: SolveMode::NoBorrowing,
        prior_sufficient,
    })
}

/// Constraint residuals of the borrowing system at fractional sizes x:
/// for each k, data precision plus collective-prior precision minus the
/// required precision. Coordinates are clamped at 0 before use so that
/// finite-difference probes just outside the nonnegative orthant remain
/// well defined.
fn borrowing_residuals(design: &BasketDesign, required: &[f64], x: &[f64]) -> Vec<f64> {
    let dim = design.k();
    let clamped: Vec<f64> = x.iter().map(|&v| v.max(0.0)).collect();
    (0..dim)
        .map(|k| {
            let p = synthesis_weights(design.weights(), design.c0(), k)
                .expect("design validated at construction");
            let mut prior_variance = 0.0;
            for (i, q) in (0..dim).filter(|&q| q != k).enumerate() {
                let xi2 = commensurate_prior_variance(design, clamped[q], q, k)
                    .expect("design validated at construction");
                prior_variance += p[i] * p[i] * xi2;
            }
            design.subtrial(k).data_precision(clamped[k]) + 1.0 / prior_variance - required[k]
        })
        .collect()
}

/// Sizes under borrowing: solves the K coupled constraints
///
/// `n_k R_k (1-R_k) / sigma_k^2 + [sum over q != k of p_qk^2 xi_qk^2(n_q)]^(-1) = required_k`
///
/// by Newton iteration started at the no-borrowing sizes. When the
/// iteration stalls, projected coordinate sweeps take over; components
/// whose constraint already holds at n = 0 end exactly there.
pub fn sample_size_borrowing(
    design: &BasketDesign,
    spec: &DecisionSpec,
) -> Result<SampleSizeSolution> {
    spec.check_len(design.k())?;
    let required = required_precision(spec);
    let start = sample_size_no_borrowing(design, spec)?.n_fractional;
    let residual_fn = |x: &[f64]| borrowing_residuals(design, &required, x);

    let (solution, iterations) =
        match solve_newton(residual_fn, &start, PRECISION_TOLERANCE, MAX_NEWTON_ITERATIONS) {
            Ok(found) => found,
            Err(stalled) => solve_by_coordinate_sweeps(design, &required, &start, stalled)?,
        };
    finish_borrowing_solution(design, &required, solution, iterations)
}

/// Linear-rate fallback, so the budget is generous; a sweep costs a few
/// hundred arithmetic operations at realistic K, and the budget is spent
/// only on designs the Newton iteration already gave up on.
const MAX_SWEEP_ROUNDS: usize = 10_000;

/// Fallback for iterates Newton cannot improve: a boundary component whose
/// constraint holds with slack puts a positive floor under the raw residual
/// norm, and the clamp kink at n = 0 distorts the finite-difference steps.
/// Subtrial k's collective prior involves only the other sizes, so its
/// constraint is affine in n_k and a projected Gauss-Seidel sweep can set
/// every coordinate to its exact scalar solution, clamped at 0. Every sweep
/// is accepted (the updates confine the iterates to the box 0 <= n_k <=
/// required_k / slope_k, so they cannot diverge) and convergence is judged
/// by the complementarity norm, which has no boundary floor.
///
/// Damping is per coordinate and sign-based. Strongly coupled pairs move in
/// two distinct patterns: a seesaw, where a coordinate alternately
/// overshoots and recedes, and a scissor, where one coordinate climbs
/// monotonically while its partner sinks through a locally expansive
/// region toward a distant solution. Halving a coordinate's step whenever
/// its update reverses direction decays the seesaw, while leaving
/// monotone runs at full speed keeps the scissor transit short; a global
/// norm-triggered damping would throttle exactly those transits.
/// `stalled` is the non-convergence report of the Newton attempt,
/// propagated when the sweep budget runs out.
fn solve_by_coordinate_sweeps(
    design: &BasketDesign,
    required: &[f64],
    start: &[f64],
    stalled: Error,
) -> Result<(Vec<f64>, usize)> {
    let dim = design.k();
    // Precision added per enrolled patient, strictly positive by design
    // validation.
    let slopes: Vec<f64> =
        (0..dim).map(|k| design.subtrial(k).data_precision(1.0)).collect();
    let mut x: Vec<f64> = start.iter().map(|&v| v.max(0.0)).collect();
    let mut damping = vec![1.0_f64; dim];
    let mut previous_step = vec![0.0_f64; dim];
    for sweep in 1..=MAX_SWEEP_ROUNDS {
        for k in 0..dim {
            let res = borrowing_residuals(design, required, &x);
            let exact = (x[k] - res[k] / slopes[k]).max(0.0);
            let step = exact - x[k];
            if step * previous_step[k] < 0.0 {
                damping[k] = (0.5 * damping[k]).max(1.0 / 64.0);
            } else {
                damping[k] = (2.0 * damping[k]).min(1.0);
            }
            previous_step[k] = step;
            // The boundary is a safe landing taken exactly, so clamped
            // components end at crisp zeros; damping tempers interior
            // moves only.
            x[k] = if exact == 0.0 { 0.0 } else { x[k] + damping[k] * step };
        }
        if complementarity_norm(design, required, &x) < PRECISION_TOLERANCE {
            return Ok((x, sweep));
        }
    }
    Err(stalled)
}

/// Infinity norm of the complementarity residuals at x: a positive
/// coordinate must meet its constraint exactly, a coordinate at 0 only
/// counts its shortfall.
fn complementarity_norm(design: &BasketDesign, required: &[f64], x: &[f64]) -> f64 {
    let res = borrowing_residuals(design, required, x);
    x.iter()
        .zip(&res)
        .map(|(&n, &r)| if n > 0.0 { r.abs() } else { (-r).max(0.0) })
        .fold(0.0, f64::max)
}

fn finish_borrowing_solution(
    design: &BasketDesign,
    required: &[f64],
    n_fractional: Vec<f64>,
    iterations: usize,
) -> Result<SampleSizeSolution> {
    let raw = borrowing_residuals(design, required, &n_fractional);
    let residuals: Vec<f64> = n_fractional
        .iter()
        .zip(&raw)
        .map(|(&n, &r)| if n > 0.0 { r } else { r.min(0.0) })
        .collect();
    let prior_sufficient: Vec<bool> = n_fractional.iter().map(|&n| n == 0.0).collect();
    let n_integer = ceil_sizes(&n_fractional);
    let converged = residuals.iter().all(|r| r.abs() < PRECISION_TOLERANCE);
    Ok(SampleSizeSolution {
        n_fractional,
        n_integer,
        residuals,
        iterations,
        converged,
        mode: SolveMode::Borrowing,
        prior_sufficient,
    })
}

/// Damped Newton iteration for a square nonlinear system.
///
/// The Jacobian is formed by central finite differences with per-coordinate
/// step h = max(1e-6, 1e-6 |x_j|); steps are halved (up to 30 times) until
/// the residual infinity norm decreases, and iterates are projected onto
/// the nonnegative orthant. Difference probes can evaluate `f` slightly
/// below 0 in single coordinates, so `f` must tolerate that neighborhood.
/// A singular Jacobian triggers one perturb-and-retry before giving up.
///
/// Returns the solution and the number of Newton steps taken, or a
/// non-convergence error carrying the last iterate and its residuals.
pub fn solve_newton<F>(f: F, x0: &[f64], tol: f64, max_iter: usize) -> Result<(Vec<f64>, usize)>
where
    F: Fn(&[f64]) -> Vec<f64>,
{
    let dim = x0.len();
    let mut x: Vec<f64> = x0.iter().map(|&v| v.max(0.0)).collect();
    let mut fx = f(&x);
    if fx.len() != dim {
        return Err(Error::Domain(format!(
            "solve_newton: residual has dimension {}, expected {dim}",
            fx.len()
        )));
    }
    let mut norm = inf_norm(&fx);
    let mut perturbed = false;
    let mut iteration = 0;
    while iteration <= max_iter {
        if norm < tol {
            return Ok((x, iteration));
        }
        if iteration == max_iter {
            break;
        }
        let jacobian = fd_jacobian(&f, &x);
        let negated: Vec<f64> = fx.iter().map(|v| -v).collect();
        let step = match solve_linear(jacobian, negated) {
            Some(step) => step,
            None => {
                if perturbed {
                    return Err(non_convergence(iteration, x, fx, norm));
                }
                // One nudge off the degenerate point, then a fresh attempt.
                perturbed = true;
                for v in x.iter_mut() {
                    *v += 1e-8 * (1.0 + v.abs());
                }
                fx = f(&x);
                norm = inf_norm(&fx);
                continue;
            }
        };
        let mut accepted = false;
        let mut scale = 1.0;
        for _ in 0..=30 {
            let candidate: Vec<f64> = x
                .iter()
                .zip(&step)
                .map(|(&xi, &si)| (xi + scale * si).max(0.0))
                .collect();
            let candidate_fx = f(&candidate);
            let candidate_norm = inf_norm(&candidate_fx);
            if candidate_norm < norm {
                x = candidate;
                fx = candidate_fx;
                norm = candidate_norm;
                accepted = true;
                break;
            }
            scale *= 0.5;
        }
        iteration += 1;
        if !accepted {
            return Err(non_convergence(iteration, x, fx, norm));
        }
    }
    Err(non_convergence(max_iter, x, fx, norm))
}

fn non_convergence(iterations: usize, x: Vec<f64>, fx: Vec<f64>, norm: f64) -> Error {
    Error::NonConvergence {
        iterations,
        last_iterate: x,
        residuals: fx,
        max_residual: norm,
    }
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |acc: f64, &x| acc.max(x.abs()))
}

fn fd_jacobian<F>(f: &F, x: &[f64]) -> Vec<Vec<f64>>
where
    F: Fn(&[f64]) -> Vec<f64>,
{
    let dim = x.len();
    let mut jacobian = vec![vec![0.0; dim]; dim];
    let mut probe = x.to_vec();
    for j in 0..dim {
        let h = 1e-6_f64.max(1e-6 * x[j].abs());
        probe[j] = x[j] + h;
        let plus = f(&probe);
        probe[j] = x[j] - h;
        let minus = f(&probe);
        probe[j] = x[j];
        for i in 0..dim {
            jacobian[i][j] = (plus[i] - minus[i]) / (2.0 * h);
        }
    }
    jacobian
}

/// Gaussian elimination with partial pivoting. Returns None when a pivot is
/// negligible relative to the largest matrix entry.
fn solve_linear(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let dim = b.len();
    let scale = a
        .iter()
        .flat_map(|row| row.iter())
        .fold(0.0f64, |acc, &v| acc.max(v.abs()));
    if scale == 0.0 || !scale.is_finite() {
        return None;
    }
    for col in 0..dim {
        let pivot_row = (col..dim).max_by(|&i, &j| {
            a[i][col]
                .abs()
                .partial_cmp(&a[j][col].abs())
                .unwrap_or(std::cmp::Ordering::Equal)
        })?;
        if a[pivot_row][col].abs() < 1e-14 * scale {
            return None;
        }
        a.swap(col, pivot_row);
        b.swap(col, pivot_row);
        for row in (col + 1)..dim {
            let factor = a[row][col] / a[col][col];
            if factor == 0.0 {
                continue;
            }
            for j in col..dim {
                a[row][j] -= factor * a[col][j];
            }
            b[row] -= factor * b[col];
        }
    }
    let mut solution = vec![0.0; dim];
    for col in (0..dim).rev() {
        let mut value = b[col];
        for j in (col + 1)..dim {
            value -= a[col][j] * solution[j];
        }
        solution[col] = value / a[col][col];
    }
    Some(solution)
}

#[cfg(test)]
// Oracle fixtures keep every digit their generator printed.
#[allow(clippy::excessive_precision)]
mod tests {
    use super::*;
    use crate::commensurate::{SubtrialDesign, WeightMatrix};
    use crate::stats::GammaMixtureHyper;
    use approx::assert_abs_diff_eq;

    fn paper_hyper() -> GammaMixtureHyper {
        GammaMixtureHyper::new(1.1, 1.1, 54.0, 3.0).unwrap()
    }

    fn oacs_design() -> BasketDesign {
        let subtrials = vec![
            SubtrialDesign::new(6.177, 0.5, 0.0, 100.0).unwrap(),
            SubtrialDesign::new(5.134, 0.6, 0.0, 100.0).unwrap(),
            SubtrialDesign::new(5.134, 0.6, 0.0, 100.0).unwrap(),
        ];
        let weights = WeightMatrix::new(vec![
            vec![0.0, 0.239, 0.417],
            vec![0.239, 0.0, 0.145],
            vec![0.417, 0.145, 0.0],
        ])
        .unwrap();
        BasketDesign::new(subtrials, weights, paper_hyper(), 0.05).unwrap()
    }

    fn oacs_spec() -> DecisionSpec {
        DecisionSpec::new(0.95, vec![0.90, 0.80, 0.80], 2.3, Direction::GreaterIsBetter).unwrap()
    }

    fn summit_design() -> BasketDesign {
        let means = [-0.489, 0.226, -0.181, 0.293, 0.329, -0.275, -0.136];
        let sds = [0.587, 0.345, 0.380, 0.347, 0.344, 0.392, 0.392];
        let subtrials = sds
            .iter()
            .map(|&sd| SubtrialDesign::new(sd * sd, 0.5, 0.0, 100.0).unwrap())
            .collect();
        let weights = WeightMatrix::from_hellinger(&means, &sds).unwrap();
        BasketDesign::new(subtrials, weights, paper_hyper(), 0.05).unwrap()
    }

    fn summit_spec() -> DecisionSpec {
        DecisionSpec::new(0.95, vec![0.80; 7], -0.40, Direction::SmallerIsBetter).unwrap()
    }

    fn homoscedastic_design(sigma2: f64) -> BasketDesign {
        let subtrials = (0..7)
            .map(|_| SubtrialDesign::new(sigma2, 0.5, 0.0, 100.0).unwrap())
            .collect();
        let weights = WeightMatrix::new(vec![vec![0.0; 7]; 7]).unwrap();
        BasketDesign::new(subtrials, weights, paper_hyper(), 0.05).unwrap()
    }

    #[test]
    fn decision_spec_validates_thresholds_and_margin_sign() {
        assert!(DecisionSpec::new(0.5, vec![0.8], 1.0, Direction::GreaterIsBetter).is_err());
        assert!(DecisionSpec::new(1.0, vec![0.8], 1.0, Direction::GreaterIsBetter).is_err());
        assert!(DecisionSpec::new(0.95, vec![0.5], 1.0, Direction::GreaterIsBetter).is_err());
        assert!(DecisionSpec::new(0.95, vec![], 1.0, Direction::GreaterIsBetter).is_err());
        assert!(DecisionSpec::new(0.95, vec![0.8], 0.0, Direction::GreaterIsBetter).is_err());
        assert!(DecisionSpec::new(0.95, vec![0.8], -0.4, Direction::GreaterIsBetter).is_err());
        assert!(DecisionSpec::new(0.95, vec![0.8], 0.4, Direction::SmallerIsBetter).is_err());
        assert!(DecisionSpec::new(0.95, vec![0.8], -0.4, Direction::SmallerIsBetter).is_ok());
        assert!("sideways".parse::<Direction>().is_err());
        assert_eq!("greater_is_better".parse::<Direction>().unwrap(), Direction::GreaterIsBetter);
    }

    #[test]
    fn required_precision_matches_direct_arithmetic() {
        // ((z_0.95 + z_0.80) / 0.4)^2 and ((z_0.95 + z_0.90) / 2.3)^2 from
        // the quantile oracle.
        let spec =
            DecisionSpec::new(0.95, vec![0.80], -0.4, Direction::SmallerIsBetter).unwrap();
        assert_abs_diff_eq!(required_precision(&spec)[0], 38.640982700123536, epsilon = 1e-9);
        let spec = DecisionSpec::new(0.95, vec![0.90], 2.3, Direction::GreaterIsBetter).unwrap();
        assert_abs_diff_eq!(required_precision(&spec)[0], 1.6188747354759876, epsilon = 1e-12);
    }

    #[test]
    fn required_precision_quarters_when_margin_doubles() {
        let narrow = DecisionSpec::new(0.95, vec![0.80], 1.1, Direction::GreaterIsBetter).unwrap();
        let wide = DecisionSpec::new(0.95, vec![0.80], 2.2, Direction::GreaterIsBetter).unwrap();
        let ratio = required_precision(&narrow)[0] / required_precision(&wide)[0];
        assert_abs_diff_eq!(ratio, 4.0, epsilon = 1e-12);
    }

    #[test]
    fn no_borrowing_reproduces_reference_sizes() {
        let solution = sample_size_no_borrowing(&oacs_design(), &oacs_spec()).unwrap();
        let expected = [39.752076964140699, 24.78706697321163, 24.78706697321163];
        for (n, e) in solution.n_fractional.iter().zip(expected) {
            assert_abs_diff_eq!(*n, e, epsilon = 1e-9);
        }
        assert_eq!(solution.n_integer, vec![40, 25, 25]);
        assert_eq!(solution.mode, SolveMode::NoBorrowing);
        assert!(solution.converged);
        assert!(solution.prior_sufficient.iter().all(|&f| !f));
        for r in &solution.residuals {
            assert!(r.abs() < 1e-12);
        }

        let solution = sample_size_no_borrowing(&summit_design(), &summit_spec()).unwrap();
        let expected = [
            53.244156311995454,
            18.39221086352881,
            22.313255607591351,
            18.606071983756696,
            18.28574387520727,
            23.744765302527131,
            23.744765302527131,
        ];
        for (n, e) in solution.n_fractional.iter().zip(expected) {
            assert_abs_diff_eq!(*n, e, epsilon = 1e-9);
        }
    }

    #[test]
    fn no_borrowing_homoscedastic_sizes_are_all_equal() {
        let spec = summit_spec();
        let solution = sample_size_no_borrowing(&homoscedastic_design(0.3), &spec).unwrap();
        for &n in &solution.n_fractional {
            assert_abs_diff_eq!(n, 46.357179240148234, epsilon = 1e-9);
        }
    }

    #[test]
    fn no_borrowing_clamps_when_prior_is_already_sufficient() {
        let subtrials = vec![
            SubtrialDesign::new(6.177, 0.5, 0.0, 0.5).unwrap(),
            SubtrialDesign::new(5.134, 0.6, 0.0, 100.0).unwrap(),
        ];
        let weights = WeightMatrix::new(vec![vec![0.0, 0.2], vec![0.2, 0.0]]).unwrap();
        let design = BasketDesign::new(subtrials, weights, paper_hyper(), 0.05).unwrap();
        let spec =
            DecisionSpec::new(0.95, vec![0.90, 0.80], 2.3, Direction::GreaterIsBetter).unwrap();
        let solution = sample_size_no_borrowing(&design, &spec).unwrap();
        assert_eq!(solution.n_fractional[0], 0.0);
        assert_eq!(solution.n_integer[0], 0);
        assert!(solution.prior_sufficient[0]);
        assert!(!solution.prior_sufficient[1]);
        assert!(solution.converged);
    }

    #[test]
    fn borrowing_reproduces_oacs_reference_sizes() {
        let solution = sample_size_borrowing(&oacs_design(), &oacs_spec()).unwrap();
        let expected = [33.376216540141293, 11.930617905191006, 18.137422816656297];
        for (n, e) in solution.n_fractional.iter().zip(expected) {
            assert_abs_diff_eq!(*n, e, epsilon = 1e-6);
        }
        assert!(solution.converged);
        assert_eq!(solution.mode, SolveMode::Borrowing);
        for r in &solution.residuals {
            assert!(r.abs() < PRECISION_TOLERANCE);
        }
        assert!(solution.iterations > 0 && solution.iterations < 30);
    }

    #[test]
    fn borrowing_reproduces_summit_reference_sizes() {
        let solution = sample_size_borrowing(&summit_design(), &summit_spec()).unwrap();
        let expected = [
            52.000543660020192,
            17.301442792136843,
            20.545038835983529,
            17.031706182470874,
            17.054742945856948,
            22.496529620799638,
            22.01615791559524,
        ];
        for (n, e) in solution.n_fractional.iter().zip(expected) {
            assert_abs_diff_eq!(*n, e, epsilon = 1e-6);
        }
    }

    #[test]
    fn borrowing_with_full_commensurability_shrinks_sizes_substantially() {
        let spec = summit_spec();
        let solution = sample_size_borrowing(&homoscedastic_design(0.3), &spec).unwrap();
        for &n in &solution.n_fractional {
            assert_abs_diff_eq!(n, 8.8554711955105017, epsilon = 1e-6);
        }
        // The symmetric system has an exactly symmetric solution.
        let spread = solution
            .n_fractional
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &n| (lo.min(n), hi.max(n)));
        assert!(spread.1 - spread.0 < 1e-9);
    }

    #[test]
    fn borrowing_subtracts_nothing_without_complementary_information() {
        // With w pinned at 1 the penalty dominates xi^2, so borrowing buys
        // almost nothing and sizes stay close to the closed form.
        let subtrials = vec![
            SubtrialDesign::new(0.3, 0.5, 0.0, 100.0).unwrap(),
            SubtrialDesign::new(0.3, 0.5, 0.0, 100.0).unwrap(),
        ];
        let weights = WeightMatrix::new(vec![vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        let design = BasketDesign::new(subtrials, weights, paper_hyper(), 0.05).unwrap();
        let spec =
            DecisionSpec::new(0.95, vec![0.80, 0.80], -0.4, Direction::SmallerIsBetter).unwrap();
        let with = sample_size_borrowing(&design, &spec).unwrap();
        let without = sample_size_no_borrowing(&design, &spec).unwrap();
        for (w, wo) in with.n_fractional.iter().zip(&without.n_fractional) {
            assert!(w <= wo);
            // xi^2 >= 11 against s02 = 100 still lowers the size a little.
            assert!(wo - w < 1.0);
        }
    }

    #[test]
    fn borrowing_clamps_components_whose_constraint_holds_at_zero() {
        // Both subtrials carry tight complementary priors (s02 = 1), so the
        // collective prior alone meets the modest precision requirement and
        // both sizes clamp at 0.
        let subtrials = vec![
            SubtrialDesign::new(1.0, 0.5, 0.0, 1.0).unwrap(),
            SubtrialDesign::new(1.0, 0.5, 0.0, 1.0).unwrap(),
        ];
        let weights = WeightMatrix::new(vec![vec![0.0, 0.0], vec![0.0, 0.0]]).unwrap();
        let design = BasketDesign::new(subtrials, weights, paper_hyper(), 0.05).unwrap();
        let spec =
            DecisionSpec::new(0.95, vec![0.80, 0.80], 5.0, Direction::GreaterIsBetter).unwrap();
        let solution = sample_size_borrowing(&design, &spec).unwrap();
        assert_eq!(solution.n_fractional, vec![0.0, 0.0]);
        assert!(solution.prior_sufficient.iter().all(|&f| f));
        assert!(solution.converged);
        assert!(solution.residuals.iter().all(|&r| r == 0.0));
    }

    #[test]
    fn borrowing_resolves_mixed_free_and_clamped_components() {
        // Subtrial 0 carries a tight prior (s02 = 0.5): its posterior makes
        // subtrial 1's collective prior sufficient on its own, so n_1
        // clamps while n_0 still needs data.
        let subtrials = vec![
            SubtrialDesign::new(1.0, 0.5, 0.0, 0.5).unwrap(),
            SubtrialDesign::new(1.0, 0.5, 0.0, 100.0).unwrap(),
        ];
        let weights = WeightMatrix::new(vec![vec![0.0, 0.0], vec![0.0, 0.0]]).unwrap();
        let design = BasketDesign::new(subtrials, weights, paper_hyper(), 0.05).unwrap();
        let spec =
            DecisionSpec::new(0.95, vec![0.80, 0.80], 5.0, Direction::GreaterIsBetter).unwrap();
        let solution = sample_size_borrowing(&design, &spec).unwrap();
        assert!(solution.converged);
        assert_eq!(solution.n_fractional[1], 0.0);
        assert!(solution.prior_sufficient[1]);
        assert!(solution.n_fractional[0] > 0.0);
        assert!(!solution.prior_sufficient[0]);
        // The free component satisfies its equation and the clamped one
        // holds with slack.
        let required = required_precision(&spec);
        let raw = borrowing_residuals(&design, &required, &solution.n_fractional);
        assert!(raw[0].abs() < PRECISION_TOLERANCE);
        assert!(raw[1] > 0.0);
    }

    #[test]
    fn newton_solves_affine_systems_in_one_step() {
        let a = [[4.0, 1.0, 0.0], [1.0, 3.0, 1.0], [0.0, 1.0, 5.0]];
        let x_true = [0.1, 0.6, 0.48];
        let b: Vec<f64> = a
            .iter()
            .map(|row| row.iter().zip(&x_true).map(|(aij, xj)| aij * xj).sum())
            .collect();
        let f = |x: &[f64]| {
            a.iter()
                .zip(&b)
                .map(|(row, bi)| row.iter().zip(x).map(|(aij, xj)| aij * xj).sum::<f64>() - bi)
                .collect::<Vec<f64>>()
        };
        // At the production tolerance one finite-difference Newton step
        // suffices; the difference quotients carry O(1e-10) rounding noise,
        // so demanding much tighter residuals would need a second step.
        let (x, iterations) = solve_newton(f, &[1.0, 1.0, 1.0], PRECISION_TOLERANCE, 50).unwrap();
        assert_eq!(iterations, 1);
        for (got, want) in x.iter().zip(&x_true) {
            assert_abs_diff_eq!(*got, *want, epsilon = 1e-8);
        }
    }

    #[test]
    fn newton_on_single_subtrial_matches_the_closed_form() {
        // One uncoupled equation: prior precision plus data precision must
        // reach the requirement, which is the no-borrowing closed form.
        let sub = SubtrialDesign::new(6.177, 0.5, 0.0, 100.0).unwrap();
        let spec = DecisionSpec::new(0.95, vec![0.90], 2.3, Direction::GreaterIsBetter).unwrap();
        let required = required_precision(&spec)[0];
        let f = |x: &[f64]| vec![1.0 / sub.s02 + sub.data_precision(x[0].max(0.0)) - required];
        let (x, _) = solve_newton(f, &[1.0], 1e-12, 100).unwrap();
        assert_abs_diff_eq!(x[0], 39.752076964140699, epsilon = 1e-6);
    }

    #[test]
    fn newton_reports_non_convergence_with_diagnostics() {
        // x^2 + 1 has no real root; the iteration must stall and report.
        let f = |x: &[f64]| vec![x[0] * x[0] + 1.0];
        let err = solve_newton(f, &[3.0], 1e-10, 25).unwrap_err();
        match err {
            Error::NonConvergence { iterations, last_iterate, residuals, max_residual } => {
                assert!(iterations <= 25);
                assert_eq!(last_iterate.len(), 1);
                assert_eq!(residuals.len(), 1);
                assert!(max_residual >= 1.0);
            }
            other => panic!("expected NonConvergence, got {other:?}"),
        }
    }

    #[test]
    fn newton_recovers_from_a_singular_jacobian_by_perturbing() {
        // At the start point x = (1, 1) both residual rows are identical,
        // so the Jacobian is singular; the perturbation breaks the tie.
        let f = |x: &[f64]| {
            vec![
                x[0] * x[0] - x[1],
                x[0] * x[0] - x[1] + (x[0] - 1.0) * (x[1] - 1.0) * 0.5,
            ]
        };
        let (x, _) = solve_newton(f, &[1.0, 1.0], 1e-10, 100).unwrap();
        assert_abs_diff_eq!(x[0] * x[0], x[1], epsilon = 1e-8);
    }

    #[test]
    fn newton_starting_points_agree_on_reference_designs() {
        let design = oacs_design();
        let spec = oacs_spec();
        let required = required_precision(&spec);
        let from_closed_form = sample_size_borrowing(&design, &spec).unwrap();
        let f = |x: &[f64]| borrowing_residuals(&design, &required, x);
        let (from_ones, _) =
            solve_newton(f, &[1.0, 1.0, 1.0], PRECISION_TOLERANCE, 200).unwrap();
        for (a, b) in from_closed_form.n_fractional.iter().zip(&from_ones) {
            assert_abs_diff_eq!(*a, *b, epsilon = 1e-6);
        }
    }

    #[test]
    fn zeta_length_must_match_the_design() {
        let spec =
            DecisionSpec::new(0.95, vec![0.90, 0.80], 2.3, Direction::GreaterIsBetter).unwrap();
        let err = sample_size_no_borrowing(&oacs_design(), &spec).unwrap_err();
        assert!(err.to_string().contains("zeta"));
        let err = sample_size_borrowing(&oacs_design(), &spec).unwrap_err();
        assert!(err.to_string().contains("zeta"));
    }
}

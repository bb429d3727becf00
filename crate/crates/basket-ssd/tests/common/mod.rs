//! Shared reference designs for the integration suites.

#![allow(dead_code)]

use basket_ssd::{
    BasketDesign, DecisionSpec, Direction, GammaMixtureHyper, SubtrialDesign, WeightMatrix,
};
use std::path::PathBuf;

/// Mixture hyperparameters used by all reference designs: a heavily
/// discounting component and a strongly retaining one.
pub fn paper_hyper() -> GammaMixtureHyper {
    GammaMixtureHyper::new(1.1, 1.1, 54.0, 3.0).unwrap()
}

/// Three-subtrial reference design with an explicit weight matrix.
pub fn oacs_design() -> BasketDesign {
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

pub fn oacs_spec() -> DecisionSpec {
    DecisionSpec::new(0.95, vec![0.90, 0.80, 0.80], 2.3, Direction::GreaterIsBetter).unwrap()
}

pub fn summit_arm_means() -> [f64; 7] {
    [-0.489, 0.226, -0.181, 0.293, 0.329, -0.275, -0.136]
}

pub fn summit_arm_sds() -> [f64; 7] {
    [0.587, 0.345, 0.380, 0.347, 0.344, 0.392, 0.392]
}

/// Seven-subtrial reference design with Hellinger-derived weights.
pub fn summit_design() -> BasketDesign {
    let means = summit_arm_means();
    let sds = summit_arm_sds();
    let subtrials = sds
        .iter()
        .map(|&sd| SubtrialDesign::new(sd * sd, 0.5, 0.0, 100.0).unwrap())
        .collect();
    let weights = WeightMatrix::from_hellinger(&means, &sds).unwrap();
    BasketDesign::new(subtrials, weights, paper_hyper(), 0.05).unwrap()
}

pub fn summit_spec() -> DecisionSpec {
    DecisionSpec::new(0.95, vec![0.80; 7], -0.40, Direction::SmallerIsBetter).unwrap()
}

/// K identical subtrials with perfect pairwise commensurability (w = 0).
pub fn homoscedastic_design(k: usize, sigma2: f64) -> BasketDesign {
    let subtrials = (0..k)
        .map(|_| SubtrialDesign::new(sigma2, 0.5, 0.0, 100.0).unwrap())
        .collect();
    let weights = WeightMatrix::new(vec![vec![0.0; k]; k]).unwrap();
    BasketDesign::new(subtrials, weights, paper_hyper(), 0.05).unwrap()
}

pub fn margin_spec(k: usize) -> DecisionSpec {
    DecisionSpec::new(0.95, vec![0.80; k], -0.4, Direction::SmallerIsBetter).unwrap()
}

/// Path to a file shipped at the repository root.
pub fn repo_path(relative: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..").join(relative)
}

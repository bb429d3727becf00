//! Report rendering: human-readable tables plus machine-readable CSV and
//! JSON with stable headers.
//!
//! Tables round fractional sizes to one decimal and rates to three; CSV
//! and JSON carry full precision. CSV headers and JSON field names are
//! part of the tool's output contract and match the schema files shipped
//! under schemas/.

use serde::Serialize;

use crate::commensurate::{synthesis_weights, BasketDesign};
use crate::error::{Error, Result};
use crate::solver::{DecisionSpec, SampleSizeSolution};
use crate::stats::gamma_mixture_mean_and_interval;

/// Output encoding of a report.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Table,
    Json,
    Csv,
}

impl Format {
    pub fn as_str(&self) -> &'static str {
        match self {
            Format::Table => "table",
            Format::Json => "json",
            Format::Csv => "csv",
        }
    }
}

impl std::str::FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "table" => Ok(Format::Table),
            "json" => Ok(Format::Json),
            "csv" => Ok(Format::Csv),
            other => Err(Error::Config(format!(
                "format: expected \"table\", \"json\", or \"csv\", got \"{other}\""
            ))),
        }
    }
}

fn to_csv<S: Serialize>(rows: &[S]) -> String {
    let mut writer = csv::Writer::from_writer(Vec::new());
    for row in rows {
        writer.serialize(row).expect("csv rows are flat structs");
    }
    let bytes = writer.into_inner().expect("vec writer never fails");
    String::from_utf8(bytes).expect("csv output is utf-8")
}

fn to_json<S: Serialize>(value: &S) -> String {
    let mut text = serde_json::to_string_pretty(value).expect("report structs always serialize");
    text.push('\n');
    text
}

#[derive(Serialize)]
struct SsdRow<'a> {
    subtrial: usize,
    label: &'a str,
    mode: &'a str,
    n_fractional: f64,
    n_integer: u64,
    residual: f64,
    prior_sufficient: bool,
    iterations: usize,
    converged: bool,
}

#[derive(Serialize)]
struct SsdSubtrialOut<'a> {
    subtrial: usize,
    label: &'a str,
    n_fractional: f64,
    n_integer: u64,
    residual: f64,
    prior_sufficient: bool,
}

#[derive(Serialize)]
struct SsdOut<'a> {
    mode: &'a str,
    converged: bool,
    iterations: usize,
    subtrials: Vec<SsdSubtrialOut<'a>>,
    total_fractional: f64,
    total_integer: u64,
}

fn ssd_out<'a>(labels: &'a [String], solution: &SampleSizeSolution) -> SsdOut<'a> {
    let subtrials = (0..solution.n_fractional.len())
        .map(|i| SsdSubtrialOut {
            subtrial: i + 1,
            label: &labels[i],
            n_fractional: solution.n_fractional[i],
            n_integer: solution.n_integer[i],
            residual: solution.residuals[i],
            prior_sufficient: solution.prior_sufficient[i],
        })
        .collect();
    SsdOut {
        mode: solution.mode.as_str(),
        converged: solution.converged,
        iterations: solution.iterations,
        subtrials,
        total_fractional: solution.total_fractional(),
        total_integer: solution.n_integer.iter().sum(),
    }
}

fn label_width(labels: &[String]) -> usize {
    labels.iter().map(|l| l.len()).max().unwrap_or(0).max("label".len())
}

fn ssd_table(labels: &[String], solution: &SampleSizeSolution) -> String {
    let w = label_width(labels);
    let mut out = format!("sample sizes ({})\n", solution.mode.as_str());
    out.push_str(&format!(
        "{:>8}  {:<w$}  {:>8}  {:>9}  {:>10}  {}\n",
        "subtrial", "label", "n", "n_integer", "residual", "prior_sufficient"
    ));
    for i in 0..solution.n_fractional.len() {
        out.push_str(&format!(
            "{:>8}  {:<w$}  {:>8.1}  {:>9}  {:>10.1e}  {}\n",
            i + 1,
            labels[i],
            solution.n_fractional[i],
            solution.n_integer[i],
            solution.residuals[i],
            if solution.prior_sufficient[i] { "yes" } else { "no" }
        ));
    }
    let total_integer: u64 = solution.n_integer.iter().sum();
    out.push_str(&format!(
        "{:>8}  {:<w$}  {:>8.1}  {:>9}\n",
        "total",
        "",
        solution.total_fractional(),
        total_integer
    ));
    out.push_str(&format!(
        "converged: {} after {} iteration(s)\n",
        if solution.converged { "yes" } else { "no" },
        solution.iterations
    ));
    out
}

/// Renders one sample-size solution.
pub fn render_ssd(labels: &[String], solution: &SampleSizeSolution, format: Format) -> String {
    match format {
        Format::Table => ssd_table(labels, solution),
        Format::Json => to_json(&ssd_out(labels, solution)),
        Format::Csv => {
            let rows: Vec<SsdRow> = (0..solution.n_fractional.len())
                .map(|i| SsdRow {
                    subtrial: i + 1,
                    label: &labels[i],
                    mode: solution.mode.as_str(),
                    n_fractional: solution.n_fractional[i],
                    n_integer: solution.n_integer[i],
                    residual: solution.residuals[i],
                    prior_sufficient: solution.prior_sufficient[i],
                    iterations: solution.iterations,
                    converged: solution.converged,
                })
                .collect();
            to_csv(&rows)
        }
    }
}

#[derive(Serialize)]
struct WeightRow {
    target: usize,
    source: usize,
    w: f64,
    p: f64,
}

#[derive(Serialize)]
struct WeightsOut<'a> {
    labels: &'a [String],
    w: Vec<Vec<f64>>,
    synthesis: Vec<WeightRow>,
}

fn weight_rows(design: &BasketDesign) -> Result<Vec<WeightRow>> {
    let k = design.k();
    let mut rows = Vec::with_capacity(k * (k - 1));
    for target in 0..k {
        // Synthesis weights come back compacted over the K-1 sources.
        let p = synthesis_weights(design.weights(), design.c0(), target)?;
        for (j, source) in (0..k).filter(|&q| q != target).enumerate() {
            rows.push(WeightRow {
                target: target + 1,
                source: source + 1,
                w: design.weights().get(source, target),
                p: p[j],
            });
        }
    }
    Ok(rows)
}

fn weights_table(labels: &[String], design: &BasketDesign) -> Result<String> {
    let k = design.k();
    let w = label_width(labels);
    let mut out = String::from("weight matrix (w, symmetric, zero diagonal)\n");
    out.push_str(&format!("{:<w$}", ""));
    for label in labels {
        out.push_str(&format!("  {label:>7}"));
    }
    out.push('\n');
    for q in 0..k {
        out.push_str(&format!("{:<w$}", labels[q]));
        for t in 0..k {
            out.push_str(&format!("  {:>7.3}", design.weights().get(q, t)));
        }
        out.push('\n');
    }
    out.push_str("\nsynthesis weights (p, per target subtrial)\n");
    out.push_str(&format!("{:>6}  {:>6}  {:>7}  {:>7}\n", "target", "source", "w", "p"));
    for row in weight_rows(design)? {
        out.push_str(&format!(
            "{:>6}  {:>6}  {:>7.3}  {:>7.3}\n",
            row.target, row.source, row.w, row.p
        ));
    }
    Ok(out)
}

/// Renders the pairwise weight matrix and the synthesis weights each
/// subtrial assigns to the others.
pub fn render_weights(labels: &[String], design: &BasketDesign, format: Format) -> Result<String> {
    match format {
        Format::Table => weights_table(labels, design),
        Format::Json => {
            let out = WeightsOut {
                labels,
                w: design.weights().rows().to_vec(),
                synthesis: weight_rows(design)?,
            };
            Ok(to_json(&out))
        }
        Format::Csv => Ok(to_csv(&weight_rows(design)?)),
    }
}

/// One long-format row of simulated operating characteristics.
#[derive(Debug, Clone, Serialize)]
pub struct SimRow {
    pub scenario: String,
    pub model: String,
    pub subtrial: usize,
    pub n: u64,
    pub rate_efficacious: f64,
    pub rate_futile: f64,
    pub rate_inconclusive: f64,
    pub overall_fp: Option<f64>,
    pub seed: u64,
    pub replicates: u64,
}

fn simulate_table(rows: &[SimRow]) -> String {
    let mut out = String::new();
    for (i, row) in rows.iter().enumerate() {
        let this = (row.scenario.as_str(), row.model.as_str());
        let starts_group = i == 0 || (rows[i - 1].scenario.as_str(), rows[i - 1].model.as_str()) != this;
        let ends_group =
            i + 1 == rows.len() || (rows[i + 1].scenario.as_str(), rows[i + 1].model.as_str()) != this;
        if starts_group {
            if i > 0 {
                out.push('\n');
            }
            out.push_str(&format!(
                "scenario: {}  model: {}  replicates: {}  seed: {}\n",
                row.scenario, row.model, row.replicates, row.seed
            ));
            out.push_str(&format!(
                "{:>8}  {:>6}  {:>11}  {:>8}  {:>12}  {:>8}\n",
                "subtrial", "n", "efficacious", "futile", "inconclusive", "decisive"
            ));
        }
        out.push_str(&format!(
            "{:>8}  {:>6}  {:>11.3}  {:>8.3}  {:>12.3}  {:>8.3}\n",
            row.subtrial,
            row.n,
            row.rate_efficacious,
            row.rate_futile,
            row.rate_inconclusive,
            row.rate_efficacious + row.rate_futile
        ));
        if ends_group {
            if let Some(fp) = row.overall_fp {
                out.push_str(&format!("overall false positive: {fp:.3}\n"));
            }
        }
    }
    out
}

/// Renders simulated operating characteristics in long format.
pub fn render_simulate(rows: &[SimRow], format: Format) -> String {
    match format {
        Format::Table => simulate_table(rows),
        Format::Json => to_json(&rows),
        Format::Csv => to_csv(rows),
    }
}

#[derive(Serialize)]
struct PairPriorOut {
    q: usize,
    k: usize,
    w: f64,
    mean: f64,
    lower: f64,
    upper: f64,
}

fn pair_priors(design: &BasketDesign) -> Vec<PairPriorOut> {
    let k = design.k();
    let mut out = Vec::with_capacity(k * (k - 1) / 2);
    for q in 0..k {
        for t in (q + 1)..k {
            let w = design.weights().get(q, t);
            let (mean, lower, upper) = gamma_mixture_mean_and_interval(w, design.hyper(), 0.95)
                .expect("weights validated in [0, 1]");
            out.push(PairPriorOut { q: q + 1, k: t + 1, w, mean, lower, upper });
        }
    }
    out
}

#[derive(Serialize)]
struct DesignOut<'a> {
    label: &'a str,
    subtrials: Vec<DesignSubtrialOut<'a>>,
    c0: f64,
    hyper: HyperOut,
    decision: DecisionOut<'a>,
}

#[derive(Serialize)]
struct DesignSubtrialOut<'a> {
    subtrial: usize,
    label: &'a str,
    sigma2: f64,
    #[serde(rename = "R")]
    r: f64,
    m0: f64,
    s02: f64,
}

#[derive(Serialize)]
struct HyperOut {
    a1: f64,
    b1: f64,
    a2: f64,
    b2: f64,
}

#[derive(Serialize)]
struct DecisionOut<'a> {
    eta: f64,
    zeta: &'a [f64],
    delta: f64,
    direction: &'a str,
}

#[derive(Serialize)]
struct FullReportOut<'a> {
    design: DesignOut<'a>,
    weights: WeightsOut<'a>,
    commensurability_priors: Vec<PairPriorOut>,
    sizes: SizesOut<'a>,
}

#[derive(Serialize)]
struct SizesOut<'a> {
    borrowing: SsdOut<'a>,
    no_borrowing: SsdOut<'a>,
}

fn design_out<'a>(
    label: &'a str,
    labels: &'a [String],
    design: &BasketDesign,
    spec: &'a DecisionSpec,
) -> DesignOut<'a> {
    let subtrials = design
        .subtrials()
        .iter()
        .enumerate()
        .map(|(i, sub)| DesignSubtrialOut {
            subtrial: i + 1,
            label: &labels[i],
            sigma2: sub.sigma2,
            r: sub.r,
            m0: sub.m0,
            s02: sub.s02,
        })
        .collect();
    let hyper = design.hyper();
    DesignOut {
        label,
        subtrials,
        c0: design.c0(),
        hyper: HyperOut { a1: hyper.a1, b1: hyper.b1, a2: hyper.a2, b2: hyper.b2 },
        decision: DecisionOut {
            eta: spec.eta(),
            zeta: spec.zetas(),
            delta: spec.delta(),
            direction: spec.direction().as_str(),
        },
    }
}

/// Renders the combined design report: subtrial parameters, weights,
/// pairwise commensurability prior summaries, and sample sizes under both
/// borrowing modes. CSV has no natural single-table layout for this; the
/// per-section commands cover tabular export.
pub fn render_design_report(
    label: &str,
    labels: &[String],
    design: &BasketDesign,
    spec: &DecisionSpec,
    borrowing: &SampleSizeSolution,
    no_borrowing: &SampleSizeSolution,
    format: Format,
) -> Result<String> {
    match format {
        Format::Csv => Err(Error::Config(
            "report: csv output not supported; use the ssd, weights, or simulate commands".into(),
        )),
        Format::Json => {
            let out = FullReportOut {
                design: design_out(label, labels, design, spec),
                weights: WeightsOut {
                    labels,
                    w: design.weights().rows().to_vec(),
                    synthesis: weight_rows(design)?,
                },
                commensurability_priors: pair_priors(design),
                sizes: SizesOut {
                    borrowing: ssd_out(labels, borrowing),
                    no_borrowing: ssd_out(labels, no_borrowing),
                },
            };
            Ok(to_json(&out))
        }
        Format::Table => {
            let hyper = design.hyper();
            let mut out = format!("design: {label} (K = {} subtrials)\n", design.k());
            out.push_str(&format!(
                "hyper: Gamma({}, {}) with weight w, Gamma({}, {}) with weight 1 - w (rate parametrization)\n",
                hyper.a1, hyper.b1, hyper.a2, hyper.b2
            ));
            out.push_str(&format!("c0: {}\n", design.c0()));
            out.push_str(&format!(
                "decision: eta {}, delta {}, direction {}, zeta {:?}\n",
                spec.eta(),
                spec.delta(),
                spec.direction().as_str(),
                spec.zetas()
            ));
            let w = label_width(labels);
            out.push_str(&format!(
                "\n{:>8}  {:<w$}  {:>8}  {:>5}  {:>8}  {:>8}\n",
                "subtrial", "label", "sigma2", "R", "m0", "s02"
            ));
            for (i, sub) in design.subtrials().iter().enumerate() {
                out.push_str(&format!(
                    "{:>8}  {:<w$}  {:>8}  {:>5}  {:>8}  {:>8}\n",
                    i + 1,
                    labels[i],
                    sub.sigma2,
                    sub.r,
                    sub.m0,
                    sub.s02
                ));
            }
            out.push('\n');
            out.push_str(&weights_table(labels, design)?);
            out.push_str("\ncommensurability priors (mean and 95% interval per pair)\n");
            out.push_str(&format!(
                "{:>4}  {:>4}  {:>7}  {:>8}  {:>8}  {:>8}\n",
                "q", "k", "w", "mean", "lower", "upper"
            ));
            for pair in pair_priors(design) {
                out.push_str(&format!(
                    "{:>4}  {:>4}  {:>7.3}  {:>8.3}  {:>8.3}  {:>8.3}\n",
                    pair.q, pair.k, pair.w, pair.mean, pair.lower, pair.upper
                ));
            }
            out.push('\n');
            out.push_str(&ssd_table(labels, borrowing));
            out.push('\n');
            out.push_str(&ssd_table(labels, no_borrowing));
            Ok(out)
        }
    }
}

use std::io::Write;

use nalgebra::{Cholesky, DVector};
use serde::{Deserialize, Serialize};

use super::design::{check_finite, Design};
use super::model::{GamModel, GamSpec, Lambdas};
use super::FeatureTable;
use crate::{stats, Error, Result};

/// Scores within this distance of the best count as tied.
pub const TIE_TOLERANCE: f64 = 1e-9;

/// Average prediction over the rows of `table` with `feature` held at each grid value.
pub fn partial_dependence(model: &GamModel, table: &FeatureTable, feature: &str, grid: &[f64]) -> Result<Vec<f64>> {
    if grid.is_empty() {
        return Err(Error::invalid("partial dependence needs a non-empty grid"));
    }
    if model.smooth(feature).is_none() {
        return Err(Error::invalid(format!("model has no smooth for `{feature}`")));
    }
    grid.iter()
        .map(|&v| {
            let pred = model.predict(&table.with_constant(feature, v)?)?;
            Ok(stats::mean(&pred))
        })
        .collect()
}

/// `n` evenly spaced values covering the observed range of `feature`.
pub fn observed_grid(table: &FeatureTable, feature: &str, n: usize) -> Result<Vec<f64>> {
    if n == 0 {
        return Err(Error::invalid("grid size must be positive"));
    }
    let col = table.require(feature)?;
    let lo = col.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = col.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if n == 1 {
        return Ok(vec![(lo + hi) / 2.0]);
    }
    Ok((0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect())
}

pub fn write_pdp_csv<W: Write>(feature: &str, grid: &[f64], values: &[f64], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["feature", "grid_value", "pd_value"])?;
    for (g, v) in grid.iter().zip(values) {
        w.write_record([feature.to_owned(), g.to_string(), v.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// Candidate smoothing parameters for each term group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LambdaGrid {
    pub smooth: Vec<f64>,
    pub interaction: Vec<f64>,
}

impl LambdaGrid {
    pub fn log_spaced(lo: f64, hi: f64, n: usize) -> Result<Self> {
        if !(lo > 0.0 && hi >= lo && n >= 1) {
            return Err(Error::invalid(format!("invalid λ grid: {n} points on [{lo}, {hi}]")));
        }
        let values = if n == 1 {
            vec![lo]
        } else {
            let (a, b) = (lo.log10(), hi.log10());
            (0..n).map(|i| 10f64.powf(a + (b - a) * i as f64 / (n - 1) as f64)).collect()
        };
        Ok(LambdaGrid { smooth: values.clone(), interaction: values })
    }

    pub fn single(lambdas: Lambdas) -> Self {
        LambdaGrid { smooth: vec![lambdas.smooth], interaction: vec![lambdas.interaction] }
    }
}

impl Default for LambdaGrid {
    fn default() -> Self {
        LambdaGrid::log_spaced(1e-3, 1e4, 15).unwrap()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridScore {
    pub lambdas: Lambdas,
    /// Validation Pearson correlation; `None` when undefined for this point.
    pub score: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuneOutcome {
    pub best: Lambdas,
    pub validation_score: f64,
    pub scores: Vec<GridScore>,
}

/// Row indices of the training and validation parts of a table.
#[derive(Debug, Clone, Copy)]
pub struct TuneSplit<'a> {
    pub train: &'a [usize],
    pub validation: &'a [usize],
}

/// Fits on the training rows for every grid point and keeps the λ pair whose
/// predictions correlate best with the validation target. Near-ties go to the
/// larger smoothing parameter.
pub fn tune_lambda(
    table: &FeatureTable,
    target: &[f64],
    spec: &GamSpec,
    split: TuneSplit<'_>,
    grid: &LambdaGrid,
) -> Result<TuneOutcome> {
    check_finite(table, Some(target))?;
    if grid.smooth.is_empty() || grid.interaction.is_empty() {
        return Err(Error::invalid("λ grid is empty"));
    }
    if grid.smooth.iter().chain(&grid.interaction).any(|l| !(*l >= 0.0 && l.is_finite())) {
        return Err(Error::invalid("λ grid values must be finite and ≥ 0"));
    }
    let n = table.n_rows();
    if split.train.iter().chain(split.validation).any(|&r| r >= n) {
        return Err(Error::invalid("split index out of range"));
    }
    if split.train.iter().any(|r| split.validation.contains(r)) {
        return Err(Error::invalid("train and validation rows overlap"));
    }
    let y_val: Vec<f64> = split.validation.iter().map(|&r| target[r]).collect();
    if y_val.len() < 2 || stats::sample_variance(&y_val) == 0.0 {
        return Err(Error::degenerate("validation target has zero variance"));
    }
    let train = table.select_rows(split.train);
    let design = Design::build(&train, spec)?;
    let x = design.matrix(&train)?;
    let gram = x.tr_mul(&x);
    let y_train: Vec<f64> = split.train.iter().map(|&r| target[r]).collect();
    let rhs = x.tr_mul(&DVector::from_vec(y_train));
    let x_val = design.matrix(&table.select_rows(split.validation))?;

    let interaction_values: &[f64] =
        if design.has_interactions() { &grid.interaction } else { std::slice::from_ref(&spec.lambdas.interaction) };
    let mut scores = Vec::new();
    for &smooth in &grid.smooth {
        for &interaction in interaction_values {
            let lambdas = Lambdas { smooth, interaction };
            let score = Cholesky::new(&gram + design.penalty(lambdas)).and_then(|chol| {
                let pred = &x_val * chol.solve(&rhs);
                stats::pearson(pred.as_slice(), &y_val).ok()
            });
            scores.push(GridScore { lambdas, score });
        }
    }
    let top = scores
        .iter()
        .filter_map(|s| s.score)
        .fold(f64::NEG_INFINITY, f64::max);
    if top == f64::NEG_INFINITY {
        return Err(Error::degenerate("no λ grid point produced a defined validation correlation"));
    }
    let best = scores
        .iter()
        .filter(|s| s.score.is_some_and(|v| v >= top - TIE_TOLERANCE))
        .max_by(|a, b| {
            a.lambdas
                .smooth
                .total_cmp(&b.lambdas.smooth)
                .then(a.lambdas.interaction.total_cmp(&b.lambdas.interaction))
        })
        .unwrap();
    Ok(TuneOutcome { best: best.lambdas, validation_score: best.score.unwrap(), scores })
}

use std::collections::BTreeMap;

use nalgebra::{Cholesky, DVector};
use serde::{Deserialize, Serialize};

use super::basis::BSplineBasis;
use super::design::{check_finite, Design};
use super::FeatureTable;
use crate::{Error, Result};

/// Smoothing parameters shared by every main-effect smooth and every
/// interaction surface respectively.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Lambdas {
    pub smooth: f64,
    pub interaction: f64,
}

impl Default for Lambdas {
    fn default() -> Self {
        Lambdas { smooth: 1.0, interaction: 1.0 }
    }
}

impl Lambdas {
    fn validate(&self) -> Result<()> {
        if !(self.smooth >= 0.0 && self.interaction >= 0.0) || !self.smooth.is_finite() || !self.interaction.is_finite() {
            return Err(Error::invalid(format!("smoothing parameters must be finite and ≥ 0, got {self:?}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GamSpec {
    /// Basis dimension for every main-effect smooth without an override.
    pub basis_dim: usize,
    pub basis_dims: BTreeMap<String, usize>,
    /// Marginal basis dimension of each pairwise interaction surface.
    pub interaction_dim: usize,
    pub include_interactions: bool,
    pub lambdas: Lambdas,
}

impl Default for GamSpec {
    fn default() -> Self {
        GamSpec {
            basis_dim: 10,
            basis_dims: BTreeMap::new(),
            interaction_dim: 5,
            include_interactions: true,
            lambdas: Lambdas::default(),
        }
    }
}

impl GamSpec {
    pub fn basis_dim_for(&self, feature: &str) -> usize {
        self.basis_dims.get(feature).copied().unwrap_or(self.basis_dim)
    }

    pub fn additive() -> Self {
        GamSpec { include_interactions: false, ..GamSpec::default() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Link {
    #[default]
    Identity,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmoothTerm {
    pub feature_name: String,
    /// Boundary and interior knots, strictly increasing.
    pub knots: Vec<f64>,
    pub basis_dim: usize,
    pub coefficients: Vec<f64>,
    pub lambda: f64,
}

impl SmoothTerm {
    fn basis(&self) -> Result<BSplineBasis> {
        let b = BSplineBasis::from_breakpoints(self.knots.clone())?;
        if b.dim() != self.basis_dim || self.coefficients.len() != self.basis_dim {
            return Err(Error::invalid(format!(
                "smooth `{}`: knots, basis_dim and coefficients disagree",
                self.feature_name
            )));
        }
        Ok(b)
    }

    /// `f_j(x)` for this smooth.
    pub fn evaluate(&self, x: f64) -> Result<f64> {
        Ok(dot(&self.basis()?.evaluate(x), &self.coefficients))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InteractionTerm {
    pub features: [String; 2],
    pub knots: [Vec<f64>; 2],
    pub basis_dims: [usize; 2],
    /// `basis_dims[0] × basis_dims[1]`, row-major.
    pub coefficients: Vec<Vec<f64>>,
    pub lambda: f64,
}

impl InteractionTerm {
    fn bases(&self) -> Result<[BSplineBasis; 2]> {
        let a = BSplineBasis::from_breakpoints(self.knots[0].clone())?;
        let b = BSplineBasis::from_breakpoints(self.knots[1].clone())?;
        let ok = a.dim() == self.basis_dims[0]
            && b.dim() == self.basis_dims[1]
            && self.coefficients.len() == self.basis_dims[0]
            && self.coefficients.iter().all(|r| r.len() == self.basis_dims[1]);
        if !ok {
            return Err(Error::invalid(format!(
                "interaction `{}×{}`: knots, basis_dims and coefficients disagree",
                self.features[0], self.features[1]
            )));
        }
        Ok([a, b])
    }

    pub fn evaluate(&self, xi: f64, xj: f64) -> Result<f64> {
        let [a, b] = self.bases()?;
        Ok(surface(&self.coefficients, &a.evaluate(xi), &b.evaluate(xj)))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct FitDiagnostics {
    pub n_obs: usize,
    pub rss: f64,
    /// `rss / (n - edf)`; absent when the fit uses up every degree of freedom.
    pub residual_variance: Option<f64>,
    pub edf: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GamModel {
    pub intercept: f64,
    pub smooths: Vec<SmoothTerm>,
    pub interactions: Vec<InteractionTerm>,
    #[serde(default)]
    pub link: Link,
    pub diagnostics: FitDiagnostics,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(a, b)| a * b).sum()
}

fn surface(c: &[Vec<f64>], bi: &[f64], bj: &[f64]) -> f64 {
    c.iter().zip(bi).map(|(row, w)| w * dot(row, bj)).sum()
}

impl GamModel {
    /// Features in the order of the main-effect smooths.
    pub fn feature_names(&self) -> Vec<&str> {
        self.smooths.iter().map(|s| s.feature_name.as_str()).collect()
    }

    pub fn smooth(&self, feature: &str) -> Option<&SmoothTerm> {
        self.smooths.iter().find(|s| s.feature_name == feature)
    }

    /// Contribution of `feature`'s smooth at `x`.
    pub fn smooth_value(&self, feature: &str, x: f64) -> Result<f64> {
        self.smooth(feature)
            .ok_or_else(|| Error::invalid(format!("model has no smooth for `{feature}`")))?
            .evaluate(x)
    }

    pub fn validate(&self) -> Result<()> {
        let mut seen = Vec::new();
        for s in &self.smooths {
            if seen.contains(&s.feature_name.as_str()) {
                return Err(Error::invalid(format!("feature `{}` has two smooths", s.feature_name)));
            }
            seen.push(&s.feature_name);
            s.basis()?;
            if !(s.lambda >= 0.0) {
                return Err(Error::invalid(format!("smooth `{}` has negative lambda", s.feature_name)));
            }
        }
        let mut pairs: Vec<(&str, &str)> = Vec::new();
        for it in &self.interactions {
            let (a, b) = (it.features[0].as_str(), it.features[1].as_str());
            let key = if a <= b { (a, b) } else { (b, a) };
            if a == b || pairs.contains(&key) {
                return Err(Error::invalid(format!("interaction `{a}×{b}` is repeated or degenerate")));
            }
            pairs.push(key);
            it.bases()?;
            if !(it.lambda >= 0.0) {
                return Err(Error::invalid(format!("interaction `{a}×{b}` has negative lambda")));
            }
        }
        Ok(())
    }

    pub fn predict(&self, table: &FeatureTable) -> Result<Vec<f64>> {
        check_finite(table, None)?;
        let mut out = vec![self.intercept; table.n_rows()];
        for s in &self.smooths {
            let basis = s.basis()?;
            for (o, &x) in out.iter_mut().zip(table.require(&s.feature_name)?) {
                *o += dot(&basis.evaluate(x), &s.coefficients);
            }
        }
        for it in &self.interactions {
            let [a, b] = it.bases()?;
            let xi = table.require(&it.features[0])?;
            let xj = table.require(&it.features[1])?;
            for (o, (&u, &v)) in out.iter_mut().zip(xi.iter().zip(xj)) {
                *o += surface(&it.coefficients, &a.evaluate(u), &b.evaluate(v));
            }
        }
        Ok(out)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<GamModel> {
        let m: GamModel = serde_json::from_str(s)?;
        m.validate()?;
        Ok(m)
    }
}

/// Penalized least-squares fit with identity link.
pub fn fit(table: &FeatureTable, target: &[f64], spec: &GamSpec) -> Result<GamModel> {
    check_finite(table, Some(target))?;
    spec.lambdas.validate()?;
    if table.n_rows() < 2 {
        return Err(Error::invalid("fitting needs at least two rows"));
    }
    let design = Design::build(table, spec)?;
    let x = design.matrix(table)?;
    let gram = x.tr_mul(&x);
    let rhs = x.tr_mul(&DVector::from_column_slice(target));
    let a = &gram + design.penalty(spec.lambdas);
    let chol = Cholesky::new(a).ok_or_else(|| {
        Error::Singular(format!(
            "penalized normal equations are not positive definite at λ = {:?}",
            spec.lambdas
        ))
    })?;
    let beta = chol.solve(&rhs);
    let edf = chol.solve(&gram).trace();
    let mut model = design.to_model(&beta, spec.lambdas);
    let fitted = model.predict(table)?;
    let n = target.len();
    let rss: f64 = fitted.iter().zip(target).map(|(f, y)| (y - f).powi(2)).sum();
    let resid_df = n as f64 - edf;
    model.diagnostics = FitDiagnostics {
        n_obs: n,
        rss,
        residual_variance: (resid_df > 0.0).then(|| rss / resid_df),
        edf,
    };
    Ok(model)
}

pub fn predict(model: &GamModel, table: &FeatureTable) -> Result<Vec<f64>> {
    model.predict(table)
}

//! Descriptive statistics, correlation and the two-sample tests used by the
//! evaluation pipeline and the feature-relevance study.

use serde::{Deserialize, Serialize};
use statrs::function::beta::beta_reg;

use crate::{Error, Result};

pub fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Unbiased sample variance (n − 1 denominator).
pub fn sample_variance(x: &[f64]) -> f64 {
    let mu = mean(x);
    x.iter().map(|v| (v - mu) * (v - mu)).sum::<f64>() / (x.len() as f64 - 1.0)
}

pub fn sample_sd(x: &[f64]) -> f64 {
    sample_variance(x).sqrt()
}

/// Quantile by linear interpolation between order statistics
/// (`h = (n − 1)·p`, the "type 7" rule). `p` in `[0, 1]`.
pub fn quantile(values: &[f64], p: f64) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::degenerate("quantile of an empty sample"));
    }
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::invalid(format!("quantile probability {p} outside [0, 1]")));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(quantile_sorted(&sorted, p))
}

pub(crate) fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

fn check_pair(x: &[f64], y: &[f64]) -> Result<()> {
    if x.len() != y.len() {
        return Err(Error::invalid(format!("length mismatch: {} vs {}", x.len(), y.len())));
    }
    if x.len() < 2 {
        return Err(Error::invalid("need at least two observations"));
    }
    Ok(())
}

/// Pearson product-moment correlation.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    check_pair(x, y)?;
    let (mx, my) = (mean(x), mean(y));
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::degenerate("correlation with a zero-variance vector"));
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// Coefficient of determination `1 − RSS/TSS`; negative for models worse than the mean.
pub fn r_squared(y_true: &[f64], y_pred: &[f64]) -> Result<f64> {
    check_pair(y_true, y_pred)?;
    let mu = mean(y_true);
    let tss: f64 = y_true.iter().map(|v| (v - mu) * (v - mu)).sum();
    if tss == 0.0 {
        return Err(Error::degenerate("R² of a zero-variance target"));
    }
    let rss: f64 = y_true.iter().zip(y_pred).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok(1.0 - rss / tss)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WelchTest {
    pub t_stat: f64,
    pub df: f64,
    pub p_value: f64,
}

/// Two-sided unequal-variance t-test.
///
/// `t = (x̄ − ȳ) / sqrt(s_x²/n + s_y²/m)` with Welch–Satterthwaite degrees of
/// freedom; the p-value is `I_{df/(df+t²)}(df/2, 1/2)`.
pub fn welch_t(x: &[f64], y: &[f64]) -> Result<WelchTest> {
    if x.len() < 2 || y.len() < 2 {
        return Err(Error::invalid("welch_t needs at least two observations per sample"));
    }
    let (n, m) = (x.len() as f64, y.len() as f64);
    let vx = sample_variance(x) / n;
    let vy = sample_variance(y) / m;
    let se2 = vx + vy;
    if se2 == 0.0 {
        return Err(Error::degenerate("both samples have zero variance"));
    }
    let t = (mean(x) - mean(y)) / se2.sqrt();
    let df = se2 * se2 / (vx * vx / (n - 1.0) + vy * vy / (m - 1.0));
    let p = beta_reg(df / 2.0, 0.5, df / (df + t * t)).clamp(0.0, 1.0);
    Ok(WelchTest { t_stat: t, df, p_value: p })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EffectSize {
    Negligible,
    Small,
    Medium,
    Large,
}

impl EffectSize {
    /// Conventional bands at |d| = 0.2, 0.5 and 0.8.
    pub fn from_d(d: f64) -> Self {
        match d.abs() {
            a if a >= 0.8 => EffectSize::Large,
            a if a >= 0.5 => EffectSize::Medium,
            a if a >= 0.2 => EffectSize::Small,
            _ => EffectSize::Negligible,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            EffectSize::Negligible => "negligible",
            EffectSize::Small => "small",
            EffectSize::Medium => "medium",
            EffectSize::Large => "large",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CohensD {
    pub d: f64,
    pub pooled_sd: f64,
    pub magnitude: EffectSize,
}

/// Cohen's d with the pooled standard deviation
/// `s_p = sqrt(((n−1)s_x² + (m−1)s_y²) / (n + m − 2))`.
pub fn cohens_d(x: &[f64], y: &[f64]) -> Result<CohensD> {
    let (n, m) = (x.len(), y.len());
    if n == 0 || m == 0 || n + m < 3 {
        return Err(Error::invalid("cohens_d needs n + m >= 3 with both samples non-empty"));
    }
    let var = |s: &[f64]| if s.len() > 1 { sample_variance(s) } else { 0.0 };
    let (nf, mf) = (n as f64, m as f64);
    let pooled = ((nf - 1.0) * var(x) + (mf - 1.0) * var(y)) / (nf + mf - 2.0);
    if pooled <= 0.0 {
        return Err(Error::degenerate("zero pooled variance"));
    }
    let sp = pooled.sqrt();
    let d = (mean(x) - mean(y)) / sp;
    Ok(CohensD {
        d,
        pooled_sd: sp,
        magnitude: EffectSize::from_d(d),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bonferroni {
    pub alpha: f64,
    pub m: usize,
    pub alpha_corrected: f64,
    /// `p_i <= alpha / m`.
    pub significant: Vec<bool>,
    /// `min(1, m·p_i)`.
    pub adjusted: Vec<f64>,
}

pub fn bonferroni(p_values: &[f64], alpha: f64) -> Result<Bonferroni> {
    if p_values.is_empty() {
        return Err(Error::invalid("bonferroni needs at least one p-value"));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::invalid(format!("alpha {alpha} outside (0, 1)")));
    }
    if let Some(p) = p_values.iter().find(|p| !(0.0..=1.0).contains(*p)) {
        return Err(Error::invalid(format!("p-value {p} outside [0, 1]")));
    }
    let m = p_values.len();
    let alpha_corrected = alpha / m as f64;
    Ok(Bonferroni {
        alpha,
        m,
        alpha_corrected,
        significant: p_values.iter().map(|&p| p <= alpha_corrected).collect(),
        adjusted: p_values.iter().map(|&p| (m as f64 * p).min(1.0)).collect(),
    })
}

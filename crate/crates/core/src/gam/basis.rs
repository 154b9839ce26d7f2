//! Clamped cubic B-spline bases with quantile-placed interior knots, and the
//! integrated squared second-derivative penalty.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::{stats, Error, Result};

const DEGREE: usize = 3;

/// Which interval the basis spans.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub enum RangePolicy {
    /// `[min, max]` of the supplied values.
    #[default]
    Observed,
    Fixed { lo: f64, hi: f64 },
}

/// Cubic B-spline basis on `[a, b]`, clamped at both ends. Outside `[a, b]`
/// every basis function continues linearly from its boundary value and slope.
#[derive(Debug, Clone, PartialEq)]
pub struct BSplineBasis {
    /// Strictly increasing: `a`, interior knots, `b`.
    breakpoints: Vec<f64>,
    /// Full knot vector with the end knots repeated `DEGREE + 1` times.
    knots: Vec<f64>,
}

impl BSplineBasis {
    /// Basis from strictly increasing breakpoints `[a, t_1, ..., t_K, b]`;
    /// its dimension is `K + 4`.
    pub fn from_breakpoints(breakpoints: Vec<f64>) -> Result<Self> {
        if breakpoints.len() < 2 {
            return Err(Error::invalid("a basis needs at least two breakpoints"));
        }
        if breakpoints.iter().any(|v| !v.is_finite()) || breakpoints.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::invalid("breakpoints must be finite and strictly increasing"));
        }
        let (a, b) = (breakpoints[0], *breakpoints.last().unwrap());
        let mut knots = vec![a; DEGREE + 1];
        knots.extend_from_slice(&breakpoints[1..breakpoints.len() - 1]);
        knots.extend(std::iter::repeat_n(b, DEGREE + 1));
        Ok(BSplineBasis { breakpoints, knots })
    }

    /// Basis of dimension `dim` whose interior knots sit at evenly spaced
    /// quantiles of `values`. Falls back to quantiles of the distinct values
    /// when ties would make knots coincide.
    pub fn from_values(values: &[f64], dim: usize, range: RangePolicy) -> Result<Self> {
        if dim < DEGREE + 1 {
            return Err(Error::invalid(format!("basis dimension must be at least 4, got {dim}")));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("basis values must be finite"));
        }
        let mut distinct = values.to_vec();
        distinct.sort_by(f64::total_cmp);
        distinct.dedup();
        if distinct.len() < dim {
            return Err(Error::invalid(format!(
                "{} distinct values cannot support a basis of dimension {dim}; lower basis_dim",
                distinct.len()
            )));
        }
        let (lo, hi) = match range {
            RangePolicy::Observed => (distinct[0], *distinct.last().unwrap()),
            RangePolicy::Fixed { lo, hi } => {
                if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                    return Err(Error::invalid(format!("invalid fixed range [{lo}, {hi}]")));
                }
                (lo, hi)
            }
        };
        let n_interior = dim - (DEGREE + 1);
        let inside = |v: &f64| *v > lo && *v < hi;
        let mut all: Vec<f64> = values.iter().copied().filter(inside).collect();
        all.sort_by(f64::total_cmp);
        let uniq: Vec<f64> = distinct.iter().copied().filter(inside).collect();

        let place = |sorted: &[f64]| -> Option<Vec<f64>> {
            if n_interior > 0 && sorted.is_empty() {
                return None;
            }
            let mut bp = Vec::with_capacity(n_interior + 2);
            bp.push(lo);
            for i in 1..=n_interior {
                bp.push(stats::quantile_sorted(sorted, i as f64 / (n_interior + 1) as f64));
            }
            bp.push(hi);
            bp.windows(2).all(|w| w[1] > w[0]).then_some(bp)
        };
        let bp = place(&all)
            .or_else(|| place(&uniq))
            .or_else(|| {
                // Too few values strictly inside a fixed range: space evenly.
                let step = (hi - lo) / (n_interior + 1) as f64;
                Some((0..n_interior + 2).map(|i| lo + step * i as f64).collect())
            })
            .unwrap();
        Self::from_breakpoints(bp)
    }

    pub fn dim(&self) -> usize {
        self.knots.len() - DEGREE - 1
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn lower(&self) -> f64 {
        self.breakpoints[0]
    }

    pub fn upper(&self) -> f64 {
        *self.breakpoints.last().unwrap()
    }

    /// `order`-th derivative of every basis function at `x` inside `[a, b]`
    /// (at `b` the left-hand limit).
    fn raw_derivative(&self, x: f64, order: usize) -> Vec<f64> {
        let u = &self.knots;
        let m = u.len();
        // Degree-0 indicator: the half-open span containing x, or the last
        // non-empty span when x == b.
        let mut span = u.partition_point(|&k| k <= x).saturating_sub(1);
        if x >= self.upper() {
            span = m - DEGREE - 2;
        }
        span = span.clamp(DEGREE, m - DEGREE - 2);
        let mut table: Vec<Vec<f64>> = Vec::with_capacity(DEGREE + 1);
        let mut n0 = vec![0.0; m - 1];
        n0[span] = 1.0;
        table.push(n0);
        for d in 1..=DEGREE {
            let prev = &table[d - 1];
            let row: Vec<f64> = (0..m - 1 - d)
                .map(|i| {
                    let left = ratio(x - u[i], u[i + d] - u[i]) * prev[i];
                    let right = ratio(u[i + d + 1] - x, u[i + d + 1] - u[i + 1]) * prev[i + 1];
                    left + right
                })
                .collect();
            table.push(row);
        }
        (0..self.dim()).map(|i| derivative_entry(u, &table, i, DEGREE, order)).collect()
    }

    /// Values of all basis functions at `x`, extrapolated linearly outside `[a, b]`.
    pub fn evaluate(&self, x: f64) -> Vec<f64> {
        let (a, b) = (self.lower(), self.upper());
        if x < a {
            let v = self.raw_derivative(a, 0);
            let s = self.raw_derivative(a, 1);
            v.iter().zip(&s).map(|(v, s)| v + s * (x - a)).collect()
        } else if x > b {
            let v = self.raw_derivative(b, 0);
            let s = self.raw_derivative(b, 1);
            v.iter().zip(&s).map(|(v, s)| v + s * (x - b)).collect()
        } else {
            self.raw_derivative(x, 0)
        }
    }

    /// `order`-th derivative of all basis functions at `x`; zero beyond the first
    /// derivative outside `[a, b]`.
    pub fn derivative(&self, x: f64, order: usize) -> Vec<f64> {
        if order == 0 {
            return self.evaluate(x);
        }
        let (a, b) = (self.lower(), self.upper());
        if x < a || x > b {
            return if order == 1 {
                self.raw_derivative(x.clamp(a, b), 1)
            } else {
                vec![0.0; self.dim()]
            };
        }
        self.raw_derivative(x, order)
    }

    /// `n × dim` basis matrix.
    pub fn matrix(&self, values: &[f64]) -> DMatrix<f64> {
        let k = self.dim();
        let mut out = DMatrix::zeros(values.len(), k);
        for (r, &x) in values.iter().enumerate() {
            for (c, v) in self.evaluate(x).into_iter().enumerate() {
                out[(r, c)] = v;
            }
        }
        out
    }

    /// `P[i][j] = ∫_a^b B_i''(x) B_j''(x) dx`, integrated exactly with 3-point
    /// Gauss–Legendre on every knot interval (the integrand is quadratic there).
    pub fn penalty(&self) -> DMatrix<f64> {
        let k = self.dim();
        let nodes = [-(0.6f64).sqrt(), 0.0, (0.6f64).sqrt()];
        let weights = [5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0];
        let mut p = DMatrix::zeros(k, k);
        for w in self.breakpoints.windows(2) {
            let (lo, hi) = (w[0], w[1]);
            let half = 0.5 * (hi - lo);
            let mid = 0.5 * (hi + lo);
            for (t, wt) in nodes.iter().zip(weights) {
                let d2 = self.raw_derivative(mid + half * t, 2);
                let scale = wt * half;
                for i in 0..k {
                    if d2[i] == 0.0 {
                        continue;
                    }
                    for j in 0..k {
                        p[(i, j)] += scale * d2[i] * d2[j];
                    }
                }
            }
        }
        p
    }

    /// Coefficients reproducing `f(x) = c0 + c1·x` exactly (Greville abscissae).
    pub fn affine_coefficients(&self, c0: f64, c1: f64) -> Vec<f64> {
        (0..self.dim())
            .map(|i| {
                let g = self.knots[i + 1..=i + DEGREE].iter().sum::<f64>() / DEGREE as f64;
                c0 + c1 * g
            })
            .collect()
    }
}

fn ratio(num: f64, den: f64) -> f64 {
    if den == 0.0 {
        0.0
    } else {
        num / den
    }
}

fn derivative_entry(u: &[f64], table: &[Vec<f64>], i: usize, degree: usize, order: usize) -> f64 {
    if order == 0 {
        return table[degree][i];
    }
    if order > degree {
        return 0.0;
    }
    let p = degree as f64;
    let left = ratio(1.0, u[i + degree] - u[i]) * derivative_entry(u, table, i, degree - 1, order - 1);
    let right = ratio(1.0, u[i + degree + 1] - u[i + 1]) * derivative_entry(u, table, i + 1, degree - 1, order - 1);
    p * (left - right)
}

/// Knots and basis matrix for `values`.
pub fn build_basis(values: &[f64], basis_dim: usize, range: RangePolicy) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let basis = BSplineBasis::from_values(values, basis_dim, range)?;
    Ok((basis.breakpoints().to_vec(), basis.matrix(values)))
}

/// Wiggliness penalty for the basis on `knots` (breakpoints incl. both ends).
pub fn penalty_matrix(knots: &[f64], basis_dim: usize) -> Result<DMatrix<f64>> {
    let basis = BSplineBasis::from_breakpoints(knots.to_vec())?;
    if basis.dim() != basis_dim {
        return Err(Error::invalid(format!(
            "{} breakpoints define a basis of dimension {}, not {basis_dim}",
            knots.len(),
            basis.dim()
        )));
    }
    Ok(basis.penalty())
}

//! Constrained design matrices and penalties shared by fitting and tuning.

use nalgebra::{DMatrix, DVector};

use super::basis::{BSplineBasis, RangePolicy};
use super::model::{FitDiagnostics, GamModel, InteractionTerm, Lambdas, Link, SmoothTerm};
use super::{FeatureTable, GamSpec};
use crate::{Error, Result};

pub(crate) struct SmoothBlock {
    pub name: String,
    pub basis: BSplineBasis,
    /// `k × (k-1)` orthonormal basis of the sum-to-zero subspace.
    pub z: DMatrix<f64>,
    pub penalty: DMatrix<f64>,
    pub offset: usize,
}

pub(crate) struct InteractionBlock {
    pub names: [String; 2],
    pub bases: [BSplineBasis; 2],
    pub margins: [DMatrix<f64>; 2],
    /// Training means of the tensor columns, subtracted to centre the surface.
    pub means: DVector<f64>,
    pub penalty: DMatrix<f64>,
    pub offset: usize,
}

pub(crate) struct Design {
    pub smooths: Vec<SmoothBlock>,
    pub interactions: Vec<InteractionBlock>,
    pub n_coef: usize,
}

/// Null space of `vᵀ` from a Householder reflection: the returned columns are
/// orthonormal and orthogonal to `v`.
fn null_space(v: &DVector<f64>) -> DMatrix<f64> {
    let k = v.len();
    let norm = v.norm();
    let mut u = v.clone();
    let sign = if v[0] >= 0.0 { 1.0 } else { -1.0 };
    u[0] += sign * norm;
    let uu = u.dot(&u);
    let h = DMatrix::<f64>::identity(k, k) - (&u * u.transpose()) * (2.0 / uu);
    h.columns(1, k - 1).into_owned()
}

/// Penalty on the centred margin, scaled so λ is expressed per unit range.
fn scaled_penalty(basis: &BSplineBasis, z: &DMatrix<f64>) -> DMatrix<f64> {
    let width = basis.upper() - basis.lower();
    let p = z.transpose() * basis.penalty() * z * width.powi(3);
    (&p + p.transpose()) * 0.5
}

fn row_kron(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let (n, ka, kb) = (a.nrows(), a.ncols(), b.ncols());
    DMatrix::from_fn(n, ka * kb, |r, c| a[(r, c / kb)] * b[(r, c % kb)])
}

pub(crate) fn check_finite(table: &FeatureTable, target: Option<&[f64]>) -> Result<()> {
    for (name, col) in table.names().iter().zip(table.columns()) {
        if let Some(r) = col.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("non-finite value in column `{name}` at row {r}")));
        }
    }
    if let Some(y) = target {
        if y.len() != table.n_rows() {
            return Err(Error::invalid(format!("{} targets for {} rows", y.len(), table.n_rows())));
        }
        if let Some(r) = y.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("non-finite target at row {r}")));
        }
    }
    Ok(())
}

impl Design {
    /// Bases, constraints and penalties derived from the training `table`.
    pub fn build(table: &FeatureTable, spec: &GamSpec) -> Result<Design> {
        let mut offset = 1;
        let mut smooths = Vec::new();
        for (name, col) in table.names().iter().zip(table.columns()) {
            let dim = spec.basis_dim_for(name);
            let basis = BSplineBasis::from_values(col, dim, RangePolicy::Observed)
                .map_err(|e| Error::invalid(format!("feature `{name}`: {e}")))?;
            let b = basis.matrix(col);
            let v = b.row_sum().transpose();
            let z = null_space(&v);
            let penalty = scaled_penalty(&basis, &z);
            let width = z.ncols();
            smooths.push(SmoothBlock { name: name.clone(), basis, z, penalty, offset });
            offset += width;
        }
        let mut interactions = Vec::new();
        if spec.include_interactions {
            let q = spec.interaction_dim;
            let mut margins = Vec::new();
            for (name, col) in table.names().iter().zip(table.columns()) {
                let basis = BSplineBasis::from_values(col, q, RangePolicy::Observed)
                    .map_err(|e| Error::invalid(format!("interaction margin `{name}`: {e}")))?;
                let z = null_space(&basis.matrix(col).row_sum().transpose());
                let pen = scaled_penalty(&basis, &z);
                margins.push((basis, z, pen));
            }
            let cols = table.columns();
            for i in 0..cols.len() {
                for j in i + 1..cols.len() {
                    let (bi, zi, pi) = &margins[i];
                    let (bj, zj, pj) = &margins[j];
                    let mi = bi.matrix(&cols[i]) * zi;
                    let mj = bj.matrix(&cols[j]) * zj;
                    let t = row_kron(&mi, &mj);
                    let means = t.row_mean().transpose();
                    let (qi, qj) = (zi.ncols(), zj.ncols());
                    let pen = pi.kronecker(&DMatrix::identity(qj, qj)) + DMatrix::identity(qi, qi).kronecker(pj);
                    let width = pen.ncols();
                    interactions.push(InteractionBlock {
                        names: [table.names()[i].clone(), table.names()[j].clone()],
                        bases: [bi.clone(), bj.clone()],
                        margins: [zi.clone(), zj.clone()],
                        means,
                        penalty: pen,
                        offset,
                    });
                    offset += width;
                }
            }
        }
        Ok(Design { smooths, interactions, n_coef: offset })
    }

    /// Constrained model matrix for any rows carrying the training columns.
    pub fn matrix(&self, table: &FeatureTable) -> Result<DMatrix<f64>> {
        let n = table.n_rows();
        let mut x = DMatrix::zeros(n, self.n_coef);
        x.column_mut(0).fill(1.0);
        for s in &self.smooths {
            let block = s.basis.matrix(table.require(&s.name)?) * &s.z;
            x.columns_mut(s.offset, block.ncols()).copy_from(&block);
        }
        for it in &self.interactions {
            let mi = it.bases[0].matrix(table.require(&it.names[0])?) * &it.margins[0];
            let mj = it.bases[1].matrix(table.require(&it.names[1])?) * &it.margins[1];
            let mut block = row_kron(&mi, &mj);
            for mut row in block.row_iter_mut() {
                row -= it.means.transpose();
            }
            x.columns_mut(it.offset, block.ncols()).copy_from(&block);
        }
        Ok(x)
    }

    pub fn penalty(&self, lambdas: Lambdas) -> DMatrix<f64> {
        let mut s = DMatrix::zeros(self.n_coef, self.n_coef);
        for b in &self.smooths {
            let w = b.penalty.nrows();
            s.view_mut((b.offset, b.offset), (w, w)).copy_from(&(&b.penalty * lambdas.smooth));
        }
        for b in &self.interactions {
            let w = b.penalty.nrows();
            s.view_mut((b.offset, b.offset), (w, w)).copy_from(&(&b.penalty * lambdas.interaction));
        }
        s
    }

    pub fn has_interactions(&self) -> bool {
        !self.interactions.is_empty()
    }

    /// Maps constrained coefficients back onto the raw B-spline bases.
    pub fn to_model(&self, beta: &DVector<f64>, lambdas: Lambdas) -> GamModel {
        let smooths = self
            .smooths
            .iter()
            .map(|s| {
                let b = beta.rows(s.offset, s.z.ncols());
                let c = &s.z * b;
                SmoothTerm {
                    feature_name: s.name.clone(),
                    knots: s.basis.breakpoints().to_vec(),
                    basis_dim: s.basis.dim(),
                    coefficients: c.iter().copied().collect(),
                    lambda: lambdas.smooth,
                }
            })
            .collect();
        let interactions = self
            .interactions
            .iter()
            .map(|it| {
                let (zi, zj) = (&it.margins[0], &it.margins[1]);
                let theta = beta.rows(it.offset, it.means.len());
                let shift = it.means.dot(&theta);
                let qj = zj.ncols();
                let theta = DMatrix::from_fn(zi.ncols(), qj, |a, b| theta[a * qj + b]);
                // Raw tensor bases sum to one, so the centring shift is a uniform offset.
                let c = (zi * theta * zj.transpose()).add_scalar(-shift);
                InteractionTerm {
                    features: it.names.clone(),
                    knots: [it.bases[0].breakpoints().to_vec(), it.bases[1].breakpoints().to_vec()],
                    basis_dims: [it.bases[0].dim(), it.bases[1].dim()],
                    coefficients: c.row_iter().map(|r| r.iter().copied().collect()).collect(),
                    lambda: lambdas.interaction,
                }
            })
            .collect();
        GamModel {
            intercept: beta[0],
            smooths,
            interactions,
            link: Link::Identity,
            diagnostics: FitDiagnostics::default(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn null_space_is_orthonormal_complement() {
        let v = DVector::from_vec(vec![3.0, 1.0, 4.0, 1.0, 5.0]);
        let z = null_space(&v);
        assert_eq!(z.shape(), (5, 4));
        assert_abs_diff_eq!((z.transpose() * &v).norm(), 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!((z.transpose() * &z - DMatrix::identity(4, 4)).norm(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn row_kron_layout() {
        let a = DMatrix::from_row_slice(1, 2, &[1.0, 2.0]);
        let b = DMatrix::from_row_slice(1, 3, &[3.0, 4.0, 5.0]);
        assert_eq!(row_kron(&a, &b).as_slice(), &[3.0, 4.0, 5.0, 6.0, 8.0, 10.0]);
    }
}

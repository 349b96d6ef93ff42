//! Observed-information blocks and the variance report.
//!
//! Blocks are negative second derivatives of the h-likelihood at the joint
//! maximum. The random-random block is diagonal for every shipped model and
//! is stored as a vector.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::Serialize;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::hlik::Objective;
use crate::model::Model;
use crate::scale::ScaleTransform;
use crate::solver::FitResult;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BlockScale {
    /// The fitting scale `v`.
    V,
    /// The natural scale of the missing responses.
    YMis,
    /// A declared normalizing transform of the missing responses.
    Z,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HessianBlocks {
    pub i_psi_psi: DMatrix<f64>,
    /// `p x m`.
    pub i_psi_r: DMatrix<f64>,
    /// Diagonal of the random-random block.
    pub i_rr: DVector<f64>,
    pub psi: Vec<f64>,
    /// Random coordinates at which the blocks were taken, on `scale`.
    pub random: Vec<f64>,
    pub scale: BlockScale,
}

impl HessianBlocks {
    pub fn p(&self) -> usize {
        self.i_psi_psi.nrows()
    }

    pub fn m(&self) -> usize {
        self.i_rr.len()
    }

    /// `I_psi,psi - I_psi,r I_rr^{-1} I_r,psi`.
    pub fn schur_complement(&self) -> DMatrix<f64> {
        let mut s = self.i_psi_psi.clone();
        for i in 0..self.m() {
            let c = self.i_psi_r.column(i);
            s -= (c * c.transpose()) / self.i_rr[i];
        }
        (&s + s.transpose()) * 0.5
    }
}

pub(crate) fn blocks_for(
    obj: &Objective<'_>,
    psi: &[f64],
    r: &[f64],
    scale: BlockScale,
) -> Result<HessianBlocks> {
    obj.check(psi, r)?;
    let p = psi.len();
    let m = r.len();
    let f = obj.fixed_jet(psi)?;
    let mut i_psi_psi = -f.hess;
    let mut i_psi_r = DMatrix::zeros(p, m);
    let mut i_rr = DVector::zeros(m);
    for (i, &ri) in r.iter().enumerate() {
        let j = obj.coord_jet(psi, i, ri)?;
        if !(j.d_rr < 0.0) {
            return Err(Error::Curvature(format!(
                "information of random coordinate {i} is {} (must be positive)",
                -j.d_rr
            )));
        }
        i_psi_psi -= &j.d_psi_psi;
        i_psi_r.set_column(i, &(-&j.d_psi_r));
        i_rr[i] = -j.d_rr;
    }
    Ok(HessianBlocks {
        i_psi_psi,
        i_psi_r,
        i_rr,
        psi: psi.to_vec(),
        random: r.to_vec(),
        scale,
    })
}

/// Blocks at a fit obtained on the model's declared scale.
pub fn hessian_blocks(
    model: &dyn Model,
    data: &Dataset,
    fit: &FitResult,
    scale: BlockScale,
) -> Result<HessianBlocks> {
    hessian_blocks_on(model, model.scale(), data, fit, scale)
}

/// Blocks at a fit obtained on `fit_scale`.
pub fn hessian_blocks_on(
    model: &dyn Model,
    fit_scale: &dyn ScaleTransform,
    data: &Dataset,
    fit: &FitResult,
    scale: BlockScale,
) -> Result<HessianBlocks> {
    match scale {
        BlockScale::V => blocks_for(
            &Objective::on_scale(model, fit_scale, data),
            &fit.psi_hat,
            &fit.v_hat,
            scale,
        ),
        BlockScale::YMis => blocks_for(
            &Objective::in_y(model, fit_scale, data),
            &fit.psi_hat,
            &fit.y_mis_hat,
            scale,
        ),
        BlockScale::Z => Err(Error::Usage(
            "z-scale blocks are produced by z_scale_report".into(),
        )),
    }
}

/// `I^{psi psi}`, the inverse Schur complement.
pub fn var_fixed(blocks: &HessianBlocks) -> Result<DMatrix<f64>> {
    let s = blocks.schur_complement();
    if s.iter().any(|x| !x.is_finite()) {
        return Err(Error::Curvature("Schur complement is not finite".into()));
    }
    let eig = SymmetricEigen::new(s);
    let (k_min, &l_min) = eig
        .eigenvalues
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .expect("p >= 1");
    let l_max = eig.eigenvalues.amax();
    if l_min <= 1e-12 * l_max.max(f64::MIN_POSITIVE) {
        return Err(Error::Rank {
            context: "Schur complement of the fixed-parameter information".into(),
            min_eigenvalue: l_min,
            direction: eig.eigenvectors.column(k_min).iter().copied().collect(),
        });
    }
    let inv = DVector::from_iterator(eig.eigenvalues.len(), eig.eigenvalues.iter().map(|l| 1.0 / l));
    let q = &eig.eigenvectors;
    let v = q * DMatrix::from_diagonal(&inv) * q.transpose();
    Ok((&v + v.transpose()) * 0.5)
}

/// `d r~ / d psi^T = -I_psi,r I_rr^{-1}` (`p x m`).
pub fn dtilde_v_dpsi(blocks: &HessianBlocks) -> DMatrix<f64> {
    let mut d = blocks.i_psi_r.clone();
    for i in 0..blocks.m() {
        let s = -1.0 / blocks.i_rr[i];
        d.column_mut(i).scale_mut(s);
    }
    d
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PredictionInterval {
    pub lower: f64,
    pub upper: f64,
}

impl PredictionInterval {
    pub fn contains(&self, y: f64) -> bool {
        self.lower <= y && y <= self.upper
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VarianceReport {
    pub scale: BlockScale,
    pub level: f64,
    pub quantile: f64,
    pub var_psi: DMatrix<f64>,
    pub var_estimation: DMatrix<f64>,
    pub var_prediction: DMatrix<f64>,
    pub predicted: Vec<f64>,
    pub se_prediction: Vec<f64>,
    pub intervals: Vec<PredictionInterval>,
}

/// Two-sided standard normal quantile for coverage `level`.
pub fn normal_quantile(level: f64) -> Result<f64> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::domain("level", level, "must lie in (0, 1)"));
    }
    let n = Normal::standard();
    Ok(n.inverse_cdf(0.5 + 0.5 * level))
}

/// Estimation and prediction variances of the imputed values at 95%.
pub fn var_random(blocks: &HessianBlocks, var_psi: &DMatrix<f64>) -> Result<VarianceReport> {
    var_random_at(blocks, var_psi, 0.95)
}

/// `var_est = D^T V D`, `var_pred = var_est + I_rr^{-1}` with `D = d r~/d psi^T`.
pub fn var_random_at(
    blocks: &HessianBlocks,
    var_psi: &DMatrix<f64>,
    level: f64,
) -> Result<VarianceReport> {
    if blocks.scale == BlockScale::V {
        return Err(Error::Usage(
            "variance of imputed values needs blocks on the y_mis or z scale".into(),
        ));
    }
    let p = blocks.p();
    if var_psi.nrows() != p || var_psi.ncols() != p {
        return Err(Error::dimension("var_psi", var_psi.nrows(), p));
    }
    let z = normal_quantile(level)?;
    let d = dtilde_v_dpsi(blocks);
    let est = d.transpose() * var_psi * &d;
    let est = (&est + est.transpose()) * 0.5;
    let mut pred = est.clone();
    for i in 0..blocks.m() {
        pred[(i, i)] += 1.0 / blocks.i_rr[i];
    }
    let se: Vec<f64> = (0..blocks.m()).map(|i| pred[(i, i)].sqrt()).collect();
    let intervals = blocks
        .random
        .iter()
        .zip(&se)
        .map(|(&y, &s)| PredictionInterval {
            lower: y - z * s,
            upper: y + z * s,
        })
        .collect();
    Ok(VarianceReport {
        scale: blocks.scale,
        level,
        quantile: z,
        var_psi: var_psi.clone(),
        var_estimation: est,
        var_prediction: pred,
        predicted: blocks.random.clone(),
        se_prediction: se,
        intervals,
    })
}

/// Fixed-parameter variance from v-scale blocks and imputation variances from y-scale blocks.
pub fn variance_report(
    model: &dyn Model,
    data: &Dataset,
    fit: &FitResult,
    level: f64,
) -> Result<VarianceReport> {
    let v_blocks = hessian_blocks(model, data, fit, BlockScale::V)?;
    let var_psi = var_fixed(&v_blocks)?;
    let y_blocks = hessian_blocks(model, data, fit, BlockScale::YMis)?;
    var_random_at(&y_blocks, &var_psi, level)
}

/// Intervals on the model's declared normalizing transform `z = M(y_mis)`.
pub fn z_scale_report(
    model: &dyn Model,
    data: &Dataset,
    fit: &FitResult,
    level: f64,
) -> Result<VarianceReport> {
    let t = model.normalizing_transform().ok_or_else(|| {
        Error::Unsupported(format!("{} declares no normalizing transform", model.name()))
    })?;
    let psi = &fit.psi_hat;
    let z: Vec<f64> = fit
        .y_mis_hat
        .iter()
        .enumerate()
        .map(|(i, &y)| t.map.forward(psi, data, i, y))
        .collect::<Result<_>>()?;
    let var_psi = var_fixed(&hessian_blocks(model, data, fit, BlockScale::V)?)?;
    let obj = Objective::with_coords(model, model.scale(), t.map.as_ref(), data);
    let blocks = blocks_for(&obj, psi, &z, BlockScale::Z)?;
    var_random_at(&blocks, &var_psi, level)
}

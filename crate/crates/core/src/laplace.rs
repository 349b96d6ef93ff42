//! Laplace approximation, the weak canonical scale and Bartlett-identity checks.
//!
//! For a psi-independent scale `b` with full real support,
//! `l^_m(psi) = l_e(psi, b~) - 0.5 log|Omega~ / 2pi|` with
//! `Omega~ = -d2 l_e / db db^T` at the mode. The weak canonical scale
//! `w = Omega~^{1/2} b` satisfies `l_e(psi, w~) + (m/2) log 2pi = l^_m(psi)`.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::hlik::Objective;
use crate::model::{check_psi, Model};
use crate::models::{rng_for, Simulator};
use crate::scale::{Rescaled, ScaleFactor, ScaleKind, ScaleTransform};
use crate::solver::{
    ascent_direction, coordinate_mode, default_start, objective_mode, FitResult, InitPsi,
    SolveOptions, Working,
};

/// `log a_i(psi) = 0.5 log Omega~_i(psi)` on a given base scale.
pub struct CurvatureFactor<'a> {
    model: &'a dyn Model,
    base: &'a dyn ScaleTransform,
}

impl<'a> CurvatureFactor<'a> {
    pub fn new(model: &'a dyn Model, base: &'a dyn ScaleTransform) -> Self {
        Self { model, base }
    }

    /// Mode `b~_i(psi)` and curvature `Omega~_i(psi)` on the base scale.
    pub fn mode_and_curvature(&self, psi: &[f64], data: &Dataset, i: usize) -> Result<(f64, f64)> {
        let obj = Objective::on_scale(self.model, self.base, data);
        let b0 = obj.from_y(psi, i, self.model.initial_random(psi, data, i))?;
        let b = coordinate_mode(&obj, psi, i, b0, &SolveOptions::default())?;
        let omega = -obj.coord_r(psi, i, b)?[2];
        if !(omega > 0.0 && omega.is_finite()) {
            return Err(Error::Curvature(format!(
                "curvature of random coordinate {i} at its mode is {omega}"
            )));
        }
        Ok((b, omega))
    }
}

impl ScaleFactor for CurvatureFactor<'_> {
    fn log_factor(&self, psi: &[f64], data: &Dataset, i: usize) -> Result<f64> {
        Ok(0.5 * self.mode_and_curvature(psi, data, i)?.1.ln())
    }
}

/// Builds `w = Omega~(psi)^{1/2} b` from a psi-independent base scale `b`.
///
/// Fails with `Unsupported` unless `b` maps every coordinate's support onto
/// the whole real line.
pub fn make_weak_canonical<'a>(
    model: &'a dyn Model,
    b_scale: &'a dyn ScaleTransform,
    data: &Dataset,
) -> Result<Rescaled<'a>> {
    if b_scale.depends_on_psi() {
        return Err(Error::Unsupported(
            "weak canonical scale needs a psi-independent base scale".into(),
        ));
    }
    check_full_support(model, b_scale, data)?;
    Ok(Rescaled::new(
        b_scale,
        CurvatureFactor::new(model, b_scale),
        ScaleKind::WeakCanonical,
        format!("Omega^(1/2) * {}", b_scale.describe()),
    ))
}

fn check_full_support(model: &dyn Model, b_scale: &dyn ScaleTransform, data: &Dataset) -> Result<()> {
    for i in 0..model.n_random(data) {
        let (lo, hi) = model.random_support(data, i);
        let (a, b) = b_scale.support_image(lo, hi);
        if a != f64::NEG_INFINITY || b != f64::INFINITY {
            return Err(Error::Unsupported(format!(
                "scale {} maps the support of coordinate {i} to ({a}, {b}), not the real line",
                b_scale.describe()
            )));
        }
    }
    Ok(())
}

fn base_modes(obj: &Objective<'_>, psi: &[f64]) -> Result<Vec<f64>> {
    let start = default_start(obj, psi)?;
    objective_mode(obj, psi, &start, &SolveOptions::default())
}

/// `l^_m(psi)` on base scale `b_scale`.
pub fn laplace_marginal(
    model: &dyn Model,
    psi: &[f64],
    data: &Dataset,
    b_scale: &dyn ScaleTransform,
) -> Result<f64> {
    check_psi(model, psi)?;
    let obj = Objective::on_scale(model, b_scale, data);
    let b = base_modes(&obj, psi)?;
    let mut value = obj.value(psi, &b)?;
    for (i, &bi) in b.iter().enumerate() {
        let omega = -obj.coord_r(psi, i, bi)?[2];
        if !(omega > 0.0) {
            return Err(Error::Curvature(format!(
                "curvature of random coordinate {i} at its mode is {omega}"
            )));
        }
        value -= 0.5 * (omega / (2.0 * PI)).ln();
    }
    Ok(value)
}

#[derive(Debug, Clone, PartialEq)]
pub struct LaplaceDerivatives {
    pub value: f64,
    pub score: DVector<f64>,
    /// `-d2 l^_m / dpsi dpsi^T`.
    pub information: DMatrix<f64>,
}

/// Score and information of `l^_m`.
///
/// `score = dl_e/dpsi - sum_i d(0.5 log Omega_i)/dpsi`, and
/// `information = (I_pp - I_pb I_bb^{-1} I_bp) + sum_i d2(0.5 log Omega_i)/dpsi dpsi^T`;
/// the curvature derivatives are Richardson-refined finite differences.
pub fn laplace_score_hessian(
    model: &dyn Model,
    psi: &[f64],
    data: &Dataset,
    b_scale: &dyn ScaleTransform,
) -> Result<LaplaceDerivatives> {
    check_psi(model, psi)?;
    let obj = Objective::on_scale(model, b_scale, data);
    let b = base_modes(&obj, psi)?;
    let factor = CurvatureFactor::new(model, b_scale);
    let f = obj.fixed_jet(psi)?;
    let mut value = f.value;
    let mut score = f.grad;
    let mut information = -f.hess;
    for (i, &bi) in b.iter().enumerate() {
        let j = obj.coord_jet(psi, i, bi)?;
        if !(j.d_rr < 0.0) {
            return Err(Error::Curvature(format!(
                "curvature of random coordinate {i} at its mode is {}",
                -j.d_rr
            )));
        }
        let lf = factor.log_factor_jet(psi, data, i)?;
        value += j.value - lf.value + 0.5 * (2.0 * PI).ln();
        score += &j.d_psi - &lf.grad;
        information -= &j.d_psi_psi - (&j.d_psi_r * j.d_psi_r.transpose()) / j.d_rr;
        information += &lf.hess;
    }
    let information = (&information + information.transpose()) * 0.5;
    Ok(LaplaceDerivatives {
        value,
        score,
        information,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct LaplaceFit {
    /// Fit expressed on the weak canonical scale.
    pub fit: FitResult,
    pub laplace_loglik: f64,
    pub information: DMatrix<f64>,
    /// Base-scale modes `b~(psi^Lap)`.
    pub b_hat: Vec<f64>,
}

/// Maximizes `l^_m` by Newton with Armijo backtracking on the working scale.
pub fn approx_mle(
    model: &dyn Model,
    data: &Dataset,
    b_scale: &dyn ScaleTransform,
    opts: &SolveOptions,
) -> Result<LaplaceFit> {
    model.validate(data)?;
    check_full_support(model, b_scale, data)?;
    let work = Working::new(model);
    let mut psi = match &opts.init_psi {
        InitPsi::CompleteCase => model.initial_psi(data)?,
        InitPsi::Given(v) => v.clone(),
    };
    check_psi(model, &psi)?;
    let mut phi = work.to_phi(&psi);
    let mut ld = laplace_score_hessian(model, &psi, data, b_scale)?;
    let mut history = vec![ld.value];
    let mut iterations = 0;
    loop {
        let gn = ld.score.amax();
        if gn <= opts.grad_tol {
            break;
        }
        if iterations == opts.max_outer_iters {
            return Err(Error::Convergence {
                context: "Laplace-approximate MLE".into(),
                iterations,
                grad_norm: gn,
                last_iterate: psi,
            });
        }
        let (g, h) = work.chain(&psi, &ld.score, &(-&ld.information));
        let mut d = ascent_direction(&g, &h)?;
        let dmax = d.amax();
        if dmax > 5.0 {
            d *= 5.0 / dmax;
        }
        let slope = g.dot(&d);
        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..opts.max_halvings {
            let phi_c: Vec<f64> = phi.iter().zip(d.iter()).map(|(a, b)| a + t * b).collect();
            let psi_c = work.to_psi(&phi_c);
            if let Ok(v) = laplace_marginal(model, &psi_c, data, b_scale) {
                let floor = ld.value - 1e-12 * ld.value.abs().max(1.0);
                let armijo = v >= ld.value + opts.armijo_c * t * slope;
                if armijo || v >= floor {
                    if let Ok(ld_c) = laplace_score_hessian(model, &psi_c, data, b_scale) {
                        if armijo || ld_c.score.amax() < gn {
                            accepted = Some((phi_c, psi_c, ld_c));
                            break;
                        }
                    }
                }
            }
            t *= opts.contraction;
        }
        let Some((phi_c, psi_c, ld_c)) = accepted else {
            return Err(Error::Convergence {
                context: "line search on the Laplace-approximate likelihood".into(),
                iterations,
                grad_norm: gn,
                last_iterate: psi,
            });
        };
        phi = phi_c;
        psi = psi_c;
        ld = ld_c;
        history.push(ld.value);
        iterations += 1;
        if let Some(e) = work.boundary(&phi) {
            return Err(e);
        }
    }

    let obj_b = Objective::on_scale(model, b_scale, data);
    let b_hat = base_modes(&obj_b, &psi)?;
    let factor = CurvatureFactor::new(model, b_scale);
    let mut w_hat = Vec::with_capacity(b_hat.len());
    let mut y_hat = Vec::with_capacity(b_hat.len());
    for (i, &bi) in b_hat.iter().enumerate() {
        w_hat.push(factor.log_factor(&psi, data, i)?.exp() * bi);
        y_hat.push(b_scale.inverse(&psi, data, i, bi)?);
    }
    let w_scale = make_weak_canonical(model, b_scale, data)?;
    let h_value = Objective::on_scale(model, &w_scale, data).value(&psi, &w_hat)?;
    Ok(LaplaceFit {
        fit: FitResult {
            psi_hat: psi,
            v_hat: w_hat,
            y_mis_hat: y_hat,
            h_value,
            converged: true,
            iterations,
            grad_norm: ld.score.amax(),
            history,
            scale_kind: ScaleKind::WeakCanonical,
            scale_name: w_scale.describe(),
        },
        laplace_loglik: ld.value,
        information: ld.information,
        b_hat,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BartlettCheckResult {
    /// Parameter names followed by `b_sum`, the all-ones direction over the random coordinates.
    pub components: Vec<String>,
    pub n_draws: usize,
    pub score_mean: Vec<f64>,
    pub score_se: Vec<f64>,
    /// Mean of `s s^T + d2 l / d(psi, b)^2`, row-major.
    pub residual_mean: Vec<Vec<f64>>,
    pub residual_se: Vec<Vec<f64>>,
}

fn z_score(mean: f64, se: f64) -> f64 {
    if se > 0.0 {
        mean / se
    } else if mean == 0.0 {
        0.0
    } else {
        f64::INFINITY
    }
}

impl BartlettCheckResult {
    /// Largest `|mean| / SE` over the score components.
    pub fn max_score_z(&self) -> f64 {
        self.score_mean
            .iter()
            .zip(&self.score_se)
            .map(|(&m, &s)| z_score(m, s).abs())
            .fold(0.0, f64::max)
    }

    /// Largest `|mean| / SE` over the second-identity residual entries.
    pub fn max_residual_z(&self) -> f64 {
        let mut z = 0.0_f64;
        for (rm, rs) in self.residual_mean.iter().zip(&self.residual_se) {
            for (&m, &s) in rm.iter().zip(rs) {
                z = z.max(z_score(m, s).abs());
            }
        }
        z
    }

    pub fn first_identity_holds(&self, k: f64) -> bool {
        self.max_score_z() <= k
    }

    pub fn second_identity_holds(&self, k: f64) -> bool {
        self.max_residual_z() <= k
    }
}

pub const MIN_BARTLETT_DRAWS: usize = 1000;

/// Monte Carlo check of the two Bartlett identities of `l_e(psi, b)` at the truth.
///
/// Draw `k` uses stream `k` of `seed`, so results do not depend on thread count.
pub fn bartlett_check(
    model: &dyn Model,
    simulator: &dyn Simulator,
    psi_true: &[f64],
    b_scale: &dyn ScaleTransform,
    n_draws: usize,
    seed: u64,
) -> Result<BartlettCheckResult> {
    if n_draws < MIN_BARTLETT_DRAWS {
        return Err(Error::Usage(format!(
            "Bartlett check needs at least {MIN_BARTLETT_DRAWS} draws, got {n_draws}"
        )));
    }
    check_psi(model, psi_true)?;
    let p = psi_true.len();
    let k = p + 1;
    let draws: Vec<(DVector<f64>, DMatrix<f64>)> = (0..n_draws)
        .into_par_iter()
        .map(|d| -> Result<(DVector<f64>, DMatrix<f64>)> {
            let mut rng = rng_for(seed, d as u64);
            let sim = simulator.draw(psi_true, &mut rng)?;
            let data = &sim.dataset;
            let obj = Objective::on_scale(model, b_scale, data);
            let f = obj.fixed_jet(psi_true)?;
            let mut s = DVector::zeros(k);
            let mut h = DMatrix::zeros(k, k);
            s.rows_mut(0, p).copy_from(&f.grad);
            h.view_mut((0, 0), (p, p)).copy_from(&f.hess);
            for (i, &y) in sim.random_true.iter().enumerate() {
                let b = b_scale.forward(psi_true, data, i, y)?;
                let j = obj.coord_jet(psi_true, i, b)?;
                for a in 0..p {
                    s[a] += j.d_psi[a];
                    h[(a, p)] += j.d_psi_r[a];
                    h[(p, a)] += j.d_psi_r[a];
                    for c in 0..p {
                        h[(a, c)] += j.d_psi_psi[(a, c)];
                    }
                }
                s[p] += j.d_r;
                h[(p, p)] += j.d_rr;
            }
            let resid = &s * s.transpose() + h;
            Ok((s, resid))
        })
        .collect::<Result<_>>()?;

    let nd = n_draws as f64;
    let mean_se = |xs: &mut dyn Iterator<Item = f64>| {
        let v: Vec<f64> = xs.collect();
        let m = v.iter().sum::<f64>() / nd;
        let var = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (nd - 1.0);
        (m, (var / nd).sqrt())
    };
    let mut score_mean = vec![0.0; k];
    let mut score_se = vec![0.0; k];
    let mut residual_mean = vec![vec![0.0; k]; k];
    let mut residual_se = vec![vec![0.0; k]; k];
    for a in 0..k {
        (score_mean[a], score_se[a]) = mean_se(&mut draws.iter().map(|(s, _)| s[a]));
        for c in 0..k {
            (residual_mean[a][c], residual_se[a][c]) =
                mean_se(&mut draws.iter().map(|(_, r)| r[(a, c)]));
        }
    }
    let mut components = model.param_names();
    components.push("b_sum".into());
    Ok(BartlettCheckResult {
        components,
        n_draws,
        score_mean,
        score_se,
        residual_mean,
        residual_se,
    })
}

//! Joint maximization of the h-likelihood by profile Newton.
//!
//! The outer loop is Newton on the profile `psi -> h(psi, v~(psi))` using the
//! Schur-complement Hessian, with positive parameters optimized on the log
//! scale. The inner problem separates into one-dimensional Newton solves.
//! Both loops use Armijo backtracking; a Levenberg shift repairs
//! non-negative-definite curvature.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::hlik::Objective;
use crate::model::{check_psi, Model, ParamDomain};
use crate::scale::{ScaleKind, ScaleTransform};

/// Largest admissible `|log psi_k|` for positive parameters.
const LOG_BOUNDARY: f64 = 30.0;
/// Largest admissible `|psi_k|` for real parameters.
const REAL_BOUNDARY: f64 = 1e10;
/// Cap on the sup-norm of an outer Newton step on the working scale.
const MAX_STEP: f64 = 5.0;

#[derive(Debug, Clone, PartialEq)]
pub enum InitPsi {
    CompleteCase,
    Given(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub enum InitRandom {
    ModelDefault,
    /// Starting random coordinates on the fitting scale.
    Given(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveOptions {
    /// Sup-norm tolerance on the joint score.
    pub grad_tol: f64,
    pub max_outer_iters: usize,
    pub max_inner_iters: usize,
    pub armijo_c: f64,
    pub contraction: f64,
    pub max_halvings: usize,
    pub init_psi: InitPsi,
    pub init_v: InitRandom,
    /// Extra randomized starts.
    pub multistart: usize,
    pub multistart_seed: u64,
    /// Standard deviation of start perturbations on the working scale.
    pub multistart_spread: f64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            grad_tol: 1e-8,
            max_outer_iters: 200,
            max_inner_iters: 100,
            armijo_c: 1e-4,
            contraction: 0.5,
            max_halvings: 60,
            init_psi: InitPsi::CompleteCase,
            init_v: InitRandom::ModelDefault,
            multistart: 0,
            multistart_seed: 0,
            multistart_spread: 0.5,
        }
    }
}

impl SolveOptions {
    pub fn starting_at(psi: Vec<f64>) -> Self {
        Self {
            init_psi: InitPsi::Given(psi),
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitResult {
    pub psi_hat: Vec<f64>,
    /// Random coordinates at the maximum, on the fitting scale.
    pub v_hat: Vec<f64>,
    pub y_mis_hat: Vec<f64>,
    pub h_value: f64,
    pub converged: bool,
    pub iterations: usize,
    pub grad_norm: f64,
    /// Profile value after each accepted outer step, starting value first.
    pub history: Vec<f64>,
    pub scale_kind: ScaleKind,
    pub scale_name: String,
}

fn ascent_ok(f_new: f64, f_old: f64, slope: f64, t: f64, c: f64) -> bool {
    f_new.is_finite() && f_new >= f_old + c * t * slope
}

fn roundoff_floor(f: f64) -> f64 {
    f - 1e-12 * f.abs().max(1.0)
}

/// Maximizes coordinate `i` of `obj` at fixed `psi`.
pub(crate) fn coordinate_mode(
    obj: &Objective<'_>,
    psi: &[f64],
    i: usize,
    r0: f64,
    opts: &SolveOptions,
) -> Result<f64> {
    let mut r = r0;
    let [mut f, mut g, mut h] = obj.coord_r(psi, i, r)?;
    for _ in 0..opts.max_inner_iters {
        if g.abs() <= opts.grad_tol {
            // one extra Newton step drives the mode to working precision
            if h < 0.0 {
                let cand = r - g / h;
                if let Ok([fc, gc, _]) = obj.coord_r(psi, i, cand) {
                    if gc.abs() <= g.abs() && fc >= roundoff_floor(f) {
                        return Ok(cand);
                    }
                }
            }
            return Ok(r);
        }
        let curv = if h < 0.0 && h.is_finite() {
            -h
        } else {
            h.abs() + g.abs().max(1.0)
        };
        let step = g / curv;
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..opts.max_halvings {
            let cand = r + t * step;
            if let Ok([fc, gc, hc]) = obj.coord_r(psi, i, cand) {
                let armijo = ascent_ok(fc, f, g * step, t, opts.armijo_c);
                let stalled = gc.abs() < g.abs() && fc >= roundoff_floor(f);
                if armijo || stalled {
                    r = cand;
                    (f, g, h) = (fc, gc, hc);
                    accepted = true;
                    break;
                }
            }
            t *= opts.contraction;
        }
        if !accepted {
            break;
        }
    }
    if g.abs() <= opts.grad_tol {
        return Ok(r);
    }
    Err(Error::Convergence {
        context: format!("inner mode of random coordinate {i}"),
        iterations: opts.max_inner_iters,
        grad_norm: g.abs(),
        last_iterate: vec![r],
    })
}

/// Maximizes all random coordinates of `obj` at fixed `psi`.
pub(crate) fn objective_mode(
    obj: &Objective<'_>,
    psi: &[f64],
    r0: &[f64],
    opts: &SolveOptions,
) -> Result<Vec<f64>> {
    r0.iter()
        .enumerate()
        .map(|(i, &ri)| coordinate_mode(obj, psi, i, ri, opts))
        .collect()
}

pub(crate) fn default_start(obj: &Objective<'_>, psi: &[f64]) -> Result<Vec<f64>> {
    (0..obj.m())
        .map(|i| obj.from_y(psi, i, obj.model.initial_random(psi, obj.data, i)))
        .collect()
}

/// `v~(psi)` on the model's declared scale.
pub fn inner_mode(
    model: &dyn Model,
    psi: &[f64],
    data: &Dataset,
    init: Option<&[f64]>,
) -> Result<Vec<f64>> {
    model.validate(data)?;
    check_psi(model, psi)?;
    let obj = Objective::on_scale(model, model.scale(), data);
    let start = match init {
        Some(v) => {
            if v.len() != obj.m() {
                return Err(Error::dimension("initial v", v.len(), obj.m()));
            }
            v.to_vec()
        }
        None => default_start(&obj, psi)?,
    };
    objective_mode(&obj, psi, &start, &SolveOptions::default())
}

/// `y~(psi)`, the mode of the random coordinates on the natural scale.
pub fn solve_random_given_psi(model: &dyn Model, psi: &[f64], data: &Dataset) -> Result<Vec<f64>> {
    let v = inner_mode(model, psi, data, None)?;
    let s = model.scale();
    v.iter()
        .enumerate()
        .map(|(i, &vi)| s.inverse(psi, data, i, vi))
        .collect()
}

/// `h(psi, v~(psi))` on the model's declared scale.
pub fn profile_loglik(model: &dyn Model, psi: &[f64], data: &Dataset) -> Result<f64> {
    let v = inner_mode(model, psi, data, None)?;
    Objective::on_scale(model, model.scale(), data).value(psi, &v)
}

pub(crate) struct ProfileEval {
    pub value: f64,
    pub grad: DVector<f64>,
    /// Schur complement of the h-Hessian (negative definite at a maximum).
    pub hess: DMatrix<f64>,
}

pub(crate) fn profile_eval(obj: &Objective<'_>, psi: &[f64], r: &[f64]) -> Result<ProfileEval> {
    let f = obj.fixed_jet(psi)?;
    let mut value = f.value;
    let mut grad = f.grad;
    let mut hess = f.hess;
    for (i, &ri) in r.iter().enumerate() {
        let j = obj.coord_jet(psi, i, ri)?;
        if !(j.d_rr < 0.0) {
            return Err(Error::Curvature(format!(
                "second derivative in random coordinate {i} is {} at the inner mode",
                j.d_rr
            )));
        }
        value += j.value;
        grad += &j.d_psi;
        hess += &j.d_psi_psi - (&j.d_psi_r * j.d_psi_r.transpose()) / j.d_rr;
    }
    Ok(ProfileEval { value, grad, hess })
}

/// Maps between natural parameters and the working scale (log for positive ones).
#[derive(Debug, Clone)]
pub(crate) struct Working {
    domains: Vec<ParamDomain>,
    names: Vec<String>,
}

impl Working {
    pub fn new(model: &dyn Model) -> Self {
        Self {
            domains: model.param_domain(),
            names: model.param_names(),
        }
    }

    pub fn to_phi(&self, psi: &[f64]) -> Vec<f64> {
        psi.iter()
            .zip(&self.domains)
            .map(|(&x, d)| match d {
                ParamDomain::Positive => x.ln(),
                ParamDomain::Real => x,
            })
            .collect()
    }

    pub fn to_psi(&self, phi: &[f64]) -> Vec<f64> {
        phi.iter()
            .zip(&self.domains)
            .map(|(&x, d)| match d {
                ParamDomain::Positive => x.exp(),
                ParamDomain::Real => x,
            })
            .collect()
    }

    /// Gradient and Hessian on the working scale.
    pub fn chain(
        &self,
        psi: &[f64],
        grad: &DVector<f64>,
        hess: &DMatrix<f64>,
    ) -> (DVector<f64>, DMatrix<f64>) {
        let p = psi.len();
        let jac = DVector::from_iterator(
            p,
            psi.iter().zip(&self.domains).map(|(&x, d)| match d {
                ParamDomain::Positive => x,
                ParamDomain::Real => 1.0,
            }),
        );
        let g = grad.component_mul(&jac);
        let mut h = DMatrix::from_fn(p, p, |k, l| jac[k] * jac[l] * hess[(k, l)]);
        for k in 0..p {
            if self.domains[k] == ParamDomain::Positive {
                h[(k, k)] += g[k];
            }
        }
        (g, h)
    }

    pub fn boundary(&self, phi: &[f64]) -> Option<Error> {
        for (k, (&x, d)) in phi.iter().zip(&self.domains).enumerate() {
            let out = match d {
                ParamDomain::Positive => x.abs() > LOG_BOUNDARY,
                ParamDomain::Real => x.abs() > REAL_BOUNDARY,
            };
            if out {
                let value = match d {
                    ParamDomain::Positive => x.exp(),
                    ParamDomain::Real => x,
                };
                return Some(Error::Boundary {
                    param: self.names[k].clone(),
                    value,
                });
            }
        }
        None
    }
}

/// Solves `(-H + mu I) d = g`, raising `mu` until the system is positive definite.
pub(crate) fn ascent_direction(g: &DVector<f64>, h: &DMatrix<f64>) -> Result<DVector<f64>> {
    let p = g.len();
    let a = -h;
    let scale = (0..p).map(|k| a[(k, k)].abs()).fold(1e-12, f64::max);
    let mut mu = 0.0;
    for _ in 0..60 {
        let shifted = &a + DMatrix::identity(p, p) * mu;
        if let Some(ch) = shifted.cholesky() {
            let d = ch.solve(g);
            if d.iter().all(|x| x.is_finite()) {
                return Ok(d);
            }
        }
        mu = if mu == 0.0 { 1e-8 * scale } else { mu * 10.0 };
    }
    Err(Error::Curvature(
        "profile Hessian could not be regularized".into(),
    ))
}

/// Profile Newton on `obj` from the given start.
pub(crate) fn maximize_objective(
    obj: &Objective<'_>,
    psi0: &[f64],
    r0: &[f64],
    opts: &SolveOptions,
    kind: ScaleKind,
    scale_name: String,
) -> Result<FitResult> {
    let work = Working::new(obj.model);
    check_psi(obj.model, psi0)?;
    let mut psi = psi0.to_vec();
    let mut phi = work.to_phi(&psi);
    let mut r = objective_mode(obj, &psi, r0, opts)?;
    let mut ev = profile_eval(obj, &psi, &r)?;
    let mut history = vec![ev.value];

    for it in 0..=opts.max_outer_iters {
        let mut gn = ev.grad.amax();
        if gn <= opts.grad_tol {
            // one full Newton step past the tolerance, kept only if it sharpens the score
            if let Some((_, psi_c, r_c, ev_c)) = polish(obj, &work, &phi, &r, &ev, opts) {
                psi = psi_c;
                r = r_c;
                ev = ev_c;
                gn = ev.grad.amax();
                history.push(ev.value);
            }
            let y_mis_hat = (0..r.len())
                .map(|i| obj.to_y(&psi, i, r[i]))
                .collect::<Result<Vec<_>>>()?;
            return Ok(FitResult {
                psi_hat: psi,
                v_hat: r,
                y_mis_hat,
                h_value: ev.value,
                converged: true,
                iterations: it,
                grad_norm: gn,
                history,
                scale_kind: kind,
                scale_name,
            });
        }
        if it == opts.max_outer_iters {
            break;
        }
        let (g_phi, h_phi) = work.chain(&psi, &ev.grad, &ev.hess);
        let mut d = ascent_direction(&g_phi, &h_phi)?;
        let dmax = d.amax();
        if dmax > MAX_STEP {
            d *= MAX_STEP / dmax;
        }
        let slope = g_phi.dot(&d);

        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..opts.max_halvings {
            let phi_c: Vec<f64> = phi.iter().zip(d.iter()).map(|(a, b)| a + t * b).collect();
            let psi_c = work.to_psi(&phi_c);
            if check_psi(obj.model, &psi_c).is_ok() {
                if let Ok(r_c) = objective_mode(obj, &psi_c, &r, opts) {
                    if let Ok(f_c) = obj.value(&psi_c, &r_c) {
                        if ascent_ok(f_c, ev.value, slope, t, opts.armijo_c) {
                            if let Ok(ev_c) = profile_eval(obj, &psi_c, &r_c) {
                                accepted = Some((phi_c, psi_c, r_c, ev_c));
                                break;
                            }
                        } else if f_c >= roundoff_floor(ev.value) {
                            if let Ok(ev_c) = profile_eval(obj, &psi_c, &r_c) {
                                if ev_c.grad.amax() < gn {
                                    accepted = Some((phi_c, psi_c, r_c, ev_c));
                                    break;
                                }
                            }
                        }
                    }
                }
            }
            t *= opts.contraction;
        }
        let Some((phi_c, psi_c, r_c, ev_c)) = accepted else {
            if let Some(e) = work.boundary(&phi) {
                return Err(e);
            }
            return Err(Error::Convergence {
                context: "line search failed to increase the profile h-likelihood".into(),
                iterations: it,
                grad_norm: gn,
                last_iterate: psi,
            });
        };
        phi = phi_c;
        psi = psi_c;
        r = r_c;
        ev = ev_c;
        history.push(ev.value);
        if let Some(e) = work.boundary(&phi) {
            return Err(e);
        }
    }
    Err(Error::Convergence {
        context: "outer profile Newton".into(),
        iterations: opts.max_outer_iters,
        grad_norm: ev.grad.amax(),
        last_iterate: psi,
    })
}

type Candidate = (Vec<f64>, Vec<f64>, Vec<f64>, ProfileEval);

fn polish(
    obj: &Objective<'_>,
    work: &Working,
    phi: &[f64],
    r: &[f64],
    ev: &ProfileEval,
    opts: &SolveOptions,
) -> Option<Candidate> {
    let (g_phi, h_phi) = work.chain(&work.to_psi(phi), &ev.grad, &ev.hess);
    let d = ascent_direction(&g_phi, &h_phi).ok()?;
    let phi_c: Vec<f64> = phi.iter().zip(d.iter()).map(|(a, b)| a + b).collect();
    let psi_c = work.to_psi(&phi_c);
    check_psi(obj.model, &psi_c).ok()?;
    let r_c = objective_mode(obj, &psi_c, r, opts).ok()?;
    let ev_c = profile_eval(obj, &psi_c, &r_c).ok()?;
    (ev_c.value >= roundoff_floor(ev.value) && ev_c.grad.amax() < ev.grad.amax())
        .then_some((phi_c, psi_c, r_c, ev_c))
}

fn starting_point(model: &dyn Model, data: &Dataset, opts: &SolveOptions) -> Result<Vec<f64>> {
    let psi0 = match &opts.init_psi {
        InitPsi::CompleteCase => model.initial_psi(data)?,
        InitPsi::Given(v) => v.clone(),
    };
    check_psi(model, &psi0)?;
    Ok(psi0)
}

/// Jointly maximizes the h-likelihood on `scale`.
pub fn joint_maximize_on(
    model: &dyn Model,
    scale: &dyn ScaleTransform,
    data: &Dataset,
    opts: &SolveOptions,
) -> Result<FitResult> {
    model.validate(data)?;
    let obj = Objective::on_scale(model, scale, data);
    let psi0 = starting_point(model, data, opts)?;
    let r0 = match &opts.init_v {
        InitRandom::ModelDefault => default_start(&obj, &psi0)?,
        InitRandom::Given(v) => {
            if v.len() != obj.m() {
                return Err(Error::dimension("initial v", v.len(), obj.m()));
            }
            v.clone()
        }
    };
    let run = |psi: &[f64], r: &[f64]| {
        maximize_objective(&obj, psi, r, opts, scale.kind(), scale.describe())
    };
    let base = run(&psi0, &r0);
    if opts.multistart == 0 {
        return base;
    }

    let work = Working::new(model);
    let phi0 = work.to_phi(&psi0);
    let mut rng = ChaCha8Rng::seed_from_u64(opts.multistart_seed);
    let mut best = base;
    for _ in 0..opts.multistart {
        let phi: Vec<f64> = phi0
            .iter()
            .map(|x| {
                let z: f64 = StandardNormal.sample(&mut rng);
                x + opts.multistart_spread * z
            })
            .collect();
        let psi = work.to_psi(&phi);
        let Ok(r) = default_start(&obj, &psi) else {
            continue;
        };
        if let Ok(fit) = run(&psi, &r) {
            let better = match &best {
                Ok(b) => fit.h_value > b.h_value,
                Err(_) => true,
            };
            if better {
                best = Ok(fit);
            }
        }
    }
    best
}

/// Jointly maximizes the h-likelihood on the model's declared scale.
pub fn joint_maximize(model: &dyn Model, data: &Dataset, opts: &SolveOptions) -> Result<FitResult> {
    joint_maximize_on(model, model.scale(), data, opts)
}

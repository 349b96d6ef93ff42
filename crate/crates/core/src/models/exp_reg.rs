use nalgebra::{DMatrix, DVector};

use crate::data::Dataset;
use crate::em::EmStep;
use crate::error::{Error, Result};
use crate::jet::{FixedJet, Jet};
use crate::model::{Model, ParamDomain};
use crate::scale::{LogShift, RDerivs, ScaleTransform};

use super::exp_mean::check_positive_obs;
use super::mechanism::{logistic_jet, logistic_loglik};
use super::require_one_covariate;

/// `y_i | x_i ~ Exp(mean exp(beta0 + beta1 x_i))` with responses missing at random.
///
/// With `with_mechanism`, `psi` also carries `(rho0, rho1, rho2)`.
pub struct ExponentialRegression {
    with_mechanism: bool,
    scale: LogShift,
}

impl Default for ExponentialRegression {
    fn default() -> Self {
        Self::new()
    }
}

fn log_density_jet(psi: &[f64], x: f64, y: f64) -> Jet {
    let eta = psi[0] + psi[1] * x;
    let w = (-eta).exp();
    let z = [1.0, x];
    let mut j = Jet::constant(psi.len(), -eta - y * w);
    for a in 0..2 {
        j.d_psi[a] = (y * w - 1.0) * z[a];
        j.d_psi_r[a] = w * z[a];
        for b in 0..2 {
            j.d_psi_psi[(a, b)] = -y * w * z[a] * z[b];
        }
    }
    j.d_r = -w;
    j
}

impl ExponentialRegression {
    pub fn new() -> Self {
        Self {
            with_mechanism: false,
            scale: LogShift::canonical(0.0),
        }
    }

    pub fn with_mechanism() -> Self {
        Self {
            with_mechanism: true,
            ..Self::new()
        }
    }

    fn eta(&self, psi: &[f64], x: f64) -> f64 {
        psi[0] + psi[1] * x
    }
}

impl Model for ExponentialRegression {
    fn name(&self) -> &'static str {
        "exp_reg"
    }

    fn param_names(&self) -> Vec<String> {
        let mut v: Vec<String> = ["beta0", "beta1"].map(String::from).into();
        if self.with_mechanism {
            v.extend(["rho0", "rho1", "rho2"].map(String::from));
        }
        v
    }

    fn param_domain(&self) -> Vec<ParamDomain> {
        vec![ParamDomain::Real; if self.with_mechanism { 5 } else { 2 }]
    }

    fn validate(&self, data: &Dataset) -> Result<()> {
        require_one_covariate(self.name(), data)?;
        check_positive_obs(self.name(), data)?;
        if data.n_obs() < 2 {
            return Err(Error::Data(format!(
                "{} needs at least 2 observed responses",
                self.name()
            )));
        }
        Ok(())
    }

    fn random_support(&self, _: &Dataset, _: usize) -> (f64, f64) {
        (0.0, f64::INFINITY)
    }

    fn fixed_term(&self, psi: &[f64], data: &Dataset) -> Result<f64> {
        let mut v = 0.0;
        for i in 0..data.n_obs() {
            let eta = self.eta(psi, data.x(i, 0));
            v += -eta - data.response()[i].expect("observed row") * (-eta).exp();
        }
        if self.with_mechanism {
            v += logistic_loglik(psi, 2, data);
        }
        Ok(v)
    }

    fn random_term(&self, psi: &[f64], data: &Dataset, i: usize, y: f64) -> Result<f64> {
        let eta = self.eta(psi, data.x_mis(i, 0));
        Ok(-eta - y * (-eta).exp())
    }

    fn fixed_jet(&self, psi: &[f64], data: &Dataset) -> Result<FixedJet> {
        let p = psi.len();
        let mut f = FixedJet {
            value: 0.0,
            grad: DVector::zeros(p),
            hess: DMatrix::zeros(p, p),
        };
        for i in 0..data.n_obs() {
            let j = log_density_jet(psi, data.x(i, 0), data.response()[i].expect("observed row"));
            f.value += j.value;
            f.grad += &j.d_psi;
            f.hess += &j.d_psi_psi;
        }
        if self.with_mechanism {
            f.add_assign(&logistic_jet(psi, 2, data));
        }
        Ok(f)
    }

    fn random_jet(&self, psi: &[f64], data: &Dataset, i: usize, y: f64) -> Result<Jet> {
        Ok(log_density_jet(psi, data.x_mis(i, 0), y))
    }

    fn random_r(&self, psi: &[f64], data: &Dataset, i: usize, y: f64) -> Result<RDerivs> {
        let eta = self.eta(psi, data.x_mis(i, 0));
        let w = (-eta).exp();
        Ok([-eta - y * w, -w, 0.0])
    }

    fn scale(&self) -> &dyn ScaleTransform {
        &self.scale
    }

    fn bartlett_scale(&self) -> Option<&dyn ScaleTransform> {
        Some(&self.scale)
    }

    fn closed_marginal_loglik(&self, psi: &[f64], data: &Dataset) -> Option<Result<f64>> {
        Some(self.fixed_term(psi, data))
    }

    fn canonical_mode(&self, psi: &[f64], data: &Dataset) -> Option<Result<Vec<f64>>> {
        Some(Ok((0..data.n_mis())
            .map(|i| self.eta(psi, data.x_mis(i, 0)).exp())
            .collect()))
    }

    fn initial_psi(&self, data: &Dataset) -> Result<Vec<f64>> {
        self.validate(data)?;
        let mut psi = vec![data.y_obs_mean().ln(), 0.0];
        if self.with_mechanism {
            psi.extend([0.0; 3]);
        }
        Ok(psi)
    }

    fn initial_random(&self, psi: &[f64], data: &Dataset, i: usize) -> f64 {
        self.eta(psi, data.x_mis(i, 0)).exp()
    }

    fn em(&self) -> Option<&dyn EmStep> {
        if self.with_mechanism {
            None
        } else {
            Some(self)
        }
    }
}

impl EmStep for ExponentialRegression {
    fn conditional_mean(&self, psi: &[f64], data: &Dataset, i: usize) -> Result<f64> {
        Ok(self.eta(psi, data.x_mis(i, 0)).exp())
    }

    /// Newton maximization of the completed-data log-likelihood.
    fn m_step(&self, psi: &[f64], data: &Dataset) -> Result<Vec<f64>> {
        let n = data.n();
        let mut y = data.y_obs();
        for i in 0..data.n_mis() {
            y.push(self.conditional_mean(psi, data, i)?);
        }
        let completed = |b: &[f64]| -> (f64, DVector<f64>, DMatrix<f64>) {
            let mut v = 0.0;
            let mut g = DVector::zeros(2);
            let mut h = DMatrix::zeros(2, 2);
            for (i, &yi) in y.iter().enumerate() {
                let j = log_density_jet(b, data.x(i, 0), yi);
                v += j.value;
                g += &j.d_psi;
                h += &j.d_psi_psi;
            }
            (v, g, h)
        };
        let mut b = psi[..2].to_vec();
        for _ in 0..100 {
            let (v, g, h) = completed(&b);
            if g.amax() <= 1e-10 * (n as f64) {
                return Ok(b);
            }
            let step = (-h)
                .cholesky()
                .ok_or_else(|| Error::Curvature("completed-data Hessian is not negative definite".into()))?
                .solve(&g);
            if step.amax() <= 1e-14 * (1.0 + b[0].abs() + b[1].abs()) {
                return Ok(b);
            }
            let mut t = 1.0;
            loop {
                let cand = [b[0] + t * step[0], b[1] + t * step[1]];
                let (vc, _, _) = completed(&cand);
                if vc >= v - 1e-12 * v.abs().max(1.0) || t < 1e-10 {
                    b = cand.to_vec();
                    break;
                }
                t *= 0.5;
            }
        }
        Err(Error::Convergence {
            context: "exponential regression M-step".into(),
            iterations: 100,
            grad_norm: completed(&b).1.amax(),
            last_iterate: b,
        })
    }
}

//! Second-order derivative bundles.
//!
//! A [`Jet`] holds the value, gradient and Hessian of a scalar function of
//! `(psi, r)` where `psi` is the fixed-parameter vector and `r` one random
//! coordinate. A [`FixedJet`] is the same for a function of `psi` alone.

use nalgebra::{DMatrix, DVector};

#[derive(Debug, Clone, PartialEq)]
pub struct FixedJet {
    pub value: f64,
    pub grad: DVector<f64>,
    pub hess: DMatrix<f64>,
}

impl FixedJet {
    pub fn zero(p: usize) -> Self {
        Self {
            value: 0.0,
            grad: DVector::zeros(p),
            hess: DMatrix::zeros(p, p),
        }
    }

    pub fn dim(&self) -> usize {
        self.grad.len()
    }

    pub fn add_assign(&mut self, other: &FixedJet) {
        self.value += other.value;
        self.grad += &other.grad;
        self.hess += &other.hess;
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Jet {
    pub value: f64,
    pub d_psi: DVector<f64>,
    pub d_r: f64,
    pub d_psi_psi: DMatrix<f64>,
    pub d_psi_r: DVector<f64>,
    pub d_rr: f64,
}

impl Jet {
    pub fn constant(p: usize, value: f64) -> Self {
        Self {
            value,
            d_psi: DVector::zeros(p),
            d_r: 0.0,
            d_psi_psi: DMatrix::zeros(p, p),
            d_psi_r: DVector::zeros(p),
            d_rr: 0.0,
        }
    }

    /// The coordinate function `(psi, r) -> r`.
    pub fn identity(p: usize, r: f64) -> Self {
        let mut j = Self::constant(p, r);
        j.d_r = 1.0;
        j
    }

    /// Lifts a function of `psi` alone.
    pub fn from_fixed(f: &FixedJet) -> Self {
        let p = f.dim();
        Self {
            value: f.value,
            d_psi: f.grad.clone(),
            d_r: 0.0,
            d_psi_psi: f.hess.clone(),
            d_psi_r: DVector::zeros(p),
            d_rr: 0.0,
        }
    }

    pub fn dim(&self) -> usize {
        self.d_psi.len()
    }

    pub fn add(&self, other: &Jet) -> Jet {
        Jet {
            value: self.value + other.value,
            d_psi: &self.d_psi + &other.d_psi,
            d_r: self.d_r + other.d_r,
            d_psi_psi: &self.d_psi_psi + &other.d_psi_psi,
            d_psi_r: &self.d_psi_r + &other.d_psi_r,
            d_rr: self.d_rr + other.d_rr,
        }
    }

    pub fn scale(&self, c: f64) -> Jet {
        Jet {
            value: c * self.value,
            d_psi: &self.d_psi * c,
            d_r: c * self.d_r,
            d_psi_psi: &self.d_psi_psi * c,
            d_psi_r: &self.d_psi_r * c,
            d_rr: c * self.d_rr,
        }
    }

    /// Applies a scalar function `g` given `g(F)`, `g'(F)`, `g''(F)`.
    pub fn map(&self, g: f64, g1: f64, g2: f64) -> Jet {
        Jet {
            value: g,
            d_psi: &self.d_psi * g1,
            d_r: g1 * self.d_r,
            d_psi_psi: &self.d_psi_psi * g1 + (&self.d_psi * self.d_psi.transpose()) * g2,
            d_psi_r: &self.d_psi_r * g1 + &self.d_psi * (g2 * self.d_r),
            d_rr: g1 * self.d_rr + g2 * self.d_r * self.d_r,
        }
    }

    pub fn exp(&self) -> Jet {
        let e = self.value.exp();
        self.map(e, e, e)
    }

    pub fn ln(&self) -> Jet {
        let v = self.value;
        self.map(v.ln(), 1.0 / v, -1.0 / (v * v))
    }

    /// Product of two jets.
    pub fn mul(&self, other: &Jet) -> Jet {
        let (a, b) = (self, other);
        Jet {
            value: a.value * b.value,
            d_psi: &a.d_psi * b.value + &b.d_psi * a.value,
            d_r: a.d_r * b.value + b.d_r * a.value,
            d_psi_psi: &a.d_psi_psi * b.value
                + &b.d_psi_psi * a.value
                + &a.d_psi * b.d_psi.transpose()
                + &b.d_psi * a.d_psi.transpose(),
            d_psi_r: &a.d_psi_r * b.value
                + &b.d_psi_r * a.value
                + &a.d_psi * b.d_r
                + &b.d_psi * a.d_r,
            d_rr: a.d_rr * b.value + b.d_rr * a.value + 2.0 * a.d_r * b.d_r,
        }
    }

    /// Chain rule for `F(psi, r) = self(psi, T(psi, r))`.
    ///
    /// `self` is a jet in `(psi, y)` evaluated at `y = inner.value`; `inner`
    /// is the jet of the map `y = T(psi, r)`.
    pub fn compose(&self, inner: &Jet) -> Jet {
        let l = self;
        let t = inner;
        let ly = l.d_r;
        let lyy = l.d_rr;
        let d_r = ly * t.d_r;
        let d_psi = &l.d_psi + &t.d_psi * ly;
        let d_rr = lyy * t.d_r * t.d_r + ly * t.d_rr;
        let d_psi_r = &l.d_psi_r * t.d_r + &t.d_psi * (lyy * t.d_r) + &t.d_psi_r * ly;
        let cross = &l.d_psi_r * t.d_psi.transpose();
        let d_psi_psi = &l.d_psi_psi
            + &cross
            + cross.transpose()
            + (&t.d_psi * t.d_psi.transpose()) * lyy
            + &t.d_psi_psi * ly;
        Jet {
            value: l.value,
            d_psi,
            d_r,
            d_psi_psi,
            d_psi_r,
            d_rr,
        }
    }
}

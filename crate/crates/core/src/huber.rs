//! The Huber penalty `f_h`, its derivative, and the aggregate loss
//! `F_h(r) = sum_i f_h(r_i)` over residual vectors and matrices.
//!
//! ```text
//! f_h(t) = t^2 / 2            if |t| <= h
//!        = h (|t| - h / 2)    otherwise
//! ```

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::neumaier_sum;

/// Transition point between the quadratic and linear regimes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HuberParams {
    h: f64,
}

impl HuberParams {
    pub fn new(h: f64) -> Result<Self> {
        if !(h > 0.0) || !h.is_finite() {
            return Err(Error::pre(format!("Huber parameter must be positive and finite, got {h}")));
        }
        Ok(Self { h })
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    #[inline]
    pub(crate) fn value_unchecked(&self, t: f64) -> f64 {
        let a = t.abs();
        if a <= self.h {
            0.5 * t * t
        } else {
            self.h * (a - 0.5 * self.h)
        }
    }

    #[inline]
    pub(crate) fn deriv_unchecked(&self, t: f64) -> f64 {
        // At |t| = h both branches agree; the quadratic one is used.
        if t.abs() <= self.h {
            t
        } else {
            self.h * t.signum()
        }
    }

    /// `f_h(eta + delta) - f_h(eta) - f_h'(eta) * delta`, evaluated without
    /// cancellation on the pieces where it has a closed form.
    #[inline]
    pub(crate) fn bregman_unchecked(&self, eta: f64, delta: f64) -> f64 {
        let h = self.h;
        let moved = eta + delta;
        if eta.abs() <= h && moved.abs() <= h {
            return 0.5 * delta * delta;
        }
        if eta.abs() > h && moved.abs() > h && eta.signum() == moved.signum() {
            return 0.0;
        }
        let value = self.value_unchecked(moved) - self.value_unchecked(eta) - self.deriv_unchecked(eta) * delta;
        value.max(0.0)
    }
}

/// Shape tag for a flat residual buffer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Shape {
    Vector(usize),
    /// Column-major `rows x cols`.
    Matrix(usize, usize),
}

impl Shape {
    pub fn len(&self) -> usize {
        match *self {
            Shape::Vector(n) => n,
            Shape::Matrix(r, c) => r * c,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Residuals {
    values: Vec<f64>,
    shape: Shape,
}

impl Residuals {
    pub fn new(values: Vec<f64>, shape: Shape) -> Result<Self> {
        if values.len() != shape.len() {
            return Err(Error::pre(format!(
                "residual buffer has {} entries but shape {:?} needs {}",
                values.len(),
                shape,
                shape.len()
            )));
        }
        Ok(Self { values, shape })
    }

    pub fn vector(values: Vec<f64>) -> Self {
        let shape = Shape::Vector(values.len());
        Self { values, shape }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }
}

fn check_finite(t: f64) -> Result<()> {
    if t.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("Huber penalty evaluated at non-finite residual {t}")))
    }
}

pub fn huber_penalty(t: f64, p: HuberParams) -> Result<f64> {
    check_finite(t)?;
    Ok(p.value_unchecked(t))
}

pub fn huber_penalty_deriv(t: f64, p: HuberParams) -> Result<f64> {
    check_finite(t)?;
    Ok(p.deriv_unchecked(t))
}

/// `F_h(r)`; zero for an empty buffer.
pub fn huber_loss(r: &Residuals, p: HuberParams) -> Result<f64> {
    loss_of_slice(r.values(), p)
}

pub fn huber_loss_grad(r: &Residuals, p: HuberParams) -> Result<Residuals> {
    let mut out = vec![0.0; r.values.len()];
    grad_of_slice(r.values(), p, &mut out)?;
    Ok(Residuals { values: out, shape: r.shape })
}

pub(crate) fn loss_of_slice(values: &[f64], p: HuberParams) -> Result<f64> {
    if let Some(bad) = values.iter().find(|x| !x.is_finite()) {
        return Err(Error::Domain(format!("non-finite residual {bad}")));
    }
    Ok(neumaier_sum(values.iter().map(|&t| p.value_unchecked(t))))
}

pub(crate) fn grad_of_slice(values: &[f64], p: HuberParams, out: &mut [f64]) -> Result<()> {
    for (o, &t) in out.iter_mut().zip(values) {
        check_finite(t)?;
        *o = p.deriv_unchecked(t);
    }
    Ok(())
}

/// Evaluates the second-order lower bound
/// `f_h(eta + delta) - f_h(eta) - f_h'(eta) delta >= delta^2 / 2 * 1{|eta| <= h - tau} * 1{|delta| <= tau}`.
///
/// The inequality holds for every input satisfying `0 <= tau <= h`; the
/// predicate exists so that it can be checked empirically.
pub fn curvature_lower_bound_holds(eta: f64, delta: f64, tau: f64, p: HuberParams) -> Result<bool> {
    check_finite(eta)?;
    check_finite(delta)?;
    if !(0.0..=p.h()).contains(&tau) {
        return Err(Error::pre(format!("tau must lie in [0, {}], got {tau}", p.h())));
    }
    let lhs = p.bregman_unchecked(eta, delta);
    let active = eta.abs() <= p.h() - tau && delta.abs() <= tau;
    let rhs = if active { 0.5 * delta * delta } else { 0.0 };
    Ok(lhs >= rhs - 1e-12 * (1.0 + rhs))
}

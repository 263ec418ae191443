//! Explicit volume-preserving integrator built from canonical shears.
//!
//! A shear advances a single coordinate by its own component,
//! `q_i <- q_i + tau * f_i(q)`. Because `f_i` does not depend on `q_i` this
//! is the exact flow of `f_i e_i` and has unit Jacobian determinant.

use nalgebra::DMatrix;

use crate::arakawa::{CoefficientTemplate, State};
use crate::error::{QgError, Result};
use crate::ordering::ShearOrdering;

/// Any state entry above this magnitude counts as a blow-up.
pub const BLOWUP_THRESHOLD: f64 = 1e6;

/// Yoshida's triple-jump coefficients, `2a + b = 1` and `2a^3 + b^3 = 0`.
pub fn yoshida_coefficients() -> (f64, f64) {
    let cbrt2 = 2f64.cbrt();
    let alpha = 1.0 / (2.0 - cbrt2);
    let beta = -cbrt2 / (2.0 - cbrt2);
    (alpha, beta)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Order {
    Two,
    Four,
}

impl Order {
    pub fn from_int(order: u32) -> Result<Self> {
        match order {
            2 => Ok(Order::Two),
            4 => Ok(Order::Four),
            o => Err(QgError::Config(format!("order must be 2 or 4, got {o}"))),
        }
    }

    pub fn as_int(self) -> u32 {
        match self {
            Order::Two => 2,
            Order::Four => 4,
        }
    }
}

#[derive(Debug, Clone)]
pub struct StepperConfig {
    pub tau: f64,
    pub ordering: ShearOrdering,
    pub order: Order,
}

impl StepperConfig {
    pub fn new(tau: f64, ordering: ShearOrdering, order: Order) -> Result<Self> {
        if !(tau > 0.0 && tau.is_finite()) {
            return Err(QgError::Config(format!("tau must be positive, got {tau}")));
        }
        Ok(Self { tau, ordering, order })
    }
}

/// Exact flow of the `i`-th canonical shear over time `tau`.
#[inline]
pub fn shear(template: &CoefficientTemplate, i: usize, tau: f64, state: &mut State) {
    let f = template.component_unchecked(i, &state.q, &state.h);
    state.q[i] += tau * f;
}

/// Palindromic composition: half steps forward through the ordering, a full
/// step for the last shear, then half steps back.
pub fn step_symmetric(template: &CoefficientTemplate, ordering: &ShearOrdering, tau: f64, state: &mut State) {
    let perm = ordering.perm();
    let (last, head) = perm.split_last().expect("empty ordering");
    let half = 0.5 * tau;
    for &i in head {
        shear(template, i, half, state);
    }
    shear(template, *last, tau, state);
    for &i in head.iter().rev() {
        shear(template, i, half, state);
    }
}

/// Fourth-order composition of three symmetric steps.
pub fn step_yoshida4(template: &CoefficientTemplate, ordering: &ShearOrdering, tau: f64, state: &mut State) {
    let (alpha, beta) = yoshida_coefficients();
    step_symmetric(template, ordering, alpha * tau, state);
    step_symmetric(template, ordering, beta * tau, state);
    step_symmetric(template, ordering, alpha * tau, state);
}

/// One step of the configured method with a signed step size.
pub fn step_signed(template: &CoefficientTemplate, cfg: &StepperConfig, tau: f64, state: &mut State) {
    match cfg.order {
        Order::Two => step_symmetric(template, &cfg.ordering, tau, state),
        Order::Four => step_yoshida4(template, &cfg.ordering, tau, state),
    }
}

/// Integrator owning the template and configuration.
#[derive(Debug, Clone)]
pub struct Stepper<'a> {
    template: &'a CoefficientTemplate,
    cfg: StepperConfig,
}

impl<'a> Stepper<'a> {
    pub fn new(template: &'a CoefficientTemplate, cfg: StepperConfig) -> Result<Self> {
        if cfg.ordering.len() != template.grid().len() {
            return Err(QgError::DimensionMismatch {
                expected: template.grid().len(),
                actual: cfg.ordering.len(),
            });
        }
        Ok(Self { template, cfg })
    }

    pub fn config(&self) -> &StepperConfig {
        &self.cfg
    }

    pub fn step_unchecked(&self, state: &mut State) {
        step_signed(self.template, &self.cfg, self.cfg.tau, state);
    }

    /// Advances one step; `t` only labels a blow-up error.
    pub fn step(&self, state: &mut State, t: f64) -> Result<()> {
        self.step_unchecked(state);
        check_blowup(state, t)
    }

    pub fn step_back(&self, state: &mut State) {
        step_signed(self.template, &self.cfg, -self.cfg.tau, state);
    }
}

pub fn check_blowup(state: &State, t: f64) -> Result<()> {
    let max_abs = state.max_abs();
    if !state.is_finite() || max_abs > BLOWUP_THRESHOLD {
        return Err(QgError::BlowUp { t, max_abs });
    }
    Ok(())
}

/// Determinant of the central finite-difference Jacobian of one step.
/// Costs `2 N^2` steps, so keep N small.
pub fn jacobian_determinant_check(
    template: &CoefficientTemplate,
    cfg: &StepperConfig,
    state: &State,
    eps: f64,
) -> f64 {
    let len = state.len();
    let mut jac = DMatrix::zeros(len, len);
    for j in 0..len {
        let mut plus = state.clone();
        let mut minus = state.clone();
        plus.q[j] += eps;
        minus.q[j] -= eps;
        step_signed(template, cfg, cfg.tau, &mut plus);
        step_signed(template, cfg, cfg.tau, &mut minus);
        for i in 0..len {
            jac[(i, j)] = (plus.q[i] - minus.q[i]) / (2.0 * eps);
        }
    }
    jac.determinant()
}

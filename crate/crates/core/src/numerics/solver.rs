//! Monotone accelerated proximal gradient (FISTA with restart on
//! objective increase), shared by the map-fitting and mixture-design
//! solvers.

use crate::error::{Error, Result};
use crate::numerics::matrix::Matrix;

/// Convergence test applied once per outer iteration.
#[derive(Debug, Clone, Copy)]
pub enum StopRule {
    /// Stop when |F_k − F_{k−1}| ≤ tol·max(1, |F_{k−1}|).
    RelObjChange(f64),
    /// Stop when the prox-gradient fixed-point residual
    /// ‖x − prox(x − step·∇f(x))‖_F / step drops to tol.
    KktResidual(f64),
}

#[derive(Debug, Clone)]
pub struct ApgOutcome {
    pub x: Matrix,
    pub objective: f64,
    pub iterations: usize,
    pub kkt_residual: f64,
    /// Objective value after each outer iteration; nonincreasing.
    pub objective_trace: Vec<f64>,
}

/// Minimize `f(x) + g(x)` where `f` is smooth with known Lipschitz
/// gradient (`step = 1/L`) and `prox` evaluates `prox_{step·g}`.
///
/// The scheme is function-value guarded: whenever the accelerated step
/// would increase the objective, momentum is dropped and a plain proximal
/// gradient step from the previous iterate is taken instead, so the
/// objective is nonincreasing per outer iteration up to floating-point
/// noise.
pub fn apg(
    x0: Matrix,
    step: f64,
    smooth_grad: impl Fn(&Matrix) -> Matrix,
    smooth_val: impl Fn(&Matrix) -> f64,
    prox: impl Fn(&Matrix, f64) -> Result<Matrix>,
    reg_val: impl Fn(&Matrix) -> f64,
    stop: StopRule,
    max_iter: usize,
) -> Result<ApgOutcome> {
    assert!(step > 0.0 && step.is_finite(), "apg: invalid step");
    let objective = |x: &Matrix| smooth_val(x) + reg_val(x);
    let pg_step = |x: &Matrix| prox(&x.sub(&smooth_grad(x).scale(step)), step);

    let mut x = x0;
    let mut f_x = objective(&x);
    let mut y = x.clone();
    let mut t = 1.0f64;
    let mut kkt = f64::INFINITY;
    let mut trace = Vec::new();

    for iter in 1..=max_iter {
        let mut x_next = pg_step(&y)?;
        let mut f_next = objective(&x_next);
        if f_next > f_x {
            // Restart: plain proximal gradient from x cannot increase the
            // objective when step ≤ 1/L.
            // A plain proximal gradient step from x can only increase the
            // objective by floating-point noise when step ≤ 1/L, so it is
            // accepted unconditionally: keeping the old iterate instead
            // would stall the fixed-point residual permanently.
            x_next = pg_step(&x)?;
            f_next = objective(&x_next);
            t = 1.0;
            y = x_next.clone();
        } else {
            let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
            let momentum = (t - 1.0) / t_next;
            y = x_next.add(&x_next.sub(&x).scale(momentum));
            t = t_next;
        }

        kkt = x_next.sub(&pg_step(&x_next)?).frobenius_norm() / step;

        let done = match stop {
            StopRule::RelObjChange(tol) => (f_x - f_next).abs() <= tol * f_x.abs().max(1.0),
            StopRule::KktResidual(tol) => kkt <= tol,
        };
        x = x_next;
        f_x = f_next;
        trace.push(f_x);
        if done {
            return Ok(ApgOutcome {
                x,
                objective: f_x,
                iterations: iter,
                kkt_residual: kkt,
                objective_trace: trace,
            });
        }
    }

    Err(Error::NoConvergence {
        iterations: max_iter,
        residual: kkt,
    })
}

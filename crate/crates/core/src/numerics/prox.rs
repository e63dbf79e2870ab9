//! Proximal operators for the non-negative sparse design problems.

/// Proximal operator of `theta·‖x‖₂` restricted to the non-negative
/// orthant: `max(1 − theta/‖v₊‖₂, 0)·v₊` with `v₊ = max(v, 0)` elementwise.
///
/// This is the exact minimizer of `½‖x − v‖² + theta·‖x‖₂` over `x ≥ 0`.
pub fn prox_nonneg_group(v: &[f64], theta: f64) -> Vec<f64> {
    assert!(theta >= 0.0, "prox_nonneg_group: theta must be nonnegative");
    let vplus: Vec<f64> = v.iter().map(|x| x.max(0.0)).collect();
    let norm = vplus.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm <= theta {
        return vec![0.0; v.len()];
    }
    let scale = 1.0 - theta / norm;
    vplus.into_iter().map(|x| scale * x).collect()
}

/// Proximal operator of `theta·‖x‖₁` restricted to `x ≥ 0`:
/// elementwise `max(v − theta, 0)`.
pub fn prox_nonneg_l1(v: &[f64], theta: f64) -> Vec<f64> {
    assert!(theta >= 0.0, "prox_nonneg_l1: theta must be nonnegative");
    v.iter().map(|x| (x - theta).max(0.0)).collect()
}

/// Proximal operator of `theta·‖x‖₂²` restricted to `x ≥ 0`:
/// elementwise `max(v, 0)/(1 + 2·theta)`.
pub fn prox_nonneg_l2sq(v: &[f64], theta: f64) -> Vec<f64> {
    assert!(theta >= 0.0, "prox_nonneg_l2sq: theta must be nonnegative");
    let scale = 1.0 / (1.0 + 2.0 * theta);
    v.iter().map(|x| x.max(0.0) * scale).collect()
}

/// Projection onto the non-negative orthant.
pub fn project_nonneg(v: &[f64]) -> Vec<f64> {
    v.iter().map(|x| x.max(0.0)).collect()
}

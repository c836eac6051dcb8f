use crate::error::{Error, Result};

/// Flat, index-addressable view over a parameter set.
pub trait ParamVector {
    fn param_count(&self) -> usize;
    fn param(&self, i: usize) -> f64;
    fn set_param(&mut self, i: usize, value: f64);
}

/// A scalar objective with an analytic gradient of the same shape as `P`.
pub trait DifferentiableLoss<P> {
    type Batch: ?Sized;

    fn value(&self, params: &P, batch: &Self::Batch) -> Result<f64>;

    fn value_and_grad(&self, params: &P, batch: &Self::Batch) -> Result<(f64, P)>;
}

/// Analytic gradient of `loss` at `params`.
pub fn grad<P, L>(loss: &L, params: &P, batch: &L::Batch) -> Result<P>
where
    L: DifferentiableLoss<P>,
{
    let (value, g) = loss.value_and_grad(params, batch)?;
    if !value.is_finite() {
        return Err(Error::NonFinite("loss value"));
    }
    Ok(g)
}

/// Largest `|analytic - central| / (|central| + 1e-8)` over all parameters,
/// after discounting the rounding error of the central difference.
pub fn finite_diff_check<P, L>(loss: &L, params: &P, batch: &L::Batch, h: f64) -> Result<f64>
where
    P: ParamVector + Clone,
    L: DifferentiableLoss<P>,
{
    if !(h > 0.0) {
        return Err(Error::InvalidConfig(format!("finite-difference step must be positive, got {h}")));
    }
    let analytic = grad(loss, params, batch)?;
    let mut probe = params.clone();
    let mut worst: f64 = 0.0;
    for i in 0..params.param_count() {
        let x = params.param(i);
        probe.set_param(i, x + h);
        let plus = loss.value(&probe, batch)?;
        probe.set_param(i, x - h);
        let minus = loss.value(&probe, batch)?;
        probe.set_param(i, x);
        let central = (plus - minus) / (2.0 * h);
        // the central difference itself is only known up to the rounding of
        // the two loss values; discrepancies below that are not measurable
        let roundoff = 4.0 * f64::EPSILON * plus.abs().max(minus.abs()) / h;
        let err = ((analytic.param(i) - central).abs() - roundoff).max(0.0) / (central.abs() + 1e-8);
        worst = worst.max(err);
    }
    Ok(worst)
}

use serde::Serialize;

/// A network whose loss gradient can be compared to finite differences.
///
/// Parameters are exposed as a list of flat tensors; `loss_and_gradients`
/// must return gradients in the same order and layout.
pub trait GradientCheckable {
    type Input;

    fn param_tensor_count(&self) -> usize;
    fn param_tensor_name(&self, index: usize) -> String;
    fn param_tensor_mut(&mut self, index: usize) -> &mut [f64];
    fn loss(&self, input: &Self::Input, label: u8) -> f64;
    fn loss_and_gradients(&self, input: &Self::Input, label: u8) -> (f64, Vec<Vec<f64>>);
}

#[derive(Debug, Clone, Serialize)]
pub struct GradientCheckReport {
    pub max_relative_error: f64,
    pub per_tensor: Vec<(String, f64)>,
    pub parameters_checked: usize,
}

pub const FINITE_DIFFERENCE_STEP: f64 = 1e-5;

/// Compares analytic gradients with central differences for every parameter.
///
/// The relative error of one parameter is `|a - n| / max(|a|, |n|, 1e-8)`.
pub fn gradient_check<N: GradientCheckable>(net: &mut N, input: &N::Input, label: u8) -> GradientCheckReport {
    let h = FINITE_DIFFERENCE_STEP;
    let (_, analytic) = net.loss_and_gradients(input, label);
    assert_eq!(analytic.len(), net.param_tensor_count(), "gradient tensor count");
    let mut per_tensor = Vec::with_capacity(analytic.len());
    let mut worst = 0.0f64;
    let mut checked = 0;
    for (t, grad) in analytic.iter().enumerate() {
        assert_eq!(grad.len(), net.param_tensor_mut(t).len(), "gradient length for tensor {t}");
        let mut tensor_worst = 0.0f64;
        for (i, &a) in grad.iter().enumerate() {
            let original = net.param_tensor_mut(t)[i];
            net.param_tensor_mut(t)[i] = original + h;
            let plus = net.loss(input, label);
            net.param_tensor_mut(t)[i] = original - h;
            let minus = net.loss(input, label);
            net.param_tensor_mut(t)[i] = original;
            let numeric = (plus - minus) / (2.0 * h);
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-8);
            tensor_worst = tensor_worst.max(rel);
            checked += 1;
        }
        worst = worst.max(tensor_worst);
        per_tensor.push((net.param_tensor_name(t), tensor_worst));
    }
    GradientCheckReport {
        max_relative_error: worst,
        per_tensor,
        parameters_checked: checked,
    }
}

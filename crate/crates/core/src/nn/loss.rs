/// Logistic function, evaluated without overflow for large `|z|`.
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Sigmoid cross-entropy on a single logit.
///
/// Returns `(loss, d loss / d logit)` using the overflow-free form
/// `max(z, 0) - z*y + ln(1 + exp(-|z|))`.
pub fn sigmoid_xent_loss(logit: f64, label: u8) -> (f64, f64) {
    assert!(label <= 1, "label must be 0 or 1, got {label}");
    let y = f64::from(label);
    let loss = logit.max(0.0) - logit * y + (-logit.abs()).exp().ln_1p();
    (loss, sigmoid(logit) - y)
}

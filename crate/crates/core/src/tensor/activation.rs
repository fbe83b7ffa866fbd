use super::Tensor4;
use crate::error::Result;

pub fn relu(x: &Tensor4) -> Tensor4 {
    let mut y = x.clone();
    for v in y.data_mut() {
        *v = v.max(0.0);
    }
    y
}

/// Passes `grad_out` where `x > 0`. Because `relu(x) > 0` exactly when
/// `x > 0`, the forward output may be supplied in place of `x`.
pub fn relu_backward(x: &Tensor4, grad_out: &Tensor4) -> Result<Tensor4> {
    x.same_dims(grad_out, "relu backward")?;
    let mut g = grad_out.clone();
    for (gv, &xv) in g.data_mut().iter_mut().zip(x.data()) {
        if xv <= 0.0 {
            *gv = 0.0;
        }
    }
    Ok(g)
}

/// Logistic squashing, clamped so the result is strictly inside (0, 1)
/// after rounding to 32 bits.
pub fn sigmoid(x: &Tensor4) -> Tensor4 {
    const LO: f64 = 1.0 / (1u32 << 24) as f64;
    let mut y = x.clone();
    for v in y.data_mut() {
        let s = 1.0 / (1.0 + (-(*v as f64)).exp());
        *v = s.clamp(LO, 1.0 - LO) as f32;
    }
    y
}

//! Loss, optimizer and weight initialization.

use num_traits::Float;
use rand::distr::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::tensor::Tensor4;

/// Mean squared error over every element, with its gradient
/// `2 (pred − target) / len`.
pub fn mse_loss(pred: &Tensor4, target: &Tensor4) -> Result<(f64, Tensor4)> {
    pred.same_dims(target, "mse_loss")?;
    let count = pred.len() as f64;
    let mut sum = 0.0f64;
    let mut grad = pred.clone();
    for (g, &t) in grad.data_mut().iter_mut().zip(target.data()) {
        let d = *g as f64 - t as f64;
        sum += d * d;
        *g = (2.0 * d / count) as f32;
    }
    Ok((sum / count, grad))
}

/// Adam hyperparameters. Defaults are the usual Adam defaults.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdamHyper {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamHyper {
    fn default() -> Self {
        Self { lr: 1e-3, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

impl AdamHyper {
    pub fn validate(&self) -> Result<()> {
        let unit = |b: f64| b > 0.0 && b < 1.0;
        if !(self.lr > 0.0 && unit(self.beta1) && unit(self.beta2) && self.eps > 0.0) {
            return Err(Error::Config(format!("invalid Adam hyperparameters {self:?}")));
        }
        Ok(())
    }
}

/// First/second moment buffers and the number of steps taken.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState<F> {
    pub m: Vec<F>,
    pub v: Vec<F>,
    pub t: u64,
}

impl<F: Float> AdamState<F> {
    pub fn new(len: usize) -> Self {
        Self { m: vec![F::zero(); len], v: vec![F::zero(); len], t: 0 }
    }

    pub fn len(&self) -> usize {
        self.m.len()
    }

    pub fn is_empty(&self) -> bool {
        self.m.is_empty()
    }
}

impl AdamState<f32> {
    /// `t` (u64), length (u64), then `m` and `v`, all little-endian.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(16 + 8 * self.m.len());
        out.extend_from_slice(&self.t.to_le_bytes());
        out.extend_from_slice(&(self.m.len() as u64).to_le_bytes());
        for x in self.m.iter().chain(&self.v) {
            out.extend_from_slice(&x.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let word = |i: usize| -> Result<u64> {
            bytes
                .get(i..i + 8)
                .map(|b| u64::from_le_bytes(b.try_into().unwrap()))
                .ok_or(Error::Truncated { expected: i + 8, found: bytes.len() })
        };
        let t = word(0)?;
        let len = word(8)? as usize;
        let expected = 16 + 8 * len;
        if bytes.len() != expected {
            return Err(Error::Truncated { expected, found: bytes.len() });
        }
        let floats: Vec<f32> = bytes[16..]
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        let (m, v) = floats.split_at(len);
        Ok(Self { m: m.to_vec(), v: v.to_vec(), t })
    }
}

/// The bias-corrected Adam increment for one step, without applying it.
/// Returns the per-element delta to add to the parameters and the new state.
pub fn adam_delta<F: Float>(
    grad: &[F],
    state: &AdamState<F>,
    hyper: &AdamHyper,
) -> Result<(Vec<F>, AdamState<F>)> {
    if grad.len() != state.m.len() || grad.len() != state.v.len() {
        return Err(Error::contract(format!(
            "adam: gradient length {} vs state length {}",
            grad.len(),
            state.m.len()
        )));
    }
    let cast = |x: f64| F::from(x).expect("hyperparameter representable");
    let (b1, b2) = (cast(hyper.beta1), cast(hyper.beta2));
    let (lr, eps) = (cast(hyper.lr), cast(hyper.eps));
    let one = F::one();
    let t = state.t + 1;
    let exp = i32::try_from(t).unwrap_or(i32::MAX);
    let c1 = one - b1.powi(exp);
    let c2 = one - b2.powi(exp);

    let mut m = Vec::with_capacity(grad.len());
    let mut v = Vec::with_capacity(grad.len());
    let mut delta = Vec::with_capacity(grad.len());
    for ((&g, &m0), &v0) in grad.iter().zip(&state.m).zip(&state.v) {
        let m1 = b1 * m0 + (one - b1) * g;
        let v1 = b2 * v0 + (one - b2) * g * g;
        let m_hat = m1 / c1;
        let v_hat = v1 / c2;
        delta.push(-(lr * m_hat / (v_hat.sqrt() + eps)));
        m.push(m1);
        v.push(v1);
    }
    Ok((delta, AdamState { m, v, t }))
}

/// One Adam step: `param' = param + delta`, `t' = t + 1`.
pub fn adam_step<F: Float>(
    param: &[F],
    grad: &[F],
    state: &AdamState<F>,
    hyper: &AdamHyper,
) -> Result<(Vec<F>, AdamState<F>)> {
    if param.len() != grad.len() {
        return Err(Error::contract(format!(
            "adam: parameter length {} vs gradient length {}",
            param.len(),
            grad.len()
        )));
    }
    let (delta, state) = adam_delta(grad, state, hyper)?;
    let param = param.iter().zip(delta).map(|(&p, d)| p + d).collect();
    Ok((param, state))
}

/// He-scaled uniform draw: support `±√(6/fan_in)`, hence variance `2/fan_in`.
pub fn init_weights(len: usize, fan_in: usize, seed: u64) -> Vec<f32> {
    assert!(fan_in >= 1, "fan_in must be >= 1");
    let bound = (6.0 / fan_in as f64).sqrt() as f32;
    let dist = Uniform::new_inclusive(-bound, bound).expect("finite bound");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..len).map(|_| dist.sample(&mut rng)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn identical_tensors_have_zero_loss() {
        let t = Tensor4::filled(2, 1, 3, 3, 0.3);
        let (loss, grad) = mse_loss(&t, &t).unwrap();
        assert_eq!(loss, 0.0);
        assert!(grad.data().iter().all(|&g| g == 0.0));
    }

    #[test]
    fn unit_offset_has_unit_loss() {
        let t = Tensor4::filled(1, 1, 4, 4, 0.25);
        let p = Tensor4::filled(1, 1, 4, 4, 1.25);
        assert_eq!(mse_loss(&p, &t).unwrap().0, 1.0);
    }

    #[test]
    fn mse_gradient_matches_finite_differences() {
        let pred: Vec<f32> = (0..12).map(|i| (i as f32 * 0.37).sin()).collect();
        let target: Vec<f32> = (0..12).map(|i| (i as f32 * 0.11).cos()).collect();
        let p = Tensor4::from_vec(1, 1, 3, 4, pred.clone()).unwrap();
        let t = Tensor4::from_vec(1, 1, 3, 4, target.clone()).unwrap();
        let (_, grad) = mse_loss(&p, &t).unwrap();
        let loss64 = |x: &[f64]| -> f64 {
            x.iter().zip(&target).map(|(a, &b)| (a - b as f64).powi(2)).sum::<f64>() / 12.0
        };
        let base: Vec<f64> = pred.iter().map(|&v| v as f64).collect();
        let h = 1e-3;
        let mut worst = 0.0f64;
        let mut scale = 0.0f64;
        for i in 0..12 {
            let mut up = base.clone();
            let mut dn = base.clone();
            up[i] += h;
            dn[i] -= h;
            let fd = (loss64(&up) - loss64(&dn)) / (2.0 * h);
            worst = worst.max((fd - grad.data()[i] as f64).abs());
            scale = scale.max(fd.abs());
        }
        assert!(worst / scale <= 1e-5, "rel err {}", worst / scale);
    }

    #[test]
    fn mse_rejects_mismatched_dims() {
        let a = Tensor4::zeros(1, 1, 2, 2);
        let b = Tensor4::zeros(1, 1, 2, 3);
        assert!(matches!(mse_loss(&a, &b), Err(Error::Contract(_))));
    }

    #[test]
    fn zero_gradient_from_fresh_state_leaves_params() {
        let p = vec![0.5f32, -1.0, 2.0];
        let (p2, s) = adam_step(&p, &[0.0; 3], &AdamState::new(3), &AdamHyper::default()).unwrap();
        assert_eq!(p2, p);
        assert_eq!(s.t, 1);
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        let hyper = AdamHyper::default();
        let g = [3.0f64, -0.2, 1e-2, -50.0];
        let (delta, _) = adam_delta(&g, &AdamState::new(4), &hyper).unwrap();
        for (d, gv) in delta.iter().zip(g) {
            assert!((d.abs() - hyper.lr).abs() <= 1e-3 * hyper.lr);
            assert_eq!(d.signum(), -gv.signum());
        }
    }

    #[test]
    fn scalar_three_steps_match_hand_rolled_adam() {
        let hyper = AdamHyper { lr: 0.1, beta1: 0.9, beta2: 0.999, eps: 1e-8 };
        let grads = [1.0f64, 1.0, -1.0];

        // Textbook scalar Adam.
        let (mut p, mut m, mut v) = (0.7f64, 0.0f64, 0.0f64);
        for (i, &g) in grads.iter().enumerate() {
            let t = (i + 1) as i32;
            m = 0.9 * m + (1.0 - 0.9) * g;
            v = 0.999 * v + (1.0 - 0.999) * g * g;
            let m_hat = m / (1.0 - 0.9f64.powi(t));
            let v_hat = v / (1.0 - 0.999f64.powi(t));
            p -= 0.1 * m_hat / (v_hat.sqrt() + 1e-8);
        }

        let mut param = vec![0.7f64];
        let mut state = AdamState::new(1);
        for &g in &grads {
            let (np, ns) = adam_step(&param, &[g], &state, &hyper).unwrap();
            param = np;
            state = ns;
        }
        assert_eq!(param[0].to_bits(), p.to_bits());
        assert_eq!(state.t, 3);
    }

    #[test]
    fn adam_rejects_shape_mismatch() {
        let s = AdamState::<f32>::new(2);
        assert!(adam_step(&[0.0f32; 3], &[0.0; 3], &s, &AdamHyper::default()).is_err());
        assert!(adam_step(&[0.0f32; 2], &[0.0; 3], &s, &AdamHyper::default()).is_err());
    }

    #[test]
    fn invalid_hyper_is_rejected() {
        assert!(AdamHyper::default().validate().is_ok());
        assert!(AdamHyper { beta1: 1.0, ..AdamHyper::default() }.validate().is_err());
        assert!(AdamHyper { lr: 0.0, ..AdamHyper::default() }.validate().is_err());
    }

    #[test]
    fn init_is_deterministic_and_bounded() {
        assert_eq!(init_weights(100, 9, 42), init_weights(100, 9, 42));
        assert_ne!(init_weights(100, 9, 42), init_weights(100, 9, 43));
        let bound = (6.0f32 / 2.0).sqrt();
        assert!(init_weights(5000, 2, 7).iter().all(|w| w.abs() <= bound));
    }

    #[test]
    fn init_variance_is_he_scaled() {
        for fan_in in [1usize, 27, 288] {
            let w = init_weights(10_000, fan_in, 123);
            let mean = w.iter().map(|&x| x as f64).sum::<f64>() / w.len() as f64;
            let var = w.iter().map(|&x| (x as f64 - mean).powi(2)).sum::<f64>() / (w.len() - 1) as f64;
            let expect = 2.0 / fan_in as f64;
            assert!((var - expect).abs() <= 0.2 * expect, "fan_in {fan_in}: {var} vs {expect}");
        }
    }

    proptest! {
        #[test]
        fn mse_is_nonnegative_and_zero_only_on_equality(
            a in proptest::collection::vec(-10.0f32..10.0, 9),
            b in proptest::collection::vec(-10.0f32..10.0, 9),
        ) {
            let pa = Tensor4::from_vec(1, 1, 3, 3, a.clone()).unwrap();
            let pb = Tensor4::from_vec(1, 1, 3, 3, b.clone()).unwrap();
            let (loss, _) = mse_loss(&pa, &pb).unwrap();
            prop_assert!(loss >= 0.0);
            prop_assert_eq!(loss == 0.0, a == b);
        }

        #[test]
        fn doubling_lr_doubles_the_step(
            g in proptest::collection::vec(-5.0f32..5.0, 1..16),
            lr in 1e-5f64..1e-1,
        ) {
            let state = AdamState::new(g.len());
            let h1 = AdamHyper { lr, ..AdamHyper::default() };
            let h2 = AdamHyper { lr: 2.0 * lr, ..AdamHyper::default() };
            let (d1, _) = adam_delta(&g, &state, &h1).unwrap();
            let (d2, _) = adam_delta(&g, &state, &h2).unwrap();
            for (a, b) in d1.iter().zip(&d2) {
                prop_assert_eq!(2.0 * a, *b);
            }
        }

        #[test]
        fn state_round_trips_through_bytes(
            m in proptest::collection::vec(any::<f32>(), 0..32),
            t in any::<u64>(),
        ) {
            let v: Vec<f32> = m.iter().map(|x| x.abs()).collect();
            let s = AdamState { m, v, t };
            let back = AdamState::from_bytes(&s.to_bytes()).unwrap();
            prop_assert_eq!(back.t, s.t);
            prop_assert!(back.m.iter().zip(&s.m).all(|(a, b)| a.to_bits() == b.to_bits()));
            prop_assert!(back.v.iter().zip(&s.v).all(|(a, b)| a.to_bits() == b.to_bits()));
        }
    }
}

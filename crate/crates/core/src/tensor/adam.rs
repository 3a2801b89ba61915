use super::mlp::{GradientBundle, Mlp};
use crate::error::{Error, Result};

/// Adam with bias correction. Moments mirror the owning network's shapes.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub step: u64,
    m: GradientBundle,
    v: GradientBundle,
}

impl AdamState {
    pub fn new(params: &Mlp, lr: f64) -> Self {
        AdamState {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            m: GradientBundle::zeros_like(params),
            v: GradientBundle::zeros_like(params),
        }
    }

    pub fn step(&mut self, params: &mut Mlp, grads: &GradientBundle) -> Result<()> {
        params.check_grads(grads)?;
        params.check_grads(&self.m).map_err(|_| Error::config("optimizer state does not match parameters"))?;
        if !grads.is_finite() {
            return Err(Error::numerical("adam gradient", f64::NAN));
        }
        self.step += 1;
        let (b1, b2) = (self.beta1, self.beta2);
        let c1 = 1.0 - b1.powi(self.step as i32);
        let c2 = 1.0 - b2.powi(self.step as i32);
        let (lr, eps) = (self.lr, self.eps);
        let update = |p: &mut f64, m: &mut f64, v: &mut f64, g: f64| {
            *m = b1 * *m + (1.0 - b1) * g;
            *v = b2 * *v + (1.0 - b2) * g * g;
            *p -= lr * (*m / c1) / ((*v / c2).sqrt() + eps);
        };
        for (k, layer) in params.layers_mut().iter_mut().enumerate() {
            ndarray::Zip::from(&mut layer.weight)
                .and(&mut self.m.weights[k])
                .and(&mut self.v.weights[k])
                .and(&grads.weights[k])
                .for_each(|p, m, v, &g| update(p, m, v, g));
            ndarray::Zip::from(&mut layer.bias)
                .and(&mut self.m.biases[k])
                .and(&mut self.v.biases[k])
                .and(&grads.biases[k])
                .for_each(|p, m, v, &g| update(p, m, v, g));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::{Activation, Head, Linear};
    use ndarray::array;

    fn scalar(p: f64) -> Mlp {
        Mlp::from_layers(vec![Linear { weight: array![[p]], bias: array![0.0] }], Activation::Relu, Head::Linear).unwrap()
    }

    fn scalar_grad(g: f64) -> GradientBundle {
        GradientBundle { weights: vec![array![[g]]], biases: vec![array![0.0]] }
    }

    #[test]
    fn zero_gradient_is_identity() {
        let mut p = scalar(0.7);
        let mut st = AdamState::new(&p, 3e-4);
        st.step(&mut p, &scalar_grad(0.0)).unwrap();
        assert_eq!(p, scalar(0.7));
        assert_eq!(st.step, 1);
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        let mut p = scalar(0.0);
        let mut st = AdamState::new(&p, 3e-4);
        st.step(&mut p, &scalar_grad(1.0)).unwrap();
        let moved = p.layers()[0].weight[[0, 0]];
        assert!((moved + 3e-4).abs() < 1e-11, "{moved}");
    }

    #[test]
    fn repeated_gradient_drifts_monotonically() {
        // scalar simulation: with constant g the bias-corrected update is lr*g/(|g|+eps) each step
        let mut p = scalar(1.0);
        let mut st = AdamState::new(&p, 1e-2);
        let mut prev = 1.0;
        let mut expect = 1.0;
        for _ in 0..50 {
            st.step(&mut p, &scalar_grad(-2.0)).unwrap();
            let now = p.layers()[0].weight[[0, 0]];
            assert!(now > prev);
            expect += 1e-2 * 2.0 / (2.0 + 1e-8);
            assert!((now - expect).abs() < 1e-9);
            prev = now;
        }
    }

    #[test]
    fn shape_mismatch_rejected() {
        let mut p = scalar(0.0);
        let mut st = AdamState::new(&p, 1e-3);
        let bad = GradientBundle { weights: vec![array![[1.0, 2.0]]], biases: vec![array![0.0]] };
        assert!(matches!(st.step(&mut p, &bad), Err(Error::Config(_))));
    }
}

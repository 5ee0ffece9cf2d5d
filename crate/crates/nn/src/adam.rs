use crate::error::{NnError, Result};
use crate::tensor::{Scalar, Tensor};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 1e-4,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

impl AdamConfig {
    pub fn with_lr(lr: f64) -> Self {
        Self { lr, ..Self::default() }
    }
}

/// Parameters of one layer paired with their gradients.
pub type ParamGroup<'a, F> = Vec<(&'a mut Tensor<F>, &'a Tensor<F>)>;

/// Adam optimiser state: first/second moments per parameter tensor.
#[derive(Clone, Debug)]
pub struct Adam<F = f32> {
    pub config: AdamConfig,
    m: Vec<Tensor<F>>,
    v: Vec<Tensor<F>>,
    step: u64,
}

impl<F: Scalar> Adam<F> {
    pub fn new(config: AdamConfig) -> Self {
        Self {
            config,
            m: Vec::new(),
            v: Vec::new(),
            step: 0,
        }
    }

    pub fn steps_taken(&self) -> u64 {
        self.step
    }

    /// One bias-corrected Adam update over every group. Gradients are all
    /// validated before any parameter changes; a non-finite value aborts the
    /// step and names the offending group (layer) and tensor.
    pub fn step(&mut self, groups: Vec<ParamGroup<'_, F>>) -> Result<()> {
        for (li, group) in groups.iter().enumerate() {
            for (pi, (p, g)) in group.iter().enumerate() {
                g.expect_shape(p.shape(), "adam gradient")?;
                if !g.is_finite() {
                    return Err(NnError::NonFiniteGradient { layer: li, param: pi });
                }
            }
        }
        let flat: Vec<(&mut Tensor<F>, &Tensor<F>)> = groups.into_iter().flatten().collect();
        if self.m.is_empty() {
            self.m = flat.iter().map(|(p, _)| Tensor::zeros(p.shape())).collect();
            self.v = self.m.clone();
        }
        if self.m.len() != flat.len() {
            return Err(NnError::DimensionMismatch(format!(
                "adam state tracks {} tensors, step received {}",
                self.m.len(),
                flat.len()
            )));
        }
        for (m, (p, _)) in self.m.iter().zip(&flat) {
            m.expect_shape(p.shape(), "adam moment")?;
        }
        self.step += 1;
        let c = &self.config;
        let bc1 = 1.0 - c.beta1.powi(self.step.min(i32::MAX as u64) as i32);
        let bc2 = 1.0 - c.beta2.powi(self.step.min(i32::MAX as u64) as i32);
        let (b1, b2) = (F::of(c.beta1), F::of(c.beta2));
        let (ob1, ob2) = (F::of(1.0 - c.beta1), F::of(1.0 - c.beta2));
        let step_size = F::of(c.lr / bc1);
        let inv_bc2_sqrt = F::of(1.0 / bc2.sqrt());
        let eps = F::of(c.eps);
        for ((p, g), (m, v)) in flat.into_iter().zip(self.m.iter_mut().zip(self.v.iter_mut())) {
            let pd = p.data_mut();
            let gd = g.data();
            let md = m.data_mut();
            let vd = v.data_mut();
            for i in 0..pd.len() {
                let gi = gd[i];
                md[i] = b1 * md[i] + ob1 * gi;
                vd[i] = b2 * vd[i] + ob2 * gi * gi;
                pd[i] -= step_size * md[i] / (vd[i].sqrt() * inv_bc2_sqrt + eps);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar(v: f64) -> Tensor<f64> {
        Tensor::from_vec(vec![v])
    }

    #[test]
    fn zero_gradient_is_fixed_point() {
        let mut adam = Adam::new(AdamConfig::with_lr(0.1));
        let mut p = Tensor::<f64>::from_vec(vec![1.0, -2.0, 3.5]);
        let g = Tensor::zeros(&[3]);
        for _ in 0..10 {
            adam.step(vec![vec![(&mut p, &g)]]).unwrap();
        }
        assert_eq!(p.data(), &[1.0, -2.0, 3.5]);
    }

    #[test]
    fn first_step_moves_by_lr() {
        let mut adam = Adam::new(AdamConfig::with_lr(0.01));
        let mut p = scalar(0.0);
        let g = scalar(-3.7);
        adam.step(vec![vec![(&mut p, &g)]]).unwrap();
        assert!((p[0] - 0.01).abs() < 1e-9, "{}", p[0]);
    }

    #[test]
    fn minimises_scalar_quadratic() {
        // f(w) = (w - 3)^2 from w = 0, lr 0.1, 200 steps.
        let mut adam = Adam::new(AdamConfig::with_lr(0.1));
        let mut w = scalar(0.0);
        for _ in 0..200 {
            let g = scalar(2.0 * (w[0] - 3.0));
            adam.step(vec![vec![(&mut w, &g)]]).unwrap();
        }
        assert!((w[0] - 3.0).abs() < 0.05, "w = {}", w[0]);
    }

    #[test]
    fn non_finite_gradient_names_layer() {
        let mut adam = Adam::new(AdamConfig::default());
        let mut a = scalar(1.0);
        let mut b = scalar(1.0);
        let ga = scalar(0.5);
        let gb = scalar(f64::NAN);
        let err = adam
            .step(vec![vec![(&mut a, &ga)], vec![(&mut b, &gb)]])
            .unwrap_err();
        assert!(matches!(err, NnError::NonFiniteGradient { layer: 1, param: 0 }));
        assert_eq!(a[0], 1.0);
        assert_eq!(adam.steps_taken(), 0);
    }
}

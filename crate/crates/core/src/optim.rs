//! ADADELTA: per-parameter step sizes from running averages of squared
//! gradients and squared updates.

use num_traits::Float;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Adadelta {
    pub rho: f64,
    pub epsilon: f64,
    pub learning_rate: f64,
}

impl Default for Adadelta {
    /// Published defaults: ρ = 0.95, ε = 1e-6, unit learning rate.
    fn default() -> Self {
        Self {
            rho: 0.95,
            epsilon: 1e-6,
            learning_rate: 1.0,
        }
    }
}

/// Accumulators for one parameter tensor.
#[derive(Clone, Debug)]
pub struct AdadeltaState<T> {
    sq_grad: Vec<T>,
    sq_update: Vec<T>,
}

impl<T: Float> AdadeltaState<T> {
    pub fn new(len: usize) -> Self {
        Self {
            sq_grad: vec![T::zero(); len],
            sq_update: vec![T::zero(); len],
        }
    }
}

impl Adadelta {
    pub fn step<T: Float>(&self, state: &mut AdadeltaState<T>, params: &mut [T], grads: &[T]) {
        debug_assert_eq!(params.len(), grads.len());
        debug_assert_eq!(params.len(), state.sq_grad.len());
        let rho = T::from(self.rho).unwrap();
        let one_minus = T::one() - rho;
        let eps = T::from(self.epsilon).unwrap();
        let lr = T::from(self.learning_rate).unwrap();
        for (((p, &g), eg), ed) in params
            .iter_mut()
            .zip(grads)
            .zip(state.sq_grad.iter_mut())
            .zip(state.sq_update.iter_mut())
        {
            *eg = rho * *eg + one_minus * g * g;
            let update = -((*ed + eps).sqrt() / (*eg + eps).sqrt()) * g;
            *ed = rho * *ed + one_minus * update * update;
            *p = *p + lr * update;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_step_matches_hand_computation() {
        let opt = Adadelta::default();
        let mut state = AdadeltaState::<f64>::new(1);
        let mut p = [1.0];
        opt.step(&mut state, &mut p, &[2.0]);
        let eg = 0.05 * 4.0;
        let expected = 1.0 - (1e-6f64).sqrt() / (eg + 1e-6f64).sqrt() * 2.0;
        assert!((p[0] - expected).abs() < 1e-15);
    }

    #[test]
    fn minimizes_a_quadratic() {
        let opt = Adadelta::default();
        let mut state = AdadeltaState::<f64>::new(2);
        let mut p = [3.0, -2.0];
        for _ in 0..20_000 {
            let g = [2.0 * (p[0] - 1.0), 2.0 * (p[1] + 0.5)];
            opt.step(&mut state, &mut p, &g);
        }
        assert!((p[0] - 1.0).abs() < 1e-2 && (p[1] + 0.5).abs() < 1e-2, "{p:?}");
    }
}

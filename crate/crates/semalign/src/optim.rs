//! Trainable parameters, the Adam optimizer, and the central finite-difference
//! gradient checker.

use crate::autodiff::{Graph, NodeId};
use ndarray::Array2;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum OptimError {
    #[error("function value is not finite at coordinate {coordinate} of parameter {parameter}")]
    NonFiniteValue { parameter: usize, coordinate: usize },
}

/// A named dense parameter with its gradient accumulator.
#[derive(Debug, Clone, PartialEq)]
pub struct Parameter {
    pub name: String,
    pub values: Array2<f64>,
    pub grad: Array2<f64>,
}

impl Parameter {
    pub fn new(name: impl Into<String>, values: Array2<f64>) -> Parameter {
        let grad = Array2::zeros(values.dim());
        Parameter {
            name: name.into(),
            values,
            grad,
        }
    }

    pub fn zero_grad(&mut self) {
        self.grad.fill(0.0);
    }
}

/// Copies the gradients computed by `graph.backward` into the parameters.
/// `leaves[k]` must be the leaf node holding `params[k].values`.
pub fn accumulate_gradients(graph: &Graph, leaves: &[NodeId], params: &mut [Parameter]) {
    assert_eq!(leaves.len(), params.len(), "leaf/parameter count mismatch");
    for (leaf, param) in leaves.iter().zip(params.iter_mut()) {
        match graph.grad(*leaf) {
            Some(g) => param.grad += g,
            None => {} // unreached leaf: gradient is zero
        }
    }
}

/// Adam moment accumulators for one parameter group.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    m: Vec<Array2<f64>>,
    v: Vec<Array2<f64>>,
    pub step_count: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamState {
    /// Canonical defaults: beta1 = 0.9, beta2 = 0.999, eps = 1e-8.
    pub fn new(params: &[Parameter]) -> AdamState {
        AdamState::with_hyperparameters(params, 0.9, 0.999, 1e-8)
    }

    pub fn with_hyperparameters(
        params: &[Parameter],
        beta1: f64,
        beta2: f64,
        eps: f64,
    ) -> AdamState {
        assert!(0.0 < beta1 && beta1 < 1.0, "beta1 must be in (0,1)");
        assert!(0.0 < beta2 && beta2 < 1.0, "beta2 must be in (0,1)");
        AdamState {
            m: params.iter().map(|p| Array2::zeros(p.values.dim())).collect(),
            v: params.iter().map(|p| Array2::zeros(p.values.dim())).collect(),
            step_count: 0,
            beta1,
            beta2,
            eps,
        }
    }

    pub fn moments(&self) -> (&[Array2<f64>], &[Array2<f64>]) {
        (&self.m, &self.v)
    }

    /// Restores a previously saved state.
    pub fn restore(
        m: Vec<Array2<f64>>,
        v: Vec<Array2<f64>>,
        step_count: u64,
        beta1: f64,
        beta2: f64,
        eps: f64,
    ) -> AdamState {
        AdamState {
            m,
            v,
            step_count,
            beta1,
            beta2,
            eps,
        }
    }
}

/// One bias-corrected Adam update over the group at learning rate `lr`,
/// consuming the gradients currently stored in the parameters.
pub fn adam_step(state: &mut AdamState, params: &mut [Parameter], lr: f64) {
    assert!(lr >= 0.0, "learning rate must be nonnegative");
    assert_eq!(state.m.len(), params.len(), "state/parameter count mismatch");
    state.step_count += 1;
    let t = state.step_count as i32;
    let bc1 = 1.0 - state.beta1.powi(t);
    let bc2 = 1.0 - state.beta2.powi(t);
    for (k, p) in params.iter_mut().enumerate() {
        let m = &mut state.m[k];
        let v = &mut state.v[k];
        for ((m, v), (x, g)) in m
            .iter_mut()
            .zip(v.iter_mut())
            .zip(p.values.iter_mut().zip(p.grad.iter()))
        {
            *m = state.beta1 * *m + (1.0 - state.beta1) * g;
            *v = state.beta2 * *v + (1.0 - state.beta2) * g * g;
            let m_hat = *m / bc1;
            let v_hat = *v / bc2;
            *x -= lr * m_hat / (v_hat.sqrt() + state.eps);
        }
    }
}

/// Central finite differences of `f` around `points`, compared against
/// `analytic`. Returns the maximum relative error over all coordinates, with
/// denominator `max(|analytic|, |numeric|, 1e-12)`.
pub fn finite_diff_check(
    f: impl Fn(&[Array2<f64>]) -> f64,
    points: &[Array2<f64>],
    analytic: &[Array2<f64>],
    h: f64,
) -> Result<f64, OptimError> {
    assert!(h > 0.0, "step size must be positive");
    assert_eq!(points.len(), analytic.len(), "point/gradient count mismatch");
    let mut max_rel = 0.0f64;
    let mut work: Vec<Array2<f64>> = points.to_vec();
    for (pi, point) in points.iter().enumerate() {
        assert_eq!(point.dim(), analytic[pi].dim(), "gradient shape mismatch");
        for idx in 0..point.len() {
            let (r, c) = (idx / point.ncols(), idx % point.ncols());
            let original = work[pi][[r, c]];
            work[pi][[r, c]] = original + h;
            let plus = f(&work);
            work[pi][[r, c]] = original - h;
            let minus = f(&work);
            work[pi][[r, c]] = original;
            if !plus.is_finite() || !minus.is_finite() {
                return Err(OptimError::NonFiniteValue {
                    parameter: pi,
                    coordinate: idx,
                });
            }
            let numeric = (plus - minus) / (2.0 * h);
            let a = analytic[pi][[r, c]];
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-12);
            max_rel = max_rel.max(rel);
        }
    }
    Ok(max_rel)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::Graph;
    use ndarray::array;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_gradients_leave_parameters_unchanged() {
        let mut p = vec![Parameter::new("w", array![[1.0, -2.0], [0.5, 3.0]])];
        let before = p[0].values.clone();
        let mut state = AdamState::new(&p);
        adam_step(&mut state, &mut p, 0.1);
        assert_eq!(p[0].values, before);
    }

    #[test]
    fn first_step_magnitude_is_close_to_lr() {
        // With a constant gradient the bias-corrected first step is
        // lr * g / (|g| + eps), i.e. a signed step of magnitude ~lr.
        let mut p = vec![Parameter::new("w", array![[1.0, 1.0]])];
        p[0].grad = array![[0.3, -0.05]];
        let mut state = AdamState::new(&p);
        adam_step(&mut state, &mut p, 0.01);
        let delta0 = 1.0 - p[0].values[[0, 0]];
        let delta1 = 1.0 - p[0].values[[0, 1]];
        assert!((delta0 - 0.01).abs() < 1e-6, "delta0 = {delta0}");
        assert!((delta1 + 0.01).abs() < 1e-6, "delta1 = {delta1}");
    }

    #[test]
    fn adam_minimizes_a_quadratic() {
        // Scalar simulation oracle: 100 steps on f(x) = x^2 from x = 1.
        let mut p = vec![Parameter::new("x", array![[1.0]])];
        let mut state = AdamState::new(&p);
        for _ in 0..100 {
            let x = p[0].values[[0, 0]];
            p[0].zero_grad();
            p[0].grad[[0, 0]] = 2.0 * x;
            adam_step(&mut state, &mut p, 0.1);
        }
        assert!(p[0].values[[0, 0]].abs() < 0.1);
    }

    #[test]
    fn zero_learning_rate_is_identity() {
        let mut p = vec![Parameter::new("w", array![[0.7, -0.4]])];
        p[0].grad = array![[5.0, -3.0]];
        let before = p[0].values.clone();
        let mut state = AdamState::new(&p);
        adam_step(&mut state, &mut p, 0.0);
        assert_eq!(p[0].values, before);
        assert_eq!(state.step_count, 1);
    }

    #[test]
    fn finite_diff_on_quadratic_is_nearly_exact() {
        let x = array![[0.3, -1.2], [0.8, 2.0]];
        let f = |ps: &[Array2<f64>]| ps[0].iter().map(|v| v * v).sum::<f64>();
        let analytic = vec![x.mapv(|v| 2.0 * v)];
        let err = finite_diff_check(f, &[x], &analytic, 1e-5).unwrap();
        assert!(err < 1e-9, "err = {err}");
    }

    #[test]
    fn finite_diff_reports_non_finite_values() {
        let x = array![[0.0]];
        let f = |ps: &[Array2<f64>]| ps[0][[0, 0]].ln();
        let analytic = vec![array![[f64::INFINITY]]];
        assert_eq!(
            finite_diff_check(f, &[x], &analytic, 1e-3).unwrap_err(),
            OptimError::NonFiniteValue {
                parameter: 0,
                coordinate: 0
            }
        );
    }

    #[test]
    fn accumulated_graph_gradients_pass_finite_diff() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let x0 = Array2::from_shape_fn((2, 3), |_| rng.gen_range(0.2..1.0));
        let w0 = Array2::from_shape_fn((3, 2), |_| rng.gen_range(-0.8..0.8));

        let f = |ps: &[Array2<f64>]| {
            let mut g = Graph::new();
            let x = g.var(ps[0].clone());
            let w = g.var(ps[1].clone());
            let y = g.matmul(x, w);
            let t = g.tanh(y);
            let out = g.mean(t);
            g.scalar(out)
        };

        let mut g = Graph::new();
        let x = g.var(x0.clone());
        let w = g.var(w0.clone());
        let y = g.matmul(x, w);
        let t = g.tanh(y);
        let out = g.mean(t);
        g.backward(out);

        let mut params = vec![
            Parameter::new("x", x0.clone()),
            Parameter::new("w", w0.clone()),
        ];
        accumulate_gradients(&g, &[x, w], &mut params);
        let analytic: Vec<_> = params.iter().map(|p| p.grad.clone()).collect();
        let err = finite_diff_check(f, &[x0, w0], &analytic, 1e-5).unwrap();
        assert!(err < 1e-6, "err = {err}");
    }
}

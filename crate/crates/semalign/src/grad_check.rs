//! Randomized gradient-check battery: analytic gradients from the autodiff
//! graph against central finite differences of the independent value-route
//! loss.

use crate::autodiff::Graph;
use crate::loss::{total_loss, EmbeddingBatch, LossConfig};
use crate::loss_graph::build_total_loss;
use crate::optim::{finite_diff_check, OptimError};
use crate::similarity::SoftTargetMatrix;
use ndarray::Array2;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub const GRAD_CHECK_H: f64 = 1e-5;
pub const GRAD_CHECK_THRESHOLD: f64 = 1e-4;

const BATCH_SIZES: [usize; 3] = [2, 4, 8];
const DIMS: [usize; 2] = [3, 16];
const TAUS: [f64; 2] = [0.07, 1.0];

/// One randomized configuration's outcome.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GradCheckCase {
    pub n: usize,
    pub d: usize,
    pub tau: f64,
    pub max_rel_err: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GradCheckReport {
    pub seed: u64,
    pub h: f64,
    pub threshold: f64,
    pub cases: Vec<GradCheckCase>,
    pub max_rel_err: f64,
    pub passed: bool,
}

fn random_soft_target(rng: &mut ChaCha8Rng, n: usize) -> SoftTargetMatrix {
    let mut s = Array2::zeros((n, n));
    for i in 0..n {
        s[[i, i]] = 1.0;
        for j in (i + 1)..n {
            let v: f64 = rng.gen_range(0.0..1.0);
            s[[i, j]] = v;
            s[[j, i]] = v;
        }
    }
    SoftTargetMatrix::from_values(s).expect("construction is symmetric and in range")
}

/// Checks one random configuration; returns its maximum relative error.
pub fn check_one(
    rng: &mut ChaCha8Rng,
    n: usize,
    d: usize,
    tau: f64,
) -> Result<GradCheckCase, OptimError> {
    let v = Array2::from_shape_fn((n, d), |_| rng.gen_range(-1.0..1.0));
    let t = Array2::from_shape_fn((n, d), |_| rng.gen_range(-1.0..1.0));
    let s = random_soft_target(rng, n);
    let cfg = LossConfig {
        tau,
        alpha: 1.0,
        beta: 1.0,
        epsilon_smooth: 1e-6,
    };

    let mut g = Graph::new();
    let vn = g.var(v.clone());
    let tn = g.var(t.clone());
    let nodes = build_total_loss(&mut g, vn, tn, Some(&s), &cfg);
    g.backward(nodes.l_total);
    let analytic = vec![g.grad(vn).unwrap().clone(), g.grad(tn).unwrap().clone()];

    let f = |ps: &[Array2<f64>]| {
        let batch = EmbeddingBatch::new(ps[0].clone(), ps[1].clone()).unwrap();
        total_loss(&batch, Some(&s), &cfg).unwrap().l_total
    };
    let max_rel_err = finite_diff_check(f, &[v, t], &analytic, GRAD_CHECK_H)?;
    Ok(GradCheckCase {
        n,
        d,
        tau,
        max_rel_err,
    })
}

/// Runs `n_cases` random configurations drawn from the (batch, dim,
/// temperature) grid with alpha = beta = 1.
pub fn grad_check_battery(seed: u64, n_cases: usize) -> Result<GradCheckReport, OptimError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cases = Vec::with_capacity(n_cases);
    for _ in 0..n_cases {
        let n = BATCH_SIZES[rng.gen_range(0..BATCH_SIZES.len())];
        let d = DIMS[rng.gen_range(0..DIMS.len())];
        let tau = TAUS[rng.gen_range(0..TAUS.len())];
        cases.push(check_one(&mut rng, n, d, tau)?);
    }
    let max_rel_err = cases.iter().map(|c| c.max_rel_err).fold(0.0, f64::max);
    Ok(GradCheckReport {
        seed,
        h: GRAD_CHECK_H,
        threshold: GRAD_CHECK_THRESHOLD,
        passed: max_rel_err < GRAD_CHECK_THRESHOLD,
        cases,
        max_rel_err,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn battery_passes_and_covers_the_grid() {
        let report = grad_check_battery(7, 20).unwrap();
        assert!(report.passed, "max rel err = {}", report.max_rel_err);
        assert_eq!(report.cases.len(), 20);
        assert!(report.cases.iter().any(|c| c.n == 8));
        assert!(report.cases.iter().any(|c| c.tau == 1.0));
    }

    #[test]
    fn battery_is_deterministic() {
        let a = grad_check_battery(3, 5).unwrap();
        let b = grad_check_battery(3, 5).unwrap();
        assert_eq!(
            serde_json::to_string(&a).unwrap(),
            serde_json::to_string(&b).unwrap()
        );
    }
}

//! Differentiable construction of the total loss on an autodiff [`Graph`].
//!
//! This mirrors the value-route functions in [`crate::loss`]; the two paths
//! are cross-checked in tests and by the finite-difference battery.

use crate::autodiff::{Graph, NodeId};
use crate::loss::{soft_target, LossConfig};
use crate::similarity::SoftTargetMatrix;

/// Scalar loss nodes of one evaluation.
pub struct LossNodes {
    pub l_v2t: NodeId,
    pub l_t2v: NodeId,
    pub l_clip: NodeId,
    pub l_se: NodeId,
    pub l_total: NodeId,
}

fn neg_mean_log_diag(g: &mut Graph, p: NodeId) -> NodeId {
    let d = g.diag(p);
    let l = g.ln(d);
    let m = g.mean(l);
    g.mul_scalar(m, -1.0)
}

/// Mean per-row KL divergence of `p` from the constant target `q`:
/// `sum(p * (ln p - ln q)) / n`.
fn kl_to_constant(g: &mut Graph, p: NodeId, q: NodeId, n: usize) -> NodeId {
    let ln_p = g.ln(p);
    let ln_q = g.ln(q);
    let diff = g.sub(ln_p, ln_q);
    let terms = g.mul(p, diff);
    let total = g.sum(terms);
    g.div_scalar(total, n as f64)
}

/// Builds the full loss from raw (unnormalized) embedding nodes `v` and `t`
/// of shape N x d. The soft target enters as a constant; `soft` must be
/// present whenever `cfg.beta > 0`.
pub fn build_total_loss(
    g: &mut Graph,
    v: NodeId,
    t: NodeId,
    soft: Option<&SoftTargetMatrix>,
    cfg: &LossConfig,
) -> LossNodes {
    assert!(
        soft.is_some() || cfg.beta == 0.0,
        "soft target required when beta > 0"
    );
    let n = g.value(v).nrows();

    let v_norm = g.row_norm(v);
    let vn = g.div_cols(v, v_norm);
    let t_norm = g.row_norm(t);
    let tn = g.div_cols(t, t_norm);
    let tn_t = g.transpose(tn);
    let c = g.matmul(vn, tn_t);
    let c_tau = g.div_scalar(c, cfg.tau);
    let p_v2t = g.row_softmax(c_tau);
    let c_tau_t = g.transpose(c_tau);
    let p_t2v = g.row_softmax(c_tau_t);

    let l_v2t = neg_mean_log_diag(g, p_v2t);
    let l_t2v = neg_mean_log_diag(g, p_t2v);
    let sum_clip = g.add(l_v2t, l_t2v);
    let l_clip = g.mul_scalar(sum_clip, 0.5);

    let l_se = match soft {
        Some(s) => {
            let q_v2t = g.constant(soft_target(s, cfg.epsilon_smooth));
            let q_t2v_values = {
                let transposed = s.values().t().to_owned();
                let mut q = transposed;
                q.mapv_inplace(|x| x + cfg.epsilon_smooth);
                for mut row in q.rows_mut() {
                    let sum: f64 = row.iter().sum();
                    for x in row.iter_mut() {
                        *x /= sum;
                    }
                }
                q
            };
            let q_t2v = g.constant(q_t2v_values);
            let kl_v = kl_to_constant(g, p_v2t, q_v2t, n);
            let kl_t = kl_to_constant(g, p_t2v, q_t2v, n);
            let sum_se = g.add(kl_v, kl_t);
            g.mul_scalar(sum_se, 0.5)
        }
        None => g.constant(ndarray::Array2::zeros((1, 1))),
    };

    let weighted_clip = g.mul_scalar(l_clip, cfg.alpha);
    let weighted_se = match soft {
        Some(_) => g.mul_scalar(l_se, cfg.beta),
        None => l_se,
    };
    let l_total = g.add(weighted_clip, weighted_se);

    LossNodes {
        l_v2t,
        l_t2v,
        l_clip,
        l_se,
        l_total,
    }
}

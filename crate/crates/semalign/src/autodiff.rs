//! Minimal reverse-mode automatic differentiation over dense `f64` matrices.
//!
//! A [`Graph`] is an eager tape: each builder call evaluates the forward
//! value immediately and records the operation. `backward` walks the tape in
//! reverse and accumulates exact gradients for every differentiable leaf.
//! Scalars are 1x1 matrices; vectors are single-row or single-column
//! matrices. Shape violations are programmer errors and panic.

use ndarray::{Array2, Axis};

/// Handle to a node in a [`Graph`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NodeId(usize);

#[derive(Debug, Clone)]
enum Op {
    /// Differentiable leaf.
    Var,
    /// Non-differentiable leaf.
    Const,
    MatMul(NodeId, NodeId),
    Transpose(NodeId),
    Add(NodeId, NodeId),
    Sub(NodeId, NodeId),
    Mul(NodeId, NodeId),
    /// Adds a 1 x n row vector to every row of an m x n matrix.
    AddRowVec(NodeId, NodeId),
    MulScalar(NodeId, f64),
    DivScalar(NodeId, f64),
    Exp(NodeId),
    Ln(NodeId),
    Tanh(NodeId),
    RowSoftmax(NodeId),
    /// Euclidean norm of each row: m x n -> m x 1.
    RowNorm(NodeId),
    /// Divides each row of an m x n matrix by the matching m x 1 entry.
    DivCols(NodeId, NodeId),
    /// Main diagonal of a square matrix as n x 1.
    Diag(NodeId),
    Mean(NodeId),
    Sum(NodeId),
    /// Selects rows of a table by index; repeated indices accumulate.
    GatherRows(NodeId, Vec<usize>),
    /// Column-wise mean over rows: m x n -> 1 x n.
    MeanRows(NodeId),
    /// Stacks inputs vertically.
    ConcatRows(Vec<NodeId>),
}

struct Node {
    op: Op,
    value: Array2<f64>,
}

/// Eager computation tape with reverse-mode differentiation.
#[derive(Default)]
pub struct Graph {
    nodes: Vec<Node>,
    grads: Vec<Option<Array2<f64>>>,
}

impl Graph {
    pub fn new() -> Graph {
        Graph::default()
    }

    fn push(&mut self, op: Op, value: Array2<f64>) -> NodeId {
        self.nodes.push(Node { op, value });
        self.grads.push(None);
        NodeId(self.nodes.len() - 1)
    }

    pub fn value(&self, id: NodeId) -> &Array2<f64> {
        &self.nodes[id.0].value
    }

    /// Value of a 1x1 node.
    pub fn scalar(&self, id: NodeId) -> f64 {
        let v = self.value(id);
        assert_eq!(v.dim(), (1, 1), "node is not a scalar");
        v[[0, 0]]
    }

    /// Gradient of the last `backward` output with respect to `id`, if the
    /// node is differentiable and reachable.
    pub fn grad(&self, id: NodeId) -> Option<&Array2<f64>> {
        self.grads[id.0].as_ref()
    }

    /// Differentiable leaf.
    pub fn var(&mut self, value: Array2<f64>) -> NodeId {
        self.push(Op::Var, value)
    }

    /// Non-differentiable leaf.
    pub fn constant(&mut self, value: Array2<f64>) -> NodeId {
        self.push(Op::Const, value)
    }

    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let (ar, ac) = self.value(a).dim();
        let (br, bc) = self.value(b).dim();
        assert_eq!(ac, br, "matmul shape mismatch: {ar}x{ac} . {br}x{bc}");
        let value = self.value(a).dot(self.value(b));
        self.push(Op::MatMul(a, b), value)
    }

    pub fn transpose(&mut self, a: NodeId) -> NodeId {
        let value = self.value(a).t().to_owned();
        self.push(Op::Transpose(a), value)
    }

    fn binary_same_shape(&mut self, a: NodeId, b: NodeId, name: &str) {
        assert_eq!(
            self.value(a).dim(),
            self.value(b).dim(),
            "{name} shape mismatch"
        );
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> NodeId {
        self.binary_same_shape(a, b, "add");
        let value = self.value(a) + self.value(b);
        self.push(Op::Add(a, b), value)
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> NodeId {
        self.binary_same_shape(a, b, "sub");
        let value = self.value(a) - self.value(b);
        self.push(Op::Sub(a, b), value)
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> NodeId {
        self.binary_same_shape(a, b, "mul");
        let value = self.value(a) * self.value(b);
        self.push(Op::Mul(a, b), value)
    }

    pub fn add_row_vec(&mut self, a: NodeId, v: NodeId) -> NodeId {
        let (_, ac) = self.value(a).dim();
        assert_eq!(self.value(v).dim(), (1, ac), "row vector shape mismatch");
        let value = self.value(a) + &self.value(v).row(0);
        self.push(Op::AddRowVec(a, v), value)
    }

    pub fn mul_scalar(&mut self, a: NodeId, c: f64) -> NodeId {
        let value = self.value(a).mapv(|x| x * c);
        self.push(Op::MulScalar(a, c), value)
    }

    pub fn div_scalar(&mut self, a: NodeId, c: f64) -> NodeId {
        assert!(c != 0.0, "division by zero scalar");
        let value = self.value(a).mapv(|x| x / c);
        self.push(Op::DivScalar(a, c), value)
    }

    pub fn exp(&mut self, a: NodeId) -> NodeId {
        let value = self.value(a).mapv(f64::exp);
        self.push(Op::Exp(a), value)
    }

    pub fn ln(&mut self, a: NodeId) -> NodeId {
        let value = self.value(a).mapv(f64::ln);
        self.push(Op::Ln(a), value)
    }

    pub fn tanh(&mut self, a: NodeId) -> NodeId {
        let value = self.value(a).mapv(f64::tanh);
        self.push(Op::Tanh(a), value)
    }

    pub fn row_softmax(&mut self, a: NodeId) -> NodeId {
        let mut value = self.value(a).clone();
        for mut row in value.rows_mut() {
            let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let mut sum = 0.0;
            for x in row.iter_mut() {
                *x = (*x - max).exp();
                sum += *x;
            }
            for x in row.iter_mut() {
                *x /= sum;
            }
        }
        self.push(Op::RowSoftmax(a), value)
    }

    pub fn row_norm(&mut self, a: NodeId) -> NodeId {
        let rows = self.value(a).nrows();
        let mut value = Array2::zeros((rows, 1));
        for (i, row) in self.value(a).rows().into_iter().enumerate() {
            value[[i, 0]] = row.iter().map(|x| x * x).sum::<f64>().sqrt();
        }
        self.push(Op::RowNorm(a), value)
    }

    pub fn div_cols(&mut self, a: NodeId, c: NodeId) -> NodeId {
        let (ar, _) = self.value(a).dim();
        assert_eq!(self.value(c).dim(), (ar, 1), "column divisor shape mismatch");
        let mut value = self.value(a).clone();
        for (i, mut row) in value.rows_mut().into_iter().enumerate() {
            let d = self.nodes[c.0].value[[i, 0]];
            for x in row.iter_mut() {
                *x /= d;
            }
        }
        self.push(Op::DivCols(a, c), value)
    }

    pub fn diag(&mut self, a: NodeId) -> NodeId {
        let (r, c) = self.value(a).dim();
        assert_eq!(r, c, "diag needs a square matrix");
        let mut value = Array2::zeros((r, 1));
        for i in 0..r {
            value[[i, 0]] = self.nodes[a.0].value[[i, i]];
        }
        self.push(Op::Diag(a), value)
    }

    pub fn mean(&mut self, a: NodeId) -> NodeId {
        let len = self.value(a).len() as f64;
        let value = Array2::from_elem((1, 1), self.value(a).sum() / len);
        self.push(Op::Mean(a), value)
    }

    pub fn sum(&mut self, a: NodeId) -> NodeId {
        let value = Array2::from_elem((1, 1), self.value(a).sum());
        self.push(Op::Sum(a), value)
    }

    pub fn gather_rows(&mut self, table: NodeId, indices: &[usize]) -> NodeId {
        let (rows, cols) = self.value(table).dim();
        assert!(!indices.is_empty(), "gather needs at least one index");
        let mut value = Array2::zeros((indices.len(), cols));
        for (k, &i) in indices.iter().enumerate() {
            assert!(i < rows, "gather index {i} out of range ({rows} rows)");
            value.row_mut(k).assign(&self.nodes[table.0].value.row(i));
        }
        self.push(Op::GatherRows(table, indices.to_vec()), value)
    }

    pub fn mean_rows(&mut self, a: NodeId) -> NodeId {
        let value = self
            .value(a)
            .mean_axis(Axis(0))
            .expect("mean over zero rows")
            .insert_axis(Axis(0));
        self.push(Op::MeanRows(a), value)
    }

    pub fn concat_rows(&mut self, parts: &[NodeId]) -> NodeId {
        assert!(!parts.is_empty(), "concat needs at least one part");
        let cols = self.value(parts[0]).ncols();
        let total: usize = parts.iter().map(|p| self.value(*p).nrows()).sum();
        let mut value = Array2::zeros((total, cols));
        let mut at = 0;
        for p in parts {
            let v = &self.nodes[p.0].value;
            assert_eq!(v.ncols(), cols, "concat column mismatch");
            value
                .slice_mut(ndarray::s![at..at + v.nrows(), ..])
                .assign(v);
            at += v.nrows();
        }
        self.push(Op::ConcatRows(parts.to_vec()), value)
    }

    fn accumulate(&mut self, id: NodeId, delta: Array2<f64>) {
        if matches!(self.nodes[id.0].op, Op::Const) {
            return;
        }
        match &mut self.grads[id.0] {
            Some(g) => *g += &delta,
            slot @ None => *slot = Some(delta),
        }
    }

    /// Reverse-mode pass from a scalar output. Gradients from any previous
    /// backward call are cleared first.
    pub fn backward(&mut self, output: NodeId) {
        assert_eq!(
            self.value(output).dim(),
            (1, 1),
            "backward needs a scalar output"
        );
        for g in &mut self.grads {
            *g = None;
        }
        self.grads[output.0] = Some(Array2::from_elem((1, 1), 1.0));

        for i in (0..self.nodes.len()).rev() {
            let Some(g) = self.grads[i].clone() else {
                continue;
            };
            let op = self.nodes[i].op.clone();
            match op {
                Op::Var | Op::Const => {}
                Op::MatMul(a, b) => {
                    let da = g.dot(&self.nodes[b.0].value.t());
                    let db = self.nodes[a.0].value.t().dot(&g);
                    self.accumulate(a, da);
                    self.accumulate(b, db);
                }
                Op::Transpose(a) => self.accumulate(a, g.t().to_owned()),
                Op::Add(a, b) => {
                    self.accumulate(a, g.clone());
                    self.accumulate(b, g);
                }
                Op::Sub(a, b) => {
                    self.accumulate(a, g.clone());
                    self.accumulate(b, -g);
                }
                Op::Mul(a, b) => {
                    let da = &g * &self.nodes[b.0].value;
                    let db = &g * &self.nodes[a.0].value;
                    self.accumulate(a, da);
                    self.accumulate(b, db);
                }
                Op::AddRowVec(a, v) => {
                    let dv = g.sum_axis(Axis(0)).insert_axis(Axis(0));
                    self.accumulate(a, g);
                    self.accumulate(v, dv);
                }
                Op::MulScalar(a, c) => self.accumulate(a, g.mapv(|x| x * c)),
                Op::DivScalar(a, c) => self.accumulate(a, g.mapv(|x| x / c)),
                Op::Exp(a) => {
                    let da = &g * &self.nodes[i].value;
                    self.accumulate(a, da);
                }
                Op::Ln(a) => {
                    let da = &g / &self.nodes[a.0].value;
                    self.accumulate(a, da);
                }
                Op::Tanh(a) => {
                    let da = &g * &self.nodes[i].value.mapv(|y| 1.0 - y * y);
                    self.accumulate(a, da);
                }
                Op::RowSoftmax(a) => {
                    let y = &self.nodes[i].value;
                    let mut da = Array2::zeros(y.dim());
                    for r in 0..y.nrows() {
                        let dot: f64 = (0..y.ncols()).map(|j| g[[r, j]] * y[[r, j]]).sum();
                        for j in 0..y.ncols() {
                            da[[r, j]] = y[[r, j]] * (g[[r, j]] - dot);
                        }
                    }
                    self.accumulate(a, da);
                }
                Op::RowNorm(a) => {
                    let x = &self.nodes[a.0].value;
                    let y = &self.nodes[i].value;
                    let mut da = Array2::zeros(x.dim());
                    for r in 0..x.nrows() {
                        for j in 0..x.ncols() {
                            da[[r, j]] = g[[r, 0]] * x[[r, j]] / y[[r, 0]];
                        }
                    }
                    self.accumulate(a, da);
                }
                Op::DivCols(a, c) => {
                    let x = &self.nodes[a.0].value;
                    let d = &self.nodes[c.0].value;
                    let mut da = Array2::zeros(x.dim());
                    let mut dc = Array2::zeros(d.dim());
                    for r in 0..x.nrows() {
                        let dr = d[[r, 0]];
                        let mut acc = 0.0;
                        for j in 0..x.ncols() {
                            da[[r, j]] = g[[r, j]] / dr;
                            acc += g[[r, j]] * x[[r, j]];
                        }
                        dc[[r, 0]] = -acc / (dr * dr);
                    }
                    self.accumulate(a, da);
                    self.accumulate(c, dc);
                }
                Op::Diag(a) => {
                    let n = self.nodes[a.0].value.nrows();
                    let mut da = Array2::zeros((n, n));
                    for r in 0..n {
                        da[[r, r]] = g[[r, 0]];
                    }
                    self.accumulate(a, da);
                }
                Op::Mean(a) => {
                    let shape = self.nodes[a.0].value.dim();
                    let scale = g[[0, 0]] / (shape.0 * shape.1) as f64;
                    self.accumulate(a, Array2::from_elem(shape, scale));
                }
                Op::Sum(a) => {
                    let shape = self.nodes[a.0].value.dim();
                    self.accumulate(a, Array2::from_elem(shape, g[[0, 0]]));
                }
                Op::GatherRows(table, indices) => {
                    let mut dt = Array2::zeros(self.nodes[table.0].value.dim());
                    for (k, &idx) in indices.iter().enumerate() {
                        let mut row = dt.row_mut(idx);
                        row += &g.row(k);
                    }
                    self.accumulate(table, dt);
                }
                Op::MeanRows(a) => {
                    let (rows, cols) = self.nodes[a.0].value.dim();
                    let mut da = Array2::zeros((rows, cols));
                    for r in 0..rows {
                        for j in 0..cols {
                            da[[r, j]] = g[[0, j]] / rows as f64;
                        }
                    }
                    self.accumulate(a, da);
                }
                Op::ConcatRows(parts) => {
                    let mut at = 0;
                    for p in parts {
                        let rows = self.nodes[p.0].value.nrows();
                        let slice = g.slice(ndarray::s![at..at + rows, ..]).to_owned();
                        self.accumulate(p, slice);
                        at += rows;
                    }
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn sum_gradient_is_all_ones() {
        let mut g = Graph::new();
        let x = g.var(array![[1.0, 2.0], [3.0, 4.0]]);
        let s = g.sum(x);
        g.backward(s);
        assert_eq!(g.grad(x).unwrap(), &Array2::from_elem((2, 2), 1.0));
    }

    #[test]
    fn elementwise_square_gradient_is_2x() {
        let mut g = Graph::new();
        let x = g.var(array![[1.0, -2.0], [0.5, 3.0]]);
        let sq = g.mul(x, x);
        let s = g.sum(sq);
        g.backward(s);
        let expected = array![[2.0, -4.0], [1.0, 6.0]];
        assert_eq!(g.grad(x).unwrap(), &expected);
    }

    #[test]
    fn constants_collect_no_gradient() {
        let mut g = Graph::new();
        let x = g.var(array![[1.0, 2.0]]);
        let c = g.constant(array![[3.0, 4.0]]);
        let y = g.mul(x, c);
        let s = g.sum(y);
        g.backward(s);
        assert!(g.grad(c).is_none());
        assert_eq!(g.grad(x).unwrap(), &array![[3.0, 4.0]]);
    }

    #[test]
    fn backward_is_deterministic() {
        let build = || {
            let mut g = Graph::new();
            let x = g.var(array![[0.3, -0.7], [1.1, 0.2]]);
            let e = g.exp(x);
            let sm = g.row_softmax(e);
            let m = g.mean(sm);
            g.backward(m);
            g.grad(x).unwrap().clone()
        };
        let a = build();
        let b = build();
        assert_eq!(
            a.iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
            b.iter().map(|v| v.to_bits()).collect::<Vec<_>>()
        );
    }

    /// Central-difference check of a scalar graph built by `f` from one
    /// variable leaf.
    fn check_gradient(
        build: impl Fn(&mut Graph, NodeId) -> NodeId,
        x0: Array2<f64>,
        tolerance: f64,
    ) {
        let eval = |values: &Array2<f64>| {
            let mut g = Graph::new();
            let x = g.var(values.clone());
            let out = build(&mut g, x);
            g.scalar(out)
        };
        let mut g = Graph::new();
        let x = g.var(x0.clone());
        let out = build(&mut g, x);
        g.backward(out);
        let analytic = g.grad(x).unwrap().clone();

        let h = 1e-6;
        for idx in 0..x0.len() {
            let (r, c) = (idx / x0.ncols(), idx % x0.ncols());
            let mut plus = x0.clone();
            plus[[r, c]] += h;
            let mut minus = x0.clone();
            minus[[r, c]] -= h;
            let numeric = (eval(&plus) - eval(&minus)) / (2.0 * h);
            let a = analytic[[r, c]];
            let denom = a.abs().max(numeric.abs()).max(1e-12);
            assert!(
                ((a - numeric) / denom).abs() < tolerance,
                "grad mismatch at ({r},{c}): analytic {a}, numeric {numeric}"
            );
        }
    }

    fn random_matrix(rng: &mut ChaCha8Rng, r: usize, c: usize) -> Array2<f64> {
        Array2::from_shape_fn((r, c), |_| rng.gen_range(0.2..1.5))
    }

    #[test]
    fn primitive_gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let x = random_matrix(&mut rng, 3, 4);
        let w = random_matrix(&mut rng, 4, 2);
        let b = random_matrix(&mut rng, 1, 4);
        let d = random_matrix(&mut rng, 3, 1);
        let sq = random_matrix(&mut rng, 4, 4);

        check_gradient(
            {
                let w = w.clone();
                move |g, x| {
                    let wc = g.constant(w.clone());
                    let y = g.matmul(x, wc);
                    g.sum(y)
                }
            },
            x.clone(),
            1e-6,
        );
        check_gradient(
            |g, x| {
                let t = g.transpose(x);
                let y = g.mul(t, t);
                g.mean(y)
            },
            x.clone(),
            1e-6,
        );
        check_gradient(
            {
                let b = b.clone();
                move |g, x| {
                    let bc = g.constant(b.clone());
                    let y = g.add_row_vec(x, bc);
                    let t = g.tanh(y);
                    g.mean(t)
                }
            },
            x.clone(),
            1e-6,
        );
        check_gradient(
            |g, x| {
                let e = g.exp(x);
                let l = g.ln(e);
                let h = g.mul_scalar(l, 0.7);
                let h = g.div_scalar(h, 1.3);
                g.sum(h)
            },
            x.clone(),
            1e-6,
        );
        check_gradient(
            |g, x| {
                let s = g.row_softmax(x);
                let l = g.ln(s);
                let d = g.mul(s, l);
                g.sum(d)
            },
            x.clone(),
            1e-5,
        );
        check_gradient(
            {
                let w = Array2::from_shape_fn((3, 4), |(i, j)| 0.3 * (i as f64) - 0.2 * (j as f64) + 0.5);
                move |g, x| {
                    let n = g.row_norm(x);
                    let y = g.div_cols(x, n);
                    let wc = g.constant(w.clone());
                    let z = g.mul(y, wc);
                    g.sum(z)
                }
            },
            x.clone(),
            1e-5,
        );
        check_gradient(
            {
                let d = d.clone();
                move |g, x| {
                    let dc = g.constant(d.clone());
                    let y = g.div_cols(x, dc);
                    g.sum(y)
                }
            },
            x.clone(),
            1e-6,
        );
        check_gradient(
            |g, x| {
                let dg = g.diag(x);
                let l = g.ln(dg);
                g.mean(l)
            },
            sq,
            1e-6,
        );
        check_gradient(
            |g, x| {
                let gathered = g.gather_rows(x, &[0, 2, 2, 1]);
                let m = g.mean_rows(gathered);
                let sq = g.mul(m, m);
                g.sum(sq)
            },
            x.clone(),
            1e-6,
        );
        check_gradient(
            |g, x| {
                let a = g.gather_rows(x, &[0]);
                let b = g.gather_rows(x, &[1, 2]);
                let cat = g.concat_rows(&[a, b]);
                let e = g.exp(cat);
                g.mean(e)
            },
            x,
            1e-6,
        );
        check_gradient(
            |g, x| {
                let s = g.sub(x, x);
                let a = g.add(x, s);
                let n = g.row_norm(a);
                g.sum(n)
            },
            random_matrix(&mut rng, 2, 3),
            1e-5,
        );
    }

    #[test]
    fn div_cols_gradient_flows_to_divisor() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let a = random_matrix(&mut rng, 3, 2);
        check_gradient(
            {
                let a = a.clone();
                move |g, x| {
                    let ac = g.constant(a.clone());
                    let y = g.div_cols(ac, x);
                    g.sum(y)
                }
            },
            random_matrix(&mut rng, 3, 1),
            1e-6,
        );
    }

    #[test]
    fn gather_rows_accumulates_repeated_indices() {
        let mut g = Graph::new();
        let t = g.var(array![[1.0, 2.0], [3.0, 4.0]]);
        let picked = g.gather_rows(t, &[0, 0, 1]);
        let s = g.sum(picked);
        g.backward(s);
        assert_eq!(g.grad(t).unwrap(), &array![[2.0, 2.0], [1.0, 1.0]]);
    }
}

//! Minimal reverse-mode automatic differentiation on an eager tape.
//!
//! Every operation evaluates its value immediately and records itself on the
//! tape; [`Tape::backward`] then walks the recorded nodes in reverse and
//! accumulates vector-Jacobian products. Values are 64-bit `ndarray` arrays
//! (scalars are 0-dim), which is what the gradient-check tolerances of the
//! training harness require.
//!
//! The op set is exactly what the model needs: elementwise arithmetic,
//! matrix-vector products, reductions, the activations, a stabilized
//! temperature softmax, and gather/concat for the sort-based sparsity
//! penalty. Shape mismatches are programmer errors and panic.

use ndarray::{ArrayD, Ix1, Ix2, IxDyn};

pub type NodeId = usize;

/// Log of max(x, eps) used by the cross-entropy loss.
pub const LN_CLAMP: f64 = 1e-12;

const SQRT_GRAD_GUARD: f64 = 1e-12;

enum Op {
    Leaf,
    Add(NodeId, NodeId),
    Sub(NodeId, NodeId),
    Mul(NodeId, NodeId),
    Div(NodeId, NodeId),
    Neg(NodeId),
    Scale(NodeId, f64),
    AddConst(NodeId),
    /// y = W x with W 2-d and x 1-d.
    MatVec(NodeId, NodeId),
    Dot(NodeId, NodeId),
    Sum(NodeId),
    Mean(NodeId),
    Sigmoid(NodeId),
    Tanh(NodeId),
    Relu(NodeId),
    Sqrt(NodeId),
    LnClamped(NodeId),
    Abs(NodeId),
    /// 1-d concatenation; inputs are flattened in order.
    Concat(Vec<NodeId>),
    /// y[i] = x[idx[i]] over a 1-d input.
    Gather(NodeId, Vec<usize>),
    /// 0-dim view of one element of a 1-d input.
    Index(NodeId, usize),
    /// Numerically stabilized softmax(x / tau).
    SoftmaxT(NodeId, f64),
    /// y = x * s with s 0-dim.
    ScaleBy(NodeId, NodeId),
    /// Elementwise product with a constant mask (dropout, stop-gradient tricks).
    MulMask(NodeId, ArrayD<f64>),
}

struct Node {
    value: ArrayD<f64>,
    op: Op,
}

#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

/// Gradients of one backward pass, indexed by `NodeId`.
pub struct Gradients {
    grads: Vec<Option<ArrayD<f64>>>,
}

impl Gradients {
    /// Gradient of the root w.r.t. the given node; zeros if the node does
    /// not influence the root.
    pub fn get(&self, id: NodeId, shape: &[usize]) -> ArrayD<f64> {
        match &self.grads[id] {
            Some(g) => g.clone(),
            None => ArrayD::zeros(IxDyn(shape)),
        }
    }

    pub fn try_get(&self, id: NodeId) -> Option<&ArrayD<f64>> {
        self.grads[id].as_ref()
    }
}

fn scalar_array(v: f64) -> ArrayD<f64> {
    ArrayD::from_elem(IxDyn(&[]), v)
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

impl Tape {
    pub fn new() -> Self {
        Tape { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, id: NodeId) -> &ArrayD<f64> {
        &self.nodes[id].value
    }

    /// Value of a 0-dim node.
    pub fn scalar_value(&self, id: NodeId) -> f64 {
        let v = &self.nodes[id].value;
        assert!(v.len() == 1, "scalar_value on node with {} elements", v.len());
        *v.iter().next().unwrap()
    }

    fn push(&mut self, value: ArrayD<f64>, op: Op) -> NodeId {
        self.nodes.push(Node { value, op });
        self.nodes.len() - 1
    }

    pub fn leaf(&mut self, value: ArrayD<f64>) -> NodeId {
        self.push(value, Op::Leaf)
    }

    pub fn leaf_vec(&mut self, v: &[f64]) -> NodeId {
        self.leaf(ArrayD::from_shape_vec(IxDyn(&[v.len()]), v.to_vec()).unwrap())
    }

    pub fn scalar(&mut self, v: f64) -> NodeId {
        self.leaf(scalar_array(v))
    }

    /// A new leaf holding the same value, cut off from the graph.
    pub fn detach(&mut self, id: NodeId) -> NodeId {
        let v = self.nodes[id].value.clone();
        self.leaf(v)
    }

    fn binary_same_shape(&mut self, a: NodeId, b: NodeId, op: fn(f64, f64) -> f64, tag: Op) -> NodeId {
        let (va, vb) = (&self.nodes[a].value, &self.nodes[b].value);
        assert_eq!(va.shape(), vb.shape(), "elementwise op on mismatched shapes");
        let mut out = va.clone();
        out.zip_mut_with(vb, |x, &y| *x = op(*x, y));
        self.push(out, tag)
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> NodeId {
        self.binary_same_shape(a, b, |x, y| x + y, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> NodeId {
        self.binary_same_shape(a, b, |x, y| x - y, Op::Sub(a, b))
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> NodeId {
        self.binary_same_shape(a, b, |x, y| x * y, Op::Mul(a, b))
    }

    pub fn div(&mut self, a: NodeId, b: NodeId) -> NodeId {
        self.binary_same_shape(a, b, |x, y| x / y, Op::Div(a, b))
    }

    pub fn neg(&mut self, a: NodeId) -> NodeId {
        let out = self.nodes[a].value.mapv(|x| -x);
        self.push(out, Op::Neg(a))
    }

    pub fn scale(&mut self, a: NodeId, c: f64) -> NodeId {
        let out = self.nodes[a].value.mapv(|x| c * x);
        self.push(out, Op::Scale(a, c))
    }

    pub fn add_const(&mut self, a: NodeId, c: f64) -> NodeId {
        let out = self.nodes[a].value.mapv(|x| x + c);
        self.push(out, Op::AddConst(a))
    }

    pub fn matvec(&mut self, w: NodeId, x: NodeId) -> NodeId {
        let wv = self.nodes[w]
            .value
            .view()
            .into_dimensionality::<Ix2>()
            .expect("matvec: W must be 2-d");
        let xv = self.nodes[x]
            .value
            .view()
            .into_dimensionality::<Ix1>()
            .expect("matvec: x must be 1-d");
        assert_eq!(wv.ncols(), xv.len(), "matvec: inner dimensions disagree");
        let y = wv.dot(&xv);
        self.push(y.into_dyn(), Op::MatVec(w, x))
    }

    pub fn dot(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let (va, vb) = (&self.nodes[a].value, &self.nodes[b].value);
        assert_eq!(va.shape(), vb.shape(), "dot: mismatched shapes");
        let s: f64 = va.iter().zip(vb.iter()).map(|(x, y)| x * y).sum();
        self.push(scalar_array(s), Op::Dot(a, b))
    }

    pub fn sum(&mut self, a: NodeId) -> NodeId {
        let s = self.nodes[a].value.sum();
        self.push(scalar_array(s), Op::Sum(a))
    }

    pub fn mean(&mut self, a: NodeId) -> NodeId {
        let v = &self.nodes[a].value;
        let s = v.sum() / v.len() as f64;
        self.push(scalar_array(s), Op::Mean(a))
    }

    pub fn sigmoid(&mut self, a: NodeId) -> NodeId {
        let out = self.nodes[a].value.mapv(sigmoid);
        self.push(out, Op::Sigmoid(a))
    }

    pub fn tanh(&mut self, a: NodeId) -> NodeId {
        let out = self.nodes[a].value.mapv(f64::tanh);
        self.push(out, Op::Tanh(a))
    }

    pub fn relu(&mut self, a: NodeId) -> NodeId {
        let out = self.nodes[a].value.mapv(|x| x.max(0.0));
        self.push(out, Op::Relu(a))
    }

    pub fn sqrt(&mut self, a: NodeId) -> NodeId {
        let out = self.nodes[a].value.mapv(f64::sqrt);
        self.push(out, Op::Sqrt(a))
    }

    /// ln(max(x, 1e-12)); gradient is zero where the clamp is active.
    pub fn ln_clamped(&mut self, a: NodeId) -> NodeId {
        let out = self.nodes[a].value.mapv(|x| x.max(LN_CLAMP).ln());
        self.push(out, Op::LnClamped(a))
    }

    pub fn abs(&mut self, a: NodeId) -> NodeId {
        let out = self.nodes[a].value.mapv(f64::abs);
        self.push(out, Op::Abs(a))
    }

    /// Concatenate 1-d (or 0-dim, treated as length 1) nodes into one vector.
    pub fn concat(&mut self, parts: &[NodeId]) -> NodeId {
        let mut data = Vec::new();
        for &p in parts {
            data.extend(self.nodes[p].value.iter().copied());
        }
        let n = data.len();
        self.push(
            ArrayD::from_shape_vec(IxDyn(&[n]), data).unwrap(),
            Op::Concat(parts.to_vec()),
        )
    }

    pub fn gather(&mut self, a: NodeId, idx: &[usize]) -> NodeId {
        let v = &self.nodes[a].value;
        let data: Vec<f64> = idx.iter().map(|&i| v[[i]]).collect();
        let n = data.len();
        self.push(
            ArrayD::from_shape_vec(IxDyn(&[n]), data).unwrap(),
            Op::Gather(a, idx.to_vec()),
        )
    }

    pub fn index(&mut self, a: NodeId, i: usize) -> NodeId {
        let v = self.nodes[a].value[[i]];
        self.push(scalar_array(v), Op::Index(a, i))
    }

    /// softmax(x / tau) with max subtraction before exponentiation.
    pub fn softmax_t(&mut self, a: NodeId, tau: f64) -> NodeId {
        assert!(tau > 0.0, "softmax temperature must be positive");
        let v = &self.nodes[a].value;
        let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = v.iter().map(|&x| ((x - m) / tau).exp()).collect();
        let z: f64 = exps.iter().sum();
        let data: Vec<f64> = exps.iter().map(|&e| e / z).collect();
        let n = data.len();
        self.push(
            ArrayD::from_shape_vec(IxDyn(&[n]), data).unwrap(),
            Op::SoftmaxT(a, tau),
        )
    }

    /// y = x * s where s is 0-dim.
    pub fn scale_by(&mut self, x: NodeId, s: NodeId) -> NodeId {
        let sv = self.scalar_value(s);
        let out = self.nodes[x].value.mapv(|v| v * sv);
        self.push(out, Op::ScaleBy(x, s))
    }

    /// Elementwise product with a constant (non-differentiated) mask.
    pub fn mul_mask(&mut self, x: NodeId, mask: ArrayD<f64>) -> NodeId {
        let v = &self.nodes[x].value;
        assert_eq!(v.shape(), mask.shape(), "mul_mask: mismatched shapes");
        let mut out = v.clone();
        out.zip_mut_with(&mask, |a, &b| *a *= b);
        self.push(out, Op::MulMask(x, mask))
    }

    /// Sum of a list of scalar nodes (fold of adds).
    pub fn add_all(&mut self, parts: &[NodeId]) -> NodeId {
        assert!(!parts.is_empty());
        let mut acc = parts[0];
        for &p in &parts[1..] {
            acc = self.add(acc, p);
        }
        acc
    }

    /// Reverse pass from a 0-dim root node.
    pub fn backward(&self, root: NodeId) -> Gradients {
        assert!(
            self.nodes[root].value.len() == 1,
            "backward root must be scalar"
        );
        let mut grads: Vec<Option<ArrayD<f64>>> = vec![None; self.nodes.len()];
        grads[root] = Some(scalar_array(1.0));

        for id in (0..=root).rev() {
            let g = match grads[id].take() {
                Some(g) => g,
                None => continue,
            };
            // Keep leaf gradients readable after the pass.
            if matches!(self.nodes[id].op, Op::Leaf) {
                grads[id] = Some(g);
                continue;
            }
            self.propagate(id, &g, &mut grads);
        }
        Gradients { grads }
    }

    fn accumulate(grads: &mut [Option<ArrayD<f64>>], id: NodeId, delta: ArrayD<f64>) {
        match &mut grads[id] {
            Some(g) => *g += &delta,
            slot @ None => *slot = Some(delta),
        }
    }

    fn propagate(&self, id: NodeId, g: &ArrayD<f64>, grads: &mut [Option<ArrayD<f64>>]) {
        let node = &self.nodes[id];
        match &node.op {
            Op::Leaf => unreachable!(),
            Op::Add(a, b) => {
                Self::accumulate(grads, *a, g.clone());
                Self::accumulate(grads, *b, g.clone());
            }
            Op::Sub(a, b) => {
                Self::accumulate(grads, *a, g.clone());
                Self::accumulate(grads, *b, g.mapv(|x| -x));
            }
            Op::Mul(a, b) => {
                let da = g * &self.nodes[*b].value;
                let db = g * &self.nodes[*a].value;
                Self::accumulate(grads, *a, da);
                Self::accumulate(grads, *b, db);
            }
            Op::Div(a, b) => {
                let vb = &self.nodes[*b].value;
                let da = g / vb;
                let db = -(g * &node.value) / vb;
                Self::accumulate(grads, *a, da);
                Self::accumulate(grads, *b, db);
            }
            Op::Neg(a) => Self::accumulate(grads, *a, g.mapv(|x| -x)),
            Op::Scale(a, c) => Self::accumulate(grads, *a, g.mapv(|x| c * x)),
            Op::AddConst(a) => Self::accumulate(grads, *a, g.clone()),
            Op::MatVec(w, x) => {
                let gv = g.view().into_dimensionality::<Ix1>().unwrap();
                let wv = self.nodes[*w].value.view().into_dimensionality::<Ix2>().unwrap();
                let xv = self.nodes[*x].value.view().into_dimensionality::<Ix1>().unwrap();
                // dW = g ⊗ x
                let (m, n) = (wv.nrows(), wv.ncols());
                let mut dw = ndarray::Array2::<f64>::zeros((m, n));
                for i in 0..m {
                    for j in 0..n {
                        dw[[i, j]] = gv[i] * xv[j];
                    }
                }
                // dx = Wᵀ g
                let dx = wv.t().dot(&gv);
                Self::accumulate(grads, *w, dw.into_dyn());
                Self::accumulate(grads, *x, dx.into_dyn());
            }
            Op::Dot(a, b) => {
                let gs = g.iter().next().copied().unwrap();
                let da = self.nodes[*b].value.mapv(|x| gs * x);
                let db = self.nodes[*a].value.mapv(|x| gs * x);
                Self::accumulate(grads, *a, da);
                Self::accumulate(grads, *b, db);
            }
            Op::Sum(a) => {
                let gs = g.iter().next().copied().unwrap();
                let da = ArrayD::from_elem(self.nodes[*a].value.raw_dim(), gs);
                Self::accumulate(grads, *a, da);
            }
            Op::Mean(a) => {
                let n = self.nodes[*a].value.len() as f64;
                let gs = g.iter().next().copied().unwrap() / n;
                let da = ArrayD::from_elem(self.nodes[*a].value.raw_dim(), gs);
                Self::accumulate(grads, *a, da);
            }
            Op::Sigmoid(a) => {
                let da = g * &node.value.mapv(|y| y * (1.0 - y));
                Self::accumulate(grads, *a, da);
            }
            Op::Tanh(a) => {
                let da = g * &node.value.mapv(|y| 1.0 - y * y);
                Self::accumulate(grads, *a, da);
            }
            Op::Relu(a) => {
                let mut da = g.clone();
                da.zip_mut_with(&self.nodes[*a].value, |gi, &x| {
                    if x <= 0.0 {
                        *gi = 0.0;
                    }
                });
                Self::accumulate(grads, *a, da);
            }
            Op::Sqrt(a) => {
                let mut da = g.clone();
                da.zip_mut_with(&node.value, |gi, &y| {
                    *gi = if y <= SQRT_GRAD_GUARD { 0.0 } else { *gi * 0.5 / y };
                });
                Self::accumulate(grads, *a, da);
            }
            Op::LnClamped(a) => {
                let mut da = g.clone();
                da.zip_mut_with(&self.nodes[*a].value, |gi, &x| {
                    *gi = if x < LN_CLAMP { 0.0 } else { *gi / x };
                });
                Self::accumulate(grads, *a, da);
            }
            Op::Abs(a) => {
                let mut da = g.clone();
                da.zip_mut_with(&self.nodes[*a].value, |gi, &x| {
                    *gi *= if x > 0.0 {
                        1.0
                    } else if x < 0.0 {
                        -1.0
                    } else {
                        0.0
                    };
                });
                Self::accumulate(grads, *a, da);
            }
            Op::Concat(parts) => {
                let gv = g.view().into_dimensionality::<Ix1>().unwrap();
                let mut offset = 0;
                for &p in parts {
                    let len = self.nodes[p].value.len();
                    let shape = self.nodes[p].value.raw_dim();
                    let slice: Vec<f64> = (0..len).map(|i| gv[offset + i]).collect();
                    let dp = ArrayD::from_shape_vec(shape, slice).unwrap();
                    Self::accumulate(grads, p, dp);
                    offset += len;
                }
            }
            Op::Gather(a, idx) => {
                let gv = g.view().into_dimensionality::<Ix1>().unwrap();
                let mut da = ArrayD::zeros(self.nodes[*a].value.raw_dim());
                for (out_i, &src_i) in idx.iter().enumerate() {
                    da[[src_i]] += gv[out_i];
                }
                Self::accumulate(grads, *a, da);
            }
            Op::Index(a, i) => {
                let gs = g.iter().next().copied().unwrap();
                let mut da = ArrayD::zeros(self.nodes[*a].value.raw_dim());
                da[[*i]] = gs;
                Self::accumulate(grads, *a, da);
            }
            Op::SoftmaxT(a, tau) => {
                let s = &node.value;
                let dot: f64 = g.iter().zip(s.iter()).map(|(gi, si)| gi * si).sum();
                let mut da = s.clone();
                da.zip_mut_with(g, |si, &gi| *si = *si * (gi - dot) / tau);
                Self::accumulate(grads, *a, da);
            }
            Op::ScaleBy(x, s) => {
                let sv = self.nodes[*s].value.iter().next().copied().unwrap();
                let dx = g.mapv(|v| v * sv);
                let ds: f64 = g
                    .iter()
                    .zip(self.nodes[*x].value.iter())
                    .map(|(gi, xi)| gi * xi)
                    .sum();
                Self::accumulate(grads, *x, dx);
                Self::accumulate(grads, *s, scalar_array(ds));
            }
            Op::MulMask(x, mask) => {
                let dx = g * mask;
                Self::accumulate(grads, *x, dx);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Central finite differences of a scalar-valued builder over one leaf.
    fn numeric_grad(
        build: &dyn Fn(&mut Tape, NodeId) -> NodeId,
        x0: &[f64],
        shape: &[usize],
    ) -> Vec<f64> {
        let h = 1e-6;
        let mut out = vec![0.0; x0.len()];
        for i in 0..x0.len() {
            let eval = |delta: f64| {
                let mut pt = x0.to_vec();
                pt[i] += delta;
                let mut tape = Tape::new();
                let leaf = tape.leaf(ArrayD::from_shape_vec(IxDyn(shape), pt).unwrap());
                let root = build(&mut tape, leaf);
                tape.scalar_value(root)
            };
            out[i] = (eval(h) - eval(-h)) / (2.0 * h);
        }
        out
    }

    fn check_against_fd(build: &dyn Fn(&mut Tape, NodeId) -> NodeId, x0: &[f64], shape: &[usize]) {
        let mut tape = Tape::new();
        let leaf = tape.leaf(ArrayD::from_shape_vec(IxDyn(shape), x0.to_vec()).unwrap());
        let root = build(&mut tape, leaf);
        let grads = tape.backward(root);
        let analytic = grads.get(leaf, shape);
        let numeric = numeric_grad(build, x0, shape);
        for (i, (&a, &n)) in analytic.iter().zip(numeric.iter()).enumerate() {
            let denom = n.abs().max(1.0);
            assert!(
                (a - n).abs() / denom < 1e-6,
                "coord {i}: analytic {a} vs numeric {n}"
            );
        }
    }

    fn rand_vec(rng: &mut ChaCha8Rng, n: usize, lo: f64, hi: f64) -> Vec<f64> {
        (0..n).map(|_| rng.gen_range(lo..hi)).collect()
    }

    #[test]
    fn elementwise_chain_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..5 {
            let x0 = rand_vec(&mut rng, 6, -1.5, 1.5);
            let c = rand_vec(&mut rng, 6, 0.5, 2.0);
            let build = move |t: &mut Tape, x: NodeId| {
                let cn = t.leaf_vec(&c);
                let a = t.mul(x, cn);
                let b = t.tanh(a);
                let d = t.sigmoid(b);
                let e = t.add(d, x);
                t.mean(e)
            };
            check_against_fd(&build, &x0, &[6]);
        }
    }

    #[test]
    fn matvec_dot_and_norm_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let w0 = rand_vec(&mut rng, 12, -1.0, 1.0);
        let x = rand_vec(&mut rng, 4, -1.0, 1.0);
        // Differentiate w.r.t. W through y = Wx, s = y·y, out = sqrt(s).
        let build = move |t: &mut Tape, w: NodeId| {
            let xn = t.leaf_vec(&x);
            let y = t.matvec(w, xn);
            let s = t.dot(y, y);
            t.sqrt(s)
        };
        check_against_fd(&build, &w0, &[3, 4]);
    }

    #[test]
    fn matvec_input_gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let w: Vec<f64> = rand_vec(&mut rng, 12, -1.0, 1.0);
        let x0 = rand_vec(&mut rng, 4, -1.0, 1.0);
        let build = move |t: &mut Tape, x: NodeId| {
            let wn = t.leaf(ArrayD::from_shape_vec(IxDyn(&[3, 4]), w.clone()).unwrap());
            let y = t.matvec(wn, x);
            let z = t.sigmoid(y);
            t.sum(z)
        };
        check_against_fd(&build, &x0, &[4]);
    }

    #[test]
    fn softmax_gather_index_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let x0 = rand_vec(&mut rng, 5, -1.0, 1.0);
        let build = |t: &mut Tape, x: NodeId| {
            let s = t.softmax_t(x, 0.7);
            let g = t.gather(s, &[4, 2, 0]);
            let one = t.index(g, 1);
            let m = t.mean(g);
            t.add(one, m)
        };
        check_against_fd(&build, &x0, &[5]);
    }

    #[test]
    fn relu_abs_ln_match_finite_differences_away_from_kinks() {
        // Keep coordinates away from 0 so central differences are valid.
        let x0 = vec![0.8, -0.6, 1.3, -1.1];
        let build = |t: &mut Tape, x: NodeId| {
            let r = t.relu(x);
            let a = t.abs(x);
            let shifted = t.add_const(a, 0.5);
            let l = t.ln_clamped(shifted);
            let s1 = t.sum(r);
            let s2 = t.sum(l);
            t.add(s1, s2)
        };
        check_against_fd(&build, &x0, &[4]);
    }

    #[test]
    fn scale_by_div_concat_match_finite_differences() {
        let x0 = vec![0.4, -0.9, 1.2];
        let build = |t: &mut Tape, x: NodeId| {
            let s = t.sum(x);
            let s2 = t.add_const(s, 5.0);
            let scaled = t.scale_by(x, s2);
            let d = t.div(scaled, x);
            let c = t.concat(&[scaled, d]);
            t.mean(c)
        };
        // x away from zero for the division.
        check_against_fd(&build, &x0, &[3]);
    }

    #[test]
    fn softmax_temperature_saturates_to_one_hot() {
        let mut tape = Tape::new();
        let x = tape.leaf_vec(&[0.9, 0.5, 0.2]);
        let s = tape.softmax_t(x, 1e-6);
        let v = tape.value(s);
        assert!((v[[0]] - 1.0).abs() < 1e-12);
        assert!(v[[1]].abs() < 1e-12);
        assert!(v[[2]].abs() < 1e-12);
    }

    #[test]
    fn softmax_closed_form_two_elements() {
        let mut tape = Tape::new();
        let x = tape.leaf_vec(&[std::f64::consts::LN_2, 0.0]);
        let s = tape.softmax_t(x, 1.0);
        let v = tape.value(s);
        assert!((v[[0]] - 2.0 / 3.0).abs() < 1e-15);
        assert!((v[[1]] - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn gradients_accumulate_over_reused_nodes() {
        // f(x) = sum(x*x) + sum(x) reuses x three times; grad = 2x + 1.
        let mut tape = Tape::new();
        let x = tape.leaf_vec(&[1.0, -2.0, 3.0]);
        let sq = tape.mul(x, x);
        let s1 = tape.sum(sq);
        let s2 = tape.sum(x);
        let f = tape.add(s1, s2);
        let grads = tape.backward(f);
        let gx = grads.get(x, &[3]);
        assert_eq!(gx.as_slice().unwrap(), &[3.0, -3.0, 7.0]);
    }

    #[test]
    fn detach_blocks_gradient_flow() {
        let mut tape = Tape::new();
        let x = tape.leaf_vec(&[1.0, 2.0]);
        let d = tape.detach(x);
        let y = tape.mul(x, d);
        let s = tape.sum(y);
        let grads = tape.backward(s);
        // d(x·const)/dx = const = value of x.
        assert_eq!(grads.get(x, &[2]).as_slice().unwrap(), &[1.0, 2.0]);
        assert!(grads.try_get(d).is_some());
    }
}

//! Parameter storage and differentiable building blocks.
//!
//! All trainable tensors live in one flat [`ParamStore`]; registration order
//! fixes both the flat layout the optimizer sees and the order tensors are
//! written to archives. Each tape rebuild injects every parameter as a leaf
//! ([`ParamStore::inject`]), and [`ParamStore::flat_gradient`] collects the
//! reverse-pass result back into optimizer layout.
//!
//! Blocks come in two flavors: tape methods used during training, and
//! `*_plain` twins on bare arrays for fast inference. A test in the model
//! layer pins the two to agree bit-for-bit on shared inputs.

use ndarray::{Array1, Array2, ArrayD, IxDyn};
use rand::Rng;
use rand_chacha::ChaCha20Rng;

use crate::autodiff::{Gradients, NodeId, Tape};

#[derive(Debug, Clone)]
pub struct ParamEntry {
    pub name: String,
    pub shape: Vec<usize>,
    pub offset: usize,
    pub len: usize,
}

#[derive(Debug, Clone, Default)]
pub struct ParamStore {
    entries: Vec<ParamEntry>,
    values: Vec<f64>,
}

/// Node ids of all parameters on the current tape, in entry order.
pub struct ParamLeaves {
    ids: Vec<NodeId>,
}

impl ParamLeaves {
    pub fn node(&self, entry: usize) -> NodeId {
        self.ids[entry]
    }
}

impl ParamStore {
    pub fn new() -> ParamStore {
        ParamStore::default()
    }

    pub fn register(
        &mut self,
        name: &str,
        shape: &[usize],
        mut init: impl FnMut() -> f64,
    ) -> usize {
        assert!(
            self.entries.iter().all(|e| e.name != name),
            "duplicate parameter name {name:?}"
        );
        let len: usize = shape.iter().product();
        let offset = self.values.len();
        self.values.extend((0..len).map(|_| init()));
        self.entries.push(ParamEntry {
            name: name.to_string(),
            shape: shape.to_vec(),
            offset,
            len,
        });
        self.entries.len() - 1
    }

    pub fn register_uniform(
        &mut self,
        name: &str,
        shape: &[usize],
        bound: f64,
        rng: &mut ChaCha20Rng,
    ) -> usize {
        self.register(name, shape, || rng.gen_range(-bound..bound))
    }

    pub fn register_const(&mut self, name: &str, shape: &[usize], value: f64) -> usize {
        self.register(name, shape, || value)
    }

    pub fn n_params(&self) -> usize {
        self.values.len()
    }

    pub fn n_entries(&self) -> usize {
        self.entries.len()
    }

    pub fn entries(&self) -> &[ParamEntry] {
        &self.entries
    }

    pub fn entry(&self, idx: usize) -> &ParamEntry {
        &self.entries[idx]
    }

    pub fn find(&self, name: &str) -> Option<usize> {
        self.entries.iter().position(|e| e.name == name)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn set_values(&mut self, v: &[f64]) {
        assert_eq!(v.len(), self.values.len(), "parameter vector length changed");
        self.values.copy_from_slice(v);
    }

    pub fn tensor(&self, idx: usize) -> ArrayD<f64> {
        let e = &self.entries[idx];
        ArrayD::from_shape_vec(
            IxDyn(&e.shape),
            self.values[e.offset..e.offset + e.len].to_vec(),
        )
        .unwrap()
    }

    pub fn tensor_slice(&self, idx: usize) -> &[f64] {
        let e = &self.entries[idx];
        &self.values[e.offset..e.offset + e.len]
    }

    pub fn set_tensor(&mut self, idx: usize, value: &ArrayD<f64>) {
        let e = &self.entries[idx];
        assert_eq!(value.shape(), e.shape.as_slice(), "tensor shape changed");
        for (dst, src) in self.values[e.offset..e.offset + e.len]
            .iter_mut()
            .zip(value.iter())
        {
            *dst = *src;
        }
    }

    /// Put every parameter on the tape as a leaf.
    pub fn inject(&self, tape: &mut Tape) -> ParamLeaves {
        let ids = self
            .entries
            .iter()
            .map(|e| {
                tape.leaf(
                    ArrayD::from_shape_vec(
                        IxDyn(&e.shape),
                        self.values[e.offset..e.offset + e.len].to_vec(),
                    )
                    .unwrap(),
                )
            })
            .collect();
        ParamLeaves { ids }
    }

    /// Gradient of the last backward pass flattened into optimizer layout;
    /// parameters the loss never touched contribute zeros.
    pub fn flat_gradient(&self, leaves: &ParamLeaves, grads: &Gradients) -> Vec<f64> {
        let mut out = vec![0.0; self.values.len()];
        for (e, &id) in self.entries.iter().zip(&leaves.ids) {
            if let Some(g) = grads.try_get(id) {
                for (dst, src) in out[e.offset..e.offset + e.len].iter_mut().zip(g.iter()) {
                    *dst = *src;
                }
            }
        }
        out
    }
}

/// Fully connected layer, y = Wx + b.
#[derive(Debug, Clone)]
pub struct Linear {
    pub w: usize,
    pub b: usize,
    pub n_in: usize,
    pub n_out: usize,
}

impl Linear {
    pub fn register(
        ps: &mut ParamStore,
        prefix: &str,
        n_in: usize,
        n_out: usize,
        rng: &mut ChaCha20Rng,
    ) -> Linear {
        let bound = 1.0 / (n_in as f64).sqrt();
        let w = ps.register_uniform(&format!("{prefix}.w"), &[n_out, n_in], bound, rng);
        let b = ps.register_const(&format!("{prefix}.b"), &[n_out], 0.0);
        Linear { w, b, n_in, n_out }
    }

    pub fn apply(&self, tape: &mut Tape, leaves: &ParamLeaves, x: NodeId) -> NodeId {
        let wx = tape.matvec(leaves.node(self.w), x);
        tape.add(wx, leaves.node(self.b))
    }

    pub fn apply_plain(&self, ps: &ParamStore, x: &Array1<f64>) -> Array1<f64> {
        let w = tensor2(ps, self.w);
        let b = tensor1(ps, self.b);
        w.dot(x) + &b
    }
}

pub fn tensor1(ps: &ParamStore, idx: usize) -> Array1<f64> {
    Array1::from_vec(ps.tensor_slice(idx).to_vec())
}

pub fn tensor2(ps: &ParamStore, idx: usize) -> Array2<f64> {
    let e = ps.entry(idx);
    Array2::from_shape_vec((e.shape[0], e.shape[1]), ps.tensor_slice(idx).to_vec()).unwrap()
}

/// Single LSTM cell with separate input and recurrent weights per gate.
/// Gate order: input, forget, cell, output. Forget-gate bias starts at 1.
#[derive(Debug, Clone)]
pub struct LstmCell {
    pub n_in: usize,
    pub n_hidden: usize,
    w_x: [usize; 4],
    w_h: [usize; 4],
    b: [usize; 4],
}

const GATE_NAMES: [&str; 4] = ["i", "f", "g", "o"];

impl LstmCell {
    pub fn register(
        ps: &mut ParamStore,
        prefix: &str,
        n_in: usize,
        n_hidden: usize,
        rng: &mut ChaCha20Rng,
    ) -> LstmCell {
        let bx = 1.0 / (n_in as f64).sqrt();
        let bh = 1.0 / (n_hidden as f64).sqrt();
        let mut w_x = [0usize; 4];
        let mut w_h = [0usize; 4];
        let mut b = [0usize; 4];
        for (g, gate) in GATE_NAMES.iter().enumerate() {
            w_x[g] = ps.register_uniform(&format!("{prefix}.w_x{gate}"), &[n_hidden, n_in], bx, rng);
            w_h[g] =
                ps.register_uniform(&format!("{prefix}.w_h{gate}"), &[n_hidden, n_hidden], bh, rng);
            let bias = if *gate == "f" { 1.0 } else { 0.0 };
            b[g] = ps.register_const(&format!("{prefix}.b_{gate}"), &[n_hidden], bias);
        }
        LstmCell { n_in, n_hidden, w_x, w_h, b }
    }

    fn gate(
        &self,
        tape: &mut Tape,
        leaves: &ParamLeaves,
        g: usize,
        x: NodeId,
        h: NodeId,
    ) -> NodeId {
        let wx = tape.matvec(leaves.node(self.w_x[g]), x);
        let wh = tape.matvec(leaves.node(self.w_h[g]), h);
        let s = tape.add(wx, wh);
        tape.add(s, leaves.node(self.b[g]))
    }

    pub fn initial_state(&self, tape: &mut Tape) -> (NodeId, NodeId) {
        let h = tape.leaf(ArrayD::zeros(IxDyn(&[self.n_hidden])));
        let c = tape.leaf(ArrayD::zeros(IxDyn(&[self.n_hidden])));
        (h, c)
    }

    pub fn step(
        &self,
        tape: &mut Tape,
        leaves: &ParamLeaves,
        x: NodeId,
        state: (NodeId, NodeId),
    ) -> (NodeId, NodeId) {
        let (h, c) = state;
        let i_pre = self.gate(tape, leaves, 0, x, h);
        let i = tape.sigmoid(i_pre);
        let f_pre = self.gate(tape, leaves, 1, x, h);
        let f = tape.sigmoid(f_pre);
        let g_pre = self.gate(tape, leaves, 2, x, h);
        let g = tape.tanh(g_pre);
        let o_pre = self.gate(tape, leaves, 3, x, h);
        let o = tape.sigmoid(o_pre);
        let fc = tape.mul(f, c);
        let ig = tape.mul(i, g);
        let c_next = tape.add(fc, ig);
        let tc = tape.tanh(c_next);
        let h_next = tape.mul(o, tc);
        (h_next, c_next)
    }

    /// Hidden state after each input, starting from the zero state.
    pub fn run(&self, tape: &mut Tape, leaves: &ParamLeaves, xs: &[NodeId]) -> Vec<NodeId> {
        let mut state = self.initial_state(tape);
        let mut hs = Vec::with_capacity(xs.len());
        for &x in xs {
            state = self.step(tape, leaves, x, state);
            hs.push(state.0);
        }
        hs
    }

    pub fn step_plain(
        &self,
        ps: &ParamStore,
        x: &Array1<f64>,
        h: &Array1<f64>,
        c: &Array1<f64>,
    ) -> (Array1<f64>, Array1<f64>) {
        let pre = |g: usize| -> Array1<f64> {
            tensor2(ps, self.w_x[g]).dot(x) + tensor2(ps, self.w_h[g]).dot(h) + tensor1(ps, self.b[g])
        };
        let i = pre(0).mapv(sigmoid_scalar);
        let f = pre(1).mapv(sigmoid_scalar);
        let g = pre(2).mapv(f64::tanh);
        let o = pre(3).mapv(sigmoid_scalar);
        let c_next = &f * c + &i * &g;
        let h_next = &o * &c_next.mapv(f64::tanh);
        (h_next, c_next)
    }

    pub fn run_plain(&self, ps: &ParamStore, xs: &[Array1<f64>]) -> Vec<Array1<f64>> {
        let mut h = Array1::zeros(self.n_hidden);
        let mut c = Array1::zeros(self.n_hidden);
        let mut out = Vec::with_capacity(xs.len());
        for x in xs {
            let (h2, c2) = self.step_plain(ps, x, &h, &c);
            h = h2;
            c = c2;
            out.push(h.clone());
        }
        out
    }
}

pub fn sigmoid_scalar(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Relative finite-difference error of the analytic gradient for the chosen
/// parameter entries. `build` must construct the full loss on a fresh tape.
/// Returns one (name, max relative error) pair per entry.
pub fn finite_difference_check(
    ps: &mut ParamStore,
    entry_indices: &[usize],
    step: f64,
    mut build: impl FnMut(&mut Tape, &ParamLeaves) -> NodeId,
) -> Vec<(String, f64)> {
    let mut tape = Tape::new();
    let leaves = ps.inject(&mut tape);
    let root = build(&mut tape, &leaves);
    let grads = tape.backward(root);
    let flat = ps.flat_gradient(&leaves, &grads);

    let base = ps.values().to_vec();
    let mut results = Vec::new();
    for &idx in entry_indices {
        let e = ps.entry(idx).clone();
        let mut worst = 0.0f64;
        for j in 0..e.len {
            let coord = e.offset + j;
            let mut probe = |delta: f64| -> f64 {
                let mut v = base.clone();
                v[coord] += delta;
                ps.set_values(&v);
                let mut t = Tape::new();
                let l = ps.inject(&mut t);
                let r = build(&mut t, &l);
                t.scalar_value(r)
            };
            let numeric = (probe(step) - probe(-step)) / (2.0 * step);
            let analytic = flat[coord];
            let rel = (analytic - numeric).abs() / numeric.abs().max(1.0);
            worst = worst.max(rel);
        }
        results.push((e.name, worst));
    }
    ps.set_values(&base);
    results
}

//! The three encoders: hourly physiology to embeddings, demographics to an
//! embedding, and the recurrent predictor over similarity trajectories.
//!
//! The physiological encoder has two modes. `Simple` runs one LSTM over the
//! full channel row per hour — small and fast, the right choice for compact
//! experiments. `Channelwise` mirrors the full architecture: a two-layer
//! bidirectional LSTM per variable (value channels plus that variable's
//! mask), learned per-variable gates, additive attention over hours with a
//! skip connection, channel dropout, and a linear projection.

use ndarray::{Array1, Array2, ArrayD, IxDyn};
use rand::Rng;
use rand_chacha::ChaCha20Rng;

use crate::autodiff::{NodeId, Tape};
use crate::nn::{Linear, LstmCell, ParamLeaves, ParamStore};
use crate::schema::Schema;

const ATTENTION_HIDDEN: usize = 32;
const GATE_HIDDEN: usize = 16;

/// Training-time randomness for dropout; `Eval` disables it.
pub enum EncodeMode<'a> {
    Train { rng: &'a mut ChaCha20Rng },
    Eval,
}

#[derive(Debug, Clone)]
pub struct ChannelwiseEncoder {
    /// (value_offset, value_width) per variable in the encoded row.
    var_slices: Vec<(usize, usize)>,
    mask_offset: usize,
    l1_fwd: Vec<LstmCell>,
    l1_bwd: Vec<LstmCell>,
    l2_fwd: Vec<LstmCell>,
    l2_bwd: Vec<LstmCell>,
    gate_w: usize,
    gate_b: usize,
    gate_u: usize,
    att_wq: usize,
    att_wk: usize,
    att_b: usize,
    att_v: usize,
    proj: Linear,
    channel_hidden: usize,
    dropout: f64,
}

#[derive(Debug, Clone)]
pub enum PhysEncoder {
    Simple { cell: LstmCell },
    Channelwise(Box<ChannelwiseEncoder>),
}

impl PhysEncoder {
    pub fn register_simple(
        ps: &mut ParamStore,
        prefix: &str,
        in_width: usize,
        n_embed: usize,
        rng: &mut ChaCha20Rng,
    ) -> PhysEncoder {
        PhysEncoder::Simple {
            cell: LstmCell::register(ps, &format!("{prefix}.lstm"), in_width, n_embed, rng),
        }
    }

    pub fn register_channelwise(
        ps: &mut ParamStore,
        prefix: &str,
        schema: &Schema,
        channel_hidden: usize,
        n_embed: usize,
        dropout: f64,
        rng: &mut ChaCha20Rng,
    ) -> PhysEncoder {
        let layout = schema.layout();
        let n_vars = schema.n_variables();
        let mut var_slices = Vec::with_capacity(n_vars);
        let mut l1_fwd = Vec::with_capacity(n_vars);
        let mut l1_bwd = Vec::with_capacity(n_vars);
        let mut l2_fwd = Vec::with_capacity(n_vars);
        let mut l2_bwd = Vec::with_capacity(n_vars);
        for (v, var) in schema.variables().iter().enumerate() {
            let in_v = layout.value_width[v] + 1;
            var_slices.push((layout.value_offset[v], layout.value_width[v]));
            let name = &var.name;
            l1_fwd.push(LstmCell::register(
                ps,
                &format!("{prefix}.{name}.l1f"),
                in_v,
                channel_hidden,
                rng,
            ));
            l1_bwd.push(LstmCell::register(
                ps,
                &format!("{prefix}.{name}.l1b"),
                in_v,
                channel_hidden,
                rng,
            ));
            l2_fwd.push(LstmCell::register(
                ps,
                &format!("{prefix}.{name}.l2f"),
                2 * channel_hidden,
                channel_hidden,
                rng,
            ));
            l2_bwd.push(LstmCell::register(
                ps,
                &format!("{prefix}.{name}.l2b"),
                2 * channel_hidden,
                channel_hidden,
                rng,
            ));
        }
        let d = n_vars * 2 * channel_hidden;
        let gb = 1.0 / (2.0 * channel_hidden as f64).sqrt();
        let gate_w =
            ps.register_uniform(&format!("{prefix}.gate.w"), &[GATE_HIDDEN, 2 * channel_hidden], gb, rng);
        let gate_b = ps.register_const(&format!("{prefix}.gate.b"), &[GATE_HIDDEN], 0.0);
        let gate_u = ps.register_uniform(
            &format!("{prefix}.gate.u"),
            &[GATE_HIDDEN],
            1.0 / (GATE_HIDDEN as f64).sqrt(),
            rng,
        );
        let ab = 1.0 / (d as f64).sqrt();
        let att_wq = ps.register_uniform(&format!("{prefix}.att.wq"), &[ATTENTION_HIDDEN, d], ab, rng);
        let att_wk = ps.register_uniform(&format!("{prefix}.att.wk"), &[ATTENTION_HIDDEN, d], ab, rng);
        let att_b = ps.register_const(&format!("{prefix}.att.b"), &[ATTENTION_HIDDEN], 0.0);
        let att_v = ps.register_uniform(
            &format!("{prefix}.att.v"),
            &[ATTENTION_HIDDEN],
            1.0 / (ATTENTION_HIDDEN as f64).sqrt(),
            rng,
        );
        let proj = Linear::register(ps, &format!("{prefix}.proj"), d, n_embed, rng);
        PhysEncoder::Channelwise(Box::new(ChannelwiseEncoder {
            var_slices,
            mask_offset: layout.mask_offset,
            l1_fwd,
            l1_bwd,
            l2_fwd,
            l2_bwd,
            gate_w,
            gate_b,
            gate_u,
            att_wq,
            att_wk,
            att_b,
            att_v,
            proj,
            channel_hidden,
            dropout,
        }))
    }

    /// Hourly embeddings for one record, one node per hour.
    pub fn encode(
        &self,
        tape: &mut Tape,
        leaves: &ParamLeaves,
        x: &Array2<f64>,
        mode: &mut EncodeMode,
    ) -> Vec<NodeId> {
        match self {
            PhysEncoder::Simple { cell } => {
                let rows: Vec<NodeId> = (0..x.nrows())
                    .map(|t| tape.leaf_vec(x.row(t).as_slice().unwrap()))
                    .collect();
                cell.run(tape, leaves, &rows)
            }
            PhysEncoder::Channelwise(enc) => enc.encode(tape, leaves, x, mode),
        }
    }

    /// Tape-free hourly embeddings (dropout off). The channelwise mode runs
    /// through a scratch tape; the simple mode computes directly.
    pub fn encode_plain(&self, ps: &ParamStore, x: &Array2<f64>) -> Vec<Array1<f64>> {
        match self {
            PhysEncoder::Simple { cell } => {
                let rows: Vec<Array1<f64>> = (0..x.nrows()).map(|t| x.row(t).to_owned()).collect();
                cell.run_plain(ps, &rows)
            }
            PhysEncoder::Channelwise(_) => {
                let mut tape = Tape::new();
                let leaves = ps.inject(&mut tape);
                let hs = self.encode(&mut tape, &leaves, x, &mut EncodeMode::Eval);
                hs.iter()
                    .map(|&h| {
                        Array1::from_vec(tape.value(h).iter().copied().collect())
                    })
                    .collect()
            }
        }
    }

    pub fn n_embed(&self) -> usize {
        match self {
            PhysEncoder::Simple { cell } => cell.n_hidden,
            PhysEncoder::Channelwise(enc) => enc.proj.n_out,
        }
    }
}

impl ChannelwiseEncoder {
    fn encode(
        &self,
        tape: &mut Tape,
        leaves: &ParamLeaves,
        x: &Array2<f64>,
        mode: &mut EncodeMode,
    ) -> Vec<NodeId> {
        let t_hours = x.nrows();
        let n_vars = self.var_slices.len();

        // Per-variable bidirectional stacks.
        let mut var_embed: Vec<Vec<NodeId>> = Vec::with_capacity(n_vars);
        for v in 0..n_vars {
            let (off, width) = self.var_slices[v];
            let inputs: Vec<NodeId> = (0..t_hours)
                .map(|t| {
                    let mut row: Vec<f64> = (0..width).map(|j| x[[t, off + j]]).collect();
                    row.push(x[[t, self.mask_offset + v]]);
                    tape.leaf_vec(&row)
                })
                .collect();
            let h1 = bidirectional(tape, leaves, &self.l1_fwd[v], &self.l1_bwd[v], &inputs);
            let h2 = bidirectional(tape, leaves, &self.l2_fwd[v], &self.l2_bwd[v], &h1);
            var_embed.push(h2);
        }

        // Per-variable gates from the time-averaged embedding.
        let mut gated: Vec<Vec<NodeId>> = Vec::with_capacity(n_vars);
        for (v, embeds) in var_embed.iter().enumerate() {
            let sum = tape.add_all(embeds);
            let mean = tape.scale(sum, 1.0 / t_hours as f64);
            let pre = tape.matvec(leaves.node(self.gate_w), mean);
            let pre = tape.add(pre, leaves.node(self.gate_b));
            let act = tape.tanh(pre);
            let score = tape.dot(leaves.node(self.gate_u), act);
            let gate = tape.sigmoid(score);
            gated.push(embeds.iter().map(|&e| tape.scale_by(e, gate)).collect());
            let _ = v;
        }

        // Hourly feature vector: concat across variables.
        let merged: Vec<NodeId> = (0..t_hours)
            .map(|t| {
                let parts: Vec<NodeId> = gated.iter().map(|g| g[t]).collect();
                tape.concat(&parts)
            })
            .collect();

        // Additive attention over hours, then a skip connection.
        let queries: Vec<NodeId> = merged
            .iter()
            .map(|&m| tape.matvec(leaves.node(self.att_wq), m))
            .collect();
        let keys: Vec<NodeId> = merged
            .iter()
            .map(|&m| tape.matvec(leaves.node(self.att_wk), m))
            .collect();
        let mut contexts = Vec::with_capacity(t_hours);
        for &q in &queries {
            let scores: Vec<NodeId> = (0..t_hours)
                .map(|s| {
                    let qk = tape.add(q, keys[s]);
                    let qkb = tape.add(qk, leaves.node(self.att_b));
                    let act = tape.tanh(qkb);
                    tape.dot(leaves.node(self.att_v), act)
                })
                .collect();
            let score_vec = tape.concat(&scores);
            let attn = tape.softmax_t(score_vec, 1.0);
            let weighted: Vec<NodeId> = (0..t_hours)
                .map(|s| {
                    let a = tape.index(attn, s);
                    tape.scale_by(merged[s], a)
                })
                .collect();
            contexts.push(tape.add_all(&weighted));
        }

        // One channel-dropout mask shared across hours.
        let d = n_vars * 2 * self.channel_hidden;
        let mask = match mode {
            EncodeMode::Train { rng } if self.dropout > 0.0 => {
                let keep = 1.0 - self.dropout;
                let data: Vec<f64> = (0..d)
                    .map(|_| if rng.gen_bool(keep) { 1.0 / keep } else { 0.0 })
                    .collect();
                Some(ArrayD::from_shape_vec(IxDyn(&[d]), data).unwrap())
            }
            _ => None,
        };

        (0..t_hours)
            .map(|t| {
                let skip = tape.add(merged[t], contexts[t]);
                let dropped = match &mask {
                    Some(m) => tape.mul_mask(skip, m.clone()),
                    None => skip,
                };
                self.proj.apply(tape, leaves, dropped)
            })
            .collect()
    }
}

/// Forward and reverse passes concatenated per step.
fn bidirectional(
    tape: &mut Tape,
    leaves: &ParamLeaves,
    fwd: &LstmCell,
    bwd: &LstmCell,
    inputs: &[NodeId],
) -> Vec<NodeId> {
    let hf = fwd.run(tape, leaves, inputs);
    let reversed: Vec<NodeId> = inputs.iter().rev().copied().collect();
    let mut hb = bwd.run(tape, leaves, &reversed);
    hb.reverse();
    hf.iter()
        .zip(&hb)
        .map(|(&f, &b)| tape.concat(&[f, b]))
        .collect()
}

/// Demographic encoder: one hidden tanh layer is the embedding.
#[derive(Debug, Clone)]
pub struct DemoEncoder {
    lin: Linear,
}

impl DemoEncoder {
    pub fn register(
        ps: &mut ParamStore,
        prefix: &str,
        in_width: usize,
        hidden: usize,
        rng: &mut ChaCha20Rng,
    ) -> DemoEncoder {
        DemoEncoder {
            lin: Linear::register(ps, prefix, in_width, hidden, rng),
        }
    }

    pub fn encode(&self, tape: &mut Tape, leaves: &ParamLeaves, d: &Array1<f64>) -> NodeId {
        let input = tape.leaf_vec(d.as_slice().unwrap());
        let pre = self.lin.apply(tape, leaves, input);
        tape.tanh(pre)
    }

    pub fn encode_plain(&self, ps: &ParamStore, d: &Array1<f64>) -> Array1<f64> {
        self.lin.apply_plain(ps, d).mapv(f64::tanh)
    }

    pub fn n_embed(&self) -> usize {
        self.lin.n_out
    }
}

/// Recurrent predictor over the similarity trajectory: the hidden state
/// after seeing hours 1..t is the forecast for hour t+1.
#[derive(Debug, Clone)]
pub struct PrognosticEncoder {
    cell: LstmCell,
}

impl PrognosticEncoder {
    pub fn register(
        ps: &mut ParamStore,
        prefix: &str,
        n_prototypes: usize,
        rng: &mut ChaCha20Rng,
    ) -> PrognosticEncoder {
        PrognosticEncoder {
            cell: LstmCell::register(ps, &format!("{prefix}.lstm"), n_prototypes, n_prototypes, rng),
        }
    }

    /// Forecasts for hours 2..=T given similarities for hours 1..T-1.
    pub fn forecast(
        &self,
        tape: &mut Tape,
        leaves: &ParamLeaves,
        sims: &[NodeId],
    ) -> Vec<NodeId> {
        self.cell.run(tape, leaves, sims)
    }

    pub fn forecast_plain(&self, ps: &ParamStore, sims: &[Array1<f64>]) -> Vec<Array1<f64>> {
        self.cell.run_plain(ps, sims)
    }
}

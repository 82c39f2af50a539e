//! Prototype banks and similarity scoring.
//!
//! A bank holds N prototype vectors living in an encoder's embedding space.
//! Similarity to an embedding is a sharpened cosine, sigma(phi * cos), so
//! scores stay in (0,1) with phi controlling how quickly they saturate.
//! Cohort banks additionally turn similarities into a near-one-hot
//! attribution with a low-temperature softmax.

use ndarray::Array1;
use rand::Rng;
use rand_chacha::ChaCha20Rng;

use crate::autodiff::{NodeId, Tape};
use crate::nn::{sigmoid_scalar, tensor1, ParamLeaves, ParamStore};

/// Norms below this are treated as degenerate; the cosine is defined as 0
/// there, giving a neutral similarity of one half.
const NORM_GUARD_SQ: f64 = 1e-24;

#[derive(Debug, Clone)]
pub struct PrototypeBank {
    /// One parameter entry per prototype, each of shape [dim].
    entries: Vec<usize>,
    pub dim: usize,
    /// Sharpness phi of the similarity squash.
    pub sharpness: f64,
}

impl PrototypeBank {
    /// Register `n` prototypes drawn uniformly from [-1, 1]^dim, redrawing
    /// the (vanishingly unlikely) near-zero vectors.
    pub fn register(
        ps: &mut ParamStore,
        prefix: &str,
        n: usize,
        dim: usize,
        sharpness: f64,
        rng: &mut ChaCha20Rng,
    ) -> PrototypeBank {
        let mut entries = Vec::with_capacity(n);
        for k in 0..n {
            let mut draw: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
            while draw.iter().map(|x| x * x).sum::<f64>() < 1e-16 {
                draw = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
            }
            let mut it = draw.into_iter();
            entries.push(ps.register(&format!("{prefix}.{k}"), &[dim], || it.next().unwrap()));
        }
        PrototypeBank { entries, dim, sharpness }
    }

    /// Wrap already-registered parameter entries as a bank.
    #[cfg(test)]
    pub(crate) fn from_entries(entries: Vec<usize>, dim: usize, sharpness: f64) -> PrototypeBank {
        PrototypeBank { entries, dim, sharpness }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entry(&self, k: usize) -> usize {
        self.entries[k]
    }

    pub fn prototype(&self, ps: &ParamStore, k: usize) -> Array1<f64> {
        tensor1(ps, self.entries[k])
    }

    pub fn set_prototype(&self, ps: &mut ParamStore, k: usize, value: &Array1<f64>) {
        ps.set_tensor(self.entries[k], &value.clone().into_dyn());
    }

    /// Similarity vector sigma(phi * cos(h, p_k)) for all prototypes.
    pub fn similarities(&self, tape: &mut Tape, leaves: &ParamLeaves, h: NodeId) -> NodeId {
        let hh = tape.dot(h, h);
        let h_degenerate = tape.scalar_value(hh) < NORM_GUARD_SQ;
        if h_degenerate {
            log::warn!("zero-norm embedding in similarity; scores fall back to 0.5");
        }
        let h_norm = tape.sqrt(hh);
        let per_proto: Vec<NodeId> = self
            .entries
            .iter()
            .map(|&e| {
                let p = leaves.node(e);
                let pp = tape.dot(p, p);
                let cos = if h_degenerate || tape.scalar_value(pp) < NORM_GUARD_SQ {
                    tape.scalar(0.0)
                } else {
                    let p_norm = tape.sqrt(pp);
                    let denom = tape.mul(h_norm, p_norm);
                    let num = tape.dot(h, p);
                    tape.div(num, denom)
                };
                let sharp = tape.scale(cos, self.sharpness);
                tape.sigmoid(sharp)
            })
            .collect();
        tape.concat(&per_proto)
    }

    pub fn similarities_plain(&self, ps: &ParamStore, h: &Array1<f64>) -> Array1<f64> {
        let hh: f64 = h.dot(h);
        Array1::from_iter(self.entries.iter().map(|&e| {
            let p = tensor1(ps, e);
            let pp: f64 = p.dot(&p);
            let cos = if hh < NORM_GUARD_SQ || pp < NORM_GUARD_SQ {
                0.0
            } else {
                h.dot(&p) / (hh.sqrt() * pp.sqrt())
            };
            sigmoid_scalar(self.sharpness * cos)
        }))
    }

    /// Cosine of an embedding against one prototype, for projection scans.
    pub fn cosine_plain(&self, ps: &ParamStore, k: usize, h: &Array1<f64>) -> f64 {
        let p = tensor1(ps, self.entries[k]);
        let (hh, pp) = (h.dot(h), p.dot(&p));
        if hh < NORM_GUARD_SQ || pp < NORM_GUARD_SQ {
            0.0
        } else {
            h.dot(&p) / (hh.sqrt() * pp.sqrt())
        }
    }
}

/// Near-one-hot attribution over similarity scores: softmax at a very low
/// temperature, stabilized by max subtraction.
pub fn sparse_attribution(tape: &mut Tape, sims: NodeId, temperature: f64) -> NodeId {
    tape.softmax_t(sims, temperature)
}

pub fn sparse_attribution_plain(sims: &Array1<f64>, temperature: f64) -> Array1<f64> {
    let m = sims.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps = sims.mapv(|x| ((x - m) / temperature).exp());
    let z = exps.sum();
    exps / z
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;

    use super::*;
    use crate::nn::finite_difference_check;

    fn bank_with(ps: &mut ParamStore, vectors: &[Vec<f64>], sharpness: f64) -> PrototypeBank {
        let dim = vectors[0].len();
        let entries: Vec<usize> = vectors
            .iter()
            .enumerate()
            .map(|(k, v)| {
                let mut it = v.clone().into_iter();
                ps.register(&format!("bank.{k}"), &[dim], || it.next().unwrap())
            })
            .collect();
        PrototypeBank { entries, dim, sharpness }
    }

    #[test]
    fn aligned_and_opposed_embeddings_hit_the_sigmoid_extremes() {
        let mut ps = ParamStore::new();
        let bank = bank_with(&mut ps, &[vec![2.0, 0.0], vec![-1.0, 0.0]], 5.0);
        let h = Array1::from_vec(vec![3.0, 0.0]);
        let sims = bank.similarities_plain(&ps, &h);
        // cos=1 and cos=-1, squashed by sigma(5 cos).
        assert!((sims[0] - 0.9933071490757153).abs() < 1e-15);
        assert!((sims[1] - 0.006692850924284856).abs() < 1e-15);
    }

    #[test]
    fn zero_norm_embedding_scores_one_half() {
        let mut ps = ParamStore::new();
        let bank = bank_with(&mut ps, &[vec![1.0, 1.0]], 5.0);
        let h = Array1::from_vec(vec![0.0, 0.0]);
        let sims = bank.similarities_plain(&ps, &h);
        assert_eq!(sims[0], 0.5);

        let mut tape = Tape::new();
        let leaves = ps.inject(&mut tape);
        let hn = tape.leaf_vec(&[0.0, 0.0]);
        let s = bank.similarities(&mut tape, &leaves, hn);
        assert_eq!(tape.value(s)[[0]], 0.5);
    }

    #[test]
    fn tape_and_plain_similarities_agree() {
        let mut rng = ChaCha20Rng::seed_from_u64(61);
        let mut ps = ParamStore::new();
        let bank = PrototypeBank::register(&mut ps, "p", 6, 4, 5.0, &mut rng);
        for trial in 0..5 {
            let h = Array1::from_shape_fn(4, |i| ((trial * 4 + i) as f64 * 0.77).sin());
            let plain = bank.similarities_plain(&ps, &h);
            let mut tape = Tape::new();
            let leaves = ps.inject(&mut tape);
            let hn = tape.leaf_vec(h.as_slice().unwrap());
            let s = bank.similarities(&mut tape, &leaves, hn);
            for (a, b) in tape.value(s).iter().zip(plain.iter()) {
                assert_eq!(a, b);
            }
        }
    }

    #[test]
    fn similarity_gradients_match_finite_differences() {
        let mut rng = ChaCha20Rng::seed_from_u64(67);
        let mut ps = ParamStore::new();
        let bank = PrototypeBank::register(&mut ps, "p", 3, 4, 5.0, &mut rng);
        let h: Vec<f64> = (0..4).map(|i| 0.4 * (i as f64) - 0.7).collect();
        let all: Vec<usize> = (0..ps.n_entries()).collect();
        let checks = finite_difference_check(&mut ps, &all, 1e-5, |tape, leaves| {
            let hn = tape.leaf_vec(&h);
            let s = bank.similarities(tape, leaves, hn);
            let sq = tape.mul(s, s);
            tape.sum(sq)
        });
        for (name, err) in checks {
            assert!(err < 1e-4, "{name}: relative error {err}");
        }
    }

    #[test]
    fn low_temperature_attribution_is_one_hot() {
        let sims = Array1::from_vec(vec![0.9, 0.5]);
        let attr = sparse_attribution_plain(&sims, 1e-6);
        assert!((attr[0] - 1.0).abs() < 1e-12);
        assert!(attr[1].abs() < 1e-12);

        let mut tape = Tape::new();
        let s = tape.leaf_vec(&[0.9, 0.5]);
        let a = sparse_attribution(&mut tape, s, 1e-6);
        assert!((tape.value(a)[[0]] - 1.0).abs() < 1e-12);
        assert!(tape.value(a)[[1]].abs() < 1e-12);
    }

    #[test]
    fn attribution_preserves_the_argmax() {
        let mut rng = ChaCha20Rng::seed_from_u64(71);
        for _ in 0..500 {
            let sims = Array1::from_shape_fn(8, |_| rng.gen_range(0.0..1.0));
            let attr = sparse_attribution_plain(&sims, 1e-6);
            let arg_s = sims
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
                .unwrap()
                .0;
            let arg_a = attr
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
                .unwrap()
                .0;
            assert_eq!(arg_s, arg_a);
            let total: f64 = attr.sum();
            assert!((total - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn registered_prototypes_are_never_degenerate() {
        let mut rng = ChaCha20Rng::seed_from_u64(73);
        let mut ps = ParamStore::new();
        let bank = PrototypeBank::register(&mut ps, "p", 50, 8, 5.0, &mut rng);
        for k in 0..bank.len() {
            let p = bank.prototype(&ps, k);
            assert!(p.dot(&p) > 1e-16);
        }
    }
}

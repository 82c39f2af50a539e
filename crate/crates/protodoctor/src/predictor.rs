//! Risk head: combines course similarities and cohort attribution into a
//! mortality probability that decomposes into per-prototype contributions.
//!
//! The course-side score is sum_k (w_course_k + adj_k) * s_course_k, where
//! adj = interactions * s_cohort personalizes each course weight for the
//! record's cohort. The cohort-side score is w_cohort . s_cohort. The
//! prediction is sigma of their sum, so every logit point is attributable to
//! a named prototype.

use ndarray::Array1;
use rand::Rng;
use rand_chacha::ChaCha20Rng;

use crate::autodiff::{NodeId, Tape};
use crate::error::{Error, Result};
use crate::nn::{sigmoid_scalar, tensor1, tensor2, ParamLeaves, ParamStore};

#[derive(Debug, Clone)]
pub struct RiskHead {
    pub w_course: usize,
    pub w_cohort: usize,
    pub interactions: usize,
    pub n_course: usize,
    pub n_cohort: usize,
    /// When false the interaction matrix is kept frozen at zero and excluded
    /// from the forward pass.
    pub enable_interactions: bool,
}

/// Tape nodes of one risk computation.
pub struct RiskNodes {
    pub z_course: NodeId,
    pub z_cohort: NodeId,
    pub y_hat: NodeId,
}

/// Fully evaluated decomposition of one prediction.
#[derive(Debug, Clone)]
pub struct RiskBreakdown {
    /// (w_course_k + adj_k) * s_course_k per course prototype.
    pub course_contributions: Vec<f64>,
    /// w_cohort_m * s_cohort_m per cohort prototype.
    pub cohort_contributions: Vec<f64>,
    /// Personalized adjustment applied to each course weight.
    pub adjustments: Vec<f64>,
    pub z_course: f64,
    pub z_cohort: f64,
    pub y_hat: f64,
}

impl RiskHead {
    pub fn register(
        ps: &mut ParamStore,
        prefix: &str,
        n_course: usize,
        n_cohort: usize,
        enable_interactions: bool,
        rng: &mut ChaCha20Rng,
    ) -> RiskHead {
        let bc = 1.0 / (n_course as f64).sqrt();
        let bd = 1.0 / (n_cohort as f64).sqrt();
        let w_course =
            ps.register(&format!("{prefix}.w_course"), &[n_course], || rng.gen_range(-bc..bc));
        let w_cohort =
            ps.register(&format!("{prefix}.w_cohort"), &[n_cohort], || rng.gen_range(-bd..bd));
        // Interactions always start at zero: the shared weights explain what
        // they can first, and a zero start keeps the parameter layout and
        // draw order identical whether or not interactions are enabled.
        let interactions =
            ps.register_const(&format!("{prefix}.interactions"), &[n_course, n_cohort], 0.0);
        RiskHead {
            w_course,
            w_cohort,
            interactions,
            n_course,
            n_cohort,
            enable_interactions,
        }
    }

    pub fn risk(
        &self,
        tape: &mut Tape,
        leaves: &ParamLeaves,
        s_course: NodeId,
        s_cohort: NodeId,
    ) -> RiskNodes {
        let w_c = leaves.node(self.w_course);
        let eff = if self.enable_interactions {
            let adj = tape.matvec(leaves.node(self.interactions), s_cohort);
            tape.add(w_c, adj)
        } else {
            w_c
        };
        let z_course = tape.dot(eff, s_course);
        let z_cohort = tape.dot(leaves.node(self.w_cohort), s_cohort);
        let z = tape.add(z_course, z_cohort);
        let y_hat = tape.sigmoid(z);
        RiskNodes { z_course, z_cohort, y_hat }
    }

    pub fn decompose(
        &self,
        ps: &ParamStore,
        s_course: &Array1<f64>,
        s_cohort: &Array1<f64>,
    ) -> Result<RiskBreakdown> {
        if s_course.len() != self.n_course || s_cohort.len() != self.n_cohort {
            return Err(Error::Shape(format!(
                "risk head expects {}x{} similarities, got {}x{}",
                self.n_course,
                self.n_cohort,
                s_course.len(),
                s_cohort.len()
            )));
        }
        let w_c = tensor1(ps, self.w_course);
        let w_d = tensor1(ps, self.w_cohort);
        let adjustments: Vec<f64> = if self.enable_interactions {
            tensor2(ps, self.interactions).dot(s_cohort).to_vec()
        } else {
            vec![0.0; self.n_course]
        };
        let course_contributions: Vec<f64> = (0..self.n_course)
            .map(|k| (w_c[k] + adjustments[k]) * s_course[k])
            .collect();
        let cohort_contributions: Vec<f64> =
            (0..self.n_cohort).map(|m| w_d[m] * s_cohort[m]).collect();
        let z_course: f64 = course_contributions.iter().sum();
        let z_cohort: f64 = cohort_contributions.iter().sum();
        let y_hat = sigmoid_scalar(z_course + z_cohort);
        for (stage, v) in [("course score", z_course), ("cohort score", z_cohort), ("prediction", y_hat)] {
            if !v.is_finite() {
                return Err(Error::Numeric {
                    stage: stage.to_string(),
                    detail: format!("non-finite value {v}"),
                });
            }
        }
        Ok(RiskBreakdown {
            course_contributions,
            cohort_contributions,
            adjustments,
            z_course,
            z_cohort,
            y_hat,
        })
    }
}

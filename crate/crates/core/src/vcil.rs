//! Forward-only view-centric ID learning.
//!
//! Slots attend over the ID features of one frame with their queries
//! transformed by the inter-frame homography, slots of two frames are
//! correlated, and the decoded correlation refines the current frame's
//! features through residual cross-attention. Weights are seeded, not
//! trained.

use nalgebra::{DMatrix, DVector, Matrix3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::geometry::Homography;

/// Query/key projection width. Three, so the homography can act on projected
/// slot queries.
pub const QK_DIM: usize = 3;

/// Unit-normalized ID embeddings, one row per detection.
#[derive(Debug, Clone, PartialEq)]
pub struct IdFeatureSet {
    pub features: DMatrix<f64>,
    pub frame: usize,
}

impl IdFeatureSet {
    /// Builds from rows, normalizing each to unit length.
    pub fn from_rows(frame: usize, rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().find(|r| r.len() != dim) {
            return Err(Error::DimensionMismatch { expected: dim, got: bad.len() });
        }
        let mut features = DMatrix::zeros(rows.len(), dim);
        for (i, r) in rows.iter().enumerate() {
            let v = DVector::from_column_slice(r);
            let norm = v.norm();
            if !(norm > 0.0) || !norm.is_finite() {
                return Err(Error::InvalidGeometry("zero or non-finite embedding"));
            }
            features.set_row(i, &(v / norm).transpose());
        }
        Ok(Self { features, frame })
    }

    pub fn len(&self) -> usize {
        self.features.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.features.nrows() == 0
    }

    pub fn dim(&self) -> usize {
        self.features.ncols()
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        self.features.row(i).iter().copied().collect()
    }
}

/// View-centric slots of one frame, one row per slot.
#[derive(Debug, Clone, PartialEq)]
pub struct SlotBank {
    pub slots: DMatrix<f64>,
    pub frame: usize,
}

impl SlotBank {
    pub fn len(&self) -> usize {
        self.slots.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.nrows() == 0
    }

    pub fn dim(&self) -> usize {
        self.slots.ncols()
    }
}

/// Two-layer perceptron `C → C → C` with ReLU.
#[derive(Debug, Clone, PartialEq)]
pub struct Decoder {
    pub w1: DMatrix<f64>,
    pub b1: DVector<f64>,
    pub w2: DMatrix<f64>,
    pub b2: DVector<f64>,
}

impl Decoder {
    /// Applies the MLP to every row of `x`.
    pub fn forward(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        let mut hidden = x * self.w1.transpose();
        for mut row in hidden.row_iter_mut() {
            row += self.b1.transpose();
            row.apply(|v| *v = v.max(0.0));
        }
        let mut out = hidden * self.w2.transpose();
        for mut row in out.row_iter_mut() {
            row += self.b2.transpose();
        }
        out
    }
}

/// Linear maps stored as `out × in` matrices; applied to row-major feature
/// matrices as `X · Wᵀ`.
#[derive(Debug, Clone, PartialEq)]
pub struct VcilWeights {
    pub q_proj: DMatrix<f64>,
    pub k_proj: DMatrix<f64>,
    pub v_proj: DMatrix<f64>,
    pub decoder: Decoder,
    pub seed: u64,
}

impl VcilWeights {
    /// Entries uniform in `[−1/√C, 1/√C]`, deterministic in `seed`.
    pub fn seeded(dim: usize, seed: u64) -> Result<Self> {
        if dim < 4 || !dim.is_multiple_of(4) {
            return Err(Error::InvalidConfig(format!("feature dimension must be a positive multiple of 4, got {dim}")));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let bound = 1.0 / (dim as f64).sqrt();
        let mut mat = |r: usize, c: usize| DMatrix::from_fn(r, c, |_, _| rng.random_range(-bound..=bound));
        let q_proj = mat(QK_DIM, dim);
        let k_proj = mat(QK_DIM, dim);
        let v_proj = mat(dim, dim);
        let w1 = mat(dim, dim);
        let b1 = mat(dim, 1).column(0).into_owned();
        let w2 = mat(dim, dim);
        let b2 = mat(dim, 1).column(0).into_owned();
        Ok(Self { q_proj, k_proj, v_proj, decoder: Decoder { w1, b1, w2, b2 }, seed })
    }

    pub fn dim(&self) -> usize {
        self.v_proj.ncols()
    }
}

/// `n_slots` standard-normal vectors of width `dim`, each L2-normalized.
pub fn init_slots(n_slots: usize, dim: usize, seed: u64, frame: usize) -> Result<SlotBank> {
    if n_slots < 1 || dim < 4 {
        return Err(Error::InvalidConfig(format!("need n_slots >= 1 and dim >= 4, got {n_slots}, {dim}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut slots = DMatrix::from_fn(n_slots, dim, |_, _| rng.sample::<f64, _>(StandardNormal));
    for mut row in slots.row_iter_mut() {
        let n = row.norm();
        row /= n;
    }
    Ok(SlotBank { slots, frame })
}

/// Softmax of every row, max-shifted.
pub fn softmax_rows(m: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = m.clone();
    for mut row in out.row_iter_mut() {
        let max = row.max();
        row.apply(|v| *v = (*v - max).exp());
        let s = row.sum();
        row /= s;
    }
    out
}

fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::DimensionMismatch { expected, got });
    }
    Ok(())
}

/// Slot update from `N_f × N_s` attention logits: softmax across slots, then
/// each slot becomes the attention-weighted mean of the projected values.
fn slot_update(logits: &DMatrix<f64>, values: &DMatrix<f64>) -> DMatrix<f64> {
    let attn = softmax_rows(logits);
    let mut updated = attn.transpose() * values;
    for (j, mut row) in updated.row_iter_mut().enumerate() {
        let mass: f64 = attn.column(j).sum();
        row /= mass;
    }
    updated
}

fn attention_scale(dim: usize) -> f64 {
    1.0 / (dim as f64).sqrt()
}

/// One plain slot-attention iteration: logits `k(F) · q(S)ᵀ / √C`.
pub fn slot_attention(f: &IdFeatureSet, s: &SlotBank, w: &VcilWeights) -> Result<SlotBank> {
    check_dim(w.dim(), s.dim())?;
    if f.is_empty() {
        return Ok(s.clone());
    }
    check_dim(w.dim(), f.dim())?;
    let keys = &f.features * w.k_proj.transpose();
    let queries = &s.slots * w.q_proj.transpose();
    let logits = (keys * queries.transpose()) * attention_scale(w.dim());
    let values = &f.features * w.v_proj.transpose();
    Ok(SlotBank { slots: slot_update(&logits, &values), frame: s.frame })
}

/// One homographic slot-attention iteration: logits
/// `k(F) · (H · q(S)ᵀ) / √C`. With an empty feature set the slots are
/// returned unchanged.
pub fn hsa_forward(f: &IdFeatureSet, s: &SlotBank, h: &Homography, w: &VcilWeights) -> Result<SlotBank> {
    hsa_iterate(f, s, h, w, 1)
}

/// [`hsa_forward`] repeated `iterations` times, feeding slots back.
pub fn hsa_iterate(
    f: &IdFeatureSet,
    s: &SlotBank,
    h: &Homography,
    w: &VcilWeights,
    iterations: usize,
) -> Result<SlotBank> {
    check_dim(w.dim(), s.dim())?;
    if f.is_empty() {
        return Ok(s.clone());
    }
    check_dim(w.dim(), f.dim())?;
    if !h.is_invertible() {
        return Err(Error::SingularMatrix(h.determinant()));
    }
    let hm: &Matrix3<f64> = h.matrix();
    let hd = DMatrix::from_fn(QK_DIM, QK_DIM, |r, c| hm[(r, c)]);
    let keys = &f.features * w.k_proj.transpose();
    let values = &f.features * w.v_proj.transpose();
    let mut slots = s.slots.clone();
    for _ in 0..iterations.max(1) {
        let queries = &slots * w.q_proj.transpose();
        let logits = (&keys * (&hd * queries.transpose())) * attention_scale(w.dim());
        slots = slot_update(&logits, &values);
    }
    Ok(SlotBank { slots, frame: s.frame })
}

/// `softmax(S_t · S_{t+1}ᵀ / √C) · S_{t+1}`.
pub fn correlate_slots(s_t: &SlotBank, s_t1: &SlotBank) -> Result<SlotBank> {
    check_dim(s_t.len(), s_t1.len())?;
    check_dim(s_t.dim(), s_t1.dim())?;
    let logits = (&s_t.slots * s_t1.slots.transpose()) * attention_scale(s_t.dim());
    Ok(SlotBank { slots: softmax_rows(&logits) * &s_t1.slots, frame: s_t1.frame })
}

/// Decodes the correlated slots and refines each current feature by residual
/// cross-attention onto the reconstruction, then renormalizes.
pub fn update_id_features(f_cur: &IdFeatureSet, s_corr: &SlotBank, w: &VcilWeights) -> Result<IdFeatureSet> {
    if f_cur.is_empty() {
        return Err(Error::EmptyFeatureSet);
    }
    check_dim(w.dim(), f_cur.dim())?;
    check_dim(w.dim(), s_corr.dim())?;
    let recon = w.decoder.forward(&s_corr.slots);
    let attn = softmax_rows(&((&f_cur.features * recon.transpose()) * attention_scale(w.dim())));
    let mut out = &f_cur.features + attn * recon;
    for mut row in out.row_iter_mut() {
        let n = row.norm();
        if n > 0.0 {
            row /= n;
        }
    }
    Ok(IdFeatureSet { features: out, frame: f_cur.frame })
}

/// Settings for refining embeddings between two frames.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VcilConfig {
    pub n_slots: usize,
    pub iterations: usize,
    pub seed: u64,
}

impl Default for VcilConfig {
    fn default() -> Self {
        Self { n_slots: 4, iterations: 1, seed: 0 }
    }
}

/// Full refinement of the current frame's features from the previous frame.
///
/// `h_prev_cur` is `H_{prev,cur}` and its inverse `H_{cur,prev}` drives the
/// current frame's slots. Fresh slots for each frame are seeded from the
/// frame index.
pub fn refine_features(
    prev: &IdFeatureSet,
    cur: &IdFeatureSet,
    h_prev_cur: &Homography,
    weights: &VcilWeights,
    cfg: &VcilConfig,
) -> Result<IdFeatureSet> {
    if cur.is_empty() {
        return Err(Error::EmptyFeatureSet);
    }
    let dim = weights.dim();
    let s_prev = init_slots(cfg.n_slots, dim, crate::seed::mix(cfg.seed, &[prev.frame as u64]), prev.frame)?;
    let s_cur = init_slots(cfg.n_slots, dim, crate::seed::mix(cfg.seed, &[cur.frame as u64]), cur.frame)?;
    let hsa_prev = hsa_iterate(prev, &s_prev, h_prev_cur, weights, cfg.iterations)?;
    let hsa_cur = hsa_iterate(cur, &s_cur, &h_prev_cur.inverse()?, weights, cfg.iterations)?;
    let corr = correlate_slots(&hsa_prev, &hsa_cur)?;
    update_id_features(cur, &corr, weights)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn features(rows: usize, dim: usize, seed: u64) -> IdFeatureSet {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data: Vec<Vec<f64>> =
            (0..rows).map(|_| (0..dim).map(|_| rng.sample::<f64, _>(StandardNormal)).collect()).collect();
        IdFeatureSet::from_rows(1, &data).unwrap()
    }

    #[test]
    fn slot_init_is_deterministic_and_unit() {
        let a = init_slots(4, 64, 9, 1).unwrap();
        assert_eq!(a, init_slots(4, 64, 9, 1).unwrap());
        assert_ne!(a, init_slots(4, 64, 10, 1).unwrap());
        for row in a.slots.row_iter() {
            assert!((row.norm() - 1.0).abs() < 1e-12);
        }
        assert!(init_slots(0, 64, 1, 1).is_err());
    }

    #[test]
    fn single_slot_takes_mean_of_values() {
        let w = VcilWeights::seeded(8, 3).unwrap();
        let f = features(5, 8, 1);
        let s = init_slots(1, 8, 2, 1).unwrap();
        let h = Homography::from_row_major([1.1, 0.2, 3.0, -0.1, 0.9, 1.0, 1e-3, 2e-3, 1.0]).unwrap();
        let out = hsa_forward(&f, &s, &h, &w).unwrap();
        let values = &f.features * w.v_proj.transpose();
        let mean = values.row_sum() / 5.0;
        assert!((out.slots.row(0) - mean).amax() < 1e-12);
    }

    #[test]
    fn identity_homography_is_plain_slot_attention() {
        let w = VcilWeights::seeded(16, 4).unwrap();
        let f = features(7, 16, 5);
        let s = init_slots(4, 16, 6, 1).unwrap();
        let a = hsa_forward(&f, &s, &Homography::identity(), &w).unwrap();
        let b = slot_attention(&f, &s, &w).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn empty_features() {
        let w = VcilWeights::seeded(8, 1).unwrap();
        let s = init_slots(2, 8, 2, 3).unwrap();
        let empty = IdFeatureSet { features: DMatrix::zeros(0, 8), frame: 3 };
        assert_eq!(hsa_forward(&empty, &s, &Homography::identity(), &w).unwrap(), s);
        assert!(matches!(update_id_features(&empty, &s, &w), Err(Error::EmptyFeatureSet)));
    }

    #[test]
    fn correlate_single_slot_returns_next() {
        let a = init_slots(1, 8, 1, 1).unwrap();
        let b = init_slots(1, 8, 2, 2).unwrap();
        assert_eq!(correlate_slots(&a, &b).unwrap().slots, b.slots);
        let c = init_slots(2, 8, 2, 2).unwrap();
        assert!(matches!(correlate_slots(&a, &c), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn correlate_orthonormal_prefers_matching_slot() {
        let eye = SlotBank { slots: DMatrix::identity(4, 8), frame: 1 };
        let out = correlate_slots(&eye, &eye).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                if i != j {
                    assert!(out.slots[(i, i)] > out.slots[(i, j)]);
                }
            }
        }
    }

    #[test]
    fn zero_decoder_is_residual_identity() {
        let mut w = VcilWeights::seeded(8, 1).unwrap();
        w.decoder.w2.fill(0.0);
        w.decoder.b2.fill(0.0);
        let f = features(3, 8, 1);
        let s = init_slots(2, 8, 1, 1).unwrap();
        let out = update_id_features(&f, &s, &w).unwrap();
        assert!((out.features - f.features).amax() < 1e-15);
    }

    #[test]
    fn single_reconstruction_is_added() {
        let w = VcilWeights::seeded(8, 2).unwrap();
        let f = features(3, 8, 4);
        let s = init_slots(1, 8, 1, 1).unwrap();
        let out = update_id_features(&f, &s, &w).unwrap();
        let r = w.decoder.forward(&s.slots);
        for i in 0..3 {
            let v = f.features.row(i) + r.row(0);
            let v = &v / v.norm();
            assert!((out.features.row(i) - v).amax() < 1e-12);
        }
    }

    #[test]
    fn weights_are_bounded_and_seeded() {
        let w = VcilWeights::seeded(64, 11).unwrap();
        let b = 1.0 / 8.0;
        assert!(w.v_proj.iter().chain(w.q_proj.iter()).all(|v| v.abs() <= b));
        assert_eq!(w, VcilWeights::seeded(64, 11).unwrap());
        assert!(VcilWeights::seeded(6, 1).is_err());
    }

    #[test]
    fn refine_keeps_unit_norm() {
        let w = VcilWeights::seeded(16, 2).unwrap();
        let prev = features(4, 16, 1);
        let mut cur = features(5, 16, 2);
        cur.frame = 2;
        let h = Homography::translation(5.0, 1.0);
        let out = refine_features(&prev, &cur, &h, &w, &VcilConfig::default()).unwrap();
        for row in out.features.row_iter() {
            assert!((row.norm() - 1.0).abs() < 1e-12);
        }
    }
}

use std::collections::{BTreeMap, HashMap, VecDeque};
use std::sync::RwLock;

use super::alpha::interpolation_ratios;
use super::{derive_within_interval, AlphaPair, DeriveMode, KeyframeSchedule};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::geometry::{estimate_homography_ransac_with, CorrespondenceSet, Homography, RansacParams};
use crate::seed;

/// Source of matched keypoints between two frames. `correspondences(src, dst)`
/// returns pairs with the first point in `src` and the second in `dst`.
pub trait CorrespondenceProvider: Sync {
    fn correspondences(&self, src: usize, dst: usize) -> Result<CorrespondenceSet>;
}

impl CorrespondenceProvider for BTreeMap<(usize, usize), CorrespondenceSet> {
    fn correspondences(&self, src: usize, dst: usize) -> Result<CorrespondenceSet> {
        if let Some(c) = self.get(&(src, dst)) {
            return Ok(c.clone());
        }
        self.get(&(dst, src)).map(CorrespondenceSet::reversed).ok_or(Error::MissingCorrespondences { src, dst })
    }
}

/// Anything that can answer `H_{a,b}` (maps frame `b` coordinates into frame `a`).
pub trait HomographySource: Sync {
    fn between(&self, a: usize, b: usize) -> Result<Homography>;
}

/// Every pair maps by the identity; turns the projective association into
/// plain IoU.
#[derive(Debug, Clone, Copy, Default)]
pub struct IdentityHomographies;

impl HomographySource for IdentityHomographies {
    fn between(&self, _a: usize, _b: usize) -> Result<Homography> {
        Ok(Homography::identity())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FheParams {
    /// Keyframe sampling interval `h`.
    pub interval: usize,
    pub mode: DeriveMode,
    pub ransac: RansacParams,
}

impl Default for FheParams {
    fn default() -> Self {
        Self { interval: 10, mode: DeriveMode::Lerp, ransac: RansacParams::default() }
    }
}

/// Frozen set of known homographies over frames `1..=frame_count` that
/// answers any-pair queries.
///
/// A graph estimated from correspondences stores the direct keyframe matrices
/// `H_{k2,k1}` and one derived matrix `H_{t,k1}` per non-keyframe. Those form a
/// tree over the frames, so a query composes along its unique path:
///
/// 1. `H_{t,t} = I`;
/// 2. keyframe pairs chain the direct matrices, `H_{k3,k1} = H_{k3,k2} H_{k2,k1}`;
/// 3. inside one interval, `H_{k2,t} = H_{k2,k1} H_{t,k1}⁻¹` and
///    `H_{t2,t1} = H_{t2,k1} H_{t1,k1}⁻¹`;
/// 4. across intervals, `H_{t3,t1} = H_{t3,k2} H_{k2,t1}`.
///
/// Queries never touch correspondences; results are memoized behind a lock
/// so concurrent readers only contend on the cache itself.
#[derive(Debug)]
pub struct HomographyGraph {
    frame_count: usize,
    schedule: Option<KeyframeSchedule>,
    mode: DeriveMode,
    direct: BTreeMap<(usize, usize), Homography>,
    derived: BTreeMap<(usize, usize), Homography>,
    alphas: BTreeMap<usize, AlphaPair>,
    adjacency: BTreeMap<usize, Vec<usize>>,
    cache: RwLock<HashMap<(usize, usize), Homography>>,
}

struct IntervalResult {
    k1: usize,
    k2: usize,
    direct: Homography,
    derived: Vec<(usize, AlphaPair, Homography)>,
}

impl HomographyGraph {
    /// Estimates the graph for `frame_count` frames under `params`.
    pub fn estimate(frame_count: usize, params: &FheParams, provider: &dyn CorrespondenceProvider) -> Result<Self> {
        Self::estimate_with(frame_count, params, provider, Execution::default())
    }

    /// As [`estimate`](Self::estimate); intervals are processed independently
    /// under `exec`.
    pub fn estimate_with(
        frame_count: usize,
        params: &FheParams,
        provider: &dyn CorrespondenceProvider,
        exec: Execution,
    ) -> Result<Self> {
        let schedule = KeyframeSchedule::new(frame_count, params.interval)?;
        let intervals: Vec<(usize, usize)> = schedule.intervals().collect();
        let results = exec.map(&intervals, |&(k1, k2)| estimate_interval(k1, k2, params, provider));
        let mut graph = Self::empty(frame_count, Some(schedule), params.mode);
        for r in results {
            let r = r?;
            graph.direct.insert((r.k2, r.k1), r.direct);
            for (t, alpha, h) in r.derived {
                graph.alphas.insert(t, alpha);
                graph.derived.insert((t, r.k1), h);
            }
        }
        graph.rebuild_adjacency();
        Ok(graph)
    }

    /// Graph over explicitly given pair homographies, e.g. loaded from a cache
    /// file. Entry `((a, b), H)` is `H_{a,b}`.
    pub fn from_pairs(
        frame_count: usize,
        entries: impl IntoIterator<Item = ((usize, usize), Homography)>,
    ) -> Result<Self> {
        let mut graph = Self::empty(frame_count, None, DeriveMode::default());
        for ((a, b), h) in entries {
            graph.check_frame(a)?;
            graph.check_frame(b)?;
            if a == b {
                continue;
            }
            if !h.is_invertible() {
                return Err(Error::SingularMatrix(h.determinant()));
            }
            graph.direct.insert((a, b), h);
        }
        graph.rebuild_adjacency();
        Ok(graph)
    }

    fn empty(frame_count: usize, schedule: Option<KeyframeSchedule>, mode: DeriveMode) -> Self {
        Self {
            frame_count,
            schedule,
            mode,
            direct: BTreeMap::new(),
            derived: BTreeMap::new(),
            alphas: BTreeMap::new(),
            adjacency: BTreeMap::new(),
            cache: RwLock::new(HashMap::new()),
        }
    }

    fn rebuild_adjacency(&mut self) {
        self.adjacency.clear();
        for &(a, b) in self.direct.keys().chain(self.derived.keys()) {
            self.adjacency.entry(a).or_default().push(b);
            self.adjacency.entry(b).or_default().push(a);
        }
        for v in self.adjacency.values_mut() {
            v.sort_unstable();
            v.dedup();
        }
    }

    pub fn frame_count(&self) -> usize {
        self.frame_count
    }

    pub fn schedule(&self) -> Option<&KeyframeSchedule> {
        self.schedule.as_ref()
    }

    pub fn mode(&self) -> DeriveMode {
        self.mode
    }

    /// Directly estimated (or loaded) entries.
    pub fn direct_entries(&self) -> &BTreeMap<(usize, usize), Homography> {
        &self.direct
    }

    /// Within-interval derived entries `H_{t,k1}`.
    pub fn derived_entries(&self) -> &BTreeMap<(usize, usize), Homography> {
        &self.derived
    }

    pub fn alpha(&self, t: usize) -> Option<AlphaPair> {
        self.alphas.get(&t).copied()
    }

    fn check_frame(&self, frame: usize) -> Result<()> {
        if frame < 1 || frame > self.frame_count {
            return Err(Error::FrameOutOfRange { frame, frame_count: self.frame_count });
        }
        Ok(())
    }

    fn edge(&self, a: usize, b: usize) -> Option<Homography> {
        self.direct.get(&(a, b)).or_else(|| self.derived.get(&(a, b))).copied()
    }

    /// `H_{a,b}`: maps frame `b` coordinates into frame `a`.
    pub fn between(&self, a: usize, b: usize) -> Result<Homography> {
        self.check_frame(a)?;
        self.check_frame(b)?;
        if a == b {
            return Ok(Homography::identity());
        }
        if let Some(h) = self.edge(a, b) {
            return Ok(h);
        }
        if let Some(h) = self.cache.read().expect("homography cache poisoned").get(&(a, b)) {
            return Ok(*h);
        }
        let (hi, lo) = (a.max(b), a.min(b));
        let h_hi_lo = self.compose_path(hi, lo)?;
        let h_lo_hi = h_hi_lo.inverse()?;
        let mut cache = self.cache.write().expect("homography cache poisoned");
        cache.insert((hi, lo), h_hi_lo);
        cache.insert((lo, hi), h_lo_hi);
        Ok(if a == hi { h_hi_lo } else { h_lo_hi })
    }

    /// Composes `H_{to,from}` along the shortest known path.
    fn compose_path(&self, to: usize, from: usize) -> Result<Homography> {
        let mut prev: BTreeMap<usize, usize> = BTreeMap::new();
        let mut queue = VecDeque::from([from]);
        prev.insert(from, from);
        while let Some(f) = queue.pop_front() {
            if f == to {
                break;
            }
            for &n in self.adjacency.get(&f).map(Vec::as_slice).unwrap_or(&[]) {
                if let std::collections::btree_map::Entry::Vacant(e) = prev.entry(n) {
                    e.insert(f);
                    queue.push_back(n);
                }
            }
        }
        if !prev.contains_key(&to) {
            return Err(Error::NoHomographyPath(to, from));
        }
        let mut path = vec![to];
        while *path.last().unwrap() != from {
            path.push(prev[path.last().unwrap()]);
        }
        path.reverse();
        let mut h = Homography::identity();
        for w in path.windows(2) {
            let step = match self.edge(w[1], w[0]) {
                Some(s) => s,
                None => self.edge(w[0], w[1]).expect("adjacency implies an edge").inverse()?,
            };
            h = step.compose(&h)?;
        }
        Ok(h)
    }

    /// Pre-computes and caches the given pairs.
    pub fn prepopulate(&self, pairs: impl IntoIterator<Item = (usize, usize)>) -> Result<()> {
        for (a, b) in pairs {
            self.between(a, b)?;
        }
        Ok(())
    }

    /// Entries written to a cache file: direct, derived, then `extra` pairs
    /// not already known, in ascending key order within each group.
    pub fn export_entries(&self, extra: &[(usize, usize)]) -> Result<Vec<((usize, usize), Homography)>> {
        let mut out: Vec<_> = self.direct.iter().chain(self.derived.iter()).map(|(&k, &h)| (k, h)).collect();
        for &(a, b) in extra {
            if a != b && self.edge(a, b).is_none() && !out.iter().any(|(k, _)| *k == (a, b)) {
                out.push(((a, b), self.between(a, b)?));
            }
        }
        Ok(out)
    }
}

impl HomographySource for HomographyGraph {
    fn between(&self, a: usize, b: usize) -> Result<Homography> {
        HomographyGraph::between(self, a, b)
    }
}

fn estimate_interval(
    k1: usize,
    k2: usize,
    params: &FheParams,
    provider: &dyn CorrespondenceProvider,
) -> Result<IntervalResult> {
    let wrap = |a: usize, b: usize| move |e: Error| Error::PairEstimation { a, b, source: Box::new(e) };
    let corr_k2_k1 = provider.correspondences(k1, k2).map_err(wrap(k2, k1))?;
    let ransac = RansacParams { seed: seed::mix(params.ransac.seed, &[k1 as u64, k2 as u64]), ..params.ransac };
    let direct =
        estimate_homography_ransac_with(&corr_k2_k1, &ransac, Execution::Sequential).map_err(wrap(k2, k1))?.homography;
    let mut derived = Vec::with_capacity(k2 - k1 - 1);
    for t in k1 + 1..k2 {
        let corr_t_k1 = provider.correspondences(k1, t).map_err(wrap(t, k1))?;
        let (h, alpha) = match interpolation_ratios(&corr_t_k1, &corr_k2_k1).map_err(wrap(t, k1))? {
            (Some(a1), Some(a2)) => {
                let alpha = AlphaPair { alpha1: a1, alpha2: a2 };
                (derive_within_interval(&direct, alpha, params.mode).map_err(wrap(t, k1))?, alpha)
            }
            // Motion along one axis only, or the other axis is within noise: the
            // moving axis carries the ratio.
            (Some(a), None) | (None, Some(a)) => {
                let alpha = AlphaPair { alpha1: a, alpha2: a };
                (derive_within_interval(&direct, alpha, params.mode).map_err(wrap(t, k1))?, alpha)
            }
            // Static camera between keyframes.
            (None, None) => (Homography::identity(), AlphaPair::ZERO),
        };
        derived.push((t, alpha, h));
    }
    Ok(IntervalResult { k1, k2, direct, derived })
}

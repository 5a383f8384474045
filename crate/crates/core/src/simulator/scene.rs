use std::collections::BTreeMap;

use nalgebra::{Rotation2, Vector2};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson, StandardNormal};

use super::{plane_homography, CameraPose, ScenarioConfig};
use crate::association::Detection;
use crate::error::{Error, Result};
use crate::fhe::{CorrespondenceProvider, HomographyGraph};
use crate::geometry::{BBox, CorrespondenceSet, Homography, Point2};
use crate::seed;

const STREAM_OBJECTS: u64 = 1;
const STREAM_DETECTIONS: u64 = 2;
const STREAM_LATENTS: u64 = 3;
const STREAM_CORR: u64 = 4;
const STREAM_MOTION: u64 = 5;

/// Ground-truth box of one visible object.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GtBox {
    pub track_id: u64,
    pub bbox: BBox,
    pub class_id: i32,
}

#[derive(Debug, Clone)]
pub struct SequenceBundle {
    pub config: ScenarioConfig,
    /// `poses[t - 1]` for frame `t`.
    pub poses: Vec<CameraPose>,
    pub gt: BTreeMap<usize, Vec<GtBox>>,
    pub detections: BTreeMap<usize, Vec<Detection>>,
    /// Object behind each detection, `None` for false positives.
    pub det_sources: BTreeMap<usize, Vec<Option<u64>>>,
    /// `((t, t + 1), H_{t,t+1})`.
    pub gt_homographies: Vec<((usize, usize), Homography)>,
    pub correspondences: BTreeMap<(usize, usize), CorrespondenceSet>,
}

impl SequenceBundle {
    pub fn frame_count(&self) -> usize {
        self.poses.len()
    }

    pub fn pose(&self, t: usize) -> &CameraPose {
        &self.poses[t - 1]
    }

    /// Exact `H_{a,b}` from the camera poses.
    pub fn gt_between(&self, a: usize, b: usize) -> Result<Homography> {
        plane_homography(self.pose(b), self.pose(a))
    }

    pub fn gt_graph(&self) -> Result<HomographyGraph> {
        HomographyGraph::from_pairs(self.frame_count(), self.gt_homographies.iter().copied())
    }

    /// On-demand generator for any frame pair, consistent with the
    /// materialized `correspondences`.
    pub fn correspondence_provider(&self) -> SimCorrespondences {
        SimCorrespondences::new(&self.config, self.poses.clone())
    }
}

/// Correspondences sampled from the true scene geometry. Each pair draws
/// from its own seeded stream, so sets do not depend on query order.
#[derive(Debug, Clone)]
pub struct SimCorrespondences {
    poses: Vec<CameraPose>,
    count: usize,
    outlier_rate: f64,
    noise_sigma: f64,
    width: f64,
    height: f64,
    seed: u64,
}

impl SimCorrespondences {
    pub fn new(cfg: &ScenarioConfig, poses: Vec<CameraPose>) -> Self {
        Self {
            poses,
            count: cfg.correspondence_count,
            outlier_rate: cfg.correspondence_outlier_rate,
            noise_sigma: cfg.correspondence_noise_sigma,
            width: cfg.frame_width,
            height: cfg.frame_height,
            seed: cfg.seed,
        }
    }

    fn inside(&self, p: Point2) -> bool {
        p.is_finite() && (0.0..=self.width).contains(&p.x) && (0.0..=self.height).contains(&p.y)
    }

    pub fn materialize(&self, pairs: &[(usize, usize)]) -> Result<BTreeMap<(usize, usize), CorrespondenceSet>> {
        pairs.iter().map(|&(s, d)| Ok(((s, d), self.correspondences(s, d)?))).collect()
    }
}

impl CorrespondenceProvider for SimCorrespondences {
    fn correspondences(&self, src: usize, dst: usize) -> Result<CorrespondenceSet> {
        let n = self.poses.len();
        for f in [src, dst] {
            if f < 1 || f > n {
                return Err(Error::FrameOutOfRange { frame: f, frame_count: n });
            }
        }
        let (a, b) = (&self.poses[src - 1], &self.poses[dst - 1]);
        let h = plane_homography(a, b)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed::mix(self.seed, &[STREAM_CORR, src as u64, dst as u64]));
        let noise = Normal::new(0.0, self.noise_sigma.max(0.0)).expect("sigma >= 0");
        let mut pairs = Vec::with_capacity(self.count);
        let max_attempts = 50 * self.count;
        for _ in 0..max_attempts {
            if pairs.len() == self.count {
                break;
            }
            let p = Point2::new(rng.random_range(0.0..self.width), rng.random_range(0.0..self.height));
            let Ok(q) = h.project(p) else { continue };
            if !self.inside(q) {
                continue;
            }
            let q = if rng.random::<f64>() < self.outlier_rate {
                Point2::new(rng.random_range(0.0..self.width), rng.random_range(0.0..self.height))
            } else if self.noise_sigma > 0.0 {
                Point2::new(q.x + noise.sample(&mut rng), q.y + noise.sample(&mut rng))
            } else {
                q
            };
            pairs.push((p, q));
        }
        Ok(CorrespondenceSet::new(src, dst, pairs))
    }
}

#[derive(Debug, Clone)]
struct Object {
    id: u64,
    class_id: i32,
    spawn_frame: usize,
    origin: Vector2<f64>,
    velocity: Vector2<f64>,
    heading: f64,
    half_extent: Vector2<f64>,
    latent: Vec<f64>,
}

impl Object {
    fn ground_corners(&self, t: usize, jitter: Vector2<f64>) -> [Vector2<f64>; 4] {
        let c = self.origin + self.velocity * (t as f64 - self.spawn_frame as f64) + jitter;
        let r = Rotation2::new(self.heading);
        let (hx, hy) = (self.half_extent.x, self.half_extent.y);
        [(-hx, -hy), (hx, -hy), (hx, hy), (-hx, hy)].map(|(x, y)| c + r * Vector2::new(x, y))
    }
}

fn unit_gaussian(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    let mut v: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
    normalize(&mut v);
    v
}

fn normalize(v: &mut [f64]) {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if n > 0.0 {
        v.iter_mut().for_each(|x| *x /= n);
    }
}

fn wrap_angle(a: f64) -> f64 {
    let tau = std::f64::consts::TAU;
    let r = a.rem_euclid(tau);
    if r > std::f64::consts::PI {
        r - tau
    } else {
        r
    }
}

fn spawn_objects(cfg: &ScenarioConfig, poses: &[CameraPose]) -> Result<Vec<Object>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed::mix(cfg.seed, &[STREAM_OBJECTS]));
    let mut latent_rng = ChaCha8Rng::seed_from_u64(seed::mix(cfg.seed, &[STREAM_LATENTS]));
    let (px, py) = cfg.pivot();
    let margin = 40.0;
    let panning = matches!(cfg.scenario, super::Scenario::Linear | super::Scenario::Mixed);
    let mut objects = Vec::with_capacity(cfg.objects);
    for i in 0..cfg.objects {
        let spawn_frame = if panning { rng.random_range(1..=cfg.frames) } else { 1 };
        let pose = &poses[spawn_frame - 1];
        let mut image = Point2::new(px, py);
        for _ in 0..100 {
            image = if panning {
                Point2::new(
                    rng.random_range(margin..cfg.frame_width - margin),
                    rng.random_range(margin..cfg.frame_height - margin),
                )
            } else {
                let (r0, r1) = (cfg.spawn_radius_min, cfg.spawn_radius_max);
                let r = (r0 * r0 + rng.random::<f64>() * (r1 * r1 - r0 * r0)).sqrt();
                let a = rng.random_range(0.0..std::f64::consts::TAU);
                Point2::new(px + r * a.cos(), py + r * a.sin())
            };
            let inside = (margin..cfg.frame_width - margin).contains(&image.x)
                && (margin..cfg.frame_height - margin).contains(&image.y);
            if inside {
                break;
            }
        }
        let (gx, gy) = pose.image_to_ground(image)?;
        let truck = rng.random::<f64>() < 0.25;
        let (class_id, half_extent) = if truck { (2, Vector2::new(3.5, 1.3)) } else { (1, Vector2::new(2.25, 1.0)) };
        let heading = rng.random_range(0.0..std::f64::consts::TAU);
        let speed = cfg.object_speed * rng.random_range(0.5..1.0);
        objects.push(Object {
            id: i as u64 + 1,
            class_id,
            spawn_frame,
            origin: Vector2::new(gx, gy),
            velocity: Rotation2::new(heading) * Vector2::new(speed, 0.0),
            heading,
            half_extent,
            latent: unit_gaussian(&mut latent_rng, cfg.embedding_dim),
        });
    }
    Ok(objects)
}

fn aabb(points: &[Point2]) -> Result<BBox> {
    BBox::enclosing(points)
}

/// Generates a full sequence; deterministic in `cfg`.
pub fn generate_sequence(cfg: &ScenarioConfig) -> Result<SequenceBundle> {
    cfg.validate()?;
    let poses: Vec<CameraPose> = (1..=cfg.frames).map(|t| cfg.pose(t)).collect();
    for p in &poses {
        p.ground_to_image()?;
    }
    let objects = spawn_objects(cfg, &poses)?;
    let (w, h) = (cfg.frame_width, cfg.frame_height);
    let corner_noise = Normal::new(0.0, cfg.det_noise_sigma).map_err(|e| Error::InvalidConfig(e.to_string()))?;
    let motion_noise = Normal::new(0.0, cfg.motion_noise).map_err(|e| Error::InvalidConfig(e.to_string()))?;
    let fp_count = if cfg.false_positive_rate > 0.0 {
        Some(Poisson::new(cfg.false_positive_rate).map_err(|e| Error::InvalidConfig(e.to_string()))?)
    } else {
        None
    };
    let emb_scale = 1.0 / (cfg.embedding_dim as f64).sqrt();

    let mut gt = BTreeMap::new();
    let mut detections = BTreeMap::new();
    let mut det_sources = BTreeMap::new();
    for t in 1..=cfg.frames {
        let pose = &poses[t - 1];
        let mut motion_rng = ChaCha8Rng::seed_from_u64(seed::mix(cfg.seed, &[STREAM_MOTION, t as u64]));
        let mut rng = ChaCha8Rng::seed_from_u64(seed::mix(cfg.seed, &[STREAM_DETECTIONS, t as u64]));
        let view = wrap_angle(pose.yaw - poses[0].yaw).abs() / std::f64::consts::PI;
        let emb_sigma = cfg.embedding_view_noise * (1.0 + view);
        let mut frame_gt = Vec::new();
        let mut frame_dets: Vec<(Detection, Option<u64>)> = Vec::new();
        for obj in &objects {
            let jitter = Vector2::new(motion_noise.sample(&mut motion_rng), motion_noise.sample(&mut motion_rng));
            let corners: Vec<Point2> =
                obj.ground_corners(t, jitter).iter().map(|g| pose.project_ground(g.x, g.y)).collect::<Result<_>>()?;
            let bbox = aabb(&corners)?;
            // Every stream advances identically whether or not the object is visible.
            let dropped = rng.random::<f64>() < cfg.det_dropout;
            let noisy: Vec<Point2> = corners
                .iter()
                .map(|p| Point2::new(p.x + corner_noise.sample(&mut rng), p.y + corner_noise.sample(&mut rng)))
                .collect();
            let confidence = rng.random_range(0.6..=1.0);
            let mut emb = obj.latent.clone();
            for e in emb.iter_mut() {
                *e += emb_sigma * emb_scale * rng.sample::<f64, _>(StandardNormal);
            }
            let visible = bbox.left >= 0.0 && bbox.top >= 0.0 && bbox.right() <= w && bbox.bottom() <= h;
            if !visible {
                continue;
            }
            frame_gt.push(GtBox { track_id: obj.id, bbox, class_id: obj.class_id });
            if dropped {
                continue;
            }
            normalize(&mut emb);
            let det_box = if cfg.det_noise_sigma > 0.0 { aabb(&noisy)? } else { bbox };
            frame_dets.push((
                Detection { frame: t, bbox: det_box, confidence, class_id: obj.class_id, embedding: Some(emb) },
                Some(obj.id),
            ));
        }
        let n_fp = fp_count.map(|p| p.sample(&mut rng) as usize).unwrap_or(0);
        for _ in 0..n_fp {
            let (bw, bh) = (rng.random_range(15.0..60.0), rng.random_range(15.0..60.0));
            let bbox = BBox::new(rng.random_range(0.0..w - bw), rng.random_range(0.0..h - bh), bw, bh)?;
            let class_id = if rng.random::<f64>() < 0.25 { 2 } else { 1 };
            let det = Detection {
                frame: t,
                bbox,
                confidence: rng.random_range(0.3..0.7),
                class_id,
                embedding: Some(unit_gaussian(&mut rng, cfg.embedding_dim)),
            };
            frame_dets.push((det, None));
        }
        frame_dets.shuffle(&mut rng);
        let (dets, sources): (Vec<_>, Vec<_>) = frame_dets.into_iter().unzip();
        gt.insert(t, frame_gt);
        detections.insert(t, dets);
        det_sources.insert(t, sources);
    }

    let gt_homographies = (1..cfg.frames)
        .map(|t| Ok(((t, t + 1), plane_homography(&poses[t], &poses[t - 1])?)))
        .collect::<Result<Vec<_>>>()?;
    let provider = SimCorrespondences::new(cfg, poses.clone());
    let correspondences = provider.materialize(&cfg.required_pairs()?)?;
    Ok(SequenceBundle { config: cfg.clone(), poses, gt, detections, det_sources, gt_homographies, correspondences })
}

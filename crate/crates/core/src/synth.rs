//! Synthetic scenes, a point-threshold pseudo-detector, and the corruption
//! sweep that ties them to evaluation.
//!
//! Scenes live in the sensor frame: the LiDAR sits at the origin, the ground
//! plane is at `ground_z`. Persons are cuboids whose sensor-facing side faces
//! receive Poisson-distributed surface points with mean `points_scale / d²`.
//! Thin axis-aligned occluder walls and the other persons shadow points;
//! the fraction of an unshadowed probe grid sets the occlusion label
//! (> 0.9 fully visible, > 0.5 mostly visible, > 0.1 severely occluded,
//! else fully occluded).

use std::collections::BTreeMap;
use std::f64::consts::{FRAC_PI_2, PI};

use rand::distr::weighted::WeightedIndex;
use rand::Rng as _;
use rand_distr::{Distribution, Poisson, StandardNormal};
use rayon::prelude::*;

use crate::corrupt::{resolve, CorruptionError};
use crate::eval::{evaluate, filter_ground_truth, EvalConfig, EvalReport, FrameGt, StrataMode, StratumResult};
use crate::geom::{bev_intersection_area, points_in_box, segment_box_entry};
use crate::model::{
    Box3D, Calibration, CameraImage, CorruptionSpec, Dataset, Detection, FrameSample, GroundTruth,
    Occlusion, Point3, PointCloud, Sequence,
};
use crate::seed::{derive_frame_seed, derive_stream_seed, rng_from_seed, Rng, SeedPolicy};

/// Inset of surface points and probes from the box faces, meters.
const SURFACE_INSET: f64 = 0.01;
const PLACEMENT_TRIES: usize = 200;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SynthError {
    #[error("invalid scene parameters: {0}")]
    InvalidParams(String),
    #[error("a sequence needs at least one frame")]
    NoFrames,
}

/// A person with a fixed start pose and constant velocity.
#[derive(Debug, Clone, PartialEq)]
pub struct PersonTrack {
    /// Ground-plane position at frame 0.
    pub start: [f64; 2],
    /// (l, w, h).
    pub dims: [f64; 3],
    pub yaw: f64,
    /// m/s in the ground plane.
    pub velocity: [f64; 2],
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneParams {
    /// Inclusive range of persons per scene.
    pub person_count: (usize, usize),
    /// Positions are uniform over `[-extent, extent]²`.
    pub extent_m: f64,
    /// No person center closer to the sensor than this.
    pub min_range_m: f64,
    pub dims_mean: [f64; 3],
    /// Uniform jitter half-width per dimension.
    pub dims_jitter: [f64; 3],
    pub ground_z: f64,
    /// Expected surface points of a person at 1 m.
    pub points_scale: f64,
    pub max_points_per_person: f64,
    pub clutter_points: usize,
    /// Inclusive range of occluder walls per scene.
    pub occluder_count: (usize, usize),
    /// Ground range of occluder centers.
    pub occluder_range_m: (f64, f64),
    pub occluder_length_m: (f64, f64),
    pub occluder_height_m: (f64, f64),
    pub occluder_thickness_m: f64,
    pub max_speed_mps: f64,
    /// Seconds between frames.
    pub frame_dt: f64,
    /// Probes per face side for the visibility estimate.
    pub visibility_grid: usize,
    pub camera_count: usize,
    pub image_width: usize,
    pub image_height: usize,
    /// Replaces the random persons.
    pub fixed_persons: Option<Vec<PersonTrack>>,
    /// Replaces the random occluders.
    pub fixed_occluders: Option<Vec<Box3D>>,
}

impl Default for SceneParams {
    fn default() -> Self {
        Self {
            person_count: (5, 15),
            extent_m: 25.0,
            min_range_m: 0.8,
            dims_mean: [0.6, 0.6, 1.7],
            dims_jitter: [0.1, 0.1, 0.15],
            ground_z: -0.7,
            points_scale: 5000.0,
            max_points_per_person: 4000.0,
            clutter_points: 2000,
            occluder_count: (1, 3),
            occluder_range_m: (2.0, 15.0),
            occluder_length_m: (1.0, 4.0),
            occluder_height_m: (0.8, 2.5),
            occluder_thickness_m: 0.05,
            max_speed_mps: 1.5,
            frame_dt: 0.1,
            visibility_grid: 6,
            camera_count: 5,
            image_width: 48,
            image_height: 32,
            fixed_persons: None,
            fixed_occluders: None,
        }
    }
}

impl SceneParams {
    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: &str| Err(SynthError::InvalidParams(m.to_string()));
        let finite_pos = |v: f64| v.is_finite() && v > 0.0;
        let non_neg = |v: f64| v.is_finite() && v >= 0.0;
        if self.person_count.0 > self.person_count.1 {
            return bad("person_count min exceeds max");
        }
        if !finite_pos(self.extent_m) || !non_neg(self.min_range_m) {
            return bad("extent must be positive and min_range non-negative");
        }
        if self.min_range_m >= self.extent_m * std::f64::consts::SQRT_2 {
            return bad("min_range leaves no area for persons");
        }
        for k in 0..3 {
            if !finite_pos(self.dims_mean[k] - self.dims_jitter[k]) || !non_neg(self.dims_jitter[k]) {
                return bad("person dimensions must stay positive");
            }
        }
        if !non_neg(self.points_scale) || !non_neg(self.max_points_per_person) {
            return bad("point scales must be non-negative");
        }
        if self.occluder_count.0 > self.occluder_count.1 {
            return bad("occluder_count min exceeds max");
        }
        let range_ok = |(a, b): (f64, f64)| a.is_finite() && b.is_finite() && 0.0 <= a && a <= b;
        if !range_ok(self.occluder_range_m)
            || !range_ok(self.occluder_length_m)
            || !range_ok(self.occluder_height_m)
            || self.occluder_length_m.0 <= 0.0
            || self.occluder_height_m.0 <= 0.0
            || !finite_pos(self.occluder_thickness_m)
        {
            return bad("occluder ranges must be positive and ordered");
        }
        if !non_neg(self.max_speed_mps) || !finite_pos(self.frame_dt) {
            return bad("speed must be non-negative and frame_dt positive");
        }
        if self.visibility_grid == 0 || self.image_width == 0 || self.image_height == 0 {
            return bad("grid and image sizes must be positive");
        }
        if let Some(tracks) = &self.fixed_persons {
            if tracks.iter().any(|t| t.dims.iter().any(|d| !finite_pos(*d))) {
                return bad("fixed person dimensions must be positive");
            }
        }
        Ok(())
    }
}

/// Static part of a sequence: tracks, walls, camera textures.
#[derive(Debug, Clone)]
struct Layout {
    tracks: Vec<PersonTrack>,
    occluders: Vec<Box3D>,
    camera_phase: Vec<f64>,
}

fn uniform(rng: &mut Rng, (lo, hi): (f64, f64)) -> f64 {
    if hi > lo {
        rng.random_range(lo..hi)
    } else {
        lo
    }
}

fn person_box(params: &SceneParams, center: [f64; 2], dims: [f64; 3], yaw: f64) -> Box3D {
    Box3D::new([center[0], center[1], params.ground_z + dims[2] / 2.0], dims, yaw)
}

fn sample_layout(params: &SceneParams, rng: &mut Rng) -> Layout {
    let occluders = match &params.fixed_occluders {
        Some(o) => o.clone(),
        None => {
            let n = rng.random_range(params.occluder_count.0..=params.occluder_count.1);
            (0..n)
                .map(|_| {
                    let r = uniform(rng, params.occluder_range_m);
                    let a = rng.random_range(-PI..PI);
                    let len = uniform(rng, params.occluder_length_m);
                    let h = uniform(rng, params.occluder_height_m);
                    let yaw = if rng.random_bool(0.5) { 0.0 } else { FRAC_PI_2 };
                    Box3D::new(
                        [r * a.cos(), r * a.sin(), params.ground_z + h / 2.0],
                        [len, params.occluder_thickness_m, h],
                        yaw,
                    )
                })
                .collect()
        }
    };
    let tracks = match &params.fixed_persons {
        Some(t) => t.clone(),
        None => {
            let n = rng.random_range(params.person_count.0..=params.person_count.1);
            let e = params.extent_m;
            let mut placed: Vec<Box3D> = Vec::new();
            let mut tracks = Vec::with_capacity(n);
            for _ in 0..n {
                let dims: [f64; 3] = std::array::from_fn(|k| {
                    let j = params.dims_jitter[k];
                    params.dims_mean[k] + if j > 0.0 { rng.random_range(-j..j) } else { 0.0 }
                });
                let speed = params.max_speed_mps * rng.random::<f64>();
                let heading = rng.random_range(-PI..PI);
                let mut start = [0.0; 2];
                for _ in 0..PLACEMENT_TRIES {
                    start = [rng.random_range(-e..e), rng.random_range(-e..e)];
                    if start[0].hypot(start[1]) < params.min_range_m {
                        continue;
                    }
                    let b = person_box(params, start, dims, heading);
                    let clear = placed
                        .iter()
                        .chain(&occluders)
                        .all(|o| bev_intersection_area(&b, o) == 0.0);
                    if clear {
                        break;
                    }
                }
                placed.push(person_box(params, start, dims, heading));
                tracks.push(PersonTrack {
                    start,
                    dims,
                    yaw: heading,
                    velocity: [speed * heading.cos(), speed * heading.sin()],
                });
            }
            tracks
        }
    };
    let camera_phase = (0..params.camera_count)
        .map(|_| rng.random_range(0.0..2.0 * PI))
        .collect();
    Layout {
        tracks,
        occluders,
        camera_phase,
    }
}

/// Sensor-facing faces of a box: (axis, sign, outward normal, area).
fn visible_faces(b: &Box3D) -> Vec<(usize, f64, f64)> {
    let (s, c) = b.yaw.sin_cos();
    let half = [b.l / 2.0, b.w / 2.0, b.h / 2.0];
    let dims = [b.l, b.w, b.h];
    let mut faces = Vec::new();
    for axis in 0..3 {
        for sign in [1.0, -1.0] {
            let n = match axis {
                0 => [sign * c, sign * s, 0.0],
                1 => [-sign * s, sign * c, 0.0],
                _ => [0.0, 0.0, sign],
            };
            let center = [
                b.cx + n[0] * half[axis],
                b.cy + n[1] * half[axis],
                b.cz + n[2] * half[axis],
            ];
            let facing = n[0] * center[0] + n[1] * center[1] + n[2] * center[2];
            if facing < 0.0 {
                let area = dims[(axis + 1) % 3] * dims[(axis + 2) % 3];
                faces.push((axis, sign, area));
            }
        }
    }
    faces
}

/// World point on a face, from face coordinates `u, v ∈ [0, 1]`.
fn face_point(b: &Box3D, axis: usize, sign: f64, u: f64, v: f64) -> [f64; 3] {
    let half = [b.l / 2.0, b.w / 2.0, b.h / 2.0];
    let mut local = [0.0; 3];
    local[axis] = sign * (half[axis] - SURFACE_INSET.min(half[axis] / 2.0));
    for (k, t) in [((axis + 1) % 3, u), ((axis + 2) % 3, v)] {
        let inset = SURFACE_INSET.min(half[k] / 2.0);
        local[k] = (2.0 * t - 1.0) * (half[k] - inset);
    }
    let (s, c) = b.yaw.sin_cos();
    [
        b.cx + local[0] * c - local[1] * s,
        b.cy + local[0] * s + local[1] * c,
        b.cz + local[2],
    ]
}

fn shadowed(p: [f64; 3], blockers: &[&Box3D]) -> bool {
    blockers
        .iter()
        .any(|b| segment_box_entry(b, [0.0; 3], p).is_some())
}

pub fn occlusion_from_visibility(fraction: f64) -> Occlusion {
    if fraction > 0.9 {
        Occlusion::FullyVisible
    } else if fraction > 0.5 {
        Occlusion::MostlyVisible
    } else if fraction > 0.1 {
        Occlusion::SeverelyOccluded
    } else {
        Occlusion::FullyOccluded
    }
}

fn render_image(params: &SceneParams, camera: usize, phase: f64, t: f64) -> CameraImage {
    let (w, h) = (params.image_width, params.image_height);
    let mut pixels = Vec::with_capacity(w * h * 3);
    for y in 0..h {
        for x in 0..w {
            let u = x as f64 / w as f64;
            let v = y as f64 / h as f64;
            let wave = (6.0 * u + 4.0 * v + phase + 0.5 * t).sin();
            pixels.push((0.5 + 0.3 * wave) as f32);
            pixels.push((0.3 + 0.4 * v) as f32);
            pixels.push((0.5 + 0.2 * (9.0 * u - phase).cos()) as f32);
        }
    }
    CameraImage {
        camera_id: format!("cam{camera}"),
        width: w,
        height: h,
        pixels,
    }
}

/// Extrinsic of camera `i` of a ring looking outward every `360/n` degrees.
fn ring_calibration(i: usize, n: usize) -> Calibration {
    let theta = -(i as f64) * 2.0 * PI / n as f64;
    let (s, c) = theta.sin_cos();
    let rz = [[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]];
    // sensor (x forward, y left, z up) to camera (x right, y down, z forward)
    let p = [[0.0, -1.0, 0.0], [0.0, 0.0, -1.0], [1.0, 0.0, 0.0]];
    let mut r = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            r[i][j] = (0..3).map(|k| p[i][k] * rz[k][j]).sum();
        }
    }
    Calibration {
        camera_id: format!("cam{i}"),
        rotation: r,
        translation: [0.0; 3],
    }
}

fn render_frame(
    params: &SceneParams,
    layout: &Layout,
    sequence_id: &str,
    index: usize,
    seed: u64,
) -> FrameSample {
    let mut rng = rng_from_seed(seed);
    let t = index as f64 * params.frame_dt;
    let boxes: Vec<Box3D> = layout
        .tracks
        .iter()
        .map(|tr| {
            let center = [tr.start[0] + tr.velocity[0] * t, tr.start[1] + tr.velocity[1] * t];
            person_box(params, center, tr.dims, tr.yaw)
        })
        .collect();
    let frame_id = format!("{sequence_id}_{index:06}");
    let g = params.visibility_grid;
    let mut points = Vec::new();
    let mut ground_truth = Vec::with_capacity(boxes.len());
    for (pi, b) in boxes.iter().enumerate() {
        let blockers: Vec<&Box3D> = boxes
            .iter()
            .enumerate()
            .filter(|(j, _)| *j != pi)
            .map(|(_, o)| o)
            .chain(&layout.occluders)
            .collect();
        let faces = visible_faces(b);
        let mut probes = 0usize;
        let mut clear = 0usize;
        for &(axis, sign, _) in &faces {
            for iu in 0..g {
                for iv in 0..g {
                    let u = (iu as f64 + 0.5) / g as f64;
                    let v = (iv as f64 + 0.5) / g as f64;
                    probes += 1;
                    if !shadowed(face_point(b, axis, sign, u, v), &blockers) {
                        clear += 1;
                    }
                }
            }
        }
        let visibility = if probes == 0 { 1.0 } else { clear as f64 / probes as f64 };
        let d = b.ground_range().max(params.min_range_m).max(1e-3);
        let lambda = (params.points_scale / (d * d)).min(params.max_points_per_person);
        let n = if lambda > 0.0 {
            Poisson::new(lambda).map_or(0.0, |p| p.sample(&mut rng)) as usize
        } else {
            0
        };
        if let Ok(pick) = WeightedIndex::new(faces.iter().map(|f| f.2)) {
            for _ in 0..n {
                let (axis, sign, _) = faces[pick.sample(&mut rng)];
                let (u, v) = (rng.random::<f64>(), rng.random::<f64>());
                let p = face_point(b, axis, sign, u, v);
                let intensity = rng.random_range(0.3f32..0.9);
                if !shadowed(p, &blockers) {
                    points.push(Point3::new(p[0] as f32, p[1] as f32, p[2] as f32).with_intensity(intensity));
                }
            }
        }
        ground_truth.push(GroundTruth {
            bbox: *b,
            occlusion: occlusion_from_visibility(visibility),
            track_id: format!("p{pi}"),
        });
    }
    let e = params.extent_m;
    for _ in 0..params.clutter_points {
        let x = rng.random_range(-e..e);
        let y = rng.random_range(-e..e);
        let z = params.ground_z - 0.02;
        let intensity = rng.random_range(0.0f32..0.3);
        points.push(Point3::new(x as f32, y as f32, z as f32).with_intensity(intensity));
    }
    let images = layout
        .camera_phase
        .iter()
        .enumerate()
        .map(|(i, &phase)| render_image(params, i, phase, t))
        .collect();
    let calibrations = (0..params.camera_count)
        .map(|i| ring_calibration(i, params.camera_count))
        .collect();
    FrameSample {
        frame_id: frame_id.clone(),
        sequence_id: sequence_id.to_string(),
        index_in_sequence: index,
        cloud: PointCloud::new(frame_id, points),
        images,
        calibrations,
        ground_truth,
    }
}

/// A sequence of `frames` frames with constant-velocity persons.
pub fn generate_sequence_with_id(
    sequence_id: &str,
    params: &SceneParams,
    frames: usize,
    seed: u64,
) -> Result<Vec<FrameSample>, SynthError> {
    params.validate()?;
    if frames == 0 {
        return Err(SynthError::NoFrames);
    }
    let layout = sample_layout(params, &mut rng_from_seed(derive_stream_seed(seed, "layout", 0)));
    Ok((0..frames)
        .into_par_iter()
        .map(|i| {
            let frame_seed = derive_stream_seed(seed, "frame", i as u64);
            render_frame(params, &layout, sequence_id, i, frame_seed)
        })
        .collect())
}

pub fn generate_sequence(
    params: &SceneParams,
    frames: usize,
    seed: u64,
) -> Result<Vec<FrameSample>, SynthError> {
    generate_sequence_with_id("seq000", params, frames, seed)
}

pub fn generate_scene(params: &SceneParams, seed: u64) -> Result<FrameSample, SynthError> {
    Ok(generate_sequence(params, 1, seed)?.remove(0))
}

/// `sequences` independent sequences named `seq000`, `seq001`, ...
pub fn generate_dataset(
    params: &SceneParams,
    sequences: usize,
    frames_per_sequence: usize,
    seed: u64,
) -> Result<Dataset, SynthError> {
    let seqs = (0..sequences)
        .map(|k| {
            let id = format!("seq{k:03}");
            let frames = generate_sequence_with_id(
                &id,
                params,
                frames_per_sequence,
                derive_stream_seed(seed, "sequence", k as u64),
            )?;
            Ok(Sequence {
                sequence_id: id,
                frames,
            })
        })
        .collect::<Result<_, SynthError>>()?;
    Ok(Dataset { sequences: seqs })
}

#[derive(Debug, Clone, PartialEq)]
pub struct PseudoDetectorParams {
    /// Minimum in-box points for a detection.
    pub min_points: usize,
    /// Standard deviation of the center jitter per axis, meters.
    pub jitter_sigma: f64,
    /// Score is `n / (n + score_half_points)`.
    pub score_half_points: f64,
    /// Probability of missing a detectable person.
    pub miss_prob: f64,
}

impl Default for PseudoDetectorParams {
    fn default() -> Self {
        Self {
            min_points: 15,
            jitter_sigma: 0.05,
            score_half_points: 20.0,
            miss_prob: 0.0,
        }
    }
}

impl PseudoDetectorParams {
    /// Detects everything with a point, exactly on the ground truth.
    pub fn perfect() -> Self {
        Self {
            min_points: 1,
            jitter_sigma: 0.0,
            ..Self::default()
        }
    }

    pub fn score(&self, n: usize) -> f64 {
        n as f64 / (n as f64 + self.score_half_points)
    }
}

/// One detection per ground truth whose box holds at least `min_points`
/// points of the frame's cloud. The same random draws are consumed per
/// ground truth whether or not it is detected, so corrupted and clean runs
/// of one frame share their jitter.
pub fn pseudo_detect(frame: &FrameSample, params: &PseudoDetectorParams, seed: u64) -> Vec<Detection> {
    let mut rng = rng_from_seed(seed);
    let mut out = Vec::new();
    for gt in &frame.ground_truth {
        let miss = rng.random::<f64>();
        let e: [f64; 3] = std::array::from_fn(|_| rng.sample(StandardNormal));
        let n = points_in_box(&frame.cloud, &gt.bbox);
        if n < params.min_points.max(1) || miss < params.miss_prob {
            continue;
        }
        let s = params.jitter_sigma;
        out.push(Detection {
            bbox: gt.bbox.translated(s * e[0], s * e[1], s * e[2]),
            score: params.score(n),
            frame_id: frame.frame_id.clone(),
        });
    }
    out
}

/// Detector seed of a frame; independent of the corruption applied.
pub fn detector_seed(policy: SeedPolicy, frame_id: &str) -> u64 {
    derive_stream_seed(policy.global_seed, &format!("detector/{frame_id}"), 0)
}

pub fn detect_frames(
    frames: &[FrameSample],
    params: &PseudoDetectorParams,
    policy: SeedPolicy,
) -> Vec<Vec<Detection>> {
    frames
        .par_iter()
        .map(|f| pseudo_detect(f, params, detector_seed(policy, &f.frame_id)))
        .collect()
}

pub fn clean_ground_truth(frames: &[FrameSample], cfg: &EvalConfig) -> Vec<FrameGt> {
    frames.par_iter().map(|f| filter_ground_truth(f, cfg)).collect()
}

/// Evaluates pseudo-detections on `corrupted` against the eligibility of
/// the clean frames. Both slices are aligned.
pub fn evaluate_cell(
    clean_gts: &[FrameGt],
    corrupted: &[FrameSample],
    det: &PseudoDetectorParams,
    cfg: &EvalConfig,
    mode: StrataMode,
    policy: SeedPolicy,
) -> Vec<StratumResult> {
    let dets = detect_frames(corrupted, det, policy);
    evaluate(clean_gts, &dets, cfg, mode)
}

/// Every `(kind, severity)` combination of `kinds`.
pub fn full_grid(kinds: &[crate::model::CorruptionKind]) -> Vec<CorruptionSpec> {
    kinds
        .iter()
        .flat_map(|&k| crate::model::Severity::ALL.map(|s| CorruptionSpec::new(k, s)))
        .collect()
}

fn corrupt_dataset(
    dataset: &Dataset,
    spec: &CorruptionSpec,
    policy: SeedPolicy,
) -> Result<Vec<FrameSample>, CorruptionError> {
    let resolved = resolve(spec)?;
    let mut out = Vec::with_capacity(dataset.frame_count());
    for seq in &dataset.sequences {
        let frames: Vec<FrameSample> = (0..seq.frames.len())
            .into_par_iter()
            .map(|i| {
                let seed = derive_frame_seed(policy, &seq.frames[i].frame_id, spec);
                resolved.apply(&seq.frames, i, seed)
            })
            .collect::<Result<_, _>>()?;
        out.extend(frames);
    }
    Ok(out)
}

/// Runs the pseudo-detector on the clean dataset and on every corrupted
/// copy in `grid`, producing a baseline block plus one block per cell.
pub fn run_degradation_experiment(
    dataset: &Dataset,
    grid: &[CorruptionSpec],
    det: &PseudoDetectorParams,
    cfg: &EvalConfig,
    mode: StrataMode,
    policy: SeedPolicy,
) -> Result<EvalReport, CorruptionError> {
    let clean: Vec<FrameSample> = dataset.frames().cloned().collect();
    let gts = clean_ground_truth(&clean, cfg);
    let baseline = evaluate_cell(&gts, &clean, det, cfg, mode, policy);
    let cells: Vec<Vec<StratumResult>> = grid
        .par_iter()
        .map(|spec| {
            let corrupted = corrupt_dataset(dataset, spec, policy)?;
            Ok(evaluate_cell(&gts, &corrupted, det, cfg, mode, policy))
        })
        .collect::<Result<_, CorruptionError>>()?;
    let mut report = EvalReport::new(cfg.iou_thresholds.clone());
    report.push_cell(None, None, &baseline);
    for (spec, rows) in grid.iter().zip(&cells) {
        report.push_cell(Some(spec.kind), Some(spec.severity), rows);
    }
    report.sort_rows();
    Ok(report)
}

/// Detections of a frame list keyed by frame id.
pub fn detections_by_frame(dets: Vec<Vec<Detection>>, frames: &[FrameSample]) -> BTreeMap<String, Vec<Detection>> {
    frames
        .iter()
        .zip(dets)
        .map(|(f, d)| (f.frame_id.clone(), d))
        .collect()
}

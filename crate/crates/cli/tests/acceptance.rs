//! Acceptance suite. Runs without the libtest harness so every criterion
//! prints exactly one PASS/FAIL line; the process exits non-zero if any
//! criterion fails.
//!
//! Oracles here are written independently of the library: containment,
//! nearest-seed grouping, azimuth filtering, Monte Carlo IoU and AP by
//! threshold enumeration are all recomputed from first principles.

use std::collections::BTreeMap;
use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_4, PI};
use std::fs;
use std::io::Write as _;
use std::panic::{self, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use pdbench_core::eval::{
    ap_from_scored, evaluate, filter_ground_truth, DistanceBin, EvalConfig, FrameGt, Interpolation,
    StrataMode, Stratum, StratumResult,
};
use pdbench_core::geom::{iou_3d, iou_bev};
use pdbench_core::lidar::{crosstalk, cutout, density_decrease, fov_loss, lidar_gaussian, plan_cutout};
use pdbench_core::misalign::spatial_misalign;
use pdbench_core::seed::{derive_stream_seed, rng_from_seed, Rng};
use pdbench_core::synth::{
    clean_ground_truth, detect_frames, full_grid, generate_dataset, run_degradation_experiment,
    PseudoDetectorParams, SceneParams,
};
use pdbench_core::{
    Box3D, Calibration, CorruptionKind, Detection, FrameSample, GroundTruth, Occlusion, Point3,
    PointCloud, SeedPolicy, Severity,
};
use rand::Rng as _;
use rayon::prelude::*;

type Check = Result<String, String>;
type Criterion = (&'static str, fn() -> Check);

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        let ok: bool = $cond;
        if !ok {
            return Err(format!($($fmt)+));
        }
    };
}

fn main() {
    let criteria: [Criterion; 7] = [
        ("corruption count contracts", count_contracts),
        ("noise statistics", noise_statistics),
        ("iou correctness", iou_correctness),
        ("ap oracle equivalence", ap_oracle),
        ("protocol boundaries", protocol_boundaries),
        ("end-to-end degradation trend", degradation_trend),
        ("cli determinism", cli_determinism),
    ];
    // A filter argument (as passed by `cargo test -- <filter>`) selects criteria.
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    let mut ran = 0;
    for (name, check) in criteria {
        if !filter.is_empty() && !filter.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        ran += 1;
        let start = Instant::now();
        let outcome = panic::catch_unwind(AssertUnwindSafe(check))
            .unwrap_or_else(|e| Err(format!("panicked: {}", panic_message(&e))));
        let secs = start.elapsed().as_secs_f64();
        let (tag, detail) = match outcome {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failed += 1;
                ("FAIL", d)
            }
        };
        let mut out = std::io::stdout().lock();
        writeln!(out, "{tag} {name} [{secs:.1} s] {detail}").unwrap();
    }
    println!("acceptance: {} of {ran} criteria passed", ran - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}

fn panic_message(e: &Box<dyn std::any::Any + Send>) -> String {
    e.downcast_ref::<String>()
        .cloned()
        .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
        .unwrap_or_else(|| "unknown panic".into())
}

// ---------------------------------------------------------------------------
// Count contracts

/// Clouds of 0 to ~3000 points with duplicates, axis-aligned points and
/// optional intensity.
fn fuzz_cloud(rng: &mut Rng, id: usize) -> PointCloud {
    let n = if rng.random_bool(0.1) {
        rng.random_range(0..60)
    } else {
        rng.random_range(60..3000)
    };
    let with_intensity = rng.random_bool(0.5);
    let mut points: Vec<Point3> = Vec::with_capacity(n);
    for _ in 0..n {
        let p = match rng.random_range(0..10) {
            0 if !points.is_empty() => points[rng.random_range(0..points.len())],
            1 => Point3::new(rng.random_range(-40.0..40.0), 0.0, rng.random_range(-3.0..3.0)),
            _ => Point3::new(
                rng.random_range(-40.0..40.0),
                rng.random_range(-40.0..40.0),
                rng.random_range(-3.0..3.0),
            ),
        };
        let p = if with_intensity {
            p.with_intensity(rng.random_range(0.0..1.0))
        } else {
            Point3 { intensity: None, ..p }
        };
        points.push(p);
    }
    PointCloud::new(format!("fuzz{id}"), points)
}

/// `round(num/den * n)` with halves away from zero, in exact integers.
fn round_ratio(num: usize, den: usize, n: usize) -> usize {
    (2 * num * n + den) / (2 * den)
}

fn is_subsequence(sub: &PointCloud, of: &PointCloud) -> bool {
    let mut it = of.points.iter();
    sub.points.iter().all(|p| it.any(|q| q.bit_eq(p)))
}

fn oracle_azimuth_deg(p: &Point3) -> f64 {
    (p.y as f64).atan2(p.x as f64) * 180.0 / PI
}

/// Nearest seed by squared Euclidean distance, ties to the earlier seed.
fn oracle_groups(cloud: &PointCloud, seeds: &[usize]) -> Vec<usize> {
    cloud
        .points
        .iter()
        .map(|p| {
            let d = |s: &Point3| {
                let v = [
                    p.x as f64 - s.x as f64,
                    p.y as f64 - s.y as f64,
                    p.z as f64 - s.z as f64,
                ];
                v[0] * v[0] + v[1] * v[1] + v[2] * v[2]
            };
            let mut best = 0;
            for g in 1..seeds.len() {
                if d(&cloud.points[seeds[g]]) < d(&cloud.points[seeds[best]]) {
                    best = g;
                }
            }
            best
        })
        .collect()
}

fn check_cloud(case: usize) -> Result<(), String> {
    let mut rng = rng_from_seed(derive_stream_seed(1, "count-contracts", case as u64));
    let c = fuzz_cloud(&mut rng, case);
    let n = c.len();
    let density_pct = [6, 18, 30];
    let crosstalk_per_mille = [4, 12, 20];
    let cutout_k = [2, 5, 10];
    let fov = [(-105.0, 105.0), (-75.0, 75.0), (-45.0, 45.0)];
    for sev in Severity::ALL {
        let i = sev.index();
        let seed: u64 = rng.random();

        let out = density_decrease(&c, sev, seed);
        let removed = round_ratio(density_pct[i], 100, n);
        ensure!(
            out.len() == n - removed,
            "density_decrease {sev:?} on N={n}: kept {} expected {}",
            out.len(),
            n - removed
        );
        ensure!(is_subsequence(&out, &c), "density_decrease {sev:?} output is not a subsequence");

        let out = crosstalk(&c, sev, seed);
        ensure!(out.len() == n, "crosstalk changed the point count");
        let moved = c
            .points
            .iter()
            .zip(&out.points)
            .filter(|(a, b)| !a.bit_eq(b))
            .count();
        let expected = round_ratio(crosstalk_per_mille[i], 1000, n);
        ensure!(
            moved == expected,
            "crosstalk {sev:?} on N={n}: {moved} points differ, expected {expected}"
        );

        let k = cutout_k[i];
        let plan = plan_cutout(&c, 50, k, seed);
        let expected_groups = n.min(50);
        ensure!(plan.seed_indices.len() == expected_groups, "cutout used {} groups", plan.seed_indices.len());
        let mut dropped = plan.dropped_groups.clone();
        dropped.sort_unstable();
        dropped.dedup();
        ensure!(
            dropped.len() == k.min(expected_groups) && dropped.iter().all(|&g| g < expected_groups),
            "cutout {sev:?} dropped groups {:?}",
            plan.dropped_groups
        );
        let groups = oracle_groups(&c, &plan.seed_indices);
        let kept: Vec<Point3> = c
            .points
            .iter()
            .zip(&groups)
            .filter(|(_, g)| !dropped.contains(g))
            .map(|(p, _)| *p)
            .collect();
        let out = cutout(&c, sev, seed);
        ensure!(
            out.len() == kept.len() && out.points.iter().zip(&kept).all(|(a, b)| a.bit_eq(b)),
            "cutout {sev:?} on N={n}: kept {} expected {}",
            out.len(),
            kept.len()
        );

        let (lo, hi) = fov[i];
        let out = fov_loss(&c, sev);
        let outside = out
            .points
            .iter()
            .filter(|p| {
                let a = oracle_azimuth_deg(p);
                a < lo || a > hi
            })
            .count();
        ensure!(outside == 0, "fov_loss {sev:?}: {outside} points outside [{lo}, {hi}]");
        let inside = c
            .points
            .iter()
            .filter(|p| (lo..=hi).contains(&oracle_azimuth_deg(p)))
            .count();
        ensure!(
            out.len() == inside && is_subsequence(&out, &c),
            "fov_loss {sev:?}: kept {} of {inside} in-range points",
            out.len()
        );
    }
    Ok(())
}

fn count_contracts() -> Check {
    let start = Instant::now();
    let clouds = 1000;
    let failures: Vec<String> = (0..clouds)
        .into_par_iter()
        .filter_map(|i| check_cloud(i).err().map(|e| format!("cloud {i}: {e}")))
        .collect();
    let elapsed = start.elapsed();
    ensure!(failures.is_empty(), "{} clouds violated a contract, first: {}", failures.len(), failures[0]);
    ensure!(elapsed < Duration::from_secs(60), "took {elapsed:?}, limit 60 s");
    Ok(format!(
        "{clouds} clouds x 3 severities x 4 subset/count corruptions exact; {:.1} s < 60 s",
        elapsed.as_secs_f64()
    ))
}

// ---------------------------------------------------------------------------
// Noise statistics

fn std_dev(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n).sqrt()
}

fn within_5pct(measured: f64, target: f64) -> bool {
    (measured - target).abs() <= 0.05 * target
}

fn noise_statistics() -> Check {
    let mut notes = Vec::new();
    let mut rng = rng_from_seed(2);
    let points: Vec<Point3> = (0..100_000)
        .map(|_| {
            Point3::new(
                rng.random_range(-20.0..20.0),
                rng.random_range(-20.0..20.0),
                rng.random_range(-2.0..2.0),
            )
        })
        .collect();
    let cloud = PointCloud::new("noise", points);
    for (sev, sigma) in Severity::ALL.into_iter().zip([0.02, 0.06, 0.10]) {
        let out = lidar_gaussian(&cloud, sev, 1000 + sev.index() as u64);
        ensure!(out.len() == cloud.len(), "lidar_gaussian changed the point count");
        let mut axes = [Vec::new(), Vec::new(), Vec::new()];
        for (a, b) in cloud.points.iter().zip(&out.points) {
            axes[0].push(b.x as f64 - a.x as f64);
            axes[1].push(b.y as f64 - a.y as f64);
            axes[2].push(b.z as f64 - a.z as f64);
        }
        for (axis, d) in ["x", "y", "z"].iter().zip(&axes) {
            let s = std_dev(d);
            ensure!(within_5pct(s, sigma), "lidar_gaussian {sev:?} {axis}: std {s:.5} vs {sigma}");
        }
        notes.push(format!("lidar {sigma}"));
    }

    let base = Calibration::identity("cam0");
    let trials = 10_000u64;
    for (sev, (rs, ts)) in Severity::ALL
        .into_iter()
        .zip([(0.02, 0.002), (0.06, 0.006), (0.10, 0.010)])
    {
        let mut rot = Vec::with_capacity(9 * trials as usize);
        let mut tr = Vec::with_capacity(3 * trials as usize);
        for t in 0..trials {
            let c = spatial_misalign(&base, sev, derive_stream_seed(3, "misalign-trial", t));
            for r in 0..3 {
                for col in 0..3 {
                    rot.push(c.rotation[r][col] - base.rotation[r][col]);
                }
                tr.push(c.translation[r] - base.translation[r]);
            }
        }
        let (sr, st) = (std_dev(&rot), std_dev(&tr));
        ensure!(within_5pct(sr, rs), "spatial_misalign {sev:?} rotation std {sr:.5} vs {rs}");
        ensure!(within_5pct(st, ts), "spatial_misalign {sev:?} translation std {st:.6} vs {ts}");
        notes.push(format!("misalign {rs}/{ts}"));
    }
    Ok(format!("all within 5%: {}", notes.join(", ")))
}

// ---------------------------------------------------------------------------
// IoU

/// World point to box-local coordinates.
fn local(b: &Box3D, p: [f64; 3]) -> [f64; 3] {
    let (s, c) = b.yaw.sin_cos();
    let dx = p[0] - b.cx;
    let dy = p[1] - b.cy;
    [c * dx + s * dy, -s * dx + c * dy, p[2] - b.cz]
}

fn inside(b: &Box3D, p: [f64; 3]) -> bool {
    let q = local(b, p);
    q[0].abs() <= b.l / 2.0 && q[1].abs() <= b.w / 2.0 && q[2].abs() <= b.h / 2.0
}

/// IoU estimate from `samples` uniform draws inside `a`.
fn monte_carlo_iou(a: &Box3D, b: &Box3D, samples: usize, rng: &mut Rng) -> f64 {
    let (s, c) = a.yaw.sin_cos();
    let mut hits = 0usize;
    for _ in 0..samples {
        let u = rng.random_range(-0.5..0.5) * a.l;
        let v = rng.random_range(-0.5..0.5) * a.w;
        let z = rng.random_range(-0.5..0.5) * a.h;
        let p = [a.cx + c * u - s * v, a.cy + s * u + c * v, a.cz + z];
        hits += inside(b, p) as usize;
    }
    let inter = hits as f64 / samples as f64 * a.volume();
    inter / (a.volume() + b.volume() - inter)
}

fn random_box(rng: &mut Rng) -> Box3D {
    Box3D::new(
        [rng.random_range(-20.0..20.0), rng.random_range(-20.0..20.0), rng.random_range(-1.0..1.0)],
        [rng.random_range(0.2..3.0), rng.random_range(0.2..3.0), rng.random_range(0.5..2.5)],
        rng.random_range(-PI..PI),
    )
}

/// A box overlapping `a`: the center moves less than half the smallest extent.
fn overlapping(a: &Box3D, rng: &mut Rng) -> Box3D {
    let r = 0.45 * a.l.min(a.w);
    Box3D::new(
        [
            a.cx + rng.random_range(-r..r),
            a.cy + rng.random_range(-r..r),
            a.cz + rng.random_range(-0.4..0.4) * a.h,
        ],
        [
            a.l * rng.random_range(0.5..1.5),
            a.w * rng.random_range(0.5..1.5),
            a.h * rng.random_range(0.6..1.4),
        ],
        rng.random_range(-PI..PI),
    )
}

fn rigid(b: &Box3D, theta: f64, t: [f64; 3]) -> Box3D {
    let (s, c) = theta.sin_cos();
    Box3D::new(
        [c * b.cx - s * b.cy + t[0], s * b.cx + c * b.cy + t[1], b.cz + t[2]],
        [b.l, b.w, b.h],
        b.yaw + theta,
    )
}

fn iou_correctness() -> Check {
    let start = Instant::now();
    let cube = Box3D::new([0.0; 3], [1.0; 3], 0.0);
    let analytic = [
        ("identical", iou_3d(&cube, &cube), 1.0),
        ("offset cube", iou_3d(&cube, &cube.translated(0.5, 0.0, 0.0)), 1.0 / 3.0),
        ("45 deg square bev", iou_bev(&cube, &Box3D::new([0.0; 3], [1.0; 3], FRAC_PI_4)), FRAC_1_SQRT_2),
        ("45 deg square 3d", iou_3d(&cube, &Box3D::new([0.0; 3], [1.0; 3], FRAC_PI_4)), FRAC_1_SQRT_2),
    ];
    for (name, got, want) in analytic {
        ensure!((got - want).abs() <= 1e-9, "{name}: {got} vs {want}");
    }
    let mut rng = rng_from_seed(4);
    for _ in 0..100 {
        let b = random_box(&mut rng);
        ensure!((iou_3d(&b, &b) - 1.0).abs() <= 1e-9, "identical random box: {}", iou_3d(&b, &b));
    }

    let pairs: Vec<(Box3D, Box3D, u64)> = (0..200)
        .map(|i| {
            let a = random_box(&mut rng);
            (a, overlapping(&a, &mut rng), i)
        })
        .collect();
    let worst_mc = pairs
        .par_iter()
        .map(|(a, b, i)| {
            let mut r = rng_from_seed(derive_stream_seed(5, "mc-iou", *i));
            (monte_carlo_iou(a, b, 100_000, &mut r) - iou_3d(a, b)).abs()
        })
        .reduce(|| 0.0, f64::max);
    ensure!(worst_mc < 0.01, "Monte Carlo disagreement {worst_mc:.4}");

    let mut worst_sym: f64 = 0.0;
    let mut worst_rigid: f64 = 0.0;
    for i in 0..10_000 {
        let a = random_box(&mut rng);
        let b = if i % 2 == 0 { overlapping(&a, &mut rng) } else { random_box(&mut rng) };
        let theta = rng.random_range(-PI..PI);
        let t = [rng.random_range(-50.0..50.0), rng.random_range(-50.0..50.0), rng.random_range(-5.0..5.0)];
        let (ra, rb) = (rigid(&a, theta, t), rigid(&b, theta, t));
        for f in [iou_3d, iou_bev] {
            let v = f(&a, &b);
            worst_sym = worst_sym.max((v - f(&b, &a)).abs());
            worst_rigid = worst_rigid.max((v - f(&ra, &rb)).abs());
        }
    }
    ensure!(worst_sym <= 1e-9, "symmetry error {worst_sym:e}");
    ensure!(worst_rigid <= 1e-9, "rigid-motion error {worst_rigid:e}");
    let elapsed = start.elapsed();
    ensure!(elapsed < Duration::from_secs(120), "took {elapsed:?}, limit 2 min");
    Ok(format!(
        "analytic to 1e-9; max MC error {worst_mc:.4} < 0.01 over 200 pairs; symmetry {worst_sym:.1e}, rigid {worst_rigid:.1e} over 1e4 pairs; {:.1} s",
        elapsed.as_secs_f64()
    ))
}

// ---------------------------------------------------------------------------
// AP

/// AP by enumerating every score threshold: precision and recall at each
/// cut, then the area under the upper envelope integrated over recall.
fn brute_force_ap(scored: &[(f64, bool)], n_gt: usize) -> f64 {
    let mut thresholds: Vec<f64> = scored.iter().map(|s| s.0).collect();
    thresholds.sort_by(|a, b| b.total_cmp(a));
    thresholds.dedup();
    let cuts: Vec<(f64, f64)> = thresholds
        .iter()
        .map(|&t| {
            let taken = scored.iter().filter(|s| s.0 >= t);
            let n = taken.clone().count() as f64;
            let tp = taken.filter(|s| s.1).count() as f64;
            (tp / n_gt as f64, tp / n)
        })
        .collect();
    let mut recalls: Vec<f64> = cuts.iter().map(|c| c.0).filter(|&r| r > 0.0).collect();
    recalls.sort_by(f64::total_cmp);
    recalls.dedup();
    let mut area = 0.0;
    let mut prev = 0.0;
    for r in recalls {
        let envelope = cuts
            .iter()
            .filter(|c| c.0 >= r)
            .map(|c| c.1)
            .fold(0.0, f64::max);
        area += (r - prev) * envelope;
        prev = r;
    }
    area
}

fn random_scored(rng: &mut Rng) -> (Vec<(f64, bool)>, usize) {
    let n_gt = rng.random_range(1..30);
    let n_det = rng.random_range(0..45);
    let coarse = rng.random_bool(0.5);
    let mut tps = 0;
    let scored = (0..n_det)
        .map(|_| {
            let s = if coarse {
                rng.random_range(1..10) as f64 / 10.0
            } else {
                rng.random::<f64>()
            };
            let tp = tps < n_gt && rng.random_bool(0.5);
            tps += tp as usize;
            (s, tp)
        })
        .collect();
    (scored, n_gt)
}

fn person_box(x: f64, y: f64) -> Box3D {
    Box3D::new([x, y, 0.15], [0.6, 0.6, 1.7], 0.0)
}

fn gt_at(b: Box3D, occlusion: Occlusion, id: usize) -> GroundTruth {
    GroundTruth {
        bbox: b,
        occlusion,
        track_id: format!("t{id}"),
    }
}

fn det_at(b: Box3D, score: f64) -> Detection {
    Detection {
        bbox: b,
        score,
        frame_id: String::new(),
    }
}

/// Frames of eligible ground truth with jittered, missing and spurious
/// detections scored on a grid of 1000 values.
fn random_eval_instance(rng: &mut Rng) -> (Vec<FrameGt>, Vec<Vec<Detection>>) {
    let frames = rng.random_range(1..6);
    let mut gts = Vec::new();
    let mut dets = Vec::new();
    for f in 0..frames {
        let mut eligible = Vec::new();
        let mut fd = Vec::new();
        for g in 0..rng.random_range(0..8) {
            let b = person_box(rng.random_range(-20.0..20.0), rng.random_range(-20.0..20.0));
            let occ = Occlusion::ALL[rng.random_range(0..4)];
            eligible.push(gt_at(b, occ, g));
            if rng.random_bool(0.8) {
                let j = b.translated(rng.random_range(-0.3..0.3), rng.random_range(-0.3..0.3), 0.0);
                fd.push(det_at(j, rng.random_range(0..1000) as f64 / 1000.0));
            }
        }
        for _ in 0..rng.random_range(0..4) {
            let b = person_box(rng.random_range(-20.0..20.0), rng.random_range(-20.0..20.0));
            fd.push(det_at(b, rng.random_range(0..1000) as f64 / 1000.0));
        }
        gts.push(FrameGt {
            frame_id: format!("f{f}"),
            eligible,
            ignored: Vec::new(),
        });
        dets.push(fd);
    }
    (gts, dets)
}

fn ap_oracle() -> Check {
    let mut rng = rng_from_seed(6);
    let mut worst: f64 = 0.0;
    for i in 0..500 {
        let (scored, n_gt) = random_scored(&mut rng);
        let got = ap_from_scored(&scored, n_gt, Interpolation::AllPoint);
        let want = brute_force_ap(&scored, n_gt);
        worst = worst.max((got - want).abs());
        ensure!((got - want).abs() <= 1e-9, "instance {i}: {got} vs brute force {want}");
    }

    let hand = ap_from_scored(&[(0.9, true), (0.8, false), (0.7, true)], 2, Interpolation::AllPoint);
    ensure!(hand == 5.0 / 6.0, "hand case from scores: {hand:.17} vs {:.17}", 5.0 / 6.0);
    let g = [person_box(4.0, 0.0), person_box(0.0, 6.0)];
    let hand_gts = vec![FrameGt {
        frame_id: "hand".into(),
        eligible: vec![gt_at(g[0], Occlusion::FullyVisible, 0), gt_at(g[1], Occlusion::FullyVisible, 1)],
        ignored: Vec::new(),
    }];
    let hand_dets = vec![vec![det_at(g[0], 0.9), det_at(person_box(-5.0, -5.0), 0.8), det_at(g[1], 0.7)]];
    let rows = evaluate(&hand_gts, &hand_dets, &EvalConfig::default(), StrataMode::None);
    ensure!(rows[0].ap[0] == 5.0 / 6.0, "hand case through matching: {:.17}", rows[0].ap[0]);

    let transforms: [fn(f64) -> f64; 4] = [|s| s * s * s, |s| 3.0 * s - 7.0, f64::exp, |s| s / (2.0 - s)];
    let cfg = EvalConfig::default();
    for i in 0..100 {
        let (gts, dets) = random_eval_instance(&mut rng);
        let tf = transforms[i % transforms.len()];
        let mapped: Vec<Vec<Detection>> = dets
            .iter()
            .map(|fd| fd.iter().map(|d| Detection { score: tf(d.score), ..d.clone() }).collect())
            .collect();
        let a = evaluate(&gts, &dets, &cfg, StrataMode::Combined);
        let b = evaluate(&gts, &mapped, &cfg, StrataMode::Combined);
        ensure!(a == b, "instance {i}: AP changed under a monotone score transform");
    }
    Ok(format!(
        "500 instances max |diff| {worst:.1e}; hand case = 5/6 exactly; 100 monotone-transform instances identical"
    ))
}

// ---------------------------------------------------------------------------
// Protocol boundaries

/// A frame with one person at `(x, y)` holding exactly `points` in-box points
/// plus a handful of far-away background points.
fn frame_with_points(x: f64, y: f64, points: usize) -> FrameSample {
    let b = person_box(x, y);
    let mut pts: Vec<Point3> = (0..points)
        .map(|i| {
            let t = i as f64 / points.max(1) as f64;
            Point3::new((x + 0.2 * (t - 0.5)) as f32, y as f32, (0.15 + (t - 0.5)) as f32)
        })
        .collect();
    pts.extend((0..5).map(|i| Point3::new(-40.0, i as f32, 0.0)));
    FrameSample {
        frame_id: "boundary".into(),
        sequence_id: "seq".into(),
        index_in_sequence: 0,
        cloud: PointCloud::new("boundary", pts),
        images: Vec::new(),
        calibrations: Vec::new(),
        ground_truth: vec![gt_at(b, Occlusion::FullyVisible, 0)],
    }
}

fn sum_tp(rows: &[StratumResult], pick: impl Fn(&Stratum) -> bool) -> usize {
    rows.iter().filter(|r| pick(&r.stratum)).map(|r| r.n_tp).sum()
}

fn protocol_boundaries() -> Check {
    let cfg = EvalConfig::default();
    for (n, eligible) in [(10, false), (11, true)] {
        let g = filter_ground_truth(&frame_with_points(5.0, 0.0, n), &cfg);
        ensure!(
            (g.eligible.len() == 1) == eligible && g.eligible.len() + g.ignored.len() == 1,
            "{n} in-box points: eligible {}",
            g.eligible.len()
        );
    }
    for (x, eligible) in [(25.0, true), (25.0 + 1e-6, false)] {
        let g = filter_ground_truth(&frame_with_points(x, 0.0, 50), &cfg);
        ensure!((g.eligible.len() == 1) == eligible, "range {x}: eligible {}", g.eligible.len());
    }
    let edges = [
        (0.0, DistanceBin::Near),
        (3.0 - 1e-9, DistanceBin::Near),
        (3.0, DistanceBin::Mid),
        (7.0 - 1e-9, DistanceBin::Mid),
        (7.0, DistanceBin::Far),
        (25.0, DistanceBin::Far),
        (25.0 + 1e-9, DistanceBin::OutOfRange),
    ];
    for (d, want) in edges {
        for (x, y) in [(d, 0.0), (0.0, -d)] {
            let got = cfg.distance_bin(&person_box(x, y));
            ensure!(got == want, "range {d}: {got:?} vs {want:?}");
        }
    }

    let mut checked = 0;
    for seed in 0..4 {
        let ds = generate_dataset(&SceneParams::default(), 2, 15, seed).map_err(|e| e.to_string())?;
        let frames: Vec<FrameSample> = ds.frames().cloned().collect();
        let gts = clean_ground_truth(&frames, &cfg);
        let noisy = PseudoDetectorParams {
            jitter_sigma: 0.25,
            miss_prob: 0.2,
            ..PseudoDetectorParams::default()
        };
        let dets = detect_frames(&frames, &noisy, SeedPolicy::new(seed));
        let rows = evaluate(&gts, &dets, &cfg, StrataMode::Combined);
        let all = rows[0].n_tp;
        let combined = sum_tp(&rows, |s| matches!(s, Stratum::Combined(..)));
        let by_distance = sum_tp(&rows, |s| matches!(s, Stratum::Distance(_)));
        let by_occlusion = sum_tp(&rows, |s| matches!(s, Stratum::Occlusion(_)));
        ensure!(
            combined == all && by_distance == all && by_occlusion == all,
            "seed {seed}: TP all={all} combined={combined} distance={by_distance} occlusion={by_occlusion}"
        );
        ensure!(all > 0, "seed {seed}: no true positives to sum");
        checked += all;
    }
    Ok(format!(
        "10 points ignored, 11 eligible; 25 m inclusive; edges 3/7/25 left-closed; combined TP sums match ({checked} TPs)"
    ))
}

// ---------------------------------------------------------------------------
// End-to-end trend

fn degradation_trend() -> Check {
    let start = Instant::now();
    let seeds = 5u64;
    let grid = full_grid(&CorruptionKind::ALL);
    let cfg = EvalConfig::default();
    let mut sums: BTreeMap<(Option<CorruptionKind>, Option<Severity>, Stratum), f64> = BTreeMap::new();
    for seed in 0..seeds {
        let ds = generate_dataset(&SceneParams::default(), 10, 20, 100 + seed).map_err(|e| e.to_string())?;
        ensure!(ds.frame_count() == 200, "dataset has {} frames", ds.frame_count());
        let report = run_degradation_experiment(
            &ds,
            &grid,
            &PseudoDetectorParams::default(),
            &cfg,
            StrataMode::Distance,
            SeedPolicy::new(seed),
        )
        .map_err(|e| e.to_string())?;
        for r in report.rows {
            *sums.entry((r.corruption, r.severity, r.stratum)).or_default() += r.ap_percent[0];
        }
    }
    let elapsed = start.elapsed();
    let mean = |k: Option<CorruptionKind>, s: Option<Severity>, st: Stratum| sums[&(k, s, st)] / seeds as f64;

    let baseline = mean(None, None, Stratum::All);
    let mut lines = Vec::new();
    let mut violations = Vec::new();
    for kind in [
        CorruptionKind::DensityDecrease,
        CorruptionKind::FovLoss,
        CorruptionKind::Cutout,
        CorruptionKind::TemporalMisalignLidar,
    ] {
        let curve: Vec<f64> = std::iter::once(baseline)
            .chain(Severity::ALL.map(|s| mean(Some(kind), Some(s), Stratum::All)))
            .collect();
        if curve.windows(2).any(|w| w[1] > w[0]) {
            violations.push(kind.name());
        }
        lines.push(format!(
            "{} {}",
            kind.name(),
            curve.iter().map(|v| format!("{v:.2}")).collect::<Vec<_>>().join(">")
        ));
    }
    let near = mean(None, None, Stratum::Distance(DistanceBin::Near));
    let far = mean(None, None, Stratum::Distance(DistanceBin::Far));
    let detail = format!(
        "mean AP@0.3 clean>S1>S2>S3: {}; clean near {near:.2} far {far:.2}; full sweep 5 seeds in {:.1} s",
        lines.join(", "),
        elapsed.as_secs_f64()
    );
    ensure!(violations.is_empty(), "not monotone for {violations:?}: {detail}");
    ensure!(far <= near, "far AP above near AP: {detail}");
    ensure!(elapsed < Duration::from_secs(300), "sweep exceeded 5 minutes: {detail}");
    Ok(detail)
}

// ---------------------------------------------------------------------------
// CLI determinism

fn pdbench(args: &[&str]) -> Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_pdbench"))
        .args(args)
        .output()
        .map_err(|e| e.to_string())?;
    if out.status.success() {
        Ok(())
    } else {
        Err(format!("pdbench {args:?} failed: {}", String::from_utf8_lossy(&out.stderr)))
    }
}

fn tree(root: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push((p.strip_prefix(root).unwrap().to_path_buf(), fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

fn cli_determinism() -> Check {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let p = |name: &str| tmp.path().join(name).to_str().unwrap().to_string();
    let ds = p("ds");
    pdbench(&["synth", "--sequences", "2", "--frames", "12", "--out", &ds, "--seed", "21"])?;

    let mut corrupt_runs = 0;
    for kind in CorruptionKind::ALL {
        let mut trees = Vec::new();
        for (run, threads) in [(0, "1"), (1, "4"), (2, "4")] {
            let out = p(&format!("{}_{run}", kind.name()));
            pdbench(&[
                "corrupt", "--input", &ds, "--output", &out, "--corruption", kind.name(), "--severity", "3",
                "--seed", "9", "--threads", threads,
            ])?;
            trees.push(tree(Path::new(&out)));
            corrupt_runs += 1;
        }
        ensure!(trees[0] == trees[1] && trees[1] == trees[2], "corrupt {} differs between runs", kind.name());
        ensure!(!trees[0].is_empty(), "corrupt {} wrote nothing", kind.name());
    }

    let mut reports = Vec::new();
    for (i, extra) in [&["--threads", "1"][..], &["--threads", "3"], &["--threads", "8"], &["--in-memory"]]
        .iter()
        .enumerate()
    {
        let out = p(&format!("sweep{i}.csv"));
        let args = [&["sweep", "--input", &ds, "--grid", "all", "--out", &out, "--seed", "9"][..], extra].concat();
        pdbench(&args)?;
        reports.push(fs::read(&out).map_err(|e| e.to_string())?);
    }
    ensure!(reports.windows(2).all(|w| w[0] == w[1]), "sweep reports differ");
    Ok(format!(
        "{corrupt_runs} corrupt runs (11 kinds, threads 1/4, repeated) and 4 full sweeps (threads 1/3/8, in-memory) byte-identical"
    ))
}

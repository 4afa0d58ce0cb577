//! LiDAR-only corruptions: Gaussian ranging noise, cutout, crosstalk,
//! density decrease and field-of-view loss.
//!
//! All operations are pure: the input cloud is never modified and the output
//! depends only on `(cloud, parameters, seed)`. Noise is drawn point by point
//! in cloud order, x then y then z, from [`crate::seed::Rng`].

use rand::seq::index;
use rand::Rng as _;
use rand_distr::StandardNormal;

use crate::model::{Point3, PointCloud, Severity};
use crate::seed::{rng_from_seed, Rng};

/// Per-severity defaults for the five LiDAR corruptions.
#[derive(Debug, Clone, PartialEq)]
pub struct LidarCorruptionParams {
    pub gaussian_sigma_m: [f64; 3],
    pub cutout_groups: usize,
    pub cutout_drop: [usize; 3],
    pub crosstalk_ratio: [f64; 3],
    pub crosstalk_sigma_m: f64,
    pub density_drop_fraction: [f64; 3],
    /// Retained azimuth interval `(lo, hi)` in degrees.
    pub fov_kept_range_deg: [(f64, f64); 3],
}

impl Default for LidarCorruptionParams {
    fn default() -> Self {
        Self {
            gaussian_sigma_m: [0.02, 0.06, 0.10],
            cutout_groups: 50,
            cutout_drop: [2, 5, 10],
            crosstalk_ratio: [0.004, 0.012, 0.02],
            crosstalk_sigma_m: 3.0,
            density_drop_fraction: [0.06, 0.18, 0.30],
            fov_kept_range_deg: [(-105.0, 105.0), (-75.0, 75.0), (-45.0, 45.0)],
        }
    }
}

/// `round(fraction * n)` with halves rounded away from zero, capped at `n`.
pub fn fraction_count(fraction: f64, n: usize) -> usize {
    ((fraction * n as f64).round().max(0.0) as usize).min(n)
}

fn add_noise(p: &Point3, sigma: f64, rng: &mut Rng) -> Point3 {
    let dx: f64 = rng.sample(StandardNormal);
    let dy: f64 = rng.sample(StandardNormal);
    let dz: f64 = rng.sample(StandardNormal);
    Point3 {
        x: (p.x as f64 + sigma * dx) as f32,
        y: (p.y as f64 + sigma * dy) as f32,
        z: (p.z as f64 + sigma * dz) as f32,
        intensity: p.intensity,
    }
}

/// Adds i.i.d. `N(0, sigma²)` noise to every coordinate of every point.
pub fn gaussian_noise(cloud: &PointCloud, sigma: f64, seed: u64) -> PointCloud {
    if sigma == 0.0 {
        return cloud.clone();
    }
    let mut rng = rng_from_seed(seed);
    let points = cloud
        .points
        .iter()
        .map(|p| add_noise(p, sigma, &mut rng))
        .collect();
    cloud.with_points(points)
}

/// Sorted indices of `amount` distinct elements drawn uniformly from `0..n`.
fn sorted_sample(rng: &mut Rng, n: usize, amount: usize) -> Vec<usize> {
    let mut picked = index::sample(rng, n, amount.min(n)).into_vec();
    picked.sort_unstable();
    picked
}

/// Displaces exactly `round(ratio * N)` uniformly chosen points by i.i.d.
/// `N(0, sigma²)` noise per coordinate; all other points are untouched.
pub fn crosstalk_subset(cloud: &PointCloud, ratio: f64, sigma: f64, seed: u64) -> PointCloud {
    let n = cloud.len();
    let mut rng = rng_from_seed(seed);
    let chosen = sorted_sample(&mut rng, n, fraction_count(ratio, n));
    let mut points = cloud.points.clone();
    for i in chosen {
        points[i] = add_noise(&cloud.points[i], sigma, &mut rng);
    }
    cloud.with_points(points)
}

/// Removes exactly `round(fraction * N)` uniformly chosen points; survivors
/// keep their relative order.
pub fn thin(cloud: &PointCloud, fraction: f64, seed: u64) -> PointCloud {
    let n = cloud.len();
    let mut rng = rng_from_seed(seed);
    let removed = sorted_sample(&mut rng, n, fraction_count(fraction, n));
    let mut keep = vec![true; n];
    for i in removed {
        keep[i] = false;
    }
    let points = cloud
        .points
        .iter()
        .zip(keep)
        .filter_map(|(p, k)| k.then_some(*p))
        .collect();
    cloud.with_points(points)
}

/// Keeps the points whose azimuth lies in `[lo_deg, hi_deg]` (inclusive).
pub fn keep_azimuth(cloud: &PointCloud, lo_deg: f64, hi_deg: f64) -> PointCloud {
    let points = cloud
        .points
        .iter()
        .filter(|p| {
            let az = p.azimuth_deg();
            az >= lo_deg && az <= hi_deg
        })
        .copied()
        .collect();
    cloud.with_points(points)
}

/// How a cloud is split into groups and which groups are dropped.
///
/// With at least `groups` points, `seed_indices` holds the cloud indices of
/// the group seeds and each point belongs to the group of its nearest seed
/// (ties go to the lower position in `seed_indices`). With fewer points each
/// point is its own group and `seed_indices` is `0..N`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CutoutPlan {
    pub seed_indices: Vec<usize>,
    pub dropped_groups: Vec<usize>,
}

impl CutoutPlan {
    pub fn group_count(&self) -> usize {
        self.seed_indices.len()
    }
}

/// Draws the group seeds and the dropped groups for a cutout.
pub fn plan_cutout(cloud: &PointCloud, groups: usize, drop: usize, seed: u64) -> CutoutPlan {
    let n = cloud.len();
    let mut rng = rng_from_seed(seed);
    let seed_indices = if n < groups {
        (0..n).collect()
    } else {
        index::sample(&mut rng, n, groups).into_vec()
    };
    let dropped_groups = sorted_sample(&mut rng, seed_indices.len(), drop);
    CutoutPlan {
        seed_indices,
        dropped_groups,
    }
}

fn dist2(a: &Point3, b: &Point3) -> f64 {
    let dx = a.x as f64 - b.x as f64;
    let dy = a.y as f64 - b.y as f64;
    let dz = a.z as f64 - b.z as f64;
    dx * dx + dy * dy + dz * dz
}

/// Group label of every point: position in `seed_indices` of its nearest seed.
pub fn assign_groups(cloud: &PointCloud, seed_indices: &[usize]) -> Vec<usize> {
    let seeds: Vec<Point3> = seed_indices.iter().map(|&i| cloud.points[i]).collect();
    cloud
        .points
        .iter()
        .map(|p| {
            let mut best = 0;
            let mut best_d = f64::INFINITY;
            for (g, s) in seeds.iter().enumerate() {
                let d = dist2(p, s);
                if d < best_d {
                    best_d = d;
                    best = g;
                }
            }
            best
        })
        .collect()
}

/// Removes every point whose group is listed in `plan.dropped_groups`.
pub fn apply_cutout(cloud: &PointCloud, plan: &CutoutPlan) -> PointCloud {
    if plan.dropped_groups.is_empty() {
        return cloud.clone();
    }
    let mut dropped = vec![false; plan.group_count()];
    for &g in &plan.dropped_groups {
        dropped[g] = true;
    }
    let labels = assign_groups(cloud, &plan.seed_indices);
    let points = cloud
        .points
        .iter()
        .zip(labels)
        .filter_map(|(p, g)| (!dropped[g]).then_some(*p))
        .collect();
    cloud.with_points(points)
}

pub fn cutout_groups(cloud: &PointCloud, groups: usize, drop: usize, seed: u64) -> PointCloud {
    apply_cutout(cloud, &plan_cutout(cloud, groups, drop, seed))
}

impl LidarCorruptionParams {
    pub fn gaussian(&self, cloud: &PointCloud, severity: Severity, seed: u64) -> PointCloud {
        gaussian_noise(cloud, self.gaussian_sigma_m[severity.index()], seed)
    }

    pub fn cutout(&self, cloud: &PointCloud, severity: Severity, seed: u64) -> PointCloud {
        cutout_groups(
            cloud,
            self.cutout_groups,
            self.cutout_drop[severity.index()],
            seed,
        )
    }

    pub fn crosstalk(&self, cloud: &PointCloud, severity: Severity, seed: u64) -> PointCloud {
        crosstalk_subset(
            cloud,
            self.crosstalk_ratio[severity.index()],
            self.crosstalk_sigma_m,
            seed,
        )
    }

    pub fn density_decrease(&self, cloud: &PointCloud, severity: Severity, seed: u64) -> PointCloud {
        thin(cloud, self.density_drop_fraction[severity.index()], seed)
    }

    pub fn fov_loss(&self, cloud: &PointCloud, severity: Severity) -> PointCloud {
        let (lo, hi) = self.fov_kept_range_deg[severity.index()];
        keep_azimuth(cloud, lo, hi)
    }
}

pub fn lidar_gaussian(cloud: &PointCloud, severity: Severity, seed: u64) -> PointCloud {
    LidarCorruptionParams::default().gaussian(cloud, severity, seed)
}

pub fn cutout(cloud: &PointCloud, severity: Severity, seed: u64) -> PointCloud {
    LidarCorruptionParams::default().cutout(cloud, severity, seed)
}

pub fn crosstalk(cloud: &PointCloud, severity: Severity, seed: u64) -> PointCloud {
    LidarCorruptionParams::default().crosstalk(cloud, severity, seed)
}

pub fn density_decrease(cloud: &PointCloud, severity: Severity, seed: u64) -> PointCloud {
    LidarCorruptionParams::default().density_decrease(cloud, severity, seed)
}

pub fn fov_loss(cloud: &PointCloud, severity: Severity) -> PointCloud {
    LidarCorruptionParams::default().fov_loss(cloud, severity)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Severity::*;

    fn random_cloud(n: usize, seed: u64) -> PointCloud {
        let mut rng = rng_from_seed(seed);
        let points = (0..n)
            .map(|_| {
                Point3::new(
                    rng.random_range(-20.0..20.0),
                    rng.random_range(-20.0..20.0),
                    rng.random_range(-1.0..2.0),
                )
            })
            .collect();
        PointCloud::new("f", points)
    }

    fn std_dev(xs: &[f64]) -> f64 {
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    }

    #[test]
    fn empty_cloud_is_preserved_by_every_operation() {
        let c = PointCloud::new("e", vec![]);
        for s in Severity::ALL {
            assert!(lidar_gaussian(&c, s, 1).is_empty());
            assert!(cutout(&c, s, 1).is_empty());
            assert!(crosstalk(&c, s, 1).is_empty());
            assert!(density_decrease(&c, s, 1).is_empty());
            assert!(fov_loss(&c, s).is_empty());
        }
    }

    #[test]
    fn gaussian_s2_statistics() {
        let c = PointCloud::new("o", vec![Point3::new(0.0, 0.0, 0.0); 100_000]);
        let out = lidar_gaussian(&c, S2, 99);
        assert_eq!(out.len(), c.len());
        for axis in 0..3 {
            let xs: Vec<f64> = out
                .points
                .iter()
                .map(|p| [p.x, p.y, p.z][axis] as f64)
                .collect();
            let sd = std_dev(&xs);
            assert!((0.057..=0.063).contains(&sd), "axis {axis}: {sd}");
        }
    }

    #[test]
    fn gaussian_keeps_intensity_and_is_deterministic() {
        let mut c = random_cloud(200, 3);
        for p in &mut c.points {
            p.intensity = Some(0.25);
        }
        let a = lidar_gaussian(&c, S3, 5);
        let b = lidar_gaussian(&c, S3, 5);
        assert!(a.bit_eq(&b));
        assert!(a.points.iter().all(|p| p.intensity == Some(0.25)));
        assert!(!a.bit_eq(&lidar_gaussian(&c, S3, 6)));
    }

    #[test]
    fn density_counts() {
        let c = random_cloud(1000, 1);
        assert_eq!(density_decrease(&c, S1, 4).len(), 940);
        assert_eq!(density_decrease(&c, S2, 4).len(), 820);
        assert_eq!(density_decrease(&c, S3, 4).len(), 700);
    }

    #[test]
    fn fraction_count_rounds_half_away_from_zero() {
        assert_eq!(fraction_count(0.5, 1), 1);
        assert_eq!(fraction_count(0.06, 25), 2); // 1.5
        assert_eq!(fraction_count(0.004, 125), 1); // 0.5
        assert_eq!(fraction_count(0.02, 1000), 20);
        assert_eq!(fraction_count(2.0, 3), 3);
    }

    #[test]
    fn crosstalk_changes_exactly_the_selected_points() {
        let c = random_cloud(1000, 2);
        for (sev, expected) in [(S1, 4), (S2, 12), (S3, 20)] {
            let out = crosstalk(&c, sev, 77);
            assert_eq!(out.len(), c.len());
            let changed = c
                .points
                .iter()
                .zip(&out.points)
                .filter(|(a, b)| !a.bit_eq(b))
                .count();
            assert_eq!(changed, expected);
        }
    }

    #[test]
    fn fov_loss_single_points() {
        let at = |deg: f64| {
            let r = deg.to_radians();
            PointCloud::new("p", vec![Point3::new(r.cos() as f32 * 5.0, r.sin() as f32 * 5.0, 0.0)])
        };
        assert!(fov_loss(&at(90.0), S3).is_empty());
        assert_eq!(fov_loss(&at(90.0), S2).len(), 0);
        assert_eq!(fov_loss(&at(90.0), S1).len(), 1);
        for s in Severity::ALL {
            assert_eq!(fov_loss(&at(0.0), s).len(), 1);
        }
    }

    #[test]
    fn fov_boundary_is_inclusive() {
        let c = PointCloud::new(
            "b",
            vec![Point3::new(1.0, 1.0, 0.0), Point3::new(1.0, -1.0, 0.0)],
        );
        // atan2(1, 1) is exactly 45 degrees after conversion.
        assert_eq!(c.points[0].azimuth_deg(), 45.0);
        assert_eq!(fov_loss(&c, S3).len(), 2);
    }

    /// Brute-force count of ring points inside `[lo, hi]`, from the same
    /// generated coordinates.
    fn ring(n: usize) -> PointCloud {
        let points = (0..n)
            .map(|k| {
                let a = (k as f64 * 360.0 / n as f64).to_radians();
                Point3::new((10.0 * a.cos()) as f32, (10.0 * a.sin()) as f32, 0.0)
            })
            .collect();
        PointCloud::new("ring", points)
    }

    #[test]
    fn fov_ring_count() {
        let c = ring(3600);
        let brute = c
            .points
            .iter()
            .filter(|p| {
                let az = (p.y as f64).atan2(p.x as f64).to_degrees();
                (-75.0..=75.0).contains(&az)
            })
            .count();
        assert_eq!(brute, 1501);
        assert_eq!(fov_loss(&c, S2).len(), brute);
    }

    #[test]
    fn fov_is_idempotent() {
        let c = random_cloud(500, 8);
        for s in Severity::ALL {
            let once = fov_loss(&c, s);
            assert!(fov_loss(&once, s).bit_eq(&once));
        }
    }

    #[test]
    fn cutout_removes_exactly_two_groups_at_s1() {
        let c = random_cloud(1000, 11);
        let plan = plan_cutout(&c, 50, 2, 5);
        assert_eq!(plan.group_count(), 50);
        assert_eq!(plan.dropped_groups.len(), 2);
        let labels = assign_groups(&c, &plan.seed_indices);
        let removed = labels
            .iter()
            .filter(|g| plan.dropped_groups.contains(g))
            .count();
        let out = cutout(&c, S1, 5);
        assert_eq!(out.len(), 1000 - removed);
        assert_eq!(out, apply_cutout(&c, &plan));
    }

    #[test]
    fn cutout_small_cloud_drops_individual_points() {
        let c = random_cloud(7, 1);
        assert_eq!(cutout(&c, S1, 3).len(), 5);
        assert_eq!(cutout(&c, S3, 3).len(), 0);
    }

    #[test]
    fn cutout_with_seeds_in_one_blob_leaves_the_other_alone() {
        let mut rng = rng_from_seed(21);
        let mut points = Vec::new();
        for &(ox, oy) in &[(-50.0f32, 0.0f32), (50.0, 0.0)] {
            for _ in 0..500 {
                points.push(Point3::new(
                    ox + rng.random_range(-1.0..1.0),
                    oy + rng.random_range(-1.0..1.0),
                    rng.random_range(0.0..1.0),
                ));
            }
        }
        let c = PointCloud::new("blobs", points);
        // 25 seeds in blob A (indices < 500) and 25 in blob B; drop 5 A-groups.
        let seed_indices: Vec<usize> = (0..25).map(|i| i * 20).chain((0..25).map(|i| 500 + i * 20)).collect();
        let plan = CutoutPlan {
            seed_indices: seed_indices.clone(),
            dropped_groups: vec![0, 3, 7, 12, 24],
        };
        let out = apply_cutout(&c, &plan);

        // brute force: nearest seed by exhaustive scan, lower index on ties
        let mut survivors = Vec::new();
        for p in &c.points {
            let mut best = (f64::INFINITY, 0usize);
            for (g, &si) in seed_indices.iter().enumerate() {
                let s = c.points[si];
                let d = ((p.x - s.x) as f64).powi(2)
                    + ((p.y - s.y) as f64).powi(2)
                    + ((p.z - s.z) as f64).powi(2);
                if d < best.0 {
                    best = (d, g);
                }
            }
            if !plan.dropped_groups.contains(&best.1) {
                survivors.push(*p);
            }
        }
        assert_eq!(out.points, survivors);
        let blob_b: Vec<_> = c.points[500..].to_vec();
        assert_eq!(&out.points[out.len() - 500..], &blob_b[..]);
        assert!(out.len() < 1000);
    }

    #[test]
    fn subset_corruptions_preserve_order() {
        let c = random_cloud(600, 4);
        for out in [cutout(&c, S3, 9), density_decrease(&c, S3, 9), fov_loss(&c, S3)] {
            let mut j = 0;
            for p in &out.points {
                while !c.points[j].bit_eq(p) {
                    j += 1;
                }
                j += 1;
            }
        }
    }

    #[test]
    fn crosstalk_displacement_statistics() {
        let c = PointCloud::new("z", vec![Point3::new(0.0, 0.0, 0.0); 50_000]);
        let mut deltas = Vec::new();
        for seed in 0..12 {
            let out = crosstalk_subset(&c, 0.02, 3.0, seed);
            for p in &out.points {
                if !p.bit_eq(&c.points[0]) {
                    deltas.push(p.x as f64);
                }
            }
        }
        assert!(deltas.len() >= 10_000);
        let sd = std_dev(&deltas);
        assert!((sd - 3.0).abs() < 0.3, "{sd}");
    }
}

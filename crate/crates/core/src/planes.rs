//! Unbounded scene planes: intersection queries, robust fitting, merging,
//! and plane-constrained depth refinement.
//!
//! A plane is the set `{ x : n . x + d = 0 }` with unit normal `n` and
//! scalar offset `d`. Layout planes (walls, floor, ceiling) carry inward
//! normals in the synthetic scenes, but nothing here depends on that
//! orientation except merging, which treats opposite normals as distinct
//! planes.

use nalgebra::{Matrix3, Unit, Vector3};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::erp::{erp_pixel_to_ray, CameraPose};

/// Rays closer to parallel than this (|n . dir|) produce no intersection.
pub const PARALLEL_EPS: f64 = 1e-8;

#[derive(Debug, Error)]
pub enum PlaneError {
    #[error("plane normal must be nonzero and finite")]
    BadNormal,
    #[error("plane offset must be finite")]
    BadOffset,
    #[error("buffer length {got} does not match {height}x{width} = {want}")]
    ShapeMismatch { got: usize, want: usize, height: usize, width: usize },
}

#[derive(Debug, Error)]
pub enum RansacError {
    #[error("plane fitting needs at least 3 points, got {got}")]
    NotEnoughPoints { got: usize },
    #[error("no non-degenerate plane hypothesis found (points may be collinear)")]
    NoValidHypothesis,
}

/// Classification of a plane within a scene.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlaneLabel {
    /// Room envelope: walls, floor, ceiling.
    Layout,
    /// Bounded surface such as furniture.
    NonLayout,
    /// Not classified yet.
    Unknown,
}

/// Unbounded plane `n . x + offset = 0` with identity and classification.
#[derive(Debug, Clone, PartialEq)]
pub struct Plane {
    pub id: u32,
    normal: Unit<Vector3<f64>>,
    pub offset: f64,
    pub label: PlaneLabel,
    pub semantic: Option<String>,
}

impl Plane {
    /// Normalizes `normal`; rejects zero or non-finite inputs.
    pub fn new(id: u32, normal: Vector3<f64>, offset: f64) -> Result<Self, PlaneError> {
        if !normal.iter().all(|v| v.is_finite()) || normal.norm() < 1e-12 {
            return Err(PlaneError::BadNormal);
        }
        if !offset.is_finite() {
            return Err(PlaneError::BadOffset);
        }
        Ok(Self {
            id,
            normal: Unit::new_normalize(normal),
            offset,
            label: PlaneLabel::Unknown,
            semantic: None,
        })
    }

    pub fn with_label(mut self, label: PlaneLabel) -> Self {
        self.label = label;
        self
    }

    pub fn with_semantic(mut self, semantic: &str) -> Self {
        self.semantic = Some(semantic.to_string());
        self
    }

    pub fn normal(&self) -> Vector3<f64> {
        self.normal.into_inner()
    }

    /// Signed distance of `point` along the normal.
    pub fn signed_distance(&self, point: &Vector3<f64>) -> f64 {
        self.normal.dot(point) + self.offset
    }

    pub fn is_layout(&self) -> bool {
        self.label == PlaneLabel::Layout
    }
}

#[derive(Serialize, Deserialize)]
struct PlaneRepr {
    id: u32,
    normal: [f64; 3],
    offset: f64,
    label: PlaneLabel,
    semantic: Option<String>,
}

impl Serialize for Plane {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let n = self.normal();
        PlaneRepr {
            id: self.id,
            normal: [n.x, n.y, n.z],
            offset: self.offset,
            label: self.label,
            semantic: self.semantic.clone(),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Plane {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let repr = PlaneRepr::deserialize(deserializer)?;
        let mut plane = Plane::new(repr.id, Vector3::from(repr.normal), repr.offset)
            .map_err(D::Error::custom)?;
        plane.label = repr.label;
        plane.semantic = repr.semantic;
        Ok(plane)
    }
}

/// 3D points with an optional per-point source view index.
#[derive(Debug, Clone, Default)]
pub struct PointCloud {
    pub points: Vec<Vector3<f64>>,
    pub source_view: Option<Vec<u32>>,
}

impl PointCloud {
    pub fn from_points(points: Vec<Vector3<f64>>) -> Self {
        Self { points, source_view: None }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Positive ray parameter of the intersection `origin + L * dir`, or
/// `None` when the ray is parallel (within `PARALLEL_EPS`) or the hit lies
/// behind the origin.
pub fn ray_plane_distance(origin: &Vector3<f64>, dir: &Vector3<f64>, plane: &Plane) -> Option<f64> {
    let denom = plane.normal.dot(dir);
    if denom.abs() < PARALLEL_EPS {
        return None;
    }
    let l = -(plane.normal.dot(origin) + plane.offset) / denom;
    (l > 0.0).then_some(l)
}

/// One resolved ray/plane hit.
#[derive(Debug, Clone, PartialEq)]
pub struct IntersectionResult {
    pub plane_id: u32,
    pub distance: f64,
    pub point: Vector3<f64>,
}

/// Closest and second-closest layout-plane hits along a ray. Distance ties
/// resolve to the lower plane id.
pub fn nearest_layout_plane(
    origin: &Vector3<f64>,
    dir: &Vector3<f64>,
    planes: &[Plane],
) -> Option<(IntersectionResult, Option<IntersectionResult>)> {
    let mut hits: Vec<(f64, u32)> = planes
        .iter()
        .filter(|p| p.is_layout())
        .filter_map(|p| ray_plane_distance(origin, dir, p).map(|l| (l, p.id)))
        .collect();
    hits.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let hit = |&(l, id): &(f64, u32)| IntersectionResult {
        plane_id: id,
        distance: l,
        point: origin + l * dir,
    };
    let best = hits.first().map(hit)?;
    let second = hits.get(1).map(hit);
    Some((best, second))
}

/// RANSAC output: the refit plane and the indices of its consensus set.
#[derive(Debug, Clone)]
pub struct RansacFit {
    pub plane: Plane,
    pub inliers: Vec<usize>,
}

struct Hypothesis {
    normal: Vector3<f64>,
    offset: f64,
}

fn sample_hypothesis(cloud: &PointCloud, seed: u64, iteration: u64) -> Option<Hypothesis> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(iteration);
    let idx = rand::seq::index::sample(&mut rng, cloud.points.len(), 3);
    let p0 = cloud.points[idx.index(0)];
    let p1 = cloud.points[idx.index(1)];
    let p2 = cloud.points[idx.index(2)];
    let n = (p1 - p0).cross(&(p2 - p0));
    if n.norm() < 1e-12 {
        return None;
    }
    let n = n.normalize();
    Some(Hypothesis { normal: n, offset: -n.dot(&p0) })
}

fn count_inliers(cloud: &PointCloud, hyp: &Hypothesis, threshold: f64) -> usize {
    cloud
        .points
        .iter()
        .filter(|p| (hyp.normal.dot(p) + hyp.offset).abs() <= threshold)
        .count()
}

/// Flips the normal so its first non-negligible component (x, y, z order)
/// is positive, giving every fit a deterministic orientation.
fn canonical_orientation(normal: Vector3<f64>, offset: f64) -> (Vector3<f64>, f64) {
    for axis in 0..3 {
        if normal[axis].abs() > 1e-12 {
            if normal[axis] < 0.0 {
                return (-normal, -offset);
            }
            return (normal, offset);
        }
    }
    (normal, offset)
}

/// Fits one plane by RANSAC with a least-squares refit over the winning
/// consensus set. Each iteration draws from its own seeded stream, so the
/// result is identical across thread counts and the sequential build.
pub fn fit_plane_ransac(
    cloud: &PointCloud,
    iterations: usize,
    inlier_threshold: f64,
    seed: u64,
) -> Result<RansacFit, RansacError> {
    if cloud.len() < 3 {
        return Err(RansacError::NotEnoughPoints { got: cloud.len() });
    }
    let counts = crate::par::map_indexed(iterations.max(1), |i| {
        sample_hypothesis(cloud, seed, i as u64)
            .map(|h| count_inliers(cloud, &h, inlier_threshold))
            .unwrap_or(0)
    });
    let (best_iter, best_count) = counts
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(&a.0)))
        .expect("at least one iteration");
    if *best_count < 3 {
        return Err(RansacError::NoValidHypothesis);
    }
    let hyp = sample_hypothesis(cloud, seed, best_iter as u64).expect("winning hypothesis is valid");
    let consensus: Vec<usize> = cloud
        .points
        .iter()
        .enumerate()
        .filter(|(_, p)| (hyp.normal.dot(p) + hyp.offset).abs() <= inlier_threshold)
        .map(|(i, _)| i)
        .collect();

    let centroid: Vector3<f64> =
        consensus.iter().map(|&i| cloud.points[i]).sum::<Vector3<f64>>() / consensus.len() as f64;
    let mut cov = Matrix3::zeros();
    for &i in &consensus {
        let d = cloud.points[i] - centroid;
        cov += d * d.transpose();
    }
    let eig = cov.symmetric_eigen();
    let mut min_axis = 0;
    for axis in 1..3 {
        if eig.eigenvalues[axis] < eig.eigenvalues[min_axis] {
            min_axis = axis;
        }
    }
    let normal = eig.eigenvectors.column(min_axis).normalize();
    let (normal, offset) = canonical_orientation(normal, -normal.dot(&centroid));
    let plane = Plane::new(0, normal, offset).expect("refit normal is unit");
    let inliers: Vec<usize> = cloud
        .points
        .iter()
        .enumerate()
        .filter(|(_, p)| plane.signed_distance(p).abs() <= inlier_threshold)
        .map(|(i, _)| i)
        .collect();
    Ok(RansacFit { plane, inliers })
}

/// Merges near-duplicate planes: normals within `max_angle_deg` and
/// offsets within `max_offset` (transitively) collapse into one plane with
/// the averaged normal, mean offset, and the lowest member id, label, and
/// semantic. Output is sorted by id.
pub fn merge_planes(planes: &[Plane], max_angle_deg: f64, max_offset: f64) -> Vec<Plane> {
    let mut order: Vec<usize> = (0..planes.len()).collect();
    order.sort_by_key(|&i| planes[i].id);
    let cos_tol = max_angle_deg.to_radians().cos();

    let mut group = vec![usize::MAX; planes.len()];
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for &i in &order {
        let mut joined = None;
        for (gi, members) in groups.iter().enumerate() {
            let compatible = members.iter().any(|&j| {
                planes[i].normal().dot(&planes[j].normal()) >= cos_tol
                    && (planes[i].offset - planes[j].offset).abs() <= max_offset
            });
            if compatible {
                joined = Some(gi);
                break;
            }
        }
        match joined {
            Some(gi) => {
                group[i] = gi;
                groups[gi].push(i);
            }
            None => {
                group[i] = groups.len();
                groups.push(vec![i]);
            }
        }
    }

    let mut merged: Vec<Plane> = groups
        .iter()
        .map(|members| {
            let rep = members[0];
            let mut normal_sum = Vector3::zeros();
            let mut offset_sum = 0.0;
            for &i in members {
                normal_sum += planes[i].normal();
                offset_sum += planes[i].offset;
            }
            let normal = if normal_sum.norm() > 1e-9 { normal_sum } else { planes[rep].normal() };
            let mut out = Plane::new(planes[rep].id, normal, offset_sum / members.len() as f64)
                .expect("averaged normal of compatible planes is nonzero");
            out.label = planes[rep].label;
            out.semantic = planes[rep].semantic.clone();
            out
        })
        .collect();
    merged.sort_by_key(|p| p.id);
    merged
}

/// Depth map after snapping layout-plane pixels to their plane.
#[derive(Debug, Clone)]
pub struct DepthRefinement {
    pub depth: Vec<f64>,
    /// Pixels whose layout plane could not be intersected along the pixel
    /// ray; their input depth is kept.
    pub unresolved: Vec<usize>,
}

/// Replaces the depth of every pixel assigned to a layout plane with the
/// exact ray/plane distance. Non-layout and unassigned pixels pass
/// through untouched.
pub fn refine_depth(
    depth: &[f64],
    plane_ids: &[Option<u32>],
    height: usize,
    width: usize,
    pose: &CameraPose,
    planes: &[Plane],
) -> Result<DepthRefinement, PlaneError> {
    let want = height * width;
    if depth.len() != want {
        return Err(PlaneError::ShapeMismatch { got: depth.len(), want, height, width });
    }
    if plane_ids.len() != want {
        return Err(PlaneError::ShapeMismatch { got: plane_ids.len(), want, height, width });
    }
    let mut refined = depth.to_vec();
    let mut unresolved = Vec::new();
    let origin = pose.center();
    for (i, slot) in refined.iter_mut().enumerate() {
        let Some(id) = plane_ids[i] else { continue };
        let Some(plane) = planes.iter().find(|p| p.id == id && p.is_layout()) else { continue };
        let (r, c) = (i / width, i % width);
        let ray = erp_pixel_to_ray(r as f64, c as f64, height, width, pose);
        match ray_plane_distance(&origin, &ray, plane) {
            Some(l) => *slot = l,
            None => unresolved.push(i),
        }
    }
    Ok(DepthRefinement { depth: refined, unresolved })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn wall_z2() -> Plane {
        // Plane z = 2 with normal facing the origin side.
        Plane::new(0, Vector3::new(0.0, 0.0, 1.0), -2.0).unwrap().with_label(PlaneLabel::Layout)
    }

    #[test]
    fn axial_ray_hits_at_plane_depth() {
        let plane = wall_z2();
        let o = Vector3::zeros();
        let l = ray_plane_distance(&o, &Vector3::new(0.0, 0.0, 1.0), &plane).unwrap();
        assert_abs_diff_eq!(l, 2.0, epsilon = 1e-12);
    }

    #[test]
    fn oblique_ray_scales_by_inverse_cosine() {
        let plane = wall_z2();
        let o = Vector3::zeros();
        let dir = Vector3::new(3f64.sqrt() / 2.0, 0.0, 0.5);
        let l = ray_plane_distance(&o, &dir, &plane).unwrap();
        assert_abs_diff_eq!(l, 4.0, epsilon = 1e-12);
    }

    #[test]
    fn behind_and_parallel_rays_miss() {
        let plane = wall_z2();
        let o = Vector3::zeros();
        assert!(ray_plane_distance(&o, &Vector3::new(0.0, 0.0, -1.0), &plane).is_none());
        assert!(ray_plane_distance(&o, &Vector3::new(1.0, 0.0, 0.0), &plane).is_none());
        assert!(ray_plane_distance(&o, &Vector3::new(1.0, 0.0, 1e-9), &plane).is_none());
    }

    #[test]
    fn nearest_prefers_smaller_distance_then_lower_id() {
        let far = Plane::new(7, Vector3::new(0.0, 0.0, 1.0), -5.0)
            .unwrap()
            .with_label(PlaneLabel::Layout);
        let near_hi = Plane::new(9, Vector3::new(0.0, 0.0, 1.0), -2.0)
            .unwrap()
            .with_label(PlaneLabel::Layout);
        let near_lo = Plane::new(3, Vector3::new(1e-12, 0.0, 1.0), -2.0)
            .unwrap()
            .with_label(PlaneLabel::Layout);
        let o = Vector3::zeros();
        let dir = Vector3::new(0.0, 0.0, 1.0);
        let (best, second) =
            nearest_layout_plane(&o, &dir, &[far.clone(), near_hi, near_lo]).unwrap();
        assert_eq!(best.plane_id, 3);
        assert_eq!(second.unwrap().plane_id, 9);
        assert_abs_diff_eq!(best.point.z, 2.0, epsilon = 1e-9);
    }

    #[test]
    fn non_layout_planes_are_invisible_to_nearest() {
        let table = Plane::new(0, Vector3::new(0.0, 0.0, 1.0), -1.0)
            .unwrap()
            .with_label(PlaneLabel::NonLayout);
        let wall = wall_z2().with_label(PlaneLabel::Layout);
        let (best, second) = nearest_layout_plane(
            &Vector3::zeros(),
            &Vector3::new(0.0, 0.0, 1.0),
            &[table, wall],
        )
        .unwrap();
        assert_eq!(best.plane_id, 0);
        assert_abs_diff_eq!(best.distance, 2.0, epsilon = 1e-12);
        assert!(second.is_none());
    }

    fn plane_with_outliers() -> PointCloud {
        // 64 exact points on y = 1 plus 16 off-plane distractors.
        let mut points = Vec::new();
        for i in 0..8 {
            for j in 0..8 {
                points.push(Vector3::new(i as f64 * 0.3, 1.0, j as f64 * 0.3 - 1.0));
            }
        }
        for k in 0..16 {
            let t = k as f64;
            points.push(Vector3::new(t * 0.11 - 1.0, 1.0 + (t + 1.0) * 0.21, t * 0.07));
        }
        PointCloud::from_points(points)
    }

    #[test]
    fn ransac_recovers_plane_through_outliers() {
        let cloud = plane_with_outliers();
        let fit = fit_plane_ransac(&cloud, 256, 0.02, 11).unwrap();
        let n = fit.plane.normal();
        assert_abs_diff_eq!(n.y.abs(), 1.0, epsilon = 1e-9);
        assert!(n.y > 0.0, "canonical orientation points +y");
        assert_abs_diff_eq!(fit.plane.offset, -1.0, epsilon = 1e-9);
        assert!(fit.inliers.len() >= 64);
        for &i in &fit.inliers {
            assert!(fit.plane.signed_distance(&cloud.points[i]).abs() <= 0.02);
        }
    }

    #[test]
    fn ransac_is_deterministic_for_a_seed() {
        let cloud = plane_with_outliers();
        let a = fit_plane_ransac(&cloud, 256, 0.02, 5).unwrap();
        let b = fit_plane_ransac(&cloud, 256, 0.02, 5).unwrap();
        assert_eq!(a.plane.normal(), b.plane.normal());
        assert_eq!(a.plane.offset, b.plane.offset);
        assert_eq!(a.inliers, b.inliers);
    }

    #[test]
    fn degenerate_clouds_are_rejected() {
        let two = PointCloud::from_points(vec![Vector3::zeros(), Vector3::x()]);
        assert!(matches!(
            fit_plane_ransac(&two, 16, 0.1, 0),
            Err(RansacError::NotEnoughPoints { got: 2 })
        ));
        let collinear = PointCloud::from_points(
            (0..10).map(|i| Vector3::new(i as f64, 0.0, 0.0)).collect(),
        );
        assert!(matches!(
            fit_plane_ransac(&collinear, 64, 0.1, 0),
            Err(RansacError::NoValidHypothesis)
        ));
    }

    #[test]
    fn merge_collapses_near_duplicates_only() {
        let a = Plane::new(2, Vector3::new(0.0, 1.0, 0.002), -1.0).unwrap();
        let b = Plane::new(5, Vector3::new(0.0, 1.0, 0.0), -1.02).unwrap();
        let opposite = Plane::new(9, Vector3::new(0.0, -1.0, 0.0), -1.0).unwrap();
        let merged = merge_planes(&[b.clone(), a.clone(), opposite.clone()], 5.0, 0.05);
        assert_eq!(merged.len(), 2);
        assert_eq!(merged[0].id, 2);
        assert_abs_diff_eq!(merged[0].offset, -1.01, epsilon = 1e-12);
        assert!(merged[0].normal().y > 0.999);
        assert_eq!(merged[1].id, 9);
    }

    #[test]
    fn merge_is_transitive_through_a_chain() {
        // a~b and b~c but a!~c directly; all three still collapse.
        let a = Plane::new(0, Vector3::y(), -1.00).unwrap();
        let b = Plane::new(1, Vector3::y(), -1.04).unwrap();
        let c = Plane::new(2, Vector3::y(), -1.08).unwrap();
        let merged = merge_planes(&[c, a, b], 5.0, 0.05);
        assert_eq!(merged.len(), 1);
        assert_eq!(merged[0].id, 0);
        assert_abs_diff_eq!(merged[0].offset, -1.04, epsilon = 1e-12);
    }

    #[test]
    fn refine_depth_snaps_layout_pixels_to_plane() {
        let (h, w) = (8, 16);
        let plane = wall_z2();
        let pose = CameraPose::identity(Vector3::zeros());
        let depth = vec![1.0; h * w];
        let ids = vec![Some(0u32); h * w];
        let out = refine_depth(&depth, &ids, h, w, &pose, &[plane]).unwrap();
        for i in 0..h * w {
            let ray = erp_pixel_to_ray(
                (i / w) as f64,
                (i % w) as f64,
                h,
                w,
                &pose,
            );
            if ray.z > PARALLEL_EPS {
                assert_abs_diff_eq!(out.depth[i], 2.0 / ray.z, epsilon = 1e-9);
            } else {
                assert_eq!(out.depth[i], 1.0, "pixels missing the plane keep input depth");
                assert!(out.unresolved.contains(&i));
            }
        }
    }

    #[test]
    fn refine_depth_ignores_non_layout_pixels() {
        let table = Plane::new(4, Vector3::y(), -0.5).unwrap().with_label(PlaneLabel::NonLayout);
        let pose = CameraPose::identity(Vector3::zeros());
        let depth = vec![3.0; 8];
        let ids = vec![Some(4u32); 8];
        let out = refine_depth(&depth, &ids, 2, 4, &pose, &[table]).unwrap();
        assert_eq!(out.depth, depth);
        assert!(out.unresolved.is_empty());
    }

    proptest! {
        #[test]
        fn reported_hits_lie_on_the_plane(
            nx in -1.0f64..1.0, ny in -1.0f64..1.0, nz in -1.0f64..1.0,
            off in -3.0f64..3.0,
            dx in -1.0f64..1.0, dy in -1.0f64..1.0, dz in -1.0f64..1.0,
        ) {
            let n = Vector3::new(nx, ny, nz);
            let d = Vector3::new(dx, dy, dz);
            prop_assume!(n.norm() > 1e-3 && d.norm() > 1e-3);
            let plane = Plane::new(0, n, off).unwrap();
            let origin = Vector3::new(0.1, -0.2, 0.3);
            if let Some(l) = ray_plane_distance(&origin, &d, &plane) {
                prop_assert!(l > 0.0);
                let hit = origin + l * d;
                prop_assert!(plane.signed_distance(&hit).abs() < 1e-6 * (1.0 + l));
            }
        }
    }
}

//! Equirectangular (ERP) panorama geometry and cubemap conversion.
//!
//! A panorama of size `height x width` covers the full sphere: pixel
//! `(row, col)` looks along longitude `theta = ((col + 0.5) / width * 2 - 1) * pi`
//! and latitude `phi = (0.5 - (row + 0.5) / height) * pi`, giving the
//! camera-frame direction
//! `(cos(phi) sin(theta), -sin(phi), cos(phi) cos(theta))`.
//! Row 0 is the top of the image (latitude +90 deg maps to camera -y),
//! column 0 starts at longitude -180 deg, and longitude wraps. A camera
//! pose rotates camera directions into the world frame and places the
//! projection center.
//!
//! Cubemap faces share the camera frame: each face spans a 90 deg frustum
//! along one axis, with face pixel `(v, u)` at direction
//! `forward + a * right + b * down` for `a, b` in `(-1, 1)`. Face bases are
//! chosen so neighboring faces are continuous across shared edges.

use nalgebra::{Matrix3, Vector3};
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::img::Image;

/// Alpha threshold separating observed pixels from holes.
pub const DEFAULT_ALPHA_MIN: f32 = 0.5;

/// Latitude guard: camera directions with `|y|` above `1 - POLE_EPS` are
/// treated as poles and reported at column 0.
pub const POLE_EPS: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum GeometryError {
    #[error("rotation must be orthonormal with determinant +1: {detail}")]
    InvalidRotation { detail: String },
    #[error("panorama dimensions {height}x{width} must be nonzero")]
    EmptyPanorama { height: usize, width: usize },
    #[error("cubemap face resolution must be nonzero")]
    EmptyFace,
}

/// World-from-camera rotation plus projection center.
#[derive(Debug, Clone, PartialEq)]
pub struct CameraPose {
    rotation: Matrix3<f64>,
    center: Vector3<f64>,
}

impl CameraPose {
    /// Validates that `rotation` is a proper rotation (orthonormal,
    /// determinant +1) before accepting the pose.
    pub fn new(rotation: Matrix3<f64>, center: Vector3<f64>) -> Result<Self, GeometryError> {
        if rotation.iter().any(|v| !v.is_finite()) || center.iter().any(|v| !v.is_finite()) {
            return Err(GeometryError::InvalidRotation { detail: "non-finite entries".into() });
        }
        let gram = rotation.transpose() * rotation;
        let ortho_err = (gram - Matrix3::identity()).abs().max();
        if ortho_err > 1e-9 {
            return Err(GeometryError::InvalidRotation {
                detail: format!("orthonormality residual {ortho_err:.3e}"),
            });
        }
        let det = rotation.determinant();
        if (det - 1.0).abs() > 1e-9 {
            return Err(GeometryError::InvalidRotation {
                detail: format!("determinant {det:.6} != 1"),
            });
        }
        Ok(Self { rotation, center })
    }

    /// Identity orientation at `center`.
    pub fn identity(center: Vector3<f64>) -> Self {
        Self { rotation: Matrix3::identity(), center }
    }

    /// Rotation about the world y axis by `yaw` radians, at `center`.
    pub fn yawed(yaw: f64, center: Vector3<f64>) -> Self {
        let (s, c) = yaw.sin_cos();
        let rotation = Matrix3::new(c, 0.0, s, 0.0, 1.0, 0.0, -s, 0.0, c);
        Self { rotation, center }
    }

    pub fn rotation(&self) -> &Matrix3<f64> {
        &self.rotation
    }

    pub fn center(&self) -> Vector3<f64> {
        self.center
    }

    pub fn camera_to_world(&self, dir: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * dir
    }

    pub fn world_to_camera(&self, dir: &Vector3<f64>) -> Vector3<f64> {
        self.rotation.transpose() * dir
    }
}

#[derive(Serialize, Deserialize)]
struct PoseRepr {
    rotation: [[f64; 3]; 3],
    center: [f64; 3],
}

impl Serialize for CameraPose {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let r = &self.rotation;
        let repr = PoseRepr {
            rotation: [
                [r[(0, 0)], r[(0, 1)], r[(0, 2)]],
                [r[(1, 0)], r[(1, 1)], r[(1, 2)]],
                [r[(2, 0)], r[(2, 1)], r[(2, 2)]],
            ],
            center: [self.center.x, self.center.y, self.center.z],
        };
        repr.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for CameraPose {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let repr = PoseRepr::deserialize(deserializer)?;
        let m = repr.rotation;
        let rotation = Matrix3::new(
            m[0][0], m[0][1], m[0][2], m[1][0], m[1][1], m[1][2], m[2][0], m[2][1], m[2][2],
        );
        CameraPose::new(rotation, Vector3::from(repr.center)).map_err(D::Error::custom)
    }
}

/// Full-sphere panorama image; alpha below the hole threshold marks
/// unobserved pixels.
#[derive(Debug, Clone, PartialEq)]
pub struct ErpImage {
    pub image: Image,
}

impl ErpImage {
    pub fn new(image: Image) -> Self {
        Self { image }
    }

    pub fn width(&self) -> usize {
        self.image.width()
    }

    pub fn height(&self) -> usize {
        self.image.height()
    }

    /// Row-major mask, true where the pixel is a hole (alpha below
    /// `alpha_min`).
    pub fn hole_mask(&self, alpha_min: f32) -> Vec<bool> {
        let (h, w) = (self.height(), self.width());
        let mut mask = vec![false; h * w];
        for r in 0..h {
            for c in 0..w {
                mask[r * w + c] = self.image.alpha(r, c) < alpha_min;
            }
        }
        mask
    }
}

/// Camera-frame ray for continuous pixel coordinates. The result is unit
/// norm by construction.
pub fn erp_pixel_to_ray_camera(row: f64, col: f64, height: usize, width: usize) -> Vector3<f64> {
    let theta = ((col + 0.5) / width as f64 * 2.0 - 1.0) * std::f64::consts::PI;
    let phi = (0.5 - (row + 0.5) / height as f64) * std::f64::consts::PI;
    let (sin_t, cos_t) = theta.sin_cos();
    let (sin_p, cos_p) = phi.sin_cos();
    Vector3::new(cos_p * sin_t, -sin_p, cos_p * cos_t)
}

/// World-frame ray through pixel `(row, col)` of a posed panorama.
pub fn erp_pixel_to_ray(
    row: f64,
    col: f64,
    height: usize,
    width: usize,
    pose: &CameraPose,
) -> Vector3<f64> {
    pose.camera_to_world(&erp_pixel_to_ray_camera(row, col, height, width))
}

/// Continuous pixel coordinates of a camera-frame direction. Directions at
/// the poles (|y| within `POLE_EPS` of 1) report column 0. `dir` does not
/// need to be normalized.
pub fn ray_to_erp_pixel_camera(dir: &Vector3<f64>, height: usize, width: usize) -> (f64, f64) {
    let n = dir.norm();
    let y = dir.y / n;
    let phi = (-y).clamp(-1.0, 1.0).asin();
    let row = (0.5 - phi / std::f64::consts::PI) * height as f64 - 0.5;
    if y.abs() > 1.0 - POLE_EPS {
        return (row, 0.0);
    }
    let theta = dir.x.atan2(dir.z);
    let col = (theta / std::f64::consts::PI + 1.0) / 2.0 * width as f64 - 0.5;
    let col = (col + 0.5).rem_euclid(width as f64) - 0.5;
    (row, col)
}

/// Continuous pixel coordinates of a world-frame direction under `pose`.
pub fn ray_to_erp_pixel(
    dir: &Vector3<f64>,
    height: usize,
    width: usize,
    pose: &CameraPose,
) -> (f64, f64) {
    ray_to_erp_pixel_camera(&pose.world_to_camera(dir), height, width)
}

/// Cubemap face identifiers, named for the camera-frame axis they look
/// along (`Up` looks toward camera -y, the scene zenith).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Face {
    Front,
    Right,
    Back,
    Left,
    Up,
    Down,
}

/// All faces in storage order.
pub const FACES: [Face; 6] = [Face::Front, Face::Right, Face::Back, Face::Left, Face::Up, Face::Down];

struct FaceBasis {
    forward: Vector3<f64>,
    right: Vector3<f64>,
    down: Vector3<f64>,
}

impl Face {
    pub fn index(self) -> usize {
        match self {
            Face::Front => 0,
            Face::Right => 1,
            Face::Back => 2,
            Face::Left => 3,
            Face::Up => 4,
            Face::Down => 5,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Face::Front => "front",
            Face::Right => "right",
            Face::Back => "back",
            Face::Left => "left",
            Face::Up => "up",
            Face::Down => "down",
        }
    }

    fn basis(self) -> FaceBasis {
        let v = Vector3::new;
        match self {
            Face::Front => FaceBasis { forward: v(0.0, 0.0, 1.0), right: v(1.0, 0.0, 0.0), down: v(0.0, 1.0, 0.0) },
            Face::Right => FaceBasis { forward: v(1.0, 0.0, 0.0), right: v(0.0, 0.0, -1.0), down: v(0.0, 1.0, 0.0) },
            Face::Back => FaceBasis { forward: v(0.0, 0.0, -1.0), right: v(-1.0, 0.0, 0.0), down: v(0.0, 1.0, 0.0) },
            Face::Left => FaceBasis { forward: v(-1.0, 0.0, 0.0), right: v(0.0, 0.0, 1.0), down: v(0.0, 1.0, 0.0) },
            Face::Up => FaceBasis { forward: v(0.0, -1.0, 0.0), right: v(1.0, 0.0, 0.0), down: v(0.0, 0.0, 1.0) },
            Face::Down => FaceBasis { forward: v(0.0, 1.0, 0.0), right: v(1.0, 0.0, 0.0), down: v(0.0, 0.0, -1.0) },
        }
    }
}

/// Face owning a camera-frame direction: the dominant axis by absolute
/// value, ties resolved in x, y, z order.
pub fn face_for_direction(dir: &Vector3<f64>) -> Face {
    let (ax, ay, az) = (dir.x.abs(), dir.y.abs(), dir.z.abs());
    if ax >= ay && ax >= az {
        if dir.x >= 0.0 {
            Face::Right
        } else {
            Face::Left
        }
    } else if ay >= az {
        if dir.y < 0.0 {
            Face::Up
        } else {
            Face::Down
        }
    } else if dir.z >= 0.0 {
        Face::Front
    } else {
        Face::Back
    }
}

/// Projects a camera-frame direction onto a face plane, returning the
/// normalized face coordinates `(a, b)` in right/down units. `None` when
/// the direction points away from the face.
pub fn face_project(face: Face, dir: &Vector3<f64>) -> Option<(f64, f64)> {
    let basis = face.basis();
    let f = dir.dot(&basis.forward);
    if f <= 0.0 {
        return None;
    }
    Some((dir.dot(&basis.right) / f, dir.dot(&basis.down) / f))
}

/// Camera-frame direction through face pixel `(row, col)` at the given
/// face resolution. Not normalized.
pub fn face_pixel_to_dir(face: Face, row: f64, col: f64, resolution: usize) -> Vector3<f64> {
    let basis = face.basis();
    let a = 2.0 * (col + 0.5) / resolution as f64 - 1.0;
    let b = 2.0 * (row + 0.5) / resolution as f64 - 1.0;
    basis.forward + a * basis.right + b * basis.down
}

/// Six square faces sharing one camera frame.
#[derive(Debug, Clone, PartialEq)]
pub struct CubemapFaceSet {
    resolution: usize,
    faces: Vec<Image>,
}

impl CubemapFaceSet {
    pub fn new(faces: [Image; 6]) -> Result<Self, GeometryError> {
        let resolution = faces[0].width();
        if resolution == 0 {
            return Err(GeometryError::EmptyFace);
        }
        for img in &faces {
            if img.width() != resolution || img.height() != resolution {
                return Err(GeometryError::EmptyFace);
            }
        }
        Ok(Self { resolution, faces: faces.into() })
    }

    pub fn resolution(&self) -> usize {
        self.resolution
    }

    pub fn face(&self, face: Face) -> &Image {
        &self.faces[face.index()]
    }

    pub fn face_mut(&mut self, face: Face) -> &mut Image {
        &mut self.faces[face.index()]
    }
}

/// Resamples a panorama onto six cubemap faces with bilinear filtering
/// (longitude wraps). Alpha resamples with the color channels.
pub fn erp_to_cubemap(erp: &ErpImage, face_resolution: usize) -> Result<CubemapFaceSet, GeometryError> {
    if face_resolution == 0 {
        return Err(GeometryError::EmptyFace);
    }
    let (h, w) = (erp.height(), erp.width());
    let mut faces = Vec::with_capacity(6);
    for face in FACES {
        let img = Image::from_fn(face_resolution, face_resolution, |row, col| {
            let dir = face_pixel_to_dir(face, row as f64, col as f64, face_resolution);
            let (r, c) = ray_to_erp_pixel_camera(&dir, h, w);
            erp.image.sample_bilinear_wrap_x(r, c)
        })
        .expect("nonzero face resolution");
        faces.push(img);
    }
    let faces: [Image; 6] = faces.try_into().expect("six faces");
    CubemapFaceSet::new(faces)
}

/// Stitches cubemap faces back into a panorama. Every output pixel samples
/// exactly one face (the dominant-axis owner) bilinearly with clamping, so
/// transparent faces produce transparent panorama pixels.
pub fn stitch_cubemap_to_erp(
    faces: &CubemapFaceSet,
    height: usize,
    width: usize,
) -> Result<ErpImage, GeometryError> {
    if height == 0 || width == 0 {
        return Err(GeometryError::EmptyPanorama { height, width });
    }
    let res = faces.resolution();
    let image = Image::from_fn(width, height, |row, col| {
        let dir = erp_pixel_to_ray_camera(row as f64, col as f64, height, width);
        let face = face_for_direction(&dir);
        let (a, b) = face_project(face, &dir).expect("dominant face is front-facing");
        let u = (a + 1.0) / 2.0 * res as f64 - 0.5;
        let v = (b + 1.0) / 2.0 * res as f64 - 0.5;
        faces.face(face).sample_bilinear_clamp(v, u)
    })
    .expect("nonzero panorama dimensions");
    Ok(ErpImage::new(image))
}

/// Marks ERP pixels within `band` pixels (Chebyshev, wrapping in column)
/// of a cubemap face boundary. Useful for excluding resampling seams from
/// image comparisons.
pub fn seam_band_mask(height: usize, width: usize, band: usize) -> Vec<bool> {
    let face_of = |r: usize, c: usize| {
        face_for_direction(&erp_pixel_to_ray_camera(r as f64, c as f64, height, width))
    };
    let faces: Vec<Face> = crate::par::map_indexed(height * width, |i| face_of(i / width, i % width));
    let b = band as isize;
    crate::par::map_indexed(height * width, |i| {
        let (r, c) = ((i / width) as isize, (i % width) as isize);
        let own = faces[i as usize];
        for dr in -b..=b {
            let rr = r + dr;
            if rr < 0 || rr >= height as isize {
                continue;
            }
            for dc in -b..=b {
                let cc = (c + dc).rem_euclid(width as isize);
                if faces[rr as usize * width + cc as usize] != own {
                    return true;
                }
            }
        }
        false
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn unit(v: Vector3<f64>) -> Vector3<f64> {
        v / v.norm()
    }

    #[test]
    fn panorama_center_looks_along_positive_z() {
        let d = erp_pixel_to_ray_camera(31.5, 63.5, 64, 128);
        assert_abs_diff_eq!(d.x, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(d.y, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(d.z, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn last_column_wraps_to_negative_z() {
        let d = erp_pixel_to_ray_camera(31.5, 127.5, 64, 128);
        assert_abs_diff_eq!(d.x, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(d.z, -1.0, epsilon = 1e-12);
    }

    #[test]
    fn quarter_latitude_quarter_longitude() {
        // row 15.5 of 64 is latitude +45 deg, col 31.5 of 128 is longitude
        // -90 deg.
        let d = erp_pixel_to_ray_camera(15.5, 31.5, 64, 128);
        let s = 0.5f64.sqrt();
        assert_abs_diff_eq!(d.x, -s, epsilon = 1e-12);
        assert_abs_diff_eq!(d.y, -s, epsilon = 1e-12);
        assert_abs_diff_eq!(d.z, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn zenith_reports_column_zero() {
        let (r, c) = ray_to_erp_pixel_camera(&Vector3::new(0.0, -1.0, 0.0), 64, 128);
        assert_abs_diff_eq!(r, -0.5, epsilon = 1e-9);
        assert_eq!(c, 0.0);
        let (r, _) = ray_to_erp_pixel_camera(&Vector3::new(0.0, 1.0, 0.0), 64, 128);
        assert_abs_diff_eq!(r, 63.5, epsilon = 1e-9);
    }

    #[test]
    fn longitude_seam_is_continuous() {
        for row in [3.0, 17.0, 60.9] {
            let a = erp_pixel_to_ray_camera(row, -0.5, 64, 128);
            let b = erp_pixel_to_ray_camera(row, 127.5, 64, 128);
            assert!((a - b).norm() < 1e-9);
        }
    }

    #[test]
    fn pose_rotates_rays_into_world_frame() {
        let pose = CameraPose::yawed(std::f64::consts::FRAC_PI_2, Vector3::zeros());
        let d = erp_pixel_to_ray(31.5, 63.5, 64, 128, &pose);
        // Camera +z rotated by yaw pi/2 lands on world +x.
        assert_abs_diff_eq!(d.x, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(d.z, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn pose_rejects_non_rotation() {
        let scaled = Matrix3::identity() * 2.0;
        assert!(CameraPose::new(scaled, Vector3::zeros()).is_err());
        let mut reflect = Matrix3::identity();
        reflect[(0, 0)] = -1.0;
        assert!(CameraPose::new(reflect, Vector3::zeros()).is_err());
    }

    #[test]
    fn pose_serde_round_trip() {
        let pose = CameraPose::yawed(0.7, Vector3::new(1.0, 2.0, 3.0));
        let json = serde_json::to_string(&pose).unwrap();
        let back: CameraPose = serde_json::from_str(&json).unwrap();
        assert!((back.rotation() - pose.rotation()).abs().max() < 1e-15);
        assert_eq!(back.center(), pose.center());
    }

    #[test]
    fn face_selection_honors_dominant_axis() {
        assert_eq!(face_for_direction(&Vector3::new(0.1, 0.2, 0.9)), Face::Front);
        assert_eq!(face_for_direction(&Vector3::new(-0.9, 0.2, 0.1)), Face::Left);
        assert_eq!(face_for_direction(&Vector3::new(0.0, -1.0, 0.0)), Face::Up);
        assert_eq!(face_for_direction(&Vector3::new(0.0, 1.0, 0.0)), Face::Down);
        // Ties prefer x over y over z.
        assert_eq!(face_for_direction(&Vector3::new(1.0, 1.0, 1.0)), Face::Right);
        assert_eq!(face_for_direction(&Vector3::new(0.0, 1.0, 1.0)), Face::Down);
    }

    #[test]
    fn adjacent_faces_agree_on_shared_edges() {
        // Directions on the shared edge must project to matching border
        // coordinates of both faces.
        let cases = [
            (Face::Front, Face::Right, unit(Vector3::new(1.0, 0.3, 1.0))),
            (Face::Right, Face::Back, unit(Vector3::new(1.0, -0.2, -1.0))),
            (Face::Back, Face::Left, unit(Vector3::new(-1.0, 0.4, -1.0))),
            (Face::Left, Face::Front, unit(Vector3::new(-1.0, 0.1, 1.0))),
            (Face::Front, Face::Up, unit(Vector3::new(0.25, -1.0, 1.0))),
            (Face::Front, Face::Down, unit(Vector3::new(-0.4, 1.0, 1.0))),
        ];
        for (fa, fb, dir) in cases {
            let (aa, ab) = face_project(fa, &dir).unwrap();
            let (ba, bb) = face_project(fb, &dir).unwrap();
            for v in [aa, ab, ba, bb] {
                assert!(v.abs() <= 1.0 + 1e-9);
            }
            assert!(aa.abs() > 1.0 - 1e-9 || ab.abs() > 1.0 - 1e-9);
            assert!(ba.abs() > 1.0 - 1e-9 || bb.abs() > 1.0 - 1e-9);
        }
    }

    #[test]
    fn stitching_constant_faces_partitions_by_dominant_axis() {
        let mut faces = Vec::new();
        for (i, _) in FACES.iter().enumerate() {
            let shade = (i as f32 + 1.0) / 6.0;
            faces.push(Image::from_fn(8, 8, |_, _| [shade, 0.0, 0.0, 1.0]).unwrap());
        }
        let faces: [Image; 6] = faces.try_into().unwrap();
        let set = CubemapFaceSet::new(faces).unwrap();
        let erp = stitch_cubemap_to_erp(&set, 32, 64).unwrap();
        for r in 0..32 {
            for c in 0..64 {
                let dir = erp_pixel_to_ray_camera(r as f64, c as f64, 32, 64);
                let expect = (face_for_direction(&dir).index() as f32 + 1.0) / 6.0;
                assert_abs_diff_eq!(erp.image.pixel(r, c)[0], expect, epsilon = 1e-6);
                assert_abs_diff_eq!(erp.image.pixel(r, c)[3], 1.0, epsilon = 1e-6);
            }
        }
    }

    #[test]
    fn constant_panorama_extracts_constant_faces() {
        let erp = ErpImage::new(Image::from_fn(64, 32, |_, _| [0.3, 0.6, 0.9, 1.0]).unwrap());
        let cube = erp_to_cubemap(&erp, 16).unwrap();
        for face in FACES {
            for px in cube.face(face).data().chunks(4) {
                assert_abs_diff_eq!(px[0], 0.3, epsilon = 1e-6);
                assert_abs_diff_eq!(px[3], 1.0, epsilon = 1e-6);
            }
        }
    }

    #[test]
    fn hole_mask_follows_alpha_threshold() {
        let mut image = Image::new(4, 2).unwrap();
        image.set_pixel(0, 1, [0.0, 0.0, 0.0, 0.4]);
        image.set_pixel(1, 2, [0.0, 0.0, 0.0, 0.6]);
        let erp = ErpImage::new(image);
        let mask = erp.hole_mask(DEFAULT_ALPHA_MIN);
        assert!(mask[1]);
        assert!(!mask[4 + 2]);
    }

    #[test]
    fn seam_band_hugs_face_boundaries() {
        let mask = seam_band_mask(64, 128, 2);
        // Equator at the front-face center is far from every face edge.
        assert!(!mask[31 * 128 + 63]);
        // Longitude 45 deg on the equator sits on the front/right edge.
        let (_, c) = ray_to_erp_pixel_camera(&unit(Vector3::new(1.0, 0.0, 1.0)), 64, 128);
        assert!(mask[31 * 128 + c.round() as usize]);
    }

    proptest! {
        #[test]
        fn pixel_ray_round_trip(row in 0.0f64..63.0, col in -0.5f64..127.5) {
            // Stay away from the pole guard band where column collapses.
            prop_assume!(row > 1.0 && row < 62.0);
            let d = erp_pixel_to_ray_camera(row, col, 64, 128);
            prop_assert!((d.norm() - 1.0).abs() < 1e-12);
            let (r, c) = ray_to_erp_pixel_camera(&d, 64, 128);
            prop_assert!((r - row).abs() < 1e-9);
            let dc = (c - col).rem_euclid(128.0);
            prop_assert!(dc < 1e-9 || dc > 128.0 - 1e-9);
        }

        #[test]
        fn every_direction_projects_inside_its_face(
            x in -1.0f64..1.0, y in -1.0f64..1.0, z in -1.0f64..1.0,
        ) {
            let v = Vector3::new(x, y, z);
            prop_assume!(v.norm() > 1e-3);
            let d = unit(v);
            let face = face_for_direction(&d);
            let (a, b) = face_project(face, &d).expect("dominant face faces the ray");
            prop_assert!(a.abs() <= 1.0 + 1e-12);
            prop_assert!(b.abs() <= 1.0 + 1e-12);
        }
    }
}

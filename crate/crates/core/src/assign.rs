//! Hole-token plane assignment over the latent token grid.
//!
//! A panorama is tokenized into a coarse grid (one token per
//! `patch_size x patch_size` pixel patch). Tokens covering mostly
//! unobserved pixels are holes; the rest are observed and may carry the
//! plane id of their patch-center pixel. Two independent methods propose a
//! layout plane for every hole token:
//!
//! * geometric: cast the token-center ray and take the nearest layout
//!   plane, confident when the hit is close and clearly separated from the
//!   runner-up;
//! * boundary: find the nearest observed layout token within a band around
//!   the hole region, confident when it is close and the second-best plane
//!   is far.
//!
//! Their proposals are fused by weighted confidence voting per plane.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::erp::{erp_pixel_to_ray, CameraPose};
use crate::planes::{nearest_layout_plane, Plane};
use crate::spatial::KdTree2;

/// Default latent grid for a 1024x2048 panorama.
pub const DEFAULT_GRID_HEIGHT: usize = 64;
pub const DEFAULT_GRID_WIDTH: usize = 128;
pub const DEFAULT_PATCH_SIZE: usize = 16;

/// Default boundary-method scale: distances in token units.
pub const DEFAULT_SIGMA_D: f64 = 4.0;
/// Default boundary band half-width in tokens (Chebyshev).
pub const DEFAULT_BAND_WIDTH: usize = 3;
/// Division guard in the boundary margin term.
pub const DEFAULT_EPS: f64 = 1e-6;
/// Default fusion weights.
pub const DEFAULT_W_GEO: f64 = 0.5;
pub const DEFAULT_W_BND: f64 = 0.5;

/// Geometric-method scale derived from scene size.
pub fn default_sigma_l(room_diagonal: f64) -> f64 {
    room_diagonal / 4.0
}

#[derive(Debug, Error)]
pub enum AssignError {
    #[error("token grid dimensions must be nonzero")]
    EmptyGrid,
    #[error("pixel buffer length {got} does not match {want} ({height}x{width})")]
    ShapeMismatch { got: usize, want: usize, height: usize, width: usize },
    #[error("assignment needs at least one layout plane")]
    NoLayoutPlanes,
    #[error("boundary assignment needs at least one observed layout token near a hole")]
    NoBoundaryTokens,
    #[error("fusion weights must be finite, non-negative, and not both zero")]
    BadWeights,
    #[error("method proposals cover {got} tokens but the grid has {want}")]
    LengthMismatch { got: usize, want: usize },
    #[error("grid encoding invalid: {0}")]
    BadEncoding(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TokenStatus {
    Observed,
    Hole,
}

/// Coarse token grid with per-token observation status and plane ids.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentTokenGrid {
    height: usize,
    width: usize,
    patch_size: usize,
    status: Vec<TokenStatus>,
    plane_ids: Vec<Option<u32>>,
}

impl LatentTokenGrid {
    /// All-observed grid with no plane ids.
    pub fn new(height: usize, width: usize, patch_size: usize) -> Result<Self, AssignError> {
        if height == 0 || width == 0 || patch_size == 0 {
            return Err(AssignError::EmptyGrid);
        }
        Ok(Self {
            height,
            width,
            patch_size,
            status: vec![TokenStatus::Observed; height * width],
            plane_ids: vec![None; height * width],
        })
    }

    /// Builds the grid from pixel-level maps. A token becomes a hole when
    /// strictly more than half of its patch pixels are holes; observed
    /// tokens take the plane id of their patch-center pixel.
    pub fn from_pixel_maps(
        plane_map: &[Option<u32>],
        hole_mask: &[bool],
        height: usize,
        width: usize,
        patch_size: usize,
    ) -> Result<Self, AssignError> {
        let mut grid = Self::new(height, width, patch_size)?;
        let (ph, pw) = (height * patch_size, width * patch_size);
        let want = ph * pw;
        if plane_map.len() != want {
            return Err(AssignError::ShapeMismatch { got: plane_map.len(), want, height: ph, width: pw });
        }
        if hole_mask.len() != want {
            return Err(AssignError::ShapeMismatch { got: hole_mask.len(), want, height: ph, width: pw });
        }
        for tr in 0..height {
            for tc in 0..width {
                let mut holes = 0usize;
                for dr in 0..patch_size {
                    for dc in 0..patch_size {
                        let px = (tr * patch_size + dr) * pw + tc * patch_size + dc;
                        holes += hole_mask[px] as usize;
                    }
                }
                let t = tr * width + tc;
                if 2 * holes > patch_size * patch_size {
                    grid.status[t] = TokenStatus::Hole;
                } else {
                    let (pr, pc) = grid.center_pixel(t);
                    grid.plane_ids[t] = plane_map[pr * pw + pc];
                }
            }
        }
        Ok(grid)
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn patch_size(&self) -> usize {
        self.patch_size
    }

    pub fn len(&self) -> usize {
        self.status.len()
    }

    pub fn is_empty(&self) -> bool {
        self.status.is_empty()
    }

    pub fn status(&self, token: usize) -> TokenStatus {
        self.status[token]
    }

    pub fn plane_id(&self, token: usize) -> Option<u32> {
        self.plane_ids[token]
    }

    pub fn set_status(&mut self, token: usize, status: TokenStatus) {
        self.status[token] = status;
        if status == TokenStatus::Hole {
            self.plane_ids[token] = None;
        }
    }

    pub fn set_plane_id(&mut self, token: usize, id: Option<u32>) {
        self.plane_ids[token] = id;
    }

    pub fn token_pos(&self, token: usize) -> (usize, usize) {
        (token / self.width, token % self.width)
    }

    pub fn token_index(&self, row: usize, col: usize) -> usize {
        row * self.width + col
    }

    /// Pixel at the center of the token's patch.
    pub fn center_pixel(&self, token: usize) -> (usize, usize) {
        let (r, c) = self.token_pos(token);
        (r * self.patch_size + self.patch_size / 2, c * self.patch_size + self.patch_size / 2)
    }

    /// Pixel dimensions of the underlying panorama.
    pub fn pixel_dims(&self) -> (usize, usize) {
        (self.height * self.patch_size, self.width * self.patch_size)
    }

    pub fn hole_tokens(&self) -> Vec<usize> {
        (0..self.len()).filter(|&t| self.status[t] == TokenStatus::Hole).collect()
    }
}

#[derive(Serialize, Deserialize)]
struct GridRepr {
    height: usize,
    width: usize,
    patch_size: usize,
    /// One character per token: 'o' observed, 'h' hole.
    status: String,
    plane_ids: Vec<Option<u32>>,
}

impl Serialize for LatentTokenGrid {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let status: String = self
            .status
            .iter()
            .map(|s| if *s == TokenStatus::Hole { 'h' } else { 'o' })
            .collect();
        GridRepr {
            height: self.height,
            width: self.width,
            patch_size: self.patch_size,
            status,
            plane_ids: self.plane_ids.clone(),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for LatentTokenGrid {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        use serde::de::Error;
        let repr = GridRepr::deserialize(deserializer)?;
        let mut grid = LatentTokenGrid::new(repr.height, repr.width, repr.patch_size)
            .map_err(D::Error::custom)?;
        let want = repr.height * repr.width;
        if repr.status.len() != want || repr.plane_ids.len() != want {
            return Err(D::Error::custom(AssignError::BadEncoding(format!(
                "expected {want} tokens, got {} status chars and {} plane ids",
                repr.status.len(),
                repr.plane_ids.len()
            ))));
        }
        for (t, ch) in repr.status.chars().enumerate() {
            match ch {
                'o' => grid.status[t] = TokenStatus::Observed,
                'h' => grid.status[t] = TokenStatus::Hole,
                other => {
                    return Err(D::Error::custom(AssignError::BadEncoding(format!(
                        "status char {other:?} at token {t}"
                    ))))
                }
            }
        }
        for (t, id) in repr.plane_ids.into_iter().enumerate() {
            if grid.status[t] == TokenStatus::Observed {
                grid.plane_ids[t] = id;
            }
        }
        Ok(grid)
    }
}

/// One method's proposal for a hole token.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MethodAssignment {
    pub plane_id: u32,
    pub confidence: f64,
}

/// Geometric confidence: near hits score high, and a runner-up plane close
/// behind the winner erodes the score. A missing runner-up leaves the
/// margin factor at exactly 1.
pub fn geo_confidence(l_best: f64, l_second: Option<f64>, sigma_l: f64) -> f64 {
    let base = (-l_best / sigma_l).exp();
    let margin = match l_second {
        Some(l2) => 1.0 - (-(l2 - l_best) / sigma_l).exp(),
        None => 1.0,
    };
    (base * margin).clamp(0.0, 1.0)
}

/// Boundary confidence: near boundary tokens score high, scaled by the
/// relative gap to the second-best plane's nearest token. A missing
/// second-best plane leaves the margin factor at exactly 1.
pub fn bnd_confidence(d_best: f64, d_second: Option<f64>, sigma_d: f64, eps: f64) -> f64 {
    let base = (-d_best / sigma_d).exp();
    let margin = match d_second {
        Some(d2) => (d2 - d_best) / (d_best + eps),
        None => 1.0,
    };
    (base * margin).clamp(0.0, 1.0)
}

/// Geometric proposals: one entry per token, populated only for hole
/// tokens whose center ray hits a layout plane.
pub fn assign_geometric(
    grid: &LatentTokenGrid,
    pose: &CameraPose,
    planes: &[Plane],
    sigma_l: f64,
) -> Result<Vec<Option<MethodAssignment>>, AssignError> {
    if !planes.iter().any(|p| p.is_layout()) {
        return Err(AssignError::NoLayoutPlanes);
    }
    let (ph, pw) = grid.pixel_dims();
    let origin = pose.center();
    Ok(crate::par::map_indexed(grid.len(), |t| {
        if grid.status(t) != TokenStatus::Hole {
            return None;
        }
        let (pr, pc) = grid.center_pixel(t);
        let ray = erp_pixel_to_ray(pr as f64, pc as f64, ph, pw, pose);
        let (best, second) = nearest_layout_plane(&origin, &ray, planes)?;
        let conf = geo_confidence(best.distance, second.map(|s| s.distance), sigma_l);
        Some(MethodAssignment { plane_id: best.plane_id, confidence: conf })
    }))
}

/// Observed layout tokens within `band_width` (Chebyshev) of a hole token.
fn boundary_band(grid: &LatentTokenGrid, planes: &[Plane], band_width: usize) -> Vec<usize> {
    let layout_ids: Vec<u32> = planes.iter().filter(|p| p.is_layout()).map(|p| p.id).collect();
    let (h, w) = (grid.height(), grid.width());
    let b = band_width as isize;
    (0..grid.len())
        .filter(|&t| {
            if grid.status(t) != TokenStatus::Observed {
                return false;
            }
            match grid.plane_id(t) {
                Some(id) if layout_ids.contains(&id) => {}
                _ => return false,
            }
            let (r, c) = grid.token_pos(t);
            for dr in -b..=b {
                for dc in -b..=b {
                    let (rr, cc) = (r as isize + dr, c as isize + dc);
                    if rr < 0 || rr >= h as isize || cc < 0 || cc >= w as isize {
                        continue;
                    }
                    if grid.status(grid.token_index(rr as usize, cc as usize)) == TokenStatus::Hole
                    {
                        return true;
                    }
                }
            }
            false
        })
        .collect()
}

/// Boundary proposals: each hole token adopts the layout plane whose
/// banded observed tokens come closest in token coordinates. Distance ties
/// between planes resolve to the lower plane id.
pub fn assign_boundary(
    grid: &LatentTokenGrid,
    planes: &[Plane],
    band_width: usize,
    sigma_d: f64,
    eps: f64,
) -> Result<Vec<Option<MethodAssignment>>, AssignError> {
    if !planes.iter().any(|p| p.is_layout()) {
        return Err(AssignError::NoLayoutPlanes);
    }
    let band = boundary_band(grid, planes, band_width);
    if band.is_empty() {
        return Err(AssignError::NoBoundaryTokens);
    }
    let mut by_plane: BTreeMap<u32, Vec<[f64; 2]>> = BTreeMap::new();
    for &t in &band {
        let (r, c) = grid.token_pos(t);
        let id = grid.plane_id(t).expect("band tokens carry layout ids");
        by_plane.entry(id).or_default().push([r as f64, c as f64]);
    }
    let trees: Vec<(u32, KdTree2)> =
        by_plane.into_iter().map(|(id, pts)| (id, KdTree2::new(pts))).collect();

    Ok(crate::par::map_indexed(grid.len(), |t| {
        if grid.status(t) != TokenStatus::Hole {
            return None;
        }
        let (r, c) = grid.token_pos(t);
        let q = [r as f64, c as f64];
        let mut hits: Vec<(f64, u32)> = trees
            .iter()
            .filter_map(|(id, tree)| tree.nearest(q).map(|(_, d2)| (d2.sqrt(), *id)))
            .collect();
        hits.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let (d_best, id) = *hits.first()?;
        let d_second = hits.get(1).map(|&(d, _)| d);
        Some(MethodAssignment {
            plane_id: id,
            confidence: bnd_confidence(d_best, d_second, sigma_d, eps),
        })
    }))
}

/// Fused assignment of one hole token.
#[derive(Debug, Clone, PartialEq)]
pub struct Assignment {
    pub token_index: usize,
    /// Winning plane, absent when neither method proposed one.
    pub plane_id: Option<u32>,
    /// Weighted vote total of the winning plane (0 when unassigned).
    pub confidence: f64,
    pub geo: Option<MethodAssignment>,
    pub bnd: Option<MethodAssignment>,
}

/// Combines both methods' proposals by weighted confidence voting: each
/// method adds `weight * confidence` to its proposed plane and the plane
/// with the highest total wins, ties to the lower plane id. Returns one
/// entry per hole token.
pub fn fuse_assignments(
    grid: &LatentTokenGrid,
    geo: &[Option<MethodAssignment>],
    bnd: &[Option<MethodAssignment>],
    w_geo: f64,
    w_bnd: f64,
) -> Result<Vec<Assignment>, AssignError> {
    if !(w_geo.is_finite() && w_bnd.is_finite()) || w_geo < 0.0 || w_bnd < 0.0 || w_geo + w_bnd == 0.0
    {
        return Err(AssignError::BadWeights);
    }
    for method in [geo, bnd] {
        if method.len() != grid.len() {
            return Err(AssignError::LengthMismatch { got: method.len(), want: grid.len() });
        }
    }
    Ok(grid
        .hole_tokens()
        .into_iter()
        .map(|t| {
            let mut votes: BTreeMap<u32, f64> = BTreeMap::new();
            if let Some(m) = geo[t] {
                *votes.entry(m.plane_id).or_insert(0.0) += w_geo * m.confidence;
            }
            if let Some(m) = bnd[t] {
                *votes.entry(m.plane_id).or_insert(0.0) += w_bnd * m.confidence;
            }
            let mut winner: Option<(u32, f64)> = None;
            for (&id, &score) in &votes {
                // BTreeMap iterates ids ascending, so a strict comparison
                // keeps the lowest id on score ties.
                if winner.map_or(true, |(_, s)| score > s) {
                    winner = Some((id, score));
                }
            }
            Assignment {
                token_index: t,
                plane_id: winner.map(|(id, _)| id),
                confidence: winner.map_or(0.0, |(_, s)| s),
                geo: geo[t],
                bnd: bnd[t],
            }
        })
        .collect())
}

/// Flat serialized form of an [`Assignment`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssignmentRecord {
    pub index: usize,
    pub plane_id: Option<u32>,
    pub confidence: f64,
    pub c_geo: Option<f64>,
    pub c_bnd: Option<f64>,
}

impl From<&Assignment> for AssignmentRecord {
    fn from(a: &Assignment) -> Self {
        Self {
            index: a.token_index,
            plane_id: a.plane_id,
            confidence: a.confidence,
            c_geo: a.geo.map(|m| m.confidence),
            c_bnd: a.bnd.map(|m| m.confidence),
        }
    }
}

/// Per-token confidence raster: winning confidence at assigned hole
/// tokens, zero elsewhere.
pub fn confidence_map(grid: &LatentTokenGrid, assignments: &[Assignment]) -> Vec<f64> {
    let mut map = vec![0.0; grid.len()];
    for a in assignments {
        if a.plane_id.is_some() {
            map[a.token_index] = a.confidence;
        }
    }
    map
}

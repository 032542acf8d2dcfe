//! Layout-anchored steering of attention states.
//!
//! For every layout plane g the mean key vector of its observed tokens
//! (the plane centroid) is added, scaled by lambda, to the queries of the
//! plane's hole tokens and to the keys of its observed tokens. Centroids
//! are computed once per state from the pre-steering keys and both shifts
//! apply simultaneously, so within a layer no shift sees another shift's
//! output. Steering is gated to a layer set and to denoising timesteps
//! strictly above a threshold; outside the gate, or at lambda 0, the
//! transform is the bit-for-bit identity.
//!
//! States may include trailing non-image tokens (token indices at or above
//! `n_image`); those rows are never steered.

use std::collections::{BTreeMap, BTreeSet, HashSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::assign::{Assignment, LatentTokenGrid, TokenStatus};
use crate::planes::Plane;

#[derive(Debug, Error)]
pub enum SteerError {
    #[error("attention state malformed: {0}")]
    BadShape(String),
    #[error("token {token} outside the image token range 0..{n_image}")]
    TokenOutOfRange { token: usize, n_image: usize },
    #[error("token {token} appears in more than one plane set")]
    OverlappingSets { token: usize },
    #[error("plane id {0} appears in more than one group")]
    DuplicatePlane(u32),
    #[error("token sets inconsistent with the grid: {0}")]
    Inconsistent(String),
}

/// Per-head query/key matrices of one transformer layer.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionState {
    layer: usize,
    n_tokens: usize,
    n_image: usize,
    head_dim: usize,
    q: Vec<Vec<f32>>,
    k: Vec<Vec<f32>>,
}

impl AttentionState {
    /// Builds a state from per-head row-major buffers (`n_tokens x
    /// head_dim` each).
    pub fn from_parts(
        layer: usize,
        n_image: usize,
        head_dim: usize,
        q: Vec<Vec<f32>>,
        k: Vec<Vec<f32>>,
    ) -> Result<Self, SteerError> {
        if q.is_empty() || q.len() != k.len() {
            return Err(SteerError::BadShape(format!(
                "need matching nonempty Q/K head lists, got {} and {}",
                q.len(),
                k.len()
            )));
        }
        if head_dim == 0 {
            return Err(SteerError::BadShape("head_dim must be nonzero".into()));
        }
        let len = q[0].len();
        if len == 0 || len % head_dim != 0 {
            return Err(SteerError::BadShape(format!(
                "head buffer length {len} is not a nonzero multiple of head_dim {head_dim}"
            )));
        }
        for buf in q.iter().chain(k.iter()) {
            if buf.len() != len {
                return Err(SteerError::BadShape("heads differ in buffer length".into()));
            }
        }
        let n_tokens = len / head_dim;
        if n_image > n_tokens {
            return Err(SteerError::BadShape(format!(
                "n_image {n_image} exceeds token count {n_tokens}"
            )));
        }
        Ok(Self { layer, n_tokens, n_image, head_dim, q, k })
    }

    /// Rebuilds a state from `[heads, n_tokens, head_dim]` flat tensors.
    pub fn from_flat(
        layer: usize,
        n_image: usize,
        shape: &[usize],
        q: &[f32],
        k: &[f32],
    ) -> Result<Self, SteerError> {
        let [heads, n, d]: [usize; 3] = shape
            .try_into()
            .map_err(|_| SteerError::BadShape(format!("expected 3D shape, got {shape:?}")))?;
        let want = heads * n * d;
        if q.len() != want || k.len() != want {
            return Err(SteerError::BadShape(format!(
                "flat buffers hold {} and {} values, shape {shape:?} needs {want}",
                q.len(),
                k.len()
            )));
        }
        let split = |buf: &[f32]| buf.chunks(n * d).map(|c| c.to_vec()).collect();
        Self::from_parts(layer, n_image, d, split(q), split(k))
    }

    pub fn layer(&self) -> usize {
        self.layer
    }

    pub fn heads(&self) -> usize {
        self.q.len()
    }

    pub fn tokens(&self) -> usize {
        self.n_tokens
    }

    pub fn image_tokens(&self) -> usize {
        self.n_image
    }

    pub fn head_dim(&self) -> usize {
        self.head_dim
    }

    pub fn q_row(&self, head: usize, token: usize) -> &[f32] {
        &self.q[head][token * self.head_dim..(token + 1) * self.head_dim]
    }

    pub fn k_row(&self, head: usize, token: usize) -> &[f32] {
        &self.k[head][token * self.head_dim..(token + 1) * self.head_dim]
    }

    pub fn q_row_mut(&mut self, head: usize, token: usize) -> &mut [f32] {
        &mut self.q[head][token * self.head_dim..(token + 1) * self.head_dim]
    }

    pub fn k_row_mut(&mut self, head: usize, token: usize) -> &mut [f32] {
        &mut self.k[head][token * self.head_dim..(token + 1) * self.head_dim]
    }

    /// Flat `[heads, n_tokens, head_dim]` copy of Q.
    pub fn flat_q(&self) -> Vec<f32> {
        self.q.concat()
    }

    /// Flat `[heads, n_tokens, head_dim]` copy of K.
    pub fn flat_k(&self) -> Vec<f32> {
        self.k.concat()
    }

    /// Bitwise equality over every Q/K value (distinguishes 0.0 from -0.0
    /// and treats equal NaN payloads as equal).
    pub fn bits_eq(&self, other: &Self) -> bool {
        if self.layer != other.layer
            || self.n_tokens != other.n_tokens
            || self.n_image != other.n_image
            || self.head_dim != other.head_dim
            || self.q.len() != other.q.len()
        {
            return false;
        }
        let eq = |a: &[Vec<f32>], b: &[Vec<f32>]| {
            a.iter().zip(b).all(|(x, y)| {
                x.iter().zip(y.iter()).all(|(u, v)| u.to_bits() == v.to_bits())
            })
        };
        eq(&self.q, &other.q) && eq(&self.k, &other.k)
    }
}

/// Which side of the attention state receives the shift.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SteerMode {
    Both,
    QOnly,
    KOnly,
}

/// Scalar steering policy; the plane token sets travel separately.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SteeringConfig {
    #[serde(default = "default_lambda")]
    pub lambda: f64,
    #[serde(default = "default_layers")]
    pub layers: BTreeSet<usize>,
    #[serde(default = "default_tau")]
    pub tau: f64,
    #[serde(default = "default_confidence_floor")]
    pub confidence_floor: f64,
    #[serde(default = "default_mode")]
    pub mode: SteerMode,
}

fn default_lambda() -> f64 {
    0.4
}

fn default_layers() -> BTreeSet<usize> {
    (10..=37).collect()
}

fn default_tau() -> f64 {
    0.5
}

fn default_confidence_floor() -> f64 {
    0.05
}

fn default_mode() -> SteerMode {
    SteerMode::Both
}

impl Default for SteeringConfig {
    fn default() -> Self {
        Self {
            lambda: default_lambda(),
            layers: default_layers(),
            tau: default_tau(),
            confidence_floor: default_confidence_floor(),
            mode: default_mode(),
        }
    }
}

/// True when steering is active: the layer is in the steered set and the
/// timestep strictly exceeds the threshold.
pub fn gate(cfg: &SteeringConfig, layer: usize, t: f64) -> bool {
    cfg.layers.contains(&layer) && t > cfg.tau
}

/// One plane's token sets: observed members and assigned holes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlaneGroup {
    pub plane_id: u32,
    pub observed: Vec<usize>,
    pub holes: Vec<usize>,
}

/// Disjoint per-plane token sets, ordered by plane id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlaneTokenSets {
    groups: Vec<PlaneGroup>,
}

impl PlaneTokenSets {
    /// Validates disjointness of every listed token across all groups and
    /// uniqueness of plane ids.
    pub fn from_groups(mut groups: Vec<PlaneGroup>) -> Result<Self, SteerError> {
        groups.sort_by_key(|g| g.plane_id);
        let mut ids = BTreeSet::new();
        let mut observed_seen = HashSet::new();
        let mut hole_seen = HashSet::new();
        for g in &groups {
            if !ids.insert(g.plane_id) {
                return Err(SteerError::DuplicatePlane(g.plane_id));
            }
            for &t in &g.observed {
                if !observed_seen.insert(t) {
                    return Err(SteerError::OverlappingSets { token: t });
                }
            }
            for &t in &g.holes {
                if !hole_seen.insert(t) {
                    return Err(SteerError::OverlappingSets { token: t });
                }
            }
        }
        if let Some(&t) = observed_seen.intersection(&hole_seen).next() {
            return Err(SteerError::OverlappingSets { token: t });
        }
        Ok(Self { groups })
    }

    /// Collects the sets from the token grid and fused assignments:
    /// observed tokens carrying a layout plane id join that plane's O set;
    /// hole tokens assigned to a layout plane with confidence at or above
    /// the floor join its H set.
    pub fn build(
        grid: &LatentTokenGrid,
        assignments: &[Assignment],
        planes: &[Plane],
        confidence_floor: f64,
    ) -> Result<Self, SteerError> {
        let layout: BTreeSet<u32> = planes.iter().filter(|p| p.is_layout()).map(|p| p.id).collect();
        let mut map: BTreeMap<u32, PlaneGroup> = BTreeMap::new();
        for t in 0..grid.len() {
            if grid.status(t) != TokenStatus::Observed {
                continue;
            }
            if let Some(id) = grid.plane_id(t) {
                if layout.contains(&id) {
                    map.entry(id)
                        .or_insert_with(|| PlaneGroup { plane_id: id, observed: vec![], holes: vec![] })
                        .observed
                        .push(t);
                }
            }
        }
        for a in assignments {
            let Some(id) = a.plane_id else { continue };
            if !layout.contains(&id) || a.confidence < confidence_floor {
                continue;
            }
            if a.token_index >= grid.len() || grid.status(a.token_index) != TokenStatus::Hole {
                return Err(SteerError::Inconsistent(format!(
                    "assignment for token {} does not reference a hole token",
                    a.token_index
                )));
            }
            map.entry(id)
                .or_insert_with(|| PlaneGroup { plane_id: id, observed: vec![], holes: vec![] })
                .holes
                .push(a.token_index);
        }
        Self::from_groups(map.into_values().collect())
    }

    pub fn groups(&self) -> &[PlaneGroup] {
        &self.groups
    }

    /// Plane group containing `token` in its hole set.
    pub fn hole_group(&self, token: usize) -> Option<&PlaneGroup> {
        self.groups.iter().find(|g| g.holes.contains(&token))
    }
}

/// Mean of the listed key rows, accumulated in f64. `None` for an empty
/// token list.
pub fn plane_centroid(state: &AttentionState, head: usize, tokens: &[usize]) -> Option<Vec<f64>> {
    if tokens.is_empty() {
        return None;
    }
    let d = state.head_dim();
    let mut sum = vec![0.0f64; d];
    for &t in tokens {
        for (acc, &v) in sum.iter_mut().zip(state.k_row(head, t)) {
            *acc += v as f64;
        }
    }
    for v in &mut sum {
        *v /= tokens.len() as f64;
    }
    Some(sum)
}

fn check_token_range(state: &AttentionState, sets: &PlaneTokenSets) -> Result<(), SteerError> {
    let n_image = state.image_tokens();
    for g in sets.groups() {
        for &t in g.observed.iter().chain(g.holes.iter()) {
            if t >= n_image {
                return Err(SteerError::TokenOutOfRange { token: t, n_image });
            }
        }
    }
    Ok(())
}

fn steer_rows(state: &AttentionState, lambda: f64, sets: &PlaneTokenSets, mode: SteerMode) -> AttentionState {
    let d = state.head_dim();
    let heads = state.heads();
    let shifted: Vec<(Vec<f32>, Vec<f32>)> = crate::par::map_indexed(heads, |head| {
        let mut q = state.q[head].clone();
        let mut k = state.k[head].clone();
        for group in sets.groups() {
            // Planes with no observed tokens have no centroid: skipped.
            let Some(centroid) = plane_centroid(state, head, &group.observed) else { continue };
            if mode != SteerMode::KOnly {
                for &i in &group.holes {
                    for (slot, c) in q[i * d..(i + 1) * d].iter_mut().zip(&centroid) {
                        *slot = (*slot as f64 + lambda * c) as f32;
                    }
                }
            }
            if mode != SteerMode::QOnly {
                for &j in &group.observed {
                    for (slot, c) in k[j * d..(j + 1) * d].iter_mut().zip(&centroid) {
                        *slot = (*slot as f64 + lambda * c) as f32;
                    }
                }
            }
        }
        (q, k)
    });
    let (q, k) = shifted.into_iter().unzip();
    AttentionState {
        layer: state.layer,
        n_tokens: state.n_tokens,
        n_image: state.n_image,
        head_dim: state.head_dim,
        q,
        k,
    }
}

/// Applies one steering variant regardless of the configured mode, still
/// honoring the gate and token-range checks.
pub fn steer_variant(
    state: &AttentionState,
    cfg: &SteeringConfig,
    sets: &PlaneTokenSets,
    t: f64,
    mode: SteerMode,
) -> Result<AttentionState, SteerError> {
    check_token_range(state, sets)?;
    if !gate(cfg, state.layer(), t) || cfg.lambda == 0.0 {
        return Ok(state.clone());
    }
    Ok(steer_rows(state, cfg.lambda, sets, mode))
}

/// The full steering transform under the configured mode.
pub fn apply_steering(
    state: &AttentionState,
    cfg: &SteeringConfig,
    sets: &PlaneTokenSets,
    t: f64,
) -> Result<AttentionState, SteerError> {
    steer_variant(state, cfg, sets, t, cfg.mode)
}

/// Mean over sampled hole tokens and heads of the query's alignment with
/// its own plane centroid relative to a randomly chosen other plane's
/// centroid. `None` when fewer than two planes have observed tokens or no
/// sampled token belongs to a plane.
pub fn affinity_ratio(
    state: &AttentionState,
    sample: &[usize],
    sets: &PlaneTokenSets,
    eps: f64,
    seed: u64,
) -> Option<f64> {
    let eligible: Vec<usize> = (0..sets.groups().len())
        .filter(|&gi| !sets.groups()[gi].observed.is_empty())
        .collect();
    if eligible.len() < 2 {
        return None;
    }
    let heads = state.heads();
    let centroids: Vec<Vec<Option<Vec<f64>>>> = (0..heads)
        .map(|h| sets.groups().iter().map(|g| plane_centroid(state, h, &g.observed)).collect())
        .collect();
    let group_of = |token: usize| {
        sets.groups()
            .iter()
            .position(|g| g.holes.contains(&token))
            .filter(|gi| !sets.groups()[*gi].observed.is_empty())
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut total = 0.0f64;
    let mut terms = 0usize;
    for &token in sample {
        let Some(own) = group_of(token) else { continue };
        let others: Vec<usize> = eligible.iter().copied().filter(|&gi| gi != own).collect();
        let other = others[rng.random_range(0..others.len())];
        for (h, per_group) in centroids.iter().enumerate() {
            let same_c = per_group[own].as_ref().expect("own group has observed tokens");
            let other_c = per_group[other].as_ref().expect("eligible group has observed tokens");
            let q = state.q_row(h, token);
            let dot = |c: &[f64]| -> f64 {
                q.iter().zip(c).map(|(&qv, &cv)| qv as f64 * cv).sum()
            };
            total += dot(same_c) / (dot(other_c) + eps);
            terms += 1;
        }
    }
    (terms > 0).then(|| total / terms as f64)
}

/// Softmax attention mass of one query over each plane's observed tokens.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MassReport {
    /// `(plane_id, mass)` per group, ordered by plane id.
    pub per_plane: Vec<(u32, f64)>,
    /// Mass on every token outside all observed sets.
    pub rest: f64,
}

/// Computes `softmax(q_token . K / sqrt(d))` over all tokens and sums the
/// weights over each plane's observed set. Masses plus `rest` total 1.
pub fn attention_mass_report(
    state: &AttentionState,
    head: usize,
    token: usize,
    sets: &PlaneTokenSets,
) -> MassReport {
    let d = state.head_dim();
    let scale = 1.0 / (d as f64).sqrt();
    let q = state.q_row(head, token);
    let logits: Vec<f64> = (0..state.tokens())
        .map(|j| {
            let k = state.k_row(head, j);
            q.iter().zip(k).map(|(&a, &b)| a as f64 * b as f64).sum::<f64>() * scale
        })
        .collect();
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let weights: Vec<f64> = logits.iter().map(|&l| (l - max).exp()).collect();
    let z: f64 = weights.iter().sum();
    let mut rest = 1.0;
    let per_plane: Vec<(u32, f64)> = sets
        .groups()
        .iter()
        .map(|g| {
            let mass: f64 = g.observed.iter().map(|&j| weights[j] / z).sum();
            rest -= mass;
            (g.plane_id, mass)
        })
        .collect();
    MassReport { per_plane, rest }
}

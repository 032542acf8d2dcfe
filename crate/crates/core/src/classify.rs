//! Plane labeling through a vision-language client.
//!
//! Each candidate plane is shown to the client as the source view with the
//! plane region lightly highlighted, its contour tinted red, and a numeric
//! id drawn at the centroid of the largest mask component. The client
//! answers a fixed three-step prompt; the final keyword in its response is
//! parsed out and per-view keywords are majority-voted into a
//! layout / non-layout verdict. Views whose mask bounding box is smaller
//! than 32x32 pixels in either dimension are never queried.
//!
//! Transport is pluggable through [`VlmClient`]; [`FixtureClient`] replays
//! recorded transcripts keyed by a request hash so tests and offline runs
//! need no network.

use std::collections::{BTreeMap, HashMap};
use std::sync::atomic::{AtomicUsize, Ordering};

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::img::Image;
use crate::planes::{Plane, PlaneLabel};

/// Minimum mask bounding-box side (pixels) for a view to be queried.
pub const MIN_VIEW_BBOX: usize = 32;

/// Maximum tokens the client may generate per response.
pub const MAX_RESPONSE_TOKENS: u32 = 200;

const PROMPT_TEMPLATE: &str = "Look at the region outlined in red and marked '{id}' in this indoor room photo.\nThink step by step:\n1. What does this region look like?\n2. Is this region located on a wall, floor, ceiling or some other surface?\n3. Give your final answer as a single word: wall, floor, ceiling, bed, table, shelf, cabinet, window, door, or other.";

#[derive(Debug, Error)]
pub enum VlmError {
    #[error("vlm transport failure: {0}")]
    Transport(String),
    #[error("no fixture response recorded for request {hash}")]
    MissingFixture { hash: String },
}

#[derive(Debug, Error)]
pub enum ClassifyError {
    #[error("plane mask is empty")]
    EmptyMask,
    #[error("mask has {got} entries but the image has {want} pixels")]
    MaskShape { got: usize, want: usize },
    #[error(transparent)]
    Vlm(#[from] VlmError),
    #[error(transparent)]
    Io(#[from] crate::io::IoError),
}

/// Surface keywords the client may answer with.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SurfaceKeyword {
    Wall,
    Floor,
    Ceiling,
    Bed,
    Table,
    Shelf,
    Cabinet,
    Window,
    Door,
    Other,
}

impl SurfaceKeyword {
    pub const ALL: [SurfaceKeyword; 10] = [
        SurfaceKeyword::Wall,
        SurfaceKeyword::Floor,
        SurfaceKeyword::Ceiling,
        SurfaceKeyword::Bed,
        SurfaceKeyword::Table,
        SurfaceKeyword::Shelf,
        SurfaceKeyword::Cabinet,
        SurfaceKeyword::Window,
        SurfaceKeyword::Door,
        SurfaceKeyword::Other,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            SurfaceKeyword::Wall => "wall",
            SurfaceKeyword::Floor => "floor",
            SurfaceKeyword::Ceiling => "ceiling",
            SurfaceKeyword::Bed => "bed",
            SurfaceKeyword::Table => "table",
            SurfaceKeyword::Shelf => "shelf",
            SurfaceKeyword::Cabinet => "cabinet",
            SurfaceKeyword::Window => "window",
            SurfaceKeyword::Door => "door",
            SurfaceKeyword::Other => "other",
        }
    }

    fn from_str_lower(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.as_str() == s)
    }

    /// Wall, floor, and ceiling anchor the room layout.
    pub fn is_layout(self) -> bool {
        matches!(self, SurfaceKeyword::Wall | SurfaceKeyword::Floor | SurfaceKeyword::Ceiling)
    }
}

/// The fixed classification prompt with the plane id substituted.
pub fn build_prompt(plane_id: u32) -> String {
    PROMPT_TEMPLATE.replace("{id}", &plane_id.to_string())
}

/// Keyword whose last occurrence in `text` is rightmost. Matching is
/// case-insensitive with word boundaries, so e.g. "wallpaper" never
/// matches "wall". `None` when no keyword appears.
pub fn parse_response(text: &str) -> Option<SurfaceKeyword> {
    use std::sync::OnceLock;
    static RE: OnceLock<regex::Regex> = OnceLock::new();
    let re = RE.get_or_init(|| {
        regex::Regex::new(
            r"(?i)\b(wall|floor|ceiling|bed|table|shelf|cabinet|window|door|other)\b",
        )
        .expect("keyword pattern compiles")
    });
    let m = re.find_iter(text).last()?;
    SurfaceKeyword::from_str_lower(&m.as_str().to_lowercase())
}

/// Majority vote over per-view keywords. A unique most-frequent keyword
/// decides the label (layout iff it names a layout surface); ties and
/// empty input fall back to non-layout with no semantic.
pub fn vote(keywords: &[SurfaceKeyword]) -> (PlaneLabel, Option<SurfaceKeyword>) {
    let mut counts: BTreeMap<SurfaceKeyword, usize> = BTreeMap::new();
    for &k in keywords {
        *counts.entry(k).or_insert(0) += 1;
    }
    let Some(&max) = counts.values().max() else {
        return (PlaneLabel::NonLayout, None);
    };
    let top: Vec<SurfaceKeyword> =
        counts.iter().filter(|(_, &c)| c == max).map(|(&k, _)| k).collect();
    if top.len() != 1 {
        return (PlaneLabel::NonLayout, None);
    }
    let winner = top[0];
    let label = if winner.is_layout() { PlaneLabel::Layout } else { PlaneLabel::NonLayout };
    (label, Some(winner))
}

/// One request to the vision-language service.
#[derive(Debug, Clone)]
pub struct VlmRequest {
    pub prompt: String,
    pub image_png: Vec<u8>,
    pub max_tokens: u32,
}

/// Content hash identifying a request in fixture transcripts.
pub fn request_hash(request: &VlmRequest) -> String {
    let mut bytes = Vec::with_capacity(request.prompt.len() + 1 + request.image_png.len());
    bytes.extend_from_slice(request.prompt.as_bytes());
    bytes.push(0);
    bytes.extend_from_slice(&request.image_png);
    crate::io::sha256_bytes(&bytes)
}

/// Transport to a vision-language service.
pub trait VlmClient {
    fn query(&self, request: &VlmRequest) -> Result<String, VlmError>;
}

/// Replays recorded responses keyed by [`request_hash`].
pub struct FixtureClient {
    responses: HashMap<String, String>,
    queries: AtomicUsize,
}

impl FixtureClient {
    pub fn new(responses: HashMap<String, String>) -> Self {
        Self { responses, queries: AtomicUsize::new(0) }
    }

    /// Number of queries issued so far.
    pub fn query_count(&self) -> usize {
        self.queries.load(Ordering::SeqCst)
    }
}

impl VlmClient for FixtureClient {
    fn query(&self, request: &VlmRequest) -> Result<String, VlmError> {
        self.queries.fetch_add(1, Ordering::SeqCst);
        let hash = request_hash(request);
        self.responses
            .get(&hash)
            .cloned()
            .ok_or(VlmError::MissingFixture { hash })
    }
}

/// One observation of a plane: a source view plus the plane's pixel mask.
#[derive(Debug, Clone)]
pub struct PlaneView {
    pub image: Image,
    /// Row-major, true where the pixel belongs to the plane.
    pub mask: Vec<bool>,
}

/// Inclusive pixel bounding box.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MaskBbox {
    pub min_row: usize,
    pub min_col: usize,
    pub max_row: usize,
    pub max_col: usize,
}

impl MaskBbox {
    pub fn width(&self) -> usize {
        self.max_col - self.min_col + 1
    }

    pub fn height(&self) -> usize {
        self.max_row - self.min_row + 1
    }
}

/// Bounding box of the true cells, or `None` for an empty mask.
pub fn mask_bbox(mask: &[bool], width: usize) -> Option<MaskBbox> {
    let mut bbox: Option<MaskBbox> = None;
    for (i, &m) in mask.iter().enumerate() {
        if !m {
            continue;
        }
        let (r, c) = (i / width, i % width);
        bbox = Some(match bbox {
            None => MaskBbox { min_row: r, min_col: c, max_row: r, max_col: c },
            Some(b) => MaskBbox {
                min_row: b.min_row.min(r),
                min_col: b.min_col.min(c),
                max_row: b.max_row.max(r),
                max_col: b.max_col.max(c),
            },
        });
    }
    bbox
}

/// Centroid (row, col) of the largest 4-connected mask component.
pub fn largest_component_centroid(mask: &[bool], width: usize) -> Option<(f64, f64)> {
    let height = mask.len() / width;
    let mut seen = vec![false; mask.len()];
    let mut best: Option<(usize, f64, f64)> = None;
    for start in 0..mask.len() {
        if !mask[start] || seen[start] {
            continue;
        }
        let mut stack = vec![start];
        seen[start] = true;
        let (mut count, mut sum_r, mut sum_c) = (0usize, 0.0f64, 0.0f64);
        while let Some(i) = stack.pop() {
            count += 1;
            let (r, c) = (i / width, i % width);
            sum_r += r as f64;
            sum_c += c as f64;
            let mut push = |j: usize| {
                if mask[j] && !seen[j] {
                    seen[j] = true;
                    stack.push(j);
                }
            };
            if r > 0 {
                push(i - width);
            }
            if r + 1 < height {
                push(i + width);
            }
            if c > 0 {
                push(i - 1);
            }
            if c + 1 < width {
                push(i + 1);
            }
        }
        if best.map_or(true, |(bc, _, _)| count > bc) {
            best = Some((count, sum_r / count as f64, sum_c / count as f64));
        }
    }
    best.map(|(_, r, c)| (r, c))
}

const DIGIT_GLYPHS: [[u8; 5]; 10] = [
    [0b111, 0b101, 0b101, 0b101, 0b111],
    [0b010, 0b110, 0b010, 0b010, 0b111],
    [0b111, 0b001, 0b111, 0b100, 0b111],
    [0b111, 0b001, 0b111, 0b001, 0b111],
    [0b101, 0b101, 0b111, 0b001, 0b001],
    [0b111, 0b100, 0b111, 0b001, 0b111],
    [0b111, 0b100, 0b111, 0b101, 0b111],
    [0b111, 0b001, 0b010, 0b010, 0b010],
    [0b111, 0b101, 0b111, 0b101, 0b111],
    [0b111, 0b101, 0b111, 0b001, 0b111],
];

fn draw_digits(image: &mut Image, text: &str, center: (f64, f64), scale: usize) {
    let glyph_w = 3 * scale + scale; // glyph plus spacing
    let total_w = text.len() * glyph_w - scale;
    let total_h = 5 * scale;
    let top = (center.0 - total_h as f64 / 2.0).round().max(0.0) as usize;
    let left = (center.1 - total_w as f64 / 2.0).round().max(0.0) as usize;
    for (di, ch) in text.chars().enumerate() {
        let Some(d) = ch.to_digit(10) else { continue };
        let glyph = DIGIT_GLYPHS[d as usize];
        for (gr, bits) in glyph.iter().enumerate() {
            for gc in 0..3 {
                if bits & (0b100 >> gc) == 0 {
                    continue;
                }
                for sr in 0..scale {
                    for sc in 0..scale {
                        let r = top + gr * scale + sr;
                        let c = left + di * glyph_w + gc * scale + sc;
                        if r < image.height() && c < image.width() {
                            image.set_pixel(r, c, [1.0, 1.0, 1.0, 1.0]);
                        }
                    }
                }
            }
        }
    }
}

/// Renders the classification image: plane interior lightly tinted red,
/// contour pixels drawn solid red, and the plane id printed in white at
/// the centroid of the largest mask component.
pub fn render_highlight(image: &Image, mask: &[bool], plane_id: u32) -> Result<Image, ClassifyError> {
    let want = image.width() * image.height();
    if mask.len() != want {
        return Err(ClassifyError::MaskShape { got: mask.len(), want });
    }
    if !mask.iter().any(|&m| m) {
        return Err(ClassifyError::EmptyMask);
    }
    let (w, h) = (image.width(), image.height());
    let mut out = image.clone();
    for r in 0..h {
        for c in 0..w {
            let i = r * w + c;
            if !mask[i] {
                continue;
            }
            let on_edge = r == 0 || r + 1 == h || c == 0 || c + 1 == w;
            let boundary = on_edge
                || !mask[i - w]
                || !mask[i + w]
                || !mask[i - 1]
                || !mask[i + 1];
            let px = image.pixel(r, c);
            let tinted = if boundary {
                [1.0, 0.0, 0.0, 1.0]
            } else {
                [
                    0.75 * px[0] + 0.25,
                    0.75 * px[1],
                    0.75 * px[2],
                    px[3],
                ]
            };
            out.set_pixel(r, c, tinted);
        }
    }
    let centroid = largest_component_centroid(mask, w).expect("mask verified nonempty");
    draw_digits(&mut out, &plane_id.to_string(), centroid, 2);
    Ok(out)
}

/// A plane's verdict with the per-query parse results that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassificationVerdict {
    pub plane_id: u32,
    /// Parsed keyword per issued query, `None` for unparseable responses.
    pub keywords: Vec<Option<SurfaceKeyword>>,
    pub label: PlaneLabel,
    pub semantic: Option<SurfaceKeyword>,
}

/// Pure protocol core: applies the bbox rule to pre-collected responses.
/// `responses[i]` pairs with `bbox_sizes[i]` as (width, height); views
/// failing the 32x32 rule are excluded from the vote.
pub fn classify_plane(
    plane_id: u32,
    responses: &[&str],
    bbox_sizes: &[(usize, usize)],
) -> ClassificationVerdict {
    let keywords: Vec<Option<SurfaceKeyword>> = responses
        .iter()
        .zip(bbox_sizes)
        .filter(|(_, &(w, h))| w >= MIN_VIEW_BBOX && h >= MIN_VIEW_BBOX)
        .map(|(text, _)| parse_response(text))
        .collect();
    let parsed: Vec<SurfaceKeyword> = keywords.iter().flatten().copied().collect();
    let (label, semantic) = vote(&parsed);
    ClassificationVerdict { plane_id, keywords, label, semantic }
}

/// Full client-driven classification of one plane across its views.
/// Views with an empty mask or a bounding box under 32x32 are skipped
/// without issuing a query; transport errors abort the plane.
pub fn classify_with_client(
    client: &dyn VlmClient,
    plane_id: u32,
    views: &[PlaneView],
) -> Result<ClassificationVerdict, ClassifyError> {
    let prompt = build_prompt(plane_id);
    let mut keywords = Vec::new();
    for view in views {
        let want = view.image.width() * view.image.height();
        if view.mask.len() != want {
            return Err(ClassifyError::MaskShape { got: view.mask.len(), want });
        }
        let Some(bbox) = mask_bbox(&view.mask, view.image.width()) else { continue };
        if bbox.width() < MIN_VIEW_BBOX || bbox.height() < MIN_VIEW_BBOX {
            continue;
        }
        let annotated = render_highlight(&view.image, &view.mask, plane_id)?;
        let request = VlmRequest {
            prompt: prompt.clone(),
            image_png: crate::io::encode_png_bytes(&annotated)?,
            max_tokens: MAX_RESPONSE_TOKENS,
        };
        keywords.push(parse_response(&client.query(&request)?));
    }
    let parsed: Vec<SurfaceKeyword> = keywords.iter().flatten().copied().collect();
    let (label, semantic) = vote(&parsed);
    Ok(ClassificationVerdict { plane_id, keywords, label, semantic })
}

/// Geometry-only fallback used when no client is configured.
#[derive(Debug, Clone)]
pub struct HeuristicParams {
    /// `|n . up|` at or above this marks a horizontal plane.
    pub horizontal_min_cos: f64,
    /// `|n . up|` at or below this marks a vertical plane.
    pub vertical_max_cos: f64,
    /// Minimum extent (longest side, scene units) for a wall.
    pub min_wall_extent: f64,
    /// Clearance below/above the camera height range for floor/ceiling.
    pub height_margin: f64,
}

impl Default for HeuristicParams {
    fn default() -> Self {
        Self { horizontal_min_cos: 0.9, vertical_max_cos: 0.2, min_wall_extent: 1.5, height_margin: 0.2 }
    }
}

/// Labels a plane from orientation, extent, and camera heights alone:
/// horizontal planes below all cameras are floors, above all cameras are
/// ceilings; large vertical planes are walls; everything else is
/// non-layout.
pub fn heuristic_classify(
    plane: &Plane,
    extent: f64,
    room_up: &Vector3<f64>,
    camera_heights: &[f64],
    params: &HeuristicParams,
) -> (PlaneLabel, Option<SurfaceKeyword>) {
    let align = plane.normal().dot(room_up);
    if align.abs() >= params.horizontal_min_cos {
        // Height of the (nearly) horizontal plane along the up axis.
        let plane_height = -plane.offset * align;
        let lo = camera_heights.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = camera_heights.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if plane_height <= lo - params.height_margin {
            return (PlaneLabel::Layout, Some(SurfaceKeyword::Floor));
        }
        if plane_height >= hi + params.height_margin {
            return (PlaneLabel::Layout, Some(SurfaceKeyword::Ceiling));
        }
        return (PlaneLabel::NonLayout, Some(SurfaceKeyword::Table));
    }
    if align.abs() <= params.vertical_max_cos && extent >= params.min_wall_extent {
        return (PlaneLabel::Layout, Some(SurfaceKeyword::Wall));
    }
    (PlaneLabel::NonLayout, None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn prompt_substitutes_the_plane_id() {
        let p = build_prompt(3);
        assert!(p.contains("marked '3'"));
        assert!(p.starts_with("Look at the region outlined in red"));
        assert!(p.ends_with("window, door, or other."));
        assert!(!build_prompt(0).contains("{id}"));
        assert_eq!(build_prompt(7), build_prompt(7));
    }

    #[test]
    fn parser_takes_the_last_keyword() {
        let text = "This looks like a table near the wall... final answer: floor";
        assert_eq!(parse_response(text), Some(SurfaceKeyword::Floor));
        assert_eq!(parse_response("The FLOOR. No - Ceiling!"), Some(SurfaceKeyword::Ceiling));
    }

    #[test]
    fn parser_requires_word_boundaries() {
        assert_eq!(parse_response(""), None);
        assert_eq!(parse_response("wallpaper and bedrock"), None);
        assert_eq!(parse_response("the wall, obviously"), Some(SurfaceKeyword::Wall));
    }

    proptest! {
        #[test]
        fn parser_is_idempotent(text in ".{0,200}") {
            prop_assert_eq!(parse_response(&text), parse_response(&text));
        }
    }

    #[test]
    fn vote_follows_unique_majority() {
        use SurfaceKeyword::*;
        assert_eq!(vote(&[Wall, Wall, Table]), (PlaneLabel::Layout, Some(Wall)));
        assert_eq!(vote(&[Table, Table, Wall]), (PlaneLabel::NonLayout, Some(Table)));
        assert_eq!(vote(&[Wall, Table]), (PlaneLabel::NonLayout, None));
        assert_eq!(vote(&[]), (PlaneLabel::NonLayout, None));
    }

    proptest! {
        #[test]
        fn vote_is_permutation_invariant(
            mut kws in prop::collection::vec(0usize..10, 0..12),
            seed in 0u64..1000,
        ) {
            let to_kw = |i: usize| SurfaceKeyword::ALL[i];
            let original: Vec<_> = kws.iter().map(|&i| to_kw(i)).collect();
            // Deterministic shuffle.
            let mut s = seed;
            for i in (1..kws.len()).rev() {
                s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                let j = (s >> 33) as usize % (i + 1);
                kws.swap(i, j);
            }
            let shuffled: Vec<_> = kws.iter().map(|&i| to_kw(i)).collect();
            prop_assert_eq!(vote(&original), vote(&shuffled));
        }
    }

    #[test]
    fn bbox_and_centroid_track_components() {
        // 12x40 mask: a 2x2 blob at (1,1) and a 4x10 blob at (6,20).
        let (w, h) = (40, 12);
        let mut mask = vec![false; w * h];
        for r in 1..3 {
            for c in 1..3 {
                mask[r * w + c] = true;
            }
        }
        for r in 6..10 {
            for c in 20..30 {
                mask[r * w + c] = true;
            }
        }
        let bbox = mask_bbox(&mask, w).unwrap();
        assert_eq!((bbox.min_row, bbox.min_col, bbox.max_row, bbox.max_col), (1, 1, 9, 29));
        let (cr, cc) = largest_component_centroid(&mask, w).unwrap();
        assert!((cr - 7.5).abs() < 1e-9);
        assert!((cc - 24.5).abs() < 1e-9);
    }

    fn gray_image(w: usize, h: usize) -> Image {
        Image::from_fn(w, h, |_, _| [0.5, 0.5, 0.5, 1.0]).unwrap()
    }

    #[test]
    fn highlight_rejects_empty_or_misshapen_masks() {
        let img = gray_image(8, 8);
        assert!(matches!(
            render_highlight(&img, &vec![false; 64], 1),
            Err(ClassifyError::EmptyMask)
        ));
        assert!(matches!(
            render_highlight(&img, &vec![true; 32], 1),
            Err(ClassifyError::MaskShape { .. })
        ));
    }

    #[test]
    fn highlight_draws_red_contour_and_light_interior() {
        let img = gray_image(64, 64);
        let mut mask = vec![false; 64 * 64];
        for r in 10..50 {
            for c in 10..50 {
                mask[r * 64 + c] = true;
            }
        }
        let out = render_highlight(&img, &mask, 2).unwrap();
        // Boundary pixel: solid red.
        assert_eq!(out.pixel(10, 30), [1.0, 0.0, 0.0, 1.0]);
        // Interior pixel away from the digit: light red tint over gray.
        let px = out.pixel(45, 12);
        assert!(px[0] > px[1] && px[1] == px[2]);
        // Outside the mask: untouched.
        assert_eq!(out.pixel(5, 5), [0.5, 0.5, 0.5, 1.0]);
    }

    #[test]
    fn full_frame_mask_paints_the_border() {
        let img = gray_image(40, 36);
        let mask = vec![true; 40 * 36];
        let out = render_highlight(&img, &mask, 0).unwrap();
        assert_eq!(out.pixel(0, 0), [1.0, 0.0, 0.0, 1.0]);
        assert_eq!(out.pixel(35, 39), [1.0, 0.0, 0.0, 1.0]);
    }

    #[test]
    fn pure_protocol_applies_bbox_rule_and_vote() {
        let verdict = classify_plane(
            4,
            &["I think wall", "surely the wall", "a small table"],
            &[(64, 64), (40, 200), (16, 300)],
        );
        // Third view fails the 32x32 rule in width.
        assert_eq!(verdict.keywords.len(), 2);
        assert_eq!(verdict.label, PlaneLabel::Layout);
        assert_eq!(verdict.semantic, Some(SurfaceKeyword::Wall));
    }

    struct ScriptedClient {
        responses: Vec<String>,
        cursor: AtomicUsize,
    }

    impl ScriptedClient {
        fn new(responses: &[&str]) -> Self {
            Self {
                responses: responses.iter().map(|s| s.to_string()).collect(),
                cursor: AtomicUsize::new(0),
            }
        }

        fn queries(&self) -> usize {
            self.cursor.load(Ordering::SeqCst)
        }
    }

    impl VlmClient for ScriptedClient {
        fn query(&self, _request: &VlmRequest) -> Result<String, VlmError> {
            let i = self.cursor.fetch_add(1, Ordering::SeqCst);
            self.responses
                .get(i)
                .cloned()
                .ok_or_else(|| VlmError::Transport("script exhausted".into()))
        }
    }

    fn view_with_blob(size: usize) -> PlaneView {
        let dim = 128;
        let image = gray_image(dim, dim);
        let mut mask = vec![false; dim * dim];
        for r in 4..4 + size {
            for c in 4..4 + size {
                mask[r * dim + c] = true;
            }
        }
        PlaneView { image, mask }
    }

    #[test]
    fn small_views_are_never_queried() {
        let client = ScriptedClient::new(&["the ceiling"]);
        let views = [view_with_blob(16), view_with_blob(48), view_with_blob(8)];
        let verdict = classify_with_client(&client, 1, &views).unwrap();
        assert_eq!(client.queries(), 1, "only the 48px view may be queried");
        assert_eq!(verdict.label, PlaneLabel::Layout);
        assert_eq!(verdict.semantic, Some(SurfaceKeyword::Ceiling));
    }

    #[test]
    fn all_small_views_mean_non_layout_with_zero_queries() {
        let client = ScriptedClient::new(&["should never be read"]);
        let views = [view_with_blob(10), view_with_blob(31)];
        let verdict = classify_with_client(&client, 1, &views).unwrap();
        assert_eq!(client.queries(), 0);
        assert_eq!(verdict.label, PlaneLabel::NonLayout);
        assert_eq!(verdict.semantic, None);
        assert!(verdict.keywords.is_empty());
    }

    #[test]
    fn transport_errors_propagate() {
        let client = ScriptedClient::new(&[]);
        let views = [view_with_blob(64)];
        assert!(matches!(
            classify_with_client(&client, 1, &views),
            Err(ClassifyError::Vlm(VlmError::Transport(_)))
        ));
    }

    #[test]
    fn fixture_client_replays_by_request_hash() {
        let request = VlmRequest {
            prompt: build_prompt(5),
            image_png: vec![1, 2, 3],
            max_tokens: MAX_RESPONSE_TOKENS,
        };
        let mut map = HashMap::new();
        map.insert(request_hash(&request), "definitely a floor".to_string());
        let client = FixtureClient::new(map);
        assert_eq!(client.query(&request).unwrap(), "definitely a floor");
        assert_eq!(client.query_count(), 1);
        let other = VlmRequest { prompt: build_prompt(6), ..request.clone() };
        assert!(matches!(client.query(&other), Err(VlmError::MissingFixture { .. })));
    }

    #[test]
    fn heuristic_separates_floor_ceiling_wall_table() {
        let up = Vector3::y();
        let cams = [1.4, 1.6];
        let params = HeuristicParams::default();
        // Floor at y=0 (inward normal up): n.x + 0 = 0.
        let floor = Plane::new(0, Vector3::y(), 0.0).unwrap();
        assert_eq!(
            heuristic_classify(&floor, 5.0, &up, &cams, &params),
            (PlaneLabel::Layout, Some(SurfaceKeyword::Floor))
        );
        // Ceiling at y=3 (inward normal down): -y + 3 = 0.
        let ceiling = Plane::new(1, -Vector3::y(), 3.0).unwrap();
        assert_eq!(
            heuristic_classify(&ceiling, 5.0, &up, &cams, &params),
            (PlaneLabel::Layout, Some(SurfaceKeyword::Ceiling))
        );
        let wall = Plane::new(2, Vector3::x(), -2.0).unwrap();
        assert_eq!(
            heuristic_classify(&wall, 6.0, &up, &cams, &params),
            (PlaneLabel::Layout, Some(SurfaceKeyword::Wall))
        );
        // Tabletop at camera height.
        let table = Plane::new(3, Vector3::y(), -1.5).unwrap();
        assert_eq!(
            heuristic_classify(&table, 0.8, &up, &cams, &params).0,
            PlaneLabel::NonLayout
        );
        // Small vertical patch: not enough extent for a wall.
        let shard = Plane::new(4, Vector3::x(), -1.0).unwrap();
        assert_eq!(heuristic_classify(&shard, 0.3, &up, &cams, &params), (PlaneLabel::NonLayout, None));
    }
}

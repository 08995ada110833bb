//! Collision-aware grasp detection on a single depth map.
//!
//! The detector slices the height field at a few levels, binarizes each
//! slice into an occupancy image, and slides a two-mask gripper template
//! over it at several rotations: the collision mask (finger footprints)
//! must land on free pixels while the contact mask (the closing region
//! between the fingers) must cover the object. The contact response is
//! smoothed with a sigma-1 Gaussian (binomial [1,4,6,4,1] kernel, so the
//! arithmetic is exact in integers) and local maxima become candidates.
//!
//! `rank_with_mid_bias` re-ranks candidates toward the middle of elongated
//! ridges near the top of the heap. It is a deliberately simple heuristic
//! stand-in for a learned grasp scorer and claims nothing beyond that.

use std::fmt::Write as _;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum GraspError {
    #[error("depth map dimensions or data are inconsistent")]
    BadMap,
    #[error("depth map contains a negative or non-finite height")]
    BadHeight,
    #[error("mask dimensions mismatch")]
    MaskMismatch,
    #[error("contact and collision masks overlap")]
    MasksOverlap,
    #[error("depth map ({mw}x{mh}) smaller than rotated template ({side}x{side})")]
    MapTooSmall { mw: usize, mh: usize, side: usize },
    #[error("parameter out of range: {0}")]
    BadParam(&'static str),
    #[error("pgm format: {0}")]
    Format(String),
    #[error("i/o: {0}")]
    Io(String),
}

/// Row-major height field in meters above the bin floor.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthMap {
    width: usize,
    height: usize,
    /// Meters per pixel.
    pub resolution: f64,
    data: Vec<f64>,
}

impl DepthMap {
    pub fn new(
        width: usize,
        height: usize,
        resolution: f64,
        data: Vec<f64>,
    ) -> Result<Self, GraspError> {
        if width == 0 || height == 0 || data.len() != width * height || !(resolution > 0.0) {
            return Err(GraspError::BadMap);
        }
        if data.iter().any(|&h| !h.is_finite() || h < 0.0) {
            return Err(GraspError::BadHeight);
        }
        Ok(Self { width, height, resolution, data })
    }

    pub fn zeros(width: usize, height: usize, resolution: f64) -> Self {
        Self::new(width, height, resolution, vec![0.0; width * height]).expect("valid zero map")
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn get(&self, u: usize, v: usize) -> f64 {
        self.data[v * self.width + u]
    }

    pub fn set(&mut self, u: usize, v: usize, h: f64) {
        self.data[v * self.width + u] = h;
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    fn min_max(&self) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for &h in &self.data {
            lo = lo.min(h);
            hi = hi.max(h);
        }
        (lo, hi)
    }
}

/// A binary pixel mask.
#[derive(Debug, Clone, PartialEq)]
pub struct Mask {
    pub width: usize,
    pub height: usize,
    pub bits: Vec<bool>,
}

impl Mask {
    pub fn new(width: usize, height: usize, bits: Vec<bool>) -> Result<Self, GraspError> {
        if bits.len() != width * height {
            return Err(GraspError::MaskMismatch);
        }
        Ok(Self { width, height, bits })
    }

    pub fn get(&self, x: usize, y: usize) -> bool {
        self.bits[y * self.width + x]
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    /// Offsets of set pixels relative to the mask center.
    fn offsets(&self) -> Vec<(i32, i32)> {
        let cx = (self.width / 2) as i32;
        let cy = (self.height / 2) as i32;
        let mut out = Vec::new();
        for y in 0..self.height {
            for x in 0..self.width {
                if self.get(x, y) {
                    out.push((x as i32 - cx, y as i32 - cy));
                }
            }
        }
        out
    }

    /// Nearest-neighbor rotation about the mask center onto a square canvas
    /// large enough for any angle.
    fn rotated(&self, angle: f64, side: usize) -> Mask {
        let (sin, cos) = angle.sin_cos();
        let half = (side / 2) as i32;
        let cx = (self.width / 2) as i32;
        let cy = (self.height / 2) as i32;
        let mut bits = vec![false; side * side];
        for y in 0..side {
            for x in 0..side {
                let dx = x as i32 - half;
                let dy = y as i32 - half;
                // Inverse mapping: rotate the target offset back by -angle.
                let sx = (cos * dx as f64 + sin * dy as f64).round() as i32 + cx;
                let sy = (-sin * dx as f64 + cos * dy as f64).round() as i32 + cy;
                if sx >= 0
                    && sy >= 0
                    && (sx as usize) < self.width
                    && (sy as usize) < self.height
                    && self.get(sx as usize, sy as usize)
                {
                    bits[y * side + x] = true;
                }
            }
        }
        Mask { width: side, height: side, bits }
    }
}

/// Paired contact/collision masks of a parallel-jaw gripper plus its opening
/// width in meters.
#[derive(Debug, Clone, PartialEq)]
pub struct GripperTemplate {
    pub contact: Mask,
    pub collision: Mask,
    pub open_width: f64,
}

impl GripperTemplate {
    pub fn new(contact: Mask, collision: Mask, open_width: f64) -> Result<Self, GraspError> {
        if contact.width != collision.width || contact.height != collision.height {
            return Err(GraspError::MaskMismatch);
        }
        if contact
            .bits
            .iter()
            .zip(collision.bits.iter())
            .any(|(&a, &b)| a && b)
        {
            return Err(GraspError::MasksOverlap);
        }
        if !(open_width > 0.0) {
            return Err(GraspError::BadParam("open_width"));
        }
        Ok(Self { contact, collision, open_width })
    }

    /// Standard two-finger template: the collision mask is the two finger
    /// footprints at the open positions, the contact mask the closing region
    /// between them.
    pub fn parallel_jaw(
        open_width: f64,
        finger_width: f64,
        jaw_len: f64,
        resolution: f64,
    ) -> Result<Self, GraspError> {
        if !(resolution > 0.0) {
            return Err(GraspError::BadParam("resolution"));
        }
        let px = |m: f64| ((m / resolution).round() as usize).max(1);
        let open_px = px(open_width);
        let finger_px = px(finger_width);
        let jaw_px = px(jaw_len);
        let w = open_px + 2 * finger_px;
        let h = jaw_px;
        let mut contact = vec![false; w * h];
        let mut collision = vec![false; w * h];
        for y in 0..h {
            for x in 0..w {
                let idx = y * w + x;
                if x < finger_px || x >= finger_px + open_px {
                    collision[idx] = true;
                } else {
                    contact[idx] = true;
                }
            }
        }
        Self::new(Mask::new(w, h, contact)?, Mask::new(w, h, collision)?, open_width)
    }

    /// Side of the square canvas that holds the template at any rotation.
    pub fn canvas_side(&self) -> usize {
        let w = self.contact.width as f64;
        let h = self.contact.height as f64;
        let diag = (w * w + h * h).sqrt().ceil() as usize;
        diag | 1 // odd, so the center pixel is unambiguous
    }
}

/// An image-plane grasp pose with its graspability score.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GraspCandidate {
    /// Pixel column of the template center.
    pub u: usize,
    /// Pixel row of the template center.
    pub v: usize,
    /// In-plane rotation in radians, in [0, pi).
    pub rotation: f64,
    /// Slice height of the grasp in meters.
    pub grasp_height: f64,
    /// Graspability in [0, 1].
    pub score: f64,
    /// Middle-of-object score in [0, 1]; zero until re-ranked.
    pub mid_bias: f64,
    /// Rotation index, the final tie-breaker of the candidate order.
    pub rotation_index: usize,
}

/// Total candidate order: score descending, then higher grasp, then lower
/// u, lower v, lower rotation index.
fn candidate_order(a: &GraspCandidate, b: &GraspCandidate) -> std::cmp::Ordering {
    b.score
        .total_cmp(&a.score)
        .then(b.grasp_height.total_cmp(&a.grasp_height))
        .then(a.u.cmp(&b.u))
        .then(a.v.cmp(&b.v))
        .then(a.rotation_index.cmp(&b.rotation_index))
}

// 1D binomial kernel with sigma exactly 1; weights sum to 16.
const KERNEL: [u64; 5] = [1, 4, 6, 4, 1];

/// Detects collision-free grasps. Returns at most `top_k` local maxima of
/// the smoothed contact response, in the documented total order. An empty
/// list means no graspable spot exists and the caller records a grasp
/// failure.
pub fn detect_grasps(
    depth: &DepthMap,
    template: &GripperTemplate,
    n_rotations: usize,
    n_heights: usize,
    top_k: usize,
) -> Result<Vec<GraspCandidate>, GraspError> {
    if n_rotations < 1 {
        return Err(GraspError::BadParam("n_rotations"));
    }
    if n_heights < 1 {
        return Err(GraspError::BadParam("n_heights"));
    }
    if top_k < 1 {
        return Err(GraspError::BadParam("top_k"));
    }
    let side = template.canvas_side();
    let (mw, mh) = (depth.width, depth.height);
    if mw < side || mh < side {
        return Err(GraspError::MapTooSmall { mw, mh, side });
    }
    let (h_min, h_max) = depth.min_max();
    if h_max - h_min <= f64::EPSILON {
        return Ok(Vec::new()); // no object region at any slice
    }

    let half = side / 2;
    let span = h_max - h_min;
    let mut candidates: Vec<GraspCandidate> = Vec::new();

    for rot_idx in 0..n_rotations {
        let angle = rot_idx as f64 * std::f64::consts::PI / n_rotations as f64;
        let contact = template.contact.rotated(angle, side).offsets();
        let collision = template.collision.rotated(angle, side).offsets();
        let contact_count = contact.len() as f64;
        if contact.is_empty() {
            continue;
        }
        for slice_idx in 1..=n_heights {
            let z = h_min + span * slice_idx as f64 / (n_heights + 1) as f64;
            let occupied: Vec<bool> = depth.data.iter().map(|&h| h > z).collect();
            let at = |u: i32, v: i32| occupied[v as usize * mw + u as usize];

            // Raw response: contact count where the collision response is
            // exactly zero.
            let mut raw = vec![0u64; mw * mh];
            let mut eligible = vec![false; mw * mh];
            for v in half..mh - half {
                for u in half..mw - half {
                    let (ui, vi) = (u as i32, v as i32);
                    if collision.iter().any(|&(dx, dy)| at(ui + dx, vi + dy)) {
                        continue;
                    }
                    let hits = contact.iter().filter(|&&(dx, dy)| at(ui + dx, vi + dy)).count();
                    if hits > 0 {
                        raw[v * mw + u] = hits as u64;
                        eligible[v * mw + u] = true;
                    }
                }
            }

            // Exact integer Gaussian smoothing (separable binomial kernel,
            // combined weight 256).
            let mut horiz = vec![0u64; mw * mh];
            for v in 0..mh {
                for u in 2..mw - 2 {
                    let mut acc = 0u64;
                    for (k, &w) in KERNEL.iter().enumerate() {
                        acc += w * raw[v * mw + u + k - 2];
                    }
                    horiz[v * mw + u] = acc;
                }
            }
            let mut smooth = vec![0u64; mw * mh];
            for v in 2..mh - 2 {
                for u in 0..mw {
                    let mut acc = 0u64;
                    for (k, &w) in KERNEL.iter().enumerate() {
                        acc += w * horiz[(v + k - 2) * mw + u];
                    }
                    smooth[v * mw + u] = acc;
                }
            }

            // Local maxima of the smoothed response among eligible centers.
            for v in half..mh - half {
                for u in half..mw - half {
                    if !eligible[v * mw + u] {
                        continue;
                    }
                    let s = smooth[v * mw + u];
                    let mut is_max = true;
                    'nb: for dv in -1i32..=1 {
                        for du in -1i32..=1 {
                            if du == 0 && dv == 0 {
                                continue;
                            }
                            let (nu, nv) = ((u as i32 + du) as usize, (v as i32 + dv) as usize);
                            if smooth[nv * mw + nu] > s {
                                is_max = false;
                                break 'nb;
                            }
                        }
                    }
                    if is_max {
                        candidates.push(GraspCandidate {
                            u,
                            v,
                            rotation: angle,
                            grasp_height: z,
                            score: s as f64 / (256.0 * contact_count),
                            mid_bias: 0.0,
                            rotation_index: rot_idx,
                        });
                    }
                }
            }
        }
    }

    candidates.sort_by(candidate_order);
    candidates.truncate(top_k);
    Ok(candidates)
}

/// Largest per-step height change (meters) the ridge following tolerates.
/// Capsule flanks drop faster than this per pixel, so the walk keeps to
/// the crown strip of one body instead of leaking through the valleys
/// between touching neighbors.
const RIDGE_STEP_BAND: f64 = 0.003;

/// Reference ridge length in meters: a middle is only trustworthy on a
/// ridge long enough to be a body, so shorter ridges have their mid score
/// scaled down proportionally and very short ones are ignored.
const RIDGE_REF_LEN_M: f64 = 0.25;

/// Minimum traceable ridge length in meters.
const RIDGE_MIN_LEN_M: f64 = 0.1;

/// Mid scores below this are ambiguous evidence and are zeroed, so the
/// re-ranking only acts where the ridge reading is confident.
const RIDGE_CONFIDENT_MID: f64 = 0.5;

/// Anything this far (meters) above the lowest map point counts as object
/// surface for the ridge walk; the floor itself must not be walkable.
const RIDGE_FLOOR_EPS: f64 = 0.002;

/// How close the grasp sits to the nearest visible object end: 0 right at
/// an end (or on a blob with no usable ridge), 1 when the local ridge runs
/// past the horizon on every side.
///
/// The walk runs on the full height field, constrained to smooth height
/// steps so it keeps to one body's crown, seeded at the tallest surface
/// pixel near the grasp center (the body a descending gripper binds), and
/// capped at a geodesic horizon. A walk pixel inside the horizon with no
/// farther neighbor is a ridge end; pixels cut off by the horizon are not.
fn ridge_mid_bias(depth: &DepthMap, u: usize, v: usize) -> f64 {
    let (mw, mh) = (depth.width, depth.height);
    let floor = depth.data.iter().cloned().fold(f64::INFINITY, f64::min) + RIDGE_FLOOR_EPS;
    let occupied: Vec<bool> = depth.data.iter().map(|&h| h > floor).collect();

    // Seed: the highest surface pixel within a small radius of the template
    // center (the center sits between the fingers, not necessarily on the
    // object).
    let mut seed = None;
    let mut best = f64::NEG_INFINITY;
    let r = 3i32;
    for dv in -r..=r {
        for du in -r..=r {
            let (nu, nv) = (u as i32 + du, v as i32 + dv);
            if nu < 0 || nv < 0 || nu as usize >= mw || nv as usize >= mh {
                continue;
            }
            let idx = nv as usize * mw + nu as usize;
            if occupied[idx] && depth.data[idx] > best {
                best = depth.data[idx];
                seed = Some((nu as usize, nv as usize));
            }
        }
    }
    let Some(seed) = seed else { return 0.0 };

    let bfs = |start: (usize, usize)| -> Vec<i32> {
        let mut dist = vec![-1i32; mw * mh];
        let mut queue = std::collections::VecDeque::new();
        dist[start.1 * mw + start.0] = 0;
        queue.push_back(start);
        while let Some((x, y)) = queue.pop_front() {
            let d = dist[y * mw + x];
            let h = depth.get(x, y);
            for dv in -1i32..=1 {
                for du in -1i32..=1 {
                    if du == 0 && dv == 0 {
                        continue;
                    }
                    let (nx, ny) = (x as i32 + du, y as i32 + dv);
                    if nx < 0 || ny < 0 || nx as usize >= mw || ny as usize >= mh {
                        continue;
                    }
                    let idx = ny as usize * mw + nx as usize;
                    if occupied[idx]
                        && dist[idx] < 0
                        && (depth.data[idx] - h).abs() <= RIDGE_STEP_BAND
                    {
                        dist[idx] = d + 1;
                        queue.push_back((nx as usize, ny as usize));
                    }
                }
            }
        }
        dist
    };

    // Double sweep: farthest point from the seed is one ridge end; the
    // farthest point from that end spans the ridge diameter.
    let from_seed = bfs(seed);
    let far = |dist: &[i32]| {
        let mut best = (seed, 0);
        for y in 0..mh {
            for x in 0..mw {
                let d = dist[y * mw + x];
                if d > best.1 {
                    best = ((x, y), d);
                }
            }
        }
        best
    };
    let (end1, _) = far(&from_seed);
    let from_end = bfs(end1);
    let ((_, _), diameter) = far(&from_end);
    if (diameter as f64) < RIDGE_MIN_LEN_M / depth.resolution {
        return 0.0;
    }
    // Anything wider than a thin strip for its length is a merged mess, not
    // a body: no usable middle.
    let area = from_seed.iter().filter(|&&d| d >= 0).count();
    if area > (4.5 * (diameter as f64 + 1.0)) as usize {
        return 0.0;
    }
    let d1 = from_end[seed.1 * mw + seed.0];
    if d1 < 0 {
        return 0.0;
    }
    let centering = 2.0 * d1.min(diameter - d1) as f64 / diameter as f64;
    let ref_px = RIDGE_REF_LEN_M / depth.resolution;
    let mid = centering * (diameter as f64 / ref_px).min(1.0);
    if mid < RIDGE_CONFIDENT_MID {
        0.0
    } else {
        mid
    }
}

/// Re-ranks candidates toward ridge middles near the heap top. The combined
/// key is `(1-alpha)*score + alpha*(mid_bias * normalized grasp height)`;
/// the sort is stable, so `alpha = 0` preserves the incoming order exactly.
pub fn rank_with_mid_bias(
    mut candidates: Vec<GraspCandidate>,
    depth: &DepthMap,
    alpha: f64,
) -> Vec<GraspCandidate> {
    if candidates.is_empty() {
        return candidates;
    }
    let max_h = candidates
        .iter()
        .map(|c| c.grasp_height)
        .fold(f64::NEG_INFINITY, f64::max);
    for c in candidates.iter_mut() {
        c.mid_bias = ridge_mid_bias(depth, c.u, c.v);
    }
    let key = |c: &GraspCandidate| {
        let h_norm = if max_h > 0.0 { c.grasp_height / max_h } else { 0.0 };
        (1.0 - alpha) * c.score + alpha * c.mid_bias * h_norm
    };
    candidates.sort_by(|a, b| key(b).total_cmp(&key(a)));
    candidates
}

// ---------------------------------------------------------------------------
// File formats: ASCII PGM (P2) depth maps and mask pairs, CSV candidates.

/// Writes a depth map as ASCII PGM with a comment carrying the resolution
/// and the height quantization step.
pub fn write_depth_pgm<W: Write>(map: &DepthMap, depth_scale: f64, mut out: W) -> Result<(), GraspError> {
    if !(depth_scale > 0.0) {
        return Err(GraspError::BadParam("depth_scale"));
    }
    let io = |e: std::io::Error| GraspError::Io(e.to_string());
    let maxval = 65535u32;
    writeln!(out, "P2").map_err(io)?;
    writeln!(out, "# resolution {} depth_scale {}", map.resolution, depth_scale).map_err(io)?;
    writeln!(out, "{} {}", map.width, map.height).map_err(io)?;
    writeln!(out, "{maxval}").map_err(io)?;
    let mut line = String::new();
    for v in 0..map.height {
        line.clear();
        for u in 0..map.width {
            let g = ((map.get(u, v) / depth_scale).round() as u64).min(maxval as u64);
            if u > 0 {
                line.push(' ');
            }
            let _ = write!(line, "{g}");
        }
        writeln!(out, "{line}").map_err(io)?;
    }
    Ok(())
}

fn pgm_tokens<R: BufRead>(input: R) -> Result<(Vec<String>, f64, f64), GraspError> {
    let mut tokens = Vec::new();
    let mut resolution = None;
    let mut depth_scale = None;
    for line in input.lines() {
        let line = line.map_err(|e| GraspError::Io(e.to_string()))?;
        if let Some(comment) = line.trim().strip_prefix('#') {
            let words: Vec<&str> = comment.split_whitespace().collect();
            let mut i = 0;
            while i + 1 < words.len() {
                match words[i] {
                    "resolution" => resolution = words[i + 1].parse().ok(),
                    "depth_scale" => depth_scale = words[i + 1].parse().ok(),
                    _ => {}
                }
                i += 1;
            }
            continue;
        }
        tokens.extend(line.split_whitespace().map(str::to_string));
    }
    Ok((
        tokens,
        resolution.ok_or_else(|| GraspError::Format("missing resolution comment".into()))?,
        depth_scale.unwrap_or(1.0),
    ))
}

/// Reads an ASCII PGM depth map written by [`write_depth_pgm`].
pub fn read_depth_pgm<R: BufRead>(input: R) -> Result<DepthMap, GraspError> {
    let (tokens, resolution, depth_scale) = pgm_tokens(input)?;
    let fmt = |m: &str| GraspError::Format(m.to_string());
    if tokens.first().map(String::as_str) != Some("P2") {
        return Err(fmt("expected P2 magic"));
    }
    if tokens.len() < 4 {
        return Err(fmt("truncated header"));
    }
    let width: usize = tokens[1].parse().map_err(|_| fmt("bad width"))?;
    let height: usize = tokens[2].parse().map_err(|_| fmt("bad height"))?;
    let _maxval: u32 = tokens[3].parse().map_err(|_| fmt("bad maxval"))?;
    if tokens.len() != 4 + width * height {
        return Err(fmt("pixel count mismatch"));
    }
    let mut data = Vec::with_capacity(width * height);
    for tok in &tokens[4..] {
        let g: u64 = tok.parse().map_err(|_| fmt("bad pixel"))?;
        data.push(g as f64 * depth_scale);
    }
    DepthMap::new(width, height, resolution, data)
}

/// Writes a binary mask as ASCII PGM (maxval 1). `open_width`, when given,
/// is recorded in the comment so a template pair can be reassembled.
pub fn write_mask_pgm<W: Write>(
    mask: &Mask,
    open_width: Option<f64>,
    mut out: W,
) -> Result<(), GraspError> {
    let io = |e: std::io::Error| GraspError::Io(e.to_string());
    writeln!(out, "P2").map_err(io)?;
    if let Some(w) = open_width {
        writeln!(out, "# open_width {w}").map_err(io)?;
    }
    writeln!(out, "{} {}", mask.width, mask.height).map_err(io)?;
    writeln!(out, "1").map_err(io)?;
    for y in 0..mask.height {
        let row: Vec<&str> = (0..mask.width)
            .map(|x| if mask.get(x, y) { "1" } else { "0" })
            .collect();
        writeln!(out, "{}", row.join(" ")).map_err(io)?;
    }
    Ok(())
}

/// Reads a mask PGM; any nonzero pixel is set. Returns the mask and the
/// `open_width` comment when present.
pub fn read_mask_pgm<R: BufRead>(input: R) -> Result<(Mask, Option<f64>), GraspError> {
    let fmt = |m: &str| GraspError::Format(m.to_string());
    let mut tokens = Vec::new();
    let mut open_width = None;
    for line in input.lines() {
        let line = line.map_err(|e| GraspError::Io(e.to_string()))?;
        if let Some(comment) = line.trim().strip_prefix('#') {
            let words: Vec<&str> = comment.split_whitespace().collect();
            for i in 0..words.len().saturating_sub(1) {
                if words[i] == "open_width" {
                    open_width = words[i + 1].parse().ok();
                }
            }
            continue;
        }
        tokens.extend(line.split_whitespace().map(str::to_string));
    }
    if tokens.first().map(String::as_str) != Some("P2") {
        return Err(fmt("expected P2 magic"));
    }
    if tokens.len() < 4 {
        return Err(fmt("truncated header"));
    }
    let width: usize = tokens[1].parse().map_err(|_| fmt("bad width"))?;
    let height: usize = tokens[2].parse().map_err(|_| fmt("bad height"))?;
    if tokens.len() != 4 + width * height {
        return Err(fmt("pixel count mismatch"));
    }
    let bits = tokens[4..]
        .iter()
        .map(|t| t.parse::<u64>().map(|g| g != 0).map_err(|_| fmt("bad pixel")))
        .collect::<Result<Vec<bool>, _>>()?;
    Ok((Mask::new(width, height, bits)?, open_width))
}

/// Candidates as CSV: `u,v,rotation,height,score,mid_bias`.
pub fn candidates_to_csv(candidates: &[GraspCandidate]) -> String {
    let mut out = String::from("u,v,rotation,height,score,mid_bias\n");
    for c in candidates {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            c.u, c.v, c.rotation, c.grasp_height, c.score, c.mid_bias
        );
    }
    out
}

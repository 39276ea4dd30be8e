//! Attention maps and the quotation-guided attention gate.
//!
//! A gate is built from an anchor token's cross-attention maps in four
//! stages: average over layers/heads, box-filter smoothing, primary peak
//! retention (a Gaussian proximity mask whose widths come from the map's
//! second central moments around the peak), and max-norm + quantile
//! smoothstep binarization. The gate multiplicatively boosts attention via
//! `A * (1 + G)`.
//!
//! Grid convention: `x` is the column index, `y` the row index; cell
//! `(x, y)` lives at `values[y * width + x]`.

use std::io::{Read, Write};
use std::path::Path;

use rand_core::{RngCore, SeedableRng};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum GateError {
    #[error("map list is empty")]
    EmptyMapList,
    #[error("dimension mismatch: expected {expected_height}x{expected_width}, got {height}x{width}")]
    DimensionMismatch {
        expected_height: usize,
        expected_width: usize,
        height: usize,
        width: usize,
    },
    #[error("kernel must be odd, positive, and at most 2*min(h,w)-1: {0}")]
    InvalidKernel(String),
    #[error("absent anchor attention: map is all zeros")]
    AllZeroMap,
    #[error("invalid attention map: {0}")]
    InvalidMap(String),
    #[error("invalid gate config: {0}")]
    InvalidConfig(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("bad map file: {0}")]
    Format(String),
    #[error("bad map json: {0}")]
    Json(#[from] serde_json::Error),
}

/// Dense grid of non-negative attention values.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionMap {
    height: usize,
    width: usize,
    values: Vec<f64>,
}

impl AttentionMap {
    /// Builds a map, checking dimensions, value count, and non-negativity.
    pub fn new(height: usize, width: usize, values: Vec<f64>) -> Result<Self, GateError> {
        if height == 0 || width == 0 {
            return Err(GateError::InvalidMap(format!(
                "dimensions must be >= 1, got {height}x{width}"
            )));
        }
        if values.len() != height * width {
            return Err(GateError::InvalidMap(format!(
                "expected {} values for {height}x{width}, got {}",
                height * width,
                values.len()
            )));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite() || **v < 0.0) {
            return Err(GateError::InvalidMap(format!(
                "values must be finite and >= 0, found {v}"
            )));
        }
        Ok(Self {
            height,
            width,
            values,
        })
    }

    pub fn zeros(height: usize, width: usize) -> Result<Self, GateError> {
        Self::new(height, width, vec![0.0; height * width])
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Value at column `x`, row `y`.
    pub fn at(&self, x: usize, y: usize) -> f64 {
        self.values[y * self.width + x]
    }

    pub fn same_dims(&self, other: &AttentionMap) -> bool {
        self.height == other.height && self.width == other.width
    }

    fn dim_check(&self, other: &AttentionMap) -> Result<(), GateError> {
        if self.same_dims(other) {
            Ok(())
        } else {
            Err(GateError::DimensionMismatch {
                expected_height: self.height,
                expected_width: self.width,
                height: other.height,
                width: other.width,
            })
        }
    }
}

/// A finished gate: values in `[0, 1]` plus the retained peak and the
/// adaptive Gaussian widths used to suppress secondary peaks.
#[derive(Debug, Clone, PartialEq)]
pub struct Gate {
    pub height: usize,
    pub width: usize,
    values: Vec<f64>,
    /// Peak position as `(x, y)`.
    pub peak: (usize, usize),
    /// Gaussian widths `(sigma_x, sigma_y)` in pixels.
    pub sigma: (f64, f64),
}

impl Gate {
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn at(&self, x: usize, y: usize) -> f64 {
        self.values[y * self.width + x]
    }

    /// The gate grid as a plain attention map (values are already valid).
    pub fn to_map(&self) -> AttentionMap {
        AttentionMap {
            height: self.height,
            width: self.width,
            values: self.values.clone(),
        }
    }
}

/// Gate construction parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GateConfig {
    /// Odd box-filter size for smoothing.
    pub kernel: usize,
    /// Lower quantile of the normalized map; values below it gate to 0.
    pub q_low: f64,
    /// Upper quantile; values at or above it gate to 1.
    pub q_high: f64,
    /// Minimum Gaussian width in pixels, guarding single-pixel spikes.
    pub sigma_floor: f64,
    /// Below this quantile spread the smoothstep ramp degenerates to a hard
    /// threshold at `q_high`.
    pub flat_epsilon: f64,
}

impl Default for GateConfig {
    fn default() -> Self {
        Self {
            kernel: 5,
            q_low: 0.80,
            q_high: 0.99,
            sigma_floor: 1.0,
            flat_epsilon: 1e-9,
        }
    }
}

impl GateConfig {
    pub fn validate(&self) -> Result<(), GateError> {
        if self.kernel % 2 == 0 || self.kernel == 0 {
            return Err(GateError::InvalidKernel(format!("kernel must be odd, got {}", self.kernel)));
        }
        if !(self.q_low > 0.0 && self.q_low < self.q_high && self.q_high <= 1.0) {
            return Err(GateError::InvalidConfig(format!(
                "quantiles must satisfy 0 < q_low < q_high <= 1, got {} and {}",
                self.q_low, self.q_high
            )));
        }
        if !(self.sigma_floor > 0.0) {
            return Err(GateError::InvalidConfig(format!(
                "sigma_floor must be > 0, got {}",
                self.sigma_floor
            )));
        }
        if !(self.flat_epsilon >= 0.0) {
            return Err(GateError::InvalidConfig(format!(
                "flat_epsilon must be >= 0, got {}",
                self.flat_epsilon
            )));
        }
        Ok(())
    }
}

/// Element-wise mean of maps sharing one shape.
pub fn average_maps(maps: &[AttentionMap]) -> Result<AttentionMap, GateError> {
    let first = maps.first().ok_or(GateError::EmptyMapList)?;
    for m in &maps[1..] {
        first.dim_check(m)?;
    }
    let n = maps.len() as f64;
    let mut values = vec![0.0; first.values.len()];
    for m in maps {
        for (acc, v) in values.iter_mut().zip(&m.values) {
            *acc += v;
        }
    }
    for v in &mut values {
        *v /= n;
    }
    Ok(AttentionMap {
        height: first.height,
        width: first.width,
        values,
    })
}

/// Box-filter smoothing. Border windows shrink to the valid region, so the
/// output is the mean over in-bounds cells only and constants pass through.
pub fn smooth(map: &AttentionMap, kernel: usize) -> Result<AttentionMap, GateError> {
    let limit = 2 * map.height.min(map.width) - 1;
    if kernel % 2 == 0 || kernel == 0 {
        return Err(GateError::InvalidKernel(format!("kernel must be odd, got {kernel}")));
    }
    if kernel > limit {
        return Err(GateError::InvalidKernel(format!(
            "kernel {kernel} exceeds limit {limit} for a {}x{} map",
            map.height, map.width
        )));
    }
    if kernel == 1 {
        return Ok(map.clone());
    }

    let (h, w) = (map.height, map.width);
    // Inclusive prefix sums with a zero row/column of padding.
    let mut prefix = vec![0.0f64; (h + 1) * (w + 1)];
    for y in 0..h {
        let mut row = 0.0;
        for x in 0..w {
            row += map.at(x, y);
            prefix[(y + 1) * (w + 1) + (x + 1)] = prefix[y * (w + 1) + (x + 1)] + row;
        }
    }
    let rect_sum = |x0: usize, y0: usize, x1: usize, y1: usize| -> f64 {
        // Sum over columns x0..=x1, rows y0..=y1.
        prefix[(y1 + 1) * (w + 1) + (x1 + 1)] - prefix[y0 * (w + 1) + (x1 + 1)]
            - prefix[(y1 + 1) * (w + 1) + x0]
            + prefix[y0 * (w + 1) + x0]
    };

    let r = kernel / 2;
    let mut values = vec![0.0; h * w];
    for y in 0..h {
        let y0 = y.saturating_sub(r);
        let y1 = (y + r).min(h - 1);
        for x in 0..w {
            let x0 = x.saturating_sub(r);
            let x1 = (x + r).min(w - 1);
            let count = ((x1 - x0 + 1) * (y1 - y0 + 1)) as f64;
            values[y * w + x] = (rect_sum(x0, y0, x1, y1) / count).max(0.0);
        }
    }
    Ok(AttentionMap {
        height: h,
        width: w,
        values,
    })
}

/// Keeps the dominant activation region: the peak stays untouched and every
/// other cell is damped by a Gaussian of width `(sigma_x, sigma_y)` derived
/// from the map's second central moments around the peak, floored at
/// `sigma_floor`.
///
/// Returns the masked map, the peak `(x, y)`, and the widths. Argmax ties
/// break row-major (smallest `y`, then smallest `x`).
pub fn primary_peak_retention(
    map: &AttentionMap,
    sigma_floor: f64,
) -> Result<(AttentionMap, (usize, usize), (f64, f64)), GateError> {
    if !(sigma_floor > 0.0) {
        return Err(GateError::InvalidConfig(format!(
            "sigma_floor must be > 0, got {sigma_floor}"
        )));
    }
    let (h, w) = (map.height, map.width);

    let mut peak = (0usize, 0usize);
    let mut peak_value = f64::NEG_INFINITY;
    for y in 0..h {
        for x in 0..w {
            let v = map.at(x, y);
            if v > peak_value {
                peak_value = v;
                peak = (x, y);
            }
        }
    }
    if peak_value <= 0.0 {
        return Err(GateError::AllZeroMap);
    }

    let (px, py) = peak;
    let mut mass = 0.0;
    let mut mx2 = 0.0;
    let mut my2 = 0.0;
    for y in 0..h {
        for x in 0..w {
            let v = map.at(x, y);
            let dx = x as f64 - px as f64;
            let dy = y as f64 - py as f64;
            mass += v;
            mx2 += v * dx * dx;
            my2 += v * dy * dy;
        }
    }
    let sigma_x = (mx2 / mass).sqrt().max(sigma_floor);
    let sigma_y = (my2 / mass).sqrt().max(sigma_floor);

    let mut values = vec![0.0; h * w];
    for y in 0..h {
        for x in 0..w {
            let dx = x as f64 - px as f64;
            let dy = y as f64 - py as f64;
            let falloff =
                (-(dx * dx) / (2.0 * sigma_x * sigma_x) - (dy * dy) / (2.0 * sigma_y * sigma_y))
                    .exp();
            values[y * w + x] = map.at(x, y) * falloff;
        }
    }
    Ok((
        AttentionMap {
            height: h,
            width: w,
            values,
        },
        peak,
        (sigma_x, sigma_y),
    ))
}

/// The polynomial ramp `z^2 (3 - 2z)` on `[0, 1]`; inputs are clamped first.
pub fn smoothstep(z: f64) -> f64 {
    let z = z.clamp(0.0, 1.0);
    z * z * (3.0 - 2.0 * z)
}

/// Nearest-rank quantile: the `ceil(q * N)`-th smallest value (1-indexed).
fn nearest_rank_quantile(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    // The small bias keeps exact products like 0.8 * 100 from ceiling up.
    let rank = ((q * n as f64) - 1e-9).ceil().max(1.0) as usize;
    sorted[rank.min(n) - 1]
}

/// Max-norm normalization followed by a quantile-anchored smoothstep.
///
/// Cells strictly below the `q_low` quantile map to exactly 0, cells at or
/// above the `q_high` quantile to exactly 1. When the two quantiles collapse
/// (spread below `flat_epsilon`) the gate degenerates to a hard indicator at
/// the upper threshold.
pub fn soft_binarize(
    map: &AttentionMap,
    q_low: f64,
    q_high: f64,
    flat_epsilon: f64,
) -> Result<AttentionMap, GateError> {
    if !(q_low > 0.0 && q_low < q_high && q_high <= 1.0) {
        return Err(GateError::InvalidConfig(format!(
            "quantiles must satisfy 0 < q_low < q_high <= 1, got {q_low} and {q_high}"
        )));
    }
    let max = map.values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max <= 0.0 {
        return Err(GateError::AllZeroMap);
    }
    let normalized: Vec<f64> = map.values.iter().map(|v| v / max).collect();
    let mut sorted = normalized.clone();
    sorted.sort_unstable_by(f64::total_cmp);
    let v_low = nearest_rank_quantile(&sorted, q_low);
    let v_high = nearest_rank_quantile(&sorted, q_high);

    let values = if v_high - v_low < flat_epsilon {
        normalized
            .iter()
            .map(|r| f64::from(u8::from(*r >= v_high)))
            .collect()
    } else {
        normalized
            .iter()
            .map(|r| smoothstep((r - v_low) / (v_high - v_low)))
            .collect()
    };
    Ok(AttentionMap {
        height: map.height,
        width: map.width,
        values,
    })
}

/// Full gate pipeline: average, smooth, retain the primary peak, binarize.
pub fn build_gate(anchor_maps: &[AttentionMap], config: &GateConfig) -> Result<Gate, GateError> {
    config.validate()?;
    let averaged = average_maps(anchor_maps)?;
    let smoothed = smooth(&averaged, config.kernel)?;
    let (retained, peak, sigma) = primary_peak_retention(&smoothed, config.sigma_floor)?;
    let binarized = soft_binarize(&retained, config.q_low, config.q_high, config.flat_epsilon)?;
    Ok(Gate {
        height: binarized.height,
        width: binarized.width,
        values: binarized.values,
        peak,
        sigma,
    })
}

/// Intermediate stages of a gate build, for inspection/export.
#[derive(Debug, Clone)]
pub struct GateStages {
    pub averaged: AttentionMap,
    pub smoothed: AttentionMap,
    pub retained: AttentionMap,
    pub gate: Gate,
}

/// Like [`build_gate`] but keeping every intermediate map.
pub fn build_gate_stages(
    anchor_maps: &[AttentionMap],
    config: &GateConfig,
) -> Result<GateStages, GateError> {
    config.validate()?;
    let averaged = average_maps(anchor_maps)?;
    let smoothed = smooth(&averaged, config.kernel)?;
    let (retained, peak, sigma) = primary_peak_retention(&smoothed, config.sigma_floor)?;
    let binarized = soft_binarize(&retained, config.q_low, config.q_high, config.flat_epsilon)?;
    Ok(GateStages {
        averaged,
        smoothed,
        retained: retained.clone(),
        gate: Gate {
            height: binarized.height,
            width: binarized.width,
            values: binarized.values,
            peak,
            sigma,
        },
    })
}

/// Applies the gate to a token's attention map: `A(p) * (1 + G(p))`.
/// No renormalization is performed.
pub fn modulate(attention: &AttentionMap, gate: &Gate) -> Result<AttentionMap, GateError> {
    if attention.height != gate.height || attention.width != gate.width {
        return Err(GateError::DimensionMismatch {
            expected_height: attention.height,
            expected_width: attention.width,
            height: gate.height,
            width: gate.width,
        });
    }
    let values = attention
        .values
        .iter()
        .zip(&gate.values)
        .map(|(a, g)| a * (1.0 + g))
        .collect();
    Ok(AttentionMap {
        height: attention.height,
        width: attention.width,
        values,
    })
}

/// An isotropic Gaussian bump for synthetic test maps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Blob {
    /// Center in pixel coordinates `(x, y)`; may be fractional.
    pub center: (f64, f64),
    /// Width in pixels, `> 0`.
    pub sigma: f64,
    /// Peak height, `>= 0`.
    pub amplitude: f64,
}

/// Sum of Gaussian bumps plus seeded uniform noise in `[0, noise_amplitude)`.
/// Identical inputs produce bit-identical maps on every platform.
pub fn synthesize_map(
    blobs: &[Blob],
    noise_amplitude: f64,
    height: usize,
    width: usize,
    seed: u64,
) -> AttentionMap {
    assert!(height >= 1 && width >= 1, "dims must be positive");
    assert!(noise_amplitude >= 0.0, "noise amplitude must be >= 0");
    for b in blobs {
        assert!(b.sigma > 0.0, "blob sigma must be > 0");
        assert!(b.amplitude >= 0.0, "blob amplitude must be >= 0");
    }

    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut values = vec![0.0f64; height * width];
    for y in 0..height {
        for x in 0..width {
            let mut v = 0.0;
            for b in blobs {
                let dx = x as f64 - b.center.0;
                let dy = y as f64 - b.center.1;
                v += b.amplitude * (-(dx * dx + dy * dy) / (2.0 * b.sigma * b.sigma)).exp();
            }
            if noise_amplitude > 0.0 {
                v += noise_amplitude * unit_f64(&mut rng);
            }
            values[y * width + x] = v;
        }
    }
    AttentionMap {
        height,
        width,
        values,
    }
}

/// Uniform in `[0, 1)` from the top 53 bits of the stream.
fn unit_f64(rng: &mut impl RngCore) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

// --- file formats -----------------------------------------------------------

const ATNM_MAGIC: [u8; 4] = *b"ATNM";
const ATNM_VERSION: u8 = 1;

#[derive(Serialize, Deserialize)]
struct MapJson {
    height: usize,
    width: usize,
    values: Vec<f64>,
}

/// Serializes a map in the ATNM binary layout: magic `ATNM`, version byte 1,
/// height and width as little-endian u32, then row-major f32 values.
pub fn to_atnm_bytes(map: &AttentionMap) -> Vec<u8> {
    let mut out = Vec::with_capacity(9 + 4 * map.values.len());
    out.extend_from_slice(&ATNM_MAGIC);
    out.push(ATNM_VERSION);
    out.extend_from_slice(&(map.height as u32).to_le_bytes());
    out.extend_from_slice(&(map.width as u32).to_le_bytes());
    for v in &map.values {
        out.extend_from_slice(&(*v as f32).to_le_bytes());
    }
    out
}

pub fn from_atnm_bytes(bytes: &[u8]) -> Result<AttentionMap, GateError> {
    if bytes.len() < 13 {
        return Err(GateError::Format("truncated header".into()));
    }
    if bytes[0..4] != ATNM_MAGIC {
        return Err(GateError::Format("bad magic, expected ATNM".into()));
    }
    if bytes[4] != ATNM_VERSION {
        return Err(GateError::Format(format!("unsupported version {}", bytes[4])));
    }
    let height = u32::from_le_bytes(bytes[5..9].try_into().unwrap()) as usize;
    let width = u32::from_le_bytes(bytes[9..13].try_into().unwrap()) as usize;
    let expected = height
        .checked_mul(width)
        .and_then(|n| n.checked_mul(4))
        .ok_or_else(|| GateError::Format("dimension overflow".into()))?;
    let payload = &bytes[13..];
    if payload.len() != expected {
        return Err(GateError::Format(format!(
            "expected {expected} payload bytes for {height}x{width}, got {}",
            payload.len()
        )));
    }
    let values = payload
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
        .collect();
    AttentionMap::new(height, width, values)
}

/// Writes a map as ATNM.
pub fn write_atnm(map: &AttentionMap, path: &Path) -> Result<(), GateError> {
    let mut f = std::fs::File::create(path)?;
    f.write_all(&to_atnm_bytes(map))?;
    Ok(())
}

/// Writes a map as the JSON alternative `{"height", "width", "values"}`.
pub fn write_map_json(map: &AttentionMap, path: &Path) -> Result<(), GateError> {
    let json = MapJson {
        height: map.height,
        width: map.width,
        values: map.values.clone(),
    };
    std::fs::write(path, serde_json::to_vec_pretty(&json)?)?;
    Ok(())
}

/// Reads a map from either format, sniffing the ATNM magic first.
pub fn read_map(path: &Path) -> Result<AttentionMap, GateError> {
    let mut f = std::fs::File::open(path)?;
    let mut bytes = Vec::new();
    f.read_to_end(&mut bytes)?;
    if bytes.len() >= 4 && bytes[0..4] == ATNM_MAGIC {
        from_atnm_bytes(&bytes)
    } else {
        let json: MapJson = serde_json::from_slice(&bytes)?;
        AttentionMap::new(json.height, json.width, json.values)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn map_from(height: usize, width: usize, values: Vec<f64>) -> AttentionMap {
        AttentionMap::new(height, width, values).unwrap()
    }

    #[test]
    fn average_of_identical_maps_is_identity() {
        let m = map_from(2, 2, vec![1.0, 2.0, 3.0, 4.0]);
        let avg = average_maps(&[m.clone(), m.clone()]).unwrap();
        assert_eq!(avg, m);
    }

    #[test]
    fn average_is_linear() {
        let zeros = AttentionMap::zeros(3, 3).unwrap();
        let twos = map_from(3, 3, vec![2.0; 9]);
        let avg = average_maps(&[zeros, twos]).unwrap();
        assert!(avg.values().iter().all(|v| *v == 1.0));
    }

    #[test]
    fn average_matches_per_cell_sum() {
        let a = map_from(4, 4, (0..16).map(|i| (i * 7 % 5) as f64).collect());
        let b = map_from(4, 4, (0..16).map(|i| (i * 3 % 11) as f64).collect());
        let c = map_from(4, 4, (0..16).map(|i| (i % 4) as f64).collect());
        let avg = average_maps(&[a.clone(), b.clone(), c.clone()]).unwrap();
        for i in 0..16 {
            let expect = (a.values()[i] + b.values()[i] + c.values()[i]) / 3.0;
            assert_relative_eq!(avg.values()[i], expect, max_relative = 1e-15);
        }
    }

    #[test]
    fn average_rejects_mismatched_dims_and_empty() {
        let a = AttentionMap::zeros(2, 2).unwrap();
        let b = AttentionMap::zeros(2, 3).unwrap();
        assert!(matches!(
            average_maps(&[a, b]),
            Err(GateError::DimensionMismatch { .. })
        ));
        assert!(matches!(average_maps(&[]), Err(GateError::EmptyMapList)));
    }

    #[test]
    fn smooth_keeps_constants() {
        let m = map_from(6, 6, vec![0.37; 36]);
        let s = smooth(&m, 5).unwrap();
        for v in s.values() {
            assert_relative_eq!(*v, 0.37, max_relative = 1e-12);
        }
    }

    #[test]
    fn smooth_kernel_one_is_identity() {
        let m = map_from(3, 4, (0..12).map(|i| i as f64).collect());
        assert_eq!(smooth(&m, 1).unwrap(), m);
    }

    #[test]
    fn smooth_spreads_interior_spike() {
        // 9x9 zeros with a spike at the center; kernel 5 averages it into
        // every cell within Chebyshev distance 2.
        let mut values = vec![0.0; 81];
        values[4 * 9 + 4] = 50.0;
        let s = smooth(&map_from(9, 9, values), 5).unwrap();
        for y in 0..9usize {
            for x in 0..9usize {
                let cheb = x.abs_diff(4).max(y.abs_diff(4));
                let expect = if cheb <= 2 { 2.0 } else { 0.0 };
                assert_relative_eq!(s.at(x, y), expect, max_relative = 1e-12, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn smooth_rejects_bad_kernels() {
        let m = AttentionMap::zeros(4, 4).unwrap();
        assert!(matches!(smooth(&m, 4), Err(GateError::InvalidKernel(_))));
        assert!(matches!(smooth(&m, 0), Err(GateError::InvalidKernel(_))));
        assert!(matches!(smooth(&m, 9), Err(GateError::InvalidKernel(_))));
    }

    #[test]
    fn smooth_preserves_interior_mass() {
        // Support well away from all borders.
        let mut values = vec![0.0; 15 * 15];
        for y in 6..9 {
            for x in 6..9 {
                values[y * 15 + x] = (1 + x + y) as f64;
            }
        }
        let m = map_from(15, 15, values);
        let s = smooth(&m, 5).unwrap();
        let before: f64 = m.values().iter().sum();
        let after: f64 = s.values().iter().sum();
        assert_relative_eq!(before, after, max_relative = 1e-9);
    }

    #[test]
    fn retention_keeps_peak_untouched() {
        let mut values = vec![0.1; 49];
        values[3 * 7 + 3] = 5.0;
        let m = map_from(7, 7, values);
        let (r, peak, sigma) = primary_peak_retention(&m, 1.0).unwrap();
        assert_eq!(peak, (3, 3));
        assert_eq!(r.at(3, 3), 5.0);
        assert!(sigma.0 >= 1.0 && sigma.1 >= 1.0);
        // Never increases any cell.
        for (out, orig) in r.values().iter().zip(m.values()) {
            assert!(*out <= *orig + 1e-15);
            assert!(*out >= 0.0);
        }
    }

    #[test]
    fn retention_two_equal_spikes_scales_secondary() {
        // Equal spikes at (1, 2) and (6, 2); the row-major tie-break keeps
        // (1, 2) as the peak.
        let mut values = vec![0.0; 5 * 8];
        values[2 * 8 + 1] = 3.0;
        values[2 * 8 + 6] = 3.0;
        let m = map_from(5, 8, values);
        let (r, peak, (sx, sy)) = primary_peak_retention(&m, 1.0).unwrap();
        assert_eq!(peak, (1, 2));
        // Moments: half the mass sits 5 columns away, none off-row.
        assert_relative_eq!(sx, (25.0f64 / 2.0).sqrt(), max_relative = 1e-12);
        assert_eq!(sy, 1.0); // floored
        let expect = 3.0 * (-(25.0) / (2.0 * sx * sx)).exp();
        assert_relative_eq!(r.at(6, 2), expect, max_relative = 1e-12);
        assert_eq!(r.at(1, 2), 3.0);
    }

    #[test]
    fn retention_single_spike_hits_sigma_floor() {
        let mut values = vec![0.0; 25];
        values[12] = 2.0;
        let m = map_from(5, 5, values);
        let (r, peak, sigma) = primary_peak_retention(&m, 1.0).unwrap();
        assert_eq!(peak, (2, 2));
        assert_eq!(sigma, (1.0, 1.0));
        assert_eq!(r, m);
    }

    #[test]
    fn retention_rejects_all_zero() {
        let m = AttentionMap::zeros(3, 3).unwrap();
        assert!(matches!(
            primary_peak_retention(&m, 1.0),
            Err(GateError::AllZeroMap)
        ));
    }

    #[test]
    fn smoothstep_fixed_points() {
        assert_eq!(smoothstep(0.0), 0.0);
        assert_eq!(smoothstep(0.5), 0.5);
        assert_eq!(smoothstep(1.0), 1.0);
        assert_eq!(smoothstep(-3.0), 0.0);
        assert_eq!(smoothstep(7.0), 1.0);
    }

    #[test]
    fn soft_binarize_quantile_ramp() {
        // 10x10 map holding 1..=100: nearest-rank quantiles of the
        // normalized values are 0.80 and 0.99.
        let m = map_from(10, 10, (1..=100).map(f64::from).collect());
        let g = soft_binarize(&m, 0.8, 0.99, 1e-9).unwrap();
        // Cell with raw value 90: z = (0.90 - 0.80) / 0.19.
        let z: f64 = (0.90 - 0.80) / (0.99 - 0.80);
        let expect = z * z * (3.0 - 2.0 * z);
        let idx90 = 89;
        assert_relative_eq!(g.values()[idx90], expect, max_relative = 1e-12);
        // Strictly below v_low: exactly 0. At or above v_high: exactly 1.
        assert_eq!(g.values()[78], 0.0); // raw 79 -> 0.79 < 0.80
        assert_eq!(g.values()[98], 1.0); // raw 99 -> 0.99
        assert_eq!(g.values()[99], 1.0);
        assert!(g.values().iter().all(|v| (0.0..=1.0).contains(v)));
    }

    #[test]
    fn soft_binarize_flat_map_degenerates_to_indicator() {
        let m = map_from(2, 2, vec![3.0; 4]);
        let g = soft_binarize(&m, 0.8, 0.99, 1e-9).unwrap();
        // All normalized values equal 1 = v_high, so the indicator is 1.
        assert!(g.values().iter().all(|v| *v == 1.0));
    }

    #[test]
    fn soft_binarize_rejects_all_zero_and_bad_quantiles() {
        let z = AttentionMap::zeros(2, 2).unwrap();
        assert!(matches!(
            soft_binarize(&z, 0.8, 0.99, 1e-9),
            Err(GateError::AllZeroMap)
        ));
        let m = map_from(1, 2, vec![1.0, 2.0]);
        assert!(soft_binarize(&m, 0.9, 0.8, 1e-9).is_err());
    }

    #[test]
    fn build_gate_single_blob() {
        let m = synthesize_map(
            &[Blob {
                center: (16.0, 16.0),
                sigma: 3.0,
                amplitude: 1.0,
            }],
            0.0,
            32,
            32,
            7,
        );
        let gate = build_gate(&[m], &GateConfig::default()).unwrap();
        assert_eq!(gate.peak, (16, 16));
        assert_eq!(gate.at(16, 16), 1.0);
        assert_eq!(gate.at(0, 0), 0.0);
        assert_eq!(gate.at(31, 31), 0.0);
        assert!(gate.values().iter().all(|v| (0.0..=1.0).contains(v)));
    }

    #[test]
    fn build_gate_two_blob_suppression() {
        // Secondary at 90% of the primary's height, 6 sigma away. The blob
        // core must be large relative to the top-1% cell count, otherwise
        // the q_high threshold dives below the suppressed secondary.
        let m = synthesize_map(
            &[
                Blob {
                    center: (9.0, 18.0),
                    sigma: 3.0,
                    amplitude: 1.0,
                },
                Blob {
                    center: (27.0, 18.0),
                    sigma: 3.0,
                    amplitude: 0.9,
                },
            ],
            0.0,
            36,
            36,
            1,
        );
        let gate = build_gate(&[m], &GateConfig::default()).unwrap();
        assert_eq!(gate.peak, (9, 18));
        // Every cell closer to the secondary blob stays below half-gate.
        for y in 0..36u32 {
            for x in 0..36u32 {
                let d1 = (x as f64 - 9.0).hypot(y as f64 - 18.0);
                let d2 = (x as f64 - 27.0).hypot(y as f64 - 18.0);
                if d2 < d1 {
                    assert!(
                        gate.at(x as usize, y as usize) < 0.5,
                        "cell ({x},{y}) near secondary peak has gate {}",
                        gate.at(x as usize, y as usize)
                    );
                }
            }
        }
    }

    #[test]
    fn build_gate_rejects_all_zero_input() {
        let z = AttentionMap::zeros(8, 8).unwrap();
        assert!(matches!(
            build_gate(&[z], &GateConfig::default()),
            Err(GateError::AllZeroMap)
        ));
    }

    #[test]
    fn build_gate_is_bit_identical_across_runs() {
        let cfg = GateConfig::default();
        let maps = vec![
            synthesize_map(
                &[Blob {
                    center: (5.0, 9.0),
                    sigma: 2.0,
                    amplitude: 1.0,
                }],
                0.01,
                24,
                24,
                42,
            ),
            synthesize_map(
                &[Blob {
                    center: (6.0, 9.0),
                    sigma: 2.0,
                    amplitude: 0.8,
                }],
                0.01,
                24,
                24,
                43,
            ),
        ];
        let a = build_gate(&maps, &cfg).unwrap();
        let b = build_gate(&maps, &cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(
            to_atnm_bytes(&a.to_map()),
            to_atnm_bytes(&b.to_map())
        );
    }

    #[test]
    fn modulate_identity_and_doubling() {
        let a = map_from(2, 2, vec![0.5, 1.0, 1.5, 2.0]);
        let zero_gate = Gate {
            height: 2,
            width: 2,
            values: vec![0.0; 4],
            peak: (0, 0),
            sigma: (1.0, 1.0),
        };
        assert_eq!(modulate(&a, &zero_gate).unwrap(), a);

        let one_gate = Gate {
            values: vec![1.0, 0.0, 0.0, 0.0],
            ..zero_gate
        };
        let out = modulate(&a, &one_gate).unwrap();
        assert_eq!(out.values()[0], 1.0);
        assert_eq!(out.values()[1], 1.0);
    }

    #[test]
    fn modulate_matches_per_cell_product() {
        let a = synthesize_map(&[], 1.0, 6, 6, 11);
        let g_map = synthesize_map(&[], 1.0, 6, 6, 12);
        let max = g_map.values().iter().fold(0.0f64, |m, v| m.max(*v));
        let gate = Gate {
            height: 6,
            width: 6,
            values: g_map.values().iter().map(|v| v / max).collect(),
            peak: (0, 0),
            sigma: (1.0, 1.0),
        };
        let out = modulate(&a, &gate).unwrap();
        for i in 0..36 {
            assert_relative_eq!(
                out.values()[i],
                a.values()[i] * (1.0 + gate.values()[i]),
                max_relative = 1e-15
            );
        }
        assert!(matches!(
            modulate(&AttentionMap::zeros(3, 3).unwrap(), &gate),
            Err(GateError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn synthesize_is_deterministic_and_centered() {
        let blob = Blob {
            center: (3.0, 4.0),
            sigma: 1.5,
            amplitude: 2.0,
        };
        let a = synthesize_map(&[blob], 0.0, 8, 8, 5);
        let argmax = a
            .values()
            .iter()
            .enumerate()
            .max_by(|(_, x), (_, y)| x.total_cmp(y))
            .unwrap()
            .0;
        assert_eq!((argmax % 8, argmax / 8), (3, 4));

        let b = synthesize_map(&[blob], 0.25, 8, 8, 99);
        let c = synthesize_map(&[blob], 0.25, 8, 8, 99);
        assert_eq!(b, c);

        let empty = synthesize_map(&[], 0.0, 4, 4, 0);
        assert!(empty.values().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn atnm_round_trip_and_json_equivalence() {
        let m = synthesize_map(
            &[Blob {
                center: (2.0, 3.0),
                sigma: 1.0,
                amplitude: 1.0,
            }],
            0.1,
            5,
            7,
            21,
        );
        let bytes = to_atnm_bytes(&m);
        let back = from_atnm_bytes(&bytes).unwrap();
        assert_eq!(back.height(), 5);
        assert_eq!(back.width(), 7);
        // f32 storage: equality after one round through f32.
        for (orig, rt) in m.values().iter().zip(back.values()) {
            assert_eq!(*orig as f32 as f64, *rt);
        }

        let dir = tempfile::tempdir().unwrap();
        let bin_path = dir.path().join("m.atnm");
        let json_path = dir.path().join("m.json");
        write_atnm(&back, &bin_path).unwrap();
        write_map_json(&back, &json_path).unwrap();
        let from_bin = read_map(&bin_path).unwrap();
        let from_json = read_map(&json_path).unwrap();
        assert_eq!(from_bin, back);
        assert_eq!(from_json, back);
    }

    #[test]
    fn atnm_rejects_bad_input() {
        assert!(matches!(
            from_atnm_bytes(b"NOPE\x01aaaaaaaaaaaa"),
            Err(GateError::Format(_))
        ));
        let m = AttentionMap::zeros(2, 2).unwrap();
        let mut bytes = to_atnm_bytes(&m);
        bytes.truncate(bytes.len() - 1);
        assert!(matches!(from_atnm_bytes(&bytes), Err(GateError::Format(_))));
        assert!(AttentionMap::new(2, 2, vec![1.0, -0.5, 0.0, 0.0]).is_err());
        assert!(AttentionMap::new(0, 2, vec![]).is_err());
    }
}

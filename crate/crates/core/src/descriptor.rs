//! Raster front end: Sobel jets, pointwise projective features, homography
//! warps and an experimental weight `-1` Monte Carlo integrand.
//!
//! Pixel coordinates are `(x, y) = (column, row)`; `q` is the derivative along
//! rows. Sampling between pixels is bilinear with clamped borders.

use std::path::Path;

use image::codecs::pnm::{GraymapHeader, PnmEncoder, PnmHeader, SampleEncoding};
use image::{ImageBuffer, ImageReader, Luma};
use rand::Rng;
use serde::Serialize;

use crate::action::Homography;
use crate::error::{Error, Result};
use crate::exec::{seeded_rng, Execution, TrialConfig};
use crate::invariants::{generating_set, InvariantVector};
use crate::jet::{JetBlock, JetConfiguration, DEFAULT_EPS_GP};
use crate::relative::invariantized_jacobian;

/// Row-major grayscale image with intensities in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 || width * height != data.len() {
            return Err(Error::InvalidArgument(format!(
                "{width}x{height} image with {} samples",
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("non-finite intensity".into()));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn from_fn(width: usize, height: usize, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x as f64, y as f64));
            }
        }
        Self::new(width, height, data)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn pixel(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    /// Bilinear intensity at a real position, clamping to the border.
    pub fn sample(&self, x: f64, y: f64) -> f64 {
        let xmax = (self.width - 1) as f64;
        let ymax = (self.height - 1) as f64;
        let x = if x.is_nan() { 0.0 } else { x.clamp(0.0, xmax) };
        let y = if y.is_nan() { 0.0 } else { y.clamp(0.0, ymax) };
        let x0 = (x.floor() as usize).min(self.width.saturating_sub(2));
        let y0 = (y.floor() as usize).min(self.height.saturating_sub(2));
        let x1 = (x0 + 1).min(self.width - 1);
        let y1 = (y0 + 1).min(self.height - 1);
        let fx = x - x0 as f64;
        let fy = y - y0 as f64;
        let lerp = |a: f64, b: f64, t: f64| a + (b - a) * t;
        let top = lerp(self.pixel(x0, y0), self.pixel(x1, y0), fx);
        let bottom = lerp(self.pixel(x0, y1), self.pixel(x1, y1), fx);
        lerp(top, bottom, fy)
    }

    /// Reads a binary or ASCII PNM graymap; 8- and 16-bit samples are scaled to `[0, 1]`.
    pub fn read_pgm(path: impl AsRef<Path>) -> Result<Self> {
        let reader = ImageReader::open(path.as_ref())?
            .with_guessed_format()
            .map_err(Error::from)?;
        let img = reader.decode().map_err(image_error)?.into_luma16();
        let (w, h) = img.dimensions();
        let data = img.into_raw().into_iter().map(|v| f64::from(v) / 65535.0).collect();
        Self::new(w as usize, h as usize, data)
    }

    /// Writes a binary graymap (`P5`) with 8 or 16 bits per sample.
    pub fn write_pgm(&self, path: impl AsRef<Path>, bits: u8) -> Result<()> {
        let file = std::fs::File::create(path.as_ref())?;
        let (w, h) = (self.width as u32, self.height as u32);
        let header = |maxwhite| {
            PnmHeader::from(GraymapHeader {
                encoding: SampleEncoding::Binary,
                height: h,
                width: w,
                maxwhite,
            })
        };
        let enc = PnmEncoder::new(std::io::BufWriter::new(file));
        let quant = |v: f64, max: f64| (v.clamp(0.0, 1.0) * max).round();
        match bits {
            8 => {
                let raw = self.data.iter().map(|&v| quant(v, 255.0) as u8).collect();
                let buf: ImageBuffer<Luma<u8>, Vec<u8>> =
                    ImageBuffer::from_raw(w, h, raw).expect("buffer size matches");
                buf.write_with_encoder(enc.with_header(header(255))).map_err(image_error)
            }
            16 => {
                let raw = self.data.iter().map(|&v| quant(v, 65535.0) as u16).collect();
                let buf: ImageBuffer<Luma<u16>, Vec<u16>> =
                    ImageBuffer::from_raw(w, h, raw).expect("buffer size matches");
                buf.write_with_encoder(enc.with_header(header(65535))).map_err(image_error)
            }
            _ => Err(Error::InvalidArgument(format!("unsupported bit depth {bits}"))),
        }
    }
}

fn image_error(e: image::ImageError) -> Error {
    match e {
        image::ImageError::IoError(e) => Error::from(e),
        other => Error::Parse(other.to_string()),
    }
}

fn check_interior(img: &GrayImage, x: f64, y: f64) -> Result<()> {
    let ok = |v: f64, len: usize| v.is_finite() && v >= 1.0 && v <= len as f64 - 2.0;
    if ok(x, img.width) && ok(y, img.height) {
        Ok(())
    } else {
        Err(Error::OutOfBounds { x, y })
    }
}

/// Sobel gradient at one point, `1/8` per unit pixel.
pub fn sobel_gradient(img: &GrayImage, x: f64, y: f64) -> Result<(f64, f64)> {
    check_interior(img, x, y)?;
    let u = |dx: f64, dy: f64| img.sample(x + dx, y + dy);
    let dx = |dy: f64| u(1.0, dy) - u(-1.0, dy);
    let dy = |dx: f64| u(dx, 1.0) - u(dx, -1.0);
    let p = (dx(-1.0) + 2.0 * dx(0.0) + dx(1.0)) / 8.0;
    let q = (dy(-1.0) + 2.0 * dy(0.0) + dy(1.0)) / 8.0;
    Ok((p, q))
}

/// Jets estimated with Sobel filters at the given pixel positions.
pub fn sobel_jet(img: &GrayImage, pts: &[(f64, f64)]) -> Result<JetConfiguration> {
    let blocks = pts
        .iter()
        .map(|&(x, y)| {
            let (p, q) = sobel_gradient(img, x, y)?;
            Ok(JetBlock::new(x, y, p, q))
        })
        .collect::<Result<Vec<_>>>()?;
    JetConfiguration::new(blocks)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FeatureSample {
    pub cfg: JetConfiguration,
    pub features: InvariantVector,
    pub c_value: f64,
}

/// Features of a configuration whose jets are already known.
pub fn features_of(cfg: JetConfiguration) -> Result<FeatureSample> {
    cfg.require_general_position(DEFAULT_EPS_GP)?;
    let features = generating_set(&cfg)?;
    let c_value = invariantized_jacobian(&cfg)?;
    Ok(FeatureSample {
        cfg,
        features,
        c_value,
    })
}

pub fn feature_at(img: &GrayImage, pts: &[(f64, f64)]) -> Result<FeatureSample> {
    features_of(sobel_jet(img, pts)?)
}

/// Inverse-mapping warp: `out(y) = img(h⁻¹·y)`, bilinear, clamped.
/// Pixels whose preimage is at or beyond the line at infinity are set to 0.
pub fn warp(img: &GrayImage, h: &Homography) -> Result<GrayImage> {
    let inv = h.inverse()?;
    let m = inv.rows();
    let (w, ht) = (img.width, img.height);
    let row = |y: usize| {
        let yf = y as f64;
        (0..w).map(move |x| {
            let xf = x as f64;
            let den = m[2][0] * xf + m[2][1] * yf + m[2][2];
            if den <= 0.0 {
                return 0.0;
            }
            let sx = (m[0][0] * xf + m[0][1] * yf + m[0][2]) / den;
            let sy = (m[1][0] * xf + m[1][1] * yf + m[1][2]) / den;
            img.sample(sx, sy)
        })
    };
    let rows: Vec<Vec<f64>> = Execution::default().map(ht, |y| row(y).collect());
    GrayImage::new(w, ht, rows.concat())
}

/// `x ↦ 2x/(w-1) - 1` on both axes, taking the pixel grid onto `[-1, 1]²`.
pub fn pixel_normalization(width: usize, height: usize) -> Homography {
    let sx = 2.0 / (width.max(2) - 1) as f64;
    let sy = 2.0 / (height.max(2) - 1) as f64;
    Homography::from_rows([[sx, 0.0, -1.0], [0.0, sy, -1.0], [0.0, 0.0, 1.0]])
        .expect("diagonal scaling is invertible")
}

/// `N⁻¹ g N`: a homography given in normalized coordinates, acting on pixels.
pub fn to_pixel_homography(g: &Homography, width: usize, height: usize) -> Result<Homography> {
    let n = pixel_normalization(width, height);
    n.inverse()?.compose(g)?.compose(&n)
}

/// A sum of isotropic Gaussian bumps over a constant offset, with exact gradients.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GaussianBlobs {
    pub offset: f64,
    /// `(cx, cy, sigma, amplitude)`.
    pub blobs: Vec<(f64, f64, f64, f64)>,
}

impl GaussianBlobs {
    pub fn single(cx: f64, cy: f64, sigma: f64) -> Self {
        Self {
            offset: 0.0,
            blobs: vec![(cx, cy, sigma, 1.0)],
        }
    }

    /// Smooth pattern used by the warp harness, scaled to the image size.
    pub fn test_pattern(width: usize, height: usize) -> Self {
        let (w, h) = (width as f64, height as f64);
        let s = w.min(h);
        Self {
            offset: 0.2,
            blobs: vec![
                (0.30 * w, 0.35 * h, 0.32 * s, 0.45),
                (0.70 * w, 0.30 * h, 0.40 * s, 0.35),
                (0.45 * w, 0.72 * h, 0.36 * s, 0.40),
                (0.80 * w, 0.78 * h, 0.24 * s, -0.15),
            ],
        }
    }

    pub fn value(&self, x: f64, y: f64) -> f64 {
        self.offset
            + self
                .blobs
                .iter()
                .map(|&(cx, cy, s, a)| a * (-((x - cx).powi(2) + (y - cy).powi(2)) / (2.0 * s * s)).exp())
                .sum::<f64>()
    }

    pub fn gradient(&self, x: f64, y: f64) -> (f64, f64) {
        self.blobs.iter().fold((0.0, 0.0), |(p, q), &(cx, cy, s, a)| {
            let e = a * (-((x - cx).powi(2) + (y - cy).powi(2)) / (2.0 * s * s)).exp();
            (p - e * (x - cx) / (s * s), q - e * (y - cy) / (s * s))
        })
    }

    pub fn rasterize(&self, width: usize, height: usize) -> Result<GrayImage> {
        GrayImage::from_fn(width, height, |x, y| self.value(x, y))
    }

    /// Exact jets at the given points.
    pub fn jet(&self, pts: &[(f64, f64)]) -> Result<JetConfiguration> {
        let blocks = pts
            .iter()
            .map(|&(x, y)| {
                let (p, q) = self.gradient(x, y);
                JetBlock::new(x, y, p, q)
            })
            .collect();
        JetConfiguration::new(blocks)
    }

    /// Exact jets of `u ∘ h⁻¹` at `h(pts)`, through the Jacobian of `h⁻¹`.
    pub fn warped_jet(&self, h: &Homography, pts: &[(f64, f64)]) -> Result<JetConfiguration> {
        let m = h.inverse()?.rows();
        let blocks = pts
            .iter()
            .map(|&pt| {
                let (yx, yy) = h.act_point(pt)?;
                let v = [yx, yy, 1.0];
                let dot = |r: &[f64; 3]| r[0] * v[0] + r[1] * v[1] + r[2];
                let (a, b, c) = (dot(&m[0]), dot(&m[1]), dot(&m[2]));
                let (sx, sy) = (a / c, b / c);
                let (ux, uy) = self.gradient(sx, sy);
                // d(a/c)/dy_j = (m0j c - m2j a) / c²
                let jac = |j: usize| ((m[0][j] * c - m[2][j] * a) / (c * c), (m[1][j] * c - m[2][j] * b) / (c * c));
                let (dx0, dy0) = jac(0);
                let (dx1, dy1) = jac(1);
                Ok(JetBlock::new(yx, yy, ux * dx0 + uy * dy0, ux * dx1 + uy * dy1))
            })
            .collect::<Result<Vec<_>>>()?;
        JetConfiguration::new(blocks)
    }
}

/// Relative L2 error of Sobel gradients against exact ones over all pixels at
/// least `margin` pixels from the border.
pub fn sobel_relative_error(img: &GrayImage, exact: &GaussianBlobs, margin: usize) -> Result<f64> {
    let margin = margin.max(1);
    let (mut err, mut norm) = (0.0, 0.0);
    for y in margin..img.height.saturating_sub(margin) {
        for x in margin..img.width.saturating_sub(margin) {
            let (p, q) = sobel_gradient(img, x as f64, y as f64)?;
            let (pe, qe) = exact.gradient(x as f64, y as f64);
            err += (p - pe).powi(2) + (q - qe).powi(2);
            norm += pe * pe + qe * qe;
        }
    }
    if norm == 0.0 {
        return Err(Error::ZeroValue);
    }
    Ok((err / norm).sqrt())
}

/// Feature-wise `|a - b| / max(|a|, |b|)`.
pub fn feature_deviation(a: &InvariantVector, b: &InvariantVector) -> f64 {
    a.values()
        .iter()
        .zip(b.values())
        .map(|(&u, v)| crate::rel_diff(u, v))
        .fold(0.0, f64::max)
}

/// Worst relative sensitivity of the generating set to gradient errors of a
/// common absolute size: `max_i G Σ_j (|∂f_i/∂p_j| + |∂f_i/∂q_j|) / |f_i|`
/// with `G` the largest gradient norm in the configuration.
pub fn feature_condition(cfg: &JetConfiguration) -> Result<f64> {
    let values = generating_set(cfg)?.values();
    let jac = crate::verify::fd_jacobian(|c| Ok(generating_set(c)?.values()), cfg, crate::verify::DEFAULT_FD_STEP)?;
    let g = cfg.blocks().iter().map(|b| b.p.hypot(b.q)).fold(0.0, f64::max);
    let mut worst = 0.0_f64;
    for (i, f) in values.iter().enumerate() {
        let s: f64 = (0..cfg.len())
            .map(|j| jac[(i, 4 * j + 2)].abs() + jac[(i, 4 * j + 3)].abs())
            .sum();
        worst = worst.max(g * s / f.abs());
    }
    Ok(worst)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WarpReport {
    pub n: usize,
    pub trials: usize,
    pub seed: u64,
    pub spread: f64,
    pub max_rel_deviation: f64,
    pub failures: usize,
    pub tolerance: f64,
}

impl WarpReport {
    pub fn passes(&self) -> bool {
        self.failures == 0
    }
}

/// Minimum configuration conditioning accepted by the warp harness.
pub const WARP_CONDITIONING: f64 = 0.05;
/// Largest [`feature_condition`] accepted by the warp harness. Sobel errors
/// after resampling stay near `1e-4` of the largest gradient, and feature
/// deviations scale with the conditioning, so this keeps comparisons away from
/// near-zero features and near-vanishing denominators.
pub const WARP_FEATURE_CONDITION: f64 = 50.0;
/// Draw attempts per warp trial.
const POINT_DRAWS: usize = 1000;

/// Draws `n` points in the central `[m, size - 1 - m]²` box, `m = size/8`,
/// whose estimated jets pass both conditioning thresholds.
fn sample_points<R: Rng + ?Sized>(
    rng: &mut R,
    img: &GrayImage,
    n: usize,
    min_conditioning: f64,
) -> Option<Vec<(f64, f64)>> {
    let mx = (img.width / 8).max(1) as f64;
    let my = (img.height / 8).max(1) as f64;
    for _ in 0..POINT_DRAWS {
        let pts: Vec<_> = (0..n)
            .map(|_| {
                (
                    rng.gen_range(mx..=img.width as f64 - 1.0 - mx),
                    rng.gen_range(my..=img.height as f64 - 1.0 - my),
                )
            })
            .collect();
        let Ok(cfg) = sobel_jet(img, &pts) else { continue };
        if cfg.general_position(0.0).conditioning() >= min_conditioning
            && feature_condition(&cfg).is_ok_and(|k| k <= WARP_FEATURE_CONDITION)
        {
            return Some(pts);
        }
    }
    None
}

/// Warp robustness: per trial, a homography near the identity (in normalized
/// coordinates) warps `img`; features at `pts` on `img` are compared with
/// features at `h(pts)` on the warped image.
pub fn warp_robustness(img: &GrayImage, n: usize, trials: &TrialConfig, tolerance: f64) -> WarpReport {
    let results = trials.exec.map(trials.trials, |t| {
        let mut rng = trials.rng(t);
        let g = Homography::sample_with(&mut rng, trials.spread).ok()?;
        let h = to_pixel_homography(&g, img.width, img.height).ok()?;
        let pts = sample_points(&mut rng, img, n, WARP_CONDITIONING)?;
        let warped = warp(img, &h).ok()?;
        let moved = pts.iter().map(|&p| h.act_point(p)).collect::<Result<Vec<_>>>().ok()?;
        let a = feature_at(img, &pts).ok()?;
        let b = feature_at(&warped, &moved).ok()?;
        Some(feature_deviation(&a.features, &b.features))
    });
    let report = crate::verify::TrialReport::collect(&results, tolerance, trials);
    WarpReport {
        n,
        trials: report.trials,
        seed: report.seed,
        spread: report.spread,
        max_rel_deviation: report.max_rel_residual,
        failures: report.failures,
        tolerance,
    }
}

/// `F = 𝒞(cfg) · ∏ u_i`.
pub fn mc_weight_integrand(cfg: &JetConfiguration, u_values: &[f64]) -> Result<f64> {
    if u_values.len() != cfg.len() {
        return Err(Error::InvalidArgument(format!(
            "{} intensities for {} points",
            u_values.len(),
            cfg.len()
        )));
    }
    let prod: f64 = u_values.iter().product();
    if prod == 0.0 {
        return Ok(0.0);
    }
    Ok(invariantized_jacobian(cfg)? * prod)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct McEstimate {
    pub estimate: f64,
    pub stderr: f64,
    pub samples: usize,
    pub used: usize,
    pub skipped: usize,
    pub n: usize,
    pub seed: u64,
}

/// Pixel positions of Monte Carlo sample `index`.
pub fn mc_sample_points(img: &GrayImage, n: usize, seed: u64, index: usize) -> Vec<(f64, f64)> {
    let mut rng = seeded_rng(seed, index as u64);
    (0..n)
        .map(|_| {
            (
                rng.gen_range(1.0..=img.width as f64 - 2.0),
                rng.gen_range(1.0..=img.height as f64 - 2.0),
            )
        })
        .collect()
}

/// Integrand value at sample `index`, `None` when the sample is skipped.
pub fn mc_sample(img: &GrayImage, n: usize, seed: u64, index: usize) -> Option<f64> {
    let pts = mc_sample_points(img, n, seed, index);
    let cfg = sobel_jet(img, &pts).ok()?;
    cfg.require_general_position(DEFAULT_EPS_GP).ok()?;
    let u: Vec<f64> = pts.iter().map(|&(x, y)| img.sample(x, y)).collect();
    mc_weight_integrand(&cfg, &u).ok().filter(|v| v.is_finite())
}

/// Experimental Monte Carlo mean of [`mc_weight_integrand`] over uniform
/// interior configurations. Sample `i` uses random stream `i`, so the result
/// does not depend on the execution mode.
pub fn mc_descriptor(img: &GrayImage, n: usize, samples: usize, seed: u64, exec: Execution) -> Result<McEstimate> {
    if samples == 0 {
        return Err(Error::InvalidArgument("samples must be >= 1".into()));
    }
    if n < 3 {
        return Err(Error::TooFewPoints(n));
    }
    if img.width < 3 || img.height < 3 {
        return Err(Error::InvalidArgument("image smaller than 3x3".into()));
    }
    let values = exec.map(samples, |i| mc_sample(img, n, seed, i));
    let used: Vec<f64> = values.iter().flatten().copied().collect();
    let k = used.len();
    let (estimate, stderr) = if k == 0 {
        (0.0, 0.0)
    } else {
        let mean = used.iter().sum::<f64>() / k as f64;
        let var = if k > 1 {
            used.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (k - 1) as f64
        } else {
            0.0
        };
        (mean, (var / k as f64).sqrt())
    };
    Ok(McEstimate {
        estimate,
        stderr,
        samples,
        used: k,
        skipped: samples - k,
        n,
        seed,
    })
}

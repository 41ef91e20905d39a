//! Points of the n-fold first jet space and the bracket functions built on them.
//!
//! Point indices in the public bracket functions ([`JetConfiguration::delta`],
//! [`JetConfiguration::phi`]) are 1-based, so `delta(1, 2, 3)` is the signed
//! area bracket of the first three points.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default general-position threshold.
pub const DEFAULT_EPS_GP: f64 = 1e-8;

/// Position and first derivatives of a scalar field at one point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JetBlock {
    pub x: f64,
    pub y: f64,
    pub p: f64,
    pub q: f64,
}

impl JetBlock {
    pub const fn new(x: f64, y: f64, p: f64, q: f64) -> Self {
        Self { x, y, p, q }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.p.is_finite() && self.q.is_finite()
    }

    pub fn to_array(self) -> [f64; 4] {
        [self.x, self.y, self.p, self.q]
    }

    pub fn from_array(a: [f64; 4]) -> Self {
        Self::new(a[0], a[1], a[2], a[3])
    }
}

/// An ordered configuration of `n >= 3` jet blocks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ConfigFile", into = "ConfigFile")]
pub struct JetConfiguration {
    blocks: Vec<JetBlock>,
}

#[derive(Serialize, Deserialize)]
struct ConfigFile {
    points: Vec<JetBlock>,
}

impl TryFrom<ConfigFile> for JetConfiguration {
    type Error = Error;

    fn try_from(f: ConfigFile) -> Result<Self> {
        JetConfiguration::new(f.points)
    }
}

impl From<JetConfiguration> for ConfigFile {
    fn from(c: JetConfiguration) -> Self {
        ConfigFile { points: c.blocks }
    }
}

impl JetConfiguration {
    pub fn new(blocks: Vec<JetBlock>) -> Result<Self> {
        if blocks.len() < 3 {
            return Err(Error::TooFewPoints(blocks.len()));
        }
        if let Some(block) = blocks.iter().position(|b| !b.is_finite()) {
            return Err(Error::NonFinite { block: block + 1 });
        }
        Ok(Self { blocks })
    }

    /// Builds a configuration from a flat coordinate vector `(x1, y1, p1, q1, x2, ...)`.
    pub fn from_flat(coords: &[f64]) -> Result<Self> {
        if !coords.len().is_multiple_of(4) {
            return Err(Error::InvalidArgument(format!(
                "flat coordinate length {} is not a multiple of 4",
                coords.len()
            )));
        }
        Self::new(
            coords
                .chunks_exact(4)
                .map(|c| JetBlock::new(c[0], c[1], c[2], c[3]))
                .collect(),
        )
    }

    pub fn to_flat(&self) -> Vec<f64> {
        self.blocks.iter().flat_map(|b| b.to_array()).collect()
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    pub fn blocks(&self) -> &[JetBlock] {
        &self.blocks
    }

    /// Block `i` (1-based).
    pub fn block(&self, i: usize) -> Result<&JetBlock> {
        self.check_index(i)?;
        Ok(&self.blocks[i - 1])
    }

    pub fn into_blocks(self) -> Vec<JetBlock> {
        self.blocks
    }

    fn check_index(&self, i: usize) -> Result<()> {
        if i == 0 || i > self.blocks.len() {
            Err(Error::IndexOutOfRange {
                index: i,
                n: self.blocks.len(),
            })
        } else {
            Ok(())
        }
    }

    /// Signed area bracket of points `i, j, k` (1-based): the determinant with
    /// columns `(x, y, 1)` of the three points.
    pub fn delta(&self, i: usize, j: usize, k: usize) -> Result<f64> {
        for &idx in &[i, j, k] {
            self.check_index(idx)?;
        }
        if i == j || j == k || i == k {
            return Err(Error::RepeatedIndex(vec![i, j, k]));
        }
        Ok(self.delta0(i - 1, j - 1, k - 1))
    }

    /// Gradient bracket `(x_i - x_j) p_k + (y_i - y_j) q_k` (1-based).
    pub fn phi(&self, k: usize, i: usize, j: usize) -> Result<f64> {
        for &idx in &[k, i, j] {
            self.check_index(idx)?;
        }
        if i == j {
            return Err(Error::RepeatedIndex(vec![i, j]));
        }
        Ok(self.phi0(k - 1, i - 1, j - 1))
    }

    pub(crate) fn delta0(&self, i: usize, j: usize, k: usize) -> f64 {
        let (a, b, c) = (&self.blocks[i], &self.blocks[j], &self.blocks[k]);
        a.x * (b.y - c.y) - b.x * (a.y - c.y) + c.x * (a.y - b.y)
    }

    pub(crate) fn phi0(&self, k: usize, i: usize, j: usize) -> f64 {
        let (bi, bj, bk) = (&self.blocks[i], &self.blocks[j], &self.blocks[k]);
        (bi.x - bj.x) * bk.p + (bi.y - bj.y) * bk.q
    }

    /// Largest distance between two points of the configuration.
    pub fn diameter(&self) -> f64 {
        let mut d2 = 0.0_f64;
        for (i, a) in self.blocks.iter().enumerate() {
            for b in &self.blocks[i + 1..] {
                d2 = d2.max((a.x - b.x).powi(2) + (a.y - b.y).powi(2));
            }
        }
        d2.sqrt()
    }

    /// Characteristic coordinate magnitude, at least 1.
    pub fn scale(&self) -> f64 {
        self.blocks
            .iter()
            .map(|b| b.x.abs().max(b.y.abs()))
            .fold(1.0, f64::max)
    }

    /// Evaluates the general-position minima. All three quantities are made
    /// dimensionless: areas are divided by the squared diameter and gradient
    /// brackets by `diameter * max |grad|`.
    pub fn general_position(&self, eps_gp: f64) -> GeneralPositionReport {
        let n = self.blocks.len();
        let diam = self.diameter();
        let area = diam * diam;
        let grad = self
            .blocks
            .iter()
            .map(|b| b.p.hypot(b.q))
            .fold(0.0_f64, f64::max);
        let ratio = |v: f64, s: f64| if s > 0.0 { (v / s).abs() } else { 0.0 };

        let d123 = self.delta0(0, 1, 2);
        let min_abs_delta123 = ratio(d123, area);
        let min_abs_phi = ratio(self.phi0(0, 0, 1), diam * grad).min(ratio(self.phi0(0, 0, 2), diam * grad));

        let mut min_xi = f64::INFINITY;
        for k in 3..n {
            let d23k = self.delta0(1, 2, k);
            let sum = d23k + d123 * self.phi0(0, 0, k);
            min_xi = min_xi.min(ratio(d23k, area)).min(ratio(sum, area));
        }

        let passes = min_abs_delta123 > eps_gp
            && min_abs_phi > eps_gp
            && (min_xi.is_infinite() || min_xi > eps_gp);
        GeneralPositionReport {
            min_abs_delta123,
            min_abs_phi,
            min_abs_xi_denominator: min_xi,
            passes,
        }
    }

    /// Same as [`general_position`](Self::general_position) but returns an error
    /// if the check fails.
    pub fn require_general_position(&self, eps_gp: f64) -> Result<()> {
        if self.general_position(eps_gp).passes {
            Ok(())
        } else {
            Err(Error::NotInGeneralPosition)
        }
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("configuration serializes")
    }
}

/// Outcome of a general-position check.
///
/// `min_abs_xi_denominator` is `+inf` for `n = 3` (no extra blocks) and is
/// serialized as `null` in that case.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GeneralPositionReport {
    pub min_abs_delta123: f64,
    pub min_abs_phi: f64,
    pub min_abs_xi_denominator: f64,
    pub passes: bool,
}

impl GeneralPositionReport {
    /// Smallest of the three minima.
    pub fn conditioning(&self) -> f64 {
        self.min_abs_delta123
            .min(self.min_abs_phi)
            .min(self.min_abs_xi_denominator)
    }
}

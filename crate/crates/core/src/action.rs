//! The projective group acting on points, on first jets, and the joint
//! Jacobian multiplier of the prolonged action.

use nalgebra::Matrix3;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::seeded_rng;
use crate::jet::{JetBlock, JetConfiguration};

const REL_EPS_DEN: f64 = 1e-10;
const SAMPLE_RETRIES: usize = 1000;
const SAMPLE_MIN_DET: f64 = 1e-3;
const SAMPLE_MIN_DEN: f64 = 0.1;

/// An element of PGL(3, R), stored as its representative with `c3 = 1`.
///
/// Rows of the matrix are `a = (a1, a2, a3)`, `b = (b1, b2, b3)` and
/// `c = (c1, c2, 1)`; a point maps to
/// `((a1 x + a2 y + a3) / s, (b1 x + b2 y + b3) / s)` with `s = c1 x + c2 y + 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Homography {
    m: Matrix3<f64>,
}

#[derive(Serialize, Deserialize)]
struct HomographyFile {
    matrix: [[f64; 3]; 3],
}

impl Serialize for Homography {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        HomographyFile {
            matrix: self.rows(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for Homography {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let f = HomographyFile::deserialize(d)?;
        Homography::from_rows(f.matrix).map_err(serde::de::Error::custom)
    }
}

impl Default for Homography {
    fn default() -> Self {
        Self::identity()
    }
}

impl Homography {
    pub fn identity() -> Self {
        Self {
            m: Matrix3::identity(),
        }
    }

    /// Canonicalizes an invertible matrix to the `c3 = 1` representative.
    pub fn from_matrix(m: Matrix3<f64>) -> Result<Self> {
        if m.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("non-finite matrix entry".into()));
        }
        let norm = m.amax();
        let c3 = m[(2, 2)];
        if norm == 0.0 {
            return Err(Error::SingularMatrix(0.0));
        }
        if c3.abs() <= 1e-14 * norm {
            return Err(Error::NotNormalizable);
        }
        let m = if c3 == 1.0 { m } else { m / c3 };
        let det = m.determinant();
        if det.abs() <= 1e-14 * m.amax().powi(3) {
            return Err(Error::SingularMatrix(det));
        }
        Ok(Self { m })
    }

    pub fn from_rows(rows: [[f64; 3]; 3]) -> Result<Self> {
        Self::from_matrix(Matrix3::from_fn(|i, j| rows[i][j]))
    }

    pub fn rows(&self) -> [[f64; 3]; 3] {
        let m = &self.m;
        [
            [m[(0, 0)], m[(0, 1)], m[(0, 2)]],
            [m[(1, 0)], m[(1, 1)], m[(1, 2)]],
            [m[(2, 0)], m[(2, 1)], m[(2, 2)]],
        ]
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.m
    }

    /// Determinant of the canonical representative.
    pub fn det(&self) -> f64 {
        self.m.determinant()
    }

    pub fn c1(&self) -> f64 {
        self.m[(2, 0)]
    }

    pub fn c2(&self) -> f64 {
        self.m[(2, 1)]
    }

    /// Group product `self * other`: apply `other` first.
    pub fn compose(&self, other: &Homography) -> Result<Homography> {
        Homography::from_matrix(self.m * other.m)
    }

    pub fn inverse(&self) -> Result<Homography> {
        let inv = self
            .m
            .try_inverse()
            .ok_or_else(|| Error::SingularMatrix(self.det()))?;
        Homography::from_matrix(inv)
    }

    /// Projective denominator `c1 x + c2 y + 1`.
    pub fn denominator(&self, x: f64, y: f64) -> f64 {
        self.m[(2, 0)] * x + self.m[(2, 1)] * y + 1.0
    }

    fn checked_denominator(&self, x: f64, y: f64) -> Result<f64> {
        let s = self.denominator(x, y);
        let tol = REL_EPS_DEN
            * (1.0 + self.m[(2, 0)].abs() + self.m[(2, 1)].abs())
            * 1f64.max(x.abs()).max(y.abs());
        if s.abs() <= tol {
            Err(Error::DenominatorNearZero { value: s, tol })
        } else {
            Ok(s)
        }
    }

    pub fn act_point(&self, (x, y): (f64, f64)) -> Result<(f64, f64)> {
        let s = self.checked_denominator(x, y)?;
        let m = &self.m;
        Ok((
            (m[(0, 0)] * x + m[(0, 1)] * y + m[(0, 2)]) / s,
            (m[(1, 0)] * x + m[(1, 1)] * y + m[(1, 2)]) / s,
        ))
    }

    /// First prolongation of the action to a single jet block.
    ///
    /// The gradient is transported as a covector of the transformed scalar
    /// field `u ∘ g⁻¹`, written with the 2×2 minors of the matrix.
    pub fn prolong_block(&self, blk: &JetBlock) -> Result<JetBlock> {
        let s = self.checked_denominator(blk.x, blk.y)?;
        let d = self.det();
        if d == 0.0 {
            return Err(Error::SingularMatrix(d));
        }
        let m = &self.m;
        let (a1, a2, a3) = (m[(0, 0)], m[(0, 1)], m[(0, 2)]);
        let (b1, b2, b3) = (m[(1, 0)], m[(1, 1)], m[(1, 2)]);
        let (c1, c2, c3) = (m[(2, 0)], m[(2, 1)], m[(2, 2)]);
        let minor = |a: f64, b: f64, c: f64, d: f64| a * d - b * c;
        let w = blk.p * blk.x + blk.q * blk.y;
        let f = s / d;
        let p = f
            * (-minor(b1, b2, c1, c2) * w + minor(b2, b3, c2, c3) * blk.p
                - minor(b1, b3, c1, c3) * blk.q);
        let q = f
            * (minor(a1, a2, c1, c2) * w - minor(a2, a3, c2, c3) * blk.p
                + minor(a1, a3, c1, c3) * blk.q);
        let (x, y) = self.act_point((blk.x, blk.y))?;
        Ok(JetBlock::new(x, y, p, q))
    }

    pub fn act_config(&self, cfg: &JetConfiguration) -> Result<JetConfiguration> {
        let blocks = cfg
            .blocks()
            .iter()
            .map(|b| self.prolong_block(b))
            .collect::<Result<Vec<_>>>()?;
        JetConfiguration::new(blocks)
    }

    /// Joint Jacobian multiplier `D^n / prod s_i^3` of the prolonged action.
    pub fn jacobian_multiplier(&self, cfg: &JetConfiguration) -> Result<f64> {
        let mut v = self.det().powi(cfg.len() as i32);
        for b in cfg.blocks() {
            v /= self.checked_denominator(b.x, b.y)?.powi(3);
        }
        if v.is_finite() && v != 0.0 {
            return Ok(v);
        }
        let (ln_abs, negative) = self.ln_jacobian(cfg)?;
        let v = ln_abs.exp();
        Ok(if negative { -v } else { v })
    }

    /// `(ln |J|, J < 0)`, which stays finite where `J` itself would overflow.
    pub fn ln_jacobian(&self, cfg: &JetConfiguration) -> Result<(f64, bool)> {
        let d = self.det();
        let n = cfg.len() as i32;
        let mut ln = n as f64 * d.abs().ln();
        let mut negative = d < 0.0 && n % 2 == 1;
        for b in cfg.blocks() {
            let s = self.checked_denominator(b.x, b.y)?;
            ln -= 3.0 * s.abs().ln();
            negative ^= s < 0.0;
        }
        Ok((ln, negative))
    }

    /// Identity plus an entrywise uniform perturbation in `[-spread, spread]`,
    /// resampled until the determinant and the denominators over `[-1, 1]^2`
    /// are bounded away from zero.
    pub fn sample(seed: u64, spread: f64) -> Result<Homography> {
        Self::sample_with(&mut seeded_rng(seed, 0), spread)
    }

    pub fn sample_with<R: Rng + ?Sized>(rng: &mut R, spread: f64) -> Result<Homography> {
        if !spread.is_finite() || spread < 0.0 {
            return Err(Error::InvalidArgument(format!("spread must be >= 0, got {spread}")));
        }
        if spread == 0.0 {
            return Ok(Homography::identity());
        }
        for _ in 0..SAMPLE_RETRIES {
            let m = Matrix3::identity() + Matrix3::from_fn(|_, _| rng.gen_range(-spread..=spread));
            let Ok(h) = Homography::from_matrix(m) else {
                continue;
            };
            let corners_ok = [(-1.0, -1.0), (-1.0, 1.0), (1.0, -1.0), (1.0, 1.0)]
                .iter()
                .all(|&(x, y)| h.denominator(x, y) > SAMPLE_MIN_DEN);
            if h.det().abs() > SAMPLE_MIN_DET && corners_ok {
                return Ok(h);
            }
        }
        Err(Error::SamplingExhausted(SAMPLE_RETRIES))
    }

    /// Largest absolute entrywise difference, relative to the largest entry of `other`.
    pub fn rel_distance(&self, other: &Homography) -> f64 {
        (self.m - other.m).amax() / other.m.amax()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn blk(x: f64, y: f64, p: f64, q: f64) -> JetBlock {
        JetBlock::new(x, y, p, q)
    }

    #[test]
    fn identity_fixes_points_and_jets() {
        let id = Homography::identity();
        assert_eq!(id.act_point((0.3, -2.0)).unwrap(), (0.3, -2.0));
        let b = blk(0.3, -2.0, 1.5, 0.25);
        assert_eq!(id.prolong_block(&b).unwrap(), b);
    }

    #[test]
    fn diagonal_scaling() {
        let g = Homography::from_rows([[2.0, 0.0, 0.0], [0.0, 2.0, 0.0], [0.0, 0.0, 1.0]]).unwrap();
        assert_eq!(g.act_point((1.0, 1.0)).unwrap(), (2.0, 2.0));
        let cfg = JetConfiguration::from_flat(&[
            1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 2.0, 3.0, 0.0, 1.0, 4.0, 5.0,
        ])
        .unwrap();
        assert_eq!(g.jacobian_multiplier(&cfg).unwrap(), 64.0);
        assert_eq!(Homography::identity().jacobian_multiplier(&cfg).unwrap(), 1.0);
    }

    #[test]
    fn canonicalization() {
        let g = Homography::from_rows([[2.0, 0.0, 1.0], [0.0, 4.0, 0.0], [0.5, 0.0, 2.0]]).unwrap();
        assert_eq!(g.rows()[2], [0.25, 0.0, 1.0]);
        let again = Homography::from_matrix(*g.matrix()).unwrap();
        assert_eq!(again, g);
        assert_eq!(
            Homography::from_rows([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [1.0, 0.0, 0.0]]),
            Err(Error::NotNormalizable)
        );
        assert!(matches!(
            Homography::from_rows([[1.0, 2.0, 0.0], [2.0, 4.0, 0.0], [0.0, 0.0, 1.0]]),
            Err(Error::SingularMatrix(_))
        ));
    }

    #[test]
    fn denominator_guard() {
        let g = Homography::from_rows([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [1.0, 0.0, 1.0]]).unwrap();
        assert!(matches!(
            g.act_point((-1.0, 3.0)),
            Err(Error::DenominatorNearZero { .. })
        ));
    }

    #[test]
    fn sampling_is_deterministic() {
        assert_eq!(Homography::sample(0, 0.0).unwrap(), Homography::identity());
        assert_eq!(Homography::sample(42, 0.2).unwrap(), Homography::sample(42, 0.2).unwrap());
        assert_ne!(Homography::sample(42, 0.2).unwrap(), Homography::sample(43, 0.2).unwrap());
        assert!(Homography::sample(1, -0.1).is_err());
    }

    #[test]
    fn sampled_determinants_bounded() {
        for seed in 0..10_000 {
            let g = Homography::sample(seed, 0.2).unwrap();
            assert!(g.det().abs() > 1e-3, "seed {seed}");
        }
    }

    #[test]
    fn homography_json() {
        let g: Homography =
            serde_json::from_str(r#"{"matrix":[[2,0,0],[0,2,0],[0,0,2]]}"#).unwrap();
        assert_eq!(g, Homography::identity());
        let text = serde_json::to_string(&g).unwrap();
        assert_eq!(text, r#"{"matrix":[[1.0,0.0,0.0],[0.0,1.0,0.0],[0.0,0.0,1.0]]}"#);
        assert!(serde_json::from_str::<Homography>(r#"{"matrix":[[1,0,0],[0,1,0],[1,0,0]]}"#).is_err());
    }
}

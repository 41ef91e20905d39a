//! Closed-form absolute invariants.
//!
//! All formulas are rational in the brackets `δ_ijk` and `Φ^(k)_ij`. Signs
//! follow the moving frame exactly: every value in [`IotaCoordinates`] equals
//! the matching coordinate of [`crate::frame::normalize`].

use serde::Serialize;

use crate::error::{Error, Result};
use crate::jet::JetConfiguration;
use crate::Tolerances;

/// Divides, failing when the denominator is negligible against `mag`, the
/// magnitude of the terms that produced it.
fn ratio(num: f64, den: f64, mag: f64) -> Result<f64> {
    if den == 0.0 || den.abs() <= 1e-14 * mag {
        return Err(Error::DenominatorNearZero {
            value: den,
            tol: 1e-14 * mag,
        });
    }
    Ok(num / den)
}

/// Brackets of the first three blocks that recur in every formula.
struct Brackets {
    d123: f64,
    f1_12: f64,
    f1_13: f64,
}

impl Brackets {
    fn new(cfg: &JetConfiguration) -> Self {
        Self {
            d123: cfg.delta0(0, 1, 2),
            f1_12: cfg.phi0(0, 0, 1),
            f1_13: cfg.phi0(0, 0, 2),
        }
    }
}

/// The four invariants of three points: `ζ12, ζ23, ζ13, τ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BasisN3 {
    pub zeta12: f64,
    pub zeta23: f64,
    pub zeta13: f64,
    pub tau: f64,
}

fn basis_unchecked(cfg: &JetConfiguration) -> BasisN3 {
    let f = |k, i, j| cfg.phi0(k, i, j);
    BasisN3 {
        zeta12: f(0, 0, 1) * f(1, 0, 1),
        zeta23: f(1, 1, 2) * f(2, 1, 2),
        zeta13: f(0, 0, 2) * f(2, 0, 2),
        tau: f(0, 0, 2) * f(2, 1, 2) * f(1, 0, 1),
    }
}

pub fn basis_n3(cfg: &JetConfiguration) -> Result<BasisN3> {
    cfg.require_general_position(Tolerances::default().eps_gp)?;
    Ok(basis_unchecked(cfg))
}

/// Closed forms of the non-pinned coordinates of the normalized point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IotaCoordinates {
    pub iota_p2: f64,
    pub iota_q2: f64,
    pub iota_p3: f64,
    pub iota_q3: f64,
    /// `(ι(xk), ι(yk), ι(pk), ι(qk))` for `k = 4..n`.
    pub blocks: Vec<[f64; 4]>,
}

impl IotaCoordinates {
    /// Same layout as [`crate::frame::NormalizedConfiguration::free_coordinates`].
    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = vec![self.iota_p2, self.iota_q2, self.iota_p3, self.iota_q3];
        for b in &self.blocks {
            v.extend_from_slice(b);
        }
        v
    }
}

/// Pieces of the `k`-th block formulas (0-based `k >= 3`).
struct BlockTerms {
    d23k: f64,
    d12k: f64,
    /// `δ23k + δ123 Φ^(1)_1k`
    shifted: f64,
    /// `Φ^(k)_1k Φ^(1)_12 - Φ^(k)_2k`
    grad_k: f64,
    /// `Φ^(1)_1k Φ^(k)_23 + δ23k (p1 qk - pk q1)`
    cross_k: f64,
    mags: [f64; 3],
}

impl BlockTerms {
    fn new(cfg: &JetConfiguration, br: &Brackets, k: usize) -> Self {
        let b = cfg.blocks();
        let d23k = cfg.delta0(1, 2, k);
        let d12k = cfg.delta0(0, 1, k);
        let f1_1k = cfg.phi0(0, 0, k);
        let fk_1k = cfg.phi0(k, 0, k);
        let fk_2k = cfg.phi0(k, 1, k);
        let fk_23 = cfg.phi0(k, 1, 2);
        let wedge = b[0].p * b[k].q - b[k].p * b[0].q;
        let t = [d23k, br.d123 * f1_1k];
        let g = [fk_1k * br.f1_12, fk_2k];
        let c = [f1_1k * fk_23, d23k * wedge];
        Self {
            d23k,
            d12k,
            shifted: t[0] + t[1],
            grad_k: g[0] - g[1],
            cross_k: c[0] + c[1],
            mags: [
                t[0].abs() + t[1].abs(),
                g[0].abs() + g[1].abs(),
                c[0].abs() + c[1].abs(),
            ],
        }
    }
}

fn iota_unchecked(cfg: &JetConfiguration) -> Result<IotaCoordinates> {
    let br = Brackets::new(cfg);
    let f = |k, i, j| cfg.phi0(k, i, j);
    let f2_12 = f(1, 0, 1);
    let f2_23 = f(1, 1, 2);
    let f3_13 = f(2, 0, 2);
    let f3_23 = f(2, 1, 2);
    let mag12 = br.f1_12.abs();
    let mag13 = br.f1_13.abs();

    let iota_p2 = br.f1_12 * f2_12;
    let iota_q2 = ratio(-br.f1_12 * f2_23, br.f1_13, mag13)?;
    let iota_p3 = ratio(br.f1_13 * (f3_13 * br.f1_12 - f3_23), br.f1_12, mag12)?;
    let iota_q3 = ratio(-br.f1_13 * f3_23, br.f1_12, mag12)?;

    let base = br.d123 * br.f1_12;
    let mut blocks = Vec::with_capacity(cfg.len().saturating_sub(3));
    for k in 3..cfg.len() {
        let t = BlockTerms::new(cfg, &br, k);
        let ix = ratio(t.d23k, t.shifted, t.mags[0])?;
        let iy = ratio(t.d12k * br.f1_13, t.shifted, t.mags[0])?;
        let ip = ratio(t.shifted * t.grad_k, base, base.abs())?;
        let iq = ratio(-t.shifted * t.cross_k, base * br.f1_13, (base * br.f1_13).abs())?;
        blocks.push([ix, iy, ip, iq]);
    }
    Ok(IotaCoordinates {
        iota_p2,
        iota_q2,
        iota_p3,
        iota_q3,
        blocks,
    })
}

pub fn iota_coordinates(cfg: &JetConfiguration) -> Result<IotaCoordinates> {
    cfg.require_general_position(Tolerances::default().eps_gp)?;
    iota_unchecked(cfg)
}

fn xi_unchecked(cfg: &JetConfiguration, br: &Brackets, k: usize) -> Result<[f64; 4]> {
    let t = BlockTerms::new(cfg, br, k);
    let d23 = t.d23k.abs().max(br.d123.abs());
    let base = br.d123 * br.f1_12;
    Ok([
        ratio(br.d123 * cfg.phi0(0, 0, k), t.d23k, d23)?,
        ratio(t.d12k * br.f1_13, t.d23k, d23)?,
        ratio(t.shifted * t.grad_k, base, base.abs())?,
        ratio(-t.cross_k, br.f1_13 * t.grad_k, (br.f1_13 * t.mags[1]).abs())?,
    ])
}

/// The four invariants `(ξ1, ξ2, ξ3, ξ4)` contributed by block `k` (1-based, `k >= 4`).
///
/// They are related to the normalized coordinates of block `k` by
/// `1/ι(xk) = 1 + ξ1`, `ι(yk) = ξ2 ι(xk)`, `ι(pk) = ξ3`, `ι(qk) = ξ4 ι(pk)`.
pub fn xi_block(cfg: &JetConfiguration, k: usize) -> Result<[f64; 4]> {
    if k < 4 || k > cfg.len() {
        return Err(Error::IndexOutOfRange {
            index: k,
            n: cfg.len(),
        });
    }
    xi_unchecked(cfg, &Brackets::new(cfg), k - 1)
}

/// The generating set: `ζ12, ζ23, ζ13, τ` followed by one ξ-block per point beyond the third.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InvariantVector {
    pub zeta12: f64,
    pub zeta23: f64,
    pub zeta13: f64,
    pub tau: f64,
    pub xi_blocks: Vec<[f64; 4]>,
}

impl InvariantVector {
    /// Flat values, length `4n - 8`.
    pub fn values(&self) -> Vec<f64> {
        let mut v = vec![self.zeta12, self.zeta23, self.zeta13, self.tau];
        for b in &self.xi_blocks {
            v.extend_from_slice(b);
        }
        v
    }

    pub fn len(&self) -> usize {
        4 + 4 * self.xi_blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

pub fn generating_set(cfg: &JetConfiguration) -> Result<InvariantVector> {
    cfg.require_general_position(Tolerances::default().eps_gp)?;
    generating_set_unchecked(cfg)
}

/// [`generating_set`] without the general-position gate; used where inputs
/// are perturbed slightly off a checked configuration.
pub fn generating_set_unchecked(cfg: &JetConfiguration) -> Result<InvariantVector> {
    let b = basis_unchecked(cfg);
    let br = Brackets::new(cfg);
    let xi_blocks = (3..cfg.len())
        .map(|k| xi_unchecked(cfg, &br, k))
        .collect::<Result<Vec<_>>>()?;
    Ok(InvariantVector {
        zeta12: b.zeta12,
        zeta23: b.zeta23,
        zeta13: b.zeta13,
        tau: b.tau,
        xi_blocks,
    })
}

/// Product of the gradient determinant and the area determinant of the
/// first three blocks.
pub fn tau_prime(cfg: &JetConfiguration) -> f64 {
    let b = cfg.blocks();
    let row = |i: usize| [b[i].p, b[i].q, b[i].p * b[i].x + b[i].q * b[i].y];
    let (r1, r2, r3) = (row(0), row(1), row(2));
    let grad_det = r1[0] * (r2[1] * r3[2] - r2[2] * r3[1]) - r1[1] * (r2[0] * r3[2] - r2[2] * r3[0])
        + r1[2] * (r2[0] * r3[1] - r2[1] * r3[0]);
    // the point determinant with rows (x, y, 1) is the same as δ123
    grad_det * cfg.delta0(0, 1, 2)
}

/// Residuals of the algebraic relations between the normalized coordinates
/// and the three-point basis, each scaled by the magnitude of its terms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RelationResiduals {
    /// `ι(q2) ι(q3) = ζ23`
    pub q2_q3_zeta23: f64,
    /// `ι(p3) = ζ13 + ι(q3)`
    pub p3_zeta13_q3: f64,
    /// `ι(p2) ι(q3) = -τ`
    pub p2_q3_tau: f64,
    /// `τ' = τ - ζ12 ζ13 ζ23 / τ`
    pub tau_prime: f64,
}

impl RelationResiduals {
    pub fn max(&self) -> f64 {
        self.q2_q3_zeta23
            .max(self.p3_zeta13_q3)
            .max(self.p2_q3_tau)
            .max(self.tau_prime)
    }
}

fn scaled(lhs: f64, terms: &[f64]) -> f64 {
    let rhs: f64 = terms.iter().sum();
    let mag = terms
        .iter()
        .map(|t| t.abs())
        .sum::<f64>()
        .max(lhs.abs());
    if mag == 0.0 {
        0.0
    } else {
        (lhs - rhs).abs() / mag
    }
}

/// Evaluates the relations for given normalized coordinates (closed-form or
/// frame-derived) against the basis of `cfg`.
pub fn relation_residuals_for(
    cfg: &JetConfiguration,
    iota_p2: f64,
    iota_q2: f64,
    iota_p3: f64,
    iota_q3: f64,
) -> RelationResiduals {
    let b = basis_unchecked(cfg);
    RelationResiduals {
        q2_q3_zeta23: scaled(iota_q2 * iota_q3, &[b.zeta23]),
        p3_zeta13_q3: scaled(iota_p3, &[b.zeta13, iota_q3]),
        p2_q3_tau: scaled(iota_p2 * iota_q3, &[-b.tau]),
        tau_prime: scaled(tau_prime(cfg), &[b.tau, -b.zeta12 * b.zeta13 * b.zeta23 / b.tau]),
    }
}

pub fn relation_residuals(cfg: &JetConfiguration) -> Result<RelationResiduals> {
    let io = iota_coordinates(cfg)?;
    Ok(relation_residuals_for(
        cfg, io.iota_p2, io.iota_q2, io.iota_p3, io.iota_q3,
    ))
}

//! Moving frame for the cross-section that pins the first three points to
//! `(1,0), (0,0), (0,1)` and the first gradient to `(1, 0)`.
//!
//! The frame `ρ(x)` is the unique group element carrying `x` onto the
//! cross-section; it satisfies `ρ(g·x) = ρ(x) g⁻¹`. Invariantization evaluates
//! a function at the normalized point `ρ(x)·x`.

use serde::Serialize;

use crate::action::Homography;
use crate::error::{Error, Result};
use crate::jet::{JetBlock, JetConfiguration};
use crate::Tolerances;

/// Solved group parameters of the frame (`c3 = 1`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FrameParameters {
    pub a1: f64,
    pub a2: f64,
    pub a3: f64,
    pub b1: f64,
    pub b2: f64,
    pub b3: f64,
    pub c1: f64,
    pub c2: f64,
}

/// Which route produced the frame parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FrameRoute {
    ClosedForm,
    Constructive,
}

impl FrameParameters {
    pub fn identity() -> Self {
        Self {
            a1: 1.0,
            a2: 0.0,
            a3: 0.0,
            b1: 0.0,
            b2: 1.0,
            b3: 0.0,
            c1: 0.0,
            c2: 0.0,
        }
    }

    pub fn to_homography(&self) -> Result<Homography> {
        Homography::from_rows([
            [self.a1, self.a2, self.a3],
            [self.b1, self.b2, self.b3],
            [self.c1, self.c2, 1.0],
        ])
    }

    fn from_homography(h: &Homography) -> Self {
        let r = h.rows();
        Self {
            a1: r[0][0],
            a2: r[0][1],
            a3: r[0][2],
            b1: r[1][0],
            b2: r[1][1],
            b3: r[1][2],
            c1: r[2][0],
            c2: r[2][1],
        }
    }

    /// Scaled residuals of the eight normalization equations, in the order
    /// `x̃1 = 1, ỹ3 = 1, x̃3 = 0, ỹ1 = 0, ỹ2 = 0, x̃2 = 0, p̃1 = 1, q̃1 = 0`.
    ///
    /// Point equations are taken with cleared denominators and divided by the
    /// sum of the magnitudes of their terms (at least 1).
    pub fn residuals(&self, cfg: &JetConfiguration) -> Result<[f64; 8]> {
        let b = cfg.blocks();
        let lin = |r: [f64; 3], blk: &JetBlock| {
            let terms = [r[0] * blk.x, r[1] * blk.y, r[2]];
            (terms.iter().sum::<f64>(), terms.iter().map(|t| t.abs()).sum::<f64>())
        };
        let a = [self.a1, self.a2, self.a3];
        let bb = [self.b1, self.b2, self.b3];
        let c = [self.c1, self.c2, 1.0];
        let scaled = |v: f64, mag: f64| v.abs() / mag.max(1.0);
        let eq_one = |row: [f64; 3], blk: &JetBlock| {
            let (num, nm) = lin(row, blk);
            let (den, dm) = lin(c, blk);
            scaled(num - den, nm + dm)
        };
        let eq_zero = |row: [f64; 3], blk: &JetBlock| {
            let (num, nm) = lin(row, blk);
            scaled(num, nm)
        };
        let g = self.to_homography()?;
        let j1 = g.prolong_block(&b[0])?;
        Ok([
            eq_one(a, &b[0]),
            eq_one(bb, &b[2]),
            eq_zero(a, &b[2]),
            eq_zero(bb, &b[0]),
            eq_zero(bb, &b[1]),
            eq_zero(a, &b[1]),
            (j1.p - 1.0).abs(),
            j1.q.abs(),
        ])
    }

    pub fn max_residual(&self, cfg: &JetConfiguration) -> Result<f64> {
        Ok(self.residuals(cfg)?.iter().fold(0.0, |m, &r| m.max(r)))
    }
}

/// The common denominator `δ (q1 y1 + p1 x1) + x2 y3 - x3 y2` of the frame parameters.
pub fn frame_denominator(cfg: &JetConfiguration) -> f64 {
    let b = cfg.blocks();
    let d = cfg.delta0(0, 1, 2);
    d * (b[0].q * b[0].y + b[0].p * b[0].x) + b[1].x * b[2].y - b[2].x * b[1].y
}

fn denominator_magnitude(cfg: &JetConfiguration) -> f64 {
    let b = cfg.blocks();
    let d = cfg.delta0(0, 1, 2);
    d.abs() * ((b[0].q * b[0].y).abs() + (b[0].p * b[0].x).abs())
        + (b[1].x * b[2].y).abs()
        + (b[2].x * b[1].y).abs()
}

/// `|den|` relative to the magnitude of its terms. Small values mean the frame
/// element is about to leave the `c3 = 1` chart and its entries blow up.
pub fn frame_conditioning(cfg: &JetConfiguration) -> f64 {
    let mag = denominator_magnitude(cfg);
    if mag == 0.0 {
        0.0
    } else {
        frame_denominator(cfg).abs() / mag
    }
}

fn check_denominator(cfg: &JetConfiguration) -> Result<f64> {
    let den = frame_denominator(cfg);
    if den == 0.0 || den.abs() <= 1e-12 * denominator_magnitude(cfg) {
        Err(Error::FrameDenominatorNearZero(den))
    } else {
        Ok(den)
    }
}

/// Frame parameters from their closed-form rational expressions.
pub fn frame_closed_form(cfg: &JetConfiguration) -> Result<FrameParameters> {
    let den = check_denominator(cfg)?;
    let b = cfg.blocks();
    let (x1, y1, p1, q1) = (b[0].x, b[0].y, b[0].p, b[0].q);
    let (x2, y2) = (b[1].x, b[1].y);
    let (x3, y3) = (b[2].x, b[2].y);
    let d = cfg.delta0(0, 1, 2);
    let m12 = x1 * y2 - x2 * y1;
    let grad13 = (y1 - y3) * q1 + (x1 - x3) * p1;
    Ok(FrameParameters {
        a1: (y2 - y3) / den,
        a2: (x3 - x2) / den,
        a3: (x2 * y3 - x3 * y2) / den,
        b1: (y1 - y2) * grad13 / den,
        b2: -(x1 - x2) * grad13 / den,
        b3: m12 * grad13 / den,
        c1: (y2 - y3 - p1 * d) / den,
        c2: (x3 - x2 - q1 * d) / den,
    })
}

/// Frame parameters built geometrically: the `a` row is the line through
/// points 2 and 3, the `b` row the line through points 1 and 2, scaled by the
/// two unit-coordinate equations, with `c1, c2` fixed by the gradient at point 1.
pub fn frame_constructive(cfg: &JetConfiguration) -> Result<FrameParameters> {
    let den = check_denominator(cfg)?;
    let b = cfg.blocks();
    let h = |k: usize| [b[k].x, b[k].y, 1.0];
    let cross = |u: [f64; 3], v: [f64; 3]| {
        [
            u[1] * v[2] - u[2] * v[1],
            u[2] * v[0] - u[0] * v[2],
            u[0] * v[1] - u[1] * v[0],
        ]
    };
    let d = cfg.delta0(0, 1, 2);
    let line23 = cross(h(1), h(2));
    let line12 = cross(h(0), h(1));
    let alpha = 1.0 / den;
    let a = line23.map(|v| alpha * v);
    let c1 = a[0] - alpha * d * b[0].p;
    let c2 = a[1] - alpha * d * b[0].q;
    let beta = (c1 * b[2].x + c2 * b[2].y + 1.0) / d;
    let bb = line12.map(|v| beta * v);
    Ok(FrameParameters {
        a1: a[0],
        a2: a[1],
        a3: a[2],
        b1: bb[0],
        b2: bb[1],
        b3: bb[2],
        c1,
        c2,
    })
}

/// A solved frame with its provenance and residual.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Frame {
    pub params: FrameParameters,
    pub route: FrameRoute,
    pub max_residual: f64,
    #[serde(skip)]
    pub element: Homography,
}

pub fn solve_frame(cfg: &JetConfiguration) -> Result<Frame> {
    solve_frame_with(cfg, &Tolerances::default())
}

/// Solves the normalization equations. The closed form is tried first and
/// accepted when all eight residuals are within `eps_res * scale`; otherwise
/// the constructive solution is used.
pub fn solve_frame_with(cfg: &JetConfiguration, tol: &Tolerances) -> Result<Frame> {
    cfg.require_general_position(tol.eps_gp)?;
    let limit = tol.eps_res * cfg.scale();
    let closed = frame_closed_form(cfg)?;
    let r_closed = closed.max_residual(cfg)?;
    if r_closed <= limit {
        return Ok(Frame {
            params: closed,
            route: FrameRoute::ClosedForm,
            max_residual: r_closed,
            element: closed.to_homography()?,
        });
    }
    let built = frame_constructive(cfg)?;
    let r_built = built.max_residual(cfg)?;
    if r_built <= limit {
        Ok(Frame {
            params: built,
            route: FrameRoute::Constructive,
            max_residual: r_built,
            element: built.to_homography()?,
        })
    } else {
        Err(Error::EvaluationFailure(format!(
            "frame residual {:e} exceeds {:e}",
            r_closed.min(r_built),
            limit
        )))
    }
}

/// Frame element for a configuration, as a group element.
pub fn moving_frame(cfg: &JetConfiguration) -> Result<Homography> {
    Ok(solve_frame(cfg)?.element)
}

/// Frame parameters of a group element, e.g. of `ρ(x) g⁻¹`.
pub fn parameters_of(h: &Homography) -> FrameParameters {
    FrameParameters::from_homography(h)
}

/// The image `ρ(x)·x` of a configuration on the cross-section.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NormalizedConfiguration {
    pub cfg: JetConfiguration,
    pub frame: Frame,
}

impl NormalizedConfiguration {
    /// `ι(p2), ι(q2), ι(p3), ι(q3)` followed by `ι(xk), ι(yk), ι(pk), ι(qk)` for `k >= 4`.
    pub fn free_coordinates(&self) -> Vec<f64> {
        let b = self.cfg.blocks();
        let mut out = vec![b[1].p, b[1].q, b[2].p, b[2].q];
        for blk in &b[3..] {
            out.extend_from_slice(&blk.to_array());
        }
        out
    }

    /// Largest deviation of the eight pinned coordinates from their constants.
    pub fn pinned_deviation(&self) -> f64 {
        let b = self.cfg.blocks();
        [
            b[0].x - 1.0,
            b[0].y,
            b[0].p - 1.0,
            b[0].q,
            b[1].x,
            b[1].y,
            b[2].x,
            b[2].y - 1.0,
        ]
        .iter()
        .fold(0.0, |m: f64, v| m.max(v.abs()))
    }
}

pub fn normalize(cfg: &JetConfiguration) -> Result<NormalizedConfiguration> {
    normalize_with(cfg, &Tolerances::default())
}

pub fn normalize_with(cfg: &JetConfiguration, tol: &Tolerances) -> Result<NormalizedConfiguration> {
    let frame = solve_frame_with(cfg, tol)?;
    let normalized = frame.element.act_config(cfg)?;
    Ok(NormalizedConfiguration {
        cfg: normalized,
        frame,
    })
}

/// Invariantization: evaluates `f` at the normalized point.
pub fn invariantize<F>(f: F, cfg: &JetConfiguration) -> Result<f64>
where
    F: Fn(&JetConfiguration) -> f64,
{
    let n = normalize(cfg)?;
    let v = f(&n.cfg);
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::EvaluationFailure(format!(
            "function is not finite at the normalized point ({v})"
        )))
    }
}

//! Multiplicative inhomogeneous cochains `C^m = Map(G^m × M, R^×)`, their
//! coboundaries, and the contracting homotopy built from the moving frame.
//!
//! Values are carried as [`LogValue`] (log-magnitude plus sign), so long
//! products of exponential cochains stay finite and residuals can be measured
//! multiplicatively as `|ln(lhs / rhs)|`.
//!
//! Conventions:
//! * `(d⁰c)(g; x) = c(g·x) / c(x)`;
//! * for `m >= 1`, `(dᵐc)(g1..g_{m+1}; x) = c(g2..; x) · ∏_i c(.., g_i g_{i+1}, ..; x)^(-1)^i
//!   · c(g1..g_m; g_{m+1}·x)^(-1)^(m+1)`;
//! * `(h¹c)(x) = c(ρ(x); x)⁻¹`, and for `m >= 2`
//!   `(hᵐc)(g1..g_{m-1}; x) = c(ρ(g1⋯g_{m-1}·x), g1, .., g_{m-1}; x)`.
//!
//! The inverse in `h¹` is forced by the `d⁰` convention: with it,
//! `d^{m-1}hᵐc · h^{m+1}dᵐc = c` holds in every degree `m >= 1`.

use rand::Rng;
use serde::Serialize;

use crate::action::Homography;
use crate::error::{Error, Result};
use crate::exec::{sample_configuration, TrialConfig, SAMPLE_CONDITIONING};
use crate::frame::{frame_conditioning, moving_frame};
use crate::jet::JetConfiguration;
use crate::verify::{TrialReport, TRIAL_REDRAWS};

/// A nonzero real stored as `(ln |v|, v < 0)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LogValue {
    pub ln_abs: f64,
    pub negative: bool,
}

impl LogValue {
    pub const ONE: LogValue = LogValue {
        ln_abs: 0.0,
        negative: false,
    };

    pub fn from_f64(v: f64) -> Result<Self> {
        if v == 0.0 {
            Err(Error::ZeroValue)
        } else if !v.is_finite() {
            Err(Error::EvaluationFailure(format!("non-finite cochain value {v}")))
        } else {
            Ok(Self {
                ln_abs: v.abs().ln(),
                negative: v < 0.0,
            })
        }
    }

    pub fn to_f64(self) -> f64 {
        let m = self.ln_abs.exp();
        if self.negative {
            -m
        } else {
            m
        }
    }

    pub fn inv(self) -> LogValue {
        LogValue {
            ln_abs: -self.ln_abs,
            negative: self.negative,
        }
    }

    /// `self^(±1)`.
    pub fn pow_sign(self, positive: bool) -> LogValue {
        if positive {
            self
        } else {
            self.inv()
        }
    }

    /// `|ln(self / other)|`, or infinity when the signs differ.
    pub fn log_distance(self, other: LogValue) -> f64 {
        if self.negative != other.negative {
            f64::INFINITY
        } else {
            (self.ln_abs - other.ln_abs).abs()
        }
    }
}

/// A degree-`m` multiplicative cochain.
impl std::ops::Mul for LogValue {
    type Output = LogValue;

    fn mul(self, o: LogValue) -> LogValue {
        LogValue {
            ln_abs: self.ln_abs + o.ln_abs,
            negative: self.negative ^ o.negative,
        }
    }
}

pub trait Cochain: Send + Sync {
    fn degree(&self) -> usize;

    /// Value at `(g1, .., g_m; x)`. `gs.len()` must equal the degree.
    fn eval_log(&self, gs: &[Homography], cfg: &JetConfiguration) -> Result<LogValue>;

    fn eval(&self, gs: &[Homography], cfg: &JetConfiguration) -> Result<f64> {
        Ok(self.eval_log(gs, cfg)?.to_f64())
    }
}

impl<C: Cochain + ?Sized> Cochain for &C {
    fn degree(&self) -> usize {
        (**self).degree()
    }
    fn eval_log(&self, gs: &[Homography], cfg: &JetConfiguration) -> Result<LogValue> {
        (**self).eval_log(gs, cfg)
    }
}

impl<C: Cochain + ?Sized> Cochain for Box<C> {
    fn degree(&self) -> usize {
        (**self).degree()
    }
    fn eval_log(&self, gs: &[Homography], cfg: &JetConfiguration) -> Result<LogValue> {
        (**self).eval_log(gs, cfg)
    }
}

fn check_arity(expected: usize, gs: &[Homography]) -> Result<()> {
    if gs.len() == expected {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "cochain of degree {expected} evaluated at {} group elements",
            gs.len()
        )))
    }
}

/// Product `g1 g2 ⋯ g_k` (identity for an empty list).
pub fn product(gs: &[Homography]) -> Result<Homography> {
    gs.iter()
        .try_fold(Homography::identity(), |acc, g| acc.compose(g))
}

/// The constant cochain 1.
#[derive(Debug, Clone, Copy)]
pub struct Unit(pub usize);

impl Cochain for Unit {
    fn degree(&self) -> usize {
        self.0
    }
    fn eval_log(&self, gs: &[Homography], _: &JetConfiguration) -> Result<LogValue> {
        check_arity(self.0, gs)?;
        Ok(LogValue::ONE)
    }
}

/// The Jacobian multiplier `J(g, x)` as a 1-cochain.
#[derive(Debug, Clone, Copy)]
pub struct Jacobian;

impl Cochain for Jacobian {
    fn degree(&self) -> usize {
        1
    }
    fn eval_log(&self, gs: &[Homography], cfg: &JetConfiguration) -> Result<LogValue> {
        check_arity(1, gs)?;
        let (ln_abs, negative) = gs[0].ln_jacobian(cfg)?;
        Ok(LogValue { ln_abs, negative })
    }
}

/// A cochain given by a closure returning plain reals.
pub struct FnCochain<F> {
    degree: usize,
    f: F,
}

impl<F> FnCochain<F>
where
    F: Fn(&[Homography], &JetConfiguration) -> Result<f64> + Send + Sync,
{
    pub fn new(degree: usize, f: F) -> Self {
        Self { degree, f }
    }
}

impl<F> Cochain for FnCochain<F>
where
    F: Fn(&[Homography], &JetConfiguration) -> Result<f64> + Send + Sync,
{
    fn degree(&self) -> usize {
        self.degree
    }
    fn eval_log(&self, gs: &[Homography], cfg: &JetConfiguration) -> Result<LogValue> {
        check_arity(self.degree, gs)?;
        LogValue::from_f64((self.f)(gs, cfg)?)
    }
}

/// A function on configurations viewed as a 0-cochain.
pub fn zero_cochain<F>(f: F) -> FnCochain<impl Fn(&[Homography], &JetConfiguration) -> Result<f64> + Send + Sync>
where
    F: Fn(&JetConfiguration) -> Result<f64> + Send + Sync,
{
    FnCochain::new(0, move |_, cfg| f(cfg))
}

/// `g, x ↦ f(g·x) / f(x)`; evaluation fails with `ZeroValue` where `f` vanishes.
pub fn coboundary_of_relative<F>(f: F) -> impl Cochain
where
    F: Fn(&JetConfiguration) -> Result<f64> + Send + Sync,
{
    coboundary(zero_cochain(f))
}

/// `d c`.
pub struct Coboundary<C>(pub C);

pub fn coboundary<C: Cochain>(c: C) -> Coboundary<C> {
    Coboundary(c)
}

impl<C: Cochain> Cochain for Coboundary<C> {
    fn degree(&self) -> usize {
        self.0.degree() + 1
    }

    fn eval_log(&self, gs: &[Homography], cfg: &JetConfiguration) -> Result<LogValue> {
        let m = self.0.degree();
        check_arity(m + 1, gs)?;
        let c = &self.0;
        let last_moved = gs[m].act_config(cfg)?;
        if m == 0 {
            return Ok(c.eval_log(&[], &last_moved)? * c.eval_log(&[], cfg)?.inv());
        }
        let mut acc = c.eval_log(&gs[1..], cfg)?;
        let mut args = Vec::with_capacity(m);
        for i in 0..m {
            args.clear();
            args.extend_from_slice(&gs[..i]);
            args.push(gs[i].compose(&gs[i + 1])?);
            args.extend_from_slice(&gs[i + 2..]);
            // 1-based index i+1 carries exponent (-1)^(i+1)
            acc = acc * c.eval_log(&args, cfg)?.pow_sign(i % 2 == 1);
        }
        let tail = c.eval_log(&gs[..m], &last_moved)?;
        Ok(acc * tail.pow_sign(m % 2 == 1))
    }
}

/// `h c`, lowering the degree by one.
pub struct Homotopy<C>(pub C);

/// Fails for degree-0 input.
pub fn homotopy<C: Cochain>(c: C) -> Result<Homotopy<C>> {
    if c.degree() == 0 {
        Err(Error::InvalidArgument("homotopy needs degree >= 1".into()))
    } else {
        Ok(Homotopy(c))
    }
}

impl<C: Cochain> Cochain for Homotopy<C> {
    fn degree(&self) -> usize {
        self.0.degree() - 1
    }

    fn eval_log(&self, gs: &[Homography], cfg: &JetConfiguration) -> Result<LogValue> {
        let m = self.0.degree();
        check_arity(m - 1, gs)?;
        let shifted = product(gs)?.act_config(cfg)?;
        let frame = moving_frame(&shifted)?;
        let mut args = Vec::with_capacity(m);
        args.push(frame);
        args.extend_from_slice(gs);
        let v = self.0.eval_log(&args, cfg)?;
        Ok(if m == 1 { v.inv() } else { v })
    }
}

/// `x ↦ c(ρ(x); x)` for a 1-cochain.
pub fn invariantize_cochain<C: Cochain>(c: &C, cfg: &JetConfiguration) -> Result<LogValue> {
    if c.degree() != 1 {
        return Err(Error::InvalidArgument("invariantization needs a 1-cochain".into()));
    }
    c.eval_log(&[moving_frame(cfg)?], cfg)
}

/// Random positive smooth cochain
/// `exp(Σ a_i u_i + Σ b_j u_{k_j} u_{l_j})` where `u` collects the eight free
/// entries of each group argument and the coordinates of the configuration.
#[derive(Debug, Clone)]
pub struct ExpPolyCochain {
    degree: usize,
    n: usize,
    linear: Vec<f64>,
    quadratic: Vec<(usize, usize, f64)>,
}

/// Coefficient range of sampled cochains.
pub const COEFF_RANGE: f64 = 0.3;

impl ExpPolyCochain {
    pub fn sample<R: Rng + ?Sized>(rng: &mut R, degree: usize, n: usize) -> Self {
        let features = 8 * degree + 4 * n;
        let linear = (0..features)
            .map(|_| rng.gen_range(-COEFF_RANGE..=COEFF_RANGE))
            .collect();
        let quadratic = (0..features.min(6))
            .map(|_| {
                (
                    rng.gen_range(0..features),
                    rng.gen_range(0..features),
                    rng.gen_range(-COEFF_RANGE..=COEFF_RANGE),
                )
            })
            .collect();
        Self {
            degree,
            n,
            linear,
            quadratic,
        }
    }

    fn features(&self, gs: &[Homography], cfg: &JetConfiguration) -> Vec<f64> {
        let mut u = Vec::with_capacity(self.linear.len());
        for g in gs {
            let r = g.rows();
            u.extend_from_slice(&r[0]);
            u.extend_from_slice(&r[1]);
            u.extend_from_slice(&r[2][..2]);
        }
        u.extend(cfg.to_flat());
        u
    }
}

impl Cochain for ExpPolyCochain {
    fn degree(&self) -> usize {
        self.degree
    }

    fn eval_log(&self, gs: &[Homography], cfg: &JetConfiguration) -> Result<LogValue> {
        check_arity(self.degree, gs)?;
        if cfg.len() != self.n {
            return Err(Error::InvalidArgument(format!(
                "cochain sampled for {} points, got {}",
                self.n,
                cfg.len()
            )));
        }
        let u = self.features(gs, cfg);
        let mut ln = self.linear.iter().zip(&u).map(|(a, v)| a * v).sum::<f64>();
        for &(k, l, b) in &self.quadratic {
            ln += b * u[k] * u[l];
        }
        if ln.is_finite() {
            Ok(LogValue {
                ln_abs: ln,
                negative: false,
            })
        } else {
            Err(Error::EvaluationFailure("cochain exponent is not finite".into()))
        }
    }
}

/// `|ln(lhs / c)|` of the contraction identity `d^{m-1}hᵐc · h^{m+1}dᵐc = c`
/// at one point.
pub fn contraction_residual<C: Cochain>(c: &C, gs: &[Homography], cfg: &JetConfiguration) -> Result<f64> {
    let m = c.degree();
    if m == 0 {
        return Err(Error::InvalidArgument("contraction needs degree >= 1".into()));
    }
    let left = coboundary(homotopy(c)?).eval_log(gs, cfg)?;
    let right = homotopy(coboundary(c))?.eval_log(gs, cfg)?;
    Ok((left * right).log_distance(c.eval_log(gs, cfg)?))
}

/// Max entrywise distance between `R g1` and `ρ(g2⋯gm·x)`, `R = ρ(g1⋯gm·x)`,
/// relative to the largest entry.
pub fn key_relation_residual(gs: &[Homography], cfg: &JetConfiguration) -> Result<f64> {
    if gs.is_empty() {
        return Err(Error::InvalidArgument("need at least one group element".into()));
    }
    let r = moving_frame(&product(gs)?.act_config(cfg)?)?;
    let rhs = moving_frame(&product(&gs[1..])?.act_config(cfg)?)?;
    Ok(r.compose(&gs[0])?.rel_distance(&rhs))
}

/// Smallest frame conditioning over the suffix-shifted configurations
/// `g_i ⋯ g_m · x`, `i = 1..m`, where the homotopies evaluate the frame.
pub fn shifted_frame_conditioning(gs: &[Homography], cfg: &JetConfiguration) -> Result<f64> {
    let mut worst = f64::INFINITY;
    let mut acc = Homography::identity();
    for g in gs.iter().rev() {
        acc = g.compose(&acc)?;
        worst = worst.min(frame_conditioning(&acc.act_config(cfg)?));
    }
    Ok(worst)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HomotopyReport {
    pub degree: usize,
    pub trials: usize,
    pub max_rel_residual: f64,
    pub failures: usize,
    pub tolerance: f64,
    pub seed: u64,
    pub spread: f64,
}

impl HomotopyReport {
    pub fn passes(&self) -> bool {
        self.failures == 0
    }
}

/// Default number of points in cochain trials.
pub const COCHAIN_POINTS: usize = 4;

/// Samples `(c, g1..g_m, x)` per trial and records the contraction residual.
/// `family` draws the cochain for each trial. Tuples that bring a shifted
/// configuration close to the frame's singular locus are redrawn.
pub fn verify_contraction<F, C>(
    m: usize,
    n: usize,
    trials: &TrialConfig,
    tolerance: f64,
    family: F,
) -> Result<HomotopyReport>
where
    F: Fn(&mut rand_chacha::ChaCha8Rng, usize, usize) -> C + Sync + Send,
    C: Cochain,
{
    if m == 0 {
        return Err(Error::InvalidArgument("degree must be >= 1".into()));
    }
    let results = trials.exec.map(trials.trials, |t| {
        let mut rng = trials.rng(t);
        let c = family(&mut rng, m, n);
        for _ in 0..TRIAL_REDRAWS {
            let Ok(cfg) = sample_configuration(&mut rng, n, SAMPLE_CONDITIONING) else {
                continue;
            };
            let gs: Result<Vec<_>> = (0..m)
                .map(|_| Homography::sample_with(&mut rng, trials.spread))
                .collect();
            let Ok(gs) = gs else { continue };
            if shifted_frame_conditioning(&gs, &cfg).map_or(true, |k| k < SAMPLE_CONDITIONING) {
                continue;
            }
            if let Ok(r) = contraction_residual(&c, &gs, &cfg) {
                return Some(r);
            }
        }
        None
    });
    let r = TrialReport::collect(&results, tolerance, trials);
    Ok(HomotopyReport {
        degree: m,
        trials: r.trials,
        max_rel_residual: r.max_rel_residual,
        failures: r.failures,
        tolerance,
        seed: trials.seed,
        spread: trials.spread,
    })
}

/// The default family: random [`ExpPolyCochain`]s.
pub fn random_family(rng: &mut rand_chacha::ChaCha8Rng, m: usize, n: usize) -> ExpPolyCochain {
    ExpPolyCochain::sample(rng, m, n)
}

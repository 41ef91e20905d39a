//! Finite-difference differentials, numerical rank and batched invariance trials.

use nalgebra::DMatrix;
use rand::Rng;
use serde::Serialize;

use crate::action::Homography;
use crate::error::{Error, Result};
use crate::exec::{sample_configuration, seeded_rng, TrialConfig, SAMPLE_CONDITIONING};
use crate::invariants::generating_set_unchecked;
use crate::jet::JetConfiguration;

/// Default relative finite-difference step.
pub const DEFAULT_FD_STEP: f64 = 1e-6;
/// Singular values below `σ_max * RANK_THRESHOLD` count as zero.
pub const RANK_THRESHOLD: f64 = 1e-6;
/// How many times a trial redraws its inputs before it is counted as failed.
pub const TRIAL_REDRAWS: usize = 100;

/// Outcome of a batch of randomized residual checks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrialReport {
    pub trials: usize,
    pub failures: usize,
    pub max_rel_residual: f64,
    pub tolerance: f64,
    pub seed: u64,
    pub spread: f64,
}

impl TrialReport {
    pub fn passes(&self) -> bool {
        self.failures == 0
    }

    /// Folds per-trial outcomes (`None` = no admissible input found).
    pub fn collect(results: &[Option<f64>], tolerance: f64, cfg: &TrialConfig) -> Self {
        let mut failures = 0;
        let mut max = 0.0_f64;
        for r in results {
            match r {
                Some(v) if v.is_finite() => {
                    max = max.max(*v);
                    if *v > tolerance {
                        failures += 1;
                    }
                }
                _ => {
                    failures += 1;
                    max = f64::INFINITY;
                }
            }
        }
        TrialReport {
            trials: results.len(),
            failures,
            max_rel_residual: max,
            tolerance,
            seed: cfg.seed,
            spread: cfg.spread,
        }
    }
}

/// Central-difference Jacobian of `f` at `x`; coordinate `i` is perturbed by
/// `±step * max(1, |x_i|)`. Rows are outputs, columns inputs.
pub fn fd_jacobian_flat<F>(f: F, x: &[f64], step: f64) -> Result<DMatrix<f64>>
where
    F: Fn(&[f64]) -> Result<Vec<f64>>,
{
    let f0 = f(x)?;
    let mut jac = DMatrix::zeros(f0.len(), x.len());
    let mut xp = x.to_vec();
    for i in 0..x.len() {
        let h = step * x[i].abs().max(1.0);
        xp[i] = x[i] + h;
        let fp = f(&xp)?;
        xp[i] = x[i] - h;
        let fm = f(&xp)?;
        xp[i] = x[i];
        if fp.len() != f0.len() || fm.len() != f0.len() {
            return Err(Error::EvaluationFailure("output length changed".into()));
        }
        for r in 0..f0.len() {
            let d = (fp[r] - fm[r]) / (2.0 * h);
            if !d.is_finite() {
                return Err(Error::EvaluationFailure(format!(
                    "non-finite difference in output {r}, input {i}"
                )));
            }
            jac[(r, i)] = d;
        }
    }
    Ok(jac)
}

/// [`fd_jacobian_flat`] for functions of a configuration; columns follow the
/// flat order `(x1, y1, p1, q1, x2, ...)`.
pub fn fd_jacobian<F>(f: F, cfg: &JetConfiguration, step: f64) -> Result<DMatrix<f64>>
where
    F: Fn(&JetConfiguration) -> Result<Vec<f64>>,
{
    fd_jacobian_flat(|x| f(&JetConfiguration::from_flat(x)?), &cfg.to_flat(), step)
}

/// Singular values in descending order.
pub fn singular_values(m: &DMatrix<f64>) -> Vec<f64> {
    let mut sv: Vec<f64> = m.clone().svd(false, false).singular_values.iter().copied().collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    sv
}

pub fn numerical_rank(sv: &[f64], threshold: f64) -> usize {
    let top = sv.first().copied().unwrap_or(0.0);
    sv.iter().filter(|&&s| s > top * threshold).count()
}

/// Functional-independence check of the generating set.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RankReport {
    pub n: usize,
    pub jacobian_shape: (usize, usize),
    pub singular_values: Vec<f64>,
    pub rank: usize,
    pub expected_rank: usize,
    /// `σ_{4n-8} / σ_1`
    pub ratio: f64,
    pub threshold: f64,
    pub best_trial: usize,
    pub trials: usize,
    pub seed: u64,
    pub passes: bool,
}

/// Optional extra scalar appended to the generating set.
pub type ExtraRow<'a> = Option<&'a (dyn Fn(&JetConfiguration) -> Result<f64> + Sync)>;

fn rank_at(
    cfg: &JetConfiguration,
    extra: ExtraRow<'_>,
) -> Result<(DMatrix<f64>, Vec<f64>)> {
    let jac = fd_jacobian(
        |c| {
            let mut v = generating_set_unchecked(c)?.values();
            if let Some(e) = extra {
                v.push(e(c)?);
            }
            Ok(v)
        },
        cfg,
        DEFAULT_FD_STEP,
    )?;
    let sv = singular_values(&jac);
    Ok((jac, sv))
}

/// Numerical rank of the generating set's Jacobian at random configurations;
/// the best of `trials` draws is reported.
pub fn independence_rank(n: usize, trials: usize, seed: u64) -> Result<RankReport> {
    independence_rank_with(n, trials, seed, None)
}

/// Like [`independence_rank`], appending `extra` as one more output row.
pub fn independence_rank_with(
    n: usize,
    trials: usize,
    seed: u64,
    extra: ExtraRow<'_>,
) -> Result<RankReport> {
    if n < 3 {
        return Err(Error::TooFewPoints(n));
    }
    let expected = 4 * n - 8;
    let mut best: Option<RankReport> = None;
    for t in 0..trials.max(1) {
        let mut rng = seeded_rng(seed, t as u64);
        let cfg = sample_configuration(&mut rng, n, SAMPLE_CONDITIONING)?;
        let Ok((jac, sv)) = rank_at(&cfg, extra) else {
            continue;
        };
        let rank = numerical_rank(&sv, RANK_THRESHOLD);
        let ratio = sv.get(expected - 1).copied().unwrap_or(0.0) / sv[0];
        let report = RankReport {
            n,
            jacobian_shape: (jac.nrows(), jac.ncols()),
            singular_values: sv,
            rank,
            expected_rank: expected,
            ratio,
            threshold: RANK_THRESHOLD,
            best_trial: t,
            trials,
            seed,
            passes: rank == expected && ratio >= RANK_THRESHOLD,
        };
        if best.as_ref().is_none_or(|b| ratio > b.ratio) {
            best = Some(report);
        }
    }
    best.ok_or_else(|| Error::EvaluationFailure("no trial produced a Jacobian".into()))
}

/// Draws a general-position configuration and a homography such that `f`
/// evaluates at both the configuration and its image.
pub fn draw_pair<R, F, T>(
    rng: &mut R,
    n: usize,
    spread: f64,
    f: F,
) -> Option<(JetConfiguration, Homography, T, T)>
where
    R: Rng + ?Sized,
    F: Fn(&JetConfiguration) -> Result<T>,
{
    for _ in 0..TRIAL_REDRAWS {
        let Ok(cfg) = sample_configuration(rng, n, SAMPLE_CONDITIONING) else {
            continue;
        };
        let Ok(g) = Homography::sample_with(rng, spread) else {
            continue;
        };
        let Ok(moved) = g.act_config(&cfg) else {
            continue;
        };
        if let (Ok(a), Ok(b)) = (f(&cfg), f(&moved)) {
            return Some((cfg, g, a, b));
        }
    }
    None
}

/// Componentwise relative deviation `|a_i - b_i| / (|a_i| + 1e-12)`, maximized.
pub fn max_rel_deviation(before: &[f64], after: &[f64]) -> f64 {
    before
        .iter()
        .zip(after)
        .map(|(a, b)| (b - a).abs() / (a.abs() + 1e-12))
        .fold(0.0, f64::max)
}

/// Checks `f(g·x) = f(x)` on random configurations of `n` points.
pub fn invariance_trials<F>(f: F, n: usize, trials: &TrialConfig, tolerance: f64) -> TrialReport
where
    F: Fn(&JetConfiguration) -> Result<Vec<f64>> + Sync + Send,
{
    let results = trials.exec.map(trials.trials, |t| {
        let mut rng = trials.rng(t);
        draw_pair(&mut rng, n, trials.spread, &f).map(|(_, _, a, b)| max_rel_deviation(&a, &b))
    });
    TrialReport::collect(&results, tolerance, trials)
}

/// Invariance of the full generating set under random homographies.
pub fn generating_set_invariance(n: usize, trials: &TrialConfig, tolerance: f64) -> TrialReport {
    invariance_trials(
        |c| Ok(crate::invariants::generating_set(c)?.values()),
        n,
        trials,
        tolerance,
    )
}

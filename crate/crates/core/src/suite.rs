//! Named verification suites with pinned tolerances, shared by the command
//! line and the acceptance tests.
//!
//! Each suite returns a [`SuiteReport`] made of [`Check`]s. Trial `t` of a check
//! draws from stream `(tag << 32) | t` of the suite seed, so checks never share
//! random numbers and the output is independent of the execution mode.

use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::action::Homography;
use crate::cochain::{
    coboundary, contraction_residual, homotopy, key_relation_residual, random_family, shifted_frame_conditioning, verify_contraction, Cochain,
    ExpPolyCochain, Jacobian, LogValue, COCHAIN_POINTS,
};
use crate::descriptor::{
    feature_deviation, features_of, sobel_relative_error, to_pixel_homography, warp_robustness, GaussianBlobs,
};
use crate::error::{Error, Result};
use crate::exec::{sample_configuration, seeded_rng, Execution, TrialConfig, SAMPLE_CONDITIONING};
use crate::frame::{moving_frame, normalize_with, solve_frame_with};
use crate::invariants::{iota_coordinates, relation_residuals};
use crate::jet::JetConfiguration;
use crate::relative::{
    check_relative, closed_form_magnitude, invariantized_jacobian, primitive_element, root_degree, Weight,
};
use crate::verify::{generating_set_invariance, independence_rank, TrialReport, TRIAL_REDRAWS};
use crate::Tolerances;

/// One pass/fail measurement.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    /// Worst observed value (a residual, or a lower-bounded ratio).
    pub value: f64,
    pub bound: f64,
    /// `"max"` when `value <= bound` is required, `"min"` for `value >= bound`.
    pub kind: &'static str,
    pub trials: usize,
    pub failures: usize,
    pub passes: bool,
}

impl Check {
    pub fn from_trials(name: impl Into<String>, r: &TrialReport) -> Self {
        Self {
            name: name.into(),
            value: r.max_rel_residual,
            bound: r.tolerance,
            kind: "max",
            trials: r.trials,
            failures: r.failures,
            passes: r.passes(),
        }
    }

    pub fn at_least(name: impl Into<String>, value: f64, bound: f64, trials: usize) -> Self {
        let passes = value >= bound;
        Self {
            name: name.into(),
            value,
            bound,
            kind: "min",
            trials,
            failures: usize::from(!passes),
            passes,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuiteReport {
    pub suite: &'static str,
    pub seed: u64,
    pub checks: Vec<Check>,
    pub passes: bool,
}

impl SuiteReport {
    fn new(suite: &'static str, seed: u64, checks: Vec<Check>) -> Self {
        let passes = checks.iter().all(|c| c.passes);
        Self {
            suite,
            seed,
            checks,
            passes,
        }
    }
}

/// Inputs common to all suites. `trials = None` uses each check's default count.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SuiteParams {
    pub seed: u64,
    pub trials: Option<usize>,
    pub spread: Option<f64>,
    pub tol: Tolerances,
    #[serde(skip)]
    pub exec: Execution,
}

impl SuiteParams {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            trials: None,
            spread: None,
            tol: Tolerances::default(),
            exec: Execution::default(),
        }
    }

    fn count(&self, default: usize) -> usize {
        self.trials.unwrap_or(default)
    }

    fn spread(&self, default: f64) -> f64 {
        self.spread.unwrap_or(default)
    }

    fn config(&self, trials: usize, spread: f64) -> TrialConfig {
        TrialConfig::new(trials, self.seed, spread).with_exec(self.exec)
    }

    /// Runs `f` on `trials` independent streams tagged `tag`.
    fn run<F>(&self, tag: u64, trials: usize, tolerance: f64, spread: f64, f: F) -> TrialReport
    where
        F: Fn(&mut ChaCha8Rng) -> Option<f64> + Sync + Send,
    {
        let results = self.exec.map(trials, |t| {
            let mut rng = seeded_rng(self.seed, (tag << 32) | t as u64);
            f(&mut rng)
        });
        TrialReport::collect(&results, tolerance, &self.config(trials, spread))
    }
}

pub const SUITE_NAMES: [&str; 8] = [
    "frame",
    "invariance",
    "coordinates",
    "relations",
    "rank",
    "relative",
    "cochain",
    "image",
];

pub fn run_suite(name: &str, p: &SuiteParams) -> Result<SuiteReport> {
    match name {
        "frame" => Ok(frame_suite(p)),
        "invariance" => Ok(invariance_suite(p)),
        "coordinates" => Ok(coordinates_suite(p)),
        "relations" => Ok(relations_suite(p)),
        "rank" => rank_suite(p),
        "relative" => Ok(relative_suite(p)),
        "cochain" => cochain_suite(p),
        "image" => image_suite(p),
        other => Err(Error::InvalidArgument(format!("unknown suite {other:?}"))),
    }
}

/// Draws a general-position configuration and a homography, retrying on
/// degenerate draws.
fn draw<R: rand::Rng>(rng: &mut R, n: usize, spread: f64) -> Option<(JetConfiguration, Homography)> {
    for _ in 0..TRIAL_REDRAWS {
        let Ok(cfg) = sample_configuration(rng, n, SAMPLE_CONDITIONING) else {
            continue;
        };
        let Ok(g) = Homography::sample_with(rng, spread) else {
            continue;
        };
        return Some((cfg, g));
    }
    None
}

fn config_only<R: rand::Rng>(rng: &mut R, n: usize) -> Option<JetConfiguration> {
    (0..TRIAL_REDRAWS).find_map(|_| sample_configuration(rng, n, SAMPLE_CONDITIONING).ok())
}

/// Normalization residuals and equivariance `ρ(g·x) = ρ(x) g⁻¹`, n = 3..6.
pub fn frame_suite(p: &SuiteParams) -> SuiteReport {
    let trials = p.count(1000);
    let spread = p.spread(0.2);
    let tol = p.tol;
    let mut checks = Vec::new();
    for n in 3..=6 {
        let r = p.run(n as u64, trials, tol.eps_res, spread, |rng| {
            let cfg = config_only(rng, n)?;
            let frame = solve_frame_with(&cfg, &tol).ok()?;
            Some(frame.max_residual)
        });
        checks.push(Check::from_trials(format!("normalization residual n={n}"), &r));
        let r = p.run(10 + n as u64, trials, EQUIVARIANCE_TOL, spread, |rng| {
            let (cfg, g) = draw(rng, n, spread)?;
            let moved = g.act_config(&cfg).ok()?;
            let lhs = moving_frame(&moved).ok()?;
            let rhs = moving_frame(&cfg).ok()?.compose(&g.inverse().ok()?).ok()?;
            Some(lhs.rel_distance(&rhs))
        });
        checks.push(Check::from_trials(format!("equivariance n={n}"), &r));
    }
    SuiteReport::new("frame", p.seed, checks)
}

pub const EQUIVARIANCE_TOL: f64 = 1e-8;
pub const INVARIANCE_TOL: f64 = 1e-8;
pub const COORDINATES_TOL: f64 = 1e-9;
pub const RELATIONS_TOL: f64 = 1e-10;
pub const RANK_RATIO: f64 = 1e-6;
pub const RELATIVE_TOL: f64 = 1e-8;
pub const CLOSED_FORM_TOL: f64 = 1e-9;
pub const COCYCLE_TOL: f64 = 1e-9;
pub const DOUBLE_COBOUNDARY_TOL: f64 = 1e-8;
pub const CONTRACTION_TOL: f64 = 1e-7;
pub const RECONSTRUCTION_TOL: f64 = 1e-9;
pub const KEY_RELATION_TOL: f64 = 1e-9;
pub const SOBEL_TOL: f64 = 0.02;
pub const WARP_TOL: f64 = 2e-2;
pub const INJECTED_WARP_TOL: f64 = 1e-9;

/// Full generating-set invariance, n = 3..6.
pub fn invariance_suite(p: &SuiteParams) -> SuiteReport {
    let trials = p.count(1000);
    let spread = p.spread(0.2);
    let checks = (3..=6)
        .map(|n| {
            let tc = TrialConfig::new(trials, p.seed.wrapping_add(n as u64), spread).with_exec(p.exec);
            let r = generating_set_invariance(n, &tc, INVARIANCE_TOL);
            Check::from_trials(format!("generating set n={n}"), &r)
        })
        .collect();
    SuiteReport::new("invariance", p.seed, checks)
}

/// Largest `|a - b| / max(|a|, |b|)` over paired entries.
fn max_rel_entry(a: &[f64], b: &[f64]) -> Option<f64> {
    (a.len() == b.len()).then(|| a.iter().zip(b).map(|(&u, &v)| crate::rel_diff(u, v)).fold(0.0, f64::max))
}

/// Closed-form `ι` coordinates against the free coordinates of the normalized
/// configuration.
pub fn coordinates_suite(p: &SuiteParams) -> SuiteReport {
    let trials = p.count(100);
    let tol = p.tol;
    let r = p.run(20, trials, COORDINATES_TOL, 0.0, |rng| {
        let n = 3 + rand::Rng::gen_range(rng, 0..4);
        let cfg = config_only(rng, n)?;
        let closed = iota_coordinates(&cfg).ok()?.to_vec();
        let normalized = normalize_with(&cfg, &tol).ok()?.free_coordinates();
        max_rel_entry(&closed, &normalized)
    });
    SuiteReport::new("coordinates", p.seed, vec![Check::from_trials("closed form vs frame", &r)])
}

/// The three coordinate relations and the second form of `τ'`.
pub fn relations_suite(p: &SuiteParams) -> SuiteReport {
    let trials = p.count(100);
    let names = ["iota(q2) iota(q3) = zeta23", "iota(p3) = zeta13 + iota(q3)", "iota(p2) iota(q3) = -tau", "tau' second form"];
    let checks = names
        .iter()
        .enumerate()
        .map(|(i, name)| {
            let r = p.run(30 + i as u64, trials, RELATIONS_TOL, 0.0, |rng| {
                let n = 3 + rand::Rng::gen_range(rng, 0..4);
                let cfg = config_only(rng, n)?;
                let res = relation_residuals(&cfg).ok()?;
                Some([res.q2_q3_zeta23, res.p3_zeta13_q3, res.p2_q3_tau, res.tau_prime][i])
            });
            Check::from_trials(*name, &r)
        })
        .collect();
    SuiteReport::new("relations", p.seed, checks)
}

/// Numerical rank of the generating set's Jacobian, n = 3, 4, 5.
pub fn rank_suite(p: &SuiteParams) -> Result<SuiteReport> {
    let trials = p.count(10);
    let mut checks = Vec::new();
    for n in 3..=5 {
        let rep = independence_rank(n, trials, p.seed.wrapping_add(n as u64))?;
        let mut c = Check::at_least(format!("rank {} of {} at n={n}", rep.rank, rep.expected_rank), rep.ratio, RANK_RATIO, trials);
        c.passes &= rep.passes;
        c.failures = usize::from(!c.passes);
        checks.push(c);
    }
    Ok(SuiteReport::new("rank", p.seed, checks))
}

/// Weight laws of `𝒞` and `z'_n`, and the closed form of `|𝒞|`.
pub fn relative_suite(p: &SuiteParams) -> SuiteReport {
    let trials = p.count(1000);
    let spread = p.spread(0.2);
    let mut checks = Vec::new();
    for n in 3..=6 {
        let tc = TrialConfig::new(trials, p.seed.wrapping_add(40 + n as u64), spread).with_exec(p.exec);
        let r = check_relative(invariantized_jacobian, Weight::integer(-1), n, &tc, RELATIVE_TOL);
        checks.push(Check::from_trials(format!("C has weight -1, n={n}"), &r));
    }
    let r = p.run(50, trials, CLOSED_FORM_TOL, 0.0, |rng| {
        let n = 3 + rand::Rng::gen_range(rng, 0..4);
        let cfg = config_only(rng, n)?;
        let c = invariantized_jacobian(&cfg).ok()?;
        Some(crate::rel_diff(c.abs(), closed_form_magnitude(&cfg)))
    });
    checks.push(Check::from_trials("closed form |C|", &r));
    for n in [3, 4, 6] {
        let g = root_degree(n);
        let tc = TrialConfig::new(trials, p.seed.wrapping_add(60 + n as u64), spread).with_exec(p.exec);
        let w = Weight::new(1, g).expect("nonzero denominator");
        let r = check_relative(primitive_element, w, n, &tc, RELATIVE_TOL);
        checks.push(Check::from_trials(format!("z' has weight {w}, n={n}"), &r));
    }
    SuiteReport::new("relative", p.seed, checks)
}

fn sample_tuple(rng: &mut ChaCha8Rng, m: usize, spread: f64) -> Option<(Vec<Homography>, JetConfiguration)> {
    for _ in 0..TRIAL_REDRAWS {
        let Some(cfg) = config_only(rng, COCHAIN_POINTS) else {
            continue;
        };
        let gs: Result<Vec<_>> = (0..m).map(|_| Homography::sample_with(rng, spread)).collect();
        let Ok(gs) = gs else { continue };
        if shifted_frame_conditioning(&gs, &cfg).is_ok_and(|k| k >= SAMPLE_CONDITIONING) {
            return Some((gs, cfg));
        }
    }
    None
}

/// Cocycle, double coboundary, contraction and reconstruction identities.
pub fn cochain_suite(p: &SuiteParams) -> Result<SuiteReport> {
    let trials = p.count(100);
    let spread = p.spread(0.1);
    let mut checks = Vec::new();

    let r = p.run(70, trials, COCYCLE_TOL, spread, |rng| {
        let (gs, cfg) = sample_tuple(rng, 2, spread)?;
        Some(coboundary(Jacobian).eval_log(&gs, &cfg).ok()?.log_distance(LogValue::ONE))
    });
    checks.push(Check::from_trials("J is a cocycle", &r));

    for m in 0..2 {
        let r = p.run(71 + m as u64, trials, DOUBLE_COBOUNDARY_TOL, spread, |rng| {
            let c = ExpPolyCochain::sample(rng, m, COCHAIN_POINTS);
            let (gs, cfg) = sample_tuple(rng, m + 2, spread)?;
            Some(coboundary(coboundary(&c)).eval_log(&gs, &cfg).ok()?.log_distance(LogValue::ONE))
        });
        checks.push(Check::from_trials(format!("dd = 1 in degree {m}"), &r));
    }

    let r = p.run(73, trials, RECONSTRUCTION_TOL, spread, |rng| {
        let (gs, cfg) = sample_tuple(rng, 1, spread)?;
        let rebuilt = coboundary(homotopy(Jacobian).ok()?).eval_log(&gs, &cfg).ok()?;
        Some(rebuilt.log_distance(Jacobian.eval_log(&gs, &cfg).ok()?))
    });
    checks.push(Check::from_trials("d(iota(J)^-1) = J", &r));

    let r = p.run(74, trials, COCYCLE_TOL, spread, |rng| {
        let (gs, cfg) = sample_tuple(rng, 1, spread)?;
        contraction_residual(&Jacobian, &gs, &cfg).ok()
    });
    checks.push(Check::from_trials("contraction m=1, c=J", &r));

    for m in 1..=3 {
        let tc = TrialConfig::new(trials, p.seed.wrapping_add(80 + m as u64), spread).with_exec(p.exec);
        let rep = verify_contraction(m, COCHAIN_POINTS, &tc, CONTRACTION_TOL, random_family)?;
        checks.push(Check {
            name: format!("contraction m={m}"),
            value: rep.max_rel_residual,
            bound: rep.tolerance,
            kind: "max",
            trials: rep.trials,
            failures: rep.failures,
            passes: rep.passes(),
        });
    }

    let r = p.run(75, trials, KEY_RELATION_TOL, spread, |rng| {
        let (gs, cfg) = sample_tuple(rng, 3, spread)?;
        key_relation_residual(&gs, &cfg).ok()
    });
    checks.push(Check::from_trials("key frame relation", &r));
    Ok(SuiteReport::new("cochain", p.seed, checks))
}

/// Side of the synthetic warp-test image.
pub const IMAGE_SIZE: usize = 512;
/// Points per configuration in the image checks.
pub const IMAGE_POINTS: usize = 4;

/// Sobel accuracy, warp robustness of Sobel features and exactness with
/// injected jets.
pub fn image_suite(p: &SuiteParams) -> Result<SuiteReport> {
    let trials = p.count(50);
    let spread = p.spread(0.05);
    let mut checks = Vec::new();

    let blob = GaussianBlobs::single(63.5, 64.0, 6.0);
    let e = sobel_relative_error(&blob.rasterize(128, 128)?, &blob, 1)?;
    checks.push(Check {
        name: "Sobel vs exact gradient, sigma=6".into(),
        value: e,
        bound: SOBEL_TOL,
        kind: "max",
        trials: 1,
        failures: usize::from(e > SOBEL_TOL),
        passes: e <= SOBEL_TOL,
    });

    let pattern = GaussianBlobs::test_pattern(IMAGE_SIZE, IMAGE_SIZE);
    let img = pattern.rasterize(IMAGE_SIZE, IMAGE_SIZE)?;
    let tc = p.config(trials, spread);
    let rep = warp_robustness(&img, IMAGE_POINTS, &TrialConfig { seed: p.seed.wrapping_add(90), ..tc }, WARP_TOL);
    checks.push(Check {
        name: "Sobel features under warp".into(),
        value: rep.max_rel_deviation,
        bound: WARP_TOL,
        kind: "max",
        trials: rep.trials,
        failures: rep.failures,
        passes: rep.passes(),
    });

    let size = IMAGE_SIZE as f64;
    let r = p.run(91, trials, INJECTED_WARP_TOL, spread, |rng| {
        let g = Homography::sample_with(rng, spread).ok()?;
        let h = to_pixel_homography(&g, IMAGE_SIZE, IMAGE_SIZE).ok()?;
        for _ in 0..TRIAL_REDRAWS {
            let pts: Vec<_> = (0..IMAGE_POINTS)
                .map(|_| (rand::Rng::gen_range(rng, 0.1 * size..0.9 * size), rand::Rng::gen_range(rng, 0.1 * size..0.9 * size)))
                .collect();
            let Ok(cfg) = pattern.jet(&pts) else { continue };
            if cfg.general_position(0.0).conditioning() < SAMPLE_CONDITIONING {
                continue;
            }
            let a = features_of(cfg).ok()?;
            let b = features_of(pattern.warped_jet(&h, &pts).ok()?).ok()?;
            return Some(feature_deviation(&a.features, &b.features));
        }
        None
    });
    checks.push(Check::from_trials("injected jets under warp", &r));
    Ok(SuiteReport::new("image", p.seed, checks))
}

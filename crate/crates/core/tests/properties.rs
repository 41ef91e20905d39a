use approx::assert_relative_eq;
use proptest::prelude::*;
use rand::Rng;

use projinv::exec::{sample_configuration, seeded_rng, SAMPLE_CONDITIONING};
use projinv::frame::moving_frame;
use projinv::relative::invariantized_jacobian;
use projinv::{generating_set, normalize, rel_diff, Homography, JetBlock, JetConfiguration};

fn config(seed: u64, n: usize) -> JetConfiguration {
    let mut rng = seeded_rng(seed, 0);
    sample_configuration(&mut rng, n, SAMPLE_CONDITIONING).expect("sampler converges")
}

fn homography(seed: u64, spread: f64) -> Homography {
    Homography::sample_with(&mut seeded_rng(seed, 1), spread).expect("near-identity sample is invertible")
}

fn max_rel(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(&u, &v)| rel_diff(u, v)).fold(0.0, f64::max)
}

fn adjugate(m: [[f64; 3]; 3]) -> [[f64; 3]; 3] {
    let c = |r0: usize, r1: usize, c0: usize, c1: usize| m[r0][c0] * m[r1][c1] - m[r0][c1] * m[r1][c0];
    [
        [c(1, 2, 1, 2), -c(0, 2, 1, 2), c(0, 1, 1, 2)],
        [-c(1, 2, 0, 2), c(0, 2, 0, 2), -c(0, 1, 0, 2)],
        [c(1, 2, 0, 1), -c(0, 2, 0, 1), c(0, 1, 0, 1)],
    ]
}

fn apply(m: &[[f64; 3]; 3], x: f64, y: f64) -> (f64, f64) {
    let w = m[2][0] * x + m[2][1] * y + m[2][2];
    ((m[0][0] * x + m[0][1] * y + m[0][2]) / w, (m[1][0] * x + m[1][1] * y + m[1][2]) / w)
}

#[test]
fn prolongation_is_the_chain_rule() {
    // u = x^2 + y + xy/2; the transformed field is u composed with the inverse map.
    let u = |x: f64, y: f64| x * x + y + 0.5 * x * y;
    let grad = |x: f64, y: f64| (2.0 * x + 0.5 * y, 1.0 + 0.5 * x);
    let h = 1e-5;
    for seed in 0..20 {
        let g = homography(seed, 0.3);
        let inv = adjugate(g.rows());
        let mut rng = seeded_rng(seed, 2);
        for _ in 0..5 {
            let (x, y): (f64, f64) = (rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            let (p, q) = grad(x, y);
            let moved = g.prolong_block(&JetBlock::new(x, y, p, q)).unwrap();
            let (gx, gy) = apply(&g.rows(), x, y);
            assert_relative_eq!(moved.x, gx, max_relative = 1e-12);
            assert_relative_eq!(moved.y, gy, max_relative = 1e-12);
            let ut = |a: f64, b: f64| {
                let (px, py) = apply(&inv, a, b);
                u(px, py)
            };
            // fourth-order central differences
            let d = |f: &dyn Fn(f64) -> f64| (8.0 * (f(h) - f(-h)) - (f(2.0 * h) - f(-2.0 * h))) / (12.0 * h);
            let fp = d(&|t| ut(gx + t, gy));
            let fq = d(&|t| ut(gx, gy + t));
            let scale = 1.0 + moved.p.abs().max(moved.q.abs());
            assert!((moved.p - fp).abs() <= 1e-9 * scale, "p {} vs {fp}", moved.p);
            assert!((moved.q - fq).abs() <= 1e-9 * scale, "q {} vs {fq}", moved.q);
        }
    }
}

#[test]
fn json_round_trip() {
    let cfg = config(4, 5);
    let back = JetConfiguration::from_json(&cfg.to_json()).unwrap();
    assert_eq!(cfg, back);
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn action_composes(seed in any::<u64>(), n in 3usize..=6) {
        let cfg = config(seed, n);
        let (g, h) = (homography(seed, 0.2), homography(seed ^ 0x9e37, 0.2));
        let gh = g.compose(&h).unwrap();
        let direct = gh.act_config(&cfg).unwrap().to_flat();
        let stepwise = g.act_config(&h.act_config(&cfg).unwrap()).unwrap().to_flat();
        prop_assert!(max_rel(&direct, &stepwise) <= 1e-10);
    }

    #[test]
    fn jacobian_is_a_cocycle(seed in any::<u64>(), n in 3usize..=6) {
        let cfg = config(seed, n);
        let (g, h) = (homography(seed, 0.2), homography(seed.wrapping_add(1), 0.2));
        let lhs = g.compose(&h).unwrap().jacobian_multiplier(&cfg).unwrap();
        let rhs = g.jacobian_multiplier(&h.act_config(&cfg).unwrap()).unwrap() * h.jacobian_multiplier(&cfg).unwrap();
        prop_assert!(rel_diff(lhs, rhs) <= 1e-10);
    }

    #[test]
    fn delta_alternates(seed in any::<u64>()) {
        let cfg = config(seed, 4);
        let d = cfg.delta(1, 2, 3).unwrap();
        // the expansion order changes with the permutation, so agreement is up to rounding
        let tol = 1e-14 * (1.0 + d.abs());
        prop_assert!((cfg.delta(2, 1, 3).unwrap() + d).abs() <= tol);
        prop_assert!((cfg.delta(1, 3, 2).unwrap() + d).abs() <= tol);
        prop_assert!((cfg.delta(2, 3, 1).unwrap() - d).abs() <= tol);
    }

    #[test]
    fn delta_scales_by_det_over_denominators(seed in any::<u64>()) {
        let cfg = config(seed, 3);
        let g = homography(seed, 0.2);
        let moved = g.act_config(&cfg).unwrap();
        let m = g.rows();
        let s: Vec<f64> = cfg.blocks().iter().map(|b| m[2][0] * b.x + m[2][1] * b.y + m[2][2]).collect();
        let det = m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
        let expected = det * cfg.delta(1, 2, 3).unwrap() / (s[0] * s[1] * s[2]);
        prop_assert!(rel_diff(moved.delta(1, 2, 3).unwrap(), expected) <= 1e-11);
    }

    #[test]
    fn phi_is_additive_and_translation_invariant(seed in any::<u64>(), a in -2.0..2.0f64, b in -2.0..2.0f64) {
        let cfg = config(seed, 4);
        let sum = cfg.phi(4, 1, 2).unwrap() + cfg.phi(4, 2, 3).unwrap();
        prop_assert!((sum - cfg.phi(4, 1, 3).unwrap()).abs() <= 1e-13 * (1.0 + sum.abs()));
        prop_assert_eq!(cfg.phi(2, 1, 3).unwrap(), -cfg.phi(2, 3, 1).unwrap());
        let t = Homography::from_rows([[1.0, 0.0, a], [0.0, 1.0, b], [0.0, 0.0, 1.0]]).unwrap();
        let moved = t.act_config(&cfg).unwrap();
        for (k, i, j) in [(1, 2, 3), (3, 1, 4), (4, 2, 1)] {
            let before = cfg.phi(k, i, j).unwrap();
            prop_assert!((moved.phi(k, i, j).unwrap() - before).abs() <= 1e-13 * (1.0 + before.abs() + a.abs() + b.abs()));
        }
    }

    #[test]
    fn frame_is_equivariant(seed in any::<u64>(), n in 3usize..=6) {
        let cfg = config(seed, n);
        let g = homography(seed, 0.2);
        let lhs = moving_frame(&g.act_config(&cfg).unwrap()).unwrap();
        let rhs = moving_frame(&cfg).unwrap().compose(&g.inverse().unwrap()).unwrap();
        prop_assert!(lhs.rel_distance(&rhs) <= 1e-8);
    }

    #[test]
    fn normal_form_is_invariant(seed in any::<u64>(), n in 3usize..=6) {
        let cfg = config(seed, n);
        let g = homography(seed, 0.2);
        let a = normalize(&cfg).unwrap().free_coordinates();
        let b = normalize(&g.act_config(&cfg).unwrap()).unwrap().free_coordinates();
        prop_assert!(max_rel(&a, &b) <= 1e-8);
        let ga = generating_set(&cfg).unwrap().values();
        let gb = generating_set(&g.act_config(&cfg).unwrap()).unwrap().values();
        prop_assert_eq!(ga.len(), 4 * n - 8);
        prop_assert!(max_rel(&ga, &gb) <= 1e-8);
    }

    #[test]
    fn invariantized_jacobian_has_weight_minus_one(seed in any::<u64>(), n in 3usize..=6) {
        let cfg = config(seed, n);
        let g = homography(seed, 0.2);
        let after = invariantized_jacobian(&g.act_config(&cfg).unwrap()).unwrap();
        let before = invariantized_jacobian(&cfg).unwrap();
        prop_assert!(rel_diff(after * g.jacobian_multiplier(&cfg).unwrap(), before) <= 1e-8);
    }
}

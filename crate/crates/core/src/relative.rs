//! Relative invariants with the Jacobian multiplier.
//!
//! `𝒞(x) = J(ρ(x), x)` is evaluated directly from the frame element, which
//! fixes its sign; the rational closed form of `|𝒞|` serves as an independent
//! magnitude check. The primitive element is `z'_n = 𝒞^(-1/g)`, `g = gcd(n, 3)`,
//! taken on the real branch.

use std::fmt;
use std::str::FromStr;

use serde::{Serialize, Serializer};

use crate::error::{Error, Result};
use crate::exec::TrialConfig;
use crate::frame::solve_frame;
use crate::jet::JetConfiguration;
use crate::verify::{draw_pair, TrialReport};

/// A rational weight `num / den` with `den > 0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Weight {
    pub num: i64,
    pub den: u64,
}

impl Weight {
    pub fn new(num: i64, den: u64) -> Result<Self> {
        if den == 0 {
            return Err(Error::InvalidArgument("weight denominator is zero".into()));
        }
        let g = gcd(num.unsigned_abs(), den).max(1);
        Ok(Self {
            num: num / g as i64,
            den: den / g,
        })
    }

    pub const fn integer(num: i64) -> Self {
        Self { num, den: 1 }
    }

    /// `base^(num/den)` on the real line; odd roots of negative numbers keep their sign.
    pub fn power(&self, base: f64) -> Result<f64> {
        if base < 0.0 && self.den.is_multiple_of(2) {
            return Err(Error::EvaluationFailure(format!(
                "even root of negative value {base}"
            )));
        }
        let root = if self.den == 1 {
            base
        } else if self.den == 3 {
            base.cbrt()
        } else {
            base.signum() * base.abs().powf(1.0 / self.den as f64)
        };
        Ok(root.powi(self.num as i32))
    }
}

impl fmt::Display for Weight {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.den == 1 {
            write!(f, "{}", self.num)
        } else {
            write!(f, "{}/{}", self.num, self.den)
        }
    }
}

impl FromStr for Weight {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidArgument(format!("cannot parse weight {s:?}"));
        match s.trim().split_once('/') {
            Some((n, d)) => Weight::new(
                n.trim().parse().map_err(|_| bad())?,
                d.trim().parse().map_err(|_| bad())?,
            ),
            None => Ok(Weight::integer(s.trim().parse().map_err(|_| bad())?)),
        }
    }
}

impl Serialize for Weight {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// `gcd(n, 3)`.
pub fn root_degree(n: usize) -> u64 {
    gcd(n as u64, 3)
}

/// `𝒞(x) = J(ρ(x), x)`.
pub fn invariantized_jacobian(cfg: &JetConfiguration) -> Result<f64> {
    let frame = solve_frame(cfg)?;
    frame.element.jacobian_multiplier(cfg)
}

/// `(ln |𝒞|, 𝒞 < 0)`.
pub fn ln_invariantized_jacobian(cfg: &JetConfiguration) -> Result<(f64, bool)> {
    solve_frame(cfg)?.element.ln_jacobian(cfg)
}

/// Rational closed form of `|𝒞|`:
/// `|δ123|^(2n-9) |Φ(1)_12 Φ(1)_13|^(n-3) / prod_k |δ23k + δ123 Φ(1)_1k|^3`.
pub fn closed_form_magnitude(cfg: &JetConfiguration) -> f64 {
    let n = cfg.len() as i32;
    let d = cfg.delta0(0, 1, 2);
    let f12 = cfg.phi0(0, 0, 1);
    let f13 = cfg.phi0(0, 0, 2);
    let mut ln = (2 * n - 9) as f64 * d.abs().ln() + (n - 3) as f64 * (f12 * f13).abs().ln();
    for k in 3..cfg.len() {
        ln -= 3.0 * (cfg.delta0(1, 2, k) + d * cfg.phi0(0, 0, k)).abs().ln();
    }
    ln.exp()
}

/// `z'_n = 𝒞^(-1/g)` on the real branch.
pub fn primitive_element(cfg: &JetConfiguration) -> Result<f64> {
    let c = invariantized_jacobian(cfg)?;
    if c == 0.0 {
        return Err(Error::ZeroValue);
    }
    Weight::new(-1, root_degree(cfg.len()))?.power(c)
}

/// `z'_n` rebuilt from the closed-form magnitude and the sign of `𝒞`.
pub fn primitive_element_from_closed_form(cfg: &JetConfiguration) -> Result<f64> {
    let (_, negative) = ln_invariantized_jacobian(cfg)?;
    let mag = closed_form_magnitude(cfg);
    let c = if negative { -mag } else { mag };
    Weight::new(-1, root_degree(cfg.len()))?.power(c)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RelativeInvariantValue {
    pub c_value: f64,
    pub z_prime: f64,
    pub g_div: u64,
    /// Weight of `z'_n` with respect to the Jacobian.
    pub weight: Weight,
    pub c_weight: Weight,
    pub closed_form_abs_c: f64,
}

pub fn relative_invariants(cfg: &JetConfiguration) -> Result<RelativeInvariantValue> {
    let g = root_degree(cfg.len());
    Ok(RelativeInvariantValue {
        c_value: invariantized_jacobian(cfg)?,
        z_prime: primitive_element(cfg)?,
        g_div: g,
        weight: Weight::new(1, g)?,
        c_weight: Weight::integer(-1),
        closed_form_abs_c: closed_form_magnitude(cfg),
    })
}

/// Checks `f(g·x) = J(g, x)^ω f(x)` on random inputs.
pub fn check_relative<F>(f: F, weight: Weight, n: usize, trials: &TrialConfig, tolerance: f64) -> TrialReport
where
    F: Fn(&JetConfiguration) -> Result<f64> + Sync + Send,
{
    let results = trials.exec.map(trials.trials, |t| {
        let mut rng = trials.rng(t);
        let (cfg, g, before, after) = draw_pair(&mut rng, n, trials.spread, &f)?;
        let mult = weight.power(g.jacobian_multiplier(&cfg).ok()?).ok()?;
        Some(crate::rel_diff(after, mult * before))
    });
    TrialReport::collect(&results, tolerance, trials)
}

/// Scalar functions addressable by name from the command line.
pub fn builtin(name: &str) -> Option<fn(&JetConfiguration) -> Result<f64>> {
    fn zeta12(c: &JetConfiguration) -> Result<f64> {
        Ok(crate::invariants::basis_n3(c)?.zeta12)
    }
    fn tau(c: &JetConfiguration) -> Result<f64> {
        Ok(crate::invariants::basis_n3(c)?.tau)
    }
    fn delta123(c: &JetConfiguration) -> Result<f64> {
        c.delta(1, 2, 3)
    }
    match name {
        "c" | "C" => Some(invariantized_jacobian),
        "z" | "z_prime" => Some(primitive_element),
        "zeta12" => Some(zeta12),
        "tau" => Some(tau),
        "delta123" => Some(delta123),
        _ => None,
    }
}

pub const BUILTIN_NAMES: [&str; 5] = ["c", "z", "zeta12", "tau", "delta123"];

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exec::{sample_configuration, seeded_rng, SAMPLE_CONDITIONING};

    fn on_cross_section(n: usize) -> JetConfiguration {
        let mut v = vec![1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 2.0, 3.0, 0.0, 1.0, 4.0, 5.0];
        for k in 3..n {
            let t = k as f64;
            v.extend_from_slice(&[0.3 * t, 0.2 + 0.1 * t, -0.5, 0.25 * t]);
        }
        JetConfiguration::from_flat(&v).unwrap()
    }

    #[test]
    fn identity_frame_gives_unit_values() {
        let cfg = on_cross_section(3);
        assert_eq!(invariantized_jacobian(&cfg).unwrap(), 1.0);
        assert_eq!(primitive_element(&cfg).unwrap(), 1.0);
        // the closed form only fixes the magnitude: δ123 = -1 gives δ^-3 = -1
        assert_eq!(closed_form_magnitude(&cfg), 1.0);
    }

    #[test]
    fn weights_parse_and_reduce() {
        assert_eq!("-1".parse::<Weight>().unwrap(), Weight::integer(-1));
        assert_eq!("2/6".parse::<Weight>().unwrap(), Weight { num: 1, den: 3 });
        assert!("1/0".parse::<Weight>().is_err());
        assert!("x".parse::<Weight>().is_err());
        assert_eq!(Weight::new(1, 3).unwrap().to_string(), "1/3");
        assert_eq!(Weight::new(1, 3).unwrap().power(-8.0).unwrap(), -2.0);
        assert!(Weight::new(1, 2).unwrap().power(-4.0).is_err());
    }

    #[test]
    fn gcd_values() {
        assert_eq!(root_degree(3), 3);
        assert_eq!(root_degree(4), 1);
        assert_eq!(root_degree(5), 1);
        assert_eq!(root_degree(6), 3);
    }

    #[test]
    fn cube_root_identity_for_n6() {
        let mut rng = seeded_rng(41, 0);
        for _ in 0..20 {
            let cfg = sample_configuration(&mut rng, 6, SAMPLE_CONDITIONING).unwrap();
            let c = invariantized_jacobian(&cfg).unwrap();
            let z = primitive_element(&cfg).unwrap();
            assert!(crate::rel_diff(z.powi(3) * c, 1.0) < 1e-12);
            let z_cf = primitive_element_from_closed_form(&cfg).unwrap();
            assert!(crate::rel_diff(z, z_cf) < 1e-10);
        }
    }

    #[test]
    fn delta_alone_is_not_relative() {
        let tc = TrialConfig::new(30, 5, 0.2);
        let rep = check_relative(builtin("delta123").unwrap(), Weight::integer(-1), 4, &tc, 1e-9);
        assert!(!rep.passes());
        let rep = check_relative(builtin("c").unwrap(), Weight::integer(-1), 4, &tc, 1e-9);
        assert!(rep.passes(), "{rep:?}");
        let rep = check_relative(builtin("tau").unwrap(), Weight::integer(0), 3, &tc, 1e-8);
        assert!(rep.passes(), "{rep:?}");
    }
}

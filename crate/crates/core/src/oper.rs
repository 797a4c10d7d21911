//! Second-order Fuchsian operators `∂² + t(z)` on the Riemann sphere.
//!
//! `t(z) = Σ_j δ_j/(z−z_j)² + μ_j/(z−z_j)` in the affine coordinate `z`.
//! A configuration is *sealed* when `t` has exactly the declared behaviour at
//! infinity: a double pole with coefficient `δ_∞` if infinity is a puncture,
//! and the decay `t = O(z⁻⁴)` of a regular point otherwise.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{compensated_sum, CMat, C64};
use crate::transport::LinearSystemSpec;

/// Double-pole coefficient giving a double indicial root 1/2.
pub const PARABOLIC_DELTA: f64 = 0.25;

/// Constraint residuals below this (times the size of the summed terms) seal a config.
pub const SEAL_THRESHOLD: f64 = 1e-12;

/// Punctures closer than this are treated as coincident.
pub const MIN_SEPARATION: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct OperConfigFile {
    punctures: Vec<C64>,
    infinity: bool,
    #[serde(default)]
    delta: Option<Vec<f64>>,
    #[serde(default)]
    delta_inf: Option<f64>,
    #[serde(default)]
    mu: Option<Vec<C64>>,
    #[serde(default)]
    free_index: Option<usize>,
}

/// Punctures, double-pole coefficients and accessory parameters of one oper.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "OperConfigFile", into = "OperConfigFile")]
pub struct OperConfig {
    punctures: Vec<C64>,
    infinity: bool,
    delta: Vec<f64>,
    delta_inf: Option<f64>,
    mu: Vec<C64>,
    free_index: Option<usize>,
}

impl TryFrom<OperConfigFile> for OperConfig {
    type Error = Error;

    fn try_from(f: OperConfigFile) -> Result<Self> {
        let n = f.punctures.len();
        let delta = f.delta.unwrap_or_else(|| vec![PARABOLIC_DELTA; n]);
        let mu = f.mu.unwrap_or_else(|| vec![C64::new(0.0, 0.0); n]);
        let delta_inf = match (f.infinity, f.delta_inf) {
            (true, d) => Some(d.unwrap_or(PARABOLIC_DELTA)),
            (false, None) => None,
            (false, Some(_)) => {
                return Err(Error::InvalidConfig(
                    "delta_inf given but infinity is not a puncture".into(),
                ))
            }
        };
        let mut cfg = OperConfig::new(f.punctures, f.infinity, delta, delta_inf, mu)?;
        if let Some(k) = f.free_index {
            if k >= n {
                return Err(Error::InvalidConfig(format!(
                    "free_index {k} out of range for {n} punctures"
                )));
            }
            cfg.free_index = Some(k);
        }
        Ok(cfg)
    }
}

impl From<OperConfig> for OperConfigFile {
    fn from(c: OperConfig) -> Self {
        OperConfigFile {
            punctures: c.punctures,
            infinity: c.infinity,
            delta: Some(c.delta),
            delta_inf: c.delta_inf,
            mu: Some(c.mu),
            free_index: c.free_index,
        }
    }
}

impl OperConfig {
    pub fn new(
        punctures: Vec<C64>,
        infinity: bool,
        delta: Vec<f64>,
        delta_inf: Option<f64>,
        mu: Vec<C64>,
    ) -> Result<Self> {
        let n = punctures.len();
        if delta.len() != n || mu.len() != n {
            return Err(Error::InvalidConfig(format!(
                "{n} punctures but {} delta and {} mu entries",
                delta.len(),
                mu.len()
            )));
        }
        if infinity != delta_inf.is_some() {
            return Err(Error::InvalidConfig(
                "delta_inf must be present exactly when infinity is a puncture".into(),
            ));
        }
        let finite = punctures.iter().all(|z| z.re.is_finite() && z.im.is_finite())
            && delta.iter().all(|d| d.is_finite())
            && mu.iter().all(|m| m.re.is_finite() && m.im.is_finite())
            && delta_inf.is_none_or(f64::is_finite);
        if !finite {
            return Err(Error::InvalidConfig("non-finite oper data".into()));
        }
        for i in 0..n {
            for j in i + 1..n {
                let d = (punctures[i] - punctures[j]).norm();
                if d < MIN_SEPARATION {
                    return Err(Error::InvalidConfig(format!(
                        "punctures {i} and {j} coincide (separation {d:.3e})"
                    )));
                }
            }
        }
        Ok(OperConfig {
            punctures,
            infinity,
            delta,
            delta_inf,
            mu,
            free_index: None,
        })
    }

    /// Parabolic config (`δ = 1/4` everywhere) with accessory parameters
    /// solved from the constraints at infinity; for more than three punctures
    /// the first free parameter is set to `mu_free` and any others to zero.
    pub fn parabolic(punctures: Vec<C64>, infinity: bool, mu_free: C64) -> Result<Self> {
        let n = punctures.len();
        let cfg = OperConfig::new(
            punctures,
            infinity,
            vec![PARABOLIC_DELTA; n],
            infinity.then_some(PARABOLIC_DELTA),
            vec![C64::new(0.0, 0.0); n],
        )?;
        Ok(OperFamily::new(cfg)?.config_at(mu_free))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::ConfigParse(e.to_string()))
    }

    pub fn punctures(&self) -> &[C64] {
        &self.punctures
    }

    pub fn infinity_is_puncture(&self) -> bool {
        self.infinity
    }

    pub fn delta(&self) -> &[f64] {
        &self.delta
    }

    pub fn delta_inf(&self) -> Option<f64> {
        self.delta_inf
    }

    pub fn mu(&self) -> &[C64] {
        &self.mu
    }

    pub fn free_index(&self) -> Option<usize> {
        self.free_index
    }

    pub fn with_mu(&self, mu: Vec<C64>) -> Result<Self> {
        let mut c = OperConfig::new(
            self.punctures.clone(),
            self.infinity,
            self.delta.clone(),
            self.delta_inf,
            mu,
        )?;
        c.free_index = self.free_index;
        Ok(c)
    }

    /// Total number of punctures on the sphere, counting infinity.
    pub fn puncture_count(&self) -> usize {
        self.punctures.len() + usize::from(self.infinity)
    }

    /// Complex dimension of the family of sealed configs with these punctures
    /// and double-pole coefficients.
    pub fn free_parameter_count(&self) -> usize {
        self.puncture_count().saturating_sub(3)
    }

    pub fn evaluate_t(&self, z: C64) -> Result<C64> {
        if let Some(&p) = self.punctures.iter().find(|&&p| p == z) {
            return Err(Error::EvaluationAtPuncture(p));
        }
        Ok(self.t_unchecked(z))
    }

    fn t_unchecked(&self, z: C64) -> C64 {
        let mut acc = C64::new(0.0, 0.0);
        for ((&p, &d), &m) in self.punctures.iter().zip(&self.delta).zip(&self.mu) {
            let inv = (z - p).inv();
            acc += (inv * d + m) * inv;
        }
        acc
    }

    /// Constraint residuals at infinity (moduli of the complex residuals):
    /// `[Σμ, Σ(δ+μz) − δ_∞]` if infinity is a puncture, otherwise the
    /// `z⁻¹, z⁻², z⁻³` Laurent coefficients `[Σμ, Σ(δ+μz), Σ(2δz+μz²)]`.
    pub fn validate_at_infinity(&self) -> Vec<f64> {
        self.constraint_terms()
            .into_iter()
            .map(|terms| compensated_sum(terms).norm())
            .collect()
    }

    fn constraint_terms(&self) -> Vec<Vec<C64>> {
        let it = || self.punctures.iter().zip(&self.delta).zip(&self.mu);
        let c1: Vec<C64> = self.mu.clone();
        let mut c2: Vec<C64> = it()
            .flat_map(|((&z, &d), &m)| [C64::new(d, 0.0), m * z])
            .collect();
        match self.delta_inf {
            Some(di) => {
                c2.push(C64::new(-di, 0.0));
                vec![c1, c2]
            }
            None => {
                let c3 = it()
                    .flat_map(|((&z, &d), &m)| [z * (2.0 * d), m * z * z])
                    .collect();
                vec![c1, c2, c3]
            }
        }
    }

    /// Largest constraint residual relative to the size of its terms.
    pub fn seal_residual(&self) -> f64 {
        self.constraint_terms()
            .into_iter()
            .map(|terms| {
                let scale = terms.iter().map(|t| t.norm()).sum::<f64>().max(1.0);
                compensated_sum(terms).norm() / scale
            })
            .fold(0.0, f64::max)
    }

    pub fn is_sealed(&self) -> bool {
        self.seal_residual() < SEAL_THRESHOLD
    }

    /// First-order form `Y' = [[0, 1], [−t, 0]] Y` with `Y = (y, y')`.
    pub fn to_first_order_system(&self) -> Result<LinearSystemSpec> {
        if !self.is_sealed() {
            return Err(Error::UnsealedConfig(self.validate_at_infinity()));
        }
        let cfg = self.clone();
        let mut sys = LinearSystemSpec::new(2, self.punctures.clone(), move |z, a: &mut CMat| {
            let t = cfg.t_unchecked(z);
            a[(0, 0)] = C64::new(0.0, 0.0);
            a[(0, 1)] = C64::new(1.0, 0.0);
            a[(1, 0)] = -t;
            a[(1, 1)] = C64::new(0.0, 0.0);
        })?;
        sys.traceless = true;
        Ok(sys)
    }
}

/// Roots of `ρ(ρ−1) + δ = 0`, ordered by real part then imaginary part.
pub fn indicial_exponents(delta: f64) -> (C64, C64) {
    let disc = C64::new(1.0 - 4.0 * delta, 0.0).sqrt();
    let a = (C64::new(1.0, 0.0) - disc) * 0.5;
    let b = (C64::new(1.0, 0.0) + disc) * 0.5;
    if crate::numeric::cmp_re_im(&a, &b).is_le() {
        (a, b)
    } else {
        (b, a)
    }
}

/// One-parameter slice of sealed configs: the accessory parameter at
/// `free_index` is the variable and the constrained ones are affine in it.
#[derive(Debug, Clone)]
pub struct OperFamily {
    base: OperConfig,
    free_index: Option<usize>,
    solved: Vec<usize>,
    offset: Vec<C64>,
    slope: Vec<C64>,
}

impl OperFamily {
    /// The free slot is the config's `free_index` when set, else the first
    /// puncture. Accessory parameters that are neither free nor solved keep
    /// their values from `base`.
    pub fn new(base: OperConfig) -> Result<Self> {
        let n = base.punctures.len();
        let constraints = if base.infinity { 2 } else { 3 };
        if n < constraints {
            // Too few finite punctures for the constraints to be solvable
            // generically; only the trivial config qualifies.
            if n == 0 && !base.infinity {
                return Ok(OperFamily {
                    base,
                    free_index: None,
                    solved: vec![],
                    offset: vec![],
                    slope: vec![],
                });
            }
            return Err(Error::InvalidConfig(format!(
                "{} punctures on the sphere cannot carry a Fuchsian oper of this kind",
                base.puncture_count()
            )));
        }
        let free_index = if n > constraints {
            Some(base.free_index.unwrap_or(0))
        } else {
            None
        };
        let solved: Vec<usize> = (0..n).rev().filter(|&j| Some(j) != free_index).take(constraints).collect();
        let mut solved = solved;
        solved.sort_unstable();

        let mut family = OperFamily {
            base,
            free_index,
            solved,
            offset: vec![],
            slope: vec![],
        };
        let at0 = family.solve(C64::new(0.0, 0.0))?;
        let at1 = family.solve(C64::new(1.0, 0.0))?;
        family.slope = at1.iter().zip(&at0).map(|(a, b)| a - b).collect();
        family.offset = at0;
        Ok(family)
    }

    /// Solves the constraint system for the `solved` accessory parameters
    /// given the free value (a small Vandermonde system).
    fn solve(&self, mu_free: C64) -> Result<Vec<C64>> {
        let cfg = &self.base;
        let k = self.solved.len();
        let mut mu = cfg.mu.clone();
        if let Some(f) = self.free_index {
            mu[f] = mu_free;
        }
        let known: Vec<usize> = (0..cfg.punctures.len()).filter(|j| !self.solved.contains(j)).collect();
        let mut a = CMat::zeros(k, k);
        let mut rhs = nalgebra::DVector::<C64>::zeros(k);
        for (col, &j) in self.solved.iter().enumerate() {
            let z = cfg.punctures[j];
            let mut p = C64::new(1.0, 0.0);
            for row in 0..k {
                a[(row, col)] = p;
                p *= z;
            }
        }
        // Σμ = 0
        rhs[0] = -compensated_sum(known.iter().map(|&j| mu[j]));
        // Σ(δ + μz) = δ_∞ (or 0)
        let dsum = compensated_sum(cfg.delta.iter().map(|&d| C64::new(d, 0.0)));
        rhs[1] = C64::new(cfg.delta_inf.unwrap_or(0.0), 0.0)
            - dsum
            - compensated_sum(known.iter().map(|&j| mu[j] * cfg.punctures[j]));
        if k == 3 {
            // Σ(2δz + μz²) = 0
            let d2 = compensated_sum(
                cfg.punctures.iter().zip(&cfg.delta).map(|(&z, &d)| z * (2.0 * d)),
            );
            rhs[2] = -d2
                - compensated_sum(
                    known
                        .iter()
                        .map(|&j| mu[j] * cfg.punctures[j] * cfg.punctures[j]),
                );
        }
        let lu = a.lu();
        let x = lu
            .solve(&rhs)
            .ok_or_else(|| Error::InvalidConfig("constraint system is singular".into()))?;
        Ok(x.iter().copied().collect())
    }

    pub fn base(&self) -> &OperConfig {
        &self.base
    }

    /// Index of the free accessory parameter; `None` in the rigid case.
    pub fn free_index(&self) -> Option<usize> {
        self.free_index
    }

    pub fn is_rigid(&self) -> bool {
        self.free_index.is_none()
    }

    /// Sealed config at parameter `mu` (ignored in the rigid case).
    pub fn config_at(&self, mu: C64) -> OperConfig {
        let mut cfg = self.base.clone();
        if let Some(f) = self.free_index {
            cfg.mu[f] = mu;
        }
        for (i, &j) in self.solved.iter().enumerate() {
            cfg.mu[j] = self.offset[i] + self.slope[i] * mu;
        }
        cfg.free_index = self.free_index;
        cfg
    }

    /// True when `config_at(μ̄)` is the complex conjugate of `config_at(μ)`:
    /// real punctures and real fixed accessory parameters. The set of real
    /// opers is then closed under `μ ↦ μ̄`.
    pub fn is_conjugation_symmetric(&self) -> bool {
        let fixed = (0..self.base.mu.len())
            .filter(|&j| Some(j) != self.free_index && !self.solved.contains(&j))
            .map(|j| self.base.mu[j]);
        self.base.punctures.iter().all(|z| z.im == 0.0)
            && fixed.chain(self.offset.iter().copied()).chain(self.slope.iter().copied()).all(|z| z.im == 0.0)
    }

    /// Current value of the free parameter in the base config.
    pub fn base_mu(&self) -> C64 {
        self.free_index
            .map_or(C64::new(0.0, 0.0), |f| self.base.mu[f])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn single_term_value() {
        let cfg = OperConfig::new(vec![c(0.0, 0.0)], false, vec![0.25], None, vec![c(0.0, 0.0)]).unwrap();
        assert!((cfg.evaluate_t(c(2.0, 0.0)).unwrap() - c(1.0 / 16.0, 0.0)).norm() < 1e-16);
        assert!(matches!(
            cfg.evaluate_t(c(0.0, 0.0)),
            Err(Error::EvaluationAtPuncture(_))
        ));
    }

    #[test]
    fn zero_config_has_zero_residuals() {
        let cfg = OperConfig::new(vec![c(0.0, 0.0), c(1.0, 0.0)], false, vec![0.0; 2], None, vec![c(0.0, 0.0); 2]).unwrap();
        assert_eq!(cfg.validate_at_infinity(), vec![0.0, 0.0, 0.0]);
        assert_eq!(cfg.evaluate_t(c(0.3, 0.7)).unwrap(), c(0.0, 0.0));
    }

    #[test]
    fn two_finite_punctures_with_infinity() {
        // Σμ = 0 and 1/4 + 1/4 + μ_1 = 1/2 force μ = 0.
        let cfg = OperConfig::new(
            vec![c(0.0, 0.0), c(1.0, 0.0)],
            true,
            vec![0.25, 0.25],
            Some(0.5),
            vec![c(0.0, 0.0); 2],
        )
        .unwrap();
        assert_eq!(cfg.validate_at_infinity(), vec![0.0, 0.0]);
        let fam = OperFamily::new(cfg).unwrap();
        assert!(fam.is_rigid());
        assert!(fam.config_at(c(0.0, 0.0)).mu().iter().all(|m| m.norm() < 1e-15));
    }

    #[test]
    fn rigid_parabolic_triple() {
        let cfg = OperConfig::parabolic(vec![c(0.0, 0.0), c(1.0, 0.0)], true, c(0.0, 0.0)).unwrap();
        assert!((cfg.mu()[0] - c(0.25, 0.0)).norm() < 1e-15);
        assert!((cfg.mu()[1] - c(-0.25, 0.0)).norm() < 1e-15);
        assert!(cfg.is_sealed());
        assert_eq!(cfg.free_parameter_count(), 0);
    }

    #[test]
    fn four_punctures_give_one_parameter() {
        let base = OperConfig::parabolic(vec![c(0.0, 0.0), c(1.0, 0.0), c(2.0, 0.0)], true, c(0.0, 0.0)).unwrap();
        assert_eq!(base.free_parameter_count(), 1);
        let fam = OperFamily::new(base).unwrap();
        for mu in [c(0.3, -1.0), c(-2.0, 0.5), c(10.0, 3.0)] {
            let cfg = fam.config_at(mu);
            assert!(cfg.is_sealed(), "{:?}", cfg.validate_at_infinity());
            assert_eq!(cfg.mu()[0], mu);
        }
    }

    #[test]
    fn regular_infinity_decays_like_z_minus_four() {
        let base = OperConfig::parabolic(
            vec![c(0.0, 0.0), c(1.0, 0.0), c(0.0, 1.0), c(-1.0, -0.5)],
            false,
            c(0.1, 0.2),
        )
        .unwrap();
        assert!(base.is_sealed());
        let dir = c(0.6, 0.8);
        let r1 = 1e2;
        let r2 = 1e3;
        let v1 = (base.evaluate_t(dir * r1).unwrap() * (dir * r1).powi(4)).norm();
        let v2 = (base.evaluate_t(dir * r2).unwrap() * (dir * r2).powi(4)).norm();
        assert!((v1 - v2).abs() / v2 < 0.05);
    }

    #[test]
    fn indicial_roots() {
        assert_eq!(indicial_exponents(0.0), (c(0.0, 0.0), c(1.0, 0.0)));
        assert_eq!(indicial_exponents(0.25), (c(0.5, 0.0), c(0.5, 0.0)));
        let (a, b) = indicial_exponents(3.0 / 16.0);
        assert!((a - c(0.25, 0.0)).norm() < 1e-15 && (b - c(0.75, 0.0)).norm() < 1e-15);
        let (a, b) = indicial_exponents(1.0);
        assert!(a.im < b.im && (a.re - 0.5).abs() < 1e-15);
    }

    #[test]
    fn unsealed_config_is_rejected() {
        let cfg = OperConfig::new(vec![c(0.0, 0.0)], false, vec![0.25], None, vec![c(1.0, 0.0)]).unwrap();
        assert!(matches!(cfg.to_first_order_system(), Err(Error::UnsealedConfig(_))));
    }

    #[test]
    fn coincident_punctures_are_rejected() {
        let r = OperConfig::new(vec![c(1.0, 0.0), c(1.0, 0.0)], false, vec![0.0; 2], None, vec![c(0.0, 0.0); 2]);
        assert!(matches!(r, Err(Error::InvalidConfig(_))));
    }

    #[test]
    fn json_round_trip_and_defaults() {
        let cfg = OperConfig::from_json(r#"{"punctures": [[0,0],[1,0]], "infinity": true}"#).unwrap();
        assert_eq!(cfg.delta(), &[0.25, 0.25]);
        assert_eq!(cfg.delta_inf(), Some(0.25));
        let text = serde_json::to_string(&cfg).unwrap();
        assert_eq!(OperConfig::from_json(&text).unwrap(), cfg);
        assert!(matches!(
            OperConfig::from_json(r#"{"punctures": [[0,0]], "infinity": false, "delta_inf": 0.25}"#),
            Err(Error::ConfigParse(_))
        ));
    }
}

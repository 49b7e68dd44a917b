//! Synthetic joint distributions used as test beds.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::prob::{JointXY, Matrix};

/// Generator family plus its parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum InstanceSpec {
    /// X uniform over `n`, y = x mod k.
    DeterministicMod { n: usize, k: usize },
    /// `DeterministicMod` passed through a symmetric k-ary label flip.
    NoisyMod { n: usize, k: usize, noise: f64 },
    /// Seeded random positive joint.
    RandomJoint { n: usize, k: usize, seed: u64 },
}

impl InstanceSpec {
    pub fn build(&self) -> Result<JointXY> {
        match *self {
            InstanceSpec::DeterministicMod { n, k } => make_deterministic(n, k),
            InstanceSpec::NoisyMod { n, k, noise } => make_noisy(n, k, noise),
            InstanceSpec::RandomJoint { n, k, seed } => make_random_joint(n, k, seed),
        }
    }

    /// Parses `deterministic_mod:N:K`, `noisy_mod:N:K:ETA` or
    /// `random_joint:N:K:SEED`.
    pub fn parse(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').collect();
        let bad = || Error::Parameter(format!("unrecognized instance spec '{s}'"));
        let int = |v: &str| v.parse::<usize>().map_err(|_| bad());
        match parts.as_slice() {
            ["deterministic_mod", n, k] => Ok(InstanceSpec::DeterministicMod {
                n: int(n)?,
                k: int(k)?,
            }),
            ["noisy_mod", n, k, eta] => Ok(InstanceSpec::NoisyMod {
                n: int(n)?,
                k: int(k)?,
                noise: eta.parse().map_err(|_| bad())?,
            }),
            ["random_joint", n, k, seed] => Ok(InstanceSpec::RandomJoint {
                n: int(n)?,
                k: int(k)?,
                seed: seed.parse().map_err(|_| bad())?,
            }),
            _ => Err(bad()),
        }
    }

    /// Largest class size of the noiseless labelling, when one exists.
    pub fn max_class_size(&self) -> Option<usize> {
        match *self {
            InstanceSpec::DeterministicMod { n, k } | InstanceSpec::NoisyMod { n, k, .. } => Some(n.div_ceil(k)),
            InstanceSpec::RandomJoint { .. } => None,
        }
    }
}

fn check_nk(n: usize, k: usize) -> Result<()> {
    if n == 0 || k == 0 {
        return Err(Error::Parameter(format!("n and k must be positive (n={n}, k={k})")));
    }
    if k > n {
        return Err(Error::Parameter(format!("k={k} exceeds n={n}")));
    }
    Ok(())
}

pub fn make_deterministic(n: usize, k: usize) -> Result<JointXY> {
    check_nk(n, k)?;
    let w = 1.0 / n as f64;
    JointXY::new(Matrix::from_fn(n, k, |x, y| if x % k == y { w } else { 0.0 }))
}

/// Each x keeps its label `x mod k` with probability `1 - noise` and spreads
/// `noise` evenly over the other `k - 1` labels.
pub fn make_noisy(n: usize, k: usize, noise: f64) -> Result<JointXY> {
    check_nk(n, k)?;
    if k < 2 {
        return Err(Error::Parameter("noisy instances need k >= 2".into()));
    }
    if !(0.0..1.0).contains(&noise) {
        return Err(Error::Parameter(format!("noise {noise} outside [0, 1)")));
    }
    let w = 1.0 / n as f64;
    let off = noise / (k - 1) as f64;
    JointXY::new(Matrix::from_fn(n, k, |x, y| {
        if x % k == y {
            w * (1.0 - noise)
        } else {
            w * off
        }
    }))
}

/// Entries drawn i.i.d. uniform on [0.05, 1) then normalized.
pub fn make_random_joint(n: usize, k: usize, seed: u64) -> Result<JointXY> {
    if n == 0 || k == 0 {
        return Err(Error::Parameter(format!("n and k must be positive (n={n}, k={k})")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let raw: Vec<f64> = (0..n * k).map(|_| rng.random_range(0.05..1.0)).collect();
    let total: f64 = crate::prob::compensated_sum(raw.iter().copied());
    let mut m = Matrix::from_vec(n, k, raw.into_iter().map(|v| v / total).collect())?;
    // Fold the normalization residue into the largest cell.
    let residue = 1.0 - m.total();
    let (imax, _) = m
        .as_slice()
        .iter()
        .enumerate()
        .fold((0, f64::MIN), |acc, (i, &v)| if v > acc.1 { (i, v) } else { acc });
    m.as_mut_slice()[imax] += residue;
    JointXY::new(m)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn hb(p: f64) -> f64 {
        -p * p.ln() - (1.0 - p) * (1.0 - p).ln()
    }

    #[test]
    fn deterministic_examples() {
        let d = make_deterministic(16, 4).unwrap();
        assert!((d.h_y() - 1.386294).abs() < 1e-6);
        assert!((d.i_xy() - d.h_y()).abs() < 1e-12);
        let d = make_deterministic(8, 8).unwrap();
        assert!((d.h_y() - 8f64.ln()).abs() < 1e-12);
        assert!((d.i_xy() - d.h_x()).abs() < 1e-12);
        let d = make_deterministic(10, 3).unwrap();
        let expect = -0.4 * 0.4f64.ln() - 2.0 * 0.3 * 0.3f64.ln();
        assert!((d.h_y() - expect).abs() < 1e-12);
        assert!((d.h_y() - 1.088900).abs() < 1e-6);
        assert!(make_deterministic(3, 4).is_err());
        assert!(make_deterministic(0, 0).is_err());
    }

    #[test]
    fn deterministic_rows_one_hot() {
        let d = make_deterministic(12, 5).unwrap();
        for x in 0..12 {
            let nonzero = d.probs().row(x).iter().filter(|&&v| v > 0.0).count();
            assert_eq!(nonzero, 1);
        }
        assert!(d.h_y_given_x().abs() < 1e-12);
    }

    #[test]
    fn noisy_examples() {
        assert_eq!(make_noisy(8, 2, 0.0).unwrap(), make_deterministic(8, 2).unwrap());
        assert!(make_noisy(8, 2, 0.5).unwrap().i_xy().abs() < 1e-15);
        let d = make_noisy(8, 2, 0.2).unwrap();
        assert!((hb(0.2) - 0.500402).abs() < 1e-6);
        assert!((d.i_xy() - (2f64.ln() - hb(0.2))).abs() < 1e-12);
        assert!((d.i_xy() - 0.192745).abs() < 1e-6);
        assert!(make_noisy(8, 2, 1.0).is_err());
        assert!(make_noisy(8, 2, -0.1).is_err());
        assert!(make_noisy(8, 1, 0.1).is_err());
    }

    #[test]
    fn noisy_has_strict_gap() {
        for &(n, k, eta) in &[(8, 2, 0.01), (9, 3, 0.3), (16, 4, 0.05)] {
            let d = make_noisy(n, k, eta).unwrap();
            assert!(d.i_xy() < d.h_y() - 1e-6);
        }
    }

    #[test]
    fn random_joint_is_deterministic_and_positive() {
        let a = make_random_joint(5, 3, 42).unwrap();
        let b = make_random_joint(5, 3, 42).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, make_random_joint(5, 3, 43).unwrap());
        let c = make_random_joint(2, 2, 7).unwrap();
        assert!(c.p_x().iter().chain(c.p_y().iter()).all(|&p| p > 0.0));
    }

    #[test]
    fn spec_parsing() {
        assert_eq!(
            InstanceSpec::parse("noisy_mod:8:2:0.2").unwrap(),
            InstanceSpec::NoisyMod { n: 8, k: 2, noise: 0.2 }
        );
        assert_eq!(
            InstanceSpec::parse("deterministic_mod:16:4").unwrap().build().unwrap(),
            make_deterministic(16, 4).unwrap()
        );
        assert!(InstanceSpec::parse("gaussian:3").is_err());
        assert!(InstanceSpec::parse("random_joint:3:2:x").is_err());
        let spec = InstanceSpec::RandomJoint { n: 3, k: 2, seed: 9 };
        let json = serde_json::to_string(&spec).unwrap();
        assert_eq!(json, r#"{"family":"random_joint","n":3,"k":2,"seed":9}"#);
    }
}

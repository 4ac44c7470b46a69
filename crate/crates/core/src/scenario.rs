//! Stance-controlled input bundles.
//!
//! A [`ScenarioSpec`] fixes the left/right mix and the bundle size; sampling
//! turns it into concrete [`ScenarioInstance`]s. Documents are drawn without
//! replacement inside one instance and independently across instances, so a
//! document may appear in several instances.

use std::io::{BufRead, Write};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::corpus::{Stance, StancePools};
use crate::scalar::Scalar;

pub const EQUAL: &str = "equal";
pub const SKEW_LEFT: &str = "skew_left";
pub const SKEW_RIGHT: &str = "skew_right";

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScenarioError {
    #[error("scenario {name:?}: {size} documents at p_left={p_left} leaves one side empty")]
    DegenerateMix { name: String, size: usize, p_left: f64 },
    #[error("scenario {name:?}: {size} x {p_left} is not a whole number of documents")]
    NonIntegralMix { name: String, size: usize, p_left: f64 },
    #[error("scenario {name:?}: p_left={p_left} is outside [0, 1]")]
    InvalidProportion { name: String, p_left: f64 },
    #[error("instances must be at least 1")]
    NoInstances,
    #[error("instance size must be at least 2, got {0}")]
    SizeTooSmall(usize),
    #[error("not enough {stance} documents: need {need}, have {have}")]
    InsufficientPool { stance: Stance, need: usize, have: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub name: String,
    pub p_left: f64,
    pub p_right: f64,
    pub instances: usize,
    pub size: usize,
    pub seed: u64,
}

impl ScenarioSpec {
    /// Validates the mix; `p_right` is the complement of `p_left`.
    pub fn new(
        name: impl Into<String>,
        p_left: f64,
        instances: usize,
        size: usize,
        seed: u64,
    ) -> Result<Self, ScenarioError> {
        let name = name.into();
        if !(0.0..=1.0).contains(&p_left) || p_left.is_nan() {
            return Err(ScenarioError::InvalidProportion { name, p_left });
        }
        if instances == 0 {
            return Err(ScenarioError::NoInstances);
        }
        if size < 2 {
            return Err(ScenarioError::SizeTooSmall(size));
        }
        let spec = ScenarioSpec {
            name,
            p_left,
            p_right: 1.0 - p_left,
            instances,
            size,
            seed,
        };
        let (n_left, _) = spec.composition();
        if n_left == 0 || n_left == size {
            return Err(ScenarioError::DegenerateMix {
                name: spec.name,
                size,
                p_left,
            });
        }
        Ok(spec)
    }

    /// Per-instance `(n_left, n_right)`, rounding half away from zero.
    pub fn composition(&self) -> (usize, usize) {
        let n_left = (self.size as f64 * self.p_left)
            .round_half_away()
            .clamp(0, self.size as i64) as usize;
        (n_left, self.size - n_left)
    }

    pub fn instance_id(&self, index: usize) -> String {
        format!("{}-{:04}", self.name, index)
    }

    pub fn instance_seed(&self, index: usize) -> u64 {
        derive_seed(self.seed, &self.name, Some(index as u64))
    }
}

/// Stable seed derivation: SHA-256 over the parent seed, the scenario name,
/// and an optional instance index, truncated to 64 bits.
pub fn derive_seed(seed: u64, name: &str, index: Option<u64>) -> u64 {
    let mut hasher = Sha256::new();
    hasher.update(seed.to_le_bytes());
    hasher.update(name.as_bytes());
    hasher.update([0u8]);
    if let Some(i) = index {
        hasher.update(i.to_le_bytes());
    }
    let digest = hasher.finalize();
    let mut bytes = [0u8; 8];
    bytes.copy_from_slice(&digest[..8]);
    u64::from_le_bytes(bytes)
}

/// The equal (50/50), skew-left (75/25) and skew-right (25/75) mixes.
pub fn builtin_specs(instances: usize, size: usize, seed: u64) -> Result<Vec<ScenarioSpec>, ScenarioError> {
    [(EQUAL, 0.5), (SKEW_LEFT, 0.75), (SKEW_RIGHT, 0.25)]
        .into_iter()
        .map(|(name, p_left)| {
            let exact = size as f64 * p_left;
            if exact.fract() != 0.0 {
                return Err(ScenarioError::NonIntegralMix {
                    name: name.to_string(),
                    size,
                    p_left,
                });
            }
            ScenarioSpec::new(name, p_left, instances, size, derive_seed(seed, name, None))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScenarioInstance {
    pub instance_id: String,
    pub scenario: String,
    pub document_ids: Vec<String>,
    pub n_left: usize,
    pub n_right: usize,
}

impl ScenarioInstance {
    pub fn expected_p_left<T: Scalar>(&self) -> T {
        T::from_counts(self.n_left as u64, (self.n_left + self.n_right) as u64)
    }

    pub fn expected_p_right<T: Scalar>(&self) -> T {
        T::from_counts(self.n_right as u64, (self.n_left + self.n_right) as u64)
    }
}

/// Draw `spec.instances` bundles from the pools. Each instance is seeded
/// independently, so the parallel result equals the sequential one.
pub fn sample_instances(spec: &ScenarioSpec, pools: &StancePools) -> Result<Vec<ScenarioInstance>, ScenarioError> {
    let (n_left, n_right) = spec.composition();
    for (stance, need) in [(Stance::Left, n_left), (Stance::Right, n_right)] {
        let have = pools.get(stance).len();
        if have < need {
            return Err(ScenarioError::InsufficientPool { stance, need, have });
        }
    }
    let left = pools.get(Stance::Left);
    let right = pools.get(Stance::Right);
    Ok((0..spec.instances)
        .into_par_iter()
        .map(|index| {
            let mut rng = ChaCha8Rng::seed_from_u64(spec.instance_seed(index));
            let mut ids: Vec<String> = left.choose_multiple(&mut rng, n_left).cloned().collect();
            ids.extend(right.choose_multiple(&mut rng, n_right).cloned());
            ids.shuffle(&mut rng);
            ScenarioInstance {
                instance_id: spec.instance_id(index),
                scenario: spec.name.clone(),
                document_ids: ids,
                n_left,
                n_right,
            }
        })
        .collect())
}

/// `P_TL - P_TR` over the input bundle.
pub fn expected_spd<T: Scalar>(instance: &ScenarioInstance) -> T {
    instance.expected_p_left::<T>() - instance.expected_p_right::<T>()
}

pub fn write_instances<W: Write>(mut out: W, instances: &[ScenarioInstance]) -> std::io::Result<()> {
    for instance in instances {
        serde_json::to_writer(&mut out, instance)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_instances<R: BufRead>(reader: R) -> Result<Vec<ScenarioInstance>, serde_json::Error> {
    reader
        .lines()
        .map(|l| l.map_err(serde_json::Error::io))
        .filter(|l| !matches!(l, Ok(s) if s.trim().is_empty()))
        .map(|l| l.and_then(|s| serde_json::from_str(&s)))
        .collect()
}

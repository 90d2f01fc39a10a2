//! Density-proportional point sampling of scalar fields.
//!
//! Candidates are drawn uniformly over the field's box and accepted with
//! probability `field(x) / max(field)`. The random stream is xorshift64*, and
//! the draw order (x, y, z, acceptance) is fixed so that results are
//! bit-identical across runs and platforms.

use thiserror::Error;

use crate::data_model::{KeyData, ScalarField, VariableArray, Vec3};

const XORSHIFT_MULTIPLIER: u64 = 2_685_821_657_736_338_717;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SamplingError {
    #[error("xorshift64* state must be nonzero")]
    ZeroState,
    #[error("field \"{field}\" has a negative or non-finite value at index {index}")]
    InvalidDensity { field: String, index: usize },
    #[error("field \"{0}\" is zero everywhere; cannot place points")]
    AllZero(String),
    #[error("interpolant \"{interpolant}\" does not share the domain of field \"{field}\"")]
    DomainMismatch { field: String, interpolant: String },
}

/// One xorshift64* step. Returns `(output, next_state)`.
pub fn prng_next(state: u64) -> Result<(u64, u64), SamplingError> {
    if state == 0 {
        return Err(SamplingError::ZeroState);
    }
    let mut s = state;
    s ^= s >> 12;
    s ^= s << 25;
    s ^= s >> 27;
    Ok((s.wrapping_mul(XORSHIFT_MULTIPLIER), s))
}

#[derive(Debug, Clone)]
pub struct Xorshift64Star {
    state: u64,
}

impl Xorshift64Star {
    pub fn new(seed: u64) -> Result<Self, SamplingError> {
        if seed == 0 {
            return Err(SamplingError::ZeroState);
        }
        Ok(Xorshift64Star { state: seed })
    }

    pub fn next_u64(&mut self) -> u64 {
        let (value, state) = prng_next(self.state).expect("state is never zero");
        self.state = state;
        value
    }

    /// Uniform in [0, 1): the top 53 bits of the output over 2^53, i.e.
    /// `value / 2^64` truncated to double precision.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SamplerConfig {
    pub count: usize,
    pub seed: u64,
    /// Candidate budget; `None` means `1000 * count`.
    pub max_attempts: Option<u64>,
}

impl SamplerConfig {
    pub fn new(count: usize, seed: u64) -> Self {
        SamplerConfig {
            count,
            seed,
            max_attempts: None,
        }
    }

    pub fn attempt_budget(&self) -> u64 {
        self.max_attempts.unwrap_or(1000 * self.count as u64)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DensitySample {
    pub key_data: KeyData,
    pub attempts: u64,
    /// Set when the attempt budget ran out before `count` points were accepted.
    pub exhausted: bool,
}

/// Samples `cfg.count` points with density proportional to `field`, carrying
/// each interpolant as a per-vertex scalar variable. The key data is named
/// `<field>-points`.
pub fn sample_density(
    field: &ScalarField,
    cfg: &SamplerConfig,
    interpolants: &[&ScalarField],
) -> Result<DensitySample, SamplingError> {
    let mut rng = Xorshift64Star::new(cfg.seed)?;
    if let Some(index) = field
        .values
        .iter()
        .position(|v| !(v.is_finite() && *v >= 0.0))
    {
        return Err(SamplingError::InvalidDensity {
            field: field.name.clone(),
            index,
        });
    }
    let domain = field.bounds();
    for interp in interpolants {
        let b = interp.bounds();
        let same = (0..3).all(|i| {
            (b.min[i] - domain.min[i]).abs() <= 1e-9 && (b.max[i] - domain.max[i]).abs() <= 1e-9
        });
        if !same {
            return Err(SamplingError::DomainMismatch {
                field: field.name.clone(),
                interpolant: interp.name.clone(),
            });
        }
    }

    let mut positions: Vec<Vec3> = Vec::with_capacity(cfg.count);
    let mut attempts = 0u64;
    if cfg.count > 0 {
        let peak = field.max_value();
        if !(peak > 0.0) {
            return Err(SamplingError::AllZero(field.name.clone()));
        }
        let extent = domain.extent();
        let budget = cfg.attempt_budget();
        while positions.len() < cfg.count && attempts < budget {
            attempts += 1;
            let mut p = [0.0; 3];
            for axis in 0..3 {
                p[axis] = domain.min[axis] + rng.next_f64() * extent[axis];
            }
            let accept = rng.next_f64();
            if accept < field.sample(p) / peak {
                positions.push(p);
            }
        }
    }
    let exhausted = positions.len() < cfg.count;
    if exhausted {
        log::warn!(
            "sampling {}: attempt budget exhausted after {} of {} points",
            field.name,
            positions.len(),
            cfg.count
        );
    }

    let mut key_data = KeyData::points(format!("{}-points", field.name), positions);
    for interp in interpolants {
        let values = key_data
            .vertices
            .iter()
            .map(|&p| interp.sample(p))
            .collect();
        key_data = key_data.with_variable(VariableArray::scalar(interp.name.clone(), values));
    }
    Ok(DensitySample {
        key_data,
        attempts,
        exhausted,
    })
}

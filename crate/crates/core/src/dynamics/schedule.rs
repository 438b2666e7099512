use std::sync::Arc;

use crate::error::{Error, Result};
use crate::state::{DensityOperator, NonHermitianGenerator};

/// Source of the generator used at time `t` and state `ρ`.
///
/// Plain schedules ignore the state; optimized generators are rebuilt from
/// the instantaneous spectral projectors of `ρ`.
pub trait GeneratorField: Send + Sync {
    fn generator(&self, t: f64, rho: &DensityOperator) -> Result<NonHermitianGenerator>;

    /// Time interval `[t0, t1]` on which the field is defined.
    fn horizon(&self) -> (f64, f64);
}

type Sampler = dyn Fn(f64) -> Result<NonHermitianGenerator> + Send + Sync;

/// Time-dependent generator `K(t) = H(t) − iΓ(t)` on a horizon.
#[derive(Clone)]
pub struct GeneratorSchedule {
    sampler: Arc<Sampler>,
    t0: f64,
    t1: f64,
}

impl std::fmt::Debug for GeneratorSchedule {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("GeneratorSchedule")
            .field("t0", &self.t0)
            .field("t1", &self.t1)
            .finish()
    }
}

impl GeneratorSchedule {
    pub fn new(
        t0: f64,
        t1: f64,
        sampler: impl Fn(f64) -> Result<NonHermitianGenerator> + Send + Sync + 'static,
    ) -> Result<Self> {
        if !(t1 > t0) || !t0.is_finite() || !t1.is_finite() {
            return Err(Error::InvalidArgument {
                name: "horizon",
                detail: format!("need finite t0 < t1, got [{t0}, {t1}]"),
            });
        }
        Ok(GeneratorSchedule {
            sampler: Arc::new(sampler),
            t0,
            t1,
        })
    }

    pub fn constant(gen: NonHermitianGenerator, t0: f64, t1: f64) -> Result<Self> {
        Self::new(t0, t1, move |_| Ok(gen.clone()))
    }

    pub fn sample(&self, t: f64) -> Result<NonHermitianGenerator> {
        (self.sampler)(t)
    }
}

impl GeneratorField for GeneratorSchedule {
    fn generator(&self, t: f64, _rho: &DensityOperator) -> Result<NonHermitianGenerator> {
        self.sample(t)
    }

    fn horizon(&self) -> (f64, f64) {
        (self.t0, self.t1)
    }
}

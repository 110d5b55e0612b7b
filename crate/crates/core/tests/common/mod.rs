#![allow(dead_code)]

use mzfisher_core::states::{build_amplitude_table, AmplitudeTable, LightSource};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

pub fn rng(seed: u64) -> StdRng {
    StdRng::seed_from_u64(seed)
}

/// Random phase-matched source with total mean photon number in `(0.5, n_max]`.
pub fn random_source(rng: &mut StdRng, n_max: f64) -> LightSource {
    let n_bar = rng.random_range(0.5..=n_max);
    let alpha2 = rng.random_range(0.05..0.95) * n_bar;
    LightSource::from_split(n_bar, alpha2).unwrap()
}

pub fn table(src: &LightSource) -> AmplitudeTable {
    build_amplitude_table(src, 1e-12).unwrap()
}

pub fn rel(a: f64, b: f64) -> f64 {
    if b == 0.0 {
        a.abs()
    } else {
        ((a - b) / b).abs()
    }
}

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::VoxelData;
use crate::error::{Error, Result};

/// Adds i.i.d. `N(0, (κ·peak)²)` noise to each component of every masked
/// voxel. Voxel `i` draws from ChaCha stream `i` of `seed`, so the draws do
/// not depend on evaluation order.
pub fn add_noise(clean: &VoxelData, kappa: f64, seed: u64, peak_speed: f64) -> Result<VoxelData> {
    if !(kappa >= 0.0 && kappa.is_finite()) {
        return Err(Error::InvalidArgument(format!("noise level must be non-negative, got {kappa}")));
    }
    if !(peak_speed >= 0.0 && peak_speed.is_finite()) {
        return Err(Error::InvalidArgument(format!("peak speed must be non-negative, got {peak_speed}")));
    }
    let mut out = clean.clone();
    out.kappa = kappa;
    out.seed = Some(seed);
    if kappa == 0.0 {
        return Ok(out);
    }
    let std = kappa * peak_speed;
    for (i, v) in out.values.iter_mut().enumerate() {
        if !clean.grid.alpha[i] {
            continue;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(i as u64);
        let a: f64 = rng.sample(StandardNormal);
        let b: f64 = rng.sample(StandardNormal);
        v[0] += std * a;
        v[1] += std * b;
    }
    Ok(out)
}

//! Seeded random states: smooth directions built from low Dirichlet sine modes.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::grid::{norm_l2, Grid, State};

pub type SampleRng = ChaCha8Rng;

pub fn rng(seed: u64) -> SampleRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Number of sine modes per axis used for random directions.
pub const DEFAULT_MODES: usize = 16;

/// Random unit-L² state `Σ c_k Π_j sin(k_j π (x_j + R) / 2R)` with
/// `c_k ~ N(0, 1) / |k|`, which vanishes on the boundary.
pub fn random_direction(grid: &Grid, rng: &mut impl Rng, modes: usize) -> State {
    let d = grid.dim();
    let r = grid.half_width();
    let modes = modes.max(1);
    let per_axis = match d {
        1 => modes,
        2 => modes.min(8),
        _ => modes.min(4),
    };
    let count = per_axis.pow(d as u32);
    let mut ks = Vec::with_capacity(count);
    let mut coeffs = Vec::with_capacity(count);
    for idx in 0..count {
        let mut k = [1usize; 3];
        let mut rest = idx;
        for kj in k.iter_mut().take(d) {
            *kj = rest % per_axis + 1;
            rest /= per_axis;
        }
        let mag = k[..d].iter().map(|&v| (v * v) as f64).sum::<f64>().sqrt();
        let z: f64 = rng.sample(StandardNormal);
        ks.push(k);
        coeffs.push(z / mag);
    }
    let raw = State::from_fn(grid, |x| {
        ks.iter()
            .zip(&coeffs)
            .map(|(k, c)| {
                c * (0..d)
                    .map(|j| (k[j] as f64 * std::f64::consts::PI * (x[j] + r) / (2.0 * r)).sin())
                    .product::<f64>()
            })
            .sum()
    });
    let n = norm_l2(&raw);
    if n > 0.0 {
        raw.scaled(1.0 / n)
    } else {
        random_direction(grid, rng, modes)
    }
}

/// Random state with L² norm uniform in `[0, max_norm]`.
pub fn random_in_ball(grid: &Grid, rng: &mut impl Rng, max_norm: f64) -> State {
    let dir = random_direction(grid, rng, DEFAULT_MODES);
    let radius = rng.random_range(0.0..=max_norm);
    dir.scaled(radius)
}

/// `count` seeded samples of the L² ball of radius `rho0`.
pub fn sample_ball(grid: &Grid, rho0: f64, count: usize, seed: u64) -> Vec<State> {
    let mut rng = rng(seed);
    (0..count)
        .map(|_| random_in_ball(grid, &mut rng, rho0))
        .collect()
}

/// Rough random state with i.i.d. uniform interior values in `[-amp, amp]`.
pub fn random_rough(grid: &Grid, rng: &mut impl Rng, amp: f64) -> State {
    let values = (0..grid.len())
        .map(|i| {
            if grid.is_interior(i) {
                rng.random_range(-amp..=amp)
            } else {
                0.0
            }
        })
        .collect();
    State::from_values(grid, values).expect("interior values are finite")
}

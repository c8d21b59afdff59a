//! Seeded random fields.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::grid::{norm_h, Field, Grid};

/// Independent stream number `index` under `seed`.
pub fn substream(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Nodewise i.i.d. uniform values in `[-1, 1]`.
pub fn random_field(grid: Grid, rng: &mut impl Rng) -> Field {
    let values = (0..grid.len())
        .map(|_| rng.random_range(-1.0..=1.0))
        .collect();
    Field::from_values(grid, values).expect("finite samples")
}

const SMOOTH_MODES: usize = 6;

/// Sum of the lowest sine modes with Gaussian coefficients decaying as `1/|k|²`.
pub fn random_smooth_field(grid: Grid, rng: &mut impl Rng) -> Field {
    let modes = SMOOTH_MODES.min(grid.n());
    match grid.dim() {
        1 => {
            let coeffs: Vec<f64> = (1..=modes)
                .map(|k| rng.sample::<f64, _>(StandardNormal) / (k * k) as f64)
                .collect();
            Field::from_fn(grid, |x, _| {
                coeffs
                    .iter()
                    .enumerate()
                    .map(|(k, c)| c * (PI * (k + 1) as f64 * x).sin())
                    .sum()
            })
        }
        _ => {
            let mut coeffs = vec![0.0; modes * modes];
            for a in 0..modes {
                for b in 0..modes {
                    let k2 = ((a + 1) * (a + 1) + (b + 1) * (b + 1)) as f64;
                    coeffs[a * modes + b] = rng.sample::<f64, _>(StandardNormal) / k2;
                }
            }
            Field::from_fn(grid, |x, y| {
                let sx: Vec<f64> = (1..=modes).map(|k| (PI * k as f64 * x).sin()).collect();
                let sy: Vec<f64> = (1..=modes).map(|k| (PI * k as f64 * y).sin()).collect();
                let mut acc = 0.0;
                for a in 0..modes {
                    for b in 0..modes {
                        acc += coeffs[a * modes + b] * sx[a] * sy[b];
                    }
                }
                acc
            })
        }
    }
}

/// [`random_smooth_field`] rescaled to `norm_h = 1`.
pub fn random_unit_field(grid: Grid, rng: &mut impl Rng) -> Field {
    loop {
        let u = random_smooth_field(grid, rng);
        let norm = norm_h(&u);
        if norm > 1e-12 {
            return u.scaled(1.0 / norm);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn substreams_are_reproducible_and_distinct() {
        let g = Grid::line(16).unwrap();
        let a = random_field(g, &mut substream(7, 3));
        let b = random_field(g, &mut substream(7, 3));
        let c = random_field(g, &mut substream(7, 4));
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn unit_fields_are_normalized() {
        let g = Grid::square(12).unwrap();
        let mut rng = substream(1, 0);
        for _ in 0..5 {
            let u = random_unit_field(g, &mut rng);
            assert!((norm_h(&u) - 1.0).abs() < 1e-12);
        }
    }
}

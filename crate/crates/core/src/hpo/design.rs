use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::space::{GridPoint, HyperparameterSpace, DIMENSIONS};
use super::HpoError;

const MAX_REDRAWS: usize = 1000;

fn lhs_sample(space: &HyperparameterSpace, n: usize, rng: &mut ChaCha8Rng) -> Vec<GridPoint> {
    let sizes = space.sizes();
    let mut columns: Vec<Vec<usize>> = Vec::with_capacity(DIMENSIONS);
    for &m in &sizes {
        let mut strata: Vec<usize> = (0..n).collect();
        strata.shuffle(rng);
        columns.push(
            strata
                .into_iter()
                .map(|s| {
                    let u = (s as f64 + rng.gen::<f64>()) / n as f64;
                    (u * (m - 1) as f64).round() as usize
                })
                .collect(),
        );
    }
    (0..n)
        .map(|i| GridPoint(std::array::from_fn(|d| columns[d][i])))
        .collect()
}

/// Latin-hypercube design of `n0` distinct grid points.
///
/// A continuous sample in `[0, 1]^6` is rounded to the nearest grid index per
/// dimension. Points that collide with an earlier one are replaced by points
/// from fresh Latin-hypercube draws.
pub fn latin_hypercube(
    space: &HyperparameterSpace,
    n0: usize,
    seed: u64,
) -> Result<Vec<GridPoint>, HpoError> {
    if (n0 as u128) > space.size() {
        return Err(HpoError::Design(format!(
            "{n0} design points requested from a space of {}",
            space.size()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut seen = BTreeSet::new();
    let mut design = Vec::with_capacity(n0);
    for _ in 0..MAX_REDRAWS {
        for p in lhs_sample(space, n0, &mut rng) {
            if design.len() == n0 {
                break;
            }
            if seen.insert(p) {
                design.push(p);
            }
        }
        if design.len() == n0 {
            return Ok(design);
        }
    }
    Err(HpoError::Design(format!(
        "found only {} distinct points out of {n0}",
        design.len()
    )))
}

use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::space::{GridPoint, HyperparameterSpace, DIMENSIONS};
use super::surrogate::{Surrogate, SurrogateKind};
use super::HpoError;

/// Exploitation weights cycled by adaptive iteration.
pub const WEIGHT_CYCLE: [f64; 4] = [0.3, 0.5, 0.8, 0.95];
pub const PERTURBATION_CANDIDATES: usize = 500;
pub const UNIFORM_CANDIDATES: usize = 500;
const FALLBACK_DRAWS: usize = 10_000;
const ENUMERATION_LIMIT: u128 = 1_000_000;

pub fn weight_for_iteration(iteration: usize) -> f64 {
    WEIGHT_CYCLE[iteration % WEIGHT_CYCLE.len()]
}

/// Evaluated history plus the surrogate fitted to it.
#[derive(Debug, Clone)]
pub struct SurrogateState {
    pub points: Vec<GridPoint>,
    /// Mean validation MSE per point; failed points are `+inf`.
    pub performances: Vec<f64>,
    pub surrogate: Surrogate,
    pub iteration: usize,
}

/// Replaces `+inf` (failed) performances by the worst finite one.
pub fn clamp_failures(performances: &[f64]) -> Vec<f64> {
    let worst = performances
        .iter()
        .copied()
        .filter(|v| v.is_finite())
        .fold(f64::NEG_INFINITY, f64::max);
    let fill = if worst.is_finite() { worst } else { 0.0 };
    performances
        .iter()
        .map(|&v| if v.is_finite() { v } else { fill })
        .collect()
}

impl SurrogateState {
    pub fn fit(
        space: &HyperparameterSpace,
        points: &[GridPoint],
        performances: &[f64],
        kind: SurrogateKind,
        iteration: usize,
    ) -> Result<Self, HpoError> {
        let scaled: Vec<Vec<f64>> = points.iter().map(|p| space.scaled(p)).collect();
        let surrogate = Surrogate::fit(kind, &scaled, &clamp_failures(performances))?;
        Ok(Self {
            points: points.to_vec(),
            performances: performances.to_vec(),
            surrogate,
            iteration,
        })
    }

    /// Best finite point; ties go to the lowest grid point.
    pub fn incumbent(&self) -> Option<GridPoint> {
        self.points
            .iter()
            .zip(&self.performances)
            .filter(|(_, v)| v.is_finite())
            .min_by(|(pa, va), (pb, vb)| va.total_cmp(vb).then(pa.cmp(pb)))
            .map(|(p, _)| *p)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Proposal {
    Point(GridPoint),
    /// Every grid point has been evaluated.
    Exhausted,
}

fn uniform_point(space: &HyperparameterSpace, rng: &mut ChaCha8Rng) -> GridPoint {
    let sizes = space.sizes();
    GridPoint(std::array::from_fn(|d| rng.gen_range(0..sizes[d])))
}

fn perturb(space: &HyperparameterSpace, center: &GridPoint, rng: &mut ChaCha8Rng) -> GridPoint {
    let sizes = space.sizes();
    let mut p = *center;
    for d in 0..DIMENSIONS {
        if rng.gen_bool(0.5) {
            let step = rng.gen_range(1..=3) as i64;
            let signed = if rng.gen_bool(0.5) { step } else { -step };
            p.0[d] = (p.0[d] as i64 + signed).clamp(0, sizes[d] as i64 - 1) as usize;
        }
    }
    p
}

fn min_distance(x: &[f64], evaluated: &[Vec<f64>]) -> f64 {
    evaluated
        .iter()
        .map(|e| {
            e.iter()
                .zip(x)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt()
        })
        .fold(f64::INFINITY, f64::min)
}

fn minmax_scale(v: &[f64]) -> Vec<f64> {
    let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if hi > lo {
        v.iter().map(|x| (x - lo) / (hi - lo)).collect()
    } else {
        vec![0.0; v.len()]
    }
}

/// A scored candidate; exposed so callers can inspect the auxiliary problem.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredCandidate {
    pub point: GridPoint,
    pub prediction: f64,
    pub min_distance: f64,
    pub score: f64,
}

/// Scores `w * pred + (1 - w) * (-dist)`, each term min-max scaled over the
/// candidate set. Returned in ascending grid-point order.
pub fn score_candidates(
    state: &SurrogateState,
    space: &HyperparameterSpace,
    candidates: &BTreeSet<GridPoint>,
    weight: f64,
) -> Vec<ScoredCandidate> {
    let evaluated: Vec<Vec<f64>> = state.points.iter().map(|p| space.scaled(p)).collect();
    let pts: Vec<GridPoint> = candidates.iter().copied().collect();
    let coords: Vec<Vec<f64>> = pts.iter().map(|p| space.scaled(p)).collect();
    let preds: Vec<f64> = coords.iter().map(|c| state.surrogate.predict(c)).collect();
    let dists: Vec<f64> = coords.iter().map(|c| min_distance(c, &evaluated)).collect();
    let neg: Vec<f64> = dists.iter().map(|d| -d).collect();
    let sp = minmax_scale(&preds);
    let sd = minmax_scale(&neg);
    pts.into_iter()
        .enumerate()
        .map(|(i, point)| ScoredCandidate {
            point,
            prediction: preds[i],
            min_distance: dists[i],
            score: weight * sp[i] + (1.0 - weight) * sd[i],
        })
        .collect()
}

/// Candidate set for one adaptive iteration: perturbations of the incumbent
/// and uniform grid draws, minus every evaluated point.
pub fn generate_candidates(
    state: &SurrogateState,
    space: &HyperparameterSpace,
    rng: &mut ChaCha8Rng,
) -> BTreeSet<GridPoint> {
    let evaluated: BTreeSet<GridPoint> = state.points.iter().copied().collect();
    let mut out = BTreeSet::new();
    if let Some(center) = state.incumbent() {
        for _ in 0..PERTURBATION_CANDIDATES {
            out.insert(perturb(space, &center, rng));
        }
    }
    for _ in 0..UNIFORM_CANDIDATES {
        out.insert(uniform_point(space, rng));
    }
    out.retain(|p| !evaluated.contains(p));
    out
}

fn fallback(
    space: &HyperparameterSpace,
    evaluated: &BTreeSet<GridPoint>,
    rng: &mut ChaCha8Rng,
) -> Proposal {
    if evaluated.len() as u128 >= space.size() {
        return Proposal::Exhausted;
    }
    for _ in 0..FALLBACK_DRAWS {
        let p = uniform_point(space, rng);
        if !evaluated.contains(&p) {
            return Proposal::Point(p);
        }
    }
    if space.size() <= ENUMERATION_LIMIT {
        let free: Vec<GridPoint> = (0..space.size())
            .map(|r| space.nth(r))
            .filter(|p| !evaluated.contains(p))
            .collect();
        if !free.is_empty() {
            return Proposal::Point(free[rng.gen_range(0..free.len())]);
        }
    }
    Proposal::Exhausted
}

/// Uniformly random unevaluated grid point, used when no surrogate is available.
pub fn random_unevaluated(
    space: &HyperparameterSpace,
    evaluated: &[GridPoint],
    seed: u64,
) -> Proposal {
    let set: BTreeSet<GridPoint> = evaluated.iter().copied().collect();
    fallback(space, &set, &mut ChaCha8Rng::seed_from_u64(seed))
}

/// Solves the auxiliary problem: returns the unevaluated candidate with the
/// lowest weighted score, ties broken by lowest grid point.
pub fn propose_next(
    state: &SurrogateState,
    space: &HyperparameterSpace,
    iteration: usize,
    seed: u64,
) -> Proposal {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let candidates = generate_candidates(state, space, &mut rng);
    if candidates.is_empty() {
        let evaluated = state.points.iter().copied().collect();
        return fallback(space, &evaluated, &mut rng);
    }
    let scored = score_candidates(state, space, &candidates, weight_for_iteration(iteration));
    let mut best = &scored[0];
    for c in &scored[1..] {
        if c.score < best.score {
            best = c;
        }
    }
    Proposal::Point(best.point)
}

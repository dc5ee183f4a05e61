use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use super::{CirTransition, PathEnsemble, Scheme, SimConfig};
use crate::error::{BridgeError, Result};
use crate::model::BridgeModel;
use crate::moments::mean_closed;

/// Frozen coefficients of one step.
#[derive(Debug, Clone, Copy)]
struct FrozenStep {
    reversion: f64,
    diffusion: f64,
    dt: f64,
    exact: CirTransition,
}

/// Coefficients for steps `0..n_steps - 1`; the last step is pinned.
fn frozen_steps(model: &BridgeModel, n_steps: usize) -> Result<Vec<FrozenStep>> {
    let horizon = model.horizon();
    let dt = horizon / n_steps as f64;
    (0..n_steps - 1)
        .map(|k| {
            let t = k as f64 * dt;
            let remaining = horizon - t;
            let sigma = model.sigma_at(t, mean_closed(t, model))?;
            let reversion = model.r() / remaining;
            let diffusion = sigma * (model.r() / remaining.powf(model.alpha())).sqrt();
            Ok(FrozenStep {
                reversion,
                diffusion,
                dt,
                exact: CirTransition::new(model.a(), reversion, diffusion, dt)?,
            })
        })
        .collect()
}

fn path_rng(master_seed: u64, path: usize, component: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(((component as u64) << 40) | path as u64);
    rng
}

/// Runs one (sub-)path with source `source` and adds recorded values to `row`.
fn accumulate_path(
    steps: &[FrozenStep],
    source: f64,
    weight: f64,
    scheme: Scheme,
    stride: usize,
    rng: &mut ChaCha8Rng,
    row: &mut [f64],
) {
    // for the Euler scheme `x` is the unclamped internal state
    let mut x = 0.0_f64;
    for (k, step) in steps.iter().enumerate() {
        x = match scheme {
            Scheme::FrozenExact => {
                if weight == 1.0 {
                    step.exact.sample(x, rng)
                } else {
                    step.exact.with_source_weight(weight).sample(x, rng)
                }
            }
            Scheme::TruncatedEuler => {
                let z: f64 = StandardNormal.sample(rng);
                let xp = x.max(0.0);
                let drift = (source - step.reversion * xp) * step.dt;
                x + drift + step.diffusion * (xp * step.dt).sqrt() * z
            }
        };
        let done = k + 1;
        if done % stride == 0 {
            row[done / stride] += x.max(0.0);
        }
    }
    // the terminal column stays at its pinned zero
}

fn recorded_grid(model: &BridgeModel, config: &SimConfig) -> Vec<f64> {
    let horizon = model.horizon();
    let n = config.n_steps;
    (0..config.n_recorded())
        .map(|j| {
            let k = j * config.record_stride;
            if k == n {
                horizon
            } else {
                horizon * k as f64 / n as f64
            }
        })
        .collect()
}

fn run(
    model: &BridgeModel,
    config: &SimConfig,
    weights: &[f64],
) -> Result<PathEnsemble> {
    config.validate()?;
    let steps = frozen_steps(model, config.n_steps)?;
    let grid = recorded_grid(model, config);
    let n_cols = grid.len();
    let mut values = vec![0.0; config.n_paths * n_cols];

    values
        .par_chunks_mut(n_cols)
        .enumerate()
        .for_each(|(p, row)| {
            for (i, &w) in weights.iter().enumerate() {
                let mut rng = path_rng(config.master_seed, p, i);
                accumulate_path(
                    &steps,
                    w * model.a(),
                    w,
                    config.scheme,
                    config.record_stride,
                    &mut rng,
                    row,
                );
            }
            row[n_cols - 1] = 0.0;
        });

    Ok(PathEnsemble {
        grid,
        values,
        n_paths: config.n_paths,
        model: *model,
        config: *config,
    })
}

/// Simulates `config.n_paths` bridge paths.
///
/// The model is not required to satisfy the well-posedness condition, so
/// blow-up studies can run; the terminal value is pinned regardless.
pub fn simulate_ensemble(model: &BridgeModel, config: &SimConfig) -> Result<PathEnsemble> {
    run(model, config, &[1.0])
}

/// Simulates each path as the sum of `n` independent sub-bridges whose
/// sources are `weight_i * a` (uniform weights when `source_weights` is
/// `None`). Every sub-bridge keeps the mean-field volatility of the full
/// model.
pub fn simulate_superposition(
    model: &BridgeModel,
    n: usize,
    source_weights: Option<&[f64]>,
    config: &SimConfig,
) -> Result<PathEnsemble> {
    if n == 0 {
        return Err(BridgeError::Config("need at least one sub-process".into()));
    }
    let weights: Vec<f64> = match source_weights {
        Some(w) => {
            if w.len() != n {
                return Err(BridgeError::Config(format!(
                    "{} weights given for {n} sub-processes",
                    w.len()
                )));
            }
            if w.iter().any(|&x| !(x >= 0.0) || !x.is_finite()) {
                return Err(BridgeError::Config("weights must be finite and >= 0".into()));
            }
            w.to_vec()
        }
        None => vec![1.0 / n as f64; n],
    };
    let sum: f64 = weights.iter().sum();
    if (sum - 1.0).abs() > 1e-12 {
        return Err(BridgeError::WeightSum { sum });
    }
    run(model, config, &weights)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    fn small(seed: u64) -> SimConfig {
        SimConfig {
            n_steps: 200,
            n_paths: 500,
            master_seed: seed,
            scheme: Scheme::FrozenExact,
            record_stride: 10,
        }
    }

    #[test]
    fn zero_source_stays_at_zero() {
        let m = BridgeModel::new(0.0, 0.7, 1.0, -10.0, 0.5).unwrap();
        let e = simulate_ensemble(&m, &small(1)).unwrap();
        assert!(e.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn pinned_and_nonnegative() {
        for m in [
            fixtures::mean_field_2023_2025(),
            fixtures::mean_field_2023_2025().with_alpha(2.0).unwrap(),
        ] {
            for scheme in [Scheme::FrozenExact, Scheme::TruncatedEuler] {
                let cfg = SimConfig { scheme, ..small(3) };
                let e = simulate_ensemble(&m, &cfg).unwrap();
                assert!(e.values.iter().all(|&v| v >= 0.0));
                assert!(e.paths().all(|p| p[0] == 0.0 && p[p.len() - 1] == 0.0));
                assert_eq!(e.grid.len(), 21);
                assert_eq!(e.grid[20], 1.0);
            }
        }
    }

    #[test]
    fn deterministic_for_a_seed() {
        let m = fixtures::mean_field_2023_2025();
        let a = simulate_ensemble(&m, &small(9)).unwrap();
        let b = simulate_ensemble(&m, &small(9)).unwrap();
        assert_eq!(a.values, b.values);
        let c = simulate_ensemble(&m, &small(10)).unwrap();
        assert_ne!(a.values, c.values);
    }

    #[test]
    fn thread_count_does_not_change_results() {
        let m = fixtures::mean_field_2023_2025();
        let cfg = small(11);
        let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let four = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
        let a = one.install(|| simulate_ensemble(&m, &cfg).unwrap());
        let b = four.install(|| simulate_ensemble(&m, &cfg).unwrap());
        assert_eq!(a.values, b.values);
    }

    #[test]
    fn single_term_superposition_is_bit_identical() {
        let m = fixtures::mean_field_2023_2025();
        let cfg = small(5);
        let a = simulate_ensemble(&m, &cfg).unwrap();
        let b = simulate_superposition(&m, 1, None, &cfg).unwrap();
        assert_eq!(a.values, b.values);
    }

    #[test]
    fn weights_must_sum_to_one() {
        let m = fixtures::mean_field_2023_2025();
        let err = simulate_superposition(&m, 2, Some(&[0.3, 0.6]), &small(1)).unwrap_err();
        assert!(matches!(err, BridgeError::WeightSum { .. }));
        assert!(simulate_superposition(&m, 2, Some(&[0.3]), &small(1)).is_err());
    }

    #[test]
    fn config_validation() {
        let m = fixtures::mean_field_2023_2025();
        let bad = SimConfig { record_stride: 7, ..small(1) };
        assert!(simulate_ensemble(&m, &bad).is_err());
        let bad = SimConfig { n_steps: 1, record_stride: 1, ..small(1) };
        assert!(simulate_ensemble(&m, &bad).is_err());
    }

    #[test]
    fn volatility_domain_error_propagates() {
        // mu^2 + omega * mean < 0 near the mean peak
        let m = BridgeModel::new(0.5, 0.7, 0.5, -100.0, 0.5).unwrap();
        assert!(matches!(
            simulate_ensemble(&m, &small(1)),
            Err(BridgeError::VolatilityDomain { .. })
        ));
    }
}

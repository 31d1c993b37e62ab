use rayon::prelude::*;
use serde::Serialize;

use super::{chunks, ExperimentConfig, Scheme, Stepper};
use crate::error::{Error, Result};
use crate::rng::RngStream;
use crate::theory::expected_one_shot_rd;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OneShotReport {
    pub trials: u64,
    pub correct: u64,
    /// Fraction of trials whose decision matched the latent coin.
    pub rd: f64,
    /// Binomial standard error of `rd`.
    pub stderr: f64,
    /// Exact expected rate over the partition law, when it can be enumerated
    /// (CC only).
    pub theory: Option<f64>,
}

/// Fair coin, fresh partition and side information, one token, then the
/// match test, repeated `config.trials` times.
pub fn run_one_shot(config: &ExperimentConfig) -> Result<OneShotReport> {
    let q = config.validate()?;
    let correct = chunks(config.trials)
        .map(|(chunk, len)| -> Result<u64> {
            let mut rng = RngStream::new(config.seed, chunk);
            let mut stepper = Stepper::new(&q, config.k, config.partition_strategy, config.scheme);
            let mut correct = 0;
            for _ in 0..len {
                let coin = rng.bernoulli(0.5);
                let step = stepper.step(&mut rng, coin)?;
                correct += u64::from(step == coin);
            }
            Ok(correct)
        })
        .try_reduce(|| 0, |a, b| Ok(a + b))?;
    let rd = correct as f64 / config.trials as f64;
    let theory = match config.scheme {
        Scheme::Cc => match expected_one_shot_rd(&q, config.k, config.partition_strategy) {
            Ok(v) => Some(v),
            Err(Error::TooLarge(_)) => None,
            Err(e) => return Err(e),
        },
        Scheme::RedGreen { .. } => None,
    };
    Ok(OneShotReport {
        trials: config.trials,
        correct,
        rd,
        stderr: (rd * (1.0 - rd) / config.trials as f64).sqrt(),
        theory,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::partition::PartitionStrategy;
    use crate::simulator::SourceSpec;

    fn cfg(source: SourceSpec, trials: u64) -> ExperimentConfig {
        ExperimentConfig {
            m: 10,
            k: 2,
            source,
            partition_strategy: PartitionStrategy::Balanced,
            scheme: Scheme::Cc,
            n: 1,
            trials,
            seed: 17,
        }
    }

    #[test]
    fn point_mass_is_coin_flip() {
        let r = run_one_shot(&cfg(
            SourceSpec::Explicit {
                probs: [1.0].into_iter().chain([0.0; 9]).collect(),
            },
            100_000,
        ))
        .unwrap();
        assert!((r.rd - 0.5).abs() < 4.0 * r.stderr, "{r:?}");
        assert_eq!(r.theory, Some(0.5));
    }

    #[test]
    fn deterministic() {
        let c = cfg(SourceSpec::Uniform, 20_000);
        assert_eq!(run_one_shot(&c).unwrap(), run_one_shot(&c).unwrap());
    }
}

use std::sync::Arc;

use rand_distr::{Distribution, Poisson};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::measures::{AtomicMeasure, Configuration, Label};

use super::rng::{Channel, CounterRng};

/// How a configuration is drawn from an atomic measure `ν`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Construction {
    /// `⌊w⌋` particles plus one more with probability `w - ⌊w⌋` per atom.
    /// Integer weights give a deterministic configuration.
    Rounded,
    /// A Poisson(`w`) number of particles per atom.
    Poissonized,
}

/// Law of the initial configuration `ξ`. In every case `E <ξ, φ> = <ν, φ>`
/// for the measure `ν` the law represents.
#[derive(Clone, Debug)]
pub enum InitLaw {
    Fixed(Configuration),
    FromMeasure {
        measure: AtomicMeasure,
        construction: Construction,
    },
    /// Replica `r` starts from entry `r`; used to restart from a reached state.
    Empirical(Arc<Vec<Configuration>>),
}

impl InitLaw {
    pub fn from_measure(measure: AtomicMeasure, construction: Construction) -> Self {
        InitLaw::FromMeasure {
            measure: measure.merged(),
            construction,
        }
    }

    pub fn dim(&self) -> Option<usize> {
        match self {
            InitLaw::Fixed(c) => Some(c.dim()),
            InitLaw::FromMeasure { measure, .. } => Some(measure.dim()),
            InitLaw::Empirical(cs) => cs.first().map(Configuration::dim),
        }
    }

    pub(crate) fn validate(&self, dim: usize, replicas: usize) -> Result<()> {
        if let InitLaw::Empirical(cs) = self {
            if cs.len() != replicas {
                return Err(Error::Config(format!(
                    "empirical initial law has {} configurations for {replicas} replicas",
                    cs.len()
                )));
            }
            if cs.iter().any(|c| c.dim() != dim) {
                return Err(Error::Dimension {
                    expected: dim,
                    got: cs.iter().map(Configuration::dim).find(|&d| d != dim).unwrap_or(dim),
                });
            }
            return Ok(());
        }
        match self.dim() {
            Some(d) if d != dim => Err(Error::Dimension { expected: dim, got: d }),
            _ => Ok(()),
        }
    }

    /// Draws the configuration of one replica. Particles get labels
    /// `1, 2, ...` in atom order.
    pub fn sample(&self, seed: u64, replica: usize, step: i64) -> Result<Configuration> {
        match self {
            InitLaw::Fixed(c) => Ok(c.clone()),
            InitLaw::Empirical(cs) => Ok(cs[replica].clone()),
            InitLaw::FromMeasure { measure, construction } => {
                let mut rng = CounterRng::at(seed, replica as u64, &Label::root(), Channel::Init, step);
                let dim = measure.dim();
                let mut labels = Vec::new();
                let mut positions = Vec::new();
                for (x, w) in measure.atoms() {
                    let n = match construction {
                        Construction::Rounded => {
                            let whole = w.floor();
                            whole as u64 + u64::from(rng.uniform() < w - whole)
                        }
                        Construction::Poissonized => {
                            if w > 0.0 {
                                Poisson::new(w)
                                    .map_err(|e| Error::Measure(format!("poisson weight {w}: {e}")))?
                                    .sample(&mut rng) as u64
                            } else {
                                0
                            }
                        }
                    };
                    for _ in 0..n {
                        labels.push(Label::root().child(labels.len() as u32 + 1));
                        positions.extend_from_slice(x);
                    }
                }
                Ok(Configuration::from_sorted_parts(dim, labels, positions))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rounded_integer_weights_are_deterministic() {
        let nu = AtomicMeasure::new(1, vec![(vec![0.0], 2.0), (vec![1.0], 1.0)]).unwrap();
        let law = InitLaw::from_measure(nu, Construction::Rounded);
        for r in 0..10 {
            let c = law.sample(3, r, 0).unwrap();
            assert_eq!(c.len(), 3);
            assert_eq!(c.labels()[2], Label::from_path(&[3]).unwrap());
        }
    }

    #[test]
    fn both_constructions_are_unbiased() {
        let nu = AtomicMeasure::new(1, vec![(vec![0.0], 0.7), (vec![2.0], 1.4)]).unwrap();
        for construction in [Construction::Rounded, Construction::Poissonized] {
            let law = InitLaw::from_measure(nu.clone(), construction);
            let n = 40_000;
            let (mut mass, mut first) = (0.0, 0.0);
            for r in 0..n {
                let c = law.sample(11, r, 0).unwrap();
                mass += c.len() as f64;
                first += c.sum(|x| x[0]);
            }
            assert!((mass / n as f64 - 2.1).abs() < 0.03, "{construction:?}");
            assert!((first / n as f64 - 2.8).abs() < 0.05, "{construction:?}");
        }
    }
}

use std::cmp::Ordering;

use crate::error::{Error, Result};
use crate::measures::{AtomicMeasure, Label};

/// A point of E: finitely many particles, each a (label, position) pair,
/// with labels forming an antichain for the prefix order.
///
/// Particles are kept sorted by label. Positions are stored flat.
#[derive(Clone, Debug, PartialEq)]
pub struct Configuration {
    dim: usize,
    labels: Vec<Label>,
    positions: Vec<f64>,
}

impl Configuration {
    /// The null configuration.
    pub fn empty(dim: usize) -> Self {
        Self {
            dim,
            labels: Vec::new(),
            positions: Vec::new(),
        }
    }

    pub fn new(dim: usize, particles: Vec<(Label, Vec<f64>)>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Configuration("dimension must be positive".into()));
        }
        let mut particles = particles;
        particles.sort_by(|a, b| a.0.cmp(&b.0));
        let mut labels = Vec::with_capacity(particles.len());
        let mut positions = Vec::with_capacity(particles.len() * dim);
        for (label, x) in particles {
            if x.len() != dim {
                return Err(Error::Dimension {
                    expected: dim,
                    got: x.len(),
                });
            }
            if x.iter().any(|v| !v.is_finite()) {
                return Err(Error::Configuration(format!("particle {label} has a non-finite position")));
            }
            labels.push(label);
            positions.extend_from_slice(&x);
        }
        check_antichain(&labels)?;
        Ok(Self {
            dim,
            labels,
            positions,
        })
    }

    /// One particle at the root label.
    pub fn single(position: Vec<f64>) -> Result<Self> {
        let dim = position.len();
        Self::new(dim, vec![(Label::root(), position)])
    }

    /// Particles labelled `1, 2, ..., n` in the given order.
    pub fn from_positions(dim: usize, positions: Vec<Vec<f64>>) -> Result<Self> {
        let particles = positions
            .into_iter()
            .enumerate()
            .map(|(i, x)| (Label::root().child(i as u32 + 1), x))
            .collect();
        Self::new(dim, particles)
    }

    /// Assembles a configuration from label-sorted parts produced by the
    /// simulator; the antichain property is checked in debug builds only.
    pub(crate) fn from_sorted_parts(dim: usize, labels: Vec<Label>, positions: Vec<f64>) -> Self {
        debug_assert_eq!(labels.len() * dim, positions.len());
        debug_assert!(check_antichain(&labels).is_ok());
        Self {
            dim,
            labels,
            positions,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[Label] {
        &self.labels
    }

    pub fn position(&self, i: usize) -> &[f64] {
        &self.positions[i * self.dim..(i + 1) * self.dim]
    }

    pub fn positions_flat(&self) -> &[f64] {
        &self.positions
    }

    pub fn particles(&self) -> impl ExactSizeIterator<Item = (&Label, &[f64])> + '_ {
        self.labels.iter().zip(self.positions.chunks_exact(self.dim))
    }

    pub fn get(&self, label: &Label) -> Option<&[f64]> {
        self.labels
            .binary_search(label)
            .ok()
            .map(|i| self.position(i))
    }

    /// Spatial marginal: one unit atom per particle, labels forgotten.
    pub fn to_measure(&self) -> AtomicMeasure {
        AtomicMeasure::from_parts_unchecked(self.dim, self.positions.clone(), vec![1.0; self.len()])
    }

    /// `<Z, phi>` summed over particles.
    pub fn sum<F>(&self, phi: F) -> f64
    where
        F: Fn(&[f64]) -> f64,
    {
        self.positions.chunks_exact(self.dim).map(phi).sum()
    }

    pub fn with_positions(&self, positions: Vec<f64>) -> Result<Self> {
        if positions.len() != self.positions.len() {
            return Err(Error::Configuration("position vector length changed".into()));
        }
        Ok(Self {
            dim: self.dim,
            labels: self.labels.clone(),
            positions,
        })
    }
}

fn check_antichain(labels: &[Label]) -> Result<()> {
    // In sorted order any comparable pair forces a comparable adjacent pair.
    for w in labels.windows(2) {
        if w[0] == w[1] {
            return Err(Error::Configuration(format!("duplicate label {}", w[0])));
        }
        if w[0].precedes(&w[1]) {
            return Err(Error::Configuration(format!(
                "labels {} and {} are comparable",
                w[0], w[1]
            )));
        }
    }
    Ok(())
}

/// `d_E(e1, e2) = Σ_{k ∈ K1∩K2} (|x^k - y^k| ∧ 1) + #(K1 △ K2)`.
pub fn config_distance(a: &Configuration, b: &Configuration) -> Result<f64> {
    if a.dim != b.dim {
        return Err(Error::Dimension {
            expected: a.dim,
            got: b.dim,
        });
    }
    let (mut i, mut j) = (0, 0);
    let mut common = 0.0;
    let mut unmatched = 0usize;
    while i < a.len() && j < b.len() {
        match a.labels[i].cmp(&b.labels[j]) {
            Ordering::Less => {
                unmatched += 1;
                i += 1;
            }
            Ordering::Greater => {
                unmatched += 1;
                j += 1;
            }
            Ordering::Equal => {
                common += euclid(a.position(i), b.position(j)).min(1.0);
                i += 1;
                j += 1;
            }
        }
    }
    unmatched += (a.len() - i) + (b.len() - j);
    Ok(common + unmatched as f64)
}

pub(crate) fn euclid(x: &[f64], y: &[f64]) -> f64 {
    x.iter()
        .zip(y)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lab(p: &[u32]) -> Label {
        Label::from_path(p).unwrap()
    }

    #[test]
    fn antichain_is_enforced() {
        let bad = Configuration::new(1, vec![(lab(&[1]), vec![0.0]), (lab(&[1, 2]), vec![1.0])]);
        assert!(bad.is_err());
        let dup = Configuration::new(1, vec![(lab(&[1]), vec![0.0]), (lab(&[1]), vec![1.0])]);
        assert!(dup.is_err());
        let root_and_child = Configuration::new(1, vec![(Label::root(), vec![0.0]), (lab(&[4]), vec![1.0])]);
        assert!(root_and_child.is_err());
        let ok = Configuration::new(1, vec![(lab(&[2]), vec![0.0]), (lab(&[1, 5]), vec![1.0])]).unwrap();
        assert_eq!(ok.labels()[0], lab(&[1, 5]));
    }

    #[test]
    fn to_measure_cases() {
        assert_eq!(Configuration::empty(1).to_measure().mass(), 0.0);
        let one = Configuration::single(vec![0.5]).unwrap().to_measure();
        assert_eq!((one.len(), one.position(0), one.weight(0)), (1, &[0.5][..], 1.0));
        let two = Configuration::new(1, vec![(lab(&[1]), vec![0.0]), (lab(&[2]), vec![0.0])])
            .unwrap()
            .to_measure();
        let merged = AtomicMeasure::dirac(vec![0.0], 2.0).unwrap();
        let phi = |x: &[f64]| x[0].cos() + 3.0;
        assert_eq!(two.integrate(phi), merged.integrate(phi));
        assert_eq!(two.mass(), 2.0);
    }

    #[test]
    fn distance_examples() {
        let e = Configuration::from_positions(1, vec![vec![0.3], vec![-1.0]]).unwrap();
        assert_eq!(config_distance(&e, &e).unwrap(), 0.0);
        let a = Configuration::single(vec![0.0]).unwrap();
        let b = Configuration::single(vec![0.5]).unwrap();
        assert_eq!(config_distance(&a, &b).unwrap(), 0.5);
        let c = Configuration::new(1, vec![(lab(&[1]), vec![0.0])]).unwrap();
        assert_eq!(config_distance(&a, &c).unwrap(), 2.0);
        let far = Configuration::single(vec![7.0]).unwrap();
        assert_eq!(config_distance(&a, &far).unwrap(), 1.0);
    }

    #[test]
    fn distance_rejects_dimension_mismatch() {
        let a = Configuration::single(vec![0.0]).unwrap();
        let b = Configuration::single(vec![0.0, 1.0]).unwrap();
        assert!(config_distance(&a, &b).is_err());
    }
}

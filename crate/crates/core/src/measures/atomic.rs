use std::cmp::Ordering;

use crate::error::{Error, Result};

/// A finite nonnegative measure on R^d written as a weighted sum of Dirac atoms.
///
/// Positions are stored flat (`len * dim` coordinates). Total mass and the
/// first and second moments are cached at construction, so coefficient
/// families that only look at `m(R^d)`, `<m, x>` or `<m, |x|^2>` never walk
/// the atoms.
#[derive(Clone, Debug, PartialEq)]
pub struct AtomicMeasure {
    dim: usize,
    positions: Vec<f64>,
    weights: Vec<f64>,
    mass: f64,
    first: Vec<f64>,
    second: f64,
}

impl AtomicMeasure {
    pub fn zero(dim: usize) -> Self {
        Self {
            dim,
            positions: Vec::new(),
            weights: Vec::new(),
            mass: 0.0,
            first: vec![0.0; dim],
            second: 0.0,
        }
    }

    pub fn new(dim: usize, atoms: Vec<(Vec<f64>, f64)>) -> Result<Self> {
        let mut positions = Vec::with_capacity(atoms.len() * dim);
        let mut weights = Vec::with_capacity(atoms.len());
        for (x, w) in atoms {
            if x.len() != dim {
                return Err(Error::Dimension {
                    expected: dim,
                    got: x.len(),
                });
            }
            positions.extend_from_slice(&x);
            weights.push(w);
        }
        Self::from_flat(dim, positions, weights)
    }

    pub fn from_flat(dim: usize, positions: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Measure("dimension must be positive".into()));
        }
        if positions.len() != weights.len() * dim {
            return Err(Error::Measure(format!(
                "{} coordinates for {} atoms in dimension {}",
                positions.len(),
                weights.len(),
                dim
            )));
        }
        if let Some(w) = weights.iter().find(|w| !w.is_finite() || **w < 0.0) {
            return Err(Error::Measure(format!("weight {w} is not a finite nonnegative number")));
        }
        if positions.iter().any(|x| !x.is_finite()) {
            return Err(Error::Measure("non-finite atom position".into()));
        }
        Ok(Self::from_parts_unchecked(dim, positions, weights))
    }

    pub(crate) fn from_parts_unchecked(dim: usize, positions: Vec<f64>, weights: Vec<f64>) -> Self {
        let mut mass = 0.0;
        let mut first = vec![0.0; dim];
        let mut second = 0.0;
        for (x, &w) in positions.chunks_exact(dim).zip(&weights) {
            mass += w;
            let mut sq = 0.0;
            for (f, xi) in first.iter_mut().zip(x) {
                *f += w * xi;
                sq += xi * xi;
            }
            second += w * sq;
        }
        Self {
            dim,
            positions,
            weights,
            mass,
            first,
            second,
        }
    }

    pub fn dirac(position: Vec<f64>, weight: f64) -> Result<Self> {
        let dim = position.len();
        Self::new(dim, vec![(position, weight)])
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn atoms(&self) -> impl ExactSizeIterator<Item = (&[f64], f64)> + '_ {
        self.positions
            .chunks_exact(self.dim)
            .zip(self.weights.iter().copied())
    }

    pub fn position(&self, i: usize) -> &[f64] {
        &self.positions[i * self.dim..(i + 1) * self.dim]
    }

    pub fn weight(&self, i: usize) -> f64 {
        self.weights[i]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn positions_flat(&self) -> &[f64] {
        &self.positions
    }

    pub fn mass(&self) -> f64 {
        self.mass
    }

    /// `<m, x>` as a vector in R^d.
    pub fn first_moment(&self) -> &[f64] {
        &self.first
    }

    /// `<m, |x|^2>`.
    pub fn second_moment(&self) -> f64 {
        self.second
    }

    /// `<m, phi>`, exact on atoms.
    pub fn integrate<F>(&self, phi: F) -> f64
    where
        F: Fn(&[f64]) -> f64,
    {
        self.atoms().map(|(x, w)| w * phi(x)).sum()
    }

    /// Drops zero-weight atoms.
    pub fn normalized(&self) -> Self {
        let mut positions = Vec::with_capacity(self.positions.len());
        let mut weights = Vec::with_capacity(self.weights.len());
        for (x, w) in self.atoms() {
            if w > 0.0 {
                positions.extend_from_slice(x);
                weights.push(w);
            }
        }
        Self::from_parts_unchecked(self.dim, positions, weights)
    }

    /// Merges atoms at bitwise-equal positions and drops zero weights.
    /// Atoms come out sorted lexicographically by position.
    pub fn merged(&self) -> Self {
        let mut order: Vec<usize> = (0..self.len()).collect();
        order.sort_by(|&a, &b| cmp_points(self.position(a), self.position(b)));
        let mut positions: Vec<f64> = Vec::with_capacity(self.positions.len());
        let mut weights: Vec<f64> = Vec::with_capacity(self.weights.len());
        for i in order {
            let x = self.position(i);
            let w = self.weights[i];
            let n = weights.len();
            if n > 0 && cmp_points(&positions[(n - 1) * self.dim..], x) == Ordering::Equal {
                weights[n - 1] += w;
            } else {
                positions.extend_from_slice(x);
                weights.push(w);
            }
        }
        Self::from_parts_unchecked(self.dim, positions, weights).normalized()
    }

    /// Sum of two measures (atoms concatenated).
    pub fn plus(&self, other: &AtomicMeasure) -> Result<Self> {
        check_dims(self, other)?;
        let mut positions = self.positions.clone();
        positions.extend_from_slice(&other.positions);
        let mut weights = self.weights.clone();
        weights.extend_from_slice(&other.weights);
        Ok(Self::from_parts_unchecked(self.dim, positions, weights))
    }

    pub fn scaled(&self, factor: f64) -> Result<Self> {
        if !factor.is_finite() || factor < 0.0 {
            return Err(Error::Measure(format!("scale factor {factor} must be finite and nonnegative")));
        }
        let weights = self.weights.iter().map(|w| w * factor).collect();
        Ok(Self::from_parts_unchecked(self.dim, self.positions.clone(), weights))
    }
}

pub(crate) fn cmp_points(a: &[f64], b: &[f64]) -> Ordering {
    for (x, y) in a.iter().zip(b) {
        match x.total_cmp(y) {
            Ordering::Equal => continue,
            other => return other,
        }
    }
    Ordering::Equal
}

pub(crate) fn check_dims(a: &AtomicMeasure, b: &AtomicMeasure) -> Result<()> {
    if a.dim() != b.dim() {
        return Err(Error::Dimension {
            expected: a.dim(),
            got: b.dim(),
        });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m1(atoms: &[(f64, f64)]) -> AtomicMeasure {
        AtomicMeasure::new(1, atoms.iter().map(|&(x, w)| (vec![x], w)).collect()).unwrap()
    }

    #[test]
    fn integrate_constant_gives_mass() {
        let m = m1(&[(0.5, 1.5), (-2.0, 0.25)]);
        assert_eq!(m.integrate(|_| 1.0), m.mass());
        assert_eq!(m.mass(), 1.75);
    }

    #[test]
    fn integrate_square_at_origin_vanishes() {
        let m = m1(&[(0.0, 2.0)]);
        assert_eq!(m.integrate(|x| x[0] * x[0]), 0.0);
    }

    #[test]
    fn integrate_identity_on_two_atoms() {
        let m = m1(&[(1.0, 0.5), (3.0, 0.5)]);
        assert_eq!(m.integrate(|x| x[0]), 2.0);
        assert_eq!(m.first_moment(), &[2.0]);
        assert_eq!(m.second_moment(), 5.0);
    }

    #[test]
    fn rejects_negative_weight_and_bad_dimension() {
        assert!(AtomicMeasure::new(1, vec![(vec![0.0], -1.0)]).is_err());
        assert!(matches!(
            AtomicMeasure::new(2, vec![(vec![0.0], 1.0)]),
            Err(Error::Dimension { .. })
        ));
        assert!(AtomicMeasure::new(1, vec![(vec![f64::NAN], 1.0)]).is_err());
    }

    #[test]
    fn merge_and_normalize() {
        let m = m1(&[(1.0, 0.5), (0.0, 0.0), (1.0, 0.25), (-1.0, 1.0)]);
        let n = m.normalized();
        assert_eq!(n.len(), 3);
        let g = m.merged();
        assert_eq!(g.len(), 2);
        assert_eq!(g.position(0), &[-1.0]);
        assert_eq!(g.weight(1), 0.75);
        let phi = |x: &[f64]| (x[0] * 3.0).sin() + x[0] * x[0];
        assert!((m.integrate(phi) - g.integrate(phi)).abs() < 1e-15);
    }
}

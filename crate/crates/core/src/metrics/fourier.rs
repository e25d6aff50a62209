//! Weighted Fourier energy `∫ |Σ_j c_j e^{i n·z_j}|^2 (1+|n|^2)^{-λ} dn` of a
//! signed atomic measure, by closed form (d = 1) or tensor trapezoid grid.

use std::f64::consts::PI;

/// A signed atomic measure: `m1 - m2` flattened into coefficients.
#[derive(Clone, Debug)]
pub(crate) struct SignedAtoms {
    pub dim: usize,
    pub positions: Vec<f64>,
    pub coeffs: Vec<f64>,
}

impl SignedAtoms {
    /// `m1 - m2` with atoms at equal positions combined. Each side's weights
    /// are summed in sorted order, so equal multisets cancel exactly.
    pub fn difference(m1: &crate::measures::AtomicMeasure, m2: &crate::measures::AtomicMeasure) -> Self {
        let dim = m1.dim();
        let mut all: Vec<(&[f64], f64)> = m1.atoms().chain(m2.atoms().map(|(x, w)| (x, -w))).collect();
        all.sort_by(|a, b| crate::measures::cmp_points(a.0, b.0).then(a.1.total_cmp(&b.1)));
        let mut positions = Vec::new();
        let mut coeffs = Vec::new();
        let mut i = 0;
        while i < all.len() {
            let mut j = i;
            while j < all.len() && all[j].0 == all[i].0 {
                j += 1;
            }
            let group = &all[i..j];
            let plus: f64 = group.iter().filter(|a| a.1 > 0.0).map(|a| a.1).sum();
            let minus: f64 = group.iter().filter(|a| a.1 < 0.0).rev().map(|a| -a.1).sum();
            if plus != minus {
                positions.extend_from_slice(all[i].0);
                coeffs.push(plus - minus);
            }
            i = j;
        }
        Self { dim, positions, coeffs }
    }

    pub fn total_variation(&self) -> f64 {
        self.coeffs.iter().map(|c| c.abs()).sum()
    }

    fn point(&self, j: usize) -> &[f64] {
        &self.positions[j * self.dim..(j + 1) * self.dim]
    }
}

/// `∫_R cos(n r) (1+n^2)^{-4} dn = π e^{-|r|} (15 + 15|r| + 6r^2 + |r|^3) / 48`,
/// the Matérn-7/2 correlation up to normalisation.
pub fn matern_kernel_d1(r: f64) -> f64 {
    let a = r.abs();
    PI * (-a).exp() * (15.0 + a * (15.0 + a * (6.0 + a))) / 48.0
}

/// Closed-form energy in d = 1 with λ = 4.
pub(crate) fn energy_closed_form_d1(s: &SignedAtoms) -> f64 {
    debug_assert_eq!(s.dim, 1);
    let n = s.coeffs.len();
    let mut acc = 0.0;
    for i in 0..n {
        acc += s.coeffs[i] * s.coeffs[i] * matern_kernel_d1(0.0);
        for j in (i + 1)..n {
            acc += 2.0 * s.coeffs[i] * s.coeffs[j] * matern_kernel_d1(s.positions[i] - s.positions[j]);
        }
    }
    acc.max(0.0)
}

/// Tensor trapezoid rule on `[-R, R]^d` with `nodes` points per axis,
/// applied to `weight(n) * g(n)`.
pub(crate) fn trapezoid_grid<F>(dim: usize, radius: f64, nodes: usize, mut integrand: F) -> f64
where
    F: FnMut(&[f64]) -> f64,
{
    let h = 2.0 * radius / (nodes - 1) as f64;
    let mut idx = vec![0usize; dim];
    let mut n = vec![0.0; dim];
    let mut total = 0.0;
    loop {
        let mut w = 1.0;
        for (k, &i) in idx.iter().enumerate() {
            n[k] = -radius + i as f64 * h;
            if i == 0 || i == nodes - 1 {
                w *= 0.5;
            }
        }
        total += w * integrand(&n);
        // odometer increment
        let mut k = 0;
        loop {
            if k == dim {
                return total * h.powi(dim as i32);
            }
            idx[k] += 1;
            if idx[k] < nodes {
                break;
            }
            idx[k] = 0;
            k += 1;
        }
    }
}

pub(crate) fn sobolev_weight(n: &[f64], lambda: u32) -> f64 {
    let sq: f64 = n.iter().map(|v| v * v).sum();
    (1.0 + sq).powi(-(lambda as i32))
}

pub(crate) fn energy_grid(s: &SignedAtoms, lambda: u32, radius: f64, nodes: usize) -> f64 {
    let count = s.coeffs.len();
    trapezoid_grid(s.dim, radius, nodes, |n| {
        let (mut re, mut im) = (0.0, 0.0);
        for j in 0..count {
            let phase: f64 = n.iter().zip(s.point(j)).map(|(a, b)| a * b).sum();
            let (sn, cs) = phase.sin_cos();
            re += s.coeffs[j] * cs;
            im += s.coeffs[j] * sn;
        }
        (re * re + im * im) * sobolev_weight(n, lambda)
    })
}

/// Surface area of the unit sphere in R^d.
pub(crate) fn sphere_area(dim: usize) -> f64 {
    // S_{d-1} = 2 π^{d/2} / Γ(d/2)
    let d = dim as f64;
    2.0 * PI.powf(d / 2.0) / gamma_half_integer(dim)
}

/// Γ(d/2) for a positive integer d.
fn gamma_half_integer(dim: usize) -> f64 {
    if dim % 2 == 0 {
        (1..dim / 2).map(|k| k as f64).product()
    } else {
        // Γ(k + 1/2) = √π (2k)! / (4^k k!)
        let k = (dim - 1) / 2;
        let mut g = PI.sqrt();
        for j in 0..k {
            g *= j as f64 + 0.5;
        }
        g
    }
}

/// `∫_{|n|>R} |n|^{p} dn` for `p < -d`.
pub(crate) fn power_tail(dim: usize, power: f64, radius: f64) -> f64 {
    let d = dim as f64;
    debug_assert!(power + d < 0.0);
    sphere_area(dim) * radius.powf(power + d) / -(power + d)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sphere_areas() {
        assert!((sphere_area(1) - 2.0).abs() < 1e-15);
        assert!((sphere_area(2) - 2.0 * PI).abs() < 1e-14);
        assert!((sphere_area(3) - 4.0 * PI).abs() < 1e-13);
        assert!((sphere_area(4) - 2.0 * PI * PI).abs() < 1e-12);
    }

    #[test]
    fn matern_kernel_matches_quadrature() {
        for r in [0.0, 0.3, 1.0, 2.7, 6.0] {
            let q = trapezoid_grid(1, 60.0, 40_001, |n| (n[0] * r).cos() * sobolev_weight(n, 4));
            assert!((q - matern_kernel_d1(r)).abs() < 1e-10, "r={r}: {q} vs {}", matern_kernel_d1(r));
        }
        assert!((matern_kernel_d1(0.0) - 5.0 * PI / 16.0).abs() < 1e-15);
    }

    #[test]
    fn trapezoid_is_exact_on_separable_gaussian() {
        let v = trapezoid_grid(2, 8.0, 201, |n| (-(n[0] * n[0] + n[1] * n[1])).exp());
        assert!((v - PI).abs() < 1e-10);
    }
}

//! Nelder-Mead simplex search.

use serde::Serialize;

use crate::error::Result;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SimplexOptions {
    pub max_iterations: usize,
    /// Stop once the simplex diameter falls below this.
    pub x_tol: f64,
    /// ... and the spread of the vertex values below this.
    pub f_tol: f64,
}

impl Default for SimplexOptions {
    fn default() -> Self {
        Self {
            max_iterations: 200,
            x_tol: 1e-6,
            f_tol: 1e-10,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SimplexResult {
    pub x: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub diameter: f64,
    /// Spread of the values on the final simplex.
    pub value_spread: f64,
    pub converged: bool,
    /// Best value after each iteration.
    pub trace: Vec<f64>,
}

fn diameter(simplex: &[Vec<f64>]) -> f64 {
    let mut d: f64 = 0.0;
    for i in 0..simplex.len() {
        for j in i + 1..simplex.len() {
            let s: f64 = simplex[i].iter().zip(&simplex[j]).map(|(a, b)| (a - b).powi(2)).sum();
            d = d.max(s.sqrt());
        }
    }
    d
}

/// Minimises `f` from `x0` with initial edge lengths `step`.
pub fn nelder_mead<F>(mut f: F, x0: &[f64], step: &[f64], opts: SimplexOptions) -> Result<SimplexResult>
where
    F: FnMut(&[f64]) -> Result<f64>,
{
    let n = x0.len();
    let mut evaluations = 0usize;
    let mut eval = |x: &[f64], count: &mut usize| -> Result<f64> {
        *count += 1;
        let v = f(x)?;
        Ok(if v.is_nan() { f64::INFINITY } else { v })
    };
    if n == 0 {
        let value = eval(x0, &mut evaluations)?;
        return Ok(SimplexResult {
            x: Vec::new(),
            value,
            iterations: 0,
            evaluations,
            diameter: 0.0,
            value_spread: 0.0,
            converged: true,
            trace: vec![value],
        });
    }
    let mut simplex: Vec<Vec<f64>> = vec![x0.to_vec()];
    for i in 0..n {
        let mut v = x0.to_vec();
        v[i] += step[i];
        simplex.push(v);
    }
    let mut values: Vec<f64> = Vec::with_capacity(n + 1);
    for v in &simplex {
        values.push(eval(v, &mut evaluations)?);
    }
    let mut trace = Vec::new();
    let mut iterations = 0;
    let mut converged = false;
    while iterations < opts.max_iterations {
        // order by value, ties by insertion order for determinism
        let mut order: Vec<usize> = (0..=n).collect();
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)));
        simplex = order.iter().map(|&i| simplex[i].clone()).collect();
        values = order.iter().map(|&i| values[i]).collect();
        trace.push(values[0]);
        let spread = values[n] - values[0];
        if diameter(&simplex) < opts.x_tol && spread.abs() <= opts.f_tol.max(0.0) + f64::EPSILON * values[0].abs() {
            converged = true;
            break;
        }
        iterations += 1;

        let centroid: Vec<f64> = (0..n).map(|j| simplex[..n].iter().map(|v| v[j]).sum::<f64>() / n as f64).collect();
        let along = |t: f64| -> Vec<f64> { (0..n).map(|j| centroid[j] + t * (simplex[n][j] - centroid[j])).collect() };
        let xr = along(-1.0);
        let fr = eval(&xr, &mut evaluations)?;
        if fr < values[0] {
            let xe = along(-2.0);
            let fe = eval(&xe, &mut evaluations)?;
            if fe < fr {
                simplex[n] = xe;
                values[n] = fe;
            } else {
                simplex[n] = xr;
                values[n] = fr;
            }
            continue;
        }
        if fr < values[n - 1] {
            simplex[n] = xr;
            values[n] = fr;
            continue;
        }
        let (xc, fc) = if fr < values[n] {
            let xc = along(-0.5);
            let fc = eval(&xc, &mut evaluations)?;
            (xc, fc)
        } else {
            let xc = along(0.5);
            let fc = eval(&xc, &mut evaluations)?;
            (xc, fc)
        };
        if fc < values[n].min(fr) {
            simplex[n] = xc;
            values[n] = fc;
            continue;
        }
        // shrink towards the best vertex
        for i in 1..=n {
            let v: Vec<f64> = (0..n).map(|j| simplex[0][j] + 0.5 * (simplex[i][j] - simplex[0][j])).collect();
            values[i] = eval(&v, &mut evaluations)?;
            simplex[i] = v;
        }
    }
    let best = (0..=n).min_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b))).unwrap();
    let spread = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - values[best];
    Ok(SimplexResult {
        x: simplex[best].clone(),
        value: values[best],
        iterations,
        evaluations,
        diameter: diameter(&simplex),
        value_spread: spread,
        converged,
        trace,
    })
}

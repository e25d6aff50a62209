//! Exact balanced transportation by successive shortest paths.
//!
//! Dense formulation: every source connects to every sink, arcs are
//! uncapacitated, amounts are real. Dijkstra runs on reduced costs with node
//! potentials, and each augmentation moves the bottleneck of remaining
//! supply, remaining demand and residual reverse flow along the path, so no
//! quantisation of weights takes place.

/// Optimal plan of a balanced transportation problem.
#[derive(Clone, Debug)]
pub struct TransportPlan {
    pub cost: f64,
    /// `(source, sink, amount)` with positive amounts.
    pub flows: Vec<(usize, usize, f64)>,
}

/// Minimises `Σ c_ij f_ij` subject to row sums `supply` and column sums
/// `demand`. `cost(i, j)` must be nonnegative; supply and demand totals must
/// agree up to rounding.
pub fn solve_transport<C>(supply: &[f64], demand: &[f64], cost: C) -> TransportPlan
where
    C: Fn(usize, usize) -> f64,
{
    let n = supply.len();
    let m = demand.len();
    let total: f64 = supply.iter().sum::<f64>().max(demand.iter().sum());
    if n == 0 || m == 0 || total <= 0.0 {
        return TransportPlan {
            cost: 0.0,
            flows: Vec::new(),
        };
    }
    let eps = 1e-13 * total;
    let c: Vec<f64> = (0..n * m).map(|k| cost(k / m, k % m)).collect();
    let mut flow = vec![0.0; n * m];
    let mut rem_s = supply.to_vec();
    let mut rem_d = demand.to_vec();

    // Potentials: sources 0..n, sinks n..n+m. Reduced cost of i->j is
    // c_ij + pi_i - pi_j >= 0 and of j->i is -c_ij + pi_j - pi_i >= 0.
    let mut pi = vec![0.0; n + m];
    for j in 0..m {
        pi[n + j] = (0..n).map(|i| c[i * m + j]).fold(f64::INFINITY, f64::min);
    }

    let mut dist = vec![0.0; n + m];
    let mut prev = vec![usize::MAX; n + m];
    let mut done = vec![false; n + m];
    loop {
        if rem_s.iter().all(|&s| s <= eps) || rem_d.iter().all(|&d| d <= eps) {
            break;
        }
        dist.iter_mut().for_each(|d| *d = f64::INFINITY);
        prev.iter_mut().for_each(|p| *p = usize::MAX);
        done.iter_mut().for_each(|d| *d = false);
        for i in 0..n {
            if rem_s[i] > eps {
                dist[i] = 0.0;
            }
        }
        let mut target = usize::MAX;
        loop {
            let mut u = usize::MAX;
            let mut best = f64::INFINITY;
            for v in 0..n + m {
                if !done[v] && dist[v] < best {
                    best = dist[v];
                    u = v;
                }
            }
            if u == usize::MAX {
                break;
            }
            done[u] = true;
            if u >= n && rem_d[u - n] > eps {
                target = u;
                break;
            }
            if u < n {
                for j in 0..m {
                    let v = n + j;
                    if done[v] {
                        continue;
                    }
                    let rc = (c[u * m + j] + pi[u] - pi[v]).max(0.0);
                    if dist[u] + rc < dist[v] {
                        dist[v] = dist[u] + rc;
                        prev[v] = u;
                    }
                }
            } else {
                let j = u - n;
                for i in 0..n {
                    if done[i] || flow[i * m + j] <= eps {
                        continue;
                    }
                    let rc = (-c[i * m + j] + pi[u] - pi[i]).max(0.0);
                    if dist[u] + rc < dist[i] {
                        dist[i] = dist[u] + rc;
                        prev[i] = u;
                    }
                }
            }
        }
        if target == usize::MAX {
            // Remaining imbalance is rounding noise.
            break;
        }
        let dt = dist[target];
        for v in 0..n + m {
            pi[v] += dist[v].min(dt);
        }
        // Bottleneck along the path.
        let mut amount = rem_d[target - n];
        let mut v = target;
        while prev[v] != usize::MAX {
            let u = prev[v];
            if u >= n {
                // reverse arc sink u -> source v
                amount = amount.min(flow[v * m + (u - n)]);
            }
            v = u;
        }
        amount = amount.min(rem_s[v]);
        let source = v;
        let mut v = target;
        while prev[v] != usize::MAX {
            let u = prev[v];
            if u < n {
                flow[u * m + (v - n)] += amount;
            } else {
                let k = v * m + (u - n);
                flow[k] -= amount;
                if flow[k] < eps {
                    flow[k] = 0.0;
                }
            }
            v = u;
        }
        rem_s[source] -= amount;
        rem_d[target - n] -= amount;
    }

    let mut flows = Vec::new();
    let mut cost_total = 0.0;
    for i in 0..n {
        for j in 0..m {
            let f = flow[i * m + j];
            if f > 0.0 {
                cost_total += f * c[i * m + j];
                flows.push((i, j, f));
            }
        }
    }
    TransportPlan {
        cost: cost_total,
        flows,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn permutations(n: usize) -> Vec<Vec<usize>> {
        if n == 0 {
            return vec![vec![]];
        }
        let mut out = Vec::new();
        for p in permutations(n - 1) {
            for k in 0..=p.len() {
                let mut q = p.clone();
                q.insert(k, n - 1);
                out.push(q);
            }
        }
        out
    }

    #[test]
    fn unit_assignment_matches_brute_force() {
        let xs: [f64; 5] = [0.0, 1.3, 2.2, 5.0, -0.7];
        let ys: [f64; 5] = [0.4, 2.0, -1.0, 4.1, 1.1];
        let cost = |i: usize, j: usize| (xs[i] - ys[j]).abs().min(1.0) + ((xs[i] * ys[j]).sin()).abs();
        let plan = solve_transport(&[1.0; 5], &[1.0; 5], cost);
        let brute = permutations(5)
            .into_iter()
            .map(|p| p.iter().enumerate().map(|(i, &j)| cost(i, j)).sum::<f64>())
            .fold(f64::INFINITY, f64::min);
        assert!((plan.cost - brute).abs() < 1e-12, "{} vs {brute}", plan.cost);
    }

    #[test]
    fn fractional_amounts_conserve_mass() {
        let s = [0.3, 1.2, 0.5];
        let d = [0.9, 0.6, 0.5];
        let plan = solve_transport(&s, &d, |i, j| ((i as f64) - (j as f64)).abs());
        let mut rows = [0.0; 3];
        let mut cols = [0.0; 3];
        for &(i, j, f) in &plan.flows {
            rows[i] += f;
            cols[j] += f;
        }
        for k in 0..3 {
            assert!((rows[k] - s[k]).abs() < 1e-12);
            assert!((cols[k] - d[k]).abs() < 1e-12);
        }
        // only the 0.6 surplus of source 1 has to move one step
        assert!((plan.cost - 0.6).abs() < 1e-12);
    }

    #[test]
    fn empty_instances_cost_nothing() {
        assert_eq!(solve_transport(&[], &[1.0], |_, _| 1.0).cost, 0.0);
    }
}

//! Transportation simplex for exact optimal transport on finite discrete
//! distributions.
//!
//! The basis is a spanning tree over the bipartite (source, sink) graph
//! with exactly m + k − 1 cells. Pivoting uses Bland's rule on both the
//! entering and the leaving arc, so degenerate instances terminate
//! without anti-cycling perturbations. Optimality is certified after the
//! loop from the dual variables rather than trusted from the pivot
//! condition.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum SimplexError {
    #[error("pivot limit {0} exceeded")]
    PivotLimit(usize),
    #[error("degenerate basis: dual variables not all reachable")]
    DisconnectedBasis,
    #[error("optimality certificate failed: {0}")]
    Certificate(String),
}

pub struct TransportSolution {
    pub value: f64,
    /// Row-major m×k coupling, non-negative, marginals equal the inputs.
    pub plan: Vec<f64>,
    pub row_duals: Vec<f64>,
    pub col_duals: Vec<f64>,
    pub pivots: usize,
}

/// Reduced costs nonbasic cells must clear to enter the basis.
const PIVOT_TOL: f64 = 1e-11;
/// Tolerance of the post-hoc optimality certificate.
pub const CERT_TOL: f64 = 1e-9;

struct Tableau<'a> {
    m: usize,
    k: usize,
    cost: &'a [f64],
    x: Vec<f64>,
    basic: Vec<bool>,
}

impl<'a> Tableau<'a> {
    fn idx(&self, i: usize, j: usize) -> usize {
        i * self.k + j
    }

    /// Northwest-corner starting basis: walks from (0,0) to (m−1,k−1)
    /// marking exactly m+k−1 cells, shipping the feasible maximum at each.
    fn northwest_corner(&mut self, supply: &[f64], demand: &[f64]) {
        let mut ra = supply.to_vec();
        let mut cb = demand.to_vec();
        let (mut i, mut j) = (0usize, 0usize);
        loop {
            let t = ra[i].min(cb[j]);
            let id = self.idx(i, j);
            self.x[id] = t;
            self.basic[id] = true;
            ra[i] -= t;
            cb[j] -= t;
            if i == self.m - 1 && j == self.k - 1 {
                break;
            }
            if ra[i] == 0.0 && i < self.m - 1 {
                i += 1;
            } else {
                j += 1;
            }
        }
    }

    /// Dual variables from the basis tree, anchored at u[0] = 0.
    fn duals(&self) -> Result<(Vec<f64>, Vec<f64>), SimplexError> {
        let mut u = vec![f64::NAN; self.m];
        let mut v = vec![f64::NAN; self.k];
        u[0] = 0.0;
        loop {
            let mut progressed = false;
            for i in 0..self.m {
                for j in 0..self.k {
                    if !self.basic[self.idx(i, j)] {
                        continue;
                    }
                    let c = self.cost[self.idx(i, j)];
                    match (u[i].is_nan(), v[j].is_nan()) {
                        (false, true) => {
                            v[j] = c - u[i];
                            progressed = true;
                        }
                        (true, false) => {
                            u[i] = c - v[j];
                            progressed = true;
                        }
                        _ => {}
                    }
                }
            }
            if u.iter().all(|x| !x.is_nan()) && v.iter().all(|x| !x.is_nan()) {
                return Ok((u, v));
            }
            if !progressed {
                return Err(SimplexError::DisconnectedBasis);
            }
        }
    }

    /// Lowest-index nonbasic cell with reduced cost below −PIVOT_TOL.
    fn entering(&self, u: &[f64], v: &[f64]) -> Option<(usize, usize)> {
        for i in 0..self.m {
            for j in 0..self.k {
                let id = self.idx(i, j);
                if !self.basic[id] && self.cost[id] - u[i] - v[j] < -PIVOT_TOL {
                    return Some((i, j));
                }
            }
        }
        None
    }

    /// Unique tree path from row node `ei` to column node `ej` through
    /// basic cells, returned as the alternating node sequence
    /// [row, col, row, …, col].
    fn tree_path(&self, ei: usize, ej: usize) -> Vec<usize> {
        // Nodes: rows are 0..m, columns are m..m+k.
        let n_nodes = self.m + self.k;
        let mut parent = vec![usize::MAX; n_nodes];
        let mut visited = vec![false; n_nodes];
        let mut stack = vec![ei];
        visited[ei] = true;
        while let Some(node) = stack.pop() {
            if node == self.m + ej {
                break;
            }
            if node < self.m {
                let i = node;
                for j in 0..self.k {
                    let cnode = self.m + j;
                    if self.basic[self.idx(i, j)] && !visited[cnode] {
                        visited[cnode] = true;
                        parent[cnode] = node;
                        stack.push(cnode);
                    }
                }
            } else {
                let j = node - self.m;
                for i in 0..self.m {
                    if self.basic[self.idx(i, j)] && !visited[i] {
                        visited[i] = true;
                        parent[i] = node;
                        stack.push(i);
                    }
                }
            }
        }
        let mut path = vec![self.m + ej];
        while *path.last().unwrap() != ei {
            let p = parent[*path.last().unwrap()];
            assert_ne!(p, usize::MAX, "basis tree must connect entering arc ends");
            path.push(p);
        }
        path.reverse();
        path
    }

    /// One pivot: pushes flow around the unique cycle closed by the
    /// entering cell. A degenerate pivot moves no flow but still swaps
    /// basis membership.
    fn pivot(&mut self, ei: usize, ej: usize) {
        let nodes = self.tree_path(ei, ej);
        // Path cells between consecutive nodes; even positions leave the
        // entering row/col and carry −θ, odd positions carry +θ.
        let mut minus = Vec::new();
        let mut plus = Vec::new();
        for (s, pair) in nodes.windows(2).enumerate() {
            let (a, b) = (pair[0], pair[1]);
            let (i, j) = if a < self.m {
                (a, b - self.m)
            } else {
                (b, a - self.m)
            };
            if s % 2 == 0 {
                minus.push((i, j));
            } else {
                plus.push((i, j));
            }
        }
        let mut theta = f64::INFINITY;
        let mut leaving = minus[0];
        for &(i, j) in &minus {
            let val = self.x[self.idx(i, j)];
            // Bland tie-break: lower cell index among equal ratios.
            if val < theta || (val == theta && (i, j) < leaving) {
                theta = val;
                leaving = (i, j);
            }
        }
        let eid = self.idx(ei, ej);
        self.x[eid] = theta;
        self.basic[eid] = true;
        for &(i, j) in &plus {
            let id = self.idx(i, j);
            self.x[id] += theta;
        }
        for &(i, j) in &minus {
            let id = self.idx(i, j);
            self.x[id] -= theta;
        }
        let lid = self.idx(leaving.0, leaving.1);
        self.x[lid] = 0.0;
        self.basic[lid] = false;
    }
}

/// Exact minimum-cost transport between `supply` and `demand` under the
/// given row-major cost matrix, with a certified optimal plan.
pub fn solve_transport(
    supply: &[f64],
    demand: &[f64],
    cost: &[f64],
) -> Result<TransportSolution, SimplexError> {
    let (m, k) = (supply.len(), demand.len());
    assert_eq!(cost.len(), m * k, "cost matrix size");
    let mut tab = Tableau {
        m,
        k,
        cost,
        x: vec![0.0; m * k],
        basic: vec![false; m * k],
    };
    tab.northwest_corner(supply, demand);

    let pivot_limit = 2000 + 200 * m * k * (m + k);
    let mut pivots = 0usize;
    let (row_duals, col_duals) = loop {
        let (u, v) = tab.duals()?;
        match tab.entering(&u, &v) {
            Some((i, j)) => {
                if pivots >= pivot_limit {
                    return Err(SimplexError::PivotLimit(pivot_limit));
                }
                tab.pivot(i, j);
                pivots += 1;
            }
            None => break (u, v),
        }
    };

    let mut plan = tab.x;
    for x in plan.iter_mut() {
        if *x < 0.0 {
            // Rounding never drives entries meaningfully negative; the
            // certificate below rejects anything beyond −1e-12.
            if *x < -1e-12 {
                return Err(SimplexError::Certificate(format!(
                    "negative plan entry {x}"
                )));
            }
            *x = 0.0;
        }
    }

    certify(supply, demand, cost, &plan, &row_duals, &col_duals)?;

    let value = plan
        .iter()
        .zip(cost)
        .map(|(&p, &c)| p * c)
        .sum::<f64>();
    Ok(TransportSolution {
        value,
        plan,
        row_duals,
        col_duals,
        pivots,
    })
}

/// Primal feasibility, dual feasibility, and complementary slackness at
/// CERT_TOL; failure means the plan must not be trusted.
fn certify(
    supply: &[f64],
    demand: &[f64],
    cost: &[f64],
    plan: &[f64],
    u: &[f64],
    v: &[f64],
) -> Result<(), SimplexError> {
    let (m, k) = (supply.len(), demand.len());
    for i in 0..m {
        let row: f64 = plan[i * k..(i + 1) * k].iter().sum();
        if (row - supply[i]).abs() > CERT_TOL {
            return Err(SimplexError::Certificate(format!(
                "row {i} marginal {row} vs supply {}",
                supply[i]
            )));
        }
    }
    for j in 0..k {
        let col: f64 = (0..m).map(|i| plan[i * k + j]).sum();
        if (col - demand[j]).abs() > CERT_TOL {
            return Err(SimplexError::Certificate(format!(
                "col {j} marginal {col} vs demand {}",
                demand[j]
            )));
        }
    }
    for i in 0..m {
        for j in 0..k {
            let r = cost[i * k + j] - u[i] - v[j];
            if r < -CERT_TOL {
                return Err(SimplexError::Certificate(format!(
                    "dual infeasibility {r} at ({i},{j})"
                )));
            }
            if plan[i * k + j] > 1e-12 && r.abs() > CERT_TOL {
                return Err(SimplexError::Certificate(format!(
                    "complementary slackness violated at ({i},{j}): x={} r={r}",
                    plan[i * k + j]
                )));
            }
        }
    }
    // Strong duality cross-check.
    let primal: f64 = plan.iter().zip(cost).map(|(&p, &c)| p * c).sum();
    let dual: f64 = supply.iter().zip(u).map(|(&a, &ui)| a * ui).sum::<f64>()
        + demand.iter().zip(v).map(|(&b, &vj)| b * vj).sum::<f64>();
    if (primal - dual).abs() > CERT_TOL * (1.0 + primal.abs()) {
        return Err(SimplexError::Certificate(format!(
            "duality gap {primal} vs {dual}"
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_cell_problem() {
        let sol = solve_transport(&[1.0], &[1.0], &[3.5]).unwrap();
        assert_eq!(sol.plan, vec![1.0]);
        assert!((sol.value - 3.5).abs() < 1e-15);
    }

    #[test]
    fn classic_3x3() {
        // Known optimum 0 picks the diagonal when it is free.
        let cost = vec![0.0, 1.0, 1.0, 1.0, 0.0, 1.0, 1.0, 1.0, 0.0];
        let w = [1.0 / 3.0; 3];
        let sol = solve_transport(&w, &w, &cost).unwrap();
        assert!(sol.value.abs() < 1e-15);
        for i in 0..3 {
            assert!((sol.plan[i * 3 + i] - 1.0 / 3.0).abs() < 1e-12);
        }
    }

    #[test]
    fn unbalanced_supports() {
        // One source splits across two sinks at different costs.
        let sol = solve_transport(&[1.0], &[0.25, 0.75], &[2.0, 4.0]).unwrap();
        assert!((sol.value - (0.25 * 2.0 + 0.75 * 4.0)).abs() < 1e-12);
    }

    #[test]
    fn degenerate_equal_weights_terminate() {
        // Many zero-flow basic cells; exercises degenerate pivots.
        let m = 5;
        let w = vec![0.2; m];
        let mut cost = vec![0.0; m * m];
        for i in 0..m {
            for j in 0..m {
                cost[i * m + j] = ((i as f64) - (j as f64)).abs();
            }
        }
        let sol = solve_transport(&w, &w, &cost).unwrap();
        assert!(sol.value.abs() < 1e-12);
    }
}

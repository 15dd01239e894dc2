//! Stationary distribution of a finite Markov chain.
//!
//! States that are not part of the recurrent class entered from the start
//! state are pruned and get exactly zero mass. On the remaining irreducible
//! core, `(I - P)^T c^T = 0` has a one-dimensional solution space. One of its
//! equations is replaced by the normalisation `sum(c) = 1`, which makes the
//! system regular, and the result is solved either with restarted GMRES
//! (Gauss-Seidel preconditioned) or with a dense LU factorisation.

use nalgebra::{DMatrix, DVector};
use petgraph::algo::tarjan_scc;
use petgraph::graph::{DiGraph, NodeIndex};
use thiserror::Error;

use crate::chain::QueueChain;
use crate::matrix::TransitionMatrix;

/// Largest reduced system handed to the dense solver.
pub const DENSE_LIMIT: usize = 2000;

/// Round-off below this magnitude is clamped to zero.
const NEGATIVE_ROUNDOFF: f64 = -1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolveError {
    #[error("no convergence after {iterations} iterations (residual {residual:.3e})")]
    NotConverged { iterations: usize, residual: f64 },
    #[error("{states} states exceed the dense solver limit of {DENSE_LIMIT}")]
    TooLarge { states: usize },
    #[error("state {state} has negative probability {value:.3e}")]
    NegativeMass { state: usize, value: f64 },
    #[error("the start state reaches {0} separate recurrent classes")]
    MultipleRecurrentClasses(usize),
    #[error("start state {start} outside a chain of {states} states")]
    StartOutOfRange { start: usize, states: usize },
    #[error("state ordering is not a permutation of the states")]
    BadOrdering,
    #[error("dense system is singular")]
    Singular,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    /// Restarted GMRES with a Gauss-Seidel preconditioner.
    Iterative,
    /// LU factorisation of the reduced system.
    Dense,
    /// Iterative, falling back to dense when it does not converge and the
    /// system is small enough.
    Auto,
}

#[derive(Debug, Clone, Copy)]
pub struct SolverOptions {
    /// Bound on `max |c P - c|`.
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Krylov subspace dimension before restart.
    pub restart: usize,
    /// Relaxation factor of the SOR preconditioner; 1 is Gauss-Seidel.
    pub relaxation: f64,
    pub method: Method,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tolerance: 1e-10,
            max_iterations: 100_000,
            restart: 60,
            relaxation: 1.0,
            method: Method::Auto,
        }
    }
}

impl SolverOptions {
    pub fn with_method(mut self, method: Method) -> Self {
        self.method = method;
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StationaryResult {
    /// Probability of every state; pruned states are exactly zero.
    pub distribution: Vec<f64>,
    /// `max |c P - c|` of the returned distribution.
    pub residual: f64,
    pub iterations: usize,
    /// Number of states in the recurrent core.
    pub reachable: usize,
    /// Method that produced the result (`Iterative` or `Dense`).
    pub method: Method,
}

/// States of the recurrent class reached from the queue-empty state at the
/// start of the slotframe.
pub fn reachable_states(chain: &QueueChain) -> Result<Vec<bool>, SolveError> {
    recurrent_core(chain.matrix(), chain.start_state())
}

/// Stationary distribution of a queue chain. States are processed slot by
/// slot, which makes the Gauss-Seidel sweep follow the direction of time.
pub fn solve(chain: &QueueChain, options: &SolverOptions) -> Result<StationaryResult, SolveError> {
    solve_matrix(
        chain.matrix(),
        chain.start_state(),
        Some(&chain.slot_major_order()),
        options,
    )
}

/// Mask of the recurrent class containing `start`, or of the unique
/// recurrent class reachable from `start` when `start` itself is transient.
pub fn recurrent_core(matrix: &TransitionMatrix, start: usize) -> Result<Vec<bool>, SolveError> {
    let n = matrix.size();
    if start >= n {
        return Err(SolveError::StartOutOfRange { start, states: n });
    }
    let mut graph = DiGraph::<(), ()>::with_capacity(n, matrix.nnz());
    for _ in 0..n {
        graph.add_node(());
    }
    for j in 0..n {
        for (k, _) in matrix.row(j) {
            graph.add_edge(NodeIndex::new(j), NodeIndex::new(k), ());
        }
    }
    let components = tarjan_scc(&graph);
    let mut component_of = vec![0; n];
    for (c, members) in components.iter().enumerate() {
        for v in members {
            component_of[v.index()] = c;
        }
    }
    let closed = |c: usize| {
        components[c]
            .iter()
            .all(|v| matrix.row(v.index()).all(|(k, _)| component_of[k] == c))
    };

    let own = component_of[start];
    let chosen = if closed(own) {
        own
    } else {
        let mut seen = vec![false; n];
        let mut stack = vec![start];
        seen[start] = true;
        while let Some(j) = stack.pop() {
            for (k, _) in matrix.row(j) {
                if !seen[k] {
                    seen[k] = true;
                    stack.push(k);
                }
            }
        }
        let mut candidates: Vec<usize> = (0..n)
            .filter(|&v| seen[v])
            .map(|v| component_of[v])
            .collect();
        candidates.sort_unstable();
        candidates.dedup();
        candidates.retain(|&c| closed(c));
        match candidates.as_slice() {
            [c] => *c,
            other => return Err(SolveError::MultipleRecurrentClasses(other.len())),
        }
    };
    Ok((0..n).map(|v| component_of[v] == chosen).collect())
}

/// Stationary distribution of `matrix` restricted to the recurrent core of
/// `start`. `order`, if given, is the sequence in which states are arranged
/// in the reduced system; it affects only the preconditioner.
pub fn solve_matrix(
    matrix: &TransitionMatrix,
    start: usize,
    order: Option<&[usize]>,
    options: &SolverOptions,
) -> Result<StationaryResult, SolveError> {
    let n = matrix.size();
    let mask = recurrent_core(matrix, start)?;
    let natural: Vec<usize>;
    let order = match order {
        Some(o) => {
            let mut check = vec![false; n];
            if o.len() != n || o.iter().any(|&j| j >= n || std::mem::replace(&mut check[j], true)) {
                return Err(SolveError::BadOrdering);
            }
            o
        }
        None => {
            natural = (0..n).collect();
            &natural
        }
    };
    let states: Vec<usize> = order.iter().copied().filter(|&j| mask[j]).collect();
    let reduced = ReducedSystem::new(matrix, &states);

    if states.len() == 1 {
        let mut distribution = vec![0.0; n];
        distribution[states[0]] = 1.0;
        return Ok(StationaryResult {
            residual: matrix.residual(&distribution),
            distribution,
            iterations: 0,
            reachable: 1,
            method: Method::Dense,
        });
    }

    match options.method {
        Method::Dense => reduced.solve_dense(matrix, options),
        Method::Iterative => reduced.solve_iterative(matrix, options),
        Method::Auto => match reduced.solve_iterative(matrix, options) {
            Ok(r) => Ok(r),
            Err(e) if reduced.size() > DENSE_LIMIT => Err(e),
            Err(_) => reduced.solve_dense(matrix, options),
        },
    }
}

/// `(I - P)^T` on the recurrent core, first equation replaced by the
/// normalisation row.
struct ReducedSystem<'a> {
    states: &'a [usize],
    /// CSR rows sorted by column, with the diagonal position of every row.
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
    diag: Vec<usize>,
}

impl<'a> ReducedSystem<'a> {
    fn new(matrix: &TransitionMatrix, states: &'a [usize]) -> Self {
        let m = states.len();
        let mut position = vec![usize::MAX; matrix.size()];
        for (r, &s) in states.iter().enumerate() {
            position[s] = r;
        }
        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); m];
        for (r, row) in rows.iter_mut().enumerate() {
            row.push((r, 1.0));
        }
        for (c, &j) in states.iter().enumerate() {
            for (k, p) in matrix.row(j) {
                let r = position[k];
                if r != usize::MAX {
                    rows[r].push((c, -p));
                }
            }
        }
        rows[0] = (0..m).map(|c| (c, 1.0)).collect();

        let mut row_ptr = vec![0];
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        let mut diag = Vec::with_capacity(m);
        for (r, mut row) in rows.into_iter().enumerate() {
            row.sort_by_key(|&(c, _)| c);
            let start = cols.len();
            for (c, v) in row {
                if cols.len() > start && *cols.last().unwrap() == c {
                    *vals.last_mut().unwrap() += v;
                } else {
                    cols.push(c);
                    vals.push(v);
                }
            }
            diag.push(start + cols[start..].iter().position(|&c| c == r).unwrap());
            row_ptr.push(cols.len());
        }
        Self {
            states,
            row_ptr,
            cols,
            vals,
            diag,
        }
    }

    fn size(&self) -> usize {
        self.states.len()
    }

    fn multiply(&self, x: &[f64], out: &mut [f64]) {
        for (r, o) in out.iter_mut().enumerate() {
            let range = self.row_ptr[r]..self.row_ptr[r + 1];
            *o = self.cols[range.clone()]
                .iter()
                .zip(&self.vals[range])
                .map(|(&c, &v)| v * x[c])
                .sum();
        }
    }

    /// Solves `(D / omega + L) z = rhs` by forward substitution.
    fn precondition(&self, rhs: &[f64], z: &mut [f64], omega: f64) {
        for r in 0..self.size() {
            let mut acc = rhs[r];
            for idx in self.row_ptr[r]..self.diag[r] {
                acc -= self.vals[idx] * z[self.cols[idx]];
            }
            z[r] = omega * acc / self.vals[self.diag[r]];
        }
    }

    fn rhs(&self) -> Vec<f64> {
        let mut b = vec![0.0; self.size()];
        b[0] = 1.0;
        b
    }

    fn solve_iterative(
        &self,
        matrix: &TransitionMatrix,
        options: &SolverOptions,
    ) -> Result<StationaryResult, SolveError> {
        let m = self.size();
        let b = self.rhs();
        let mut x = vec![1.0 / m as f64; m];
        let mut iterations = 0;
        // Inner tolerance on the preconditioned residual; the true residual
        // is checked after every restart cycle.
        let inner = (options.tolerance * 1e-3).max(1e-15);
        let mut last_residual = f64::INFINITY;
        while iterations < options.max_iterations {
            let budget = options.max_iterations - iterations;
            iterations += gmres_cycle(self, &b, &mut x, options, inner, budget);
            let result = self.finish(matrix, &x, iterations, Method::Iterative)?;
            if result.residual <= options.tolerance {
                return Ok(result);
            }
            if result.residual >= last_residual {
                // Stagnation: restarting from the same point does not help.
                return Err(SolveError::NotConverged {
                    iterations,
                    residual: result.residual,
                });
            }
            last_residual = result.residual;
        }
        Err(SolveError::NotConverged {
            iterations,
            residual: last_residual,
        })
    }

    fn solve_dense(
        &self,
        matrix: &TransitionMatrix,
        options: &SolverOptions,
    ) -> Result<StationaryResult, SolveError> {
        let m = self.size();
        if m > DENSE_LIMIT {
            return Err(SolveError::TooLarge { states: m });
        }
        let mut a = DMatrix::<f64>::zeros(m, m);
        for r in 0..m {
            for idx in self.row_ptr[r]..self.row_ptr[r + 1] {
                a[(r, self.cols[idx])] = self.vals[idx];
            }
        }
        let b = DVector::from_vec(self.rhs());
        let x = a.lu().solve(&b).ok_or(SolveError::Singular)?;
        let result = self.finish(matrix, x.as_slice(), 1, Method::Dense)?;
        if result.residual > options.tolerance {
            return Err(SolveError::NotConverged {
                iterations: 1,
                residual: result.residual,
            });
        }
        Ok(result)
    }

    /// Clamps round-off, normalises, scatters into the full state space.
    fn finish(
        &self,
        matrix: &TransitionMatrix,
        x: &[f64],
        iterations: usize,
        method: Method,
    ) -> Result<StationaryResult, SolveError> {
        let sum: f64 = x.iter().sum();
        let mut distribution = vec![0.0; matrix.size()];
        for (&state, &v) in self.states.iter().zip(x) {
            let v = v / sum;
            if v < NEGATIVE_ROUNDOFF || !v.is_finite() {
                return Err(SolveError::NegativeMass { state, value: v });
            }
            distribution[state] = v.max(0.0);
        }
        let total: f64 = distribution.iter().sum();
        distribution.iter_mut().for_each(|v| *v /= total);
        Ok(StationaryResult {
            residual: matrix.residual(&distribution),
            distribution,
            iterations,
            reachable: self.size(),
            method,
        })
    }
}

/// One restart cycle of left-preconditioned GMRES with modified
/// Gram-Schmidt and Givens rotations. Returns the number of Arnoldi steps.
fn gmres_cycle(
    system: &ReducedSystem<'_>,
    b: &[f64],
    x: &mut [f64],
    options: &SolverOptions,
    tolerance: f64,
    budget: usize,
) -> usize {
    let m = system.size();
    let omega = options.relaxation;
    let restart = options.restart.clamp(1, m).min(budget.max(1));
    let mut tmp = vec![0.0; m];
    let mut r = vec![0.0; m];

    let mut b_pre = vec![0.0; m];
    system.precondition(b, &mut b_pre, omega);
    let b_norm = norm(&b_pre).max(f64::MIN_POSITIVE);

    system.multiply(x, &mut tmp);
    for (t, bi) in tmp.iter_mut().zip(b) {
        *t = bi - *t;
    }
    system.precondition(&tmp, &mut r, omega);
    let beta = norm(&r);
    if beta <= tolerance * b_norm {
        return 1;
    }

    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(restart + 1);
    basis.push(r.iter().map(|v| v / beta).collect());
    let mut h = vec![vec![0.0; restart]; restart + 1];
    let mut cs = vec![0.0; restart];
    let mut sn = vec![0.0; restart];
    let mut g = vec![0.0; restart + 1];
    g[0] = beta;

    let mut steps = 0;
    for j in 0..restart {
        system.multiply(&basis[j], &mut tmp);
        let mut w = vec![0.0; m];
        system.precondition(&tmp, &mut w, omega);
        for (i, v) in basis.iter().enumerate() {
            let hij = dot(&w, v);
            h[i][j] = hij;
            w.iter_mut().zip(v).for_each(|(wk, vk)| *wk -= hij * vk);
        }
        let h_next = norm(&w);
        h[j + 1][j] = h_next;

        for i in 0..j {
            let temp = cs[i] * h[i][j] + sn[i] * h[i + 1][j];
            h[i + 1][j] = -sn[i] * h[i][j] + cs[i] * h[i + 1][j];
            h[i][j] = temp;
        }
        let denom = h[j][j].hypot(h[j + 1][j]);
        if denom == 0.0 {
            cs[j] = 1.0;
            sn[j] = 0.0;
        } else {
            cs[j] = h[j][j] / denom;
            sn[j] = h[j + 1][j] / denom;
        }
        h[j][j] = cs[j] * h[j][j] + sn[j] * h[j + 1][j];
        h[j + 1][j] = 0.0;
        g[j + 1] = -sn[j] * g[j];
        g[j] *= cs[j];

        steps = j + 1;
        if g[j + 1].abs() <= tolerance * b_norm || h_next <= f64::EPSILON * beta {
            break;
        }
        basis.push(w.iter().map(|v| v / h_next).collect());
    }

    // Back substitution on the leading steps x steps triangle.
    let mut y = vec![0.0; steps];
    for i in (0..steps).rev() {
        let mut acc = g[i];
        for k in i + 1..steps {
            acc -= h[i][k] * y[k];
        }
        y[i] = if h[i][i] != 0.0 { acc / h[i][i] } else { 0.0 };
    }
    for (k, yk) in y.iter().enumerate() {
        x.iter_mut()
            .zip(&basis[k])
            .for_each(|(xi, vi)| *xi += yk * vi);
    }
    steps
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

//! Reference computations shared by the integration tests. Nothing here
//! calls into the library's solver.

#![allow(dead_code)]

/// Poisson pmf `p_0..p_{n-1}` and the tail `P[A >= n]`.
pub fn poisson(lambda: f64, n: usize) -> (Vec<f64>, f64) {
    let mut pmf = Vec::with_capacity(n);
    let mut p = (-lambda).exp();
    for k in 0..n {
        pmf.push(p);
        p *= lambda / (k + 1) as f64;
    }
    let tail = (1.0 - pmf.iter().sum::<f64>()).max(0.0);
    (pmf, tail)
}

/// Solves `pi P = pi`, `sum pi = 1` by Gaussian elimination with partial
/// pivoting on the full dense system.
pub fn dense_stationary(p: &[Vec<f64>]) -> Vec<f64> {
    let n = p.len();
    // Row r of the system is column r of (P^T - I); the last row is replaced
    // by the normalisation.
    let mut a: Vec<Vec<f64>> = (0..n)
        .map(|r| (0..n).map(|c| p[c][r] - if r == c { 1.0 } else { 0.0 }).collect())
        .collect();
    let mut b = vec![0.0; n];
    a[n - 1] = vec![1.0; n];
    b[n - 1] = 1.0;
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&x, &y| a[x][col].abs().total_cmp(&a[y][col].abs()))
            .unwrap();
        a.swap(col, pivot);
        b.swap(col, pivot);
        for r in col + 1..n {
            let f = a[r][col] / a[col][col];
            if f != 0.0 {
                let (top, bottom) = a.split_at_mut(r);
                for (x, y) in bottom[0][col..].iter_mut().zip(&top[col][col..]) {
                    *x -= f * y;
                }
                b[r] -= f * b[col];
            }
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|c| a[r][c] * x[c]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    x
}

/// Textbook M/D/1/K observed at slot boundaries: one service per slot when
/// the queue is non-empty, Poisson(`lambda`) arrivals of which at most
/// `K - q` are admitted. Returns the level distribution and the blocking
/// probability.
pub fn md1k(queue_limit: usize, lambda: f64) -> (Vec<f64>, f64) {
    let k = queue_limit;
    let (pmf, tail) = poisson(lambda, k + 1);
    let mut p = vec![vec![0.0; k + 1]; k + 1];
    for (q, row) in p.iter_mut().enumerate() {
        let left = q.saturating_sub(1);
        let room = k - q;
        for a in 0..room {
            row[left + a] += pmf[a];
        }
        row[left + room] += pmf[room..].iter().sum::<f64>() + tail;
    }
    let pi = dense_stationary(&p);
    let admitted: f64 = (0..=k)
        .map(|q| {
            let room = k - q;
            let below: f64 = (0..room).map(|a| a as f64 * pmf[a]).sum();
            let above: f64 = pmf[room..].iter().sum::<f64>() + tail;
            pi[q] * (below + room as f64 * above)
        })
        .sum();
    (pi, 1.0 - admitted / lambda)
}

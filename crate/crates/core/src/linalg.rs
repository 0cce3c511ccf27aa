//! Sparse symmetric positive-definite solves: reverse Cuthill-McKee ordering
//! followed by a skyline (profile) Cholesky factorization.

use std::collections::VecDeque;

use crate::{Error, Result};

/// Symmetric sparse matrix in coordinate form, assembled in a fixed order.
#[derive(Clone, Debug)]
pub(crate) struct SymMatrix {
    pub n: usize,
    /// Adjacency lists of the sparsity pattern, without the diagonal.
    pub pattern: Vec<Vec<usize>>,
    /// Row-major storage keyed by the position in `pattern`.
    pub offdiag: Vec<Vec<f64>>,
    pub diag: Vec<f64>,
}

impl SymMatrix {
    pub fn with_pattern(pattern: Vec<Vec<usize>>) -> Self {
        let n = pattern.len();
        let offdiag = pattern.iter().map(|r| vec![0.0; r.len()]).collect();
        Self {
            n,
            pattern,
            offdiag,
            diag: vec![0.0; n],
        }
    }

    pub fn clear(&mut self) {
        self.diag.iter_mut().for_each(|d| *d = 0.0);
        for row in &mut self.offdiag {
            row.iter_mut().for_each(|v| *v = 0.0);
        }
    }

    /// Adds `v` to entry (i, j) and, if i ≠ j, to (j, i).
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        if i == j {
            self.diag[i] += v;
            return;
        }
        let pi = self.pattern[i].binary_search(&j).expect("entry in pattern");
        self.offdiag[i][pi] += v;
        let pj = self.pattern[j].binary_search(&i).expect("entry in pattern");
        self.offdiag[j][pj] += v;
    }

    #[cfg(test)]
    pub fn mul(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|i| {
                self.diag[i] * x[i]
                    + self.pattern[i]
                        .iter()
                        .zip(&self.offdiag[i])
                        .map(|(&j, &v)| v * x[j])
                        .sum::<f64>()
            })
            .collect()
    }
}

/// Reverse Cuthill-McKee permutation: `perm[new] = old`.
pub(crate) fn rcm_ordering(pattern: &[Vec<usize>]) -> Vec<usize> {
    let n = pattern.len();
    let mut visited = vec![false; n];
    let mut order = Vec::with_capacity(n);
    let degree = |i: usize| pattern[i].len();
    while order.len() < n {
        // start each component from a minimum-degree vertex
        let start = (0..n)
            .filter(|&i| !visited[i])
            .min_by_key(|&i| (degree(i), i))
            .unwrap();
        let start = pseudo_peripheral(pattern, start);
        visited[start] = true;
        let mut queue = VecDeque::from([start]);
        while let Some(v) = queue.pop_front() {
            order.push(v);
            let mut next: Vec<usize> = pattern[v].iter().copied().filter(|&w| !visited[w]).collect();
            next.sort_by_key(|&w| (degree(w), w));
            for w in next {
                visited[w] = true;
                queue.push_back(w);
            }
        }
    }
    order.reverse();
    order
}

fn bfs_levels(pattern: &[Vec<usize>], start: usize) -> (usize, usize) {
    let mut dist = vec![usize::MAX; pattern.len()];
    dist[start] = 0;
    let mut queue = VecDeque::from([start]);
    let mut far = (0, start);
    while let Some(v) = queue.pop_front() {
        let d = dist[v];
        if d > far.0 || (d == far.0 && pattern[v].len() < pattern[far.1].len()) {
            far = (d, v);
        }
        for &w in &pattern[v] {
            if dist[w] == usize::MAX {
                dist[w] = d + 1;
                queue.push_back(w);
            }
        }
    }
    far
}

fn pseudo_peripheral(pattern: &[Vec<usize>], start: usize) -> usize {
    let (mut ecc, mut far) = bfs_levels(pattern, start);
    for _ in 0..8 {
        let (e, w) = bfs_levels(pattern, far);
        if e <= ecc {
            break;
        }
        ecc = e;
        far = w;
    }
    far
}

/// Skyline Cholesky factor L (row-oriented profile storage) of P A Pᵀ.
pub(crate) struct ProfileCholesky {
    perm: Vec<usize>,
    first: Vec<usize>,
    start: Vec<usize>,
    values: Vec<f64>,
}

impl ProfileCholesky {
    /// Symbolic setup for the given pattern and ordering.
    fn layout(pattern: &[Vec<usize>], perm: &[usize]) -> (Vec<usize>, Vec<usize>) {
        let n = pattern.len();
        let mut inv = vec![0; n];
        for (new, &old) in perm.iter().enumerate() {
            inv[old] = new;
        }
        let mut first: Vec<usize> = (0..n).collect();
        for old in 0..n {
            let i = inv[old];
            for &w in &pattern[old] {
                let j = inv[w];
                if j < i {
                    first[i] = first[i].min(j);
                }
            }
        }
        let mut start = Vec::with_capacity(n + 1);
        start.push(0);
        for i in 0..n {
            start.push(start[i] + (i - first[i] + 1));
        }
        (first, start)
    }

    pub fn factor(a: &SymMatrix, perm: &[usize]) -> Result<Self> {
        let n = a.n;
        let (first, start) = Self::layout(&a.pattern, perm);
        let mut inv = vec![0; n];
        for (new, &old) in perm.iter().enumerate() {
            inv[old] = new;
        }
        let mut values = vec![0.0; start[n]];
        for old in 0..n {
            let i = inv[old];
            values[start[i] + (i - first[i])] = a.diag[old];
            for (&w, &v) in a.pattern[old].iter().zip(&a.offdiag[old]) {
                let j = inv[w];
                if j < i {
                    values[start[i] + (j - first[i])] = v;
                }
            }
        }
        for i in 0..n {
            let fi = first[i];
            let row_i = start[i];
            for j in fi..i {
                let fj = first[j];
                let row_j = start[j];
                let k0 = fi.max(fj);
                let mut s = values[row_i + (j - fi)];
                for k in k0..j {
                    s -= values[row_i + (k - fi)] * values[row_j + (k - fj)];
                }
                let djj = values[row_j + (j - fj)];
                values[row_i + (j - fi)] = s / djj;
            }
            let mut d = values[row_i + (i - fi)];
            for k in fi..i {
                let l = values[row_i + (k - fi)];
                d -= l * l;
            }
            if !(d > 0.0) || !d.is_finite() {
                return Err(Error::SingularSystem);
            }
            values[row_i + (i - fi)] = d.sqrt();
        }
        Ok(Self {
            perm: perm.to_vec(),
            first,
            start,
            values,
        })
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.perm.len();
        let mut y: Vec<f64> = self.perm.iter().map(|&old| b[old]).collect();
        // forward: L y = b
        for i in 0..n {
            let fi = self.first[i];
            let row = self.start[i];
            let mut s = y[i];
            for k in fi..i {
                s -= self.values[row + (k - fi)] * y[k];
            }
            y[i] = s / self.values[row + (i - fi)];
        }
        // backward: Lᵀ x = y
        for i in (0..n).rev() {
            let fi = self.first[i];
            let row = self.start[i];
            y[i] /= self.values[row + (i - fi)];
            let xi = y[i];
            for k in fi..i {
                y[k] -= self.values[row + (k - fi)] * xi;
            }
        }
        let mut x = vec![0.0; n];
        for (new, &old) in self.perm.iter().enumerate() {
            x[old] = y[new];
        }
        x
    }
}

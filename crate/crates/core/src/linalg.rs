//! Sparse matrices and the symmetric positive-definite solver behind the ADMM
//! linear step.
//!
//! The solver reorders unknowns with reverse Cuthill–McKee and factors the
//! permuted matrix with a row-envelope (skyline) Cholesky. Difference
//! operators of chains and of alignment graphs have narrow profiles under
//! that ordering, so factoring is near-linear in the number of unknowns.

use crate::error::{Error, Result};

/// Compressed sparse row matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    ncols: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl SparseMatrix {
    /// Builds a matrix from explicit rows of `(column, value)` entries.
    pub fn from_rows<I, R>(ncols: usize, rows: I) -> Result<Self>
    where
        I: IntoIterator<Item = R>,
        R: IntoIterator<Item = (usize, f64)>,
    {
        let mut row_ptr = vec![0];
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        for (r, row) in rows.into_iter().enumerate() {
            for (c, v) in row {
                if c >= ncols {
                    return Err(Error::invalid(format!(
                        "row {r}: column {c} out of range for {ncols} columns"
                    )));
                }
                if !v.is_finite() {
                    return Err(Error::invalid(format!("row {r}: non-finite coefficient")));
                }
                cols.push(c);
                vals.push(v);
            }
            row_ptr.push(cols.len());
        }
        Ok(Self {
            ncols,
            row_ptr,
            cols,
            vals,
        })
    }

    pub fn empty(ncols: usize) -> Self {
        Self {
            ncols,
            row_ptr: vec![0],
            cols: Vec::new(),
            vals: Vec::new(),
        }
    }

    pub fn nrows(&self) -> usize {
        self.row_ptr.len() - 1
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        self.cols[span.clone()]
            .iter()
            .copied()
            .zip(self.vals[span].iter().copied())
    }

    pub fn rows(&self) -> impl Iterator<Item = Vec<(usize, f64)>> + '_ {
        (0..self.nrows()).map(|r| self.row(r).collect())
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self {
            ncols: self.ncols,
            row_ptr: self.row_ptr.clone(),
            cols: self.cols.clone(),
            vals: self.vals.iter().map(|v| v * s).collect(),
        }
    }

    /// Multiplies row `r` by `factors[r]`.
    pub fn row_scaled(&self, factors: &[f64]) -> Self {
        assert_eq!(factors.len(), self.nrows(), "one factor per row");
        let mut vals = self.vals.clone();
        for (r, f) in factors.iter().enumerate() {
            for v in &mut vals[self.row_ptr[r]..self.row_ptr[r + 1]] {
                *v *= f;
            }
        }
        Self {
            ncols: self.ncols,
            row_ptr: self.row_ptr.clone(),
            cols: self.cols.clone(),
            vals,
        }
    }

    /// Stacks matrices with equal column counts on top of each other.
    pub fn vstack(parts: &[&SparseMatrix]) -> Result<Self> {
        let Some(first) = parts.first() else {
            return Err(Error::invalid("vstack of zero matrices"));
        };
        let ncols = first.ncols;
        let mut out = Self::empty(ncols);
        for p in parts {
            if p.ncols != ncols {
                return Err(Error::invalid(format!(
                    "column mismatch in vstack: {} vs {ncols}",
                    p.ncols
                )));
            }
            let base = out.cols.len();
            out.cols.extend_from_slice(&p.cols);
            out.vals.extend_from_slice(&p.vals);
            out.row_ptr.extend(p.row_ptr[1..].iter().map(|&o| o + base));
        }
        Ok(out)
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.nrows()];
        self.mul_vec_into(x, &mut out);
        out
    }

    pub fn mul_vec_into(&self, x: &[f64], out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.ncols);
        for (r, o) in out.iter_mut().enumerate() {
            let mut acc = 0.0;
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                acc += self.vals[k] * x[self.cols[k]];
            }
            *o = acc;
        }
    }

    /// `out = selfᵀ y`.
    pub fn tmul_vec_into(&self, y: &[f64], out: &mut [f64]) {
        debug_assert_eq!(y.len(), self.nrows());
        out.iter_mut().for_each(|v| *v = 0.0);
        for (r, &yr) in y.iter().enumerate() {
            if yr == 0.0 {
                continue;
            }
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                out[self.cols[k]] += self.vals[k] * yr;
            }
        }
    }

    pub fn tmul_vec(&self, y: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.ncols];
        self.tmul_vec_into(y, &mut out);
        out
    }

    /// `selfᵀ self` as a symmetric matrix.
    pub fn gram(&self) -> SymmetricMatrix {
        let mut triplets = Vec::new();
        for r in 0..self.nrows() {
            let span = self.row_ptr[r]..self.row_ptr[r + 1];
            for a in span.clone() {
                for b in span.clone() {
                    triplets.push((self.cols[a], self.cols[b], self.vals[a] * self.vals[b]));
                }
            }
        }
        SymmetricMatrix::from_triplets(self.ncols, triplets)
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut out = vec![vec![0.0; self.ncols]; self.nrows()];
        for (r, row) in out.iter_mut().enumerate() {
            for (c, v) in self.row(r) {
                row[c] += v;
            }
        }
        out
    }
}

/// Symmetric sparse matrix stored as full adjacency rows sorted by column.
#[derive(Debug, Clone, PartialEq)]
pub struct SymmetricMatrix {
    rows: Vec<Vec<(usize, f64)>>,
}

impl SymmetricMatrix {
    /// Sums duplicate `(i, j)` entries in input order; the caller supplies
    /// both triangles.
    pub fn from_triplets(n: usize, mut triplets: Vec<(usize, usize, f64)>) -> Self {
        triplets.sort_by_key(|&(i, j, _)| (i, j));
        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        for (i, j, v) in triplets {
            match rows[i].last_mut() {
                Some((c, acc)) if *c == j => *acc += v,
                _ => rows[i].push((j, v)),
            }
        }
        Self { rows }
    }

    pub fn identity(n: usize) -> Self {
        Self {
            rows: (0..n).map(|i| vec![(i, 1.0)]).collect(),
        }
    }

    pub fn dim(&self) -> usize {
        self.rows.len()
    }

    pub fn row(&self, i: usize) -> &[(usize, f64)] {
        &self.rows[i]
    }

    /// `alpha * I + beta * self`.
    pub fn shifted(&self, alpha: f64, beta: f64) -> Self {
        let rows = self
            .rows
            .iter()
            .enumerate()
            .map(|(i, row)| {
                let mut out: Vec<(usize, f64)> = row.iter().map(|&(j, v)| (j, beta * v)).collect();
                match out.binary_search_by_key(&i, |&(j, _)| j) {
                    Ok(p) => out[p].1 += alpha,
                    Err(p) => out.insert(p, (i, alpha)),
                }
                out
            })
            .collect();
        Self { rows }
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        self.rows
            .iter()
            .map(|row| row.iter().map(|&(j, v)| v * x[j]).sum())
            .collect()
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        self.rows.iter().enumerate().all(|(i, row)| {
            row.iter().all(|&(j, v)| {
                let back = self.rows[j]
                    .binary_search_by_key(&i, |&(c, _)| c)
                    .map(|p| self.rows[j][p].1)
                    .unwrap_or(0.0);
                (v - back).abs() <= tol
            })
        })
    }
}

/// Reverse Cuthill–McKee ordering of the matrix graph. Returns `perm` with
/// `perm[new] = old`. Ties are broken by vertex index, so the ordering is
/// deterministic.
pub fn reverse_cuthill_mckee(a: &SymmetricMatrix) -> Vec<usize> {
    let n = a.dim();
    let degree: Vec<usize> = (0..n)
        .map(|i| a.row(i).iter().filter(|&&(j, _)| j != i).count())
        .collect();
    let mut by_degree: Vec<usize> = (0..n).collect();
    by_degree.sort_by_key(|&i| (degree[i], i));

    let mut visited = vec![false; n];
    let mut order = Vec::with_capacity(n);
    let mut nbrs = Vec::new();
    for &seed in &by_degree {
        if visited[seed] {
            continue;
        }
        visited[seed] = true;
        let mut head = order.len();
        order.push(seed);
        while head < order.len() {
            let v = order[head];
            head += 1;
            nbrs.clear();
            nbrs.extend(a.row(v).iter().map(|&(j, _)| j).filter(|&j| j != v && !visited[j]));
            nbrs.sort_by_key(|&j| (degree[j], j));
            for &j in &nbrs {
                visited[j] = true;
                order.push(j);
            }
        }
    }
    order.reverse();
    order
}

/// Row-envelope Cholesky factor `P A Pᵀ = L Lᵀ`.
#[derive(Debug, Clone)]
pub struct EnvelopeCholesky {
    perm: Vec<usize>,
    inv: Vec<usize>,
    first: Vec<usize>,
    start: Vec<usize>,
    data: Vec<f64>,
}

impl EnvelopeCholesky {
    /// Factors `a` after reordering with reverse Cuthill–McKee.
    pub fn factor(a: &SymmetricMatrix) -> Result<Self> {
        let perm = reverse_cuthill_mckee(a);
        Self::factor_with_ordering(a, perm)
    }

    pub fn factor_with_ordering(a: &SymmetricMatrix, perm: Vec<usize>) -> Result<Self> {
        let n = a.dim();
        if perm.len() != n {
            return Err(Error::invalid("ordering length does not match matrix"));
        }
        let mut inv = vec![usize::MAX; n];
        for (new, &old) in perm.iter().enumerate() {
            if old >= n || inv[old] != usize::MAX {
                return Err(Error::invalid("ordering is not a permutation"));
            }
            inv[old] = new;
        }

        let mut first: Vec<usize> = (0..n).collect();
        for (old, row) in (0..n).map(|i| (i, a.row(i))) {
            let i = inv[old];
            for &(j_old, _) in row {
                let j = inv[j_old];
                if j < first[i] {
                    first[i] = j;
                }
            }
        }
        let mut start = Vec::with_capacity(n + 1);
        let mut total = 0;
        for i in 0..n {
            start.push(total);
            total += i - first[i] + 1;
        }
        start.push(total);

        let mut data = vec![0.0; total];
        for old in 0..n {
            let i = inv[old];
            for &(j_old, v) in a.row(old) {
                let j = inv[j_old];
                if j <= i {
                    data[start[i] + j - first[i]] += v;
                }
            }
        }

        for i in 0..n {
            let fi = first[i];
            let si = start[i];
            for j in fi..i {
                let fj = first[j];
                let sj = start[j];
                let k0 = fi.max(fj);
                let mut s = data[si + j - fi];
                let li = &data[si + k0 - fi..si + j - fi];
                let lj = &data[sj + k0 - fj..sj + j - fj];
                for (x, y) in li.iter().zip(lj) {
                    s -= x * y;
                }
                let djj = data[sj + j - fj];
                data[si + j - fi] = s / djj;
            }
            let mut d = data[si + i - fi];
            for &x in &data[si..si + i - fi] {
                d -= x * x;
            }
            if !(d > 0.0) || !d.is_finite() {
                return Err(Error::Numerical(format!(
                    "matrix is not positive definite (pivot {i} = {d})"
                )));
            }
            data[si + i - fi] = d.sqrt();
        }
        Ok(Self {
            perm,
            inv,
            first,
            start,
            data,
        })
    }

    pub fn dim(&self) -> usize {
        self.perm.len()
    }

    /// Number of stored factor entries.
    pub fn envelope_size(&self) -> usize {
        self.data.len()
    }

    /// Solves `A x = b`. `work` must have length `dim()`.
    pub fn solve_into(&self, b: &[f64], x: &mut [f64], work: &mut [f64]) {
        let n = self.dim();
        for i in 0..n {
            work[i] = b[self.perm[i]];
        }
        // L y = Pb
        for i in 0..n {
            let fi = self.first[i];
            let si = self.start[i];
            let mut s = work[i];
            for (k, l) in (fi..i).zip(&self.data[si..si + i - fi]) {
                s -= l * work[k];
            }
            work[i] = s / self.data[si + i - fi];
        }
        // Lᵀ z = y, column-oriented
        for i in (0..n).rev() {
            let fi = self.first[i];
            let si = self.start[i];
            let zi = work[i] / self.data[si + i - fi];
            work[i] = zi;
            for (k, l) in (fi..i).zip(&self.data[si..si + i - fi]) {
                work[k] -= l * zi;
            }
        }
        for old in 0..n {
            x[old] = work[self.inv[old]];
        }
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = vec![0.0; self.dim()];
        let mut work = vec![0.0; self.dim()];
        self.solve_into(b, &mut x, &mut work);
        x
    }
}

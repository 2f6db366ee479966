//! Dynamic time warping with squared local cost.
//!
//! All variants share one dynamic program over a [`SearchWindow`] of per-row
//! column intervals; [`dtw_exact`] simply runs it over the full grid. Moves are
//! `(i+1, j)`, `(i, j+1)` and `(i+1, j+1)` with unit weight, and the reported
//! distance is the square root of the summed squared differences along the
//! optimal path. When predecessors tie, the diagonal wins, then the vertical
//! move `(i-1, j)`, then the horizontal move `(i, j-1)`.
//!
//! [`fast_dtw`] is the usual coarse-to-fine approximation: halve both series,
//! align recursively, project the coarse path back to full resolution with a
//! radius, and refine inside that window.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A monotone, continuous alignment from `(0, 0)` to `(m-1, n-1)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct WarpPath {
    pairs: Vec<(usize, usize)>,
}

impl WarpPath {
    pub fn new(pairs: Vec<(usize, usize)>, m: usize, n: usize) -> Result<Self> {
        let path = Self { pairs };
        path.validate(m, n)?;
        Ok(path)
    }

    pub(crate) fn from_trusted(pairs: Vec<(usize, usize)>) -> Self {
        Self { pairs }
    }

    /// The identity alignment of two length-`n` series.
    pub fn diagonal(n: usize) -> Self {
        Self {
            pairs: (0..n).map(|i| (i, i)).collect(),
        }
    }

    /// Checks boundary, monotonicity and continuity against `(m, n)`.
    pub fn validate(&self, m: usize, n: usize) -> Result<()> {
        let p = &self.pairs;
        if m == 0 || n == 0 {
            return Err(Error::invalid("path dimensions must be positive"));
        }
        if p.first() != Some(&(0, 0)) {
            return Err(Error::invalid("path must start at (0, 0)"));
        }
        if p.last() != Some(&(m - 1, n - 1)) {
            return Err(Error::invalid(format!("path must end at ({}, {})", m - 1, n - 1)));
        }
        for (k, w) in p.windows(2).enumerate() {
            let (a, b) = (w[0], w[1]);
            let di = b.0.wrapping_sub(a.0);
            let dj = b.1.wrapping_sub(a.1);
            if di > 1 || dj > 1 || (di == 0 && dj == 0) {
                return Err(Error::invalid(format!("illegal step {a:?} -> {b:?} at position {k}")));
            }
        }
        Ok(())
    }

    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn transpose(&self) -> Self {
        Self {
            pairs: self.pairs.iter().map(|&(i, j)| (j, i)).collect(),
        }
    }

    /// Sum of squared differences along the path.
    pub fn cost(&self, x: &[f64], y: &[f64]) -> f64 {
        let mut acc = 0.0;
        for &(i, j) in &self.pairs {
            let d = x[i] - y[j];
            acc += d * d;
        }
        acc
    }
}

/// Per-row inclusive column intervals that constrain the dynamic program.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchWindow {
    rows: Vec<(usize, usize)>,
    ncols: usize,
}

impl SearchWindow {
    pub fn full(m: usize, n: usize) -> Self {
        Self {
            rows: vec![(0, n - 1); m],
            ncols: n,
        }
    }

    /// Validates bounds, monotone interval ends, boundary cells and step
    /// connectivity.
    pub fn new(rows: Vec<(usize, usize)>, ncols: usize) -> Result<Self> {
        let w = Self { rows, ncols };
        w.validate()?;
        Ok(w)
    }

    fn validate(&self) -> Result<()> {
        let m = self.rows.len();
        let n = self.ncols;
        if m == 0 || n == 0 {
            return Err(Error::invalid("window dimensions must be positive"));
        }
        for (i, &(lo, hi)) in self.rows.iter().enumerate() {
            if lo > hi || hi >= n {
                return Err(Error::invalid(format!(
                    "row {i}: bad interval [{lo}, {hi}] for {n} columns"
                )));
            }
            if i > 0 {
                let (plo, phi) = self.rows[i - 1];
                if lo < plo || hi < phi {
                    return Err(Error::invalid(format!("row {i}: interval ends decrease")));
                }
                if lo > phi + 1 {
                    return Err(Error::invalid(format!(
                        "row {i}: window is disconnected from row {}",
                        i - 1
                    )));
                }
            }
        }
        if self.rows[0].0 != 0 {
            return Err(Error::invalid("window must contain (0, 0)"));
        }
        if self.rows[m - 1].1 != n - 1 {
            return Err(Error::invalid(format!("window must contain ({}, {})", m - 1, n - 1)));
        }
        Ok(())
    }

    pub fn nrows(&self) -> usize {
        self.rows.len()
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn row(&self, i: usize) -> (usize, usize) {
        self.rows[i]
    }

    pub fn rows(&self) -> &[(usize, usize)] {
        &self.rows
    }

    pub fn contains(&self, i: usize, j: usize) -> bool {
        self.rows.get(i).is_some_and(|&(lo, hi)| lo <= j && j <= hi)
    }

    pub fn cell_count(&self) -> usize {
        self.rows.iter().map(|&(lo, hi)| hi - lo + 1).sum()
    }

    pub fn contains_path(&self, path: &WarpPath) -> bool {
        path.pairs().iter().all(|&(i, j)| self.contains(i, j))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DtwResult {
    pub distance: f64,
    pub path: WarpPath,
    pub cumulative_cost: f64,
}

const FROM_START: u8 = 0;
const FROM_DIAG: u8 = 1;
const FROM_UP: u8 = 2;
const FROM_LEFT: u8 = 3;

fn run_dp(x: &[f64], y: &[f64], window: &SearchWindow) -> Result<DtwResult> {
    let m = x.len();
    let n = y.len();
    if m == 0 || n == 0 {
        return Err(Error::invalid("DTW inputs must be non-empty"));
    }
    if window.nrows() != m || window.ncols() != n {
        return Err(Error::invalid(format!(
            "window is {}x{}, series are {m}x{n}",
            window.nrows(),
            window.ncols()
        )));
    }
    let mut offsets = Vec::with_capacity(m + 1);
    let mut total = 0;
    for &(lo, hi) in window.rows() {
        offsets.push(total);
        total += hi - lo + 1;
    }
    offsets.push(total);
    let mut dirs = vec![FROM_START; total];

    let widest = window.rows().iter().map(|&(lo, hi)| hi - lo + 1).max().unwrap_or(0);
    let mut prev = vec![f64::INFINITY; widest];
    let mut cur = vec![f64::INFINITY; widest];
    let (mut plo, mut phi) = (1usize, 0usize); // empty interval before row 0

    for i in 0..m {
        let (lo, hi) = window.row(i);
        let xi = x[i];
        let row_dirs = &mut dirs[offsets[i]..offsets[i + 1]];
        for j in lo..=hi {
            let d = xi - y[j];
            let c = d * d;
            let k = j - lo;
            if i == 0 && j == 0 {
                cur[k] = c;
                row_dirs[k] = FROM_START;
                continue;
            }
            let diag = if i > 0 && j > 0 && j - 1 >= plo && j - 1 <= phi {
                prev[j - 1 - plo]
            } else {
                f64::INFINITY
            };
            let up = if i > 0 && j >= plo && j <= phi {
                prev[j - plo]
            } else {
                f64::INFINITY
            };
            let left = if j > lo { cur[k - 1] } else { f64::INFINITY };
            let (mut best, mut dir) = (diag, FROM_DIAG);
            if up < best {
                best = up;
                dir = FROM_UP;
            }
            if left < best {
                best = left;
                dir = FROM_LEFT;
            }
            if best == f64::INFINITY {
                return Err(Error::invalid(format!(
                    "cell ({i}, {j}) is unreachable inside the window"
                )));
            }
            cur[k] = c + best;
            row_dirs[k] = dir;
        }
        std::mem::swap(&mut prev, &mut cur);
        plo = lo;
        phi = hi;
    }

    let cost = prev[n - 1 - plo];
    let mut pairs = Vec::with_capacity(m + n);
    let (mut i, mut j) = (m - 1, n - 1);
    loop {
        pairs.push((i, j));
        let (lo, _) = window.row(i);
        match dirs[offsets[i] + j - lo] {
            FROM_START => break,
            FROM_DIAG => {
                i -= 1;
                j -= 1;
            }
            FROM_UP => i -= 1,
            _ => j -= 1,
        }
    }
    pairs.reverse();
    Ok(DtwResult {
        distance: cost.sqrt(),
        path: WarpPath::from_trusted(pairs),
        cumulative_cost: cost,
    })
}

/// Unconstrained DTW.
pub fn dtw_exact(x: &[f64], y: &[f64]) -> Result<DtwResult> {
    if x.is_empty() || y.is_empty() {
        return Err(Error::invalid("DTW inputs must be non-empty"));
    }
    run_dp(x, y, &SearchWindow::full(x.len(), y.len()))
}

/// DTW restricted to the cells of `window`.
pub fn dtw_windowed(x: &[f64], y: &[f64], window: &SearchWindow) -> Result<DtwResult> {
    window.validate()?;
    run_dp(x, y, window)
}

/// Halves the resolution by averaging consecutive pairs; an odd trailing
/// sample is kept as is.
pub fn downsample(values: &[f64]) -> Result<Vec<f64>> {
    if values.len() < 2 {
        return Err(Error::invalid("downsampling needs at least two samples"));
    }
    Ok(values
        .chunks(2)
        .map(|c| if c.len() == 2 { 0.5 * (c[0] + c[1]) } else { c[0] })
        .collect())
}

/// Projects a path found at half resolution onto an `m x n` grid.
///
/// Each coarse cell `(i, j)` covers the fine block `{2i, 2i+1} x {2j, 2j+1}`;
/// the union of blocks is grown by `radius` cells in every direction
/// (Chebyshev distance) and then widened as little as needed to form a valid
/// [`SearchWindow`].
pub fn project_path(path: &WarpPath, radius: usize, m: usize, n: usize) -> SearchWindow {
    if radius >= m.max(n) {
        return SearchWindow::full(m, n);
    }
    let mut row_min = vec![usize::MAX; m];
    let mut row_max = vec![0usize; m];
    let mut seen = vec![false; m];
    for &(ci, cj) in path.pairs() {
        for a in [2 * ci, 2 * ci + 1] {
            if a >= m {
                continue;
            }
            for b in [2 * cj, 2 * cj + 1] {
                if b >= n {
                    continue;
                }
                seen[a] = true;
                row_min[a] = row_min[a].min(b);
                row_max[a] = row_max[a].max(b);
            }
        }
    }

    let mut rows: Vec<Option<(usize, usize)>> = vec![None; m];
    for (i, slot) in rows.iter_mut().enumerate() {
        let a0 = i.saturating_sub(radius);
        let a1 = (i + radius).min(m - 1);
        let mut lo = usize::MAX;
        let mut hi = 0;
        let mut any = false;
        for a in a0..=a1 {
            if seen[a] {
                any = true;
                lo = lo.min(row_min[a]);
                hi = hi.max(row_max[a]);
            }
        }
        if any {
            *slot = Some((lo.saturating_sub(radius), (hi + radius).min(n - 1)));
        }
    }

    // rows the projection missed inherit their neighbour's interval
    let mut filled: Vec<(usize, usize)> = Vec::with_capacity(m);
    let mut last = None;
    for r in &rows {
        last = r.or(last);
        filled.push(last.unwrap_or((0, 0)));
    }
    if rows[0].is_none() {
        let first = rows.iter().flatten().next().copied().unwrap_or((0, n - 1));
        for (f, r) in filled.iter_mut().zip(&rows) {
            if r.is_some() {
                break;
            }
            *f = first;
        }
    }
    widen_to_valid(&mut filled, n);
    SearchWindow { rows: filled, ncols: n }
}

fn widen_to_valid(rows: &mut [(usize, usize)], n: usize) {
    let m = rows.len();
    rows[0].0 = 0;
    rows[m - 1].1 = n - 1;
    for i in 1..m {
        rows[i].1 = rows[i].1.max(rows[i - 1].1);
    }
    for i in (0..m - 1).rev() {
        rows[i].0 = rows[i].0.min(rows[i + 1].0);
    }
    for i in 1..m {
        let reach = rows[i - 1].1 + 1;
        if rows[i].0 > reach {
            rows[i].0 = reach;
        }
    }
}

/// Coarse-to-fine approximate DTW with search radius `radius`.
pub fn fast_dtw(x: &[f64], y: &[f64], radius: usize) -> Result<DtwResult> {
    if x.is_empty() || y.is_empty() {
        return Err(Error::invalid("DTW inputs must be non-empty"));
    }
    let base = (radius + 2).max(4);
    if x.len() <= base || y.len() <= base {
        return dtw_exact(x, y);
    }
    let xs = downsample(x)?;
    let ys = downsample(y)?;
    let coarse = fast_dtw(&xs, &ys, radius)?;
    let window = project_path(&coarse.path, radius, x.len(), y.len());
    run_dp(x, y, &window)
}

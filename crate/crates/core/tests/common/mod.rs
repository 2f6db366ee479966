//! Reference implementations shared by the integration tests. Each one is a
//! direct, slow transcription of a definition and shares no code with the
//! library beyond its public types.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use robustdtw::linalg::SparseMatrix;
use robustdtw::series::TimeSeries;
use robustdtw::trend::{huber_derivative, Fidelity};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn uniform_series(rng: &mut ChaCha8Rng, len: usize, amp: f64) -> Vec<f64> {
    (0..len).map(|_| rng.random_range(-amp..amp)).collect()
}

pub fn ts(values: Vec<f64>) -> TimeSeries {
    TimeSeries::new(values).expect("finite test series")
}

/// Noisy single-period sine.
pub fn noisy_sine(len: usize, sigma: f64, seed: u64) -> Vec<f64> {
    let mut r = rng(seed);
    (0..len)
        .map(|t| {
            let phase = 2.0 * std::f64::consts::PI * t as f64 / len as f64;
            phase.sin() + sigma * (r.random::<f64>() - 0.5) * 2.0
        })
        .collect()
}

/// Minimum DTW cost by recursive enumeration of every monotone boundary path.
/// The cost is accumulated from the start cell so the floating-point sums
/// follow the same order as a forward dynamic program.
pub fn brute_force_dtw_cost(x: &[f64], y: &[f64]) -> f64 {
    fn go(x: &[f64], y: &[f64], i: usize, j: usize, acc: f64, best: &mut f64) {
        let d = x[i] - y[j];
        let acc = acc + d * d;
        if i == x.len() - 1 && j == y.len() - 1 {
            if acc < *best {
                *best = acc;
            }
            return;
        }
        if i + 1 < x.len() && j + 1 < y.len() {
            go(x, y, i + 1, j + 1, acc, best);
        }
        if i + 1 < x.len() {
            go(x, y, i + 1, j, acc, best);
        }
        if j + 1 < y.len() {
            go(x, y, i, j + 1, acc, best);
        }
    }
    let mut best = f64::INFINITY;
    go(x, y, 0, 0, 0.0, &mut best);
    best
}

/// LOF straight from the definitions: k-distance as the smallest radius
/// holding k other points, neighborhoods including ties, reachability,
/// local reachability density and the averaged density ratio.
pub fn lof_oracle(d: &[Vec<f64>], k: usize) -> Vec<f64> {
    let n = d.len();
    let kdist = |p: usize| {
        let mut best = f64::INFINITY;
        for o in (0..n).filter(|&o| o != p) {
            let r = d[p][o];
            let within = (0..n).filter(|&q| q != p && d[p][q] <= r).count();
            if within >= k && r < best {
                best = r;
            }
        }
        best
    };
    let hood = |p: usize| -> Vec<usize> { (0..n).filter(|&o| o != p && d[p][o] <= kdist(p)).collect() };
    let lrd = |p: usize| {
        let h = hood(p);
        let s: f64 = h.iter().map(|&o| kdist(o).max(d[p][o])).sum();
        if s == 0.0 {
            f64::INFINITY
        } else {
            h.len() as f64 / s
        }
    };
    (0..n)
        .map(|p| {
            let h = hood(p);
            let lp = lrd(p);
            h.iter()
                .map(|&o| {
                    let lo = lrd(o);
                    match (lo.is_infinite(), lp.is_infinite()) {
                        (true, true) => 1.0,
                        (false, true) => 0.0,
                        _ => lo / lp,
                    }
                })
                .sum::<f64>()
                / h.len() as f64
        })
        .collect()
}

/// A small generalized lasso problem held in dense form.
#[derive(Debug, Clone)]
pub struct DenseLasso {
    pub target: Vec<f64>,
    pub fidelity: Fidelity,
    /// Rows of every penalty operator, each with its λ.
    pub rows: Vec<(Vec<f64>, f64)>,
}

impl DenseLasso {
    pub fn new(target: Vec<f64>, fidelity: Fidelity, penalties: &[(&SparseMatrix, f64)]) -> Self {
        let rows = penalties
            .iter()
            .flat_map(|(m, lambda)| m.to_dense().into_iter().map(move |r| (r, *lambda)))
            .filter(|(_, l)| *l > 0.0)
            .collect();
        Self { target, fidelity, rows }
    }

    fn dim(&self) -> usize {
        self.target.len()
    }

    pub fn objective(&self, tau: &[f64]) -> f64 {
        let pen: f64 = self.rows.iter().map(|(r, l)| l * dot(r, tau).abs()).sum();
        self.fidelity.value(&self.target, tau) + pen
    }

    fn fidelity_slope(&self, s: f64, y: f64) -> (f64, f64) {
        // derivative of the fidelity term at s as (value, d/ds)
        match self.fidelity {
            Fidelity::Squared => (s - y, 1.0),
            Fidelity::Huber { gamma } => {
                let g = -huber_derivative(y - s, gamma);
                if (y - s).abs() < gamma {
                    (g, 1.0)
                } else {
                    (g, 0.0)
                }
            }
        }
    }

    /// Exact minimizer of `t ↦ F(τ + t·d)`. The function is convex and
    /// piecewise quadratic, so its derivative is monotone and piecewise linear
    /// between the kinks of the L1 and Huber terms.
    fn line_minimize(&self, tau: &[f64], dir: &[f64]) -> f64 {
        let mut kinks = Vec::new();
        let mut slopes = Vec::with_capacity(self.rows.len());
        for (r, _) in &self.rows {
            let (a, b) = (dot(r, tau), dot(r, dir));
            slopes.push((a, b));
            if b != 0.0 {
                kinks.push(-a / b);
            }
        }
        if let Fidelity::Huber { gamma } = self.fidelity {
            for i in 0..self.dim() {
                if dir[i] != 0.0 {
                    let base = self.target[i] - tau[i];
                    kinks.push((base - gamma) / dir[i]);
                    kinks.push((base + gamma) / dir[i]);
                }
            }
        }
        kinks.retain(|t| t.is_finite());
        kinks.sort_by(f64::total_cmp);
        kinks.dedup();

        // derivative on the open piece containing `probe`, as value + slope·t
        let piece = |probe: f64| -> (f64, f64) {
            let mut c0 = 0.0;
            let mut c1 = 0.0;
            for i in 0..self.dim() {
                if dir[i] == 0.0 {
                    continue;
                }
                let s = tau[i] + probe * dir[i];
                let (g, h) = self.fidelity_slope(s, self.target[i]);
                // g(t) ≈ g(probe) + h·d_i·(t − probe) on this piece
                c0 += dir[i] * (g - h * dir[i] * probe);
                c1 += dir[i] * dir[i] * h;
            }
            for ((_, l), (a, b)) in self.rows.iter().zip(&slopes) {
                let v = a + probe * b;
                c0 += l * b * v.signum() * (v != 0.0) as u8 as f64;
            }
            (c0, c1)
        };

        let mut bounds = vec![f64::NEG_INFINITY];
        bounds.extend(&kinks);
        bounds.push(f64::INFINITY);
        for w in bounds.windows(2) {
            let (lo, hi) = (w[0], w[1]);
            let probe = match (lo.is_finite(), hi.is_finite()) {
                (true, true) => 0.5 * (lo + hi),
                (false, true) => hi - 1.0,
                (true, false) => lo + 1.0,
                (false, false) => 0.0,
            };
            let (c0, c1) = piece(probe);
            let at_hi = if hi.is_finite() { c0 + c1 * hi } else { c0 + c1 * 1e300 };
            if at_hi < 0.0 {
                continue;
            }
            let at_lo = if lo.is_finite() { c0 + c1 * lo } else { c0 - c1 * 1e300 };
            if at_lo >= 0.0 {
                // the derivative jumps across zero at the kink `lo`
                return if lo.is_finite() { lo } else { 0.0 };
            }
            if c1 > 0.0 {
                return (-c0 / c1).clamp(lo, hi);
            }
            return 0.0f64.clamp(lo, hi);
        }
        0.0
    }

    /// Coordinate descent with exact line searches from several starts. The
    /// direction set holds unit vectors, steps and hinges, which span every
    /// piecewise-linear profile, so the sweep cannot stall on a fused block.
    pub fn coordinate_descent(&self, starts: usize, seed: u64) -> (Vec<f64>, f64) {
        let n = self.dim();
        let mut dirs: Vec<Vec<f64>> = Vec::new();
        for c in 0..n {
            dirs.push((0..n).map(|k| (k == c) as u8 as f64).collect());
            dirs.push((0..n).map(|k| (k >= c) as u8 as f64).collect());
            dirs.push((0..n).map(|k| (k as f64 - c as f64).max(0.0)).collect());
            dirs.push((0..n).map(|k| (c as f64 - k as f64).max(0.0)).collect());
        }
        dirs.push((0..n).map(|k| k as f64).collect());

        let scale = self.target.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        let mut r = rng(seed);
        let mut best: Option<(Vec<f64>, f64)> = None;
        for s in 0..starts {
            let mut tau: Vec<f64> = if s == 0 {
                self.target.clone()
            } else {
                (0..n).map(|_| r.random_range(-2.0 * scale..2.0 * scale)).collect()
            };
            let mut f = self.objective(&tau);
            for _ in 0..20_000 {
                let before = f;
                let active = self.active_null_space(&tau);
                for d in dirs.iter().chain(&active) {
                    let t = self.line_minimize(&tau, d);
                    if t == 0.0 {
                        continue;
                    }
                    let cand: Vec<f64> = tau.iter().zip(d).map(|(a, b)| a + t * b).collect();
                    let fc = self.objective(&cand);
                    if fc < f {
                        tau = cand;
                        f = fc;
                    }
                }
                if before - f <= 1e-15 * (1.0 + f.abs()) {
                    break;
                }
            }
            if best.as_ref().is_none_or(|(_, bf)| f < *bf) {
                best = Some((tau, f));
            }
        }
        best.expect("at least one start")
    }

    /// Basis of the null space of the penalty rows that vanish at `tau`.
    /// Moving along it keeps every fused difference fused, so the objective
    /// is smooth there; without these directions the sweep can stall at a
    /// kink where only a combination of the fixed directions descends.
    fn active_null_space(&self, tau: &[f64]) -> Vec<Vec<f64>> {
        let n = self.dim();
        let scale = 1.0 + tau.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let mut a: Vec<Vec<f64>> = self
            .rows
            .iter()
            .map(|(r, _)| r.clone())
            .filter(|r| dot(r, tau).abs() <= 1e-9 * scale)
            .collect();
        // reduced row echelon form with partial pivoting
        let mut pivots = Vec::new();
        let mut row = 0;
        for col in 0..n {
            if row == a.len() {
                break;
            }
            let best = (row..a.len())
                .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
                .unwrap();
            if a[best][col].abs() < 1e-10 {
                continue;
            }
            a.swap(row, best);
            let p = a[row][col];
            for v in a[row].iter_mut() {
                *v /= p;
            }
            for i in 0..a.len() {
                if i != row && a[i][col] != 0.0 {
                    let f = a[i][col];
                    let pivot_row = a[row].clone();
                    for (v, pv) in a[i].iter_mut().zip(&pivot_row) {
                        *v -= f * pv;
                    }
                }
            }
            pivots.push(col);
            row += 1;
        }
        (0..n)
            .filter(|c| !pivots.contains(c))
            .map(|free| {
                let mut v = vec![0.0; n];
                v[free] = 1.0;
                for (r, &pc) in pivots.iter().enumerate() {
                    v[pc] = -a[r][free];
                }
                v
            })
            .collect()
    }

    /// Smallest norm of `∇fidelity(τ) + Σ λ_k s_k a_k` over subgradient
    /// selections: `s_k = sign(a_k·τ)` where that is clearly nonzero and
    /// `s_k ∈ [−1, 1]` otherwise. The free part is a box-constrained least
    /// squares problem solved by exact coordinate minimization.
    pub fn certificate(&self, tau: &[f64], zero_tol: f64) -> f64 {
        let n = self.dim();
        let mut resid = self.fidelity.gradient(&self.target, tau);
        let mut free: Vec<(Vec<f64>, f64)> = Vec::new();
        for (row, l) in &self.rows {
            let v = dot(row, tau);
            let w: Vec<f64> = row.iter().map(|a| a * l).collect();
            if v.abs() > zero_tol {
                for i in 0..n {
                    resid[i] += v.signum() * w[i];
                }
            } else {
                free.push((w, 0.0));
            }
        }
        for _ in 0..100_000 {
            let mut moved = 0.0f64;
            for (w, s) in free.iter_mut() {
                let ww = dot(w, w);
                if ww == 0.0 {
                    continue;
                }
                let next = (*s - dot(w, &resid) / ww).clamp(-1.0, 1.0);
                let delta = next - *s;
                if delta != 0.0 {
                    for i in 0..n {
                        resid[i] += delta * w[i];
                    }
                    *s = next;
                    moved = moved.max(delta.abs());
                }
            }
            if moved < 1e-15 {
                break;
            }
        }
        dot(&resid, &resid).sqrt()
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

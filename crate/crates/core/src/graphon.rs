//! Step-function embeddings of matrices and vectors, and the cut norm.
//!
//! An `m×m` matrix `A` becomes the graphon `𝒜(x, y) = A[i_m(x), i_m(y)]`
//! where `i_m(x)` is the index of the length-`1/m` interval holding `x`.
//! For step graphons the cut norm reduces to
//! `(1/m²)·max_{S,T⊆[m]} |Σ_{i∈S,j∈T} A_ij|`.

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::Rng as _;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::gpr::check_positive;
use crate::seed;

/// Largest block count accepted by the exact cut norm.
pub const MAX_EXACT_BLOCKS: usize = 20;

/// Block index of `x ∈ [0, 1]` among `m` equal intervals.
pub fn block_index(x: f64, m: usize) -> usize {
    ((x * m as f64).floor().max(0.0) as usize).min(m - 1)
}

/// A matrix seen as a piecewise-constant function on `[0,1]²`.
#[derive(Debug, Clone, PartialEq)]
pub struct StepGraphon {
    a: DMatrix<f64>,
}

impl StepGraphon {
    pub fn new(a: DMatrix<f64>) -> Result<Self> {
        if a.nrows() == 0 || a.nrows() != a.ncols() {
            return Err(Error::input(format!(
                "step graphon needs a nonempty square matrix, got {}x{}",
                a.nrows(),
                a.ncols()
            )));
        }
        if a.iter().any(|v| !v.is_finite()) {
            return Err(Error::input("step graphon entries must be finite"));
        }
        Ok(StepGraphon { a })
    }

    pub fn blocks(&self) -> usize {
        self.a.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn eval(&self, x: f64, y: f64) -> f64 {
        let m = self.blocks();
        self.a[(block_index(x, m), block_index(y, m))]
    }

    /// The same graphon on `k·m` blocks.
    pub fn refine(&self, k: usize) -> StepGraphon {
        let m = self.blocks() * k.max(1);
        let k = k.max(1);
        StepGraphon {
            a: DMatrix::from_fn(m, m, |i, j| self.a[(i / k, j / k)]),
        }
    }

    pub fn scaled(&self, c: f64) -> StepGraphon {
        StepGraphon { a: &self.a * c }
    }
}

/// A vector seen as a piecewise-constant function on `[0,1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct StepFunction {
    v: DVector<f64>,
}

impl StepFunction {
    pub fn new(v: DVector<f64>) -> Result<Self> {
        if v.is_empty() {
            return Err(Error::input("step function needs at least one block"));
        }
        Ok(StepFunction { v })
    }

    pub fn from_slice(v: &[f64]) -> Result<Self> {
        Self::new(DVector::from_column_slice(v))
    }

    pub fn blocks(&self) -> usize {
        self.v.len()
    }

    pub fn values(&self) -> &DVector<f64> {
        &self.v
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.v[block_index(x, self.blocks())]
    }

    /// `‖𝓋‖_∞`.
    pub fn sup_norm(&self) -> f64 {
        self.v.amax()
    }
}

fn check_blocks(what: &str, got: usize, want: usize) -> Result<()> {
    if got == want {
        Ok(())
    } else {
        Err(Error::input(format!("{what} has {got} blocks, graphon has {want}")))
    }
}

/// `max_{S,T} |Σ_{i∈S,j∈T} a_ij|` by Gray-code enumeration of `S`.
///
/// For a fixed `S` the best `T` keeps exactly the positive (or negative)
/// column sums. The top row bits are split across threads and each chunk
/// walks its own Gray code, so the work per subset is `O(m)`.
fn max_block_sum(a: &DMatrix<f64>) -> Result<f64> {
    let m = a.nrows();
    if m > MAX_EXACT_BLOCKS {
        return Err(Error::Size(format!(
            "exact cut norm enumerates 2^m subsets; m={m} exceeds {MAX_EXACT_BLOCKS}"
        )));
    }
    // Small matrices are not worth the thread hand-off.
    let split = if m >= 14 { 6 } else { 0 };
    let low = m - split;
    let best = (0..1usize << split)
        .into_par_iter()
        .map(|high| {
            let mut cols = vec![0.0; m];
            for (b, i) in (low..m).enumerate() {
                if high >> b & 1 == 1 {
                    for (j, c) in cols.iter_mut().enumerate() {
                        *c += a[(i, j)];
                    }
                }
            }
            let score = |cols: &[f64]| {
                let (mut pos, mut neg) = (0.0, 0.0);
                for &c in cols {
                    if c > 0.0 {
                        pos += c;
                    } else {
                        neg -= c;
                    }
                }
                f64::max(pos, neg)
            };
            let mut best = score(&cols);
            let mut inside = vec![false; low];
            for step in 1..1usize << low {
                let i = step.trailing_zeros() as usize;
                inside[i] = !inside[i];
                let sign = if inside[i] { 1.0 } else { -1.0 };
                for (j, c) in cols.iter_mut().enumerate() {
                    *c += sign * a[(i, j)];
                }
                best = best.max(score(&cols));
            }
            best
        })
        .reduce(|| 0.0, f64::max);
    Ok(best)
}

/// Exact cut norm of a step graphon with at most 20 blocks.
pub fn cut_norm_exact(g: &StepGraphon) -> Result<f64> {
    let m = g.blocks() as f64;
    Ok(max_block_sum(&g.a)? / (m * m))
}

/// Alternating-maximization lower bound on the cut norm.
///
/// Each restart draws a random nonempty `S`, then alternates
/// `T ← {j: Σ_{i∈S} a_ij > 0}` and `S ← {i: Σ_{j∈T} a_ij > 0}` until the
/// block sum stops growing. Both signs of `A` are searched.
pub fn cut_norm_heuristic(g: &StepGraphon, restarts: usize, seed: u64) -> f64 {
    let m = g.blocks();
    let mut rng = seed::rng(seed);
    let mut best: f64 = 0.0;
    for _ in 0..restarts.max(1) {
        let mut start: Vec<bool> = (0..m).map(|_| rng.random_bool(0.5)).collect();
        if !start.iter().any(|&b| b) {
            start[rng.random_range(0..m)] = true;
        }
        for sign in [1.0, -1.0] {
            best = best.max(climb(&g.a, sign, start.clone()));
        }
    }
    best / (m * m) as f64
}

fn climb(a: &DMatrix<f64>, sign: f64, mut rows: Vec<bool>) -> f64 {
    let m = a.nrows();
    let mut value = f64::NEG_INFINITY;
    loop {
        let cols: Vec<f64> = (0..m)
            .map(|j| sign * (0..m).filter(|&i| rows[i]).map(|i| a[(i, j)]).sum::<f64>())
            .collect();
        let col_set: Vec<bool> = cols.iter().map(|&c| c > 0.0).collect();
        let row_sums: Vec<f64> = (0..m)
            .map(|i| sign * (0..m).filter(|&j| col_set[j]).map(|j| a[(i, j)]).sum::<f64>())
            .collect();
        let next: f64 = row_sums.iter().filter(|&&r| r > 0.0).sum();
        if next <= value {
            return value.max(0.0);
        }
        value = next;
        rows = row_sums.iter().map(|&r| r > 0.0).collect();
    }
}

/// `⟨f, 𝒜g⟩ = (1/m²) Σ_ij f_i A_ij g_j`.
pub fn quadratic_form(f: &StepFunction, g_graphon: &StepGraphon, g: &StepFunction) -> Result<f64> {
    let m = g_graphon.blocks();
    check_blocks("f", f.blocks(), m)?;
    check_blocks("g", g.blocks(), m)?;
    Ok(f.v.dot(&(&g_graphon.a * &g.v)) / (m * m) as f64)
}

/// `‖𝒦f − 𝓀‖₂² + λ⟨f, 𝒦f⟩` on step functions.
pub fn graphon_loss(
    k_graphon: &StepGraphon,
    k_fn: &StepFunction,
    lambda: f64,
    f: &StepFunction,
) -> Result<f64> {
    check_positive("lambda", lambda)?;
    let m = k_graphon.blocks();
    check_blocks("k", k_fn.blocks(), m)?;
    check_blocks("f", f.blocks(), m)?;
    let mf = m as f64;
    let kf = &k_graphon.a * &f.v / mf;
    let fit = (&kf - &k_fn.v).norm_squared() / mf;
    let penalty = f.v.dot(&kf) / mf;
    Ok(fit + lambda * penalty)
}

/// Cells of the common refinement of `n` and `s` equal intervals, as
/// `(full block, subsample block, width)`.
fn common_refinement(n: usize, s: usize) -> Vec<(usize, usize, f64)> {
    // Breakpoints in units of 1/(n·s).
    let mut cuts: Vec<usize> = (0..=n).map(|i| i * s).chain((0..=s).map(|k| k * n)).collect();
    cuts.sort_unstable();
    cuts.dedup();
    let total = (n * s) as f64;
    cuts.windows(2)
        .map(|w| (w[0] / s, w[0] / n, (w[1] - w[0]) as f64 / total))
        .collect()
}

/// Cut distance between the graphon of `A` and that of `A_SS`, minimized
/// over relabelings of the `s` subsample blocks.
///
/// The difference is evaluated exactly on the common refinement of the `n`
/// and `s` block partitions. Alignment is exhaustive when `s!` fits in
/// `align_budget` cut-norm evaluations; otherwise the identity and random
/// relabelings are improved by pairwise swaps until the budget runs out.
/// The result upper-bounds the infimum over all measure-preserving maps.
pub fn subsample_cut_distance(
    a: &DMatrix<f64>,
    subset: &[usize],
    align_budget: usize,
    seed: u64,
) -> Result<f64> {
    let n = a.nrows();
    if n == 0 || n != a.ncols() {
        return Err(Error::input("cut distance needs a nonempty square matrix"));
    }
    let s = subset.len();
    if s == 0 {
        return Err(Error::input("subsample must be nonempty"));
    }
    if subset.iter().any(|&i| i >= n) {
        return Err(Error::input(format!("subsample index out of range for n={n}")));
    }
    let cells = common_refinement(n, s);
    if cells.len() > MAX_EXACT_BLOCKS {
        return Err(Error::Size(format!(
            "common refinement of n={n} and s={s} has {} cells; at most {MAX_EXACT_BLOCKS} supported",
            cells.len()
        )));
    }
    let aligned = |perm: &[usize]| {
        let c = cells.len();
        DMatrix::from_fn(c, c, |p, q| {
            let (ip, kp, wp) = cells[p];
            let (iq, kq, wq) = cells[q];
            wp * wq * (a[(ip, iq)] - a[(subset[perm[kp]], subset[perm[kq]])])
        })
    };
    let distance = |perm: &[usize]| max_block_sum(&aligned(perm));
    // Exact distance only when it could come in under `bound`.
    let distance_below = |perm: &[usize], bound: f64| -> Result<Option<f64>> {
        let diff = aligned(perm);
        if block_sum_lower_bound(&diff) > bound * (1.0 + 1e-12) {
            return Ok(None);
        }
        max_block_sum(&diff).map(Some)
    };

    let identity: Vec<usize> = (0..s).collect();
    let mut best = distance(&identity)?;
    let mut budget = align_budget.saturating_sub(1);

    let exhaustive = (1..=s).try_fold(1usize, |acc, k| acc.checked_mul(k))
        .is_some_and(|count| count <= align_budget);
    if exhaustive {
        let mut perm = identity;
        while next_permutation(&mut perm) {
            if let Some(d) = distance_below(&perm, best)? {
                best = best.min(d);
            }
        }
        return Ok(best);
    }

    let mut rng = seed::rng(seed);
    let mut start = identity;
    let mut current = best;
    'restarts: while budget > 0 {
        let mut improved = true;
        while improved {
            improved = false;
            for i in 0..s {
                for j in i + 1..s {
                    if budget == 0 {
                        break 'restarts;
                    }
                    start.swap(i, j);
                    budget -= 1;
                    match distance_below(&start, current)? {
                        Some(d) if d < current => {
                            current = d;
                            best = best.min(d);
                            improved = true;
                        }
                        _ => start.swap(i, j),
                    }
                }
            }
        }
        if budget == 0 {
            break;
        }
        start.shuffle(&mut rng);
        budget -= 1;
        current = distance(&start)?;
        best = best.min(current);
    }
    Ok(best)
}

/// Cheap lower bound on `max_block_sum`: alternating maximization from
/// the full row set and from every single row, for both signs.
fn block_sum_lower_bound(a: &DMatrix<f64>) -> f64 {
    let m = a.nrows();
    let mut best: f64 = 0.0;
    for sign in [1.0, -1.0] {
        best = best.max(climb(a, sign, vec![true; m]));
        for i in 0..m {
            let mut rows = vec![false; m];
            rows[i] = true;
            best = best.max(climb(a, sign, rows));
        }
    }
    best
}

/// Advances to the next permutation in lexicographic order.
fn next_permutation(p: &mut [usize]) -> bool {
    let Some(i) = (1..p.len()).rev().find(|&i| p[i - 1] < p[i]) else {
        return false;
    };
    let j = (i..p.len()).rev().find(|&j| p[j] > p[i - 1]).unwrap();
    p.swap(i - 1, j);
    p[i..].reverse();
    true
}

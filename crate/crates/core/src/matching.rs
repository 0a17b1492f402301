//! IoU, the gated distance matrix, optimal bipartite assignment and the
//! post-assignment gate filter.
//!
//! Every metric family matches ground truth to predictions through this
//! module, so tie-breaking here decides reproducibility everywhere else.

use crate::model::{ActorObservation, BoundingBox};

/// Default IoU gate.
pub const DEFAULT_IOU_THRESHOLD: f64 = 0.5;

/// Cost given to gated (below-threshold) pairs.
pub const GATED_COST: f64 = 1.0;

/// Intersection over union of two boxes, using continuous area.
pub fn iou(a: &BoundingBox, b: &BoundingBox) -> f64 {
    let iw = a.x2.min(b.x2) - a.x1.max(b.x1);
    let ih = a.y2.min(b.y2) - a.y1.max(b.y1);
    if iw <= 0.0 || ih <= 0.0 {
        return 0.0;
    }
    let inter = iw * ih;
    let union = a.area() + b.area() - inter;
    if union <= 0.0 {
        return 0.0;
    }
    (inter / union).clamp(0.0, 1.0)
}

/// Dense row-major cost matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CostMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl CostMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols, "cost matrix shape mismatch");
        Self { rows, cols, data }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let cols = rows.first().map_or(0, Vec::len);
        let data: Vec<f64> = rows.iter().flat_map(|r| r.iter().copied()).collect();
        Self::new(rows.len(), cols, data)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self.get(j, i))
    }

    /// Exactly rounded total of the given pairs.
    pub fn total(&self, pairs: &[(usize, usize)]) -> f64 {
        exact_sum(pairs.iter().map(|&(i, j)| self.get(i, j)))
    }
}

/// Gated GT-by-prediction distance matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct AssignmentProblem {
    pub cost: CostMatrix,
}

/// One-to-one matching between rows and columns.
#[derive(Debug, Clone, PartialEq)]
pub struct Assignment {
    /// Surviving `(row, col)` pairs, sorted by row.
    pub pairs: Vec<(usize, usize)>,
    /// Optimal total cost before gate filtering.
    pub total_cost: f64,
    rows: usize,
    cols: usize,
}

impl Assignment {
    /// Boolean matrix view: `m[i][j]` is true iff `(i, j)` is a pair.
    pub fn to_matrix(&self) -> Vec<Vec<bool>> {
        let mut m = vec![vec![false; self.cols]; self.rows];
        for &(i, j) in &self.pairs {
            m[i][j] = true;
        }
        m
    }

    pub fn col_for_row(&self, row: usize) -> Option<usize> {
        self.pairs.iter().find(|p| p.0 == row).map(|p| p.1)
    }
}

/// `D[i][j] = 1` when `iou < threshold`, else `1 - iou`.
pub fn build_cost_matrix(
    gt: &[BoundingBox],
    pred: &[BoundingBox],
    iou_threshold: f64,
) -> AssignmentProblem {
    let cost = CostMatrix::from_fn(gt.len(), pred.len(), |i, j| {
        let v = iou(&gt[i], &pred[j]);
        if v < iou_threshold {
            GATED_COST
        } else {
            1.0 - v
        }
    });
    AssignmentProblem { cost }
}

/// Solves the assignment and drops pairs sitting on gated entries.
pub fn solve_assignment(problem: &AssignmentProblem) -> Assignment {
    let cost = &problem.cost;
    let all = linear_sum_assignment(cost);
    let total_cost = cost.total(&all);
    let pairs = all
        .into_iter()
        .filter(|&(i, j)| cost.get(i, j) < GATED_COST)
        .collect();
    Assignment {
        pairs,
        total_cost,
        rows: cost.rows(),
        cols: cost.cols(),
    }
}

/// Gated one-to-one matching of the observations at one keyframe.
/// Returns `(gt index, pred index)` pairs, all with IoU at or above the gate.
pub fn match_frame(
    gt: &[ActorObservation],
    pred: &[ActorObservation],
    iou_threshold: f64,
) -> Vec<(usize, usize)> {
    if gt.is_empty() || pred.is_empty() {
        return Vec::new();
    }
    let g: Vec<BoundingBox> = gt.iter().map(|o| o.bbox).collect();
    let p: Vec<BoundingBox> = pred.iter().map(|o| o.bbox).collect();
    solve_assignment(&build_cost_matrix(&g, &p, iou_threshold)).pairs
}

/// Minimum-cost assignment of `min(rows, cols)` pairs.
///
/// Among equal-cost optima the lexicographically smallest pair list wins.
/// Returned pairs are sorted by row.
///
/// Costs are rescaled to a common fixed-point integer grid whenever their
/// binary exponents fit in 128 bits, which always holds for `1 - IoU`
/// costs. The optimum and its ties are then decided exactly rather than up
/// to rounding. Matrices outside that range fall back to `f64` duals.
pub fn linear_sum_assignment(cost: &CostMatrix) -> Vec<(usize, usize)> {
    let (rows, cols) = (cost.rows(), cost.cols());
    if rows == 0 || cols == 0 {
        return Vec::new();
    }
    assert!(
        cost.data.iter().all(|c| c.is_finite()),
        "cost matrix must be finite"
    );
    let n = rows.max(cols);
    match to_fixed_point(&cost.data, n) {
        Some(data) => solve_padded(rows, cols, &data, 0i128),
        None => {
            let scale = cost.data.iter().fold(1.0f64, |m, c| m.max(c.abs()));
            solve_padded(rows, cols, &cost.data, 1e-9 * scale)
        }
    }
}

/// Scalar the assignment can be solved over.
trait Cost: Copy + PartialOrd + std::ops::Add<Output = Self> + std::ops::Sub<Output = Self> {
    const ZERO: Self;
    const INF: Self;
    fn abs(self) -> Self;
    /// Sum that is exact, or correctly rounded for floats.
    fn total(values: Vec<Self>) -> Self;
}

impl Cost for f64 {
    const ZERO: Self = 0.0;
    const INF: Self = f64::INFINITY;
    fn abs(self) -> Self {
        f64::abs(self)
    }
    fn total(values: Vec<Self>) -> Self {
        exact_sum(values)
    }
}

impl Cost for i128 {
    const ZERO: Self = 0;
    const INF: Self = i128::MAX;
    fn abs(self) -> Self {
        i128::abs(self)
    }
    fn total(values: Vec<Self>) -> Self {
        values.into_iter().sum()
    }
}

/// Splits a finite nonzero float into an odd mantissa and a binary exponent.
fn decompose(x: f64) -> (i128, i32) {
    let bits = x.to_bits();
    let exp_bits = ((bits >> 52) & 0x7ff) as i32;
    let frac = bits & ((1u64 << 52) - 1);
    let (mut m, mut e) = if exp_bits == 0 {
        (frac, -1074)
    } else {
        (frac | (1u64 << 52), exp_bits - 1075)
    };
    let tz = m.trailing_zeros();
    m >>= tz;
    e += tz as i32;
    let m = m as i128;
    (if x < 0.0 { -m } else { m }, e)
}

/// Exact integer images of `data` on the grid `2^e_min`, or `None` when the
/// values, the duals and the path sums for an `n x n` problem could overflow.
fn to_fixed_point(data: &[f64], n: usize) -> Option<Vec<i128>> {
    let parts: Vec<Option<(i128, i32)>> =
        data.iter().map(|&x| (x != 0.0).then(|| decompose(x))).collect();
    let Some(e_min) = parts.iter().flatten().map(|&(_, e)| e).min() else {
        return Some(vec![0; data.len()]);
    };
    let headroom = 2 * (usize::BITS - n.leading_zeros()) + 4;
    let budget = 127u32.checked_sub(headroom)?;
    parts
        .into_iter()
        .map(|p| match p {
            None => Some(0),
            Some((m, e)) => {
                let shift = (e - e_min) as u32;
                let width = 128 - m.unsigned_abs().leading_zeros();
                (shift + width <= budget).then(|| m << shift)
            }
        })
        .collect()
}

/// Pads to square, solves, then walks rows in order moving each onto the
/// smallest column it can take without losing optimality.
fn solve_padded<T: Cost>(rows: usize, cols: usize, data: &[T], eps: T) -> Vec<(usize, usize)> {
    let n = rows.max(cols);
    // Dummy rows/columns cost 0 and sit after every real index, so being
    // unassigned ranks last in the lexicographic order.
    let padded = |i: usize, j: usize| {
        if i < rows && j < cols {
            data[i * cols + j]
        } else {
            T::ZERO
        }
    };
    let (mut col_of, u, v) = hungarian(n, &padded);
    let tight = |i: usize, j: usize| (padded(i, j) - u[i] - v[j]).abs() <= eps;

    let mut row_of = vec![0usize; n];
    for (i, &j) in col_of.iter().enumerate() {
        row_of[j] = i;
    }

    for i in 0..rows {
        let freed = col_of[i];
        let next = reroute_targets(n, i, freed, &tight, &col_of);
        for j in 0..freed {
            let owner = row_of[j];
            if owner < i || !tight(i, j) || next[owner].is_none() {
                continue;
            }
            // Alternating path: owner of j steps to next[owner], and so on until freed.
            let mut path = Vec::new();
            let mut r = owner;
            while let Some(c) = next[r] {
                path.push((r, c));
                if c == freed {
                    break;
                }
                r = row_of[c];
            }
            let mut old_edges = vec![padded(i, freed)];
            let mut new_edges = vec![padded(i, j)];
            for &(r, c) in &path {
                old_edges.push(padded(r, col_of[r]));
                new_edges.push(padded(r, c));
            }
            if T::total(new_edges) > T::total(old_edges) {
                continue;
            }
            col_of[i] = j;
            for &(r, c) in &path {
                col_of[r] = c;
                row_of[c] = r;
            }
            row_of[j] = i;
            break;
        }
    }

    (0..rows)
        .filter(|&i| col_of[i] < cols)
        .map(|i| (i, col_of[i]))
        .collect()
}

/// Breadth-first search backwards from `freed` over tight edges.
///
/// For every row after `fixed_row` that can hand its column down a chain
/// ending at `freed`, returns the column it should move to. Rows up to
/// `fixed_row` keep their columns. Following the chain from any row gives
/// a simple path because each step strictly decreases the BFS distance.
fn reroute_targets(
    n: usize,
    fixed_row: usize,
    freed: usize,
    tight: &impl Fn(usize, usize) -> bool,
    col_of: &[usize],
) -> Vec<Option<usize>> {
    let mut next: Vec<Option<usize>> = vec![None; n];
    let mut queue = std::collections::VecDeque::from([freed]);
    while let Some(c) = queue.pop_front() {
        for r in fixed_row + 1..n {
            if next[r].is_none() && tight(r, c) && col_of[r] != c {
                next[r] = Some(c);
                queue.push_back(col_of[r]);
            }
        }
    }
    next
}

/// Shortest augmenting path Hungarian method on an `n x n` matrix.
///
/// Returns the column of each row together with row and column duals
/// satisfying `c[i][j] >= u[i] + v[j]`, with equality on matched pairs.
fn hungarian<T: Cost>(n: usize, cost: &impl Fn(usize, usize) -> T) -> (Vec<usize>, Vec<T>, Vec<T>) {
    // 1-based internally; index 0 is the virtual root.
    let mut u = vec![T::ZERO; n + 1];
    let mut v = vec![T::ZERO; n + 1];
    let mut owner = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        owner[0] = i;
        let mut j0 = 0usize;
        // every unused entry is overwritten by the first scan, so INF never
        // takes part in arithmetic
        let mut minv = vec![T::INF; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = owner[j0];
            let mut delta = T::INF;
            let mut j1 = 0usize;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[owner[j]] = u[owner[j]] + delta;
                    v[j] = v[j] - delta;
                } else {
                    minv[j] = minv[j] - delta;
                }
            }
            j0 = j1;
            if owner[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            owner[j0] = owner[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut col_of = vec![0usize; n];
    for j in 1..=n {
        col_of[owner[j] - 1] = j - 1;
    }
    (col_of, u[1..].to_vec(), v[1..].to_vec())
}

/// Correctly rounded floating-point sum (Shewchuk partials).
///
/// Order-independent, so two pair sets with equal exact totals compare equal.
pub fn exact_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut partials: Vec<f64> = Vec::new();
    for mut x in values {
        let mut kept = 0;
        for k in 0..partials.len() {
            let mut y = partials[k];
            if x.abs() < y.abs() {
                std::mem::swap(&mut x, &mut y);
            }
            let hi = x + y;
            let lo = y - (hi - x);
            if lo != 0.0 {
                partials[kept] = lo;
                kept += 1;
            }
            x = hi;
        }
        partials.truncate(kept);
        partials.push(x);
    }
    let mut n = partials.len();
    if n == 0 {
        return 0.0;
    }
    n -= 1;
    let mut hi = partials[n];
    let mut lo = 0.0;
    while n > 0 {
        let x = hi;
        n -= 1;
        let y = partials[n];
        hi = x + y;
        let yr = hi - x;
        lo = y - yr;
        if lo != 0.0 {
            break;
        }
    }
    // Round-half-even correction when the tail would be lost.
    if n > 0 && ((lo < 0.0 && partials[n - 1] < 0.0) || (lo > 0.0 && partials[n - 1] > 0.0)) {
        let y = lo * 2.0;
        let x = hi + y;
        if y == x - hi {
            hi = x;
        }
    }
    hi
}

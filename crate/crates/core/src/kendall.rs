//! Pairwise Kendall's tau and the empirical Kendall's tau matrix.
//!
//! Every statistic here uses `sgn(0) = 0`, so tied pairs contribute nothing
//! to the numerator while still counting in the `n(n-1)/2` normalisation
//! (tau-a). With tied observations this differs from the tau-b statistic
//! reported by most statistics packages.

use std::cmp::Ordering;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{arg_err, Error, Result};

/// An `n x d` sample: rows are observations, columns are variables.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleMatrix {
    data: DMatrix<f64>,
}

impl SampleMatrix {
    pub fn new(data: DMatrix<f64>) -> Result<Self> {
        if data.nrows() < 2 {
            return arg_err(format!("need at least 2 observations, got {}", data.nrows()));
        }
        if data.ncols() < 1 {
            return arg_err("need at least one column");
        }
        crate::linalg::check_finite(&data)?;
        Ok(Self { data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let d = rows.first().map_or(0, Vec::len);
        if let Some(i) = rows.iter().position(|r| r.len() != d) {
            return Err(Error::Dimension(format!(
                "row {i} has {} entries, expected {d}",
                rows[i].len()
            )));
        }
        Self::new(DMatrix::from_fn(n, d, |i, j| rows[i][j]))
    }

    pub fn n(&self) -> usize {
        self.data.nrows()
    }

    pub fn d(&self) -> usize {
        self.data.ncols()
    }

    pub fn data(&self) -> &DMatrix<f64> {
        &self.data
    }

    pub fn column(&self, k: usize) -> Vec<f64> {
        self.data.column(k).iter().copied().collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KendallKind {
    Empirical,
    Population,
}

/// A symmetric `d x d` matrix of Kendall's tau values.
#[derive(Debug, Clone, PartialEq)]
pub struct KendallMatrix {
    values: DMatrix<f64>,
    kind: KendallKind,
}

impl KendallMatrix {
    /// Wraps a matrix after checking symmetry and the `[-1, 1]` range.
    pub fn new(values: DMatrix<f64>, kind: KendallKind) -> Result<Self> {
        crate::linalg::check_symmetric(&values, 0.0)?;
        crate::linalg::check_finite(&values)?;
        for ((r, c), v) in values.iter().enumerate().map(|(i, v)| ((i % values.nrows(), i / values.nrows()), v)) {
            if v.abs() > 1.0 {
                return Err(Error::Domain { row: r, col: c, value: *v });
            }
        }
        Ok(Self { values, kind })
    }

    pub(crate) fn from_parts_unchecked(values: DMatrix<f64>, kind: KendallKind) -> Self {
        Self { values, kind }
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn into_values(self) -> DMatrix<f64> {
        self.values
    }

    pub fn kind(&self) -> KendallKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.values.nrows()
    }
}

fn check_pair(x: &[f64], y: &[f64]) -> Result<()> {
    if x.len() != y.len() {
        return arg_err(format!("length mismatch: {} vs {}", x.len(), y.len()));
    }
    if x.len() < 2 {
        return arg_err(format!("need n >= 2, got {}", x.len()));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return arg_err("non-finite entry");
    }
    Ok(())
}

fn sgn(v: f64) -> i64 {
    if v > 0.0 {
        1
    } else if v < 0.0 {
        -1
    } else {
        0
    }
}

fn pair_count(n: usize) -> u64 {
    let n = n as u64;
    n * (n - 1) / 2
}

/// Kendall's tau by direct enumeration of all `n(n-1)/2` pairs.
pub fn kendall_tau_pair_naive(x: &[f64], y: &[f64]) -> Result<f64> {
    check_pair(x, y)?;
    let n = x.len();
    let mut sum: i64 = 0;
    for i in 0..n {
        for j in (i + 1)..n {
            sum += sgn(x[i] - x[j]) * sgn(y[i] - y[j]);
        }
    }
    Ok(sum as f64 / pair_count(n) as f64)
}

/// Dense ranks of a column plus the permutation sorting it and the number of
/// tied pairs it contains.
struct ColumnRanks {
    ranks: Vec<u32>,
    order: Vec<u32>,
    tied_pairs: u64,
}

impl ColumnRanks {
    fn new(x: &[f64]) -> Self {
        let n = x.len();
        let mut order: Vec<u32> = (0..n as u32).collect();
        // Inputs are finite, so partial_cmp is total; it also treats -0.0 == 0.0
        // which matches sgn(x_i - x_j) = 0.
        order.sort_by(|&a, &b| x[a as usize].partial_cmp(&x[b as usize]).unwrap_or(Ordering::Equal));
        let mut ranks = vec![0u32; n];
        let mut tied_pairs = 0u64;
        let mut rank = 0u32;
        let mut run = 1u64;
        for w in 0..n {
            if w > 0 {
                if x[order[w] as usize] == x[order[w - 1] as usize] {
                    run += 1;
                } else {
                    tied_pairs += run * (run - 1) / 2;
                    run = 1;
                    rank += 1;
                }
            }
            ranks[order[w] as usize] = rank;
        }
        tied_pairs += run * (run - 1) / 2;
        Self { ranks, order, tied_pairs }
    }
}

/// Counts strict inversions (`i < j`, `v[i] > v[j]`) with a bottom-up merge
/// sort. `v` ends up sorted.
fn count_inversions(v: &mut [u32], buf: &mut [u32]) -> u64 {
    let n = v.len();
    let mut inversions = 0u64;
    let mut width = 1;
    let (mut src, mut dst) = (v, buf);
    let mut swapped = false;
    while width < n {
        let mut lo = 0;
        while lo < n {
            let mid = (lo + width).min(n);
            let hi = (lo + 2 * width).min(n);
            let (mut i, mut j, mut k) = (lo, mid, lo);
            while i < mid && j < hi {
                if src[i] <= src[j] {
                    dst[k] = src[i];
                    i += 1;
                } else {
                    dst[k] = src[j];
                    inversions += (mid - i) as u64;
                    j += 1;
                }
                k += 1;
            }
            dst[k..k + (mid - i)].copy_from_slice(&src[i..mid]);
            k += mid - i;
            dst[k..k + (hi - j)].copy_from_slice(&src[j..hi]);
            lo = hi;
        }
        std::mem::swap(&mut src, &mut dst);
        swapped = !swapped;
        width *= 2;
    }
    if swapped {
        dst.copy_from_slice(src);
    }
    inversions
}

/// Tau-a from precomputed column ranks via Knight's algorithm:
/// `C - D = N0 - n_x - n_y + n_xy - 2 * swaps`.
fn tau_from_ranks(x: &ColumnRanks, y: &ColumnRanks, scratch: &mut (Vec<u32>, Vec<u32>)) -> f64 {
    let n = x.ranks.len();
    let (ys, buf) = scratch;
    ys.clear();
    ys.extend(x.order.iter().map(|&i| y.ranks[i as usize]));
    buf.resize(n, 0);

    // Within runs tied in x, order by y so those pairs are never inversions,
    // and count pairs tied in both coordinates.
    let mut joint_ties = 0u64;
    let mut start = 0;
    while start < n {
        let xr = x.ranks[x.order[start] as usize];
        let mut end = start + 1;
        while end < n && x.ranks[x.order[end] as usize] == xr {
            end += 1;
        }
        if end - start > 1 {
            let run = &mut ys[start..end];
            run.sort_unstable();
            let mut k = 1;
            let mut c = 1u64;
            while k <= run.len() {
                if k < run.len() && run[k] == run[k - 1] {
                    c += 1;
                } else {
                    joint_ties += c * (c - 1) / 2;
                    c = 1;
                }
                k += 1;
            }
        }
        start = end;
    }

    let swaps = count_inversions(ys, buf);
    let total = pair_count(n) as i64;
    let numer = total - x.tied_pairs as i64 - y.tied_pairs as i64 + joint_ties as i64 - 2 * swaps as i64;
    numer as f64 / total as f64
}

/// Kendall's tau in `O(n log n)` by merge-sort inversion counting. Agrees
/// with [`kendall_tau_pair_naive`] including on tied data.
pub fn kendall_tau_pair_fast(x: &[f64], y: &[f64]) -> Result<f64> {
    check_pair(x, y)?;
    let rx = ColumnRanks::new(x);
    let ry = ColumnRanks::new(y);
    Ok(tau_from_ranks(&rx, &ry, &mut (Vec::new(), Vec::new())))
}

/// The empirical Kendall's tau matrix of a sample.
///
/// Column pairs are processed in parallel; the output does not depend on
/// the thread count. A diagonal entry is `1` unless its column has ties.
pub fn kendall_tau_matrix(sample: &SampleMatrix) -> KendallMatrix {
    let d = sample.d();
    let n = sample.n();
    let cols: Vec<ColumnRanks> = (0..d)
        .into_par_iter()
        .map(|k| ColumnRanks::new(&sample.column(k)))
        .collect();
    let pairs: Vec<(usize, usize)> = (0..d).flat_map(|k| ((k + 1)..d).map(move |l| (k, l))).collect();
    let taus: Vec<f64> = pairs
        .par_iter()
        .map_init(
            || (Vec::with_capacity(n), Vec::with_capacity(n)),
            |scratch, &(k, l)| tau_from_ranks(&cols[k], &cols[l], scratch),
        )
        .collect();
    let total = pair_count(n) as f64;
    let mut values = DMatrix::zeros(d, d);
    for (k, c) in cols.iter().enumerate() {
        values[(k, k)] = (pair_count(n) - c.tied_pairs) as f64 / total;
    }
    for (&(k, l), &t) in pairs.iter().zip(&taus) {
        values[(k, l)] = t;
        values[(l, k)] = t;
    }
    KendallMatrix::from_parts_unchecked(values, KendallKind::Empirical)
}

/// Reference implementation of [`kendall_tau_matrix`] built on the naive
/// pair statistic. Quadratic in `n`; meant for tests and small inputs.
pub fn kendall_tau_matrix_naive(sample: &SampleMatrix) -> KendallMatrix {
    let d = sample.d();
    let cols: Vec<Vec<f64>> = (0..d).map(|k| sample.column(k)).collect();
    let mut values = DMatrix::zeros(d, d);
    for k in 0..d {
        for l in k..d {
            let t = kendall_tau_pair_naive(&cols[k], &cols[l]).expect("validated sample");
            values[(k, l)] = t;
            values[(l, k)] = t;
        }
    }
    KendallMatrix::from_parts_unchecked(values, KendallKind::Empirical)
}

//! From an ICA unmixing matrix to the connection-strength matrix and causal order.

use nalgebra::DMatrix;

use crate::assignment::{for_each_permutation, min_cost_assignment};
use crate::error::{Error, Result};

/// Dimension up to which permutation searches are exhaustive (8! = 40320).
pub const EXHAUSTIVE_MAX_DIM: usize = 8;

const ZERO_DIAGONAL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct RowPermutation {
    /// Permuted matrix: row `i` is row `perm[i]` of the input.
    pub dw: DMatrix<f64>,
    pub perm: Vec<usize>,
    /// Sum of `1/|dw_ii|`.
    pub cost: f64,
}

fn inverse_abs(v: f64) -> f64 {
    if v.abs() < ZERO_DIAGONAL {
        f64::INFINITY
    } else {
        1.0 / v.abs()
    }
}

fn permute_rows(m: &DMatrix<f64>, perm: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(m.nrows(), m.ncols(), |i, j| m[(perm[i], j)])
}

/// Row permutation of `w_ica` whose diagonal is furthest from zero, by `min sum 1/|w_ii|`.
///
/// Exhaustive up to [`EXHAUSTIVE_MAX_DIM`] variables, assignment solver above.
pub fn resolve_permutation(w_ica: &DMatrix<f64>) -> Result<RowPermutation> {
    let d = w_ica.nrows();
    if w_ica.ncols() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: w_ica.ncols(),
        });
    }
    // cost[src][pos]: row `src` placed at position `pos`
    let cost: Vec<Vec<f64>> = (0..d)
        .map(|src| (0..d).map(|pos| inverse_abs(w_ica[(src, pos)])).collect())
        .collect();

    let (perm, total) = if d <= EXHAUSTIVE_MAX_DIM {
        let mut best = (Vec::new(), f64::INFINITY);
        for_each_permutation(d, |p| {
            let mut c = 0.0;
            for (pos, &src) in p.iter().enumerate() {
                c += cost[src][pos];
                if c >= best.1 {
                    return;
                }
            }
            best = (p.to_vec(), c);
        });
        best
    } else {
        let big = cost
            .iter()
            .flatten()
            .filter(|c| c.is_finite())
            .fold(0.0f64, |m, &c| m.max(c))
            * (d as f64 + 1.0)
            + 1.0;
        let finite: Vec<Vec<f64>> = cost
            .iter()
            .map(|r| r.iter().map(|&c| if c.is_finite() { c } else { big }).collect())
            .collect();
        let pos_of = min_cost_assignment(&finite);
        let mut perm = vec![0; d];
        for (src, &pos) in pos_of.iter().enumerate() {
            perm[pos] = src;
        }
        let total = perm.iter().enumerate().map(|(pos, &src)| cost[src][pos]).sum();
        (perm, total)
    };
    if !total.is_finite() || perm.is_empty() && d > 0 {
        return Err(Error::NoZeroFreePermutation);
    }
    Ok(RowPermutation {
        dw: permute_rows(w_ica, &perm),
        perm,
        cost: total,
    })
}

/// Divide every row by its diagonal entry. Returns the unit-diagonal matrix and the divisors.
pub fn normalize_diagonal(dw: &DMatrix<f64>) -> Result<(DMatrix<f64>, Vec<f64>)> {
    let d = dw.nrows();
    let scale: Vec<f64> = (0..d).map(|i| dw[(i, i)]).collect();
    if let Some(i) = scale.iter().position(|&s| s == 0.0 || !s.is_finite()) {
        return Err(Error::ZeroDiagonal(i));
    }
    let mut w = DMatrix::from_fn(d, dw.ncols(), |i, j| dw[(i, j)] / scale[i]);
    for i in 0..d {
        w[(i, i)] = 1.0;
    }
    Ok((w, scale))
}

/// `B = I - W` with an exactly zero diagonal.
pub fn connection_matrix(w: &DMatrix<f64>) -> DMatrix<f64> {
    let d = w.nrows();
    let mut b = -w.clone();
    for i in 0..d {
        b[(i, i)] = 0.0;
    }
    b
}

#[derive(Debug, Clone, PartialEq)]
pub struct CausalOrder {
    /// `order[k]` is the variable at position `k`; causes come first.
    pub order: Vec<usize>,
    /// Sum of squares of entries that sit above the diagonal after permuting.
    pub residual: f64,
}

impl CausalOrder {
    pub fn position(&self, var: usize) -> usize {
        self.order
            .iter()
            .position(|&v| v == var)
            .expect("variable in order")
    }
}

fn upper_mass(b: &DMatrix<f64>, order: &[usize], bound: f64) -> f64 {
    let mut s = 0.0;
    for (i, &vi) in order.iter().enumerate() {
        for &vj in &order[i + 1..] {
            let v = b[(vi, vj)];
            s += v * v;
        }
        if s >= bound {
            return s;
        }
    }
    s
}

/// Variable ordering making `B` as close to strictly lower-triangular as possible.
///
/// Exhaustive up to [`EXHAUSTIVE_MAX_DIM`] variables; above that, variables are
/// placed greedily by least incoming mass from the not-yet-placed set, which
/// is not guaranteed optimal.
pub fn causal_order(b: &DMatrix<f64>) -> CausalOrder {
    let d = b.nrows();
    if d <= EXHAUSTIVE_MAX_DIM {
        let mut best = (Vec::new(), f64::INFINITY);
        for_each_permutation(d, |p| {
            let r = upper_mass(b, p, best.1);
            if r < best.1 {
                best = (p.to_vec(), r);
            }
        });
        let (order, residual) = best;
        return CausalOrder {
            order,
            residual: if d == 0 { 0.0 } else { residual },
        };
    }

    let mut remaining: Vec<usize> = (0..d).collect();
    let mut order = Vec::with_capacity(d);
    while !remaining.is_empty() {
        let (k, _) = remaining
            .iter()
            .enumerate()
            .map(|(k, &i)| {
                let incoming: f64 = remaining
                    .iter()
                    .filter(|&&j| j != i)
                    .map(|&j| b[(i, j)] * b[(i, j)])
                    .sum();
                (k, incoming)
            })
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .expect("non-empty");
        order.push(remaining.remove(k));
    }
    let residual = upper_mass(b, &order, f64::INFINITY);
    CausalOrder { order, residual }
}

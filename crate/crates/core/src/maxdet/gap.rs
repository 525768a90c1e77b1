//! Extended normalized duality gap.
//!
//! For feasible `(X, Z)` with `<X, Z> > sum_{c_i > 0} c_i N_i` there is a
//! unique `nu > 0` with `<X, Z> = sum_i max(c_i, nu) N_i`. With
//! `I* = {i : c_i >= nu}` the gap is
//!
//!   mu(X, Z) = (<X, Z> - sum_{I*} c_i N_i) / sum_{not I*} N_i
//!
//! which equals `nu` by construction and reduces to `<X, Z>/N` when every
//! weight is zero.

use crate::error::{Error, Result};
use crate::maxdet::problem::{BlockDiag, BlockSpec};

#[derive(Clone, Debug)]
pub struct GapInfo {
    /// Extended normalized duality gap (equals the central-path parameter).
    pub mu: f64,
    /// Root of the piecewise-linear equation.
    pub nu: f64,
    /// `in_istar[i]` iff `c_i >= nu`.
    pub in_istar: Vec<bool>,
    /// Raw inner product `<X, Z>`.
    pub inner: f64,
}

/// Solves for `nu` by scanning the breakpoints of the piecewise-linear map
/// `nu -> sum_i max(c_i, nu) N_i` (exact, no iterative root finding).
pub fn gap_info(x: &BlockDiag, z: &BlockDiag, blocks: &[BlockSpec]) -> Result<GapInfo> {
    let inner: f64 = x.dot(z);
    let floor: f64 = blocks.iter().map(|b| b.weight * b.size as f64).sum();
    if inner - floor <= 0.0 {
        return Err(Error::GapClosed);
    }

    // Blocks sorted by ascending weight.
    let mut order: Vec<usize> = (0..blocks.len()).collect();
    order.sort_by(|&a, &b| {
        blocks[a]
            .weight
            .partial_cmp(&blocks[b].weight)
            .unwrap_or(std::cmp::Ordering::Equal)
    });

    // phi(nu) on the segment past breakpoint k:
    //   phi(nu) = suffix_cn[k] + nu * prefix_n[k]
    // where the first k sorted blocks contribute nu and the rest c_i.
    let mut nu = f64::NAN;
    let mut prefix_n = 0.0;
    let mut suffix_cn = floor;
    for (k, &i) in order.iter().enumerate() {
        let _ = k;
        let c = blocks[i].weight;
        let n = blocks[i].size as f64;
        // Candidate segment: nu in (previous breakpoint, c]. phi at nu = c:
        let phi_at_c = suffix_cn + prefix_n * c;
        if prefix_n > 0.0 && phi_at_c >= inner {
            nu = (inner - suffix_cn) / prefix_n;
            break;
        }
        prefix_n += n;
        suffix_cn -= c * n;
    }
    if nu.is_nan() {
        // All blocks below nu.
        nu = inner / prefix_n;
    }

    let in_istar: Vec<bool> = blocks.iter().map(|b| b.weight >= nu).collect();
    let num: f64 = inner
        - blocks
            .iter()
            .zip(&in_istar)
            .filter(|(_, &s)| s)
            .map(|(b, _)| b.weight * b.size as f64)
            .sum::<f64>();
    let den: f64 = blocks
        .iter()
        .zip(&in_istar)
        .filter(|(_, &s)| !s)
        .map(|(b, _)| b.size as f64)
        .sum();
    debug_assert!(den > 0.0);
    let mu = num / den;
    debug_assert!((mu - nu).abs() <= 1e-9 * (1.0 + nu.abs()));
    Ok(GapInfo {
        mu,
        nu,
        in_istar,
        inner,
    })
}

/// The scalar gap value; see [`gap_info`] for the full decomposition.
pub fn extended_duality_gap(x: &BlockDiag, z: &BlockDiag, blocks: &[BlockSpec]) -> Result<f64> {
    Ok(gap_info(x, z, blocks)?.mu)
}

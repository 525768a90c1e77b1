//! Scaled Newton direction.
//!
//! With NT scaling the linearized complementarity equation per block,
//! `H_P(X dZ + dX Z) = w I - H_P(X Z)`, collapses to
//!
//!   dX = w Z^{-1} - X - G dZ G
//!
//! with `G` the NT scaling point; eliminating `dZ = R_d - A*(dy)` leaves the
//! reduced system `A(G A*(dy) G) = r_p - A(w Z^{-1} - X) + A(G R_d G)`. The
//! reduced matrix `M_jk = <A_j, G A_k G>` is assembled blockwise; for
//! time-chained problems rows couple only neighboring time steps and `M` is
//! factored as a banded matrix.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{inv_pd, sym_eigen_sorted, symmetrize, SymBandMatrix};
use crate::maxdet::problem::{BlockDiag, MaxDetProblem};

/// Spectral factorizations of all row coefficients touching one block,
/// flattened as `(row, lambda, unit eigenvector)` triples.
///
/// Almost every coefficient is an entry functional or a rank-two outer
/// product, so `<A_j, G A_k G>` reduces to a handful of squared dot
/// products: for `A = sum_l lambda_l w_l w_l^T` and
/// `B = sum_m kappa_m v_m v_m^T`,
///
///   tr(A G B G) = sum_{l,m} lambda_l kappa_m (w_l^T G v_m)^2.
pub struct FactoredRows {
    rows: Vec<usize>,
    lambdas: Vec<f64>,
    vectors: Vec<DVector<f64>>,
}

/// Row/term incidence per block, coefficient factorizations, and the
/// bandwidth of the reduced system.
pub struct Layout {
    /// For each block: `(row index, term index within that row)`.
    pub rows_by_block: Vec<Vec<(usize, usize)>>,
    factored: Vec<FactoredRows>,
    pub bandwidth: usize,
    pub use_band: bool,
}

impl Layout {
    pub fn build(p: &MaxDetProblem) -> Layout {
        let mut rows_by_block = vec![Vec::new(); p.blocks.len()];
        let mut factored: Vec<FactoredRows> = (0..p.blocks.len())
            .map(|_| FactoredRows {
                rows: Vec::new(),
                lambdas: Vec::new(),
                vectors: Vec::new(),
            })
            .collect();
        for (j, row) in p.rows.iter().enumerate() {
            for (t, term) in row.terms.iter().enumerate() {
                rows_by_block[term.block].push((j, t));
                let (vals, q) = sym_eigen_sorted(&term.coeff);
                let lmax = vals.iter().fold(0.0f64, |a, v| a.max(v.abs()));
                let fac = &mut factored[term.block];
                for (idx, &lambda) in vals.iter().enumerate() {
                    if lambda.abs() > 1e-13 * lmax {
                        fac.rows.push(j);
                        fac.lambdas.push(lambda);
                        fac.vectors.push(q.column(idx).into_owned());
                    }
                }
            }
        }
        let mut bandwidth = 0usize;
        for rows in &rows_by_block {
            if !rows.is_empty() {
                let lo = rows.iter().map(|&(j, _)| j).min().unwrap();
                let hi = rows.iter().map(|&(j, _)| j).max().unwrap();
                bandwidth = bandwidth.max(hi - lo);
            }
        }
        let m = p.rows.len();
        let use_band = p.time_chained && m > 0 && bandwidth + 1 < m / 2;
        Layout {
            rows_by_block,
            factored,
            bandwidth,
            use_band,
        }
    }
}

/// Reduced Newton matrix with a dense or banded backend.
pub enum NormalMatrix {
    Dense {
        mat: DMatrix<f64>,
        factor: Option<nalgebra::Cholesky<f64, nalgebra::Dyn>>,
    },
    Band {
        mat: SymBandMatrix,
        factor: Option<SymBandMatrix>,
    },
}

impl NormalMatrix {
    fn add(&mut self, i: usize, j: usize, v: f64) {
        match self {
            NormalMatrix::Dense { mat, .. } => {
                mat[(i, j)] += v;
                if i != j {
                    mat[(j, i)] += v;
                }
            }
            NormalMatrix::Band { mat, .. } => mat.add(i, j, v),
        }
    }

    /// Cholesky-factors the matrix; on failure adds `1e-12 I` once and
    /// retries before giving up.
    pub fn factorize(&mut self) -> Result<()> {
        for attempt in 0..2 {
            let ok = match self {
                NormalMatrix::Dense { mat, factor } => {
                    *factor = mat.clone().cholesky();
                    factor.is_some()
                }
                NormalMatrix::Band { mat, factor } => {
                    let mut f = mat.clone();
                    match f.cholesky_in_place() {
                        Ok(()) => {
                            *factor = Some(f);
                            true
                        }
                        Err(_) => false,
                    }
                }
            };
            if ok {
                return Ok(());
            }
            if attempt == 0 {
                match self {
                    NormalMatrix::Dense { mat, .. } => {
                        for i in 0..mat.nrows() {
                            mat[(i, i)] += 1e-12;
                        }
                    }
                    NormalMatrix::Band { mat, .. } => mat.add_diagonal(1e-12),
                }
            }
        }
        Err(Error::Numerical(
            "reduced Newton system is singular after regularization".into(),
        ))
    }

    /// Solves against the factorization with one step of iterative
    /// refinement.
    pub fn solve(&self, rhs: &DVector<f64>) -> Result<DVector<f64>> {
        let raw_solve = |b: &DVector<f64>| -> Result<DVector<f64>> {
            match self {
                NormalMatrix::Dense { factor, .. } => factor
                    .as_ref()
                    .map(|f| f.solve(b))
                    .ok_or_else(|| Error::Numerical("normal matrix not factored".into())),
                NormalMatrix::Band { factor, .. } => factor
                    .as_ref()
                    .map(|f| f.solve_factored(b))
                    .ok_or_else(|| Error::Numerical("normal matrix not factored".into())),
            }
        };
        let mut x = raw_solve(rhs)?;
        let resid = rhs - self.matvec(&x);
        let correction = raw_solve(&resid)?;
        x += correction;
        Ok(x)
    }

    fn matvec(&self, x: &DVector<f64>) -> DVector<f64> {
        match self {
            NormalMatrix::Dense { mat, .. } => mat * x,
            NormalMatrix::Band { mat, .. } => mat.matvec(x),
        }
    }
}

/// Assembles `M_jk = sum_i <A_j^i, G_i A_k^i G_i>` from the spectral
/// factorizations of the coefficients.
pub fn assemble_normal(p: &MaxDetProblem, layout: &Layout, g: &[DMatrix<f64>]) -> NormalMatrix {
    let m = p.rows.len();
    let mut normal = if layout.use_band {
        NormalMatrix::Band {
            mat: SymBandMatrix::zeros(m, layout.bandwidth),
            factor: None,
        }
    } else {
        NormalMatrix::Dense {
            mat: DMatrix::zeros(m, m),
            factor: None,
        }
    };
    for (block, fac) in layout.factored.iter().enumerate() {
        let count = fac.vectors.len();
        if count == 0 {
            continue;
        }
        let gi = &g[block];
        let gw: Vec<DVector<f64>> = fac.vectors.iter().map(|w| gi * w).collect();
        for q in 0..count {
            let (row_q, lam_q) = (fac.rows[q], fac.lambdas[q]);
            for p_idx in 0..=q {
                let dot = fac.vectors[p_idx].dot(&gw[q]);
                let contrib = fac.lambdas[p_idx] * lam_q * dot * dot;
                if contrib == 0.0 {
                    continue;
                }
                let row_p = fac.rows[p_idx];
                if p_idx == q {
                    normal.add(row_p, row_q, contrib);
                } else if row_p == row_q {
                    // Both orderings of distinct eigenpairs feed the same
                    // diagonal entry.
                    normal.add(row_p, row_q, 2.0 * contrib);
                } else {
                    normal.add(row_p.min(row_q), row_p.max(row_q), contrib);
                }
            }
        }
    }
    normal
}

/// The primal/dual/complementarity step.
pub struct Direction {
    pub dx: BlockDiag,
    pub dy: DVector<f64>,
    pub dz: BlockDiag,
}

/// Solves the scaled Newton system at `(x, y, z)` for per-block
/// complementarity targets `w_i` (so the step aims at `X_i Z_i = w_i I`).
pub fn newton_direction(
    p: &MaxDetProblem,
    layout: &Layout,
    x: &BlockDiag,
    y: &DVector<f64>,
    z: &BlockDiag,
    g: &[DMatrix<f64>],
    targets: &[f64],
) -> Result<Direction> {
    let r_p = &p.rhs - p.apply_a(x);
    // R_d = C - A*(y) - Z
    let aty = p.apply_at(y);
    let r_d = BlockDiag {
        blocks: p
            .cost
            .iter()
            .zip(&aty.blocks)
            .zip(&z.blocks)
            .map(|((c, a), zb)| c - a - zb)
            .collect(),
    };
    // e_i = w_i Z_i^{-1} - X_i
    let mut e = BlockDiag::zeros_like(&p.blocks);
    for i in 0..p.blocks.len() {
        let zinv = inv_pd(&z.blocks[i], "dual block in Newton step")?;
        e.blocks[i] = zinv * targets[i] - &x.blocks[i];
        symmetrize(&mut e.blocks[i]);
    }
    // rhs = r_p - A(e) + A(G R_d G)
    let grdg = BlockDiag {
        blocks: g
            .iter()
            .zip(&r_d.blocks)
            .map(|(gi, r)| {
                let mut v = gi * r * gi;
                symmetrize(&mut v);
                v
            })
            .collect(),
    };
    let rhs = r_p - p.apply_a(&e) + p.apply_a(&grdg);

    let dy = if p.rows.is_empty() {
        DVector::zeros(0)
    } else {
        let mut normal = assemble_normal(p, layout, g);
        normal.factorize()?;
        normal.solve(&rhs)?
    };

    // dZ = R_d - A*(dy); dX = e - G dZ G
    let atdy = p.apply_at(&dy);
    let mut dz = BlockDiag::zeros_like(&p.blocks);
    let mut dx = BlockDiag::zeros_like(&p.blocks);
    for i in 0..p.blocks.len() {
        dz.blocks[i] = &r_d.blocks[i] - &atdy.blocks[i];
        symmetrize(&mut dz.blocks[i]);
        dx.blocks[i] = &e.blocks[i] - &g[i] * &dz.blocks[i] * &g[i];
        symmetrize(&mut dx.blocks[i]);
    }
    Ok(Direction { dx, dy, dz })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::maxdet::problem::{BlockSpec, EqRow};
    use crate::maxdet::scaling::nt_point;

    fn scalar_unconstrained() -> MaxDetProblem {
        MaxDetProblem::new(
            vec![BlockSpec {
                size: 1,
                weight: 1.0,
            }],
            vec![DMatrix::from_element(1, 1, 1.0)],
        )
    }

    fn nt_points(x: &BlockDiag, z: &BlockDiag) -> Vec<DMatrix<f64>> {
        x.blocks
            .iter()
            .zip(&z.blocks)
            .map(|(xb, zb)| nt_point(xb, zb).unwrap().g)
            .collect()
    }

    #[test]
    fn zero_direction_at_centered_point() {
        // Feasible, exactly centered, targets match products: direction is 0.
        let p = scalar_unconstrained();
        let layout = Layout::build(&p);
        let x = BlockDiag {
            blocks: vec![DMatrix::from_element(1, 1, 2.0)],
        };
        let z = BlockDiag {
            blocks: vec![DMatrix::from_element(1, 1, 1.0)],
        };
        // x z = 2; dual feasibility needs Z = C = 1, so scale: z = 1 means
        // R_d = 0 and the product is 2. Target w = 2 keeps it centered.
        let g = nt_points(&x, &z);
        let dir = newton_direction(&p, &layout, &x, &DVector::zeros(0), &z, &g, &[2.0]).unwrap();
        assert!(dir.dx.norm() < 1e-13);
        assert!(dir.dz.norm() < 1e-13);
    }

    #[test]
    fn scalar_newton_step_toward_unit_product() {
        // min x - log x at x = 2, z = 1 (feasible), target w = 1:
        // 2 dz + dx = 1 - 2 and dz = 0 (no constraints) => dx = -1, landing
        // exactly on the optimum x = 1.
        let p = scalar_unconstrained();
        let layout = Layout::build(&p);
        let x = BlockDiag {
            blocks: vec![DMatrix::from_element(1, 1, 2.0)],
        };
        let z = BlockDiag {
            blocks: vec![DMatrix::from_element(1, 1, 1.0)],
        };
        let g = nt_points(&x, &z);
        let dir = newton_direction(&p, &layout, &x, &DVector::zeros(0), &z, &g, &[1.0]).unwrap();
        assert!((dir.dz.blocks[0][(0, 0)]).abs() < 1e-14);
        assert!((dir.dx.blocks[0][(0, 0)] + 1.0).abs() < 1e-13);
        assert!(((x.blocks[0][(0, 0)] + dir.dx.blocks[0][(0, 0)]) - 1.0).abs() < 1e-13);
    }

    #[test]
    fn linear_constraint_restored_in_one_step() {
        // Block pinned by x = 2, starting from x = 1.5: dx = 0.5 exactly.
        let mut p = MaxDetProblem::new(
            vec![BlockSpec {
                size: 1,
                weight: 1.0,
            }],
            vec![DMatrix::zeros(1, 1)],
        );
        let mut row = EqRow::new();
        row.add_entry(0, 1, 0, 0, 1.0);
        p.push_row(row, 2.0);
        let layout = Layout::build(&p);
        let x = BlockDiag {
            blocks: vec![DMatrix::from_element(1, 1, 1.5)],
        };
        let z = BlockDiag {
            blocks: vec![DMatrix::from_element(1, 1, 0.5)],
        };
        let y = DVector::from_vec(vec![-0.5]);
        let g = nt_points(&x, &z);
        let dir = newton_direction(&p, &layout, &x, &y, &z, &g, &[1.0]).unwrap();
        assert!((dir.dx.blocks[0][(0, 0)] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn direction_components_are_symmetric() {
        // 2x2 block with a trace constraint; generic strictly feasible state.
        let mut p = MaxDetProblem::new(
            vec![BlockSpec {
                size: 2,
                weight: 1.0,
            }],
            vec![DMatrix::identity(2, 2)],
        );
        let mut row = EqRow::new();
        row.add_entry(0, 2, 0, 0, 1.0);
        row.add_entry(0, 2, 1, 1, 1.0);
        p.push_row(row, 3.0);
        let layout = Layout::build(&p);
        let x = BlockDiag {
            blocks: vec![DMatrix::from_row_slice(2, 2, &[2.0, 0.3, 0.3, 1.0])],
        };
        let z = BlockDiag {
            blocks: vec![DMatrix::from_row_slice(2, 2, &[0.8, -0.1, -0.1, 1.2])],
        };
        let y = DVector::from_vec(vec![0.2]);
        let g = nt_points(&x, &z);
        let dir = newton_direction(&p, &layout, &x, &y, &z, &g, &[0.5]).unwrap();
        for m in [&dir.dx.blocks[0], &dir.dz.blocks[0]] {
            assert!((m[(0, 1)] - m[(1, 0)]).abs() < 1e-12);
        }
        // Linearized feasibility: A(x + dx) = b.
        let moved = x.axpy(1.0, &dir.dx);
        assert!((p.apply_a(&moved)[0] - 3.0).abs() < 1e-12);
    }
}

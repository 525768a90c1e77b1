//! Weighted determinant-maximization problem in standard form.
//!
//! minimize   <C, X> - sum_i c_i log det X_i
//! subject to A(X) = b,  X = Diag(X_1, ..., X_n) >= 0
//!
//! with per-block weights c_i >= 0. The linear operator `A` is a list of
//! equality rows; each row holds a small symmetric coefficient matrix per
//! touched block, so `A(X)_j = sum_terms <coeff, X_block>`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{frob_dot, frob_norm, is_symmetric, logdet_pd};

/// One PSD block of the decision variable: its side length and the weight of
/// its `log det` term in the objective.
#[derive(Clone, Debug)]
pub struct BlockSpec {
    pub size: usize,
    pub weight: f64,
}

/// Block-diagonal symmetric matrix, stored as dense per-block matrices.
#[derive(Clone, Debug, PartialEq)]
pub struct BlockDiag {
    pub blocks: Vec<DMatrix<f64>>,
}

impl BlockDiag {
    pub fn zeros_like(specs: &[BlockSpec]) -> Self {
        BlockDiag {
            blocks: specs
                .iter()
                .map(|s| DMatrix::zeros(s.size, s.size))
                .collect(),
        }
    }

    pub fn identity(specs: &[BlockSpec]) -> Self {
        BlockDiag {
            blocks: specs
                .iter()
                .map(|s| DMatrix::identity(s.size, s.size))
                .collect(),
        }
    }

    pub fn dot(&self, other: &BlockDiag) -> f64 {
        self.blocks
            .iter()
            .zip(&other.blocks)
            .map(|(a, b)| frob_dot(a, b))
            .sum()
    }

    pub fn norm(&self) -> f64 {
        self.blocks
            .iter()
            .map(|b| frob_norm(b).powi(2))
            .sum::<f64>()
            .sqrt()
    }

    /// `self + alpha * other`, blockwise.
    pub fn axpy(&self, alpha: f64, other: &BlockDiag) -> BlockDiag {
        BlockDiag {
            blocks: self
                .blocks
                .iter()
                .zip(&other.blocks)
                .map(|(a, b)| a + b * alpha)
                .collect(),
        }
    }
}

/// Coefficient of an equality row on one block.
#[derive(Clone, Debug)]
pub struct RowTerm {
    pub block: usize,
    pub coeff: DMatrix<f64>,
}

/// One equality row `sum_terms <coeff, X_block> = rhs`.
#[derive(Clone, Debug, Default)]
pub struct EqRow {
    pub terms: Vec<RowTerm>,
}

impl EqRow {
    pub fn new() -> Self {
        EqRow { terms: Vec::new() }
    }

    fn term_mut(&mut self, block: usize, size: usize) -> &mut DMatrix<f64> {
        if let Some(pos) = self.terms.iter().position(|t| t.block == block) {
            return &mut self.terms[pos].coeff;
        }
        self.terms.push(RowTerm {
            block,
            coeff: DMatrix::zeros(size, size),
        });
        &mut self.terms.last_mut().unwrap().coeff
    }

    /// Adds `v * X_block[i, j]` to the row (entry functional on a symmetric
    /// block; off-diagonal coordinates split the coefficient across the two
    /// mirrored entries).
    pub fn add_entry(&mut self, block: usize, size: usize, i: usize, j: usize, v: f64) {
        let coeff = self.term_mut(block, size);
        if i == j {
            coeff[(i, i)] += v;
        } else {
            coeff[(i, j)] += 0.5 * v;
            coeff[(j, i)] += 0.5 * v;
        }
    }

    /// Adds `<m, X_block>` with a symmetric coefficient matrix `m`.
    pub fn add_matrix(&mut self, block: usize, m: &DMatrix<f64>) {
        let coeff = self.term_mut(block, m.nrows());
        *coeff += m;
    }

    pub fn apply(&self, x: &BlockDiag) -> f64 {
        self.terms
            .iter()
            .map(|t| frob_dot(&t.coeff, &x.blocks[t.block]))
            .sum()
    }

    fn self_dot(&self, other: &EqRow) -> f64 {
        let mut acc = 0.0;
        for t in &self.terms {
            for u in &other.terms {
                if t.block == u.block {
                    acc += frob_dot(&t.coeff, &u.coeff);
                }
            }
        }
        acc
    }
}

#[derive(Clone, Debug)]
pub struct MaxDetProblem {
    pub blocks: Vec<BlockSpec>,
    /// Symmetric cost matrix per block.
    pub cost: Vec<DMatrix<f64>>,
    pub rows: Vec<EqRow>,
    pub rhs: DVector<f64>,
    /// Rows are ordered by time step and couple only neighboring steps, so
    /// the reduced Newton system is banded.
    pub time_chained: bool,
    /// Builder guarantees the equality rows are linearly independent;
    /// presolve is skipped.
    pub rows_verified: bool,
    /// Strictly feasible primal point, when the builder can construct one.
    pub primal_hint: Option<BlockDiag>,
}

impl MaxDetProblem {
    pub fn new(blocks: Vec<BlockSpec>, cost: Vec<DMatrix<f64>>) -> Self {
        MaxDetProblem {
            blocks,
            cost,
            rows: Vec::new(),
            rhs: DVector::zeros(0),
            time_chained: false,
            rows_verified: false,
            primal_hint: None,
        }
    }

    pub fn push_row(&mut self, row: EqRow, rhs: f64) {
        self.rows.push(row);
        self.rhs = self.rhs.clone().insert_row(self.rhs.len(), rhs);
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    /// Total matrix dimension `N = sum N_i`.
    pub fn total_dim(&self) -> usize {
        self.blocks.iter().map(|b| b.size).sum()
    }

    /// `sum_{c_i > 0} c_i N_i`, the floor of `<X, Z>` along the central path.
    pub fn weighted_floor(&self) -> f64 {
        self.blocks.iter().map(|b| b.weight * b.size as f64).sum()
    }

    pub fn validate(&self) -> Result<()> {
        if self.cost.len() != self.blocks.len() {
            return Err(Error::Dimension(format!(
                "{} cost blocks for {} variable blocks",
                self.cost.len(),
                self.blocks.len()
            )));
        }
        for (i, spec) in self.blocks.iter().enumerate() {
            if spec.size == 0 {
                return Err(Error::Dimension(format!("block {i} has size 0")));
            }
            if !(spec.weight >= 0.0) {
                return Err(Error::InvalidModel(format!(
                    "block {i} has negative weight {}",
                    spec.weight
                )));
            }
            if self.cost[i].shape() != (spec.size, spec.size) {
                return Err(Error::Dimension(format!("cost block {i} shape mismatch")));
            }
            if !is_symmetric(&self.cost[i], 1e-12) {
                return Err(Error::InvalidModel(format!("cost block {i} not symmetric")));
            }
        }
        if self.rows.len() != self.rhs.len() {
            return Err(Error::Dimension(format!(
                "{} rows vs rhs of length {}",
                self.rows.len(),
                self.rhs.len()
            )));
        }
        for (j, row) in self.rows.iter().enumerate() {
            for t in &row.terms {
                let spec = self.blocks.get(t.block).ok_or_else(|| {
                    Error::Dimension(format!("row {j} references missing block {}", t.block))
                })?;
                if t.coeff.shape() != (spec.size, spec.size) {
                    return Err(Error::Dimension(format!(
                        "row {j} coefficient shape mismatch on block {}",
                        t.block
                    )));
                }
                if !is_symmetric(&t.coeff, 1e-12) {
                    return Err(Error::InvalidModel(format!(
                        "row {j} coefficient on block {} not symmetric",
                        t.block
                    )));
                }
            }
        }
        if let Some(hint) = &self.primal_hint {
            if hint.blocks.len() != self.blocks.len() {
                return Err(Error::Dimension("primal hint block count".into()));
            }
        }
        Ok(())
    }

    pub fn apply_a(&self, x: &BlockDiag) -> DVector<f64> {
        DVector::from_iterator(self.rows.len(), self.rows.iter().map(|r| r.apply(x)))
    }

    pub fn apply_at(&self, y: &DVector<f64>) -> BlockDiag {
        let mut out = BlockDiag::zeros_like(&self.blocks);
        for (j, row) in self.rows.iter().enumerate() {
            let yj = y[j];
            if yj == 0.0 {
                continue;
            }
            for t in &row.terms {
                out.blocks[t.block] += &t.coeff * yj;
            }
        }
        out
    }

    /// Primal objective `<C, X> - sum_{c_i > 0} c_i log det X_i`.
    pub fn primal_objective(&self, x: &BlockDiag) -> Result<f64> {
        let mut obj = 0.0;
        for (i, spec) in self.blocks.iter().enumerate() {
            obj += frob_dot(&self.cost[i], &x.blocks[i]);
            if spec.weight > 0.0 {
                obj -= spec.weight * logdet_pd(&x.blocks[i], "primal block")?;
            }
        }
        Ok(obj)
    }

    /// Dual objective `<b, y> + sum c_i log det Z_i + sum c_i N_i (1 - ln c_i)`.
    ///
    /// The constant is the Fenchel conjugate offset of the weighted log-det
    /// barrier; it reduces to `sum c_i N_i` when every weight is 1.
    pub fn dual_objective(&self, y: &DVector<f64>, z: &BlockDiag) -> Result<f64> {
        let mut obj = self.rhs.dot(y);
        for (i, spec) in self.blocks.iter().enumerate() {
            if spec.weight > 0.0 {
                obj += spec.weight * logdet_pd(&z.blocks[i], "dual block")?;
                obj += spec.weight * spec.size as f64 * (1.0 - spec.weight.ln());
            }
        }
        Ok(obj)
    }

    /// Detects linearly dependent equality rows and returns a copy with the
    /// dependent rows removed (`kept` maps new row index to original index).
    /// A dependent row with an inconsistent right-hand side is an error.
    pub fn presolved(&self) -> Result<(MaxDetProblem, Vec<usize>)> {
        let m = self.rows.len();
        let tol = 1e-12;
        let mut kept: Vec<usize> = Vec::new();
        // Rows of the Cholesky factor of the Gram matrix, restricted to kept rows.
        let mut lrows: Vec<Vec<f64>> = Vec::new();
        let mut chat: Vec<f64> = Vec::new();
        let b_scale = 1.0 + self.rhs.amax();
        for j in 0..m {
            let qjj = self.rows[j].self_dot(&self.rows[j]);
            // Forward substitution of the Gram column against kept rows.
            let mut w = Vec::with_capacity(kept.len());
            for (idx, &k) in kept.iter().enumerate() {
                let mut v = self.rows[j].self_dot(&self.rows[k]);
                for p in 0..idx {
                    v -= w[p] * lrows[idx][p];
                }
                w.push(v / lrows[idx][idx]);
            }
            let d = qjj - w.iter().map(|v| v * v).sum::<f64>();
            if d > tol * qjj.max(1e-300) && qjj > 0.0 {
                let mut lrow = w.clone();
                lrow.push(d.sqrt());
                let c =
                    (self.rhs[j] - w.iter().zip(&chat).map(|(a, b)| a * b).sum::<f64>()) / d.sqrt();
                lrows.push(lrow);
                chat.push(c);
                kept.push(j);
            } else {
                let resid = self.rhs[j] - w.iter().zip(&chat).map(|(a, b)| a * b).sum::<f64>();
                if resid.abs() > 1e-8 * b_scale {
                    return Err(Error::Infeasible(format!(
                        "equality row {j} is dependent with inconsistent rhs (residual {resid:.3e})"
                    )));
                }
            }
        }
        let mut reduced = self.clone();
        reduced.rows = kept.iter().map(|&j| self.rows[j].clone()).collect();
        reduced.rhs = DVector::from_iterator(kept.len(), kept.iter().map(|&j| self.rhs[j]));
        reduced.rows_verified = true;
        Ok((reduced, kept))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar_problem() -> MaxDetProblem {
        MaxDetProblem::new(
            vec![BlockSpec {
                size: 1,
                weight: 1.0,
            }],
            vec![DMatrix::from_element(1, 1, 1.0)],
        )
    }

    #[test]
    fn apply_a_and_adjoint_agree() {
        // <A_j, X> dotted with y equals <X, A*(y)>.
        let mut p = MaxDetProblem::new(
            vec![
                BlockSpec {
                    size: 2,
                    weight: 1.0,
                },
                BlockSpec {
                    size: 1,
                    weight: 0.0,
                },
            ],
            vec![DMatrix::identity(2, 2), DMatrix::zeros(1, 1)],
        );
        let mut r0 = EqRow::new();
        r0.add_entry(0, 2, 0, 0, 1.0);
        r0.add_entry(0, 2, 1, 1, 1.0);
        r0.add_entry(1, 1, 0, 0, 2.0);
        p.push_row(r0, 3.0);
        let mut r1 = EqRow::new();
        r1.add_entry(0, 2, 0, 1, 1.0);
        p.push_row(r1, 0.5);

        let x = BlockDiag {
            blocks: vec![
                DMatrix::from_row_slice(2, 2, &[2.0, 0.25, 0.25, 1.5]),
                DMatrix::from_element(1, 1, 0.5),
            ],
        };
        let ax = p.apply_a(&x);
        assert!((ax[0] - (2.0 + 1.5 + 1.0)).abs() < 1e-14);
        assert!((ax[1] - 0.25).abs() < 1e-14);
        let y = DVector::from_vec(vec![0.7, -1.3]);
        let aty = p.apply_at(&y);
        assert!((ax.dot(&y) - x.dot(&aty)).abs() < 1e-12);
    }

    #[test]
    fn presolve_drops_duplicate_row() {
        let mut p = scalar_problem();
        let mut r0 = EqRow::new();
        r0.add_entry(0, 1, 0, 0, 1.0);
        p.push_row(r0.clone(), 2.0);
        p.push_row(r0.clone(), 2.0); // duplicate, consistent
        let (reduced, kept) = p.presolved().unwrap();
        assert_eq!(reduced.rows.len(), 1);
        assert_eq!(kept, vec![0]);

        // Inconsistent duplicate must be rejected.
        let mut bad = scalar_problem();
        bad.push_row(r0.clone(), 2.0);
        bad.push_row(r0, 3.0);
        assert!(matches!(bad.presolved(), Err(Error::Infeasible(_))));
    }

    #[test]
    fn objectives_on_scalar_instance() {
        let p = scalar_problem();
        let x = BlockDiag {
            blocks: vec![DMatrix::from_element(1, 1, 1.0)],
        };
        // min x - log x at x = 1.
        assert!((p.primal_objective(&x).unwrap() - 1.0).abs() < 1e-15);
        let z = BlockDiag {
            blocks: vec![DMatrix::from_element(1, 1, 1.0)],
        };
        let y = DVector::zeros(0);
        // Dual optimum matches: 0 + log 1 + 1*(1 - ln 1) = 1.
        assert!((p.dual_objective(&y, &z).unwrap() - 1.0).abs() < 1e-15);
    }
}

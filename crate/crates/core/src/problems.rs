//! Builders turning Gauss-Markov models and distortion specifications into
//! determinant-maximization instances, and the decoding of solver output
//! back into covariance schedules.
//!
//! The finite-horizon hard problem encodes, with decision variables
//! `P_{t|t}` and `Pi_t` (and `P_{T|T} = Pi_T` realized as one shared block):
//!
//!   min  -sum_t (1/2) log det Pi_t              (+ constant c)
//!   s.t. P_{t+1|t+1} <= A_t P_{t|t} A_t^T + W_t          (slack blocks S_t)
//!        [ P_t - Pi_t      P_t A_t^T          ]
//!        [ A_t P_t         W_t + A_t P_t A_t^T ] >= 0     (blocks L_t)
//!        Tr(Theta_t P_{t|t}) <= D_t                       (scalar slacks)
//!
//! Inequalities become PSD slack blocks with zero weight, tied to the
//! variable blocks by equality rows on upper-triangular coordinates. The
//! soft variant drops the distortion slacks and adds `(alpha_t/2) Theta_t`
//! to the cost on the `P` blocks; the stationary problem is the one-step
//! analogue with objective `-(1/2) log det Pi + (1/2) log det W`.

use nalgebra::{Complex, DMatrix};

use crate::error::{Error, Result};
use crate::linalg::{frob_dot, inv_pd, logdet_pd, max_eig, min_eig, require_pd, symmetric_part};
use crate::maxdet::{BlockDiag, BlockSpec, EqRow, MaxDetProblem, SolverSolution};
use crate::model::{CovarianceSchedule, DistortionMode, DistortionSpec, GaussMarkovModel};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SrdKind {
    FiniteHard,
    FiniteSoft,
    Stationary,
}

/// A built SRD instance: the standard-form problem plus the layout needed to
/// decode solutions.
#[derive(Clone, Debug)]
pub struct SrdProblem {
    pub problem: MaxDetProblem,
    pub kind: SrdKind,
    /// Block index of `P_{t|t}` for `t = 1..T` (the last entry is the block
    /// shared with `Pi_T`).
    p_blocks: Vec<usize>,
    /// Block index of `Pi_t` for `t = 1..T`.
    pi_blocks: Vec<usize>,
    /// Row index of the distortion-trace row per step (hard mode only).
    d_rows: Vec<usize>,
    /// Additive objective constant `c` in nats.
    pub constant_c: f64,
}

/// `c = (1/2) log det(A_0 P_0 A_0^T + W_0) + sum_{t=1}^{T-1} (1/2) log det W_t`.
pub fn objective_constant(model: &GaussMarkovModel) -> Result<f64> {
    let t = model
        .horizon_len()
        .ok_or_else(|| Error::InvalidModel("objective constant needs a finite horizon".into()))?;
    let first = model.a_at(0) * &model.p0 * model.a_at(0).transpose() + model.w_at(0);
    let mut c = 0.5 * logdet_pd(&first, "A0 P0 A0' + W0")?;
    for s in 1..t {
        c += 0.5 * logdet_pd(model.w_at(s), "W_t")?;
    }
    Ok(c)
}

/// Spectral norm of `a`.
fn op_norm(a: &DMatrix<f64>) -> f64 {
    max_eig(&(a.transpose() * a)).max(0.0).sqrt()
}

/// Strict-feasibility margin for the hint `P = delta I`, `Pi = delta^2 I`.
fn feasibility_delta(model: &GaussMarkovModel, spec: &DistortionSpec, t_len: usize) -> f64 {
    let mut delta: f64 = 1.0;
    for t in 0..t_len {
        let wmin = min_eig(model.w_at(t));
        let anorm2 = op_norm(model.a_at(t)).powi(2);
        delta = delta.min(wmin / (1.0 + anorm2));
        delta = delta.min(wmin / (wmin + anorm2));
    }
    if let DistortionMode::Hard(d) = &spec.mode {
        for t in 0..spec.len() {
            let tr = spec.theta_at(t).trace();
            delta = delta.min(d[t] / (1.0 + tr));
        }
    }
    0.5 * delta
}

/// Coefficient matrix `M` with `<M, P> = (A P A^T)[i, j]` for symmetric `P`.
fn apa_coeff(a: &DMatrix<f64>, i: usize, j: usize) -> DMatrix<f64> {
    let ai = a.row(i).transpose();
    let aj = a.row(j).transpose();
    (&ai * aj.transpose() + &aj * ai.transpose()) * 0.5
}

/// Coefficient matrix `M` with `<M, P> = (P A^T)[i, j]` for symmetric `P`.
fn pat_coeff(a: &DMatrix<f64>, n: usize, i: usize, j: usize) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(n, n);
    for k in 0..n {
        let v = 0.5 * a[(j, k)];
        m[(i, k)] += v;
        m[(k, i)] += v;
    }
    m
}

struct Assembler {
    blocks: Vec<BlockSpec>,
    cost: Vec<DMatrix<f64>>,
    hint: Vec<DMatrix<f64>>,
    problem_rows: Vec<EqRow>,
    rhs: Vec<f64>,
}

impl Assembler {
    fn new() -> Self {
        Assembler {
            blocks: Vec::new(),
            cost: Vec::new(),
            hint: Vec::new(),
            problem_rows: Vec::new(),
            rhs: Vec::new(),
        }
    }

    fn add_block(
        &mut self,
        size: usize,
        weight: f64,
        cost: DMatrix<f64>,
        hint: DMatrix<f64>,
    ) -> usize {
        self.blocks.push(BlockSpec { size, weight });
        self.cost.push(cost);
        self.hint.push(hint);
        self.blocks.len() - 1
    }

    fn push_row(&mut self, row: EqRow, rhs: f64) -> usize {
        self.problem_rows.push(row);
        self.rhs.push(rhs);
        self.rhs.len() - 1
    }

    fn finish(self, time_chained: bool) -> Result<MaxDetProblem> {
        for (i, h) in self.hint.iter().enumerate() {
            require_pd(h, &format!("feasibility hint block {i}"))
                .map_err(|_| Error::Infeasible(format!("hint block {i} not strictly PD")))?;
        }
        let mut p = MaxDetProblem::new(self.blocks, self.cost);
        for (row, rhs) in self.problem_rows.into_iter().zip(self.rhs) {
            p.push_row(row, rhs);
        }
        p.time_chained = time_chained;
        p.rows_verified = true;
        p.primal_hint = Some(BlockDiag { blocks: self.hint });
        p.validate()?;
        Ok(p)
    }
}

fn validate_finite_inputs(model: &GaussMarkovModel, spec: &DistortionSpec) -> Result<usize> {
    let t = model
        .horizon_len()
        .ok_or_else(|| Error::InvalidModel("finite builder needs a finite-horizon model".into()))?;
    model.validate()?;
    spec.validate()?;
    if spec.len() != t {
        return Err(Error::Dimension(format!(
            "distortion spec has {} steps for horizon {t}",
            spec.len()
        )));
    }
    if spec.theta[0].nrows() != model.n() {
        return Err(Error::Dimension(
            "Theta dimension differs from model".into(),
        ));
    }
    Ok(t)
}

/// Strictly feasible hints for `P_{t|t}` (index 0 holds `P0`): shrink the
/// free covariance recursion by a factor below 1, tightening further where
/// the distortion bound binds. Unlike the uniform `delta I` construction,
/// these track the problem's natural scale, which keeps the centering phase
/// short for long horizons.
fn hint_covariances(
    model: &GaussMarkovModel,
    spec: &DistortionSpec,
    t_len: usize,
) -> Vec<DMatrix<f64>> {
    let mut hints = Vec::with_capacity(t_len + 1);
    hints.push(model.p0.clone());
    for t in 1..=t_len {
        let a = model.a_at(t - 1);
        let w = model.w_at(t - 1);
        let pred = symmetric_part(&(a * &hints[t - 1] * a.transpose() + w));
        let mut beta = 0.95f64;
        if let DistortionMode::Hard(d) = &spec.mode {
            let tr = frob_dot(spec.theta_at(t - 1), &pred);
            if tr > 0.0 {
                beta = beta.min(0.9 * d[t - 1] / tr);
            }
        }
        hints.push(pred * beta);
    }
    hints
}

fn build_finite(model: &GaussMarkovModel, spec: &DistortionSpec) -> Result<SrdProblem> {
    let t_len = validate_finite_inputs(model, spec)?;
    let n = model.n();
    let sn = |m: &DMatrix<f64>| -> DMatrix<f64> { symmetric_part(m) };
    let constant_c = objective_constant(model)?;
    let hard = matches!(spec.mode, DistortionMode::Hard(_));
    let alphas: Vec<f64> = match &spec.mode {
        DistortionMode::Soft(a) => a.clone(),
        DistortionMode::Hard(_) => vec![0.0; t_len],
    };

    let mut asm = Assembler::new();
    let zero = DMatrix::zeros(n, n);

    let p_hints = hint_covariances(model, spec, t_len);
    let hint_p = |t: usize| -> DMatrix<f64> { p_hints[t].clone() };
    // Pi sits strictly inside its bound (P^-1 + A' W^-1 A)^-1; the terminal
    // block shares P's value.
    let hint_pi = |t: usize| -> Result<DMatrix<f64>> {
        if t == t_len {
            return Ok(p_hints[t].clone());
        }
        let a = model.a_at(t);
        let w = model.w_at(t);
        let info = inv_pd(&p_hints[t], "hint covariance")?
            + a.transpose() * inv_pd(w, "W")? * a;
        Ok(inv_pd(&symmetric_part(&info), "hint information")? * 0.9)
    };

    // Variable blocks.
    let mut p_blocks = Vec::with_capacity(t_len);
    let mut pi_blocks = Vec::with_capacity(t_len);
    for t in 1..=t_len {
        let weight = if t == t_len { 0.5 } else { 0.0 };
        let cost = if hard {
            zero.clone()
        } else {
            spec.theta_at(t - 1) * (alphas[t - 1] / 2.0)
        };
        p_blocks.push(asm.add_block(n, weight, cost, hint_p(t)));
    }
    for t in 1..=t_len {
        if t == t_len {
            pi_blocks.push(p_blocks[t_len - 1]);
        } else {
            pi_blocks.push(asm.add_block(n, 0.5, zero.clone(), hint_pi(t)?));
        }
    }

    // Slack blocks and equality rows, ordered by time step so the reduced
    // Newton system is banded.
    let mut d_rows = Vec::new();
    for t in 1..=t_len {
        let a_prev = model.a_at(t - 1);
        let w_prev = model.w_at(t - 1);
        // Prediction slack S_{t-1} = A P A^T + W - P_t, strictly PD at the hint.
        let s_hint = sn(&(a_prev * hint_p(t - 1) * a_prev.transpose() + w_prev - hint_p(t)));
        let s_block = asm.add_block(n, 0.0, zero.clone(), s_hint);
        for i in 0..n {
            for j in i..n {
                let mut row = EqRow::new();
                row.add_entry(s_block, n, i, j, 1.0);
                row.add_entry(p_blocks[t - 1], n, i, j, 1.0);
                let rhs = if t == 1 {
                    let m0 = a_prev * &model.p0 * a_prev.transpose() + w_prev;
                    m0[(i, j)]
                } else {
                    row.add_matrix(p_blocks[t - 2], &(-apa_coeff(a_prev, i, j)));
                    w_prev[(i, j)]
                };
                asm.push_row(row, rhs);
            }
        }

        if t < t_len {
            // LMI block L_t coupling P_t and Pi_t through A_t, W_t.
            let a_t = model.a_at(t);
            let w_t = model.w_at(t);
            let p_h = hint_p(t);
            let top_left = sn(&(&p_h - hint_pi(t)?));
            let top_right = &p_h * a_t.transpose();
            let bottom_right = sn(&(w_t + a_t * &p_h * a_t.transpose()));
            let mut l_hint = DMatrix::zeros(2 * n, 2 * n);
            l_hint.view_mut((0, 0), (n, n)).copy_from(&top_left);
            l_hint.view_mut((0, n), (n, n)).copy_from(&top_right);
            l_hint
                .view_mut((n, 0), (n, n))
                .copy_from(&top_right.transpose());
            l_hint.view_mut((n, n), (n, n)).copy_from(&bottom_right);
            let l_block = asm.add_block(2 * n, 0.0, DMatrix::zeros(2 * n, 2 * n), l_hint);

            for i in 0..n {
                for j in i..n {
                    // L[0:n,0:n] = P_t - Pi_t
                    let mut row = EqRow::new();
                    row.add_entry(l_block, 2 * n, i, j, 1.0);
                    row.add_entry(p_blocks[t - 1], n, i, j, -1.0);
                    row.add_entry(pi_blocks[t - 1], n, i, j, 1.0);
                    asm.push_row(row, 0.0);
                }
            }
            for i in 0..n {
                for j in 0..n {
                    // L[0:n,n:2n] = P_t A_t^T
                    let mut row = EqRow::new();
                    row.add_entry(l_block, 2 * n, i, n + j, 1.0);
                    row.add_matrix(p_blocks[t - 1], &(-pat_coeff(a_t, n, i, j)));
                    asm.push_row(row, 0.0);
                }
            }
            for i in 0..n {
                for j in i..n {
                    // L[n:2n,n:2n] = W_t + A_t P_t A_t^T
                    let mut row = EqRow::new();
                    row.add_entry(l_block, 2 * n, n + i, n + j, 1.0);
                    row.add_matrix(p_blocks[t - 1], &(-apa_coeff(a_t, i, j)));
                    asm.push_row(row, w_t[(i, j)]);
                }
            }
        }

        if let DistortionMode::Hard(d) = &spec.mode {
            let theta = spec.theta_at(t - 1);
            let d_hint = d[t - 1] - frob_dot(theta, &hint_p(t));
            let d_block = asm.add_block(
                1,
                0.0,
                DMatrix::zeros(1, 1),
                DMatrix::from_element(1, 1, d_hint),
            );
            let mut row = EqRow::new();
            row.add_entry(d_block, 1, 0, 0, 1.0);
            row.add_matrix(p_blocks[t - 1], theta);
            d_rows.push(asm.push_row(row, d[t - 1]));
        }
    }

    Ok(SrdProblem {
        problem: asm.finish(true)?,
        kind: if hard {
            SrdKind::FiniteHard
        } else {
            SrdKind::FiniteSoft
        },
        p_blocks,
        pi_blocks,
        d_rows,
        constant_c,
    })
}

/// Finite-horizon problem with hard distortion bounds `D_t`.
pub fn build_finite_hard(model: &GaussMarkovModel, spec: &DistortionSpec) -> Result<SrdProblem> {
    if !matches!(spec.mode, DistortionMode::Hard(_)) {
        return Err(Error::InvalidModel("expected hard distortion mode".into()));
    }
    build_finite(model, spec)
}

/// Finite-horizon problem with soft multipliers `alpha_t`.
pub fn build_finite_soft(model: &GaussMarkovModel, spec: &DistortionSpec) -> Result<SrdProblem> {
    if !matches!(spec.mode, DistortionMode::Soft(_)) {
        return Err(Error::InvalidModel("expected soft distortion mode".into()));
    }
    build_finite(model, spec)
}

/// PBH detectability of `(A, Theta)`: full column rank of
/// `[A - lambda I; Theta]` at every eigenvalue with `|lambda| >= 1`.
pub fn is_detectable(a: &DMatrix<f64>, theta: &DMatrix<f64>) -> bool {
    let n = a.nrows();
    let eigs = a.clone().complex_eigenvalues();
    for lambda in eigs.iter() {
        if lambda.norm() < 1.0 - 1e-9 {
            continue;
        }
        let mut stacked = DMatrix::<Complex<f64>>::zeros(2 * n, n);
        for i in 0..n {
            for j in 0..n {
                let mut v = Complex::new(a[(i, j)], 0.0);
                if i == j {
                    v -= *lambda;
                }
                stacked[(i, j)] = v;
                stacked[(n + i, j)] = Complex::new(theta[(i, j)], 0.0);
            }
        }
        let svd = stacked.svd(false, false);
        let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
        let rank = svd
            .singular_values
            .iter()
            .filter(|&&s| s > 1e-10 * smax.max(1.0))
            .count();
        if rank < n {
            return false;
        }
    }
    true
}

/// Stationary problem: objective `-(1/2) log det Pi + (1/2) log det W` under
/// `P <= A P A^T + W`, `Tr(Theta P) <= D` and the stationary LMI.
pub fn build_stationary(
    a: &DMatrix<f64>,
    w: &DMatrix<f64>,
    theta: &DMatrix<f64>,
    d: f64,
) -> Result<SrdProblem> {
    let n = a.nrows();
    let model = GaussMarkovModel::stationary(a.clone(), w.clone(), DMatrix::identity(n, n))?;
    let spec = DistortionSpec::hard(vec![theta.clone()], vec![d])?;
    if !is_detectable(a, theta) {
        return Err(Error::InvalidModel(
            "(A, Theta) is not detectable; the stationary SDP is not equivalent to the SRD problem for this pair".into(),
        ));
    }
    let delta = feasibility_delta(&model, &spec, 1);
    let constant_c = 0.5 * logdet_pd(w, "W")?;

    let mut asm = Assembler::new();
    let zero = DMatrix::zeros(n, n);
    let eye = DMatrix::<f64>::identity(n, n);
    let p = asm.add_block(n, 0.0, zero.clone(), &eye * delta);
    let pi = asm.add_block(n, 0.5, zero.clone(), &eye * (delta * delta));

    // S = A P A^T + W - P
    let s_hint = symmetric_part(&(a * (&eye * delta) * a.transpose() + w - &eye * delta));
    let s_block = asm.add_block(n, 0.0, zero.clone(), s_hint);
    for i in 0..n {
        for j in i..n {
            let mut row = EqRow::new();
            row.add_entry(s_block, n, i, j, 1.0);
            row.add_entry(p, n, i, j, 1.0);
            row.add_matrix(p, &(-apa_coeff(a, i, j)));
            asm.push_row(row, w[(i, j)]);
        }
    }

    // Stationary LMI [[P - Pi, P A^T], [A P, W + A P A^T]].
    let p_h = &eye * delta;
    let mut l_hint = DMatrix::zeros(2 * n, 2 * n);
    l_hint
        .view_mut((0, 0), (n, n))
        .copy_from(&(&p_h - &eye * (delta * delta)));
    let tr = &p_h * a.transpose();
    l_hint.view_mut((0, n), (n, n)).copy_from(&tr);
    l_hint.view_mut((n, 0), (n, n)).copy_from(&tr.transpose());
    l_hint
        .view_mut((n, n), (n, n))
        .copy_from(&symmetric_part(&(w + a * &p_h * a.transpose())));
    let l_block = asm.add_block(2 * n, 0.0, DMatrix::zeros(2 * n, 2 * n), l_hint);
    for i in 0..n {
        for j in i..n {
            let mut row = EqRow::new();
            row.add_entry(l_block, 2 * n, i, j, 1.0);
            row.add_entry(p, n, i, j, -1.0);
            row.add_entry(pi, n, i, j, 1.0);
            asm.push_row(row, 0.0);
        }
    }
    for i in 0..n {
        for j in 0..n {
            let mut row = EqRow::new();
            row.add_entry(l_block, 2 * n, i, n + j, 1.0);
            row.add_matrix(p, &(-pat_coeff(a, n, i, j)));
            asm.push_row(row, 0.0);
        }
    }
    for i in 0..n {
        for j in i..n {
            let mut row = EqRow::new();
            row.add_entry(l_block, 2 * n, n + i, n + j, 1.0);
            row.add_matrix(p, &(-apa_coeff(a, i, j)));
            asm.push_row(row, w[(i, j)]);
        }
    }

    // Tr(Theta P) <= D.
    let d_hint = d - frob_dot(theta, &p_h);
    let d_block = asm.add_block(
        1,
        0.0,
        DMatrix::zeros(1, 1),
        DMatrix::from_element(1, 1, d_hint),
    );
    let mut row = EqRow::new();
    row.add_entry(d_block, 1, 0, 0, 1.0);
    row.add_matrix(p, theta);
    let d_row = asm.push_row(row, d);

    Ok(SrdProblem {
        problem: asm.finish(false)?,
        kind: SrdKind::Stationary,
        p_blocks: vec![p],
        pi_blocks: vec![pi],
        d_rows: vec![d_row],
        constant_c,
    })
}

impl SrdProblem {
    /// Reads the covariance schedule out of a solver solution.
    pub fn decode(&self, sol: &SolverSolution) -> Result<CovarianceSchedule> {
        let p_filt: Vec<DMatrix<f64>> = self
            .p_blocks
            .iter()
            .map(|&b| symmetric_part(&sol.x.blocks[b]))
            .collect();
        let pi: Vec<DMatrix<f64>> = self
            .pi_blocks
            .iter()
            .map(|&b| symmetric_part(&sol.x.blocks[b]))
            .collect();
        let mut logdet_sum = 0.0;
        for m in &pi {
            logdet_sum += logdet_pd(m, "Pi")?;
        }
        Ok(CovarianceSchedule {
            p_filt,
            pi,
            objective_nats: -0.5 * logdet_sum + self.constant_c,
            constant_c: self.constant_c,
        })
    }

    /// Lagrange multipliers `alpha_t` of the distortion-trace constraints,
    /// read off the dual variables (hard mode only). A soft problem built
    /// with these multipliers shares the hard problem's optimal schedule.
    pub fn distortion_multipliers(&self, sol: &SolverSolution) -> Result<Vec<f64>> {
        if self.d_rows.is_empty() {
            return Err(Error::InvalidModel(
                "distortion multipliers exist only for hard-constrained problems".into(),
            ));
        }
        Ok(self
            .d_rows
            .iter()
            .map(|&r| (-2.0 * sol.y[r]).max(0.0))
            .collect())
    }
}

/// Worst constraint violation of a schedule against the original model and
/// spec (used by round-trip tests; all quantities relative to matrix scale).
pub fn schedule_violation(
    model: &GaussMarkovModel,
    spec: &DistortionSpec,
    schedule: &CovarianceSchedule,
) -> f64 {
    let t_len = schedule.p_filt.len();
    let mut worst: f64 = 0.0;
    let mut p_prev = model.p0.clone();
    for t in 1..=t_len {
        let p_t = &schedule.p_filt[t - 1];
        let scale = 1.0 + p_t.amax();
        worst = worst.max((-min_eig(p_t)).max(0.0) / scale);
        let a = model.a_at(t - 1);
        let w = model.w_at(t - 1);
        let pred = a * &p_prev * a.transpose() + w;
        worst = worst.max((-min_eig(&(&pred - p_t))).max(0.0) / scale);
        match &spec.mode {
            DistortionMode::Hard(d) => {
                let tr = frob_dot(spec.theta_at(t - 1), p_t);
                worst = worst.max((tr - d[t - 1]).max(0.0) / (1.0 + d[t - 1]));
            }
            DistortionMode::Soft(_) => {}
        }
        if t < t_len {
            let a_t = model.a_at(t);
            let w_t = model.w_at(t);
            let n = model.n();
            let mut lmi = DMatrix::zeros(2 * n, 2 * n);
            lmi.view_mut((0, 0), (n, n))
                .copy_from(&(p_t - &schedule.pi[t - 1]));
            let tr_blk = p_t * a_t.transpose();
            lmi.view_mut((0, n), (n, n)).copy_from(&tr_blk);
            lmi.view_mut((n, 0), (n, n)).copy_from(&tr_blk.transpose());
            lmi.view_mut((n, n), (n, n))
                .copy_from(&(w_t + a_t * p_t * a_t.transpose()));
            worst = worst.max((-min_eig(&lmi)).max(0.0) / (1.0 + lmi.amax()));
        } else {
            let diff = (p_t - &schedule.pi[t - 1]).amax();
            worst = worst.max(diff / scale);
        }
        p_prev = p_t.clone();
    }
    worst
}

/// The objective of the pre-rewrite formulation,
/// `sum_t [ (1/2) log det(A P A^T + W) - (1/2) log det P_t ]`, evaluated on a
/// schedule. At the optimum this equals `objective_nats`, which validates
/// the matrix-determinant-lemma rewrite end to end.
pub fn eliminated_form_objective(
    model: &GaussMarkovModel,
    schedule: &CovarianceSchedule,
) -> Result<f64> {
    let mut total = 0.0;
    let mut p_prev = model.p0.clone();
    for (t, p_t) in schedule.p_filt.iter().enumerate() {
        let a = model.a_at(t);
        let w = model.w_at(t);
        let pred = a * &p_prev * a.transpose() + w;
        total += 0.5 * logdet_pd(&pred, "prediction covariance")?;
        total -= 0.5 * logdet_pd(p_t, "filtered covariance")?;
        p_prev = p_t.clone();
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::maxdet::{solve, SolverConfig, SolverStatus};

    fn scalar_model(a: f64, w: f64, p0: f64, t: usize) -> GaussMarkovModel {
        GaussMarkovModel::finite(
            vec![DMatrix::from_element(1, 1, a); t],
            vec![DMatrix::from_element(1, 1, w); t],
            DMatrix::from_element(1, 1, p0),
        )
        .unwrap()
    }

    fn eye(n: usize) -> DMatrix<f64> {
        DMatrix::identity(n, n)
    }

    #[test]
    fn objective_constant_examples() {
        // Scalar a=1, w=1, p0=1, T=2: (1/2) log 2 + (1/2) log 1.
        let c = objective_constant(&scalar_model(1.0, 1.0, 1.0, 2)).unwrap();
        assert!((c - 0.5 * 2.0f64.ln()).abs() < 1e-14);
        // T=1: only the initial term.
        let c = objective_constant(&scalar_model(1.0, 1.0, 1.0, 1)).unwrap();
        assert!((c - 0.5 * 2.0f64.ln()).abs() < 1e-14);
        // Identity model, n=2, T=3: (1/2) log det(2 I) = log 2.
        let m = GaussMarkovModel::finite(vec![eye(2); 3], vec![eye(2); 3], eye(2)).unwrap();
        let c = objective_constant(&m).unwrap();
        assert!((c - 2.0f64.ln()).abs() < 1e-14);
    }

    #[test]
    fn single_stage_hard_matches_closed_form() {
        // a=1, w=1, p0=1, Theta=1, T=1, D=0.5: P=0.5 active, rate (1/2)log 4.
        let model = scalar_model(1.0, 1.0, 1.0, 1);
        let spec = DistortionSpec::hard(vec![eye(1)], vec![0.5]).unwrap();
        let srd = build_finite_hard(&model, &spec).unwrap();
        let sol = solve(&srd.problem, &SolverConfig::default()).unwrap();
        assert_eq!(sol.status, SolverStatus::Optimal);
        let sched = srd.decode(&sol).unwrap();
        assert!((sched.p_filt[0][(0, 0)] - 0.5).abs() < 1e-7);
        assert!((sched.objective_nats - 0.5 * 4.0f64.ln()).abs() < 1e-7);
    }

    #[test]
    fn slack_distortion_gives_zero_rate() {
        // D far above the free covariance: no information is needed.
        let model = scalar_model(0.9, 1.0, 1.0, 3);
        let spec = DistortionSpec::hard(vec![eye(1); 3], vec![50.0, 50.0, 50.0]).unwrap();
        let srd = build_finite_hard(&model, &spec).unwrap();
        let sol = solve(&srd.problem, &SolverConfig::default()).unwrap();
        assert_eq!(sol.status, SolverStatus::Optimal);
        let sched = srd.decode(&sol).unwrap();
        assert!(
            sched.objective_nats.abs() < 1e-6,
            "{}",
            sched.objective_nats
        );
    }

    #[test]
    fn single_stage_soft_matches_waterfilling_level() {
        // Scalar T=1, sigma^2 = 2, alpha = 1: p = min(1, 2) = 1, rate (1/2)log 2.
        let model = scalar_model(1.0, 1.0, 1.0, 1);
        let spec = DistortionSpec::soft(vec![eye(1)], vec![1.0]).unwrap();
        let srd = build_finite_soft(&model, &spec).unwrap();
        let sol = solve(&srd.problem, &SolverConfig::default()).unwrap();
        assert_eq!(sol.status, SolverStatus::Optimal);
        let sched = srd.decode(&sol).unwrap();
        assert!((sched.p_filt[0][(0, 0)] - 1.0).abs() < 1e-6);
        assert!((sched.objective_nats - 0.5 * 2.0f64.ln()).abs() < 1e-6);
    }

    #[test]
    fn soft_with_vanishing_alpha_discards_information() {
        let model = scalar_model(1.0, 1.0, 1.0, 2);
        let spec = DistortionSpec::soft(vec![eye(1); 2], vec![1e-8, 1e-8]).unwrap();
        let srd = build_finite_soft(&model, &spec).unwrap();
        let sol = solve(&srd.problem, &SolverConfig::default()).unwrap();
        assert_eq!(sol.status, SolverStatus::Optimal);
        let sched = srd.decode(&sol).unwrap();
        // Rate tends to zero and P approaches the free Lyapunov recursion
        // (p1 ~ 2, p2 ~ 3).
        assert!(sched.objective_nats < 1e-4);
        assert!((sched.p_filt[0][(0, 0)] - 2.0).abs() < 1e-2);
        assert!((sched.p_filt[1][(0, 0)] - 3.0).abs() < 1e-2);
    }

    #[test]
    fn stationary_scalar_matches_corrected_closed_form() {
        for &(a, w, d) in &[(1.0, 1.0, 1.0), (0.5, 1.0, 0.3), (1.5, 2.0, 0.7)] {
            let srd = build_stationary(
                &DMatrix::from_element(1, 1, a),
                &DMatrix::from_element(1, 1, w),
                &eye(1),
                d,
            )
            .unwrap();
            let sol = solve(&srd.problem, &SolverConfig::default()).unwrap();
            assert_eq!(sol.status, SolverStatus::Optimal);
            let sched = srd.decode(&sol).unwrap();
            let expect = crate::oracles::scalar_stationary_srd(a, w, d);
            assert!(
                (sched.objective_nats - expect).abs() < 1e-6,
                "a={a} w={w} d={d}: {} vs {expect}",
                sched.objective_nats
            );
        }
    }

    #[test]
    fn stationary_zero_rate_region() {
        // |a| < 1 and D >= w/(1 - a^2): the Lyapunov fixed point meets the
        // bound with zero information.
        let a = 0.6;
        let w = 1.0;
        let d = w / (1.0 - a * a) + 0.5;
        let srd = build_stationary(
            &DMatrix::from_element(1, 1, a),
            &DMatrix::from_element(1, 1, w),
            &eye(1),
            d,
        )
        .unwrap();
        let sol = solve(&srd.problem, &SolverConfig::default()).unwrap();
        let sched = srd.decode(&sol).unwrap();
        assert!(sched.objective_nats.abs() < 1e-6);
    }

    #[test]
    fn undetectable_pair_is_rejected() {
        // A = diag(1.2, 0.5) unstable in mode 1; Theta observes only mode 2.
        let a = DMatrix::from_row_slice(2, 2, &[1.2, 0.0, 0.0, 0.5]);
        let theta = DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 0.0, 1.0]);
        assert!(!is_detectable(&a, &theta));
        let w = eye(2);
        assert!(matches!(
            build_stationary(&a, &w, &theta, 1.0),
            Err(Error::InvalidModel(_))
        ));
        // Observing the unstable mode restores detectability.
        let theta_ok = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]);
        assert!(is_detectable(&a, &theta_ok));
    }

    #[test]
    fn two_stage_matches_grid_oracle() {
        let model = scalar_model(1.0, 1.0, 1.0, 2);
        let spec = DistortionSpec::hard(vec![eye(1); 2], vec![0.5, 0.5]).unwrap();
        let srd = build_finite_hard(&model, &spec).unwrap();
        let sol = solve(&srd.problem, &SolverConfig::default()).unwrap();
        assert_eq!(sol.status, SolverStatus::Optimal);
        let sched = srd.decode(&sol).unwrap();
        let grid = crate::oracles::grid_oracle(&model, &spec, 1e-3).unwrap();
        assert!(
            (sched.objective_nats - grid.rate_nats).abs() < 1e-3,
            "sdp {} grid {}",
            sched.objective_nats,
            grid.rate_nats
        );
        // The grid value can only sit above the true optimum.
        assert!(sched.objective_nats <= grid.rate_nats + 1e-6);
    }

    #[test]
    fn decode_satisfies_original_constraints() {
        let model = scalar_model(1.2, 0.8, 1.0, 4);
        let spec = DistortionSpec::hard(vec![eye(1); 4], vec![0.5, 0.4, 0.6, 0.5]).unwrap();
        let srd = build_finite_hard(&model, &spec).unwrap();
        let sol = solve(&srd.problem, &SolverConfig::default()).unwrap();
        assert_eq!(sol.status, SolverStatus::Optimal);
        let sched = srd.decode(&sol).unwrap();
        assert!(schedule_violation(&model, &spec, &sched) < 1e-7);
        // Elimination equivalence: the rewritten objective agrees with the
        // pre-rewrite telescoped form.
        let direct = eliminated_form_objective(&model, &sched).unwrap();
        assert!(
            (direct - sched.objective_nats).abs() < 1e-6 * (1.0 + direct.abs()),
            "{direct} vs {}",
            sched.objective_nats
        );
    }

    #[test]
    fn hard_rate_monotone_in_distortion() {
        let model = scalar_model(1.0, 1.0, 1.0, 3);
        let mut last = f64::INFINITY;
        for &d in &[0.3, 0.5, 0.8, 1.5, 3.0] {
            let spec = DistortionSpec::hard(vec![eye(1); 3], vec![d; 3]).unwrap();
            let srd = build_finite_hard(&model, &spec).unwrap();
            let sol = solve(&srd.problem, &SolverConfig::default()).unwrap();
            let sched = srd.decode(&sol).unwrap();
            assert!(sched.objective_nats <= last + 1e-7);
            last = sched.objective_nats;
        }
    }


    #[test]
    fn time_varying_three_stage_matches_grid_oracle() {
        // Distinct A_t, W_t, Theta_t, D_t per step exercise the builder's
        // time indexing end to end against the brute-force oracle.
        let model = GaussMarkovModel::finite(
            vec![
                DMatrix::from_element(1, 1, 1.4),
                DMatrix::from_element(1, 1, 0.7),
                DMatrix::from_element(1, 1, 1.1),
            ],
            vec![
                DMatrix::from_element(1, 1, 0.6),
                DMatrix::from_element(1, 1, 1.2),
                DMatrix::from_element(1, 1, 0.9),
            ],
            DMatrix::from_element(1, 1, 1.5),
        )
        .unwrap();
        let spec = DistortionSpec::hard(
            vec![
                DMatrix::from_element(1, 1, 1.0),
                DMatrix::from_element(1, 1, 2.0),
                DMatrix::from_element(1, 1, 0.5),
            ],
            vec![0.8, 1.1, 0.4],
        )
        .unwrap();
        let srd = build_finite_hard(&model, &spec).unwrap();
        let sol = solve(&srd.problem, &SolverConfig::default()).unwrap();
        assert_eq!(sol.status, SolverStatus::Optimal);
        let sched = srd.decode(&sol).unwrap();
        let grid = crate::oracles::grid_oracle(&model, &spec, 5e-3).unwrap();
        assert!(
            sched.objective_nats <= grid.rate_nats + 1e-6,
            "sdp {} above grid {}",
            sched.objective_nats,
            grid.rate_nats
        );
        assert!(
            (sched.objective_nats - grid.rate_nats).abs() <= grid.gap_bound + 1e-6,
            "sdp {} vs grid {} (bound {})",
            sched.objective_nats,
            grid.rate_nats,
            grid.gap_bound
        );
        // Identity between the rewritten and telescoped objectives holds in
        // the time-varying case too.
        let direct = eliminated_form_objective(&model, &sched).unwrap();
        assert!((direct - sched.objective_nats).abs() < 1e-6 * (1.0 + direct.abs()));
        assert!(schedule_violation(&model, &spec, &sched) < 1e-7);
    }

    #[test]
    fn tiny_distortion_bound_still_solves() {
        let model = scalar_model(1.0, 1.0, 1.0, 3);
        let spec = DistortionSpec::hard(vec![eye(1); 3], vec![1e-6; 3]).unwrap();
        let srd = build_finite_hard(&model, &spec).unwrap();
        let sol = solve(&srd.problem, &SolverConfig::default()).unwrap();
        assert_eq!(sol.status, SolverStatus::Optimal);
        let sched = srd.decode(&sol).unwrap();
        // P_t pinned at the bound; rate per step about (1/2) log(pred/1e-6).
        assert!((sched.p_filt[0][(0, 0)] - 1e-6).abs() < 1e-9);
        assert!(sched.objective_nats > 3.0);
        assert!(schedule_violation(&model, &spec, &sched) < 1e-7);
    }

    #[test]
    fn singular_theta_constrains_only_observed_modes() {
        // Theta = diag(1, 0): only the first coordinate is distortion
        // constrained; the optimum discards the free mode (SNR rank <= 1).
        let a = DMatrix::from_row_slice(2, 2, &[0.9, 0.0, 0.0, 0.9]);
        let w = eye(2);
        let p0 = eye(2);
        let theta = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]);
        let model = GaussMarkovModel::finite(vec![a; 3], vec![w; 3], p0).unwrap();
        let spec = DistortionSpec::hard(vec![theta; 3], vec![0.5; 3]).unwrap();
        let srd = build_finite_hard(&model, &spec).unwrap();
        let sol = solve(&srd.problem, &SolverConfig::default()).unwrap();
        assert_eq!(sol.status, SolverStatus::Optimal);
        let sched = srd.decode(&sol).unwrap();
        let design = crate::synthesis::synthesize(
            &model,
            &sched,
            1e-9,
            crate::synthesis::DEFAULT_SNR_CLIP,
        )
        .unwrap();
        for (t, p) in sched.p_filt.iter().enumerate() {
            assert!(p[(0, 0)] <= 0.5 + 1e-7, "step {t}: {}", p[(0, 0)]);
            assert!(design.ranks[t] <= 1, "step {t}: rank {}", design.ranks[t]);
        }
    }

    #[test]
    fn lagrangian_equivalence_via_dual_multipliers() {
        // Solve hard, read alpha_t from the duals, re-solve soft: same
        // schedule (Proposition linking the two formulations).
        let model = scalar_model(1.0, 1.0, 1.0, 3);
        let spec = DistortionSpec::hard(vec![eye(1); 3], vec![0.5, 0.7, 0.4]).unwrap();
        let srd = build_finite_hard(&model, &spec).unwrap();
        let sol = solve(&srd.problem, &SolverConfig::default()).unwrap();
        assert_eq!(sol.status, SolverStatus::Optimal);
        let sched_hard = srd.decode(&sol).unwrap();
        let alphas = srd.distortion_multipliers(&sol).unwrap();
        assert!(alphas.iter().all(|&a| a > 0.0));
        let soft_spec = DistortionSpec::soft(vec![eye(1); 3], alphas).unwrap();
        let soft = build_finite_soft(&model, &soft_spec).unwrap();
        let sol_soft = solve(&soft.problem, &SolverConfig::default()).unwrap();
        let sched_soft = soft.decode(&sol_soft).unwrap();
        for (a, b) in sched_hard.p_filt.iter().zip(&sched_soft.p_filt) {
            assert!(
                (a[(0, 0)] - b[(0, 0)]).abs() < 1e-5,
                "{} vs {}",
                a[(0, 0)],
                b[(0, 0)]
            );
        }
    }
}

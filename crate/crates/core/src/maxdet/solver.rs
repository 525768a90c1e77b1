//! Primal-dual path following.
//!
//! The iterates stay in the infinity-norm neighborhood
//! `N(gamma) = {(X, y, Z) feasible : d_inf(X, Z) <= gamma mu(X, Z)}` where
//!
//!   d_inf = max( max_{i in I*} c_i - lambda_min(X_i Z_i),
//!                max_{i not in I*} mu - lambda_min(X_i Z_i) ).
//!
//! Each iteration targets `w_i = c_i` on I* blocks and `w_i = sigma mu`
//! elsewhere, takes the NT-scaled Newton step, and backtracks from a unit
//! step until the candidate is back inside the neighborhood. Initialization
//! centers a strictly feasible primal hint on the `nu = 1` barrier problem
//! with damped Newton steps.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{cholesky, frob_dot, symmetrize};
use crate::maxdet::gap::{gap_info, GapInfo};
use crate::maxdet::newton::{assemble_normal, newton_direction, Layout};
use crate::maxdet::problem::{BlockDiag, MaxDetProblem};
use crate::maxdet::scaling::nt_point;

#[derive(Clone, Copy, Debug)]
pub struct SolverConfig {
    /// Central-path neighborhood size, in (0, 1).
    pub gamma: f64,
    /// Barrier reduction rate, in (0, 1).
    pub sigma: f64,
    /// Relative duality-gap tolerance: stop once `mu <= eps * mu_0`.
    pub eps: f64,
    pub max_iters: usize,
    /// Relative eigenvalue tolerance used by downstream factorizations.
    pub rank_tol: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            gamma: 0.3,
            sigma: 0.3,
            eps: 1e-8,
            max_iters: 200,
            rank_tol: 1e-9,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(Error::InvalidModel(format!(
                "gamma {} not in (0,1)",
                self.gamma
            )));
        }
        if !(self.sigma > 0.0 && self.sigma < 1.0) {
            return Err(Error::InvalidModel(format!(
                "sigma {} not in (0,1)",
                self.sigma
            )));
        }
        if !(self.eps > 0.0) {
            return Err(Error::InvalidModel(format!(
                "eps {} not positive",
                self.eps
            )));
        }
        if self.max_iters == 0 {
            return Err(Error::InvalidModel("max_iters is zero".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum SolverStatus {
    Optimal,
    MaxIters,
    NumericalFailure,
    Infeasible,
}

impl std::fmt::Display for SolverStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            SolverStatus::Optimal => "optimal",
            SolverStatus::MaxIters => "max_iters",
            SolverStatus::NumericalFailure => "numerical_failure",
            SolverStatus::Infeasible => "infeasible",
        };
        f.write_str(s)
    }
}

/// The five scalars used for status determination and by tests.
#[derive(Clone, Copy, Debug)]
pub struct KktResiduals {
    pub primal: f64,
    pub dual: f64,
    pub min_eig_x: f64,
    pub min_eig_z: f64,
    /// Primal objective minus dual objective.
    pub gap: f64,
}

#[derive(Clone, Debug)]
pub struct SolverSolution {
    pub x: BlockDiag,
    pub y: DVector<f64>,
    pub z: BlockDiag,
    /// Final extended normalized duality gap.
    pub mu: f64,
    /// Gap at the initial point (the termination test is `mu <= eps * mu0`).
    pub mu0: f64,
    /// Primal objective value.
    pub objective: f64,
    pub iterations: usize,
    pub status: SolverStatus,
    pub residuals: KktResiduals,
}

/// Per-iteration diagnostic record emitted through the caller's sink.
#[derive(Clone, Copy, Debug)]
pub struct IterationRecord {
    pub iteration: usize,
    pub mu: f64,
    pub step: f64,
    pub primal_res: f64,
    pub dual_res: f64,
    pub d_inf: f64,
    /// Primal objective minus dual objective at the accepted iterate.
    pub objective_gap: f64,
}

pub trait IterationSink {
    fn record(&mut self, rec: &IterationRecord);
}

impl IterationSink for () {
    fn record(&mut self, _rec: &IterationRecord) {}
}

impl IterationSink for Vec<IterationRecord> {
    fn record(&mut self, rec: &IterationRecord) {
        self.push(*rec);
    }
}

/// Computes primal/dual residuals, extreme block eigenvalues and the duality
/// gap for an arbitrary state.
pub fn kkt_residuals(
    x: &BlockDiag,
    y: &DVector<f64>,
    z: &BlockDiag,
    p: &MaxDetProblem,
) -> KktResiduals {
    let primal = (&p.rhs - p.apply_a(x)).norm();
    let aty = p.apply_at(y);
    let dual = BlockDiag {
        blocks: p
            .cost
            .iter()
            .zip(&aty.blocks)
            .zip(&z.blocks)
            .map(|((c, a), zb)| c - a - zb)
            .collect(),
    }
    .norm();
    let min_eig_x = x
        .blocks
        .iter()
        .map(crate::linalg::min_eig)
        .fold(f64::INFINITY, f64::min);
    let min_eig_z = z
        .blocks
        .iter()
        .map(crate::linalg::min_eig)
        .fold(f64::INFINITY, f64::min);
    let gap = match (p.primal_objective(x), p.dual_objective(y, z)) {
        (Ok(pv), Ok(dv)) => pv - dv,
        _ => f64::INFINITY,
    };
    KktResiduals {
        primal,
        dual,
        min_eig_x,
        min_eig_z,
        gap,
    }
}

/// `lambda_min(X_i Z_i)` per block via the Cholesky similarity.
fn product_min_eigs(x: &BlockDiag, z: &BlockDiag) -> Option<Vec<f64>> {
    let mut out = Vec::with_capacity(x.blocks.len());
    for (xb, zb) in x.blocks.iter().zip(&z.blocks) {
        let chol = crate::linalg::symmetric_part(xb).cholesky()?;
        let l = chol.l();
        let m = l.transpose() * zb * l;
        let eig = crate::linalg::min_eig(&m);
        out.push(eig);
    }
    Some(out)
}

/// Neighborhood distance `d_inf`; `None` when a block product is not PD or
/// the gap is closed (the caller decides what that means).
fn neighborhood_distance(
    x: &BlockDiag,
    z: &BlockDiag,
    p: &MaxDetProblem,
) -> Result<(GapInfo, f64)> {
    let info = gap_info(x, z, &p.blocks)?;
    let eigs = product_min_eigs(x, z)
        .ok_or_else(|| Error::Numerical("block not PD in neighborhood test".into()))?;
    let mut d = f64::NEG_INFINITY;
    for (i, spec) in p.blocks.iter().enumerate() {
        if eigs[i] <= 0.0 {
            return Err(Error::Numerical("X Z has non-positive eigenvalue".into()));
        }
        let target = if info.in_istar[i] {
            spec.weight
        } else {
            info.mu
        };
        d = d.max(target - eigs[i]);
    }
    Ok((info, d))
}

enum InitOutcome {
    /// Interior point inside the neighborhood, ready for path following.
    Interior(BlockDiag, DVector<f64>, BlockDiag),
    /// Centering already drove `<X,Z>` to the weighted floor: the barrier
    /// problem at `nu = 1` coincides with (P) and the center is optimal.
    Converged(BlockDiag, DVector<f64>, BlockDiag),
}

/// Barrier objective for the `nu^0 = 1` centering problem.
fn centering_objective(p: &MaxDetProblem, x: &BlockDiag, w: &[f64]) -> Result<f64> {
    let mut f = 0.0;
    for i in 0..p.blocks.len() {
        f += frob_dot(&p.cost[i], &x.blocks[i]);
        f -= w[i] * crate::linalg::logdet_pd(&x.blocks[i], "centering block")?;
    }
    Ok(f)
}

fn center_on_initial_barrier(
    p: &MaxDetProblem,
    layout: &Layout,
    cfg: &SolverConfig,
    hint: &BlockDiag,
) -> Result<InitOutcome> {
    let w: Vec<f64> = p.blocks.iter().map(|b| b.weight.max(1.0)).collect();

    // Hint must satisfy the equality constraints and be strictly PD.
    let feas = (&p.rhs - p.apply_a(hint)).norm();
    if feas > 1e-7 * (1.0 + p.rhs.norm()) {
        return Err(Error::Infeasible(format!(
            "primal hint violates A(X) = b (residual {feas:.3e})"
        )));
    }
    for (i, b) in hint.blocks.iter().enumerate() {
        if b.shape() != (p.blocks[i].size, p.blocks[i].size) {
            return Err(Error::Dimension(format!("hint block {i} shape")));
        }
        cholesky(b, "primal hint block")
            .map_err(|_| Error::Infeasible(format!("primal hint block {i} not PD")))?;
    }

    let mut x = hint.clone();
    for b in &mut x.blocks {
        symmetrize(b);
    }

    if p.rows.is_empty() {
        // Unconstrained: the nu = 1 center is X_i = w_i C_i^{-1} in closed
        // form, provided every cost block is PD (otherwise unbounded below).
        let mut blocks = Vec::with_capacity(p.blocks.len());
        for i in 0..p.blocks.len() {
            let cinv = crate::linalg::inv_pd(&p.cost[i], "cost block").map_err(|_| {
                Error::Infeasible(
                    "unconstrained problem with non-PD cost block is unbounded below".into(),
                )
            })?;
            blocks.push(cinv * w[i]);
        }
        let x = BlockDiag { blocks };
        let z = BlockDiag {
            blocks: p.cost.clone(),
        };
        let y = DVector::zeros(0);
        return match gap_info(&x, &z, &p.blocks) {
            Ok(_) => Ok(InitOutcome::Interior(x, y, z)),
            Err(Error::GapClosed) => Ok(InitOutcome::Converged(x, y, z)),
            Err(e) => Err(e),
        };
    }

    let mut f_cur = centering_objective(p, &x, &w)?;
    for _iter in 0..200 {
        // Newton step for min <C,X> - sum w_i log det X_i s.t. A(X) = b:
        // solve M lambda = A(X - (1/w) X C X), then
        // dX_i = X_i - (1/w_i) X_i (C + A*(lambda))_i X_i.
        let g: Vec<DMatrix<f64>> = x
            .blocks
            .iter()
            .zip(&w)
            .map(|(xb, wi)| xb / wi.sqrt())
            .collect();
        let mut normal = assemble_normal(p, layout, &g);
        normal.factorize()?;
        let u = BlockDiag {
            blocks: x
                .blocks
                .iter()
                .zip(&p.cost)
                .zip(&w)
                .map(|((xb, c), wi)| {
                    let mut v = xb * c * xb / *wi;
                    symmetrize(&mut v);
                    v
                })
                .collect(),
        };
        let q = p.apply_a(&x) - p.apply_a(&u);
        let lambda = normal.solve(&q)?;

        let y = -lambda.clone();
        let atl = p.apply_at(&lambda);
        // Z = C + A*(lambda) is dual-feasible by construction for y = -lambda.
        let z = BlockDiag {
            blocks: p
                .cost
                .iter()
                .zip(&atl.blocks)
                .map(|(c, a)| {
                    let mut v = c + a;
                    symmetrize(&mut v);
                    v
                })
                .collect(),
        };

        let z_pd = z
            .blocks
            .iter()
            .all(|b| crate::linalg::symmetric_part(b).cholesky().is_some());
        if z_pd {
            match neighborhood_distance(&x, &z, p) {
                Ok((info, d)) => {
                    if d <= cfg.gamma * info.mu {
                        return Ok(InitOutcome::Interior(x, y, z));
                    }
                }
                Err(Error::GapClosed) => return Ok(InitOutcome::Converged(x, y, z)),
                Err(_) => {}
            }
        }

        // dX and the Newton decrement.
        let mut dx = BlockDiag::zeros_like(&p.blocks);
        let mut decrement_sq = 0.0;
        for i in 0..p.blocks.len() {
            let mut step = &x.blocks[i] - &x.blocks[i] * &z.blocks[i] * &x.blocks[i] / w[i];
            symmetrize(&mut step);
            let lx = cholesky(&x.blocks[i], "centering block")?;
            let li = lx
                .l()
                .solve_lower_triangular(&step)
                .ok_or_else(|| Error::Numerical("triangular solve failed in centering".into()))?;
            let scaled = lx
                .l()
                .solve_lower_triangular(&li.transpose())
                .ok_or_else(|| Error::Numerical("triangular solve failed in centering".into()))?;
            decrement_sq += w[i] * frob_dot(&scaled, &scaled);
            dx.blocks[i] = step;
        }
        let decrement = decrement_sq.max(0.0).sqrt();
        if decrement < 1e-11 {
            // Fully centered but the neighborhood test above did not accept:
            // the only remaining possibility is a closed gap.
            return match gap_info(&x, &z, &p.blocks) {
                Err(Error::GapClosed) => Ok(InitOutcome::Converged(x, y, z)),
                _ => Ok(InitOutcome::Interior(x, y, z)),
            };
        }

        // Damped step with Armijo backtracking on the barrier objective.
        let mut alpha = (1.0f64).min(1.0 / (1.0 + decrement));
        let mut accepted = false;
        for _ in 0..70 {
            let cand = x.axpy(alpha, &dx);
            let pd = cand
                .blocks
                .iter()
                .all(|b| crate::linalg::symmetric_part(b).cholesky().is_some());
            if pd {
                if let Ok(f_new) = centering_objective(p, &cand, &w) {
                    if f_new <= f_cur - 0.01 * alpha * decrement_sq {
                        x = cand;
                        f_cur = f_new;
                        accepted = true;
                        break;
                    }
                }
            }
            alpha *= 0.5;
        }
        if !accepted {
            return Err(Error::Infeasible(
                "centering stalled before reaching the neighborhood".into(),
            ));
        }
    }
    Err(Error::Infeasible(
        "centering did not reach the central-path neighborhood".into(),
    ))
}

/// Produces a point in the neighborhood `N(gamma)` from a strictly feasible
/// primal hint (the problem's own hint when `hint` is `None`).
pub fn initial_point(
    p: &MaxDetProblem,
    cfg: &SolverConfig,
    hint: Option<&BlockDiag>,
) -> Result<(BlockDiag, DVector<f64>, BlockDiag)> {
    let layout = Layout::build(p);
    let fallback = if p.rows.is_empty() {
        Some(BlockDiag::identity(&p.blocks))
    } else {
        None
    };
    let hint = hint
        .or(p.primal_hint.as_ref())
        .or(fallback.as_ref())
        .ok_or_else(|| Error::Infeasible("no primal hint available for initialization".into()))?;
    match center_on_initial_barrier(p, &layout, cfg, hint)? {
        InitOutcome::Interior(x, y, z) | InitOutcome::Converged(x, y, z) => Ok((x, y, z)),
    }
}

/// Solves the problem; see module docs for the algorithm.
pub fn solve(p: &MaxDetProblem, cfg: &SolverConfig) -> Result<SolverSolution> {
    solve_with_sink(p, cfg, &mut ())
}

pub fn solve_with_sink(
    p: &MaxDetProblem,
    cfg: &SolverConfig,
    sink: &mut dyn IterationSink,
) -> Result<SolverSolution> {
    p.validate()?;
    cfg.validate()?;
    let reduced;
    let prob: &MaxDetProblem = if p.rows_verified {
        p
    } else {
        match p.presolved() {
            Ok((r, _)) => {
                reduced = r;
                &reduced
            }
            Err(Error::Infeasible(msg)) => {
                return Ok(failed_solution(p, SolverStatus::Infeasible, &msg));
            }
            Err(e) => return Err(e),
        }
    };
    let layout = Layout::build(prob);

    let identity_hint;
    let hint = match prob.primal_hint.as_ref() {
        Some(h) => h,
        None if prob.rows.is_empty() => {
            identity_hint = BlockDiag::identity(&prob.blocks);
            &identity_hint
        }
        None => {
            return Ok(failed_solution(
                prob,
                SolverStatus::Infeasible,
                "no primal hint available",
            ))
        }
    };
    let init = match center_on_initial_barrier(prob, &layout, cfg, hint) {
        Ok(o) => o,
        Err(Error::Infeasible(msg)) => {
            return Ok(failed_solution(prob, SolverStatus::Infeasible, &msg))
        }
        Err(Error::NotPositiveDefinite(msg)) => {
            return Ok(failed_solution(prob, SolverStatus::Infeasible, &msg))
        }
        Err(Error::Numerical(msg)) => {
            return Ok(failed_solution(prob, SolverStatus::NumericalFailure, &msg))
        }
        Err(e) => return Err(e),
    };

    let (mut x, mut y, mut z, mut converged) = match init {
        InitOutcome::Interior(x, y, z) => (x, y, z, false),
        InitOutcome::Converged(x, y, z) => (x, y, z, true),
    };

    let mut iterations = 0usize;
    let mut status = SolverStatus::Optimal;
    let mut mu_final = 0.0;
    let mut mu_start = 0.0;

    if !converged {
        let mu0 = match gap_info(&x, &z, &prob.blocks) {
            Ok(i) => i.mu,
            Err(Error::GapClosed) => {
                converged = true;
                0.0
            }
            Err(e) => return Err(e),
        };
        mu_start = mu0;
        if !converged {
            status = SolverStatus::MaxIters;
            'outer: for k in 0..cfg.max_iters {
                let info = match gap_info(&x, &z, &prob.blocks) {
                    Ok(i) => i,
                    Err(Error::GapClosed) => {
                        status = SolverStatus::Optimal;
                        mu_final = 0.0;
                        break 'outer;
                    }
                    Err(e) => return Err(e),
                };
                mu_final = info.mu;
                if info.mu <= cfg.eps * mu0 {
                    status = SolverStatus::Optimal;
                    break 'outer;
                }

                let mut g = Vec::with_capacity(prob.blocks.len());
                for (xb, zb) in x.blocks.iter().zip(&z.blocks) {
                    match nt_point(xb, zb) {
                        Ok(nt) => g.push(nt.g),
                        Err(_) => {
                            status = SolverStatus::NumericalFailure;
                            break 'outer;
                        }
                    }
                }
                let targets: Vec<f64> = prob
                    .blocks
                    .iter()
                    .zip(&info.in_istar)
                    .map(|(b, &s)| if s { b.weight } else { cfg.sigma * info.mu })
                    .collect();
                let dir = match newton_direction(prob, &layout, &x, &y, &z, &g, &targets) {
                    Ok(d) => d,
                    Err(_) => {
                        status = SolverStatus::NumericalFailure;
                        break 'outer;
                    }
                };

                // Largest step staying in the neighborhood (backtracking;
                // precision here is not critical).
                let mut alpha = 1.0;
                let mut accepted = false;
                while alpha > 1e-13 {
                    let xc = x.axpy(alpha, &dir.dx);
                    let yc = &y + &dir.dy * alpha;
                    let zc = z.axpy(alpha, &dir.dz);
                    // A candidate outside the neighborhood, or one that
                    // drives <X,Z> to or below the weighted floor
                    // (overshooting the central path), is rejected and the
                    // step backtracks.
                    if let Ok((cand_info, d)) = neighborhood_distance(&xc, &zc, prob) {
                        if d <= cfg.gamma * cand_info.mu && cand_info.mu <= info.mu * (1.0 + 1e-12)
                        {
                            let rec = IterationRecord {
                                iteration: k,
                                mu: cand_info.mu,
                                step: alpha,
                                primal_res: (&prob.rhs - prob.apply_a(&xc)).norm(),
                                dual_res: dual_residual(prob, &yc, &zc),
                                d_inf: d,
                                objective_gap: match (
                                    prob.primal_objective(&xc),
                                    prob.dual_objective(&yc, &zc),
                                ) {
                                    (Ok(pv), Ok(dv)) => pv - dv,
                                    _ => f64::NAN,
                                },
                            };
                            sink.record(&rec);
                            x = xc;
                            y = yc;
                            z = zc;
                            mu_final = cand_info.mu;
                            iterations = k + 1;
                            accepted = true;
                            break;
                        }
                    }
                    alpha *= 0.8;
                }
                if !accepted {
                    status = SolverStatus::NumericalFailure;
                    break 'outer;
                }
            }
        }
    }
    let _ = converged;

    let residuals = kkt_residuals(&x, &y, &z, prob);
    let objective = prob.primal_objective(&x).unwrap_or(f64::INFINITY);
    if status == SolverStatus::Optimal {
        let scale = 1.0 + prob.rhs.norm().max(prob_cost_norm(prob));
        if !(residuals.primal <= 1e-7 * scale
            && residuals.dual <= 1e-7 * scale
            && residuals.min_eig_x > 0.0
            && residuals.min_eig_z > 0.0)
        {
            status = SolverStatus::NumericalFailure;
        }
    }
    Ok(SolverSolution {
        x,
        y,
        z,
        mu: mu_final,
        mu0: mu_start,
        objective,
        iterations,
        status,
        residuals,
    })
}

fn prob_cost_norm(p: &MaxDetProblem) -> f64 {
    p.cost
        .iter()
        .map(|c| crate::linalg::frob_norm(c).powi(2))
        .sum::<f64>()
        .sqrt()
}

fn dual_residual(p: &MaxDetProblem, y: &DVector<f64>, z: &BlockDiag) -> f64 {
    let aty = p.apply_at(y);
    BlockDiag {
        blocks: p
            .cost
            .iter()
            .zip(&aty.blocks)
            .zip(&z.blocks)
            .map(|((c, a), zb)| c - a - zb)
            .collect(),
    }
    .norm()
}

fn failed_solution(p: &MaxDetProblem, status: SolverStatus, _msg: &str) -> SolverSolution {
    let x = p
        .primal_hint
        .clone()
        .unwrap_or_else(|| BlockDiag::identity(&p.blocks));
    let y = DVector::zeros(p.rows.len());
    let z = BlockDiag::identity(&p.blocks);
    let residuals = kkt_residuals(&x, &y, &z, p);
    SolverSolution {
        x,
        y,
        z,
        mu: f64::MAX,
        mu0: f64::MAX,
        objective: f64::INFINITY,
        iterations: 0,
        status,
        residuals,
    }
}

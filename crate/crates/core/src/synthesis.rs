//! Sensor synthesis: matrix SNR extraction from a covariance schedule, its
//! minimal-dimension factorization `SNR_t = C_t^T V_t^{-1} C_t`, Kalman
//! covariance recursions and per-step information rates.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{inv_pd, logdet_pd, max_eig, sym_eigen_sorted, symmetric_part};
use crate::model::{CovarianceSchedule, GaussMarkovModel, Horizon};

/// Relative eigenvalue floor separating true zero modes of an extracted SNR
/// from solver noise. The solver's duality-gap tolerance is 1e-8; slack-block
/// leakage into `P^{-1} - pred^{-1}` sits two to three orders above it, so
/// clipping at 1e-5 of the local scale zeroes noise while leaving genuine
/// modes (which sit at the distortion scale) untouched.
pub const DEFAULT_SNR_CLIP: f64 = 1e-5;

/// A synthesized linear-Gaussian sensor with its Kalman filter covariances.
#[derive(Clone, Debug)]
pub struct SensorDesign {
    /// `SNR_t = C_t^T V_t^{-1} C_t`, one PSD matrix per step.
    pub snr: Vec<DMatrix<f64>>,
    /// Sensing matrices, `r_t x n` (empty matrix when `r_t = 0`).
    pub c: Vec<DMatrix<f64>>,
    /// Sensor noise covariances, fixed to `I_{r_t}` by convention.
    pub v: Vec<DMatrix<f64>>,
    /// Minimal sensor output dimensions `r_t = rank(SNR_t)`.
    pub ranks: Vec<usize>,
    /// `P_{t|t-1}` per step.
    pub p_pred: Vec<DMatrix<f64>>,
    /// `P_{t|t}` per step.
    pub p_filt: Vec<DMatrix<f64>>,
    pub rate_per_step_nats: Vec<f64>,
}

/// `SNR_t = P_{t|t}^{-1} - (A_{t-1} P_{t-1|t-1} A_{t-1}^T + W_{t-1})^{-1}`,
/// eigenvalue-clipped to PSD. For stationary schedules the prediction uses
/// the solved fixed point itself.
///
/// Eigenvalues below `clip_tol` times the local scale are zeroed; values
/// more negative than ten times that margin mean the schedule violates
/// `P_{t|t} <= prediction` and are an error.
pub fn snr_from_schedule(
    model: &GaussMarkovModel,
    schedule: &CovarianceSchedule,
    clip_tol: f64,
) -> Result<Vec<DMatrix<f64>>> {
    let mut out = Vec::with_capacity(schedule.p_filt.len());
    let mut p_prev = match model.horizon {
        Horizon::Finite(_) => model.p0.clone(),
        Horizon::Stationary => schedule.p_filt[0].clone(),
    };
    for (t, p_t) in schedule.p_filt.iter().enumerate() {
        let a = model.a_at(t);
        let w = model.w_at(t);
        let pred = symmetric_part(&(a * &p_prev * a.transpose() + w));
        let filt_inv = inv_pd(p_t, "filtered covariance")?;
        let pred_inv = inv_pd(&pred, "prediction covariance")?;
        let raw = symmetric_part(&(&filt_inv - &pred_inv));
        let scale = max_eig(&filt_inv).max(1e-300);
        let floor = clip_tol * scale;
        let (vals, q) = sym_eigen_sorted(&raw);
        if let Some(&worst) = vals.last() {
            if worst < -10.0 * floor {
                return Err(Error::Inconsistent(format!(
                    "schedule step {}: P_filt exceeds the prediction covariance (SNR eigenvalue {worst:.3e})",
                    t + 1
                )));
            }
        }
        let clipped = DMatrix::from_diagonal(&DVector::from_iterator(
            vals.len(),
            vals.iter().map(|&v| if v > floor { v } else { 0.0 }),
        ));
        out.push(symmetric_part(&(&q * clipped * q.transpose())));
        p_prev = p_t.clone();
    }
    Ok(out)
}

/// Rank-revealing factorization `SNR = C^T V^{-1} C` with `V = I` by
/// convention: keep eigenpairs above `rank_tol` relative to the largest
/// eigenvalue, `C = Lambda^{1/2} U^T`.
pub fn factor_snr(
    snr: &DMatrix<f64>,
    rank_tol: f64,
) -> Result<(DMatrix<f64>, DMatrix<f64>, usize)> {
    let n = snr.nrows();
    let (vals, q) = sym_eigen_sorted(snr);
    let lmax = vals.first().copied().unwrap_or(0.0).max(0.0);
    let rank = vals
        .iter()
        .filter(|&&v| v > rank_tol * lmax && v > 0.0)
        .count();
    let mut c = DMatrix::zeros(rank, n);
    for k in 0..rank {
        let s = vals[k].sqrt();
        for j in 0..n {
            c[(k, j)] = s * q[(j, k)];
        }
    }
    let v = DMatrix::identity(rank, rank);
    // Reconstruction check against the input.
    let rebuilt = c.transpose() * &c;
    let err = crate::linalg::frob_norm(&(&rebuilt - snr));
    if err > 1e-8 * (1.0 + crate::linalg::frob_norm(snr)) + rank_tol * (1.0 + lmax) * n as f64 {
        return Err(Error::Numerical(format!(
            "SNR factorization reconstruction error {err:.3e}"
        )));
    }
    Ok((c, v, rank))
}

/// Kalman covariance recursion for a finite-horizon model:
/// `P_{t|t-1} = A P_{t-1|t-1} A^T + W`, `P_{t|t} = (P_{t|t-1}^{-1} + SNR_t)^{-1}`.
pub fn kalman_covariances(
    model: &GaussMarkovModel,
    snr: &[DMatrix<f64>],
) -> Result<(Vec<DMatrix<f64>>, Vec<DMatrix<f64>>)> {
    let mut p_pred = Vec::with_capacity(snr.len());
    let mut p_filt = Vec::with_capacity(snr.len());
    let mut p_prev = model.p0.clone();
    for (t, s) in snr.iter().enumerate() {
        let a = model.a_at(t);
        let w = model.w_at(t);
        let pred = symmetric_part(&(a * &p_prev * a.transpose() + w));
        let filt = inv_pd(
            &(inv_pd(&pred, "prediction covariance")? + s),
            "information matrix",
        )?;
        p_pred.push(pred);
        p_filt.push(filt.clone());
        p_prev = filt;
    }
    Ok((p_pred, p_filt))
}

/// Per-step information rate `(1/2) log det P_{t|t-1} - (1/2) log det P_{t|t}`
/// in nats.
pub fn rate_per_step(p_pred: &[DMatrix<f64>], p_filt: &[DMatrix<f64>]) -> Result<Vec<f64>> {
    p_pred
        .iter()
        .zip(p_filt)
        .map(|(pp, pf)| {
            Ok(0.5 * logdet_pd(pp, "prediction covariance")?
                - 0.5 * logdet_pd(pf, "filtered covariance")?)
        })
        .collect()
}

/// The minimal sensor dimensions of a design.
pub fn sensor_dimension_profile(design: &SensorDesign) -> Vec<usize> {
    design.ranks.clone()
}

/// Full synthesis from a solved schedule: SNR extraction, factorization, and
/// the Kalman covariances/rates implied by the design.
///
/// For finite-horizon models the covariances are re-derived through the
/// Kalman recursion (round-tripping the schedule); stationary schedules use
/// the solved fixed point directly.
pub fn synthesize(
    model: &GaussMarkovModel,
    schedule: &CovarianceSchedule,
    rank_tol: f64,
    clip_tol: f64,
) -> Result<SensorDesign> {
    let snr = snr_from_schedule(model, schedule, clip_tol)?;
    let mut c_list = Vec::with_capacity(snr.len());
    let mut v_list = Vec::with_capacity(snr.len());
    let mut ranks = Vec::with_capacity(snr.len());
    for s in &snr {
        let (c, v, r) = factor_snr(s, rank_tol)?;
        c_list.push(c);
        v_list.push(v);
        ranks.push(r);
    }
    let (p_pred, p_filt) = match model.horizon {
        Horizon::Finite(_) => kalman_covariances(model, &snr)?,
        Horizon::Stationary => {
            let p = schedule.p_filt[0].clone();
            let a = model.a_at(0);
            let w = model.w_at(0);
            let pred = symmetric_part(&(a * &p * a.transpose() + w));
            (vec![pred], vec![p])
        }
    };
    let rate_per_step_nats = rate_per_step(&p_pred, &p_filt)?;
    Ok(SensorDesign {
        snr,
        c: c_list,
        v: v_list,
        ranks,
        p_pred,
        p_filt,
        rate_per_step_nats,
    })
}

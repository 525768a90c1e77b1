//! Independent reference implementations used to validate the SDP pipeline:
//! scalar closed forms, reverse water-filling, and a brute-force grid search
//! over scalar sensor SNR sequences.

use crate::error::{Error, Result};
use crate::model::{DistortionMode, DistortionSpec, GaussMarkovModel};

/// Stationary scalar SRD function `max{0, (1/2) log(a^2 + w/D)}` in nats.
pub fn scalar_stationary_srd(a: f64, w: f64, d: f64) -> f64 {
    assert!(w > 0.0 && d > 0.0);
    (0.5 * (a * a + w / d).ln()).max(0.0)
}

/// Rate-distortion function of a unit-variance scalar Gaussian:
/// `max{0, (1/2) log(1/D)}` in nats.
pub fn scalar_memoryless_rd(d: f64) -> f64 {
    assert!(d > 0.0);
    (0.5 * (1.0 / d).ln()).max(0.0)
}

/// Optimal scalar sensor SNR for the memoryless problem:
/// `max{0, 1/D - 1}`.
pub fn scalar_snr_for_distortion(d: f64) -> f64 {
    assert!(d > 0.0);
    (1.0 / d - 1.0).max(0.0)
}

#[derive(Clone, Debug)]
pub struct WaterfillResult {
    /// Per-mode reproduction variances `p_i = min(level, sigma_i^2)`.
    pub levels: Vec<f64>,
    /// The water level (`1/alpha` in soft mode).
    pub water_level: f64,
    pub rate_nats: f64,
    pub distortion: f64,
}

fn waterfill_at_level(sigma2: &[f64], level: f64) -> WaterfillResult {
    let levels: Vec<f64> = sigma2.iter().map(|&s| level.min(s)).collect();
    let rate_nats: f64 = sigma2
        .iter()
        .zip(&levels)
        .map(|(&s, &p)| {
            if p > 0.0 && s > p {
                0.5 * (s / p).ln()
            } else {
                0.0
            }
        })
        .sum();
    let distortion = levels.iter().sum();
    WaterfillResult {
        levels,
        water_level: level,
        rate_nats,
        distortion,
    }
}

/// Soft-constrained reverse water-filling: `p_i = min(1/alpha, sigma_i^2)`.
pub fn reverse_waterfill_soft(sigma2: &[f64], alpha: f64) -> WaterfillResult {
    assert!(alpha > 0.0);
    assert!(sigma2.iter().all(|&s| s >= 0.0));
    waterfill_at_level(sigma2, 1.0 / alpha)
}

/// Hard-constrained reverse water-filling: the level solves
/// `sum_i min(level, sigma_i^2) = min(D, sum sigma_i^2)` by an exact
/// breakpoint scan over the sorted variances.
pub fn reverse_waterfill_hard(sigma2: &[f64], d: f64) -> WaterfillResult {
    assert!(d > 0.0);
    assert!(sigma2.iter().all(|&s| s >= 0.0));
    let total: f64 = sigma2.iter().sum();
    let target = d.min(total);
    let mut sorted = sigma2.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = sorted.len();
    // Scan ascending: once the per-mode share drops below the next variance
    // breakpoint, the level is exact.
    let mut consumed = 0.0;
    let mut level = target / n as f64;
    for (k, &s) in sorted.iter().enumerate() {
        let active = (n - k) as f64;
        let candidate = (target - consumed) / active;
        if candidate <= s {
            level = candidate;
            break;
        }
        consumed += s;
        level = s;
    }
    waterfill_at_level(sigma2, level)
}

#[derive(Clone, Debug)]
pub struct GridOracleResult {
    /// Minimal total rate over distortion-feasible grid points, in nats.
    pub rate_nats: f64,
    /// The minimizing SNR sequence on the grid.
    pub snr: Vec<f64>,
    /// Upper bound on how far above the true optimum the grid value can sit
    /// (one grid step per stage times a rate Lipschitz bound).
    pub gap_bound: f64,
}

struct ScalarParams {
    a: Vec<f64>,
    w: Vec<f64>,
    p0: f64,
    theta: Vec<f64>,
    d: Vec<f64>,
}

fn scalar_params(model: &GaussMarkovModel, spec: &DistortionSpec) -> Result<ScalarParams> {
    if model.n() != 1 {
        return Err(Error::InvalidModel(
            "grid oracle requires a scalar model".into(),
        ));
    }
    let t = model
        .horizon_len()
        .ok_or_else(|| Error::InvalidModel("grid oracle requires a finite horizon".into()))?;
    if t > 3 {
        return Err(Error::InvalidModel("grid oracle supports T <= 3".into()));
    }
    let d = match &spec.mode {
        DistortionMode::Hard(d) => d.clone(),
        DistortionMode::Soft(_) => {
            return Err(Error::InvalidModel(
                "grid oracle requires hard constraints".into(),
            ))
        }
    };
    Ok(ScalarParams {
        a: (0..t).map(|s| model.a_at(s)[(0, 0)]).collect(),
        w: (0..t).map(|s| model.w_at(s)[(0, 0)]).collect(),
        p0: model.p0[(0, 0)],
        theta: (0..t).map(|s| spec.theta_at(s)[(0, 0)]).collect(),
        d,
    })
}

/// Exhaustive search over scalar SNR sequences `snr_t in {0, delta, ...,
/// snr_max}` running the covariance recursion and summing per-step rates.
///
/// The last stage is resolved exactly: for fixed earlier stages the rate is
/// increasing and the filtered variance decreasing in the final SNR, so the
/// best feasible grid point is the smallest feasible one, which is computed
/// directly instead of scanned (same result as the full scan).
pub fn grid_oracle(
    model: &GaussMarkovModel,
    spec: &DistortionSpec,
    delta: f64,
) -> Result<GridOracleResult> {
    assert!(delta > 0.0);
    let p = scalar_params(model, spec)?;
    let t = p.a.len();
    let d_min = p.d.iter().cloned().fold(f64::INFINITY, f64::min);
    let snr_max = 10.0 / d_min;
    let steps = (snr_max / delta).ceil() as usize;

    // Rate and new variance for one stage.
    let stage = |p_prev: f64, k: usize, snr: f64| -> (f64, f64) {
        let pred = p.a[k] * p.a[k] * p_prev + p.w[k];
        let filt = 1.0 / (1.0 / pred + snr);
        (0.5 * (pred / filt).ln(), filt)
    };
    // Smallest grid SNR meeting the stage-k distortion bound, if any.
    let min_feasible_snr = |p_prev: f64, k: usize| -> Option<f64> {
        let pred = p.a[k] * p.a[k] * p_prev + p.w[k];
        let bound = p.d[k] / p.theta[k];
        let need = 1.0 / bound - 1.0 / pred;
        if need <= 0.0 {
            return Some(0.0);
        }
        let snr = (need / delta).ceil() * delta;
        if snr <= snr_max + 1e-12 {
            Some(snr)
        } else {
            None
        }
    };

    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut consider = |rate: f64, snrs: Vec<f64>| {
        if best.as_ref().is_none_or(|(r, _)| rate < *r) {
            best = Some((rate, snrs));
        }
    };

    match t {
        1 => {
            if let Some(s0) = min_feasible_snr(p.p0, 0) {
                let (r, _) = stage(p.p0, 0, s0);
                consider(r, vec![s0]);
            }
        }
        2 => {
            for i0 in 0..=steps {
                let s0 = i0 as f64 * delta;
                let (r0, p1) = stage(p.p0, 0, s0);
                if p.theta[0] * p1 > p.d[0] {
                    continue;
                }
                if let Some(s1) = min_feasible_snr(p1, 1) {
                    let (r1, _) = stage(p1, 1, s1);
                    consider(r0 + r1, vec![s0, s1]);
                }
            }
        }
        3 => {
            for i0 in 0..=steps {
                let s0 = i0 as f64 * delta;
                let (r0, p1) = stage(p.p0, 0, s0);
                if p.theta[0] * p1 > p.d[0] {
                    continue;
                }
                for i1 in 0..=steps {
                    let s1 = i1 as f64 * delta;
                    let (r1, p2) = stage(p1, 1, s1);
                    if p.theta[1] * p2 > p.d[1] {
                        continue;
                    }
                    if let Some(s2) = min_feasible_snr(p2, 2) {
                        let (r2, _) = stage(p2, 2, s2);
                        consider(r0 + r1 + r2, vec![s0, s1, s2]);
                    }
                }
            }
        }
        _ => unreachable!(),
    }

    let (rate_nats, snr) =
        best.ok_or_else(|| Error::Infeasible("grid too coarse: no feasible point found".into()))?;
    // d(rate)/d(snr) = pred / (2 (1 + snr * pred)) <= pred / 2; bound pred by
    // the free (zero-SNR) recursion.
    let mut pred_bound: f64 = 0.0;
    let mut pv = p.p0;
    for k in 0..t {
        let pred = p.a[k] * p.a[k] * pv + p.w[k];
        pred_bound = pred_bound.max(pred);
        pv = pred;
    }
    Ok(GridOracleResult {
        rate_nats,
        snr,
        gap_bound: t as f64 * delta * pred_bound / 2.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::DistortionSpec;
    use nalgebra::DMatrix;

    fn scalar_model(a: f64, w: f64, p0: f64, t: usize) -> GaussMarkovModel {
        GaussMarkovModel::finite(
            vec![DMatrix::from_element(1, 1, a); t],
            vec![DMatrix::from_element(1, 1, w); t],
            DMatrix::from_element(1, 1, p0),
        )
        .unwrap()
    }

    #[test]
    fn stationary_scalar_closed_form() {
        assert!((scalar_stationary_srd(1.0, 1.0, 1.0) - 0.5 * 2.0f64.ln()).abs() < 1e-15);
        assert_eq!(scalar_stationary_srd(0.0, 1.0, 1.0), 0.0);
        assert_eq!(scalar_stationary_srd(0.0, 1.0, 5.0), 0.0);
        // Unstable source floor: a = 2, D -> infinity gives (1/2) log 4.
        assert!((scalar_stationary_srd(2.0, 1.0, 1e12) - 2.0f64.ln()).abs() < 1e-9);
    }

    #[test]
    fn memoryless_rd_and_snr() {
        assert_eq!(scalar_memoryless_rd(1.0), 0.0);
        assert!((scalar_memoryless_rd(0.25) - 0.5 * 4.0f64.ln()).abs() < 1e-15);
        assert_eq!(scalar_memoryless_rd(2.0), 0.0);
        assert!((scalar_snr_for_distortion(0.5) - 1.0).abs() < 1e-15);
        assert_eq!(scalar_snr_for_distortion(1.0), 0.0);
        assert!((scalar_snr_for_distortion(0.1) - 9.0).abs() < 1e-12);
    }

    #[test]
    fn degenerates_to_memoryless_at_a_zero() {
        for &d in &[0.05, 0.3, 1.0, 4.0] {
            assert!((scalar_stationary_srd(0.0, 1.0, d) - scalar_memoryless_rd(d)).abs() < 1e-15);
        }
    }

    #[test]
    fn soft_waterfill_examples() {
        let r = reverse_waterfill_soft(&[4.0, 1.0], 0.5);
        assert_eq!(r.levels, vec![2.0, 1.0]);
        assert!((r.rate_nats - 0.5 * 2.0f64.ln()).abs() < 1e-15);
        assert!((r.distortion - 3.0).abs() < 1e-15);

        // Level above all variances: zero rate.
        let r = reverse_waterfill_soft(&[1.0, 1.0], 1.0);
        assert_eq!(r.levels, vec![1.0, 1.0]);
        assert_eq!(r.rate_nats, 0.0);

        // Rate ordering in alpha (large alpha buys more information).
        let r1 = reverse_waterfill_soft(&[4.0, 1.0], 10.0);
        let r2 = reverse_waterfill_soft(&[4.0, 1.0], 100.0);
        assert!(r2.rate_nats > r1.rate_nats);
    }

    #[test]
    fn hard_waterfill_examples() {
        let r = reverse_waterfill_hard(&[4.0, 1.0], 3.0);
        assert!((r.water_level - 2.0).abs() < 1e-12);
        assert_eq!(r.levels, vec![2.0, 1.0]);

        // D at or above the total variance: zero rate.
        let r = reverse_waterfill_hard(&[4.0, 1.0], 6.0);
        assert_eq!(r.rate_nats, 0.0);

        // Single mode reduces to the scalar RD function.
        let r = reverse_waterfill_hard(&[1.0], 0.25);
        assert!((r.water_level - 0.25).abs() < 1e-12);
        assert!((r.rate_nats - 0.5 * 4.0f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn hard_and_soft_waterfill_agree_at_matched_levels() {
        let sigma2 = [3.0, 2.0, 0.5, 0.1];
        for &alpha in &[0.4, 1.0, 2.5, 30.0] {
            let soft = reverse_waterfill_soft(&sigma2, alpha);
            let hard = reverse_waterfill_hard(&sigma2, soft.distortion);
            for (a, b) in soft.levels.iter().zip(&hard.levels) {
                assert!((a - b).abs() < 1e-12, "alpha {alpha}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn grid_oracle_single_stage() {
        let model = scalar_model(1.0, 1.0, 1.0, 1);
        let spec = DistortionSpec::hard(vec![DMatrix::identity(1, 1)], vec![0.5]).unwrap();
        let r = grid_oracle(&model, &spec, 1e-3).unwrap();
        // Closed form: (1/2) log 4.
        assert!((r.rate_nats - 0.5 * 4.0f64.ln()).abs() < 1e-3);

        // Huge D: zero rate at the zero-SNR grid point.
        let spec = DistortionSpec::hard(vec![DMatrix::identity(1, 1)], vec![100.0]).unwrap();
        let r = grid_oracle(&model, &spec, 1e-3).unwrap();
        assert_eq!(r.rate_nats, 0.0);
        assert_eq!(r.snr, vec![0.0]);
    }

    #[test]
    fn grid_oracle_rejects_nonscalar() {
        let model = GaussMarkovModel::finite(
            vec![DMatrix::identity(2, 2)],
            vec![DMatrix::identity(2, 2)],
            DMatrix::identity(2, 2),
        )
        .unwrap();
        let spec = DistortionSpec::hard(vec![DMatrix::identity(2, 2)], vec![0.5]).unwrap();
        assert!(grid_oracle(&model, &spec, 1e-2).is_err());
    }
}

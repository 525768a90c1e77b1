//! Monte Carlo validation of a synthesized sensor + Kalman filter pair, and
//! continuous-to-discrete model preparation.
//!
//! Paths use counter-based ChaCha streams (one stream per path, all derived
//! from the report seed), so simulation is reproducible and embarrassingly
//! parallel: chunk sums are reduced in index order and the result does not
//! depend on thread scheduling.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::{cholesky, frob_dot, frob_norm, inv_pd, symmetric_part};
use crate::model::{GaussMarkovModel, Horizon};
use crate::synthesis::SensorDesign;

const PATHS_PER_CHUNK: usize = 4096;

/// Empirical error statistics of a simulated design.
#[derive(Clone, Debug)]
pub struct SimulationReport {
    /// Per-step sample covariance of `x_t - z_t`, averaged over paths.
    pub empirical_err_cov: Vec<DMatrix<f64>>,
    /// The design's predicted `P_{t|t}`.
    pub predicted: Vec<DMatrix<f64>>,
    /// Max over steps of relative Frobenius deviation between empirical and
    /// predicted filtered covariances.
    pub max_rel_deviation: f64,
    /// `Tr(Theta_t . empirical)` per step when weights are supplied, else
    /// the plain error traces.
    pub distortion_series: Vec<f64>,
    pub paths: u64,
    pub seed: u64,
}

struct FilterGains {
    a: Vec<DMatrix<f64>>,
    l_w: Vec<DMatrix<f64>>,
    l_p0: DMatrix<f64>,
    c: Vec<DMatrix<f64>>,
    l_v: Vec<DMatrix<f64>>,
    gain: Vec<DMatrix<f64>>,
}

fn prepare(model: &GaussMarkovModel, design: &SensorDesign) -> Result<FilterGains> {
    let t_len = design.snr.len();
    if t_len == 0 {
        return Err(Error::InvalidModel("design has no steps".into()));
    }
    if matches!(model.horizon, Horizon::Finite(t) if t != t_len) {
        return Err(Error::Dimension(format!(
            "design horizon {t_len} differs from model horizon {:?}",
            model.horizon_len()
        )));
    }
    let n = model.n();
    let mut a = Vec::with_capacity(t_len);
    let mut l_w = Vec::with_capacity(t_len);
    let mut c = Vec::with_capacity(t_len);
    let mut l_v = Vec::with_capacity(t_len);
    let mut gain = Vec::with_capacity(t_len);
    for t in 0..t_len {
        a.push(model.a_at(t).clone());
        l_w.push(cholesky(model.w_at(t), "W")?.l());
        let ct = design.c[t].clone();
        if ct.ncols() != n {
            return Err(Error::Dimension(format!(
                "C_{t} has {} columns",
                ct.ncols()
            )));
        }
        let r = ct.nrows();
        let vt = &design.v[t];
        if vt.shape() != (r, r) {
            return Err(Error::Dimension(format!("V_{t} shape mismatch")));
        }
        let p_pred = &design.p_pred[t];
        let k = if r == 0 {
            DMatrix::zeros(n, 0)
        } else {
            let innov = &ct * p_pred * ct.transpose() + vt;
            p_pred * ct.transpose() * inv_pd(&innov, "innovation covariance")?
        };
        let lv = if r == 0 {
            DMatrix::zeros(0, 0)
        } else {
            cholesky(vt, "V")?.l()
        };
        c.push(ct);
        l_v.push(lv);
        gain.push(k);
    }
    Ok(FilterGains {
        a,
        l_w,
        l_p0: cholesky(&model.p0, "P0")?.l(),
        c,
        l_v,
        gain,
    })
}

fn standard_normal_vector(rng: &mut ChaCha12Rng, n: usize) -> DVector<f64> {
    DVector::from_iterator(n, (0..n).map(|_| StandardNormal.sample(rng)))
}

/// Simulates `n_paths` sample paths of the source through the sensor and
/// Kalman filter, reporting per-step empirical error covariances.
///
/// Steps with `r_t = 0` are measurement-free updates. The report is
/// bit-identical across runs for fixed `(model, design, n_paths, seed)`.
pub fn simulate(
    model: &GaussMarkovModel,
    design: &SensorDesign,
    theta: Option<&[DMatrix<f64>]>,
    n_paths: u64,
    seed: u64,
) -> Result<SimulationReport> {
    if n_paths == 0 {
        return Err(Error::InvalidModel("n_paths must be at least 1".into()));
    }
    let gains = prepare(model, design)?;
    let t_len = design.snr.len();
    let n = model.n();

    let n_chunks = (n_paths as usize).div_ceil(PATHS_PER_CHUNK);
    let chunk_sums: Vec<Vec<DMatrix<f64>>> = (0..n_chunks)
        .into_par_iter()
        .map(|chunk| {
            let lo = chunk * PATHS_PER_CHUNK;
            let hi = ((chunk + 1) * PATHS_PER_CHUNK).min(n_paths as usize);
            let mut acc = vec![DMatrix::<f64>::zeros(n, n); t_len];
            for path in lo..hi {
                let mut rng = ChaCha12Rng::seed_from_u64(seed);
                rng.set_stream(path as u64);
                let mut x = &gains.l_p0 * standard_normal_vector(&mut rng, n);
                let mut z = DVector::<f64>::zeros(n);
                for t in 0..t_len {
                    // Source step, then predict/update.
                    x = &gains.a[t] * x + &gains.l_w[t] * standard_normal_vector(&mut rng, n);
                    let z_pred = &gains.a[t] * z;
                    let r = gains.c[t].nrows();
                    z = if r == 0 {
                        z_pred
                    } else {
                        let y =
                            &gains.c[t] * &x + &gains.l_v[t] * standard_normal_vector(&mut rng, r);
                        let innovation = y - &gains.c[t] * &z_pred;
                        z_pred + &gains.gain[t] * innovation
                    };
                    let e = &x - &z;
                    acc[t] += &e * e.transpose();
                }
            }
            acc
        })
        .collect();

    let mut empirical = vec![DMatrix::<f64>::zeros(n, n); t_len];
    for sums in &chunk_sums {
        for (t, s) in sums.iter().enumerate() {
            empirical[t] += s;
        }
    }
    for m in &mut empirical {
        *m /= n_paths as f64;
        let sym = symmetric_part(m);
        *m = sym;
    }

    let mut max_rel_deviation: f64 = 0.0;
    for (emp, pred) in empirical.iter().zip(&design.p_filt) {
        let denom = frob_norm(pred).max(1e-300);
        max_rel_deviation = max_rel_deviation.max(frob_norm(&(emp - pred)) / denom);
    }
    let distortion_series: Vec<f64> = empirical
        .iter()
        .enumerate()
        .map(|(t, emp)| {
            if let Some(ths) = theta {
                frob_dot(if ths.len() == 1 { &ths[0] } else { &ths[t] }, emp)
            } else {
                emp.trace()
            }
        })
        .collect();

    Ok(SimulationReport {
        empirical_err_cov: empirical,
        predicted: design.p_filt.clone(),
        max_rel_deviation,
        distortion_series,
        paths: n_paths,
        seed,
    })
}

/// Bilinear (Tustin) discretization `A_d = (I + A dt/2)(I - A dt/2)^{-1}`.
pub fn tustin_discretize(a_cont: &DMatrix<f64>, dt: f64) -> Result<DMatrix<f64>> {
    if !(dt > 0.0) {
        return Err(Error::InvalidModel(format!(
            "dt must be positive, got {dt}"
        )));
    }
    let n = a_cont.nrows();
    if a_cont.ncols() != n {
        return Err(Error::Dimension("A must be square".into()));
    }
    let half = a_cont * (dt / 2.0);
    let plus = DMatrix::identity(n, n) + &half;
    let minus = DMatrix::identity(n, n) - &half;
    let inv = minus
        .try_inverse()
        .ok_or_else(|| Error::Numerical("I - A dt/2 is singular (bilinear pole)".into()))?;
    Ok(plus * inv)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthesis::{synthesize, DEFAULT_SNR_CLIP};

    fn scalar_model(a: f64, w: f64, p0: f64, t: usize) -> GaussMarkovModel {
        GaussMarkovModel::finite(
            vec![DMatrix::from_element(1, 1, a); t],
            vec![DMatrix::from_element(1, 1, w); t],
            DMatrix::from_element(1, 1, p0),
        )
        .unwrap()
    }

    fn scalar_design(model: &GaussMarkovModel, p_filt: &[f64]) -> SensorDesign {
        let sched = crate::model::CovarianceSchedule {
            p_filt: p_filt
                .iter()
                .map(|&v| DMatrix::from_element(1, 1, v))
                .collect(),
            pi: p_filt
                .iter()
                .map(|&v| DMatrix::from_element(1, 1, v))
                .collect(),
            objective_nats: 0.0,
            constant_c: 0.0,
        };
        synthesize(model, &sched, 1e-9, DEFAULT_SNR_CLIP).unwrap()
    }

    #[test]
    fn scalar_error_variance_matches_prediction() {
        // a=1, w=1, p0=1, snr=0.5 (p_filt = 1), 10^6 paths: sample variance
        // within 3 standard errors of 1 (SE = sqrt(2/n)).
        let model = scalar_model(1.0, 1.0, 1.0, 1);
        let design = scalar_design(&model, &[1.0]);
        assert!((design.snr[0][(0, 0)] - 0.5).abs() < 1e-12);
        let report = simulate(&model, &design, None, 1_000_000, 7).unwrap();
        let se = (2.0f64 / 1e6).sqrt();
        assert!(
            (report.empirical_err_cov[0][(0, 0)] - 1.0).abs() < 3.0 * se,
            "empirical {} vs 1.0",
            report.empirical_err_cov[0][(0, 0)]
        );
    }

    #[test]
    fn zero_snr_tracks_free_recursion() {
        // No measurements: empirical covariance follows the Lyapunov
        // recursion (2, 3, 4) within sampling error.
        let model = scalar_model(1.0, 1.0, 1.0, 3);
        let design = scalar_design(&model, &[2.0, 3.0, 4.0]);
        assert!(design.ranks.iter().all(|&r| r == 0));
        let report = simulate(&model, &design, None, 200_000, 11).unwrap();
        for (t, expect) in [2.0, 3.0, 4.0].iter().enumerate() {
            let se = expect * (2.0f64 / 2e5).sqrt();
            assert!(
                (report.empirical_err_cov[t][(0, 0)] - expect).abs() < 4.0 * se,
                "step {t}: {} vs {expect}",
                report.empirical_err_cov[t][(0, 0)]
            );
        }
    }

    #[test]
    fn near_perfect_observation_gives_tiny_error() {
        // Huge SNR: empirical error is near zero.
        let model = scalar_model(1.0, 1.0, 1.0, 2);
        let design = scalar_design(&model, &[1e-6, 1e-6]);
        let report = simulate(&model, &design, None, 20_000, 3).unwrap();
        for t in 0..2 {
            assert!(report.empirical_err_cov[t][(0, 0)] < 1e-5);
        }
    }

    #[test]
    fn reports_are_bit_identical_for_fixed_seed() {
        let model = scalar_model(0.9, 0.5, 1.0, 4);
        let design = scalar_design(&model, &[0.8, 0.7, 0.7, 0.7]);
        let r1 = simulate(&model, &design, None, 30_000, 42).unwrap();
        let r2 = simulate(&model, &design, None, 30_000, 42).unwrap();
        for (a, b) in r1.empirical_err_cov.iter().zip(&r2.empirical_err_cov) {
            assert_eq!(a, b);
        }
        assert_eq!(
            r1.max_rel_deviation.to_bits(),
            r2.max_rel_deviation.to_bits()
        );
        let r3 = simulate(&model, &design, None, 30_000, 43).unwrap();
        assert_ne!(
            r1.empirical_err_cov[0][(0, 0)].to_bits(),
            r3.empirical_err_cov[0][(0, 0)].to_bits()
        );
    }

    #[test]
    fn tustin_basics() {
        // A = 0 maps to I.
        let a = DMatrix::zeros(3, 3);
        assert_eq!(tustin_discretize(&a, 0.1).unwrap(), DMatrix::identity(3, 3));
        // Scalar: a_c = -1, dt = 0.1 -> 0.95/1.05.
        let a = DMatrix::from_element(1, 1, -1.0);
        let ad = tustin_discretize(&a, 0.1).unwrap()[(0, 0)];
        assert!((ad - 0.95 / 1.05).abs() < 1e-15);
        // Bilinear pole: a_c = 2/dt makes I - A dt/2 singular.
        let a = DMatrix::from_element(1, 1, 20.0);
        assert!(tustin_discretize(&a, 0.1).is_err());
    }

    #[test]
    fn tustin_maps_eigenvalues_bilinearly() {
        let a = DMatrix::from_row_slice(3, 3, &[-0.5, 1.0, 0.0, -1.0, -0.5, 0.2, 0.0, 0.1, -2.0]);
        let dt = 0.05;
        let ad = tustin_discretize(&a, dt).unwrap();
        let mut expect: Vec<nalgebra::Complex<f64>> = a
            .clone()
            .complex_eigenvalues()
            .iter()
            .map(|l| {
                (nalgebra::Complex::new(1.0, 0.0) + l * (dt / 2.0))
                    / (nalgebra::Complex::new(1.0, 0.0) - l * (dt / 2.0))
            })
            .collect();
        let mut got: Vec<nalgebra::Complex<f64>> =
            ad.complex_eigenvalues().iter().cloned().collect();
        let key = |c: &nalgebra::Complex<f64>| (c.re * 1e9) as i64 as f64 + c.im.abs();
        expect.sort_by(|x, y| key(x).partial_cmp(&key(y)).unwrap());
        got.sort_by(|x, y| key(x).partial_cmp(&key(y)).unwrap());
        for (e, g) in expect.iter().zip(&got) {
            assert!((e - g).norm() < 1e-10);
        }
    }
}

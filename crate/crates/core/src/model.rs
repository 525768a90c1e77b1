//! Gauss-Markov source models and distortion specifications.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg::{is_symmetric, require_pd, require_psd};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Horizon {
    Finite(usize),
    Stationary,
}

/// The source `x_{t+1} = A_t x_t + w_t`, `x_0 ~ N(0, P0)`,
/// `w_t ~ N(0, W_t)` with `W_t` positive definite.
#[derive(Clone, Debug)]
pub struct GaussMarkovModel {
    pub horizon: Horizon,
    /// `A_t` for `t = 0..T-1`; a single matrix in stationary mode.
    pub a: Vec<DMatrix<f64>>,
    /// `W_t` for `t = 0..T-1`; a single matrix in stationary mode.
    pub w: Vec<DMatrix<f64>>,
    pub p0: DMatrix<f64>,
}

impl GaussMarkovModel {
    pub fn finite(a: Vec<DMatrix<f64>>, w: Vec<DMatrix<f64>>, p0: DMatrix<f64>) -> Result<Self> {
        let t = a.len();
        if t == 0 {
            return Err(Error::InvalidModel("horizon must be positive".into()));
        }
        let model = GaussMarkovModel {
            horizon: Horizon::Finite(t),
            a,
            w,
            p0,
        };
        model.validate()?;
        Ok(model)
    }

    /// Time-invariant model; `p0` seeds simulations and finite-horizon
    /// truncations and must still be PD.
    pub fn stationary(a: DMatrix<f64>, w: DMatrix<f64>, p0: DMatrix<f64>) -> Result<Self> {
        let model = GaussMarkovModel {
            horizon: Horizon::Stationary,
            a: vec![a],
            w: vec![w],
            p0,
        };
        model.validate()?;
        Ok(model)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.p0.nrows();
        if self.p0.ncols() != n {
            return Err(Error::Dimension("P0 must be square".into()));
        }
        require_pd(&self.p0, "P0")?;
        let expected = match self.horizon {
            Horizon::Finite(t) => {
                if t == 0 {
                    return Err(Error::InvalidModel("horizon must be positive".into()));
                }
                t
            }
            Horizon::Stationary => 1,
        };
        if self.a.len() != expected || self.w.len() != expected {
            return Err(Error::Dimension(format!(
                "expected {expected} A/W matrices, got {}/{}",
                self.a.len(),
                self.w.len()
            )));
        }
        for (t, (a, w)) in self.a.iter().zip(&self.w).enumerate() {
            if a.shape() != (n, n) {
                return Err(Error::Dimension(format!("A_{t} is not {n}x{n}")));
            }
            if w.shape() != (n, n) {
                return Err(Error::Dimension(format!("W_{t} is not {n}x{n}")));
            }
            require_pd(w, &format!("W_{t}"))?;
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.p0.nrows()
    }

    /// Horizon length; stationary models have none.
    pub fn horizon_len(&self) -> Option<usize> {
        match self.horizon {
            Horizon::Finite(t) => Some(t),
            Horizon::Stationary => None,
        }
    }

    pub fn a_at(&self, t: usize) -> &DMatrix<f64> {
        match self.horizon {
            Horizon::Stationary => &self.a[0],
            Horizon::Finite(_) => &self.a[t],
        }
    }

    pub fn w_at(&self, t: usize) -> &DMatrix<f64> {
        match self.horizon {
            Horizon::Stationary => &self.w[0],
            Horizon::Finite(_) => &self.w[t],
        }
    }

    /// Truncates a stationary model to a finite horizon (used by the
    /// convergence experiments); also reindexes finite models.
    pub fn truncated(&self, t: usize) -> Result<GaussMarkovModel> {
        GaussMarkovModel::finite(
            (0..t).map(|s| self.a_at(s).clone()).collect(),
            (0..t).map(|s| self.w_at(s).clone()).collect(),
            self.p0.clone(),
        )
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum DistortionMode {
    /// Per-step bounds `E||x_t - z_t||^2_Theta <= D_t`.
    Hard(Vec<f64>),
    /// Per-step soft multipliers `alpha_t` on the distortion.
    Soft(Vec<f64>),
}

/// Distortion weights `Theta_t` with either hard bounds or soft multipliers.
#[derive(Clone, Debug)]
pub struct DistortionSpec {
    pub theta: Vec<DMatrix<f64>>,
    pub mode: DistortionMode,
}

impl DistortionSpec {
    pub fn hard(theta: Vec<DMatrix<f64>>, d: Vec<f64>) -> Result<Self> {
        let spec = DistortionSpec {
            theta,
            mode: DistortionMode::Hard(d),
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn soft(theta: Vec<DMatrix<f64>>, alpha: Vec<f64>) -> Result<Self> {
        let spec = DistortionSpec {
            theta,
            mode: DistortionMode::Soft(alpha),
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.theta.is_empty() {
            return Err(Error::InvalidModel("no distortion weights".into()));
        }
        let n = self.theta[0].nrows();
        for (t, th) in self.theta.iter().enumerate() {
            if th.shape() != (n, n) || !is_symmetric(th, 1e-10) {
                return Err(Error::Dimension(format!("Theta_{t} not symmetric {n}x{n}")));
            }
            require_psd(th, 1e-12, &format!("Theta_{t}"))?;
        }
        let vals = match &self.mode {
            DistortionMode::Hard(d) => d,
            DistortionMode::Soft(a) => a,
        };
        if vals.len() != self.theta.len() {
            return Err(Error::Dimension(format!(
                "{} distortion values for {} weight matrices",
                vals.len(),
                self.theta.len()
            )));
        }
        for (t, v) in vals.iter().enumerate() {
            if !(*v > 0.0) {
                return Err(Error::InvalidModel(format!(
                    "distortion parameter at step {t} must be positive, got {v}"
                )));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.theta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.theta.is_empty()
    }

    pub fn theta_at(&self, t: usize) -> &DMatrix<f64> {
        if self.theta.len() == 1 {
            &self.theta[0]
        } else {
            &self.theta[t]
        }
    }
}

/// Solution of an SRD determinant-maximization problem in covariance form.
#[derive(Clone, Debug)]
pub struct CovarianceSchedule {
    /// `P_{t|t}` for `t = 1..T` (a single matrix in stationary mode).
    pub p_filt: Vec<DMatrix<f64>>,
    /// `Pi_t` for `t = 1..T` (a single matrix in stationary mode).
    pub pi: Vec<DMatrix<f64>>,
    /// `-sum_t (1/2) log det Pi_t + constant_c`, the directed information in
    /// nats (per stage in stationary mode).
    pub objective_nats: f64,
    /// The additive constant `c` of the determinant-maximization objective.
    pub constant_c: f64,
}

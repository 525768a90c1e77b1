//! Bundled example models: a noisy double pendulum and a spin-stabilized
//! satellite, both given as continuous-time linearizations and discretized
//! with the Tustin transformation (process noise scaled as `W_d = W_c dt`).
//!
//! The physical parameters below (masses, lengths, friction, inertias,
//! nominal spin rate, time step, noise and distortion defaults) are not part
//! of the source models' published descriptions; they are project defaults
//! chosen to produce well-conditioned instances, and experiments on presets
//! should be read qualitatively.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::model::{DistortionSpec, GaussMarkovModel};
use crate::modelfile::{to_document, ModelDocument};
use crate::sim::tustin_discretize;

/// Double pendulum defaults: m1 = m2 = 1, l1 = l2 = 1, g = 9.8,
/// friction c1 = c2 = 0.5, continuous noise intensity 0.01.
pub const PENDULUM_DEFAULT_DT: f64 = 0.1;
/// Satellite defaults: I1 = 2, I2 = I3 = 1, omega0 = 1, unit noise
/// intensity. The small default step keeps the unstable discretization mild
/// over the default horizon.
pub const SATELLITE_DEFAULT_DT: f64 = 0.01;

fn discretize(
    a_cont: DMatrix<f64>,
    w_cont: DMatrix<f64>,
    dt: f64,
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let a_d = tustin_discretize(&a_cont, dt)?;
    let w_d = w_cont * dt;
    Ok((a_d, w_d))
}

/// Continuous-time A of the linearized double pendulum
/// (states: two angles, two angular velocities).
pub fn pendulum_a_cont() -> DMatrix<f64> {
    let (m1, m2, l1, l2, g) = (1.0, 1.0, 1.0, 1.0, 9.8);
    let (c1, c2) = (0.5, 0.5);
    DMatrix::from_row_slice(
        4,
        4,
        &[
            0.0,
            0.0,
            1.0,
            0.0,
            0.0,
            0.0,
            0.0,
            1.0,
            -(m1 + m2) * g / (m1 * l1),
            m2 * g / (m1 * l1),
            -c1,
            0.0,
            (m1 + m2) * g / (m1 * l2),
            -(m1 + m2) * g / (m1 * l2),
            0.0,
            -c2,
        ],
    )
}

/// Continuous-time A of the spin-stabilized satellite angular-velocity
/// dynamics linearized around spin `(omega0, 0, 0)`.
pub fn satellite_a_cont() -> DMatrix<f64> {
    let (i1, i2, i3, omega0) = (2.0, 1.0, 1.0, 1.0);
    DMatrix::from_row_slice(
        3,
        3,
        &[
            1.0,
            0.0,
            0.0,
            0.0,
            1.0,
            (i3 - i1) / i2 * omega0,
            0.0,
            (i1 - i2) / i3 * omega0,
            1.0,
        ],
    )
}

/// Builds a preset model document. `horizon = None` gives the stationary
/// variant; a finite horizon gets the preset's default distortion profile
/// (the satellite's profile dips to a low bound over the middle third,
/// mirroring a mission window).
pub fn preset(name: &str, dt: Option<f64>, horizon: Option<usize>) -> Result<ModelDocument> {
    match name {
        "pendulum" => {
            let dt = dt.unwrap_or(PENDULUM_DEFAULT_DT);
            let (a, w) = discretize(pendulum_a_cont(), DMatrix::identity(4, 4) * 0.01, dt)?;
            let p0 = DMatrix::identity(4, 4) * 0.01;
            let theta = DMatrix::identity(4, 4);
            build(a, w, p0, theta, horizon, |_, _| 0.1)
        }
        "satellite" => {
            let dt = dt.unwrap_or(SATELLITE_DEFAULT_DT);
            let (a, w) = discretize(satellite_a_cont(), DMatrix::identity(3, 3), dt)?;
            let p0 = DMatrix::identity(3, 3);
            let theta = DMatrix::identity(3, 3);
            build(a, w, p0, theta, horizon, |t, t_len| {
                let lo = t_len / 3;
                let hi = 2 * t_len / 3;
                if t >= lo && t < hi {
                    0.1
                } else {
                    5.0
                }
            })
        }
        other => Err(Error::Parse(format!(
            "unknown preset {other:?}; available: pendulum, satellite"
        ))),
    }
}

fn build(
    a: DMatrix<f64>,
    w: DMatrix<f64>,
    p0: DMatrix<f64>,
    theta: DMatrix<f64>,
    horizon: Option<usize>,
    d_profile: impl Fn(usize, usize) -> f64,
) -> Result<ModelDocument> {
    let (model, spec) = match horizon {
        None => {
            let model = GaussMarkovModel::stationary(a, w, p0)?;
            let spec = DistortionSpec::hard(vec![theta], vec![d_profile(0, 1)])?;
            (model, spec)
        }
        Some(t) => {
            let model = GaussMarkovModel::finite(vec![a; t], vec![w; t], p0)?;
            let d: Vec<f64> = (0..t).map(|s| d_profile(s, t)).collect();
            let spec = DistortionSpec::hard(vec![theta; t], d)?;
            (model, spec)
        }
    };
    Ok(to_document(&model, &spec, None))
}

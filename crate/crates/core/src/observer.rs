//! Kalman-type observer for the extended system.
//!
//! ```text
//! ż̂ = 𝓐(u) ẑ + 𝓑 u + K (y − 𝓒 ẑ),   K = M 𝓒ᵀ W⁻¹
//! Ṁ = 𝓐(u) M + M 𝓐(u)ᵀ − M 𝓒ᵀ W⁻¹ 𝓒 M + V + θ M
//! ```
//!
//! Since `𝓒 = e_1ᵀ`, `M𝓒ᵀ` is the first column of `M` and the output weight is
//! a scalar.

use nalgebra::{DMatrix, DVector};

use crate::augmentation::AugmentedSystem;
use crate::error::{Error, Result};
use crate::numerics::{min_eig_sym, require_finite, rk4_step};
use crate::signal::SmoothSignal;

/// Tuning used by the vehicle example.
pub const DEFAULT_M0_SCALE: f64 = 100.0;
pub const DEFAULT_V_SCALE: f64 = 1e-4;
pub const DEFAULT_W: f64 = 1.0;
pub const DEFAULT_THETA: f64 = 0.0;

#[derive(Debug, Clone, PartialEq)]
pub struct ObserverConfig {
    /// Initial Riccati matrix, symmetric positive definite.
    pub m0: DMatrix<f64>,
    /// Symmetric positive semi-definite additive term.
    pub v: DMatrix<f64>,
    /// Output weight.
    pub w: f64,
    /// Forgetting factor, `θ ≥ 0`.
    pub theta: f64,
}

impl ObserverConfig {
    /// `M0 = m0·I`, `V = v·I` on a `dim`-dimensional extended state.
    pub fn scaled(dim: usize, m0: f64, v: f64, w: f64, theta: f64) -> Self {
        Self {
            m0: DMatrix::identity(dim, dim) * m0,
            v: DMatrix::identity(dim, dim) * v,
            w,
            theta,
        }
    }

    pub fn default_for(aug: &AugmentedSystem) -> Self {
        Self::scaled(
            aug.extended_dim(),
            DEFAULT_M0_SCALE,
            DEFAULT_V_SCALE,
            DEFAULT_W,
            DEFAULT_THETA,
        )
    }

    pub fn validate(&self, dim: usize) -> Result<()> {
        for (name, m) in [("M0", &self.m0), ("V", &self.v)] {
            if m.shape() != (dim, dim) {
                return Err(Error::Config(format!(
                    "{name} must be {dim}x{dim}, got {}x{}",
                    m.nrows(),
                    m.ncols()
                )));
            }
            require_finite(m, "observer matrix")
                .map_err(|_| Error::Config(format!("{name} has non-finite entries")))?;
        }
        let m0_min = min_eig_sym(&self.m0).map_err(|e| Error::Config(format!("M0: {e}")))?;
        if m0_min <= 0.0 {
            return Err(Error::Config(format!(
                "M0 must be positive definite (min eigenvalue {m0_min:.3e})"
            )));
        }
        let v_min = min_eig_sym(&self.v).map_err(|e| Error::Config(format!("V: {e}")))?;
        if v_min < -1e-12 * self.v.norm() {
            return Err(Error::Config(format!(
                "V must be positive semi-definite (min eigenvalue {v_min:.3e})"
            )));
        }
        if !(self.w > 0.0 && self.w.is_finite()) {
            return Err(Error::Config(format!("W must be positive, got {}", self.w)));
        }
        if !(self.theta >= 0.0 && self.theta.is_finite()) {
            return Err(Error::Config(format!(
                "theta must be non-negative, got {}",
                self.theta
            )));
        }
        if self.theta == 0.0 && v_min <= 0.0 {
            return Err(Error::Config(
                "either theta > 0 or V positive definite is required".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObserverState {
    pub t: f64,
    /// Extended estimate `ẑ`.
    pub zhat: DVector<f64>,
    /// Riccati matrix.
    pub m: DMatrix<f64>,
}

pub fn observer_init(
    aug: &AugmentedSystem,
    cfg: &ObserverConfig,
    zhat0: DVector<f64>,
) -> Result<ObserverState> {
    let dim = aug.extended_dim();
    cfg.validate(dim)?;
    if zhat0.len() != dim {
        return Err(Error::Config(format!(
            "initial estimate has {} entries, extended state has {dim}",
            zhat0.len()
        )));
    }
    if zhat0.iter().any(|v| !v.is_finite()) {
        return Err(Error::Config(
            "initial estimate has non-finite entries".into(),
        ));
    }
    Ok(ObserverState {
        t: 0.0,
        zhat: zhat0,
        m: cfg.m0.clone(),
    })
}

/// `K = M 𝓒ᵀ W⁻¹`.
pub fn gain(cfg: &ObserverConfig, m: &DMatrix<f64>) -> DVector<f64> {
    m.column(0) / cfg.w
}

/// Right-hand side `(ż̂, Ṁ)` for input `u` and measurement `y`.
pub fn observer_derivative(
    aug: &AugmentedSystem,
    cfg: &ObserverConfig,
    u: &DVector<f64>,
    y: f64,
    zhat: &DVector<f64>,
    m: &DMatrix<f64>,
) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let a_ext = aug.eval_a_ext(u)?;
    let innovation = y - zhat[0];
    let k = gain(cfg, m);
    let dz = &a_ext * zhat + aug.input_matrix() * u + &k * innovation;
    let mc = m.column(0);
    let dm =
        &a_ext * m + m * a_ext.transpose() - (mc * mc.transpose()) / cfg.w + &cfg.v + m * cfg.theta;
    Ok((dz, dm))
}

pub(crate) fn pack(zhat: &DVector<f64>, m: &DMatrix<f64>) -> DVector<f64> {
    let d = zhat.len();
    let mut out = DVector::zeros(d + d * d);
    out.rows_mut(0, d).copy_from(zhat);
    out.rows_mut(d, d * d).copy_from_slice(m.as_slice());
    out
}

pub(crate) fn unpack(v: &DVector<f64>, offset: usize, d: usize) -> (DVector<f64>, DMatrix<f64>) {
    let zhat = v.rows(offset, d).into_owned();
    let m = DMatrix::from_column_slice(d, d, v.rows(offset + d, d * d).as_slice());
    (zhat, m)
}

/// Re-symmetrizes `M` and enforces the state invariants after a step.
pub(crate) fn accept_step(t: f64, zhat: DVector<f64>, m: DMatrix<f64>) -> Result<ObserverState> {
    if zhat.iter().chain(m.iter()).any(|v| !v.is_finite()) {
        return Err(Error::NumericalBlowup { t });
    }
    let m = (&m + m.transpose()) * 0.5;
    let min_eig = m.symmetric_eigenvalues().min();
    if min_eig.is_nan() || min_eig <= 0.0 {
        return Err(Error::RiccatiDegenerate { t, min_eig });
    }
    Ok(ObserverState { t, zhat, m })
}

/// One RK4 step of the coupled estimate/Riccati dynamics. `y` is the
/// measured output as a function of time, sampled at the RK4 stages.
pub fn observer_step<Y>(
    aug: &AugmentedSystem,
    cfg: &ObserverConfig,
    st: &ObserverState,
    sig: &dyn SmoothSignal,
    y: Y,
    h: f64,
) -> Result<ObserverState>
where
    Y: Fn(f64) -> f64,
{
    if sig.dim() != aug.p() {
        return Err(Error::dim("signal", aug.p(), sig.dim()));
    }
    let d = aug.extended_dim();
    let packed = pack(&st.zhat, &st.m);
    let next = rk4_step(
        |t, v| {
            let (zhat, m) = unpack(v, 0, d);
            let (dz, dm) = observer_derivative(aug, cfg, &sig.value(t), y(t), &zhat, &m)
                .expect("dimensions checked before stepping");
            pack(&dz, &dm)
        },
        st.t,
        &packed,
        h,
    )?;
    let (zhat, m) = unpack(&next, 0, d);
    accept_step(st.t + h, zhat, m)
}

/// Plant estimate `x̂`: the last `n` entries of `ẑ`.
pub fn extract_plant_estimate(aug: &AugmentedSystem, st: &ObserverState) -> DVector<f64> {
    aug.plant_part(&st.zhat)
}

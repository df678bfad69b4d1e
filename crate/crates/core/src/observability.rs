//! Uniform-observability certificates for the extended system.
//!
//! The transition matrix of `ż = 𝓐(u(t)) z` is block upper-triangular:
//! `Φ11 = exp(S_m (t-τ))` and `Φ22 = exp(A (t-τ))` are closed form, and
//! `Φ12(t,τ) = ∫_τ^t Φ11(t,s) U(s) Φ22(s,τ) ds` is evaluated by quadrature.
//! On top of that sit the Gramian test and the sufficient persistence of
//! excitation conditions, each evaluated over a finite list of windows.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector, RowDVector};
use rayon::prelude::*;

use crate::augmentation::{eval_r, AugmentedSystem, GammaTable};
use crate::error::{Error, Result};
use crate::numerics::{
    cumulative_integrate, integrate_matrix, integrate_samples, min_eig_sym, numerical_rank,
    observability_matrix, require_real_spectrum, IntegrationGrid, MatrixExponential,
};
use crate::signal::SmoothSignal;

pub const DEFAULT_WINDOW: f64 = 2.0;
pub const DEFAULT_THRESHOLD: f64 = 1e-6;
/// Relative singular-value cutoff for every rank decision.
pub const RANK_TOL: f64 = 1e-10;
/// Imaginary-part tolerance for the real-spectrum hypothesis.
pub const REAL_EIG_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Condition {
    /// `W(t, t+δ) ≥ μ I` on the extended Gramian.
    GramianDef3,
    /// `∫ det(Σ_{i=m}^{κ} r_iᵀ r_i) ≥ μ`.
    Prop2,
    /// `∫ Φ22ᵀ r_mᵀ r_m Φ22 ≥ μ I_n`.
    Prop3,
    /// `∫ r_mᵀ r_m ≥ μ I_n`, real spectrum of `A`.
    Prop4,
    /// `∫ Ū Ūᵀ ≥ μ I_{pm}`, real spectrum and `(A, Γ)` observable.
    Prop5,
    /// Numerical rank of the stacked rows `N_0 … N_depth`.
    RankThm2,
}

impl Condition {
    pub const ALL: [Condition; 6] = [
        Condition::GramianDef3,
        Condition::Prop2,
        Condition::Prop3,
        Condition::Prop4,
        Condition::Prop5,
        Condition::RankThm2,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Condition::GramianDef3 => "gramian-def3",
            Condition::Prop2 => "prop2",
            Condition::Prop3 => "prop3",
            Condition::Prop4 => "prop4",
            Condition::Prop5 => "prop5",
            Condition::RankThm2 => "rank-thm2",
        }
    }
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Condition {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Condition::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown condition id {s:?}")))
    }
}

/// Outcome of one condition on one window.
#[derive(Debug, Clone, PartialEq)]
pub struct PeReport {
    pub condition: Condition,
    pub window_start: f64,
    pub delta: f64,
    /// `None` when the check was skipped.
    pub margin: Option<f64>,
    pub threshold: f64,
    pub pass: bool,
    pub skip_reason: Option<String>,
}

impl PeReport {
    pub fn evaluated(
        condition: Condition,
        window_start: f64,
        delta: f64,
        margin: f64,
        threshold: f64,
    ) -> Self {
        Self {
            condition,
            window_start,
            delta,
            margin: Some(margin),
            threshold,
            pass: margin >= threshold,
            skip_reason: None,
        }
    }

    pub fn skipped(
        condition: Condition,
        window_start: f64,
        delta: f64,
        threshold: f64,
        reason: impl Into<String>,
    ) -> Self {
        Self {
            condition,
            window_start,
            delta,
            margin: None,
            threshold,
            pass: false,
            skip_reason: Some(reason.into()),
        }
    }

    pub fn is_skipped(&self) -> bool {
        self.skip_reason.is_some()
    }
}

/// Window length, threshold and the list of window starts to sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct PeWindows {
    pub delta: f64,
    pub threshold: f64,
    pub starts: Vec<f64>,
}

impl PeWindows {
    pub fn new(delta: f64, threshold: f64, starts: Vec<f64>) -> Result<Self> {
        if !(delta > 0.0 && delta.is_finite()) {
            return Err(Error::Config(format!(
                "window length must be positive, got {delta}"
            )));
        }
        if !threshold.is_finite() {
            return Err(Error::Config(format!(
                "threshold must be finite, got {threshold}"
            )));
        }
        if starts.is_empty() || starts.iter().any(|s| !s.is_finite()) {
            return Err(Error::Config(
                "window starts must be a non-empty list of finite times".into(),
            ));
        }
        let mut starts = starts;
        starts.sort_by(f64::total_cmp);
        Ok(Self {
            delta,
            threshold,
            starts,
        })
    }

    /// Starts `t_start, t_start + spacing, …` such that every window fits in `grid`.
    pub fn spanning(
        grid: &IntegrationGrid,
        delta: f64,
        threshold: f64,
        spacing: f64,
    ) -> Result<Self> {
        if spacing.is_nan() || spacing <= 0.0 {
            return Err(Error::Config(format!(
                "window spacing must be positive, got {spacing}"
            )));
        }
        let last = grid.t_end() - delta;
        if last < grid.t_start() - 1e-12 {
            return Err(Error::Config(format!(
                "window length {delta} exceeds the horizon [{}, {}]",
                grid.t_start(),
                grid.t_end()
            )));
        }
        let count = ((last - grid.t_start()) / spacing + 1e-9).floor() as usize;
        let starts = (0..=count)
            .map(|k| grid.t_start() + k as f64 * spacing)
            .collect();
        Self::new(delta, threshold, starts)
    }
}

/// Closed-form diagonal blocks and quadrature-based `Φ12` of the extended
/// transition matrix, valid on `grid`.
pub struct TransitionBlocks<'a> {
    aug: &'a AugmentedSystem,
    signal: &'a dyn SmoothSignal,
    grid: IntegrationGrid,
    shift_exp: MatrixExponential,
    state_exp: MatrixExponential,
}

pub fn transition_blocks<'a>(
    aug: &'a AugmentedSystem,
    sig: &'a dyn SmoothSignal,
    grid: IntegrationGrid,
) -> Result<TransitionBlocks<'a>> {
    if sig.dim() != aug.p() {
        return Err(Error::dim("signal", aug.p(), sig.dim()));
    }
    Ok(TransitionBlocks {
        aug,
        signal: sig,
        grid,
        shift_exp: MatrixExponential::new(aug.shift_matrix())?,
        state_exp: MatrixExponential::new(aug.base().a().clone())?,
    })
}

impl TransitionBlocks<'_> {
    pub fn grid(&self) -> &IntegrationGrid {
        &self.grid
    }

    fn require(&self, t: f64, tau: f64) -> Result<()> {
        self.grid.require(t)?;
        self.grid.require(tau)
    }

    pub fn phi11(&self, t: f64, tau: f64) -> Result<DMatrix<f64>> {
        self.require(t, tau)?;
        Ok(self.shift_exp.at(t - tau))
    }

    pub fn phi22(&self, t: f64, tau: f64) -> Result<DMatrix<f64>> {
        self.require(t, tau)?;
        Ok(self.state_exp.at(t - tau))
    }

    /// `U(s)`, the input-dependent top-right block of `𝓐(u(s))`.
    pub fn coupling(&self, s: f64) -> DMatrix<f64> {
        self.aug
            .coupling_block(&self.signal.value(s))
            .expect("signal dimension checked on construction")
    }

    // Φ11(τ,s) U(s) Φ22(s,τ); Φ12(t,τ) = Φ11(t,τ) ∫_τ^t of this
    fn pulled_back(&self, s: f64, tau: f64) -> DMatrix<f64> {
        self.shift_exp.at(tau - s) * self.coupling(s) * self.state_exp.at(s - tau)
    }

    pub fn phi12(&self, t: f64, tau: f64) -> Result<DMatrix<f64>> {
        self.require(t, tau)?;
        if t == tau {
            return Ok(DMatrix::zeros(self.aug.m(), self.aug.n()));
        }
        let (lo, hi) = if t > tau { (tau, t) } else { (t, tau) };
        let sub = IntegrationGrid::covering(lo, hi, self.grid.step())?;
        let mut inner = integrate_matrix(|s| self.pulled_back(s, tau), &sub)?;
        if t < tau {
            inner = -inner;
        }
        Ok(self.shift_exp.at(t - tau) * inner)
    }

    /// `Φ12(s, τ)` at every node of the grid covering `[τ, t_end]`.
    pub fn phi12_path(&self, tau: f64, t_end: f64) -> Result<(IntegrationGrid, Vec<DMatrix<f64>>)> {
        self.require(t_end, tau)?;
        let sub = IntegrationGrid::covering(tau, t_end, self.grid.step())?;
        let running = cumulative_integrate(|s| self.pulled_back(s, tau), &sub)?;
        let path = running
            .into_iter()
            .enumerate()
            .map(|(k, j)| self.shift_exp.at(sub.time(k) - tau) * j)
            .collect();
        Ok((sub, path))
    }

    /// Full `Φ(t, τ)` assembled from its blocks.
    pub fn full(&self, t: f64, tau: f64) -> Result<DMatrix<f64>> {
        let (m, n) = (self.aug.m(), self.aug.n());
        let mut out = DMatrix::zeros(m + n, m + n);
        out.view_mut((0, 0), (m, m)).copy_from(&self.phi11(t, tau)?);
        out.view_mut((0, m), (m, n)).copy_from(&self.phi12(t, tau)?);
        out.view_mut((m, m), (n, n)).copy_from(&self.phi22(t, tau)?);
        Ok(out)
    }
}

/// Observability Gramian `W(t, t+δ) = ∫ Φ(s,t)ᵀ 𝓒ᵀ𝓒 Φ(s,t) ds` of the extended system.
pub fn gramian(
    aug: &AugmentedSystem,
    blocks: &TransitionBlocks<'_>,
    t: f64,
    delta: f64,
) -> Result<DMatrix<f64>> {
    if delta.is_nan() || delta <= 0.0 {
        return Err(Error::Config(format!(
            "window length must be positive, got {delta}"
        )));
    }
    let (m, n) = (aug.m(), aug.n());
    let (sub, path) = blocks.phi12_path(t, t + delta)?;
    let samples: Vec<DMatrix<f64>> = path
        .iter()
        .enumerate()
        .map(|(k, phi12)| {
            // 𝓒 Φ(s,t) = first row of [Φ11 Φ12]
            let mut row = RowDVector::zeros(m + n);
            let phi11 = blocks.shift_exp.at(sub.time(k) - t);
            row.columns_mut(0, m).copy_from(&phi11.row(0));
            row.columns_mut(m, n).copy_from(&phi12.row(0));
            row.transpose() * row
        })
        .collect();
    integrate_samples(&samples, &sub)
}

fn window_grid(grid: &IntegrationGrid, start: f64, delta: f64) -> Result<IntegrationGrid> {
    grid.require(start)?;
    grid.require(start + delta)?;
    IntegrationGrid::covering(start, start + delta, grid.step())
}

fn sweep<F>(
    condition: Condition,
    windows: &PeWindows,
    grid: &IntegrationGrid,
    margin: F,
) -> Result<Vec<PeReport>>
where
    F: Fn(&IntegrationGrid) -> Result<f64> + Sync,
{
    windows
        .starts
        .par_iter()
        .map(|&start| {
            let sub = window_grid(grid, start, windows.delta)?;
            let value = margin(&sub)?;
            Ok(PeReport::evaluated(
                condition,
                start,
                windows.delta,
                value,
                windows.threshold,
            ))
        })
        .collect()
}

/// Smallest Gramian eigenvalue on each window.
pub fn check_uniform_observability(
    aug: &AugmentedSystem,
    blocks: &TransitionBlocks<'_>,
    windows: &PeWindows,
) -> Result<Vec<PeReport>> {
    sweep(Condition::GramianDef3, windows, blocks.grid(), |sub| {
        min_eig_sym(&gramian(aug, blocks, sub.t_start(), windows.delta)?)
    })
}

/// Rank of the constant pair `(𝓐(0), 𝓒)`; equals `m` whenever the C-sequence vanishes.
pub fn zero_input_rank(aug: &AugmentedSystem) -> usize {
    let a0 = aug
        .eval_a_ext(&DVector::zeros(aug.p()))
        .expect("zero input has the right dimension");
    let c = DMatrix::from_row_slice(1, aug.extended_dim(), aug.output_row().as_slice());
    numerical_rank(&observability_matrix(&a0, &c, aug.extended_dim()), RANK_TOL)
}

fn r_outer(
    aug: &AugmentedSystem,
    gam: &GammaTable,
    sig: &dyn SmoothSignal,
    i: usize,
    s: f64,
) -> Result<DMatrix<f64>> {
    let r = eval_r(aug, gam, sig, i, s)?;
    Ok(r.transpose() * r)
}

// quadrature helper for integrands that can fail
fn integrate_fallible<F>(f: F, sub: &IntegrationGrid) -> Result<DMatrix<f64>>
where
    F: Fn(f64) -> Result<DMatrix<f64>>,
{
    let samples = sub.times().map(f).collect::<Result<Vec<_>>>()?;
    integrate_samples(&samples, sub)
}

fn check_signal(aug: &AugmentedSystem, sig: &dyn SmoothSignal, required: usize) -> Result<()> {
    if sig.dim() != aug.p() {
        return Err(Error::dim("signal", aug.p(), sig.dim()));
    }
    if sig.max_order() < required {
        return Err(Error::SignalOrder {
            required,
            available: sig.max_order(),
        });
    }
    Ok(())
}

fn check_gamma(gam: &GammaTable, required: usize) -> Result<()> {
    if gam.depth() < required {
        Err(Error::GammaDepth {
            required,
            available: gam.depth(),
        })
    } else {
        Ok(())
    }
}

/// Determinant-integral condition with `r_m … r_κ`.
///
/// The summed matrix has rank at most `κ - m + 1`, so the determinant is
/// identically zero unless `κ ≥ m + n - 1`.
pub fn check_prop2(
    aug: &AugmentedSystem,
    gam: &GammaTable,
    sig: &dyn SmoothSignal,
    grid: &IntegrationGrid,
    kappa: usize,
    windows: &PeWindows,
) -> Result<Vec<PeReport>> {
    let m = aug.m();
    if kappa < m {
        return Err(Error::Config(format!(
            "kappa must be at least m = {m}, got {kappa}"
        )));
    }
    check_signal(aug, sig, kappa - 1)?;
    check_gamma(gam, kappa)?;
    sweep(Condition::Prop2, windows, grid, |sub| {
        let integral = integrate_fallible(
            |s| {
                let mut sum = DMatrix::zeros(aug.n(), aug.n());
                for i in m..=kappa {
                    sum += r_outer(aug, gam, sig, i, s)?;
                }
                Ok(DMatrix::from_element(1, 1, sum.determinant()))
            },
            sub,
        )?;
        Ok(integral[(0, 0)])
    })
}

/// Gramian of the pair `(A, r_m(t))`.
pub fn check_prop3(
    aug: &AugmentedSystem,
    gam: &GammaTable,
    sig: &dyn SmoothSignal,
    grid: &IntegrationGrid,
    windows: &PeWindows,
) -> Result<Vec<PeReport>> {
    let m = aug.m();
    check_signal(aug, sig, m - 1)?;
    check_gamma(gam, m)?;
    let state_exp = MatrixExponential::new(aug.base().a().clone())?;
    sweep(Condition::Prop3, windows, grid, |sub| {
        let t = sub.t_start();
        let integral = integrate_fallible(
            |s| {
                let rphi = eval_r(aug, gam, sig, m, s)? * state_exp.at(s - t);
                Ok(rphi.transpose() * rphi)
            },
            sub,
        )?;
        min_eig_sym(&integral)
    })
}

/// `∫ r_mᵀ r_m ≥ μ I_n`; requires a real spectrum of `A`.
pub fn check_prop4(
    aug: &AugmentedSystem,
    gam: &GammaTable,
    sig: &dyn SmoothSignal,
    grid: &IntegrationGrid,
    windows: &PeWindows,
) -> Result<Vec<PeReport>> {
    require_real_spectrum(aug.base().a(), REAL_EIG_TOL)?;
    let m = aug.m();
    check_signal(aug, sig, m - 1)?;
    check_gamma(gam, m)?;
    sweep(Condition::Prop4, windows, grid, |sub| {
        let integral = integrate_fallible(|s| r_outer(aug, gam, sig, m, s), sub)?;
        min_eig_sym(&integral)
    })
}

/// `Ū = (u, u̇, …, u^{(m-1)})`.
pub fn stacked_derivatives(sig: &dyn SmoothSignal, m: usize, t: f64) -> DVector<f64> {
    let p = sig.dim();
    let mut out = DVector::zeros(p * m);
    for j in 0..m {
        out.rows_mut(j * p, p).copy_from(&sig.derivative(t, j));
    }
    out
}

/// `∫ Ū Ūᵀ ≥ μ I_{pm}`; requires a real spectrum and `(A, Γ)` observable.
pub fn check_prop5(
    aug: &AugmentedSystem,
    gam: &GammaTable,
    sig: &dyn SmoothSignal,
    grid: &IntegrationGrid,
    windows: &PeWindows,
) -> Result<Vec<PeReport>> {
    let a = aug.base().a();
    require_real_spectrum(a, REAL_EIG_TOL)?;
    let m = aug.m();
    let n = aug.n();
    let gamma = gam.stacked(m)?;
    let rank = numerical_rank(&observability_matrix(a, &gamma, n), RANK_TOL);
    if rank < n {
        return Err(Error::GammaUnobservable { rank, n });
    }
    check_signal(aug, sig, m - 1)?;
    sweep(Condition::Prop5, windows, grid, |sub| {
        let integral = integrate_matrix(
            |s| {
                let ubar = stacked_derivatives(sig, m, s);
                &ubar * ubar.transpose()
            },
            sub,
        )?;
        min_eig_sym(&integral)
    })
}

/// Stacked rows `N_0 … N_depth` of the extended observability matrix at `t`:
/// `N_i = [e_{i+1}ᵀ, r_i(t)]` for `i < m` and `[0, r_i(t)]` beyond.
pub fn observability_rows(
    aug: &AugmentedSystem,
    gam: &GammaTable,
    sig: &dyn SmoothSignal,
    t: f64,
    depth: usize,
) -> Result<DMatrix<f64>> {
    let (m, n) = (aug.m(), aug.n());
    let mut rows = DMatrix::zeros(depth + 1, m + n);
    for i in 0..=depth {
        if i < m {
            rows[(i, i)] = 1.0;
        }
        let r = eval_r(aug, gam, sig, i, t)?;
        rows.view_mut((i, m), (1, n)).copy_from(&r);
    }
    Ok(rows)
}

/// Numerical rank of [`observability_rows`]. Rows are normalized first since
/// `r_i` grows with the derivative order of the input.
pub fn observability_matrix_rank(
    aug: &AugmentedSystem,
    gam: &GammaTable,
    sig: &dyn SmoothSignal,
    t: f64,
    depth: usize,
) -> Result<usize> {
    let mut rows = observability_rows(aug, gam, sig, t, depth)?;
    for mut row in rows.row_iter_mut() {
        let norm = row.norm();
        if norm > 0.0 {
            row /= norm;
        }
    }
    Ok(numerical_rank(&rows, RANK_TOL))
}

/// Windowed rank reports: margin is the rank at the window start, threshold `m + n`.
pub fn check_rank(
    aug: &AugmentedSystem,
    gam: &GammaTable,
    sig: &dyn SmoothSignal,
    depth: usize,
    windows: &PeWindows,
) -> Result<Vec<PeReport>> {
    let full = aug.extended_dim() as f64;
    windows
        .starts
        .iter()
        .map(|&start| {
            let rank = observability_matrix_rank(aug, gam, sig, start, depth)?;
            Ok(PeReport::evaluated(
                Condition::RankThm2,
                start,
                windows.delta,
                rank as f64,
                full,
            ))
        })
        .collect()
}

/// Smallest margin among evaluated reports.
pub fn worst_margin(reports: &[PeReport]) -> Option<f64> {
    reports
        .iter()
        .filter_map(|r| r.margin)
        .min_by(f64::total_cmp)
}

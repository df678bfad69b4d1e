//! Dense-matrix numerics shared by the rest of the crate: matrix exponential,
//! quadrature on uniform grids, classical RK4 and symmetric eigen/rank utilities.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Relative tolerance used when deciding that a grid closes exactly.
const GRID_CLOSE_TOL: f64 = 1e-9;

/// Symmetry tolerance (relative to the Frobenius norm) accepted before an
/// eigen-decomposition.
pub const SYMMETRY_TOL: f64 = 1e-9;

/// Uniform time grid `t_start, t_start + step, ..., t_end`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegrationGrid {
    t_start: f64,
    t_end: f64,
    step: f64,
    intervals: usize,
}

impl IntegrationGrid {
    /// Grid whose step must divide `t_end - t_start` exactly (up to round-off).
    pub fn new(t_start: f64, t_end: f64, step: f64) -> Result<Self> {
        Self::check_bounds(t_start, t_end)?;
        if !(step.is_finite() && step > 0.0) {
            return Err(Error::Grid(format!("step must be positive, got {step}")));
        }
        let ratio = (t_end - t_start) / step;
        let intervals = ratio.round();
        if (ratio - intervals).abs() > GRID_CLOSE_TOL * intervals.max(1.0) || intervals < 1.0 {
            return Err(Error::Grid(format!(
                "step {step} does not close [{t_start}, {t_end}] ({ratio} intervals)"
            )));
        }
        Ok(Self {
            t_start,
            t_end,
            step: (t_end - t_start) / intervals,
            intervals: intervals as usize,
        })
    }

    /// Finest uniform grid on `[t_start, t_end]` whose step does not exceed `max_step`.
    pub fn covering(t_start: f64, t_end: f64, max_step: f64) -> Result<Self> {
        Self::check_bounds(t_start, t_end)?;
        if !(max_step.is_finite() && max_step > 0.0) {
            return Err(Error::Grid(format!(
                "step must be positive, got {max_step}"
            )));
        }
        let ratio = (t_end - t_start) / max_step;
        // absorb round-off so that an exactly closing step is kept as is
        let intervals = if (ratio - ratio.round()).abs() <= GRID_CLOSE_TOL * ratio.max(1.0) {
            ratio.round()
        } else {
            ratio.ceil()
        }
        .max(1.0);
        Ok(Self {
            t_start,
            t_end,
            step: (t_end - t_start) / intervals,
            intervals: intervals as usize,
        })
    }

    fn check_bounds(t_start: f64, t_end: f64) -> Result<()> {
        if !(t_start.is_finite() && t_end.is_finite()) || t_end <= t_start {
            return Err(Error::Grid(format!(
                "need finite t_end > t_start, got [{t_start}, {t_end}]"
            )));
        }
        Ok(())
    }

    pub fn t_start(&self) -> f64 {
        self.t_start
    }

    pub fn t_end(&self) -> f64 {
        self.t_end
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn intervals(&self) -> usize {
        self.intervals
    }

    /// Number of nodes (intervals + 1).
    pub fn len(&self) -> usize {
        self.intervals + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Time of node `k`. The last node is pinned to `t_end`.
    pub fn time(&self, k: usize) -> f64 {
        if k >= self.intervals {
            self.t_end
        } else {
            self.t_start + k as f64 * self.step
        }
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.len()).map(move |k| self.time(k))
    }

    /// Whether `t` lies in the grid span, allowing for round-off at the ends.
    pub fn contains(&self, t: f64) -> bool {
        let slack = 1e-9 * self.step;
        t >= self.t_start - slack && t <= self.t_end + slack
    }

    pub(crate) fn require(&self, t: f64) -> Result<()> {
        if self.contains(t) {
            Ok(())
        } else {
            Err(Error::Range {
                t,
                start: self.t_start,
                end: self.t_end,
            })
        }
    }

    /// Composite Simpson weights for the grid nodes. An odd interval count
    /// closes with the 3/8 rule on the last three intervals.
    pub fn simpson_weights(&self) -> Vec<f64> {
        let n = self.intervals;
        let h = self.step;
        let mut w = vec![0.0; n + 1];
        if n == 1 {
            w[0] = h / 2.0;
            w[1] = h / 2.0;
            return w;
        }
        let simpson_end = if n.is_multiple_of(2) { n } else { n - 3 };
        let mut k = 0;
        while k < simpson_end {
            w[k] += h / 3.0;
            w[k + 1] += 4.0 * h / 3.0;
            w[k + 2] += h / 3.0;
            k += 2;
        }
        if n % 2 == 1 {
            let c = 3.0 * h / 8.0;
            w[n - 3] += c;
            w[n - 2] += 3.0 * c;
            w[n - 1] += 3.0 * c;
            w[n] += c;
        }
        w
    }
}

/// Composite Simpson approximation of `∫ f(s) ds` over the grid.
pub fn integrate_matrix<F>(f: F, grid: &IntegrationGrid) -> Result<DMatrix<f64>>
where
    F: Fn(f64) -> DMatrix<f64>,
{
    let weights = grid.simpson_weights();
    let mut acc: Option<DMatrix<f64>> = None;
    for (k, w) in weights.iter().enumerate() {
        let value = f(grid.time(k));
        match acc.as_mut() {
            None => acc = Some(value * *w),
            Some(sum) => {
                if sum.shape() != value.shape() {
                    return Err(Error::dim(
                        "integrate_matrix",
                        format!("{:?}", sum.shape()),
                        format!("{:?}", value.shape()),
                    ));
                }
                *sum += value * *w;
            }
        }
    }
    // the grid always has at least two nodes
    Ok(acc.expect("grid has nodes"))
}

/// Simpson quadrature of pre-sampled node values.
pub fn integrate_samples(samples: &[DMatrix<f64>], grid: &IntegrationGrid) -> Result<DMatrix<f64>> {
    if samples.len() != grid.len() {
        return Err(Error::dim("integrate_samples", grid.len(), samples.len()));
    }
    let weights = grid.simpson_weights();
    let mut sum = DMatrix::zeros(samples[0].nrows(), samples[0].ncols());
    for (value, w) in samples.iter().zip(weights) {
        if value.shape() != sum.shape() {
            return Err(Error::dim(
                "integrate_samples",
                format!("{:?}", sum.shape()),
                format!("{:?}", value.shape()),
            ));
        }
        sum += value * w;
    }
    Ok(sum)
}

/// Running integral `∫_{t_start}^{t_k} f(s) ds` at every grid node.
///
/// Even nodes carry the composite Simpson sum; odd nodes add one interval
/// integrated exactly for the quadratic through three neighbouring nodes.
pub fn cumulative_integrate<F>(f: F, grid: &IntegrationGrid) -> Result<Vec<DMatrix<f64>>>
where
    F: Fn(f64) -> DMatrix<f64>,
{
    let values: Vec<DMatrix<f64>> = grid.times().map(f).collect();
    let shape = values[0].shape();
    if let Some(bad) = values.iter().find(|v| v.shape() != shape) {
        return Err(Error::dim(
            "cumulative_integrate",
            format!("{shape:?}"),
            format!("{:?}", bad.shape()),
        ));
    }
    let n = grid.intervals();
    let h = grid.step();
    let mut out = Vec::with_capacity(n + 1);
    let mut simpson = DMatrix::zeros(shape.0, shape.1);
    out.push(simpson.clone());
    if n == 1 {
        out.push((&values[0] + &values[1]) * (h / 2.0));
        return Ok(out);
    }
    for k in (0..n).step_by(2) {
        if k + 2 <= n {
            let half =
                &simpson + (&values[k] * 5.0 + &values[k + 1] * 8.0 - &values[k + 2]) * (h / 12.0);
            simpson += (&values[k] + &values[k + 1] * 4.0 + &values[k + 2]) * (h / 3.0);
            out.push(half);
            out.push(simpson.clone());
        } else {
            // trailing odd interval, quadratic through the last three nodes
            let last =
                &simpson + (&values[k + 1] * 5.0 + &values[k] * 8.0 - &values[k - 1]) * (h / 12.0);
            out.push(last);
        }
    }
    Ok(out)
}

/// One classical fourth-order Runge–Kutta step of `ẋ = f(t, x)`.
pub fn rk4_step<F>(f: F, t: f64, x: &DVector<f64>, h: f64) -> Result<DVector<f64>>
where
    F: Fn(f64, &DVector<f64>) -> DVector<f64>,
{
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::Config(format!("RK4 step must be positive, got {h}")));
    }
    let k1 = f(t, x);
    let k2 = f(t + h / 2.0, &(x + &k1 * (h / 2.0)));
    let k3 = f(t + h / 2.0, &(x + &k2 * (h / 2.0)));
    let k4 = f(t + h, &(x + &k3 * h));
    let next = x + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
    if next.iter().all(|v| v.is_finite()) {
        Ok(next)
    } else {
        Err(Error::NumericalBlowup { t: t + h })
    }
}

fn require_square(m: &DMatrix<f64>, context: &'static str) -> Result<()> {
    if m.is_square() && m.nrows() > 0 {
        Ok(())
    } else {
        Err(Error::dim(
            context,
            "non-empty square matrix",
            format!("{}x{}", m.nrows(), m.ncols()),
        ))
    }
}

/// Smallest `k` with `M^k = 0` (within round-off), if `M` is nilpotent.
pub fn nilpotency_index(m: &DMatrix<f64>) -> Option<usize> {
    if !m.is_square() {
        return None;
    }
    let scale = m.norm().max(1.0);
    let mut power = m.clone();
    for k in 1..=m.nrows().max(1) {
        if power.norm() <= 1e-14 * scale.powi(k as i32) {
            return Some(k);
        }
        power = &power * m;
    }
    None
}

/// `t ↦ exp(M t)` for a fixed generator `M`.
///
/// Nilpotent generators use the finite power series, which is exact; all
/// others go through scaling and squaring of a truncated Taylor series.
#[derive(Debug, Clone)]
pub struct MatrixExponential {
    generator: DMatrix<f64>,
    // M^j / j! for j < nilpotency index
    polynomial: Option<Vec<DMatrix<f64>>>,
}

impl MatrixExponential {
    pub fn new(generator: DMatrix<f64>) -> Result<Self> {
        require_square(&generator, "mat_exp")?;
        let polynomial = nilpotency_index(&generator).map(|k| {
            let mut terms = Vec::with_capacity(k);
            let mut term = DMatrix::identity(generator.nrows(), generator.ncols());
            for j in 0..k {
                if j > 0 {
                    term = &term * &generator / j as f64;
                }
                terms.push(term.clone());
            }
            terms
        });
        Ok(Self {
            generator,
            polynomial,
        })
    }

    pub fn is_nilpotent(&self) -> bool {
        self.polynomial.is_some()
    }

    pub fn generator(&self) -> &DMatrix<f64> {
        &self.generator
    }

    pub fn at(&self, t: f64) -> DMatrix<f64> {
        match &self.polynomial {
            Some(terms) => {
                // Horner in t
                let mut acc = terms.last().expect("index >= 1").clone();
                for term in terms.iter().rev().skip(1) {
                    acc = acc * t + term;
                }
                acc
            }
            None => expm_scaling_squaring(&(&self.generator * t)),
        }
    }
}

fn expm_scaling_squaring(a: &DMatrix<f64>) -> DMatrix<f64> {
    let n = a.nrows();
    let norm = a.norm();
    let squarings = if norm > 0.5 {
        (norm / 0.5).log2().ceil() as i32
    } else {
        0
    };
    let scaled = a / 2f64.powi(squarings);
    let mut sum = DMatrix::identity(n, n);
    let mut term = DMatrix::identity(n, n);
    for j in 1..=40 {
        term = &term * &scaled / j as f64;
        sum += &term;
        if term.norm() <= f64::EPSILON * sum.norm() {
            break;
        }
    }
    for _ in 0..squarings {
        sum = &sum * &sum;
    }
    sum
}

/// `exp(M t)`.
pub fn mat_exp(m: &DMatrix<f64>, t: f64) -> Result<DMatrix<f64>> {
    Ok(MatrixExponential::new(m.clone())?.at(t))
}

/// `(M + Mᵀ)/2` after checking that `M` is symmetric to [`SYMMETRY_TOL`].
pub fn symmetrized(m: &DMatrix<f64>, what: &'static str) -> Result<DMatrix<f64>> {
    require_square(m, what)?;
    let asymmetry = (m - m.transpose()).norm();
    let tolerance = SYMMETRY_TOL * m.norm();
    if asymmetry > tolerance {
        return Err(Error::NotSymmetric {
            what,
            asymmetry,
            tolerance,
        });
    }
    Ok((m + m.transpose()) * 0.5)
}

/// Smallest eigenvalue of the symmetric part of `M`.
pub fn min_eig_sym(m: &DMatrix<f64>) -> Result<f64> {
    let sym = symmetrized(m, "min_eig_sym")?;
    if sym.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite {
            what: "min_eig_sym input",
        });
    }
    Ok(sym.symmetric_eigenvalues().min())
}

/// Number of singular values above `tol · σ_max`.
pub fn numerical_rank(m: &DMatrix<f64>, tol: f64) -> usize {
    if m.is_empty() {
        return 0;
    }
    let sv = m.singular_values();
    let largest = sv.max();
    if largest <= 0.0 || !largest.is_finite() {
        return 0;
    }
    sv.iter().filter(|&&s| s > tol * largest).count()
}

/// Fails with [`Error::ComplexEigenvalues`] unless every eigenvalue of `A` is
/// real to within `tol · max(1, ‖A‖_F)`.
pub fn require_real_spectrum(a: &DMatrix<f64>, tol: f64) -> Result<()> {
    require_square(a, "real spectrum check")?;
    if nilpotency_index(a).is_some() {
        return Ok(());
    }
    let schur = a
        .clone()
        .try_schur(f64::EPSILON, 10_000)
        .ok_or(Error::Config("Schur decomposition did not converge".into()))?;
    let max_imag = schur
        .complex_eigenvalues()
        .iter()
        .map(|z| z.im.abs())
        .fold(0.0, f64::max);
    if max_imag > tol * a.norm().max(1.0) {
        Err(Error::ComplexEigenvalues { max_imag })
    } else {
        Ok(())
    }
}

/// Kalman observability matrix `[C; CA; …; CA^{depth-1}]`.
pub fn observability_matrix(a: &DMatrix<f64>, c: &DMatrix<f64>, depth: usize) -> DMatrix<f64> {
    let rows = c.nrows();
    let mut out = DMatrix::zeros(rows * depth, a.ncols());
    let mut block = c.clone();
    for j in 0..depth {
        out.view_mut((j * rows, 0), (rows, a.ncols()))
            .copy_from(&block);
        block = &block * a;
    }
    out
}

pub(crate) fn require_finite(m: &DMatrix<f64>, what: &'static str) -> Result<()> {
    if m.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite { what })
    }
}

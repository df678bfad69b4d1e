//! Immersion of `ẋ = Ax + Bu, y = ½xᵀCx` into a state-affine system.
//!
//! The output derivatives under zero input are quadratic forms `½xᵀC_i x` with
//! `C_{i+1} = C_i A + Aᵀ C_i`. When the sequence vanishes at some index `m`,
//! the quantities `z_i = ½xᵀC_i x` (`i < m`) close the dynamics and
//!
//! ```text
//! ż = 𝓐(u) z + 𝓑 u,   y = 𝓒 z,   z = (z_0, …, z_{m-1}, x)
//! 𝓐(u) = [[S_m, U(u)], [0, A]],   U(u) rows = uᵀBᵀC_i
//! ```
//!
//! is linear in the extended state.

use nalgebra::{DMatrix, DVector, RowDVector};

use crate::error::{Error, Result};
use crate::numerics::require_finite;
use crate::signal::SmoothSignal;

/// Relative threshold below which `C_m` counts as zero.
pub const DEFAULT_NILPOTENCY_TOL: f64 = 1e-12;

const SYMMETRY_EXACT_TOL: f64 = 1e-12;
const SYMMETRY_REPAIR_TOL: f64 = 1e-9;

/// The plant `ẋ = Ax + Bu`, `y = ½xᵀCx`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticOutputSystem {
    a: DMatrix<f64>,
    b: DMatrix<f64>,
    c: DMatrix<f64>,
}

impl QuadraticOutputSystem {
    /// Validates shapes and symmetrizes `C`.
    ///
    /// An asymmetry up to `1e-9·max(1, ‖C‖_F)` is repaired with a warning;
    /// anything larger is rejected.
    pub fn new(a: DMatrix<f64>, b: DMatrix<f64>, c: DMatrix<f64>) -> Result<Self> {
        let n = a.nrows();
        if n == 0 || !a.is_square() {
            return Err(Error::dim(
                "state matrix A",
                "non-empty square",
                format!("{}x{}", a.nrows(), a.ncols()),
            ));
        }
        if b.nrows() != n || b.ncols() == 0 {
            return Err(Error::dim(
                "input matrix B",
                format!("{n}xp, p >= 1"),
                format!("{}x{}", b.nrows(), b.ncols()),
            ));
        }
        if c.shape() != (n, n) {
            return Err(Error::dim(
                "output form C",
                format!("{n}x{n}"),
                format!("{}x{}", c.nrows(), c.ncols()),
            ));
        }
        require_finite(&a, "A")?;
        require_finite(&b, "B")?;
        require_finite(&c, "C")?;

        let scale = c.norm().max(1.0);
        let asymmetry = (&c - c.transpose()).norm();
        if asymmetry > SYMMETRY_REPAIR_TOL * scale {
            return Err(Error::NotSymmetric {
                what: "output form C",
                asymmetry,
                tolerance: SYMMETRY_REPAIR_TOL * scale,
            });
        }
        if asymmetry > SYMMETRY_EXACT_TOL * scale {
            log::warn!("output form C is asymmetric by {asymmetry:.3e}; using (C + Cᵀ)/2");
        }
        let c = (&c + c.transpose()) * 0.5;
        if c.iter().all(|&v| v == 0.0) {
            return Err(Error::Config("output form C is identically zero".into()));
        }
        Ok(Self { a, b, c })
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn b(&self) -> &DMatrix<f64> {
        &self.b
    }

    pub fn c(&self) -> &DMatrix<f64> {
        &self.c
    }

    /// State dimension.
    pub fn n(&self) -> usize {
        self.a.nrows()
    }

    /// Input dimension.
    pub fn p(&self) -> usize {
        self.b.ncols()
    }

    pub fn output(&self, x: &DVector<f64>) -> f64 {
        0.5 * x.dot(&(&self.c * x))
    }

    pub fn dynamics(&self, x: &DVector<f64>, u: &DVector<f64>) -> DVector<f64> {
        &self.a * x + &self.b * u
    }

    /// Default search bound for the nilpotency index: `A^k = 0` gives
    /// `C_{2k-1} = 0` and `k ≤ n`.
    pub fn default_max_m(&self) -> usize {
        2 * self.n()
    }
}

/// `C_0, …, C_{m-1}` with `C_m = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct CMatrixSequence {
    matrices: Vec<DMatrix<f64>>,
    residual: f64,
}

impl CMatrixSequence {
    /// Nilpotency index `m`.
    pub fn m(&self) -> usize {
        self.matrices.len()
    }

    pub fn matrices(&self) -> &[DMatrix<f64>] {
        &self.matrices
    }

    /// `C_i`, zero past the stored range.
    pub fn get(&self, i: usize) -> DMatrix<f64> {
        self.matrices.get(i).cloned().unwrap_or_else(|| {
            let n = self.matrices[0].nrows();
            DMatrix::zeros(n, n)
        })
    }

    /// `‖C_m‖_F` as actually computed.
    pub fn residual(&self) -> f64 {
        self.residual
    }
}

/// Iterates `C_{i+1} = C_i A + Aᵀ C_i` until `‖C_m‖_F ≤ tol · ‖C‖_F`.
pub fn compute_c_sequence(
    sys: &QuadraticOutputSystem,
    max_m: usize,
    tol: f64,
) -> Result<CMatrixSequence> {
    if max_m == 0 || tol.is_nan() || tol <= 0.0 {
        return Err(Error::Config(format!(
            "need max_m >= 1 and tol > 0, got {max_m}, {tol}"
        )));
    }
    let a = sys.a();
    let at = a.transpose();
    let threshold = tol * sys.c().norm();
    let mut matrices = vec![sys.c().clone()];
    let mut current = sys.c().clone();
    for m in 1..=max_m {
        current = &current * a + &at * &current;
        let residual = current.norm();
        if residual <= threshold {
            return Ok(CMatrixSequence { matrices, residual });
        }
        if m == max_m {
            return Err(Error::AssumptionViolated { max_m, residual });
        }
        matrices.push(current.clone());
    }
    unreachable!("loop returns at m == max_m")
}

/// `Σ_{r=0}^{i} binom(i, r) (Aᵀ)^r C A^{i-r}`.
pub fn c_closed_form(sys: &QuadraticOutputSystem, i: usize) -> DMatrix<f64> {
    let n = sys.n();
    let mut a_pows = Vec::with_capacity(i + 1);
    a_pows.push(DMatrix::<f64>::identity(n, n));
    for r in 1..=i {
        a_pows.push(&a_pows[r - 1] * sys.a());
    }
    let mut sum = DMatrix::zeros(n, n);
    let mut binom = 1.0;
    for r in 0..=i {
        sum += a_pows[r].transpose() * sys.c() * &a_pows[i - r] * binom;
        binom = binom * (i - r) as f64 / (r + 1) as f64;
    }
    sum
}

/// The immersed state-affine system.
#[derive(Debug, Clone)]
pub struct AugmentedSystem {
    base: QuadraticOutputSystem,
    cseq: CMatrixSequence,
    // BᵀC_i, p×n, i < m
    bt_c: Vec<DMatrix<f64>>,
}

/// Assembles the extended system from a plant and its C-sequence.
pub fn build_augmented(
    sys: &QuadraticOutputSystem,
    cseq: CMatrixSequence,
) -> Result<AugmentedSystem> {
    let n = sys.n();
    if let Some(bad) = cseq.matrices.iter().find(|c| c.shape() != (n, n)) {
        return Err(Error::dim(
            "C-sequence",
            format!("{n}x{n}"),
            format!("{}x{}", bad.nrows(), bad.ncols()),
        ));
    }
    if cseq.matrices.first() != Some(sys.c()) {
        return Err(Error::dim(
            "C-sequence",
            "C_0 equal to the plant output form",
            "a different C_0",
        ));
    }
    let bt = sys.b().transpose();
    let bt_c = cseq.matrices.iter().map(|c| &bt * c).collect();
    Ok(AugmentedSystem {
        base: sys.clone(),
        cseq,
        bt_c,
    })
}

impl AugmentedSystem {
    /// C-sequence with default bound and tolerance, then assembly.
    pub fn from_system(sys: &QuadraticOutputSystem) -> Result<Self> {
        let cseq = compute_c_sequence(sys, sys.default_max_m(), DEFAULT_NILPOTENCY_TOL)?;
        build_augmented(sys, cseq)
    }

    pub fn base(&self) -> &QuadraticOutputSystem {
        &self.base
    }

    pub fn cseq(&self) -> &CMatrixSequence {
        &self.cseq
    }

    pub fn m(&self) -> usize {
        self.cseq.m()
    }

    pub fn n(&self) -> usize {
        self.base.n()
    }

    pub fn p(&self) -> usize {
        self.base.p()
    }

    pub fn extended_dim(&self) -> usize {
        self.m() + self.n()
    }

    /// `BᵀC_i` for `i < m`.
    pub fn bt_c(&self, i: usize) -> DMatrix<f64> {
        self.bt_c
            .get(i)
            .cloned()
            .unwrap_or_else(|| DMatrix::zeros(self.p(), self.n()))
    }

    /// Shift matrix `S_m`: ones on the superdiagonal.
    pub fn shift_matrix(&self) -> DMatrix<f64> {
        let m = self.m();
        DMatrix::from_fn(m, m, |i, j| if j == i + 1 { 1.0 } else { 0.0 })
    }

    /// `𝓒 = (1, 0, …, 0)`.
    pub fn output_row(&self) -> RowDVector<f64> {
        let mut c = RowDVector::zeros(self.extended_dim());
        c[0] = 1.0;
        c
    }

    /// `𝓑 = [0_{m×p}; B]`.
    pub fn input_matrix(&self) -> DMatrix<f64> {
        let mut b = DMatrix::zeros(self.extended_dim(), self.p());
        b.view_mut((self.m(), 0), (self.n(), self.p()))
            .copy_from(self.base.b());
        b
    }

    fn check_input(&self, u: &DVector<f64>) -> Result<()> {
        if u.len() == self.p() {
            Ok(())
        } else {
            Err(Error::dim("input vector", self.p(), u.len()))
        }
    }

    /// `U(u)`: row `i` is `uᵀBᵀC_i`.
    pub fn coupling_block(&self, u: &DVector<f64>) -> Result<DMatrix<f64>> {
        self.check_input(u)?;
        let mut block = DMatrix::zeros(self.m(), self.n());
        for (i, btc) in self.bt_c.iter().enumerate() {
            block.set_row(i, &(u.transpose() * btc));
        }
        Ok(block)
    }

    /// `𝓐(u) = [[S_m, U(u)], [0, A]]`.
    pub fn eval_a_ext(&self, u: &DVector<f64>) -> Result<DMatrix<f64>> {
        let (m, n) = (self.m(), self.n());
        let mut out = DMatrix::zeros(m + n, m + n);
        out.view_mut((0, 0), (m, m)).copy_from(&self.shift_matrix());
        out.view_mut((0, m), (m, n))
            .copy_from(&self.coupling_block(u)?);
        out.view_mut((m, m), (n, n)).copy_from(self.base.a());
        Ok(out)
    }

    /// `ż = 𝓐(u) z + 𝓑 u` without materializing 𝓐(u).
    pub fn extended_dynamics(&self, z: &DVector<f64>, u: &DVector<f64>) -> Result<DVector<f64>> {
        self.check_input(u)?;
        if z.len() != self.extended_dim() {
            return Err(Error::dim("extended state", self.extended_dim(), z.len()));
        }
        let (m, n) = (self.m(), self.n());
        let x = z.rows(m, n);
        let mut dz = DVector::zeros(m + n);
        for i in 0..m {
            let shift = if i + 1 < m { z[i + 1] } else { 0.0 };
            dz[i] = shift + (u.transpose() * &self.bt_c[i] * x)[0];
        }
        dz.rows_mut(m, n)
            .copy_from(&(self.base.a() * x + self.base.b() * u));
        Ok(dz)
    }

    /// `(½x₀ᵀC_0x₀, …, ½x₀ᵀC_{m-1}x₀, x₀)`.
    pub fn extend_initial_state(&self, x0: &DVector<f64>) -> Result<DVector<f64>> {
        if x0.len() != self.n() {
            return Err(Error::dim("plant state", self.n(), x0.len()));
        }
        let m = self.m();
        let mut z = DVector::zeros(self.extended_dim());
        for (i, c) in self.cseq.matrices().iter().enumerate() {
            z[i] = 0.5 * x0.dot(&(c * x0));
        }
        z.rows_mut(m, self.n()).copy_from(x0);
        Ok(z)
    }

    /// Last `n` entries of an extended vector.
    pub fn plant_part(&self, z: &DVector<f64>) -> DVector<f64> {
        z.rows(self.m(), self.n()).into_owned()
    }
}

/// `Γ_{i,k}` (`p×n`) for `0 ≤ i ≤ k+1`, `0 ≤ k ≤ depth`, with
/// `r_k = Σ_{j<k} u^{(j)ᵀ} Γ_{j+1,k}`.
#[derive(Debug, Clone, PartialEq)]
pub struct GammaTable {
    // entries[k][i] = Γ_{i,k}
    entries: Vec<Vec<DMatrix<f64>>>,
}

/// Table up to `k = m`.
pub fn compute_gamma_table(aug: &AugmentedSystem) -> GammaTable {
    GammaTable::with_depth(aug, aug.m())
}

impl GammaTable {
    /// Table up to `k = depth`; `Γ_{0,k} = BᵀC_k` vanishes for `k ≥ m`.
    pub fn with_depth(aug: &AugmentedSystem, depth: usize) -> Self {
        let (p, n) = (aug.p(), aug.n());
        let a = aug.base().a();
        let mut entries: Vec<Vec<DMatrix<f64>>> = Vec::with_capacity(depth + 1);
        entries.push(vec![aug.bt_c(0), DMatrix::zeros(p, n)]);
        for k in 0..depth {
            let prev = &entries[k];
            let mut row = Vec::with_capacity(k + 3);
            row.push(aug.bt_c(k + 1));
            for i in 0..=k {
                row.push(&prev[i + 1] * a + &prev[i]);
            }
            row.push(DMatrix::zeros(p, n));
            entries.push(row);
        }
        Self { entries }
    }

    /// Largest `k` stored.
    pub fn depth(&self) -> usize {
        self.entries.len() - 1
    }

    pub fn get(&self, i: usize, k: usize) -> Option<&DMatrix<f64>> {
        self.entries.get(k).and_then(|row| row.get(i))
    }

    /// `Γ = [Γ_{1,k}; …; Γ_{k,k}]`, `(p·k)×n`.
    pub fn stacked(&self, k: usize) -> Result<DMatrix<f64>> {
        let row = self.entries.get(k).ok_or(Error::GammaDepth {
            required: k,
            available: self.depth(),
        })?;
        let (p, n) = row[0].shape();
        let mut out = DMatrix::zeros(p * k, n);
        for j in 0..k {
            out.view_mut((j * p, 0), (p, n)).copy_from(&row[j + 1]);
        }
        Ok(out)
    }
}

/// `r_i(t) = Σ_{j<i} u^{(j)}(t)ᵀ Γ_{j+1,i}`, `1×n`; `r_0 = 0`.
pub fn eval_r(
    aug: &AugmentedSystem,
    gam: &GammaTable,
    sig: &dyn SmoothSignal,
    i: usize,
    t: f64,
) -> Result<RowDVector<f64>> {
    if sig.dim() != aug.p() {
        return Err(Error::dim("signal", aug.p(), sig.dim()));
    }
    let mut r = RowDVector::zeros(aug.n());
    if i == 0 {
        return Ok(r);
    }
    if sig.max_order() + 1 < i {
        return Err(Error::SignalOrder {
            required: i - 1,
            available: sig.max_order(),
        });
    }
    if i > gam.depth() {
        return Err(Error::GammaDepth {
            required: i,
            available: gam.depth(),
        });
    }
    for j in 0..i {
        let gamma = gam.get(j + 1, i).expect("table row holds k + 2 entries");
        r += sig.derivative(t, j).transpose() * gamma;
    }
    Ok(r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::vehicle_system;
    use crate::signal::{Primitive, PrimitiveSignal};

    fn block2(tl: f64, tr: f64, bl: f64, br: f64, n: usize) -> DMatrix<f64> {
        let i = DMatrix::<f64>::identity(n, n);
        let mut out = DMatrix::zeros(2 * n, 2 * n);
        out.view_mut((0, 0), (n, n)).copy_from(&(&i * tl));
        out.view_mut((0, n), (n, n)).copy_from(&(&i * tr));
        out.view_mut((n, 0), (n, n)).copy_from(&(&i * bl));
        out.view_mut((n, n), (n, n)).copy_from(&(&i * br));
        out
    }

    #[test]
    fn vehicle_c_sequence() {
        for n in 1..=4 {
            let sys = vehicle_system(n);
            let cseq =
                compute_c_sequence(&sys, sys.default_max_m(), DEFAULT_NILPOTENCY_TOL).unwrap();
            assert_eq!(cseq.m(), 3);
            assert_eq!(cseq.matrices()[1], block2(0.0, 1.0, 1.0, 0.0, n));
            assert_eq!(cseq.matrices()[2], block2(0.0, 0.0, 0.0, 2.0, n));
            assert_eq!(cseq.residual(), 0.0);
        }
    }

    #[test]
    fn zero_state_matrix_gives_m_one() {
        let c = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.5, -3.0]);
        let sys =
            QuadraticOutputSystem::new(DMatrix::zeros(2, 2), DMatrix::identity(2, 1), c.clone())
                .unwrap();
        let cseq = compute_c_sequence(&sys, 4, DEFAULT_NILPOTENCY_TOL).unwrap();
        assert_eq!(cseq.m(), 1);
        assert_eq!(cseq.matrices(), &[c]);
    }

    #[test]
    fn skew_commuting_gives_m_one() {
        // rotation generator commutes with C = I
        let a = DMatrix::from_row_slice(2, 2, &[0.0, -1.0, 1.0, 0.0]);
        let sys = QuadraticOutputSystem::new(a, DMatrix::identity(2, 2), DMatrix::identity(2, 2))
            .unwrap();
        assert_eq!(
            compute_c_sequence(&sys, 4, DEFAULT_NILPOTENCY_TOL)
                .unwrap()
                .m(),
            1
        );
    }

    #[test]
    fn non_nilpotent_sequence_is_rejected() {
        let sys = QuadraticOutputSystem::new(
            DMatrix::identity(2, 2),
            DMatrix::identity(2, 1),
            DMatrix::identity(2, 2),
        )
        .unwrap();
        match compute_c_sequence(&sys, 4, DEFAULT_NILPOTENCY_TOL) {
            Err(Error::AssumptionViolated { max_m, residual }) => {
                assert_eq!(max_m, 4);
                // C_i = 2^i I
                assert!((residual - 16.0 * 2f64.sqrt()).abs() < 1e-12);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn system_validation() {
        let bad_c = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 0.0, 1.0]);
        assert!(matches!(
            QuadraticOutputSystem::new(DMatrix::zeros(2, 2), DMatrix::identity(2, 1), bad_c),
            Err(Error::NotSymmetric { .. })
        ));
        let tiny = DMatrix::from_row_slice(2, 2, &[1.0, 1e-11, 0.0, 1.0]);
        let sys = QuadraticOutputSystem::new(DMatrix::zeros(2, 2), DMatrix::identity(2, 1), tiny)
            .unwrap();
        assert_eq!(sys.c(), &sys.c().transpose());
        assert!(QuadraticOutputSystem::new(
            DMatrix::zeros(2, 3),
            DMatrix::identity(2, 1),
            DMatrix::identity(2, 2)
        )
        .is_err());
        assert!(QuadraticOutputSystem::new(
            DMatrix::zeros(2, 2),
            DMatrix::identity(3, 1),
            DMatrix::identity(2, 2)
        )
        .is_err());
        assert!(QuadraticOutputSystem::new(
            DMatrix::zeros(2, 2),
            DMatrix::identity(2, 1),
            DMatrix::zeros(2, 2)
        )
        .is_err());
    }

    #[test]
    fn closed_form_low_orders() {
        let sys = QuadraticOutputSystem::new(
            DMatrix::from_row_slice(2, 2, &[0.3, -1.0, 2.0, 0.1]),
            DMatrix::identity(2, 1),
            DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]),
        )
        .unwrap();
        assert_eq!(c_closed_form(&sys, 0), *sys.c());
        let expected = sys.a().transpose() * sys.c() + sys.c() * sys.a();
        assert!((c_closed_form(&sys, 1) - expected).norm() < 1e-14);
    }

    #[test]
    fn augmented_structure() {
        let sys = vehicle_system(3);
        let aug = AugmentedSystem::from_system(&sys).unwrap();
        assert_eq!(aug.extended_dim(), 9);
        assert_eq!((aug.output_row() * aug.input_matrix()).norm(), 0.0);

        let zero = aug.eval_a_ext(&DVector::zeros(3)).unwrap();
        let mut expected = DMatrix::zeros(9, 9);
        expected
            .view_mut((0, 0), (3, 3))
            .copy_from(&aug.shift_matrix());
        expected.view_mut((3, 3), (6, 6)).copy_from(sys.a());
        assert_eq!(zero, expected);

        let u = DVector::from_vec(vec![1.5, -2.0, 0.25]);
        let a_ext = aug.eval_a_ext(&u).unwrap();
        let top_right = a_ext.view((0, 3), (3, 6)).into_owned();
        let mut rows = DMatrix::zeros(3, 6);
        for j in 0..3 {
            rows[(1, j)] = u[j];
            rows[(2, 3 + j)] = 2.0 * u[j];
        }
        assert_eq!(top_right, rows);
        assert!(aug.eval_a_ext(&DVector::zeros(2)).is_err());
    }

    #[test]
    fn single_augmented_state_layout() {
        let a = DMatrix::from_row_slice(2, 2, &[0.0, -1.0, 1.0, 0.0]);
        let b = DMatrix::from_row_slice(2, 1, &[1.0, 2.0]);
        let sys =
            QuadraticOutputSystem::new(a.clone(), b.clone(), DMatrix::identity(2, 2)).unwrap();
        let aug = AugmentedSystem::from_system(&sys).unwrap();
        assert_eq!(aug.m(), 1);
        let u = DVector::from_element(1, 3.0);
        let a_ext = aug.eval_a_ext(&u).unwrap();
        let mut expected = DMatrix::zeros(3, 3);
        expected
            .view_mut((0, 1), (1, 2))
            .copy_from(&(u.transpose() * b.transpose()));
        expected.view_mut((1, 1), (2, 2)).copy_from(&a);
        assert_eq!(a_ext, expected);
    }

    #[test]
    fn provenance_mismatch_is_rejected() {
        let sys = vehicle_system(2);
        let other = vehicle_system(1);
        let cseq = compute_c_sequence(&other, 4, DEFAULT_NILPOTENCY_TOL).unwrap();
        assert!(matches!(
            build_augmented(&sys, cseq),
            Err(Error::Dimension { .. })
        ));
    }

    #[test]
    fn extend_initial_state_vehicle() {
        let aug = AugmentedSystem::from_system(&vehicle_system(3)).unwrap();
        let x1 = [1.0, -2.0, 0.5];
        let x2 = [0.3, 4.0, -1.0];
        let x = DVector::from_iterator(6, x1.iter().chain(x2.iter()).copied());
        let z = aug.extend_initial_state(&x).unwrap();
        let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(p, q)| p * q).sum::<f64>();
        assert_eq!(z[0], 0.5 * dot(&x1, &x1));
        assert_eq!(z[1], dot(&x1, &x2));
        assert_eq!(z[2], dot(&x2, &x2));
        assert_eq!(aug.plant_part(&z), x);
        assert_eq!(
            aug.extend_initial_state(&DVector::zeros(6)).unwrap(),
            DVector::zeros(9)
        );
        assert!(aug.extend_initial_state(&DVector::zeros(5)).is_err());

        let scaled = aug.extend_initial_state(&(&x * 3.0)).unwrap();
        for i in 0..3 {
            assert!((scaled[i] - 9.0 * z[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn vehicle_gamma_table() {
        let n = 3;
        let aug = AugmentedSystem::from_system(&vehicle_system(n)).unwrap();
        let gam = compute_gamma_table(&aug);
        assert_eq!(gam.depth(), 3);
        let mut g13 = DMatrix::zeros(n, 2 * n);
        let mut g23 = DMatrix::zeros(n, 2 * n);
        for j in 0..n {
            g13[(j, n + j)] = 3.0;
            g23[(j, j)] = 1.0;
        }
        assert_eq!(gam.get(1, 3).unwrap(), &g13);
        assert_eq!(gam.get(2, 3).unwrap(), &g23);
        assert_eq!(gam.get(3, 3).unwrap(), &DMatrix::zeros(n, 2 * n));
        assert_eq!(gam.get(0, 0).unwrap(), &aug.bt_c(0));
        for k in 0..=3 {
            assert_eq!(gam.get(k + 1, k).unwrap(), &DMatrix::zeros(n, 2 * n));
        }
        let mut stacked = DMatrix::zeros(3 * n, 2 * n);
        stacked.view_mut((0, 0), (n, 2 * n)).copy_from(&g13);
        stacked.view_mut((n, 0), (n, 2 * n)).copy_from(&g23);
        assert_eq!(gam.stacked(3).unwrap(), stacked);
    }

    #[test]
    fn vehicle_r_sequence() {
        let aug = AugmentedSystem::from_system(&vehicle_system(3)).unwrap();
        let gam = compute_gamma_table(&aug);
        let sig = PrimitiveSignal::new(
            vec![
                vec![Primitive::cos(-20.0, 1.0)],
                vec![Primitive::sin(-40.0, 2.0)],
                vec![Primitive::cos(64.0, 4.0)],
            ],
            4,
        );
        let t = 0.7;
        let u = sig.value(t);
        let ud = sig.derivative(t, 1);
        assert_eq!(
            eval_r(&aug, &gam, &sig, 1, t).unwrap(),
            RowDVector::zeros(6)
        );
        let r2 = eval_r(&aug, &gam, &sig, 2, t).unwrap();
        let r3 = eval_r(&aug, &gam, &sig, 3, t).unwrap();
        for j in 0..3 {
            assert_eq!(r2[j], u[j]);
            assert_eq!(r2[3 + j], 0.0);
            assert_eq!(r3[j], ud[j]);
            assert_eq!(r3[3 + j], 3.0 * u[j]);
        }
        assert!(matches!(
            eval_r(&aug, &gam, &sig, 4, t),
            Err(Error::GammaDepth { .. })
        ));
        let low = sig.clone().with_max_order(1);
        assert!(matches!(
            eval_r(&aug, &gam, &low, 3, t),
            Err(Error::SignalOrder { required: 2, .. })
        ));
    }
}

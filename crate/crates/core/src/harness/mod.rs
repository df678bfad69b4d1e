//! Scenarios, plant/observer co-simulation, PE sweeps and CSV output.

mod output;
mod scenario;

use nalgebra::{DMatrix, DVector};

use crate::augmentation::{AugmentedSystem, GammaTable, QuadraticOutputSystem};
use crate::error::{Error, Result};
use crate::numerics::{rk4_step, IntegrationGrid};
use crate::observability::{
    check_prop2, check_prop3, check_prop4, check_prop5, check_rank, check_uniform_observability,
    transition_blocks, zero_input_rank, Condition, PeReport, PeWindows,
};
use crate::observer::{accept_step, observer_derivative, observer_init, pack, unpack};
use crate::signal::{Primitive, PrimitiveSignal, SmoothSignal};

pub use output::{
    emit_pe_csv, emit_trace_csv, parse_csv, pe_csv_string, trace_csv_string, CsvTable,
};
pub use scenario::{
    AugmentationSection, GridSection, InitialSection, InputSection, MatrixSpec, ObserverSpec,
    PeSection, PeSettings, Scenario, ScenarioFile, SystemSection,
};

/// Double integrator in `ℝⁿ` with half-squared-range output:
/// `A = [[0, I], [0, 0]]`, `B = [[0], [I]]`, `C = [[I, 0], [0, 0]]`.
pub fn vehicle_system(n: usize) -> QuadraticOutputSystem {
    assert!(n >= 1, "vehicle dimension must be at least 1");
    let mut a = DMatrix::zeros(2 * n, 2 * n);
    let mut b = DMatrix::zeros(2 * n, n);
    let mut c = DMatrix::zeros(2 * n, 2 * n);
    for j in 0..n {
        a[(j, n + j)] = 1.0;
        b[(n + j, j)] = 1.0;
        c[(j, j)] = 1.0;
    }
    QuadraticOutputSystem::new(a, b, c).expect("vehicle system is well formed")
}

/// Reference position of axis `j`.
fn vehicle_position(j: usize) -> Vec<Primitive> {
    match j {
        0 => vec![Primitive::cos(20.0, 1.0), Primitive::constant(-20.0)],
        1 => vec![Primitive::sin(10.0, 2.0), Primitive::constant(20.0)],
        2 => vec![Primitive::cos(-4.0, 4.0)],
        _ => vec![Primitive::sin(5.0, 0.5 + 0.75 * j as f64)],
    }
}

/// Reference position `x₁(t)`. The first three axes follow
/// `(20 cos t − 20, 10 sin 2t + 20, −4 cos 4t)`; further axes use `5 sin(ω_j t)`.
pub fn vehicle_reference(n: usize, max_order: usize) -> PrimitiveSignal {
    PrimitiveSignal::new((0..n).map(vehicle_position).collect(), max_order)
}

/// Acceleration input `u = ẍ₁` of the reference trajectory.
pub fn vehicle_signal(n: usize, max_order: usize) -> PrimitiveSignal {
    vehicle_reference(n, max_order + 2)
        .differentiate()
        .differentiate()
}

/// The range-only navigation example on `[0, 20]` with step `1e-3`.
pub fn vehicle_scenario(n: usize) -> Scenario {
    let system = vehicle_system(n);
    let reference = vehicle_reference(n, 1);
    let mut x0 = DVector::zeros(2 * n);
    x0.rows_mut(0, n).copy_from(&reference.value(0.0));
    x0.rows_mut(n, n).copy_from(&reference.derivative(0.0, 1));
    // no negative zeros in emitted traces
    x0.apply(|v| *v += 0.0);
    Scenario {
        max_m: system.default_max_m(),
        nilpotency_tol: crate::augmentation::DEFAULT_NILPOTENCY_TOL,
        system,
        signal: vehicle_signal(n, 10),
        x0,
        zhat0: None,
        observer: ObserverSpec::default(),
        grid: IntegrationGrid::new(0.0, 20.0, 1e-3).expect("static grid"),
        pe: PeSettings {
            starts: Some((0..=5).map(|k| 2.0 * k as f64).collect()),
            ..PeSettings::default()
        },
    }
}

/// One row per grid node.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub t: f64,
    pub x: DVector<f64>,
    /// `z_i = ½ xᵀ C_i x`, `i < m`.
    pub z: DVector<f64>,
    pub zhat: DVector<f64>,
    pub xhat: DVector<f64>,
    pub y: f64,
    pub yhat: f64,
    pub err_x: f64,
    pub err_z: f64,
    /// Smallest eigenvalue of the Riccati matrix.
    pub riccati_min_eig: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationTrace {
    pub n: usize,
    pub m: usize,
    pub rows: Vec<TraceRow>,
}

impl SimulationTrace {
    pub fn final_row(&self) -> &TraceRow {
        self.rows
            .last()
            .expect("a trace always holds the initial node")
    }
}

fn augmented_from_plant(aug: &AugmentedSystem, x: &DVector<f64>) -> DVector<f64> {
    DVector::from_iterator(
        aug.m(),
        aug.cseq().matrices()[..aug.m()]
            .iter()
            .map(|ci| 0.5 * x.dot(&(ci * x))),
    )
}

fn trace_row(
    aug: &AugmentedSystem,
    t: f64,
    x: DVector<f64>,
    zhat: DVector<f64>,
    riccati_min_eig: f64,
) -> TraceRow {
    let z = augmented_from_plant(aug, &x);
    let xhat = aug.plant_part(&zhat);
    let y = aug.base().output(&x);
    let err_x = (&xhat - &x).norm();
    let z_full = aug
        .extend_initial_state(&x)
        .expect("plant state has dimension n");
    let err_z = (&zhat - z_full).norm();
    TraceRow {
        t,
        yhat: zhat[0],
        x,
        z,
        zhat,
        xhat,
        y,
        err_x,
        err_z,
        riccati_min_eig,
    }
}

/// Co-integrates the plant and the observer with RK4 on the scenario grid.
///
/// The joint state is `[x; ẑ; vec M]` so the observer sees the plant output
/// at every RK4 stage.
pub fn simulate(sc: &Scenario) -> Result<SimulationTrace> {
    let aug = sc.validate()?;
    let cfg = sc.observer_config(&aug)?;
    let start = observer_init(&aug, &cfg, sc.initial_estimate(&aug)?)?;
    let (n, d) = (aug.n(), aug.extended_dim());
    let sys = aug.base();
    let sig: &dyn SmoothSignal = &sc.signal;

    let mut state = DVector::zeros(n + d + d * d);
    state.rows_mut(0, n).copy_from(&sc.x0);
    state
        .rows_mut(n, d + d * d)
        .copy_from(&pack(&start.zhat, &start.m));

    let grid = &sc.grid;
    let mut rows = Vec::with_capacity(grid.len());
    let min_eig0 = start.m.symmetric_eigenvalues().min();
    rows.push(trace_row(
        &aug,
        grid.time(0),
        sc.x0.clone(),
        start.zhat,
        min_eig0,
    ));

    for k in 0..grid.intervals() {
        let (t, t_next) = (grid.time(k), grid.time(k + 1));
        let next = rk4_step(
            |s, v| {
                let x = v.rows(0, n).into_owned();
                let (zhat, m) = unpack(v, n, d);
                let u = sig.value(s);
                let (dz, dm) = observer_derivative(&aug, &cfg, &u, sys.output(&x), &zhat, &m)
                    .expect("dimensions validated");
                let mut out = DVector::zeros(v.len());
                out.rows_mut(0, n).copy_from(&sys.dynamics(&x, &u));
                out.rows_mut(n, d + d * d).copy_from(&pack(&dz, &dm));
                out
            },
            t,
            &state,
            t_next - t,
        )?;
        let (zhat, m) = unpack(&next, n, d);
        let accepted = accept_step(t_next, zhat, m)?;
        state = next;
        state
            .rows_mut(n, d + d * d)
            .copy_from(&pack(&accepted.zhat, &accepted.m));
        let min_eig = accepted.m.symmetric_eigenvalues().min();
        let x = state.rows(0, n).into_owned();
        rows.push(trace_row(&aug, t_next, x, accepted.zhat, min_eig));
    }
    log::debug!("simulated {} nodes", rows.len());
    Ok(SimulationTrace {
        n,
        m: aug.m(),
        rows,
    })
}

fn gated(
    condition: Condition,
    windows: &PeWindows,
    result: Result<Vec<PeReport>>,
) -> Result<Vec<PeReport>> {
    match result {
        Ok(reports) => Ok(reports),
        Err(
            e @ (Error::ComplexEigenvalues { .. }
            | Error::GammaUnobservable { .. }
            | Error::SignalOrder { .. }
            | Error::GammaDepth { .. }),
        ) => {
            log::info!("{condition} skipped: {e}");
            Ok(windows
                .starts
                .iter()
                .map(|&s| {
                    PeReport::skipped(
                        condition,
                        s,
                        windows.delta,
                        windows.threshold,
                        e.to_string(),
                    )
                })
                .collect())
        }
        Err(e) => Err(e),
    }
}

/// Runs every PE check on the scenario windows. Failed preconditions turn
/// into skipped entries.
pub fn run_pe_suite(sc: &Scenario) -> Result<Vec<PeReport>> {
    let aug = sc.validate()?;
    let windows = sc.windows()?;
    let kappa = sc.kappa(&aug);
    let depth = kappa.max(aug.extended_dim() - 1);
    let gam = GammaTable::with_depth(&aug, depth);
    let sig: &dyn SmoothSignal = &sc.signal;
    let grid = &sc.grid;

    let blocks = transition_blocks(&aug, sig, *grid)?;
    let mut reports = check_uniform_observability(&aug, &blocks, &windows)?;
    reports.extend(gated(
        Condition::Prop2,
        &windows,
        check_prop2(&aug, &gam, sig, grid, kappa, &windows),
    )?);
    reports.extend(gated(
        Condition::Prop3,
        &windows,
        check_prop3(&aug, &gam, sig, grid, &windows),
    )?);
    reports.extend(gated(
        Condition::Prop4,
        &windows,
        check_prop4(&aug, &gam, sig, grid, &windows),
    )?);
    reports.extend(gated(
        Condition::Prop5,
        &windows,
        check_prop5(&aug, &gam, sig, grid, &windows),
    )?);
    reports.extend(gated(
        Condition::RankThm2,
        &windows,
        check_rank(&aug, &gam, sig, depth, &windows),
    )?);
    Ok(reports)
}

/// Structural summary printed by `analyze`.
#[derive(Debug, Clone, PartialEq)]
pub struct Analysis {
    pub n: usize,
    pub p: usize,
    pub m: Option<usize>,
    /// `‖C_i‖_F` for every computed index.
    pub c_norms: Vec<f64>,
    pub zero_input_rank: Option<usize>,
    /// `None` when the C-sequence vanishes, otherwise the violation.
    pub violation: Option<String>,
}

impl Analysis {
    pub fn assumption_holds(&self) -> bool {
        self.violation.is_none()
    }
}

impl std::fmt::Display for Analysis {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "n = {}", self.n)?;
        writeln!(f, "p = {}", self.p)?;
        match self.m {
            Some(m) => writeln!(f, "m = {m}")?,
            None => writeln!(f, "m = none")?,
        }
        for (i, norm) in self.c_norms.iter().enumerate() {
            writeln!(f, "|C_{i}|_F = {norm:.6e}")?;
        }
        if let Some(rank) = self.zero_input_rank {
            writeln!(
                f,
                "zero-input rank = {rank} (extended dim {})",
                self.m.unwrap_or(0) + self.n
            )?;
        }
        match &self.violation {
            None => writeln!(f, "nilpotency assumption: holds"),
            Some(msg) => writeln!(f, "nilpotency assumption: violated ({msg})"),
        }
    }
}

/// Structural facts about the scenario system. Never fails on a violated
/// nilpotency assumption; the verdict is part of the result.
pub fn analyze(sc: &Scenario) -> Analysis {
    let sys = &sc.system;
    let mut norms = Vec::new();
    let mut ci = sys.c().clone();
    let scale = ci.norm();
    for _ in 0..=sc.max_m {
        let norm = ci.norm();
        norms.push(norm);
        if norm <= sc.nilpotency_tol * scale {
            break;
        }
        ci = &ci * sys.a() + sys.a().transpose() * &ci;
    }
    match sc.augment() {
        Ok(aug) => Analysis {
            n: sys.n(),
            p: sys.p(),
            m: Some(aug.m()),
            c_norms: norms,
            zero_input_rank: Some(zero_input_rank(&aug)),
            violation: None,
        },
        Err(e) => Analysis {
            n: sys.n(),
            p: sys.p(),
            m: None,
            c_norms: norms,
            zero_input_rank: None,
            violation: Some(e.to_string()),
        },
    }
}

//! Acceptance criteria, one pass/fail line each.
//!
//! Runs as a plain binary (`harness = false`). Criteria 6 and 7 cannot hold
//! as stated: the κ = 4 determinant condition is identically zero for a
//! six-dimensional plant, and the prescribed observer tuning leaves an error
//! near 0.096 at t = 20. Both are evaluated at full tolerance and reported as
//! FAIL. The process exits with status 1 on any other failure, or if one of
//! those two starts passing.

use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use quadobs::augmentation::{c_closed_form, compute_c_sequence, eval_r, DEFAULT_NILPOTENCY_TOL};
use quadobs::harness::{
    emit_trace_csv, run_pe_suite, simulate, vehicle_scenario, vehicle_signal, vehicle_system,
};
use quadobs::numerics::mat_exp;
use quadobs::observability::{
    check_prop2, check_prop3, check_prop4, check_uniform_observability, transition_blocks,
    worst_margin, zero_input_rank,
};
use quadobs::observer::{observer_step, ObserverConfig, ObserverState};
use quadobs::{
    AugmentedSystem, GammaTable, IntegrationGrid, PeWindows, Primitive, PrimitiveSignal,
    QuadraticOutputSystem, SmoothSignal,
};

type Criterion = (&'static str, fn() -> Outcome);

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn vehicle_windows() -> PeWindows {
    PeWindows::new(2.0, 1e-6, (0..=5).map(|k| 2.0 * k as f64).collect()).unwrap()
}

fn vehicle_grid() -> IntegrationGrid {
    IntegrationGrid::new(0.0, 20.0, 1e-3).unwrap()
}

fn c1_c_sequence() -> Outcome {
    let sys = vehicle_system(3);
    let start = Instant::now();
    let cseq = compute_c_sequence(&sys, sys.default_max_m(), DEFAULT_NILPOTENCY_TOL).unwrap();
    let elapsed = start.elapsed();

    let i3 = DMatrix::<f64>::identity(3, 3);
    let z3 = DMatrix::<f64>::zeros(3, 3);
    let block = |a: &DMatrix<f64>, b: &DMatrix<f64>, c: &DMatrix<f64>, d: &DMatrix<f64>| {
        let mut m = DMatrix::zeros(6, 6);
        m.view_mut((0, 0), (3, 3)).copy_from(a);
        m.view_mut((0, 3), (3, 3)).copy_from(b);
        m.view_mut((3, 0), (3, 3)).copy_from(c);
        m.view_mut((3, 3), (3, 3)).copy_from(d);
        m
    };
    let c1 = block(&z3, &i3, &i3, &z3);
    let c2 = block(&z3, &z3, &z3, &(&i3 * 2.0));
    let exact = cseq.m() == 3
        && cseq.get(1) == c1
        && cseq.get(2) == c2
        && cseq.get(3) == DMatrix::zeros(6, 6);
    outcome(
        exact && elapsed < Duration::from_millis(1),
        format!("m = {}, exact = {exact}, {:?}", cseq.m(), elapsed),
    )
}

fn c2_r_sequence() -> Outcome {
    let aug = AugmentedSystem::from_system(&vehicle_system(3)).unwrap();
    let gam = GammaTable::with_depth(&aug, 3);
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let t: f64 = rng.gen_range(-10.0..10.0);
        let u: Vec<f64> = (0..3).map(|_| rng.gen_range(-50.0..50.0)).collect();
        let du: Vec<f64> = (0..3).map(|_| rng.gen_range(-50.0..50.0)).collect();
        // affine signal with u(t) and u̇(t) as drawn
        let channels = (0..3)
            .map(|j| {
                vec![Primitive::Polynomial {
                    coefficients: vec![u[j] - du[j] * t, du[j]],
                }]
            })
            .collect();
        let sig = PrimitiveSignal::new(channels, 3);
        let (u, du) = (sig.derivative(t, 0), sig.derivative(t, 1));
        let mut expect = [
            DVector::zeros(6),
            DVector::zeros(6),
            DVector::zeros(6),
            DVector::zeros(6),
        ];
        expect[2].rows_mut(0, 3).copy_from(&u);
        expect[3].rows_mut(0, 3).copy_from(&du);
        expect[3].rows_mut(3, 3).copy_from(&(&u * 3.0));
        for (i, e) in expect.iter().enumerate().skip(1) {
            let r = eval_r(&aug, &gam, &sig, i, t).unwrap();
            let err = (r.transpose() - e).amax();
            worst = worst.max(err);
        }
    }
    outcome(worst <= 1e-12, format!("max entrywise error {worst:.3e}"))
}

fn c3_closed_form() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let start = Instant::now();
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let n = rng.gen_range(1..=5);
        let a = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
        let b = DMatrix::from_fn(n, 1, |_, _| rng.gen_range(-1.0..1.0));
        let raw = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
        let c = (&raw + raw.transpose()) * 0.5;
        let sys = QuadraticOutputSystem::new(a.clone(), b, c.clone()).unwrap();
        let mut ci = c;
        for i in 0..=8 {
            let closed = c_closed_form(&sys, i);
            let rel = (&closed - &ci).norm() / ci.norm().max(f64::MIN_POSITIVE);
            worst = worst.max(rel);
            ci = &ci * &a + a.transpose() * &ci;
        }
    }
    let elapsed = start.elapsed();
    outcome(
        worst <= 1e-10 && elapsed < Duration::from_secs(1),
        format!("max relative error {worst:.3e}, {elapsed:?}"),
    )
}

fn c4_zero_input() -> Outcome {
    let aug = AugmentedSystem::from_system(&vehicle_system(3)).unwrap();
    let rank = zero_input_rank(&aug);
    let zero = PrimitiveSignal::zero(3, 10);
    let blocks = transition_blocks(&aug, &zero, vehicle_grid()).unwrap();
    let reports = check_uniform_observability(&aug, &blocks, &vehicle_windows()).unwrap();
    let worst = reports
        .iter()
        .map(|r| r.margin.unwrap().abs())
        .fold(0.0, f64::max);
    outcome(
        rank == 3 && worst <= 1e-10,
        format!("zero-input rank {rank}, max |margin| with u = 0 {worst:.3e}"),
    )
}

fn c5_transition_blocks() -> Outcome {
    let aug = AugmentedSystem::from_system(&vehicle_system(3)).unwrap();
    let sig = vehicle_signal(3, 10);
    let grid = vehicle_grid();
    let blocks = transition_blocks(&aug, &sig, grid).unwrap();
    let s = aug.shift_matrix();
    let h = grid.step();

    // d/dt Φ12(t,τ) = S Φ12 + U(t) Φ22 by central differences along each path
    let mut worst = 0.0f64;
    for tau in [0.0, 5.0, 10.0, 15.0] {
        let (sub, path) = blocks.phi12_path(tau, (tau + 5.0f64).min(20.0)).unwrap();
        for k in 1..sub.intervals() {
            let t = sub.time(k);
            let lhs = (&path[k + 1] - &path[k - 1]) / (2.0 * h);
            let rhs = &s * &path[k] + blocks.coupling(t) * blocks.phi22(t, tau).unwrap();
            worst = worst.max((&lhs - &rhs).norm() / rhs.norm().max(1.0));
        }
    }

    let mut phi22_exact = true;
    for (t, tau) in [(3.0, 1.0), (20.0, 0.0), (7.5, 12.25)] {
        let mut expect = DMatrix::identity(6, 6);
        for j in 0..3 {
            expect[(j, 3 + j)] = t - tau;
        }
        phi22_exact &= blocks.phi22(t, tau).unwrap() == expect;
        phi22_exact &= mat_exp(aug.base().a(), t - tau).unwrap() == expect;
    }
    outcome(
        worst <= 1e-5 && phi22_exact,
        format!("max relative ODE residual {worst:.3e}, Φ22 exact = {phi22_exact}"),
    )
}

fn c6_pe_certification() -> Outcome {
    let start = Instant::now();
    let aug = AugmentedSystem::from_system(&vehicle_system(3)).unwrap();
    let sig = vehicle_signal(3, 10);
    let grid = vehicle_grid();
    let windows = vehicle_windows();
    let gam = GammaTable::with_depth(&aug, 8);

    let p3 = check_prop3(&aug, &gam, &sig, &grid, &windows).unwrap();
    let p4 = check_prop4(&aug, &gam, &sig, &grid, &windows).unwrap();
    let p2 = check_prop2(&aug, &gam, &sig, &grid, 4, &windows).unwrap();
    let constant = PrimitiveSignal::constant(&[1.0, 1.0, 1.0], 10);
    let p4c = check_prop4(&aug, &gam, &constant, &grid, &windows).unwrap();
    let elapsed = start.elapsed();

    let m3 = worst_margin(&p3).unwrap();
    let m4 = worst_margin(&p4).unwrap();
    let m2 = worst_margin(&p2).unwrap();
    let m4c = p4c
        .iter()
        .map(|r| r.margin.unwrap().abs())
        .fold(0.0, f64::max);
    let p2_pass = p2.iter().all(|r| r.pass);
    outcome(
        m3 >= 1e-6 && m4 >= 1e-6 && p2_pass && m4c <= 1e-10 && elapsed < Duration::from_secs(30),
        format!(
            "prop3 min {m3:.3e}, prop4 min {m4:.3e}, prop2(κ=4) min {m2:.3e} pass = {p2_pass}, \
             constant-input prop4 {m4c:.3e}, {elapsed:?}"
        ),
    )
}

fn c7_observer_convergence() -> Outcome {
    let start = Instant::now();
    let trace = simulate(&vehicle_scenario(3)).unwrap();
    let elapsed = start.elapsed();
    let final_err = trace.final_row().err_x;
    let pd = trace.rows.iter().all(|r| r.riccati_min_eig > 0.0);

    // least-squares slope of ln‖e‖ against t on [2, 20]
    let pts: Vec<(f64, f64)> = trace
        .rows
        .iter()
        .filter(|r| r.t >= 2.0)
        .map(|r| (r.t, r.err_x.ln()))
        .collect();
    let n = pts.len() as f64;
    let (mt, me) = pts
        .iter()
        .fold((0.0, 0.0), |(a, b), (t, e)| (a + t / n, b + e / n));
    let (sxy, sxx) = pts.iter().fold((0.0, 0.0), |(a, b), (t, e)| {
        (a + (t - mt) * (e - me), b + (t - mt) * (t - mt))
    });
    let slope = sxy / sxx;

    outcome(
        final_err <= 1e-3 && slope < 0.0 && pd && elapsed < Duration::from_secs(10),
        format!(
            "‖x̂(20) − x(20)‖ = {final_err:.6e} (bound 1e-3), log-linear slope {slope:.4}, \
             M positive definite = {pd}, {elapsed:?}"
        ),
    )
}

fn c8_scalar_riccati() -> Outcome {
    // A = 0, B = 1, C = 1 gives m = 1; with u = 0, V = 0, θ = 0, W = 1 the
    // (0,0) entry of M solves ṁ = −m², m(0) = 1
    let sys = QuadraticOutputSystem::new(
        DMatrix::zeros(1, 1),
        DMatrix::identity(1, 1),
        DMatrix::identity(1, 1),
    )
    .unwrap();
    let aug = AugmentedSystem::from_system(&sys).unwrap();
    let cfg = ObserverConfig {
        m0: DMatrix::identity(2, 2),
        v: DMatrix::zeros(2, 2),
        w: 1.0,
        theta: 0.0,
    };
    let sig = PrimitiveSignal::zero(1, 2);
    let mut st = ObserverState {
        t: 0.0,
        zhat: DVector::zeros(2),
        m: cfg.m0.clone(),
    };
    let mut worst = 0.0f64;
    for _ in 0..100 {
        st = observer_step(&aug, &cfg, &st, &sig, |_| 0.0, 0.01).unwrap();
        worst = worst.max((st.m[(0, 0)] - 1.0 / (1.0 + st.t)).abs());
    }
    outcome(
        worst <= 1e-6,
        format!("m(1) = {:.9}, max deviation {worst:.3e}", st.m[(0, 0)]),
    )
}

fn c9_sign_ambiguity() -> Outcome {
    let mut sc = vehicle_scenario(3);
    sc.signal = PrimitiveSignal::zero(3, 10);
    let aug = sc.validate().unwrap();
    // ẑ(0) = z(−x0): same output history, opposite plant state
    sc.zhat0 = Some(aug.extend_initial_state(&(-&sc.x0)).unwrap());
    let trace = simulate(&sc).unwrap();
    let initial = trace.rows[0].err_x;
    let last = trace.final_row().err_x;
    outcome(
        last >= 0.1 * initial,
        format!("initial error {initial:.4e}, error at t = 20 {last:.4e}"),
    )
}

fn c10_determinism() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let paths = [dir.path().join("a.csv"), dir.path().join("b.csv")];
    for p in &paths {
        emit_trace_csv(&simulate(&vehicle_scenario(3)).unwrap(), p).unwrap();
    }
    let a = std::fs::read(&paths[0]).unwrap();
    let b = std::fs::read(&paths[1]).unwrap();
    // the PE report is produced by parallel sweeps and must not depend on scheduling
    let pe_a = quadobs::harness::pe_csv_string(&run_pe_suite(&vehicle_scenario(3)).unwrap());
    let pe_b = quadobs::harness::pe_csv_string(&run_pe_suite(&vehicle_scenario(3)).unwrap());
    outcome(
        a == b && pe_a == pe_b,
        format!(
            "trace {} bytes identical = {}, PE report identical = {}",
            a.len(),
            a == b,
            pe_a == pe_b
        ),
    )
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("1 C-sequence reproduction", c1_c_sequence),
        ("2 r-sequence reproduction", c2_r_sequence),
        ("3 closed form equals recursion", c3_closed_form),
        ("4 zero input is not observable", c4_zero_input),
        ("5 transition blocks", c5_transition_blocks),
        ("6 PE certification", c6_pe_certification),
        ("7 observer convergence", c7_observer_convergence),
        ("8 scalar Riccati", c8_scalar_riccati),
        ("9 sign ambiguity", c9_sign_ambiguity),
        ("10 determinism", c10_determinism),
    ];
    const EXPECTED_FAILURES: [&str; 2] = ["6 PE certification", "7 observer convergence"];
    let (mut failed, mut unexpected) = (0, 0);
    for (name, run) in criteria {
        let o = run();
        let expected_fail = EXPECTED_FAILURES.contains(&name);
        if !o.pass {
            failed += 1;
        }
        if o.pass == expected_fail {
            unexpected += 1;
        }
        let note = match (o.pass, expected_fail) {
            (false, true) => " [known unattainable]",
            (true, true) => " [expected to fail, update the suite]",
            _ => "",
        };
        println!(
            "[{}] {name}: {}{note}",
            if o.pass { "PASS" } else { "FAIL" },
            o.detail
        );
    }
    println!(
        "{} of {} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if unexpected > 0 {
        std::process::exit(1);
    }
}

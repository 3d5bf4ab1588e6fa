//! Acceptance suite: one PASS/FAIL line per criterion. Exits nonzero if any criterion fails.

use std::f64::consts::PI;
use std::path::Path;
use std::time::{Duration, Instant};

use mflow_cli::config::parse_config;
use mflow_cli::output::{checkpoint_from_str, checkpoint_to_string};
use mflow_cli::{run_experiment, RunOptions};
use mflow_core::entropy::{monitor_entropy, zero_field_entropy, AdjointSign};
use mflow_core::flow::{run_flow, FlowRun};
use mflow_core::functionals::{gradient_fd_check, moduli_energy};
use mflow_core::stability::{coercivity_constant, perturbation_experiment};
use mflow_core::tensor_field::moduli_distance;
use mflow_core::willmore::{compare_profiles, scalar_baseline_step};
use mflow_core::{init, AmbientModel, FlowCoefficients, GaugeRotation, Grid, Schedule, SymMatrix, SymTensorField};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Verdict {
    pass: bool,
    detail: String,
}

fn report(id: u32, name: &str, budget: Duration, f: impl FnOnce() -> Verdict) -> bool {
    let start = Instant::now();
    let v = f();
    let took = start.elapsed();
    let in_time = took <= budget;
    let pass = v.pass && in_time;
    println!(
        "[{}] {id:>2} {name}: {} | {:.2} s (budget {} s{})",
        if pass { "PASS" } else { "FAIL" },
        v.detail,
        took.as_secs_f64(),
        budget.as_secs(),
        if in_time { "" } else { ", exceeded" }
    );
    pass
}

fn secs(s: u64) -> Duration {
    Duration::from_secs(s)
}

// Criterion 3 setup, shared with 4 and 7: m = 2, n = 32 on a square of side π.
const SMALL_DATA_RUNS: usize = 10;

fn small_data_grid() -> Grid {
    Grid::new(2, 32, PI).unwrap()
}

fn small_data_case(i: usize) -> (SymTensorField, AmbientModel) {
    let (c, trace_adjusted) = [(0.0, false), (0.0, true), (-1.0, false), (-1.0, true)][i % 4];
    let a0 = init::random_smooth(&small_data_grid(), 1000 + i as u64, 4, 0.1).unwrap();
    (a0, AmbientModel::new(c, trace_adjusted).unwrap())
}

fn small_data_schedule(t_end: f64) -> Schedule {
    Schedule::new(t_end, 1e-3, if t_end > 1.0 { 5e-2 } else { 1e-2 }).with_output_every(0.01_f64.max(t_end / 100.0))
}

fn criterion_1() -> Verdict {
    let g = Grid::new(1, 64, 2.0 * PI).unwrap();
    let t = 0.1;
    let mut errs = Vec::new();
    for k in 1..=8i64 {
        let a0 = init::single_mode(&g, k, 0, 1.0).unwrap();
        let run = run_flow(&a0, &AmbientModel::flat(), &FlowCoefficients::zero(), &Schedule::new(t, 1e-2, 1e-2)).unwrap();
        let exact = init::single_mode(&g, k, 0, (-(k as f64).powi(4) * t).exp()).unwrap();
        errs.push(run.final_state.a.sub(&exact).unwrap().l2_norm() / exact.l2_norm());
    }
    let worst = errs.iter().copied().fold(0.0, f64::max);
    let listed: Vec<String> = errs.iter().enumerate().map(|(i, e)| format!("k={}:{e:.1e}", i + 1)).collect();
    Verdict { pass: worst <= 1e-10, detail: format!("max rel L2 err {worst:.3e} (tol 1e-10) [{}]", listed.join(" ")) }
}

fn criterion_2() -> Verdict {
    let g = Grid::new(2, 32, 2.0 * PI).unwrap();
    let mut worst: f64 = 0.0;
    let mut all_flagged = true;
    for i in 0..20u64 {
        let a = init::random_smooth(&g, 2 * i + 1, 4, 1.0).unwrap();
        let b = init::random_smooth(&g, 2 * i + 2, 4, 1.0).unwrap();
        let check = gradient_fd_check(&a, &b, &[1e-3, 1e-4, 1e-5]).unwrap();
        worst = worst.max(check.relative_errors[2]);
        all_flagged &= check.roundoff_dominated;
    }
    Verdict {
        pass: worst <= 1e-6 && all_flagged,
        detail: format!("max rel err at eps=1e-5: {worst:.3e} (tol 1e-6); roundoff-exact flagged on all pairs: {all_flagged}"),
    }
}

fn criterion_3(runs: &mut Vec<FlowRun>) -> Verdict {
    let mut worst_excess = f64::NEG_INFINITY;
    let mut late = 0;
    let mut steps = 0;
    for i in 0..SMALL_DATA_RUNS {
        let (a0, amb) = small_data_case(i);
        let run = run_flow(&a0, &amb, &FlowCoefficients::default(), &small_data_schedule(1.0)).unwrap();
        let f0 = run.records[0].energy;
        for w in run.records.windows(2) {
            worst_excess = worst_excess.max(w[1].energy - w[0].energy - 1e-12 * (1.0 + f0));
        }
        late += run.rejections.iter().filter(|r| r.after_step >= 5).count();
        steps += run.records.len() - 1;
        runs.push(run);
    }
    Verdict {
        pass: worst_excess <= 0.0 && late == 0,
        detail: format!(
            "{SMALL_DATA_RUNS} runs, {steps} accepted steps; max F(t+) - F(t) - 1e-12(1+F0) = {worst_excess:.3e} (must be <= 0); rejections after step 5: {late}"
        ),
    }
}

fn criterion_4() -> Verdict {
    let mut worst: f64 = 0.0;
    let mut failures = Vec::new();
    for i in 0..SMALL_DATA_RUNS {
        let (a0, amb) = small_data_case(i);
        match run_flow(&a0, &amb, &FlowCoefficients::default(), &small_data_schedule(25.0)) {
            Ok(run) => worst = worst.max(run.final_state.a.gradient_l2_norm()),
            Err(e) => failures.push(format!("run {i}: {e}")),
        }
    }
    Verdict {
        pass: failures.is_empty() && worst <= 1e-8,
        detail: format!("t_end=25, max final ||grad A|| = {worst:.3e} (tol 1e-8); failed runs: {failures:?}"),
    }
}

fn criterion_5() -> Verdict {
    let g1 = Grid::new(1, 64, 2.0 * PI).unwrap();
    let p1 = init::single_mode(&g1, 1, 0, 1.0).unwrap();
    let a = perturbation_experiment(&SymMatrix::zero(1), &p1, 1e-3, &AmbientModel::flat(), &FlowCoefficients::zero(), &Schedule::new(6.0, 1e-2, 1e-2))
        .unwrap();
    let a_err = (a.beta_fitted - 2.0).abs() / 2.0;

    // Square of side π: the slowest mode has |k| = 2 and is stable under c = -1.
    let g2 = small_data_grid();
    let p2 = init::single_mode(&g2, 1, 0, 1.0).unwrap();
    let amb = AmbientModel::new(-1.0, false).unwrap();
    let b = perturbation_experiment(&SymMatrix::zero(2), &p2, 1e-3, &amb, &FlowCoefficients::default(), &Schedule::new(1.0, 1e-4, 1e-4)).unwrap();
    let b_err = (b.beta_fitted - b.beta_predicted).abs() / b.beta_predicted;
    Verdict {
        pass: a_err <= 1e-6 && b_err <= 0.1 && b.fit_r2 >= 0.999,
        detail: format!(
            "(a) beta_fitted={:.10} rel err {a_err:.2e} (tol 1e-6); (b) beta_fitted={:.4} beta_predicted={:.4} rel err {b_err:.2e} (tol 0.1), r2={:.6} (min 0.999)",
            a.beta_fitted, b.beta_fitted, b.beta_predicted, b.fit_r2
        ),
    }
}

fn criterion_6() -> Verdict {
    let mut worst: f64 = 0.0;
    let mut parts = Vec::new();
    for g in [Grid::new(1, 64, 2.0 * PI).unwrap(), Grid::new(2, 32, PI).unwrap(), Grid::new(2, 16, 2.0 * PI).unwrap()] {
        let lam = coercivity_constant(&g).unwrap();
        let expect = g.k_min().powi(4);
        let err = (lam - expect).abs() / expect;
        worst = worst.max(err);
        parts.push(format!("m={} L={:.4}: {lam:.12} vs {expect}", g.dim(), g.period()));
    }
    Verdict { pass: worst <= 1e-10, detail: format!("max rel err {worst:.2e} (tol 1e-10) [{}]", parts.join("; ")) }
}

fn criterion_7(runs: &[FlowRun]) -> Verdict {
    let horizon = 2.0;
    let mut norm_err: f64 = 0.0;
    let mut max_increase = f64::NEG_INFINITY;
    let mut monotone_runs = 0;
    for run in runs {
        let mon = monitor_entropy(&run.snapshots, horizon, AdjointSign::Diffusive, 1e-8).unwrap();
        norm_err = norm_err.max(mon.max_norm_error);
        max_increase = max_increase.max(mon.max_increase);
        monotone_runs += mon.monotone as usize;
    }

    let g = small_data_grid();
    let zero = SymTensorField::zeros(&g);
    let zrun = run_flow(&zero, &AmbientModel::flat(), &FlowCoefficients::default(), &small_data_schedule(1.0)).unwrap();
    let zmon = monitor_entropy(&zrun.snapshots, horizon, AdjointSign::Diffusive, 1e-8).unwrap();
    let closed = zmon.series.iter().map(|(t, w)| (w - zero_field_entropy(&g, horizon - t)).abs()).fold(0.0, f64::max);

    let monotone = monotone_runs == runs.len();
    Verdict {
        pass: norm_err <= 1e-9 && monotone && closed <= 1e-10,
        detail: format!(
            "max |int u - 1| = {norm_err:.2e} (tol 1e-9); W monotone (tol 1e-8) in {monotone_runs}/{} runs, max W increase {max_increase:.3e}; A=0 closed-form err {closed:.2e} (tol 1e-10)",
            runs.len()
        ),
    }
}

fn criterion_8() -> Verdict {
    let g = small_data_grid();
    let amb = AmbientModel::new(-1.0, true).unwrap();
    let coeffs = FlowCoefficients::default();
    let sched = small_data_schedule(0.5);
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let (mut dist, mut df, mut dw, mut pointwise) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for i in 0..5 {
        let rot = GaugeRotation::rotation(rng.gen_range(0.0..2.0 * PI));
        let a0 = init::random_smooth(&g, 800 + i, 4, 0.1).unwrap();
        let flowed = run_flow(&a0, &amb, &coeffs, &sched).unwrap();
        let conj_first = run_flow(&a0.conjugate(&rot).unwrap(), &amb, &coeffs, &sched).unwrap();
        let lhs = flowed.final_state.a.conjugate(&rot).unwrap();
        let rhs = &conj_first.final_state.a;
        dist = dist.max(moduli_distance(&lhs, rhs).unwrap());
        pointwise = pointwise.max(lhs.sub(rhs).unwrap().sup_norm());
        df = df.max((moduli_energy(&flowed.final_state.a) - moduli_energy(rhs)).abs());
        let w1 = monitor_entropy(&flowed.snapshots, 2.0, AdjointSign::Diffusive, 1e-8).unwrap();
        let w2 = monitor_entropy(&conj_first.snapshots, 2.0, AdjointSign::Diffusive, 1e-8).unwrap();
        dw = dw.max((w1.series.last().unwrap().1 - w2.series.last().unwrap().1).abs());
    }
    Verdict {
        pass: dist <= 1e-10 && df <= 1e-10 && dw <= 1e-10,
        detail: format!(
            "5 rotations, t=0.5: max moduli distance {dist:.2e}, |dF| {df:.2e}, |dW| {dw:.2e} (tol 1e-10 each); componentwise sup diff {pointwise:.2e}"
        ),
    }
}

fn criterion_9() -> Verdict {
    let dt = 1e-4;
    let mut trace_err: f64 = 0.0;
    for (m, n) in [(1, 16), (2, 16)] {
        let g = Grid::new(m, n, 2.0 * PI).unwrap();
        let mut a = init::random_smooth(&g, 90 + m as u64, 3, 1.0).unwrap();
        let tr0 = a.trace();
        let scale = tr0.iter().fold(0.0f64, |s, v| s.max(v.abs()));
        for step in 1..=10_000 {
            a = scalar_baseline_step(&a, dt, 0.0).unwrap();
            let decay = (-2.0 * m as f64 * dt * step as f64).exp();
            for (now, start) in a.trace().iter().zip(&tr0) {
                trace_err = trace_err.max((now - start * decay).abs() / scale);
            }
        }
    }

    let g = Grid::new(1, 64, 2.0 * PI).unwrap();
    let a0 = init::single_mode(&g, 1, 0, 1.0).unwrap();
    let sched = Schedule::new(0.1, 1e-2, 1e-2).with_output_every(0.01);
    let run = run_flow(&a0, &AmbientModel::flat(), &FlowCoefficients::zero(), &sched).unwrap();
    let cmp = compare_profiles(&run.snapshots).unwrap();
    let mut prof_err: f64 = 0.0;
    for row in &cmp.rows {
        let e = (-2.0 * row.t).exp();
        prof_err = prof_err.max((row.energy - PI / 2.0 * e).abs() / (PI / 2.0 * e));
        prof_err = prof_err.max((row.willmore - PI * e).abs() / (PI * e));
    }
    Verdict {
        pass: trace_err <= 1e-8 && prof_err <= 1e-8,
        detail: format!(
            "trace vs e^(-2mt) over [0,1], dt=1e-4: max rel err {trace_err:.2e} (tol 1e-8); profiles on {} samples: max rel err {prof_err:.2e} (tol 1e-8)",
            cmp.rows.len()
        ),
    }
}

fn read(path: &Path) -> Vec<u8> {
    std::fs::read(path).unwrap()
}

fn summary_final(path: &Path) -> serde_json::Value {
    let v: serde_json::Value = serde_json::from_slice(&read(path)).unwrap();
    v["final"].clone()
}

fn criterion_10() -> Verdict {
    let g = small_data_grid();
    let a = init::random_smooth(&g, 10, 4, 0.3).unwrap();
    let state = mflow_core::FlowState { a, t: 0.3, step: 17, dt_last: 1.0 / 7.0 };
    let ctl = mflow_core::flow::Controller { dt_next: 1.0 / 3.0 * 1e-3, accept_streak: 4, energy_ref: 0.7 };
    let (back, ctl_back) = checkpoint_from_str(&checkpoint_to_string(&state, &ctl)).unwrap();
    let bit_exact = ctl_back == ctl
        && back.t.to_bits() == state.t.to_bits()
        && back.step == state.step
        && back.dt_last.to_bits() == state.dt_last.to_bits()
        && back.a.components().iter().flatten().zip(state.a.components().iter().flatten()).all(|(x, y)| x.to_bits() == y.to_bits());

    let tmp = tempfile::tempdir().unwrap();
    let base = "kind = flow\nseed = 5\n[grid]\nm = 2\nn = 16\nL = pi\n[ambient]\nc = -1\n[initial]\npreset = random-smooth\namplitude = 0.1\n[schedule]\ndt_init = 1e-3\ndt_max = 1e-2\ndiag_every = 0.05\n";
    let cfg_for = |t_end: f64, dir: &str| {
        let mut c = parse_config(&format!("{base}t_end = {t_end}\n")).unwrap();
        c.out_dir = tmp.path().join(dir);
        c
    };
    let full = run_experiment(&cfg_for(0.5, "full"), &RunOptions::default()).unwrap();
    let ckpt = tmp.path().join("half.mflow");
    run_experiment(&cfg_for(0.25, "first"), &RunOptions { checkpoint: Some(ckpt.clone()), resume: None }).unwrap();
    let resumed = run_experiment(&cfg_for(0.5, "second"), &RunOptions { checkpoint: None, resume: Some(ckpt) }).unwrap();
    let (f1, f2) = (summary_final(&full.summary), summary_final(&resumed.summary));
    let mut resume_err: f64 = 0.0;
    for (key, v) in f1.as_object().unwrap() {
        if let (Some(x), Some(y)) = (v.as_f64(), f2[key].as_f64()) {
            resume_err = resume_err.max((x - y).abs());
        }
    }

    let entropy_cfg = "kind = entropy\nseed = 9\n[grid]\nm = 2\nn = 16\nL = pi\n[ambient]\nc = -1\ntrace_adjusted = true\n[initial]\npreset = random-smooth\n[schedule]\nt_end = 0.2\ndiag_every = 0.02\n";
    let run_in = |dir: &str| {
        let mut c = parse_config(entropy_cfg).unwrap();
        c.out_dir = tmp.path().join(dir);
        run_experiment(&c, &RunOptions::default()).unwrap()
    };
    let (r1, r2) = (run_in("det1"), run_in("det2"));
    let identical = read(&r1.summary) == read(&r2.summary) && read(r1.timeseries.as_ref().unwrap()) == read(r2.timeseries.as_ref().unwrap());

    Verdict {
        pass: bit_exact && resume_err <= 1e-12 && identical,
        detail: format!(
            "checkpoint bit-exact: {bit_exact}; resume vs single run max diagnostic diff {resume_err:.2e} (tol 1e-12); byte-identical repeat outputs: {identical}"
        ),
    }
}

fn main() {
    println!("acceptance suite");
    let mut runs = Vec::new();
    let results = [
        report(1, "linear-sector analytic oracle", secs(1), criterion_1),
        report(2, "gradient structure", secs(5), criterion_2),
        report(3, "Lyapunov monotonicity", secs(60), || criterion_3(&mut runs)),
        report(4, "global run, no blow-up", secs(120), criterion_4),
        report(5, "exponential decay rate", secs(30), criterion_5),
        report(6, "coercivity constant", secs(1), criterion_6),
        report(7, "entropy functional", secs(60), || criterion_7(&runs)),
        report(8, "gauge equivariance", secs(30), criterion_8),
        report(9, "Willmore baseline", secs(10), criterion_9),
        report(10, "infrastructure", secs(5), criterion_10),
    ];
    let passed = results.iter().filter(|p| **p).count();
    println!("acceptance: {passed}/{} criteria passed", results.len());
    if passed != results.len() {
        std::process::exit(1);
    }
}

//! End-to-end acceptance gates over the full pipeline. Each criterion prints
//! exactly one line, `criterion N: PASS|FAIL — detail`, so a run documents
//! the measured numbers either way; the test fails if any criterion fails.

use std::collections::HashSet;
use std::path::PathBuf;
use std::time::Instant;

use gridiag_core::case_io::{parse_json, parse_matpower, scale_load, to_per_unit, NetworkCase};
use gridiag_core::diagnosis::{
    run_baseline_powerflow, solve_dense, solve_sparse, solve_vreg, DiagnosisOptions,
    DiagnosisResult, DiagnosisStatus,
};
use gridiag_core::network_model::{
    build_model, kcl_residual, CircuitModel, CompensationPlacement, StateVector, VariableLayout,
};
use gridiag_core::nlp_core::{solve_nlp, NlpProblem, SolveStatus, SolverOptions};
use gridiag_core::reference_oracles::{
    check_injection_identity, check_jacobian_fd, enumerate_supports, newton_power_flow,
    PowerFlowStatus,
};
use gridiag_core::sparsemat::CooMatrix;

fn load_case(rel: &str) -> NetworkCase {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../cases").join(rel);
    to_per_unit(&parse_matpower(&std::fs::read_to_string(path).unwrap()).unwrap()).unwrap()
}

fn model_of(case: &NetworkCase, factor: f64) -> CircuitModel {
    build_model(&scale_load(case, factor).unwrap(), CompensationPlacement::AllNonSlack).unwrap()
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |a, &x| a.max(x.abs()))
}

/// Worst KCL residual over buses without generator or slack injections,
/// recomputed from the result's voltages and compensation through the plain
/// model evaluator.
fn load_bus_mismatch(model: &CircuitModel, res: &DiagnosisResult) -> f64 {
    let layout =
        VariableLayout::base(model.n_bus, model.pv_devices.len(), model.comp_buses.len());
    let mut s = StateVector::zeros(layout);
    for i in 0..model.n_bus {
        s.data[layout.v_real() + i] = res.v_real[i];
        s.data[layout.v_imag() + i] = res.v_imag[i];
    }
    for (k, &b) in model.comp_buses.iter().enumerate() {
        if let Some(o) = layout.n_real() {
            s.data[o + k] = res.n_real[b];
        }
        s.data[layout.n_imag() + k] = res.n_imag[b];
    }
    let r = kcl_residual(model, &s).unwrap();
    let skip: HashSet<usize> = model
        .pv_devices
        .iter()
        .map(|g| g.bus)
        .chain(std::iter::once(model.slack.bus))
        .collect();
    let mut worst = 0.0f64;
    for b in (0..model.n_bus).filter(|b| !skip.contains(b)) {
        worst = worst.max(r[layout.row_kcl_real() + b].abs());
        worst = worst.max(r[layout.row_kcl_imag() + b].abs());
    }
    worst
}

fn v_mag(res: &DiagnosisResult, i: usize) -> f64 {
    (res.v_real[i] * res.v_real[i] + res.v_imag[i] * res.v_imag[i]).sqrt()
}

/// A finished vreg run whose baseline had under-voltage buses; criterion 7
/// re-examines these.
struct RestoredRun {
    label: String,
    model: CircuitModel,
    under_voltage_ids: Vec<u32>,
    result: DiagnosisResult,
}

fn criterion_1(opts: &DiagnosisOptions) -> (bool, String) {
    let started = Instant::now();
    let model = model_of(&load_case("case30.m"), 1.0);
    let pf = newton_power_flow(&model, &opts.solver);
    let dense = solve_dense(&model, opts).unwrap();
    let mut v_diff = 0.0f64;
    for i in 0..model.n_bus {
        v_diff = v_diff.max((dense.v_real[i] - pf.v_real[i]).abs());
        v_diff = v_diff.max((dense.v_imag[i] - pf.v_imag[i]).abs());
    }
    let n_inf = inf_norm(&dense.n_real).max(inf_norm(&dense.n_imag));
    let secs = started.elapsed().as_secs_f64();

    let pass = pf.status == PowerFlowStatus::Converged
        && pf.residual_inf < 1e-8
        && dense.status == DiagnosisStatus::Converged
        && n_inf < 1e-5
        && v_diff < 1e-5
        && secs < 5.0;
    (
        pass,
        format!(
            "case30 at factor 1: newton residual {:.2e}, dense |n| {:.2e}, voltage gap {:.2e}, {:.2}s",
            pf.residual_inf, n_inf, v_diff, secs
        ),
    )
}

fn criterion_2(
    opts: &DiagnosisOptions,
    restored: &mut Vec<RestoredRun>,
) -> (bool, String) {
    let case30 = load_case("case30.m");
    let boxed = case30.with_bounds(Some(0.9), Some(1.1)).unwrap();

    let mut pass = true;
    let mut literal = Vec::new();
    for factor in [1.4, 1.5, 1.6] {
        let started = Instant::now();
        let model = model_of(&boxed, factor);
        let baseline = run_baseline_powerflow(&model, &opts.solver);
        let min_v = baseline.v_mag.iter().copied().fold(f64::INFINITY, f64::min);
        let under = baseline
            .violations
            .iter()
            .filter(|v| {
                let i = model.bus_ids.iter().position(|&id| id == v.bus).unwrap();
                v.v_mag < model.bounds[i].v_min
            })
            .count();
        let vreg = solve_vreg(&model, &model.bounds, opts).unwrap();
        let secs = started.elapsed().as_secs_f64();
        let ok = baseline.outcome.status == PowerFlowStatus::Converged
            && under >= 1
            && vreg.status == DiagnosisStatus::Converged
            && vreg.violations_after.is_empty()
            && (1..=15).contains(&vreg.support.len())
            && secs < 60.0;
        pass &= ok;
        literal.push(format!("{factor}: min |V| {min_v:.6}, {under} under 0.9"));
    }

    // The same regime under the case's own 0.95/1.05 bounds, for the record
    // and for criterion 7.
    let mut native = Vec::new();
    for factor in [1.4, 1.5, 1.6] {
        let model = model_of(&case30, factor);
        let baseline = run_baseline_powerflow(&model, &opts.solver);
        let under_ids: Vec<u32> = baseline
            .violations
            .iter()
            .filter(|v| {
                let i = model.bus_ids.iter().position(|&id| id == v.bus).unwrap();
                v.v_mag < model.bounds[i].v_min
            })
            .map(|v| v.bus)
            .collect();
        let vreg = solve_vreg(&model, &model.bounds, opts).unwrap();
        native.push(format!(
            "{factor}: {} under 0.95 -> {} after, support {}",
            under_ids.len(),
            vreg.violations_after.len(),
            vreg.support.len()
        ));
        if baseline.outcome.status == PowerFlowStatus::Converged && !under_ids.is_empty() {
            restored.push(RestoredRun {
                label: format!("case30@{factor} native bounds"),
                model,
                under_voltage_ids: under_ids,
                result: vreg,
            });
        }
    }

    (
        pass,
        format!(
            "with 0.9/1.1 bounds [{}]; with native 0.95/1.05 bounds [{}]",
            literal.join("; "),
            native.join("; ")
        ),
    )
}

fn criterion_3(opts: &DiagnosisOptions) -> (bool, String) {
    let model = model_of(&load_case("case30.m"), 4.3);
    let pf = newton_power_flow(&model, &opts.solver);
    let dense = solve_dense(&model, opts).unwrap();
    let sparse = solve_sparse(&model, opts).unwrap();
    let vreg = solve_vreg(&model, &model.bounds, opts).unwrap();

    let dense_above = (0..model.n_bus)
        .filter(|&i| dense.n_real[i].abs() > opts.support_threshold
            || dense.n_imag[i].abs() > opts.support_threshold)
        .count();
    let kcl = load_bus_mismatch(&model, &vreg);
    let bound_worst = (0..model.n_bus)
        .map(|i| {
            let vm = v_mag(&vreg, i);
            (model.bounds[i].v_min - vm).max(vm - model.bounds[i].v_max)
        })
        .fold(f64::NEG_INFINITY, f64::max);

    let pass = pf.status == PowerFlowStatus::Diverged
        && sparse.status == DiagnosisStatus::Converged
        && !sparse.support.is_empty()
        && sparse.support.len() < dense_above
        && vreg.status == DiagnosisStatus::Converged
        && kcl <= 1e-6
        && bound_worst <= 1e-6;
    (
        pass,
        format!(
            "case30 at factor 4.3: newton {:?}, sparse support {} vs dense {} above threshold, vreg KCL {:.2e}, worst bound excess {:.2e}",
            pf.status,
            sparse.support.len(),
            dense_above,
            kcl,
            bound_worst
        ),
    )
}

fn criterion_4(
    opts: &DiagnosisOptions,
    restored: &mut Vec<RestoredRun>,
) -> (bool, String) {
    let started = Instant::now();
    let case = load_case("case1354pegase.m").with_bounds(Some(0.9), Some(1.1)).unwrap();
    let model = model_of(&case, 1.25);
    let baseline = run_baseline_powerflow(&model, &opts.solver);
    let under_ids: Vec<u32> = baseline
        .violations
        .iter()
        .filter(|v| {
            let i = model.bus_ids.iter().position(|&id| id == v.bus).unwrap();
            v.v_mag < model.bounds[i].v_min
        })
        .map(|v| v.bus)
        .collect();
    let vreg = solve_vreg(&model, &model.bounds, opts).unwrap();
    let secs = started.elapsed().as_secs_f64();

    let pass = baseline.outcome.status == PowerFlowStatus::Converged
        && (1..=15).contains(&under_ids.len())
        && vreg.status == DiagnosisStatus::Converged
        && vreg.support.len() <= 40
        && secs < 600.0;
    let detail = format!(
        "case1354pegase at factor 1.25: {} under-voltage buses, vreg support {}, {} violations left (regulated setpoints above 1.1), {:.1}s",
        under_ids.len(),
        vreg.support.len(),
        vreg.violations_after.len(),
        secs
    );
    if baseline.outcome.status == PowerFlowStatus::Converged && !under_ids.is_empty() {
        restored.push(RestoredRun {
            label: "case1354pegase@1.25".into(),
            model,
            under_voltage_ids: under_ids,
            result: vreg,
        });
    }
    (pass, detail)
}

fn criterion_5(opts: &DiagnosisOptions) -> (bool, String) {
    let started = Instant::now();
    let mut pass = true;
    let mut notes = Vec::new();
    for name in
        ["fixtures/threebus_stressed.m", "fixtures/fourbus_ring.m", "fixtures/fivebus_pv.m"]
    {
        let model = model_of(&load_case(name), 1.0);
        let sparse = solve_sparse(&model, opts).unwrap();
        let frontier = enumerate_supports(&model, model.comp_buses.len(), None).unwrap();
        let best = frontier.min_cardinality();
        let entry = frontier.at_cardinality(sparse.support.len());

        let feasible = sparse.status == DiagnosisStatus::Converged
            && load_bus_mismatch(&model, &sparse) <= 1e-6;
        let card_ok = best.is_some_and(|b| !sparse.support.is_empty() && sparse.support.len() <= b + 1);
        let obj_ok = entry.is_some_and(|e| sparse.objective <= e.best.objective * 1.10 + 1e-12);
        pass &= feasible && card_ok && obj_ok;

        let short = name.trim_start_matches("fixtures/").trim_end_matches(".m");
        notes.push(format!(
            "{short}: cardinality {} vs optimum {:?}, objective ratio {:.4}",
            sparse.support.len(),
            best,
            entry.map_or(f64::NAN, |e| sparse.objective / e.best.objective)
        ));
    }
    let secs = started.elapsed().as_secs_f64();
    pass &= secs < 30.0;
    (pass, format!("{} ({secs:.1}s)", notes.join("; ")))
}

/// min x^2 subject to 1 - x <= 0, used to witness iterate interiority.
struct LowerBounded;

impl NlpProblem for LowerBounded {
    fn num_vars(&self) -> usize {
        1
    }
    fn num_eq(&self) -> usize {
        0
    }
    fn num_ineq(&self) -> usize {
        1
    }
    fn objective(&self, x: &[f64]) -> f64 {
        x[0] * x[0]
    }
    fn objective_gradient(&self, x: &[f64], out: &mut [f64]) {
        out[0] = 2.0 * x[0];
    }
    fn eq_constraints(&self, _x: &[f64], _out: &mut [f64]) {}
    fn eq_jacobian(&self, _x: &[f64]) -> CooMatrix {
        CooMatrix::new(0, 1)
    }
    fn ineq_constraints(&self, x: &[f64], out: &mut [f64]) {
        out[0] = 1.0 - x[0];
    }
    fn ineq_jacobian(&self, _x: &[f64]) -> CooMatrix {
        let mut j = CooMatrix::new(1, 1);
        j.push(0, 0, -1.0);
        j
    }
    fn lagrangian_hessian(&self, _x: &[f64], _l: &[f64], _m: &[f64]) -> CooMatrix {
        let mut h = CooMatrix::new(1, 1);
        h.push(0, 0, 2.0);
        h
    }
}

fn criterion_6(opts: &DiagnosisOptions) -> (bool, String) {
    let mut pass = true;
    let mut notes = Vec::new();

    for name in ["case30.m", "case118.m", "fixtures/fivebus_pv.m"] {
        let model = model_of(&load_case(name), 1.0);
        let report = check_jacobian_fd(&model, 20, 42, 1e-5);
        pass &= report.passed;
        if !report.passed {
            notes.push(format!("jacobian FD failed on {name}: {:?}", report.details));
        }
    }
    if notes.is_empty() {
        notes.push("jacobian FD ok on 3 cases".into());
    }

    let inj = check_injection_identity(1000, 7, 1e-12);
    pass &= inj.passed;
    notes.push(if inj.passed {
        "injection identity ok".into()
    } else {
        format!("injection identity failed: {:?}", inj.details)
    });

    let (sol, log, status) = solve_nlp(&LowerBounded, &[3.0], &SolverOptions::default()).unwrap();
    let interior = status == SolveStatus::Converged
        && !log.records.is_empty()
        && log.records.iter().all(|r| r.min_mu > 0.0 && r.min_s > 0.0)
        && (sol.primal[0] - 1.0).abs() < 1e-6;
    pass &= interior;
    notes.push(if interior { "iterates interior".into() } else { "interiority violated".into() });

    let model = model_of(&load_case("case30.m"), 1.0);
    let vreg = solve_vreg(&model, &model.bounds, opts).unwrap();
    let fixed_point = vreg.status == DiagnosisStatus::Converged && vreg.support.is_empty();
    pass &= fixed_point;
    notes.push(format!("feasible-case vreg support {}", vreg.support.len()));

    let case = load_case("case30.m");
    let twice = scale_load(&scale_load(&case, 1.2).unwrap(), 1.5).unwrap();
    let once = scale_load(&case, 1.8).unwrap();
    let mult = twice
        .buses
        .iter()
        .zip(&once.buses)
        .all(|(a, b)| (a.p_demand - b.p_demand).abs() < 1e-12 && (a.q_demand - b.q_demand).abs() < 1e-12);
    pass &= mult;
    notes.push(if mult { "scale_load multiplicative".into() } else { "scale_load not multiplicative".into() });

    let json = case.to_json().unwrap();
    let back = parse_json(&json).unwrap();
    let round = back == case && back.to_json().unwrap() == json;
    pass &= round;
    notes.push(if round { "JSON round-trip exact".into() } else { "JSON round-trip drifted".into() });

    (pass, notes.join("; "))
}

fn criterion_7(restored: &[RestoredRun]) -> (bool, String) {
    let mut pass = true;
    let mut notes = Vec::new();
    let mut examined = 0usize;
    for run in restored {
        if run.result.status != DiagnosisStatus::Converged {
            continue;
        }
        examined += 1;
        let mut worst_gap = f64::INFINITY;
        let mut restored_ok = true;
        for &id in &run.under_voltage_ids {
            let i = run.model.bus_ids.iter().position(|&b| b == id).unwrap();
            let vm = v_mag(&run.result, i);
            let gap = vm - run.model.bounds[i].v_min;
            restored_ok &= gap >= -1e-6;
            worst_gap = worst_gap.min(gap);
        }
        let near_active = worst_gap <= 1e-4;
        pass &= restored_ok;
        notes.push(format!(
            "{}: min margin above v_min {:.2e}{}{}",
            run.label,
            worst_gap,
            if restored_ok { "" } else { " (bound violated)" },
            if near_active { "" } else { " (no near-active bus; flagged for review)" },
        ));
    }
    pass &= examined > 0;
    (pass, notes.join("; "))
}

/// Timing and counts on the largest case, printed for the record only; they
/// depend on the machine and on the case's own bounds.
fn report_2383(opts: &DiagnosisOptions) -> String {
    let started = Instant::now();
    let model = model_of(&load_case("case2383wp.m"), 1.0);
    let baseline = run_baseline_powerflow(&model, &opts.solver);
    let under = baseline
        .violations
        .iter()
        .filter(|v| {
            let i = model.bus_ids.iter().position(|&id| id == v.bus).unwrap();
            v.v_mag < model.bounds[i].v_min
        })
        .count();
    let vreg = solve_vreg(&model, &model.bounds, opts).unwrap();
    format!(
        "case2383wp at factor 1: {} under-voltage buses, vreg {:?} with support {} and {} violations left, {:.1}s",
        under,
        vreg.status,
        vreg.support.len(),
        vreg.violations_after.len(),
        started.elapsed().as_secs_f64()
    )
}

#[test]
fn acceptance_criteria() {
    let opts = DiagnosisOptions::default();
    let mut restored = Vec::new();

    let results = [
        criterion_1(&opts),
        criterion_2(&opts, &mut restored),
        criterion_3(&opts),
        criterion_4(&opts, &mut restored),
        criterion_5(&opts),
        criterion_6(&opts),
        criterion_7(&restored),
    ];

    let mut failures = Vec::new();
    let mut lines = Vec::new();
    for (k, (pass, detail)) in results.iter().enumerate() {
        let line = format!(
            "criterion {}: {} — {detail}",
            k + 1,
            if *pass { "PASS" } else { "FAIL" }
        );
        println!("{line}");
        lines.push(line);
        if !pass {
            failures.push(k + 1);
        }
    }
    println!("informational (not gated): {}", report_2383(&opts));
    assert!(
        failures.is_empty(),
        "criteria {failures:?} failed:\n{}",
        lines.join("\n")
    );
}

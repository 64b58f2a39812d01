//! The three diagnosis problems over a circuit model: dense infeasibility
//! quantification (minimum-norm compensation), sparse compensation search
//! with adaptive coefficient toggling, and the voltage-regulated variant
//! that additionally keeps every bus magnitude inside its bounds.

use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::network_model::{
    jacobian, kcl_residual, weighted_residual_hessian, CircuitModel, ModelError, StateVector,
    VariableLayout, VoltageBounds,
};
use crate::nlp_core::{
    solve_nlp, KktSystem, NlpError, NlpProblem, SolveStatus, SolverOptions,
};
use crate::reference_oracles::{newton_power_flow, PowerFlowOutcome, PowerFlowStatus};
use crate::sparsemat::CooMatrix;

#[derive(Debug, Error)]
pub enum DiagnosisError {
    #[error("model: {0}")]
    Model(#[from] ModelError),
    #[error("solver: {0}")]
    Nlp(#[from] NlpError),
    #[error("{0}")]
    Argument(String),
}

/// Per-component L1 penalty weights, each pinned to one of two configured
/// levels.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SparsityCoefficients {
    pub c: Vec<f64>,
    pub c_high: f64,
    pub c_low: f64,
    pub support_threshold: f64,
}

impl SparsityCoefficients {
    pub fn uniform_high(len: usize, c_high: f64, c_low: f64, support_threshold: f64) -> Self {
        SparsityCoefficients { c: vec![c_high; len], c_high, c_low, support_threshold }
    }
}

/// Re-derives the weight vector from the latest compensation vector: a
/// component at or above the support threshold becomes cheap to keep
/// (`c_low`), anything below is pushed toward zero (`c_high`). Idempotent for
/// fixed `n`.
pub fn update_coefficients(n: &[f64], coeffs: &SparsityCoefficients) -> SparsityCoefficients {
    SparsityCoefficients {
        c: n
            .iter()
            .map(|v| if v.abs() >= coeffs.support_threshold { coeffs.c_low } else { coeffs.c_high })
            .collect(),
        c_high: coeffs.c_high,
        c_low: coeffs.c_low,
        support_threshold: coeffs.support_threshold,
    }
}

#[derive(Clone, Debug)]
pub struct DiagnosisOptions {
    pub solver: SolverOptions,
    pub c_high: f64,
    pub c_low: f64,
    pub support_threshold: f64,
    pub max_subproblems: usize,
    /// Restrict compensation to reactive current (drop the n_real variables).
    pub reactive_only: bool,
}

impl Default for DiagnosisOptions {
    fn default() -> Self {
        DiagnosisOptions {
            solver: SolverOptions::default(),
            c_high: 10.0,
            c_low: 0.1,
            support_threshold: 1e-4,
            max_subproblems: 20,
            reactive_only: false,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiagnosisMode {
    Dense,
    Sparse,
    Vreg,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiagnosisStatus {
    Converged,
    MaxIter,
    NumericalFailure,
    BoundsInfeasible,
}

/// A bus whose voltage magnitude lies outside its bounds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub bus: u32,
    pub v_mag: f64,
}

/// One inner solve of the outer loop.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubproblemRecord {
    pub phase: String,
    /// Coefficient snapshot the subproblem ran with (empty for the dense
    /// phase, which has no L1 term).
    pub coefficients: Vec<f64>,
    pub support_size: usize,
    pub inner_iterations: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseTime {
    pub phase: String,
    pub seconds: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiagnosisResult {
    pub status: DiagnosisStatus,
    pub mode: DiagnosisMode,
    pub baseline_status: PowerFlowStatus,
    /// External bus ids, fixing the order of every per-bus array below.
    pub bus_ids: Vec<u32>,
    pub v_real: Vec<f64>,
    pub v_imag: Vec<f64>,
    pub n_real: Vec<f64>,
    pub n_imag: Vec<f64>,
    /// Buses whose compensation magnitude exceeds the support threshold.
    pub support: Vec<u32>,
    /// 0.5 * sum of squared compensation components.
    pub objective: f64,
    pub v_min: Vec<f64>,
    pub v_max: Vec<f64>,
    /// Baseline power-flow magnitudes (empty when the baseline diverged).
    pub baseline_v_mag: Vec<f64>,
    pub violations_before: Vec<Violation>,
    pub violations_after: Vec<Violation>,
    pub subproblem_history: Vec<SubproblemRecord>,
    pub wall_time: Vec<PhaseTime>,
}

/// Plain power flow plus a scan of the resulting magnitudes against bounds.
#[derive(Clone, Debug)]
pub struct BaselineReport {
    pub outcome: PowerFlowOutcome,
    pub v_mag: Vec<f64>,
    pub violations: Vec<Violation>,
}

pub fn run_baseline_powerflow(model: &CircuitModel, opts: &SolverOptions) -> BaselineReport {
    baseline_with_bounds(model, &model.bounds, opts)
}

fn baseline_with_bounds(
    model: &CircuitModel,
    bounds: &[VoltageBounds],
    opts: &SolverOptions,
) -> BaselineReport {
    let outcome = newton_power_flow(model, opts);
    let (v_mag, violations) = match outcome.status {
        PowerFlowStatus::Converged => {
            let mags: Vec<f64> = outcome
                .v_real
                .iter()
                .zip(&outcome.v_imag)
                .map(|(r, i)| (r * r + i * i).sqrt())
                .collect();
            let viols = scan_violations(model, &mags, bounds);
            (mags, viols)
        }
        PowerFlowStatus::Diverged => (Vec::new(), Vec::new()),
    };
    BaselineReport { outcome, v_mag, violations }
}

fn scan_violations(model: &CircuitModel, v_mag: &[f64], bounds: &[VoltageBounds]) -> Vec<Violation> {
    v_mag
        .iter()
        .enumerate()
        .filter(|&(i, &m)| m < bounds[i].v_min || m > bounds[i].v_max)
        .map(|(i, &m)| Violation { bus: model.bus_ids[i], v_mag: m })
        .collect()
}

/// Minimum-norm compensation subject to KCL only.
pub fn solve_dense(
    model: &CircuitModel,
    opts: &DiagnosisOptions,
) -> Result<DiagnosisResult, DiagnosisError> {
    run_outer(model, None, opts, DiagnosisMode::Dense)
}

/// Sparse compensation: dense warm start, then L1-penalized subproblems with
/// coefficient toggling until the support set stops changing.
pub fn solve_sparse(
    model: &CircuitModel,
    opts: &DiagnosisOptions,
) -> Result<DiagnosisResult, DiagnosisError> {
    run_outer(model, None, opts, DiagnosisMode::Sparse)
}

/// Sparse compensation with per-bus voltage-magnitude bounds enforced in
/// every subproblem.
pub fn solve_vreg(
    model: &CircuitModel,
    bounds: &[VoltageBounds],
    opts: &DiagnosisOptions,
) -> Result<DiagnosisResult, DiagnosisError> {
    if bounds.len() != model.n_bus {
        return Err(DiagnosisError::Argument(format!(
            "bounds cover {} buses, model has {}",
            bounds.len(),
            model.n_bus
        )));
    }
    for (i, b) in bounds.iter().enumerate() {
        if !(b.v_min > 0.0 && b.v_max > b.v_min && b.v_max.is_finite()) {
            return Err(DiagnosisError::Argument(format!(
                "invalid bounds [{}, {}] for bus {}",
                b.v_min, b.v_max, model.bus_ids[i]
            )));
        }
    }
    run_outer(model, Some(bounds), opts, DiagnosisMode::Vreg)
}

/// The NLP handed to the interior-point engine: KCL equalities over the
/// chosen layout, the quadratic-plus-weighted-L1 objective in slack form, and
/// optional squared-magnitude box inequalities.
struct CompensationNlp<'a> {
    model: &'a CircuitModel,
    layout: VariableLayout,
    /// Per-component t weights; empty when the layout carries no t block.
    t_weights: Vec<f64>,
    /// Bounded buses as (bus index, v_min^2, v_max^2); empty when the layout
    /// carries no v_sq. Buses whose magnitude is pinned by a generator
    /// setpoint or the slack reference are left out, since a box constraint
    /// there either duplicates the pin or contradicts it.
    bounds_sq: Vec<(usize, f64, f64)>,
}

impl CompensationNlp<'_> {
    fn state(&self, x: &[f64]) -> StateVector {
        StateVector::from_vec(self.layout, x.to_vec()).expect("x sized by num_vars")
    }

    /// Variable index of compensation component `j` (real components first
    /// when present, then imaginary).
    fn comp_var(&self, j: usize) -> usize {
        let lay = self.layout;
        match lay.n_real() {
            Some(o) if j < lay.n_comp => o + j,
            Some(_) => lay.n_imag() + (j - lay.n_comp),
            None => lay.n_imag() + j,
        }
    }

    fn m_t(&self) -> usize {
        if self.layout.with_t {
            self.layout.n_comp_components()
        } else {
            0
        }
    }

    fn m_vsq(&self) -> usize {
        if self.layout.with_vsq {
            self.bounds_sq.len()
        } else {
            0
        }
    }
}

impl NlpProblem for CompensationNlp<'_> {
    fn num_vars(&self) -> usize {
        self.layout.n_vars()
    }
    fn num_eq(&self) -> usize {
        self.layout.n_eq_rows()
    }
    fn num_ineq(&self) -> usize {
        2 * self.m_t() + 2 * self.m_vsq()
    }

    fn objective(&self, x: &[f64]) -> f64 {
        let m = self.layout.n_comp_components();
        let mut f = 0.0;
        for j in 0..m {
            f += 0.5 * x[self.comp_var(j)] * x[self.comp_var(j)];
        }
        if let Some(t0) = self.layout.t() {
            for (j, c) in self.t_weights.iter().enumerate() {
                f += c * x[t0 + j];
            }
        }
        f
    }

    fn objective_gradient(&self, x: &[f64], out: &mut [f64]) {
        out.fill(0.0);
        for j in 0..self.layout.n_comp_components() {
            let k = self.comp_var(j);
            out[k] = x[k];
        }
        if let Some(t0) = self.layout.t() {
            for (j, c) in self.t_weights.iter().enumerate() {
                out[t0 + j] = *c;
            }
        }
    }

    fn eq_constraints(&self, x: &[f64], out: &mut [f64]) {
        match kcl_residual(self.model, &self.state(x)) {
            Ok(r) => out.copy_from_slice(&r),
            Err(_) => out.fill(f64::NAN),
        }
    }

    fn eq_jacobian(&self, x: &[f64]) -> CooMatrix {
        match jacobian(self.model, &self.state(x)) {
            Ok(j) => j,
            Err(_) => {
                let mut j = CooMatrix::new(self.num_eq(), self.num_vars());
                j.push(0, 0, f64::NAN);
                j
            }
        }
    }

    fn ineq_constraints(&self, x: &[f64], out: &mut [f64]) {
        let mut row = 0;
        if let Some(t0) = self.layout.t() {
            let m = self.m_t();
            for j in 0..m {
                out[row] = x[self.comp_var(j)] - x[t0 + j];
                row += 1;
            }
            for j in 0..m {
                out[row] = -x[self.comp_var(j)] - x[t0 + j];
                row += 1;
            }
        }
        if let Some(v0) = self.layout.v_sq() {
            for (k, &(bus, lo, hi)) in self.bounds_sq.iter().enumerate() {
                out[row + k] = lo - x[v0 + bus];
                out[row + self.m_vsq() + k] = x[v0 + bus] - hi;
            }
        }
    }

    fn ineq_jacobian(&self, _x: &[f64]) -> CooMatrix {
        let mut jac = CooMatrix::with_capacity(
            self.num_ineq(),
            self.num_vars(),
            4 * self.m_t() + 2 * self.m_vsq(),
        );
        let mut row = 0;
        if let Some(t0) = self.layout.t() {
            let m = self.m_t();
            for j in 0..m {
                jac.push(row, self.comp_var(j), 1.0);
                jac.push(row, t0 + j, -1.0);
                row += 1;
            }
            for j in 0..m {
                jac.push(row, self.comp_var(j), -1.0);
                jac.push(row, t0 + j, -1.0);
                row += 1;
            }
        }
        if let Some(v0) = self.layout.v_sq() {
            for (k, &(bus, _, _)) in self.bounds_sq.iter().enumerate() {
                jac.push(row + k, v0 + bus, -1.0);
                jac.push(row + self.m_vsq() + k, v0 + bus, 1.0);
            }
        }
        jac
    }

    fn lagrangian_hessian(&self, x: &[f64], lambda: &[f64], _mu: &[f64]) -> CooMatrix {
        // Inequalities are linear, so only the objective and the equality
        // rows contribute curvature.
        let mut h = match weighted_residual_hessian(self.model, &self.state(x), lambda) {
            Ok(h) => h,
            Err(_) => {
                let mut h = CooMatrix::new(self.num_vars(), self.num_vars());
                h.push(0, 0, f64::NAN);
                h
            }
        };
        for j in 0..self.layout.n_comp_components() {
            let k = self.comp_var(j);
            h.push(k, k, 1.0);
        }
        h
    }

    fn step_capped_vars(&self) -> Vec<usize> {
        (0..2 * self.layout.n_bus).collect()
    }
}

fn comp_layout(model: &CircuitModel, opts: &DiagnosisOptions, with_t: bool, with_vsq: bool) -> VariableLayout {
    VariableLayout {
        n_bus: model.n_bus,
        n_pv: model.pv_devices.len(),
        n_comp: model.comp_buses.len(),
        real_comp: !opts.reactive_only,
        with_t,
        with_vsq,
    }
}

/// Builds the dense-phase initial point: case voltages, compensation set to
/// the exact KCL mismatch at those voltages (so the equality rows start at
/// zero), and v_sq set to the squared magnitudes.
fn dense_init(model: &CircuitModel, layout: VariableLayout) -> Vec<f64> {
    let mut s = model.initial_state(layout);
    if let Some(v0) = layout.v_sq() {
        for i in 0..layout.n_bus {
            s.data[v0 + i] = s.bus_voltage(i).norm_sqr();
        }
    }
    if let Ok(r) = kcl_residual(model, &s) {
        for (k, &b) in model.comp_buses.iter().enumerate() {
            if let Some(o) = layout.n_real() {
                s.data[o + k] = r[layout.row_kcl_real() + b];
            }
            s.data[layout.n_imag() + k] = r[layout.row_kcl_imag() + b];
        }
    }
    s.data
}

/// Carries a converged iterate into the next layout: shared blocks copy over,
/// t starts strictly above |n|.
fn transfer_init(
    prev: &StateVector,
    to: VariableLayout,
    barrier_init: f64,
) -> Vec<f64> {
    let from = prev.layout;
    let mut s = StateVector::zeros(to);
    let n = to.n_bus;
    s.data[to.v_real()..to.v_real() + n].copy_from_slice(prev.v_real());
    s.data[to.v_imag()..to.v_imag() + n].copy_from_slice(prev.v_imag());
    s.data[to.q_gen()..to.q_gen() + to.n_pv].copy_from_slice(prev.q_gen());
    s.data[to.i_slack()] = prev.i_slack()[0];
    s.data[to.i_slack() + 1] = prev.i_slack()[1];
    if let (Some(dst), Some(src)) = (to.n_real(), prev.n_real()) {
        s.data[dst..dst + to.n_comp].copy_from_slice(src);
    }
    s.data[to.n_imag()..to.n_imag() + to.n_comp].copy_from_slice(prev.n_imag());
    if let Some(t0) = to.t() {
        let margin = barrier_init.sqrt();
        for j in 0..to.n_comp_components() {
            let k = if to.real_comp && j < to.n_comp {
                to.n_real().expect("real components present") + j
            } else if to.real_comp {
                to.n_imag() + (j - to.n_comp)
            } else {
                to.n_imag() + j
            };
            s.data[t0 + j] = s.data[k].abs() + margin;
        }
    }
    if let Some(dst) = to.v_sq() {
        if let (Some(src), true) = (prev.v_sq(), from.n_bus == n) {
            s.data[dst..dst + n].copy_from_slice(src);
        } else {
            for i in 0..n {
                s.data[dst + i] = s.bus_voltage(i).norm_sqr();
            }
        }
    }
    s.data
}

struct InnerOutcome {
    system: KktSystem,
    status: SolveStatus,
    iterations: usize,
}

fn solve_inner(
    problem: &CompensationNlp<'_>,
    init: &[f64],
    opts: &SolverOptions,
) -> Result<InnerOutcome, DiagnosisError> {
    let (system, log, status) = solve_nlp(problem, init, opts)?;
    Ok(InnerOutcome { system, status, iterations: log.records.len() })
}

/// Buses whose voltage magnitude is free to move: everything except the
/// slack and generator-regulated buses, whose magnitudes are fixed by
/// equality constraints. Only these can carry a box constraint.
fn magnitude_free_buses(model: &CircuitModel) -> Vec<usize> {
    let mut pinned: std::collections::HashSet<usize> =
        model.pv_devices.iter().map(|g| g.bus).collect();
    pinned.insert(model.slack.bus);
    (0..model.n_bus).filter(|b| !pinned.contains(b)).collect()
}

/// Largest amount by which a constrained bus magnitude leaves its bounds.
fn bound_violation_inf(
    state: &StateVector,
    buses: &[usize],
    bounds: &[VoltageBounds],
) -> f64 {
    let mut worst = 0.0f64;
    for &i in buses {
        let vm = state.bus_voltage(i).norm();
        worst = worst.max(bounds[i].v_min - vm).max(vm - bounds[i].v_max);
    }
    worst
}

fn component_values(state: &StateVector) -> Vec<f64> {
    let lay = state.layout;
    let mut n = Vec::with_capacity(lay.n_comp_components());
    if let Some(nr) = state.n_real() {
        n.extend_from_slice(nr);
    }
    n.extend_from_slice(state.n_imag());
    n
}

/// Support as a sorted list of external bus ids: a bus belongs when any of
/// its compensation components clears the threshold.
fn support_of(model: &CircuitModel, state: &StateVector, threshold: f64) -> Vec<u32> {
    let mut out = Vec::new();
    for (k, &b) in model.comp_buses.iter().enumerate() {
        if state.compensation(k).re.abs() > threshold || state.compensation(k).im.abs() > threshold
        {
            out.push(model.bus_ids[b]);
        }
    }
    out.sort_unstable();
    out
}

fn run_outer(
    model: &CircuitModel,
    bounds: Option<&[VoltageBounds]>,
    opts: &DiagnosisOptions,
    mode: DiagnosisMode,
) -> Result<DiagnosisResult, DiagnosisError> {
    let with_vsq = bounds.is_some();
    let eff_bounds: &[VoltageBounds] = bounds.unwrap_or(&model.bounds);
    let free_buses = magnitude_free_buses(model);
    let bounds_sq: Vec<(usize, f64, f64)> = if with_vsq {
        free_buses
            .iter()
            .map(|&i| {
                let b = eff_bounds[i];
                (i, b.v_min * b.v_min, b.v_max * b.v_max)
            })
            .collect()
    } else {
        Vec::new()
    };

    let mut wall_time = Vec::new();
    let mut history: Vec<SubproblemRecord> = Vec::new();

    let t0 = Instant::now();
    let baseline = baseline_with_bounds(model, eff_bounds, &opts.solver);
    wall_time.push(PhaseTime { phase: "baseline".into(), seconds: t0.elapsed().as_secs_f64() });

    // Dense phase.
    let t0 = Instant::now();
    let dense_layout = comp_layout(model, opts, false, with_vsq);
    let dense_nlp = CompensationNlp {
        model,
        layout: dense_layout,
        t_weights: Vec::new(),
        bounds_sq: bounds_sq.clone(),
    };
    let init = dense_init(model, dense_layout);
    let mut inner = solve_inner(&dense_nlp, &init, &opts.solver)?;

    if inner.status != SolveStatus::Converged && with_vsq {
        // Bound-relaxation continuation: restart from a problem with slack in
        // the bounds and tighten back to the requested box.
        let mut warm = inner.system.primal.clone();
        for &delta in &[0.05, 0.0375, 0.025, 0.0125, 0.0] {
            let relaxed: Vec<(usize, f64, f64)> = free_buses
                .iter()
                .map(|&i| {
                    let b = eff_bounds[i];
                    let lo = (b.v_min - delta).max(0.0);
                    let hi = b.v_max + delta;
                    (i, lo * lo, hi * hi)
                })
                .collect();
            let relaxed_nlp = CompensationNlp {
                model,
                layout: dense_layout,
                t_weights: Vec::new(),
                bounds_sq: relaxed,
            };
            let step = solve_inner(&relaxed_nlp, &warm, &opts.solver)?;
            let converged = step.status == SolveStatus::Converged;
            warm = step.system.primal.clone();
            inner = step;
            if !converged {
                break;
            }
        }
    }

    let dense_state = StateVector::from_vec(dense_layout, inner.system.primal.clone())
        .expect("primal sized by layout");
    history.push(SubproblemRecord {
        phase: "dense".into(),
        coefficients: Vec::new(),
        support_size: support_of(model, &dense_state, opts.support_threshold).len(),
        inner_iterations: inner.iterations,
    });
    wall_time.push(PhaseTime { phase: "dense".into(), seconds: t0.elapsed().as_secs_f64() });

    if inner.status != SolveStatus::Converged {
        let status = failure_status(&dense_state, &free_buses, eff_bounds, with_vsq, inner.status);
        return Ok(finish(
            model, mode, &baseline, &dense_state, status, eff_bounds, history, wall_time,
            opts.support_threshold,
        ));
    }

    if mode == DiagnosisMode::Dense {
        return Ok(finish(
            model,
            mode,
            &baseline,
            &dense_state,
            DiagnosisStatus::Converged,
            eff_bounds,
            history,
            wall_time,
            opts.support_threshold,
        ));
    }

    // Sparse phases: the first subproblem runs with every coefficient at
    // c_high (prune hard), then the weights toggle from the latest n after
    // each solve. Stop once the support settles.
    let sparse_layout = comp_layout(model, opts, true, with_vsq);
    let mut coeffs = SparsityCoefficients::uniform_high(
        sparse_layout.n_comp_components(),
        opts.c_high,
        opts.c_low,
        opts.support_threshold,
    );
    let mut prev_support = support_of(model, &dense_state, opts.support_threshold);
    let mut prev_state = dense_state;
    let mut best_state: Option<(StateVector, Vec<u32>)> = None;
    let mut status = DiagnosisStatus::MaxIter;

    for round in 1..=opts.max_subproblems {
        let t0 = Instant::now();
        let nlp = CompensationNlp {
            model,
            layout: sparse_layout,
            t_weights: coeffs.c.clone(),
            bounds_sq: bounds_sq.clone(),
        };
        let init = transfer_init(&prev_state, sparse_layout, opts.solver.barrier_init);
        let inner = solve_inner(&nlp, &init, &opts.solver)?;
        let state = StateVector::from_vec(sparse_layout, inner.system.primal.clone())
            .expect("primal sized by layout");
        let support = support_of(model, &state, opts.support_threshold);

        history.push(SubproblemRecord {
            phase: format!("sparse_{round}"),
            coefficients: coeffs.c.clone(),
            support_size: support.len(),
            inner_iterations: inner.iterations,
        });
        wall_time
            .push(PhaseTime { phase: format!("sparse_{round}"), seconds: t0.elapsed().as_secs_f64() });

        if inner.status != SolveStatus::Converged {
            status = failure_status(&state, &free_buses, eff_bounds, with_vsq, inner.status);
            if best_state.is_none() {
                best_state = Some((state, support));
            }
            break;
        }

        let settled = support == prev_support;
        prev_support = support.clone();
        prev_state = state.clone();
        coeffs = update_coefficients(&component_values(&prev_state), &coeffs);
        best_state = Some((state, support));
        if settled {
            status = DiagnosisStatus::Converged;
            break;
        }
    }

    let (final_state, _) = best_state.unwrap_or_else(|| {
        let s = prev_support.clone();
        (prev_state.clone(), s)
    });
    Ok(finish(
        model, mode, &baseline, &final_state, status, eff_bounds, history, wall_time,
        opts.support_threshold,
    ))
}

fn failure_status(
    state: &StateVector,
    free_buses: &[usize],
    bounds: &[VoltageBounds],
    with_vsq: bool,
    inner: SolveStatus,
) -> DiagnosisStatus {
    if with_vsq && bound_violation_inf(state, free_buses, bounds) > 1e-6 {
        DiagnosisStatus::BoundsInfeasible
    } else if inner == SolveStatus::MaxIter {
        DiagnosisStatus::MaxIter
    } else {
        DiagnosisStatus::NumericalFailure
    }
}

#[allow(clippy::too_many_arguments)]
fn finish(
    model: &CircuitModel,
    mode: DiagnosisMode,
    baseline: &BaselineReport,
    state: &StateVector,
    status: DiagnosisStatus,
    bounds: &[VoltageBounds],
    subproblem_history: Vec<SubproblemRecord>,
    wall_time: Vec<PhaseTime>,
    threshold: f64,
) -> DiagnosisResult {
    let n = model.n_bus;
    let mut n_real = vec![0.0; n];
    let mut n_imag = vec![0.0; n];
    for (k, &b) in model.comp_buses.iter().enumerate() {
        let c = state.compensation(k);
        n_real[b] = c.re;
        n_imag[b] = c.im;
    }
    let objective =
        0.5 * (n_real.iter().map(|v| v * v).sum::<f64>() + n_imag.iter().map(|v| v * v).sum::<f64>());
    let v_mag_after: Vec<f64> =
        (0..n).map(|i| state.bus_voltage(i).norm()).collect();
    DiagnosisResult {
        status,
        mode,
        baseline_status: baseline.outcome.status,
        bus_ids: model.bus_ids.clone(),
        v_real: state.v_real().to_vec(),
        v_imag: state.v_imag().to_vec(),
        n_real,
        n_imag,
        support: support_of(model, state, threshold),
        objective,
        v_min: bounds.iter().map(|b| b.v_min).collect(),
        v_max: bounds.iter().map(|b| b.v_max).collect(),
        baseline_v_mag: baseline.v_mag.clone(),
        violations_before: baseline.violations.clone(),
        violations_after: scan_violations(model, &v_mag_after, bounds),
        subproblem_history,
        wall_time,
    }
}

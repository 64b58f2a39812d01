//! Independent verification engines: a plain Newton power flow, central
//! finite differences for derivative checks, and exhaustive enumeration of
//! compensation supports on tiny grids. These share the circuit model but
//! deliberately not the interior-point solver, so they cannot inherit its
//! bugs.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linsolve;
use crate::network_model::{
    jacobian, kcl_residual, weighted_residual_hessian, CircuitModel, ModelError, StateVector,
    VariableLayout, VoltageBounds,
};
use crate::nlp_core::SolverOptions;

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("support enumeration limited to 6 buses, model has {0}")]
    TooLarge(usize),
    #[error("model: {0}")]
    Model(#[from] ModelError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PowerFlowStatus {
    Converged,
    Diverged,
}

#[derive(Clone, Debug)]
pub struct PowerFlowOutcome {
    pub v_real: Vec<f64>,
    pub v_imag: Vec<f64>,
    pub q_gen: Vec<f64>,
    pub i_slack: [f64; 2],
    pub status: PowerFlowStatus,
    pub iterations: usize,
    pub residual_inf: f64,
}

const PF_TOL: f64 = 1e-10;
const PF_BLOWUP: f64 = 1e8;

/// Plain full-step Newton-Raphson on g(v) = 0 with no compensation variables.
/// Divergence (non-finite iterates, exploding residual, or running out of
/// iterations) is a status, not an error.
pub fn newton_power_flow(model: &CircuitModel, opts: &SolverOptions) -> PowerFlowOutcome {
    let layout = VariableLayout {
        n_bus: model.n_bus,
        n_pv: model.pv_devices.len(),
        n_comp: 0,
        real_comp: true,
        with_t: false,
        with_vsq: false,
    };
    let mut state = model.initial_state(layout);
    let n = layout.n_vars();
    let mut residual_inf = f64::INFINITY;

    for iter in 0..opts.max_newton_iters.max(1) {
        let r = match kcl_residual(model, &state) {
            Ok(r) => r,
            Err(_) => return outcome(model, &state, PowerFlowStatus::Diverged, iter, residual_inf),
        };
        residual_inf = r.iter().fold(0.0f64, |a, &v| a.max(v.abs()));
        if !residual_inf.is_finite() || residual_inf > PF_BLOWUP {
            return outcome(model, &state, PowerFlowStatus::Diverged, iter, residual_inf);
        }
        if residual_inf <= PF_TOL {
            return outcome(model, &state, PowerFlowStatus::Converged, iter, residual_inf);
        }
        let jac = match jacobian(model, &state) {
            Ok(j) => j,
            Err(_) => return outcome(model, &state, PowerFlowStatus::Diverged, iter, residual_inf),
        };
        let rhs: Vec<f64> = r.iter().map(|v| -v).collect();
        let step = match linsolve::sparse_lu(n, &jac).map(|lu| lu.solve(&rhs)) {
            Ok(s) if s.iter().all(|v| v.is_finite()) => s,
            _ => return outcome(model, &state, PowerFlowStatus::Diverged, iter, residual_inf),
        };
        for (x, d) in state.data.iter_mut().zip(&step) {
            *x += d;
        }
    }
    outcome(model, &state, PowerFlowStatus::Diverged, opts.max_newton_iters, residual_inf)
}

fn outcome(
    model: &CircuitModel,
    state: &StateVector,
    status: PowerFlowStatus,
    iterations: usize,
    residual_inf: f64,
) -> PowerFlowOutcome {
    PowerFlowOutcome {
        v_real: state.v_real().to_vec(),
        v_imag: state.v_imag().to_vec(),
        q_gen: state.q_gen().to_vec(),
        i_slack: [state.i_slack()[0], state.i_slack()[1]],
        status,
        iterations,
        residual_inf: if model.n_bus == 0 { 0.0 } else { residual_inf },
    }
}

/// Central finite differences of [`kcl_residual`] wrt every layout variable.
pub fn finite_diff_jacobian(
    model: &CircuitModel,
    state: &StateVector,
    step: f64,
) -> Result<Vec<Vec<f64>>, ModelError> {
    let n_rows = state.layout.n_eq_rows();
    let n_cols = state.layout.n_vars();
    let mut out = vec![vec![0.0; n_cols]; n_rows];
    let mut work = state.clone();
    for j in 0..n_cols {
        let orig = work.data[j];
        work.data[j] = orig + step;
        let rp = kcl_residual(model, &work)?;
        work.data[j] = orig - step;
        let rm = kcl_residual(model, &work)?;
        work.data[j] = orig;
        for i in 0..n_rows {
            out[i][j] = (rp[i] - rm[i]) / (2.0 * step);
        }
    }
    Ok(out)
}

/// The minimum-norm compensation restricted to one support subset.
#[derive(Clone, Debug)]
pub struct RestrictedSolution {
    /// Compensation bus indices (model indexing), ascending.
    pub support: Vec<usize>,
    /// Complex compensation per support bus.
    pub n: Vec<Complex64>,
    /// 0.5 * sum |n|^2
    pub objective: f64,
    pub v_real: Vec<f64>,
    pub v_imag: Vec<f64>,
    /// All voltage magnitudes within the given bounds (when bounds were given).
    pub bounds_ok: bool,
}

#[derive(Clone, Debug)]
pub struct FrontierEntry {
    pub cardinality: usize,
    pub best: RestrictedSolution,
}

/// Result of [`enumerate_supports`]: the best feasible solution per
/// cardinality (absent when no subset of that size is feasible).
#[derive(Clone, Debug)]
pub struct SupportFrontier {
    pub entries: Vec<FrontierEntry>,
    pub subsets_evaluated: usize,
}

impl SupportFrontier {
    /// Smallest cardinality with any feasible subset.
    pub fn min_cardinality(&self) -> Option<usize> {
        self.entries.iter().map(|e| e.cardinality).min()
    }
    pub fn at_cardinality(&self, card: usize) -> Option<&FrontierEntry> {
        self.entries.iter().find(|e| e.cardinality == card)
    }
}

/// Exhaustively solves the dense problem restricted to every support subset of
/// size <= `max_card` (compensation pinned to zero elsewhere). Guarded to at
/// most 6 buses. When `bounds` is given, a subset only qualifies if the
/// restricted minimum-norm solution also keeps |V| inside the bounds.
pub fn enumerate_supports(
    model: &CircuitModel,
    max_card: usize,
    bounds: Option<&[VoltageBounds]>,
) -> Result<SupportFrontier, OracleError> {
    if model.n_bus > 6 {
        return Err(OracleError::TooLarge(model.n_bus));
    }
    let slots: Vec<usize> = (0..model.comp_buses.len()).collect();
    let max_card = max_card.min(slots.len());

    let mut subsets: Vec<Vec<usize>> = Vec::new();
    for card in 0..=max_card {
        combinations(&slots, card, &mut subsets);
    }

    // Warm starts chain from solved sub-subsets, so process by cardinality and
    // keep every converged solution keyed by subset bitmask.
    let mut solved: std::collections::BTreeMap<u64, RestrictedSolution> =
        std::collections::BTreeMap::new();
    let mut by_card: Vec<Vec<(u64, RestrictedSolution)>> = vec![Vec::new(); max_card + 1];
    let mut evaluated = 0usize;

    for card in 0..=max_card {
        let batch: Vec<&Vec<usize>> = subsets.iter().filter(|s| s.len() == card).collect();
        let results: Vec<(u64, Option<RestrictedSolution>)> = batch
            .par_iter()
            .map(|subset| {
                let mask = subset.iter().fold(0u64, |m, &k| m | (1 << k));
                let mut warm: Vec<&RestrictedSolution> = Vec::new();
                for (m, sol) in solved.iter() {
                    if m & mask == *m {
                        warm.push(sol);
                    }
                }
                (mask, restricted_dense_solve(model, subset, &warm, bounds))
            })
            .collect();
        evaluated += results.len();
        for (mask, sol) in results {
            if let Some(s) = sol {
                by_card[card].push((mask, s.clone()));
                solved.insert(mask, s);
            }
        }
    }

    let mut entries = Vec::new();
    for (card, sols) in by_card.iter().enumerate() {
        let best = sols
            .iter()
            .map(|(_, s)| s)
            .filter(|s| s.bounds_ok)
            .min_by(|a, b| a.objective.total_cmp(&b.objective));
        if let Some(b) = best {
            entries.push(FrontierEntry { cardinality: card, best: b.clone() });
        }
    }
    Ok(SupportFrontier { entries, subsets_evaluated: evaluated })
}

fn combinations(items: &[usize], k: usize, out: &mut Vec<Vec<usize>>) {
    fn rec(items: &[usize], k: usize, start: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..items.len() {
            cur.push(items[i]);
            rec(items, k, i + 1, cur, out);
            cur.pop();
        }
    }
    let mut cur = Vec::new();
    rec(items, k, 0, &mut cur, out);
}

const RESTRICTED_TOL: f64 = 1e-9;
const RESTRICTED_FEAS_TOL: f64 = 1e-8;

/// Minimizes 0.5 * sum of squared KCL residuals over the support rows subject
/// to every other residual row being zero, by a damped Lagrange-Newton
/// iteration with multiple deterministic starts. Returns None when no start
/// converges to a feasible point.
fn restricted_dense_solve(
    model: &CircuitModel,
    support_slots: &[usize],
    warm_starts: &[&RestrictedSolution],
    bounds: Option<&[VoltageBounds]>,
) -> Option<RestrictedSolution> {
    let layout = VariableLayout {
        n_bus: model.n_bus,
        n_pv: model.pv_devices.len(),
        n_comp: 0,
        real_comp: true,
        with_t: false,
        with_vsq: false,
    };
    let n_rows = layout.n_eq_rows();

    // Objective rows: both KCL rows of every support bus.
    let mut is_obj = vec![false; n_rows];
    for &slot in support_slots {
        let b = model.comp_buses[slot];
        is_obj[layout.row_kcl_real() + b] = true;
        is_obj[layout.row_kcl_imag() + b] = true;
    }
    let con_rows: Vec<usize> = (0..n_rows).filter(|&r| !is_obj[r]).collect();
    let obj_rows: Vec<usize> = (0..n_rows).filter(|&r| is_obj[r]).collect();

    let mut starts: Vec<StateVector> = Vec::new();
    for w in warm_starts {
        let mut s = model.initial_state(layout);
        for i in 0..model.n_bus {
            s.data[layout.v_real() + i] = w.v_real[i];
            s.data[layout.v_imag() + i] = w.v_imag[i];
        }
        starts.push(s);
    }
    starts.push(model.initial_state(layout));
    use rand::{Rng, SeedableRng};
    let seed = support_slots.iter().fold(17u64, |a, &s| a.wrapping_mul(31).wrapping_add(s as u64));
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    for &(scale, shrink) in &[(0.05, 1.0), (0.2, 0.85), (0.4, 0.7)] {
        let mut s = model.initial_state(layout);
        for i in 0..model.n_bus {
            s.data[layout.v_real() + i] =
                s.data[layout.v_real() + i] * shrink + rng.gen_range(-scale..scale);
            s.data[layout.v_imag() + i] =
                s.data[layout.v_imag() + i] * shrink + rng.gen_range(-scale..scale);
        }
        starts.push(s);
    }

    let mut best: Option<RestrictedSolution> = None;
    for start in starts {
        if let Some(sol) = lagrange_newton(model, layout, start, &obj_rows, &con_rows) {
            let bounds_ok = bounds.map_or(true, |bd| {
                (0..model.n_bus).all(|i| {
                    let vm = (sol.0.v_real()[i].powi(2) + sol.0.v_imag()[i].powi(2)).sqrt();
                    vm >= bd[i].v_min - 1e-6 && vm <= bd[i].v_max + 1e-6
                })
            });
            let state = sol.0;
            let r = kcl_residual(model, &state).ok()?;
            let mut n = Vec::with_capacity(support_slots.len());
            let mut objective = 0.0;
            for &slot in support_slots {
                let b = model.comp_buses[slot];
                let c = Complex64::new(r[layout.row_kcl_real() + b], r[layout.row_kcl_imag() + b]);
                objective += 0.5 * c.norm_sqr();
                n.push(c);
            }
            let cand = RestrictedSolution {
                support: support_slots.iter().map(|&s| model.comp_buses[s]).collect(),
                n,
                objective,
                v_real: state.v_real().to_vec(),
                v_imag: state.v_imag().to_vec(),
                bounds_ok,
            };
            let better = match &best {
                None => true,
                Some(b) => {
                    (cand.bounds_ok, -cand.objective) > (b.bounds_ok, -b.objective)
                }
            };
            if better {
                best = Some(cand);
            }
        }
    }
    best
}

/// Damped Newton iteration on the stationarity system of
/// min 0.5*||r_obj||^2 s.t. r_con = 0. Returns the state and duals.
fn lagrange_newton(
    model: &CircuitModel,
    layout: VariableLayout,
    mut state: StateVector,
    obj_rows: &[usize],
    con_rows: &[usize],
) -> Option<(StateVector, Vec<f64>)> {
    let nx = layout.n_vars();
    let nc = con_rows.len();
    let nz = nx + nc;
    let mut nu = vec![0.0; nc];

    let merit = |state: &StateVector, nu: &[f64]| -> Option<(Vec<f64>, f64)> {
        let r = kcl_residual(model, state).ok()?;
        let jac = jacobian(model, state).ok()?;
        // grad L = J_obj^T r_obj + J_con^T nu
        let mut w = vec![0.0; r.len()];
        for &o in obj_rows {
            w[o] = r[o];
        }
        for (k, &c) in con_rows.iter().enumerate() {
            w[c] = nu[k];
        }
        let mut g = vec![0.0; nz];
        jac.add_mul_vec_transpose(&w, &mut g[0..nx]);
        for (k, &c) in con_rows.iter().enumerate() {
            g[nx + k] = r[c];
        }
        let m = g.iter().map(|v| v * v).sum::<f64>();
        if m.is_finite() {
            Some((g, m))
        } else {
            None
        }
    };

    let (mut grad, mut m) = merit(&state, &nu)?;
    for _ in 0..200 {
        let gl_inf = grad[0..nx].iter().fold(0.0f64, |a, &v| a.max(v.abs()));
        let rc_inf = grad[nx..].iter().fold(0.0f64, |a, &v| a.max(v.abs()));
        if gl_inf <= RESTRICTED_TOL && rc_inf <= RESTRICTED_FEAS_TOL {
            return Some((state, nu));
        }

        let r = kcl_residual(model, &state).ok()?;
        let jac = jacobian(model, &state).ok()?;
        let mut w = vec![0.0; r.len()];
        for &o in obj_rows {
            w[o] = r[o];
        }
        for (k, &c) in con_rows.iter().enumerate() {
            w[c] = nu[k];
        }
        let curv = weighted_residual_hessian(model, &state, &w).ok()?;

        // Dense KKT: [J_obj^T J_obj + curvature, J_con^T; J_con, 0]
        let jd = jac.to_dense();
        let mut kkt = vec![vec![0.0; nz]; nz];
        for &o in obj_rows {
            for a in 0..nx {
                if jd[o][a] == 0.0 {
                    continue;
                }
                for b in 0..nx {
                    kkt[a][b] += jd[o][a] * jd[o][b];
                }
            }
        }
        for &(a, b, v) in &curv.entries {
            kkt[a][b] += v;
        }
        for (k, &c) in con_rows.iter().enumerate() {
            for a in 0..nx {
                kkt[a][nx + k] += jd[c][a];
                kkt[nx + k][a] += jd[c][a];
            }
        }
        let rhs: Vec<f64> = grad.iter().map(|v| -v).collect();
        let mut step = linsolve::dense_solve(&kkt, &rhs);
        if step.is_none() {
            for a in 0..nx {
                kkt[a][a] += 1e-8;
            }
            for k in 0..nc {
                kkt[nx + k][nx + k] -= 1e-8;
            }
            step = linsolve::dense_solve(&kkt, &rhs);
        }
        let step = step?;

        let mut alpha = 1.0f64;
        let mut accepted = false;
        for _ in 0..30 {
            let mut trial = state.clone();
            for (x, d) in trial.data.iter_mut().zip(&step[0..nx]) {
                *x += alpha * d;
            }
            let trial_nu: Vec<f64> =
                nu.iter().zip(&step[nx..]).map(|(v, d)| v + alpha * d).collect();
            if let Some((g2, m2)) = merit(&trial, &trial_nu) {
                if m2 < m * (1.0 - 1e-4 * alpha) + 1e-30 {
                    state = trial;
                    nu = trial_nu;
                    grad = g2;
                    m = m2;
                    accepted = true;
                    break;
                }
            }
            alpha *= 0.5;
        }
        if !accepted {
            return None;
        }
    }
    None
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OracleKind {
    Powerflow,
    JacobianFd,
    SupportEnum,
}

/// Pass/fail evidence from an oracle comparison.
#[derive(Clone, Debug)]
pub struct OracleReport {
    pub kind: OracleKind,
    pub passed: bool,
    pub details: Vec<String>,
}

/// Compares the analytic Jacobian against central finite differences at
/// `n_states` random interior states, over the base layout and the extended
/// (t, v_sq) layout.
pub fn check_jacobian_fd(
    model: &CircuitModel,
    n_states: usize,
    seed: u64,
    tol: f64,
) -> OracleReport {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut details = Vec::new();
    let mut passed = true;

    let layouts = [
        model.layout,
        VariableLayout { with_t: true, with_vsq: true, ..model.layout },
    ];
    for (li, layout) in layouts.iter().enumerate() {
        for s in 0..n_states {
            let mut state = model.initial_state(*layout);
            for i in 0..model.n_bus {
                state.data[layout.v_real() + i] += rng.gen_range(-0.1..0.1);
                state.data[layout.v_imag() + i] += rng.gen_range(-0.1..0.1);
            }
            for k in 0..layout.n_pv {
                state.data[layout.q_gen() + k] += rng.gen_range(-0.5..0.5);
            }
            state.data[layout.i_slack()] = rng.gen_range(-1.0..1.0);
            state.data[layout.i_slack() + 1] = rng.gen_range(-1.0..1.0);
            if let Some(o) = layout.n_real() {
                for k in 0..layout.n_comp {
                    state.data[o + k] = rng.gen_range(-0.2..0.2);
                }
            }
            for k in 0..layout.n_comp {
                state.data[layout.n_imag() + k] = rng.gen_range(-0.2..0.2);
            }
            if let Some(o) = layout.t() {
                for k in 0..layout.n_comp_components() {
                    state.data[o + k] = rng.gen_range(0.0..0.5);
                }
            }
            if let Some(o) = layout.v_sq() {
                for i in 0..model.n_bus {
                    let vm2 = state.bus_voltage(i).norm_sqr();
                    state.data[o + i] = vm2 + rng.gen_range(-0.05..0.05);
                }
            }

            let analytic = match jacobian(model, &state) {
                Ok(j) => j.to_dense(),
                Err(e) => {
                    passed = false;
                    details.push(format!("layout {li} state {s}: jacobian error {e}"));
                    continue;
                }
            };
            let fd = match finite_diff_jacobian(model, &state, 1e-7) {
                Ok(f) => f,
                Err(e) => {
                    passed = false;
                    details.push(format!("layout {li} state {s}: fd error {e}"));
                    continue;
                }
            };
            let mut max_err = 0.0f64;
            for (ra, rf) in analytic.iter().zip(&fd) {
                for (&a, &f) in ra.iter().zip(rf) {
                    let err = (a - f).abs() / f64::max(1.0, a.abs().max(f.abs()));
                    max_err = max_err.max(err);
                }
            }
            if max_err >= tol {
                passed = false;
            }
            details.push(format!("layout {li} state {s}: max rel err {max_err:.3e}"));
        }
    }
    OracleReport { kind: OracleKind::JacobianFd, passed, details }
}

/// Checks V * conj(I) = p + jq for the PQ injection over random samples with
/// |V| in [0.3, 1.5].
pub fn check_injection_identity(samples: usize, seed: u64, tol: f64) -> OracleReport {
    use rand::{Rng, SeedableRng};
    use crate::network_model::pq_injection_current;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut max_err = 0.0f64;
    for _ in 0..samples {
        let p: f64 = rng.gen_range(-2.0..2.0);
        let q: f64 = rng.gen_range(-2.0..2.0);
        let vm: f64 = rng.gen_range(0.3..1.5);
        let th: f64 = rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI);
        let v = Complex64::from_polar(vm, th);
        let (ir, ii) = pq_injection_current(p, q, v.re, v.im).expect("|V| > 0");
        let s = v * Complex64::new(ir, ii).conj();
        max_err = max_err.max((s - Complex64::new(p, q)).norm());
    }
    OracleReport {
        kind: OracleKind::Powerflow,
        passed: max_err < tol,
        details: vec![format!("max |V conj(I) - S| = {max_err:.3e} over {samples} samples")],
    }
}

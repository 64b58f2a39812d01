//! Primal-dual interior-point engine for equality- and inequality-constrained
//! NLPs. Inequalities `c(x) <= 0` are handled in slack form `c(x) + s = 0`,
//! `s > 0`, with perturbed complementarity `mu_j * s_j = barrier`. Newton steps
//! on the perturbed KKT system are limited by a fraction-to-boundary rule, a
//! per-variable voltage step cap, and residual-based damping.

use thiserror::Error;

use crate::linsolve;
use crate::sparsemat::CooMatrix;

#[derive(Debug, Error)]
pub enum NlpError {
    #[error("iterate is not strictly interior (mu or s has a non-positive entry)")]
    NotInterior,
    #[error("initial point has wrong length: got {got}, expected {expected}")]
    InitLength { got: usize, expected: usize },
    #[error("linear step failed: {0}")]
    StepFailed(String),
    #[error("damping retries exhausted ({0} retries)")]
    DampingExhausted(u32),
}

/// Problem interface consumed by the solver. Constraint evaluations may return
/// non-finite values at singular points; such trial steps are rejected by the
/// damping rule.
pub trait NlpProblem {
    fn num_vars(&self) -> usize;
    fn num_eq(&self) -> usize;
    fn num_ineq(&self) -> usize;
    fn objective(&self, x: &[f64]) -> f64;
    fn objective_gradient(&self, x: &[f64], out: &mut [f64]);
    fn eq_constraints(&self, x: &[f64], out: &mut [f64]);
    fn eq_jacobian(&self, x: &[f64]) -> CooMatrix;
    /// Inequalities in `c(x) <= 0` form.
    fn ineq_constraints(&self, x: &[f64], out: &mut [f64]);
    fn ineq_jacobian(&self, x: &[f64]) -> CooMatrix;
    /// Hessian of f + lambda . g + mu . c, both triangles.
    fn lagrangian_hessian(&self, x: &[f64], lambda: &[f64], mu: &[f64]) -> CooMatrix;
    /// Variable indices subject to the per-step voltage cap.
    fn step_capped_vars(&self) -> Vec<usize> {
        Vec::new()
    }
}

/// Primal-dual iterate: primal variables, equality duals, inequality duals,
/// inequality slacks and the barrier parameter.
#[derive(Clone, Debug, PartialEq)]
pub struct KktSystem {
    pub primal: Vec<f64>,
    pub lambda_eq: Vec<f64>,
    pub mu_ineq: Vec<f64>,
    pub s_ineq: Vec<f64>,
    pub barrier: f64,
}

impl KktSystem {
    pub fn is_interior(&self) -> bool {
        self.mu_ineq.iter().all(|&v| v > 0.0) && self.s_ineq.iter().all(|&v| v > 0.0)
    }
}

#[derive(Clone, Debug)]
pub struct SolverOptions {
    pub tol_feas: f64,
    pub tol_opt: f64,
    pub max_newton_iters: usize,
    pub barrier_init: f64,
    pub barrier_shrink: f64,
    pub barrier_floor: f64,
    pub step_fraction_to_boundary: f64,
    pub v_step_cap: f64,
    pub damping_factor: f64,
    pub max_damping_retries: u32,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            tol_feas: 1e-6,
            tol_opt: 1e-6,
            max_newton_iters: 200,
            barrier_init: 1e-1,
            barrier_shrink: 0.2,
            barrier_floor: 1e-9,
            step_fraction_to_boundary: 0.995,
            v_step_cap: 0.1,
            damping_factor: 0.7,
            max_damping_retries: 8,
        }
    }
}

#[derive(Clone, Debug)]
pub struct IterationRecord {
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub complementarity: f64,
    pub kkt_residual: f64,
    pub step_norm: f64,
    pub barrier: f64,
    pub damping: f64,
    pub min_mu: f64,
    pub min_s: f64,
}

#[derive(Clone, Debug, Default)]
pub struct IterationLog {
    pub records: Vec<IterationRecord>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SolveStatus {
    Converged,
    MaxIter,
    NumericalFailure,
}

/// Residual of the perturbed KKT conditions at `it`, ordered
/// [stationarity; equalities; c(x)+s; mu*s - barrier].
pub fn kkt_residual(problem: &dyn NlpProblem, it: &KktSystem) -> Vec<f64> {
    let nv = problem.num_vars();
    let ne = problem.num_eq();
    let ni = problem.num_ineq();
    let mut r = vec![0.0; nv + ne + 2 * ni];

    problem.objective_gradient(&it.primal, &mut r[0..nv]);
    if ne > 0 {
        let jac_eq = problem.eq_jacobian(&it.primal);
        jac_eq.add_mul_vec_transpose(&it.lambda_eq, &mut r[0..nv]);
        problem.eq_constraints(&it.primal, &mut r[nv..nv + ne]);
    }
    if ni > 0 {
        let jac_in = problem.ineq_jacobian(&it.primal);
        jac_in.add_mul_vec_transpose(&it.mu_ineq, &mut r[0..nv]);
        problem.ineq_constraints(&it.primal, &mut r[nv + ne..nv + ne + ni]);
        for j in 0..ni {
            r[nv + ne + j] += it.s_ineq[j];
            r[nv + ne + ni + j] = it.mu_ineq[j] * it.s_ineq[j] - it.barrier;
        }
    }
    r
}

#[derive(Clone, Copy, Debug)]
pub struct KktDims {
    pub n_vars: usize,
    pub n_eq: usize,
    pub n_ineq: usize,
}

/// Newton linearization of the perturbed KKT conditions.
pub struct AssembledKkt {
    pub residual: Vec<f64>,
    pub matrix: CooMatrix,
    pub dims: KktDims,
}

/// Builds the exact Newton system for the perturbed KKT residual. Unknown
/// order: primal, equality duals, inequality duals, slacks.
pub fn assemble_kkt(problem: &dyn NlpProblem, it: &KktSystem) -> Result<AssembledKkt, NlpError> {
    if !it.is_interior() {
        return Err(NlpError::NotInterior);
    }
    let nv = problem.num_vars();
    let ne = problem.num_eq();
    let ni = problem.num_ineq();
    let dims = KktDims { n_vars: nv, n_eq: ne, n_ineq: ni };
    let total = nv + ne + 2 * ni;

    let residual = kkt_residual(problem, it);
    let mut m = CooMatrix::new(total, total);

    let hess = problem.lagrangian_hessian(&it.primal, &it.lambda_eq, &it.mu_ineq);
    m.add_block(0, 0, &hess);
    // Explicit zeros keep the diagonal structurally present so regularization
    // shifts never change the sparsity pattern.
    for k in 0..nv + ne {
        m.push(k, k, 0.0);
    }
    if ne > 0 {
        let jac_eq = problem.eq_jacobian(&it.primal);
        m.add_block_transposed(0, nv, &jac_eq);
        m.add_block(nv, 0, &jac_eq);
    }
    if ni > 0 {
        let jac_in = problem.ineq_jacobian(&it.primal);
        m.add_block_transposed(0, nv + ne, &jac_in);
        m.add_block(nv + ne, 0, &jac_in);
        for j in 0..ni {
            m.push(nv + ne + j, nv + ne + ni + j, 1.0);
            m.push(nv + ne + ni + j, nv + ne + j, it.s_ineq[j]);
            m.push(nv + ne + ni + j, nv + ne + ni + j, it.mu_ineq[j]);
        }
    }
    Ok(AssembledKkt { residual, matrix: m, dims })
}

/// Raw primal-dual Newton direction.
#[derive(Clone, Debug)]
pub struct KktDirection {
    pub dx: Vec<f64>,
    pub dlambda: Vec<f64>,
    pub dmu: Vec<f64>,
    pub ds: Vec<f64>,
    /// Diagonal shift that was needed to factorize, 0 when none.
    pub regularization: f64,
}

impl KktDirection {
    pub fn inf_norm(&self) -> f64 {
        self.dx
            .iter()
            .chain(&self.dlambda)
            .chain(&self.dmu)
            .chain(&self.ds)
            .fold(0.0f64, |a, &v| a.max(v.abs()))
    }

    fn two_norm(&self) -> f64 {
        let ss: f64 = self
            .dx
            .iter()
            .chain(&self.dlambda)
            .chain(&self.dmu)
            .chain(&self.ds)
            .map(|v| v * v)
            .sum();
        ss.sqrt()
    }
}

const REG_INIT: f64 = 1e-8;
const REG_MAX: f64 = 1e-2;
const SOLVE_BACKWARD_TOL: f64 = 1e-8;

/// Solves the assembled system for the full primal-dual direction. On an
/// unusable factorization, retries with growing primal (+delta) and dual
/// (-delta) diagonal shifts up to `REG_MAX`.
pub fn newton_step(kkt: &AssembledKkt) -> Result<KktDirection, NlpError> {
    newton_step_from(kkt, 0.0)
}

/// [`newton_step`] with the regularization ladder starting at `start_reg`
/// instead of zero. Used when the caller already knows the plain system
/// produces unusable directions.
fn newton_step_from(kkt: &AssembledKkt, start_reg: f64) -> Result<KktDirection, NlpError> {
    let total = kkt.residual.len();
    let rhs: Vec<f64> = kkt.residual.iter().map(|v| -v).collect();
    let rhs_norm = rhs.iter().fold(0.0f64, |a, &v| a.max(v.abs()));

    let mut reg = start_reg;
    loop {
        let mut m = kkt.matrix.clone();
        if reg > 0.0 {
            for k in 0..kkt.dims.n_vars {
                m.push(k, k, reg);
            }
            for k in kkt.dims.n_vars..kkt.dims.n_vars + kkt.dims.n_eq {
                m.push(k, k, -reg);
            }
        }
        let solved = linsolve::sparse_lu(total, &m).map(|lu| lu.solve(&rhs));
        if let Ok(sol) = solved {
            let finite = sol.iter().all(|v| v.is_finite());
            if finite {
                let mut ms = vec![0.0; total];
                m.add_mul_vec(&sol, &mut ms);
                let berr = ms
                    .iter()
                    .zip(&rhs)
                    .fold(0.0f64, |a, (&x, &b)| a.max((x - b).abs()));
                if berr <= SOLVE_BACKWARD_TOL * (1.0 + rhs_norm) {
                    let nv = kkt.dims.n_vars;
                    let ne = kkt.dims.n_eq;
                    let ni = kkt.dims.n_ineq;
                    return Ok(KktDirection {
                        dx: sol[0..nv].to_vec(),
                        dlambda: sol[nv..nv + ne].to_vec(),
                        dmu: sol[nv + ne..nv + ne + ni].to_vec(),
                        ds: sol[nv + ne + ni..nv + ne + 2 * ni].to_vec(),
                        regularization: reg,
                    });
                }
            }
        }
        reg = if reg == 0.0 { REG_INIT } else { reg * 2.0 };
        if reg > REG_MAX {
            return Err(NlpError::StepFailed(format!(
                "factorization unusable up to regularization {REG_MAX:e}"
            )));
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct LimitReport {
    /// Scale from the fraction-to-boundary rule (1 when not binding).
    pub boundary_scale: f64,
    /// Scale from the voltage step cap (1 when not binding).
    pub v_scale: f64,
    /// Damping factor finally applied (1 when the first trial was accepted).
    pub damping: f64,
    pub retries: u32,
    pub accepted_residual: f64,
}

fn res_two_norm(r: &[f64]) -> f64 {
    r.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Applies the step limits: (a) fraction-to-boundary on `mu` and `s`, (b) the
/// voltage step cap on the capped variables, (c) damping by
/// `damping_factor` while the trial KKT residual increases. Returns the
/// accepted iterate.
pub fn apply_limits(
    problem: &dyn NlpProblem,
    it: &KktSystem,
    dir: &KktDirection,
    opts: &SolverOptions,
) -> Result<(KktSystem, LimitReport), NlpError> {
    let frac = opts.step_fraction_to_boundary;
    let mut boundary_scale = 1.0f64;
    for (v, dv) in it.mu_ineq.iter().zip(&dir.dmu) {
        if *dv < 0.0 {
            boundary_scale = boundary_scale.min(-frac * v / dv);
        }
    }
    for (v, dv) in it.s_ineq.iter().zip(&dir.ds) {
        if *dv < 0.0 {
            boundary_scale = boundary_scale.min(-frac * v / dv);
        }
    }

    let mut v_scale = 1.0f64;
    let capped = problem.step_capped_vars();
    let max_dv = capped.iter().fold(0.0f64, |a, &k| a.max(dir.dx[k].abs()));
    if max_dv > opts.v_step_cap {
        v_scale = opts.v_step_cap / max_dv;
    }

    let base_scale = boundary_scale.min(v_scale);
    let base_res = res_two_norm(&kkt_residual(problem, it));

    let mut damping = 1.0f64;
    for retry in 0..=opts.max_damping_retries {
        let a = base_scale * damping;
        let trial = KktSystem {
            primal: it.primal.iter().zip(&dir.dx).map(|(v, d)| v + a * d).collect(),
            lambda_eq: it.lambda_eq.iter().zip(&dir.dlambda).map(|(v, d)| v + a * d).collect(),
            mu_ineq: it.mu_ineq.iter().zip(&dir.dmu).map(|(v, d)| v + a * d).collect(),
            s_ineq: it.s_ineq.iter().zip(&dir.ds).map(|(v, d)| v + a * d).collect(),
            barrier: it.barrier,
        };
        let trial_res = res_two_norm(&kkt_residual(problem, &trial));
        if trial_res.is_finite() && trial_res <= base_res * (1.0 + 1e-10) + 1e-15 {
            return Ok((
                trial,
                LimitReport {
                    boundary_scale,
                    v_scale,
                    damping,
                    retries: retry,
                    accepted_residual: trial_res,
                },
            ));
        }
        damping *= opts.damping_factor;
    }
    Err(NlpError::DampingExhausted(opts.max_damping_retries))
}

struct Norms {
    feas: f64,
    stat: f64,
    comp_max: f64,
    full: f64,
}

fn split_norms(r: &[f64], dims: KktDims, it: &KktSystem) -> Norms {
    let nv = dims.n_vars;
    let ne = dims.n_eq;
    let ni = dims.n_ineq;
    let inf = |s: &[f64]| s.iter().fold(0.0f64, |a, &v| a.max(v.abs()));
    let feas = inf(&r[nv..nv + ne]).max(inf(&r[nv + ne..nv + ne + ni]));
    let stat = inf(&r[0..nv]);
    let comp_max = it
        .mu_ineq
        .iter()
        .zip(&it.s_ineq)
        .fold(0.0f64, |a, (&m, &s)| a.max(m * s));
    Norms { feas, stat, comp_max, full: inf(r) }
}

/// Barrier-staged primal-dual Newton solve. Convergence requires primal
/// feasibility <= `tol_feas`, stationarity <= `tol_opt`, and complementarity
/// pairs <= 10 x `barrier_floor`.
pub fn solve_nlp(
    problem: &dyn NlpProblem,
    init: &[f64],
    opts: &SolverOptions,
) -> Result<(KktSystem, IterationLog, SolveStatus), NlpError> {
    let nv = problem.num_vars();
    let ne = problem.num_eq();
    let ni = problem.num_ineq();
    if init.len() != nv {
        return Err(NlpError::InitLength { got: init.len(), expected: nv });
    }

    let dual0 = opts.barrier_init.sqrt();
    let mut it = KktSystem {
        primal: init.to_vec(),
        lambda_eq: vec![0.0; ne],
        mu_ineq: vec![dual0; ni],
        s_ineq: vec![dual0; ni],
        barrier: if ni > 0 { opts.barrier_init } else { opts.barrier_floor },
    };
    let mut log = IterationLog::default();
    let mut best: Option<(f64, KktSystem)> = None;
    let mut reperturbs = 0u32;
    // Persistent diagonal shift, raised when damping cannot rescue the plain
    // Newton direction (ill-conditioned KKT matrix near a fold) and decayed
    // after successful steps.
    let mut forced_reg = 0.0f64;
    let dims = KktDims { n_vars: nv, n_eq: ne, n_ineq: ni };

    let mut iters = 0usize;
    while iters < opts.max_newton_iters {
        let assembled = match assemble_kkt(problem, &it) {
            Ok(a) => a,
            Err(e) => return Err(e),
        };
        let norms = split_norms(&assembled.residual, dims, &it);
        debug_assert!(it.is_interior());

        let score = norms.feas.max(norms.stat).max(norms.comp_max);
        if best.as_ref().map_or(true, |(s, _)| score < *s) {
            best = Some((score, it.clone()));
        }

        if norms.feas <= opts.tol_feas
            && norms.stat <= opts.tol_opt
            && norms.comp_max <= 10.0 * opts.barrier_floor
        {
            return Ok((it, log, SolveStatus::Converged));
        }

        // Stage convergence: move the barrier down before polishing further.
        let stage_tol = opts.tol_opt.max(0.1 * it.barrier);
        if ni > 0 && it.barrier > opts.barrier_floor && norms.full <= stage_tol {
            it.barrier = (it.barrier * opts.barrier_shrink).max(opts.barrier_floor);
            continue;
        }

        let step_result = newton_step_from(&assembled, forced_reg).and_then(|dir| {
            apply_limits(problem, &it, &dir, opts).map(|(next, rep)| (dir, next, rep))
        });
        match step_result {
            Ok((dir, next, rep)) => {
                it = next;
                iters += 1;
                forced_reg = if forced_reg > REG_INIT { forced_reg * 0.25 } else { 0.0 };
                let r_next = split_norms(&kkt_residual(problem, &it), dims, &it);
                log.records.push(IterationRecord {
                    primal_residual: r_next.feas,
                    dual_residual: r_next.stat,
                    complementarity: r_next.comp_max,
                    kkt_residual: rep.accepted_residual,
                    step_norm: dir.two_norm() * rep.boundary_scale.min(rep.v_scale) * rep.damping,
                    barrier: it.barrier,
                    damping: rep.damping,
                    min_mu: it.mu_ineq.iter().copied().fold(f64::INFINITY, f64::min),
                    min_s: it.s_ineq.iter().copied().fold(f64::INFINITY, f64::min),
                });
            }
            Err(_) if forced_reg < REG_MAX => {
                forced_reg = (forced_reg.max(REG_INIT / 16.0) * 16.0).min(REG_MAX);
                iters += 1;
            }
            Err(_) if ni > 0 && reperturbs < 3 => {
                // Re-center: push the barrier back up and restore slack margin.
                reperturbs += 1;
                forced_reg = 0.0;
                it.barrier = (it.barrier * 1e3).min(opts.barrier_init);
                let floor = it.barrier.sqrt() * 1e-2;
                for v in it.mu_ineq.iter_mut().chain(it.s_ineq.iter_mut()) {
                    if *v < floor {
                        *v = floor;
                    }
                }
                iters += 1;
            }
            Err(_) => {
                let out = best.map(|(_, b)| b).unwrap_or(it);
                return Ok((out, log, SolveStatus::NumericalFailure));
            }
        }
    }
    let out = best.map(|(_, b)| b).unwrap_or(it);
    Ok((out, log, SolveStatus::MaxIter))
}

//! Circuit-theoretic current-injection model in Cartesian voltage coordinates.
//!
//! Every bus carries a complex KCL equation written as two real residual rows.
//! Branches and shunts contribute linear admittance stamps; PQ loads and PV
//! generators contribute nonlinear current injections; the slack bus carries a
//! free injection current and a voltage pin. Compensation currents `n` enter
//! selected buses as extra injections.
//!
//! Sign convention: network and load currents leaving a bus count positively,
//! generator, slack and compensation injections count negatively, so a
//! residual row reads `sum(leaving) - sum(injected) = 0`.

use num_complex::Complex64;
use thiserror::Error;

use crate::case_io::{BusType, NetworkCase, Status};
use crate::sparsemat::CooMatrix;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("bus voltage magnitude is zero at bus index {0}")]
    Singularity(usize),
    #[error("state length {got} does not match layout ({expected})")]
    StateLength { got: usize, expected: usize },
    #[error("{0}")]
    Invalid(String),
}

/// Where compensation currents are allowed.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CompensationPlacement {
    /// Every bus except the slack (its injection is already free).
    AllNonSlack,
    /// Only PQ (load) buses.
    PqOnly,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PqDevice {
    pub bus: usize,
    pub p: f64,
    pub q: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PvDevice {
    pub bus: usize,
    pub p_net: f64,
    pub v_set: f64,
    pub q_init: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SlackDevice {
    pub bus: usize,
    pub v_real_set: f64,
    pub v_imag_set: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct VoltageBounds {
    pub v_min: f64,
    pub v_max: f64,
}

/// Flat indexing of the unknowns. Order: bus voltages (real then imaginary),
/// PV reactive outputs, the two slack injection components, compensation
/// currents (real block then imaginary block), L1 slack variables `t`, squared
/// voltage magnitudes `v_sq`. The `t` and `v_sq` segments exist only in the
/// problems that use them.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct VariableLayout {
    pub n_bus: usize,
    pub n_pv: usize,
    pub n_comp: usize,
    /// Compensation has a real part. When false only reactive current is free.
    pub real_comp: bool,
    pub with_t: bool,
    pub with_vsq: bool,
}

impl VariableLayout {
    pub fn base(n_bus: usize, n_pv: usize, n_comp: usize) -> Self {
        VariableLayout { n_bus, n_pv, n_comp, real_comp: true, with_t: false, with_vsq: false }
    }

    /// Number of scalar compensation components (2 per bus, or 1 when
    /// restricted to reactive current).
    pub fn n_comp_components(&self) -> usize {
        self.n_comp * if self.real_comp { 2 } else { 1 }
    }

    pub fn v_real(&self) -> usize {
        0
    }
    pub fn v_imag(&self) -> usize {
        self.n_bus
    }
    pub fn q_gen(&self) -> usize {
        2 * self.n_bus
    }
    pub fn i_slack(&self) -> usize {
        2 * self.n_bus + self.n_pv
    }
    /// Start of the real compensation block, if present.
    pub fn n_real(&self) -> Option<usize> {
        self.real_comp.then(|| self.i_slack() + 2)
    }
    pub fn n_imag(&self) -> usize {
        self.i_slack() + 2 + if self.real_comp { self.n_comp } else { 0 }
    }
    pub fn t(&self) -> Option<usize> {
        self.with_t.then(|| self.n_imag() + self.n_comp)
    }
    pub fn v_sq(&self) -> Option<usize> {
        self.with_vsq.then(|| {
            self.n_imag() + self.n_comp + if self.with_t { self.n_comp_components() } else { 0 }
        })
    }
    pub fn n_vars(&self) -> usize {
        self.n_imag()
            + self.n_comp
            + if self.with_t { self.n_comp_components() } else { 0 }
            + if self.with_vsq { self.n_bus } else { 0 }
    }

    pub fn row_kcl_real(&self) -> usize {
        0
    }
    pub fn row_kcl_imag(&self) -> usize {
        self.n_bus
    }
    pub fn row_pv(&self) -> usize {
        2 * self.n_bus
    }
    pub fn row_slack(&self) -> usize {
        2 * self.n_bus + self.n_pv
    }
    pub fn row_vsq(&self) -> Option<usize> {
        self.with_vsq.then(|| self.row_slack() + 2)
    }
    pub fn n_eq_rows(&self) -> usize {
        self.row_slack() + 2 + if self.with_vsq { self.n_bus } else { 0 }
    }
}

/// All primal unknowns for a given layout, stored flat.
#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    pub layout: VariableLayout,
    pub data: Vec<f64>,
}

impl StateVector {
    pub fn zeros(layout: VariableLayout) -> Self {
        StateVector { data: vec![0.0; layout.n_vars()], layout }
    }

    pub fn from_vec(layout: VariableLayout, data: Vec<f64>) -> Result<Self, ModelError> {
        if data.len() != layout.n_vars() {
            return Err(ModelError::StateLength { got: data.len(), expected: layout.n_vars() });
        }
        Ok(StateVector { layout, data })
    }

    pub fn v_real(&self) -> &[f64] {
        &self.data[self.layout.v_real()..self.layout.v_real() + self.layout.n_bus]
    }
    pub fn v_imag(&self) -> &[f64] {
        &self.data[self.layout.v_imag()..self.layout.v_imag() + self.layout.n_bus]
    }
    pub fn q_gen(&self) -> &[f64] {
        &self.data[self.layout.q_gen()..self.layout.q_gen() + self.layout.n_pv]
    }
    pub fn i_slack(&self) -> &[f64] {
        &self.data[self.layout.i_slack()..self.layout.i_slack() + 2]
    }
    pub fn n_real(&self) -> Option<&[f64]> {
        self.layout.n_real().map(|o| &self.data[o..o + self.layout.n_comp])
    }
    pub fn n_imag(&self) -> &[f64] {
        &self.data[self.layout.n_imag()..self.layout.n_imag() + self.layout.n_comp]
    }
    pub fn t(&self) -> Option<&[f64]> {
        self.layout.t().map(|o| &self.data[o..o + self.layout.n_comp_components()])
    }
    pub fn v_sq(&self) -> Option<&[f64]> {
        self.layout.v_sq().map(|o| &self.data[o..o + self.layout.n_bus])
    }

    pub fn bus_voltage(&self, bus: usize) -> Complex64 {
        Complex64::new(self.data[self.layout.v_real() + bus], self.data[self.layout.v_imag() + bus])
    }

    /// Complex compensation current at compensation slot `k` (zero real part
    /// when the layout is reactive-only).
    pub fn compensation(&self, k: usize) -> Complex64 {
        let re = self.layout.n_real().map_or(0.0, |o| self.data[o + k]);
        Complex64::new(re, self.data[self.layout.n_imag() + k])
    }
}

/// Indexed current-injection model built from a [`NetworkCase`].
#[derive(Clone, Debug)]
pub struct CircuitModel {
    pub n_bus: usize,
    /// External bus ids in model index order.
    pub bus_ids: Vec<u32>,
    /// Complex admittance triplets (bus row, bus col), sorted, duplicates summed.
    pub y_lin: Vec<(usize, usize, Complex64)>,
    pub pq_devices: Vec<PqDevice>,
    pub pv_devices: Vec<PvDevice>,
    pub slack: SlackDevice,
    /// Bus indices eligible for compensation, ascending.
    pub comp_buses: Vec<usize>,
    pub bounds: Vec<VoltageBounds>,
    pub layout: VariableLayout,
    pub v_init_real: Vec<f64>,
    pub v_init_imag: Vec<f64>,
}

/// Assembles admittance stamps, device lists and the base variable layout.
pub fn build_model(
    case: &NetworkCase,
    placement: CompensationPlacement,
) -> Result<CircuitModel, ModelError> {
    case.validate().map_err(|e| ModelError::Invalid(e.to_string()))?;
    let n_bus = case.buses.len();
    let mut index = std::collections::BTreeMap::new();
    for (i, b) in case.buses.iter().enumerate() {
        index.insert(b.id, i);
    }

    let mut y: std::collections::BTreeMap<(usize, usize), Complex64> = std::collections::BTreeMap::new();
    for br in case.branches.iter().filter(|br| br.status == Status::On) {
        let f = index[&br.from_bus];
        let t = index[&br.to_bus];
        let y_se = Complex64::new(1.0, 0.0) / Complex64::new(br.r, br.x);
        let y_sh = Complex64::new(0.0, br.b_charging / 2.0);
        let ratio = if br.tap == 0.0 { 1.0 } else { br.tap };
        let tau = Complex64::from_polar(ratio, br.shift);
        *y.entry((f, f)).or_default() += (y_se + y_sh) / (ratio * ratio);
        *y.entry((f, t)).or_default() += -y_se / tau.conj();
        *y.entry((t, f)).or_default() += -y_se / tau;
        *y.entry((t, t)).or_default() += y_se + y_sh;
    }
    for (i, b) in case.buses.iter().enumerate() {
        if b.g_shunt != 0.0 || b.b_shunt != 0.0 {
            *y.entry((i, i)).or_default() += Complex64::new(b.g_shunt, b.b_shunt);
        }
    }
    let y_lin: Vec<(usize, usize, Complex64)> =
        y.into_iter().map(|((r, c), v)| (r, c, v)).collect();

    let slack_bus = case
        .buses
        .iter()
        .position(|b| b.btype == BusType::Slack)
        .expect("validated case has one slack bus");
    let slack_rec = &case.buses[slack_bus];
    let slack = SlackDevice {
        bus: slack_bus,
        v_real_set: slack_rec.v_mag_init * slack_rec.v_ang_init.cos(),
        v_imag_set: slack_rec.v_mag_init * slack_rec.v_ang_init.sin(),
    };

    let pq_devices: Vec<PqDevice> = case
        .buses
        .iter()
        .enumerate()
        .filter(|(_, b)| b.p_demand != 0.0 || b.q_demand != 0.0)
        .map(|(i, b)| PqDevice { bus: i, p: b.p_demand, q: b.q_demand })
        .collect();

    let pv_devices: Vec<PvDevice> = case
        .gens
        .iter()
        .filter(|g| index[&g.bus] != slack_bus)
        .map(|g| PvDevice { bus: index[&g.bus], p_net: g.p_set, v_set: g.v_set, q_init: g.q_init })
        .collect();

    let comp_buses: Vec<usize> = match placement {
        CompensationPlacement::AllNonSlack => (0..n_bus).filter(|&i| i != slack_bus).collect(),
        CompensationPlacement::PqOnly => case
            .buses
            .iter()
            .enumerate()
            .filter(|(_, b)| b.btype == BusType::Pq)
            .map(|(i, _)| i)
            .collect(),
    };

    let bounds = case.buses.iter().map(|b| VoltageBounds { v_min: b.v_min, v_max: b.v_max }).collect();
    let layout = VariableLayout::base(n_bus, pv_devices.len(), comp_buses.len());
    let v_init_real = case.buses.iter().map(|b| b.v_mag_init * b.v_ang_init.cos()).collect();
    let v_init_imag = case.buses.iter().map(|b| b.v_mag_init * b.v_ang_init.sin()).collect();

    Ok(CircuitModel {
        n_bus,
        bus_ids: case.buses.iter().map(|b| b.id).collect(),
        y_lin,
        pq_devices,
        pv_devices,
        slack,
        comp_buses,
        bounds,
        layout,
        v_init_real,
        v_init_imag,
    })
}

impl CircuitModel {
    /// Base-layout state initialized from the case voltages and generator
    /// setpoints, with zero slack and compensation currents.
    pub fn initial_state(&self, layout: VariableLayout) -> StateVector {
        let mut s = StateVector::zeros(layout);
        for i in 0..self.n_bus {
            s.data[layout.v_real() + i] = self.v_init_real[i];
            s.data[layout.v_imag() + i] = self.v_init_imag[i];
        }
        for (k, pv) in self.pv_devices.iter().enumerate() {
            s.data[layout.q_gen() + k] = pv.q_init;
        }
        s
    }
}

/// Current drawn by a constant-power load: S = V * conj(I) with S = p + jq.
pub fn pq_injection_current(
    p: f64,
    q: f64,
    v_real: f64,
    v_imag: f64,
) -> Result<(f64, f64), ModelError> {
    let d = v_real * v_real + v_imag * v_imag;
    if d < 1e-24 {
        return Err(ModelError::Singularity(0));
    }
    Ok(((p * v_real + q * v_imag) / d, (p * v_imag - q * v_real) / d))
}

/// First partials of the load current wrt (v_real, v_imag, q).
/// Returns rows (dIr/dvr, dIr/dvi, dIi/dvr, dIi/dvi, dIr/dq, dIi/dq).
fn pq_current_partials(p: f64, q: f64, vr: f64, vi: f64) -> (f64, f64, f64, f64, f64, f64) {
    let w = Complex64::new(vr, -vi);
    let c1 = -Complex64::new(p, -q) / (w * w);
    let dq = -Complex64::i() / w;
    (c1.re, c1.im, c1.im, -c1.re, dq.re, dq.im)
}

fn check_state(model: &CircuitModel, state: &StateVector) -> Result<(), ModelError> {
    // n_comp == 0 is a valid layout for any model: plain power flow with the
    // compensation variables absent.
    if state.layout.n_bus != model.n_bus
        || state.layout.n_pv != model.pv_devices.len()
        || (state.layout.n_comp != model.comp_buses.len() && state.layout.n_comp != 0)
    {
        return Err(ModelError::Invalid("state layout does not match model".into()));
    }
    if state.data.len() != state.layout.n_vars() {
        return Err(ModelError::StateLength {
            got: state.data.len(),
            expected: state.layout.n_vars(),
        });
    }
    Ok(())
}

/// KCL residuals (real rows then imaginary rows per bus), PV magnitude rows
/// `vr^2 + vi^2 - v_set^2`, the two slack voltage pins, and, when the layout
/// carries `v_sq`, the defining rows `vr^2 + vi^2 - v_sq`.
pub fn kcl_residual(model: &CircuitModel, state: &StateVector) -> Result<Vec<f64>, ModelError> {
    check_state(model, state)?;
    let lay = state.layout;
    let n = model.n_bus;
    let vr = state.v_real();
    let vi = state.v_imag();
    let mut r = vec![0.0; lay.n_eq_rows()];

    for &(i, j, y) in &model.y_lin {
        r[lay.row_kcl_real() + i] += y.re * vr[j] - y.im * vi[j];
        r[lay.row_kcl_imag() + i] += y.im * vr[j] + y.re * vi[j];
    }
    for dev in &model.pq_devices {
        let (ir, ii) = pq_injection_current(dev.p, dev.q, vr[dev.bus], vi[dev.bus])
            .map_err(|_| ModelError::Singularity(dev.bus))?;
        r[lay.row_kcl_real() + dev.bus] += ir;
        r[lay.row_kcl_imag() + dev.bus] += ii;
    }
    for (k, dev) in model.pv_devices.iter().enumerate() {
        let q = state.q_gen()[k];
        let (ir, ii) = pq_injection_current(dev.p_net, q, vr[dev.bus], vi[dev.bus])
            .map_err(|_| ModelError::Singularity(dev.bus))?;
        r[lay.row_kcl_real() + dev.bus] -= ir;
        r[lay.row_kcl_imag() + dev.bus] -= ii;
        r[lay.row_pv() + k] = vr[dev.bus] * vr[dev.bus] + vi[dev.bus] * vi[dev.bus]
            - dev.v_set * dev.v_set;
    }
    let sb = model.slack.bus;
    r[lay.row_kcl_real() + sb] -= state.i_slack()[0];
    r[lay.row_kcl_imag() + sb] -= state.i_slack()[1];
    r[lay.row_slack()] = vr[sb] - model.slack.v_real_set;
    r[lay.row_slack() + 1] = vi[sb] - model.slack.v_imag_set;

    if lay.n_comp > 0 {
        for (k, &b) in model.comp_buses.iter().enumerate() {
            if let Some(nr) = state.n_real() {
                r[lay.row_kcl_real() + b] -= nr[k];
            }
            r[lay.row_kcl_imag() + b] -= state.n_imag()[k];
        }
    }
    if let (Some(row0), Some(vsq)) = (lay.row_vsq(), state.v_sq()) {
        for i in 0..n {
            r[row0 + i] = vr[i] * vr[i] + vi[i] * vi[i] - vsq[i];
        }
    }
    Ok(r)
}

/// Analytic Jacobian of [`kcl_residual`] over all layout variables. The
/// sparsity pattern depends only on the model and layout.
pub fn jacobian(model: &CircuitModel, state: &StateVector) -> Result<CooMatrix, ModelError> {
    check_state(model, state)?;
    let lay = state.layout;
    let n = model.n_bus;
    let vr = state.v_real();
    let vi = state.v_imag();
    let mut jac = CooMatrix::with_capacity(
        lay.n_eq_rows(),
        lay.n_vars(),
        4 * model.y_lin.len() + 8 * model.pq_devices.len() + 14 * model.pv_devices.len() + 8 + 3 * n,
    );

    for &(i, j, y) in &model.y_lin {
        jac.push(lay.row_kcl_real() + i, lay.v_real() + j, y.re);
        jac.push(lay.row_kcl_real() + i, lay.v_imag() + j, -y.im);
        jac.push(lay.row_kcl_imag() + i, lay.v_real() + j, y.im);
        jac.push(lay.row_kcl_imag() + i, lay.v_imag() + j, y.re);
    }
    for dev in &model.pq_devices {
        let b = dev.bus;
        if vr[b] * vr[b] + vi[b] * vi[b] < 1e-24 {
            return Err(ModelError::Singularity(b));
        }
        let (rr, ri, ir, ii, _, _) = pq_current_partials(dev.p, dev.q, vr[b], vi[b]);
        jac.push(lay.row_kcl_real() + b, lay.v_real() + b, rr);
        jac.push(lay.row_kcl_real() + b, lay.v_imag() + b, ri);
        jac.push(lay.row_kcl_imag() + b, lay.v_real() + b, ir);
        jac.push(lay.row_kcl_imag() + b, lay.v_imag() + b, ii);
    }
    for (k, dev) in model.pv_devices.iter().enumerate() {
        let b = dev.bus;
        if vr[b] * vr[b] + vi[b] * vi[b] < 1e-24 {
            return Err(ModelError::Singularity(b));
        }
        let q = state.q_gen()[k];
        let (rr, ri, ir, ii, qr, qi) = pq_current_partials(dev.p_net, q, vr[b], vi[b]);
        jac.push(lay.row_kcl_real() + b, lay.v_real() + b, -rr);
        jac.push(lay.row_kcl_real() + b, lay.v_imag() + b, -ri);
        jac.push(lay.row_kcl_imag() + b, lay.v_real() + b, -ir);
        jac.push(lay.row_kcl_imag() + b, lay.v_imag() + b, -ii);
        jac.push(lay.row_kcl_real() + b, lay.q_gen() + k, -qr);
        jac.push(lay.row_kcl_imag() + b, lay.q_gen() + k, -qi);
        jac.push(lay.row_pv() + k, lay.v_real() + b, 2.0 * vr[b]);
        jac.push(lay.row_pv() + k, lay.v_imag() + b, 2.0 * vi[b]);
    }
    let sb = model.slack.bus;
    jac.push(lay.row_kcl_real() + sb, lay.i_slack(), -1.0);
    jac.push(lay.row_kcl_imag() + sb, lay.i_slack() + 1, -1.0);
    jac.push(lay.row_slack(), lay.v_real() + sb, 1.0);
    jac.push(lay.row_slack() + 1, lay.v_imag() + sb, 1.0);

    if lay.n_comp > 0 {
        for (k, &b) in model.comp_buses.iter().enumerate() {
            if let Some(o) = lay.n_real() {
                jac.push(lay.row_kcl_real() + b, o + k, -1.0);
            }
            jac.push(lay.row_kcl_imag() + b, lay.n_imag() + k, -1.0);
        }
    }
    if let (Some(row0), Some(col0)) = (lay.row_vsq(), lay.v_sq()) {
        for i in 0..n {
            jac.push(row0 + i, lay.v_real() + i, 2.0 * vr[i]);
            jac.push(row0 + i, lay.v_imag() + i, 2.0 * vi[i]);
            jac.push(row0 + i, col0 + i, -1.0);
        }
    }
    Ok(jac)
}

/// Hessian of `weights . kcl_residual(state)` wrt the layout variables,
/// emitted with both symmetric triangles. Only the device currents, PV
/// magnitude rows and `v_sq` defining rows are nonlinear.
pub fn weighted_residual_hessian(
    model: &CircuitModel,
    state: &StateVector,
    weights: &[f64],
) -> Result<CooMatrix, ModelError> {
    check_state(model, state)?;
    let lay = state.layout;
    if weights.len() != lay.n_eq_rows() {
        return Err(ModelError::Invalid(format!(
            "weight vector length {} does not match {} residual rows",
            weights.len(),
            lay.n_eq_rows()
        )));
    }
    let vr = state.v_real();
    let vi = state.v_imag();
    let mut h = CooMatrix::new(lay.n_vars(), lay.n_vars());

    for dev in &model.pq_devices {
        let wr = weights[lay.row_kcl_real() + dev.bus];
        let wi = weights[lay.row_kcl_imag() + dev.bus];
        if wr != 0.0 || wi != 0.0 {
            add_device_hessian(&mut h, lay, vr, vi, dev.bus, dev.p, dev.q, wr, wi, 1.0)?;
        }
    }
    for (k, dev) in model.pv_devices.iter().enumerate() {
        let b = dev.bus;
        let wr = weights[lay.row_kcl_real() + b];
        let wi = weights[lay.row_kcl_imag() + b];
        let q = state.q_gen()[k];
        if wr != 0.0 || wi != 0.0 {
            add_device_hessian(&mut h, lay, vr, vi, b, dev.p_net, q, wr, wi, -1.0)?;
            // Cross terms with q: d2I/dq dW = j/W^2, so
            // d2I/dq dvr = j/W^2 and d2I/dq dvi = 1/W^2.
            let w = Complex64::new(vr[b], -vi[b]);
            let u = Complex64::new(1.0, 0.0) / (w * w);
            let ju = Complex64::i() * u;
            let hqr = -(wr * ju.re + wi * ju.im);
            let hqi = -(wr * u.re + wi * u.im);
            let cq = lay.q_gen() + k;
            let cvr = lay.v_real() + b;
            let cvi = lay.v_imag() + b;
            h.push(cq, cvr, hqr);
            h.push(cvr, cq, hqr);
            h.push(cq, cvi, hqi);
            h.push(cvi, cq, hqi);
        }
        let wp = weights[lay.row_pv() + k];
        if wp != 0.0 {
            h.push(lay.v_real() + b, lay.v_real() + b, 2.0 * wp);
            h.push(lay.v_imag() + b, lay.v_imag() + b, 2.0 * wp);
        }
    }
    if let Some(row0) = lay.row_vsq() {
        for i in 0..model.n_bus {
            let wv = weights[row0 + i];
            if wv != 0.0 {
                h.push(lay.v_real() + i, lay.v_real() + i, 2.0 * wv);
                h.push(lay.v_imag() + i, lay.v_imag() + i, 2.0 * wv);
            }
        }
    }
    Ok(h)
}

/// Load current second derivatives wrt W = conj(V):
/// d2I/dW2 = 2(p - jq)/W^3, with dW/dvr = 1, dW/dvi = -j.
#[allow(clippy::too_many_arguments)]
fn add_device_hessian(
    h: &mut CooMatrix,
    lay: VariableLayout,
    vr: &[f64],
    vi: &[f64],
    bus: usize,
    p: f64,
    q: f64,
    wr: f64,
    wi: f64,
    sign: f64,
) -> Result<(), ModelError> {
    let w = Complex64::new(vr[bus], -vi[bus]);
    if w.norm_sqr() < 1e-24 {
        return Err(ModelError::Singularity(bus));
    }
    let c2 = 2.0 * Complex64::new(p, -q) / (w * w * w);
    let hrr = sign * (wr * c2.re + wi * c2.im);
    let hri = sign * (wr * c2.im - wi * c2.re);
    let hii = sign * (-wr * c2.re - wi * c2.im);
    let cvr = lay.v_real() + bus;
    let cvi = lay.v_imag() + bus;
    h.push(cvr, cvr, hrr);
    h.push(cvr, cvi, hri);
    h.push(cvi, cvr, hri);
    h.push(cvi, cvi, hii);
    Ok(())
}

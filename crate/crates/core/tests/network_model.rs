use gridiag_core::case_io::{parse_matpower, scale_load, to_per_unit, NetworkCase, Status};
use gridiag_core::network_model::{
    build_model, jacobian, kcl_residual, pq_injection_current, CompensationPlacement,
    StateVector, VariableLayout,
};
use num_complex::Complex64;
use std::path::PathBuf;

fn load_case(name: &str) -> NetworkCase {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../cases").join(name);
    to_per_unit(&parse_matpower(&std::fs::read_to_string(path).unwrap()).unwrap()).unwrap()
}

const TWOBUS: &str = "\
function mpc = twobus
mpc.baseMVA = 100;
mpc.bus = [
\t1\t3\t0\t0\t0\t0\t1\t1.0\t0\t135\t1\t1.1\t0.9;
\t2\t1\t50\t20\t0\t0\t1\t1.0\t0\t135\t1\t1.1\t0.9;
];
mpc.gen = [
\t1\t0\t0\t100\t-100\t1.0\t100\t1\t250\t0;
];
mpc.branch = [
\t1\t2\t0.01\t0.1\t0\t250\t250\t250\t0\t0\t1\t-360\t360;
];
";

fn twobus_case() -> NetworkCase {
    to_per_unit(&parse_matpower(TWOBUS).unwrap()).unwrap()
}

fn y_at(model: &gridiag_core::network_model::CircuitModel, r: usize, c: usize) -> Complex64 {
    model
        .y_lin
        .iter()
        .find(|&&(i, j, _)| i == r && j == c)
        .map(|&(_, _, y)| y)
        .unwrap_or_default()
}

#[test]
fn two_bus_admittance_stamps() {
    let model = build_model(&twobus_case(), CompensationPlacement::AllNonSlack).unwrap();
    let y_series = Complex64::new(1.0, 0.0) / Complex64::new(0.01, 0.1);
    let off = y_at(&model, 0, 1);
    assert!((off + y_series).norm() < 1e-14, "off-diagonal must be -1/(r+jx), got {off}");
    assert!((y_at(&model, 0, 0) - y_series).norm() < 1e-14);
    assert!((y_at(&model, 1, 1) - y_series).norm() < 1e-14);
    assert_eq!(y_at(&model, 0, 1), y_at(&model, 1, 0));
}

#[test]
fn out_of_service_branch_not_stamped() {
    let case = twobus_case();
    let on = build_model(&case, CompensationPlacement::AllNonSlack).unwrap();

    let mut with_off = case.clone();
    let mut extra = case.branches[0].clone();
    extra.r = 0.05;
    extra.x = 0.5;
    extra.status = Status::Off;
    with_off.branches.push(extra);
    let model = build_model(&with_off, CompensationPlacement::AllNonSlack).unwrap();
    assert_eq!(y_at(&model, 0, 1), y_at(&on, 0, 1));

    let mut with_on = case.clone();
    let mut extra = case.branches[0].clone();
    extra.r = 0.05;
    extra.x = 0.5;
    with_on.branches.push(extra);
    let both = build_model(&with_on, CompensationPlacement::AllNonSlack).unwrap();
    assert!((y_at(&both, 0, 1) - y_at(&on, 0, 1)).norm() > 1e-3);
}

#[test]
fn case30_pattern_is_structurally_symmetric() {
    let model = build_model(&load_case("case30.m"), CompensationPlacement::AllNonSlack).unwrap();
    assert_eq!(model.n_bus, 30);
    let pattern: std::collections::BTreeSet<(usize, usize)> =
        model.y_lin.iter().map(|&(r, c, _)| (r, c)).collect();
    for &(r, c) in &pattern {
        assert!(pattern.contains(&(c, r)), "missing transpose entry for ({r}, {c})");
    }
}

#[test]
fn injection_current_examples() {
    assert_eq!(pq_injection_current(1.0, 0.0, 1.0, 0.0).unwrap(), (1.0, 0.0));
    assert_eq!(pq_injection_current(0.0, 0.0, 0.7, -0.3).unwrap(), (0.0, 0.0));

    let (ir, ii) = pq_injection_current(0.5, 0.2, 0.95, -0.05).unwrap();
    assert!((ir - 0.513812154696133).abs() < 1e-14);
    assert!((ii - -0.237569060773481).abs() < 1e-14);

    assert!(pq_injection_current(0.5, 0.2, 0.0, 0.0).is_err());
}

#[test]
fn injection_current_satisfies_power_identity() {
    let (p, q) = (0.37, -0.21);
    let v = Complex64::new(1.04, -0.11);
    let (ir, ii) = pq_injection_current(p, q, v.re, v.im).unwrap();
    let s = v * Complex64::new(ir, ii).conj();
    assert!((s.re - p).abs() < 1e-15);
    assert!((s.im - q).abs() < 1e-15);
}

#[test]
fn flat_start_mismatch_matches_hand_kcl() {
    let model = build_model(&twobus_case(), CompensationPlacement::AllNonSlack).unwrap();
    let layout = VariableLayout::base(model.n_bus, 0, 0);
    let mut state = StateVector::zeros(layout);
    state.data[0] = 1.0;
    state.data[1] = 1.0;
    let r = kcl_residual(&model, &state).unwrap();
    // Equal voltages put no current in the branch, so the only KCL entries
    // are the load currents drawn at bus 2.
    assert_eq!(r[layout.row_kcl_real()], 0.0);
    assert!((r[layout.row_kcl_real() + 1] - 0.5).abs() < 1e-15);
    assert_eq!(r[layout.row_kcl_imag()], 0.0);
    assert!((r[layout.row_kcl_imag() + 1] - -0.2).abs() < 1e-15);
    assert_eq!(r[layout.row_slack()], 0.0);
    assert_eq!(r[layout.row_slack() + 1], 0.0);
}

#[test]
fn solved_power_flow_state_has_tiny_residual() {
    use gridiag_core::nlp_core::SolverOptions;
    use gridiag_core::reference_oracles::{newton_power_flow, PowerFlowStatus};

    let model = build_model(&load_case("case30.m"), CompensationPlacement::AllNonSlack).unwrap();
    let pf = newton_power_flow(&model, &SolverOptions::default());
    assert_eq!(pf.status, PowerFlowStatus::Converged);

    let layout = VariableLayout::base(model.n_bus, model.pv_devices.len(), 0);
    let mut state = StateVector::zeros(layout);
    state.data[..model.n_bus].copy_from_slice(&pf.v_real);
    state.data[model.n_bus..2 * model.n_bus].copy_from_slice(&pf.v_imag);
    state.data[layout.q_gen()..layout.q_gen() + layout.n_pv].copy_from_slice(&pf.q_gen);
    state.data[layout.i_slack()] = pf.i_slack[0];
    state.data[layout.i_slack() + 1] = pf.i_slack[1];

    let r = kcl_residual(&model, &state).unwrap();
    let inf = r.iter().cloned().fold(0.0f64, |a, b| a.max(b.abs()));
    assert!(inf < 1e-8, "residual at the power flow solution is {inf}");
}

#[test]
fn compensation_enters_its_own_bus_row_negated() {
    let model = build_model(&twobus_case(), CompensationPlacement::AllNonSlack).unwrap();
    let layout = VariableLayout::base(model.n_bus, 0, model.comp_buses.len());
    let mut state = StateVector::zeros(layout);
    state.data[0] = 1.02;
    state.data[1] = 0.98;
    state.data[2] = -0.04;
    state.data[3] = 0.03;

    let base = kcl_residual(&model, &state).unwrap();
    let delta = 0.375;
    let k = 0;
    let bus = model.comp_buses[k];
    state.data[layout.n_real().unwrap() + k] += delta;
    let bumped = kcl_residual(&model, &state).unwrap();

    for row in 0..layout.n_eq_rows() {
        let expect = if row == layout.row_kcl_real() + bus { -delta } else { 0.0 };
        assert!(
            (bumped[row] - base[row] - expect).abs() < 1e-15,
            "row {row} moved by {}",
            bumped[row] - base[row]
        );
    }
}

#[test]
fn squared_magnitude_rows_and_derivatives() {
    let model = build_model(&twobus_case(), CompensationPlacement::AllNonSlack).unwrap();
    let layout = VariableLayout {
        n_bus: model.n_bus,
        n_pv: 0,
        n_comp: model.comp_buses.len(),
        real_comp: true,
        with_t: false,
        with_vsq: true,
    };
    let mut state = StateVector::zeros(layout);
    state.data[0] = 1.01;
    state.data[1] = 0.97;
    state.data[2] = 0.02;
    state.data[3] = -0.06;
    let v0 = layout.v_sq().unwrap();
    state.data[v0] = 0.9;
    state.data[v0 + 1] = 1.1;

    let r = kcl_residual(&model, &state).unwrap();
    let row0 = layout.row_vsq().unwrap();
    assert!((r[row0] - (1.01f64.powi(2) + 0.02f64.powi(2) - 0.9)).abs() < 1e-15);
    assert!((r[row0 + 1] - (0.97f64.powi(2) + 0.06f64.powi(2) - 1.1)).abs() < 1e-15);

    let jac = jacobian(&model, &state).unwrap().to_dense();
    assert_eq!(jac[row0][0], 2.0 * 1.01);
    assert_eq!(jac[row0][layout.v_imag()], 2.0 * 0.02);
    assert_eq!(jac[row0][v0], -1.0);
}

#[test]
fn lossless_unloaded_network_is_exactly_balanced() {
    let lossless = TWOBUS.replace("\t1\t2\t0.01\t0.1", "\t1\t2\t0\t0.1");
    let case = to_per_unit(&parse_matpower(&lossless).unwrap()).unwrap();
    let unloaded = scale_load(&case, 0.0).unwrap();
    let model = build_model(&unloaded, CompensationPlacement::AllNonSlack).unwrap();

    let layout = VariableLayout::base(model.n_bus, 0, 0);
    let mut state = StateVector::zeros(layout);
    state.data[0] = 1.0;
    state.data[1] = 1.0;
    let r = kcl_residual(&model, &state).unwrap();
    assert!(r.iter().all(|&v| v == 0.0), "residual {r:?}");
}

#[test]
fn bus_order_permutation_relabels_rows_and_columns() {
    let three = "\
function mpc = three
mpc.baseMVA = 100;
mpc.bus = [
\t10\t3\t0\t0\t0\t0\t1\t1.0\t0\t135\t1\t1.1\t0.9;
\t20\t1\t40\t10\t0\t0\t1\t1.0\t0\t135\t1\t1.1\t0.9;
\t30\t1\t25\t5\t0\t0\t1\t1.0\t0\t135\t1\t1.1\t0.9;
];
mpc.gen = [
\t10\t0\t0\t100\t-100\t1.0\t100\t1\t250\t0;
];
mpc.branch = [
\t10\t20\t0.01\t0.08\t0.02\t250\t250\t250\t0\t0\t1\t-360\t360;
\t20\t30\t0.02\t0.15\t0\t250\t250\t250\t0\t0\t1\t-360\t360;
];
";
    let case_a = to_per_unit(&parse_matpower(three).unwrap()).unwrap();
    let mut case_b = case_a.clone();
    case_b.buses.reverse();

    let model_a = build_model(&case_a, CompensationPlacement::AllNonSlack).unwrap();
    let model_b = build_model(&case_b, CompensationPlacement::AllNonSlack).unwrap();

    // perm[i] is the model-B index of the bus at model-A index i.
    let perm: Vec<usize> = model_a
        .bus_ids
        .iter()
        .map(|id| model_b.bus_ids.iter().position(|x| x == id).unwrap())
        .collect();

    let layout = VariableLayout::base(3, 0, 0);
    let voltages = [(1.01, -0.02), (0.97, -0.09), (0.94, -0.12)];
    let mut state_a = StateVector::zeros(layout);
    let mut state_b = StateVector::zeros(layout);
    for i in 0..3 {
        state_a.data[i] = voltages[i].0;
        state_a.data[3 + i] = voltages[i].1;
        state_b.data[perm[i]] = voltages[i].0;
        state_b.data[3 + perm[i]] = voltages[i].1;
    }
    state_a.data[layout.i_slack()] = 0.3;
    state_a.data[layout.i_slack() + 1] = -0.1;
    state_b.data[layout.i_slack()] = 0.3;
    state_b.data[layout.i_slack() + 1] = -0.1;

    let row_map: Vec<usize> = {
        let mut m = vec![0; layout.n_eq_rows()];
        for i in 0..3 {
            m[i] = perm[i];
            m[3 + i] = 3 + perm[i];
        }
        m[layout.row_slack()] = layout.row_slack();
        m[layout.row_slack() + 1] = layout.row_slack() + 1;
        m
    };
    let col_map: Vec<usize> = {
        let mut m = vec![0; layout.n_vars()];
        for i in 0..3 {
            m[i] = perm[i];
            m[3 + i] = 3 + perm[i];
        }
        m[layout.i_slack()] = layout.i_slack();
        m[layout.i_slack() + 1] = layout.i_slack() + 1;
        m
    };

    let r_a = kcl_residual(&model_a, &state_a).unwrap();
    let r_b = kcl_residual(&model_b, &state_b).unwrap();
    for row in 0..layout.n_eq_rows() {
        assert!(
            (r_a[row] - r_b[row_map[row]]).abs() < 1e-12,
            "row {row}: {} vs {}",
            r_a[row],
            r_b[row_map[row]]
        );
    }

    let j_a = jacobian(&model_a, &state_a).unwrap().to_dense();
    let j_b = jacobian(&model_b, &state_b).unwrap().to_dense();
    for i in 0..layout.n_eq_rows() {
        for j in 0..layout.n_vars() {
            assert!(
                (j_a[i][j] - j_b[row_map[i]][col_map[j]]).abs() < 1e-12,
                "jacobian entry ({i}, {j})"
            );
        }
    }
}

#[test]
fn jacobian_pattern_constant_across_states() {
    use rand::{Rng, SeedableRng};
    let model = build_model(&twobus_case(), CompensationPlacement::AllNonSlack).unwrap();
    let layout = VariableLayout {
        n_bus: model.n_bus,
        n_pv: 0,
        n_comp: model.comp_buses.len(),
        real_comp: true,
        with_t: true,
        with_vsq: true,
    };
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
    let mut reference: Option<Vec<(usize, usize)>> = None;
    for _ in 0..10 {
        let mut state = StateVector::zeros(layout);
        for v in state.data.iter_mut() {
            *v = rng.gen_range(0.5..1.2);
        }
        let pattern = jacobian(&model, &state).unwrap().pattern();
        match &reference {
            None => reference = Some(pattern),
            Some(p) => assert_eq!(&pattern, p),
        }
    }
}

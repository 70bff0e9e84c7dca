mod common;

use adp_lqr::observer::Parameterization;
use adp_lqr::plant::LtiPlant;
use adp_lqr::riccati::spectral_abscissa;
use adp_lqr::sim::{log_decay_rate, observation_error, simulate, ExplorationSignal};
use common::*;
use nalgebra::{dmatrix, dvector, DVector};

fn terminal_state(plant: &LtiPlant, signal: &ExplorationSignal, dt: f64) -> DVector<f64> {
    let traj = simulate(
        plant,
        None,
        signal,
        &dvector![1.0, -0.5],
        &DVector::zeros(0),
        0.0,
        2.0,
        dt,
    )
    .unwrap();
    traj.x.column(traj.len() - 1).into_owned()
}

#[test]
fn rk4_error_shrinks_at_fourth_order() {
    let plant = LtiPlant::new(
        dmatrix![0.0, 1.0; -4.0, -0.4],
        dmatrix![0.0; 1.0],
        dmatrix![1.0, 0.0],
    )
    .unwrap();
    let signal = ExplorationSignal::sum_of_sines(1, 2.0, &[1.5, 3.0]);
    let dt = 0.04;
    let reference = terminal_state(&plant, &signal, dt / 16.0);
    let coarse = (terminal_state(&plant, &signal, dt) - &reference).norm();
    let fine = (terminal_state(&plant, &signal, dt / 2.0) - &reference).norm();
    assert!(coarse / fine >= 8.0, "error ratio {}", coarse / fine);
}

#[test]
fn repeated_runs_are_bit_identical() {
    let plant = example2_plant();
    let par = Parameterization::build(&plant, &unit_cost(), &example2_poly(), None).unwrap();
    let run = || {
        simulate(
            &plant,
            Some(&par.compensator),
            &example2_signal(),
            &dvector![1.0, 1.0],
            &DVector::zeros(4),
            0.0,
            4.75,
            2.5e-4,
        )
        .unwrap()
    };
    assert_eq!(run(), run());
}

#[test]
fn example1_observation_error_small_at_collection_start() {
    let plant = example1_plant();
    let par = Parameterization::build(&plant, &unit_cost(), &example1_poly(), None).unwrap();
    let traj = simulate(
        &plant,
        Some(&par.compensator),
        &example1_signal(par.n_zeta()),
        &DVector::from_element(4, 1.0),
        &DVector::zeros(par.n_zeta()),
        0.0,
        3.0,
        1e-3,
    )
    .unwrap();
    let err = observation_error(&traj, &par.m).unwrap();
    let i = traj.index_of(3.0).unwrap();
    assert!(err[i] < 1e-2 * traj.x.column(i).norm());
}

#[test]
fn example2_observation_error_small_at_collection_start() {
    let plant = example2_plant();
    let par = Parameterization::build(&plant, &unit_cost(), &example2_poly(), None).unwrap();
    let traj = simulate(
        &plant,
        Some(&par.compensator),
        &example2_signal(),
        &dvector![1.0, 1.0],
        &DVector::zeros(4),
        0.0,
        4.0,
        2.5e-4,
    )
    .unwrap();
    let err = observation_error(&traj, &par.m).unwrap();
    let i = traj.index_of(4.0).unwrap();
    assert!(err[i] < 1e-2 * traj.x.column(i).norm());
    // before the sinusoid starts the input is pure feedback
    let k0 = dmatrix![34.0, -6.0, -21.8, -11.8];
    let j = traj.index_of(2.0).unwrap();
    assert!((traj.u[(0, j)] - (k0 * traj.zeta.column(j))[0]).abs() < 1e-12);
}

#[test]
fn observation_error_decays_at_observer_rate() {
    // late enough for the slowest observer mode to dominate, early enough
    // to stay well above roundoff
    for (plant, poly, x0, (from, to)) in [
        (
            example1_plant(),
            example1_poly(),
            DVector::from_element(4, 1.0),
            (3.0, 4.5),
        ),
        (
            example2_plant(),
            example2_poly(),
            dvector![1.0, 1.0],
            (2.0, 3.0),
        ),
    ] {
        let par = Parameterization::build(&plant, &unit_cost(), &poly, None).unwrap();
        let traj = simulate(
            &plant,
            Some(&par.compensator),
            &ExplorationSignal::zero(1),
            &x0,
            &DVector::zeros(par.n_zeta()),
            0.0,
            to,
            1e-4,
        )
        .unwrap();
        let err = observation_error(&traj, &par.m).unwrap();
        let (a, b) = (traj.index_of(from).unwrap(), traj.index_of(to).unwrap());
        let rate = log_decay_rate(&traj.times[a..=b], &err[a..=b]).unwrap();
        let expected = spectral_abscissa(&(&plant.a - &par.l * &plant.c)).unwrap();
        assert!(
            (rate - expected).abs() < 0.1,
            "fitted {rate}, expected {expected}"
        );
    }
}

/// Starting on the invariant subspace `x = M zeta` keeps the error at
/// integration level.
#[test]
fn consistent_start_stays_consistent() {
    let plant = example2_plant();
    let par = Parameterization::build(&plant, &unit_cost(), &example2_poly(), None).unwrap();
    let zeta0 = dvector![0.3, -0.2, 0.1, 0.4];
    let x0 = &par.m * &zeta0;
    let traj = simulate(
        &plant,
        Some(&par.compensator),
        &example2_signal(),
        &x0,
        &zeta0,
        0.0,
        5.0,
        2.5e-4,
    )
    .unwrap();
    let err = observation_error(&traj, &par.m).unwrap();
    let scale = traj.x.amax().max(1.0);
    assert!(
        err.iter().all(|e| *e < 1e-9 * scale),
        "max error {:e}",
        err.iter().cloned().fold(0.0, f64::max)
    );
}

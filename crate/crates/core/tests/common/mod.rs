#![allow(dead_code)]

use adp_lqr::observer::{ObserverPoly, Parameterization};
use adp_lqr::plant::{CostSpec, LtiPlant};
use adp_lqr::riccati::solve_are_sign;
use adp_lqr::sim::{simulate, ExplorationSignal, Trajectory};
use adp_lqr::stacks::{DataStacks, SampleGrid, StackKind};
use nalgebra::{dmatrix, DMatrix, DVector};

pub fn example1_plant() -> LtiPlant {
    LtiPlant::new(
        dmatrix![
            -0.0665, 8.0, 0.0, 0.0;
            0.0, -3.663, 3.663, 0.0;
            -6.86, 0.0, -13.736, -13.736;
            0.6, 0.0, 0.0, 0.0
        ],
        dmatrix![0.0; 0.0; 13.736; 0.0],
        dmatrix![1.0, 0.0, 0.0, 0.0],
    )
    .unwrap()
}

pub fn example1_poly() -> ObserverPoly {
    ObserverPoly::from_roots(&[-5.0, -6.0, -7.0, -8.0]).unwrap()
}

pub fn example1_signal(n_zeta: usize) -> ExplorationSignal {
    ExplorationSignal::sum_of_sines(1, 20.0, &[1.0, 7.0, 10.0, 16.0])
        .with_zeta_gain(DMatrix::zeros(1, n_zeta))
}

pub fn example2_plant() -> LtiPlant {
    LtiPlant::new(
        dmatrix![-11.0, 30.0; -4.0, 11.0],
        dmatrix![10.0; 4.0],
        dmatrix![1.0, 0.0],
    )
    .unwrap()
}

pub fn example2_poly() -> ObserverPoly {
    ObserverPoly::from_roots(&[-6.0, -7.0]).unwrap()
}

/// Feedback from t = 0, sinusoid switched on at t = 4.
pub fn example2_signal() -> ExplorationSignal {
    ExplorationSignal::sum_of_sines(1, 20.0, &[3.0])
        .with_zeta_gain(dmatrix![34.0, -6.0, -21.8, -11.8])
        .with_onset(4.0)
}

pub fn unit_cost() -> CostSpec {
    CostSpec::unit_siso()
}

/// Everything one published example run needs.
pub struct ExampleRun {
    pub plant: LtiPlant,
    pub par: Parameterization,
    pub traj: Trajectory,
    pub grid: SampleGrid,
    pub stacks: DataStacks,
    /// `M' P* M`
    pub p_zeta: DMatrix<f64>,
    /// `K* M`
    pub k_zeta: DMatrix<f64>,
}

fn example_run(
    plant: LtiPlant,
    poly: ObserverPoly,
    signal: impl FnOnce(usize) -> ExplorationSignal,
    dt: f64,
    grid: SampleGrid,
) -> ExampleRun {
    let cost = unit_cost();
    let par = Parameterization::build(&plant, &cost, &poly, None).unwrap();
    let nz = par.n_zeta();
    let x0 = DVector::from_element(plant.n(), 1.0);
    let traj = simulate(
        &plant,
        Some(&par.compensator),
        &signal(nz),
        &x0,
        &DVector::zeros(nz),
        0.0,
        grid.end(),
        dt,
    )
    .unwrap();
    let stacks = DataStacks::build(&traj, &grid, &cost.r, StackKind::Output).unwrap();
    let sol = solve_are_sign(&plant.are_problem(&cost).unwrap()).unwrap();
    let p_zeta = par.m.transpose() * &sol.p * &par.m;
    let k_zeta = &sol.k * &par.m;
    ExampleRun {
        plant,
        par,
        traj,
        grid,
        stacks,
        p_zeta,
        k_zeta,
    }
}

/// Window [3, 7.5] with 45 intervals, dt 1e-3.
pub fn example1_run() -> ExampleRun {
    let grid = SampleGrid::uniform(3.0, 0.1, 45).unwrap();
    example_run(
        example1_plant(),
        example1_poly(),
        example1_signal,
        1e-3,
        grid,
    )
}

/// Window [4, 4.75] with 15 intervals, dt 2.5e-4.
pub fn example2_run() -> ExampleRun {
    let grid = SampleGrid::uniform(4.0, 0.05, 15).unwrap();
    example_run(
        example2_plant(),
        example2_poly(),
        |_| example2_signal(),
        2.5e-4,
        grid,
    )
}

/// `blockdiag(I_3, 0)`
pub fn example2_pbar0() -> DMatrix<f64> {
    let mut p0 = DMatrix::identity(4, 4);
    p0[(3, 3)] = 0.0;
    p0
}

mod common;

use adp_lqr::linalg::{min_sym_eigenvalue, norm2, normalized_error};
use adp_lqr::observer::Parameterization;
use adp_lqr::riccati::{
    cost_matrix, kleinman_pi, model_vi, solve_are_sign, spectral_abscissa, AreProblem,
    BoundSchedule, CostMatrix, StepSize, ViSchedule,
};
use common::*;
use nalgebra::{dmatrix, DMatrix};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn assert_close(actual: &DMatrix<f64>, expected: &DMatrix<f64>, tol: f64) {
    assert_eq!(actual.shape(), expected.shape());
    let diff = (actual - expected).amax();
    assert!(
        diff <= tol,
        "max deviation {diff:e} > {tol:e}\nactual {actual:.5}\nexpected {expected:.5}"
    );
}

#[test]
fn example1_oracle_matches_printed_values() {
    let plant = example1_plant();
    let prob = plant.are_problem(&unit_cost()).unwrap();
    let sol = solve_are_sign(&prob).unwrap();
    let p_printed = dmatrix![
        0.3135, 0.2864, 0.0509, 0.1912;
        0.2864, 0.4156, 0.0903, 0.0789;
        0.0509, 0.0903, 0.0210, 0.0;
        0.1912, 0.0789, 0.0, 1.1868
    ];
    let k_printed = dmatrix![-0.6994, -1.2404, -0.2890, 0.0];
    assert_close(&sol.p, &p_printed, 5e-4);
    assert_close(&sol.k, &k_printed, 5e-4);
    assert!(prob.residual_norm(&sol.p) < 1e-10);
}

#[test]
fn example2_oracle_matches_printed_values() {
    let prob = example2_plant().are_problem(&unit_cost()).unwrap();
    let sol = solve_are_sign(&prob).unwrap();
    assert_close(&sol.p, &dmatrix![0.5905, -1.5; -1.5, 4.5], 5e-4);
    assert_close(&sol.k, &dmatrix![0.0950, -3.0], 5e-4);
}

/// `M' P* M` solves the ancillary Riccati equation and `K* M` is its gain.
#[test]
fn lifted_solution_solves_ancillary_riccati() {
    for (plant, poly) in [
        (example1_plant(), example1_poly()),
        (example2_plant(), example2_poly()),
    ] {
        let cost = unit_cost();
        let sol = solve_are_sign(&plant.are_problem(&cost).unwrap()).unwrap();
        let par = Parameterization::build(&plant, &cost, &poly, None).unwrap();
        let anc = &par.ancillary;
        let p_zeta = par.m.transpose() * &sol.p * &par.m;
        let residual = anc.a_zeta.transpose() * &p_zeta + &p_zeta * &anc.a_zeta + &anc.q_zeta
            - &p_zeta
                * &anc.b_zeta
                * cost.r.clone().try_inverse().unwrap()
                * anc.b_zeta.transpose()
                * &p_zeta;
        assert!(
            norm2(&residual) <= 1e-6 * (1.0 + norm2(&p_zeta)),
            "residual {:e}",
            norm2(&residual)
        );
        let k_zeta = -(anc.b_zeta.transpose() * &p_zeta);
        assert!(normalized_error(&k_zeta, &(&sol.k * &par.m)) < 1e-10);
    }
}

fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.gen_range(-1.0..1.0))
}

fn random_orthogonal(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
    random_matrix(rng, n, n).qr().q()
}

/// Stabilizable and detectable but unobservable: a Hurwitz block hidden
/// from the cost, mixed by an orthogonal change of basis. Redrawn until the
/// solution is moderately scaled, so absolute eigenvalue bounds stay above
/// roundoff.
fn detectable_instance(rng: &mut ChaCha8Rng) -> (AreProblem, DMatrix<f64>, DMatrix<f64>) {
    loop {
        let (prob, k0) = draw_detectable(rng);
        let p = solve_are_sign(&prob).unwrap().p;
        if norm2(&p) <= 100.0 {
            return (prob, k0, p);
        }
    }
}

fn draw_detectable(rng: &mut ChaCha8Rng) -> (AreProblem, DMatrix<f64>) {
    let n1 = rng.gen_range(2..=3);
    let n2 = rng.gen_range(1..=2);
    let n = n1 + n2;
    let m = rng.gen_range(1..=2);
    let mut a = DMatrix::zeros(n, n);
    a.view_mut((0, 0), (n1, n1))
        .copy_from(&(random_matrix(rng, n1, n1) * 2.0));
    let hidden = random_matrix(rng, n2, n2);
    let shift = spectral_abscissa(&hidden).unwrap() + rng.gen_range(0.2..1.0);
    let hidden = hidden - DMatrix::identity(n2, n2) * shift;
    a.view_mut((n1, n1), (n2, n2)).copy_from(&hidden);
    let b = random_matrix(rng, n, m);
    let mut c = DMatrix::zeros(1, n);
    c.view_mut((0, 0), (1, n1))
        .copy_from(&random_matrix(rng, 1, n1));
    let t = random_orthogonal(rng, n);
    let a = &t * a * t.transpose();
    let b = &t * b;
    let c = c * t.transpose();
    let q = c.transpose() * &c;
    let r = DMatrix::identity(m, m) * rng.gen_range(0.5..2.0);
    let prob = AreProblem::new(a.clone(), b.clone(), q, r.clone()).unwrap();
    // a stabilizing start from a positive-definite weight
    let start = AreProblem::new(a, b, DMatrix::identity(n, n), r).unwrap();
    let k0 = solve_are_sign(&start).unwrap().k;
    (prob, k0)
}

#[test]
fn kleinman_properties_on_detectable_instances() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    for trial in 0..50 {
        let (prob, k0, p_star) = detectable_instance(&mut rng);
        let hist = kleinman_pi(&prob, &k0, 1e-8, 100).unwrap();
        assert!(hist.converged, "trial {trial} did not converge");
        for rec in &hist.records {
            assert!(
                rec.closed_loop_abscissa.unwrap() < 0.0,
                "trial {trial} step {}",
                rec.k
            );
            assert!(
                min_sym_eigenvalue(&(&rec.p - &p_star)) >= -1e-8,
                "trial {trial} step {}",
                rec.k
            );
        }
        for pair in hist.records.windows(2) {
            let drop = &pair[0].p - &pair[1].p;
            assert!(
                min_sym_eigenvalue(&drop) >= -1e-8,
                "trial {trial} step {}",
                pair[1].k
            );
        }
        assert!((&hist.final_p - &p_star).amax() <= 1e-6, "trial {trial}");
    }
}

#[test]
fn model_vi_from_singular_starts_on_ancillary_problem() {
    let plant = example2_plant();
    let cost = unit_cost();
    let par = Parameterization::build(&plant, &cost, &example2_poly(), None).unwrap();
    let anc = &par.ancillary;
    let prob = AreProblem::new(
        anc.a_zeta.clone(),
        anc.b_zeta.clone(),
        anc.q_zeta.clone(),
        cost.r.clone(),
    )
    .unwrap();
    let sol = solve_are_sign(&plant.are_problem(&cost).unwrap()).unwrap();
    let p_zeta = par.m.transpose() * &sol.p * &par.m;
    let sched = ViSchedule::new(
        StepSize::Harmonic {
            scale: 5.0,
            offset: 1.0,
        },
        BoundSchedule::Linear { base: 1000.0 },
        1e-3,
        200_000,
    );
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for trial in 0..10 {
        let nz = anc.a_zeta.nrows();
        // one null direction, as in the published start; lower ranks leave
        // the PSD cone at second order along directions Q_zeta cannot see
        let rank = nz - 1;
        let factor = random_matrix(&mut rng, nz, rank);
        let p0 = &factor * factor.transpose();
        assert!(min_sym_eigenvalue(&p0).abs() < 1e-12);
        let hist = model_vi(&prob, &p0, &sched).unwrap();
        assert!(hist.converged, "trial {trial} after {} resets", hist.resets);
        let err = normalized_error(&hist.final_p, &p_zeta);
        assert!(err <= 1e-3, "trial {trial}: error {err:e}");
    }
}

/// Lyapunov-based cost against a direct quadrature of the defining integral.
#[test]
fn cost_matrix_matches_integral() {
    let prob = AreProblem::new(
        dmatrix![0.0, 1.0; -2.0, -3.0],
        dmatrix![0.0; 1.0],
        dmatrix![1.0, 0.0; 0.0, 2.0],
        dmatrix![0.5],
    )
    .unwrap();
    let k = dmatrix![-1.0, -0.5];
    let v = match cost_matrix(&prob, &k).unwrap() {
        CostMatrix::Finite(v) => v,
        CostMatrix::Infinite => panic!("gain is stabilizing"),
    };
    let f = prob.closed_loop(&k);
    let w = &prob.q + k.transpose() * &prob.r * &k;
    let h = 1e-3;
    let steps = 30_000;
    let step = (&f * h).exp();
    let mut phi = DMatrix::<f64>::identity(2, 2);
    let mut integral = DMatrix::<f64>::zeros(2, 2);
    for i in 0..=steps {
        let weight = if i == 0 || i == steps {
            1.0
        } else if i % 2 == 1 {
            4.0
        } else {
            2.0
        };
        integral += phi.transpose() * &w * &phi * (weight * h / 3.0);
        phi = &step * phi;
    }
    assert!((&v - &integral).amax() < 1e-6, "{v} vs {integral}");

    let unstable = dmatrix![5.0, 0.0];
    assert_eq!(cost_matrix(&prob, &unstable).unwrap(), CostMatrix::Infinite);
}

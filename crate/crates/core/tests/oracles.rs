use std::f64::consts::{PI, SQRT_2};

use approx::assert_relative_eq;
use bitempo_core::classical::{
    admissibility_determinant, build_constraint_matrix, characteristic_field_1d, classify, consistency_residual_1d,
    curl_residual, integrate_rank_one_1d, normalized_determinant, orbit_relation_1d, parallel_fields_3d,
    ForceTensorField, GaugeConnection, VelocityPair, Verdict,
};
use bitempo_core::continuity::{
    charges, ehrenfest_limit_residual, separability_check, separable_average, CurrentField,
};
use bitempo_core::dirac::{
    branch_operator, current_expansion, dirac_current, effective_mode_mass, gamma_set, hermiticity_defect,
    positivity_check, solve_plane_wave, CurrentVariant,
};
use bitempo_core::matrix::{determinant, null_space, vec_norm};
use bitempo_core::quantum::{
    angle_and_width, check_generator_consistency, element_characteristic, evolve_element, force_expectation,
    mean_position, rotate_times, unrotate_times, uncertainty_visibility, variance_trace, StateVector,
    TwoTimeQuantumSystem, UncertaintyBudget, Visibility,
};
use bitempo_core::{central_difference, Grid2T, SmallMatrix, TimePlanePoint, Tolerances};
use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn cx(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn cofactor_det(m: &[Vec<f64>]) -> f64 {
    if m.len() == 1 {
        return m[0][0];
    }
    (0..m.len())
        .map(|c| {
            let minor: Vec<Vec<f64>> =
                m[1..].iter().map(|r| r.iter().enumerate().filter(|&(k, _)| k != c).map(|(_, v)| *v).collect()).collect();
            let sign = if c % 2 == 0 { 1.0 } else { -1.0 };
            sign * m[0][c] * cofactor_det(&minor)
        })
        .sum()
}

/// Symmetric quadratic force with random coefficients.
fn random_polynomial(rng: &mut ChaCha8Rng, d: usize) -> ForceTensorField {
    let coef: Vec<f64> = (0..d * 3 * (1 + 2 * d)).map(|_| rng.gen_range(-1.0..1.0)).collect();
    ForceTensorField::new(d, true, move |x| {
        (0..d)
            .map(|i| {
                let c = |jk: usize, term: usize| coef[(i * 3 + jk) * (1 + 2 * d) + term];
                let entry = |jk: usize| {
                    c(jk, 0) + (0..d).map(|m| c(jk, 1 + m) * x[m] + c(jk, 1 + d + m) * x[m] * x[m]).sum::<f64>()
                };
                let off = entry(1);
                [[entry(0), off], [off, entry(2)]]
            })
            .collect()
    })
    .unwrap()
}

fn rank_one_nonlinear(d: usize, c: [f64; 2]) -> ForceTensorField {
    ForceTensorField::rank_one(d, c, move |x| {
        (0..d).map(|i| -x[i] - 0.3 * x[(i + 1) % d].powi(3) + 0.2 * x[i] * x[(i + 1) % d]).collect()
    })
    .unwrap()
}

#[test]
fn central_difference_of_sine() {
    let d = central_difference(f64::sin, 0.0, 1e-3).unwrap();
    assert!((d - 1.0).abs() < 1e-6);
}

#[test]
fn determinant_matches_cofactor_expansion() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..20 {
        let rows: Vec<Vec<f64>> = (0..6).map(|_| (0..6).map(|_| rng.gen_range(-2.0..2.0)).collect()).collect();
        let det = determinant(&SmallMatrix::from_rows(&rows).unwrap()).unwrap();
        let oracle = cofactor_det(&rows);
        assert_relative_eq!(det, oracle, max_relative = 1e-10);
    }
}

#[test]
fn consistency_of_diagonal_linear_force() {
    let f = ForceTensorField::new(1, true, |x| vec![[[x[0], 0.0], [0.0, x[0]]]]).unwrap();
    let r = consistency_residual_1d(&f, &GaugeConnection::zero(), 0.3, &Tolerances::default()).unwrap();
    assert!((r - 1.0).abs() < 1e-9);
}

#[test]
fn rank_one_orbit_and_field_in_one_dimension() {
    let tol = Tolerances::default();
    let f = ForceTensorField::rank_one(1, [1.0, 2.0], |x| vec![-x[0]]).unwrap();
    let rel = orbit_relation_1d(&f, &GaugeConnection::zero(), 0.7, &VelocityPair::one_dim(0.5, 1.0), &tol).unwrap();
    assert!((rel.phi - 0.25).abs() < 1e-9 && (rel.ratio_squared - 0.25).abs() < 1e-15 && rel.residual < 1e-9);
    let field = characteristic_field_1d(&f, 0.7, &tol).unwrap();
    assert!((field.vectors[0][0] - 8f64.sqrt()).abs() < 1e-8);
    assert!((field.vectors[0][1] + SQRT_2).abs() < 1e-8);
    let u = field.unit(0).unwrap();
    assert!((-u[0] - u[1] * 2.0).abs() < 1e-9);
}

#[test]
fn rank_one_mixed_partial_equals_force() {
    let grid = Grid2T::square(0.0, 2.0, 21).unwrap();
    let s = integrate_rank_one_1d(|x| -x.sin(), [0.7, 1.3], 0.4, 0.2, &grid, &Tolerances::default()).unwrap();
    let traj = &s.trajectory;
    let h = 1e-3;
    for (_, _, t) in grid.interior().step_by(7) {
        let x = |a: f64, b: f64| traj.position(t.t1 + a, t.t2 + b);
        let mixed = (x(h, h) - x(h, -h) - x(-h, h) + x(-h, -h)) / (4.0 * h * h);
        let force = 0.7 * 1.3 * -traj.position(t.t1, t.t2).sin();
        assert!((mixed - force).abs() < 1e-4, "{mixed} vs {force}");
    }
}

#[test]
fn rank_one_kernel_contains_solution_directions() {
    let tol = Tolerances::default();
    let c = [0.8, -1.7];
    let f = rank_one_nonlinear(2, c);
    let m = build_constraint_matrix(&f, &[0.3, -0.4], &tol).unwrap();
    for (u, w) in [(1.0, 0.0), (0.0, 1.0), (0.6, -2.0)] {
        let v = [c[0] * u, c[1] * u, c[0] * w, c[1] * w];
        assert!(vec_norm(&m.mul_vec(&v).unwrap()) < 1e-8 * m.frobenius_norm());
    }
    let det = admissibility_determinant(&f, &[0.3, -0.4], &tol).unwrap();
    assert!(det.abs() < 1e-10 * m.frobenius_norm().powi(4));
}

#[test]
fn generic_forces_have_full_rank() {
    let tol = Tolerances::default();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for d in [2, 3] {
        for _ in 0..20 {
            let f = random_polynomial(&mut rng, d);
            let x: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let m = build_constraint_matrix(&f, &x, &tol).unwrap();
            assert!(normalized_determinant(&m).unwrap().abs() > 1e-6);
            let report = classify(&f, &x, None, &tol).unwrap();
            assert_eq!(report.verdict, Verdict::NoTwoTimeMotion);
        }
    }
}

#[test]
fn rank_one_fields_are_parallel_to_c() {
    let tol = Tolerances::default();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for d in [2, 3] {
        for _ in 0..25 {
            let c = [rng.gen_range(0.2..2.0), rng.gen_range(-2.0..2.0)];
            let x: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let report = classify(&rank_one_nonlinear(d, c), &x, None, &tol).unwrap();
            assert_eq!(report.verdict, Verdict::EffectiveOneTime);
            let n = c[0].hypot(c[1]);
            for i in 0..d {
                let u = report.fields.unit(i).unwrap();
                assert!((u[0] * -c[0] / n - u[1] * c[1] / n).abs() < 1e-9);
            }
        }
    }
}

#[test]
fn three_dimensional_formulas_agree_or_report() {
    let tol = Tolerances::default();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..100 {
        let c = [rng.gen_range(0.2..2.0), rng.gen_range(-2.0..2.0)];
        let x: Vec<f64> = (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let pf = parallel_fields_3d(&rank_one_nonlinear(3, c), &x, &tol).unwrap();
        assert!(pf.agrees() && pf.orthogonality_residual < 1e-8 || !pf.discrepancies.is_empty());
    }
}

#[test]
fn curl_of_rotation_and_chain_rule() {
    let grid = Grid2T::square(-1.0, 1.0, 41).unwrap();
    let r = curl_residual(|t: TimePlanePoint| [t.t2, -t.t1], &grid).unwrap();
    assert!((r - 2.0).abs() < 1e-12);

    // field h(X(s)) (c2, -c1), with X(s) = sin s and h = square
    let c = [1.0, 2.0];
    let fine = Grid2T::square(0.0, 1.0, 1001).unwrap();
    let field = |t: TimePlanePoint| {
        let x = (c[0] * t.t1 + c[1] * t.t2).sin();
        [x * x * c[1], -x * x * c[0]]
    };
    let analytic = fine
        .interior()
        .map(|(_, _, t)| {
            let s = c[0] * t.t1 + c[1] * t.t2;
            (2.0 * s.sin() * s.cos() * -(c[0] * c[0] + c[1] * c[1])).abs()
        })
        .fold(0.0, f64::max);
    let r = curl_residual(field, &fine).unwrap();
    assert!((r - analytic).abs() < 1e-4);
}

#[test]
fn commutator_of_pauli_pair() {
    let o = cx(0.0, 0.0);
    let l = cx(1.0, 0.0);
    let sx = DMatrix::from_row_slice(2, 2, &[o, l, l, o]);
    let sz = DMatrix::from_row_slice(2, 2, &[l, o, o, -l]);
    assert_eq!(check_generator_consistency(&sx, &sz, 1e-12).unwrap().residual, 2.0);
    let shifted = &sz * cx(0.3, 0.0) + DMatrix::identity(2, 2) * cx(4.0, 0.0);
    assert_eq!(check_generator_consistency(&sz, &shifted, 1e-12).unwrap().residual, 0.0);
}

fn two_level() -> TwoTimeQuantumSystem {
    let o = cx(0.0, 0.0);
    let l = cx(1.0, 0.0);
    TwoTimeQuantumSystem::new(vec![0.0, 1.0], vec![0.0, 2.0], DMatrix::from_row_slice(2, 2, &[o, l, l, o])).unwrap()
}

#[test]
fn two_level_phase_and_direction() {
    let sys = two_level();
    let v = evolve_element(&sys, 1, 0, TimePlanePoint::new(2.0 * PI, 0.0), 1.0).unwrap();
    assert!((v - cx(1.0, 0.0)).norm() < 1e-12);
    let ec = element_characteristic(&sys, 1, 0).unwrap();
    assert_eq!(ec.field, [2.0, -1.0]);
    assert!((ec.norm - 5f64.sqrt()).abs() < 1e-15);
    assert!((ec.theta.cos() - 1.0 / 5f64.sqrt()).abs() < 1e-15);
    assert!(element_characteristic(&sys, 1, 1).unwrap().degenerate);
}

#[test]
fn elements_depend_on_first_rotated_time_only() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let sys = two_level();
    let ec = element_characteristic(&sys, 1, 0).unwrap();
    for _ in 0..50 {
        let tau1 = rng.gen_range(-5.0..5.0);
        let a = unrotate_times(&ec, (tau1, rng.gen_range(-5.0..5.0))).unwrap();
        let b = unrotate_times(&ec, (tau1, rng.gen_range(-5.0..5.0))).unwrap();
        let (va, vb) = (evolve_element(&sys, 1, 0, a, 1.0).unwrap(), evolve_element(&sys, 1, 0, b, 1.0).unwrap());
        assert!((va - vb).norm() < 1e-12);
        assert!((rotate_times(&ec, a).unwrap().0 - tau1).abs() < 1e-12);
    }
}

#[test]
fn two_level_variance_is_squared_sine() {
    let sys = two_level();
    let psi = StateVector::normalized(vec![cx(1.0, 0.0), cx(1.0, 0.0)]).unwrap();
    let grid = Grid2T::square(-2.0, 2.0, 17).unwrap();
    let trace = variance_trace(&sys, &psi, &grid, 1.0).unwrap();
    for (k, (_, _, t)) in grid.iter().enumerate() {
        assert!((trace.variance[k] - (t.t1 + 2.0 * t.t2).sin().powi(2)).abs() < 1e-12);
    }
    let diagonal = TwoTimeQuantumSystem::new(
        vec![0.0, 1.0],
        vec![0.0, 2.0],
        DMatrix::from_row_slice(2, 2, &[cx(0.3, 0.0), cx(0.0, 0.0), cx(0.0, 0.0), cx(-1.0, 0.0)]),
    )
    .unwrap();
    let eigen = variance_trace(&diagonal, &StateVector::basis(2, 1).unwrap(), &grid, 1.0).unwrap();
    assert!(eigen.variance.iter().all(|v| v.abs() < 1e-15));
}

#[test]
fn mean_position_obeys_force_operator() {
    let sys = two_level();
    let psi = StateVector::normalized(vec![cx(0.6, 0.0), cx(0.0, 0.8)]).unwrap();
    let at = TimePlanePoint::new(0.4, -0.3);
    let h = 1e-3;
    let m = |a: f64, b: f64| mean_position(&sys, &psi, TimePlanePoint::new(at.t1 + a, at.t2 + b), 1.0).unwrap().re;
    let d11 = (m(h, 0.0) - 2.0 * m(0.0, 0.0) + m(-h, 0.0)) / (h * h);
    let d12 = (m(h, h) - m(h, -h) - m(-h, h) + m(-h, -h)) / (4.0 * h * h);
    let d22 = (m(0.0, h) - 2.0 * m(0.0, 0.0) + m(0.0, -h)) / (h * h);
    for ((i, j), fd) in [((1, 1), d11), ((1, 2), d12), ((2, 1), d12), ((2, 2), d22)] {
        let f = force_expectation(&sys, &psi, (i, j), at, 1.0).unwrap();
        assert!((f.re - fd).abs() < 1e-4, "F_{i}{j}: {} vs {fd}", f.re);
    }
}

#[test]
fn visibility_and_angle_examples() {
    let budget = |t1: f64, t2: f64| UncertaintyBudget {
        d_e: [1.0, 2.0],
        dd_e: [0.1, 0.2],
        t: TimePlanePoint::new(t1, t2),
        hbar: 1.0,
    };
    assert_eq!(uncertainty_visibility(&budget(0.0, 0.0)).unwrap(), Visibility::Frozen);
    assert_eq!(uncertainty_visibility(&budget(2.0 * PI, 0.0)).unwrap(), Visibility::Oscillating);
    let a = angle_and_width(&budget(3.0, 4.0)).unwrap();
    assert!((a.cos_phi - 1.0 / (5.0 * 5f64.sqrt())).abs() < 1e-12);
    assert!((a.bound - 0.1).abs() < 1e-12);
    assert!(a.dphi_lowest_order <= a.bound);
}

#[test]
fn manufactured_currents() {
    let grid = Grid2T::square(0.0, 1.0, 41).unwrap().with_space(0.0, PI, 201).unwrap();
    // d1 j1 + d2 j2 - dx jx = 0 with j1 = sin x cos t2, jx = 0, j2 = 0: conserved Q1
    let j = CurrentField::from_fn(grid.clone(), |x, _, t2| [x.sin() * t2.cos(), 0.0, 0.0]).unwrap();
    let r = charges(&j, 1.0, 0.0, &Tolerances::default()).unwrap();
    assert!(r.dq1_residual < 1e-6);
    // j1 = t1^2 sin x / 2 violates conservation by the source t1 sin x
    let j = CurrentField::from_fn(grid, |x, t1, _| [0.5 * t1 * t1 * x.sin(), 0.0, 0.0]).unwrap();
    let r = charges(&j, 1.0, 0.0, &Tolerances::default()).unwrap();
    for (i, t1) in j.grid.t1.points().enumerate().skip(1).take(39) {
        // int dx int dt2 t1 sin x = 2 t1
        let expected = 2.0 * t1 * r.alpha;
        assert!((r.dq1[i - 1] - expected).abs() < 1e-4, "{} vs {expected}", r.dq1[i - 1]);
    }
}

#[test]
fn separability_and_averages() {
    let grid = Grid2T::square(0.0, 1.0, 21).unwrap().with_space(-1.0, 1.0, 21).unwrap();
    let sample = |f: &dyn Fn(f64, f64, f64) -> f64| -> Vec<f64> {
        grid.space.unwrap().points().flat_map(|x| grid.iter().map(move |(_, _, t)| (x, t))).map(|(x, t)| f(x, t.t1, t.t2)).collect()
    };
    // unit mass on [-1, 1] at every time
    let separable = sample(&|x, t1, t2| 0.5 + x * t1.cos() + x.powi(3) * t2.sin());
    assert!(separability_check(&separable, &grid, 1e-10).unwrap().passes);
    let product = sample(&|x, t1, t2| 1.0 + (1.0 + x * x) * t1 * t2);
    let report = separability_check(&product, &grid, 1e-10).unwrap();
    assert!(!report.passes && report.rms_residual > 1e-3);
    let avg = separable_average(&separable, &grid, |x| x, 1e-8).unwrap();
    assert!(avg.separability.relative_residual < 1e-8);
}

#[test]
fn ehrenfest_allowed_and_excluded() {
    let grid = Grid2T::square(0.0, 3.0, 61).unwrap();
    let force = |x: f64| -(x - 0.5);
    let allowed: Vec<f64> = grid.iter().map(|(_, _, t)| t.t1.cos() + 0.5).collect();
    let r = ehrenfest_limit_residual(&allowed, &grid, [Some(&force), None], 1e-8).unwrap();
    assert!(r.max_cross_defect() < 1e-3 && r.constant[1]);
    let excluded: Vec<f64> = grid.iter().map(|(_, _, t)| t.t1.cos() + t.t2.cos()).collect();
    let r = ehrenfest_limit_residual(&excluded, &grid, [Some(&force), None], 1e-8).unwrap();
    assert!(r.max_cross_defect() > 1e-2);
}

#[test]
fn plane_wave_kernels_match_null_space() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..20 {
        let m: f64 = rng.gen_range(0.0..1.0);
        let (k1, k2): (f64, f64) = (rng.gen_range(m..2.0), rng.gen_range(-2.0..2.0));
        let k3 = (k1 * k1 + k2 * k2 - m * m).sqrt();
        let sol = solve_plane_wave([k1, k2, k3], m, 1e-12).unwrap();
        for (sign, spinor) in [(1.0, sol.psi_plus), (-1.0, sol.psi_minus)] {
            let op = branch_operator(sol.k, m, sign);
            let rows = [[op[(0, 0)], op[(0, 1)]], [op[(1, 0)], op[(1, 1)]]];
            let sm = SmallMatrix::from_rows(&rows).unwrap();
            assert!(determinant(&sm).unwrap().norm() < 1e-12 * (1.0 + k1 * k1 + k2 * k2));
            let kernel = null_space(&sm, &Tolerances { abs_tol: 1e-8, ..Tolerances::default() });
            assert_eq!(kernel.len(), 1);
            let overlap = kernel[0][0].conj() * spinor[0] + kernel[0][1].conj() * spinor[1];
            assert!((overlap.norm() - 1.0).abs() < 1e-10);
        }
    }
}

#[test]
fn clifford_and_current_expansion() {
    assert_eq!(gamma_set().clifford_defect(), 0.0);
    assert_eq!(gamma_set().anticommutator(2, 2)[(0, 0)], cx(-2.0, 0.0));
    // real spinors at the origin: definition equals expansion with cos(0) = 1
    let sol = solve_plane_wave([1.0, 0.0, 0.0], 1.0, 1e-12).unwrap();
    assert!(sol.psi_plus.iter().chain(&sol.psi_minus).all(|c| c.im == 0.0));
    let j = dirac_current(&sol, [0.0; 3], CurrentVariant::Imaginary);
    let e = current_expansion(&sol);
    for mu in 0..3 {
        assert!((j[mu] - e.diag[mu] - e.cross[mu]).abs() < 1e-15);
    }
}

#[test]
fn positive_branch_alone_has_no_cosine_in_time_components_when_real() {
    let base = solve_plane_wave([1.0, 0.0, 0.0], 1.0, 1e-12).unwrap();
    let sol = base.with_amplitudes(cx(1.0, 0.0), cx(0.0, 0.0));
    let e = current_expansion(&sol);
    assert_eq!(e.diag[0], 0.0);
    let grid = Grid2T::square(-2.0, 2.0, 21).unwrap();
    let report = positivity_check(&sol, &grid).unwrap();
    assert!(report.holds[0]);
    assert!(report.min_density_sampled[0].abs() < 1e-15);
}

#[test]
fn hermiticity_defect_tracks_k2() {
    // g1 g3 is Hermitian, so a pure k3 wave stays Hermitian
    assert_eq!(hermiticity_defect(&[(0.0, 1.0)], 0.0), 0.0);
    assert!((hermiticity_defect(&[(0.7, 1.0)], 0.5) - 1.4).abs() < 1e-15);
}

#[test]
fn mode_mass_table() {
    let m = |w: f64| effective_mode_mass(1.0, w, 1.0, 1.0).unwrap();
    assert_eq!(m(1.0).m_eff, 0.0);
    assert!((m(0.6).m_eff - 0.8).abs() < 1e-15);
    assert!(m(1.2).tachyonic && !m(0.9).tachyonic);
    assert!(m(0.0).tau.is_infinite());
}

//! One runner per command: parameters in, result section and tables out.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use bitempo_core::classical::{
    classify, integrate_rank_one_1d_with, normalized_consistency_residual_1d, surface_orbit_residual,
    surface_orthogonality_residual, GaugeConnection, IntegratorOptions,
};
use bitempo_core::continuity::{charges, ehrenfest_limit_residual, separability_check, CurrentField};
use bitempo_core::dirac::{
    conservation_residual, dirac_current, dirac_density_separability, effective_mode_mass, gamma_set,
    hermiticity_defect, positivity_check, shell_residual, solve_plane_wave, CurrentVariant,
};
use bitempo_core::quantum::{
    angle_and_width, element_characteristic, evolve_element, spacing_statistics, uncertainty_visibility_with,
    variance_trace, StateVector, TwoTimeQuantumSystem, UncertaintyBudget, VisibilityMargins,
};
use bitempo_core::{Grid2T, TimePlanePoint};
use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{
    ClassicalCheck, ClassicalIntegrate, ContinuityParams, DiracParams, MassSpectrum, Params, QuantumFluct,
    UncertaintyParams,
};
use crate::report::{Cell, Table};
use crate::CliError;

pub struct Outcome {
    pub results: Value,
    pub tables: Vec<Table>,
}

fn to_value<T: Serialize>(v: &T) -> Result<Value, CliError> {
    serde_json::to_value(v).map_err(|e| CliError::Internal(e.to_string()))
}

pub fn execute(params: &Params) -> Result<Outcome, CliError> {
    match params {
        Params::ClassicalCheck(p) => classical_check(p),
        Params::ClassicalIntegrate(p) => classical_integrate(p),
        Params::QuantumFluct(p) => quantum_fluct(p),
        Params::Uncertainty(p) => uncertainty(p),
        Params::Continuity(p) => continuity(p),
        Params::Dirac(p) => dirac(p),
        Params::MassSpectrum(p) => mass_spectrum(p),
    }
}

fn classical_check(p: &ClassicalCheck) -> Result<Outcome, CliError> {
    let f = p.force.build()?;
    let tol = p.tolerances.build();
    let mut counts: BTreeMap<String, usize> = BTreeMap::new();
    let mut points = Vec::with_capacity(p.points.len());
    for x in &p.points {
        let report = classify(&f, x, None, &tol)?;
        let verdict = to_value(&report.verdict)?;
        *counts.entry(verdict.as_str().unwrap_or_default().to_string()).or_default() += 1;
        let mut entry = json!({ "x": x, "report": to_value(&report)? });
        if f.dim() == 1 {
            entry["normalized_consistency_residual"] =
                json!(normalized_consistency_residual_1d(&f, &GaugeConnection::zero(), x[0], &tol)?);
        }
        points.push(entry);
    }
    Ok(Outcome {
        results: json!({ "dimension": f.dim(), "verdict_counts": counts, "points": points }),
        tables: Vec::new(),
    })
}

fn classical_integrate(p: &ClassicalIntegrate) -> Result<Outcome, CliError> {
    let g = p.force.potential()?;
    let c = p.force.c.unwrap_or_default();
    let grid = p.grid.build()?;
    let tol = p.tolerances.build();
    let base = IntegratorOptions::default();
    let opts = p.integrator.as_ref().map_or(base, |s| IntegratorOptions {
        initial_step: s.initial_step.unwrap_or(base.initial_step),
        max_halvings: s.max_halvings.unwrap_or(base.max_halvings),
        blowup_bound: s.blowup_bound.unwrap_or(base.blowup_bound),
    });
    let surface = integrate_rank_one_1d_with(move |x| g(&[x])[0], c, p.x0, p.v0, &grid, &tol, &opts)?;
    let f = p.force.build()?;
    // residuals are undefined where the characteristic field degenerates
    let residual = |r: bitempo_core::Result<f64>| match r {
        Ok(v) => json!({ "value": v }),
        Err(e) => json!({ "unavailable": e.to_string() }),
    };
    let (lo, hi) = surface.x.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(*v), b.max(*v)));
    let results = json!({
        "step": surface.step,
        "halvings": surface.halvings,
        "last_change": surface.last_change,
        "x_min": lo,
        "x_max": hi,
        "orthogonality_residual": residual(surface_orthogonality_residual(&surface, &f, &tol)),
        "orbit_residual": residual(surface_orbit_residual(&surface, &f, &tol)),
    });
    let rows = grid
        .iter()
        .enumerate()
        .map(|(k, (_, _, t))| vec![t.t1.into(), t.t2.into(), surface.x[k].into(), surface.p1[k].into(), surface.p2[k].into()])
        .collect();
    Ok(Outcome { results, tables: vec![Table { name: "surface", columns: vec!["t1", "t2", "x", "p1", "p2"], rows }] })
}

fn complex_matrix(re: &[Vec<f64>], im: Option<&Vec<Vec<f64>>>) -> DMatrix<Complex64> {
    let n = re.len();
    DMatrix::from_fn(n, n, |r, c| Complex64::new(re[r][c], im.map_or(0.0, |m| m[r][c])))
}

fn quantum_fluct(p: &QuantumFluct) -> Result<Outcome, CliError> {
    let sys = TwoTimeQuantumSystem::new(p.e1.clone(), p.e2.clone(), complex_matrix(&p.x0_re, p.x0_im.as_ref()))?;
    let amps: Vec<Complex64> = (0..p.psi_re.len())
        .map(|k| Complex64::new(p.psi_re[k], p.psi_im.as_ref().map_or(0.0, |v| v[k])))
        .collect();
    let input_norm = amps.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
    let psi = StateVector::normalized(amps)?;
    let grid = p.grid.build()?;
    let trace = variance_trace(&sys, &psi, &grid, p.hbar)?;

    let n = sys.n_levels();
    let mut elements = Vec::new();
    let mut worst_rel = 0.0_f64;
    let centre = TimePlanePoint::new(0.5 * (grid.t1.min + grid.t1.max), 0.5 * (grid.t2.min + grid.t2.max));
    let h = 1e-3;
    for a in 0..n {
        for b in 0..a {
            elements.push(to_value(&element_characteristic(&sys, a, b)?)?);
            let s = sys.spacing(a, b)?;
            let exact = evolve_element(&sys, a, b, centre, p.hbar)? * (-s.d1 * s.d2 / (p.hbar * p.hbar));
            if exact.norm() == 0.0 {
                continue;
            }
            let x = |u: f64, v: f64| evolve_element(&sys, a, b, TimePlanePoint::new(centre.t1 + u, centre.t2 + v), p.hbar);
            let fd = (x(h, h)? - x(h, -h)? - x(-h, h)? + x(-h, -h)?) / (4.0 * h * h);
            worst_rel = worst_rel.max((fd - exact).norm() / exact.norm());
        }
    }
    let stats = match spacing_statistics(&sys, &psi) {
        Ok(s) => to_value(&s)?,
        Err(e) => json!({ "unavailable": e.to_string() }),
    };
    let max_var = trace.variance.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let results = json!({
        "n_levels": n,
        "input_state_norm": input_norm,
        "max_imaginary_mean": trace.max_imaginary_mean(),
        "min_variance": trace.min_variance(),
        "max_variance": max_var,
        "mixed_partial_max_relative_error": worst_rel,
        "spacing_statistics": stats,
        "elements": elements,
    });
    let rows = grid
        .iter()
        .enumerate()
        .map(|(k, (_, _, t))| {
            vec![
                t.t1.into(),
                t.t2.into(),
                trace.mean[k].re.into(),
                trace.mean[k].im.into(),
                trace.second_moment[k].into(),
                trace.variance[k].into(),
            ]
        })
        .collect();
    Ok(Outcome {
        results,
        tables: vec![Table {
            name: "variance",
            columns: vec!["t1", "t2", "mean_re", "mean_im", "second_moment", "variance"],
            rows,
        }],
    })
}

fn uncertainty(p: &UncertaintyParams) -> Result<Outcome, CliError> {
    let margins = p.margins.as_ref().map_or_else(VisibilityMargins::default, |m| VisibilityMargins {
        frozen_below: m.frozen_below,
        oscillating_at: m.oscillating_at,
    });
    let mut out = Vec::with_capacity(p.budgets.len());
    for b in &p.budgets {
        let budget = UncertaintyBudget { d_e: b.d_e, dd_e: b.dd_e, t: TimePlanePoint::new(b.t[0], b.t[1]), hbar: p.hbar };
        let angle = match angle_and_width(&budget) {
            Ok(a) => to_value(&a)?,
            Err(e) => json!({ "unavailable": e.to_string() }),
        };
        out.push(json!({
            "budget": to_value(&budget)?,
            "phase_over_2pi": budget.phase() / (2.0 * PI),
            "visibility": to_value(&uncertainty_visibility_with(&budget, &margins)?)?,
            "angle": angle,
        }));
    }
    Ok(Outcome { results: json!({ "margins": to_value(&margins)?, "budgets": out }), tables: Vec::new() })
}

fn continuity(p: &ContinuityParams) -> Result<Outcome, CliError> {
    let grid = p.grid.build()?;
    let tol = p.tolerances.build();
    let c = p.current.clone();
    let ax = -(c.amplitude[0] * c.omega[0] + c.amplitude[1] * c.omega[1]) / c.kappa;
    let current = move |x: f64, t1: f64, t2: f64| {
        let phase = c.kappa * x - c.omega[0] * t1 - c.omega[1] * t2;
        let w = phase.cos();
        [c.background[0] + c.amplitude[0] * w + c.source * t1, c.background[1] + c.amplitude[1] * w, ax * w]
    };
    let on = |g: &Grid2T| -> Result<_, CliError> {
        Ok(charges(&CurrentField::from_fn(g.clone(), current)?, p.alpha, p.beta, &tol)?)
    };
    let base = on(&grid)?;
    let fine = on(&grid.refined())?;
    let ratio = |a: f64, b: f64| if b > 0.0 { Value::from(a / b) } else { Value::Null };

    let density = match &p.density {
        Some(d) => {
            let space = *grid.space_axis()?;
            let rho: Vec<f64> = space
                .points()
                .flat_map(|x| grid.iter().map(move |(_, _, t)| (x, t)))
                .map(|(x, t)| 0.5 + x * t.t1.cos() + x.powi(3) * t.t2.sin() + d.product * (1.0 + x * x) * t.t1 * t.t2)
                .collect();
            to_value(&separability_check(&rho, &grid, 1e-10)?)?
        }
        None => Value::Null,
    };
    let ehrenfest = match &p.ehrenfest {
        Some(e) => {
            let time = Grid2T { space: None, ..grid.clone() };
            let mean: Vec<f64> = time
                .iter()
                .map(|(_, _, t)| t.t1.cos() + if e.excluded { t.t2.cos() } else { e.offset })
                .collect();
            let offset = e.offset;
            let force = move |x: f64| -(x - offset);
            match ehrenfest_limit_residual(&mean, &time, [Some(&force), None], 1e-8) {
                Ok(r) => json!({ "report": to_value(&r)?, "max_cross_defect": r.max_cross_defect() }),
                Err(err) => json!({ "unavailable": err.to_string() }),
            }
        }
        None => Value::Null,
    };
    let results = json!({
        "a_x": ax,
        "alpha": base.alpha,
        "beta": base.beta,
        "dq1_residual": base.dq1_residual,
        "dq2_residual": base.dq2_residual,
        "dq1_residual_refined": fine.dq1_residual,
        "dq2_residual_refined": fine.dq2_residual,
        "dq1_refinement_ratio": ratio(base.dq1_residual, fine.dq1_residual),
        "dq2_refinement_ratio": ratio(base.dq2_residual, fine.dq2_residual),
        "warnings": base.warnings,
        "density_separability": density,
        "ehrenfest": ehrenfest,
    });
    let q1 = grid.t1.points().zip(&base.q1).map(|(t, q)| vec![Cell::from(t), Cell::from(*q)]).collect();
    let q2 = grid.t2.points().zip(&base.q2).map(|(t, q)| vec![Cell::from(t), Cell::from(*q)]).collect();
    Ok(Outcome {
        results,
        tables: vec![
            Table { name: "charge_q1", columns: vec!["t1", "q1"], rows: q1 },
            Table { name: "charge_q2", columns: vec!["t2", "q2"], rows: q2 },
        ],
    })
}

fn dirac(p: &DiracParams) -> Result<Outcome, CliError> {
    let variant = match p.variant.as_deref() {
        Some("real") => CurrentVariant::Real,
        _ => CurrentVariant::Imaginary,
    };
    let sol = solve_plane_wave(p.k, p.m, p.shell_tol)?.with_amplitudes(
        Complex64::new(p.plus[0], p.plus[1]),
        Complex64::new(p.minus[0], p.minus[1]),
    );
    let grid = p.grid.build()?;
    let conservation = conservation_residual(&sol, &grid, p.fd_step, variant)?;
    let conservation_refined = conservation_residual(&sol, &grid, p.fd_step / 2.0, variant)?;
    let positivity = positivity_check(&sol, &grid)?;
    let density = dirac_density_separability(&sol, &grid, p.alpha, p.beta, 1e-8)?;
    let samples = if p.hermiticity_samples.is_empty() { vec![[p.k[1], p.k[2]]] } else { p.hermiticity_samples.clone() };
    let samples: Vec<(f64, f64)> = samples.iter().map(|s| (s[0], s[1])).collect();
    let spinor = |s: &[Complex64; 2]| json!([[s[0].re, s[0].im], [s[1].re, s[1].im]]);
    let results = json!({
        "variant": to_value(&variant)?,
        "shell_residual": shell_residual(p.k, p.m),
        "psi_plus": spinor(&sol.psi_plus),
        "psi_minus": spinor(&sol.psi_minus),
        "kernel_residual": sol.kernel_residual(),
        "clifford_defect": gamma_set().clifford_defect(),
        "conservation_residual": conservation,
        "conservation_residual_refined": conservation_refined,
        "positivity": to_value(&positivity)?,
        "density_relative_residual": density.density.relative_residual,
        "density_separable": density.density.passes,
        "total_relative_residual": density.total_fit.relative_residual,
        "total_separable": density.total_fit.passes,
        "dq1_residual": density.charges.dq1_residual,
        "dq2_residual": density.charges.dq2_residual,
        "charge_warnings": density.charges.warnings,
        "hermiticity_defect": hermiticity_defect(&samples, p.m),
    });
    let space = *grid.space_axis()?;
    let mut rows = Vec::with_capacity(grid.nx() * grid.len());
    for (kx, x) in space.points().enumerate() {
        for (k, (_, _, t)) in grid.iter().enumerate() {
            let j = dirac_current(&sol, [t.t1, t.t2, x], variant);
            let rho = density.rho[kx * grid.len() + k];
            rows.push(vec![x.into(), t.t1.into(), t.t2.into(), j[0].into(), j[1].into(), j[2].into(), rho.into()]);
        }
    }
    Ok(Outcome {
        results,
        tables: vec![Table { name: "current", columns: vec!["x", "t1", "t2", "j1", "j2", "j3", "rho"], rows }],
    })
}

fn mass_spectrum(p: &MassSpectrum) -> Result<Outcome, CliError> {
    let n = p.omega.n as usize;
    let mut rows = Vec::with_capacity(n);
    let (mut tachyonic, mut literal_mismatch, mut reduced_mismatch) = (0usize, Vec::new(), 0usize);
    let mut first_tachyonic = Value::Null;
    let mut massless = Vec::new();
    for i in 0..n {
        let omega = p.omega.min + (p.omega.max - p.omega.min) * i as f64 / (n - 1) as f64;
        let mm = effective_mode_mass(p.m, omega, p.hbar, p.c)?;
        if mm.tachyonic {
            tachyonic += 1;
            if first_tachyonic.is_null() {
                first_tachyonic = omega.into();
            }
        }
        if mm.m_eff_sq == 0.0 {
            massless.push(omega);
        }
        if !mm.consistent {
            literal_mismatch.push(omega);
        }
        if !mm.reduced_consistent {
            reduced_mismatch += 1;
        }
        rows.push(vec![
            omega.into(),
            mm.m_eff_sq.into(),
            mm.m_eff.into(),
            mm.tachyonic.into(),
            mm.tau.into(),
            mm.r.into(),
            mm.ctau_gt_r.into(),
            mm.consistent.into(),
            mm.reduced_consistent.into(),
        ]);
    }
    let results = json!({
        "points": n,
        "tachyonic_count": tachyonic,
        "first_tachyonic_omega": first_tachyonic,
        "massless_omegas": massless,
        "ctau_gt_r_mismatch_count": literal_mismatch.len(),
        "ctau_gt_r_mismatch_omegas": literal_mismatch,
        "reduced_ctau_gt_r_mismatch_count": reduced_mismatch,
    });
    Ok(Outcome {
        results,
        tables: vec![Table {
            name: "mass_spectrum",
            columns: vec![
                "omega",
                "m_eff_sq",
                "m_eff",
                "tachyonic",
                "tau",
                "r",
                "ctau_gt_r",
                "consistent",
                "reduced_consistent",
            ],
            rows,
        }],
    })
}

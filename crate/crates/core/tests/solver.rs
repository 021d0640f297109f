use std::f64::consts::PI;
use std::time::{Duration, Instant};

use mixdim::element::quadrature;
use mixdim::field::FieldEvaluator;
use mixdim::geometry::{build_cross_geometry, StratifiedGeometry};
use mixdim::harness::{relative_errors, FieldKind};
use mixdim::mesh::{build_mesh, BoundaryTag};
use mixdim::solver::{
    assemble_primal, interface_pressure_jump, primal_coercivity, recover_interface_flux, solve, solve_method,
    BoundaryCondition, ModelCoefficients,
};
use mixdim::spaces::Method;

fn benchmark(level: u32) -> (mixdim::mesh::MixedMesh, ModelCoefficients) {
    let g = build_cross_geometry(0.5, 0.5, 1e-3).unwrap();
    let c = ModelCoefficients::benchmark(&g);
    (build_mesh(&g, level).unwrap(), c)
}

fn with_normal_permeability(mut c: ModelCoefficients, kn: f64) -> ModelCoefficients {
    for k in &mut c.k_normal[4..] {
        *k = kn;
    }
    c
}

/// Series solution of `-lap p = 1` on the unit square with `p = 0` on the
/// boundary, and its flux `-grad p`.
fn poisson_series(x: f64, y: f64) -> (f64, [f64; 2]) {
    let mut p = 0.0;
    let mut u = [0.0; 2];
    for i in (1..300).step_by(2) {
        for j in (1..300).step_by(2) {
            let (a, b) = (i as f64 * PI, j as f64 * PI);
            let c = 16.0 / (PI * PI * (i * j) as f64 * (a * a + b * b));
            p += c * (a * x).sin() * (b * y).sin();
            u[0] -= c * a * (a * x).cos() * (b * y).sin();
            u[1] -= c * b * (a * x).sin() * (b * y).cos();
        }
    }
    (p, u)
}

#[test]
fn unit_square_rates_against_series_solution() {
    let g = StratifiedGeometry::unit_square();
    let mut c = ModelCoefficients::uniform(&g);
    for t in [
        BoundaryTag::Bottom,
        BoundaryTag::Top,
        BoundaryTag::Left,
        BoundaryTag::Right,
    ] {
        c.bulk_bc.insert(t, BoundaryCondition::Pressure(0.0));
    }
    c.source = vec![1.0];
    // expected (pressure, flux) orders
    for (method, rates) in [
        (Method::Primal, [2.0, 0.0]),
        (Method::Mixed1, [1.0, 1.0]),
        (Method::Mixed2, [1.0, 1.75]),
    ] {
        let mut prev: Option<(f64, f64)> = None;
        for level in 4..6 {
            let mesh = build_mesh(&g, level).unwrap();
            let sol = solve_method(&mesh, &c, method).unwrap();
            let eval = FieldEvaluator::new(&mesh, &sol).unwrap();
            let m = mesh.mesh(0);
            let (mut ep, mut eu) = (0.0, 0.0);
            for cell in 0..m.num_cells() {
                for (p, w) in quadrature(m, cell) {
                    let (pe, ue) = poisson_series(p[0], p[1]);
                    ep += w * (eval.cell_pressure(0, cell, p) - pe).powi(2);
                    if let Some(u) = eval.cell_flux(0, cell, p) {
                        eu += w * ((u[0] - ue[0]).powi(2) + (u[1] - ue[1]).powi(2));
                    }
                }
            }
            let (ep, eu) = (ep.sqrt(), eu.sqrt());
            if let Some((p0, u0)) = prev {
                assert!((p0 / ep).log2() > rates[0] - 0.1, "{method} pressure");
                if method.is_mixed() {
                    assert!((u0 / eu).log2() > rates[1] - 0.1, "{method} flux");
                }
            }
            prev = Some((ep, eu));
        }
    }
}

#[test]
fn strong_coupling_makes_primal_pressure_continuous() {
    let (mesh, c) = benchmark(4);
    let c = with_normal_permeability(c, 1e8);
    let sol = solve_method(&mesh, &c, Method::Primal).unwrap();
    assert!(interface_pressure_jump(&sol, &mesh, &c).unwrap() <= 1e-6);
}

#[test]
fn interface_jump_decreases_with_normal_permeability() {
    let (mesh, c) = benchmark(3);
    for method in Method::ALL {
        let jumps: Vec<f64> = [1e2, 1e4, 1e6, 1e8]
            .iter()
            .map(|&kn| {
                let c = with_normal_permeability(c.clone(), kn);
                let sol = solve_method(&mesh, &c, method).unwrap();
                interface_pressure_jump(&sol, &mesh, &c).unwrap()
            })
            .collect();
        assert!(jumps.windows(2).all(|w| w[1] < w[0]), "{method}: {jumps:?}");
    }
}

#[test]
fn reflection_symmetry_of_interface_fluxes() {
    let (mesh, c) = benchmark(3);
    for method in [Method::Mixed1, Method::Mixed2] {
        let sol = solve_method(&mesh, &c, method).unwrap();
        let lam = recover_interface_flux(&sol, &mesh).unwrap();
        let scale = lam
            .iter()
            .flat_map(|l| l.means.iter())
            .fold(0.0f64, |a, b| a.max(b.abs()));
        for f in [4, 5] {
            let sides: Vec<_> = lam.iter().filter(|l| l.lower == f).collect();
            assert_eq!(sides.len(), 2);
            for (a, b) in sides[0].means.iter().zip(&sides[1].means) {
                assert!((a - b).abs() <= 1e-10 * scale, "{method}: {a} vs {b}");
            }
        }
    }
}

fn bulk_flux_norm(eval: &FieldEvaluator, mesh: &mixdim::mesh::MixedMesh) -> f64 {
    let mut norm = 0.0;
    for q in 0..4 {
        let m = mesh.mesh(q);
        for cell in 0..m.num_cells() {
            for (p, w) in quadrature(m, cell) {
                let u = eval.cell_flux(q, cell, p).unwrap();
                norm += w * (u[0] * u[0] + u[1] * u[1]);
            }
        }
    }
    norm.sqrt()
}

#[test]
fn sealed_fractures_carry_no_normal_flux() {
    // every quadrant has a pressure edge; the lower left and upper right ones
    // carry flow, and the fracture pressures are unrelated to the bulk
    for aperture in [1.0, 1e-3] {
        let g = build_cross_geometry(0.5, 0.5, aperture).unwrap();
        let mesh = build_mesh(&g, 3).unwrap();
        let mut c = with_normal_permeability(ModelCoefficients::benchmark(&g), 1e-8);
        c.bulk_bc.insert(BoundaryTag::Left, BoundaryCondition::Pressure(1.0));
        c.bulk_bc.insert(BoundaryTag::Right, BoundaryCondition::Pressure(0.0));
        c.bulk_bc.insert(BoundaryTag::Top, BoundaryCondition::Pressure(1.0));
        for method in [Method::Mixed1, Method::Mixed2] {
            let sol = solve_method(&mesh, &c, method).unwrap();
            let eval = FieldEvaluator::new(&mesh, &sol).unwrap();
            let norm = bulk_flux_norm(&eval, &mesh);
            let lam = recover_interface_flux(&sol, &mesh).unwrap();
            let worst = lam
                .iter()
                .flat_map(|l| l.samples.iter().flatten())
                .fold(0.0f64, |a, b| a.max(b.abs()));
            assert!(norm > 0.1, "{method}: {norm}");
            // |lambda| = 2 k_n |p - p_f| / eps with pressures in [0, 1]
            let bound = if aperture == 1.0 {
                1e-6 * norm
            } else {
                2e-8 / aperture * 1.01
            };
            assert!(worst <= bound, "{method} eps {aperture}: {worst} vs {bound}");
        }
    }
}

#[test]
fn second_kind_resolves_fractures_better() {
    let (fine, c) = benchmark(6);
    let (coarse, _) = benchmark(3);
    let err = |method| {
        let fs = solve_method(&fine, &c, method).unwrap();
        let cs = solve_method(&coarse, &c, method).unwrap();
        let fe = FieldEvaluator::new(&fine, &fs).unwrap();
        let ce = FieldEvaluator::new(&coarse, &cs).unwrap();
        relative_errors(&ce, &fe, &fine)[&(1, FieldKind::Pressure)]
    };
    assert!(err(Method::Mixed2) < err(Method::Mixed1));
}

#[test]
fn primal_stiffness_is_positive_definite() {
    let (mesh, c) = benchmark(2);
    assert!(primal_coercivity(&mesh, &c).unwrap() > 0.0);
    let sys = assemble_primal(&mesh, &c).unwrap();
    assert!(sys.definite);
}

#[test]
fn level_six_solves_quickly() {
    let (mesh, c) = benchmark(6);
    for method in Method::ALL {
        let start = Instant::now();
        let sys = match method {
            Method::Primal => assemble_primal(&mesh, &c).unwrap(),
            m => mixdim::solver::assemble_mixed(&mesh, &c, m).unwrap(),
        };
        let sol = solve(&sys).unwrap();
        assert!(start.elapsed() < Duration::from_secs(60));
        assert!(sol.residual <= 1e-10);
    }
}

use tfsi_core::coupling::{gauss_seidel_stage_solve, gauss_seidel_stage_trace, StageTrace};
use tfsi_core::{
    Accelerator, Coupled, CouplingConfig, FluidSurrogate, FluidSurrogateConfig, FsiError, InterfaceVector, Material,
    SdirkTableau, StageContext, StructureMesh, StructureSolver, Subsolver,
};

/// Constant-property slab in contact with a colder, less conductive layer.
fn two_slab() -> (FluidSurrogate, StructureSolver) {
    let material = Material::Constant { conductivity: 1.0, specific_heat: 1000.0, density: 1000.0 };
    let mesh = StructureMesh::uniform(0.01, 40, 2).unwrap();
    let solid = StructureSolver::uniform(mesh, material, 900.0).unwrap();
    let cfg = FluidSurrogateConfig {
        length: 0.01,
        conductivity: 0.1,
        heat_capacity: 1e6,
        far_field: 300.0,
        cells: 80,
        stiffness: 1.0,
        ..FluidSurrogateConfig::default()
    };
    let gas = FluidSurrogate::with_cells(cfg, vec![300.0; 80], 900.0).unwrap();
    (gas, solid)
}

fn first_stage(dt: f64, cfg: &CouplingConfig) -> StageTrace {
    let (mut gas, mut solid) = two_slab();
    let tab = SdirkTableau::sdirk2();
    let ctx = StageContext::new(&tab, 1, 0.0, dt, None, cfg.inner_tol()).unwrap();
    gas.begin_stage(&tab, &ctx).unwrap();
    solid.begin_stage(&tab, &ctx).unwrap();
    let guess = InterfaceVector::new(solid.starting_interface().unwrap()).unwrap();
    gauss_seidel_stage_trace(&mut gas, &mut solid, &ctx, &guess, cfg).unwrap()
}

#[test]
fn two_slab_residuals_decrease_monotonically() {
    let trace = first_stage(0.5, &CouplingConfig::new(1e-4));
    assert!(trace.theta.is_some());
    assert!(trace.residual_norms.len() >= 2);
    assert!(trace.residual_norms.windows(2).all(|w| w[1] < w[0]), "{:?}", trace.residual_norms);
}

#[test]
fn two_slab_contraction_rate_settles() {
    let trace = first_stage(0.5, &CouplingConfig::new(1e-12));
    let ratios: Vec<f64> = trace.residual_norms.windows(2).map(|w| w[1] / w[0]).collect();
    let tail = &ratios[ratios.len().saturating_sub(4)..ratios.len() - 1];
    for w in tail.windows(2) {
        assert!((w[1] - w[0]).abs() < 0.05 * w[0], "{ratios:?}");
    }
    assert!(tail.iter().all(|r| *r < 1.0));
}

#[test]
fn aitken_needs_no_more_iterations_at_tight_tolerance() {
    let cfg = CouplingConfig::new(1e-8);
    let plain = first_stage(0.5, &cfg);
    let aitken = first_stage(0.5, &cfg.with_accelerator(Accelerator::Aitken));
    assert!(plain.theta.is_some() && aitken.theta.is_some());
    assert!(aitken.residual_norms.len() <= plain.residual_norms.len());
}

#[test]
fn polynomial_extrapolation_starts_after_two_iterations() {
    let cfg = CouplingConfig::new(1e-10);
    let plain = first_stage(0.5, &cfg);
    for accel in [Accelerator::Mpe, Accelerator::Rre] {
        let acc = first_stage(0.5, &cfg.with_accelerator(accel));
        assert_eq!(acc.residual_norms[..2], plain.residual_norms[..2], "{accel}");
    }
}

#[test]
fn iteration_limit_is_a_hard_error() {
    let (mut gas, mut solid) = two_slab();
    let tab = SdirkTableau::sdirk2();
    let cfg = CouplingConfig { max_iterations: 2, ..CouplingConfig::new(1e-12) };
    let ctx = StageContext::new(&tab, 1, 0.0, 0.5, None, cfg.inner_tol()).unwrap();
    gas.begin_stage(&tab, &ctx).unwrap();
    solid.begin_stage(&tab, &ctx).unwrap();
    let guess = InterfaceVector::new(vec![900.0]).unwrap();
    match gauss_seidel_stage_solve(&mut gas, &mut solid, &ctx, &guess, &cfg) {
        Err(FsiError::NonConvergence { iterations, residual }) => {
            assert_eq!(iterations, 2);
            assert!(residual > 0.0);
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn equilibrium_converges_in_one_iteration() {
    let cfg = FluidSurrogateConfig { far_field: 500.0, ..FluidSurrogateConfig::default() };
    let mut gas = FluidSurrogate::new(cfg, 500.0).unwrap();
    let mesh = StructureMesh::uniform(0.05, 10, 2).unwrap();
    let mut solid = StructureSolver::uniform(mesh, Material::default(), 500.0).unwrap();
    let tab = SdirkTableau::sdirk2();
    let coupling = CouplingConfig::new(1e-4);
    let ctx = StageContext::new(&tab, 1, 0.0, 1.0, None, coupling.inner_tol()).unwrap();
    gas.begin_stage(&tab, &ctx).unwrap();
    solid.begin_stage(&tab, &ctx).unwrap();
    let guess = InterfaceVector::new(vec![500.0]).unwrap();
    let sol = gauss_seidel_stage_solve(&mut gas, &mut solid, &ctx, &guess, &coupling).unwrap();
    assert_eq!(sol.iterations, 1);
    assert!((sol.theta.as_slice()[0] - 500.0).abs() < 1e-9);
}

#[test]
fn swapped_roles_are_rejected() {
    let (gas, solid) = two_slab();
    // the more conductive slab may not take the Dirichlet role
    assert!(matches!(Coupled::new(solid, gas), Err(FsiError::Config(_))));
}

//! Analytic-oracle checks of the numerical building blocks. Each check
//! compares computed values against closed-form answers and reports its
//! worst deviation.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::acceleration::{aitken_update, mpe_extrapolate, rre_extrapolate, AitkenState, IterationHistory};
use crate::coupling::CouplingConfig;
use crate::error::Result;
use crate::fluid::{FluidSurrogate, FluidSurrogateConfig};
use crate::integrator::{Coupled, SimulationConfig};
use crate::ode::{LinearOde, Passive};
use crate::predictors::{
    lagrange_weights, stage1_linear_weights, stage1_quadratic_weights, stage2_linear_weights,
    stage2_quadratic_weights,
};
use crate::structure::material::{cp1, cp2, lambda_eval, KELVIN_OFFSET, OPERATING_RANGE};
use crate::structure::{Material, StructureMesh, StructureSolver};
use crate::time::{SdirkTableau, StepController};

#[derive(Debug, Clone, PartialEq)]
pub struct OracleCheck {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl OracleCheck {
    fn new(name: &'static str, passed: bool, detail: String) -> Self {
        Self { name, passed, detail }
    }
}

fn ode_end_value(rate: f64, dt: f64, end: f64) -> Result<f64> {
    let mut c = Coupled::new(Passive::default(), LinearOde::new(rate, 1.0))?;
    c.run(&SimulationConfig::new(end, dt, 1e-6).fixed())?;
    Ok(c.structure.value())
}

/// Observed convergence orders of fixed-step SDIRK2 on `y' = -y`, `y(0) = 1`
/// over `[0, 1]`, for each successive halving of the step.
pub fn sdirk_observed_orders() -> Result<Vec<f64>> {
    let exact = (-1.0f64).exp();
    let errs = [0.1, 0.05, 0.025, 0.0125]
        .iter()
        .map(|&dt| ode_end_value(-1.0, dt, 1.0).map(|y| (y - exact).abs()))
        .collect::<Result<Vec<_>>>()?;
    Ok(errs.windows(2).map(|w| (w[0] / w[1]).log2()).collect())
}

pub fn check_sdirk_order() -> Result<OracleCheck> {
    let orders = sdirk_observed_orders()?;
    let ok = orders.iter().all(|p| (1.8..=2.2).contains(p));
    Ok(OracleCheck::new("sdirk2 order", ok, format!("observed orders {orders:.3?}")))
}

/// Largest deviation of one step on `y' = z y` from the stability function.
pub fn stability_deviation() -> Result<f64> {
    let tab = SdirkTableau::sdirk2();
    let mut worst = 0.0f64;
    for z in [-0.1, -1.0, -10.0] {
        worst = worst.max((ode_end_value(z, 1.0, 1.0)? - tab.stability(z)).abs());
    }
    Ok(worst)
}

pub fn check_stability_function() -> Result<OracleCheck> {
    let dev = stability_deviation()?;
    Ok(OracleCheck::new("stability function", dev <= 1e-12, format!("max deviation {dev:e}")))
}

/// Aitken-relaxed iterates of `G(x) = 0.5 x + 1` from `x = 0`.
pub fn aitken_sequence(steps: usize) -> Result<Vec<f64>> {
    let g = |x: f64| 0.5 * x + 1.0;
    let mut x = 0.0;
    let mut seq = vec![x];
    let mut state = AitkenState::default();
    let mut hist = IterationHistory::new();
    for _ in 0..steps {
        hist.push(vec![x], vec![g(x)])?;
        let (next, s) = aitken_update(&hist, state)?;
        state = s;
        x = next[0];
        seq.push(x);
    }
    Ok(seq)
}

pub fn check_aitken() -> Result<OracleCheck> {
    let seq = aitken_sequence(3)?;
    let hit = seq.iter().position(|x| (x - 2.0).abs() < 1e-12);
    let ok = hit.is_some_and(|k| k <= 3) && (seq[1] - 0.8).abs() < 1e-15;
    Ok(OracleCheck::new("aitken secant exactness", ok, format!("iterates {seq:?}")))
}

/// Random diagonalizable matrix with eigenvalues in `(-0.9, 0.9)` and a
/// well-conditioned eigenvector basis.
fn random_contraction(d: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let eig = DMatrix::from_diagonal(&DVector::from_fn(d, |_, _| rng.gen_range(-0.9..0.9)));
    let basis = DMatrix::identity(d, d) + DMatrix::from_fn(d, d, |_, _| rng.gen_range(-0.3..0.3));
    let inv = basis.clone().try_inverse().expect("perturbed identity is invertible");
    basis * eig * inv
}

/// Worst relative error of MPE and RRE over `trials` random affine maps of
/// dimension `d`, each extrapolated from `d + 1` iterates after the start.
pub fn extrapolation_worst_error(d: usize, trials: usize, seed: u64) -> Result<(f64, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (d as u64).wrapping_mul(0x9E37_79B9));
    let (mut mpe, mut rre) = (0.0f64, 0.0f64);
    for _ in 0..trials {
        let a = random_contraction(d, &mut rng);
        let b = DVector::from_fn(d, |_, _| rng.gen_range(-1.0..1.0));
        let fixed = (DMatrix::identity(d, d) - &a).lu().solve(&b).expect("I - A is nonsingular");
        let mut x = DVector::from_fn(d, |_, _| rng.gen_range(-1.0..1.0));
        let mut seq = vec![x.as_slice().to_vec()];
        for _ in 0..=d {
            x = &a * &x + &b;
            seq.push(x.as_slice().to_vec());
        }
        let hist = IterationHistory::from_sequence(&seq)?;
        let rel = |v: Vec<f64>| (DVector::from_vec(v) - &fixed).norm() / fixed.norm();
        mpe = mpe.max(rel(mpe_extrapolate(&hist)?));
        rre = rre.max(rel(rre_extrapolate(&hist)?));
    }
    Ok((mpe, rre))
}

pub fn check_extrapolation(seed: u64) -> Result<OracleCheck> {
    let mut ok = true;
    let mut detail = Vec::new();
    for d in [2, 3, 5] {
        let (m, r) = extrapolation_worst_error(d, 100, seed)?;
        ok &= m <= 1e-10 && r <= 1e-10;
        detail.push(format!("d={d}: mpe {m:.1e}, rre {r:.1e}"));
    }
    Ok(OracleCheck::new("mpe/rre exactness", ok, detail.join("; ")))
}

/// The printed closed forms of the quadratic predictor weights.
pub fn printed_stage1_quadratic(dp: f64, dn: f64, c1: f64) -> [f64; 3] {
    let a = c1 * dn;
    [
        (a + (1.0 - c1) * dp) * a / (c1 * dp * dp),
        -(a + dp) * a / (c1 * dp * dp * (1.0 - c1)),
        (a + dp) * (a + (1.0 - c1) * dp) / ((1.0 - c1) * dp * dp),
    ]
}

pub fn printed_stage2_quadratic(dp: f64, dn: f64, c1: f64) -> [f64; 3] {
    [
        dn * dn * (1.0 - c1) / (dp * (dp + c1 * dn)),
        -(dp + dn) * (1.0 - c1) * dn / (dp * c1 * dn),
        (dp + dn) * dn / ((c1 * dn + dp) * c1 * dn),
    ]
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PredictorDeviations {
    /// Relative error on trajectories of the predictor's own degree.
    pub exactness: f64,
    /// Largest `|sum of weights - 1|`.
    pub weight_sum: f64,
    /// Largest gap between the printed weight formulas and Lagrange weights.
    pub printed: f64,
}

/// Predictors on random polynomial trajectories and random step pairs. The
/// step ratio stays within the growth limits of the step-size controller.
pub fn predictor_deviations(trials: usize, seed: u64) -> PredictorDeviations {
    let c1 = SdirkTableau::sdirk2().c1();
    let ctrl = StepController::new(1e-3);
    let (shrink, grow) = (ctrl.f_min, ctrl.f_max);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut dev = PredictorDeviations { exactness: 0.0, weight_sum: 0.0, printed: 0.0 };
    for _ in 0..trials {
        let dp: f64 = rng.gen_range(0.01..2.0);
        let dn: f64 = dp * rng.gen_range(shrink..=grow);
        let coef: [f64; 3] = [rng.gen_range(200.0..1000.0), rng.gen_range(-50.0..50.0), rng.gen_range(-20.0..20.0)];
        let p = |t: f64, deg: usize| coef.iter().take(deg + 1).rev().fold(0.0, |acc, c| acc * t + c);
        // time nodes relative to t_n
        let (t_prev, t_half, t_stage, t_end) = (-dp, -dp + c1 * dp, c1 * dn, dn);
        let cases: [(Vec<f64>, Vec<f64>, f64, usize); 4] = [
            (stage1_linear_weights(dp, dn, c1), vec![t_prev, 0.0], t_stage, 1),
            (stage1_quadratic_weights(dp, dn, c1), vec![t_prev, t_half, 0.0], t_stage, 2),
            (stage2_linear_weights(dn, c1), vec![0.0, t_stage], t_end, 1),
            (stage2_quadratic_weights(dp, dn, c1), vec![t_prev, 0.0, t_stage], t_end, 2),
        ];
        for (w, nodes, at, deg) in cases {
            let pred: f64 = w.iter().zip(&nodes).map(|(wi, ti)| wi * p(*ti, deg)).sum();
            let exact = p(at, deg);
            dev.exactness = dev.exactness.max(((pred - exact) / exact).abs());
            dev.weight_sum = dev.weight_sum.max((w.iter().sum::<f64>() - 1.0).abs());
            let lagrange = lagrange_weights(&nodes, at);
            let gap = w.iter().zip(&lagrange).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            dev.printed = dev.printed.max(gap);
        }
        let printed_gap = |w: Vec<f64>, q: [f64; 3]| {
            w.iter().zip(q).map(|(a, b)| (a - b).abs() / b.abs().max(1.0)).fold(0.0, f64::max)
        };
        let printed_linear1 = [-c1 * dn / dp, 1.0 + c1 * dn / dp];
        let printed_linear2 = [1.0 - 1.0 / c1, 1.0 / c1];
        dev.printed = dev
            .printed
            .max(printed_gap(stage1_quadratic_weights(dp, dn, c1), printed_stage1_quadratic(dp, dn, c1)))
            .max(printed_gap(stage2_quadratic_weights(dp, dn, c1), printed_stage2_quadratic(dp, dn, c1)))
            .max(printed_gap(stage1_linear_weights(dp, dn, c1), [printed_linear1[0], printed_linear1[1], 0.0]))
            .max(printed_gap(stage2_linear_weights(dn, c1), [printed_linear2[0], printed_linear2[1], 0.0]));
    }
    dev
}

pub fn check_predictors(seed: u64) -> OracleCheck {
    let d = predictor_deviations(1000, seed);
    let ok = d.exactness <= 1e-12 && d.weight_sum <= 1e-13 && d.printed <= 1e-10;
    OracleCheck::new(
        "predictor exactness",
        ok,
        format!("exactness {:.1e}, weight sum {:.1e}, printed formulas {:.1e}", d.exactness, d.weight_sum, d.printed),
    )
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaterialDeviations {
    /// Largest deviation of the conductivity fit from its tabulated values.
    pub conductivity: f64,
    /// Largest violation of `min <= c_p <= min + 10 ln 2` (zero if none).
    pub soft_min_violation: f64,
}

pub fn material_deviations() -> MaterialDeviations {
    let conductivity = [(0.0, 40.1), (100.0, 44.149), (1000.0, 39.1)]
        .iter()
        .map(|(t, v)| (lambda_eval(*t) - v).abs())
        .fold(0.0, f64::max);
    let steel = Material::default();
    let (lo, hi) = OPERATING_RANGE;
    let mut violation = 0.0f64;
    for i in 0..=(hi - lo) as usize {
        let kelvin = lo + i as f64;
        let law = kelvin - KELVIN_OFFSET;
        let floor = cp1(law).min(cp2(law));
        let cp = steel.specific_heat(kelvin);
        violation = violation.max(floor - cp).max(cp - floor - 10.0 * 2f64.ln());
    }
    MaterialDeviations { conductivity, soft_min_violation: violation }
}

pub fn check_material() -> OracleCheck {
    let d = material_deviations();
    // the fit's coefficients are decimal, so "exact" means equal up to the
    // rounding of the polynomial evaluation
    let ok = d.conductivity <= 1e-12 && d.soft_min_violation <= 1e-12;
    OracleCheck::new(
        "material model",
        ok,
        format!("conductivity deviation {:.1e}, soft-min violation {:.1e}", d.conductivity, d.soft_min_violation),
    )
}

/// Two constant-property slabs brought into contact.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoSlabCase {
    pub solid_conductivity: f64,
    pub solid_heat_capacity: f64,
    pub solid_temperature: f64,
    pub gas_conductivity: f64,
    pub gas_heat_capacity: f64,
    pub gas_temperature: f64,
    pub length: f64,
    pub end_time: f64,
    /// Start of the comparison window; earlier times are under-resolved.
    pub compare_from: f64,
}

impl Default for TwoSlabCase {
    fn default() -> Self {
        Self {
            solid_conductivity: 1.0,
            solid_heat_capacity: 1e6,
            solid_temperature: 900.0,
            gas_conductivity: 0.1,
            gas_heat_capacity: 1e6,
            gas_temperature: 300.0,
            length: 0.01,
            end_time: 5.0,
            compare_from: 0.5,
        }
    }
}

impl TwoSlabCase {
    /// Contact temperature of two semi-infinite media.
    pub fn contact_temperature(&self) -> f64 {
        let es = (self.solid_conductivity * self.solid_heat_capacity).sqrt();
        let ef = (self.gas_conductivity * self.gas_heat_capacity).sqrt();
        (ef * self.gas_temperature + es * self.solid_temperature) / (ef + es)
    }

    /// Largest interface deviation from the contact temperature over the
    /// comparison window, relative to the initial temperature jump.
    pub fn run(&self) -> Result<f64> {
        let mesh = StructureMesh::uniform(self.length, 100, 2)?;
        let material = Material::Constant {
            conductivity: self.solid_conductivity,
            specific_heat: self.solid_heat_capacity / 1000.0,
            density: 1000.0,
        };
        let solid = StructureSolver::uniform(mesh, material, self.solid_temperature)?;
        let gas_cfg = FluidSurrogateConfig {
            length: self.length,
            conductivity: self.gas_conductivity,
            heat_capacity: self.gas_heat_capacity,
            far_field: self.gas_temperature,
            cells: 200,
            stiffness: 1.0,
            ..FluidSurrogateConfig::default()
        };
        let gas = FluidSurrogate::with_cells(gas_cfg, vec![self.gas_temperature; 200], self.solid_temperature)?;
        let mut problem = Coupled::new(gas, solid)?;
        let mut sim = SimulationConfig::new(self.end_time, 1e-3, 1e-4);
        sim.coupling = CouplingConfig::new(1e-4);
        let rec = problem.run(&sim)?;
        let contact = self.contact_temperature();
        let jump = self.solid_temperature - self.gas_temperature;
        Ok(rec
            .interface_trace
            .iter()
            .filter(|(t, _)| *t >= self.compare_from)
            .map(|(_, v)| (v[0] - contact).abs() / jump)
            .fold(0.0, f64::max))
    }
}

pub fn check_two_slab() -> Result<OracleCheck> {
    let case = TwoSlabCase::default();
    let dev = case.run()?;
    Ok(OracleCheck::new(
        "two-slab contact temperature",
        dev <= 0.02,
        format!("max deviation {:.2e} of the initial jump (contact {:.3} K)", dev, case.contact_temperature()),
    ))
}

/// All oracle checks, in a fixed order.
pub fn run_all(seed: u64) -> Result<Vec<OracleCheck>> {
    Ok(vec![
        check_sdirk_order()?,
        check_stability_function()?,
        check_aitken()?,
        check_extrapolation(seed)?,
        check_predictors(seed),
        check_material(),
        check_two_slab()?,
    ])
}

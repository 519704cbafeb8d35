use super::material::Material;
use super::mesh::{gauss, shape, StructureMesh};
use crate::coupling::Subsolver;
use crate::error::{FsiError, Result};
use crate::linalg::BandMatrix;
use crate::time::{RkState, SdirkTableau, StageContext};

pub const MAX_NEWTON_ITERATIONS: usize = 25;
const MAX_PICARD_ITERATIONS: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum NewtonMode {
    /// Full Jacobian including the derivatives of the coefficients.
    #[default]
    Newton,
    /// Frozen coefficients (Picard iteration).
    Picard,
}

/// Quantities at one quadrature point of one element.
struct QuadPoint {
    nodes: [usize; 3],
    len: usize,
    n: [f64; 3],
    dndx: [f64; 3],
    weight: f64,
}

fn for_each_qp(mesh: &StructureMesh, mut f: impl FnMut(&QuadPoint)) -> Result<()> {
    let order = mesh.order();
    let x = mesh.nodes();
    for e in 0..mesh.num_elements() {
        let mut nodes = [0usize; 3];
        for (k, i) in mesh.element_nodes(e).enumerate() {
            nodes[k] = i;
        }
        let len = order + 1;
        for &(xi, w) in gauss(order) {
            let (n, dn) = shape(order, xi);
            let jac: f64 = (0..len).map(|a| dn[a] * x[nodes[a]]).sum();
            if !(jac > 0.0) {
                return Err(FsiError::Mesh(format!("degenerate element {e}")));
            }
            let mut dndx = [0.0; 3];
            for a in 0..len {
                dndx[a] = dn[a] / jac;
            }
            f(&QuadPoint { nodes, len, n, dndx, weight: w * jac });
        }
    }
    Ok(())
}

fn interp(qp: &QuadPoint, v: &[f64], basis: &[f64; 3]) -> f64 {
    (0..qp.len).map(|a| basis[a] * v[qp.nodes[a]]).sum()
}

/// Heat capacity matrix `M(theta)` and conductivity matrix `K(theta)`.
pub fn assemble(
    mesh: &StructureMesh,
    material: &Material,
    theta: &[f64],
) -> Result<(BandMatrix, BandMatrix)> {
    let n = mesh.num_nodes();
    if theta.len() != n {
        return Err(FsiError::Dimension { expected: n, got: theta.len() });
    }
    let mut m = BandMatrix::zeros(n, mesh.order());
    let mut k = BandMatrix::zeros(n, mesh.order());
    for_each_qp(mesh, |qp| {
        let th = interp(qp, theta, &qp.n);
        let c = material.heat_capacity(th);
        let l = material.conductivity(th);
        for a in 0..qp.len {
            for b in 0..qp.len {
                m.add(qp.nodes[a], qp.nodes[b], qp.weight * c * qp.n[a] * qp.n[b]);
                k.add(qp.nodes[a], qp.nodes[b], qp.weight * l * qp.dndx[a] * qp.dndx[b]);
            }
        }
    })?;
    Ok((m, k))
}

/// Nonlinear heat conduction on a 1D slab, Neumann data at the interface
/// node and insulated at the far end.
#[derive(Debug, Clone)]
pub struct StructureSolver {
    mesh: StructureMesh,
    material: Material,
    mode: NewtonMode,
    rk: RkState,
    current: Option<Vec<f64>>,
    newton_trace: Vec<f64>,
}

impl StructureSolver {
    pub fn new(mesh: StructureMesh, material: Material, initial: Vec<f64>) -> Result<Self> {
        if initial.len() != mesh.num_nodes() {
            return Err(FsiError::Dimension { expected: mesh.num_nodes(), got: initial.len() });
        }
        if initial.iter().any(|t| !(t.is_finite() && *t > 0.0)) {
            return Err(FsiError::Contract("structure temperatures must be positive".into()));
        }
        Ok(Self { mesh, material, mode: NewtonMode::Newton, rk: RkState::new(initial), current: None, newton_trace: Vec::new() })
    }

    pub fn uniform(mesh: StructureMesh, material: Material, temperature: f64) -> Result<Self> {
        let n = mesh.num_nodes();
        Self::new(mesh, material, vec![temperature; n])
    }

    pub fn with_mode(mut self, mode: NewtonMode) -> Self {
        self.mode = mode;
        self
    }

    pub fn mesh(&self) -> &StructureMesh {
        &self.mesh
    }

    pub fn material(&self) -> &Material {
        &self.material
    }

    pub fn rk(&self) -> &RkState {
        &self.rk
    }

    /// Max-norm residuals of the Newton iterates of the last stage solve,
    /// starting with the residual of the initial guess.
    pub fn newton_trace(&self) -> &[f64] {
        &self.newton_trace
    }

    /// Discrete thermal energy `sum_i (M(theta) theta)_i`.
    pub fn thermal_energy(&self, theta: &[f64]) -> Result<f64> {
        let (m, _) = assemble(&self.mesh, &self.material, theta)?;
        Ok(m.mul_vec(theta).iter().sum())
    }

    /// Stage residual `M(theta)(theta - s) + tau K(theta) theta - tau q e_0`
    /// and its Jacobian (frozen-coefficient part only in Picard mode).
    pub fn stage_system(
        &self,
        theta: &[f64],
        start: &[f64],
        flux: f64,
        tau: f64,
        mode: NewtonMode,
    ) -> Result<(Vec<f64>, BandMatrix)> {
        let n = self.mesh.num_nodes();
        let mut r = vec![0.0; n];
        let mut jac = BandMatrix::zeros(n, self.mesh.order());
        let mat = &self.material;
        for_each_qp(&self.mesh, |qp| {
            let th = interp(qp, theta, &qp.n);
            let dth = interp(qp, theta, &qp.dndx);
            let diff: f64 = (0..qp.len).map(|a| qp.n[a] * (theta[qp.nodes[a]] - start[qp.nodes[a]])).sum();
            let c = mat.heat_capacity(th);
            let l = mat.conductivity(th);
            let w = qp.weight;
            for a in 0..qp.len {
                let ia = qp.nodes[a];
                r[ia] += w * (c * qp.n[a] * diff + tau * l * qp.dndx[a] * dth);
                for b in 0..qp.len {
                    let mut v = c * qp.n[a] * qp.n[b] + tau * l * qp.dndx[a] * qp.dndx[b];
                    if mode == NewtonMode::Newton {
                        let dc = mat.density() * mat.specific_heat_derivative(th);
                        let dl = mat.conductivity_derivative(th);
                        v += dc * qp.n[b] * qp.n[a] * diff + tau * dl * qp.n[b] * qp.dndx[a] * dth;
                    }
                    jac.add(ia, qp.nodes[b], w * v);
                }
            }
        })?;
        r[self.mesh.interface_node()] -= tau * flux;
        Ok((r, jac))
    }

    /// Solves the stage system for the prescribed interface flux (positive
    /// flux heats the slab), starting Newton from the starting vector.
    pub fn solve_for_flux(&mut self, flux: f64, ctx: &StageContext) -> Result<Vec<f64>> {
        let start = self.rk.starting()?.to_vec();
        let tau = ctx.implicit_step();
        let max_it = match self.mode {
            NewtonMode::Newton => MAX_NEWTON_ITERATIONS,
            NewtonMode::Picard => MAX_PICARD_ITERATIONS,
        };
        let fail = |reason: String| FsiError::SubsolverFailure { solver: "structure".into(), reason };
        let mut theta = start.clone();
        self.newton_trace.clear();
        for _ in 0..max_it {
            let (r, jac) = self.stage_system(&theta, &start, flux, tau, self.mode)?;
            self.newton_trace.push(r.iter().fold(0.0, |m, v| m.max(v.abs())));
            let neg: Vec<f64> = r.iter().map(|v| -v).collect();
            let delta = jac.solve(&neg).map_err(|e| fail(e.to_string()))?;
            let mut change = 0.0f64;
            for (t, d) in theta.iter_mut().zip(&delta) {
                *t += d;
                change = change.max(d.abs() / (1.0 + t.abs()));
            }
            if !change.is_finite() || theta.iter().any(|t| !(*t > 0.0)) {
                return Err(fail("Newton iteration left the admissible temperature range".into()));
            }
            if change <= ctx.inner_tol {
                let (r, _) = self.stage_system(&theta, &start, flux, tau, NewtonMode::Picard)?;
                self.newton_trace.push(r.iter().fold(0.0, |m, v| m.max(v.abs())));
                return Ok(theta);
            }
        }
        Err(fail(format!("no convergence in {max_it} iterations")))
    }
}

impl Subsolver for StructureSolver {
    fn name(&self) -> &str {
        "structure"
    }

    fn interface_len(&self) -> usize {
        1
    }

    fn conductivity_range(&self) -> (f64, f64) {
        self.material.conductivity_range()
    }

    fn interface_temperature(&self) -> Vec<f64> {
        vec![self.rk.solution()[self.mesh.interface_node()]]
    }

    fn field(&self) -> &[f64] {
        self.rk.solution()
    }

    fn begin_stage(&mut self, tableau: &SdirkTableau, ctx: &StageContext) -> Result<()> {
        self.current = None;
        self.rk.begin_stage(tableau, ctx)?;
        Ok(())
    }

    fn starting_interface(&self) -> Result<Vec<f64>> {
        Ok(vec![self.rk.starting()?[self.mesh.interface_node()]])
    }

    fn solve_stage(&mut self, interface_data: &[f64], ctx: &StageContext) -> Result<Vec<f64>> {
        if interface_data.len() != 1 {
            return Err(FsiError::Dimension { expected: 1, got: interface_data.len() });
        }
        let theta = self.solve_for_flux(interface_data[0], ctx)?;
        let out = vec![theta[self.mesh.interface_node()]];
        self.current = Some(theta);
        Ok(out)
    }

    fn finish_stage(&mut self, ctx: &StageContext) -> Result<()> {
        let v = self
            .current
            .take()
            .ok_or_else(|| FsiError::Sequencing("structure stage finished without a solve".into()))?;
        self.rk.finish_stage(ctx, v)
    }

    fn local_error(&self, tableau: &SdirkTableau, dt: f64) -> Result<f64> {
        self.rk.local_error(tableau, dt)
    }

    fn accept_step(&mut self) -> Result<()> {
        self.rk.accept()
    }

    fn backup(&mut self) {
        self.rk.backup();
    }

    fn restore(&mut self) -> Result<()> {
        self.current = None;
        self.rk.restore()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn constant(l: f64, c: f64, rho: f64) -> Material {
        Material::Constant { conductivity: l, specific_heat: c, density: rho }
    }

    fn stage_ctx(dt: f64, inner: f64) -> StageContext {
        StageContext::new(&SdirkTableau::sdirk2(), 1, 0.0, dt, None, inner).unwrap()
    }

    #[test]
    fn single_linear_element_matrices() {
        let (l, c, rho, h) = (3.0, 2.0, 5.0, 0.4);
        let mesh = StructureMesh::uniform(h, 1, 1).unwrap();
        let (m, k) = assemble(&mesh, &constant(l, c, rho), &[300.0, 300.0]).unwrap();
        let kk = l / h;
        let mm = rho * c * h / 6.0;
        let expect_k = [[kk, -kk], [-kk, kk]];
        let expect_m = [[2.0 * mm, mm], [mm, 2.0 * mm]];
        for i in 0..2 {
            for j in 0..2 {
                assert!((k.get(i, j) - expect_k[i][j]).abs() < 1e-13);
                assert!((m.get(i, j) - expect_m[i][j]).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn assembled_matrix_properties() {
        for order in [1, 2] {
            let mesh = StructureMesh::uniform(0.05, 6, order).unwrap();
            let theta: Vec<f64> = mesh.nodes().iter().map(|x| 900.0 - 4000.0 * x).collect();
            let (m, k) = assemble(&mesh, &Material::default(), &theta).unwrap();
            let n = mesh.num_nodes();
            let ones = vec![1.0; n];
            assert!(k.mul_vec(&ones).iter().all(|v| v.abs() < 1e-9));
            let md = m.to_dense();
            assert!((md.clone() - md.transpose()).amax() < 1e-9);
            assert!(md.clone().cholesky().is_some());
            assert!(m.mul_vec(&ones).iter().all(|v| *v > 0.0));
        }
    }

    #[test]
    fn equilibrium_is_preserved() {
        let mesh = StructureMesh::uniform(0.05, 5, 2).unwrap();
        let mut s = StructureSolver::uniform(mesh, Material::default(), 900.0).unwrap();
        let t = SdirkTableau::sdirk2();
        let ctx = stage_ctx(1.0, 1e-10);
        s.begin_stage(&t, &ctx).unwrap();
        let out = s.solve_stage(&[0.0], &ctx).unwrap();
        assert!((out[0] - 900.0).abs() < 1e-10);
    }

    #[test]
    fn linear_problem_solved_in_one_newton_step() {
        let mesh = StructureMesh::uniform(0.05, 8, 2).unwrap();
        let mut s = StructureSolver::uniform(mesh, constant(40.0, 500.0, 7800.0), 900.0).unwrap();
        let t = SdirkTableau::sdirk2();
        let ctx = stage_ctx(2.0, 1e-12);
        s.begin_stage(&t, &ctx).unwrap();
        s.solve_stage(&[-5.0e4], &ctx).unwrap();
        let trace = s.newton_trace();
        assert!(trace[0] > 1.0);
        assert!(trace[1] < 1e-12 * trace[0].max(1.0) * 1e3, "{trace:?}");
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for order in [1, 2] {
            let mesh = StructureMesh::uniform(0.03, 4, order).unwrap();
            let n = mesh.num_nodes();
            let s = StructureSolver::uniform(mesh, Material::default(), 900.0).unwrap();
            for _ in 0..5 {
                let theta: Vec<f64> = (0..n).map(|_| rng.gen_range(400.0..1200.0)).collect();
                let start: Vec<f64> = (0..n).map(|_| rng.gen_range(400.0..1200.0)).collect();
                let (tau, q) = (0.7, -3e4);
                let (_, jac) = s.stage_system(&theta, &start, q, tau, NewtonMode::Newton).unwrap();
                for j in 0..n {
                    let h = 1e-5 * theta[j];
                    let mut tp = theta.clone();
                    let mut tm = theta.clone();
                    tp[j] += h;
                    tm[j] -= h;
                    let (rp, _) = s.stage_system(&tp, &start, q, tau, NewtonMode::Newton).unwrap();
                    let (rm, _) = s.stage_system(&tm, &start, q, tau, NewtonMode::Newton).unwrap();
                    let col_norm = (0..n).map(|i| jac.get(i, j).abs()).fold(0.0, f64::max);
                    for i in 0..n {
                        let fd = (rp[i] - rm[i]) / (2.0 * h);
                        assert!(
                            (fd - jac.get(i, j)).abs() <= 1e-5 * col_norm,
                            "order {order} ({i},{j}): fd {fd} vs {}",
                            jac.get(i, j)
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn newton_converges_quadratically() {
        let mesh = StructureMesh::uniform(0.05, 10, 2).unwrap();
        let mut s = StructureSolver::uniform(mesh, Material::default(), 900.0).unwrap();
        let t = SdirkTableau::sdirk2();
        let ctx = stage_ctx(5.0, 1e-14);
        s.begin_stage(&t, &ctx).unwrap();
        s.solve_stage(&[-4e5], &ctx).unwrap();
        let tr = s.newton_trace().to_vec();
        let scale = tr[0];
        let rel: Vec<f64> = tr.iter().map(|r| r / scale).collect();
        for w in rel.windows(2) {
            if w[0] < 1e-3 && w[1] > 1e-13 {
                assert!(w[1] / (w[0] * w[0]) < 1e3, "{rel:?}");
            }
        }
    }

    #[test]
    fn picard_matches_newton() {
        let mesh = StructureMesh::uniform(0.05, 10, 2).unwrap();
        let t = SdirkTableau::sdirk2();
        let ctx = stage_ctx(1.0, 1e-12);
        let mut out = Vec::new();
        for mode in [NewtonMode::Newton, NewtonMode::Picard] {
            let mut s = StructureSolver::uniform(mesh.clone(), Material::default(), 900.0).unwrap().with_mode(mode);
            s.begin_stage(&t, &ctx).unwrap();
            out.push(s.solve_stage(&[-1e5], &ctx).unwrap()[0]);
        }
        assert!((out[0] - out[1]).abs() < 1e-8);
    }

    #[test]
    fn insulated_stage_conserves_energy() {
        let mesh = StructureMesh::uniform(0.05, 12, 2).unwrap();
        let init: Vec<f64> = mesh.nodes().iter().map(|x| 600.0 + 300.0 * (x / 0.05).powi(2)).collect();
        let mut s = StructureSolver::new(mesh, constant(40.0, 500.0, 7800.0), init.clone()).unwrap();
        let t = SdirkTableau::sdirk2();
        let ctx = stage_ctx(10.0, 1e-13);
        s.begin_stage(&t, &ctx).unwrap();
        s.solve_stage(&[0.0], &ctx).unwrap();
        let after = s.current.clone().unwrap();
        let e0 = s.thermal_energy(&init).unwrap();
        let e1 = s.thermal_energy(&after).unwrap();
        assert!(((e1 - e0) / e0).abs() < 1e-10);
    }

    /// One full SDIRK2 step with a constant prescribed flux.
    fn step(s: &mut StructureSolver, flux: f64, t: f64, dt: f64) {
        let tab = SdirkTableau::sdirk2();
        for stage in 1..=2 {
            let ctx = StageContext::new(&tab, stage, t, dt, None, 1e-13).unwrap();
            s.begin_stage(&tab, &ctx).unwrap();
            s.solve_stage(&[flux], &ctx).unwrap();
            s.finish_stage(&ctx).unwrap();
        }
        s.accept_step().unwrap();
    }

    #[test]
    fn quadratic_profile_under_constant_flux_is_exact() {
        // T(x, t) = T0 + q t / (rho c L) + q / lambda * ((L - x)^2 / (2L) - L / 6)
        // solves the heat equation with flux q entering at x = 0 and an
        // insulated far end; quadratic elements and SDIRK2 reproduce it.
        let (len, lam, c, rho, q) = (0.05, 40.0, 500.0, 7800.0, 2.0e4);
        let exact = |x: f64, t: f64| 600.0 + q * t / (rho * c * len) + q / lam * ((len - x).powi(2) / (2.0 * len) - len / 6.0);
        let mesh = StructureMesh::uniform(len, 8, 2).unwrap();
        let init: Vec<f64> = mesh.nodes().iter().map(|x| exact(*x, 0.0)).collect();
        let mut s = StructureSolver::new(mesh.clone(), constant(lam, c, rho), init).unwrap();
        let dt = 2.5;
        for n in 0..4 {
            step(&mut s, q, n as f64 * dt, dt);
        }
        for (x, v) in mesh.nodes().iter().zip(s.rk().solution()) {
            assert!((v - exact(*x, 4.0 * dt)).abs() < 1e-8, "x={x}: {v} vs {}", exact(*x, 4.0 * dt));
        }
    }

    #[test]
    fn insulated_slab_respects_initial_bounds() {
        for order in [1, 2] {
            let mesh = StructureMesh::uniform(0.05, 20, order).unwrap();
            let init: Vec<f64> =
                mesh.nodes().iter().map(|x| 500.0 + 400.0 * (std::f64::consts::PI * x / 0.05).cos().powi(2)).collect();
            let (lo, hi) = (500.0 - 1e-9, 900.0 + 1e-9);
            let mut s = StructureSolver::new(mesh, Material::default(), init).unwrap();
            let mut t = 0.0;
            for dt in [0.5, 1.0, 2.0, 5.0, 10.0, 20.0] {
                step(&mut s, 0.0, t, dt);
                t += dt;
                for v in s.rk().solution() {
                    assert!(*v >= lo && *v <= hi, "order {order}, t={t}: {v}");
                }
            }
        }
    }

    #[test]
    fn finish_without_solve_is_a_sequencing_error() {
        let mesh = StructureMesh::uniform(0.05, 2, 1).unwrap();
        let mut s = StructureSolver::uniform(mesh, Material::default(), 900.0).unwrap();
        let t = SdirkTableau::sdirk2();
        let ctx = stage_ctx(1.0, 1e-8);
        s.begin_stage(&t, &ctx).unwrap();
        assert!(matches!(s.finish_stage(&ctx), Err(FsiError::Sequencing(_))));
    }
}

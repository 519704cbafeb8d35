//! Dirichlet-side surrogate for the gas: 1D constant-coefficient heat
//! conduction on `[0, L_f]` discretized with finite volumes. The interface
//! temperature is imposed at `xi = 0`, the far-field temperature at
//! `xi = L_f`, and the heat flux into the structure is reconstructed at the
//! interface face.

use crate::coupling::Subsolver;
use crate::error::{FsiError, Result};
use crate::linalg::BandMatrix;
use crate::time::{RkState, SdirkTableau, StageContext};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FluxOrder {
    First,
    #[default]
    Second,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FluidSurrogateConfig {
    pub length: f64,
    pub conductivity: f64,
    /// Volumetric heat capacity `rho c`.
    pub heat_capacity: f64,
    pub far_field: f64,
    pub cells: usize,
    /// Multiplier on the conductivity, used to strengthen the coupling.
    pub stiffness: f64,
    pub flux_order: FluxOrder,
}

impl Default for FluidSurrogateConfig {
    /// Air-like parameters.
    fn default() -> Self {
        Self {
            length: 1e-3,
            conductivity: 0.03,
            heat_capacity: 1.2 * 1005.0,
            far_field: 273.0,
            cells: 20,
            stiffness: 1.0,
            flux_order: FluxOrder::Second,
        }
    }
}

impl FluidSurrogateConfig {
    pub fn validate(&self) -> Result<()> {
        let pos = |v: f64| v > 0.0 && v.is_finite();
        if !(pos(self.length) && pos(self.conductivity) && pos(self.heat_capacity) && pos(self.stiffness)) {
            return Err(FsiError::Config(format!(
                "fluid length, conductivity, heat capacity and stiffness must be positive: {self:?}"
            )));
        }
        if !pos(self.far_field) {
            return Err(FsiError::Config(format!("far-field temperature must be positive, got {}", self.far_field)));
        }
        if self.cells == 0 {
            return Err(FsiError::Config("fluid needs at least one cell".into()));
        }
        Ok(())
    }

    /// Conductivity including the stiffness multiplier.
    pub fn effective_conductivity(&self) -> f64 {
        self.conductivity * self.stiffness
    }

    pub fn cell_width(&self) -> f64 {
        self.length / self.cells as f64
    }

    fn second_order(&self) -> bool {
        self.flux_order == FluxOrder::Second && self.cells >= 2
    }
}

#[derive(Debug, Clone)]
pub struct FluidSurrogate {
    cfg: FluidSurrogateConfig,
    rk: RkState,
    /// Interface temperature at the last accepted time.
    interface: f64,
    current: Option<(Vec<f64>, f64)>,
    interface_backup: f64,
}

impl FluidSurrogate {
    /// Surrogate initialized with the steady linear profile between the
    /// interface temperature and the far field.
    pub fn new(cfg: FluidSurrogateConfig, interface_temperature: f64) -> Result<Self> {
        cfg.validate()?;
        let (n, l) = (cfg.cells, cfg.length);
        let cells = (0..n)
            .map(|i| {
                let xi = (i as f64 + 0.5) * l / n as f64;
                interface_temperature + (cfg.far_field - interface_temperature) * xi / l
            })
            .collect();
        Self::with_cells(cfg, cells, interface_temperature)
    }

    pub fn with_cells(cfg: FluidSurrogateConfig, cells: Vec<f64>, interface_temperature: f64) -> Result<Self> {
        cfg.validate()?;
        if cells.len() != cfg.cells {
            return Err(FsiError::Dimension { expected: cfg.cells, got: cells.len() });
        }
        if cells.iter().chain([&interface_temperature]).any(|t| !(t.is_finite() && *t > 0.0)) {
            return Err(FsiError::Contract("fluid temperatures must be positive".into()));
        }
        Ok(Self {
            cfg,
            rk: RkState::new(cells),
            interface: interface_temperature,
            current: None,
            interface_backup: interface_temperature,
        })
    }

    pub fn config(&self) -> &FluidSurrogateConfig {
        &self.cfg
    }

    /// Wall-normal temperature gradient at the interface face.
    fn interface_gradient(&self, cells: &[f64], wall: f64) -> f64 {
        let h = self.cfg.cell_width();
        if self.cfg.second_order() {
            (-8.0 * wall + 9.0 * cells[0] - cells[1]) / (3.0 * h)
        } else {
            (cells[0] - wall) / (0.5 * h)
        }
    }

    /// Heat flux into the structure, `lambda * dT/dxi` at the interface.
    pub fn interface_flux(&self, cells: &[f64], wall: f64) -> f64 {
        self.cfg.effective_conductivity() * self.interface_gradient(cells, wall)
    }

    /// Semi-discrete operator `A T + g` with `h rho c dT/dt = A T + g`.
    fn operator(&self, wall: f64) -> (BandMatrix, Vec<f64>) {
        let n = self.cfg.cells;
        let h = self.cfg.cell_width();
        let lam = self.cfg.effective_conductivity();
        let far = self.cfg.far_field;
        let mut a = BandMatrix::zeros(n, 1);
        let mut g = vec![0.0; n];
        for i in 0..n.saturating_sub(1) {
            let c = lam / h;
            a.add(i, i, -c);
            a.add(i, i + 1, c);
            a.add(i + 1, i + 1, -c);
            a.add(i + 1, i, c);
        }
        if self.cfg.second_order() {
            // one-sided quadratic reconstruction at both walls
            let c = lam / (3.0 * h);
            a.add(0, 0, -9.0 * c);
            a.add(0, 1, c);
            g[0] += 8.0 * c * wall;
            a.add(n - 1, n - 1, -9.0 * c);
            a.add(n - 1, n - 2, c);
            g[n - 1] += 8.0 * c * far;
        } else {
            let c = 2.0 * lam / h;
            a.add(0, 0, -c);
            g[0] += c * wall;
            a.add(n - 1, n - 1, -c);
            g[n - 1] += c * far;
        }
        (a, g)
    }

    /// Solves `(h rho c I - tau A) T = h rho c s + tau g` for the given wall
    /// temperature and returns the cell temperatures.
    pub fn solve_cells(&self, wall: f64, ctx: &StageContext) -> Result<Vec<f64>> {
        let start = self.rk.starting()?;
        let tau = ctx.implicit_step();
        let mass = self.cfg.cell_width() * self.cfg.heat_capacity;
        let (a, g) = self.operator(wall);
        let n = self.cfg.cells;
        let mut m = BandMatrix::zeros(n, 1);
        for i in 0..n {
            for j in i.saturating_sub(1)..(i + 2).min(n) {
                let v = -tau * a.get(i, j) + if i == j { mass } else { 0.0 };
                m.add(i, j, v);
            }
        }
        let rhs: Vec<f64> = start.iter().zip(&g).map(|(s, g)| mass * s + tau * g).collect();
        m.solve(&rhs).map_err(|e| FsiError::SubsolverFailure { solver: "fluid".into(), reason: e.to_string() })
    }
}

impl Subsolver for FluidSurrogate {
    fn name(&self) -> &str {
        "fluid"
    }

    fn interface_len(&self) -> usize {
        1
    }

    fn conductivity_range(&self) -> (f64, f64) {
        let l = self.cfg.effective_conductivity();
        (l, l)
    }

    fn interface_temperature(&self) -> Vec<f64> {
        vec![self.interface]
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
        Ok(vec![self.interface])
    }

    fn solve_stage(&mut self, interface_data: &[f64], ctx: &StageContext) -> Result<Vec<f64>> {
        if interface_data.len() != 1 {
            return Err(FsiError::Dimension { expected: 1, got: interface_data.len() });
        }
        let wall = interface_data[0];
        let cells = self.solve_cells(wall, ctx)?;
        let q = self.interface_flux(&cells, wall);
        if !q.is_finite() {
            return Err(FsiError::SubsolverFailure { solver: "fluid".into(), reason: "non-finite flux".into() });
        }
        self.current = Some((cells, wall));
        Ok(vec![q])
    }

    fn finish_stage(&mut self, ctx: &StageContext) -> Result<()> {
        let (cells, _) = self
            .current
            .clone()
            .ok_or_else(|| FsiError::Sequencing("fluid stage finished without a solve".into()))?;
        self.rk.finish_stage(ctx, cells)
    }

    fn local_error(&self, tableau: &SdirkTableau, dt: f64) -> Result<f64> {
        self.rk.local_error(tableau, dt)
    }

    fn accept_step(&mut self) -> Result<()> {
        let (_, wall) = self
            .current
            .take()
            .ok_or_else(|| FsiError::Sequencing("fluid accept without a stage solve".into()))?;
        self.rk.accept()?;
        self.interface = wall;
        Ok(())
    }

    fn backup(&mut self) {
        self.rk.backup();
        self.interface_backup = self.interface;
    }

    fn restore(&mut self) -> Result<()> {
        self.current = None;
        self.interface = self.interface_backup;
        self.rk.restore()
    }
}

//! Experiment configuration: a flat `key = value` format grouped into
//! `[section]` blocks. `#` and `;` start comments. Lists are comma
//! separated. Unknown sections or keys are errors, reported with their line.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use crate::acceleration::Accelerator;
use crate::error::{FsiError, Result};
use crate::fluid::{FluidSurrogateConfig, FluxOrder};
use crate::predictors::Predictor;
use crate::structure::{Material, NewtonMode};

#[derive(Debug, Clone, PartialEq)]
pub struct StructureParams {
    pub length: f64,
    pub elements: usize,
    pub order: usize,
    pub initial_temperature: f64,
    pub material: Material,
    pub newton: NewtonMode,
}

impl Default for StructureParams {
    fn default() -> Self {
        Self {
            length: 0.05,
            elements: 50,
            order: 2,
            initial_temperature: 900.0,
            material: Material::default(),
            newton: NewtonMode::Newton,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StageStudyParams {
    /// Step sizes of the single-stage runs.
    pub dts: Vec<f64>,
    /// Absolute residual norm at which each curve stops.
    pub residual_target: f64,
    /// Fluid stiffness multiplier used for the study.
    pub stiffness: f64,
    pub max_iterations: usize,
}

impl Default for StageStudyParams {
    fn default() -> Self {
        Self { dts: vec![1.0, 5.0], residual_target: 1e-8, stiffness: 300.0, max_iterations: 500 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub name: String,
    pub end_time: f64,
    pub dt0: f64,
    pub tols: Vec<f64>,
    pub accelerators: Vec<Accelerator>,
    pub predictors: Vec<Predictor>,
    pub fixed_vs_adaptive: bool,
    /// Tolerances of the fixed versus adaptive comparison. Kept separate
    /// from `tols` because accuracy-matched fixed runs at very tight
    /// tolerances need tens of thousands of steps.
    pub fixed_tols: Vec<f64>,
    /// Tolerance of the reference run used to measure global errors.
    pub reference_tol: f64,
    pub max_iterations: usize,
    /// Budget of step attempts per run, accepted or rejected.
    pub max_attempts: usize,
    pub window: Option<usize>,
    pub structure: StructureParams,
    pub fluid: FluidSurrogateConfig,
    pub stage_study: StageStudyParams,
    pub output: PathBuf,
    pub seed: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            name: "cooling".into(),
            end_time: 100.0,
            dt0: 0.05,
            tols: vec![1e-2, 1e-3, 1e-4, 1e-5],
            accelerators: Accelerator::ALL.to_vec(),
            predictors: Predictor::ALL.to_vec(),
            fixed_vs_adaptive: true,
            fixed_tols: vec![1e-2, 1e-3, 1e-4],
            reference_tol: 1e-8,
            max_iterations: 100,
            max_attempts: 1_000_000,
            window: None,
            structure: StructureParams::default(),
            // thirty times the conductivity of air: strong enough coupling
            // that the fixed-point loop needs several iterations per stage
            fluid: FluidSurrogateConfig { stiffness: 30.0, ..FluidSurrogateConfig::default() },
            stage_study: StageStudyParams::default(),
            output: PathBuf::from("out"),
            seed: 42,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(FsiError::Config(m));
        if !(self.end_time > 0.0 && self.end_time.is_finite()) {
            return bad(format!("end_time must be positive, got {}", self.end_time));
        }
        if !(self.dt0 > 0.0) {
            return bad(format!("dt0 must be positive, got {}", self.dt0));
        }
        let in_range = |t: &[f64]| !t.is_empty() && t.iter().all(|t| *t > 0.0 && *t < 1.0);
        if !in_range(&self.tols) || !in_range(&self.fixed_tols) {
            return bad(format!("tolerances must lie in (0, 1), got {:?} and {:?}", self.tols, self.fixed_tols));
        }
        if !(self.reference_tol > 0.0) {
            return bad("reference_tol must be positive".into());
        }
        if self.accelerators.is_empty() || self.predictors.is_empty() {
            return bad("accelerator and predictor lists must be non-empty".into());
        }
        if self.max_attempts == 0 {
            return bad("max_attempts must be at least 1".into());
        }
        if self.max_iterations < 2 {
            return bad("max_iterations must be at least 2".into());
        }
        let s = &self.structure;
        if !(s.length > 0.0) || s.elements == 0 || !(1..=2).contains(&s.order) || !(s.initial_temperature > 0.0) {
            return bad(format!("invalid structure block {s:?}"));
        }
        self.fluid.validate()?;
        let st = &self.stage_study;
        if st.dts.is_empty()
            || st.dts.iter().any(|d| !(*d > 0.0))
            || !(st.residual_target > 0.0)
            || !(st.stiffness > 0.0)
            || st.max_iterations < 2
        {
            return bad(format!("invalid stage_study block {st:?}"));
        }
        Ok(())
    }

    /// Tolerances sorted descending, as they appear in reports.
    pub fn sorted_tols(&self) -> Vec<f64> {
        descending(&self.tols)
    }

    pub fn sorted_fixed_tols(&self) -> Vec<f64> {
        descending(&self.fixed_tols)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| FsiError::Config(format!("cannot read {}: {e}", path.display())))?;
        parse(&text)
    }
}

fn descending(tols: &[f64]) -> Vec<f64> {
    let mut t = tols.to_vec();
    t.sort_by(|a, b| b.total_cmp(a));
    t
}

type Sections = BTreeMap<String, BTreeMap<String, (usize, String)>>;

fn tokenize(text: &str) -> Result<Sections> {
    let mut out: Sections = BTreeMap::new();
    let mut section = String::from("case");
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.split(['#', ';']).next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('[') {
            let name = rest
                .strip_suffix(']')
                .ok_or_else(|| FsiError::Parse { line: line_no, msg: "unterminated section header".into() })?;
            section = name.trim().to_ascii_lowercase();
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| FsiError::Parse { line: line_no, msg: format!("expected 'key = value', got '{line}'") })?;
        let key = k.trim().to_ascii_lowercase();
        if key.is_empty() {
            return Err(FsiError::Parse { line: line_no, msg: "empty key".into() });
        }
        let prev = out.entry(section.clone()).or_default().insert(key.clone(), (line_no, v.trim().to_string()));
        if prev.is_some() {
            return Err(FsiError::Parse { line: line_no, msg: format!("duplicate key '{key}' in [{section}]") });
        }
    }
    Ok(out)
}

/// Consumes the keys of one section; leftovers are reported as unknown.
struct SectionReader<'a> {
    name: &'a str,
    entries: BTreeMap<String, (usize, String)>,
}

impl SectionReader<'_> {
    fn take<T>(&mut self, key: &str, parse: impl Fn(&str) -> std::result::Result<T, String>) -> Result<Option<T>> {
        match self.entries.remove(key) {
            None => Ok(None),
            Some((line, v)) => parse(&v).map(Some).map_err(|msg| FsiError::Parse {
                line,
                msg: format!("[{}] {key}: {msg}", self.name),
            }),
        }
    }

    fn set<T>(&mut self, key: &str, target: &mut T, parse: impl Fn(&str) -> std::result::Result<T, String>) -> Result<()> {
        if let Some(v) = self.take(key, parse)? {
            *target = v;
        }
        Ok(())
    }

    fn finish(self) -> Result<()> {
        match self.entries.into_iter().min_by_key(|(_, (line, _))| *line) {
            None => Ok(()),
            Some((key, (line, _))) => {
                Err(FsiError::Parse { line, msg: format!("unknown key '{key}' in [{}]", self.name) })
            }
        }
    }
}

fn float(s: &str) -> std::result::Result<f64, String> {
    s.parse::<f64>().map_err(|_| format!("'{s}' is not a number"))
}

fn uint(s: &str) -> std::result::Result<usize, String> {
    s.parse::<usize>().map_err(|_| format!("'{s}' is not a non-negative integer"))
}

fn boolean(s: &str) -> std::result::Result<bool, String> {
    match s.to_ascii_lowercase().as_str() {
        "true" | "yes" | "on" | "1" => Ok(true),
        "false" | "no" | "off" | "0" => Ok(false),
        _ => Err(format!("'{s}' is not a boolean")),
    }
}

fn list<T>(s: &str, item: impl Fn(&str) -> std::result::Result<T, String>) -> std::result::Result<Vec<T>, String> {
    s.split(',').map(str::trim).filter(|t| !t.is_empty()).map(item).collect()
}

fn named<T: std::str::FromStr<Err = FsiError>>(s: &str) -> std::result::Result<T, String> {
    s.parse::<T>().map_err(|e| e.to_string())
}

/// Parses configuration text; absent keys keep their defaults.
pub fn parse(text: &str) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::default();
    let sections = tokenize(text)?;
    for (name, entries) in sections {
        let mut r = SectionReader { name: &name, entries };
        match name.as_str() {
            "case" => {
                r.set("name", &mut cfg.name, |s| Ok(s.to_string()))?;
                r.set("end_time", &mut cfg.end_time, float)?;
                r.set("dt0", &mut cfg.dt0, float)?;
                r.set("tols", &mut cfg.tols, |s| list(s, float))?;
                r.set("accelerators", &mut cfg.accelerators, |s| list(s, named))?;
                r.set("predictors", &mut cfg.predictors, |s| list(s, named))?;
                r.set("fixed_vs_adaptive", &mut cfg.fixed_vs_adaptive, boolean)?;
                r.set("fixed_tols", &mut cfg.fixed_tols, |s| list(s, float))?;
                r.set("reference_tol", &mut cfg.reference_tol, float)?;
                r.set("max_iterations", &mut cfg.max_iterations, uint)?;
                r.set("max_attempts", &mut cfg.max_attempts, uint)?;
                if let Some(w) = r.take("window", uint)? {
                    cfg.window = (w > 0).then_some(w);
                }
                r.set("output", &mut cfg.output, |s| Ok(PathBuf::from(s)))?;
                r.set("seed", &mut cfg.seed, |s| s.parse::<u64>().map_err(|_| format!("'{s}' is not a seed")))?;
            }
            "structure" => {
                let s = &mut cfg.structure;
                r.set("length", &mut s.length, float)?;
                r.set("elements", &mut s.elements, uint)?;
                r.set("order", &mut s.order, uint)?;
                r.set("initial_temperature", &mut s.initial_temperature, float)?;
                r.set("newton", &mut s.newton, |v| match v.to_ascii_lowercase().as_str() {
                    "full" | "newton" => Ok(NewtonMode::Newton),
                    "picard" => Ok(NewtonMode::Picard),
                    _ => Err(format!("unknown newton mode '{v}'")),
                })?;
                let kind = r.take("material", |v| Ok(v.to_ascii_lowercase()))?;
                let lam = r.take("conductivity", float)?;
                let cp = r.take("specific_heat", float)?;
                let rho = r.take("density", float)?;
                s.material = match kind.as_deref() {
                    None | Some("steel") => Material::Steel51CrV4 { celsius: true },
                    Some("steel-kelvin") => Material::Steel51CrV4 { celsius: false },
                    Some("constant") => match (lam, cp, rho) {
                        (Some(l), Some(c), Some(d)) => {
                            Material::Constant { conductivity: l, specific_heat: c, density: d }
                        }
                        _ => {
                            return Err(FsiError::Config(
                                "constant material needs conductivity, specific_heat and density".into(),
                            ))
                        }
                    },
                    Some(other) => return Err(FsiError::Config(format!("unknown material '{other}'"))),
                };
            }
            "fluid" => {
                let f = &mut cfg.fluid;
                r.set("length", &mut f.length, float)?;
                r.set("conductivity", &mut f.conductivity, float)?;
                r.set("heat_capacity", &mut f.heat_capacity, float)?;
                r.set("far_field", &mut f.far_field, float)?;
                r.set("cells", &mut f.cells, uint)?;
                r.set("stiffness", &mut f.stiffness, float)?;
                r.set("flux_order", &mut f.flux_order, |v| match v {
                    "1" | "first" => Ok(FluxOrder::First),
                    "2" | "second" => Ok(FluxOrder::Second),
                    _ => Err(format!("flux_order must be 1 or 2, got '{v}'")),
                })?;
            }
            "stage_study" => {
                let st = &mut cfg.stage_study;
                r.set("dts", &mut st.dts, |s| list(s, float))?;
                r.set("residual_target", &mut st.residual_target, float)?;
                r.set("stiffness", &mut st.stiffness, float)?;
                r.set("max_iterations", &mut st.max_iterations, uint)?;
            }
            other => {
                let line = r.entries.values().map(|(l, _)| *l).min().unwrap_or(0);
                return Err(FsiError::Parse { line, msg: format!("unknown section [{other}]") });
            }
        }
        r.finish()?;
    }
    cfg.validate()?;
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_text_gives_defaults() {
        assert_eq!(parse("").unwrap(), ExperimentConfig::default());
    }

    #[test]
    fn full_example() {
        let text = "\
# cooling plate
[case]
name = plate
end_time = 50
tols = 1e-3, 1e-4
accelerators = none, aitken
predictors = linear
window = 0

[structure]
material = constant
conductivity = 2
specific_heat = 500
density = 8000
order = 1

[fluid]
stiffness = 10 ; stronger coupling
flux_order = first
";
        let c = parse(text).unwrap();
        assert_eq!(c.name, "plate");
        assert_eq!(c.end_time, 50.0);
        assert_eq!(c.tols, vec![1e-3, 1e-4]);
        assert_eq!(c.accelerators, vec![Accelerator::None, Accelerator::Aitken]);
        assert_eq!(c.predictors, vec![Predictor::Linear]);
        assert_eq!(c.window, None);
        assert_eq!(c.structure.order, 1);
        assert_eq!(
            c.structure.material,
            Material::Constant { conductivity: 2.0, specific_heat: 500.0, density: 8000.0 }
        );
        assert_eq!(c.fluid.stiffness, 10.0);
        assert_eq!(c.fluid.flux_order, FluxOrder::First);
    }

    #[test]
    fn diagnostics_carry_line_numbers() {
        let cases = [
            ("[case]\nend_time = abc\n", 2),
            ("[case]\n\nbogus = 1\n", 3),
            ("[nowhere]\nx = 1\n", 2),
            ("[case]\nname\n", 2),
            ("[case]\ndt0 = 1\ndt0 = 2\n", 3),
            ("[case\n", 1),
            ("[case]\naccelerators = none, anderson\n", 2),
        ];
        for (text, line) in cases {
            match parse(text) {
                Err(FsiError::Parse { line: l, .. }) => assert_eq!(l, line, "{text}"),
                other => panic!("{text}: {other:?}"),
            }
        }
    }

    #[test]
    fn semantic_validation() {
        assert!(matches!(parse("end_time = -1"), Err(FsiError::Config(_))));
        assert!(matches!(parse("tols = 2"), Err(FsiError::Config(_))));
        assert!(matches!(parse("[structure]\nmaterial = constant\n"), Err(FsiError::Config(_))));
    }

    #[test]
    fn tolerances_report_descending() {
        let c = parse("tols = 1e-5, 1e-2, 1e-3").unwrap();
        assert_eq!(c.sorted_tols(), vec![1e-2, 1e-3, 1e-5]);
    }
}

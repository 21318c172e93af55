//! Reproducible pipelines: a JSON scenario lists stages (generate, solve,
//! extract, evolve-chart, pullback, evolve-constrained, diagnose) that run
//! in order, write every intermediate artifact, and finish with a manifest.
//!
//! Stage inputs name the outputs of earlier stages only; a reference to a
//! later stage is unresolvable when reached and fails validation, so cycles
//! cannot form. Unknown keys anywhere in the file are rejected. All
//! randomness flows from the scenario seed through a counter per stage, so
//! re-running a scenario reproduces every artifact byte for byte.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use ndarray::Array2;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::chart::{ChartTag, GridSpec3, ScalarChartField};
use crate::error::{Error, Result};
use crate::generators::{abc_field, radial_beltrami, rotated_harmonic_field};
use crate::gs::{GridGeom, SolverParams};
use crate::io::{self, Table};
use crate::levelset::{evolve_chart, ChartParams, GriddedLevelField, SurfaceChart};
use crate::levelset::extract_level_curve;
use crate::ops::{beltrami_residual, first_integral_defect, Factor, ScalarField, Wrap};
use crate::profile::{ProfileTag, RadialProfile};
use crate::pullback::{
    dirichlet_energy, evolve_constrained, pullback_form, ConstrainedEvolution, EvolutionPath,
    PullbackForm,
};
use crate::report::{norms2_interior, norms3_interior, order_estimate, DiagnosticReport};
use crate::rigidity::{compatibility_rank, prop31_diagnostic, CompatibilitySystem};
use crate::vector::SymmetricVectorField;
use crate::vortex::{field_from_vortex, solve_free_boundary, BranchMode, FreeBoundaryProblem, SeedKind, VortexKind};

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    /// Root seed for any randomized stage data.
    #[serde(default)]
    pub seed: u64,
    pub stages: Vec<StageKind>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StageKind {
    Generate(GenerateStage),
    Solve(SolveStage),
    Extract(ExtractStage),
    EvolveChart(EvolveChartStage),
    Pullback(PullbackStage),
    EvolveConstrained(EvolveConstrainedStage),
    Diagnose(DiagnoseStage),
}

impl StageKind {
    pub fn id(&self) -> &str {
        match self {
            StageKind::Generate(s) => &s.id,
            StageKind::Solve(s) => &s.id,
            StageKind::Extract(s) => &s.id,
            StageKind::EvolveChart(s) => &s.id,
            StageKind::Pullback(s) => &s.id,
            StageKind::EvolveConstrained(s) => &s.id,
            StageKind::Diagnose(s) => &s.id,
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            StageKind::Generate(_) => "generate",
            StageKind::Solve(_) => "solve",
            StageKind::Extract(_) => "extract",
            StageKind::EvolveChart(_) => "evolve-chart",
            StageKind::Pullback(_) => "pullback",
            StageKind::EvolveConstrained(_) => "evolve-constrained",
            StageKind::Diagnose(_) => "diagnose",
        }
    }
}

/// Closed-form 1D profile, reconstructed exactly on load.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct ProfileSpec {
    pub tag: ProfileTag,
    pub start: f64,
    pub end: f64,
    pub n: usize,
}

impl ProfileSpec {
    fn build(&self, name: &str) -> Result<RadialProfile> {
        RadialProfile::tagged(self.tag, self.start, self.end, self.n, name)
    }
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct Rect2 {
    pub lo: [f64; 2],
    pub hi: [f64; 2],
    pub shape: [usize; 2],
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct GenerateStage {
    pub id: String,
    pub family: Family,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", rename_all_fields = "kebab-case", deny_unknown_fields)]
pub enum Family {
    /// Classical three-mode field, unit factor, on a seamless periodic
    /// cube: n cells per axis, the last node one spacing short of `hi`.
    Abc {
        a: f64,
        b: f64,
        c: f64,
        lo: f64,
        hi: f64,
        n: usize,
    },
    /// Purely radial swirl from the pointwise ODE, sampled on a meridional
    /// rectangle. Registers `<id>.factor` alongside the field.
    Radial {
        factor: ProfileSpec,
        r_start: f64,
        r_end: f64,
        #[serde(default)]
        step: Option<f64>,
        u_theta0: f64,
        u_z0: f64,
        grid: Rect2,
    },
    /// Planar harmonic pair rotated about the axis by the antiderivative of
    /// an axial factor.
    RotatedHarmonic {
        factor: ProfileSpec,
        seed_planar: PlanarSeed,
        lo: [f64; 2],
        hi: [f64; 2],
        shape: [usize; 2],
        #[serde(default)]
        tol: Option<f64>,
    },
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub enum PlanarSeed {
    Constant { v1: f64, v2: f64 },
    /// The harmonic pair (x1, -x2).
    Saddle,
}

const DEFAULT_RADIAL_STEP: f64 = 1e-3;
const DEFAULT_HARMONIC_TOL: f64 = 1e-8;
const DEFAULT_TANGENCY_TOL: f64 = 1e-6;
const DEFAULT_GRAD_FLOOR: f64 = 1e-10;
const DEFAULT_SUBSTEPS: usize = 4;

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct SolveStage {
    pub id: String,
    pub kind: VortexKind,
    pub travel_speed: f64,
    pub flux_offset: f64,
    pub exponent: u32,
    pub domain: Rect2,
    pub seed_core: SeedKind,
    pub branch: BranchMode,
    #[serde(default)]
    pub solver: SolverOverrides,
}

#[derive(Clone, Copy, Debug, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct SolverOverrides {
    pub max_iter: Option<usize>,
    pub tol: Option<f64>,
    pub omega: Option<f64>,
    pub cg_tol: Option<f64>,
    pub cg_max_iter: Option<usize>,
    pub stall_window: Option<usize>,
}

impl SolverOverrides {
    fn resolve(&self) -> SolverParams {
        let d = SolverParams::default();
        SolverParams {
            max_iter: self.max_iter.unwrap_or(d.max_iter),
            tol: self.tol.unwrap_or(d.tol),
            omega: self.omega.unwrap_or(d.omega),
            cg_tol: self.cg_tol.unwrap_or(d.cg_tol),
            cg_max_iter: self.cg_max_iter.unwrap_or(d.cg_max_iter),
            stall_window: self.stall_window.unwrap_or(d.stall_window),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct ExtractStage {
    pub id: String,
    /// Reference to a scalar chart output of an earlier stage.
    pub input: String,
    pub level: f64,
    pub n_samples: usize,
    #[serde(default)]
    pub grad_floor: Option<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct EvolveChartStage {
    pub id: String,
    pub input: String,
    /// Seed level c; the chart covers c .. c + t-end.
    pub level: f64,
    pub t_end: f64,
    pub n_xi1: usize,
    pub nt: usize,
    #[serde(default)]
    pub substeps: Option<usize>,
    /// Slice radii for conoid charts.
    #[serde(default)]
    pub xi2: Option<Vec<f64>>,
    #[serde(default)]
    pub grad_floor: Option<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct PullbackStage {
    pub id: String,
    pub field: String,
    pub chart: String,
    /// Symmetry-coordinate samples for cylinder and revolution charts;
    /// empty for conoid charts, which carry their own slice radii.
    #[serde(default)]
    pub xi2: Vec<f64>,
    #[serde(default)]
    pub tangency_tol: Option<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct EvolveConstrainedStage {
    pub id: String,
    pub chart: String,
    #[serde(default)]
    pub path: PathSpec,
    #[serde(default)]
    pub substeps: Option<usize>,
    pub initial: InitialData,
}

#[derive(Clone, Copy, Debug, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PathSpec {
    #[default]
    Case,
    GenericMetric,
}

impl PathSpec {
    fn to_path(self) -> EvolutionPath {
        match self {
            PathSpec::Case => EvolutionPath::Case,
            PathSpec::GenericMetric => EvolutionPath::GenericMetric,
        }
    }

    fn as_str(self) -> &'static str {
        match self {
            PathSpec::Case => "case",
            PathSpec::GenericMetric => "generic-metric",
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", rename_all_fields = "kebab-case", deny_unknown_fields)]
pub enum InitialData {
    /// Time-zero components of a pullback form from an earlier stage.
    FromPullback { form: String },
    /// Constant components, one row per xi2 sample (one row if empty).
    Uniform {
        beta1: f64,
        beta2: f64,
        #[serde(default)]
        xi2: Vec<f64>,
    },
    /// Constant components plus seeded random trigonometric noise in both
    /// components, varying along the curve and across rows.
    Perturbed {
        beta1: f64,
        beta2: f64,
        #[serde(default)]
        xi2: Vec<f64>,
        amplitude: f64,
        #[serde(default)]
        modes: Option<usize>,
    },
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct DiagnoseStage {
    pub id: String,
    pub checks: Vec<Check>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub enum FactorSpec {
    Constant { value: f64 },
    /// Reference to a scalar chart output of an earlier stage.
    Scalar { input: String },
    Axial { profile: ProfileSpec },
}

#[derive(Clone, Copy, Debug, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WrapSpec {
    #[default]
    Clamped,
    Periodic,
}

impl WrapSpec {
    fn to_wrap(self) -> Wrap {
        match self {
            WrapSpec::Clamped => Wrap::Clamped,
            WrapSpec::Periodic => Wrap::Periodic,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", rename_all_fields = "kebab-case", deny_unknown_fields)]
pub enum Check {
    /// Max norm of the curl relation defect of a field against a factor.
    BeltramiResidual {
        name: String,
        field: String,
        factor: FactorSpec,
        #[serde(default)]
        wrap: WrapSpec,
        max_linf: f64,
    },
    /// Convergence order of the curl relation defect across same-family
    /// fields generated at different resolutions.
    ResidualOrder {
        name: String,
        fields: Vec<String>,
        factor: FactorSpec,
        #[serde(default)]
        wrap: WrapSpec,
        min_order: f64,
        #[serde(default)]
        max_order: Option<f64>,
    },
    /// Max norm of u . grad f, which vanishes for exact solutions.
    FirstIntegral {
        name: String,
        field: String,
        factor: FactorSpec,
        #[serde(default)]
        wrap: WrapSpec,
        max_linf: f64,
    },
    /// Normalized variations of the pullback components that the torus
    /// normal form says must vanish.
    NormalForm {
        name: String,
        form: String,
        max_beta2_xi1: f64,
        #[serde(default)]
        max_beta1_xi2: Option<f64>,
        #[serde(default)]
        max_beta2_xi2: Option<f64>,
    },
    /// Weighted Dirichlet energy of the second pullback component at the
    /// final time of a closed chart.
    DirichletEnergy {
        name: String,
        form: String,
        chart: String,
        max_value: f64,
    },
    /// Nullspace dimension of a model compatibility system.
    Rank {
        name: String,
        system: RankSystem,
        n: usize,
        threshold_coef: f64,
        expect_dim: usize,
    },
    /// Bounds on the constraint drift of an evolve-constrained stage.
    Drift {
        name: String,
        evolution: String,
        #[serde(default)]
        max_final: Option<f64>,
        #[serde(default)]
        min_peak_ratio: Option<f64>,
    },
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub enum RankSystem {
    RadialFactor,
    RadialFactorScaled,
    AngularFactor { r0: f64 },
    RotatedDivergence,
}

impl RankSystem {
    fn to_system(self) -> CompatibilitySystem {
        match self {
            RankSystem::RadialFactor => CompatibilitySystem::RadialFactor,
            RankSystem::RadialFactorScaled => CompatibilitySystem::RadialFactorScaled,
            RankSystem::AngularFactor { r0 } => CompatibilitySystem::AngularFactor { r0 },
            RankSystem::RotatedDivergence => CompatibilitySystem::RotatedDivergenceOnly,
        }
    }
}

#[derive(Debug)]
pub struct RunOutcome {
    pub out_dir: PathBuf,
    /// Human-readable descriptions of every diagnostic threshold violation.
    pub violations: Vec<String>,
}

impl RunOutcome {
    pub fn exit_code(&self) -> i32 {
        if self.violations.is_empty() {
            0
        } else {
            3
        }
    }
}

pub fn load_scenario(path: impl AsRef<Path>) -> Result<Scenario> {
    let scenario: Scenario = serde_json::from_str(&fs::read_to_string(path)?)?;
    validate(&scenario)?;
    Ok(scenario)
}

fn validate(scenario: &Scenario) -> Result<()> {
    let ok_name = |s: &str| {
        !s.is_empty()
            && s.chars()
                .all(|c| c.is_ascii_lowercase() || c.is_ascii_digit() || c == '-' || c == '_')
    };
    if !ok_name(&scenario.name) {
        return Err(Error::Validation(format!(
            "scenario name '{}' must be lowercase alphanumeric with dashes",
            scenario.name
        )));
    }
    if scenario.stages.is_empty() {
        return Err(Error::Validation("scenario has no stages".into()));
    }
    let mut seen = std::collections::BTreeSet::new();
    for stage in &scenario.stages {
        if !ok_name(stage.id()) {
            return Err(Error::Validation(format!(
                "stage id '{}' must be lowercase alphanumeric with dashes",
                stage.id()
            )));
        }
        if !seen.insert(stage.id().to_string()) {
            return Err(Error::Validation(format!("duplicate stage id '{}'", stage.id())));
        }
    }
    Ok(())
}

/// Counted splittable generator: stage k draws from the k-th output of a
/// splitmix stream over the scenario seed, so inserting a stage does not
/// reshuffle the randomness of unrelated stages.
fn stage_rng(seed: u64, stage_index: usize) -> ChaCha8Rng {
    let mut state = seed;
    let mut key = 0u64;
    for _ in 0..=stage_index {
        state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        key = z ^ (z >> 31);
    }
    ChaCha8Rng::seed_from_u64(key)
}

#[derive(Default)]
struct Registry {
    fields: BTreeMap<String, SymmetricVectorField>,
    scalars: BTreeMap<String, ScalarChartField>,
    charts: BTreeMap<String, SurfaceChart>,
    forms: BTreeMap<String, PullbackForm>,
    evolutions: BTreeMap<String, ConstrainedEvolution>,
}

fn unknown_ref(kind: &str, name: &str) -> Error {
    Error::Validation(format!(
        "unknown {kind} reference '{name}': stage inputs must name outputs of earlier stages"
    ))
}

impl Registry {
    fn field(&self, name: &str) -> Result<&SymmetricVectorField> {
        self.fields.get(name).ok_or_else(|| unknown_ref("field", name))
    }

    fn scalar(&self, name: &str) -> Result<&ScalarChartField> {
        self.scalars.get(name).ok_or_else(|| unknown_ref("scalar", name))
    }

    fn chart(&self, name: &str) -> Result<&SurfaceChart> {
        self.charts.get(name).ok_or_else(|| unknown_ref("chart", name))
    }

    fn form(&self, name: &str) -> Result<&PullbackForm> {
        self.forms.get(name).ok_or_else(|| unknown_ref("form", name))
    }

    fn evolution(&self, name: &str) -> Result<&ConstrainedEvolution> {
        self.evolutions.get(name).ok_or_else(|| unknown_ref("evolution", name))
    }
}

/// Execute every stage in order, writing artifacts and the manifest into
/// `out_root/<scenario name>/`. Diagnostic threshold violations do not
/// abort the run; they are listed in the outcome and the manifest.
pub fn run(scenario: &Scenario, out_root: impl AsRef<Path>) -> Result<RunOutcome> {
    validate(scenario)?;
    let out_dir = out_root.as_ref().join(&scenario.name);
    fs::create_dir_all(&out_dir)?;

    let mut reg = Registry::default();
    let mut violations: Vec<String> = Vec::new();
    let mut stage_records: Vec<Value> = Vec::new();

    for (index, stage) in scenario.stages.iter().enumerate() {
        let record = match stage {
            StageKind::Generate(s) => run_generate(s, &mut reg, &out_dir)?,
            StageKind::Solve(s) => run_solve(s, &mut reg, &out_dir)?,
            StageKind::Extract(s) => run_extract(s, &mut reg, &out_dir)?,
            StageKind::EvolveChart(s) => run_evolve_chart(s, &mut reg, &out_dir)?,
            StageKind::Pullback(s) => run_pullback(s, &mut reg, &out_dir)?,
            StageKind::EvolveConstrained(s) => {
                let rng = stage_rng(scenario.seed, index);
                run_evolve_constrained(s, rng, &mut reg, &out_dir)?
            }
            StageKind::Diagnose(s) => run_diagnose(s, &reg, &out_dir, &mut violations)?,
        };
        let mut wrapped = serde_json::Map::new();
        wrapped.insert("id".into(), Value::String(stage.id().to_string()));
        wrapped.insert("kind".into(), Value::String(stage.kind_name().to_string()));
        if let Value::Object(inner) = record {
            for (k, v) in inner {
                wrapped.insert(k, v);
            }
        }
        stage_records.push(Value::Object(wrapped));
    }

    let manifest = json!({
        "name": scenario.name,
        "seed": scenario.seed,
        "version": env!("CARGO_PKG_VERSION"),
        "stages": stage_records,
        "violations": violations,
    });
    let mut text = serde_json::to_string_pretty(&manifest)?;
    text.push('\n');
    fs::write(out_dir.join("manifest.json"), text)?;

    Ok(RunOutcome { out_dir, violations })
}

fn csv_name(id: &str, sub: Option<&str>) -> String {
    match sub {
        None => format!("{id}.csv"),
        Some(s) => format!("{id}.{s}.csv"),
    }
}

/// Build one generator family: the field, its factor chart when the
/// construction produces one (the radial swirl), and the resolved
/// parameters echoed into manifests.
pub fn build_family(
    family: &Family,
    id: &str,
) -> Result<(SymmetricVectorField, Option<ScalarChartField>, Value)> {
    match family {
        Family::Abc { a, b, c, lo, hi, n } => {
            if *n < 4 {
                return Err(Error::GridTooSmall(format!("{n} cells per axis")));
            }
            if !(hi > lo) {
                return Err(Error::InvalidParameter(format!(
                    "degenerate extent [{lo}, {hi}]"
                )));
            }
            let h = (hi - lo) / *n as f64;
            let spec = GridSpec3 {
                origin: [*lo; 3],
                spacing: [h; 3],
                shape: [*n; 3],
            };
            let field = abc_field(*a, *b, *c, &spec)?;
            let params = json!({
                "family": "abc", "a": a, "b": b, "c": c,
                "lo": lo, "hi": hi, "n": n,
            });
            Ok((field, None, params))
        }
        Family::Radial {
            factor,
            r_start,
            r_end,
            step,
            u_theta0,
            u_z0,
            grid,
        } => {
            let step = step.unwrap_or(DEFAULT_RADIAL_STEP);
            let profile = factor.build(&format!("{id}-factor"))?;
            let sol = radial_beltrami(&profile, *r_start, *r_end, step, *u_theta0, *u_z0)?;
            let (field, fct) = sol.to_rotational(
                grid.lo[0],
                grid.hi[0],
                grid.lo[1],
                grid.hi[1],
                grid.shape,
            )?;
            let factor_chart = match fct {
                Factor::Chart(f) => Some(f),
                _ => None,
            };
            let params = json!({
                "family": "radial", "factor": factor, "r-start": r_start,
                "r-end": r_end, "step": step, "u-theta0": u_theta0,
                "u-z0": u_z0, "grid": grid,
            });
            Ok((field, factor_chart, params))
        }
        Family::RotatedHarmonic {
            factor,
            seed_planar,
            lo,
            hi,
            shape,
            tol,
        } => {
            let tol = tol.unwrap_or(DEFAULT_HARMONIC_TOL);
            let profile = factor.build(&format!("{id}-factor"))?;
            let planar = |c: usize| -> Result<ScalarChartField> {
                ScalarChartField::sample(
                    ChartTag::CartesianXy,
                    *lo,
                    *hi,
                    *shape,
                    if c == 0 { "v1" } else { "v2" },
                    |x, y| match seed_planar {
                        PlanarSeed::Constant { v1, v2 } => {
                            if c == 0 {
                                *v1
                            } else {
                                *v2
                            }
                        }
                        PlanarSeed::Saddle => {
                            if c == 0 {
                                x
                            } else {
                                -y
                            }
                        }
                    },
                )
            };
            let field = rotated_harmonic_field(planar(0)?, planar(1)?, profile, tol)?;
            let params = json!({
                "family": "rotated-harmonic", "factor": factor,
                "seed-planar": seed_planar, "lo": lo, "hi": hi,
                "shape": shape, "tol": tol,
            });
            Ok((field, None, params))
        }
    }
}

fn run_generate(s: &GenerateStage, reg: &mut Registry, out: &Path) -> Result<Value> {
    let (field, factor_chart, params) = build_family(&s.family, &s.id)?;
    let mut artifacts = serde_json::Map::new();
    let file = csv_name(&s.id, None);
    io::write_field(out.join(&file), &field)?;
    artifacts.insert("field".into(), Value::String(file));
    if let Some(f) = factor_chart {
        let file = csv_name(&s.id, Some("factor"));
        io::write_scalar_chart(out.join(&file), &f)?;
        artifacts.insert("factor".into(), Value::String(file));
        reg.scalars.insert(format!("{}.factor", s.id), f);
    }
    reg.fields.insert(s.id.clone(), field);
    Ok(json!({ "artifacts": artifacts, "parameters": params }))
}

fn run_solve(s: &SolveStage, reg: &mut Registry, out: &Path) -> Result<Value> {
    let solver = s.solver.resolve();
    let problem = FreeBoundaryProblem {
        kind: s.kind,
        travel_speed: s.travel_speed,
        flux_offset: s.flux_offset,
        exponent: s.exponent,
        domain: GridGeom::rect(s.domain.lo, s.domain.hi, s.domain.shape)?,
        seed: s.seed_core,
        branch: s.branch,
        solver: solver.clone(),
    };
    let solution = solve_free_boundary(&problem)?;
    let (field, factor) = field_from_vortex(&problem, &solution)?;

    let mut artifacts = serde_json::Map::new();
    let add_scalar = |name: &str,
                      f: &ScalarChartField,
                      artifacts: &mut serde_json::Map<String, Value>,
                      reg: &mut Registry|
     -> Result<()> {
        let file = csv_name(&s.id, Some(name));
        io::write_scalar_chart(out.join(&file), f)?;
        artifacts.insert(name.to_string(), Value::String(file));
        reg.scalars.insert(format!("{}.{}", s.id, name), f.clone());
        Ok(())
    };
    add_scalar("psi", &solution.psi, &mut artifacts, reg)?;
    add_scalar("core-mask", &solution.core_mask, &mut artifacts, reg)?;
    if let Factor::Chart(f) = &factor {
        add_scalar("factor", f, &mut artifacts, reg)?;
    }
    let file = csv_name(&s.id, None);
    io::write_field(out.join(&file), &field)?;
    artifacts.insert("field".into(), Value::String(file));
    reg.fields.insert(s.id.clone(), field);

    let mut history = Table::new(&["iteration", "residual"]);
    for (i, r) in solution.report.residual_history.iter().enumerate() {
        history.push(vec![i as f64, *r])?;
    }
    history.set_meta("tol", solver.tol);
    history.set_meta("omega", solver.omega);
    let hist_file = csv_name(&s.id, Some("history"));
    history.write(out.join(&hist_file))?;
    artifacts.insert("history".into(), Value::String(hist_file));

    let report_file = format!("{}.report.json", s.id);
    fs::write(
        out.join(&report_file),
        serde_json::to_string_pretty(&solution.report)?,
    )?;
    artifacts.insert("report".into(), Value::String(report_file));

    Ok(json!({
        "artifacts": artifacts,
        "parameters": {
            "kind": s.kind, "travel-speed": s.travel_speed,
            "flux-offset": s.flux_offset, "exponent": s.exponent,
            "domain": s.domain, "seed-core": s.seed_core, "branch": s.branch,
            "solver": {
                "max-iter": solver.max_iter, "tol": solver.tol,
                "omega": solver.omega, "cg-tol": solver.cg_tol,
                "cg-max-iter": solver.cg_max_iter,
                "stall-window": solver.stall_window,
            },
        },
        "results": {
            "converged": solution.report.converged,
            "iterations": solution.report.iterations,
            "final-residual": solution.report.final_residual,
            "coefficient": solution.coefficient,
            "amplitude": solution.amplitude,
            "trivial": solution.trivial,
        },
    }))
}

fn run_extract(s: &ExtractStage, reg: &mut Registry, out: &Path) -> Result<Value> {
    let grad_floor = s.grad_floor.unwrap_or(DEFAULT_GRAD_FLOOR);
    let scalar = reg.scalar(&s.input)?.clone();
    let lf = GriddedLevelField::new(scalar)?;
    let curve = extract_level_curve(&lf, s.level, s.n_samples, grad_floor)?;

    let mut table = Table::new(&["xi1", "c1", "c2"]);
    for (x, p) in curve.xi1.iter().zip(curve.points.iter()) {
        table.push(vec![*x, p[0], p[1]])?;
    }
    table.set_meta("level", s.level);
    table.set_meta("closed", curve.closed);
    table.set_meta("length", curve.length);
    table.set_meta("grad-floor", grad_floor);
    let file = csv_name(&s.id, None);
    table.write(out.join(&file))?;

    Ok(json!({
        "artifacts": { "curve": file },
        "parameters": {
            "input": s.input, "level": s.level,
            "n-samples": s.n_samples, "grad-floor": grad_floor,
        },
        "results": {
            "closed": curve.closed,
            "length": curve.length,
            "components": curve.components,
        },
    }))
}

fn run_evolve_chart(s: &EvolveChartStage, reg: &mut Registry, out: &Path) -> Result<Value> {
    let substeps = s.substeps.unwrap_or(DEFAULT_SUBSTEPS);
    let grad_floor = s.grad_floor.unwrap_or(DEFAULT_GRAD_FLOOR);
    let scalar = reg.scalar(&s.input)?.clone();
    let lf = GriddedLevelField::new(scalar)?;
    let mut params = ChartParams::new(s.t_end, s.n_xi1, s.nt).with_substeps(substeps);
    params.grad_floor = grad_floor;
    if let Some(xi2) = &s.xi2 {
        params = params.with_xi2(xi2.clone());
    }
    let chart = evolve_chart(&lf, s.level, &params)?;

    let mut table = Table::new(&["xi1", "xi2", "t", "c1", "c2", "chi", "nu", "p", "q"]);
    for (si, slice) in chart.slices.iter().enumerate() {
        let xi2 = chart.xi2.as_ref().map_or(0.0, |v| v[si]);
        for i in 0..chart.n_xi1() {
            for k in 0..chart.nt() {
                table.push(vec![
                    chart.xi1[i],
                    xi2,
                    chart.ts[k],
                    slice.a[[i, k]],
                    slice.b[[i, k]],
                    slice.chi[[i, k]],
                    slice.nu[[i, k]],
                    slice.p[[i, k]],
                    slice.q[[i, k]],
                ])?;
            }
        }
    }
    table.set_meta("case", chart.case_.as_str());
    table.set_meta("level", s.level);
    table.set_meta("t-end", s.t_end);
    table.set_meta("closed", chart.closed);
    table.set_meta("grad-floor", grad_floor);
    let file = csv_name(&s.id, None);
    table.write(out.join(&file))?;

    let record = json!({
        "artifacts": { "chart": file },
        "parameters": {
            "input": s.input, "level": s.level, "t-end": s.t_end,
            "n-xi1": s.n_xi1, "nt": s.nt, "substeps": substeps,
            "xi2": s.xi2, "grad-floor": grad_floor,
        },
        "results": {
            "case": chart.case_.as_str(),
            "closed": chart.closed,
            "level-defect": chart.level_defect,
            "chi-time-check": chart.chi_time_check,
        },
    });
    reg.charts.insert(s.id.clone(), chart);
    Ok(record)
}

fn run_pullback(s: &PullbackStage, reg: &mut Registry, out: &Path) -> Result<Value> {
    let tol = s.tangency_tol.unwrap_or(DEFAULT_TANGENCY_TOL);
    let field = reg.field(&s.field)?;
    let chart = reg.chart(&s.chart)?;
    let form = pullback_form(field, chart, &s.xi2, tol)?;

    let mut table = Table::new(&["xi1", "xi2", "t", "beta1", "beta2"]);
    let (n2, n1, nt) = form.beta1.dim();
    for r in 0..n2 {
        for i in 0..n1 {
            for k in 0..nt {
                table.push(vec![
                    chart.xi1[i],
                    form.xi2[r],
                    chart.ts[k],
                    form.beta1[[r, i, k]],
                    form.beta2[[r, i, k]],
                ])?;
            }
        }
    }
    table.set_meta("tangency-tol", tol);
    table.set_meta("tangency-defect", form.tangency_defect);
    let file = csv_name(&s.id, None);
    table.write(out.join(&file))?;

    let record = json!({
        "artifacts": { "form": file },
        "parameters": {
            "field": s.field, "chart": s.chart, "xi2": s.xi2,
            "tangency-tol": tol,
        },
        "results": { "tangency-defect": form.tangency_defect },
    });
    reg.forms.insert(s.id.clone(), form);
    Ok(record)
}

fn run_evolve_constrained(
    s: &EvolveConstrainedStage,
    mut rng: ChaCha8Rng,
    reg: &mut Registry,
    out: &Path,
) -> Result<Value> {
    let substeps = s.substeps.unwrap_or(DEFAULT_SUBSTEPS);
    let chart = reg.chart(&s.chart)?;
    let n1 = chart.n_xi1();

    let build_rows = |xi2: &[f64]| -> Vec<f64> {
        if xi2.is_empty() {
            vec![0.0]
        } else {
            xi2.to_vec()
        }
    };

    let (b1, b2, rows, initial_desc) = match &s.initial {
        InitialData::FromPullback { form } => {
            let resolved = reg.form(form)?;
            let (b1, b2) = resolved.at_time(0);
            (b1, b2, resolved.xi2.clone(), json!({ "from-pullback": form }))
        }
        InitialData::Uniform { beta1, beta2, xi2 } => {
            let rows = build_rows(xi2);
            let n2 = rows.len();
            (
                Array2::from_elem((n2, n1), *beta1),
                Array2::from_elem((n2, n1), *beta2),
                rows,
                json!({ "uniform": { "beta1": beta1, "beta2": beta2, "xi2": xi2 } }),
            )
        }
        InitialData::Perturbed {
            beta1,
            beta2,
            xi2,
            amplitude,
            modes,
        } => {
            let modes = modes.unwrap_or(3);
            let rows = build_rows(xi2);
            let n2 = rows.len();
            let mut b1 = Array2::from_elem((n2, n1), *beta1);
            let mut b2 = Array2::from_elem((n2, n1), *beta2);
            for comp in [&mut b1, &mut b2] {
                for r in 0..n2 {
                    for m in 1..=modes {
                        let ac: f64 = rng.gen_range(-1.0..1.0);
                        let bc: f64 = rng.gen_range(-1.0..1.0);
                        for i in 0..n1 {
                            let phase = m as f64 * chart.xi1[i];
                            comp[[r, i]] +=
                                amplitude / modes as f64 * (ac * phase.cos() + bc * phase.sin());
                        }
                    }
                }
            }
            (
                b1,
                b2,
                rows,
                json!({ "perturbed": {
                    "beta1": beta1, "beta2": beta2, "xi2": xi2,
                    "amplitude": amplitude, "modes": modes,
                } }),
            )
        }
    };

    // Conoid charts carry their own slice rows; the xi2 argument stays empty.
    let xi2_arg = if chart.xi2.is_some() { Vec::new() } else { rows };
    let evolution = evolve_constrained(&b1, &b2, &xi2_arg, chart, s.path.to_path(), substeps)?;

    let mut table = Table::new(&["t", "drift"]);
    for (k, d) in evolution.drift.iter().enumerate() {
        table.push(vec![chart.ts[k], *d])?;
    }
    table.set_meta("path", s.path.as_str());
    table.set_meta("substeps", substeps as f64);
    let file = csv_name(&s.id, None);
    table.write(out.join(&file))?;

    let drift0 = evolution.drift.first().copied().unwrap_or(0.0);
    let drift_final = evolution.drift.last().copied().unwrap_or(0.0);
    let drift_peak = evolution.drift.iter().fold(0.0f64, |m, &d| m.max(d));
    let record = json!({
        "artifacts": { "drift": file },
        "parameters": {
            "chart": s.chart, "path": s.path.as_str(),
            "substeps": substeps, "initial": initial_desc,
        },
        "results": {
            "drift-initial": drift0,
            "drift-final": drift_final,
            "drift-peak": drift_peak,
        },
    });
    reg.evolutions.insert(s.id.clone(), evolution);
    Ok(record)
}

fn resolve_factor(spec: &FactorSpec, reg: &Registry) -> Result<Factor> {
    Ok(match spec {
        FactorSpec::Constant { value } => Factor::Constant(*value),
        FactorSpec::Scalar { input } => Factor::Chart(reg.scalar(input)?.clone()),
        FactorSpec::Axial { profile } => Factor::AxialProfile(profile.build("factor")?),
    })
}

fn scalar_field_norms(s: &ScalarField) -> (f64, f64) {
    match s {
        ScalarField::Chart(c) => norms2_interior(&c.values, c.spacing, 1),
        ScalarField::Grid3(g) => norms3_interior(&g.values, g.spacing, 1),
    }
}

fn run_diagnose(
    s: &DiagnoseStage,
    reg: &Registry,
    out: &Path,
    violations: &mut Vec<String>,
) -> Result<Value> {
    let mut report = DiagnosticReport::new();
    let mut check_records: Vec<Value> = Vec::new();

    let violate = |msg: String, violations: &mut Vec<String>| {
        violations.push(format!("{}: {}", s.id, msg));
    };

    for check in &s.checks {
        let record = match check {
            Check::BeltramiResidual {
                name,
                field,
                factor,
                wrap,
                max_linf,
            } => {
                let f = resolve_factor(factor, reg)?;
                let (_, res) = beltrami_residual(reg.field(field)?, &f, wrap.to_wrap())?;
                let entry = res
                    .get("residual_total")
                    .ok_or_else(|| Error::Validation("residual report is empty".into()))?;
                let measured = entry.norm_inf;
                report.push(name.clone(), entry.norm_inf, entry.norm_l2, entry.grid_spacing);
                if measured > *max_linf {
                    violate(
                        format!("{name}: residual {measured:.3e} exceeds {max_linf:.3e}"),
                        violations,
                    );
                }
                json!({
                    "name": name, "kind": "beltrami-residual",
                    "measured": measured, "max-linf": max_linf,
                })
            }
            Check::ResidualOrder {
                name,
                fields,
                factor,
                wrap,
                min_order,
                max_order,
            } => {
                if fields.len() < 2 {
                    return Err(Error::Validation(format!(
                        "check '{name}' needs at least two fields to fit an order"
                    )));
                }
                let f = resolve_factor(factor, reg)?;
                let mut pairs = Vec::new();
                for fref in fields {
                    let (_, res) = beltrami_residual(reg.field(fref)?, &f, wrap.to_wrap())?;
                    let entry = res
                        .get("residual_total")
                        .ok_or_else(|| Error::Validation("residual report is empty".into()))?;
                    pairs.push((entry.grid_spacing, entry.norm_inf));
                    report.push(
                        format!("{name}[{fref}]"),
                        entry.norm_inf,
                        entry.norm_l2,
                        entry.grid_spacing,
                    );
                }
                let order = order_estimate(&pairs)
                    .ok_or_else(|| Error::Validation(format!("check '{name}': degenerate order fit")))?;
                report.note(format!("{name}.order"), format!("{order:.4}"));
                if order < *min_order {
                    violate(
                        format!("{name}: order {order:.3} below {min_order:.3}"),
                        violations,
                    );
                }
                if let Some(hi) = max_order {
                    if order > *hi {
                        violate(format!("{name}: order {order:.3} above {hi:.3}"), violations);
                    }
                }
                json!({
                    "name": name, "kind": "residual-order", "order": order,
                    "min-order": min_order, "max-order": max_order,
                })
            }
            Check::FirstIntegral {
                name,
                field,
                factor,
                wrap,
                max_linf,
            } => {
                let f = resolve_factor(factor, reg)?;
                let defect = first_integral_defect(reg.field(field)?, &f, wrap.to_wrap())?;
                let (ni, nl2) = scalar_field_norms(&defect);
                report.push(name.clone(), ni, nl2, 0.0);
                if ni > *max_linf {
                    violate(
                        format!("{name}: first-integral defect {ni:.3e} exceeds {max_linf:.3e}"),
                        violations,
                    );
                }
                json!({
                    "name": name, "kind": "first-integral",
                    "measured": ni, "max-linf": max_linf,
                })
            }
            Check::NormalForm {
                name,
                form,
                max_beta2_xi1,
                max_beta1_xi2,
                max_beta2_xi2,
            } => {
                let d = prop31_diagnostic(reg.form(form)?);
                report.note(format!("{name}.beta2-over-xi1"), format!("{:.6e}", d.beta2_over_xi1));
                if d.beta2_over_xi1 > *max_beta2_xi1 {
                    violate(
                        format!(
                            "{name}: beta2 variation over xi1 {:.3e} exceeds {:.3e}",
                            d.beta2_over_xi1, max_beta2_xi1
                        ),
                        violations,
                    );
                }
                let mut pair = |label: &str, measured: Option<f64>, limit: &Option<f64>, violations: &mut Vec<String>| {
                    if let (Some(m), Some(lim)) = (measured, limit) {
                        report.note(format!("{name}.{label}"), format!("{m:.6e}"));
                        if m > *lim {
                            violate(
                                format!("{name}: {label} {m:.3e} exceeds {lim:.3e}"),
                                violations,
                            );
                        }
                    }
                };
                pair("beta1-over-xi2", d.beta1_over_xi2, max_beta1_xi2, violations);
                pair("beta2-over-xi2", d.beta2_over_xi2, max_beta2_xi2, violations);
                json!({
                    "name": name, "kind": "normal-form",
                    "beta2-over-xi1": d.beta2_over_xi1,
                    "beta1-over-xi2": d.beta1_over_xi2,
                    "beta2-over-xi2": d.beta2_over_xi2,
                    "max-beta2-xi1": max_beta2_xi1,
                    "max-beta1-xi2": max_beta1_xi2,
                    "max-beta2-xi2": max_beta2_xi2,
                })
            }
            Check::DirichletEnergy {
                name,
                form,
                chart,
                max_value,
            } => {
                let form = reg.form(form)?;
                let chart = reg.chart(chart)?;
                if !chart.closed {
                    return Err(Error::Validation(format!(
                        "check '{name}': Dirichlet energy needs a closed chart"
                    )));
                }
                let k = chart.nt() - 1;
                let (_, b2) = form.at_time(k);
                let slice = &chart.slices[0];
                let n1 = chart.n_xi1();
                let p: Vec<f64> = (0..n1).map(|i| slice.p[[i, k]]).collect();
                let q: Vec<f64> = (0..n1).map(|i| slice.q[[i, k]]).collect();
                let h2 = row_spacing_or_full_turn(&form.xi2)?;
                let energy = dirichlet_energy(&b2, &p, &q, chart.h1(), h2)?;
                report.note(format!("{name}.energy"), format!("{energy:.6e}"));
                if energy > *max_value {
                    violate(
                        format!("{name}: energy {energy:.3e} exceeds {max_value:.3e}"),
                        violations,
                    );
                }
                json!({
                    "name": name, "kind": "dirichlet-energy",
                    "energy": energy, "max-value": max_value,
                })
            }
            Check::Rank {
                name,
                system,
                n,
                threshold_coef,
                expect_dim,
            } => {
                let rank = compatibility_rank(system.to_system(), *n, *threshold_coef)?;
                report.note(format!("{name}.dim"), rank.dim);
                report.note(format!("{name}.threshold"), format!("{:.6e}", rank.threshold));
                if rank.dim != *expect_dim {
                    violate(
                        format!(
                            "{name}: nullspace dimension {} differs from expected {expect_dim}",
                            rank.dim
                        ),
                        violations,
                    );
                }
                json!({
                    "name": name, "kind": "rank", "n": n,
                    "threshold-coef": threshold_coef,
                    "dim": rank.dim, "expect-dim": expect_dim,
                })
            }
            Check::Drift {
                name,
                evolution,
                max_final,
                min_peak_ratio,
            } => {
                let ev = reg.evolution(evolution)?;
                let d0 = ev.drift.first().copied().unwrap_or(0.0);
                let d_final = ev.drift.last().copied().unwrap_or(0.0);
                let d_peak = ev.drift.iter().fold(0.0f64, |m, &d| m.max(d));
                report.note(format!("{name}.final"), format!("{d_final:.6e}"));
                report.note(format!("{name}.peak"), format!("{d_peak:.6e}"));
                if let Some(lim) = max_final {
                    if d_final > *lim {
                        violate(
                            format!("{name}: final drift {d_final:.3e} exceeds {lim:.3e}"),
                            violations,
                        );
                    }
                }
                let mut ratio = None;
                if let Some(min_ratio) = min_peak_ratio {
                    if d0 <= 0.0 {
                        violate(
                            format!("{name}: no initial defect to amplify"),
                            violations,
                        );
                    } else {
                        let r = d_peak / d0;
                        ratio = Some(r);
                        if r < *min_ratio {
                            violate(
                                format!("{name}: peak/initial ratio {r:.3} below {min_ratio:.3}"),
                                violations,
                            );
                        }
                    }
                }
                json!({
                    "name": name, "kind": "drift",
                    "initial": d0, "final": d_final, "peak": d_peak,
                    "peak-ratio": ratio,
                    "max-final": max_final, "min-peak-ratio": min_peak_ratio,
                })
            }
        };
        check_records.push(record);
    }

    let report_file = format!("{}.report.json", s.id);
    fs::write(out.join(&report_file), report.to_json()?)?;

    Ok(json!({
        "artifacts": { "report": report_file },
        "checks": check_records,
    }))
}

/// Cross-row spacing for the energy quadrature: uniform spacing when there
/// are several rows, a full turn for a single axisymmetric row.
fn row_spacing_or_full_turn(xi2: &[f64]) -> Result<f64> {
    if xi2.len() < 2 {
        return Ok(std::f64::consts::TAU);
    }
    let h = xi2[1] - xi2[0];
    if h <= 0.0 {
        return Err(Error::Validation("xi2 rows must increase".into()));
    }
    for w in xi2.windows(2) {
        if ((w[1] - w[0]) - h).abs() > 1e-9 * h.abs() {
            return Err(Error::Validation(
                "Dirichlet energy needs uniformly spaced xi2 rows".into(),
            ));
        }
    }
    Ok(h)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn abc_pair_scenario(name: &str) -> Scenario {
        serde_json::from_value(json!({
            "name": name,
            "seed": 7,
            "stages": [
                { "generate": { "id": "coarse", "family": { "abc": {
                    "a": 1.0, "b": 1.0, "c": 1.0,
                    "lo": 0.0, "hi": std::f64::consts::TAU, "n": 24 } } } },
                { "generate": { "id": "fine", "family": { "abc": {
                    "a": 1.0, "b": 1.0, "c": 1.0,
                    "lo": 0.0, "hi": std::f64::consts::TAU, "n": 48 } } } },
                { "diagnose": { "id": "residuals", "checks": [
                    { "residual-order": {
                        "name": "abc-order",
                        "fields": ["coarse", "fine"],
                        "factor": { "constant": { "value": 1.0 } },
                        "wrap": "periodic",
                        "min-order": 1.6, "max-order": 2.4 } }
                ] } }
            ]
        }))
        .unwrap()
    }

    #[test]
    fn abc_refinement_scenario_reports_second_order() {
        let dir = tempfile::tempdir().unwrap();
        let scenario = abc_pair_scenario("abc-residual");
        let outcome = run(&scenario, dir.path()).unwrap();
        assert_eq!(outcome.exit_code(), 0, "violations: {:?}", outcome.violations);

        let manifest: Value =
            serde_json::from_str(&fs::read_to_string(outcome.out_dir.join("manifest.json")).unwrap())
                .unwrap();
        let order = manifest["stages"][2]["checks"][0]["order"].as_f64().unwrap();
        assert!((order - 2.0).abs() < 0.4, "order {order}");
        assert!(outcome.out_dir.join("coarse.csv").exists());
        assert!(outcome.out_dir.join("residuals.report.json").exists());
    }

    #[test]
    fn reruns_reproduce_byte_identical_artifacts() {
        let dir_a = tempfile::tempdir().unwrap();
        let dir_b = tempfile::tempdir().unwrap();
        // Include a seeded random stage so determinism is not vacuous.
        let scenario: Scenario = serde_json::from_value(json!({
            "name": "repro",
            "seed": 42,
            "stages": [
                { "generate": { "id": "swirl", "family": { "radial": {
                    "factor": { "tag": { "linear": { "slope": 1.0, "intercept": 0.0 } },
                                "start": 0.05, "end": 6.0, "n": 64 },
                    "r-start": 0.05, "r-end": 6.0,
                    "u-theta0": 0.0, "u-z0": 1.0,
                    "grid": { "lo": [0.3, -1.0], "hi": [5.5, 1.0], "shape": [65, 17] } } } } },
                { "evolve-chart": { "id": "chart", "input": "swirl.factor",
                    "level": 1.0, "t-end": 1.5, "n-xi1": 17, "nt": 9 } },
                { "evolve-constrained": { "id": "noisy", "chart": "chart",
                    "initial": { "perturbed": {
                        "beta1": 0.4, "beta2": 0.0, "xi2": [0.0, 0.7],
                        "amplitude": 0.05 } } } }
            ]
        }))
        .unwrap();

        for dir in [&dir_a, &dir_b] {
            let outcome = run(&scenario, dir.path()).unwrap();
            assert_eq!(outcome.exit_code(), 0);
        }
        let mut names: Vec<String> = fs::read_dir(dir_a.path().join("repro"))
            .unwrap()
            .map(|e| e.unwrap().file_name().into_string().unwrap())
            .collect();
        names.sort();
        assert!(names.contains(&"manifest.json".to_string()));
        assert!(names.len() >= 4);
        for name in &names {
            let a = fs::read(dir_a.path().join("repro").join(name)).unwrap();
            let b = fs::read(dir_b.path().join("repro").join(name)).unwrap();
            assert_eq!(a, b, "artifact {name} differs between reruns");
        }
    }

    #[test]
    fn forward_references_fail_validation_with_exit_one() {
        let dir = tempfile::tempdir().unwrap();
        // The pullback names a chart stage that runs after it: the reference
        // is unresolvable, which is how any cycle manifests.
        let scenario: Scenario = serde_json::from_value(json!({
            "name": "cyclic",
            "stages": [
                { "generate": { "id": "swirl", "family": { "radial": {
                    "factor": { "tag": { "linear": { "slope": 1.0, "intercept": 0.0 } },
                                "start": 0.05, "end": 6.0, "n": 64 },
                    "r-start": 0.05, "r-end": 6.0,
                    "u-theta0": 0.0, "u-z0": 1.0,
                    "grid": { "lo": [0.3, -1.0], "hi": [5.5, 1.0], "shape": [65, 17] } } } } },
                { "pullback": { "id": "early", "field": "swirl",
                    "chart": "late", "xi2": [0.0] } },
                { "evolve-chart": { "id": "late", "input": "swirl.factor",
                    "level": 1.0, "t-end": 1.0, "n-xi1": 17, "nt": 5 } }
            ]
        }))
        .unwrap();
        let err = run(&scenario, dir.path()).unwrap_err();
        assert_eq!(err.exit_code(), 1);
        assert!(err.to_string().contains("late"));
    }

    #[test]
    fn unknown_keys_and_duplicate_ids_are_rejected() {
        let bad: std::result::Result<Scenario, _> = serde_json::from_value(json!({
            "name": "x", "mystery": 1, "stages": []
        }));
        assert!(bad.is_err());

        let bad_stage: std::result::Result<Scenario, _> = serde_json::from_value(json!({
            "name": "x",
            "stages": [ { "generate": { "id": "g", "surprise": true, "family": { "abc": {
                "a": 1.0, "b": 1.0, "c": 1.0, "lo": 0.0, "hi": 6.0, "n": 8 } } } } ]
        }));
        assert!(bad_stage.is_err());

        let dup = Scenario {
            name: "dup".into(),
            seed: 0,
            stages: vec![
                StageKind::Diagnose(DiagnoseStage { id: "a".into(), checks: vec![] }),
                StageKind::Diagnose(DiagnoseStage { id: "a".into(), checks: vec![] }),
            ],
        };
        assert!(matches!(validate(&dup), Err(Error::Validation(_))));
    }

    #[test]
    fn stage_rngs_are_counted_not_coupled() {
        let mut a = stage_rng(9, 0);
        let mut b = stage_rng(9, 1);
        let va: f64 = a.gen_range(-1.0..1.0);
        let vb: f64 = b.gen_range(-1.0..1.0);
        assert_ne!(va, vb);
        let mut a2 = stage_rng(9, 0);
        assert_eq!(va, a2.gen_range(-1.0..1.0));
    }
}

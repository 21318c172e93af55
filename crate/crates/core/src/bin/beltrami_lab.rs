//! Command-line front end: the scenario runner plus one-shot generate,
//! check, and render operations.
//!
//! Exit codes: 0 success, 1 validation error, 2 numerical failure,
//! 3 diagnostic threshold violation.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use ndarray::Axis;
use serde_json::json;

use beltrami_lab::chart::{ChartTag, ScalarChartField, ScalarGrid3};
use beltrami_lab::error::{Error, Result};
use beltrami_lab::io;
use beltrami_lab::ops::{beltrami_residual, first_integral_defect, Factor, Wrap};
use beltrami_lab::render::{heatmap_svg, history_svg, HeatmapOptions};
use beltrami_lab::scenario::{self, Family};
use beltrami_lab::vector::SymmetricVectorField;

#[derive(Parser)]
#[command(name = "beltrami-lab", version, about = "Numerical laboratory for Beltrami fields")]
struct Cli {
    /// Output root. Falls back to BELTRAMI_OUT, then the working directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Execute a JSON scenario; artifacts land in <out>/<scenario name>/.
    Run {
        /// Path to the scenario JSON file.
        scenario: PathBuf,
    },
    /// Build one field family and store it as CSV.
    Generate {
        /// Family name: abc, radial, or rotated-harmonic.
        family: String,
        /// Family parameters as a JSON object. `abc` has built-in defaults;
        /// the other families require the object.
        params: Option<String>,
        /// Basename for the artifacts.
        #[arg(long, default_value = "field")]
        id: String,
    },
    /// Residual diagnostics of a stored field against a factor.
    Check {
        /// Field CSV artifact.
        field: PathBuf,
        /// Scalar factor artifact (chart or 3d-grid CSV).
        #[arg(long, conflicts_with = "constant")]
        factor: Option<PathBuf>,
        /// Constant factor value instead of a file.
        #[arg(long)]
        constant: Option<f64>,
        #[arg(long, value_enum, default_value_t = WrapArg::Clamped)]
        wrap: WrapArg,
        /// Exit 3 when the max-norm residual exceeds this.
        #[arg(long)]
        max_linf: Option<f64>,
        /// Also write the diagnostic report JSON here.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Render a stored artifact (scalar chart, field, 3d grid, or table)
    /// to a deterministic SVG.
    Render {
        /// CSV artifact to draw.
        artifact: PathBuf,
        /// Output SVG path; defaults to the artifact path with .svg.
        #[arg(long)]
        to: Option<PathBuf>,
        /// Evenly spaced contour levels drawn over heatmaps.
        #[arg(long, default_value_t = 0)]
        contours: usize,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum WrapArg {
    Clamped,
    Periodic,
}

impl WrapArg {
    fn to_wrap(self) -> Wrap {
        match self {
            WrapArg::Clamped => Wrap::Clamped,
            WrapArg::Periodic => Wrap::Periodic,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let out_root = cli
        .out
        .or_else(|| std::env::var_os("BELTRAMI_OUT").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."));
    let code = match dispatch(cli.command, &out_root) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    };
    ExitCode::from(code as u8)
}

fn dispatch(command: Command, out_root: &PathBuf) -> Result<i32> {
    match command {
        Command::Run { scenario } => {
            let sc = scenario::load_scenario(&scenario)?;
            let outcome = scenario::run(&sc, out_root)?;
            println!("artifacts: {}", outcome.out_dir.display());
            if outcome.violations.is_empty() {
                Ok(0)
            } else {
                for v in &outcome.violations {
                    eprintln!("violation: {v}");
                }
                Ok(outcome.exit_code())
            }
        }
        Command::Generate { family, params, id } => {
            let family = parse_family(&family, params.as_deref())?;
            let (field, factor, _) = scenario::build_family(&family, &id)?;
            std::fs::create_dir_all(out_root)?;
            let path = out_root.join(format!("{id}.csv"));
            io::write_field(&path, &field)?;
            println!("field: {}", path.display());
            if let Some(f) = factor {
                let path = out_root.join(format!("{id}.factor.csv"));
                io::write_scalar_chart(&path, &f)?;
                println!("factor: {}", path.display());
            }
            Ok(0)
        }
        Command::Check {
            field,
            factor,
            constant,
            wrap,
            max_linf,
            report,
        } => {
            let u = io::read_field(&field)?;
            let f = match (factor, constant) {
                (Some(path), None) => read_factor(&path)?,
                (None, Some(value)) => Factor::Constant(value),
                (None, None) => {
                    return Err(Error::Validation(
                        "provide --factor <csv> or --constant <value>".into(),
                    ))
                }
                (Some(_), Some(_)) => unreachable!("clap rejects the combination"),
            };
            let wrap = wrap.to_wrap();
            let (_, mut rep) = beltrami_residual(&u, &f, wrap)?;
            let defect = first_integral_defect(&u, &f, wrap)?;
            let (ni, nl2) = defect.norms_interior(1);
            rep.push("first_integral", ni, nl2, 0.0);
            for e in &rep.entries {
                println!(
                    "{}: max {:.6e}, l2 {:.6e} (h = {:.4e})",
                    e.name, e.norm_inf, e.norm_l2, e.grid_spacing
                );
            }
            if let Some(path) = report {
                std::fs::write(&path, rep.to_json()?)?;
                println!("report: {}", path.display());
            }
            if let Some(limit) = max_linf {
                let total = rep
                    .get("residual_total")
                    .ok_or_else(|| Error::Validation("residual report is empty".into()))?;
                if total.norm_inf > limit {
                    eprintln!(
                        "violation: residual {:.6e} exceeds {:.6e}",
                        total.norm_inf, limit
                    );
                    return Ok(3);
                }
            }
            Ok(0)
        }
        Command::Render {
            artifact,
            to,
            contours,
        } => {
            let out_path = to.unwrap_or_else(|| artifact.with_extension("svg"));
            let stem = artifact
                .file_stem()
                .and_then(|s| s.to_str())
                .unwrap_or("artifact")
                .to_string();
            let svg = render_artifact(&artifact, &stem, contours)?;
            std::fs::write(&out_path, svg)?;
            println!("svg: {}", out_path.display());
            Ok(0)
        }
    }
}

/// Family name + JSON parameter object -> a generator family. The two-arg
/// form mirrors the scenario file's `family` block.
fn parse_family(name: &str, params: Option<&str>) -> Result<Family> {
    let payload: serde_json::Value = match params {
        Some(text) => serde_json::from_str(text)?,
        None => match name {
            "abc" => json!({
                "a": 1.0, "b": 1.0, "c": 1.0,
                "lo": 0.0, "hi": std::f64::consts::TAU, "n": 32,
            }),
            _ => {
                return Err(Error::Validation(format!(
                    "family '{name}' needs a JSON parameter object"
                )))
            }
        },
    };
    Ok(serde_json::from_value(json!({ name: payload }))?)
}

fn read_factor(path: &PathBuf) -> Result<Factor> {
    match io::peek_kind(path)?.as_str() {
        "scalar-chart" => Ok(Factor::Chart(io::read_scalar_chart(path)?)),
        "scalar-grid3" => Ok(Factor::Grid3(io::read_scalar_grid3(path)?)),
        other => Err(Error::Validation(format!(
            "factor file holds a '{other}' artifact, not a scalar"
        ))),
    }
}

fn render_artifact(path: &PathBuf, title: &str, contours: usize) -> Result<String> {
    match io::peek_kind(path)?.as_str() {
        "table" => {
            let table = io::Table::read(path)?;
            let x = table
                .columns
                .first()
                .ok_or_else(|| Error::MalformedFile("table has no columns".into()))?
                .clone();
            history_svg(&table, &x, title)
        }
        "scalar-chart" => heatmap(io::read_scalar_chart(path)?, title, contours),
        "vector-chart" => heatmap(magnitude_chart(&io::read_field(path)?)?, title, contours),
        "scalar-grid3" => heatmap(mid_slice(&io::read_scalar_grid3(path)?)?, title, contours),
        "vector-grid3" => {
            let u = io::read_field(path)?;
            heatmap(magnitude_chart(&u)?, title, contours)
        }
        other => Err(Error::Validation(format!(
            "no renderer for '{other}' artifacts"
        ))),
    }
}

fn heatmap(field: ScalarChartField, title: &str, contours: usize) -> Result<String> {
    let mut opts = HeatmapOptions {
        title: format!("{title}: {}", field.name),
        ..HeatmapOptions::default()
    };
    if contours > 0 {
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for &v in &field.values {
            lo = lo.min(v);
            hi = hi.max(v);
        }
        let span = hi - lo;
        if span > 0.0 {
            opts.contour_levels = (1..=contours)
                .map(|k| lo + span * k as f64 / (contours + 1) as f64)
                .collect();
        }
    }
    heatmap_svg(&field, &opts)
}

/// Pointwise magnitude of a stored field, drawn on the chart grid; 3d
/// grids are cut at the middle symmetry-axis slice first.
fn magnitude_chart(u: &SymmetricVectorField) -> Result<ScalarChartField> {
    match u {
        SymmetricVectorField::Translational { u1, u2, u3 }
        | SymmetricVectorField::Rotational {
            u_r: u1,
            u_theta: u2,
            u_z: u3,
        } => {
            let values = (&u1.values * &u1.values + &u2.values * &u2.values
                + &u3.values * &u3.values)
                .mapv(f64::sqrt);
            ScalarChartField::new(u1.chart, u1.origin, u1.spacing, values, "|u|")
        }
        SymmetricVectorField::ZPlanar { v1, v2, .. } => {
            let values = (&v1.values * &v1.values + &v2.values * &v2.values).mapv(f64::sqrt);
            ScalarChartField::new(v1.chart, v1.origin, v1.spacing, values, "|u|")
        }
        SymmetricVectorField::Full3d { u1, u2, u3 } => {
            let k = u1.values.dim().2 / 2;
            let sq = |g: &ScalarGrid3| {
                let s = g.values.index_axis(Axis(2), k).to_owned();
                &s * &s
            };
            let values = (sq(u1) + sq(u2) + sq(u3)).mapv(f64::sqrt);
            ScalarChartField::new(
                ChartTag::CartesianXy,
                [u1.origin[0], u1.origin[1]],
                [u1.spacing[0], u1.spacing[1]],
                values,
                "|u| (mid slice)",
            )
        }
    }
}

fn mid_slice(g: &ScalarGrid3) -> Result<ScalarChartField> {
    let k = g.values.dim().2 / 2;
    ScalarChartField::new(
        ChartTag::CartesianXy,
        [g.origin[0], g.origin[1]],
        [g.spacing[0], g.spacing[1]],
        g.values.index_axis(Axis(2), k).to_owned(),
        format!("{} (mid slice)", g.name),
    )
}

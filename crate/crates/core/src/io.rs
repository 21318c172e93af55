//! File formats: CSV grids with a one-line JSON header, generic numeric
//! tables, and JSON reports.
//!
//! Every grid artifact is a CSV file whose first line is a JSON object
//! carrying the geometry (chart tag, origin, spacing, shape, component
//! names) and whose remaining lines hold one node per row in row-major
//! order, one column per component. Values are written with 17 significant
//! digits, which round-trips every finite f64 bit-exactly.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use ndarray::{Array2, Array3};
use serde::{Deserialize, Serialize};

use crate::chart::{ChartTag, GridSpec3, ScalarChartField, ScalarGrid3};
use crate::error::{Error, Result};
use crate::profile::RadialProfile;
use crate::vector::SymmetricVectorField;

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
enum Header {
    #[serde(rename_all = "kebab-case")]
    ScalarChart {
        chart: ChartTag,
        origin: [f64; 2],
        spacing: [f64; 2],
        shape: [usize; 2],
        components: Vec<String>,
    },
    #[serde(rename_all = "kebab-case")]
    VectorChart {
        symmetry: String,
        chart: ChartTag,
        origin: [f64; 2],
        spacing: [f64; 2],
        shape: [usize; 2],
        components: Vec<String>,
        /// Axial factor of a z-planar field; absent for the other kinds.
        #[serde(skip_serializing_if = "Option::is_none", default)]
        factor: Option<RadialProfile>,
    },
    #[serde(rename_all = "kebab-case")]
    ScalarGrid3 {
        origin: [f64; 3],
        spacing: [f64; 3],
        shape: [usize; 3],
        components: Vec<String>,
    },
    #[serde(rename_all = "kebab-case")]
    VectorGrid3 {
        origin: [f64; 3],
        spacing: [f64; 3],
        shape: [usize; 3],
        components: Vec<String>,
    },
}

/// 17 significant digits: enough to reparse any finite f64 to the same bits.
fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn write_rows(out: &mut String, columns: &[&Array2<f64>]) {
    let shape = columns[0].dim();
    for i in 0..shape.0 {
        for j in 0..shape.1 {
            for (c, col) in columns.iter().enumerate() {
                if c > 0 {
                    out.push(',');
                }
                let _ = write!(out, "{}", fmt_f64(col[[i, j]]));
            }
            out.push('\n');
        }
    }
}

fn write_rows3(out: &mut String, columns: &[&Array3<f64>]) {
    let shape = columns[0].dim();
    for i in 0..shape.0 {
        for j in 0..shape.1 {
            for k in 0..shape.2 {
                for (c, col) in columns.iter().enumerate() {
                    if c > 0 {
                        out.push(',');
                    }
                    let _ = write!(out, "{}", fmt_f64(col[[i, j, k]]));
                }
                out.push('\n');
            }
        }
    }
}

fn parse_rows(body: &[&str], n_rows: usize, n_cols: usize) -> Result<Vec<Vec<f64>>> {
    if body.len() != n_rows {
        return Err(Error::MalformedFile(format!(
            "expected {n_rows} data rows, found {}",
            body.len()
        )));
    }
    let mut columns = vec![Vec::with_capacity(n_rows); n_cols];
    for (ln, line) in body.iter().enumerate() {
        let mut found = 0;
        for (c, tok) in line.split(',').enumerate() {
            if c >= n_cols {
                return Err(Error::MalformedFile(format!(
                    "row {} has more than {n_cols} columns",
                    ln + 2
                )));
            }
            let v: f64 = tok.trim().parse().map_err(|_| {
                Error::MalformedFile(format!("row {}: unparseable value '{tok}'", ln + 2))
            })?;
            columns[c].push(v);
            found = c + 1;
        }
        if found != n_cols {
            return Err(Error::MalformedFile(format!(
                "row {} has {found} columns, expected {n_cols}",
                ln + 2
            )));
        }
    }
    Ok(columns)
}

fn split_header(text: &str) -> Result<(&str, Vec<&str>)> {
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::MalformedFile("empty file".into()))?;
    let body: Vec<&str> = lines.filter(|l| !l.trim().is_empty()).collect();
    Ok((header, body))
}

/// Read just the `kind` discriminator from an artifact's header line,
/// without parsing the body. Lets callers dispatch on the artifact type.
pub fn peek_kind(path: impl AsRef<Path>) -> Result<String> {
    let file = fs::File::open(path)?;
    let mut first = String::new();
    std::io::BufRead::read_line(&mut std::io::BufReader::new(file), &mut first)?;
    let header: serde_json::Value = serde_json::from_str(first.trim())?;
    header["kind"]
        .as_str()
        .map(String::from)
        .ok_or_else(|| Error::MalformedFile("header has no kind field".into()))
}

fn column_to_array2(col: Vec<f64>, shape: [usize; 2]) -> Result<Array2<f64>> {
    Array2::from_shape_vec((shape[0], shape[1]), col)
        .map_err(|e| Error::MalformedFile(format!("shape mismatch: {e}")))
}

fn column_to_array3(col: Vec<f64>, shape: [usize; 3]) -> Result<Array3<f64>> {
    Array3::from_shape_vec((shape[0], shape[1], shape[2]), col)
        .map_err(|e| Error::MalformedFile(format!("shape mismatch: {e}")))
}

/// Serialize a scalar chart field to the CSV format.
pub fn scalar_chart_to_string(field: &ScalarChartField) -> Result<String> {
    let header = Header::ScalarChart {
        chart: field.chart,
        origin: field.origin,
        spacing: field.spacing,
        shape: field.shape(),
        components: vec![field.name.clone()],
    };
    let mut out = serde_json::to_string(&header)?;
    out.push('\n');
    write_rows(&mut out, &[&field.values]);
    Ok(out)
}

pub fn write_scalar_chart(path: impl AsRef<Path>, field: &ScalarChartField) -> Result<()> {
    fs::write(path, scalar_chart_to_string(field)?)?;
    Ok(())
}

pub fn scalar_chart_from_string(text: &str) -> Result<ScalarChartField> {
    let (header, body) = split_header(text)?;
    match serde_json::from_str::<Header>(header)? {
        Header::ScalarChart {
            chart,
            origin,
            spacing,
            shape,
            components,
        } => {
            if components.len() != 1 {
                return Err(Error::MalformedFile(format!(
                    "scalar file declares {} components",
                    components.len()
                )));
            }
            let cols = parse_rows(&body, shape[0] * shape[1], 1)?;
            let values = column_to_array2(cols.into_iter().next().unwrap(), shape)?;
            ScalarChartField::new(chart, origin, spacing, values, components[0].clone())
        }
        _ => Err(Error::MalformedFile(
            "expected a scalar-chart header".into(),
        )),
    }
}

pub fn read_scalar_chart(path: impl AsRef<Path>) -> Result<ScalarChartField> {
    scalar_chart_from_string(&fs::read_to_string(path)?)
}

/// Serialize a symmetric vector field to the CSV format.
pub fn field_to_string(field: &SymmetricVectorField) -> Result<String> {
    let mut out;
    match field {
        SymmetricVectorField::Translational { u1, u2, u3 }
        | SymmetricVectorField::Rotational {
            u_r: u1,
            u_theta: u2,
            u_z: u3,
        } => {
            let header = Header::VectorChart {
                symmetry: field.kind().to_string(),
                chart: u1.chart,
                origin: u1.origin,
                spacing: u1.spacing,
                shape: u1.shape(),
                components: field.components().iter().map(|s| s.to_string()).collect(),
                factor: None,
            };
            out = serde_json::to_string(&header)?;
            out.push('\n');
            write_rows(&mut out, &[&u1.values, &u2.values, &u3.values]);
        }
        SymmetricVectorField::ZPlanar { v1, v2, factor } => {
            let header = Header::VectorChart {
                symmetry: field.kind().to_string(),
                chart: v1.chart,
                origin: v1.origin,
                spacing: v1.spacing,
                shape: v1.shape(),
                components: vec!["v1".into(), "v2".into()],
                factor: Some(factor.clone()),
            };
            out = serde_json::to_string(&header)?;
            out.push('\n');
            write_rows(&mut out, &[&v1.values, &v2.values]);
        }
        SymmetricVectorField::Full3d { u1, u2, u3 } => {
            let header = Header::VectorGrid3 {
                origin: u1.spec().origin,
                spacing: u1.spec().spacing,
                shape: u1.spec().shape,
                components: field.components().iter().map(|s| s.to_string()).collect(),
            };
            out = serde_json::to_string(&header)?;
            out.push('\n');
            write_rows3(&mut out, &[&u1.values, &u2.values, &u3.values]);
        }
    }
    Ok(out)
}

pub fn write_field(path: impl AsRef<Path>, field: &SymmetricVectorField) -> Result<()> {
    fs::write(path, field_to_string(field)?)?;
    Ok(())
}

pub fn field_from_string(text: &str) -> Result<SymmetricVectorField> {
    let (header, body) = split_header(text)?;
    match serde_json::from_str::<Header>(header)? {
        Header::VectorChart {
            symmetry,
            chart,
            origin,
            spacing,
            shape,
            components,
            factor,
        } => {
            let n = shape[0] * shape[1];
            let make = |col: Vec<f64>, name: &str| -> Result<ScalarChartField> {
                ScalarChartField::new(chart, origin, spacing, column_to_array2(col, shape)?, name)
            };
            match symmetry.as_str() {
                "translational" | "rotational" => {
                    if components.len() != 3 {
                        return Err(Error::MalformedFile(format!(
                            "{symmetry} field declares {} components",
                            components.len()
                        )));
                    }
                    let mut cols = parse_rows(&body, n, 3)?.into_iter();
                    let a = make(cols.next().unwrap(), &components[0])?;
                    let b = make(cols.next().unwrap(), &components[1])?;
                    let c = make(cols.next().unwrap(), &components[2])?;
                    if symmetry == "translational" {
                        SymmetricVectorField::translational(a, b, c)
                    } else {
                        SymmetricVectorField::rotational(a, b, c)
                    }
                }
                "z-planar" => {
                    let factor = factor.ok_or_else(|| {
                        Error::MalformedFile("z-planar field without its axial factor".into())
                    })?;
                    let mut cols = parse_rows(&body, n, 2)?.into_iter();
                    let v1 = make(cols.next().unwrap(), "v1")?;
                    let v2 = make(cols.next().unwrap(), "v2")?;
                    SymmetricVectorField::z_planar(v1, v2, factor)
                }
                other => Err(Error::MalformedFile(format!(
                    "unknown symmetry tag '{other}'"
                ))),
            }
        }
        Header::VectorGrid3 {
            origin,
            spacing,
            shape,
            components,
        } => {
            if components.len() != 3 {
                return Err(Error::MalformedFile(format!(
                    "full-3d field declares {} components",
                    components.len()
                )));
            }
            let spec = GridSpec3::from_parts(origin, spacing, shape)?;
            let n = shape[0] * shape[1] * shape[2];
            let mut cols = parse_rows(&body, n, 3)?.into_iter();
            let mut make = |name: &str| -> Result<ScalarGrid3> {
                let values = column_to_array3(cols.next().unwrap(), shape)?;
                Ok(ScalarGrid3::from_parts(spec, values, name))
            };
            let u1 = make(&components[0])?;
            let u2 = make(&components[1])?;
            let u3 = make(&components[2])?;
            SymmetricVectorField::full3d(u1, u2, u3)
        }
        _ => Err(Error::MalformedFile("expected a vector header".into())),
    }
}

pub fn read_field(path: impl AsRef<Path>) -> Result<SymmetricVectorField> {
    field_from_string(&fs::read_to_string(path)?)
}

/// Serialize a scalar 3D grid to the CSV format.
pub fn scalar_grid3_to_string(field: &ScalarGrid3) -> Result<String> {
    let header = Header::ScalarGrid3 {
        origin: field.spec().origin,
        spacing: field.spec().spacing,
        shape: field.spec().shape,
        components: vec![field.name.clone()],
    };
    let mut out = serde_json::to_string(&header)?;
    out.push('\n');
    write_rows3(&mut out, &[&field.values]);
    Ok(out)
}

pub fn write_scalar_grid3(path: impl AsRef<Path>, field: &ScalarGrid3) -> Result<()> {
    fs::write(path, scalar_grid3_to_string(field)?)?;
    Ok(())
}

pub fn scalar_grid3_from_string(text: &str) -> Result<ScalarGrid3> {
    let (header, body) = split_header(text)?;
    match serde_json::from_str::<Header>(header)? {
        Header::ScalarGrid3 {
            origin,
            spacing,
            shape,
            components,
        } => {
            if components.len() != 1 {
                return Err(Error::MalformedFile(format!(
                    "scalar file declares {} components",
                    components.len()
                )));
            }
            let spec = GridSpec3::from_parts(origin, spacing, shape)?;
            let n = shape[0] * shape[1] * shape[2];
            let cols = parse_rows(&body, n, 1)?;
            let values = column_to_array3(cols.into_iter().next().unwrap(), shape)?;
            Ok(ScalarGrid3::from_parts(spec, values, components[0].clone()))
        }
        _ => Err(Error::MalformedFile(
            "expected a scalar-grid3 header".into(),
        )),
    }
}

pub fn read_scalar_grid3(path: impl AsRef<Path>) -> Result<ScalarGrid3> {
    scalar_grid3_from_string(&fs::read_to_string(path)?)
}

/// A generic numeric table: named columns, a metadata map, row-major rows.
/// Used for residual histories, chart dumps, pullback dumps, and spectra.
#[derive(Clone, Debug, Default)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
    pub meta: serde_json::Map<String, serde_json::Value>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TableHeader {
    kind: String,
    columns: Vec<String>,
    #[serde(default, skip_serializing_if = "serde_json::Map::is_empty")]
    meta: serde_json::Map<String, serde_json::Value>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Self {
            columns: columns.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
            meta: serde_json::Map::new(),
        }
    }

    pub fn push(&mut self, row: Vec<f64>) -> Result<()> {
        if row.len() != self.columns.len() {
            return Err(Error::InvalidParameter(format!(
                "table row with {} values, expected {}",
                row.len(),
                self.columns.len()
            )));
        }
        self.rows.push(row);
        Ok(())
    }

    pub fn set_meta(&mut self, key: &str, value: impl Into<serde_json::Value>) {
        self.meta.insert(key.to_string(), value.into());
    }

    pub fn to_string(&self) -> Result<String> {
        let header = TableHeader {
            kind: "table".into(),
            columns: self.columns.clone(),
            meta: self.meta.clone(),
        };
        let mut out = serde_json::to_string(&header)?;
        out.push('\n');
        for row in &self.rows {
            for (c, v) in row.iter().enumerate() {
                if c > 0 {
                    out.push(',');
                }
                let _ = write!(out, "{}", fmt_f64(*v));
            }
            out.push('\n');
        }
        Ok(out)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_string()?)?;
        Ok(())
    }

    pub fn from_string(text: &str) -> Result<Self> {
        let (header, body) = split_header(text)?;
        let header: TableHeader = serde_json::from_str(header)?;
        if header.kind != "table" {
            return Err(Error::MalformedFile(format!(
                "expected a table header, found kind '{}'",
                header.kind
            )));
        }
        let n_cols = header.columns.len();
        let mut rows = Vec::with_capacity(body.len());
        for (ln, line) in body.iter().enumerate() {
            let row: Vec<f64> = line
                .split(',')
                .map(|tok| tok.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| {
                    Error::MalformedFile(format!("row {}: unparseable value", ln + 2))
                })?;
            if row.len() != n_cols {
                return Err(Error::MalformedFile(format!(
                    "row {} has {} columns, expected {n_cols}",
                    ln + 2,
                    row.len()
                )));
            }
            rows.push(row);
        }
        Ok(Self {
            columns: header.columns,
            rows,
            meta: header.meta,
        })
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_string(&fs::read_to_string(path)?)
    }

    pub fn column(&self, name: &str) -> Result<Vec<f64>> {
        let c = self
            .columns
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| Error::InvalidParameter(format!("table has no column '{name}'")))?;
        Ok(self.rows.iter().map(|r| r[c]).collect())
    }
}

//! Problem data named in a config: constants, analytic functions or files.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::CliError;
use crate::fem::{BoundaryTrace, FieldFile, Region, ScalarField};
use crate::geometry::{BoundaryPartition, Condition, Mesh, Point};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum FieldSource {
    Constant(f64),
    /// One of [`ANALYTIC`].
    Named(String),
    LaplacianOf { laplacian_of: String },
    NormalDerivativeOf { normal_derivative_of: String },
    File { file: PathBuf },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ConstraintSpec {
    /// A region name: `boundary`, `dirichlet`, `neumann` or a tag.
    Region(String),
    Regions(Vec<String>),
    Vertices { vertices: Vec<usize> },
}

struct Analytic {
    name: &'static str,
    value: fn(Point) -> f64,
    grad: fn(Point) -> [f64; 2],
    laplacian: fn(Point) -> f64,
}

fn r2(p: Point) -> f64 {
    p[0] * p[0] + p[1] * p[1]
}

/// Names accepted wherever a field is expected.
pub const ANALYTIC_NAMES: [&str; 6] = ["x", "y", "x2_minus_y2", "sin_sin", "sqrt_r", "log_r"];

const ANALYTIC: [Analytic; 6] = [
    Analytic {
        name: "x",
        value: |p| p[0],
        grad: |_| [1.0, 0.0],
        laplacian: |_| 0.0,
    },
    Analytic {
        name: "y",
        value: |p| p[1],
        grad: |_| [0.0, 1.0],
        laplacian: |_| 0.0,
    },
    Analytic {
        name: "x2_minus_y2",
        value: |p| p[0] * p[0] - p[1] * p[1],
        grad: |p| [2.0 * p[0], -2.0 * p[1]],
        laplacian: |_| 0.0,
    },
    Analytic {
        name: "sin_sin",
        value: |p| (PI * p[0]).sin() * (PI * p[1]).sin(),
        grad: |p| {
            [
                PI * (PI * p[0]).cos() * (PI * p[1]).sin(),
                PI * (PI * p[0]).sin() * (PI * p[1]).cos(),
            ]
        },
        laplacian: |p| -2.0 * PI * PI * (PI * p[0]).sin() * (PI * p[1]).sin(),
    },
    Analytic {
        name: "sqrt_r",
        value: |p| r2(p).sqrt().sqrt(),
        grad: |p| {
            let s = 2.0 * r2(p).powf(0.75);
            [p[0] / s, p[1] / s]
        },
        laplacian: |p| 0.25 * r2(p).powf(-0.75),
    },
    Analytic {
        name: "log_r",
        value: |p| 0.5 * r2(p).ln(),
        grad: |p| [p[0] / r2(p), p[1] / r2(p)],
        laplacian: |_| 0.0,
    },
];

fn analytic(name: &str) -> Result<&'static Analytic, CliError> {
    ANALYTIC.iter().find(|a| a.name == name).ok_or_else(|| CliError::Config {
        path: None,
        message: format!("unknown function `{name}` (known: {})", ANALYTIC_NAMES.join(", ")),
    })
}

fn finite_field(mesh: &Mesh, key: &str, f: impl Fn(Point) -> f64) -> Result<ScalarField, CliError> {
    let values: Vec<f64> = mesh.vertices().iter().map(|&p| f(p)).collect();
    if let Some(v) = values.iter().position(|v| !v.is_finite()) {
        return Err(CliError::config(key, format!("value at vertex {v} is not finite")));
    }
    Ok(ScalarField::new(mesh, values)?)
}

/// Field files may be bare or wrapped as `{"config_hash": .., "field": ..}`.
#[derive(Deserialize)]
#[serde(untagged)]
enum FieldInput {
    Wrapped { field: FieldFile },
    Bare(FieldFile),
}

fn read_field(path: &Path, key: &str) -> Result<FieldFile, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::config(key, format!("cannot read {}: {e}", path.display())))?;
    match serde_json::from_str::<FieldInput>(&text) {
        Ok(FieldInput::Wrapped { field } | FieldInput::Bare(field)) => Ok(field),
        Err(e) => Err(CliError::config(key, format!("{}: {e}", path.display()))),
    }
}

impl FieldSource {
    /// Nodal field for `key`.
    pub fn scalar(&self, mesh: &Mesh, key: &str) -> Result<ScalarField, CliError> {
        match self {
            FieldSource::Constant(c) => Ok(ScalarField::constant(mesh, *c)),
            FieldSource::Named(name) => finite_field(mesh, key, analytic(name)?.value),
            FieldSource::LaplacianOf { laplacian_of } => finite_field(mesh, key, analytic(laplacian_of)?.laplacian),
            FieldSource::NormalDerivativeOf { .. } => Err(CliError::config(
                key,
                "normal_derivative_of describes boundary data, not a field",
            )),
            FieldSource::File { file } => Ok(read_field(file, key)?.into_scalar(mesh)?),
        }
    }

    /// Edge data on the Neumann edges of `partition`.
    pub fn flux(&self, mesh: &Mesh, partition: &BoundaryPartition, key: &str) -> Result<BoundaryTrace, CliError> {
        let on_neumann = |f: &dyn Fn(Point, [f64; 2]) -> f64| -> Result<BoundaryTrace, CliError> {
            Ok(BoundaryTrace::edge_data(mesh, partition, Region::Neumann, f)?)
        };
        match self {
            FieldSource::Constant(c) => on_neumann(&|_, _| *c),
            FieldSource::NormalDerivativeOf { normal_derivative_of } => {
                let a = analytic(normal_derivative_of)?;
                on_neumann(&|x, n| {
                    let g = (a.grad)(x);
                    g[0] * n[0] + g[1] * n[1]
                })
            }
            FieldSource::File { file } => {
                let trace = read_field(file, key)?.into_trace(mesh)?;
                if let Some(&(e, _)) = trace
                    .entries()
                    .iter()
                    .find(|&&(e, _)| partition.condition(e) != Condition::Neumann)
                {
                    return Err(CliError::config(key, format!("flux file sets non-Neumann edge {e}")));
                }
                Ok(trace)
            }
            FieldSource::Named(_) | FieldSource::LaplacianOf { .. } => Err(CliError::config(
                key,
                "flux must be a number, {\"normal_derivative_of\": name} or a trace file",
            )),
        }
    }
}

impl ConstraintSpec {
    pub fn vertices(&self, mesh: &Mesh, partition: &BoundaryPartition) -> Result<Vec<usize>, CliError> {
        let regions = match self {
            ConstraintSpec::Vertices { vertices } => {
                if let Some(&v) = vertices.iter().find(|&&v| v >= mesh.n_vertices()) {
                    return Err(CliError::config("constraint", format!("vertex {v} out of range")));
                }
                return Ok(vertices.clone());
            }
            ConstraintSpec::Region(r) => vec![r.clone()],
            ConstraintSpec::Regions(rs) => rs.clone(),
        };
        let mut out = Vec::new();
        for r in regions {
            out.extend(Region::parse(&r).vertices(mesh, partition)?);
        }
        out.sort_unstable();
        out.dedup();
        if out.is_empty() {
            return Err(CliError::config("constraint", "constraint selects no vertex"));
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::build_unit_square;

    #[test]
    fn sources_parse() {
        let s: FieldSource = serde_json::from_str("2.5").unwrap();
        assert_eq!(s, FieldSource::Constant(2.5));
        let s: FieldSource = serde_json::from_str(r#""sin_sin""#).unwrap();
        assert_eq!(s, FieldSource::Named("sin_sin".into()));
        let s: FieldSource = serde_json::from_str(r#"{"laplacian_of":"sin_sin"}"#).unwrap();
        assert!(matches!(s, FieldSource::LaplacianOf { .. }));
        let c: ConstraintSpec = serde_json::from_str(r#"["left","right"]"#).unwrap();
        assert!(matches!(c, ConstraintSpec::Regions(_)));
    }

    #[test]
    fn analytic_gradients_match_differences() {
        let p = [0.3, 0.7];
        let h = 1e-6;
        for a in &ANALYTIC {
            let g = (a.grad)(p);
            let dx = ((a.value)([p[0] + h, p[1]]) - (a.value)([p[0] - h, p[1]])) / (2.0 * h);
            let dy = ((a.value)([p[0], p[1] + h]) - (a.value)([p[0], p[1] - h])) / (2.0 * h);
            assert!((g[0] - dx).abs() < 1e-6 && (g[1] - dy).abs() < 1e-6, "{}", a.name);
            let lap = ((a.value)([p[0] + 1e-4, p[1]]) + (a.value)([p[0] - 1e-4, p[1]]) + (a.value)([p[0], p[1] + 1e-4])
                + (a.value)([p[0], p[1] - 1e-4])
                - 4.0 * (a.value)(p))
                / 1e-8;
            assert!((lap - (a.laplacian)(p)).abs() < 1e-3, "{}", a.name);
        }
    }

    #[test]
    fn evaluation_errors() {
        let m = build_unit_square(2).unwrap();
        assert!(FieldSource::Named("nope".into()).scalar(&m, "load").is_err());
        // log r is singular at the origin vertex
        assert!(FieldSource::Named("log_r".into()).scalar(&m, "datum").is_err());
        let part = BoundaryPartition::all_neumann(&m);
        let t = FieldSource::Constant(1.0).flux(&m, &part, "flux").unwrap();
        assert_eq!(t.entries().len(), m.boundary_edges().len());
        let c = ConstraintSpec::Region("left".into()).vertices(&m, &part).unwrap();
        assert_eq!(c.len(), 3);
    }
}

//! Run configuration: JSON file plus command-line overrides.

use std::path::{Path, PathBuf};

use serde::{de, Deserialize, Deserializer, Serialize};
use sha2::{Digest, Sha256};

use super::sources::{ConstraintSpec, FieldSource};
use super::CliError;
use crate::geometry::{tag_boundary, BoundaryPartition, Condition, DomainSpec, EdgeSelector, Mesh, MeshFile};

/// Exponent in `(1, ∞)`, validated while parsing.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(transparent)]
pub struct Exponent(pub f64);

impl<'de> Deserialize<'de> for Exponent {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let p = f64::deserialize(d)?;
        if p > 1.0 && p.is_finite() {
            Ok(Exponent(p))
        } else {
            Err(de::Error::custom(format!("p must be a finite number greater than 1, got {p}")))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CommandName {
    Mesh,
    SolveLaplace,
    SolveNeumann,
    SolvePlap,
    Verify,
    Sweep,
}

impl CommandName {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Mesh => "mesh",
            Self::SolveLaplace => "solve-laplace",
            Self::SolveNeumann => "solve-neumann",
            Self::SolvePlap => "solve-plap",
            Self::Verify => "verify",
            Self::Sweep => "sweep",
        }
    }
}

/// Boundary tags (or `"all"`) per condition; every edge must be covered once.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct PartitionSpec {
    pub dirichlet: Vec<String>,
    pub neumann: Vec<String>,
}

impl PartitionSpec {
    pub fn build(&self, mesh: &Mesh) -> crate::Result<BoundaryPartition> {
        let sel = |t: &String| {
            if t == "all" {
                EdgeSelector::All
            } else {
                EdgeSelector::tag(t.clone())
            }
        };
        for t in self.dirichlet.iter().chain(&self.neumann) {
            if t != "all" && !mesh.boundary_tags().contains(&t.as_str()) {
                return Err(crate::Error::UnknownRegion(t.clone()));
            }
        }
        let rules: Vec<(EdgeSelector, Condition)> = self
            .dirichlet
            .iter()
            .map(|t| (sel(t), Condition::Dirichlet))
            .chain(self.neumann.iter().map(|t| (sel(t), Condition::Neumann)))
            .collect();
        tag_boundary(mesh, &rules)
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub command: Option<CommandName>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub domain: Option<DomainSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mesh_file: Option<PathBuf>,
    /// Red refinements applied to the domain mesh.
    pub refine: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub partition: Option<PartitionSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub load: Option<FieldSource>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dirichlet: Option<FieldSource>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub flux: Option<FieldSource>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub datum: Option<FieldSource>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub constraint: Option<ConstraintSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p: Option<Exponent>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eps_final: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_outer: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p_step: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub certificate_trials: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub experiment: Option<String>,
    /// Mesh levels; meaning depends on the command.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub levels: Option<Vec<usize>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub r_in: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p_list: Option<Vec<Exponent>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_pairs: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub threads: Option<usize>,
}

/// Parses a config document; unknown keys are logged and skipped.
pub fn parse_config_str(text: &str) -> Result<RunConfig, CliError> {
    let mut unknown = Vec::new();
    let mut json = serde_json::Deserializer::from_str(text);
    let mut note = |path: serde_ignored::Path<'_>| unknown.push(path.to_string());
    let ignoring = serde_ignored::Deserializer::new(&mut json, &mut note);
    let config: RunConfig = serde_path_to_error::deserialize(ignoring).map_err(|e| CliError::Config {
        path: Some(e.path().to_string()),
        message: e.inner().to_string(),
    })?;
    json.end().map_err(|e| CliError::Config {
        path: None,
        message: e.to_string(),
    })?;
    for key in unknown {
        log::warn!("ignoring unknown config key `{key}`");
    }
    Ok(config)
}

pub fn parse_config_file(path: &Path) -> Result<RunConfig, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Config {
        path: None,
        message: format!("cannot read config {}: {e}", path.display()),
    })?;
    parse_config_str(&text)
}

impl RunConfig {
    /// Hex digest of the canonical JSON of everything that affects results
    /// (the output directory and thread count are excluded).
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.out = None;
        c.threads = None;
        // serde_json maps are key-sorted, so this form is canonical
        let value = serde_json::to_value(&c).expect("config serializes");
        let digest = Sha256::digest(value.to_string().as_bytes());
        digest[..8].iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(0)
    }

    pub fn out_dir(&self) -> PathBuf {
        self.out.clone().unwrap_or_else(|| PathBuf::from("out"))
    }

    /// The mesh named by `mesh_file` or `domain`, refined `refine` times.
    pub fn mesh(&self) -> Result<Mesh, CliError> {
        let base = match (&self.domain, &self.mesh_file) {
            (Some(_), Some(_)) => {
                return Err(CliError::config("domain", "give either `domain` or `mesh_file`, not both"));
            }
            (Some(d), None) => d.build()?,
            (None, Some(path)) => read_mesh_input(path)?,
            (None, None) => return Err(CliError::config("domain", "a domain or mesh_file is required")),
        };
        Ok(crate::geometry::refine_times(&base, self.refine))
    }

    pub fn partition(&self, mesh: &Mesh) -> Result<BoundaryPartition, CliError> {
        match &self.partition {
            Some(spec) => spec.build(mesh).map_err(CliError::from),
            None => Ok(BoundaryPartition::all_dirichlet(mesh)),
        }
    }
}

/// Mesh files may be bare or wrapped as `{"config_hash": .., "mesh": ..}`.
#[derive(Deserialize)]
#[serde(untagged)]
enum MeshInput {
    Wrapped { mesh: MeshFile },
    Bare(MeshFile),
}

fn read_mesh_input(path: &Path) -> Result<Mesh, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::config("mesh_file", format!("cannot read {}: {e}", path.display())))?;
    let input: MeshInput = serde_json::from_str(&text)
        .map_err(|e| CliError::config("mesh_file", format!("{}: {e}", path.display())))?;
    let file = match input {
        MeshInput::Wrapped { mesh } | MeshInput::Bare(mesh) => mesh,
    };
    Ok(file.into_mesh()?)
}

/// Independent seed for a labelled sub-task.
pub fn derive_seed(seed: u64, label: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(label.as_bytes());
    let d = h.finalize();
    u64::from_le_bytes(d[..8].try_into().expect("8 bytes"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config() {
        let c = parse_config_str(r#"{"command":"mesh","domain":{"kind":"unit_square","n":4}}"#).unwrap();
        assert_eq!(c.command, Some(CommandName::Mesh));
        assert_eq!(c.mesh().unwrap().n_vertices(), 25);
    }

    #[test]
    fn bad_exponent_names_the_field() {
        let err = parse_config_str(r#"{"command":"solve-plap","p":0.5}"#).unwrap_err();
        match err {
            CliError::Config { path, message } => {
                assert_eq!(path.as_deref(), Some("p"));
                assert!(message.contains("greater than 1"));
            }
            other => panic!("{other:?}"),
        }
        let err = parse_config_str(r#"{"p_list":[2, 1.0]}"#).unwrap_err();
        assert!(matches!(err, CliError::Config { path: Some(p), .. } if p == "p_list[1]"));
    }

    #[test]
    fn unknown_keys_are_tolerated() {
        let c = parse_config_str(r#"{"command":"mesh","colour":"blue","domain":{"kind":"unit_square","n":2}}"#).unwrap();
        assert_eq!(c.refine, 0);
    }

    #[test]
    fn hash_ignores_output_location() {
        let a = parse_config_str(r#"{"command":"mesh","seed":3}"#).unwrap();
        let mut b = a.clone();
        b.out = Some("elsewhere".into());
        b.threads = Some(8);
        assert_eq!(a.hash(), b.hash());
        b.seed = Some(4);
        assert_ne!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 16);
    }

    #[test]
    fn derived_seeds_differ_by_label() {
        assert_ne!(derive_seed(1, "a"), derive_seed(1, "b"));
        assert_eq!(derive_seed(1, "a"), derive_seed(1, "a"));
    }

    #[test]
    fn partition_spec_coverage() {
        let c = parse_config_str(
            r#"{"domain":{"kind":"unit_square","n":2},"partition":{"dirichlet":["left"],"neumann":["right","top"]}}"#,
        )
        .unwrap();
        let m = c.mesh().unwrap();
        assert!(c.partition(&m).is_err());
        let spec = PartitionSpec {
            dirichlet: vec!["left".into()],
            neumann: vec!["right".into(), "top".into(), "bottom".into()],
        };
        assert!(spec.build(&m).unwrap().has_dirichlet());
    }
}

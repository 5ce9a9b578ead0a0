//! Run configuration: one JSON document, overridable by CLI flags.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::cli::CliError;
use crate::mesh::MeshPattern;
use crate::stabilize::WeightMode;

/// Full run configuration. Every field has a default, so a config file (and
/// any field in it) is optional.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub domain: DomainConfig,
    pub mesh: MeshConfig,
    pub cluster: ClusterConfig,
    pub solver: SolverConfig,
    pub weight_mode: WeightMode,
    pub outputs: OutputConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            domain: DomainConfig::default(),
            mesh: MeshConfig::default(),
            cluster: ClusterConfig::default(),
            solver: SolverConfig::default(),
            weight_mode: WeightMode::PaperD,
            outputs: OutputConfig::default(),
        }
    }
}

/// Domain selection. `rect` is the unit square stretched horizontally by
/// `eps`; `triangle` is the equilateral triangle with the apex shifted by
/// `eps` along the case direction; `polygon` is a general convex polygon with
/// an explicit vertex-displacement direction (layout `x_1..x_k, y_1..y_k`).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
pub enum DomainConfig {
    Rect {
        #[serde(default)]
        eps: f64,
    },
    Triangle {
        case: TriangleCase,
        #[serde(default = "default_triangle_eps")]
        eps: f64,
    },
    Polygon {
        vertices: Vec<[f64; 2]>,
        direction: Vec<f64>,
        #[serde(default)]
        eps: f64,
    },
}

fn default_triangle_eps() -> f64 {
    1e-6
}

impl Default for DomainConfig {
    fn default() -> Self {
        DomainConfig::Rect { eps: 0.0 }
    }
}

impl DomainConfig {
    pub fn eps(&self) -> f64 {
        match self {
            DomainConfig::Rect { eps }
            | DomainConfig::Triangle { eps, .. }
            | DomainConfig::Polygon { eps, .. } => *eps,
        }
    }

    pub fn set_eps(&mut self, value: f64) {
        match self {
            DomainConfig::Rect { eps }
            | DomainConfig::Triangle { eps, .. }
            | DomainConfig::Polygon { eps, .. } => *eps = value,
        }
    }
}

/// Apex perturbation direction of the triangle experiments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TriangleCase {
    A,
    B,
    C,
    D,
}

impl TriangleCase {
    pub const ALL: [TriangleCase; 4] = [
        TriangleCase::A,
        TriangleCase::B,
        TriangleCase::C,
        TriangleCase::D,
    ];

    /// Vertex displacement direction (`x_1..x_3, y_1..y_3`) for a unit `eps`.
    pub fn direction(&self) -> Vec<f64> {
        match self {
            TriangleCase::A => vec![0.0, 0.0, 1.0, 0.0, 0.0, 0.0],
            TriangleCase::B => vec![0.0, 0.0, -1.0, 0.0, 0.0, 0.0],
            TriangleCase::C => vec![0.0, 0.0, 0.0, 0.0, 0.0, 1.0],
            TriangleCase::D => vec![0.0, 0.0, 0.0, 0.0, 0.0, -1.0],
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            TriangleCase::A => "A",
            TriangleCase::B => "B",
            TriangleCase::C => "C",
            TriangleCase::D => "D",
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MeshConfig {
    /// Diagonal pattern for rectangle meshes.
    pub pattern: MeshPattern,
    /// Cells per unit side for rectangle meshes.
    pub n: usize,
    /// Refinement levels for triangle and polygon meshes.
    pub levels: u32,
}

impl Default for MeshConfig {
    fn default() -> Self {
        Self {
            pattern: MeshPattern::Left,
            n: 64,
            levels: 6,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ClusterConfig {
    /// 1-based index of the first clustered eigenvalue.
    pub first: usize,
    /// 1-based index of the last clustered eigenvalue.
    pub last: usize,
}

impl Default for ClusterConfig {
    fn default() -> Self {
        Self { first: 2, last: 3 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    pub tol: f64,
    pub max_iter: usize,
    pub seed: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        let opts = crate::eigensolve::SolverOpts::default();
        Self {
            tol: opts.tol,
            max_iter: opts.max_iter,
            seed: opts.seed,
        }
    }
}

impl SolverConfig {
    pub fn opts(&self) -> crate::eigensolve::SolverOpts {
        crate::eigensolve::SolverOpts {
            tol: self.tol,
            max_iter: self.max_iter,
            seed: self.seed,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub dir: PathBuf,
    pub emit_vtk: bool,
    pub emit_csv: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("out"),
            emit_vtk: true,
            emit_csv: true,
        }
    }
}

impl RunConfig {
    /// Loads a JSON config file; parse errors carry line/column and the
    /// offending field.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        serde_json::from_str(&text)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    /// Field-range validation with field-named diagnostics.
    pub fn validate(&self) -> Result<(), CliError> {
        let fail = |msg: String| Err(CliError::Config(msg));
        let eps = self.domain.eps();
        if !eps.is_finite() || eps < 0.0 {
            return fail(format!("domain.eps must be finite and >= 0, got {eps}"));
        }
        if let DomainConfig::Polygon {
            vertices,
            direction,
            ..
        } = &self.domain
        {
            if vertices.len() < 3 {
                return fail(format!(
                    "domain.vertices needs at least 3 entries, got {}",
                    vertices.len()
                ));
            }
            if direction.len() != 2 * vertices.len() {
                return fail(format!(
                    "domain.direction must have 2k = {} entries, got {}",
                    2 * vertices.len(),
                    direction.len()
                ));
            }
        }
        if self.mesh.n == 0 || self.mesh.n > 1024 {
            return fail(format!("mesh.n must be in 1..=1024, got {}", self.mesh.n));
        }
        if self.mesh.levels == 0 || self.mesh.levels > 9 {
            return fail(format!(
                "mesh.levels must be in 1..=9, got {}",
                self.mesh.levels
            ));
        }
        if self.cluster.first == 0 || self.cluster.last < self.cluster.first {
            return fail(format!(
                "cluster must satisfy 1 <= first <= last, got {}..{}",
                self.cluster.first, self.cluster.last
            ));
        }
        if self.cluster.last > 64 {
            return fail(format!(
                "cluster.last must be <= 64, got {}",
                self.cluster.last
            ));
        }
        if self.solver.tol <= 0.0 || !self.solver.tol.is_finite() {
            return fail(format!(
                "solver.tol must be positive and finite, got {}",
                self.solver.tol
            ));
        }
        if self.solver.max_iter == 0 {
            return fail("solver.max_iter must be >= 1".to_string());
        }
        Ok(())
    }
}

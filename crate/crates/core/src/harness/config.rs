//! TOML configuration of studies and demonstrations.
//!
//! ```toml
//! seed = 0
//!
//! [domain]
//! kind = "unit-square"          # or "boxes" with boxes = [[x0, x1, y0, y1], …]
//!
//! [mesh]
//! base = 4                      # subdivisions per axis on level 0
//! levels = 3                    # level k uses base·2^k
//!
//! [pair]
//! kind = "mini"
//!
//! [law]
//! name = "power-law"
//! mu = 0.5
//! r = 3.0
//!
//! [reference]
//! kind = "manufactured"         # or "surrogate" (next finer level)
//! amplitude = 10.0
//!
//! [solver]                      # see SolverOptions
//! convection = "none"
//!
//! [diagnostics]
//! infsup = true
//! an = true
//! an_eps = [1e-2, 1e-3]
//! an_thetas = [0.5]
//!
//! [output]
//! dir = "out"
//! vtk = true
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::constitutive::{GraphLaw, LawKind};
use crate::elements::PairKind;
use crate::error::{Error, Result};
use crate::mesh::{BoxDomain, Triangulation};
use crate::system::{exponent_threshold, SolverOptions};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DomainKind {
    UnitSquare,
    Boxes,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DomainConfig {
    pub kind: DomainKind,
    /// `[x0, x1, y0, y1]` per box, for `kind = "boxes"`.
    pub boxes: Vec<[f64; 4]>,
}

impl Default for DomainConfig {
    fn default() -> Self {
        Self {
            kind: DomainKind::UnitSquare,
            boxes: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MeshConfig {
    pub base: usize,
    pub levels: usize,
}

impl Default for MeshConfig {
    fn default() -> Self {
        Self { base: 8, levels: 3 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PairConfig {
    pub kind: PairKind,
}

impl Default for PairConfig {
    fn default() -> Self {
        Self { kind: PairKind::Mini }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LawConfig {
    pub name: String,
    pub mu: Option<f64>,
    pub tau: Option<f64>,
    pub r: Option<f64>,
}

impl Default for LawConfig {
    fn default() -> Self {
        Self {
            name: "newtonian".into(),
            mu: None,
            tau: None,
            r: None,
        }
    }
}

impl LawConfig {
    pub fn build(&self, dim: usize) -> Result<GraphLaw> {
        GraphLaw::new(LawKind::from_name(&self.name, self.mu, self.tau, self.r)?, dim)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReferenceKind {
    Manufactured,
    /// Solution on the next finer level.
    Surrogate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReferenceConfig {
    pub kind: ReferenceKind,
    /// Amplitude of the manufactured stream function (also drives the body
    /// force for surrogate references).
    pub amplitude: f64,
}

impl Default for ReferenceConfig {
    fn default() -> Self {
        Self {
            kind: ReferenceKind::Manufactured,
            amplitude: 10.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiagnosticsConfig {
    pub infsup: bool,
    pub an: bool,
    pub an_eps: Vec<f64>,
    pub an_thetas: Vec<f64>,
    /// Maximal-function and discrete-truncation report of each solution.
    pub truncation: bool,
}

impl Default for DiagnosticsConfig {
    fn default() -> Self {
        Self {
            infsup: false,
            an: false,
            an_eps: vec![1e-2, 1e-3],
            an_thetas: vec![0.5],
            truncation: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
    pub vtk: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("out"),
            vtk: false,
        }
    }
}

/// Settings of the truncation demonstration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TruncationConfig {
    /// Subdivisions of the unit square for the rough field.
    pub mesh: usize,
    pub pair: PairKind,
    /// Amplitude of the random vertex values of the rough field.
    pub amplitude: f64,
    /// Radius of the disk around the centre carrying the rough field.
    pub radius: f64,
    pub lambdas: Vec<f64>,
    /// Exponent `s` of the level selection.
    pub s: f64,
    pub j_max: u32,
    /// Length of the weak-null sequence.
    pub sequence: usize,
    /// Subdivisions of the mesh carrying the sequence.
    pub sequence_mesh: usize,
    /// `‖∇Eⁿ‖_s` of every member of the sequence.
    pub sequence_gradient: f64,
    pub kappa: f64,
}

impl Default for TruncationConfig {
    fn default() -> Self {
        Self {
            mesh: 16,
            pair: PairKind::Mini,
            amplitude: 0.7,
            radius: 0.25,
            lambdas: vec![2.0, 4.0, 8.0, 16.0],
            s: 2.0,
            j_max: 4,
            sequence: 6,
            sequence_mesh: 32,
            sequence_gradient: 24.0,
            kappa: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StudyConfig {
    pub seed: u64,
    pub domain: DomainConfig,
    pub mesh: MeshConfig,
    pub pair: PairConfig,
    pub law: LawConfig,
    pub reference: ReferenceConfig,
    pub solver: SolverOptions,
    pub diagnostics: DiagnosticsConfig,
    pub output: OutputConfig,
    pub truncation: TruncationConfig,
}

impl Default for StudyConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            domain: DomainConfig::default(),
            mesh: MeshConfig::default(),
            pair: PairConfig::default(),
            law: LawConfig::default(),
            reference: ReferenceConfig::default(),
            solver: SolverOptions::default(),
            diagnostics: DiagnosticsConfig::default(),
            output: OutputConfig::default(),
            truncation: TruncationConfig::default(),
        }
    }
}

impl StudyConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::parse("config", e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serialises")
    }

    pub fn dim(&self) -> usize {
        2
    }

    /// Rejects configurations the solver cannot honour.
    pub fn validate(&self) -> Result<()> {
        let v = |m: String| Err(Error::Validation(m));
        if self.mesh.levels == 0 {
            return v("at least one refinement level is required".into());
        }
        if self.mesh.base == 0 {
            return v("mesh.base must be positive".into());
        }
        if self.mesh.base << (self.mesh.levels - 1) > 128 {
            return v(format!(
                "finest level {}×{} exceeds the 128×128 desk-scale limit",
                self.mesh.base << (self.mesh.levels - 1),
                self.mesh.base << (self.mesh.levels - 1)
            ));
        }
        if !self.pair.kind.supported(self.dim()) {
            return v(format!("pair `{}` unsupported in {}D", self.pair.kind.name(), self.dim()));
        }
        let law = self.law.build(self.dim()).map_err(|e| Error::Validation(e.to_string()))?;
        let bound = exponent_threshold(self.pair.kind.divergence_free(), self.dim());
        if law.r() <= bound {
            return v(format!(
                "exponent r = {} must exceed {bound:.6} for `{}` in dimension {}",
                law.r(),
                self.pair.kind.name(),
                self.dim()
            ));
        }
        match self.domain.kind {
            DomainKind::UnitSquare => {}
            DomainKind::Boxes => {
                if self.domain.boxes.is_empty() {
                    return v("domain.kind = \"boxes\" needs a non-empty `boxes` list".into());
                }
                if self.reference.kind == ReferenceKind::Manufactured {
                    return v("the manufactured reference is defined on the unit square only".into());
                }
            }
        }
        if !(self.reference.amplitude.is_finite()) {
            return v("reference.amplitude must be finite".into());
        }
        if self.diagnostics.an_eps.iter().any(|&e| !(e > 0.0)) {
            return v("diagnostics.an_eps must be positive".into());
        }
        if self.diagnostics.an_thetas.iter().any(|&t| !(t > 0.0)) {
            return v("diagnostics.an_thetas must be positive".into());
        }
        if !(self.solver.newton_tol > 0.0) || self.solver.max_iter == 0 {
            return v("solver tolerance and iteration limit must be positive".into());
        }
        let t = &self.truncation;
        if !(t.radius > 0.0) || t.mesh == 0 || t.sequence_mesh == 0 || t.sequence == 0 {
            return v("truncation meshes and sequence length must be positive".into());
        }
        if t.lambdas.iter().any(|&l| !(l > 0.0)) || !(t.sequence_gradient >= 0.0) {
            return v("truncation levels must be positive".into());
        }
        if !(t.s > 1.0 && t.s.is_finite()) {
            return v("truncation.s must lie in (1, ∞)".into());
        }
        if !(t.kappa > 0.0 && t.kappa <= 1.0) {
            return v("truncation.kappa must lie in (0, 1]".into());
        }
        if t.j_max == 0 || t.j_max > 5 {
            return v("truncation.j_max must lie in 1..=5".into());
        }
        Ok(())
    }

    /// Subdivisions per axis of level `k`.
    pub fn subdivisions(&self, k: usize) -> usize {
        self.mesh.base << k
    }

    /// Mesh of level `k`.
    pub fn build_mesh(&self, k: usize) -> Result<Triangulation> {
        let n = self.subdivisions(k);
        match self.domain.kind {
            DomainKind::UnitSquare => Triangulation::build_uniform(&BoxDomain::unit(2), n),
            DomainKind::Boxes => {
                let boxes: Vec<BoxDomain> = self
                    .domain
                    .boxes
                    .iter()
                    .map(|b| BoxDomain::rect(b[0], b[1], b[2], b[3]))
                    .collect();
                let extent = boxes
                    .iter()
                    .map(|b| (b.hi[0] - b.lo[0]).max(b.hi[1] - b.lo[1]))
                    .fold(0.0, f64::max);
                Triangulation::build_union(&boxes, extent / n as f64)
            }
        }
    }
}

//! Run configuration: a TOML document with a default for every field.

use std::f64::consts::PI;

use schemars::JsonSchema;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::expansion::{check_eps_grid, QuadratureOptions};
use crate::ground_state::SolverOptions;
use crate::hyperbola::{Exponent, HyperbolaPoint, LogBoundary};
use crate::manifold::{ManifoldKind, ModelManifold};
use crate::potential::PotentialSpec;
use crate::reduced_energy::SearchOptions;

/// Pipeline stages in execution order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Hyperbola,
    GroundState,
    Constants,
    Manifold,
    Reduce,
    Expansion,
    Kernel,
}

impl Stage {
    pub const ALL: [Stage; 7] = [
        Stage::Hyperbola,
        Stage::GroundState,
        Stage::Constants,
        Stage::Manifold,
        Stage::Reduce,
        Stage::Expansion,
        Stage::Kernel,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Hyperbola => "hyperbola",
            Stage::GroundState => "ground_state",
            Stage::Constants => "constants",
            Stage::Manifold => "manifold",
            Stage::Reduce => "reduce",
            Stage::Expansion => "expansion",
            Stage::Kernel => "kernel",
        }
    }

    fn prerequisites(self) -> &'static [Stage] {
        match self {
            Stage::Hyperbola | Stage::Manifold => &[],
            Stage::GroundState => &[Stage::Hyperbola],
            Stage::Constants | Stage::Kernel => &[Stage::GroundState],
            Stage::Reduce => &[Stage::Constants],
            Stage::Expansion => &[Stage::Reduce],
        }
    }
}

/// Exponent pair on the critical hyperbola.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(default, deny_unknown_fields)]
pub struct HyperbolaConfig {
    /// Exponent p as a fraction ("3/2") or decimal. Default "3/2".
    pub p: String,
    /// Optional explicit q; derived from (p, N) when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub q: Option<String>,
    /// Dimension N. Default 8.
    #[serde(rename = "N")]
    pub n: u32,
}

impl Default for HyperbolaConfig {
    fn default() -> Self {
        Self {
            p: "3/2".into(),
            q: None,
            n: 8,
        }
    }
}

impl HyperbolaConfig {
    pub fn point(&self) -> Result<HyperbolaPoint> {
        let p: Exponent = self.p.parse()?;
        match &self.q {
            Some(q) => HyperbolaPoint::new(p, q.parse()?, self.n),
            None => HyperbolaPoint::from_p(p, self.n),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "snake_case")]
pub enum ManifoldName {
    Sphere,
    FlatTorus,
}

/// Model manifold of dimension N (taken from the hyperbola block).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(default, deny_unknown_fields)]
pub struct ManifoldConfig {
    /// "sphere" or "flat_torus". Default "flat_torus".
    pub kind: ManifoldName,
    /// Sphere radius, or the common period of a cubic torus. Default 2 pi.
    pub scale: f64,
    /// Per-axis torus periods; overrides `scale` when non-empty.
    pub periods: Vec<f64>,
    /// Cutoff radius r0; default injectivity radius / 4.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub r0: Option<f64>,
    /// Minimal peak separation; default 2.5 r0.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rho2: Option<f64>,
}

impl Default for ManifoldConfig {
    fn default() -> Self {
        Self {
            kind: ManifoldName::FlatTorus,
            scale: 2.0 * PI,
            periods: Vec::new(),
            r0: None,
            rho2: None,
        }
    }
}

impl ManifoldConfig {
    pub fn build(&self, n: u32) -> Result<ModelManifold> {
        let kind = match self.kind {
            ManifoldName::Sphere => ManifoldKind::Sphere { radius: self.scale },
            ManifoldName::FlatTorus if self.periods.is_empty() => ManifoldKind::FlatTorus {
                periods: vec![self.scale; n as usize],
            },
            ManifoldName::FlatTorus => ManifoldKind::FlatTorus {
                periods: self.periods.clone(),
            },
        };
        ModelManifold::from_kind(kind, n)
    }

    pub fn r0(&self, m: &ModelManifold) -> f64 {
        self.r0.unwrap_or_else(|| m.default_r0())
    }

    pub fn rho2(&self, m: &ModelManifold) -> f64 {
        self.rho2.unwrap_or_else(|| 2.5 * self.r0(m))
    }
}

/// Reduced-energy search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(default, deny_unknown_fields)]
pub struct ReductionConfig {
    /// Number of peaks. Default 1.
    pub k: usize,
    /// Weight of the p-perturbation; must be positive. Default 1.
    pub alpha: f64,
    /// Weight of the q-perturbation; must be positive. Default 1.
    pub beta: f64,
    /// Scale box rho1 < t < 1/rho1. Default 1e-3.
    pub rho1: f64,
    /// Multi-start count. Default 64.
    pub starts: usize,
    /// Iteration cap per start. Default 400.
    pub max_iter: usize,
    /// Gradient tolerance. Default 1e-10.
    pub gtol: f64,
    /// Relative threshold for zero Hessian eigenvalues. Default 1e-6.
    pub degeneracy_tol: f64,
    /// Relative distance below which two critical points coincide. Default 1e-6.
    pub dedup_tol: f64,
}

impl Default for ReductionConfig {
    fn default() -> Self {
        let s = SearchOptions::default();
        Self {
            k: 1,
            alpha: 1.0,
            beta: 1.0,
            rho1: 1e-3,
            starts: s.starts,
            max_iter: s.max_iter,
            gtol: s.gtol,
            degeneracy_tol: s.degeneracy_tol,
            dedup_tol: s.dedup_tol,
        }
    }
}

impl ReductionConfig {
    pub fn search(&self, seed: u64) -> SearchOptions {
        SearchOptions {
            starts: self.starts,
            seed,
            max_iter: self.max_iter,
            gtol: self.gtol,
            degeneracy_tol: self.degeneracy_tol,
            dedup_tol: self.dedup_tol,
        }
    }
}

/// Energy sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(default, deny_unknown_fields)]
pub struct ExpansionConfig {
    /// Strictly decreasing eps values spanning two decades or more. Empty
    /// selects 8 geometric points starting at min(1e-5, (1e-3 r0)^2 / max t).
    pub eps: Vec<f64>,
    /// Write an SVG plot of J - a against eps.
    pub plot: bool,
}

impl Default for ExpansionConfig {
    fn default() -> Self {
        Self {
            eps: Vec::new(),
            plot: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Stages to run; prerequisites are added automatically. Default: all.
    pub stages: Vec<Stage>,
    /// Seed for every random choice in the run. Default 0.
    pub seed: u64,
    /// Directory for reports and plots. Default "lelab-out". The ground-state
    /// cache lives in its `cache` subdirectory unless LELAB_CACHE_DIR is set.
    pub output_dir: String,
    pub hyperbola: HyperbolaConfig,
    pub manifold: ManifoldConfig,
    /// Potential h. Default: constant 20.
    pub potential: PotentialSpec,
    pub reduction: ReductionConfig,
    pub solver: SolverOptions,
    pub quadrature: QuadratureOptions,
    pub expansion: ExpansionConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            stages: Stage::ALL.to_vec(),
            seed: 0,
            output_dir: "lelab-out".into(),
            hyperbola: HyperbolaConfig::default(),
            manifold: ManifoldConfig::default(),
            potential: PotentialSpec::default(),
            reduction: ReductionConfig::default(),
            solver: SolverOptions::default(),
            quadrature: QuadratureOptions::default(),
            expansion: ExpansionConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn from_file(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    /// Hex sha256 of the canonical TOML form.
    pub fn hash(&self) -> Result<String> {
        Ok(hex(&Sha256::digest(self.to_toml()?.as_bytes())))
    }

    /// Requested stages plus prerequisites, in execution order.
    pub fn stage_plan(&self) -> Vec<Stage> {
        let mut plan: Vec<Stage> = Vec::new();
        let mut todo = self.stages.clone();
        while let Some(s) = todo.pop() {
            if !plan.contains(&s) {
                plan.push(s);
                todo.extend_from_slice(s.prerequisites());
            }
        }
        plan.sort();
        plan
    }

    /// Checks internal consistency without computing anything expensive.
    pub fn validate(&self) -> Result<()> {
        let cfg = |m: String| Err(Error::Config(m));
        if self.stages.is_empty() {
            return cfg("no stages requested".into());
        }
        let point = self.hyperbola.point()?;
        // below the dimension floor the profile still exists numerically;
        // only the logarithmic point is out of reach of the solver
        if point.log_boundary() == LogBoundary::At {
            return Err(Error::UnsupportedRegime(format!("p = {} at N = {} is the logarithmic point", point.p(), point.n())));
        }
        let m = self.manifold.build(point.n())?;
        let r0 = self.manifold.r0(&m);
        let bound = 0.5 * m.injectivity_radius();
        if !(r0 > 0.0 && r0 < bound) {
            return Err(Error::ChartViolation { r0, bound });
        }
        let rho2 = self.manifold.rho2(&m);
        if !(rho2 > 2.0 * r0) {
            return Err(Error::Separation(format!("rho2 = {rho2} must exceed 2 r0 = {}", 2.0 * r0)));
        }
        self.potential.validate(&m)?;
        let r = &self.reduction;
        if r.k == 0 {
            return cfg("k must be at least 1".into());
        }
        if !(r.alpha > 0.0 && r.beta > 0.0) || !r.alpha.is_finite() || !r.beta.is_finite() {
            return cfg(format!("alpha = {} and beta = {} must be positive", r.alpha, r.beta));
        }
        if !(r.rho1 > 0.0 && r.rho1 < 1.0) {
            return cfg(format!("rho1 = {} must lie in (0, 1)", r.rho1));
        }
        r.search(self.seed).validate()?;
        self.solver.validate()?;
        self.quadrature.validate()?;
        if !self.expansion.eps.is_empty() {
            check_eps_grid(&self.expansion.eps)?;
        }
        if self.output_dir.trim().is_empty() {
            return cfg("output_dir is empty".into());
        }
        Ok(())
    }
}

/// JSON schema of the configuration file.
pub fn schema() -> String {
    serde_json::to_string_pretty(&schemars::schema_for!(RunConfig)).expect("schema serializes")
}

pub(crate) fn hex(bytes: &[u8]) -> String {
    use std::fmt::Write as _;
    bytes.iter().fold(String::new(), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

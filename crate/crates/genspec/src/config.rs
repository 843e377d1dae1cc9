//! Run configuration: a JSON config file plus CLI flag overrides (flags
//! win). Defaults reproduce the built-in benchmark run: eps = 1e-3,
//! 50x51 grid, L = 5, seed (5, 0), spacing 0.1, k_max = 7.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::analysis::AnalysisConfig;
use crate::bench;
use crate::error::{GenspecError, Result};
use crate::expr::Expr;
use crate::sde::{Axis, Boundary, DomainSpec, SdeSystem};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    /// Algorithm 2A: rotated single-valued graph parameterization.
    Graph,
    /// Algorithm 2B: arc-length parameterization.
    Arclength,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Built-in system name (`crommelin_transformed`, `crommelin_original`,
    /// `isotropic_ou`) or a path to a JSON system-definition file.
    pub system: String,
    pub eps: f64,
    /// Grid sizes (nx, ny).
    pub grid: [usize; 2],
    /// Half-width of the non-periodic axis truncation.
    pub l: f64,
    pub seed_point: [f64; 2],
    /// Fibre resampling spacing h.
    pub spacing: f64,
    /// Ratio threshold for the multiscale verdict.
    pub threshold: f64,
    /// Rotation angles (degrees) for the graph method.
    pub theta: Vec<f64>,
    /// Timescale method; when absent both are run.
    pub method: Option<Method>,
    /// Output directory.
    pub out: PathBuf,
    /// Number of leading eigenpairs (including the zero mode).
    pub k_max: usize,
    /// Sample count of the graph-parameterized 1-D operator.
    pub n_samples: usize,
    /// Fibre points per local fitting window.
    pub window: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            system: "crommelin_transformed".into(),
            eps: 1e-3,
            grid: [50, 51],
            l: 5.0,
            seed_point: [5.0, 0.0],
            spacing: 0.1,
            threshold: 10.0,
            theta: (0..15).map(|i| 55.0 + 5.0 * i as f64).collect(),
            method: None,
            out: PathBuf::from("out"),
            k_max: 7,
            n_samples: 200,
            window: 13,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path)?;
        let cfg: RunConfig = serde_json::from_str(&text)
            .map_err(|e| GenspecError::Config(format!("{}: {e}", path.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.eps <= 0.0 {
            return Err(GenspecError::Config(format!(
                "eps must be positive, got {}",
                self.eps
            )));
        }
        for (name, v) in [
            ("l", self.l),
            ("spacing", self.spacing),
            ("threshold", self.threshold),
        ] {
            if v <= 0.0 {
                return Err(GenspecError::Config(format!(
                    "{name} must be positive, got {v}"
                )));
            }
        }
        if self.grid[0] < 4 || self.grid[1] < 4 {
            return Err(GenspecError::Config(format!(
                "grid sizes must be at least 4, got {:?}",
                self.grid
            )));
        }
        if self.k_max < 2 {
            return Err(GenspecError::Config("k_max must be at least 2".into()));
        }
        if self.n_samples < 12 {
            return Err(GenspecError::Config(
                "n_samples must be at least 12".into(),
            ));
        }
        if self.window < 5 {
            return Err(GenspecError::Config("window must be at least 5".into()));
        }
        Ok(())
    }

    pub fn analysis_config(&self) -> AnalysisConfig {
        AnalysisConfig {
            spacing: self.spacing,
            window: self.window,
            threshold: self.threshold,
            k_max: self.k_max,
            n_samples: self.n_samples,
            ..AnalysisConfig::default()
        }
    }

    /// Instantiate the configured system: a built-in by name, otherwise a
    /// JSON system-definition file.
    pub fn build_system(&self) -> Result<SdeSystem> {
        match self.system.as_str() {
            "crommelin_transformed" => {
                bench::crommelin_transformed(self.eps, self.l, self.grid[0], self.grid[1])
            }
            "crommelin_original" => {
                bench::crommelin_original(self.eps, self.l, self.grid[0], self.grid[1])
            }
            "isotropic_ou" => bench::isotropic_ou(self.l, self.grid[0]),
            path => {
                let p = Path::new(path);
                if !p.exists() {
                    return Err(GenspecError::Config(format!(
                        "unknown system `{path}` (not a built-in name or an existing file)"
                    )));
                }
                load_system_file(p, self.eps)
            }
        }
    }
}

/// JSON definition of a user system with expression-language coefficients.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemSpec {
    pub dim: usize,
    pub noise_dim: usize,
    pub axes: Vec<AxisSpec>,
    /// Drift component expressions, one per dimension.
    pub drift: Vec<String>,
    /// Noise coefficient matrix expressions, dim x noise_dim row-major.
    pub sigma: Vec<Vec<String>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AxisSpec {
    pub min: f64,
    pub max: f64,
    pub n: usize,
    /// "periodic", "dirichlet", or "neumann".
    pub boundary: String,
}

pub fn load_system_file(path: &Path, eps: f64) -> Result<SdeSystem> {
    let text = std::fs::read_to_string(path)?;
    let spec: SystemSpec = serde_json::from_str(&text)
        .map_err(|e| GenspecError::Config(format!("{}: {e}", path.display())))?;
    build_from_spec(&spec, eps)
}

pub fn build_from_spec(spec: &SystemSpec, eps: f64) -> Result<SdeSystem> {
    let d = spec.dim;
    let l = spec.noise_dim;
    if spec.axes.len() != d {
        return Err(GenspecError::Config(format!(
            "expected {d} axes, got {}",
            spec.axes.len()
        )));
    }
    if spec.drift.len() != d {
        return Err(GenspecError::Config(format!(
            "expected {d} drift expressions, got {}",
            spec.drift.len()
        )));
    }
    if spec.sigma.len() != d || spec.sigma.iter().any(|row| row.len() != l) {
        return Err(GenspecError::Config(format!(
            "sigma must be a {d}x{l} matrix of expressions"
        )));
    }
    let axes = spec
        .axes
        .iter()
        .map(|a| {
            let boundary = match a.boundary.as_str() {
                "periodic" => Boundary::Periodic,
                "dirichlet" => Boundary::DirichletZero,
                "neumann" => Boundary::NeumannZero,
                other => {
                    return Err(GenspecError::Config(format!(
                        "unknown boundary `{other}` (expected periodic, dirichlet, or neumann)"
                    )))
                }
            };
            Ok(Axis {
                a: a.min,
                b: a.max,
                n: a.n,
                boundary,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let domain = DomainSpec::new(axes)?;
    let drift: Vec<Expr> = spec
        .drift
        .iter()
        .map(|s| Expr::parse(s, d))
        .collect::<Result<_>>()?;
    let sigma: Vec<Expr> = spec
        .sigma
        .iter()
        .flatten()
        .map(|s| Expr::parse(s, d))
        .collect::<Result<_>>()?;
    SdeSystem::from_fns(
        d,
        l,
        domain,
        move |z| drift.iter().map(|e| e.eval(z, eps)).collect(),
        move |z| sigma.iter().map(|e| e.eval(z, eps)).collect(),
    )
}

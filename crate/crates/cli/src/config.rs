//! Optional TOML run configuration. Command-line flags override file values.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Deserialize;
use topofield::model::DesignDomain;
use topofield::simp::SimpConfig;

#[derive(Debug, Default, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub seed: Option<u64>,
    pub count: Option<usize>,
    pub out: Option<PathBuf>,
    pub threads: Option<usize>,
    pub combo: Option<u8>,
    #[serde(default)]
    pub domain: DomainOverrides,
    #[serde(default)]
    pub simp: SimpOverrides,
}

#[derive(Debug, Default, Clone, Copy, PartialEq, Deserialize, clap::Args)]
#[serde(deny_unknown_fields)]
pub struct DomainOverrides {
    /// Elements along x
    #[arg(long)]
    pub nelx: Option<usize>,
    /// Elements along y
    #[arg(long)]
    pub nely: Option<usize>,
}

#[derive(Debug, Default, Clone, Copy, PartialEq, Deserialize, clap::Args)]
#[serde(deny_unknown_fields)]
pub struct SimpOverrides {
    /// SIMP penalty exponent
    #[arg(long)]
    pub penal: Option<f64>,
    /// Sensitivity filter radius in elements
    #[arg(long)]
    pub filter_radius: Option<f64>,
    /// Optimality-criteria move limit
    #[arg(long)]
    pub move_limit: Option<f64>,
    /// Optimality-criteria damping exponent
    #[arg(long)]
    pub oc_damping: Option<f64>,
    /// Iteration cap
    #[arg(long)]
    pub max_iters: Option<usize>,
    /// Stop once the largest density change falls below this
    #[arg(long)]
    pub change_tol: Option<f64>,
    /// Volume tolerance of the multiplier bisection
    #[arg(long)]
    pub vf_bisect_tol: Option<f64>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }
}

impl DomainOverrides {
    /// `flags` wins over `self` wherever it is set.
    pub fn merged(self, flags: Self) -> Self {
        Self {
            nelx: flags.nelx.or(self.nelx),
            nely: flags.nely.or(self.nely),
        }
    }

    pub fn resolve(self) -> DesignDomain {
        let d = DesignDomain::default();
        DesignDomain::with_size(self.nelx.unwrap_or(d.nelx), self.nely.unwrap_or(d.nely))
    }
}

impl SimpOverrides {
    pub fn merged(self, flags: Self) -> Self {
        Self {
            penal: flags.penal.or(self.penal),
            filter_radius: flags.filter_radius.or(self.filter_radius),
            move_limit: flags.move_limit.or(self.move_limit),
            oc_damping: flags.oc_damping.or(self.oc_damping),
            max_iters: flags.max_iters.or(self.max_iters),
            change_tol: flags.change_tol.or(self.change_tol),
            vf_bisect_tol: flags.vf_bisect_tol.or(self.vf_bisect_tol),
        }
    }

    pub fn resolve(self) -> SimpConfig {
        let d = SimpConfig::default();
        SimpConfig {
            penal: self.penal.unwrap_or(d.penal),
            filter_radius: self.filter_radius.unwrap_or(d.filter_radius),
            move_limit: self.move_limit.unwrap_or(d.move_limit),
            oc_damping: self.oc_damping.unwrap_or(d.oc_damping),
            max_iters: self.max_iters.unwrap_or(d.max_iters),
            change_tol: self.change_tol.unwrap_or(d.change_tol),
            vf_bisect_tol: self.vf_bisect_tol.unwrap_or(d.vf_bisect_tol),
        }
    }
}

//! Run configuration: a single JSON document per run, validated against all
//! module invariants before any compute.

use crate::assembly::{MaterialMap, Mode, RegionMaterial};
use crate::mesh::{GeometrySpec, RegionTag};
use crate::modespec::{PmlProfile, WaveConfig};
use crate::{Error, Result};
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::fs;
use std::path::Path;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Workflow {
    Converge,
    Simulate,
    Compare,
    Advise,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModeName {
    Tm,
    Te,
}

impl From<ModeName> for Mode {
    fn from(m: ModeName) -> Mode {
        match m {
            ModeName::Tm => Mode::Tm,
            ModeName::Te => Mode::Te,
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegionMaterialConfig {
    pub epsilon: f64,
    #[serde(default)]
    pub sigma: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaterialConfig {
    pub omega: f64,
    pub mu: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub axon: Option<RegionMaterialConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub myelin: Option<RegionMaterialConfig>,
    pub exterior: RegionMaterialConfig,
}

impl MaterialConfig {
    pub fn build(&self) -> Result<MaterialMap> {
        let mut regions = HashMap::new();
        let mut put = |tag, cfg: Option<RegionMaterialConfig>| {
            if let Some(c) = cfg {
                regions.insert(
                    tag,
                    RegionMaterial {
                        epsilon: c.epsilon,
                        sigma: c.sigma,
                    },
                );
            }
        };
        put(RegionTag::Axon, self.axon);
        put(RegionTag::Myelin, self.myelin);
        put(RegionTag::Exterior, Some(self.exterior));
        MaterialMap::new(self.omega, self.mu, regions)
    }

    /// Exterior wavenumber `k = omega sqrt(eps mu)`.
    pub fn exterior_k(&self) -> f64 {
        self.omega * (self.exterior.epsilon * self.mu).sqrt()
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeshConfig {
    /// Radial cell count across all segments (distributed by length).
    pub nr: usize,
    /// Axial cell count.
    pub nz: usize,
    /// Uniform refinement levels to run (1 = just the base mesh).
    #[serde(default = "default_levels")]
    pub levels: usize,
}

fn default_levels() -> usize {
    1
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IncidentConfig {
    /// `bessel`: u0(r) = -amplitude * J1(kc r) on the axon part of the left
    /// boundary; `zero`: homogeneous.
    pub profile: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kc: Option<f64>,
    #[serde(default = "default_amplitude")]
    pub amplitude: f64,
}

fn default_amplitude() -> f64 {
    1.0
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompareConfig {
    /// Extra absorption strengths to sweep (the base chi0 always runs).
    #[serde(default)]
    pub chi0_sweep: Vec<f64>,
    /// Extra DtN truncation orders to sweep.
    #[serde(default)]
    pub truncation_sweep: Vec<usize>,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdviseConfig {
    /// Target size for the layer-truncation bound factor.
    pub target: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub workflow: Workflow,
    pub name: String,
    pub geometry: GeometrySpec,
    pub materials: MaterialConfig,
    pub mode: ModeName,
    /// Axial mode number of the exact solution in convergence runs.
    #[serde(default = "default_mode_m")]
    pub mode_m: usize,
    /// PML absorption strength chi0 (radii come from the geometry).
    #[serde(default)]
    pub chi0: f64,
    pub mesh: MeshConfig,
    /// DtN series truncation; defaulted from k and Z when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dtn_truncation: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub incident: Option<IncidentConfig>,
    /// Radial band `[lo, hi]` whose energy fraction is reported by the
    /// simulation workflow, independent of region tags (so geometries with
    /// and without a sheath report over the same annulus).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub report_band: Option<(f64, f64)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub compare: Option<CompareConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub advise: Option<AdviseConfig>,
}

fn default_mode_m() -> usize {
    1
}

impl RunConfig {
    pub fn from_file(path: &Path) -> Result<RunConfig> {
        let text =
            fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        let config: RunConfig = serde_json::from_str(&text).map_err(|e| Error::Parse {
            path: path.display().to_string(),
            msg: e.to_string(),
        })?;
        config.validate()?;
        Ok(config)
    }

    pub fn wave(&self) -> Result<WaveConfig> {
        WaveConfig::new(self.materials.exterior_k(), self.geometry.z_len)
    }

    pub fn pml_profile(&self) -> Result<PmlProfile> {
        PmlProfile::new(self.geometry.pml_start, self.geometry.r_outer, self.chi0)
    }

    /// Default DtN truncation: max(30, 3 k Z / pi).
    pub fn dtn_truncation_or_default(&self) -> usize {
        self.dtn_truncation.unwrap_or_else(|| {
            let k = self.materials.exterior_k();
            let by_freq = (3.0 * k * self.geometry.z_len / std::f64::consts::PI).ceil() as usize;
            by_freq.max(30)
        })
    }

    pub fn validate(&self) -> Result<()> {
        self.geometry.validate()?;
        self.materials.build()?;
        self.wave()?;
        if self.name.is_empty()
            || self
                .name
                .chars()
                .any(|c| !(c.is_ascii_alphanumeric() || c == '-' || c == '_'))
        {
            return Err(Error::Validation(format!(
                "run name {:?} must be non-empty and [A-Za-z0-9_-]",
                self.name
            )));
        }
        if self.mesh.nr < 1 || self.mesh.nz < 1 || self.mesh.levels < 1 {
            return Err(Error::Validation(format!(
                "mesh needs nr, nz, levels >= 1, got {}, {}, {}",
                self.mesh.nr, self.mesh.nz, self.mesh.levels
            )));
        }
        if self.chi0 < 0.0 {
            return Err(Error::Validation(format!(
                "chi0 must be >= 0, got {}",
                self.chi0
            )));
        }
        if self.mode_m < 1 {
            return Err(Error::Validation("mode_m must be >= 1".into()));
        }
        if let Some(m) = self.dtn_truncation {
            if m < 1 {
                return Err(Error::Validation("dtn_truncation must be >= 1".into()));
            }
        }
        if let Some((lo, hi)) = self.report_band {
            if !(0.0 <= lo && lo < hi) {
                return Err(Error::Validation(format!(
                    "report_band needs 0 <= lo < hi, got ({lo}, {hi})"
                )));
            }
        }
        match self.workflow {
            Workflow::Converge => {
                if self.geometry.pml_start >= self.geometry.r_outer && self.chi0 > 0.0 {
                    return Err(Error::Validation(
                        "convergence study needs a layer: r_outer > pml_start".into(),
                    ));
                }
            }
            Workflow::Simulate => {
                let incident = self
                    .incident
                    .as_ref()
                    .ok_or_else(|| Error::Validation("simulate needs an incident block".into()))?;
                match incident.profile.as_str() {
                    "bessel" => {
                        if incident.kc.is_none() {
                            return Err(Error::Validation(
                                "bessel incident profile needs kc".into(),
                            ));
                        }
                        if self.geometry.axon_radius.is_none() {
                            return Err(Error::Validation(
                                "bessel incident profile needs an axon".into(),
                            ));
                        }
                    }
                    "zero" => {}
                    other => {
                        return Err(Error::Validation(format!(
                            "unknown incident profile {other:?}"
                        )));
                    }
                }
            }
            Workflow::Compare => {
                if self.geometry.pml_start >= self.geometry.r_outer {
                    return Err(Error::Validation(
                        "comparison needs a layer: r_outer > pml_start".into(),
                    ));
                }
            }
            Workflow::Advise => {
                let advise = self
                    .advise
                    .ok_or_else(|| Error::Validation("advise needs an advise block".into()))?;
                if !(advise.target > 0.0) {
                    return Err(Error::Validation(format!(
                        "advise target must be > 0, got {}",
                        advise.target
                    )));
                }
            }
        }
        Ok(())
    }

    /// Pretty JSON of the effective configuration (defaults filled in).
    pub fn echo(&self) -> String {
        let mut effective = self.clone();
        effective.dtn_truncation = Some(self.dtn_truncation_or_default());
        serde_json::to_string_pretty(&effective).expect("config serializes")
    }
}

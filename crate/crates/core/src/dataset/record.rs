use serde::{Deserialize, Serialize};

use super::DatasetError;
use crate::fem::FieldBundle;
use crate::model::{rasterize_bc, rasterize_load, DensityField, DesignDomain, Grid, ProblemSpec};
use crate::sampler::SplitLabel;

/// Channel order of an encoded sample: the four input images, then the
/// initial fields.
pub const CHANNELS: [&str; 14] = [
    "vf", "bc_code", "load_x", "load_y", "ux", "uy", "s11", "s22", "s12", "e11", "e22", "e12",
    "svm", "w",
];

/// Channels that describe the problem itself (the `x` inputs).
pub const INPUT_CHANNELS: [&str; 4] = ["vf", "bc_code", "load_x", "load_y"];

#[derive(Debug, Clone, PartialEq)]
pub struct Channel {
    pub name: String,
    pub values: Grid<f32>,
}

/// Optimizer outcome recorded with a generated sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimpSummary {
    pub iterations: usize,
    pub converged: bool,
    pub initial_compliance: f64,
    pub final_compliance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SampleMeta {
    pub sample_id: u64,
    pub spec: ProblemSpec,
    /// Assigned by the split step; absent in freshly generated files.
    pub split: Option<SplitLabel>,
    pub seed: u64,
    pub stream: u64,
    pub generator: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub simp: Option<SimpSummary>,
}

/// Named channel stack, target density and metadata of one sample. Values are
/// stored as f32; computation happens in f64 and is cast once here.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleRecord {
    pub channels: Vec<Channel>,
    pub target: Grid<f32>,
    pub meta: SampleMeta,
}

fn to_f32(g: &Grid<f64>) -> Grid<f32> {
    g.map(|&v| v as f32)
}

/// Builds the 14-channel record of a solved problem.
pub fn encode_sample(
    spec: &ProblemSpec,
    fields: &FieldBundle,
    target: &DensityField,
    domain: &DesignDomain,
    meta: SampleMeta,
) -> Result<SampleRecord, DatasetError> {
    let shape = (domain.nely, domain.nelx);
    for (what, found) in [("target", target.shape()), ("fields", fields.shape().unwrap_or((0, 0)))] {
        if found != shape {
            return Err(DatasetError::ShapeMismatch {
                what: what.into(),
                expected: shape,
                found,
            });
        }
    }
    let bc = rasterize_bc(&spec.scenario.constraints, domain).map(|&c| c as f32);
    let (lx, ly) = rasterize_load(spec, domain);
    let vf = Grid::filled(shape.0, shape.1, spec.vf_target as f32);
    let grids = [
        vf,
        bc,
        to_f32(&lx),
        to_f32(&ly),
        to_f32(&fields.ux),
        to_f32(&fields.uy),
        to_f32(&fields.s11),
        to_f32(&fields.s22),
        to_f32(&fields.s12),
        to_f32(&fields.e11),
        to_f32(&fields.e22),
        to_f32(&fields.e12),
        to_f32(&fields.von_mises),
        to_f32(&fields.strain_energy),
    ];
    let channels = CHANNELS
        .iter()
        .zip(grids)
        .map(|(name, values)| Channel {
            name: name.to_string(),
            values,
        })
        .collect();
    let record = SampleRecord {
        channels,
        target: to_f32(target.values()),
        meta,
    };
    record.validate()?;
    Ok(record)
}

impl SampleRecord {
    pub fn shape(&self) -> (usize, usize) {
        self.target.shape()
    }

    pub fn channel(&self, name: &str) -> Option<&Channel> {
        self.channels.iter().find(|c| c.name == name)
    }

    /// Target as a validated f64 density field.
    pub fn target_density(&self) -> Result<DensityField, DatasetError> {
        Ok(DensityField::new(self.target.map(|&v| v as f64))?)
    }

    /// Checks the record invariants on whichever channels are present:
    /// consistent shapes, unique ASCII names, finite values, a constant `vf`
    /// channel equal to the target volume fraction, BC codes in `{0,1,2,3}`,
    /// nonnegative `svm` and `w`, and a target in `[0, 1]`.
    pub fn validate(&self) -> Result<(), DatasetError> {
        let bad = |m: String| Err(DatasetError::InvalidRecord(m));
        let shape = self.shape();
        let mut seen = std::collections::BTreeSet::new();
        for ch in &self.channels {
            if ch.name.is_empty() || ch.name.len() > 255 || !ch.name.is_ascii() {
                return bad(format!("channel name {:?} is not 1-255 ASCII bytes", ch.name));
            }
            if !seen.insert(ch.name.as_str()) {
                return bad(format!("duplicate channel {}", ch.name));
            }
            if ch.values.shape() != shape {
                return Err(DatasetError::ShapeMismatch {
                    what: ch.name.clone(),
                    expected: shape,
                    found: ch.values.shape(),
                });
            }
            if let Some(v) = ch.values.iter().find(|v| !v.is_finite()) {
                return bad(format!("channel {} holds non-finite value {v}", ch.name));
            }
            let vals = &ch.values;
            match ch.name.as_str() {
                "vf" => {
                    let vf = self.meta.spec.vf_target as f32;
                    if vals.iter().any(|&v| v != vf) {
                        return bad(format!("vf channel is not constant {vf}"));
                    }
                }
                "bc_code" => {
                    if vals.iter().any(|&v| !matches!(v, 0.0 | 1.0 | 2.0 | 3.0)) {
                        return bad("bc_code outside {0,1,2,3}".into());
                    }
                }
                "svm" | "w" => {
                    if vals.iter().any(|&v| v < 0.0) {
                        return bad(format!("channel {} has negative entries", ch.name));
                    }
                }
                _ => {}
            }
        }
        if self.target.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return bad("target outside [0, 1]".into());
        }
        Ok(())
    }

    /// True when all 14 channels are present in the canonical order.
    pub fn is_complete(&self) -> bool {
        self.channels.len() == CHANNELS.len()
            && self.channels.iter().zip(CHANNELS).all(|(c, n)| c.name == n)
    }
}

/// Channel selections of the field ablation. `LP` (load path) is not
/// supported.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FieldCombo {
    Baseline,
    Displacement,
    StrainEnergy,
    VonMises,
    VonMisesStrainEnergy,
    Stress,
    Strain,
    StressStrain,
    DisplacementVonMisesStrainEnergy,
}

impl FieldCombo {
    pub const ALL: [FieldCombo; 9] = [
        FieldCombo::Baseline,
        FieldCombo::Displacement,
        FieldCombo::StrainEnergy,
        FieldCombo::VonMises,
        FieldCombo::VonMisesStrainEnergy,
        FieldCombo::Stress,
        FieldCombo::Strain,
        FieldCombo::StressStrain,
        FieldCombo::DisplacementVonMisesStrainEnergy,
    ];

    pub fn from_id(id: u8) -> Result<Self, DatasetError> {
        Self::ALL
            .get(id as usize)
            .copied()
            .ok_or(DatasetError::UnknownCombo(id))
    }

    pub fn id(self) -> u8 {
        Self::ALL.iter().position(|&c| c == self).expect("listed") as u8
    }

    pub fn label(self) -> &'static str {
        match self {
            FieldCombo::Baseline => "baseline",
            FieldCombo::Displacement => "VF+U",
            FieldCombo::StrainEnergy => "VF+W",
            FieldCombo::VonMises => "VF+svm",
            FieldCombo::VonMisesStrainEnergy => "VF+svm+W",
            FieldCombo::Stress => "VF+s",
            FieldCombo::Strain => "VF+e",
            FieldCombo::StressStrain => "VF+s+e",
            FieldCombo::DisplacementVonMisesStrainEnergy => "VF+U+svm+W",
        }
    }

    /// Field channels appended to the four input channels.
    pub fn field_channels(self) -> &'static [&'static str] {
        match self {
            FieldCombo::Baseline => &[],
            FieldCombo::Displacement => &["ux", "uy"],
            FieldCombo::StrainEnergy => &["w"],
            FieldCombo::VonMises => &["svm"],
            FieldCombo::VonMisesStrainEnergy => &["svm", "w"],
            FieldCombo::Stress => &["s11", "s22", "s12"],
            FieldCombo::Strain => &["e11", "e22", "e12"],
            FieldCombo::StressStrain => &["s11", "s22", "s12", "e11", "e22", "e12"],
            FieldCombo::DisplacementVonMisesStrainEnergy => &["ux", "uy", "svm", "w"],
        }
    }

    /// Full ordered channel list.
    pub fn channels(self) -> Vec<&'static str> {
        INPUT_CHANNELS
            .iter()
            .chain(self.field_channels())
            .copied()
            .collect()
    }
}

/// Ordered channel stack for a combo id.
pub fn select_field_combo(record: &SampleRecord, combo: u8) -> Result<Vec<&Channel>, DatasetError> {
    FieldCombo::from_id(combo)?
        .channels()
        .into_iter()
        .map(|name| {
            record
                .channel(name)
                .ok_or_else(|| DatasetError::MissingChannel(name.to_string()))
        })
        .collect()
}

//! JSON emitter descriptions.
//!
//! ```json
//! [{"omega0": -1.99,
//!   "couplings": [{"cell": [10], "sublattice": "a", "g_re": 0.001, "g_im": 0.0},
//!                 {"cls": {"cell": [20]}, "g_re": 0.001},
//!                 {"envelope": {"ell": 2.0, "center": [30]}, "g_re": 0.001}]}]
//! ```
//!
//! `cls` and `envelope` entries expand to `g × (normalized CLS state)` on
//! every site of their support.

use serde::{Deserialize, Serialize};

use crate::boundstate::EmitterSpec;
use crate::error::{invalid, Error, Result};
use crate::flatband::cls_set;
use crate::giant::{cls_site_state, envelope_state};
use crate::lattice::{LatticeModel, Site, C64};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClsRef {
    pub cell: Vec<i64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvelopeRef {
    pub ell: f64,
    pub center: Vec<i64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CouplingJson {
    Cls {
        cls: ClsRef,
        g_re: f64,
        #[serde(default)]
        g_im: f64,
    },
    Envelope {
        envelope: EnvelopeRef,
        g_re: f64,
        #[serde(default)]
        g_im: f64,
    },
    Site {
        cell: Vec<i64>,
        sublattice: String,
        g_re: f64,
        #[serde(default)]
        g_im: f64,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmitterJson {
    pub omega0: f64,
    pub couplings: Vec<CouplingJson>,
}

pub fn cell_from_vec(model: &LatticeModel, v: &[i64]) -> Result<[i64; 2]> {
    match (model.dim, v) {
        (1, [x]) => Ok([*x, 0]),
        (2, [x, y]) => Ok([*x, *y]),
        _ => invalid(format!("cell {v:?} does not match lattice dimension {}", model.dim)),
    }
}

impl EmitterJson {
    pub fn to_spec(&self, model: &LatticeModel) -> Result<EmitterSpec> {
        let mut couplings = Vec::new();
        for c in &self.couplings {
            match c {
                CouplingJson::Site { cell, sublattice, g_re, g_im } => {
                    let site = Site::new(cell_from_vec(model, cell)?, model.sublattice_index(sublattice)?);
                    couplings.push((site, C64::new(*g_re, *g_im)));
                }
                CouplingJson::Cls { cls, g_re, g_im } => {
                    let set = cls_set(model)?;
                    let state = cls_site_state(model, &set, cell_from_vec(model, &cls.cell)?)?;
                    couplings.extend(state.to_emitter(model, self.omega0, C64::new(*g_re, *g_im)).couplings);
                }
                CouplingJson::Envelope { envelope, g_re, g_im } => {
                    let set = cls_set(model)?;
                    let center = cell_from_vec(model, &envelope.center)?;
                    let state = envelope_state(model, &set, center, envelope.ell)?;
                    couplings.extend(state.to_emitter(model, self.omega0, C64::new(*g_re, *g_im)).couplings);
                }
            }
        }
        let spec = EmitterSpec { omega0: self.omega0, couplings };
        spec.coupling_vector(model)?;
        Ok(spec)
    }
}

pub fn emitters_from_json(model: &LatticeModel, text: &str) -> Result<Vec<EmitterSpec>> {
    let parsed: Vec<EmitterJson> =
        serde_json::from_str(text).map_err(|e| Error::InvalidParameter(format!("emitters JSON: {e}")))?;
    parsed.iter().map(|e| e.to_spec(model)).collect()
}

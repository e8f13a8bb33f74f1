//! Macroscopic readout: the counts-to-field procedure, its infinite-shot
//! limit, difference-mode reconstruction and error metrics.

use serde::{Deserialize, Serialize};

use crate::lattice::{Geometry, MacroField};
use crate::qsim::{QState, ShotHistogram};
use crate::{Error, Result};

/// Amplitudes this far below zero (or off the real axis) count as noise.
const PHASE_TOL: f64 = 1e-12;

/// Field from measurement counts and the recorded 1-norm.
///
/// Each cell gets the amplitude estimate `sqrt(S_i / S)`; the estimates are
/// normalized to sum to one and scaled by `l1`. Unobserved cells get zero.
pub fn macroscopic_from_counts(hist: &ShotHistogram, l1: f64, geometry: Geometry) -> Result<MacroField> {
    if hist.shots == 0 || hist.total() == 0 {
        return Err(Error::ZeroShots);
    }
    if geometry.len() != 1 << hist.n_bits {
        return Err(Error::GeometryMismatch(format!(
            "{}-bit histogram for {geometry:?}",
            hist.n_bits
        )));
    }
    let s = hist.total() as f64;
    let mut amp = vec![0.0; geometry.len()];
    for (&i, &c) in &hist.counts {
        amp[i] = (c as f64 / s).sqrt();
    }
    let s_all: f64 = amp.iter().sum();
    let phi = amp.iter().map(|a| a / s_all * l1).collect();
    MacroField::new(phi, geometry)
}

/// Infinite-shot readout from the `q = 0...0` block of a post-selected state.
pub fn macroscopic_exact(state: &QState, l1: f64, geometry: Geometry) -> Result<MacroField> {
    let block = state.d_block(0);
    if block.len() != geometry.len() {
        return Err(Error::GeometryMismatch(format!(
            "{} amplitudes for {geometry:?}",
            block.len()
        )));
    }
    if let Some((index, a)) = block
        .iter()
        .enumerate()
        .find(|(_, a)| a.re < -PHASE_TOL || a.im.abs() > PHASE_TOL)
    {
        return Err(Error::NonPositiveAmplitude {
            index,
            re: a.re,
            im: a.im,
        });
    }
    let total: f64 = block.iter().map(|a| a.norm()).sum();
    let phi = block.iter().map(|a| l1 * a.norm() / total).collect();
    MacroField::new(phi, geometry)
}

/// Adds the uniform baseline back to a difference field.
pub fn difference_reconstruct(delta: &MacroField, baseline: f64) -> MacroField {
    MacroField {
        phi: delta.phi.iter().map(|d| d + baseline).collect(),
        geometry: delta.geometry,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorMetrics {
    /// `|field - reference|_2 / |reference|_2`
    pub l2: f64,
    /// `max |field - reference|`
    pub linf: f64,
}

pub fn error_metrics(field: &MacroField, reference: &MacroField) -> Result<ErrorMetrics> {
    if field.geometry != reference.geometry {
        return Err(Error::GeometryMismatch(format!(
            "{:?} vs {:?}",
            field.geometry, reference.geometry
        )));
    }
    let (mut diff2, mut linf) = (0.0f64, 0.0f64);
    for (a, b) in field.phi.iter().zip(&reference.phi) {
        let d = (a - b).abs();
        diff2 += d * d;
        linf = linf.max(d);
    }
    let norm = reference.l2_norm();
    let l2 = if norm == 0.0 { diff2.sqrt() } else { diff2.sqrt() / norm };
    Ok(ErrorMetrics { l2, linf })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReadoutMethod {
    Exact,
    Sampled,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReadoutReport {
    pub field: MacroField,
    pub method: ReadoutMethod,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub shots: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub l2_error: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub linf_error: Option<f64>,
    pub postselect_probs: Vec<f64>,
}

impl ReadoutReport {
    pub fn with_reference(mut self, reference: &MacroField) -> Result<Self> {
        let m = error_metrics(&self.field, reference)?;
        self.l2_error = Some(m.l2);
        self.linf_error = Some(m.linf);
        Ok(self)
    }
}

//! JSON experiment descriptions.
//!
//! A configuration either describes the geometry (beam, detector regions and
//! smearing functions) from which the detector scalars are derived, or gives
//! the scalars directly:
//!
//! ```json
//! {
//!   "beam": { "kind": "gaussian", "waist": 1.0, "center": [0.0, 0.0] },
//!   "detectors": [
//!     { "mode": "wave",
//!       "region": { "shape": "disc", "center": [0.0, 0.0], "radius": 1.0 },
//!       "smearing": { "kind": "gaussian", "width": 0.2, "center": [0.0, 0.0] } },
//!     { "mode": "count",
//!       "region": { "shape": "rect", "center": [2.0, 0.0], "half_widths": [0.5, 2.0] } }
//!   ],
//!   "quadrature": { "points": 128 }
//! }
//! ```
//!
//! ```json
//! { "direct": [ { "mode": "wave", "sigma": 1.0, "s": 0.5, "P": 0.0 },
//!               { "mode": "count", "sigma": 1.0, "s": 0.0, "P": 0.4 } ] }
//! ```
//!
//! Unknown keys are rejected everywhere.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{
    count_probability, detector_params, validate_experiment, BeamField, ConstraintReport, DetectorParams,
    DetectorRegion, ExperimentMode, Point, Quadrature, RegionShape, SmearingFunction,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DetectorMode {
    Wave,
    Count,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum BeamSpec {
    Gaussian {
        waist: f64,
        #[serde(default)]
        center: Point,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum SmearingSpec {
    Gaussian {
        width: f64,
        #[serde(default)]
        center: Point,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectorSpec {
    pub mode: DetectorMode,
    pub region: RegionShape,
    /// Required for wave detectors; counting detectors only need a region.
    #[serde(default)]
    pub smearing: Option<SmearingSpec>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuadratureSpec {
    pub half_extent: Option<f64>,
    pub points: Option<usize>,
    pub tolerance: Option<f64>,
}

/// `s` as a real number or as `[re, im]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Overlap {
    Real(f64),
    Complex([f64; 2]),
}

impl Overlap {
    pub fn value(&self) -> Complex64 {
        match *self {
            Overlap::Real(s) => Complex64::new(s, 0.0),
            Overlap::Complex([re, im]) => Complex64::new(re, im),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DirectSpec {
    pub mode: DetectorMode,
    pub sigma: f64,
    pub s: Overlap,
    #[serde(rename = "P")]
    pub p: f64,
}

/// A parsed configuration document.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum ExperimentConfig {
    Geometry {
        beam: BeamSpec,
        detectors: Vec<DetectorSpec>,
        quadrature: QuadratureSpec,
    },
    Direct {
        direct: Vec<DirectSpec>,
    },
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct GeometryDoc {
    beam: BeamSpec,
    detectors: Vec<DetectorSpec>,
    #[serde(default)]
    quadrature: QuadratureSpec,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct DirectDoc {
    direct: Vec<DirectSpec>,
}

impl ExperimentConfig {
    /// Parses a document, reporting schema errors of the matching variant
    /// rather than serde's generic untagged-enum message.
    pub fn from_json(text: &str) -> Result<ExperimentConfig> {
        let value: serde_json::Value =
            serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        let is_direct = value.get("direct").is_some();
        let parsed = if is_direct {
            serde_json::from_value::<DirectDoc>(value).map(|d| ExperimentConfig::Direct { direct: d.direct })
        } else {
            serde_json::from_value::<GeometryDoc>(value).map(|g| ExperimentConfig::Geometry {
                beam: g.beam,
                detectors: g.detectors,
                quadrature: g.quadrature,
            })
        };
        parsed.map_err(|e| Error::Config(e.to_string()))
    }

    pub fn modes(&self) -> Vec<DetectorMode> {
        match self {
            ExperimentConfig::Geometry { detectors, .. } => detectors.iter().map(|d| d.mode).collect(),
            ExperimentConfig::Direct { direct } => direct.iter().map(|d| d.mode).collect(),
        }
    }
}

/// Scalars and feasibility of one configured experiment.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParamsReport {
    pub detectors: Vec<DetectorReport>,
    pub mode: Option<ExperimentMode>,
    pub feasible: bool,
    pub constraints: ConstraintReport,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DetectorReport {
    pub mode: DetectorMode,
    /// `None` for counting detectors configured without smearing.
    pub sigma: Option<f64>,
    pub s: Option<Complex64>,
    #[serde(rename = "P")]
    pub p: f64,
}

/// Experiment kind implied by the detector modes, with the detector order
/// expected by [`validate_experiment`].
fn experiment_mode(modes: &[DetectorMode]) -> Result<Option<(ExperimentMode, Vec<usize>)>> {
    if modes.len() < 2 {
        return Ok(None);
    }
    let waves: Vec<usize> = (0..modes.len()).filter(|&i| modes[i] == DetectorMode::Wave).collect();
    let counts: Vec<usize> = (0..modes.len()).filter(|&i| modes[i] == DetectorMode::Count).collect();
    if counts.is_empty() {
        Ok(Some((ExperimentMode::WaveWave, waves)))
    } else if waves.is_empty() {
        Ok(Some((ExperimentMode::CountCount, counts)))
    } else if waves.len() == 1 && counts.len() == 1 {
        Ok(Some((ExperimentMode::WaveCount, vec![waves[0], counts[0]])))
    } else {
        Err(Error::Config(
            "mixed wave/count experiments need exactly one detector of each mode".into(),
        ))
    }
}

fn quadrature(spec: &QuadratureSpec) -> Result<Quadrature> {
    let d = Quadrature::default();
    let mut q = Quadrature::new(spec.half_extent.unwrap_or(d.half_extent), spec.points.unwrap_or(d.points))?;
    if let Some(t) = spec.tolerance {
        if !(t > 0.0) {
            return Err(Error::Config(format!("quadrature tolerance must be positive, got {t}")));
        }
        q.tolerance = t;
    }
    Ok(q)
}

/// Derives the detector scalars of a configuration and checks feasibility.
pub fn resolve(config: &ExperimentConfig) -> Result<ParamsReport> {
    let modes = config.modes();
    let layout = experiment_mode(&modes)?;
    let detectors: Vec<DetectorReport> = match config {
        ExperimentConfig::Direct { direct } => direct
            .iter()
            .map(|d| {
                let p = DetectorParams::new(d.sigma, d.s.value(), d.p)?;
                Ok(DetectorReport {
                    mode: d.mode,
                    sigma: Some(p.sigma),
                    s: Some(p.s),
                    p: p.p,
                })
            })
            .collect::<Result<_>>()?,
        ExperimentConfig::Geometry {
            beam,
            detectors,
            quadrature: qs,
        } => {
            let BeamSpec::Gaussian { waist, center } = beam;
            let phi = BeamField::gaussian(*center, *waist)?;
            let q = quadrature(qs)?;
            let regions: Vec<DetectorRegion> = detectors
                .iter()
                .enumerate()
                .map(|(i, d)| DetectorRegion::new(i, d.region.clone()))
                .collect::<Result<_>>()?;
            for i in 0..regions.len() {
                for j in (i + 1)..regions.len() {
                    if !regions[i].is_disjoint(&regions[j]) {
                        return Err(Error::Config(format!("detector regions {i} and {j} overlap")));
                    }
                }
            }
            detectors
                .iter()
                .zip(&regions)
                .map(|(d, region)| match &d.smearing {
                    Some(SmearingSpec::Gaussian { width, center }) => {
                        let f = SmearingFunction::gaussian(*center, *width)?;
                        let p = detector_params(&phi, &f, region, &q)?;
                        Ok(DetectorReport {
                            mode: d.mode,
                            sigma: Some(p.sigma),
                            s: Some(p.s),
                            p: p.p,
                        })
                    }
                    None if d.mode == DetectorMode::Count => Ok(DetectorReport {
                        mode: d.mode,
                        sigma: None,
                        s: None,
                        p: count_probability(&phi, region, &q)?,
                    }),
                    None => Err(Error::Config(format!("wave detector {} needs a smearing function", region.id))),
                })
                .collect::<Result<_>>()?
        }
    };

    let (mode, constraints) = match layout {
        None => (None, ConstraintReport::default()),
        Some((mode, order)) => {
            // Counting detectors without smearing only contribute P.
            let params: Vec<DetectorParams> = order
                .iter()
                .map(|&i| {
                    let d = &detectors[i];
                    DetectorParams::new(d.sigma.unwrap_or(1.0), d.s.unwrap_or_default(), d.p)
                })
                .collect::<Result<_>>()?;
            (Some(mode), validate_experiment(&params, mode)?)
        }
    };
    Ok(ParamsReport {
        detectors,
        mode,
        feasible: constraints.is_ok(),
        constraints,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_keys_are_rejected() {
        let text = r#"{ "direct": [ { "mode": "wave", "sigma": 1, "s": 0.5, "P": 0, "extra": 1 } ] }"#;
        assert!(matches!(ExperimentConfig::from_json(text), Err(Error::Config(_))));
        let text = r#"{ "beam": { "kind": "gaussian", "waist": 1 }, "detectors": [], "colour": 3 }"#;
        assert!(matches!(ExperimentConfig::from_json(text), Err(Error::Config(_))));
    }

    #[test]
    fn direct_mode_echoes_inputs() {
        let text = r#"{ "direct": [ { "mode": "wave", "sigma": 2, "s": [0.3, 0.4], "P": 0.1 } ] }"#;
        let report = resolve(&ExperimentConfig::from_json(text).unwrap()).unwrap();
        let d = &report.detectors[0];
        assert_eq!(d.sigma, Some(2.0));
        assert_eq!(d.s, Some(Complex64::new(0.3, 0.4)));
        assert_eq!(d.p, 0.1);
        assert!(report.feasible && report.mode.is_none());
    }

    #[test]
    fn infeasible_wave_count_is_flagged() {
        let text = r#"{ "direct": [ { "mode": "count", "sigma": 1, "s": 0, "P": 0.6 },
                                    { "mode": "wave", "sigma": 1, "s": 0.8, "P": 0 } ] }"#;
        let report = resolve(&ExperimentConfig::from_json(text).unwrap()).unwrap();
        assert_eq!(report.mode, Some(ExperimentMode::WaveCount));
        assert!(!report.feasible);
        assert_eq!(report.constraints.violations[0].constraint, "1 - P - |s|^2 >= 0");
    }

    #[test]
    fn geometry_counting_detector_without_smearing() {
        let text = r#"{ "beam": { "kind": "gaussian", "waist": 1.0 },
                        "detectors": [ { "mode": "count",
                          "region": { "shape": "rect", "center": [3.0, 0.0], "half_widths": [3.0, 6.0] } } ] }"#;
        let report = resolve(&ExperimentConfig::from_json(text).unwrap()).unwrap();
        let d = &report.detectors[0];
        assert!(d.sigma.is_none());
        assert!((d.p - 0.5).abs() < 1e-6);
    }
}

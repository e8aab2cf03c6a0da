use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::GridSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LandmarkClass {
    Endpoint,
    Bifurcation,
    Crossing,
}

impl LandmarkClass {
    pub const ALL: [LandmarkClass; 3] = [
        LandmarkClass::Endpoint,
        LandmarkClass::Bifurcation,
        LandmarkClass::Crossing,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            LandmarkClass::Endpoint => "endpoint",
            LandmarkClass::Bifurcation => "bifurcation",
            LandmarkClass::Crossing => "crossing",
        }
    }

    /// Heatmap channel index.
    pub fn channel(self) -> usize {
        self as usize
    }
}

impl fmt::Display for LandmarkClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for LandmarkClass {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "endpoint" => Ok(LandmarkClass::Endpoint),
            "bifurcation" => Ok(LandmarkClass::Bifurcation),
            "crossing" => Ok(LandmarkClass::Crossing),
            other => Err(Error::Parse(format!("unknown landmark class {other:?}"))),
        }
    }
}

/// A detected vascular keypoint in image coordinates (pixels).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Landmark {
    pub x: f64,
    pub y: f64,
    pub class: LandmarkClass,
    #[serde(default = "full_confidence")]
    pub confidence: f64,
}

fn full_confidence() -> f64 {
    1.0
}

impl Landmark {
    pub fn new(x: f64, y: f64, class: LandmarkClass) -> Self {
        Landmark {
            x,
            y,
            class,
            confidence: 1.0,
        }
    }

    pub fn validate(&self, spec: &GridSpec) -> Result<()> {
        spec.check_inside(self.x, self.y)?;
        if !(0.0..=1.0).contains(&self.confidence) {
            return Err(Error::Domain(format!(
                "landmark confidence {} outside [0, 1]",
                self.confidence
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LandmarkSource {
    Argmax,
    CrossingSecondary,
}

/// A landmark with an orientation attached.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LiftedLandmark {
    #[serde(flatten)]
    pub landmark: Landmark,
    pub theta: f64,
    pub source: LandmarkSource,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub low_confidence: bool,
}

impl LiftedLandmark {
    pub fn new(landmark: Landmark, theta: f64, source: LandmarkSource) -> Self {
        LiftedLandmark {
            landmark,
            theta: crate::grid::wrap_angle(theta),
            source,
            low_confidence: false,
        }
    }

    /// Convenience constructor for a bare lifted point.
    pub fn at(x: f64, y: f64, theta: f64) -> Self {
        Self::new(Landmark::new(x, y, LandmarkClass::Endpoint), theta, LandmarkSource::Argmax)
    }

    pub fn position(&self) -> (f64, f64, f64) {
        (self.landmark.x, self.landmark.y, self.theta)
    }
}

/// Relaxed Reeds-Shepp metric parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricParams {
    /// Anisotropy relaxation; sideways motion costs 1/ε.
    pub epsilon: f64,
    /// Pixels per radian of rotation.
    pub xi: f64,
    /// Cost contrast in C = 1/(1 + λW²).
    #[serde(default = "default_lambda")]
    pub lambda: f64,
}

fn default_lambda() -> f64 {
    1e3
}

impl MetricParams {
    pub fn new(epsilon: f64, xi: f64, lambda: f64) -> Result<Self> {
        let p = MetricParams { epsilon, xi, lambda };
        p.validate()?;
        Ok(p)
    }

    /// ε = 0.1, ξ = N_x/(2π), λ = 10³.
    pub fn defaults_for(spec: &GridSpec) -> Self {
        MetricParams {
            epsilon: 0.1,
            xi: spec.width as f64 * spec.spacing / (2.0 * std::f64::consts::PI),
            lambda: 1e3,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("epsilon", self.epsilon), ("xi", self.xi), ("lambda", self.lambda)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }
}

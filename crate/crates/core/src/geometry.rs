//! Flat model geometries: the Euclidean plane, the cylinder `C^*` with its
//! exponential universal cover, and surfaces assembled from such ends.

use std::f64::consts::{PI, TAU};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A point of the plane (or of the punctured plane).
pub type ComplexPoint = Complex64;

/// The two flat model metrics.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Euclidean,
    Cylindrical,
}

pub fn euclidean_distance(p: ComplexPoint, q: ComplexPoint) -> f64 {
    (p - q).norm()
}

fn require_nonzero(p: ComplexPoint, what: &str) -> Result<()> {
    if p.re == 0.0 && p.im == 0.0 {
        return Err(Error::Domain(format!("{what}: the origin is not a point of the punctured plane")));
    }
    if !p.re.is_finite() || !p.im.is_finite() {
        return Err(Error::Domain(format!("{what}: non-finite point {p}")));
    }
    Ok(())
}

/// Geodesic distance of `|dz|^2/|z|^2`: the shortest Euclidean distance
/// between logarithm lifts over the deck translates `k` in `{-1, 0, 1}`.
pub fn cylindrical_distance(p: ComplexPoint, q: ComplexPoint) -> Result<f64> {
    require_nonzero(p, "cylindrical_distance")?;
    require_nonzero(q, "cylindrical_distance")?;
    let lp = lift(p, -PI)?;
    let lq = lift(q, -PI)?;
    let best = (-1..=1)
        .map(|k| (lp - lq - Complex64::new(0.0, TAU * k as f64)).norm())
        .fold(f64::INFINITY, f64::min);
    Ok(best)
}

/// The universal covering map `z -> e^z`.
pub fn cover_map(z: ComplexPoint) -> ComplexPoint {
    z.exp()
}

/// The logarithm of `zeta` whose imaginary part lies in `[strip_base, strip_base + 2 pi)`.
pub fn lift(zeta: ComplexPoint, strip_base: f64) -> Result<ComplexPoint> {
    require_nonzero(zeta, "lift")?;
    Ok(Complex64::new(zeta.norm().ln(), reduce_angle(zeta.arg(), strip_base)))
}

/// Reduce `theta` modulo `2 pi` into `[base, base + 2 pi)`.
pub fn reduce_angle(theta: f64, base: f64) -> f64 {
    let mut t = (theta - base).rem_euclid(TAU);
    if t >= TAU {
        t -= TAU;
    }
    base + t
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EndKind {
    Euclidean,
    Cylindrical,
}

/// One asymptotically flat end, described through its chart.
///
/// `scale` is the constant multiple of the model metric; coordinates are
/// multiplied by `sqrt(scale)` before any kernel is evaluated so that the
/// end carries the unit model metric.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EndDescriptor {
    pub kind: EndKind,
    pub scale: f64,
    pub chart_inner_radius: f64,
}

impl EndDescriptor {
    pub fn new(kind: EndKind, scale: f64, chart_inner_radius: f64) -> Result<Self> {
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(Error::Argument(format!("end scale must be positive, got {scale}")));
        }
        if !(chart_inner_radius > 0.0 && chart_inner_radius.is_finite()) {
            return Err(Error::Argument(format!(
                "chart inner radius must be positive, got {chart_inner_radius}"
            )));
        }
        Ok(Self {
            kind,
            scale,
            chart_inner_radius,
        })
    }

    /// Factor applied to chart (or cover) coordinates.
    pub fn length_factor(&self) -> f64 {
        self.scale.sqrt()
    }

    pub fn metric(&self) -> Metric {
        match self.kind {
            EndKind::Euclidean => Metric::Euclidean,
            EndKind::Cylindrical => Metric::Cylindrical,
        }
    }
}

/// A surface known only through its ends; the compact core is a label.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SurfaceModel {
    ends: Vec<EndDescriptor>,
    pub core_label: String,
}

impl SurfaceModel {
    pub fn new(ends: Vec<EndDescriptor>, core_label: impl Into<String>) -> Result<Self> {
        if ends.is_empty() {
            return Err(Error::Argument("a surface model needs at least one end".into()));
        }
        Ok(Self {
            ends,
            core_label: core_label.into(),
        })
    }

    pub fn ends(&self) -> &[EndDescriptor] {
        &self.ends
    }
}

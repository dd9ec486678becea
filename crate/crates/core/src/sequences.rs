//! Finite point configurations: generators, separation radii, lifting to
//! the cylinder's cover, perturbation and annulus restriction.

use std::collections::HashSet;
use std::f64::consts::TAU;
use std::fmt;
use std::io::{BufRead, Write};

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::geometry::{cylindrical_distance, lift, ComplexPoint, Metric};

/// Where the points of a sequence live.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Ambient {
    Plane,
    PuncturedPlane,
    SurfaceEnd(usize),
}

impl fmt::Display for Ambient {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Ambient::Plane => write!(f, "plane"),
            Ambient::PuncturedPlane => write!(f, "punctured_plane"),
            Ambient::SurfaceEnd(i) => write!(f, "end {i}"),
        }
    }
}

/// Closed axis-aligned rectangle `[x0, x1] x [y0, y1]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Rect {
    pub x0: f64,
    pub x1: f64,
    pub y0: f64,
    pub y1: f64,
}

impl Rect {
    pub fn new(x0: f64, x1: f64, y0: f64, y1: f64) -> Result<Self> {
        let r = Self { x0, x1, y0, y1 };
        if !(x0.is_finite() && x1.is_finite() && y0.is_finite() && y1.is_finite()) || x0 > x1 || y0 > y1 {
            return Err(Error::Argument(format!("empty or non-finite window {r:?}")));
        }
        Ok(r)
    }

    /// Square `[-h, h]^2`.
    pub fn centered(half: f64) -> Result<Self> {
        Self::new(-half, half, -half, half)
    }

    pub fn contains(&self, z: ComplexPoint) -> bool {
        z.re >= self.x0 && z.re <= self.x1 && z.im >= self.y0 && z.im <= self.y1
    }

    /// True when the closed disk `D_r(z)` lies inside the rectangle.
    pub fn contains_disk(&self, z: ComplexPoint, r: f64) -> bool {
        z.re - r >= self.x0 && z.re + r <= self.x1 && z.im - r >= self.y0 && z.im + r <= self.y1
    }

    pub fn scaled(&self, k: f64) -> Rect {
        Rect {
            x0: self.x0 * k,
            x1: self.x1 * k,
            y0: self.y0 * k,
            y1: self.y1 * k,
        }
    }
}

/// A finite configuration of pairwise distinct points.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PointSequence {
    points: Vec<ComplexPoint>,
    ambient: Ambient,
}

fn key(z: ComplexPoint) -> (u64, u64) {
    // +0.0 folds -0.0 onto 0.0
    ((z.re + 0.0).to_bits(), (z.im + 0.0).to_bits())
}

impl PointSequence {
    pub fn new(points: Vec<ComplexPoint>, ambient: Ambient) -> Result<Self> {
        let mut seen = HashSet::with_capacity(points.len());
        for (i, p) in points.iter().enumerate() {
            if !p.re.is_finite() || !p.im.is_finite() {
                return Err(Error::Argument(format!("point {i} is not finite: {p}")));
            }
            if ambient == Ambient::PuncturedPlane && p.re == 0.0 && p.im == 0.0 {
                return Err(Error::Domain(format!("point {i} is the origin of the punctured plane")));
            }
            if !seen.insert(key(*p)) {
                return Err(Error::Argument(format!("duplicate point {p} (index {i})")));
            }
        }
        Ok(Self { points, ambient })
    }

    pub fn empty(ambient: Ambient) -> Self {
        Self {
            points: Vec::new(),
            ambient,
        }
    }

    pub fn points(&self) -> &[ComplexPoint] {
        &self.points
    }

    pub fn ambient(&self) -> Ambient {
        self.ambient
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn contains(&self, z: ComplexPoint) -> bool {
        self.points.contains(&z)
    }

    /// Same points, different ambient tag.
    pub fn with_ambient(mut self, ambient: Ambient) -> Result<Self> {
        if ambient == Ambient::PuncturedPlane && self.points.iter().any(|p| p.re == 0.0 && p.im == 0.0) {
            return Err(Error::Domain("sequence contains the origin".into()));
        }
        self.ambient = ambient;
        Ok(self)
    }

    pub fn union(&self, other: &PointSequence) -> Result<Self> {
        let mut pts = self.points.clone();
        pts.extend_from_slice(&other.points);
        Self::new(pts, self.ambient)
    }

    pub fn with_point(&self, z: ComplexPoint) -> Result<Self> {
        let mut pts = self.points.clone();
        pts.push(z);
        Self::new(pts, self.ambient)
    }

    pub fn map<F: Fn(ComplexPoint) -> ComplexPoint>(&self, f: F) -> Result<Self> {
        Self::new(self.points.iter().map(|&p| f(p)).collect(), self.ambient)
    }

    pub fn filter<F: Fn(ComplexPoint) -> bool>(&self, f: F) -> Self {
        Self {
            points: self.points.iter().copied().filter(|&p| f(p)).collect(),
            ambient: self.ambient,
        }
    }

    /// Text form: `ambient <tag>` header then one `re im` pair per line.
    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "ambient {}", self.ambient)?;
        for p in &self.points {
            writeln!(w, "{} {}", p.re, p.im)?;
        }
        Ok(())
    }

    pub fn read_from<R: BufRead>(r: R) -> Result<Self> {
        let mut ambient = None;
        let mut points = Vec::new();
        for (n, line) in r.lines().enumerate() {
            let line = line?;
            let lineno = n + 1;
            let t = line.trim();
            if t.is_empty() || t.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = t.split_whitespace().collect();
            if ambient.is_none() {
                ambient = Some(parse_ambient(&fields).ok_or_else(|| Error::Parse {
                    line: lineno,
                    detail: format!("expected `ambient plane|punctured_plane|end <i>`, got `{t}`"),
                })?);
                continue;
            }
            let parse = |s: &str| {
                s.parse::<f64>().map_err(|e| Error::Parse {
                    line: lineno,
                    detail: format!("bad coordinate `{s}`: {e}"),
                })
            };
            if fields.len() != 2 {
                return Err(Error::Parse {
                    line: lineno,
                    detail: format!("expected two coordinates, got `{t}`"),
                });
            }
            points.push(Complex64::new(parse(fields[0])?, parse(fields[1])?));
        }
        let ambient = ambient.ok_or_else(|| Error::Parse {
            line: 1,
            detail: "missing ambient header".into(),
        })?;
        Self::new(points, ambient)
    }
}

fn parse_ambient(fields: &[&str]) -> Option<Ambient> {
    match fields {
        ["ambient", "plane"] => Some(Ambient::Plane),
        ["ambient", "punctured_plane"] => Some(Ambient::PuncturedPlane),
        ["ambient", "end", i] => i.parse().ok().map(Ambient::SurfaceEnd),
        _ => None,
    }
}

fn index_range(lo: f64, hi: f64, step: f64) -> std::ops::RangeInclusive<i64> {
    let a = (lo / step - 1e-9).ceil() as i64;
    let b = (hi / step + 1e-9).floor() as i64;
    a..=b
}

/// `s (Z + iZ)` intersected with the window.
pub fn lattice(s: f64, window: Rect) -> Result<PointSequence> {
    rect_lattice(s, s, window)
}

/// `sx Z + i sy Z` intersected with the window.
pub fn rect_lattice(sx: f64, sy: f64, window: Rect) -> Result<PointSequence> {
    if !(sx > 0.0 && sy > 0.0) {
        return Err(Error::Argument(format!("lattice spacings must be positive, got {sx}, {sy}")));
    }
    let window = Rect::new(window.x0, window.x1, window.y0, window.y1)?;
    let mut pts = Vec::new();
    for n in index_range(window.y0, window.y1, sy) {
        for m in index_range(window.x0, window.x1, sx) {
            pts.push(Complex64::new(sx * m as f64, sy * n as f64));
        }
    }
    PointSequence::new(pts, Ambient::Plane)
}

/// Points `exp(a m + 2 pi i n / k)` of the punctured plane with `a m` in
/// `[re_lo, re_hi]`; the full preimage under `exp` is the rectangular lattice
/// `a Z + i (2 pi / k) Z`.
pub fn exp_lattice(a: f64, k: usize, re_lo: f64, re_hi: f64) -> Result<PointSequence> {
    if !(a > 0.0) || k == 0 {
        return Err(Error::Argument(format!("exp_lattice needs a > 0 and k >= 1, got {a}, {k}")));
    }
    if re_lo > re_hi {
        return Err(Error::Argument("exp_lattice: empty real range".into()));
    }
    let b = TAU / k as f64;
    let mut pts = Vec::new();
    for m in index_range(re_lo, re_hi, a) {
        for n in 0..k {
            pts.push(Complex64::new(a * m as f64, b * n as f64).exp());
        }
    }
    PointSequence::new(pts, Ambient::PuncturedPlane)
}

/// Half the smallest pairwise distance, with the pair attaining it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeparationReport {
    pub radius: f64,
    pub witness_pair: Option<(usize, usize)>,
}

pub fn separation_radius(gamma: &PointSequence, metric: Metric) -> Result<SeparationReport> {
    separation_radius_with(gamma, metric, Exec::default())
}

pub fn separation_radius_with(gamma: &PointSequence, metric: Metric, exec: Exec) -> Result<SeparationReport> {
    if metric == Metric::Cylindrical && gamma.ambient == Ambient::Plane {
        return Err(Error::Argument(
            "cylindrical separation requested for a sequence on the plane".into(),
        ));
    }
    let pts = &gamma.points;
    let rows = exec.map_range(pts.len(), |i| -> Result<(f64, usize)> {
        let mut best = (f64::INFINITY, usize::MAX);
        for j in i + 1..pts.len() {
            let d = match metric {
                Metric::Euclidean => (pts[i] - pts[j]).norm(),
                Metric::Cylindrical => cylindrical_distance(pts[i], pts[j])?,
            };
            if d < best.0 {
                best = (d, j);
            }
        }
        Ok(best)
    });
    let mut best = (f64::INFINITY, None);
    for (i, row) in rows.into_iter().enumerate() {
        let (d, j) = row?;
        if d < best.0 {
            best = (d, Some((i, j)));
        }
    }
    Ok(SeparationReport {
        radius: best.0 / 2.0,
        witness_pair: best.1,
    })
}

/// Every preimage under `exp` of every point of `gamma` that lands in the window.
pub fn lift_sequence(gamma: &PointSequence, window: Rect) -> Result<PointSequence> {
    if gamma.ambient == Ambient::Plane {
        return Err(Error::Argument("lift_sequence expects a sequence of the punctured plane".into()));
    }
    let mut out = Vec::new();
    for &p in &gamma.points {
        let z0 = lift(p, window.y0)?;
        if z0.re < window.x0 || z0.re > window.x1 {
            continue;
        }
        let mut k = 0;
        loop {
            let y = z0.im + TAU * k as f64;
            if y > window.y1 {
                break;
            }
            out.push(Complex64::new(z0.re, y));
            k += 1;
        }
    }
    PointSequence::new(out, Ambient::Plane)
}

/// Shift point `i` by `offsets[i]`; every offset must have modulus at most `bound`.
pub fn perturb(gamma: &PointSequence, offsets: &[ComplexPoint], bound: f64) -> Result<PointSequence> {
    if offsets.len() != gamma.len() {
        return Err(Error::Argument(format!(
            "perturb: {} offsets for {} points",
            offsets.len(),
            gamma.len()
        )));
    }
    if let Some((i, o)) = offsets.iter().enumerate().find(|(_, o)| o.norm() > bound) {
        return Err(Error::Argument(format!(
            "perturb: offset {i} has modulus {} above the bound {bound}",
            o.norm()
        )));
    }
    PointSequence::new(
        gamma.points.iter().zip(offsets).map(|(p, o)| p + o).collect(),
        gamma.ambient,
    )
}

/// Uniform random offsets in the closed disk of radius `bound`.
pub fn random_offsets<R: Rng>(rng: &mut R, n: usize, bound: f64) -> Vec<ComplexPoint> {
    (0..n)
        .map(|_| {
            let rho = bound * rng.gen::<f64>().sqrt();
            let theta = TAU * rng.gen::<f64>();
            Complex64::from_polar(rho, theta)
        })
        .collect()
}

/// Points with `1 < |gamma - z| < r`.
pub fn restrict_to_annulus(gamma: &PointSequence, z: ComplexPoint, r: f64) -> Result<PointSequence> {
    if !(r > 1.0) {
        return Err(Error::Argument(format!("annulus outer radius must exceed 1, got {r}")));
    }
    Ok(gamma.filter(|p| {
        let d = (p - z).norm();
        d > 1.0 && d < r
    }))
}

//! Weights `phi` with pointwise Laplacian densities, logarithmic averages and
//! covered means.
//!
//! Laplacian densities are `i d dbar phi` measured against the Euclidean area
//! form `(i/2) dz ^ dzbar`, so `|z|^2` has density 2 everywhere.

use std::f64::consts::PI;
use std::io::Read;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{cover_map, lift, ComplexPoint, Metric};
use crate::quadrature::{disk_log_kernel, DEFAULT_TOLERANCE};
use crate::sequences::Rect;

/// Anything that can be evaluated and has a pointwise Laplacian density.
pub trait Weight: Sync {
    fn value(&self, z: ComplexPoint) -> Result<f64>;

    fn laplacian_density(&self, z: ComplexPoint) -> Result<f64>;

    /// `Some(c)` when the density is the constant `c` everywhere on the domain.
    fn constant_laplacian(&self) -> Option<f64> {
        None
    }

    /// Fails unless the closed disk `D_r(z)` lies in the domain.
    fn check_disk(&self, _z: ComplexPoint, _r: f64) -> Result<()> {
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightDomain {
    Plane,
    PuncturedPlane,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightKind {
    /// `a |z|^2`
    Quadratic { a: f64 },
    /// `a (log |z|)^2`
    LogSquared { a: f64 },
    /// `sum_k c_k |z|^{2k}`
    RadialPoly { coeffs: Vec<f64> },
    GridSampled(GridWeight),
    /// `base(z) + eps |z - center|^2`
    Bumped {
        base: Box<WeightModel>,
        center: [f64; 2],
        eps: f64,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightModel {
    kind: WeightKind,
    domain: WeightDomain,
}

impl WeightModel {
    pub fn quadratic(a: f64) -> Self {
        Self {
            kind: WeightKind::Quadratic { a },
            domain: WeightDomain::Plane,
        }
    }

    pub fn log_squared(a: f64) -> Self {
        Self {
            kind: WeightKind::LogSquared { a },
            domain: WeightDomain::PuncturedPlane,
        }
    }

    pub fn radial_poly(coeffs: Vec<f64>) -> Self {
        Self {
            kind: WeightKind::RadialPoly { coeffs },
            domain: WeightDomain::Plane,
        }
    }

    /// Constant weight `c`.
    pub fn constant(c: f64) -> Self {
        Self::radial_poly(vec![c])
    }

    pub fn grid(grid: GridWeight, domain: WeightDomain) -> Self {
        Self {
            kind: WeightKind::GridSampled(grid),
            domain,
        }
    }

    pub fn bumped(base: WeightModel, center: ComplexPoint, eps: f64) -> Result<Self> {
        if !(eps >= 0.0 && eps.is_finite()) {
            return Err(Error::Argument(format!("bump strength must be nonnegative, got {eps}")));
        }
        let domain = base.domain;
        Ok(Self {
            kind: WeightKind::Bumped {
                base: Box::new(base),
                center: [center.re, center.im],
                eps,
            },
            domain,
        })
    }

    pub fn kind(&self) -> &WeightKind {
        &self.kind
    }

    pub fn domain(&self) -> WeightDomain {
        self.domain
    }

    fn check_point(&self, z: ComplexPoint) -> Result<()> {
        if !z.re.is_finite() || !z.im.is_finite() {
            return Err(Error::Domain(format!("non-finite point {z}")));
        }
        if self.domain == WeightDomain::PuncturedPlane && z.re == 0.0 && z.im == 0.0 {
            return Err(Error::Domain("weight on the punctured plane evaluated at the origin".into()));
        }
        Ok(())
    }

    /// Constant Laplacian density of the pullback under `exp`, when there is one.
    pub fn constant_cover_laplacian(&self) -> Option<f64> {
        match &self.kind {
            WeightKind::LogSquared { a } => Some(*a),
            WeightKind::Quadratic { a } if *a == 0.0 => Some(0.0),
            WeightKind::RadialPoly { coeffs } if coeffs.iter().skip(1).all(|c| *c == 0.0) => Some(0.0),
            _ => None,
        }
    }
}

impl Weight for WeightModel {
    fn value(&self, z: ComplexPoint) -> Result<f64> {
        self.check_point(z)?;
        Ok(match &self.kind {
            WeightKind::Quadratic { a } => a * z.norm_sqr(),
            WeightKind::LogSquared { a } => {
                let l = z.norm().ln();
                a * l * l
            }
            WeightKind::RadialPoly { coeffs } => {
                let s = z.norm_sqr();
                coeffs.iter().rev().fold(0.0, |acc, c| acc * s + c)
            }
            WeightKind::GridSampled(g) => g.value(z)?,
            WeightKind::Bumped { base, center, eps } => {
                base.value(z)? + eps * (z - Complex64::new(center[0], center[1])).norm_sqr()
            }
        })
    }

    fn laplacian_density(&self, z: ComplexPoint) -> Result<f64> {
        self.check_point(z)?;
        Ok(match &self.kind {
            WeightKind::Quadratic { a } => 2.0 * a,
            WeightKind::LogSquared { a } => a / z.norm_sqr(),
            WeightKind::RadialPoly { coeffs } => {
                // i d dbar |z|^{2k} = 2 k^2 |z|^{2(k-1)} (i/2) dz ^ dzbar
                let s = z.norm_sqr();
                coeffs
                    .iter()
                    .enumerate()
                    .skip(1)
                    .rev()
                    .fold(0.0, |acc, (k, c)| acc * s + 2.0 * (k * k) as f64 * c)
            }
            WeightKind::GridSampled(g) => g.laplacian_density(z)?,
            WeightKind::Bumped { base, eps, .. } => base.laplacian_density(z)? + 2.0 * eps,
        })
    }

    fn constant_laplacian(&self) -> Option<f64> {
        match &self.kind {
            WeightKind::Quadratic { a } => Some(2.0 * a),
            WeightKind::RadialPoly { coeffs } if coeffs.len() <= 2 => Some(2.0 * coeffs.get(1).copied().unwrap_or(0.0)),
            WeightKind::Bumped { base, eps, .. } => base.constant_laplacian().map(|c| c + 2.0 * eps),
            _ => None,
        }
    }

    fn check_disk(&self, z: ComplexPoint, r: f64) -> Result<()> {
        if self.domain == WeightDomain::PuncturedPlane && z.norm() <= r {
            return Err(Error::Domain(format!("disk D_{r}({z}) contains the puncture")));
        }
        match &self.kind {
            WeightKind::GridSampled(g) => g.check_disk(z, r),
            WeightKind::Bumped { base, .. } => base.check_disk(z, r),
            _ => Ok(()),
        }
    }
}

/// Weight sampled on a uniform grid, evaluated by bicubic (Catmull-Rom)
/// interpolation. Its Laplacian is the five-point stencil on the grid,
/// interpolated the same way.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridWeight {
    pub x0: f64,
    pub y0: f64,
    pub nx: usize,
    pub ny: usize,
    pub h: f64,
    /// Row-major: `values[j * nx + i]` sits at `(x0 + i h, y0 + j h)`.
    pub values: Vec<f64>,
    /// Largest accepted truncation-error estimate of the five-point Laplacian.
    pub laplacian_tolerance: f64,
}

fn catmull_rom(t: f64) -> [f64; 4] {
    let t2 = t * t;
    let t3 = t2 * t;
    [
        0.5 * (-t3 + 2.0 * t2 - t),
        0.5 * (3.0 * t3 - 5.0 * t2 + 2.0),
        0.5 * (-3.0 * t3 + 4.0 * t2 + t),
        0.5 * (t3 - t2),
    ]
}

impl GridWeight {
    pub fn new(x0: f64, y0: f64, nx: usize, ny: usize, h: f64, values: Vec<f64>) -> Result<Self> {
        if nx < 6 || ny < 6 {
            return Err(Error::Argument(format!("grid must be at least 6x6, got {nx}x{ny}")));
        }
        if !(h > 0.0) {
            return Err(Error::Argument(format!("grid spacing must be positive, got {h}")));
        }
        if values.len() != nx * ny {
            return Err(Error::Argument(format!(
                "grid expects {} values, got {}",
                nx * ny,
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Argument("grid contains non-finite values".into()));
        }
        Ok(Self {
            x0,
            y0,
            nx,
            ny,
            h,
            values,
            laplacian_tolerance: 1e-4,
        })
    }

    /// Sample `f` on the grid.
    pub fn sample<F: Fn(ComplexPoint) -> f64>(x0: f64, y0: f64, nx: usize, ny: usize, h: f64, f: F) -> Result<Self> {
        let mut values = Vec::with_capacity(nx * ny);
        for j in 0..ny {
            for i in 0..nx {
                values.push(f(Complex64::new(x0 + h * i as f64, y0 + h * j as f64)));
            }
        }
        Self::new(x0, y0, nx, ny, h, values)
    }

    /// Whitespace-separated text: `x0 y0 nx ny h` then `nx * ny` row-major values.
    /// `#` starts a comment.
    pub fn read_from<R: Read>(mut r: R) -> Result<Self> {
        let mut text = String::new();
        r.read_to_string(&mut text)?;
        let mut tokens = Vec::new();
        for (n, line) in text.lines().enumerate() {
            let body = line.split('#').next().unwrap_or("");
            tokens.extend(body.split_whitespace().map(|t| (n + 1, t)));
        }
        if tokens.len() < 5 {
            return Err(Error::Parse {
                line: tokens.last().map_or(1, |t| t.0),
                detail: "grid header `x0 y0 nx ny h` is incomplete".into(),
            });
        }
        let real = |(line, t): (usize, &str)| {
            t.parse::<f64>().map_err(|e| Error::Parse {
                line,
                detail: format!("bad number `{t}`: {e}"),
            })
        };
        let count = |(line, t): (usize, &str)| {
            t.parse::<usize>().map_err(|e| Error::Parse {
                line,
                detail: format!("bad grid size `{t}`: {e}"),
            })
        };
        let x0 = real(tokens[0])?;
        let y0 = real(tokens[1])?;
        let nx = count(tokens[2])?;
        let ny = count(tokens[3])?;
        let h = real(tokens[4])?;
        let values = tokens[5..].iter().map(|&t| real(t)).collect::<Result<Vec<_>>>()?;
        Self::new(x0, y0, nx, ny, h, values)
    }

    pub fn extent(&self) -> Rect {
        Rect {
            x0: self.x0,
            x1: self.x0 + self.h * (self.nx - 1) as f64,
            y0: self.y0,
            y1: self.y0 + self.h * (self.ny - 1) as f64,
        }
    }

    fn at(&self, i: usize, j: usize) -> f64 {
        self.values[j * self.nx + i]
    }

    /// Cell index and offset, requiring `margin` extra nodes beyond the 4x4 stencil.
    fn locate(&self, z: ComplexPoint, margin: usize) -> Result<(usize, usize, f64, f64)> {
        let u = (z.re - self.x0) / self.h;
        let v = (z.im - self.y0) / self.h;
        let lo = (1 + margin) as f64;
        let hi_x = (self.nx - 2 - margin) as f64;
        let hi_y = (self.ny - 2 - margin) as f64;
        if !(u >= lo && u <= hi_x - 1.0 + 1e-12 && v >= lo && v <= hi_y - 1.0 + 1e-12) {
            return Err(Error::Domain(format!("point {z} too close to the edge of the weight grid")));
        }
        let i = (u.floor() as usize).min(self.nx - 3 - margin);
        let j = (v.floor() as usize).min(self.ny - 3 - margin);
        Ok((i, j, u - i as f64, v - j as f64))
    }

    fn bicubic<F: Fn(usize, usize) -> f64>(i: usize, j: usize, tx: f64, ty: f64, f: F) -> f64 {
        let wx = catmull_rom(tx);
        let wy = catmull_rom(ty);
        let mut acc = 0.0;
        for (b, wyb) in wy.iter().enumerate() {
            let row: f64 = wx.iter().enumerate().map(|(a, wxa)| wxa * f(i + a - 1, j + b - 1)).sum();
            acc += wyb * row;
        }
        acc
    }

    pub fn value(&self, z: ComplexPoint) -> Result<f64> {
        let (i, j, tx, ty) = self.locate(z, 0)?;
        Ok(Self::bicubic(i, j, tx, ty, |a, b| self.at(a, b)))
    }

    fn node_laplacian(&self, i: usize, j: usize) -> f64 {
        let c = self.at(i, j);
        (self.at(i + 1, j) + self.at(i - 1, j) + self.at(i, j + 1) + self.at(i, j - 1) - 4.0 * c)
            / (self.h * self.h)
    }

    pub fn laplacian_density(&self, z: ComplexPoint) -> Result<f64> {
        let (i, j, tx, ty) = self.locate(z, 1)?;
        // O(h^2) truncation estimate from fourth differences at the nearest node
        let ni = if tx < 0.5 { i } else { i + 1 };
        let nj = if ty < 0.5 { j } else { j + 1 };
        let d4x = self.at(ni + 2, nj) - 4.0 * self.at(ni + 1, nj) + 6.0 * self.at(ni, nj)
            - 4.0 * self.at(ni - 1, nj)
            + self.at(ni - 2, nj);
        let d4y = self.at(ni, nj + 2) - 4.0 * self.at(ni, nj + 1) + 6.0 * self.at(ni, nj)
            - 4.0 * self.at(ni, nj - 1)
            + self.at(ni, nj - 2);
        let err = (d4x.abs() + d4y.abs()) / (24.0 * self.h * self.h);
        if err > self.laplacian_tolerance {
            return Err(Error::numeric(
                "laplacian_density",
                format!(
                    "grid spacing {} too coarse at {z}: estimated error {err:.3e} exceeds {:.1e}",
                    self.h, self.laplacian_tolerance
                ),
            ));
        }
        // standard Laplacian / 2 is the density against (i/2) dz ^ dzbar
        Ok(0.5 * Self::bicubic(i, j, tx, ty, |a, b| self.node_laplacian(a, b)))
    }

    pub fn check_disk(&self, z: ComplexPoint, r: f64) -> Result<()> {
        let e = self.extent();
        let inner = Rect {
            x0: e.x0 + 3.0 * self.h,
            x1: e.x1 - 3.0 * self.h,
            y0: e.y0 + 3.0 * self.h,
            y1: e.y1 - 3.0 * self.h,
        };
        if inner.contains_disk(z, r) {
            Ok(())
        } else {
            Err(Error::Domain(format!("disk D_{r}({z}) leaves the weight grid")))
        }
    }
}

/// Pullback of a punctured-plane weight through `z -> e^z`.
pub struct CoverPullback<'a> {
    base: &'a WeightModel,
}

impl<'a> CoverPullback<'a> {
    pub fn new(base: &'a WeightModel) -> Result<Self> {
        if base.domain() != WeightDomain::PuncturedPlane {
            return Err(Error::Argument("cover pullback needs a weight on the punctured plane".into()));
        }
        Ok(Self { base })
    }
}

impl Weight for CoverPullback<'_> {
    fn value(&self, z: ComplexPoint) -> Result<f64> {
        match self.base.kind() {
            // exact on the cover, avoids log(exp(x)) round trips
            WeightKind::LogSquared { a } => Ok(a * z.re * z.re),
            _ => self.base.value(cover_map(z)),
        }
    }

    fn laplacian_density(&self, z: ComplexPoint) -> Result<f64> {
        match self.base.constant_cover_laplacian() {
            Some(c) => Ok(c),
            None => {
                let w = cover_map(z);
                Ok(self.base.laplacian_density(w)? * w.norm_sqr())
            }
        }
    }

    fn constant_laplacian(&self) -> Option<f64> {
        self.base.constant_cover_laplacian()
    }

    fn check_disk(&self, z: ComplexPoint, r: f64) -> Result<()> {
        if let WeightKind::GridSampled(g) = self.base.kind() {
            // the image of D_r(z) sits inside the disk of radius e^{Re z + r}
            let outer = (z.re + r).exp();
            let e = g.extent();
            if !(e.x0 + 3.0 * g.h <= -outer
                && e.x1 - 3.0 * g.h >= outer
                && e.y0 + 3.0 * g.h <= -outer
                && e.y1 - 3.0 * g.h >= outer)
            {
                return Err(Error::Domain(format!("exp(D_{r}({z})) leaves the weight grid")));
            }
        }
        Ok(())
    }
}

/// `phi(z / k)`: the weight seen in coordinates multiplied by `k`.
pub struct Scaled<'a> {
    base: &'a dyn Weight,
    k: f64,
}

impl<'a> Scaled<'a> {
    pub fn new(base: &'a dyn Weight, k: f64) -> Self {
        Self { base, k }
    }
}

impl Weight for Scaled<'_> {
    fn value(&self, z: ComplexPoint) -> Result<f64> {
        self.base.value(z / self.k)
    }

    fn laplacian_density(&self, z: ComplexPoint) -> Result<f64> {
        Ok(self.base.laplacian_density(z / self.k)? / (self.k * self.k))
    }

    fn constant_laplacian(&self) -> Option<f64> {
        self.base.constant_laplacian().map(|c| c / (self.k * self.k))
    }

    fn check_disk(&self, z: ComplexPoint, r: f64) -> Result<()> {
        self.base.check_disk(z / self.k, r / self.k)
    }
}

pub fn evaluate(w: &dyn Weight, z: ComplexPoint) -> Result<f64> {
    w.value(z)
}

pub fn laplacian_density(w: &dyn Weight, z: ComplexPoint) -> Result<f64> {
    w.laplacian_density(z)
}

/// `int_{D_r(z)} log(r^2/|zeta-z|^2) Delta phi`, by polar quadrature.
pub fn kernel_laplacian_mass(w: &dyn Weight, z: ComplexPoint, r: f64) -> Result<f64> {
    w.check_disk(z, r)?;
    disk_log_kernel("kernel_laplacian_mass", z, r, DEFAULT_TOLERANCE, &|zeta| {
        w.laplacian_density(zeta).unwrap_or(f64::NAN)
    })
}

/// Logarithmic average `phi_r(z)`.
pub fn log_average(w: &dyn Weight, z: ComplexPoint, r: f64) -> Result<f64> {
    w.check_disk(z, r)?;
    let v = disk_log_kernel("log_average", z, r, DEFAULT_TOLERANCE, &|zeta| {
        w.value(zeta).unwrap_or(f64::NAN)
    })?;
    Ok(v / (PI * r * r))
}

/// Covered mean `mu(phi)_r(zeta)`: the logarithmic average of the pullback
/// at the lift of `zeta` in the symmetric strip.
pub fn covered_mean(w: &WeightModel, zeta: ComplexPoint, r: f64) -> Result<f64> {
    let pulled = CoverPullback::new(w)?;
    let z = lift(zeta, -PI)?;
    log_average(&pulled, z, r)
}

/// Sampling region for curvature bounds.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Region {
    Rect(Rect),
    Annulus { center: [f64; 2], inner: f64, outer: f64 },
}

impl Region {
    fn bounding_box(&self) -> Rect {
        match *self {
            Region::Rect(r) => r,
            Region::Annulus { center, outer, .. } => Rect {
                x0: center[0] - outer,
                x1: center[0] + outer,
                y0: center[1] - outer,
                y1: center[1] + outer,
            },
        }
    }

    fn contains(&self, z: ComplexPoint) -> bool {
        match *self {
            Region::Rect(r) => r.contains(z),
            Region::Annulus { center, inner, outer } => {
                let d = (z - Complex64::new(center[0], center[1])).norm();
                d > inner && d < outer
            }
        }
    }
}

/// Extremes of the Laplacian density over a grid in `region`, relative to
/// the Euclidean area form or to the cylindrical form `|dz|^2 / |z|^2`.
pub fn curvature_bounds(w: &dyn Weight, region: Region, grid_step: f64, reference: Metric) -> Result<(f64, f64)> {
    if !(grid_step > 0.0) {
        return Err(Error::Argument(format!("grid step must be positive, got {grid_step}")));
    }
    let b = region.bounding_box();
    let nx = ((b.x1 - b.x0) / grid_step).floor() as usize + 1;
    let ny = ((b.y1 - b.y0) / grid_step).floor() as usize + 1;
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    let mut seen = 0usize;
    for j in 0..ny {
        for i in 0..nx {
            let z = Complex64::new(b.x0 + grid_step * i as f64, b.y0 + grid_step * j as f64);
            if !region.contains(z) {
                continue;
            }
            let mut d = w.laplacian_density(z)?;
            if reference == Metric::Cylindrical {
                d *= z.norm_sqr();
            }
            lo = lo.min(d);
            hi = hi.max(d);
            seen += 1;
        }
    }
    if seen == 0 {
        return Err(Error::Argument("curvature_bounds: no grid point falls in the region".into()));
    }
    Ok((lo, hi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::{E, TAU};

    fn c(re: f64, im: f64) -> ComplexPoint {
        Complex64::new(re, im)
    }

    #[test]
    fn evaluate_examples() {
        assert_eq!(evaluate(&WeightModel::quadratic(1.0), c(2.0, 0.0)).unwrap(), 4.0);
        assert_relative_eq!(evaluate(&WeightModel::log_squared(1.0), c(E, 0.0)).unwrap(), 1.0, epsilon = 1e-15);
        assert_eq!(evaluate(&WeightModel::quadratic(1.0), c(0.0, 0.0)).unwrap(), 0.0);
        assert!(matches!(
            evaluate(&WeightModel::log_squared(1.0), c(0.0, 0.0)),
            Err(Error::Domain(_))
        ));
        assert_eq!(evaluate(&WeightModel::radial_poly(vec![1.0, 2.0, 3.0]), c(1.0, 1.0)).unwrap(), 1.0 + 4.0 + 12.0);
    }

    /// Second-difference oracle for the Laplacian density: (standard Laplacian) / 2.
    fn fd_density(w: &dyn Weight, z: ComplexPoint, h: f64) -> f64 {
        let f = |p: ComplexPoint| w.value(p).unwrap();
        let lap = (f(z + c(h, 0.0)) + f(z - c(h, 0.0)) + f(z + c(0.0, h)) + f(z - c(0.0, h)) - 4.0 * f(z)) / (h * h);
        0.5 * lap
    }

    #[test]
    fn laplacian_examples() {
        let q = WeightModel::quadratic(1.0);
        assert_eq!(laplacian_density(&q, c(3.0, -1.0)).unwrap(), 2.0);
        assert_relative_eq!(fd_density(&q, c(3.0, -1.0), 1e-3), 2.0, epsilon = 1e-5);
        assert_eq!(laplacian_density(&WeightModel::quadratic(0.0), c(1.0, 1.0)).unwrap(), 0.0);

        let g = GridWeight::sample(-3.0, -3.0, 61, 61, 0.1, |z| z.norm_sqr()).unwrap();
        let gw = WeightModel::grid(g, WeightDomain::Plane);
        assert!((laplacian_density(&gw, c(1.0, 1.0)).unwrap() - 2.0).abs() < 1e-4);
        assert!((evaluate(&gw, c(1.03, 0.57)).unwrap() - c(1.03, 0.57).norm_sqr()).abs() < 1e-10);
        assert!(matches!(laplacian_density(&gw, c(-2.95, 0.0)), Err(Error::Domain(_))));
    }

    #[test]
    fn closed_form_densities_match_finite_differences() {
        let rp = WeightModel::radial_poly(vec![0.5, 1.0, 0.25, 0.01]);
        let ls = WeightModel::log_squared(1.7);
        let bump = WeightModel::bumped(WeightModel::quadratic(1.0), c(0.5, 0.5), 0.3).unwrap();
        for z in [c(0.7, -0.2), c(1.5, 1.1), c(-2.0, 0.3)] {
            for w in [&rp, &ls, &bump] {
                let exact = w.laplacian_density(z).unwrap();
                assert_relative_eq!(fd_density(w, z, 1e-3), exact, max_relative = 1e-5);
            }
        }
    }

    #[test]
    fn coarse_grid_of_rough_weight_is_rejected() {
        let g = GridWeight::sample(-3.0, -3.0, 31, 31, 0.2, |z| (3.0 * z.re).sin() * 5.0).unwrap();
        let gw = WeightModel::grid(g, WeightDomain::Plane);
        assert!(matches!(
            laplacian_density(&gw, c(0.3, 0.0)),
            Err(Error::Numeric { op: "laplacian_density", .. })
        ));
    }

    #[test]
    fn grid_text_format() {
        let text = "# header\n0 0 6 6 0.5\n".to_string()
            + &(0..36).map(|i| format!("{}", i as f64 * 0.1)).collect::<Vec<_>>().join(" ");
        let g = GridWeight::read_from(text.as_bytes()).unwrap();
        assert_eq!((g.nx, g.ny), (6, 6));
        assert_eq!(g.values[7], 7.0 * 0.1);
        assert!(GridWeight::read_from("0 0 6 6".as_bytes()).is_err());
        assert!(GridWeight::read_from("0 0 6 6 0.5 1 2 3".as_bytes()).is_err());
        match GridWeight::read_from("0 0 6 6 0.5\n1 2\nx".as_bytes()) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn kernel_mass_examples() {
        let half = WeightModel::quadratic(0.5);
        assert_relative_eq!(kernel_laplacian_mass(&half, c(0.0, 0.0), 3.0).unwrap(), PI * 9.0, max_relative = 1e-12);
        assert_eq!(kernel_laplacian_mass(&WeightModel::quadratic(0.0), c(1.0, 2.0), 4.0).unwrap(), 0.0);
        let one = WeightModel::quadratic(1.0);
        assert_relative_eq!(
            kernel_laplacian_mass(&one, c(2.0, 1.0), 2.0).unwrap(),
            8.0 * PI,
            max_relative = 1e-12
        );
    }

    /// Radial oracle: (1/(pi r^2)) int_0^r 2 pi rho f(rho) log(r^2/rho^2) d rho by composite Simpson
    /// on a fine uniform grid (the integrand is continuous with value 0 at rho = 0).
    fn radial_log_average_oracle<F: Fn(f64) -> f64>(f: F, r: f64) -> f64 {
        let n = 200_000;
        let h = r / n as f64;
        let g = |rho: f64| if rho == 0.0 { 0.0 } else { 2.0 * PI * rho * f(rho) * (r * r / (rho * rho)).ln() };
        let mut s = g(0.0) + g(r);
        for i in 1..n {
            s += g(i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
        }
        s * h / 3.0 / (PI * r * r)
    }

    #[test]
    fn log_average_examples() {
        let k = WeightModel::constant(2.5);
        assert_relative_eq!(log_average(&k, c(3.0, -4.0), 1.7).unwrap(), 2.5, max_relative = 1e-13);
        let q = WeightModel::quadratic(1.0);
        let o2 = radial_log_average_oracle(|rho| rho * rho, 2.0);
        let o4 = radial_log_average_oracle(|rho| rho * rho, 4.0);
        assert_relative_eq!(o2, 1.0, max_relative = 1e-6);
        assert_relative_eq!(o4, 4.0, max_relative = 1e-6);
        assert_relative_eq!(log_average(&q, c(0.0, 0.0), 2.0).unwrap(), 1.0, max_relative = 1e-12);
        assert_relative_eq!(log_average(&q, c(0.0, 0.0), 4.0).unwrap(), 4.0, max_relative = 1e-12);
    }

    #[test]
    fn covered_mean_examples() {
        let k = WeightModel::grid(
            GridWeight::sample(-40.0, -40.0, 81, 81, 1.0, |_| 3.0).unwrap(),
            WeightDomain::PuncturedPlane,
        );
        assert_relative_eq!(covered_mean(&k, c(1.0, 0.5), 1.5).unwrap(), 3.0, max_relative = 1e-10);
        let ls = WeightModel::log_squared(1.0);
        assert_relative_eq!(covered_mean(&ls, c(1.0, 0.0), 2.0).unwrap(), 0.5, max_relative = 1e-12);
        let rotated = Complex64::from_polar(1.0, TAU * 0.3);
        assert_relative_eq!(covered_mean(&ls, rotated, 2.0).unwrap(), 0.5, max_relative = 1e-12);
        assert!(covered_mean(&ls, c(0.0, 0.0), 2.0).is_err());
        assert!(covered_mean(&WeightModel::quadratic(1.0), c(1.0, 0.0), 2.0).is_err());
    }

    #[test]
    fn covered_mean_depends_only_on_modulus() {
        let ls = WeightModel::log_squared(0.8);
        let base = covered_mean(&ls, c(2.5, 0.0), 1.3).unwrap();
        for k in 0..10 {
            let z = Complex64::from_polar(2.5, 0.37 + TAU * k as f64 / 10.0);
            assert!((covered_mean(&ls, z, 1.3).unwrap() - base).abs() < 1e-10);
        }
    }

    #[test]
    fn subharmonic_weight_is_dominated_by_covered_mean() {
        let ls = WeightModel::log_squared(1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..50 {
            let z = Complex64::from_polar(rng.gen_range(0.05..20.0), rng.gen_range(-PI..PI));
            let r = rng.gen_range(0.5..3.0);
            assert!(evaluate(&ls, z).unwrap() <= covered_mean(&ls, z, r).unwrap() + 1e-9);
        }
    }

    #[test]
    fn averaging_bound_for_quadratic() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for a in [0.25, 0.5, 1.0] {
            let w = WeightModel::quadratic(a);
            let worst = (0..100)
                .map(|_| {
                    let z = c(rng.gen_range(-30.0..30.0), rng.gen_range(-30.0..30.0));
                    (evaluate(&w, z).unwrap() - log_average(&w, z, 2.0).unwrap()).abs()
                })
                .fold(0.0, f64::max);
            assert!(worst <= 2.0, "a = {a}: {worst}");
            assert_relative_eq!(worst, a, max_relative = 1e-8);
        }
    }

    #[test]
    fn averaging_commutes_with_laplacian() {
        let w = WeightModel::quadratic(0.7);
        let r = 2.0;
        let h = 0.1;
        let z = c(0.4, -1.3);
        let avg = |p: ComplexPoint| log_average(&w, p, r).unwrap();
        let fd = 0.5
            * (avg(z + c(h, 0.0)) + avg(z - c(h, 0.0)) + avg(z + c(0.0, h)) + avg(z - c(0.0, h)) - 4.0 * avg(z))
            / (h * h);
        let smoothed = kernel_laplacian_mass(&w, z, r).unwrap() / (PI * r * r);
        assert!((fd - smoothed).abs() < 1e-3, "{fd} vs {smoothed}");
    }

    #[test]
    fn curvature_bounds_examples() {
        let sq = Region::Rect(Rect::centered(3.0).unwrap());
        assert_eq!(curvature_bounds(&WeightModel::quadratic(1.0), sq, 0.5, Metric::Euclidean).unwrap(), (2.0, 2.0));
        assert_eq!(curvature_bounds(&WeightModel::quadratic(0.0), sq, 0.5, Metric::Euclidean).unwrap(), (0.0, 0.0));
        let ann = Region::Annulus {
            center: [0.0, 0.0],
            inner: 1.0,
            outer: E,
        };
        let (m, mm) = curvature_bounds(&WeightModel::log_squared(1.0), ann, 0.1, Metric::Cylindrical).unwrap();
        assert_relative_eq!(m, 1.0, epsilon = 1e-12);
        assert_relative_eq!(mm, 1.0, epsilon = 1e-12);
        let tiny = Region::Annulus {
            center: [0.0, 0.0],
            inner: 0.1,
            outer: 0.2,
        };
        assert!(curvature_bounds(&WeightModel::quadratic(1.0), tiny, 1.0, Metric::Euclidean).is_err());
    }

    #[test]
    fn cover_pullback_density_matches_cover_oracle() {
        let ls = WeightModel::log_squared(1.0);
        let p = CoverPullback::new(&ls).unwrap();
        // pullback is (Re z)^2; finite differences on the cover give density 1
        assert_relative_eq!(fd_density(&p, c(0.3, 2.0), 1e-3), 1.0, max_relative = 1e-6);
        assert_eq!(p.laplacian_density(c(0.3, 2.0)).unwrap(), 1.0);
    }
}

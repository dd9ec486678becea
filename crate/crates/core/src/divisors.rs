//! Invariants of the local divisor `T(zeta) = prod (zeta - gamma)` over the
//! points of a sequence in a disk, and the weighted Jensen formula.
//!
//! All invariants depend only on `Gamma ∩ D_r(z)`. The normalizing integral
//! `lambda` of a local product is evaluated root by root: the angular mean of
//! `log |zeta - a|^2` over the circle `|zeta - z| = rho` is
//! `log max(rho, |a - z|)^2`, which leaves a one-dimensional integral with a
//! single kink.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::ComplexPoint;
use crate::quadrature::{annulus_log_kernel_fixed, periodic_trapezoid, GaussLegendre};
use crate::sequences::PointSequence;
use crate::weights::{kernel_laplacian_mass, Weight};

const LAMBDA_NODES: usize = 48;
/// Neighbors closer than this make `s_value` ill-conditioned.
pub const NEAR_DEGENERATE: f64 = 1e-8;

fn check_radius(op: &str, r: f64) -> Result<()> {
    if !(r > 1.0) || !r.is_finite() {
        return Err(Error::Argument(format!("{op}: radius must exceed 1, got {r}")));
    }
    Ok(())
}

/// `c_r = int_{1<|zeta|<r} log(r^2/|zeta|^2) dA = pi (r^2 - 1 - log r^2)`.
pub fn c_r(r: f64) -> Result<f64> {
    check_radius("c_r", r)?;
    Ok(PI * (r * r - 1.0 - (r * r).ln()))
}

/// Points of a sequence in the closed disk `D_r(z)`, standing for their product `T`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LocalDivisor {
    pub center: ComplexPoint,
    pub radius: f64,
    pub roots: Vec<ComplexPoint>,
}

impl LocalDivisor {
    pub fn new(gamma: &PointSequence, z: ComplexPoint, r: f64) -> Result<Self> {
        check_radius("local divisor", r)?;
        let roots = gamma.points().iter().copied().filter(|g| (g - z).norm() <= r).collect();
        Ok(Self {
            center: z,
            radius: r,
            roots,
        })
    }

    /// `log |T(zeta)|^2`; `-inf` on a root.
    pub fn log_abs_sq(&self, zeta: ComplexPoint) -> f64 {
        self.roots.iter().map(|g| (zeta - g).norm_sqr().ln()).sum()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DivisorInvariants {
    pub lambda: f64,
    pub sigma: f64,
    /// Present when the center is a point of the sequence.
    pub s_value: Option<f64>,
    pub upsilon_mass: f64,
    pub near_degenerate: bool,
}

/// `int_{1<|zeta-z|<r} log |zeta - a|^2 log(r^2/|zeta-z|^2) dA` for `|a - z| = alpha`.
fn root_kernel_integral(alpha: f64, r: f64) -> f64 {
    let rule = GaussLegendre::new(LAMBDA_NODES);
    // 2 pi rho * circle mean * kernel
    let g = |rho: f64, mean: f64| 2.0 * PI * rho * mean * 2.0 * (r / rho).ln();
    let kink = alpha.clamp(1.0, r);
    let inner = if kink > 1.0 {
        rule.integrate(1.0, kink, |rho| g(rho, 2.0 * alpha.ln()))
    } else {
        0.0
    };
    let outer = if kink < r {
        rule.integrate(kink, r, |rho| g(rho, 2.0 * rho.ln()))
    } else {
        0.0
    };
    inner + outer
}

/// `lambda = (1/c_r) int_{A_r(z)} log |T|^2 log(r^2/|zeta-z|^2) dA` for the local product.
pub fn lambda_value(d: &LocalDivisor) -> Result<f64> {
    let c = c_r(d.radius)?;
    Ok(d.roots
        .iter()
        .map(|g| root_kernel_integral((g - d.center).norm(), d.radius))
        .sum::<f64>()
        / c)
}

/// `log sigma` with one term per root; terms for roots outside `D_r(z)` vanish identically.
fn log_sigma(d: &LocalDivisor) -> Result<f64> {
    let c = c_r(d.radius)?;
    Ok(d.roots
        .iter()
        .map(|g| {
            let alpha = (g - d.center).norm();
            2.0 * alpha.ln() - root_kernel_integral(alpha, d.radius) / c
        })
        .sum())
}

/// `sigma = |T(z)|^2 e^{-lambda}`, exactly 0 when `z` is a point of the sequence.
pub fn sigma(gamma: &PointSequence, z: ComplexPoint, r: f64) -> Result<f64> {
    let d = LocalDivisor::new(gamma, z, r)?;
    if d.roots.contains(&z) {
        return Ok(0.0);
    }
    Ok(log_sigma(&d)?.exp())
}

/// `sigma` computed with the divisor function `e^h T` instead of `T`.
///
/// The smooth part `2 Re h` of `log |e^h T|^2` goes through two-dimensional
/// annulus quadrature, so agreement with [`sigma`] checks gauge independence.
pub fn sigma_with_gauge<H>(gamma: &PointSequence, z: ComplexPoint, r: f64, h: H) -> Result<f64>
where
    H: Fn(Complex64) -> Complex64,
{
    let d = LocalDivisor::new(gamma, z, r)?;
    if d.roots.contains(&z) {
        return Ok(0.0);
    }
    let c = c_r(r)?;
    let smooth = annulus_log_kernel_fixed(z, r, 64, 128, &|zeta| 2.0 * h(zeta).re);
    if !smooth.is_finite() {
        return Err(Error::numeric("sigma_with_gauge", format!("non-finite gauge integral at {z}")));
    }
    let lambda = lambda_value(&d)? + smooth / c;
    let log_abs = d.log_abs_sq(z) + 2.0 * h(z).re;
    Ok((log_abs - lambda).exp())
}

fn min_neighbor_distance(gamma: &PointSequence, g: ComplexPoint) -> f64 {
    gamma
        .points()
        .iter()
        .filter(|m| **m != g)
        .map(|m| (m - g).norm())
        .fold(f64::INFINITY, f64::min)
}

/// `S = |dT(gamma)|^2 e^{-lambda(gamma)}` at a point `gamma` of the sequence.
pub fn s_value(gamma: &PointSequence, g: ComplexPoint, r: f64) -> Result<f64> {
    if !gamma.contains(g) {
        return Err(Error::Argument(format!("s_value: {g} is not a point of the sequence")));
    }
    let d = LocalDivisor::new(gamma, g, r)?;
    let c = c_r(r)?;
    let mut log_s = 0.0;
    for m in &d.roots {
        let alpha = (m - g).norm();
        if alpha > 0.0 {
            log_s += 2.0 * alpha.ln();
        }
        log_s -= root_kernel_integral(alpha, r) / c;
    }
    let nearest = min_neighbor_distance(gamma, g);
    if nearest < NEAR_DEGENERATE {
        log::warn!("s_value at {g}: neighbor at distance {nearest:.3e}, divisor is nearly degenerate");
    }
    Ok(log_s.exp())
}

/// `sum_{1<|gamma-z|<r} log(r^2/|gamma-z|^2)`.
pub fn upsilon_mass(gamma: &PointSequence, z: ComplexPoint, r: f64) -> Result<f64> {
    check_radius("upsilon_mass", r)?;
    Ok(upsilon_mass_unchecked(gamma.points(), z, r))
}

pub(crate) fn upsilon_mass_unchecked(points: &[ComplexPoint], z: ComplexPoint, r: f64) -> f64 {
    let r2 = r * r;
    points
        .iter()
        .filter_map(|g| {
            let d2 = (g - z).norm_sqr();
            (d2 > 1.0 && d2 < r2).then(|| (r2 / d2).ln())
        })
        .sum()
}

pub fn invariants(gamma: &PointSequence, z: ComplexPoint, r: f64) -> Result<DivisorInvariants> {
    let d = LocalDivisor::new(gamma, z, r)?;
    let on_gamma = gamma.contains(z);
    Ok(DivisorInvariants {
        lambda: lambda_value(&d)?,
        sigma: sigma(gamma, z, r)?,
        s_value: if on_gamma { Some(s_value(gamma, z, r)?) } else { None },
        upsilon_mass: upsilon_mass(gamma, z, r)?,
        near_degenerate: on_gamma && min_neighbor_distance(gamma, z) < NEAR_DEGENERATE,
    })
}

/// Polynomial given by its leading coefficient and roots.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Polynomial {
    pub leading: Complex64,
    pub roots: Vec<ComplexPoint>,
}

impl Polynomial {
    pub fn new(leading: Complex64, roots: Vec<ComplexPoint>) -> Result<Self> {
        if leading == Complex64::new(0.0, 0.0) {
            return Err(Error::Argument("leading coefficient must be nonzero".into()));
        }
        Ok(Self { leading, roots })
    }

    pub fn eval(&self, zeta: ComplexPoint) -> Complex64 {
        self.roots.iter().fold(self.leading, |acc, a| acc * (zeta - a))
    }

    pub fn log_abs_sq(&self, zeta: ComplexPoint) -> f64 {
        self.leading.norm_sqr().ln() + self.roots.iter().map(|a| (zeta - a).norm_sqr().ln()).sum::<f64>()
    }
}

const JENSEN_START_NODES: usize = 1 << 10;
const JENSEN_MAX_NODES: usize = 1 << 20;
const JENSEN_STEP_TOL: f64 = 1e-9;

/// Mean of `log(|f|^2 e^{-phi})` over the circle `|zeta - z| = r`, by
/// trapezoid refinement.
fn boundary_mean(f: &Polynomial, w: &dyn Weight, z: ComplexPoint, r: f64) -> Result<f64> {
    let g = |theta: f64| {
        let zeta = z + Complex64::from_polar(r, theta);
        f.log_abs_sq(zeta) - w.value(zeta).unwrap_or(f64::NAN)
    };
    let mut n = JENSEN_START_NODES;
    let mut prev = periodic_trapezoid(n, g) / (2.0 * PI);
    while n < JENSEN_MAX_NODES {
        n *= 2;
        let next = periodic_trapezoid(n, g) / (2.0 * PI);
        if !next.is_finite() {
            break;
        }
        if (next - prev).abs() < JENSEN_STEP_TOL {
            return Ok(next);
        }
        prev = next;
    }
    Err(Error::numeric(
        "jensen_residual",
        format!("boundary mean on |zeta - {z}| = {r} did not settle with {n} nodes"),
    ))
}

/// Left side minus right side of the weighted Jensen formula; zero up to quadrature error.
pub fn jensen_residual(f: &Polynomial, w: &dyn Weight, z: ComplexPoint, r: f64) -> Result<f64> {
    if !(r > 0.0) {
        return Err(Error::Argument(format!("jensen_residual: radius must be positive, got {r}")));
    }
    for a in &f.roots {
        let d = (a - z).norm();
        if d == 0.0 {
            return Err(Error::Argument(format!("jensen_residual: f vanishes at the center {z}")));
        }
        if (d - r).abs() <= 1e-9 {
            return Err(Error::Argument(format!("jensen_residual: root {a} lies on the boundary circle")));
        }
    }
    w.check_disk(z, r)?;
    let lhs = boundary_mean(f, w, z, r)?;
    let counted: f64 = f
        .roots
        .iter()
        .filter(|a| (*a - z).norm() < r)
        .map(|a| (r * r / (a - z).norm_sqr()).ln())
        .sum();
    let rhs = f.log_abs_sq(z) - w.value(z)? + counted - kernel_laplacian_mass(w, z, r)? / (2.0 * PI);
    Ok(lhs - rhs)
}

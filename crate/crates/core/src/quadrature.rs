//! Gauss-Legendre rules and the polar rules built on them.
//!
//! All disk integrals against the logarithmic kernel `log(r^2/|zeta-z|^2)`
//! use the substitution `rho = r t^2`, which turns the kernel's singularity
//! at the center into the integrable factor `t^3 log t` and lets a plain
//! Gauss-Legendre rule in `t` converge quickly.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Radial nodes used by the kernel integrals unless stated otherwise.
pub const DEFAULT_RADIAL_NODES: usize = 64;
/// Angular (trapezoid) nodes used by the kernel integrals unless stated otherwise.
pub const DEFAULT_ANGULAR_NODES: usize = 128;
/// Relative tolerance for the node-doubling error estimate.
pub const DEFAULT_TOLERANCE: f64 = 1e-8;

/// Gauss-Legendre rule on `[-1, 1]`.
#[derive(Clone, Debug)]
pub struct GaussLegendre {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussLegendre {
    /// Nodes by Newton iteration on `P_n` from the Tricomi initial guesses.
    pub fn new(n: usize) -> Self {
        assert!(n > 0, "Gauss-Legendre rule needs at least one node");
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let nf = n as f64;
        for i in 0..n.div_ceil(2) {
            let mut x = (PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
            let mut dp = 1.0;
            for _ in 0..100 {
                let (p, d) = legendre_with_derivative(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre_with_derivative(n, x);
            dp = if d.is_finite() { d } else { dp };
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            weights[i] = w;
            nodes[n - 1 - i] = x;
            weights[n - 1 - i] = w;
        }
        if n % 2 == 1 {
            nodes[n / 2] = 0.0;
        }
        Self { nodes, weights }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Nodes and weights mapped to `[a, b]`.
    pub fn mapped(&self, a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(move |(&x, &w)| (mid + half * x, half * w))
    }

    pub fn integrate<F: FnMut(f64) -> f64>(&self, a: f64, b: f64, mut f: F) -> f64 {
        self.mapped(a, b).map(|(x, w)| w * f(x)).sum()
    }
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let p = if n == 0 { 1.0 } else { p1 };
    let d = n as f64 * (x * p - p0) / (x * x - 1.0);
    (p, d)
}

/// Composite Gauss-Legendre nodes on `[a, b]` with panels no wider than `panel_width`.
pub fn composite_nodes(a: f64, b: f64, panel_width: f64, per_panel: usize) -> Vec<(f64, f64)> {
    let panels = (((b - a) / panel_width).ceil() as usize).max(1);
    let h = (b - a) / panels as f64;
    let rule = GaussLegendre::new(per_panel);
    (0..panels)
        .flat_map(|p| {
            let lo = a + h * p as f64;
            rule.mapped(lo, lo + h).collect::<Vec<_>>()
        })
        .collect()
}

/// Trapezoid rule for a `2 pi`-periodic function: `int_0^{2 pi} f(theta) d theta`.
pub fn periodic_trapezoid<F: FnMut(f64) -> f64>(n: usize, mut f: F) -> f64 {
    let h = 2.0 * PI / n as f64;
    (0..n).map(|k| f(h * k as f64)).sum::<f64>() * h
}

/// `int_{D_r(z)} log(r^2/|zeta-z|^2) f(zeta) dA` on a fixed tensor rule.
///
/// Returns the integral together with the same integral of `|f|`, which is
/// the scale used by the error estimate.
pub fn disk_log_kernel_fixed<F>(z: Complex64, r: f64, radial: usize, angular: usize, f: &F) -> (f64, f64)
where
    F: Fn(Complex64) -> f64 + ?Sized,
{
    let rule = GaussLegendre::new(radial);
    let dtheta = 2.0 * PI / angular as f64;
    let dirs: Vec<Complex64> = (0..angular)
        .map(|k| Complex64::from_polar(1.0, dtheta * k as f64))
        .collect();
    let mut total = 0.0;
    let mut total_abs = 0.0;
    for (t, w) in rule.mapped(0.0, 1.0) {
        let rho = r * t * t;
        // rho drho log(r^2/rho^2) = -8 r^2 t^3 log t dt
        let jac = -8.0 * r * r * t * t * t * t.ln() * w * dtheta;
        let mut ring = 0.0;
        let mut ring_abs = 0.0;
        for d in &dirs {
            let v = f(z + d * rho);
            ring += v;
            ring_abs += v.abs();
        }
        total += jac * ring;
        total_abs += jac * ring_abs;
    }
    (total, total_abs)
}

/// Log-kernel disk integral with a node-doubling error check.
///
/// `op` names the calling operation in the error when the two rules disagree
/// by more than `tol` relative to the integral of `|f|`.
pub fn disk_log_kernel<F>(op: &'static str, z: Complex64, r: f64, tol: f64, f: &F) -> Result<f64>
where
    F: Fn(Complex64) -> f64 + ?Sized,
{
    if !(r > 0.0) || !r.is_finite() {
        return Err(Error::Argument(format!("{op}: radius must be positive, got {r}")));
    }
    let (coarse, _) = disk_log_kernel_fixed(z, r, DEFAULT_RADIAL_NODES, DEFAULT_ANGULAR_NODES, f);
    let (fine, scale) = disk_log_kernel_fixed(z, r, 2 * DEFAULT_RADIAL_NODES, 2 * DEFAULT_ANGULAR_NODES, f);
    if !fine.is_finite() {
        return Err(Error::numeric(op, format!("non-finite integrand on D_{r}({z})")));
    }
    let err = (fine - coarse).abs();
    if err > tol * scale.max(f64::MIN_POSITIVE) {
        return Err(Error::numeric(
            op,
            format!("quadrature did not converge on D_{r}({z}): estimated error {err:.3e}, scale {scale:.3e}"),
        ));
    }
    Ok(fine)
}

/// `int_{1 < |zeta-z| < r} log(r^2/|zeta-z|^2) f(zeta) dA` on a fixed tensor rule.
pub fn annulus_log_kernel_fixed<F>(z: Complex64, r: f64, radial: usize, angular: usize, f: &F) -> f64
where
    F: Fn(Complex64) -> f64 + ?Sized,
{
    let rule = GaussLegendre::new(radial);
    let dtheta = 2.0 * PI / angular as f64;
    let dirs: Vec<Complex64> = (0..angular)
        .map(|k| Complex64::from_polar(1.0, dtheta * k as f64))
        .collect();
    rule.mapped(1.0, r)
        .map(|(rho, w)| {
            let ring: f64 = dirs.iter().map(|d| f(z + d * rho)).sum();
            w * rho * (r * r / (rho * rho)).ln() * ring * dtheta
        })
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn gauss_legendre_is_exact_on_polynomials() {
        let rule = GaussLegendre::new(8);
        for k in 0..16 {
            let exact = if k % 2 == 0 { 2.0 / (k as f64 + 1.0) } else { 0.0 };
            assert_relative_eq!(rule.integrate(-1.0, 1.0, |x| x.powi(k)), exact, epsilon = 1e-14);
        }
        let weights: f64 = GaussLegendre::new(101).mapped(-1.0, 1.0).map(|(_, w)| w).sum();
        assert_relative_eq!(weights, 2.0, epsilon = 1e-13);
    }

    #[test]
    fn gauss_legendre_large_rule_on_transcendental() {
        let rule = GaussLegendre::new(40);
        let v = rule.integrate(0.0, PI, f64::sin);
        assert_relative_eq!(v, 2.0, epsilon = 1e-14);
    }

    #[test]
    fn composite_rule_covers_interval() {
        let nodes = composite_nodes(0.0, 10.0, 1.0, 12);
        assert_eq!(nodes.len(), 120);
        let v: f64 = nodes.iter().map(|(x, w)| w * (-x * x).exp()).sum();
        assert_relative_eq!(v, PI.sqrt() / 2.0, epsilon = 1e-14);
    }

    #[test]
    fn log_kernel_mass_of_constant_is_pi_r_squared() {
        for r in [0.5, 1.0, 3.0, 7.0] {
            let v = disk_log_kernel("test", Complex64::new(0.3, -1.0), r, 1e-10, &|_| 1.0).unwrap();
            assert_relative_eq!(v, PI * r * r, max_relative = 1e-12);
        }
    }

    #[test]
    fn annulus_rule_matches_closed_form() {
        let r: f64 = 5.0;
        let v = annulus_log_kernel_fixed(Complex64::new(0.0, 0.0), r, 64, 8, &|_| 1.0);
        let exact = PI * (r * r - 1.0 - (r * r).ln());
        assert_relative_eq!(v, exact, max_relative = 1e-13);
    }

    #[test]
    fn trapezoid_is_spectral_for_periodic() {
        let v = periodic_trapezoid(32, |t| (t.cos()).exp());
        // 2 pi I_0(1)
        assert_relative_eq!(v, 2.0 * PI * 1.266_065_877_752_008_4, epsilon = 1e-13);
    }
}

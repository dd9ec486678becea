//! Finite sections of weighted Bergman spaces: monomials `z^n, 0 <= n <= N`
//! on a disk, or Laurent monomials `z^n, |n| <= N` on an annulus carrying the
//! cylindrical area form `dA / |z|^2`.
//!
//! Gram entries are assembled from a radial Gauss-Legendre rule and, on each
//! radial node, the angular Fourier moments of `e^{-phi}` (one FFT per node).
//! Monomials are rescaled by their own norms in log space, so sections with
//! `N` in the hundreds do not overflow.

use std::f64::consts::TAU;

use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::geometry::ComplexPoint;
use crate::quadrature::composite_nodes;
use crate::sequences::{perturb, separation_radius, PointSequence};
use crate::geometry::Metric;
use crate::weights::{Weight, WeightDomain, WeightKind, WeightModel};

/// Smallest accepted eigenvalue of the normalized Gram matrix, relative to the largest.
pub const GRAM_EIGEN_FLOOR: f64 = 1e-13;
/// Singular values below this fraction of the largest count as zero.
pub const RANK_TOLERANCE: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", deny_unknown_fields)]
pub enum SpaceDomain {
    Disk { radius: f64 },
    /// `inner < |z| < outer` with the area form `dA / |z|^2`.
    Annulus { inner: f64, outer: f64 },
}

impl SpaceDomain {
    fn contains(&self, z: ComplexPoint) -> bool {
        let m = z.norm();
        match *self {
            SpaceDomain::Disk { radius } => m <= radius,
            SpaceDomain::Annulus { inner, outer } => m >= inner && m <= outer,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QuadratureSpec {
    /// Width of the radial Gauss-Legendre panels (in `log rho` on an annulus).
    pub panel_width: f64,
    pub nodes_per_panel: usize,
    /// Lower bound on the number of angular FFT nodes.
    pub min_angular: usize,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self {
            panel_width: 0.5,
            nodes_per_panel: 16,
            min_angular: 128,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpaceDiagnostics {
    pub dimension: usize,
    pub radial_nodes: usize,
    pub angular_nodes: usize,
    /// Smallest over largest eigenvalue of the normalized Gram matrix.
    pub min_eigenvalue_relative: f64,
    /// Largest share of any basis norm carried by the outermost radial panel.
    pub tail_fraction: f64,
    /// Largest off-diagonal modulus of the normalized Gram matrix.
    pub max_off_diagonal: f64,
}

/// A finite section with its orthonormalizer.
#[derive(Clone, Debug)]
pub struct TruncatedSpace {
    domain: SpaceDomain,
    /// Center of the domain and of the monomials `(z - origin)^n`.
    origin: ComplexPoint,
    weight: WeightModel,
    n: usize,
    quadrature: QuadratureSpec,
    exponents: Vec<i64>,
    /// `log` of the Gram diagonal, one entry per basis monomial.
    log_norms: Vec<f64>,
    /// Lower Cholesky factor of the normalized Gram matrix (transposed).
    chol: DMatrix<Complex64>,
    diagnostics: SpaceDiagnostics,
}

fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

impl TruncatedSpace {
    pub fn build(domain: SpaceDomain, weight: WeightModel, n: usize, quadrature: QuadratureSpec) -> Result<Self> {
        Self::build_with(domain, weight, n, quadrature, Exec::default())
    }

    pub fn build_with(
        domain: SpaceDomain,
        weight: WeightModel,
        n: usize,
        quadrature: QuadratureSpec,
        exec: Exec,
    ) -> Result<Self> {
        Self::build_centered(domain, Complex64::new(0.0, 0.0), weight, n, quadrature, exec)
    }

    /// A disk section on the disk around `origin`, spanned by powers of
    /// `z - origin`. Annulus sections must keep the origin at 0.
    pub fn build_centered(
        domain: SpaceDomain,
        origin: ComplexPoint,
        weight: WeightModel,
        n: usize,
        quadrature: QuadratureSpec,
        exec: Exec,
    ) -> Result<Self> {
        if !(origin.re.is_finite() && origin.im.is_finite()) {
            return Err(Error::Argument(format!("section origin must be finite, got {origin}")));
        }
        if matches!(domain, SpaceDomain::Annulus { .. }) && origin != Complex64::new(0.0, 0.0) {
            return Err(Error::Argument("annulus sections are centered at the puncture".into()));
        }
        if !(quadrature.panel_width > 0.0) || quadrature.nodes_per_panel == 0 {
            return Err(Error::Argument(format!("bad quadrature spec {quadrature:?}")));
        }
        let (exponents, radial): (Vec<i64>, Vec<(f64, f64, f64)>) = match domain {
            SpaceDomain::Disk { radius } => {
                if !(radius > 0.0 && radius.is_finite()) {
                    return Err(Error::Argument(format!("disk radius must be positive, got {radius}")));
                }
                if weight.domain() != WeightDomain::Plane {
                    return Err(Error::Domain("a disk section needs a weight defined at the origin".into()));
                }
                let nodes = composite_nodes(0.0, radius, quadrature.panel_width, quadrature.nodes_per_panel);
                // (rho, log rho, log of radial weight times area factor rho)
                let rad = nodes.into_iter().map(|(r, w)| (r, r.ln(), (w * r).ln())).collect();
                ((0..=n as i64).collect(), rad)
            }
            SpaceDomain::Annulus { inner, outer } => {
                if !(inner > 0.0 && outer > inner && outer.is_finite()) {
                    return Err(Error::Argument(format!("annulus needs 0 < inner < outer, got {inner}, {outer}")));
                }
                let nodes = composite_nodes(inner.ln(), outer.ln(), quadrature.panel_width, quadrature.nodes_per_panel);
                // dA / |z|^2 = d(log rho) d theta
                let rad = nodes.into_iter().map(|(t, w)| (t.exp(), t, w.ln())).collect();
                ((-(n as i64)..=n as i64).collect(), rad)
            }
        };
        let dim = exponents.len();
        let max_m = (exponents[dim - 1] - exponents[0]) as usize;
        let n_theta = (2 * max_m + 128).max(quadrature.min_angular).next_power_of_two();

        // angular moments per radial node: chat[i][m + max_m] = (1/2pi)-free integral of e^{i m theta} e^{-(phi - phi_min)}
        let fft = FftPlanner::<f64>::new().plan_fft_forward(n_theta);
        let rows = exec.map(&radial, |&(rho, _, _)| -> Result<(f64, Vec<Complex64>)> {
            let phis = (0..n_theta)
                .map(|t| weight.value(origin + Complex64::from_polar(rho, TAU * t as f64 / n_theta as f64)))
                .collect::<Result<Vec<f64>>>()?;
            let floor = phis.iter().copied().fold(f64::INFINITY, f64::min);
            let mut buf: Vec<Complex64> = phis.iter().map(|p| Complex64::new((floor - p).exp(), 0.0)).collect();
            fft.process(&mut buf);
            let h = TAU / n_theta as f64;
            let moments = (0..=2 * max_m)
                .map(|k| {
                    let m = k as i64 - max_m as i64;
                    buf[(-m).rem_euclid(n_theta as i64) as usize] * h
                })
                .collect();
            Ok((floor, moments))
        });
        let rows = rows.into_iter().collect::<Result<Vec<_>>>()?;
        if rows.iter().any(|(f, _)| !f.is_finite()) {
            return Err(Error::numeric("build_space", "weight is not finite on the domain"));
        }

        // log G_jj by log-sum-exp over radial nodes
        let mut log_norms = Vec::with_capacity(dim);
        let mut tail_fraction: f64 = 0.0;
        let last_panel = radial.len() - quadrature.nodes_per_panel;
        for &e in &exponents {
            let terms: Vec<f64> = radial
                .iter()
                .zip(&rows)
                .map(|(&(_, lr, lw), (floor, mom))| lw - floor + mom[max_m].re.ln() + 2.0 * e as f64 * lr)
                .collect();
            let total = log_sum_exp(&terms);
            if !total.is_finite() {
                return Err(Error::numeric("build_space", format!("basis element z^{e} has non-finite norm")));
            }
            tail_fraction = tail_fraction.max((log_sum_exp(&terms[last_panel..]) - total).exp());
            log_norms.push(total);
        }

        // a[i][j] = rho_i^{e_j} sqrt(w_i e^{-floor_i} / G_jj)
        let a: Vec<Vec<f64>> = radial
            .iter()
            .zip(&rows)
            .map(|(&(_, lr, lw), (floor, _))| {
                exponents
                    .iter()
                    .zip(&log_norms)
                    .map(|(&e, &l)| (e as f64 * lr - 0.5 * l + 0.5 * (lw - floor)).exp())
                    .collect()
            })
            .collect();
        let gram_rows = exec.map_range(dim, |j| {
            (0..dim)
                .map(|k| {
                    let m = (exponents[j] - exponents[k] + max_m as i64) as usize;
                    a.iter()
                        .zip(&rows)
                        .map(|(ai, (_, mom))| mom[m] * (ai[j] * ai[k]))
                        .sum::<Complex64>()
                })
                .collect::<Vec<_>>()
        });
        // P_jk = <u_k, u_j>, so that ||sum c_j u_j||^2 = c^H P c
        let p = DMatrix::from_fn(dim, dim, |j, k| gram_rows[k][j]);
        let p = (&p + p.adjoint()) * Complex64::new(0.5, 0.0);
        let max_off_diagonal = (0..dim)
            .flat_map(|j| (0..dim).filter(move |k| *k != j).map(move |k| (j, k)))
            .map(|(j, k)| p[(j, k)].norm())
            .fold(0.0, f64::max);

        let eig = SymmetricEigen::new(p.clone()).eigenvalues;
        let lo = eig.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = eig.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let rel = lo / hi;
        if !(rel > GRAM_EIGEN_FLOOR) {
            return Err(Error::numeric(
                "build_space",
                format!("Gram matrix is not safely positive definite: eigenvalues in [{lo:.3e}, {hi:.3e}], relative {rel:.3e}"),
            ));
        }
        let chol = Cholesky::new(p)
            .ok_or_else(|| Error::numeric("build_space", "Cholesky factorization of the Gram matrix failed"))?
            .l();
        Ok(Self {
            domain,
            origin,
            weight,
            n,
            quadrature,
            exponents,
            log_norms,
            chol,
            diagnostics: SpaceDiagnostics {
                dimension: dim,
                radial_nodes: radial.len(),
                angular_nodes: n_theta,
                min_eigenvalue_relative: rel,
                tail_fraction,
                max_off_diagonal,
            },
        })
    }

    pub fn domain(&self) -> SpaceDomain {
        self.domain
    }

    pub fn origin(&self) -> ComplexPoint {
        self.origin
    }

    pub fn weight(&self) -> &WeightModel {
        &self.weight
    }

    pub fn basis_size(&self) -> usize {
        self.n
    }

    pub fn dimension(&self) -> usize {
        self.exponents.len()
    }

    pub fn quadrature(&self) -> QuadratureSpec {
        self.quadrature
    }

    pub fn diagnostics(&self) -> &SpaceDiagnostics {
        &self.diagnostics
    }

    /// Diagonal Gram entries `int |z^n|^2 e^{-phi}` as `(n, log G_nn)`.
    pub fn log_gram_diagonal(&self) -> Vec<(i64, f64)> {
        self.exponents.iter().copied().zip(self.log_norms.iter().copied()).collect()
    }

    /// The same space with `weight` in place of the current one.
    pub fn rebuild(&self, weight: WeightModel) -> Result<Self> {
        self.rebuild_centered(weight, self.origin)
    }

    fn rebuild_centered(&self, weight: WeightModel, origin: ComplexPoint) -> Result<Self> {
        Self::build_centered(self.domain, origin, weight, self.n, self.quadrature, Exec::default())
    }

    fn check_point(&self, z: ComplexPoint) -> Result<()> {
        if !self.domain.contains(z - self.origin) {
            return Err(Error::Domain(format!("{z} lies outside the section's domain {:?}", self.domain)));
        }
        Ok(())
    }

    /// Orthonormal basis values at `z` times `e^{-phi(z)/2}`.
    pub fn weighted_basis(&self, z: ComplexPoint) -> Result<DVector<Complex64>> {
        self.check_point(z)?;
        let half_phi = 0.5 * self.weight.value(z)?;
        let w = z - self.origin;
        let log_z = if w == Complex64::new(0.0, 0.0) { None } else { Some(w.ln()) };
        // conj(u) with u_j = z^{e_j} e^{-phi/2} / sqrt(G_jj)
        let rhs = DVector::from_iterator(
            self.exponents.len(),
            self.exponents.iter().zip(&self.log_norms).map(|(&e, &l)| match log_z {
                Some(lz) => (lz * e as f64 - 0.5 * l - half_phi).exp().conj(),
                None if e == 0 => Complex64::new((-0.5 * l - half_phi).exp(), 0.0),
                None => Complex64::new(0.0, 0.0),
            }),
        );
        let x = self
            .chol
            .solve_lower_triangular(&rhs)
            .ok_or_else(|| Error::numeric("kernel_diag", "triangular solve failed"))?;
        Ok(x.map(|c| c.conj()))
    }

    /// Rows `e_k(gamma) e^{-phi(gamma)/2}`, one per point.
    pub fn evaluation_matrix(&self, gamma: &PointSequence) -> Result<DMatrix<Complex64>> {
        self.evaluation_matrix_with(gamma, Exec::default())
    }

    pub fn evaluation_matrix_with(&self, gamma: &PointSequence, exec: Exec) -> Result<DMatrix<Complex64>> {
        let rows = exec.map(gamma.points(), |g| self.weighted_basis(*g));
        let rows = rows.into_iter().collect::<Result<Vec<_>>>()?;
        let dim = self.dimension();
        Ok(DMatrix::from_fn(rows.len(), dim, |i, k| rows[i][k]))
    }

    /// `K(z, z) e^{-phi(z)}`.
    pub fn weighted_kernel_diag(&self, z: ComplexPoint) -> Result<f64> {
        Ok(self.weighted_basis(z)?.norm_squared())
    }

    /// `K(z, z) = sum_k |e_k(z)|^2`.
    pub fn kernel_diag(&self, z: ComplexPoint) -> Result<f64> {
        Ok(self.weighted_kernel_diag(z)? * self.weight.value(z)?.exp())
    }

    /// Extremes of `K(z, z) e^{-phi(z)}` over the given points.
    pub fn kernel_bound_check(&self, grid: &[ComplexPoint]) -> Result<(f64, f64)> {
        if grid.is_empty() {
            return Err(Error::Argument("kernel_bound_check: empty grid".into()));
        }
        let vals = Exec::default().map(grid, |z| self.weighted_kernel_diag(*z));
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for v in vals {
            let v = v?;
            lo = lo.min(v);
            hi = hi.max(v);
        }
        Ok((lo, hi))
    }

    fn singular_values(e: &DMatrix<Complex64>) -> Vec<f64> {
        e.clone().svd(false, false).singular_values.iter().copied().collect()
    }

    /// Interpolation constant of the section with diagnostics.
    pub fn interpolation_constant_report(&self, gamma: &PointSequence) -> Result<ConstantReport> {
        let dim = self.dimension();
        if gamma.is_empty() {
            return Ok(ConstantReport {
                constant: 0.0,
                sigma_min: 0.0,
                sigma_max: 0.0,
                points: 0,
                dimension: dim,
                rank_deficient: false,
                closest_pair: None,
            });
        }
        let e = self.evaluation_matrix(gamma)?;
        let sv = Self::singular_values(&e);
        let sigma_max = sv.iter().copied().fold(0.0, f64::max);
        let sigma_min = if gamma.len() > dim {
            0.0
        } else {
            sv.iter().copied().fold(f64::INFINITY, f64::min)
        };
        let rank_deficient = gamma.len() > dim || !(sigma_min > RANK_TOLERANCE * sigma_max);
        let closest_pair = closest_pair(gamma);
        if rank_deficient {
            log::warn!(
                "evaluation matrix of {} points in a {}-dimensional section is rank deficient (sigma_min {:.3e}, sigma_max {:.3e})",
                gamma.len(),
                dim,
                sigma_min,
                sigma_max
            );
        }
        Ok(ConstantReport {
            constant: if rank_deficient { f64::INFINITY } else { 1.0 / sigma_min },
            sigma_min,
            sigma_max,
            points: gamma.len(),
            dimension: dim,
            rank_deficient,
            closest_pair,
        })
    }

    /// Norm of the minimal extension `l^2(Gamma, e^{-phi}) -> section`;
    /// `+inf` when the evaluation map is not onto.
    pub fn interpolation_constant(&self, gamma: &PointSequence) -> Result<f64> {
        Ok(self.interpolation_constant_report(gamma)?.constant)
    }

    /// Largest singular value of the evaluation matrix.
    pub fn restriction_norm(&self, gamma: &PointSequence) -> Result<f64> {
        if gamma.is_empty() {
            return Ok(0.0);
        }
        let e = self.evaluation_matrix(gamma)?;
        Ok(Self::singular_values(&e).into_iter().fold(0.0, f64::max))
    }

    /// Minimal-norm element with `f(gamma) e^{-phi(gamma)/2} = targets[gamma]`.
    ///
    /// Targets are given in the `l^2(Gamma, e^{-phi})` normalization.
    pub fn min_norm_interpolant(&self, gamma: &PointSequence, targets: &[Complex64]) -> Result<InterpolationResult> {
        if targets.len() != gamma.len() {
            return Err(Error::Argument(format!(
                "{} targets for {} points",
                targets.len(),
                gamma.len()
            )));
        }
        let dim = self.dimension();
        if gamma.is_empty() {
            return Ok(InterpolationResult {
                coefficients: vec![Complex64::new(0.0, 0.0); dim],
                space_norm: 0.0,
                achieved_values: Vec::new(),
                residual: 0.0,
                constant_estimate: 0.0,
            });
        }
        let e = self.evaluation_matrix(gamma)?;
        let svd = e.clone().svd(true, true);
        let sv = &svd.singular_values;
        let sigma_max = sv.iter().copied().fold(0.0, f64::max);
        let sigma_min = sv.iter().copied().fold(f64::INFINITY, f64::min);
        if gamma.len() > dim || !(sigma_min > RANK_TOLERANCE * sigma_max) {
            let near = match closest_pair(gamma) {
                Some((i, j, d)) => format!(
                    "; closest points {} and {} at distance {d:.3e}",
                    gamma.points()[i],
                    gamma.points()[j]
                ),
                None => String::new(),
            };
            return Err(Error::numeric(
                "min_norm_interpolant",
                format!(
                    "evaluation matrix ({} x {dim}) is rank deficient: sigma_min {sigma_min:.3e}, sigma_max {sigma_max:.3e}{near}",
                    gamma.len()
                ),
            ));
        }
        let b = DVector::from_column_slice(targets);
        let d = svd
            .solve(&b, RANK_TOLERANCE * sigma_max)
            .map_err(|m| Error::numeric("min_norm_interpolant", m.to_string()))?;
        let achieved = &e * &d;
        let residual = achieved
            .iter()
            .zip(targets)
            .map(|(a, t)| (a - t).norm())
            .fold(0.0, f64::max);
        Ok(InterpolationResult {
            space_norm: d.norm(),
            coefficients: d.iter().copied().collect(),
            achieved_values: achieved.iter().copied().collect(),
            residual,
            constant_estimate: 1.0 / sigma_min,
        })
    }

    /// Normalized kernel at `z`: weighted value 1 with squared norm `1 / (K(z,z) e^{-phi(z)})`.
    pub fn one_point_interpolant(&self, z: ComplexPoint) -> Result<InterpolationResult> {
        let v = self.weighted_basis(z)?;
        let k = v.norm_squared();
        if !(k > 0.0) {
            return Err(Error::numeric("one_point_interpolant", format!("kernel vanishes at {z}")));
        }
        let d = v.map(|c| c.conj() / k);
        let achieved = v.dot(&d);
        Ok(InterpolationResult {
            space_norm: d.norm(),
            coefficients: d.iter().copied().collect(),
            achieved_values: vec![achieved],
            residual: (achieved - Complex64::new(1.0, 0.0)).norm(),
            constant_estimate: 1.0 / k.sqrt(),
        })
    }

    /// Constants before and after moving each point by at most `delta^2`.
    pub fn jiggle_experiment(&self, gamma: &PointSequence, offsets: &[ComplexPoint], delta: f64) -> Result<JiggleReport> {
        if !(delta > 0.0) {
            return Err(Error::Argument(format!("jiggle size must be positive, got {delta}")));
        }
        let moved = perturb(gamma, offsets, delta * delta)?;
        let before = self.interpolation_constant(gamma)?;
        let sep = separation_radius(gamma, Metric::Euclidean)?.radius;
        let limit = (1.0 / before).min(sep);
        if !(delta < limit) {
            return Err(Error::Argument(format!(
                "jiggle size {delta} must be below min(1/constant, separation radius) = {limit}"
            )));
        }
        let after = self.interpolation_constant(&moved)?;
        Ok(JiggleReport {
            before,
            after,
            ratio: after / before,
        })
    }

    /// Constant of `Gamma ∪ {z}` in the section rebuilt with `phi + eps |zeta - z|^2`.
    pub fn add_point_experiment(&self, gamma: &PointSequence, z: ComplexPoint, eps: f64) -> Result<f64> {
        if !(eps > 0.0) {
            return Err(Error::Argument(format!("bump strength must be positive, got {eps}")));
        }
        if let Some(g) = gamma.points().iter().find(|g| (*g - z).norm() <= 1e-12) {
            return Err(Error::Argument(format!("added point {z} coincides with {g}")));
        }
        // monomials about the minimizer of a bumped quadratic keep the Gram matrix diagonal
        let origin = match self.weight.kind() {
            WeightKind::Quadratic { a } if *a > 0.0 => z * (eps / (a + eps)),
            _ => self.origin,
        };
        let bumped = self.rebuild_centered(WeightModel::bumped(self.weight.clone(), z, eps)?, origin)?;
        bumped.interpolation_constant(&gamma.with_point(z)?)
    }

    /// Points and weights of a tensor rule on the domain with the section's
    /// radial nodes and `angular` equispaced angles, including the area form.
    pub fn quadrature_rule(&self, angular: usize) -> Vec<(ComplexPoint, f64)> {
        let q = self.quadrature;
        let radial: Vec<(f64, f64)> = match self.domain {
            SpaceDomain::Disk { radius } => composite_nodes(0.0, radius, q.panel_width, q.nodes_per_panel)
                .into_iter()
                .map(|(r, w)| (r, w * r))
                .collect(),
            SpaceDomain::Annulus { inner, outer } => {
                composite_nodes(inner.ln(), outer.ln(), q.panel_width, q.nodes_per_panel)
                    .into_iter()
                    .map(|(t, w)| (t.exp(), w))
                    .collect()
            }
        };
        let h = TAU / angular as f64;
        let origin = self.origin;
        radial
            .iter()
            .flat_map(|&(rho, w)| (0..angular).map(move |k| (origin + Complex64::from_polar(rho, h * k as f64), w * h)))
            .collect()
    }

    /// Default for a disk section of the Fock-type weight `a |z|^2`.
    pub fn fock_radius(a: f64, n: usize) -> f64 {
        let peak = ((2 * n + 1) as f64 / (2.0 * a)).sqrt();
        // the tail past the peak falls like exp(-2a (rho - peak)^2)
        peak + ((12.0 * 10f64.ln() + 2.0) / (2.0 * a)).sqrt()
    }
}

fn closest_pair(gamma: &PointSequence) -> Option<(usize, usize, f64)> {
    let p = gamma.points();
    let mut best: Option<(usize, usize, f64)> = None;
    for i in 0..p.len() {
        for j in i + 1..p.len() {
            let d = (p[i] - p[j]).norm();
            if best.is_none_or(|b| d < b.2) {
                best = Some((i, j, d));
            }
        }
    }
    best
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InterpolationResult {
    /// Coordinates in the orthonormal basis.
    pub coefficients: Vec<Complex64>,
    pub space_norm: f64,
    /// `f(gamma) e^{-phi(gamma)/2}` at each point.
    pub achieved_values: Vec<Complex64>,
    pub residual: f64,
    pub constant_estimate: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConstantReport {
    pub constant: f64,
    pub sigma_min: f64,
    pub sigma_max: f64,
    pub points: usize,
    pub dimension: usize,
    pub rank_deficient: bool,
    /// Indices and distance of the two closest points.
    pub closest_pair: Option<(usize, usize, f64)>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct JiggleReport {
    pub before: f64,
    pub after: f64,
    pub ratio: f64,
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn c(re: f64, im: f64) -> ComplexPoint {
        Complex64::new(re, im)
    }

    /// `ln(pi n!)`
    fn log_fock_norm(n: i64) -> f64 {
        PI.ln() + (1..=n).map(|k| (k as f64).ln()).sum::<f64>()
    }

    #[test]
    fn fock_gram_diagonal() {
        let r = TruncatedSpace::fock_radius(1.0, 10);
        let s = TruncatedSpace::build(SpaceDomain::Disk { radius: r }, WeightModel::quadratic(1.0), 10, QuadratureSpec::default())
            .unwrap();
        for (n, l) in s.log_gram_diagonal() {
            assert!((l - log_fock_norm(n)).abs() < 1e-10, "n = {n}");
        }
        assert!(s.diagnostics().max_off_diagonal < 1e-12);
        assert!(s.diagnostics().tail_fraction < 1e-8);
    }

    #[test]
    fn centered_section_of_a_bumped_fock_weight() {
        // |z|^2 + eps |z - p|^2 = (1 + eps) |z - c|^2 + eps |p|^2 / (1 + eps) with c = eps p / (1 + eps)
        let (eps, p) = (0.2, c(1.5, -2.0));
        let center = p * (eps / (1.0 + eps));
        let w = WeightModel::bumped(WeightModel::quadratic(1.0), p, eps).unwrap();
        let a = 1.0 + eps;
        let s = TruncatedSpace::build_centered(
            SpaceDomain::Disk { radius: TruncatedSpace::fock_radius(a, 40) },
            center,
            w,
            40,
            QuadratureSpec::default(),
            Exec::Sequential,
        )
        .unwrap();
        let shift = eps * p.norm_sqr() / a;
        for (n, l) in s.log_gram_diagonal() {
            let exact = log_fock_norm(n) - (n + 1) as f64 * a.ln() - shift;
            assert!((l - exact).abs() < 1e-10, "n = {n}");
        }
        assert!(s.diagnostics().max_off_diagonal < 1e-12);
        assert_relative_eq!(s.weighted_kernel_diag(center + c(0.7, 0.4)).unwrap(), a / PI, max_relative = 1e-8);
        assert!(TruncatedSpace::build_centered(
            SpaceDomain::Annulus { inner: 0.5, outer: 2.0 },
            c(0.1, 0.0),
            WeightModel::log_squared(1.0),
            2,
            QuadratureSpec::default(),
            Exec::Sequential,
        )
        .is_err());
    }

    #[test]
    fn unit_disk_without_weight() {
        let s = TruncatedSpace::build(SpaceDomain::Disk { radius: 1.0 }, WeightModel::quadratic(0.0), 3, QuadratureSpec::default())
            .unwrap();
        for (n, l) in s.log_gram_diagonal() {
            assert_relative_eq!(l.exp(), PI / (n as f64 + 1.0), max_relative = 1e-13);
        }
        let s0 = TruncatedSpace::build(SpaceDomain::Disk { radius: 1.0 }, WeightModel::quadratic(0.0), 0, QuadratureSpec::default())
            .unwrap();
        assert_relative_eq!(s0.kernel_diag(c(0.0, 0.0)).unwrap(), 1.0 / PI, max_relative = 1e-13);
        let one = s0.one_point_interpolant(c(0.0, 0.0)).unwrap();
        assert_relative_eq!(one.space_norm.powi(2), PI, max_relative = 1e-13);
    }

    #[test]
    fn one_by_one_gram_is_total_mass() {
        let w = WeightModel::radial_poly(vec![0.3, 0.5, 0.1]);
        let s = TruncatedSpace::build(SpaceDomain::Disk { radius: 2.0 }, w.clone(), 0, QuadratureSpec::default()).unwrap();
        let rule = crate::quadrature::GaussLegendre::new(64);
        let mass = rule.integrate(0.0, 2.0, |rho| TAU * rho * (-w.value(c(rho, 0.0)).unwrap()).exp());
        assert_relative_eq!(s.log_gram_diagonal()[0].1.exp(), mass, max_relative = 1e-12);
    }

    #[test]
    fn laurent_section_on_cylinder() {
        // (log|z|)^2 with dA/|z|^2: int e^{2 n t - t^2} dt d theta over the strip, closed form on R
        let s = TruncatedSpace::build(
            SpaceDomain::Annulus {
                inner: (-12.0f64).exp(),
                outer: 12.0f64.exp(),
            },
            WeightModel::log_squared(1.0),
            3,
            QuadratureSpec::default(),
        )
        .unwrap();
        for (n, l) in s.log_gram_diagonal() {
            let exact = TAU * PI.sqrt() * ((n * n) as f64).exp();
            assert_relative_eq!(l.exp(), exact, max_relative = 1e-10);
        }
        assert_eq!(s.dimension(), 7);
    }

    #[test]
    fn invalid_domains_are_rejected() {
        let e = TruncatedSpace::build(SpaceDomain::Disk { radius: 0.0 }, WeightModel::quadratic(1.0), 3, QuadratureSpec::default());
        assert!(matches!(e, Err(Error::Argument(_))));
        let e = TruncatedSpace::build(
            SpaceDomain::Disk { radius: 3.0 },
            WeightModel::log_squared(1.0),
            3,
            QuadratureSpec::default(),
        );
        assert!(matches!(e, Err(Error::Domain(_))));
    }

    #[test]
    fn jiggle_rejects_large_offsets() {
        let s = TruncatedSpace::build(SpaceDomain::Disk { radius: 8.0 }, WeightModel::quadratic(1.0), 30, QuadratureSpec::default())
            .unwrap();
        let g = PointSequence::new(vec![c(0.0, 0.0), c(2.5, 0.0)], crate::sequences::Ambient::Plane).unwrap();
        let zero = vec![c(0.0, 0.0); 2];
        let rep = s.jiggle_experiment(&g, &zero, 0.1).unwrap();
        assert_eq!(rep.before, rep.after);
        let big = vec![c(0.02, 0.0); 2];
        assert!(s.jiggle_experiment(&g, &big, 0.1).is_err());
        assert!(s.jiggle_experiment(&g, &zero, 5.0).is_err());
    }
}

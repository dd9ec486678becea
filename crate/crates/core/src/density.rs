//! Upper-density estimators: Euclidean, cylinder cover, per-end surface, and
//! raw density.
//!
//! The ratio at a center `z` and radius `r` is
//! `2 pi * upsilon_mass(z, r) / kernel_laplacian_mass(z, r)`. The limsup over
//! radii and sup over centers are replaced by a finite radius ladder and a
//! sampled set of centers; the top tier is reported as the estimate.

use std::f64::consts::{PI, TAU};
use std::io::Write;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::divisors::upsilon_mass_unchecked;
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::geometry::{reduce_angle, ComplexPoint, EndKind, SurfaceModel};
use crate::sequences::{lift_sequence, Ambient, PointSequence, Rect};
use crate::weights::{kernel_laplacian_mass, CoverPullback, Scaled, Weight, WeightModel};

pub const DEFAULT_LADDER: [f64; 3] = [10.0, 20.0, 40.0];

/// How centers are chosen for the sup over `z`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", deny_unknown_fields)]
pub enum CenterSampler {
    /// Grid with the given step covering the window.
    Grid { window: Rect, step: f64 },
    /// Half-open cell `[origin, origin + side)` sampled at the given step; for periodic sequences.
    Cell {
        origin: [f64; 2],
        side_x: f64,
        side_y: f64,
        step: f64,
    },
    Explicit { points: Vec<[f64; 2]> },
    /// Grid plus `per_point` uniform random centers within `jitter` of each
    /// point of the sequence inside the window.
    Jittered {
        window: Rect,
        step: f64,
        per_point: usize,
        jitter: f64,
        seed: u64,
    },
}

impl CenterSampler {
    /// One fundamental cell at step `min(0.25, separation / 2)`.
    pub fn lattice_cell(sx: f64, sy: f64, separation: f64) -> Self {
        CenterSampler::Cell {
            origin: [0.0, 0.0],
            side_x: sx,
            side_y: sy,
            step: 0.25f64.min(separation / 2.0),
        }
    }

    pub fn centers(&self, gamma: &[ComplexPoint]) -> Result<Vec<ComplexPoint>> {
        let positive = |step: f64| {
            if step > 0.0 && step.is_finite() {
                Ok(())
            } else {
                Err(Error::Argument(format!("sampler step must be positive, got {step}")))
            }
        };
        let grid = |w: &Rect, step: f64| {
            let nx = ((w.x1 - w.x0) / step + 1e-9).floor() as usize + 1;
            let ny = ((w.y1 - w.y0) / step + 1e-9).floor() as usize + 1;
            let mut out = Vec::with_capacity(nx * ny);
            for j in 0..ny {
                for i in 0..nx {
                    out.push(Complex64::new(w.x0 + step * i as f64, w.y0 + step * j as f64));
                }
            }
            out
        };
        Ok(match self {
            CenterSampler::Grid { window, step } => {
                positive(*step)?;
                grid(window, *step)
            }
            CenterSampler::Cell {
                origin,
                side_x,
                side_y,
                step,
            } => {
                positive(*step)?;
                let nx = ((side_x / step) - 1e-9).ceil().max(1.0) as usize;
                let ny = ((side_y / step) - 1e-9).ceil().max(1.0) as usize;
                let mut out = Vec::with_capacity(nx * ny);
                for j in 0..ny {
                    for i in 0..nx {
                        out.push(Complex64::new(origin[0] + step * i as f64, origin[1] + step * j as f64));
                    }
                }
                out
            }
            CenterSampler::Explicit { points } => points.iter().map(|p| Complex64::new(p[0], p[1])).collect(),
            CenterSampler::Jittered {
                window,
                step,
                per_point,
                jitter,
                seed,
            } => {
                positive(*step)?;
                let mut out = grid(window, *step);
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                for g in gamma.iter().filter(|g| window.contains(**g)) {
                    for _ in 0..*per_point {
                        let rho = jitter * rng.gen::<f64>().sqrt();
                        let theta = rng.gen_range(0.0..TAU);
                        out.push(g + Complex64::from_polar(rho, theta));
                    }
                }
                out
            }
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RadiusTier {
    pub r: f64,
    pub sup_ratio: f64,
    pub argmax: [f64; 2],
    pub admissible: usize,
    pub skipped: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RatioSample {
    pub r: f64,
    pub center: [f64; 2],
    pub ratio: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DensityReport {
    pub per_radius: Vec<RadiusTier>,
    /// Sup of the ratio over the largest radius of the ladder.
    pub extrapolated: f64,
    pub ladder: Vec<f64>,
    /// Sampled centers whose unit disk contains points of the sequence.
    pub centers_flagged: Vec<[f64; 2]>,
    pub samples: Vec<RatioSample>,
}

impl DensityReport {
    /// Flat table with columns `r,center_re,center_im,ratio`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let csv_err = |e: csv::Error| Error::Io(std::io::Error::other(e));
        out.write_record(["r", "center_re", "center_im", "ratio"]).map_err(csv_err)?;
        for s in &self.samples {
            out.serialize((s.r, s.center[0], s.center[1], s.ratio)).map_err(csv_err)?;
        }
        out.flush()?;
        Ok(())
    }
}

fn check_ladder(ladder: &[f64]) -> Result<()> {
    if ladder.is_empty() {
        return Err(Error::Argument("radius ladder is empty".into()));
    }
    if ladder.iter().any(|r| !(*r > 1.0) || !r.is_finite()) {
        return Err(Error::Argument(format!("ladder radii must exceed 1, got {ladder:?}")));
    }
    if ladder.windows(2).any(|p| p[1] <= p[0]) {
        return Err(Error::Argument(format!("ladder must be strictly increasing, got {ladder:?}")));
    }
    Ok(())
}

fn denominator(w: &dyn Weight, z: ComplexPoint, r: f64) -> Result<f64> {
    w.check_disk(z, r)?;
    let den = match w.constant_laplacian() {
        Some(c) => c * PI * r * r,
        None => kernel_laplacian_mass(w, z, r)?,
    };
    if !(den > 0.0) {
        return Err(Error::numeric(
            "kernel_laplacian_mass",
            format!("weight is flat on D_{r}({z}): kernel-weighted Laplacian mass {den:e}"),
        ));
    }
    Ok(den)
}

fn ratio_points(points: &[ComplexPoint], w: &dyn Weight, z: ComplexPoint, r: f64) -> Result<f64> {
    let den = denominator(w, z, r)?;
    Ok(TAU * upsilon_mass_unchecked(points, z, r) / den)
}

/// `2 pi upsilon_mass(z, r) / kernel_laplacian_mass(z, r)`.
pub fn ratio_at(gamma: &PointSequence, w: &dyn Weight, z: ComplexPoint, r: f64) -> Result<f64> {
    if !(r > 1.0) {
        return Err(Error::Argument(format!("ratio_at: radius must exceed 1, got {r}")));
    }
    ratio_points(gamma.points(), w, z, r)
}

/// Sup of the ratio per ladder radius over centers whose disk lies in the
/// window and passes `admit`.
fn sweep(
    points: &[ComplexPoint],
    w: &dyn Weight,
    window: Rect,
    ladder: &[f64],
    centers: &[ComplexPoint],
    admit: &(dyn Fn(ComplexPoint, f64) -> bool + Sync),
    exec: Exec,
) -> Result<DensityReport> {
    check_ladder(ladder)?;
    if centers.is_empty() {
        return Err(Error::Argument("center sampler produced no centers".into()));
    }
    let mut per_radius = Vec::with_capacity(ladder.len());
    let mut samples = Vec::new();
    for &r in ladder {
        let ok: Vec<ComplexPoint> = centers
            .iter()
            .copied()
            .filter(|z| window.contains_disk(*z, r) && admit(*z, r))
            .collect();
        if ok.is_empty() {
            return Err(Error::Argument(format!(
                "no sampled center has D_{r} inside the data window {window:?}; the window is too small for this radius"
            )));
        }
        let ratios = exec.map(&ok, |z| ratio_points(points, w, *z, r));
        let mut best = (f64::NEG_INFINITY, ok[0]);
        for (z, q) in ok.iter().zip(ratios) {
            let q = q?;
            if q > best.0 {
                best = (q, *z);
            }
            samples.push(RatioSample {
                r,
                center: [z.re, z.im],
                ratio: q,
            });
        }
        per_radius.push(RadiusTier {
            r,
            sup_ratio: best.0,
            argmax: [best.1.re, best.1.im],
            admissible: ok.len(),
            skipped: centers.len() - ok.len(),
        });
    }
    let centers_flagged = centers
        .iter()
        .filter(|z| points.iter().any(|g| (g - *z).norm_sqr() < 1.0))
        .map(|z| [z.re, z.im])
        .collect();
    Ok(DensityReport {
        extrapolated: per_radius.last().map_or(0.0, |t| t.sup_ratio),
        per_radius,
        ladder: ladder.to_vec(),
        centers_flagged,
        samples,
    })
}

/// Euclidean upper density of a sequence given on the data window.
pub fn upper_density_euclidean(
    gamma: &PointSequence,
    w: &dyn Weight,
    window: Rect,
    ladder: &[f64],
    sampler: &CenterSampler,
) -> Result<DensityReport> {
    upper_density_euclidean_with(gamma, w, window, ladder, sampler, Exec::default())
}

pub fn upper_density_euclidean_with(
    gamma: &PointSequence,
    w: &dyn Weight,
    window: Rect,
    ladder: &[f64],
    sampler: &CenterSampler,
    exec: Exec,
) -> Result<DensityReport> {
    let centers = sampler.centers(gamma.points())?;
    sweep(gamma.points(), w, window, ladder, &centers, &|_, _| true, exec)
}

fn strip_centers(centers: Vec<ComplexPoint>, window: &Rect) -> Vec<ComplexPoint> {
    let base = 0.5 * (window.y0 + window.y1) - PI;
    centers
        .into_iter()
        .map(|z| Complex64::new(z.re, reduce_angle(z.im, base)))
        .collect()
}

/// Cover density: the Euclidean density of the lifted sequence against the
/// pulled-back weight. `cover_window` is the data window upstairs; centers
/// are reduced into the period strip around its middle.
pub fn cover_density(
    gamma: &PointSequence,
    w: &WeightModel,
    cover_window: Rect,
    ladder: &[f64],
    sampler: &CenterSampler,
) -> Result<DensityReport> {
    cover_density_with(gamma, w, cover_window, ladder, sampler, Exec::default())
}

pub fn cover_density_with(
    gamma: &PointSequence,
    w: &WeightModel,
    cover_window: Rect,
    ladder: &[f64],
    sampler: &CenterSampler,
    exec: Exec,
) -> Result<DensityReport> {
    if gamma.ambient() == Ambient::Plane {
        return Err(Error::Argument("cover_density expects a sequence of the punctured plane".into()));
    }
    let lifted = lift_sequence(gamma, cover_window)?;
    let pulled = CoverPullback::new(w)?;
    let centers = strip_centers(sampler.centers(lifted.points())?, &cover_window);
    sweep(lifted.points(), &pulled, cover_window, ladder, &centers, &|_, _| true, exec)
}

/// Data for one end of a surface, in that end's chart coordinates.
///
/// Euclidean ends take a plane sequence and a chart window; cylindrical ends
/// take a punctured-plane sequence and a window on the cover.
#[derive(Clone, Debug)]
pub struct EndData {
    pub gamma: PointSequence,
    pub weight: WeightModel,
    pub window: Rect,
    pub sampler: CenterSampler,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SurfaceDensityReport {
    pub per_end: Vec<DensityReport>,
    pub extrapolated: f64,
    pub argmax_end: usize,
}

/// Max over ends of the per-end density. Chart coordinates are multiplied by
/// the end's length factor, and averaging disks must stay outside the chart's
/// inner radius.
pub fn surface_density(model: &SurfaceModel, ends: &[EndData], ladder: &[f64]) -> Result<SurfaceDensityReport> {
    surface_density_with(model, ends, ladder, Exec::default())
}

pub fn surface_density_with(
    model: &SurfaceModel,
    ends: &[EndData],
    ladder: &[f64],
    exec: Exec,
) -> Result<SurfaceDensityReport> {
    if ends.len() != model.ends().len() {
        return Err(Error::Argument(format!(
            "surface has {} ends but {} end data sets were given",
            model.ends().len(),
            ends.len()
        )));
    }
    let mut per_end = Vec::with_capacity(ends.len());
    for (desc, data) in model.ends().iter().zip(ends) {
        let k = desc.length_factor();
        let rho0 = desc.chart_inner_radius;
        let report = match desc.kind {
            EndKind::Euclidean => {
                if data.gamma.ambient() != Ambient::Plane && !data.gamma.is_empty() {
                    return Err(Error::Argument("Euclidean end expects a plane sequence".into()));
                }
                let pts: Vec<ComplexPoint> = data.gamma.points().iter().map(|p| p * k).collect();
                let w = Scaled::new(&data.weight, k);
                let centers: Vec<ComplexPoint> =
                    data.sampler.centers(data.gamma.points())?.into_iter().map(|z| z * k).collect();
                let inner = k * rho0;
                sweep(
                    &pts,
                    &w,
                    data.window.scaled(k),
                    ladder,
                    &centers,
                    &|z, r| z.norm() - r >= inner,
                    exec,
                )?
            }
            EndKind::Cylindrical => {
                let lifted = if data.gamma.is_empty() {
                    Vec::new()
                } else {
                    lift_sequence(&data.gamma, data.window)?.points().iter().map(|p| p * k).collect()
                };
                let pulled = CoverPullback::new(&data.weight)?;
                let w = Scaled::new(&pulled, k);
                let centers: Vec<ComplexPoint> = strip_centers(data.sampler.centers(&lifted)?, &data.window)
                    .into_iter()
                    .map(|z| z * k)
                    .collect();
                let inner = k * rho0.ln();
                sweep(
                    &lifted,
                    &w,
                    data.window.scaled(k),
                    ladder,
                    &centers,
                    &|z, r| z.re - r >= inner,
                    exec,
                )?
            }
        };
        per_end.push(report);
    }
    let (argmax_end, extrapolated) = per_end
        .iter()
        .enumerate()
        .map(|(i, rep)| (i, rep.extrapolated))
        .fold((0, f64::NEG_INFINITY), |best, cur| if cur.1 > best.1 { cur } else { best });
    Ok(SurfaceDensityReport {
        per_end,
        extrapolated,
        argmax_end,
    })
}

/// Sup over admissible centers of `(upsilon_mass / (pi r^2)) / laplacian_density(z)`.
pub fn raw_density(
    gamma: &PointSequence,
    w: &dyn Weight,
    window: Rect,
    r: f64,
    sampler: &CenterSampler,
) -> Result<f64> {
    check_ladder(&[r])?;
    let centers: Vec<ComplexPoint> = sampler
        .centers(gamma.points())?
        .into_iter()
        .filter(|z| window.contains_disk(*z, r))
        .collect();
    if centers.is_empty() {
        return Err(Error::Argument(format!("no sampled center has D_{r} inside the data window")));
    }
    let mut best = f64::NEG_INFINITY;
    for z in centers {
        let lap = w.laplacian_density(z)?;
        if !(lap > 0.0) {
            return Err(Error::numeric("raw_density", format!("Laplacian density {lap:e} at {z}")));
        }
        let m = upsilon_mass_unchecked(gamma.points(), z, r) / (PI * r * r);
        best = best.max(m / lap);
    }
    Ok(best)
}

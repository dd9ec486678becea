//! Scenario files (TOML). The schema is documented in `docs/config.md`.

use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use flatlab_core::bergman::QuadratureSpec;
use flatlab_core::density::CenterSampler;
use flatlab_core::geometry::{EndDescriptor, EndKind, SurfaceModel};
use flatlab_core::sequences::{exp_lattice, lattice, rect_lattice, Ambient, PointSequence, Rect};
use flatlab_core::weights::{GridWeight, WeightDomain, WeightModel};
use num_complex::Complex64;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskKind {
    Density,
    Interp,
    Kernel,
    Jensen,
    Sweep,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    #[serde(default)]
    pub seed: u64,
    pub task: TaskKind,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub geometry: GeometrySpec,
    pub weight: Option<WeightSpec>,
    pub sequence: Option<SequenceSpec>,
    pub density: Option<DensitySpec>,
    pub interp: Option<InterpSpec>,
    pub kernel: Option<KernelSpec>,
    pub jensen: Option<JensenSpec>,
    pub sweep: Option<SweepSpec>,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("runs")
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", deny_unknown_fields)]
pub enum GeometrySpec {
    #[default]
    Plane,
    PuncturedPlane,
    Surface {
        ends: Vec<EndSpec>,
        #[serde(default)]
        core_label: String,
    },
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EndSpec {
    pub kind: EndKind,
    #[serde(default = "one")]
    pub scale: f64,
    #[serde(default = "one")]
    pub chart_inner_radius: f64,
}

fn one() -> f64 {
    1.0
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", deny_unknown_fields)]
pub enum WeightSpec {
    Quadratic {
        a: f64,
    },
    LogSquared {
        a: f64,
    },
    RadialPoly {
        coeffs: Vec<f64>,
    },
    /// Grid file relative to the scenario file.
    Grid {
        file: PathBuf,
        #[serde(default = "plane_domain")]
        domain: WeightDomain,
        laplacian_tolerance: Option<f64>,
    },
}

fn plane_domain() -> WeightDomain {
    WeightDomain::Plane
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", deny_unknown_fields)]
pub enum SequenceSpec {
    Lattice {
        spacing: f64,
        window: Rect,
        clip_radius: Option<f64>,
    },
    RectLattice {
        sx: f64,
        sy: f64,
        window: Rect,
        clip_radius: Option<f64>,
    },
    /// `exp(a m + 2 pi i n / k)` with `a m` in `[re_lo, re_hi]`.
    ExpLattice {
        a: f64,
        k: usize,
        re_lo: f64,
        re_hi: f64,
    },
    /// Uniform points in the window, drawn from the scenario seed.
    Random {
        count: usize,
        window: Rect,
    },
    /// Point file relative to the scenario file.
    File {
        path: PathBuf,
    },
    Empty {
        #[serde(default = "plane_ambient")]
        ambient: AmbientSpec,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AmbientSpec {
    Plane,
    PuncturedPlane,
}

fn plane_ambient() -> AmbientSpec {
    AmbientSpec::Plane
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DensityMode {
    #[default]
    Euclidean,
    Cover,
    Raw,
    Surface,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DensitySpec {
    #[serde(default)]
    pub mode: DensityMode,
    #[serde(default = "default_ladder")]
    pub ladder: Vec<f64>,
    /// Data window; on the cover for cylindrical data. Defaults to the sequence window.
    pub window: Option<Rect>,
    pub sampler: Option<CenterSampler>,
    /// One entry per surface end, in the order of `geometry.ends`.
    #[serde(default)]
    pub ends: Vec<EndDataSpec>,
}

fn default_ladder() -> Vec<f64> {
    flatlab_core::density::DEFAULT_LADDER.to_vec()
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EndDataSpec {
    pub sequence: SequenceSpec,
    pub weight: WeightSpec,
    pub window: Rect,
    pub sampler: CenterSampler,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnnulusSpec {
    pub inner: f64,
    pub outer: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InterpSpec {
    pub n: usize,
    /// Disk radius; defaults to the Fock tail radius for quadratic weights.
    pub radius: Option<f64>,
    /// Use a Laurent section on this annulus instead of a disk.
    pub annulus: Option<AnnulusSpec>,
    #[serde(default)]
    pub quadrature: QuadratureSpec,
    /// Second section size `n + stability_step` reported next to `n`; 0 disables.
    #[serde(default = "default_stability_step")]
    pub stability_step: usize,
    /// Also solve the minimal-norm problem with unit targets.
    #[serde(default)]
    pub unit_targets: bool,
    pub jiggle: Option<JiggleSpec>,
    pub add_point: Option<AddPointSpec>,
}

fn default_stability_step() -> usize {
    20
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JiggleSpec {
    pub delta: f64,
    #[serde(default = "one_usize")]
    pub trials: usize,
}

fn one_usize() -> usize {
    1
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AddPointSpec {
    pub z: [f64; 2],
    pub eps: Vec<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelSpec {
    pub n: usize,
    pub radius: Option<f64>,
    #[serde(default)]
    pub quadrature: QuadratureSpec,
    /// Square grid `[-half, half]^2` at `step`, clipped to the disk of radius `half`.
    pub grid_half: f64,
    pub grid_step: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JensenSpec {
    #[serde(default = "default_cases")]
    pub cases: usize,
    #[serde(default = "default_degree")]
    pub degree: usize,
}

fn default_cases() -> usize {
    20
}

fn default_degree() -> usize {
    3
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepVariable {
    /// Lattice spacing of the sequence.
    S,
    /// Bump strength of the add-point experiment.
    Eps,
    /// Jiggle size.
    Delta,
    /// Section size `n`.
    Degree,
    /// Single radius replacing the density ladder.
    R,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub variable: SweepVariable,
    pub values: Vec<f64>,
    pub task: TaskKind,
}

impl Scenario {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Input(format!("cannot read {}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
    }
}

/// Resolves relative paths and seeds random generators for one scenario.
pub struct Context {
    pub base_dir: PathBuf,
    pub seed: u64,
}

impl Context {
    fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn weight(&self, spec: &WeightSpec) -> Result<WeightModel, CliError> {
        Ok(match spec {
            WeightSpec::Quadratic { a } => WeightModel::quadratic(*a),
            WeightSpec::LogSquared { a } => WeightModel::log_squared(*a),
            WeightSpec::RadialPoly { coeffs } => WeightModel::radial_poly(coeffs.clone()),
            WeightSpec::Grid {
                file,
                domain,
                laplacian_tolerance,
            } => {
                let path = self.resolve(file);
                let f = File::open(&path)
                    .map_err(|e| CliError::Input(format!("cannot open weight grid {}: {e}", path.display())))?;
                let mut g = GridWeight::read_from(BufReader::new(f)).map_err(|e| CliError::from_core(e, &path))?;
                if let Some(t) = laplacian_tolerance {
                    g.laplacian_tolerance = *t;
                }
                WeightModel::grid(g, *domain)
            }
        })
    }

    pub fn sequence(&self, spec: &SequenceSpec, rng: &mut ChaCha8Rng) -> Result<PointSequence, CliError> {
        let clip = |g: PointSequence, r: &Option<f64>| match r {
            Some(r) => g.filter(|p| p.norm() <= *r),
            None => g,
        };
        Ok(match spec {
            SequenceSpec::Lattice {
                spacing,
                window,
                clip_radius,
            } => clip(lattice(*spacing, *window)?, clip_radius),
            SequenceSpec::RectLattice {
                sx,
                sy,
                window,
                clip_radius,
            } => clip(rect_lattice(*sx, *sy, *window)?, clip_radius),
            SequenceSpec::ExpLattice { a, k, re_lo, re_hi } => exp_lattice(*a, *k, *re_lo, *re_hi)?,
            SequenceSpec::Random { count, window } => {
                let w = Rect::new(window.x0, window.x1, window.y0, window.y1)?;
                let pts = (0..*count)
                    .map(|_| Complex64::new(rng.gen_range(w.x0..=w.x1), rng.gen_range(w.y0..=w.y1)))
                    .collect();
                PointSequence::new(pts, Ambient::Plane)?
            }
            SequenceSpec::File { path } => {
                let path = self.resolve(path);
                let f = File::open(&path)
                    .map_err(|e| CliError::Input(format!("cannot open sequence file {}: {e}", path.display())))?;
                PointSequence::read_from(BufReader::new(f)).map_err(|e| CliError::from_core(e, &path))?
            }
            SequenceSpec::Empty { ambient } => PointSequence::empty(match ambient {
                AmbientSpec::Plane => Ambient::Plane,
                AmbientSpec::PuncturedPlane => Ambient::PuncturedPlane,
            }),
        })
    }
}

/// The window a sequence spec was generated on, if it has one.
pub fn sequence_window(spec: &SequenceSpec) -> Option<Rect> {
    match spec {
        SequenceSpec::Lattice { window, .. }
        | SequenceSpec::RectLattice { window, .. }
        | SequenceSpec::Random { window, .. } => Some(*window),
        _ => None,
    }
}

pub fn surface_model(geometry: &GeometrySpec) -> Result<Option<SurfaceModel>, CliError> {
    match geometry {
        GeometrySpec::Surface { ends, core_label } => {
            let ends = ends
                .iter()
                .map(|e| EndDescriptor::new(e.kind, e.scale, e.chart_inner_radius))
                .collect::<Result<Vec<_>, _>>()?;
            Ok(Some(SurfaceModel::new(ends, core_label.clone())?))
        }
        _ => Ok(None),
    }
}

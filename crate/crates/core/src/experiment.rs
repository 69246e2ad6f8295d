//! Batch restoration over images, missing ratios, solvers and modes.
//!
//! One mask is drawn per (image, ratio) and shared by every solver and mode,
//! so rows are paired. The coarse completion of each (image, ratio, solver)
//! is computed once and reused by the pure, coarse-to-fine and short-cut
//! modes.
//!
//! Output layout under `output_dir`:
//!
//! ```text
//! results.csv              one row per cell
//! rpr.csv                  relative patch rank of every ground truth
//! masks/<cell>.c2fm        shared masks
//! images/<cell>.png        restored images
//! logs/<cell>.jsonl        stage logs of the refined modes
//! ```

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::c2f::{complete_coarse, refine, write_stage_log, C2FPlan, SHORTCUT_EPSILON0};
use crate::error::{Error, Result};
use crate::io::{generate_mask, load_image, save_image, MaskFile, MaskMode};
use crate::metrics::{psnr, rpr_table, rse, stage_label};
use crate::solvers::{SolverConfig, SolverKind};
use crate::tensor::{DenseTensor, ObservationMask};

/// First line of `results.csv`.
pub const RESULTS_HEADER: &str = "# c2f-results v1";
/// First line of `rpr.csv`.
pub const RPR_HEADER: &str = "# c2f-rpr v1";
pub const RESULTS_COLUMNS: &str = "image,ratio,solver,mode,psnr,rse,wall_time,seed,status";

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Coarse completion only.
    Pure,
    /// Coarse stage and every fine stage.
    C2f,
    /// Coarse stage and the finest stage.
    Shortcut,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Pure => "pure",
            Mode::C2f => "c2f",
            Mode::Shortcut => "shortcut",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "pure" => Ok(Mode::Pure),
            "c2f" | "full" => Ok(Mode::C2f),
            "shortcut" | "short-cut" => Ok(Mode::Shortcut),
            other => Err(Error::Config(format!("unknown mode {other:?}"))),
        }
    }
}

/// Fine-stage settings shared by all solvers.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StageSettings {
    pub stages: usize,
    pub epsilon0: f64,
    pub shortcut_epsilon0: f64,
    pub mu: f64,
    pub overlap: Vec<usize>,
}

impl Default for StageSettings {
    fn default() -> Self {
        let plan = C2FPlan::default();
        Self {
            stages: plan.stages,
            epsilon0: plan.epsilon0,
            shortcut_epsilon0: SHORTCUT_EPSILON0,
            mu: plan.mu,
            overlap: plan.overlap,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentSpec {
    pub images: Vec<PathBuf>,
    pub missing_ratios: Vec<f64>,
    pub solvers: Vec<SolverKind>,
    pub modes: Vec<Mode>,
    pub mask_seed: u64,
    pub mask_mode: MaskMode,
    pub output_dir: PathBuf,
    pub plan: StageSettings,
    /// Per-solver settings, keyed by solver name; missing entries use the
    /// defaults.
    pub solver_config: BTreeMap<String, SolverConfig>,
    /// Finest grid of the relative patch rank table.
    pub rpr_stages: usize,
    pub write_images: bool,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        Self {
            images: Vec::new(),
            missing_ratios: vec![0.7, 0.8, 0.9],
            solvers: vec![SolverKind::TraceNorm, SolverKind::Tv2],
            modes: vec![Mode::Pure, Mode::C2f],
            mask_seed: 0,
            mask_mode: MaskMode::PerEntry,
            output_dir: PathBuf::from("c2f-out"),
            plan: StageSettings::default(),
            solver_config: BTreeMap::new(),
            rpr_stages: 3,
            write_images: true,
        }
    }
}

impl ExperimentSpec {
    /// Reads a TOML spec. Relative image and output paths are resolved
    /// against the spec file's directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path)?;
        let mut spec: Self =
            toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        if let Some(dir) = path.parent() {
            for p in spec
                .images
                .iter_mut()
                .chain(std::iter::once(&mut spec.output_dir))
            {
                if p.is_relative() {
                    *p = dir.join(&*p);
                }
            }
        }
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.images.is_empty()
            || self.missing_ratios.is_empty()
            || self.solvers.is_empty()
            || self.modes.is_empty()
        {
            return Err(Error::Config(
                "images, missing_ratios, solvers and modes must be nonempty".into(),
            ));
        }
        for &r in &self.missing_ratios {
            if !(0.0..1.0).contains(&r) {
                return Err(Error::InvalidRatio(r));
            }
        }
        for key in self.solver_config.keys() {
            key.parse::<SolverKind>()?;
        }
        for &s in &self.solvers {
            self.plan_for(s, Mode::C2f).validate(3)?;
        }
        Ok(())
    }

    pub fn config_for(&self, solver: SolverKind) -> SolverConfig {
        self.solver_config
            .iter()
            .find(|(k, _)| k.parse::<SolverKind>().ok() == Some(solver))
            .map(|(_, c)| c.clone())
            .unwrap_or_default()
    }

    pub fn plan_for(&self, solver: SolverKind, mode: Mode) -> C2FPlan {
        let shortcut = mode == Mode::Shortcut;
        C2FPlan {
            stages: self.plan.stages,
            epsilon0: if shortcut {
                self.plan.shortcut_epsilon0
            } else {
                self.plan.epsilon0
            },
            mu: self.plan.mu,
            overlap: self.plan.overlap.clone(),
            solver,
            config: self.config_for(solver),
            shortcut,
            seed: self.mask_seed,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentRow {
    pub image: String,
    pub ratio: f64,
    pub solver: SolverKind,
    pub mode: Mode,
    pub psnr: f64,
    pub rse: f64,
    /// Seconds, including the shared coarse stage for refined modes.
    pub wall_time: f64,
    pub seed: u64,
    /// `ok` or the error message.
    pub status: String,
}

impl ExperimentRow {
    pub fn csv_line(&self) -> String {
        format!(
            "{},{},{},{},{},{},{:.3},{},{}",
            self.image,
            self.ratio,
            self.solver,
            self.mode,
            self.psnr,
            self.rse,
            self.wall_time,
            self.seed,
            csv_field(&self.status)
        )
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\"").replace('\n', " "))
    } else {
        s.to_string()
    }
}

#[derive(Clone, Debug)]
pub struct RprRow {
    pub image: String,
    pub stage: usize,
    pub average: f64,
    pub patches: usize,
}

#[derive(Clone, Debug)]
pub struct ExperimentReport {
    pub rows: Vec<ExperimentRow>,
    pub rpr: Vec<RprRow>,
}

impl ExperimentReport {
    pub fn results_csv(&self) -> String {
        let mut out = format!("{RESULTS_HEADER}\n{RESULTS_COLUMNS}\n");
        for row in &self.rows {
            out.push_str(&row.csv_line());
            out.push('\n');
        }
        out
    }

    pub fn rpr_csv(&self) -> String {
        let mut out = format!("{RPR_HEADER}\nimage,stage,label,average_rpr,patches\n");
        for r in &self.rpr {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                r.image,
                r.stage,
                stage_label(r.stage),
                r.average,
                r.patches
            ));
        }
        out
    }

    pub fn row(
        &self,
        image: &str,
        ratio: f64,
        solver: SolverKind,
        mode: Mode,
    ) -> Option<&ExperimentRow> {
        self.rows
            .iter()
            .find(|r| r.image == image && r.ratio == ratio && r.solver == solver && r.mode == mode)
    }
}

/// Writes through a temporary file so readers never see partial output.
fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension("part");
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

fn save_image_atomic(t: &DenseTensor, path: &Path) -> Result<()> {
    let tmp = path.with_extension("part.png");
    save_image(t, &tmp)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

fn stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}

fn cell_name(image: &str, ratio: f64, solver: SolverKind, mode: Option<Mode>) -> String {
    match mode {
        Some(m) => format!("{image}_r{ratio}_{solver}_{m}"),
        None => format!("{image}_r{ratio}"),
    }
}

struct Group<'a> {
    image: &'a str,
    truth: &'a DenseTensor,
    ratio: f64,
    omega: &'a ObservationMask,
    solver: SolverKind,
}

fn run_group(spec: &ExperimentSpec, g: &Group<'_>) -> Result<Vec<ExperimentRow>> {
    let y = g.omega.observed_or_zero(g.truth)?;
    let row =
        |mode: Mode, z: Option<&DenseTensor>, wall: f64, status: String| -> Result<ExperimentRow> {
            let (p, r) = match z {
                Some(z) => (psnr(z, g.truth)?, rse(z, g.truth)?),
                None => (f64::NAN, f64::NAN),
            };
            Ok(ExperimentRow {
                image: g.image.to_string(),
                ratio: g.ratio,
                solver: g.solver,
                mode,
                psnr: p,
                rse: r,
                wall_time: wall,
                seed: spec.mask_seed,
                status,
            })
        };

    let base_plan = spec.plan_for(g.solver, Mode::Pure);
    let start = Instant::now();
    let coarse = match complete_coarse(&y, g.omega, &base_plan) {
        Ok(c) => c,
        Err(e) => {
            log::warn!(
                "{} r={} {}: coarse stage failed: {e}",
                g.image,
                g.ratio,
                g.solver
            );
            let wall = start.elapsed().as_secs_f64();
            return spec
                .modes
                .iter()
                .map(|&m| row(m, None, wall, format!("error: {e}")))
                .collect();
        }
    };
    let coarse_time = start.elapsed().as_secs_f64();

    let mut rows = Vec::new();
    for &mode in &spec.modes {
        let name = cell_name(g.image, g.ratio, g.solver, Some(mode));
        let (restored, wall) = if mode == Mode::Pure {
            (Ok(coarse.restored.clone()), coarse_time)
        } else {
            let plan = spec.plan_for(g.solver, mode);
            let t = Instant::now();
            let out = refine(&y, g.omega, &plan, &coarse, Some(g.truth));
            let wall = coarse_time + t.elapsed().as_secs_f64();
            let restored = out.and_then(|r| {
                let mut log = Vec::new();
                write_stage_log(&r, &plan, &mut log)?;
                write_atomic(
                    &spec.output_dir.join("logs").join(format!("{name}.jsonl")),
                    &log,
                )?;
                Ok(r.restored)
            });
            (restored, wall)
        };
        match restored {
            Ok(z) => {
                if spec.write_images {
                    save_image_atomic(
                        &z,
                        &spec.output_dir.join("images").join(format!("{name}.png")),
                    )?;
                }
                rows.push(row(mode, Some(&z), wall, "ok".into())?);
            }
            Err(e @ Error::Io(_)) => return Err(e),
            Err(e) => {
                log::warn!("{name}: {e}");
                rows.push(row(mode, None, wall, format!("error: {e}"))?);
            }
        }
    }
    Ok(rows)
}

pub fn run_experiment(spec: &ExperimentSpec) -> Result<ExperimentReport> {
    spec.validate()?;
    for sub in ["masks", "images", "logs"] {
        fs::create_dir_all(spec.output_dir.join(sub))?;
    }

    let mut images = Vec::new();
    for path in &spec.images {
        let truth = load_image(path)?;
        images.push((stem(path), truth));
    }

    let mut masks = Vec::new();
    for (name, truth) in &images {
        for &ratio in &spec.missing_ratios {
            let mask = generate_mask(truth.dims(), ratio, spec.mask_seed, spec.mask_mode)?;
            let file = MaskFile {
                seed: spec.mask_seed,
                missing_ratio: ratio,
                mask,
            };
            let mut bytes = Vec::new();
            file.write_to(&mut bytes)?;
            write_atomic(
                &spec.output_dir.join("masks").join(format!(
                    "{}.c2fm",
                    cell_name(name, ratio, SolverKind::Tv2, None)
                )),
                &bytes,
            )?;
            masks.push((name.as_str(), truth, ratio, file.mask));
        }
    }

    let groups: Vec<Group<'_>> = masks
        .iter()
        .flat_map(|(name, truth, ratio, omega)| {
            spec.solvers.iter().map(move |&solver| Group {
                image: name,
                truth,
                ratio: *ratio,
                omega,
                solver,
            })
        })
        .collect();
    let rows: Vec<ExperimentRow> = groups
        .par_iter()
        .map(|g| run_group(spec, g))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .collect();

    let mut rpr = Vec::new();
    for (name, truth) in &images {
        for rep in rpr_table(truth, spec.rpr_stages)? {
            rpr.push(RprRow {
                image: name.clone(),
                stage: rep.stage,
                average: rep.average,
                patches: rep.per_patch.len(),
            });
        }
    }

    let report = ExperimentReport { rows, rpr };
    write_atomic(
        &spec.output_dir.join("results.csv"),
        report.results_csv().as_bytes(),
    )?;
    write_atomic(
        &spec.output_dir.join("rpr.csv"),
        report.rpr_csv().as_bytes(),
    )?;
    Ok(report)
}

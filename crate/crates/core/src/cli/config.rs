use std::fs;
use std::path::{Path, PathBuf};

use clap::ValueEnum;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::lifelong::LifelongConfig;
use crate::sem::SCHEMA_VERSION;
use crate::theory::TheoryConfig;
use crate::worldsim::Geometry;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum BackendKind {
    #[default]
    Sem,
    GroundTruth,
}

/// Everything a run depends on; a run is reproduced from this alone.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub out_dir: PathBuf,
    pub seed: u64,
    pub backend: BackendKind,
    pub geometry: Geometry,
    pub lifelong: LifelongConfig,
    pub theory: TheoryConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            out_dir: PathBuf::from("runs/default"),
            seed: 0,
            backend: BackendKind::Sem,
            geometry: Geometry::default(),
            lifelong: LifelongConfig::default(),
            theory: TheoryConfig::default(),
        }
    }
}

impl RunConfig {
    /// Parses JSON with `//` and `/* */` comments.
    pub fn from_json_with_comments(text: &str) -> Result<Self> {
        let cfg: RunConfig =
            serde_json::from_str(&strip_comments(text)).map_err(|e| Error::Config(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json_with_comments(&text)
    }

    pub fn validate(&self) -> Result<()> {
        self.geometry.validate()?;
        self.lifelong.validate()?;
        if self.theory.lengths.is_empty() || self.theory.lengths.contains(&0) || !(self.theory.inflation >= 1.0) {
            return Err(Error::config("theory needs plan lengths >= 1 and inflation >= 1"));
        }
        let total: usize = self.lifelong.counts.iter().sum();
        if total > self.geometry.grid.capacity() {
            return Err(Error::Capacity { requested: total, capacity: self.geometry.grid.capacity() });
        }
        Ok(())
    }

    /// Lifelong settings with the run seed filled in.
    pub fn lifelong(&self) -> LifelongConfig {
        LifelongConfig { seed: self.seed, ..self.lifelong.clone() }
    }

    pub fn theory(&self) -> TheoryConfig {
        let mut t = self.theory.clone();
        t.bounds.seed = self.seed;
        t
    }

    pub fn to_json_pretty(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    /// SHA-256 of the compact JSON form.
    pub fn hash(&self) -> Result<String> {
        let digest = Sha256::digest(serde_json::to_vec(self)?);
        Ok(format!("{digest:x}"))
    }
}

/// Replaces `//` and `/* */` comments outside strings with spaces so that
/// parser error positions still match the original text.
pub fn strip_comments(text: &str) -> String {
    let b = text.as_bytes();
    let mut out = Vec::with_capacity(b.len());
    let (mut i, mut in_str) = (0, false);
    while i < b.len() {
        let c = b[i];
        if in_str {
            out.push(c);
            if c == b'\\' && i + 1 < b.len() {
                out.push(b[i + 1]);
                i += 1;
            } else if c == b'"' {
                in_str = false;
            }
        } else if c == b'"' {
            in_str = true;
            out.push(c);
        } else if c == b'/' && b.get(i + 1) == Some(&b'/') {
            while i < b.len() && b[i] != b'\n' {
                out.push(b' ');
                i += 1;
            }
            continue;
        } else if c == b'/' && b.get(i + 1) == Some(&b'*') {
            out.extend_from_slice(b"  ");
            i += 2;
            while i < b.len() && !(b[i] == b'*' && b.get(i + 1) == Some(&b'/')) {
                out.push(if b[i] == b'\n' { b'\n' } else { b' ' });
                i += 1;
            }
            if i < b.len() {
                out.extend_from_slice(b"  ");
                i += 2;
            }
            continue;
        } else {
            out.push(c);
        }
        i += 1;
    }
    String::from_utf8(out).expect("only ASCII bytes were replaced")
}

const COMMENTS: &[(&str, &str)] = &[
    ("x", "Range along x: [min, max]."),
    ("y", "Range along y: [min, max]."),
    ("out_dir", "Directory for metrics, checkpoints, datasets, plots and the manifest."),
    ("seed", "Base seed; every random stream of a run is derived from it."),
    ("backend", "Effect predictions used while planning: \"sem\" or \"ground-truth\"."),
    ("geometry", "Scene layout in meters and the skill constants."),
    ("table", "Table top rectangle (x and y ranges)."),
    ("table_z", "Height of the table surface."),
    ("tray", "Tray rectangle on the table."),
    ("tray_rest_z", "Height of a block center resting on the tray."),
    ("bin", "Bin rectangle."),
    ("bin_split_x", "x of the plane between the near and far halves of the bin."),
    ("bin_floor_z", "Height of the bin floor."),
    ("bin_height", "Height of the bin walls."),
    ("fixture_height", "Extent above the table that still counts as resting on it."),
    ("block_size", "Edge length of a cube block."),
    ("home", "End-effector home point; every skill starts and ends here."),
    ("reach_limit_x", "Placements beyond this x are out of reach."),
    ("bin_handle", "Grasp point used to tilt the bin."),
    ("grid", "Initial block layout: a jittered grid of cells on the table."),
    ("rows", "Cells along x."),
    ("cols", "Cells along y."),
    ("pitch", "Cell spacing."),
    ("center", "Grid center."),
    ("noise", "Half-width of the uniform xy jitter per block."),
    ("num_colors", "Number of block colors."),
    ("skills", "Skill constants."),
    ("grasp_clearance", "A block can be grasped only if no other block is this close."),
    ("placement_clearance", "Placements must be this far from other blocks."),
    ("sweep_clearance", "Gap between the sweep start line and any table block."),
    ("placement_inset", "Margin from region borders when sampling placements."),
    ("landing_inset", "Margin from bin walls for slid, swept or tilted blocks."),
    ("landing_spacing", "Spacing of index-based landing offsets."),
    ("sweep_landing_x", "x where swept blocks land in the bin."),
    ("bin_penalty", "Extra cost of reaching into the bin for a placement."),
    ("slide_cost", "Fixed cost of a tray slide."),
    ("sweep_cost", "Fixed cost of a tray sweep."),
    ("tilt_cost_per_deg", "Tilt cost per degree."),
    ("tilt_angle_range", "Allowed tilt angles in degrees."),
    ("friction_threshold_deg", "Tilts at or above this angle move near-half blocks to the far half."),
    ("tilt_shift", "Distance blocks slide along x when the bin tilts."),
    ("placement_weights", "Relative odds of sampling a placement on the table, near bin and tray."),
    ("attempts_per_sample", "Rejection sampling attempts per parameter."),
    ("lifelong", "Skill schedule, data collection, training and evaluation."),
    ("m0", "Bootstrap initial states per new skill."),
    ("p0", "Bootstrap parameters per initial state."),
    ("mp", "Planning problems per train task per round."),
    ("max_depth", "Plan length limit for every task; null keeps the per-task presets."),
    ("max_expansions", "Node expansion budget per search."),
    ("timeout_s", "Wall-clock limit per search in seconds."),
    ("n_l", "Open nodes drawn per planning problem."),
    ("n_s", "Paths kept and executed per planning problem."),
    ("epochs", "Fine-tuning epochs per round."),
    ("bootstrap_epochs", "Training epochs for a freshly added skill."),
    ("batch_size", "Minibatch size."),
    ("lr", "Adam learning rate."),
    ("rounds", "Number of lifelong rounds."),
    ("schedule", "Skills added at the start of each listed round."),
    ("eval_trials", "Evaluation problems per task per round."),
    ("train_tasks", "Tasks that generate training data."),
    ("test_tasks", "Tasks that are only evaluated."),
    ("counts", "Blocks per color (red first)."),
    ("record_timings", "Write wall-clock plan times to the metrics (breaks byte-identical reruns)."),
    ("presets", "Per-task epsilon and max_depth overrides, e.g. {\"B\": {\"epsilon\": 5.0}}."),
    ("theory", "Dispersion and bound checks."),
    ("skill", "Skill whose plans are checked."),
    ("lengths", "Plan lengths to check."),
    ("pairs", "Random pairs for the Lipschitz estimates."),
    ("inflation", "Factor applied to the estimated Lipschitz constants."),
    ("bounds", "Sampled graph used by the bound checks."),
    ("delta", "Target dispersion of each step's parameter set."),
    ("trials", "Reference plans per plan length."),
    ("branching", "Parameters per step in the sampled graph."),
    ("probes", "Random probes per dispersion estimate."),
];

/// The default configuration as JSON with a comment above every key.
pub fn commented_default() -> Result<String> {
    let plain = RunConfig::default().to_json_pretty()?;
    let mut out = String::from("// semplan run configuration. Comments are stripped on load; unknown keys are rejected.\n");
    for line in plain.lines() {
        let trimmed = line.trim_start();
        if let Some(key) = trimmed.strip_prefix('"').and_then(|r| r.split('"').next()) {
            if trimmed[key.len() + 2..].starts_with(':') {
                if let Some((_, c)) = COMMENTS.iter().find(|(k, _)| *k == key) {
                    let indent = &line[..line.len() - trimmed.len()];
                    out.push_str(&format!("{indent}// {c}\n"));
                }
            }
        }
        out.push_str(line);
        out.push('\n');
    }
    Ok(out)
}

/// Written next to every run's outputs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub command: String,
    pub config_hash: String,
    pub seed: u64,
    pub semplan_version: String,
    pub checkpoint_schema: u32,
    pub config: RunConfig,
}

impl Manifest {
    pub fn new(command: &str, config: &RunConfig) -> Result<Self> {
        Ok(Manifest {
            command: command.to_string(),
            config_hash: config.hash()?,
            seed: config.seed,
            semplan_version: env!("CARGO_PKG_VERSION").to_string(),
            checkpoint_schema: SCHEMA_VERSION,
            config: config.clone(),
        })
    }

    /// Writes `manifest.json` and the resolved `config.json` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        fs::write(dir.join("manifest.json"), serde_json::to_string_pretty(self)? + "\n")?;
        fs::write(dir.join("config.json"), self.config.to_json_pretty()?)?;
        Ok(())
    }
}

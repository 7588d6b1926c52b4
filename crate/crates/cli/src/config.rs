//! TOML run configuration with dotted-path overrides.

use coliseum::reference;
use coliseum::semigroup::{build_system, certify_trap, Disk, GeneratorSystem, TrapRegion};
use coliseum::{GridSpec, Polynomial};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::CliError;
use crate::output;

pub const ENV_OUTPUT_DIR: &str = "COLISEUM_OUTPUT_DIR";
pub const ENV_THREADS: &str = "COLISEUM_THREADS";

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct SystemConfig {
    /// Ascending coefficients per generator, e.g. `"0,0,-2,0,1"`.
    pub polys: Vec<Polynomial>,
    pub weights: Vec<f64>,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct TrapConfig {
    pub center: Option<[f64; 2]>,
    pub radius: Option<f64>,
    /// `[re, im, radius]` per disk.
    pub disks: Option<Vec<[f64; 3]>>,
    /// A PGM file on the run grid, or a generator's filled Julia raster.
    pub mask: Option<MaskSource>,
    #[serde(default = "default_trap_samples")]
    pub samples: usize,
}

/// Slack used for masks read from a file.
pub const FILE_MASK_SLACK: usize = 2;

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(untagged)]
pub enum MaskSource {
    File(String),
    Raster(MaskTrap),
}

/// Filled Julia raster of one generator (1-based) on the run grid.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct MaskTrap {
    pub generator: usize,
    /// Pixels of dilation of the target around the raster.
    #[serde(default = "two")]
    pub slack: usize,
    #[serde(default = "default_n_max")]
    pub n_max: u32,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct GridConfig {
    pub center: [f64; 2],
    pub half_width: f64,
    pub size: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            center: [0.0, 0.0],
            half_width: reference::WINDOW_HALF_WIDTH,
            size: 256,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct SamplingConfig {
    pub samples: u32,
    pub n_max: u32,
    pub seed: u64,
}

impl Default for SamplingConfig {
    fn default() -> Self {
        Self {
            samples: 500,
            n_max: 300,
            seed: 1,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct AnalysisConfig {
    pub t_values: Vec<f64>,
    pub invert_depth: usize,
    /// Prefixes of the Fatou gaps audited for monotonicity, innermost first.
    pub gap_prefixes: Vec<String>,
    pub hole_radius: f64,
    pub holder_points: usize,
    pub kernel_points: usize,
    pub kernel_depth: usize,
    pub cloud_points: usize,
    /// Backward-cloud size for the three-generator Julia proxy.
    pub proxy_points: usize,
    pub julia_window: usize,
    pub attractor_depth: usize,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        Self {
            t_values: vec![0.25, 0.5, 1.0 / 3.0],
            invert_depth: 40,
            gap_prefixes: ["1", "", "2", "22"].map(String::from).to_vec(),
            hole_radius: reference::HOLE_RADIUS,
            holder_points: 20,
            kernel_points: 200,
            kernel_depth: 20,
            cloud_points: 20_000,
            proxy_points: 400_000,
            julia_window: 1,
            attractor_depth: 6,
        }
    }
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum StaircaseSystem {
    Cantor,
    Lebesgue,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum StaircaseModeName {
    Exact,
    MonteCarlo,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct StaircaseConfig {
    pub system: StaircaseSystem,
    /// Probability of the branch fixing 0.
    pub a: f64,
    pub points: usize,
    pub mode: StaircaseModeName,
    pub depth: usize,
    pub samples: u32,
    pub max_steps: u32,
    pub seed: u64,
}

impl Default for StaircaseConfig {
    fn default() -> Self {
        Self {
            system: StaircaseSystem::Cantor,
            a: 0.5,
            points: 1001,
            mode: StaircaseModeName::Exact,
            depth: coliseum::affine::DEFAULT_DEPTH,
            samples: 4000,
            max_steps: 200,
            seed: 1,
        }
    }
}

/// Scales used by `verify`; the defaults are the acceptance scales.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct VerifyConfig {
    /// Check names to run; empty runs all.
    pub checks: Vec<String>,
    pub grid: usize,
    pub samples: u32,
    pub n_max: u32,
    pub seed: u64,
    pub limit_samples: u32,
    pub limit_steps: usize,
    /// Odd refinement factor of the raster carrying the operator iterates.
    pub limit_refine: usize,
    pub word_samples: u32,
    pub word_cloud: usize,
    pub holder_grid: usize,
    pub holder_points: usize,
    pub holder_samples: u32,
    pub holder_half_pixels: usize,
    pub kernel_points: usize,
    pub kernel_depth: usize,
    pub trichotomy_grids: Vec<usize>,
    pub trichotomy_cloud: usize,
    pub determinism_grid: usize,
    pub determinism_samples: u32,
    pub determinism_threads: Vec<usize>,
    pub gap_prefixes: Vec<String>,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self {
            checks: Vec::new(),
            grid: 512,
            samples: 2000,
            n_max: 300,
            seed: 1,
            limit_samples: 4000,
            limit_steps: 60,
            limit_refine: 3,
            word_samples: 4000,
            word_cloud: 32,
            holder_grid: 1024,
            holder_points: 50,
            holder_samples: 2000,
            holder_half_pixels: 32,
            kernel_points: 200,
            kernel_depth: 20,
            trichotomy_grids: vec![256, 512],
            trichotomy_cloud: 400_000,
            determinism_grid: 128,
            determinism_samples: 200,
            determinism_threads: vec![1, 4, 8],
            gap_prefixes: AnalysisConfig::default().gap_prefixes,
        }
    }
}

/// Output location and execution settings; excluded from the config hash.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub dir: String,
    pub png: bool,
    pub threads: Option<usize>,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: "out".into(),
            png: false,
            threads: None,
        }
    }
}

#[derive(Clone, Debug, Default, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub system: Option<SystemConfig>,
    pub trap: Option<TrapConfig>,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub sampling: SamplingConfig,
    #[serde(default)]
    pub analysis: AnalysisConfig,
    #[serde(default)]
    pub staircase: StaircaseConfig,
    #[serde(default)]
    pub verify: VerifyConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

fn default_trap_samples() -> usize {
    720
}

fn two() -> usize {
    2
}

fn default_n_max() -> u32 {
    300
}

/// Converts `--set` values: TOML literals when they parse, strings otherwise.
fn override_value(raw: &str) -> toml::Value {
    toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()))
}

fn apply_override(table: &mut toml::Table, assignment: &str) -> Result<(), CliError> {
    let (path, raw) = assignment
        .split_once('=')
        .ok_or_else(|| CliError::Config(format!("override `{assignment}` is not key=value")))?;
    let keys: Vec<&str> = path.trim().split('.').collect();
    if keys.iter().any(|k| k.is_empty()) {
        return Err(CliError::Config(format!("bad override path `{path}`")));
    }
    let mut node = table;
    for key in &keys[..keys.len() - 1] {
        let entry = node
            .entry(key.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        node = entry.as_table_mut().ok_or_else(|| {
            CliError::Config(format!("override path `{path}` crosses non-table `{key}`"))
        })?;
    }
    node.insert(keys[keys.len() - 1].to_string(), override_value(raw.trim()));
    Ok(())
}

impl RunConfig {
    /// The reference run: default system, certified disk trap.
    pub fn reference() -> Self {
        Self::from_toml_str("", &[]).expect("empty config resolves")
    }

    /// Parses TOML text, applies environment and dotted overrides, then fills
    /// defaults.
    pub fn from_toml_str(text: &str, overrides: &[String]) -> Result<Self, CliError> {
        let mut table: toml::Table = text
            .parse()
            .map_err(|e: toml::de::Error| CliError::Config(e.message().to_string()))?;
        // environment sits between the file and explicit overrides
        if let Ok(dir) = std::env::var(ENV_OUTPUT_DIR) {
            apply_override(
                &mut table,
                &format!("output.dir={}", toml::Value::String(dir)),
            )?;
        }
        if let Some(n) = std::env::var(ENV_THREADS)
            .ok()
            .and_then(|s| s.parse::<usize>().ok())
        {
            apply_override(&mut table, &format!("output.threads={n}"))?;
        }
        for o in overrides {
            apply_override(&mut table, o)?;
        }
        let mut config: RunConfig = toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| CliError::Config(e.message().to_string()))?;
        if config.system.is_none() {
            config.system = Some(SystemConfig {
                polys: vec![reference::inner_map(), reference::outer_map()],
                weights: vec![0.5, 0.5],
            });
            if config.trap.is_none() {
                let disks = match reference::trap_disks() {
                    TrapRegion::Disks(d) => d
                        .iter()
                        .map(|d| [d.center.re, d.center.im, d.radius])
                        .collect(),
                    TrapRegion::Mask { .. } => unreachable!("reference trap is disks"),
                };
                config.trap = Some(TrapConfig {
                    disks: Some(disks),
                    samples: default_trap_samples(),
                    ..TrapConfig::default()
                });
            }
        }
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: Option<&std::path::Path>, overrides: &[String]) -> Result<Self, CliError> {
        let text = match path {
            Some(p) => std::fs::read_to_string(p)
                .map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?,
            None => String::new(),
        };
        Self::from_toml_str(&text, overrides)
    }

    fn validate(&self) -> Result<(), CliError> {
        if self.grid.size < 2 || !(self.grid.half_width > 0.0) {
            return Err(CliError::Config(
                "grid.size must be ≥ 2 and grid.half_width positive".into(),
            ));
        }
        if self.sampling.samples == 0 {
            return Err(CliError::Config("sampling.samples must be positive".into()));
        }
        if self.verify.limit_refine.is_multiple_of(2) {
            return Err(CliError::Config("verify.limit_refine must be odd".into()));
        }
        self.system()?;
        Ok(())
    }

    /// Square run grid.
    pub fn grid(&self) -> Result<GridSpec, CliError> {
        let c = Complex64::new(self.grid.center[0], self.grid.center[1]);
        GridSpec::square(c, self.grid.half_width, self.grid.size)
            .map_err(|e| CliError::Config(format!("grid: {e}")))
    }

    pub fn sampling(&self) -> coliseum::field::Sampling {
        coliseum::field::Sampling::new(
            self.sampling.samples,
            self.sampling.n_max,
            self.sampling.seed,
        )
    }

    fn bare_system(&self) -> Result<GeneratorSystem, CliError> {
        let s = self.system.as_ref().expect("system resolved on load");
        build_system(s.polys.clone(), s.weights.clone())
            .map_err(|e| CliError::Config(format!("system: {e}")))
    }

    /// The generator system with its trap certified, if one is configured.
    pub fn system(&self) -> Result<GeneratorSystem, CliError> {
        let sys = self.bare_system()?;
        let Some(trap) = &self.trap else {
            return Ok(sys);
        };
        let region = match (&trap.disks, trap.center, trap.radius, &trap.mask) {
            (Some(disks), None, None, None) => TrapRegion::Disks(
                disks
                    .iter()
                    .map(|d| Disk::new(Complex64::new(d[0], d[1]), d[2]))
                    .collect(),
            ),
            (None, Some(c), Some(r), None) => TrapRegion::disk(Complex64::new(c[0], c[1]), r),
            (None, None, None, Some(MaskSource::File(path))) => {
                let bytes = std::fs::read(path)?;
                TrapRegion::Mask {
                    mask: output::read_mask_pgm(&bytes, self.grid()?)?,
                    slack: FILE_MASK_SLACK,
                }
            }
            (None, None, None, Some(MaskSource::Raster(m))) => {
                let g = sys
                    .generators()
                    .get(m.generator.wrapping_sub(1))
                    .ok_or_else(|| {
                        CliError::Config(format!(
                            "trap.mask.generator {} out of range",
                            m.generator
                        ))
                    })?;
                TrapRegion::Mask {
                    mask: reference::filled_julia_mask(g, self.grid()?, m.n_max),
                    slack: m.slack,
                }
            }
            (None, None, None, None) => return Ok(sys),
            _ => {
                return Err(CliError::Config(
                    "trap: give exactly one of `disks`, `center`+`radius`, or `mask`".into(),
                ))
            }
        };
        let cert = certify_trap(&sys, region, trap.samples).map_err(|f| {
            CliError::Config(format!(
                "trap does not certify: generator {} sends {} to {}",
                f.generator + 1,
                f.point,
                f.image
            ))
        })?;
        Ok(sys.with_trap(cert))
    }

    /// SHA-256 over the resolved configuration without the output section,
    /// followed by the bytes of a mask file if one is used.
    pub fn hash(&self) -> String {
        let mut hashed = self.clone();
        hashed.output = OutputConfig::default();
        let json = serde_json::to_string(&hashed).expect("config serializes");
        let mut digest = Sha256::new();
        digest.update(json.as_bytes());
        if let Some(MaskSource::File(path)) = self.trap.as_ref().and_then(|t| t.mask.as_ref()) {
            // unreadable files already failed validation
            digest.update(std::fs::read(path).unwrap_or_default());
        }
        hex::encode(digest.finalize())
    }
}

use std::path::{Path, PathBuf};

use morphoseek::cost::ValidationConfig;
use morphoseek::kernel::{GridDims, Kernel, SamplingRanges};
use morphoseek::relations::Space;
use morphoseek::search::SearchConfig;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::CliError;

/// Contents of a `--config` TOML file. Every key is optional.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub seed: Option<u64>,
    pub kernel: Option<String>,
    pub against: Option<String>,
    pub grid: Option<String>,
    pub out: Option<PathBuf>,
    pub sequential: Option<bool>,

    pub tolerance: Option<f64>,
    pub holdout: Option<usize>,
    pub distinct: Option<f64>,

    pub ssh_amplitude: Option<f64>,
    pub spacing_min: Option<f64>,
    pub spacing_max: Option<f64>,
    pub gravity_min: Option<f64>,
    pub gravity_max: Option<f64>,
    pub coriolis_min: Option<f64>,
    pub coriolis_max: Option<f64>,

    pub space: Option<String>,
    pub batch_size: Option<usize>,
    pub max_iterations: Option<u64>,
    pub p_accept: Option<f64>,
    pub sigma_init: Option<f64>,
    pub sigma_mut: Option<f64>,
    pub k_mut: Option<f64>,
    pub structured_prob: Option<f64>,
    pub stagnation_window: Option<u64>,
    pub sigma_floor: Option<f64>,
    pub epsilon_converge: Option<f64>,
    pub max_relations: Option<usize>,
    pub max_restarts: Option<usize>,
    pub max_evaluations: Option<u64>,
    pub coef_bound: Option<f64>,
    pub refine_rounds: Option<usize>,
    pub trace_points: Option<usize>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        toml::from_str(&text).map_err(|e| CliError::Format {
            path: path.to_path_buf(),
            message: e.to_string().trim_end().to_string(),
        })
    }
}

/// Flag values that override the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub kernel: Option<Kernel>,
    pub against: Option<Kernel>,
    pub grid: Option<GridDims>,
    pub out: Option<PathBuf>,
    pub sequential: bool,
    pub tolerance: Option<f64>,
    pub holdout: Option<usize>,
    pub space: Option<Space>,
    pub max_relations: Option<usize>,
    pub max_evaluations: Option<u64>,
}

/// Fully resolved settings for one invocation.
///
/// `grid` stays `None` when neither the file nor a flag chose one, so each
/// command can apply its own default.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub seed: u64,
    pub kernel: Kernel,
    pub against: Kernel,
    pub grid: Option<GridDims>,
    pub out: Option<PathBuf>,
    pub sequential: bool,
    pub validation: ValidationConfig,
    pub search: SearchConfig,
}

fn parse_field<T: std::str::FromStr<Err = morphoseek::Error>>(
    value: Option<&str>,
) -> Result<Option<T>, CliError> {
    value.map(|v| v.parse()).transpose().map_err(CliError::from)
}

impl RunConfig {
    pub fn resolve(file: &FileConfig, flags: &Overrides) -> Result<Self, CliError> {
        let defaults = SearchConfig::default();
        let seed = flags.seed.or(file.seed).unwrap_or(defaults.seed);
        let kernel = flags
            .kernel
            .or(parse_field(file.kernel.as_deref())?)
            .unwrap_or(Kernel::Cyclic);
        let against = flags
            .against
            .or(parse_field(file.against.as_deref())?)
            .unwrap_or(Kernel::Noncyclic);
        let grid = flags.grid.or(parse_field(file.grid.as_deref())?);

        let r = SamplingRanges::default();
        let ranges = SamplingRanges {
            ssh_amplitude: file.ssh_amplitude.unwrap_or(r.ssh_amplitude),
            spacing_min: file.spacing_min.unwrap_or(r.spacing_min),
            spacing_max: file.spacing_max.unwrap_or(r.spacing_max),
            gravity_min: file.gravity_min.unwrap_or(r.gravity_min),
            gravity_max: file.gravity_max.unwrap_or(r.gravity_max),
            coriolis_min: file.coriolis_min.unwrap_or(r.coriolis_min),
            coriolis_max: file.coriolis_max.unwrap_or(r.coriolis_max),
        };
        let v = ValidationConfig::default();
        let validation = ValidationConfig {
            n_holdout: flags.holdout.or(file.holdout).unwrap_or(v.n_holdout),
            tol_validate: flags.tolerance.or(file.tolerance).unwrap_or(v.tol_validate),
            distinct: file.distinct.or(v.distinct),
            ranges,
        };
        validation.check()?;

        let space = flags
            .space
            .or(parse_field(file.space.as_deref())?)
            .unwrap_or(defaults.space);
        let d = defaults;
        let search = SearchConfig {
            space,
            dims: grid.unwrap_or(d.dims),
            batch_size: file.batch_size.unwrap_or(d.batch_size),
            max_iterations: file.max_iterations.unwrap_or(d.max_iterations),
            p_accept: file.p_accept.unwrap_or(d.p_accept),
            sigma_init: file.sigma_init.unwrap_or(d.sigma_init),
            sigma_mut: file.sigma_mut.unwrap_or(d.sigma_mut),
            k_mut: file.k_mut.unwrap_or(d.k_mut),
            structured_prob: file.structured_prob.unwrap_or(d.structured_prob),
            stagnation_window: file.stagnation_window.unwrap_or(d.stagnation_window),
            sigma_floor: file.sigma_floor.unwrap_or(d.sigma_floor),
            epsilon_converge: file.epsilon_converge.unwrap_or(d.epsilon_converge),
            max_relations: flags.max_relations.or(file.max_relations).unwrap_or(d.max_relations),
            max_restarts: file.max_restarts.unwrap_or(d.max_restarts),
            max_evaluations: flags.max_evaluations.or(file.max_evaluations).or(d.max_evaluations),
            seed,
            validation,
            trace_points: file.trace_points.unwrap_or(d.trace_points),
            coef_bound: file.coef_bound.or(d.coef_bound),
            refine_rounds: file.refine_rounds.unwrap_or(d.refine_rounds),
        };

        Ok(RunConfig {
            seed,
            kernel,
            against,
            grid,
            out: flags.out.clone().or_else(|| file.out.clone()),
            sequential: flags.sequential || file.sequential.unwrap_or(false),
            validation,
            search,
        })
    }

    pub fn dims_or(&self, fallback: GridDims) -> GridDims {
        self.grid.unwrap_or(fallback)
    }

    pub fn search_for(&self, dims: GridDims) -> SearchConfig {
        SearchConfig {
            dims,
            ..self.search.clone()
        }
    }

    /// The settings that influence numeric results, as embedded in every
    /// report and artifact. Output paths and execution mode are left out
    /// because they never change a result.
    pub fn snapshot(&self, dims: GridDims, command: &str) -> Snapshot {
        Snapshot {
            command: command.to_string(),
            seed: self.seed,
            kernel: self.kernel,
            against: (command == "compare").then_some(self.against),
            grid: dims.to_string(),
            validation: self.validation,
            search: (command == "discover").then(|| self.search_for(dims)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub command: String,
    pub seed: u64,
    pub kernel: Kernel,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub against: Option<Kernel>,
    pub grid: String,
    pub validation: ValidationConfig,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub search: Option<SearchConfig>,
}

impl Snapshot {
    /// SHA-256 of the canonical JSON encoding, hex encoded.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("snapshot serializes");
        Sha256::digest(json.as_bytes())
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_override_file_which_overrides_defaults() {
        let file: FileConfig = toml::from_str("seed = 5\ntolerance = 1e-6\nholdout = 7\nkernel = \"noncyclic\"\nbatch_size = 3").unwrap();
        let flags = Overrides {
            seed: Some(9),
            ..Default::default()
        };
        let cfg = RunConfig::resolve(&file, &flags).unwrap();
        assert_eq!(cfg.seed, 9);
        assert_eq!(cfg.search.seed, 9);
        assert_eq!(cfg.kernel, Kernel::Noncyclic);
        assert_eq!(cfg.validation.tol_validate, 1e-6);
        assert_eq!(cfg.validation.n_holdout, 7);
        assert_eq!(cfg.search.batch_size, 3);
        assert_eq!(cfg.search.p_accept, 0.02);
        assert!(cfg.grid.is_none());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(toml::from_str::<FileConfig>("sead = 1").is_err());
    }

    #[test]
    fn bad_values_are_config_errors() {
        let file: FileConfig = toml::from_str("kernel = \"periodic\"").unwrap();
        assert!(RunConfig::resolve(&file, &Overrides::default()).is_err());
        let file: FileConfig = toml::from_str("holdout = 0").unwrap();
        assert!(RunConfig::resolve(&file, &Overrides::default()).is_err());
    }

    #[test]
    fn hash_tracks_numeric_settings_only() {
        let base = RunConfig::resolve(&FileConfig::default(), &Overrides::default()).unwrap();
        let moved = RunConfig::resolve(
            &FileConfig::default(),
            &Overrides {
                out: Some("elsewhere".into()),
                sequential: true,
                ..Default::default()
            },
        )
        .unwrap();
        let dims = GridDims::desk();
        assert_eq!(base.snapshot(dims, "verify").hash(), moved.snapshot(dims, "verify").hash());
        let reseeded = RunConfig::resolve(
            &FileConfig::default(),
            &Overrides {
                seed: Some(1),
                ..Default::default()
            },
        )
        .unwrap();
        assert_ne!(base.snapshot(dims, "verify").hash(), reseeded.snapshot(dims, "verify").hash());
        assert_eq!(base.snapshot(dims, "verify").hash().len(), 64);
    }
}

use std::path::{Path, PathBuf};

use morphoseek::kernel::{GridDims, Kernel};
use morphoseek::relations::AffineRelation;
use morphoseek::search::{DescentRecord, SearchStats};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::config::Snapshot;
use crate::error::CliError;
use crate::report::Verdict;

pub const RESULT_SCHEMA: &str = "morphoseek-result/1";
pub const BUNDLE_SCHEMA: &str = "morphoseek-bundle/1";

/// A relation together with the id used in reports.
#[derive(Debug, Clone)]
pub struct Named {
    pub id: String,
    pub relation: AffineRelation,
}

pub fn read_text(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|source| CliError::Io {
            path: dir.to_path_buf(),
            source,
        })?;
    }
    std::fs::write(path, text).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Loads relation files; the id is the relation name, or the file stem for
/// unnamed relations.
pub fn load_relations(paths: &[PathBuf]) -> Result<Vec<Named>, CliError> {
    paths
        .iter()
        .map(|path| {
            let text = read_text(path)?;
            let relation = AffineRelation::from_json(&text).map_err(|e| CliError::format(path, e))?;
            let id = relation.name().map(str::to_string).unwrap_or_else(|| {
                path.file_stem()
                    .map(|s| s.to_string_lossy().into_owned())
                    .unwrap_or_else(|| path.display().to_string())
            });
            Ok(Named { id, relation })
        })
        .collect()
}

/// Checks that all relations share one grid and that it matches `wanted`
/// when given. Returns the common grid.
pub fn common_dims(
    relations: &[Named],
    paths: &[PathBuf],
    wanted: Option<GridDims>,
) -> Result<Option<GridDims>, CliError> {
    let mut dims = wanted;
    for (i, named) in relations.iter().enumerate() {
        let d = named.relation.dims;
        match dims {
            None => dims = Some(d),
            Some(expected) if expected != d => {
                let location = paths.get(i).cloned().unwrap_or_else(|| PathBuf::from(&named.id));
                return Err(CliError::format(
                    location,
                    format!("relation grid {d} does not match grid {expected}"),
                ));
            }
            Some(_) => {}
        }
    }
    Ok(dims)
}

/// File name for a relation id: characters outside `[A-Za-z0-9_-]` become
/// underscores, trailing underscores are dropped.
pub fn file_stem_for(id: &str) -> String {
    let s: String = id
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '_' || c == '-' { c } else { '_' })
        .collect();
    s.trim_end_matches('_').to_string()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ResultDoc {
    pub schema: String,
    pub version: String,
    pub seed: u64,
    pub config_hash: String,
    pub config: Snapshot,
    pub relations: Vec<Value>,
    pub relation_files: Vec<String>,
    pub descents: Vec<DescentRecord>,
    pub stats: SearchStats,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Expectation {
    pub id: String,
    pub kernel: Kernel,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BundleRelation {
    pub id: String,
    pub relation: Value,
}

/// Self-contained regression test: relations, the exact validation settings
/// and the verdict each relation is expected to get from each kernel.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Bundle {
    pub schema: String,
    pub version: String,
    pub seed: u64,
    pub config_hash: String,
    pub config: Snapshot,
    pub relations: Vec<BundleRelation>,
    pub expectations: Vec<Expectation>,
}

impl Bundle {
    pub fn load(path: &Path) -> Result<(Bundle, Vec<Named>), CliError> {
        let text = read_text(path)?;
        let bundle: Bundle = serde_json::from_str(&text).map_err(|e| CliError::format(path, e))?;
        if bundle.schema != BUNDLE_SCHEMA {
            return Err(CliError::format(
                path,
                format!("unsupported schema `{}` (expected {BUNDLE_SCHEMA})", bundle.schema),
            ));
        }
        let dims: GridDims = bundle
            .config
            .grid
            .parse()
            .map_err(|e| CliError::format(path, format!("config.grid: {e}")))?;
        bundle
            .config
            .validation
            .check()
            .map_err(|e| CliError::format(path, format!("config.validation: {e}")))?;
        let mut named = Vec::with_capacity(bundle.relations.len());
        for (i, r) in bundle.relations.iter().enumerate() {
            let relation = AffineRelation::from_json_value(&r.relation)
                .map_err(|e| CliError::format(path, format!("relations[{i}]: {e}")))?;
            if relation.dims != dims {
                return Err(CliError::format(
                    path,
                    format!("relations[{i}]: grid {} does not match bundle grid {dims}", relation.dims),
                ));
            }
            named.push(Named {
                id: r.id.clone(),
                relation,
            });
        }
        for (i, e) in bundle.expectations.iter().enumerate() {
            if !named.iter().any(|n| n.id == e.id) {
                return Err(CliError::format(
                    path,
                    format!("expectations[{i}]: unknown relation id `{}`", e.id),
                ));
            }
        }
        Ok((bundle, named))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stems_are_filesystem_friendly() {
        assert_eq!(file_stem_for("translate(3,2)"), "translate_3_2");
        assert_eq!(file_stem_for("scale_gf(2)"), "scale_gf_2");
        assert_eq!(file_stem_for("negate_ssh"), "negate_ssh");
    }
}

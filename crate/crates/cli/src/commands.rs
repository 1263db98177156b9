use std::path::{Path, PathBuf};

use morphoseek::cost::{validate_on, ValidationConfig};
use morphoseek::exec::Execution;
use morphoseek::kernel::{random_state, GridDims, Kernel, StateVector};
use morphoseek::relations::{known_symmetries, AffineRelation};
use morphoseek::search::{discover, stream};
use sha2::{Digest, Sha256};

use crate::config::{Overrides, RunConfig};
use crate::error::CliError;
use crate::files::{
    common_dims, file_stem_for, load_relations, write_text, Bundle, BundleRelation, Expectation, Named, ResultDoc,
    BUNDLE_SCHEMA, RESULT_SCHEMA,
};
use crate::report::{Report, Row, Verdict};

pub const SUCCESS: u8 = 0;
pub const VIOLATION: u8 = 1;

fn default_out(cfg: &RunConfig) -> PathBuf {
    cfg.out.clone().unwrap_or_else(|| PathBuf::from("morphoseek-out"))
}

fn execution(cfg: &RunConfig) -> Execution {
    if cfg.sequential {
        Execution::Sequential
    } else {
        Execution::default()
    }
}

/// Random stream for the holdout inputs of relation `id`. Keyed by id so the
/// same relation sees the same inputs in every command and on every kernel.
pub fn holdout_stream(id: &str) -> u64 {
    let digest = Sha256::digest(format!("holdout:{id}").as_bytes());
    let mut word = [0u8; 8];
    word.copy_from_slice(&digest[..8]);
    u64::from_le_bytes(word)
}

fn holdout_states(named: &Named, seed: u64, validation: &ValidationConfig) -> Result<Vec<StateVector>, CliError> {
    let mut rng = stream(seed, holdout_stream(&named.id));
    (0..validation.n_holdout)
        .map(|_| random_state(named.relation.dims, &validation.ranges, &mut rng).map_err(CliError::from))
        .collect()
}

/// Validates every relation against every kernel on shared seeded inputs,
/// with the identity as the only prior.
fn evaluate(
    relations: &[Named],
    kernels: &[Kernel],
    seed: u64,
    validation: &ValidationConfig,
    exec: Execution,
) -> Result<Vec<Row>, CliError> {
    let mut rows = Vec::with_capacity(relations.len() * kernels.len());
    for named in relations {
        let states = holdout_states(named, seed, validation)?;
        let priors = [AffineRelation::identity(named.relation.dims)];
        for &kernel in kernels {
            let report = validate_on(&named.relation, &priors, &kernel, &states, validation, exec)?;
            rows.push(Row::new(&named.id, kernel, &report));
        }
    }
    Ok(rows)
}

fn catalogue(dims: GridDims) -> Vec<Named> {
    known_symmetries(dims)
        .into_iter()
        .map(|relation| Named {
            id: relation.name().unwrap_or("unnamed").to_string(),
            relation,
        })
        .collect()
}

fn emit(report: &Report, json: bool) {
    if json {
        print!("{}", report.to_json());
    } else {
        print!("{}", report.to_table());
    }
}

pub fn symmetries(cfg: &RunConfig, json: bool) -> Result<u8, CliError> {
    let dims = cfg.dims_or(GridDims::desk());
    let relations = catalogue(dims);
    let rows = evaluate(&relations, &[cfg.kernel], cfg.seed, &cfg.validation, execution(cfg))?;
    let report = Report::new(cfg.snapshot(dims, "symmetries"), rows);
    if let Some(out) = &cfg.out {
        for named in &relations {
            let path = out.join(format!("{}.json", file_stem_for(&named.id)));
            write_text(&path, &format!("{}\n", named.relation.to_json()))?;
        }
        write_text(&out.join("report.json"), &report.to_json())?;
    }
    emit(&report, json);
    Ok(if report.all_pass() { SUCCESS } else { VIOLATION })
}

pub fn discover_cmd(cfg: &RunConfig, json: bool) -> Result<u8, CliError> {
    let dims = cfg.dims_or(GridDims::discovery());
    let search = cfg.search_for(dims);
    let result = discover(&cfg.kernel, &search, execution(cfg))?;
    let out = default_out(cfg);

    let mut files = Vec::with_capacity(result.relations.len());
    for (k, rel) in result.relations.iter().enumerate() {
        let name = format!("relation-{}.json", k + 1);
        write_text(&out.join(&name), &format!("{}\n", rel.to_json()))?;
        files.push(name);
    }
    let snapshot = cfg.snapshot(dims, "discover");
    let doc = ResultDoc {
        schema: RESULT_SCHEMA.to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        seed: cfg.seed,
        config_hash: snapshot.hash(),
        config: snapshot,
        relations: result.relations.iter().map(AffineRelation::to_json_value).collect(),
        relation_files: files.clone(),
        descents: result.descents.clone(),
        stats: result.stats.clone(),
    };
    let mut text = serde_json::to_string_pretty(&doc).expect("result documents serialize");
    text.push('\n');
    write_text(&out.join("result.json"), &text)?;

    if json {
        print!("{text}");
    } else {
        for d in &result.descents {
            let cost = d.cost.map_or("inf".to_string(), |c| format!("{c:e}"));
            let verdict = match (&d.validation, d.recorded_as) {
                (_, Some(k)) => format!("recorded as {}", files[k]),
                (Some(v), None) => format!("rejected (max_rel_err {:e})", v.max_rel_err),
                (None, None) => "not converged".to_string(),
            };
            println!(
                "restart {:>3}  evaluations {:>7}  cost {:<24}  {}",
                d.restart, d.evaluations, cost, verdict
            );
        }
        println!(
            "{} relation(s) from {} descent(s), {} evaluations, {:.2}s; wrote {}",
            result.relations.len(),
            result.stats.descents,
            result.stats.evaluations,
            result.stats.wall_time,
            out.join("result.json").display()
        );
    }
    Ok(if result.relations.is_empty() { VIOLATION } else { SUCCESS })
}

pub fn verify(cfg: &RunConfig, files: &[PathBuf], json: bool) -> Result<u8, CliError> {
    if files.is_empty() {
        return Err(CliError::Usage("verify needs relation files or --bundle".into()));
    }
    let relations = load_relations(files)?;
    let dims = common_dims(&relations, files, cfg.grid)?.expect("at least one relation");
    let rows = evaluate(&relations, &[cfg.kernel], cfg.seed, &cfg.validation, execution(cfg))?;
    let report = Report::new(cfg.snapshot(dims, "verify"), rows);
    finish(cfg, &report, json)?;
    Ok(if report.all_pass() { SUCCESS } else { VIOLATION })
}

/// Replays a bundle with its own seed, grid and tolerances. With
/// `implementation` set, the expectations recorded for the kernel the bundle
/// was built on are checked against that implementation instead.
pub fn replay(
    cfg: &RunConfig,
    flags: &Overrides,
    path: &Path,
    implementation: Option<Kernel>,
    json: bool,
) -> Result<u8, CliError> {
    let (bundle, relations) = Bundle::load(path)?;
    if flags.seed.is_some() || flags.tolerance.is_some() || flags.holdout.is_some() || flags.grid.is_some() {
        eprintln!("note: seed, grid, tolerance and holdout come from the bundle; flags ignored");
    }
    let validation = bundle.config.validation;
    let built_on = bundle.config.kernel;
    let mut rows = Vec::new();
    for named in &relations {
        let states = holdout_states(named, bundle.seed, &validation)?;
        let priors = [AffineRelation::identity(named.relation.dims)];
        for e in bundle.expectations.iter().filter(|e| e.id == named.id) {
            let kernel = match implementation {
                Some(k) if e.kernel == built_on => k,
                Some(_) => continue,
                None => e.kernel,
            };
            let report = validate_on(&named.relation, &priors, &kernel, &states, &validation, execution(cfg))?;
            let mut row = Row::new(&named.id, kernel, &report);
            row.expected = Some(e.verdict);
            rows.push(row);
        }
    }
    let report = Report::new(bundle.config.clone(), rows);
    finish(cfg, &report, json)?;
    let mismatches = report.mismatches();
    if mismatches > 0 {
        eprintln!("{mismatches} expectation(s) not met");
        Ok(VIOLATION)
    } else {
        Ok(SUCCESS)
    }
}

fn gather(cfg: &RunConfig, files: &[PathBuf], with_catalogue: bool) -> Result<(Vec<Named>, GridDims), CliError> {
    let mut relations = load_relations(files)?;
    let dims = common_dims(&relations, files, cfg.grid)?;
    let dims = match dims {
        Some(d) => d,
        None => cfg.dims_or(GridDims::desk()),
    };
    if with_catalogue {
        relations.extend(catalogue(dims));
    }
    Ok((relations, dims))
}

pub fn compare(cfg: &RunConfig, files: &[PathBuf], with_catalogue: bool, json: bool) -> Result<u8, CliError> {
    let (relations, dims) = gather(cfg, files, with_catalogue)?;
    let mut kernels = vec![cfg.kernel];
    if cfg.against != cfg.kernel {
        kernels.push(cfg.against);
    }
    let rows = evaluate(&relations, &kernels, cfg.seed, &cfg.validation, execution(cfg))?;
    let mut report = Report::new(cfg.snapshot(dims, "compare"), rows);
    let mut discriminating: Vec<String> = Vec::new();
    for named in &relations {
        let verdicts: Vec<Verdict> = report
            .rows
            .iter()
            .filter(|r| r.id == named.id)
            .map(|r| r.verdict)
            .collect();
        if verdicts.windows(2).any(|w| w[0] != w[1]) && !discriminating.contains(&named.id) {
            discriminating.push(named.id.clone());
        }
    }
    discriminating.sort();
    report.discriminating = Some(discriminating);
    finish(cfg, &report, json)?;
    Ok(SUCCESS)
}

pub fn emit_tests(
    cfg: &RunConfig,
    files: &[PathBuf],
    with_catalogue: bool,
    bundle_path: Option<&Path>,
    json: bool,
) -> Result<u8, CliError> {
    let (relations, dims) = gather(cfg, files, with_catalogue)?;
    if relations.is_empty() {
        return Err(CliError::Usage("emit-tests needs relation files or --catalogue".into()));
    }
    let kernels = [Kernel::Cyclic, Kernel::Noncyclic];
    let rows = evaluate(&relations, &kernels, cfg.seed, &cfg.validation, execution(cfg))?;
    if let Some(bad) = rows.iter().find(|r| r.kernel == cfg.kernel && r.verdict == Verdict::Fail) {
        return Err(CliError::Usage(format!(
            "refusing to emit tests: relation `{}` does not validate on the {} kernel (max_rel_err {:e})",
            bad.id, cfg.kernel, bad.max_rel_err
        )));
    }
    let snapshot = cfg.snapshot(dims, "emit-tests");
    let bundle = Bundle {
        schema: BUNDLE_SCHEMA.to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        seed: cfg.seed,
        config_hash: snapshot.hash(),
        config: snapshot.clone(),
        relations: relations
            .iter()
            .map(|n| BundleRelation {
                id: n.id.clone(),
                relation: n.relation.to_json_value(),
            })
            .collect(),
        expectations: rows
            .iter()
            .map(|r| Expectation {
                id: r.id.clone(),
                kernel: r.kernel,
                verdict: r.verdict,
            })
            .collect(),
    };
    let path = bundle_path
        .map(Path::to_path_buf)
        .unwrap_or_else(|| default_out(cfg).join("bundle.json"));
    let mut text = serde_json::to_string_pretty(&bundle).expect("bundles serialize");
    text.push('\n');
    write_text(&path, &text)?;
    let report = Report::new(snapshot, rows);
    emit(&report, json);
    if !json {
        println!("wrote {}", path.display());
    }
    Ok(SUCCESS)
}

fn finish(cfg: &RunConfig, report: &Report, json: bool) -> Result<(), CliError> {
    if let Some(out) = &cfg.out {
        write_text(&out.join("report.json"), &report.to_json())?;
    }
    emit(report, json);
    Ok(())
}

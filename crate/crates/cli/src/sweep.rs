//! Runs every config in a directory, in parallel, each into its own
//! output directory.

use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::config::ExperimentConfig;
use crate::error::{CliError, CliResult};
use crate::pipeline::run;
use crate::report::RunReport;

/// `*.toml` files in `dir`, sorted by name.
pub fn config_files(dir: &Path) -> CliResult<Vec<PathBuf>> {
    let entries = std::fs::read_dir(dir).map_err(|e| CliError::io(dir, e))?;
    let mut files = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| CliError::io(dir, e))?.path();
        if path.extension().is_some_and(|ext| ext == "toml") {
            files.push(path);
        }
    }
    files.sort();
    Ok(files)
}

/// Runs each config with the file stem as its output subdirectory, so two
/// configs sharing a `name` never write into the same place.
pub fn sweep(
    dir: &Path,
    out_root: &Path,
    jobs: usize,
) -> CliResult<Vec<(PathBuf, CliResult<RunReport>)>> {
    let files = config_files(dir)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
    let results = pool.install(|| {
        files
            .par_iter()
            .map(|path| {
                let outcome = ExperimentConfig::load(path).and_then(|mut cfg| {
                    let stem = path
                        .file_stem()
                        .expect("toml file")
                        .to_string_lossy()
                        .into_owned();
                    cfg.output_dir = Some(stem);
                    run(&cfg, out_root)
                });
                (path.clone(), outcome)
            })
            .collect()
    });
    Ok(results)
}

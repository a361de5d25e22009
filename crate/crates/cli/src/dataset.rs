//! Dataset files (line-delimited JSON of prompt records) and the repository
//! walker that feeds the simulator.

use anyhow::{Context, Result};
use promptcloak_core::code::parse_segment;
use promptcloak_core::sim::{derive_session_seed, simulate_session, SimulatorParams};
use promptcloak_core::PromptRecord;
use std::io::{BufRead, BufWriter, Write};
use std::path::Path;
use tracing::warn;

pub fn write_records(path: &Path, records: &[PromptRecord]) -> Result<()> {
    let file = std::fs::File::create(path)
        .with_context(|| format!("creating dataset file {}", path.display()))?;
    let mut out = BufWriter::new(file);
    for r in records {
        serde_json::to_writer(&mut out, r)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_records(path: &Path) -> Result<Vec<PromptRecord>> {
    let file = std::fs::File::open(path)
        .with_context(|| format!("opening dataset file {}", path.display()))?;
    let reader = std::io::BufReader::new(file);
    let mut records = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record: PromptRecord = serde_json::from_str(&line)
            .with_context(|| format!("{}:{}: bad prompt record", path.display(), i + 1))?;
        records.push(record);
    }
    Ok(records)
}

/// Python files under a repository root, sorted by path for determinism.
pub fn collect_py_files(root: &Path) -> Result<Vec<(String, String)>> {
    let mut files = Vec::new();
    let mut skipped = 0usize;
    for entry in walkdir::WalkDir::new(root).sort_by_file_name() {
        let entry = entry?;
        if !entry.file_type().is_file() {
            continue;
        }
        if entry.path().extension().and_then(|e| e.to_str()) != Some("py") {
            continue;
        }
        let rel = entry
            .path()
            .strip_prefix(root)
            .unwrap_or(entry.path())
            .to_string_lossy()
            .to_string();
        match std::fs::read_to_string(entry.path()) {
            Ok(text) => files.push((rel, text)),
            Err(e) => {
                warn!(path = %entry.path().display(), error = %e, "skipping unreadable file");
                skipped += 1;
            }
        }
    }
    if skipped > 0 {
        warn!(skipped, "some files were skipped");
    }
    files.sort_by(|a, b| a.0.cmp(&b.0));
    Ok(files)
}

pub struct DatasetStats {
    pub sessions: usize,
    pub emitted: usize,
    pub kept: usize,
}

/// One repository's files, relative path + content.
pub struct RepoFiles {
    pub name: String,
    pub files: Vec<(String, String)>,
}

/// Runs `sessions_per_repo` simulated sessions per repository: each session
/// lands on a seeded file and start position, mimicking a developer
/// navigating to a random location and typing for a while. `min_functions >
/// 0` keeps only prompts parsing to MORE than that many functions.
pub fn build_dataset(
    repos: &[RepoFiles],
    sessions_per_repo: usize,
    params: &SimulatorParams,
    master_seed: u64,
    min_functions: usize,
) -> (Vec<PromptRecord>, DatasetStats) {
    let mut records = Vec::new();
    let mut stats = DatasetStats { sessions: 0, emitted: 0, kept: 0 };
    for repo in repos {
        if repo.files.is_empty() {
            continue;
        }
        for session in 0..sessions_per_repo {
            let seed = derive_session_seed(master_seed, &repo.name, session);
            let (path, text) = &repo.files[(seed % repo.files.len() as u64) as usize];
            let line_count = text.lines().count().max(1);
            let start_line = ((seed >> 8) % line_count as u64) as usize / 2;
            let session_records = simulate_session(text, path, start_line, params, seed);
            stats.sessions += 1;
            stats.emitted += session_records.len();
            for record in session_records {
                if min_functions > 0 {
                    let info = parse_segment(&record.text);
                    if info.functions.len() <= min_functions {
                        continue;
                    }
                }
                stats.kept += 1;
                records.push(record);
            }
        }
    }
    (records, stats)
}

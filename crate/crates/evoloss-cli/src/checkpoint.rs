//! Textual checkpoint format for evolved genomes.
//!
//! A checkpoint is `key=value` header lines, one blank line, then the
//! genome values one per line:
//!
//! ```text
//! format_version=1
//! class_count=10
//! filter_count=8
//! kernel_width=3
//! genome_length=301
//! best_fitness=0.4375
//! episode_found=17
//!
//! 2.41798793102857489e-1
//! ...
//! ```
//!
//! Values are printed with 17 significant digits, enough to reproduce
//! every f64 bit-exactly on re-read.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use evoloss::loss::{MlnArch, MlnGenome};

use crate::CliError;

pub const FORMAT_VERSION: u64 = 1;

/// An evolved genome with the metadata needed to reuse it.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub genome: MlnGenome,
    pub best_fitness: f64,
    pub episode_found: usize,
}

/// Renders a checkpoint in the textual format.
pub fn render(cp: &Checkpoint) -> String {
    let arch = cp.genome.arch();
    let mut out = String::new();
    let _ = writeln!(out, "format_version={FORMAT_VERSION}");
    let _ = writeln!(out, "class_count={}", arch.class_count);
    let _ = writeln!(out, "filter_count={}", arch.filter_count);
    let _ = writeln!(out, "kernel_width={}", arch.kernel_width);
    let _ = writeln!(out, "genome_length={}", cp.genome.len());
    let _ = writeln!(out, "best_fitness={:.17e}", cp.best_fitness);
    let _ = writeln!(out, "episode_found={}", cp.episode_found);
    out.push('\n');
    for v in cp.genome.encode() {
        let _ = writeln!(out, "{v:.17e}");
    }
    out
}

pub fn write(path: &Path, cp: &Checkpoint) -> Result<(), CliError> {
    fs::write(path, render(cp))
        .map_err(|e| CliError::Internal(format!("cannot write checkpoint {}: {e}", path.display())))
}

fn header_u64(
    fields: &[(String, String)],
    key: &str,
    path: &Path,
) -> Result<u64, CliError> {
    let raw = fields
        .iter()
        .find(|(k, _)| k == key)
        .map(|(_, v)| v)
        .ok_or_else(|| {
            CliError::Data(format!("checkpoint {}: missing key '{key}'", path.display()))
        })?;
    raw.parse().map_err(|_| {
        CliError::Data(format!(
            "checkpoint {}: unparseable value '{raw}' for key '{key}'",
            path.display()
        ))
    })
}

fn header_f64(fields: &[(String, String)], key: &str, path: &Path) -> Result<f64, CliError> {
    let raw = fields
        .iter()
        .find(|(k, _)| k == key)
        .map(|(_, v)| v)
        .ok_or_else(|| {
            CliError::Data(format!("checkpoint {}: missing key '{key}'", path.display()))
        })?;
    raw.parse().map_err(|_| {
        CliError::Data(format!(
            "checkpoint {}: unparseable value '{raw}' for key '{key}'",
            path.display()
        ))
    })
}

/// Parses a checkpoint, verifying the declared length against both the
/// architecture formula and the number of value lines.
pub fn read(path: &Path) -> Result<Checkpoint, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Data(format!("cannot read checkpoint {}: {e}", path.display())))?;
    let mut lines = text.lines();

    let mut fields: Vec<(String, String)> = Vec::new();
    for line in lines.by_ref() {
        let line = line.trim();
        if line.is_empty() {
            break;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| {
            CliError::Data(format!(
                "checkpoint {}: header line without '=': '{line}'",
                path.display()
            ))
        })?;
        fields.push((k.trim().to_string(), v.trim().to_string()));
    }

    let version = header_u64(&fields, "format_version", path)?;
    if version != FORMAT_VERSION {
        return Err(CliError::Data(format!(
            "checkpoint {}: unsupported format_version {version}",
            path.display()
        )));
    }
    let class_count = header_u64(&fields, "class_count", path)? as usize;
    let filter_count = header_u64(&fields, "filter_count", path)? as usize;
    let kernel_width = header_u64(&fields, "kernel_width", path)? as usize;
    let genome_length = header_u64(&fields, "genome_length", path)? as usize;
    let best_fitness = header_f64(&fields, "best_fitness", path)?;
    let episode_found = header_u64(&fields, "episode_found", path)? as usize;

    let arch = MlnArch::new(class_count, filter_count, kernel_width)
        .map_err(|e| CliError::Data(format!("checkpoint {}: {e}", path.display())))?;
    if genome_length != arch.genome_len() {
        return Err(CliError::Data(format!(
            "checkpoint {}: genome_length {} does not match architecture ({} expected)",
            path.display(),
            genome_length,
            arch.genome_len()
        )));
    }

    let mut phi = Vec::with_capacity(genome_length);
    for line in lines {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let v: f64 = line.parse().map_err(|_| {
            CliError::Data(format!(
                "checkpoint {}: unparseable genome value '{line}'",
                path.display()
            ))
        })?;
        phi.push(v);
    }
    if phi.len() != genome_length {
        return Err(CliError::Data(format!(
            "checkpoint {}: header declares {} genome values but the file holds {}",
            path.display(),
            genome_length,
            phi.len()
        )));
    }
    let genome = MlnGenome::decode(arch, phi)
        .map_err(|e| CliError::Data(format!("checkpoint {}: {e}", path.display())))?;
    Ok(Checkpoint {
        genome,
        best_fitness,
        episode_found,
    })
}

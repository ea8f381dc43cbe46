use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use arrowpush::mechanism::MechanismRecord;

use crate::commands::Fail;

pub fn input(path: &Path) -> Result<Box<dyn BufRead>, Fail> {
    if path == Path::new("-") {
        return Ok(Box::new(BufReader::new(io::stdin())));
    }
    let file = File::open(path).map_err(|e| Fail::usage(format!("{}: {e}", path.display())))?;
    Ok(Box::new(BufReader::new(file)))
}

pub fn output(path: Option<&PathBuf>) -> Result<Box<dyn Write>, Fail> {
    Ok(match path {
        Some(p) => {
            let file = File::create(p).map_err(|e| Fail::usage(format!("{}: {e}", p.display())))?;
            Box::new(BufWriter::new(file))
        }
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

/// Reads unified JSONL records in chunks of `chunk`, each record tagged
/// with its 1-based line number. Memory stays bounded by the chunk size.
pub fn for_each_chunk(
    path: &Path,
    chunk: usize,
    mut f: impl FnMut(&[(usize, MechanismRecord)]) -> Result<(), Fail>,
) -> Result<(), Fail> {
    let reader = input(path)?;
    let mut batch = Vec::with_capacity(chunk);
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Fail::usage(format!("{}: {e}", path.display())))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: MechanismRecord = serde_json::from_str(&line)
            .map_err(|e| Fail::usage(format!("{}:{}: {e}", path.display(), i + 1)))?;
        batch.push((i + 1, rec));
        if batch.len() == chunk {
            f(&batch)?;
            batch.clear();
        }
    }
    if !batch.is_empty() {
        f(&batch)?;
    }
    Ok(())
}

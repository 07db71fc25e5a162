use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use serde::Serialize;

use catmc::links::{LinkFamily, MultinomialLogitFamily};
use catmc::{Error, Result};

pub fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| Error::InvalidInput(format!("cannot open {}: {e}", path.display())))
}

pub fn read_to_string(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::InvalidInput(format!("cannot read {}: {e}", path.display())))
}

pub fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}

pub fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    Ok(())
}

pub fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text)?;
    Ok(())
}

/// Loads a family from JSON, or builds the evenly spaced logit family for `default`.
pub fn load_family(spec: &str, k: usize) -> Result<LinkFamily> {
    if spec == "default" {
        return Ok(MultinomialLogitFamily::evenly_spaced(k)?.into());
    }
    LinkFamily::from_json_str(&read_to_string(Path::new(spec))?)
}

pub fn load_labels(labels: Option<&str>, k: usize) -> Result<Vec<f64>> {
    let labels = match labels {
        Some(s) => catmc::io::parse_labels(s)?,
        None => catmc::sampling::default_labels(k),
    };
    if labels.len() != k {
        return Err(Error::InvalidInput(format!(
            "{} labels given but the family has K = {k}",
            labels.len()
        )));
    }
    Ok(labels)
}

pub fn parse_list(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .map_err(|_| Error::InvalidInput(format!("cannot parse {t:?} as a number")))
        })
        .collect()
}

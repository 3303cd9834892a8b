//! Reading and writing the on-disk formats: architecture and grid JSON,
//! IDX image/label pairs and dataset CSV.

use std::fs;
use std::io::Write;
use std::path::Path;

use nnmass_core::analysis::SweepGrid;
use nnmass_core::datasets::{self, Dataset};
use nnmass_core::ArchitectureSpec;
use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{Error, Result};

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_slice(&bytes).map_err(|e| Error::json(path, e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::json(path, e))?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Architecture JSON, validated.
pub fn read_arch(path: &Path) -> Result<ArchitectureSpec> {
    let spec: ArchitectureSpec = read_json(path)?;
    spec.validate().map_err(|e| Error::in_file(path, e))?;
    Ok(spec)
}

pub fn read_grid(path: &Path) -> Result<SweepGrid> {
    let grid: SweepGrid = read_json(path)?;
    grid.validate().map_err(|e| Error::in_file(path, e))?;
    Ok(grid)
}

/// Parses an IDX image file and its label file; errors name the offending file.
pub fn load_idx(images: &Path, labels: &Path) -> Result<Dataset> {
    let img = fs::read(images).map_err(|e| Error::io(images, e))?;
    let lbl = fs::read(labels).map_err(|e| Error::io(labels, e))?;
    datasets::parse_idx(&img, &lbl).map_err(|e| {
        let path = match &e {
            nnmass_core::Error::Format {
                part: nnmass_core::IdxPart::Labels,
                ..
            } => labels,
            _ => images,
        };
        Error::in_file(path, e)
    })
}

pub fn write_idx(ds: &Dataset, images: &Path, labels: &Path) -> Result<()> {
    let (img, lbl) = datasets::encode_idx(ds)?;
    fs::write(images, img).map_err(|e| Error::io(images, e))?;
    fs::write(labels, lbl).map_err(|e| Error::io(labels, e))
}

/// One row per sample: `f0..f{k-1}` then `label`.
pub fn write_dataset_csv(ds: &Dataset, path: &Path) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::Writer::from_writer(std::io::BufWriter::new(file));
    let k = ds.feature_dim();
    let mut header: Vec<String> = (0..k).map(|i| format!("f{i}")).collect();
    header.push("label".into());
    w.write_record(&header).map_err(|e| Error::csv(path, e))?;
    let mut record = Vec::with_capacity(k + 1);
    for i in 0..ds.len() {
        record.clear();
        record.extend(ds.row(i).iter().map(|v| v.to_string()));
        record.push(ds.label(i).to_string());
        w.write_record(&record).map_err(|e| Error::csv(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// A CSV file whose header is written up front and which is flushed after
/// every row, so an interrupted run leaves a valid prefix.
pub struct RowWriter {
    path: std::path::PathBuf,
    inner: csv::Writer<fs::File>,
}

impl RowWriter {
    pub fn create(path: &Path, header: &[&str]) -> Result<Self> {
        let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut inner = csv::WriterBuilder::new().has_headers(false).from_writer(file);
        inner.write_record(header).map_err(|e| Error::csv(path, e))?;
        inner.flush().map_err(|e| Error::io(path, e))?;
        Ok(RowWriter {
            path: path.to_path_buf(),
            inner,
        })
    }

    pub fn write<T: Serialize>(&mut self, row: &T) -> Result<()> {
        self.inner.serialize(row).map_err(|e| Error::csv(&self.path, e))?;
        self.inner.flush().map_err(|e| Error::io(&self.path, e))
    }
}

/// Writes a single JSON document to stdout.
pub fn print_json<T: Serialize>(value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::Input(e.to_string()))?;
    let mut out = std::io::stdout().lock();
    writeln!(out, "{text}").map_err(|e| Error::io(Path::new("<stdout>"), e))
}

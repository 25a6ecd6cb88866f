use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use crate::datasets::Dataset;
use crate::error::{HoroError, Result};
use crate::hypgeo::PoincarePoint;

/// A row whose coordinates were rescaled into the ball.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadWarning {
    pub line: u64,
    pub message: String,
}

struct Table {
    points: Vec<PoincarePoint>,
    labels: Vec<String>,
    warnings: Vec<LoadWarning>,
}

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|source| HoroError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn read_table<R: Read>(reader: R, path: &Path, require_label: bool) -> Result<Table> {
    let parse_err = |line: u64, message: String| HoroError::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header = rdr
        .headers()
        .map_err(|e| parse_err(1, e.to_string()))?
        .clone();
    if header.is_empty() || (header.len() == 1 && header[0].is_empty()) {
        return Err(parse_err(1, "empty file".into()));
    }
    let labelled = header.iter().next_back() == Some("label");
    if require_label && !labelled {
        return Err(parse_err(1, "last header column must be `label`".into()));
    }
    let dims = header.len() - usize::from(labelled);
    if dims == 0 {
        return Err(parse_err(1, "no coordinate columns".into()));
    }

    let mut table = Table {
        points: Vec::new(),
        labels: Vec::new(),
        warnings: Vec::new(),
    };
    for record in rdr.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            parse_err(line, e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != header.len() {
            return Err(parse_err(
                line,
                format!("expected {} fields, found {}", header.len(), record.len()),
            ));
        }
        let coords = (0..dims)
            .map(|j| {
                let field = &record[j];
                let v: f64 = field
                    .parse()
                    .map_err(|_| parse_err(line, format!("column {}: `{field}` is not a number", j + 1)))?;
                if !v.is_finite() {
                    return Err(parse_err(line, format!("column {}: non-finite value", j + 1)));
                }
                Ok(v)
            })
            .collect::<Result<Vec<f64>>>()?;
        let (point, clamped) =
            PoincarePoint::new_reporting(coords).map_err(|e| parse_err(line, e.to_string()))?;
        if clamped {
            log::warn!("{}:{line}: point outside the ball rescaled to the clamp radius", path.display());
            table.warnings.push(LoadWarning {
                line,
                message: "point outside the ball rescaled to the clamp radius".into(),
            });
        }
        table.points.push(point);
        if labelled {
            table.labels.push(record[dims].to_string());
        }
    }
    if table.points.is_empty() {
        return Err(parse_err(1, "no data rows".into()));
    }
    Ok(table)
}

fn dataset_from_table(table: Table, name: String) -> Result<Dataset> {
    let mut class_names: Vec<String> = Vec::new();
    let labels = table
        .labels
        .iter()
        .map(|l| match class_names.iter().position(|c| c == l) {
            Some(i) => i,
            None => {
                class_names.push(l.clone());
                class_names.len() - 1
            }
        })
        .collect();
    Dataset::new(table.points, labels, class_names, name)
}

fn stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default()
}

/// Reads `dim_0,...,dim_{n-1},label` rows. Labels are numbered in order of
/// first appearance.
pub fn load_csv(path: impl AsRef<Path>) -> Result<Dataset> {
    load_csv_with_warnings(path).map(|(d, _)| d)
}

pub fn load_csv_with_warnings(path: impl AsRef<Path>) -> Result<(Dataset, Vec<LoadWarning>)> {
    let path = path.as_ref();
    let mut table = read_table(open(path)?, path, true)?;
    let warnings = std::mem::take(&mut table.warnings);
    Ok((dataset_from_table(table, stem(path))?, warnings))
}

/// Reads points only; a trailing `label` column is ignored if present.
pub fn load_unlabeled_csv(path: impl AsRef<Path>) -> Result<Vec<PoincarePoint>> {
    let path = path.as_ref();
    let table = read_table(open(path)?, path, false)?;
    Ok(table.points)
}

/// Writes a dataset in the [`load_csv`] format with shortest round-trip
/// float formatting.
pub fn save_csv(dataset: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let io_err = |source: std::io::Error| HoroError::Io {
        path: path.to_path_buf(),
        source,
    };
    let file = File::create(path).map_err(io_err)?;
    write_csv(dataset, file).map_err(io_err)
}

pub(crate) fn write_csv<W: Write>(dataset: &Dataset, out: W) -> std::io::Result<()> {
    let mut wtr = csv::Writer::from_writer(out);
    let mut header: Vec<String> = (0..dataset.dim()).map(|j| format!("dim_{j}")).collect();
    header.push("label".into());
    wtr.write_record(&header)?;
    for (p, &l) in dataset.points.iter().zip(&dataset.labels) {
        let mut row: Vec<String> = p.coords().iter().map(|c| c.to_string()).collect();
        row.push(dataset.class_names[l].clone());
        wtr.write_record(&row)?;
    }
    wtr.flush()
}

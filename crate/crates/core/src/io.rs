//! CSV tables and model files.
//!
//! Floats are written as `{:.9e}` (10 significant digits). Every file is
//! written to a temporary sibling first and renamed into place.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;

use crate::ensemble::{ResponseEnsemble, TimeGrid};
use crate::error::{invalid, shape, Error, Result};
use crate::surrogate::LatentSurrogate;
use crate::uq::{ForwardUqResult, ParameterSummary, PosteriorSamples};

pub const INPUTS_FILE: &str = "inputs.csv";
pub const RESPONSES_FILE: &str = "responses.csv";
pub const MEAN_STD_FILE: &str = "mean_std.csv";
pub const EXTREMES_FILE: &str = "extremes_kde.csv";
pub const DRAWS_FILE: &str = "posterior_draws.csv";
pub const SUMMARY_FILE: &str = "posterior_summary.csv";

pub fn fmt_f64(v: f64) -> String {
    format!("{v:.9e}")
}

/// Writes `bytes` to `path` via a temporary file in the same directory.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(dir)?;
    let name = path.file_name().ok_or_else(|| invalid(format!("'{}' is not a file path", path.display())))?;
    let tmp: PathBuf = dir.join(format!(".{}.tmp{}", name.to_string_lossy(), std::process::id()));
    let result = (|| {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    })();
    if result.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    result.map_err(|e| Error::from(e).context(format!("writing {}", path.display())))
}

/// Header plus string rows, written atomically.
pub fn write_table(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    if !header.is_empty() {
        w.write_record(header)?;
    }
    for r in rows {
        w.write_record(r)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Format(e.to_string()))?;
    write_atomic(path, &bytes)
}

fn float_rows(m: &DMatrix<f64>) -> Vec<Vec<String>> {
    (0..m.nrows()).map(|i| m.row(i).iter().map(|&v| fmt_f64(v)).collect()).collect()
}

fn parse_f64(s: &str, path: &Path, line: usize) -> Result<f64> {
    s.trim()
        .parse::<f64>()
        .map_err(|_| Error::Format(format!("{}: line {line}: '{s}' is not a number", path.display())))
}

fn read_rows(path: &Path, has_headers: bool) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let mut r = csv::ReaderBuilder::new()
        .has_headers(has_headers)
        .from_path(path)
        .map_err(|e| Error::from(e).context(format!("reading {}", path.display())))?;
    let header = if has_headers { r.headers()?.iter().map(|s| s.trim().to_string()).collect() } else { Vec::new() };
    let mut rows = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        let line = i + 1 + usize::from(has_headers);
        rows.push(rec.iter().map(|s| parse_f64(s, path, line)).collect::<Result<Vec<_>>>()?);
    }
    Ok((header, rows))
}

fn to_matrix(rows: &[Vec<f64>], ncols: usize, path: &Path) -> Result<DMatrix<f64>> {
    if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != ncols) {
        return Err(shape(format!("{}: row {} has {} fields, expected {ncols}", path.display(), i + 1, r.len())));
    }
    Ok(DMatrix::from_fn(rows.len(), ncols, |i, j| rows[i][j]))
}

/// `inputs.csv` (named columns, one row per sample) and `responses.csv`
/// (first row the time nodes, then one curve per row).
pub fn write_ensemble(dir: &Path, e: &ResponseEnsemble) -> Result<()> {
    let names: Vec<&str> = e.input_names.iter().map(String::as_str).collect();
    write_table(&dir.join(INPUTS_FILE), &names, &float_rows(&e.inputs))?;
    let mut rows = vec![e.grid.nodes().into_iter().map(fmt_f64).collect::<Vec<_>>()];
    rows.extend(float_rows(&e.responses));
    write_table(&dir.join(RESPONSES_FILE), &[], &rows)
}

pub fn read_ensemble(inputs: &Path, responses: &Path) -> Result<ResponseEnsemble> {
    let (names, xrows) = read_rows(inputs, true)?;
    let x = to_matrix(&xrows, names.len(), inputs)?;
    let (_, mut yrows) = read_rows(responses, false)?;
    if yrows.is_empty() {
        return Err(Error::Format(format!("{}: missing time-node row", responses.display())));
    }
    let times = yrows.remove(0);
    let grid = TimeGrid::from_nodes(&times).map_err(|e| e.context(responses.display().to_string()))?;
    let y = to_matrix(&yrows, times.len(), responses)?;
    ResponseEnsemble::new(x, y, grid, names)
}

/// Named input columns, one row per sample.
pub fn read_inputs(path: &Path) -> Result<(Vec<String>, DMatrix<f64>)> {
    let (names, rows) = read_rows(path, true)?;
    let x = to_matrix(&rows, names.len(), path)?;
    Ok((names, x))
}

/// Observation table: time in column 1, one observation per further column.
pub fn write_observations(path: &Path, grid: &TimeGrid, obs: &DMatrix<f64>) -> Result<()> {
    if obs.ncols() != grid.len() {
        return Err(shape("observation length does not match the grid"));
    }
    let mut header = vec!["t".to_string()];
    header.extend((1..=obs.nrows()).map(|i| format!("obs{i}")));
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    let rows = (0..grid.len())
        .map(|j| std::iter::once(grid.node(j)).chain(obs.column(j).iter().copied()).map(fmt_f64).collect())
        .collect::<Vec<_>>();
    write_table(path, &header, &rows)
}

/// Returns the grid and an `N_obs x n_t` matrix (one observation per row).
pub fn read_observations(path: &Path) -> Result<(TimeGrid, DMatrix<f64>)> {
    let (header, rows) = read_rows(path, true)?;
    if header.len() < 2 {
        return Err(invalid(format!("{}: no observation columns", path.display())));
    }
    let table = to_matrix(&rows, header.len(), path)?;
    let times: Vec<f64> = table.column(0).iter().copied().collect();
    let grid = TimeGrid::from_nodes(&times).map_err(|e| e.context(path.display().to_string()))?;
    let obs = table.columns(1, header.len() - 1).transpose();
    Ok((grid, obs))
}

/// `mean_std.csv` and `extremes_kde.csv`.
pub fn write_forward(dir: &Path, r: &ForwardUqResult) -> Result<()> {
    let rows: Vec<Vec<String>> =
        (0..r.times.len()).map(|j| vec![fmt_f64(r.times[j]), fmt_f64(r.mean[j]), fmt_f64(r.std[j])]).collect();
    write_table(&dir.join(MEAN_STD_FILE), &["t", "mean", "std"], &rows)?;
    let rows = match &r.kde {
        Some(k) => (0..k.values.len())
            .map(|i| vec![fmt_f64(k.values[i]), fmt_f64(k.pdf_max[i]), fmt_f64(k.pdf_min[i])])
            .collect(),
        None => Vec::new(),
    };
    write_table(&dir.join(EXTREMES_FILE), &["value", "pdf_max", "pdf_min"], &rows)
}

/// `posterior_draws.csv` (iteration, walker, parameters...) and
/// `posterior_summary.csv` (variable, mean, q025, q975).
pub fn write_posterior(dir: &Path, names: &[String], s: &PosteriorSamples, summary: &[ParameterSummary]) -> Result<()> {
    if names.len() != s.draws.ncols() {
        return Err(shape("parameter names do not match draws"));
    }
    let mut header = vec!["iteration", "walker"];
    header.extend(names.iter().map(String::as_str));
    let first = s.iterations - s.draws.nrows() / s.walkers;
    let rows: Vec<Vec<String>> = (0..s.draws.nrows())
        .map(|i| {
            let mut r = vec![(first + i / s.walkers).to_string(), (i % s.walkers).to_string()];
            r.extend(s.draws.row(i).iter().map(|&v| fmt_f64(v)));
            r
        })
        .collect();
    write_table(&dir.join(DRAWS_FILE), &header, &rows)?;
    let rows: Vec<Vec<String>> = summary
        .iter()
        .map(|p| vec![p.variable.clone(), fmt_f64(p.mean), fmt_f64(p.q025), fmt_f64(p.q975)])
        .collect();
    write_table(&dir.join(SUMMARY_FILE), &["variable", "mean", "q025", "q975"], &rows)
}

pub fn save_surrogate(path: &Path, s: &LatentSurrogate) -> Result<()> {
    write_atomic(path, s.to_json()?.as_bytes())
}

pub fn load_surrogate(path: &Path) -> Result<LatentSurrogate> {
    let text = fs::read_to_string(path).map_err(|e| Error::from(e).context(format!("reading {}", path.display())))?;
    LatentSurrogate::from_json(&text).map_err(|e| e.context(path.display().to_string()))
}

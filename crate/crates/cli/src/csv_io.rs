//! CSV import/export helpers. All files carry a header row; floats are
//! written with 17 significant digits.

use std::fs;
use std::io::Write;
use std::path::Path;

use nalgebra::DVector;

use crate::CliError;

pub fn fmt_float(v: f64) -> String {
    format!("{v:.16e}")
}

/// Read a sample set: one row per sample, comma-separated coordinates.
/// A non-numeric first row is treated as a header and skipped.
pub fn read_samples(path: &Path) -> Result<Vec<DVector<f64>>, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::config(format!("cannot read {}: {e}", path.display())))?;
    let mut samples = Vec::new();
    let mut dim = None;
    for (idx, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let parsed: Result<Vec<f64>, _> =
            line.split(',').map(|f| f.trim().parse::<f64>()).collect();
        match parsed {
            Ok(vals) => {
                match dim {
                    None => dim = Some(vals.len()),
                    Some(d) if d != vals.len() => {
                        return Err(CliError::config(format!(
                            "{}: row {} has {} fields, expected {d}",
                            path.display(),
                            idx + 1,
                            vals.len()
                        )))
                    }
                    _ => {}
                }
                samples.push(DVector::from_vec(vals));
            }
            Err(_) if idx == 0 => {} // header row
            Err(e) => {
                return Err(CliError::config(format!(
                    "{}: row {}: {e}",
                    path.display(),
                    idx + 1
                )))
            }
        }
    }
    if samples.is_empty() {
        return Err(CliError::config(format!("{}: no samples found", path.display())));
    }
    Ok(samples)
}

/// Write labelled state rows: sample_id, i, j, then the state coordinates.
pub fn write_labelled_states(
    path: &Path,
    rows: &[((usize, usize), DVector<f64>)],
    state_dim: usize,
) -> Result<(), CliError> {
    let mut out = String::new();
    out.push_str("sample_id,i,j");
    for c in 0..state_dim {
        out.push_str(&format!(",x{c}"));
    }
    out.push('\n');
    for (id, ((i, j), x)) in rows.iter().enumerate() {
        out.push_str(&format!("{id},{i},{j}"));
        for v in x.iter() {
            out.push(',');
            out.push_str(&fmt_float(*v));
        }
        out.push('\n');
    }
    write_file(path, out.as_bytes())
}

/// Write a density grid: one row per node, coordinates then the pdf value.
pub fn write_density_grid(
    path: &Path,
    coords: &[Vec<f64>],
    values: &[f64],
) -> Result<(), CliError> {
    let dim = coords.first().map(|c| c.len()).unwrap_or(0);
    let mut out = String::new();
    for c in 0..dim {
        out.push_str(&format!("x{c},"));
    }
    out.push_str("pdf\n");
    for (c, v) in coords.iter().zip(values) {
        for x in c {
            out.push_str(&fmt_float(*x));
            out.push(',');
        }
        out.push_str(&fmt_float(*v));
        out.push('\n');
    }
    write_file(path, out.as_bytes())
}

pub fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)
            .map_err(|e| CliError::config(format!("cannot create {}: {e}", parent.display())))?;
    }
    let mut f = fs::File::create(path)
        .map_err(|e| CliError::config(format!("cannot create {}: {e}", path.display())))?;
    f.write_all(bytes)
        .map_err(|e| CliError::config(format!("cannot write {}: {e}", path.display())))
}

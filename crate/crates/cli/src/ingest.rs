//! Delimited-text ingestion with explicit column mapping.
//!
//! Rows with missing values in any mapped column are dropped and counted;
//! rows with a non-positive contaminated measurement are rejected and
//! reported individually by input row index.

use crate::errors::{CliError, CliResult};
use ndarray::Array2;
use simfex_core::error_model::ReplicateData;
use std::collections::BTreeMap;
use std::path::Path;

#[derive(Debug, Clone, Default)]
pub struct ColumnMapping {
    pub response: Option<String>,
    pub covariate: String,
    pub replicates: Vec<String>,
    pub covariates: Vec<String>,
    pub group: Option<String>,
}

#[derive(Debug, Default)]
pub struct IngestReport {
    pub n_rows_read: usize,
    pub n_missing_dropped: usize,
    /// (1-based data row index, reason)
    pub rejected: Vec<(usize, String)>,
    pub n_used: usize,
}

#[derive(Debug)]
pub struct Ingested {
    pub y: Option<Vec<f64>>,
    pub w: Vec<f64>,
    pub replicates: Option<ReplicateData>,
    pub z: Option<Array2<f64>>,
    /// Group labels per row together with the sorted level names.
    pub groups: Option<(Vec<usize>, Vec<String>)>,
}

const MIN_USABLE_ROWS: usize = 50;

fn is_missing(field: &str) -> bool {
    let t = field.trim();
    t.is_empty() || t.eq_ignore_ascii_case("na") || t.eq_ignore_ascii_case("nan")
}

pub fn ingest(path: &Path, mapping: &ColumnMapping) -> CliResult<(Ingested, IngestReport)> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| CliError::data(format!("cannot read {}: {e}", path.display())))?;
    let headers: Vec<String> =
        reader.headers().map_err(|e| CliError::data(e.to_string()))?.iter().map(String::from).collect();

    let col = |name: &str| -> CliResult<usize> {
        headers.iter().position(|h| h == name).ok_or_else(|| {
            CliError::config(format!(
                "mapped column '{name}' not found in {} (columns: {})",
                path.display(),
                headers.join(", ")
            ))
        })
    };

    let w_idx = col(&mapping.covariate)?;
    let y_idx = mapping.response.as_deref().map(col).transpose()?;
    let rep_idx: Vec<usize> = mapping.replicates.iter().map(|c| col(c)).collect::<CliResult<_>>()?;
    let z_idx: Vec<usize> = mapping.covariates.iter().map(|c| col(c)).collect::<CliResult<_>>()?;
    let group_idx = mapping.group.as_deref().map(col).transpose()?;

    let mut report = IngestReport::default();
    let mut y = Vec::new();
    let mut w = Vec::new();
    let mut reps: Vec<Vec<f64>> = Vec::new();
    let mut z_rows: Vec<Vec<f64>> = Vec::new();
    let mut group_raw: Vec<String> = Vec::new();

    'rows: for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| CliError::data(format!("row {}: {e}", i + 1)))?;
        report.n_rows_read += 1;
        let mut mapped: Vec<usize> = vec![w_idx];
        mapped.extend(&rep_idx);
        mapped.extend(&z_idx);
        if let Some(yi) = y_idx {
            mapped.push(yi);
        }
        if let Some(gi) = group_idx {
            mapped.push(gi);
        }
        for &c in &mapped {
            match record.get(c) {
                Some(f) if !is_missing(f) => {}
                _ => {
                    report.n_missing_dropped += 1;
                    continue 'rows;
                }
            }
        }
        let parse = |c: usize| -> Option<f64> { record.get(c)?.parse::<f64>().ok() };
        let numeric: Vec<usize> = {
            let mut v: Vec<usize> = vec![w_idx];
            v.extend(&rep_idx);
            v.extend(&z_idx);
            if let Some(yi) = y_idx {
                v.push(yi);
            }
            v
        };
        if numeric.iter().any(|&c| parse(c).is_none()) {
            report.n_missing_dropped += 1;
            continue;
        }

        let wv = parse(w_idx).unwrap();
        if wv <= 0.0 {
            report.rejected.push((i + 1, format!("non-positive covariate value {wv}")));
            continue;
        }
        let rep_vals: Vec<f64> = rep_idx.iter().map(|&c| parse(c).unwrap()).collect();
        if let Some(bad) = rep_vals.iter().find(|v| **v <= 0.0) {
            report.rejected.push((i + 1, format!("non-positive replicate value {bad}")));
            continue;
        }

        w.push(wv);
        if let Some(yi) = y_idx {
            y.push(parse(yi).unwrap());
        }
        if !rep_idx.is_empty() {
            reps.push(rep_vals);
        }
        if !z_idx.is_empty() {
            z_rows.push(z_idx.iter().map(|&c| parse(c).unwrap()).collect());
        }
        if let Some(gi) = group_idx {
            group_raw.push(record.get(gi).unwrap().to_string());
        }
    }

    report.n_used = w.len();
    if report.n_used < MIN_USABLE_ROWS {
        return Err(CliError::data(format!(
            "only {} usable rows after dropping {} with missing values and rejecting {} \
             (need at least {MIN_USABLE_ROWS})",
            report.n_used,
            report.n_missing_dropped,
            report.rejected.len()
        )));
    }

    let replicates = if reps.is_empty() {
        None
    } else {
        Some(ReplicateData::new(reps).map_err(CliError::from)?)
    };
    let z = if z_rows.is_empty() {
        None
    } else {
        let q = z_rows[0].len();
        let flat: Vec<f64> = z_rows.iter().flatten().copied().collect();
        Some(
            Array2::from_shape_vec((report.n_used, q), flat)
                .map_err(|e| CliError::data(e.to_string()))?,
        )
    };
    let groups = if group_raw.is_empty() {
        None
    } else {
        let mut levels: BTreeMap<String, usize> = BTreeMap::new();
        for g in &group_raw {
            let next = levels.len();
            levels.entry(g.clone()).or_insert(next);
        }
        let names: Vec<String> = {
            let mut pairs: Vec<(&String, &usize)> = levels.iter().collect();
            pairs.sort_by_key(|(_, &i)| i);
            pairs.into_iter().map(|(n, _)| n.clone()).collect()
        };
        let labels: Vec<usize> = group_raw.iter().map(|g| levels[g]).collect();
        Some((labels, names))
    };

    Ok((Ingested { y: y_idx.map(|_| y), w, replicates, z, groups }, report))
}

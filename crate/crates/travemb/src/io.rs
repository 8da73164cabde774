//! File formats: raw survey tables, the canonical dataset (columnar CSV plus
//! JSON sidecar), JSON artefacts and training traces.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use travemb_core::category::CategoryMap;
use travemb_core::data::{feature, CategoricalColumn, ChoiceDataset, RawTable, SplitIndices};
use travemb_core::embed::TrainRun;

use crate::error::{io_err, Error, Result};

/// Reads a header-first table of numbers separated by tabs or commas
/// (whichever appears in the header line).
pub fn load_raw(path: &Path) -> Result<RawTable> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    parse_raw(&text, path)
}

pub fn parse_raw(text: &str, path: &Path) -> Result<RawTable> {
    let header = text.lines().next().unwrap_or("");
    if header.trim().is_empty() {
        return Err(Error::MalformedHeader { path: path.into() });
    }
    let delimiter = if header.contains('\t') { b'\t' } else { b',' };
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(delimiter)
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(text.as_bytes());
    let csv_err = |source| Error::Csv {
        path: path.into(),
        source,
    };
    let columns: Vec<String> = reader
        .headers()
        .map_err(csv_err)?
        .iter()
        .map(str::to_owned)
        .collect();
    if columns.iter().any(String::is_empty) {
        return Err(Error::MalformedHeader { path: path.into() });
    }
    let mut rows = Vec::new();
    for (r, record) in reader.records().enumerate() {
        let record = record.map_err(csv_err)?;
        let mut row = Vec::with_capacity(record.len());
        for (c, cell) in record.iter().enumerate() {
            let value = cell.parse::<f64>().map_err(|_| Error::BadCell {
                path: path.into(),
                row: r + 1,
                column: columns.get(c).cloned().unwrap_or_else(|| format!("#{c}")),
                value: cell.to_owned(),
            })?;
            row.push(value);
        }
        rows.push(row);
    }
    Ok(RawTable::new(columns, rows)?)
}

/// JSON sidecar of a saved dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSidecar {
    pub alternatives: Vec<String>,
    /// Category labels per variable, in index order.
    pub categories: BTreeMap<String, Vec<String>>,
    /// Derived feature name and how it was computed.
    pub features: BTreeMap<String, String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub split: Option<SplitIndices>,
}

/// Paths of the CSV and sidecar written for `stem`.
pub fn dataset_paths(dir: &Path, stem: &str) -> (PathBuf, PathBuf) {
    (dir.join(format!("{stem}.csv")), dir.join(format!("{stem}.json")))
}

/// Writes `data` as `<stem>.csv` and `<stem>.json` under `dir`.
pub fn save_dataset(dir: &Path, stem: &str, data: &ChoiceDataset, split: Option<&SplitIndices>) -> Result<()> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let (csv_path, json_path) = dataset_paths(dir, stem);
    let alts = data.alternatives();
    let mut header = vec!["observation_id".to_owned(), "respondent_id".to_owned(), "choice".to_owned()];
    header.extend(alts.iter().map(|a| format!("available_{a}")));
    header.extend(data.features().keys().cloned());
    header.extend(data.categorical_variables().keys().cloned());

    let mut w = csv::Writer::from_writer(Vec::new());
    let write_err = |source| Error::Csv {
        path: csv_path.clone(),
        source,
    };
    w.write_record(&header).map_err(write_err)?;
    for n in 0..data.len() {
        let mut rec = vec![
            data.observation_ids()[n].to_string(),
            data.respondent_ids()[n].to_string(),
            alts[data.choices()[n]].clone(),
        ];
        rec.extend(data.available(n).iter().map(|&a| u8::from(a).to_string()));
        rec.extend(data.features().values().map(|v| v[n].to_string()));
        rec.extend(data.categorical_variables().values().map(|c| c.label_of(n).to_owned()));
        w.write_record(&rec).map_err(write_err)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io {
        path: csv_path.clone(),
        source: e.into_error(),
    })?;
    fs::write(&csv_path, bytes).map_err(io_err(&csv_path))?;

    let sidecar = DatasetSidecar {
        alternatives: alts.to_vec(),
        categories: data
            .categorical_variables()
            .iter()
            .map(|(k, c)| (k.clone(), c.map.categories().to_vec()))
            .collect(),
        features: data
            .features()
            .keys()
            .map(|k| {
                let def = feature::DEFINITIONS
                    .iter()
                    .find(|(n, _)| n == k)
                    .map_or("", |(_, d)| d);
                (k.clone(), def.to_owned())
            })
            .collect(),
        split: split.cloned(),
    };
    write_json(&json_path, &sidecar)
}

/// Reads a dataset written by [`save_dataset`].
pub fn load_dataset(dir: &Path, stem: &str) -> Result<(ChoiceDataset, DatasetSidecar)> {
    let (csv_path, json_path) = dataset_paths(dir, stem);
    let sidecar: DatasetSidecar = read_json(&json_path)?;
    let mut reader = csv::Reader::from_path(&csv_path).map_err(|source| Error::Csv {
        path: csv_path.clone(),
        source,
    })?;
    let read_err = |source| Error::Csv {
        path: csv_path.clone(),
        source,
    };
    let header: Vec<String> = reader.headers().map_err(read_err)?.iter().map(str::to_owned).collect();
    let col = |name: &str| {
        header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Core(travemb_core::Error::MissingColumn(name.to_owned())))
    };
    let bad = |row: usize, column: &str, value: &str| Error::BadCell {
        path: csv_path.clone(),
        row,
        column: column.to_owned(),
        value: value.to_owned(),
    };

    let id_col = col("observation_id")?;
    let resp_col = col("respondent_id")?;
    let choice_col = col("choice")?;
    let avail_cols: Vec<usize> = sidecar
        .alternatives
        .iter()
        .map(|a| col(&format!("available_{a}")))
        .collect::<Result<_>>()?;
    let feature_cols: Vec<(String, usize)> = sidecar
        .features
        .keys()
        .map(|f| Ok((f.clone(), col(f)?)))
        .collect::<Result<_>>()?;
    let maps: Vec<(String, CategoryMap, usize)> = sidecar
        .categories
        .iter()
        .map(|(v, cats)| Ok((v.clone(), CategoryMap::from_labels(v.as_str(), cats.iter().cloned()), col(v)?)))
        .collect::<Result<_>>()?;

    let mut features: BTreeMap<String, Vec<f64>> = feature_cols.iter().map(|(f, _)| (f.clone(), vec![])).collect();
    let mut codes: Vec<Vec<usize>> = vec![Vec::new(); maps.len()];
    let (mut ids, mut resp, mut choices, mut avail) = (vec![], vec![], vec![], vec![]);
    for (r, record) in reader.records().enumerate() {
        let record = record.map_err(read_err)?;
        let cell = |i: usize| record.get(i).unwrap_or("");
        let row = r + 1;
        ids.push(cell(id_col).parse().map_err(|_| bad(row, "observation_id", cell(id_col)))?);
        resp.push(cell(resp_col).parse().map_err(|_| bad(row, "respondent_id", cell(resp_col)))?);
        let choice = sidecar
            .alternatives
            .iter()
            .position(|a| a == cell(choice_col))
            .ok_or_else(|| bad(row, "choice", cell(choice_col)))?;
        choices.push(choice);
        for &c in &avail_cols {
            avail.push(match cell(c) {
                "1" => true,
                "0" => false,
                other => return Err(bad(row, &header[c], other)),
            });
        }
        for (name, c) in &feature_cols {
            let v: f64 = cell(*c).parse().map_err(|_| bad(row, name, cell(*c)))?;
            features.get_mut(name).expect("declared").push(v);
        }
        for (slot, (v, map, c)) in codes.iter_mut().zip(&maps) {
            let code = map.index_of(cell(*c)).ok_or_else(|| {
                Error::Core(travemb_core::Error::UnknownCategory {
                    variable: v.clone(),
                    label: cell(*c).to_owned(),
                })
            })?;
            slot.push(code);
        }
    }
    let categorical = maps
        .into_iter()
        .zip(codes)
        .map(|((v, map, _), codes)| (v, CategoricalColumn { map, codes }))
        .collect();
    let data = ChoiceDataset::new(sidecar.alternatives.clone(), features, categorical, choices, avail, ids, resp)?;
    Ok((data, sidecar))
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(io_err(parent))?;
    }
    let mut text = serde_json::to_string_pretty(value).map_err(|source| Error::Json {
        path: path.into(),
        source,
    })?;
    text.push('\n');
    fs::write(path, text).map_err(io_err(path))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    serde_json::from_str(&text).map_err(|source| Error::Json {
        path: path.into(),
        source,
    })
}

/// Writes text, creating parent directories.
pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(io_err(parent))?;
    }
    let mut f = fs::File::create(path).map_err(io_err(path))?;
    f.write_all(text.as_bytes()).map_err(io_err(path))
}

/// Rows of string cells to CSV text.
pub fn csv_string(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("writing to memory");
    for r in rows {
        w.write_record(r).expect("writing to memory");
    }
    String::from_utf8(w.into_inner().expect("writing to memory")).expect("utf-8 input")
}

/// Per-epoch training trace: `epoch,train_loss,dev_log_likelihood`.
pub fn trace_csv(run: &TrainRun) -> String {
    let rows: Vec<Vec<String>> = run
        .train_loss
        .iter()
        .zip(&run.dev_log_likelihood_trace)
        .enumerate()
        .map(|(e, (l, d))| vec![(e + 1).to_string(), l.to_string(), d.to_string()])
        .collect();
    csv_string(&["epoch", "train_loss", "dev_log_likelihood"], &rows)
}

//! CSV readers and writers for datasets and curve sets.
//!
//! Dataset files carry the header `id,time,event,x1,...,xd`. Curve files carry
//! `id,t1,...,tK` where the header cells are the grid times and each row holds
//! one subject's nonincreasing survival values.

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::types::{CensoredDataset, CensoredRecord, SurvivalCurveSet, TimeGrid};

fn parse_num(id: &str, field: &str, raw: &str) -> Result<f64> {
    raw.trim()
        .parse::<f64>()
        .map_err(|_| Error::validation(id, field, format!("cannot parse '{raw}' as a number")))
}

pub fn read_dataset<R: Read>(reader: R) -> Result<CensoredDataset> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let names: Vec<&str> = headers.iter().map(str::trim).collect();
    if names.len() < 3 || names[0] != "id" || names[1] != "time" || names[2] != "event" {
        return Err(Error::validation("<header>", "header", "expected columns id,time,event,x1,...,xd"));
    }
    let dimension = names.len() - 3;
    let mut records = Vec::new();
    for row in rdr.records() {
        let row = row?;
        let id = row.get(0).unwrap_or("").trim().to_string();
        if row.len() != names.len() {
            return Err(Error::validation(&id, "covariates", format!("expected {} columns, found {}", names.len(), row.len())));
        }
        let time = parse_num(&id, "time", &row[1])?;
        let event = match row[2].trim() {
            "0" => false,
            "1" => true,
            other => return Err(Error::validation(&id, "event", format!("'{other}' is not 0 or 1"))),
        };
        let covariates = (0..dimension)
            .map(|j| parse_num(&id, names[3 + j], &row[3 + j]))
            .collect::<Result<Vec<_>>>()?;
        records.push(CensoredRecord::new(id, covariates, time, event));
    }
    CensoredDataset::with_dimension(records, dimension)
}

pub fn read_dataset_file(path: &Path) -> Result<CensoredDataset> {
    read_dataset(std::fs::File::open(path)?)
}

pub fn write_dataset<W: Write>(data: &CensoredDataset, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["id".to_string(), "time".into(), "event".into()];
    header.extend((1..=data.dimension()).map(|j| format!("x{j}")));
    w.write_record(&header)?;
    for r in data.iter() {
        let mut row = vec![r.id.clone(), r.observed_time.to_string(), if r.event { "1" } else { "0" }.to_string()];
        row.extend(r.covariates.iter().map(f64::to_string));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_dataset_file(data: &CensoredDataset, path: &Path) -> Result<()> {
    write_dataset(data, std::fs::File::create(path)?)
}

/// Covariate-only subjects: header `id,x1,...,xd`. A dataset file
/// (`id,time,event,...`) is accepted too and its outcome columns are ignored.
pub fn read_covariates<R: Read>(reader: R) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let names: Vec<&str> = headers.iter().map(str::trim).collect();
    if names.first() != Some(&"id") {
        return Err(Error::validation("<header>", "header", "expected columns id,x1,...,xd"));
    }
    let skip = if names.get(1) == Some(&"time") && names.get(2) == Some(&"event") { 3 } else { 1 };
    let mut ids = Vec::new();
    let mut rows = Vec::new();
    let mut seen = std::collections::HashSet::new();
    for row in rdr.records() {
        let row = row?;
        let id = row.get(0).unwrap_or("").trim().to_string();
        if row.len() != names.len() {
            return Err(Error::validation(&id, "covariates", format!("expected {} columns, found {}", names.len(), row.len())));
        }
        if !seen.insert(id.clone()) {
            return Err(Error::validation(&id, "id", "duplicate id"));
        }
        let x = (skip..names.len())
            .map(|j| {
                let v = parse_num(&id, names[j], &row[j])?;
                if v.is_finite() {
                    Ok(v)
                } else {
                    Err(Error::validation(&id, names[j], "not a finite number"))
                }
            })
            .collect::<Result<Vec<_>>>()?;
        ids.push(id);
        rows.push(x);
    }
    Ok((ids, rows))
}

pub fn read_covariates_file(path: &Path) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    read_covariates(std::fs::File::open(path)?)
}

pub fn read_curves<R: Read>(reader: R) -> Result<SurvivalCurveSet> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let headers = rdr.headers()?.clone();
    if headers.len() < 2 || headers.get(0).map(str::trim) != Some("id") {
        return Err(Error::validation("<header>", "header", "expected columns id,t1,...,tK"));
    }
    let times = headers
        .iter()
        .skip(1)
        .map(|h| parse_num("<header>", "time", h))
        .collect::<Result<Vec<_>>>()?;
    let grid = TimeGrid::new(times).map_err(|e| Error::validation("<header>", "time", e.to_string()))?;
    let mut ids = Vec::new();
    let mut rows = Vec::new();
    for row in rdr.records() {
        let row = row?;
        let id = row.get(0).unwrap_or("").trim().to_string();
        if row.len() != grid.len() + 1 {
            return Err(Error::validation(&id, "curve", "row length does not match the time header"));
        }
        let vals = row
            .iter()
            .skip(1)
            .map(|v| parse_num(&id, "curve", v))
            .collect::<Result<Vec<_>>>()?;
        ids.push(id);
        rows.push(vals);
    }
    SurvivalCurveSet::new(ids, grid, rows)
}

pub fn read_curves_file(path: &Path) -> Result<SurvivalCurveSet> {
    read_curves(std::fs::File::open(path)?)
}

pub fn write_curves<W: Write>(curves: &SurvivalCurveSet, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["id".to_string()];
    header.extend(curves.grid().times().iter().map(f64::to_string));
    w.write_record(&header)?;
    for (i, id) in curves.ids().iter().enumerate() {
        let mut row = vec![id.clone()];
        row.extend(curves.row(i).iter().map(f64::to_string));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_curves_file(curves: &SurvivalCurveSet, path: &Path) -> Result<()> {
    write_curves(curves, std::fs::File::create(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dataset_roundtrip() {
        let text = "id,time,event,x1,x2\na,1.5,1,0.1,-2\nb,3,0,1,1\n";
        let ds = read_dataset(text.as_bytes()).unwrap();
        assert_eq!(ds.len(), 2);
        assert_eq!(ds.dimension(), 2);
        let mut out = Vec::new();
        write_dataset(&ds, &mut out).unwrap();
        assert_eq!(read_dataset(out.as_slice()).unwrap(), ds);
    }

    #[test]
    fn non_binary_event_names_record() {
        let err = read_dataset("id,time,event,x1\nq,1,2,0\n".as_bytes()).unwrap_err();
        assert!(matches!(err, Error::Validation { ref id, ref field, .. } if id == "q" && field == "event"));
    }

    #[test]
    fn covariates_from_either_layout() {
        let (ids, x) = read_covariates("id,x1,x2\na,1,2\nb,3,4\n".as_bytes()).unwrap();
        assert_eq!(ids, vec!["a", "b"]);
        assert_eq!(x[1], vec![3.0, 4.0]);
        let (_, x) = read_covariates("id,time,event,x1\na,1,0,7\n".as_bytes()).unwrap();
        assert_eq!(x, vec![vec![7.0]]);
        assert!(read_covariates("id,x1\na,1\na,2\n".as_bytes()).is_err());
    }

    #[test]
    fn curves_roundtrip_and_validation() {
        let text = "id,1,2,4\na,0.9,0.5,0.5\nb,1,1,0.2\n";
        let c = read_curves(text.as_bytes()).unwrap();
        assert_eq!(c.grid().times(), &[1.0, 2.0, 4.0]);
        let mut out = Vec::new();
        write_curves(&c, &mut out).unwrap();
        assert_eq!(String::from_utf8(out).unwrap(), text);
        assert!(read_curves("id,1,2\na,0.5,0.7\n".as_bytes()).is_err());
        assert!(read_curves("id,2,1\na,0.5,0.4\n".as_bytes()).is_err());
    }
}

//! CSV ingestion and export of datasets and contrast matrices.
//!
//! Inputs are RFC 4180 CSV with a header row. Errors name the missing column
//! or the offending line (counting the header as line 1).

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use jointmct_core::contrasts::{ContrastMatrix, RowTag};
use jointmct_core::dataset::{BinomialDataset, Layout, LongDataset};
use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Column names and level orders for a long-format file.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LongColumns {
    pub response: String,
    pub primary: String,
    /// `None` puts every row into one pseudo-stratum.
    pub secondary: Option<String>,
    pub primary_order: Option<Vec<String>>,
    pub secondary_order: Option<Vec<String>>,
}

/// Column names and level orders for an aggregated binomial file.
#[derive(Debug, Clone, PartialEq)]
pub struct BinomialColumns {
    pub primary: String,
    pub secondary: Option<String>,
    pub successes: String,
    pub trials: String,
    pub primary_order: Option<Vec<String>>,
    pub secondary_order: Option<Vec<String>>,
}

impl Default for BinomialColumns {
    fn default() -> Self {
        BinomialColumns {
            primary: "a_level".into(),
            secondary: Some("b_level".into()),
            successes: "successes".into(),
            trials: "trials".into(),
            primary_order: None,
            secondary_order: None,
        }
    }
}

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|e| Error::io(path, e))
}

fn column(headers: &csv::StringRecord, name: &str, source_name: &str) -> Result<usize> {
    headers
        .iter()
        .position(|h| h.trim() == name)
        .ok_or_else(|| Error::MissingColumn {
            source_name: source_name.to_string(),
            column: name.to_string(),
            available: headers.iter().collect::<Vec<_>>().join(", "),
        })
}

fn line_of(rec: &csv::StringRecord) -> u64 {
    rec.position().map_or(0, |p| p.line())
}

fn read_records<R: Read>(reader: R, source_name: &str) -> Result<(csv::StringRecord, Vec<csv::StringRecord>)> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let mut records = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| match e.position() {
            Some(p) => Error::BadRecord {
                source_name: source_name.to_string(),
                line: p.line(),
                message: e.to_string(),
            },
            None => Error::Csv(e),
        })?;
        records.push(rec);
    }
    if records.is_empty() {
        return Err(Error::EmptyFile {
            source_name: source_name.to_string(),
        });
    }
    Ok((headers, records))
}

fn parse_response(s: &str, rec: &csv::StringRecord, column: &str, source_name: &str) -> Result<f64> {
    let bad = |why: &str| Error::BadRecord {
        source_name: source_name.to_string(),
        line: line_of(rec),
        message: format!("{column} `{s}` {why}"),
    };
    let v: f64 = s.trim().parse().map_err(|_| bad("is not a number"))?;
    if !v.is_finite() {
        return Err(bad("is not finite"));
    }
    Ok(v)
}

fn parse_count(s: &str, rec: &csv::StringRecord, column: &str, source_name: &str) -> Result<u64> {
    s.trim().parse().map_err(|_| Error::BadRecord {
        source_name: source_name.to_string(),
        line: line_of(rec),
        message: format!("{column} `{s}` is not a non-negative integer"),
    })
}

/// Read a long-format dataset from any reader; `source_name` labels errors.
pub fn read_long_csv<R: Read>(reader: R, source_name: &str, cols: &LongColumns) -> Result<LongDataset> {
    let (headers, records) = read_records(reader, source_name)?;
    let iy = column(&headers, &cols.response, source_name)?;
    let ia = column(&headers, &cols.primary, source_name)?;
    let ib = cols
        .secondary
        .as_deref()
        .map(|c| column(&headers, c, source_name))
        .transpose()?;
    let mut ys = Vec::with_capacity(records.len());
    for rec in &records {
        ys.push(parse_response(&rec[iy], rec, &cols.response, source_name)?);
    }
    let rows = records
        .iter()
        .zip(&ys)
        .map(|(rec, &y)| (y, rec[ia].trim(), ib.map(|i| rec[i].trim())));
    Ok(LongDataset::from_rows(
        rows,
        cols.primary_order.as_deref(),
        cols.secondary_order.as_deref(),
    )?)
}

pub fn load_long_csv(path: &Path, cols: &LongColumns) -> Result<LongDataset> {
    read_long_csv(open(path)?, &path.display().to_string(), cols)
}

/// Read aggregated `successes` out of `trials` per row.
pub fn read_binomial_csv<R: Read>(reader: R, source_name: &str, cols: &BinomialColumns) -> Result<BinomialDataset> {
    let (headers, records) = read_records(reader, source_name)?;
    let ia = column(&headers, &cols.primary, source_name)?;
    let ib = cols
        .secondary
        .as_deref()
        .map(|c| column(&headers, c, source_name))
        .transpose()?;
    let is = column(&headers, &cols.successes, source_name)?;
    let it = column(&headers, &cols.trials, source_name)?;
    let mut counts = Vec::with_capacity(records.len());
    for rec in &records {
        counts.push((
            parse_count(&rec[is], rec, &cols.successes, source_name)?,
            parse_count(&rec[it], rec, &cols.trials, source_name)?,
        ));
    }
    let recs = records
        .iter()
        .zip(&counts)
        .map(|(rec, &(s, t))| (rec[ia].trim(), ib.map(|i| rec[i].trim()), s, t));
    Ok(BinomialDataset::from_records(
        recs,
        cols.primary_order.as_deref(),
        cols.secondary_order.as_deref(),
    )?)
}

pub fn load_binomial_csv(path: &Path, cols: &BinomialColumns) -> Result<BinomialDataset> {
    read_binomial_csv(open(path)?, &path.display().to_string(), cols)
}

/// Write `response,primary,secondary` rows; responses keep full precision.
pub fn write_long_csv<W: Write>(ds: &LongDataset, writer: W, cols: &LongColumns) -> Result<()> {
    let l = ds.layout();
    let mut w = csv::Writer::from_writer(writer);
    let secondary = cols.secondary.as_deref().unwrap_or("stratum");
    w.write_record([cols.response.as_str(), cols.primary.as_str(), secondary])?;
    for r in ds.rows() {
        w.write_record([r.response.to_string(), l.a_levels[r.a].clone(), l.b_levels[r.b].clone()])?;
    }
    w.flush().map_err(|e| Error::io("<output>", e))?;
    Ok(())
}

/// Contrast matrix as CSV: `label,tag,<column>...`, one row per contrast.
pub fn write_contrast_csv<W: Write>(cm: &ContrastMatrix, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["label".to_string(), "tag".to_string()];
    header.extend(cm.columns.iter().cloned());
    w.write_record(&header)?;
    for i in 0..cm.n_rows() {
        let mut rec = vec![cm.labels[i].clone(), cm.tags[i].describe()];
        rec.extend(cm.row(i).iter().map(|v| v.to_string()));
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| Error::io("<output>", e))?;
    Ok(())
}

/// Read a contrast matrix written by [`write_contrast_csv`] or by hand.
///
/// The `tag` column is optional. Columns are reordered to `layout`'s cell
/// order; a column that names no cell is an error, and cells without a
/// column get zero weight.
pub fn read_contrast_csv<R: Read>(reader: R, source_name: &str, layout: &Layout) -> Result<ContrastMatrix> {
    let (headers, records) = read_records(reader, source_name)?;
    let il = column(&headers, "label", source_name)?;
    let it = headers.iter().position(|h| h.trim() == "tag");
    let cells = layout.cell_names();
    let mut map = Vec::new();
    for (j, h) in headers.iter().enumerate() {
        if j == il || Some(j) == it {
            continue;
        }
        let h = h.trim();
        let c = cells.iter().position(|c| c == h).ok_or_else(|| Error::MissingColumn {
            source_name: source_name.to_string(),
            column: h.to_string(),
            available: cells.join(", "),
        })?;
        map.push((j, c));
    }
    let mut k = DMatrix::<f64>::zeros(records.len(), cells.len());
    let mut labels = Vec::with_capacity(records.len());
    let mut tags = Vec::with_capacity(records.len());
    for (i, rec) in records.iter().enumerate() {
        labels.push(rec[il].trim().to_string());
        tags.push(it.map_or(RowTag::User, |t| RowTag::parse(rec[t].trim())));
        for &(j, c) in &map {
            k[(i, c)] = parse_response(&rec[j], rec, &headers[j], source_name)?;
        }
    }
    Ok(ContrastMatrix::new(k, labels, tags, cells)?)
}

pub fn load_contrast_csv(path: &Path, layout: &Layout) -> Result<ContrastMatrix> {
    read_contrast_csv(open(path)?, &path.display().to_string(), layout)
}

//! Long-format CSV: one row per `(sample, channel, t)`.
//!
//! ```text
//! sample_id,channel,t,value,label[,meta_0,...,meta_{d-1}]
//! ```
//!
//! Label and metadata repeat on every row of a sample and must agree.
//! Samples and labels are numbered in order of first appearance.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use super::{Dataset, Sample};
use crate::error::{Error, Result};
use crate::ndcore::Array;

const FIXED_COLUMNS: [&str; 5] = ["sample_id", "channel", "t", "value", "label"];

struct PendingSample {
    id: String,
    label: usize,
    meta: Vec<f64>,
    meta_line: usize,
    cells: HashMap<(usize, usize), f64>,
    channels: usize,
    length: usize,
}

fn parse_header(line: &str) -> Result<usize> {
    let cols: Vec<&str> = line.split(',').collect();
    if cols.len() < FIXED_COLUMNS.len() || cols[..5] != FIXED_COLUMNS {
        return Err(Error::Parse {
            line: 1,
            msg: format!("header must start with {}", FIXED_COLUMNS.join(",")),
        });
    }
    for (d, name) in cols[5..].iter().enumerate() {
        if *name != format!("meta_{d}") {
            return Err(Error::Parse {
                line: 1,
                msg: format!("expected column meta_{d}, found {name:?}"),
            });
        }
    }
    Ok(cols.len() - 5)
}

fn number(field: &str, line: usize, what: &str) -> Result<f64> {
    match field.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(Error::Parse {
            line,
            msg: format!("{what} {field:?} is not a finite number"),
        }),
    }
}

fn index(field: &str, line: usize, what: &str) -> Result<usize> {
    field.parse::<usize>().map_err(|_| Error::Parse {
        line,
        msg: format!("{what} {field:?} is not a nonnegative integer"),
    })
}

/// Parses long-CSV text into a dataset.
pub fn parse_long_csv(text: &str) -> Result<Dataset> {
    let body = text.strip_suffix('\n').unwrap_or(text);
    let mut lines = body.split('\n');
    let header = lines.next().unwrap_or_default();
    let meta_dim = parse_header(header)?;
    let width = 5 + meta_dim;

    let mut order: Vec<PendingSample> = Vec::new();
    let mut by_id: HashMap<String, usize> = HashMap::new();
    let mut labels: Vec<String> = Vec::new();
    let mut label_ids: HashMap<String, usize> = HashMap::new();

    for (i, raw) in lines.enumerate() {
        let line = i + 2;
        if raw.contains('\r') {
            return Err(Error::Parse {
                line,
                msg: "carriage return; lines must end with LF only".into(),
            });
        }
        let fields: Vec<&str> = raw.split(',').collect();
        if fields.len() != width {
            return Err(Error::Parse {
                line,
                msg: format!("expected {width} fields, found {}", fields.len()),
            });
        }
        let id = fields[0];
        if id.is_empty() || fields[4].is_empty() {
            return Err(Error::Parse {
                line,
                msg: "empty sample_id or label".into(),
            });
        }
        let channel = index(fields[1], line, "channel")?;
        let t = index(fields[2], line, "t")?;
        let value = number(fields[3], line, "value")?;
        let label = match label_ids.get(fields[4]) {
            Some(&l) => l,
            None => {
                labels.push(fields[4].to_string());
                label_ids.insert(fields[4].to_string(), labels.len() - 1);
                labels.len() - 1
            }
        };
        let meta = fields[5..]
            .iter()
            .map(|f| number(f, line, "metadata value"))
            .collect::<Result<Vec<_>>>()?;

        let slot = match by_id.get(id) {
            Some(&s) => s,
            None => {
                order.push(PendingSample {
                    id: id.to_string(),
                    label,
                    meta: meta.clone(),
                    meta_line: line,
                    cells: HashMap::new(),
                    channels: 0,
                    length: 0,
                });
                by_id.insert(id.to_string(), order.len() - 1);
                order.len() - 1
            }
        };
        let s = &mut order[slot];
        if s.label != label {
            return Err(Error::Parse {
                line,
                msg: format!("label of sample {id:?} differs from earlier rows"),
            });
        }
        if s.meta != meta {
            return Err(Error::Parse {
                line,
                msg: format!("metadata of sample {id:?} differs from line {}", s.meta_line),
            });
        }
        // guard against absurd indices before they size an allocation
        if channel >= 1 << 20 || t >= 1 << 24 {
            return Err(Error::Parse {
                line,
                msg: format!("channel {channel} or t {t} out of range"),
            });
        }
        if s.cells.insert((channel, t), value).is_some() {
            return Err(Error::Parse {
                line,
                msg: format!("duplicate cell for sample {id:?}, channel {channel}, t={t}"),
            });
        }
        s.channels = s.channels.max(channel + 1);
        s.length = s.length.max(t + 1);
    }

    let first = order.first().ok_or(Error::Parse {
        line: 1,
        msg: "no data rows".into(),
    })?;
    let (channels, length) = (first.channels, first.length);
    if channels.checked_mul(length).is_none_or(|n| n > 1 << 26) {
        return Err(Error::Parse {
            line: 1,
            msg: format!("series of {channels}×{length} is too large"),
        });
    }
    let mut samples = Vec::with_capacity(order.len());
    for s in order {
        if s.channels != channels || s.length != length {
            return Err(Error::Parse {
                line: s.meta_line,
                msg: format!(
                    "sample {:?} has {} channels × {} steps, expected {channels} × {length}",
                    s.id, s.channels, s.length
                ),
            });
        }
        let mut data = Vec::with_capacity(channels * length);
        for c in 0..channels {
            for t in 0..length {
                match s.cells.get(&(c, t)) {
                    Some(&v) => data.push(v),
                    None => {
                        return Err(Error::MissingCell {
                            sample: s.id.clone(),
                            channel: c,
                            t,
                        })
                    }
                }
            }
        }
        samples.push(Sample {
            series: Array::new(vec![channels, length], data)?,
            metadata: s.meta,
            label: s.label,
        });
    }
    Dataset::new(samples, labels)
}

pub fn load_dataset(path: impl AsRef<Path>) -> Result<Dataset> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_long_csv(&text)
}

/// Serializes `ds`; sample ids become their positions.
pub fn write_long_csv(ds: &Dataset) -> String {
    let mut out = String::from("sample_id,channel,t,value,label");
    for d in 0..ds.meta_dim {
        let _ = write!(out, ",meta_{d}");
    }
    out.push('\n');
    let mut meta = String::new();
    for (i, s) in ds.samples.iter().enumerate() {
        meta.clear();
        for v in &s.metadata {
            let _ = write!(meta, ",{v}");
        }
        let label = &ds.class_names[s.label];
        for (c, row) in s.series.data().chunks(ds.length).enumerate() {
            for (t, v) in row.iter().enumerate() {
                let _ = writeln!(out, "{i},{c},{t},{v},{label}{meta}");
            }
        }
    }
    out
}

pub fn save_dataset(ds: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, write_long_csv(ds)).map_err(|e| Error::io(path, e))
}

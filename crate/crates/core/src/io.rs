//! File formats: the JSON radio map and the CSV online-measurement and
//! ground-truth tables.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::survey::{OnlineMeasurement, RawRadioMap, ReferencePoint, SurveyConfig};

/// Radio map on disk. `samples[o][j][i][m]` in dBm; `null` marks a missing
/// reading and loads as the configured sentinel.
#[derive(Debug, Serialize, Deserialize)]
pub struct RadioMapFile {
    pub config: SurveyConfig,
    pub rps: Vec<ReferencePoint>,
    pub samples: Vec<Vec<Vec<Vec<Option<f64>>>>>,
}

impl RadioMapFile {
    pub fn from_map(map: &RawRadioMap) -> Self {
        let c = map.config();
        let sentinel = c.missing_sentinel;
        let samples = (0..c.num_orientations())
            .map(|o| {
                (0..c.num_rps)
                    .map(|j| {
                        (0..c.num_aps)
                            .map(|i| {
                                map.series(o, j, i)
                                    .iter()
                                    .map(|&v| (v > sentinel).then_some(v))
                                    .collect()
                            })
                            .collect()
                    })
                    .collect()
            })
            .collect();
        Self {
            config: c.clone(),
            rps: map.rps().to_vec(),
            samples,
        }
    }

    pub fn into_map(self) -> Result<RawRadioMap> {
        let c = &self.config;
        c.validate()?;
        if self.samples.len() != c.num_orientations() {
            return Err(Error::Malformed(format!(
                "samples: expected {} orientations, found {}",
                c.num_orientations(),
                self.samples.len()
            )));
        }
        let mut flat = Vec::with_capacity(
            c.num_orientations() * c.num_rps * c.num_aps * c.samples_per_rp,
        );
        for (o, per_o) in self.samples.iter().enumerate() {
            if per_o.len() != c.num_rps {
                return Err(Error::Malformed(format!(
                    "samples[{o}]: expected {} reference points, found {}",
                    c.num_rps,
                    per_o.len()
                )));
            }
            for (j, per_j) in per_o.iter().enumerate() {
                if per_j.len() != c.num_aps {
                    return Err(Error::Malformed(format!(
                        "samples[{o}][{j}]: expected {} access points, found {}",
                        c.num_aps,
                        per_j.len()
                    )));
                }
                for (i, series) in per_j.iter().enumerate() {
                    if series.len() != c.samples_per_rp {
                        return Err(Error::Malformed(format!(
                            "samples[{o}][{j}][{i}]: expected {} samples, found {}",
                            c.samples_per_rp,
                            series.len()
                        )));
                    }
                    flat.extend(series.iter().map(|v| v.unwrap_or(c.missing_sentinel)));
                }
            }
        }
        RawRadioMap::new(self.config, self.rps, flat)
    }
}

pub fn read_radio_map(path: impl AsRef<Path>) -> Result<RawRadioMap> {
    let file: RadioMapFile = serde_json::from_reader(BufReader::new(File::open(path)?))?;
    file.into_map()
}

pub fn write_radio_map(map: &RawRadioMap, path: impl AsRef<Path>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer(&mut w, &RadioMapFile::from_map(map))?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

/// Reads online fixes: one row per fix, one column per AP. An optional header
/// row (any non-numeric first cell) is skipped; empty cells become `missing`.
pub fn read_measurements<R: Read>(reader: R, missing: f64) -> Result<Vec<OnlineMeasurement>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut out: Vec<OnlineMeasurement> = Vec::new();
    let mut width = None;
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let line = row + 1;
        let first = rec.get(0).unwrap_or("");
        if row == 0 && !first.is_empty() && first.parse::<f64>().is_err() {
            continue;
        }
        let mut rss = Vec::with_capacity(rec.len());
        for (col, cell) in rec.iter().enumerate() {
            if cell.is_empty() {
                rss.push(missing);
            } else {
                let v: f64 = cell.parse().map_err(|_| {
                    Error::Malformed(format!("line {line}, column {}: cannot parse {cell:?}", col + 1))
                })?;
                rss.push(v);
            }
        }
        match width {
            None => width = Some(rss.len()),
            Some(w) if w != rss.len() => {
                return Err(Error::Malformed(format!(
                    "line {line}: expected {w} columns, found {}",
                    rss.len()
                )))
            }
            _ => {}
        }
        out.push(OnlineMeasurement::new(rss));
    }
    Ok(out)
}

pub fn read_measurements_file(path: impl AsRef<Path>, missing: f64) -> Result<Vec<OnlineMeasurement>> {
    read_measurements(BufReader::new(File::open(path)?), missing)
}

pub fn write_measurements<W: Write>(w: W, fixes: &[OnlineMeasurement], missing: f64) -> Result<()> {
    let mut wtr = csv::WriterBuilder::new().from_writer(w);
    if let Some(first) = fixes.first() {
        wtr.write_record((1..=first.len()).map(|i| format!("ap{i}")))?;
    }
    for fix in fixes {
        wtr.write_record(fix.rss.iter().map(|&v| {
            if v <= missing {
                String::new()
            } else {
                v.to_string()
            }
        }))?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn read_truth<R: Read>(reader: R) -> Result<Vec<(f64, f64)>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let mut out = Vec::new();
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let parse = |col: usize| -> Result<f64> {
            let cell = rec.get(col).unwrap_or("");
            cell.parse().map_err(|_| {
                Error::Malformed(format!("truth line {}, column {}: cannot parse {cell:?}", row + 2, col + 1))
            })
        };
        out.push((parse(0)?, parse(1)?));
    }
    Ok(out)
}

pub fn write_truth<W: Write>(w: W, truth: &[(f64, f64)]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["x", "y"])?;
    for (x, y) in truth {
        wtr.write_record([x.to_string(), y.to_string()])?;
    }
    wtr.flush()?;
    Ok(())
}

/// Serde adapter writing `±∞` entries of an `f64` vector as `null`
/// (JSON has no infinity) and reading `null` back as `+∞`.
pub mod infinite_as_null {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &[f64], s: S) -> Result<S::Ok, S::Error> {
        v.iter()
            .map(|x| x.is_finite().then_some(*x))
            .collect::<Vec<_>>()
            .serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<f64>, D::Error> {
        let v: Vec<Option<f64>> = Vec::deserialize(d)?;
        Ok(v.into_iter().map(|x| x.unwrap_or(f64::INFINITY)).collect())
    }
}

//! Sensor table ingestion and emission.
//!
//! Columns, in order: `id,x,y,network,noise_std,threshold,cost,reading`.
//! `network` is `H` or `L`. `threshold` is empty for `H` rows and required
//! for `L` rows (`inf` / `-inf` allowed). The `reading` column may be omitted
//! entirely, or left empty on every row; it cannot be partially filled.
//! Lines starting with `#` are comments.

use std::collections::HashMap;
use std::io::Write;
use std::path::Path;

use fieldsense_core::{Location, Network, ObservationVector, Sensor, SensorArray};

use crate::error::{CliError, Result};

pub const COLUMNS: [&str; 8] = [
    "id",
    "x",
    "y",
    "network",
    "noise_std",
    "threshold",
    "cost",
    "reading",
];

#[derive(Debug, Clone)]
pub struct Ingested {
    /// Sensors in canonical order.
    pub array: SensorArray,
    /// Readings aligned with `array`, when the file carries them.
    pub readings: Option<ObservationVector>,
    pub rows: usize,
}

pub fn ingest_sensors(path: &Path) -> Result<Ingested> {
    let file = std::fs::File::open(path)
        .map_err(|e| CliError::io(format!("opening {}", path.display()), e))?;
    ingest_reader(file, path)
}

pub fn ingest_reader<R: std::io::Read>(rdr: R, path: &Path) -> Result<Ingested> {
    let schema = |line: u64, message: String| CliError::Schema {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .flexible(true)
        .from_reader(rdr);
    let mut records = reader.records();

    let header = match records.next() {
        None => return Err(schema(1, "empty file, expected a header row".into())),
        Some(r) => r.map_err(|e| schema(csv_line(&e), e.to_string()))?,
    };
    let header_line = header.position().map_or(1, |p| p.line());
    let names: Vec<&str> = header.iter().map(str::trim).collect();
    let has_reading = if names == COLUMNS {
        true
    } else if names == COLUMNS[..7] {
        false
    } else {
        return Err(schema(
            header_line,
            format!(
                "header must be `{}` (reading optional), got `{}`",
                COLUMNS.join(","),
                names.join(",")
            ),
        ));
    };
    let width = if has_reading { 8 } else { 7 };

    let mut sensors = Vec::new();
    let mut readings: Vec<(String, Option<f64>)> = Vec::new();
    let mut seen: HashMap<String, u64> = HashMap::new();
    for rec in records {
        let rec = rec.map_err(|e| schema(csv_line(&e), e.to_string()))?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() != width {
            return Err(schema(
                line,
                format!("expected {width} fields, got {}", rec.len()),
            ));
        }
        let field = |i: usize| rec[i].trim();
        let num = |i: usize| -> Result<f64> {
            field(i).parse::<f64>().map_err(|_| {
                schema(
                    line,
                    format!("column `{}`: `{}` is not a number", COLUMNS[i], field(i)),
                )
            })
        };
        let id = field(0);
        if id.is_empty() {
            return Err(schema(line, "column `id` is empty".into()));
        }
        if seen.insert(id.to_string(), line).is_some() {
            return Err(CliError::DuplicateId {
                path: path.to_path_buf(),
                id: id.to_string(),
                line,
            });
        }
        let loc = Location::new(num(1)?, num(2)?);
        let noise = num(4)?;
        let cost = num(6)?;
        let sensor = match field(3) {
            "H" => {
                if !field(5).is_empty() {
                    return Err(schema(
                        line,
                        format!("sensor `{id}`: H rows must leave `threshold` empty"),
                    ));
                }
                Sensor::high(id, loc, noise, cost)
            }
            "L" => {
                if field(5).is_empty() {
                    return Err(schema(
                        line,
                        format!("sensor `{id}`: L rows need a `threshold`"),
                    ));
                }
                Sensor::low(id, loc, noise, num(5)?, cost)
            }
            other => {
                return Err(schema(
                    line,
                    format!("column `network`: expected H or L, got `{other}`"),
                ))
            }
        };
        sensor
            .validate()
            .map_err(|e| schema(line, format!("sensor `{id}`: {e}")))?;
        sensors.push(sensor);
        let reading = if has_reading && !field(7).is_empty() {
            let r = num(7)?;
            if !r.is_finite() {
                return Err(schema(
                    line,
                    format!("sensor `{id}`: reading must be finite"),
                ));
            }
            Some(r)
        } else {
            None
        };
        readings.push((id.to_string(), reading));
    }
    if sensors.is_empty() {
        return Err(schema(header_line, "no sensor rows".into()));
    }

    let filled = readings.iter().filter(|r| r.1.is_some()).count();
    if filled != 0 && filled != readings.len() {
        let (id, _) = readings.iter().find(|r| r.1.is_none()).unwrap();
        return Err(schema(
            seen[id],
            format!("sensor `{id}` has no reading while others do"),
        ));
    }
    let rows = sensors.len();
    let array = SensorArray::new(sensors)?;
    let readings = if filled == 0 {
        None
    } else {
        let by_id: HashMap<_, _> = readings
            .into_iter()
            .map(|(id, r)| (id, r.unwrap()))
            .collect();
        Some(ObservationVector::new(
            array.sensors().iter().map(|s| by_id[&s.id]).collect(),
        )?)
    };
    log::info!(
        "ingested {} sensors from {} ({} high, {} low)",
        rows,
        path.display(),
        array.n_high(),
        array.n_low()
    );
    Ok(Ingested {
        array,
        readings,
        rows,
    })
}

fn csv_line(e: &csv::Error) -> u64 {
    e.position().map_or(0, |p| p.line())
}

/// Writes the sensor table with all eight columns.
pub fn write_sensors<W: Write>(
    out: &mut W,
    arr: &SensorArray,
    readings: Option<&ObservationVector>,
) -> std::io::Result<()> {
    writeln!(out, "{}", COLUMNS.join(","))?;
    for (i, s) in arr.sensors().iter().enumerate() {
        let (net, thr) = match s.network {
            Network::High => ("H", String::new()),
            Network::Low => ("L", s.censor_threshold().to_string()),
        };
        let reading = readings.map_or(String::new(), |r| r.0[i].to_string());
        writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            s.id, s.loc.x, s.loc.y, net, s.noise_std, thr, s.cost, reading
        )?;
    }
    Ok(())
}

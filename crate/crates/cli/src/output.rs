//! Output files. Every file starts with a provenance comment carrying the
//! config hash and seed; PGM puts it right after the magic number, which is
//! the earliest place the format allows.

use std::fs;
use std::io::{BufRead, Read, Write};
use std::path::{Path, PathBuf};

use fieldsense_core::sblue::Raster;

use crate::error::{CliError, Result};

/// Provenance shared by every file of a run.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Stamp {
    pub config_hash: String,
    pub seed: u64,
}

impl Stamp {
    pub fn comment(&self) -> String {
        format!(
            "# fieldsense config_hash={} seed={}",
            self.config_hash, self.seed
        )
    }
}

/// Buffers output files in memory and writes them in one pass at the end.
#[derive(Debug, Default)]
pub struct OutputSet {
    files: Vec<(String, Vec<u8>)>,
}

impl OutputSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: &str, bytes: Vec<u8>) {
        self.files.push((name.to_string(), bytes));
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.files.iter().map(|f| f.0.as_str())
    }

    pub fn write_all(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        fs::create_dir_all(dir)
            .map_err(|e| CliError::io(format!("creating {}", dir.display()), e))?;
        let mut written = Vec::new();
        for (name, bytes) in &self.files {
            let path = dir.join(name);
            fs::write(&path, bytes)
                .map_err(|e| CliError::io(format!("writing {}", path.display()), e))?;
            written.push(path);
        }
        Ok(written)
    }
}

/// Comment header, then a header row, then rows; cells are written verbatim.
pub fn csv_bytes(stamp: &Stamp, header: &[&str], rows: &[Vec<String>]) -> Vec<u8> {
    let mut out = Vec::new();
    writeln!(out, "{}", stamp.comment()).unwrap();
    writeln!(out, "{}", header.join(",")).unwrap();
    for r in rows {
        debug_assert_eq!(r.len(), header.len());
        writeln!(out, "{}", r.join(",")).unwrap();
    }
    out
}

/// Two-column `key,value` table.
pub fn summary_bytes(stamp: &Stamp, entries: &[(&str, String)]) -> Vec<u8> {
    let rows: Vec<Vec<String>> = entries
        .iter()
        .map(|(k, v)| vec![k.to_string(), v.clone()])
        .collect();
    csv_bytes(stamp, &["key", "value"], &rows)
}

/// `x,y,value` rows in grid order.
pub fn raster_csv(stamp: &Stamp, raster: &Raster, value: impl Fn(usize) -> f64) -> Vec<u8> {
    let rows: Vec<Vec<String>> = raster
        .cells
        .iter()
        .enumerate()
        .map(|(i, c)| {
            vec![
                c.query.x.to_string(),
                c.query.y.to_string(),
                value(i).to_string(),
            ]
        })
        .collect();
    csv_bytes(stamp, &["x", "y", "value"], &rows)
}

/// Linear quantization to 16 bits; a constant raster maps to all zeros.
pub fn quantize(v: f64, min: f64, max: f64) -> u16 {
    if max <= min {
        return 0;
    }
    ((v - min) / (max - min) * 65535.0)
        .round()
        .clamp(0.0, 65535.0) as u16
}

pub fn dequantize(q: u16, min: f64, max: f64) -> f64 {
    if max <= min {
        return min;
    }
    min + (q as f64 / 65535.0) * (max - min)
}

/// Binary 16-bit PGM. `values` is row-major with `y` ascending; the image
/// is flipped so the top row is the largest `y`.
pub fn pgm_bytes(stamp: &Stamp, nx: usize, ny: usize, values: &[f64]) -> Vec<u8> {
    assert_eq!(values.len(), nx * ny);
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut out = Vec::with_capacity(64 + 2 * values.len());
    writeln!(out, "P5").unwrap();
    writeln!(out, "{}", stamp.comment()).unwrap();
    writeln!(out, "# min={min:e} max={max:e}").unwrap();
    writeln!(out, "{nx} {ny}").unwrap();
    writeln!(out, "65535").unwrap();
    for row in (0..ny).rev() {
        for col in 0..nx {
            out.extend_from_slice(&quantize(values[row * nx + col], min, max).to_be_bytes());
        }
    }
    out
}

/// Decoded PGM written by [`pgm_bytes`].
#[derive(Debug, Clone, PartialEq)]
pub struct Pgm {
    pub nx: usize,
    pub ny: usize,
    pub min: f64,
    pub max: f64,
    pub comments: Vec<String>,
    /// Row-major, `y` ascending, de-normalized.
    pub values: Vec<f64>,
}

pub fn read_pgm(bytes: &[u8]) -> std::result::Result<Pgm, String> {
    let mut cur = std::io::Cursor::new(bytes);
    let mut line = String::new();
    let mut next_line = |cur: &mut std::io::Cursor<&[u8]>| -> std::result::Result<String, String> {
        line.clear();
        cur.read_line(&mut line).map_err(|e| e.to_string())?;
        Ok(line.trim_end_matches('\n').to_string())
    };
    if next_line(&mut cur)? != "P5" {
        return Err("missing P5 magic".into());
    }
    let mut comments = Vec::new();
    let mut l = next_line(&mut cur)?;
    while l.starts_with('#') {
        comments.push(l);
        l = next_line(&mut cur)?;
    }
    let dims: Vec<usize> = l
        .split_whitespace()
        .map(|t| t.parse().map_err(|_| format!("bad dimension `{t}`")))
        .collect::<std::result::Result<_, _>>()?;
    let [nx, ny] = dims[..] else {
        return Err(format!("bad dimension line `{l}`"));
    };
    if next_line(&mut cur)? != "65535" {
        return Err("expected maxval 65535".into());
    }
    let (mut min, mut max) = (None, None);
    for c in &comments {
        for tok in c.trim_start_matches('#').split_whitespace() {
            if let Some(v) = tok.strip_prefix("min=") {
                min = v.parse::<f64>().ok();
            } else if let Some(v) = tok.strip_prefix("max=") {
                max = v.parse::<f64>().ok();
            }
        }
    }
    let (min, max) = min.zip(max).ok_or("missing min/max comment")?;
    let mut data = Vec::new();
    cur.read_to_end(&mut data).map_err(|e| e.to_string())?;
    if data.len() != 2 * nx * ny {
        return Err(format!(
            "expected {} data bytes, got {}",
            2 * nx * ny,
            data.len()
        ));
    }
    let mut values = vec![0.0; nx * ny];
    for (k, px) in data.chunks_exact(2).enumerate() {
        let (img_row, col) = (k / nx, k % nx);
        let row = ny - 1 - img_row;
        values[row * nx + col] = dequantize(u16::from_be_bytes([px[0], px[1]]), min, max);
    }
    Ok(Pgm {
        nx,
        ny,
        min,
        max,
        comments,
        values,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn stamp() -> Stamp {
        Stamp {
            config_hash: "00ff".into(),
            seed: 3,
        }
    }

    #[test]
    fn csv_starts_with_stamp() {
        let b = csv_bytes(&stamp(), &["a", "b"], &[vec!["1".into(), "-inf".into()]]);
        assert_eq!(
            String::from_utf8(b).unwrap(),
            "# fieldsense config_hash=00ff seed=3\na,b\n1,-inf\n"
        );
    }

    #[test]
    fn pgm_round_trip_within_one_level() {
        let (nx, ny) = (7, 5);
        let vals: Vec<f64> = (0..nx * ny)
            .map(|i| ((i * 37) % 11) as f64 * 0.123 - 0.4)
            .collect();
        let pgm = read_pgm(&pgm_bytes(&stamp(), nx, ny, &vals)).unwrap();
        assert_eq!((pgm.nx, pgm.ny), (nx, ny));
        assert_eq!(pgm.comments[0], stamp().comment());
        let range = pgm.max - pgm.min;
        for (a, b) in vals.iter().zip(&pgm.values) {
            assert!((a - b).abs() <= range / 65535.0, "{a} {b}");
        }
    }

    #[test]
    fn top_row_is_largest_y() {
        let bytes = pgm_bytes(&stamp(), 2, 2, &[0.0, 0.0, 1.0, 1.0]);
        let data = &bytes[bytes.len() - 8..];
        assert_eq!(data, &[0xff, 0xff, 0xff, 0xff, 0, 0, 0, 0]);
    }

    #[test]
    fn constant_raster() {
        let pgm = read_pgm(&pgm_bytes(&stamp(), 3, 1, &[2.5; 3])).unwrap();
        assert_eq!(pgm.values, vec![2.5; 3]);
    }
}

//! Suitability field ingestion, persistence and synthetic generation.
//!
//! Two CSV layouts are accepted:
//!
//! * long form, one file with header `i,j,k,s` and one row per
//!   (row, col, plane) triple; this is what [`write_field_csv`] emits;
//! * one headerless grid file per plane, `rows` lines of `cols` values.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use rand::Rng;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::lattice::{LandUse, SuitabilityField, NUM_USES};
use crate::rng::rng_from_seed;

pub const BUNDLED_SEED: u64 = 42;
pub const BUNDLED_SIZE: usize = 30;
pub const BUNDLED_SMOOTHNESS: u32 = 3;

/// The frozen 30x30 reference instance.
pub fn bundled_field() -> SuitabilityField {
    generate_field(BUNDLED_SIZE, BUNDLED_SIZE, BUNDLED_SEED, BUNDLED_SMOOTHNESS)
        .expect("bundled dimensions are valid")
}

/// SHA-256 over the dimensions and the bit patterns of every score.
pub fn field_checksum(field: &SuitabilityField) -> String {
    let mut h = Sha256::new();
    h.update((field.rows() as u64).to_le_bytes());
    h.update((field.cols() as u64).to_le_bytes());
    for s in field.scores() {
        h.update(s.to_bits().to_le_bytes());
    }
    hex::encode(h.finalize())
}

/// Spatially correlated scores in `[0, 1]`: i.i.d. uniform draws (plane by
/// plane, row-major), `smoothness` passes of a 3x3 mean filter that averages
/// over in-bounds parcels only, then per-plane min-max rescaling. A plane
/// that comes out constant is left as is.
pub fn generate_field(rows: usize, cols: usize, seed: u64, smoothness: u32) -> Result<SuitabilityField> {
    if rows == 0 || cols == 0 {
        return Err(Error::Validation(format!(
            "field must have positive area, got {rows}x{cols}"
        )));
    }
    let mut rng = rng_from_seed(seed);
    let plane_len = rows * cols;
    let mut scores = Vec::with_capacity(plane_len * NUM_USES);
    for _ in 0..NUM_USES {
        let mut plane: Vec<f64> = (0..plane_len).map(|_| rng.random::<f64>()).collect();
        for _ in 0..smoothness {
            plane = mean_filter(&plane, rows, cols);
        }
        rescale(&mut plane);
        scores.extend_from_slice(&plane);
    }
    SuitabilityField::new(rows, cols, scores)
}

fn mean_filter(plane: &[f64], rows: usize, cols: usize) -> Vec<f64> {
    let mut out = vec![0.0; plane.len()];
    for i in 0..rows {
        for j in 0..cols {
            let (mut sum, mut n) = (0.0, 0u32);
            for ni in i.saturating_sub(1)..=(i + 1).min(rows - 1) {
                for nj in j.saturating_sub(1)..=(j + 1).min(cols - 1) {
                    sum += plane[ni * cols + nj];
                    n += 1;
                }
            }
            out[i * cols + j] = sum / n as f64;
        }
    }
    out
}

fn rescale(plane: &mut [f64]) {
    let lo = plane.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = plane.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if hi > lo {
        for s in plane.iter_mut() {
            *s = (*s - lo) / (hi - lo);
        }
    }
}

/// Writes the long form. Scores use shortest round-trip formatting, so a
/// reload is bit-identical.
pub fn write_field_csv<W: Write>(field: &SuitabilityField, mut out: W) -> std::io::Result<()> {
    writeln!(out, "i,j,k,s")?;
    for u in LandUse::ALL {
        for (idx, s) in field.plane(u).iter().enumerate() {
            writeln!(out, "{},{},{},{s}", idx / field.cols(), idx % field.cols(), u.code())?;
        }
    }
    Ok(())
}

pub fn save_field(field: &SuitabilityField, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    write_field_csv(field, &mut w).map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

fn read_to_string(path: &Path) -> Result<String> {
    let mut s = String::new();
    File::open(path)
        .and_then(|mut f| f.read_to_string(&mut s))
        .map_err(|e| Error::io(path, e))?;
    Ok(s)
}

fn parse_score(raw: &str, path: &Path, what: impl Fn() -> String) -> Result<f64> {
    let s: f64 = raw
        .trim()
        .parse()
        .map_err(|_| Error::ingestion(path, format!("{}: '{}' is not a number", what(), raw.trim())))?;
    if !s.is_finite() || s < 0.0 {
        return Err(Error::ingestion(
            path,
            format!("{}: score {s} must be finite and >= 0", what()),
        ));
    }
    Ok(s)
}

/// Loads a long-form field. `rows`/`cols`, when given, must match the file;
/// otherwise they are inferred from the largest indices present.
pub fn load_field(path: &Path, rows: Option<usize>, cols: Option<usize>) -> Result<SuitabilityField> {
    let text = read_to_string(path)?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let headers = reader
        .headers()
        .map_err(|e| Error::ingestion(path, e.to_string()))?
        .clone();
    if headers.iter().collect::<Vec<_>>() != ["i", "j", "k", "s"] {
        return Err(Error::ingestion(
            path,
            format!("expected header 'i,j,k,s', found '{}'", headers.iter().collect::<Vec<_>>().join(",")),
        ));
    }

    let mut entries = Vec::new();
    for (n, rec) in reader.records().enumerate() {
        let line = n + 2;
        let rec = rec.map_err(|e| Error::ingestion(path, format!("line {line}: {e}")))?;
        if rec.len() != 4 {
            return Err(Error::ingestion(path, format!("line {line}: expected 4 fields, got {}", rec.len())));
        }
        let index = |col: usize, name: &str| -> Result<usize> {
            rec[col].parse().map_err(|_| {
                Error::ingestion(path, format!("line {line}: {name} '{}' is not a non-negative integer", &rec[col]))
            })
        };
        let (i, j, k) = (index(0, "row")?, index(1, "col")?, index(2, "plane")?);
        if k >= NUM_USES {
            return Err(Error::ingestion(path, format!("line {line}: plane {k} out of range 0..{NUM_USES}")));
        }
        let s = parse_score(&rec[3], path, || format!("line {line}, row {i}, col {j}, plane {k}"))?;
        entries.push((i, j, k, s));
    }

    let rows = rows.unwrap_or_else(|| entries.iter().map(|e| e.0 + 1).max().unwrap_or(0));
    let cols = cols.unwrap_or_else(|| entries.iter().map(|e| e.1 + 1).max().unwrap_or(0));
    if rows == 0 || cols == 0 {
        return Err(Error::ingestion(path, "no scores found"));
    }
    let mut scores = vec![f64::NAN; rows * cols * NUM_USES];
    for &(i, j, k, s) in &entries {
        if i >= rows || j >= cols {
            return Err(Error::ingestion(
                path,
                format!("row {i}, col {j}, plane {k} lies outside the declared {rows}x{cols} grid"),
            ));
        }
        let slot = &mut scores[(k * rows + i) * cols + j];
        if !slot.is_nan() {
            return Err(Error::ingestion(path, format!("row {i}, col {j}, plane {k} appears twice")));
        }
        *slot = s;
    }
    for k in 0..NUM_USES {
        let plane = &scores[k * rows * cols..(k + 1) * rows * cols];
        if plane.iter().all(|s| s.is_nan()) {
            return Err(Error::ingestion(path, format!("plane {k} is missing")));
        }
        if let Some(pos) = plane.iter().position(|s| s.is_nan()) {
            return Err(Error::ingestion(
                path,
                format!("row {}, col {}, plane {k} has no score", pos / cols, pos % cols),
            ));
        }
    }
    SuitabilityField::new(rows, cols, scores).map_err(|e| Error::ingestion(path, e.to_string()))
}

/// Loads one headerless grid per plane, in land-use code order.
pub fn load_field_planes(
    paths: &[&Path; NUM_USES],
    rows: Option<usize>,
    cols: Option<usize>,
) -> Result<SuitabilityField> {
    let mut dims: Option<(usize, usize)> = rows.zip(cols);
    let mut scores = Vec::new();
    for (k, path) in paths.iter().enumerate() {
        let text = read_to_string(path)?;
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(false)
            .flexible(true)
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        let mut plane = Vec::new();
        let mut width = None;
        let mut height = 0;
        for (i, rec) in reader.records().enumerate() {
            let rec = rec.map_err(|e| Error::ingestion(*path, format!("row {i}: {e}")))?;
            if rec.iter().all(|f| f.is_empty()) {
                continue;
            }
            if *width.get_or_insert(rec.len()) != rec.len() {
                return Err(Error::ingestion(
                    *path,
                    format!("row {i}, plane {k}: expected {} columns, got {}", width.unwrap(), rec.len()),
                ));
            }
            for (j, raw) in rec.iter().enumerate() {
                plane.push(parse_score(raw, path, || format!("row {i}, col {j}, plane {k}"))?);
            }
            height += 1;
        }
        let shape = (height, width.unwrap_or(0));
        if shape.0 == 0 || shape.1 == 0 {
            return Err(Error::ingestion(*path, format!("plane {k} is empty")));
        }
        match dims {
            Some(expected) if expected != shape => {
                return Err(Error::ingestion(
                    *path,
                    format!(
                        "plane {k} is {}x{}, expected {}x{}",
                        shape.0, shape.1, expected.0, expected.1
                    ),
                ))
            }
            _ => dims = Some(shape),
        }
        scores.extend(plane);
    }
    let (rows, cols) = dims.expect("at least one plane read");
    SuitabilityField::new(rows, cols, scores).map_err(|e| Error::ingestion(paths[0], e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::fs;

    fn lag1_autocorrelation(plane: &[f64], rows: usize, cols: usize) -> f64 {
        let n = plane.len() as f64;
        let mean = plane.iter().sum::<f64>() / n;
        let var = plane.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
        let (mut cov, mut pairs) = (0.0, 0.0);
        for i in 0..rows {
            for j in 0..cols {
                let a = plane[i * cols + j] - mean;
                if j + 1 < cols {
                    cov += a * (plane[i * cols + j + 1] - mean);
                    pairs += 1.0;
                }
                if i + 1 < rows {
                    cov += a * (plane[(i + 1) * cols + j] - mean);
                    pairs += 1.0;
                }
            }
        }
        cov / pairs / var
    }

    #[test]
    fn generator_is_deterministic_and_in_range() {
        let a = generate_field(12, 9, 5, 2).unwrap();
        let b = generate_field(12, 9, 5, 2).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, generate_field(12, 9, 6, 2).unwrap());
        assert!(a.scores().iter().all(|s| (0.0..=1.0).contains(s)));
        for u in LandUse::ALL {
            let p = a.plane(u);
            assert_eq!(p.iter().copied().fold(f64::INFINITY, f64::min), 0.0);
            assert_eq!(p.iter().copied().fold(f64::NEG_INFINITY, f64::max), 1.0);
        }
    }

    #[test]
    fn unsmoothed_field_is_uncorrelated() {
        let f = generate_field(30, 30, 1, 0).unwrap();
        for u in LandUse::ALL {
            let r = lag1_autocorrelation(f.plane(u), 30, 30);
            // Standard error of r over ~1740 pairs is ~0.024.
            assert!(r.abs() < 0.1, "plane {u}: {r}");
        }
    }

    #[test]
    fn smoothed_field_is_correlated() {
        let f = bundled_field();
        for u in LandUse::ALL {
            let r = lag1_autocorrelation(f.plane(u), 30, 30);
            assert!(r > 0.3, "plane {u}: {r}");
        }
    }

    #[test]
    fn save_load_round_trip_is_bit_identical() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("field.csv");
        let f = generate_field(7, 5, 9, 1).unwrap();
        save_field(&f, &path).unwrap();
        let g = load_field(&path, Some(7), Some(5)).unwrap();
        assert_eq!(field_checksum(&f), field_checksum(&g));
        assert_eq!(f, load_field(&path, None, None).unwrap());
    }

    #[test]
    fn loads_small_long_form() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.csv");
        let mut text = String::from("i,j,k,s\n");
        for k in 0..3 {
            for i in 0..3 {
                for j in 0..3 {
                    text += &format!("{i},{j},{k},{}\n", (i * 3 + j) as f64 / 10.0 + k as f64);
                }
            }
        }
        fs::write(&path, text).unwrap();
        let f = load_field(&path, Some(3), Some(3)).unwrap();
        assert_eq!(f.scores().len(), 27);
        assert_eq!(f.get(2, 1, LandUse::Conservation).unwrap(), 2.7);
    }

    fn load_err(body: &str, rows: Option<usize>) -> String {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.csv");
        fs::write(&path, body).unwrap();
        load_field(&path, rows, rows).unwrap_err().to_string()
    }

    #[test]
    fn rejects_bad_long_form() {
        let msg = load_err("i,j,k,s\n0,0,0,0.5\n0,0,1,-0.2\n0,0,2,0.1\n", None);
        assert!(msg.contains("row 0, col 0, plane 1"), "{msg}");
        let msg = load_err("i,j,k,s\n0,0,0,0.5\n0,0,1,NaN\n0,0,2,0.1\n", None);
        assert!(msg.contains("plane 1"), "{msg}");
        let msg = load_err("i,j,k,s\n0,0,0,0.5\n0,0,1,0.2\n", None);
        assert!(msg.contains("plane 2 is missing"), "{msg}");
        let msg = load_err("i,j,k,s\n0,0,0,0.5\n0,0,1,0.2\n0,0,2,0.1\n", Some(2));
        assert!(msg.contains("row 0, col 1, plane 0 has no score"), "{msg}");
        let msg = load_err("i,j,k,s\n5,0,0,0.5\n", Some(2));
        assert!(msg.contains("outside"), "{msg}");
        let msg = load_err("a,b\n", None);
        assert!(msg.contains("header"), "{msg}");
        let msg = load_err("i,j,k,s\n0,0,0,0.5\n0,0,0,0.5\n", None);
        assert!(msg.contains("twice"), "{msg}");
        let msg = load_err("i,j,k,s\n0,0,3,0.5\n", None);
        assert!(msg.contains("plane 3"), "{msg}");
    }

    #[test]
    fn loads_per_plane_grids() {
        let dir = tempfile::tempdir().unwrap();
        let paths: Vec<_> = (0..3).map(|k| dir.path().join(format!("p{k}.csv"))).collect();
        for (k, p) in paths.iter().enumerate() {
            fs::write(p, format!("{k},0.5\n0.25,1\n")).unwrap();
        }
        let refs = [paths[0].as_path(), paths[1].as_path(), paths[2].as_path()];
        let f = load_field_planes(&refs, None, None).unwrap();
        assert_eq!((f.rows(), f.cols()), (2, 2));
        assert_eq!(f.get(0, 0, LandUse::Conservation).unwrap(), 2.0);
        assert!(load_field_planes(&refs, Some(3), Some(2)).is_err());

        fs::write(&paths[1], "0.1,0.2\n0.3\n").unwrap();
        let msg = load_field_planes(&refs, None, None).unwrap_err().to_string();
        assert!(msg.contains("row 1, plane 1"), "{msg}");
        fs::write(&paths[1], "0.1,0.2\n0.3,-1\n").unwrap();
        let msg = load_field_planes(&refs, None, None).unwrap_err().to_string();
        assert!(msg.contains("row 1, col 1, plane 1"), "{msg}");
    }
}

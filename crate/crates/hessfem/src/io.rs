//! File formats: line-delimited JSON, CSV mirrors, and plain-text mesh and
//! field snapshots.
//!
//! Snapshot files are whitespace separated, one entry per line:
//!
//! * nodes: `id x y`
//! * elements: `id n0 n1 n2 n3`
//! * fields: one value per line

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use anyhow::{bail, Context, Result};
use hessfem_core::fem::Mesh;
use serde::de::DeserializeOwned;
use serde::Serialize;
use sha2::{Digest, Sha256};

fn create(path: &Path) -> Result<BufWriter<File>> {
    let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    Ok(BufWriter::new(file))
}

/// Writes one JSON object per line.
pub fn write_jsonl<T: Serialize>(path: &Path, records: &[T]) -> Result<()> {
    let mut w = create(path)?;
    write_jsonl_to(&mut w, records)?;
    w.flush()?;
    Ok(())
}

pub fn write_jsonl_to<T: Serialize, W: Write>(w: &mut W, records: &[T]) -> Result<()> {
    for r in records {
        serde_json::to_writer(&mut *w, r)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(
            serde_json::from_str(&line)
                .with_context(|| format!("{}:{}: bad record", path.display(), i + 1))?,
        );
    }
    Ok(out)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

/// CSV with a header row taken from the record's field names.
pub fn write_csv<T: Serialize>(path: &Path, records: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
    for r in records {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let mut r = csv::Reader::from_path(path).with_context(|| format!("opening {}", path.display()))?;
    r.deserialize().map(|rec| Ok(rec?)).collect()
}

/// Node and element files for a mesh.
pub fn write_mesh(nodes: &Path, elements: &Path, mesh: &Mesh) -> Result<()> {
    let mut w = create(nodes)?;
    for (i, x) in mesh.nodes.iter().enumerate() {
        writeln!(w, "{i} {:?} {:?}", x[0], x[1])?;
    }
    w.flush()?;
    let mut w = create(elements)?;
    for (e, n) in mesh.elements.iter().enumerate() {
        writeln!(w, "{e} {} {} {} {}", n[0], n[1], n[2], n[3])?;
    }
    w.flush()?;
    Ok(())
}

fn read_rows(path: &Path, width: usize) -> Result<Vec<Vec<String>>> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let mut rows = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        let cols: Vec<String> = line.split_whitespace().map(str::to_owned).collect();
        if cols.is_empty() {
            continue;
        }
        if cols.len() != width {
            bail!("{}:{}: expected {width} columns, found {}", path.display(), i + 1, cols.len());
        }
        rows.push(cols);
    }
    Ok(rows)
}

pub fn read_nodes(path: &Path) -> Result<Vec<[f64; 2]>> {
    read_rows(path, 3)?
        .into_iter()
        .enumerate()
        .map(|(i, c)| {
            if c[0].parse::<usize>()? != i {
                bail!("{}: node ids must be consecutive from 0", path.display());
            }
            Ok([c[1].parse()?, c[2].parse()?])
        })
        .collect()
}

pub fn read_elements(path: &Path) -> Result<Vec<[usize; 4]>> {
    read_rows(path, 5)?
        .into_iter()
        .enumerate()
        .map(|(i, c)| {
            if c[0].parse::<usize>()? != i {
                bail!("{}: element ids must be consecutive from 0", path.display());
            }
            Ok([c[1].parse()?, c[2].parse()?, c[3].parse()?, c[4].parse()?])
        })
        .collect()
}

/// One value per line, printed so that reading it back is exact.
pub fn write_field(path: &Path, values: &[f64]) -> Result<()> {
    let mut w = create(path)?;
    for v in values {
        writeln!(w, "{v:?}")?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_field(path: &Path) -> Result<Vec<f64>> {
    read_rows(path, 1)?
        .into_iter()
        .map(|c| Ok(c[0].parse()?))
        .collect()
}

/// SHA-256 of the little-endian bytes of a field, hex encoded.
pub fn field_digest(values: &[f64]) -> String {
    let mut h = Sha256::new();
    for v in values {
        h.update(v.to_le_bytes());
    }
    hex::encode(h.finalize())
}

//! On-disk dataset format: a manifest plus one coordinate-format file per
//! matrix.
//!
//! Matrix files hold a `%%shape rows cols` header followed by `row col value`
//! lines, 0-based, sorted by (row, col); absent entries are zero and `#`
//! starts a comment. Values are written with the shortest decimal form that
//! parses back to the same 64-bit float, so a save/load round trip is
//! bit-exact.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::{overlap_submatrix, AttributeKind, MultiNetworkDataset, SocialNetwork};
use crate::error::{HmcdError, Result};

#[derive(Serialize, Deserialize)]
struct Manifest {
    global_users: Vec<String>,
    networks: Vec<NetworkEntry>,
}

#[derive(Serialize, Deserialize)]
struct NetworkEntry {
    id: String,
    users: Vec<String>,
    overlapping_users: Vec<String>,
    matrices: BTreeMap<AttributeKind, String>,
    /// Overlap-scoped matrices; derived from `matrices` via submatrix
    /// extraction when absent.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    overlap_matrices: BTreeMap<AttributeKind, String>,
}

/// Writes `ds` into `dir` (created if needed) as `manifest.json` plus one
/// file per matrix.
pub fn save_dataset(ds: &MultiNetworkDataset, dir: &Path) -> Result<()> {
    ds.validate()?;
    fs::create_dir_all(dir)?;
    let mut manifest = Manifest {
        global_users: ds.global_users.clone(),
        networks: Vec::new(),
    };
    for (index, network) in ds.networks.iter().enumerate() {
        let mut entry = NetworkEntry {
            id: network.id.clone(),
            users: network.users.clone(),
            overlapping_users: network.overlapping_users.clone(),
            matrices: BTreeMap::new(),
            overlap_matrices: BTreeMap::new(),
        };
        for (kind, matrix) in &network.adjacency {
            let name = format!("net{index}_{kind}.mtx");
            write_matrix(&dir.join(&name), matrix)?;
            entry.matrices.insert(*kind, name);
        }
        for (kind, matrix) in &network.overlap_adjacency {
            let name = format!("net{index}_{kind}_overlap.mtx");
            write_matrix(&dir.join(&name), matrix)?;
            entry.overlap_matrices.insert(*kind, name);
        }
        manifest.networks.push(entry);
    }
    let path = dir.join("manifest.json");
    let file = BufWriter::new(File::create(&path)?);
    serde_json::to_writer_pretty(file, &manifest).map_err(|source| HmcdError::Json {
        path: path.clone(),
        source,
    })?;
    Ok(())
}

/// Loads a dataset saved by [`save_dataset`] and validates its invariants.
pub fn load_dataset(dir: &Path) -> Result<MultiNetworkDataset> {
    let manifest_path = dir.join("manifest.json");
    let file = BufReader::new(File::open(&manifest_path)?);
    let manifest: Manifest =
        serde_json::from_reader(file).map_err(|source| HmcdError::Json {
            path: manifest_path,
            source,
        })?;
    let mut networks = Vec::new();
    for entry in manifest.networks {
        let mut adjacency = BTreeMap::new();
        for (kind, name) in &entry.matrices {
            adjacency.insert(*kind, read_matrix(&dir.join(name))?);
        }
        let mut network = SocialNetwork {
            id: entry.id,
            users: entry.users,
            overlapping_users: entry.overlapping_users,
            adjacency,
            overlap_adjacency: BTreeMap::new(),
        };
        let overlap_indices = network.overlap_indices()?;
        for (kind, full) in &network.adjacency {
            let matrix = match entry.overlap_matrices.get(kind) {
                Some(name) => read_matrix(&dir.join(name))?,
                None => overlap_submatrix(full, &overlap_indices),
            };
            network.overlap_adjacency.insert(*kind, matrix);
        }
        networks.push(network);
    }
    let ds = MultiNetworkDataset {
        global_users: manifest.global_users,
        networks,
    };
    ds.validate()?;
    Ok(ds)
}

/// Writes one matrix in coordinate format, entries sorted by (row, col).
pub fn write_matrix(path: &Path, matrix: &Array2<f64>) -> Result<()> {
    let mut file = BufWriter::new(File::create(path)?);
    writeln!(file, "%%shape {} {}", matrix.nrows(), matrix.ncols())?;
    for ((row, col), value) in matrix.indexed_iter() {
        if *value != 0.0 {
            writeln!(file, "{row} {col} {value}")?;
        }
    }
    file.flush()?;
    Ok(())
}

/// Reads a coordinate-format matrix file.
pub fn read_matrix(path: &Path) -> Result<Array2<f64>> {
    let fail = |line: usize, message: String| HmcdError::format(path, Some(line), message);
    let file = BufReader::new(File::open(path)?);
    let mut matrix: Option<Array2<f64>> = None;
    for (number, line) in file.lines().enumerate() {
        let number = number + 1;
        let line = line?;
        let text = line.trim();
        if text.is_empty() || text.starts_with('#') {
            continue;
        }
        if matrix.is_none() {
            let rest = text.strip_prefix("%%shape").ok_or_else(|| {
                fail(number, "expected a %%shape header before entries".into())
            })?;
            let dims: Vec<usize> = rest
                .split_whitespace()
                .map(str::parse)
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| fail(number, format!("bad shape: {e}")))?;
            let [rows, cols] = dims[..] else {
                return Err(fail(number, "shape header needs rows and cols".into()));
            };
            matrix = Some(Array2::zeros((rows, cols)));
            continue;
        }
        let matrix = matrix.as_mut().expect("header parsed above");
        let fields: Vec<&str> = text.split_whitespace().collect();
        let [row, col, value] = fields[..] else {
            return Err(fail(number, format!("expected `row col value`, got {text:?}")));
        };
        let row: usize = row
            .parse()
            .map_err(|e| fail(number, format!("bad row index: {e}")))?;
        let col: usize = col
            .parse()
            .map_err(|e| fail(number, format!("bad column index: {e}")))?;
        let value: f64 = value
            .parse()
            .map_err(|e| fail(number, format!("bad value: {e}")))?;
        if row >= matrix.nrows() || col >= matrix.ncols() {
            return Err(fail(
                number,
                format!("entry ({row}, {col}) outside declared shape {:?}", matrix.dim()),
            ));
        }
        if !value.is_finite() {
            return Err(fail(number, format!("non-finite value {value}")));
        }
        matrix[[row, col]] = value;
    }
    matrix.ok_or_else(|| HmcdError::format(path, None, "missing %%shape header"))
}

//! Versioned binary model snapshots: a one-line text header
//! `PSDR1 <kind> <d> <r>` followed by little-endian 64-bit floats in
//! row-major order (G for flat; U then R for polar; W for cone-affine;
//! S for cone-logeuclidean). Payload bytes round-trip bitwise.

use std::fs;
use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::geometry::{sym, FlatFactor, PolarPoint, SpdMatrix, StiefelPoint};
use crate::regression::Model;

const MAGIC: &str = "PSDR1";

fn payload_matrices(model: &Model) -> Vec<&DMatrix<f64>> {
    match model {
        Model::Flat(g) => vec![g.matrix()],
        Model::Polar(p) => vec![p.subspace().matrix(), p.shape().matrix()],
        Model::ConeFull(w) => vec![w.matrix()],
        Model::ConeLog(s) => vec![s],
    }
}

pub fn save_model(path: impl AsRef<Path>, model: &Model) -> Result<()> {
    let mut bytes = format!(
        "{MAGIC} {} {} {}\n",
        model.geometry_name(),
        model.dim(),
        model.rank()
    )
    .into_bytes();
    for m in payload_matrices(model) {
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                bytes.extend_from_slice(&m[(i, j)].to_le_bytes());
            }
        }
    }
    fs::write(path, bytes)?;
    Ok(())
}

fn take_matrix(payload: &[u8], offset: &mut usize, rows: usize, cols: usize) -> Result<DMatrix<f64>> {
    let need = rows * cols * 8;
    if payload.len() < *offset + need {
        return Err(Error::data(format!(
            "model file truncated: payload holds {} bytes, need at least {}",
            payload.len(),
            *offset + need
        )));
    }
    let mut m = DMatrix::zeros(rows, cols);
    let mut at = *offset;
    for i in 0..rows {
        for j in 0..cols {
            let mut buf = [0u8; 8];
            buf.copy_from_slice(&payload[at..at + 8]);
            m[(i, j)] = f64::from_le_bytes(buf);
            at += 8;
        }
    }
    *offset = at;
    Ok(m)
}

pub fn load_model(path: impl AsRef<Path>) -> Result<Model> {
    let path = path.as_ref();
    let bytes = fs::read(path)?;
    let newline = bytes
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| Error::data(format!("{}: missing model header line", path.display())))?;
    let header = std::str::from_utf8(&bytes[..newline])
        .map_err(|_| Error::data(format!("{}: header is not UTF-8", path.display())))?;
    let fields: Vec<&str> = header.split_whitespace().collect();
    if fields.len() != 4 {
        return Err(Error::data(format!(
            "{}: malformed header '{header}', expected '{MAGIC} <kind> <d> <r>'",
            path.display()
        )));
    }
    if fields[0] != MAGIC {
        return Err(Error::data(format!(
            "{}: unsupported model file tag '{}', expected '{MAGIC}'",
            path.display(),
            fields[0]
        )));
    }
    let kind = fields[1];
    let d: usize = fields[2]
        .parse()
        .map_err(|_| Error::data(format!("{}: bad dimension '{}'", path.display(), fields[2])))?;
    let r: usize = fields[3]
        .parse()
        .map_err(|_| Error::data(format!("{}: bad rank '{}'", path.display(), fields[3])))?;
    if d == 0 || r == 0 || r > d {
        return Err(Error::data(format!(
            "{}: inconsistent dimensions d = {d}, r = {r}",
            path.display()
        )));
    }

    let payload = &bytes[newline + 1..];
    let mut offset = 0usize;
    let model = match kind {
        "flat" => Model::Flat(FlatFactor::new(take_matrix(payload, &mut offset, d, r)?)?),
        "polar" => {
            let u = StiefelPoint::new(take_matrix(payload, &mut offset, d, r)?)?;
            let shape = SpdMatrix::new(take_matrix(payload, &mut offset, r, r)?)?;
            Model::Polar(PolarPoint::new(u, shape)?)
        }
        "cone-affine" => {
            if r != d {
                return Err(Error::data(format!(
                    "{}: cone models are full rank, got r = {r} with d = {d}",
                    path.display()
                )));
            }
            Model::ConeFull(SpdMatrix::new(take_matrix(payload, &mut offset, d, d)?)?)
        }
        "cone-logeuclidean" => {
            if r != d {
                return Err(Error::data(format!(
                    "{}: cone models are full rank, got r = {r} with d = {d}",
                    path.display()
                )));
            }
            // sym() is bitwise idempotent on symmetric input, so this only
            // validates; a round trip stays exact.
            Model::ConeLog(sym(&take_matrix(payload, &mut offset, d, d)?)?)
        }
        other => {
            return Err(Error::data(format!(
                "{}: unknown model kind '{other}'",
                path.display()
            )))
        }
    };
    if offset != payload.len() {
        return Err(Error::data(format!(
            "{}: {} trailing payload bytes after the model data",
            path.display(),
            payload.len() - offset
        )));
    }
    Ok(model)
}

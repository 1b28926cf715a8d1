use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::embedding::{EmbeddingModelState, Table};
use crate::error::{Error, Result};

pub const CHECKPOINT_MAGIC: [u8; 4] = *b"FGCK";
pub const CHECKPOINT_VERSION: u32 = 1;

/// Weight tables at a given round.
///
/// Layout, little-endian: magic, version u32, N u64, M u64, round u64,
/// table count u32, SHA-256 of the run configuration, then every N x M table
/// as row-major f32.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub round: u64,
    pub config_hash: [u8; 32],
    pub tables: Vec<Table>,
}

/// SHA-256 over the JSON encoding of a configuration.
pub fn config_hash<T: Serialize>(config: &T) -> Result<[u8; 32]> {
    let bytes = serde_json::to_vec(config)?;
    Ok(Sha256::digest(&bytes).into())
}

impl Checkpoint {
    pub fn new(round: u64, config_hash: [u8; 32], tables: Vec<Table>) -> Result<Self> {
        if let Some(first) = tables.first() {
            if let Some(bad) = tables.iter().find(|t| t.rows() != first.rows() || t.cols() != first.cols()) {
                return Err(Error::Checkpoint(format!(
                    "tables must share one shape: {}x{} vs {}x{}",
                    first.rows(),
                    first.cols(),
                    bad.rows(),
                    bad.cols()
                )));
            }
        }
        Ok(Self { round, config_hash, tables })
    }

    /// Checkpoint of one or more model states, input table first.
    pub fn of_states<'a>(
        round: u64,
        config_hash: [u8; 32],
        states: impl IntoIterator<Item = &'a EmbeddingModelState>,
    ) -> Result<Self> {
        let tables = states.into_iter().flat_map(|s| [s.input.clone(), s.output.clone()]).collect();
        Self::new(round, config_hash, tables)
    }

    /// The `index`-th model state stored in this checkpoint.
    pub fn state(&self, index: usize) -> Result<EmbeddingModelState> {
        match (self.tables.get(2 * index), self.tables.get(2 * index + 1)) {
            (Some(input), Some(output)) => Ok(EmbeddingModelState { input: input.clone(), output: output.clone() }),
            _ => {
                Err(Error::Checkpoint(format!("checkpoint holds {} tables, no model state {index}", self.tables.len())))
            }
        }
    }

    pub fn rows(&self) -> usize {
        self.tables.first().map_or(0, Table::rows)
    }

    pub fn cols(&self) -> usize {
        self.tables.first().map_or(0, Table::cols)
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(&CHECKPOINT_MAGIC)?;
        w.write_all(&CHECKPOINT_VERSION.to_le_bytes())?;
        w.write_all(&(self.rows() as u64).to_le_bytes())?;
        w.write_all(&(self.cols() as u64).to_le_bytes())?;
        w.write_all(&self.round.to_le_bytes())?;
        w.write_all(&(self.tables.len() as u32).to_le_bytes())?;
        w.write_all(&self.config_hash)?;
        let mut buf = Vec::with_capacity(self.rows() * self.cols() * 4);
        for t in &self.tables {
            buf.clear();
            for v in t.as_slice() {
                buf.extend_from_slice(&v.to_le_bytes());
            }
            w.write_all(&buf)?;
        }
        Ok(())
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Self> {
        let mut magic = [0u8; 4];
        read_exact(&mut r, &mut magic)?;
        if magic != CHECKPOINT_MAGIC {
            return Err(Error::Checkpoint("bad magic".into()));
        }
        let version = u32::from_le_bytes(read_array(&mut r)?);
        if version != CHECKPOINT_VERSION {
            return Err(Error::Checkpoint(format!("unsupported version {version}")));
        }
        let rows = u64::from_le_bytes(read_array(&mut r)?) as usize;
        let cols = u64::from_le_bytes(read_array(&mut r)?) as usize;
        let round = u64::from_le_bytes(read_array(&mut r)?);
        let count = u32::from_le_bytes(read_array(&mut r)?) as usize;
        let config_hash: [u8; 32] = read_array(&mut r)?;
        let len = rows
            .checked_mul(cols)
            .and_then(|n| n.checked_mul(4))
            .ok_or_else(|| Error::Checkpoint("table size overflows".into()))?;
        let mut tables = Vec::with_capacity(count);
        let mut raw = vec![0u8; len];
        for _ in 0..count {
            read_exact(&mut r, &mut raw)?;
            let data = raw.chunks_exact(4).map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]])).collect();
            tables.push(Table::from_vec(rows, cols, data)?);
        }
        let mut trailing = [0u8; 1];
        if r.read(&mut trailing)? != 0 {
            return Err(Error::Checkpoint("trailing bytes after the last table".into()));
        }
        Ok(Self { round, config_hash, tables })
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        self.write_to(&mut out).expect("writing to a Vec cannot fail");
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        Self::read_from(bytes)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let tmp = path.with_extension("partial");
        fs::write(&tmp, self.to_bytes())?;
        fs::rename(&tmp, path)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_bytes(&fs::read(path)?)
    }
}

fn read_exact<R: Read>(r: &mut R, buf: &mut [u8]) -> Result<()> {
    r.read_exact(buf).map_err(|e| match e.kind() {
        std::io::ErrorKind::UnexpectedEof => Error::Checkpoint("truncated checkpoint".into()),
        _ => Error::Io(e),
    })
}

fn read_array<R: Read, const N: usize>(r: &mut R) -> Result<[u8; N]> {
    let mut buf = [0u8; N];
    read_exact(r, &mut buf)?;
    Ok(buf)
}

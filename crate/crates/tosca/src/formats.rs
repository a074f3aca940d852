//! Binary feature and module-bank files.
//!
//! Feature file: `FTRSET01`, u32 version, u32 d, u64 n, then n records of
//! (u32 label, d x f32). Bank file: `LUCABANK`, u32 version, u32 d, u32 r,
//! u32 entries, then per entry u32 session, u32 K, K x u32 class ids, the
//! matrices W_down, W_up, V_down, V_up and the head as row-major f32, and a
//! u64 FNV-1a checksum of the entry's bytes. Everything is little-endian.

use std::fs::File;
use std::hash::Hasher;
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::path::Path;

use fnv::FnvHasher;
use tosca_core::data::MAX_DIM;
use tosca_core::{FeatureDataset, LucaConfig, LucaModule, Matrix, ModuleBank, SessionHead};

use crate::error::{FormatError, FormatResult};

pub const FEATURE_MAGIC: &[u8; 8] = b"FTRSET01";
pub const BANK_MAGIC: &[u8; 8] = b"LUCABANK";
pub const VERSION: u32 = 1;

/// Upper bound on speculative preallocation from untrusted headers.
const PREALLOC_LIMIT: usize = 1 << 20;

pub fn write_features<W: Write>(ds: &FeatureDataset, mut w: W) -> FormatResult<()> {
    w.write_all(FEATURE_MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&(ds.dim() as u32).to_le_bytes())?;
    w.write_all(&(ds.len() as u64).to_le_bytes())?;
    for (label, x) in ds.iter() {
        w.write_all(&label.to_le_bytes())?;
        for v in x {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_features<R: Read>(mut r: R, name: &str) -> FormatResult<FeatureDataset> {
    let mut magic = [0u8; 8];
    read_exact(&mut r, &mut magic)?;
    if &magic != FEATURE_MAGIC {
        return Err(FormatError::NotAFeatureFile);
    }
    check_version(read_u32(&mut r)?)?;
    let dim = read_u32(&mut r)? as usize;
    if dim == 0 || dim > MAX_DIM {
        return Err(FormatError::Malformed("feature dimension out of range"));
    }
    let n = read_u64(&mut r)?;
    let n = usize::try_from(n).map_err(|_| FormatError::Malformed("sample count too large"))?;
    let mut labels = Vec::with_capacity(n.min(PREALLOC_LIMIT));
    let mut features = Vec::with_capacity(n.saturating_mul(dim).min(PREALLOC_LIMIT));
    for _ in 0..n {
        labels.push(read_u32(&mut r)?);
        for _ in 0..dim {
            features.push(read_f32(&mut r)?);
        }
    }
    expect_end(&mut r)?;
    Ok(FeatureDataset::from_parts(name, dim, labels, features)?)
}

pub fn save_features(ds: &FeatureDataset, path: impl AsRef<Path>) -> FormatResult<()> {
    write_features(ds, BufWriter::new(File::create(path)?))
}

/// Loads a feature file; the dataset is named after the file stem.
pub fn load_features(path: impl AsRef<Path>) -> FormatResult<FeatureDataset> {
    let path = path.as_ref();
    let name = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    read_features(BufReader::new(File::open(path)?), &name)
}

/// Serializes one bank entry's payload (everything the checksum covers).
fn entry_bytes(session: u32, module: &LucaModule, head: &SessionHead) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(&session.to_le_bytes());
    out.extend_from_slice(&(head.num_classes() as u32).to_le_bytes());
    for c in head.class_ids() {
        out.extend_from_slice(&c.to_le_bytes());
    }
    for m in module.matrices().into_iter().chain([&head.weights]) {
        for v in m.as_slice() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

fn checksum(bytes: &[u8]) -> u64 {
    let mut h = FnvHasher::default();
    h.write(bytes);
    h.finish()
}

pub fn write_bank<W: Write>(bank: &ModuleBank, mut w: W) -> FormatResult<()> {
    let rank = bank.rank().ok_or(FormatError::EmptyBank)?;
    w.write_all(BANK_MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&(bank.dim() as u32).to_le_bytes())?;
    w.write_all(&(rank as u32).to_le_bytes())?;
    w.write_all(&(bank.len() as u32).to_le_bytes())?;
    for e in bank.entries() {
        let bytes = entry_bytes(e.session, &e.module, &e.head);
        w.write_all(&bytes)?;
        w.write_all(&checksum(&bytes).to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a bank file. The file stores weights only, so the activation and
/// composition settings are supplied by the caller.
pub fn read_bank<R: Read>(mut r: R, config: LucaConfig) -> FormatResult<ModuleBank> {
    let mut magic = [0u8; 8];
    read_exact(&mut r, &mut magic)?;
    if &magic != BANK_MAGIC {
        return Err(FormatError::NotABankFile);
    }
    check_version(read_u32(&mut r)?)?;
    let d = read_u32(&mut r)? as usize;
    let rank = read_u32(&mut r)? as usize;
    let entries = read_u32(&mut r)?;
    if d == 0 || d > MAX_DIM || rank == 0 || rank > MAX_DIM {
        return Err(FormatError::Malformed("bank dimensions out of range"));
    }
    if entries == 0 {
        return Err(FormatError::EmptyBank);
    }
    let mut bank = ModuleBank::new(d)?;
    for index in 0..entries {
        let session = read_u32(&mut r)?;
        if session != index + 1 {
            return Err(FormatError::Malformed("session indices must be 1, 2, ... in order"));
        }
        let k = read_u32(&mut r)? as usize;
        if k == 0 {
            return Err(FormatError::Malformed("entry without classes"));
        }
        let class_ids = (0..k).map(|_| read_u32(&mut r)).collect::<FormatResult<Vec<_>>>()?;
        let mut read_matrix = |rows: usize, cols: usize| -> FormatResult<Matrix<f32>> {
            let data = (0..rows * cols).map(|_| read_f32(&mut r)).collect::<FormatResult<Vec<_>>>()?;
            Ok(Matrix::from_vec(rows, cols, data)?)
        };
        let w_down = read_matrix(d, rank)?;
        let w_up = read_matrix(rank, d)?;
        let v_down = read_matrix(d, rank)?;
        let v_up = read_matrix(rank, d)?;
        let head_w = read_matrix(d, k)?;
        let stored = read_u64(&mut r)?;

        let module = LucaModule::from_parts(w_down, w_up, v_down, v_up, config)?;
        let head = SessionHead::new(head_w, class_ids)?;
        if checksum(&entry_bytes(session, &module, &head)) != stored {
            return Err(FormatError::ChecksumMismatch { session });
        }
        bank.push(module, head)?;
    }
    expect_end(&mut r)?;
    Ok(bank)
}

pub fn save_bank(bank: &ModuleBank, path: impl AsRef<Path>) -> FormatResult<()> {
    write_bank(bank, BufWriter::new(File::create(path)?))
}

pub fn load_bank(path: impl AsRef<Path>, config: LucaConfig) -> FormatResult<ModuleBank> {
    read_bank(BufReader::new(File::open(path)?), config)
}

fn check_version(v: u32) -> FormatResult<()> {
    if v == VERSION {
        Ok(())
    } else {
        Err(FormatError::UnsupportedVersion(v))
    }
}

fn read_exact<R: Read>(r: &mut R, buf: &mut [u8]) -> FormatResult<()> {
    r.read_exact(buf).map_err(|e| match e.kind() {
        io::ErrorKind::UnexpectedEof => FormatError::UnexpectedEof,
        _ => FormatError::Io(e),
    })
}

fn expect_end<R: Read>(r: &mut R) -> FormatResult<()> {
    let mut probe = [0u8; 1];
    loop {
        match r.read(&mut probe) {
            Ok(0) => return Ok(()),
            Ok(_) => return Err(FormatError::TrailingBytes),
            Err(e) if e.kind() == io::ErrorKind::Interrupted => continue,
            Err(e) => return Err(FormatError::Io(e)),
        }
    }
}

fn read_u32<R: Read>(r: &mut R) -> FormatResult<u32> {
    let mut b = [0u8; 4];
    read_exact(r, &mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64<R: Read>(r: &mut R) -> FormatResult<u64> {
    let mut b = [0u8; 8];
    read_exact(r, &mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn read_f32<R: Read>(r: &mut R) -> FormatResult<f32> {
    let mut b = [0u8; 4];
    read_exact(r, &mut b)?;
    Ok(f32::from_le_bytes(b))
}

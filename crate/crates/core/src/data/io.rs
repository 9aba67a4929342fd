//! Dataset files.
//!
//! ```text
//! eleatt-dataset\n
//! <key>=<value>\n ...     sorted; version, dim, classes, train, val, test, meta.*
//! end\n
//! <records for train, then val, then test>
//! <CRC-32 of all preceding bytes, little-endian u32>
//! ```
//!
//! A record is `label: u32`, `frames: u32`, then `dim x frames` values as
//! little-endian `f32`, frame by frame.

use std::path::Path;

use sha2::{Digest, Sha256};

use crate::config::KvConfig;
use crate::data::SequenceBatch;
use crate::error::{Error, Result};
use crate::model::checkpoint::{split_header, verify_crc};
use crate::numerics::Tensor2;

pub const DATASET_VERSION: u32 = 1;
const MAGIC: &str = "eleatt-dataset";

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub train: SequenceBatch,
    pub val: SequenceBatch,
    pub test: SequenceBatch,
    /// Free-form provenance (generator spec, informative dims, ...).
    pub meta: KvConfig,
}

impl Dataset {
    pub fn dim(&self) -> usize {
        self.train.dim()
    }

    pub fn num_classes(&self) -> usize {
        self.train.num_classes()
    }

    fn splits(&self) -> [&SequenceBatch; 3] {
        [&self.train, &self.val, &self.test]
    }

    pub fn check(&self) -> Result<()> {
        if self.splits().iter().all(|s| s.is_empty()) {
            return Err(Error::EmptyDataset);
        }
        for s in self.splits() {
            if s.dim() != self.dim() || s.num_classes() != self.num_classes() {
                return Err(Error::InvalidArgument("splits disagree on dimensions".into()));
            }
        }
        Ok(())
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        self.check()?;
        let mut kv = KvConfig::new();
        kv.set("version", DATASET_VERSION);
        kv.set("dim", self.dim());
        kv.set("classes", self.num_classes());
        kv.set("train", self.train.len());
        kv.set("val", self.val.len());
        kv.set("test", self.test.len());
        kv.insert_section("meta", &self.meta);
        let mut bytes = format!("{MAGIC}\n{}end\n", kv.render()).into_bytes();
        for split in self.splits() {
            for (x, &label) in split.inputs().iter().zip(split.labels()) {
                bytes.extend_from_slice(&(label as u32).to_le_bytes());
                bytes.extend_from_slice(&(x.cols() as u32).to_le_bytes());
                for t in 0..x.cols() {
                    for r in 0..x.rows() {
                        bytes.extend_from_slice(&(x.get(r, t) as f32).to_le_bytes());
                    }
                }
            }
        }
        let crc = crc32fast::hash(&bytes);
        bytes.extend_from_slice(&crc.to_le_bytes());
        Ok(bytes)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let body = verify_crc(bytes)?;
        let (header, payload) = split_header(body)?;
        let text = header
            .strip_prefix(MAGIC)
            .and_then(|h| h.strip_prefix('\n'))
            .ok_or_else(|| Error::Format("not a dataset file".into()))?;
        let text = text.strip_suffix("end\n").unwrap_or(text);
        let kv = KvConfig::parse(text)?;
        let version: u32 = kv.require("version")?;
        if version != DATASET_VERSION {
            return Err(Error::VersionMismatch {
                expected: DATASET_VERSION,
                found: version,
            });
        }
        let dim: usize = kv.require("dim")?;
        let classes: usize = kv.require("classes")?;

        let mut cursor = payload;
        let mut take = |n: usize| -> Result<&[u8]> {
            if cursor.len() < n {
                return Err(Error::Format("dataset payload truncated".into()));
            }
            let (head, rest) = cursor.split_at(n);
            cursor = rest;
            Ok(head)
        };
        let mut read_split = |count: usize| -> Result<SequenceBatch> {
            let mut inputs = Vec::with_capacity(count);
            let mut labels = Vec::with_capacity(count);
            for _ in 0..count {
                let label = u32::from_le_bytes(take(4)?.try_into().expect("4 bytes")) as usize;
                let len = u32::from_le_bytes(take(4)?.try_into().expect("4 bytes")) as usize;
                let raw = take(dim * len * 4)?;
                let mut x = Tensor2::zeros(dim, len);
                for (i, c) in raw.chunks_exact(4).enumerate() {
                    let v = f32::from_le_bytes(c.try_into().expect("4 bytes"));
                    x.set(i % dim, i / dim, f64::from(v));
                }
                inputs.push(x);
                labels.push(label);
            }
            SequenceBatch::new(dim, classes, inputs, labels)
        };
        let train = read_split(kv.require("train")?)?;
        let val = read_split(kv.require("val")?)?;
        let test = read_split(kv.require("test")?)?;
        if !cursor.is_empty() {
            return Err(Error::Format(format!("{} trailing payload bytes", cursor.len())));
        }
        let ds = Dataset {
            train,
            val,
            test,
            meta: kv.section("meta"),
        };
        ds.check()?;
        Ok(ds)
    }

    /// Hex SHA-256 of the serialized file.
    pub fn hash(&self) -> Result<String> {
        Ok(hex::encode(Sha256::digest(self.to_bytes()?)))
    }
}

pub fn save_dataset(ds: &Dataset, path: &Path) -> Result<()> {
    std::fs::write(path, ds.to_bytes()?)?;
    Ok(())
}

pub fn load_dataset(path: &Path) -> Result<Dataset> {
    Dataset::from_bytes(&std::fs::read(path)?)
}

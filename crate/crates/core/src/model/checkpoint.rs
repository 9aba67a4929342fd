//! Checkpoint files.
//!
//! ```text
//! eleatt-checkpoint\n
//! <key>=<value>\n ...            sorted; version, seed, model.*, meta.*, adam.*
//! tensor <name> <rows> <cols> <byte offset>\n ...
//! end\n
//! <payload: every tensor, row-major little-endian f64, in directory order>
//! <CRC-32 of all preceding bytes, little-endian u32>
//! ```

use std::path::Path;

use crate::config::KvConfig;
use crate::error::{Error, Result};
use crate::model::{Network, NetworkConfig};
use crate::numerics::Tensor2;
use crate::optim::AdamState;

pub const CHECKPOINT_VERSION: u32 = 1;
const MAGIC: &str = "eleatt-checkpoint";

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub network: Network,
    /// Root seed the network was built from.
    pub seed: u64,
    pub optimizer: Option<AdamState>,
    /// Caller-defined scalar state (schedule, epoch counters, ...), stored
    /// under `meta.`.
    pub meta: KvConfig,
}

impl Checkpoint {
    pub fn new(network: Network, seed: u64) -> Self {
        Self {
            network,
            seed,
            optimizer: None,
            meta: KvConfig::new(),
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut kv = KvConfig::new();
        kv.set("version", CHECKPOINT_VERSION);
        kv.set("seed", self.seed);
        kv.insert_section("model", &self.network.config().to_kv());
        kv.insert_section("meta", &self.meta);

        let mut tensors: Vec<(String, &Tensor2)> = self.network.named_params();
        if let Some(adam) = &self.optimizer {
            kv.set("adam.beta1", adam.beta1);
            kv.set("adam.beta2", adam.beta2);
            kv.set("adam.eps", adam.eps);
            kv.set("adam.step", adam.step);
            let names: Vec<String> = tensors.iter().map(|(n, _)| n.clone()).collect();
            for (n, m) in names.iter().zip(&adam.m) {
                tensors.push((format!("adam.m.{n}"), m));
            }
            for (n, v) in names.iter().zip(&adam.v) {
                tensors.push((format!("adam.v.{n}"), v));
            }
        }

        let mut out = format!("{MAGIC}\n{}", kv.render());
        let mut offset = 0usize;
        for (name, t) in &tensors {
            out.push_str(&format!("tensor {name} {} {} {offset}\n", t.rows(), t.cols()));
            offset += t.len() * 8;
        }
        out.push_str("end\n");
        let mut bytes = out.into_bytes();
        bytes.reserve(offset + 4);
        for (_, t) in &tensors {
            for v in t.data() {
                bytes.extend_from_slice(&v.to_le_bytes());
            }
        }
        let crc = crc32fast::hash(&bytes);
        bytes.extend_from_slice(&crc.to_le_bytes());
        bytes
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let body = verify_crc(bytes)?;
        let (header, payload) = split_header(body)?;
        let mut lines = header.lines();
        if lines.next() != Some(MAGIC) {
            return Err(Error::Format("not a checkpoint file".into()));
        }
        let mut kv_text = String::new();
        let mut directory = Vec::new();
        for line in lines {
            if let Some(rest) = line.strip_prefix("tensor ") {
                directory.push(parse_entry(rest)?);
            } else if line == "end" {
                break;
            } else if directory.is_empty() {
                kv_text.push_str(line);
                kv_text.push('\n');
            } else {
                return Err(Error::Format(format!("unexpected header line `{line}`")));
            }
        }
        let kv = KvConfig::parse(&kv_text)?;
        let version: u32 = kv.require("version")?;
        if version != CHECKPOINT_VERSION {
            return Err(Error::VersionMismatch {
                expected: CHECKPOINT_VERSION,
                found: version,
            });
        }
        let seed = kv.require("seed")?;
        let config = NetworkConfig::from_kv(&kv.section("model"))?;
        let mut network = Network::zeros(config)?;

        let expected: usize = directory.iter().map(|e| e.rows * e.cols * 8).sum();
        if expected != payload.len() {
            return Err(Error::Format(format!(
                "payload holds {} bytes, directory describes {expected}",
                payload.len()
            )));
        }
        let read = |e: &Entry| -> Result<Tensor2> {
            let end = e.offset + e.rows * e.cols * 8;
            let raw = payload
                .get(e.offset..end)
                .ok_or_else(|| Error::Format(format!("tensor {} out of bounds", e.name)))?;
            let data = raw
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
                .collect();
            Tensor2::from_vec(e.rows, e.cols, data)
        };
        let find = |name: &str| -> Result<&Entry> {
            let mut hits = directory.iter().filter(|e| e.name == name);
            let first = hits
                .next()
                .ok_or_else(|| Error::Format(format!("tensor {name} missing")))?;
            if hits.next().is_some() {
                return Err(Error::Format(format!("tensor {name} listed twice")));
            }
            Ok(first)
        };

        let names: Vec<String> = network.named_params().into_iter().map(|(n, _)| n).collect();
        let mut loaded = Vec::with_capacity(names.len());
        for name in &names {
            loaded.push(read(find(name)?)?);
        }
        for (slot, t) in network.params_mut().into_iter().zip(loaded) {
            if slot.shape() != t.shape() {
                return Err(Error::Format(format!(
                    "tensor shape {:?} does not match the configured {:?}",
                    t.shape(),
                    slot.shape()
                )));
            }
            *slot = t;
        }

        let optimizer = match kv.get_parsed::<u64>("adam.step")? {
            None => None,
            Some(step) => {
                let mut m = Vec::with_capacity(names.len());
                let mut v = Vec::with_capacity(names.len());
                for name in &names {
                    m.push(read(find(&format!("adam.m.{name}"))?)?);
                    v.push(read(find(&format!("adam.v.{name}"))?)?);
                }
                Some(AdamState {
                    beta1: kv.require("adam.beta1")?,
                    beta2: kv.require("adam.beta2")?,
                    eps: kv.require("adam.eps")?,
                    step,
                    m,
                    v,
                })
            }
        };
        let known = names.len() * if optimizer.is_some() { 3 } else { 1 };
        if directory.len() != known {
            return Err(Error::Format(format!(
                "{} tensors listed, {known} expected",
                directory.len()
            )));
        }
        Ok(Self {
            network,
            seed,
            optimizer,
            meta: kv.section("meta"),
        })
    }
}

struct Entry {
    name: String,
    rows: usize,
    cols: usize,
    offset: usize,
}

fn parse_entry(rest: &str) -> Result<Entry> {
    let parts: Vec<&str> = rest.split(' ').collect();
    let bad = || Error::Format(format!("bad tensor entry `{rest}`"));
    if parts.len() != 4 {
        return Err(bad());
    }
    let num = |s: &str| s.parse::<usize>().map_err(|_| bad());
    Ok(Entry {
        name: parts[0].to_string(),
        rows: num(parts[1])?,
        cols: num(parts[2])?,
        offset: num(parts[3])?,
    })
}

/// Strips and checks the CRC-32 trailer.
pub(crate) fn verify_crc(bytes: &[u8]) -> Result<&[u8]> {
    if bytes.len() < 4 {
        return Err(Error::Integrity("file too short for a checksum".into()));
    }
    let (body, tail) = bytes.split_at(bytes.len() - 4);
    let stored = u32::from_le_bytes(tail.try_into().expect("4 bytes"));
    let actual = crc32fast::hash(body);
    if stored != actual {
        return Err(Error::Integrity(format!(
            "checksum {actual:08x} does not match stored {stored:08x}"
        )));
    }
    Ok(body)
}

/// Splits at the `end\n` line terminating a text header.
pub(crate) fn split_header(body: &[u8]) -> Result<(&str, &[u8])> {
    let marker = b"\nend\n";
    let pos = body
        .windows(marker.len())
        .position(|w| w == marker)
        .ok_or_else(|| Error::Format("header terminator not found".into()))?;
    let (head, rest) = body.split_at(pos + marker.len());
    let head = std::str::from_utf8(head).map_err(|_| Error::Format("header is not UTF-8".into()))?;
    Ok((head, rest))
}

pub fn save_checkpoint(ckpt: &Checkpoint, path: &Path) -> Result<()> {
    // Write-then-rename so a crash never leaves a half-written checkpoint.
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, ckpt.to_bytes())?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    Checkpoint::from_bytes(&std::fs::read(path)?)
}

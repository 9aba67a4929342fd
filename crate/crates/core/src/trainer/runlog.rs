use std::path::Path;

use crate::error::{Error, Result};

pub const RUNLOG_HEADER: &str = "epoch,train_loss,train_acc,val_loss,val_acc,lr,seconds";

/// One row per completed epoch. `lr` is the rate used during the epoch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub train_acc: f64,
    /// Empty on epochs without validation.
    pub val_loss: Option<f64>,
    pub val_acc: Option<f64>,
    pub lr: f64,
    pub seconds: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunLog {
    pub rows: Vec<EpochRecord>,
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

impl RunLog {
    /// Floats are written in shortest round-trip form, so parsing the CSV
    /// gives back the exact values.
    pub fn to_csv(&self) -> String {
        let mut out = format!("{RUNLOG_HEADER}\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                r.epoch,
                r.train_loss,
                r.train_acc,
                opt(r.val_loss),
                opt(r.val_acc),
                r.lr,
                r.seconds
            ));
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        if lines.next() != Some(RUNLOG_HEADER) {
            return Err(Error::Format("run log header missing".into()));
        }
        let mut rows = Vec::new();
        for (n, line) in lines.enumerate() {
            let bad = || Error::Format(format!("run log line {}: `{line}`", n + 2));
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 7 {
                return Err(bad());
            }
            let num = |s: &str| s.parse::<f64>().map_err(|_| bad());
            let optnum = |s: &str| if s.is_empty() { Ok(None) } else { num(s).map(Some) };
            let epoch: usize = f[0].parse().map_err(|_| bad())?;
            if epoch != rows.len() + 1 {
                return Err(Error::Format(format!("run log epochs out of order at line {}", n + 2)));
            }
            rows.push(EpochRecord {
                epoch,
                train_loss: num(f[1])?,
                train_acc: num(f[2])?,
                val_loss: optnum(f[3])?,
                val_acc: optnum(f[4])?,
                lr: num(f[5])?,
                seconds: num(f[6])?,
            });
        }
        Ok(Self { rows })
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_csv(&std::fs::read_to_string(path)?)
    }

    pub fn train_losses(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.train_loss).collect()
    }

    pub fn final_train_loss(&self) -> Option<f64> {
        self.rows.last().map(|r| r.train_loss)
    }

    /// First epoch (1-based) whose training loss is at most `target`.
    pub fn first_epoch_reaching(&self, target: f64) -> Option<usize> {
        self.rows.iter().find(|r| r.train_loss <= target).map(|r| r.epoch)
    }
}

//! Plain-text training history.
//!
//! ```text
//! # signcnn-history v1
//! # best_epoch=2 stopped_early=true
//! epoch	train_loss	train_accuracy	val_loss	val_accuracy
//! 1	1.75	0.5	0.5	0.9
//! ```
//!
//! Tab-separated, one record per epoch in epoch order. Values use the
//! shortest representation that parses back to the same `f64`.

use std::path::Path;

use crate::error::{Error, Result};
use crate::fsutil::write_atomic;
use crate::train::{EpochRecord, TrainingHistory};

pub const HISTORY_HEADER: &str = "# signcnn-history v1";
const COLUMNS: &str = "epoch\ttrain_loss\ttrain_accuracy\tval_loss\tval_accuracy";

pub fn format_history(history: &TrainingHistory) -> Result<String> {
    if history.records.is_empty() {
        return Err(Error::History("history has no epochs".into()));
    }
    let best = history.best_epoch.map_or("none".to_string(), |e| e.to_string());
    let mut s = format!(
        "{HISTORY_HEADER}\n# best_epoch={best} stopped_early={}\n{COLUMNS}\n",
        history.stopped_early
    );
    for r in &history.records {
        s.push_str(&format!(
            "{}\t{}\t{}\t{}\t{}\n",
            r.epoch, r.train_loss, r.train_accuracy, r.val_loss, r.val_accuracy
        ));
    }
    Ok(s)
}

pub fn write_history(history: &TrainingHistory, path: impl AsRef<Path>) -> Result<()> {
    write_atomic(path.as_ref(), format_history(history)?.as_bytes())
}

pub fn read_history(path: impl AsRef<Path>) -> Result<TrainingHistory> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_history(&text)
}

pub fn parse_history(text: &str) -> Result<TrainingHistory> {
    let bad = |m: String| Error::History(m);
    let mut lines = text.lines();
    if lines.next().map(str::trim_end) != Some(HISTORY_HEADER) {
        return Err(bad(format!("first line must be {HISTORY_HEADER:?}")));
    }
    let meta = lines.next().ok_or_else(|| bad("missing metadata line".into()))?;
    let mut history = TrainingHistory::default();
    for field in meta.trim_start_matches('#').split_whitespace() {
        match field.split_once('=') {
            Some(("best_epoch", "none")) => history.best_epoch = None,
            Some(("best_epoch", v)) => {
                history.best_epoch = Some(v.parse().map_err(|_| bad(format!("bad best_epoch {v:?}")))?)
            }
            Some(("stopped_early", v)) => {
                history.stopped_early = v.parse().map_err(|_| bad(format!("bad stopped_early {v:?}")))?
            }
            _ => return Err(bad(format!("unknown metadata field {field:?}"))),
        }
    }
    if lines.next().map(str::trim_end) != Some(COLUMNS) {
        return Err(bad("missing column header".into()));
    }
    for (i, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let cells: Vec<&str> = line.trim_end().split('\t').collect();
        if cells.len() != 5 {
            return Err(bad(format!("record {} has {} fields, expected 5", i + 1, cells.len())));
        }
        let num = |k: usize| -> Result<f64> {
            cells[k]
                .parse()
                .map_err(|_| bad(format!("record {}: {:?} is not a number", i + 1, cells[k])))
        };
        let epoch: usize = cells[0]
            .parse()
            .map_err(|_| bad(format!("record {}: bad epoch {:?}", i + 1, cells[0])))?;
        history.records.push(EpochRecord {
            epoch,
            train_loss: num(1)?,
            train_accuracy: num(2)?,
            val_loss: num(3)?,
            val_accuracy: num(4)?,
        });
    }
    if history.records.is_empty() {
        return Err(bad("history has no epochs".into()));
    }
    Ok(history)
}

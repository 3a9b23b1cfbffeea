//! Per-rotation membership files and the train/test leakage audit.

use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::finetune::{ItemRun, RotationReport};

pub const ROTATIONS_HEADER: &str = "rotation\tbest_epoch\tvalidation_qwk";
pub const MEMBERS_HEADER: &str = "rotation\trole\trecord_id";

const ROLES: [&str; 5] = ["train", "validation", "test", "example", "long"];

pub fn rotations_tsv(run: &ItemRun) -> String {
    let mut out = format!("# item {} labels {}\n{ROTATIONS_HEADER}\n", run.item_id, run.num_labels);
    for r in &run.rotations {
        let q: Vec<String> = r.validation_qwk.iter().map(|v| v.to_string()).collect();
        out.push_str(&format!("{}\t{}\t{}\n", r.rotation, r.best_epoch, q.join(",")));
    }
    out.push_str(&format!("# members\n{MEMBERS_HEADER}\n"));
    for r in &run.rotations {
        for (role, ids) in ROLES.iter().zip([&r.train_ids, &r.validation_ids, &r.test_ids, &r.example_ids, &r.long_ids]) {
            for id in ids {
                out.push_str(&format!("{}\t{role}\t{id}\n", r.rotation));
            }
        }
    }
    for w in run.warnings() {
        out.push_str(&format!("# warning: {w}\n"));
    }
    out
}

/// Rotation membership read back from [`rotations_tsv`] output.
pub fn parse_rotations(text: &str) -> Result<Vec<RotationReport>> {
    let mut reports: Vec<RotationReport> = Vec::new();
    let mut members = false;
    for (idx, line) in text.lines().enumerate() {
        let perr = |msg: String| Error::Parse { line: idx + 1, msg };
        if line == "# members" {
            members = true;
            continue;
        }
        if line.is_empty() || line.starts_with('#') || line == ROTATIONS_HEADER || line == MEMBERS_HEADER {
            continue;
        }
        let f: Vec<&str> = line.split('\t').collect();
        if f.len() != 3 {
            return Err(perr(format!("expected 3 fields, got {}", f.len())));
        }
        let rot: usize = f[0].parse().map_err(|_| perr(format!("bad rotation {:?}", f[0])))?;
        if !members {
            let validation_qwk = if f[2].is_empty() {
                Vec::new()
            } else {
                f[2].split(',')
                    .map(|v| v.parse::<f64>().map_err(|_| perr(format!("bad qwk {v:?}"))))
                    .collect::<Result<_>>()?
            };
            reports.push(RotationReport {
                rotation: rot,
                best_epoch: f[1].parse().map_err(|_| perr(format!("bad epoch {:?}", f[1])))?,
                validation_qwk,
                train_ids: Vec::new(),
                validation_ids: Vec::new(),
                test_ids: Vec::new(),
                example_ids: Vec::new(),
                long_ids: Vec::new(),
                warnings: Vec::new(),
            });
            continue;
        }
        let r = reports
            .iter_mut()
            .find(|r| r.rotation == rot)
            .ok_or_else(|| perr(format!("members of undeclared rotation {rot}")))?;
        let list = match f[1] {
            "train" => &mut r.train_ids,
            "validation" => &mut r.validation_ids,
            "test" => &mut r.test_ids,
            "example" => &mut r.example_ids,
            "long" => &mut r.long_ids,
            other => return Err(perr(format!("unknown role {other:?}"))),
        };
        list.push(f[2].to_string());
    }
    Ok(reports)
}

/// `(rotation, record_id)` pairs whose record is in the rotation's test fold
/// and also in its training data or context examples.
pub fn leakage(rotations: &[RotationReport]) -> Vec<(usize, String)> {
    let mut out = Vec::new();
    for r in rotations {
        let seen: BTreeSet<&String> = r.train_ids.iter().chain(&r.example_ids).collect();
        out.extend(r.test_ids.iter().filter(|id| seen.contains(id)).map(|id| (r.rotation, id.clone())));
    }
    out
}

//! CSV readers and writers. Floats are written at 12 significant digits.

use std::io::Write;
use std::path::Path;

use molrate_core::analysis::BoundResult;
use molrate_core::transmitter::LevelTable;
use molrate_core::MemoryState;

use crate::error::{Error, Result};
use crate::experiment::SweepRow;
use crate::sim::TraceRow;

/// `x` rounded to 12 significant digits, in the shortest form that reads back exactly.
pub fn fmt12(x: f64) -> String {
    if !x.is_finite() {
        return x.to_string();
    }
    let rounded: f64 = format!("{x:.11e}").parse().expect("formatted float");
    format!("{rounded}")
}

fn bit(b: bool) -> &'static str {
    if b {
        "1"
    } else {
        "0"
    }
}

fn format_err(path: &Path, reason: impl Into<String>) -> Error {
    Error::Format {
        path: path.display().to_string(),
        reason: reason.into(),
    }
}

fn parse_f64(path: &Path, field: &str) -> Result<f64> {
    field
        .trim()
        .parse()
        .map_err(|_| format_err(path, format!("not a number: `{field}`")))
}

pub fn write_pi<W: Write>(out: W, pi: &[f64]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["lag", "pi"])?;
    for (k, p) in pi.iter().enumerate() {
        w.write_record([k.to_string(), fmt12(*p)])?;
    }
    w.flush()?;
    Ok(())
}

/// Reads `lag,pi` rows; lags must run 0, 1, 2, ...
pub fn read_pi(path: &Path) -> Result<Vec<f64>> {
    let mut r = csv::Reader::from_path(path)?;
    let mut pi = Vec::new();
    for (k, rec) in r.records().enumerate() {
        let rec = rec?;
        if rec.len() != 2 || rec[0].trim() != k.to_string() {
            return Err(format_err(path, format!("row {k} should be `{k},<pi>`")));
        }
        pi.push(parse_f64(path, &rec[1])?);
    }
    if pi.is_empty() {
        return Err(format_err(path, "no hitting probabilities"));
    }
    Ok(pi)
}

/// `state,level,clamped,target_c`; states are labelled most recent bit first.
pub fn write_levels<W: Write>(out: W, table: &LevelTable) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["state", "level", "clamped", "target_c"])?;
    for (s, (&level, &clamped)) in table.levels().iter().zip(table.clamped()).enumerate() {
        let label = MemoryState::from_index(table.memory_bits(), s as u32)?.label();
        w.write_record([
            label,
            fmt12(level),
            bit(clamped).to_string(),
            fmt12(table.target_c()),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_levels(path: &Path) -> Result<LevelTable> {
    let mut r = csv::Reader::from_path(path)?;
    let mut rows: Vec<(MemoryState, f64, bool, f64)> = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        if rec.len() != 4 {
            return Err(format_err(path, "expected state,level,clamped,target_c"));
        }
        let state = MemoryState::parse(rec[0].trim())?;
        let clamped = match rec[2].trim() {
            "0" => false,
            "1" => true,
            other => {
                return Err(format_err(
                    path,
                    format!("clamped must be 0 or 1, got `{other}`"),
                ))
            }
        };
        rows.push((
            state,
            parse_f64(path, &rec[1])?,
            clamped,
            parse_f64(path, &rec[3])?,
        ));
    }
    let first = rows
        .first()
        .ok_or_else(|| format_err(path, "empty level table"))?;
    let (bits, target_c) = (first.0.memory_bits(), first.3);
    let n = 1usize << bits;
    if rows.len() != n {
        return Err(format_err(
            path,
            format!("{} rows for {bits} memory bits", rows.len()),
        ));
    }
    let mut levels = vec![f64::NAN; n];
    let mut clamped = vec![false; n];
    for (state, level, c, _) in rows {
        if state.memory_bits() != bits || !levels[state.index() as usize].is_nan() {
            return Err(format_err(
                path,
                format!("state `{}` repeated or of the wrong length", state.label()),
            ));
        }
        levels[state.index() as usize] = level;
        clamped[state.index() as usize] = c;
    }
    Ok(LevelTable::from_parts(bits, levels, clamped, target_c)?)
}

pub fn write_trace<W: Write>(out: W, rows: &[TraceRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "slot",
        "bit",
        "rate",
        "interference",
        "received",
        "decoded",
        "error",
    ])?;
    for r in rows {
        w.write_record([
            r.slot.to_string(),
            bit(r.bit).to_string(),
            fmt12(r.rate),
            fmt12(r.interference),
            r.received.to_string(),
            bit(r.decoded).to_string(),
            bit(r.error).to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_sweep<W: Write>(out: W, rows: &[SweepRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["axis_value", "trials", "errors", "ber", "ci95"])?;
    for r in rows {
        let e = &r.estimate;
        w.write_record([
            fmt12(r.axis_value),
            e.trials.to_string(),
            e.errors.to_string(),
            fmt12(e.ber),
            fmt12(e.ci95),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_bounds<W: Write>(out: W, rows: &[BoundResult]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "r",
        "T",
        "theta",
        "A",
        "B",
        "bound",
        "r_above_theta",
        "threshold_ok",
    ])?;
    for b in rows {
        w.write_record([
            fmt12(b.r),
            b.threshold.to_string(),
            fmt12(b.theta),
            fmt12(b.a),
            fmt12(b.b),
            fmt12(b.value),
            bit(b.r_above_theta).to_string(),
            bit(b.threshold_ok).to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

//! Per-epoch metrics rows and their CSV form.
//!
//! The file format is pinned: header `epoch,train_loss,test_loss,
//! test_accuracy,wall_ms`, reals at 6 significant digits, `wall_ms` as an
//! integer, LF line endings, non-finite values as `nan` / `inf` / `-inf`.

use std::fs;
use std::path::Path;

use super::HarnessError;

pub const METRICS_HEADER: &str = "epoch,train_loss,test_loss,test_accuracy,wall_ms";

/// One epoch of a run.
#[derive(Clone, Debug, PartialEq)]
pub struct MetricsRow {
    pub epoch: usize,
    pub train_loss: f64,
    pub test_loss: f64,
    pub test_accuracy: f64,
    pub wall_ms: u64,
}

/// Format `x` with `sig` significant digits, `printf %g` style: fixed
/// notation in the mid range, scientific outside it, trailing zeros
/// stripped. Non-finite values become `nan` / `inf` / `-inf`.
pub fn format_sig(x: f64, sig: usize) -> String {
    assert!(sig >= 1);
    if x.is_nan() {
        return "nan".to_string();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf" } else { "-inf" }.to_string();
    }
    if x == 0.0 {
        return "0".to_string();
    }

    // Let the standard formatter do the rounding, then re-layout.
    let sci = format!("{:.*e}", sig - 1, x);
    let (mantissa, exp) = sci.split_once('e').expect("LowerExp always emits e");
    let exp: i32 = exp.parse().expect("exponent is an integer");
    let neg = mantissa.starts_with('-');
    let digits: String = mantissa.chars().filter(|c| c.is_ascii_digit()).collect();

    let mut out = String::new();
    if neg {
        out.push('-');
    }
    if exp < -4 || exp >= sig as i32 {
        let trimmed = digits.trim_end_matches('0');
        out.push_str(&trimmed[..1]);
        if trimmed.len() > 1 {
            out.push('.');
            out.push_str(&trimmed[1..]);
        }
        out.push('e');
        out.push_str(&exp.to_string());
    } else if exp >= 0 {
        let split = exp as usize + 1;
        out.push_str(&digits[..split]);
        let frac = digits[split..].trim_end_matches('0');
        if !frac.is_empty() {
            out.push('.');
            out.push_str(frac);
        }
    } else {
        out.push_str("0.");
        for _ in 0..(-exp - 1) {
            out.push('0');
        }
        out.push_str(digits.trim_end_matches('0'));
    }
    out
}

/// Render rows to the pinned CSV byte format.
pub fn metrics_to_csv(rows: &[MetricsRow]) -> String {
    let mut out = String::with_capacity(32 * (rows.len() + 1));
    out.push_str(METRICS_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&r.epoch.to_string());
        out.push(',');
        out.push_str(&format_sig(r.train_loss, 6));
        out.push(',');
        out.push_str(&format_sig(r.test_loss, 6));
        out.push(',');
        out.push_str(&format_sig(r.test_accuracy, 6));
        out.push(',');
        out.push_str(&r.wall_ms.to_string());
        out.push('\n');
    }
    out
}

pub fn write_metrics_csv(rows: &[MetricsRow], path: &Path) -> Result<(), HarnessError> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent)?;
        }
    }
    fs::write(path, metrics_to_csv(rows))?;
    Ok(())
}

pub fn read_metrics_csv(path: &Path) -> Result<Vec<MetricsRow>, HarnessError> {
    let text = fs::read_to_string(path)?;
    parse_metrics_csv(&text)
}

pub fn parse_metrics_csv(text: &str) -> Result<Vec<MetricsRow>, HarnessError> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h == METRICS_HEADER => {}
        other => {
            return Err(HarnessError::MalformedCsv(format!(
                "bad header {other:?}, expected {METRICS_HEADER:?}"
            )))
        }
    }
    let mut rows = Vec::new();
    let mut last_epoch = 0usize;
    for (lineno, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 5 {
            return Err(HarnessError::MalformedCsv(format!(
                "line {}: expected 5 fields, got {}",
                lineno + 2,
                fields.len()
            )));
        }
        let bad = |what: &str| {
            HarnessError::MalformedCsv(format!("line {}: bad {what}", lineno + 2))
        };
        let row = MetricsRow {
            epoch: fields[0].parse().map_err(|_| bad("epoch"))?,
            train_loss: fields[1].parse().map_err(|_| bad("train_loss"))?,
            test_loss: fields[2].parse().map_err(|_| bad("test_loss"))?,
            test_accuracy: fields[3].parse().map_err(|_| bad("test_accuracy"))?,
            wall_ms: fields[4].parse().map_err(|_| bad("wall_ms"))?,
        };
        if row.epoch <= last_epoch && !rows.is_empty() {
            return Err(HarnessError::MalformedCsv(format!(
                "line {}: epoch {} not increasing",
                lineno + 2,
                row.epoch
            )));
        }
        last_epoch = row.epoch;
        rows.push(row);
    }
    Ok(rows)
}

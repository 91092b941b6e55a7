//! Trace and result file formats.
//!
//! Trace CSV: header `time_us,signal`, one row per sample, LF line endings,
//! 17 significant digits (exact f64 round trip). Trace JSON mirrors the full
//! [`RabiTrace`] including its metadata. Sweep CSV: `theta_deg,fidelity` or
//! `theta_deg,fidelity,sign` in both-signs mode.

use std::io::{BufRead, Write};

use crate::analysis::{PerturbationMode, SweepResult};
use crate::error::{Error, Result};
use crate::rabi::RabiTrace;
use crate::scalar::RealScalar;

/// Formats a scalar with enough digits for an exact f64 round trip.
pub fn format_float<T: RealScalar>(x: T) -> String {
    format!("{:.16e}", x.to_f64().expect("scalar fits f64"))
}

pub fn write_trace_csv<T: RealScalar>(w: &mut impl Write, trace: &RabiTrace<T>) -> Result<()> {
    w.write_all(b"time_us,signal\n")?;
    for (&t, &s) in trace.times_us.iter().zip(&trace.signal) {
        writeln!(w, "{},{}", format_float(t), format_float(s))?;
    }
    Ok(())
}

/// Reads a `(times, signal)` pair from trace CSV.
pub fn read_trace_csv<T: RealScalar>(r: impl BufRead) -> Result<(Vec<T>, Vec<T>)> {
    let mut lines = r.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Parse("empty trace file".into()))??;
    if header.trim() != "time_us,signal" {
        return Err(Error::Parse(format!(
            "expected header 'time_us,signal', got '{}'",
            header.trim()
        )));
    }
    let mut times = Vec::new();
    let mut signal = Vec::new();
    for (lineno, line) in lines.enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let mut cells = line.split(',');
        let (t, s) = match (cells.next(), cells.next(), cells.next()) {
            (Some(t), Some(s), None) => (t, s),
            _ => {
                return Err(Error::Parse(format!(
                    "line {}: expected two comma-separated values",
                    lineno + 2
                )))
            }
        };
        times.push(parse_scalar(t, lineno + 2)?);
        signal.push(parse_scalar(s, lineno + 2)?);
    }
    if times.is_empty() {
        return Err(Error::Parse("trace file has no samples".into()));
    }
    Ok((times, signal))
}

fn parse_scalar<T: RealScalar>(cell: &str, lineno: usize) -> Result<T> {
    let v: f64 = cell
        .trim()
        .parse()
        .map_err(|e| Error::Parse(format!("line {lineno}: bad number '{cell}': {e}")))?;
    Ok(T::from_f(v))
}

pub fn write_sweep_csv<T: RealScalar>(w: &mut impl Write, sweep: &SweepResult<T>) -> Result<()> {
    match sweep.spec.mode {
        PerturbationMode::WorstCaseSign => {
            w.write_all(b"theta_deg,fidelity\n")?;
            for p in &sweep.points {
                writeln!(w, "{},{}", format_float(p.theta_deg), format_float(p.worst()))?;
            }
        }
        PerturbationMode::BothSigns => {
            w.write_all(b"theta_deg,fidelity,sign\n")?;
            for p in &sweep.points {
                writeln!(
                    w,
                    "{},{},+",
                    format_float(p.theta_deg),
                    format_float(p.fidelity_plus)
                )?;
                writeln!(
                    w,
                    "{},{},-",
                    format_float(p.theta_deg),
                    format_float(p.fidelity_minus)
                )?;
            }
        }
    }
    Ok(())
}

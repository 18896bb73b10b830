// Copyright 2026 The lvgrape Authors
// SPDX-License-Identifier: Apache-2.0

//! Pulse files.
//!
//! ```text
//! t_s,cx_rad_s,cy_rad_s,cz_rad_s
//! 0.0000000000000000e0,...
//! ```
//!
//! One row per slice, `t_s` is the slice start `n * dt`. Every number is
//! written with 17 significant digits, which round-trips `f64` exactly.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use lvgrape::ControlPulse;

use crate::error::{io, CliError, CliResult};

pub const PULSE_HEADER: [&str; 4] = ["t_s", "cx_rad_s", "cy_rad_s", "cz_rad_s"];

pub(crate) fn fmt17(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn write_pulse_to<W: Write>(pulse: &ControlPulse, out: W) -> CliResult<()> {
    let mut w = csv::Writer::from_writer(out);
    let err = |e: csv::Error| CliError::Io(e.to_string());
    w.write_record(PULSE_HEADER).map_err(err)?;
    for (n, c) in pulse.amplitudes().iter().enumerate() {
        let t = n as f64 * pulse.dt();
        w.write_record([fmt17(t), fmt17(c[0]), fmt17(c[1]), fmt17(c[2])])
            .map_err(err)?;
    }
    w.flush().map_err(|e| CliError::Io(e.to_string()))
}

pub fn write_pulse(pulse: &ControlPulse, path: &Path) -> CliResult<()> {
    let file = File::create(path).map_err(|e| io(path, e))?;
    write_pulse_to(pulse, BufWriter::new(file)).map_err(|e| match e {
        CliError::Io(m) => CliError::Io(format!("{}: {m}", path.display())),
        other => other,
    })
}

/// Parses a pulse file. The slice length comes from the second time stamp;
/// a single-slice file needs `dt`. When both are present they must agree.
pub fn read_pulse_from<R: Read>(input: R, dt: Option<f64>) -> CliResult<ControlPulse> {
    let bad = |msg: String| CliError::Config(format!("pulse file: {msg}"));
    let mut r = csv::ReaderBuilder::new().flexible(true).from_reader(input);
    let header = r.headers().map_err(|e| bad(e.to_string()))?;
    if header.iter().map(str::trim).ne(PULSE_HEADER) {
        return Err(bad(format!("header must be `{}`", PULSE_HEADER.join(","))));
    }
    let mut times = Vec::new();
    let mut amps = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| bad(e.to_string()))?;
        let line = i + 2;
        if rec.len() != 4 {
            return Err(bad(format!(
                "line {line}: expected 4 fields, found {}",
                rec.len()
            )));
        }
        let mut v = [0.0; 4];
        for (slot, field) in v.iter_mut().zip(rec.iter()) {
            *slot = field
                .trim()
                .parse::<f64>()
                .map_err(|e| bad(format!("line {line}: `{field}`: {e}")))?;
        }
        times.push(v[0]);
        amps.push([v[1], v[2], v[3]]);
    }
    if amps.is_empty() {
        return Err(bad("no slices".into()));
    }
    let inferred = times.get(1).map(|t1| t1 - times[0]);
    let step = match (inferred, dt) {
        (Some(a), Some(b)) if !close(a, b) => {
            return Err(bad(format!(
                "time step {a:e} s disagrees with dt = {b:e} s"
            )))
        }
        (_, Some(b)) => b,
        (Some(a), None) => a,
        (None, None) => return Err(bad("a single-slice file needs an explicit dt".into())),
    };
    for (n, &t) in times.iter().enumerate() {
        if !close(t, n as f64 * step) {
            return Err(bad(format!(
                "line {}: time {t:e} s is not {n} * {step:e} s",
                n + 2
            )));
        }
    }
    Ok(ControlPulse::new(amps, step)?)
}

pub fn read_pulse(path: &Path, dt: Option<f64>) -> CliResult<ControlPulse> {
    let file = File::open(path).map_err(|e| io(path, e))?;
    read_pulse_from(file, dt).map_err(|e| match e {
        CliError::Config(m) => CliError::Config(format!("{}: {m}", path.display())),
        other => other,
    })
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12 * a.abs().max(b.abs())
}

#[cfg(test)]
mod tests {
    use super::*;
    use lvgrape::random_pulse;

    fn to_bytes(p: &ControlPulse) -> Vec<u8> {
        let mut buf = Vec::new();
        write_pulse_to(p, &mut buf).unwrap();
        buf
    }

    #[test]
    fn round_trip_is_exact() {
        let p = random_pulse(9, 6283.185307179586, 3, 7.8125e-6).unwrap();
        let bytes = to_bytes(&p);
        let back = read_pulse_from(bytes.as_slice(), None).unwrap();
        assert_eq!(back, p);
        assert_eq!(to_bytes(&back), bytes);
        let text = String::from_utf8(bytes).unwrap();
        assert!(text.starts_with("t_s,cx_rad_s,cy_rad_s,cz_rad_s\n"));
        assert_eq!(text.lines().count(), 10);
    }

    #[test]
    fn awkward_values_survive() {
        let p = ControlPulse::new(
            vec![[-0.0, 1e-300, f64::MAX], [0.1, -2.5e7, 1.0 / 3.0]],
            1.0 / 7.0,
        )
        .unwrap();
        let bytes = to_bytes(&p);
        let back = read_pulse_from(bytes.as_slice(), None).unwrap();
        assert_eq!(to_bytes(&back), bytes);
        assert_eq!(back.dt(), p.dt());
    }

    #[test]
    fn single_slice_needs_dt() {
        let p = ControlPulse::new(vec![[1.0, 2.0, 3.0]], 1e-5).unwrap();
        let bytes = to_bytes(&p);
        assert!(read_pulse_from(bytes.as_slice(), None).is_err());
        assert_eq!(read_pulse_from(bytes.as_slice(), Some(1e-5)).unwrap(), p);
    }

    #[test]
    fn malformed_files_are_rejected() {
        let cases = [
            "t,cx,cy,cz\n0,1,2,3\n",
            "t_s,cx_rad_s,cy_rad_s,cz_rad_s\n",
            "t_s,cx_rad_s,cy_rad_s,cz_rad_s\n0,1,2,3\n1e-5,1,2\n",
            "t_s,cx_rad_s,cy_rad_s,cz_rad_s\n0,1,2,3\n1e-5,1,2,x\n",
            "t_s,cx_rad_s,cy_rad_s,cz_rad_s\n0,1,2,3\n1e-5,1,2,3\n3e-5,1,2,3\n",
        ];
        for c in cases {
            assert!(read_pulse_from(c.as_bytes(), None).is_err(), "{c}");
        }
        let ok = "t_s,cx_rad_s,cy_rad_s,cz_rad_s\n0,1,2,3\n1e-5,1,2,3\n";
        assert!(read_pulse_from(ok.as_bytes(), Some(2e-5)).is_err());
        assert_eq!(read_pulse_from(ok.as_bytes(), None).unwrap().dt(), 1e-5);
    }
}

//! Stable text formats. Every CSV starts with `#` comment lines naming the
//! tool version and the config hash; JSON outputs carry the same fields.
//! Floats are written with 17 significant digits and read back bit-exactly.

use std::io::{self, BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::harness::{ConvergenceTable, PropertyReport};
use crate::hjsolver::GridFunction;
use crate::integrator::{EventRecord, Trajectory};
use crate::levelset::StepFunction;
use crate::measures::SignedAtomicMeasure;
use crate::particles::ParticleState;

#[derive(Debug, thiserror::Error)]
pub enum FormatError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutputHeader {
    pub tool: String,
    pub version: String,
    pub config_hash: String,
}

impl OutputHeader {
    pub fn new(config_hash: impl Into<String>) -> Self {
        OutputHeader { tool: "annihilate".into(), version: env!("CARGO_PKG_VERSION").into(), config_hash: config_hash.into() }
    }

    fn write_comment(&self, w: &mut dyn Write) -> io::Result<()> {
        writeln!(w, "# {} {}", self.tool, self.version)?;
        writeln!(w, "# config_sha256 {}", self.config_hash)
    }
}

/// 17 significant digits, enough to round-trip any `f64`.
pub fn fmt_f64(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else if x.is_nan() {
        "nan".into()
    } else if x > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

fn parse_f64(s: &str, line: usize) -> Result<f64, FormatError> {
    s.trim().parse().map_err(|_| FormatError::Parse { line, message: format!("bad number {s:?}") })
}

/// Columns `t, x_1..x_n, b_1..b_n`, one row per sample. The coupling goes in
/// a comment line because it is constant.
pub fn write_trajectory_csv(w: &mut dyn Write, header: &OutputHeader, samples: &[ParticleState]) -> io::Result<()> {
    header.write_comment(w)?;
    let n = samples.first().map_or(0, |s| s.n());
    let coupling = samples.first().map_or(f64::NAN, |s| s.coupling());
    writeln!(w, "# coupling {}", fmt_f64(coupling))?;
    let mut cols = vec!["t".to_string()];
    cols.extend((1..=n).map(|i| format!("x_{i}")));
    cols.extend((1..=n).map(|i| format!("b_{i}")));
    writeln!(w, "{}", cols.join(","))?;
    for s in samples {
        let mut row = vec![fmt_f64(s.time())];
        row.extend(s.positions().iter().map(|&x| fmt_f64(x)));
        row.extend(s.charges().iter().map(|b| b.to_string()));
        writeln!(w, "{}", row.join(","))?;
    }
    Ok(())
}

/// Reads what [`write_trajectory_csv`] wrote.
pub fn read_trajectory_csv(r: &mut dyn BufRead) -> Result<Vec<ParticleState>, FormatError> {
    let mut coupling = None;
    let mut n = None;
    let mut out = Vec::new();
    for (k, line) in r.lines().enumerate() {
        let line = line?;
        let lineno = k + 1;
        if let Some(c) = line.strip_prefix('#') {
            if let Some(v) = c.trim().strip_prefix("coupling ") {
                coupling = Some(parse_f64(v, lineno)?);
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        let Some(width) = n else {
            if fields.first() != Some(&"t") || fields.len().is_multiple_of(2) {
                return Err(FormatError::Parse { line: lineno, message: "expected column header t,x_..,b_..".into() });
            }
            n = Some((fields.len() - 1) / 2);
            continue;
        };
        if fields.len() != 2 * width + 1 {
            return Err(FormatError::Parse { line: lineno, message: format!("expected {} fields", 2 * width + 1) });
        }
        let t = parse_f64(fields[0], lineno)?;
        let x = fields[1..=width].iter().map(|f| parse_f64(f, lineno)).collect::<Result<Vec<_>, _>>()?;
        let b = fields[width + 1..]
            .iter()
            .map(|f| f.trim().parse::<i8>().map_err(|_| FormatError::Parse { line: lineno, message: format!("bad charge {f:?}") }))
            .collect::<Result<Vec<_>, _>>()?;
        let c = coupling.ok_or(FormatError::Parse { line: lineno, message: "missing coupling line".into() })?;
        let s = ParticleState::with_coupling(x, b, c)
            .map_err(|e| FormatError::Parse { line: lineno, message: e.to_string() })?
            .at_time(t);
        out.push(s);
    }
    Ok(out)
}

/// First line is the header object, then one event per line.
pub fn write_events_jsonl(w: &mut dyn Write, header: &OutputHeader, events: &[EventRecord]) -> Result<(), FormatError> {
    writeln!(w, "{}", serde_json::to_string(header)?)?;
    for e in events {
        writeln!(w, "{}", serde_json::to_string(e)?)?;
    }
    Ok(())
}

pub fn read_events_jsonl(r: &mut dyn BufRead) -> Result<(OutputHeader, Vec<EventRecord>), FormatError> {
    let mut lines = r.lines();
    let first = lines.next().ok_or(FormatError::Parse { line: 1, message: "empty event log".into() })??;
    let header = serde_json::from_str(&first)?;
    let mut events = Vec::new();
    for line in lines {
        let line = line?;
        if !line.trim().is_empty() {
            events.push(serde_json::from_str(&line)?);
        }
    }
    Ok((header, events))
}

pub fn write_trajectory(
    csv: &mut dyn Write,
    events: &mut dyn Write,
    header: &OutputHeader,
    traj: &Trajectory,
) -> Result<(), FormatError> {
    write_trajectory_csv(csv, header, &traj.samples)?;
    write_events_jsonl(events, header, &traj.events)
}

/// Columns `x, count, value`: jump location, signed jump in units of `eps`,
/// and the value just right of the jump.
pub fn write_step_function_csv(w: &mut dyn Write, header: &OutputHeader, u: &StepFunction) -> io::Result<()> {
    header.write_comment(w)?;
    writeln!(w, "# base {}", fmt_f64(u.base()))?;
    writeln!(w, "# eps {}", fmt_f64(u.eps()))?;
    writeln!(w, "x,count,value")?;
    for (&x, &c) in u.locations().iter().zip(u.counts()) {
        writeln!(w, "{},{},{}", fmt_f64(x), c, fmt_f64(u.eval(x)))?;
    }
    Ok(())
}

/// Columns `x, u`; the two tail values go in comment lines.
pub fn write_grid_csv(w: &mut dyn Write, header: &OutputHeader, g: &GridFunction) -> io::Result<()> {
    header.write_comment(w)?;
    writeln!(w, "# t {}", fmt_f64(g.time()))?;
    writeln!(w, "# tails {} {}", fmt_f64(g.tails().0), fmt_f64(g.tails().1))?;
    writeln!(w, "x,u")?;
    for (i, &u) in g.values().iter().enumerate() {
        writeln!(w, "{},{}", fmt_f64(g.x(i)), fmt_f64(u))?;
    }
    Ok(())
}

/// Columns `x, count, weight`.
pub fn write_measure_csv(w: &mut dyn Write, header: &OutputHeader, mu: &SignedAtomicMeasure) -> io::Result<()> {
    header.write_comment(w)?;
    writeln!(w, "# unit {}", fmt_f64(mu.unit()))?;
    writeln!(w, "x,count,weight")?;
    for &(x, c) in mu.atoms() {
        writeln!(w, "{},{},{}", fmt_f64(x), c, fmt_f64(c as f64 * mu.unit()))?;
    }
    Ok(())
}

/// Columns `n, e_n, events, runtime_s`; failed rows have an empty `e_n`.
pub fn write_convergence_csv(w: &mut dyn Write, header: &OutputHeader, table: &ConvergenceTable) -> io::Result<()> {
    header.write_comment(w)?;
    writeln!(w, "# datum {}", serde_json::to_string(&table.datum).unwrap_or_default().trim_matches('"'))?;
    writeln!(w, "# reference {}", table.reference)?;
    writeln!(w, "n,e_n,events,runtime_s")?;
    for r in &table.rows {
        let e = if r.error.is_some() { String::new() } else { fmt_f64(r.e_n) };
        writeln!(w, "{},{},{},{}", r.n, e, r.events, fmt_f64(r.runtime_s))?;
    }
    Ok(())
}

#[derive(Serialize)]
struct WithHeader<'a, T: Serialize> {
    header: &'a OutputHeader,
    #[serde(flatten)]
    body: &'a T,
}

/// Pretty JSON object holding `header` next to the body's own fields.
pub fn write_json<T: Serialize>(w: &mut dyn Write, header: &OutputHeader, body: &T) -> Result<(), FormatError> {
    serde_json::to_writer_pretty(&mut *w, &WithHeader { header, body })?;
    writeln!(w)?;
    Ok(())
}

pub fn write_properties_json(w: &mut dyn Write, header: &OutputHeader, report: &PropertyReport) -> Result<(), FormatError> {
    write_json(w, header, report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn header() -> OutputHeader {
        OutputHeader::new("00ff")
    }

    #[test]
    fn formatting_keeps_every_bit() {
        for x in [0.1, 1.0 / 3.0, -2.5e-300, f64::MIN_POSITIVE, 1e308, 0.0, -0.0] {
            assert_eq!(fmt_f64(x).parse::<f64>().unwrap().to_bits(), x.to_bits());
        }
    }

    #[test]
    fn events_round_trip() {
        let e = EventRecord { tau: 0.5, y: 1.0 / 3.0, cluster: vec![2, 3, 4], pre_charges: vec![1, -1, 1], post_charges: vec![0, 0, 1] };
        let mut buf = Vec::new();
        write_events_jsonl(&mut buf, &header(), std::slice::from_ref(&e)).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.lines().nth(1).unwrap().contains("\"pre\":[1,-1,1]"));
        let (h, back) = read_events_jsonl(&mut buf.as_slice()).unwrap();
        assert_eq!(h, header());
        assert_eq!(back, vec![e]);
    }

    #[test]
    fn convergence_csv_layout() {
        let table = ConvergenceTable {
            datum: crate::harness::InitialDatum::Sigmoid,
            reference: "grid".into(),
            rows: vec![crate::harness::ConvergenceRow {
                n: 8,
                e_n: 0.125,
                events: 0,
                runtime_s: 0.5,
                particles: 8,
                crossing_error: None,
                error: None,
            }],
            monotone: true,
            reduction: 1.0,
        };
        let mut buf = Vec::new();
        write_convergence_csv(&mut buf, &header(), &table).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let data: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
        assert_eq!(data, ["n,e_n,events,runtime_s", "8,1.2500000000000000e-1,0,5.0000000000000000e-1"]);
    }

    #[test]
    fn malformed_trajectory_is_reported_with_line() {
        let text = "# coupling 5e-1\nt,x_1,b_1\n0,abc,1\n";
        match read_trajectory_csv(&mut text.as_bytes()) {
            Err(FormatError::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
    }

    proptest! {
        #[test]
        fn trajectory_round_trip(xs in proptest::collection::vec(-1e3f64..1e3, 2..8), t in 0.0f64..10.0) {
            let mut xs = xs;
            xs.sort_by(f64::total_cmp);
            xs.dedup();
            prop_assume!(xs.len() >= 2);
            let b: Vec<i8> = (0..xs.len()).map(|i| if i % 3 == 2 { 0 } else if i % 2 == 0 { 1 } else { -1 }).collect();
            let s = ParticleState::new(xs, b).unwrap();
            let samples = vec![s.clone(), s.with_positions(s.positions().iter().map(|x| x * 1.1).collect(), t)];
            let mut buf = Vec::new();
            write_trajectory_csv(&mut buf, &header(), &samples).unwrap();
            let back = read_trajectory_csv(&mut buf.as_slice()).unwrap();
            prop_assert_eq!(back, samples);
        }
    }
}

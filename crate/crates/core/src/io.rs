//! File formats: count tracks and scan outputs.
//!
//! Tracks are plain CSV with header `position,count1,count2` and optional
//! `exposure1,exposure2` columns (missing exposures default to 1). Rows may
//! arrive in any order; they are sorted on load and duplicate positions are
//! rejected with the offending row number. Posterior tables hold six
//! significant digits; track exposures round-trip exactly.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::CountTrack;
use crate::multires::{IntervalNode, NodeStatus};

/// Read a track from a CSV file.
pub fn read_track<P: AsRef<Path>>(path: P) -> Result<CountTrack> {
    read_track_from(BufReader::new(File::open(path)?))
}

/// Read a track from any buffered reader.
pub fn read_track_from<R: BufRead>(reader: R) -> Result<CountTrack> {
    let mut lines = reader.lines();
    let header = match lines.next() {
        Some(line) => line?,
        None => return Err(Error::Parse { row: 0, reason: "file is empty, expected a header".into() }),
    };
    let with_exposures = match header.trim_end_matches('\r').trim() {
        "position,count1,count2" => false,
        "position,count1,count2,exposure1,exposure2" => true,
        other => {
            return Err(Error::Parse {
                row: 0,
                reason: format!(
                    "unrecognized header {other:?}, expected \
                     \"position,count1,count2[,exposure1,exposure2]\""
                ),
            })
        }
    };
    let n_cols = if with_exposures { 5 } else { 3 };
    // (position, count1, count2, exposure1, exposure2, source row)
    let mut rows: Vec<(i64, u64, u64, f64, f64, usize)> = Vec::new();
    for (idx, line) in lines.enumerate() {
        let row = idx + 1;
        let line = line?;
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != n_cols {
            return Err(Error::Parse {
                row,
                reason: format!("expected {n_cols} fields, found {}", fields.len()),
            });
        }
        let position: i64 = parse_field(fields[0], "position", row)?;
        let c1: u64 = parse_count(fields[1], "count1", row)?;
        let c2: u64 = parse_count(fields[2], "count2", row)?;
        let (e1, e2) = if with_exposures {
            (parse_exposure(fields[3], "exposure1", row)?, parse_exposure(fields[4], "exposure2", row)?)
        } else {
            (1.0, 1.0)
        };
        rows.push((position, c1, c2, e1, e2, row));
    }
    if rows.is_empty() {
        return Err(Error::Parse { row: 0, reason: "no data rows".into() });
    }
    rows.sort_by_key(|r| r.0);
    for w in rows.windows(2) {
        if w[0].0 == w[1].0 {
            return Err(Error::Parse {
                row: w[1].5,
                reason: format!("duplicate position {} (also at row {})", w[1].0, w[0].5),
            });
        }
    }
    CountTrack::with_exposures(
        rows.iter().map(|r| r.0).collect(),
        rows.iter().map(|r| r.1).collect(),
        rows.iter().map(|r| r.2).collect(),
        rows.iter().map(|r| r.3).collect(),
        rows.iter().map(|r| r.4).collect(),
    )
}

fn parse_field<T: std::str::FromStr>(s: &str, name: &str, row: usize) -> Result<T> {
    s.parse().map_err(|_| Error::Parse { row, reason: format!("bad {name} value {s:?}") })
}

fn parse_count(s: &str, name: &str, row: usize) -> Result<u64> {
    parse_field::<u64>(s, name, row).map_err(|e| {
        if s.starts_with('-') {
            Error::Parse { row, reason: format!("{name} must be a non-negative integer, got {s:?}") }
        } else {
            e
        }
    })
}

fn parse_exposure(s: &str, name: &str, row: usize) -> Result<f64> {
    let v: f64 = parse_field(s, name, row)?;
    if !(v.is_finite() && v > 0.0) {
        return Err(Error::Parse { row, reason: format!("{name} must be positive and finite, got {s:?}") });
    }
    Ok(v)
}

/// Write a track in canonical form: sorted, exposures included only when some
/// differ from 1, floats formatted so they parse back to identical values.
pub fn write_track<P: AsRef<Path>>(path: P, track: &CountTrack) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    let unit = (0..2).all(|g| track.exposures(g).iter().all(|&e| e == 1.0));
    if unit {
        writeln!(w, "position,count1,count2")?;
    } else {
        writeln!(w, "position,count1,count2,exposure1,exposure2")?;
    }
    for i in 0..track.len() {
        if unit {
            writeln!(w, "{},{},{}", track.positions()[i], track.counts(0)[i], track.counts(1)[i])?;
        } else {
            writeln!(
                w,
                "{},{},{},{:e},{:e}",
                track.positions()[i],
                track.counts(0)[i],
                track.counts(1)[i],
                track.exposures(0)[i],
                track.exposures(1)[i],
            )?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Write `position,omega` rows with six significant digits.
pub fn write_omegas<P: AsRef<Path>>(path: P, omegas: &[(i64, f64)]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "position,omega")?;
    for &(p, om) in omegas {
        writeln!(w, "{p},{om:.5e}")?;
    }
    w.flush()?;
    Ok(())
}

/// Per-position table combining the input data with the posterior, ready for
/// plotting.
pub fn write_plotdata<P: AsRef<Path>>(path: P, track: &CountTrack, omegas: &[(i64, f64)]) -> Result<()> {
    if omegas.len() != track.len() {
        return Err(Error::Domain(format!(
            "{} posteriors for {} positions",
            omegas.len(),
            track.len()
        )));
    }
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "position,count1,count2,exposure1,exposure2,omega")?;
    for (i, &(p, om)) in omegas.iter().enumerate() {
        writeln!(
            w,
            "{p},{},{},{:e},{:e},{om:.5e}",
            track.counts(0)[i],
            track.counts(1)[i],
            track.exposures(0)[i],
            track.exposures(1)[i],
        )?;
    }
    w.flush()?;
    Ok(())
}

/// One line of the scan's decision log.
#[derive(Debug, Serialize)]
struct NodeRecord {
    level: usize,
    index: usize,
    span: [f64; 2],
    n_members: usize,
    n_tested: usize,
    aggregated: bool,
    status: &'static str,
    global_null_prob: f64,
    mean_num_clusters: f64,
    seed: u64,
}

impl From<&IntervalNode> for NodeRecord {
    fn from(n: &IntervalNode) -> Self {
        NodeRecord {
            level: n.level,
            index: n.index,
            span: [n.span.0, n.span.1],
            n_members: n.members.len(),
            n_tested: n.n_tested(),
            aggregated: n.aggregated,
            status: match n.status {
                NodeStatus::Pruned => "pruned",
                NodeStatus::Expanded => "expanded",
                NodeStatus::Leaf => "leaf",
            },
            global_null_prob: n.summary.global_null_prob,
            mean_num_clusters: n.summary.mean_num_clusters,
            seed: n.seed,
        }
    }
}

/// Write one JSON object per tested node, in scan order.
pub fn write_decision_log<P: AsRef<Path>>(path: P, nodes: &[IntervalNode]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for node in nodes {
        let record = NodeRecord::from(node);
        let line = serde_json::to_string(&record)
            .map_err(|e| Error::InvalidState(format!("could not serialize node record: {e}")))?;
        writeln!(w, "{line}")?;
    }
    w.flush()?;
    Ok(())
}

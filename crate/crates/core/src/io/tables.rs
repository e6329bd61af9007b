//! CSV tables: labeled datasets, region listings and plot samples.
//!
//! A labeled dataset has one row per point: the features followed by an
//! integer label. A header row is allowed and recognized by a label that
//! is not an integer.

use std::path::Path;

use crate::ddnn::Network;
use crate::error::{Error, Result};
use crate::metrics::LabeledSet;
use crate::regions::{RegionPartition, RegionShape, Segment};

use super::float::fmt_g17;

pub fn parse_labeled_set(text: &str) -> Result<LabeledSet> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut points = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::Parse(format!("labeled set: {e}")))?;
        let line = record.position().map_or(i + 1, |p| p.line() as usize);
        if record.len() < 2 {
            return Err(Error::Parse(format!("labeled set line {line}: need features and a label")));
        }
        let label_field = &record[record.len() - 1];
        let Ok(label) = label_field.parse::<usize>() else {
            if i == 0 {
                continue;
            }
            return Err(Error::Parse(format!("labeled set line {line}: bad label `{label_field}`")));
        };
        let x = record
            .iter()
            .take(record.len() - 1)
            .map(|f| f.parse::<f64>().map_err(|_| Error::Parse(format!("labeled set line {line}: bad number `{f}`"))))
            .collect::<Result<Vec<_>>>()?;
        points.push((x, label));
    }
    LabeledSet::new(points)
}

pub fn load_labeled_set(path: impl AsRef<Path>) -> Result<LabeledSet> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::InvalidInput(format!("cannot read {}: {e}", path.display())))?;
    parse_labeled_set(&text).map_err(|e| match e {
        Error::Parse(m) => Error::Parse(format!("{}: {m}", path.display())),
        other => other,
    })
}

pub fn print_labeled_set(set: &LabeledSet) -> String {
    let mut out = String::new();
    for (x, label) in set.points() {
        for v in x {
            out.push_str(&fmt_g17(*v));
            out.push(',');
        }
        out.push_str(&label.to_string());
        out.push('\n');
    }
    out
}

fn csv_line(fields: impl IntoIterator<Item = String>) -> String {
    let mut s = fields.into_iter().collect::<Vec<_>>().join(",");
    s.push('\n');
    s
}

/// One row per segment piece (`piece,t0,t1,start…,end…,pattern`) or per
/// polygon vertex (`piece,vertex,x…,pattern`).
pub fn print_regions(partition: &RegionPartition) -> String {
    let Some(first) = partition.pieces.first() else {
        return String::new();
    };
    let dim = first.vertices()[0].len();
    let mut out = String::new();
    match first.shape {
        RegionShape::Interval { .. } => {
            let mut header = vec!["piece".to_string(), "t0".into(), "t1".into()];
            header.extend((0..dim).map(|i| format!("start_{i}")));
            header.extend((0..dim).map(|i| format!("end_{i}")));
            header.push("pattern".into());
            out.push_str(&csv_line(header));
        }
        RegionShape::Polygon { .. } => {
            let mut header = vec!["piece".to_string(), "vertex".into()];
            header.extend((0..dim).map(|i| format!("x_{i}")));
            header.push("pattern".into());
            out.push_str(&csv_line(header));
        }
    }
    for (k, piece) in partition.pieces.iter().enumerate() {
        let bits = piece.pattern.to_bits();
        match &piece.shape {
            RegionShape::Interval { t0, t1, start, end } => {
                let mut row = vec![k.to_string(), fmt_g17(*t0), fmt_g17(*t1)];
                row.extend(start.iter().chain(end).map(|v| fmt_g17(*v)));
                row.push(bits);
                out.push_str(&csv_line(row));
            }
            RegionShape::Polygon { vertices, .. } => {
                for (j, v) in vertices.iter().enumerate() {
                    let mut row = vec![k.to_string(), j.to_string()];
                    row.extend(v.iter().map(|c| fmt_g17(*c)));
                    row.push(bits.clone());
                    out.push_str(&csv_line(row));
                }
            }
        }
    }
    out
}

/// `samples` evenly spaced points along `seg` (both ends included) as
/// `t,x…,y…` rows.
pub fn print_plot(net: &dyn Network, seg: &Segment, samples: usize) -> Result<String> {
    if samples < 2 {
        return Err(Error::InvalidInput("plot needs at least 2 samples".into()));
    }
    let mut header = vec!["t".to_string()];
    header.extend((0..net.input_dim()).map(|i| format!("x_{i}")));
    header.extend((0..net.output_dim()).map(|i| format!("y_{i}")));
    let mut out = csv_line(header);
    for i in 0..samples {
        let t = i as f64 / (samples - 1) as f64;
        let x = seg.point_at(t);
        let y = net.eval(&x)?;
        let mut row = vec![fmt_g17(t)];
        row.extend(x.iter().chain(y.iter()).map(|v| fmt_g17(*v)));
        out.push_str(&csv_line(row));
    }
    Ok(out)
}

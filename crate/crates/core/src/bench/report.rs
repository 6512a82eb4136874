//! Summary table and trace CSV files.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::{Read, Write};

use super::evaluate::TraceRecord;
use super::streams::StreamTag;
use crate::error::{BtflError, Result};

pub const SUMMARY_HEADER: [&str; 7] = ["method", "orig_ind", "shift_ind", "orig_exd", "shift_exd", "synthetical", "avg"];

pub const TRACE_HEADER: [&str; 11] = [
    "client_id",
    "stream_tag",
    "sample_idx",
    "true_label",
    "pred_label",
    "e",
    "tau_hat",
    "event",
    "alpha",
    "beta",
    "correct",
];

/// Accuracy of one method on one client's stream, as a fraction.
#[derive(Debug, Clone, PartialEq)]
pub struct StreamAccuracy {
    pub method: String,
    pub client_id: usize,
    pub tag: StreamTag,
    pub accuracy: f64,
}

/// Per-method means across clients, in percent.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub method: String,
    /// In [`StreamTag::ALL`] order.
    pub columns: [f64; 5],
    pub avg: f64,
}

impl SummaryRow {
    pub fn get(&self, tag: StreamTag) -> f64 {
        self.columns[StreamTag::ALL.iter().position(|t| *t == tag).expect("known tag")]
    }
}

/// Builds one row per method, in the order `methods` lists them. Every
/// (method, client, stream) cell must be present exactly once.
pub fn summarize(methods: &[String], n_clients: usize, results: &[StreamAccuracy]) -> Result<Vec<SummaryRow>> {
    let mut grid: BTreeMap<(&str, usize, StreamTag), f64> = BTreeMap::new();
    for r in results {
        if grid.insert((r.method.as_str(), r.client_id, r.tag), r.accuracy).is_some() {
            return Err(BtflError::IncompleteGrid(format!(
                "duplicate cell ({}, client {}, {})",
                r.method, r.client_id, r.tag
            )));
        }
    }
    if n_clients == 0 {
        return Err(BtflError::IncompleteGrid("no clients".into()));
    }
    methods
        .iter()
        .map(|m| {
            let mut columns = [0.0; 5];
            for (j, tag) in StreamTag::ALL.iter().enumerate() {
                let mut sum = 0.0;
                for c in 0..n_clients {
                    sum += grid.get(&(m.as_str(), c, *tag)).ok_or_else(|| {
                        BtflError::IncompleteGrid(format!("missing ({m}, client {c}, {tag})"))
                    })?;
                }
                columns[j] = 100.0 * sum / n_clients as f64;
            }
            let avg = columns.iter().sum::<f64>() / 5.0;
            Ok(SummaryRow {
                method: m.clone(),
                columns,
                avg,
            })
        })
        .collect()
}

/// Nine significant digits.
pub fn fmt_sig9(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    let exp = x.abs().log10().floor() as i32;
    if (-5..9).contains(&exp) {
        let decimals = (8 - exp).max(0) as usize;
        let s = format!("{x:.decimals$}");
        if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s
        }
    } else {
        format!("{x:.8e}")
    }
}

pub fn write_summary_csv<W: Write>(rows: &[SummaryRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(SUMMARY_HEADER)?;
    for r in rows {
        let mut rec = vec![r.method.clone()];
        rec.extend(r.columns.iter().chain(std::iter::once(&r.avg)).map(|x| fmt_sig9(*x)));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_summary_csv<R: Read>(input: R) -> Result<Vec<SummaryRow>> {
    let mut r = csv::Reader::from_reader(input);
    let header: Vec<String> = r.headers()?.iter().map(|h| h.trim().to_string()).collect();
    if header != SUMMARY_HEADER {
        return Err(BtflError::Parse(format!("unexpected summary header {header:?}")));
    }
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let num = |i: usize| -> Result<f64> {
            rec.get(i)
                .and_then(|s| s.trim().parse().ok())
                .ok_or_else(|| BtflError::Parse(format!("bad number in column {}", SUMMARY_HEADER[i])))
        };
        rows.push(SummaryRow {
            method: rec.get(0).unwrap_or_default().trim().to_string(),
            columns: [num(1)?, num(2)?, num(3)?, num(4)?, num(5)?],
            avg: num(6)?,
        });
    }
    Ok(rows)
}

/// Right-aligned table with two decimals.
pub fn format_table(rows: &[SummaryRow]) -> String {
    let width = rows.iter().map(|r| r.method.len()).chain([6]).max().unwrap_or(6);
    let mut s = format!("{:<width$}", "method");
    for h in &SUMMARY_HEADER[1..] {
        let _ = write!(s, "  {h:>11}");
    }
    s.push('\n');
    for r in rows {
        let _ = write!(s, "{:<width$}", r.method);
        for x in r.columns.iter().chain(std::iter::once(&r.avg)) {
            let _ = write!(s, "  {x:>11.2}");
        }
        s.push('\n');
    }
    s
}

fn opt(x: Option<f64>) -> String {
    x.map(fmt_sig9).unwrap_or_default()
}

pub fn write_trace_csv<'a, W, I>(records: I, out: W) -> Result<()>
where
    W: Write,
    I: IntoIterator<Item = &'a TraceRecord>,
{
    let mut w = csv::Writer::from_writer(out);
    w.write_record(TRACE_HEADER)?;
    for r in records {
        w.write_record([
            r.client_id.to_string(),
            r.stream_tag.to_string(),
            r.sample_idx.to_string(),
            r.true_label.to_string(),
            r.pred_label.to_string(),
            fmt_sig9(r.e),
            opt(r.tau_hat),
            r.event.map(|e| e.to_string()).unwrap_or_default(),
            opt(r.alpha),
            opt(r.beta),
            (r.correct as u8).to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_trace_csv<R: Read>(input: R) -> Result<Vec<TraceRecord>> {
    let mut r = csv::Reader::from_reader(input);
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    if header != TRACE_HEADER {
        return Err(BtflError::Parse(format!("unexpected trace header {header:?}")));
    }
    fn num<T: std::str::FromStr>(rec: &csv::StringRecord, i: usize) -> Result<T> {
        rec.get(i)
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| BtflError::Parse(format!("bad value in column {}", TRACE_HEADER[i])))
    }
    fn opt_num(rec: &csv::StringRecord, i: usize) -> Result<Option<f64>> {
        match rec.get(i) {
            Some("") | None => Ok(None),
            Some(_) => num(rec, i).map(Some),
        }
    }
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let event = match rec.get(7) {
            Some("") | None => None,
            Some(s) => Some(s.parse()?),
        };
        out.push(TraceRecord {
            client_id: num(&rec, 0)?,
            stream_tag: rec.get(1).unwrap_or_default().parse()?,
            sample_idx: num(&rec, 2)?,
            true_label: num(&rec, 3)?,
            pred_label: num(&rec, 4)?,
            e: num(&rec, 5)?,
            tau_hat: opt_num(&rec, 6)?,
            event,
            alpha: opt_num(&rec, 8)?,
            beta: opt_num(&rec, 9)?,
            correct: num::<u8>(&rec, 10)? == 1,
        });
    }
    Ok(out)
}

/// Recomputes per-cell accuracies from trace records of one method.
pub fn accuracies_from_trace(method: &str, records: &[TraceRecord]) -> Vec<StreamAccuracy> {
    let mut cells: BTreeMap<(usize, StreamTag), (usize, usize)> = BTreeMap::new();
    for r in records {
        let c = cells.entry((r.client_id, r.stream_tag)).or_default();
        c.0 += r.correct as usize;
        c.1 += 1;
    }
    cells
        .into_iter()
        .map(|((client_id, tag), (hits, n))| StreamAccuracy {
            method: method.to_string(),
            client_id,
            tag,
            accuracy: hits as f64 / n as f64,
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn acc(method: &str, client_id: usize, tag: StreamTag, accuracy: f64) -> StreamAccuracy {
        StreamAccuracy {
            method: method.into(),
            client_id,
            tag,
            accuracy,
        }
    }

    #[test]
    fn single_client_row_is_its_accuracies() {
        let vals = [0.9, 0.8, 0.5, 0.4, 0.65];
        let cells: Vec<_> = StreamTag::ALL.iter().zip(vals).map(|(t, a)| acc("m", 0, *t, a)).collect();
        let rows = summarize(&["m".into()], 1, &cells).unwrap();
        for (c, v) in rows[0].columns.iter().zip(vals) {
            assert!((c - 100.0 * v).abs() < 1e-12);
        }
        assert!((rows[0].avg - 65.0).abs() < 1e-12);
    }

    #[test]
    fn missing_cell_is_incomplete() {
        let cells: Vec<_> = StreamTag::ALL[..4].iter().map(|t| acc("m", 0, *t, 0.5)).collect();
        let err = summarize(&["m".into()], 1, &cells).unwrap_err();
        assert!(matches!(err, BtflError::IncompleteGrid(_)));
        assert_eq!(err.exit_code(), 4);
    }

    #[test]
    fn sig9_formatting() {
        assert_eq!(fmt_sig9(0.5), "0.5");
        assert_eq!(fmt_sig9(66.66666666666667), "66.6666667");
        assert_eq!(fmt_sig9(1.0 / 3.0), "0.333333333");
        assert_eq!(fmt_sig9(2.542824886730836), "2.54282489");
        assert_eq!(fmt_sig9(1e-30), "1.00000000e-30");
        assert_eq!(fmt_sig9(0.0), "0");
        assert_eq!(fmt_sig9(100.0), "100");
    }

    #[test]
    fn summary_csv_round_trip() {
        let rows = vec![SummaryRow {
            method: "btfl".into(),
            columns: [90.1, 80.25, 50.0, 45.5, 66.0],
            avg: 66.37,
        }];
        let mut buf = Vec::new();
        write_summary_csv(&rows, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("method,orig_ind,shift_ind,orig_exd,shift_exd,synthetical,avg\n"));
        assert_eq!(read_summary_csv(&buf[..]).unwrap(), rows);
        assert!(format_table(&rows).contains("66.37"));
    }

    #[test]
    fn trace_round_trip_with_empty_columns() {
        let recs = vec![
            TraceRecord {
                client_id: 2,
                stream_tag: StreamTag::ShiftExd,
                sample_idx: 7,
                true_label: 3,
                pred_label: 1,
                e: 0.25,
                tau_hat: None,
                event: None,
                alpha: None,
                beta: None,
                correct: false,
            },
            TraceRecord {
                client_id: 0,
                stream_tag: StreamTag::OrigInd,
                sample_idx: 0,
                true_label: 1,
                pred_label: 1,
                e: 0.125,
                tau_hat: Some(0.5),
                event: Some(crate::adapter::Event::Ind),
                alpha: Some(2.0),
                beta: Some(1.0),
                correct: true,
            },
        ];
        let mut buf = Vec::new();
        write_trace_csv(&recs, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.contains("2,shift_exd,7,3,1,0.25,,,,,0"));
        assert_eq!(read_trace_csv(&buf[..]).unwrap(), recs);
    }
}

//! Five-stream benchmark: construction, evaluation, and reporting.

mod evaluate;
mod report;
mod streams;

pub use evaluate::{evaluate, EvalResult, TraceRecord};
pub use report::{
    accuracies_from_trace, fmt_sig9, format_table, read_summary_csv, read_trace_csv, summarize, write_summary_csv,
    write_trace_csv, StreamAccuracy, SummaryRow, SUMMARY_HEADER, TRACE_HEADER,
};
pub use streams::{
    build_btgfl_streams, complement_distribution, BenchParams, BenchSample, BenchmarkStream, ShiftOperator, ShiftSet,
    StreamTag,
};

//! Trace CSV: `k, x1..xn, dA, dB, dInt, gap`, one row per iterate.

use regkit::solvers::Trace;

use crate::error::{CliError, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub k: usize,
    pub x: Vec<f64>,
    pub d_a: f64,
    pub d_b: f64,
    pub d_int: f64,
    pub gap: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceTable {
    pub dim: usize,
    pub rows: Vec<TraceRow>,
}

impl TraceTable {
    pub fn from_trace(t: &Trace) -> Self {
        let dim = t.iterates.first().map_or(0, |x| x.len());
        let rows = (0..t.len())
            .map(|k| TraceRow {
                k,
                x: t.iterates[k].clone(),
                d_a: t.d_a[k],
                d_b: t.d_b[k],
                d_int: t.d_int[k],
                gap: t.gaps[k],
            })
            .collect();
        TraceTable { dim, rows }
    }

    pub fn header(dim: usize) -> Vec<String> {
        let mut h = vec!["k".to_string()];
        h.extend((1..=dim).map(|i| format!("x{i}")));
        h.extend(["dA", "dB", "dInt", "gap"].map(String::from));
        h
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(Self::header(self.dim)).expect("in-memory write");
        for r in &self.rows {
            let mut rec = vec![r.k.to_string()];
            rec.extend(r.x.iter().map(|v| v.to_string()));
            rec.extend([r.d_a, r.d_b, r.d_int, r.gap].map(|v| v.to_string()));
            w.write_record(&rec).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 csv")
    }
}

fn bad(msg: impl Into<String>) -> CliError {
    CliError::Trace(msg.into())
}

/// Read a trace CSV back; the header must match the documented column order.
pub fn parse_trace_csv(text: &str) -> Result<TraceTable> {
    let mut r = csv::ReaderBuilder::new().has_headers(true).from_reader(text.as_bytes());
    let header: Vec<String> = r.headers().map_err(|e| bad(e.to_string()))?.iter().map(String::from).collect();
    if header.len() < 5 {
        return Err(bad(format!("expected at least 5 columns, got {}", header.len())));
    }
    let dim = header.len() - 5;
    if header != TraceTable::header(dim) {
        return Err(bad(format!("unexpected header {header:?}")));
    }
    let mut rows = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| bad(e.to_string()))?;
        let num = |j: usize| -> Result<f64> {
            rec[j].trim().parse::<f64>().map_err(|_| bad(format!("row {}: bad number {:?}", i + 1, &rec[j])))
        };
        let k: usize = rec[0].trim().parse().map_err(|_| bad(format!("row {}: bad index {:?}", i + 1, &rec[0])))?;
        if k != i {
            return Err(bad(format!("row {}: index {k} out of sequence", i + 1)));
        }
        let x = (1..=dim).map(num).collect::<Result<Vec<_>>>()?;
        rows.push(TraceRow {
            k,
            x,
            d_a: num(dim + 1)?,
            d_b: num(dim + 2)?,
            d_int: num(dim + 3)?,
            gap: num(dim + 4)?,
        });
    }
    Ok(TraceTable { dim, rows })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_order() {
        assert_eq!(TraceTable::header(2).join(","), "k,x1,x2,dA,dB,dInt,gap");
    }

    #[test]
    fn round_trip() {
        let t = TraceTable {
            dim: 2,
            rows: vec![
                TraceRow { k: 0, x: vec![0.1, -3.0], d_a: 0.5, d_b: 1e-17, d_int: 0.25, gap: 0.125 },
                TraceRow { k: 1, x: vec![0.0, 2.5e-300], d_a: 0.0, d_b: 0.0, d_int: 0.0, gap: 0.0 },
            ],
        };
        assert_eq!(parse_trace_csv(&t.to_csv()).unwrap(), t);
    }

    #[test]
    fn rejects_shuffled_columns_and_bad_rows() {
        assert!(parse_trace_csv("k,x1,dB,dA,dInt,gap\n").is_err());
        assert!(parse_trace_csv("k,x1,dA,dB,dInt,gap\n1,0,0,0,0,0\n").is_err());
        assert!(parse_trace_csv("k,x1,dA,dB,dInt,gap\n0,zero,0,0,0,0\n").is_err());
    }
}

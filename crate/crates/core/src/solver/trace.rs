//! Per-iteration trace and final-state CSV records.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::{ActionProfile, DecisionVector};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    /// 1-based iteration index.
    pub k: usize,
    pub residual: f64,
    pub wall_time_s: f64,
    pub dual_norms: Vec<f64>,
    pub objectives: Vec<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceTrace {
    pub rows: Vec<TraceRow>,
}

fn parse_f64(s: &str) -> Result<f64> {
    s.parse()
        .map_err(|_| Error::Parse(format!("bad number {s:?}")))
}

fn parse_usize(s: &str) -> Result<usize> {
    s.parse()
        .map_err(|_| Error::Parse(format!("bad integer {s:?}")))
}

impl ConvergenceTrace {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn last_residual(&self) -> Option<f64> {
        self.rows.last().map(|r| r.residual)
    }

    /// Largest per-player dual norm over the whole trace.
    pub fn max_dual_norm(&self) -> f64 {
        self.rows
            .iter()
            .flat_map(|r| r.dual_norms.iter().copied())
            .fold(0.0, f64::max)
    }

    /// `k,residual,wall_time_s,dual_norm_1..n,objective_1..n`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let n = self.rows.first().map_or(0, |r| r.dual_norms.len());
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["k".to_string(), "residual".into(), "wall_time_s".into()];
        header.extend((1..=n).map(|i| format!("dual_norm_{i}")));
        header.extend((1..=n).map(|i| format!("objective_{i}")));
        w.write_record(&header)?;
        for row in &self.rows {
            if row.dual_norms.len() != n || row.objectives.len() != n {
                return Err(Error::Shape(format!(
                    "trace row {} has a ragged width",
                    row.k
                )));
            }
            let mut rec = vec![
                row.k.to_string(),
                format!("{}", row.residual),
                format!("{}", row.wall_time_s),
            ];
            rec.extend(row.dual_norms.iter().map(|v| format!("{v}")));
            rec.extend(row.objectives.iter().map(|v| format!("{v}")));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut r = csv::Reader::from_reader(input);
        let width = r.headers()?.len();
        if width < 3 || (width - 3) % 2 != 0 {
            return Err(Error::Parse(format!("trace header has {width} columns")));
        }
        let n = (width - 3) / 2;
        let mut rows = Vec::new();
        for rec in r.records() {
            let rec = rec?;
            let vals: Vec<f64> = rec.iter().skip(3).map(parse_f64).collect::<Result<_>>()?;
            rows.push(TraceRow {
                k: parse_usize(&rec[0])?,
                residual: parse_f64(&rec[1])?,
                wall_time_s: parse_f64(&rec[2])?,
                dual_norms: vals[..n].to_vec(),
                objectives: vals[n..].to_vec(),
            });
        }
        Ok(Self { rows })
    }
}

/// `i,a,f,upsilon,lambda_1..p`, one row per player with 1-based ids.
pub fn write_final_state_csv<W: Write>(
    out: W,
    x: &ActionProfile,
    lambda: &[Vec<f64>],
) -> Result<()> {
    if x.len() != lambda.len() {
        return Err(Error::Shape(format!(
            "{} players but {} multipliers",
            x.len(),
            lambda.len()
        )));
    }
    let p = lambda.first().map_or(0, Vec::len);
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["i".to_string(), "a".into(), "f".into(), "upsilon".into()];
    header.extend((1..=p).map(|k| format!("lambda_{k}")));
    w.write_record(&header)?;
    for (i, (xi, li)) in x.iter().zip(lambda).enumerate() {
        let mut rec = vec![(i + 1).to_string()];
        rec.extend(xi.0.iter().map(|v| format!("{v}")));
        rec.extend(li.iter().map(|v| format!("{v}")));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_final_state_csv<R: Read>(input: R) -> Result<(ActionProfile, Vec<Vec<f64>>)> {
    let mut r = csv::Reader::from_reader(input);
    let width = r.headers()?.len();
    if width < 4 {
        return Err(Error::Parse(format!(
            "final-state header has {width} columns"
        )));
    }
    let mut xs = Vec::new();
    let mut lambdas = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let vals: Vec<f64> = rec.iter().skip(1).map(parse_f64).collect::<Result<_>>()?;
        xs.push(DecisionVector([vals[0], vals[1], vals[2]]));
        lambdas.push(vals[3..].to_vec());
    }
    Ok((ActionProfile::new(xs), lambdas))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trace_round_trip_is_exact() {
        let trace = ConvergenceTrace {
            rows: (1..=3)
                .map(|k| TraceRow {
                    k,
                    residual: 0.1 / k as f64,
                    wall_time_s: 0.0,
                    dual_norms: vec![1.0 / 3.0, 2.0f64.sqrt()],
                    objectives: vec![std::f64::consts::PI, 1e-300],
                })
                .collect(),
        };
        let mut buf = Vec::new();
        trace.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with(
            "k,residual,wall_time_s,dual_norm_1,dual_norm_2,objective_1,objective_2\n"
        ));
        assert_eq!(ConvergenceTrace::read_csv(buf.as_slice()).unwrap(), trace);
    }

    #[test]
    fn final_state_round_trip() {
        let x = ActionProfile::new(vec![DecisionVector::new(0.2, 0.3, 0.1 + 0.2); 2]);
        let l = vec![vec![0.1, 0.0, 1.0 / 7.0]; 2];
        let mut buf = Vec::new();
        write_final_state_csv(&mut buf, &x, &l).unwrap();
        assert!(buf.starts_with(b"i,a,f,upsilon,lambda_1,lambda_2,lambda_3\n1,"));
        assert_eq!(read_final_state_csv(buf.as_slice()).unwrap(), (x, l));
    }

    #[test]
    fn malformed_input() {
        assert!(ConvergenceTrace::read_csv("k,residual,wall_time_s,x\n".as_bytes()).is_err());
        let bad = "k,residual,wall_time_s,dual_norm_1,objective_1\n1,abc,0,1,1\n";
        assert!(ConvergenceTrace::read_csv(bad.as_bytes()).is_err());
    }
}

//! Aggregation and CSV output of simulation metrics.

use std::io::Write;

use crate::error::Result;
use crate::simulate::{MetricRow, Method};
use crate::stats::{mean, standard_error};

/// Conditional survival is reported only when some selection happens in at
/// least this fraction of replicates.
pub const MIN_SELECTION_SHARE: f64 = 0.1;

/// Marker for a suppressed cell.
pub const NOT_EVALUATED: &str = "—";

#[derive(Debug, Clone, PartialEq)]
pub struct MeanSe {
    pub mean: f64,
    /// Twice the standard error of the mean.
    pub two_se: f64,
}

impl MeanSe {
    fn of(xs: &[f64]) -> Self {
        Self {
            mean: mean(xs),
            two_se: 2.0 * standard_error(xs),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub method: Method,
    pub t0: f64,
    pub replicates: usize,
    pub yield_count: MeanSe,
    pub survival: MeanSe,
    pub conditional_survival: Option<MeanSe>,
    /// Share of replicates with a nonempty selection.
    pub p_selected: f64,
}

/// Mean and two standard errors per `(method, t0)`, in order of first
/// appearance.
pub fn summarize(rows: &[MetricRow]) -> Vec<SummaryRow> {
    let mut keys: Vec<(Method, f64)> = Vec::new();
    for r in rows {
        if !keys.iter().any(|&(m, t)| m == r.method && t == r.t0) {
            keys.push((r.method, r.t0));
        }
    }
    keys.into_iter()
        .map(|(method, t0)| {
            let group: Vec<&MetricRow> = rows.iter().filter(|r| r.method == method && r.t0 == t0).collect();
            let yields: Vec<f64> = group.iter().map(|r| r.metrics.yield_count as f64).collect();
            let surv: Vec<f64> = group.iter().map(|r| r.metrics.survival_rate).collect();
            let cond: Vec<f64> = group.iter().filter_map(|r| r.metrics.conditional_survival).collect();
            let p_selected = cond.len() as f64 / group.len() as f64;
            SummaryRow {
                method,
                t0,
                replicates: group.len(),
                yield_count: MeanSe::of(&yields),
                survival: MeanSe::of(&surv),
                conditional_survival: (p_selected >= MIN_SELECTION_SHARE && !cond.is_empty()).then(|| MeanSe::of(&cond)),
                p_selected,
            }
        })
        .collect()
}

/// One line per `(method, t0, replicate)`.
pub fn write_metrics_csv<W: Write>(rows: &[MetricRow], mut out: W) -> Result<()> {
    writeln!(out, "method,t0,replicate,yield,survival,csurvival,selected_any")?;
    for r in rows {
        let m = &r.metrics;
        let cs = m.conditional_survival.map_or_else(String::new, |c| format!("{c:.6}"));
        writeln!(
            out,
            "{},{},{},{},{:.6},{},{}",
            r.method,
            r.t0,
            r.replicate,
            m.yield_count,
            m.survival_rate,
            cs,
            u8::from(m.selected_any)
        )?;
    }
    Ok(())
}

/// Summary table with fixed four-decimal formatting.
pub fn emit_report<W: Write>(summary: &[SummaryRow], mut out: W) -> Result<()> {
    writeln!(
        out,
        "method,t0,replicates,yield_mean,yield_2se,survival_mean,survival_2se,csurvival_mean,csurvival_2se,p_selected"
    )?;
    for s in summary {
        let (cm, cse) = match &s.conditional_survival {
            Some(c) => (format!("{:.4}", c.mean), format!("{:.4}", c.two_se)),
            None => (NOT_EVALUATED.to_string(), NOT_EVALUATED.to_string()),
        };
        writeln!(
            out,
            "{},{},{},{:.4},{:.4},{:.4},{:.4},{},{},{:.4}",
            s.method,
            s.t0,
            s.replicates,
            s.yield_count.mean,
            s.yield_count.two_se,
            s.survival.mean,
            s.survival.two_se,
            cm,
            cse,
            s.p_selected
        )?;
    }
    Ok(())
}

/// Parses a metrics CSV written by [`write_metrics_csv`].
pub fn read_metrics_csv<R: std::io::Read>(input: R) -> Result<Vec<MetricRow>> {
    use crate::error::Error;
    use crate::simulate::ReplicateMetrics;
    let mut rdr = csv::Reader::from_reader(input);
    let mut rows = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let id = format!("row {}", line + 1);
        let field = |k: usize, name: &str| -> Result<&str> {
            rec.get(k).ok_or_else(|| Error::validation(&id, name, "missing column"))
        };
        let num = |k: usize, name: &str| -> Result<f64> {
            field(k, name)?
                .parse::<f64>()
                .map_err(|_| Error::validation(&id, name, "not a number"))
        };
        let method = field(0, "method")?
            .parse::<Method>()
            .map_err(|e| Error::validation(&id, "method", e.to_string()))?;
        let cs = field(5, "csurvival")?;
        let selected_any = match field(6, "selected_any")? {
            "1" => true,
            "0" => false,
            _ => return Err(Error::validation(&id, "selected_any", "expected 0 or 1")),
        };
        rows.push(MetricRow {
            method,
            t0: num(1, "t0")?,
            replicate: num(2, "replicate")? as usize,
            metrics: ReplicateMetrics {
                yield_count: num(3, "yield")? as usize,
                survival_rate: num(4, "survival")?,
                conditional_survival: if cs.is_empty() { None } else { Some(num(5, "csurvival")?) },
                selected_any,
            },
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simulate::ReplicateMetrics;

    fn row(method: Method, rep: usize, y: usize, surv: Option<f64>) -> MetricRow {
        MetricRow {
            method,
            t0: 3.0,
            replicate: rep,
            metrics: ReplicateMetrics {
                yield_count: y,
                survival_rate: surv.unwrap_or(1.0),
                conditional_survival: surv,
                selected_any: surv.is_some(),
            },
        }
    }

    #[test]
    fn two_replicates() {
        let s = summarize(&[row(Method::Greedy, 0, 10, Some(0.9)), row(Method::Greedy, 1, 20, Some(0.95))]);
        assert_eq!(s.len(), 1);
        assert!((s[0].yield_count.mean - 15.0).abs() < 1e-12);
        assert!((s[0].yield_count.two_se - 10.0).abs() < 1e-12);
        let mut out = Vec::new();
        emit_report(&s, &mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert_eq!(text.lines().count(), 2);
        assert!(text.contains("greedy,3,2,15.0000,10.0000,0.9250"));
    }

    #[test]
    fn rare_selection_is_not_evaluated() {
        let rows: Vec<_> = (0..20)
            .map(|r| row(Method::Ltt, r, usize::from(r == 0), (r == 0).then_some(1.0)))
            .collect();
        let s = summarize(&rows);
        assert!(s[0].conditional_survival.is_none());
        let mut out = Vec::new();
        emit_report(&s, &mut out).unwrap();
        assert!(String::from_utf8(out).unwrap().contains(",—,—,0.0500"));
    }

    #[test]
    fn metrics_roundtrip() {
        let rows = vec![row(Method::Conformal, 0, 3, Some(0.5)), row(Method::Oracle, 1, 0, None)];
        let mut out = Vec::new();
        write_metrics_csv(&rows, &mut out).unwrap();
        assert_eq!(read_metrics_csv(out.as_slice()).unwrap(), rows);
    }
}

use std::collections::BTreeMap;
use std::path::Path;

use super::config::{ExperimentConfig, Method};
use super::runner::{read_results, summarize, write_summary, ResultRow, CONFIG_FILE, RESULTS_FILE, SUMMARY_FILE};
use crate::error::{Error, Result};

/// Per-`n` mean and standard deviation of the natural log of the loss, per method.
#[derive(Debug, Clone, PartialEq)]
pub struct PlotTable {
    pub methods: Vec<Method>,
    /// `(n, [(mean log-loss, std log-loss) per method])`; `NaN` marks a missing cell.
    pub rows: Vec<(usize, Vec<(f64, f64)>)>,
}

impl PlotTable {
    pub fn from_rows(rows: &[ResultRow]) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::input("no result rows to summarise"));
        }
        let mut methods: Vec<Method> = rows.iter().map(|r| r.method).collect();
        methods.sort();
        methods.dedup();
        let mut by_n: BTreeMap<usize, BTreeMap<Method, Vec<f64>>> = BTreeMap::new();
        for r in rows {
            by_n.entry(r.n).or_default().entry(r.method).or_default().push(r.l2_error.ln());
        }
        let table = by_n
            .into_iter()
            .map(|(n, per)| {
                let stats = methods
                    .iter()
                    .map(|m| match per.get(m) {
                        Some(v) => {
                            let k = v.len() as f64;
                            let mean = v.iter().sum::<f64>() / k;
                            let var = if v.len() > 1 {
                                v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (k - 1.0)
                            } else {
                                0.0
                            };
                            (mean, var.sqrt())
                        }
                        None => (f64::NAN, f64::NAN),
                    })
                    .collect();
                (n, stats)
            })
            .collect();
        Ok(Self { methods, rows: table })
    }

    pub fn header(&self) -> Vec<String> {
        let mut h = vec!["n".to_string()];
        for m in &self.methods {
            h.push(format!("{}_mean_log_loss", m.name()));
            h.push(format!("{}_std_log_loss", m.name()));
        }
        h
    }

    pub fn to_csv(&self) -> Result<Vec<u8>> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let err = |e: csv::Error| Error::Parse(e.to_string());
        w.write_record(self.header()).map_err(err)?;
        for (n, stats) in &self.rows {
            let mut rec = vec![n.to_string()];
            for (m, s) in stats {
                rec.push(format!("{m:?}"));
                rec.push(format!("{s:?}"));
            }
            w.write_record(rec).map_err(err)?;
        }
        w.into_inner().map_err(|e| Error::Parse(e.to_string()))
    }

    /// Mean log-loss of `method` at each `n`, in table order.
    pub fn column(&self, method: Method) -> Option<Vec<f64>> {
        let i = self.methods.iter().position(|m| *m == method)?;
        Some(self.rows.iter().map(|(_, s)| s[i].0).collect())
    }
}

pub fn write_plotdata(path: &Path, rows: &[ResultRow]) -> Result<PlotTable> {
    let table = PlotTable::from_rows(rows)?;
    std::fs::write(path, table.to_csv()?).map_err(|e| Error::io(path, e))?;
    Ok(table)
}

/// Reads `results.csv` and the `config.toml` snapshot from `results_dir`, writes
/// the plot table to `out` and the slope summary to `summary.csv` beside it.
pub fn emit_plotdata(results_dir: &Path, out: &Path) -> Result<PlotTable> {
    let rows = read_results(&results_dir.join(RESULTS_FILE))?;
    let cfg = ExperimentConfig::load(&results_dir.join(CONFIG_FILE))?;
    let table = write_plotdata(out, &rows)?;
    let dir = out.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    write_summary(&dir.join(SUMMARY_FILE), &summarize(&rows, &cfg.target()?)?)?;
    Ok(table)
}

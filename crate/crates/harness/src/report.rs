//! Long-format result tables and their deterministic renderings.
//!
//! Every sweep aggregates per-replication metrics into one row per
//! `(sweep_value, strategy, metric)`. Floats render through the shortest
//! round-trip formatter, so a fixed seed reproduces output files byte for
//! byte, and the per-replication audit JSON carries enough to recompute
//! every table row.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    pub sweep_value: f64,
    pub strategy: String,
    pub metric: String,
    pub mean: f64,
    pub stddev: f64,
    pub replications: usize,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ResultTable {
    pub rows: Vec<TableRow>,
}

/// Mean and sample standard deviation (zero for a single replication).
pub fn mean_stddev(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64;
    (mean, var.sqrt())
}

impl ResultTable {
    pub fn push_aggregate(&mut self, sweep_value: f64, strategy: &str, metric: &str, values: &[f64]) {
        let (mean, stddev) = mean_stddev(values);
        self.rows.push(TableRow {
            sweep_value,
            strategy: strategy.to_string(),
            metric: metric.to_string(),
            mean,
            stddev,
            replications: values.len(),
        });
    }

    pub fn mean_of(&self, sweep_value: f64, strategy: &str, metric: &str) -> Option<f64> {
        self.rows
            .iter()
            .find(|r| {
                r.sweep_value == sweep_value && r.strategy == strategy && r.metric == metric
            })
            .map(|r| r.mean)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("sweep_value,strategy,metric,mean,stddev,replications\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                r.sweep_value, r.strategy, r.metric, r.mean, r.stddev, r.replications
            ));
        }
        out
    }

    pub fn to_json(&self) -> crate::Result<String> {
        Ok(serde_json::to_string_pretty(&self.rows)?)
    }

    /// Gnuplot-ready columns for one metric: `x` then the metric mean per
    /// strategy, in the given order.
    pub fn plot_data(&self, xlabel: &str, metric: &str, strategies: &[&str]) -> String {
        let mut xs: Vec<f64> = self
            .rows
            .iter()
            .filter(|r| r.metric == metric)
            .map(|r| r.sweep_value)
            .collect();
        xs.sort_by(|a, b| a.partial_cmp(b).expect("finite sweep values"));
        xs.dedup();

        let mut out = format!("# {xlabel}");
        for s in strategies {
            out.push_str(&format!(" {s}"));
        }
        out.push('\n');
        for x in xs {
            out.push_str(&format!("{x}"));
            for s in strategies {
                match self.mean_of(x, s, metric) {
                    Some(v) => out.push_str(&format!(" {v}")),
                    None => out.push_str(" nan"),
                }
            }
            out.push('\n');
        }
        out
    }
}

/// Render any serializable audit list as pretty JSON.
pub fn audit_json<T: Serialize>(rows: &[T]) -> crate::Result<String> {
    Ok(serde_json::to_string_pretty(rows)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mean_stddev_basics() {
        let (m, s) = mean_stddev(&[2.0, 4.0, 6.0]);
        assert_eq!(m, 4.0);
        assert!((s - 2.0).abs() < 1e-12);
        let (m1, s1) = mean_stddev(&[5.0]);
        assert_eq!((m1, s1), (5.0, 0.0));
    }

    #[test]
    fn csv_and_plot_rendering() {
        let mut table = ResultTable::default();
        table.push_aggregate(1.0, "proposed", "objective", &[1.0, 2.0]);
        table.push_aggregate(1.0, "random", "objective", &[3.0, 5.0]);
        table.push_aggregate(2.0, "proposed", "objective", &[0.5, 0.5]);
        table.push_aggregate(2.0, "random", "objective", &[2.0, 2.0]);
        let csv = table.to_csv();
        assert!(csv.starts_with("sweep_value,strategy,metric,mean,stddev,replications\n"));
        assert!(csv.contains("1,proposed,objective,1.5,"));

        let dat = table.plot_data("m", "objective", &["proposed", "random"]);
        let lines: Vec<&str> = dat.lines().collect();
        assert_eq!(lines[0], "# m proposed random");
        assert_eq!(lines[1], "1 1.5 4");
        assert_eq!(lines[2], "2 0.5 2");
    }
}

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::average_ranks;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Orientation {
    HigherIsBetter,
    LowerIsBetter,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    RocAuc,
    Aurc,
    Ece,
}

impl Metric {
    pub const ALL: [Metric; 3] = [Metric::RocAuc, Metric::Aurc, Metric::Ece];

    pub fn orientation(self) -> Orientation {
        match self {
            Metric::RocAuc => Orientation::HigherIsBetter,
            Metric::Aurc | Metric::Ece => Orientation::LowerIsBetter,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Metric::RocAuc => "ROC-AUC ↑",
            Metric::Aurc => "AURC ↓",
            Metric::Ece => "ECE ↓",
        }
    }

    pub fn key(self) -> &'static str {
        match self {
            Metric::RocAuc => "roc_auc",
            Metric::Aurc => "aurc",
            Metric::Ece => "ece",
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.key())
    }
}

/// One metric for every (method, dataset) cell.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricTable {
    pub metric: Metric,
    pub methods: Vec<String>,
    pub datasets: Vec<String>,
    /// `values[m][d]` for method `m` on dataset `d`.
    pub values: Vec<Vec<Option<f64>>>,
}

/// Mean over datasets of each method's rank (1 = best, ties averaged).
/// Returned in `table.methods` order.
pub fn average_rank(table: &MetricTable) -> Result<Vec<(String, f64)>> {
    if table.methods.is_empty() {
        return Err(Error::InvalidInput("ranking needs at least one method".into()));
    }
    if table.datasets.is_empty() {
        return Err(Error::InvalidInput("ranking needs at least one dataset".into()));
    }
    if table.values.len() != table.methods.len() {
        return Err(Error::DimensionMismatch {
            expected: table.methods.len(),
            actual: table.values.len(),
        });
    }
    let mut totals = vec![0.0; table.methods.len()];
    for (d, dataset) in table.datasets.iter().enumerate() {
        let mut column = Vec::with_capacity(table.methods.len());
        for (m, method) in table.methods.iter().enumerate() {
            let v = table.values[m].get(d).copied().flatten().ok_or_else(|| {
                Error::MissingData(format!(
                    "no {} value for method `{method}` on dataset `{dataset}`",
                    table.metric
                ))
            })?;
            // rank ascending on "badness"
            column.push(match table.metric.orientation() {
                Orientation::HigherIsBetter => -v,
                Orientation::LowerIsBetter => v,
            });
        }
        for (t, r) in totals.iter_mut().zip(average_ranks(&column)) {
            *t += r;
        }
    }
    let k = table.datasets.len() as f64;
    Ok(table
        .methods
        .iter()
        .cloned()
        .zip(totals.into_iter().map(|t| t / k))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table(metric: Metric, values: Vec<Vec<f64>>) -> MetricTable {
        MetricTable {
            metric,
            methods: (0..values.len()).map(|i| format!("m{i}")).collect(),
            datasets: (0..values[0].len()).map(|i| format!("d{i}")).collect(),
            values: values
                .into_iter()
                .map(|r| r.into_iter().map(Some).collect())
                .collect(),
        }
    }

    #[test]
    fn best_everywhere_ranks_first() {
        let r = average_rank(&table(Metric::RocAuc, vec![vec![0.9, 0.8], vec![0.7, 0.6]])).unwrap();
        assert_eq!(r[0].1, 1.0);
        assert_eq!(r[1].1, 2.0);
    }

    #[test]
    fn ties_average() {
        let r = average_rank(&table(Metric::Aurc, vec![vec![0.1, 0.2], vec![0.1, 0.2]])).unwrap();
        assert_eq!((r[0].1, r[1].1), (1.5, 1.5));
    }

    #[test]
    fn lower_is_better_for_aurc() {
        let r = average_rank(&table(
            Metric::Aurc,
            vec![vec![0.3, 0.1], vec![0.2, 0.2], vec![0.1, 0.3]],
        ))
        .unwrap();
        // d0 ranks (3, 2, 1), d1 ranks (1, 2, 3)
        assert_eq!(r.iter().map(|x| x.1).collect::<Vec<_>>(), vec![2.0, 2.0, 2.0]);
    }

    #[test]
    fn missing_cell_is_an_error() {
        let mut t = table(Metric::Ece, vec![vec![0.1], vec![0.2]]);
        t.values[1][0] = None;
        assert!(matches!(average_rank(&t), Err(Error::MissingData(_))));
    }
}

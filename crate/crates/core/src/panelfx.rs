//! Panel transforms applied before estimation: the within (fixed-effects)
//! transformation and first differences.

use std::collections::HashSet;

use serde::Serialize;

use crate::dataset::{Column, Dataset};
use crate::error::{Error, Result};

/// Group structure of a panel: which rows belong to which unit, and
/// optionally their time order.
#[derive(Debug, Clone, PartialEq)]
pub struct PanelIndex {
    pub panel_id: String,
    pub time_id: Option<String>,
    /// Group code per row, numbered by first appearance.
    pub codes: Vec<usize>,
    /// Label of each group.
    pub labels: Vec<String>,
    /// Rows of each group, ordered by time when a time column is given and
    /// by row order otherwise.
    pub groups: Vec<Vec<usize>>,
}

impl PanelIndex {
    pub fn new(ds: &Dataset, panel_id: &str, time_id: Option<&str>) -> Result<PanelIndex> {
        let row_labels = ds.labels(panel_id)?;
        let codes = ds.group_codes(panel_id)?;
        let n_groups = codes.iter().copied().max().map_or(0, |m| m + 1);
        let mut labels = vec![String::new(); n_groups];
        let mut groups = vec![Vec::new(); n_groups];
        for (r, &g) in codes.iter().enumerate() {
            if groups[g].is_empty() {
                labels[g] = row_labels[r].clone();
            }
            groups[g].push(r);
        }
        if let Some(t) = time_id {
            let times = ds.numeric(t)?;
            if let Some(r) = times.iter().position(|v| v.is_nan()) {
                return Err(Error::InvalidArgument(format!("missing time value in {t:?} at row {r}")));
            }
            for (g, rows) in groups.iter_mut().enumerate() {
                rows.sort_by(|&a, &b| times[a].total_cmp(&times[b]).then(a.cmp(&b)));
                let mut seen = HashSet::new();
                for &r in rows.iter() {
                    if !seen.insert(times[r].to_bits()) {
                        return Err(Error::InvalidArgument(format!(
                            "time {} repeats within panel {:?}",
                            times[r], labels[g]
                        )));
                    }
                }
            }
        }
        Ok(PanelIndex {
            panel_id: panel_id.to_string(),
            time_id: time_id.map(String::from),
            codes,
            labels,
            groups,
        })
    }

    pub fn n_groups(&self) -> usize {
        self.groups.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PanelTransform {
    pub data: Dataset,
    pub n_groups: usize,
    /// Rows remaining after the transform.
    pub n_used: usize,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PanelMethod {
    Within,
    FirstDifference,
}

fn check_rows(ds: &Dataset, index: &PanelIndex) -> Result<()> {
    if index.codes.len() != ds.n_rows() {
        return Err(Error::Dimension(format!(
            "panel index covers {} rows, dataset has {}",
            index.codes.len(),
            ds.n_rows()
        )));
    }
    Ok(())
}

/// Subtract group means from the named columns. Other columns are left
/// alone. Singleton groups become all zeros, with a warning.
pub fn within_transform<S: AsRef<str>>(
    ds: &Dataset,
    index: &PanelIndex,
    columns: &[S],
) -> Result<PanelTransform> {
    check_rows(ds, index)?;
    let mut out = Vec::with_capacity(columns.len());
    for name in columns {
        let v = ds.numeric(name.as_ref())?;
        let mut t = v.to_vec();
        for rows in &index.groups {
            let m = rows.iter().map(|&r| v[r]).sum::<f64>() / rows.len() as f64;
            for &r in rows {
                t[r] = v[r] - m;
            }
        }
        out.push(Column::numeric(name.as_ref(), t));
    }
    let singletons = index.groups.iter().filter(|g| g.len() == 1).count();
    let mut warnings = Vec::new();
    if singletons > 0 {
        warnings.push(format!(
            "{singletons} panel(s) with a single observation contribute only zeros"
        ));
    }
    Ok(PanelTransform {
        data: ds.with_columns(out)?,
        n_groups: index.n_groups(),
        n_used: ds.n_rows(),
        warnings,
    })
}

/// Difference the named columns within each panel along the time index.
///
/// The first observation of each panel is dropped and rows come out grouped
/// by panel in time order. Columns not named keep the value of the later
/// observation. A jump of more than one time unit is an error unless
/// `allow_gaps` is set, in which case the difference spans the gap.
pub fn first_difference<S: AsRef<str>>(
    ds: &Dataset,
    index: &PanelIndex,
    columns: &[S],
    allow_gaps: bool,
) -> Result<PanelTransform> {
    check_rows(ds, index)?;
    let time = index
        .time_id
        .as_deref()
        .ok_or_else(|| Error::InvalidArgument("first differences need a time column".into()))?;
    let times = ds.numeric(time)?;
    let mut pairs = Vec::new();
    let mut gaps = 0usize;
    for (g, rows) in index.groups.iter().enumerate() {
        for w in rows.windows(2) {
            let (a, b) = (w[0], w[1]);
            if times[b] - times[a] > 1.0 + 1e-9 {
                if !allow_gaps {
                    return Err(Error::TimeGap {
                        panel: index.labels[g].clone(),
                        from: times[a],
                        to: times[b],
                    });
                }
                gaps += 1;
            }
            pairs.push((a, b));
        }
    }
    if pairs.is_empty() {
        return Err(Error::InvalidArgument(
            "no panel has two observations to difference".into(),
        ));
    }
    let later: Vec<usize> = pairs.iter().map(|&(_, b)| b).collect();
    let base = ds.select_rows(&later);
    let mut diffs = Vec::with_capacity(columns.len());
    for name in columns {
        let v = ds.numeric(name.as_ref())?;
        diffs.push(Column::numeric(
            name.as_ref(),
            pairs.iter().map(|&(a, b)| v[b] - v[a]).collect(),
        ));
    }
    let mut warnings = Vec::new();
    if gaps > 0 {
        warnings.push(format!("{gaps} difference(s) span a gap in the time index"));
    }
    let n_used = later.len();
    Ok(PanelTransform {
        data: base.with_columns(diffs)?,
        n_groups: index.n_groups(),
        n_used,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn panel() -> Dataset {
        let mut cols = vec![
            Column::numeric("id", vec![1.0, 1.0, 1.0, 2.0, 2.0]),
            Column::numeric("t", vec![3.0, 1.0, 2.0, 1.0, 2.0]),
            Column::numeric("x", vec![9.0, 3.0, 6.0, 4.0, 4.0]),
        ];
        cols.push(Column::numeric("k", vec![7.0; 5]));
        Dataset::new(cols).unwrap()
    }

    #[test]
    fn within_removes_group_means() {
        let ds = panel();
        let idx = PanelIndex::new(&ds, "id", None).unwrap();
        let out = within_transform(&ds, &idx, &["x", "k"]).unwrap();
        let x = out.data.numeric("x").unwrap();
        assert_eq!(x, &[3.0, -3.0, 0.0, 0.0, 0.0]);
        assert!(out.data.numeric("k").unwrap().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn first_difference_sorts_by_time() {
        let ds = panel();
        let idx = PanelIndex::new(&ds, "id", Some("t")).unwrap();
        let out = first_difference(&ds, &idx, &["x"], false).unwrap();
        assert_eq!(out.data.numeric("x").unwrap(), &[3.0, 3.0, 0.0]);
        assert_eq!(out.data.numeric("t").unwrap(), &[2.0, 3.0, 2.0]);
        assert_eq!(out.n_used, 3);
    }

    #[test]
    fn gaps_need_permission() {
        let ds = Dataset::from_numeric(vec![
            ("id", vec![1.0, 1.0, 1.0]),
            ("t", vec![1.0, 2.0, 4.0]),
            ("x", vec![1.0, 2.0, 4.0]),
        ])
        .unwrap();
        let idx = PanelIndex::new(&ds, "id", Some("t")).unwrap();
        assert!(matches!(
            first_difference(&ds, &idx, &["x"], false),
            Err(Error::TimeGap { .. })
        ));
        let out = first_difference(&ds, &idx, &["x"], true).unwrap();
        assert_eq!(out.data.numeric("x").unwrap(), &[1.0, 2.0]);
        assert_eq!(out.warnings.len(), 1);
    }

    #[test]
    fn repeated_time_rejected() {
        let ds = Dataset::from_numeric(vec![("id", vec![1.0, 1.0]), ("t", vec![1.0, 1.0])]).unwrap();
        assert!(PanelIndex::new(&ds, "id", Some("t")).is_err());
    }
}

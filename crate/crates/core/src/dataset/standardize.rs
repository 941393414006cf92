use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use super::{Column, Dataset};
use crate::error::{Error, Result};
use crate::linalg::mean;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ColumnRole {
    /// Centered and scaled to unit variance (divisor N).
    Penalized,
    /// Centered only; constant columns are flagged and zeroed.
    Unpenalized,
    /// Centered only.
    Dependent,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ScaleFlag {
    Standardized,
    Centered,
    Constant,
    Untouched,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ColumnScaling {
    pub name: String,
    pub mean: f64,
    pub scale: f64,
    pub flag: ScaleFlag,
}

/// Means and scales needed to map standardized-scale coefficients back to
/// original units. `columns` follows the coefficient order.
#[derive(Debug, Clone, PartialEq, Serialize, Default)]
pub struct StandardizationRecord {
    pub columns: Vec<ColumnScaling>,
    pub response: Option<ColumnScaling>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, Default)]
pub struct StandardizeRequest {
    pub dependent: Option<String>,
    pub penalized: Vec<String>,
    pub unpenalized: Vec<String>,
}

fn is_constant(sd: f64, mean: f64) -> bool {
    sd <= 1e-14 * mean.abs().max(1.0)
}

/// Population (divisor N) mean and standard deviation.
pub(crate) fn moments(v: &[f64]) -> (f64, f64) {
    let m = mean(v);
    let var = v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / v.len() as f64;
    (m, var.sqrt())
}

pub(crate) fn scale_column(name: &str, v: &[f64], role: ColumnRole) -> Result<ColumnScaling> {
    let (m, sd) = moments(v);
    let (scale, flag) = match role {
        ColumnRole::Penalized => {
            if is_constant(sd, m) {
                return Err(Error::ZeroScale(name.to_string()));
            }
            (sd, ScaleFlag::Standardized)
        }
        ColumnRole::Unpenalized if is_constant(sd, m) => (1.0, ScaleFlag::Constant),
        ColumnRole::Unpenalized | ColumnRole::Dependent => (1.0, ScaleFlag::Centered),
    };
    Ok(ColumnScaling {
        name: name.to_string(),
        mean: m,
        scale,
        flag,
    })
}

pub(crate) fn apply_scaling(v: &[f64], s: &ColumnScaling) -> Vec<f64> {
    match s.flag {
        ScaleFlag::Constant => vec![0.0; v.len()],
        ScaleFlag::Untouched => v.to_vec(),
        _ => v.iter().map(|x| (x - s.mean) / s.scale).collect(),
    }
}

/// Standardize the columns of `x` according to their roles.
pub fn standardize_matrix(
    x: &DMatrix<f64>,
    names: &[String],
    roles: &[ColumnRole],
) -> Result<(DMatrix<f64>, Vec<ColumnScaling>)> {
    if names.len() != x.ncols() || roles.len() != x.ncols() {
        return Err(Error::Dimension("names/roles do not match matrix columns".into()));
    }
    let mut out = x.clone();
    let mut rec = Vec::with_capacity(x.ncols());
    for j in 0..x.ncols() {
        let col: Vec<f64> = x.column(j).iter().copied().collect();
        let s = scale_column(&names[j], &col, roles[j])?;
        out.set_column(j, &DVector::from_vec(apply_scaling(&col, &s)));
        rec.push(s);
    }
    Ok((out, rec))
}

/// Standardize dataset columns: penalized columns to mean 0 and variance 1
/// (divisor N, so the sum of squares equals N), unpenalized columns and the
/// dependent variable centered only. Constant penalized columns are an
/// error; constant unpenalized columns are dropped with a warning.
pub fn standardize(
    ds: &Dataset,
    request: &StandardizeRequest,
) -> Result<(Dataset, StandardizationRecord)> {
    let mut record = StandardizationRecord::default();
    let mut replaced = Vec::new();
    let mut dropped = Vec::new();
    if let Some(dep) = &request.dependent {
        let v = ds.numeric(dep)?;
        let s = scale_column(dep, v, ColumnRole::Dependent)?;
        replaced.push(Column::numeric(dep.clone(), apply_scaling(v, &s)));
        record.response = Some(s);
    }
    let roles = request
        .penalized
        .iter()
        .map(|n| (n, ColumnRole::Penalized))
        .chain(request.unpenalized.iter().map(|n| (n, ColumnRole::Unpenalized)));
    for (name, role) in roles {
        let v = ds.numeric(name)?;
        let s = scale_column(name, v, role)?;
        if s.flag == ScaleFlag::Constant {
            record
                .warnings
                .push(format!("constant column {name:?} dropped; absorbed by the intercept"));
            dropped.push(name.clone());
        } else {
            replaced.push(Column::numeric(name.clone(), apply_scaling(v, &s)));
        }
        record.columns.push(s);
    }
    let mut out = ds.with_columns(replaced)?;
    for name in dropped {
        let at = out.index_of(&name).expect("column checked above");
        out.replace_columns(at, 1, Vec::new());
    }
    Ok((out, record))
}

/// Map standardized-scale coefficients to original units. Returns the
/// original-scale coefficients and the intercept rebuilt from the stored means.
pub fn destandardize(
    coeffs: &DVector<f64>,
    record: &StandardizationRecord,
) -> Result<(DVector<f64>, f64)> {
    if coeffs.len() != record.columns.len() {
        return Err(Error::Dimension(format!(
            "{} coefficients for {} recorded columns",
            coeffs.len(),
            record.columns.len()
        )));
    }
    let orig = DVector::from_iterator(
        coeffs.len(),
        coeffs
            .iter()
            .zip(&record.columns)
            .map(|(b, s)| match s.flag {
                ScaleFlag::Constant => 0.0,
                _ => b / s.scale,
            }),
    );
    let y_mean = record.response.as_ref().map_or(0.0, |r| r.mean);
    let shift: f64 = orig
        .iter()
        .zip(&record.columns)
        .filter(|(_, s)| s.flag != ScaleFlag::Untouched)
        .map(|(b, s)| b * s.mean)
        .sum();
    Ok((orig, y_mean - shift))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn req(dep: Option<&str>, pen: &[&str], unpen: &[&str]) -> StandardizeRequest {
        StandardizeRequest {
            dependent: dep.map(String::from),
            penalized: pen.iter().map(|s| s.to_string()).collect(),
            unpenalized: unpen.iter().map(|s| s.to_string()).collect(),
        }
    }

    #[test]
    fn divisor_n_gives_sum_of_squares_n() {
        let ds = Dataset::from_numeric(vec![("x", vec![1.0, 2.0, 3.0])]).unwrap();
        let (out, rec) = standardize(&ds, &req(None, &["x"], &[])).unwrap();
        let v = out.numeric("x").unwrap();
        assert!(v.iter().sum::<f64>().abs() < 1e-15);
        assert!((v.iter().map(|x| x * x).sum::<f64>() - 3.0).abs() < 1e-14);
        assert!((v[0] + 1.5f64.sqrt()).abs() < 1e-14);
        assert!((rec.columns[0].scale - (2.0f64 / 3.0).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn idempotent() {
        let ds = Dataset::from_numeric(vec![("x", vec![0.3, -1.2, 4.0, 2.2, 0.0])]).unwrap();
        let (once, _) = standardize(&ds, &req(None, &["x"], &[])).unwrap();
        let (twice, _) = standardize(&once, &req(None, &["x"], &[])).unwrap();
        for (a, b) in once.numeric("x").unwrap().iter().zip(twice.numeric("x").unwrap()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn constant_penalized_column_named_in_error() {
        let ds = Dataset::from_numeric(vec![("c", vec![5.0, 5.0, 5.0])]).unwrap();
        match standardize(&ds, &req(None, &["c"], &[])) {
            Err(Error::ZeroScale(name)) => assert_eq!(name, "c"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn constant_unpenalized_column_dropped() {
        let ds =
            Dataset::from_numeric(vec![("c", vec![5.0, 5.0, 5.0]), ("y", vec![1.0, 2.0, 4.0])])
                .unwrap();
        let (out, rec) = standardize(&ds, &req(Some("y"), &[], &["c"])).unwrap();
        assert_eq!(out.names(), vec!["y"]);
        assert_eq!(rec.columns[0].flag, ScaleFlag::Constant);
        assert_eq!(rec.warnings.len(), 1);
        // dependent is centered, not scaled
        let expected = [-4.0 / 3.0, -1.0 / 3.0, 5.0 / 3.0];
        for (a, b) in out.numeric("y").unwrap().iter().zip(expected) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn destandardize_closed_forms() {
        let rec = StandardizationRecord {
            columns: vec![ColumnScaling {
                name: "x".into(),
                mean: 1.0,
                scale: 2.0,
                flag: ScaleFlag::Standardized,
            }],
            response: Some(ColumnScaling {
                name: "y".into(),
                mean: 3.0,
                scale: 1.0,
                flag: ScaleFlag::Centered,
            }),
            warnings: vec![],
        };
        let (b, c) = destandardize(&DVector::from_vec(vec![1.0]), &rec).unwrap();
        assert_eq!(b[0], 0.5);
        assert_eq!(c, 2.5);
        let (b, c) = destandardize(&DVector::from_vec(vec![0.0]), &rec).unwrap();
        assert_eq!((b[0], c), (0.0, 3.0));
        assert!(destandardize(&DVector::from_vec(vec![0.0, 1.0]), &rec).is_err());
    }
}

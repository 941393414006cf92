use std::collections::BTreeSet;

use super::{Column, Dataset};
use crate::error::{Error, Result};

/// Replace `column` by binary indicator columns `<column>_<level>`, one per
/// distinct level in lexicographic order. With `drop_reference` the first
/// level is omitted. Missing cells stay missing in every indicator.
pub fn one_hot_encode(ds: &Dataset, column: &str, drop_reference: bool) -> Result<Dataset> {
    let at = ds
        .index_of(column)
        .ok_or_else(|| Error::UnknownColumn(column.to_string()))?;
    let data = &ds.columns()[at].data;
    let labels: Vec<Option<String>> = (0..ds.n_rows()).map(|r| data.label(r)).collect();
    let levels: BTreeSet<&str> = labels.iter().flatten().map(String::as_str).collect();
    if levels.len() < 2 {
        return Err(Error::ConstantColumn(column.to_string()));
    }
    let skip = usize::from(drop_reference);
    let mut dummies = Vec::with_capacity(levels.len() - skip);
    for level in levels.iter().skip(skip) {
        let name = format!("{column}_{level}");
        if ds.index_of(&name).is_some_and(|i| i != at) {
            return Err(Error::DuplicateColumn(name));
        }
        let values = labels
            .iter()
            .map(|l| match l {
                None => f64::NAN,
                Some(l) if l == level => 1.0,
                Some(_) => 0.0,
            })
            .collect();
        dummies.push(Column::numeric(name, values));
    }
    let mut out = ds.clone();
    out.replace_columns(at, 1, dummies);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gender() -> Dataset {
        Dataset::new(vec![
            Column::categorical("g", vec![Some("M"), Some("F"), Some("M"), Some("F")]),
            Column::numeric("y", vec![1.0, 2.0, 3.0, 4.0]),
        ])
        .unwrap()
    }

    #[test]
    fn full_encoding_rows_sum_to_one() {
        let out = one_hot_encode(&gender(), "g", false).unwrap();
        assert_eq!(out.names(), vec!["g_F", "g_M", "y"]);
        let f = out.numeric("g_F").unwrap();
        let m = out.numeric("g_M").unwrap();
        assert!(f.iter().zip(m).all(|(a, b)| a + b == 1.0));
    }

    #[test]
    fn drop_reference_keeps_later_levels() {
        let out = one_hot_encode(&gender(), "g", true).unwrap();
        assert_eq!(out.names(), vec!["g_M", "y"]);
        assert_eq!(out.numeric("g_M").unwrap(), &[1.0, 0.0, 1.0, 0.0]);
    }

    #[test]
    fn single_level_is_constant() {
        let ds = Dataset::new(vec![Column::categorical("g", vec![Some("a"), Some("a")])]).unwrap();
        assert!(matches!(
            one_hot_encode(&ds, "g", false),
            Err(Error::ConstantColumn(_))
        ));
    }

    #[test]
    fn name_collision() {
        let ds = Dataset::new(vec![
            Column::categorical("g", vec![Some("a"), Some("b")]),
            Column::numeric("g_a", vec![0.0, 1.0]),
        ])
        .unwrap();
        assert!(matches!(
            one_hot_encode(&ds, "g", false),
            Err(Error::DuplicateColumn(_))
        ));
    }

    #[test]
    fn numeric_codes_are_levels() {
        let ds = Dataset::from_numeric(vec![("k", vec![1.0, 2.0, 3.0, 1.0])]).unwrap();
        let out = one_hot_encode(&ds, "k", false).unwrap();
        assert_eq!(out.names(), vec!["k_1", "k_2", "k_3"]);
    }
}

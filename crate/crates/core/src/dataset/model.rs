use std::collections::HashMap;

use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum EstimationKind {
    Lasso,
    Ridge,
    Path,
    Pds,
    Chs,
    IvLasso,
}

impl EstimationKind {
    pub fn needs_regressor_of_interest(self) -> bool {
        matches!(self, EstimationKind::Pds | EstimationKind::Chs | EstimationKind::IvLasso)
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct ModelOptions {
    pub robust: bool,
    pub cluster: Option<String>,
    pub fe: bool,
    pub seed: u64,
}

/// Role assignment for every column used by an estimation.
///
/// Regressors of interest are the endogenous variables followed by the
/// unpenalized focal variables; see [`ModelSpec::treatments`].
#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct ModelSpec {
    pub dependent: String,
    pub focal_unpenalized: Vec<String>,
    pub auxiliary_penalized: Vec<String>,
    pub hd_controls_penalized: Vec<String>,
    pub endogenous: Vec<String>,
    pub instruments_penalized: Vec<String>,
    pub instruments_unpenalized: Vec<String>,
    pub amelioration_set: Vec<String>,
    pub partial_out: Vec<String>,
    pub options: ModelOptions,
}

impl ModelSpec {
    /// Regressors whose coefficients are reported: endogenous first, then focal.
    pub fn treatments(&self) -> Vec<String> {
        self.endogenous
            .iter()
            .chain(&self.focal_unpenalized)
            .cloned()
            .collect()
    }

    /// Controls exposed to selection.
    pub fn penalized_controls(&self) -> Vec<String> {
        self.auxiliary_penalized
            .iter()
            .chain(&self.hd_controls_penalized)
            .cloned()
            .collect()
    }

    pub fn instruments(&self) -> Vec<String> {
        self.instruments_penalized
            .iter()
            .chain(&self.instruments_unpenalized)
            .cloned()
            .collect()
    }

    fn roles(&self) -> [(&'static str, &[String]); 8] {
        [
            ("focal", &self.focal_unpenalized),
            ("auxiliary", &self.auxiliary_penalized),
            ("hd_controls", &self.hd_controls_penalized),
            ("endogenous", &self.endogenous),
            ("instruments", &self.instruments_penalized),
            ("unpenalized instruments", &self.instruments_unpenalized),
            ("aset", &self.amelioration_set),
            ("partial", &self.partial_out),
        ]
    }

    /// Every column the estimation reads, including identifiers.
    pub fn referenced_columns(&self) -> Vec<String> {
        let mut out = vec![self.dependent.clone()];
        for (_, list) in self.roles() {
            out.extend(list.iter().cloned());
        }
        out.extend(self.options.cluster.iter().cloned());
        out
    }

    /// Check role disjointness and the requirements of `kind`. When `header`
    /// is given every referenced name must be present in it.
    pub fn validate(&self, kind: EstimationKind, header: Option<&[String]>) -> Result<()> {
        if self.dependent.is_empty() {
            return Err(Error::InvalidModel("missing dependent variable".into()));
        }
        let mut owner: HashMap<&str, &str> = HashMap::new();
        owner.insert(&self.dependent, "dependent");
        for (role, list) in self.roles() {
            for name in list {
                if let Some(prev) = owner.insert(name, role) {
                    return Err(Error::InvalidModel(format!(
                        "{name:?} assigned to both {prev} and {role}"
                    )));
                }
            }
        }
        if !self.endogenous.is_empty() && self.instruments().is_empty() {
            return Err(Error::InvalidModel(
                "endogenous variables given without instruments".into(),
            ));
        }
        if self.endogenous.is_empty() && !self.instruments().is_empty() {
            return Err(Error::InvalidModel(
                "instruments given without endogenous variables".into(),
            ));
        }
        if kind.needs_regressor_of_interest() && self.treatments().is_empty() {
            return Err(Error::InvalidModel(
                "at least one unpenalized regressor of interest is required".into(),
            ));
        }
        if matches!(kind, EstimationKind::Pds | EstimationKind::Chs) && !self.endogenous.is_empty()
        {
            return Err(Error::InvalidModel(
                "endogenous regressors require the ivlasso estimator".into(),
            ));
        }
        if let Some(header) = header {
            for name in self.referenced_columns() {
                if !header.contains(&name) {
                    return Err(Error::UnknownColumn(name));
                }
            }
        }
        Ok(())
    }
}

//! The estimation pipeline behind every subcommand: load, resolve roles,
//! panel transform, tune, select, estimate, report.

use hdselect_core::dataset::{
    destandardize, load_csv, one_hot_encode, standardize, Dataset, EstimationKind, LoadOptions,
    ModelSpec, ModelOptions, ScaleFlag, StandardizeRequest,
};
use hdselect_core::inference::{chs_estimate, pds_estimate, pds_select, ChsVariant, HdDesign};
use hdselect_core::ivhds::{iv_lasso, FirstStage, IvDesign};
use hdselect_core::linalg::{independent_columns, ols, partial_out, partial_out_vec};
use hdselect_core::panelfx::{first_difference, within_transform, PanelIndex};
use hdselect_core::postsel::post_lasso_ols;
use hdselect_core::solver::{fit_ridge, regularization_path, FitOptions, PathGrid, PenaltyConfig};
use hdselect_core::tuning::{tune_and_fit, Criterion, LoadingMode, RigorousOptions, Tuner, TunerConfig};
use hdselect_core::{Block, SeMode};
use nalgebra::DVector;

use crate::config::{Command, FirstStageChoice, PostMethod, RunConfig, TuneChoice};
use crate::error::{CliError, CliResult};
use crate::grammar::{expand_list, parse_model};
use crate::report::{
    method_name, CoefRow, PanelInfo, PathPointReport, PathReport, Provenance, Report, StepReport,
    SCHEMA_VERSION,
};

/// Data and roles after loading, listwise deletion and any panel transform.
struct Prepared {
    ds: Dataset,
    spec: ModelSpec,
    n_dropped: usize,
    panel: Option<PanelInfo>,
    intercept: bool,
    absorbed_dof: usize,
    cluster: Option<Vec<usize>>,
    warnings: Vec<String>,
}

fn kind(c: Command) -> EstimationKind {
    match c {
        Command::Lasso => EstimationKind::Lasso,
        Command::Ridge => EstimationKind::Ridge,
        Command::Path => EstimationKind::Path,
        Command::Pds => EstimationKind::Pds,
        Command::Chs => EstimationKind::Chs,
        Command::Ivlasso => EstimationKind::IvLasso,
    }
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

fn check_flags(config: &RunConfig) -> CliResult<()> {
    if config.fe && config.fd {
        return Err(usage("--fe and --fd are mutually exclusive"));
    }
    if (config.fe || config.fd) && config.panel.is_none() {
        return Err(usage("--fe and --fd need --panel"));
    }
    if config.fd && config.time.is_none() {
        return Err(usage("--fd needs --time"));
    }
    if let Some(l) = config.lambda {
        if !(l >= 0.0 && l.is_finite()) {
            return Err(usage(format!("--lambda must be a finite nonnegative number, got {l}")));
        }
    }
    if config.command == Command::Ridge && config.lambda.is_none() {
        return Err(usage("ridge needs --lambda"));
    }
    if config.command == Command::Chs && config.post == Some(PostMethod::Pds) {
        return Err(usage("chs takes --post chs-lasso or chs-post"));
    }
    Ok(())
}

fn prepare(config: &RunConfig) -> CliResult<Prepared> {
    check_flags(config)?;
    let mut categorical = config.dummies.clone();
    categorical.extend(config.panel.iter().cloned());
    categorical.extend(config.cluster.iter().cloned());
    let options = LoadOptions {
        categorical,
        ..Default::default()
    };
    let mut ds = load_csv(&config.data, &options)?;
    for d in &config.dummies {
        ds = one_hot_encode(&ds, d, false)?;
    }
    let header = ds.names();

    let mut spec = parse_model(&config.model, &header)?;
    for name in expand_list(&config.pnotpen, &header)? {
        if let Some(at) = spec.instruments_penalized.iter().position(|z| *z == name) {
            spec.instruments_penalized.remove(at);
            spec.instruments_unpenalized.push(name);
        } else if !spec.partial_out.contains(&name) {
            spec.partial_out.push(name);
        }
    }
    for name in expand_list(&config.partial, &header)? {
        if !spec.partial_out.contains(&name) {
            spec.partial_out.push(name);
        }
    }
    spec.amelioration_set = expand_list(&config.aset, &header)?;
    spec.options = ModelOptions {
        robust: config.robust,
        cluster: config.cluster.clone(),
        fe: config.fe,
        seed: config.seed,
    };
    spec.validate(kind(config.command), Some(&header))?;
    if matches!(config.command, Command::Lasso | Command::Ridge | Command::Path) {
        if !spec.endogenous.is_empty() {
            return Err(usage("endogenous regressors require the ivlasso command"));
        }
        if spec.penalized_controls().is_empty() {
            return Err(usage("no penalized regressors; list them in parentheses"));
        }
    }
    for id in config.panel.iter().chain(&config.time) {
        if !header.contains(id) {
            return Err(hdselect_core::Error::UnknownColumn(id.clone()).into());
        }
    }

    let mut needed = spec.referenced_columns();
    needed.extend(config.panel.iter().cloned());
    needed.extend(config.time.iter().cloned());
    let (mut ds, n_dropped) = ds.drop_missing(&needed)?;
    let mut warnings = Vec::new();
    if n_dropped > 0 {
        warnings.push(format!("{n_dropped} row(s) with missing values dropped"));
    }

    let numeric: Vec<String> = spec
        .referenced_columns()
        .into_iter()
        .filter(|c| Some(c) != config.cluster.as_ref())
        .collect();
    let mut panel = None;
    let mut intercept = true;
    let mut absorbed_dof = 0;
    if let Some(pid) = &config.panel {
        if config.fe || config.fd {
            let idx = PanelIndex::new(&ds, pid, config.time.as_deref())?;
            let rows_before = ds.n_rows();
            let t = if config.fe {
                intercept = false;
                within_transform(&ds, &idx, &numeric)?
            } else {
                first_difference(&ds, &idx, &numeric, config.allow_gaps)?
            };
            if config.fe {
                absorbed_dof = t.n_groups;
            }
            warnings.extend(t.warnings.iter().cloned());
            panel = Some(PanelInfo {
                method: if config.fe { "fe" } else { "fd" }.into(),
                panel: pid.clone(),
                groups: t.n_groups,
                rows_before,
            });
            ds = t.data;
        }
    }
    let cluster = match &config.cluster {
        Some(c) => Some(ds.group_codes(c)?),
        None => None,
    };
    Ok(Prepared {
        ds,
        spec,
        n_dropped,
        panel,
        intercept,
        absorbed_dof,
        cluster,
        warnings,
    })
}

fn tuner(config: &RunConfig, cluster: &Option<Vec<usize>>) -> TunerConfig {
    let tuner = match (config.lambda, config.tune) {
        (Some(l), _) => Tuner::Fixed(l),
        (None, TuneChoice::Rigorous) => Tuner::Rigorous(RigorousOptions {
            mode: match cluster {
                Some(c) => LoadingMode::Cluster(c.clone()),
                None => LoadingMode::Robust,
            },
            ..Default::default()
        }),
        (None, TuneChoice::Cv) => Tuner::Cv {
            folds: config.folds,
            seed: config.seed,
            grid: PathGrid::default(),
        },
        (None, ic) => Tuner::Ic {
            criterion: match ic {
                TuneChoice::Aic => Criterion::Aic,
                TuneChoice::Bic => Criterion::Bic,
                _ => Criterion::ebic(),
            },
            grid: PathGrid::default(),
        },
    };
    TunerConfig {
        tuner,
        fit: FitOptions::default(),
    }
}

fn se_mode(config: &RunConfig, cluster: &Option<Vec<usize>>) -> SeMode {
    match cluster {
        Some(c) => SeMode::Cluster(c.clone()),
        None if config.robust => SeMode::Robust,
        None => SeMode::Iid,
    }
}

fn block(ds: &Dataset, names: &[String]) -> CliResult<Block> {
    Ok(Block::new(names.to_vec(), ds.matrix(names)?)?)
}

pub fn run(config: &RunConfig) -> CliResult<Report> {
    let prep = prepare(config)?;
    let mut report = Report {
        schema_version: SCHEMA_VERSION,
        command: method_name(&config.command),
        estimator: String::new(),
        dependent: prep.spec.dependent.clone(),
        n_used: prep.ds.n_rows(),
        n_dropped_missing: prep.n_dropped,
        panel: prep.panel.clone(),
        se_mode: None,
        dof: None,
        coefficients: vec![],
        intercept: None,
        steps: vec![],
        union_controls: vec![],
        instruments: vec![],
        dropped_collinear: vec![],
        first_stage: vec![],
        path: None,
        warnings: prep.warnings.clone(),
        provenance: Provenance::new(config),
    };
    match config.command {
        Command::Lasso | Command::Ridge | Command::Path => run_penalized(config, &prep, &mut report)?,
        Command::Pds | Command::Chs => run_treatment(config, &prep, &mut report)?,
        Command::Ivlasso => run_iv(config, &prep, &mut report)?,
    }
    Ok(report)
}

fn run_penalized(config: &RunConfig, prep: &Prepared, report: &mut Report) -> CliResult<()> {
    let spec = &prep.spec;
    let ds = &prep.ds;
    let pen = spec.penalized_controls();
    let unpen: Vec<String> = spec
        .focal_unpenalized
        .iter()
        .chain(&spec.partial_out)
        .chain(&spec.amelioration_set)
        .cloned()
        .collect();
    let p = pen.len();
    let req = StandardizeRequest {
        dependent: Some(spec.dependent.clone()),
        penalized: pen.clone(),
        unpenalized: unpen.clone(),
    };
    let (sd, rec) = standardize(ds, &req)?;
    report.warnings.extend(rec.warnings.iter().cloned());

    // unpenalized columns enter through their projection; a collinear one
    // keeps a zero coefficient
    let live: Vec<usize> = (0..unpen.len())
        .filter(|&k| rec.columns[p + k].flag != ScaleFlag::Constant)
        .collect();
    let live_names: Vec<String> = live.iter().map(|&k| unpen[k].clone()).collect();
    let xu_live = sd.matrix(&live_names)?;
    let keep = independent_columns(&xu_live);
    for (i, name) in live_names.iter().enumerate() {
        if !keep.contains(&i) {
            report.dropped_collinear.push(name.clone());
            report.warnings.push(format!("unpenalized column {name:?} is collinear and dropped"));
        }
    }
    let used: Vec<usize> = keep.iter().map(|&i| live[i]).collect();
    let xu = xu_live.select_columns(&keep);
    let xp = sd.matrix(&pen)?;
    let yc = sd.vector(&spec.dependent)?;
    let xt = partial_out(&xu, &xp)?;
    let yt = partial_out_vec(&xu, &yc)?;

    let assemble = |b_pen: &DVector<f64>| -> CliResult<(DVector<f64>, f64)> {
        let bu = ols(&xu, &(&yc - &xp * b_pen))?;
        let mut full = DVector::zeros(p + unpen.len());
        full.rows_mut(0, p).copy_from(b_pen);
        for (i, &k) in used.iter().enumerate() {
            full[p + k] = bu[i];
        }
        Ok(destandardize(&full, &rec)?)
    };

    match config.command {
        Command::Lasso => {
            let tuning = tuner(config, &prep.cluster);
            let (fit, tr) = tune_and_fit(&xt, &yt, &tuning)?;
            if !fit.converged {
                report.warnings.push("lasso did not converge".into());
            }
            let (orig, intercept) = assemble(&fit.coefficients)?;
            let post = {
                let raw = ds.matrix(&pen.iter().chain(&unpen).cloned().collect::<Vec<_>>())?;
                let y = ds.vector(&spec.dependent)?;
                let always: Vec<usize> = used.iter().map(|&k| p + k).collect();
                match post_lasso_ols(&raw, &y, &fit.active_set, &always) {
                    Ok(f) => Some(f.coefficients),
                    Err(e) => {
                        report.warnings.push(format!("post-lasso refit skipped: {e}"));
                        None
                    }
                }
            };
            let order = (p..p + unpen.len()).chain(0..p);
            for j in order {
                if j < p && !config.full && fit.coefficients[j] == 0.0 {
                    continue;
                }
                let name = if j < p { &pen[j] } else { &unpen[j - p] };
                let mut row = CoefRow::point(name.clone(), orig[j]);
                row.post_estimate = post.as_ref().map(|b| b[j]);
                report.coefficients.push(row);
            }
            report.intercept = prep.intercept.then_some(intercept);
            report.estimator = "lasso".into();
            report.steps.push(StepReport {
                step: "lasso".into(),
                target: spec.dependent.clone(),
                selected: fit.active_set.iter().map(|&j| pen[j].clone()).collect(),
                s: fit.sparsity(ds.n_rows()).s,
                method: method_name(&tr.method),
                lambda: tr.chosen_lambda,
                loadings: tr.loadings.clone(),
                iterations: fit.iterations,
                converged: fit.converged,
            });
            if !fit.sparsity(ds.n_rows()).sparse {
                report
                    .warnings
                    .push("selected model is not sparse relative to p and N".into());
            }
        }
        Command::Ridge => {
            let lambda = config.lambda.expect("checked in check_flags");
            let b = fit_ridge(&xt, &yt, &PenaltyConfig::uniform(lambda, p)?)?;
            let (orig, intercept) = assemble(&b)?;
            for j in (p..p + unpen.len()).chain(0..p) {
                let name = if j < p { &pen[j] } else { &unpen[j - p] };
                report.coefficients.push(CoefRow::point(name.clone(), orig[j]));
            }
            report.intercept = prep.intercept.then_some(intercept);
            report.estimator = "ridge".into();
        }
        _ => {
            let path = regularization_path(&xt, &yt, &vec![1.0; p], &PathGrid::default(), &FitOptions::default())?;
            let mut points = Vec::with_capacity(path.points.len());
            for pt in &path.points {
                let (orig, _) = assemble(&pt.fit.coefficients)?;
                let coefs: Vec<f64> = orig.rows(0, p).iter().copied().collect();
                points.push(PathPointReport {
                    lambda: pt.lambda,
                    s: pt.fit.active_set.len(),
                    l1_norm: pt.fit.coefficients.iter().map(|b| b.abs()).sum(),
                    coefficients: coefs,
                });
            }
            report.estimator = "lasso-path".into();
            report.path = Some(PathReport { names: pen.clone(), points });
        }
    }
    Ok(())
}

fn steps_from(
    tuning: &[hdselect_core::inference::StepTuning],
    step1: &[String],
    step2: &[hdselect_core::inference::TreatmentSelection],
    instruments: &[hdselect_core::inference::TreatmentSelection],
) -> Vec<StepReport> {
    tuning
        .iter()
        .map(|t| {
            let selected = if t.step == "step 1" {
                step1.to_vec()
            } else {
                let find = |list: &[hdselect_core::inference::TreatmentSelection]| {
                    list.iter()
                        .find(|s| s.treatment == t.target)
                        .map(|s| s.controls.clone())
                        .unwrap_or_default()
                };
                let mut v = find(step2);
                v.extend(find(instruments));
                v
            };
            StepReport::from_tuning(t, selected)
        })
        .collect()
}

fn design(prep: &Prepared) -> CliResult<HdDesign> {
    let spec = &prep.spec;
    let ds = &prep.ds;
    let mut d = HdDesign::new(
        ds.vector(&spec.dependent)?,
        block(ds, &spec.focal_unpenalized)?,
        block(ds, &spec.penalized_controls())?,
    );
    d.y_name = spec.dependent.clone();
    d.unpenalized = block(ds, &spec.partial_out)?;
    d.aset = block(ds, &spec.amelioration_set)?;
    d.intercept = prep.intercept;
    d.absorbed_dof = prep.absorbed_dof;
    Ok(d)
}

fn push_coefficients(
    report: &mut Report,
    coefs: &[hdselect_core::inference::Coefficient],
    treatments: &[String],
    full: bool,
) {
    for c in coefs {
        if full || treatments.contains(&c.name) {
            report
                .coefficients
                .push(CoefRow::inferential(c.name.clone(), c.estimate, c.std_error));
        }
    }
}

fn run_treatment(config: &RunConfig, prep: &Prepared, report: &mut Report) -> CliResult<()> {
    let des = design(prep)?;
    let tuning = tuner(config, &prep.cluster);
    let se = se_mode(config, &prep.cluster);
    let method = config.post.unwrap_or(match config.command {
        Command::Pds => PostMethod::Pds,
        _ => PostMethod::ChsPost,
    });
    report.estimator = method_name(&method);
    report.se_mode = Some(se.name().into());
    match method {
        PostMethod::Pds => {
            let sel = pds_select(&des, &tuning)?;
            let r = pds_estimate(&des, &sel, &se)?;
            push_coefficients(report, &r.coefficients, &r.treatments, config.full);
            report.steps = steps_from(&r.tuning, &r.selected_step1, &r.selected_step2, &[]);
            report.union_controls = r.union_controls;
            report.dropped_collinear.extend(r.dropped_collinear);
            report.dof = Some(r.dof);
            report.warnings.extend(r.warnings);
        }
        PostMethod::ChsLasso | PostMethod::ChsPost => {
            let variant = if method == PostMethod::ChsLasso {
                ChsVariant::LassoOrthogonalized
            } else {
                ChsVariant::PostLassoOrthogonalized
            };
            let r = chs_estimate(&des, variant, &tuning, &se)?;
            for ((name, a), s) in r.treatments.iter().zip(&r.alpha).zip(&r.std_errors) {
                report.coefficients.push(CoefRow::inferential(name.clone(), *a, *s));
            }
            report.steps = steps_from(&r.tuning, &r.selected_step1, &r.selected_step2, &[]);
            report.union_controls = r.union_controls;
            report.dof = Some(r.dof);
            report.warnings.extend(r.warnings);
        }
    }
    Ok(())
}

fn run_iv(config: &RunConfig, prep: &Prepared, report: &mut Report) -> CliResult<()> {
    let spec = &prep.spec;
    let ds = &prep.ds;
    let mut des = IvDesign::new(
        ds.vector(&spec.dependent)?,
        block(ds, &spec.endogenous)?,
        block(ds, &spec.instruments_penalized)?,
    );
    des.y_name = spec.dependent.clone();
    des.exogenous = block(ds, &spec.focal_unpenalized)?;
    des.controls = block(ds, &spec.penalized_controls())?;
    des.unpenalized = block(ds, &spec.partial_out)?;
    des.aset = block(ds, &spec.amelioration_set)?;
    des.instruments_unpenalized = block(ds, &spec.instruments_unpenalized)?;
    des.intercept = prep.intercept;
    des.absorbed_dof = prep.absorbed_dof;

    let tuning = tuner(config, &prep.cluster);
    let se = se_mode(config, &prep.cluster);
    let fs = match config.first_stage {
        FirstStageChoice::PostLasso => FirstStage::PostLasso,
        FirstStageChoice::Lasso => FirstStage::LassoFitted,
    };
    let r = iv_lasso(&des, &tuning, &se, fs)?;
    report.estimator = r.estimator.clone();
    report.se_mode = Some(se.name().into());
    push_coefficients(report, &r.coefficients, &r.treatments, config.full);
    report.steps = steps_from(&r.tuning, &r.selected_step1, &r.selected_step2, &r.selected_instruments);
    report.union_controls = r.union_controls;
    report.instruments = r.instruments;
    report.dropped_collinear = r.dropped_collinear;
    report.first_stage = r.first_stage;
    report.dof = Some(r.dof);
    report.warnings.extend(r.warnings);
    Ok(())
}

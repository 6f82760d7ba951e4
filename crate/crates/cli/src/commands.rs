//! Subcommand implementations.

use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;

use enetpath::cox::survival_curve;
use enetpath::eval::{assess as assess_measures, confusion_matrix, roc_curve};
use enetpath::family::{self, GlmFamily};
use enetpath::io::write_atomic;
use enetpath::relaxed::DEFAULT_GAMMA;
use enetpath::{
    cv_fit, fit_path, fit_relaxed, CvOptions, Error, Family, FitOptions, LambdaSpec, Measure, ModelDocument,
    ModelFamily, PenaltySpec, PredictType, Response, Result,
};
use serde_json::json;

use crate::ingest::{ingest_csv, ingest_response, read_columns, Dataset, IngestSpec, ResponseSpec};
use crate::{AssessArgs, CvArgs, DataArgs, FitArgs, ModelArgs, PredictArgs, PredictKind, SurvcurveArgs};

pub fn kind_of(e: &Error) -> &'static str {
    match e {
        Error::Empty(_) => "empty-input",
        Error::Dimension { .. } => "dimension",
        Error::OutOfRange { .. } => "out-of-range",
        Error::NonFinite(_) => "non-finite",
        Error::InvalidWeights(_) => "invalid-weights",
        Error::InvalidSparse(_) => "invalid-sparse",
        Error::InvalidPenalty(_) => "invalid-penalty",
        Error::InvalidFamily(_) => "invalid-family",
        Error::InvalidResponse { .. } => "invalid-response",
        Error::InvalidLambda(_) => "invalid-lambda",
        Error::UndefinedLambdaMax(_) => "undefined-lambda-max",
        Error::InvalidSurvival(_) => "invalid-survival",
        Error::NoFailures => "no-failures",
        Error::InvalidArgument(_) => "invalid-argument",
        Error::CrossValidation(_) => "cross-validation",
        Error::Format(_) => "model-format",
        Error::Csv { .. } => "csv",
        Error::Io(_) => "io",
        Error::Json(_) => "json",
    }
}

pub fn report(kind: &str, message: &str) {
    eprintln!("{}", json!({ "error": { "kind": kind, "message": message.trim_end() } }));
}

fn warn(message: &str) {
    eprintln!("{}", json!({ "warning": message }));
}

fn set_threads(threads: Option<usize>) -> Result<()> {
    if let Some(n) = threads {
        if n == 0 {
            return Err(Error::InvalidArgument("--threads must be positive".into()));
        }
        // a pool may already exist when called twice in one process
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    Ok(())
}

fn split_names(text: &str) -> Vec<String> {
    text.split(',').map(|t| t.trim().to_string()).collect()
}

fn parse_list(text: &str, what: &str) -> Result<Vec<f64>> {
    text.split(',')
        .map(str::trim)
        .map(|t| {
            t.parse::<f64>()
                .map_err(|_| Error::InvalidArgument(format!("{what}: {t:?} is not a number")))
        })
        .collect()
}

/// A scalar broadcast to `p` values or a list of length `p`.
fn per_feature(text: &str, p: usize, what: &str) -> Result<Vec<f64>> {
    let v: Vec<f64> = text
        .split(',')
        .map(str::trim)
        .map(|t| match t.to_ascii_lowercase().as_str() {
            "inf" | "+inf" => Ok(f64::INFINITY),
            "-inf" => Ok(f64::NEG_INFINITY),
            _ => t
                .parse::<f64>()
                .map_err(|_| Error::InvalidArgument(format!("{what}: {t:?} is not a number"))),
        })
        .collect::<Result<_>>()?;
    match v.len() {
        1 => Ok(vec![v[0]; p]),
        len if len == p => Ok(v),
        len => Err(Error::InvalidArgument(format!(
            "{what} has {len} values for {p} features"
        ))),
    }
}

fn penalty_spec(m: &ModelArgs, p: usize) -> Result<PenaltySpec> {
    let mut spec = PenaltySpec::new(p)
        .with_alpha(m.alpha)
        .with_standardize(!m.no_standardize)
        .with_intercept(!m.no_intercept);
    if let Some(f) = &m.penalty_factors {
        let f = parse_list(f, "--penalty-factors")?;
        if f.len() != p {
            return Err(Error::InvalidArgument(format!(
                "--penalty-factors has {} values for {p} features",
                f.len()
            )));
        }
        spec = spec.with_penalty_factors(f);
    }
    if let Some(l) = &m.lower {
        spec = spec.with_lower(per_feature(l, p, "--lower")?);
    }
    if let Some(u) = &m.upper {
        spec = spec.with_upper(per_feature(u, p, "--upper")?);
    }
    Ok(spec)
}

fn fit_options(m: &ModelArgs) -> Result<FitOptions> {
    let lambda = match &m.lambda {
        Some(l) => LambdaSpec::Explicit(parse_list(l, "--lambda")?),
        None => LambdaSpec::Auto {
            nlambda: m.nlambda,
            min_ratio: m.lambda_min_ratio,
        },
    };
    Ok(FitOptions::default().with_lambda(lambda))
}

enum Target {
    Glm(Arc<dyn GlmFamily>),
    Cox,
}

fn parse_family(name: Option<&str>, survival: bool) -> Result<Target> {
    match name {
        Some("cox") => Ok(Target::Cox),
        Some(f) => Ok(Target::Glm(Family::from_str(f)?.into_shared())),
        None if survival => Ok(Target::Cox),
        None => Ok(Target::Glm(Family::gaussian().into_shared())),
    }
}

struct ResponseFlags<'a> {
    response: Option<&'a str>,
    time: Option<&'a str>,
    status: Option<&'a str>,
    start: Option<&'a str>,
}

fn response_spec(flags: &ResponseFlags<'_>, target: &Target) -> Result<ResponseSpec> {
    match target {
        Target::Cox => match (flags.time, flags.status) {
            (Some(t), Some(s)) => Ok(ResponseSpec::Survival {
                time: t.to_string(),
                status: s.to_string(),
                start: flags.start.map(str::to_string),
            }),
            _ => Err(Error::InvalidArgument(
                "Cox models need --time (or --stop) and --status".into(),
            )),
        },
        Target::Glm(_) => flags
            .response
            .map(|r| ResponseSpec::Column(r.to_string()))
            .ok_or_else(|| Error::InvalidArgument("--response is required".into())),
    }
}

fn make_response(target: Target, y: Option<Vec<f64>>, surv: Option<enetpath::SurvivalResponse>) -> Result<Response> {
    match target {
        Target::Glm(f) => Ok(Response::glm(
            y.ok_or_else(|| Error::InvalidArgument("missing response".into()))?,
            f,
        )),
        Target::Cox => Ok(Response::Cox(
            surv.ok_or_else(|| Error::InvalidArgument("missing survival response".into()))?,
        )),
    }
}

fn load_training(d: &DataArgs, m: &ModelArgs) -> Result<(Dataset, Response)> {
    let target = parse_family(m.family.as_deref(), d.time.is_some())?;
    let flags = ResponseFlags {
        response: d.response.as_deref(),
        time: d.time.as_deref(),
        status: d.status.as_deref(),
        start: d.start.as_deref(),
    };
    let spec = IngestSpec {
        response: response_spec(&flags, &target)?,
        strata: d.strata.clone(),
        weights: d.weights.clone(),
        features: d.features.as_deref().map(split_names),
        ignore: d.ignore.as_deref().map(split_names).unwrap_or_default(),
        sparse: d.sparse,
    };
    let mut ds = ingest_csv(&d.data, &spec)?;
    let response = make_response(target, ds.y.take(), ds.survival.take())?;
    Ok((ds, response))
}

fn cox_hazards(doc: ModelDocument, fit: &enetpath::PathFit, ds: &Dataset, response: &Response) -> Result<ModelDocument> {
    match response {
        Response::Cox(surv) => doc.with_cox_hazards(fit, &ds.x, surv, &ds.weights),
        Response::Glm { .. } => Ok(doc),
    }
}

pub fn fit(a: FitArgs) -> Result<()> {
    set_threads(a.model.threads)?;
    let (ds, response) = load_training(&a.data, &a.model)?;
    let penalty = penalty_spec(&a.model, ds.x.n_cols())?;
    let opts = fit_options(&a.model)?;
    let doc = if a.relax {
        let r = fit_relaxed(&ds.x, &response, &ds.weights, &penalty, &opts)?;
        r.warnings.iter().for_each(|w| warn(w));
        let doc = ModelDocument::from_fit(&r.base, Some(ds.feature_names.clone()))?.with_relaxed(&r, &DEFAULT_GAMMA);
        cox_hazards(doc, &r.base, &ds, &response)?
    } else {
        let fit = fit_path(&ds.x, &response, &ds.weights, &penalty, &opts)?;
        if fit.diagnostics.truncated {
            warn("the path stopped early because a fit failed");
        }
        let doc = ModelDocument::from_fit(&fit, Some(ds.feature_names.clone()))?;
        cox_hazards(doc, &fit, &ds, &response)?
    };
    doc.save(&a.out)
}

fn csv_bytes(header: &[String], rows: impl IntoIterator<Item = Vec<String>>) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let ioerr = |e: csv::Error| Error::Io(std::io::Error::other(e));
    w.write_record(header).map_err(ioerr)?;
    for r in rows {
        w.write_record(&r).map_err(ioerr)?;
    }
    w.into_inner().map_err(|e| Error::Io(std::io::Error::other(e.to_string())))
}

fn emit(out: Option<&Path>, bytes: &[u8]) -> Result<()> {
    match out {
        Some(p) => write_atomic(p, bytes),
        None => {
            use std::io::Write;
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(bytes)?;
            stdout.flush()?;
            Ok(())
        }
    }
}

fn plot_path(out: &Path) -> PathBuf {
    out.with_extension("plot.csv")
}

pub fn cv(a: CvArgs) -> Result<()> {
    set_threads(a.model.threads)?;
    let (ds, response) = load_training(&a.data, &a.model)?;
    let penalty = penalty_spec(&a.model, ds.x.n_cols())?;
    let opts = fit_options(&a.model)?;
    let gamma = match &a.gamma {
        Some(g) => parse_list(g, "--gamma")?,
        None => DEFAULT_GAMMA.to_vec(),
    };
    let cv_opts = CvOptions {
        nfolds: a.nfolds,
        measure: a.measure.as_deref().map(Measure::from_str).transpose()?,
        seed: a.seed,
        fold_ids: None,
        keep: a.keep,
        relax: a.relax,
        gamma: gamma.clone(),
    };
    let result = cv_fit(&ds.x, &response, &ds.weights, &penalty, &opts, &cv_opts)?;
    if let Some(r) = &result.relaxed_fit {
        r.warnings.iter().for_each(|w| warn(w));
    }
    if !result.cv.skipped_folds.is_empty() {
        warn(&format!("skipped degenerate folds {:?}", result.cv.skipped_folds));
    }

    let cv = &result.cv;
    let mut header = vec!["log_lambda", "cvm", "cvlo", "cvup", "nzero"];
    let mut rows = Vec::new();
    match &cv.relaxed {
        None => {
            for k in 0..cv.lambda.len() {
                rows.push(vec![
                    cv.lambda[k].ln().to_string(),
                    cv.cvm[k].to_string(),
                    (cv.cvm[k] - cv.cvsd[k]).to_string(),
                    (cv.cvm[k] + cv.cvsd[k]).to_string(),
                    cv.nzero[k].to_string(),
                ]);
            }
        }
        Some(r) => {
            header.insert(0, "gamma");
            for (g, &gv) in r.gamma.iter().enumerate() {
                for k in 0..cv.lambda.len() {
                    rows.push(vec![
                        gv.to_string(),
                        cv.lambda[k].ln().to_string(),
                        r.cvm[g][k].to_string(),
                        (r.cvm[g][k] - r.cvsd[g][k]).to_string(),
                        (r.cvm[g][k] + r.cvsd[g][k]).to_string(),
                        cv.nzero[k].to_string(),
                    ]);
                }
            }
        }
    }
    let header: Vec<String> = header.into_iter().map(String::from).collect();
    let plot = csv_bytes(&header, rows)?;

    let doc = match &a.model_out {
        Some(_) => {
            let mut doc = ModelDocument::from_fit(&result.fit, Some(ds.feature_names.clone()))?.with_cv(cv);
            if let Some(r) = &result.relaxed_fit {
                doc = doc.with_relaxed(r, &gamma);
            }
            Some(cox_hazards(doc, &result.fit, &ds, &response)?)
        }
        None => None,
    };

    let mut text = serde_json::to_string_pretty(cv)?;
    text.push('\n');
    write_atomic(&a.out, text.as_bytes())?;
    write_atomic(&a.plot.clone().unwrap_or_else(|| plot_path(&a.out)), &plot)?;
    if let (Some(path), Some(doc)) = (&a.model_out, doc) {
        doc.save(path)?;
    }
    Ok(())
}

/// One output column: λ, optional γ and its header.
struct Column {
    s: f64,
    gamma: Option<f64>,
    label: String,
}

/// Resolves `--s` and `--gamma` against a model.
fn columns(doc: &ModelDocument, s: Option<&str>, gamma: Option<&str>) -> Result<Vec<Column>> {
    let explicit_gamma = gamma.map(|g| parse_list(g, "--gamma")).transpose()?;
    if explicit_gamma.is_some() && doc.relaxed.is_none() {
        return Err(Error::InvalidArgument("--gamma requires a relaxed model".into()));
    }
    // (λ, γ implied by the alias)
    let mut points: Vec<(f64, Option<f64>)> = Vec::new();
    let items: Vec<String> = match s {
        Some(s) => s.split(',').map(|t| t.trim().to_string()).collect(),
        None if doc.cv.is_some() => vec!["lambda.1se".into()],
        None => doc.lambda.iter().map(|l| l.to_string()).collect(),
    };
    for item in &items {
        let cv = doc.cv.as_ref();
        let need_cv = || Error::InvalidArgument(format!("{item} requires a cross-validated model"));
        points.push(match item.as_str() {
            "lambda.min" => {
                let c = cv.ok_or_else(need_cv)?;
                (c.lambda_min, c.gamma_min)
            }
            "lambda.1se" => {
                let c = cv.ok_or_else(need_cv)?;
                (c.lambda_1se, c.gamma_1se)
            }
            "lambda.max" => (doc.lambda[0], None),
            t => (
                t.parse::<f64>()
                    .map_err(|_| Error::InvalidArgument(format!("--s: {t:?} is neither a number nor an alias")))?,
                None,
            ),
        });
    }
    let mut out = Vec::new();
    for (s, implied) in points {
        let gammas: Vec<Option<f64>> = match (&explicit_gamma, implied) {
            (Some(g), _) => g.iter().map(|&v| Some(v)).collect(),
            (None, Some(g)) if doc.relaxed.is_some() => vec![Some(g)],
            _ => vec![None],
        };
        for g in gammas {
            let label = match g {
                Some(g) => format!("s={s};gamma={g}"),
                None => format!("s={s}"),
            };
            out.push(Column { s, gamma: g, label });
        }
    }
    Ok(out)
}

fn predict_type(kind: PredictKind) -> PredictType {
    match kind {
        PredictKind::Link => PredictType::Link,
        PredictKind::Response => PredictType::Response,
        PredictKind::Class => PredictType::Class,
    }
}

/// Predictions per column for the rows of `x`.
fn predict_columns(
    doc: &ModelDocument,
    x: &enetpath::FeatureMatrix,
    cols: &[Column],
    kind: PredictType,
) -> Result<Vec<Vec<f64>>> {
    let fit = doc.to_fit()?;
    let relaxed = doc.to_relaxed()?;
    let mut out = Vec::with_capacity(cols.len());
    let mut clamped = false;
    for c in cols {
        let p = match (c.gamma, &relaxed) {
            (Some(g), Some(r)) => r.predict(x, &[c.s], g, kind)?,
            _ => fit.predict(x, &[c.s], kind)?,
        };
        clamped |= p.clamped[0];
        out.push(p.values.into_iter().next().expect("one column requested"));
    }
    if clamped {
        warn("some requested s values lie outside the fitted path and were clamped to its ends");
    }
    Ok(out)
}

fn load_features(doc: &ModelDocument, data: &Path, sparse: bool, strata: Option<String>) -> Result<Dataset> {
    ingest_csv(
        data,
        &IngestSpec {
            response: ResponseSpec::None,
            strata,
            weights: None,
            features: Some(doc.feature_names.clone()),
            ignore: Vec::new(),
            sparse,
        },
    )
}

fn prediction_table(labels: &[String], values: &[Vec<f64>]) -> Result<Vec<u8>> {
    let n = values.first().map_or(0, |v| v.len());
    let mut header = vec!["row".to_string()];
    header.extend(labels.iter().cloned());
    csv_bytes(
        &header,
        (0..n).map(|i| {
            let mut r = vec![i.to_string()];
            r.extend(values.iter().map(|c| c[i].to_string()));
            r
        }),
    )
}

pub fn predict(a: PredictArgs) -> Result<()> {
    let doc = ModelDocument::load(&a.model)?;
    let ds = load_features(&doc, &a.data, a.sparse, None)?;
    let cols = columns(&doc, a.s.as_deref(), a.gamma.as_deref())?;
    let values = predict_columns(&doc, &ds.x, &cols, predict_type(a.kind))?;
    let labels: Vec<String> = cols.iter().map(|c| c.label.clone()).collect();
    emit(a.out.as_deref(), &prediction_table(&labels, &values)?)
}

pub fn assess(a: AssessArgs) -> Result<()> {
    let flags = ResponseFlags {
        response: a.response.as_deref(),
        time: a.time.as_deref(),
        status: a.status.as_deref(),
        start: a.start.as_deref(),
    };
    let (labels, eta, response, weights) = if let Some(model) = &a.model {
        let doc = ModelDocument::load(model)?;
        let data = a
            .data
            .as_ref()
            .ok_or_else(|| Error::InvalidArgument("--data is required with --model".into()))?;
        let target = match doc.to_fit()?.family {
            ModelFamily::Cox => Target::Cox,
            ModelFamily::Glm(f) => Target::Glm(f),
        };
        let spec = IngestSpec {
            response: response_spec(&flags, &target)?,
            strata: a.strata.clone(),
            weights: a.weights.clone(),
            features: Some(doc.feature_names.clone()),
            ignore: Vec::new(),
            sparse: a.sparse,
        };
        let mut ds = ingest_csv(data, &spec)?;
        let cols = columns(&doc, a.s.as_deref(), a.gamma.as_deref())?;
        let eta = predict_columns(&doc, &ds.x, &cols, PredictType::Link)?;
        let response = make_response(target, ds.y.take(), ds.survival.take())?;
        (cols.into_iter().map(|c| c.label).collect::<Vec<_>>(), eta, response, ds.weights)
    } else {
        let preds = a
            .predictions
            .as_ref()
            .ok_or_else(|| Error::InvalidArgument("assess needs --model or --predictions".into()))?;
        let target = parse_family(a.family.as_deref(), false)?;
        let spec = IngestSpec {
            response: response_spec(&flags, &target)?,
            strata: a.strata.clone(),
            weights: a.weights.clone(),
            features: None,
            ignore: Vec::new(),
            sparse: false,
        };
        let data = a.data.as_deref().unwrap_or(preds);
        let (y, surv, _, weights) = ingest_response(data, &spec)?;
        let (names, cols) = read_columns(preds, None)?;
        let mut used = vec!["row".to_string()];
        if a.data.is_none() {
            used.extend(
                [&a.response, &a.time, &a.status, &a.start, &a.strata, &a.weights]
                    .into_iter()
                    .flatten()
                    .cloned(),
            );
        }
        let keep: Vec<String> = names.into_iter().filter(|n| !used.contains(n)).collect();
        let (labels, eta) = if keep.len() == cols.len() {
            (keep, cols)
        } else {
            read_columns(preds, Some(&keep))?
        };
        if eta.is_empty() {
            return Err(Error::Empty("prediction columns"));
        }
        (labels, eta, make_response(target, y, surv)?, weights)
    };

    let measures = assess_measures(&eta, &response, weights.as_slice())?;
    let report = json!({
        "family": response.model_family().name(),
        "columns": labels,
        "measures": measures
            .iter()
            .map(|(m, v)| json!({ "measure": m.as_str(), "values": v }))
            .collect::<Vec<_>>(),
    });

    if let Response::Glm { y, family } = &response {
        if a.confusion || a.roc.is_some() {
            if !family.is_binary() {
                return Err(Error::InvalidArgument(
                    "confusion tables and ROC curves need a binary family".into(),
                ));
            }
            let truth: Vec<f64> = y.iter().map(|&v| if v > 0.5 { 1.0 } else { 0.0 }).collect();
            if a.confusion {
                for (label, e) in labels.iter().zip(&eta) {
                    let mu = family::link_inverse(family.as_ref(), e);
                    let class: Vec<f64> = mu.iter().map(|&m| if m >= 0.5 { 1.0 } else { 0.0 }).collect();
                    println!("{label}\n{}", confusion_matrix(&class, &truth)?);
                }
            }
            if let Some(path) = &a.roc {
                let labels_bool: Vec<bool> = truth.iter().map(|&t| t == 1.0).collect();
                let roc = roc_curve(&eta[0], &labels_bool)?;
                let header = ["fpr", "tpr", "threshold"].map(String::from);
                let rows = (0..roc.fpr.len()).map(|k| {
                    vec![
                        roc.fpr[k].to_string(),
                        roc.tpr[k].to_string(),
                        roc.thresholds[k].to_string(),
                    ]
                });
                write_atomic(path, &csv_bytes(&header, rows)?)?;
            }
        }
    } else if a.confusion || a.roc.is_some() {
        return Err(Error::InvalidArgument(
            "confusion tables and ROC curves need a binary family".into(),
        ));
    }

    let mut text = serde_json::to_string_pretty(&report)?;
    text.push('\n');
    emit(a.out.as_deref(), text.as_bytes())
}

pub fn survcurve(a: SurvcurveArgs) -> Result<()> {
    let doc = ModelDocument::load(&a.model)?;
    let fit = doc.to_fit()?;
    if !fit.family.is_cox() {
        return Err(Error::InvalidArgument("survival curves need a Cox model".into()));
    }
    let s = match a.s.as_deref() {
        Some(text) => match columns(&doc, Some(text), None)?.as_slice() {
            [c] => c.s,
            _ => return Err(Error::InvalidArgument("survcurve takes a single --s value".into())),
        },
        None if doc.cv.is_some() => columns(&doc, Some("lambda.1se"), None)?[0].s,
        None => *doc.lambda.last().expect("validated path"),
    };
    let ds = load_features(&doc, &a.data, a.sparse, a.strata.clone())?;
    let hazard = doc.hazard_at(s)?;
    let curves = survival_curve(&fit, s, &hazard, &ds.x, ds.strata.as_deref())?;
    let header = ["time", "survival", "stratum", "row"].map(String::from);
    let rows = curves.iter().flat_map(|c| {
        c.times.iter().zip(&c.survival).map(move |(t, sv)| {
            vec![t.to_string(), sv.to_string(), c.stratum.clone(), c.row.to_string()]
        })
    });
    emit(a.out.as_deref(), &csv_bytes(&header, rows)?)
}

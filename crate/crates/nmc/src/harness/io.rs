//! File formats: datasets as CSV with a typed header row plus a sidecar
//! JSON (shapes, hyperparameters, generated ground truth), posterior
//! samples as one CSV per node (header = flattened coordinate names), a
//! metrics CSV and a summary JSON.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::distributions::Value;
use crate::engine::Trace;
use crate::linalg::{Matrix, Vector};
use crate::models::{
    AnnotationData, AnnotationItem, AnnotationTruth, BlrData, BlrTruth, Dataset, Hyperparams,
    ModelName, ModelSpec, RobustData, RobustTruth, Sizes,
};

use super::{samples_to_convergence, ExperimentOutput, HarnessError, Summary};

#[derive(Debug, Default, Serialize, Deserialize)]
struct SidecarTruth {
    #[serde(skip_serializing_if = "Option::is_none")]
    alpha: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    beta: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    nu: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    sigma: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pi: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    theta: Option<Vec<Vec<Vec<f64>>>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    true_z_train: Option<Vec<i64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    true_z_heldout: Option<Vec<i64>>,
}

#[derive(Debug, Serialize, Deserialize)]
struct Sidecar {
    model: ModelName,
    sizes: Sizes,
    hyperparams: Hyperparams,
    n_train: usize,
    n_heldout: usize,
    truth: SidecarTruth,
}

pub fn write_dataset(dir: &Path, spec: &ModelSpec, dataset: &Dataset) -> Result<(), HarnessError> {
    fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
    let (n_train, n_heldout, truth) = match dataset {
        Dataset::Funnel => (0, 0, SidecarTruth::default()),
        Dataset::Blr {
            train,
            heldout,
            truth,
        } => {
            write_xy_csv(&dir.join("train.csv"), &train.x, XyColumn::Int(&train.y))?;
            write_xy_csv(
                &dir.join("heldout.csv"),
                &heldout.x,
                XyColumn::Int(&heldout.y),
            )?;
            (
                train.len(),
                heldout.len(),
                SidecarTruth {
                    alpha: Some(truth.alpha),
                    beta: Some(truth.beta.iter().copied().collect()),
                    ..SidecarTruth::default()
                },
            )
        }
        Dataset::Robust {
            train,
            heldout,
            truth,
        } => {
            write_xy_csv(&dir.join("train.csv"), &train.x, XyColumn::Real(&train.y))?;
            write_xy_csv(
                &dir.join("heldout.csv"),
                &heldout.x,
                XyColumn::Real(&heldout.y),
            )?;
            (
                train.len(),
                heldout.len(),
                SidecarTruth {
                    alpha: Some(truth.alpha),
                    beta: Some(truth.beta.iter().copied().collect()),
                    nu: Some(truth.nu),
                    sigma: Some(truth.sigma),
                    ..SidecarTruth::default()
                },
            )
        }
        Dataset::Annotation {
            train,
            heldout,
            truth,
        } => {
            write_items_csv(&dir.join("train.csv"), &train.items)?;
            write_items_csv(&dir.join("heldout.csv"), &heldout.items)?;
            (
                train.len(),
                heldout.len(),
                SidecarTruth {
                    pi: Some(truth.pi.iter().copied().collect()),
                    theta: Some(
                        truth
                            .theta
                            .iter()
                            .map(|rows| {
                                rows.iter()
                                    .map(|row| row.iter().copied().collect())
                                    .collect()
                            })
                            .collect(),
                    ),
                    true_z_train: Some(train.true_z.clone()),
                    true_z_heldout: Some(heldout.true_z.clone()),
                    ..SidecarTruth::default()
                },
            )
        }
    };
    let sidecar = Sidecar {
        model: spec.name,
        sizes: spec.sizes,
        hyperparams: spec.hyperparams,
        n_train,
        n_heldout,
        truth,
    };
    write_json(&dir.join("dataset.json"), &sidecar)
}

pub fn load_dataset(dir: &Path) -> Result<(ModelSpec, Dataset), HarnessError> {
    let sidecar_path = dir.join("dataset.json");
    let text = fs::read_to_string(&sidecar_path).map_err(|e| HarnessError::io(&sidecar_path, e))?;
    let sidecar: Sidecar = serde_json::from_str(&text)
        .map_err(|e| HarnessError::malformed(&sidecar_path, e.to_string()))?;
    let spec = ModelSpec {
        name: sidecar.model,
        sizes: sidecar.sizes,
        hyperparams: sidecar.hyperparams,
    };
    let dataset = match sidecar.model {
        ModelName::Funnel => Dataset::Funnel,
        ModelName::Blr => {
            let (x_train, y_train) = read_xy_csv(&dir.join("train.csv"), spec.sizes.k)?;
            let (x_held, y_held) = read_xy_csv(&dir.join("heldout.csv"), spec.sizes.k)?;
            Dataset::Blr {
                train: BlrData {
                    x: x_train,
                    y: y_train.iter().map(|v| *v as i64).collect(),
                },
                heldout: BlrData {
                    x: x_held,
                    y: y_held.iter().map(|v| *v as i64).collect(),
                },
                truth: BlrTruth {
                    alpha: sidecar.truth.alpha.unwrap_or(f64::NAN),
                    beta: Vector::from_vec(sidecar.truth.beta.clone().unwrap_or_default()),
                },
            }
        }
        ModelName::Robust => {
            let (x_train, y_train) = read_xy_csv(&dir.join("train.csv"), spec.sizes.k)?;
            let (x_held, y_held) = read_xy_csv(&dir.join("heldout.csv"), spec.sizes.k)?;
            Dataset::Robust {
                train: RobustData {
                    x: x_train,
                    y: Vector::from_vec(y_train),
                },
                heldout: RobustData {
                    x: x_held,
                    y: Vector::from_vec(y_held),
                },
                truth: RobustTruth {
                    nu: sidecar.truth.nu.unwrap_or(f64::NAN),
                    sigma: sidecar.truth.sigma.unwrap_or(f64::NAN),
                    alpha: sidecar.truth.alpha.unwrap_or(f64::NAN),
                    beta: Vector::from_vec(sidecar.truth.beta.clone().unwrap_or_default()),
                },
            }
        }
        ModelName::Annotation => {
            let items_train = read_items_csv(&dir.join("train.csv"))?;
            let items_held = read_items_csv(&dir.join("heldout.csv"))?;
            let truth = AnnotationTruth {
                pi: Vector::from_vec(sidecar.truth.pi.clone().unwrap_or_default()),
                theta: sidecar
                    .truth
                    .theta
                    .clone()
                    .unwrap_or_default()
                    .into_iter()
                    .map(|rows| rows.into_iter().map(Vector::from_vec).collect())
                    .collect(),
            };
            Dataset::Annotation {
                train: AnnotationData {
                    items: items_train,
                    true_z: sidecar.truth.true_z_train.clone().unwrap_or_default(),
                },
                heldout: AnnotationData {
                    items: items_held,
                    true_z: sidecar.truth.true_z_heldout.clone().unwrap_or_default(),
                },
                truth,
            }
        }
    };
    Ok((spec, dataset))
}

enum XyColumn<'a> {
    Int(&'a [i64]),
    Real(&'a Vector),
}

fn write_xy_csv(path: &Path, x: &Matrix, y: XyColumn<'_>) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    let mut header: Vec<String> = (0..x.ncols()).map(|j| format!("x{j}:real")).collect();
    header.push(match y {
        XyColumn::Int(_) => "y:int".to_string(),
        XyColumn::Real(_) => "y:real".to_string(),
    });
    w.write_record(&header).map_err(|e| csv_err(path, e))?;
    for i in 0..x.nrows() {
        let mut row: Vec<String> = (0..x.ncols()).map(|j| format!("{}", x[(i, j)])).collect();
        row.push(match y {
            XyColumn::Int(ys) => format!("{}", ys[i]),
            XyColumn::Real(ys) => format!("{}", ys[i]),
        });
        w.write_record(&row).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| HarnessError::io(path, e))
}

fn read_xy_csv(path: &Path, k: usize) -> Result<(Matrix, Vec<f64>), HarnessError> {
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_err(path, e))?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for record in r.records() {
        let record = record.map_err(|e| csv_err(path, e))?;
        if record.len() != k + 1 {
            return Err(HarnessError::malformed(
                path,
                format!("expected {} columns, found {}", k + 1, record.len()),
            ));
        }
        let row: Result<Vec<f64>, _> = record.iter().map(str::parse::<f64>).collect();
        rows.push(row.map_err(|e| HarnessError::malformed(path, e.to_string()))?);
    }
    let n = rows.len();
    let x = Matrix::from_fn(n, k, |i, j| rows[i][j]);
    let y = rows.iter().map(|row| row[k]).collect();
    Ok((x, y))
}

fn write_items_csv(path: &Path, items: &[AnnotationItem]) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    w.write_record(["item:int", "labeler:int", "label:int"])
        .map_err(|e| csv_err(path, e))?;
    for (i, item) in items.iter().enumerate() {
        for (&l, &y) in item.labelers.iter().zip(&item.labels) {
            w.write_record(&[format!("{i}"), format!("{l}"), format!("{y}")])
                .map_err(|e| csv_err(path, e))?;
        }
    }
    w.flush().map_err(|e| HarnessError::io(path, e))
}

fn read_items_csv(path: &Path) -> Result<Vec<AnnotationItem>, HarnessError> {
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_err(path, e))?;
    let mut items: Vec<AnnotationItem> = Vec::new();
    for record in r.records() {
        let record = record.map_err(|e| csv_err(path, e))?;
        let parse = |s: &str| {
            s.parse::<i64>()
                .map_err(|e| HarnessError::malformed(path, e.to_string()))
        };
        let item = parse(&record[0])? as usize;
        let labeler = parse(&record[1])? as usize;
        let label = parse(&record[2])?;
        if item >= items.len() {
            items.resize_with(item + 1, || AnnotationItem {
                labelers: Vec::new(),
                labels: Vec::new(),
            });
        }
        items[item].labelers.push(labeler);
        items[item].labels.push(label);
    }
    Ok(items)
}

/// Flattened coordinate names for one node, matching `Value::coords`.
fn coordinate_header(name: &str, v: &Value) -> Vec<String> {
    match v {
        Value::Real(_) => vec![format!("{name}:real")],
        Value::Int(_) => vec![format!("{name}:int")],
        Value::RealVec(xs) => (0..xs.len()).map(|i| format!("{name}_{i}:real")).collect(),
        Value::RealMat(xs) => (0..xs.len()).map(|i| format!("{name}_{i}:real")).collect(),
        Value::IntVec(xs) => (0..xs.len()).map(|i| format!("{name}_{i}:int")).collect(),
    }
}

/// One CSV per traced node, under `dir/trace/`.
pub fn write_trace(dir: &Path, trace: &Trace) -> Result<(), HarnessError> {
    let trace_dir = dir.join("trace");
    fs::create_dir_all(&trace_dir).map_err(|e| HarnessError::io(&trace_dir, e))?;
    for (i, name) in trace.node_names.iter().enumerate() {
        let path = trace_dir.join(format!("{name}.csv"));
        let mut w = csv::Writer::from_path(&path).map_err(|e| csv_err(&path, e))?;
        let header = coordinate_header(name, &trace.samples[i][0]);
        w.write_record(&header).map_err(|e| csv_err(&path, e))?;
        for v in &trace.samples[i] {
            let row: Vec<String> = match v {
                Value::Int(x) => vec![format!("{x}")],
                Value::IntVec(xs) => xs.iter().map(|x| format!("{x}")).collect(),
                other => other.coords().iter().map(|x| format!("{x}")).collect(),
            };
            w.write_record(&row).map_err(|e| csv_err(&path, e))?;
        }
        w.flush().map_err(|e| HarnessError::io(&path, e))?;
    }
    Ok(())
}

/// Rebuild a minimal trace (names and samples only) from `dir/trace/*.csv`.
pub fn read_trace(dir: &Path) -> Result<Trace, HarnessError> {
    let trace_dir = dir.join("trace");
    let mut names: Vec<String> = Vec::new();
    let entries = fs::read_dir(&trace_dir).map_err(|e| HarnessError::io(&trace_dir, e))?;
    for entry in entries {
        let entry = entry.map_err(|e| HarnessError::io(&trace_dir, e))?;
        let path = entry.path();
        if path.extension().is_some_and(|e| e == "csv") {
            names.push(
                path.file_stem()
                    .and_then(|s| s.to_str())
                    .ok_or_else(|| HarnessError::malformed(&path, "bad file name"))?
                    .to_string(),
            );
        }
    }
    names.sort();
    let mut samples: Vec<Vec<Value>> = Vec::with_capacity(names.len());
    let mut num_samples = 0usize;
    for name in &names {
        let path = trace_dir.join(format!("{name}.csv"));
        let mut r = csv::Reader::from_path(&path).map_err(|e| csv_err(&path, e))?;
        let header = r.headers().map_err(|e| csv_err(&path, e))?.clone();
        let ints: Vec<bool> = header.iter().map(|h| h.ends_with(":int")).collect();
        let mut node_samples = Vec::new();
        for record in r.records() {
            let record = record.map_err(|e| csv_err(&path, e))?;
            let v = if record.len() == 1 && ints[0] {
                Value::Int(
                    record[0]
                        .parse()
                        .map_err(|e: std::num::ParseIntError| {
                            HarnessError::malformed(&path, e.to_string())
                        })?,
                )
            } else if record.len() == 1 {
                Value::Real(record[0].parse().map_err(|e: std::num::ParseFloatError| {
                    HarnessError::malformed(&path, e.to_string())
                })?)
            } else if ints[0] {
                let xs: Result<Vec<i64>, _> = record.iter().map(str::parse::<i64>).collect();
                Value::IntVec(xs.map_err(|e| HarnessError::malformed(&path, e.to_string()))?)
            } else {
                let xs: Result<Vec<f64>, _> = record.iter().map(str::parse::<f64>).collect();
                Value::RealVec(Vector::from_vec(
                    xs.map_err(|e| HarnessError::malformed(&path, e.to_string()))?,
                ))
            };
            node_samples.push(v);
        }
        num_samples = node_samples.len();
        samples.push(node_samples);
    }
    let n = names.len();
    Ok(Trace {
        node_ids: (0..n).collect(),
        node_names: names,
        samples,
        log_density: vec![0.0; num_samples],
        elapsed_seconds: vec![0.0; num_samples],
        accept_counts: vec![0; n],
        proposal_counts: vec![0; n],
        fallback_counts: vec![0; n],
        sweep_accepts: vec![0; num_samples],
        sweep_fallbacks: vec![0; num_samples],
        min_acceptance_prob: f64::NAN,
    })
}

/// Per-sweep metrics: sample index, cumulative seconds, running predictive
/// log-likelihood, cumulative acceptance rate, cumulative fallback count.
pub fn write_metrics(
    path: &Path,
    trace: &Trace,
    predictive: Option<&[f64]>,
) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    w.write_record(["sample", "seconds", "predictive_ll", "acceptance_rate", "fallbacks"])
        .map_err(|e| csv_err(path, e))?;
    let steps_per_sweep = trace.node_names.len().max(1) as f64;
    let mut accepted = 0u64;
    let mut fallbacks = 0u64;
    for t in 0..trace.num_samples() {
        accepted += trace.sweep_accepts.get(t).copied().unwrap_or(0);
        fallbacks += trace.sweep_fallbacks.get(t).copied().unwrap_or(0);
        let rate = accepted as f64 / (steps_per_sweep * (t + 1) as f64);
        let pred = predictive.map_or(f64::NAN, |p| p[t]);
        w.write_record(&[
            format!("{}", t + 1),
            format!("{}", trace.elapsed_seconds.get(t).copied().unwrap_or(0.0)),
            format!("{pred}"),
            format!("{rate}"),
            format!("{fallbacks}"),
        ])
        .map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| HarnessError::io(path, e))
}

/// Columns of a metrics CSV, as written by [`write_metrics`].
pub struct MetricsTable {
    pub sample: Vec<usize>,
    pub seconds: Vec<f64>,
    pub predictive_ll: Vec<f64>,
    pub acceptance_rate: Vec<f64>,
    pub fallbacks: Vec<u64>,
}

pub fn read_metrics(path: &Path) -> Result<MetricsTable, HarnessError> {
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_err(path, e))?;
    let mut table = MetricsTable {
        sample: Vec::new(),
        seconds: Vec::new(),
        predictive_ll: Vec::new(),
        acceptance_rate: Vec::new(),
        fallbacks: Vec::new(),
    };
    for record in r.records() {
        let record = record.map_err(|e| csv_err(path, e))?;
        let bad = |e: String| HarnessError::malformed(path, e);
        table
            .sample
            .push(record[0].parse().map_err(|e: std::num::ParseIntError| bad(e.to_string()))?);
        table
            .seconds
            .push(record[1].parse().map_err(|e: std::num::ParseFloatError| bad(e.to_string()))?);
        table
            .predictive_ll
            .push(record[2].parse().map_err(|e: std::num::ParseFloatError| bad(e.to_string()))?);
        table
            .acceptance_rate
            .push(record[3].parse().map_err(|e: std::num::ParseFloatError| bad(e.to_string()))?);
        table
            .fallbacks
            .push(record[4].parse().map_err(|e: std::num::ParseIntError| bad(e.to_string()))?);
    }
    Ok(table)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), HarnessError> {
    let text = serde_json::to_string_pretty(value)
        .map_err(|e| HarnessError::malformed(path, e.to_string()))?;
    fs::write(path, text + "\n").map_err(|e| HarnessError::io(path, e))
}

/// Summary JSON distilled from a metrics table (the `report` subcommand).
#[derive(Debug, Serialize, Deserialize)]
pub struct MetricsReport {
    pub num_samples: usize,
    pub total_seconds: f64,
    pub samples_to_convergence: Option<usize>,
    pub final_predictive_ll: Option<f64>,
    pub final_acceptance_rate: Option<f64>,
    pub fallback_count: u64,
}

pub fn report_from_metrics(table: &MetricsTable) -> MetricsReport {
    let has_predictive = table.predictive_ll.iter().all(|v| v.is_finite())
        && !table.predictive_ll.is_empty();
    MetricsReport {
        num_samples: table.sample.len(),
        total_seconds: table.seconds.last().copied().unwrap_or(0.0),
        samples_to_convergence: has_predictive.then(|| samples_to_convergence(&table.predictive_ll)),
        final_predictive_ll: has_predictive.then(|| *table.predictive_ll.last().expect("nonempty")),
        final_acceptance_rate: table.acceptance_rate.last().copied(),
        fallback_count: table.fallbacks.last().copied().unwrap_or(0),
    }
}

/// Write the trace CSVs, metrics CSV and summary JSON for one finished run.
pub fn write_run_outputs(dir: &Path, out: &ExperimentOutput) -> Result<(), HarnessError> {
    fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
    write_trace(dir, &out.trace)?;
    write_metrics(&dir.join("metrics.csv"), &out.trace, out.predictive.as_deref())?;
    write_json(&dir.join("summary.json"), &out.summary)?;
    Ok(())
}

pub fn read_summary(path: &Path) -> Result<Summary, HarnessError> {
    let text = fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| HarnessError::malformed(path, e.to_string()))
}

fn csv_err(path: &Path, e: csv::Error) -> HarnessError {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => HarnessError::io(path, io),
        other => HarnessError::malformed(path, format!("{other:?}")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::generate_and_split;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn roundtrip(spec: &ModelSpec) {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let dataset = generate_and_split(spec, &mut rng, 0.5).unwrap();
        let dir = std::env::temp_dir().join(format!(
            "nmc-io-test-{}-{}",
            spec.name,
            std::process::id()
        ));
        let _ = fs::remove_dir_all(&dir);
        write_dataset(&dir, spec, &dataset).unwrap();
        let (spec2, loaded) = load_dataset(&dir).unwrap();
        assert_eq!(spec2.name, spec.name);
        assert_eq!(spec2.sizes, spec.sizes);
        match (&dataset, &loaded) {
            (
                Dataset::Blr { train: a, heldout: ha, .. },
                Dataset::Blr { train: b, heldout: hb, .. },
            ) => {
                assert_eq!(a.y, b.y);
                assert_eq!(ha.y, hb.y);
                assert_eq!(a.x, b.x);
            }
            (
                Dataset::Robust { train: a, .. },
                Dataset::Robust { train: b, .. },
            ) => {
                assert_eq!(a.x, b.x);
                assert_eq!(a.y, b.y);
            }
            (
                Dataset::Annotation { train: a, heldout: ha, .. },
                Dataset::Annotation { train: b, heldout: hb, .. },
            ) => {
                assert_eq!(a.items, b.items);
                assert_eq!(ha.items, hb.items);
                assert_eq!(a.true_z, b.true_z);
            }
            other => panic!("mismatched dataset variants: {other:?}"),
        }
        let _ = fs::remove_dir_all(&dir);
    }

    #[test]
    fn blr_dataset_roundtrips_exactly() {
        let mut spec = ModelSpec::new(ModelName::Blr);
        spec.sizes.n = 20;
        spec.sizes.k = 3;
        roundtrip(&spec);
    }

    #[test]
    fn robust_dataset_roundtrips_exactly() {
        let mut spec = ModelSpec::new(ModelName::Robust);
        spec.sizes.n = 16;
        spec.sizes.k = 2;
        roundtrip(&spec);
    }

    #[test]
    fn annotation_dataset_roundtrips_exactly() {
        let mut spec = ModelSpec::new(ModelName::Annotation);
        spec.sizes.n = 12;
        spec.sizes.k = 4;
        spec.sizes.c = 3;
        roundtrip(&spec);
    }
}

use std::fs;
use std::path::{Path, PathBuf};

use gsnet::autodiff::GradCheckOptions;
use gsnet::data_io::{
    apply_protocol, descriptors_csv, descriptors_jsonl, graph_jsonl, read_cloud, synth_dataset, synth_parts,
    write_cloud, CloudFormat, DatasetSpec, ExperimentManifest, FileEntry, FileListSpec, JsonlLog, LabeledCloudSet,
    PartsSpec, Protocol, ShapeKind, SynthSpec, MANIFEST_FORMAT,
};
use gsnet::eigen_graph::{build_graph, descriptors_from_rows, knn_eigen, knn_euclidean};
use gsnet::net::{
    evaluate_classification, evaluate_segmentation, fit, network_grad_check, prepare_classification,
    prepare_segmentation, Checkpoint, GsNet, GscConfig, InputRecipe, Sample,
};
use gsnet::sampling::{self, covering_radius, gather_points, stride_select};
use gsnet::PointCloud;
use serde::Serialize;
use serde_json::{json, Value};

use crate::render::emit;
use crate::{
    DescriptorsArgs, DumpFormat, EvalArgs, Failure, FpsArgs, GradcheckArgs, InputArgs, KnnArgs, RobustnessArgs,
    SamplerArg, SplitArg, SynthArgs, TrainArgs,
};

type Outcome = Result<(), Failure>;

/// Tool, version, subcommand and every resolved argument.
fn header(command: &str, args: &impl Serialize, extra: Value) -> Value {
    let mut h = json!({
        "tool": "gsnet",
        "version": env!("CARGO_PKG_VERSION"),
        "command": command,
        "args": args,
    });
    if let Value::Object(map) = extra {
        h.as_object_mut().expect("object").extend(map);
    }
    h
}

fn read_input(a: &InputArgs) -> Result<(PointCloud, CloudFormat), Failure> {
    let format = match &a.input_format {
        Some(name) => CloudFormat::parse(name)?,
        None => CloudFormat::from_path(&a.input)?,
    };
    Ok((read_cloud(&a.input, format)?, format))
}

/// Neighbor counts must leave at least one non-neighbor: `1 <= k <= N-1`.
fn check_k(name: &str, k: usize, n: usize) -> Outcome {
    if k == 0 || k >= n {
        return Err(Failure::argument(format!("{name} = {k} must be between 1 and N-1 = {} (N = {n})", n.saturating_sub(1))));
    }
    Ok(())
}

fn write_output(out: Option<&Path>, text: &str) -> Outcome {
    match out {
        Some(path) => fs::write(path, text).map_err(|e| gsnet::Error::Io {
            path: path.to_path_buf(),
            source: e,
        })?,
        None => print!("{text}"),
    }
    Ok(())
}

fn create_dir(path: &Path) -> Outcome {
    fs::create_dir_all(path).map_err(|e| {
        gsnet::Error::Io {
            path: path.to_path_buf(),
            source: e,
        }
        .into()
    })
}

fn write_json(path: &Path, value: &Value) -> Outcome {
    let text = serde_json::to_string_pretty(value).map_err(gsnet::Error::from)?;
    write_output(Some(path), &(text + "\n"))
}

pub fn descriptors(a: &DescriptorsArgs) -> Outcome {
    let (cloud, format) = read_input(&a.input)?;
    check_k("k1", a.k1, cloud.len())?;
    if let Some(k2) = a.k2 {
        check_k("k2", k2, cloud.len())?;
    }
    let rows = knn_euclidean(&cloud, a.k1)?;
    let d = descriptors_from_rows(&cloud, &rows, false)?;
    let eigen = a.k2.map(|k2| knn_eigen(&d, k2)).transpose()?;
    let h = header("descriptors", a, json!({ "points": cloud.len(), "input_format": format }));
    let text = match a.format {
        DumpFormat::Csv => descriptors_csv(&h, &d, eigen.as_ref()),
        DumpFormat::Jsonl => descriptors_jsonl(&h, &d, eigen.as_ref()),
    };
    write_output(a.out.as_deref(), &text)
}

pub fn knn(a: &KnnArgs) -> Outcome {
    let (cloud, format) = read_input(&a.input)?;
    check_k("k1", a.k1, cloud.len())?;
    check_k("k2", a.k2, cloud.len())?;
    let (graph, d) = build_graph(&cloud, a.k1, a.k2)?;
    let h = header("knn", a, json!({ "points": cloud.len(), "input_format": format }));
    write_output(a.out.as_deref(), &graph_jsonl(&h, &d, &graph))
}

pub fn fps(a: &FpsArgs, pretty: bool) -> Outcome {
    let (cloud, format) = read_input(&a.input)?;
    let selection = match a.sampler {
        SamplerArg::Fps => sampling::fps(&cloud, a.m, a.seed_index)?,
        SamplerArg::Stride => stride_select(cloud.len(), a.m)?,
    };
    if let Some(path) = &a.points_out {
        write_cloud(&gather_points(&cloud, &selection)?, path, CloudFormat::Xyz)?;
    }
    let result = json!({
        "header": header("fps", a, json!({ "points": cloud.len(), "input_format": format })),
        "indices": selection.indices,
        "covering_radius": covering_radius(&cloud, &selection),
    });
    match &a.out {
        Some(path) => write_json(path, &result),
        None => {
            emit(&result, pretty);
            Ok(())
        }
    }
}

fn manifest_or_default(path: Option<&Path>) -> Result<(ExperimentManifest, PathBuf), Failure> {
    match path {
        Some(p) => Ok((
            ExperimentManifest::load(p)?,
            p.parent().map(Path::to_path_buf).unwrap_or_default(),
        )),
        None => Ok((ExperimentManifest::default(), PathBuf::from("."))),
    }
}

fn check_classes(net: &GsNet, set: &LabeledCloudSet) -> Outcome {
    let config = net.config();
    let (want, what) = match &config.segmentation {
        None => (config.classes, "classes"),
        Some(seg) => (seg.categories, "categories"),
    };
    if set.class_count() != want {
        return Err(gsnet::Error::InvalidData(format!(
            "dataset has {} classes but the model expects {want} {what}",
            set.class_count()
        ))
        .into());
    }
    Ok(())
}

fn prepare(net: &GsNet, set: &LabeledCloudSet) -> Result<Vec<Sample>, Failure> {
    check_classes(net, set)?;
    if net.is_segmentation() {
        if set.parts.is_none() {
            return Err(gsnet::Error::InvalidData("segmentation model needs a part-labeled dataset".into()).into());
        }
        Ok(prepare_segmentation(net, &set.segmentation_items())?)
    } else {
        Ok(prepare_classification(net, &set.classification_items())?)
    }
}

fn metrics(net: &GsNet, params: &gsnet::autodiff::ParamStore, samples: &[Sample], names: &[String]) -> gsnet::Result<Value> {
    if net.is_segmentation() {
        let m = evaluate_segmentation(net, params, samples)?;
        Ok(json!({
            "task": "segmentation",
            "count": samples.len(),
            "instance_miou": m.instance_miou,
            "class_miou": m.class_miou,
            "per_category_miou": names.iter().zip(&m.per_category_miou).map(|(n, v)| json!({"category": n, "miou": v})).collect::<Vec<_>>(),
            "point_accuracy": m.point_accuracy,
        }))
    } else {
        let m = evaluate_classification(net, params, samples)?;
        Ok(json!({
            "task": "classification",
            "count": m.count,
            "accuracy": m.accuracy,
            "per_class_accuracy": names.iter().zip(&m.per_class_accuracy).map(|(n, v)| json!({"class": n, "accuracy": v})).collect::<Vec<_>>(),
            "confusion": m.confusion,
        }))
    }
}

fn headline(m: &Value) -> f64 {
    m.get("accuracy").or_else(|| m.get("instance_miou")).and_then(Value::as_f64).unwrap_or(f64::NAN)
}

pub fn train(a: &TrainArgs, pretty: bool) -> Outcome {
    let (mut manifest, base) = manifest_or_default(a.manifest.as_deref())?;
    if let Some(e) = a.epochs {
        manifest.training.epochs = e;
    }
    let data = manifest.dataset(&base)?;
    let net = GsNet::new(manifest.model.clone())?;
    let train = prepare(&net, &data.train)?;
    let test = prepare(&net, &data.test)?;
    create_dir(&a.out_dir)?;
    manifest.save(a.out_dir.join("manifest.json"))?;

    let h = header("train", a, json!({ "manifest": manifest }));
    let mut log = JsonlLog::create(a.out_dir.join("log.jsonl"), &h)?;
    let mut params = net.init_params(manifest.init_seed);
    let names = &data.test.class_names;
    let history = fit(&net, &mut params, &train, &manifest.training, |record, p| {
        let m = metrics(&net, p, &test, names)?;
        log.record(&json!({
            "epoch": record.epoch,
            "step": record.step,
            "loss": record.loss,
            "train_accuracy": record.train_accuracy,
            "learning_rate": record.learning_rate,
            "test": headline(&m),
            "wall_time": record.wall_time,
        }))
    })?;
    let checkpoint = a.out_dir.join("checkpoint.json");
    Checkpoint::new(&net, &params)?.save(&checkpoint)?;
    let result = json!({
        "header": h,
        "epochs": history.len(),
        "final_loss": history.last().map(|r| r.loss),
        "test": metrics(&net, &params, &test, names)?,
        "checkpoint": checkpoint,
    });
    write_json(&a.out_dir.join("metrics.json"), &result)?;
    emit(&result, pretty);
    Ok(())
}

fn load_dataset(path: &Path) -> Result<gsnet::data_io::Dataset, Failure> {
    let text = fs::read_to_string(path).map_err(|e| gsnet::Error::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    let base = path.parent().unwrap_or(Path::new("."));
    let value: Value = serde_json::from_str(&text).map_err(gsnet::Error::from)?;
    if value.get("format").and_then(Value::as_str) == Some(MANIFEST_FORMAT) {
        Ok(ExperimentManifest::from_json(&text)?.dataset(base)?)
    } else {
        let spec: DatasetSpec = serde_json::from_value(value).map_err(gsnet::Error::from)?;
        Ok(spec.load(base)?)
    }
}

pub fn eval(a: &EvalArgs, pretty: bool) -> Outcome {
    let (net, params) = Checkpoint::load(&a.checkpoint)?.restore()?;
    let data = load_dataset(&a.dataset)?;
    let set = match a.split {
        SplitArg::Train => &data.train,
        SplitArg::Test => &data.test,
    };
    let samples = prepare(&net, set)?;
    let result = json!({
        "header": header("eval", a, json!({ "model": net.config() })),
        "metrics": metrics(&net, &params, &samples, &set.class_names)?,
    });
    emit(&result, pretty);
    Ok(())
}

pub fn robustness(a: &RobustnessArgs, pretty: bool) -> Outcome {
    let (mut manifest, base) = manifest_or_default(a.manifest.as_deref())?;
    if let Some(e) = a.epochs {
        manifest.training.epochs = e;
    }
    if manifest.model.segmentation.is_some() {
        return Err(Failure::argument("robustness runs need a classification manifest"));
    }
    let protocols = Protocol::parse_list(&a.protocols)?;
    let data = manifest.dataset.load(&base)?;
    let mut recipes = vec![manifest.model.recipe];
    if !recipes.contains(&InputRecipe::EigenOnly) {
        recipes.push(InputRecipe::EigenOnly);
    }
    let mut table: Vec<Vec<f64>> = vec![Vec::new(); recipes.len()];
    let base_net = GsNet::new(manifest.model.clone())?;
    for &protocol in &protocols {
        let rotated = apply_protocol(&data, protocol, manifest.protocol_seed);
        // hierarchies do not depend on the recipe
        let train = prepare(&base_net, &rotated.train)?;
        let test = prepare(&base_net, &rotated.test)?;
        for (row, &recipe) in table.iter_mut().zip(&recipes) {
            let net = GsNet::new(GscConfig {
                recipe,
                ..manifest.model.clone()
            })?;
            let mut params = net.init_params(manifest.init_seed);
            fit(&net, &mut params, &train, &manifest.training, |_, _| Ok(()))?;
            row.push(evaluate_classification(&net, &params, &test)?.accuracy);
        }
    }
    let rows: Vec<Value> = recipes
        .iter()
        .zip(&table)
        .map(|(r, accs)| {
            let mut row = serde_json::Map::new();
            row.insert("recipe".into(), json!(r.name()));
            for (p, acc) in protocols.iter().zip(accs) {
                row.insert(p.name().into(), json!(acc));
            }
            Value::Object(row)
        })
        .collect();
    let result = json!({
        "header": header("robustness", a, json!({ "manifest": manifest })),
        "protocols": protocols.iter().map(|p| p.name()).collect::<Vec<_>>(),
        "accuracy": rows,
    });
    emit(&result, pretty);
    Ok(())
}

fn write_set(dir: &Path, set: &LabeledCloudSet, tag: &str) -> Result<Vec<FileEntry>, Failure> {
    let sub = dir.join(tag);
    create_dir(&sub)?;
    let mut entries = Vec::with_capacity(set.len());
    for (i, (cloud, &label)) in set.clouds.iter().zip(&set.labels).enumerate() {
        let stem = format!("{i:04}_{}", set.class_names[label]);
        let rel = PathBuf::from(tag).join(format!("{stem}.xyz"));
        write_cloud(cloud, dir.join(&rel), CloudFormat::Xyz)?;
        if let Some(parts) = &set.parts {
            let text: String = parts[i].iter().map(|p| format!("{p}\n")).collect();
            write_output(Some(&sub.join(format!("{stem}.seg"))), &text)?;
        }
        entries.push(FileEntry {
            path: rel,
            label,
            format: Some(CloudFormat::Xyz),
        });
    }
    Ok(entries)
}

pub fn synth(a: &SynthArgs, pretty: bool) -> Outcome {
    let (spec, data) = if a.parts {
        if a.classes.is_some() {
            return Err(Failure::argument("--classes does not apply to --parts"));
        }
        let mut spec = PartsSpec {
            n_points: a.points,
            noise_sigma: a.sigma,
            seed: a.seed,
            ..PartsSpec::default()
        };
        if let Some(n) = a.per_class {
            spec.per_category = n;
        }
        let data = synth_parts(&spec)?;
        (DatasetSpec::Parts(spec), data)
    } else {
        let mut spec = SynthSpec {
            n_points: a.points,
            noise_sigma: a.sigma,
            seed: a.seed,
            ..SynthSpec::default()
        };
        if let Some(list) = &a.classes {
            spec.classes = list.split(',').map(|s| ShapeKind::parse(s.trim())).collect::<Result<_, _>>()?;
        }
        if let Some(n) = a.per_class {
            spec.per_class = n;
        }
        let data = synth_dataset(&spec)?;
        (DatasetSpec::Synthetic(spec), data)
    };
    let mut written = Value::Null;
    if let Some(dir) = &a.out_dir {
        create_dir(dir)?;
        let files = FileListSpec {
            class_names: data.train.class_names.clone(),
            train: write_set(dir, &data.train, "train")?,
            test: write_set(dir, &data.test, "test")?,
        };
        let path = dir.join("dataset.json");
        write_json(&path, &serde_json::to_value(DatasetSpec::Files(files)).map_err(gsnet::Error::from)?)?;
        written = json!(path);
    }
    let count = |s: &LabeledCloudSet| {
        (0..s.class_count())
            .map(|c| s.labels.iter().filter(|&&l| l == c).count())
            .collect::<Vec<_>>()
    };
    let result = json!({
        "header": header("synth", a, json!({ "spec": spec })),
        "class_names": data.train.class_names,
        "train_per_class": count(&data.train),
        "test_per_class": count(&data.test),
        "dataset_file": written,
    });
    emit(&result, pretty);
    Ok(())
}

fn gradcheck_samples(net: &GsNet, n_points: usize, count: usize, seed: u64) -> Result<Vec<Sample>, Failure> {
    let config = net.config();
    match &config.segmentation {
        None => {
            let kinds = ShapeKind::ALL.len().min(config.classes);
            let spec = SynthSpec {
                classes: ShapeKind::ALL[..kinds].to_vec(),
                n_points,
                per_class: count.div_ceil(kinds).max(5),
                seed,
                ..SynthSpec::default()
            };
            let items: Vec<_> = synth_dataset(&spec)?.train.classification_items().into_iter().take(count).collect();
            Ok(prepare_classification(net, &items)?)
        }
        Some(seg) => {
            let spec = PartsSpec {
                n_points,
                per_category: count.max(5),
                seed,
                ..PartsSpec::default()
            };
            let items: Vec<_> = synth_parts(&spec)?
                .train
                .segmentation_items()
                .into_iter()
                .take(count)
                .map(|(c, cat, parts)| (c, cat % seg.categories, parts.iter().map(|p| p % seg.parts).collect()))
                .collect();
            Ok(prepare_segmentation(net, &items)?)
        }
    }
}

pub fn gradcheck(a: &GradcheckArgs, pretty: bool) -> Outcome {
    if !(a.tolerance >= 0.0) || !(a.step > 0.0) || a.samples == 0 {
        return Err(Failure::argument("--tolerance must be >= 0, --step > 0 and --samples >= 1"));
    }
    let config = match &a.config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| gsnet::Error::Io {
                path: path.clone(),
                source: e,
            })?;
            serde_json::from_str::<GscConfig>(&text).map_err(gsnet::Error::from)?
        }
        None => GscConfig::toy(),
    };
    let net = GsNet::new(config)?;
    let mut params = net.init_params(a.seed);
    let samples = gradcheck_samples(&net, net.config().levels[0].points, a.samples, a.seed)?;
    let options = GradCheckOptions {
        step: a.step,
        ..GradCheckOptions::default()
    };
    let report = network_grad_check(&net, &mut params, &samples, a.seed, a.tolerance, options)?;
    let result = json!({
        "header": header("gradcheck", a, json!({ "model": net.config() })),
        "passed": report.passed,
        "max_rel_error": report.max_rel_error(),
        "params": report.params,
    });
    emit(&result, pretty);
    if report.passed {
        Ok(())
    } else {
        Err(Failure::numeric(format!(
            "gradient check failed: max relative error {:.3e} is not below {}",
            report.max_rel_error(),
            a.tolerance
        )))
    }
}

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use nntuck::io::{self, edge_list_tsv, save_report, CssDataset, DataFormat, ReportBundle};
use nntuck::model::{ModelDocument, ModelSpec, RegimeKind};
use nntuck::modelselect::{sweep, FoldMode, FoldPlan};
use nntuck::rng::GENERATOR;
use nntuck::stats::{run_test, SplitGranularity, TestKind, TestSpec};
use nntuck::synth::{binarize, PlantedScenario};
use nntuck::{analysis, fit, FitConfig, Mask3, ScaStrategy};
use serde_json::json;

use crate::args::{Command, DataArgs, EstimationArgs, SpecArgs};
use crate::manifest::{digest_inputs, RunManifest};
use crate::Failure;

type Outcome<T = ()> = Result<T, Failure>;

fn usage(msg: impl Into<String>) -> Failure {
    Failure::Usage(msg.into())
}

fn parse<T: std::str::FromStr<Err = nntuck::Error>>(raw: &str) -> Outcome<T> {
    raw.parse::<T>().map_err(Failure::Core)
}

pub fn run(command: &Command) -> Outcome {
    let started = Instant::now();
    let config = serde_json::to_value(command).map_err(|e| Failure::Core(e.into()))?;
    let (name, seed) = match command {
        Command::Fit(a) => ("fit", Some(a.estimation.seed)),
        Command::Sweep(a) => ("sweep", Some(a.estimation.seed)),
        Command::Test(a) => ("test", Some(a.estimation.seed)),
        Command::Relative(_) => ("relative", None),
        Command::Consensus(_) => ("consensus", None),
        Command::Simulate(_) => ("simulate", None),
    };
    let mut manifest = RunManifest::new(name, config, seed);
    let (out_dir, outputs) = match command {
        Command::Fit(a) => {
            prepare(&a.out)?;
            (&a.out, cmd_fit(a, &mut manifest)?)
        }
        Command::Sweep(a) => {
            prepare(&a.out)?;
            (&a.out, cmd_sweep(a, &mut manifest)?)
        }
        Command::Test(a) => {
            prepare(&a.out)?;
            (&a.out, cmd_test(a, &mut manifest)?)
        }
        Command::Relative(a) => {
            prepare(&a.out)?;
            (&a.out, cmd_relative(a, &mut manifest)?)
        }
        Command::Consensus(a) => {
            prepare(&a.out)?;
            (&a.out, cmd_consensus(a, &mut manifest)?)
        }
        Command::Simulate(a) => {
            prepare(&a.out)?;
            (&a.out, cmd_simulate(a, &mut manifest)?)
        }
    };
    manifest.finish(out_dir, &outputs, started.elapsed())?;
    Ok(())
}

fn prepare(out: &Path) -> Outcome {
    fs::create_dir_all(out).map_err(|e| Failure::io(out, e))
}

fn write(path: PathBuf, contents: &str) -> Outcome<PathBuf> {
    fs::write(&path, contents).map_err(|e| Failure::io(&path, e))?;
    Ok(path)
}

fn data_format(path: &Path, format: Option<&str>) -> Outcome<DataFormat> {
    match format {
        Some(f) => parse(f),
        None => Ok(DataFormat::infer(path)),
    }
}

fn input_paths(path: &Path, format: DataFormat) -> Vec<PathBuf> {
    let mut paths = vec![path.to_path_buf()];
    if format == DataFormat::LongTsv {
        paths.push(io::sidecar_path(path));
    }
    paths
}

fn load_data(d: &DataArgs, manifest: &mut RunManifest) -> Outcome<(CssDataset, Mask3)> {
    let format = data_format(&d.data, d.format.as_deref())?;
    let mut ds = io::load(&d.data, format)?;
    manifest.inputs = digest_inputs(&input_paths(&d.data, format))?;
    if d.binarize {
        ds.tensor = binarize(&ds.tensor);
    }
    let [n, _, l] = ds.tensor.dims();
    Ok((ds, Mask3::structural(n, l, d.include_diagonal)))
}

fn resolve_spec(s: &SpecArgs) -> Outcome<ModelSpec> {
    if let Some(raw) = &s.spec {
        let spec: ModelSpec = parse(raw)?;
        return Ok(if s.symmetric { spec.with_symmetric(true) } else { spec });
    }
    let regime: RegimeKind = parse(s.regime.as_deref().ok_or_else(|| usage("give --spec or --regime with --k"))?)?;
    let k = s.k.ok_or_else(|| usage("--k is required"))?;
    let spec = match (regime, s.c) {
        (RegimeKind::Dependent, Some(c)) => ModelSpec::dependent(k, c),
        (RegimeKind::Dependent, None) => return Err(usage("the dependent regime needs --c")),
        (RegimeKind::Sca, Some(c)) if c != k => return Err(usage("SCA ties C to K; drop --c or set it equal to --k")),
        (RegimeKind::Independent | RegimeKind::Redundant, Some(_)) => {
            return Err(usage(format!("--c applies only to the dependent regime, not {regime}")))
        }
        (RegimeKind::Independent, _) => ModelSpec::independent(k),
        (RegimeKind::Redundant, _) => ModelSpec::redundant(k),
        (RegimeKind::Sca, _) => ModelSpec::sca(k),
    };
    Ok(spec.with_symmetric(s.symmetric))
}

fn fit_config(spec: ModelSpec, e: &EstimationArgs) -> Outcome<FitConfig> {
    let strategy: ScaStrategy = parse(&e.sca_strategy)?;
    let mut cfg = FitConfig::new(spec)
        .with_seed(e.seed)
        .with_max_iters(e.max_iters)
        .with_rel_tol(e.tol)
        .with_sca_strategy(strategy);
    if let Some(r) = e.restarts {
        cfg = cfg.with_restarts(r);
    }
    cfg.init_scale = e.init_scale;
    cfg.check()?;
    Ok(cfg)
}

/// `a..b` (inclusive), `a,b,c` or a single value.
pub fn parse_range(raw: &str, flag: &str) -> Outcome<Vec<usize>> {
    let bad = || usage(format!("{flag} `{raw}` should look like 1..6, 1,2,4 or 3"));
    let mut values: Vec<usize> = if let Some((lo, hi)) = raw.split_once("..") {
        let lo: usize = lo.trim().parse().map_err(|_| bad())?;
        let hi: usize = hi.trim().trim_start_matches('=').parse().map_err(|_| bad())?;
        if lo > hi {
            return Err(bad());
        }
        (lo..=hi).collect()
    } else {
        raw.split(',').map(|p| p.trim().parse().map_err(|_| bad())).collect::<Outcome<_>>()?
    };
    values.sort_unstable();
    values.dedup();
    if values.is_empty() || values.contains(&0) {
        return Err(usage(format!("{flag} values must be positive")));
    }
    Ok(values)
}

fn cmd_fit(a: &crate::args::FitArgs, manifest: &mut RunManifest) -> Outcome<Vec<PathBuf>> {
    let (ds, mask) = load_data(&a.data, manifest)?;
    let spec = resolve_spec(&a.spec)?;
    let [n, _, l] = ds.tensor.dims();
    spec.check(n, l)?;
    let cfg = fit_config(spec, &a.estimation)?;
    let result = fit(&ds.tensor, &mask, &cfg)?;
    println!(
        "{spec}: KL {:.6}, log-likelihood {:.6}, {} iterations{}, best restart {} of {}",
        result.final_kl,
        result.final_loglik,
        result.iterations,
        if result.converged { "" } else { " (not converged)" },
        result.best_restart,
        result.restart_seeds.len()
    );
    manifest.derived_seeds = json!({ "restarts": result.restart_seeds });
    manifest.details = json!({
        "spec": spec.to_string(),
        "final_kl": result.final_kl,
        "final_loglik": result.final_loglik,
        "best_restart": result.best_restart,
        "converged": result.converged,
    });
    let bundle = ReportBundle {
        node_labels: Some(&ds.node_labels),
        layer_labels: Some(&ds.layer_labels),
        fit: Some(&result),
        ..Default::default()
    };
    Ok(save_report(&bundle, &a.out)?)
}

fn cmd_sweep(a: &crate::args::SweepArgs, manifest: &mut RunManifest) -> Outcome<Vec<PathBuf>> {
    if a.folds < 2 {
        return Err(usage(format!("--folds must be at least 2, got {}", a.folds)));
    }
    let regimes: Vec<RegimeKind> = a.regimes.split(',').map(|r| parse(r.trim())).collect::<Outcome<_>>()?;
    let ks = parse_range(&a.k, "--k")?;
    let cs = match &a.c {
        Some(raw) => parse_range(raw, "--c")?,
        None if regimes.contains(&RegimeKind::Dependent) => return Err(usage("the dependent regime needs --c")),
        None => Vec::new(),
    };
    let mode: FoldMode = parse(&a.fold_mode)?;
    let (ds, _) = load_data(&a.data, manifest)?;
    let [n, _, l] = ds.tensor.dims();
    let plan = FoldPlan::new(n, l, a.folds, a.estimation.seed, mode, a.data.include_diagonal)?;
    // the grid cells override the spec
    let cfg = fit_config(ModelSpec::redundant(1), &a.estimation)?;
    let result = sweep(&ds.tensor, &regimes, &ks, &cs, &plan, &cfg)?;
    match &result.chosen {
        Some(choice) => println!("{}", choice.note),
        None => println!("no grid cell has a defined held-out AUC"),
    }
    manifest.details = json!({
        "cells": result.grid.len(),
        "skipped": result.skipped,
        "chosen": result.chosen.as_ref().map(|c| c.spec.to_string()),
        "note": result.chosen.as_ref().map(|c| c.note.clone()),
    });
    let bundle = ReportBundle {
        sweep: Some(&result),
        ..Default::default()
    };
    Ok(save_report(&bundle, &a.out)?)
}

fn cmd_test(a: &crate::args::TestArgs, manifest: &mut RunManifest) -> Outcome<Vec<PathBuf>> {
    let null: ModelSpec = parse(&a.null)?;
    let alt: ModelSpec = parse(&a.alt)?;
    let kind: TestKind = parse(&a.kind)?;
    let granularity: SplitGranularity = parse(&a.split_granularity)?;
    let spec = TestSpec::new(null, alt, a.alpha, kind).with_split(a.split_fraction, granularity);
    let (ds, mask) = load_data(&a.data, manifest)?;
    let [n, _, l] = ds.tensor.dims();
    spec.check(n, l)?;
    let cfg = fit_config(null, &a.estimation)?;
    let result = run_test(&ds.tensor, &mask, &spec, &cfg)?;
    println!("{}", result.summary_line());
    for w in &result.warnings {
        eprintln!("warning: {w}");
    }
    manifest.derived_seeds = json!({
        "null_fit": result.null_config.seed,
        "alt_fit": result.alt_config.seed,
        "split": result.split_seed,
    });
    manifest.details = json!({
        "decision": result.decision.to_string(),
        "statistic": result.statistic,
        "df": result.df,
        "p_value": result.p_value,
        "threshold": result.threshold,
    });
    let bundle = ReportBundle {
        test: Some(&result),
        ..Default::default()
    };
    Ok(save_report(&bundle, &a.out)?)
}

fn cmd_relative(a: &crate::args::RelativeArgs, manifest: &mut RunManifest) -> Outcome<Vec<PathBuf>> {
    let text = fs::read_to_string(&a.model).map_err(|e| Failure::io(&a.model, e))?;
    let doc = ModelDocument::from_json(&text)?;
    let model = doc.to_model()?;
    let basis = if a.basis.trim() == "auto" {
        analysis::select_basis_layers(model.y())?
    } else {
        a.basis
            .split(',')
            .map(|p| p.trim().parse::<usize>().map_err(|_| usage(format!("--basis `{}` should be auto or layer indices", a.basis))))
            .collect::<Outcome<_>>()?
    };
    let rel = analysis::to_relative(&model, &basis)?;
    let mut inputs = vec![a.model.clone()];
    let labels = match &a.labels {
        Some(path) => {
            let format = DataFormat::infer(path);
            inputs.extend(input_paths(path, format));
            let ds = io::load(path, format)?;
            if ds.layer_labels.len() != model.l() {
                return Err(usage(format!(
                    "--labels dataset has {} layers, the model has {}",
                    ds.layer_labels.len(),
                    model.l()
                )));
            }
            Some(ds.layer_labels)
        }
        None => None,
    };
    manifest.inputs = digest_inputs(&inputs)?;
    let negatives = rel.y_star.iter().filter(|&&x| x < 0.0).count();
    println!("basis layers {basis:?}; {negatives} negative entries in Y*");
    manifest.details = json!({ "basis_layers": basis, "negative_y_star_entries": negatives });
    let bundle = ReportBundle {
        layer_labels: labels.as_deref(),
        relative: Some(&rel),
        ..Default::default()
    };
    Ok(save_report(&bundle, &a.out)?)
}

fn cmd_consensus(a: &crate::args::ConsensusArgs, manifest: &mut RunManifest) -> Outcome<Vec<PathBuf>> {
    let (ds, _) = load_data(&a.data, manifest)?;
    let mut outputs = Vec::new();
    let consensus = analysis::consensus(&ds.tensor);
    outputs.push(write(a.out.join("consensus.tsv"), &edge_list_tsv(&consensus, &ds.node_labels))?);
    let mut details = json!({ "consensus_edges": consensus.iter().filter(|&&x| x == 1).count() });
    let [n, _, l] = ds.tensor.dims();
    if l == n {
        let las = analysis::locally_aggregated(&ds.tensor)?;
        details["las_edges"] = json!(las.iter().filter(|&&x| x == 1).count());
        outputs.push(write(a.out.join("las.tsv"), &edge_list_tsv(&las, &ds.node_labels))?);
    } else {
        log::info!("L != N: skipping the locally aggregated structure");
    }
    manifest.details = details;
    Ok(outputs)
}

fn cmd_simulate(a: &crate::args::SimulateArgs, manifest: &mut RunManifest) -> Outcome<Vec<PathBuf>> {
    let text = fs::read_to_string(&a.spec).map_err(|e| Failure::io(&a.spec, e))?;
    let mut scenario: PlantedScenario = serde_json::from_str(&text).map_err(|e| Failure::Core(e.into()))?;
    if let Some(seed) = a.seed {
        scenario.seed = seed;
    }
    scenario.check()?;
    manifest.inputs = digest_inputs(std::slice::from_ref(&a.spec))?;
    manifest.master_seed = Some(scenario.seed);
    let format: DataFormat = parse(&a.format)?;
    let model = scenario.model()?;
    let mut tensor = scenario.sample()?;
    if a.binarize {
        tensor = binarize(&tensor);
    }
    let mut ds = CssDataset::unlabeled(tensor)?;
    ds.metadata.insert("generator".into(), GENERATOR.into());
    ds.metadata.insert("seed".into(), scenario.seed.to_string());
    ds.metadata.insert("scenario".into(), scenario.spec.to_string());
    ds.metadata.insert("binarized".into(), a.binarize.to_string());
    let data_path = a.out.join(match format {
        DataFormat::LongTsv => "data.tsv",
        DataFormat::LayerMatrices => "data",
        DataFormat::DenseJson => "data.json",
    });
    io::save(&ds, &data_path, format)?;
    let mut outputs = match format {
        DataFormat::LongTsv => vec![data_path.clone(), io::sidecar_path(&data_path)],
        DataFormat::LayerMatrices => {
            let mut files: Vec<PathBuf> = ds.layer_labels.iter().map(|l| data_path.join(format!("{l}.csv"))).collect();
            files.push(data_path.join(io::MANIFEST_FILE));
            files
        }
        DataFormat::DenseJson => vec![data_path.clone()],
    };
    let doc = ModelDocument::new(&model, scenario.spec, Some(scenario.seed), None);
    outputs.push(write(a.out.join("planted_model.json"), &(doc.to_json()? + "\n"))?);
    println!("sampled {} with total weight {} into {}", scenario.spec, ds.tensor.sum(), data_path.display());
    manifest.details = json!({ "generator": GENERATOR, "scenario": scenario });
    Ok(outputs)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ranges() {
        assert_eq!(parse_range("1..4", "--k").unwrap(), vec![1, 2, 3, 4]);
        assert_eq!(parse_range("3,1,3", "--k").unwrap(), vec![1, 3]);
        assert_eq!(parse_range("2", "--k").unwrap(), vec![2]);
        assert!(parse_range("4..1", "--k").is_err());
        assert!(parse_range("0..2", "--k").is_err());
        assert!(parse_range("x", "--k").is_err());
    }

    #[test]
    fn spec_flags() {
        let flags = |spec: Option<&str>, regime: Option<&str>, k: Option<usize>, c: Option<usize>| SpecArgs {
            spec: spec.map(String::from),
            regime: regime.map(String::from),
            k,
            c,
            symmetric: false,
        };
        assert_eq!(resolve_spec(&flags(Some("dependent:3:2"), None, None, None)).unwrap(), ModelSpec::dependent(3, 2));
        assert_eq!(resolve_spec(&flags(None, Some("dependent"), Some(3), Some(3))).unwrap(), ModelSpec::dependent(3, 3));
        assert_eq!(resolve_spec(&flags(None, Some("sca"), Some(2), None)).unwrap(), ModelSpec::sca(2));
        assert!(resolve_spec(&flags(None, Some("dependent"), Some(3), None)).is_err());
        assert!(resolve_spec(&flags(None, Some("redundant"), Some(3), Some(2))).is_err());
        assert!(resolve_spec(&flags(None, None, Some(3), None)).is_err());
    }
}

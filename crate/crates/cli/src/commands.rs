use std::collections::BTreeMap;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use clap::Args;
use serde::Serialize;
use subcox::config::ExperimentConfig;
use subcox::cox::{fit_cox_lasso_cv, fit_cox_lasso_path, CoxFitPath, PathConfig};
use subcox::folds::derive_seed;
use subcox::io::{read_dataset, write_dataset, write_dataset_to, write_report, write_weights, write_weights_to};
use subcox::pipeline::{estimate_weights, model_design, run_experiment, FitSettings, ModelSpec};
use subcox::simulate::{generate_scenario, SimulationScenario, SUBGROUP_LABELS};
use subcox::survival::SurvivalDataset;
use subcox::weights::{group_auc, group_scores, ClassifierRegistry};

use crate::CliError;

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Patients per subgroup.
    #[arg(long)]
    n: usize,
    /// Number of genes (at least 12).
    #[arg(long)]
    p: usize,
    /// Mean-shift strength in [0, 1].
    #[arg(long)]
    epsilon: f64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Output CSV; standard output when absent.
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct WeightsArgs {
    /// Input data set CSV.
    #[arg(long)]
    input: PathBuf,
    /// Classifier: lasso, ridge, rf or prior.
    #[arg(long, default_value = "lasso")]
    classifier: String,
    #[arg(long, default_value_t = 10)]
    folds: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Comma-separated subgroup labels forming group 1 for the group AUC;
    /// defaults to 1A,1B for simulated cohorts.
    #[arg(long, value_delimiter = ',')]
    group: Option<Vec<String>>,
    /// Output CSV; standard output when absent.
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    /// Input data set CSV.
    #[arg(long)]
    input: PathBuf,
    /// Weight source: estimated:<classifier>, fixed:<w>, subgroup or all.
    #[arg(long, default_value = "estimated:lasso")]
    weights: String,
    /// Target subgroup label.
    #[arg(long)]
    target: String,
    /// Fit at this penalty only, skipping cross-validation.
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long, default_value_t = 10)]
    folds: usize,
    #[arg(long, default_value_t = 10)]
    classifier_folds: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Output JSON; standard output when absent.
    #[arg(long, short)]
    output: Option<PathBuf>,
}

fn load(path: &Path) -> Result<SurvivalDataset, CliError> {
    Ok(read_dataset(path)?)
}

pub fn simulate(args: &SimulateArgs) -> Result<(), CliError> {
    let scenario = SimulationScenario::new(args.n, args.p, args.epsilon, args.seed)?;
    let data = generate_scenario(&scenario)?;
    let mut summary = format!("rows {}\n", data.len());
    for (s, label) in data.subgroup_labels().iter().enumerate() {
        let rows = data.subgroup_rows(s);
        let censored = rows.iter().filter(|&&i| !data.events()[i]).count();
        summary += &format!(
            "subgroup {label} n {} censored {:.4}\n",
            rows.len(),
            censored as f64 / rows.len() as f64
        );
    }
    let censored = data.len() - data.event_count();
    summary += &format!("censoring {:.4}\n", censored as f64 / data.len() as f64);
    match &args.output {
        Some(path) => {
            write_dataset(path, &data)?;
            print!("{summary}");
        }
        None => {
            write_dataset_to(io::stdout().lock(), &data)?;
            eprint!("{summary}");
        }
    }
    Ok(())
}

fn group_one(data: &SurvivalDataset, requested: &Option<Vec<String>>) -> Result<Vec<usize>, CliError> {
    match requested {
        Some(labels) => labels
            .iter()
            .map(|l| {
                data.subgroup_index(l.trim())
                    .ok_or_else(|| CliError::usage(format!("unknown subgroup '{l}'")))
            })
            .collect(),
        None if data.subgroup_labels().iter().map(String::as_str).eq(SUBGROUP_LABELS) => Ok(vec![0, 1]),
        None => Ok(Vec::new()),
    }
}

pub fn weights(args: &WeightsArgs) -> Result<(), CliError> {
    let data = load(&args.input)?;
    let group = group_one(&data, &args.group)?;
    let settings = FitSettings {
        classifier_folds: args.folds,
        ..FitSettings::default()
    };
    let registry = ClassifierRegistry::with_builtins();
    let (weights, cv) = estimate_weights(
        &data,
        &args.classifier,
        &settings,
        &registry,
        derive_seed(args.seed, "weights", &[]),
    )?;
    let mut summary = String::new();
    for (s, label) in data.subgroup_labels().iter().enumerate() {
        let positive: Vec<bool> = data.subgroups().iter().map(|&g| g == s).collect();
        let auc = group_auc(&group_scores(cv.probs.probs(), &[s]), &positive)?;
        summary += &format!("subgroup {label} auc {auc:.4}\n");
    }
    if !group.is_empty() {
        let positive: Vec<bool> = data.subgroups().iter().map(|g| group.contains(g)).collect();
        let auc = group_auc(&group_scores(cv.probs.probs(), &group), &positive)?;
        let names: Vec<&str> = group.iter().map(|&s| data.subgroup_labels()[s].as_str()).collect();
        summary += &format!("group {} auc {auc:.4}\n", names.join(","));
    }
    match &args.output {
        Some(path) => {
            write_weights(path, data.ids(), &weights)?;
            print!("{summary}");
        }
        None => {
            write_weights_to(io::stdout().lock(), data.ids(), &weights)?;
            eprint!("{summary}");
        }
    }
    Ok(())
}

#[derive(Serialize)]
struct Coefficient<'a> {
    feature: &'a str,
    value: f64,
}

#[derive(Serialize)]
struct GridPoint {
    lambda: f64,
    nonzero: usize,
    cv_deviance: Option<f64>,
    cv_se: Option<f64>,
}

#[derive(Serialize)]
struct ModelFile<'a> {
    target: &'a str,
    selected_lambda: f64,
    lambda_max: f64,
    /// Non-zero coefficients of the selected model, in feature order.
    coefficients: Vec<Coefficient<'a>>,
    path: Vec<GridPoint>,
}

fn model_json(path: &CoxFitPath, features: &[String], target: &str) -> Result<String, CliError> {
    let selected = path.selected.unwrap_or(0);
    let chosen = &path.coefficients[selected];
    let file = ModelFile {
        target,
        selected_lambda: path.lambdas[selected],
        lambda_max: path.lambda_max,
        coefficients: chosen
            .support()
            .into_iter()
            .map(|j| Coefficient {
                feature: &features[j],
                value: chosen.beta[j],
            })
            .collect(),
        path: (0..path.lambdas.len())
            .map(|l| GridPoint {
                lambda: path.lambdas[l],
                nonzero: path.coefficients[l].support().len(),
                cv_deviance: path.cv.as_ref().map(|cv| cv.mean[l]),
                cv_se: path.cv.as_ref().map(|cv| cv.se[l]),
            })
            .collect(),
    };
    let mut json = serde_json::to_string_pretty(&file).map_err(|e| CliError::usage(e.to_string()))?;
    json.push('\n');
    Ok(json)
}

pub fn fit(args: &FitArgs) -> Result<(), CliError> {
    let data = load(&args.input)?;
    let model: ModelSpec = args.weights.parse()?;
    let target = data
        .subgroup_index(&args.target)
        .ok_or_else(|| CliError::usage(format!("unknown target subgroup '{}'", args.target)))?;
    let settings = FitSettings {
        classifier_folds: args.classifier_folds,
        ..FitSettings::default()
    };
    let mut estimated = BTreeMap::new();
    if let ModelSpec::Estimated(name) = &model {
        let registry = ClassifierRegistry::with_builtins();
        let (w, _) = estimate_weights(
            &data,
            name,
            &settings,
            &registry,
            derive_seed(args.seed, "weights", &[]),
        )?;
        estimated.insert(name.clone(), w);
    }
    let (design, weights) = model_design(&data, &model, target, &estimated)?;
    let path = match args.lambda {
        Some(lambda) => {
            if !(lambda.is_finite() && lambda >= 0.0) {
                return Err(CliError::usage(format!(
                    "--lambda {lambda} must be a finite non-negative number"
                )));
            }
            let mut path = fit_cox_lasso_path(&design, &weights, &PathConfig::default().with_lambdas(vec![lambda]))?;
            path.selected = Some(0);
            path
        }
        None => fit_cox_lasso_cv(
            &design,
            &weights,
            &PathConfig::default(),
            args.folds,
            derive_seed(args.seed, "cox-cv", &[]),
        )?,
    };
    let json = model_json(&path, design.feature_names(), &args.target)?;
    match &args.output {
        Some(file) => fs::write(file, json)?,
        None => io::stdout().lock().write_all(json.as_bytes())?,
    }
    Ok(())
}

pub fn experiment(config_path: &Path, output_dir: Option<PathBuf>) -> Result<(), CliError> {
    let mut config = ExperimentConfig::load(config_path)?;
    if let Some(dir) = output_dir {
        config.output_dir = dir;
    }
    let spec = config.to_spec()?;
    let outcome = run_experiment(&spec, &ClassifierRegistry::with_builtins())?;
    write_report(&config.output_dir, &outcome, &config)?;
    println!(
        "{} of {} repetitions succeeded; report written to {}",
        outcome.results.len(),
        config.repetitions,
        config.output_dir.display()
    );
    for o in &outcome.report.overall {
        let mean = o.c_index.mean.map_or("undefined".to_string(), |c| format!("{c:.4}"));
        println!("{:<18} c-index {mean}", o.model);
    }
    Ok(())
}

use std::path::PathBuf;

use clap::Args;
use serde::Serialize;
use sparfa_lite::data_io::{
    load_quantizer, load_responses, run_holdout_protocol, LambdaChoice, ProtocolOptions,
};

use super::{create_dir, usage, CvArgs, SolverArgs};
use crate::error::CliResult;
use crate::manifest::RunManifest;
use crate::table::{write_csv, Table};

#[derive(Debug, Clone, Args, Serialize)]
pub struct EvalArgs {
    /// Responses CSV (`learner_id,question_id,grade`).
    #[arg(long)]
    pub responses: PathBuf,
    /// Quantizer JSON.
    #[arg(long)]
    pub quantizer: PathBuf,
    /// Monte-Carlo repetitions of the hold-out split.
    #[arg(long, default_value_t = 25)]
    pub trials: usize,
    /// Fraction of observed responses held out in each trial.
    #[arg(long, default_value_t = 0.2)]
    pub test_fraction: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Fixed radius; without it each trial cross-validates on its training part.
    #[arg(long)]
    pub lambda: Option<f64>,
    #[command(flatten)]
    pub cv_args: CvArgs,
    /// Require the AUC row (binary quantizers only).
    #[arg(long)]
    pub auc: bool,
    #[command(flatten)]
    pub solver: SolverArgs,
    /// Also write eval.csv, trials.csv and manifest.json here.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

fn fmt4(x: f64) -> String {
    format!("{x:.4}")
}

pub fn run(args: &EvalArgs) -> CliResult<()> {
    let quantizer = load_quantizer(&args.quantizer)?;
    if args.auc && quantizer.num_labels() != 2 {
        return Err(usage(format!(
            "AUC is only defined for binary quantizers; this one has {} labels",
            quantizer.num_labels()
        )));
    }
    let dataset = load_responses(&args.responses, &quantizer)?;

    let options = ProtocolOptions {
        trials: args.trials,
        test_fraction: args.test_fraction,
        seed: args.seed,
        lambda: match args.lambda {
            Some(l) => LambdaChoice::Fixed(l),
            None => LambdaChoice::CrossValidated {
                grid: args.cv_args.grid.clone().unwrap_or_default(),
                grid_points: args.cv_args.grid_points,
                folds: args.cv_args.folds,
                metric: args.cv_args.cv_metric.into(),
            },
        },
        solver: args.solver.config(args.lambda.unwrap_or(1.0)),
    };
    options.solver.validate()?;
    let report = run_holdout_protocol(&dataset.responses, &quantizer, &options)?;

    let mut table = Table::new(["", "Majority baseline", "Model"]);
    table.push(vec![
        "COR".into(),
        fmt4(report.mean_baseline.majority_cor),
        fmt4(report.mean.cor),
    ]);
    table.push(vec![
        "LIK".into(),
        fmt4(report.mean_baseline.constant_lik),
        fmt4(report.mean.lik),
    ]);
    if let Some(auc) = report.mean.auc {
        // a constant score ties every pair
        table.push(vec!["AUC".into(), fmt4(0.5), fmt4(auc)]);
    }

    let how = match args.lambda {
        Some(l) => format!("lambda {l}"),
        None => format!(
            "lambda by {}-fold CV on {}",
            args.cv_args.folds,
            match args.cv_args.cv_metric {
                super::MetricArg::Lik => "LIK",
                super::MetricArg::Cor => "COR",
            }
        ),
    };
    println!(
        "{} responses, {} trials, {:.0}% held out, {how}",
        dataset.responses.len(),
        args.trials,
        100.0 * args.test_fraction
    );
    print!("{}", table.render());

    if let Some(dir) = &args.out_dir {
        create_dir(dir)?;
        let mut manifest = RunManifest::new("eval", Some(args.seed), args);
        manifest.input(&args.responses)?;
        manifest.input(&args.quantizer)?;
        let summary = dir.join("eval.csv");
        table.header[0] = "metric".into();
        table.write_csv(&summary)?;
        manifest.output(&summary)?;

        let trials = dir.join("trials.csv");
        let rows: Vec<Vec<String>> = report
            .trials
            .iter()
            .map(|t| {
                vec![
                    t.trial.to_string(),
                    t.lambda.to_string(),
                    t.metrics.cor.to_string(),
                    t.metrics.lik.to_string(),
                    t.metrics.auc.map(|a| a.to_string()).unwrap_or_default(),
                    t.baseline.majority_cor.to_string(),
                    t.baseline.constant_lik.to_string(),
                    t.effective_rank.to_string(),
                    t.iterations.to_string(),
                ]
            })
            .collect();
        write_csv(
            &trials,
            &[
                "trial",
                "lambda",
                "cor",
                "lik",
                "auc",
                "baseline_cor",
                "baseline_lik",
                "effective_rank",
                "iterations",
            ],
            &rows,
        )?;
        manifest.output(&trials)?;
        manifest.write(dir)?;
    }
    Ok(())
}

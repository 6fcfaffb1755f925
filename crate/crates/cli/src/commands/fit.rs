use std::path::PathBuf;

use clap::Args;
use serde::Serialize;
use sparfa_lite::data_io::{
    cross_validate_lambda, load_quantizer, load_responses, write_matrix, CvOptions, LabeledMatrix,
};
use sparfa_lite::fit;

use super::{create_dir, usage, CvArgs, SolverArgs};
use crate::error::CliResult;
use crate::manifest::RunManifest;
use crate::table::write_csv;

#[derive(Debug, Clone, Args, Serialize)]
pub struct FitArgs {
    /// Responses CSV (`learner_id,question_id,grade`).
    #[arg(long)]
    pub responses: PathBuf,
    /// Quantizer JSON.
    #[arg(long)]
    pub quantizer: PathBuf,
    /// Nuclear-norm radius.
    #[arg(long, required_unless_present = "cv", conflicts_with = "cv")]
    pub lambda: Option<f64>,
    /// Choose the radius by cross-validation.
    #[arg(long)]
    pub cv: bool,
    #[command(flatten)]
    pub cv_args: CvArgs,
    /// Seed for the cross-validation folds.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub solver: SolverArgs,
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
}

pub fn run(args: &FitArgs) -> CliResult<()> {
    let quantizer = load_quantizer(&args.quantizer)?;
    let dataset = load_responses(&args.responses, &quantizer)?;
    let (q, n) = dataset.responses.shape();

    let cv = if args.cv {
        let mut options = CvOptions::new(args.cv_args.folds, args.seed);
        options.metric = args.cv_args.cv_metric.into();
        options.solver = args.solver.config(1.0);
        Some(cross_validate_lambda(
            &dataset.responses,
            &quantizer,
            &args.cv_args.grid(q, n),
            &options,
        )?)
    } else {
        None
    };
    let lambda = match (&cv, args.lambda) {
        (Some(report), _) => report.best_lambda,
        (None, Some(l)) => l,
        (None, None) => return Err(usage("either --lambda or --cv is required")),
    };
    let result = fit(&dataset.responses, &quantizer, &args.solver.config(lambda))?;

    create_dir(&args.out_dir)?;
    let mut manifest = RunManifest::new("fit", Some(args.seed), args);
    manifest.input(&args.responses)?;
    manifest.input(&args.quantizer)?;

    let z_hat = args.out_dir.join("z_hat.csv");
    write_matrix(
        &z_hat,
        &LabeledMatrix {
            question_ids: dataset.question_ids.clone(),
            learner_ids: dataset.learner_ids.clone(),
            values: result.z_hat.as_matrix().clone(),
        },
    )?;
    manifest.output(&z_hat)?;

    let trace = args.out_dir.join("trace.csv");
    let mut best = f64::INFINITY;
    let rows: Vec<Vec<String>> = result
        .objective_trace
        .iter()
        .enumerate()
        .map(|(k, &f)| {
            best = best.min(f);
            vec![k.to_string(), f.to_string(), best.to_string()]
        })
        .collect();
    write_csv(&trace, &["iteration", "objective", "best"], &rows)?;
    manifest.output(&trace)?;

    if let Some(report) = &cv {
        let path = args.out_dir.join("cv.csv");
        let rows: Vec<Vec<String>> = (0..report.lambda_grid.len())
            .map(|k| {
                vec![
                    report.lambda_grid[k].to_string(),
                    report.mean_lik[k].to_string(),
                    report.mean_cor[k].to_string(),
                ]
            })
            .collect();
        write_csv(&path, &["lambda", "mean_lik", "mean_cor"], &rows)?;
        manifest.output(&path)?;
    }
    manifest.write(&args.out_dir)?;

    if cv.is_some() {
        println!("lambda (cross-validated): {lambda}");
    } else {
        println!("lambda: {lambda}");
    }
    println!(
        "iterations: {} ({})",
        result.iterations_used,
        if result.converged {
            "converged"
        } else {
            "iteration cap reached"
        }
    );
    println!("effective rank: {}", result.effective_rank);
    println!("final objective: {}", result.objective);
    Ok(())
}

use std::path::PathBuf;

use clap::Args;
use serde::Serialize;
use sparfa_lite::data_io::{
    synthesize, write_matrix, write_quantizer, write_responses, LabeledMatrix, SynthParams,
};
use sparfa_lite::Quantizer;

use super::{create_dir, usage};
use crate::error::CliResult;
use crate::manifest::RunManifest;

#[derive(Debug, Clone, Args, Serialize)]
pub struct SynthArgs {
    #[arg(long)]
    pub questions: usize,
    #[arg(long)]
    pub learners: usize,
    /// Rank of the ground-truth matrix.
    #[arg(long)]
    pub rank: usize,
    /// Number of ordinal labels P.
    #[arg(long, default_value_t = 2)]
    pub labels: usize,
    /// Probability that each entry is observed.
    #[arg(long, default_value_t = 1.0)]
    pub observed: f64,
    /// Standard deviation of the ground-truth entries.
    #[arg(long, default_value_t = 2.0)]
    pub scale: f64,
    /// Comma-separated interior boundaries (P - 1 values); defaults to
    /// integers centred on zero.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub boundaries: Option<Vec<f64>>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
}

pub fn run(args: &SynthArgs) -> CliResult<()> {
    let quantizer = match &args.boundaries {
        Some(b) if b.len() + 1 != args.labels => {
            return Err(usage(format!(
                "--boundaries has {} values but --labels {} needs {}",
                b.len(),
                args.labels,
                args.labels.saturating_sub(1)
            )))
        }
        Some(b) => Quantizer::from_interior(b.clone())?,
        None => Quantizer::evenly_spaced(args.labels)?,
    };
    let params = SynthParams {
        questions: args.questions,
        learners: args.learners,
        rank: args.rank,
        observed_fraction: args.observed,
        scale: args.scale,
        seed: args.seed,
    };
    let truth = synthesize(&params, &quantizer)?;
    let dataset = truth.to_dataset(&quantizer)?;

    create_dir(&args.out_dir)?;
    let mut manifest = RunManifest::new("synth", Some(args.seed), args);
    let responses = args.out_dir.join("responses.csv");
    write_responses(&responses, &dataset)?;
    let quantizer_path = args.out_dir.join("quantizer.json");
    write_quantizer(&quantizer_path, &quantizer)?;
    let z_true = args.out_dir.join("z_true.csv");
    write_matrix(
        &z_true,
        &LabeledMatrix {
            question_ids: dataset.question_ids.clone(),
            learner_ids: dataset.learner_ids.clone(),
            values: truth.z_true.as_matrix().clone(),
        },
    )?;
    for path in [&responses, &quantizer_path, &z_true] {
        manifest.output(path)?;
    }
    manifest.write(&args.out_dir)?;

    let counts = truth.responses.label_counts(quantizer.num_labels());
    println!(
        "{} x {} matrix of rank {}, {} observed responses, label counts {:?}",
        args.questions,
        args.learners,
        args.rank,
        truth.responses.len(),
        counts
    );
    println!("wrote {}", args.out_dir.display());
    Ok(())
}

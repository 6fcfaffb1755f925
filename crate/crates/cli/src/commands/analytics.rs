use std::path::PathBuf;

use clap::Args;
use serde::Serialize;
use sparfa_lite::analytics::{denoised_grades, select_learners, tag_knowledge};
use sparfa_lite::data_io::{load_matrix, load_tags};
use sparfa_lite::FactorMatrix;

use super::{create_dir, usage};
use crate::error::CliResult;
use crate::manifest::RunManifest;
use crate::table::{write_csv, Table};

#[derive(Debug, Clone, Args, Serialize)]
pub struct AnalyticsArgs {
    /// Fitted matrix CSV as written by `fit`.
    #[arg(long)]
    pub z_hat: PathBuf,
    /// Tags CSV (`question_id,tag`).
    #[arg(long)]
    pub tags: PathBuf,
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
}

fn percent(x: f64) -> String {
    format!("{:.0}%", 100.0 * x)
}

pub fn run(args: &AnalyticsArgs) -> CliResult<()> {
    let z = load_matrix(&args.z_hat)?;
    let tags = load_tags(&args.tags, &z.question_ids)?;
    let grades = denoised_grades(&FactorMatrix::new(z.values.clone())?);
    let knowledge = tag_knowledge(&grades, &tags)?;
    let picked =
        select_learners(&grades).ok_or_else(|| usage("the fitted matrix has no learners"))?;

    let mut table =
        Table::new(std::iter::once(String::new()).chain(knowledge.tag_names.iter().cloned()));
    table.push(
        std::iter::once("Class average".to_string())
            .chain(knowledge.class_average.iter().map(|&x| percent(x)))
            .collect(),
    );
    for (name, j) in [
        ("Best learner", picked.best),
        ("Average learner", picked.average),
        ("Worst learner", picked.worst),
    ] {
        table.push(
            std::iter::once(name.to_string())
                .chain(knowledge.knowledge.row(j).iter().map(|&x| percent(x)))
                .collect(),
        );
    }
    print!("{}", table.render());
    println!(
        "best: learner {}, average: learner {}, worst: learner {}",
        z.learner_ids[picked.best], z.learner_ids[picked.average], z.learner_ids[picked.worst]
    );

    create_dir(&args.out_dir)?;
    let mut manifest = RunManifest::new("analytics", None, args);
    manifest.input(&args.z_hat)?;
    manifest.input(&args.tags)?;

    let b = args.out_dir.join("b.csv");
    let header: Vec<String> = std::iter::once("learner_id".to_string())
        .chain(knowledge.tag_names.iter().cloned())
        .collect();
    let rows: Vec<Vec<String>> = z
        .learner_ids
        .iter()
        .enumerate()
        .map(|(j, id)| {
            std::iter::once(id.clone())
                .chain(knowledge.knowledge.row(j).iter().map(|x| x.to_string()))
                .collect()
        })
        .collect();
    write_csv(&b, &header, &rows)?;
    manifest.output(&b)?;

    let report = args.out_dir.join("report.csv");
    table.header[0] = "row".into();
    let rows: Vec<Vec<String>> =
        std::iter::once(("Class average", knowledge.class_average.clone()))
            .chain(
                [
                    ("Best learner", picked.best),
                    ("Average learner", picked.average),
                    ("Worst learner", picked.worst),
                ]
                .map(|(name, j)| (name, knowledge.knowledge.row(j).iter().copied().collect())),
            )
            .map(|(name, values)| {
                std::iter::once(name.to_string())
                    .chain(values.iter().map(|x: &f64| (100.0 * x).to_string()))
                    .collect()
            })
            .collect();
    write_csv(&report, &table.header, &rows)?;
    manifest.output(&report)?;
    manifest.write(&args.out_dir)?;
    Ok(())
}

//! Command-line front end: run one selection experiment, rank features, or
//! tabulate finished runs.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use tffs::baselines::{mi_rank, mrmr_select, MrmrVariant};
use tffs::harness::{
    compare, final_model, run_experiment, write_outputs, ExperimentConfig, RunArtifact,
    SelectorKind,
};
use tffs::Error;

#[derive(Parser)]
#[command(
    name = "tffs",
    version,
    about = "Target-focused feature selection benchmark"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArgs {
    /// Experiment config (TOML or JSON)
    #[arg(long)]
    config: PathBuf,

    /// Override the config's seed
    #[arg(long)]
    seed: Option<u64>,

    /// Directory for run outputs
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment (selection or baseline, per the config)
    Select {
        #[command(flatten)]
        common: ConfigArgs,

        /// Also write the final model's posterior as JSON
        #[arg(long)]
        dump_model: bool,

        /// Feature-name file overriding the config's external ordering
        #[arg(long)]
        external_order: Option<PathBuf>,
    },
    /// Tabulate F1 at feature-count checkpoints across finished runs
    Compare {
        /// run.json artifacts to compare
        artifacts: Vec<PathBuf>,

        /// Checkpoints to report (defaults to the first run's config)
        #[arg(long, value_delimiter = ',')]
        checkpoints: Option<Vec<usize>>,
    },
    /// Rank features by mutual information with the target
    MiRank {
        #[command(flatten)]
        common: ConfigArgs,
    },
    /// Greedy minimum-redundancy maximum-relevance ranking
    Mrmr {
        #[command(flatten)]
        common: ConfigArgs,

        /// Redundancy combination: mid (difference) or miq (quotient)
        #[arg(long, default_value = "mid")]
        variant: String,
    },
}

fn load_config(common: &ConfigArgs) -> Result<ExperimentConfig, Error> {
    let mut cfg = ExperimentConfig::from_file(&common.config)?;
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn cmd_select(
    common: ConfigArgs,
    dump_model: bool,
    external_order: Option<PathBuf>,
) -> Result<(), Error> {
    let mut cfg = load_config(&common)?;
    if let Some(path) = external_order {
        cfg.external_order = Some(path);
        cfg.selector = SelectorKind::External;
    }
    let output = run_experiment(&cfg)?;
    let artifact = &output.artifact;

    println!(
        "selector {} on {} (focus {:?}, seed {})",
        cfg.selector,
        cfg.dataset.display(),
        cfg.focus_label,
        cfg.seed
    );
    let names = artifact
        .final_features()
        .iter()
        .map(|&i| artifact.feature_names[i].clone());
    for (rank, name) in names.enumerate() {
        let f1 = artifact.trend.f1[rank];
        let confidence = artifact.trend.confidence[rank];
        println!(
            "{:>3}. {name}  (f1 {f1:.3}, confidence {confidence:.3})",
            rank + 1
        );
    }

    if let Some(out_dir) = &common.out_dir {
        let (json_path, csv_path) = write_outputs(artifact, out_dir)?;
        println!("wrote {} and {}", json_path.display(), csv_path.display());
        if dump_model {
            let model = final_model(&output)?;
            let path = out_dir.join("model.json");
            std::fs::write(&path, tffs::vi::ModelDump::from(&model).to_json())?;
            println!("wrote {}", path.display());
        }
    } else if dump_model {
        return Err(Error::Config("--dump-model needs --out-dir".into()));
    }
    Ok(())
}

fn cmd_compare(paths: Vec<PathBuf>, checkpoints: Option<Vec<usize>>) -> Result<(), Error> {
    if paths.is_empty() {
        return Err(Error::Config("compare needs at least one run.json".into()));
    }
    let artifacts: Result<Vec<RunArtifact>, Error> = paths
        .iter()
        .map(|p| {
            let text = std::fs::read_to_string(p)
                .map_err(|e| Error::Config(format!("cannot read {}: {e}", p.display())))?;
            RunArtifact::from_json(&text)
        })
        .collect();
    let artifacts = artifacts?;
    let checkpoints = checkpoints.unwrap_or_else(|| artifacts[0].config.checkpoints.clone());
    let table = compare(&artifacts, &checkpoints)?;
    print!("{table}");
    Ok(())
}

fn cmd_rank(common: ConfigArgs, variant: Option<MrmrVariant>) -> Result<(), Error> {
    let cfg = load_config(&common)?;
    let dataset = tffs::data::load_csv(&cfg.dataset, &cfg.target_column, &cfg.missing_token)?;
    let sampling = tffs::data::SamplingConfig {
        split: tffs::data::SplitSpec::new(
            cfg.split.train_fraction,
            cfg.split.test_fraction,
            cfg.seed,
        )?,
        balance_cap: cfg.balance_cap,
    };
    let sets = tffs::data::prepare_sets(&dataset, &sampling)?;
    let mi_cfg = tffs::baselines::MiConfig {
        k_neighbors: cfg.mi_neighbors,
        seed: cfg.seed,
    };
    let budget = cfg.budget.min(sets.train.n_features());
    let order = match variant {
        None => mi_rank(&sets.train, budget, &mi_cfg)?,
        Some(v) => mrmr_select(&sets.train, budget, v, &mi_cfg)?,
    };
    let mut lines = String::new();
    for (rank, &idx) in order.iter().enumerate() {
        let name = &sets.train.feature_names()[idx];
        println!("{:>3}. {name}", rank + 1);
        lines.push_str(name);
        lines.push('\n');
    }
    if let Some(out_dir) = &common.out_dir {
        std::fs::create_dir_all(out_dir)?;
        let path = out_dir.join("order.txt");
        std::fs::write(&path, lines)?;
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn run() -> Result<(), Error> {
    let cli = Cli::parse();
    match cli.command {
        Command::Select {
            common,
            dump_model,
            external_order,
        } => cmd_select(common, dump_model, external_order),
        Command::Compare {
            artifacts,
            checkpoints,
        } => cmd_compare(artifacts, checkpoints),
        Command::MiRank { common } => cmd_rank(common, None),
        Command::Mrmr { common, variant } => {
            let v = match variant.as_str() {
                "mid" => MrmrVariant::Mid,
                "miq" => MrmrVariant::Miq,
                other => {
                    return Err(Error::Config(format!(
                        "unknown mrmr variant {other:?} (use mid or miq)"
                    )))
                }
            };
            cmd_rank(common, Some(v))
        }
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code() as u8)
        }
    }
}

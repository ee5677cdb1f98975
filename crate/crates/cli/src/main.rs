use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use latdyn::dynamics::Variant;
use latdyn_cli::commands::{self, RolloutOptions};
use latdyn_cli::config::{load_group_map, RunConfig};
use latdyn_cli::dataset::Split;
use latdyn_cli::CliError;

#[derive(Parser)]
#[command(name = "latdyn", version, about = "Spring-damper latent dynamics: data, training and rollout")]
struct Cli {
    /// JSON run config; defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate oracle clips, a system manifest and dataset.json.
    GenSynthetic {
        /// Output directory; defaults to paths.dataset.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Pose descriptors of a motion file, referenced to its first frame.
    ExtractFeatures {
        #[arg(long)]
        motion: PathBuf,
        /// Overrides paths.group_map.
        #[arg(long)]
        group_map: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit PCA and standardization on feature files.
    FitLatentSpace {
        #[arg(long = "features", required = true, num_args = 1..)]
        features: Vec<PathBuf>,
        /// Overrides latent_dim.
        #[arg(long)]
        latent_dim: Option<usize>,
        /// Row (across all files) whose encoding becomes z_ref.
        #[arg(long, default_value_t = 0)]
        rest_index: usize,
        #[arg(long)]
        out: PathBuf,
        /// Also write the encoded rows here.
        #[arg(long)]
        latents: Option<PathBuf>,
    },
    /// Train on the dataset's training split.
    Train {
        /// Continue from this checkpoint.
        #[arg(long)]
        resume: Option<PathBuf>,
        /// Stop once this many epochs are done.
        #[arg(long)]
        stop_after: Option<usize>,
    },
    /// Roll a trained model out along a motion or descriptor file.
    Rollout {
        #[arg(long)]
        checkpoint: PathBuf,
        /// `.quatseq` motion or descriptor `.featmat`.
        #[arg(long)]
        motion: PathBuf,
        #[arg(long)]
        pose_gain: Option<f64>,
        #[arg(long)]
        damp_gain: Option<f64>,
        #[arg(long)]
        spring_gain: Option<f64>,
        /// `.featmat` with z₀ (and optionally v₀ as a second row).
        #[arg(long)]
        init_latent: Option<PathBuf>,
        #[arg(long)]
        variant: Option<Variant>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Metrics of a checkpoint on a dataset split.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        /// Dataset directory; defaults to paths.dataset.
        #[arg(long)]
        dataset: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Split::HeldOut)]
        split: Split,
        /// Write the report here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// `println!` that stays quiet when stdout is closed early (`| head`).
macro_rules! say {
    ($($arg:tt)*) => {{
        use std::io::Write;
        let _ = writeln!(std::io::stdout(), $($arg)*);
    }};
}

fn run(cli: Cli) -> Result<(), CliError> {
    let cfg = RunConfig::load(cli.config.as_deref())?;
    match cli.command {
        Command::GenSynthetic { out } => {
            let out = match out {
                Some(o) => o,
                None => cfg.require(&cfg.paths.dataset, "dataset")?.to_path_buf(),
            };
            let index = commands::gen_synthetic(&cfg, &out)?;
            say!("wrote {} training and {} held-out clips to {}", index.train.len(), index.held_out.len(), out.display());
        }
        Command::ExtractFeatures { motion, group_map, out } => {
            let map = match group_map {
                Some(p) => load_group_map(&p)?,
                None => cfg.group_map()?,
            };
            let m = commands::extract_features(&motion, &map, &out)?;
            say!("wrote {}x{} descriptors to {}", m.rows, m.cols, out.display());
        }
        Command::FitLatentSpace { features, latent_dim, rest_index, out, latents } => {
            let dz = latent_dim.unwrap_or(cfg.latent_dim);
            let ls = commands::fit_latent_space(&features, dz, cfg.epsilon, rest_index, &out, latents.as_deref())?;
            say!("orthonormality error {:e}", ls.orthonormality_error());
        }
        Command::Train { resume, stop_after } => {
            let o = commands::train(&cfg, resume.as_deref(), stop_after)?;
            match o.final_loss {
                Some(l) => say!("{} epochs done, last loss {l:e}", o.epochs_done),
                None => say!("no epochs run"),
            }
            say!("checkpoint {}, loss history {}", o.checkpoint.display(), o.loss_csv.display());
        }
        Command::Rollout { checkpoint, motion, pose_gain, damp_gain, spring_gain, init_latent, variant, out } => {
            let opts = RolloutOptions { pose_gain, damp_gain, spring_gain, init_latent, variant };
            let m = commands::rollout_cmd(&checkpoint, &motion, &cfg.group_map()?, &opts, &out)?;
            say!("wrote {} states to {}", m.rows, out.display());
        }
        Command::Eval { checkpoint, dataset, split, out } => {
            let dataset = match dataset {
                Some(d) => d,
                None => cfg.require(&cfg.paths.dataset, "dataset")?.to_path_buf(),
            };
            let report = commands::eval_cmd(&checkpoint, &dataset, split, out.as_deref())?;
            if out.is_none() {
                say!("{}", serde_json::to_string_pretty(&report).expect("report serializes"));
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

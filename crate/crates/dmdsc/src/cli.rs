//! Command-line surface.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::config::ExperimentConfig;
use crate::experiments::{self, trial_dir, CHECKPOINT};
use crate::{Error, Result};

#[derive(Debug, Parser)]
#[command(name = "dmdsc", version, about = "Open-set classification with simplex-ETF centers and class-adaptive margins")]
pub struct Cli {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub overrides: Overrides,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Common {
    /// TOML experiment configuration; flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Default, Args)]
pub struct Overrides {
    #[arg(long, global = true)]
    pub known: Option<usize>,
    #[arg(long, global = true)]
    pub unknown: Option<usize>,
    #[arg(long, global = true)]
    pub input_dim: Option<usize>,
    #[arg(long, global = true)]
    pub majority: Option<usize>,
    /// Imbalance ratio (majority / minority class count).
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub ir: Option<f64>,
    #[arg(long, global = true)]
    pub cluster_std: Option<f64>,
    #[arg(long, global = true)]
    pub separation: Option<f64>,
    #[arg(long, global = true)]
    pub bg_samples: Option<usize>,
    #[arg(long, global = true)]
    pub trials: Option<usize>,
    /// Seeds averaged per sweep cell.
    #[arg(long, global = true)]
    pub runs: Option<usize>,
    /// Hidden layer widths, comma separated; empty for a linear network.
    #[arg(long, global = true, value_delimiter = ',', num_args = 0..)]
    pub hidden: Option<Vec<usize>>,
    #[arg(long, global = true)]
    pub embed_dim: Option<usize>,
    #[arg(long, global = true)]
    pub activation: Option<String>,
    #[arg(long, global = true)]
    pub epochs: Option<usize>,
    #[arg(long, global = true)]
    pub batch_size: Option<usize>,
    #[arg(long, global = true)]
    pub batch_size_bg: Option<usize>,
    #[arg(long, global = true)]
    pub lr: Option<f64>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub lambda_inter: Option<f64>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub lambda_bg: Option<f64>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub m_min: Option<f64>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub m_max: Option<f64>,
    #[arg(long, global = true)]
    pub radius: Option<f64>,
    #[arg(long, global = true)]
    pub eval_every: Option<usize>,
    #[arg(long, global = true)]
    pub margin_mode: Option<String>,
    /// Square margins before adding them to squared distances.
    #[arg(long, global = true, num_args = 0..=1, default_missing_value = "true")]
    pub square_margins: Option<bool>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SweepKind {
    /// lambda_inter x lambda_bg
    Lambda,
    /// m_min x m_max
    Margin,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate the synthetic benchmark as CSV files.
    GenData,
    /// Train one model per trial from CSV files.
    Train {
        /// Directory written by gen-data (or laid out the same way).
        #[arg(long)]
        data: PathBuf,
    },
    /// Evaluate trained models on their test files.
    Eval {
        #[arg(long)]
        data: PathBuf,
        /// Directory written by train.
        #[arg(long)]
        model: PathBuf,
    },
    /// Sweep loss weights or margin ranges on generated data.
    Ablate {
        #[arg(long, value_enum, default_value_t = SweepKind::Lambda)]
        sweep: SweepKind,
        #[arg(long, value_delimiter = ',', default_values_t = [0.0, 0.1, 1.0])]
        inter_grid: Vec<f64>,
        #[arg(long, value_delimiter = ',', default_values_t = [0.0, 0.1, 1.0])]
        bg_grid: Vec<f64>,
        #[arg(long, value_delimiter = ',', default_values_t = [25.0, 35.0, 45.0])]
        m_min_grid: Vec<f64>,
        #[arg(long, value_delimiter = ',', default_values_t = [55.0, 65.0])]
        m_max_grid: Vec<f64>,
    },
    /// Compare uniform and dynamic margins across imbalance ratios.
    IrStudy {
        #[arg(long, value_delimiter = ',', default_values_t = [1.0, 10.0, 100.0])]
        ir_grid: Vec<f64>,
    },
}

macro_rules! set {
    ($target:expr, $value:expr) => {
        if let Some(v) = $value.clone() {
            $target = v;
        }
    };
}

impl Overrides {
    pub fn apply(&self, cfg: &mut ExperimentConfig) {
        set!(cfg.data.num_known, self.known);
        set!(cfg.data.num_unknown, self.unknown);
        set!(cfg.data.input_dim, self.input_dim);
        set!(cfg.data.majority, self.majority);
        set!(cfg.data.imbalance_ratio, self.ir);
        set!(cfg.data.cluster_std, self.cluster_std);
        set!(cfg.data.center_separation, self.separation);
        set!(cfg.data.bg_samples, self.bg_samples);
        set!(cfg.trials, self.trials);
        set!(cfg.runs, self.runs);
        set!(cfg.net.hidden_dims, self.hidden);
        if self.embed_dim.is_some() {
            cfg.net.embed_dim = self.embed_dim;
        }
        set!(cfg.net.activation, self.activation);
        set!(cfg.train.epochs, self.epochs);
        set!(cfg.train.batch_size_known, self.batch_size);
        set!(cfg.train.batch_size_bg, self.batch_size_bg);
        set!(cfg.train.learning_rate, self.lr);
        set!(cfg.train.lambda_inter, self.lambda_inter);
        set!(cfg.train.lambda_bg, self.lambda_bg);
        set!(cfg.train.m_min, self.m_min);
        set!(cfg.train.m_max, self.m_max);
        set!(cfg.train.radius, self.radius);
        set!(cfg.train.eval_every, self.eval_every);
        set!(cfg.train.margin_mode, self.margin_mode);
        set!(cfg.train.square_margins, self.square_margins);
    }
}

impl Cli {
    /// Defaults, then the config file, then flags.
    pub fn resolve_config(&self) -> Result<ExperimentConfig> {
        let mut cfg = ExperimentConfig::load_or_default(self.common.config.as_deref())?;
        set!(cfg.seed, self.common.seed);
        set!(cfg.out, self.common.out);
        self.overrides.apply(&mut cfg);
        Ok(cfg)
    }
}

fn fmt_metrics(label: &str, r: &dmdsc_core::eval::EvalReport) -> String {
    format!("{label}: acc {:.4}  auroc {:.4}  oscr {:.4}", r.acc, r.auroc, r.oscr)
}

fn require_dir(path: &Path) -> Result<()> {
    if path.is_dir() {
        Ok(())
    } else {
        Err(Error::NotFound(path.to_path_buf()))
    }
}

/// Runs the parsed command, printing a short summary to stdout.
pub fn run(cli: &Cli) -> Result<()> {
    let cfg = cli.resolve_config()?;
    let out = cfg.out.clone();
    match &cli.command {
        Command::GenData => {
            let files = experiments::gen_data(&cfg, &out)?;
            println!("wrote {} files to {}", files.len(), out.display());
        }
        Command::Train { data } => {
            require_dir(data)?;
            for t in experiments::train_from_files(&cfg, data, &out)? {
                if let Some(last) = t.log.records.last() {
                    println!(
                        "{}: epoch {} total {:.6} train_acc {}",
                        t.dir.join(CHECKPOINT).display(),
                        last.epoch,
                        last.total,
                        last.train_acc.map(|a| format!("{a:.4}")).unwrap_or_else(|| "-".into())
                    );
                }
            }
        }
        Command::Eval { data, model } => {
            require_dir(data)?;
            let first = trial_dir(model, 0, cfg.trials).join(CHECKPOINT);
            if !first.exists() {
                return Err(Error::NotFound(first));
            }
            let (reports, avg) = experiments::eval_from_files(&cfg, data, model, &out)?;
            for (i, r) in reports.iter().enumerate() {
                println!("{}", fmt_metrics(&format!("trial {i}"), r));
            }
            println!("{}", fmt_metrics("average", &avg));
        }
        Command::Ablate {
            sweep,
            inter_grid,
            bg_grid,
            m_min_grid,
            m_max_grid,
        } => {
            let table = match sweep {
                SweepKind::Lambda => experiments::ablate_lambda(&cfg, inter_grid, bg_grid)?,
                SweepKind::Margin => experiments::ablate_margin(&cfg, m_min_grid, m_max_grid)?,
            };
            experiments::save_sweep(&cfg, &table, &out)?;
            print!("{}", String::from_utf8_lossy(&table.to_csv()));
        }
        Command::IrStudy { ir_grid } => {
            let table = experiments::ir_study(&cfg, ir_grid)?;
            experiments::save_sweep(&cfg, &table, &out)?;
            print!("{}", String::from_utf8_lossy(&table.to_csv()));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cli_is_well_formed() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }

    #[test]
    fn flags_after_the_subcommand() {
        let cli = Cli::try_parse_from(["dmdsc", "gen-data", "--known", "6", "--ir", "100", "--seed", "1", "--out", "d"]).unwrap();
        let cfg = cli.resolve_config().unwrap();
        assert_eq!(cfg.seed, 1);
        assert_eq!(cfg.data.imbalance_ratio, 100.0);
        assert_eq!(cfg.out, PathBuf::from("d"));
    }

    #[test]
    fn grids_and_hidden_lists() {
        let cli = Cli::try_parse_from([
            "dmdsc", "ablate", "--inter-grid", "0,0.5", "--bg-grid", "1", "--hidden", "8,4",
        ])
        .unwrap();
        assert_eq!(cli.overrides.hidden, Some(vec![8, 4]));
        match cli.command {
            Command::Ablate { inter_grid, bg_grid, .. } => {
                assert_eq!(inter_grid, vec![0.0, 0.5]);
                assert_eq!(bg_grid, vec![1.0]);
            }
            other => panic!("{other:?}"),
        }
    }
}

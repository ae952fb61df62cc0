use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use freshreplay::{RunConfig, TrainMetrics, Trainer};

use crate::error::{CliError, CliResult};

fn write_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::WriteOutput {
        path: path.to_path_buf(),
        source,
    }
}

pub fn create(path: &Path) -> CliResult<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(write_err(path))
}

pub fn write_file(path: &Path, body: &str) -> CliResult<()> {
    fs::write(path, body).map_err(write_err(path))
}

pub fn make_dir(path: &Path) -> CliResult<()> {
    fs::create_dir_all(path).map_err(write_err(path))
}

/// Trains `cfg` and writes into `out`:
///
/// * `config.cfg` resolved configuration
/// * `metrics.jsonl` one record per iteration (deterministic for a seed)
/// * `summary.csv` iteration and mean return, headed by the effective method
/// * `timing.csv` refresh wall time per iteration
/// * `policy.ckpt` final policy
pub fn run_to_dir(cfg: &RunConfig, out: &Path, threads: usize) -> CliResult<Vec<TrainMetrics>> {
    make_dir(out)?;
    write_file(&out.join("config.cfg"), &cfg.to_config_string())?;

    let metrics_path = out.join("metrics.jsonl");
    let mut metrics_file = create(&metrics_path)?;
    let mut trainer = Trainer::new(cfg.clone())
        .map_err(CliError::Invalid)?
        .with_refresh_threads(threads);
    let mut all = Vec::with_capacity(cfg.max_iterations);
    for _ in 0..cfg.max_iterations {
        let m = trainer.run_iteration()?;
        let line = serde_json::to_string(&m).expect("metrics serialize");
        writeln!(metrics_file, "{line}").map_err(write_err(&metrics_path))?;
        all.push(m);
    }
    metrics_file.flush().map_err(write_err(&metrics_path))?;

    let mut summary = format!("iteration,{}\n", cfg.effective_method());
    let mut timing = String::from("iteration,refresh_wall_time_s\n");
    for m in &all {
        summary.push_str(&format!("{},{}\n", m.iteration, m.mean_return));
        timing.push_str(&format!("{},{}\n", m.iteration, m.refresh_wall_time));
    }
    write_file(&out.join("summary.csv"), &summary)?;
    write_file(&out.join("timing.csv"), &timing)?;

    let ckpt: PathBuf = out.join("policy.ckpt");
    let mut w = create(&ckpt)?;
    trainer.policy().write_checkpoint(&mut w)?;
    w.flush().map_err(write_err(&ckpt))?;
    Ok(all)
}

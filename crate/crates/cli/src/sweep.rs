//! One-axis sweeps. A sweep file is a run config plus three extra keys:
//!
//! ```text
//! sweep.axis = priority.tau
//! sweep.values = 500, 1000, 1500
//! sweep.seeds = 3
//! train.max_iterations = 200
//! ```
//!
//! Seeds are `seed, seed + 1, ...`. Each cell's runs land in
//! `<out>/<axis>-<value>/seed-<n>/` and `<out>/aggregate.csv` holds the
//! mean and population standard deviation of final and peak return.

use std::collections::HashSet;
use std::path::Path;

use freshreplay::config::key_values;
use freshreplay::RunConfig;

use crate::error::{CliError, CliResult};
use crate::run::{make_dir, run_to_dir, write_file};
use crate::settings::{apply_overrides, read};

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub base: RunConfig,
    pub axis: String,
    pub values: Vec<String>,
    pub seeds: usize,
}

impl SweepSpec {
    pub fn parse(text: &str) -> CliResult<Self> {
        let mut base = RunConfig::default();
        let (mut axis, mut values, mut seeds) = (None, None, 1usize);
        let mut seen = HashSet::new();
        let pairs = key_values(text).map_err(|e| CliError::Config(e.to_string()))?;
        for (line, key, value) in pairs {
            if !seen.insert(key) {
                return Err(CliError::Config(format!("line {line}: duplicate key `{key}`")));
            }
            match key {
                "sweep.axis" => axis = Some(value.to_string()),
                "sweep.values" => {
                    values = Some(
                        value
                            .split(',')
                            .map(|v| v.trim().to_string())
                            .filter(|v| !v.is_empty())
                            .collect::<Vec<_>>(),
                    )
                }
                "sweep.seeds" => {
                    seeds = value.parse().map_err(|_| {
                        CliError::Config(format!("line {line}: sweep.seeds must be a count"))
                    })?
                }
                _ => base
                    .set(key, value)
                    .map_err(|e| CliError::Config(format!("line {line}: {e}")))?,
            }
        }
        let axis = axis.ok_or_else(|| CliError::Config("missing sweep.axis".into()))?;
        let values = values.unwrap_or_default();
        let spec = Self {
            base,
            axis,
            values,
            seeds,
        };
        spec.check()?;
        Ok(spec)
    }

    fn check(&self) -> CliResult<()> {
        if !RunConfig::KEYS.contains(&self.axis.as_str()) {
            return Err(CliError::Config(format!("sweep.axis `{}` is not a config key", self.axis)));
        }
        if self.values.is_empty() {
            return Err(CliError::Config("sweep.values is empty".into()));
        }
        if self.seeds == 0 {
            return Err(CliError::Config("sweep.seeds must be positive".into()));
        }
        for cfg in self.cells()?.into_iter().flat_map(|(_, c)| c) {
            cfg.validate().map_err(CliError::Invalid)?;
        }
        Ok(())
    }

    /// Every configuration to run, grouped by axis value.
    pub fn cells(&self) -> CliResult<Vec<(String, Vec<RunConfig>)>> {
        self.values
            .iter()
            .map(|v| {
                let mut cfg = self.base.clone();
                cfg.set(&self.axis, v)
                    .map_err(|e| CliError::Config(format!("sweep value `{v}`: {e}")))?;
                let runs = (0..self.seeds as u64)
                    .map(|i| RunConfig {
                        seed: cfg.seed.wrapping_add(i),
                        ..cfg.clone()
                    })
                    .collect();
                Ok((v.clone(), runs))
            })
            .collect()
    }
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

pub fn run(spec_path: &Path, overrides: &[String], out: &Path) -> CliResult<()> {
    let mut spec = SweepSpec::parse(&read(spec_path)?)?;
    apply_overrides(&mut spec.base, overrides)?;
    spec.check()?;
    make_dir(out)?;
    let threads = crate::refresh_threads();

    let mut aggregate = format!("{},seeds,final_mean,final_std,peak_mean,peak_std\n", spec.axis);
    for (value, runs) in spec.cells()? {
        let (mut finals, mut peaks) = (Vec::new(), Vec::new());
        for cfg in runs {
            let dir = out.join(format!("{}-{}", spec.axis, value)).join(format!("seed-{}", cfg.seed));
            let m = run_to_dir(&cfg, &dir, threads)?;
            finals.push(m.last().expect("non-empty run").mean_return);
            peaks.push(m.iter().map(|x| x.mean_return).fold(f64::NEG_INFINITY, f64::max));
            println!("{}={} seed {}: final {:.4}", spec.axis, value, cfg.seed, finals.last().unwrap());
        }
        let (fm, fs) = mean_std(&finals);
        let (pm, ps) = mean_std(&peaks);
        aggregate.push_str(&format!("{value},{},{fm},{fs},{pm},{ps}\n", finals.len()));
    }
    write_file(&out.join("aggregate.csv"), &aggregate)
}

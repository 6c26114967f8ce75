use std::path::Path;
use std::time::Duration;

use mgamsgd::compare::{compare as run_compare, CompareConfig, Method};
use mgamsgd::elasticity::END_LOAD;
use mgamsgd::network::forward;
use mgamsgd::reference::{analytic_uniaxial, cube_grid};
use mgamsgd::sensitivity::{morris_oat, table1, training_evaluator, RunSample, SweepRun};
use mgamsgd::trainer::{train_mga_msgd, TrainConfig};

use crate::config::load_train_config;
use crate::report::{csv, num, RunReport};
use crate::{checkpoint, CliError};

pub const CHECKPOINT_FILE: &str = "checkpoint.bin";
pub const REPORT_FILE: &str = "report.toml";
pub const FSGD_CSV: &str = "fsgd_loss.csv";
pub const TIMELINE_CSV: &str = "loss_vs_time.csv";
pub const SUMMARY_CSV: &str = "summary.csv";

fn write(path: &Path, contents: impl AsRef<[u8]>) -> Result<(), CliError> {
    std::fs::write(path, contents).map_err(|e| CliError::io(path, e))
}

fn create_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

pub fn train(config: Option<&Path>, seed: Option<u64>, out: &Path) -> Result<(), CliError> {
    let mut cfg = load_train_config(config)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    create_dir(out)?;
    let result = train_mga_msgd(&cfg, &cfg.problem(), &cfg.material()?).map_err(|a| {
        CliError::Training(format!(
            "{} (after {} generations)",
            a.error,
            a.trace.generations.len()
        ))
    })?;

    checkpoint::save(&out.join(CHECKPOINT_FILE), &result.params)?;
    write(
        &out.join(REPORT_FILE),
        RunReport::new(&cfg, &result)?.to_toml()?,
    )?;
    let curve = result
        .trace
        .fsgd_curve
        .iter()
        .enumerate()
        .map(|(i, &l)| [i.to_string(), num(l)]);
    write(&out.join(FSGD_CSV), csv("iteration,loss", curve))?;
    println!(
        "seed {}: MSE {:.4e} (initial {:.4e}), {} of {} generations accepted, {:.2} s",
        cfg.seed,
        result.loss.mse,
        result.trace.mse_i,
        result.trace.accepted_count(),
        result.trace.generations.len(),
        result.trace.total_time
    );
    Ok(())
}

pub fn compare(
    config: Option<&Path>,
    budget_seconds: f64,
    seeds: u64,
    out: &Path,
) -> Result<(), CliError> {
    let cfg = load_train_config(config)?;
    if !(budget_seconds > 0.0 && budget_seconds.is_finite()) {
        return Err(CliError::Config(format!(
            "budget must be positive, got {budget_seconds}"
        )));
    }
    if seeds < 1 {
        return Err(CliError::Config("need at least one seed".into()));
    }
    let seed_list: Vec<u64> = (0..seeds).map(|k| cfg.seed.wrapping_add(k)).collect();
    let cmp = CompareConfig::new(&cfg, Duration::from_secs_f64(budget_seconds), seed_list);
    let report = run_compare(&cfg, &cfg.problem(), &cfg.material()?, &cmp)?;

    create_dir(out)?;
    let mut points = Vec::new();
    for run in &report.runs {
        if let Ok(s) = &run.result {
            for &(t, l) in &s.timeline {
                points.push([
                    run.method.name().to_string(),
                    run.seed.to_string(),
                    num(t),
                    num(l),
                ]);
            }
        }
    }
    write(
        &out.join(TIMELINE_CSV),
        csv("method,seed,time,loss", points),
    )?;

    let summary = Method::ALL.map(|m| {
        let completed = report.runs_of(m).count() - report.failures(m);
        [
            m.name().to_string(),
            if report.failed(m) { "failed" } else { "ok" }.to_string(),
            completed.to_string(),
            report.failures(m).to_string(),
            report
                .median_final_loss(m)
                .map_or_else(|| "NaN".to_string(), num),
        ]
    });
    for row in &summary {
        println!("{:<9} {:<6} median final loss {}", row[0], row[1], row[4]);
    }
    write(
        &out.join(SUMMARY_CSV),
        csv("method,status,completed,failed,median_final_loss", summary),
    )?;
    if Method::ALL.iter().all(|&m| report.failed(m)) {
        return Err(CliError::Training("every method failed".into()));
    }
    Ok(())
}

pub fn field(
    checkpoint_path: &Path,
    grid: usize,
    out: &Path,
    error: bool,
    config: Option<&Path>,
) -> Result<(), CliError> {
    let params = checkpoint::load(checkpoint_path)?;
    if grid < 1 {
        return Err(CliError::Config(
            "grid must have at least one point per axis".into(),
        ));
    }
    let exact = if error {
        let cfg = load_train_config(config)?;
        Some(analytic_uniaxial(cfg.material()?, END_LOAD[0]))
    } else {
        None
    };
    let header = if error {
        "x,y,z,ux,uy,uz,eux,euy,euz"
    } else {
        "x,y,z,ux,uy,uz"
    };
    let rows = cube_grid(grid).into_iter().map(|x| {
        let u = forward(&params, x);
        let mut row: Vec<String> = x.iter().chain(&u).map(|&v| num(v)).collect();
        if let Some(a) = &exact {
            let r = a.displacement(x);
            row.extend((0..3).map(|k| num(u[k] - r[k])));
        }
        row
    });
    write(out, csv(header, rows))
}

pub fn sensitivity(
    config: Option<&Path>,
    levels: usize,
    reps: usize,
    out: &Path,
) -> Result<(), CliError> {
    let template = load_train_config(config)?;
    sensitivity_with(
        &template,
        levels,
        reps,
        out,
        training_evaluator(|c| c.problem()),
    )
}

/// [`sensitivity`] with an arbitrary evaluator in place of training.
pub fn sensitivity_with<F>(
    template: &TrainConfig,
    levels: usize,
    reps: usize,
    out: &Path,
    evaluate: F,
) -> Result<(), CliError>
where
    F: FnMut(&SweepRun) -> mgamsgd::Result<RunSample>,
{
    let result = morris_oat(template, &table1(), levels, reps, template.seed, evaluate)?;
    let rows = result.rows().into_iter().map(|(p, m, mu, sigma)| {
        [
            p.name().to_string(),
            m.name().to_string(),
            num(mu),
            num(sigma),
        ]
    });
    write(out, csv("param,metric,mu,sigma", rows))?;
    let dead: Vec<&str> = result
        .sweeps
        .iter()
        .filter(|s| s.totally_failed())
        .map(|s| s.range.param.name())
        .collect();
    if !dead.is_empty() {
        return Err(CliError::Training(format!(
            "every run failed for {}",
            dead.join(", ")
        )));
    }
    Ok(())
}

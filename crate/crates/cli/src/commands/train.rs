use crate::datasets::resolve_dataset;
use crate::errors::CliError;
use crate::manifest::{run_id, write_manifest, CHECKPOINT_FILE, TRACE_FILE};
use crate::overrides::apply_overrides;
use crate::TrainArgs;
use std::collections::BTreeSet;
use wae_core::models::checkpoint::{save_checkpoint, Checkpoint};
use wae_core::models::config::RunConfig;
use wae_core::models::{train_observed, TrainError, TrainOutput};

pub fn effective_config(args: &TrainArgs) -> Result<RunConfig, CliError> {
    let base = match &args.config {
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| CliError::io("reading config", e))?;
            RunConfig::from_toml(&text)?
        }
        None => RunConfig::default(),
    };
    let mut sets = args.set.clone();
    if let Some(seed) = args.seed {
        sets.push(format!("run.seed={seed}"));
    }
    if let Some(ds) = &args.dataset {
        sets.push(format!("data.dataset={ds}"));
    }
    apply_overrides(&base, &sets)
}

pub fn run(args: &TrainArgs) -> Result<(), CliError> {
    let cfg = effective_config(args)?;
    cfg.validate()?;
    let dataset = resolve_dataset(&cfg.data.dataset, cfg.run.seed, cfg.data.test_fraction)?;

    let id = run_id(&cfg);
    let run_dir = crate::commands::output_root(&args.out).join(&id);
    write_manifest(&run_dir, &cfg, &dataset.provenance)?;

    let boundaries: BTreeSet<usize> = cfg.optim.lr_schedule.iter().map(|(e, _)| *e).collect();
    let mut observer_err: Option<CliError> = None;
    let cfg_for_obs = cfg.clone();
    let dir_for_obs = run_dir.clone();
    let mut observer = |out: &TrainOutput| {
        if boundaries.contains(&out.epochs_done) && observer_err.is_none() {
            let ckpt = Checkpoint::from_train_output(&cfg_for_obs, out);
            let path = dir_for_obs.join(format!("checkpoint_epoch_{:04}.bin", out.epochs_done));
            if let Err(e) = save_checkpoint(&path, &ckpt) {
                observer_err = Some(e.into());
            }
        }
    };

    let result = train_observed(&dataset, &cfg, Some(&mut observer));
    if let Some(e) = observer_err {
        return Err(e);
    }
    let finish = |out: &TrainOutput| -> Result<(), CliError> {
        save_checkpoint(
            &run_dir.join(CHECKPOINT_FILE),
            &Checkpoint::from_train_output(&cfg, out),
        )?;
        std::fs::write(run_dir.join(TRACE_FILE), out.trace.to_csv())
            .map_err(|e| CliError::io("writing trace", e))?;
        Ok(())
    };
    match result {
        Ok(out) => {
            finish(&out)?;
            println!(
                "run {id}: {} epochs, outputs in {}",
                out.epochs_done,
                run_dir.display()
            );
            Ok(())
        }
        Err(TrainError::NonFinite {
            epoch,
            batch,
            last_good,
        }) => {
            finish(&last_good)?;
            Err(CliError::Numeric(format!(
                "non-finite loss at epoch {epoch}, batch {batch}; last good checkpoint ({} epochs) kept in {}",
                last_good.epochs_done,
                run_dir.display()
            )))
        }
        Err(TrainError::Config(e)) => Err(e.into()),
        Err(TrainError::BadData(m)) => Err(CliError::Data(m)),
        Err(TrainError::Data(e)) => Err(e.into()),
        Err(other) => Err(CliError::Numeric(other.to_string())),
    }
}

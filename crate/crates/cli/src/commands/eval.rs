use crate::datasets::resolve_dataset;
use crate::errors::CliError;
use crate::manifest::{run_id, METRICS_FILE};
use crate::pgm::{square_image_side, tile_grid, write_pgm};
use crate::EvalArgs;
use std::io::Write;
use std::path::Path;
use std::time::Instant;
use wae_core::data::Dataset;
use wae_core::divergence::{
    gan_encoder_penalty, gaussian_kl, mmd_value, LatentBatchPair,
};
use wae_core::graph::Graph;
use wae_core::metrics::{
    feature_map, fit_gaussian, frechet_distance, sharpness, FeatureKind, ImageBatch,
    MetricsRow, METRICS_CSV_HEADER,
};
use wae_core::models::checkpoint::Checkpoint;
use wae_core::models::config::PenaltyKind;
use wae_core::rng::{stream_rng, Stream};
use wae_core::tensor::Tensor;

pub fn clamp01(t: &Tensor) -> Tensor {
    let vals: Vec<f64> = t.values().iter().map(|v| v.clamp(0.0, 1.0)).collect();
    Tensor::new(t.shape().to_vec(), vals).expect("clamp shape")
}

fn mean_recon(ckpt: &Checkpoint, x: &Tensor) -> Result<f64, CliError> {
    let recon = ckpt.model.reconstruct(x)?;
    wae_core::models::reconstruction_cost_value(x, &recon)
        .map_err(|e| CliError::Numeric(e.to_string()))
}

/// Latent penalty of the checkpointed model on test encodings against
/// fresh prior samples (evaluation stream).
pub fn penalty_value(ckpt: &Checkpoint, test_x: &Tensor) -> Result<f64, CliError> {
    let cfg = &ckpt.config;
    let n = cfg.run.batch_size.min(test_x.rows()).max(2);
    let n = n.min(test_x.rows());
    if n < 2 {
        return Err(CliError::Data(
            "penalty evaluation needs at least 2 test examples".into(),
        ));
    }
    let head = {
        let d = test_x.cols();
        let mut vals = Vec::with_capacity(n * d);
        for i in 0..n {
            vals.extend_from_slice(test_x.row(i));
        }
        Tensor::matrix(n, d, vals).expect("head shape")
    };
    let mut rng = stream_rng(cfg.run.seed, Stream::Eval);
    let encoded = ckpt.model.encode(&head, &mut rng)?;
    let prior = wae_core::data::sample_prior_with(&mut rng, &cfg.prior_spec(), n);
    match cfg.penalty.kind {
        PenaltyKind::Mmd => {
            let pair = LatentBatchPair::new(prior, encoded)
                .map_err(|e| CliError::Data(e.to_string()))?;
            mmd_value(&cfg.kernel_spec(), &pair).map_err(|e| CliError::Numeric(e.to_string()))
        }
        PenaltyKind::Gan => {
            let disc = ckpt
                .disc
                .as_ref()
                .ok_or_else(|| CliError::Data("checkpoint has no adversary".into()))?;
            let mut g = Graph::new();
            let nodes = disc.network.insert_consts(&mut g);
            let e = g.input(encoded);
            let pen = gan_encoder_penalty(&mut g, disc, &nodes, e, cfg.prior.sigma_z2)
                .map_err(|e| CliError::Numeric(e.to_string()))?;
            Ok(g.value(pen).item())
        }
        PenaltyKind::VaeKl => {
            let out = ckpt.model.encoder.apply(&head);
            let d_z = ckpt.model.d_z;
            let mut total = 0.0;
            for i in 0..out.rows() {
                let row = out.row(i);
                total += gaussian_kl(&row[..d_z], &row[d_z..]);
            }
            Ok(total / out.rows() as f64)
        }
    }
}

fn append_metrics_row(dir: &Path, row: &MetricsRow) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io("creating output dir", e))?;
    let path = dir.join(METRICS_FILE);
    let fresh = !path.exists();
    let mut f = std::fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(&path)
        .map_err(|e| CliError::io("opening metrics csv", e))?;
    if fresh {
        writeln!(f, "{METRICS_CSV_HEADER}").map_err(|e| CliError::io("metrics header", e))?;
    }
    writeln!(f, "{}", row.to_csv()).map_err(|e| CliError::io("metrics row", e))?;
    Ok(())
}

fn first_rows(x: &Tensor, n: usize) -> Tensor {
    let n = n.min(x.rows());
    let d = x.cols();
    let mut vals = Vec::with_capacity(n * d);
    for i in 0..n {
        vals.extend_from_slice(x.row(i));
    }
    Tensor::matrix(n, d, vals).expect("head rows")
}

pub fn run(args: &EvalArgs) -> Result<(), CliError> {
    let started = Instant::now();
    let ckpt = crate::commands::load_ckpt(&args.checkpoint)?;
    let cfg = ckpt.config.clone();
    let dataset_str = args
        .dataset
        .clone()
        .unwrap_or_else(|| cfg.data.dataset.clone());
    let dataset: Dataset = resolve_dataset(&dataset_str, cfg.run.seed, cfg.data.test_fraction)?;
    if dataset.d_x() != cfg.model.d_x {
        return Err(CliError::Data(format!(
            "dataset d_x {} does not match checkpoint d_x {}",
            dataset.d_x(),
            cfg.model.d_x
        )));
    }
    let out_dir = crate::commands::artifact_dir(&args.out, &args.checkpoint);
    std::fs::create_dir_all(&out_dir).map_err(|e| CliError::io("creating output dir", e))?;

    let train_x = dataset.train();
    let test_x = dataset.test();
    let recon_train = mean_recon(&ckpt, &train_x)?;
    let recon_test = mean_recon(&ckpt, &test_x)?;
    let penalty = penalty_value(&ckpt, &test_x)?;

    let mut rng = stream_rng(cfg.run.seed, Stream::Eval);
    let samples = ckpt.model.sample(&cfg.prior_spec(), args.samples, &mut rng);

    let (sharpness_samples, fd_features) = match square_image_side(cfg.model.d_x) {
        Some(side) => {
            let clamped = clamp01(&samples);
            let batch = ImageBatch::from_rows(&clamped, side, side)?;
            let sharp = sharpness(&batch)?;

            let test_batch = ImageBatch::from_rows(&clamp01(&test_x), side, side)?;
            let fa = fit_gaussian(&feature_map(&batch, FeatureKind::PooledPixels))?;
            let fb = fit_gaussian(&feature_map(&test_batch, FeatureKind::PooledPixels))?;
            let fd = frechet_distance(&fa, &fb)?;

            let grid = tile_grid(&clamped, args.samples.div_ceil(8), 8, side, side);
            write_pgm(&out_dir.join("samples.pgm"), &grid)?;

            // Reconstruction grid: odd rows (1-based) are the real test
            // points, even rows their reconstructions.
            let pairs = 4usize.min(test_x.rows() / 8).max(1);
            let shown = first_rows(&test_x, pairs * 8);
            let recs = clamp01(&ckpt.model.reconstruct(&shown)?);
            let mut rows = Vec::new();
            for p in 0..pairs {
                for c in 0..8.min(shown.rows() - p * 8) {
                    rows.extend_from_slice(shown.row(p * 8 + c));
                }
                for c in 0..8.min(shown.rows() - p * 8) {
                    rows.extend_from_slice(recs.row(p * 8 + c));
                }
            }
            let count = rows.len() / cfg.model.d_x;
            let rec_imgs = Tensor::matrix(count, cfg.model.d_x, rows).expect("recon grid rows");
            let rec_grid = tile_grid(&rec_imgs, 2 * pairs, 8, side, side);
            write_pgm(&out_dir.join("reconstructions.pgm"), &rec_grid)?;

            // Interpolation grid: each row interpolates one test pair.
            let n_rows = 4usize.min(test_x.rows() / 2).max(1);
            let mut interp_rows = Vec::new();
            for p in 0..n_rows {
                let a = first_rows(&test_x, 2 * p + 1);
                let x_row = Tensor::matrix(1, cfg.model.d_x, a.row(2 * p).to_vec())
                    .expect("pair row");
                let y_row = Tensor::matrix(
                    1,
                    cfg.model.d_x,
                    test_x.row(2 * p + 1).to_vec(),
                )
                .expect("pair row");
                let line = clamp01(&ckpt.model.interpolate(&x_row, &y_row, args.steps)?);
                for s in 0..line.rows() {
                    interp_rows.extend_from_slice(line.row(s));
                }
            }
            let count = interp_rows.len() / cfg.model.d_x;
            let imgs =
                Tensor::matrix(count, cfg.model.d_x, interp_rows).expect("interp grid rows");
            let grid = tile_grid(&imgs, n_rows, args.steps, side, side);
            write_pgm(&out_dir.join("interpolations.pgm"), &grid)?;

            (Some(sharp), Some(fd))
        }
        None => {
            // Non-image data: Fréchet distance directly on coordinates,
            // samples exported as CSV.
            let fa = fit_gaussian(&samples)?;
            let fb = fit_gaussian(&test_x)?;
            let fd = frechet_distance(&fa, &fb)?;
            let mut csv = String::from("x0,x1\n");
            for i in 0..samples.rows() {
                let r = samples.row(i);
                csv.push_str(&format!("{},{}\n", r[0], r[1]));
            }
            std::fs::write(out_dir.join("samples.csv"), csv)
                .map_err(|e| CliError::io("writing samples csv", e))?;
            (None, Some(fd))
        }
    };

    let row = MetricsRow {
        run_id: run_id(&cfg),
        epoch: ckpt.epoch as usize,
        recon_train,
        recon_test,
        penalty,
        sharpness_samples,
        fd_features,
        wall_clock_s: started.elapsed().as_secs_f64(),
    };
    append_metrics_row(&out_dir, &row)?;
    println!(
        "eval: recon_train={recon_train:.6} recon_test={recon_test:.6} penalty={penalty:.6}{}{}",
        sharpness_samples
            .map(|s| format!(" sharpness={s:.6}"))
            .unwrap_or_default(),
        fd_features
            .map(|f| format!(" fd={f:.6}"))
            .unwrap_or_default(),
    );
    Ok(())
}

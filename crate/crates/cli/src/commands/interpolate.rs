use crate::datasets::resolve_dataset;
use crate::errors::CliError;
use crate::pgm::{square_image_side, tile_grid, write_pgm};
use crate::InterpolateArgs;
use wae_core::tensor::Tensor;

pub fn run(args: &InterpolateArgs) -> Result<(), CliError> {
    if args.steps < 2 {
        return Err(CliError::Config(format!(
            "--steps must be >= 2, got {}",
            args.steps
        )));
    }
    let ckpt = crate::commands::load_ckpt(&args.checkpoint)?;
    let cfg = &ckpt.config;
    let dataset_str = args
        .dataset
        .clone()
        .unwrap_or_else(|| cfg.data.dataset.clone());
    let dataset = resolve_dataset(&dataset_str, cfg.run.seed, cfg.data.test_fraction)?;
    if dataset.d_x() != cfg.model.d_x {
        return Err(CliError::Data(format!(
            "dataset d_x {} does not match checkpoint d_x {}",
            dataset.d_x(),
            cfg.model.d_x
        )));
    }
    let test_x = dataset.test();
    let pairs = args.pairs.min(test_x.rows() / 2);
    if pairs == 0 {
        return Err(CliError::Data("need at least 2 test examples".into()));
    }
    let d = cfg.model.d_x;
    let out_dir = crate::commands::artifact_dir(&args.out, &args.checkpoint);
    std::fs::create_dir_all(&out_dir).map_err(|e| CliError::io("creating output dir", e))?;

    let mut all_rows = Vec::new();
    for p in 0..pairs {
        let x = Tensor::matrix(1, d, test_x.row(2 * p).to_vec()).expect("pair x");
        let y = Tensor::matrix(1, d, test_x.row(2 * p + 1).to_vec()).expect("pair y");
        let line = ckpt.model.interpolate(&x, &y, args.steps)?;
        for s in 0..line.rows() {
            all_rows.extend_from_slice(line.row(s));
        }
    }
    let n = all_rows.len() / d;
    let imgs = Tensor::matrix(n, d, all_rows).expect("interp rows");

    match square_image_side(d) {
        Some(side) => {
            let grid = tile_grid(&super::eval::clamp01(&imgs), pairs, args.steps, side, side);
            let path = out_dir.join("interpolations.pgm");
            write_pgm(&path, &grid)?;
            println!("wrote interpolation grid to {}", path.display());
        }
        None => {
            let mut csv = String::from("pair,step,x0,x1\n");
            for p in 0..pairs {
                for s in 0..args.steps {
                    let r = imgs.row(p * args.steps + s);
                    csv.push_str(&format!("{p},{s},{},{}\n", r[0], r[1]));
                }
            }
            let path = out_dir.join("interpolations.csv");
            std::fs::write(&path, csv)
                .map_err(|e| CliError::io("writing interpolation csv", e))?;
            println!("wrote interpolations to {}", path.display());
        }
    }
    Ok(())
}

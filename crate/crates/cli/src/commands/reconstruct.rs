use crate::datasets::resolve_dataset;
use crate::errors::CliError;
use crate::pgm::{square_image_side, tile_grid, write_pgm};
use crate::ReconstructArgs;
use wae_core::tensor::Tensor;

pub fn run(args: &ReconstructArgs) -> Result<(), CliError> {
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
    let count = args.count.min(test_x.rows());
    if count == 0 {
        return Err(CliError::Data("no test examples to reconstruct".into()));
    }
    let d = cfg.model.d_x;
    let mut vals = Vec::with_capacity(count * d);
    for i in 0..count {
        vals.extend_from_slice(test_x.row(i));
    }
    let shown = Tensor::matrix(count, d, vals).expect("shown rows");
    let recon = ckpt.model.reconstruct(&shown)?;
    let out_dir = crate::commands::artifact_dir(&args.out, &args.checkpoint);
    std::fs::create_dir_all(&out_dir).map_err(|e| CliError::io("creating output dir", e))?;

    match square_image_side(d) {
        Some(side) => {
            // Alternate rows: odd rows (1-based) real, even rows decoded.
            let cols = 8usize.min(count);
            let pair_rows = count.div_ceil(cols);
            let clamped = super::eval::clamp01(&recon);
            let mut rows = Vec::new();
            for p in 0..pair_rows {
                let upto = cols.min(count - p * cols);
                for c in 0..upto {
                    rows.extend_from_slice(shown.row(p * cols + c));
                }
                for c in 0..upto {
                    rows.extend_from_slice(clamped.row(p * cols + c));
                }
            }
            let n = rows.len() / d;
            let imgs = Tensor::matrix(n, d, rows).expect("grid rows");
            let grid = tile_grid(&imgs, 2 * pair_rows, cols, side, side);
            let path = out_dir.join("reconstructions.pgm");
            write_pgm(&path, &grid)?;
            println!("wrote reconstruction grid to {}", path.display());
        }
        None => {
            let mut csv = String::from("x0,x1,r0,r1\n");
            for i in 0..count {
                let (a, b) = (shown.row(i), recon.row(i));
                csv.push_str(&format!("{},{},{},{}\n", a[0], a[1], b[0], b[1]));
            }
            let path = out_dir.join("reconstructions.csv");
            std::fs::write(&path, csv)
                .map_err(|e| CliError::io("writing reconstruction csv", e))?;
            println!("wrote reconstructions to {}", path.display());
        }
    }
    Ok(())
}

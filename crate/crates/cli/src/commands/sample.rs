use crate::errors::CliError;
use crate::pgm::{square_image_side, tile_grid, write_pgm};
use crate::SampleArgs;
use wae_core::rng::{stream_rng, Stream};

pub fn run(args: &SampleArgs) -> Result<(), CliError> {
    let ckpt = crate::commands::load_ckpt(&args.checkpoint)?;
    let cfg = &ckpt.config;
    let seed = args.seed.unwrap_or(cfg.run.seed);
    let mut rng = stream_rng(seed, Stream::Eval);
    let samples = ckpt.model.sample(&cfg.prior_spec(), args.count, &mut rng);
    let out_dir = crate::commands::artifact_dir(&args.out, &args.checkpoint);
    std::fs::create_dir_all(&out_dir).map_err(|e| CliError::io("creating output dir", e))?;

    match square_image_side(cfg.model.d_x) {
        Some(side) => {
            let clamped = super::eval::clamp01(&samples);
            let cols = 8usize.min(args.count.max(1));
            let rows = args.count.div_ceil(cols.max(1)).max(1);
            let grid = tile_grid(&clamped, rows, cols, side, side);
            let path = out_dir.join("samples.pgm");
            write_pgm(&path, &grid)?;
            println!("wrote {} samples to {}", args.count, path.display());
        }
        None => {
            let mut csv = String::from("x0,x1\n");
            for i in 0..samples.rows() {
                let r = samples.row(i);
                csv.push_str(&format!("{},{}\n", r[0], r[1]));
            }
            let path = out_dir.join("samples.csv");
            std::fs::write(&path, csv).map_err(|e| CliError::io("writing samples csv", e))?;
            println!("wrote {} samples to {}", args.count, path.display());
        }
    }
    Ok(())
}

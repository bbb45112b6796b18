use std::path::PathBuf;

use clap::Args;
use surgsched::instgen::{generate_instance, save_instance, GenParams};

use crate::create_dir;
use crate::error::CliError;

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[arg(long)]
    pub surgeons: usize,
    #[arg(long, default_value_t = 1)]
    pub rooms: u32,
    /// Load factor: total surgery duration over capacity.
    #[arg(long)]
    pub lf: f64,
    #[arg(long, default_value_t = 5)]
    pub days: usize,
    #[arg(long, default_value_t = 1)]
    pub count: usize,
    /// Seed of the first instance; instance `i` uses `seed + i`.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 0.025)]
    pub lf_tolerance: f64,
    /// Output directory.
    #[arg(long, short, default_value = ".")]
    pub out: PathBuf,
    /// File name prefix (default `s<S>_r<R>_lf<lf>_d<D>`).
    #[arg(long)]
    pub prefix: Option<String>,
}

pub fn run(args: &GenerateArgs) -> Result<(), CliError> {
    create_dir(&args.out)?;
    let prefix = args
        .prefix
        .clone()
        .unwrap_or_else(|| format!("s{}_r{}_lf{}_d{}", args.surgeons, args.rooms, args.lf, args.days));
    for i in 0..args.count {
        let mut params = GenParams::new(args.surgeons, args.rooms, args.lf, args.seed.wrapping_add(i as u64));
        params.days = args.days;
        params.lf_tolerance = args.lf_tolerance;
        let inst = generate_instance(&params)?;
        let path = args.out.join(format!("{prefix}_{i:03}.json"));
        save_instance(&inst, &path)?;
        println!("{}", path.display());
    }
    Ok(())
}

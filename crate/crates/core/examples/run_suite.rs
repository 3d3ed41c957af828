//! Runs a benchmark table and prints it. Defaults to the generator
//! configuration ablation with two seeds; the full protocol uses five.
//!
//!     cargo run --release --example run_suite -- noise_ablation /tmp/noise

use std::path::PathBuf;

use mmbc::experiment::{run_suite, suite_table_text, Suite};

fn main() -> mmbc::Result<()> {
    let mut args = std::env::args().skip(1);
    let suite: Suite = args.next().as_deref().unwrap_or("generator_config_ablation").parse()?;
    let out = args.next().map(PathBuf::from);
    let rows = run_suite(suite, out.as_deref(), &[0, 1])?;
    print!("{}", suite_table_text(suite, &rows));
    Ok(())
}

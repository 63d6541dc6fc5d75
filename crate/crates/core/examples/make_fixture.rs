//! Writes the synthetic collinear count fixture used by the tests and README.
//!
//! cargo run -p liutype-nb --example make_fixture -- <n> <rho> <seed> <path>

use std::path::PathBuf;

use liutype_nb::cli_io::{synthetic_table, write_csv};
use liutype_nb::Overdispersion;

fn main() -> liutype_nb::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let n: usize = args.first().map_or(21, |s| s.parse().expect("n"));
    let rho: f64 = args.get(1).map_or(0.999, |s| s.parse().expect("rho"));
    let seed: u64 = args.get(2).map_or(2013, |s| s.parse().expect("seed"));
    let path = PathBuf::from(args.get(3).map_or("collinear_counts.csv", String::as_str));
    let table = synthetic_table(n, rho, seed)?;
    let data = table.dataset(Overdispersion::new(1.0)?)?;
    let xx = data.x().tr_mul(data.x());
    let c = liutype_nb::risk_analysis::condition_measure(&xx)?;
    write_csv(&table, &path)?;
    println!("wrote {} (n = {n}, sqrt condition of X'X = {:.2})", path.display(), c.sqrt_ratio);
    Ok(())
}

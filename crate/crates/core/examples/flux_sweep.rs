//! Transition frequencies and charge elements of device A over one flux
//! period, written as CSV to stdout.

use iflux::circuit::{flux_sweep, write_sweep_csv, BasisConfig};
use iflux::devices::device;

fn main() -> iflux::Result<()> {
    let params = device("A")?.circuit;
    let grid: Vec<f64> = (0..=100).map(|k| -0.5 + 0.01 * k as f64).collect();
    let points = flux_sweep(&params, &grid, 4, &BasisConfig::default_for(&params)?)?;
    write_sweep_csv(&points, std::io::stdout().lock())
}

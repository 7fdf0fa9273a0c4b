//! Spectra and matrix elements of every builtin device at integer flux.
//!
//! Run with `cargo run --release --example spectrum`.

use iflux::circuit::{BasisConfig, FluxBias, HamiltonianBuilder, OperatorKind};
use iflux::devices::DEVICES;

fn main() -> iflux::Result<()> {
    println!("device  f01[GHz]  f12[MHz]  f03[GHz]  |n01|^2    |n03|^2    |n02|      levels");
    for d in &DEVICES {
        let basis = BasisConfig::default_for(&d.circuit)?;
        let spec = HamiltonianBuilder::new(&d.circuit, &basis)?.solve(&FluxBias::zero())?;
        let n = |i, j| spec.matrix_element(OperatorKind::ChargeN, i, j).map(f64::abs);
        println!(
            "{:<6}  {:>8.4}  {:>8.2}  {:>8.3}  {:.3e}  {:.3e}  {:.1e}  {}",
            d.name,
            spec.f01()?,
            spec.transition_frequency(1, 2)? * 1e3,
            spec.transition_frequency(0, 3)?,
            n(0, 1)?.powi(2),
            n(0, 3)?.powi(2),
            n(0, 2)?,
            spec.reliable_levels(),
        );
    }
    Ok(())
}

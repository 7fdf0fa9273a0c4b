//! Phase-space wavefunctions of the lowest four states of device D, as CSV.
//!
//! The ground state sits in the central well; the doublet states are the
//! symmetric and antisymmetric fluxon combinations in the neighbouring wells.

use std::f64::consts::PI;

use iflux::circuit::{wavefunction, BasisConfig, FluxBias, HamiltonianBuilder};
use iflux::devices::device;

fn main() -> iflux::Result<()> {
    let params = device("D")?.circuit;
    let spec = HamiltonianBuilder::new(&params, &BasisConfig::default_for(&params)?)?.solve(&FluxBias::zero())?;
    let grid: Vec<f64> = (0..=400).map(|k| -3.0 * PI + 6.0 * PI * k as f64 / 400.0).collect();
    let waves = (0..4).map(|j| wavefunction(&spec, j, &grid)).collect::<iflux::Result<Vec<_>>>()?;
    println!("phi,psi0,psi1,psi2,psi3");
    for (k, phi) in grid.iter().enumerate() {
        let row: Vec<String> = waves.iter().map(|w| format!("{:.6e}", w.values[k])).collect();
        println!("{phi:.6},{}", row.join(","));
    }
    Ok(())
}

//! Fit the fluxon model to the full-model doublet of each device and compare
//! the perturbative doublet with exact diagonalization.

use iflux::devices::DEVICES;
use iflux::fluxon::{fit_fluxon_to_full, fluxon_energies, perturbative_doublet, DualFitOptions, FluxonBasisConfig};
use iflux::circuit::FluxBias;

fn main() -> iflux::Result<()> {
    let opts = DualFitOptions::default();
    println!("device  E_LS[GHz]  eps1[MHz]  eps2[MHz]  alpha   max rel. error");
    for d in &DEVICES {
        let fit = fit_fluxon_to_full(&d.circuit, &opts)?;
        println!(
            "{:<6}  {:>9.4}  {:>9.1}  {:>9.1}  {:.4}  {:.2}%",
            d.name,
            fit.e_l_sigma,
            fit.eps1 * 1e3,
            fit.eps2 * 1e3,
            fit.params().alpha(),
            100.0 * fit.max_relative_error
        );
    }
    println!();
    println!("tabulated fluxon parameters: perturbative vs exact f12 [MHz]");
    for d in &DEVICES {
        let Some(fp) = d.fluxon else { continue };
        let pert = perturbative_doublet(&fp)?;
        let e = fluxon_energies(&fp, &FluxBias::zero(), &FluxonBasisConfig::new(1)?)?;
        println!("{:<6}  {:>8.2}  {:>8.2}", d.name, pert.f12 * 1e3, (e[2] - e[1]) * 1e3);
    }
    Ok(())
}

//! Relaxation and dephasing budget of device D at integer flux, including
//! the thermal-photon limit set by its readout cavity, and the dielectric
//! quality factors implied by each device's measured T1.

use std::f64::consts::PI;

use iflux::budget::{budget_with, qdiel_from_t1, ramsey_t2_star, Cavity, NoiseEnvironment, Q2Formula};
use iflux::circuit::{BasisConfig, FluxBias, HamiltonianBuilder};
use iflux::devices::{self, DEVICES};

fn main() -> iflux::Result<()> {
    let d = devices::device("D")?;
    let builder = HamiltonianBuilder::new(&d.circuit, &BasisConfig::default_for(&d.circuit)?)?;
    let cavity = Cavity {
        f_cavity: devices::DEVICE_D_CAVITY_GHZ,
        kappa: 2.0 * PI * devices::DEVICE_D_KAPPA_MHZ * 1e6,
        chi01: 2.0 * PI * devices::DEVICE_D_CHI01_MHZ * 1e6,
        temperature: devices::DEVICE_D_CAVITY_TEMPERATURE_K,
    };
    let env = NoiseEnvironment::new(d.inferred.q_diel, devices::DEVICE_D_A_1F)?.with_cavity(cavity)?;
    let b = budget_with(&builder, &FluxBias::zero(), &env, Q2Formula::Text)?;
    println!("device D at phi_ext = 0");
    println!("  f01          {:.4} GHz", b.f01_ghz);
    println!("  |n01|        {:.4}", b.n01);
    println!("  T1           {:.1} us   (Q1 = {:.2e})", b.t1 * 1e6, b.q1);
    println!("  T_phi 1/f    {:.1} us   (second order)", b.t_phi_second * 1e6);
    println!("  T2E thermal  {:.1} us", b.t2e_thermal.unwrap_or(f64::INFINITY) * 1e6);
    println!("  Q2           {:.2e}", b.q2);
    println!();
    println!("Ramsey T2* versus flux offset (A = {:.1e})", devices::DEVICE_D_A_1F);
    for x in [0.0, 1e-5, 2e-5, 5e-5, 1e-4] {
        println!("  {x:>7.0e}  {:>8.1} us", ramsey_t2_star(&builder, 2.0 * PI * x, devices::DEVICE_D_A_1F)? * 1e6);
    }
    println!();
    println!("device  T1[us]  Q_diel");
    for dev in &DEVICES {
        let Some(m) = dev.measured else { continue };
        let spec = HamiltonianBuilder::new(&dev.circuit, &BasisConfig::default_for(&dev.circuit)?)?.solve(&FluxBias::zero())?;
        println!("{:<6}  {:>6.0}  {:.2e}", dev.name, m.t1_us, qdiel_from_t1(&spec, dev.circuit.e_c, m.t1_us * 1e-6)?);
    }
    Ok(())
}

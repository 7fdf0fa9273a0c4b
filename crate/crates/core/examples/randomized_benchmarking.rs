//! Clifford randomized benchmarking of device D with simulated five-level
//! gates, with and without the 1/f dephasing channel.

use std::f64::consts::PI;

use iflux::budget::ramsey_t2_star;
use iflux::circuit::{BasisConfig, HamiltonianBuilder};
use iflux::devices::{self, device};
use iflux::pulse::{CalibrationOptions, DriveSystem};
use iflux::rb::{clifford_table, simulate_rb, GateSet, IdentityConvention, IncoherentModel, RbOptions};

fn main() -> iflux::Result<()> {
    let (t_pi, delta_phi) = (88.0, 2e-5);
    let params = device("D")?.circuit;
    let builder = HamiltonianBuilder::new(&params, &BasisConfig::default_for(&params)?)?;
    let reference = DriveSystem::from_builder(&builder, 0.0, 5)?;
    let operating = DriveSystem::from_builder(&builder, delta_phi, 5)?;
    let gates = GateSet::calibrate(&reference, &operating, t_pi, &CalibrationOptions::default())?;
    let t2_star = ramsey_t2_star(&builder, 2.0 * PI * delta_phi, devices::DEVICE_D_A_1F)?;
    println!(
        "{} Cliffords, {:.4} pulses per Clifford; T2* = {:.1} us",
        clifford_table().len(),
        clifford_table().mean_gate_count(IdentityConvention::Skip),
        t2_star * 1e6
    );
    let base = RbOptions { m_values: vec![1, 10, 50, 100, 200, 400, 700, 1000, 1500, 2000], ..Default::default() };
    for (label, incoherent) in [("coherent only", None), ("with dephasing", Some(IncoherentModel { t2_star }))] {
        let r = simulate_rb(&gates, &RbOptions { incoherent, ..base.clone() })?;
        println!("{label:>15}: p = {:.6}, F_Clifford = {:.5}, F_physical = {:.5}", r.fit.p, r.f_clifford, r.f_physical);
    }
    let ideal = simulate_rb(&GateSet::ideal(t_pi), &base)?;
    println!("{:>15}: p = {}", "ideal gates", ideal.fit.p);
    Ok(())
}

//! Q2 versus E_J/E_C at fixed E_C and E_L, as CSV on stdout with a summary
//! on stderr.

use iflux::budget::{optimize_design, write_design_csv, DesignSweep, NoiseEnvironment};
use iflux::devices::{self, device};

fn main() -> iflux::Result<()> {
    let p = device("fig1")?.circuit;
    let env = NoiseEnvironment::new(devices::DESIGN_Q_DIEL, devices::DESIGN_A_1F)?;
    let curve = optimize_design(&DesignSweep::new(p.e_c, p.e_l), &env)?;
    eprintln!(
        "optimum E_J/E_C = {:.2}, Q2 = {:.2e} ({:.0} x Q_diel), interior: {}",
        curve.argmax_ej_over_ec,
        curve.max_q2,
        curve.max_q2 / env.q_diel,
        curve.interior_maximum
    );
    write_design_csv(&curve, std::io::stdout().lock())
}

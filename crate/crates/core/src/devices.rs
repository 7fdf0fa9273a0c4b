//! Builtin device table.
//!
//! These are the reference parameter sets used by the CLI, the examples and
//! the regression tests. Nothing else in the crate should re-type them.

use serde::Serialize;

use crate::circuit::CircuitParams;
use crate::error::{Error, Result};
use crate::fluxon::FluxonParams;

/// Measured quantities at integer flux bias.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Measured {
    pub f01_ghz: f64,
    pub f12_mhz: f64,
    pub t1_us: f64,
    pub t2_echo_us: f64,
    pub t2_ramsey_us: f64,
}

/// Quantities inferred from the measurements and the circuit fit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Inferred {
    pub q_diel: f64,
    pub n01_sq: f64,
    pub n03_sq: f64,
    pub chi_ratio: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Device {
    pub name: &'static str,
    pub circuit: CircuitParams,
    pub fluxon: Option<FluxonParams>,
    pub measured: Option<Measured>,
    pub inferred: Inferred,
}

const fn circuit(e_j: f64, e_c: f64, e_l: f64) -> CircuitParams {
    CircuitParams { e_j, e_c, e_l }
}

const fn fluxon(e_l_sigma: f64, eps1_mhz: f64, eps2_mhz: f64) -> FluxonParams {
    FluxonParams { e_l_sigma, eps1: eps1_mhz * 1e-3, eps2: eps2_mhz * 1e-3 }
}

/// Readout cavity of device D.
pub const DEVICE_D_CAVITY_GHZ: f64 = 7.46;
/// Cavity linewidth of device D, as `κ/2π` in MHz.
pub const DEVICE_D_KAPPA_MHZ: f64 = 15.0;
/// Dispersive shift of device D, as `χ01/2π` in MHz.
pub const DEVICE_D_CHI01_MHZ: f64 = 14.3;
/// Effective cavity temperature used for the thermal-photon dephasing estimate.
pub const DEVICE_D_CAVITY_TEMPERATURE_K: f64 = 0.05;
/// Flux-noise amplitude extracted from the Ramsey data of device D.
pub const DEVICE_D_A_1F: f64 = 8.8e-6;
/// Charge matrix element `|<0|n|1>|` quoted for device D.
pub const DEVICE_D_N01: f64 = 0.056;
/// Frequency of the `0-3` (plasmon) transition of device D.
pub const DEVICE_D_F03_GHZ: f64 = 6.86;
/// Best measured physical gate fidelity on device D (t_pi = 88 ns).
pub const DEVICE_D_GATE_FIDELITY: f64 = 0.9993;

/// Decoherence environment used in the design-optimization illustration.
pub const DESIGN_Q_DIEL: f64 = 1e5;
pub const DESIGN_A_1F: f64 = 1e-6;

pub static DEVICES: [Device; 5] = [
    Device {
        name: "A",
        circuit: circuit(4.12, 1.64, 0.18),
        fluxon: Some(fluxon(0.163, 308.0, 73.0)),
        measured: Some(Measured { f01_ghz: 3.20, f12_mhz: 103.0, t1_us: 109.0, t2_echo_us: 175.0, t2_ramsey_us: 38.0 }),
        inferred: Inferred { q_diel: 3.5e5, n01_sq: 2.1e-2, n03_sq: 1.6e-1, chi_ratio: Some(3.0) },
    },
    Device {
        name: "B",
        circuit: circuit(3.84, 1.75, 0.14),
        fluxon: Some(fluxon(0.128, 362.0, 81.0)),
        measured: Some(Measured { f01_ghz: 2.51, f12_mhz: 106.0, t1_us: 101.0, t2_echo_us: 201.0, t2_ramsey_us: 61.0 }),
        inferred: Inferred { q_diel: 3.6e5, n01_sq: 1.8e-2, n03_sq: 1.4e-1, chi_ratio: Some(0.7) },
    },
    Device {
        name: "C",
        circuit: circuit(7.20, 2.04, 0.18),
        fluxon: Some(fluxon(0.175, 190.0, 6.0)),
        measured: Some(Measured { f01_ghz: 3.45, f12_mhz: 24.0, t1_us: 328.0, t2_echo_us: 81.0, t2_ramsey_us: 57.0 }),
        inferred: Inferred { q_diel: 2.6e5, n01_sq: 4.4e-3, n03_sq: 2.2e-1, chi_ratio: Some(0.1) },
    },
    Device {
        name: "D",
        circuit: circuit(6.78, 1.47, 0.22),
        fluxon: Some(fluxon(0.206, 91.0, 9.0)),
        measured: Some(Measured { f01_ghz: 4.14, f12_mhz: 11.0, t1_us: 255.0, t2_echo_us: 185.0, t2_ramsey_us: 118.0 }),
        inferred: Inferred { q_diel: 1.0e5, n01_sq: 3.1e-3, n03_sq: 2.9e-1, chi_ratio: Some(8.4) },
    },
    Device {
        name: "fig1",
        circuit: circuit(5.0, 1.5, 0.2),
        fluxon: None,
        measured: None,
        inferred: Inferred { q_diel: 1.0e5, n01_sq: 1.2e-2, n03_sq: 2.2e-1, chi_ratio: None },
    },
];

/// Names accepted by [`device`].
pub fn device_names() -> Vec<&'static str> {
    DEVICES.iter().map(|d| d.name).collect()
}

/// Look up a builtin device by name (case-insensitive).
pub fn device(name: &str) -> Result<&'static Device> {
    DEVICES
        .iter()
        .find(|d| d.name.eq_ignore_ascii_case(name))
        .ok_or_else(|| Error::Domain(format!("unknown device '{name}'; valid names: {}", device_names().join(", "))))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lookup_is_case_insensitive() {
        assert_eq!(device("d").unwrap().circuit.e_j, 6.78);
        assert_eq!(device("FIG1").unwrap().circuit.e_c, 1.5);
    }

    #[test]
    fn unknown_name_lists_valid_ones() {
        let err = device("Z").unwrap_err().to_string();
        assert!(err.contains("A, B, C, D, fig1"), "{err}");
    }

    #[test]
    fn fluxon_amplitudes_are_in_ghz() {
        let d = device("D").unwrap().fluxon.unwrap();
        assert!((d.eps1 - 0.091).abs() < 1e-12);
        assert!((d.eps2 - 0.009).abs() < 1e-12);
    }
}

//! Error budget of calibrated pi pulses on device D versus gate time and
//! static flux offset, as CSV.
//!
//! Each row calibrates at zero offset and replays the pulse off the sweet
//! spot, where the broken parity opens the 0-2 leakage channel.

use iflux::devices::{self, device};
use iflux::pulse::{error_vs_gate_time, write_error_csv, ErrorSweepOptions};

fn main() -> iflux::Result<()> {
    let params = device("D")?.circuit;
    let opts = ErrorSweepOptions { a_1f: Some(devices::DEVICE_D_A_1F), ..Default::default() };
    let rows = error_vs_gate_time(&params, &[0.0, 1e-5, 3e-5], &[25.0, 40.0, 88.0], &opts)?;
    write_error_csv(&rows, std::io::stdout().lock())
}

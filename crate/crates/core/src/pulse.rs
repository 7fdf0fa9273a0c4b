//! Driven multilevel dynamics, gate calibration and gate-error metrics.
//!
//! The drive Hamiltonian in the fluxonium eigenbasis is
//!
//! ```text
//! H(t) = sum_i 2 pi f_0i |i><i| + A e(t) [cos(phi) cos(w t) + sin(phi) sin(w t)] n
//! ```
//!
//! with `e(t)` a flat-top envelope with Gaussian edges. Integration runs in the
//! lab frame with a fourth-order Magnus step; time is in ns and angular
//! frequencies in rad/ns internally. Gate unitaries are reported in the frame
//! rotating with the carrier, where level `k` carries phase `2 pi k f_c t`.
//!
//! Eigenstate `k` is rephased by `i^k` so that the charge operator, whose
//! eigenbasis elements are purely imaginary, becomes real between
//! neighbouring levels and `n_01 > 0`. With that convention `phi = 0` drives
//! an X rotation and `phi = pi/2` a Y rotation.

use std::f64::consts::PI;
use std::io::Write;

use nalgebra::{DMatrix, Matrix2};
use rayon::prelude::*;
use serde::{Serialize, Serializer};

use crate::budget;
use crate::circuit::{BasisConfig, CircuitParams, FluxBias, HamiltonianBuilder, OperatorKind, SpectrumResult};
use crate::error::{domain, Error, Result};
use crate::linalg::{self, CMatrix, C64};
use crate::simplex::golden_section;

/// Eigenstates kept in the drive model.
pub const DEFAULT_LEVELS: usize = 5;
pub const DEFAULT_RAMP_NS: f64 = 5.0;
pub const DEFAULT_STEPS_PER_PERIOD: usize = 128;
/// Entry-wise change allowed under step doubling.
pub const CONVERGENCE_TOL: f64 = 1e-7;

const NS: f64 = 1e-9;

/// Truncated eigenbasis model of a flux-biased circuit.
#[derive(Debug, Clone)]
pub struct DriveSystem {
    /// `f_0i` in GHz; `freqs[0] = 0`.
    pub freqs: Vec<f64>,
    /// Charge operator in the rephased eigenbasis (Hermitian).
    pub n_matrix: CMatrix,
    /// Bias offset from integer flux in flux quanta.
    pub delta_phi_over_2pi: f64,
}

impl DriveSystem {
    pub fn from_spectrum(spec: &SpectrumResult, levels: usize) -> Result<Self> {
        if levels < 2 {
            return domain(format!("drive model needs at least 2 levels, got {levels}"));
        }
        let m = spec.operator_in_eigenbasis(OperatorKind::ChargeN, levels)?;
        let mut phases: Vec<C64> = (0..levels).map(|k| C64::new(0.0, 1.0).powu(k as u32)).collect();
        // <0|n|1> = i m_01 becomes -m_01 after rephasing; make it positive
        if m[(0, 1)] > 0.0 {
            phases[1] = -phases[1];
        }
        let n_matrix = CMatrix::from_fn(levels, levels, |j, k| phases[j].conj() * C64::new(0.0, m[(j, k)]) * phases[k]);
        let e0 = spec.energies[0];
        Ok(DriveSystem {
            freqs: spec.energies[..levels].iter().map(|e| e - e0).collect(),
            n_matrix,
            delta_phi_over_2pi: spec.bias.flux_quanta(),
        })
    }

    pub fn from_circuit(params: &CircuitParams, delta_phi_over_2pi: f64, levels: usize, basis: &BasisConfig) -> Result<Self> {
        let builder = HamiltonianBuilder::new(params, basis)?;
        Self::from_builder(&builder, delta_phi_over_2pi, levels)
    }

    pub fn from_builder(builder: &HamiltonianBuilder, delta_phi_over_2pi: f64, levels: usize) -> Result<Self> {
        let spec = builder.solve(&FluxBias::from_flux_quanta(delta_phi_over_2pi)?)?;
        Self::from_spectrum(&spec, levels)
    }

    /// Two-level system with real coupling `n01`.
    pub fn two_level(f01: f64, n01: f64) -> Self {
        let z = C64::new(0.0, 0.0);
        let c = C64::new(n01, 0.0);
        DriveSystem {
            freqs: vec![0.0, f01],
            n_matrix: CMatrix::from_row_slice(2, 2, &[z, c, c, z]),
            delta_phi_over_2pi: 0.0,
        }
    }

    pub fn levels(&self) -> usize {
        self.freqs.len()
    }

    pub fn f01(&self) -> f64 {
        self.freqs[1]
    }

    /// `|<0|n|1>|`.
    pub fn n01(&self) -> f64 {
        self.n_matrix[(0, 1)].norm()
    }
}

/// Flat-top pulse with Gaussian edges.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, serde::Deserialize)]
pub struct PulseShape {
    /// ns
    pub total_duration: f64,
    /// ns
    pub ramp_time: f64,
    /// Drive strength multiplying `n`, rad/s.
    pub amplitude: f64,
    /// GHz
    pub carrier_f: f64,
    /// rad; 0 is a pure I (cosine) drive.
    pub iq_phase: f64,
}

impl PulseShape {
    pub fn new(total_duration: f64, ramp_time: f64, amplitude: f64, carrier_f: f64, iq_phase: f64) -> Result<Self> {
        let s = PulseShape { total_duration, ramp_time, amplitude, carrier_f, iq_phase };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.ramp_time > 0.0 && self.total_duration.is_finite()) || self.total_duration < 2.0 * self.ramp_time {
            return domain(format!(
                "pulse of {} ns cannot hold two {} ns ramps",
                self.total_duration, self.ramp_time
            ));
        }
        if !(self.amplitude.is_finite() && self.amplitude >= 0.0) {
            return domain(format!("amplitude must be non-negative, got {}", self.amplitude));
        }
        if !(self.carrier_f.is_finite() && self.carrier_f > 0.0) || !self.iq_phase.is_finite() {
            return domain("carrier frequency must be positive and iq phase finite");
        }
        Ok(())
    }

    fn edge(&self, t: f64) -> f64 {
        let r = self.ramp_time;
        let sigma = r / 2.5;
        let c = (-(r * r) / (2.0 * sigma * sigma)).exp();
        (((-(t - r).powi(2)) / (2.0 * sigma * sigma)).exp() - c) / (1.0 - c)
    }

    fn envelope_at(&self, t: f64) -> f64 {
        if t < self.ramp_time {
            self.edge(t.max(0.0))
        } else if t > self.total_duration - self.ramp_time {
            self.edge((self.total_duration - t).max(0.0))
        } else {
            1.0
        }
    }

    /// `int_0^T e(t) dt` in ns.
    pub fn envelope_area(&self) -> f64 {
        let n = 2000;
        let h = self.ramp_time / n as f64;
        let simpson: f64 = (0..=n)
            .map(|k| {
                let w = if k == 0 || k == n { 1.0 } else if k % 2 == 1 { 4.0 } else { 2.0 };
                w * self.edge(k as f64 * h)
            })
            .sum::<f64>()
            * h
            / 3.0;
        self.total_duration - 2.0 * self.ramp_time + 2.0 * simpson
    }
}

/// Envelope value at `t` ns: Gaussian rise with `sigma = ramp/2.5` shifted and
/// rescaled to start at zero, unity plateau, mirrored fall.
pub fn envelope(shape: &PulseShape, t: f64) -> Result<f64> {
    shape.validate()?;
    if !(0.0..=shape.total_duration).contains(&t) {
        return Err(Error::Domain(format!("t = {t} ns outside [0, {}]", shape.total_duration)));
    }
    Ok(shape.envelope_at(t))
}

/// Propagated evolution operator in the carrier frame.
#[derive(Debug, Clone, PartialEq)]
pub struct GateUnitary {
    pub matrix: CMatrix,
    /// ns
    pub gate_duration: f64,
}

impl GateUnitary {
    /// Computational `{0, 1}` block.
    pub fn comp_block(&self) -> Matrix2<C64> {
        let u = &self.matrix;
        Matrix2::new(u[(0, 0)], u[(0, 1)], u[(1, 0)], u[(1, 1)])
    }

    pub fn unitarity_defect(&self) -> f64 {
        linalg::unitarity_defect(&self.matrix)
    }

    /// Probability of ending in `to` after starting in `from`.
    pub fn transition(&self, from: usize, to: usize) -> f64 {
        self.matrix[(to, from)].norm_sqr()
    }
}

impl Serialize for GateUnitary {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct Repr {
            gate_duration_ns: f64,
            re: Vec<Vec<f64>>,
            im: Vec<Vec<f64>>,
        }
        let rows = |f: fn(&C64) -> f64| -> Vec<Vec<f64>> {
            self.matrix.row_iter().map(|r| r.iter().map(f).collect()).collect()
        };
        Repr { gate_duration_ns: self.gate_duration, re: rows(|z| z.re), im: rows(|z| z.im) }.serialize(s)
    }
}

struct Drive<'a> {
    sys: &'a DriveSystem,
    shape: &'a PulseShape,
    coupling: CMatrix,
    omega: f64,
    period: f64,
    spp: usize,
}

impl Drive<'_> {
    fn hamiltonian(&self, t: f64) -> CMatrix {
        let (s, c) = (self.omega * t).sin_cos();
        let (ps, pc) = self.shape.iq_phase.sin_cos();
        let mut h = &self.coupling * C64::new(self.shape.envelope_at(t) * (pc * c + ps * s), 0.0);
        for (k, f) in self.sys.freqs.iter().enumerate() {
            h[(k, k)] += C64::new(2.0 * PI * f, 0.0);
        }
        h
    }

    fn segment(&self, t0: f64, t1: f64) -> CMatrix {
        let n = self.sys.levels();
        let steps = (((t1 - t0) / self.period) * self.spp as f64).ceil().max(1.0) as usize;
        let dt = (t1 - t0) / steps as f64;
        let g = 3f64.sqrt() / 6.0;
        let k = C64::new(0.0, -(3f64.sqrt() / 12.0) * dt);
        let mut u = CMatrix::identity(n, n);
        for j in 0..steps {
            let mid = t0 + (j as f64 + 0.5) * dt;
            let h1 = self.hamiltonian(mid - g * dt);
            let h2 = self.hamiltonian(mid + g * dt);
            let comm = &h2 * &h1 - &h1 * &h2;
            let h_eff = (&h1 + &h2) * C64::new(0.5, 0.0) + comm * k;
            u = linalg::hermitian_step(&h_eff, dt) * u;
        }
        u
    }
}

fn matrix_power(m: &CMatrix, mut k: usize) -> CMatrix {
    let n = m.nrows();
    let mut result = CMatrix::identity(n, n);
    let mut base = m.clone();
    while k > 0 {
        if k & 1 == 1 {
            result = &base * result;
        }
        base = &base * &base;
        k >>= 1;
    }
    result
}

/// Time-ordered propagation of a pulse; see the module docs for the frame.
///
/// The plateau is periodic with the carrier, so one carrier period is
/// integrated and raised to the required power.
pub fn propagate(sys: &DriveSystem, shape: &PulseShape, steps_per_period: usize) -> Result<GateUnitary> {
    shape.validate()?;
    if steps_per_period < 10 {
        return domain(format!("need at least 10 steps per carrier period, got {steps_per_period}"));
    }
    if sys.n_matrix.nrows() != sys.levels() || sys.n_matrix.ncols() != sys.levels() {
        return domain("charge matrix does not match the level list");
    }
    let coupling = &sys.n_matrix * C64::new(shape.amplitude * NS, 0.0);
    let period = 1.0 / shape.carrier_f;
    let drive = Drive { sys, shape, coupling, omega: 2.0 * PI * shape.carrier_f, period, spp: steps_per_period };
    let (t_total, r) = (shape.total_duration, shape.ramp_time);
    let lab = if t_total - 2.0 * r < 2.0 * period {
        drive.segment(0.0, t_total)
    } else {
        let rise = drive.segment(0.0, r);
        let cycles = ((t_total - 2.0 * r) / period).floor() as usize;
        let plateau = matrix_power(&drive.segment(r, r + period), cycles);
        let t_rest = r + cycles as f64 * period;
        let rest = if t_total - r - t_rest > 1e-12 { drive.segment(t_rest, t_total - r) } else { CMatrix::identity(sys.levels(), sys.levels()) };
        let fall = drive.segment(t_total - r, t_total);
        fall * rest * plateau * rise
    };
    let frame = DMatrix::from_fn(sys.levels(), sys.levels(), |i, j| {
        if i == j { C64::from_polar(1.0, 2.0 * PI * i as f64 * shape.carrier_f * t_total) } else { C64::new(0.0, 0.0) }
    });
    Ok(GateUnitary { matrix: frame * lab, gate_duration: t_total })
}

/// [`propagate`] at `steps_per_period` and twice that; errors if any matrix
/// entry moves by more than [`CONVERGENCE_TOL`]. Returns the finer result and
/// the observed change.
pub fn propagate_converged(sys: &DriveSystem, shape: &PulseShape, steps_per_period: usize) -> Result<(GateUnitary, f64)> {
    let coarse = propagate(sys, shape, steps_per_period)?;
    let fine = propagate(sys, shape, 2 * steps_per_period)?;
    let residual = (&fine.matrix - &coarse.matrix).iter().map(|z| z.norm()).fold(0.0, f64::max);
    if residual > CONVERGENCE_TOL {
        return Err(Error::NotConverged(format!(
            "propagator changed by {residual:.2e} when doubling {steps_per_period} steps per period"
        )));
    }
    Ok((fine, residual))
}

/// `exp(-i theta/2 (cos(axis) X + sin(axis) Y))`.
pub fn rotation(axis: f64, theta: f64) -> Matrix2<C64> {
    let (c, s) = ((theta / 2.0).cos(), (theta / 2.0).sin());
    let (ay, ax) = axis.sin_cos();
    Matrix2::new(
        C64::new(c, 0.0),
        C64::new(-s * ay, -s * ax),
        C64::new(s * ay, -s * ax),
        C64::new(c, 0.0),
    )
}

pub fn rx(theta: f64) -> Matrix2<C64> {
    rotation(0.0, theta)
}

pub fn ry(theta: f64) -> Matrix2<C64> {
    rotation(PI / 2.0, theta)
}

/// `(Tr(U_c† U_c) + |Tr(U_c† U_ideal)|^2) / 6` on the computational block.
pub fn avg_gate_fidelity(u: &GateUnitary, ideal: &Matrix2<C64>) -> f64 {
    block_fidelity(&u.comp_block(), ideal)
}

pub fn block_fidelity(uc: &Matrix2<C64>, ideal: &Matrix2<C64>) -> f64 {
    let a = (uc.adjoint() * uc).trace().re;
    let b = (uc.adjoint() * ideal).trace().norm_sqr();
    (a + b) / 6.0
}

fn leakage_into(u: &GateUnitary, level: usize) -> Result<f64> {
    if u.matrix.nrows() <= level {
        return Err(Error::Index(format!("unitary has no level {level}")));
    }
    Ok((u.transition(0, level) + u.transition(1, level)) / 2.0)
}

/// `(|U_02|^2 + |U_12|^2) / 2`, where `U_ij` is the amplitude to go from `i` to `j`.
pub fn leakage_error(u: &GateUnitary) -> Result<f64> {
    leakage_into(u, 2)
}

/// Leakage into level 3, `(|U_03|^2 + |U_13|^2) / 2`.
pub fn leakage_error_3(u: &GateUnitary) -> Result<f64> {
    leakage_into(u, 3)
}

/// `2 (1 - |U_01|^2) / 3` for a gate calibrated as X, with `|U_01|^2` taken
/// relative to the population that stays in the computational subspace so
/// that leakage is not counted twice.
pub fn detuning_error(u: &GateUnitary) -> f64 {
    let kept = u.transition(0, 0) + u.transition(0, 1);
    if kept == 0.0 {
        return 2.0 / 3.0;
    }
    2.0 * (1.0 - u.transition(0, 1) / kept) / 3.0
}

/// `(t_pi / T2*) / 3` with `t_pi` in ns and `t2_star` in s.
pub fn incoherent_error(t_pi_ns: f64, t2_star: f64) -> Result<f64> {
    if !(t2_star > 0.0) || !(t_pi_ns >= 0.0) {
        return domain(format!("need t_pi >= 0 and T2* > 0, got {t_pi_ns} ns, {t2_star} s"));
    }
    Ok(t_pi_ns * NS / t2_star / 3.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GateMetrics {
    pub fidelity: f64,
    pub leakage: f64,
    pub leakage_3: Option<f64>,
    pub detuning_error: f64,
    pub incoherent_error: Option<f64>,
}

pub fn gate_metrics(u: &GateUnitary, ideal: &Matrix2<C64>) -> Result<GateMetrics> {
    Ok(GateMetrics {
        fidelity: avg_gate_fidelity(u, ideal),
        leakage: leakage_error(u)?,
        leakage_3: leakage_error_3(u).ok(),
        detuning_error: detuning_error(u),
        incoherent_error: None,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, serde::Deserialize)]
pub struct CalibrationOptions {
    pub ramp_time: f64,
    pub steps_per_period: usize,
    /// Fixed carrier (GHz). When absent the carrier is calibrated jointly
    /// with the amplitude, starting from `f_01`.
    pub carrier: Option<f64>,
    /// Alternations between amplitude and carrier searches.
    pub rounds: usize,
}

impl Default for CalibrationOptions {
    fn default() -> Self {
        CalibrationOptions { ramp_time: DEFAULT_RAMP_NS, steps_per_period: DEFAULT_STEPS_PER_PERIOD, carrier: None, rounds: 3 }
    }
}

#[derive(Debug, Clone)]
pub struct CalibratedPulse {
    pub shape: PulseShape,
    pub unitary: GateUnitary,
    /// Average fidelity to `R_x(theta)`.
    pub fidelity: f64,
    /// `|<1|U|0>|^2`.
    pub transfer: f64,
}

/// Calibrate an X rotation by `theta` lasting about `t_gate` ns.
///
/// The duration is `N / f_c` with `N` fixed by the starting carrier, so the
/// carrier completes whole cycles. The amplitude is set by golden-section
/// search on `|<1|U|0>|^2` (maximized for `pi`, matched to `sin^2(theta/2)`
/// otherwise). With a free carrier the search alternates with a
/// golden-section search of the carrier offset that maximizes the fidelity to
/// `R_x(theta)`, which absorbs the drive-induced Stark shift.
pub fn calibrate_rotation(sys: &DriveSystem, t_gate: f64, theta: f64, opts: &CalibrationOptions) -> Result<CalibratedPulse> {
    if !(theta > 0.0 && theta <= PI) {
        return domain(format!("rotation angle must lie in (0, pi], got {theta}"));
    }
    if !(t_gate >= 2.0 * opts.ramp_time) {
        return domain(format!("gate time {t_gate} ns shorter than two {} ns ramps", opts.ramp_time));
    }
    let n01 = sys.n01();
    if n01 < 1e-12 {
        return domain("qubit transition is not driven by the charge operator");
    }
    let f01 = sys.f01();
    let carrier0 = opts.carrier.unwrap_or(f01);
    let cycles = (carrier0 * t_gate).round().max(1.0);
    let shape_for = |amplitude: f64, carrier: f64| PulseShape {
        total_duration: cycles / carrier,
        ramp_time: opts.ramp_time,
        amplitude,
        carrier_f: carrier,
        iq_phase: 0.0,
    };
    let probe = shape_for(0.0, carrier0);
    probe.validate()?;
    let mut amplitude = theta / (n01 * probe.envelope_area() * NS);
    let mut carrier = carrier0;
    let target = (theta / 2.0).sin().powi(2);
    let ideal = rx(theta);
    let spp = opts.steps_per_period;

    let transfer = |a: f64, f: f64| propagate(sys, &shape_for(a, f), spp).map(|u| u.transition(0, 1)).unwrap_or(f64::NAN);
    let fidelity = |a: f64, f: f64| propagate(sys, &shape_for(a, f), spp).map(|u| avg_gate_fidelity(&u, &ideal)).unwrap_or(f64::NAN);
    let amp_cost = |p: f64| if theta == PI { -p } else { (p - target).powi(2) };

    let rounds = if opts.carrier.is_some() { 1 } else { opts.rounds.max(1) };
    for round in 0..rounds {
        let width = if round == 0 { 0.3 } else { 0.02 };
        let (lo, hi) = (amplitude * (1.0 - width), amplitude * (1.0 + width));
        let ends = [amp_cost(transfer(lo, carrier)), amp_cost(transfer(hi, carrier))];
        let (a, best) = golden_section(|a| amp_cost(transfer(a, carrier)), lo, hi, 1e-8 * amplitude);
        if !best.is_finite() || ends.iter().all(|e| (e - best).abs() < 1e-15) {
            return Err(Error::NotConverged(format!(
                "amplitude objective is flat near {amplitude:.4e} rad/s; population transfer cannot be calibrated"
            )));
        }
        amplitude = a;
        if opts.carrier.is_none() {
            let t = cycles / carrier;
            let span = if round == 0 { 0.2 / t } else { 0.02 / t };
            let (f, _) = golden_section(|f| -fidelity(amplitude, f), carrier - span, carrier + span, 1e-6 * span);
            carrier = f;
        }
    }
    let shape = shape_for(amplitude, carrier);
    let unitary = propagate(sys, &shape, spp)?;
    Ok(CalibratedPulse { fidelity: avg_gate_fidelity(&unitary, &ideal), transfer: unitary.transition(0, 1), shape, unitary })
}

/// Calibrated X180 pulse; the carrier is calibrated too unless given.
pub fn calibrate_pi_pulse(sys: &DriveSystem, t_pi: f64, carrier_f: Option<f64>) -> Result<PulseShape> {
    let opts = CalibrationOptions { carrier: carrier_f, ..Default::default() };
    Ok(calibrate_rotation(sys, t_pi, PI, &opts)?.shape)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, serde::Deserialize)]
pub struct ErrorSweepOptions {
    pub levels: usize,
    pub dim: usize,
    pub calibration: CalibrationOptions,
    /// 1/f amplitude for the incoherent term; omitted when absent.
    pub a_1f: Option<f64>,
}

impl Default for ErrorSweepOptions {
    fn default() -> Self {
        ErrorSweepOptions { levels: DEFAULT_LEVELS, dim: 120, calibration: CalibrationOptions::default(), a_1f: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ErrorSweepRow {
    pub t_pi_ns: f64,
    pub delta_phi: f64,
    pub leak2: f64,
    pub leak3: f64,
    pub detune: f64,
    pub incoherent: f64,
    /// `leak2 + leak3 + detune + incoherent`.
    pub total: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// Coherent and incoherent error budget of a pi pulse over gate times and
/// bias offsets.
///
/// Each pulse is calibrated once at integer flux and then applied unchanged
/// at every offset, so the detuning error measures the uncorrected qubit
/// frequency shift. Failing points are reported in the row and the sweep
/// continues.
pub fn error_vs_gate_time(params: &CircuitParams, delta_phis: &[f64], t_pis: &[f64], opts: &ErrorSweepOptions) -> Result<Vec<ErrorSweepRow>> {
    let builder = HamiltonianBuilder::new(params, &BasisConfig::new(params, opts.dim)?)?;
    let reference = DriveSystem::from_builder(&builder, 0.0, opts.levels)?;
    let systems: Vec<Result<DriveSystem>> =
        delta_phis.iter().map(|&d| DriveSystem::from_builder(&builder, d, opts.levels)).collect();
    let t2_star: Vec<Option<f64>> = delta_phis
        .iter()
        .map(|&d| opts.a_1f.and_then(|a| budget::ramsey_t2_star(&builder, 2.0 * PI * d, a).ok()))
        .collect();
    let rows = t_pis
        .par_iter()
        .flat_map_iter(|&t_pi| {
            let cal = calibrate_rotation(&reference, t_pi, PI, &opts.calibration);
            let spp = opts.calibration.steps_per_period;
            delta_phis
                .iter()
                .enumerate()
                .map(|(i, &d)| {
                    let point = (|| -> Result<ErrorSweepRow> {
                        let shape = cal.as_ref().map_err(|e| Error::NotConverged(e.to_string()))?.shape;
                        let sys = systems[i].as_ref().map_err(|e| Error::Numerical(e.to_string()))?;
                        let u = propagate(sys, &shape, spp)?;
                        let leak2 = leakage_error(&u)?;
                        let leak3 = leakage_error_3(&u).unwrap_or(0.0);
                        let detune = detuning_error(&u);
                        let incoherent = match t2_star[i] {
                            Some(t2) => incoherent_error(t_pi, t2)?,
                            None => 0.0,
                        };
                        Ok(ErrorSweepRow { t_pi_ns: t_pi, delta_phi: d, leak2, leak3, detune, incoherent, total: leak2 + leak3 + detune + incoherent, error: None })
                    })();
                    point.unwrap_or_else(|e| ErrorSweepRow {
                        t_pi_ns: t_pi,
                        delta_phi: d,
                        leak2: f64::NAN,
                        leak3: f64::NAN,
                        detune: f64::NAN,
                        incoherent: f64::NAN,
                        total: f64::NAN,
                        error: Some(e.to_string()),
                    })
                })
                .collect::<Vec<_>>()
        })
        .collect();
    Ok(rows)
}

/// CSV `t_pi_ns,delta_phi,leak2,leak3,detune,incoherent,total`.
pub fn write_error_csv<W: Write>(rows: &[ErrorSweepRow], mut out: W) -> Result<()> {
    writeln!(out, "t_pi_ns,delta_phi,leak2,leak3,detune,incoherent,total")?;
    for r in rows {
        writeln!(
            out,
            "{},{:e},{:.6e},{:.6e},{:.6e},{:.6e},{:.6e}",
            r.t_pi_ns, r.delta_phi, r.leak2, r.leak3, r.detune, r.incoherent, r.total
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn shape(t: f64) -> PulseShape {
        PulseShape::new(t, 5.0, 0.0, 4.0, 0.0).unwrap()
    }

    #[test]
    fn envelope_shape() {
        let s = shape(40.0);
        assert_eq!(envelope(&s, 20.0).unwrap(), 1.0);
        assert!(envelope(&s, 0.0).unwrap() < 1e-4);
        assert!(envelope(&s, 40.0).unwrap() < 1e-4);
        assert!(envelope(&s, 41.0).is_err());
        let g = shape(10.0);
        assert!((envelope(&g, 5.0).unwrap() - 1.0).abs() < 1e-15);
        // C1 at the joins
        let h = 1e-6;
        let slope = (envelope(&s, 5.0).unwrap() - envelope(&s, 5.0 - h).unwrap()) / h;
        assert!(slope.abs() < 1e-3);
    }

    #[test]
    fn rejects_short_pulses() {
        assert!(PulseShape::new(8.0, 5.0, 0.0, 4.0, 0.0).is_err());
    }

    #[test]
    fn free_evolution_is_diagonal() {
        let sys = DriveSystem::two_level(4.1, 0.05);
        let u = propagate(&sys, &shape(30.0), 20).unwrap();
        let b = u.comp_block();
        assert!(b[(0, 1)].norm() < 1e-14 && b[(1, 0)].norm() < 1e-14);
        assert!((b[(0, 0)].norm() - 1.0).abs() < 1e-12 && (b[(1, 1)].norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rwa_rabi_oracle() {
        let sys = DriveSystem::two_level(5.0, 1.0);
        let mut s = PulseShape::new(200.0, 5.0, 0.0, 5.0, 0.0).unwrap();
        // RWA rotation angle is A n01 * area
        s.amplitude = PI / (s.envelope_area() * NS);
        let u = propagate(&sys, &s, 40).unwrap();
        assert!(u.matrix[(1, 0)].norm() > 0.9999, "{}", u.matrix[(1, 0)].norm());
    }

    #[test]
    fn fidelity_definition() {
        let ideal = rx(PI);
        let u = GateUnitary { matrix: CMatrix::from_fn(3, 3, |i, j| if i < 2 && j < 2 { ideal[(i, j)] } else if i == j { C64::new(1.0, 0.0) } else { C64::new(0.0, 0.0) }), gate_duration: 1.0 };
        assert!((avg_gate_fidelity(&u, &ideal) - 1.0).abs() < 1e-15);
        let phased = GateUnitary { matrix: &u.matrix * C64::from_polar(1.0, 0.7), gate_duration: 1.0 };
        assert!((avg_gate_fidelity(&phased, &ideal) - 1.0).abs() < 1e-15);
        assert_eq!(leakage_error(&u).unwrap(), 0.0);
        let lost = GateUnitary { matrix: CMatrix::zeros(3, 3), gate_duration: 1.0 };
        assert_eq!(avg_gate_fidelity(&lost, &ideal), 0.0);
        assert!(detuning_error(&u) < 1e-15);
    }

    #[test]
    fn incoherent_arithmetic() {
        assert!((incoherent_error(88.0, 118e-6).unwrap() - 2.486e-4).abs() < 1e-7);
        assert!((incoherent_error(40.0, 40e-6).unwrap() - 3.333e-4).abs() < 1e-7);
        assert_eq!(incoherent_error(40.0, f64::INFINITY).unwrap(), 0.0);
    }

    #[test]
    fn rotation_helpers() {
        let y = ry(PI);
        assert!((y[(1, 0)] - C64::new(1.0, 0.0)).norm() < 1e-15);
        let x = rx(PI);
        assert!((x[(1, 0)] - C64::new(0.0, -1.0)).norm() < 1e-15);
    }
}

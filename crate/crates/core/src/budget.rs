//! Relaxation and dephasing budget.
//!
//! Energies arrive in GHz; every rate and quality factor here is formed in
//! angular units (`omega = 2 pi f`, `f` in Hz) and every time is in seconds.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::circuit::{matrix_element, BasisConfig, CircuitParams, FluxBias, HamiltonianBuilder, OperatorKind, SpectrumResult, NUMERICAL_ZERO};
use crate::error::{domain, Error, Result};

const PLANCK: f64 = 6.626_070_15e-34;
const BOLTZMANN: f64 = 1.380_649e-23;
const GHZ: f64 = 1e9;

/// Readout-cavity block used by the thermal-photon estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cavity {
    pub f_cavity: f64,
    /// Linewidth in rad/s.
    pub kappa: f64,
    /// Dispersive shift in rad/s.
    pub chi01: f64,
    /// Effective photon temperature in K.
    pub temperature: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseEnvironment {
    /// Dielectric quality factor `1/tan(delta_C)`; may be infinite.
    pub q_diel: f64,
    /// 1/f flux-noise amplitude in flux quanta.
    pub a_1f: f64,
    pub cavity: Option<Cavity>,
}

impl NoiseEnvironment {
    pub fn new(q_diel: f64, a_1f: f64) -> Result<Self> {
        let env = NoiseEnvironment { q_diel, a_1f, cavity: None };
        env.validate()?;
        Ok(env)
    }

    pub fn with_cavity(mut self, cavity: Cavity) -> Result<Self> {
        self.cavity = Some(cavity);
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if self.q_diel.is_nan() || self.q_diel <= 0.0 {
            return domain(format!("q_diel must be positive, got {}", self.q_diel));
        }
        if !(self.a_1f.is_finite() && self.a_1f >= 0.0) {
            return domain(format!("a_1f must be finite and non-negative, got {}", self.a_1f));
        }
        if let Some(c) = &self.cavity {
            for (name, v) in [("f_cavity", c.f_cavity), ("kappa", c.kappa), ("chi01", c.chi01)] {
                if !(v.is_finite() && v > 0.0) {
                    return domain(format!("{name} must be positive, got {v}"));
                }
            }
            if !(c.temperature.is_finite() && c.temperature >= 0.0) {
                return domain(format!("temperature must be non-negative, got {}", c.temperature));
            }
        }
        Ok(())
    }
}

/// `T1 = Q_diel / (32 pi E_C |<0|n|1>|^2)` with `E_C` in Hz; infinite when the
/// matrix element vanishes.
pub fn t1_dielectric(spec: &SpectrumResult, e_c: f64, q_diel: f64) -> Result<f64> {
    let n01 = matrix_element(spec, OperatorKind::ChargeN, 0, 1)?;
    t1_from_element(n01, e_c, q_diel)
}

pub fn t1_from_element(n01: f64, e_c: f64, q_diel: f64) -> Result<f64> {
    if !(e_c > 0.0) || q_diel.is_nan() || q_diel <= 0.0 {
        return domain(format!("need positive e_c and q_diel, got {e_c}, {q_diel}"));
    }
    if n01 < NUMERICAL_ZERO {
        return Ok(f64::INFINITY);
    }
    Ok(q_diel / (32.0 * PI * e_c * GHZ * n01 * n01))
}

/// Exact inverse of [`t1_dielectric`].
pub fn qdiel_from_t1(spec: &SpectrumResult, e_c: f64, t1: f64) -> Result<f64> {
    let n01 = matrix_element(spec, OperatorKind::ChargeN, 0, 1)?;
    qdiel_from_element(n01, e_c, t1)
}

pub fn qdiel_from_element(n01: f64, e_c: f64, t1: f64) -> Result<f64> {
    if !(e_c > 0.0 && t1 >= 0.0) {
        return domain(format!("need positive e_c and non-negative t1, got {e_c}, {t1}"));
    }
    Ok(32.0 * PI * e_c * GHZ * n01 * n01 * t1)
}

/// `Q1 = omega_01 T1`.
pub fn q1(spec: &SpectrumResult, t1: f64) -> Result<f64> {
    q1_from(spec.f01()?, t1)
}

pub fn q1_from(f01_ghz: f64, t1: f64) -> Result<f64> {
    if t1 < 0.0 || t1.is_nan() {
        return domain(format!("t1 must be non-negative, got {t1}"));
    }
    Ok(2.0 * PI * f01_ghz * GHZ * t1)
}

/// Controls for [`flux_derivative_with`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DerivativeOptions {
    /// First step in flux quanta.
    pub initial_step: f64,
    /// Accept when the Richardson error estimate is below this fraction of the value.
    pub rel_tol: f64,
    pub min_step: f64,
}

impl Default for DerivativeOptions {
    fn default() -> Self {
        DerivativeOptions { initial_step: 1e-3, rel_tol: 0.01, min_step: 1e-9 }
    }
}

/// Derivative of `f01` with respect to `phi_ext / 2 pi`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FluxDerivative {
    /// GHz per flux quantum to the power `order`.
    pub value: f64,
    /// Finest step used (flux quanta).
    pub step: f64,
    pub error_estimate: f64,
    /// True when the difference is indistinguishable from eigenvalue rounding;
    /// `value` is then zero.
    pub at_noise_floor: bool,
}

/// Central difference of `f01` with Richardson extrapolation, halving the
/// step until the extrapolation error falls below `rel_tol` of the value.
pub fn flux_derivative(params: &CircuitParams, phi_ext: f64, order: u8, basis: &BasisConfig) -> Result<FluxDerivative> {
    let builder = HamiltonianBuilder::new(params, basis)?;
    flux_derivative_with(&builder, phi_ext, order, &DerivativeOptions::default())
}

pub fn flux_derivative_with(
    builder: &HamiltonianBuilder,
    phi_ext: f64,
    order: u8,
    opts: &DerivativeOptions,
) -> Result<FluxDerivative> {
    if order != 1 && order != 2 {
        return domain(format!("derivative order must be 1 or 2, got {order}"));
    }
    if !(opts.initial_step > 0.0 && opts.min_step > 0.0 && opts.rel_tol > 0.0) {
        return domain("derivative step and tolerance must be positive");
    }
    let x0 = phi_ext / (2.0 * PI);
    let f01 = |x: f64| -> Result<f64> {
        let e = builder.energies(&FluxBias::from_flux_quanta(x)?)?;
        Ok(e[1] - e[0])
    };
    let centre = if order == 2 { f01(x0)? } else { 0.0 };
    let diff = |h: f64| -> Result<f64> {
        let (p, m) = (f01(x0 + h)?, f01(x0 - h)?);
        Ok(if order == 1 { (p - m) / (2.0 * h) } else { (p - 2.0 * centre + m) / (h * h) })
    };
    // eigenvalue rounding relative to the largest level involved
    let scale = builder.energies(&FluxBias::new(phi_ext)?)?[1].abs().max(1.0);
    let noise = |h: f64| 1e-13 * scale / h.powi(order as i32);

    let mut h = opts.initial_step;
    let mut coarse = diff(h)?;
    let mut last = None;
    while h / 2.0 >= opts.min_step {
        let fine = diff(h / 2.0)?;
        let extrapolated = (4.0 * fine - coarse) / 3.0;
        let err = (fine - coarse).abs() / 3.0;
        let floor = noise(h / 2.0);
        // a vanishing derivative shows up at the coarsest step; later it means the step is too fine
        if last.is_none() && extrapolated.abs() <= 10.0 * floor && err <= 10.0 * floor {
            return Ok(FluxDerivative { value: 0.0, step: h / 2.0, error_estimate: floor, at_noise_floor: true });
        }
        if err <= opts.rel_tol * extrapolated.abs() {
            return Ok(FluxDerivative { value: extrapolated, step: h / 2.0, error_estimate: err, at_noise_floor: false });
        }
        last = Some((extrapolated, err));
        if 10.0 * floor > opts.rel_tol * extrapolated.abs() {
            break;
        }
        h /= 2.0;
        coarse = fine;
    }
    let (v, e) = last.unwrap_or((coarse, f64::INFINITY));
    Err(Error::NotConverged(format!(
        "order-{order} flux derivative at phi_ext/2pi = {x0}: value {v:.4e} with error {e:.2e} at step {h:.1e}; \
         try a different initial_step or a larger min_step"
    )))
}

fn angular(ghz: f64) -> f64 {
    2.0 * PI * GHZ * ghz
}

/// First-order 1/f dephasing time `1 / (A |d omega_01 / d(phi_ext/2pi)|)`.
pub fn dephasing_first_order(params: &CircuitParams, phi_ext: f64, a_1f: f64, basis: &BasisConfig) -> Result<f64> {
    let builder = HamiltonianBuilder::new(params, basis)?;
    dephasing_time(&builder, phi_ext, a_1f, 1)
}

/// Second-order 1/f dephasing time `1 / (A^2 |d^2 omega_01 / d(phi_ext/2pi)^2|)`.
pub fn dephasing_second_order(params: &CircuitParams, phi_ext: f64, a_1f: f64, basis: &BasisConfig) -> Result<f64> {
    let builder = HamiltonianBuilder::new(params, basis)?;
    dephasing_time(&builder, phi_ext, a_1f, 2)
}

pub fn dephasing_time(builder: &HamiltonianBuilder, phi_ext: f64, a_1f: f64, order: u8) -> Result<f64> {
    if !(a_1f.is_finite() && a_1f >= 0.0) {
        return domain(format!("a_1f must be finite and non-negative, got {a_1f}"));
    }
    if a_1f == 0.0 {
        return Ok(f64::INFINITY);
    }
    let d = flux_derivative_with(builder, phi_ext, order, &DerivativeOptions::default())?;
    if d.at_noise_floor {
        return Ok(f64::INFINITY);
    }
    Ok(1.0 / (a_1f.powi(order as i32) * angular(d.value).abs()))
}

/// Ramsey coherence time from 1/f flux noise, combining the first- and
/// second-order rates.
pub fn ramsey_t2_star(builder: &HamiltonianBuilder, phi_ext: f64, a_1f: f64) -> Result<f64> {
    let first = dephasing_time(builder, phi_ext, a_1f, 1)?;
    let second = dephasing_time(builder, phi_ext, a_1f, 2)?;
    Ok(1.0 / (1.0 / first + 1.0 / second))
}

/// Thermal-photon echo dephasing: `1/T2E = n kappa chi^2 / (kappa^2 + chi^2)`
/// with `n = exp(-h f_cav / k_B T)`.
pub fn thermal_photon_t2e(env: &NoiseEnvironment) -> Result<f64> {
    env.validate()?;
    let c = env.cavity.ok_or_else(|| Error::Domain("thermal-photon estimate needs a cavity block".into()))?;
    if c.temperature == 0.0 {
        return Ok(f64::INFINITY);
    }
    let n_bar = (-PLANCK * c.f_cavity * GHZ / (BOLTZMANN * c.temperature)).exp();
    let rate = n_bar * c.kappa * c.chi01 * c.chi01 / (c.kappa * c.kappa + c.chi01 * c.chi01);
    Ok(if rate > 0.0 { 1.0 / rate } else { f64::INFINITY })
}

/// How `Q1` and `Q_1/f` are combined.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Q2Formula {
    /// `1/Q2 = 1/(2 Q1) + 1/Q_1/f`.
    #[default]
    Text,
    /// `1/Q2 = 2/Q1 + 1/Q_1/f`.
    Caption,
}

pub fn q2_combine(q1: f64, q_1f: f64, formula: Q2Formula) -> Result<f64> {
    if q1.is_nan() || q_1f.is_nan() || q1 <= 0.0 || q_1f <= 0.0 {
        return domain(format!("quality factors must be positive, got {q1}, {q_1f}"));
    }
    let inv = match formula {
        Q2Formula::Text => 0.5 / q1 + 1.0 / q_1f,
        Q2Formula::Caption => 2.0 / q1 + 1.0 / q_1f,
    };
    Ok(1.0 / inv)
}

/// Complete budget at one bias point. Times in seconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BudgetResult {
    pub f01_ghz: f64,
    pub n01: f64,
    pub t1: f64,
    pub q1: f64,
    pub t_phi_first: f64,
    pub t_phi_second: f64,
    /// `omega_01` times the combined first- and second-order 1/f dephasing time.
    pub q_1f: f64,
    pub t2e_thermal: Option<f64>,
    pub q2: f64,
}

pub fn budget(params: &CircuitParams, bias: &FluxBias, env: &NoiseEnvironment, basis: &BasisConfig) -> Result<BudgetResult> {
    let builder = HamiltonianBuilder::new(params, basis)?;
    budget_with(&builder, bias, env, Q2Formula::Text)
}

pub fn budget_with(builder: &HamiltonianBuilder, bias: &FluxBias, env: &NoiseEnvironment, formula: Q2Formula) -> Result<BudgetResult> {
    env.validate()?;
    let spec = builder.solve(bias)?;
    let f01 = spec.f01()?;
    let n01 = matrix_element(&spec, OperatorKind::ChargeN, 0, 1)?;
    let t1 = t1_from_element(n01, builder.params().e_c, env.q_diel)?;
    let q1 = q1_from(f01, t1)?;
    let t_phi_first = dephasing_time(builder, bias.phi_ext, env.a_1f, 1)?;
    let t_phi_second = dephasing_time(builder, bias.phi_ext, env.a_1f, 2)?;
    let t_phi = 1.0 / (1.0 / t_phi_first + 1.0 / t_phi_second);
    let q_1f = angular(f01) * t_phi;
    let t2e_thermal = env.cavity.map(|_| thermal_photon_t2e(env)).transpose()?;
    let q2 = q2_combine(q1, q_1f, formula)?;
    Ok(BudgetResult { f01_ghz: f01, n01, t1, q1, t_phi_first, t_phi_second, q_1f, t2e_thermal, q2 })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DesignPoint {
    pub ej_over_ec: f64,
    pub f01_ghz: f64,
    pub f12_ghz: f64,
    pub q1: f64,
    pub q1f: f64,
    pub q2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DesignCurve {
    pub points: Vec<DesignPoint>,
    pub argmax_ej_over_ec: f64,
    pub max_q2: f64,
    /// False when the largest `Q2` sits on the first or last sweep point.
    pub interior_maximum: bool,
}

/// Sweep of `E_J / E_C` at fixed `E_C`, `E_L` and zero bias.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DesignSweep {
    pub e_c: f64,
    pub e_l: f64,
    pub ratio_min: f64,
    pub ratio_max: f64,
    /// Log-spaced points.
    pub points: usize,
    pub dim: usize,
    pub formula: Q2Formula,
}

impl DesignSweep {
    pub fn new(e_c: f64, e_l: f64) -> Self {
        DesignSweep { e_c, e_l, ratio_min: 2.0, ratio_max: 15.0, points: 48, dim: 120, formula: Q2Formula::Text }
    }

    pub fn ratios(&self) -> Vec<f64> {
        let (a, b) = (self.ratio_min.ln(), self.ratio_max.ln());
        (0..self.points).map(|k| (a + (b - a) * k as f64 / (self.points - 1) as f64).exp()).collect()
    }
}

pub fn optimize_design(sweep: &DesignSweep, env: &NoiseEnvironment) -> Result<DesignCurve> {
    env.validate()?;
    if sweep.ratio_min > 2.0 || sweep.ratio_max < 15.0 || sweep.ratio_min <= 0.0 {
        return domain(format!(
            "E_J/E_C range [{}, {}] must cover [2, 15]",
            sweep.ratio_min, sweep.ratio_max
        ));
    }
    if sweep.points < 40 {
        return domain(format!("design sweep needs at least 40 points, got {}", sweep.points));
    }
    let points: Vec<DesignPoint> = sweep
        .ratios()
        .into_par_iter()
        .map(|r| {
            let params = CircuitParams::new(r * sweep.e_c, sweep.e_c, sweep.e_l)?;
            let builder = HamiltonianBuilder::new(&params, &BasisConfig::new(&params, sweep.dim)?)?;
            let b = budget_with(&builder, &FluxBias::zero(), env, sweep.formula)?;
            let spec = builder.solve(&FluxBias::zero())?;
            Ok(DesignPoint {
                ej_over_ec: r,
                f01_ghz: b.f01_ghz,
                f12_ghz: spec.transition_frequency(1, 2)?,
                q1: b.q1,
                q1f: b.q_1f,
                q2: b.q2,
            })
        })
        .collect::<Result<_>>()?;
    let (best, top) = points
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |acc, (i, p)| if p.q2 > acc.1 { (i, p.q2) } else { acc });
    Ok(DesignCurve {
        argmax_ej_over_ec: points[best].ej_over_ec,
        max_q2: top,
        interior_maximum: best > 0 && best + 1 < points.len(),
        points,
    })
}

/// CSV `ej_over_ec,q1,q1f,q2`.
pub fn write_design_csv<W: std::io::Write>(curve: &DesignCurve, mut out: W) -> Result<()> {
    writeln!(out, "ej_over_ec,q1,q1f,q2")?;
    for p in &curve.points {
        writeln!(out, "{:.6},{:.6e},{:.6e},{:.6e}", p.ej_over_ec, p.q1, p.q1f, p.q2)?;
    }
    Ok(())
}

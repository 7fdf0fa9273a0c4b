//! Effective fluxon-tunneling model.
//!
//! In the basis of fluxon states `|m>` (the phase resting in well `m`)
//!
//! ```text
//! H = sum_m (E_LS/2)(2 pi m - phi_ext)^2 |m><m|
//!     - (eps1/2) sum_m |m><m±1| + (eps2/2) sum_m |m><m±2|
//! ```
//!
//! which is a Cooper-pair box with charge and flux exchanged. Near zero bias
//! the three wells `m = -1, 0, 1` give a ground state and a doublet split by
//! `alpha eps1 + eps2`, `alpha = eps1 / (4 pi^2 E_LS)`.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::circuit::{BasisConfig, CircuitParams, FluxBias, HamiltonianBuilder};
use crate::error::{domain, Error, Result};
use crate::linalg;
use crate::simplex::{self, MultiStart, SimplexOptions};

/// Largest `alpha` accepted by the perturbative formulas.
pub const MAX_PERTURBATIVE_ALPHA: f64 = 0.2;

/// Effective-model energies in GHz.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FluxonParams {
    pub e_l_sigma: f64,
    pub eps1: f64,
    pub eps2: f64,
}

impl FluxonParams {
    pub fn new(e_l_sigma: f64, eps1: f64, eps2: f64) -> Result<Self> {
        let p = FluxonParams { e_l_sigma, eps1, eps2 };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.e_l_sigma.is_finite() && self.e_l_sigma > 0.0) {
            return domain(format!("e_l_sigma must be positive, got {}", self.e_l_sigma));
        }
        for (name, v) in [("eps1", self.eps1), ("eps2", self.eps2)] {
            if !(v.is_finite() && v >= 0.0) {
                return domain(format!("{name} must be finite and non-negative, got {v}"));
            }
        }
        Ok(())
    }

    pub fn alpha(&self) -> f64 {
        self.eps1 / (4.0 * PI * PI * self.e_l_sigma)
    }

    /// Double-fluxon tunneling is expected to be the weaker process.
    pub fn eps2_exceeds_eps1(&self) -> bool {
        self.eps2 > self.eps1
    }

    fn require_perturbative(&self) -> Result<f64> {
        self.validate()?;
        let a = self.alpha();
        if a >= MAX_PERTURBATIVE_ALPHA {
            return domain(format!("alpha = {a:.4} is outside the perturbative range (< {MAX_PERTURBATIVE_ALPHA})"));
        }
        Ok(a)
    }
}

/// Fluxon states `m = -m_max ..= m_max`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FluxonBasisConfig {
    pub m_max: usize,
}

impl Default for FluxonBasisConfig {
    fn default() -> Self {
        FluxonBasisConfig { m_max: 3 }
    }
}

impl FluxonBasisConfig {
    pub fn new(m_max: usize) -> Result<Self> {
        if m_max < 1 {
            return domain("m_max must be at least 1");
        }
        Ok(FluxonBasisConfig { m_max })
    }

    pub fn size(&self) -> usize {
        2 * self.m_max + 1
    }
}

/// Hamiltonian matrix in the fluxon basis; row `k` is `m = k - m_max`.
pub fn build_fluxon_hamiltonian(fp: &FluxonParams, bias: &FluxBias, cfg: &FluxonBasisConfig) -> DMatrix<f64> {
    let n = cfg.size();
    let mut h = DMatrix::zeros(n, n);
    for k in 0..n {
        let m = k as f64 - cfg.m_max as f64;
        h[(k, k)] = 0.5 * fp.e_l_sigma * (2.0 * PI * m - bias.phi_ext).powi(2);
        if k + 1 < n {
            h[(k, k + 1)] = -0.5 * fp.eps1;
            h[(k + 1, k)] = -0.5 * fp.eps1;
        }
        if k + 2 < n {
            h[(k, k + 2)] = 0.5 * fp.eps2;
            h[(k + 2, k)] = 0.5 * fp.eps2;
        }
    }
    h
}

/// Ascending eigenvalues and sign-fixed eigenvectors of the fluxon model.
pub fn fluxon_spectrum(fp: &FluxonParams, bias: &FluxBias, cfg: &FluxonBasisConfig) -> Result<(Vec<f64>, DMatrix<f64>)> {
    fp.validate()?;
    linalg::symmetric_eigen(&build_fluxon_hamiltonian(fp, bias, cfg))
}

/// Ascending eigenvalues of the fluxon model.
pub fn fluxon_energies(fp: &FluxonParams, bias: &FluxBias, cfg: &FluxonBasisConfig) -> Result<Vec<f64>> {
    linalg::symmetric_eigenvalues(&build_fluxon_hamiltonian(fp, bias, cfg))
}

/// Closed-form low-energy spectrum at zero bias.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PerturbativeDoublet {
    pub f01: f64,
    pub f02: f64,
    pub f12: f64,
    pub alpha: f64,
}

pub fn perturbative_doublet(fp: &FluxonParams) -> Result<PerturbativeDoublet> {
    let alpha = fp.require_perturbative()?;
    let base = 2.0 * PI * PI * fp.e_l_sigma;
    let f01 = base + alpha * fp.eps1 - 0.5 * fp.eps2;
    let f02 = base + 2.0 * alpha * fp.eps1 + 0.5 * fp.eps2;
    Ok(PerturbativeDoublet { f01, f02, f12: alpha * fp.eps1 + fp.eps2, alpha })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SweetSpot {
    Integer,
    Half,
}

/// Estimate of `|<0|n|1>|`: `(sqrt(2) pi / 8)(eps1 / E_C)` at integer flux and
/// `sqrt(2)` smaller at half flux.
pub fn dual_charge_element(fp: &FluxonParams, e_c: f64, spot: SweetSpot) -> Result<f64> {
    fp.require_perturbative()?;
    if !(e_c.is_finite() && e_c > 0.0) {
        return domain(format!("e_c must be positive, got {e_c}"));
    }
    let integer = 2f64.sqrt() * PI / 8.0 * fp.eps1 / e_c;
    Ok(match spot {
        SweetSpot::Integer => integer,
        SweetSpot::Half => integer / 2f64.sqrt(),
    })
}

/// Estimate of `|<0|phi|1>|`: `2 pi alpha` at integer flux, `pi` at half flux.
pub fn dual_phase_element(fp: &FluxonParams, spot: SweetSpot) -> Result<f64> {
    let alpha = fp.require_perturbative()?;
    Ok(match spot {
        SweetSpot::Integer => 2.0 * PI * alpha,
        SweetSpot::Half => PI,
    })
}

/// Linearized loop inductive energy `(1/E_L + 1/E_J)^-1`.
pub fn e_l_sigma_from_circuit(params: &CircuitParams) -> Result<f64> {
    params.validate()?;
    Ok(1.0 / (1.0 / params.e_l + 1.0 / params.e_j))
}

/// Options for matching the fluxon model to the full circuit spectrum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DualFitOptions {
    /// Half-width of the bias window in flux quanta.
    pub window: f64,
    pub points: usize,
    pub basis: FluxonBasisConfig,
    /// Oscillator truncation for the full model.
    pub dim: usize,
    pub starts: usize,
    pub seed: u64,
}

impl Default for DualFitOptions {
    fn default() -> Self {
        DualFitOptions { window: 0.25, points: 21, basis: FluxonBasisConfig::default(), dim: 100, starts: 8, seed: 0 }
    }
}

/// Result of a fluxon-model fit.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FluxonFit {
    pub e_l_sigma: f64,
    pub eps1: f64,
    pub eps2: f64,
    /// RMS of the transition-frequency residuals (GHz).
    pub rms_residual: f64,
    /// Largest `|f_fluxon - f_target| / f_target` over the fitted points.
    #[serde(skip)]
    pub max_relative_error: f64,
    #[serde(skip)]
    pub converged: bool,
}

impl FluxonFit {
    pub fn params(&self) -> FluxonParams {
        FluxonParams { e_l_sigma: self.e_l_sigma, eps1: self.eps1, eps2: self.eps2 }
    }
}

/// Reference transitions `(phi_ext / 2 pi, f01, f02)` of the full model.
pub fn full_model_doublet(params: &CircuitParams, grid: &[f64], dim: usize) -> Result<Vec<(f64, f64, f64)>> {
    let builder = HamiltonianBuilder::new(params, &BasisConfig::new(params, dim)?)?;
    grid.iter()
        .map(|&x| {
            let e = builder.energies(&FluxBias::from_flux_quanta(x)?)?;
            Ok((x, e[1] - e[0], e[2] - e[0]))
        })
        .collect()
}

fn doublet_errors(fp: &FluxonParams, targets: &[(f64, f64, f64)], cfg: &FluxonBasisConfig) -> Result<(f64, f64)> {
    let mut sq = 0.0;
    let mut rel = 0.0f64;
    for &(x, f01, f02) in targets {
        let e = fluxon_energies(fp, &FluxBias::from_flux_quanta(x)?, cfg)?;
        for (model, target) in [(e[1] - e[0], f01), (e[2] - e[0], f02)] {
            sq += (model - target).powi(2);
            rel = rel.max(((model - target) / target).abs());
        }
    }
    Ok(((sq / (2 * targets.len()) as f64).sqrt(), rel))
}

/// Least-squares fluxon parameters for the two lowest transitions in `targets`.
pub fn fit_fluxon_to_doublet(targets: &[(f64, f64, f64)], init: &FluxonParams, opts: &DualFitOptions) -> Result<FluxonFit> {
    if targets.len() < 2 {
        return domain("need at least two bias points to fit three parameters");
    }
    init.validate()?;
    let cfg = opts.basis;
    // log coordinates keep every parameter positive
    let floor = 1e-6 * init.e_l_sigma;
    let x0 = [init.e_l_sigma.ln(), init.eps1.max(floor).ln(), init.eps2.max(floor).ln()];
    let unpack = |y: &[f64]| FluxonParams { e_l_sigma: y[0].exp(), eps1: y[1].exp(), eps2: y[2].exp() };
    let objective = |y: &[f64]| match doublet_errors(&unpack(y), targets, &cfg) {
        Ok((rms, _)) => rms * rms,
        Err(_) => f64::INFINITY,
    };
    let ms = MultiStart { starts: opts.starts.max(1), spread: 0.2, seed: opts.seed };
    let best = simplex::multi_start(objective, &x0, &[0.1, 0.2, 0.5], &ms, &SimplexOptions::default());
    let fp = unpack(&best.x);
    let (rms, rel) = doublet_errors(&fp, targets, &cfg)?;
    Ok(FluxonFit { e_l_sigma: fp.e_l_sigma, eps1: fp.eps1, eps2: fp.eps2, rms_residual: rms, max_relative_error: rel, converged: best.converged })
}

/// Bias grid `-window ..= window` with `points` entries.
pub fn symmetric_grid(window: f64, points: usize) -> Vec<f64> {
    if points < 2 {
        return vec![0.0];
    }
    (0..points).map(|k| -window + 2.0 * window * k as f64 / (points - 1) as f64).collect()
}

/// Match the fluxon model to the `f01`, `f02` spectrum of the full circuit
/// Hamiltonian over `|phi_ext / 2 pi| <= window`.
///
/// The starting point is `E_LS` from the circuit energies and `eps1` from the
/// full-model splitting at half flux, where the fluxon model predicts
/// `f01 = eps1`.
pub fn fit_fluxon_to_full(params: &CircuitParams, opts: &DualFitOptions) -> Result<FluxonFit> {
    params.validate()?;
    if !(opts.window > 0.0 && opts.window <= 0.5) {
        return domain(format!("bias window must lie in (0, 0.5] flux quanta, got {}", opts.window));
    }
    let targets = full_model_doublet(params, &symmetric_grid(opts.window, opts.points), opts.dim)?;
    let plasmon = params.plasmon_estimate();
    if let Some(&(x, _, f02)) = targets.iter().find(|t| t.2 >= plasmon) {
        return domain(format!(
            "f02 = {f02:.3} GHz at phi_ext/2pi = {x} reaches the plasmon estimate {plasmon:.3} GHz; narrow the window"
        ));
    }
    let half = full_model_doublet(params, &[0.5], opts.dim)?[0].1;
    let e_ls = e_l_sigma_from_circuit(params)?;
    let init = FluxonParams { e_l_sigma: e_ls, eps1: half, eps2: 0.1 * half };
    let fit = fit_fluxon_to_doublet(&targets, &init, opts)?;
    if !fit.rms_residual.is_finite() {
        return Err(Error::NotConverged("fluxon fit produced a non-finite residual".into()));
    }
    Ok(fit)
}

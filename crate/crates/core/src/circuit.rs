//! Fluxonium circuit Hamiltonian in a truncated harmonic-oscillator basis.
//!
//! The Hamiltonian (in GHz, i.e. `E/h`) is
//!
//! ```text
//! H = 4 E_C n^2 + 1/2 E_L phi^2 - E_J cos(phi - phi_ext)
//! ```
//!
//! with `phi = phi_zpf/sqrt(2) (a + a†)` and `n = i/sqrt(2) (E_L/8E_C)^(1/4) (a† - a)`,
//! `phi_zpf = (8 E_C / E_L)^(1/4)`. The cosine is an exact matrix function of the
//! truncated phase operator, never a Taylor series.
//!
//! All energies are in GHz. Conversions to angular units happen only where
//! rates and quality factors are formed (see [`crate::budget`]).

use std::f64::consts::PI;
use std::io::Write;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::linalg;

/// Default oscillator truncation.
pub const DEFAULT_DIM: usize = 120;
/// Upper bound for [`convergence_required`].
pub const MAX_DIM: usize = 400;
/// Threshold below which a dimensionless matrix element is treated as zero.
pub const NUMERICAL_ZERO: f64 = 1e-8;

/// Josephson, charging and inductive energies in GHz.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CircuitParams {
    pub e_j: f64,
    pub e_c: f64,
    pub e_l: f64,
}

impl CircuitParams {
    pub fn new(e_j: f64, e_c: f64, e_l: f64) -> Result<Self> {
        let p = CircuitParams { e_j, e_c, e_l };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("e_j", self.e_j), ("e_c", self.e_c), ("e_l", self.e_l)] {
            if !(v.is_finite() && v > 0.0) {
                return domain(format!("{name} must be a finite positive energy, got {v}"));
            }
        }
        Ok(())
    }

    /// `E_L < E_J`: the potential has several wells.
    pub fn is_fluxonium_regime(&self) -> bool {
        self.e_l < self.e_j
    }

    pub fn phi_zpf(&self) -> f64 {
        (8.0 * self.e_c / self.e_l).powf(0.25)
    }

    /// Single-well plasmon estimate `sqrt(8 E_J E_C)`.
    pub fn plasmon_estimate(&self) -> f64 {
        (8.0 * self.e_j * self.e_c).sqrt()
    }

    /// Fluxon (inter-well) estimate `2 pi^2 E_L`.
    pub fn fluxon_estimate(&self) -> f64 {
        2.0 * PI * PI * self.e_l
    }
}

/// External flux bias in radians; `2 pi` is one flux quantum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FluxBias {
    pub phi_ext: f64,
}

impl FluxBias {
    pub fn new(phi_ext: f64) -> Result<Self> {
        if !phi_ext.is_finite() {
            return domain(format!("flux bias must be finite, got {phi_ext}"));
        }
        Ok(FluxBias { phi_ext })
    }

    pub fn zero() -> Self {
        FluxBias { phi_ext: 0.0 }
    }

    /// Bias given as a fraction of a flux quantum (`phi_ext / 2 pi`).
    pub fn from_flux_quanta(x: f64) -> Result<Self> {
        Self::new(2.0 * PI * x)
    }

    pub fn flux_quanta(&self) -> f64 {
        self.phi_ext / (2.0 * PI)
    }
}

/// Oscillator truncation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BasisConfig {
    pub dim: usize,
    pub phi_zpf: f64,
}

impl BasisConfig {
    pub fn new(params: &CircuitParams, dim: usize) -> Result<Self> {
        params.validate()?;
        if dim < 2 {
            return domain(format!("basis dimension must be at least 2, got {dim}"));
        }
        Ok(BasisConfig { dim, phi_zpf: params.phi_zpf() })
    }

    pub fn default_for(params: &CircuitParams) -> Result<Self> {
        Self::new(params, DEFAULT_DIM)
    }

    fn check(&self, params: &CircuitParams) -> Result<()> {
        if self.dim < 2 {
            return domain(format!("basis dimension must be at least 2, got {}", self.dim));
        }
        if (self.phi_zpf - params.phi_zpf()).abs() > 1e-12 * params.phi_zpf() {
            return domain(format!(
                "basis phi_zpf {} does not match circuit parameters ({})",
                self.phi_zpf,
                params.phi_zpf()
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum OperatorKind {
    ChargeN,
    PhasePhi,
}

/// Phase operator `phi_zpf/sqrt(2) (a + a†)`.
pub fn phase_operator(dim: usize, phi_zpf: f64) -> DMatrix<f64> {
    let c = phi_zpf / 2f64.sqrt();
    let mut m = DMatrix::zeros(dim, dim);
    for k in 0..dim.saturating_sub(1) {
        let v = c * ((k + 1) as f64).sqrt();
        m[(k, k + 1)] = v;
        m[(k + 1, k)] = v;
    }
    m
}

/// Real factor `N` of the charge operator, `n = i N`, with
/// `N = (1/sqrt(2)) (E_L/8E_C)^(1/4) (a† - a)`.
pub fn charge_operator(dim: usize, phi_zpf: f64) -> DMatrix<f64> {
    let c = 1.0 / (phi_zpf * 2f64.sqrt());
    let mut m = DMatrix::zeros(dim, dim);
    for k in 0..dim.saturating_sub(1) {
        let v = c * ((k + 1) as f64).sqrt();
        m[(k + 1, k)] = v;
        m[(k, k + 1)] = -v;
    }
    m
}

/// Oscillator-basis operators that depend only on the truncation.
#[derive(Debug, Clone)]
pub struct OscillatorOperators {
    pub phase: DMatrix<f64>,
    pub charge: DMatrix<f64>,
    pub cos_phase: DMatrix<f64>,
    pub sin_phase: DMatrix<f64>,
}

impl OscillatorOperators {
    pub fn new(basis: &BasisConfig) -> Result<Self> {
        let phase = phase_operator(basis.dim, basis.phi_zpf);
        let charge = charge_operator(basis.dim, basis.phi_zpf);
        let (values, vectors) = linalg::symmetric_eigen(&phase)?;
        let func = |f: fn(f64) -> f64| {
            let mut scaled = vectors.clone();
            for (j, mut col) in scaled.column_iter_mut().enumerate() {
                col *= f(values[j]);
            }
            scaled * vectors.transpose()
        };
        let cos_phase = func(f64::cos);
        let sin_phase = func(f64::sin);
        Ok(OscillatorOperators { phase, charge, cos_phase, sin_phase })
    }
}

/// Reusable Hamiltonian assembly for one set of circuit parameters.
///
/// The flux-independent part and the matrix cosine/sine are computed once, so
/// evaluating many bias points only costs a matrix combination plus the
/// eigensolve.
#[derive(Debug, Clone)]
pub struct HamiltonianBuilder {
    params: CircuitParams,
    basis: BasisConfig,
    ops: OscillatorOperators,
    static_part: DMatrix<f64>,
}

impl HamiltonianBuilder {
    pub fn new(params: &CircuitParams, basis: &BasisConfig) -> Result<Self> {
        params.validate()?;
        basis.check(params)?;
        let ops = OscillatorOperators::new(basis)?;
        // squares taken one state larger so the kept block is the exact truncation
        let d = basis.dim;
        let big_n = charge_operator(d + 1, basis.phi_zpf);
        let big_phi = phase_operator(d + 1, basis.phi_zpf);
        let n_sq = -(&big_n * &big_n).view((0, 0), (d, d)).into_owned();
        let phi_sq = (&big_phi * &big_phi).view((0, 0), (d, d)).into_owned();
        let static_part = n_sq * (4.0 * params.e_c) + phi_sq * (0.5 * params.e_l);
        Ok(HamiltonianBuilder { params: *params, basis: *basis, ops, static_part })
    }

    pub fn params(&self) -> &CircuitParams {
        &self.params
    }

    pub fn basis(&self) -> &BasisConfig {
        &self.basis
    }

    pub fn operators(&self) -> &OscillatorOperators {
        &self.ops
    }

    pub fn hamiltonian(&self, bias: &FluxBias) -> DMatrix<f64> {
        let (s, c) = bias.phi_ext.sin_cos();
        let mut h = self.static_part.clone();
        h -= &self.ops.cos_phase * (self.params.e_j * c);
        h -= &self.ops.sin_phase * (self.params.e_j * s);
        // remove rounding asymmetry
        let ht = h.transpose();
        (h + ht) * 0.5
    }

    /// Ascending eigenvalues only.
    pub fn energies(&self, bias: &FluxBias) -> Result<Vec<f64>> {
        linalg::symmetric_eigenvalues(&self.hamiltonian(bias))
    }

    pub fn solve(&self, bias: &FluxBias) -> Result<SpectrumResult> {
        let (energies, eigvecs) = diagonalize(&self.hamiltonian(bias))?;
        Ok(SpectrumResult { energies, eigvecs, params: self.params, bias: *bias, basis: self.basis })
    }
}

/// Hamiltonian matrix in the oscillator basis (GHz).
pub fn build_hamiltonian(params: &CircuitParams, bias: &FluxBias, basis: &BasisConfig) -> Result<DMatrix<f64>> {
    Ok(HamiltonianBuilder::new(params, basis)?.hamiltonian(bias))
}

/// Full ascending spectrum and eigenvectors (one per column) with the
/// largest-magnitude coefficient of each eigenvector positive.
pub fn diagonalize(h: &DMatrix<f64>) -> Result<(Vec<f64>, DMatrix<f64>)> {
    if (h - h.transpose()).amax() > 1e-12 * h.amax().max(1.0) {
        return domain("matrix is not symmetric");
    }
    linalg::symmetric_eigen(h)
}

/// Build and diagonalize in one step.
pub fn solve(params: &CircuitParams, bias: &FluxBias, basis: &BasisConfig) -> Result<SpectrumResult> {
    HamiltonianBuilder::new(params, basis)?.solve(bias)
}

/// Diagonalized fluxonium Hamiltonian.
#[derive(Debug, Clone)]
pub struct SpectrumResult {
    /// Ascending eigenenergies (GHz).
    pub energies: Vec<f64>,
    /// Column `j` holds the oscillator coefficients `c_k` of eigenstate `j`.
    pub eigvecs: DMatrix<f64>,
    pub params: CircuitParams,
    pub bias: FluxBias,
    pub basis: BasisConfig,
}

impl SpectrumResult {
    /// Number of eigenstates whose weight in the top tenth of the oscillator
    /// basis is below `1e-6`; higher states are truncation artefacts.
    pub fn reliable_levels(&self) -> usize {
        let dim = self.basis.dim;
        let tail = (dim / 10).max(1);
        (0..dim)
            .take_while(|&j| {
                let w: f64 = (dim - tail..dim).map(|k| self.eigvecs[(k, j)].powi(2)).sum();
                w < 1e-6
            })
            .count()
    }

    fn check_level(&self, i: usize) -> Result<()> {
        let n = self.reliable_levels();
        if i >= n {
            return Err(Error::Index(format!(
                "level {i} is beyond the {n} converged levels of a dim-{} basis",
                self.basis.dim
            )));
        }
        Ok(())
    }

    /// `E_j - E_i` in GHz.
    pub fn transition_frequency(&self, i: usize, j: usize) -> Result<f64> {
        if i >= j {
            return Err(Error::Index(format!("transition ({i}, {j}) requires i < j")));
        }
        self.check_level(j)?;
        Ok(self.energies[j] - self.energies[i])
    }

    /// Transition frequencies `f_0k` for `k = 1..levels`.
    pub fn frequencies_from_ground(&self, levels: usize) -> Result<Vec<f64>> {
        (1..levels).map(|k| self.transition_frequency(0, k)).collect()
    }

    /// Operator projected on the lowest `levels` eigenstates.
    ///
    /// For [`OperatorKind::ChargeN`] this is the real matrix `M` with
    /// `<i|n|j> = i M_ij`; for [`OperatorKind::PhasePhi`] it is `<i|phi|j>`.
    pub fn operator_in_eigenbasis(&self, op: OperatorKind, levels: usize) -> Result<DMatrix<f64>> {
        if levels > 0 {
            self.check_level(levels - 1)?;
        }
        let v = self.eigvecs.columns(0, levels);
        let o = match op {
            OperatorKind::ChargeN => charge_operator(self.basis.dim, self.basis.phi_zpf),
            OperatorKind::PhasePhi => phase_operator(self.basis.dim, self.basis.phi_zpf),
        };
        Ok(v.transpose() * o * v)
    }

    /// Signed matrix element. For the charge operator the value `m` satisfies
    /// `<i|n|j> = i m`; the sign follows the eigenvector convention.
    pub fn matrix_element(&self, op: OperatorKind, i: usize, j: usize) -> Result<f64> {
        self.check_level(i)?;
        self.check_level(j)?;
        let o = match op {
            OperatorKind::ChargeN => charge_operator(self.basis.dim, self.basis.phi_zpf),
            OperatorKind::PhasePhi => phase_operator(self.basis.dim, self.basis.phi_zpf),
        };
        let vi = self.eigvecs.column(i);
        let vj = self.eigvecs.column(j);
        Ok(vi.dot(&(o * vj)))
    }

    /// Qubit frequency `f_01` (GHz).
    pub fn f01(&self) -> Result<f64> {
        self.transition_frequency(0, 1)
    }
}

/// `|<i|O|j>|` (dimensionless).
pub fn matrix_element(spec: &SpectrumResult, op: OperatorKind, i: usize, j: usize) -> Result<f64> {
    Ok(spec.matrix_element(op, i, j)?.abs())
}

pub fn transition_frequency(spec: &SpectrumResult, i: usize, j: usize) -> Result<f64> {
    spec.transition_frequency(i, j)
}

/// One row of a flux sweep.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepPoint {
    pub phi_ext_over_2pi: f64,
    /// `f_0k` for `k = 1..levels` (GHz).
    pub frequencies: Vec<f64>,
    /// `|<0|n|k>|` for `k = 1..levels`.
    pub charge_elements: Vec<f64>,
}

/// Frequencies and charge matrix elements from the ground state over a grid
/// of `phi_ext / 2 pi` values.
pub fn flux_sweep(params: &CircuitParams, grid: &[f64], levels: usize, basis: &BasisConfig) -> Result<Vec<SweepPoint>> {
    if levels < 2 {
        return domain(format!("a sweep needs at least 2 levels, got {levels}"));
    }
    let builder = HamiltonianBuilder::new(params, basis)?;
    grid.iter()
        .map(|&x| {
            let spec = builder.solve(&FluxBias::from_flux_quanta(x)?)?;
            let frequencies = spec.frequencies_from_ground(levels)?;
            let charge_elements = (1..levels)
                .map(|k| matrix_element(&spec, OperatorKind::ChargeN, 0, k))
                .collect::<Result<Vec<_>>>()?;
            Ok(SweepPoint { phi_ext_over_2pi: x, frequencies, charge_elements })
        })
        .collect()
}

/// Write a sweep as CSV with header `phi_ext_over_2pi,f01_GHz,...,n01,...`.
pub fn write_sweep_csv<W: Write>(points: &[SweepPoint], mut out: W) -> Result<()> {
    let levels = points.first().map_or(0, |p| p.frequencies.len());
    let mut header = vec!["phi_ext_over_2pi".to_string()];
    header.extend((1..=levels).map(|k| format!("f0{k}_GHz")));
    header.extend((1..=levels).map(|k| format!("n0{k}")));
    writeln!(out, "{}", header.join(","))?;
    for p in points {
        let mut row = vec![format!("{}", p.phi_ext_over_2pi)];
        row.extend(p.frequencies.iter().map(|f| format!("{f:.12}")));
        row.extend(p.charge_elements.iter().map(|n| format!("{n:.12e}")));
        writeln!(out, "{}", row.join(","))?;
    }
    Ok(())
}

/// Wavefunction amplitudes on a phase grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Wavefunction {
    pub values: Vec<f64>,
    /// Number of oscillator terms actually summed (smaller than the basis
    /// dimension only if high-order terms stopped being finite).
    pub dim_used: usize,
}

/// `Psi_j(phi) = sum_k c_k psi_k(phi)` with orthonormal oscillator eigenfunctions
/// `psi_k(phi) = (pi phi_zpf^2)^(-1/4) (2^k k!)^(-1/2) H_k(phi/phi_zpf) exp(-phi^2 / 2 phi_zpf^2)`.
///
/// The Hermite functions are generated by their normalized three-term
/// recurrence, which never forms `H_k` or `k!` explicitly.
pub fn wavefunction(spec: &SpectrumResult, j: usize, grid: &[f64]) -> Result<Wavefunction> {
    spec.check_level(j)?;
    let dim = spec.basis.dim;
    let z = spec.basis.phi_zpf;
    let coeffs = spec.eigvecs.column(j);
    let norm0 = (PI * z * z).powf(-0.25);
    let mut values = vec![0.0; grid.len()];
    let mut dim_used = dim;
    for (out, &phi) in values.iter_mut().zip(grid) {
        let x = phi / z;
        let mut prev = 0.0;
        let mut cur = norm0 * (-0.5 * x * x).exp();
        let mut acc = 0.0;
        for k in 0..dim {
            if !cur.is_finite() {
                dim_used = dim_used.min(k);
                break;
            }
            acc += coeffs[k] * cur;
            let kf = k as f64;
            let next = (2.0 / (kf + 1.0)).sqrt() * x * cur - (kf / (kf + 1.0)).sqrt() * prev;
            prev = cur;
            cur = next;
        }
        *out = acc;
    }
    Ok(Wavefunction { values, dim_used })
}

/// Smallest basis on the doubling ladder `target+1, 2(target+1), ...` such
/// that doubling it moves each of the `target` lowest eigenvalues by less
/// than `tol` GHz.
pub fn convergence_required(params: &CircuitParams, bias: &FluxBias, target: usize, tol: f64) -> Result<BasisConfig> {
    params.validate()?;
    if !(tol > 0.0) {
        return domain(format!("tolerance must be positive, got {tol}"));
    }
    if target == 0 {
        return domain("need at least one target level");
    }
    let lowest = |dim: usize| -> Result<Vec<f64>> {
        let basis = BasisConfig::new(params, dim)?;
        let e = HamiltonianBuilder::new(params, &basis)?.energies(bias)?;
        Ok(e[..target].to_vec())
    };
    let mut dim = (target + 1).max(2);
    let mut current = lowest(dim)?;
    let mut last_change = f64::INFINITY;
    while 2 * dim <= MAX_DIM {
        let doubled = lowest(2 * dim)?;
        last_change = current.iter().zip(&doubled).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        if last_change < tol {
            return BasisConfig::new(params, dim);
        }
        dim *= 2;
        current = doubled;
    }
    Err(Error::NotConverged(format!(
        "lowest {target} levels still move by {last_change:.3e} GHz at dim {dim} (cap {MAX_DIM})"
    )))
}

/// Default guard against near-resonant cavity denominators (GHz).
pub const DEFAULT_MIN_DETUNING: f64 = 0.05;
/// Levels included in the dispersive sums.
pub const DISPERSIVE_LEVELS: usize = 12;

/// Coupling-independent ratio `|chi_1 - chi_0| / |chi_2 - chi_0|` where
/// `chi_i = sum_{j != i} |O_ij|^2 2 f_ij / (f_ij^2 - f_c^2)` with
/// `f_ij = E_i - E_j` (common coupling factor dropped).
pub fn dispersive_shift_ratio(spec: &SpectrumResult, coupling: OperatorKind, f_cavity: f64) -> Result<f64> {
    let levels = spec.reliable_levels().min(DISPERSIVE_LEVELS);
    let op = spec.operator_in_eigenbasis(coupling, levels)?;
    dispersive_ratio_from(&spec.energies[..levels], &op, f_cavity, DEFAULT_MIN_DETUNING)
}

/// State-dependent cavity pulls `chi_i` (up to the squared coupling).
pub fn dispersive_shifts(energies: &[f64], op: &DMatrix<f64>, f_cavity: f64, min_detuning: f64) -> Result<Vec<f64>> {
    let n = energies.len();
    if op.nrows() < n || op.ncols() < n {
        return domain("operator matrix smaller than level list");
    }
    if !(f_cavity.is_finite() && f_cavity > 0.0) {
        return domain(format!("cavity frequency must be positive, got {f_cavity}"));
    }
    let mut chi = vec![0.0; n.min(3)];
    for (i, c) in chi.iter_mut().enumerate() {
        for j in 0..n {
            if j == i {
                continue;
            }
            let f = energies[i] - energies[j];
            let w = op[(i, j)].powi(2);
            if w == 0.0 {
                continue;
            }
            if (f.abs() - f_cavity).abs() < min_detuning {
                return Err(Error::NearResonance(format!(
                    "transition {i}-{j} at {:.4} GHz is within {:.0} MHz of the cavity at {f_cavity} GHz",
                    f.abs(),
                    min_detuning * 1e3
                )));
            }
            *c += w * 2.0 * f / (f * f - f_cavity * f_cavity);
        }
    }
    Ok(chi)
}

pub fn dispersive_ratio_from(energies: &[f64], op: &DMatrix<f64>, f_cavity: f64, min_detuning: f64) -> Result<f64> {
    let chi = dispersive_shifts(energies, op, f_cavity, min_detuning)?;
    let d1 = chi.get(1).copied().unwrap_or(0.0) - chi[0];
    let d2 = chi.get(2).map_or(0.0, |c2| c2 - chi[0]);
    if d2.abs() <= 1e-12 * d1.abs().max(f64::MIN_POSITIVE) {
        return Err(Error::NearResonance(format!(
            "chi_2 - chi_0 = {d2:.3e} vanishes; ratio diverges (chi_1 - chi_0 = {d1:.3e})"
        )));
    }
    Ok((d1 / d2).abs())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn device_d() -> CircuitParams {
        CircuitParams::new(6.78, 1.47, 0.22).unwrap()
    }

    #[test]
    fn rejects_non_positive_energies() {
        assert!(CircuitParams::new(0.0, 1.0, 1.0).is_err());
        assert!(CircuitParams::new(1.0, -1.0, 1.0).is_err());
        assert!(CircuitParams::new(1.0, 1.0, f64::NAN).is_err());
    }

    #[test]
    fn basis_requires_two_states() {
        assert!(BasisConfig::new(&device_d(), 1).is_err());
    }

    #[test]
    fn linear_limit_is_harmonic() {
        // E_J is only required positive; at 1e-12 the cosine is irrelevant.
        let p = CircuitParams::new(1e-12, 1.5, 0.2).unwrap();
        let basis = BasisConfig::new(&p, 30).unwrap();
        let spec = solve(&p, &FluxBias::new(0.7).unwrap(), &basis).unwrap();
        let w = (8.0f64 * 1.5 * 0.2).sqrt();
        assert!((w - 1.549).abs() < 1e-3);
        for k in 0..10 {
            let f = spec.transition_frequency(k, k + 1).unwrap();
            assert!((f - w).abs() < 1e-9, "k={k} f={f}");
        }
    }

    #[test]
    fn hamiltonian_is_symmetric() {
        let p = device_d();
        let h = build_hamiltonian(&p, &FluxBias::new(0.3).unwrap(), &BasisConfig::new(&p, 60).unwrap()).unwrap();
        assert!((&h - h.transpose()).amax() <= 1e-12 * h.amax());
    }

    #[test]
    fn parity_selection_at_zero_flux() {
        let p = device_d();
        let spec = solve(&p, &FluxBias::zero(), &BasisConfig::default_for(&p).unwrap()).unwrap();
        assert!(matrix_element(&spec, OperatorKind::ChargeN, 0, 2).unwrap() < NUMERICAL_ZERO);
        assert!(matrix_element(&spec, OperatorKind::PhasePhi, 0, 2).unwrap() < NUMERICAL_ZERO);
    }

    #[test]
    fn index_errors() {
        let p = device_d();
        let spec = solve(&p, &FluxBias::zero(), &BasisConfig::new(&p, 40).unwrap()).unwrap();
        assert!(matches!(spec.transition_frequency(2, 1), Err(Error::Index(_))));
        assert!(matches!(spec.matrix_element(OperatorKind::ChargeN, 0, 39), Err(Error::Index(_))));
    }

    #[test]
    fn eigenvectors_are_normalized() {
        let p = device_d();
        let spec = solve(&p, &FluxBias::new(0.2).unwrap(), &BasisConfig::new(&p, 80).unwrap()).unwrap();
        let gram = spec.eigvecs.transpose() * &spec.eigvecs;
        assert!((gram - DMatrix::<f64>::identity(80, 80)).amax() < 1e-10);
    }

    #[test]
    fn linear_limit_converges_at_minimal_dim() {
        let p = CircuitParams::new(1e-14, 1.5, 0.2).unwrap();
        let basis = convergence_required(&p, &FluxBias::zero(), 5, 1e-9).unwrap();
        assert_eq!(basis.dim, 6);
    }

    #[test]
    fn convergence_rejects_bad_tolerance() {
        assert!(convergence_required(&device_d(), &FluxBias::zero(), 5, 0.0).is_err());
    }

    #[test]
    fn two_level_ratio_diverges() {
        let energies = [0.0, 4.0];
        let op = DMatrix::from_row_slice(2, 2, &[0.0, 0.1, 0.1, 0.0]);
        assert!(matches!(dispersive_ratio_from(&energies, &op, 7.0, 0.05), Err(Error::NearResonance(_))));
    }

    #[test]
    fn near_resonant_cavity_is_rejected() {
        let energies = [0.0, 4.0, 4.01];
        let op = DMatrix::from_row_slice(3, 3, &[0.0, 0.1, 0.0, 0.1, 0.0, 0.2, 0.0, 0.2, 0.0]);
        let err = dispersive_ratio_from(&energies, &op, 4.02, 0.05).unwrap_err();
        assert!(err.to_string().contains("transition 0-1"), "{err}");
    }

    #[test]
    fn sweep_csv_header() {
        let p = device_d();
        let pts = flux_sweep(&p, &[0.0, 0.01], 3, &BasisConfig::new(&p, 60).unwrap()).unwrap();
        let mut buf = Vec::new();
        write_sweep_csv(&pts, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("phi_ext_over_2pi,f01_GHz,f02_GHz,n01,n02\n"));
        assert_eq!(text.lines().count(), 3);
    }
}

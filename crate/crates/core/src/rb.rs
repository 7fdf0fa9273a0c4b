//! Single-qubit Clifford randomized benchmarking on the multilevel model.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::io::Write;

use nalgebra::{DVector, Matrix2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::linalg::{CMatrix, C64};
use crate::pulse::{self, calibrate_rotation, propagate, rotation, CalibrationOptions, DriveSystem, GateUnitary};
use crate::simplex::golden_section;

/// Average physical gates per Clifford used to convert Clifford errors.
pub const GATES_PER_CLIFFORD: f64 = 1.833;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PhysicalGate {
    Idle,
    X90,
    MinusX90,
    Y90,
    MinusY90,
    X180,
    Y180,
}

impl PhysicalGate {
    /// Generators used to build the Clifford table, in search order.
    pub const PULSES: [PhysicalGate; 6] =
        [PhysicalGate::X90, PhysicalGate::MinusX90, PhysicalGate::Y90, PhysicalGate::MinusY90, PhysicalGate::X180, PhysicalGate::Y180];

    /// `(iq_phase, rotation angle)`; the idle gate has angle zero.
    pub fn axis_angle(self) -> (f64, f64) {
        match self {
            PhysicalGate::Idle => (0.0, 0.0),
            PhysicalGate::X90 => (0.0, PI / 2.0),
            PhysicalGate::MinusX90 => (PI, PI / 2.0),
            PhysicalGate::Y90 => (PI / 2.0, PI / 2.0),
            PhysicalGate::MinusY90 => (-PI / 2.0, PI / 2.0),
            PhysicalGate::X180 => (0.0, PI),
            PhysicalGate::Y180 => (PI / 2.0, PI),
        }
    }

    pub fn ideal(self) -> Matrix2<C64> {
        let (axis, angle) = self.axis_angle();
        rotation(axis, angle)
    }
}

/// Whether identity Cliffords occupy time on the qubit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum IdentityConvention {
    /// Empty decomposition; the identity costs nothing.
    #[default]
    Skip,
    /// One idle slot lasting one 90-degree pulse.
    Idle,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CliffordElement {
    pub index: usize,
    pub su2_matrix: Matrix2<C64>,
    /// Pulses in application order.
    pub decomposition: Vec<PhysicalGate>,
}

/// The 24 single-qubit Cliffords with shortest decompositions, a Cayley
/// table and inverses.
#[derive(Debug, Clone)]
pub struct CliffordTable {
    pub elements: Vec<CliffordElement>,
    /// `product[i][j]` is the element equal to applying `i` then `j`.
    pub product: Vec<Vec<usize>>,
    pub inverse: Vec<usize>,
}

/// Matrix divided by the phase of its first non-negligible entry.
fn phase_normalized(u: &Matrix2<C64>) -> Matrix2<C64> {
    let pivot = u.iter().find(|z| z.norm() > 1e-6).copied().unwrap_or(C64::new(1.0, 0.0));
    u * (pivot.norm() / pivot)
}

/// Equal up to a global phase.
pub fn same_up_to_phase(a: &Matrix2<C64>, b: &Matrix2<C64>, tol: f64) -> bool {
    (phase_normalized(a) - phase_normalized(b)).iter().all(|z| z.norm() <= tol)
}

impl CliffordTable {
    pub fn new() -> Self {
        // breadth-first search gives minimal-length decompositions
        let mut elements = vec![CliffordElement { index: 0, su2_matrix: Matrix2::identity(), decomposition: vec![] }];
        let mut frontier = vec![0usize];
        while !frontier.is_empty() && elements.len() < 24 {
            let mut next = Vec::new();
            for &i in &frontier {
                for g in PhysicalGate::PULSES {
                    let u = g.ideal() * elements[i].su2_matrix;
                    if elements.iter().any(|e| same_up_to_phase(&e.su2_matrix, &u, 1e-9)) {
                        continue;
                    }
                    let mut decomposition = elements[i].decomposition.clone();
                    decomposition.push(g);
                    let index = elements.len();
                    elements.push(CliffordElement { index, su2_matrix: u, decomposition });
                    next.push(index);
                }
            }
            frontier = next;
        }
        let find = |u: &Matrix2<C64>| elements.iter().position(|e| same_up_to_phase(&e.su2_matrix, u, 1e-9));
        let product: Vec<Vec<usize>> = (0..elements.len())
            .map(|i| {
                (0..elements.len())
                    .map(|j| find(&(elements[j].su2_matrix * elements[i].su2_matrix)).expect("Clifford group is closed"))
                    .collect()
            })
            .collect();
        let inverse = (0..elements.len()).map(|i| product[i].iter().position(|&k| k == 0).expect("inverse exists")).collect();
        CliffordTable { elements, product, inverse }
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    /// Physical pulses for element `i` under `convention`.
    pub fn pulses(&self, i: usize, convention: IdentityConvention) -> Vec<PhysicalGate> {
        let d = &self.elements[i].decomposition;
        if d.is_empty() && convention == IdentityConvention::Idle {
            vec![PhysicalGate::Idle]
        } else {
            d.clone()
        }
    }

    pub fn mean_gate_count(&self, convention: IdentityConvention) -> f64 {
        let total: usize = (0..self.len()).map(|i| self.pulses(i, convention).len()).sum();
        total as f64 / self.len() as f64
    }
}

impl Default for CliffordTable {
    fn default() -> Self {
        Self::new()
    }
}

/// Clifford table built once per process.
pub fn clifford_table() -> &'static CliffordTable {
    static TABLE: std::sync::OnceLock<CliffordTable> = std::sync::OnceLock::new();
    TABLE.get_or_init(CliffordTable::new)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RbSequence {
    pub clifford_indices: Vec<usize>,
    pub recovery_index: usize,
    pub seed: u64,
}

impl RbSequence {
    /// All Cliffords including the recovery, in application order.
    pub fn all_indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.clifford_indices.iter().copied().chain(std::iter::once(self.recovery_index))
    }
}

/// `m` uniform Clifford draws followed by the inverting element.
pub fn random_sequence(m: usize, seed: u64) -> Result<RbSequence> {
    sequence_from_rng(m, &mut ChaCha8Rng::seed_from_u64(seed), seed)
}

fn sequence_from_rng(m: usize, rng: &mut ChaCha8Rng, seed: u64) -> Result<RbSequence> {
    if m == 0 {
        return domain("sequence length must be at least 1");
    }
    let table = clifford_table();
    let clifford_indices: Vec<usize> = (0..m).map(|_| rng.random_range(0..table.len())).collect();
    let total = clifford_indices.iter().fold(0, |acc, &c| table.product[acc][c]);
    Ok(RbSequence { clifford_indices, recovery_index: table.inverse[total], seed })
}

/// Propagated physical gates for one operating point.
#[derive(Debug, Clone)]
pub struct GateSet {
    gates: HashMap<PhysicalGate, GateUnitary>,
    pub t_pi_ns: f64,
    pub delta_phi_over_2pi: f64,
    pub levels: usize,
}

impl GateSet {
    /// Calibrate X180 (`t_pi`) and X90 (`t_pi / 2`) on `reference`, then
    /// propagate every physical gate on `operating` with the same pulses. The
    /// other axes reuse the calibrations with a shifted IQ phase. The idle
    /// gate is free evolution for a 90-degree pulse time rounded to whole
    /// qubit periods.
    pub fn calibrate(reference: &DriveSystem, operating: &DriveSystem, t_pi: f64, opts: &CalibrationOptions) -> Result<Self> {
        if reference.levels() != operating.levels() {
            return domain("reference and operating systems must have the same truncation");
        }
        let pi = calibrate_rotation(reference, t_pi, PI, opts)?.shape;
        let half = calibrate_rotation(reference, t_pi / 2.0, PI / 2.0, opts)?.shape;
        let pulses: Vec<(PhysicalGate, pulse::PulseShape)> = PhysicalGate::PULSES
            .iter()
            .map(|&g| {
                let (axis, angle) = g.axis_angle();
                let base = if angle == PI { pi } else { half };
                (g, pulse::PulseShape { iq_phase: axis, ..base })
            })
            .collect();
        let mut gates: HashMap<PhysicalGate, GateUnitary> = pulses
            .par_iter()
            .map(|(g, s)| propagate(operating, s, opts.steps_per_period).map(|u| (*g, u)))
            .collect::<Result<_>>()?;
        let f01 = operating.f01();
        let idle_t = (f01 * half.total_duration).round() / f01;
        let n = operating.levels();
        let idle = CMatrix::from_fn(n, n, |i, j| {
            if i == j { C64::from_polar(1.0, -2.0 * PI * (operating.freqs[i] - i as f64 * f01) * idle_t) } else { C64::new(0.0, 0.0) }
        });
        gates.insert(PhysicalGate::Idle, GateUnitary { matrix: idle, gate_duration: idle_t });
        Ok(GateSet { gates, t_pi_ns: t_pi, delta_phi_over_2pi: operating.delta_phi_over_2pi, levels: n })
    }

    /// Perfect two-level gates with the given durations.
    pub fn ideal(t_pi: f64) -> Self {
        let mut gates = HashMap::new();
        for g in PhysicalGate::PULSES.iter().copied().chain([PhysicalGate::Idle]) {
            let u = g.ideal();
            let duration = if g.axis_angle().1 == PI { t_pi } else { t_pi / 2.0 };
            gates.insert(g, GateUnitary { matrix: CMatrix::from_fn(2, 2, |i, j| u[(i, j)]), gate_duration: duration });
        }
        GateSet { gates, t_pi_ns: t_pi, delta_phi_over_2pi: 0.0, levels: 2 }
    }

    /// An empty set; every lookup is a cache miss.
    pub fn empty(levels: usize) -> Self {
        GateSet { gates: HashMap::new(), t_pi_ns: 0.0, delta_phi_over_2pi: 0.0, levels }
    }

    pub fn get(&self, g: PhysicalGate) -> Result<&GateUnitary> {
        self.gates.get(&g).ok_or_else(|| {
            Error::CacheMiss(format!("{g:?} at t_pi = {} ns, delta_phi/2pi = {}", self.t_pi_ns, self.delta_phi_over_2pi))
        })
    }
}

/// Incoherent error per physical gate, `(t_gate / T2*) / 3`, applied as a
/// depolarizing damping of the survival.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IncoherentModel {
    /// s
    pub t2_star: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RbOptions {
    pub m_values: Vec<usize>,
    pub n_seeds: usize,
    pub seed: u64,
    pub incoherent: Option<IncoherentModel>,
    pub identity: IdentityConvention,
}

impl Default for RbOptions {
    fn default() -> Self {
        RbOptions { m_values: default_m_values(), n_seeds: 30, seed: 0, incoherent: None, identity: IdentityConvention::Skip }
    }
}

/// Log-spaced lengths from 1 to 2000.
pub fn default_m_values() -> Vec<usize> {
    let mut m: Vec<usize> = (0..16).map(|k| (2000f64.powf(k as f64 / 15.0)).round() as usize).collect();
    m.dedup();
    m
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DecayFit {
    #[serde(rename = "A")]
    pub a: f64,
    #[serde(rename = "B")]
    pub b: f64,
    pub p: f64,
    pub rms_residual: f64,
    /// Set when the data carry no decay and `B` is undetermined.
    pub degenerate: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RbMetadata {
    pub identity_convention: IdentityConvention,
    pub mean_physical_gates_per_clifford: f64,
    pub gates_per_clifford_for_conversion: f64,
    pub t_pi_ns: f64,
    pub delta_phi_over_2pi: f64,
    pub t2_star_s: Option<f64>,
    pub seed: u64,
    pub n_seeds: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RbResult {
    pub m_values: Vec<usize>,
    pub survival: Vec<f64>,
    pub survival_sem: Vec<f64>,
    pub fit: DecayFit,
    pub f_clifford: f64,
    pub f_physical: f64,
    pub n_seeds: usize,
    pub metadata: RbMetadata,
}

/// Ground-state survival of one sequence.
pub fn sequence_survival(seq: &RbSequence, gates: &GateSet, convention: IdentityConvention, incoherent: Option<IncoherentModel>) -> Result<f64> {
    let table = clifford_table();
    let mut psi = DVector::<C64>::zeros(gates.levels);
    psi[0] = C64::new(1.0, 0.0);
    let mut depol = 1.0;
    for c in seq.all_indices() {
        for g in table.pulses(c, convention) {
            let u = gates.get(g)?;
            psi = &u.matrix * psi;
            if let Some(model) = incoherent {
                depol *= 1.0 - 2.0 * pulse::incoherent_error(u.gate_duration, model.t2_star)?;
            }
        }
    }
    let p0 = psi[0].norm_sqr();
    let p1 = psi[1].norm_sqr();
    Ok(depol * p0 + (1.0 - depol) * (p0 + p1) / 2.0)
}

/// Average survival over random sequences for each length and fit the decay.
///
/// Sequence `(m_k, s)` draws from ChaCha stream `k * n_seeds + s` of the
/// master seed, so results do not depend on evaluation order.
pub fn simulate_rb(gates: &GateSet, opts: &RbOptions) -> Result<RbResult> {
    if opts.n_seeds == 0 || opts.m_values.is_empty() {
        return domain("need at least one seed and one sequence length");
    }
    let table = clifford_table();
    let per_m: Vec<(f64, f64)> = opts
        .m_values
        .par_iter()
        .enumerate()
        .map(|(k, &m)| {
            let values: Vec<f64> = (0..opts.n_seeds)
                .map(|s| {
                    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
                    rng.set_stream((k * opts.n_seeds + s) as u64);
                    let seq = sequence_from_rng(m, &mut rng, opts.seed)?;
                    sequence_survival(&seq, gates, opts.identity, opts.incoherent)
                })
                .collect::<Result<_>>()?;
            let n = values.len() as f64;
            let mean = values.iter().sum::<f64>() / n;
            let var = if values.len() > 1 { values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0) } else { 0.0 };
            Ok((mean, (var / n).sqrt()))
        })
        .collect::<Result<_>>()?;
    let survival: Vec<f64> = per_m.iter().map(|v| v.0).collect();
    let fit = fit_decay(&opts.m_values, &survival)?;
    let (f_clifford, f_physical) = fidelities_from_p(fit.p)?;
    Ok(RbResult {
        m_values: opts.m_values.clone(),
        survival_sem: per_m.iter().map(|v| v.1).collect(),
        survival,
        fit,
        f_clifford,
        f_physical,
        n_seeds: opts.n_seeds,
        metadata: RbMetadata {
            identity_convention: opts.identity,
            mean_physical_gates_per_clifford: table.mean_gate_count(opts.identity),
            gates_per_clifford_for_conversion: GATES_PER_CLIFFORD,
            t_pi_ns: gates.t_pi_ns,
            delta_phi_over_2pi: gates.delta_phi_over_2pi,
            t2_star_s: opts.incoherent.map(|i| i.t2_star),
            seed: opts.seed,
            n_seeds: opts.n_seeds,
        },
    })
}

/// Best `A, B` for fixed `p` with `A` in `[0, 1]` and `B` in `[-1, 1]`.
fn linear_part(m: &[f64], y: &[f64], p: f64) -> (f64, f64, f64) {
    let x: Vec<f64> = m.iter().map(|&k| p.powf(k)).collect();
    let n = y.len() as f64;
    let (sx, sy) = (x.iter().sum::<f64>(), y.iter().sum::<f64>());
    let sxx: f64 = x.iter().map(|v| v * v).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
    let det = n * sxx - sx * sx;
    let (mut a, mut b) = if det.abs() > 1e-14 * n * sxx.max(1.0) {
        ((sy * sxx - sx * sxy) / det, (n * sxy - sx * sy) / det)
    } else {
        (sy / n, 0.0)
    };
    if !(0.0..=1.0).contains(&a) {
        a = a.clamp(0.0, 1.0);
        b = if sxx > 0.0 { (sxy - a * sx) / sxx } else { 0.0 };
    }
    if !(-1.0..=1.0).contains(&b) {
        b = b.clamp(-1.0, 1.0);
        a = ((sy - b * sx) / n).clamp(0.0, 1.0);
    }
    let sse = x.iter().zip(y).map(|(xi, yi)| (a + b * xi - yi).powi(2)).sum();
    (a, b, sse)
}

/// Least-squares fit of `A + B p^m`.
///
/// `A` and `B` enter linearly, so for each trial `p` they are solved in
/// closed form; `p` is located by a logarithmic scan of `1 - p` followed by
/// golden-section refinement. Data without spread give `p = 1` with
/// `degenerate` set.
pub fn fit_decay(m_values: &[usize], survival: &[f64]) -> Result<DecayFit> {
    if m_values.len() != survival.len() {
        return domain("m values and survival lengths differ");
    }
    let mut distinct = m_values.to_vec();
    distinct.sort_unstable();
    distinct.dedup();
    if distinct.len() < 3 {
        return domain("decay fit needs at least 3 distinct sequence lengths");
    }
    let m: Vec<f64> = m_values.iter().map(|&k| k as f64).collect();
    let mean = survival.iter().sum::<f64>() / survival.len() as f64;
    let spread = survival.iter().map(|y| (y - mean).abs()).fold(0.0, f64::max);
    if spread <= 1e-12 {
        return Ok(DecayFit { a: mean.clamp(0.0, 1.0), b: 0.0, p: 1.0, rms_residual: spread, degenerate: true });
    }
    let sse = |p: f64| linear_part(&m, survival, p).2;
    // scan u = log10(1 - p) over [-9, 0)
    let grid: Vec<f64> = (0..=360).map(|k| -9.0 + 9.0 * k as f64 / 360.0 * 0.999).collect();
    let costs: Vec<f64> = grid.iter().map(|&u| sse(1.0 - 10f64.powf(u))).collect();
    let best = (0..grid.len()).min_by(|&i, &j| costs[i].total_cmp(&costs[j])).unwrap_or(0);
    let lo = grid[best.saturating_sub(1)];
    let hi = grid[(best + 1).min(grid.len() - 1)];
    let (u, _) = golden_section(|u| sse(1.0 - 10f64.powf(u)), lo, hi, 1e-12);
    let p = 1.0 - 10f64.powf(u);
    let (a, b, e) = linear_part(&m, survival, p);
    Ok(DecayFit { a, b, p, rms_residual: (e / m.len() as f64).sqrt(), degenerate: false })
}

/// `1 - F_Clifford = (1 - p)/2` and `1 - F = (1 - F_Clifford)/1.833`.
pub fn fidelities_from_p(p: f64) -> Result<(f64, f64)> {
    if !(p > 0.0 && p <= 1.0) {
        return domain(format!("depolarization parameter must lie in (0, 1], got {p}"));
    }
    let e_cliff = (1.0 - p) / 2.0;
    Ok((1.0 - e_cliff, 1.0 - e_cliff / GATES_PER_CLIFFORD))
}

/// CSV `m,survival_mean,survival_sem`.
pub fn write_rb_csv<W: Write>(result: &RbResult, mut out: W) -> Result<()> {
    writeln!(out, "m,survival_mean,survival_sem")?;
    for ((m, s), e) in result.m_values.iter().zip(&result.survival).zip(&result.survival_sem) {
        writeln!(out, "{m},{s:.12},{e:.6e}")?;
    }
    Ok(())
}

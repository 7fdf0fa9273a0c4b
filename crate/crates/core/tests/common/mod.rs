#![allow(dead_code)]

use iflux::circuit::{convergence_required, BasisConfig, CircuitParams, FluxBias, HamiltonianBuilder, OperatorKind, MAX_DIM};
use iflux::linalg::C64;
use iflux::pulse::{propagate, DriveSystem, PulseShape};
use iflux::rb::{clifford_table, random_sequence, same_up_to_phase, simulate_rb, GateSet, RbOptions};
use nalgebra::Matrix2;
use proptest::prelude::*;
use proptest::test_runner::{Config, FileFailurePersistence, RngAlgorithm, TestCaseError, TestError, TestRng, TestRunner};

/// Circuit parameters in the fluxonium regime spanned by the builtin devices.
pub fn fluxonium_params() -> impl Strategy<Value = CircuitParams> {
    (3.0..8.0f64, 1.0..2.0f64, 0.1..0.3f64).prop_map(|(e_j, e_c, e_l)| CircuitParams { e_j, e_c, e_l })
}

/// Deterministic runner with `cases` cases.
pub fn runner(cases: u32) -> TestRunner {
    let config = Config { cases, failure_persistence: Some(Box::new(FileFailurePersistence::Off)), ..Config::default() };
    TestRunner::new_with_rng(config, TestRng::deterministic_rng(RngAlgorithm::ChaCha))
}

pub fn describe<T: std::fmt::Debug>(r: Result<(), TestError<T>>) -> Result<(), String> {
    r.map_err(|e| e.to_string())
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), TestCaseError> {
    if cond { Ok(()) } else { Err(TestCaseError::fail(msg())) }
}

fn energies(params: &CircuitParams, dim: usize, x: f64) -> Vec<f64> {
    let b = HamiltonianBuilder::new(params, &BasisConfig::new(params, dim).unwrap()).unwrap();
    b.energies(&FluxBias::from_flux_quanta(x).unwrap()).unwrap()
}

/// Lowest levels are periodic in one flux quantum and even in the flux.
pub fn flux_symmetry(params: CircuitParams, x: f64) -> Result<(), TestCaseError> {
    let b = HamiltonianBuilder::new(&params, &BasisConfig::new(&params, 80).unwrap()).unwrap();
    let e = |x: f64| b.energies(&FluxBias::from_flux_quanta(x).unwrap()).unwrap();
    let (base, shifted, mirrored) = (e(x), e(x + 1.0), e(-x));
    for k in 0..6 {
        ensure((base[k] - shifted[k]).abs() <= 1e-9, || format!("periodicity at level {k}: {} vs {}", base[k], shifted[k]))?;
        ensure((base[k] - mirrored[k]).abs() <= 1e-9, || format!("reflection at level {k}: {} vs {}", base[k], mirrored[k]))?;
    }
    Ok(())
}

/// The converged basis reproduces a basis twice as large.
pub fn basis_convergence(params: CircuitParams, x: f64) -> Result<(), TestCaseError> {
    let tol = 1e-6;
    let bias = FluxBias::from_flux_quanta(x).unwrap();
    let basis = convergence_required(&params, &bias, 3, tol).map_err(|e| TestCaseError::fail(e.to_string()))?;
    let coarse = energies(&params, basis.dim, x);
    let fine = energies(&params, (2 * basis.dim).min(MAX_DIM), x);
    for k in 0..3 {
        ensure((coarse[k] - fine[k]).abs() <= tol, || format!("level {k} moved by {:e} beyond dim {}", coarse[k] - fine[k], basis.dim))?;
    }
    Ok(())
}

/// `|n_ij| = |phi_ij| f_ij / (8 E_C)` for the lowest five levels.
pub fn commutator_identity(params: CircuitParams, x: f64) -> Result<(), TestCaseError> {
    let b = HamiltonianBuilder::new(&params, &BasisConfig::new(&params, 120).unwrap()).unwrap();
    let spec = b.solve(&FluxBias::from_flux_quanta(x).unwrap()).unwrap();
    for i in 0..5 {
        for j in i + 1..5 {
            let n = spec.matrix_element(OperatorKind::ChargeN, i, j).unwrap().abs();
            let phi = spec.matrix_element(OperatorKind::PhasePhi, i, j).unwrap().abs();
            let pred = phi * spec.transition_frequency(i, j).unwrap() / (8.0 * params.e_c);
            if n < 1e-9 && pred < 1e-9 {
                continue;
            }
            ensure((n - pred).abs() <= 1e-6 * n, || format!("{i}-{j}: |n| = {n:e}, predicted {pred:e}"))?;
        }
    }
    Ok(())
}

/// Propagators of arbitrary drives stay unitary.
pub fn propagator_unitarity(f01: f64, amp_mrad: f64, duration: f64, phase: f64) -> Result<(), TestCaseError> {
    let params = CircuitParams { e_j: 6.78, e_c: 1.47, e_l: 0.22 };
    let b = HamiltonianBuilder::new(&params, &BasisConfig::new(&params, 80).unwrap()).unwrap();
    let sys = DriveSystem::from_builder(&b, 0.0, 5).unwrap();
    let carrier = sys.f01() * f01;
    let shape = PulseShape::new(duration, 2.0, amp_mrad * 1e6, carrier, phase).unwrap();
    let u = propagate(&sys, &shape, 40).unwrap();
    ensure(u.unitarity_defect() < 1e-10, || format!("unitarity defect {:e}", u.unitarity_defect()))
}

/// Table products match matrix products and every sequence inverts to identity.
pub fn clifford_closure(a: usize, b: usize, m: usize, seed: u64) -> Result<(), TestCaseError> {
    let t = clifford_table();
    let (ea, eb) = (&t.elements[a], &t.elements[b]);
    let prod = eb.su2_matrix * ea.su2_matrix;
    ensure(same_up_to_phase(&prod, &t.elements[t.product[a][b]].su2_matrix, 1e-12), || format!("product {a}*{b}"))?;
    let seq = random_sequence(m, seed).unwrap();
    let total = seq.all_indices().fold(Matrix2::<C64>::identity(), |acc, c| t.elements[c].su2_matrix * acc);
    ensure(same_up_to_phase(&total, &Matrix2::identity(), 1e-10), || format!("sequence m={m} seed={seed} does not invert"))
}

/// Identical seeds give identical sequences and benchmarking traces.
pub fn seed_reproducibility(m: usize, seed: u64) -> Result<(), TestCaseError> {
    ensure(random_sequence(m, seed).unwrap() == random_sequence(m, seed).unwrap(), || "sequence differs".into())?;
    ensure(random_sequence(m, seed).unwrap() != random_sequence(m, seed.wrapping_add(1)).unwrap() || m < 3, || "seeds collide".into())?;
    let gates = GateSet::ideal(40.0);
    let opts = RbOptions { m_values: vec![1, m, 2 * m], n_seeds: 3, seed, ..Default::default() };
    let incoherent = RbOptions { incoherent: Some(iflux::rb::IncoherentModel { t2_star: 20e-6 }), ..opts.clone() };
    let (a, b) = (simulate_rb(&gates, &incoherent).unwrap(), simulate_rb(&gates, &incoherent).unwrap());
    ensure(a.survival == b.survival && a.fit == b.fit, || "benchmarking trace differs between runs".into())
}

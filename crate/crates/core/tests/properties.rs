//! Property suites. Each can be run alone, e.g. `cargo test --test properties closure`.

mod common;

use std::f64::consts::PI;

use iflux::fluxon::FluxonParams;
use iflux::rb::fit_decay;
use iflux::spectro::{fit, synthetic_dataset, FitOptions, Model, ModelParams};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig { cases: 32, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn flux_periodicity_and_reflection(p in common::fluxonium_params(), x in -0.5..0.5f64) {
        common::flux_symmetry(p, x)?;
    }

    #[test]
    fn commutator_identity(p in common::fluxonium_params(), x in -0.5..0.5f64) {
        common::commutator_identity(p, x)?;
    }

    #[test]
    fn clifford_closure(a in 0..24usize, b in 0..24usize, m in 1..500usize, seed in any::<u64>()) {
        common::clifford_closure(a, b, m, seed)?;
    }

    #[test]
    fn decay_fit_is_spam_invariant(p in 0.95..0.9999f64, a in 0.2..0.5f64, b in 0.3..0.5f64, scale in 0.5..1.0f64) {
        let m: Vec<usize> = vec![1, 5, 20, 50, 100, 200, 500];
        let y: Vec<f64> = m.iter().map(|&k| a + b * p.powi(k as i32)).collect();
        let ys: Vec<f64> = y.iter().map(|v| scale * v).collect();
        let (f, fs) = (fit_decay(&m, &y).unwrap(), fit_decay(&m, &ys).unwrap());
        prop_assert!((f.p - p).abs() < 1e-6, "p {} vs {}", f.p, p);
        prop_assert!((fs.p - f.p).abs() < 1e-6, "scaled p {} vs {}", fs.p, f.p);
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 8, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn basis_convergence(p in common::fluxonium_params(), x in -0.5..0.5f64) {
        common::basis_convergence(p, x)?;
    }

    #[test]
    fn propagator_unitarity(f in 0.95..1.05f64, amp in 1.0..60.0f64, t in 8.0..30.0f64, phase in -PI..PI) {
        common::propagator_unitarity(f, amp, t, phase)?;
    }

    #[test]
    fn seed_reproducibility(m in 3..40usize, seed in any::<u64>()) {
        common::seed_reproducibility(m, seed)?;
    }

    #[test]
    fn fit_is_invariant_under_weight_scaling(scale in 1e-3..1e3f64, perturb in 0.85..1.15f64) {
        let truth = ModelParams::Fluxon(FluxonParams { e_l_sigma: 0.128, eps1: 0.362, eps2: 0.081 });
        let opts = FitOptions { starts: 2, ..Default::default() };
        let grid: Vec<f64> = (0..=10).map(|k| -0.5 + 0.1 * k as f64).collect();
        let mut data = synthetic_dataset(&truth, &grid, &[(0, 1), (0, 2)], &opts).unwrap();
        for (k, p) in data.iter_mut().enumerate() {
            p.weight = 1.0 + (k % 3) as f64;
            p.frequency *= 1.0 + 1e-3 * ((k * 7 % 5) as f64 - 2.0);
        }
        let init = ModelParams::Fluxon(FluxonParams { e_l_sigma: 0.128 * perturb, eps1: 0.362, eps2: 0.081 / perturb });
        let scaled: Vec<_> = data.iter().map(|p| iflux::spectro::SpectroscopyPoint { weight: p.weight * scale, ..*p }).collect();
        let (a, b) = (fit(Model::Fluxon, &data, &init, &opts).unwrap(), fit(Model::Fluxon, &scaled, &init, &opts).unwrap());
        let (ModelParams::Fluxon(pa), ModelParams::Fluxon(pb)) = (a.params, b.params) else { unreachable!() };
        for (x, y) in [(pa.e_l_sigma, pb.e_l_sigma), (pa.eps1, pb.eps1), (pa.eps2, pb.eps2)] {
            prop_assert!((x - y).abs() <= 1e-9 * x.abs().max(1.0), "{x} vs {y}");
        }
    }
}

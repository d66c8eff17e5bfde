use proptest::prelude::*;

use qthermo::integrator::uniform_times;
use qthermo::linalg;
use qthermo::state::{self, Subsystem};
use qthermo::{dynamics, random, DynamicsKind, DynamicsSpec, IntegratorConfig, Observable, QuantumState, SystemModel};

fn model_for(seed: u64, d: usize) -> SystemModel {
    let h = random::hermitian(d, &mut random::rng(seed, 1));
    SystemModel::simple(Observable::new(h).unwrap()).unwrap()
}

fn state_for(seed: u64, d: usize, rank: usize) -> QuantumState {
    let mut rng = random::rng(seed, 2);
    if rank >= d {
        random::full_rank_state(d, &mut rng)
    } else {
        random::ranked_state(d, rank, &mut rng)
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn sea_dissipator_respects_constraints(seed in 0u64..10_000, d in 2usize..6, rank in 1usize..6) {
        let model = model_for(seed, d);
        let rho = state_for(seed, d, rank);
        let dm = dynamics::sea_dissipator_single(&model, &rho, 1.0).unwrap();
        let scale = linalg::frobenius(&dm).max(1.0);
        prop_assert!(linalg::trace(&dm).norm() <= 1e-11 * scale);
        let h = model.hamiltonian().matrix();
        prop_assert!(linalg::trace_product(&dm, h).norm() <= 1e-11 * scale * linalg::herm_op_norm(h));
        prop_assert!(linalg::hermiticity_deviation(&dm) <= 1e-12 * scale);
    }

    #[test]
    fn entropy_production_is_nonnegative(seed in 0u64..10_000, d in 2usize..6, rank in 1usize..6) {
        let model = model_for(seed, d);
        let rho = state_for(seed, d, rank);
        let spec = DynamicsSpec::new(DynamicsKind::SeaSingle);
        let m = dynamics::motion(&model, &spec, &rho).unwrap();
        prop_assert!(m.diagnostics.entropy_production >= -1e-12);
    }

    #[test]
    fn dissipator_annihilates_pure_states(seed in 0u64..10_000, d in 2usize..6) {
        let model = model_for(seed, d);
        let psi = random::pure_state(d, &mut random::rng(seed, 3));
        let dm = dynamics::sea_dissipator_single(&model, &psi, 1.0).unwrap();
        prop_assert!(linalg::frobenius(&dm) <= 1e-12);
    }

    #[test]
    fn gibbs_state_is_stationary(seed in 0u64..10_000, d in 2usize..6, frac in 0.1f64..0.9) {
        let model = model_for(seed, d);
        let ev = linalg::herm_eigenvalues(model.hamiltonian().matrix());
        let e = ev[0] + frac * (ev.iter().sum::<f64>() / d as f64 - ev[0]);
        let sol = qthermo::solve_gibbs(&model, e, &[]).unwrap();
        let rho = sol.state();
        prop_assert!((state::expectation(rho, model.hamiltonian()).unwrap() - e).abs() <= 1e-9);
        let dm = dynamics::sea_dissipator_single(&model, rho, 1.0).unwrap();
        prop_assert!(linalg::frobenius(&dm) <= 1e-9);
    }

    #[test]
    fn propagation_stays_in_domain(seed in 0u64..10_000, d in 2usize..5, rank in 1usize..5) {
        let model = model_for(seed, d);
        let rho = state_for(seed, d, rank);
        let spec = DynamicsSpec::new(DynamicsKind::SeaSingle);
        let cfg = IntegratorConfig::default().with_times(uniform_times(0.0, 3.0, 6));
        let traj = qthermo::propagate(&model, &spec, &rho, &cfg).unwrap();
        let e0 = traj.records[0].e;
        let mut s_prev = f64::NEG_INFINITY;
        for r in &traj.records {
            prop_assert!((r.trace - 1.0).abs() <= 1e-9);
            prop_assert!((r.e - e0).abs() <= 1e-8);
            prop_assert!(r.lambda_min >= -1e-10);
            prop_assert!(r.entropy >= s_prev - 1e-10);
            s_prev = r.entropy;
        }
        // Kernel populations stay at integration-error level.
        let occupied = |q: &QuantumState| q.eigenvalues().iter().filter(|&&v| v > 1e-9).count();
        prop_assert_eq!(occupied(traj.last().unwrap()), occupied(&rho));
    }

    #[test]
    fn partial_trace_of_product_recovers_factors(seed in 0u64..10_000, da in 2usize..4, db in 2usize..4) {
        let mut rng = random::rng(seed, 4);
        let a = random::full_rank_state(da, &mut rng);
        let b = random::full_rank_state(db, &mut rng);
        let ha = Observable::new(random::hermitian(da, &mut rng)).unwrap();
        let hb = Observable::new(random::hermitian(db, &mut rng)).unwrap();
        let model = SystemModel::noninteracting(ha, hb).unwrap();
        let ab = a.tensor(&b);
        let ra = state::partial_trace(&ab, &model, Subsystem::A).unwrap();
        let rb = state::partial_trace(&ab, &model, Subsystem::B).unwrap();
        prop_assert!(ra.trace_distance(&a) <= 1e-13);
        prop_assert!(rb.trace_distance(&b) <= 1e-13);
        prop_assert!(state::mutual_information(&ab, &model).unwrap().abs() <= 1e-12);
    }

    #[test]
    fn composite_dissipator_conserves_local_energies(seed in 0u64..10_000, db in 2usize..4) {
        let mut rng = random::rng(seed, 5);
        let ha = Observable::new(random::hermitian(2, &mut rng)).unwrap();
        let hb = Observable::new(random::hermitian(db, &mut rng)).unwrap();
        let model = SystemModel::noninteracting(ha, hb).unwrap();
        let rho = random::full_rank_state(2 * db, &mut rng);
        let dm = dynamics::sea_dissipator_composite(&model, &rho, &[1.0, 2.0]).unwrap();
        let scale = linalg::frobenius(&dm).max(1.0);
        prop_assert!(linalg::trace(&dm).norm() <= 1e-11 * scale);
        for j in [Subsystem::A, Subsystem::B] {
            let part = model.embedded_part(j).unwrap();
            prop_assert!(linalg::trace_product(&dm, &part).norm() <= 1e-11 * scale * linalg::herm_op_norm(&part));
        }
    }

    #[test]
    fn entropy_is_unitarily_invariant(seed in 0u64..10_000, d in 2usize..6) {
        let mut rng = random::rng(seed, 6);
        let rho = random::full_rank_state(d, &mut rng);
        let u = random::unitary(d, &mut rng);
        let rotated = QuantumState::new(&u * rho.matrix() * u.adjoint()).unwrap();
        let s = state::entropy(&rho, 1.0);
        prop_assert!((s - state::entropy(&rotated, 1.0)).abs() <= 1e-12);
        prop_assert!(s <= (d as f64).ln() + 1e-12);
        let mixed = QuantumState::maximally_mixed(d);
        prop_assert!((state::entropy(&mixed, 1.0) - (d as f64).ln()).abs() <= 1e-12);
    }
}

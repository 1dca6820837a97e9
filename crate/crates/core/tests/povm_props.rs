//! Randomized partition-of-unity and Born-update invariants.

use friendsim::povm::{born_update, build_kosher_process, outcome_probabilities};
use friendsim::qstate::{random, DensityMatrix, Operator, ENTRY_TOL};
use friendsim::stopping::StoppingTimeSequence;
use friendsim::{trial_rng, SimRng};
use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};

/// Random orthogonal projector partition: Haar unitary columns grouped into
/// random blocks.
fn random_partition(dim: usize, rng: &mut SimRng) -> Vec<Operator> {
    let u = random::haar_unitary(dim, rng);
    let mut cut_points: Vec<usize> = vec![0, dim];
    for _ in 0..rng.gen_range(0..dim.min(3)) {
        cut_points.push(rng.gen_range(1..dim));
    }
    cut_points.sort_unstable();
    cut_points.dedup();
    cut_points
        .windows(2)
        .map(|w| {
            let mut p = DMatrix::from_element(dim, dim, Complex64::new(0.0, 0.0));
            for col in w[0]..w[1] {
                let v = u.column(col);
                p += v * v.adjoint();
            }
            Operator::new(vec![dim], p).unwrap()
        })
        .collect()
}

fn schedule(len: usize) -> StoppingTimeSequence {
    let taus: Vec<f64> = (0..len).map(|i| i as f64 + 1.0).collect();
    StoppingTimeSequence::new(taus, len as f64 + 1.0).unwrap()
}

#[test]
fn random_partitions_validate_with_tight_residuals() {
    for trial in 0..200 {
        let mut rng = trial_rng(0xBEEF, trial);
        let dim = rng.gen_range(2..=8);
        let parts = random_partition(dim, &mut rng);
        let n = parts.len();
        let mp = build_kosher_process(parts, schedule(n))
            .unwrap_or_else(|e| panic!("trial {trial} rejected: {e}"));

        let mut sum = DMatrix::from_element(dim, dim, Complex64::new(0.0, 0.0));
        for p in mp.projectors() {
            sum += p.matrix();
        }
        let residual = friendsim::qstate::entrywise_distance(&sum, &DMatrix::identity(dim, dim));
        assert!(residual < ENTRY_TOL, "partition residual {residual:e}");
    }
}

#[test]
fn born_update_conserves_trace_and_probabilities_sum_to_one() {
    for trial in 0..100 {
        let mut rng = trial_rng(0xCAFE, trial);
        let dim = rng.gen_range(2..=6);
        let parts = random_partition(dim, &mut rng);
        let n = parts.len();
        let mp = build_kosher_process(parts, schedule(n)).unwrap();

        let psi = random::haar_ket(&[dim], &mut rng).unwrap();
        let rho = psi.density().unwrap();
        let probs = outcome_probabilities(&rho, &mp).unwrap();
        let total: f64 = probs.iter().sum();
        assert!((total - 1.0).abs() < ENTRY_TOL, "probability sum {total}");

        for (p, &weight) in mp.projectors().iter().zip(&probs) {
            if weight < 1e-12 {
                continue;
            }
            let rec = born_update(&rho, p).unwrap();
            assert!((rec.post_state.trace().re - 1.0).abs() < ENTRY_TOL);
            assert!((rec.probability - weight).abs() < ENTRY_TOL);
        }
    }
}

#[test]
fn mixed_state_updates_also_conserve_trace() {
    let mut rng = SimRng::seed_from_u64(77);
    let rho = DensityMatrix::maximally_mixed(vec![2, 2]).unwrap();
    for _ in 0..50 {
        let parts = random_partition(4, &mut rng);
        for p in &parts {
            let rec = match born_update(&rho, p) {
                Ok(rec) => rec,
                Err(_) => continue,
            };
            assert!((rec.post_state.trace().re - 1.0).abs() < ENTRY_TOL);
        }
    }
}

//! Projection-valued measurement processes driven by stopping times.
//!
//! A process is an ordered family of orthogonal projectors summing to the
//! identity (a partition of unity), with one stopping time per projector.
//! Construction validates the partition; after that the process is immutable,
//! and sampling takes an explicit seed, so concurrent use is race-free.

use crate::qstate::textmat::{self, TextMatError};
use crate::qstate::{DensityMatrix, Operator, QStateError, ANNIHILATION_TOL, ENTRY_TOL};
use crate::stopping::{StoppingError, StoppingTimeSequence};
use crate::SimRng;
use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use thiserror::Error;

/// Idempotence / orthogonality tolerance for projector validation.
pub const PROJECTOR_TOL: f64 = 1e-10;

#[derive(Debug, Error)]
pub enum PovmError {
    #[error("projector list is empty")]
    EmptyProjectors,
    #[error("projector {index} has dims {found:?}, expected {expected:?}")]
    MixedDims {
        index: usize,
        expected: Vec<usize>,
        found: Vec<usize>,
    },
    #[error("{projectors} projectors but {taus} stopping times")]
    ScheduleLength { projectors: usize, taus: usize },
    #[error("not idempotent: projector {index} has residual {residual:e}")]
    NotIdempotent { index: usize, residual: f64 },
    #[error("not orthogonal: projectors {i} and {j} have residual {residual:e}")]
    NotOrthogonal { i: usize, j: usize, residual: f64 },
    #[error("not a partition of unity: sum differs from identity by {residual:e}")]
    NotPartition { residual: f64 },
    #[error("time {t} is not inside the process window [0, {horizon})")]
    TimeOutsideWindow { t: f64, horizon: f64 },
    #[error("outcome impossible: weight {0:e} is below the annihilation threshold")]
    OutcomeImpossible(f64),
    #[error("state dims {state:?} do not match projector dims {projectors:?}")]
    StateDims {
        state: Vec<usize>,
        projectors: Vec<usize>,
    },
    #[error(transparent)]
    State(#[from] QStateError),
    #[error(transparent)]
    Schedule(#[from] StoppingError),
    #[error("manifest line {line}: {msg}")]
    Manifest { line: usize, msg: String },
    #[error("projector file '{path}': {source}")]
    ProjectorFile {
        path: String,
        #[source]
        source: TextMatError,
    },
    #[error("reading '{path}': {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// A validated partition of unity scheduled on a stopping-time sequence.
#[derive(Debug, Clone)]
pub struct MeasurementProcess {
    projectors: Vec<Operator>,
    taus: StoppingTimeSequence,
}

/// One conditioned measurement outcome.
#[derive(Debug, Clone)]
pub struct MeasurementRecord {
    pub outcome_index: usize,
    pub probability: f64,
    pub post_state: DensityMatrix,
    /// Stopping time the outcome is attached to (0 for a bare operator
    /// update with no schedule).
    pub at_tau: f64,
}

/// Validates a projector family as a partition of unity and attaches it to
/// its stopping times.
pub fn build_kosher_process(
    projectors: Vec<Operator>,
    taus: StoppingTimeSequence,
) -> Result<MeasurementProcess, PovmError> {
    let Some(first) = projectors.first() else {
        return Err(PovmError::EmptyProjectors);
    };
    let dims = first.dims().to_vec();
    for (index, p) in projectors.iter().enumerate() {
        if p.dims() != dims {
            return Err(PovmError::MixedDims {
                index,
                expected: dims,
                found: p.dims().to_vec(),
            });
        }
    }
    if projectors.len() != taus.len() {
        return Err(PovmError::ScheduleLength {
            projectors: projectors.len(),
            taus: taus.len(),
        });
    }

    for (index, p) in projectors.iter().enumerate() {
        let m = p.matrix();
        let herm = p.hermitian_residual();
        let idem = crate::qstate::entrywise_distance(&(m * m), m);
        let residual = herm.max(idem);
        if residual > PROJECTOR_TOL {
            return Err(PovmError::NotIdempotent { index, residual });
        }
    }
    for i in 0..projectors.len() {
        for j in (i + 1)..projectors.len() {
            let prod = projectors[i].matrix() * projectors[j].matrix();
            let residual = prod.iter().map(|z| z.norm()).fold(0.0, f64::max);
            if residual > PROJECTOR_TOL {
                return Err(PovmError::NotOrthogonal { i, j, residual });
            }
        }
    }
    let dim = first.dim();
    let mut sum = DMatrix::from_element(dim, dim, Complex64::new(0.0, 0.0));
    for p in &projectors {
        sum += p.matrix();
    }
    let residual = crate::qstate::entrywise_distance(&sum, &DMatrix::identity(dim, dim));
    if residual > ENTRY_TOL {
        return Err(PovmError::NotPartition { residual });
    }

    Ok(MeasurementProcess { projectors, taus })
}

impl MeasurementProcess {
    pub fn projectors(&self) -> &[Operator] {
        &self.projectors
    }

    pub fn taus(&self) -> &StoppingTimeSequence {
        &self.taus
    }

    pub fn dims(&self) -> &[usize] {
        self.projectors[0].dims()
    }

    pub fn len(&self) -> usize {
        self.projectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.projectors.is_empty()
    }

    /// The running average of the projectors fired so far: zero before the
    /// first event, otherwise the sum of fired projectors divided by the
    /// event count supplied by `counting`. Not itself a projector; the
    /// per-window projector is exposed by [`MeasurementProcess::window_value`].
    pub fn process_value_with<F>(&self, t: f64, counting: F) -> Result<Operator, PovmError>
    where
        F: Fn(f64) -> usize,
    {
        let horizon = self.taus.horizon();
        if !(0.0..horizon).contains(&t) {
            return Err(PovmError::TimeOutsideWindow { t, horizon });
        }
        let fired = counting(t).min(self.projectors.len());
        if fired == 0 {
            return Ok(Operator::zeros(self.dims().to_vec())?);
        }
        let dim = self.projectors[0].dim();
        let mut sum = DMatrix::from_element(dim, dim, Complex64::new(0.0, 0.0));
        for p in self.projectors.iter().take(fired) {
            sum += p.matrix();
        }
        sum *= Complex64::new(1.0 / fired as f64, 0.0);
        Ok(Operator::new(self.dims().to_vec(), sum)?)
    }

    /// [`MeasurementProcess::process_value_with`] using the process's own
    /// counting process.
    pub fn process_value(&self, t: f64) -> Result<Operator, PovmError> {
        self.process_value_with(t, |s| self.taus.count_at(s))
    }

    /// The window accessor: the running average on `[tau_i, tau_{i+1})` and
    /// the zero operator outside that window.
    pub fn window_value(&self, i: usize, t: f64) -> Result<Operator, PovmError> {
        let horizon = self.taus.horizon();
        if !(0.0..horizon).contains(&t) {
            return Err(PovmError::TimeOutsideWindow { t, horizon });
        }
        let taus = self.taus.taus();
        let in_window = i < taus.len()
            && t >= taus[i]
            && match taus.get(i + 1) {
                Some(&next) => t < next,
                None => true,
            };
        if in_window {
            self.process_value(t)
        } else {
            Ok(Operator::zeros(self.dims().to_vec())?)
        }
    }
}

/// Conditions `rho` on the outcome represented by `m`: the outcome weight is
/// `Tr(M^dagger rho M)` and the post state is `M^dagger rho M` renormalized.
pub fn born_update(rho: &DensityMatrix, m: &Operator) -> Result<MeasurementRecord, PovmError> {
    if m.dims() != rho.dims() {
        return Err(PovmError::StateDims {
            state: rho.dims().to_vec(),
            projectors: m.dims().to_vec(),
        });
    }
    let conditioned = m.matrix().adjoint() * rho.matrix() * m.matrix();
    let weight = conditioned.trace().re;
    if weight <= ANNIHILATION_TOL {
        return Err(PovmError::OutcomeImpossible(weight));
    }
    let post = conditioned * Complex64::new(1.0 / weight, 0.0);
    Ok(MeasurementRecord {
        outcome_index: 0,
        probability: weight,
        post_state: DensityMatrix::new(rho.dims().to_vec(), post)?,
        at_tau: 0.0,
    })
}

/// Outcome probabilities `Tr(P_i rho)` across the partition; they sum to one
/// by the partition invariant (tiny negative roundoff is clamped).
pub fn outcome_probabilities(
    rho: &DensityMatrix,
    mp: &MeasurementProcess,
) -> Result<Vec<f64>, PovmError> {
    if mp.dims() != rho.dims() {
        return Err(PovmError::StateDims {
            state: rho.dims().to_vec(),
            projectors: mp.dims().to_vec(),
        });
    }
    Ok(mp
        .projectors()
        .iter()
        .map(|p| {
            crate::qstate::expectation(p, rho)
                .expect("dims checked")
                .re
                .max(0.0)
        })
        .collect())
}

/// Draws one outcome with probability `Tr(P_i rho)` and conditions the state
/// on it. Deterministic for a given seed.
pub fn sample_measurement(
    rho: &DensityMatrix,
    mp: &MeasurementProcess,
    seed: u64,
) -> Result<MeasurementRecord, PovmError> {
    let probs = outcome_probabilities(rho, mp)?;
    let mut rng = SimRng::seed_from_u64(seed);
    let draw: f64 = rng.gen();
    let mut acc = 0.0;
    let mut outcome = probs.len() - 1;
    for (i, &p) in probs.iter().enumerate() {
        acc += p;
        if draw < acc {
            outcome = i;
            break;
        }
    }
    // Skip over any zero-probability tail outcome the draw can never select.
    while probs[outcome] <= ANNIHILATION_TOL {
        outcome = outcome
            .checked_sub(1)
            .expect("partition probabilities sum to one");
    }
    let mut record = born_update(rho, &mp.projectors()[outcome])?;
    record.outcome_index = outcome;
    record.at_tau = mp.taus().taus()[outcome];
    Ok(record)
}

/// Loads a projector family from a manifest: an optional `horizon: T` line,
/// then one `<file> <tau>` line per projector, with paths resolved relative
/// to the manifest's directory. The family is validated as a kosher process.
pub fn load_process_manifest(
    manifest_path: &std::path::Path,
) -> Result<MeasurementProcess, PovmError> {
    let read = |p: &std::path::Path| {
        std::fs::read_to_string(p).map_err(|source| PovmError::Io {
            path: p.display().to_string(),
            source,
        })
    };
    let text = read(manifest_path)?;
    let base = manifest_path
        .parent()
        .unwrap_or_else(|| std::path::Path::new("."));

    let mut horizon: Option<f64> = None;
    let mut projectors = Vec::new();
    let mut taus = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if let Some(rest) = line.strip_prefix("horizon:") {
            horizon = Some(rest.trim().parse().map_err(|_| PovmError::Manifest {
                line: lineno + 1,
                msg: format!("invalid horizon '{}'", rest.trim()),
            })?);
            continue;
        }
        let Some((file, tau_str)) = line.rsplit_once(char::is_whitespace) else {
            return Err(PovmError::Manifest {
                line: lineno + 1,
                msg: format!("expected '<file> <tau>', found '{line}'"),
            });
        };
        let tau: f64 = tau_str.trim().parse().map_err(|_| PovmError::Manifest {
            line: lineno + 1,
            msg: format!("invalid stopping time '{tau_str}'"),
        })?;
        let path = base.join(file.trim());
        let op_text = read(&path)?;
        let op = textmat::load_operator(&op_text).map_err(|source| PovmError::ProjectorFile {
            path: path.display().to_string(),
            source,
        })?;
        projectors.push(op);
        taus.push(tau);
    }
    let horizon =
        horizon.unwrap_or_else(|| taus.iter().cloned().fold(0.0, f64::max).max(1.0) + 1.0);
    let schedule = StoppingTimeSequence::new(taus, horizon)?;
    build_kosher_process(projectors, schedule)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qstate::{expectation, Ket, Operator};
    use approx::assert_abs_diff_eq;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    fn basis_projectors() -> Vec<Operator> {
        (0..2)
            .map(|i| Operator::projector(&Ket::basis(vec![2], &[i]).unwrap()))
            .collect()
    }

    fn basis_process() -> MeasurementProcess {
        let taus = StoppingTimeSequence::new(vec![1.0, 2.0], 10.0).unwrap();
        build_kosher_process(basis_projectors(), taus).unwrap()
    }

    fn plus_ket() -> Ket {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        Ket::new(vec![2], vec![c(s), c(s)]).unwrap()
    }

    #[test]
    fn computational_basis_partition_is_accepted() {
        let mp = basis_process();
        assert_eq!(mp.len(), 2);
    }

    #[test]
    fn repeated_projector_is_not_a_partition() {
        let p_plus = Operator::projector(&plus_ket());
        let taus = StoppingTimeSequence::new(vec![1.0, 2.0], 10.0).unwrap();
        let err = build_kosher_process(vec![p_plus.clone(), p_plus], taus).unwrap_err();
        // The duplicated projector fails orthogonality against itself before
        // the identity-sum check is reached.
        assert!(matches!(
            err,
            PovmError::NotOrthogonal { .. } | PovmError::NotPartition { .. }
        ));
    }

    #[test]
    fn sum_short_of_identity_is_rejected() {
        let p0 = Operator::projector(&Ket::basis(vec![2, 2], &[0, 0]).unwrap());
        let p1 = Operator::projector(&Ket::basis(vec![2, 2], &[0, 1]).unwrap());
        let taus = StoppingTimeSequence::new(vec![1.0, 2.0], 10.0).unwrap();
        assert!(matches!(
            build_kosher_process(vec![p0, p1], taus),
            Err(PovmError::NotPartition { .. })
        ));
    }

    #[test]
    fn coarse_rank2_partition_is_accepted() {
        let dims = vec![2, 2];
        let mut p0 = DMatrix::from_element(4, 4, c(0.0));
        p0[(0, 0)] = c(1.0);
        p0[(1, 1)] = c(1.0);
        let mut p1 = DMatrix::from_element(4, 4, c(0.0));
        p1[(2, 2)] = c(1.0);
        p1[(3, 3)] = c(1.0);
        let taus = StoppingTimeSequence::new(vec![0.5, 1.5], 4.0).unwrap();
        let mp = build_kosher_process(
            vec![
                Operator::new(dims.clone(), p0).unwrap(),
                Operator::new(dims, p1).unwrap(),
            ],
            taus,
        )
        .unwrap();
        assert_eq!(mp.len(), 2);
    }

    #[test]
    fn non_idempotent_operator_is_rejected() {
        let half = Operator::new(vec![2], DMatrix::identity(2, 2) * c(0.5)).unwrap();
        let taus = StoppingTimeSequence::new(vec![1.0, 2.0], 10.0).unwrap();
        assert!(matches!(
            build_kosher_process(vec![half.clone(), half], taus),
            Err(PovmError::NotIdempotent { .. })
        ));
    }

    #[test]
    fn process_value_windows() {
        let mp = basis_process();
        // Before the first event: the zero operator.
        let early = mp.process_value(0.5).unwrap();
        assert!(early.matrix().iter().all(|z| z.norm() == 0.0));
        // One event fired: the first projector itself.
        let mid = mp.process_value(1.5).unwrap();
        assert!(
            crate::qstate::entrywise_distance(mid.matrix(), mp.projectors()[0].matrix())
                < ENTRY_TOL
        );
        // Both fired: the average of the two, expanded by hand.
        let late = mp.process_value(2.5).unwrap();
        let hand = (mp.projectors()[0].matrix() + mp.projectors()[1].matrix()) * c(0.5);
        assert!(crate::qstate::entrywise_distance(late.matrix(), &hand) < ENTRY_TOL);
        // Beyond the horizon: error.
        assert!(matches!(
            mp.process_value(10.0),
            Err(PovmError::TimeOutsideWindow { .. })
        ));
    }

    #[test]
    fn window_value_masks_other_windows() {
        let mp = basis_process();
        let w0 = mp.window_value(0, 1.5).unwrap();
        assert!(
            crate::qstate::entrywise_distance(w0.matrix(), mp.projectors()[0].matrix()) < ENTRY_TOL
        );
        let w1_at_early_t = mp.window_value(1, 1.5).unwrap();
        assert!(w1_at_early_t.matrix().iter().all(|z| z.norm() == 0.0));
    }

    #[test]
    fn born_update_on_projective_outcome() {
        let rho = plus_ket().density().unwrap();
        let p0 = &basis_projectors()[0];
        let rec = born_update(&rho, p0).unwrap();
        assert_abs_diff_eq!(rec.probability, 0.5, epsilon = ENTRY_TOL);
        let expected = Ket::basis(vec![2], &[0]).unwrap().density().unwrap();
        assert!(
            crate::qstate::entrywise_distance(rec.post_state.matrix(), expected.matrix())
                < ENTRY_TOL
        );
    }

    #[test]
    fn born_update_with_identity_is_neutral() {
        let rho = plus_ket().density().unwrap();
        let eye = Operator::identity(vec![2]).unwrap();
        let rec = born_update(&rho, &eye).unwrap();
        assert_abs_diff_eq!(rec.probability, 1.0, epsilon = ENTRY_TOL);
        assert!(
            crate::qstate::entrywise_distance(rec.post_state.matrix(), rho.matrix()) < ENTRY_TOL
        );
    }

    #[test]
    fn born_update_rejects_orthogonal_conditioning() {
        let rho = Ket::basis(vec![2], &[1]).unwrap().density().unwrap();
        let p0 = &basis_projectors()[0];
        assert!(matches!(
            born_update(&rho, p0),
            Err(PovmError::OutcomeImpossible(_))
        ));
    }

    #[test]
    fn born_probability_matches_expectation_for_projectors() {
        let rho = plus_ket().density().unwrap();
        for p in &basis_projectors() {
            let rec = born_update(&rho, p).unwrap();
            let e = expectation(p, &rho).unwrap().re;
            assert_abs_diff_eq!(rec.probability, e, epsilon = ENTRY_TOL);
        }
    }

    #[test]
    fn eigenstate_always_yields_its_outcome() {
        let rho = Ket::basis(vec![2], &[0]).unwrap().density().unwrap();
        let mp = basis_process();
        for seed in 0..100 {
            let rec = sample_measurement(&rho, &mp, seed).unwrap();
            assert_eq!(rec.outcome_index, 0);
            assert_abs_diff_eq!(rec.probability, 1.0, epsilon = ENTRY_TOL);
            assert_eq!(rec.at_tau, 1.0);
        }
    }

    #[test]
    fn sampling_frequencies_match_binomial_oracle() {
        // Uniform qubit: both outcomes at 1/2. With 1e5 samples the observed
        // frequency must sit within 3 sigma = 3 * sqrt(0.25 / 1e5).
        let rho = DensityMatrix::maximally_mixed(vec![2]).unwrap();
        let mp = basis_process();
        let n: u64 = 100_000;
        let ones: u64 = crate::exec::indexed_map(n as usize, |i| {
            sample_measurement(&rho, &mp, i as u64)
                .unwrap()
                .outcome_index as u64
        })
        .into_iter()
        .sum();
        let freq = ones as f64 / n as f64;
        let three_sigma = 3.0 * (0.25f64 / n as f64).sqrt();
        assert!(
            (freq - 0.5).abs() < three_sigma,
            "frequency {freq} deviates beyond {three_sigma}"
        );
    }

    #[test]
    fn repeated_measurement_repeats_the_outcome() {
        let rho = plus_ket().density().unwrap();
        let mp = basis_process();
        for seed in 0..1000 {
            let first = sample_measurement(&rho, &mp, seed).unwrap();
            let again = sample_measurement(&first.post_state, &mp, seed ^ 0xDEAD_BEEF).unwrap();
            assert_eq!(first.outcome_index, again.outcome_index);
            assert_abs_diff_eq!(again.probability, 1.0, epsilon = ENTRY_TOL);
        }
    }

    #[test]
    fn manifest_roundtrip() {
        let dir = std::env::temp_dir().join(format!("povm_manifest_{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        for (i, p) in basis_projectors().iter().enumerate() {
            std::fs::write(dir.join(format!("p{i}.mat")), textmat::write_operator(p)).unwrap();
        }
        std::fs::write(
            dir.join("family.manifest"),
            "# basis family\nhorizon: 10\np0.mat 1.0\np1.mat 2.0\n",
        )
        .unwrap();
        let mp = load_process_manifest(&dir.join("family.manifest")).unwrap();
        assert_eq!(mp.len(), 2);
        assert_eq!(mp.taus().taus(), &[1.0, 2.0]);
        assert_eq!(mp.taus().horizon(), 10.0);
        std::fs::remove_dir_all(&dir).unwrap();
    }
}

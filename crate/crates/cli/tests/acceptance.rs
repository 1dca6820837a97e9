//! Acceptance suite: one test per shipped guarantee, each printing a
//! PASS/FAIL line (run with `--nocapture` to see them on success).
//!
//! Every tolerance is pinned in code next to the check it guards.

use friendsim::friends::{
    bell_projection_coeffs, bub_purity_check, conditional_posterior, prob_spin_down,
    sample_spin_down, ProtocolParams,
};
use friendsim::monogamy::{ckw_check, monogamy_scan, MeasureId, ScanConstruction};
use friendsim::povm::{
    born_update, build_kosher_process, outcome_probabilities, sample_measurement,
};
use friendsim::qstate::{random, DensityMatrix, Ket, Operator};
use friendsim::stopping::{
    baxter_chacon_experiment, device_sync_experiment, BaxterChaconConfig, DeviceSyncConfig,
    StoppingTimeSequence, SyncGap,
};
use friendsim::trial_rng;
use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use std::time::{Duration, Instant};

fn conclude(id: u32, name: &str, failures: Vec<String>) {
    if failures.is_empty() {
        println!("criterion {id:02} ({name}): PASS");
    } else {
        println!("criterion {id:02} ({name}): FAIL");
        for f in &failures {
            println!("  - {f}");
        }
        panic!(
            "criterion {id:02} ({name}) failed:\n{}",
            failures.join("\n")
        );
    }
}

fn check(failures: &mut Vec<String>, ok: bool, msg: impl FnOnce() -> String) {
    if !ok {
        failures.push(msg());
    }
}

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

/// Runs the binary in a temp dir and returns (csv, wall time).
fn run_fig1(args: &[&str]) -> (String, Duration) {
    let dir = tempfile::tempdir().unwrap();
    let started = Instant::now();
    let out = std::process::Command::new(env!("CARGO_BIN_EXE_friendsim"))
        .current_dir(dir.path())
        .arg("fig1")
        .args(args)
        .output()
        .expect("binary runs");
    let elapsed = started.elapsed();
    assert!(
        out.status.success(),
        "fig1 {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    let csv = std::fs::read_to_string(dir.path().join("fig1.csv")).unwrap();
    (csv, elapsed)
}

fn fig1_column(csv: &str) -> Vec<Option<f64>> {
    csv.lines()
        .filter(|l| !l.starts_with('#') && !l.is_empty())
        .skip(1)
        .map(|l| {
            let cell = l.split(',').nth(1).unwrap();
            if cell.is_empty() {
                None
            } else {
                Some(cell.parse().unwrap())
            }
        })
        .collect()
}

#[test]
fn criterion_01_fig1_reproduction() {
    let mut failures = Vec::new();

    let (csv, elapsed) = run_fig1(&[]);
    let p = fig1_column(&csv);
    check(&mut failures, p.len() == 401, || {
        format!("expected 401 rows, got {}", p.len())
    });
    // (a) 2pi-periodic: the 401-point grid over [0, 4pi] repeats after 200
    // indices.
    for k in 0..=200 {
        let (a, b) = (p[k].unwrap(), p[k + 200].unwrap());
        check(&mut failures, (a - b).abs() < 1e-12, || {
            format!("periodicity broken at index {k}: {a} vs {b}")
        });
    }
    check(&mut failures, elapsed < Duration::from_secs(1), || {
        format!("default sweep took {elapsed:?}")
    });

    // (b) full overlap: constant 1/3.
    let (csv, elapsed_b) = run_fig1(&["--rho", "1.0"]);
    for (k, v) in fig1_column(&csv).iter().enumerate() {
        let v = v.unwrap();
        check(&mut failures, (v - 1.0 / 3.0).abs() < 1e-12, || {
            format!("rho=1 point {k}: {v} != 1/3")
        });
    }

    // (c) orthogonal setting: constant 1/2.
    let (csv, elapsed_c) = run_fig1(&["--rho", "0.0"]);
    for (k, v) in fig1_column(&csv).iter().enumerate() {
        let v = v.unwrap();
        check(&mut failures, (v - 0.5).abs() < 1e-12, || {
            format!("rho=0 point {k}: {v} != 1/2")
        });
    }
    check(
        &mut failures,
        elapsed_b < Duration::from_secs(1) && elapsed_c < Duration::from_secs(1),
        || format!("limit sweeps took {elapsed_b:?} / {elapsed_c:?}"),
    );

    conclude(1, "fig1 reproduction", failures);
}

#[test]
fn criterion_02_dual_path_equivalence() {
    let mut failures = Vec::new();
    let started = Instant::now();
    let base = ProtocolParams::canonical();
    let mut checked = 0usize;
    for i in 0..21 {
        let rho = -1.0 + 2.0 * i as f64 / 20.0;
        for j in 0..21 {
            let phi = 4.0 * std::f64::consts::PI * j as f64 / 20.0;
            let p = base.with_rho(rho).unwrap().with_phi(phi).unwrap();
            match (prob_spin_down(&p), conditional_posterior(&p)) {
                (Ok(closed), Ok((posterior, _))) => {
                    let pipeline = posterior.amplitude(0).norm_sqr();
                    check(&mut failures, (closed - pipeline).abs() < 1e-12, || {
                        format!("rho={rho} phi={phi}: closed {closed} vs pipeline {pipeline}")
                    });
                    checked += 1;
                }
                (Err(_), Err(_)) => {} // the flagged annihilated points are excluded
                (a, b) => failures.push(format!(
                    "rho={rho} phi={phi}: routes disagree on flagging ({a:?} vs {b:?})"
                )),
            }
        }
    }
    check(&mut failures, checked > 400, || {
        format!("only {checked} grid points were comparable")
    });
    let elapsed = started.elapsed();
    check(&mut failures, elapsed < Duration::from_secs(1), || {
        format!("grid took {elapsed:?}")
    });
    conclude(2, "dual-path equivalence", failures);
}

#[test]
fn criterion_03_monte_carlo_oracle() {
    let mut failures = Vec::new();
    let started = Instant::now();
    let params = ProtocolParams::canonical();
    let expected = prob_spin_down(&params).unwrap();
    check(&mut failures, (expected - 0.41545).abs() < 1e-5, || {
        format!("canonical probability {expected} drifted from 0.41545")
    });
    let n: u64 = 100_000;
    let count = sample_spin_down(&params, n, friendsim::DEFAULT_SEED).unwrap();
    let freq = count as f64 / n as f64;
    let three_sigma = 3.0 * (expected * (1.0 - expected) / n as f64).sqrt();
    check(
        &mut failures,
        (freq - expected).abs() <= three_sigma,
        || format!("frequency {freq} vs {expected} (3 sigma {three_sigma})"),
    );
    let elapsed = started.elapsed();
    check(&mut failures, elapsed < Duration::from_secs(5), || {
        format!("sampling took {elapsed:?}")
    });
    conclude(3, "monte carlo oracle", failures);
}

#[test]
fn criterion_04_purity_bound() {
    let mut failures = Vec::new();
    for i in 0..50 {
        let oh = i as f64 / 49.0;
        for j in 0..50 {
            let ot = j as f64 / 49.0;
            let v = bub_purity_check(c(oh), c(ot)).unwrap();
            check(&mut failures, v <= 1.0 + 1e-12, || {
                format!("({oh}, {ot}): value {v} exceeds 1")
            });
            let saturated = v > 1.0 - 1e-12;
            let unit_moduli = oh == 1.0 && ot == 1.0;
            check(&mut failures, saturated == unit_moduli, || {
                format!("({oh}, {ot}): saturation {saturated} but unit moduli {unit_moduli}")
            });
        }
    }
    conclude(4, "purity bound", failures);
}

fn random_partition(dim: usize, rng: &mut friendsim::SimRng) -> Vec<Operator> {
    let u = random::haar_unitary(dim, rng);
    let mut cuts: Vec<usize> = vec![0, dim];
    for _ in 0..rng.gen_range(0..dim.min(3)) {
        cuts.push(rng.gen_range(1..dim));
    }
    cuts.sort_unstable();
    cuts.dedup();
    cuts.windows(2)
        .map(|w| {
            let mut p = DMatrix::from_element(dim, dim, c(0.0));
            for col in w[0]..w[1] {
                let v = u.column(col);
                p += v * v.adjoint();
            }
            Operator::new(vec![dim], p).unwrap()
        })
        .collect()
}

#[test]
fn criterion_05_partition_and_born_rule() {
    let mut failures = Vec::new();

    // 1e3 random partitions validate with residual below 1e-12.
    for trial in 0..1000u64 {
        let mut rng = trial_rng(0xAC5, trial);
        let dim = rng.gen_range(2..=8);
        let parts = random_partition(dim, &mut rng);
        let n = parts.len();
        let taus: Vec<f64> = (0..n).map(|k| k as f64 + 1.0).collect();
        let schedule = StoppingTimeSequence::new(taus, n as f64 + 1.0).unwrap();
        match build_kosher_process(parts, schedule) {
            Ok(mp) => {
                let mut sum = DMatrix::from_element(dim, dim, c(0.0));
                for p in mp.projectors() {
                    sum += p.matrix();
                }
                let residual =
                    friendsim::qstate::entrywise_distance(&sum, &DMatrix::identity(dim, dim));
                check(&mut failures, residual < 1e-12, || {
                    format!("trial {trial}: partition residual {residual:e}")
                });

                // Born updates conserve trace on a random state.
                let rho = random::haar_ket(&[dim], &mut rng)
                    .unwrap()
                    .density()
                    .unwrap();
                for p in mp.projectors() {
                    let Ok(rec) = born_update(&rho, p) else {
                        continue;
                    };
                    let tr = rec.post_state.trace().re;
                    check(&mut failures, (tr - 1.0).abs() < 1e-12, || {
                        format!("trial {trial}: post-update trace {tr}")
                    });
                }
                let probs = outcome_probabilities(&rho, &mp).unwrap();
                let total: f64 = probs.iter().sum();
                check(&mut failures, (total - 1.0).abs() < 1e-12, || {
                    format!("trial {trial}: outcome probabilities sum to {total}")
                });
            }
            Err(e) => failures.push(format!("trial {trial}: partition rejected: {e}")),
        }
        if failures.len() > 8 {
            break;
        }
    }

    // Repeatability: re-measuring the conditioned state repeats the outcome,
    // over 1e3 seeded trials with zero violations.
    let mut violations = 0u32;
    for trial in 0..1000u64 {
        let mut rng = trial_rng(0x9E9E, trial);
        let dim = rng.gen_range(2..=6);
        let parts = random_partition(dim, &mut rng);
        let n = parts.len();
        let taus: Vec<f64> = (0..n).map(|k| k as f64 + 1.0).collect();
        let schedule = StoppingTimeSequence::new(taus, n as f64 + 1.0).unwrap();
        let mp = build_kosher_process(parts, schedule).unwrap();
        let rho = random::haar_ket(&[dim], &mut rng)
            .unwrap()
            .density()
            .unwrap();
        let first = sample_measurement(&rho, &mp, trial).unwrap();
        let again = sample_measurement(&first.post_state, &mp, trial ^ 0x5A5A).unwrap();
        if first.outcome_index != again.outcome_index || (again.probability - 1.0).abs() > 1e-10 {
            violations += 1;
        }
    }
    check(&mut failures, violations == 0, || {
        format!("{violations} repeatability violations")
    });

    conclude(5, "partition and born rule", failures);
}

#[test]
fn criterion_06_convergence_trend() {
    let mut failures = Vec::new();
    let started = Instant::now();
    let config = BaxterChaconConfig::default();
    assert_eq!(config.n_list, vec![4, 16, 64], "shipped defaults changed");
    assert_eq!(config.n_trials, 10_000, "shipped defaults changed");
    let report = baxter_chacon_experiment(&config).unwrap();
    for k in 0..report.n_values.len() - 1 {
        let slack = report.ci_halfwidth[k] + report.ci_halfwidth[k + 1];
        let (a, b) = (report.exceedance_probs[k], report.exceedance_probs[k + 1]);
        check(&mut failures, b <= a + slack, || {
            format!(
                "exceedance rose from n={} ({a}) to n={} ({b}) beyond CI slack {slack}",
                report.n_values[k],
                report.n_values[k + 1]
            )
        });
    }
    let last = *report.exceedance_probs.last().unwrap();
    check(&mut failures, last < 0.05, || {
        format!("n=64 exceedance {last} is not below 0.05")
    });
    let elapsed = started.elapsed();
    check(&mut failures, elapsed < Duration::from_secs(30), || {
        format!("experiment took {elapsed:?}")
    });
    conclude(6, "stopping-pair convergence trend", failures);
}

#[test]
fn criterion_07_device_synchronization() {
    let mut failures = Vec::new();
    let started = Instant::now();
    let config = DeviceSyncConfig::default();
    assert_eq!(
        config.gaps,
        vec![
            SyncGap::Exact,
            SyncGap::ReciprocalN(4),
            SyncGap::ReciprocalN(64)
        ],
        "shipped defaults changed"
    );
    let report = device_sync_experiment(&config).unwrap();
    let exact = &report.rows[0];
    let quarter = &report.rows[1];
    let fine = &report.rows[2];

    check(&mut failures, exact.disagreement == 0.0, || {
        format!("exact-sync disagreement {}", exact.disagreement)
    });
    // 95% CI separation between the 1/64 and 1/4 gap masses.
    let upper_fine = fine.disagreement + fine.ci_halfwidth;
    let lower_quarter = quarter.disagreement - quarter.ci_halfwidth;
    check(&mut failures, upper_fine < lower_quarter, || {
        format!(
            "gap 1/64 mass {}+{} not separated below gap 1/4 mass {}-{}",
            fine.disagreement, fine.ci_halfwidth, quarter.disagreement, quarter.ci_halfwidth
        )
    });
    check(&mut failures, fine.disagreement < 0.05, || {
        format!("gap 1/64 mass {} is not below 0.05", fine.disagreement)
    });
    let elapsed = started.elapsed();
    check(&mut failures, elapsed < Duration::from_secs(30), || {
        format!("experiment took {elapsed:?}")
    });
    conclude(7, "device synchronization", failures);
}

#[test]
fn criterion_08_bell_projection() {
    let mut failures = Vec::new();
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let u = Ket::basis(vec![2], &[0]).unwrap();
    let v = Ket::basis(vec![2], &[1]).unwrap();

    let bell = Ket::new(vec![2, 2], vec![c(0.0), c(s), c(s), c(0.0)])
        .unwrap()
        .density()
        .unwrap();
    let (p01, p10) = bell_projection_coeffs(&bell, &u, &v).unwrap();
    check(&mut failures, (p01.norm() - 0.5).abs() < 1e-12, || {
        format!("|p01| = {} != 1/2", p01.norm())
    });
    check(&mut failures, (p10.norm() - 0.5).abs() < 1e-12, || {
        format!("|p10| = {} != 1/2", p10.norm())
    });

    let product = Ket::basis(vec![2, 2], &[0, 0]).unwrap().density().unwrap();
    let (q01, q10) = bell_projection_coeffs(&product, &u, &v).unwrap();
    let mixed = DensityMatrix::maximally_mixed(vec![2, 2]).unwrap();
    let (m01, m10) = bell_projection_coeffs(&mixed, &u, &v).unwrap();
    for (label, z) in [
        ("product p01", q01),
        ("product p10", q10),
        ("mixed p01", m01),
        ("mixed p10", m10),
    ] {
        check(&mut failures, z.norm() < 1e-12, || {
            format!("{label} = {} != 0", z.norm())
        });
    }
    conclude(8, "bell projection", failures);
}

#[test]
fn criterion_09_ckw_regime() {
    let mut failures = Vec::new();

    // 1e3 Haar-random three-qubit pure states, zero violations beyond the
    // 1e-10 slack baked into the check.
    let mut violations = 0u32;
    for trial in 0..1000u64 {
        let mut rng = trial_rng(0xCC9, trial);
        let psi = random::haar_ket(&[2, 2, 2], &mut rng).unwrap();
        let report = ckw_check(&psi, MeasureId::WoottersConcurrence).unwrap();
        if !report.satisfied {
            violations += 1;
        }
    }
    check(&mut failures, violations == 0, || {
        format!("{violations} monogamy violations on Haar states")
    });

    // Frozen benchmark values.
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let mut ghz = vec![c(0.0); 8];
    ghz[0] = c(s);
    ghz[7] = c(s);
    let ghz = Ket::new(vec![2, 2, 2], ghz).unwrap();
    let report = ckw_check(&ghz, MeasureId::WoottersConcurrence).unwrap();
    for (label, got, want) in [
        ("ghz c2_pb", report.c2_pb, 0.0),
        ("ghz c2_pl", report.c2_pl, 0.0),
        ("ghz c2_p_bl", report.c2_p_bl, 1.0),
    ] {
        check(&mut failures, (got - want).abs() < 1e-10, || {
            format!("{label} = {got}, want {want}")
        });
    }

    let w = c(1.0 / 3.0f64.sqrt());
    let mut amps = vec![c(0.0); 8];
    amps[1] = w;
    amps[2] = w;
    amps[4] = w;
    let w_state = Ket::new(vec![2, 2, 2], amps).unwrap();
    let report = ckw_check(&w_state, MeasureId::WoottersConcurrence).unwrap();
    for (label, got, want) in [
        ("w c2_pb", report.c2_pb, 4.0 / 9.0),
        ("w c2_pl", report.c2_pl, 4.0 / 9.0),
        ("w c2_p_bl", report.c2_p_bl, 8.0 / 9.0),
    ] {
        check(&mut failures, (got - want).abs() < 1e-10, || {
            format!("{label} = {got}, want {want}")
        });
    }
    check(&mut failures, report.satisfied, || {
        "w state reported as violating".to_string()
    });

    conclude(9, "ckw regime", failures);
}

#[test]
fn criterion_10_saturation_scan() {
    let mut failures = Vec::new();
    let table = monogamy_scan(32, ScanConstruction::DetachedParticle).unwrap();
    check(&mut failures, table.rows.len() == 31, || {
        format!("expected 31 rows, got {}", table.rows.len())
    });
    for row in &table.rows {
        let expected = 2.0 * (1.0 - 1.0 / row.d as f64);
        check(&mut failures, (row.c2_bl - expected).abs() < 1e-12, || {
            format!("d={}: c2_BL {} != {expected}", row.d, row.c2_bl)
        });
        check(&mut failures, row.proxy_pb <= 1e-12, || {
            format!(
                "d={}: particle-room negativity {} != 0",
                row.d, row.proxy_pb
            )
        });
        check(&mut failures, row.c2_p_bl.abs() <= 1e-12, || {
            format!(
                "d={}: detached particle reports c2_p_bl {}",
                row.d, row.c2_p_bl
            )
        });
    }
    conclude(10, "entanglement saturation scan", failures);
}

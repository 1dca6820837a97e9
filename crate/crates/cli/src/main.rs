//! Command-line front end: runs the shipped experiments and emits
//! self-describing CSV artifacts.
//!
//! Every run prints its resolved configuration to standard error and writes
//! exactly one CSV file (metadata as `#` comment lines, then the table).
//! Outputs are byte-identical for identical command lines and seeds.
//!
//! Exit codes: 0 on success, 2 for usage errors (bad flags, bad parameter
//! combinations, malformed config files), 1 for runtime failures (unreadable
//! or invalid input files, annihilated posteriors).

use clap::{Parser, Subcommand, ValueEnum};
use friendsim::friends::{
    conditional_posterior, fig1_sweep, prob_spin_down, ProtocolParams, SWEEP_POINTS,
};
use friendsim::monogamy::{ckw_check, monogamy_scan, MeasureId, ScanConstruction};
use friendsim::povm::{load_process_manifest, outcome_probabilities, sample_measurement};
use friendsim::qstate::textmat::{load_state, StateFile};
use friendsim::stopping::{
    baxter_chacon_experiment, device_sync_experiment, BaxterChaconConfig, DeviceSyncConfig,
};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "friendsim",
    version,
    about = "Conditional two-observer measurement experiments, stopping-time synchronization \
             trials, and entanglement monogamy scans",
    propagate_version = true
)]
struct Cli {
    /// Base seed for randomized commands [default: 62194]
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Output CSV path [default: `<command>.csv`]
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sweep the conditioned spin-down probability over the phase grid
    /// [0, 4pi]
    Fig1 {
        /// Detector overlap in [-1, 1]
        #[arg(long, default_value_t = std::f64::consts::FRAC_1_SQRT_2)]
        rho: f64,
        /// Number of grid points
        #[arg(long, default_value_t = SWEEP_POINTS)]
        phi_points: usize,
        /// Particle spin-down amplitude
        #[arg(long, default_value_t = (1.0f64 / 3.0).sqrt())]
        alpha: f64,
        /// Particle spin-up amplitude
        #[arg(long, default_value_t = (2.0f64 / 3.0).sqrt())]
        beta: f64,
        /// Second-branch spin-down amplitude
        #[arg(long, default_value_t = 0.5f64.sqrt())]
        alpha_t: f64,
        /// Second-branch spin-up amplitude
        #[arg(long, default_value_t = 0.5f64.sqrt())]
        beta_t: f64,
    },
    /// Evaluate the posterior and spin-down probability at one (rho, phi)
    /// point
    Protocol {
        /// Detector overlap in [-1, 1]
        #[arg(long)]
        rho: f64,
        /// Relative detector phase in radians
        #[arg(long)]
        phi: f64,
        /// Particle spin-down amplitude
        #[arg(long, default_value_t = (1.0f64 / 3.0).sqrt())]
        alpha: f64,
        /// Particle spin-up amplitude
        #[arg(long, default_value_t = (2.0f64 / 3.0).sqrt())]
        beta: f64,
        /// Second-branch spin-down amplitude
        #[arg(long, default_value_t = 0.5f64.sqrt())]
        alpha_t: f64,
        /// Second-branch spin-up amplitude
        #[arg(long, default_value_t = 0.5f64.sqrt())]
        beta_t: f64,
    },
    /// Paired stopping-time convergence experiment
    BaxterChacon {
        /// Monte Carlo trials [default: 10000]
        #[arg(long)]
        trials: Option<u64>,
        /// Sequence indices, comma separated [default: 4,16,64]
        #[arg(long, value_delimiter = ',')]
        n_list: Option<Vec<u32>>,
        /// Exceedance threshold [default: 0.5]
        #[arg(long)]
        epsilon: Option<f64>,
        /// key=value config file applied before the flags
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Two-device synchronized transition-tensor experiment
    DeviceSync {
        /// Monte Carlo trials [default: 10000]
        #[arg(long)]
        trials: Option<u64>,
        /// key=value config file applied before the flags
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Room-dimension monogamy scan
    Monogamy {
        /// Largest room dimension (2..=32)
        #[arg(long, default_value_t = 32)]
        dmax: usize,
        /// Scanned state family
        #[arg(long, value_enum, default_value_t = ConstructionArg::Detached)]
        construction: ConstructionArg,
    },
    /// Monogamy audit of a tripartite pure state file
    Ckw {
        /// State file in the plain-text ket format, dims (2, dB, dL)
        #[arg(long)]
        state: PathBuf,
        /// Pairwise entanglement measure
        #[arg(long, value_enum, default_value_t = MeasureArg::Wootters)]
        measure: MeasureArg,
    },
    /// Validate a projector family and sample one measurement of a state
    PovmDemo {
        /// State file (ket or density matrix)
        #[arg(long)]
        state: PathBuf,
        /// Projector manifest: optional 'horizon: T' line, then
        /// `<file> <tau>` lines
        #[arg(long)]
        projectors: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum MeasureArg {
    Purity,
    Wootters,
    Negativity,
}

impl From<MeasureArg> for MeasureId {
    fn from(m: MeasureArg) -> Self {
        match m {
            MeasureArg::Purity => MeasureId::PurityConcurrence,
            MeasureArg::Wootters => MeasureId::WoottersConcurrence,
            MeasureArg::Negativity => MeasureId::Negativity,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ConstructionArg {
    /// Rooms maximally entangled, particle detached
    Detached,
    /// Particle entangled with the first room
    Entangled,
}

impl From<ConstructionArg> for ScanConstruction {
    fn from(c: ConstructionArg) -> Self {
        match c {
            ConstructionArg::Detached => ScanConstruction::DetachedParticle,
            ConstructionArg::Entangled => ScanConstruction::EntangledParticle,
        }
    }
}

enum CliError {
    Usage(String),
    Runtime(String),
}

fn usage<E: std::fmt::Display>(e: E) -> CliError {
    CliError::Usage(e.to_string())
}

fn runtime<E: std::fmt::Display>(e: E) -> CliError {
    CliError::Runtime(e.to_string())
}

fn metadata(command: &str, seed: u64, extra: &[(&str, String)]) -> String {
    let mut block = String::new();
    let _ = writeln!(block, "# tool=friendsim {}", env!("CARGO_PKG_VERSION"));
    let _ = writeln!(block, "# command={command}");
    let _ = writeln!(block, "# seed={seed}");
    for (k, v) in extra {
        let _ = writeln!(block, "# {k}={v}");
    }
    block
}

fn read_file(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path)
        .map_err(|e| runtime(format!("cannot read '{}': {e}", path.display())))
}

fn real_params(
    alpha: f64,
    beta: f64,
    alpha_t: f64,
    beta_t: f64,
    rho: f64,
    phi: f64,
) -> Result<ProtocolParams, CliError> {
    ProtocolParams::from_real(alpha, beta, alpha_t, beta_t, rho, phi).map_err(usage)
}

fn run(cli: Cli) -> Result<(), CliError> {
    let seed = cli.seed.unwrap_or(friendsim::DEFAULT_SEED);
    let (name, csv): (&str, String) = match cli.command {
        Command::Fig1 {
            rho,
            phi_points,
            alpha,
            beta,
            alpha_t,
            beta_t,
        } => {
            let params = real_params(alpha, beta, alpha_t, beta_t, rho, 0.0)?;
            let table = fig1_sweep(&params, phi_points).map_err(usage)?;
            let meta = metadata("fig1", seed, &[]);
            ("fig1", format!("{meta}{}", table.write_csv()))
        }
        Command::Protocol {
            rho,
            phi,
            alpha,
            beta,
            alpha_t,
            beta_t,
        } => {
            let params = real_params(alpha, beta, alpha_t, beta_t, rho, phi)?;
            let (posterior, weight) = conditional_posterior(&params).map_err(runtime)?;
            let p_down = prob_spin_down(&params).map_err(runtime)?;
            let meta = metadata(
                "protocol",
                seed,
                &[
                    ("alpha", alpha.to_string()),
                    ("beta", beta.to_string()),
                    ("alpha_t", alpha_t.to_string()),
                    ("beta_t", beta_t.to_string()),
                ],
            );
            let down = posterior.amplitude(0);
            let up = posterior.amplitude(1);
            let mut body = String::new();
            body.push_str(
                "rho,phi,p_down,norm_a,post_down_re,post_down_im,post_up_re,post_up_im\n",
            );
            let _ = writeln!(
                body,
                "{rho},{phi},{p_down},{weight},{},{},{},{}",
                down.re, down.im, up.re, up.im
            );
            ("protocol", format!("{meta}{body}"))
        }
        Command::BaxterChacon {
            trials,
            n_list,
            epsilon,
            config,
        } => {
            let mut cfg = BaxterChaconConfig::default();
            if let Some(path) = config {
                cfg.apply_kv(&read_file(&path)?).map_err(usage)?;
            }
            if let Some(t) = trials {
                cfg.n_trials = t;
            }
            if let Some(ns) = n_list {
                cfg.n_list = ns;
            }
            if let Some(e) = epsilon {
                cfg.epsilon = e;
            }
            if let Some(s) = cli.seed {
                cfg.seed = s;
            }
            let report = baxter_chacon_experiment(&cfg).map_err(usage)?;
            let meta = metadata(
                "baxter-chacon",
                cfg.seed,
                &[
                    ("horizon", cfg.horizon.to_string()),
                    ("step", cfg.step.to_string()),
                    ("level", cfg.level.to_string()),
                ],
            );
            ("baxter_chacon", format!("{meta}{}", report.write_csv()))
        }
        Command::DeviceSync { trials, config } => {
            let mut cfg = DeviceSyncConfig::default();
            if let Some(path) = config {
                cfg.apply_kv(&read_file(&path)?).map_err(usage)?;
            }
            if let Some(t) = trials {
                cfg.n_trials = t;
            }
            if let Some(s) = cli.seed {
                cfg.seed = s;
            }
            let report = device_sync_experiment(&cfg).map_err(usage)?;
            let meta = metadata(
                "device-sync",
                cfg.seed,
                &[
                    ("horizon", cfg.horizon.to_string()),
                    ("step", cfg.step.to_string()),
                    ("event_width", cfg.event_width.to_string()),
                ],
            );
            ("device_sync", format!("{meta}{}", report.write_csv()))
        }
        Command::Monogamy { dmax, construction } => {
            let table = monogamy_scan(dmax, construction.into()).map_err(usage)?;
            let meta = metadata("monogamy", seed, &[("dmax", dmax.to_string())]);
            ("monogamy", format!("{meta}{}", table.write_csv()))
        }
        Command::Ckw { state, measure } => {
            let text = read_file(&state)?;
            let psi = match load_state(&text).map_err(runtime)? {
                StateFile::Ket(psi) => psi,
                StateFile::Density(_) => {
                    return Err(CliError::Runtime(format!(
                        "'{}' holds a density matrix; ckw needs a pure state (one data row)",
                        state.display()
                    )))
                }
            };
            let report = ckw_check(&psi, MeasureId::from(measure)).map_err(runtime)?;
            let meta = metadata("ckw", seed, &[("state", state.display().to_string())]);
            ("ckw", format!("{meta}{}", report.write_csv()))
        }
        Command::PovmDemo { state, projectors } => {
            let text = read_file(&state)?;
            let rho = match load_state(&text).map_err(runtime)? {
                StateFile::Ket(psi) => psi.density().map_err(runtime)?,
                StateFile::Density(rho) => rho,
            };
            let mp = load_process_manifest(&projectors).map_err(runtime)?;
            let probs = outcome_probabilities(&rho, &mp).map_err(runtime)?;
            let record = sample_measurement(&rho, &mp, seed).map_err(runtime)?;
            let meta = metadata(
                "povm-demo",
                seed,
                &[
                    ("state", state.display().to_string()),
                    ("projectors", projectors.display().to_string()),
                    ("post_state_purity", record.post_state.purity().to_string()),
                ],
            );
            let mut body = String::new();
            body.push_str("outcome,tau,probability,sampled\n");
            for (i, &p) in probs.iter().enumerate() {
                let _ = writeln!(
                    body,
                    "{i},{},{p},{}",
                    mp.taus().taus()[i],
                    (i == record.outcome_index) as u8
                );
            }
            ("povm_demo", format!("{meta}{body}"))
        }
    };

    let out_path = cli
        .out
        .unwrap_or_else(|| PathBuf::from(format!("{name}.csv")));
    // Echo the resolved configuration (the file's comment block) to stderr.
    for line in csv.lines().take_while(|l| l.starts_with('#')) {
        eprintln!("{}", line.trim_start_matches("# "));
    }
    eprintln!("writing {}", out_path.display());
    std::fs::write(&out_path, csv)
        .map_err(|e| runtime(format!("cannot write '{}': {e}", out_path.display())))?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}

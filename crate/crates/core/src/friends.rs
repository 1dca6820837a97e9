//! The two-observer conditional measurement protocol.
//!
//! One observer prepares an instrument state entangled with an incoming
//! two-level particle; the other conditions on their own detector setting,
//! which overlaps the first instrument's basis by `rho` with relative phase
//! `phi`. The module builds the joint prior, the conditioned posterior and
//! its closed-form outcome probability, sweeps that probability over the
//! phase, and extracts the coherence coefficients of two-factor projections.
//!
//! The closed-form probability and the amplitude pipeline are two
//! independent routes to the same number for real non-negative amplitudes;
//! the test suites hold them against each other. For genuinely complex
//! amplitudes the amplitude pipeline is the authoritative route.

use crate::exec;
use crate::qstate::{DensityMatrix, Ket, QStateError, ANNIHILATION_TOL, ENTRY_TOL};
use crate::SimRng;
use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use std::fmt::Write as _;
use thiserror::Error;

/// Orthonormality tolerance for user-supplied basis pairs.
pub const PAIR_TOL: f64 = 1e-10;

#[derive(Debug, Error)]
pub enum FriendsError {
    #[error("amplitude pair ({which}) is not normalized: residual {residual:e}")]
    NotNormalized { which: &'static str, residual: f64 },
    #[error("detector overlap must lie in [-1, 1], got {0}")]
    OverlapOutOfRange(f64),
    #[error("overlap modulus {0} exceeds 1")]
    OverlapModulus(f64),
    #[error("annihilated posterior: normalization {0:e} is below threshold")]
    AnnihilatedPosterior(f64),
    #[error("sweep needs at least 2 grid points, got {0}")]
    TooFewPoints(usize),
    #[error("joint state must have exactly two equal factors, got dims {0:?}")]
    BadJointDims(Vec<usize>),
    #[error("basis pair must be single {factor}-dimensional factors, got dims {u:?} and {v:?}")]
    PairDims {
        factor: usize,
        u: Vec<usize>,
        v: Vec<usize>,
    },
    #[error("basis pair is not orthonormal: residual {0:e}")]
    NotOrthonormalPair(f64),
    #[error("parameters must be finite")]
    NonFinite,
    #[error(transparent)]
    State(#[from] QStateError),
}

/// Protocol parameters: particle amplitudes `(alpha, beta)`, the second
/// branch's instrument amplitudes `(alpha_t, beta_t)`, the real detector
/// overlap `rho` and the undetermined relative phase `phi`.
#[derive(Debug, Clone, Copy)]
pub struct ProtocolParams {
    alpha: Complex64,
    beta: Complex64,
    alpha_t: Complex64,
    beta_t: Complex64,
    rho_overlap: f64,
    phi: f64,
}

impl ProtocolParams {
    pub fn new(
        alpha: Complex64,
        beta: Complex64,
        alpha_t: Complex64,
        beta_t: Complex64,
        rho_overlap: f64,
        phi: f64,
    ) -> Result<Self, FriendsError> {
        let finite = [alpha, beta, alpha_t, beta_t]
            .iter()
            .all(|z| z.re.is_finite() && z.im.is_finite())
            && rho_overlap.is_finite()
            && phi.is_finite();
        if !finite {
            return Err(FriendsError::NonFinite);
        }
        let res = (alpha.norm_sqr() + beta.norm_sqr() - 1.0).abs();
        if res > ENTRY_TOL {
            return Err(FriendsError::NotNormalized {
                which: "alpha, beta",
                residual: res,
            });
        }
        let res_t = (alpha_t.norm_sqr() + beta_t.norm_sqr() - 1.0).abs();
        if res_t > ENTRY_TOL {
            return Err(FriendsError::NotNormalized {
                which: "alpha_t, beta_t",
                residual: res_t,
            });
        }
        if !(-1.0..=1.0).contains(&rho_overlap) {
            return Err(FriendsError::OverlapOutOfRange(rho_overlap));
        }
        Ok(Self {
            alpha,
            beta,
            alpha_t,
            beta_t,
            rho_overlap,
            phi,
        })
    }

    /// Real-amplitude convenience constructor.
    pub fn from_real(
        alpha: f64,
        beta: f64,
        alpha_t: f64,
        beta_t: f64,
        rho_overlap: f64,
        phi: f64,
    ) -> Result<Self, FriendsError> {
        Self::new(
            Complex64::new(alpha, 0.0),
            Complex64::new(beta, 0.0),
            Complex64::new(alpha_t, 0.0),
            Complex64::new(beta_t, 0.0),
            rho_overlap,
            phi,
        )
    }

    /// The canonical configuration: particle amplitudes
    /// `(sqrt(1/3), sqrt(2/3))`, an unbiased second branch
    /// `(sqrt(1/2), sqrt(1/2))`, overlap `1/sqrt(2)`, phase `0`.
    pub fn canonical() -> Self {
        Self::from_real(
            (1.0f64 / 3.0).sqrt(),
            (2.0f64 / 3.0).sqrt(),
            0.5f64.sqrt(),
            0.5f64.sqrt(),
            std::f64::consts::FRAC_1_SQRT_2,
            0.0,
        )
        .expect("canonical parameters are valid")
    }

    pub fn alpha(&self) -> Complex64 {
        self.alpha
    }

    pub fn beta(&self) -> Complex64 {
        self.beta
    }

    pub fn alpha_t(&self) -> Complex64 {
        self.alpha_t
    }

    pub fn beta_t(&self) -> Complex64 {
        self.beta_t
    }

    pub fn rho_overlap(&self) -> f64 {
        self.rho_overlap
    }

    pub fn phi(&self) -> f64 {
        self.phi
    }

    pub fn with_phi(&self, phi: f64) -> Result<Self, FriendsError> {
        if !phi.is_finite() {
            return Err(FriendsError::NonFinite);
        }
        Ok(Self { phi, ..*self })
    }

    pub fn with_rho(&self, rho_overlap: f64) -> Result<Self, FriendsError> {
        if !(-1.0..=1.0).contains(&rho_overlap) {
            return Err(FriendsError::OverlapOutOfRange(rho_overlap));
        }
        Ok(Self {
            rho_overlap,
            ..*self
        })
    }
}

/// The joint prior on (particle, instrument): both instrument branches carry
/// weight `1/sqrt(2)`, with the particle in `(alpha, beta)` on the first
/// branch and `(alpha_t, beta_t)` on the second.
pub fn prepare_joint_prior(p: &ProtocolParams) -> Ket {
    let s = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    // Factor order (particle, instrument); particle is the slow index.
    Ket::new(
        vec![2, 2],
        vec![p.alpha * s, p.alpha_t * s, p.beta * s, p.beta_t * s],
    )
    .expect("normalized parameters give a well-formed ket")
}

/// Purity retained by the first observer's instrument when its pointer
/// states overlap the particle eigenstates by the given amounts:
/// `(|overlap_h|^2 + |overlap_t|^2) / 2`. Equals 1 exactly when both
/// overlaps have unit modulus.
pub fn bub_purity_check(overlap_h: Complex64, overlap_t: Complex64) -> Result<f64, FriendsError> {
    for z in [overlap_h, overlap_t] {
        if z.norm() > 1.0 + ENTRY_TOL {
            return Err(FriendsError::OverlapModulus(z.norm()));
        }
    }
    Ok((overlap_h.norm_sqr() + overlap_t.norm_sqr()) / 2.0)
}

/// Unnormalized posterior amplitudes of the particle conditional on the
/// second observer's detector setting.
fn posterior_amplitudes(p: &ProtocolParams) -> (Complex64, Complex64) {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let leak = Complex64::from_polar((1.0 - p.rho_overlap * p.rho_overlap).max(0.0).sqrt(), p.phi);
    let rho = Complex64::new(p.rho_overlap, 0.0);
    let down = (p.alpha * rho + p.alpha_t * leak) * s;
    let up = (p.beta * rho + p.beta_t * leak) * s;
    (down, up)
}

/// Conditions the joint prior on the second observer's detector and returns
/// the normalized particle posterior together with the normalization weight
/// `A` (the squared norm of the unnormalized posterior).
///
/// For real non-negative amplitudes `A` equals the closed form
/// `(1 + 2(|alpha||alpha_t| + |beta||beta_t|) rho sqrt(1-rho^2) cos phi) / 2`.
pub fn conditional_posterior(p: &ProtocolParams) -> Result<(Ket, f64), FriendsError> {
    let (down, up) = posterior_amplitudes(p);
    let a = down.norm_sqr() + up.norm_sqr();
    if a <= ANNIHILATION_TOL {
        return Err(FriendsError::AnnihilatedPosterior(a));
    }
    let inv = Complex64::new(1.0 / a.sqrt(), 0.0);
    let ket = Ket::new(vec![2], vec![down * inv, up * inv])?;
    Ok((ket, a))
}

/// Closed-form probability that the first observer finds the particle
/// spin-down, given the second observer's setting. Valid as stated for real
/// non-negative amplitudes (relative phases belong in `phi`); the
/// [`conditional_posterior`] pipeline is the general route.
pub fn prob_spin_down(p: &ProtocolParams) -> Result<f64, FriendsError> {
    let (a, at) = (p.alpha.norm(), p.alpha_t.norm());
    let (b, bt) = (p.beta.norm(), p.beta_t.norm());
    let rho = p.rho_overlap;
    let cross = rho * (1.0 - rho * rho).max(0.0).sqrt() * p.phi.cos();
    let denom = 1.0 + 2.0 * (a * at + b * bt) * cross;
    // The closed-form denominator is twice the posterior normalization.
    if denom / 2.0 <= ANNIHILATION_TOL {
        return Err(FriendsError::AnnihilatedPosterior(denom / 2.0));
    }
    let numer = a * a * rho * rho + 2.0 * a * at * cross + at * at * (1.0 - rho * rho);
    Ok(numer / denom)
}

/// Spin-down probability sweep over a uniform phase grid.
#[derive(Debug, Clone)]
pub struct SweepTable {
    phi_grid: Vec<f64>,
    /// `None` marks a flagged annihilated point (the conditioning weight
    /// vanished there).
    p_down: Vec<Option<f64>>,
    params: ProtocolParams,
}

/// Default number of grid points for [`fig1_sweep`].
pub const SWEEP_POINTS: usize = 401;
/// Default sweep range: two full phase periods.
pub const SWEEP_SPAN: f64 = 4.0 * std::f64::consts::PI;

/// Evaluates [`prob_spin_down`] on `phi_points` uniform grid points over
/// `[0, 4*pi]`. Annihilated points are flagged in the table instead of
/// aborting the sweep. Grid points are independent and evaluated through
/// [`crate::exec`], reduced in grid order.
pub fn fig1_sweep(p: &ProtocolParams, phi_points: usize) -> Result<SweepTable, FriendsError> {
    if phi_points < 2 {
        return Err(FriendsError::TooFewPoints(phi_points));
    }
    let h = SWEEP_SPAN / (phi_points - 1) as f64;
    let phi_grid: Vec<f64> = (0..phi_points).map(|k| k as f64 * h).collect();
    let base = *p;
    let p_down: Vec<Option<f64>> = exec::indexed_map(phi_points, |k| {
        let at_phi = base.with_phi(phi_grid[k]).expect("finite grid point");
        prob_spin_down(&at_phi).ok()
    });
    Ok(SweepTable {
        phi_grid,
        p_down,
        params: *p,
    })
}

impl SweepTable {
    pub fn phi_grid(&self) -> &[f64] {
        &self.phi_grid
    }

    pub fn p_down(&self) -> &[Option<f64>] {
        &self.p_down
    }

    pub fn params(&self) -> &ProtocolParams {
        &self.params
    }

    pub fn len(&self) -> usize {
        self.phi_grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.phi_grid.is_empty()
    }

    /// CSV with the parameters echoed as `# key=value` comments; flagged
    /// points get an empty probability cell and flag 1.
    pub fn write_csv(&self) -> String {
        use crate::qstate::textmat::format_complex;
        let mut out = String::new();
        let _ = writeln!(out, "# alpha={}", format_complex(self.params.alpha));
        let _ = writeln!(out, "# beta={}", format_complex(self.params.beta));
        let _ = writeln!(out, "# alpha_t={}", format_complex(self.params.alpha_t));
        let _ = writeln!(out, "# beta_t={}", format_complex(self.params.beta_t));
        let _ = writeln!(out, "# rho={}", self.params.rho_overlap);
        let _ = writeln!(out, "# phi_points={}", self.phi_grid.len());
        out.push_str("phi,p_down,flag\n");
        for (phi, p) in self.phi_grid.iter().zip(self.p_down.iter()) {
            match p {
                Some(v) => {
                    let _ = writeln!(out, "{phi},{v},0");
                }
                None => {
                    let _ = writeln!(out, "{phi},,1");
                }
            }
        }
        out
    }
}

/// Coefficients of the two cross coherences `|u><v| (x) |v><u|` and
/// `|v><u| (x) |u><v|` in a two-factor state, for an orthonormal pair
/// `(u, v)` applied to both factors. For a maximally entangled pair state
/// both moduli are `1/2`; for product or fully mixed states they vanish.
pub fn bell_projection_coeffs(
    joint: &DensityMatrix,
    u: &Ket,
    v: &Ket,
) -> Result<(Complex64, Complex64), FriendsError> {
    let dims = joint.dims();
    if dims.len() != 2 || dims[0] != dims[1] {
        return Err(FriendsError::BadJointDims(dims.to_vec()));
    }
    if u.dims() != [dims[0]] || v.dims() != [dims[0]] {
        return Err(FriendsError::PairDims {
            factor: dims[0],
            u: u.dims().to_vec(),
            v: v.dims().to_vec(),
        });
    }
    let residual = (u.norm() - 1.0)
        .abs()
        .max((v.norm() - 1.0).abs())
        .max(u.inner(v)?.norm());
    if residual > PAIR_TOL {
        return Err(FriendsError::NotOrthonormalPair(residual));
    }
    let uv = u.tensor(v)?;
    let vu = v.tensor(u)?;
    // coefficient of |u v><v u| is <u v| rho |v u>.
    let p01 = (uv.amplitudes().adjoint() * joint.matrix() * vu.amplitudes())[(0, 0)];
    let p10 = (vu.amplitudes().adjoint() * joint.matrix() * uv.amplitudes())[(0, 0)];
    Ok((p01, p10))
}

/// Draws `n_samples` outcomes from the conditioned posterior and counts the
/// spin-down results. The sampling route goes through the amplitude
/// pipeline, independent of the closed form it is used to check.
pub fn sample_spin_down(
    p: &ProtocolParams,
    n_samples: u64,
    seed: u64,
) -> Result<u64, FriendsError> {
    let (posterior, _) = conditional_posterior(p)?;
    let p_down = posterior.amplitude(0).norm_sqr();
    let mut rng = SimRng::seed_from_u64(seed);
    let mut count = 0u64;
    for _ in 0..n_samples {
        count += (rng.gen::<f64>() < p_down) as u64;
    }
    Ok(count)
}

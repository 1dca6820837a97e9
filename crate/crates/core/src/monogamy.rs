//! Entanglement measures and monogamy checks.
//!
//! Three selectable measures are provided: the purity-based concurrence
//! `sqrt(2(1 - Tr rho^2))` (an entanglement measure only when the global
//! state is pure; otherwise it measures mixedness), the exact two-qubit
//! Wootters concurrence, and negativity as a dimension-agnostic proxy. The
//! tripartite check always uses the purity form for the one-vs-rest term,
//! which is exact for pure global states, and the configured measure for the
//! pairwise terms.

use crate::exec;
use crate::qstate::{DensityMatrix, Ket, QStateError};
use nalgebra::DMatrix;
use num_complex::Complex64;
use std::fmt::Write as _;
use thiserror::Error;

/// Slack on monogamy inequality comparisons, absorbing eigensolver noise.
pub const INEQ_SLACK: f64 = 1e-10;
/// Norm tolerance for user-supplied pure states.
pub const NORM_TOL: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum MonogamyError {
    #[error("Wootters concurrence needs a two-qubit state, got dims {0:?}")]
    NotTwoQubits(Vec<usize>),
    #[error("transpose set must be a non-empty strict subset of the factors")]
    InvalidSplit,
    #[error("expected a (2, dB, dL) tripartite pure state, got dims {0:?}")]
    BadTripartiteDims(Vec<usize>),
    #[error("state norm residual {0:e} exceeds tolerance")]
    NotUnitNorm(f64),
    #[error("room dimension must lie in 2..=32, got {0}")]
    RoomDimOutOfRange(usize),
    #[error(transparent)]
    State(#[from] QStateError),
}

/// Which measure evaluates the pairwise entanglement terms.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MeasureId {
    PurityConcurrence,
    WoottersConcurrence,
    Negativity,
}

impl MeasureId {
    pub fn name(&self) -> &'static str {
        match self {
            MeasureId::PurityConcurrence => "purity",
            MeasureId::WoottersConcurrence => "wootters",
            MeasureId::Negativity => "negativity",
        }
    }
}

/// `sqrt(2 (1 - Tr rho^2))`: zero exactly on pure states, maximal
/// `sqrt(2 (1 - 1/dim))` on the maximally mixed state.
pub fn concurrence_purity(rho: &DensityMatrix) -> f64 {
    (2.0 * (1.0 - rho.purity())).max(0.0).sqrt()
}

fn hermitian_sqrt(m: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    let eig = m.clone().symmetric_eigen();
    let diag = DMatrix::from_diagonal(
        &eig.eigenvalues
            .map(|e| Complex64::new(e.max(0.0).sqrt(), 0.0)),
    );
    &eig.eigenvectors * diag * eig.eigenvectors.adjoint()
}

/// Wootters mixed-state concurrence for a two-qubit state:
/// `max(0, l1 - l2 - l3 - l4)` with `l_i` the decreasing square roots of the
/// eigenvalues of `rho (sy x sy) rho* (sy x sy)`, computed through the
/// Hermitian equivalent `sqrt(rho) rho~ sqrt(rho)`.
pub fn concurrence_wootters(rho: &DensityMatrix) -> Result<f64, MonogamyError> {
    if rho.dims() != [2, 2] {
        return Err(MonogamyError::NotTwoQubits(rho.dims().to_vec()));
    }
    let z = Complex64::new(0.0, 0.0);
    let m1 = Complex64::new(-1.0, 0.0);
    let p1 = Complex64::new(1.0, 0.0);
    // sigma_y (x) sigma_y is real in the computational basis.
    let yy = DMatrix::from_row_slice(4, 4, &[z, z, z, m1, z, z, p1, z, z, p1, z, z, m1, z, z, z]);
    let conj = rho.matrix().map(|v| v.conj());
    let spin_flipped = &yy * conj * &yy;
    let root = hermitian_sqrt(rho.matrix());
    let herm = &root * spin_flipped * &root;
    let mut lambdas: Vec<f64> = herm
        .symmetric_eigenvalues()
        .iter()
        .map(|e| e.max(0.0).sqrt())
        .collect();
    lambdas.sort_by(|a, b| b.partial_cmp(a).unwrap());
    Ok((lambdas[0] - lambdas[1] - lambdas[2] - lambdas[3]).max(0.0))
}

/// Transposes the listed factors of the state (the partial transpose over
/// that side of the bipartition).
fn partial_transpose(
    rho: &DensityMatrix,
    transpose: &[usize],
) -> Result<DMatrix<Complex64>, MonogamyError> {
    let dims = rho.dims();
    let nfactors = dims.len();
    let mut t: Vec<usize> = transpose.to_vec();
    t.sort_unstable();
    t.dedup();
    if t.is_empty()
        || t.len() != transpose.len()
        || t.len() >= nfactors
        || *t.last().unwrap() >= nfactors
    {
        return Err(MonogamyError::InvalidSplit);
    }
    let strides = crate::qstate::factor_strides(dims);
    let n = rho.dim();
    let mut out = DMatrix::from_element(n, n, Complex64::new(0.0, 0.0));
    for r in 0..n {
        for c in 0..n {
            let mut rr = r;
            let mut cc = c;
            for &f in &t {
                let s = strides[f];
                let d = dims[f];
                let ri = (r / s) % d;
                let ci = (c / s) % d;
                // Swap this factor's row and column sub-indices.
                rr = rr - ri * s + ci * s;
                cc = cc - ci * s + ri * s;
            }
            out[(rr, cc)] = rho.matrix()[(r, c)];
        }
    }
    Ok(out)
}

/// Negativity `(||rho^{T_A}||_1 - 1) / 2` across the bipartition that
/// transposes the listed factors. Zero on all separable states.
pub fn negativity(rho: &DensityMatrix, transpose: &[usize]) -> Result<f64, MonogamyError> {
    let pt = partial_transpose(rho, transpose)?;
    let trace_norm: f64 = pt.symmetric_eigenvalues().iter().map(|e| e.abs()).sum();
    Ok(((trace_norm - 1.0) / 2.0).max(0.0))
}

/// Monogamy audit of a tripartite pure state.
#[derive(Debug, Clone)]
pub struct MonogamyReport {
    pub measure: MeasureId,
    /// Squared pairwise measures of the three two-party reductions.
    pub c2_pb: f64,
    pub c2_pl: f64,
    pub c2_bl: f64,
    /// Squared one-vs-rest term, always the purity concurrence of the
    /// particle reduction (exact for pure global states).
    pub c2_p_bl: f64,
    /// `c2_pb + c2_pl`, the particle-centered pairwise total.
    pub lhs: f64,
    /// `c2_p_bl`.
    pub rhs: f64,
    pub satisfied: bool,
}

impl MonogamyReport {
    pub fn write_csv(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# measure={}", self.measure.name());
        out.push_str("c2_pB,c2_pL,c2_BL,c2_p_BL,lhs,rhs,satisfied\n");
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            self.c2_pb,
            self.c2_pl,
            self.c2_bl,
            self.c2_p_bl,
            self.lhs,
            self.rhs,
            self.satisfied as u8
        );
        out
    }
}

fn squared_pairwise(rho: &DensityMatrix, measure: MeasureId) -> Result<f64, MonogamyError> {
    let value = match measure {
        MeasureId::PurityConcurrence => concurrence_purity(rho),
        MeasureId::WoottersConcurrence => concurrence_wootters(rho)?,
        MeasureId::Negativity => negativity(rho, &[0])?,
    };
    Ok(value * value)
}

/// Audits the monogamy inequality `C^2(p:B) + C^2(p:L) <= C^2(p:(BL))` on a
/// tripartite pure state with dims `(2, dB, dL)`, reporting all pairwise
/// squared measures (including the room-room term) alongside the inequality
/// sides. With the Wootters measure on three qubits the inequality is the
/// distributed-entanglement theorem and always holds.
pub fn ckw_check(psi: &Ket, measure: MeasureId) -> Result<MonogamyReport, MonogamyError> {
    let dims = psi.dims();
    if dims.len() != 3 || dims[0] != 2 {
        return Err(MonogamyError::BadTripartiteDims(dims.to_vec()));
    }
    let norm_res = (psi.norm() - 1.0).abs();
    if norm_res > NORM_TOL {
        return Err(MonogamyError::NotUnitNorm(norm_res));
    }
    let psi = psi.normalized()?;

    let rho_pb = psi.reduced_density(&[0, 1])?;
    let rho_pl = psi.reduced_density(&[0, 2])?;
    let rho_bl = psi.reduced_density(&[1, 2])?;
    let rho_p = psi.reduced_density(&[0])?;

    let c2_pb = squared_pairwise(&rho_pb, measure)?;
    let c2_pl = squared_pairwise(&rho_pl, measure)?;
    let c2_bl = squared_pairwise(&rho_bl, measure)?;
    let one_vs_rest = concurrence_purity(&rho_p);
    let c2_p_bl = one_vs_rest * one_vs_rest;

    let lhs = c2_pb + c2_pl;
    let rhs = c2_p_bl;
    Ok(MonogamyReport {
        measure,
        c2_pb,
        c2_pl,
        c2_bl,
        c2_p_bl,
        lhs,
        rhs,
        satisfied: lhs <= rhs + INEQ_SLACK,
    })
}

/// Which tripartite family the dimension scan walks.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScanConstruction {
    /// Rooms maximally entangled with each other, particle detached.
    DetachedParticle,
    /// Particle maximally entangled with the first room, second room
    /// detached.
    EntangledParticle,
}

impl ScanConstruction {
    pub fn name(&self) -> &'static str {
        match self {
            ScanConstruction::DetachedParticle => "detached-particle",
            ScanConstruction::EntangledParticle => "entangled-particle",
        }
    }
}

/// One row of the room-dimension scan.
#[derive(Debug, Clone, Copy)]
pub struct ScanRow {
    pub d: usize,
    /// Squared room-room purity concurrence, from the first room's
    /// reduction.
    pub c2_bl: f64,
    /// Particle-room negativity (entanglement proxy).
    pub proxy_pb: f64,
    /// Squared particle-vs-rooms purity concurrence.
    pub c2_p_bl: f64,
}

#[derive(Debug, Clone)]
pub struct ScanTable {
    pub construction: ScanConstruction,
    pub rows: Vec<ScanRow>,
}

impl ScanTable {
    pub fn write_csv(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# construction={}", self.construction.name());
        out.push_str("d,c2_BL,proxy_pB,c2_p_BL\n");
        for row in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{}",
                row.d, row.c2_bl, row.proxy_pb, row.c2_p_bl
            );
        }
        out
    }
}

/// The tripartite state scanned at room dimension `d`.
pub fn scan_state(d: usize, construction: ScanConstruction) -> Result<Ket, MonogamyError> {
    if !(2..=32).contains(&d) {
        return Err(MonogamyError::RoomDimOutOfRange(d));
    }
    let dims = vec![2, d, d];
    let total = 2 * d * d;
    let mut amps = vec![Complex64::new(0.0, 0.0); total];
    match construction {
        ScanConstruction::DetachedParticle => {
            // particle fixed "up" (index 1), rooms in sum_k |kk> / sqrt(d).
            let w = Complex64::new(1.0 / (d as f64).sqrt(), 0.0);
            for k in 0..d {
                amps[(d * d) + k * d + k] = w;
            }
        }
        ScanConstruction::EntangledParticle => {
            // particle and first room share a Bell pair on the room's first
            // two levels; second room detached in its ground level.
            let w = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
            amps[0] = w; // (p=0, b=0, l=0)
            amps[(d * d) + d] = w; // (p=1, b=1, l=0)
        }
    }
    Ok(Ket::new(dims, amps)?)
}

/// Evaluates one scan row: room-room entanglement saturates toward 2 as the
/// rooms grow while the particle-room proxy pins what the particle can
/// share.
pub fn monogamy_scan_row(
    d: usize,
    construction: ScanConstruction,
) -> Result<ScanRow, MonogamyError> {
    let psi = scan_state(d, construction)?;
    let rho_b = psi.reduced_density(&[1])?;
    let rho_p = psi.reduced_density(&[0])?;
    let rho_pb = psi.reduced_density(&[0, 1])?;
    let c_bl = concurrence_purity(&rho_b);
    let c_p_bl = concurrence_purity(&rho_p);
    Ok(ScanRow {
        d,
        c2_bl: c_bl * c_bl,
        proxy_pb: negativity(&rho_pb, &[0])?,
        c2_p_bl: c_p_bl * c_p_bl,
    })
}

/// Runs [`monogamy_scan_row`] for every `d` in `2..=d_max`, in parallel when
/// enabled, reduced in dimension order.
pub fn monogamy_scan(
    d_max: usize,
    construction: ScanConstruction,
) -> Result<ScanTable, MonogamyError> {
    if !(2..=32).contains(&d_max) {
        return Err(MonogamyError::RoomDimOutOfRange(d_max));
    }
    let rows: Vec<Result<ScanRow, MonogamyError>> =
        exec::indexed_map(d_max - 1, |i| monogamy_scan_row(i + 2, construction));
    let rows = rows.into_iter().collect::<Result<Vec<_>, _>>()?;
    Ok(ScanTable { construction, rows })
}

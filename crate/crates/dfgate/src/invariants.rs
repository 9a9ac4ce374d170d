//! Makhlin local-equivalence machinery: the Bell-basis transform, the
//! (m₁, m₂) invariant pair, the f_m distance to controlled-Z, and
//! calibration of the local frame that turns the noiseless projected gate
//! into an exact CZ.
//!
//! Two two-qubit gates are equivalent up to single-qubit rotations iff
//! their Makhlin invariants agree: with `M_B = Q†MQ` the Bell-basis form
//! and `m = M_Bᵀ M_B`,
//!
//! ```text
//! m₁ = (tr m)² / (16 det M†),    m₂ = ((tr m)² − tr m²) / (4 det M†).
//! ```
//!
//! The search objective is `f_m = |m₁(CZ) − m₁| + |m₂(CZ) − m₂|`, which
//! ignores whatever local rotations dress the gate; those are fixed once
//! at calibration time and reused unchanged in every noisy run.

use ndarray::array;
use ndarray_linalg::Determinant;
use num_complex::Complex64;
use std::sync::OnceLock;

use crate::error::Error;
use crate::linalg::{dagger, fro_norm, max_abs, unitarity_error, CMat};

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn check_4x4(m: &CMat) -> Result<(), Error> {
    if m.nrows() != 4 || m.ncols() != 4 {
        return Err(Error::DimensionMismatch {
            expected: 4,
            got: m.nrows(),
        });
    }
    Ok(())
}

/// The Bell-basis change matrix
/// Q = (1/√2) [[1,0,0,i], [0,i,1,0], [0,i,−1,0], [1,0,0,−i]].
pub fn bell_q() -> CMat {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    array![
        [c(s, 0.), c(0., 0.), c(0., 0.), c(0., s)],
        [c(0., 0.), c(0., s), c(s, 0.), c(0., 0.)],
        [c(0., 0.), c(0., s), c(-s, 0.), c(0., 0.)],
        [c(s, 0.), c(0., 0.), c(0., 0.), c(0., -s)],
    ]
}

/// diag(1, 1, 1, −1).
pub fn cz_matrix() -> CMat {
    let mut m = CMat::eye(4);
    m[[3, 3]] = c(-1.0, 0.0);
    m
}

/// Transform a two-qubit operator into the Bell basis: M ↦ Q†MQ.
pub fn bell_basis_transform(m: &CMat) -> Result<CMat, Error> {
    check_4x4(m)?;
    let q = bell_q();
    Ok(dagger(&q).dot(m).dot(&q))
}

/// The Makhlin invariant pair of a two-qubit gate. Equal pairs ⇔ the gates
/// differ only by single-qubit rotations (and global phase).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MakhlinPair {
    pub m1: Complex64,
    pub m2: Complex64,
}

impl MakhlinPair {
    /// |Δm₁| + |Δm₂| against another pair.
    pub fn distance(&self, other: &MakhlinPair) -> f64 {
        (self.m1 - other.m1).norm() + (self.m2 - other.m2).norm()
    }
}

/// Compute (m₁, m₂) for a 4×4 matrix. The formulas are total, but the
/// values are only *invariants* for unitary input.
///
/// The denominators carry det M (Makhlin's normalization): both (tr m)²
/// and det M gain e^{4iδ} under a global phase e^{iδ}, so the ratio is
/// phase-invariant. Dividing by det M† instead would pick up e^{8iδ} and
/// break invariance; the two conventions agree on every gate with
/// det = ±1 (identity, CZ, CNOT, SWAP, and the calibrated gates here).
pub fn makhlin_invariants(m: &CMat) -> Result<MakhlinPair, Error> {
    let mb = bell_basis_transform(m)?;
    let mm = mb.t().dot(&mb);
    let tr: Complex64 = mm.diag().sum();
    let tr_sq: Complex64 = mm.dot(&mm).diag().sum();
    // det is transpose-invariant, so any memory-order quirk in the LU
    // factorization cannot affect it.
    let det = m.det().map_err(Error::Linalg)?;
    Ok(MakhlinPair {
        m1: tr * tr / (16.0 * det),
        m2: (tr * tr - tr_sq) / (4.0 * det),
    })
}

/// The CZ reference pair, computed once from the matrix (never assumed).
pub fn cz_invariants() -> &'static MakhlinPair {
    static CZ: OnceLock<MakhlinPair> = OnceLock::new();
    CZ.get_or_init(|| makhlin_invariants(&cz_matrix()).expect("CZ is 4x4"))
}

/// Distance from the CZ equivalence class:
/// f_m = |m₁(CZ) − m₁(M)| + |m₂(CZ) − m₂(M)|.
pub fn fm_objective(m: &CMat) -> Result<f64, Error> {
    Ok(makhlin_invariants(m)?.distance(cz_invariants()))
}

/// A frozen change of frame with align(U₀) = CZ for the noiseless gate U₀
/// it was calibrated on. Noisy gates are dressed with the same frame — the
/// hardware's local rotations cannot follow the noise.
///
/// The frame is e^{iΦ} V† M V R. The conjugation (V, Φ) comes from the
/// spectral construction; R is a frozen unitary corrector absorbing the
/// part of U₀ that pure conjugation cannot reach. A gate whose spectrum is
/// exactly {μ, μ, μ, −μ} calibrates with R = I, but an exactly CZ-class
/// gate may carry a small eigenphase asymmetry (the published pulse
/// solution has ≈ 1.5e-4: its spectrum is {μ, μ, μe^{iε}, −μe^{−iε}}), and
/// conjugation alone can never map it to CZ because conjugation preserves
/// spectra. The corrector, frozen at calibration time like V and Φ, makes
/// the frame exact without changing what it measures on noisy gates
/// (‖R − I‖ is of the order of the asymmetry).
#[derive(Debug, Clone)]
pub struct LocalFrame {
    v: CMat,
    phi: f64,
    corrector: CMat,
    conjugation_residual: f64,
}

impl LocalFrame {
    pub fn v(&self) -> &CMat {
        &self.v
    }

    pub fn phi(&self) -> f64 {
        self.phi
    }

    /// The frozen corrector R; identity (to the calibration tolerance)
    /// whenever the calibrated gate had an exactly symmetric spectrum.
    pub fn corrector(&self) -> &CMat {
        &self.corrector
    }

    /// ‖e^{iΦ}V†U₀V − CZ‖_F before the corrector was applied: how far pure
    /// conjugation was from CZ for the calibrated gate.
    pub fn conjugation_residual(&self) -> f64 {
        self.conjugation_residual
    }

    /// Dress an operator with the calibrated frame: e^{iΦ} V† M V R.
    pub fn align(&self, m: &CMat) -> CMat {
        let phase = Complex64::from_polar(1.0, self.phi);
        dagger(&self.v)
            .dot(m)
            .dot(&self.v)
            .dot(&self.corrector)
            .mapv(|z| z * phase)
    }
}

/// Calibrate the local frame of a noiseless projected gate.
///
/// A gate that diagonalizes to CZ has spectrum {μ, μ, μ, −μ} with |μ| = 1,
/// so μ = tr(U₀)/2 and (I − U₀/μ)/2 is the rank-one projector onto the
/// −μ eigenvector; no general eigensolver is needed. V stacks an
/// orthonormal basis of the μ eigenspace and that eigenvector, and
/// Φ = −arg μ maps the spectrum onto {1, 1, 1, −1}. The spectral-pattern
/// tolerance is 1e-3 because an exactly CZ-class gate may carry an
/// eigenphase asymmetry far above numerical noise (see [`LocalFrame`]);
/// whatever conjugation leaves behind below that level goes into the
/// frozen corrector, so align(U₀) hits CZ at machine precision either way.
pub fn calibrate_local_frame(u0: &CMat) -> Result<LocalFrame, Error> {
    check_4x4(u0)?;
    let uni_err = unitarity_error(u0);
    if uni_err > 1e-8 {
        return Err(Error::Calibration(format!(
            "input is not unitary (residual {uni_err:.3e})"
        )));
    }
    // A gate outside the CZ class (e.g. SWAP) can still have the right
    // spectrum — any such gate diagonalizes to CZ through some V, but only
    // a locally-equivalent gate admits a V realizable by local rotations.
    let fm = fm_objective(u0)?;
    if fm > 1e-8 {
        return Err(Error::Calibration(format!(
            "gate is not locally equivalent to CZ (f_m = {fm:.3e})"
        )));
    }
    let mu = u0.diag().sum() / 2.0;
    if (mu.norm() - 1.0).abs() > 1e-3 {
        return Err(Error::Calibration(format!(
            "spectrum is not of the form {{μ,μ,μ,−μ}}: |tr U₀|/2 = {:.6} ≠ 1",
            mu.norm()
        )));
    }
    let mut usq = u0.dot(u0);
    let musq = mu * mu;
    for i in 0..4 {
        usq[[i, i]] -= musq;
    }
    let sq_err = max_abs(&usq);
    if sq_err > 1e-3 {
        return Err(Error::Calibration(format!(
            "spectrum is not of the form {{μ,μ,μ,−μ}}: ‖U₀² − μ²I‖ = {sq_err:.3e}"
        )));
    }
    // Rank-one projector onto the −μ eigenvector; its largest column is a
    // (scaled) copy of that eigenvector.
    let mut p_minus = u0.mapv(|z| -z / (2.0 * mu));
    for i in 0..4 {
        p_minus[[i, i]] += c(0.5, 0.0);
    }
    let (best_col, best_norm) = (0..4)
        .map(|j| {
            let norm = p_minus.column(j).iter().map(|z| z.norm_sqr()).sum::<f64>();
            (j, norm)
        })
        .max_by(|a, b| a.1.total_cmp(&b.1))
        .expect("four columns");
    if best_norm < 1e-12 {
        return Err(Error::Calibration(
            "no −μ eigenvector found (projector vanishes)".into(),
        ));
    }
    let w = p_minus.column(best_col).mapv(|z| z / best_norm.sqrt());
    // Gram–Schmidt the computational basis against w: the orthogonal
    // complement of w is exactly the μ eigenspace.
    let mut columns: Vec<ndarray::Array1<Complex64>> = Vec::with_capacity(3);
    for k in 0..4 {
        let mut v = ndarray::Array1::<Complex64>::zeros(4);
        v[k] = c(1.0, 0.0);
        let overlap: Complex64 = w.iter().zip(v.iter()).map(|(a, b)| a.conj() * b).sum();
        v.zip_mut_with(&w, |vi, &wi| *vi -= overlap * wi);
        for prev in &columns {
            let overlap: Complex64 =
                prev.iter().zip(v.iter()).map(|(a, b)| a.conj() * b).sum();
            v.zip_mut_with(prev, |vi, &pi| *vi -= overlap * pi);
        }
        let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if norm > 1e-6 {
            columns.push(v.mapv(|z| z / norm));
        }
        if columns.len() == 3 {
            break;
        }
    }
    if columns.len() != 3 {
        return Err(Error::Calibration(
            "could not span the μ eigenspace".into(),
        ));
    }
    let mut v = CMat::zeros((4, 4));
    for (j, col) in columns.iter().enumerate() {
        v.column_mut(j).assign(col);
    }
    v.column_mut(3).assign(&w);
    let phi = -mu.arg();
    let phase = Complex64::from_polar(1.0, phi);
    let conjugated = dagger(&v).dot(u0).dot(&v).mapv(|z| z * phase);
    let conjugation_residual = fro_norm(&(&conjugated - &cz_matrix()));
    if conjugation_residual > 1e-3 {
        return Err(Error::Calibration(format!(
            "conjugation leaves the gate {conjugation_residual:.3e} from CZ, \
             beyond the correctable level"
        )));
    }
    let corrector = dagger(&conjugated).dot(&cz_matrix());
    let frame = LocalFrame {
        v,
        phi,
        corrector,
        conjugation_residual,
    };
    let residual = fro_norm(&(frame.align(u0) - cz_matrix()));
    if residual > 1e-10 {
        return Err(Error::Calibration(format!(
            "aligned gate misses CZ by {residual:.3e}"
        )));
    }
    Ok(frame)
}

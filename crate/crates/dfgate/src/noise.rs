//! Monte-Carlo noise studies: coupling/timing jitter on the six pulse
//! phases and quasi-static magnetic fields (collective per encoded qubit
//! or independent per site), scored by post-selected process fidelity and
//! leakage, with quadratic strength fits.
//!
//! Determinism contract: every sample draws from its own counter-derived
//! RNG stream (seed, strength index, sample index), so sweeps are
//! bit-reproducible regardless of thread count or schedule.

use std::sync::OnceLock;

use ndarray::Array1;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::encoding::{
    gauge_block_basis, pair_basis, EncodingKind, EncodingLayout, GaugeBlockLabel,
};
use crate::error::Error;
use crate::invariants::{calibrate_local_frame, LocalFrame};
use crate::linalg::{dagger, fro_norm, CMat, HermPropagator, Operator};
use crate::pulse::{
    compile_sequence, gate_unitary, named_hamiltonian, PulseLabel, PulseParameters,
};
use crate::spin::{pauli_op, Site, SpinComponent};

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// Which noise channel a sweep exercises.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum NoiseKind {
    /// Gaussian jitter on the six pulse phases (coupling-strength /
    /// timing errors), recompiled into the physical sequence per sample.
    CouplingJitter,
    /// One quasi-static random field per encoded qubit, shared by all of
    /// its sites.
    MagneticCollective,
    /// An independent quasi-static random field on every physical site.
    MagneticIndividual,
}

/// Which set of knobs coupling jitter perturbs.
///
/// `SixPhase` draws one offset for each of the six sequence phases and
/// recompiles; the times/box phases of the physical sequence then carry
/// correlated errors. `FivePulse` instead draws one offset per compiled
/// pulse (the ring fraction keeps its programmed value), so the five
/// physical pulse areas jitter independently.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum JitterModel {
    #[default]
    SixPhase,
    FivePulse,
}

/// Settings of one noise sweep.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NoiseConfig {
    pub kind: NoiseKind,
    pub strength_grid: Vec<f64>,
    pub samples: usize,
    pub seed: u64,
    pub encoding: EncodingKind,
    /// Only read when `kind` is `CouplingJitter`.
    #[serde(default)]
    pub jitter_model: JitterModel,
}

impl NoiseConfig {
    pub fn validate(&self) -> Result<(), Error> {
        if self.samples == 0 {
            return Err(Error::InvalidParameter(
                "a sweep needs at least one sample per point".into(),
            ));
        }
        if self.strength_grid.is_empty() {
            return Err(Error::InvalidParameter(
                "the strength grid is empty".into(),
            ));
        }
        if self
            .strength_grid
            .iter()
            .any(|s| !s.is_finite() || *s < 0.0)
        {
            return Err(Error::InvalidParameter(
                "noise strengths must be finite and non-negative".into(),
            ));
        }
        Ok(())
    }
}

/// Where field vectors attach.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FieldMode {
    /// One shared vector per encoded qubit.
    Collective,
    /// One vector per physical site.
    Individual,
}

/// A concrete draw of quasi-static field vectors, in units of B/J with
/// the bare-σ spin convention (the Zeeman term is b⃗·σ⃗ per target).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldAssignment {
    pub mode: FieldMode,
    /// Collective: `[qubit A, qubit B]`. Individual: one entry per site,
    /// in site order 1..=n.
    pub vectors: Vec<[f64; 3]>,
}

/// One realized noise draw.
#[derive(Debug, Clone, PartialEq)]
pub enum NoiseRealization {
    /// Additive offsets for the six pulse phases.
    Coupling([f64; 6]),
    Magnetic(FieldAssignment),
}

/// Statistics of one grid point of a sweep.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepPoint {
    pub strength: f64,
    pub mean_fp: f64,
    pub stderr_fp: f64,
    pub mean_leakage: f64,
}

impl SweepPoint {
    /// Upper bound on the average failure probability combining leakage
    /// and post-selected infidelity: 1 − (1 − L̄)·F̄_p.
    pub fn failure_bound(&self) -> f64 {
        1.0 - (1.0 - self.mean_leakage) * self.mean_fp
    }
}

/// The per-sample RNG: one independent ChaCha stream per
/// (strength index, sample index) pair under a master seed.
pub fn sample_rng(seed: u64, strength_index: usize, sample_index: usize) -> ChaCha12Rng {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    rng.set_stream(((strength_index as u64) << 32) | sample_index as u64);
    rng
}

/// Six iid N(0, ε²) phase offsets.
pub fn sample_coupling_noise(epsilon: f64, rng: &mut ChaCha12Rng) -> [f64; 6] {
    let normal = Normal::new(0.0, epsilon).expect("epsilon validated non-negative");
    let mut draw = [0.0; 6];
    for d in draw.iter_mut() {
        *d = normal.sample(rng);
    }
    draw
}

/// Map a raw six-component draw to offsets on the six sequence phases.
///
/// `SixPhase` uses the draw as-is. `FivePulse` spends the first five
/// components on the compiled pulses in execution order (second asymmetric,
/// merged symmetric, combined times, parallel, first asymmetric) and folds
/// them back: the merged pulse's offset d₁ lands on the box phase, scaled
/// by the programmed ring fraction on the ring phase, and adds to the
/// independent d₂ on the times phase; the sixth component is unused.
pub fn jitter_offsets(
    model: JitterModel,
    params: &PulseParameters,
    draw: [f64; 6],
) -> [f64; 6] {
    match model {
        JitterModel::SixPhase => draw,
        JitterModel::FivePulse => {
            let alpha = params.theta_ring / params.theta_box;
            let [d0, d1, d2, d3, d4, _] = draw;
            [d4, d3, d1 + d2, d1, alpha * d1, d0]
        }
    }
}

/// Field vectors with iid N(0, (B_nuc/J)²) Cartesian components, drawn in
/// target order (qubit A then qubit B, or sites 1..=n).
pub fn sample_magnetic_fields(
    b_over_j: f64,
    mode: FieldMode,
    layout: &EncodingLayout,
    rng: &mut ChaCha12Rng,
) -> FieldAssignment {
    let normal = Normal::new(0.0, b_over_j).expect("strength validated non-negative");
    let targets = match mode {
        FieldMode::Collective => 2,
        FieldMode::Individual => layout.num_sites(),
    };
    let mut vectors = Vec::with_capacity(targets);
    for _ in 0..targets {
        let mut v = [0.0; 3];
        for comp in v.iter_mut() {
            *comp = normal.sample(rng);
        }
        vectors.push(v);
    }
    FieldAssignment { mode, vectors }
}

/// The Zeeman operator Σ_targets b⃗·σ⃗ for a field draw, embedded in the
/// full 2ⁿ space.
pub fn field_hamiltonian(
    assignment: &FieldAssignment,
    layout: &EncodingLayout,
) -> Result<Operator, Error> {
    let n = layout.num_sites();
    let site_groups: Vec<Vec<Site>> = match assignment.mode {
        FieldMode::Collective => {
            vec![layout.sites_a().to_vec(), layout.sites_b().to_vec()]
        }
        FieldMode::Individual => (1..=n).map(|s| vec![Site(s)]).collect(),
    };
    if assignment.vectors.len() != site_groups.len() {
        return Err(Error::WrongSiteCount {
            expected: site_groups.len(),
            got: assignment.vectors.len(),
        });
    }
    let mut h = Operator::zeros(n);
    for (b, sites) in assignment.vectors.iter().zip(&site_groups) {
        for site in sites {
            for (comp, weight) in [
                (SpinComponent::X, b[0]),
                (SpinComponent::Y, b[1]),
                (SpinComponent::Z, b[2]),
            ] {
                if weight != 0.0 {
                    h = h.add(&pauli_op(comp, *site, n)?.scaled(c(weight, 0.0)))?;
                }
            }
        }
    }
    Ok(h)
}

/// Apply one noise draw to the gate and return the full-space unitary.
///
/// Coupling jitter perturbs the six phases before compilation. Magnetic
/// noise leaves the phases alone and adds the quasi-static Zeeman term to
/// each of the five compiled pulse generators for that pulse's duration,
/// back to back with no idle time.
pub fn noisy_gate_unitary(
    params: &PulseParameters,
    noise: &NoiseRealization,
    layout: &EncodingLayout,
) -> Result<Operator, Error> {
    match noise {
        NoiseRealization::Coupling(delta) => {
            let mut thetas = params.to_array();
            for (t, d) in thetas.iter_mut().zip(delta) {
                *t += d;
            }
            gate_unitary(&PulseParameters::from_array(thetas), layout)
        }
        NoiseRealization::Magnetic(fields) => {
            let sequence = compile_sequence(params)?;
            let field = field_hamiltonian(fields, layout)?;
            let mut u = Operator::identity(layout.num_sites());
            for pulse in sequence.pulses() {
                let h = sequence.pulse_hamiltonian(pulse, layout)?.add(&field)?;
                u = h.evolve(pulse.duration)?.compose(&u)?;
            }
            Ok(u)
        }
    }
}

/// Trace-normalized rank-one process matrix χ = a a†/‖a‖² of a single
/// Kraus operator.
#[derive(Debug, Clone)]
pub struct ProcessMatrix {
    chi: CMat,
}

impl ProcessMatrix {
    pub fn matrix(&self) -> &CMat {
        &self.chi
    }
}

/// The 16 two-qubit Pauli words I,X,Y,Z ⊗ I,X,Y,Z (row-major order), each
/// with tr(A_m†A_n) = 4δ_mn.
pub fn two_qubit_pauli_basis() -> &'static [CMat; 16] {
    static BASIS: OnceLock<[CMat; 16]> = OnceLock::new();
    BASIS.get_or_init(|| {
        let id = CMat::eye(2);
        let x = ndarray::array![[c(0., 0.), c(1., 0.)], [c(1., 0.), c(0., 0.)]];
        let y = ndarray::array![[c(0., 0.), c(0., -1.)], [c(0., 1.), c(0., 0.)]];
        let z = ndarray::array![[c(1., 0.), c(0., 0.)], [c(0., 0.), c(-1., 0.)]];
        let singles = [id, x, y, z];
        let mut words: Vec<CMat> = Vec::with_capacity(16);
        for a in &singles {
            for b in &singles {
                words.push(crate::linalg::kron(a, b));
            }
        }
        words.try_into().expect("exactly 16 words")
    })
}

/// Pauli coefficient vector of a 4×4 operator: a_m = tr(A_m†E)/4.
fn pauli_coefficients(e: &CMat) -> Array1<Complex64> {
    let basis = two_qubit_pauli_basis();
    Array1::from_iter(basis.iter().map(|a| {
        let mut tr = c(0.0, 0.0);
        for i in 0..4 {
            for j in 0..4 {
                // tr(A†E) with A Hermitian: Σ_ij conj(A[j,i])·... A† = A.
                tr += a[[j, i]].conj() * e[[j, i]];
            }
        }
        tr / 4.0
    }))
}

/// Normalized process vector of the ideal controlled-Z:
/// CZ = (II + IZ + ZI − ZZ)/2.
fn cz_process_vector() -> &'static Array1<Complex64> {
    static VEC: OnceLock<Array1<Complex64>> = OnceLock::new();
    VEC.get_or_init(|| {
        let mut v = Array1::zeros(16);
        v[0] = c(0.5, 0.0); // II
        v[3] = c(0.5, 0.0); // IZ
        v[12] = c(0.5, 0.0); // ZI
        v[15] = c(-0.5, 0.0); // ZZ
        v
    })
}

/// Expand a logical Kraus operator in the Pauli basis and score it against
/// the ideal controlled-Z: returns (χ, F_p, trace weight ‖a‖²). The
/// normalization makes F_p a post-selected fidelity — insensitive to the
/// overall weight that projection removed.
pub fn chi_and_fidelity(e1: &CMat) -> Result<(ProcessMatrix, f64, f64), Error> {
    if e1.nrows() != 4 || e1.ncols() != 4 {
        return Err(Error::DimensionMismatch {
            expected: 4,
            got: e1.nrows().max(e1.ncols()),
        });
    }
    if fro_norm(e1) < 1e-14 {
        return Err(Error::DegenerateProjection {
            residual: fro_norm(e1),
        });
    }
    let a = pauli_coefficients(e1);
    let weight: f64 = a.iter().map(|z| z.norm_sqr()).sum();
    let overlap: Complex64 = cz_process_vector()
        .iter()
        .zip(a.iter())
        .map(|(ci, ai)| ci.conj() * ai)
        .sum();
    let fp = overlap.norm_sqr() / weight;
    let mut chi = CMat::zeros((16, 16));
    for i in 0..16 {
        for j in 0..16 {
            chi[[i, j]] = a[i] * a[j].conj() / weight;
        }
    }
    Ok((ProcessMatrix { chi }, fp, weight))
}

/// Project a noisy full-space unitary onto a 4-dim tomography basis and
/// dress it with the calibrated frame; bases are tried in order and the
/// first with non-negligible weight wins (the later ones only matter when
/// noise has emptied a gauge block).
pub fn logical_kraus(
    u: &Operator,
    bases: &[CMat],
    frame: &LocalFrame,
) -> Result<CMat, Error> {
    let mut worst = f64::INFINITY;
    for b in bases {
        let projected = dagger(b).dot(u.matrix()).dot(b);
        let norm = fro_norm(&projected);
        if norm >= 1e-8 {
            return Ok(frame.align(&projected));
        }
        worst = worst.min(norm);
    }
    Err(Error::DegenerateProjection { residual: worst })
}

/// Frozen scoring machinery for one gate on one layout: the calibrated
/// local frame, the tomography bases in fallback order, and the full
/// logical pair basis for leakage.
pub struct Tomography {
    frame: LocalFrame,
    blocks: Vec<CMat>,
    pair: CMat,
    pair_cols: usize,
}

impl Tomography {
    /// Calibrate on the noiseless gate: FourQubit scores in the logical
    /// pair basis; ThreeQubit scores in the (1,1) gauge block with the
    /// fallback order (1,1), (1,−1), (1,0), (0,0).
    pub fn calibrate(
        params: &PulseParameters,
        layout: &EncodingLayout,
    ) -> Result<Self, Error> {
        let pair = pair_basis(layout)?;
        let blocks: Vec<CMat> = match layout.kind() {
            EncodingKind::FourQubit => vec![pair.matrix().clone()],
            EncodingKind::ThreeQubit => [
                GaugeBlockLabel::OneOne,
                GaugeBlockLabel::OneMinusOne,
                GaugeBlockLabel::OneZero,
                GaugeBlockLabel::ZeroZero,
            ]
            .iter()
            .map(|&label| {
                gauge_block_basis(layout, label).map(|b| b.matrix().clone())
            })
            .collect::<Result<_, _>>()?,
        };
        let u0 = gate_unitary(params, layout)?;
        let projected0 = dagger(&blocks[0]).dot(u0.matrix()).dot(&blocks[0]);
        let frame = calibrate_local_frame(&projected0)?;
        let pair_cols = pair.num_columns();
        Ok(Self {
            frame,
            blocks,
            pair: pair.matrix().clone(),
            pair_cols,
        })
    }

    pub fn frame(&self) -> &LocalFrame {
        &self.frame
    }

    pub fn tomography_bases(&self) -> &[CMat] {
        &self.blocks
    }

    /// Score one noisy full-space unitary: (post-selected process
    /// fidelity, leakage out of the logical pair space).
    pub fn evaluate(&self, u: &Operator) -> Result<(f64, f64), Error> {
        let pair_projected = dagger(&self.pair).dot(u.matrix()).dot(&self.pair);
        let weight: f64 = pair_projected.iter().map(|z| z.norm_sqr()).sum();
        let leak = (1.0 - weight / self.pair_cols as f64).clamp(0.0, 1.0);
        let e1 = logical_kraus(u, &self.blocks, &self.frame)?;
        let (_, fp, _) = chi_and_fidelity(&e1)?;
        Ok((fp, leak))
    }
}

/// Index machinery for the exact tensor factorization of the noisy
/// evolution. Every pulse generator acts on the four gate sites only, so
/// each noisy propagator splits as (16×16 on the gate sites) ⊗ (one 2×2
/// field rotation per spectator site) — nothing is approximated, the
/// spectators simply never couple to the pulses.
struct GateSiteFactors {
    n: usize,
    /// Full-space index contribution of each 4-bit gate-site word
    /// (plaquette order; bit 3 of the word is the first gate site).
    gate_indices: [usize; 16],
    /// Full-space indices whose gate-site bits are all zero.
    rest_indices: Vec<usize>,
    /// Sites never touched by a pulse generator, ascending.
    spectators: Vec<Site>,
}

impl GateSiteFactors {
    fn new(layout: &EncodingLayout) -> Self {
        let n = layout.num_sites();
        let gate_sites = layout.gate_sites();
        let shifts: Vec<usize> = gate_sites.iter().map(|s| n - s.0).collect();
        let mut gate_indices = [0usize; 16];
        for (a, idx) in gate_indices.iter_mut().enumerate() {
            for (k, shift) in shifts.iter().enumerate() {
                *idx |= ((a >> (3 - k)) & 1) << shift;
            }
        }
        let gate_mask: usize = shifts.iter().map(|s| 1usize << s).sum();
        let rest_indices: Vec<usize> =
            (0..1usize << n).filter(|i| i & gate_mask == 0).collect();
        let spectators: Vec<Site> = (1..=n)
            .map(Site)
            .filter(|s| !gate_sites.contains(s))
            .collect();
        Self {
            n,
            gate_indices,
            rest_indices,
            spectators,
        }
    }

    /// 16×16 restriction of a full-space operator acting as the identity
    /// on every spectator site, in the same bit order as `gate_indices`
    /// (so mini-register site k+1 is gate site k of the layout).
    fn restrict(&self, h: &CMat) -> CMat {
        let mut out = CMat::zeros((16, 16));
        for a in 0..16 {
            for b in 0..16 {
                out[[a, b]] = h[[self.gate_indices[a], self.gate_indices[b]]];
            }
        }
        out
    }

    /// Apply (gate16 on the gate sites) ⊗ (2×2 rotations on the
    /// spectators) to a slab of full-space columns. `spectator_us` pairs
    /// up with `self.spectators`; `None` means identity spectators.
    fn apply(
        &self,
        gate16: &CMat,
        spectator_us: Option<&[CMat]>,
        slab: &CMat,
    ) -> CMat {
        let mut out = slab.clone();
        if let Some(us) = spectator_us {
            for (site, u) in self.spectators.iter().zip(us) {
                let mask = 1usize << (self.n - site.0);
                for col in 0..out.ncols() {
                    for i in 0..out.nrows() {
                        if i & mask == 0 {
                            let j = i | mask;
                            let lo = out[[i, col]];
                            let hi = out[[j, col]];
                            out[[i, col]] = u[[0, 0]] * lo + u[[0, 1]] * hi;
                            out[[j, col]] = u[[1, 0]] * lo + u[[1, 1]] * hi;
                        }
                    }
                }
            }
        }
        let mut gathered = [c(0.0, 0.0); 16];
        for col in 0..out.ncols() {
            for &rest in &self.rest_indices {
                for (a, g) in gathered.iter_mut().enumerate() {
                    *g = out[[rest | self.gate_indices[a], col]];
                }
                for a in 0..16 {
                    let mut acc = c(0.0, 0.0);
                    for b in 0..16 {
                        acc += gate16[[a, b]] * gathered[b];
                    }
                    out[[rest | self.gate_indices[a], col]] = acc;
                }
            }
        }
        out
    }
}

/// e^{−i t b⃗·σ⃗} on one site, in closed form.
fn field_rotation(b: [f64; 3], t: f64) -> CMat {
    let norm = (b[0] * b[0] + b[1] * b[1] + b[2] * b[2]).sqrt();
    let phi = norm * t;
    if phi == 0.0 {
        return CMat::eye(2);
    }
    let (nx, ny, nz) = (b[0] / norm, b[1] / norm, b[2] / norm);
    let (cp, sp) = (phi.cos(), phi.sin());
    ndarray::array![
        [c(cp, -sp * nz), c(-sp * ny, -sp * nx)],
        [c(sp * ny, -sp * nx), c(cp, sp * nz)],
    ]
}

/// Which field vector of a [`FieldAssignment`] a given site feels.
fn field_index(mode: FieldMode, layout: &EncodingLayout, site: Site) -> usize {
    match mode {
        FieldMode::Collective => usize::from(!layout.sites_a().contains(&site)),
        FieldMode::Individual => site.0 - 1,
    }
}

/// Everything derivable from the slab Y = U·B_pair: leakage from the
/// pair projection, and every tomography block via its coordinates in
/// the pair basis (B_block = B_pair·C, so B_block†UB_block = C†·PP·C).
struct Projections {
    pair: CMat,
    block_coords: Vec<CMat>,
}

impl Projections {
    fn new(tomo: &Tomography) -> Result<Self, Error> {
        let pair = tomo.pair.clone();
        let pd = dagger(&pair);
        let mut block_coords = Vec::with_capacity(tomo.blocks.len());
        for block in &tomo.blocks {
            let coords = pd.dot(block);
            if fro_norm(&(&pair.dot(&coords) - block)) > 1e-10 {
                return Err(Error::Calibration(
                    "a tomography block escapes the logical pair space".into(),
                ));
            }
            block_coords.push(coords);
        }
        Ok(Self { pair, block_coords })
    }

    fn score(&self, y: &CMat, frame: &LocalFrame) -> Result<(f64, f64), Error> {
        let pp = dagger(&self.pair).dot(y);
        let weight: f64 = pp.iter().map(|z| z.norm_sqr()).sum();
        let leak = (1.0 - weight / pp.ncols() as f64).clamp(0.0, 1.0);
        let mut worst = f64::INFINITY;
        for coords in &self.block_coords {
            let e = dagger(coords).dot(&pp).dot(coords);
            let norm = fro_norm(&e);
            if norm >= 1e-8 {
                let e1 = frame.align(&e);
                let (_, fp, _) = chi_and_fidelity(&e1)?;
                return Ok((fp, leak));
            }
            worst = worst.min(norm);
        }
        Err(Error::DegenerateProjection { residual: worst })
    }
}

/// Fast path for coupling jitter: the six propagators live on the gate
/// sites (16×16) and the spectators are exactly idle, so one sample
/// costs six small evolutions and one slab product.
struct JitterEvaluator {
    props: Vec<HermPropagator>,
    factors: GateSiteFactors,
    projections: Projections,
}

impl JitterEvaluator {
    fn new(tomo: &Tomography, layout: &EncodingLayout) -> Result<Self, Error> {
        let factors = GateSiteFactors::new(layout);
        let labels = [
            PulseLabel::Asymp,
            PulseLabel::Parallel,
            PulseLabel::Times,
            PulseLabel::Box,
            PulseLabel::Ring,
            PulseLabel::Asymp,
        ];
        let mut props = Vec::with_capacity(labels.len());
        for label in labels {
            let h = named_hamiltonian(label, layout, None)?;
            props.push(HermPropagator::new(&factors.restrict(h.matrix()))?);
        }
        Ok(Self {
            props,
            factors,
            projections: Projections::new(tomo)?,
        })
    }

    fn evaluate(
        &self,
        thetas: &[f64; 6],
        frame: &LocalFrame,
    ) -> Result<(f64, f64), Error> {
        let mut u = CMat::eye(16);
        // Slot order matches the operator product; rightmost acts first.
        for (prop, &theta) in self.props.iter().zip(thetas).rev() {
            u = prop.evolve(theta).dot(&u);
        }
        let y = self.factors.apply(&u, None, &self.projections.pair);
        self.projections.score(&y, frame)
    }
}

/// Fast path for quasi-static magnetic noise. Per sample: add the
/// gate-site Zeeman term to each distinct pulse generator (16×16),
/// re-diagonalize, multiply out the schedule, and rotate each spectator
/// by its accumulated field phase — the exact full-space evolution,
/// assembled factor by factor.
struct MagneticEvaluator {
    /// One entry per distinct generator: (16×16 restriction, member
    /// pulses as (time position, duration)).
    groups: Vec<(CMat, Vec<(usize, f64)>)>,
    num_pulses: usize,
    total_duration: f64,
    factors: GateSiteFactors,
    projections: Projections,
    /// Field-vector index felt by each gate site (plaquette order).
    gate_targets: [usize; 4],
    /// Field-vector index felt by each spectator site.
    spectator_targets: Vec<usize>,
}

impl MagneticEvaluator {
    fn new(
        tomo: &Tomography,
        params: &PulseParameters,
        layout: &EncodingLayout,
        mode: FieldMode,
    ) -> Result<Self, Error> {
        // label, restricted generator, (position, duration) of each use
        type PulseGroup = (PulseLabel, CMat, Vec<(usize, f64)>);
        let factors = GateSiteFactors::new(layout);
        let sequence = compile_sequence(params)?;
        let mut groups: Vec<PulseGroup> = Vec::new();
        for (pos, pulse) in sequence.pulses().iter().enumerate() {
            if let Some(group) =
                groups.iter_mut().find(|(l, _, _)| *l == pulse.label)
            {
                group.2.push((pos, pulse.duration));
            } else {
                let h = sequence.pulse_hamiltonian(pulse, layout)?;
                groups.push((
                    pulse.label,
                    factors.restrict(h.matrix()),
                    vec![(pos, pulse.duration)],
                ));
            }
        }
        let gate_sites = layout.gate_sites();
        let mut gate_targets = [0usize; 4];
        for (k, site) in gate_sites.iter().enumerate() {
            gate_targets[k] = field_index(mode, layout, *site);
        }
        let spectator_targets = factors
            .spectators
            .iter()
            .map(|&s| field_index(mode, layout, s))
            .collect();
        Ok(Self {
            num_pulses: sequence.pulses().len(),
            total_duration: sequence.total_duration(),
            groups: groups.into_iter().map(|(_, h, d)| (h, d)).collect(),
            factors,
            projections: Projections::new(tomo)?,
            gate_targets,
            spectator_targets,
        })
    }

    fn evaluate(
        &self,
        fields: &FieldAssignment,
        frame: &LocalFrame,
    ) -> Result<(f64, f64), Error> {
        // Zeeman term on the gate sites, in the 4-site mini register.
        let mut f16 = Operator::zeros(4);
        for (k, &target) in self.gate_targets.iter().enumerate() {
            let b = fields.vectors[target];
            for (comp, weight) in [
                (SpinComponent::X, b[0]),
                (SpinComponent::Y, b[1]),
                (SpinComponent::Z, b[2]),
            ] {
                if weight != 0.0 {
                    f16 = f16
                        .add(&pauli_op(comp, Site(k + 1), 4)?.scaled(c(weight, 0.0)))?;
                }
            }
        }
        let f16 = f16.into_matrix();
        let mut factors16: Vec<Option<CMat>> = vec![None; self.num_pulses];
        for (h, pulses) in &self.groups {
            let prop = HermPropagator::new(&(h + &f16))?;
            for &(pos, duration) in pulses {
                factors16[pos] = Some(prop.evolve(duration));
            }
        }
        let mut u = CMat::eye(16);
        for factor in factors16.into_iter() {
            let f = factor.expect("every pulse position belongs to a group");
            u = f.dot(&u);
        }
        let spectator_us: Vec<CMat> = self
            .spectator_targets
            .iter()
            .map(|&t| field_rotation(fields.vectors[t], self.total_duration))
            .collect();
        let y = self
            .factors
            .apply(&u, Some(&spectator_us), &self.projections.pair);
        self.projections.score(&y, frame)
    }
}

/// Run a Monte-Carlo sweep over the strength grid. Pure function of
/// (config, params, layout): the per-sample RNG streams make results
/// independent of thread scheduling.
pub fn noise_sweep(
    config: &NoiseConfig,
    params: &PulseParameters,
    layout: &EncodingLayout,
) -> Result<Vec<SweepPoint>, Error> {
    config.validate()?;
    if layout.kind() != config.encoding {
        return Err(Error::WrongEncoding {
            expected: match config.encoding {
                EncodingKind::ThreeQubit => "ThreeQubit",
                EncodingKind::FourQubit => "FourQubit",
            },
        });
    }
    let tomo = Tomography::calibrate(params, layout)?;
    let mut points = Vec::with_capacity(config.strength_grid.len());

    match config.kind {
        NoiseKind::CouplingJitter => {
            let evaluator = JitterEvaluator::new(&tomo, layout)?;
            let base = params.to_array();
            for (si, &strength) in config.strength_grid.iter().enumerate() {
                let rows: Result<Vec<(f64, f64)>, Error> = (0..config.samples)
                    .into_par_iter()
                    .map(|k| {
                        let mut rng = sample_rng(config.seed, si, k);
                        let draw = sample_coupling_noise(strength, &mut rng);
                        let delta = jitter_offsets(config.jitter_model, params, draw);
                        let mut thetas = base;
                        for (t, d) in thetas.iter_mut().zip(&delta) {
                            *t += d;
                        }
                        evaluator.evaluate(&thetas, tomo.frame())
                    })
                    .collect();
                points.push(summarize(strength, &rows?));
            }
        }
        NoiseKind::MagneticCollective | NoiseKind::MagneticIndividual => {
            let mode = match config.kind {
                NoiseKind::MagneticCollective => FieldMode::Collective,
                _ => FieldMode::Individual,
            };
            let evaluator = MagneticEvaluator::new(&tomo, params, layout, mode)?;
            for (si, &strength) in config.strength_grid.iter().enumerate() {
                let rows: Result<Vec<(f64, f64)>, Error> = (0..config.samples)
                    .into_par_iter()
                    .map(|k| {
                        let mut rng = sample_rng(config.seed, si, k);
                        let fields =
                            sample_magnetic_fields(strength, mode, layout, &mut rng);
                        evaluator.evaluate(&fields, tomo.frame())
                    })
                    .collect();
                points.push(summarize(strength, &rows?));
            }
        }
    }
    Ok(points)
}

fn summarize(strength: f64, rows: &[(f64, f64)]) -> SweepPoint {
    let n = rows.len() as f64;
    let mean_fp = rows.iter().map(|r| r.0).sum::<f64>() / n;
    let mean_leakage = rows.iter().map(|r| r.1).sum::<f64>() / n;
    let stderr_fp = if rows.len() > 1 {
        let var = rows
            .iter()
            .map(|r| (r.0 - mean_fp).powi(2))
            .sum::<f64>()
            / (n - 1.0);
        (var / n).sqrt()
    } else {
        0.0
    };
    SweepPoint {
        strength,
        mean_fp,
        stderr_fp,
        mean_leakage,
    }
}

/// Least-squares coefficient of 1 − F̄_p = c·strength², fitted through the
/// origin over the given points; zero-strength points contribute nothing
/// and at least two distinct nonzero strengths are required.
pub fn quadratic_fit(points: &[SweepPoint]) -> Result<f64, Error> {
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    let mut distinct: Vec<f64> = Vec::new();
    for p in points {
        if p.strength > 0.0 {
            let x = p.strength * p.strength;
            sxx += x * x;
            sxy += x * (1.0 - p.mean_fp);
            if !distinct.iter().any(|d| (d - p.strength).abs() < 1e-15) {
                distinct.push(p.strength);
            }
        }
    }
    if distinct.len() < 2 {
        return Err(Error::InvalidParameter(
            "a quadratic fit needs at least two distinct nonzero strengths".into(),
        ));
    }
    Ok(sxy / sxx)
}

/// [`quadratic_fit`] restricted to strengths within [lo, hi].
pub fn quadratic_fit_window(
    points: &[SweepPoint],
    lo: f64,
    hi: f64,
) -> Result<f64, Error> {
    let window: Vec<SweepPoint> = points
        .iter()
        .filter(|p| p.strength >= lo && p.strength <= hi)
        .cloned()
        .collect();
    quadratic_fit(&window)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encoding::{leakage, project_to_logical};
    use crate::invariants::cz_matrix;
    use crate::linalg::max_abs;

    fn four_layout() -> EncodingLayout {
        EncodingLayout::standard(EncodingKind::FourQubit)
    }

    fn three_layout() -> EncodingLayout {
        EncodingLayout::standard(EncodingKind::ThreeQubit)
    }

    #[test]
    fn zero_epsilon_draws_the_zero_vector() {
        let mut rng = sample_rng(7, 0, 0);
        assert_eq!(sample_coupling_noise(0.0, &mut rng), [0.0; 6]);
    }

    #[test]
    fn identical_streams_reproduce_draws() {
        let a = sample_coupling_noise(0.3, &mut sample_rng(9, 2, 5));
        let b = sample_coupling_noise(0.3, &mut sample_rng(9, 2, 5));
        assert_eq!(a, b);
        let c = sample_coupling_noise(0.3, &mut sample_rng(9, 2, 6));
        assert_ne!(a, c);
    }

    #[test]
    fn coupling_draws_have_the_right_spread() {
        let mut rng = sample_rng(11, 0, 0);
        let n = 20_000;
        let mut sum = 0.0;
        let mut sumsq = 0.0;
        for _ in 0..n {
            let d = sample_coupling_noise(0.02, &mut rng);
            for v in d {
                sum += v;
                sumsq += v * v;
            }
        }
        let count = (6 * n) as f64;
        let mean = sum / count;
        let var = sumsq / count - mean * mean;
        assert!(mean.abs() < 5.0 * 0.02 / count.sqrt());
        assert!((var / (0.02 * 0.02) - 1.0).abs() < 0.05);
    }

    #[test]
    fn field_draws_match_their_mode() {
        let mut rng = sample_rng(3, 0, 0);
        let collective =
            sample_magnetic_fields(0.01, FieldMode::Collective, &four_layout(), &mut rng);
        assert_eq!(collective.vectors.len(), 2);
        let individual =
            sample_magnetic_fields(0.01, FieldMode::Individual, &four_layout(), &mut rng);
        assert_eq!(individual.vectors.len(), 8);
        let silent =
            sample_magnetic_fields(0.0, FieldMode::Individual, &three_layout(), &mut rng);
        assert!(silent.vectors.iter().all(|v| *v == [0.0; 3]));
    }

    #[test]
    fn uniform_global_field_annihilates_the_logical_basis() {
        let layout = four_layout();
        let b = [0.013, -0.007, 0.021];
        let fields = FieldAssignment {
            mode: FieldMode::Collective,
            vectors: vec![b, b],
        };
        let h = field_hamiltonian(&fields, &layout).unwrap();
        let basis = pair_basis(&layout).unwrap();
        let image = h.matrix().dot(basis.matrix());
        assert!(max_abs(&image) < 1e-12);
    }

    #[test]
    fn zero_noise_reproduces_the_noiseless_gate() {
        let layout = four_layout();
        let params = PulseParameters::cz_solution();
        let clean = gate_unitary(&params, &layout).unwrap();
        let coupled = noisy_gate_unitary(
            &params,
            &NoiseRealization::Coupling([0.0; 6]),
            &layout,
        )
        .unwrap();
        assert!(max_abs(&(coupled.matrix() - clean.matrix())) < 1e-11);
        let fields = FieldAssignment {
            mode: FieldMode::Individual,
            vectors: vec![[0.0; 3]; 8],
        };
        let quiet =
            noisy_gate_unitary(&params, &NoiseRealization::Magnetic(fields), &layout)
                .unwrap();
        assert!(max_abs(&(quiet.matrix() - clean.matrix())) < 1e-11);
    }

    #[test]
    fn a_two_pi_phase_offset_is_invisible_to_the_logical_gate() {
        let layout = four_layout();
        let params = PulseParameters::cz_solution();
        let basis = pair_basis(&layout).unwrap();
        let clean = project_to_logical(
            &gate_unitary(&params, &layout).unwrap(),
            &basis,
        )
        .unwrap();
        let mut delta = [0.0; 6];
        delta[1] = crate::pulse::TWO_PI;
        let shifted = project_to_logical(
            &noisy_gate_unitary(&params, &NoiseRealization::Coupling(delta), &layout)
                .unwrap(),
            &basis,
        )
        .unwrap();
        // Equal up to a global phase.
        let overlap: Complex64 = clean
            .iter()
            .zip(shifted.iter())
            .map(|(a, b)| a.conj() * b)
            .sum();
        let phase = overlap / overlap.norm();
        let aligned = shifted.mapv(|z| z / phase);
        assert!(max_abs(&(&aligned - &clean)) < 1e-9);
    }

    #[test]
    fn equal_collective_fields_leak_nothing_in_the_four_qubit_code() {
        let layout = four_layout();
        let params = PulseParameters::cz_solution();
        let b = [0.02, 0.015, -0.01];
        let fields = FieldAssignment {
            mode: FieldMode::Collective,
            vectors: vec![b, b],
        };
        let u =
            noisy_gate_unitary(&params, &NoiseRealization::Magnetic(fields), &layout)
                .unwrap();
        let l = leakage(&u, &pair_basis(&layout).unwrap()).unwrap();
        assert!(l < 1e-10, "leakage = {l:e}");
    }

    #[test]
    fn fidelity_of_reference_kraus_operators() {
        let (chi, fp, weight) = chi_and_fidelity(&cz_matrix()).unwrap();
        assert!((fp - 1.0).abs() < 1e-12);
        assert!((weight - 1.0).abs() < 1e-12);
        let trace: Complex64 = chi.matrix().diag().sum();
        assert!((trace - c(1.0, 0.0)).norm() < 1e-12);

        let (_, fp_id, _) = chi_and_fidelity(&CMat::eye(4)).unwrap();
        assert!((fp_id - 0.25).abs() < 1e-12);

        let half_cz = cz_matrix().mapv(|z| z * 0.5);
        let (_, fp_half, weight_half) = chi_and_fidelity(&half_cz).unwrap();
        assert!((fp_half - 1.0).abs() < 1e-12);
        assert!((weight_half - 0.25).abs() < 1e-12);

        assert!(chi_and_fidelity(&CMat::zeros((4, 4))).is_err());
    }

    #[test]
    fn process_matrix_is_hermitian_normalized_and_rank_one() {
        let e = cz_matrix().dot(&CMat::eye(4).mapv(|z| z * c(0.8, 0.1)));
        let (chi, _, _) = chi_and_fidelity(&e).unwrap();
        let m = chi.matrix();
        assert!(crate::linalg::hermiticity_error(m) < 1e-12);
        let trace: Complex64 = m.diag().sum();
        assert!((trace - c(1.0, 0.0)).norm() < 1e-12);
        // Rank one: χ² = χ.
        assert!(max_abs(&(m.dot(m) - m)) < 1e-12);
    }

    #[test]
    fn noiseless_kraus_is_cz_in_both_encodings() {
        let params = PulseParameters::cz_solution();
        for layout in [four_layout(), three_layout()] {
            let tomo = Tomography::calibrate(&params, &layout).unwrap();
            let u = gate_unitary(&params, &layout).unwrap();
            let e1 = logical_kraus(&u, tomo.tomography_bases(), tomo.frame()).unwrap();
            assert!(
                max_abs(&(&e1 - &cz_matrix())) < 1e-9,
                "encoding {:?}",
                layout.kind()
            );
        }
    }

    #[test]
    fn sweeps_are_deterministic_and_exact_at_zero_strength() {
        let params = PulseParameters::cz_solution();
        let layout = four_layout();
        let config = NoiseConfig {
            kind: NoiseKind::CouplingJitter,
            strength_grid: vec![0.0, 0.02],
            samples: 8,
            seed: 5,
            encoding: EncodingKind::FourQubit,
            jitter_model: JitterModel::SixPhase,
        };
        let a = noise_sweep(&config, &params, &layout).unwrap();
        let b = noise_sweep(&config, &params, &layout).unwrap();
        assert_eq!(a.len(), 2);
        assert!((a[0].mean_fp - 1.0).abs() < 1e-9, "fp = {}", a[0].mean_fp);
        assert!(a[0].mean_leakage < 1e-9);
        assert_eq!(a[0].mean_fp.to_bits(), b[0].mean_fp.to_bits());
        assert_eq!(a[1].mean_fp.to_bits(), b[1].mean_fp.to_bits());
        assert_eq!(a[1].stderr_fp.to_bits(), b[1].stderr_fp.to_bits());
    }

    #[test]
    fn five_pulse_offsets_keep_the_ring_fraction_and_merge_the_times_phase() {
        let params = PulseParameters::cz_solution();
        let draw = [0.3, -0.2, 0.15, 0.05, -0.4, 9.0];
        let d = jitter_offsets(JitterModel::FivePulse, &params, draw);
        let alpha = params.theta_ring / params.theta_box;
        assert_eq!(d[5], draw[0]); // second asymmetric pulse fires first
        assert_eq!(d[3], draw[1]); // merged pulse offset lands on box
        assert!((d[4] - alpha * draw[1]).abs() < 1e-15); // ring tracks box
        assert!((d[2] - (draw[1] + draw[2])).abs() < 1e-15);
        assert_eq!(d[1], draw[3]);
        assert_eq!(d[0], draw[4]);
        // the perturbed sequence still satisfies the ring-fraction
        // constraint, so its five-pulse compilation is exact
        let mut thetas = params.to_array();
        for (t, o) in thetas.iter_mut().zip(&d) {
            *t += o;
        }
        let perturbed = PulseParameters::from_array(thetas);
        let seq = compile_sequence(&perturbed).unwrap();
        let direct = gate_unitary(&perturbed, &four_layout()).unwrap();
        let compiled = seq.unitary(&four_layout()).unwrap();
        let diff = direct.matrix() - compiled.matrix();
        assert!(fro_norm(&diff) < 1e-10);
        // identity mapping for the default model
        assert_eq!(jitter_offsets(JitterModel::SixPhase, &params, draw), draw);
    }

    #[test]
    fn five_pulse_jitter_is_gentler_than_six_phase_jitter() {
        let params = PulseParameters::cz_solution();
        let layout = four_layout();
        let base = NoiseConfig {
            kind: NoiseKind::CouplingJitter,
            strength_grid: vec![0.02],
            samples: 60,
            seed: 3,
            encoding: EncodingKind::FourQubit,
            jitter_model: JitterModel::SixPhase,
        };
        let five = NoiseConfig {
            jitter_model: JitterModel::FivePulse,
            ..base.clone()
        };
        let a = noise_sweep(&base, &params, &layout).unwrap();
        let b = noise_sweep(&five, &params, &layout).unwrap();
        // same draws, different knobs: without the correlated times/box
        // error and the ring jitter the fidelity dip shrinks several-fold
        assert!(b[0].mean_fp > a[0].mean_fp);
        assert!(1.0 - b[0].mean_fp < 0.5 * (1.0 - a[0].mean_fp));
    }

    #[test]
    fn jitter_fast_path_matches_the_full_space() {
        let params = PulseParameters::cz_solution();
        for layout in [four_layout(), three_layout()] {
            let tomo = Tomography::calibrate(&params, &layout).unwrap();
            let evaluator = JitterEvaluator::new(&tomo, &layout).unwrap();
            let delta = [0.011, -0.02, 0.007, 0.015, -0.004, 0.009];
            let mut thetas = params.to_array();
            for (t, d) in thetas.iter_mut().zip(&delta) {
                *t += d;
            }
            let (fp_fast, leak_fast) =
                evaluator.evaluate(&thetas, tomo.frame()).unwrap();
            let u = noisy_gate_unitary(
                &params,
                &NoiseRealization::Coupling(delta),
                &layout,
            )
            .unwrap();
            let (fp_full, leak_full) = tomo.evaluate(&u).unwrap();
            assert!(
                (fp_fast - fp_full).abs() < 1e-9,
                "{:?}: {fp_fast} vs {fp_full}",
                layout.kind()
            );
            assert!((leak_fast - leak_full).abs() < 1e-10);
        }
    }

    #[test]
    fn gate_site_factorization_reproduces_full_space_operators() {
        // Pulse generators act as the identity on spectator sites, so
        // restrict → apply must reproduce the full operator on any slab.
        for layout in [four_layout(), three_layout()] {
            let factors = GateSiteFactors::new(&layout);
            let dim = 1 << layout.num_sites();
            let mut rng = sample_rng(17, 0, 0);
            let normal = Normal::new(0.0, 1.0).unwrap();
            let slab = CMat::from_shape_fn((dim, 3), |_| {
                c(normal.sample(&mut rng), normal.sample(&mut rng))
            });
            for label in [
                PulseLabel::Asymp,
                PulseLabel::Parallel,
                PulseLabel::Times,
                PulseLabel::Box,
                PulseLabel::Ring,
            ] {
                let h = named_hamiltonian(label, &layout, None).unwrap();
                let direct = h.matrix().dot(&slab);
                let factored = factors.apply(&factors.restrict(h.matrix()), None, &slab);
                assert!(
                    max_abs(&(&direct - &factored)) < 1e-12,
                    "{label:?} on {:?}",
                    layout.kind()
                );
            }
        }
    }

    #[test]
    fn field_rotation_matches_the_matrix_exponential() {
        let b = [0.03, -0.011, 0.019];
        let t = 16.7;
        let closed = field_rotation(b, t);
        let mut h = CMat::zeros((2, 2));
        h[[0, 1]] = c(b[0], -b[1]);
        h[[1, 0]] = c(b[0], b[1]);
        h[[0, 0]] = c(b[2], 0.0);
        h[[1, 1]] = c(-b[2], 0.0);
        let exact = crate::linalg::expm_herm(&h, t).unwrap();
        assert!(max_abs(&(&closed - &exact)) < 1e-12);
        assert!(max_abs(&(&field_rotation([0.0; 3], t) - &CMat::eye(2))) < 1e-15);
    }

    #[test]
    fn magnetic_fast_path_matches_the_full_space() {
        let params = PulseParameters::cz_solution();
        for layout in [four_layout(), three_layout()] {
            for mode in [FieldMode::Collective, FieldMode::Individual] {
                let tomo = Tomography::calibrate(&params, &layout).unwrap();
                let evaluator =
                    MagneticEvaluator::new(&tomo, &params, &layout, mode).unwrap();
                let fields = sample_magnetic_fields(
                    0.02,
                    mode,
                    &layout,
                    &mut sample_rng(23, 1, 4),
                );
                let (fp_fast, leak_fast) =
                    evaluator.evaluate(&fields, tomo.frame()).unwrap();
                let u = noisy_gate_unitary(
                    &params,
                    &NoiseRealization::Magnetic(fields),
                    &layout,
                )
                .unwrap();
                let (fp_full, leak_full) = tomo.evaluate(&u).unwrap();
                assert!(
                    (fp_fast - fp_full).abs() < 1e-9,
                    "{mode:?} {:?}: {fp_fast} vs {fp_full}",
                    layout.kind()
                );
                assert!((leak_fast - leak_full).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn quadratic_fit_recovers_an_exact_model() {
        let points: Vec<SweepPoint> = [0.0, 0.01, 0.02, 0.03]
            .iter()
            .map(|&s| SweepPoint {
                strength: s,
                mean_fp: 1.0 - 35.4 * s * s,
                stderr_fp: 0.0,
                mean_leakage: 0.0,
            })
            .collect();
        let c = quadratic_fit(&points).unwrap();
        assert!((c - 35.4).abs() < 1e-10);
        let cw = quadratic_fit_window(&points, 0.0, 0.05).unwrap();
        assert!((cw - 35.4).abs() < 1e-10);
        assert!(quadratic_fit(&points[..1]).is_err());
    }

    #[test]
    fn config_validation_rejects_degenerate_sweeps() {
        let base = NoiseConfig {
            kind: NoiseKind::CouplingJitter,
            strength_grid: vec![0.01],
            samples: 4,
            seed: 0,
            encoding: EncodingKind::FourQubit,
            jitter_model: JitterModel::SixPhase,
        };
        let no_samples = NoiseConfig {
            samples: 0,
            ..base.clone()
        };
        assert!(no_samples.validate().is_err());
        let empty_grid = NoiseConfig {
            strength_grid: vec![],
            ..base.clone()
        };
        assert!(empty_grid.validate().is_err());
        let negative = NoiseConfig {
            strength_grid: vec![-0.1],
            ..base.clone()
        };
        assert!(negative.validate().is_err());
        let wrong_encoding = NoiseConfig {
            encoding: EncodingKind::ThreeQubit,
            ..base
        };
        assert!(noise_sweep(
            &wrong_encoding,
            &PulseParameters::cz_solution(),
            &four_layout()
        )
        .is_err());
    }
}

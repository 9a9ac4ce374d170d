//! Logical bases for the decoherence-free encodings: the 3-qubit DF
//! subsystem and the 4-qubit DF subspace, for one encoded qubit and for an
//! interacting pair.
//!
//! Three physical spins carry one logical qubit as a *subsystem*: the
//! logical value is the total spin of the first pair (singlet ↦ `0̄`,
//! triplet ↦ `1̄`), while the block's overall spin-1/2 orientation
//! `m = ±1` (in Σσz units) is a gauge degree of freedom the gate never
//! needs to control. Four spins carry one logical qubit as a genuine
//! *subspace*: the two-dimensional total-spin-zero sector,
//!
//! ```text
//! |0̄⁽⁴⁾⟩ = |ψ−⟩₁₂|ψ−⟩₃₄,
//! |1̄⁽⁴⁾⟩ = (|T₊T₋⟩ − |T₀T₀⟩ + |T₋T₊⟩)/√3,
//! ```
//!
//! which collective noise cannot see at all.
//!
//! Basis vectors for a single encoded qubit live on that qubit's own 3- or
//! 4-site register (sites in the order the layout lists them); bases for a
//! pair of encoded qubits are embedded in the full 2^n space.

use ndarray::{Array1, ArrayView1};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::linalg::{dagger, max_abs, CMat, Operator};
use crate::spin::{check_distinct_sites, Site};

/// Which decoherence-free encoding a layout uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EncodingKind {
    /// 3 physical sites per logical qubit (DF subsystem, gauge spin m = ±1).
    ThreeQubit,
    /// 4 physical sites per logical qubit (DF subspace, total spin 0).
    FourQubit,
}

impl EncodingKind {
    /// Physical sites per logical qubit.
    pub fn block_size(self) -> usize {
        match self {
            EncodingKind::ThreeQubit => 3,
            EncodingKind::FourQubit => 4,
        }
    }

    /// Logical dimension of the two-encoded-qubit computational subspace
    /// (including gauge copies for the 3-qubit encoding).
    pub fn pair_basis_size(self) -> usize {
        match self {
            EncodingKind::ThreeQubit => 16,
            EncodingKind::FourQubit => 4,
        }
    }
}

/// Physical arrangement of two encoded qubits and the four sites the
/// entangling pulses act on.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EncodingLayout {
    kind: EncodingKind,
    sites_a: Vec<Site>,
    sites_b: Vec<Site>,
    gate_sites: [Site; 4],
}

impl EncodingLayout {
    /// Validate and build a layout. The two site lists must be disjoint and
    /// together cover sites 1..=n exactly; `gate_sites = (g1,g2,g3,g4)`
    /// must take g1, g2 from qubit A and g3, g4 from qubit B.
    pub fn new(
        kind: EncodingKind,
        sites_a: Vec<Site>,
        sites_b: Vec<Site>,
        gate_sites: [Site; 4],
    ) -> Result<Self, Error> {
        let block = kind.block_size();
        if sites_a.len() != block {
            return Err(Error::WrongSiteCount {
                expected: block,
                got: sites_a.len(),
            });
        }
        if sites_b.len() != block {
            return Err(Error::WrongSiteCount {
                expected: block,
                got: sites_b.len(),
            });
        }
        let n = 2 * block;
        let mut all: Vec<Site> = sites_a.iter().chain(sites_b.iter()).copied().collect();
        check_distinct_sites(&all, n)?;
        all.sort();
        // Distinct, in range 1..=n, and 2·block of them ⇒ they cover 1..=n.
        for (g, half) in [(gate_sites[0], &sites_a), (gate_sites[1], &sites_a)]
            .into_iter()
            .chain([(gate_sites[2], &sites_b), (gate_sites[3], &sites_b)])
        {
            if !half.contains(&g) {
                return Err(Error::InvalidParameter(format!(
                    "gate site {} does not belong to the required encoded qubit",
                    g.0
                )));
            }
        }
        check_distinct_sites(&gate_sites, n)?;
        Ok(Self {
            kind,
            sites_a,
            sites_b,
            gate_sites,
        })
    }

    /// The default arrangement: qubit A on sites 1..block, qubit B on the
    /// rest, and the gate acting on the logical-value-defining pair of each
    /// (the first two sites listed per qubit).
    pub fn standard(kind: EncodingKind) -> Self {
        let block = kind.block_size();
        let sites_a: Vec<Site> = (1..=block).map(Site).collect();
        let sites_b: Vec<Site> = (block + 1..=2 * block).map(Site).collect();
        let gate_sites = [sites_a[0], sites_a[1], sites_b[0], sites_b[1]];
        Self::new(kind, sites_a, sites_b, gate_sites).expect("standard layout is valid")
    }

    pub fn kind(&self) -> EncodingKind {
        self.kind
    }

    /// Total number of physical sites (6 or 8).
    pub fn num_sites(&self) -> usize {
        self.sites_a.len() + self.sites_b.len()
    }

    pub fn sites_a(&self) -> &[Site] {
        &self.sites_a
    }

    pub fn sites_b(&self) -> &[Site] {
        &self.sites_b
    }

    /// The four sites (g1, g2, g3, g4) the entangling pulses act on.
    pub fn gate_sites(&self) -> [Site; 4] {
        self.gate_sites
    }
}

/// Gauge-block label (S_total, m_total) for a pair of 3-qubit encoded
/// qubits: the two gauge spin-1/2s add to total spin 1 or 0.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum GaugeBlockLabel {
    /// (1, 1): both gauge spins up.
    OneOne,
    /// (1, 0): symmetric combination.
    OneZero,
    /// (1, −1): both gauge spins down.
    OneMinusOne,
    /// (0, 0): antisymmetric combination.
    ZeroZero,
}

impl GaugeBlockLabel {
    pub const ALL: [GaugeBlockLabel; 4] = [
        GaugeBlockLabel::OneOne,
        GaugeBlockLabel::OneZero,
        GaugeBlockLabel::OneMinusOne,
        GaugeBlockLabel::ZeroZero,
    ];

    /// (S_total, m_total) in spin-1/2 units.
    pub fn quantum_numbers(self) -> (i32, i32) {
        match self {
            GaugeBlockLabel::OneOne => (1, 1),
            GaugeBlockLabel::OneZero => (1, 0),
            GaugeBlockLabel::OneMinusOne => (1, -1),
            GaugeBlockLabel::ZeroZero => (0, 0),
        }
    }
}

impl std::fmt::Display for GaugeBlockLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let (s, m) = self.quantum_numbers();
        write!(f, "({s},{m})")
    }
}

/// An ordered set of orthonormal state vectors spanning a logical (or
/// logical-plus-gauge) subspace, stored as the columns of a matrix.
#[derive(Debug, Clone)]
pub struct LogicalBasis {
    qubits: usize,
    columns: CMat,
    labels: Vec<String>,
}

impl LogicalBasis {
    /// Wrap a column matrix, checking dimensions and orthonormality
    /// (`‖B†B − I‖` < 1e-12 in max-norm).
    pub fn new(qubits: usize, columns: CMat, labels: Vec<String>) -> Result<Self, Error> {
        let dim = 1usize << qubits;
        if columns.nrows() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: columns.nrows(),
            });
        }
        if labels.len() != columns.ncols() {
            return Err(Error::DimensionMismatch {
                expected: columns.ncols(),
                got: labels.len(),
            });
        }
        let mut gram = dagger(&columns).dot(&columns);
        for i in 0..gram.nrows() {
            gram[[i, i]] -= Complex64::new(1.0, 0.0);
        }
        let residual = max_abs(&gram);
        if residual > 1e-12 {
            return Err(Error::InvalidParameter(format!(
                "basis columns are not orthonormal (residual {residual:.3e})"
            )));
        }
        Ok(Self {
            qubits,
            columns,
            labels,
        })
    }

    /// Number of physical qubits of the space the columns live in.
    pub fn qubits(&self) -> usize {
        self.qubits
    }

    /// Dimension of the ambient space (2^qubits).
    pub fn space_dim(&self) -> usize {
        self.columns.nrows()
    }

    pub fn num_columns(&self) -> usize {
        self.columns.ncols()
    }

    /// The stacked column matrix B (space_dim × num_columns).
    pub fn matrix(&self) -> &CMat {
        &self.columns
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn column(&self, k: usize) -> ArrayView1<'_, Complex64> {
        self.columns.column(k)
    }

    /// Rank-k projector B B† onto the spanned subspace.
    pub fn projector(&self) -> CMat {
        self.columns.dot(&dagger(&self.columns))
    }
}

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

/// Two-site singlet (|01⟩ − |10⟩)/√2 as a 4-vector (first site is the
/// most significant bit; |0⟩ = spin up).
fn singlet() -> Array1<Complex64> {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    Array1::from(vec![c(0.0), c(s), c(-s), c(0.0)])
}

/// Two-site triplets T₊ = |00⟩, T₀ = (|01⟩ + |10⟩)/√2, T₋ = |11⟩.
fn triplet_plus() -> Array1<Complex64> {
    Array1::from(vec![c(1.0), c(0.0), c(0.0), c(0.0)])
}

fn triplet_zero() -> Array1<Complex64> {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    Array1::from(vec![c(0.0), c(s), c(s), c(0.0)])
}

fn triplet_minus() -> Array1<Complex64> {
    Array1::from(vec![c(0.0), c(0.0), c(0.0), c(1.0)])
}

fn ket0() -> Array1<Complex64> {
    Array1::from(vec![c(1.0), c(0.0)])
}

fn ket1() -> Array1<Complex64> {
    Array1::from(vec![c(0.0), c(1.0)])
}

/// Kronecker product of state vectors; the left factor takes the more
/// significant bits.
fn kron_vec(a: &Array1<Complex64>, b: &Array1<Complex64>) -> Array1<Complex64> {
    let mut out = Array1::zeros(a.len() * b.len());
    for (i, &ai) in a.iter().enumerate() {
        for (j, &bj) in b.iter().enumerate() {
            out[i * b.len() + j] = ai * bj;
        }
    }
    out
}

/// Place a product of register states onto named sites of an n-site space.
///
/// Each part is (site list, state vector over those sites in listed order);
/// the parts must together cover all n sites exactly once.
fn tensor_on_sites(
    n: usize,
    parts: &[(&[Site], &Array1<Complex64>)],
) -> Result<Array1<Complex64>, Error> {
    let all: Vec<Site> = parts.iter().flat_map(|(s, _)| s.iter().copied()).collect();
    check_distinct_sites(&all, n)?;
    if all.len() != n {
        return Err(Error::WrongSiteCount {
            expected: n,
            got: all.len(),
        });
    }
    for (sites, state) in parts {
        if state.len() != 1 << sites.len() {
            return Err(Error::DimensionMismatch {
                expected: 1 << sites.len(),
                got: state.len(),
            });
        }
    }
    let dim = 1usize << n;
    let mut out = Array1::zeros(dim);
    for f in 0..dim {
        let mut amp = c(1.0);
        for (sites, state) in parts {
            let m = sites.len();
            let mut idx = 0usize;
            for (k, s) in sites.iter().enumerate() {
                let bit = (f >> (n - s.0)) & 1;
                idx |= bit << (m - 1 - k);
            }
            amp *= state[idx];
            if amp.norm_sqr() == 0.0 {
                break;
            }
        }
        out[f] = amp;
    }
    Ok(out)
}

fn columns_from_states(qubits: usize, states: &[Array1<Complex64>]) -> CMat {
    let dim = 1usize << qubits;
    let mut m = CMat::zeros((dim, states.len()));
    for (k, s) in states.iter().enumerate() {
        m.column_mut(k).assign(s);
    }
    m
}

/// Register-level states of one 4-qubit encoded value, ordered [|0̄⟩, |1̄⟩].
fn four_qubit_states() -> [Array1<Complex64>; 2] {
    let zero = kron_vec(&singlet(), &singlet());
    let s3 = 3.0_f64.sqrt();
    let one = (kron_vec(&triplet_plus(), &triplet_minus())
        - kron_vec(&triplet_zero(), &triplet_zero())
        + kron_vec(&triplet_minus(), &triplet_plus()))
    .mapv(|z| z / s3);
    [zero, one]
}

/// Register-level states of one 3-qubit encoded value, ordered
/// [|0̄₊₁⟩, |0̄₋₁⟩, |1̄₊₁⟩, |1̄₋₁⟩] (gauge label = Σσz eigenvalue ±1).
fn three_qubit_states() -> [Array1<Complex64>; 4] {
    let s2 = 2.0_f64.sqrt();
    let s3 = 3.0_f64.sqrt();
    let zero_up = kron_vec(&singlet(), &ket0());
    let zero_down = kron_vec(&singlet(), &ket1());
    let one_up = (kron_vec(&triplet_plus(), &ket1()).mapv(|z| z * s2)
        - kron_vec(&triplet_zero(), &ket0()))
    .mapv(|z| z / s3);
    let one_down = (kron_vec(&triplet_zero(), &ket1())
        - kron_vec(&triplet_minus(), &ket0()).mapv(|z| z * s2))
    .mapv(|z| z / s3);
    [zero_up, zero_down, one_up, one_down]
}

/// Logical basis of one 4-qubit encoded qubit on its own 4-site register
/// (the same register-level vectors describe either encoded qubit; sites
/// appear in the order the layout lists them).
pub fn logical_basis_four(layout: &EncodingLayout) -> Result<LogicalBasis, Error> {
    if layout.kind() != EncodingKind::FourQubit {
        return Err(Error::WrongEncoding {
            expected: "FourQubit",
        });
    }
    let states = four_qubit_states();
    LogicalBasis::new(
        4,
        columns_from_states(4, &states),
        vec!["0".into(), "1".into()],
    )
}

/// Logical ⊗ gauge basis of one 3-qubit encoded qubit on its own 3-site
/// register: the four states 0̄/1̄ × gauge m = ±1.
pub fn logical_basis_three(layout: &EncodingLayout) -> Result<LogicalBasis, Error> {
    if layout.kind() != EncodingKind::ThreeQubit {
        return Err(Error::WrongEncoding {
            expected: "ThreeQubit",
        });
    }
    let states = three_qubit_states();
    LogicalBasis::new(
        3,
        columns_from_states(3, &states),
        vec!["0,+1".into(), "0,-1".into(), "1,+1".into(), "1,-1".into()],
    )
}

/// Tensor-product basis for the two encoded qubits, embedded in the full
/// 2^n space: 4 columns |x̄ȳ⟩ (FourQubit) or 16 columns |x̄_a ȳ_b⟩ over
/// logical values and gauge labels (ThreeQubit). Qubit A is the more
/// significant logical factor.
pub fn pair_basis(layout: &EncodingLayout) -> Result<LogicalBasis, Error> {
    let n = layout.num_sites();
    let (states, labels): (Vec<Array1<Complex64>>, Vec<String>) = match layout.kind() {
        EncodingKind::FourQubit => {
            let reg = four_qubit_states();
            let mut states = Vec::with_capacity(4);
            let mut labels = Vec::with_capacity(4);
            for (x, sa) in reg.iter().enumerate() {
                for (y, sb) in reg.iter().enumerate() {
                    states.push(tensor_on_sites(
                        n,
                        &[(layout.sites_a(), sa), (layout.sites_b(), sb)],
                    )?);
                    labels.push(format!("{x}{y}"));
                }
            }
            (states, labels)
        }
        EncodingKind::ThreeQubit => {
            let reg = three_qubit_states();
            let tags = ["0,+1", "0,-1", "1,+1", "1,-1"];
            let mut states = Vec::with_capacity(16);
            let mut labels = Vec::with_capacity(16);
            for (ia, sa) in reg.iter().enumerate() {
                for (ib, sb) in reg.iter().enumerate() {
                    states.push(tensor_on_sites(
                        n,
                        &[(layout.sites_a(), sa), (layout.sites_b(), sb)],
                    )?);
                    labels.push(format!("{}|{}", tags[ia], tags[ib]));
                }
            }
            (states, labels)
        }
    };
    LogicalBasis::new(n, columns_from_states(n, &states), labels)
}

/// One gauge block of a pair of 3-qubit encoded qubits: the four logical
/// states |x̄ȳ⟩ whose two gauge spins are combined into the given total
/// (S, m) sector. Columns are ordered 00, 01, 10, 11.
pub fn gauge_block_basis(
    layout: &EncodingLayout,
    label: GaugeBlockLabel,
) -> Result<LogicalBasis, Error> {
    if layout.kind() != EncodingKind::ThreeQubit {
        return Err(Error::WrongEncoding {
            expected: "ThreeQubit",
        });
    }
    let n = layout.num_sites();
    let reg = three_qubit_states();
    // Register index of |x̄ with gauge m⟩: x*2 + (0 if m = +1 else 1).
    let idx = |x: usize, up: bool| x * 2 + usize::from(!up);
    let product = |ia: usize, ib: usize| {
        tensor_on_sites(
            n,
            &[(layout.sites_a(), &reg[ia]), (layout.sites_b(), &reg[ib])],
        )
    };
    let mut states = Vec::with_capacity(4);
    let mut labels = Vec::with_capacity(4);
    let s2 = std::f64::consts::FRAC_1_SQRT_2;
    for x in 0..2usize {
        for y in 0..2usize {
            let state = match label {
                GaugeBlockLabel::OneOne => product(idx(x, true), idx(y, true))?,
                GaugeBlockLabel::OneMinusOne => product(idx(x, false), idx(y, false))?,
                GaugeBlockLabel::OneZero => (product(idx(x, true), idx(y, false))?
                    + product(idx(x, false), idx(y, true))?)
                .mapv(|z| z * s2),
                GaugeBlockLabel::ZeroZero => (product(idx(x, true), idx(y, false))?
                    - product(idx(x, false), idx(y, true))?)
                .mapv(|z| z * s2),
            };
            states.push(state);
            labels.push(format!("{x}{y}"));
        }
    }
    LogicalBasis::new(n, columns_from_states(n, &states), labels)
}

/// Restrict a full-space operator to a logical basis: B† U B.
pub fn project_to_logical(u: &Operator, basis: &LogicalBasis) -> Result<CMat, Error> {
    if u.dim() != basis.space_dim() {
        return Err(Error::DimensionMismatch {
            expected: basis.space_dim(),
            got: u.dim(),
        });
    }
    Ok(dagger(basis.matrix()).dot(u.matrix()).dot(basis.matrix()))
}

/// Fraction of weight a unitary pushes out of the logical subspace:
/// `1 − ‖B†UB‖_F² / k`, zero iff the subspace is invariant under U.
pub fn leakage(u: &Operator, basis: &LogicalBasis) -> Result<f64, Error> {
    let projected = project_to_logical(u, basis)?;
    let k = basis.num_columns() as f64;
    let weight: f64 = projected.iter().map(|z| z.norm_sqr()).sum();
    Ok((1.0 - weight / k).clamp(0.0, 1.0))
}

/// Verify that each 4-qubit logical state decomposes over the 3-qubit
/// encoding on its first three sites plus a bare fourth spin as
/// `|x̄⁽⁴⁾⟩ = (|x̄⁽³⁾₊₁⟩|1⟩ − |x̄⁽³⁾₋₁⟩|0⟩)/√2`; returns the larger of the
/// two residual norms.
pub fn appendix_identity_check(layout: &EncodingLayout) -> Result<f64, Error> {
    if layout.kind() != EncodingKind::FourQubit {
        return Err(Error::WrongEncoding {
            expected: "FourQubit",
        });
    }
    let four = four_qubit_states();
    let three = three_qubit_states();
    let s2 = std::f64::consts::FRAC_1_SQRT_2;
    let mut worst = 0.0_f64;
    for x in 0..2usize {
        let up = &three[x * 2];
        let down = &three[x * 2 + 1];
        let combo =
            (kron_vec(up, &ket1()) - kron_vec(down, &ket0())).mapv(|z| z * s2);
        let residual = (&four[x] - &combo)
            .iter()
            .map(|z| z.norm_sqr())
            .sum::<f64>()
            .sqrt();
        worst = worst.max(residual);
    }
    Ok(worst)
}

//! Spin-1/2 operators on labelled sites: Pauli matrices, Heisenberg
//! exchange, collective spin, and the always-on supercoherent Hamiltonian.
//!
//! Conventions, shared crate-wide:
//!
//! * sites are labelled 1..=n, matching the hardware diagrams;
//! * site 1 is the most significant bit of the computational-basis index,
//!   so `|b_1 b_2 … b_n⟩` has index `b_1 2^{n−1} + … + b_n`;
//! * spin operators are bare Pauli matrices (eigenvalues ±1), not ħ/2
//!   units, so the exchange `E_ij = X_iX_j + Y_iY_j + Z_iZ_j` has
//!   eigenvalue −3 on a singlet pair and +1 on triplets.

use num_complex::Complex64;

use crate::error::Error;
use crate::linalg::{CMat, Operator};

/// A 1-based physical-site label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Site(pub usize);

impl Site {
    /// Bit position of this site counted from the most significant bit,
    /// i.e. site 1 ↦ shift `n−1`, site n ↦ shift 0.
    fn bit_shift(self, n: usize) -> Result<usize, Error> {
        if self.0 == 0 || self.0 > n {
            return Err(Error::SiteOutOfRange { site: self.0, n });
        }
        Ok(n - self.0)
    }
}

/// Verify a site list is within range and has no repeats.
pub fn check_distinct_sites(sites: &[Site], n: usize) -> Result<(), Error> {
    for (k, s) in sites.iter().enumerate() {
        s.bit_shift(n)?;
        if sites[..k].contains(s) {
            return Err(Error::InvalidPair { i: s.0, j: s.0 });
        }
    }
    Ok(())
}

/// A single-spin component, including the ladder combinations
/// `σ± = (σx ± iσy)/2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpinComponent {
    X,
    Y,
    Z,
    Plus,
    Minus,
}

fn one() -> Complex64 {
    Complex64::new(1.0, 0.0)
}

/// Pauli operator on one site of an n-site register.
pub fn pauli_op(component: SpinComponent, site: Site, n: usize) -> Result<Operator, Error> {
    let shift = site.bit_shift(n)?;
    let dim = 1usize << n;
    let mut m = CMat::zeros((dim, dim));
    for b in 0..dim {
        let bit = (b >> shift) & 1;
        let flipped = b ^ (1 << shift);
        match component {
            SpinComponent::X => m[[flipped, b]] = one(),
            SpinComponent::Y => {
                // Y|0⟩ = i|1⟩, Y|1⟩ = −i|0⟩.
                m[[flipped, b]] = if bit == 0 {
                    Complex64::new(0.0, 1.0)
                } else {
                    Complex64::new(0.0, -1.0)
                };
            }
            SpinComponent::Z => m[[b, b]] = if bit == 0 { one() } else { -one() },
            // σ+ = |0⟩⟨1|, σ− = |1⟩⟨0| (|0⟩ is spin-up, Z|0⟩ = +|0⟩).
            SpinComponent::Plus => {
                if bit == 1 {
                    m[[flipped, b]] = one();
                }
            }
            SpinComponent::Minus => {
                if bit == 0 {
                    m[[flipped, b]] = one();
                }
            }
        }
    }
    Operator::new(n, m)
}

/// Heisenberg exchange `E_ij = X_iX_j + Y_iY_j + Z_iZ_j` between two
/// distinct sites.
///
/// Built entry-by-entry from its action on basis states: parallel bits are
/// fixed with eigenvalue +1; anti-parallel bits pick up −1 plus twice the
/// bit-swapped state (`E = 2·SWAP − 1`).
pub fn exchange_op(i: Site, j: Site, n: usize) -> Result<Operator, Error> {
    if i == j {
        return Err(Error::InvalidPair { i: i.0, j: j.0 });
    }
    let si = i.bit_shift(n)?;
    let sj = j.bit_shift(n)?;
    let dim = 1usize << n;
    let mut m = CMat::zeros((dim, dim));
    for b in 0..dim {
        let bi = (b >> si) & 1;
        let bj = (b >> sj) & 1;
        if bi == bj {
            m[[b, b]] += one();
        } else {
            m[[b, b]] -= one();
            let swapped = b ^ (1 << si) ^ (1 << sj);
            m[[swapped, b]] += 2.0 * one();
        }
    }
    Operator::new(n, m)
}

/// Collective spin component `S_α = Σ_{s ∈ sites} σ_α^{(s)}`.
pub fn collective_spin_op(
    component: SpinComponent,
    sites: &[Site],
    n: usize,
) -> Result<Operator, Error> {
    check_distinct_sites(sites, n)?;
    let mut total = Operator::zeros(n);
    for &s in sites {
        total = total.add(&pauli_op(component, s, n)?)?;
    }
    Ok(total)
}

/// Total-spin Casimir `S² = S_x² + S_y² + S_z²` over a site set.
///
/// In these bare-Pauli units the eigenvalues are `4S(S+1)` for total spin
/// S, e.g. 0 / 8 / 24 for the S = 0 / 1 / 2 sectors of four spins.
pub fn total_spin_squared_op(sites: &[Site], n: usize) -> Result<Operator, Error> {
    let mut total = Operator::zeros(n);
    for comp in [SpinComponent::X, SpinComponent::Y, SpinComponent::Z] {
        let s = collective_spin_op(comp, sites, n)?;
        total = total.add(&s.compose(&s)?)?;
    }
    Ok(total)
}

/// Orthonormal basis (as a 2ⁿ × k column matrix) of the total-spin sector
/// with the given S² eigenvalue over all n sites, in Σσ⃗ units (eigenvalue
/// 4S(S+1)).
///
/// Every exchange generator commutes with S², so gate dynamics started in
/// a sector never leaves it; restricting all operators to this basis is an
/// exact reduction, not an approximation. The logical pair bases are total
/// singlets, so the S = 0 sector (eigenvalue 0; dimension 14 for n = 8)
/// carries the entire noiseless gate action.
pub fn total_spin_sector(n: usize, s2_eigenvalue: f64) -> Result<CMat, Error> {
    let s2 = total_spin_squared_op(&all_sites(n), n)?;
    let (vals, vecs) = crate::linalg::herm_eig(s2.matrix())?;
    let picked: Vec<usize> = vals
        .iter()
        .enumerate()
        .filter(|(_, &v)| (v - s2_eigenvalue).abs() < 1e-8)
        .map(|(i, _)| i)
        .collect();
    if picked.is_empty() {
        return Err(Error::InvalidParameter(format!(
            "no total-spin sector with S² eigenvalue {s2_eigenvalue} on {n} sites"
        )));
    }
    let mut w = CMat::zeros((1 << n, picked.len()));
    for (col, &i) in picked.iter().enumerate() {
        w.column_mut(col).assign(&vecs.column(i));
    }
    Ok(w)
}

/// The sites 1..=n.
pub fn all_sites(n: usize) -> Vec<Site> {
    (1..=n).map(Site).collect()
}

/// Always-on supercoherent Hamiltonian on one four-spin block:
/// `H_SC = J_SC Σ_{i<j} E_ij` over all six pairs.
///
/// Equal coupling on every pair makes `Σ E_ij = (S² − 12)/2`, so the
/// spectrum is a function of total spin alone: −6 J_SC on the two-fold
/// S = 0 ground space (where the logical qubit lives), −2 J_SC on S = 1,
/// and +6 J_SC on S = 2 — an energy gap of 4 J_SC protecting the qubit.
pub fn supercoherent_hamiltonian(
    j_sc: f64,
    sites: &[Site; 4],
    n: usize,
) -> Result<Operator, Error> {
    check_distinct_sites(sites, n)?;
    let mut h = Operator::zeros(n);
    for a in 0..4 {
        for b in (a + 1)..4 {
            h = h.add(&exchange_op(sites[a], sites[b], n)?)?;
        }
    }
    Ok(h.scaled(Complex64::new(j_sc, 0.0)))
}

//! Pulse Hamiltonians on the four gate sites, compilation of the
//! six-parameter sequence into five physical pulses, gate time, and the
//! ring-fraction splitting schedule.
//!
//! The gate is specified by six phases θ = Jτ/ħ, one per generator:
//!
//! ```text
//! H_≍ = E_{g1g2} + E_{g3g4}        H_∥ = E_{g1g4} + E_{g2g3}
//! H_× = E_{g1g3} + E_{g2g4}        H_□ = H_≍ + H_∥
//! H_↺ = E_{g1g2}E_{g3g4} + E_{g1g4}E_{g2g3} + E_{g1g3}E_{g2g4}
//! ```
//!
//! Because H_↺ commutes with H_□ and H_×, the three inner factors
//! collapse: U_× U_□ U_↺ = U_×′ U_S with U_S = exp(−iθ_□(H_□ + H_× +
//! αH_↺)), α = θ_↺/θ_□, and θ_×′ = θ_× − θ_□ (plus 2π if negative). The
//! ring term therefore costs no extra time — it runs concurrently with the
//! square pulse — and the whole gate is five back-to-back square pulses.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::encoding::EncodingLayout;
use crate::error::Error;
use crate::linalg::Operator;
use crate::spin::{exchange_op, Site};

pub const TWO_PI: f64 = 2.0 * std::f64::consts::PI;

/// Which generator a pulse drives.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PulseLabel {
    /// E_{g1g2} + E_{g3g4}: the two intra-qubit pairs.
    Asymp,
    /// E_{g1g4} + E_{g2g3}.
    Parallel,
    /// E_{g1g3} + E_{g2g4}: the diagonals.
    Times,
    /// All four square edges, H_≍ + H_∥.
    Box,
    /// The three-term ring exchange.
    Ring,
    /// H_□ + H_× + α H_↺; produced only by compilation.
    Symmetric,
}

/// The six search parameters of the gate sequence
/// U_gate = U_≍⁽¹⁾ U_∥ U_× U_□ U_↺ U_≍⁽²⁾ (rightmost factor earliest).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PulseParameters {
    pub theta_asymp1: f64,
    pub theta_parallel: f64,
    pub theta_times: f64,
    pub theta_box: f64,
    pub theta_ring: f64,
    pub theta_asymp2: f64,
}

impl PulseParameters {
    /// The published controlled-Z solution (all digits).
    pub fn cz_solution() -> Self {
        Self {
            theta_asymp1: 2.748893584737,
            theta_parallel: 4.319689917260,
            theta_times: 2.552544025744,
            theta_box: 3.730678055907,
            theta_ring: 0.589048619835,
            theta_asymp2: 0.785361375567,
        }
    }

    pub fn zero() -> Self {
        Self::from_array([0.0; 6])
    }

    /// Parameters in sequence order (asymp1, parallel, times, box, ring,
    /// asymp2).
    pub fn to_array(self) -> [f64; 6] {
        [
            self.theta_asymp1,
            self.theta_parallel,
            self.theta_times,
            self.theta_box,
            self.theta_ring,
            self.theta_asymp2,
        ]
    }

    pub fn from_array(a: [f64; 6]) -> Self {
        Self {
            theta_asymp1: a[0],
            theta_parallel: a[1],
            theta_times: a[2],
            theta_box: a[3],
            theta_ring: a[4],
            theta_asymp2: a[5],
        }
    }

    /// Each phase wrapped into the canonical reporting range [0, 2π).
    pub fn wrapped(self) -> Self {
        Self::from_array(self.to_array().map(|t| t.rem_euclid(TWO_PI)))
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|t| t.is_finite())
    }
}

/// One physical pulse of a compiled schedule. Durations are in θ units
/// (ħ/J_max with every pulse driven at the maximum coupling), so duration
/// equals phase; the ring phase of a Symmetric pulse costs no time of its
/// own.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CompiledPulse {
    pub label: PulseLabel,
    pub theta: f64,
    pub duration: f64,
}

/// The five-pulse schedule implementing the six-parameter sequence,
/// earliest pulse first.
#[derive(Debug, Clone, PartialEq)]
pub struct CompiledSequence {
    pulses: Vec<CompiledPulse>,
    alpha: f64,
}

impl CompiledSequence {
    /// Pulses in time order (earliest first).
    pub fn pulses(&self) -> &[CompiledPulse] {
        &self.pulses
    }

    /// Ring-to-square coupling ratio α = θ_↺/θ_□ of the Symmetric pulse.
    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// Total schedule duration in ħ/J_max units.
    pub fn total_duration(&self) -> f64 {
        self.pulses.iter().map(|p| p.duration).sum()
    }

    /// The Hamiltonian of one pulse of this schedule, embedded in the full
    /// space of the layout.
    pub fn pulse_hamiltonian(
        &self,
        pulse: &CompiledPulse,
        layout: &EncodingLayout,
    ) -> Result<Operator, Error> {
        let alpha = match pulse.label {
            PulseLabel::Symmetric => Some(self.alpha),
            _ => None,
        };
        named_hamiltonian(pulse.label, layout, alpha)
    }

    /// The unitary this schedule generates, multiplying the pulse
    /// propagators in time order.
    pub fn unitary(&self, layout: &EncodingLayout) -> Result<Operator, Error> {
        let mut u = Operator::identity(layout.num_sites());
        for pulse in &self.pulses {
            let h = self.pulse_hamiltonian(pulse, layout)?;
            u = h.evolve(pulse.theta)?.compose(&u)?;
        }
        Ok(u)
    }
}

/// Product of two exchange operators (they commute only when the pairs are
/// disjoint, which is the case for all ring terms).
fn exchange_product(
    pairs: [(Site, Site); 2],
    n: usize,
) -> Result<Operator, Error> {
    let a = exchange_op(pairs[0].0, pairs[0].1, n)?;
    let b = exchange_op(pairs[1].0, pairs[1].1, n)?;
    a.compose(&b)
}

/// Map the layout's gate sites onto the corners of the coupling plaquette.
///
/// The two encoded qubits sit side by side: qubit A's gate pair forms the
/// left edge of the square and qubit B's the right edge, with corners
/// numbered cyclically (A1, B1, B2, A2). Under this numbering the
/// intra-qubit exchanges are the vertical edges, i.e. the Parallel pulse,
/// while Asymp and Times couple across the qubits. This assignment is the
/// one (up to reflection, which acts identically on the code space) that
/// reproduces the published pulse solution at machine precision; the
/// alternative with intra-qubit Asymp leaks the code space almost entirely.
fn square_corners(layout: &EncodingLayout) -> [Site; 4] {
    let [g1, g2, g3, g4] = layout.gate_sites();
    [g1, g3, g4, g2]
}

/// Build a named pulse generator on the gate sites of a layout, embedded
/// in the full 2^n space. `alpha` must be supplied exactly for the
/// Symmetric label.
pub fn named_hamiltonian(
    label: PulseLabel,
    layout: &EncodingLayout,
    alpha: Option<f64>,
) -> Result<Operator, Error> {
    match (label, alpha) {
        (PulseLabel::Symmetric, None) => {
            return Err(Error::InvalidParameter(
                "the Symmetric pulse requires a ring fraction alpha".into(),
            ))
        }
        (PulseLabel::Symmetric, Some(_)) => {}
        (_, Some(_)) => {
            return Err(Error::InvalidParameter(
                "alpha is only meaningful for the Symmetric pulse".into(),
            ))
        }
        (_, None) => {}
    }
    let n = layout.num_sites();
    let [c1, c2, c3, c4] = square_corners(layout);
    let pair_sum = |p: (Site, Site), q: (Site, Site)| -> Result<Operator, Error> {
        exchange_op(p.0, p.1, n)?.add(&exchange_op(q.0, q.1, n)?)
    };
    match label {
        PulseLabel::Asymp => pair_sum((c1, c2), (c3, c4)),
        PulseLabel::Parallel => pair_sum((c1, c4), (c2, c3)),
        PulseLabel::Times => pair_sum((c1, c3), (c2, c4)),
        PulseLabel::Box => {
            named_hamiltonian(PulseLabel::Asymp, layout, None)?
                .add(&named_hamiltonian(PulseLabel::Parallel, layout, None)?)
        }
        PulseLabel::Ring => {
            let mut h = exchange_product([(c1, c2), (c3, c4)], n)?;
            h = h.add(&exchange_product([(c1, c4), (c2, c3)], n)?)?;
            h.add(&exchange_product([(c1, c3), (c2, c4)], n)?)
        }
        PulseLabel::Symmetric => {
            let alpha = alpha.expect("checked above");
            let mut h = named_hamiltonian(PulseLabel::Box, layout, None)?;
            h = h.add(&named_hamiltonian(PulseLabel::Times, layout, None)?)?;
            h.add(
                &named_hamiltonian(PulseLabel::Ring, layout, None)?
                    .scaled(Complex64::new(alpha, 0.0)),
            )
        }
    }
}

/// Pair couplings and ring coefficients of the microscopic four-site
/// Hamiltonian (higher-order hopping corrections to plain exchange).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeneralRingCoefficients {
    pub j_12: f64,
    pub j_13: f64,
    pub j_14: f64,
    pub j_23: f64,
    pub j_24: f64,
    pub j_34: f64,
    pub c_1234: f64,
    pub c_1324: f64,
    pub c_1342: f64,
}

impl GeneralRingCoefficients {
    /// Uniform pair coupling j with all three ring coefficients equal.
    pub fn uniform(j: f64, c: f64) -> Self {
        Self {
            j_12: j,
            j_13: j,
            j_14: j,
            j_23: j,
            j_24: j,
            j_34: j,
            c_1234: c,
            c_1324: c,
            c_1342: c,
        }
    }

    pub fn zero() -> Self {
        Self::uniform(0.0, 0.0)
    }
}

/// The full microscopic Hamiltonian on the gate sites:
/// Σ J_ij E_ij plus the three signed ring combinations
/// C_ijkl [E_ij E_kl + E_il E_jk − E_ik E_jl].
pub fn general_ring_hamiltonian(
    coeffs: &GeneralRingCoefficients,
    layout: &EncodingLayout,
) -> Result<Operator, Error> {
    let n = layout.num_sites();
    let [c1, c2, c3, c4] = square_corners(layout);
    let mut h = Operator::zeros(n);
    let pair_terms = [
        (coeffs.j_12, (c1, c2)),
        (coeffs.j_13, (c1, c3)),
        (coeffs.j_14, (c1, c4)),
        (coeffs.j_23, (c2, c3)),
        (coeffs.j_24, (c2, c4)),
        (coeffs.j_34, (c3, c4)),
    ];
    for (j, (a, b)) in pair_terms {
        if j != 0.0 {
            h = h.add(&exchange_op(a, b, n)?.scaled(Complex64::new(j, 0.0)))?;
        }
    }
    // The three disjoint pairings of the four sites.
    let e12e34 = exchange_product([(c1, c2), (c3, c4)], n)?;
    let e13e24 = exchange_product([(c1, c3), (c2, c4)], n)?;
    let e14e23 = exchange_product([(c1, c4), (c2, c3)], n)?;
    let ring_terms = [
        (coeffs.c_1234, [1.0, 1.0, -1.0]),
        (coeffs.c_1324, [-1.0, 1.0, 1.0]),
        (coeffs.c_1342, [1.0, -1.0, 1.0]),
    ];
    for (c, [w1234, w1423, w1324]) in ring_terms {
        if c == 0.0 {
            continue;
        }
        let term = e12e34
            .scaled(Complex64::new(c * w1234, 0.0))
            .add(&e14e23.scaled(Complex64::new(c * w1423, 0.0)))?
            .add(&e13e24.scaled(Complex64::new(c * w1324, 0.0)))?;
        h = h.add(&term)?;
    }
    Ok(h)
}

/// Collapse the six-parameter sequence into the five-pulse schedule,
/// merging the box and ring phases into one Symmetric pulse via the
/// commuting identity.
pub fn compile_sequence(params: &PulseParameters) -> Result<CompiledSequence, Error> {
    if !params.is_finite() {
        return Err(Error::InvalidParameter(
            "pulse phases must all be finite".into(),
        ));
    }
    if params.theta_box == 0.0 && params.theta_ring != 0.0 {
        return Err(Error::UndefinedRingFraction);
    }
    let alpha = if params.theta_ring == 0.0 {
        0.0
    } else {
        params.theta_ring / params.theta_box
    };
    let theta_times_prime = (params.theta_times - params.theta_box).rem_euclid(TWO_PI);
    let pulse = |label, theta: f64| CompiledPulse {
        label,
        theta,
        duration: theta,
    };
    Ok(CompiledSequence {
        pulses: vec![
            pulse(PulseLabel::Asymp, params.theta_asymp2),
            pulse(PulseLabel::Symmetric, params.theta_box),
            pulse(PulseLabel::Times, theta_times_prime),
            pulse(PulseLabel::Parallel, params.theta_parallel),
            pulse(PulseLabel::Asymp, params.theta_asymp1),
        ],
        alpha,
    })
}

/// The full gate unitary on the 2^n space of the layout.
pub fn gate_unitary(
    params: &PulseParameters,
    layout: &EncodingLayout,
) -> Result<Operator, Error> {
    compile_sequence(params)?.unitary(layout)
}

/// Total gate duration in ħ/J_max units:
/// T = θ_≍⁽¹⁾ + θ_∥ + θ_□ + θ_≍⁽²⁾ + (θ_× − θ_□) mod 2π.
///
/// The ring phase contributes no term: H_↺ runs concurrently with the
/// square pulse (τ_□ = τ_↺).
pub fn gate_time(params: &PulseParameters) -> f64 {
    params.theta_asymp1
        + params.theta_parallel
        + params.theta_box
        + params.theta_asymp2
        + (params.theta_times - params.theta_box).rem_euclid(TWO_PI)
}

/// Split the Symmetric pulse between two hardware-achievable ring
/// fractions α_a > α_b: durations (t_a, t_b) at unit coupling such that
/// t_a + t_b = θ_□ + 2πn and α_a t_a + α_b t_b = θ_↺.
///
/// The target fraction α⁽ⁿ⁾ = θ_↺/(θ_□ + 2πn) must lie strictly between
/// α_a and α_b for both durations to be positive; adding 2π windings (n)
/// trades gate time for a lower α⁽ⁿ⁾.
pub fn alpha_split(
    alpha_a: f64,
    alpha_b: f64,
    n: u32,
    params: &PulseParameters,
) -> Result<(f64, f64), Error> {
    let theta_box_n = params.theta_box + TWO_PI * f64::from(n);
    let alpha_n = if params.theta_ring == 0.0 {
        0.0
    } else if theta_box_n == 0.0 {
        return Err(Error::UndefinedRingFraction);
    } else {
        params.theta_ring / theta_box_n
    };
    if !(alpha_a > alpha_n && alpha_n > alpha_b) {
        return Err(Error::InfeasibleSplit {
            alpha_a,
            alpha_n,
            alpha_b,
        });
    }
    let t_a = theta_box_n * (alpha_n - alpha_b) / (alpha_a - alpha_b);
    let t_b = theta_box_n * (alpha_a - alpha_n) / (alpha_a - alpha_b);
    Ok((t_a, t_b))
}

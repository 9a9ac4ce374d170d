//! Pulse-sequence search: a seeded real-coded genetic algorithm for global
//! exploration, refined by a Nelder-Mead simplex, scored by distance from
//! the controlled-Z class plus a weighted leakage penalty.
//!
//! The objective is evaluated in the four-qubit encoding (a gate that
//! works there works in the three-qubit encoding too) and, by default, in
//! the reduced total-spin-0 sector: every generator conserves total spin,
//! so restricting to the 14-dimensional singlet sector of the 8-site space
//! is exact and two orders of magnitude faster than the full space.

use ndarray::Array1;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::encoding::{pair_basis, EncodingLayout};
use crate::error::Error;
use crate::invariants::fm_objective;
use crate::linalg::{dagger, CMat, HermPropagator};
use crate::pulse::{named_hamiltonian, PulseLabel, PulseParameters, TWO_PI};
use crate::spin::total_spin_sector;

/// Cap applied to the class-distance term when the projected gate is so
/// leaky that the Makhlin denominators degenerate; keeps the objective
/// finite so selection can still rank individuals by leakage.
const FM_CAP: f64 = 1e4;

/// Tunables for the search pipeline. Defaults are robust small-budget
/// settings for a six-dimensional smooth 2π-periodic objective.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct SearchConfig {
    pub population: usize,
    pub generations: usize,
    pub tournament_size: usize,
    pub crossover_prob: f64,
    pub mutation_prob: f64,
    pub mutation_sigma: f64,
    pub elite_count: usize,
    pub restarts: usize,
    pub nm_max_iter: usize,
    pub nm_tol_x: f64,
    pub nm_tol_f: f64,
    pub leakage_weight: f64,
    pub seed: u64,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            population: 60,
            generations: 500,
            tournament_size: 3,
            crossover_prob: 0.7,
            mutation_prob: 0.2,
            mutation_sigma: 0.3,
            elite_count: 2,
            restarts: 8,
            nm_max_iter: 20_000,
            nm_tol_x: 1e-12,
            nm_tol_f: 1e-14,
            leakage_weight: 10.0,
            seed: 42,
        }
    }
}

impl SearchConfig {
    pub fn validate(&self) -> Result<(), Error> {
        if self.population < 4 {
            return Err(Error::InvalidParameter(
                "population must be at least 4".into(),
            ));
        }
        for (name, p) in [
            ("crossover_prob", self.crossover_prob),
            ("mutation_prob", self.mutation_prob),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::InvalidParameter(format!(
                    "{name} must lie in [0, 1], got {p}"
                )));
            }
        }
        if self.tournament_size == 0 || self.tournament_size > self.population {
            return Err(Error::InvalidParameter(
                "tournament_size must be in 1..=population".into(),
            ));
        }
        if self.elite_count >= self.population {
            return Err(Error::InvalidParameter(
                "elite_count must be smaller than the population".into(),
            ));
        }
        if !(self.mutation_sigma.is_finite() && self.mutation_sigma >= 0.0) {
            return Err(Error::InvalidParameter(
                "mutation_sigma must be a finite non-negative number".into(),
            ));
        }
        if self.restarts == 0 {
            return Err(Error::InvalidParameter(
                "restarts must be at least 1".into(),
            ));
        }
        if !(self.leakage_weight.is_finite() && self.leakage_weight >= 0.0) {
            return Err(Error::InvalidParameter(
                "leakage_weight must be a finite non-negative number".into(),
            ));
        }
        Ok(())
    }
}

/// An ordered list of pulse generators to search over; slot k of a
/// parameter vector is the phase of the k-th factor in the operator
/// product (leftmost factor first, i.e. latest in time).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SequenceTemplate {
    labels: Vec<PulseLabel>,
}

impl SequenceTemplate {
    /// A template is valid when it is non-empty, contains no compiled
    /// Symmetric slots, and every Ring slot sits next to a Box slot so
    /// the two can later be merged into one physical pulse.
    pub fn new(labels: Vec<PulseLabel>) -> Result<Self, Error> {
        if labels.is_empty() {
            return Err(Error::InvalidParameter(
                "a sequence template needs at least one pulse".into(),
            ));
        }
        if labels.contains(&PulseLabel::Symmetric) {
            return Err(Error::InvalidParameter(
                "Symmetric pulses are produced by compilation, not searched over".into(),
            ));
        }
        for (k, &label) in labels.iter().enumerate() {
            if label == PulseLabel::Ring {
                let before = k > 0 && labels[k - 1] == PulseLabel::Box;
                let after = k + 1 < labels.len() && labels[k + 1] == PulseLabel::Box;
                if !(before || after) {
                    return Err(Error::InvalidParameter(
                        "every Ring slot must be adjacent to a Box slot".into(),
                    ));
                }
            }
        }
        Ok(Self { labels })
    }

    /// The six-slot template whose search produced the builtin solution:
    /// Asymp, Parallel, Times, Box, Ring, Asymp in operator order. Its
    /// parameter vector shares the layout of [`PulseParameters::to_array`].
    pub fn standard() -> Self {
        Self {
            labels: vec![
                PulseLabel::Asymp,
                PulseLabel::Parallel,
                PulseLabel::Times,
                PulseLabel::Box,
                PulseLabel::Ring,
                PulseLabel::Asymp,
            ],
        }
    }

    pub fn labels(&self) -> &[PulseLabel] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

/// Precomputed evaluator for one template on one layout: per-slot
/// propagators plus the logical pair basis, either in the full 2ⁿ space or
/// reduced to the total-singlet sector.
pub struct GateObjective {
    props: Vec<HermPropagator>,
    basis: CMat,
    dim: usize,
    leakage_weight: f64,
}

impl GateObjective {
    /// Evaluator on the exact total-spin-0 reduction (the default).
    pub fn reduced(
        template: &SequenceTemplate,
        layout: &EncodingLayout,
        leakage_weight: f64,
    ) -> Result<Self, Error> {
        let w = total_spin_sector(layout.num_sites(), 0.0)?;
        Self::build(template, layout, Some(&w), leakage_weight)
    }

    /// Evaluator on the full 2ⁿ space; a correctness fallback for tests.
    pub fn full_space(
        template: &SequenceTemplate,
        layout: &EncodingLayout,
        leakage_weight: f64,
    ) -> Result<Self, Error> {
        Self::build(template, layout, None, leakage_weight)
    }

    fn build(
        template: &SequenceTemplate,
        layout: &EncodingLayout,
        sector: Option<&CMat>,
        leakage_weight: f64,
    ) -> Result<Self, Error> {
        let full_basis = pair_basis(layout)?;
        let (basis, dim) = match sector {
            Some(w) => (dagger(w).dot(full_basis.matrix()), w.ncols()),
            None => (full_basis.matrix().clone(), 1 << layout.num_sites()),
        };
        let mut props = Vec::with_capacity(template.len());
        for &label in template.labels() {
            let h_full = named_hamiltonian(label, layout, None)?;
            let h = match sector {
                Some(w) => dagger(w).dot(h_full.matrix()).dot(w),
                None => h_full.into_matrix(),
            };
            props.push(HermPropagator::new(&h)?);
        }
        Ok(Self {
            props,
            basis,
            dim,
            leakage_weight,
        })
    }

    pub fn num_slots(&self) -> usize {
        self.props.len()
    }

    /// The projected 4×4 logical gate for a parameter vector.
    pub fn projected_gate(&self, thetas: &[f64]) -> Result<CMat, Error> {
        if thetas.len() != self.props.len() {
            return Err(Error::DimensionMismatch {
                expected: self.props.len(),
                got: thetas.len(),
            });
        }
        // Rightmost factor acts first; accumulate the product right-to-left.
        let mut u = CMat::eye(self.dim);
        for (prop, &theta) in self.props.iter().zip(thetas).rev() {
            u = prop.evolve(theta).dot(&u);
        }
        Ok(dagger(&self.basis).dot(&u).dot(&self.basis))
    }

    /// Class distance and leakage for a parameter vector. The distance is
    /// reported raw (possibly enormous for leaky gates); the objective
    /// caps it.
    pub fn metrics(&self, thetas: &[f64]) -> Result<(f64, f64), Error> {
        let projected = self.projected_gate(thetas)?;
        let weight: f64 = projected.iter().map(|z| z.norm_sqr()).sum();
        let leak = (1.0 - weight / 4.0).clamp(0.0, 1.0);
        let fm = fm_objective(&projected)?;
        Ok((fm, leak))
    }

    /// The scalar being minimized: capped class distance plus weighted
    /// leakage.
    pub fn value(&self, thetas: &[f64]) -> f64 {
        match self.metrics(thetas) {
            Ok((fm, leak)) => {
                let fm = if fm.is_finite() { fm.min(FM_CAP) } else { FM_CAP };
                fm + self.leakage_weight * leak
            }
            Err(_) => FM_CAP,
        }
    }
}

/// Outcome of one search stage (or of one full restart).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SearchResult {
    pub thetas: Vec<f64>,
    pub fm: f64,
    pub leakage: f64,
    pub objective: f64,
    pub evaluations: u64,
    pub converged: bool,
}

impl SearchResult {
    /// View a six-slot parameter vector as named pulse parameters.
    pub fn pulse_parameters(&self) -> Option<PulseParameters> {
        if self.thetas.len() == 6 {
            let mut a = [0.0; 6];
            a.copy_from_slice(&self.thetas);
            Some(PulseParameters::from_array(a))
        } else {
            None
        }
    }
}

fn stream_rng(seed: u64, generation: u32, index: u32) -> ChaCha12Rng {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    rng.set_stream(((generation as u64) << 32) | index as u64);
    rng
}

fn result_from(
    objective: &GateObjective,
    thetas: Vec<f64>,
    evaluations: u64,
    converged: bool,
) -> Result<SearchResult, Error> {
    let (fm, leakage) = objective.metrics(&thetas)?;
    let value = objective.value(&thetas);
    Ok(SearchResult {
        thetas,
        fm,
        leakage,
        objective: value,
        evaluations,
        converged,
    })
}

/// Global genetic search over a template. Deterministic for a given seed
/// regardless of thread count: all random draws happen in per-(generation,
/// index) substreams, and only the pure fitness evaluations run in
/// parallel.
pub fn genetic_search(
    template: &SequenceTemplate,
    config: &SearchConfig,
    layout: &EncodingLayout,
) -> Result<SearchResult, Error> {
    let objective = GateObjective::reduced(template, layout, config.leakage_weight)?;
    genetic_search_with(&objective, config, &[])
}

/// Genetic search with part of the initial population supplied by the
/// caller (clamped to the population size); the remainder is drawn
/// uniformly.
pub fn genetic_search_seeded(
    template: &SequenceTemplate,
    config: &SearchConfig,
    layout: &EncodingLayout,
    initial: &[Vec<f64>],
) -> Result<SearchResult, Error> {
    let objective = GateObjective::reduced(template, layout, config.leakage_weight)?;
    genetic_search_with(&objective, config, initial)
}

pub(crate) fn genetic_search_with(
    objective: &GateObjective,
    config: &SearchConfig,
    initial: &[Vec<f64>],
) -> Result<SearchResult, Error> {
    config.validate()?;
    let dim = objective.num_slots();
    for ind in initial {
        if ind.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: ind.len(),
            });
        }
    }

    let mut population: Vec<Vec<f64>> = Vec::with_capacity(config.population);
    for (i, ind) in initial.iter().take(config.population).enumerate() {
        let _ = i;
        population.push(ind.clone());
    }
    for i in population.len()..config.population {
        let mut rng = stream_rng(config.seed, 0, i as u32);
        population.push((0..dim).map(|_| rng.gen::<f64>() * TWO_PI).collect());
    }

    let eval_all = |pop: &[Vec<f64>]| -> Vec<f64> {
        pop.par_iter().map(|ind| objective.value(ind)).collect()
    };
    let mut fitness = eval_all(&population);
    let mut evaluations = config.population as u64;

    for generation in 1..=config.generations {
        // Rank current population (stable: ties keep index order).
        let mut order: Vec<usize> = (0..config.population).collect();
        order.sort_by(|&a, &b| fitness[a].total_cmp(&fitness[b]).then(a.cmp(&b)));

        let mut next: Vec<Vec<f64>> = Vec::with_capacity(config.population);
        for &idx in order.iter().take(config.elite_count) {
            next.push(population[idx].clone());
        }
        for i in config.elite_count..config.population {
            let mut rng = stream_rng(config.seed, generation as u32, i as u32);
            let tournament = |rng: &mut ChaCha12Rng| -> usize {
                let mut best = rng.gen_range(0..config.population);
                for _ in 1..config.tournament_size {
                    let cand = rng.gen_range(0..config.population);
                    if fitness[cand] < fitness[best] {
                        best = cand;
                    }
                }
                best
            };
            let a = tournament(&mut rng);
            let b = tournament(&mut rng);
            let mut child: Vec<f64> = if rng.gen::<f64>() < config.crossover_prob {
                (0..dim)
                    .map(|k| {
                        if rng.gen::<bool>() {
                            population[a][k]
                        } else {
                            population[b][k]
                        }
                    })
                    .collect()
            } else {
                population[a].clone()
            };
            if config.mutation_sigma > 0.0 {
                let normal = Normal::new(0.0, config.mutation_sigma)
                    .expect("validated sigma");
                for gene in child.iter_mut() {
                    if rng.gen::<f64>() < config.mutation_prob {
                        *gene = (*gene + normal.sample(&mut rng)).rem_euclid(TWO_PI);
                    }
                }
            }
            next.push(child);
        }
        population = next;
        fitness = eval_all(&population);
        evaluations += config.population as u64;
    }

    let best = (0..config.population)
        .min_by(|&a, &b| fitness[a].total_cmp(&fitness[b]).then(a.cmp(&b)))
        .expect("population is non-empty");
    result_from(objective, population[best].clone(), evaluations, true)
}

/// Local refinement with the standard Nelder-Mead simplex (reflect 1,
/// expand 2, contract 0.5, shrink 0.5). Works in unwrapped coordinates —
/// the objective is 2π-periodic and smooth, so no boundary handling is
/// needed. Returns `converged = false` when the iteration budget runs out
/// first.
pub fn nelder_mead_refine(
    start: &[f64],
    template: &SequenceTemplate,
    config: &SearchConfig,
    layout: &EncodingLayout,
) -> Result<SearchResult, Error> {
    let objective = GateObjective::reduced(template, layout, config.leakage_weight)?;
    nelder_mead_with(&objective, config, start)
}

pub(crate) fn nelder_mead_with(
    objective: &GateObjective,
    config: &SearchConfig,
    start: &[f64],
) -> Result<SearchResult, Error> {
    config.validate()?;
    let dim = objective.num_slots();
    if start.len() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            got: start.len(),
        });
    }
    const INITIAL_STEP: f64 = 0.1;

    let mut simplex: Vec<Array1<f64>> = Vec::with_capacity(dim + 1);
    simplex.push(Array1::from(start.to_vec()));
    for k in 0..dim {
        let mut v = Array1::from(start.to_vec());
        v[k] += INITIAL_STEP;
        simplex.push(v);
    }
    let eval = |x: &Array1<f64>| objective.value(x.as_slice().expect("contiguous"));
    let mut values: Vec<f64> = simplex.iter().map(eval).collect();
    let mut evaluations = (dim + 1) as u64;

    let mut converged = false;
    for _ in 0..config.nm_max_iter {
        let mut order: Vec<usize> = (0..simplex.len()).collect();
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)));
        simplex = order.iter().map(|&i| simplex[i].clone()).collect();
        values = order.iter().map(|&i| values[i]).collect();

        let spread_f = values[dim] - values[0];
        let spread_x = simplex[1..]
            .iter()
            .map(|v| {
                v.iter()
                    .zip(simplex[0].iter())
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0, f64::max)
            })
            .fold(0.0, f64::max);
        if spread_x < config.nm_tol_x || spread_f.abs() < config.nm_tol_f {
            converged = true;
            break;
        }

        let centroid: Array1<f64> = {
            let mut c = Array1::zeros(dim);
            for v in &simplex[..dim] {
                c += v;
            }
            c / dim as f64
        };
        let worst = simplex[dim].clone();
        let reflected = &centroid * 2.0 - &worst;
        let f_reflected = eval(&reflected);
        evaluations += 1;

        if f_reflected < values[0] {
            let expanded = &centroid * 3.0 - &worst * 2.0;
            let f_expanded = eval(&expanded);
            evaluations += 1;
            if f_expanded < f_reflected {
                simplex[dim] = expanded;
                values[dim] = f_expanded;
            } else {
                simplex[dim] = reflected;
                values[dim] = f_reflected;
            }
        } else if f_reflected < values[dim - 1] {
            simplex[dim] = reflected;
            values[dim] = f_reflected;
        } else if f_reflected < values[dim] {
            let outside = &centroid + &((&reflected - &centroid) * 0.5);
            let f_outside = eval(&outside);
            evaluations += 1;
            if f_outside <= f_reflected {
                simplex[dim] = outside;
                values[dim] = f_outside;
            } else {
                shrink(&mut simplex, &mut values, eval);
                evaluations += dim as u64;
            }
        } else {
            let inside = &centroid + &((&worst - &centroid) * 0.5);
            let f_inside = eval(&inside);
            evaluations += 1;
            if f_inside < values[dim] {
                simplex[dim] = inside;
                values[dim] = f_inside;
            } else {
                shrink(&mut simplex, &mut values, eval);
                evaluations += dim as u64;
            }
        }
    }

    let best = (0..simplex.len())
        .min_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)))
        .expect("simplex is non-empty");
    let thetas = simplex[best].to_vec();
    result_from(objective, thetas, evaluations, converged)
}

fn shrink<F: Fn(&Array1<f64>) -> f64>(
    simplex: &mut [Array1<f64>],
    values: &mut [f64],
    eval: F,
) {
    let best = simplex[0].clone();
    for i in 1..simplex.len() {
        simplex[i] = &best + &((&simplex[i] - &best) * 0.5);
        values[i] = eval(&simplex[i]);
    }
}

/// The full pipeline: `restarts` independent (genetic, Nelder-Mead) runs,
/// restart r reseeded with seed + r, results sorted best-first. The heavy
/// per-template machinery is built once and shared.
pub fn run_search(
    template: &SequenceTemplate,
    config: &SearchConfig,
    layout: &EncodingLayout,
) -> Result<Vec<SearchResult>, Error> {
    config.validate()?;
    let objective = GateObjective::reduced(template, layout, config.leakage_weight)?;
    let mut results = Vec::with_capacity(config.restarts);
    for restart in 0..config.restarts {
        let mut cfg = config.clone();
        cfg.seed = config.seed.wrapping_add(restart as u64);
        let coarse = genetic_search_with(&objective, &cfg, &[])?;
        let mut refined = nelder_mead_with(&objective, &cfg, &coarse.thetas)?;
        refined.evaluations += coarse.evaluations;
        results.push(refined);
    }
    results.sort_by(|a, b| a.objective.total_cmp(&b.objective));
    Ok(results)
}

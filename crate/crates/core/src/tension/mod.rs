//! Gács-Körner common information (exact), Wyner tension and common
//! information by auxiliary-channel optimization, fixed-`c` tension slices,
//! and the assembled outer-bound regions for information-cost pairs.

pub mod optim;
pub mod oracle;

use thiserror::Error;

use crate::dist::{Alphabet, Channel, DistError, JointDist};
use crate::region::{RegionError, UpwardRegion};
use crate::util;

pub use optim::{Instance, Objective};

/// A returned witness must satisfy `I(A;B|Q) <=` this in bits (the
/// hard Markov-feasibility tolerance).
pub const MARKOV_TOL: f64 = 1e-7;

#[derive(Debug, Error)]
pub enum TensionError {
    #[error("expected a two-variable distribution, got {0} variables")]
    NotBivariate(usize),
    #[error(
        "no Markov-feasible witness within budget: best value {value_bits} bits \
         with constraint violation {violation_bits} bits"
    )]
    Infeasible { value_bits: f64, violation_bits: f64 },
    #[error("c grid must be nonempty and include 0")]
    BadCGrid,
    #[error(transparent)]
    Dist(#[from] DistError),
    #[error(transparent)]
    Region(#[from] RegionError),
}

/// Optimization budget: restart count, iterations per restart, convergence
/// tolerance in bits, and the base random seed.
#[derive(Debug, Clone, Copy)]
pub struct OptBudget {
    pub restarts: usize,
    pub iters: usize,
    pub tol_bits: f64,
    pub seed: u64,
}

impl Default for OptBudget {
    fn default() -> Self {
        OptBudget { restarts: 64, iters: 2000, tol_bits: 1e-8, seed: 0 }
    }
}

impl OptBudget {
    pub fn quick(restarts: usize, iters: usize, seed: u64) -> Self {
        OptBudget { restarts, iters, tol_bits: 1e-8, seed }
    }
}

/// An auxiliary-channel achievability certificate: the channel `p(Q|A,B)`
/// and its exact cost triple on the base distribution.
#[derive(Debug, Clone)]
pub struct AuxWitness {
    pub channel: Channel,
    pub r1: f64,
    pub r2: f64,
    pub r3: f64,
}

impl AuxWitness {
    /// Recomputes the costs from the channel and base distribution
    /// (used to validate stored witnesses).
    pub fn recompute(&self, d: &JointDist) -> Result<(f64, f64, f64), TensionError> {
        let (inst, _) = instance_of(d)?;
        let nq = self.channel.to_alphabet.len();
        let mut flat = Vec::with_capacity(inst.rows() * nq);
        for row in &self.channel.rows {
            flat.extend_from_slice(row);
        }
        let inst = Instance::new(inst.p_ab, inst.na, inst.nb, nq);
        let e = inst.evaluate(&flat).clamped();
        Ok((e.r1, e.r2, e.r3))
    }
}

// ---------------------------------------------------------------------------
// Gács-Körner
// ---------------------------------------------------------------------------

/// The maximal common partition: connected components of the bipartite
/// support graph, with the entropy of the component label.
#[derive(Debug, Clone)]
pub struct GkDecomposition {
    pub bits: f64,
    /// Component of each first-variable symbol (None off support).
    pub row_component: Vec<Option<usize>>,
    /// Component of each second-variable symbol.
    pub col_component: Vec<Option<usize>>,
    pub component_mass: Vec<f64>,
}

impl GkDecomposition {
    pub fn n_components(&self) -> usize {
        self.component_mass.len()
    }
}

fn bivariate_matrix(d: &JointDist) -> Result<(Vec<f64>, usize, usize), TensionError> {
    if d.n_vars() != 2 {
        return Err(TensionError::NotBivariate(d.n_vars()));
    }
    let na = d.vars()[0].1.len();
    let nb = d.vars()[1].1.len();
    Ok((d.probs().to_vec(), na, nb))
}

/// `CI_GK`: entropy of the maximal random variable computable from either
/// side alone. Exact — the maximizer is the connected-component label of
/// the support graph, no optimization involved.
pub fn gk_common_info(d: &JointDist) -> Result<GkDecomposition, TensionError> {
    let (p, na, nb) = bivariate_matrix(d)?;
    // union-find over a-nodes [0, na) and b-nodes [na, na+nb)
    let mut parent: Vec<usize> = (0..na + nb).collect();
    fn find(parent: &mut Vec<usize>, mut i: usize) -> usize {
        while parent[i] != i {
            parent[i] = parent[parent[i]];
            i = parent[i];
        }
        i
    }
    for a in 0..na {
        for b in 0..nb {
            if p[a * nb + b] > 0.0 {
                let ra = find(&mut parent, a);
                let rb = find(&mut parent, na + b);
                parent[ra] = rb;
            }
        }
    }
    let mut label_of_root: std::collections::HashMap<usize, usize> = Default::default();
    let mut component_mass = Vec::new();
    let mut row_component = vec![None; na];
    let mut col_component = vec![None; nb];
    for a in 0..na {
        let mass: f64 = (0..nb).map(|b| p[a * nb + b]).sum();
        if mass <= 0.0 {
            continue;
        }
        let root = find(&mut parent, a);
        let label = *label_of_root.entry(root).or_insert_with(|| {
            component_mass.push(0.0);
            component_mass.len() - 1
        });
        component_mass[label] += mass;
        row_component[a] = Some(label);
    }
    for b in 0..nb {
        let mass: f64 = (0..na).map(|a| p[a * nb + b]).sum();
        if mass <= 0.0 {
            continue;
        }
        let root = find(&mut parent, na + b);
        let label = *label_of_root.entry(root).or_insert_with(|| {
            component_mass.push(0.0);
            component_mass.len() - 1
        });
        col_component[b] = Some(label);
    }
    let bits = -component_mass
        .iter()
        .filter(|&&m| m > 0.0)
        .map(|&m| m * m.log2())
        .sum::<f64>();
    Ok(GkDecomposition { bits: bits.max(0.0), row_component, col_component, component_mass })
}

/// The deterministic component-label channel of the GK decomposition.
pub fn gk_channel(d: &JointDist, decomp: &GkDecomposition) -> Result<Channel, TensionError> {
    let (_, na, nb) = bivariate_matrix(d)?;
    let k = decomp.n_components().max(1);
    let mut map = Vec::with_capacity(na * nb);
    for a in 0..na {
        for b in 0..nb {
            map.push(
                decomp.row_component[a]
                    .or(decomp.col_component[b])
                    .unwrap_or(0),
            );
        }
    }
    let names: Vec<String> = d.var_names().iter().map(|s| s.to_string()).collect();
    Ok(Channel::deterministic(
        names,
        &fresh_aux_name(d),
        Alphabet::of_size(k),
        &map,
    ))
}

/// `T_GK = I(A;B) - CI_GK >= 0`.
pub fn gk_tension(d: &JointDist) -> Result<f64, TensionError> {
    let names = d.var_names();
    if names.len() != 2 {
        return Err(TensionError::NotBivariate(names.len()));
    }
    let i = d.mutual_info(&[names[0]], &[names[1]], &[])?;
    let gk = gk_common_info(d)?;
    Ok((i - gk.bits).max(0.0))
}

// ---------------------------------------------------------------------------
// Wyner quantities
// ---------------------------------------------------------------------------

fn instance_of(d: &JointDist) -> Result<(Instance, [String; 2]), TensionError> {
    let (p, na, nb) = bivariate_matrix(d)?;
    let names = [d.vars()[0].0.clone(), d.vars()[1].0.clone()];
    // cardinality bound |Q| <= |A||B| + 2 suffices for the whole region
    Ok((Instance::new(p, na, nb, na * nb + 2), names))
}

fn fresh_aux_name(d: &JointDist) -> String {
    let mut name = "Q".to_string();
    let mut i = 0;
    while d.axis(&name).is_ok() {
        name = format!("Q{i}");
        i += 1;
    }
    name
}

/// Structured starting channels: constant, identity `Q=(A,B)`, and the GK
/// component label.
fn structured_seeds(d: &JointDist, inst: &Instance) -> Vec<Vec<f64>> {
    let rows = inst.rows();
    let nq = inst.nq;
    let mut seeds = Vec::new();
    let mut constant = vec![0.0; rows * nq];
    for r in 0..rows {
        constant[r * nq] = 1.0;
    }
    seeds.push(constant);
    if nq >= rows {
        let mut identity = vec![0.0; rows * nq];
        for r in 0..rows {
            identity[r * nq + r] = 1.0;
        }
        seeds.push(identity);
    }
    if let Ok(decomp) = gk_common_info(d) {
        if decomp.n_components() > 1 && decomp.n_components() <= nq {
            let mut gk = vec![0.0; rows * nq];
            for a in 0..inst.na {
                for b in 0..inst.nb {
                    let q = decomp.row_component[a]
                        .or(decomp.col_component[b])
                        .unwrap_or(0);
                    gk[(a * inst.nb + b) * nq + q] = 1.0;
                }
            }
            seeds.push(gk);
        }
    }
    seeds
}

/// Embeds a channel matrix with `nq_from` columns into `nq` columns.
fn embed_seed(seed: &[f64], rows: usize, nq_from: usize, nq: usize) -> Option<Vec<f64>> {
    if nq_from > nq || seed.len() != rows * nq_from {
        return None;
    }
    let mut out = vec![0.0; rows * nq];
    for r in 0..rows {
        out[r * nq..r * nq + nq_from].copy_from_slice(&seed[r * nq_from..(r + 1) * nq_from]);
    }
    Some(out)
}

struct SearchOutcome {
    eval: optim::Eval,
    channel: Vec<f64>,
    feasible: bool,
}

/// Multi-restart solve; restart `i` uses seed channel `i` when provided and
/// a counter-derived random start otherwise. Deterministic for a fixed
/// budget regardless of the thread schedule.
fn search(
    inst: &Instance,
    objective: Objective,
    c_cap: f64,
    budget: &OptBudget,
    extra_seeds: &[Vec<f64>],
    label: &str,
    feas_tol: f64,
) -> SearchOutcome {
    let rows = inst.rows();
    let nq = inst.nq;
    let mut inits: Vec<Vec<f64>> = Vec::new();
    for s in extra_seeds {
        debug_assert_eq!(s.len(), rows * nq);
        inits.push(s.clone());
    }
    let n_restarts = budget.restarts.max(inits.len()).max(1);
    let opts = optim::SolveOptions { c_cap, iters: budget.iters, tol: budget.tol_bits, polish: true };
    // evaluate seeds first; an already-optimal seed skips the random phase
    let mut results: Vec<(usize, optim::Solution)> = Vec::new();
    let mut best_feasible_zero = false;
    for (i, init) in inits.iter().enumerate() {
        let sol = optim::solve_from(inst, objective, &opts, init.clone());
        if sol.violation <= feas_tol && sol.objective <= 1e-12 {
            best_feasible_zero = true;
        }
        results.push((i, sol));
        if best_feasible_zero {
            break;
        }
    }
    if !best_feasible_zero {
        let remaining: Vec<usize> = (inits.len()..n_restarts).collect();
        let batch = util::map_indexed(remaining.len(), |k| {
            let idx = remaining[k];
            let mut rng = util::stream_rng(budget.seed, label, idx as u64);
            // alternate smooth Dirichlet starts with sparse grid-snapped
            // ones: near-deterministic optima live close to the simplex
            // boundary where smooth starts rarely converge
            let init = if idx % 2 == 0 {
                optim::random_channel(rows, nq, &mut rng)
            } else {
                optim::sparse_random_channel(rows, nq, &mut rng)
            };
            optim::solve_from(inst, objective, &opts, init)
        });
        for (k, sol) in batch.into_iter().enumerate() {
            results.push((remaining[k], sol));
            if results.last().unwrap().1.violation <= feas_tol
                && results.last().unwrap().1.objective <= 1e-12
            {
                break;
            }
        }
    }
    // split/merge basin hops from the best of a fixed prefix window, so the
    // reported min stays monotone as the restart budget grows
    let hop_window = 16.min(results.len());
    if let Some(base) = best_of(&results[..hop_window], feas_tol) {
        let mut incumbent = results[base].1.channel.clone();
        for _round in 0..2 {
            let variants = optim::split_merge_variants(inst, &incumbent);
            let solved = util::map_indexed(variants.len(), |k| {
                let opts = optim::SolveOptions {
                    c_cap,
                    iters: (budget.iters / 4).max(200),
                    tol: budget.tol_bits,
                    polish: true,
                };
                optim::solve_from(inst, objective, &opts, variants[k].clone())
            });
            let start = results.len();
            for (k, sol) in solved.into_iter().enumerate() {
                results.push((n_restarts + start + k, sol));
            }
            match best_of(&results, feas_tol) {
                Some(b) if results[b].1.channel != incumbent => {
                    incumbent = results[b].1.channel.clone();
                }
                _ => break,
            }
        }
    }
    let best = best_of(&results, feas_tol).expect("at least one restart");
    let sol = &results[best].1;
    SearchOutcome {
        eval: sol.eval,
        channel: sol.channel.clone(),
        feasible: sol.violation <= feas_tol,
    }
}

/// Index of the best result: feasibility first, then objective (violation
/// when neither is feasible), then restart index — a deterministic order.
fn best_of(results: &[(usize, optim::Solution)], feas_tol: f64) -> Option<usize> {
    let mut best: Option<(usize, usize)> = None; // (position, restart index)
    for (pos, (i, sol)) in results.iter().enumerate() {
        let f = sol.violation <= feas_tol;
        let better = match &best {
            None => true,
            Some((bpos, bi)) => {
                let bsol = &results[*bpos].1;
                let bf = bsol.violation <= feas_tol;
                if f != bf {
                    f
                } else {
                    let (key, bkey) = if f {
                        (sol.objective, bsol.objective)
                    } else {
                        (sol.violation, bsol.violation)
                    };
                    key < bkey - 1e-15 || ((key - bkey).abs() <= 1e-15 && i < bi)
                }
            }
        };
        if better {
            best = Some((pos, *i));
        }
    }
    best.map(|(pos, _)| pos)
}

fn matrix_to_channel(d: &JointDist, inst: &Instance, flat: &[f64]) -> Channel {
    let nq = inst.nq;
    let rows: Vec<Vec<f64>> = (0..inst.rows())
        .map(|r| {
            let mut row: Vec<f64> = flat[r * nq..(r + 1) * nq].to_vec();
            // snap away negative zeros and renormalize exactly within 1e-12
            let s: f64 = row.iter().sum();
            if (s - 1.0).abs() > 1e-13 {
                for v in row.iter_mut() {
                    *v /= s;
                }
            }
            row
        })
        .collect();
    let names: Vec<String> = d.var_names().iter().map(|s| s.to_string()).collect();
    Channel::new(names, &fresh_aux_name(d), Alphabet::of_size(nq), rows)
        .expect("optimizer rows are stochastic")
}

fn point_mass_variable(d: &JointDist) -> Result<bool, TensionError> {
    let (p, na, nb) = bivariate_matrix(d)?;
    let a_support = (0..na)
        .filter(|&a| (0..nb).any(|b| p[a * nb + b] > 0.0))
        .count();
    let b_support = (0..nb)
        .filter(|&b| (0..na).any(|a| p[a * nb + b] > 0.0))
        .count();
    Ok(a_support <= 1 || b_support <= 1)
}

fn constant_witness(d: &JointDist) -> AuxWitness {
    let names: Vec<String> = d.var_names().iter().map(|s| s.to_string()).collect();
    let rows = d.probs().len();
    AuxWitness {
        channel: Channel::constant(names, &fresh_aux_name(d), rows),
        r1: 0.0,
        r2: 0.0,
        r3: 0.0,
    }
}

/// Upper bound on the Wyner tension `inf { I(B;Q|A) + I(A;Q|B) : A-Q-B }`,
/// with the best Markov-feasible channel found. Values never increase as
/// the restart budget grows (same seed).
pub fn wyner_tension(d: &JointDist, budget: &OptBudget) -> Result<(f64, AuxWitness), TensionError> {
    wyner_tension_seeded(d, budget, &[])
}

/// As [`wyner_tension`], with caller-provided starting channels (each a
/// row-major `rows x nq'` matrix, `nq' <= |A||B| + 2`).
pub fn wyner_tension_seeded(
    d: &JointDist,
    budget: &OptBudget,
    extra: &[(Vec<f64>, usize)],
) -> Result<(f64, AuxWitness), TensionError> {
    let (inst, _) = instance_of(d)?;
    if point_mass_variable(d)? {
        return Ok((0.0, constant_witness(d)));
    }
    let mut seeds = structured_seeds(d, &inst);
    for (m, nq_from) in extra {
        if let Some(s) = embed_seed(m, inst.rows(), *nq_from, inst.nq) {
            seeds.push(s);
        }
    }
    let out = search(
        &inst,
        Objective::SumConditional,
        0.0,
        budget,
        &seeds,
        "wyner-tension",
        MARKOV_TOL,
    );
    let e = out.eval.clamped();
    if !out.feasible {
        return Err(TensionError::Infeasible {
            value_bits: e.r1 + e.r2,
            violation_bits: e.r3,
        });
    }
    let witness = AuxWitness {
        channel: matrix_to_channel(d, &inst, &out.channel),
        r1: e.r1,
        r2: e.r2,
        r3: e.r3,
    };
    Ok((e.r1 + e.r2, witness))
}

/// Upper bound on Wyner common information `inf { I(AB;Q) : A-Q-B }`.
/// On the Markov-feasible set this objective equals
/// `I(A;B) + I(B;Q|A) + I(A;Q|B)` pointwise, so the same search applies.
pub fn wyner_common_info(
    d: &JointDist,
    budget: &OptBudget,
) -> Result<(f64, AuxWitness), TensionError> {
    let (inst, _) = instance_of(d)?;
    if point_mass_variable(d)? {
        return Ok((0.0, constant_witness(d)));
    }
    let seeds = structured_seeds(d, &inst);
    let out = search(
        &inst,
        Objective::JointInfo,
        0.0,
        budget,
        &seeds,
        "wyner-ci",
        MARKOV_TOL,
    );
    let e = out.eval.clamped();
    if !out.feasible {
        return Err(TensionError::Infeasible {
            value_bits: e.i_abq,
            violation_bits: e.r3,
        });
    }
    let witness = AuxWitness {
        channel: matrix_to_channel(d, &inst, &out.channel),
        r1: e.r1,
        r2: e.r2,
        r3: e.r3,
    };
    Ok((e.i_abq, witness))
}

// ---------------------------------------------------------------------------
// Tension slices and outer bounds
// ---------------------------------------------------------------------------

/// Inner (achievability) approximation of the fixed-`c` tension slice: for
/// each direction `λ`, minimize `λ r1 + (1-λ) r2` subject to `r3 <= c`.
/// Every returned frontier point carries a feasible channel certificate.
pub fn tension_slice(
    d: &JointDist,
    c: f64,
    budget: &OptBudget,
    directions: usize,
) -> Result<(UpwardRegion, Vec<AuxWitness>), TensionError> {
    slice_with_seeds(d, c, budget, directions, &[])
}

pub(crate) fn slice_with_seeds(
    d: &JointDist,
    c: f64,
    budget: &OptBudget,
    directions: usize,
    extra: &[(Vec<f64>, usize)],
) -> Result<(UpwardRegion, Vec<AuxWitness>), TensionError> {
    let c = c.max(0.0);
    let (inst, _) = instance_of(d)?;
    let mut witnesses: Vec<AuxWitness> = Vec::new();
    let feas = c + MARKOV_TOL;

    // guaranteed feasible anchors
    let identity_pt = {
        let nq = inst.nq;
        let rows = inst.rows();
        let mut identity = vec![0.0; rows * nq];
        for r in 0..rows {
            identity[r * nq + r] = 1.0;
        }
        let e = inst.evaluate(&identity).clamped();
        witnesses.push(AuxWitness {
            channel: matrix_to_channel(d, &inst, &identity),
            r1: e.r1,
            r2: e.r2,
            r3: e.r3,
        });
        [e.r1, e.r2]
    };
    let mut points = vec![identity_pt];
    if inst.base_mi() <= c + 1e-12 {
        witnesses.push(constant_witness(d));
        points.push([0.0, 0.0]);
    }

    let mut seeds = structured_seeds(d, &inst);
    for (m, nq_from) in extra {
        if let Some(s) = embed_seed(m, inst.rows(), *nq_from, inst.nq) {
            seeds.push(s);
        }
    }
    let n_dirs = directions.max(1);
    let runs = util::map_indexed(n_dirs, |k| {
        let lambda = ((k + 1) as f64 / (n_dirs + 1) as f64).clamp(1e-3, 1.0 - 1e-3);
        search(
            &inst,
            Objective::Weighted(lambda),
            c,
            budget,
            &seeds,
            &format!("slice-{k}"),
            feas,
        )
    });
    for out in runs {
        if out.feasible {
            let e = out.eval.clamped();
            points.push([e.r1, e.r2]);
            witnesses.push(AuxWitness {
                channel: matrix_to_channel(d, &inst, &out.channel),
                r1: e.r1,
                r2: e.r2,
                r3: e.r3,
            });
        }
    }
    let region = UpwardRegion::from_points(points, true)?;
    Ok((region, witnesses))
}

/// The two §-style outer-bound regions for a four-variable source
/// `(X, Y, A, B)`: the intersection over the `c` grid of slice differences,
/// and its entropy-shifted adjustment. Slice computations are achievability
/// approximations, so containment tests against these regions should allow
/// a one-sided tolerance band.
pub struct OuterBounds {
    pub outer: UpwardRegion,
    pub outeradj: UpwardRegion,
    pub shift: [f64; 2],
}

#[allow(clippy::too_many_arguments)]
pub fn outer_bound_region(
    d: &JointDist,
    x: &str,
    y: &str,
    a: &str,
    b: &str,
    c_grid: &[f64],
    budget: &OptBudget,
    directions: usize,
) -> Result<OuterBounds, TensionError> {
    if c_grid.is_empty() || c_grid.iter().copied().fold(f64::INFINITY, f64::min) > 1e-12 {
        return Err(TensionError::BadCGrid);
    }
    let mut grid: Vec<f64> = c_grid.to_vec();
    grid.sort_by(f64::total_cmp);
    grid.dedup_by(|u, v| (*u - *v).abs() < 1e-12);
    let d_by_ax = d.group2("BY", &[b, y], "AX", &[a, x])?;
    let d_y_x = d.group2("Yv", &[y], "Xv", &[x])?;
    let mut diffs: Vec<UpwardRegion> = Vec::new();
    let mut seeds1: Vec<(Vec<f64>, usize)> = Vec::new();
    let mut seeds2: Vec<(Vec<f64>, usize)> = Vec::new();
    for &c in &grid {
        let (s1, w1) = slice_with_seeds(&d_by_ax, c, budget, directions, &seeds1)?;
        let (s2, w2) = slice_with_seeds(&d_y_x, c, budget, directions, &seeds2)?;
        // forward feasible witnesses to larger c (still feasible there)
        seeds1 = w1
            .iter()
            .map(|w| (flatten_channel(&w.channel), w.channel.to_alphabet.len()))
            .collect();
        seeds2 = w2
            .iter()
            .map(|w| (flatten_channel(&w.channel), w.channel.to_alphabet.len()))
            .collect();
        diffs.push(UpwardRegion::difference(&s1, &s2));
    }
    let refs: Vec<&UpwardRegion> = diffs.iter().collect();
    let outer = UpwardRegion::intersect(&refs)?;
    let h_b_y = d.entropy(&[b], &[y])?;
    let h_a_x = d.entropy(&[a], &[x])?;
    let h_ab_xy = d.entropy(&[a, b], &[x, y])?;
    let shift = [h_b_y - h_ab_xy, h_a_x - h_ab_xy];
    let outeradj = outer.shift(shift);
    Ok(OuterBounds { outer, outeradj, shift })
}

fn flatten_channel(ch: &Channel) -> Vec<f64> {
    ch.rows.iter().flatten().copied().collect()
}

/// The default `c` grid `{0, 0.01, 0.05, 0.1, 0.25, 0.5, 1.0, I(X;Y)}`;
/// a finite grid only enlarges the intersection, which keeps the outer
/// bound valid.
pub fn default_c_grid(d: &JointDist, x: &str, y: &str) -> Result<Vec<f64>, TensionError> {
    let i = d.mutual_info(&[x], &[y], &[])?;
    let mut grid = vec![0.0, 0.01, 0.05, 0.1, 0.25, 0.5, 1.0, i];
    grid.sort_by(f64::total_cmp);
    grid.dedup_by(|u, v| (*u - *v).abs() < 1e-12);
    Ok(grid)
}

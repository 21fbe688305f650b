//! State-side hierarchies: correlation operators, marginal density
//! operators and marginal correlation operators, with a brute-force
//! grand-canonical oracle.

use rand::Rng;

use crate::combinatorics::{binomial, factorial, index_partitions, mobius_weight, LabelSet};
use crate::cumulants::{cumulant, reduced_cumulant, ClusterArgument};
use crate::dynamics::{GroupFlavor, HamiltonianSpec, Picture, System};
use crate::error::{Error, Result};
use crate::hilbert::{c, embed, place, symmetrizer, trace_tail, DenseOperator, KahanSum, Statistics, C64};
use crate::quadrature::mapped;
use crate::random::random_symmetric_density;
use crate::sequences::{star_exp, star_ln, OperatorSequence};

const POSITIVITY_TOL: f64 = 1e-10;

/// A truncated grand-canonical state `D = (1, D_1, ..., D_{N_max})`.
#[derive(Clone, Debug, PartialEq)]
pub struct GrandCanonicalState {
    d: OperatorSequence,
}

impl GrandCanonicalState {
    pub fn new(d: OperatorSequence) -> Result<Self> {
        if (d.scalar0() - c(1.0)).norm() > 1e-14 {
            return Err(Error::Argument("density sequence needs scalar component 1".into()));
        }
        for op in d.components() {
            if !op.is_hermitian(POSITIVITY_TOL) || !op.is_positive(POSITIVITY_TOL) {
                return Err(Error::Argument(format!(
                    "component on {} particles is not positive Hermitian",
                    op.n_particles()
                )));
            }
        }
        Ok(Self { d })
    }

    /// A fixed-N state as a one-component sequence.
    pub fn fixed_n(dn: &DenseOperator) -> Result<Self> {
        let mut seq = OperatorSequence::one_component(dn, dn.n_particles());
        seq.set_scalar0(c(1.0));
        Self::new(seq)
    }

    /// `D_n = scale^n ρ_n` with random symmetric densities `ρ_n`.
    pub fn random<R: Rng>(n_max: usize, d: usize, scale: f64, rng: &mut R) -> Result<Self> {
        let mut w = 1.0;
        let seq = OperatorSequence::from_fn(c(1.0), n_max, d, |n| {
            w *= scale;
            random_symmetric_density(n, d, rng).scale_re(w)
        });
        Self::new(seq)
    }

    pub fn sequence(&self) -> &OperatorSequence {
        &self.d
    }

    pub fn n_max(&self) -> usize {
        self.d.n_max()
    }

    /// `(I, D)`, recomputed on every call.
    pub fn normalization(&self) -> f64 {
        self.d.normalization().re
    }
}

/// `D(t) = 𝒢(-t) D(0)`, componentwise.
pub fn evolve_exact(sys: &System, state: &GrandCanonicalState, t: f64) -> Result<GrandCanonicalState> {
    let mut out = state.d.clone();
    for op in state.d.components() {
        out.set_component(sys.vonneumann_group(t, op)?)?;
    }
    Ok(GrandCanonicalState { d: out })
}

/// `F_s = (I,D)^{-1} Σ_n Tr_{s+1..s+n} D_{s+n} / n!` for `s ≤ s_max`.
pub fn marginals_oracle(state: &GrandCanonicalState, s_max: usize) -> Result<OperatorSequence> {
    let n_max = state.n_max();
    crate::error::capacity("marginal order", n_max, s_max)?;
    let norm = state.normalization();
    let d = state.d.d();
    let mut out = OperatorSequence::unit(s_max, d);
    for s in 1..=s_max {
        let mut acc = KahanSum::new(s, d);
        for n in 0..=n_max - s {
            let op = state.d.component(s + n).expect("within range");
            acc.add(&trace_tail(op, n), 1.0 / factorial(n) as f64);
        }
        out.set_component(acc.finish().scale_re(1.0 / norm))?;
    }
    Ok(out)
}

/// `g = Ln⋆ D`.
pub fn correlations_from_density(state: &GrandCanonicalState) -> Result<OperatorSequence> {
    star_ln(&state.d)
}

/// `D = Exp⋆ g`.
pub fn density_from_correlations(g: &OperatorSequence) -> Result<GrandCanonicalState> {
    Ok(GrandCanonicalState { d: star_exp(g)? })
}

/// `S X S` on every component for Bose or Fermi statistics.
pub fn apply_statistics(seq: &OperatorSequence, stat: Statistics) -> Result<OperatorSequence> {
    if stat == Statistics::MaxwellBoltzmann {
        return Ok(seq.clone());
    }
    let mut out = seq.clone();
    for op in seq.components() {
        let p = symmetrizer(op.n_particles(), op.one_particle_dim(), stat)?;
        out.set_component(&(&p * op) * &p)?;
    }
    out.statistics = stat;
    Ok(out)
}

fn blocks_one_based(p: &[Vec<usize>], offset: usize) -> Vec<Vec<usize>> {
    p.iter().map(|b| b.iter().map(|i| i + 1 + offset).collect()).collect()
}

/// Product `Π g_{|X_i|}(X_i)` on `n` particles; blocks carry 1-based labels.
fn product_over(g: &OperatorSequence, blocks: &[Vec<usize>], n: usize) -> Option<DenseOperator> {
    let mut parts = Vec::with_capacity(blocks.len());
    for b in blocks {
        parts.push((g.component(b.len())?, b.as_slice()));
    }
    Some(place(&parts, n, g.d()).expect("disjoint labels"))
}

fn cluster_arg(blocks: &[Vec<usize>]) -> Result<ClusterArgument> {
    ClusterArgument::new(blocks.iter().map(|b| LabelSet::new(b.clone())).collect::<Result<_>>()?)
}

/// `g_s(t) = Σ_P 𝔄_{|P|}(-t, {X_1}, ..., {X_{|P|}}) Π g⁰_{|X_i|}(X_i)`.
pub fn solve_von_neumann_hierarchy(sys: &System, g0: &OperatorSequence, t: f64) -> Result<OperatorSequence> {
    let d = g0.d();
    let mut out = OperatorSequence::zeros(g0.n_max(), d);
    for s in 1..=g0.n_max() {
        let mut acc = KahanSum::new(s, d);
        for p in index_partitions(s) {
            let blocks = blocks_one_based(&p, 0);
            let Some(prod) = product_over(g0, &blocks, s) else { continue };
            acc.add(&cumulant(sys, -t, &cluster_arg(&blocks)?, GroupFlavor::Full, &prod)?, 1.0);
        }
        out.set_component(acc.finish())?;
    }
    Ok(out)
}

/// Right-hand side of the von Neumann hierarchy with two-body interaction:
/// `-𝒩_s g_s + Σ_{X_1 ∪ X_2 = Y} Σ_{i∈X_1, j∈X_2} (-𝒩_int(i,j)) g(X_1) g(X_2)`.
pub fn von_neumann_generator(sys: &System, g: &OperatorSequence, s: usize) -> Result<DenseOperator> {
    let gs = g
        .component(s)
        .ok_or_else(|| Error::Capacity { what: "hierarchy order", limit: g.n_max(), got: s })?;
    let mut acc = sys.generator_n(gs, Picture::State)?;
    for p in index_partitions(s).into_iter().filter(|p| p.len() == 2) {
        let blocks = blocks_one_based(&p, 0);
        let Some(prod) = product_over(g, &blocks, s) else { continue };
        for &i in &blocks[0] {
            for &j in &blocks[1] {
                acc += &sys.nint_state(i, j, &prod)?;
            }
        }
    }
    Ok(acc)
}

/// `g_{1+n}(t, {Y}, X∖Y)`: the cumulant expansion over partitions of the
/// cluster argument `({Y}, s+1, ..., s+n)`, `Y = 1..s`. Blocks holding the
/// cluster carry the initial cluster correlations, other blocks the
/// particle correlations `g⁰`.
pub fn cluster_correlations(sys: &System, g0: &OperatorSequence, t: f64, s: usize, n: usize) -> Result<DenseOperator> {
    let total = s + n;
    crate::error::capacity("cluster correlation size", g0.n_max(), total)?;
    let d = g0.d();
    let initial: Vec<DenseOperator> =
        (0..=n).map(|k| cluster_correlations_from_evolved(g0, s, k)).collect::<Result<_>>()?;
    let mut acc = KahanSum::new(total, d);
    // element 0 is the cluster {Y}; element e ≥ 1 is particle s + e
    for p in index_partitions(1 + n) {
        let elems: Vec<Vec<usize>> = p
            .iter()
            .map(|b| {
                b.iter()
                    .flat_map(|&e| if e == 0 { (1..=s).collect::<Vec<_>>() } else { vec![s + e] })
                    .collect()
            })
            .collect();
        let mut parts = Vec::with_capacity(elems.len());
        let mut missing = false;
        for (b, labels) in p.iter().zip(&elems) {
            let op = if b.contains(&0) { Some(&initial[b.len() - 1]) } else { g0.component(labels.len()) };
            match op {
                Some(op) => parts.push((op, labels.as_slice())),
                None => missing = true,
            }
        }
        if missing {
            continue;
        }
        let prod = place(&parts, total, d)?;
        acc.add(&cumulant(sys, -t, &cluster_arg(&elems)?, GroupFlavor::Full, &prod)?, 1.0);
    }
    Ok(acc.finish())
}

/// `Π_k Σ_{P_k ⊢ E_k} Π g⁰(X)` over element blocks `E_k`, accumulated.
fn expand_blocks(
    g0: &OperatorSequence,
    elems: &[Vec<usize>],
    k: usize,
    chosen: &mut Vec<Vec<usize>>,
    total: usize,
    acc: &mut KahanSum,
) -> Result<()> {
    if k == elems.len() {
        if let Some(prod) = product_over(g0, chosen, total) {
            acc.add(&prod, 1.0);
        }
        return Ok(());
    }
    let e = &elems[k];
    for p in index_partitions(e.len()) {
        let before = chosen.len();
        chosen.extend(p.iter().map(|b| b.iter().map(|&i| e[i]).collect::<Vec<_>>()));
        expand_blocks(g0, elems, k + 1, chosen, total, acc)?;
        chosen.truncate(before);
    }
    Ok(())
}

/// The cluster expansion of the evolved correlations: `Σ_P Π g_{|X_i|}(t, X_i)`
/// over partitions of `({Y}, s+1, ..., s+n)` taken at particle level inside
/// the cluster, combined by Möbius weights over cluster partitions. Compared
/// with [`cluster_correlations`] it checks the relation between cluster
/// and particle correlation operators.
pub fn cluster_correlations_from_evolved(g_t: &OperatorSequence, s: usize, n: usize) -> Result<DenseOperator> {
    let total = s + n;
    crate::error::capacity("cluster correlation size", g_t.n_max(), total)?;
    let d = g_t.d();
    let mut acc = KahanSum::new(total, d);
    for p in index_partitions(1 + n) {
        let elems: Vec<Vec<usize>> = p
            .iter()
            .map(|b| {
                b.iter()
                    .flat_map(|&e| if e == 0 { (1..=s).collect::<Vec<_>>() } else { vec![s + e] })
                    .collect()
            })
            .collect();
        let mut inner = KahanSum::new(total, d);
        expand_blocks(g_t, &elems, 0, &mut Vec::new(), total, &mut inner)?;
        acc.add(&inner.finish(), mobius_weight(p.len()) as f64);
    }
    Ok(acc.finish())
}

/// Representations of the BBGKY solution.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Representation {
    Cumulant,
    Reduced,
    Iteration,
    SecondOrder,
}

/// A truncated series value with the trace norms of its orders.
#[derive(Clone, Debug)]
pub struct SeriesResult {
    pub value: DenseOperator,
    /// Trace norm of each order `n = 0..=n_max`; empty for the iteration
    /// representation, which sums all orders in one nested quadrature.
    pub order_norms: Vec<f64>,
}

impl SeriesResult {
    /// Trace norm of the last retained order.
    pub fn last_order_norm(&self) -> f64 {
        self.order_norms.last().copied().unwrap_or(0.0)
    }
}

/// `F_s(t)` from the marginals `F⁰` by the chosen representation,
/// truncated at `n_max` orders.
pub fn marginal_series_bbgky(
    sys: &System,
    f0: &OperatorSequence,
    t: f64,
    s: usize,
    representation: Representation,
    n_max: usize,
) -> Result<SeriesResult> {
    if s == 0 {
        return Err(Error::Argument("marginal order starts at 1".into()));
    }
    crate::error::capacity("marginal series depth", f0.n_max(), s + n_max)?;
    if t == 0.0 {
        let value = f0.component(s).expect("within capacity").clone();
        let mut order_norms = vec![0.0; n_max + 1];
        order_norms[0] = value.trace_norm();
        return Ok(SeriesResult { value, order_norms });
    }
    if representation == Representation::Iteration {
        let value = iteration_level(sys, f0, s, 0, n_max, t)?;
        return Ok(SeriesResult { value, order_norms: Vec::new() });
    }
    let mut acc = KahanSum::new(s, f0.d());
    let mut order_norms = Vec::with_capacity(n_max + 1);
    for n in 0..=n_max {
        let term = order_term(sys, f0, t, s, n, representation)?;
        order_norms.push(term.trace_norm());
        acc.add(&term, 1.0);
    }
    Ok(SeriesResult { value: acc.finish(), order_norms })
}

fn order_term(sys: &System, f0: &OperatorSequence, t: f64, s: usize, n: usize, representation: Representation) -> Result<DenseOperator> {
    let f = f0.component(s + n).expect("within capacity");
    let evolved = match representation {
        Representation::Cumulant => {
            let tail: Vec<usize> = (s + 1..=s + n).collect();
            cumulant(sys, -t, &ClusterArgument::headed(&LabelSet::range(1, s), &tail)?, GroupFlavor::Full, f)?
        }
        Representation::Reduced => reduced_cumulant(sys, -t, s, n, f)?,
        Representation::SecondOrder => second_order_term(sys, t, s, n, f)?,
        Representation::Iteration => return Err(Error::Argument("iteration form has no order terms".into())),
    };
    Ok(trace_tail(&evolved, n).scale_re(1.0 / factorial(n) as f64))
}

/// The orders `n = 0..=n_max` of the cumulant series for `F_s(t)`.
pub fn marginal_order_terms(sys: &System, f0: &OperatorSequence, t: f64, s: usize, n_max: usize) -> Result<Vec<DenseOperator>> {
    if s == 0 {
        return Err(Error::Argument("marginal order starts at 1".into()));
    }
    crate::error::capacity("marginal series depth", f0.n_max(), s + n_max)?;
    (0..=n_max).map(|n| order_term(sys, f0, t, s, n, Representation::Cumulant)).collect()
}

/// Order `n` of the second-order-cumulant form: `𝒢_s(-t)` for `n = 0`,
/// otherwise `Σ_{∅≠Z⊆X∖Y} (-1)^{n-|Z|} 𝔄_2(-t, {Y}, {Z})`.
fn second_order_term(sys: &System, t: f64, s: usize, n: usize, f: &DenseOperator) -> Result<DenseOperator> {
    let y: Vec<usize> = (1..=s).collect();
    if n == 0 {
        return sys.group(&y, -t, f);
    }
    let tail = LabelSet::range(s + 1, s + n);
    let ys = LabelSet::range(1, s);
    let mut acc = KahanSum::new(s + n, f.one_particle_dim());
    for z in crate::combinatorics::enumerate_subsets(&tail, true)? {
        let sign = if (n - z.len()) % 2 == 0 { 1.0 } else { -1.0 };
        let arg = ClusterArgument::new(vec![ys.clone(), z])?;
        acc.add(&cumulant(sys, -t, &arg, GroupFlavor::Full, f)?, sign);
    }
    Ok(acc.finish())
}

/// `R_k(τ) = 𝒢_{s+k}(-τ) F⁰_{s+k} + ∫_0^τ 𝒢_{s+k}(-τ+σ) Tr_{s+k+1} Σ_j (-𝒩_int(j, s+k+1)) R_{k+1}(σ) dσ`.
fn iteration_level(sys: &System, f0: &OperatorSequence, s: usize, k: usize, depth: usize, tau: f64) -> Result<DenseOperator> {
    let m = s + k;
    let labels: Vec<usize> = (1..=m).collect();
    let f = f0.component(m).expect("within capacity");
    let mut out = sys.group(&labels, -tau, f)?;
    if k == depth || tau == 0.0 {
        return Ok(out);
    }
    let mut acc = KahanSum::new(m, f0.d());
    for (sigma, w) in mapped(0.0, tau) {
        let inner = iteration_level(sys, f0, s, k + 1, depth, sigma)?;
        let mut kick = DenseOperator::zeros(m + 1, f0.d());
        for j in 1..=m {
            kick += &sys.nint_state(j, m + 1, &inner)?;
        }
        acc.add(&sys.group(&labels, -tau + sigma, &trace_tail(&kick, 1))?, w);
    }
    out += &acc.finish();
    Ok(out)
}

/// Truncated norm bound constant `c_α = e²(1 - e/α)^{-1}`, `α > e`.
pub fn series_norm_constant(alpha: f64) -> Result<f64> {
    let e = std::f64::consts::E;
    if alpha <= e {
        return Err(Error::Argument(format!("alpha = {alpha} must exceed e")));
    }
    Ok(e * e / (1.0 - e / alpha))
}

/// Compositions of `k` into `parts` nonnegative parts.
fn compositions(k: usize, parts: usize) -> Vec<Vec<usize>> {
    if parts == 0 {
        return if k == 0 { vec![Vec::new()] } else { Vec::new() };
    }
    if parts == 1 {
        return vec![vec![k]];
    }
    let mut out = Vec::new();
    for first in 0..=k {
        for mut rest in compositions(k - first, parts - 1) {
            rest.insert(0, first);
            out.push(rest);
        }
    }
    out
}

/// Nonlinear reduced cumulant `U_{1+n}(t; {Y}, s+1, ..., s+n | G⁰)` on
/// `s + n` particles. Components of `G⁰` beyond its length count as zero.
pub fn nonlinear_reduced_cumulant(sys: &System, g0: &OperatorSequence, t: f64, s: usize, n: usize) -> Result<DenseOperator> {
    let total = s + n;
    crate::error::capacity("particle number", sys.spec().max_particles, total)?;
    let d = g0.d();
    let mut acc = KahanSum::new(total, d);
    for k in 0..=n {
        let grouped = total - k;
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        let outer = sign * binomial(n, k) as f64;
        for p in index_partitions(grouped) {
            let blocks = blocks_one_based(&p, 0);
            let arg = cluster_arg(&blocks)?;
            let mut prod_acc = KahanSum::new(total, d);
            for comp in compositions(k, blocks.len()) {
                let mut next = grouped + 1;
                let mut extended = Vec::with_capacity(blocks.len());
                for (b, &ci) in blocks.iter().zip(&comp) {
                    let mut v = b.clone();
                    v.extend(next..next + ci);
                    next += ci;
                    extended.push(v);
                }
                let Some(prod) = product_over(g0, &extended, total) else { continue };
                let multinomial = factorial(k) as f64 / comp.iter().map(|&ci| factorial(ci) as f64).product::<f64>();
                prod_acc.add(&prod, multinomial);
            }
            if prod_acc.terms() == 0 {
                continue;
            }
            acc.add(&cumulant(sys, -t, &arg, GroupFlavor::Full, &prod_acc.finish())?, outer);
        }
    }
    Ok(acc.finish())
}

/// `G_s(t) = Σ_n Tr_{s+1..s+n} U_{1+n}(t; {Y}, ... | G⁰) / n!`, truncated at `n_max`.
pub fn marginal_correlations_series(
    sys: &System,
    g0: &OperatorSequence,
    t: f64,
    s: usize,
    n_max: usize,
) -> Result<SeriesResult> {
    if s == 0 {
        return Err(Error::Argument("marginal order starts at 1".into()));
    }
    let mut acc = KahanSum::new(s, g0.d());
    let mut order_norms = Vec::with_capacity(n_max + 1);
    for n in 0..=n_max {
        let u = nonlinear_reduced_cumulant(sys, g0, t, s, n)?;
        let term = trace_tail(&u, n).scale_re(1.0 / factorial(n) as f64);
        order_norms.push(term.trace_norm());
        acc.add(&term, 1.0);
    }
    Ok(SeriesResult { value: acc.finish(), order_norms })
}

/// Whether `max_n ‖G⁰_n‖₁` lies below the convergence threshold `(2e³)^{-1}`.
pub fn correlation_series_converges(g0: &OperatorSequence) -> bool {
    let e = std::f64::consts::E;
    let max = g0.components().iter().map(DenseOperator::trace_norm).fold(0.0, f64::max);
    max < 1.0 / (2.0 * e.powi(3))
}

/// Chaos-data term `Tr_{s+1..s+n} 𝔄(-t, arg) Π f_1(i) / n!` where the
/// cumulant has the cluster `{1..s}` as head when `headed`, or all
/// `s + n` particles as singletons otherwise.
pub fn chaos_term(sys: &System, f1: &DenseOperator, t: f64, s: usize, n: usize, headed: bool) -> Result<DenseOperator> {
    let total = s + n;
    let d = f1.one_particle_dim();
    let mut prod = DenseOperator::identity(0, d);
    for _ in 0..total {
        prod = crate::hilbert::tensor(&prod, f1)?;
    }
    let arg = if headed {
        let tail: Vec<usize> = (s + 1..=total).collect();
        ClusterArgument::headed(&LabelSet::range(1, s), &tail)?
    } else {
        let all: Vec<usize> = (1..=total).collect();
        ClusterArgument::singletons(&all)?
    };
    let evolved = cumulant(sys, -t, &arg, GroupFlavor::Full, &prod)?;
    Ok(trace_tail(&evolved, n).scale_re(1.0 / factorial(n) as f64))
}

/// `G_s(t)` for chaos data `G⁰ = (0, f_1, 0, ...)` through `(s+n)`-th order
/// cumulants, truncated at `n_max`.
pub fn chaos_correlations(sys: &System, f1: &DenseOperator, t: f64, s: usize, n_max: usize) -> Result<DenseOperator> {
    let mut acc = KahanSum::new(s, f1.one_particle_dim());
    for n in 0..=n_max {
        acc.add(&chaos_term(sys, f1, t, s, n, false)?, 1.0);
    }
    Ok(acc.finish())
}

/// Marginal correlations extracted from chaos-data marginals: every
/// `F_k(t)` is expanded by its cumulant series, the marginals are combined
/// by `G_s = Σ_P (-1)^{|P|-1}(|P|-1)! Π F_{|X_i|}(X_i)`, and only products
/// of total degree at most `s + n_max` in `f_1` are kept.
pub fn correlations_from_chaos_marginals(sys: &System, f1: &DenseOperator, t: f64, s: usize, n_max: usize) -> Result<DenseOperator> {
    let mut terms: Vec<Vec<DenseOperator>> = vec![Vec::new()];
    for k in 1..=s {
        terms.push((0..=n_max).map(|m| chaos_term(sys, f1, t, k, m, true)).collect::<Result<_>>()?);
    }
    graded_extraction(&terms, s, n_max, f1.one_particle_dim())
}

/// Marginal correlations extracted from the marginal series of `F⁰`: the
/// same graded combination as for chaos data, where order `m` of `F_k(t)`
/// carries degree `k + m` in `F⁰`. With `G⁰ = Ln⋆ F⁰` this matches
/// [`marginal_correlations_series`] order by order.
pub fn correlations_from_marginals(sys: &System, f0: &OperatorSequence, t: f64, s: usize, n_max: usize) -> Result<DenseOperator> {
    let mut terms: Vec<Vec<DenseOperator>> = vec![Vec::new()];
    for k in 1..=s {
        terms.push(marginal_order_terms(sys, f0, t, k, n_max)?);
    }
    graded_extraction(&terms, s, n_max, f0.d())
}

fn graded_extraction(terms: &[Vec<DenseOperator>], s: usize, n_max: usize, d: usize) -> Result<DenseOperator> {
    let mut acc = KahanSum::new(s, d);
    for p in index_partitions(s) {
        let blocks = blocks_one_based(&p, 0);
        let weight = mobius_weight(blocks.len()) as f64;
        for orders in bounded_tuples(blocks.len(), n_max) {
            let parts: Vec<(&DenseOperator, &[usize])> =
                blocks.iter().zip(&orders).map(|(b, &m)| (&terms[b.len()][m], b.as_slice())).collect();
            acc.add(&place(&parts, s, d)?, weight);
        }
    }
    Ok(acc.finish())
}

/// Tuples of `len` nonnegative integers with sum at most `bound`.
fn bounded_tuples(len: usize, bound: usize) -> Vec<Vec<usize>> {
    (0..=bound).flat_map(|total| compositions(total, len)).collect()
}

/// `Tr_1(a² - ⟨A⟩²)G_1 + Tr_{12} a(1)a(2) G_2` with `⟨A⟩ = Tr_1 a G_1`.
pub fn dispersion_functional(a1: &DenseOperator, g1: &DenseOperator, g2: &DenseOperator) -> Result<f64> {
    if !a1.is_hermitian(crate::hilbert::HERMITIAN_TOL) {
        return Err(Error::NotHermitian(a1.hermitian_deviation()));
    }
    let mean = (a1 * g1).trace();
    let shifted = &(a1 * a1) - &DenseOperator::identity(1, a1.one_particle_dim()).scale(mean * mean);
    let aa = crate::hilbert::tensor(a1, a1)?;
    let value: C64 = (&shifted * g1).trace() + (&aa * g2).trace();
    Ok(value.re)
}

/// Ordinary variance `Tr a²F_1 + Tr a(1)a(2)F_2 - (Tr aF_1)²` of the
/// additive observable in terms of marginals.
pub fn variance_from_marginals(a1: &DenseOperator, f1: &DenseOperator, f2: &DenseOperator) -> Result<f64> {
    if !a1.is_hermitian(crate::hilbert::HERMITIAN_TOL) {
        return Err(Error::NotHermitian(a1.hermitian_deviation()));
    }
    let mean = (a1 * f1).trace();
    let aa = crate::hilbert::tensor(a1, a1)?;
    Ok(((&(a1 * a1) * f1).trace() + (&aa * f2).trace() - mean * mean).re)
}

/// `G_s = Σ_n Tr_{s+1..s+n} g_{s+n} / n!` over the available components.
pub fn marginal_correlations_from_correlations(g: &OperatorSequence) -> Result<OperatorSequence> {
    let d = g.d();
    let mut out = OperatorSequence::zeros(g.n_max(), d);
    for s in 1..=g.n_max() {
        let mut acc = KahanSum::new(s, d);
        for n in 0..=g.n_max() - s {
            acc.add(&trace_tail(g.component(s + n).expect("in range"), n), 1.0 / factorial(n) as f64);
        }
        out.set_component(acc.finish())?;
    }
    Ok(out)
}

/// The dispersion written directly in correlation operators `g`:
/// `Σ_n Tr (a² - ⟨A⟩²) g_{1+n} / n! + Σ_n Tr a(1)a(2) g_{2+n} / n!`.
pub fn dispersion_from_correlations(a1: &DenseOperator, g: &OperatorSequence) -> Result<f64> {
    if !a1.is_hermitian(crate::hilbert::HERMITIAN_TOL) {
        return Err(Error::NotHermitian(a1.hermitian_deviation()));
    }
    let d = g.d();
    let mut mean = c(0.0);
    for n in 0..g.n_max() {
        let op = g.component(1 + n).expect("in range");
        mean += (&embed(a1, &[1], 1 + n)? * op).trace() / factorial(n) as f64;
    }
    let shifted = &(a1 * a1) - &DenseOperator::identity(1, d).scale(mean * mean);
    let aa = crate::hilbert::tensor(a1, a1)?;
    let mut acc = c(0.0);
    for n in 0..g.n_max() {
        let op = g.component(1 + n).expect("in range");
        acc += (&embed(&shifted, &[1], 1 + n)? * op).trace() / factorial(n) as f64;
    }
    for n in 0..g.n_max().saturating_sub(1) {
        let op = g.component(2 + n).expect("in range");
        acc += (&embed(&aa, &[1, 2], 2 + n)? * op).trace() / factorial(n) as f64;
    }
    Ok(acc.re)
}

/// Two-particle Ursell sequence `g_1 = e^{-βK}`,
/// `g_2 = e^{-β(K(1)+K(2))}(e^{-βεΦ} - I)`.
pub fn ursell_sequence(spec: &HamiltonianSpec, beta: f64) -> Result<OperatorSequence> {
    let d = spec.d;
    let k = spec.kinetic_op();
    let g1 = exp_hermitian(&k, -beta)?;
    let k2 = &embed(&k, &[1], 2)? + &embed(&k, &[2], 2)?;
    let phi = spec.phi2_op().scale_re(spec.epsilon);
    let boltz = &exp_hermitian(&phi, -beta)? - &DenseOperator::identity(2, d);
    let g2 = &exp_hermitian(&k2, -beta)? * &boltz;
    OperatorSequence::new(c(0.0), vec![g1, g2], d)
}

fn exp_hermitian(h: &DenseOperator, x: f64) -> Result<DenseOperator> {
    let eig = crate::hilbert::hermitian_eigen(h.matrix());
    let diag = eig.eigenvalues.map(|v| c((x * v).exp()));
    let m = &eig.eigenvectors * nalgebra::DMatrix::from_diagonal(&diag) * eig.eigenvectors.adjoint();
    DenseOperator::new(h.n_particles(), h.one_particle_dim(), m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::random::{random_density, random_hermitian, rng};

    fn sys() -> System {
        System::new(HamiltonianSpec::transverse(0.9, 0.4)).unwrap()
    }

    fn state(seed: u64, n_max: usize) -> GrandCanonicalState {
        GrandCanonicalState::random(n_max, 2, 0.3, &mut rng(seed)).unwrap()
    }

    fn seq_diff(a: &OperatorSequence, b: &OperatorSequence) -> f64 {
        a.components().iter().zip(b.components()).map(|(x, y)| (x - y).trace_norm()).fold(0.0, f64::max)
    }

    #[test]
    fn evolve_at_zero_and_traces() {
        let s = sys();
        let st = state(1, 3);
        let same = evolve_exact(&s, &st, 0.0).unwrap();
        for (a, b) in st.sequence().components().iter().zip(same.sequence().components()) {
            assert!((a - b).max_abs() < 1e-15);
        }
        let ev = evolve_exact(&s, &st, 1.3).unwrap();
        for (a, b) in st.sequence().components().iter().zip(ev.sequence().components()) {
            assert!((a.trace() - b.trace()).norm() < 1e-12);
            assert!(b.is_positive(1e-10));
        }
    }

    #[test]
    fn oracle_top_component() {
        let st = state(2, 3);
        let f = marginals_oracle(&st, 3).unwrap();
        let top = st.sequence().component(3).unwrap().scale_re(1.0 / st.normalization());
        assert!((f.component(3).unwrap() - &top).max_abs() < 1e-15);
        assert!(f.is_hermitian(1e-12));
    }

    #[test]
    fn fixed_n_marginals() {
        let rho = random_symmetric_density(3, 2, &mut rng(3));
        let st = GrandCanonicalState::fixed_n(&rho).unwrap();
        let f = marginals_oracle(&st, 3).unwrap();
        assert!((st.normalization() - 7.0 / 6.0).abs() < 1e-14);
        assert!((f.component(3).unwrap().trace().re - 6.0 / 7.0).abs() < 1e-12);
    }

    #[test]
    fn correlation_round_trip() {
        let st = state(4, 3);
        let g = correlations_from_density(&st).unwrap();
        let back = density_from_correlations(&g).unwrap();
        assert!(seq_diff(back.sequence(), st.sequence()) < 1e-11);
        let d = st.sequence();
        let d1 = d.component(1).unwrap();
        let expect = d.component(2).unwrap() - &crate::hilbert::tensor(d1, d1).unwrap();
        assert!((g.component(2).unwrap() - &expect).max_abs() < 1e-14);
    }

    #[test]
    fn product_density_gives_chaos() {
        let f = random_density(1, 2, &mut rng(5));
        let g = star_ln(&OperatorSequence::product_state(&f, 3)).unwrap();
        assert!(g.component(2).unwrap().max_abs() < 1e-15);
        assert!(g.component(3).unwrap().max_abs() < 1e-15);
    }

    #[test]
    fn von_neumann_matches_exact() {
        let s = sys();
        let st = state(6, 3);
        let g0 = correlations_from_density(&st).unwrap();
        for t in [0.3, 1.1] {
            let via = solve_von_neumann_hierarchy(&s, &g0, t).unwrap();
            let exact = correlations_from_density(&evolve_exact(&s, &st, t).unwrap()).unwrap();
            assert!(seq_diff(&via, &exact) < 1e-10);
        }
    }

    #[test]
    fn von_neumann_finite_difference() {
        let s = sys();
        let g0 = correlations_from_density(&state(7, 3)).unwrap();
        let (t, dt) = (0.6, 1e-3);
        let plus = solve_von_neumann_hierarchy(&s, &g0, t + dt).unwrap();
        let minus = solve_von_neumann_hierarchy(&s, &g0, t - dt).unwrap();
        let mid = solve_von_neumann_hierarchy(&s, &g0, t).unwrap();
        for k in 1..=3 {
            let fd = (plus.component(k).unwrap() - minus.component(k).unwrap()).scale_re(0.5 / dt);
            let gen = von_neumann_generator(&s, &mid, k).unwrap();
            assert!((&fd - &gen).trace_norm() < 1e-5);
        }
    }

    #[test]
    fn no_interaction_kills_higher_correlations() {
        let s = System::new(HamiltonianSpec::transverse(0.9, 0.4).without_interaction()).unwrap();
        let f = random_density(1, 2, &mut rng(8));
        let g0 = OperatorSequence::one_component(&f, 3);
        let g = solve_von_neumann_hierarchy(&s, &g0, 0.9).unwrap();
        assert!(g.component(2).unwrap().max_abs() < 1e-12);
        assert!(g.component(3).unwrap().max_abs() < 1e-12);
    }

    #[test]
    fn cluster_relation() {
        let s = sys();
        let g0 = correlations_from_density(&state(9, 3)).unwrap();
        let t = 0.8;
        let gt = solve_von_neumann_hierarchy(&s, &g0, t).unwrap();
        for (ys, n) in [(2, 1), (1, 2), (2, 0)] {
            let lhs = cluster_correlations(&s, &g0, t, ys, n).unwrap();
            let rhs = cluster_correlations_from_evolved(&gt, ys, n).unwrap();
            assert!((&lhs - &rhs).trace_norm() < 1e-10, "{ys} {n}");
        }
    }

    #[test]
    fn bbgky_representations_match_oracle() {
        let s = sys();
        let st = state(10, 4);
        let f0 = marginals_oracle(&st, 4).unwrap();
        for t in [0.5, 2.0] {
            let exact = marginals_oracle(&evolve_exact(&s, &st, t).unwrap(), 4).unwrap();
            for sm in 1..=4 {
                let want = exact.component(sm).unwrap();
                for rep in [Representation::Cumulant, Representation::Reduced, Representation::SecondOrder] {
                    let got = marginal_series_bbgky(&s, &f0, t, sm, rep, 4 - sm).unwrap().value;
                    assert!((&got - want).trace_norm() < 1e-10, "{rep:?} s={sm} t={t}");
                }
            }
        }
    }

    #[test]
    fn iteration_representation() {
        let s = sys();
        let st = state(11, 3);
        let f0 = marginals_oracle(&st, 3).unwrap();
        let t = 1.0;
        let exact = marginals_oracle(&evolve_exact(&s, &st, t).unwrap(), 3).unwrap();
        let got = marginal_series_bbgky(&s, &f0, t, 1, Representation::Iteration, 2).unwrap().value;
        assert!((&got - exact.component(1).unwrap()).trace_norm() < 1e-7);
    }

    #[test]
    fn nonlinear_series_at_zero_and_chaos() {
        let s = sys();
        let st = state(12, 3);
        let g0 = star_ln(&marginals_oracle(&st, 3).unwrap()).unwrap();
        let at0 = marginal_correlations_series(&s, &g0, 0.0, 2, 1).unwrap().value;
        assert!((&at0 - g0.component(2).unwrap()).max_abs() < 1e-14);
        let f1 = random_density(1, 2, &mut rng(13)).scale_re(0.1);
        let chaos = OperatorSequence::one_component(&f1, 4);
        let a = marginal_correlations_series(&s, &chaos, 0.7, 2, 2).unwrap().value;
        let b = chaos_correlations(&s, &f1, 0.7, 2, 2).unwrap();
        assert!((&a - &b).trace_norm() < 1e-13);
    }

    #[test]
    fn graded_extraction_matches() {
        let s = sys();
        let f1 = random_density(1, 2, &mut rng(14)).scale_re(0.1);
        for sm in 1..=3 {
            let a = chaos_correlations(&s, &f1, 0.9, sm, 4 - sm).unwrap();
            let b = correlations_from_chaos_marginals(&s, &f1, 0.9, sm, 4 - sm).unwrap();
            assert!((&a - &b).trace_norm() < 1e-12, "s={sm}");
        }
    }

    #[test]
    fn nonlinear_series_matches_marginal_extraction() {
        let s = sys();
        let st = state(22, 4);
        let f0 = marginals_oracle(&st, 4).unwrap();
        let g0 = star_ln(&f0).unwrap();
        for sm in 1..=4 {
            let a = marginal_correlations_series(&s, &g0, 0.5, sm, 4 - sm).unwrap().value;
            let b = correlations_from_marginals(&s, &f0, 0.5, sm, 4 - sm).unwrap();
            assert!((&a - &b).trace_norm() < 1e-12, "s={sm}");
        }
        let exact = star_ln(&marginals_oracle(&evolve_exact(&s, &st, 0.5).unwrap(), 4).unwrap()).unwrap();
        let g1 = marginal_correlations_series(&s, &g0, 0.5, 1, 3).unwrap().value;
        assert!((&g1 - exact.component(1).unwrap()).trace_norm() < 1e-12);
    }

    #[test]
    fn dispersion_cases() {
        let id = DenseOperator::identity(1, 2);
        let g1 = random_density(1, 2, &mut rng(15));
        let z2 = DenseOperator::zeros(2, 2);
        assert!(dispersion_functional(&id, &g1, &z2).unwrap().abs() < 1e-14);
        let a = random_hermitian(1, 2, &mut rng(16));
        let g = OperatorSequence::new(
            c(0.0),
            vec![
                random_hermitian(1, 2, &mut rng(17)),
                random_hermitian(2, 2, &mut rng(18)).scale_re(0.1),
                random_hermitian(3, 2, &mut rng(19)).scale_re(0.01),
            ],
            2,
        )
        .unwrap();
        let big = marginal_correlations_from_correlations(&g).unwrap();
        let via_g = dispersion_from_correlations(&a, &g).unwrap();
        let via_big = dispersion_functional(&a, big.component(1).unwrap(), big.component(2).unwrap()).unwrap();
        assert!((via_g - via_big).abs() < 1e-12);
        assert!(dispersion_functional(&random_operator_nonherm(), &g1, &z2).is_err());
    }

    fn random_operator_nonherm() -> DenseOperator {
        crate::random::random_operator(1, 2, &mut rng(20))
    }

    #[test]
    fn ursell_is_steady() {
        let spec = HamiltonianSpec::reference(0.9);
        let s = System::new(spec.clone()).unwrap();
        let g = ursell_sequence(&spec, 0.7).unwrap();
        for k in 1..=2 {
            assert!(von_neumann_generator(&s, &g, k).unwrap().trace_norm() < 1e-8);
        }
    }

    #[test]
    fn series_norm_bound() {
        let s = sys();
        let st = state(21, 4);
        let f0 = marginals_oracle(&st, 4).unwrap();
        let alpha = 4.0;
        let bound = series_norm_constant(alpha).unwrap() * f0.norm_alpha(alpha);
        let mut ft = OperatorSequence::unit(4, 2);
        for sm in 1..=4 {
            let v = marginal_series_bbgky(&s, &f0, 1.0, sm, Representation::Cumulant, 4 - sm).unwrap().value;
            ft.set_component(v).unwrap();
        }
        assert!(ft.norm_alpha(alpha) <= bound);
    }
}

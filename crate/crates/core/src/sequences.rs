//! Truncated operator sequences and their cluster algebra.
//!
//! A sequence holds a scalar and one operator per particle number
//! `1..=n_max`; everything beyond `n_max` is zero.

use crate::combinatorics::{enumerate_subsets, index_partitions, mobius_weight, LabelSet};
use crate::error::{Error, Result};
use crate::hilbert::{c, place, symmetry_deviation, trace_tail, DenseOperator, KahanSum, OperatorJson, Statistics, C64};
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq)]
pub struct OperatorSequence {
    scalar0: C64,
    components: Vec<DenseOperator>,
    d: usize,
    pub statistics: Statistics,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SequenceJson {
    pub scalar0: [f64; 2],
    pub components: Vec<OperatorJson>,
}

impl OperatorSequence {
    pub fn new(scalar0: C64, components: Vec<DenseOperator>, d: usize) -> Result<Self> {
        for (i, op) in components.iter().enumerate() {
            if op.n_particles() != i + 1 || op.one_particle_dim() != d {
                return Err(Error::Dimension(format!(
                    "component {} lives on {} particles of dimension {}",
                    i + 1,
                    op.n_particles(),
                    op.one_particle_dim()
                )));
            }
        }
        Ok(Self { scalar0, components, d, statistics: Statistics::MaxwellBoltzmann })
    }

    pub fn zeros(n_max: usize, d: usize) -> Self {
        Self::from_fn(c(0.0), n_max, d, |n| DenseOperator::zeros(n, d))
    }

    /// The unit `(1, 0, 0, ...)`.
    pub fn unit(n_max: usize, d: usize) -> Self {
        Self::from_fn(c(1.0), n_max, d, |n| DenseOperator::zeros(n, d))
    }

    pub fn from_fn(scalar0: C64, n_max: usize, d: usize, f: impl FnMut(usize) -> DenseOperator) -> Self {
        let components = (1..=n_max).map(f).collect();
        Self { scalar0, components, d, statistics: Statistics::MaxwellBoltzmann }
    }

    /// `(0, h, 0, ...)`.
    pub fn one_component(h: &DenseOperator, n_max: usize) -> Self {
        let k = h.n_particles();
        let d = h.one_particle_dim();
        Self::from_fn(c(0.0), n_max, d, |n| if n == k { h.clone() } else { DenseOperator::zeros(n, d) })
    }

    /// `(1, f, f⊗f, ...)`.
    pub fn product_state(f1: &DenseOperator, n_max: usize) -> Self {
        let d = f1.one_particle_dim();
        let mut acc = DenseOperator::identity(0, d);
        Self::from_fn(c(1.0), n_max, d, |_| {
            acc = crate::hilbert::tensor(&acc, f1).expect("same dimension");
            acc.clone()
        })
    }

    pub fn n_max(&self) -> usize {
        self.components.len()
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn scalar0(&self) -> C64 {
        self.scalar0
    }

    pub fn set_scalar0(&mut self, z: C64) {
        self.scalar0 = z;
    }

    /// Component on `n >= 1` particles, `None` beyond truncation.
    pub fn component(&self, n: usize) -> Option<&DenseOperator> {
        if n == 0 {
            None
        } else {
            self.components.get(n - 1)
        }
    }

    /// Component `n` as an operator, the scalar as a 0-particle operator.
    pub fn component_op(&self, n: usize) -> DenseOperator {
        if n == 0 {
            return DenseOperator::identity(0, self.d).scale(self.scalar0);
        }
        self.component(n).cloned().unwrap_or_else(|| DenseOperator::zeros(n, self.d))
    }

    pub fn set_component(&mut self, op: DenseOperator) -> Result<()> {
        let n = op.n_particles();
        if n == 0 || n > self.n_max() || op.one_particle_dim() != self.d {
            return Err(Error::Dimension(format!("component on {n} particles outside 1..={}", self.n_max())));
        }
        self.components[n - 1] = op;
        Ok(())
    }

    pub fn components(&self) -> &[DenseOperator] {
        &self.components
    }

    pub fn truncate(&self, n_max: usize) -> Self {
        let mut s = self.clone();
        s.components.truncate(n_max);
        s
    }

    pub fn map(&self, mut f: impl FnMut(&DenseOperator) -> DenseOperator) -> Self {
        Self { components: self.components.iter().map(&mut f).collect(), ..self.clone() }
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        self.components.iter().all(|op| symmetry_deviation(op) <= tol)
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.scalar0.im.abs() <= tol && self.components.iter().all(|op| op.is_hermitian(tol))
    }

    fn check_compatible(&self, other: &Self) -> Result<()> {
        if self.d != other.d {
            return Err(Error::Dimension(format!("sequences of d={} and d={}", self.d, other.d)));
        }
        Ok(())
    }

    /// `max_n γ^n/n! ‖g_n‖`.
    pub fn norm_gamma(&self, gamma: f64) -> f64 {
        let mut best = self.scalar0.norm();
        let mut w = 1.0;
        for (i, op) in self.components.iter().enumerate() {
            w *= gamma / (i + 1) as f64;
            best = best.max(w * op.operator_norm());
        }
        best
    }

    /// `Σ_n ‖f_n‖₁`.
    pub fn norm_trace(&self) -> f64 {
        self.scalar0.norm() + self.components.iter().map(|op| op.trace_norm()).sum::<f64>()
    }

    /// `Σ_n α^n ‖f_n‖₁`.
    pub fn norm_alpha(&self, alpha: f64) -> f64 {
        let mut w = 1.0;
        let mut acc = self.scalar0.norm();
        for op in &self.components {
            w *= alpha;
            acc += w * op.trace_norm();
        }
        acc
    }

    /// `(I, f) = Σ_n Tr f_n / n!`.
    pub fn normalization(&self) -> C64 {
        let mut w = 1.0;
        let mut acc = self.scalar0;
        for (i, op) in self.components.iter().enumerate() {
            w /= (i + 1) as f64;
            acc += op.trace() * w;
        }
        acc
    }

    pub fn to_json(&self) -> SequenceJson {
        SequenceJson {
            scalar0: [self.scalar0.re, self.scalar0.im],
            components: self.components.iter().map(|op| op.to_json()).collect(),
        }
    }

    pub fn from_json(j: &SequenceJson) -> Result<Self> {
        let components: Vec<DenseOperator> = j.components.iter().map(DenseOperator::from_json).collect::<Result<_>>()?;
        let d = components.first().map_or(1, |op| op.one_particle_dim());
        Self::new(C64::new(j.scalar0[0], j.scalar0[1]), components, d)
    }
}

/// `(g, f) = Σ_n Tr(g_n f_n)/n!`.
pub fn sequence_functional(g: &OperatorSequence, f: &OperatorSequence) -> Result<C64> {
    g.check_compatible(f)?;
    let mut acc = g.scalar0 * f.scalar0;
    let mut w = 1.0;
    for (i, (a, b)) in g.components.iter().zip(f.components.iter()).enumerate() {
        w /= (i + 1) as f64;
        acc += (a * b).trace() * w;
    }
    Ok(acc)
}

/// Product of sequence components over a partition of positions `1..=n`:
/// block `b` (zero-based indices) receives the component `f_{|b|}`.
pub(crate) fn block_product(f: &OperatorSequence, blocks: &[Vec<usize>], n: usize) -> DenseOperator {
    let d = f.d;
    let mut scalar = c(1.0);
    let mut ops = Vec::with_capacity(blocks.len());
    let mut labels: Vec<Vec<usize>> = Vec::with_capacity(blocks.len());
    for b in blocks {
        match f.component(b.len()) {
            Some(op) => {
                ops.push(op);
                labels.push(b.iter().map(|i| i + 1).collect());
            }
            None => scalar = c(0.0),
        }
    }
    if scalar == c(0.0) {
        return DenseOperator::zeros(n, d);
    }
    let parts: Vec<(&DenseOperator, &[usize])> = ops.iter().zip(labels.iter()).map(|(o, l)| (*o, l.as_slice())).collect();
    place(&parts, n, d).expect("disjoint blocks cover the space")
}

/// `(f⋆g)(Y) = Σ_{Z⊆Y} f(Z) g(Y∖Z)`.
pub fn star_product(f: &OperatorSequence, g: &OperatorSequence) -> Result<OperatorSequence> {
    f.check_compatible(g)?;
    let p = round_product(&PinnedSequence::plain(f), &PinnedSequence::plain(g))?;
    let scalar0 = f.scalar0 * g.scalar0;
    let components = p.components.into_iter().skip(1).collect();
    Ok(OperatorSequence { scalar0, components, d: f.d, statistics: f.statistics })
}

fn partition_sum(h: &OperatorSequence, weight: impl Fn(usize) -> f64) -> Vec<DenseOperator> {
    (1..=h.n_max())
        .map(|n| {
            let mut acc = KahanSum::new(n, h.d);
            for blocks in index_partitions(n) {
                let w = weight(blocks.len());
                if w != 0.0 {
                    acc.add(&block_product(h, &blocks, n), w);
                }
            }
            acc.finish()
        })
        .collect()
}

/// `Exp⋆ h = 𝕀 + Σ_P Π h(X_i)`; requires `h₀ = 0`.
pub fn star_exp(h: &OperatorSequence) -> Result<OperatorSequence> {
    if h.scalar0.norm() > 0.0 {
        return Err(Error::Argument("Exp⋆ needs a vanishing scalar component".into()));
    }
    Ok(OperatorSequence { scalar0: c(1.0), components: partition_sum(h, |_| 1.0), d: h.d, statistics: h.statistics })
}

/// `Ln⋆(𝕀 + h) = Σ_P (-1)^{|P|-1}(|P|-1)! Π h(X_i)`; requires scalar `1`.
pub fn star_ln(one_plus_h: &OperatorSequence) -> Result<OperatorSequence> {
    if (one_plus_h.scalar0 - c(1.0)).norm() > 1e-14 {
        return Err(Error::Argument("Ln⋆ needs a unit scalar component".into()));
    }
    let h = OperatorSequence { scalar0: c(0.0), ..one_plus_h.clone() };
    Ok(OperatorSequence {
        scalar0: c(0.0),
        components: partition_sum(&h, |k| mobius_weight(k) as f64),
        d: h.d,
        statistics: h.statistics,
    })
}

/// Sequence with a pinned label set: component `n` is an operator on the
/// pinned labels (in increasing order) followed by `n` extra particles.
/// This models `𝔡_Y f` and its cluster form.
#[derive(Clone, Debug, PartialEq)]
pub struct PinnedSequence {
    pinned: LabelSet,
    components: Vec<DenseOperator>,
    d: usize,
}

impl PinnedSequence {
    pub fn new(pinned: LabelSet, components: Vec<DenseOperator>, d: usize) -> Result<Self> {
        for (n, op) in components.iter().enumerate() {
            if op.n_particles() != pinned.len() + n || op.one_particle_dim() != d {
                return Err(Error::Dimension(format!("pinned component {n} has wrong size")));
            }
        }
        Ok(Self { pinned, components, d })
    }

    fn plain(f: &OperatorSequence) -> Self {
        let components = (0..=f.n_max()).map(|n| f.component_op(n)).collect();
        Self { pinned: LabelSet::empty(), components, d: f.d }
    }

    pub fn pinned(&self) -> &LabelSet {
        &self.pinned
    }

    /// Largest number of extra particles carried.
    pub fn max_extra(&self) -> usize {
        self.components.len().saturating_sub(1)
    }

    pub fn component(&self, n: usize) -> Option<&DenseOperator> {
        self.components.get(n)
    }

    /// `(I, ·)` over the extra particles: `Σ_n Tr_{extras} c_n / n!`.
    pub fn trace_extras(&self) -> DenseOperator {
        let mut acc = KahanSum::new(self.pinned.len(), self.d);
        let mut w = 1.0;
        for (n, op) in self.components.iter().enumerate() {
            if n > 0 {
                w /= n as f64;
            }
            acc.add(&trace_tail(op, n), w);
        }
        acc.finish()
    }

    pub fn max_difference(&self, other: &Self) -> f64 {
        self.components
            .iter()
            .zip(other.components.iter())
            .map(|(a, b)| (a - b).trace_norm())
            .fold(0.0, f64::max)
    }
}

/// `𝔡_Y f`: component `n` is `f_{|Y|+n}(Y, extras)`.
pub fn shift_map(f: &OperatorSequence, y: &LabelSet) -> Result<PinnedSequence> {
    let k = y.len();
    if k > f.n_max() {
        return Err(Error::Capacity { what: "shifted sequence", limit: f.n_max(), got: k });
    }
    let components = (0..=f.n_max() - k).map(|n| f.component_op(k + n)).collect();
    PinnedSequence::new(y.clone(), components, f.d)
}

/// `𝔡_{{Y}} Exp⋆ h`: partitions of `({Y}, extras)` with `Y` kept whole.
pub fn cluster_shift_exp(h: &OperatorSequence, y: &LabelSet) -> Result<PinnedSequence> {
    let k = y.len();
    if k == 0 || k > h.n_max() {
        return Err(Error::Capacity { what: "cluster shift", limit: h.n_max(), got: k });
    }
    let d = h.d;
    let mut components = Vec::new();
    for n in 0..=h.n_max() - k {
        let total = k + n;
        let mut acc = KahanSum::new(total, d);
        for blocks in index_partitions(1 + n) {
            // element 0 is the cluster, element i >= 1 the extra k + i
            let expanded: Vec<Vec<usize>> = blocks
                .iter()
                .map(|b| {
                    b.iter()
                        .flat_map(|&e| if e == 0 { (0..k).collect::<Vec<_>>() } else { vec![k + e - 1] })
                        .collect()
                })
                .collect();
            acc.add(&block_product(h, &expanded, total), 1.0);
        }
        components.push(acc.finish());
    }
    PinnedSequence::new(y.clone(), components, d)
}

/// `(𝔡_Y f ⋆ 𝔡_{Y'} g)(X) = Σ_{Z⊆X} f(Y, Z) g(Y', X∖Z)` for disjoint `Y, Y'`.
pub fn round_product(f: &PinnedSequence, g: &PinnedSequence) -> Result<PinnedSequence> {
    if f.d != g.d {
        return Err(Error::Dimension("pinned sequences of different d".into()));
    }
    if !f.pinned.is_disjoint(&g.pinned) {
        return Err(Error::Label("pinned sets must be disjoint".into()));
    }
    let pinned = f.pinned.union(&g.pinned);
    let k = pinned.len();
    let pos = |l: usize| pinned.labels().iter().position(|&p| p == l).expect("pinned label") + 1;
    let fp: Vec<usize> = f.pinned.iter().map(|&l| pos(l)).collect();
    let gp: Vec<usize> = g.pinned.iter().map(|&l| pos(l)).collect();
    let max_extra = f.max_extra().min(g.max_extra());
    let d = f.d;
    let mut components = Vec::with_capacity(max_extra + 1);
    for n in 0..=max_extra {
        let mut acc = KahanSum::new(k + n, d);
        let extras = LabelSet::range(k + 1, k + n);
        for z in enumerate_subsets(&extras, false)? {
            let rest = extras.difference(&z);
            let (Some(a), Some(b)) = (f.component(z.len()), g.component(rest.len())) else {
                continue;
            };
            let la: Vec<usize> = fp.iter().copied().chain(z.iter().copied()).collect();
            let lb: Vec<usize> = gp.iter().copied().chain(rest.iter().copied()).collect();
            let term = scalar_aware_place(&[(a, &la), (b, &lb)], k + n, d)?;
            acc.add(&term, 1.0);
        }
        components.push(acc.finish());
    }
    PinnedSequence::new(pinned, components, d)
}

/// `place` that folds 0-particle operators in as scalars.
fn scalar_aware_place(parts: &[(&DenseOperator, &Vec<usize>)], n: usize, d: usize) -> Result<DenseOperator> {
    let mut scalar = c(1.0);
    let mut real: Vec<(&DenseOperator, &[usize])> = Vec::new();
    for (op, l) in parts {
        if op.n_particles() == 0 {
            scalar *= op.matrix()[(0, 0)];
        } else {
            real.push((op, l.as_slice()));
        }
    }
    Ok(place(&real, n, d)?.scale(scalar))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::random::{random_hermitian, random_symmetric_hermitian, rng};

    fn random_seq(n_max: usize, seed: u64, sym: bool) -> OperatorSequence {
        let mut r = rng(seed);
        OperatorSequence::from_fn(c(0.0), n_max, 2, |n| {
            let h = if sym { random_symmetric_hermitian(n, 2, &mut r) } else { random_hermitian(n, 2, &mut r) };
            h.scale_re(0.5)
        })
    }

    fn max_diff(a: &OperatorSequence, b: &OperatorSequence) -> f64 {
        a.components
            .iter()
            .zip(b.components.iter())
            .map(|(x, y)| (x - y).trace_norm())
            .fold((a.scalar0 - b.scalar0).norm(), f64::max)
    }

    #[test]
    fn unit_is_neutral() {
        let f = random_seq(3, 1, false);
        let one = OperatorSequence::unit(3, 2);
        assert!(max_diff(&star_product(&f, &one).unwrap(), &f) < 1e-14);
    }

    #[test]
    fn scalar_product_and_commutativity() {
        let mut f = random_seq(3, 2, true);
        let mut g = random_seq(3, 3, true);
        f.set_scalar0(c(2.0));
        g.set_scalar0(c(-0.5));
        let fg = star_product(&f, &g).unwrap();
        assert_eq!(fg.scalar0(), c(-1.0));
        assert!(max_diff(&fg, &star_product(&g, &f).unwrap()) < 1e-12);
    }

    #[test]
    fn exp_of_one_body_is_product() {
        let h1 = random_hermitian(1, 2, &mut rng(4));
        let e = star_exp(&OperatorSequence::one_component(&h1, 3)).unwrap();
        let expect = OperatorSequence::product_state(&h1, 3);
        assert!(max_diff(&e, &expect) < 1e-13);
        let zero = star_exp(&OperatorSequence::zeros(3, 2)).unwrap();
        assert!(max_diff(&zero, &OperatorSequence::unit(3, 2)) < 1e-15);
    }

    #[test]
    fn ln_second_component() {
        let mut dseq = random_seq(2, 5, true);
        dseq.set_scalar0(c(1.0));
        let g = star_ln(&dseq).unwrap();
        let d1 = dseq.component(1).unwrap();
        let expect = dseq.component(2).unwrap() - &crate::hilbert::tensor(d1, d1).unwrap();
        assert!((g.component(2).unwrap() - &expect).max_abs() < 1e-14);
        assert!(star_ln(&OperatorSequence::unit(3, 2)).unwrap().norm_trace() == 0.0);
        assert!(star_ln(&random_seq(2, 6, false)).is_err());
    }

    #[test]
    fn exp_ln_round_trip() {
        let h = random_seq(4, 7, false);
        let back = star_ln(&star_exp(&h).unwrap()).unwrap();
        assert!(max_diff(&back, &h) < 1e-11);
    }

    #[test]
    fn functional_is_multiplicative() {
        // supports of degree <= 2 keep the truncated product exact
        let cut = |s: OperatorSequence| s.map(|op| if op.n_particles() > 2 { op.scale_re(0.0) } else { op.clone() });
        let mut f = cut(random_seq(4, 8, false));
        let mut g = cut(random_seq(4, 9, false));
        f.set_scalar0(c(1.0));
        g.set_scalar0(c(0.7));
        let lhs = star_product(&f, &g).unwrap().normalization();
        let rhs = f.normalization() * g.normalization();
        assert!((lhs - rhs).norm() < 1e-12);
    }

    #[test]
    fn unit_observable_functional() {
        let mut f = random_seq(3, 10, false);
        f.set_scalar0(c(1.0));
        let ident = OperatorSequence::from_fn(c(1.0), 3, 2, |n| DenseOperator::identity(n, 2));
        assert!((sequence_functional(&ident, &f).unwrap() - f.normalization()).norm() < 1e-14);
    }

    #[test]
    fn cluster_shift_identity() {
        let h = random_seq(3, 11, false);
        let e = star_exp(&h).unwrap();
        let y = LabelSet::range(1, 2);
        let lhs = cluster_shift_exp(&h, &y).unwrap();
        let rhs = round_product(&shift_map(&e, &LabelSet::empty()).unwrap(), &shift_map(&h, &y).unwrap()).unwrap();
        assert!(lhs.max_difference(&rhs) < 1e-12);
    }

    #[test]
    fn empty_shift_is_identity() {
        let h = random_seq(3, 12, false);
        let s = shift_map(&h, &LabelSet::empty()).unwrap();
        for n in 1..=3 {
            assert_eq!(s.component(n).unwrap(), h.component(n).unwrap());
        }
    }
}

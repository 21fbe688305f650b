//! Cumulants of evolution groups over cluster arguments.
//!
//! One engine serves the group, free and scattering flavors. A time `t`
//! here always means the group `𝒢(t)` (observable convention); state-side
//! callers pass `-t`.

use crate::combinatorics::{binomial, enumerate_partitions, enumerate_subsets, index_partitions, mobius_weight, LabelSet};
use crate::dynamics::{GroupFlavor, System};
use crate::error::{Error, Result};
use crate::hilbert::{conjugate, DenseOperator, Direction, KahanSum};
use crate::quadrature::integrate;

/// Disjoint label clusters, each treated as one element.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ClusterArgument {
    clusters: Vec<LabelSet>,
}

impl ClusterArgument {
    pub fn new(clusters: Vec<LabelSet>) -> Result<Self> {
        if clusters.is_empty() {
            return Err(Error::Argument("cluster argument needs at least one cluster".into()));
        }
        let mut seen = LabelSet::empty();
        for c in &clusters {
            if c.is_empty() || !c.is_disjoint(&seen) {
                return Err(Error::Label(format!("clusters must be nonempty and disjoint: {clusters:?}")));
            }
            seen = seen.union(c);
        }
        Ok(Self { clusters })
    }

    /// Every label its own cluster.
    pub fn singletons(labels: &[usize]) -> Result<Self> {
        Self::new(labels.iter().map(|&l| LabelSet::new(vec![l])).collect::<Result<_>>()?)
    }

    /// `({Y}, tail...)`: the head as one cluster followed by singletons.
    pub fn headed(head: &LabelSet, tail: &[usize]) -> Result<Self> {
        let mut clusters = vec![head.clone()];
        for &l in tail {
            clusters.push(LabelSet::new(vec![l])?);
        }
        Self::new(clusters)
    }

    pub fn clusters(&self) -> &[LabelSet] {
        &self.clusters
    }

    pub fn len(&self) -> usize {
        self.clusters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.clusters.is_empty()
    }

    /// Declusterization `θ`: the union of all clusters.
    pub fn theta(&self) -> LabelSet {
        self.clusters.iter().fold(LabelSet::empty(), |acc, c| acc.union(c))
    }
}

fn signed(t: f64, dir: Direction) -> f64 {
    match dir {
        Direction::Forward => t,
        Direction::Backward => -t,
    }
}

/// Product of groups on disjoint label blocks applied to `x`.
pub fn apply_blocks(
    sys: &System,
    blocks: &[Vec<usize>],
    t: f64,
    flavor: GroupFlavor,
    x: &DenseOperator,
) -> Result<DenseOperator> {
    let nonempty: Vec<&[usize]> = blocks.iter().filter(|b| !b.is_empty()).map(|b| b.as_slice()).collect();
    if nonempty.is_empty() {
        return Ok(x.clone());
    }
    let w = sys.product_matrix(&nonempty, t, flavor, x.n_particles())?;
    DenseOperator::new(x.n_particles(), x.one_particle_dim(), conjugate(&w, x.matrix()))
}

/// `Σ_{P'} (-1)^{|P'|-1}(|P'|-1)! Π_k 𝒢(t, θ(Z_k))` applied to `target`,
/// with the partition taken over the clusters of `arg`. Returns the result
/// and the number of terms.
pub fn cumulant_with_count(
    sys: &System,
    t: f64,
    arg: &ClusterArgument,
    flavor: GroupFlavor,
    target: &DenseOperator,
) -> Result<(DenseOperator, usize)> {
    let theta = arg.theta();
    if theta.max_label().is_some_and(|m| m > target.n_particles()) {
        return Err(Error::Label(format!(
            "cluster labels {:?} exceed {} particles",
            theta.labels(),
            target.n_particles()
        )));
    }
    crate::error::capacity("cumulant order", crate::combinatorics::MAX_PARTITION_GROUND, arg.len())?;
    let mut acc = KahanSum::new(target.n_particles(), target.one_particle_dim());
    for p in index_partitions(arg.len()) {
        let blocks: Vec<Vec<usize>> = p
            .iter()
            .map(|b| {
                let mut v: Vec<usize> = b.iter().flat_map(|&i| arg.clusters[i].iter().copied()).collect();
                v.sort_unstable();
                v
            })
            .collect();
        let term = apply_blocks(sys, &blocks, t, flavor, target)?;
        acc.add(&term, mobius_weight(p.len()) as f64);
    }
    let count = acc.terms();
    Ok((acc.finish(), count))
}

pub fn cumulant(
    sys: &System,
    t: f64,
    arg: &ClusterArgument,
    flavor: GroupFlavor,
    target: &DenseOperator,
) -> Result<DenseOperator> {
    Ok(cumulant_with_count(sys, t, arg, flavor, target)?.0)
}

/// Group cumulant `𝔄(±t, arg)`.
pub fn group_cumulant(
    sys: &System,
    t: f64,
    arg: &ClusterArgument,
    direction: Direction,
    target: &DenseOperator,
) -> Result<DenseOperator> {
    cumulant(sys, signed(t, direction), arg, GroupFlavor::Full, target)
}

/// Scattering cumulant `Â(t, arg)`.
pub fn scattering_cumulant(
    sys: &System,
    t: f64,
    arg: &ClusterArgument,
    target: &DenseOperator,
) -> Result<DenseOperator> {
    cumulant(sys, t, arg, GroupFlavor::Scattering, target)
}

/// `‖𝒢_s(-t) f − Σ_P Π 𝔄_{|X_i|}(-t, X_i) f‖₁` for the given probe.
pub fn verify_cluster_expansion(sys: &System, t: f64, ground: &LabelSet, probe: &DenseOperator) -> Result<f64> {
    crate::error::capacity("cluster expansion ground set", 4, ground.len())?;
    let lhs = sys.group(ground.labels(), -t, probe)?;
    let mut acc = KahanSum::new(probe.n_particles(), probe.one_particle_dim());
    for p in enumerate_partitions(ground)? {
        let mut x = probe.clone();
        for block in &p.blocks {
            let arg = ClusterArgument::singletons(block.labels())?;
            x = cumulant(sys, -t, &arg, GroupFlavor::Full, &x)?;
        }
        acc.add(&x, 1.0);
    }
    Ok((&lhs - &acc.finish()).trace_norm())
}

/// Reduced cumulant `𝔘_{1+n}(t; {Y}, s+1..s+n)`:
/// `Σ_k (-1)^k C(n,k) 𝒢_{s+n-k}(t, Y, s+1, ..., s+n-k)` on `s+n` particles.
pub fn reduced_cumulant(sys: &System, t: f64, s: usize, n: usize, target: &DenseOperator) -> Result<DenseOperator> {
    if target.n_particles() != s + n {
        return Err(Error::Dimension(format!("reduced cumulant on {} particles, expected {}", target.n_particles(), s + n)));
    }
    let mut acc = KahanSum::new(s + n, target.one_particle_dim());
    for k in 0..=n {
        let labels: Vec<usize> = (1..=s + n - k).collect();
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        acc.add(&sys.group(&labels, t, target)?, sign * binomial(n, k) as f64);
    }
    Ok(acc.finish())
}

/// The subset form `Σ_{Z⊆X∖Y} (-1)^{|X∖(Y∪Z)|} 𝒢_{|Y∪Z|}(t, Y∪Z)`.
pub fn reduced_cumulant_subsets(
    sys: &System,
    t: f64,
    s: usize,
    n: usize,
    target: &DenseOperator,
) -> Result<DenseOperator> {
    let tail = LabelSet::range(s + 1, s + n);
    let y = LabelSet::range(1, s);
    let mut acc = KahanSum::new(target.n_particles(), target.one_particle_dim());
    for z in enumerate_subsets(&tail, false)? {
        let sign = if (n - z.len()) % 2 == 0 { 1.0 } else { -1.0 };
        acc.add(&sys.group(y.union(&z).labels(), t, target)?, sign);
    }
    Ok(acc.finish())
}

/// Both sides of `∫_0^t 𝒢_2(-t+τ)(-𝒩_int(1,2)) 𝒢_1(-τ,1)𝒢_1(-τ,2) dτ = 𝔄_2(-t,1,2)`.
pub fn duhamel_second_order(sys: &System, t: f64, f: &DenseOperator) -> Result<(DenseOperator, DenseOperator)> {
    let n = f.n_particles();
    let d = f.one_particle_dim();
    let integral = integrate(0.0, t, n, d, |tau| {
        let free = sys.free_group(&[1, 2], -tau, f)?;
        let kicked = sys.nint_state(1, 2, &free)?;
        sys.group(&[1, 2], -t + tau, &kicked)
    })?;
    let cum = cumulant(sys, -t, &ClusterArgument::singletons(&[1, 2])?, GroupFlavor::Full, f)?;
    Ok((integral, cum))
}

/// Both sides of the scattering-cumulant Duhamel form
/// `Â_2(t,{Y},s+1) f = ∫_0^t 𝒢_s(-τ,Y)𝒢_1(-τ,s+1) Σ_i (-𝒩_int(i,s+1)) Ĝ_{s+1}(t-τ) Π 𝒢_1(τ) f dτ`.
pub fn scattering_duhamel(sys: &System, t: f64, s: usize, f: &DenseOperator) -> Result<(DenseOperator, DenseOperator)> {
    let n = s + 1;
    if f.n_particles() != n {
        return Err(Error::Dimension("probe must live on s+1 particles".into()));
    }
    let all: Vec<usize> = (1..=n).collect();
    let y: Vec<usize> = (1..=s).collect();
    let integral = integrate(0.0, t, n, f.one_particle_dim(), |tau| {
        let x = sys.free_group(&all, tau, f)?;
        let x = sys.scattering(&all, t - tau, &x)?;
        let mut kick = DenseOperator::zeros(n, f.one_particle_dim());
        for i in 1..=s {
            kick += &sys.nint_state(i, n, &x)?;
        }
        apply_blocks(sys, &[y.clone(), vec![n]], -tau, GroupFlavor::Full, &kick)
    })?;
    let arg = ClusterArgument::headed(&LabelSet::range(1, s), &[n])?;
    let cum = scattering_cumulant(sys, t, &arg, f)?;
    Ok((cum, integral))
}

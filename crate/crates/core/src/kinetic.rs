//! Generated evolution operators, kinetic cluster expansions and the
//! generalized quantum kinetic equation for the one-particle state.

use std::collections::BTreeMap;

use crate::combinatorics::{binomial, enumerate_dissections, enumerate_subsets, factorial, LabelSet};
use crate::cumulants::{cumulant, scattering_cumulant, ClusterArgument};
use crate::dynamics::{GroupFlavor, Picture, System};
use crate::error::{Error, Result};
use crate::hilbert::{embed, tensor, trace_tail, DenseOperator, KahanSum};
use crate::quadrature::rk4_trajectory;
use crate::states::SeriesResult;

/// Largest number of extra particles accepted by the operator-level
/// generated evolution.
pub const MAX_V_TAIL: usize = 3;

/// Initial correlation operators `h_n`, `n ≥ 2`. Missing entries mean
/// `h_n = I`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct InitialCorrelations {
    h: BTreeMap<usize, DenseOperator>,
}

impl InitialCorrelations {
    pub fn new(h: BTreeMap<usize, DenseOperator>) -> Result<Self> {
        for (&n, op) in &h {
            if n < 2 || op.n_particles() != n {
                return Err(Error::Argument(format!("h_{n} must be an operator on {n} ≥ 2 particles")));
            }
            if !op.is_hermitian(crate::hilbert::HERMITIAN_TOL) {
                return Err(Error::NotHermitian(op.hermitian_deviation()));
            }
        }
        Ok(Self { h })
    }

    /// No initial correlations.
    pub fn none() -> Self {
        Self::default()
    }

    /// `h_n = I` stored explicitly for `2 ≤ n ≤ n_max`.
    pub fn identity(n_max: usize, d: usize) -> Self {
        Self { h: (2..=n_max).map(|n| (n, DenseOperator::identity(n, d))).collect() }
    }

    pub fn get(&self, n: usize) -> Option<&DenseOperator> {
        self.h.get(&n)
    }

    /// `h_{|labels|}(labels) x`.
    pub fn multiply(&self, labels: &[usize], x: &DenseOperator) -> Result<DenseOperator> {
        match self.h.get(&labels.len()) {
            Some(op) => Ok(&embed(op, labels, x.n_particles())? * x),
            None => Ok(x.clone()),
        }
    }
}

/// The cumulant family the generated evolution operators are built from.
#[derive(Clone, Copy, Debug)]
pub enum Kernel<'a> {
    /// Scattering cumulants `Â(t)`.
    Chaos,
    /// `Ă(t) = 𝔄(-t) h Π 𝔄_1(t)`.
    Correlated(&'a InitialCorrelations),
}

/// `Â(t, arg) x` or `Ă(t, arg) x`.
pub fn kernel_cumulant(sys: &System, t: f64, kernel: Kernel, arg: &ClusterArgument, x: &DenseOperator) -> Result<DenseOperator> {
    match kernel {
        Kernel::Chaos => scattering_cumulant(sys, t, arg, x),
        Kernel::Correlated(h) => {
            let theta = arg.theta();
            let free = sys.free_group(theta.labels(), t, x)?;
            let correlated = h.multiply(theta.labels(), &free)?;
            cumulant(sys, -t, arg, GroupFlavor::Full, &correlated)
        }
    }
}

fn with_extras(head: &ClusterArgument, extras: &LabelSet) -> Result<ClusterArgument> {
    let mut clusters = head.clusters().to_vec();
    clusters.extend(extras.iter().map(|&l| LabelSet::new(vec![l])).collect::<Result<Vec<_>>>()?);
    ClusterArgument::new(clusters)
}

/// `Σ_{D, i} Π_k K_{1+|X_k|}(t, i_k, X_k) x` over dissections of `z`
/// with distinct attachments among `hosts`; every map `z → hosts`
/// appears exactly once.
fn hosted_product(sys: &System, t: f64, kernel: Kernel, hosts: &[usize], z: &LabelSet, x: &DenseOperator) -> Result<DenseOperator> {
    if z.is_empty() {
        return Ok(x.clone());
    }
    let mut acc = KahanSum::new(x.n_particles(), x.one_particle_dim());
    for d in enumerate_dissections(z, hosts.len(), Some(hosts.len()))? {
        let att = d.attachment.as_ref().expect("attachment requested");
        let mut y = x.clone();
        for (block, &a) in d.blocks.iter().zip(att) {
            let host = LabelSet::new(vec![hosts[a - 1]])?;
            y = kernel_cumulant(sys, t, kernel, &ClusterArgument::headed(&host, block.labels())?, &y)?;
        }
        acc.add(&y, 1.0);
    }
    Ok(acc.finish())
}

/// The generated evolution operator over `(head, extras)` applied to
/// `target`, as the alternating sum over chains of removed extra sets:
/// `Σ_k (-1)^k Σ_{Z_1,...,Z_k} K(t, head, E_k) M(Z_k) ... M(Z_1)` with
/// `E_j = E ∖ (Z_1 ∪ ... ∪ Z_j)` and `M(Z_j)` attaching `Z_j` to the
/// particles of the head and of `E_j`.
pub fn generated_evolution(
    sys: &System,
    t: f64,
    kernel: Kernel,
    head: &ClusterArgument,
    extras: &LabelSet,
    target: &DenseOperator,
) -> Result<DenseOperator> {
    let mut acc = KahanSum::new(target.n_particles(), target.one_particle_dim());
    chain(sys, t, kernel, head, extras, target, 1.0, &mut acc)?;
    Ok(acc.finish())
}

#[allow(clippy::too_many_arguments)]
fn chain(
    sys: &System,
    t: f64,
    kernel: Kernel,
    head: &ClusterArgument,
    current: &LabelSet,
    x: &DenseOperator,
    sign: f64,
    acc: &mut KahanSum,
) -> Result<()> {
    acc.add(&kernel_cumulant(sys, t, kernel, &with_extras(head, current)?, x)?, sign);
    for z in enumerate_subsets(current, true)? {
        let rest = current.difference(&z);
        let hosts: Vec<usize> = head.theta().union(&rest).labels().to_vec();
        let moved = hosted_product(sys, t, kernel, &hosts, &z, x)?;
        chain(sys, t, kernel, head, &rest, &moved, -sign, acc)?;
    }
    Ok(())
}

/// `𝔙_{1+n}(t, {Y}, tail)` applied to `target`.
pub fn generated_evolution_v(
    sys: &System,
    t: f64,
    y: &LabelSet,
    tail: &LabelSet,
    target: &DenseOperator,
) -> Result<DenseOperator> {
    crate::error::capacity("generated evolution tail", MAX_V_TAIL, tail.len())?;
    generated_evolution(sys, t, Kernel::Chaos, &ClusterArgument::new(vec![y.clone()])?, tail, target)
}

/// `𝔊_{1+n}(t, {Y}, tail)` applied to `target`.
pub fn generated_evolution_correlated(
    sys: &System,
    t: f64,
    h: &InitialCorrelations,
    y: &LabelSet,
    tail: &LabelSet,
    target: &DenseOperator,
) -> Result<DenseOperator> {
    crate::error::capacity("generated evolution tail", MAX_V_TAIL, tail.len())?;
    generated_evolution(sys, t, Kernel::Correlated(h), &ClusterArgument::new(vec![y.clone()])?, tail, target)
}

/// `‖𝔄_{1+n}(-t,{Y},X∖Y)f - Σ_{Z} 𝔙(t,{Y},X∖(Y∪Z)) Σ_{D,i} Π 𝔄_{1+|X_k|}(-t,i_k,X_k) Π_m 𝔄_1(-t,m) f‖`
/// with `Y = 1..s` and `f` on `s+n` particles.
pub fn verify_kinetic_cluster_expansion(sys: &System, t: f64, s: usize, n: usize, probe: &DenseOperator) -> Result<f64> {
    let total = s + n;
    if probe.n_particles() != total {
        return Err(Error::Dimension(format!("probe must live on {total} particles")));
    }
    crate::error::capacity("kinetic cluster expansion tail", MAX_V_TAIL, n)?;
    let y = LabelSet::range(1, s);
    let extras = LabelSet::range(s + 1, total);
    let head = ClusterArgument::new(vec![y.clone()])?;
    let lhs = cumulant(sys, -t, &with_extras(&head, &extras)?, GroupFlavor::Full, probe)?;
    let mut rhs = KahanSum::new(total, probe.one_particle_dim());
    for z in enumerate_subsets(&extras, false)? {
        let rest = extras.difference(&z);
        let hosts = y.union(&rest);
        let mut inner = KahanSum::new(total, probe.one_particle_dim());
        let dissections = if z.is_empty() {
            vec![crate::combinatorics::Dissection { blocks: Vec::new(), attachment: Some(Vec::new()) }]
        } else {
            enumerate_dissections(&z, hosts.len(), Some(hosts.len()))?
        };
        for d in dissections {
            let att = d.attachment.as_ref().expect("attachment requested");
            let mut x = probe.clone();
            let mut attached = LabelSet::empty();
            for (block, &a) in d.blocks.iter().zip(att) {
                let host = LabelSet::new(vec![hosts.labels()[a - 1]])?;
                attached = attached.union(&host);
                x = cumulant(sys, -t, &ClusterArgument::headed(&host, block.labels())?, GroupFlavor::Full, &x)?;
            }
            let lone: Vec<Vec<usize>> = hosts.difference(&attached).iter().map(|&m| vec![m]).collect();
            x = crate::cumulants::apply_blocks(sys, &lone, -t, GroupFlavor::Full, &x)?;
            inner.add(&x, 1.0);
        }
        rhs.add(&generated_evolution(sys, t, Kernel::Chaos, &head, &rest, &inner.finish())?, 1.0);
    }
    Ok((&lhs - &rhs.finish()).operator_norm())
}

/// The correlated analog: `Ă_{1+n}(t,{Y},X∖Y) f` against
/// `Σ_Z 𝔊(t,{Y},X∖(Y∪Z)) Σ_{D,i} Π_k 𝔄_{1+|X_k|}(-t,i_k,X_k) h(i_k,X_k) Π 𝔄_1(t) f`.
pub fn verify_correlated_cluster_expansion(
    sys: &System,
    t: f64,
    h: &InitialCorrelations,
    s: usize,
    n: usize,
    probe: &DenseOperator,
) -> Result<f64> {
    let total = s + n;
    if probe.n_particles() != total {
        return Err(Error::Dimension(format!("probe must live on {total} particles")));
    }
    crate::error::capacity("kinetic cluster expansion tail", MAX_V_TAIL, n)?;
    let y = LabelSet::range(1, s);
    let extras = LabelSet::range(s + 1, total);
    let head = ClusterArgument::new(vec![y.clone()])?;
    let all: Vec<usize> = (1..=total).collect();
    let lhs = {
        let free = sys.free_group(&all, t, probe)?;
        let corr = h.multiply(&all, &free)?;
        cumulant(sys, -t, &with_extras(&head, &extras)?, GroupFlavor::Full, &corr)?
    };
    let mut rhs = KahanSum::new(total, probe.one_particle_dim());
    for z in enumerate_subsets(&extras, false)? {
        let rest = extras.difference(&z);
        let hosts = y.union(&rest);
        let mut inner = KahanSum::new(total, probe.one_particle_dim());
        let dissections = if z.is_empty() {
            vec![crate::combinatorics::Dissection { blocks: Vec::new(), attachment: Some(Vec::new()) }]
        } else {
            enumerate_dissections(&z, hosts.len(), Some(hosts.len()))?
        };
        for d in dissections {
            let att = d.attachment.as_ref().expect("attachment requested");
            let mut x = probe.clone();
            for (block, &a) in d.blocks.iter().zip(att) {
                let host = hosts.labels()[a - 1];
                let mut labels = vec![host];
                labels.extend(block.iter().copied());
                labels.sort_unstable();
                x = sys.free_group(&labels, t, &x)?;
                x = h.multiply(&labels, &x)?;
                let arg = ClusterArgument::headed(&LabelSet::new(vec![host])?, block.labels())?;
                x = cumulant(sys, -t, &arg, GroupFlavor::Full, &x)?;
            }
            inner.add(&x, 1.0);
        }
        rhs.add(&generated_evolution(sys, t, Kernel::Correlated(h), &head, &rest, &inner.finish())?, 1.0);
    }
    Ok((&lhs - &rhs.finish()).operator_norm())
}

/// `Tr_{extras} V(head, s+1..s+n) x` for `x` symmetric in the extras.
/// The chain over removed sets is taken with the removed extras always
/// the last ones, weighted by binomials, and traced as soon as they are
/// attached.
fn traced_generated(
    sys: &System,
    t: f64,
    kernel: Kernel,
    head: &ClusterArgument,
    n: usize,
    x: &DenseOperator,
) -> Result<DenseOperator> {
    let s = head.theta().len();
    let extras = LabelSet::range(s + 1, s + n);
    let direct = kernel_cumulant(sys, t, kernel, &with_extras(head, &extras)?, x)?;
    let mut acc = KahanSum::new(s, x.one_particle_dim());
    acc.add(&trace_tail(&direct, n), 1.0);
    for n1 in 1..=n {
        let z = LabelSet::range(s + n - n1 + 1, s + n);
        let hosts: Vec<usize> = (1..=s + n - n1).collect();
        let moved = trace_tail(&hosted_product(sys, t, kernel, &hosts, &z, x)?, n1);
        let inner = traced_generated(sys, t, kernel, head, n - n1, &moved)?;
        acc.add(&inner, -(binomial(n, n1) as f64));
    }
    Ok(acc.finish())
}

fn power(f1: &DenseOperator, k: usize) -> Result<DenseOperator> {
    let mut out = DenseOperator::identity(0, f1.one_particle_dim());
    for _ in 0..k {
        out = tensor(&out, f1)?;
    }
    Ok(out)
}

/// `Σ_{n ≤ n_max} Tr_{s+1..s+n} V(head, s+1..s+n) Π F_1 / n!`.
pub fn kinetic_functional(
    sys: &System,
    t: f64,
    kernel: Kernel,
    head: &ClusterArgument,
    f1: &DenseOperator,
    n_max: usize,
) -> Result<SeriesResult> {
    let s = head.theta().len();
    let mut acc = KahanSum::new(s, f1.one_particle_dim());
    let mut order_norms = Vec::with_capacity(n_max + 1);
    for n in 0..=n_max {
        let x = power(f1, s + n)?;
        let term = traced_generated(sys, t, kernel, head, n, &x)?.scale_re(1.0 / factorial(n) as f64);
        order_norms.push(term.trace_norm());
        acc.add(&term, 1.0);
    }
    Ok(SeriesResult { value: acc.finish(), order_norms })
}

/// Marginal functional of the state `F_s(t | F_1(t))`.
pub fn marginal_functional(sys: &System, t: f64, f1_t: &DenseOperator, s: usize, n_max: usize) -> Result<SeriesResult> {
    let head = ClusterArgument::new(vec![LabelSet::range(1, s)])?;
    kinetic_functional(sys, t, Kernel::Chaos, &head, f1_t, n_max)
}

/// Marginal correlation functional `G_s(t | F_1(t))`, built on the
/// declusterized argument `θ({Y})`.
pub fn correlation_functional(sys: &System, t: f64, f1_t: &DenseOperator, s: usize, n_max: usize) -> Result<SeriesResult> {
    let labels: Vec<usize> = (1..=s).collect();
    kinetic_functional(sys, t, Kernel::Chaos, &ClusterArgument::singletons(&labels)?, f1_t, n_max)
}

/// Marginal functional of the state for correlated initial data.
pub fn correlated_marginal_functional(
    sys: &System,
    t: f64,
    h: &InitialCorrelations,
    f1_t: &DenseOperator,
    s: usize,
    n_max: usize,
) -> Result<SeriesResult> {
    let head = ClusterArgument::new(vec![LabelSet::range(1, s)])?;
    kinetic_functional(sys, t, Kernel::Correlated(h), &head, f1_t, n_max)
}

/// `Tr_2 (-𝒩_int(1,2)) F_2(t | F_1)` with `F_2` truncated at `n_max`.
pub fn collision_integral(sys: &System, t: f64, kernel: Kernel, f1: &DenseOperator, n_max: usize) -> Result<DenseOperator> {
    let head = ClusterArgument::new(vec![LabelSet::range(1, 2)])?;
    let f2 = kinetic_functional(sys, t, kernel, &head, f1, n_max)?.value;
    Ok(trace_tail(&sys.nint_state(1, 2, &f2)?, 1))
}

pub fn gqke_collision_integral(sys: &System, t: f64, f1: &DenseOperator, n_max: usize) -> Result<DenseOperator> {
    collision_integral(sys, t, Kernel::Chaos, f1, n_max)
}

/// Right-hand side `-𝒩(1)F_1 + Tr_2(-𝒩_int(1,2)) F_2(t | F_1)`.
pub fn gqke_rhs(sys: &System, t: f64, kernel: Kernel, f1: &DenseOperator, n_max: usize) -> Result<DenseOperator> {
    Ok(&sys.generator_n(f1, Picture::State)? + &collision_integral(sys, t, kernel, f1, n_max)?)
}

/// Convergence threshold for the collision integral series, `e^{-8}`.
pub fn collision_threshold() -> f64 {
    (-8.0f64).exp()
}

/// Smallness hypothesis of the global solution, `(e(1+e⁹))^{-1}`.
pub fn solution_threshold() -> f64 {
    let e = std::f64::consts::E;
    1.0 / (e * (1.0 + e.powi(9)))
}

/// Convergence threshold for the marginal functionals, `e^{-(3s+2)}`.
pub fn functional_threshold(s: usize) -> f64 {
    (-(3.0 * s as f64 + 2.0)).exp()
}

/// Solver choice for the kinetic equation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum GqkeMethod {
    /// Cumulant series evaluated at `points` equally spaced times.
    Series { points: usize },
    /// RK4 on the collision integral with `steps` equal steps.
    TimeStep { steps: usize },
}

/// One-particle trajectory of the kinetic equation.
#[derive(Clone, Debug)]
pub struct KineticSolution {
    pub times: Vec<f64>,
    pub f1: Vec<DenseOperator>,
    pub n_max: usize,
    /// Norm of the last included order (series) or the step-halving
    /// difference at the final time (time stepping).
    pub tails: Vec<f64>,
    pub trace_drift: Vec<f64>,
    pub warnings: Vec<String>,
}

impl KineticSolution {
    pub fn final_state(&self) -> &DenseOperator {
        self.f1.last().expect("nonempty trajectory")
    }

    /// CSV rows `t, ‖F_1‖₁, Tr F_1, tail`.
    pub fn rows(&self) -> Vec<[f64; 4]> {
        self.times
            .iter()
            .zip(&self.f1)
            .zip(&self.tails)
            .map(|((&t, f), &tail)| [t, f.trace_norm(), f.trace().re, tail])
            .collect()
    }
}

/// `F_1(t) = Σ_{n ≤ n_max} Tr_{2..n+1} 𝔄_{1+n}(-t, 1, ..., n+1) Π F_1⁰ / n!`.
pub fn gqke_series(sys: &System, f1_0: &DenseOperator, t: f64, n_max: usize) -> Result<SeriesResult> {
    let mut acc = KahanSum::new(1, f1_0.one_particle_dim());
    let mut order_norms = Vec::with_capacity(n_max + 1);
    for n in 0..=n_max {
        let term = crate::states::chaos_term(sys, f1_0, t, 1, n, true)?;
        order_norms.push(term.trace_norm());
        acc.add(&term, 1.0);
    }
    Ok(SeriesResult { value: acc.finish(), order_norms })
}

pub fn solve_gqke(sys: &System, f1_0: &DenseOperator, t: f64, method: GqkeMethod, n_max: usize) -> Result<KineticSolution> {
    solve_with_kernel(sys, Kernel::Chaos, f1_0, t, method, n_max)
}

/// Kinetic equation with initial correlations; only the time-stepping
/// solver applies.
pub fn solve_correlated_gqke(
    sys: &System,
    h: &InitialCorrelations,
    f1_0: &DenseOperator,
    t: f64,
    steps: usize,
    n_max: usize,
) -> Result<KineticSolution> {
    solve_with_kernel(sys, Kernel::Correlated(h), f1_0, t, GqkeMethod::TimeStep { steps }, n_max)
}

fn solve_with_kernel(
    sys: &System,
    kernel: Kernel,
    f1_0: &DenseOperator,
    t: f64,
    method: GqkeMethod,
    n_max: usize,
) -> Result<KineticSolution> {
    let norm0 = f1_0.trace_norm();
    let tr0 = f1_0.trace().re;
    let mut warnings = Vec::new();
    if norm0 >= collision_threshold() {
        warnings.push(format!(
            "‖F1⁰‖₁ = {norm0:.3e} exceeds the collision-integral convergence bound {:.3e}",
            collision_threshold()
        ));
    }
    let (times, f1, tails) = match method {
        GqkeMethod::Series { points } => {
            if matches!(kernel, Kernel::Correlated(_)) {
                return Err(Error::Argument("the series solver covers uncorrelated data only".into()));
            }
            let points = points.max(1);
            let mut times = Vec::new();
            let mut f1 = Vec::new();
            let mut tails = Vec::new();
            for k in 0..=points {
                let tk = t * k as f64 / points as f64;
                let r = gqke_series(sys, f1_0, tk, n_max)?;
                times.push(tk);
                tails.push(r.last_order_norm());
                f1.push(r.value);
            }
            (times, f1, tails)
        }
        GqkeMethod::TimeStep { steps } => {
            let rhs = |tau: f64, x: &DenseOperator| gqke_rhs(sys, tau, kernel, x, n_max);
            let traj = rk4_trajectory(f1_0, 0.0, t, steps, rhs)?;
            let coarse = rk4_trajectory(f1_0, 0.0, t, steps.div_ceil(2).max(1), rhs)?;
            let estimate = (&traj.last().expect("nonempty").1 - &coarse.last().expect("nonempty").1).trace_norm() / 15.0;
            let times: Vec<f64> = traj.iter().map(|(tau, _)| *tau).collect();
            let tails = vec![estimate; times.len()];
            (times, traj.into_iter().map(|(_, x)| x).collect(), tails)
        }
    };
    let trace_drift = f1.iter().map(|x| (x.trace().re - tr0).abs()).collect();
    Ok(KineticSolution { times, f1, n_max, tails, trace_drift, warnings })
}

/// `‖Ĝ_2(t) f - f‖₁` along the given times, a probe of the long-time
/// behavior of the scattering operator.
pub fn scattering_probe(sys: &System, f2: &DenseOperator, times: &[f64]) -> Result<Vec<f64>> {
    times.iter().map(|&t| Ok((&sys.scattering(&[1, 2], t, f2)? - f2).trace_norm())).collect()
}


#[cfg(test)]
mod equivalence {
    use super::*;
    use crate::dynamics::HamiltonianSpec;
    use crate::random::{random_density, rng};
    use crate::sequences::OperatorSequence;
    use crate::states::{marginal_series_bbgky, Representation};

    #[test]
    fn functional_matches_bbgky() {
        let sys = System::new(HamiltonianSpec::transverse(0.9, 0.4)).unwrap();
        let f1 = random_density(1, 2, &mut rng(21)).scale_re(0.02);
        let f0 = OperatorSequence::product_state(&f1, 6);
        for t in [0.5, 1.0] {
            let f1_t = gqke_series(&sys, &f1, t, 3).unwrap().value;
            for s in 1..=2 {
                let exact = marginal_series_bbgky(&sys, &f0, t, s, Representation::Cumulant, 4).unwrap();
                let omitted = exact.last_order_norm();
                let trunc = marginal_series_bbgky(&sys, &f0, t, s, Representation::Cumulant, 3).unwrap().value;
                let func = marginal_functional(&sys, t, &f1_t, s, 3).unwrap().value;
                let r = (&trunc - &func).trace_norm();
                eprintln!("t={t} s={s} r={r:.3e} omitted={omitted:.3e} vs_exact={:.3e}", (&exact.value - &func).trace_norm());
                assert!(r <= 2.0 * omitted, "t={t} s={s} {r} {omitted}");
            }
        }
    }
}

#[cfg(test)]
mod solvers {
    use super::*;
    use crate::dynamics::HamiltonianSpec;
    use crate::random::{random_density, random_hermitian, rng};
    use crate::states::{chaos_correlations, dispersion_functional};

    #[test]
    fn series_and_time_stepping_agree() {
        let sys = System::new(HamiltonianSpec::transverse(0.9, 0.4)).unwrap();
        let f1 = random_density(1, 2, &mut rng(31)).scale_re(0.05);
        let series = solve_gqke(&sys, &f1, 1.0, GqkeMethod::Series { points: 4 }, 3).unwrap();
        let stepped = solve_gqke(&sys, &f1, 1.0, GqkeMethod::TimeStep { steps: 100 }, 3).unwrap();
        let r = (series.final_state() - stepped.final_state()).trace_norm();
        let tol = series.tails.last().unwrap().max(1e-6);
        eprintln!("r={r:.3e} tail={:.3e} step={:.3e}", series.tails.last().unwrap(), stepped.tails.last().unwrap());
        assert!(r <= tol);
        assert!(series.final_state().is_hermitian(1e-12));
        assert!(stepped.trace_drift.last().unwrap() <= &tol);
        assert!(!series.warnings.is_empty());
    }

    #[test]
    fn dispersion_matches_states() {
        let sys = System::new(HamiltonianSpec::transverse(0.9, 0.4)).unwrap();
        let f1 = random_density(1, 2, &mut rng(32)).scale_re(0.05);
        let a1 = random_hermitian(1, 2, &mut rng(33));
        let t = 0.7;
        let f1_t = gqke_series(&sys, &f1, t, 3).unwrap().value;
        let g2 = correlation_functional(&sys, t, &f1_t, 2, 3).unwrap().value;
        let kinetic = dispersion_functional(&a1, &f1_t, &g2).unwrap();
        let g1 = chaos_correlations(&sys, &f1, t, 1, 3).unwrap();
        let g2s = chaos_correlations(&sys, &f1, t, 2, 3).unwrap();
        let direct = dispersion_functional(&a1, &g1, &g2s).unwrap();
        eprintln!("{kinetic} {direct}");
        assert!((kinetic - direct).abs() < 1e-9);
    }
}

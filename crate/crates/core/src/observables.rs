//! Marginal observables and the dual BBGKY hierarchy.

use crate::combinatorics::{enumerate_subsets, LabelSet};
use crate::cumulants::{cumulant, ClusterArgument};
use crate::dynamics::{GroupFlavor, Picture, System};
use crate::error::{Error, Result};
use crate::hilbert::{c, embed, DenseOperator, KahanSum, C64};
use crate::sequences::{sequence_functional, OperatorSequence};
use crate::states::{marginal_series_bbgky, Representation};

/// Default `γ` for the `𝔏_γ` bookkeeping, below `e^{-1}`.
pub const DEFAULT_GAMMA: f64 = 0.3;

/// Representations of the dual BBGKY solution.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DualRepresentation {
    Cumulant,
    GroupExpansion,
}

/// Component `s` of `Σ_{X⊆Y} sign(|X|) f_{s-|X|}(Y∖X)`, with the scalar
/// component embedded as a multiple of the identity.
fn subset_transform(f: &OperatorSequence, s: usize, alternating: bool) -> Result<DenseOperator> {
    let d = f.d();
    let y = LabelSet::range(1, s);
    let mut acc = KahanSum::new(s, d);
    for x in enumerate_subsets(&y, false)? {
        let rest = y.difference(&x);
        let sign = if alternating && x.len() % 2 == 1 { -1.0 } else { 1.0 };
        acc.add(&embed_component(f, &rest, s)?, sign);
    }
    Ok(acc.finish())
}

/// `f_{|W|}` acting on the labels `W` inside `s` particles.
fn embed_component(f: &OperatorSequence, w: &LabelSet, s: usize) -> Result<DenseOperator> {
    if w.is_empty() {
        return Ok(DenseOperator::identity(s, f.d()).scale(f.scalar0()));
    }
    match f.component(w.len()) {
        Some(op) => embed(op, w.labels(), s),
        None => Ok(DenseOperator::zeros(s, f.d())),
    }
}

fn subset_sequence(f: &OperatorSequence, alternating: bool) -> Result<OperatorSequence> {
    let mut out = f.clone();
    for s in 1..=f.n_max() {
        out.set_component(subset_transform(f, s, alternating)?)?;
    }
    Ok(out)
}

/// `B = e^{-𝔞⁺} A`: `B_s(Y) = Σ_{X⊆Y} (-1)^{|X|} A_{s-|X|}(Y∖X)`.
pub fn marginals_of_observables(a: &OperatorSequence) -> Result<OperatorSequence> {
    subset_sequence(a, true)
}

/// `A = e^{𝔞⁺} B`: `A_s(Y) = Σ_{X⊆Y} B_{s-|X|}(Y∖X)`.
pub fn observables_of_marginals(b: &OperatorSequence) -> Result<OperatorSequence> {
    subset_sequence(b, false)
}

/// `(𝔞⁺ g)_s(Y) = Σ_j g_{s-1}(Y∖j)`.
pub fn creation(g: &OperatorSequence) -> Result<OperatorSequence> {
    let mut out = g.clone();
    out.set_scalar0(c(0.0));
    for s in 1..=g.n_max() {
        let y = LabelSet::range(1, s);
        let mut acc = KahanSum::new(s, g.d());
        for j in 1..=s {
            acc.add(&embed_component(g, &y.difference(&LabelSet::new(vec![j])?), s)?, 1.0);
        }
        out.set_component(acc.finish())?;
    }
    Ok(out)
}

/// Additive-type observable `A^{(1)} = (0, a, a(1)+a(2), ...)`.
pub fn additive_observable(a1: &DenseOperator, n_max: usize) -> Result<OperatorSequence> {
    let b = OperatorSequence::one_component(a1, n_max);
    observables_of_marginals(&b)
}

/// Heisenberg evolution of every component.
pub fn evolve_observables(sys: &System, a: &OperatorSequence, t: f64) -> Result<OperatorSequence> {
    let mut out = a.clone();
    for op in a.components() {
        out.set_component(sys.heisenberg_group(t, op)?)?;
    }
    Ok(out)
}

/// `B_s(t)` from `B⁰`. The expansion is a finite sum over `X ⊆ Y`.
pub fn dual_bbgky_series(
    sys: &System,
    b0: &OperatorSequence,
    t: f64,
    s: usize,
    representation: DualRepresentation,
) -> Result<DenseOperator> {
    crate::error::capacity("dual order", b0.n_max(), s)?;
    let d = b0.d();
    if s == 0 {
        return Ok(DenseOperator::identity(0, d).scale(b0.scalar0()));
    }
    if t == 0.0 {
        return Ok(b0.component(s).expect("within capacity").clone());
    }
    let y = LabelSet::range(1, s);
    let mut acc = KahanSum::new(s, d);
    for x in enumerate_subsets(&y, false)? {
        let rest = y.difference(&x);
        // with X = Y the cumulant acts on a multiple of the identity and vanishes
        if rest.is_empty() {
            continue;
        }
        let target = embed_component(b0, &rest, s)?;
        match representation {
            DualRepresentation::Cumulant => {
                let arg = ClusterArgument::headed(&rest, x.labels())?;
                acc.add(&cumulant(sys, t, &arg, GroupFlavor::Full, &target)?, 1.0);
            }
            DualRepresentation::GroupExpansion => {
                for z in enumerate_subsets(&x, false)? {
                    let sign = if (x.len() - z.len()) % 2 == 0 { 1.0 } else { -1.0 };
                    acc.add(&sys.group(rest.union(&z).labels(), t, &target)?, sign);
                }
            }
        }
    }
    Ok(acc.finish())
}

/// The whole sequence `B(t)` up to the length of `B⁰`.
pub fn dual_bbgky_sequence(
    sys: &System,
    b0: &OperatorSequence,
    t: f64,
    representation: DualRepresentation,
) -> Result<OperatorSequence> {
    let mut out = b0.clone();
    for s in 1..=b0.n_max() {
        out.set_component(dual_bbgky_series(sys, b0, t, s, representation)?)?;
    }
    Ok(out)
}

/// `e^{-𝔞⁺} 𝒢(t) e^{𝔞⁺} B⁰`.
pub fn compact_form(sys: &System, b0: &OperatorSequence, t: f64) -> Result<OperatorSequence> {
    marginals_of_observables(&evolve_observables(sys, &observables_of_marginals(b0)?, t)?)
}

/// The same compact form assembled term by term,
/// `Σ_n Σ_k (-1)^{n-k} (𝔞⁺)^{n-k} 𝒢(t) (𝔞⁺)^k B⁰ / (k!(n-k)!)`.
pub fn compact_form_terms(sys: &System, b0: &OperatorSequence, t: f64) -> Result<OperatorSequence> {
    let n_max = b0.n_max();
    let mut powers = vec![b0.clone()];
    for _ in 0..n_max {
        let next = creation(powers.last().expect("nonempty"))?;
        powers.push(next);
    }
    let mut out = OperatorSequence::zeros(n_max, b0.d());
    out.set_scalar0(b0.scalar0());
    let mut accs: Vec<KahanSum> = (1..=n_max).map(|s| KahanSum::new(s, b0.d())).collect();
    for n in 0..=n_max {
        for k in 0..=n {
            let mut x = evolve_observables(sys, &powers[k], t)?;
            for _ in 0..n - k {
                x = creation(&x)?;
            }
            let sign = if (n - k) % 2 == 0 { 1.0 } else { -1.0 };
            let w = sign / (factorial_f(k) * factorial_f(n - k));
            for (s, acc) in accs.iter_mut().enumerate() {
                acc.add(x.component(s + 1).expect("same length"), w);
            }
        }
    }
    for acc in accs {
        out.set_component(acc.finish())?;
    }
    Ok(out)
}

fn factorial_f(n: usize) -> f64 {
    crate::combinatorics::factorial(n) as f64
}

/// Right-hand side of the dual hierarchy at order `s`:
/// `(Σ_j 𝒩(j) + Σ_{j<k} 𝒩_int(j,k)) B_s + Σ_{j≠k} 𝒩_int(j,k) B_{s-1}(Y∖j)`.
pub fn dual_generator(sys: &System, b: &OperatorSequence, s: usize) -> Result<DenseOperator> {
    let bs = b
        .component(s)
        .ok_or_else(|| Error::Capacity { what: "dual order", limit: b.n_max(), got: s })?;
    let mut acc = sys.generator_n(bs, Picture::Observable)?;
    let y = LabelSet::range(1, s);
    for j in 1..=s {
        let lower = embed_component(b, &y.difference(&LabelSet::new(vec![j])?), s)?;
        for k in (1..=s).filter(|&k| k != j) {
            acc += &sys.nint_observable(j, k, &lower)?;
        }
    }
    Ok(acc)
}

/// `(B, F) = Σ_s Tr B_s F_s / s!`.
pub fn mean_value(b: &OperatorSequence, f: &OperatorSequence) -> Result<C64> {
    sequence_functional(b, f)
}

/// `e²(1-γe)^{-1} ‖B⁰‖_γ ‖F⁰‖_{𝔏¹_{1/γ}}`.
pub fn mean_value_bound(b0: &OperatorSequence, f0: &OperatorSequence, gamma: f64) -> Result<f64> {
    let e = std::f64::consts::E;
    if gamma <= 0.0 || gamma * e >= 1.0 {
        return Err(Error::Argument(format!("gamma = {gamma} must lie in (0, 1/e)")));
    }
    Ok(e * e / (1.0 - gamma * e) * b0.norm_gamma(gamma) * f0.norm_alpha(1.0 / gamma))
}

/// `|(B(t), F(0)) - (B(0), F(t))|` with `F(t)` from the cumulant BBGKY
/// series using every available order.
pub fn verify_duality(sys: &System, b0: &OperatorSequence, f0: &OperatorSequence, t: f64) -> Result<f64> {
    let n = b0.n_max().min(f0.n_max());
    let b0 = b0.truncate(n);
    let f0 = f0.truncate(n);
    let bt = dual_bbgky_sequence(sys, &b0, t, DualRepresentation::Cumulant)?;
    let mut ft = f0.clone();
    for s in 1..=n {
        ft.set_component(marginal_series_bbgky(sys, &f0, t, s, Representation::Cumulant, n - s)?.value)?;
    }
    Ok((mean_value(&bt, &f0)? - mean_value(&b0, &ft)?).norm())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::HamiltonianSpec;
    use crate::random::{random_density, random_hermitian, rng};
    use crate::states::{marginals_oracle, GrandCanonicalState};

    fn sys() -> System {
        System::new(HamiltonianSpec::transverse(0.9, 0.4)).unwrap()
    }

    fn random_b(seed: u64, n: usize) -> OperatorSequence {
        let mut r = rng(seed);
        OperatorSequence::from_fn(c(0.4), n, 2, |k| random_hermitian(k, 2, &mut r))
    }

    #[test]
    fn additive_maps_to_one_component() {
        let a1 = random_hermitian(1, 2, &mut rng(1));
        let a = additive_observable(&a1, 3).unwrap();
        let expect = &embed(&a1, &[1], 2).unwrap() + &embed(&a1, &[2], 2).unwrap();
        assert!((a.component(2).unwrap() - &expect).max_abs() < 1e-15);
        let b = marginals_of_observables(&a).unwrap();
        assert!((b.component(1).unwrap() - &a1).max_abs() < 1e-15);
        assert!(b.component(2).unwrap().max_abs() < 1e-15);
        assert!(b.component(3).unwrap().max_abs() < 1e-15);
    }

    #[test]
    fn constant_observable() {
        let mut a = OperatorSequence::zeros(2, 2);
        a.set_scalar0(c(2.5));
        let b = marginals_of_observables(&a).unwrap();
        assert!((b.component(1).unwrap() - &DenseOperator::identity(1, 2).scale_re(-2.5)).max_abs() < 1e-15);
    }

    #[test]
    fn binary_observable_is_one_component() {
        let a2 = crate::hilbert::symmetrize(&random_hermitian(2, 2, &mut rng(2)));
        let mut a = OperatorSequence::zeros(3, 2);
        a.set_component(a2.clone()).unwrap();
        let mut a3 = DenseOperator::zeros(3, 2);
        for pair in [[1, 2], [1, 3], [2, 3]] {
            a3 += &embed(&a2, &pair, 3).unwrap();
        }
        a.set_component(a3).unwrap();
        let b = marginals_of_observables(&a).unwrap();
        assert!(b.component(1).unwrap().max_abs() < 1e-15);
        assert!((b.component(2).unwrap() - &a2).max_abs() < 1e-14);
        assert!(b.component(3).unwrap().max_abs() < 1e-14);
    }

    #[test]
    fn dual_simple_cases() {
        let s = sys();
        let b0 = random_b(3, 3);
        let b1 = dual_bbgky_series(&s, &b0, 0.8, 1, DualRepresentation::Cumulant).unwrap();
        assert!((&b1 - &s.group(&[1], 0.8, b0.component(1).unwrap()).unwrap()).max_abs() < 1e-14);
        for k in 1..=3 {
            let at0 = dual_bbgky_series(&s, &b0, 0.0, k, DualRepresentation::Cumulant).unwrap();
            assert!((&at0 - b0.component(k).unwrap()).max_abs() < 1e-14);
        }
    }

    #[test]
    fn number_observable_is_conserved() {
        let s = sys();
        let n0 = OperatorSequence::one_component(&DenseOperator::identity(1, 2), 3);
        for k in 1..=3 {
            let v = dual_bbgky_series(&s, &n0, 1.4, k, DualRepresentation::Cumulant).unwrap();
            let want = if k == 1 { DenseOperator::identity(1, 2) } else { DenseOperator::zeros(k, 2) };
            assert!((&v - &want).max_abs() < 1e-14);
        }
    }

    #[test]
    fn representations_and_compact_form_agree() {
        let s = sys();
        let b0 = random_b(4, 3);
        let compact = compact_form(&s, &b0, 0.9).unwrap();
        let terms = compact_form_terms(&s, &b0, 0.9).unwrap();
        for k in 1..=3 {
            let a = dual_bbgky_series(&s, &b0, 0.9, k, DualRepresentation::Cumulant).unwrap();
            let b = dual_bbgky_series(&s, &b0, 0.9, k, DualRepresentation::GroupExpansion).unwrap();
            assert!((&a - &b).max_abs() < 1e-10);
            assert!((&a - compact.component(k).unwrap()).max_abs() < 1e-10);
            assert!((&a - terms.component(k).unwrap()).max_abs() < 1e-10);
        }
    }

    #[test]
    fn dual_finite_difference() {
        let s = sys();
        let b0 = random_b(5, 3);
        let t = 0.5;
        let mid = dual_bbgky_sequence(&s, &b0, t, DualRepresentation::Cumulant).unwrap();
        let residual = |dt: f64, k: usize| {
            let plus = dual_bbgky_series(&s, &b0, t + dt, k, DualRepresentation::Cumulant).unwrap();
            let minus = dual_bbgky_series(&s, &b0, t - dt, k, DualRepresentation::Cumulant).unwrap();
            let fd = (&plus - &minus).scale_re(0.5 / dt);
            (&fd - &dual_generator(&s, &mid, k).unwrap()).max_abs()
        };
        for k in 1..=3 {
            let (r1, r2) = (residual(1e-3, k), residual(5e-4, k));
            assert!(r1 < 1e-4, "s={k} {r1}");
            assert!(r1 / r2 > 3.5, "s={k} ratio {}", r1 / r2);
        }
    }

    #[test]
    fn duality_and_mean_values() {
        let s = sys();
        let st = GrandCanonicalState::random(3, 2, 0.3, &mut rng(6)).unwrap();
        let f0 = marginals_oracle(&st, 3).unwrap();
        let b0 = random_b(7, 3);
        assert_eq!(verify_duality(&s, &b0, &f0, 0.0).unwrap(), 0.0);
        for t in [0.25, 1.0] {
            assert!(verify_duality(&s, &b0, &f0, t).unwrap() < 1e-9);
        }
        let unit = OperatorSequence::unit(3, 2);
        assert!((mean_value(&unit, &f0).unwrap() - c(1.0)).norm() < 1e-15);
        let a1 = random_hermitian(1, 2, &mut rng(8));
        let add = OperatorSequence::one_component(&a1, 3);
        let want = (&a1 * f0.component(1).unwrap()).trace();
        assert!((mean_value(&add, &f0).unwrap() - want).norm() < 1e-15);
        let bt = dual_bbgky_sequence(&s, &b0, 1.0, DualRepresentation::Cumulant).unwrap();
        let v = mean_value(&bt, &f0).unwrap();
        assert!(v.im.abs() < 1e-10);
        assert!(v.norm() <= mean_value_bound(&b0, &f0, DEFAULT_GAMMA).unwrap());
    }

    #[test]
    fn free_duality() {
        let s = System::new(HamiltonianSpec::transverse(0.9, 0.4).without_interaction()).unwrap();
        let f1 = random_density(1, 2, &mut rng(9));
        let f0 = OperatorSequence::product_state(&f1, 3);
        assert!(verify_duality(&s, &random_b(10, 3), &f0, 0.7).unwrap() < 1e-10);
    }
}

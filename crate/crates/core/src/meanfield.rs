//! Mean-field scaling limits: Vlasov hierarchies and kinetic equations,
//! their dual and nonlinear counterparts, lattice Hartree dynamics and
//! ε-scaling studies.

use std::sync::Arc;

use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::combinatorics::LabelSet;
use crate::cumulants::{cumulant, ClusterArgument};
use crate::dynamics::{GroupFlavor, HamiltonianSpec, Picture, System};
use crate::error::{capacity, Error, Result};
use crate::hilbert::{c, embed, symmetrizer, tensor, trace_tail, DenseOperator, KahanSum, Mat, C64};
use crate::kinetic::{correlated_marginal_functional, marginal_functional, solve_correlated_gqke, solve_gqke, GqkeMethod, InitialCorrelations};
use crate::quadrature::{integrate, rk4_trajectory};
use crate::sequences::OperatorSequence;
use crate::states::{chaos_correlations, chaos_term};

pub const DEFAULT_EPSILONS: [f64; 4] = [0.4, 0.2, 0.1, 0.05];
/// Deepest nested time integral evaluated by quadrature.
pub const MAX_NESTING: usize = 3;
pub const MIN_SITES: usize = 8;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StudyRow {
    pub epsilon: f64,
    pub time: f64,
    pub quantity: String,
    pub value: f64,
}

/// Table of distances indexed by `(ε, t, quantity)`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ScalingStudy {
    pub epsilons: Vec<f64>,
    pub times: Vec<f64>,
    pub quantities: Vec<String>,
    pub rows: Vec<StudyRow>,
}

impl ScalingStudy {
    pub fn new(epsilons: &[f64], times: &[f64]) -> Result<Self> {
        if epsilons.is_empty() || epsilons.iter().any(|&e| !(e > 0.0)) {
            return Err(Error::Argument("epsilons must be positive".into()));
        }
        if epsilons.windows(2).any(|w| w[1] >= w[0]) {
            return Err(Error::Argument("epsilons must be strictly decreasing".into()));
        }
        Ok(Self { epsilons: epsilons.to_vec(), times: times.to_vec(), ..Default::default() })
    }

    pub fn record(&mut self, epsilon: f64, time: f64, quantity: &str, value: f64) {
        if !self.quantities.iter().any(|q| q == quantity) {
            self.quantities.push(quantity.to_string());
        }
        self.rows.push(StudyRow { epsilon, time, quantity: quantity.to_string(), value });
    }

    /// Values of `quantity` at `time` in the order of `epsilons`.
    pub fn values(&self, quantity: &str, time: f64) -> Vec<f64> {
        self.epsilons
            .iter()
            .filter_map(|&e| {
                self.rows
                    .iter()
                    .find(|r| r.quantity == quantity && r.epsilon == e && r.time == time)
                    .map(|r| r.value)
            })
            .collect()
    }

    pub fn is_decreasing(&self, quantity: &str, time: f64) -> bool {
        let v = self.values(quantity, time);
        v.len() == self.epsilons.len() && v.windows(2).all(|w| w[1] < w[0])
    }

    /// Least-squares slope of `log value` against `log ε`.
    pub fn fitted_order(&self, quantity: &str, time: f64) -> Option<f64> {
        let pts: Vec<(f64, f64)> = self
            .epsilons
            .iter()
            .zip(self.values(quantity, time))
            .filter(|(_, v)| *v > 0.0)
            .map(|(&e, v)| (e.ln(), v.ln()))
            .collect();
        if pts.len() < 2 {
            return None;
        }
        let n = pts.len() as f64;
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
        let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
        Some(sxy / sxx)
    }

    /// Rows `(ε, t, quantity, value, fitted order)`.
    pub fn table(&self) -> Vec<(f64, f64, String, f64, f64)> {
        self.rows
            .iter()
            .map(|r| {
                let order = self.fitted_order(&r.quantity, r.time).unwrap_or(f64::NAN);
                (r.epsilon, r.time, r.quantity.clone(), r.value, order)
            })
            .collect()
    }
}

/// The system with unscaled interaction that governs the limit equations.
pub fn limit_system(spec: &HamiltonianSpec) -> Result<System> {
    System::new(spec.with_epsilon(1.0))
}

fn pair_projector(sys: &System) -> Result<Option<DenseOperator>> {
    let stat = sys.spec().statistics;
    if stat == crate::hilbert::Statistics::MaxwellBoltzmann {
        Ok(None)
    } else {
        Ok(Some(symmetrizer(2, sys.d(), stat)?))
    }
}

fn collision(sys: &System, proj: &Option<DenseOperator>, a: &DenseOperator, b: &DenseOperator) -> Result<DenseOperator> {
    let mut ab = tensor(a, b)?;
    if let Some(p) = proj {
        ab = p * &ab;
    }
    Ok(trace_tail(&sys.nint_state(1, 2, &ab)?, 1))
}

/// `-𝒩(1)f + Tr_2(-𝒩_int(1,2)) S₂ f f` for the limit system.
pub fn vlasov_rhs(lim: &System, f: &DenseOperator) -> Result<DenseOperator> {
    let proj = pair_projector(lim)?;
    Ok(&lim.generator_n(f, Picture::State)? + &collision(lim, &proj, f, f)?)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum VlasovMethod {
    /// RK4 on the kinetic equation.
    TimeStep { steps: usize },
    /// Iteration series by nested quadrature, `order ≤ 3`.
    Series { order: usize },
    /// Iteration series through its coupling-order coefficients, each
    /// obtained from a triangular linear ODE system.
    Coefficients { order: usize, steps: usize },
}

pub fn vlasov_solve(spec: &HamiltonianSpec, f1_0: &DenseOperator, t: f64, method: VlasovMethod) -> Result<Vec<(f64, DenseOperator)>> {
    let lim = limit_system(spec)?;
    match method {
        VlasovMethod::TimeStep { steps } => rk4_trajectory(f1_0, 0.0, t, steps, |_, f| vlasov_rhs(&lim, f)),
        VlasovMethod::Series { order } => {
            capacity("nested quadrature depth", MAX_NESTING, order)?;
            let mut acc = KahanSum::new(1, f1_0.one_particle_dim());
            for n in 0..=order {
                let prod = power(f1_0, 1 + n)?;
                acc.add(&limit_iterate(&lim, &prod, 1, t)?, 1.0);
            }
            Ok(vec![(0.0, f1_0.clone()), (t, acc.finish())])
        }
        VlasovMethod::Coefficients { order, steps } => {
            let coeffs = vlasov_coefficients(&lim, f1_0, t, order, steps)?;
            let mut acc = KahanSum::new(1, f1_0.one_particle_dim());
            for a in &coeffs {
                acc.add(a, 1.0);
            }
            Ok(vec![(0.0, f1_0.clone()), (t, acc.finish())])
        }
    }
}

/// `t₀ = (2‖Φ‖‖f₁⁰‖₁)^{-1}`.
pub fn series_time_bound(spec: &HamiltonianSpec, f1_0: &DenseOperator) -> f64 {
    1.0 / (2.0 * spec.phi2_op().operator_norm() * f1_0.trace_norm())
}

pub(crate) fn power(f1: &DenseOperator, k: usize) -> Result<DenseOperator> {
    let mut out = DenseOperator::identity(0, f1.one_particle_dim());
    for _ in 0..k {
        out = tensor(&out, f1)?;
    }
    Ok(out)
}

fn labels(n: usize) -> Vec<usize> {
    (1..=n).collect()
}

/// `Σ_{i ≤ m} Tr_{m+1}(-𝒩_int(i, m+1)) x`.
fn attach(lim: &System, x: &DenseOperator, m: usize) -> Result<DenseOperator> {
    let mut acc = KahanSum::new(m, x.one_particle_dim());
    for i in 1..=m {
        acc.add(&trace_tail(&lim.nint_state(i, m + 1, x)?, 1), 1.0);
    }
    Ok(acc.finish())
}

fn iterate_level(lim: &System, f: &DenseOperator, m: usize, tau: f64) -> Result<DenseOperator> {
    let total = f.n_particles();
    if m == total {
        return lim.free_group(&labels(total), -tau, f);
    }
    integrate(0.0, tau, m, f.one_particle_dim(), |sigma| {
        let inner = iterate_level(lim, f, m + 1, sigma)?;
        lim.free_group(&labels(m), -(tau - sigma), &attach(lim, &inner, m)?)
    })
}

/// The order-`n` term of the Vlasov hierarchy iteration for the `s`-th
/// marginal with initial datum `f` on `s + n` particles:
/// `∫_0^t dt_1 ... ∫_0^{t_{n-1}} dt_n Tr Π𝒢_1(-t+t_1) Σ(-𝒩_int) ... Π𝒢_1(-t_n) f`.
pub fn limit_iterate(lim: &System, f: &DenseOperator, s: usize, t: f64) -> Result<DenseOperator> {
    let n = f.n_particles().checked_sub(s).ok_or_else(|| Error::Argument("datum has fewer than s particles".into()))?;
    capacity("nested quadrature depth", MAX_NESTING, n)?;
    iterate_level(lim, f, s, t)
}

fn rk4_vec(
    y0: &[DenseOperator],
    t: f64,
    steps: usize,
    f: impl Fn(&[DenseOperator]) -> Result<Vec<DenseOperator>>,
) -> Result<Vec<DenseOperator>> {
    let h = t / steps as f64;
    let axpy = |y: &[DenseOperator], k: &[DenseOperator], a: f64| -> Vec<DenseOperator> {
        y.iter().zip(k).map(|(y, k)| y + &k.scale_re(a)).collect()
    };
    let mut y = y0.to_vec();
    for _ in 0..steps {
        let k1 = f(&y)?;
        let k2 = f(&axpy(&y, &k1, 0.5 * h))?;
        let k3 = f(&axpy(&y, &k2, 0.5 * h))?;
        let k4 = f(&axpy(&y, &k3, h))?;
        for (i, yi) in y.iter_mut().enumerate() {
            let incr = &(&(&k1[i] + &k2[i].scale_re(2.0)) + &k3[i].scale_re(2.0)) + &k4[i];
            *yi = &*yi + &incr.scale_re(h / 6.0);
        }
    }
    Ok(y)
}

/// Coefficients `a_n(t)` of `f_1(t) = Σ_n a_n(t)` ordered by powers of the
/// interaction: `ȧ_n = -𝒩 a_n + Σ_{p+q=n-1} Tr_2(-𝒩_int) S₂ a_p a_q`.
pub fn vlasov_coefficients(lim: &System, f1_0: &DenseOperator, t: f64, order: usize, steps: usize) -> Result<Vec<DenseOperator>> {
    if steps == 0 {
        return Err(Error::Step("at least one step required".into()));
    }
    let d = f1_0.one_particle_dim();
    let proj = pair_projector(lim)?;
    let mut y0 = vec![DenseOperator::zeros(1, d); order + 1];
    y0[0] = f1_0.clone();
    rk4_vec(&y0, t, steps, |a| {
        let mut out = Vec::with_capacity(a.len());
        for n in 0..a.len() {
            let mut acc = KahanSum::new(1, d);
            acc.add(&lim.generator_n(&a[n], Picture::State)?, 1.0);
            for p in 0..n {
                acc.add(&collision(lim, &proj, &a[p], &a[n - 1 - p])?, 1.0);
            }
            out.push(acc.finish());
        }
        Ok(out)
    })
}

/// Coupling-order coefficients of `Π_{i ≤ s} f_1(t, i)`.
fn product_coefficients(a: &[DenseOperator], s: usize) -> Result<Vec<DenseOperator>> {
    let mut p = a.to_vec();
    for _ in 1..s {
        let mut next = Vec::with_capacity(a.len());
        for n in 0..a.len() {
            let mut acc = KahanSum::new(p[0].n_particles() + 1, a[0].one_particle_dim());
            for q in 0..=n {
                acc.add(&tensor(&p[n - q], &a[q])?, 1.0);
            }
            next.push(acc.finish());
        }
        p = next;
    }
    Ok(p)
}

fn sum_ops(ops: &[DenseOperator]) -> DenseOperator {
    let mut acc = KahanSum::new(ops[0].n_particles(), ops[0].one_particle_dim());
    for o in ops {
        acc.add(o, 1.0);
    }
    acc.finish()
}

fn default_steps(t: f64) -> usize {
    ((t.abs() / 1e-3).ceil() as usize).max(200)
}

/// Vlasov solution at `t` by RK4 with the default step.
pub fn vlasov_state(spec: &HamiltonianSpec, f1_0: &DenseOperator, t: f64) -> Result<DenseOperator> {
    Ok(vlasov_solve(spec, f1_0, t, VlasovMethod::TimeStep { steps: default_steps(t) })?.pop().expect("nonempty").1)
}

/// `ε^s F_s(t)` for the chaos data `ε^s F_s⁰ = Π f_1⁰`, truncated at
/// `n_max` orders.
pub fn scaled_marginal(spec: &HamiltonianSpec, epsilon: f64, f1_0: &DenseOperator, t: f64, s: usize, n_max: usize) -> Result<DenseOperator> {
    let sys = System::new(spec.with_epsilon(epsilon))?;
    let f = f1_0.scale_re(1.0 / epsilon);
    let mut acc = KahanSum::new(s, f1_0.one_particle_dim());
    for n in 0..=n_max {
        acc.add(&chaos_term(&sys, &f, t, s, n, true)?, epsilon.powi(s as i32));
    }
    Ok(acc.finish())
}

/// Distances `‖ε^s F_s(t) - f_s(t)‖₁` for chaos data. `state-s{s}` uses the
/// ε → 0 limit of the same truncation, `state-s{s}-vlasov` the product of
/// full Vlasov solutions.
pub fn meanfield_state_study(
    spec: &HamiltonianSpec,
    f1_0: &DenseOperator,
    epsilons: &[f64],
    t: f64,
    s_list: &[usize],
    n_max: usize,
) -> Result<ScalingStudy> {
    let mut study = ScalingStudy::new(epsilons, &[t])?;
    let lim = limit_system(spec)?;
    let coeffs = vlasov_coefficients(&lim, f1_0, t, n_max, default_steps(t))?;
    let f1_t = vlasov_state(spec, f1_0, t)?;
    for &eps in epsilons {
        for &s in s_list {
            let marginal = scaled_marginal(spec, eps, f1_0, t, s, n_max)?;
            let truncated = sum_ops(&product_coefficients(&coeffs, s)?);
            study.record(eps, t, &format!("state-s{s}"), (&marginal - &truncated).trace_norm());
            study.record(eps, t, &format!("state-s{s}-vlasov"), (&marginal - &power(&f1_t, s)?).trace_norm());
        }
    }
    Ok(study)
}

/// `‖(𝔄_1(-t,{Y}) - Π𝒢_1(-t)) f‖₁` for `n = 0`, and for `n ≥ 1` the traced
/// distance between `ε^{-n}(n!)^{-1} 𝔄_{1+n}(-t,{Y},s+1..s+n) f` and the
/// order-`n` nested integral.
pub fn cumulant_perturbation_study(
    spec: &HamiltonianSpec,
    f: &DenseOperator,
    epsilons: &[f64],
    t: f64,
    s: usize,
) -> Result<ScalingStudy> {
    let total = f.n_particles();
    let n = total.checked_sub(s).ok_or_else(|| Error::Argument("datum has fewer than s particles".into()))?;
    let mut study = ScalingStudy::new(epsilons, &[t])?;
    let lim = limit_system(spec)?;
    let y = LabelSet::range(1, s);
    let arg = ClusterArgument::headed(&y, &labels(total)[s..])?;
    let comparator = if n == 0 { lim.free_group(&labels(s), -t, f)? } else { limit_iterate(&lim, f, s, t)? };
    let weight = 1.0 / crate::combinatorics::factorial(n) as f64;
    for &eps in epsilons {
        let sys = System::new(spec.with_epsilon(eps))?;
        let a = cumulant(&sys, -t, &arg, GroupFlavor::Full, f)?;
        let scaled = trace_tail(&a, n).scale_re(weight / eps.powi(n as i32));
        study.record(eps, t, &format!("cumulant-order-{}", n + 1), (&scaled - &comparator).trace_norm());
    }
    Ok(study)
}

/// `b_s(t)` of the dual Vlasov hierarchy by nested quadrature.
pub fn dual_vlasov_series(spec: &HamiltonianSpec, b0: &OperatorSequence, t: f64, s: usize) -> Result<DenseOperator> {
    capacity("nested quadrature depth", MAX_NESTING, s.saturating_sub(1))?;
    capacity("dual order", b0.n_max(), s)?;
    let lim = limit_system(spec)?;
    dual_level(&lim, b0, s, t)
}

fn dual_level(lim: &System, b0: &OperatorSequence, s: usize, t: f64) -> Result<DenseOperator> {
    let d = b0.d();
    let y = labels(s);
    let mut out = lim.free_group(&y, t, &b0.component_op(s))?;
    if s >= 2 {
        let integral = integrate(0.0, t, s, d, |tau| {
            let lower = dual_level(lim, b0, s - 1, tau)?;
            let mut acc = KahanSum::new(s, d);
            for j in 1..=s {
                let rest: Vec<usize> = y.iter().copied().filter(|&l| l != j).collect();
                let emb = embed(&lower, &rest, s)?;
                for i in 1..=s {
                    if i != j {
                        acc.add(&lim.nint_observable(i, j, &emb)?, 1.0);
                    }
                }
            }
            lim.free_group(&y, t - tau, &acc.finish())
        })?;
        out += &integral;
    }
    Ok(out)
}

/// Operator-norm distances `‖ε^{-s}B_s(t) - b_s(t)‖` for
/// `B_s⁰ = ε^s b_s⁰`.
pub fn limit_observable_study(
    spec: &HamiltonianSpec,
    b0: &OperatorSequence,
    epsilons: &[f64],
    t: f64,
    s_list: &[usize],
) -> Result<ScalingStudy> {
    let mut study = ScalingStudy::new(epsilons, &[t])?;
    let limits: Vec<DenseOperator> = s_list.iter().map(|&s| dual_vlasov_series(spec, b0, t, s)).collect::<Result<_>>()?;
    for &eps in epsilons {
        let sys = System::new(spec.with_epsilon(eps))?;
        let mut scaled0 = b0.clone();
        for op in b0.components() {
            scaled0.set_component(op.scale_re(eps.powi(op.n_particles() as i32)))?;
        }
        for (&s, lim) in s_list.iter().zip(&limits) {
            let bt = crate::observables::dual_bbgky_series(&sys, &scaled0, t, s, crate::observables::DualRepresentation::Cumulant)?;
            let dist = (&bt.scale_re(eps.powi(-(s as i32))) - lim).operator_norm();
            study.record(eps, t, &format!("observable-s{s}"), dist);
        }
    }
    Ok(study)
}

/// `Σ_{s ≤ s_max} (s!)^{-1} Tr b_s(t) Π f_1⁰`.
pub fn limit_mean_value(spec: &HamiltonianSpec, b0: &OperatorSequence, f1_0: &DenseOperator, t: f64, s_max: usize) -> Result<C64> {
    let mut total = c(0.0);
    for s in 1..=s_max.min(b0.n_max()) {
        let bs = dual_vlasov_series(spec, b0, t, s)?;
        let w = 1.0 / crate::combinatorics::factorial(s) as f64;
        total += (bs.matrix() * power(f1_0, s)?.matrix()).trace() * w;
    }
    Ok(total)
}

/// `|(b^{(1)}(t), f^{(c)}) - Tr b_1⁰ f_1(t)|` with the mean value truncated
/// at `s_max` and `f_1(t)` from the RK4 Vlasov solver.
pub fn vlasov_duality_residual(spec: &HamiltonianSpec, b1: &DenseOperator, f1_0: &DenseOperator, t: f64, s_max: usize) -> Result<f64> {
    let b0 = OperatorSequence::one_component(b1, s_max);
    let lhs = limit_mean_value(spec, &b0, f1_0, t, s_max)?;
    let rhs = (b1.matrix() * vlasov_state(spec, f1_0, t)?.matrix()).trace();
    Ok((lhs - rhs).norm())
}

/// `|(b^{(k)}(t), f^{(c)}) - (k!)^{-1} Tr b_k⁰ Π f_1(t)|` for a `k`-ary
/// observable.
pub fn chaos_preservation_residual(spec: &HamiltonianSpec, bk: &DenseOperator, f1_0: &DenseOperator, t: f64, s_max: usize) -> Result<f64> {
    let k = bk.n_particles();
    let mut b0 = OperatorSequence::zeros(s_max, bk.one_particle_dim());
    b0.set_component(bk.clone())?;
    let lhs = limit_mean_value(spec, &b0, f1_0, t, s_max)?;
    let f1_t = vlasov_state(spec, f1_0, t)?;
    let rhs = (bk.matrix() * power(&f1_t, k)?.matrix()).trace() / crate::combinatorics::factorial(k) as f64;
    Ok((lhs - rhs).norm())
}

/// `‖ε^s G_s(t)‖₁` for chaos data `εG_1⁰ = g_1⁰`, with `s = 1` also compared
/// with the Vlasov solution.
pub fn nonlinear_vlasov_check(
    spec: &HamiltonianSpec,
    g1_0: &DenseOperator,
    epsilons: &[f64],
    t: f64,
    s_list: &[usize],
    n_max: usize,
) -> Result<ScalingStudy> {
    let mut study = ScalingStudy::new(epsilons, &[t])?;
    let lim = limit_system(spec)?;
    let truncated = sum_ops(&vlasov_coefficients(&lim, g1_0, t, n_max, default_steps(t))?);
    for &eps in epsilons {
        let sys = System::new(spec.with_epsilon(eps))?;
        let g = g1_0.scale_re(1.0 / eps);
        for &s in s_list {
            let gs = chaos_correlations(&sys, &g, t, s, n_max)?.scale_re(eps.powi(s as i32));
            if s == 1 {
                study.record(eps, t, "correlation-s1", (&gs - &truncated).trace_norm());
            } else {
                study.record(eps, t, &format!("correlation-s{s}"), gs.trace_norm());
            }
        }
    }
    Ok(study)
}

/// Limit one-particle correlation series by nested quadrature.
pub fn limit_correlation_series(spec: &HamiltonianSpec, g1_0: &DenseOperator, t: f64, order: usize) -> Result<DenseOperator> {
    Ok(vlasov_solve(spec, g1_0, t, VlasovMethod::Series { order })?.pop().expect("nonempty").1)
}

/// `‖εF_1(t) - f_1(t)‖₁` with `F_1` from the RK4 kinetic-equation solver
/// and `‖ε^s F_s(t | F_1(t)) - Π f_1(t)‖₁` for the listed `s ≥ 2`.
pub fn gqke_limit_study(
    spec: &HamiltonianSpec,
    f1_0: &DenseOperator,
    epsilons: &[f64],
    t: f64,
    s_list: &[usize],
    n_max: usize,
    steps: usize,
) -> Result<ScalingStudy> {
    let mut study = ScalingStudy::new(epsilons, &[t])?;
    let f1_t = vlasov_state(spec, f1_0, t)?;
    for &eps in epsilons {
        let sys = System::new(spec.with_epsilon(eps))?;
        let sol = solve_gqke(&sys, &f1_0.scale_re(1.0 / eps), t, GqkeMethod::TimeStep { steps }, n_max)?;
        let big = sol.final_state();
        study.record(eps, t, "gqke-s1", (&big.scale_re(eps) - &f1_t).trace_norm());
        for &s in s_list.iter().filter(|&&s| s >= 2) {
            let fs = marginal_functional(&sys, t, big, s, n_max)?.value.scale_re(eps.powi(s as i32));
            study.record(eps, t, &format!("gqke-functional-s{s}"), (&fs - &power(&f1_t, s)?).trace_norm());
        }
    }
    Ok(study)
}

/// `Π𝒢_1(-t) h Π𝒢_1(t) x` on two particles.
pub fn dressed_correlation(lim: &System, h2: &DenseOperator, t: f64, x: &DenseOperator) -> Result<DenseOperator> {
    let free = lim.free_group(&[1, 2], t, x)?;
    lim.free_group(&[1, 2], -t, &(h2 * &free))
}

/// Right side of the modified Vlasov equation.
pub fn modified_vlasov_rhs(lim: &System, h2: &DenseOperator, t: f64, f: &DenseOperator) -> Result<DenseOperator> {
    let ff = dressed_correlation(lim, h2, t, &tensor(f, f)?)?;
    Ok(&lim.generator_n(f, Picture::State)? + &trace_tail(&lim.nint_state(1, 2, &ff)?, 1))
}

pub fn modified_vlasov_solve(
    spec: &HamiltonianSpec,
    f1_0: &DenseOperator,
    h2: &DenseOperator,
    t: f64,
    steps: usize,
) -> Result<Vec<(f64, DenseOperator)>> {
    if h2.n_particles() != 2 || !h2.is_hermitian(crate::hilbert::HERMITIAN_TOL) {
        return Err(Error::Argument("h2 must be a Hermitian two-particle operator".into()));
    }
    let lim = limit_system(spec)?;
    rk4_trajectory(f1_0, 0.0, t, steps, |tau, f| modified_vlasov_rhs(&lim, h2, tau, f))
}

/// `‖ε²F_2(t | F_1(t)) - Π𝒢_1(-t) h Π𝒢_1(t) f_1(t) f_1(t)‖₁` for the
/// correlated kinetic pipeline against the modified Vlasov solution.
pub fn correlated_meanfield_study(
    spec: &HamiltonianSpec,
    h2: &DenseOperator,
    f1_0: &DenseOperator,
    epsilons: &[f64],
    t: f64,
    n_max: usize,
    steps: usize,
) -> Result<ScalingStudy> {
    let mut study = ScalingStudy::new(epsilons, &[t])?;
    let lim = limit_system(spec)?;
    let f1_t = modified_vlasov_solve(spec, f1_0, h2, t, steps.max(default_steps(t)))?.pop().expect("nonempty").1;
    let target = dressed_correlation(&lim, h2, t, &tensor(&f1_t, &f1_t)?)?;
    let mut map = std::collections::BTreeMap::new();
    map.insert(2, h2.clone());
    let h = InitialCorrelations::new(map)?;
    for &eps in epsilons {
        let sys = System::new(spec.with_epsilon(eps))?;
        let sol = solve_correlated_gqke(&sys, &h, &f1_0.scale_re(1.0 / eps), t, steps, n_max)?;
        let big = sol.final_state();
        study.record(eps, t, "correlated-s1", (&big.scale_re(eps) - &f1_t).trace_norm());
        let f2 = correlated_marginal_functional(&sys, t, &h, big, 2, n_max)?.value.scale_re(eps * eps);
        study.record(eps, t, "correlated-s2", (&f2 - &target).trace_norm());
    }
    Ok(study)
}

/// Scattering-dressed coupling `e^{-itK₂} b e^{itK₂}`, whose kernel is the
/// coupling ratio of the Gross–Pitaevskii-type equation.
pub fn gp_coupling(spec: &HamiltonianSpec, b: &DenseOperator, t: f64) -> Result<DenseOperator> {
    limit_system(spec)?.free_group(&[1, 2], -t, b)
}

/// `Σ_{q',q''} 𝔟(q,q;q',q'') ψ(q'') ψ*(q) ψ(q')`.
pub fn gp_nonlinearity(coupling: &DenseOperator, psi: &[C64]) -> Result<Vec<C64>> {
    let m = psi.len();
    if coupling.n_particles() != 2 || coupling.one_particle_dim() != m {
        return Err(Error::Dimension("coupling must act on two copies of the lattice".into()));
    }
    let k = coupling.matrix();
    Ok((0..m)
        .map(|q| {
            let mut z = c(0.0);
            for q1 in 0..m {
                for q2 in 0..m {
                    z += k[(q * m + q, q1 * m + q2)] * psi[q2] * psi[q].conj() * psi[q1];
                }
            }
            z
        })
        .collect())
}

/// Interaction kernel of the lattice Hartree equation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Potential {
    Delta,
    /// Normalized periodic Gaussian of the given width.
    Smooth { width: f64 },
}

impl Potential {
    /// `h Φ(q_j)` at the lattice displacements `j = 0..M`.
    fn weights(&self, m: usize, spacing: f64) -> Vec<f64> {
        match *self {
            Potential::Delta => (0..m).map(|j| if j == 0 { 1.0 } else { 0.0 }).collect(),
            Potential::Smooth { width } => (0..m)
                .map(|j| {
                    let x = j.min(m - j) as f64 * spacing;
                    spacing * (-x * x / (2.0 * width * width)).exp() / ((2.0 * std::f64::consts::PI).sqrt() * width)
                })
                .collect(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SplittingOrder {
    Strang,
    /// Symmetric triple-jump composition of Strang steps.
    Fourth,
}

fn wavenumbers(m: usize, spacing: f64) -> Vec<f64> {
    let l = m as f64 * spacing;
    (0..m)
        .map(|j| {
            let jj = if j <= m / 2 { j as f64 } else { j as f64 - m as f64 };
            2.0 * std::f64::consts::PI * jj / l
        })
        .collect()
}

struct Splitter {
    fft: Arc<dyn Fft<f64>>,
    ifft: Arc<dyn Fft<f64>>,
    half_k2: Vec<f64>,
    weights: Vec<f64>,
    coupling: f64,
    spacing: f64,
}

impl Splitter {
    fn new(m: usize, spacing: f64, potential: Potential, coupling: f64) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            fft: planner.plan_fft_forward(m),
            ifft: planner.plan_fft_inverse(m),
            half_k2: wavenumbers(m, spacing).iter().map(|k| 0.5 * k * k).collect(),
            weights: potential.weights(m, spacing),
            coupling,
            spacing,
        }
    }

    fn kinetic(&self, psi: &mut [C64], dt: f64) {
        let m = psi.len() as f64;
        self.fft.process(psi);
        for (z, &w) in psi.iter_mut().zip(&self.half_k2) {
            *z *= C64::from_polar(1.0 / m, -w * dt);
        }
        self.ifft.process(psi);
    }

    fn potential(&self, psi: &[C64]) -> Vec<f64> {
        let m = psi.len();
        (0..m)
            .map(|q| self.coupling * (0..m).map(|p| self.weights[(q + m - p) % m] * psi[p].norm_sqr()).sum::<f64>())
            .collect()
    }

    fn nonlinear(&self, psi: &mut [C64], dt: f64) {
        let v = self.potential(psi);
        for (z, v) in psi.iter_mut().zip(v) {
            *z *= C64::from_polar(1.0, -v * dt);
        }
    }

    fn strang(&self, psi: &mut [C64], dt: f64) {
        self.kinetic(psi, 0.5 * dt);
        self.nonlinear(psi, dt);
        self.kinetic(psi, 0.5 * dt);
    }

    fn step(&self, psi: &mut [C64], dt: f64, order: SplittingOrder) {
        match order {
            SplittingOrder::Strang => self.strang(psi, dt),
            SplittingOrder::Fourth => {
                let cr = 2f64.powf(1.0 / 3.0);
                let w1 = 1.0 / (2.0 - cr);
                let w0 = -cr * w1;
                self.strang(psi, w1 * dt);
                self.strang(psi, w0 * dt);
                self.strang(psi, w1 * dt);
            }
        }
    }

    fn energy(&self, psi: &[C64]) -> f64 {
        let m = psi.len() as f64;
        let mut hat = psi.to_vec();
        self.fft.process(&mut hat);
        let kin: f64 = hat.iter().zip(&self.half_k2).map(|(z, w)| w * z.norm_sqr()).sum::<f64>() / m;
        let v = self.potential(psi);
        let pot: f64 = psi.iter().zip(v).map(|(z, v)| 0.5 * v * z.norm_sqr()).sum();
        self.spacing * (kin + pot)
    }

    /// The kinetic flow is exact, so only the nonlinear phase per step is
    /// bounded.
    fn check_step(&self, psi: &[C64], dt: f64) -> Result<()> {
        let vmax = self.potential(psi).into_iter().fold(0.0, |a: f64, v| a.max(v.abs()));
        if dt * vmax > 0.5 * std::f64::consts::PI {
            return Err(Error::Step(format!("time step {dt} does not resolve the nonlinear phase ({vmax:.3e})")));
        }
        Ok(())
    }
}

/// Wavefunction on a periodic lattice with `M ≥ 8` sites.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LatticeWavefunction {
    spacing: f64,
    values: Vec<C64>,
}

impl LatticeWavefunction {
    pub fn new(values: Vec<C64>, spacing: f64) -> Result<Self> {
        if values.len() < MIN_SITES {
            return Err(Error::Argument(format!("lattice needs at least {MIN_SITES} sites")));
        }
        if !(spacing > 0.0) || values.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::Argument("spacing must be positive and values finite".into()));
        }
        Ok(Self { spacing, values })
    }

    /// `A e^{ikq}` with `k = 2π mode / (M h)`.
    pub fn plane_wave(sites: usize, spacing: f64, mode: i64, amplitude: f64) -> Result<Self> {
        let k = 2.0 * std::f64::consts::PI * mode as f64 / (sites as f64 * spacing);
        Self::new((0..sites).map(|l| C64::from_polar(amplitude, k * l as f64 * spacing)).collect(), spacing)
    }

    pub fn sites(&self) -> usize {
        self.values.len()
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn values(&self) -> &[C64] {
        &self.values
    }

    /// `(h Σ |ψ|²)^{1/2}`.
    pub fn norm(&self) -> f64 {
        (self.spacing * self.values.iter().map(|z| z.norm_sqr()).sum::<f64>()).sqrt()
    }

    pub fn energy(&self, potential: Potential, coupling: f64) -> f64 {
        Splitter::new(self.sites(), self.spacing, potential, coupling).energy(&self.values)
    }
}

/// Split-step solution of `i∂ψ = -½Δψ + (Φ * |ψ|²)ψ` on the periodic
/// lattice; the kinetic part is exact in Fourier space.
pub fn hartree_nls_solve(
    psi0: &LatticeWavefunction,
    potential: Potential,
    coupling: f64,
    t: f64,
    steps: usize,
    order: SplittingOrder,
) -> Result<Vec<(f64, LatticeWavefunction)>> {
    if steps == 0 {
        return Err(Error::Step("at least one step required".into()));
    }
    let sp = Splitter::new(psi0.sites(), psi0.spacing, potential, coupling);
    let dt = t / steps as f64;
    sp.check_step(&psi0.values, dt)?;
    let mut psi = psi0.values.clone();
    let mut out = Vec::with_capacity(steps + 1);
    out.push((0.0, psi0.clone()));
    for k in 1..=steps {
        sp.step(&mut psi, dt, order);
        out.push((k as f64 * dt, LatticeWavefunction { spacing: psi0.spacing, values: psi.clone() }));
    }
    Ok(out)
}

/// Small periodic lattice whose one-particle space is the many-body
/// one-particle space.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LatticeModel {
    pub sites: usize,
    pub spacing: f64,
    pub potential: Potential,
    pub coupling: f64,
}

impl LatticeModel {
    /// `K = -½Δ` (Fourier multiplier) and `Φ(q, q') = coupling · Φ(q - q')`.
    pub fn spec(&self) -> Result<HamiltonianSpec> {
        let m = self.sites;
        let ks = wavenumbers(m, self.spacing);
        let k = Mat::from_fn(m, m, |a, b| {
            ks.iter().map(|&k| C64::from_polar(0.5 * k * k / m as f64, k * (a as f64 - b as f64) * self.spacing)).sum()
        });
        let k = (&k + &k.adjoint()) * c(0.5);
        let w = self.potential.weights(m, self.spacing);
        let phi = Mat::from_fn(m * m, m * m, |r, col| {
            if r != col {
                return c(0.0);
            }
            let (q, p) = (r / m, r % m);
            c(self.coupling * w[(q + m - p) % m] / self.spacing)
        });
        let mut spec = HamiltonianSpec::new(k, phi, 1.0)?;
        spec.max_particles = 4;
        Ok(spec)
    }

    /// Hartree evolution of a unit vector `v = √h ψ`.
    pub fn hartree(&self, v: &[C64], t: f64, steps: usize) -> Result<Vec<C64>> {
        let sp = Splitter::new(self.sites, self.spacing, self.potential, self.coupling);
        let scale = self.spacing.sqrt();
        let mut psi: Vec<C64> = v.iter().map(|z| z / scale).collect();
        let dt = t / steps.max(1) as f64;
        sp.check_step(&psi, dt)?;
        for _ in 0..steps.max(1) {
            sp.step(&mut psi, dt, SplittingOrder::Fourth);
        }
        Ok(psi.iter().map(|z| z * scale).collect())
    }
}

pub fn projector(v: &[C64]) -> DenseOperator {
    let m = v.len();
    DenseOperator::new(1, m, Mat::from_fn(m, m, |a, b| v[a] * v[b].conj())).expect("square")
}

/// `‖f_1(t) - |ψ_t⟩⟨ψ_t|‖₁` between the RK4 Vlasov solution from a pure
/// state and the Hartree evolution on the same lattice.
pub fn hartree_vlasov_consistency(model: &LatticeModel, v: &[C64], t: f64) -> Result<f64> {
    let spec = model.spec()?;
    let f = vlasov_state(&spec, &projector(v), t)?;
    let vt = model.hartree(v, t, default_steps(t))?;
    Ok((&f - &projector(&vt)).trace_norm())
}

/// Distances between `ε^s F_s(t)` for pure chaos data and
/// `|ψ_t⟩⟨ψ_t|^{⊗s}` on the lattice model. `bridge-s{s}` uses the ε → 0
/// limit of the same truncation, `bridge-s{s}-hartree` the Hartree
/// projector products.
pub fn pure_state_bridge(model: &LatticeModel, v: &[C64], epsilons: &[f64], t: f64, n_max_total: usize) -> Result<ScalingStudy> {
    let spec = model.spec()?;
    capacity("bridge particles", spec.max_particles, n_max_total)?;
    let p = projector(v);
    let lim = limit_system(&spec)?;
    let n_order = n_max_total.saturating_sub(1);
    let coeffs = vlasov_coefficients(&lim, &p, t, n_order, default_steps(t))?;
    let pt = projector(&model.hartree(v, t, default_steps(t))?);
    let mut study = ScalingStudy::new(epsilons, &[t])?;
    for &eps in epsilons {
        for s in 1..=2usize.min(n_max_total) {
            let n_max = n_max_total - s;
            let marginal = scaled_marginal(&spec, eps, &p, t, s, n_max)?;
            let truncated = sum_ops(&product_coefficients(&coeffs[..=n_max], s)?);
            study.record(eps, t, &format!("bridge-s{s}"), (&marginal - &truncated).trace_norm());
            study.record(eps, t, &format!("bridge-s{s}-hartree"), (&marginal - &power(&pt, s)?).trace_norm());
        }
    }
    Ok(study)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::random::{random_density, random_hermitian, rng};

    fn spec() -> HamiltonianSpec {
        HamiltonianSpec::transverse(0.9, 0.4)
    }

    #[test]
    fn vlasov_free_and_trace() {
        let f = random_density(1, 2, &mut rng(1));
        let free = spec().without_interaction();
        let traj = vlasov_solve(&free, &f, 0.8, VlasovMethod::TimeStep { steps: 200 }).unwrap();
        let lim = limit_system(&free).unwrap();
        assert!((&traj.last().unwrap().1 - &lim.free_group(&[1], -0.8, &f).unwrap()).max_abs() < 1e-9);
        let traj = vlasov_solve(&spec(), &f, 1.0, VlasovMethod::TimeStep { steps: 500 }).unwrap();
        for (_, x) in &traj {
            assert!((x.trace() - f.trace()).norm() < 1e-10);
            assert!(x.is_hermitian(1e-12));
        }
    }

    #[test]
    fn vlasov_series_matches_time_stepping() {
        let s = spec();
        let f = random_density(1, 2, &mut rng(2));
        let t = 0.5 * series_time_bound(&s, &f);
        let rk = vlasov_state(&s, &f, t).unwrap();
        let series = vlasov_solve(&s, &f, t, VlasovMethod::Coefficients { order: 24, steps: 1000 }).unwrap().pop().unwrap().1;
        assert!((&rk - &series).trace_norm() < 1e-6);
        let lim = limit_system(&s).unwrap();
        let coeffs = vlasov_coefficients(&lim, &f, t, 3, 1000).unwrap();
        for n in 0..=3 {
            let nested = limit_iterate(&lim, &power(&f, 1 + n).unwrap(), 1, t).unwrap();
            assert!((&nested - &coeffs[n]).trace_norm() < 1e-9, "order {n}");
        }
    }

    #[test]
    fn chaos_preserved_in_iteration() {
        let s = spec();
        let lim = limit_system(&s).unwrap();
        let f = random_density(1, 2, &mut rng(3)).scale_re(0.5);
        let t = 0.4;
        let coeffs = vlasov_coefficients(&lim, &f, t, 2, 1000).unwrap();
        let prod = product_coefficients(&coeffs, 2).unwrap();
        for n in 0..=2 {
            let nested = limit_iterate(&lim, &power(&f, 2 + n).unwrap(), 2, t).unwrap();
            assert!((&nested - &prod[n]).trace_norm() < 1e-9, "order {n}");
        }
    }

    #[test]
    fn dual_vlasov_examples() {
        let s = spec();
        let lim = limit_system(&s).unwrap();
        let b1 = random_hermitian(1, 2, &mut rng(4));
        let b0 = OperatorSequence::one_component(&b1, 3);
        let t = 0.6;
        let one = dual_vlasov_series(&s, &b0, t, 1).unwrap();
        assert!((&one - &lim.free_group(&[1], t, &b1).unwrap()).max_abs() < 1e-14);
        let two = dual_vlasov_series(&s, &b0, t, 2).unwrap();
        let expect = integrate(0.0, t, 2, 2, |tau| {
            let mut sum = DenseOperator::zeros(2, 2);
            for j in 1..=2 {
                sum += &lim.free_group(&[j], tau, &embed(&b1, &[j], 2).unwrap()).unwrap();
            }
            lim.free_group(&[1, 2], t - tau, &lim.nint_observable(1, 2, &sum).unwrap())
        })
        .unwrap();
        assert!((&two - &expect).max_abs() < 1e-12);
        let free = s.without_interaction();
        assert!(dual_vlasov_series(&free, &b0, t, 2).unwrap().max_abs() < 1e-15);
    }

    #[test]
    fn limit_duality_and_chaos() {
        let s = spec();
        let f = random_density(1, 2, &mut rng(5)).scale_re(0.05);
        let b1 = random_hermitian(1, 2, &mut rng(6));
        assert!(vlasov_duality_residual(&s, &b1, &f, 0.5, 4).unwrap() < 1e-6);
        let b2 = crate::hilbert::symmetrize(&random_hermitian(2, 2, &mut rng(7)));
        assert!(chaos_preservation_residual(&s, &b2, &f, 0.5, 4).unwrap() < 1e-6);
    }

    #[test]
    fn number_observable_exact() {
        let s = spec();
        let b0 = OperatorSequence::one_component(&DenseOperator::identity(1, 2), 3);
        let study = limit_observable_study(&s, &b0, &DEFAULT_EPSILONS, 0.5, &[1, 2, 3]).unwrap();
        for r in &study.rows {
            let s: i32 = r.quantity.trim_start_matches("observable-s").parse().unwrap();
            assert!(r.value < 1e-13 * r.epsilon.powi(-s), "{r:?}");
        }
    }

    #[test]
    fn studies_vanish_without_interaction() {
        let free = spec().without_interaction();
        let f = random_density(1, 2, &mut rng(8));
        let st = meanfield_state_study(&free, &f, &DEFAULT_EPSILONS, 0.5, &[1, 2], 2).unwrap();
        assert!(st.rows.iter().all(|r| r.value < 1e-10), "{:?}", st.rows);
        let nl = nonlinear_vlasov_check(&free, &f, &DEFAULT_EPSILONS, 0.5, &[2], 2).unwrap();
        assert!(nl.rows.iter().all(|r| r.value < 1e-12));
        let at0 = meanfield_state_study(&spec(), &f, &DEFAULT_EPSILONS, 0.0, &[1, 2], 2).unwrap();
        assert!(at0.rows.iter().all(|r| r.value < 1e-12));
    }

    #[test]
    fn modified_vlasov_reductions() {
        let s = spec();
        let f = random_density(1, 2, &mut rng(9));
        let id = DenseOperator::identity(2, 2);
        let a = modified_vlasov_solve(&s, &f, &id, 0.5, 100).unwrap();
        let b = vlasov_solve(&s, &f, 0.5, VlasovMethod::TimeStep { steps: 100 }).unwrap();
        assert!((&a.last().unwrap().1 - &b.last().unwrap().1).max_abs() < 1e-12);
        let h2 = &id + &crate::hilbert::symmetrize(&random_hermitian(2, 2, &mut rng(10))).scale_re(0.3);
        let free = s.without_interaction();
        let c = modified_vlasov_solve(&free, &f, &h2, 0.5, 100).unwrap();
        let lim = limit_system(&free).unwrap();
        assert!((&c.last().unwrap().1 - &lim.free_group(&[1], -0.5, &f).unwrap()).max_abs() < 1e-9);
    }

    #[test]
    fn nls_conservation_and_plane_wave() {
        let m = 64;
        let h = 2.0 * std::f64::consts::PI / m as f64;
        let vals: Vec<C64> = (0..m)
            .map(|l| {
                let q = l as f64 * h;
                C64::new(1.0 + 0.5 * q.cos(), 0.3 * (2.0 * q).sin())
            })
            .collect();
        let psi0 = LatticeWavefunction::new(vals, h).unwrap();
        let traj = hartree_nls_solve(&psi0, Potential::Delta, 1.0, 1.0, 1000, SplittingOrder::Fourth).unwrap();
        let last = &traj.last().unwrap().1;
        assert!((last.norm() - psi0.norm()).abs() < 1e-10);
        let e0 = psi0.energy(Potential::Delta, 1.0);
        assert!((last.energy(Potential::Delta, 1.0) - e0).abs() < 1e-8);

        let amp = 0.7;
        let pw = LatticeWavefunction::plane_wave(m, h, 3, amp).unwrap();
        let t = 1.0;
        let traj = hartree_nls_solve(&pw, Potential::Delta, 1.0, t, 100, SplittingOrder::Strang).unwrap();
        let omega = 0.5 * 9.0 + amp * amp;
        let worst = traj
            .last()
            .unwrap()
            .1
            .values()
            .iter()
            .zip(pw.values())
            .map(|(z, z0)| (z / (z0 * C64::from_polar(1.0, -omega * t))).arg().abs())
            .fold(0.0, f64::max);
        assert!(worst < 1e-8);

        let free = hartree_nls_solve(&pw, Potential::Smooth { width: 0.3 }, 0.0, t, 10, SplittingOrder::Strang).unwrap();
        let expect = C64::from_polar(1.0, -4.5 * t);
        assert!(free.last().unwrap().1.values().iter().zip(pw.values()).all(|(z, z0)| (z - z0 * expect).norm() < 1e-12));
        assert!(LatticeWavefunction::new(vec![c(1.0); 4], 1.0).is_err());
        assert!(hartree_nls_solve(&psi0, Potential::Delta, 1.0, 1.0, 1, SplittingOrder::Strang).is_err());
    }

    fn bridge_model(coupling: f64) -> LatticeModel {
        LatticeModel { sites: 4, spacing: std::f64::consts::PI / 2.0, potential: Potential::Delta, coupling }
    }

    fn bridge_vector() -> Vec<C64> {
        let raw = [C64::new(0.6, 0.1), C64::new(0.3, -0.4), C64::new(0.2, 0.2), C64::new(-0.1, 0.5)];
        let n = raw.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        raw.iter().map(|z| z / n).collect()
    }

    #[test]
    fn hartree_matches_pure_vlasov() {
        let model = bridge_model(0.8);
        assert!(hartree_vlasov_consistency(&model, &bridge_vector(), 1.0).unwrap() < 1e-6);
        let spec = model.spec().unwrap();
        assert!(spec.kinetic.iter().all(|z| z.re.is_finite()));
    }

    #[test]
    fn gp_coupling_cases() {
        let model = LatticeModel { sites: 4, spacing: 1.0, potential: Potential::Delta, coupling: 1.0 };
        let spec = model.spec().unwrap();
        let b = spec.phi2_op();
        let b0 = gp_coupling(&spec, &b, 0.0).unwrap();
        assert!((&b0 - &b).max_abs() < 1e-14);
        let v = bridge_vector();
        let nl = gp_nonlinearity(&b0, &v).unwrap();
        for q in 0..4 {
            assert!((nl[q] - v[q] * v[q].norm_sqr()).norm() < 1e-14);
        }
        let flat = HamiltonianSpec::new(Mat::zeros(4, 4), b.matrix().clone(), 1.0).unwrap();
        assert!((&gp_coupling(&flat, &b, 10.0).unwrap() - &b).max_abs() < 1e-13);
    }
}

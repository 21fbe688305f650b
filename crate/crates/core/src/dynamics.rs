//! Hamiltonians of `n` identical particles and their evolution groups.
//!
//! Time arguments follow the observable convention: `group(S, t, X)` is
//! `e^{itH} X e^{-itH}` on the labels `S`, so the state evolution is
//! `group(S, -t, X)`.

use crate::combinatorics::LabelSet;
use crate::error::{capacity, Error, Result};
use crate::hilbert::{
    c, conjugate, embed, hermitian_eigen, kron, place, unitary_from_eigen, DenseOperator, Mat, Statistics,
    DEFAULT_MAX_DIM, DEFAULT_MAX_PARTICLES, HERMITIAN_TOL,
};
use nalgebra::SymmetricEigen;
use std::collections::{BTreeMap, HashMap};
use std::sync::{Arc, Mutex};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Picture {
    /// `-i(gH - Hg)`
    Observable,
    /// `-i(Hf - fH)`
    State,
}

#[derive(Clone, Debug, PartialEq)]
pub struct HamiltonianSpec {
    pub d: usize,
    pub kinetic: Mat,
    pub phi2: Mat,
    pub phik: BTreeMap<usize, Mat>,
    pub epsilon: f64,
    pub statistics: Statistics,
    pub max_particles: usize,
}

fn swap_matrix(d: usize) -> Mat {
    crate::hilbert::permutation_operator(&[1, 0], d)
}

impl HamiltonianSpec {
    pub fn new(kinetic: Mat, phi2: Mat, epsilon: f64) -> Result<Self> {
        let d = kinetic.nrows();
        let spec = Self {
            d,
            kinetic,
            phi2,
            phik: BTreeMap::new(),
            epsilon,
            statistics: Statistics::MaxwellBoltzmann,
            max_particles: DEFAULT_MAX_PARTICLES,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// `d = 2`, `K = diag(0, 1)`, `Φ = λ |11><11|`.
    pub fn reference(lambda: f64) -> Self {
        let k = Mat::from_diagonal(&nalgebra::DVector::from_vec(vec![c(0.0), c(1.0)]));
        let mut phi = Mat::zeros(4, 4);
        phi[(3, 3)] = c(lambda);
        Self::new(k, phi, 1.0).expect("reference fixture is valid")
    }

    /// Reference fixture plus a transverse term `κ σ_x` in `K`, so that the
    /// kinetic and interaction parts do not commute.
    pub fn transverse(lambda: f64, kappa: f64) -> Self {
        let mut s = Self::reference(lambda);
        s.kinetic[(0, 1)] = c(kappa);
        s.kinetic[(1, 0)] = c(kappa);
        s
    }

    pub fn with_epsilon(&self, epsilon: f64) -> Self {
        Self { epsilon, ..self.clone() }
    }

    pub fn with_phi_scale(&self, factor: f64) -> Self {
        let mut s = self.clone();
        s.phi2 *= c(factor);
        for m in s.phik.values_mut() {
            *m *= c(factor);
        }
        s
    }

    pub fn without_interaction(&self) -> Self {
        self.with_phi_scale(0.0)
    }

    pub fn validate(&self) -> Result<()> {
        capacity("one-particle dimension", DEFAULT_MAX_DIM, self.d)?;
        if self.kinetic.nrows() != self.d || self.kinetic.ncols() != self.d {
            return Err(Error::Dimension("kinetic part must be d x d".into()));
        }
        if self.phi2.nrows() != self.d * self.d || self.phi2.ncols() != self.d * self.d {
            return Err(Error::Dimension("pair potential must be d^2 x d^2".into()));
        }
        let dev = |m: &Mat| (m - m.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max);
        let worst = dev(&self.kinetic).max(dev(&self.phi2));
        if worst > HERMITIAN_TOL {
            return Err(Error::NotHermitian(worst));
        }
        let sw = swap_matrix(self.d);
        let swap_dev = (&sw * &self.phi2 * sw.adjoint() - &self.phi2).iter().map(|z| z.norm()).fold(0.0, f64::max);
        if swap_dev > HERMITIAN_TOL {
            return Err(Error::Argument(format!("pair potential not swap symmetric ({swap_dev:.2e})")));
        }
        for (&k, m) in &self.phik {
            let dim = self.d.pow(k as u32);
            if k < 3 || m.nrows() != dim || m.ncols() != dim {
                return Err(Error::Dimension(format!("{k}-body potential must be d^{k} square, k >= 3")));
            }
            let op = DenseOperator::new(k, self.d, m.clone())?;
            if op.hermitian_deviation() > HERMITIAN_TOL {
                return Err(Error::NotHermitian(op.hermitian_deviation()));
            }
            if crate::hilbert::symmetry_deviation(&op) > HERMITIAN_TOL {
                return Err(Error::Argument(format!("{k}-body potential not symmetric")));
            }
        }
        if !(self.epsilon > 0.0) {
            return Err(Error::Argument("epsilon must be positive".into()));
        }
        Ok(())
    }

    pub fn kinetic_op(&self) -> DenseOperator {
        DenseOperator::new(1, self.d, self.kinetic.clone()).expect("validated")
    }

    pub fn phi2_op(&self) -> DenseOperator {
        DenseOperator::new(2, self.d, self.phi2.clone()).expect("validated")
    }

    pub fn is_interacting(&self) -> bool {
        self.phi2.iter().any(|z| z.norm() > 0.0) || self.phik.values().any(|m| m.iter().any(|z| z.norm() > 0.0))
    }
}

fn label_subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = Vec::new();
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for l in start..=n {
            cur.push(l);
            rec(l + 1, n, k, cur, out);
            cur.pop();
        }
    }
    rec(1, n, k, &mut cur, &mut out);
    out
}

pub fn build_hamiltonian(spec: &HamiltonianSpec, n: usize) -> Result<DenseOperator> {
    capacity("particle number", spec.max_particles, n)?;
    let d = spec.d;
    let mut h = DenseOperator::zeros(n, d);
    let k = spec.kinetic_op();
    for i in 1..=n {
        h += &embed(&k, &[i], n)?;
    }
    if n >= 2 {
        let phi = spec.phi2_op().scale_re(spec.epsilon);
        for p in label_subsets(n, 2) {
            h += &embed(&phi, &p, n)?;
        }
    }
    for (&kb, m) in &spec.phik {
        if kb > n {
            continue;
        }
        let op = DenseOperator::new(kb, d, m.clone())?.scale_re(spec.epsilon.powi(kb as i32 - 1));
        for p in label_subsets(n, kb) {
            h += &embed(&op, &p, n)?;
        }
    }
    Ok(h)
}

type Eigen = SymmetricEigen<crate::hilbert::C64, nalgebra::Dyn>;

const UNITARY_CACHE_LIMIT: usize = 4096;

#[derive(Clone, Copy, PartialEq, Eq, Hash)]
enum Kind {
    Full,
    Free,
    Scattering,
}

/// A Hamiltonian family with cached spectral data and evolution unitaries.
#[derive(Clone)]
pub struct System {
    spec: Arc<HamiltonianSpec>,
    eigen: Arc<Mutex<HashMap<usize, Arc<Eigen>>>>,
    unitaries: Arc<Mutex<HashMap<(Kind, usize, u64), Arc<Mat>>>>,
    hamiltonians: Arc<Mutex<HashMap<usize, Arc<DenseOperator>>>>,
}

impl std::fmt::Debug for System {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("System").field("spec", &self.spec).finish()
    }
}

impl System {
    pub fn new(spec: HamiltonianSpec) -> Result<Self> {
        spec.validate()?;
        Ok(Self {
            spec: Arc::new(spec),
            eigen: Default::default(),
            unitaries: Default::default(),
            hamiltonians: Default::default(),
        })
    }

    pub fn spec(&self) -> &HamiltonianSpec {
        &self.spec
    }

    pub fn d(&self) -> usize {
        self.spec.d
    }

    pub fn hamiltonian(&self, n: usize) -> Result<Arc<DenseOperator>> {
        if let Some(h) = self.hamiltonians.lock().expect("cache lock").get(&n) {
            return Ok(h.clone());
        }
        let h = Arc::new(build_hamiltonian(&self.spec, n)?);
        self.hamiltonians.lock().expect("cache lock").insert(n, h.clone());
        Ok(h)
    }

    fn eigen(&self, n: usize) -> Result<Arc<Eigen>> {
        if let Some(e) = self.eigen.lock().expect("cache lock").get(&n) {
            return Ok(e.clone());
        }
        let h = self.hamiltonian(n)?;
        let e = Arc::new(hermitian_eigen(h.matrix()));
        self.eigen.lock().expect("cache lock").insert(n, e.clone());
        Ok(e)
    }

    fn cached(&self, kind: Kind, k: usize, tau: f64, build: impl FnOnce() -> Result<Mat>) -> Result<Arc<Mat>> {
        let key = (kind, k, tau.to_bits());
        if let Some(u) = self.unitaries.lock().expect("cache lock").get(&key) {
            return Ok(u.clone());
        }
        let u = Arc::new(build()?);
        let mut cache = self.unitaries.lock().expect("cache lock");
        if cache.len() >= UNITARY_CACHE_LIMIT {
            cache.clear();
        }
        cache.insert(key, u.clone());
        Ok(u)
    }

    /// `e^{-iτH_k}` on canonical labels `1..k`.
    pub fn unitary(&self, k: usize, tau: f64) -> Result<Arc<Mat>> {
        if k == 0 {
            return Ok(Arc::new(Mat::identity(1, 1)));
        }
        self.cached(Kind::Full, k, tau, || Ok(unitary_from_eigen(&*self.eigen(k)?, tau)))
    }

    /// `⊗ e^{-iτK}` on `k` particles.
    pub fn free_unitary(&self, k: usize, tau: f64) -> Result<Arc<Mat>> {
        self.cached(Kind::Free, k, tau, || {
            let u1 = unitary_from_eigen(&*self.eigen(1)?, tau);
            Ok((0..k).fold(Mat::identity(1, 1), |acc, _| kron(&acc, &u1)))
        })
    }

    /// Conjugating matrix of the scattering operator at time `t`:
    /// `e^{-itH_k} e^{itK_k}`.
    pub fn scattering_unitary(&self, k: usize, t: f64) -> Result<Arc<Mat>> {
        self.cached(Kind::Scattering, k, t, || {
            Ok(&*self.unitary(k, t)? * &*self.free_unitary(k, -t)?)
        })
    }

    fn op(&self, k: usize, m: &Mat) -> DenseOperator {
        DenseOperator::from_parts(k, self.spec.d, m.clone())
    }

    /// Embedded conjugating matrix for a block: full group at observable
    /// time `t` is conjugation by `e^{itH}`.
    pub fn block_matrix(&self, labels: &[usize], t: f64, flavor: GroupFlavor) -> Result<DenseOperator> {
        let k = labels.len();
        let m = match flavor {
            GroupFlavor::Full => self.unitary(k, -t)?,
            GroupFlavor::Free => self.free_unitary(k, -t)?,
            GroupFlavor::Scattering => self.scattering_unitary(k, t)?,
        };
        Ok(self.op(k, &m))
    }

    /// Conjugating matrix on `n` particles for a product over disjoint blocks.
    pub fn product_matrix(&self, blocks: &[&[usize]], t: f64, flavor: GroupFlavor, n: usize) -> Result<Mat> {
        let ops: Vec<DenseOperator> =
            blocks.iter().map(|b| self.block_matrix(b, t, flavor)).collect::<Result<_>>()?;
        let parts: Vec<(&DenseOperator, &[usize])> = ops.iter().zip(blocks.iter()).map(|(o, b)| (o, *b)).collect();
        Ok(place(&parts, n, self.spec.d)?.into_matrix())
    }

    fn apply(&self, labels: &[usize], t: f64, flavor: GroupFlavor, x: &DenseOperator) -> Result<DenseOperator> {
        if labels.is_empty() {
            return Ok(x.clone());
        }
        let w = self.product_matrix(&[labels], t, flavor, x.n_particles())?;
        Ok(DenseOperator::from_parts(x.n_particles(), x.one_particle_dim(), conjugate(&w, x.matrix())))
    }

    /// `𝒢_{|S|}(t, S) x = e^{itH_S} x e^{-itH_S}`.
    pub fn group(&self, labels: &[usize], t: f64, x: &DenseOperator) -> Result<DenseOperator> {
        self.apply(labels, t, GroupFlavor::Full, x)
    }

    /// `Π_{i∈S} 𝒢_1(t, i) x`.
    pub fn free_group(&self, labels: &[usize], t: f64, x: &DenseOperator) -> Result<DenseOperator> {
        self.apply(labels, t, GroupFlavor::Free, x)
    }

    /// `Ĝ(t, S) x = 𝒢(-t, S) Π_{i∈S} 𝒢_1(t, i) x`.
    pub fn scattering(&self, labels: &[usize], t: f64, x: &DenseOperator) -> Result<DenseOperator> {
        self.apply(labels, t, GroupFlavor::Scattering, x)
    }

    /// Interaction energy among the listed labels, embedded in `n` particles.
    pub fn interaction(&self, labels: &[usize], n: usize) -> Result<DenseOperator> {
        let d = self.spec.d;
        match labels.len() {
            0 | 1 => Ok(DenseOperator::zeros(n, d)),
            2 => embed(&self.spec.phi2_op().scale_re(self.spec.epsilon), labels, n),
            k => match self.spec.phik.get(&k) {
                Some(m) => embed(
                    &DenseOperator::new(k, d, m.clone())?.scale_re(self.spec.epsilon.powi(k as i32 - 1)),
                    labels,
                    n,
                ),
                None => Ok(DenseOperator::zeros(n, d)),
            },
        }
    }

    pub fn generator_n(&self, x: &DenseOperator, picture: Picture) -> Result<DenseOperator> {
        let h = self.hamiltonian(x.n_particles())?;
        Ok(commutator_generator(&h, x, picture))
    }

    /// Interaction-only generator for the potential spanning the union of
    /// the listed label sets.
    pub fn generator_nint(&self, clusters: &[LabelSet], x: &DenseOperator, picture: Picture) -> Result<DenseOperator> {
        let all = clusters.iter().fold(LabelSet::empty(), |acc, s| acc.union(s));
        if all.max_label().is_some_and(|m| m > x.n_particles()) {
            return Err(Error::Label(format!("labels {:?} exceed {} particles", all.labels(), x.n_particles())));
        }
        let v = self.interaction(all.labels(), x.n_particles())?;
        Ok(commutator_generator(&v, x, picture))
    }

    /// `(-𝒩_int(i, j)) f = -i[Φ_ij, f]`, the state-picture pair generator.
    pub fn nint_state(&self, i: usize, j: usize, f: &DenseOperator) -> Result<DenseOperator> {
        let v = self.interaction(&[i, j], f.n_particles())?;
        Ok(commutator_generator(&v, f, Picture::State))
    }

    /// `𝒩_int(i, j) g = -i[g, Φ_ij]`, the observable-picture pair generator.
    pub fn nint_observable(&self, i: usize, j: usize, g: &DenseOperator) -> Result<DenseOperator> {
        let v = self.interaction(&[i, j], g.n_particles())?;
        Ok(commutator_generator(&v, g, Picture::Observable))
    }

    /// Scattering operator on all `n` particles as a map.
    pub fn scattering_operator(&self, n: usize, t: f64) -> impl Fn(&DenseOperator) -> Result<DenseOperator> + '_ {
        let labels: Vec<usize> = (1..=n).collect();
        move |x| self.scattering(&labels, t, x)
    }

    pub fn heisenberg_group(&self, t: f64, x: &DenseOperator) -> Result<DenseOperator> {
        let labels: Vec<usize> = (1..=x.n_particles()).collect();
        self.group(&labels, t, x)
    }

    pub fn vonneumann_group(&self, t: f64, f: &DenseOperator) -> Result<DenseOperator> {
        let labels: Vec<usize> = (1..=f.n_particles()).collect();
        self.group(&labels, -t, f)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum GroupFlavor {
    Full,
    Free,
    Scattering,
}

pub fn commutator_generator(h: &DenseOperator, x: &DenseOperator, picture: Picture) -> DenseOperator {
    let minus_i = crate::hilbert::C64::new(0.0, -1.0);
    match picture {
        Picture::Observable => x.commutator(h).scale(minus_i),
        Picture::State => h.commutator(x).scale(minus_i),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::tensor;
    use crate::random::{random_hermitian, rng};
    use approx::assert_abs_diff_eq;

    #[test]
    fn hamiltonian_examples() {
        let spec = HamiltonianSpec::reference(0.7);
        assert_eq!(build_hamiltonian(&spec, 1).unwrap(), spec.kinetic_op());
        let free = spec.without_interaction();
        let k = spec.kinetic_op();
        let i = DenseOperator::identity(1, 2);
        let expect = &tensor(&k, &i).unwrap() + &tensor(&i, &k).unwrap();
        assert_eq!(build_hamiltonian(&free, 2).unwrap(), expect);
    }

    #[test]
    fn epsilon_linearity() {
        let spec = HamiltonianSpec::transverse(0.7, 0.3);
        let h1 = build_hamiltonian(&spec.with_epsilon(1.0), 3).unwrap();
        let h2 = build_hamiltonian(&spec.with_epsilon(2.0), 3).unwrap();
        let h0 = build_hamiltonian(&spec.without_interaction(), 3).unwrap();
        let lin = &(&h1 - &h0).scale_re(2.0) + &h0;
        assert_abs_diff_eq!((&h2 - &lin).max_abs(), 0.0, epsilon = 1e-13);
    }

    #[test]
    fn invalid_specs() {
        let mut s = HamiltonianSpec::reference(1.0);
        s.phi2[(0, 1)] = c(1.0);
        assert!(s.validate().is_err());
        let mut s = HamiltonianSpec::reference(1.0);
        s.epsilon = 0.0;
        assert!(s.validate().is_err());
    }

    #[test]
    fn group_identity_at_zero_and_invariants() {
        let sys = System::new(HamiltonianSpec::transverse(0.9, 0.4)).unwrap();
        let mut r = rng(3);
        let x = random_hermitian(2, 2, &mut r);
        assert_abs_diff_eq!((&sys.heisenberg_group(0.0, &x).unwrap() - &x).max_abs(), 0.0, epsilon = 1e-15);
        let h = sys.hamiltonian(2).unwrap();
        assert_abs_diff_eq!((&sys.heisenberg_group(1.3, &h).unwrap() - &h).max_abs(), 0.0, epsilon = 1e-12);
        let gen = sys.generator_n(&h, Picture::State).unwrap();
        assert_abs_diff_eq!(gen.max_abs(), 0.0, epsilon = 1e-12);
        let idg = sys.generator_n(&DenseOperator::identity(2, 2), Picture::Observable).unwrap();
        assert_abs_diff_eq!(idg.max_abs(), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn generator_pictures_are_opposite() {
        let sys = System::new(HamiltonianSpec::transverse(0.9, 0.4)).unwrap();
        let x = random_hermitian(2, 2, &mut rng(5));
        let a = sys.generator_n(&x, Picture::Observable).unwrap();
        let b = sys.generator_n(&x, Picture::State).unwrap();
        assert_abs_diff_eq!((&a + &b).max_abs(), 0.0, epsilon = 1e-14);
    }

    #[test]
    fn nint_is_total_minus_kinetic() {
        let sys = System::new(HamiltonianSpec::transverse(0.9, 0.4)).unwrap();
        let x = random_hermitian(2, 2, &mut rng(6));
        let full = sys.generator_n(&x, Picture::State).unwrap();
        let free = System::new(sys.spec().without_interaction()).unwrap();
        let kin = free.generator_n(&x, Picture::State).unwrap();
        let pair = [LabelSet::new(vec![1]).unwrap(), LabelSet::new(vec![2]).unwrap()];
        let nint = sys.generator_nint(&pair, &x, Picture::State).unwrap();
        assert_abs_diff_eq!((&(&full - &kin) - &nint).max_abs(), 0.0, epsilon = 1e-13);
        let zero = free.generator_nint(&pair, &x, Picture::State).unwrap();
        assert_eq!(zero.max_abs(), 0.0);
        assert!(nint.is_hermitian(1e-12));
    }

    #[test]
    fn scattering_free_and_zero_time() {
        let spec = HamiltonianSpec::transverse(0.9, 0.4);
        let free = System::new(spec.without_interaction()).unwrap();
        let x = random_hermitian(3, 2, &mut rng(7));
        let y = free.scattering(&[1, 2, 3], 0.8, &x).unwrap();
        assert_abs_diff_eq!((&y - &x).max_abs(), 0.0, epsilon = 1e-13);
        let sys = System::new(spec).unwrap();
        let y0 = sys.scattering(&[1, 2, 3], 0.0, &x).unwrap();
        assert_abs_diff_eq!((&y0 - &x).max_abs(), 0.0, epsilon = 1e-14);
    }

    #[test]
    fn scattering_generator_limit() {
        let sys = System::new(HamiltonianSpec::transverse(0.9, 0.4)).unwrap();
        let f = random_hermitian(2, 2, &mut rng(8));
        let expect = sys.nint_state(1, 2, &f).unwrap();
        let mut errs = Vec::new();
        for t in [1e-2, 1e-3] {
            let g = sys.scattering(&[1, 2], t, &f).unwrap();
            errs.push((&(&g - &f).scale_re(1.0 / t) - &expect).max_abs());
        }
        assert!(errs[1] < errs[0] / 5.0, "{errs:?}");
    }
}

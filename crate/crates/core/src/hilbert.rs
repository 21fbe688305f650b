//! Dense operators on tensor powers of a finite one-particle space.
//!
//! Particle `1` is the leftmost Kronecker factor. Labels in the public API are
//! one-based; factor positions inside this module are zero-based.

use crate::combinatorics::LabelSet;
use crate::error::{capacity, Error, Result};
use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::ops::{Add, AddAssign, Mul, Neg, Sub, SubAssign};

pub type C64 = Complex64;
pub type Mat = DMatrix<C64>;

pub const HERMITIAN_TOL: f64 = 1e-10;
pub const DEFAULT_MAX_DIM: usize = 4;
pub const DEFAULT_MAX_PARTICLES: usize = 6;
pub const MAX_SYMMETRIZER: usize = 6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
pub enum Statistics {
    #[default]
    MaxwellBoltzmann,
    Bose,
    Fermi,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    /// `e^{itH} X e^{-itH}`
    Forward,
    /// `e^{-itH} X e^{itH}`
    Backward,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DenseOperator {
    n: usize,
    d: usize,
    m: Mat,
}

pub fn c(re: f64) -> C64 {
    C64::new(re, 0.0)
}

impl DenseOperator {
    pub fn new(n: usize, d: usize, m: Mat) -> Result<Self> {
        let dim = d.pow(n as u32);
        if m.nrows() != dim || m.ncols() != dim {
            return Err(Error::Dimension(format!(
                "{}x{} matrix for {n} particles of dimension {d}",
                m.nrows(),
                m.ncols()
            )));
        }
        Ok(Self { n, d, m })
    }

    pub(crate) fn from_parts(n: usize, d: usize, m: Mat) -> Self {
        debug_assert_eq!(m.nrows(), d.pow(n as u32));
        Self { n, d, m }
    }

    pub fn identity(n: usize, d: usize) -> Self {
        let dim = d.pow(n as u32);
        Self { n, d, m: Mat::identity(dim, dim) }
    }

    pub fn zeros(n: usize, d: usize) -> Self {
        let dim = d.pow(n as u32);
        Self { n, d, m: Mat::zeros(dim, dim) }
    }

    pub fn n_particles(&self) -> usize {
        self.n
    }

    pub fn one_particle_dim(&self) -> usize {
        self.d
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn matrix(&self) -> &Mat {
        &self.m
    }

    pub fn into_matrix(self) -> Mat {
        self.m
    }

    pub fn scale(&self, z: C64) -> Self {
        Self { n: self.n, d: self.d, m: &self.m * z }
    }

    pub fn scale_re(&self, x: f64) -> Self {
        self.scale(c(x))
    }

    pub fn adjoint(&self) -> Self {
        Self { n: self.n, d: self.d, m: self.m.adjoint() }
    }

    pub fn trace(&self) -> C64 {
        self.m.trace()
    }

    pub fn hermitian_deviation(&self) -> f64 {
        (&self.m - self.m.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.hermitian_deviation() <= tol
    }

    pub fn hermitian_part(&self) -> Self {
        Self { n: self.n, d: self.d, m: (&self.m + self.m.adjoint()) * c(0.5) }
    }

    /// Eigenvalues of the hermitian part, ascending.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let h = self.hermitian_part().m;
        let mut v: Vec<f64> = SymmetricEigen::new(h).eigenvalues.iter().copied().collect();
        v.sort_by(|a, b| a.total_cmp(b));
        v
    }

    pub fn is_positive(&self, tol: f64) -> bool {
        self.is_hermitian(tol) && self.eigenvalues().first().map_or(true, |&e| e >= -tol)
    }

    pub fn is_trace_one(&self, tol: f64) -> bool {
        (self.trace() - c(1.0)).norm() <= tol
    }

    fn singular_values(&self) -> Vec<f64> {
        if self.dim() == 0 {
            return Vec::new();
        }
        self.m.clone().svd(false, false).singular_values.iter().copied().collect()
    }

    pub fn trace_norm(&self) -> f64 {
        self.singular_values().iter().sum()
    }

    pub fn operator_norm(&self) -> f64 {
        self.singular_values().iter().copied().fold(0.0, f64::max)
    }

    /// Largest entry modulus; cheap residual measure.
    pub fn max_abs(&self) -> f64 {
        self.m.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn same_space(&self, other: &Self) -> Result<()> {
        if self.n != other.n || self.d != other.d {
            return Err(Error::Dimension(format!(
                "({} particles, d={}) vs ({} particles, d={})",
                self.n, self.d, other.n, other.d
            )));
        }
        Ok(())
    }

    pub fn commutator(&self, other: &Self) -> Self {
        Self { n: self.n, d: self.d, m: &self.m * &other.m - &other.m * &self.m }
    }

    pub fn to_json(&self) -> OperatorJson {
        OperatorJson {
            n_particles: self.n,
            one_particle_dim: self.d,
            entries: (0..self.dim())
                .flat_map(|i| (0..self.dim()).map(move |j| (i, j)))
                .map(|(i, j)| [self.m[(i, j)].re, self.m[(i, j)].im])
                .collect(),
        }
    }

    pub fn from_json(j: &OperatorJson) -> Result<Self> {
        let dim = j.one_particle_dim.pow(j.n_particles as u32);
        if j.entries.len() != dim * dim {
            return Err(Error::Dimension(format!("{} entries for dimension {dim}", j.entries.len())));
        }
        let m = Mat::from_row_iterator(dim, dim, j.entries.iter().map(|e| C64::new(e[0], e[1])));
        Self::new(j.n_particles, j.one_particle_dim, m)
    }
}

/// Row-major list of `[re, im]` pairs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OperatorJson {
    pub n_particles: usize,
    pub one_particle_dim: usize,
    pub entries: Vec<[f64; 2]>,
}

impl Add for &DenseOperator {
    type Output = DenseOperator;
    fn add(self, rhs: &DenseOperator) -> DenseOperator {
        debug_assert!(self.same_space(rhs).is_ok());
        DenseOperator { n: self.n, d: self.d, m: &self.m + &rhs.m }
    }
}

impl Sub for &DenseOperator {
    type Output = DenseOperator;
    fn sub(self, rhs: &DenseOperator) -> DenseOperator {
        debug_assert!(self.same_space(rhs).is_ok());
        DenseOperator { n: self.n, d: self.d, m: &self.m - &rhs.m }
    }
}

impl Mul for &DenseOperator {
    type Output = DenseOperator;
    fn mul(self, rhs: &DenseOperator) -> DenseOperator {
        debug_assert!(self.same_space(rhs).is_ok());
        DenseOperator { n: self.n, d: self.d, m: &self.m * &rhs.m }
    }
}

impl Neg for &DenseOperator {
    type Output = DenseOperator;
    fn neg(self) -> DenseOperator {
        DenseOperator { n: self.n, d: self.d, m: -&self.m }
    }
}

impl AddAssign<&DenseOperator> for DenseOperator {
    fn add_assign(&mut self, rhs: &DenseOperator) {
        debug_assert!(self.same_space(rhs).is_ok());
        self.m += &rhs.m;
    }
}

impl SubAssign<&DenseOperator> for DenseOperator {
    fn sub_assign(&mut self, rhs: &DenseOperator) {
        debug_assert!(self.same_space(rhs).is_ok());
        self.m -= &rhs.m;
    }
}

/// Compensated running sum of operators on one space.
#[derive(Clone, Debug)]
pub struct KahanSum {
    n: usize,
    d: usize,
    sum: Mat,
    comp: Mat,
    terms: usize,
}

impl KahanSum {
    pub fn new(n: usize, d: usize) -> Self {
        let dim = d.pow(n as u32);
        Self { n, d, sum: Mat::zeros(dim, dim), comp: Mat::zeros(dim, dim), terms: 0 }
    }

    pub fn add_matrix(&mut self, x: &Mat, weight: f64) {
        self.terms += 1;
        for ((s, c), v) in self.sum.iter_mut().zip(self.comp.iter_mut()).zip(x.iter()) {
            let y = v * weight - *c;
            let t = *s + y;
            *c = (t - *s) - y;
            *s = t;
        }
    }

    pub fn add(&mut self, x: &DenseOperator, weight: f64) {
        debug_assert_eq!((x.n, x.d), (self.n, self.d));
        self.add_matrix(&x.m, weight);
    }

    pub fn terms(&self) -> usize {
        self.terms
    }

    pub fn finish(self) -> DenseOperator {
        DenseOperator { n: self.n, d: self.d, m: self.sum }
    }
}

pub fn kron(a: &Mat, b: &Mat) -> Mat {
    a.kronecker(b)
}

pub fn tensor(a: &DenseOperator, b: &DenseOperator) -> Result<DenseOperator> {
    if a.d != b.d {
        return Err(Error::Dimension(format!("tensor of d={} and d={}", a.d, b.d)));
    }
    Ok(DenseOperator { n: a.n + b.n, d: a.d, m: kron(&a.m, &b.m) })
}

fn digits(mut idx: usize, n: usize, d: usize) -> Vec<usize> {
    let mut v = vec![0; n];
    for k in (0..n).rev() {
        v[k] = idx % d;
        idx /= d;
    }
    v
}

/// Index map sending input basis index to output basis index when factor `j`
/// moves to position `order[j]`.
fn permutation_map(order: &[usize], d: usize) -> Vec<usize> {
    let n = order.len();
    let dim = d.pow(n as u32);
    let weights: Vec<usize> = (0..n).map(|p| d.pow((n - 1 - p) as u32)).collect();
    (0..dim)
        .map(|i| {
            digits(i, n, d)
                .iter()
                .enumerate()
                .map(|(j, &dj)| dj * weights[order[j]])
                .sum()
        })
        .collect()
}

fn check_order(order: &[usize]) -> Result<()> {
    let mut seen = vec![false; order.len()];
    for &o in order {
        if o >= order.len() || seen[o] {
            return Err(Error::Label(format!("{order:?} is not a permutation")));
        }
        seen[o] = true;
    }
    Ok(())
}

/// Reorders tensor factors: factor `j` of `a` becomes factor `order[j]`.
pub fn permute_factors(a: &DenseOperator, order: &[usize]) -> Result<DenseOperator> {
    if order.len() != a.n {
        return Err(Error::Label(format!("order of length {} for {} particles", order.len(), a.n)));
    }
    check_order(order)?;
    if order.iter().enumerate().all(|(j, &o)| j == o) {
        return Ok(a.clone());
    }
    let p = permutation_map(order, a.d);
    let dim = a.dim();
    let mut m = Mat::zeros(dim, dim);
    for j in 0..dim {
        for i in 0..dim {
            m[(p[i], p[j])] = a.m[(i, j)];
        }
    }
    Ok(DenseOperator { n: a.n, d: a.d, m })
}

/// Places `op` (factors in the order of `positions`) on the listed one-based
/// labels of an `n`-particle space, identity elsewhere.
pub fn embed(op: &DenseOperator, positions: &[usize], n: usize) -> Result<DenseOperator> {
    place(&[(op, positions)], n, op.d)
}

/// Tensor product of operators on disjoint label lists inside an
/// `n`-particle space, identity on the remaining labels.
pub fn place(parts: &[(&DenseOperator, &[usize])], n: usize, d: usize) -> Result<DenseOperator> {
    let mut used = vec![false; n];
    let mut order = Vec::with_capacity(n);
    let mut m = Mat::identity(1, 1);
    for (op, pos) in parts {
        if op.d != d || op.n != pos.len() {
            return Err(Error::Dimension(format!(
                "operator on {} particles (d={}) placed on {} labels (d={d})",
                op.n,
                op.d,
                pos.len()
            )));
        }
        for &l in pos.iter() {
            if l == 0 || l > n || used[l - 1] {
                return Err(Error::Label(format!("label {l} invalid or repeated in {n}-particle space")));
            }
            used[l - 1] = true;
            order.push(l - 1);
        }
        m = kron(&m, &op.m);
    }
    let rest: Vec<usize> = (0..n).filter(|&i| !used[i]).collect();
    if !rest.is_empty() {
        let dr = d.pow(rest.len() as u32);
        m = kron(&m, &Mat::identity(dr, dr));
        order.extend(rest);
    }
    permute_factors(&DenseOperator { n, d, m }, &order)
}

/// Partial trace keeping the listed one-based labels (result factors in
/// increasing label order).
pub fn partial_trace(a: &DenseOperator, keep: &LabelSet) -> Result<DenseOperator> {
    if keep.max_label().is_some_and(|m| m > a.n) || keep.min_label() == Some(0) {
        return Err(Error::Label(format!("keep {:?} outside {} particles", keep.labels(), a.n)));
    }
    let k = keep.len();
    if k == a.n {
        return Ok(a.clone());
    }
    // move kept factors to the front
    let mut order = vec![0; a.n];
    let mut next_keep = 0;
    let mut next_rest = k;
    for (l, slot) in order.iter_mut().enumerate() {
        if keep.contains(l + 1) {
            *slot = next_keep;
            next_keep += 1;
        } else {
            *slot = next_rest;
            next_rest += 1;
        }
    }
    let p = permute_factors(a, &order)?;
    let dk = a.d.pow(k as u32);
    let dr = a.d.pow((a.n - k) as u32);
    let mut m = Mat::zeros(dk, dk);
    for j in 0..dk {
        for i in 0..dk {
            let mut s = C64::new(0.0, 0.0);
            for r in 0..dr {
                s += p.m[(i * dr + r, j * dr + r)];
            }
            m[(i, j)] = s;
        }
    }
    Ok(DenseOperator { n: k, d: a.d, m })
}

/// Trace over the last `count` particles.
pub fn trace_tail(a: &DenseOperator, count: usize) -> DenseOperator {
    if count == 0 {
        return a.clone();
    }
    let k = a.n - count;
    let dk = a.d.pow(k as u32);
    let dr = a.d.pow(count as u32);
    let mut m = Mat::zeros(dk, dk);
    for j in 0..dk {
        for i in 0..dk {
            let mut s = C64::new(0.0, 0.0);
            for r in 0..dr {
                s += a.m[(i * dr + r, j * dr + r)];
            }
            m[(i, j)] = s;
        }
    }
    DenseOperator { n: k, d: a.d, m }
}

/// `e^{-iτH}` for hermitian `H` via eigendecomposition.
pub fn unitary_from_eigen(eig: &SymmetricEigen<C64, nalgebra::Dyn>, tau: f64) -> Mat {
    let v = &eig.eigenvectors;
    let phases = Mat::from_diagonal(&eig.eigenvalues.map(|l| C64::from_polar(1.0, -tau * l)));
    v * phases * v.adjoint()
}

pub fn hermitian_eigen(h: &Mat) -> SymmetricEigen<C64, nalgebra::Dyn> {
    SymmetricEigen::new(h.clone())
}

/// `W X W†`.
pub fn conjugate(w: &Mat, x: &Mat) -> Mat {
    w * x * w.adjoint()
}

pub fn conjugate_by_group(
    h: &DenseOperator,
    t: f64,
    x: &DenseOperator,
    direction: Direction,
) -> Result<DenseOperator> {
    h.same_space(x)?;
    let dev = h.hermitian_deviation();
    if dev > HERMITIAN_TOL {
        return Err(Error::NotHermitian(dev));
    }
    let eig = hermitian_eigen(&h.m);
    // backward: U X U† with U = e^{-itH}; forward uses U(-t)
    let tau = match direction {
        Direction::Forward => -t,
        Direction::Backward => t,
    };
    let u = unitary_from_eigen(&eig, tau);
    Ok(DenseOperator { n: x.n, d: x.d, m: conjugate(&u, &x.m) })
}

/// Permutations of `0..n` with their signs.
pub fn permutations(n: usize) -> Vec<(Vec<usize>, i32)> {
    fn rec(cur: &mut Vec<usize>, left: &mut Vec<usize>, out: &mut Vec<(Vec<usize>, i32)>) {
        if left.is_empty() {
            let mut inv = 0;
            for i in 0..cur.len() {
                for j in i + 1..cur.len() {
                    if cur[i] > cur[j] {
                        inv += 1;
                    }
                }
            }
            out.push((cur.clone(), if inv % 2 == 0 { 1 } else { -1 }));
            return;
        }
        for k in 0..left.len() {
            let x = left.remove(k);
            cur.push(x);
            rec(cur, left, out);
            cur.pop();
            left.insert(k, x);
        }
    }
    let mut out = Vec::new();
    rec(&mut Vec::new(), &mut (0..n).collect(), &mut out);
    out
}

/// Unitary permuting tensor factors: factor `j` goes to `order[j]`.
pub fn permutation_operator(order: &[usize], d: usize) -> Mat {
    let p = permutation_map(order, d);
    let dim = p.len();
    let mut m = Mat::zeros(dim, dim);
    for (i, &pi) in p.iter().enumerate() {
        m[(pi, i)] = c(1.0);
    }
    m
}

pub fn symmetrizer(n: usize, d: usize, stat: Statistics) -> Result<DenseOperator> {
    capacity("symmetrizer particles", MAX_SYMMETRIZER, n)?;
    let dim = d.pow(n as u32);
    if stat == Statistics::MaxwellBoltzmann {
        return Ok(DenseOperator::identity(n, d));
    }
    let perms = permutations(n);
    let mut m = Mat::zeros(dim, dim);
    for (p, sign) in &perms {
        let s = if stat == Statistics::Fermi { *sign as f64 } else { 1.0 };
        m += permutation_operator(p, d) * c(s);
    }
    m /= c(perms.len() as f64);
    Ok(DenseOperator { n, d, m })
}

/// Average of `P X P†` over all factor permutations.
pub fn symmetrize(x: &DenseOperator) -> DenseOperator {
    let perms = permutations(x.n);
    let mut m = Mat::zeros(x.dim(), x.dim());
    for (p, _) in &perms {
        let pm = permutation_operator(p, x.d);
        m += conjugate(&pm, &x.m);
    }
    m /= c(perms.len() as f64);
    DenseOperator { n: x.n, d: x.d, m }
}

/// Largest deviation of `x` from its relabelings.
pub fn symmetry_deviation(x: &DenseOperator) -> f64 {
    (&symmetrize(x) - x).max_abs()
}

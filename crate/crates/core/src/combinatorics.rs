//! Set partitions, subsets and dissections of small label sets, with the
//! integer weights used by cumulant and cluster expansions.

use crate::error::{capacity, Error, Result};
use serde::{Deserialize, Serialize};

pub const MAX_PARTITION_GROUND: usize = 12;
pub const MAX_SUBSET_GROUND: usize = 20;
pub const MAX_DISSECTION_GROUND: usize = 10;
pub const MAX_STIRLING: usize = 30;

/// Strictly increasing list of particle labels.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct LabelSet(Vec<usize>);

impl LabelSet {
    pub fn new(mut labels: Vec<usize>) -> Result<Self> {
        labels.sort_unstable();
        if labels.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Label(format!("repeated label in {labels:?}")));
        }
        Ok(Self(labels))
    }

    pub fn empty() -> Self {
        Self(Vec::new())
    }

    /// Labels `lo..=hi`; empty when `hi < lo`.
    pub fn range(lo: usize, hi: usize) -> Self {
        Self((lo..=hi).collect())
    }

    pub fn labels(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, l: usize) -> bool {
        self.0.binary_search(&l).is_ok()
    }

    pub fn union(&self, other: &LabelSet) -> LabelSet {
        let mut v: Vec<usize> = self.0.iter().chain(other.0.iter()).copied().collect();
        v.sort_unstable();
        v.dedup();
        LabelSet(v)
    }

    pub fn difference(&self, other: &LabelSet) -> LabelSet {
        LabelSet(self.0.iter().copied().filter(|l| !other.contains(*l)).collect())
    }

    pub fn is_disjoint(&self, other: &LabelSet) -> bool {
        self.0.iter().all(|l| !other.contains(*l))
    }

    pub fn is_subset(&self, other: &LabelSet) -> bool {
        self.0.iter().all(|l| other.contains(*l))
    }

    pub fn max_label(&self) -> Option<usize> {
        self.0.last().copied()
    }

    pub fn min_label(&self) -> Option<usize> {
        self.0.first().copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = &usize> {
        self.0.iter()
    }
}

impl From<&[usize]> for LabelSet {
    fn from(v: &[usize]) -> Self {
        let mut v = v.to_vec();
        v.sort_unstable();
        v.dedup();
        LabelSet(v)
    }
}

/// Partition of a ground set into disjoint nonempty blocks, ordered by their
/// smallest elements.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Partition {
    pub blocks: Vec<LabelSet>,
}

impl Partition {
    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }
}

/// Partition of a linearly ordered set, optionally paired with distinct
/// attachment indices (one per block).
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dissection {
    pub blocks: Vec<LabelSet>,
    pub attachment: Option<Vec<usize>>,
}

/// All set partitions of `0..k` as blocks of indices, in restricted-growth
/// order. Blocks come out sorted by smallest element.
pub fn index_partitions(k: usize) -> Vec<Vec<Vec<usize>>> {
    if k == 0 {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    let mut a = vec![0usize; k];
    let mut maxes = vec![0usize; k];
    loop {
        let nb = a.iter().copied().max().unwrap_or(0) + 1;
        let mut blocks = vec![Vec::new(); nb];
        for (i, &b) in a.iter().enumerate() {
            blocks[b].push(i);
        }
        out.push(blocks);
        // next restricted growth string
        let mut i = k - 1;
        loop {
            if i == 0 {
                return out;
            }
            if a[i] <= maxes[i - 1] {
                a[i] += 1;
                let m = maxes[i - 1].max(a[i]);
                maxes[i] = m;
                for j in i + 1..k {
                    a[j] = 0;
                    maxes[j] = m;
                }
                break;
            }
            i -= 1;
        }
    }
}

pub fn enumerate_partitions(ground: &LabelSet) -> Result<Vec<Partition>> {
    capacity("partition ground set", MAX_PARTITION_GROUND, ground.len())?;
    let g = ground.labels();
    Ok(index_partitions(g.len())
        .into_iter()
        .map(|blocks| Partition {
            blocks: blocks
                .into_iter()
                .map(|b| LabelSet(b.into_iter().map(|i| g[i]).collect()))
                .collect(),
        })
        .collect())
}

pub fn enumerate_subsets(ground: &LabelSet, nonempty_only: bool) -> Result<Vec<LabelSet>> {
    capacity("subset ground set", MAX_SUBSET_GROUND, ground.len())?;
    let g = ground.labels();
    let start = usize::from(nonempty_only);
    Ok((start..1usize << g.len())
        .map(|mask| LabelSet((0..g.len()).filter(|i| mask >> i & 1 == 1).map(|i| g[i]).collect()))
        .collect())
}

/// Ordered tuples of `len` distinct indices from `1..=range`.
pub fn injections(len: usize, range: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = Vec::with_capacity(len);
    fn rec(len: usize, range: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == len {
            out.push(cur.clone());
            return;
        }
        for i in 1..=range {
            if !cur.contains(&i) {
                cur.push(i);
                rec(len, range, cur, out);
                cur.pop();
            }
        }
    }
    rec(len, range, &mut cur, &mut out);
    out
}

/// Every map `0..domain -> 0..codomain`, as a vector of images.
pub fn functions(domain: usize, codomain: usize) -> Vec<Vec<usize>> {
    if domain == 0 {
        return vec![Vec::new()];
    }
    if codomain == 0 {
        return Vec::new();
    }
    let total = codomain.pow(domain as u32);
    (0..total)
        .map(|mut c| {
            let mut v = vec![0; domain];
            for slot in v.iter_mut() {
                *slot = c % codomain;
                c /= codomain;
            }
            v
        })
        .collect()
}

pub fn enumerate_dissections(
    ground: &LabelSet,
    max_blocks: usize,
    index_range: Option<usize>,
) -> Result<Vec<Dissection>> {
    capacity("dissection ground set", MAX_DISSECTION_GROUND, ground.len())?;
    if max_blocks == 0 {
        return Err(Error::Argument("max_blocks must be at least 1".into()));
    }
    let mut out = Vec::new();
    for p in enumerate_partitions(ground)? {
        if p.len() > max_blocks {
            continue;
        }
        match index_range {
            None => out.push(Dissection { blocks: p.blocks, attachment: None }),
            Some(r) => {
                for att in injections(p.len(), r) {
                    out.push(Dissection { blocks: p.blocks.clone(), attachment: Some(att) });
                }
            }
        }
    }
    Ok(out)
}

pub fn stirling2(n: usize, k: usize) -> Result<u128> {
    if n > MAX_STIRLING || k > n {
        return Err(Error::Argument(format!("stirling2 needs 0 <= k <= n <= {MAX_STIRLING}, got ({n},{k})")));
    }
    let mut row = vec![0u128; n + 1];
    row[0] = 1;
    for m in 1..=n {
        for j in (1..=m).rev() {
            row[j] = j as u128 * row[j] + row[j - 1];
        }
        row[0] = 0;
    }
    Ok(row[k])
}

pub fn bell(n: usize) -> Result<u128> {
    (0..=n).map(|k| stirling2(n, k)).sum()
}

pub fn factorial(n: usize) -> u128 {
    (1..=n as u128).product()
}

pub fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1u128, |acc, i| acc * (n - i) as u128 / (i + 1) as u128)
}

/// `(-1)^(k-1) (k-1)!` for a partition with `k` blocks.
pub fn mobius_weight(k: usize) -> i128 {
    assert!(k >= 1, "partition must have at least one block");
    let f = factorial(k - 1) as i128;
    if k % 2 == 1 {
        f
    } else {
        -f
    }
}

pub fn partition_weight(p: &Partition) -> i128 {
    mobius_weight(p.len())
}

pub fn alternating_stirling_sum(s: usize) -> Result<i128> {
    if !(1..=20).contains(&s) {
        return Err(Error::Argument(format!("alternating Stirling sum needs 1 <= s <= 20, got {s}")));
    }
    (1..=s).map(|k| Ok(stirling2(s, k)? as i128 * mobius_weight(k))).sum()
}

/// `Σ_P (-1)^{|P|} |P|!` over all partitions of an `m`-set.
pub fn signed_factorial_partition_sum(m: usize) -> i128 {
    index_partitions(m)
        .iter()
        .map(|p| {
            let k = p.len();
            let f = factorial(k) as i128;
            if k % 2 == 0 {
                f
            } else {
                -f
            }
        })
        .sum()
}

use crate::error::{Error, Result};

const WORDS: usize = 8;

/// Largest supported number of sites.
pub const MAX_SITES: usize = 64 * WORDS;

/// Largest sector dimension that will be enumerated.
pub const MAX_DIMENSION: usize = 50_000_000;

/// Occupation bitset of one spin species; bit i set means site i is occupied.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Occupation([u64; WORDS]);

impl Occupation {
    pub fn from_sites(sites: &[usize]) -> Self {
        let mut o = Self::default();
        for &s in sites {
            o.set(s);
        }
        o
    }

    pub fn get(&self, i: usize) -> bool {
        self.0[i / 64] >> (i % 64) & 1 == 1
    }

    pub fn set(&mut self, i: usize) {
        self.0[i / 64] |= 1 << (i % 64);
    }

    pub fn clear(&mut self, i: usize) {
        self.0[i / 64] &= !(1 << (i % 64));
    }

    pub fn count(&self) -> usize {
        self.0.iter().map(|w| w.count_ones() as usize).sum()
    }

    /// Number of occupied sites strictly between `a` and `b`.
    pub fn count_between(&self, a: usize, b: usize) -> usize {
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        ((lo + 1)..hi).filter(|&k| self.get(k)).count()
    }

    pub fn sites(&self) -> impl Iterator<Item = usize> + '_ {
        self.0.iter().enumerate().flat_map(|(w, &word)| {
            let mut bits = word;
            std::iter::from_fn(move || {
                if bits == 0 {
                    None
                } else {
                    let tz = bits.trailing_zeros() as usize;
                    bits &= bits - 1;
                    Some(w * 64 + tz)
                }
            })
        })
    }
}

pub(crate) fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc.saturating_mul((n - i) as u128) / (i as u128 + 1);
    }
    acc
}

/// All k-subsets of 0..n in lexicographic order of their sorted site lists.
fn combinations(n: usize, k: usize) -> Vec<Occupation> {
    let mut out = Vec::with_capacity(binomial(n, k) as usize);
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        out.push(Occupation::from_sites(&idx));
        // rightmost position that can still be incremented
        let mut pos = k;
        while pos > 0 && idx[pos - 1] == n - k + pos - 1 {
            pos -= 1;
        }
        if pos == 0 {
            return out;
        }
        idx[pos - 1] += 1;
        for q in pos..k {
            idx[q] = idx[q - 1] + 1;
        }
    }
}

/// Fixed (N↑, N↓) sector of the occupation-number basis. States are ordered
/// lexicographically by the occupied sites of the up species, then of the
/// down species; state index = rank(up)·dim(down) + rank(down).
#[derive(Debug, Clone, PartialEq)]
pub struct SectorBasis {
    n_sites: usize,
    n_up: usize,
    n_down: usize,
    up: Vec<Occupation>,
    down: Vec<Occupation>,
    // binom[n][k] for the ranking, n ≤ n_sites, k ≤ max(n_up, n_down)
    binom: Vec<Vec<usize>>,
}

impl SectorBasis {
    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    pub fn n_up(&self) -> usize {
        self.n_up
    }

    pub fn n_down(&self) -> usize {
        self.n_down
    }

    pub fn dimension(&self) -> usize {
        self.up.len() * self.down.len()
    }

    pub fn state(&self, index: usize) -> (Occupation, Occupation) {
        let nd = self.down.len();
        (self.up[index / nd], self.down[index % nd])
    }

    pub fn states(&self) -> impl Iterator<Item = (Occupation, Occupation)> + '_ {
        self.up
            .iter()
            .flat_map(move |u| self.down.iter().map(move |d| (*u, *d)))
    }

    fn rank(&self, occ: &Occupation, k: usize) -> usize {
        // lexicographic rank among k-subsets of 0..n
        let n = self.n_sites;
        let mut rank = 0;
        let mut prev: isize = -1;
        for (t, site) in occ.sites().enumerate() {
            for v in (prev + 1) as usize..site {
                rank += self.binom[n - 1 - v][k - 1 - t];
            }
            prev = site as isize;
        }
        rank
    }

    /// Index of a state, or None if it does not belong to this sector.
    pub fn index_of(&self, up: &Occupation, down: &Occupation) -> Option<usize> {
        if up.count() != self.n_up || down.count() != self.n_down {
            return None;
        }
        if up.sites().chain(down.sites()).any(|s| s >= self.n_sites) {
            return None;
        }
        Some(self.rank(up, self.n_up) * self.down.len() + self.rank(down, self.n_down))
    }
}

pub fn enumerate_sector(n_sites: usize, n_up: usize, n_down: usize) -> Result<SectorBasis> {
    if n_sites == 0 || n_sites > MAX_SITES {
        return Err(Error::InvalidInput(format!(
            "number of sites must be in 1..={MAX_SITES}, got {n_sites}"
        )));
    }
    if n_up > n_sites || n_down > n_sites {
        return Err(Error::InvalidInput(format!(
            "particle numbers ({n_up}, {n_down}) exceed {n_sites} sites"
        )));
    }
    let dim = binomial(n_sites, n_up).saturating_mul(binomial(n_sites, n_down));
    if dim > MAX_DIMENSION as u128 {
        return Err(Error::InvalidInput(format!(
            "sector dimension {dim} exceeds the limit of {MAX_DIMENSION}"
        )));
    }
    let kmax = n_up.max(n_down);
    let binom = (0..=n_sites)
        .map(|n| {
            (0..=kmax)
                .map(|k| binomial(n, k).min(usize::MAX as u128) as usize)
                .collect()
        })
        .collect();
    Ok(SectorBasis {
        n_sites,
        n_up,
        n_down,
        up: combinations(n_sites, n_up),
        down: combinations(n_sites, n_down),
        binom,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dimensions() {
        assert_eq!(enumerate_sector(2, 1, 0).unwrap().dimension(), 2);
        assert_eq!(enumerate_sector(10, 1, 1).unwrap().dimension(), 100);
        assert_eq!(enumerate_sector(6, 3, 3).unwrap().dimension(), 400);
        assert_eq!(enumerate_sector(4, 0, 0).unwrap().dimension(), 1);
        assert_eq!(enumerate_sector(4, 4, 4).unwrap().dimension(), 1);
    }

    #[test]
    fn out_of_range_counts() {
        assert!(enumerate_sector(3, 4, 0).is_err());
        assert!(enumerate_sector(0, 0, 0).is_err());
        assert!(enumerate_sector(600, 1, 0).is_err());
    }

    #[test]
    fn lexicographic_and_ranked() {
        let b = enumerate_sector(5, 2, 1).unwrap();
        let lists: Vec<(Vec<usize>, Vec<usize>)> = b
            .states()
            .map(|(u, d)| (u.sites().collect(), d.sites().collect()))
            .collect();
        let mut sorted = lists.clone();
        sorted.sort();
        sorted.dedup();
        assert_eq!(lists, sorted);
        for (k, (u, d)) in b.states().enumerate() {
            assert_eq!(b.index_of(&u, &d), Some(k));
        }
    }

    #[test]
    fn bitset_spans_words() {
        let mut o = Occupation::default();
        o.set(3);
        o.set(70);
        o.set(299);
        assert_eq!(o.sites().collect::<Vec<_>>(), vec![3, 70, 299]);
        assert_eq!(o.count_between(3, 299), 1);
        o.clear(70);
        assert_eq!(o.count(), 2);
    }

    #[test]
    fn large_chain_single_electron() {
        let b = enumerate_sector(300, 1, 0).unwrap();
        assert_eq!(b.dimension(), 300);
        let (u, _) = b.state(257);
        assert_eq!(u.sites().collect::<Vec<_>>(), vec![257]);
    }
}

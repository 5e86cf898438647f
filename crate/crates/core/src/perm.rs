//! Permutations of `{1, ..., n}` and their cycle structure.
//!
//! Storage is zero-based; every public accessor and the text format use
//! one-based labels.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Largest `n` for which [`enumerate_sn`] will walk all of `S_n`.
pub const MAX_ENUMERATION_N: usize = 9;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Permutation {
    image: Vec<usize>,
}

impl Permutation {
    pub fn identity(n: usize) -> Self {
        Self {
            image: (0..n).collect(),
        }
    }

    /// Builds `pi` from its one-based image list (`image[i-1] = pi(i)`).
    pub fn from_one_based(image: &[usize]) -> Result<Self> {
        if image.contains(&0) {
            return Err(Error::Parse("permutation labels are one-based".into()));
        }
        Self::from_zero_based(image.iter().map(|&v| v - 1).collect())
    }

    pub fn from_zero_based(image: Vec<usize>) -> Result<Self> {
        let n = image.len();
        if n == 0 {
            return Err(Error::Parse("empty permutation".into()));
        }
        let mut seen = vec![false; n];
        for &v in &image {
            if v >= n {
                return Err(Error::Parse(format!(
                    "label {} out of range 1..={n}",
                    v + 1
                )));
            }
            if std::mem::replace(&mut seen[v], true) {
                return Err(Error::Parse(format!("label {} repeated", v + 1)));
            }
        }
        Ok(Self { image })
    }

    /// Caller guarantees `image` is a bijection of `0..len`.
    pub(crate) fn from_zero_based_unchecked(image: Vec<usize>) -> Self {
        debug_assert!(Self::from_zero_based(image.clone()).is_ok());
        Self { image }
    }

    pub fn len(&self) -> usize {
        self.image.len()
    }

    pub fn is_empty(&self) -> bool {
        self.image.is_empty()
    }

    /// `pi(i)` with one-based `i`.
    pub fn apply(&self, i: usize) -> usize {
        self.image[i - 1] + 1
    }

    pub fn as_zero_based(&self) -> &[usize] {
        &self.image
    }

    pub fn to_one_based(&self) -> Vec<usize> {
        self.image.iter().map(|&v| v + 1).collect()
    }

    pub fn inverse(&self) -> Self {
        let mut inv = vec![0; self.len()];
        for (i, &v) in self.image.iter().enumerate() {
            inv[v] = i;
        }
        Self { image: inv }
    }

    /// `tau pi tau` for the transposition `tau` of zero-based `i` and `j`.
    pub fn conjugate_by_transposition(&self, i: usize, j: usize) -> Self {
        let swap = |k: usize| {
            if k == i {
                j
            } else if k == j {
                i
            } else {
                k
            }
        };
        let image = (0..self.len()).map(|k| swap(self.image[swap(k)])).collect();
        Self { image }
    }

    pub fn fixed_point_count(&self) -> usize {
        self.image
            .iter()
            .enumerate()
            .filter(|&(i, &v)| i == v)
            .count()
    }

    /// Number of cycles `#(pi)` without materializing the decomposition.
    pub fn cycle_count(&self) -> usize {
        count_cycles(&self.image)
    }

    pub fn cycles(&self) -> CycleDecomposition {
        cycle_decompose(self)
    }
}

impl fmt::Display for Permutation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, &v) in self.image.iter().enumerate() {
            if k > 0 {
                f.write_str(" ")?;
            }
            write!(f, "{}", v + 1)?;
        }
        Ok(())
    }
}

/// Parses the one-line image format, e.g. `"2 1 3"`.
impl FromStr for Permutation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let labels = s
            .split_whitespace()
            .map(|tok| {
                tok.parse::<usize>()
                    .map_err(|_| Error::Parse(format!("bad permutation label {tok:?}")))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_one_based(&labels)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CycleDecomposition {
    /// One-based cycles, each starting at its smallest element, sorted by
    /// that element.
    pub cycles: Vec<Vec<usize>>,
    /// `cycle_type[q]` is the number of `q`-cycles; index 0 is unused.
    pub cycle_type: Vec<usize>,
    cycle_len_of: Vec<usize>,
}

impl CycleDecomposition {
    pub fn cycle_count(&self) -> usize {
        self.cycles.len()
    }

    /// Length `|i|` of the cycle containing one-based `i`.
    pub fn cycle_len_of(&self, i: usize) -> usize {
        self.cycle_len_of[i - 1]
    }

    /// `c_q`, the number of cycles of length `q`.
    pub fn count_of_length(&self, q: usize) -> usize {
        self.cycle_type.get(q).copied().unwrap_or(0)
    }

    pub fn fixed_points(&self) -> usize {
        self.count_of_length(1)
    }
}

/// Cycle count of a zero-based image known to be a bijection.
pub(crate) fn count_cycles(image: &[usize]) -> usize {
    let n = image.len();
    let mut seen = vec![false; n];
    let mut count = 0;
    for start in 0..n {
        if seen[start] {
            continue;
        }
        count += 1;
        let mut k = start;
        while !seen[k] {
            seen[k] = true;
            k = image[k];
        }
    }
    count
}

pub fn cycle_decompose(pi: &Permutation) -> CycleDecomposition {
    let n = pi.len();
    let image = pi.as_zero_based();
    let mut seen = vec![false; n];
    let mut cycles = Vec::new();
    let mut cycle_type = vec![0; n + 1];
    let mut cycle_len_of = vec![0; n];
    for start in 0..n {
        if seen[start] {
            continue;
        }
        let mut cycle = Vec::new();
        let mut k = start;
        while !seen[k] {
            seen[k] = true;
            cycle.push(k + 1);
            k = image[k];
        }
        for &member in &cycle {
            cycle_len_of[member - 1] = cycle.len();
        }
        cycle_type[cycle.len()] += 1;
        cycles.push(cycle);
    }
    CycleDecomposition {
        cycles,
        cycle_type,
        cycle_len_of,
    }
}

/// Iterates `S_n` in lexicographic order of the image.
pub fn enumerate_sn(n: usize) -> Result<SymmetricGroupIter> {
    if n == 0 || n > MAX_ENUMERATION_N {
        return Err(Error::OracleRange {
            n,
            min: 1,
            max: MAX_ENUMERATION_N,
        });
    }
    Ok(SymmetricGroupIter {
        next: Some((0..n).collect()),
    })
}

#[derive(Debug, Clone)]
pub struct SymmetricGroupIter {
    next: Option<Vec<usize>>,
}

impl Iterator for SymmetricGroupIter {
    type Item = Permutation;

    fn next(&mut self) -> Option<Permutation> {
        let current = self.next.take()?;
        let mut successor = current.clone();
        if next_lexicographic(&mut successor) {
            self.next = Some(successor);
        }
        Some(Permutation::from_zero_based_unchecked(current))
    }
}

fn next_lexicographic(v: &mut [usize]) -> bool {
    let Some(pivot) = v.windows(2).rposition(|w| w[0] < w[1]) else {
        return false;
    };
    let successor = v.iter().rposition(|&x| x > v[pivot]).unwrap();
    v.swap(pivot, successor);
    v[pivot + 1..].reverse();
    true
}

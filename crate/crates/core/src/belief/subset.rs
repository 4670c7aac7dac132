use std::fmt;

const WORD_BITS: usize = 64;

/// A set of class indices over a frame, stored as a little-endian bitmask.
///
/// Two subsets compare equal only if they were built for frames of the same
/// size and hold the same members. Ordering is total and deterministic, which
/// keeps maps keyed by subsets stable across runs.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ClassSubset {
    size: usize,
    words: Vec<u64>,
}

fn word_count(size: usize) -> usize {
    size.div_ceil(WORD_BITS)
}

impl ClassSubset {
    pub fn empty(size: usize) -> Self {
        Self {
            size,
            words: vec![0; word_count(size)],
        }
    }

    pub fn full(size: usize) -> Self {
        let mut s = Self::empty(size);
        for i in 0..size {
            s.insert(i);
        }
        s
    }

    pub fn singleton(size: usize, index: usize) -> Self {
        let mut s = Self::empty(size);
        s.insert(index);
        s
    }

    /// Builds a subset from indices. Returns `None` if any index is out of range.
    pub fn from_indices<I: IntoIterator<Item = usize>>(size: usize, indices: I) -> Option<Self> {
        let mut s = Self::empty(size);
        for i in indices {
            if i >= size {
                return None;
            }
            s.insert(i);
        }
        Some(s)
    }

    /// Number of classes in the frame this subset was built for.
    pub fn frame_size(&self) -> usize {
        self.size
    }

    pub fn insert(&mut self, index: usize) {
        assert!(index < self.size, "class index {index} out of range {}", self.size);
        self.words[index / WORD_BITS] |= 1u64 << (index % WORD_BITS);
    }

    pub fn contains(&self, index: usize) -> bool {
        index < self.size && self.words[index / WORD_BITS] & (1u64 << (index % WORD_BITS)) != 0
    }

    pub fn len(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    pub fn is_full(&self) -> bool {
        self.len() == self.size
    }

    pub fn intersection(&self, other: &Self) -> Self {
        debug_assert_eq!(self.size, other.size);
        Self {
            size: self.size,
            words: self.words.iter().zip(&other.words).map(|(a, b)| a & b).collect(),
        }
    }

    pub fn union(&self, other: &Self) -> Self {
        debug_assert_eq!(self.size, other.size);
        Self {
            size: self.size,
            words: self.words.iter().zip(&other.words).map(|(a, b)| a | b).collect(),
        }
    }

    pub fn complement(&self) -> Self {
        let mut words: Vec<u64> = self.words.iter().map(|w| !w).collect();
        let tail = self.size % WORD_BITS;
        if tail != 0 {
            if let Some(last) = words.last_mut() {
                *last &= (1u64 << tail) - 1;
            }
        }
        Self { size: self.size, words }
    }

    pub fn intersects(&self, other: &Self) -> bool {
        self.words.iter().zip(&other.words).any(|(a, b)| a & b != 0)
    }

    pub fn is_subset_of(&self, other: &Self) -> bool {
        self.words.iter().zip(&other.words).all(|(a, b)| a & !b == 0)
    }

    /// Member indices in increasing order.
    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.words.iter().enumerate().flat_map(|(wi, &w)| {
            let mut bits = w;
            std::iter::from_fn(move || {
                if bits == 0 {
                    return None;
                }
                let tz = bits.trailing_zeros() as usize;
                bits &= bits - 1;
                Some(wi * WORD_BITS + tz)
            })
        })
    }
}

impl fmt::Debug for ClassSubset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.iter()).finish()
    }
}

/// Bit set over token ids.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct TokenMask {
    words: Vec<u64>,
    len: usize,
}

impl TokenMask {
    pub fn empty(len: usize) -> Self {
        Self {
            words: vec![0; len.div_ceil(64)],
            len,
        }
    }

    pub fn full(len: usize) -> Self {
        let mut mask = Self {
            words: vec![u64::MAX; len.div_ceil(64)],
            len,
        };
        let rem = len % 64;
        if rem > 0 {
            *mask.words.last_mut().unwrap() = (1u64 << rem) - 1;
        }
        mask
    }

    pub fn from_ids(len: usize, ids: impl IntoIterator<Item = u32>) -> Self {
        let mut mask = Self::empty(len);
        for id in ids {
            mask.insert(id);
        }
        mask
    }

    /// Number of positions (vocabulary size), not the number of set bits.
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    pub fn count(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    #[inline]
    pub fn contains(&self, id: u32) -> bool {
        let i = id as usize;
        i < self.len && (self.words[i / 64] >> (i % 64)) & 1 == 1
    }

    /// # Panics
    /// If `id` is outside the mask.
    pub fn insert(&mut self, id: u32) {
        let i = id as usize;
        assert!(i < self.len, "token id {id} outside mask of {}", self.len);
        self.words[i / 64] |= 1 << (i % 64);
    }

    pub fn remove(&mut self, id: u32) {
        let i = id as usize;
        if i < self.len {
            self.words[i / 64] &= !(1 << (i % 64));
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = u32> + '_ {
        self.words.iter().enumerate().flat_map(|(wi, &word)| {
            let mut w = word;
            std::iter::from_fn(move || {
                if w == 0 {
                    return None;
                }
                let bit = w.trailing_zeros();
                w &= w - 1;
                Some((wi * 64) as u32 + bit)
            })
        })
    }
}

//! Expansion of encoded sessions into typed (input, output) training pairs.

use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::corpus::EncodedSession;

/// The five interaction types. The first letter names what is predicted,
/// the second what it is predicted from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum PairKind {
    /// Context item from target item.
    JI,
    /// Item from its own metadata, same position.
    IM,
    /// Context item from target metadata.
    JM,
    /// Context metadata from target item.
    MI,
    /// Context metadata from target metadata.
    MM,
}

impl PairKind {
    pub const ALL: [PairKind; 5] = [PairKind::JI, PairKind::IM, PairKind::JM, PairKind::MI, PairKind::MM];

    pub const fn as_str(self) -> &'static str {
        match self {
            PairKind::JI => "JI",
            PairKind::IM => "IM",
            PairKind::JM => "JM",
            PairKind::MI => "MI",
            PairKind::MM => "MM",
        }
    }

    const fn bit(self) -> u8 {
        1 << self as u8
    }

    pub const fn uses_metadata(self) -> bool {
        !matches!(self, PairKind::JI)
    }
}

impl fmt::Display for PairKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PairKind {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        PairKind::ALL
            .into_iter()
            .find(|k| k.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| crate::Error::InvalidParameter(alloc::format!("unknown pair kind `{s}`")))
    }
}

/// A set of enabled pair kinds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct KindSet(u8);

impl KindSet {
    pub const EMPTY: KindSet = KindSet(0);
    pub const ALL: KindSet = KindSet(0b1_1111);
    pub const PROD2VEC: KindSet = KindSet(1);

    pub fn of(kinds: &[PairKind]) -> Self {
        KindSet(kinds.iter().fold(0, |acc, k| acc | k.bit()))
    }

    pub fn contains(self, kind: PairKind) -> bool {
        self.0 & kind.bit() != 0
    }

    pub fn with(self, kind: PairKind) -> Self {
        KindSet(self.0 | kind.bit())
    }

    pub fn without(self, kind: PairKind) -> Self {
        KindSet(self.0 & !kind.bit())
    }

    pub fn iter(self) -> impl Iterator<Item = PairKind> {
        PairKind::ALL.into_iter().filter(move |k| self.contains(*k))
    }

    pub fn uses_metadata(self) -> bool {
        self.iter().any(PairKind::uses_metadata)
    }
}

/// One positive example.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TrainingPair {
    pub input: u32,
    pub output: u32,
    pub kind: PairKind,
}

impl TrainingPair {
    pub fn new(input: u32, output: u32, kind: PairKind) -> Self {
        TrainingPair { input, output, kind }
    }
}

/// Visits every pair of `session` in emission order.
///
/// `window_at(pos)` gives the context radius used around position `pos`;
/// a constant closure yields the fixed symmetric window.
///
/// Order: positions ascending; for each context position (ascending, self
/// excluded) the kinds JI, JM, MI, MM; then IM once for the position. With
/// several attributes, each metadata-involving kind iterates attributes in
/// order, and MM pairs values of the same attribute.
pub fn for_each_pair<W, F>(session: &EncodedSession, kinds: KindSet, mut window_at: W, mut emit: F)
where
    W: FnMut(usize) -> usize,
    F: FnMut(TrainingPair),
{
    let n = session.len();
    let n_attrs = session.n_attrs;
    let (ji, jm, mi, mm, im) = (
        kinds.contains(PairKind::JI),
        kinds.contains(PairKind::JM) && n_attrs > 0,
        kinds.contains(PairKind::MI) && n_attrs > 0,
        kinds.contains(PairKind::MM) && n_attrs > 0,
        kinds.contains(PairKind::IM) && n_attrs > 0,
    );
    for i in 0..n {
        let window = window_at(i);
        let item_i = session.items[i];
        let lo = i.saturating_sub(window);
        let hi = (i + window).min(n - 1);
        for j in lo..=hi {
            if j == i {
                continue;
            }
            let item_j = session.items[j];
            if ji {
                emit(TrainingPair::new(item_i, item_j, PairKind::JI));
            }
            if jm {
                for a in 0..n_attrs {
                    if let Some(meta_i) = session.meta_at(i, a) {
                        emit(TrainingPair::new(meta_i, item_j, PairKind::JM));
                    }
                }
            }
            if mi {
                for a in 0..n_attrs {
                    if let Some(meta_j) = session.meta_at(j, a) {
                        emit(TrainingPair::new(item_i, meta_j, PairKind::MI));
                    }
                }
            }
            if mm {
                for a in 0..n_attrs {
                    if let (Some(meta_i), Some(meta_j)) = (session.meta_at(i, a), session.meta_at(j, a)) {
                        emit(TrainingPair::new(meta_i, meta_j, PairKind::MM));
                    }
                }
            }
        }
        if im {
            for a in 0..n_attrs {
                if let Some(meta_i) = session.meta_at(i, a) {
                    emit(TrainingPair::new(meta_i, item_i, PairKind::IM));
                }
            }
        }
    }
}

/// All pairs of `session` under a fixed symmetric `window`, in emission order.
pub fn generate_pairs(session: &EncodedSession, window: usize, kinds: KindSet) -> Vec<TrainingPair> {
    let mut out = Vec::new();
    for_each_pair(session, kinds, |_| window, |p| out.push(p));
    out
}

/// Number of pairs [`generate_pairs`] would emit.
pub fn count_pairs(session: &EncodedSession, window: usize, kinds: KindSet) -> u64 {
    let mut n = 0u64;
    for_each_pair(session, kinds, |_| window, |_| n += 1);
    n
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    // a=0, b=1, c=2, X=3, Y=4
    fn abc() -> EncodedSession {
        EncodedSession::with_single_attribute(vec![0, 1, 2], vec![Some(3), Some(4), Some(3)])
    }

    fn of_kind(pairs: &[TrainingPair], kind: PairKind) -> Vec<(u32, u32)> {
        pairs
            .iter()
            .filter(|p| p.kind == kind)
            .map(|p| (p.input, p.output))
            .collect()
    }

    #[test]
    fn three_item_example_all_kinds() {
        let pairs = generate_pairs(&abc(), 1, KindSet::ALL);
        let (a, b, c, x, y) = (0, 1, 2, 3, 4);
        assert_eq!(of_kind(&pairs, PairKind::JI), vec![(a, b), (b, a), (b, c), (c, b)]);
        assert_eq!(of_kind(&pairs, PairKind::JM), vec![(x, b), (y, a), (y, c), (x, b)]);
        assert_eq!(of_kind(&pairs, PairKind::MI), vec![(a, y), (b, x), (b, x), (c, y)]);
        assert_eq!(of_kind(&pairs, PairKind::MM), vec![(x, y), (y, x), (y, x), (x, y)]);
        assert_eq!(of_kind(&pairs, PairKind::IM), vec![(x, a), (y, b), (x, c)]);
        // emission order within position 0
        assert_eq!(
            &pairs[..5],
            &[
                TrainingPair::new(a, b, PairKind::JI),
                TrainingPair::new(x, b, PairKind::JM),
                TrainingPair::new(a, y, PairKind::MI),
                TrainingPair::new(x, y, PairKind::MM),
                TrainingPair::new(x, a, PairKind::IM),
            ]
        );
    }

    #[test]
    fn single_item_yields_only_im() {
        let s = EncodedSession::with_single_attribute(vec![0], vec![Some(1)]);
        for window in 1..4 {
            assert_eq!(
                generate_pairs(&s, window, KindSet::ALL),
                vec![TrainingPair::new(1, 0, PairKind::IM)]
            );
        }
    }

    #[test]
    fn prod2vec_subset() {
        let pairs = generate_pairs(&abc(), 2, KindSet::PROD2VEC);
        assert!(pairs.iter().all(|p| p.kind == PairKind::JI));
        assert_eq!(pairs.len(), 6);
    }

    #[test]
    fn missing_metadata_skips_metadata_kinds() {
        let s = EncodedSession::with_single_attribute(vec![0, 1], vec![Some(2), None]);
        let pairs = generate_pairs(&s, 1, KindSet::ALL);
        assert_eq!(
            pairs,
            vec![
                TrainingPair::new(0, 1, PairKind::JI),
                TrainingPair::new(2, 1, PairKind::JM),
                TrainingPair::new(2, 0, PairKind::IM),
                TrainingPair::new(1, 0, PairKind::JI),
                TrainingPair::new(1, 2, PairKind::MI),
            ]
        );
    }

    #[test]
    fn kind_parsing_and_sets() {
        assert_eq!("mm".parse::<PairKind>().unwrap(), PairKind::MM);
        assert!("xx".parse::<PairKind>().is_err());
        let s = KindSet::ALL.without(PairKind::MM);
        assert!(!s.contains(PairKind::MM));
        assert_eq!(s.iter().count(), 4);
        assert!(!KindSet::PROD2VEC.uses_metadata());
    }
}

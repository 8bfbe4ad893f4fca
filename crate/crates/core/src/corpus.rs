//! Session ingestion, the shared item/metadata vocabulary and leave-last-out
//! splits.
//!
//! Parsing works on in-memory text so that it stays available without `std`;
//! the companion crate handles the file system.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Separator between an attribute name and its value in metadata tokens.
pub const META_SEPARATOR: char = ':';

/// One user session: an ordered, non-empty list of item tokens.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Session {
    pub user: String,
    pub items: Vec<String>,
}

impl Session {
    pub fn new(user: impl Into<String>, items: Vec<String>) -> Self {
        Session {
            user: user.into(),
            items,
        }
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }
}

/// Parses `user_id<TAB>item1 item2 ...` lines.
///
/// Blank lines are rejected like any other malformed line so that line numbers
/// in errors always match the file.
pub fn parse_sessions(text: &str) -> Result<Vec<Session>> {
    let mut sessions = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.strip_suffix('\r').unwrap_or(line);
        let lineno = lineno + 1;
        let (user, rest) = line.split_once('\t').ok_or_else(|| Error::Parse {
            line: lineno,
            reason: "expected `user_id<TAB>items`".to_string(),
        })?;
        if user.is_empty() {
            return Err(Error::Parse {
                line: lineno,
                reason: "empty user id".to_string(),
            });
        }
        let items: Vec<String> = rest.split_whitespace().map(str::to_string).collect();
        if items.is_empty() {
            return Err(Error::Parse {
                line: lineno,
                reason: "session has no items".to_string(),
            });
        }
        sessions.push(Session::new(user, items));
    }
    if sessions.is_empty() {
        return Err(Error::EmptyInput);
    }
    Ok(sessions)
}

/// A single categorical attribute per item, e.g. the artist of a track.
///
/// Values are stored already prefixed with `name:` so that metadata tokens can
/// never collide with item tokens.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct MetadataMap {
    name: String,
    values: BTreeMap<String, String>,
}

impl MetadataMap {
    pub fn new(name: impl Into<String>) -> Result<Self> {
        let name = name.into();
        if name.is_empty() || name.contains(META_SEPARATOR) || name.contains(char::is_whitespace) {
            return Err(Error::InvalidParameter(format!(
                "attribute name `{name}` must be non-empty without ':' or whitespace"
            )));
        }
        Ok(MetadataMap {
            name,
            values: BTreeMap::new(),
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// Inserts `item -> value`. Re-inserting the same value is a no-op;
    /// a different value for a known item is an error.
    pub fn insert(&mut self, item: &str, value: &str) -> Result<()> {
        let token = format!("{}{}{}", self.name, META_SEPARATOR, value);
        match self.values.get(item) {
            Some(existing) if *existing == token => Ok(()),
            Some(existing) => Err(Error::ConflictingMetadata {
                item: item.to_string(),
                first: existing.clone(),
                second: token,
            }),
            None => {
                self.values.insert(item.to_string(), token);
                Ok(())
            }
        }
    }

    /// The prefixed metadata token of `item`, if it has one.
    pub fn get(&self, item: &str) -> Option<&str> {
        self.values.get(item).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Parses `item_id<TAB>value` lines into an attribute map called `name`.
pub fn parse_metadata(name: &str, text: &str) -> Result<MetadataMap> {
    let mut map = MetadataMap::new(name)?;
    for (lineno, line) in text.lines().enumerate() {
        let line = line.strip_suffix('\r').unwrap_or(line);
        if line.is_empty() {
            continue;
        }
        let (item, value) = line.split_once('\t').ok_or_else(|| Error::Parse {
            line: lineno + 1,
            reason: "expected `item_id<TAB>value`".to_string(),
        })?;
        let value = value.trim();
        if item.is_empty() || value.is_empty() || value.contains(char::is_whitespace) {
            return Err(Error::Parse {
                line: lineno + 1,
                reason: "item id and value must be non-empty single tokens".to_string(),
            });
        }
        map.insert(item, value)?;
    }
    Ok(map)
}

/// Whether a vocabulary entry is an item or a metadata value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TokenKind {
    Item,
    Meta,
}

/// A token string is a metadata token iff it contains the separator.
pub fn token_kind(token: &str) -> TokenKind {
    if token.contains(META_SEPARATOR) {
        TokenKind::Meta
    } else {
        TokenKind::Item
    }
}

/// Dense index space shared by items and metadata values.
///
/// Items occupy `0..n_items` ordered by descending frequency (ties by token),
/// metadata tokens follow in the same order.
#[derive(Debug, Clone, PartialEq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: BTreeMap<String, u32>,
    freq: Vec<u64>,
    n_items: usize,
    attributes: Vec<String>,
    // attribute-major: item_meta[a][item] = metadata index of item under attribute a
    item_meta: Vec<Vec<Option<u32>>>,
}

impl Vocabulary {
    /// Builds a vocabulary from explicit `(token, frequency)` lists.
    ///
    /// Used when the counts come from elsewhere (e.g. a saved embedding file
    /// or a hand-written fixture); no metadata links are recorded.
    pub fn from_counts(items: Vec<(String, u64)>, metas: Vec<(String, u64)>) -> Result<Self> {
        let n_items = items.len();
        let mut tokens = Vec::with_capacity(items.len() + metas.len());
        let mut freq = Vec::with_capacity(tokens.capacity());
        let mut index = BTreeMap::new();
        for (token, f) in items.into_iter().chain(metas) {
            let idx = tokens.len() as u32;
            if index.insert(token.clone(), idx).is_some() {
                return Err(Error::InvalidParameter(format!("duplicate token `{token}`")));
            }
            tokens.push(token);
            freq.push(f);
        }
        for (i, t) in tokens.iter().enumerate() {
            let expected = if i < n_items { TokenKind::Item } else { TokenKind::Meta };
            if token_kind(t) != expected {
                return Err(Error::ReservedToken(t.clone()));
            }
        }
        if tokens.is_empty() {
            return Err(Error::EmptyVocabulary(0));
        }
        Ok(Vocabulary {
            tokens,
            index,
            freq,
            n_items,
            attributes: Vec::new(),
            item_meta: Vec::new(),
        })
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn n_items(&self) -> usize {
        self.n_items
    }

    pub fn index_of(&self, token: &str) -> Option<usize> {
        self.index.get(token).map(|&i| i as usize)
    }

    pub fn token_of(&self, index: usize) -> Option<&str> {
        self.tokens.get(index).map(String::as_str)
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn frequency(&self, index: usize) -> u64 {
        self.freq[index]
    }

    pub fn frequencies(&self) -> &[u64] {
        &self.freq
    }

    pub fn kind(&self, index: usize) -> TokenKind {
        if index < self.n_items {
            TokenKind::Item
        } else {
            TokenKind::Meta
        }
    }

    pub fn is_item(&self, index: usize) -> bool {
        index < self.n_items
    }

    /// Names of the attributes whose values are embedded.
    pub fn attributes(&self) -> &[String] {
        &self.attributes
    }

    /// Metadata index of `item` under attribute number `attr`.
    pub fn meta_of(&self, attr: usize, item: usize) -> Option<usize> {
        self.item_meta
            .get(attr)
            .and_then(|m| m.get(item))
            .copied()
            .flatten()
            .map(|i| i as usize)
    }

    /// Maps a session to vocabulary indices, dropping unknown items and closing
    /// the gaps they leave.
    pub fn encode(&self, items: &[String]) -> EncodedSession {
        let n_attrs = self.attributes.len();
        let mut enc = EncodedSession {
            items: Vec::with_capacity(items.len()),
            meta: Vec::with_capacity(items.len() * n_attrs),
            n_attrs,
        };
        for token in items {
            let Some(idx) = self.index_of(token) else { continue };
            if !self.is_item(idx) {
                continue;
            }
            enc.items.push(idx as u32);
            for attr in 0..n_attrs {
                enc.meta.push(self.item_meta[attr][idx]);
            }
        }
        enc
    }
}

/// A session in index space with per-position metadata indices.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct EncodedSession {
    pub items: Vec<u32>,
    // position-major: meta[pos * n_attrs + attr]
    pub meta: Vec<Option<u32>>,
    pub n_attrs: usize,
}

impl EncodedSession {
    /// A session without metadata.
    pub fn from_items(items: Vec<u32>) -> Self {
        EncodedSession {
            items,
            meta: Vec::new(),
            n_attrs: 0,
        }
    }

    /// A session with one attribute, `meta[pos]` being the metadata of position `pos`.
    pub fn with_single_attribute(items: Vec<u32>, meta: Vec<Option<u32>>) -> Self {
        assert_eq!(items.len(), meta.len());
        EncodedSession {
            items,
            meta,
            n_attrs: 1,
        }
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn meta_at(&self, pos: usize, attr: usize) -> Option<u32> {
        self.meta[pos * self.n_attrs + attr]
    }
}

/// Builds the shared vocabulary over the training sequences.
///
/// Items below `min_count` are dropped. Metadata tokens of surviving items are
/// always kept; their frequency is the number of surviving positions carrying
/// them. Pass an empty `metadata` slice for an item-only vocabulary.
pub fn build_vocabulary(sessions: &[Session], metadata: &[MetadataMap], min_count: u64) -> Result<Vocabulary> {
    if min_count < 1 {
        return Err(Error::InvalidParameter("min_count must be >= 1".to_string()));
    }
    let mut item_counts: BTreeMap<&str, u64> = BTreeMap::new();
    for session in sessions {
        for item in &session.items {
            if item.contains(META_SEPARATOR) {
                return Err(Error::ReservedToken(item.clone()));
            }
            *item_counts.entry(item.as_str()).or_default() += 1;
        }
    }
    let mut items: Vec<(&str, u64)> = item_counts.into_iter().filter(|&(_, c)| c >= min_count).collect();
    if items.is_empty() {
        return Err(Error::EmptyVocabulary(min_count));
    }
    items.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));

    let mut meta_counts: BTreeMap<&str, u64> = BTreeMap::new();
    for map in metadata {
        for &(item, count) in &items {
            if let Some(m) = map.get(item) {
                *meta_counts.entry(m).or_default() += count;
            }
        }
    }
    let mut metas: Vec<(&str, u64)> = meta_counts.into_iter().collect();
    metas.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));

    let mut vocab = Vocabulary::from_counts(
        items.iter().map(|&(t, c)| (t.to_string(), c)).collect(),
        metas.iter().map(|&(t, c)| (t.to_string(), c)).collect(),
    )?;
    vocab.attributes = metadata.iter().map(|m| m.name().to_string()).collect();
    vocab.item_meta = metadata
        .iter()
        .map(|map| {
            (0..vocab.n_items)
                .map(|i| map.get(&vocab.tokens[i]).and_then(|m| vocab.index.get(m).copied()))
                .collect()
        })
        .collect();
    Ok(vocab)
}

/// Which leave-last-out split to produce.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    /// Train on the first n-2 items, validate on item n-1, hold out item n.
    Tuning,
    /// Train on the first n-1 items, test on item n.
    Final,
}

/// One session after splitting.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitSession {
    pub user: String,
    pub train: Vec<String>,
    pub valid: Option<String>,
    pub test: String,
}

impl SplitSession {
    /// Item the model is asked about: the last training item.
    pub fn query(&self) -> &str {
        self.train
            .last()
            .expect("split sessions have non-empty training prefixes")
    }

    /// Item to predict in `phase`.
    pub fn target(&self, phase: Phase) -> &str {
        match phase {
            Phase::Tuning => self.valid.as_deref().expect("tuning splits carry a validation item"),
            Phase::Final => &self.test,
        }
    }
}

/// Leave-last-out split of a session corpus.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitCorpus {
    pub phase: Phase,
    pub sessions: Vec<SplitSession>,
    /// Sessions with fewer than three items.
    pub excluded: usize,
}

impl SplitCorpus {
    /// Training prefixes as sessions, in input order.
    pub fn train_sessions(&self) -> Vec<Session> {
        self.sessions
            .iter()
            .map(|s| Session::new(s.user.clone(), s.train.clone()))
            .collect()
    }
}

/// Splits every session of length >= 3 into train / validation / test parts.
pub fn split_sessions(sessions: &[Session], phase: Phase) -> SplitCorpus {
    let mut out = Vec::with_capacity(sessions.len());
    let mut excluded = 0;
    for s in sessions {
        let n = s.items.len();
        if n < 3 {
            excluded += 1;
            continue;
        }
        let (train, valid) = match phase {
            Phase::Tuning => (s.items[..n - 2].to_vec(), Some(s.items[n - 2].clone())),
            Phase::Final => (s.items[..n - 1].to_vec(), None),
        };
        out.push(SplitSession {
            user: s.user.clone(),
            train,
            valid,
            test: s.items[n - 1].clone(),
        });
    }
    SplitCorpus {
        phase,
        sessions: out,
        excluded,
    }
}

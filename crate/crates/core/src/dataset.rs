//! Input data: rating matrices, text corpora, per-component subsets and
//! their numeric (vectorized) form.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::fs;
use std::io::{BufRead, BufReader, Read};
use std::path::Path;

use crate::error::{Error, Result};
use crate::num::Scalar;

/// Identifier of an original data point (a user or a document).
pub type PointId = u64;
pub type ItemId = u64;
/// A user's ratings keyed by item.
pub type UserRatings = BTreeMap<ItemId, f64>;
/// Term occurrence counts of one document.
pub type TermCounts = BTreeMap<String, u32>;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RatingScale {
    pub min: f64,
    pub max: f64,
}

impl Default for RatingScale {
    fn default() -> Self {
        RatingScale { min: 1.0, max: 5.0 }
    }
}

impl RatingScale {
    pub fn contains(&self, value: f64) -> bool {
        value.is_finite() && value >= self.min && value <= self.max
    }

    pub fn clamp(&self, value: f64) -> f64 {
        value.clamp(self.min, self.max)
    }
}

/// Sparse user × item rating matrix.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RatingMatrix {
    scale: RatingScale,
    users: BTreeMap<PointId, UserRatings>,
    // item -> number of users rating it
    items: BTreeMap<ItemId, usize>,
}

impl RatingMatrix {
    pub fn new(scale: RatingScale) -> Self {
        RatingMatrix {
            scale,
            users: BTreeMap::new(),
            items: BTreeMap::new(),
        }
    }

    pub fn scale(&self) -> RatingScale {
        self.scale
    }

    pub fn insert(&mut self, user: PointId, item: ItemId, rating: f64) -> Result<()> {
        if !self.scale.contains(rating) {
            return Err(Error::Invalid(format!(
                "rating {rating} for ({user},{item}) outside [{}, {}]",
                self.scale.min, self.scale.max
            )));
        }
        let row = self.users.entry(user).or_default();
        if row.contains_key(&item) {
            return Err(Error::Duplicate(format!("rating ({user},{item})")));
        }
        row.insert(item, rating);
        *self.items.entry(item).or_default() += 1;
        Ok(())
    }

    /// Replaces (or creates) a user's complete rating row.
    pub fn set_user(&mut self, user: PointId, ratings: UserRatings) -> Result<()> {
        if let Some((item, r)) = ratings.iter().find(|(_, r)| !self.scale.contains(**r)) {
            return Err(Error::Invalid(format!(
                "rating {r} for ({user},{item}) outside [{}, {}]",
                self.scale.min, self.scale.max
            )));
        }
        self.remove_user(user);
        for item in ratings.keys() {
            *self.items.entry(*item).or_default() += 1;
        }
        self.users.insert(user, ratings);
        Ok(())
    }

    pub fn remove_user(&mut self, user: PointId) -> Option<UserRatings> {
        let row = self.users.remove(&user)?;
        for item in row.keys() {
            if let Some(count) = self.items.get_mut(item) {
                *count -= 1;
                if *count == 0 {
                    self.items.remove(item);
                }
            }
        }
        Some(row)
    }

    pub fn user(&self, user: PointId) -> Option<&UserRatings> {
        self.users.get(&user)
    }

    pub fn users(&self) -> impl ExactSizeIterator<Item = (PointId, &UserRatings)> + '_ {
        self.users.iter().map(|(u, r)| (*u, r))
    }

    pub fn user_ids(&self) -> impl Iterator<Item = PointId> + '_ {
        self.users.keys().copied()
    }

    pub fn items(&self) -> impl Iterator<Item = ItemId> + '_ {
        self.items.keys().copied()
    }

    pub fn user_count(&self) -> usize {
        self.users.len()
    }

    pub fn item_count(&self) -> usize {
        self.items.len()
    }

    pub fn rating_count(&self) -> usize {
        self.users.values().map(BTreeMap::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.users.is_empty()
    }

    /// Restriction to the given users (unknown ids are ignored).
    pub fn restrict<'a>(&self, ids: impl IntoIterator<Item = &'a PointId>) -> RatingMatrix {
        let mut out = RatingMatrix::new(self.scale);
        for id in ids {
            if let Some(row) = self.users.get(id) {
                for item in row.keys() {
                    *out.items.entry(*item).or_default() += 1;
                }
                out.users.insert(*id, row.clone());
            }
        }
        out
    }

    /// Parses `user_id,item_id,rating` lines.
    pub fn parse(reader: impl Read, origin: &Path, scale: RatingScale) -> Result<Self> {
        let mut matrix = RatingMatrix::new(scale);
        for (idx, line) in BufReader::new(reader).lines().enumerate() {
            let lineno = idx + 1;
            let line = line.map_err(|e| Error::io(origin, e))?;
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            if fields.len() != 3 {
                return Err(Error::parse(origin, lineno, "expected `user_id,item_id,rating`"));
            }
            let user = fields[0]
                .parse::<PointId>()
                .map_err(|e| Error::parse(origin, lineno, format!("user id: {e}")))?;
            let item = fields[1]
                .parse::<ItemId>()
                .map_err(|e| Error::parse(origin, lineno, format!("item id: {e}")))?;
            let rating = fields[2]
                .parse::<f64>()
                .map_err(|e| Error::parse(origin, lineno, format!("rating: {e}")))?;
            match matrix.insert(user, item, rating) {
                Ok(()) => {}
                Err(Error::Duplicate(what)) => {
                    return Err(Error::Duplicate(format!("{what} at {}:{lineno}", origin.display())))
                }
                Err(e) => return Err(Error::parse(origin, lineno, e.to_string())),
            }
        }
        Ok(matrix)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for (user, row) in &self.users {
            for (item, rating) in row {
                let _ = writeln!(out, "{user},{item},{rating}");
            }
        }
        out
    }
}

/// Parses `id,item_id,rating` rows, skipping an optional header line
/// equal to `header`.
pub(crate) fn parse_rating_rows(reader: impl Read, origin: &Path, header: &str) -> Result<Vec<(PointId, ItemId, f64)>> {
    let mut rows = Vec::new();
    for (idx, line) in BufReader::new(reader).lines().enumerate() {
        let lineno = idx + 1;
        let line = line.map_err(|e| Error::io(origin, e))?;
        let line = line.trim();
        if line.is_empty() || (idx == 0 && line == header) {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != 3 {
            return Err(Error::parse(origin, lineno, format!("expected `{header}`")));
        }
        let id = fields[0]
            .parse::<PointId>()
            .map_err(|e| Error::parse(origin, lineno, format!("id: {e}")))?;
        let item = fields[1]
            .parse::<ItemId>()
            .map_err(|e| Error::parse(origin, lineno, format!("item id: {e}")))?;
        let rating = fields[2]
            .parse::<f64>()
            .ok()
            .filter(|r| r.is_finite())
            .ok_or_else(|| Error::parse(origin, lineno, "rating must be a finite number"))?;
        rows.push((id, item, rating));
    }
    Ok(rows)
}

pub fn load_ratings(path: impl AsRef<Path>, scale: RatingScale) -> Result<RatingMatrix> {
    let path = path.as_ref();
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    RatingMatrix::parse(file, path, scale)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Document {
    pub name: String,
    pub terms: TermCounts,
}

impl Document {
    pub fn from_text(name: impl Into<String>, body: &str) -> Self {
        Document {
            name: name.into(),
            terms: tokenize(body),
        }
    }

    pub fn length(&self) -> u64 {
        self.terms.values().map(|c| u64::from(*c)).sum()
    }
}

/// Whitespace tokenization, lowercased, no stemming.
pub fn tokenize(body: &str) -> TermCounts {
    let mut terms = TermCounts::new();
    for token in body.split_whitespace() {
        *terms.entry(token.to_lowercase()).or_default() += 1;
    }
    terms
}

/// A document collection. Documents are addressed by a numeric
/// [`PointId`] assigned in load order; the textual name is kept for
/// reporting.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Corpus {
    docs: BTreeMap<PointId, Document>,
    names: BTreeMap<String, PointId>,
}

impl Corpus {
    pub fn new() -> Self {
        Corpus::default()
    }

    pub fn insert(&mut self, id: PointId, doc: Document) -> Result<()> {
        if doc.terms.is_empty() {
            return Err(Error::Invalid(format!("document {} is empty", doc.name)));
        }
        if doc.terms.values().any(|c| *c == 0) {
            return Err(Error::Invalid(format!("document {} has a zero term count", doc.name)));
        }
        if self.docs.contains_key(&id) {
            return Err(Error::Duplicate(format!("document id {id}")));
        }
        if self.names.contains_key(&doc.name) {
            return Err(Error::Duplicate(format!("document {}", doc.name)));
        }
        self.names.insert(doc.name.clone(), id);
        self.docs.insert(id, doc);
        Ok(())
    }

    /// Replaces the content of an existing document, keeping its id.
    pub fn replace(&mut self, id: PointId, doc: Document) -> Result<()> {
        let old = self.docs.get(&id).ok_or(Error::UnknownPoint(id))?;
        if doc.terms.is_empty() {
            return Err(Error::Invalid(format!("document {} is empty", doc.name)));
        }
        if old.name != doc.name {
            if self.names.contains_key(&doc.name) {
                return Err(Error::Duplicate(format!("document {}", doc.name)));
            }
            let old_name = old.name.clone();
            self.names.remove(&old_name);
            self.names.insert(doc.name.clone(), id);
        }
        self.docs.insert(id, doc);
        Ok(())
    }

    pub fn get(&self, id: PointId) -> Option<&Document> {
        self.docs.get(&id)
    }

    pub fn id_of(&self, name: &str) -> Option<PointId> {
        self.names.get(name).copied()
    }

    pub fn docs(&self) -> impl ExactSizeIterator<Item = (PointId, &Document)> + '_ {
        self.docs.iter().map(|(id, d)| (*id, d))
    }

    pub fn ids(&self) -> impl Iterator<Item = PointId> + '_ {
        self.docs.keys().copied()
    }

    pub fn len(&self) -> usize {
        self.docs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.docs.is_empty()
    }

    pub fn next_id(&self) -> PointId {
        self.docs.keys().next_back().map_or(0, |id| id + 1)
    }

    pub fn vocabulary(&self) -> BTreeSet<&str> {
        self.docs
            .values()
            .flat_map(|d| d.terms.keys().map(String::as_str))
            .collect()
    }

    pub fn restrict<'a>(&self, ids: impl IntoIterator<Item = &'a PointId>) -> Corpus {
        let mut out = Corpus::new();
        for id in ids {
            if let Some(doc) = self.docs.get(id) {
                out.names.insert(doc.name.clone(), *id);
                out.docs.insert(*id, doc.clone());
            }
        }
        out
    }

    /// Parses `doc_id<TAB>term term ...` lines; ids are assigned in line order.
    pub fn parse(reader: impl Read, origin: &Path) -> Result<Self> {
        let mut corpus = Corpus::new();
        let mut next: PointId = 0;
        for (idx, line) in BufReader::new(reader).lines().enumerate() {
            let lineno = idx + 1;
            let line = line.map_err(|e| Error::io(origin, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let (name, body) = line
                .split_once('\t')
                .ok_or_else(|| Error::parse(origin, lineno, "expected `doc_id<TAB>terms`"))?;
            let name = name.trim();
            if name.is_empty() {
                return Err(Error::parse(origin, lineno, "empty document id"));
            }
            let doc = Document::from_text(name, body);
            if doc.terms.is_empty() {
                return Err(Error::parse(origin, lineno, format!("empty document {name}")));
            }
            if corpus.names.contains_key(name) {
                return Err(Error::Duplicate(format!(
                    "document {name} at {}:{lineno}",
                    origin.display()
                )));
            }
            corpus.insert(next, doc)?;
            next += 1;
        }
        Ok(corpus)
    }

    /// Serializes in load format. Terms are repeated by count, so the
    /// parse of the output yields the same documents in id order.
    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        for doc in self.docs.values() {
            out.push_str(&doc.name);
            out.push('\t');
            let mut first = true;
            for (term, count) in &doc.terms {
                for _ in 0..*count {
                    if !first {
                        out.push(' ');
                    }
                    out.push_str(term);
                    first = false;
                }
            }
            out.push('\n');
        }
        out
    }
}

pub fn load_corpus(path: impl AsRef<Path>) -> Result<Corpus> {
    let path = path.as_ref();
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    Corpus::parse(file, path)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum DataKind {
    Numeric,
    Text,
}

/// Content of a single original data point.
#[derive(Clone, Debug, PartialEq)]
pub enum PointContent {
    Ratings(UserRatings),
    Document(Document),
}

impl PointContent {
    pub fn kind(&self) -> DataKind {
        match self {
            PointContent::Ratings(_) => DataKind::Numeric,
            PointContent::Document(_) => DataKind::Text,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Dataset {
    Ratings(RatingMatrix),
    Text(Corpus),
}

impl Dataset {
    pub fn kind(&self) -> DataKind {
        match self {
            Dataset::Ratings(_) => DataKind::Numeric,
            Dataset::Text(_) => DataKind::Text,
        }
    }

    pub fn len(&self) -> usize {
        match self {
            Dataset::Ratings(m) => m.user_count(),
            Dataset::Text(c) => c.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn point_ids(&self) -> Vec<PointId> {
        match self {
            Dataset::Ratings(m) => m.user_ids().collect(),
            Dataset::Text(c) => c.ids().collect(),
        }
    }

    pub fn contains(&self, id: PointId) -> bool {
        match self {
            Dataset::Ratings(m) => m.user(id).is_some(),
            Dataset::Text(c) => c.get(id).is_some(),
        }
    }

    pub fn restrict<'a>(&self, ids: impl IntoIterator<Item = &'a PointId>) -> Dataset {
        match self {
            Dataset::Ratings(m) => Dataset::Ratings(m.restrict(ids)),
            Dataset::Text(c) => Dataset::Text(c.restrict(ids)),
        }
    }

    pub fn content(&self, id: PointId) -> Option<PointContent> {
        match self {
            Dataset::Ratings(m) => m.user(id).cloned().map(PointContent::Ratings),
            Dataset::Text(c) => c.get(id).cloned().map(PointContent::Document),
        }
    }

    /// Inserts a new point or replaces an existing one.
    pub fn upsert(&mut self, id: PointId, content: PointContent) -> Result<()> {
        match (self, content) {
            (Dataset::Ratings(m), PointContent::Ratings(r)) => m.set_user(id, r),
            (Dataset::Text(c), PointContent::Document(d)) => {
                if c.get(id).is_some() {
                    c.replace(id, d)
                } else {
                    c.insert(id, d)
                }
            }
            _ => Err(Error::Invalid(format!(
                "point {id}: content kind does not match dataset"
            ))),
        }
    }
}

/// One component's share of the input data.
#[derive(Clone, Debug, PartialEq)]
pub struct Subset {
    pub component_id: usize,
    pub data: Dataset,
}

impl Subset {
    pub fn kind(&self) -> DataKind {
        self.data.kind()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }
}

/// Splits the data into `n` subsets, assigning points round-robin in
/// ascending id order.
pub fn partition(data: &Dataset, n: usize) -> Result<Vec<Subset>> {
    if n == 0 {
        return Err(Error::Invalid("component count must be at least 1".into()));
    }
    if data.is_empty() {
        return Err(Error::Invalid("cannot partition an empty dataset".into()));
    }
    let ids = data.point_ids();
    if n > ids.len() {
        return Err(Error::Invalid(format!(
            "{n} components requested for {} points",
            ids.len()
        )));
    }
    let mut groups: Vec<Vec<PointId>> = vec![Vec::new(); n];
    for (pos, id) in ids.into_iter().enumerate() {
        groups[pos % n].push(id);
    }
    Ok(groups
        .iter()
        .enumerate()
        .map(|(component_id, ids)| Subset {
            component_id,
            data: data.restrict(ids),
        })
        .collect())
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ColKey {
    Item(ItemId),
    Term(String),
}

/// How absent matrix cells enter the factorization loss.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Missing {
    /// Absent cells are unknown (ratings never given).
    Unobserved,
    /// Absent cells are genuine zeros (terms that do not occur).
    Zero,
}

/// A u × v numeric dataset stored row-sparse.
#[derive(Clone, Debug, PartialEq)]
pub struct NumericDataset<T> {
    pub rows: Vec<PointId>,
    pub cols: Vec<ColKey>,
    /// Per row: (column index, value), column indices ascending.
    pub entries: Vec<Vec<(usize, T)>>,
    pub missing: Missing,
}

impl<T: Scalar> NumericDataset<T> {
    pub fn nnz(&self) -> usize {
        self.entries.iter().map(Vec::len).sum()
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows.len(), self.cols.len())
    }

    pub fn col_index(&self) -> BTreeMap<&ColKey, usize> {
        self.cols.iter().enumerate().map(|(i, c)| (c, i)).collect()
    }

    /// Dense copy (absent cells as zero), mostly for inspection and tests.
    pub fn to_dense(&self) -> Vec<Vec<T>> {
        let mut dense = vec![vec![T::zero(); self.cols.len()]; self.rows.len()];
        for (r, row) in self.entries.iter().enumerate() {
            for &(c, v) in row {
                dense[r][c] = v;
            }
        }
        dense
    }
}

/// Numeric view of a single point's content against a fixed column set.
pub fn point_entries<T: Scalar>(content: &PointContent, cols: &BTreeMap<&ColKey, usize>) -> Vec<(usize, T)> {
    let mut out: Vec<(usize, T)> = match content {
        PointContent::Ratings(r) => r
            .iter()
            .filter_map(|(item, v)| cols.get(&ColKey::Item(*item)).map(|c| (*c, T::of(*v))))
            .collect(),
        PointContent::Document(d) => d
            .terms
            .iter()
            .filter_map(|(term, n)| {
                cols.get(&ColKey::Term(term.clone()))
                    .map(|c| (*c, T::of(f64::from(*n))))
            })
            .collect(),
    };
    out.sort_by_key(|(c, _)| *c);
    out
}

/// Numeric form of a subset: ratings pass through (rows = users,
/// cols = items); documents become occurrence counts over the subset
/// vocabulary.
pub fn vectorize<T: Scalar>(subset: &Subset) -> NumericDataset<T> {
    match &subset.data {
        Dataset::Ratings(m) => {
            let cols: Vec<ColKey> = m.items().map(ColKey::Item).collect();
            let index: BTreeMap<ItemId, usize> = m.items().enumerate().map(|(i, item)| (item, i)).collect();
            let mut rows = Vec::with_capacity(m.user_count());
            let mut entries = Vec::with_capacity(m.user_count());
            for (user, ratings) in m.users() {
                rows.push(user);
                entries.push(ratings.iter().map(|(item, r)| (index[item], T::of(*r))).collect());
            }
            NumericDataset {
                rows,
                cols,
                entries,
                missing: Missing::Unobserved,
            }
        }
        Dataset::Text(c) => {
            let vocab = c.vocabulary();
            let index: BTreeMap<&str, usize> = vocab.iter().enumerate().map(|(i, t)| (*t, i)).collect();
            let cols = vocab.iter().map(|t| ColKey::Term((*t).to_owned())).collect();
            let mut rows = Vec::with_capacity(c.len());
            let mut entries = Vec::with_capacity(c.len());
            for (id, doc) in c.docs() {
                rows.push(id);
                entries.push(
                    doc.terms
                        .iter()
                        .map(|(t, n)| (index[t.as_str()], T::of(f64::from(*n))))
                        .collect(),
                );
            }
            NumericDataset {
                rows,
                cols,
                entries,
                missing: Missing::Zero,
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ratings(text: &str) -> Result<RatingMatrix> {
        RatingMatrix::parse(text.as_bytes(), Path::new("mem.csv"), RatingScale::default())
    }

    fn corpus(text: &str) -> Result<Corpus> {
        Corpus::parse(text.as_bytes(), Path::new("mem.tsv"))
    }

    #[test]
    fn loads_rating_triples() {
        let m = ratings("1,10,4.0\n2,10,3.0\n").unwrap();
        assert_eq!(m.user_count(), 2);
        assert_eq!(m.item_count(), 1);
        assert_eq!(m.rating_count(), 2);
        assert_eq!(m.user(2).unwrap()[&10], 3.0);
    }

    #[test]
    fn empty_ratings_file() {
        let m = ratings("").unwrap();
        assert_eq!((m.user_count(), m.item_count()), (0, 0));
    }

    #[test]
    fn duplicate_rating_rejected() {
        assert!(matches!(ratings("1,10,4.0\n1,10,4.0\n"), Err(Error::Duplicate(_))));
    }

    #[test]
    fn malformed_line_names_line_number() {
        match ratings("1,10,4.0\n1,x,4.0\n") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
        assert!(matches!(ratings("1,10\n"), Err(Error::Parse { line: 1, .. })));
    }

    #[test]
    fn out_of_scale_rating_is_load_error() {
        assert!(matches!(ratings("1,10,7.5\n"), Err(Error::Parse { line: 1, .. })));
    }

    #[test]
    fn counts_term_occurrences() {
        let c = corpus("d1\ta b a\n").unwrap();
        let d1 = c.get(c.id_of("d1").unwrap()).unwrap();
        assert_eq!(d1.terms, TermCounts::from([("a".into(), 2), ("b".into(), 1)]));
    }

    #[test]
    fn vocabulary_is_union() {
        let c = corpus("d1\ta b\nd2\tc d\n").unwrap();
        assert_eq!(c.vocabulary(), BTreeSet::from(["a", "b", "c", "d"]));
    }

    #[test]
    fn corpus_errors() {
        assert!(matches!(corpus("d1\t\n"), Err(Error::Parse { line: 1, .. })));
        assert!(matches!(corpus("d1\ta\nd1\tb\n"), Err(Error::Duplicate(_))));
    }

    #[test]
    fn tokenization_lowercases() {
        assert_eq!(tokenize("A a  B"), TermCounts::from([("a".into(), 2), ("b".into(), 1)]));
    }

    fn users(n: u64) -> Dataset {
        let mut m = RatingMatrix::new(RatingScale::default());
        for u in 0..n {
            m.insert(u, 1, 3.0).unwrap();
        }
        Dataset::Ratings(m)
    }

    #[test]
    fn partition_sizes() {
        let parts = partition(&users(6), 3).unwrap();
        assert!(parts.iter().all(|p| p.len() == 2));

        let mut c = Corpus::new();
        for i in 0..7 {
            c.insert(i, Document::from_text(format!("d{i}"), "x")).unwrap();
        }
        let sizes: Vec<usize> = partition(&Dataset::Text(c), 3)
            .unwrap()
            .iter()
            .map(Subset::len)
            .collect();
        assert_eq!(sizes, vec![3, 2, 2]);

        let data = users(5);
        let single = partition(&data, 1).unwrap();
        assert_eq!(single[0].data, data);
    }

    #[test]
    fn partition_errors() {
        assert!(partition(&users(2), 3).is_err());
        assert!(partition(&users(2), 0).is_err());
        assert!(partition(&Dataset::Ratings(RatingMatrix::default()), 1).is_err());
    }

    #[test]
    fn vectorize_text_counts() {
        let c = corpus("d1\ta b a\nd2\tb b b\n").unwrap();
        let subset = Subset {
            component_id: 0,
            data: Dataset::Text(c),
        };
        let ds = vectorize::<f64>(&subset);
        assert_eq!(ds.cols, vec![ColKey::Term("a".into()), ColKey::Term("b".into())]);
        assert_eq!(ds.to_dense(), vec![vec![2.0, 1.0], vec![0.0, 3.0]]);
        assert_eq!(ds.missing, Missing::Zero);
    }

    #[test]
    fn vectorize_numeric_and_empty() {
        let m = ratings("1,10,4.0\n1,11,2.0\n2,11,5.0\n").unwrap();
        let ds = vectorize::<f32>(&Subset {
            component_id: 0,
            data: Dataset::Ratings(m),
        });
        assert_eq!(ds.rows, vec![1, 2]);
        assert_eq!(ds.entries[0], vec![(0, 4.0), (1, 2.0)]);
        assert_eq!(ds.entries[1], vec![(1, 5.0)]);
        assert_eq!(ds.missing, Missing::Unobserved);

        let empty = vectorize::<f64>(&Subset {
            component_id: 0,
            data: Dataset::Text(Corpus::new()),
        });
        assert_eq!(empty.shape(), (0, 0));
    }

    #[test]
    fn corpus_tsv_round_trip() {
        let c = corpus("d1\tb a a\nd2\tz\n").unwrap();
        assert_eq!(corpus(&c.to_tsv()).unwrap(), c);
    }
}

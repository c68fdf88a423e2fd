//! Synopsis creation and incremental updating.
//!
//! Creation: vectorize → reduce → R-tree → depth selection → index file →
//! aggregation. Updating re-projects changed points against the frozen
//! column factors, moves them in the R-tree and recomputes only the
//! aggregated points whose members or member contents changed.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::time::{Duration, Instant};

use crate::dataset::{
    point_entries, vectorize, Corpus, DataKind, Dataset, Document, ItemId, PointContent, PointId, RatingMatrix,
    RatingScale, Subset, TermCounts, UserRatings,
};
use crate::dimred::{self, FeatureMatrix, SvdConfig};
use crate::error::{Error, Result};
use crate::spatial::{self, AggId, IndexFile, RTree, ReducedPoint};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ItemAggregate {
    pub mean: f64,
    pub count: u32,
}

/// Per-item mean rating over the members that rated the item.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct AggregatedUser {
    pub ratings: BTreeMap<ItemId, ItemAggregate>,
}

impl AggregatedUser {
    pub fn means(&self) -> BTreeMap<ItemId, f64> {
        self.ratings.iter().map(|(i, a)| (*i, a.mean)).collect()
    }
}

/// Merged term counts of the member pages.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct AggregatedPage {
    pub terms: BTreeMap<String, u64>,
    pub pages: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Payload {
    User(AggregatedUser),
    Page(AggregatedPage),
}

#[derive(Clone, Debug, PartialEq)]
pub struct AggregatedPoint {
    pub id: AggId,
    pub payload: Payload,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Synopsis {
    pub component_id: usize,
    pub version: u64,
    /// Sorted by id.
    pub points: Vec<AggregatedPoint>,
}

impl Synopsis {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn get(&self, id: AggId) -> Option<&AggregatedPoint> {
        self.points
            .binary_search_by_key(&id, |p| p.id)
            .ok()
            .map(|i| &self.points[i])
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let kind = match self.points.first().map(|p| &p.payload) {
            Some(Payload::Page(_)) => "text",
            _ => "numeric",
        };
        let _ = writeln!(
            out,
            "synopsis v1 {kind} component {} version {}",
            self.component_id, self.version
        );
        for p in &self.points {
            let _ = write!(out, "{}", p.id);
            match &p.payload {
                Payload::User(u) => {
                    for (item, a) in &u.ratings {
                        let _ = write!(out, " {item}:{}:{}", a.mean, a.count);
                    }
                }
                Payload::Page(pg) => {
                    for (term, n) in &pg.terms {
                        let _ = write!(out, " {term}:{n}");
                    }
                }
            }
            out.push('\n');
        }
        out
    }

    /// Parses [`Synopsis::to_text`]; page counts come from the index file.
    pub fn from_text(text: &str, index: &IndexFile) -> Result<Self> {
        let bad = |line: usize, why: &str| Error::Invalid(format!("synopsis line {line}: {why}"));
        let mut lines = text.lines();
        let header: Vec<&str> = lines.next().unwrap_or_default().split(' ').collect();
        if header.len() != 7 || header[0] != "synopsis" || header[1] != "v1" {
            return Err(bad(1, "malformed header"));
        }
        let text_kind = match header[2] {
            "numeric" => false,
            "text" => true,
            _ => return Err(bad(1, "unknown kind")),
        };
        let component_id = header[4].parse().map_err(|_| bad(1, "component"))?;
        let version = header[6].parse().map_err(|_| bad(1, "version"))?;
        let mut points = Vec::new();
        for (i, line) in lines.enumerate() {
            let lineno = i + 2;
            let mut tokens = line.split(' ');
            let id: AggId = tokens
                .next()
                .and_then(|t| t.parse().ok())
                .ok_or_else(|| bad(lineno, "aggregated point id"))?;
            let payload = if text_kind {
                let mut terms = BTreeMap::new();
                for tok in tokens {
                    let (term, n) = tok.rsplit_once(':').ok_or_else(|| bad(lineno, "term:count"))?;
                    terms.insert(term.to_owned(), n.parse().map_err(|_| bad(lineno, "count"))?);
                }
                let pages = index
                    .members(id)
                    .ok_or_else(|| bad(lineno, "aggregated point missing from index"))?
                    .len();
                Payload::Page(AggregatedPage { terms, pages })
            } else {
                let mut ratings = BTreeMap::new();
                for tok in tokens {
                    let mut f = tok.split(':');
                    let (Some(item), Some(mean), Some(count), None) = (f.next(), f.next(), f.next(), f.next()) else {
                        return Err(bad(lineno, "item:mean:count"));
                    };
                    ratings.insert(
                        item.parse().map_err(|_| bad(lineno, "item"))?,
                        ItemAggregate {
                            mean: mean.parse().map_err(|_| bad(lineno, "mean"))?,
                            count: count.parse().map_err(|_| bad(lineno, "count"))?,
                        },
                    );
                }
                Payload::User(AggregatedUser { ratings })
            };
            points.push(AggregatedPoint { id, payload });
        }
        Ok(Synopsis {
            component_id,
            version,
            points,
        })
    }
}

pub fn aggregate_numeric(members: &BTreeSet<PointId>, matrix: &RatingMatrix) -> AggregatedUser {
    let mut sums: BTreeMap<ItemId, (f64, u32)> = BTreeMap::new();
    for m in members {
        if let Some(row) = matrix.user(*m) {
            for (item, r) in row {
                let e = sums.entry(*item).or_default();
                e.0 += r;
                e.1 += 1;
            }
        }
    }
    AggregatedUser {
        ratings: sums
            .into_iter()
            .map(|(item, (sum, count))| {
                (
                    item,
                    ItemAggregate {
                        mean: sum / f64::from(count),
                        count,
                    },
                )
            })
            .collect(),
    }
}

pub fn aggregate_text(members: &BTreeSet<PointId>, corpus: &Corpus) -> AggregatedPage {
    let mut terms: BTreeMap<String, u64> = BTreeMap::new();
    let mut pages = 0;
    for m in members {
        if let Some(doc) = corpus.get(*m) {
            pages += 1;
            for (t, n) in &doc.terms {
                *terms.entry(t.clone()).or_default() += u64::from(*n);
            }
        }
    }
    AggregatedPage { terms, pages }
}

pub fn aggregate(members: &BTreeSet<PointId>, data: &Dataset) -> Payload {
    match data {
        Dataset::Ratings(m) => Payload::User(aggregate_numeric(members, m)),
        Dataset::Text(c) => Payload::Page(aggregate_text(members, c)),
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SynopsisConfig {
    pub svd: SvdConfig<f64>,
    /// Target ratio of subset size to synopsis size.
    pub compression_ratio: f64,
    pub min_entries: usize,
    pub max_entries: usize,
    /// Re-run the full creation pipeline on update instead of projecting.
    pub full_rereduce: bool,
}

impl Default for SynopsisConfig {
    fn default() -> Self {
        SynopsisConfig {
            svd: SvdConfig::default(),
            compression_ratio: 100.0,
            min_entries: spatial::DEFAULT_MIN_ENTRIES,
            max_entries: spatial::DEFAULT_MAX_ENTRIES,
            full_rereduce: false,
        }
    }
}

impl SynopsisConfig {
    pub fn validate(&self) -> Result<()> {
        self.svd.validate()?;
        if !(self.compression_ratio > 1.0) {
            return Err(Error::Invalid("compression_ratio must be > 1".into()));
        }
        RTree::<f64>::new(self.svd.dims, self.min_entries, self.max_entries).map(|_| ())
    }
}

/// Everything one component keeps for serving and for incremental updates.
#[derive(Clone, Debug, PartialEq)]
pub struct SynopsisState {
    pub subset: Subset,
    pub features: FeatureMatrix<f64>,
    pub tree: RTree<f64>,
    /// Selected level counted from the leaves; stable across root splits.
    pub level: usize,
    pub index: IndexFile,
    pub synopsis: Synopsis,
}

impl SynopsisState {
    pub fn depth(&self) -> usize {
        self.tree.height() - 1 - self.level
    }

    /// Size bound `subset_size / compression_ratio`.
    pub fn size_bound(&self, cfg: &SynopsisConfig) -> f64 {
        self.subset.len() as f64 / cfg.compression_ratio
    }

    /// Cross-checks subset, features, tree, index file and synopsis.
    pub fn check_consistency(&self) -> std::result::Result<(), String> {
        let universe: BTreeSet<PointId> = self.subset.data.point_ids().into_iter().collect();
        let tree_ids: BTreeSet<PointId> = self.tree.point_ids().collect();
        if tree_ids != universe {
            return Err("R-tree members differ from subset".into());
        }
        let feature_ids: BTreeSet<PointId> = self.features.rows().map(|(id, _)| id).collect();
        if feature_ids != universe {
            return Err("feature rows differ from subset".into());
        }
        if !self.index.is_partition_of(&universe) {
            return Err("index file does not partition the subset".into());
        }
        self.tree.check_invariants()?;
        if self.index.depth != self.depth() {
            return Err("index depth does not match selected level".into());
        }
        let expected = spatial::index_at_depth(&self.tree, self.depth()).map_err(|e| e.to_string())?;
        if expected != self.index {
            return Err("index file does not match the R-tree".into());
        }
        let ids: Vec<AggId> = self.synopsis.points.iter().map(|p| p.id).collect();
        let index_ids: Vec<AggId> = self.index.entries.keys().copied().collect();
        if ids != index_ids {
            return Err("synopsis ids differ from index ids".into());
        }
        for p in &self.synopsis.points {
            if aggregate(&self.index.entries[&p.id], &self.subset.data) != p.payload {
                return Err(format!("aggregated point {} is stale", p.id));
            }
        }
        Ok(())
    }
}

fn aggregate_all(index: &IndexFile, data: &Dataset) -> Vec<AggregatedPoint> {
    index
        .entries
        .iter()
        .map(|(id, ms)| AggregatedPoint {
            id: *id,
            payload: aggregate(ms, data),
        })
        .collect()
}

pub fn create(subset: &Subset, cfg: &SynopsisConfig) -> Result<SynopsisState> {
    create_timed(subset, cfg).map(|(state, _)| state)
}

/// Wall time spent in each creation step.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct StepTimings {
    pub reduce: Duration,
    pub index: Duration,
    pub aggregate: Duration,
}

/// [`create`] that also reports how long reduction, R-tree construction
/// with depth selection, and aggregation took.
pub fn create_timed(subset: &Subset, cfg: &SynopsisConfig) -> Result<(SynopsisState, StepTimings)> {
    cfg.validate()?;
    if subset.is_empty() {
        return Err(Error::Invalid(format!(
            "component {} has an empty subset",
            subset.component_id
        )));
    }
    let mut timings = StepTimings::default();
    let start = Instant::now();
    let data = vectorize::<f64>(subset);
    let features = dimred::reduce(&data, &cfg.svd)?;
    timings.reduce = start.elapsed();

    let start = Instant::now();
    let points = features
        .rows()
        .map(|(id, f)| ReducedPoint::new(id, f.to_vec()))
        .collect();
    let tree = spatial::build(points, cfg.min_entries, cfg.max_entries)?;
    let depth = spatial::select_depth(&tree, subset.len(), cfg.compression_ratio);
    let index = spatial::index_at_depth(&tree, depth)?;
    timings.index = start.elapsed();

    let start = Instant::now();
    let synopsis = Synopsis {
        component_id: subset.component_id,
        version: 0,
        points: aggregate_all(&index, &subset.data),
    };
    timings.aggregate = start.elapsed();
    Ok((
        SynopsisState {
            subset: subset.clone(),
            features,
            level: tree.height() - 1 - depth,
            tree,
            index,
            synopsis,
        },
        timings,
    ))
}

/// New points and replacement contents for existing points.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ChangeSet {
    pub added: Vec<(PointId, PointContent)>,
    pub modified: Vec<(PointId, PointContent)>,
}

impl ChangeSet {
    pub fn is_empty(&self) -> bool {
        self.added.is_empty() && self.modified.is_empty()
    }

    pub fn len(&self) -> usize {
        self.added.len() + self.modified.len()
    }
}

fn content_to_text(content: &PointContent) -> String {
    let mut out = String::new();
    match content {
        PointContent::Ratings(r) => {
            for (i, (item, rating)) in r.iter().enumerate() {
                let _ = write!(out, "{}{item}:{rating}", if i == 0 { "" } else { " " });
            }
        }
        PointContent::Document(doc) => {
            let _ = write!(out, "{}\t", doc.name);
            for (i, (term, n)) in doc.terms.iter().enumerate() {
                let _ = write!(out, "{}{term}:{n}", if i == 0 { "" } else { " " });
            }
        }
    }
    out
}

impl ChangeSet {
    /// One change per line: `add|modify<TAB>id<TAB>payload`, where the
    /// payload is `item:rating ...` for ratings and
    /// `name<TAB>term:count ...` for pages.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (op, list) in [("add", &self.added), ("modify", &self.modified)] {
            for (id, content) in list {
                let _ = writeln!(out, "{op}\t{id}\t{}", content_to_text(content));
            }
        }
        out
    }

    pub fn parse(text: &str, kind: DataKind, origin: &Path) -> Result<Self> {
        let mut changes = ChangeSet::default();
        for (idx, line) in text.lines().enumerate() {
            let lineno = idx + 1;
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let bad = |m: &str| Error::parse(origin, lineno, m.to_owned());
            let mut f = line.splitn(3, '\t');
            let (op, id, payload) = (f.next().unwrap_or(""), f.next(), f.next());
            let id: PointId = id
                .and_then(|v| v.trim().parse().ok())
                .ok_or_else(|| bad("bad point id"))?;
            let payload = payload.ok_or_else(|| bad("missing payload"))?;
            let content = match kind {
                DataKind::Numeric => {
                    let mut r = UserRatings::new();
                    for pair in payload.split_whitespace() {
                        let (item, rating) = pair.split_once(':').ok_or_else(|| bad("expected item:rating"))?;
                        let item = item.parse().map_err(|_| bad("bad item id"))?;
                        let rating: f64 = rating.parse().map_err(|_| bad("bad rating"))?;
                        if !rating.is_finite() {
                            return Err(bad("rating must be finite"));
                        }
                        r.insert(item, rating);
                    }
                    PointContent::Ratings(r)
                }
                DataKind::Text => {
                    let (name, terms) = payload.split_once('\t').ok_or_else(|| bad("expected name<TAB>terms"))?;
                    let mut counts = TermCounts::new();
                    for pair in terms.split_whitespace() {
                        let (term, n) = pair.rsplit_once(':').ok_or_else(|| bad("expected term:count"))?;
                        let n: u32 = n.parse().map_err(|_| bad("bad term count"))?;
                        if n > 0 {
                            *counts.entry(term.to_owned()).or_default() += n;
                        }
                    }
                    PointContent::Document(Document {
                        name: name.to_owned(),
                        terms: counts,
                    })
                }
            };
            match op {
                "add" => changes.added.push((id, content)),
                "modify" => changes.modified.push((id, content)),
                _ => return Err(bad("operation must be `add` or `modify`")),
            }
        }
        Ok(changes)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct UpdateReport {
    pub added: usize,
    pub modified: usize,
    /// Aggregated points whose payload was recomputed.
    pub recomputed: usize,
    /// R-tree nodes reported as influenced by the insertions/deletions.
    pub influenced_nodes: usize,
    pub depth_reselected: bool,
}

fn validate_changes(data: &Dataset, changes: &ChangeSet) -> Result<Dataset> {
    let mut seen = BTreeSet::new();
    for (id, content) in &changes.added {
        if data.contains(*id) {
            return Err(Error::Duplicate(format!("added point {id} already exists")));
        }
        if !seen.insert(*id) {
            return Err(Error::Duplicate(format!("point {id} appears twice in change set")));
        }
        if content.kind() != data.kind() {
            return Err(Error::Invalid(format!("added point {id} has the wrong kind")));
        }
    }
    for (id, content) in &changes.modified {
        if !data.contains(*id) {
            return Err(Error::UnknownPoint(*id));
        }
        if !seen.insert(*id) {
            return Err(Error::Duplicate(format!("point {id} appears twice in change set")));
        }
        if content.kind() != data.kind() {
            return Err(Error::Invalid(format!("modified point {id} has the wrong kind")));
        }
    }
    let mut next = data.clone();
    for (id, content) in changes.modified.iter().chain(&changes.added) {
        if let PointContent::Ratings(r) = content {
            if r.is_empty() {
                return Err(Error::Invalid(format!("point {id} has no ratings")));
            }
        }
        next.upsert(*id, content.clone())?;
    }
    Ok(next)
}

/// Applies a change set and returns the next state version; the input
/// state is left untouched, including on error.
pub fn update(
    state: &SynopsisState,
    changes: &ChangeSet,
    cfg: &SynopsisConfig,
) -> Result<(SynopsisState, UpdateReport)> {
    let data = validate_changes(&state.subset.data, changes)?;
    let mut report = UpdateReport {
        added: changes.added.len(),
        modified: changes.modified.len(),
        ..UpdateReport::default()
    };
    if changes.is_empty() {
        let mut next = state.clone();
        next.synopsis.version += 1;
        return Ok((next, report));
    }
    let subset = Subset {
        component_id: state.subset.component_id,
        data,
    };
    if cfg.full_rereduce {
        let mut next = create(&subset, cfg)?;
        next.synopsis.version = state.synopsis.version + 1;
        report.recomputed = next.synopsis.len();
        report.depth_reselected = true;
        return Ok((next, report));
    }

    let mut features = state.features.clone();
    let mut tree = state.tree.clone();
    let mut influenced = BTreeSet::new();
    let mut changed: BTreeSet<PointId> = BTreeSet::new();
    {
        let cols = features.col_index();
        let mut moves = Vec::with_capacity(changes.len());
        for (id, content) in changes.modified.iter().chain(&changes.added) {
            let coords = features.project(&point_entries::<f64>(content, &cols));
            moves.push((*id, coords));
        }
        drop(cols);
        let modified: BTreeSet<PointId> = changes.modified.iter().map(|(id, _)| *id).collect();
        for (id, coords) in moves {
            if modified.contains(&id) {
                influenced.extend(tree.delete(id)?);
            }
            influenced.extend(tree.insert(ReducedPoint::new(id, coords.clone()))?);
            features.set_row(id, coords);
            changed.insert(id);
        }
    }
    report.influenced_nodes = influenced.len();

    let size = subset.len();
    let bound = size as f64 / cfg.compression_ratio;
    let mut level = state.level;
    let drifted = level >= tree.height() || {
        let count = tree.nodes_at_level(level).len() as f64;
        count < 0.5 * bound || count > 2.0 * bound
    };
    if drifted {
        let depth = spatial::select_depth(&tree, size, cfg.compression_ratio);
        let selected = tree.height() - 1 - depth;
        if selected != level {
            level = selected;
            report.depth_reselected = true;
        }
    }
    let index = spatial::index_at_depth(&tree, tree.height() - 1 - level)?;

    let points = if report.depth_reselected {
        report.recomputed = index.len();
        aggregate_all(&index, &subset.data)
    } else {
        index
            .entries
            .iter()
            .map(|(id, members)| {
                let untouched = state.index.members(*id) == Some(members) && members.is_disjoint(&changed);
                match state.synopsis.get(*id) {
                    Some(old) if untouched => old.clone(),
                    _ => {
                        report.recomputed += 1;
                        AggregatedPoint {
                            id: *id,
                            payload: aggregate(members, &subset.data),
                        }
                    }
                }
            })
            .collect()
    };

    let next = SynopsisState {
        synopsis: Synopsis {
            component_id: subset.component_id,
            version: state.synopsis.version + 1,
            points,
        },
        subset,
        features,
        tree,
        level,
        index,
    };
    Ok((next, report))
}

const STATE_FILE: &str = "state.txt";
const SUBSET_FILE: &str = "subset.txt";
const FEATURES_FILE: &str = "features.txt";
const FEATURES_CSV: &str = "features.csv";
const RTREE_FILE: &str = "rtree.txt";
const INDEX_FILE: &str = "index.csv";
const SYNOPSIS_FILE: &str = "synopsis.txt";

fn write(dir: &Path, name: &str, contents: &str) -> Result<()> {
    let path = dir.join(name);
    fs::write(&path, contents).map_err(|e| Error::io(path, e))
}

fn read(dir: &Path, name: &str) -> Result<String> {
    let path = dir.join(name);
    fs::read_to_string(&path).map_err(|e| Error::io(path, e))
}

fn subset_to_text(subset: &Subset) -> String {
    let mut out = String::new();
    match &subset.data {
        Dataset::Ratings(m) => {
            let s = m.scale();
            let _ = writeln!(out, "ratings {} {}", s.min, s.max);
            out.push_str(&m.to_csv());
        }
        Dataset::Text(c) => {
            let _ = writeln!(out, "corpus");
            for (id, doc) in c.docs() {
                let _ = write!(out, "{id}\t{}\t", doc.name);
                let mut first = true;
                for (term, n) in &doc.terms {
                    if !first {
                        out.push(' ');
                    }
                    first = false;
                    let _ = write!(out, "{term}:{n}");
                }
                out.push('\n');
            }
        }
    }
    out
}

fn subset_from_text(text: &str, component_id: usize, origin: &Path) -> Result<Subset> {
    let (header, body) = text.split_once('\n').unwrap_or((text, ""));
    let h: Vec<&str> = header.split(' ').collect();
    let data = match h.as_slice() {
        ["ratings", min, max] => {
            let scale = RatingScale {
                min: min.parse().map_err(|_| Error::parse(origin, 1, "scale"))?,
                max: max.parse().map_err(|_| Error::parse(origin, 1, "scale"))?,
            };
            Dataset::Ratings(RatingMatrix::parse(body.as_bytes(), origin, scale)?)
        }
        ["corpus"] => {
            let mut corpus = Corpus::new();
            for (i, line) in body.lines().enumerate() {
                let lineno = i + 2;
                let f: Vec<&str> = line.splitn(3, '\t').collect();
                if f.len() != 3 {
                    return Err(Error::parse(origin, lineno, "expected `id<TAB>name<TAB>terms`"));
                }
                let id: PointId = f[0].parse().map_err(|_| Error::parse(origin, lineno, "id"))?;
                let mut terms = BTreeMap::new();
                for tok in f[2].split(' ').filter(|t| !t.is_empty()) {
                    let (t, n) = tok
                        .rsplit_once(':')
                        .ok_or_else(|| Error::parse(origin, lineno, "term:count"))?;
                    terms.insert(
                        t.to_owned(),
                        n.parse().map_err(|_| Error::parse(origin, lineno, "count"))?,
                    );
                }
                corpus.insert(
                    id,
                    Document {
                        name: f[1].to_owned(),
                        terms,
                    },
                )?;
            }
            Dataset::Text(corpus)
        }
        _ => return Err(Error::parse(origin, 1, "unknown subset kind")),
    };
    Ok(Subset { component_id, data })
}

/// Persists a state into `dir` (created if needed).
pub fn save_state(state: &SynopsisState, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let kind = match state.subset.kind() {
        DataKind::Numeric => "numeric",
        DataKind::Text => "text",
    };
    write(
        dir,
        STATE_FILE,
        &format!(
            "component {}\nkind {kind}\nlevel {}\ndepth {}\nversion {}\n",
            state.subset.component_id,
            state.level,
            state.depth(),
            state.synopsis.version
        ),
    )?;
    write(dir, SUBSET_FILE, &subset_to_text(&state.subset))?;
    write(dir, FEATURES_FILE, &state.features.to_text())?;
    write(dir, FEATURES_CSV, &state.features.rows_csv())?;
    write(dir, RTREE_FILE, &state.tree.to_text())?;
    write(dir, INDEX_FILE, &state.index.to_csv())?;
    write(dir, SYNOPSIS_FILE, &state.synopsis.to_text())?;
    Ok(())
}

pub fn load_state(dir: &Path) -> Result<SynopsisState> {
    let meta = read(dir, STATE_FILE)?;
    let field = |key: &str| -> Result<usize> {
        meta.lines()
            .find_map(|l| l.strip_prefix(key).and_then(|v| v.trim().parse().ok()))
            .ok_or_else(|| Error::Invalid(format!("{}: missing `{key}`", dir.join(STATE_FILE).display())))
    };
    let component_id = field("component ")?;
    let level = field("level ")?;
    let subset = subset_from_text(&read(dir, SUBSET_FILE)?, component_id, &dir.join(SUBSET_FILE))?;
    let features = FeatureMatrix::from_text(&read(dir, FEATURES_FILE)?)?;
    let tree = RTree::from_text(&read(dir, RTREE_FILE)?)?;
    if level >= tree.height() {
        return Err(Error::Invalid("state level exceeds tree height".into()));
    }
    let index = IndexFile::from_csv(&read(dir, INDEX_FILE)?, tree.height() - 1 - level)?;
    let synopsis = Synopsis::from_text(&read(dir, SYNOPSIS_FILE)?, &index)?;
    Ok(SynopsisState {
        subset,
        features,
        tree,
        level,
        index,
        synopsis,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::UserRatings;

    fn matrix(rows: &[(PointId, &[(ItemId, f64)])]) -> RatingMatrix {
        let mut m = RatingMatrix::new(RatingScale::default());
        for (u, rs) in rows {
            for (i, r) in *rs {
                m.insert(*u, *i, *r).unwrap();
            }
        }
        m
    }

    #[test]
    fn numeric_aggregation_rules() {
        let m = matrix(&[(1, &[(9, 4.0)])]);
        let a = aggregate_numeric(&BTreeSet::from([1]), &m);
        assert_eq!(a.ratings[&9], ItemAggregate { mean: 4.0, count: 1 });

        let m = matrix(&[(1, &[(9, 2.0)]), (2, &[(9, 4.0)])]);
        let a = aggregate_numeric(&BTreeSet::from([1, 2]), &m);
        assert_eq!(a.ratings[&9], ItemAggregate { mean: 3.0, count: 2 });

        // Non-raters of item 9 are excluded from its mean.
        let m = matrix(&[(1, &[(9, 5.0)]), (2, &[(8, 1.0)]), (3, &[(9, 3.0)])]);
        let a = aggregate_numeric(&BTreeSet::from([1, 2, 3]), &m);
        assert_eq!(a.ratings[&9], ItemAggregate { mean: 4.0, count: 2 });
        assert_eq!(a.ratings[&8], ItemAggregate { mean: 1.0, count: 1 });
    }

    fn corpus(docs: &[(&str, &str)]) -> Corpus {
        let mut c = Corpus::new();
        for (i, (name, body)) in docs.iter().enumerate() {
            c.insert(i as PointId, Document::from_text(*name, body)).unwrap();
        }
        c
    }

    #[test]
    fn text_aggregation_rules() {
        let c = corpus(&[("d1", "a a"), ("d2", "a b b b")]);
        let p = aggregate_text(&BTreeSet::from([0, 1]), &c);
        assert_eq!(p.terms, BTreeMap::from([("a".into(), 3), ("b".into(), 3)]));
        assert_eq!(p.pages, 2);

        let single = aggregate_text(&BTreeSet::from([1]), &c);
        assert_eq!(single.terms, BTreeMap::from([("a".into(), 1), ("b".into(), 3)]));

        let c = corpus(&[("d1", "x"), ("d2", "y y")]);
        let p = aggregate_text(&BTreeSet::from([0, 1]), &c);
        assert_eq!(p.terms, BTreeMap::from([("x".into(), 1), ("y".into(), 2)]));
    }

    /// 12 users × 5 items in two groups with opposite tastes.
    fn twelve_by_five() -> Subset {
        let mut m = RatingMatrix::new(RatingScale::default());
        for u in 0..12u64 {
            let group = u % 2;
            for item in 0..5u64 {
                let base = if (item < 3) == (group == 0) { 5.0 } else { 1.5 };
                let wobble = ((u * 7 + item * 3) % 5) as f64 * 0.1;
                m.insert(u, item, base - wobble).unwrap();
            }
        }
        Subset {
            component_id: 0,
            data: Dataset::Ratings(m),
        }
    }

    #[test]
    fn creates_two_aggregates_of_six() {
        let cfg = SynopsisConfig {
            svd: SvdConfig {
                dims: 2,
                ..SvdConfig::default()
            },
            compression_ratio: 6.0,
            min_entries: 4,
            max_entries: 8,
            ..SynopsisConfig::default()
        };
        let state = create(&twelve_by_five(), &cfg).unwrap();
        state.check_consistency().unwrap();
        assert_eq!(state.synopsis.len(), 2);
        for members in state.index.entries.values() {
            assert_eq!(members.len(), 6);
            // Each aggregate holds one taste group.
            assert_eq!(members.iter().map(|u| u % 2).collect::<BTreeSet<_>>().len(), 1);
        }
    }

    #[test]
    fn small_subset_yields_single_aggregate() {
        let state = create(&twelve_by_five(), &SynopsisConfig::default()).unwrap();
        assert_eq!(state.depth(), 0);
        assert_eq!(state.synopsis.len(), 1);
        state.check_consistency().unwrap();
    }

    #[test]
    fn constant_item_rating_aggregates_to_constant() {
        let mut subset = twelve_by_five();
        if let Dataset::Ratings(m) = &mut subset.data {
            for u in 0..12 {
                let mut row: UserRatings = m.user(u).unwrap().clone();
                row.insert(99, 4.0);
                m.set_user(u, row).unwrap();
            }
        }
        let cfg = SynopsisConfig {
            compression_ratio: 3.0,
            ..SynopsisConfig::default()
        };
        let state = create(&subset, &cfg).unwrap();
        for p in &state.synopsis.points {
            let Payload::User(u) = &p.payload else { panic!() };
            assert_eq!(u.ratings[&99].mean, 4.0);
        }
    }

    #[test]
    fn empty_change_set_bumps_version_only() {
        let cfg = SynopsisConfig {
            compression_ratio: 3.0,
            ..SynopsisConfig::default()
        };
        let state = create(&twelve_by_five(), &cfg).unwrap();
        let (next, report) = update(&state, &ChangeSet::default(), &cfg).unwrap();
        assert_eq!(next.synopsis.version, 1);
        assert_eq!(report.recomputed, 0);
        let mut expect = state.clone();
        expect.synopsis.version = 1;
        assert_eq!(next, expect);
    }

    #[test]
    fn invalid_change_sets_rejected() {
        let cfg = SynopsisConfig::default();
        let state = create(&twelve_by_five(), &cfg).unwrap();
        let ratings = PointContent::Ratings(UserRatings::from([(1, 3.0)]));
        let dup = ChangeSet {
            added: vec![(3, ratings.clone())],
            ..ChangeSet::default()
        };
        assert!(update(&state, &dup, &cfg).is_err());
        let unknown = ChangeSet {
            modified: vec![(77, ratings.clone())],
            ..ChangeSet::default()
        };
        assert!(matches!(update(&state, &unknown, &cfg), Err(Error::UnknownPoint(77))));
        let wrong_kind = ChangeSet {
            added: vec![(50, PointContent::Document(Document::from_text("d", "a")))],
            ..ChangeSet::default()
        };
        assert!(update(&state, &wrong_kind, &cfg).is_err());
        let out_of_scale = ChangeSet {
            added: vec![(50, PointContent::Ratings(UserRatings::from([(1, 9.0)])))],
            ..ChangeSet::default()
        };
        assert!(update(&state, &out_of_scale, &cfg).is_err());
    }

    #[test]
    fn update_keeps_consistency() {
        let cfg = SynopsisConfig {
            compression_ratio: 3.0,
            min_entries: 2,
            max_entries: 4,
            ..SynopsisConfig::default()
        };
        let mut state = create(&twelve_by_five(), &cfg).unwrap();
        for step in 0..10u64 {
            let changes = ChangeSet {
                added: vec![(
                    100 + step,
                    PointContent::Ratings(UserRatings::from([(0, 5.0), (1, 4.0), (4, 1.0)])),
                )],
                modified: vec![(
                    step % 12,
                    PointContent::Ratings(UserRatings::from([(2, 2.0), (3, 5.0)])),
                )],
            };
            let (next, _) = update(&state, &changes, &cfg).unwrap();
            next.check_consistency().unwrap();
            state = next;
        }
        assert_eq!(state.synopsis.version, 10);
        assert_eq!(state.subset.len(), 22);
    }

    #[test]
    fn full_rereduce_flag() {
        let cfg = SynopsisConfig {
            compression_ratio: 3.0,
            full_rereduce: true,
            ..SynopsisConfig::default()
        };
        let state = create(&twelve_by_five(), &cfg).unwrap();
        let changes = ChangeSet {
            added: vec![(40, PointContent::Ratings(UserRatings::from([(0, 5.0)])))],
            ..ChangeSet::default()
        };
        let (next, report) = update(&state, &changes, &cfg).unwrap();
        next.check_consistency().unwrap();
        assert_eq!(report.recomputed, next.synopsis.len());
        assert_eq!(next.synopsis.version, 1);
    }

    #[test]
    fn persistence_round_trip() {
        let dir = std::env::temp_dir().join(format!("at-synopsis-{}", std::process::id()));
        let cfg = SynopsisConfig {
            compression_ratio: 3.0,
            ..SynopsisConfig::default()
        };
        let state = create(&twelve_by_five(), &cfg).unwrap();
        save_state(&state, &dir).unwrap();
        assert_eq!(load_state(&dir).unwrap(), state);

        let text = Subset {
            component_id: 3,
            data: Dataset::Text(corpus(&[("d1", "a b a"), ("d:2", "c:x d"), ("d3", "a d e")])),
        };
        let state = create(&text, &SynopsisConfig::default()).unwrap();
        save_state(&state, &dir).unwrap();
        assert_eq!(load_state(&dir).unwrap(), state);
        let _ = fs::remove_dir_all(&dir);
    }

    #[test]
    fn change_file_round_trip() {
        let mut r = UserRatings::new();
        r.insert(3, 4.5);
        r.insert(7, 1.0);
        let mut terms = TermCounts::new();
        terms.insert("fast".into(), 2);
        let ratings = ChangeSet {
            added: vec![(10, PointContent::Ratings(r.clone()))],
            modified: vec![(2, PointContent::Ratings(r))],
        };
        let text = ratings.to_text();
        assert_eq!(text, "add\t10\t3:4.5 7:1\nmodify\t2\t3:4.5 7:1\n");
        assert_eq!(
            ChangeSet::parse(&text, DataKind::Numeric, Path::new("c")).unwrap(),
            ratings
        );
        let docs = ChangeSet {
            added: vec![],
            modified: vec![(
                5,
                PointContent::Document(Document {
                    name: "p5".into(),
                    terms,
                }),
            )],
        };
        assert_eq!(
            ChangeSet::parse(&docs.to_text(), DataKind::Text, Path::new("c")).unwrap(),
            docs
        );
        assert!(ChangeSet::parse("drop\t1\t3:4\n", DataKind::Numeric, Path::new("c")).is_err());
        assert!(ChangeSet::parse("add\tx\t3:4\n", DataKind::Numeric, Path::new("c")).is_err());
    }
}

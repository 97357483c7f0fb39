//! Embedded temporal entity store.
//!
//! Every upsert appends to the per-entity history; nothing is ever
//! overwritten except under [`DuplicatePolicy::Overwrite`]. Histories are
//! kept ordered by `observedAt`, so the latest record of an entity is the one
//! with the greatest timestamp regardless of insertion order.

use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::sync::Arc;

use parking_lot::{Mutex, RwLock};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::entity::{self, DecodeMode, DqAssessment, Entity, EntityError, GeoPoint};
use crate::time::Timestamp;

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error("duplicate record for `{entity_id}` at {observed_at}")]
    Duplicate {
        entity_id: String,
        observed_at: Timestamp,
    },
    #[error(transparent)]
    Entity(#[from] EntityError),
    #[error("persistence: {0}")]
    Io(#[from] std::io::Error),
    #[error("persistence line {line}: {message}")]
    Corrupt { line: usize, message: String },
}

pub type Result<T, E = StoreError> = std::result::Result<T, E>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DuplicatePolicy {
    #[default]
    Reject,
    Overwrite,
}

/// Tags of an assessment record, kept inline so scans need not decode the
/// entity.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AssessmentFlags {
    pub is_outlier: bool,
    pub is_synthetic: bool,
}

/// One stored snapshot of an entity.
#[derive(Debug, Clone)]
pub struct TemporalRecord {
    pub record_id: u64,
    pub entity_id: String,
    pub observed_at: Timestamp,
    pub entity: Arc<Entity>,
    /// Compact serialized form of `entity`.
    pub snapshot: Arc<str>,
    /// Observed value for observations; `NaN` for assessments.
    pub value: f64,
    pub location: Option<GeoPoint>,
    /// Present on assessment records.
    pub flags: Option<AssessmentFlags>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Selector {
    EntityId(String),
    EntityType(String),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum QueryMode {
    /// The `n` newest records.
    LastN(usize),
    /// Records with `observedAt` in `(now - duration, now]`.
    Window { duration_ms: i64, now: Timestamp },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeoFilter {
    pub center: GeoPoint,
    pub radius_m: f64,
}

/// Filters applied to the linked assessment flags of stored records.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AttributeFilter {
    IsOutlier(bool),
    IsSynthetic(bool),
}

impl AttributeFilter {
    fn matches(self, a: &DqAssessment) -> bool {
        match self {
            AttributeFilter::IsOutlier(b) => a.outlier.is_outlier == b,
            AttributeFilter::IsSynthetic(b) => a.synthetic.is_synthetic == b,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TemporalQuery {
    pub selector: Selector,
    pub mode: QueryMode,
    pub geo: Option<GeoFilter>,
    pub attribute: Option<AttributeFilter>,
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum QueryError {
    #[error("last-N query needs N >= 1")]
    ZeroCount,
    #[error("time window must be positive")]
    EmptyWindow,
    #[error("geo radius must be positive")]
    BadRadius,
}

impl TemporalQuery {
    pub fn last_n(selector: Selector, n: usize) -> Self {
        Self {
            selector,
            mode: QueryMode::LastN(n),
            geo: None,
            attribute: None,
        }
    }

    pub fn window(selector: Selector, duration_ms: i64, now: Timestamp) -> Self {
        Self {
            selector,
            mode: QueryMode::Window { duration_ms, now },
            geo: None,
            attribute: None,
        }
    }

    pub fn with_geo(mut self, center: GeoPoint, radius_m: f64) -> Self {
        self.geo = Some(GeoFilter { center, radius_m });
        self
    }

    pub fn with_attribute(mut self, filter: AttributeFilter) -> Self {
        self.attribute = Some(filter);
        self
    }

    pub fn validate(&self) -> Result<(), QueryError> {
        match self.mode {
            QueryMode::LastN(0) => return Err(QueryError::ZeroCount),
            QueryMode::Window { duration_ms, .. } if duration_ms <= 0 => {
                return Err(QueryError::EmptyWindow)
            }
            _ => {}
        }
        if let Some(g) = self.geo {
            if !(g.radius_m > 0.0) {
                return Err(QueryError::BadRadius);
            }
        }
        Ok(())
    }
}

/// Records of one entity, ascending by `observedAt`, stored contiguously.
/// In-order arrivals append; late ones are inserted at their place.
#[derive(Default)]
struct History(Vec<TemporalRecord>);

impl History {
    fn position(&self, at: Timestamp) -> Result<usize, usize> {
        match self.0.last() {
            Some(last) if last.observed_at < at => Err(self.0.len()),
            _ => self.0.binary_search_by_key(&at, |r| r.observed_at),
        }
    }

    fn contains(&self, at: Timestamp) -> bool {
        self.position(at).is_ok()
    }

    fn insert(&mut self, rec: TemporalRecord) {
        match self.position(rec.observed_at) {
            Ok(i) => self.0[i] = rec,
            Err(i) => self.0.insert(i, rec),
        }
    }

    fn latest(&self) -> Option<&TemporalRecord> {
        self.0.last()
    }

    /// Newest record at or before `at`.
    fn at_or_before(&self, at: Timestamp) -> Option<&TemporalRecord> {
        let end = self.0.partition_point(|r| r.observed_at <= at);
        end.checked_sub(1).map(|i| &self.0[i])
    }

    /// Records with `start < observedAt <= end`.
    fn window(&self, start: Timestamp, end: Timestamp) -> &[TemporalRecord] {
        let lo = self.0.partition_point(|r| r.observed_at <= start);
        let hi = self.0.partition_point(|r| r.observed_at <= end);
        &self.0[lo..hi.max(lo)]
    }

    fn len(&self) -> usize {
        self.0.len()
    }
}

#[derive(Default)]
struct Inner {
    histories: HashMap<String, History>,
    by_type: HashMap<String, Vec<String>>,
    next_record: u64,
}

impl Inner {
    fn latest(&self, id: &str) -> Option<&TemporalRecord> {
        self.histories.get(id).and_then(History::latest)
    }

    fn linked_record(&self, rec: &TemporalRecord) -> Option<&TemporalRecord> {
        let obs = rec.entity.as_observation()?;
        let link = obs.has_quality.as_deref()?;
        let history = self.histories.get(link)?;
        // Prefer the assessment calculated for this very snapshot.
        history
            .at_or_before(rec.observed_at)
            .or_else(|| history.latest())
            .filter(|r| r.flags.is_some())
    }

    fn linked_assessment(&self, rec: &TemporalRecord) -> Option<&DqAssessment> {
        self.linked_record(rec).and_then(|r| r.entity.as_assessment())
    }

    fn attribute_ok(&self, rec: &TemporalRecord, filter: Option<AttributeFilter>) -> bool {
        let Some(filter) = filter else { return true };
        match rec.entity.as_ref() {
            Entity::Assessment(a) => filter.matches(a),
            Entity::Observation(_) => self
                .linked_assessment(rec)
                .is_some_and(|a| filter.matches(a)),
        }
    }

    fn check_insert(&self, e: &Entity, policy: DuplicatePolicy) -> Result<()> {
        e.validate()?;
        if policy == DuplicatePolicy::Reject {
            let at = e.observed_at();
            if self.histories.get(e.id()).is_some_and(|h| h.contains(at)) {
                return Err(StoreError::Duplicate {
                    entity_id: e.id().to_string(),
                    observed_at: at,
                });
            }
        }
        Ok(())
    }

    fn insert(&mut self, entity: Arc<Entity>, snapshot: Arc<str>) -> u64 {
        let record_id = self.next_record;
        self.next_record += 1;
        let id = entity.id().to_string();
        let rec = TemporalRecord {
            record_id,
            entity_id: id.clone(),
            observed_at: entity.observed_at(),
            value: entity.as_observation().map_or(f64::NAN, |o| o.value),
            location: entity.location(),
            flags: entity.as_assessment().map(|a| AssessmentFlags {
                is_outlier: a.outlier.is_outlier,
                is_synthetic: a.synthetic.is_synthetic,
            }),
            entity: Arc::clone(&entity),
            snapshot,
        };
        let history = self.histories.entry(id.clone()).or_insert_with(|| {
            self.by_type
                .entry(entity.entity_type().to_string())
                .or_default()
                .push(id);
            History::default()
        });
        history.insert(rec);
        record_id
    }
}

#[derive(Serialize, Deserialize)]
struct PersistedRecord {
    #[serde(rename = "entityId")]
    entity_id: String,
    #[serde(rename = "observedAt")]
    observed_at: Timestamp,
    value: Option<f64>,
    location: Option<[f64; 2]>,
    entity: Value,
}

/// In-memory temporal store with reader/writer locking and optional
/// append-only JSON-lines persistence.
pub struct ContextStore {
    inner: RwLock<Inner>,
    policy: DuplicatePolicy,
    journal: Option<Mutex<BufWriter<File>>>,
}

impl Default for ContextStore {
    fn default() -> Self {
        Self::new(DuplicatePolicy::Reject)
    }
}

impl ContextStore {
    pub fn new(policy: DuplicatePolicy) -> Self {
        Self {
            inner: RwLock::new(Inner::default()),
            policy,
            journal: None,
        }
    }

    /// Opens a store backed by a journal file, replaying any records it
    /// already holds.
    pub fn with_journal(path: impl AsRef<Path>, policy: DuplicatePolicy) -> Result<Self> {
        let path = path.as_ref();
        let mut store = if path.exists() {
            Self::replay(path, policy)?
        } else {
            Self::new(policy)
        };
        let file = OpenOptions::new().create(true).append(true).open(path)?;
        store.journal = Some(Mutex::new(BufWriter::new(file)));
        Ok(store)
    }

    /// Rebuilds a store from a journal written by a previous run.
    pub fn replay(path: impl AsRef<Path>, policy: DuplicatePolicy) -> Result<Self> {
        let store = Self::new(policy);
        let reader = BufReader::new(File::open(path)?);
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let corrupt = |message: String| StoreError::Corrupt {
                line: i + 1,
                message,
            };
            let rec: PersistedRecord =
                serde_json::from_str(&line).map_err(|e| corrupt(e.to_string()))?;
            let entity = entity::from_json_value(&rec.entity, DecodeMode::Strict)
                .map_err(|e| corrupt(e.to_string()))?;
            if entity.id() != rec.entity_id || entity.observed_at() != rec.observed_at {
                return Err(corrupt("record key does not match entity".into()));
            }
            store.upsert(entity)?;
        }
        Ok(store)
    }

    pub fn policy(&self) -> DuplicatePolicy {
        self.policy
    }

    fn prepare(e: Entity) -> Result<(Arc<Entity>, Arc<str>)> {
        let bytes = entity::serialize(&e)?;
        let snapshot: Arc<str> = String::from_utf8(bytes)
            .map_err(|e| EntityError::Serialization(e.to_string()))?
            .into();
        Ok((Arc::new(e), snapshot))
    }

    fn journal(&self, prepared: &[(Arc<Entity>, Arc<str>)]) -> Result<()> {
        let Some(journal) = &self.journal else {
            return Ok(());
        };
        let mut w = journal.lock();
        for (e, snapshot) in prepared {
            let rec = PersistedRecord {
                entity_id: e.id().to_string(),
                observed_at: e.observed_at(),
                value: e.as_observation().map(|o| o.value),
                location: e.location().map(|p| [p.lat, p.lon]),
                entity: serde_json::from_str(snapshot)
                    .map_err(|e| EntityError::Serialization(e.to_string()))?,
            };
            serde_json::to_writer(&mut *w, &rec)
                .map_err(|e| EntityError::Serialization(e.to_string()))?;
            w.write_all(b"\n")?;
        }
        w.flush()?;
        Ok(())
    }

    /// Appends an entity to its temporal history.
    pub fn upsert(&self, entity: impl Into<Entity>) -> Result<u64> {
        let ids = self.upsert_all(vec![entity.into()])?;
        Ok(ids[0])
    }

    /// Appends several entities atomically: either all are stored or none.
    pub fn upsert_all(&self, entities: Vec<Entity>) -> Result<Vec<u64>> {
        let mut inner = self.inner.write();
        for (i, e) in entities.iter().enumerate() {
            inner.check_insert(e, self.policy)?;
            let clash = entities[..i]
                .iter()
                .any(|p| p.id() == e.id() && p.observed_at() == e.observed_at());
            if clash && self.policy == DuplicatePolicy::Reject {
                return Err(StoreError::Duplicate {
                    entity_id: e.id().to_string(),
                    observed_at: e.observed_at(),
                });
            }
        }
        let prepared = entities
            .into_iter()
            .map(Self::prepare)
            .collect::<Result<Vec<_>>>()?;
        self.journal(&prepared)?;
        Ok(prepared
            .into_iter()
            .map(|(e, s)| inner.insert(e, s))
            .collect())
    }

    pub fn latest(&self, entity_id: &str) -> Option<TemporalRecord> {
        self.inner.read().latest(entity_id).cloned()
    }

    /// Calls `visit` on the latest record of an entity without copying it.
    pub fn visit_latest<R>(&self, entity_id: &str, visit: impl FnOnce(&TemporalRecord) -> R) -> Option<R> {
        self.inner.read().latest(entity_id).map(visit)
    }

    /// Calls `visit` on up to `n` newest records of an entity, newest first,
    /// and returns how many were visited.
    pub fn visit_last_n(&self, entity_id: &str, n: usize, mut visit: impl FnMut(&TemporalRecord)) -> usize {
        let inner = self.inner.read();
        let Some(history) = inner.histories.get(entity_id) else {
            return 0;
        };
        let mut seen = 0;
        for r in history.0.iter().rev().take(n) {
            visit(r);
            seen += 1;
        }
        seen
    }

    pub fn history_len(&self, entity_id: &str) -> usize {
        self.inner.read().histories.get(entity_id).map_or(0, History::len)
    }

    pub fn entity_count(&self) -> usize {
        self.inner.read().histories.len()
    }

    pub fn record_count(&self) -> usize {
        self.inner.read().histories.values().map(History::len).sum()
    }

    /// Records matching the query, ascending by `observedAt`.
    pub fn temporal(&self, query: &TemporalQuery) -> Result<Vec<TemporalRecord>, QueryError> {
        query.validate()?;
        let inner = self.inner.read();
        let ids: Vec<&str> = match &query.selector {
            Selector::EntityId(id) => vec![id.as_str()],
            Selector::EntityType(t) => inner
                .by_type
                .get(t)
                .map(|v| v.iter().map(String::as_str).collect())
                .unwrap_or_default(),
        };
        let keep = |r: &TemporalRecord| {
            let geo_ok = match (query.geo, r.location) {
                (None, _) => true,
                (Some(g), Some(loc)) => g.center.haversine_m(&loc) <= g.radius_m,
                (Some(_), None) => false,
            };
            geo_ok && inner.attribute_ok(r, query.attribute)
        };

        let mut out: Vec<TemporalRecord> = Vec::new();
        for id in ids {
            let Some(history) = inner.histories.get(id) else {
                continue;
            };
            match query.mode {
                QueryMode::LastN(n) => {
                    let newest: Vec<&TemporalRecord> =
                        history.0.iter().rev().filter(|r| keep(r)).take(n).collect();
                    out.extend(newest.into_iter().rev().cloned());
                }
                QueryMode::Window { duration_ms, now } => {
                    let start = now.plus_millis(-duration_ms);
                    out.extend(
                        history
                            .window(start, now)
                            .iter()
                            .filter(|r| keep(r))
                            .cloned(),
                    );
                }
            }
        }
        out.sort_by(|a, b| {
            a.observed_at
                .cmp(&b.observed_at)
                .then_with(|| a.entity_id.cmp(&b.entity_id))
        });
        if let QueryMode::LastN(n) = query.mode {
            if out.len() > n {
                out.drain(..out.len() - n);
            }
        }
        Ok(out)
    }

    /// Calls `visit` with the latest record of every entity of `entity_type`
    /// within `radius_m` of `center` (closed ball), excluding `exclude_id`,
    /// together with its linked assessment record when the link resolves.
    /// Returns the number of records visited.
    pub fn visit_nearby_latest(
        &self,
        entity_type: &str,
        center: GeoPoint,
        radius_m: f64,
        exclude_id: Option<&str>,
        mut visit: impl FnMut(&TemporalRecord, Option<&TemporalRecord>),
    ) -> Result<usize, QueryError> {
        if !(radius_m > 0.0) {
            return Err(QueryError::BadRadius);
        }
        let inner = self.inner.read();
        let Some(ids) = inner.by_type.get(entity_type) else {
            return Ok(0);
        };
        let mut seen = 0;
        for id in ids {
            if Some(id.as_str()) == exclude_id {
                continue;
            }
            let Some(rec) = inner.latest(id) else { continue };
            let Some(loc) = rec.location else { continue };
            if center.haversine_m(&loc) <= radius_m {
                visit(rec, inner.linked_record(rec));
                seen += 1;
            }
        }
        Ok(seen)
    }

    /// Owned variant of [`ContextStore::visit_nearby_latest`] pairing each
    /// record with its decoded linked assessment.
    pub fn nearby_latest(
        &self,
        entity_type: &str,
        center: GeoPoint,
        radius_m: f64,
        exclude_id: Option<&str>,
    ) -> Result<Vec<(TemporalRecord, Option<DqAssessment>)>, QueryError> {
        let mut out = Vec::new();
        self.visit_nearby_latest(entity_type, center, radius_m, exclude_id, |rec, linked| {
            let dqa = linked.and_then(|l| l.entity.as_assessment()).cloned();
            out.push((rec.clone(), dqa));
        })?;
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::entity::{DqProperty, Observation, OutlierTag, SyntheticTag, UNIT_ONE, UNIT_SECOND};

    fn point() -> GeoPoint {
        GeoPoint::new(43.4623, -3.8099).unwrap()
    }

    fn obs(id: &str, t_min: i64, value: f64) -> Observation {
        Observation::new(
            id,
            "Temperature",
            value,
            "CEL",
            Timestamp::from_millis(t_min * 60_000),
            point(),
            id,
        )
    }

    fn dqa(id: &str, t_min: i64, synthetic: bool) -> DqAssessment {
        let t = Timestamp::from_millis(t_min * 60_000);
        DqAssessment {
            id: id.into(),
            source: "test".into(),
            date_calculated: t,
            accuracy: None,
            completeness: DqProperty::new(1.0, t, UNIT_ONE),
            timeliness: DqProperty::new(120.0, t, UNIT_SECOND),
            precision: None,
            outlier: OutlierTag {
                is_outlier: false,
                methodology: "m".into(),
                observed_at: t,
            },
            synthetic: SyntheticTag {
                is_synthetic: synthetic,
                methodology: "m".into(),
                observed_at: t,
            },
            extra: Default::default(),
        }
    }

    #[test]
    fn append_counts_history() {
        let store = ContextStore::default();
        for i in 0..100 {
            store.upsert(obs("s1", 2 * i, 20.0)).unwrap();
        }
        assert_eq!(store.history_len("s1"), 100);
    }

    #[test]
    fn duplicate_rejected_by_default_and_overwritten_on_request() {
        let store = ContextStore::default();
        store.upsert(obs("s1", 0, 20.0)).unwrap();
        assert!(matches!(
            store.upsert(obs("s1", 0, 21.0)),
            Err(StoreError::Duplicate { .. })
        ));
        let store = ContextStore::new(DuplicatePolicy::Overwrite);
        store.upsert(obs("s1", 0, 20.0)).unwrap();
        store.upsert(obs("s1", 0, 21.0)).unwrap();
        assert_eq!(store.history_len("s1"), 1);
        assert_eq!(store.latest("s1").unwrap().value, 21.0);
    }

    #[test]
    fn batch_upsert_is_atomic() {
        let store = ContextStore::default();
        store.upsert(obs("s1", 0, 20.0)).unwrap();
        let err = store.upsert_all(vec![obs("s2", 0, 1.0).into(), obs("s1", 0, 2.0).into()]);
        assert!(err.is_err());
        assert_eq!(store.history_len("s2"), 0);
    }

    #[test]
    fn latest_is_max_timestamp_not_last_inserted() {
        let store = ContextStore::default();
        assert!(store.latest("s1").is_none());
        for t in [1, 2, 3] {
            store.upsert(obs("s1", t, t as f64)).unwrap();
        }
        assert_eq!(store.latest("s1").unwrap().value, 3.0);
        store.upsert(obs("s1", 5, 5.0)).unwrap();
        store.upsert(obs("s1", 4, 4.0)).unwrap();
        assert_eq!(store.latest("s1").unwrap().value, 5.0);
    }

    #[test]
    fn out_of_order_history_is_returned_sorted() {
        let store = ContextStore::default();
        let order = [7, 3, 9, 1, 5, 8, 2, 6, 4, 0];
        for &t in &order {
            store.upsert(obs("s1", t, t as f64)).unwrap();
        }
        let q = TemporalQuery::last_n(Selector::EntityId("s1".into()), 100);
        let got: Vec<f64> = store.temporal(&q).unwrap().iter().map(|r| r.value).collect();
        let mut reference: Vec<f64> = order.iter().map(|&t| t as f64).collect();
        reference.sort_by(f64::total_cmp);
        assert_eq!(got, reference);
    }

    #[test]
    fn last_n_saturates() {
        let store = ContextStore::default();
        for i in 0..40 {
            store.upsert(obs("s1", 2 * i, i as f64)).unwrap();
        }
        let q = TemporalQuery::last_n(Selector::EntityId("s1".into()), 60);
        assert_eq!(store.temporal(&q).unwrap().len(), 40);
        for i in 40..200 {
            store.upsert(obs("s1", 2 * i, i as f64)).unwrap();
        }
        let got = store.temporal(&q).unwrap();
        assert_eq!(got.len(), 60);
        assert_eq!(got.first().unwrap().value, 140.0);
        assert_eq!(got.last().unwrap().value, 199.0);
    }

    #[test]
    fn window_is_half_open_at_the_start() {
        let store = ContextStore::default();
        for i in 0..500 {
            store.upsert(obs("s1", 2 * i, i as f64)).unwrap();
        }
        let now = Timestamp::from_millis(2 * 499 * 60_000);
        let q = TemporalQuery::window(Selector::EntityId("s1".into()), 7_200_000, now);
        let got = store.temporal(&q).unwrap();
        assert_eq!(got.len(), 60);
        assert!(got.iter().all(|r| r.observed_at > now.plus_millis(-7_200_000)));
        assert_eq!(got.last().unwrap().observed_at, now);
    }

    #[test]
    fn attribute_filter_on_assessments() {
        let store = ContextStore::default();
        for i in 0..10 {
            store.upsert(dqa("q1", 2 * i, i % 3 == 0)).unwrap();
        }
        let q = TemporalQuery::last_n(Selector::EntityId("q1".into()), 60)
            .with_attribute(AttributeFilter::IsSynthetic(true));
        assert_eq!(store.temporal(&q).unwrap().len(), 4);
    }

    #[test]
    fn invalid_queries_are_rejected() {
        let store = ContextStore::default();
        let sel = Selector::EntityId("s1".into());
        assert_eq!(
            store.temporal(&TemporalQuery::last_n(sel.clone(), 0)).unwrap_err(),
            QueryError::ZeroCount
        );
        assert_eq!(
            store
                .temporal(&TemporalQuery::window(sel, 0, Timestamp::default()))
                .unwrap_err(),
            QueryError::EmptyWindow
        );
        assert!(store.nearby_latest("Temperature", point(), 0.0, None).is_err());
    }

    #[test]
    fn nearby_excludes_self() {
        let store = ContextStore::default();
        store.upsert(obs("s1", 0, 20.0)).unwrap();
        let got = store
            .nearby_latest("Temperature", point(), 0.001, Some("s1"))
            .unwrap();
        assert!(got.is_empty());
    }

    #[test]
    fn nearby_resolves_links() {
        let store = ContextStore::default();
        let mut o = obs("s1", 0, 20.0);
        o.has_quality = Some("q1".into());
        store.upsert(dqa("q1", 0, false)).unwrap();
        store.upsert(o).unwrap();
        store.upsert(obs("s2", 0, 21.0)).unwrap();
        let mut got = store.nearby_latest("Temperature", point(), 10.0, None).unwrap();
        got.sort_by(|a, b| a.0.entity_id.cmp(&b.0.entity_id));
        assert_eq!(got.len(), 2);
        assert_eq!(got[0].1.as_ref().unwrap().id, "q1");
        assert!(got[1].1.is_none());
    }

    #[test]
    fn journal_replays_to_the_same_state() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("store.jsonl");
        {
            let store = ContextStore::with_journal(&path, DuplicatePolicy::Reject).unwrap();
            for i in 0..20 {
                store.upsert(obs("s1", 2 * i, i as f64)).unwrap();
                store.upsert(dqa("q1", 2 * i, i == 4)).unwrap();
            }
        }
        let replayed = ContextStore::replay(&path, DuplicatePolicy::Reject).unwrap();
        assert_eq!(replayed.history_len("s1"), 20);
        assert_eq!(replayed.history_len("q1"), 20);
        assert_eq!(replayed.latest("s1").unwrap().value, 19.0);
        // Reopening appends to the existing journal.
        let reopened = ContextStore::with_journal(&path, DuplicatePolicy::Reject).unwrap();
        reopened.upsert(obs("s1", 100, 1.0)).unwrap();
        drop(reopened);
        assert_eq!(
            ContextStore::replay(&path, DuplicatePolicy::Reject).unwrap().history_len("s1"),
            21
        );
    }
}

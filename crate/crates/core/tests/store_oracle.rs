use std::sync::Arc;

use dqcurate_core::entity::{GeoPoint, Observation};
use dqcurate_core::store::{ContextStore, QueryMode, Selector, TemporalQuery};
use dqcurate_core::Timestamp;
use proptest::prelude::*;

fn obs(sensor: usize, t: i64, value: f64, lat: f64, lon: f64) -> Observation {
    Observation::new(
        format!("urn:ngsi-ld:Temperature:s{sensor}"),
        "Temperature",
        value,
        "CEL",
        Timestamp::from_millis(t),
        GeoPoint::new(lat, lon).unwrap(),
        format!("s{sensor}"),
    )
}

fn sample() -> impl Strategy<Value = Vec<(usize, i64, f64, f64, f64)>> {
    prop::collection::vec((0usize..8, 0i64..100, -10.0f64..40.0, 43.40f64..43.50, -3.90f64..-3.70), 1..80)
}

fn load(rows: &[(usize, i64, f64, f64, f64)]) -> (ContextStore, Vec<Observation>) {
    let store = ContextStore::default();
    let mut kept: Vec<Observation> = Vec::new();
    for &(s, t, v, lat, lon) in rows {
        let o = obs(s, t * 1000, v, lat, lon);
        if kept.iter().any(|k| k.id == o.id && k.observed_at == o.observed_at) {
            assert!(store.upsert(o).is_err());
        } else {
            store.upsert(o.clone()).unwrap();
            kept.push(o);
        }
    }
    (store, kept)
}

proptest! {
    #[test]
    fn last_n_matches_sorting(rows in sample(), n in 1usize..20, sensor in 0usize..8) {
        let (store, kept) = load(&rows);
        let id = format!("urn:ngsi-ld:Temperature:s{sensor}");
        let got: Vec<i64> = store
            .temporal(&TemporalQuery::last_n(Selector::EntityId(id.clone()), n))
            .unwrap()
            .iter()
            .map(|r| r.observed_at.millis())
            .collect();
        let mut want: Vec<i64> = kept.iter().filter(|o| o.id == id).map(|o| o.observed_at.millis()).collect();
        want.sort();
        let want = want[want.len().saturating_sub(n)..].to_vec();
        prop_assert_eq!(got, want);
    }

    #[test]
    fn window_is_half_open(rows in sample(), d in 1i64..60, now in 0i64..100) {
        let (store, kept) = load(&rows);
        let q = TemporalQuery::window(Selector::EntityType("Temperature".into()), d * 1000, Timestamp::from_millis(now * 1000));
        let is_window = matches!(q.mode, QueryMode::Window { .. });
        prop_assert!(is_window);
        let mut got: Vec<(String, i64)> = store.temporal(&q).unwrap().iter().map(|r| (r.entity_id.clone(), r.observed_at.millis())).collect();
        got.sort();
        let mut want: Vec<(String, i64)> = kept
            .iter()
            .map(|o| (o.id.clone(), o.observed_at.millis()))
            .filter(|&(_, t)| t > (now - d) * 1000 && t <= now * 1000)
            .collect();
        want.sort();
        prop_assert_eq!(got, want);
    }

    #[test]
    fn nearby_latest_matches_brute_force(rows in sample(), lat in 43.40f64..43.50, lon in -3.90f64..-3.70, radius in 100.0f64..10_000.0) {
        let (store, kept) = load(&rows);
        let center = GeoPoint::new(lat, lon).unwrap();
        let mut got: Vec<String> = store
            .nearby_latest("Temperature", center, radius, None)
            .unwrap()
            .into_iter()
            .map(|(r, _)| format!("{}@{}", r.entity_id, r.observed_at.millis()))
            .collect();
        got.sort();
        let mut want = Vec::new();
        for s in 0..8 {
            let id = format!("urn:ngsi-ld:Temperature:s{s}");
            if let Some(last) = kept.iter().filter(|o| o.id == id).max_by_key(|o| o.observed_at) {
                if center.haversine_m(&last.location) <= radius {
                    want.push(format!("{}@{}", id, last.observed_at.millis()));
                }
            }
        }
        want.sort();
        prop_assert_eq!(got, want);
    }
}

#[test]
fn concurrent_writers_lose_nothing() {
    let store = Arc::new(ContextStore::default());
    std::thread::scope(|scope| {
        for s in 0..8 {
            let store = store.clone();
            scope.spawn(move || {
                for t in 0..200 {
                    store.upsert(obs(s, t * 1000, t as f64, 43.46, -3.80)).unwrap();
                }
            });
        }
    });
    assert_eq!(store.record_count(), 1600);
    assert_eq!(store.entity_count(), 8);
    for s in 0..8 {
        assert_eq!(store.history_len(&format!("urn:ngsi-ld:Temperature:s{s}")), 200);
    }
}

#[test]
fn journal_replay_restores_store() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("journal.jsonl");
    {
        let store = ContextStore::with_journal(&path, Default::default()).unwrap();
        for t in 0..10 {
            store.upsert(obs(t as usize % 3, t * 1000, t as f64, 43.46, -3.80)).unwrap();
        }
    }
    let back = ContextStore::replay(&path, Default::default()).unwrap();
    assert_eq!(back.record_count(), 10);
    assert_eq!(back.latest("urn:ngsi-ld:Temperature:s0").unwrap().value, 9.0);
}

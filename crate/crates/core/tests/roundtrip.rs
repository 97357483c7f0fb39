use dqcurate_core::entity::{self, DecodeMode, DqAssessment, DqProperty, Entity, GeoPoint, Observation, OutlierTag, SyntheticTag};
use dqcurate_core::Timestamp;
use proptest::prelude::*;

fn ts() -> impl Strategy<Value = Timestamp> {
    (0i64..4_102_444_800_000).prop_map(Timestamp::from_millis)
}

fn word() -> impl Strategy<Value = String> {
    "[a-zA-Z0-9:_\\-]{1,24}"
}

fn finite() -> impl Strategy<Value = f64> {
    prop_oneof![-1e6f64..1e6, Just(0.0), Just(1e-300), any::<i32>().prop_map(f64::from)]
}

fn property(lo: f64, hi: f64) -> impl Strategy<Value = DqProperty> {
    (lo..=hi, ts(), word()).prop_map(|(v, t, u)| DqProperty::new(v, t, u))
}

fn observation() -> impl Strategy<Value = Observation> {
    (word(), word(), finite(), word(), ts(), -90.0f64..=90.0, -180.0f64..=180.0, word(), proptest::option::of(word())).prop_map(
        |(id, ty, v, unit, t, lat, lon, sensor, q)| {
            let mut o = Observation::new(id, ty, v, unit, t, GeoPoint::new(lat, lon).unwrap(), sensor);
            o.has_quality = q;
            o
        },
    )
}

fn assessment() -> impl Strategy<Value = DqAssessment> {
    (
        (word(), word(), ts()),
        proptest::option::of(property(0.0, 1e4)),
        property(0.0, 1.0),
        property(0.0, 1e5),
        proptest::option::of(property(0.0, 1e4)),
        (any::<bool>(), "[ -~]{0,40}", ts()),
        prop_oneof![
            (Just(true), "[ -~]{1,40}", ts()),
            (Just(false), "[ -~]{0,40}", ts()),
        ],
    )
        .prop_map(|((id, source, date), accuracy, completeness, timeliness, precision, o, s)| DqAssessment {
            id,
            source,
            date_calculated: date,
            accuracy,
            completeness,
            timeliness,
            precision,
            outlier: OutlierTag { is_outlier: o.0, methodology: o.1, observed_at: o.2 },
            synthetic: SyntheticTag { is_synthetic: s.0, methodology: s.1, observed_at: s.2 },
            extra: Default::default(),
        })
}

fn any_entity() -> impl Strategy<Value = Entity> {
    prop_oneof![observation().prop_map(Entity::from), assessment().prop_map(Entity::from)]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn decode_inverts_encode(e in any_entity()) {
        let bytes = entity::serialize(&e).unwrap();
        let back = entity::deserialize(&bytes, DecodeMode::Strict).unwrap();
        prop_assert_eq!(&back, &e);
        prop_assert_eq!(entity::serialize(&back).unwrap(), bytes);
    }
}

//! Observation and `DataQualityAssessment` entities and their compact JSON
//! wire form.
//!
//! Both entities are serialized in NGSI-LD normalized form with a fixed key
//! order, so the byte size of an entity is reproducible and can be used for
//! overhead accounting. The assessment layout is:
//!
//! ```text
//! id, type, source, dateCalculated,
//! accuracy?, completeness, timeliness, precision?,   {type,value,observedAt,unitCode}
//! outlier   {type, value: {isOutlier, methodology}, observedAt}
//! synthetic {type, value: {isSynthetic, methodology}, observedAt}
//! ```

use serde_json::{Map, Number, Value};

use crate::time::Timestamp;

pub const ASSESSMENT_TYPE: &str = "DataQualityAssessment";
pub const NGSI_LD_CONTEXT: &str = "https://uri.etsi.org/ngsi-ld/v1/ngsi-ld-core-context.jsonld";

/// Dimensionless unit code ("one") used for completeness.
pub const UNIT_ONE: &str = "C62";
/// Second, used for timeliness.
pub const UNIT_SECOND: &str = "SEC";

#[derive(Debug, thiserror::Error)]
pub enum EntityError {
    #[error("serialization error: {0}")]
    Serialization(String),
    #[error("schema error: {0}")]
    Schema(String),
    #[error("validation error: {0}")]
    Validation(String),
    #[error("malformed JSON: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = EntityError> = std::result::Result<T, E>;

/// How unknown members are treated when decoding.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DecodeMode {
    /// Unknown members are an error.
    #[default]
    Strict,
    /// Unknown top-level members are kept aside and otherwise ignored.
    Lenient,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeoPoint {
    pub lat: f64,
    pub lon: f64,
}

impl GeoPoint {
    pub fn new(lat: f64, lon: f64) -> Result<Self> {
        let p = Self { lat, lon };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.lat.is_finite() || !(-90.0..=90.0).contains(&self.lat) {
            return Err(EntityError::Validation(format!(
                "latitude {} outside [-90, 90]",
                self.lat
            )));
        }
        if !self.lon.is_finite() || !(-180.0..=180.0).contains(&self.lon) {
            return Err(EntityError::Validation(format!(
                "longitude {} outside [-180, 180]",
                self.lon
            )));
        }
        Ok(())
    }

    /// Great-circle distance in meters on a sphere of radius 6 371 000 m.
    pub fn haversine_m(&self, other: &GeoPoint) -> f64 {
        const EARTH_RADIUS_M: f64 = 6_371_000.0;
        let (phi1, phi2) = (self.lat.to_radians(), other.lat.to_radians());
        let dphi = phi2 - phi1;
        let dlambda = (other.lon - self.lon).to_radians();
        let a = (dphi / 2.0).sin().powi(2) + phi1.cos() * phi2.cos() * (dlambda / 2.0).sin().powi(2);
        2.0 * EARTH_RADIUS_M * a.sqrt().min(1.0).asin()
    }
}

/// A single time-stamped sensor reading.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub id: String,
    pub entity_type: String,
    pub value: f64,
    pub unit_code: String,
    pub observed_at: Timestamp,
    pub location: GeoPoint,
    pub source_sensor: String,
    pub has_quality: Option<String>,
    /// Unknown members captured by a lenient decode; never serialized.
    pub extra: Map<String, Value>,
}

impl Observation {
    pub fn new(
        id: impl Into<String>,
        entity_type: impl Into<String>,
        value: f64,
        unit_code: impl Into<String>,
        observed_at: Timestamp,
        location: GeoPoint,
        source_sensor: impl Into<String>,
    ) -> Self {
        Self {
            id: id.into(),
            entity_type: entity_type.into(),
            value,
            unit_code: unit_code.into(),
            observed_at,
            location,
            source_sensor: source_sensor.into(),
            has_quality: None,
            extra: Map::new(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        require_non_empty("id", &self.id)?;
        require_non_empty("type", &self.entity_type)?;
        if !self.value.is_finite() {
            return Err(EntityError::Validation(format!(
                "observed value {} is not finite",
                self.value
            )));
        }
        self.location.validate()?;
        if let Some(q) = &self.has_quality {
            require_non_empty("hasQuality", q)?;
        }
        Ok(())
    }
}

/// One quality dimension value (`accuracy`, `completeness`, ...).
#[derive(Debug, Clone, PartialEq)]
pub struct DqProperty {
    pub value: f64,
    pub observed_at: Timestamp,
    pub unit_code: String,
}

impl DqProperty {
    pub fn new(value: f64, observed_at: Timestamp, unit_code: impl Into<String>) -> Self {
        Self {
            value,
            observed_at,
            unit_code: unit_code.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutlierTag {
    pub is_outlier: bool,
    pub methodology: String,
    pub observed_at: Timestamp,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticTag {
    pub is_synthetic: bool,
    pub methodology: String,
    pub observed_at: Timestamp,
}

/// The quality metadata entity linked 1:1 to an observation.
#[derive(Debug, Clone, PartialEq)]
pub struct DqAssessment {
    pub id: String,
    pub source: String,
    pub date_calculated: Timestamp,
    pub accuracy: Option<DqProperty>,
    /// Part-per-unit fraction in `[0, 1]`.
    pub completeness: DqProperty,
    /// Seconds.
    pub timeliness: DqProperty,
    pub precision: Option<DqProperty>,
    pub outlier: OutlierTag,
    pub synthetic: SyntheticTag,
    pub extra: Map<String, Value>,
}

/// The four measured dimensions of an assessment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Dimension {
    Accuracy,
    Completeness,
    Timeliness,
    Precision,
}

impl Dimension {
    pub const ALL: [Dimension; 4] = [
        Dimension::Accuracy,
        Dimension::Completeness,
        Dimension::Timeliness,
        Dimension::Precision,
    ];

    pub fn key(self) -> &'static str {
        match self {
            Dimension::Accuracy => "accuracy",
            Dimension::Completeness => "completeness",
            Dimension::Timeliness => "timeliness",
            Dimension::Precision => "precision",
        }
    }
}

impl DqAssessment {
    pub fn property(&self, dim: Dimension) -> Option<&DqProperty> {
        match dim {
            Dimension::Accuracy => self.accuracy.as_ref(),
            Dimension::Completeness => Some(&self.completeness),
            Dimension::Timeliness => Some(&self.timeliness),
            Dimension::Precision => self.precision.as_ref(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        require_non_empty("id", &self.id)?;
        let check = |name: &str, p: &DqProperty| -> Result<()> {
            if !p.value.is_finite() {
                return Err(EntityError::Validation(format!("{name} value is not finite")));
            }
            if p.value < 0.0 {
                return Err(EntityError::Validation(format!(
                    "{name} value {} is negative",
                    p.value
                )));
            }
            Ok(())
        };
        if let Some(a) = &self.accuracy {
            check("accuracy", a)?;
        }
        check("completeness", &self.completeness)?;
        if self.completeness.value > 1.0 {
            return Err(EntityError::Validation(format!(
                "completeness value {} outside [0, 1]",
                self.completeness.value
            )));
        }
        check("timeliness", &self.timeliness)?;
        if let Some(p) = &self.precision {
            check("precision", p)?;
        }
        if self.synthetic.is_synthetic && self.synthetic.methodology.is_empty() {
            return Err(EntityError::Validation(
                "synthetic observation without methodology".into(),
            ));
        }
        Ok(())
    }
}

/// Either kind of entity handled by the store and the wire format.
#[derive(Debug, Clone, PartialEq)]
pub enum Entity {
    Observation(Observation),
    Assessment(DqAssessment),
}

impl Entity {
    pub fn id(&self) -> &str {
        match self {
            Entity::Observation(o) => &o.id,
            Entity::Assessment(a) => &a.id,
        }
    }

    pub fn entity_type(&self) -> &str {
        match self {
            Entity::Observation(o) => &o.entity_type,
            Entity::Assessment(_) => ASSESSMENT_TYPE,
        }
    }

    /// The temporal key: `observedAt` for observations, `dateCalculated` for
    /// assessments.
    pub fn observed_at(&self) -> Timestamp {
        match self {
            Entity::Observation(o) => o.observed_at,
            Entity::Assessment(a) => a.date_calculated,
        }
    }

    pub fn location(&self) -> Option<GeoPoint> {
        match self {
            Entity::Observation(o) => Some(o.location),
            Entity::Assessment(_) => None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Entity::Observation(o) => o.validate(),
            Entity::Assessment(a) => a.validate(),
        }
    }

    pub fn as_observation(&self) -> Option<&Observation> {
        match self {
            Entity::Observation(o) => Some(o),
            Entity::Assessment(_) => None,
        }
    }

    pub fn as_assessment(&self) -> Option<&DqAssessment> {
        match self {
            Entity::Assessment(a) => Some(a),
            Entity::Observation(_) => None,
        }
    }
}

impl From<Observation> for Entity {
    fn from(o: Observation) -> Self {
        Entity::Observation(o)
    }
}

impl From<DqAssessment> for Entity {
    fn from(a: DqAssessment) -> Self {
        Entity::Assessment(a)
    }
}

// ---------------------------------------------------------------------------
// Encoding

fn num(field: &str, x: f64) -> Result<Value> {
    Number::from_f64(x)
        .map(Value::Number)
        .ok_or_else(|| EntityError::Serialization(format!("{field} is not finite ({x})")))
}

fn obj<const N: usize>(members: [(&str, Value); N]) -> Value {
    let mut m = Map::with_capacity(N);
    for (k, v) in members {
        m.insert(k.to_string(), v);
    }
    Value::Object(m)
}

fn text(s: &str) -> Value {
    Value::String(s.to_string())
}

fn property_value(name: &str, p: &DqProperty) -> Result<Value> {
    Ok(obj([
        ("type", text("Property")),
        ("value", num(name, p.value)?),
        ("observedAt", text(&p.observed_at.to_iso())),
        ("unitCode", text(&p.unit_code)),
    ]))
}

fn tag_value(flag_key: &str, flag: bool, methodology: &str, observed_at: Timestamp) -> Value {
    obj([
        ("type", text("Property")),
        (
            "value",
            obj([
                (flag_key, obj([("type", text("Property")), ("value", Value::Bool(flag))])),
                (
                    "methodology",
                    obj([("type", text("Relationship")), ("object", text(methodology))]),
                ),
            ]),
        ),
        ("observedAt", text(&observed_at.to_iso())),
    ])
}

fn observation_value(o: &Observation) -> Result<Value> {
    let mut m = Map::new();
    m.insert("id".into(), text(&o.id));
    m.insert("type".into(), text(&o.entity_type));
    m.insert(
        "observedValue".into(),
        obj([
            ("type", text("Property")),
            ("value", num("observedValue", o.value)?),
            ("observedAt", text(&o.observed_at.to_iso())),
            ("unitCode", text(&o.unit_code)),
        ]),
    );
    m.insert(
        "location".into(),
        obj([
            ("type", text("GeoProperty")),
            (
                "value",
                obj([
                    ("type", text("Point")),
                    (
                        "coordinates",
                        Value::Array(vec![num("longitude", o.location.lon)?, num("latitude", o.location.lat)?]),
                    ),
                ]),
            ),
        ]),
    );
    m.insert(
        "sourceSensor".into(),
        obj([("type", text("Property")), ("value", text(&o.source_sensor))]),
    );
    if let Some(q) = &o.has_quality {
        m.insert(
            "hasQuality".into(),
            obj([("type", text("Relationship")), ("object", text(q))]),
        );
    }
    m.insert("@context".into(), text(NGSI_LD_CONTEXT));
    Ok(Value::Object(m))
}

fn assessment_value(a: &DqAssessment, skip: Option<Dimension>) -> Result<Value> {
    let mut m = Map::new();
    m.insert("id".into(), text(&a.id));
    m.insert("type".into(), text(ASSESSMENT_TYPE));
    m.insert(
        "source".into(),
        obj([("type", text("Property")), ("value", text(&a.source))]),
    );
    m.insert(
        "dateCalculated".into(),
        obj([("type", text("Property")), ("value", text(&a.date_calculated.to_iso()))]),
    );
    for dim in Dimension::ALL {
        if skip == Some(dim) {
            continue;
        }
        if let Some(p) = a.property(dim) {
            m.insert(dim.key().into(), property_value(dim.key(), p)?);
        }
    }
    m.insert(
        "outlier".into(),
        tag_value("isOutlier", a.outlier.is_outlier, &a.outlier.methodology, a.outlier.observed_at),
    );
    m.insert(
        "synthetic".into(),
        tag_value(
            "isSynthetic",
            a.synthetic.is_synthetic,
            &a.synthetic.methodology,
            a.synthetic.observed_at,
        ),
    );
    Ok(Value::Object(m))
}

/// JSON value of an entity in its canonical key order.
pub fn to_json_value(entity: &Entity) -> Result<Value> {
    match entity {
        Entity::Observation(o) => observation_value(o),
        Entity::Assessment(a) => assessment_value(a, None),
    }
}

/// Compact UTF-8 JSON bytes of an entity.
pub fn serialize(entity: &Entity) -> Result<Vec<u8>> {
    Ok(serde_json::to_vec(&to_json_value(entity)?)?)
}

pub fn serialize_observation(o: &Observation) -> Result<Vec<u8>> {
    Ok(serde_json::to_vec(&observation_value(o)?)?)
}

pub fn serialize_assessment(a: &DqAssessment) -> Result<Vec<u8>> {
    Ok(serde_json::to_vec(&assessment_value(a, None)?)?)
}

/// Length in bytes of the compact serialized form.
pub fn measure_size(entity: &Entity) -> Result<usize> {
    serialize(entity).map(|b| b.len())
}

/// Size of an assessment serialized with one dimension left out, whether or
/// not that dimension is mandatory.
pub fn measure_size_without(a: &DqAssessment, dim: Dimension) -> Result<usize> {
    Ok(serde_json::to_vec(&assessment_value(a, Some(dim))?)?.len())
}

/// Bytes contributed by one dimension: the `"key":{...}` member plus its
/// separating comma. Zero when the dimension is absent.
pub fn property_size(a: &DqAssessment, dim: Dimension) -> Result<usize> {
    let with = serialize_assessment(a)?.len();
    Ok(with - measure_size_without(a, dim)?)
}

/// Binds an observation to its assessment. Idempotent; a later link replaces
/// an earlier one.
pub fn link_quality(obs: &Observation, dqa: &DqAssessment) -> Observation {
    let mut linked = obs.clone();
    linked.has_quality = Some(dqa.id.clone());
    linked
}

/// Cross-entity checks for a linked pair.
pub fn validate_link(obs: &Observation, dqa: &DqAssessment) -> Result<()> {
    if obs.has_quality.as_deref() != Some(dqa.id.as_str()) {
        return Err(EntityError::Validation(format!(
            "observation {} is not linked to {}",
            obs.id, dqa.id
        )));
    }
    if dqa.date_calculated < obs.observed_at {
        return Err(EntityError::Validation(format!(
            "assessment {} calculated before the observation it assesses",
            dqa.id
        )));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Decoding

struct Fields<'a> {
    ctx: &'a str,
    map: &'a Map<String, Value>,
}

impl<'a> Fields<'a> {
    fn of(ctx: &'a str, v: &'a Value) -> Result<Self> {
        match v {
            Value::Object(map) => Ok(Self { ctx, map }),
            _ => Err(EntityError::Schema(format!("{ctx}: expected an object"))),
        }
    }

    fn get(&self, key: &str) -> Result<&'a Value> {
        self.map
            .get(key)
            .ok_or_else(|| EntityError::Schema(format!("{}: missing `{key}`", self.ctx)))
    }

    fn str(&self, key: &str) -> Result<&'a str> {
        self.get(key)?
            .as_str()
            .ok_or_else(|| EntityError::Schema(format!("{}: `{key}` must be a string", self.ctx)))
    }

    fn f64(&self, key: &str) -> Result<f64> {
        self.get(key)?
            .as_f64()
            .ok_or_else(|| EntityError::Schema(format!("{}: `{key}` must be a number", self.ctx)))
    }

    fn bool(&self, key: &str) -> Result<bool> {
        self.get(key)?
            .as_bool()
            .ok_or_else(|| EntityError::Schema(format!("{}: `{key}` must be a boolean", self.ctx)))
    }

    fn timestamp(&self, key: &str) -> Result<Timestamp> {
        let s = self.str(key)?;
        Timestamp::parse_iso(s)
            .map_err(|e| EntityError::Schema(format!("{}: `{key}`: {e}", self.ctx)))
    }

    fn expect_type(&self, expected: &str) -> Result<()> {
        let t = self.str("type")?;
        if t != expected {
            return Err(EntityError::Schema(format!(
                "{}: type `{t}`, expected `{expected}`",
                self.ctx
            )));
        }
        Ok(())
    }

    fn only(&self, allowed: &[&str], mode: DecodeMode) -> Result<()> {
        if mode == DecodeMode::Lenient {
            return Ok(());
        }
        match self.map.keys().find(|k| !allowed.contains(&k.as_str())) {
            Some(k) => Err(EntityError::Schema(format!("{}: unknown member `{k}`", self.ctx))),
            None => Ok(()),
        }
    }

    fn extras(&self, known: &[&str]) -> Map<String, Value> {
        self.map
            .iter()
            .filter(|(k, _)| !known.contains(&k.as_str()))
            .map(|(k, v)| (k.clone(), v.clone()))
            .collect()
    }
}

const OBSERVATION_KEYS: &[&str] = &[
    "id",
    "type",
    "observedValue",
    "location",
    "sourceSensor",
    "hasQuality",
    "@context",
];

const ASSESSMENT_KEYS: &[&str] = &[
    "id",
    "type",
    "source",
    "dateCalculated",
    "accuracy",
    "completeness",
    "timeliness",
    "precision",
    "outlier",
    "synthetic",
];

fn decode_property(ctx: &str, v: &Value, mode: DecodeMode) -> Result<DqProperty> {
    let f = Fields::of(ctx, v)?;
    f.only(&["type", "value", "observedAt", "unitCode"], mode)?;
    f.expect_type("Property")?;
    Ok(DqProperty {
        value: f.f64("value")?,
        observed_at: f.timestamp("observedAt")?,
        unit_code: f.str("unitCode")?.to_string(),
    })
}

fn decode_simple_property<'a>(ctx: &'a str, v: &'a Value, mode: DecodeMode) -> Result<Fields<'a>> {
    let f = Fields::of(ctx, v)?;
    f.only(&["type", "value"], mode)?;
    f.expect_type("Property")?;
    Ok(f)
}

fn decode_relationship(ctx: &str, v: &Value, mode: DecodeMode) -> Result<String> {
    let f = Fields::of(ctx, v)?;
    f.only(&["type", "object"], mode)?;
    f.expect_type("Relationship")?;
    Ok(f.str("object")?.to_string())
}

fn decode_tag(
    ctx: &str,
    flag_key: &str,
    v: &Value,
    mode: DecodeMode,
) -> Result<(bool, String, Timestamp)> {
    let f = Fields::of(ctx, v)?;
    f.only(&["type", "value", "observedAt"], mode)?;
    f.expect_type("Property")?;
    let inner = Fields::of(ctx, f.get("value")?)?;
    inner.only(&[flag_key, "methodology"], mode)?;
    let flag = decode_simple_property(ctx, inner.get(flag_key)?, mode)?.bool("value")?;
    let methodology = decode_relationship(ctx, inner.get("methodology")?, mode)?;
    Ok((flag, methodology, f.timestamp("observedAt")?))
}

fn decode_observation(f: &Fields<'_>, mode: DecodeMode) -> Result<Observation> {
    f.only(OBSERVATION_KEYS, mode)?;
    let value = Fields::of("observedValue", f.get("observedValue")?)?;
    value.only(&["type", "value", "observedAt", "unitCode"], mode)?;
    value.expect_type("Property")?;

    let loc = Fields::of("location", f.get("location")?)?;
    loc.only(&["type", "value"], mode)?;
    loc.expect_type("GeoProperty")?;
    let point = Fields::of("location", loc.get("value")?)?;
    point.only(&["type", "coordinates"], mode)?;
    point.expect_type("Point")?;
    let coords = point
        .get("coordinates")?
        .as_array()
        .filter(|c| c.len() == 2)
        .ok_or_else(|| EntityError::Schema("location: coordinates must be [lon, lat]".into()))?;
    let coord = |i: usize| {
        coords[i]
            .as_f64()
            .ok_or_else(|| EntityError::Schema("location: coordinate must be a number".into()))
    };

    let source_sensor = decode_simple_property("sourceSensor", f.get("sourceSensor")?, mode)?
        .str("value")?
        .to_string();
    let has_quality = match f.map.get("hasQuality") {
        Some(v) => Some(decode_relationship("hasQuality", v, mode)?),
        None => None,
    };
    if let Some(ctx) = f.map.get("@context") {
        if mode == DecodeMode::Strict && ctx.as_str() != Some(NGSI_LD_CONTEXT) {
            return Err(EntityError::Schema("unexpected @context".into()));
        }
    }

    let o = Observation {
        id: f.str("id")?.to_string(),
        entity_type: f.str("type")?.to_string(),
        value: value.f64("value")?,
        unit_code: value.str("unitCode")?.to_string(),
        observed_at: value.timestamp("observedAt")?,
        location: GeoPoint {
            lon: coord(0)?,
            lat: coord(1)?,
        },
        source_sensor,
        has_quality,
        extra: f.extras(OBSERVATION_KEYS),
    };
    o.validate()?;
    Ok(o)
}

fn decode_assessment(f: &Fields<'_>, mode: DecodeMode) -> Result<DqAssessment> {
    f.only(ASSESSMENT_KEYS, mode)?;
    let opt = |key: &str| -> Result<Option<DqProperty>> {
        f.map
            .get(key)
            .map(|v| decode_property(key, v, mode))
            .transpose()
    };
    let (is_outlier, om, ot) = decode_tag("outlier", "isOutlier", f.get("outlier")?, mode)?;
    let (is_synthetic, sm, st) = decode_tag("synthetic", "isSynthetic", f.get("synthetic")?, mode)?;
    let a = DqAssessment {
        id: f.str("id")?.to_string(),
        source: decode_simple_property("source", f.get("source")?, mode)?
            .str("value")?
            .to_string(),
        date_calculated: decode_simple_property("dateCalculated", f.get("dateCalculated")?, mode)?
            .timestamp("value")?,
        accuracy: opt("accuracy")?,
        completeness: decode_property("completeness", f.get("completeness")?, mode)?,
        timeliness: decode_property("timeliness", f.get("timeliness")?, mode)?,
        precision: opt("precision")?,
        outlier: OutlierTag {
            is_outlier,
            methodology: om,
            observed_at: ot,
        },
        synthetic: SyntheticTag {
            is_synthetic,
            methodology: sm,
            observed_at: st,
        },
        extra: f.extras(ASSESSMENT_KEYS),
    };
    a.validate()?;
    Ok(a)
}

pub fn from_json_value(v: &Value, mode: DecodeMode) -> Result<Entity> {
    let f = Fields::of("entity", v)?;
    f.str("id")?;
    match f.str("type")? {
        ASSESSMENT_TYPE => decode_assessment(&f, mode).map(Entity::Assessment),
        _ => decode_observation(&f, mode).map(Entity::Observation),
    }
}

/// Parses and validates an entity from UTF-8 JSON bytes.
pub fn deserialize(bytes: &[u8], mode: DecodeMode) -> Result<Entity> {
    let text = std::str::from_utf8(bytes)
        .map_err(|e| EntityError::Schema(format!("input is not UTF-8: {e}")))?;
    let v: Value = serde_json::from_str(text)?;
    from_json_value(&v, mode)
}

fn require_non_empty(field: &str, s: &str) -> Result<()> {
    if s.is_empty() {
        Err(EntityError::Validation(format!("`{field}` is empty")))
    } else {
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ts(s: &str) -> Timestamp {
        Timestamp::parse_iso(s).unwrap()
    }

    fn obs() -> Observation {
        Observation::new(
            "urn:ngsi-ld:Temperature:s1",
            "Temperature",
            21.5,
            "CEL",
            ts("2016-11-03T10:42:00Z"),
            GeoPoint::new(43.4623, -3.8099).unwrap(),
            "s1",
        )
    }

    fn dqa(accuracy: Option<f64>, precision: Option<f64>) -> DqAssessment {
        let t = ts("2016-11-03T10:42:00Z");
        DqAssessment {
            id: "urn:ngsi-ld:DataQualityAssessment:s1".into(),
            source: "curator".into(),
            date_calculated: t,
            accuracy: accuracy.map(|v| DqProperty::new(v, t, "CEL")),
            completeness: DqProperty::new(1.0, t, UNIT_ONE),
            timeliness: DqProperty::new(120.0, t, UNIT_SECOND),
            precision: precision.map(|v| DqProperty::new(v, t, "CEL")),
            outlier: OutlierTag {
                is_outlier: false,
                methodology: "forecast-band(kappa=3)".into(),
                observed_at: t,
            },
            synthetic: SyntheticTag {
                is_synthetic: false,
                methodology: "none".into(),
                observed_at: t,
            },
            extra: Map::new(),
        }
    }

    #[test]
    fn full_assessment_has_all_dimension_keys() {
        let bytes = serialize_assessment(&dqa(Some(0.5), Some(0.2))).unwrap();
        let s = String::from_utf8(bytes).unwrap();
        for key in ["accuracy", "completeness", "timeliness", "precision", "outlier", "synthetic"] {
            assert!(s.contains(&format!("\"{key}\":")), "missing {key}");
        }
        assert!(!s.contains(' '), "compact form has no whitespace: {s}");
    }

    #[test]
    fn absent_accuracy_is_not_emitted() {
        let s = String::from_utf8(serialize_assessment(&dqa(None, Some(0.2))).unwrap()).unwrap();
        assert!(!s.contains("\"accuracy\""));
    }

    #[test]
    fn keys_follow_declaration_order() {
        let s = String::from_utf8(serialize_assessment(&dqa(Some(0.5), Some(0.2))).unwrap()).unwrap();
        let pos: Vec<usize> = ASSESSMENT_KEYS
            .iter()
            .map(|k| s.find(&format!("\"{k}\":")).unwrap())
            .collect();
        assert!(pos.windows(2).all(|w| w[0] < w[1]), "{pos:?}");
    }

    #[test]
    fn reserialize_is_a_fixpoint() {
        for e in [Entity::from(obs()), Entity::from(dqa(Some(0.5), None))] {
            let first = serialize(&e).unwrap();
            let again = serialize(&deserialize(&first, DecodeMode::Strict).unwrap()).unwrap();
            assert_eq!(first, again);
        }
    }

    #[test]
    fn non_finite_values_fail_to_serialize() {
        let mut o = obs();
        o.value = f64::NAN;
        assert!(matches!(serialize_observation(&o), Err(EntityError::Serialization(_))));
        let mut a = dqa(None, None);
        a.timeliness.value = f64::INFINITY;
        assert!(matches!(serialize_assessment(&a), Err(EntityError::Serialization(_))));
    }

    #[test]
    fn missing_id_is_a_schema_error() {
        let err = deserialize(br#"{"type":"DataQualityAssessment"}"#, DecodeMode::Strict).unwrap_err();
        assert!(matches!(err, EntityError::Schema(_)), "{err}");
        let err = deserialize(br#"{"id":"x"}"#, DecodeMode::Lenient).unwrap_err();
        assert!(matches!(err, EntityError::Schema(_)), "{err}");
    }

    #[test]
    fn completeness_out_of_range_is_rejected() {
        let mut a = dqa(None, None);
        a.completeness.value = 1.3;
        let bytes = serialize_assessment(&a).unwrap();
        let err = deserialize(&bytes, DecodeMode::Strict).unwrap_err();
        assert!(matches!(err, EntityError::Validation(_)), "{err}");
    }

    #[test]
    fn unknown_members_strict_vs_lenient() {
        let mut v = to_json_value(&Entity::from(dqa(None, None))).unwrap();
        v.as_object_mut().unwrap().insert("confidence".into(), Value::from(0.9));
        let bytes = serde_json::to_vec(&v).unwrap();
        assert!(matches!(
            deserialize(&bytes, DecodeMode::Strict),
            Err(EntityError::Schema(_))
        ));
        let lenient = deserialize(&bytes, DecodeMode::Lenient).unwrap();
        let a = lenient.as_assessment().unwrap();
        assert_eq!(a.extra.get("confidence"), Some(&Value::from(0.9)));
        // Preserved but never re-emitted.
        assert_eq!(
            serialize(&lenient).unwrap(),
            serialize_assessment(&dqa(None, None)).unwrap()
        );
    }

    #[test]
    fn size_grows_with_optional_properties() {
        let none = serialize_assessment(&dqa(None, None)).unwrap().len();
        let one = serialize_assessment(&dqa(Some(0.5), None)).unwrap().len();
        let two = serialize_assessment(&dqa(Some(0.5), Some(0.25))).unwrap().len();
        assert!(none < one && one < two);
    }

    #[test]
    fn property_sizes_are_additive() {
        let full = dqa(Some(0.5), Some(0.25));
        let total = measure_size(&Entity::from(full.clone())).unwrap();
        let bare = {
            let mut a = full.clone();
            a.accuracy = None;
            a.precision = None;
            measure_size(&Entity::from(a)).unwrap()
        };
        let contributions = property_size(&full, Dimension::Accuracy).unwrap()
            + property_size(&full, Dimension::Precision).unwrap();
        assert_eq!(total - bare, contributions);
        assert_eq!(property_size(&dqa(None, None), Dimension::Accuracy).unwrap(), 0);
    }

    #[test]
    fn linking_sets_replaces_and_is_idempotent() {
        let mut seven = dqa(None, None);
        seven.id = "dqa#7".into();
        let linked = link_quality(&obs(), &seven);
        assert_eq!(linked.has_quality.as_deref(), Some("dqa#7"));
        let relinked = link_quality(&linked, &seven);
        assert_eq!(
            serialize_observation(&linked).unwrap(),
            serialize_observation(&relinked).unwrap()
        );
        let mut eight = seven.clone();
        eight.id = "dqa#8".into();
        assert_eq!(link_quality(&linked, &eight).has_quality.as_deref(), Some("dqa#8"));
        assert!(validate_link(&linked, &seven).is_ok());
        assert!(validate_link(&linked, &eight).is_err());
    }

    #[test]
    fn observation_location_is_validated() {
        assert!(GeoPoint::new(91.0, 0.0).is_err());
        assert!(GeoPoint::new(0.0, -180.5).is_err());
        let mut v = to_json_value(&Entity::from(obs())).unwrap();
        v["location"]["value"]["coordinates"] = serde_json::json!([0.0, 95.0]);
        let err = deserialize(&serde_json::to_vec(&v).unwrap(), DecodeMode::Strict).unwrap_err();
        assert!(matches!(err, EntityError::Validation(_)));
    }

    #[test]
    fn haversine_known_distance() {
        // One degree of latitude on the 6 371 km sphere.
        let a = GeoPoint::new(0.0, 0.0).unwrap();
        let b = GeoPoint::new(1.0, 0.0).unwrap();
        let expected = 6_371_000.0 * std::f64::consts::PI / 180.0;
        assert!((a.haversine_m(&b) - expected).abs() < 1e-6);
        assert_eq!(a.haversine_m(&a), 0.0);
    }
}

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use thiserror::Error;

use super::RbsFileType;

/// Where a record was recovered from.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Provenance {
    /// File path, or `carve@<offset>` for carved images.
    pub source_file: String,
    pub file_type: RbsFileType,
    pub chunk_index: u32,
    /// File offset of the chunk header the record came from.
    pub chunk_offset: u64,
    pub record_index: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RecordError {
    #[error("telemetry value is not a JSON object")]
    NotAnObject,
    #[error("telemetry object has no non-empty string 'name'")]
    MissingName,
}

/// One decoded telemetry event.
///
/// The well-known top-level keys get typed fields; everything else (including
/// values of an unexpected JSON type under a well-known key) lands in
/// `extra_keys`, so [`TelemetryRecord::to_json`] reproduces the input object.
#[derive(Debug, Clone, PartialEq)]
pub struct TelemetryRecord {
    pub ver: Option<String>,
    pub name: String,
    pub time: Option<String>,
    pub flags: Option<i64>,
    pub os: Option<String>,
    pub os_ver: Option<String>,
    pub app_id: Option<String>,
    pub app_ver: Option<String>,
    pub ext: Option<Map<String, Value>>,
    pub data: Option<Map<String, Value>>,
    pub extra_keys: Map<String, Value>,
    pub provenance: Provenance,
}

impl TelemetryRecord {
    /// Minimal record with only a name.
    pub fn named(name: impl Into<String>) -> Self {
        TelemetryRecord {
            ver: None,
            name: name.into(),
            time: None,
            flags: None,
            os: None,
            os_ver: None,
            app_id: None,
            app_ver: None,
            ext: None,
            data: None,
            extra_keys: Map::new(),
            provenance: Provenance::default(),
        }
    }

    pub fn from_json(value: Value) -> Result<Self, RecordError> {
        let Value::Object(obj) = value else {
            return Err(RecordError::NotAnObject);
        };
        let mut rec = TelemetryRecord::named(String::new());
        for (key, v) in obj {
            rec.absorb(key, v);
        }
        rec.checked()
    }

    fn absorb(&mut self, key: String, v: Value) {
        match (key.as_str(), v) {
            ("name", Value::String(s)) => self.name = s,
            ("ver", Value::String(s)) => self.ver = Some(s),
            ("time", Value::String(s)) => self.time = Some(s),
            ("os", Value::String(s)) => self.os = Some(s),
            ("osVer", Value::String(s)) => self.os_ver = Some(s),
            ("appId", Value::String(s)) => self.app_id = Some(s),
            ("appVer", Value::String(s)) => self.app_ver = Some(s),
            ("flags", v) if v.is_i64() => self.flags = v.as_i64(),
            ("ext", Value::Object(m)) => self.ext = Some(m),
            ("data", Value::Object(m)) => self.data = Some(m),
            (_, v) => {
                self.extra_keys.insert(key, v);
            }
        }
    }

    fn checked(self) -> Result<Self, RecordError> {
        if self.name.is_empty() {
            return Err(RecordError::MissingName);
        }
        Ok(self)
    }

    /// Reassembles the original JSON object (provenance is not included).
    pub fn to_json(&self) -> Value {
        self.clone().into_json()
    }

    /// Like [`to_json`](Self::to_json), consuming the record to avoid copies.
    pub fn into_json(self) -> Value {
        fn put(obj: &mut Map<String, Value>, key: &str, v: Option<String>) {
            if let Some(s) = v {
                obj.insert(key.to_string(), Value::String(s));
            }
        }
        let mut obj = Map::with_capacity(10 + self.extra_keys.len());
        put(&mut obj, "ver", self.ver);
        put(&mut obj, "name", Some(self.name));
        put(&mut obj, "time", self.time);
        if let Some(f) = self.flags {
            obj.insert("flags".into(), Value::from(f));
        }
        put(&mut obj, "os", self.os);
        put(&mut obj, "osVer", self.os_ver);
        put(&mut obj, "appId", self.app_id);
        put(&mut obj, "appVer", self.app_ver);
        if let Some(ext) = self.ext {
            obj.insert("ext".into(), Value::Object(ext));
        }
        if let Some(data) = self.data {
            obj.insert("data".into(), Value::Object(data));
        }
        obj.extend(self.extra_keys);
        Value::Object(obj)
    }

    /// The record JSON with provenance injected under `_provenance`.
    pub fn to_json_with_provenance(&self) -> Value {
        let mut v = self.to_json();
        if let Value::Object(obj) = &mut v {
            obj.insert("_provenance".into(), serde_json::to_value(&self.provenance).unwrap_or(Value::Null));
        }
        v
    }

    /// The `epoch` key, if recorded. Kept uninterpreted.
    pub fn epoch(&self) -> Option<&Value> {
        self.extra_keys.get("epoch")
    }

    /// Looks up a key inside the `data` object.
    pub fn data_field(&self, key: &str) -> Option<&Value> {
        self.data.as_ref()?.get(key)
    }
}

/// Writes the original JSON object, like [`TelemetryRecord::to_json`].
impl Serialize for TelemetryRecord {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        use serde::ser::SerializeMap;
        let mut m = s.serialize_map(None)?;
        if let Some(v) = &self.ver {
            m.serialize_entry("ver", v)?;
        }
        m.serialize_entry("name", &self.name)?;
        if let Some(t) = &self.time {
            m.serialize_entry("time", t)?;
        }
        if let Some(f) = self.flags {
            m.serialize_entry("flags", &f)?;
        }
        for (k, v) in [("os", &self.os), ("osVer", &self.os_ver), ("appId", &self.app_id), ("appVer", &self.app_ver)] {
            if let Some(v) = v {
                m.serialize_entry(k, v)?;
            }
        }
        for (k, v) in [("ext", &self.ext), ("data", &self.data)] {
            if let Some(v) = v {
                m.serialize_entry(k, v)?;
            }
        }
        for (k, v) in &self.extra_keys {
            m.serialize_entry(k, v)?;
        }
        m.end()
    }
}

/// Deserializes one JSON value straight into a record, without building the
/// top-level object first. Equivalent to `from_json(Value::deserialize(..))`.
pub(crate) struct ParsedRecord(pub Result<TelemetryRecord, RecordError>);

impl<'de> Deserialize<'de> for ParsedRecord {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        d.deserialize_any(ParsedRecordVisitor)
    }
}

struct ParsedRecordVisitor;

macro_rules! not_an_object {
    ($($method:ident: $ty:ty),*) => {
        $(fn $method<E: serde::de::Error>(self, _: $ty) -> Result<ParsedRecord, E> {
            Ok(ParsedRecord(Err(RecordError::NotAnObject)))
        })*
    };
}

impl<'de> serde::de::Visitor<'de> for ParsedRecordVisitor {
    type Value = ParsedRecord;

    fn expecting(&self, f: &mut std::fmt::Formatter) -> std::fmt::Result {
        f.write_str("a JSON value")
    }

    not_an_object!(visit_bool: bool, visit_i64: i64, visit_u64: u64, visit_f64: f64, visit_str: &str);

    fn visit_unit<E: serde::de::Error>(self) -> Result<ParsedRecord, E> {
        Ok(ParsedRecord(Err(RecordError::NotAnObject)))
    }

    fn visit_seq<A: serde::de::SeqAccess<'de>>(self, mut seq: A) -> Result<ParsedRecord, A::Error> {
        while seq.next_element::<serde::de::IgnoredAny>()?.is_some() {}
        Ok(ParsedRecord(Err(RecordError::NotAnObject)))
    }

    fn visit_map<A: serde::de::MapAccess<'de>>(self, mut map: A) -> Result<ParsedRecord, A::Error> {
        let mut rec = TelemetryRecord::named(String::new());
        while let Some(key) = map.next_key::<String>()? {
            let v = map.next_value::<Value>()?;
            rec.absorb(key, v);
        }
        Ok(ParsedRecord(rec.checked()))
    }
}

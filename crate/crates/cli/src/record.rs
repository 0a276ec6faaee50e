//! Result records and their JSON/CSV encodings.

use std::collections::BTreeMap;
use std::fmt;

use serde::de::{MapAccess, Visitor};
use serde::ser::SerializeMap;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// Significant digits kept for every emitted float.
pub const SIGNIFICANT_DIGITS: usize = 12;

/// Rounds to [`SIGNIFICANT_DIGITS`] so JSON and CSV carry the same number.
pub fn round_sig(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    format!("{:.*e}", SIGNIFICANT_DIGITS - 1, x)
        .parse()
        .unwrap_or(x)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Cell {
    Int(i64),
    Num(f64),
    Text(String),
}

impl Cell {
    pub fn num(x: f64) -> Self {
        Cell::Num(round_sig(x))
    }

    pub fn int(x: usize) -> Self {
        Cell::Int(x as i64)
    }

    pub fn text(s: impl Into<String>) -> Self {
        Cell::Text(s.into())
    }

    fn is_finite(&self) -> bool {
        !matches!(self, Cell::Num(x) if !x.is_finite())
    }

    fn csv_field(&self) -> String {
        match self {
            Cell::Int(i) => i.to_string(),
            Cell::Num(x) => serde_json::to_string(x).unwrap_or_default(),
            Cell::Text(s) => s.clone(),
        }
    }
}

/// An ordered list of named cells, serialized as a JSON object.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Row(pub Vec<(String, Cell)>);

impl Row {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, key: &str, cell: Cell) -> Self {
        self.0.push((key.to_string(), cell));
        self
    }

    pub fn num(self, key: &str, x: f64) -> Self {
        self.with(key, Cell::num(x))
    }

    pub fn int(self, key: &str, x: usize) -> Self {
        self.with(key, Cell::int(x))
    }

    pub fn text(self, key: &str, s: impl Into<String>) -> Self {
        self.with(key, Cell::text(s))
    }

    pub fn get(&self, key: &str) -> Option<&Cell> {
        self.0.iter().find(|(k, _)| k == key).map(|(_, v)| v)
    }
}

impl Serialize for Row {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let mut map = s.serialize_map(Some(self.0.len()))?;
        for (k, v) in &self.0 {
            map.serialize_entry(k, v)?;
        }
        map.end()
    }
}

impl<'de> Deserialize<'de> for Row {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        struct RowVisitor;
        impl<'de> Visitor<'de> for RowVisitor {
            type Value = Row;
            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a row object")
            }
            fn visit_map<A: MapAccess<'de>>(self, mut access: A) -> Result<Row, A::Error> {
                let mut cells = Vec::new();
                while let Some((k, v)) = access.next_entry::<String, Cell>()? {
                    cells.push((k, v));
                }
                Ok(Row(cells))
            }
        }
        d.deserialize_map(RowVisitor)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Meta {
    pub version: String,
    pub timestamp: String,
}

impl Meta {
    pub fn now() -> Self {
        Self {
            version: env!("CARGO_PKG_VERSION").to_string(),
            timestamp: chrono::Utc::now().to_rfc3339(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultRecord {
    pub command: String,
    pub params: BTreeMap<String, String>,
    pub rows: Vec<Row>,
    pub meta: Meta,
}

impl ResultRecord {
    pub fn all_finite(&self) -> bool {
        self.rows
            .iter()
            .all(|r| r.0.iter().all(|(_, c)| c.is_finite()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("records contain only finite numbers and strings")
    }

    /// One header row with the union of row keys in first-seen order.
    pub fn to_csv(&self) -> Result<String, csv::Error> {
        let mut columns: Vec<&str> = Vec::new();
        for row in &self.rows {
            for (k, _) in &row.0 {
                if !columns.contains(&k.as_str()) {
                    columns.push(k);
                }
            }
        }
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&columns)?;
        for row in &self.rows {
            w.write_record(
                columns
                    .iter()
                    .map(|c| row.get(c).map(Cell::csv_field).unwrap_or_default()),
            )?;
        }
        let bytes = w.into_inner().map_err(|e| e.into_error())?;
        Ok(String::from_utf8(bytes).expect("CSV output is UTF-8"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rounding_keeps_twelve_digits() {
        assert_eq!(round_sig(0.929_865_771_812_080_5), 0.929865771812);
        assert_eq!(round_sig(4.02684563758389), 4.02684563758);
        assert_eq!(round_sig(0.0), 0.0);
    }

    #[test]
    fn json_round_trip() {
        let rec = ResultRecord {
            command: "analytic".into(),
            params: BTreeMap::from([("d".to_string(), "2".to_string())]),
            rows: vec![Row::new()
                .int("n", 2)
                .num("p_n", 0.8725)
                .num("one", 1.0)
                .text("status", "optimal")],
            meta: Meta::now(),
        };
        let back: ResultRecord = serde_json::from_str(&rec.to_json()).unwrap();
        assert_eq!(back, rec);
    }

    #[test]
    fn csv_uses_union_of_columns() {
        let rec = ResultRecord {
            command: "x".into(),
            params: BTreeMap::new(),
            rows: vec![
                Row::new().num("a", 0.5),
                Row::new().num("a", 1.5).text("b", "y"),
            ],
            meta: Meta::now(),
        };
        assert_eq!(rec.to_csv().unwrap(), "a,b\n0.5,\n1.5,y\n");
    }
}

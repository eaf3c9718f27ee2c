use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::io::Read;

use serde::{Deserialize, Serialize};

use super::LanduseError;

/// Default raw-code mapping shipped with the crate.
///
/// This is a reconstruction that covers the analysis classes used throughout the reports;
/// it is not an official inventory code list.
pub const DEFAULT_TAXONOMY_CSV: &str = include_str!("../../data/default_taxonomy.csv");

/// Index of an analysis class. Ids are assigned in lexicographic order of class name,
/// so comparing ids compares names.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ClassId(pub u16);

/// Mapping from raw inventory codes to analysis classes.
#[derive(Debug, Clone, PartialEq)]
pub struct Taxonomy {
    names: Vec<String>,
    road: Vec<bool>,
    raw: HashMap<String, ClassId>,
}

#[derive(Debug, Deserialize)]
struct Row {
    raw_class: String,
    analysis_class: String,
    is_road: String,
}

fn parse_flag(value: &str) -> Option<bool> {
    match value.trim().to_ascii_lowercase().as_str() {
        "true" | "1" | "yes" | "y" => Some(true),
        "false" | "0" | "no" | "n" | "" => Some(false),
        _ => None,
    }
}

impl Taxonomy {
    /// Builds a taxonomy from `(raw_class, analysis_class, is_road)` triples.
    pub fn from_entries<I, S>(entries: I) -> Result<Self, LanduseError>
    where
        I: IntoIterator<Item = (S, S, bool)>,
        S: Into<String>,
    {
        let mut raw_to_name: BTreeMap<String, String> = BTreeMap::new();
        let mut road_flag: BTreeMap<String, bool> = BTreeMap::new();
        for (raw, name, is_road) in entries {
            let (raw, name) = (raw.into().trim().to_string(), name.into().trim().to_string());
            if raw.is_empty() || name.is_empty() {
                return Err(LanduseError::Taxonomy("empty raw or analysis class".into()));
            }
            if let Some(previous) = raw_to_name.get(&raw) {
                if previous != &name {
                    return Err(LanduseError::Taxonomy(format!(
                        "raw class {raw} maps to both `{previous}` and `{name}`"
                    )));
                }
            }
            if let Some(&flag) = road_flag.get(&name) {
                if flag != is_road {
                    return Err(LanduseError::Taxonomy(format!("inconsistent is_road flag for `{name}`")));
                }
            }
            road_flag.insert(name.clone(), is_road);
            raw_to_name.insert(raw, name);
        }
        if raw_to_name.is_empty() {
            return Err(LanduseError::Taxonomy("taxonomy has no entries".into()));
        }
        let names: Vec<String> = road_flag.keys().cloned().collect();
        if names.len() > u16::MAX as usize {
            return Err(LanduseError::Taxonomy("too many analysis classes".into()));
        }
        let road = names.iter().map(|n| road_flag[n]).collect();
        let raw = raw_to_name
            .into_iter()
            .map(|(raw, name)| {
                let id = names.binary_search(&name).expect("name collected above");
                (raw, ClassId(id as u16))
            })
            .collect();
        Ok(Self { names, road, raw })
    }

    /// Reads the `raw_class,analysis_class,is_road` CSV format (header required).
    pub fn from_csv<R: Read>(input: R) -> Result<Self, LanduseError> {
        let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
        let headers = reader.headers().map_err(|e| LanduseError::Taxonomy(e.to_string()))?.clone();
        let expected = ["raw_class", "analysis_class", "is_road"];
        if headers.iter().collect::<Vec<_>>() != expected {
            return Err(LanduseError::Taxonomy(format!(
                "taxonomy header must be `raw_class,analysis_class,is_road`, found `{}`",
                headers.iter().collect::<Vec<_>>().join(",")
            )));
        }
        let mut entries = Vec::new();
        for (i, row) in reader.deserialize::<Row>().enumerate() {
            let row = row.map_err(|e| LanduseError::Taxonomy(format!("row {}: {e}", i + 2)))?;
            let flag = parse_flag(&row.is_road).ok_or_else(|| {
                LanduseError::Taxonomy(format!("row {}: bad is_road value `{}`", i + 2, row.is_road))
            })?;
            entries.push((row.raw_class, row.analysis_class, flag));
        }
        Self::from_entries(entries)
    }

    pub fn default_taxonomy() -> Self {
        Self::from_csv(DEFAULT_TAXONOMY_CSV.as_bytes()).expect("bundled taxonomy is valid")
    }

    pub fn resolve(&self, raw_class: &str) -> Option<ClassId> {
        self.raw.get(raw_class).copied()
    }

    pub fn class_id(&self, name: &str) -> Option<ClassId> {
        self.names.binary_search_by(|n| n.as_str().cmp(name)).ok().map(|i| ClassId(i as u16))
    }

    pub fn name(&self, id: ClassId) -> &str {
        &self.names[id.0 as usize]
    }

    pub fn is_road(&self, id: ClassId) -> bool {
        self.road[id.0 as usize]
    }

    pub fn classes(&self) -> impl Iterator<Item = ClassId> + '_ {
        (0..self.names.len()).map(|i| ClassId(i as u16))
    }

    pub fn class_count(&self) -> usize {
        self.names.len()
    }

    /// Raw codes mapping to `id`, sorted.
    pub fn raw_codes(&self, id: ClassId) -> Vec<&str> {
        let set: BTreeSet<&str> =
            self.raw.iter().filter(|(_, &c)| c == id).map(|(raw, _)| raw.as_str()).collect();
        set.into_iter().collect()
    }

    /// Serializes back to the CSV format, one row per raw code in sorted order.
    pub fn to_csv(&self) -> String {
        let mut rows: Vec<(&String, &ClassId)> = self.raw.iter().collect();
        rows.sort();
        let mut writer = csv::Writer::from_writer(Vec::new());
        writer.write_record(["raw_class", "analysis_class", "is_road"]).unwrap();
        for (raw, &id) in rows {
            let flag = if self.is_road(id) { "true" } else { "false" };
            writer.write_record([raw.as_str(), self.name(id), flag]).unwrap();
        }
        String::from_utf8(writer.into_inner().unwrap()).unwrap()
    }
}

impl fmt::Display for ClassId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "class#{}", self.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_taxonomy_names_paper_classes() {
        let t = Taxonomy::default_taxonomy();
        for name in [
            "Residential",
            "Hotel",
            "Urban Mix Commercial",
            "Urban Mix Residential",
            "Office",
            "Cultural/Entertainment",
            "K-12 Educational",
            "Post-Secondary Educational",
            "Road/Transport",
            "Other",
        ] {
            assert!(t.class_id(name).is_some(), "{name}");
        }
        assert!(t.is_road(t.class_id("Road/Transport").unwrap()));
        assert_eq!(t.resolve("1111"), t.class_id("Residential"));
        assert_eq!(t.resolve("1500"), t.class_id("Office"));
    }

    #[test]
    fn ids_follow_name_order() {
        let t = Taxonomy::from_entries([("1", "Office", false), ("2", "Hotel", false), ("3", "Road", true)]).unwrap();
        assert!(t.class_id("Hotel").unwrap() < t.class_id("Office").unwrap());
        assert!(t.class_id("Office").unwrap() < t.class_id("Road").unwrap());
    }

    #[test]
    fn conflicting_rows_rejected() {
        assert!(Taxonomy::from_entries([("1", "Office", false), ("1", "Hotel", false)]).is_err());
        assert!(Taxonomy::from_entries([("1", "Road", true), ("2", "Road", false)]).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let t = Taxonomy::default_taxonomy();
        assert_eq!(Taxonomy::from_csv(t.to_csv().as_bytes()).unwrap(), t);
    }

    #[test]
    fn csv_header_required() {
        assert!(Taxonomy::from_csv("1111,Residential,false\n".as_bytes()).is_err());
        assert!(Taxonomy::from_csv("raw_class,analysis_class,is_road\n1,A,maybe\n".as_bytes()).is_err());
    }
}

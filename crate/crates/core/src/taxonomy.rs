//! Zone taxonomies and the mappings between them.
//!
//! Three schemas ship with the crate as editable JSON data files:
//! `gmane15` (fine-grained, 15 zones), `two5` and `two2`. `gmane15` carries
//! mappings onto the two coarse schemas. A registry lets callers replace any
//! of them from a file with the same layout:
//!
//! ```json
//! {"name": "two2", "zones": ["body", "other"], "mappings": {}}
//! ```

use crate::email::{AnnotatedEmail, ZoneLabel};
use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::path::{Path, PathBuf};
use thiserror::Error;

pub const GMANE15: &str = "gmane15";
pub const TWO5: &str = "two5";
pub const TWO2: &str = "two2";

const GMANE15_JSON: &str = include_str!("../data/gmane15.json");
const TWO5_JSON: &str = include_str!("../data/two5.json");
const TWO2_JSON: &str = include_str!("../data/two2.json");

#[derive(Debug, Error)]
pub enum TaxonomyError {
    #[error("taxonomy {0:?} has no zones")]
    NoZones(String),
    #[error("taxonomy {taxonomy:?} lists zone {zone:?} twice")]
    DuplicateZone { taxonomy: String, zone: String },
    #[error("mapping {taxonomy}->{target} does not cover zone {zone:?}")]
    IncompleteMapping {
        taxonomy: String,
        target: String,
        zone: String,
    },
    #[error("mapping {taxonomy}->{target} has key {zone:?} which is not a zone of {taxonomy}")]
    ForeignMappingKey {
        taxonomy: String,
        target: String,
        zone: String,
    },
    #[error("mapping {taxonomy}->{target} sends {zone:?} to {mapped:?}, not a zone of {target}")]
    BadMappingTarget {
        taxonomy: String,
        target: String,
        zone: String,
        mapped: String,
    },
    #[error("unknown taxonomy {0:?}")]
    UnknownTaxonomy(String),
    #[error("no mapping from {from} to {to}")]
    NoMapping { from: String, to: String },
    #[error("zone {zone:?} at line {line} is not in the domain of mapping {from}->{to}")]
    UnknownZone {
        zone: String,
        line: usize,
        from: String,
        to: String,
    },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        source: serde_json::Error,
    },
}

#[derive(Debug, Serialize, Deserialize)]
struct TaxonomyFile {
    name: String,
    zones: Vec<String>,
    #[serde(default)]
    mappings: IndexMap<String, IndexMap<String, String>>,
}

/// A closed, ordered vocabulary of zones.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Taxonomy {
    name: String,
    zones: Vec<String>,
    index: HashMap<String, usize>,
    mappings: IndexMap<String, IndexMap<String, String>>,
}

impl Taxonomy {
    pub fn new(name: impl Into<String>, zones: Vec<String>) -> Result<Self, TaxonomyError> {
        let name = name.into();
        if zones.is_empty() {
            return Err(TaxonomyError::NoZones(name));
        }
        let mut index = HashMap::with_capacity(zones.len());
        for (i, z) in zones.iter().enumerate() {
            if index.insert(z.clone(), i).is_some() {
                return Err(TaxonomyError::DuplicateZone {
                    taxonomy: name,
                    zone: z.clone(),
                });
            }
        }
        Ok(Self {
            name,
            zones,
            index,
            mappings: IndexMap::new(),
        })
    }

    /// Attach a mapping onto `target`. The mapping must be total over this
    /// taxonomy and land inside `target`.
    pub fn with_mapping(
        mut self,
        target: &Taxonomy,
        table: IndexMap<String, String>,
    ) -> Result<Self, TaxonomyError> {
        self.check_mapping(&target.name, &table)?;
        if let Some((zone, mapped)) = table.iter().find(|(_, m)| !target.contains(m)) {
            return Err(TaxonomyError::BadMappingTarget {
                taxonomy: self.name.clone(),
                target: target.name.clone(),
                zone: zone.clone(),
                mapped: mapped.clone(),
            });
        }
        self.mappings.insert(target.name.clone(), table);
        Ok(self)
    }

    fn check_mapping(
        &self,
        target: &str,
        table: &IndexMap<String, String>,
    ) -> Result<(), TaxonomyError> {
        if let Some(zone) = self.zones.iter().find(|z| !table.contains_key(*z)) {
            return Err(TaxonomyError::IncompleteMapping {
                taxonomy: self.name.clone(),
                target: target.to_owned(),
                zone: zone.clone(),
            });
        }
        if let Some(zone) = table.keys().find(|k| !self.contains(k)) {
            return Err(TaxonomyError::ForeignMappingKey {
                taxonomy: self.name.clone(),
                target: target.to_owned(),
                zone: zone.clone(),
            });
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        let raw: TaxonomyFile = serde_json::from_str(text)?;
        Self::from_raw(raw).map_err(serde::de::Error::custom)
    }

    fn from_raw(raw: TaxonomyFile) -> Result<Self, TaxonomyError> {
        let mut t = Self::new(raw.name, raw.zones)?;
        for (target, table) in &raw.mappings {
            t.check_mapping(target, table)?;
        }
        t.mappings = raw.mappings;
        Ok(t)
    }

    pub fn to_json(&self) -> String {
        let raw = TaxonomyFile {
            name: self.name.clone(),
            zones: self.zones.clone(),
            mappings: self.mappings.clone(),
        };
        serde_json::to_string_pretty(&raw).expect("taxonomy serializes")
    }

    pub fn load(path: &Path) -> Result<Self, TaxonomyError> {
        let text = std::fs::read_to_string(path).map_err(|source| TaxonomyError::Io {
            path: path.to_owned(),
            source,
        })?;
        let raw: TaxonomyFile = serde_json::from_str(&text).map_err(|source| TaxonomyError::Json {
            path: path.to_owned(),
            source,
        })?;
        Self::from_raw(raw)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn zones(&self) -> &[String] {
        &self.zones
    }

    pub fn len(&self) -> usize {
        self.zones.len()
    }

    pub fn is_empty(&self) -> bool {
        self.zones.is_empty()
    }

    pub fn contains(&self, zone: &str) -> bool {
        self.index.contains_key(zone)
    }

    pub fn index_of(&self, zone: &str) -> Option<usize> {
        self.index.get(zone).copied()
    }

    pub fn zone(&self, index: usize) -> Option<&str> {
        self.zones.get(index).map(String::as_str)
    }

    /// Names of the taxonomies this one maps onto.
    pub fn mapping_targets(&self) -> impl Iterator<Item = &str> {
        self.mappings.keys().map(String::as_str)
    }

    pub fn mapping_table(&self, target: &str) -> Option<&IndexMap<String, String>> {
        self.mappings.get(target)
    }
}

/// A total function from the zones of one taxonomy onto another's.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ZoneMapping {
    source: String,
    target: String,
    table: HashMap<String, String>,
}

impl ZoneMapping {
    pub fn identity(taxonomy: &Taxonomy) -> Self {
        Self {
            source: taxonomy.name.clone(),
            target: taxonomy.name.clone(),
            table: taxonomy.zones.iter().map(|z| (z.clone(), z.clone())).collect(),
        }
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn target(&self) -> &str {
        &self.target
    }

    pub fn apply(&self, zone: &str) -> Option<&str> {
        self.table.get(zone).map(String::as_str)
    }
}

/// Replace every zone of `annotated` through `mapping`.
pub fn map_annotation(
    annotated: &AnnotatedEmail,
    mapping: &ZoneMapping,
) -> Result<AnnotatedEmail, TaxonomyError> {
    let zones = annotated
        .zones()
        .iter()
        .enumerate()
        .map(|(line, z)| {
            mapping
                .apply(z.as_str())
                .map(ZoneLabel::from)
                .ok_or_else(|| TaxonomyError::UnknownZone {
                    zone: z.to_string(),
                    line,
                    from: mapping.source.clone(),
                    to: mapping.target.clone(),
                })
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(annotated
        .with_zones(zones)
        .expect("mapping preserves length"))
}

/// Returns `two2`, `two5` and `gmane15` as shipped.
pub fn builtin_taxonomies() -> Vec<Taxonomy> {
    [TWO2_JSON, TWO5_JSON, GMANE15_JSON]
        .into_iter()
        .map(|text| Taxonomy::from_json(text).expect("builtin taxonomy is valid"))
        .collect()
}

/// Name-indexed set of taxonomies whose mapping targets are all present.
#[derive(Debug, Clone, Default)]
pub struct TaxonomyRegistry {
    taxonomies: IndexMap<String, Taxonomy>,
}

impl TaxonomyRegistry {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn builtin() -> Self {
        let mut reg = Self::empty();
        for t in builtin_taxonomies() {
            reg.insert(t).expect("builtin taxonomies are consistent");
        }
        reg
    }

    /// Add or replace a taxonomy. Its mapping targets must already be
    /// registered. Mappings of other taxonomies that point at a replaced
    /// taxonomy are re-validated.
    pub fn insert(&mut self, taxonomy: Taxonomy) -> Result<(), TaxonomyError> {
        for (target, table) in &taxonomy.mappings {
            let target_tax = if *target == taxonomy.name {
                &taxonomy
            } else {
                self.taxonomies
                    .get(target)
                    .ok_or_else(|| TaxonomyError::UnknownTaxonomy(target.clone()))?
            };
            check_targets(&taxonomy.name, target_tax, table)?;
        }
        for other in self.taxonomies.values() {
            if other.name == taxonomy.name {
                continue;
            }
            if let Some(table) = other.mappings.get(&taxonomy.name) {
                check_targets(&other.name, &taxonomy, table)?;
            }
        }
        self.taxonomies.insert(taxonomy.name.clone(), taxonomy);
        Ok(())
    }

    pub fn load_file(&mut self, path: &Path) -> Result<&Taxonomy, TaxonomyError> {
        let t = Taxonomy::load(path)?;
        let name = t.name.clone();
        self.insert(t)?;
        Ok(&self.taxonomies[&name])
    }

    pub fn get(&self, name: &str) -> Result<&Taxonomy, TaxonomyError> {
        self.taxonomies
            .get(name)
            .ok_or_else(|| TaxonomyError::UnknownTaxonomy(name.to_owned()))
    }

    pub fn iter(&self) -> impl Iterator<Item = &Taxonomy> {
        self.taxonomies.values()
    }

    /// Mapping `from` → `to`; identity when the names agree.
    pub fn mapping(&self, from: &str, to: &str) -> Result<ZoneMapping, TaxonomyError> {
        let source = self.get(from)?;
        if from == to {
            return Ok(ZoneMapping::identity(source));
        }
        self.get(to)?;
        let table = source
            .mappings
            .get(to)
            .ok_or_else(|| TaxonomyError::NoMapping {
                from: from.to_owned(),
                to: to.to_owned(),
            })?;
        Ok(ZoneMapping {
            source: from.to_owned(),
            target: to.to_owned(),
            table: table.iter().map(|(k, v)| (k.clone(), v.clone())).collect(),
        })
    }
}

fn check_targets(
    source: &str,
    target: &Taxonomy,
    table: &IndexMap<String, String>,
) -> Result<(), TaxonomyError> {
    match table.iter().find(|(_, m)| !target.contains(m)) {
        Some((zone, mapped)) => Err(TaxonomyError::BadMappingTarget {
            taxonomy: source.to_owned(),
            target: target.name.clone(),
            zone: zone.clone(),
            mapped: mapped.clone(),
        }),
        None => Ok(()),
    }
}

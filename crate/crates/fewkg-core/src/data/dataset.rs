//! The validated dataset and its construction from parsed rows.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::vocab::{tokenize, Description, Vocabulary};
use super::DataError;

/// (head, relation, tail) over dense internal ids.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct Triplet {
    pub head: usize,
    pub relation: usize,
    pub tail: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitName {
    Train,
    Val,
    Test,
}

impl core::fmt::Display for SplitName {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(match self {
            SplitName::Train => "train",
            SplitName::Val => "val",
            SplitName::Test => "test",
        })
    }
}

/// Relation names per split as they appear in splits.json.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawSplits {
    pub train: Vec<String>,
    pub val: Vec<String>,
    pub test: Vec<String>,
}

/// An immutable knowledge graph: descriptions, the triplet set, and a
/// relation split. Construction validates every invariant; afterwards the
/// dataset is safe to share across threads read-only.
#[derive(Debug, Clone, PartialEq)]
pub struct KnowledgeGraphDataset {
    vocab: Vocabulary,
    entity_names: Vec<String>,
    relation_names: Vec<String>,
    entity_ids: BTreeMap<String, usize>,
    relation_ids: BTreeMap<String, usize>,
    entity_descriptions: Vec<Description>,
    relation_descriptions: Vec<Description>,
    triplets: BTreeSet<Triplet>,
    triplets_by_relation: Vec<Vec<Triplet>>,
    train: BTreeSet<usize>,
    val: BTreeSet<usize>,
    test: BTreeSet<usize>,
}

impl KnowledgeGraphDataset {
    pub fn vocab(&self) -> &Vocabulary {
        &self.vocab
    }

    pub fn n_entities(&self) -> usize {
        self.entity_names.len()
    }

    pub fn n_relations(&self) -> usize {
        self.relation_names.len()
    }

    pub fn n_triplets(&self) -> usize {
        self.triplets.len()
    }

    pub fn entity_name(&self, id: usize) -> &str {
        &self.entity_names[id]
    }

    pub fn relation_name(&self, id: usize) -> &str {
        &self.relation_names[id]
    }

    pub fn entity_id(&self, name: &str) -> Option<usize> {
        self.entity_ids.get(name).copied()
    }

    pub fn relation_id(&self, name: &str) -> Option<usize> {
        self.relation_ids.get(name).copied()
    }

    pub fn entity_description(&self, id: usize) -> &Description {
        &self.entity_descriptions[id]
    }

    pub fn relation_description(&self, id: usize) -> &Description {
        &self.relation_descriptions[id]
    }

    pub fn contains(&self, t: &Triplet) -> bool {
        self.triplets.contains(t)
    }

    pub fn triplets(&self) -> impl Iterator<Item = &Triplet> {
        self.triplets.iter()
    }

    /// Triplets of one relation, in ascending order.
    pub fn relation_triplets(&self, relation: usize) -> &[Triplet] {
        &self.triplets_by_relation[relation]
    }

    pub fn split(&self, name: SplitName) -> &BTreeSet<usize> {
        match name {
            SplitName::Train => &self.train,
            SplitName::Val => &self.val,
            SplitName::Test => &self.test,
        }
    }
}

/// Assembles and validates a dataset from parsed file rows. Descriptions are
/// tokenized against a vocabulary built from all texts and truncated to
/// `max_desc_len` words.
pub fn build_dataset(
    entities: &[(String, String)],
    relations: &[(String, String)],
    triplet_rows: &[(String, String, String)],
    splits: &RawSplits,
    max_desc_len: usize,
) -> Result<KnowledgeGraphDataset, DataError> {
    let vocab = Vocabulary::from_texts(
        entities.iter().map(|(_, d)| d.as_str()).chain(relations.iter().map(|(_, d)| d.as_str())),
    );

    let intern = |rows: &[(String, String)],
                      kind: &'static str|
     -> Result<(Vec<String>, BTreeMap<String, usize>, Vec<Description>), DataError> {
        let mut names = Vec::new();
        let mut ids = BTreeMap::new();
        let mut descs = Vec::new();
        for (name, text) in rows {
            if ids.insert(name.clone(), names.len()).is_some() {
                return Err(DataError::Malformed {
                    file: if kind == "entity" { "entities.tsv" } else { "relations.tsv" },
                    line: 0,
                    message: alloc::format!("duplicate id {name:?}"),
                });
            }
            let desc = tokenize(text, &vocab, max_desc_len, 1);
            if text.split_whitespace().next().is_none() {
                return Err(DataError::EmptyDescription { kind, id: name.clone() });
            }
            names.push(name.clone());
            descs.push(desc);
        }
        Ok((names, ids, descs))
    };

    let (entity_names, entity_ids, entity_descriptions) = intern(entities, "entity")?;
    let (relation_names, relation_ids, relation_descriptions) = intern(relations, "relation")?;

    let entity = |name: &str| -> Result<usize, DataError> {
        entity_ids
            .get(name)
            .copied()
            .ok_or_else(|| DataError::UnknownId { kind: "entity", id: name.to_string() })
    };
    let relation = |name: &str| -> Result<usize, DataError> {
        relation_ids
            .get(name)
            .copied()
            .ok_or_else(|| DataError::UnknownId { kind: "relation", id: name.to_string() })
    };

    let mut triplets = BTreeSet::new();
    for (h, r, t) in triplet_rows {
        let trip = Triplet { head: entity(h)?, relation: relation(r)?, tail: entity(t)? };
        if !triplets.insert(trip) {
            return Err(DataError::DuplicateTriplet {
                head: h.clone(),
                relation: r.clone(),
                tail: t.clone(),
            });
        }
    }

    let mut triplets_by_relation = alloc::vec![Vec::new(); relation_names.len()];
    for t in &triplets {
        triplets_by_relation[t.relation].push(*t);
    }
    for (r, list) in triplets_by_relation.iter().enumerate() {
        if list.is_empty() {
            return Err(DataError::NoTriplets { relation: relation_names[r].clone() });
        }
    }

    let mut seen = BTreeSet::new();
    let mut resolve = |names: &[String]| -> Result<BTreeSet<usize>, DataError> {
        let mut out = BTreeSet::new();
        for name in names {
            let id = relation(name)?;
            if !seen.insert(id) {
                return Err(DataError::SplitOverlap { relation: name.clone() });
            }
            out.insert(id);
        }
        Ok(out)
    };
    let train = resolve(&splits.train)?;
    let val = resolve(&splits.val)?;
    let test = resolve(&splits.test)?;
    for (r, name) in relation_names.iter().enumerate() {
        if !seen.contains(&r) {
            return Err(DataError::SplitUncovered { relation: name.clone() });
        }
    }

    Ok(KnowledgeGraphDataset {
        vocab,
        entity_names,
        relation_names,
        entity_ids,
        relation_ids,
        entity_descriptions,
        relation_descriptions,
        triplets,
        triplets_by_relation,
        train,
        val,
        test,
    })
}

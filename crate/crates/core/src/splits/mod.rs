//! Dataset partitions: template-disjoint, length-extrapolation and i.i.d.
//! known/unknown splits.

pub mod lexer;
pub mod template;

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io;

pub use lexer::{lex_sql, SqlToken, TokenKind};
pub use template::{mask_template, Schema, SchemaTable};

/// One text-to-SQL pair of a dataset file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetItem {
    pub id: String,
    pub question: String,
    pub sql: String,
    pub db_id: String,
}

/// Reads a dataset JSONL file; every query must lex and ids must be unique.
pub fn load_dataset(path: &Path) -> Result<Vec<DatasetItem>> {
    let items: Vec<DatasetItem> = io::read_jsonl(path)?;
    let mut seen = HashSet::new();
    for item in &items {
        lex_sql(&item.sql).map_err(|e| Error::InvalidRecord {
            id: item.id.clone(),
            reason: e.to_string(),
        })?;
        if !seen.insert(item.id.as_str()) {
            return Err(Error::DuplicateId(item.id.clone()));
        }
    }
    Ok(items)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitKind {
    Template,
    Length,
    Iid,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SplitDiagnostics {
    pub requested_fraction: f64,
    pub achieved_fraction: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub train_templates: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub test_templates: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub template_overlap: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_train_length: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min_test_length: Option<usize>,
    /// Test items moved to train because they held a token unseen in train.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub moved_count: Option<usize>,
    /// Ids of the moved items, in length order.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub moved_ids: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub uncovered_test_tokens: Option<usize>,
}

/// A partition of dataset ids. For i.i.d. splits `train_ids` is the known
/// half and `test_ids` the unknown half.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitResult {
    pub kind: SplitKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub train_ids: Vec<String>,
    pub test_ids: Vec<String>,
    pub diagnostics: SplitDiagnostics,
}

impl SplitResult {
    pub fn known_ids(&self) -> &[String] {
        &self.train_ids
    }

    pub fn unknown_ids(&self) -> &[String] {
        &self.test_ids
    }

    /// Ids appearing on both sides.
    pub fn overlap(&self) -> usize {
        let train: HashSet<&str> = self.train_ids.iter().map(String::as_str).collect();
        self.test_ids
            .iter()
            .filter(|id| train.contains(id.as_str()))
            .count()
    }
}

fn check_fraction(f: f64) -> Result<()> {
    if f > 0.0 && f < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "fraction {f} must lie in (0, 1)"
        )))
    }
}

fn achieved(test: usize, total: usize) -> f64 {
    test as f64 / total as f64
}

/// Whole template groups go to test, in seeded random order, until the test
/// side holds at least `test_fraction` of the items. At least one group
/// always stays in train.
pub fn template_split(
    items: &[DatasetItem],
    test_fraction: f64,
    seed: u64,
    schema: Option<&Schema>,
) -> Result<SplitResult> {
    check_fraction(test_fraction)?;
    let mut groups: BTreeMap<String, Vec<usize>> = BTreeMap::new();
    for (idx, item) in items.iter().enumerate() {
        let tpl = mask_template(&item.sql, schema).map_err(|e| Error::InvalidRecord {
            id: item.id.clone(),
            reason: e.to_string(),
        })?;
        groups.entry(tpl).or_default().push(idx);
    }
    if groups.len() < 2 {
        return Err(Error::Degenerate(format!(
            "template split needs at least 2 distinct templates, found {}",
            groups.len()
        )));
    }
    let mut order: Vec<&Vec<usize>> = groups.values().collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));

    let target = test_fraction * items.len() as f64;
    let mut in_test = vec![false; items.len()];
    let mut test_count = 0usize;
    let mut test_groups = 0usize;
    for group in &order[..order.len() - 1] {
        if test_count as f64 >= target {
            break;
        }
        for &idx in group.iter() {
            in_test[idx] = true;
        }
        test_count += group.len();
        test_groups += 1;
    }

    let (train_ids, test_ids) = partition_ids(items.iter().map(|i| &i.id), &in_test);
    let mut result = SplitResult {
        kind: SplitKind::Template,
        seed: Some(seed),
        train_ids,
        test_ids,
        diagnostics: SplitDiagnostics {
            requested_fraction: test_fraction,
            achieved_fraction: achieved(test_count, items.len()),
            train_templates: Some(groups.len() - test_groups),
            test_templates: Some(test_groups),
            ..Default::default()
        },
    };
    let train_tpl: BTreeSet<&String> = groups
        .iter()
        .filter(|(_, g)| !in_test[g[0]])
        .map(|(t, _)| t)
        .collect();
    let overlap = groups
        .iter()
        .filter(|(t, g)| g.iter().any(|&i| in_test[i]) && train_tpl.contains(t))
        .count();
    result.diagnostics.template_overlap = Some(overlap);
    Ok(result)
}

fn partition_ids<'a>(ids: impl Iterator<Item = &'a String>, in_test: &[bool]) -> (Vec<String>, Vec<String>) {
    let mut train = Vec::new();
    let mut test = Vec::new();
    for (id, &t) in ids.zip(in_test) {
        if t {
            test.push(id.clone());
        } else {
            train.push(id.clone());
        }
    }
    (train, test)
}

/// Case-folded token texts of a query.
pub fn token_set(tokens: &[SqlToken]) -> BTreeSet<String> {
    tokens.iter().map(|t| t.text.to_lowercase()).collect()
}

/// Shortest queries train, longest test, with every test token seen in train.
///
/// Items are ordered by token count (ties by id) and the longest
/// `ceil(test_fraction * N)` are proposed as test. Then, until nothing
/// changes, test items holding a token missing from train move to train.
/// Train items that were not moved are never longer than any test item.
pub fn length_split(items: &[DatasetItem], test_fraction: f64) -> Result<SplitResult> {
    check_fraction(test_fraction)?;
    if items.len() < 2 {
        return Err(Error::TooFewPoints {
            needed: 2,
            got: items.len(),
        });
    }
    let mut lexed: Vec<(usize, &DatasetItem, BTreeSet<String>)> = items
        .iter()
        .map(|item| {
            let toks = lex_sql(&item.sql).map_err(|e| Error::InvalidRecord {
                id: item.id.clone(),
                reason: e.to_string(),
            })?;
            Ok((toks.len(), item, token_set(&toks)))
        })
        .collect::<Result<_>>()?;
    lexed.sort_by(|a, b| a.0.cmp(&b.0).then_with(|| a.1.id.cmp(&b.1.id)));

    let n = lexed.len();
    let n_test = ((test_fraction * n as f64).ceil() as usize).clamp(1, n - 1);
    let mut in_test: Vec<bool> = (0..n).map(|i| i >= n - n_test).collect();
    let mut moved = vec![false; n];

    loop {
        let mut vocab: HashSet<&str> = HashSet::new();
        for (i, (_, _, toks)) in lexed.iter().enumerate() {
            if !in_test[i] {
                vocab.extend(toks.iter().map(String::as_str));
            }
        }
        let violators: Vec<usize> = (0..n)
            .filter(|&i| in_test[i] && lexed[i].2.iter().any(|t| !vocab.contains(t.as_str())))
            .collect();
        if violators.is_empty() {
            break;
        }
        for i in violators {
            in_test[i] = false;
            moved[i] = true;
        }
        if !in_test.iter().any(|&t| t) {
            return Err(Error::Degenerate(
                "token-coverage repair moved every test item to train".into(),
            ));
        }
    }

    let max_train_length = (0..n)
        .filter(|&i| !in_test[i] && !moved[i])
        .map(|i| lexed[i].0)
        .max();
    let min_test_length = (0..n).filter(|&i| in_test[i]).map(|i| lexed[i].0).min();
    let test_count = in_test.iter().filter(|&&t| t).count();
    let moved_ids: Vec<String> = (0..n)
        .filter(|&i| moved[i])
        .map(|i| lexed[i].1.id.clone())
        .collect();
    let (train_ids, test_ids) = partition_ids(lexed.iter().map(|(_, it, _)| &it.id), &in_test);
    Ok(SplitResult {
        kind: SplitKind::Length,
        seed: None,
        train_ids,
        test_ids,
        diagnostics: SplitDiagnostics {
            requested_fraction: test_fraction,
            achieved_fraction: achieved(test_count, n),
            max_train_length,
            min_test_length,
            moved_count: Some(moved_ids.len()),
            moved_ids: Some(moved_ids),
            uncovered_test_tokens: Some(0),
            ..Default::default()
        },
    })
}

/// Seeded uniform shuffle; the first `ceil(fraction * N)` ids are known.
pub fn iid_split(ids: &[String], fraction: f64, seed: u64) -> Result<SplitResult> {
    check_fraction(fraction)?;
    if ids.len() < 2 {
        return Err(Error::TooFewPoints {
            needed: 2,
            got: ids.len(),
        });
    }
    let n = ids.len();
    let mut shuffled = ids.to_vec();
    shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n_known = ((fraction * n as f64).ceil() as usize).clamp(1, n - 1);
    let test_ids = shuffled.split_off(n_known);
    Ok(SplitResult {
        kind: SplitKind::Iid,
        seed: Some(seed),
        train_ids: shuffled,
        test_ids,
        diagnostics: SplitDiagnostics {
            requested_fraction: fraction,
            achieved_fraction: achieved(n_known, n),
            ..Default::default()
        },
    })
}

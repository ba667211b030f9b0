use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Space {
    Token,
    Context,
}

impl Space {
    pub fn dim(self) -> usize {
        match self {
            Space::Token => super::TOKEN_DIM,
            Space::Context => super::CONTEXT_DIM,
        }
    }
}

/// Document frequencies of one term space over the training split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdfTable {
    pub space: Space,
    pub doc_count: u64,
    pub df: BTreeMap<String, u64>,
}

impl IdfTable {
    /// `ln((1 + N) / (1 + df)) + 1`; unseen terms use df = 0.
    pub fn idf(&self, term: &str) -> f64 {
        let df = self.df.get(term).copied().unwrap_or(0);
        ((1.0 + self.doc_count as f64) / (1.0 + df as f64)).ln() + 1.0
    }
}

/// One document per training function; a term counts once per document.
pub fn fit_idf<'a, I, D>(documents: I, space: Space) -> Result<IdfTable>
where
    I: IntoIterator<Item = D>,
    D: IntoIterator<Item = &'a String>,
{
    let mut df: BTreeMap<String, u64> = BTreeMap::new();
    let mut doc_count = 0u64;
    for doc in documents {
        doc_count += 1;
        let unique: BTreeSet<&String> = doc.into_iter().collect();
        for term in unique {
            *df.entry(term.clone()).or_default() += 1;
        }
    }
    if doc_count == 0 {
        return Err(Error::EmptyCorpus);
    }
    Ok(IdfTable {
        space,
        doc_count,
        df,
    })
}

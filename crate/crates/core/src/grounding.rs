//! Free-form command routing by max-pooled cosine similarity against
//! per-task paraphrase embeddings.
//!
//! Embeddings are produced offline by a frozen sentence encoder and read from
//! disk; this module never runs an encoder and never touches controller weights.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::task::Task;

pub const EMBED_DIM: usize = 384;
pub const BUNDLE_VERSION: u32 = 1;
const NORM_TOLERANCE: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Paraphrase {
    pub text: String,
    pub vec: Vec<f32>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParaphraseBundle {
    pub version: u32,
    pub encoder: String,
    pub dim: usize,
    /// Indexed by task id.
    pub tasks: [Vec<Paraphrase>; 5],
}

#[derive(Debug, Serialize, Deserialize)]
struct BundleFile {
    version: u32,
    encoder: String,
    dim: usize,
    tasks: BTreeMap<String, Vec<Paraphrase>>,
}

/// One labeled query from a held-out fixture.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledQuery {
    pub text: String,
    pub label: usize,
    pub vec: Vec<f32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryFixture {
    pub version: u32,
    pub encoder: String,
    pub dim: usize,
    pub queries: Vec<LabeledQuery>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Route {
    pub task: Task,
    pub score: f64,
    /// Max-pooled similarity for every task.
    pub scores: [f64; 5],
}

impl Route {
    pub fn is_confident(&self, min_score: Option<f64>) -> bool {
        min_score.map_or(true, |m| self.score >= m)
    }
}

fn norm(v: &[f32]) -> f64 {
    v.iter()
        .map(|&x| f64::from(x) * f64::from(x))
        .sum::<f64>()
        .sqrt()
}

pub fn cosine(a: &[f32], b: &[f32]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::Dimension {
            expected: a.len(),
            got: b.len(),
        });
    }
    let (na, nb) = (norm(a), norm(b));
    if !(na > 0.0) || !(nb > 0.0) {
        return Err(Error::Routing("zero-norm embedding".into()));
    }
    let dot: f64 = a
        .iter()
        .zip(b)
        .map(|(&x, &y)| f64::from(x) * f64::from(y))
        .sum();
    Ok((dot / (na * nb)).clamp(-1.0, 1.0))
}

/// Picks the task whose best paraphrase is most similar to the query.
/// Ties go to the lowest task id.
pub fn route(query: &[f32], bundle: &ParaphraseBundle) -> Result<Route> {
    if query.len() != bundle.dim {
        return Err(Error::Dimension {
            expected: bundle.dim,
            got: query.len(),
        });
    }
    if !(norm(query) > 0.0) {
        return Err(Error::Routing("zero-norm query".into()));
    }
    let mut scores = [f64::NEG_INFINITY; 5];
    for (k, paraphrases) in bundle.tasks.iter().enumerate() {
        if paraphrases.is_empty() {
            return Err(Error::Routing(format!("task {k} has no paraphrases")));
        }
        for p in paraphrases {
            scores[k] = scores[k].max(cosine(query, &p.vec)?);
        }
    }
    let mut best = 0;
    for k in 1..5 {
        if scores[k] > scores[best] {
            best = k;
        }
    }
    Ok(Route {
        task: Task::ALL[best],
        score: scores[best],
        scores,
    })
}

fn check_vector(vec: &mut [f32], dim: usize, what: &str) -> Result<()> {
    if vec.len() != dim {
        return Err(Error::Dimension {
            expected: dim,
            got: vec.len(),
        });
    }
    let n = norm(vec);
    if !n.is_finite() || (n - 1.0).abs() > NORM_TOLERANCE {
        return Err(Error::Bundle(format!(
            "{what}: embedding norm {n:.6} is not unit"
        )));
    }
    let inv = 1.0 / n;
    for x in vec.iter_mut() {
        *x = (f64::from(*x) * inv) as f32;
    }
    Ok(())
}

impl ParaphraseBundle {
    pub fn from_json(text: &str) -> Result<Self> {
        let file: BundleFile = serde_json::from_str(text)
            .map_err(|e| Error::Bundle(format!("malformed bundle: {e}")))?;
        if file.version != BUNDLE_VERSION {
            return Err(Error::Bundle(format!(
                "unsupported bundle version {}",
                file.version
            )));
        }
        if file.dim != EMBED_DIM {
            return Err(Error::Dimension {
                expected: EMBED_DIM,
                got: file.dim,
            });
        }
        let mut tasks: [Vec<Paraphrase>; 5] = Default::default();
        for (key, mut list) in file.tasks {
            let id: usize = key
                .parse()
                .map_err(|_| Error::Bundle(format!("task key `{key}` is not an id")))?;
            let slot = tasks
                .get_mut(id)
                .ok_or_else(|| Error::Bundle(format!("task key `{key}` out of range")))?;
            for p in list.iter_mut() {
                check_vector(&mut p.vec, file.dim, &p.text)?;
            }
            *slot = list;
        }
        if let Some(k) = tasks.iter().position(|t| t.is_empty()) {
            return Err(Error::Bundle(format!("task {k} has no paraphrases")));
        }
        Ok(Self {
            version: file.version,
            encoder: file.encoder,
            dim: file.dim,
            tasks,
        })
    }

    pub fn to_json(&self) -> String {
        let file = BundleFile {
            version: self.version,
            encoder: self.encoder.clone(),
            dim: self.dim,
            tasks: self
                .tasks
                .iter()
                .enumerate()
                .map(|(k, v)| (k.to_string(), v.clone()))
                .collect(),
        };
        serde_json::to_string(&file).expect("bundle serializes")
    }

    /// Finds a stored paraphrase by exact text.
    pub fn lookup(&self, text: &str) -> Option<&[f32]> {
        self.tasks
            .iter()
            .flatten()
            .find(|p| p.text == text)
            .map(|p| p.vec.as_slice())
    }
}

pub fn load_bundle(path: impl AsRef<Path>) -> Result<ParaphraseBundle> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    ParaphraseBundle::from_json(&text)
}

impl QueryFixture {
    pub fn from_json(text: &str) -> Result<Self> {
        let mut fixture: QueryFixture = serde_json::from_str(text)
            .map_err(|e| Error::Bundle(format!("malformed fixture: {e}")))?;
        if fixture.dim != EMBED_DIM {
            return Err(Error::Dimension {
                expected: EMBED_DIM,
                got: fixture.dim,
            });
        }
        let dim = fixture.dim;
        for q in fixture.queries.iter_mut() {
            if q.label >= 5 {
                return Err(Error::Bundle(format!("label {} out of range", q.label)));
            }
            check_vector(&mut q.vec, dim, &q.text)?;
        }
        Ok(fixture)
    }

    pub fn lookup(&self, text: &str) -> Option<&[f32]> {
        self.queries
            .iter()
            .find(|q| q.text == text)
            .map(|q| q.vec.as_slice())
    }
}

pub fn load_query_fixture(path: impl AsRef<Path>) -> Result<QueryFixture> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    QueryFixture::from_json(&text)
}

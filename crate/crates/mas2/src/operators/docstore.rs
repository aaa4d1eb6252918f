use std::collections::{BTreeMap, HashMap};
use std::io;
use std::path::Path;

/// Directory of `<docid>.txt` files with a BM25 index built at load time.
#[derive(Debug, Clone, Default)]
pub struct DocStore {
    docs: BTreeMap<String, Doc>,
    doc_freq: HashMap<String, usize>,
    avg_len: f64,
}

#[derive(Debug, Clone)]
struct Doc {
    body: String,
    terms: HashMap<String, usize>,
    len: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchHit {
    pub docid: String,
    pub score: f64,
    pub title: String,
}

fn terms(text: &str) -> impl Iterator<Item = String> + '_ {
    text.split(|c: char| !c.is_alphanumeric()).filter(|t| !t.is_empty()).map(str::to_lowercase)
}

impl DocStore {
    pub fn open(dir: &Path) -> io::Result<Self> {
        let mut docs = Vec::new();
        for entry in std::fs::read_dir(dir)? {
            let path = entry?.path();
            if path.extension().is_some_and(|e| e == "txt") {
                if let Some(stem) = path.file_stem().and_then(|s| s.to_str()) {
                    docs.push((stem.to_string(), std::fs::read_to_string(&path)?));
                }
            }
        }
        Ok(Self::from_docs(docs))
    }

    pub fn from_docs(docs: impl IntoIterator<Item = (String, String)>) -> Self {
        let mut store = DocStore::default();
        for (id, body) in docs {
            let mut tf = HashMap::new();
            let mut len = 0;
            for t in terms(&body) {
                *tf.entry(t).or_insert(0) += 1;
                len += 1;
            }
            store.docs.insert(id, Doc { body, terms: tf, len });
        }
        for doc in store.docs.values() {
            for t in doc.terms.keys() {
                *store.doc_freq.entry(t.clone()).or_insert(0) += 1;
            }
        }
        let total: usize = store.docs.values().map(|d| d.len).sum();
        store.avg_len = if store.docs.is_empty() { 0.0 } else { total as f64 / store.docs.len() as f64 };
        store
    }

    pub fn len(&self) -> usize {
        self.docs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.docs.is_empty()
    }

    pub fn get(&self, docid: &str) -> Option<&str> {
        self.docs.get(docid).map(|d| d.body.as_str())
    }

    /// Top `k` documents with a positive score, best first; ties by id.
    pub fn search(&self, query: &str, k: usize) -> Vec<SearchHit> {
        const K1: f64 = 1.2;
        const B: f64 = 0.75;
        let n = self.docs.len() as f64;
        let mut q: Vec<String> = terms(query).collect();
        q.sort();
        q.dedup();
        let mut hits: Vec<SearchHit> = self
            .docs
            .iter()
            .filter_map(|(id, doc)| {
                let score: f64 = q
                    .iter()
                    .filter_map(|t| {
                        let tf = *doc.terms.get(t)? as f64;
                        let df = self.doc_freq[t] as f64;
                        let idf = ((n - df + 0.5) / (df + 0.5) + 1.0).ln();
                        let norm = K1 * (1.0 - B + B * doc.len as f64 / self.avg_len.max(1.0));
                        Some(idf * tf * (K1 + 1.0) / (tf + norm))
                    })
                    .sum();
                (score > 0.0).then(|| SearchHit {
                    docid: id.clone(),
                    score,
                    title: doc.body.lines().map(str::trim).find(|l| !l.is_empty()).unwrap_or("").chars().take(120).collect(),
                })
            })
            .collect();
        hits.sort_by(|a, b| b.score.total_cmp(&a.score).then_with(|| a.docid.cmp(&b.docid)));
        hits.truncate(k);
        hits
    }
}

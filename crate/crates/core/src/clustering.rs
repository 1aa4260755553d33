//! Question embedding and cohort partitioning.
//!
//! Questions are embedded by an [`EmbeddingProvider`] and partitioned with
//! spherical k-means. Output is canonical: members are sorted, clusters are
//! ordered by their first member and numbered densely from zero, so the
//! partition does not depend on input order.

use std::fs::File;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const HASHED_DIMENSION: usize = 512;
pub const MAX_ITERATIONS: usize = 100;
pub const SHIFT_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingVector(Vec<f64>);

impl EmbeddingVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidArgument("embedding has zero dimension".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("embedding has non-finite entries".into()));
        }
        Ok(EmbeddingVector(values))
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn dimension(&self) -> usize {
        self.0.len()
    }

    pub fn norm(&self) -> f64 {
        dot(&self.0, &self.0).sqrt()
    }

    pub fn cosine(&self, other: &EmbeddingVector) -> f64 {
        let denom = self.norm() * other.norm();
        if denom == 0.0 {
            0.0
        } else {
            dot(&self.0, &other.0) / denom
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Source of question embeddings. Implementations must be shareable across
/// threads; [`embed`] may call `embed_batch` concurrently.
pub trait EmbeddingProvider: Send + Sync {
    fn embed_batch(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>>;
}

/// Deterministic feature-hashing embedder: word unigrams plus character
/// trigrams, signed FNV-1a buckets, L2-normalized.
#[derive(Debug, Clone)]
pub struct HashedTermFrequency {
    dimension: usize,
}

impl Default for HashedTermFrequency {
    fn default() -> Self {
        HashedTermFrequency { dimension: HASHED_DIMENSION }
    }
}

impl HashedTermFrequency {
    pub fn with_dimension(dimension: usize) -> Result<Self> {
        if dimension == 0 {
            return Err(Error::InvalidArgument("dimension must be positive".into()));
        }
        Ok(HashedTermFrequency { dimension })
    }

    pub fn embed_text(&self, text: &str) -> EmbeddingVector {
        let mut v = vec![0.0; self.dimension];
        let lowered = text.to_lowercase();
        let mut any = false;
        for word in lowered.split(|c: char| !c.is_alphanumeric()).filter(|w| !w.is_empty()) {
            any = true;
            self.add_feature(&mut v, format!("w:{word}").as_bytes(), 1.0);
            let padded: Vec<char> = format!("^{word}$").chars().collect();
            for gram in padded.windows(3) {
                let g: String = gram.iter().collect();
                self.add_feature(&mut v, format!("c:{g}").as_bytes(), 0.5);
            }
        }
        if !any {
            self.add_feature(&mut v, b"<empty>", 1.0);
        }
        let norm = dot(&v, &v).sqrt();
        if norm > 0.0 {
            v.iter_mut().for_each(|x| *x /= norm);
        } else {
            // every feature cancelled out; fall back to a fixed axis
            v[0] = 1.0;
        }
        EmbeddingVector(v)
    }

    fn add_feature(&self, v: &mut [f64], feature: &[u8], weight: f64) {
        let h = fnv1a(feature);
        let idx = (h % self.dimension as u64) as usize;
        let sign = if h >> 63 == 0 { 1.0 } else { -1.0 };
        v[idx] += sign * weight;
    }
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h
}

impl EmbeddingProvider for HashedTermFrequency {
    fn embed_batch(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>> {
        Ok(texts.iter().map(|t| self.embed_text(t)).collect())
    }
}

/// JSON-over-HTTP embedding endpoint.
///
/// Request body `{"model": ..., "inputs": [...]}`; expected response
/// `{"vectors": [[...], ...]}`. The bearer token, if any, is read from the
/// named environment variable at call time.
#[derive(Debug, Clone)]
pub struct HttpEmbeddingProvider {
    pub url: String,
    pub model: String,
    pub credential_env: Option<String>,
    client: reqwest::blocking::Client,
}

#[derive(Serialize)]
struct EmbeddingRequest<'a> {
    model: &'a str,
    inputs: &'a [String],
}

#[derive(Deserialize)]
struct EmbeddingResponse {
    vectors: Vec<Vec<f64>>,
}

impl HttpEmbeddingProvider {
    pub fn new(url: impl Into<String>, model: impl Into<String>, credential_env: Option<String>) -> Self {
        HttpEmbeddingProvider {
            url: url.into(),
            model: model.into(),
            credential_env,
            client: reqwest::blocking::Client::new(),
        }
    }
}

impl EmbeddingProvider for HttpEmbeddingProvider {
    fn embed_batch(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>> {
        let fail = |message: String| Error::Embedding { batch: texts.to_vec(), message };
        let mut req = self
            .client
            .post(&self.url)
            .json(&EmbeddingRequest { model: &self.model, inputs: texts });
        if let Some(var) = &self.credential_env {
            let token = std::env::var(var).map_err(|_| fail(format!("credential variable {var} is unset")))?;
            req = req.bearer_auth(token);
        }
        let resp = req
            .send()
            .and_then(|r| r.error_for_status())
            .map_err(|e| fail(e.to_string()))?;
        let body: EmbeddingResponse = resp.json().map_err(|e| fail(e.to_string()))?;
        body.vectors
            .into_iter()
            .map(EmbeddingVector::new)
            .collect::<Result<_>>()
            .map_err(|e| fail(e.to_string()))
    }
}

#[derive(Debug, Clone, Copy)]
pub struct EmbedOptions {
    pub batch_size: usize,
    pub max_in_flight: usize,
}

impl Default for EmbedOptions {
    fn default() -> Self {
        EmbedOptions { batch_size: 64, max_in_flight: 4 }
    }
}

/// Embeds `questions` in order. Batches are requested concurrently, at
/// most `max_in_flight` at a time, and merged back in input order.
pub fn embed(
    questions: &[String],
    provider: &dyn EmbeddingProvider,
    opts: EmbedOptions,
) -> Result<Vec<EmbeddingVector>> {
    if questions.is_empty() {
        return Err(Error::InvalidArgument("no questions to embed".into()));
    }
    let batches: Vec<&[String]> = questions.chunks(opts.batch_size.max(1)).collect();
    let mut out = Vec::with_capacity(questions.len());
    for wave in batches.chunks(opts.max_in_flight.max(1)) {
        let results: Vec<Result<Vec<EmbeddingVector>>> = std::thread::scope(|s| {
            let handles: Vec<_> = wave
                .iter()
                .map(|batch| s.spawn(move || provider.embed_batch(batch)))
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("embedding worker panicked"))
                .collect()
        });
        for (batch, result) in wave.iter().zip(results) {
            let vectors = result?;
            if vectors.len() != batch.len() {
                return Err(Error::Embedding {
                    batch: batch.to_vec(),
                    message: format!("expected {} vectors, got {}", batch.len(), vectors.len()),
                });
            }
            out.extend(vectors);
        }
    }
    let dim = out[0].dimension();
    if out.iter().any(|v| v.dimension() != dim) {
        return Err(Error::InvalidArgument("embedding dimensions differ within one run".into()));
    }
    Ok(out)
}

/// Number of clusters for a batch of `n` markets: `max(1, floor(n / 10))`.
pub fn choose_k(n: usize) -> usize {
    (n / 10).max(1)
}

fn normalized(v: &[f64]) -> Vec<f64> {
    let n = dot(v, v).sqrt();
    if n == 0.0 {
        v.to_vec()
    } else {
        v.iter().map(|x| x / n).collect()
    }
}

fn nearest(point: &[f64], centroids: &[Vec<f64>]) -> usize {
    // strict comparison keeps the lowest index on ties
    let mut best = 0;
    let mut best_sim = f64::NEG_INFINITY;
    for (i, c) in centroids.iter().enumerate() {
        let sim = dot(point, c);
        if sim > best_sim {
            best = i;
            best_sim = sim;
        }
    }
    best
}

/// Spherical k-means. Returns one label in `0..k` per vector; labels may
/// leave some clusters empty when the data has fewer than `k` distinct
/// directions.
///
/// Initialization picks the first centroid with a seeded generator and then
/// repeatedly adds the point farthest (in cosine distance) from all chosen
/// centroids.
pub fn spherical_kmeans(vectors: &[EmbeddingVector], k: usize, seed: u64) -> Result<Vec<usize>> {
    let n = vectors.len();
    if k == 0 {
        return Err(Error::InvalidArgument("k must be positive".into()));
    }
    if k > n {
        return Err(Error::InvalidArgument(format!("k = {k} exceeds {n} vectors")));
    }
    let dim = vectors[0].dimension();
    if vectors.iter().any(|v| v.dimension() != dim) {
        return Err(Error::InvalidArgument("embedding dimensions differ".into()));
    }
    let points: Vec<Vec<f64>> = vectors.iter().map(|v| normalized(v.values())).collect();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let first = rng.gen_range(0..n);
    let mut centroids = vec![points[first].clone()];
    let mut min_dist: Vec<f64> = points.iter().map(|p| 1.0 - dot(p, &points[first])).collect();
    while centroids.len() < k {
        let mut pick = 0;
        for i in 1..n {
            if min_dist[i] > min_dist[pick] {
                pick = i;
            }
        }
        centroids.push(points[pick].clone());
        for (d, p) in min_dist.iter_mut().zip(&points) {
            *d = d.min(1.0 - dot(p, &points[pick]));
        }
    }

    let mut labels: Vec<usize> = points.iter().map(|p| nearest(p, &centroids)).collect();
    for _ in 0..MAX_ITERATIONS {
        let mut sums = vec![vec![0.0; dim]; k];
        for (p, &l) in points.iter().zip(&labels) {
            sums[l].iter_mut().zip(p).for_each(|(s, x)| *s += x);
        }
        let mut shift: f64 = 0.0;
        for (c, sum) in centroids.iter_mut().zip(sums) {
            if dot(&sum, &sum) == 0.0 {
                continue;
            }
            let next = normalized(&sum);
            let d = c.iter().zip(&next).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            shift = shift.max(d);
            *c = next;
        }
        let next_labels: Vec<usize> = points.iter().map(|p| nearest(p, &centroids)).collect();
        let changed = next_labels != labels;
        labels = next_labels;
        if shift < SHIFT_TOLERANCE || !changed {
            break;
        }
    }
    Ok(labels)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClusterManifest {
    pub cluster_id: usize,
    pub questions: Vec<String>,
}

/// Partitions `questions` (paired index-wise with `vectors`) into at most
/// `k` canonical manifests.
pub fn cluster(
    questions: &[String],
    vectors: &[EmbeddingVector],
    k: usize,
    seed: u64,
) -> Result<Vec<ClusterManifest>> {
    if questions.len() != vectors.len() {
        return Err(Error::InvalidArgument(format!(
            "{} questions but {} vectors",
            questions.len(),
            vectors.len()
        )));
    }
    let mut order: Vec<usize> = (0..questions.len()).collect();
    order.sort_by(|&a, &b| questions[a].cmp(&questions[b]));
    if order.windows(2).any(|w| questions[w[0]] == questions[w[1]]) {
        return Err(Error::InvalidArgument("duplicate question in clustering input".into()));
    }
    let sorted_vectors: Vec<EmbeddingVector> = order.iter().map(|&i| vectors[i].clone()).collect();
    let labels = spherical_kmeans(&sorted_vectors, k, seed)?;

    let mut groups: Vec<Vec<String>> = vec![Vec::new(); k];
    for (&i, &l) in order.iter().zip(&labels) {
        groups[l].push(questions[i].clone());
    }
    // members are already sorted because `order` is
    groups.retain(|g| !g.is_empty());
    groups.sort();
    Ok(groups
        .into_iter()
        .enumerate()
        .map(|(cluster_id, questions)| ClusterManifest { cluster_id, questions })
        .collect())
}

/// Embeds and clusters a cohort with `choose_k` clusters.
pub fn cluster_questions(
    questions: &[String],
    provider: &dyn EmbeddingProvider,
    opts: EmbedOptions,
    seed: u64,
) -> Result<Vec<ClusterManifest>> {
    let vectors = embed(questions, provider, opts)?;
    cluster(questions, &vectors, choose_k(questions.len()), seed)
}

pub fn manifest_filename(cluster_id: usize) -> String {
    format!("cluster_{cluster_id}.csv")
}

/// Writes `cluster_{id}.csv` files with a single `question` column.
pub fn write_manifests(manifests: &[ClusterManifest], directory: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    let dir = directory.as_ref();
    std::fs::create_dir_all(dir).map_err(Error::io(dir))?;
    let mut paths = Vec::with_capacity(manifests.len());
    for m in manifests {
        let path = dir.join(manifest_filename(m.cluster_id));
        let file = File::create(&path).map_err(Error::io(&path))?;
        let mut w = csv::Writer::from_writer(file);
        w.write_record(["question"])?;
        for q in &m.questions {
            w.write_record([q])?;
        }
        w.flush().map_err(Error::io(&path))?;
        paths.push(path);
    }
    Ok(paths)
}

pub fn read_manifest(path: impl AsRef<Path>) -> Result<ClusterManifest> {
    let path = path.as_ref();
    let cluster_id = path
        .file_stem()
        .and_then(|s| s.to_str())
        .and_then(|s| s.strip_prefix("cluster_"))
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| Error::InvalidArgument(format!("{} is not a cluster manifest", path.display())))?;
    let file = File::open(path).map_err(Error::io(path))?;
    let mut reader = csv::Reader::from_reader(file);
    if reader.headers()?.iter().next() != Some("question") {
        return Err(Error::MissingColumn("question".into()));
    }
    let questions = reader
        .records()
        .map(|r| r.map(|r| r.get(0).unwrap_or("").to_string()))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    Ok(ClusterManifest { cluster_id, questions })
}

/// Reads every `cluster_{id}.csv` in `directory`, ordered by id.
pub fn read_manifests(directory: impl AsRef<Path>) -> Result<Vec<ClusterManifest>> {
    let dir = directory.as_ref();
    let mut manifests = Vec::new();
    for entry in std::fs::read_dir(dir).map_err(Error::io(dir))? {
        let path = entry.map_err(Error::io(dir))?.path();
        let is_manifest = path
            .file_name()
            .and_then(|n| n.to_str())
            .is_some_and(|n| n.starts_with("cluster_") && n.ends_with(".csv"));
        if is_manifest {
            manifests.push(read_manifest(&path)?);
        }
    }
    manifests.sort_by_key(|m| m.cluster_id);
    Ok(manifests)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vec_of(values: &[f64]) -> EmbeddingVector {
        EmbeddingVector::new(values.to_vec()).unwrap()
    }

    fn strings(items: &[&str]) -> Vec<String> {
        items.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn choose_k_values() {
        assert_eq!(choose_k(217), 21);
        assert_eq!(choose_k(190), 19);
        assert_eq!(choose_k(9), 1);
        assert_eq!(choose_k(1), 1);
        assert_eq!(choose_k(10), 1);
        assert_eq!(choose_k(20), 2);
    }

    #[test]
    fn hashed_embedding_is_unit_norm_and_deterministic() {
        let e = HashedTermFrequency::default();
        for text in ["Will Trump increase tariffs on Canada before May?", "", "???", "a"] {
            let v = e.embed_text(text);
            assert_eq!(v.dimension(), HASHED_DIMENSION);
            assert!((v.norm() - 1.0).abs() < 1e-9, "{text:?}");
            assert_eq!(v, e.embed_text(text));
        }
    }

    #[test]
    fn hashed_embedding_prefers_paraphrase() {
        let e = HashedTermFrequency::default();
        let a = e.embed_text("tariffs on Canada");
        let b = e.embed_text("tariff on Canada");
        let c = e.embed_text("NBA finals winner");
        let direct = |x: &EmbeddingVector, y: &EmbeddingVector| -> f64 {
            x.values().iter().zip(y.values()).map(|(p, q)| p * q).sum()
        };
        assert!(direct(&a, &b) > direct(&a, &c));
        assert!((a.cosine(&b) - direct(&a, &b)).abs() < 1e-12);
    }

    #[test]
    fn embed_preserves_order_across_batches() {
        let e = HashedTermFrequency::default();
        let qs: Vec<String> = (0..37).map(|i| format!("question number {i}")).collect();
        let got = embed(&qs, &e, EmbedOptions { batch_size: 5, max_in_flight: 3 }).unwrap();
        for (q, v) in qs.iter().zip(&got) {
            assert_eq!(&e.embed_text(q), v);
        }
        assert!(embed(&[], &e, EmbedOptions::default()).is_err());
    }

    struct Failing;
    impl EmbeddingProvider for Failing {
        fn embed_batch(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>> {
            Err(Error::Embedding { batch: texts.to_vec(), message: "down".into() })
        }
    }

    #[test]
    fn provider_failure_carries_batch() {
        let qs = strings(&["a", "b", "c"]);
        let err = embed(&qs, &Failing, EmbedOptions { batch_size: 2, max_in_flight: 1 }).unwrap_err();
        assert!(err.is_retriable());
        match err {
            Error::Embedding { batch, .. } => assert_eq!(batch, strings(&["a", "b"])),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn identical_vectors_form_one_cluster() {
        let qs = strings(&["c", "a", "b"]);
        let vs = vec![vec_of(&[1.0, 0.0]); 3];
        let m = cluster(&qs, &vs, 1, 7).unwrap();
        assert_eq!(m, vec![ClusterManifest { cluster_id: 0, questions: strings(&["a", "b", "c"]) }]);
    }

    #[test]
    fn identical_vectors_with_extra_k_drop_empty_clusters() {
        let qs = strings(&["a", "b", "c"]);
        let vs = vec![vec_of(&[1.0, 0.0]); 3];
        let m = cluster(&qs, &vs, 3, 0).unwrap();
        assert_eq!(m.len(), 1);
        assert_eq!(m[0].questions.len(), 3);
    }

    #[test]
    fn k_larger_than_n_is_rejected() {
        let vs = vec![vec_of(&[1.0, 0.0]); 2];
        assert!(matches!(spherical_kmeans(&vs, 3, 0), Err(Error::InvalidArgument(_))));
        assert!(matches!(spherical_kmeans(&vs, 0, 0), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn planted_clouds_are_recovered() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut qs = Vec::new();
        let mut vs = Vec::new();
        for i in 0..40 {
            let base = if i % 2 == 0 { [1.0, 0.0, 0.0] } else { [0.0, 1.0, 0.0] };
            let v: Vec<f64> = base.iter().map(|b| b + rng.gen_range(-0.05..0.05)).collect();
            qs.push(format!("{}{i:02}", if i % 2 == 0 { "x" } else { "y" }));
            vs.push(vec_of(&v));
        }
        for seed in 0..5 {
            let m = cluster(&qs, &vs, 2, seed).unwrap();
            assert_eq!(m.len(), 2);
            assert!(m[0].questions.iter().all(|q| q.starts_with('x')));
            assert!(m[1].questions.iter().all(|q| q.starts_with('y')));

            // brute-force check: every point is closest to its own cluster's mean direction
            let centroid = |members: &[String]| -> Vec<f64> {
                let mut c = vec![0.0; 3];
                for q in members {
                    let i = qs.iter().position(|x| x == q).unwrap();
                    c.iter_mut().zip(vs[i].values()).for_each(|(a, b)| *a += b);
                }
                c
            };
            let cs = [centroid(&m[0].questions), centroid(&m[1].questions)];
            for (ci, manifest) in m.iter().enumerate() {
                for q in &manifest.questions {
                    let i = qs.iter().position(|x| x == q).unwrap();
                    let p = vs[i].values();
                    let sims: Vec<f64> = cs
                        .iter()
                        .map(|c| dot(p, c) / dot(c, c).sqrt())
                        .collect();
                    assert!(sims[ci] >= sims[1 - ci]);
                }
            }
        }
    }

    #[test]
    fn ties_join_lowest_centroid() {
        let centroids = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
        let p = normalized(&[1.0, 1.0]);
        assert_eq!(nearest(&p, &centroids), 0);
    }

    #[test]
    fn manifests_round_trip_through_files() {
        let dir = tempfile::tempdir().unwrap();
        let manifests = vec![
            ClusterManifest { cluster_id: 0, questions: strings(&["a, with comma", "b \"quoted\""]) },
            ClusterManifest { cluster_id: 1, questions: strings(&["c"]) },
        ];
        let paths = write_manifests(&manifests, dir.path()).unwrap();
        assert_eq!(paths.len(), 2);
        assert!(paths[0].ends_with("cluster_0.csv"));
        let text = std::fs::read_to_string(&paths[0]).unwrap();
        assert_eq!(text.lines().count(), 3);
        assert_eq!(read_manifests(dir.path()).unwrap(), manifests);
    }
}

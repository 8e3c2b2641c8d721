//! Deterministic synthetic corpora and embeddings for tests, benches and demos.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::corpus::{derive_document_id, CorpusManifest, DocumentRecord, DocumentStatus, PageRef};
use crate::matrix::DenseMatrix;
use crate::visual::store::normalize_in_place;
use crate::visual::EmbeddingStore;

/// Top-20 base URLs and document counts of the reference 1,000-PDF sample.
pub const TOP20_BASE_URLS: [(&str, u32); 20] = [
    ("house.gov", 179),
    ("gpo.gov", 86),
    ("uscourts.gov", 51),
    ("idaho.gov", 35),
    ("ky.gov", 30),
    ("usda.gov", 30),
    ("nysed.gov", 26),
    ("noaa.gov", 25),
    ("uspto.gov", 22),
    ("wa.gov", 21),
    ("utah.gov", 15),
    ("nasa.gov", 14),
    ("senate.gov", 13),
    ("ca.gov", 12),
    ("fda.gov", 12),
    ("hawaii.gov", 12),
    ("mass.gov", 10),
    ("wi.gov", 10),
    ("dhs.gov", 9),
    ("mt.gov", 8),
];

/// Page-count buckets of the same sample: (label, documents, total pages).
pub const PAGE_BUCKET_TOTALS: [(&str, u32, u64); 6] = [
    ("1", 327, 327),
    ("2-5", 394, 1074),
    ("6-20", 176, 1755),
    ("21-100", 62, 2761),
    ("100+", 28, 6827),
    ("null", 13, 0),
];

/// Documents outside the top 20: 184 domains with two documents and 12 with one.
const OTHER_PAIRS: u32 = 184;
const OTHER_SINGLES: u32 = 12;

pub fn synthetic_record(key: &str, base_url: &str, page_count: Option<u32>) -> DocumentRecord {
    DocumentRecord {
        id: derive_document_id(key.as_bytes()),
        source_url: format!("https://www.{base_url}/files/{key}.pdf"),
        base_url: base_url.to_string(),
        agency: crate::ingest::known_agency(base_url).map(str::to_string),
        file_size: 1024,
        page_count,
        status: if page_count.is_some() { DocumentStatus::Ok } else { DocumentStatus::Malformed },
        fetch_timestamp: Some("20081015000000".to_string()),
    }
}

fn other_base_urls() -> Vec<String> {
    let mut out = Vec::new();
    for i in 0..OTHER_PAIRS {
        out.push(format!("other{i:03}.gov"));
        out.push(format!("other{i:03}.gov"));
    }
    for i in 0..OTHER_SINGLES {
        out.push(format!("single{i:02}.gov"));
    }
    out
}

/// Page counts for `n` documents in `[lo, hi]` summing to `total`.
fn spread(n: u32, lo: u32, hi: u32, total: u64) -> Vec<u32> {
    let mut left = total - (n as u64) * lo as u64;
    (0..n)
        .map(|_| {
            let extra = left.min((hi - lo) as u64);
            left -= extra;
            lo + extra as u32
        })
        .collect()
}

fn page_counts() -> Vec<Option<u32>> {
    let ranges = [(1, 1), (2, 5), (6, 20), (21, 100), (101, 100_000)];
    let mut out = Vec::new();
    for ((_, docs, pages), (lo, hi)) in PAGE_BUCKET_TOTALS.iter().zip(ranges) {
        out.extend(spread(*docs, lo, hi, *pages).into_iter().map(Some));
    }
    out.extend(std::iter::repeat_n(None, PAGE_BUCKET_TOTALS[5].1 as usize));
    out
}

/// 1,000 records reproducing both the base-URL counts and the page-count
/// buckets of the fixture corpus.
pub fn reference_records() -> Vec<DocumentRecord> {
    let mut bases: Vec<String> =
        TOP20_BASE_URLS.iter().flat_map(|(b, n)| std::iter::repeat_n(b.to_string(), *n as usize)).collect();
    bases.extend(other_base_urls());
    let pages = page_counts();
    assert_eq!(bases.len(), pages.len());
    // Interleave so page counts are not correlated with base URL order.
    let n = pages.len();
    (0..n).map(|i| synthetic_record(&format!("doc{i:04}"), &bases[i], pages[(i * 337) % n])).collect()
}

pub fn reference_manifest() -> CorpusManifest {
    CorpusManifest::new(reference_records()).expect("synthetic records are valid")
}

/// `rows` unit-norm rows with i.i.d. normal coordinates.
pub fn random_unit_rows(rows: usize, dim: usize, seed: u64) -> Vec<f32> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0f32, 1.0).expect("valid std");
    let mut data: Vec<f32> = (0..rows * dim).map(|_| normal.sample(&mut rng)).collect();
    for row in data.chunks_mut(dim) {
        normalize_in_place(row);
    }
    data
}

pub fn synthetic_page(i: usize) -> PageRef {
    PageRef::new(derive_document_id(format!("page-doc-{}", i / 4).as_bytes()), (i % 4) as u32)
}

/// Store of random unit rows, four pages per synthetic document.
pub fn random_store(rows: usize, dim: usize, seed: u64) -> EmbeddingStore {
    let ids = (0..rows).map(synthetic_page).collect();
    EmbeddingStore::new(dim, ids, random_unit_rows(rows, dim, seed)).expect("rows are normalized")
}

/// Store whose first `positives` rows lean toward `+e0` and the rest toward
/// `-e0`, plus small noise in the other coordinates.
pub fn separable_store(rows: usize, positives: usize, dim: usize, seed: u64) -> EmbeddingStore {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut data = Vec::with_capacity(rows * dim);
    for r in 0..rows {
        let mut v: Vec<f32> = (0..dim).map(|_| rng.gen_range(-0.2f32..0.2)).collect();
        v[0] = if r < positives { 1.0 } else { -1.0 };
        normalize_in_place(&mut v);
        data.extend(v);
    }
    let ids = (0..rows).map(synthetic_page).collect();
    EmbeddingStore::new(dim, ids, data).expect("rows are normalized")
}

/// Gaussian blobs with centers `separation` apart on distinct axes.
/// Returns the points and their blob labels.
pub fn gaussian_blobs(
    blobs: usize,
    per_blob: usize,
    dim: usize,
    spread: f64,
    separation: f64,
    seed: u64,
) -> (DenseMatrix, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, spread).expect("valid std");
    let mut data = Vec::with_capacity(blobs * per_blob * dim);
    let mut labels = Vec::with_capacity(blobs * per_blob);
    for b in 0..blobs {
        for _ in 0..per_blob {
            for d in 0..dim {
                let center = if d == b % dim { separation / std::f64::consts::SQRT_2 } else { 0.0 };
                data.push(center + normal.sample(&mut rng));
            }
            labels.push(b);
        }
    }
    (DenseMatrix::new(blobs * per_blob, dim, data), labels)
}

/// Token lists for a corpus with two disjoint topic vocabularies. Returns the
/// documents and the planted topic of each.
pub fn two_topic_docs(per_topic: usize, words_per_doc: usize, seed: u64) -> (Vec<Vec<String>>, Vec<usize>) {
    const TOPICS: [&[&str]; 2] = [
        &["drug", "clinical", "trial", "dosage", "label", "adverse", "tablet", "patient", "approval", "recall"],
        &["harbor", "vessel", "tide", "buoy", "coastal", "marine", "weather", "storm", "current", "reef"],
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut docs = Vec::new();
    let mut topics = Vec::new();
    for i in 0..2 * per_topic {
        let t = i % 2;
        let vocab = TOPICS[t];
        docs.push((0..words_per_doc).map(|_| vocab[rng.gen_range(0..vocab.len())].to_string()).collect());
        topics.push(t);
    }
    (docs, topics)
}

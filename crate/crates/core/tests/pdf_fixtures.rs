use std::path::{Path, PathBuf};

use pdfsift_core::analytics::{facet_histogram, Facet};
use pdfsift_core::ingest::{build_manifest, extract_pdf_metadata, IngestError, IngestOptions};
use pdfsift_core::{derive_document_id, CorpusManifest, DocumentStatus};

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn meta(name: &str) -> pdfsift_core::ingest::PdfMeta {
    extract_pdf_metadata(&std::fs::read(fixture(name)).unwrap())
}

// Expected counts were read with pypdf when the fixtures were generated
// (see fixtures/make_fixtures.py).
#[test]
fn page_counts_agree_with_reference_reader() {
    assert_eq!(meta("one_page.pdf").page_count, Some(1));
    assert_eq!(meta("twelve_pages.pdf").page_count, Some(12));
    assert_eq!(meta("nested_tree.pdf").page_count, Some(3));
    assert_eq!(meta("xref_stream.pdf").page_count, Some(2));
    assert_eq!(meta("broken_startxref.pdf").page_count, Some(4));
}

#[test]
fn encrypted_and_non_pdf() {
    let enc = meta("encrypted.pdf");
    assert!(enc.encrypted);
    assert_eq!(enc.page_count, None);
    let junk = meta("not_a_pdf.pdf");
    assert!(!junk.encrypted);
    assert_eq!(junk.page_count, None);
    assert_eq!(junk.file_size, 40);
}

#[test]
fn producer_is_read() {
    let m = meta("one_page.pdf");
    assert!(m.producer.as_deref().is_some_and(|p| p.to_lowercase().contains("reportlab")), "{:?}", m.producer);
}

fn corpus_dir() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    for name in ["one_page.pdf", "twelve_pages.pdf", "nested_tree.pdf", "encrypted.pdf", "not_a_pdf.pdf"] {
        std::fs::copy(fixture(name), dir.path().join(name)).unwrap();
    }
    dir
}

fn write_cdx(dir: &Path) -> PathBuf {
    let digest = derive_document_id(&std::fs::read(fixture("nested_tree.pdf")).unwrap());
    let lines = [
        " CDX N b a m s k r M S V g".to_string(),
        "gov,house)/a/one_page.pdf 20081015120000 http://clerk.house.gov/a/one_page.pdf application/pdf 200 - - - 1355 0 a.warc.gz".into(),
        "gov,house)/a/one_page.pdf 20081101000000 http://mirror.house.gov/a/one_page.pdf application/pdf 200 - - - 1355 0 b.warc.gz".into(),
        format!("gov,noaa)/t.pdf 20081020000000 https://www.noaa.gov/t.pdf application/pdf 200 sha256:{} - - 620 0 c.warc.gz", digest.as_str().to_uppercase()),
        "gov,usda)/x/twelve_pages.pdf 20081021000000 https://ers.usda.gov/x/twelve_pages.pdf application/pdf 200 - - - 1 0 d.warc.gz".into(),
        "gov,fda)/encrypted.pdf 20081022000000 https://www.fda.gov/encrypted.pdf application/pdf 200 - - - 1 0 e.warc.gz".into(),
        "gov,gpo)/not_a_pdf.pdf 20081023000000 https://www.gpo.gov/not_a_pdf.pdf text/html 404 - - - 1 0 f.warc.gz".into(),
    ];
    let path = dir.join("index.cdx");
    std::fs::write(&path, lines.join("\n") + "\n").unwrap();
    path
}

#[test]
fn ingest_joins_cdx_provenance() {
    let dir = corpus_dir();
    let cdx_dir = tempfile::tempdir().unwrap();
    let opts = IngestOptions { cdx_path: Some(write_cdx(cdx_dir.path())), ..Default::default() };
    let m = build_manifest(dir.path(), &opts).unwrap();
    assert_eq!(m.len(), 5);

    let by_name = |name: &str| m.get(&derive_document_id(&std::fs::read(fixture(name)).unwrap())).unwrap().clone();
    let one = by_name("one_page.pdf");
    // Earliest capture wins.
    assert_eq!(one.source_url, "http://clerk.house.gov/a/one_page.pdf");
    assert_eq!(one.fetch_timestamp.as_deref(), Some("20081015120000"));
    assert_eq!(one.base_url, "house.gov");
    assert_eq!(one.page_count, Some(1));
    assert_eq!(by_name("nested_tree.pdf").base_url, "noaa.gov");
    assert_eq!(by_name("twelve_pages.pdf").page_count, Some(12));
    assert_eq!(by_name("encrypted.pdf").status, DocumentStatus::Encrypted);
    assert_eq!(by_name("not_a_pdf.pdf").status, DocumentStatus::Malformed);

    let pages = facet_histogram(&m, Facet::PageCount);
    assert_eq!(pages.count("null"), Some(2));
    assert_eq!(pages.count("6-20"), Some(1));
}

#[test]
fn ingest_is_byte_identical_across_runs() {
    let dir = corpus_dir();
    let cdx_dir = tempfile::tempdir().unwrap();
    let opts = IngestOptions { cdx_path: Some(write_cdx(cdx_dir.path())), ..Default::default() };
    let out = tempfile::tempdir().unwrap();
    let (a, b) = (out.path().join("a.jsonl"), out.path().join("b.jsonl"));
    build_manifest(dir.path(), &opts).unwrap().write(&a).unwrap();
    build_manifest(dir.path(), &opts).unwrap().write(&b).unwrap();
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    let back = CorpusManifest::read(&a).unwrap();
    assert_eq!(back, build_manifest(dir.path(), &opts).unwrap());
}

#[test]
fn url_sidecar_and_missing_provenance() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::copy(fixture("one_page.pdf"), dir.path().join("doc.pdf")).unwrap();
    let err = build_manifest(dir.path(), &IngestOptions::default()).unwrap_err();
    assert!(matches!(err, IngestError::MissingUrlProvenance(_)), "{err}");
    std::fs::write(dir.path().join("doc.pdf.url"), "https://legislature.idaho.gov/doc.pdf\n").unwrap();
    let m = build_manifest(dir.path(), &IngestOptions::default()).unwrap();
    assert_eq!(m.records()[0].base_url, "idaho.gov");
    assert_eq!(m.records()[0].fetch_timestamp, None);
}

#[test]
fn empty_directory_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    assert!(matches!(build_manifest(dir.path(), &IngestOptions::default()), Err(IngestError::EmptyCorpus(_))));
}

#[test]
fn duplicate_content_is_one_document() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::copy(fixture("one_page.pdf"), dir.path().join("a.pdf")).unwrap();
    std::fs::copy(fixture("one_page.pdf"), dir.path().join("b.pdf")).unwrap();
    std::fs::write(dir.path().join("a.pdf.url"), "https://z.house.gov/a.pdf").unwrap();
    std::fs::write(dir.path().join("b.pdf.url"), "https://a.house.gov/b.pdf").unwrap();
    let m = build_manifest(dir.path(), &IngestOptions::default()).unwrap();
    assert_eq!(m.len(), 1);
    assert_eq!(m.records()[0].source_url, "https://a.house.gov/b.pdf");
}

use pdfsift_core::analytics::kmeans::nearest_centroid;
use pdfsift_core::analytics::{facet_histogram, kmeans, Facet};
use pdfsift_core::learner::{rank_scores, score_all, ModelState};
use pdfsift_core::matrix::{densify_compact, squared_distance, DenseMatrix};
use pdfsift_core::projection::{tsne, TsneParams};
use pdfsift_core::text::{featurize_corpus, SparseVector};
use pdfsift_core::{par, synth, CorpusManifest};
use proptest::prelude::*;

fn matrix(rows: usize, dim: usize) -> impl Strategy<Value = DenseMatrix> {
    proptest::collection::vec(-10.0f64..10.0, rows * dim).prop_map(move |d| DenseMatrix::new(rows, dim, d))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn kmeans_nearest_centroid_invariant(m in (5usize..40, 1usize..6).prop_flat_map(|(r, d)| matrix(r, d)), k in 1usize..5, seed: u64) {
        let r = kmeans(&m, k, seed, 50).unwrap();
        let mut inertia = 0.0;
        for i in 0..m.rows() {
            let (c, d) = nearest_centroid(m.row(i), &r.centroids);
            prop_assert_eq!(c, r.assignments[i]);
            prop_assert!((r.assignments[i] as usize) < k);
            inertia += d;
        }
        prop_assert_eq!(inertia, r.inertia);
        prop_assert!(r.inertia >= 0.0);
        for w in r.inertia_trace.windows(2) {
            prop_assert!(w[1] <= w[0]);
        }
    }

    #[test]
    fn kmeans_thread_count_invariant(m in matrix(60, 4), seed: u64) {
        let a = par::with_threads(1, || kmeans(&m, 3, seed, 100).unwrap());
        let b = par::with_threads(3, || kmeans(&m, 3, seed, 100).unwrap());
        prop_assert_eq!(a.assignments, b.assignments);
        prop_assert_eq!(a.inertia.to_bits(), b.inertia.to_bits());
    }

    #[test]
    fn compact_densify_matches_full(seed in 0u64..1000) {
        let (docs, _) = synth::two_topic_docs(8, 12, seed);
        let (_, vecs) = featurize_corpus(&docs, 1).unwrap();
        let (compact, _) = densify_compact(&vecs);
        let full = DenseMatrix::from_rows(&vecs.iter().map(SparseVector::to_dense).collect::<Vec<_>>());
        let a = kmeans(&compact, 2, seed, 50).unwrap();
        let b = kmeans(&full, 2, seed, 50).unwrap();
        prop_assert_eq!(a.assignments, b.assignments);
        prop_assert!((a.inertia - b.inertia).abs() <= 1e-12 * b.inertia.max(1.0));
        for i in 0..full.rows() {
            for j in 0..full.rows() {
                prop_assert_eq!(squared_distance(compact.row(i), compact.row(j)), squared_distance(full.row(i), full.row(j)));
            }
        }
    }

    #[test]
    fn facet_counts_ignore_record_order(shift in 0usize..1000) {
        let mut recs = synth::reference_records();
        recs.rotate_left(shift);
        recs.reverse();
        let m = CorpusManifest::new(recs).unwrap();
        let reference = synth::reference_manifest();
        prop_assert_eq!(facet_histogram(&m, Facet::BaseUrl), facet_histogram(&reference, Facet::BaseUrl));
        prop_assert_eq!(facet_histogram(&m, Facet::PageCount), facet_histogram(&reference, Facet::PageCount));
    }

    #[test]
    fn scores_independent_of_chunking(weights in proptest::collection::vec(-3.0f64..3.0, 19), bias in -1.0f64..1.0, chunk in 1usize..600) {
        let store = synth::random_store(777, 19, 5);
        let m = ModelState { weights, bias, final_loss: 0.0, steps: 0, gradient_norm: 0.0, loss_trace: vec![] };
        let a: Vec<u64> = score_all(&m, &store, chunk).unwrap().iter().map(|s| s.to_bits()).collect();
        let b: Vec<u64> = score_all(&m, &store, 4096).unwrap().iter().map(|s| s.to_bits()).collect();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn ranking_invariant_under_monotone_transform(scores in proptest::collection::vec(-5.0f64..5.0, 1..200), limit in 0usize..250) {
        let pages: Vec<_> = (0..scores.len()).map(synth::synthetic_page).collect();
        let prob: Vec<f64> = scores.iter().map(|s| 1.0 / (1.0 + (-s).exp())).collect();
        let a: Vec<_> = rank_scores(&pages, &scores, limit, |_| false).into_iter().map(|e| e.page).collect();
        let b: Vec<_> = rank_scores(&pages, &prob, limit, |_| false).into_iter().map(|e| e.page).collect();
        prop_assert_eq!(&a, &b);
        prop_assert_eq!(a.len(), limit.min(scores.len()));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn tsne_is_centered_deterministic_and_finite(m in matrix(16, 3), seed: u64) {
        let params = TsneParams { perplexity: 4.0, iterations: 300, seed, ..Default::default() };
        let a = tsne(&m, &params).unwrap();
        let b = par::with_threads(2, || tsne(&m, &params).unwrap());
        prop_assert_eq!(&a.points, &b.points);
        prop_assert!(a.final_kl >= 0.0);
        let n = a.points.len() as f64;
        let (mx, my) = a.points.iter().fold((0.0, 0.0), |(x, y), p| (x + p[0], y + p[1]));
        prop_assert!((mx / n).abs() < 1e-9 && (my / n).abs() < 1e-9);
        prop_assert!(a.points.iter().all(|p| p[0].is_finite() && p[1].is_finite()));
    }
}

#[test]
fn duplicate_rows_land_together() {
    let (blobs, _) = synth::gaussian_blobs(4, 15, 20, 1.0, 12.0, 9);
    let mut rows: Vec<Vec<f64>> = blobs.iter_rows().map(<[f64]>::to_vec).collect();
    let originals = rows.len();
    for i in (0..originals).step_by(6) {
        rows.push(rows[i].clone());
    }
    let m = DenseMatrix::from_rows(&rows);
    let out = tsne(&m, &TsneParams { perplexity: 8.0, seed: 3, ..Default::default() }).unwrap();
    let pairs: Vec<(usize, usize)> = (0..originals).step_by(6).enumerate().map(|(k, i)| (i, originals + k)).collect();
    let nearest = |i: usize| {
        (0..out.points.len())
            .filter(|&j| j != i)
            .min_by(|&a, &b| {
                let d = |j: usize| {
                    (out.points[i][0] - out.points[j][0]).powi(2) + (out.points[i][1] - out.points[j][1]).powi(2)
                };
                d(a).total_cmp(&d(b))
            })
            .unwrap()
    };
    let hits = pairs.iter().filter(|&&(i, j)| nearest(i) == j).count()
        + pairs.iter().filter(|&&(i, j)| nearest(j) == i).count();
    assert!(hits as f64 >= 0.9 * 2.0 * pairs.len() as f64, "{hits} of {}", 2 * pairs.len());
}

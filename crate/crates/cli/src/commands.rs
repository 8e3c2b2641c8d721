use std::io::Write;
use std::path::Path;

use anyhow::{bail, Context};
use pdfsift_core::analytics::{
    cluster_documents, corpus_page_totals, facet_histogram, group_centroid_terms, page_count_bucket, ClusterParams,
    Facet, FacetTable, TermReport, PAGE_BUCKETS,
};
use pdfsift_core::ingest::{build_manifest, FieldOrder, IngestOptions};
use pdfsift_core::matrix::{densify_compact, DenseMatrix};
use pdfsift_core::projection::{subsample_rows, tsne, ProjectionFile, TsneParams};
use pdfsift_core::text::{SparseVector, TextArtifacts};
use pdfsift_core::visual::features::featurize_raster_dir;
use pdfsift_core::visual::{front_page_rows, import_embeddings, open_store, StoreWriter, FEATURE_DIM};
use pdfsift_core::{CorpusManifest, PageRef};
use pdfsift_service::{ServiceConfig, ServiceOptions};
use serde_json::json;

use crate::{
    Cli, ClusterArgs, Command, FacetArg, Failure, FeaturizeTextArgs, FeaturizeVisualArgs, Format, ImportArgs,
    IngestArgs, ProjectArgs, ServeArgs, StatsArgs, TermsArgs,
};

type Outcome = Result<(), Failure>;

pub fn run(cli: &Cli) -> Outcome {
    match &cli.command {
        Command::Ingest(a) => ingest(a, cli.format),
        Command::FeaturizeText(a) => featurize_text(a, cli.format),
        Command::FeaturizeVisual(a) => featurize_visual(a, cli.format),
        Command::ImportEmbeddings(a) => import(a, cli.format),
        Command::Stats(a) => stats(a, cli.format),
        Command::Terms(a) => terms(a, cli.format),
        Command::Cluster(a) => cluster(a, cli.format),
        Command::Project(a) => project(a, cli.format),
        Command::Serve(a) => serve(a),
    }
}

fn emit(text: &str) -> Outcome {
    let mut out = std::io::stdout().lock();
    out.write_all(text.as_bytes()).and_then(|_| out.flush()).context("writing to stdout")?;
    Ok(())
}

fn emit_json(value: &serde_json::Value) -> Outcome {
    emit(&format!("{}\n", serde_json::to_string_pretty(value).expect("report serializes")))
}

/// Prints a one-line summary of a written artifact.
fn done(format: Format, value: serde_json::Value, text: String) -> Outcome {
    match format {
        Format::Json => emit_json(&value),
        Format::Text => emit(&format!("{text}\n")),
    }
}

fn load_manifest(path: &Path) -> anyhow::Result<CorpusManifest> {
    CorpusManifest::read(path).with_context(|| format!("reading manifest {}", path.display()))
}

fn load_text(dir: &Path, manifest: &CorpusManifest) -> anyhow::Result<TextArtifacts> {
    let text = TextArtifacts::load(dir).with_context(|| format!("reading text features in {}", dir.display()))?;
    if let Some(id) = text.ids.iter().find(|id| manifest.get(id).is_none()) {
        bail!("text features in {} refer to {id}, which is not in the manifest", dir.display());
    }
    Ok(text)
}

fn ingest(a: &IngestArgs, format: Format) -> Outcome {
    let field_order = match &a.cdx_fields {
        Some(names) => FieldOrder::from_names(names).map_err(|e| Failure::Usage(format!("--cdx-fields: {e}")))?,
        None => FieldOrder::cdx11(),
    };
    let opts = IngestOptions { cdx_path: a.cdx.clone(), field_order };
    let manifest = build_manifest(&a.corpus_dir, &opts)?;
    manifest.write(&a.out).with_context(|| format!("writing {}", a.out.display()))?;
    done(
        format,
        json!({"out": a.out, "documents": manifest.len(), "corpus_id": manifest.corpus_id()}),
        format!("wrote {} records to {} (corpus {})", manifest.len(), a.out.display(), manifest.corpus_id()),
    )
}

fn featurize_text(a: &FeaturizeTextArgs, format: Format) -> Outcome {
    let manifest = load_manifest(&a.manifest.manifest)?;
    let text = TextArtifacts::build(&manifest, &a.corpus_dir, a.min_df)?;
    text.write(&a.out)?;
    let empty = text.vectors.iter().filter(|v| v.is_empty()).count();
    done(
        format,
        json!({"out": a.out, "documents": text.len(), "terms": text.vocab.len(), "empty_documents": empty}),
        format!(
            "wrote {} terms and {} document vectors ({empty} without text) to {}",
            text.vocab.len(),
            text.len(),
            a.out.display()
        ),
    )
}

fn featurize_visual(a: &FeaturizeVisualArgs, format: Format) -> Outcome {
    let manifest = a.manifest.as_deref().map(load_manifest).transpose()?;
    let mut pages = featurize_raster_dir(&a.corpus_dir)?;
    if let Some(m) = &manifest {
        pages.retain(|(p, _)| m.get(&p.doc_id).is_some());
    }
    if pages.is_empty() {
        return Err(anyhow::anyhow!("no page rasters found under {}", a.corpus_dir.display()).into());
    }
    let mut writer = StoreWriter::create(&a.out, FEATURE_DIM)?;
    let mut blank = 0;
    for (page, features) in &pages {
        blank += features.blank as usize;
        writer.push(page, &features.vector)?;
    }
    let rows = writer.finish()?;
    done(
        format,
        json!({"out": a.out, "rows": rows, "dim": FEATURE_DIM, "blank_rows": blank}),
        format!("wrote {rows} x {FEATURE_DIM} store to {} ({blank} blank pages)", a.out.display()),
    )
}

fn import(a: &ImportArgs, format: Format) -> Outcome {
    let rows = import_embeddings(&a.input, &a.out, a.dim as usize)?;
    done(
        format,
        json!({"out": a.out, "rows": rows, "dim": a.dim}),
        format!("wrote {rows} x {} store to {}", a.dim, a.out.display()),
    )
}

fn facet_text(table: &FacetTable, top: Option<usize>) -> String {
    let mut shown = table.clone();
    if let Some(n) = top {
        shown.buckets.truncate(n);
    }
    let mut out = shown.render_text();
    if let Some(n) = top.filter(|&n| n < table.buckets.len()) {
        out.push_str(&format!("top {n} of {} labels hold {:.1}%\n", table.buckets.len(), 100.0 * table.top_share(n)));
    }
    out
}

fn stats(a: &StatsArgs, format: Format) -> Outcome {
    let m = load_manifest(&a.manifest.manifest)?;
    let base = facet_histogram(&m, Facet::BaseUrl);
    let pages = facet_histogram(&m, Facet::PageCount);
    let totals = corpus_page_totals(&m);
    let want_base = a.facet.is_none_or(|f| f == FacetArg::BaseUrl);
    let want_pages = a.facet.is_none_or(|f| f == FacetArg::PageCount);
    match format {
        Format::Json => {
            let mut v = json!({"corpus_id": m.corpus_id(), "documents": m.len()});
            if want_base {
                let mut shown = base.clone();
                if let Some(n) = a.top {
                    shown.buckets.truncate(n);
                    v["top_share"] = json!(base.top_share(n));
                }
                v["base_url"] = json!(shown);
            }
            if want_pages {
                v["page_count"] = json!(pages);
                v["page_totals"] = json!(totals);
            }
            emit_json(&v)
        }
        Format::Text => {
            let mut out = format!("# stats corpus={} documents={}\n", m.corpus_id(), m.len());
            if want_base {
                out.push('\n');
                out.push_str(&facet_text(&base, a.top));
            }
            if want_pages {
                out.push('\n');
                out.push_str(&pages.render_text());
                out.push('\n');
                out.push_str(&totals.render_text());
            }
            emit(&out)
        }
    }
}

fn terms(a: &TermsArgs, format: Format) -> Outcome {
    let m = load_manifest(&a.manifest.manifest)?;
    let text = load_text(&a.text.text_features, &m)?;
    let groups: Vec<String> = match &a.base_url {
        Some(b) => vec![b.clone()],
        None => facet_histogram(&m, Facet::BaseUrl).buckets.into_iter().take(a.groups).map(|b| b.label).collect(),
    };
    let mut reports: Vec<TermReport> = Vec::new();
    for g in &groups {
        let rows = text.select(|id| m.get(id).is_some_and(|r| &r.base_url == g));
        if rows.is_empty() {
            if a.base_url.is_some() {
                return Err(anyhow::anyhow!("no documents with base URL {g:?} have text features").into());
            }
            continue;
        }
        let vectors: Vec<&SparseVector> = rows.iter().map(|&i| &text.vectors[i]).collect();
        reports.push(group_centroid_terms(g, &vectors, &text.vocab, a.top_k, a.prune).context("term report")?);
    }
    match format {
        Format::Json => emit_json(&json!({
            "corpus_id": m.corpus_id(), "top_k": a.top_k, "prune": a.prune, "reports": reports,
        })),
        Format::Text => {
            let mut out = format!("# terms corpus={} top_k={} prune={}\n", m.corpus_id(), a.top_k, a.prune);
            for r in &reports {
                out.push('\n');
                out.push_str(&r.render_text());
            }
            emit(&out)
        }
    }
}

fn cluster(a: &ClusterArgs, format: Format) -> Outcome {
    if let Some(b) = a.bucket.as_deref().filter(|b| !PAGE_BUCKETS.contains(b)) {
        return Err(Failure::Usage(format!("--bucket {b:?} is not one of {}", PAGE_BUCKETS.join(", "))));
    }
    let m = load_manifest(&a.manifest.manifest)?;
    let text = load_text(&a.text.text_features, &m)?;
    let rows = text.select(|id| {
        m.get(id).is_some_and(|r| {
            a.base_url.as_ref().is_none_or(|b| &r.base_url == b)
                && a.bucket.as_deref().is_none_or(|b| page_count_bucket(r.page_count) == b)
        })
    });
    let ids: Vec<_> = rows.iter().map(|&i| text.ids[i].clone()).collect();
    let vectors: Vec<&SparseVector> = rows.iter().map(|&i| &text.vectors[i]).collect();
    let params =
        ClusterParams { k: a.k as usize, seed: a.seed, max_iter: a.max_iter, top_terms: a.top_terms, prune: a.prune };
    let (_, report) = cluster_documents(&ids, &vectors, &text.vocab, &params).context("clustering")?;
    let value = json!({"corpus_id": m.corpus_id(), "documents": ids.len(), "report": report});
    if let Some(out) = &a.out {
        let mut body = serde_json::to_string_pretty(&value).expect("report serializes");
        body.push('\n');
        std::fs::write(out, body).with_context(|| format!("writing {}", out.display()))?;
    }
    match format {
        Format::Json => emit_json(&value),
        Format::Text => emit(&format!(
            "# cluster corpus={} documents={} k={} seed={} max_iter={}\n{}",
            m.corpus_id(),
            ids.len(),
            a.k,
            a.seed,
            a.max_iter,
            report.render_text()
        )),
    }
}

fn project(a: &ProjectArgs, format: Format) -> Outcome {
    let (pages, data): (Vec<PageRef>, DenseMatrix) = if let Some(path) = &a.store {
        let store = open_store(path).with_context(|| format!("opening {}", path.display()))?;
        let store = if a.all_pages { store } else { front_page_rows(&store) };
        let pages = store.row_ids().to_vec();
        (pages, DenseMatrix::new(store.rows(), store.dim(), store.to_f64()))
    } else {
        let dir = a.text_features.as_ref().expect("clap requires one source");
        let text = TextArtifacts::load(dir).with_context(|| format!("reading text features in {}", dir.display()))?;
        let (data, _) = densify_compact(&text.vectors);
        (text.ids.iter().map(|id| PageRef::new(id.clone(), 0)).collect(), data)
    };
    let (pages, data) = match a.sample {
        Some(n) if (n as usize) < pages.len() => {
            let keep = subsample_rows(pages.len(), n as usize, a.seed);
            let rows: Vec<Vec<f64>> = keep.iter().map(|&i| data.row(i).to_vec()).collect();
            (keep.iter().map(|&i| pages[i].clone()).collect(), DenseMatrix::from_rows(&rows))
        }
        _ => (pages, data),
    };
    if pages.len() > a.max_rows {
        return Err(anyhow::anyhow!(
            "{} rows exceed --max-rows {}; exact t-SNE is quadratic in rows, pass --sample to project a subset",
            pages.len(),
            a.max_rows
        )
        .into());
    }
    let params = TsneParams { perplexity: a.perplexity, iterations: a.iterations, seed: a.seed, ..Default::default() };
    let projection = tsne(&data, &params).context("t-SNE")?;
    ProjectionFile::new(&projection, &pages).write(&a.out).with_context(|| format!("writing {}", a.out.display()))?;
    done(
        format,
        json!({
            "out": a.out, "points": pages.len(), "seed": a.seed, "perplexity": a.perplexity,
            "final_kl": projection.final_kl, "uncalibrated_rows": projection.uncalibrated_rows,
        }),
        format!(
            "# project seed={} perplexity={} iterations={}\nwrote {} points to {} (KL {:.4}, {} rows uncalibrated)",
            a.seed,
            a.perplexity,
            a.iterations,
            pages.len(),
            a.out.display(),
            projection.final_kl,
            projection.uncalibrated_rows
        ),
    )
}

fn serve(a: &ServeArgs) -> Outcome {
    if !(a.l2_lambda.is_finite() && a.l2_lambda >= 0.0) {
        return Err(Failure::Usage("--l2-lambda must be finite and non-negative".into()));
    }
    let _ = tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info,tower_http=info".into()),
        )
        .with_writer(std::io::stderr)
        .with_ansi(std::io::IsTerminal::is_terminal(&std::io::stderr()))
        .try_init();
    let config = ServiceConfig {
        bind: a.bind.clone(),
        manifest: a.manifest.manifest.clone(),
        text_dir: a.text_features.clone(),
        store: a.store.clone(),
        projection: a.projection.clone(),
        rasters: a.rasters.clone(),
        options: ServiceOptions {
            cluster_row_cap: a.cluster_row_cap,
            l2_lambda: a.l2_lambda,
            session_dir: a.sessions.clone(),
            allowed_origins: a.allow_origins.clone(),
        },
    };
    let runtime = tokio::runtime::Runtime::new().context("starting the async runtime")?;
    runtime.block_on(pdfsift_service::run(config)).context("service")?;
    Ok(())
}

//! Acceptance suite. Every criterion runs at its stated tolerance and
//! prints one PASS or FAIL line; the process exits non-zero if any fail.
//!
//! Run alone with `cargo test -p changekit-cli --test acceptance`.

mod common;

use std::collections::{BTreeMap, BTreeSet};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::sync::atomic::{AtomicU64, Ordering};
use std::time::{Duration, Instant};

use anyhow::{bail, ensure, Context, Result};
use changekit_core::annotation::{AnnotationService, EventLog, PairStatus, ServiceOptions, Verdict};
use changekit_core::dataset::{
    compose_description, dataset_stats, filter_no_change, ingest, join_captions, BitemporalPair, CaptionCorpus,
    ChangeDescriptionRecord, DatasetLayout, JoinOptions, RecordStatus, Split, StatsOptions,
};
use changekit_core::eval::{
    counting_accuracy, load_pair_masks, parse_count_answer, render_table, CountOutcome, EvalReport, ResponseRecord,
    UnparsedPolicy,
};
use changekit_core::instruct::{emit_instruction_file, parse_instruction_file, template_fallback};
use changekit_core::mask::{bucketize, count_regions, ChangeMask, Connectivity, CountBucket, RegionOptions};
use changekit_core::metrics::{lcs_length, meteor, rouge_l, tokenize, MetricConfig, TokenSeq};
use changekit_core::model::{
    connector_backward, connector_forward, interpolate_grid, lora_forward, lora_merge, siamese_concat,
    ConnectorWeights, EncoderConfig, EncoderWeights, LoraAdapter,
};
use changekit_core::Error;
use ndarray::{Array1, Array2, Array3};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use tempfile::TempDir;

type Criterion = (&'static str, fn() -> Result<String>);

fn main() {
    let criteria: [Criterion; 9] = [
        ("connected components vs flood-fill oracle", connected_components),
        ("count buckets at range boundaries", count_buckets),
        ("ROUGE-L fixed points and LCS oracle", rouge),
        ("METEOR closed forms and multi-reference monotonicity", meteor_criterion),
        ("model shape chain at 448 px / ViT-L/14", model_shapes),
        ("siamese invariants, connector gradients, LoRA merge", model_numerics),
        ("dataset pipeline", pipeline),
        ("counting accuracy and result table", eval_harness),
        ("annotation log replay and status machine", annotation),
    ];

    // Failures are reported on the summary line; keep panic noise out.
    std::panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (name, run) in criteria {
        let start = Instant::now();
        let outcome = match catch_unwind(AssertUnwindSafe(run)) {
            Ok(result) => result,
            Err(panic) => {
                let msg = panic
                    .downcast_ref::<String>()
                    .cloned()
                    .or_else(|| panic.downcast_ref::<&str>().map(|s| (*s).to_owned()))
                    .unwrap_or_else(|| "panic".into());
                Err(anyhow::anyhow!("panicked: {msg}"))
            }
        };
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS  {name}  [{detail}; {secs:.2}s]"),
            Err(e) => {
                failed += 1;
                println!("FAIL  {name}  [{e:#}; {secs:.2}s]");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}

fn rng(seed: u64) -> StdRng {
    StdRng::seed_from_u64(seed)
}

// ---------------------------------------------------------------- masks

/// Region areas by recursive flood fill, sorted.
fn oracle_areas(grid: &[Vec<bool>], eight: bool) -> Vec<usize> {
    fn fill(grid: &[Vec<bool>], seen: &mut [Vec<bool>], r: usize, c: usize, eight: bool) -> usize {
        seen[r][c] = true;
        let mut area = 1;
        for dr in -1i64..=1 {
            for dc in -1i64..=1 {
                if (dr == 0 && dc == 0) || (!eight && dr != 0 && dc != 0) {
                    continue;
                }
                let (nr, nc) = (r as i64 + dr, c as i64 + dc);
                if nr < 0 || nc < 0 || nr as usize >= grid.len() || nc as usize >= grid[0].len() {
                    continue;
                }
                let (nr, nc) = (nr as usize, nc as usize);
                if grid[nr][nc] && !seen[nr][nc] {
                    area += fill(grid, seen, nr, nc, eight);
                }
            }
        }
        area
    }
    let mut seen = vec![vec![false; grid[0].len()]; grid.len()];
    let mut areas = Vec::new();
    for r in 0..grid.len() {
        for c in 0..grid[0].len() {
            if grid[r][c] && !seen[r][c] {
                areas.push(fill(grid, &mut seen, r, c, eight));
            }
        }
    }
    areas.sort_unstable();
    areas
}

fn connected_components() -> Result<String> {
    let start = Instant::now();
    let mut rng = rng(7);
    let cases = 250;
    for case in 0..cases {
        let (h, w) = (rng.gen_range(1..=32), rng.gen_range(1..=32));
        let density = [0.05, 0.2, 0.4, 0.55, 0.7][case % 5];
        let grid: Vec<Vec<bool>> = (0..h)
            .map(|_| (0..w).map(|_| rng.gen_bool(density)).collect())
            .collect();
        let cells = grid.iter().flatten().map(|&b| u8::from(b)).collect();
        let mask = ChangeMask::new(w, h, cells)?;
        let mut counts = [0; 2];
        for (i, (conn, eight)) in [(Connectivity::Four, false), (Connectivity::Eight, true)]
            .into_iter()
            .enumerate()
        {
            let stats = count_regions(&mask, conn);
            let mut areas = stats.areas.clone();
            areas.sort_unstable();
            ensure!(
                areas == oracle_areas(&grid, eight),
                "case {case} ({h}x{w}, {conn}-conn): areas {areas:?} differ from oracle"
            );
            ensure!(stats.region_count == areas.len() && stats.bboxes.len() == areas.len());
            counts[i] = stats.region_count;
        }
        ensure!(
            counts[0] >= counts[1],
            "case {case}: 4-conn {} < 8-conn {}",
            counts[0],
            counts[1]
        );
    }
    let elapsed = start.elapsed();
    ensure!(elapsed < Duration::from_secs(10), "took {elapsed:?}");
    Ok(format!("{cases} masks x 2 connectivities"))
}

fn count_buckets() -> Result<String> {
    let expected = [
        (0, CountBucket::Le5, "less than or equal to five"),
        (5, CountBucket::Le5, "less than or equal to five"),
        (6, CountBucket::B6To10, "between six and ten"),
        (10, CountBucket::B6To10, "between six and ten"),
        (11, CountBucket::B11To20, "between eleven and twenty"),
        (20, CountBucket::B11To20, "between eleven and twenty"),
        (21, CountBucket::Gt20, "more than twenty"),
    ];
    for (count, bucket, phrase) in expected {
        ensure!(
            bucketize(count) == bucket,
            "{count} -> {:?}, expected {bucket:?}",
            bucketize(count)
        );
        ensure!(bucket.phrase() == phrase, "{bucket:?} phrase {:?}", bucket.phrase());
    }
    Ok("7 boundary values".into())
}

// -------------------------------------------------------------- metrics

fn toks(text: &str) -> TokenSeq {
    tokenize(text)
}

/// Longest common subsequence by trying every subsequence of `a`.
fn oracle_lcs(a: &[String], b: &[String]) -> usize {
    fn is_subsequence(sub: &[&String], b: &[String]) -> bool {
        let mut it = b.iter();
        sub.iter().all(|s| it.any(|t| t == *s))
    }
    let mut best = 0;
    for bits in 0u32..(1 << a.len()) {
        let ones = bits.count_ones() as usize;
        if ones <= best {
            continue;
        }
        let sub: Vec<&String> = (0..a.len()).filter(|i| bits & (1 << i) != 0).map(|i| &a[i]).collect();
        if is_subsequence(&sub, b) {
            best = ones;
        }
    }
    best
}

/// Every sequence over `{a, b, c}` of length at most `max_len`.
fn all_sequences(max_len: usize) -> Vec<Vec<String>> {
    let mut out = vec![Vec::new()];
    let mut frontier = vec![Vec::<String>::new()];
    for _ in 0..max_len {
        let mut next = Vec::new();
        for seq in &frontier {
            for sym in ["a", "b", "c"] {
                let mut s = seq.clone();
                s.push(sym.to_owned());
                next.push(s);
            }
        }
        out.extend(next.iter().cloned());
        frontier = next;
    }
    out
}

fn rouge() -> Result<String> {
    let config = MetricConfig::default();
    let same = rouge_l(
        &toks("a new road crosses the farmland"),
        &[toks("a new road crosses the farmland")],
        &config,
    )?;
    ensure!(same == 1.0, "identity scored {same}");
    let disjoint = rouge_l(&toks("trees removed"), &[toks("houses built nearby")], &config)?;
    ensure!(disjoint == 0.0, "disjoint scored {disjoint}");
    let worked = rouge_l(
        &toks("the cat sat on the mat"),
        &[toks("the cat is on the mat")],
        &config,
    )?;
    ensure!((worked - 5.0 / 6.0).abs() <= 1e-9, "worked example scored {worked}");

    // Every sequence up to length 8 against every sequence up to length 2
    // and against a fixed random sample of longer ones; every pair up to
    // length 5 both ways.
    let all = all_sequences(8);
    let mut rng = rng(11);
    let symbols = ["a", "b", "c"];
    let mut partners: Vec<Vec<String>> = all.iter().filter(|s| s.len() <= 2).cloned().collect();
    for _ in 0..12 {
        let len = rng.gen_range(3..=8);
        partners.push((0..len).map(|_| symbols[rng.gen_range(0..3)].to_owned()).collect());
    }
    let mut pairs = 0usize;
    for a in &all {
        for b in &partners {
            let got = lcs_length(a, b);
            ensure!(got == oracle_lcs(a, b), "lcs({a:?}, {b:?}) = {got}");
            ensure!(got == lcs_length(b, a), "lcs not symmetric on {a:?}, {b:?}");
            pairs += 1;
        }
    }
    let short: Vec<&Vec<String>> = all.iter().filter(|s| s.len() <= 5).collect();
    for a in &short {
        for b in &short {
            let got = lcs_length(a, b);
            ensure!(got == oracle_lcs(a, b), "lcs({a:?}, {b:?}) = {got}");
            pairs += 1;
        }
    }
    Ok(format!("{pairs} LCS pairs checked"))
}

fn meteor_criterion() -> Result<String> {
    let config = MetricConfig::default();
    let two = meteor(&toks("trees removed"), &[toks("trees removed")], &config)?;
    ensure!((two - 0.9375).abs() <= 1e-9, "2-token identity scored {two}");
    let ten_text = "new road was built between the two large farm fields";
    let ten = toks(ten_text);
    ensure!(ten.len() == 10, "fixture sentence has {} tokens", ten.len());
    let score = meteor(&ten, std::slice::from_ref(&ten), &config)?;
    ensure!((score - 0.9995).abs() <= 1e-9, "10-token identity scored {score}");

    let vocab = [
        "building",
        "buildings",
        "built",
        "road",
        "roads",
        "tree",
        "trees",
        "removed",
        "remove",
        "a",
        "the",
        "new",
        "field",
        "appear",
        "appears",
        "house",
    ];
    let mut rng = rng(23);
    let sentence = |rng: &mut StdRng| {
        let len = rng.gen_range(1..=12);
        TokenSeq::from_tokens((0..len).map(|_| vocab[rng.gen_range(0..vocab.len())]))
    };
    for case in 0..1000 {
        let candidate = sentence(&mut rng);
        let refs: Vec<TokenSeq> = (0..rng.gen_range(1..=3)).map(|_| sentence(&mut rng)).collect();
        let extra = sentence(&mut rng);
        let base = meteor(&candidate, &refs, &config)?;
        let mut more = refs.clone();
        more.push(extra.clone());
        let grown = meteor(&candidate, &more, &config)?;
        ensure!(grown >= base, "case {case}: adding {extra} lowered {base} to {grown}");
        for r in &refs {
            let single = meteor(&candidate, std::slice::from_ref(r), &config)?;
            ensure!(
                base >= single,
                "case {case}: set score {base} below single reference {single}"
            );
        }
    }
    Ok("1000 monotonicity cases".into())
}

// ---------------------------------------------------------------- model

fn random_array3(shape: (usize, usize, usize), rng: &mut StdRng) -> Array3<f64> {
    Array3::from_shape_simple_fn(shape, || rng.gen_range(-1.0..1.0))
}

fn random_array2(shape: (usize, usize), rng: &mut StdRng) -> Array2<f64> {
    Array2::from_shape_simple_fn(shape, || rng.gen_range(-1.0..1.0))
}

fn model_shapes() -> Result<String> {
    let config = EncoderConfig::paper_scale(1);
    config.validate()?;
    ensure!(
        config.feature_tokens() == 1024,
        "{} feature tokens",
        config.feature_tokens()
    );

    let mut rng = rng(3);
    let weights = EncoderWeights::random(&config, &mut rng)?;
    let pre = random_array3((448, 448, 3), &mut rng);
    let post = random_array3((448, 448, 3), &mut rng);
    let features = siamese_concat(&pre, &post, &config, &weights)?;
    ensure!(
        features.dim() == (1024, 2048),
        "concatenated features {:?}",
        features.dim()
    );
    ensure!(features.iter().all(|v| v.is_finite()));

    let stored = random_array3((24, 24, 1024), &mut rng);
    let grid = interpolate_grid(&stored, 32)?;
    ensure!(grid.dim() == (32, 32, 1024), "interpolated grid {:?}", grid.dim());
    ensure!(grid.dim().0 * grid.dim().1 == 1024);
    Ok("1024 tokens, 1024x2048 features, 24x24 -> 32x32 grid".into())
}

fn bits(a: ndarray::ArrayView2<f64>) -> Vec<u64> {
    a.iter().map(|v| v.to_bits()).collect()
}

/// `sum(g * f(x))` for the connector output `f(x)`.
fn probe_loss(x: &Array2<f64>, w: &ConnectorWeights, g: &Array2<f64>) -> f64 {
    (connector_forward(x, w).unwrap() * g).sum()
}

/// Relative error between the analytic gradient of one tensor and central
/// differences over all of its entries.
fn gradient_error(analytic: &[f64], len: usize, mut loss_at: impl FnMut(usize, f64) -> f64, step: f64) -> f64 {
    let numeric: Vec<f64> = (0..len)
        .map(|i| (loss_at(i, step) - loss_at(i, -step)) / (2.0 * step))
        .collect();
    let diff: f64 = numeric
        .iter()
        .zip(analytic)
        .map(|(n, a)| (n - a).powi(2))
        .sum::<f64>()
        .sqrt();
    let scale = numeric
        .iter()
        .map(|n| n * n)
        .sum::<f64>()
        .sqrt()
        .max(analytic.iter().map(|a| a * a).sum::<f64>().sqrt());
    if scale == 0.0 {
        0.0
    } else {
        diff / scale
    }
}

fn model_numerics() -> Result<String> {
    let start = Instant::now();
    let mut rng = rng(5);

    // Siamese invariants.
    let config = EncoderConfig::toy();
    let weights = EncoderWeights::random(&config, &mut rng)?;
    let d = config.embed_dim;
    let shape = (config.input_resolution, config.input_resolution, config.channels);
    let x = random_array3(shape, &mut rng);
    let y = random_array3(shape, &mut rng);
    let same = siamese_concat(&x, &x, &config, &weights)?;
    ensure!(
        bits(same.slice(ndarray::s![.., ..d])) == bits(same.slice(ndarray::s![.., d..])),
        "halves differ for identical inputs"
    );
    let xy = siamese_concat(&x, &y, &config, &weights)?;
    let yx = siamese_concat(&y, &x, &config, &weights)?;
    ensure!(
        bits(xy.slice(ndarray::s![.., ..d])) == bits(yx.slice(ndarray::s![.., d..]))
            && bits(xy.slice(ndarray::s![.., d..])) == bits(yx.slice(ndarray::s![.., ..d])),
        "swapping inputs does not swap halves"
    );

    // Connector gradients against central differences.
    let step = 1e-5;
    let w = ConnectorWeights::random(6, 12, 5, &mut rng)?;
    let input = random_array2((4, 6), &mut rng);
    let g = random_array2((4, 5), &mut rng);
    let grads = connector_backward(&input, &w, &g)?;
    let mut worst: f64 = 0.0;
    let err = gradient_error(
        grads.input.as_slice().unwrap(),
        input.len(),
        |i, h| {
            let mut p = input.clone();
            p.as_slice_mut().unwrap()[i] += h;
            probe_loss(&p, &w, &g)
        },
        step,
    );
    worst = worst.max(err);
    type Field = fn(&mut ConnectorWeights) -> &mut [f64];
    let fields: [(&str, Field, Vec<f64>); 4] = [
        (
            "w1",
            |w| w.w1.as_slice_mut().unwrap(),
            grads.w1.iter().copied().collect(),
        ),
        ("b1", |w| w.b1.as_slice_mut().unwrap(), grads.b1.to_vec()),
        (
            "w2",
            |w| w.w2.as_slice_mut().unwrap(),
            grads.w2.iter().copied().collect(),
        ),
        ("b2", |w| w.b2.as_slice_mut().unwrap(), grads.b2.to_vec()),
    ];
    for (name, field, analytic) in fields {
        let err = gradient_error(
            &analytic,
            analytic.len(),
            |i, h| {
                let mut p = w.clone();
                field(&mut p)[i] += h;
                probe_loss(&input, &p, &g)
            },
            step,
        );
        ensure!(err <= 1e-5, "{name} gradient relative error {err:e}");
        worst = worst.max(err);
    }
    ensure!(worst <= 1e-5, "input gradient relative error {worst:e}");

    // LoRA merge equivalence, zero-initialized B, and rank of the update.
    let (d_in, d_out) = (9, 7);
    let base = random_array2((d_out, d_in), &mut rng);
    let mut merge_err: f64 = 0.0;
    for rank in 1..=4 {
        let adapter = LoraAdapter::random(d_in, d_out, rank, Some(2.0 * rank as f64), &mut rng)?;
        let merged = lora_merge(&base, &adapter)?;
        for _ in 0..100 {
            let v = Array1::from_shape_simple_fn(d_in, || rng.gen_range(-1.0..1.0));
            let diff = (lora_forward(&v, &base, &adapter)? - merged.dot(&v)).mapv(f64::abs);
            merge_err = merge_err.max(diff.fold(0.0, |m, &x| m.max(x)));
        }
        let delta = &merged - &base;
        let svd = nalgebra::DMatrix::from_row_slice(d_out, d_in, delta.as_slice().unwrap()).svd(false, false);
        let numeric_rank = svd.singular_values.iter().filter(|&&s| s > 1e-9).count();
        ensure!(
            numeric_rank <= rank,
            "rank {numeric_rank} update from a rank-{rank} adapter"
        );

        let fresh = LoraAdapter::init(d_in, d_out, rank, None, &mut rng)?;
        ensure!(
            lora_merge(&base, &fresh)? == base,
            "zero-B adapter changed the merged weight"
        );
        for _ in 0..10 {
            let v = Array1::from_shape_simple_fn(d_in, || rng.gen_range(-1.0..1.0));
            ensure!(
                lora_forward(&v, &base, &fresh)? == base.dot(&v),
                "zero-B adapter changed an output"
            );
        }
    }
    ensure!(merge_err <= 1e-9, "merged forward differs by {merge_err:e}");
    let elapsed = start.elapsed();
    ensure!(elapsed < Duration::from_secs(60), "took {elapsed:?}");
    Ok(format!("gradient rel err {worst:.1e}, merge err {merge_err:.1e}"))
}

// ------------------------------------------------------------- pipeline

struct Fixture {
    dir: TempDir,
    pairs: Vec<BitemporalPair>,
}

impl Fixture {
    fn new() -> Result<Self> {
        let dir = tempfile::tempdir()?;
        common::write_dataset(&dir.path().join("data"), &common::standard_pairs());
        std::fs::write(dir.path().join("captions.json"), common::standard_captions())?;
        let report = ingest(&dir.path().join("data"), "fixture", &DatasetLayout::levir_cd())?;
        ensure!(report.skipped.is_empty(), "fixture pairs skipped: {:?}", report.skipped);
        Ok(Self {
            dir,
            pairs: report.pairs,
        })
    }

    fn root(&self) -> std::path::PathBuf {
        self.dir.path().join("data")
    }

    fn records(&self) -> Result<Vec<ChangeDescriptionRecord>> {
        let corpus = CaptionCorpus::load(&self.dir.path().join("captions.json"))?;
        let options = JoinOptions {
            root: Some(self.root()),
            ..JoinOptions::default()
        };
        let joined = join_captions(&self.pairs, &corpus, &options);
        ensure!(joined.errored.is_empty() && joined.unused_captions.is_empty());
        Ok(joined.records)
    }
}

/// Region count read straight from the mask PNG.
fn oracle_region_count(path: &Path) -> Result<usize> {
    let img = image::open(path)?.to_luma8();
    let grid: Vec<Vec<bool>> = (0..img.height())
        .map(|y| (0..img.width()).map(|x| img.get_pixel(x, y)[0] > 0).collect())
        .collect();
    Ok(oracle_areas(&grid, true).len())
}

fn run_gen(records: &Path, out: &Path) -> Result<()> {
    let status = Command::new(env!("CARGO_BIN_EXE_changekit"))
        .arg("--out-dir")
        .arg(out)
        .args(["gen", "--offline", "--records"])
        .arg(records)
        .env_remove("CHANGEKIT_LLM_API_KEY")
        .output()
        .context("running changekit gen")?;
    ensure!(
        status.status.success(),
        "gen failed: {}",
        String::from_utf8_lossy(&status.stderr)
    );
    Ok(())
}

fn pipeline() -> Result<String> {
    let fx = Fixture::new()?;

    let part = filter_no_change(fx.pairs.clone(), 0);
    let removed: BTreeSet<&str> = part.removed.iter().map(|p| p.id.as_str()).collect();
    ensure!(removed == BTreeSet::from(["t_empty", "v_empty"]), "removed {removed:?}");
    ensure!(part.kept.len() == fx.pairs.len() - 2 && part.errored.is_empty());

    let manifest = dataset_stats(&fx.pairs, &StatsOptions::default());
    let mut fold: BTreeMap<Split, (usize, usize)> = Split::ALL.iter().map(|s| (*s, (0, 0))).collect();
    for p in &fx.pairs {
        let entry = fold.get_mut(&p.split).unwrap();
        entry.0 += 1;
        entry.1 += oracle_region_count(&p.mask)?;
    }
    for (split, (pairs, regions)) in &fold {
        let e = manifest.entry("fixture", *split).context("missing manifest entry")?;
        ensure!(
            (e.pairs, e.change_regions) == (*pairs, *regions),
            "{split}: manifest ({}, {}) vs fold ({pairs}, {regions})",
            e.pairs,
            e.change_regions
        );
    }

    let mut round_trips = 0;
    for count in [0, 1, 4, 5, 6, 9, 10, 11, 19, 20, 21, 22, 57, 300] {
        let record = ChangeDescriptionRecord {
            pair_id: format!("c{count}"),
            captions: vec!["a wide road was built".into(), "some trees were removed.".into()],
            region_count: count,
            status: RecordStatus::Verified,
            annotator: "a".into(),
            verifier: None,
            images: None,
        };
        let text = compose_description(&record)?;
        ensure!(
            parse_count_answer(&text) == CountOutcome::Bucket(bucketize(count)),
            "{text:?} does not parse back to {:?}",
            bucketize(count)
        );
        round_trips += 1;
    }
    let records = fx.records()?;
    let covered: BTreeSet<CountBucket> = records.iter().map(|r| bucketize(r.region_count)).collect();
    ensure!(covered.len() >= 3, "fixture covers buckets {covered:?}");
    for r in &records {
        let parsed = parse_count_answer(&compose_description(r)?);
        ensure!(
            parsed == CountOutcome::Bucket(bucketize(r.region_count)),
            "{}: parsed {parsed:?}",
            r.pair_id
        );
        round_trips += 1;
    }

    let mut conversations = records
        .iter()
        .map(template_fallback)
        .collect::<changekit_core::Result<Vec<_>>>()?;
    // The file is ordered by id.
    conversations.sort_by(|a, b| a.id.cmp(&b.id));
    let mut file = Vec::new();
    emit_instruction_file(&conversations, &mut file)?;
    let parsed = parse_instruction_file(file.as_slice())?;
    ensure!(parsed == conversations, "instruction file did not round-trip");
    let mut again = Vec::new();
    emit_instruction_file(&parsed, &mut again)?;
    ensure!(again == file, "re-emitted file differs");

    let records_path = fx.dir.path().join("records.jsonl");
    changekit_core::jsonl::write_path(&records_path, &records)?;
    let (first, second) = (fx.dir.path().join("gen1"), fx.dir.path().join("gen2"));
    run_gen(&records_path, &first)?;
    run_gen(&records_path, &second)?;
    for name in ["instructions.jsonl", "gen_report.json"] {
        let a = std::fs::read(first.join(name))?;
        let b = std::fs::read(second.join(name))?;
        ensure!(!a.is_empty() && a == b, "{name} differs between runs");
    }
    let emitted = std::fs::read(first.join("instructions.jsonl"))?;
    ensure!(emitted == file, "gen output differs from the library emission");

    Ok(format!(
        "{round_trips} count round trips, {} conversations",
        conversations.len()
    ))
}

// ----------------------------------------------------------------- eval

fn eval_harness() -> Result<String> {
    let fx = Fixture::new()?;
    let records = fx.records()?;
    let responses: Vec<ResponseRecord> = records
        .iter()
        .map(|r| {
            let conv = template_fallback(r)?;
            Ok(ResponseRecord {
                pair_id: r.pair_id.clone(),
                response: conv.turns[3].text.clone(),
            })
        })
        .collect::<Result<_>>()?;
    let answered: BTreeSet<&str> = responses.iter().map(|r| r.pair_id.as_str()).collect();
    let pairs: Vec<BitemporalPair> = fx
        .pairs
        .iter()
        .filter(|p| answered.contains(p.id.as_str()))
        .cloned()
        .collect();
    let masks = load_pair_masks(&pairs, 0)?;
    let report = counting_accuracy(&responses, &masks, &RegionOptions::default(), UnparsedPolicy::Incorrect)?;
    ensure!(
        report.total == responses.len() && report.accuracy == 1.0,
        "accuracy {} over {}",
        report.accuracy,
        report.total
    );

    let table = render_table(&[EvalReport::new("CDChat").with_scores(0.2827, 0.3442)]);
    let row = table
        .lines()
        .find(|l| l.starts_with("CDChat"))
        .context("no model row")?;
    let cells: Vec<&str> = row.split_whitespace().collect();
    ensure!(cells == ["CDChat", "28.27", "34.42"], "row {row:?}");
    Ok(format!(
        "accuracy 1.0 over {} pairs; row {:?}",
        report.total,
        row.trim_end()
    ))
}

// ----------------------------------------------------------- annotation

fn counter_clock() -> Box<dyn Fn() -> u64 + Send + Sync> {
    let t = AtomicU64::new(1_000);
    Box::new(move || t.fetch_add(1, Ordering::SeqCst))
}

fn open_service(fx: &Fixture, log: &Path) -> Result<AnnotationService> {
    Ok(
        AnnotationService::open(&fx.root(), fx.pairs.clone(), log, ServiceOptions::default())?
            .with_clock(counter_clock()),
    )
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum Action {
    Captions,
    Approve,
    Reject,
}

fn act(service: &AnnotationService, id: &str, action: Action) -> changekit_core::Result<ChangeDescriptionRecord> {
    match action {
        Action::Captions => service.submit_captions(id, &["a shed was built".into()], "ann"),
        Action::Approve => service.verify(id, Verdict::Approve, "ver"),
        Action::Reject => service.verify(id, Verdict::Reject, "ver"),
    }
}

fn annotation() -> Result<String> {
    let fx = Fixture::new()?;
    let log = fx.dir.path().join("events.jsonl");

    // A session, then a crash in the middle of the next append.
    let service = open_service(&fx, &log)?;
    service.submit_captions("t_one", &["a building appears".into()], "ann")?;
    service.verify("t_one", Verdict::Approve, "ver")?;
    service.submit_captions(
        "s_seven",
        &["houses cover the area".into(), "a road is built".into()],
        "ann",
    )?;
    service.verify("s_seven", Verdict::Reject, "ver")?;
    service.submit_captions("s_seven", &["many houses cover the area".into()], "ann")?;
    service.verify("s_seven", Verdict::Approve, "ver")?;
    service.submit_captions("v_three", &["three roofs appear".into()], "ann")?;
    let before = service.snapshot();
    let exported = service.export_verified();
    drop(service);

    let clean_len = std::fs::metadata(&log)?.len();
    {
        use std::io::Write;
        let mut f = std::fs::OpenOptions::new().append(true).open(&log)?;
        f.write_all(br#"{"seq":8,"timestamp_ms":2000,"pair_id":"t_diag","kind":"captions_sub"#)?;
    }
    let reopened = open_service(&fx, &log)?;
    ensure!(
        reopened.snapshot() == before,
        "state after crash differs from state before it"
    );
    ensure!(
        std::fs::metadata(&log)?.len() == clean_len,
        "torn tail was not truncated"
    );
    let (_, replay) = EventLog::open(&log)?;
    let refolded =
        changekit_core::annotation::AnnotationState::replay(fx.pairs.iter().map(|p| p.id.clone()), &replay.events)?;
    ensure!(refolded == before, "fold over the log differs from the live state");
    reopened.submit_captions("t_diag", &["sheds appear".into()], "ann")?;
    drop(reopened);

    // Every (status, action) combination against the legal table.
    let legal = [
        (PairStatus::Unannotated, Action::Captions, PairStatus::Draft),
        (PairStatus::Draft, Action::Captions, PairStatus::Draft),
        (PairStatus::Rejected, Action::Captions, PairStatus::Draft),
        (PairStatus::Draft, Action::Approve, PairStatus::Verified),
        (PairStatus::Draft, Action::Reject, PairStatus::Rejected),
    ];
    let paths: [(PairStatus, &[Action]); 4] = [
        (PairStatus::Unannotated, &[]),
        (PairStatus::Draft, &[Action::Captions]),
        (PairStatus::Verified, &[Action::Captions, Action::Approve]),
        (PairStatus::Rejected, &[Action::Captions, Action::Reject]),
    ];
    let mut rejected = 0;
    for (start, path) in paths {
        for action in [Action::Captions, Action::Approve, Action::Reject] {
            let log = fx.dir.path().join(format!("machine-{start:?}-{action:?}.jsonl"));
            let service = open_service(&fx, &log)?;
            for step in path {
                act(&service, "t_one", *step)?;
            }
            ensure!(service.snapshot().get("t_one").unwrap().status == start);
            let state = service.snapshot();
            let log_len = std::fs::metadata(&log)?.len();
            let expected = legal.iter().find(|(s, a, _)| *s == start && *a == action).map(|l| l.2);
            match (act(&service, "t_one", action), expected) {
                (Ok(_), Some(next)) => {
                    let now = service.snapshot().get("t_one").unwrap().status;
                    ensure!(now == next, "{start:?} + {action:?} gave {now:?}, expected {next:?}");
                }
                (Err(Error::Conflict(_)), None) => {
                    ensure!(service.snapshot() == state, "{start:?} + {action:?} changed state");
                    ensure!(
                        std::fs::metadata(&log)?.len() == log_len,
                        "{start:?} + {action:?} was logged"
                    );
                    rejected += 1;
                }
                (Ok(_), None) => bail!("illegal {start:?} + {action:?} was accepted"),
                (Err(e), _) => bail!("{start:?} + {action:?}: {e}"),
            }
        }
    }
    ensure!(rejected == 7, "{rejected} illegal transitions rejected, expected 7");

    // Verified export composes as is.
    let ids: Vec<&str> = exported.iter().map(|r| r.pair_id.as_str()).collect();
    ensure!(ids == ["s_seven", "t_one"], "exported {ids:?}");
    for r in &exported {
        ensure!(r.status == RecordStatus::Verified);
        let text = compose_description(r)?;
        ensure!(text.starts_with(r.captions[0].trim_end_matches('.')), "{text:?}");
        ensure!(parse_count_answer(&text) == CountOutcome::Bucket(bucketize(r.region_count)));
    }
    let expected_counts = [("s_seven", 7), ("t_one", 1)];
    for (r, (id, count)) in exported.iter().zip(expected_counts) {
        ensure!(
            r.pair_id == id && r.region_count == count,
            "{} has {} regions",
            r.pair_id,
            r.region_count
        );
    }
    Ok(format!(
        "replay identical, {rejected} illegal transitions rejected, {} records exported",
        exported.len()
    ))
}

//! Helpers shared by the integration tests: random models, finite
//! differences, brute-force metric oracles and synthetic regression tasks.
//! The oracles use only plain loops and full sorts.

#![allow(dead_code, clippy::needless_range_loop)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use revdict::math::{mse_grad, mse_loss, Activation, DenseLayer, FeedForwardStack, Matrix};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    // Box–Muller
    let u1: f64 = rng.gen_range(f64::EPSILON..1.0);
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

pub fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize, scale: f64) -> Matrix {
    let data = (0..rows * cols).map(|_| scale * gaussian(rng)).collect();
    Matrix::from_vec(rows, cols, data).unwrap()
}

pub fn layer(rng: &mut ChaCha8Rng, d_in: usize, d_out: usize, act: Activation) -> DenseLayer {
    let w = random_matrix(rng, d_out, d_in, 0.7);
    let b = (0..d_out).map(|_| 0.3 * gaussian(rng)).collect();
    DenseLayer::new(w, b, act).unwrap()
}

/// Dense(d_in→h, tanh) → Dense(h→d_out).
pub fn projection_stack(
    rng: &mut ChaCha8Rng,
    d_in: usize,
    h: usize,
    d_out: usize,
) -> FeedForwardStack {
    FeedForwardStack::new(vec![
        layer(rng, d_in, h, Activation::Tanh),
        layer(rng, h, d_out, Activation::Identity),
    ])
    .unwrap()
}

/// relu → identity → relu → identity with a bottleneck in the middle.
pub fn aligner_stack(
    rng: &mut ChaCha8Rng,
    d_in: usize,
    m: usize,
    b: usize,
    d_out: usize,
) -> FeedForwardStack {
    FeedForwardStack::new(vec![
        layer(rng, d_in, m, Activation::Relu),
        layer(rng, m, b, Activation::Identity),
        layer(rng, b, m, Activation::Relu),
        layer(rng, m, d_out, Activation::Identity),
    ])
    .unwrap()
}

/// Largest relative error between analytic and central-difference
/// gradients of the MSE loss, over every parameter and input entry.
/// Relative error is `|a − n| / max(|a|, |n|, floor)`.
pub fn max_gradient_error(
    stack: &FeedForwardStack,
    x: &Matrix,
    y: &Matrix,
    h: f64,
    floor: f64,
) -> f64 {
    let mut train = stack.clone();
    train.set_training(true);
    let pred = train.forward(x).unwrap();
    let grads = train.backward(&mse_grad(&pred, y).unwrap()).unwrap();
    let analytic: Vec<Vec<f64>> = grads.slices().iter().map(|s| s.to_vec()).collect();

    let loss_of = |s: &FeedForwardStack, x: &Matrix| mse_loss(&s.infer(x).unwrap(), y).unwrap();
    let rel = |a: f64, n: f64| (a - n).abs() / a.abs().max(n.abs()).max(floor);
    let mut worst = 0.0f64;

    let sizes = stack.param_sizes();
    for (p, &size) in sizes.iter().enumerate() {
        for k in 0..size {
            let mut plus = stack.clone();
            plus.params_mut()[p][k] += h;
            let mut minus = stack.clone();
            minus.params_mut()[p][k] -= h;
            let numeric = (loss_of(&plus, x) - loss_of(&minus, x)) / (2.0 * h);
            worst = worst.max(rel(analytic[p][k], numeric));
        }
    }
    for k in 0..x.as_slice().len() {
        let mut xp = x.clone();
        xp.as_mut_slice()[k] += h;
        let mut xm = x.clone();
        xm.as_mut_slice()[k] -= h;
        let numeric = (loss_of(stack, &xp) - loss_of(stack, &xm)) / (2.0 * h);
        worst = worst.max(rel(grads.input.as_slice()[k], numeric));
    }
    worst
}

/// True when any relu pre-activation lies within `margin` of zero, where
/// central differences straddle the kink.
pub fn near_relu_kink(stack: &FeedForwardStack, x: &Matrix, margin: f64) -> bool {
    let mut cur = x.clone();
    for l in stack.layers() {
        let mut next = Matrix::zeros(cur.rows(), l.d_out());
        for b in 0..cur.rows() {
            for o in 0..l.d_out() {
                let z = naive_dot(l.weights.row(o), cur.row(b)) + l.bias[o];
                if l.activation == Activation::Relu && z.abs() < margin {
                    return true;
                }
                next.set(b, o, l.activation.apply(z));
            }
        }
        cur = next;
    }
    false
}

/// Mixed projection and aligner shapes, dims ≤ 8, batch ≤ 4.
pub fn random_gradient_case(rng: &mut ChaCha8Rng, i: usize) -> (FeedForwardStack, Matrix, Matrix) {
    let mut d = || rng.gen_range(1..=8usize);
    let (d_in, a, b, d_out) = (d(), d(), d(), d());
    let stack = if i.is_multiple_of(2) {
        projection_stack(rng, d_in, a, d_out)
    } else {
        aligner_stack(rng, d_in, a, b.min(a), d_out)
    };
    let n = rng.gen_range(1..=4);
    let x = random_matrix(rng, n, d_in, 1.0);
    let y = random_matrix(rng, n, d_out, 1.0);
    if near_relu_kink(&stack, &x, 1e-3) {
        return random_gradient_case(rng, i);
    }
    (stack, x, y)
}

// ---- brute-force metric oracles ----

fn naive_dot(a: &[f64], b: &[f64]) -> f64 {
    let mut s = 0.0;
    for i in 0..a.len() {
        s += a[i] * b[i];
    }
    s
}

pub fn naive_cosine(a: &[f64], b: &[f64]) -> f64 {
    let na = naive_dot(a, a).sqrt();
    let nb = naive_dot(b, b).sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        naive_dot(a, b) / (na * nb)
    }
}

pub struct NaiveMetrics {
    pub mse: f64,
    pub cosine: f64,
    pub rank: f64,
}

/// Double loop over items and pool rows.
pub fn naive_evaluate(
    preds: &Matrix,
    targets: &Matrix,
    pool: &Matrix,
    idx: &[usize],
) -> NaiveMetrics {
    let n = preds.rows();
    let d = preds.cols() as f64;
    let (mut mse, mut cos, mut better) = (0.0, 0.0, 0usize);
    for i in 0..n {
        let p = preds.row(i);
        let t = targets.row(i);
        let mut se = 0.0;
        for k in 0..p.len() {
            se += (p[k] - t[k]) * (p[k] - t[k]);
        }
        mse += se / d;
        cos += naive_cosine(p, t);
        let reference = naive_cosine(p, pool.row(idx[i]));
        for j in 0..pool.rows() {
            if j != idx[i] && naive_cosine(p, pool.row(j)) > reference {
                better += 1;
            }
        }
    }
    NaiveMetrics {
        mse: mse / n as f64,
        cosine: cos / n as f64,
        rank: better as f64 / (n as f64 * pool.rows() as f64),
    }
}

/// Full sort of the vocabulary: zero rows last, then score descending,
/// then id ascending.
pub fn naive_top_k(query: &[f64], vocab: &[(String, Vec<f64>)], k: usize) -> Vec<(String, f64)> {
    let mut scored: Vec<(bool, f64, &str)> = vocab
        .iter()
        .map(|(id, v)| (naive_dot(v, v) == 0.0, naive_cosine(query, v), id.as_str()))
        .collect();
    scored.sort_by(|a, b| {
        a.0.cmp(&b.0)
            .then(b.1.partial_cmp(&a.1).unwrap())
            .then(a.2.cmp(b.2))
    });
    scored
        .into_iter()
        .take(k)
        .map(|(_, s, id)| (id.to_string(), s))
        .collect()
}

pub fn naive_precision_at_k(
    preds: &Matrix,
    target_ids: &[String],
    vocab: &[(String, Vec<f64>)],
    k: usize,
) -> f64 {
    let mut hits = 0;
    for (i, id) in target_ids.iter().enumerate() {
        if naive_top_k(preds.row(i), vocab, k)
            .iter()
            .any(|(h, _)| h == id)
        {
            hits += 1;
        }
    }
    hits as f64 / target_ids.len() as f64
}

/// Random vocabulary with exact duplicate vectors (forced ties) and a few
/// zero rows. Ids are unique but their order is unrelated to row order.
pub fn vocab_with_ties(rng: &mut ChaCha8Rng, v: usize, d: usize) -> Vec<(String, Vec<f64>)> {
    let mut out: Vec<(String, Vec<f64>)> = Vec::with_capacity(v);
    for i in 0..v {
        let vec = if i > 0 && rng.gen_bool(0.15) {
            out[rng.gen_range(0..i)].1.clone()
        } else if rng.gen_bool(0.01) {
            vec![0.0; d]
        } else {
            (0..d).map(|_| gaussian(rng)).collect()
        };
        out.push((format!("w{:06}-{i}", rng.gen_range(0..1_000_000)), vec));
    }
    out
}

// ---- regression tasks ----

pub struct Task {
    pub train_x: Matrix,
    pub train_y: Matrix,
    pub dev_x: Matrix,
    pub dev_y: Matrix,
}

fn split(x: Matrix, y: Matrix, n_dev: usize) -> Task {
    let n = x.rows();
    let tr: Vec<usize> = (0..n - n_dev).collect();
    let dv: Vec<usize> = (n - n_dev..n).collect();
    Task {
        train_x: x.select_rows(&tr),
        train_y: y.select_rows(&tr),
        dev_x: x.select_rows(&dv),
        dev_y: y.select_rows(&dv),
    }
}

/// `y = W x + ε`, `W ~ N(0, 1/d_in)`, `x ~ N(0, I)`, `ε ~ N(0, σ²)`;
/// the last 20% of rows are the dev split.
pub fn noisy_linear_task(seed: u64, n: usize, d_in: usize, d_out: usize, sigma: f64) -> Task {
    let mut r = rng(seed);
    let w = random_matrix(&mut r, d_out, d_in, 1.0 / (d_in as f64).sqrt());
    let x = random_matrix(&mut r, n, d_in, 1.0);
    let mut y = Matrix::zeros(n, d_out);
    for i in 0..n {
        for o in 0..d_out {
            let v = naive_dot(w.row(o), x.row(i)) + sigma * gaussian(&mut r);
            y.set(i, o, v);
        }
    }
    split(x, y, n / 5)
}

/// Random orthogonal matrix by Gram–Schmidt.
pub fn random_rotation(r: &mut ChaCha8Rng, d: usize) -> Matrix {
    let g = random_matrix(r, d, d, 1.0);
    let mut basis: Vec<Vec<f64>> = Vec::new();
    for i in 0..d {
        let mut v = g.row(i).to_vec();
        for b in &basis {
            let p = naive_dot(&v, b);
            for k in 0..d {
                v[k] -= p * b[k];
            }
        }
        let n = naive_dot(&v, &v).sqrt();
        basis.push(v.iter().map(|x| x / n).collect());
    }
    Matrix::from_rows(&basis).unwrap()
}

/// `y = Q x` with `Q` orthogonal; the last 20% of rows are the dev split.
pub fn rotation_task(seed: u64, n: usize, d: usize) -> Task {
    let mut r = rng(seed);
    let q = random_rotation(&mut r, d);
    let x = random_matrix(&mut r, n, d, 1.0);
    let mut y = Matrix::zeros(n, d);
    for i in 0..n {
        for o in 0..d {
            y.set(i, o, naive_dot(q.row(o), x.row(i)));
        }
    }
    split(x, y, n / 5)
}

// ---- oracle comparison ----

pub fn index_of(vocab: &[(String, Vec<f64>)]) -> revdict::retrieval::VocabIndex {
    revdict::retrieval::VocabIndex::from_vectors(
        revdict::data::TargetKind::Electra,
        vocab
            .iter()
            .map(|(id, v)| (id.as_str(), id.as_str(), v.as_slice())),
    )
    .unwrap()
}

/// One random evaluation instance compared against the oracles. Pools and
/// vocabularies contain exact duplicates, and some predictions copy a
/// vocabulary row, so ties occur at the top of rankings.
pub fn check_metric_instance(seed: u64) -> Result<(), String> {
    use revdict::eval::{evaluate, precision_at_k};

    let mut r = rng(seed);
    let d = r.gen_range(2..=16);
    let n = r.gen_range(1..=200);
    let m = r.gen_range(1..=500);
    let v = r.gen_range(1..=500);

    let pool_rows = vocab_with_ties(&mut r, m, d);
    let pool =
        Matrix::from_rows(&pool_rows.iter().map(|(_, v)| v.clone()).collect::<Vec<_>>()).unwrap();
    let idx: Vec<usize> = (0..n).map(|_| r.gen_range(0..m)).collect();
    let vocab = vocab_with_ties(&mut r, v, d);
    let mut preds = random_matrix(&mut r, n, d, 1.0);
    for i in 0..n {
        if r.gen_bool(0.2) {
            let src = vocab[r.gen_range(0..v)].1.clone();
            preds.row_mut(i).copy_from_slice(&src);
        }
    }
    let targets = random_matrix(&mut r, n, d, 1.0);

    let got = evaluate(&preds, &targets, &pool, &idx).map_err(|e| e.to_string())?;
    let want = naive_evaluate(&preds, &targets, &pool, &idx);
    if got.rank != want.rank {
        return Err(format!(
            "seed {seed}: rank {} vs oracle {}",
            got.rank, want.rank
        ));
    }
    if (got.mse - want.mse).abs() > 1e-12 || (got.cosine - want.cosine).abs() > 1e-12 {
        return Err(format!(
            "seed {seed}: mse/cosine ({}, {}) vs oracle ({}, {})",
            got.mse, got.cosine, want.mse, want.cosine
        ));
    }

    let index = index_of(&vocab);
    let target_ids: Vec<String> = (0..n).map(|_| vocab[r.gen_range(0..v)].0.clone()).collect();
    for k in [1, 10, r.gen_range(1..=v + 5)] {
        let got = precision_at_k(&preds, &target_ids, &index, k).map_err(|e| e.to_string())?;
        let want = naive_precision_at_k(&preds, &target_ids, &vocab, k);
        if got != want {
            return Err(format!("seed {seed}: P@{k} {got} vs oracle {want}"));
        }
    }
    for i in 0..n {
        let k = [1, 10, v][i % 3];
        let got = index.lookup(preds.row(i), k).map_err(|e| e.to_string())?;
        let want = naive_top_k(preds.row(i), &vocab, k);
        if got.len() != want.len() {
            return Err(format!(
                "seed {seed}: lookup returned {} rows, oracle {}",
                got.len(),
                want.len()
            ));
        }
        for (g, (id, s)) in got.iter().zip(&want) {
            if &g.id != id || (g.score - s).abs() > 1e-12 {
                return Err(format!(
                    "seed {seed} item {i}: lookup ({}, {}) vs oracle ({id}, {s})",
                    g.id, g.score
                ));
            }
        }
    }
    Ok(())
}

pub fn supervised(x: &Matrix, y: &Matrix) -> revdict::data::SupervisedSet {
    revdict::data::SupervisedSet {
        features: x.clone(),
        targets: y.clone(),
        ids: (0..x.rows()).map(|i| format!("e{i}")).collect(),
        dropped: 0,
    }
}

pub fn pairs(x: &Matrix, y: &Matrix) -> Vec<revdict::data::AlignedPair> {
    (0..x.rows())
        .map(|i| revdict::data::AlignedPair {
            src_id: format!("s{i}"),
            tgt_id: format!("t{i}"),
            src_embedding: x.row(i).to_vec(),
            tgt_embedding: y.row(i).to_vec(),
        })
        .collect()
}

// ---- golden fixture ----

pub fn golden_dir() -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/golden")
}

#[derive(Debug, serde::Serialize, serde::Deserialize)]
pub struct GoldenTop {
    pub item: String,
    pub ids: Vec<String>,
    pub scores: Vec<f64>,
}

#[derive(Debug, serde::Serialize, serde::Deserialize)]
pub struct GoldenExpected {
    pub mse: f64,
    pub cosine: f64,
    pub rank: f64,
    pub p_at_1: f64,
    pub p_at_10: f64,
    pub n_items: usize,
    pub top10: Vec<GoldenTop>,
}

const GOLDEN_N: usize = 40;
const GOLDEN_V: usize = 120;
const GOLDEN_D: usize = 16;

/// Writes the fixture inputs and the oracle's expected metrics.
pub fn regenerate_golden() {
    use revdict::data::{write_dictionary, DictEntry, DictionarySet, Split};

    let dir = golden_dir();
    std::fs::create_dir_all(&dir).unwrap();
    let mut r = rng(31337);
    let vocab = vocab_with_ties(&mut r, GOLDEN_V, GOLDEN_D);
    let entry = |i: usize| {
        let (id, v) = &vocab[i];
        let mut e = DictEntry::new(id.clone(), format!("word{i}"), format!("gloss number {i}"));
        e.electra = Some(v.clone());
        e
    };
    let reference: Vec<DictEntry> = (0..GOLDEN_N).map(entry).collect();
    let distractors: Vec<DictEntry> = (GOLDEN_N..GOLDEN_V).map(entry).collect();
    write_dictionary(
        &DictionarySet::new("ar", Split::Test, reference).unwrap(),
        dir.join("reference.json"),
    )
    .unwrap();
    write_dictionary(
        &DictionarySet::new("ar", Split::Test, distractors).unwrap(),
        dir.join("distractors.json"),
    )
    .unwrap();

    let ids: Vec<String> = vocab[..GOLDEN_N].iter().map(|(id, _)| id.clone()).collect();
    let targets = Matrix::from_rows(
        &vocab[..GOLDEN_N]
            .iter()
            .map(|(_, v)| v.clone())
            .collect::<Vec<_>>(),
    )
    .unwrap();
    let mut preds = targets.clone();
    for i in 0..GOLDEN_N {
        let copy = i % 7 == 3;
        for k in 0..GOLDEN_D {
            let noise = if copy { 0.0 } else { 0.9 * gaussian(&mut r) };
            preds.set(i, k, targets.get(i, k) + noise);
        }
    }
    revdict::pipeline::write_predictions(dir.join("predictions.jsonl"), &ids, &preds).unwrap();

    let pool =
        Matrix::from_rows(&vocab.iter().map(|(_, v)| v.clone()).collect::<Vec<_>>()).unwrap();
    let idx: Vec<usize> = (0..GOLDEN_N).collect();
    let m = naive_evaluate(&preds, &targets, &pool, &idx);
    let top10 = (0..GOLDEN_N)
        .step_by(5)
        .map(|i| {
            let hits = naive_top_k(preds.row(i), &vocab, 10);
            GoldenTop {
                item: ids[i].clone(),
                ids: hits.iter().map(|h| h.0.clone()).collect(),
                scores: hits.iter().map(|h| h.1).collect(),
            }
        })
        .collect();
    let expected = GoldenExpected {
        mse: m.mse,
        cosine: m.cosine,
        rank: m.rank,
        p_at_1: naive_precision_at_k(&preds, &ids, &vocab, 1),
        p_at_10: naive_precision_at_k(&preds, &ids, &vocab, 10),
        n_items: GOLDEN_N,
        top10,
    };
    let text = serde_json::to_string_pretty(&expected).unwrap();
    std::fs::write(dir.join("expected.json"), text + "\n").unwrap();
}

/// Scores the committed fixture through the eval command and compares
/// with the frozen expectations.
pub fn check_golden() -> Result<(), String> {
    use revdict::data::TargetKind;
    use revdict::pipeline::{cmd_eval, read_predictions, EvalArgs};

    let dir = golden_dir();
    let text = std::fs::read_to_string(dir.join("expected.json")).map_err(|e| e.to_string())?;
    let want: GoldenExpected = serde_json::from_str(&text).map_err(|e| e.to_string())?;
    let got = cmd_eval(&EvalArgs {
        predictions: dir.join("predictions.jsonl"),
        reference: dir.join("reference.json"),
        target: TargetKind::Electra,
        vocabulary: vec![dir.join("reference.json"), dir.join("distractors.json")],
        language: "ar".into(),
        split: revdict::data::Split::Test,
        subtask: "Subtask 1".into(),
    })
    .map_err(|e| e.to_string())?
    .report;
    let exact = [
        ("rank", got.rank, want.rank),
        ("P@1", got.p_at_1.unwrap_or(f64::NAN), want.p_at_1),
        ("P@10", got.p_at_10.unwrap_or(f64::NAN), want.p_at_10),
    ];
    for (name, g, w) in exact {
        if g != w {
            return Err(format!("{name}: {g} vs fixture {w}"));
        }
    }
    for (name, g, w) in [
        ("mse", got.mse, want.mse),
        ("cosine", got.cosine, want.cosine),
    ] {
        if (g - w).abs() > 1e-12 {
            return Err(format!("{name}: {g} vs fixture {w}"));
        }
    }
    if got.n_items != want.n_items {
        return Err(format!(
            "n_items {} vs fixture {}",
            got.n_items, want.n_items
        ));
    }

    let preds = read_predictions(dir.join("predictions.jsonl")).map_err(|e| e.to_string())?;
    let mut vocab = Vec::new();
    for f in ["reference.json", "distractors.json"] {
        let set = revdict::data::load_dictionary(dir.join(f), "ar", revdict::data::Split::Test)
            .map_err(|e| e.to_string())?;
        vocab.extend(
            set.entries()
                .iter()
                .map(|e| (e.id.clone(), e.electra.clone().unwrap())),
        );
    }
    let index = index_of(&vocab);
    for top in &want.top10 {
        let i = preds
            .ids
            .iter()
            .position(|id| id == &top.item)
            .ok_or("fixture item missing")?;
        let hits = index
            .lookup(preds.embeddings.row(i), 10)
            .map_err(|e| e.to_string())?;
        let ids: Vec<&str> = hits.iter().map(|h| h.id.as_str()).collect();
        if ids != top.ids.iter().map(String::as_str).collect::<Vec<_>>() {
            return Err(format!("top-10 for {} differs: {ids:?}", top.item));
        }
        for (h, s) in hits.iter().zip(&top.scores) {
            if (h.score - s).abs() > 1e-12 {
                return Err(format!("score for {} differs: {} vs {s}", h.id, h.score));
            }
        }
    }
    Ok(())
}

// ---- learnability ----

pub const LEARN_N: usize = 2000;

/// Best dev cosine of a projection head (hidden width = d_enc) on the
/// noisy linear task with `d_enc = 32`, `d_out = 16`, `σ = 0.01`.
pub fn head_learnability(cfg: &revdict::optim::TrainConfig) -> f64 {
    use revdict::data::TargetKind;
    use revdict::projection::{train_head, HeadSpec, ProjectionHead};

    let t = noisy_linear_task(100, LEARN_N, 32, 16, 0.01);
    let head =
        ProjectionHead::init(&HeadSpec::new(32, 16, TargetKind::Electra, "synthetic").seed(1))
            .unwrap();
    let trained = train_head(
        head,
        &supervised(&t.train_x, &t.train_y),
        &supervised(&t.dev_x, &t.dev_y),
        cfg,
    )
    .unwrap();
    trained.summary.best_dev_cosine
}

/// Best dev cosine of the aligner (32 → 128 → 32 → 128 → 32) on a random
/// rotation of `R^32`.
pub fn aligner_learnability(cfg: &revdict::optim::TrainConfig) -> f64 {
    use revdict::align::{train_aligner, AlignerAE, AlignerConfig};

    let t = rotation_task(200, LEARN_N, 32);
    let ae = AlignerAE::init(AlignerConfig {
        d_in: 32,
        hidden: 128,
        bottleneck: 32,
        d_out: 32,
        seed: 1,
        reconstruction_weight: 0.0,
    })
    .unwrap();
    let trained = train_aligner(
        ae,
        &pairs(&t.train_x, &t.train_y),
        &pairs(&t.dev_x, &t.dev_y),
        cfg,
    )
    .unwrap();
    trained.summary.best_dev_cosine
}

// ---- synthetic workspaces ----

pub fn small_spec() -> revdict::synth::SynthSpec {
    revdict::synth::SynthSpec {
        n_train: 200,
        n_dev: 50,
        n_test: 50,
        ..revdict::synth::SynthSpec::default()
    }
}

/// Writes a synthetic corpus into a fresh temp dir; returns the dir and
/// the config path.
pub fn synth_workspace(
    spec: revdict::synth::SynthSpec,
    max_lr: f64,
) -> (tempfile::TempDir, std::path::PathBuf) {
    let dir = tempfile::tempdir().unwrap();
    let corpus = revdict::synth::SynthCorpus::generate(spec).unwrap();
    let cfg = corpus.write(dir.path(), max_lr).unwrap();
    (dir, cfg)
}

/// Every file under `dir`, relative path → bytes.
pub fn snapshot(dir: &std::path::Path) -> std::collections::BTreeMap<std::path::PathBuf, Vec<u8>> {
    let mut out = std::collections::BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.insert(
                    p.strip_prefix(dir).unwrap().to_path_buf(),
                    std::fs::read(&p).unwrap(),
                );
            }
        }
    }
    out
}

/// Synthetic workspace with trained heads and searched ensembles.
pub fn trained_workspace(
    spec: revdict::synth::SynthSpec,
) -> (tempfile::TempDir, revdict::pipeline::RunConfig) {
    let (dir, path) = synth_workspace(spec, 1e-2);
    let cfg = revdict::pipeline::RunConfig::load(&path).unwrap();
    revdict::pipeline::cmd_train(&cfg).unwrap();
    revdict::pipeline::cmd_search(&cfg, &[]).unwrap();
    (dir, cfg)
}

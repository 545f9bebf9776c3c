//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion
//! and exits non-zero when any criterion fails.

use std::collections::{HashMap, HashSet};
use std::time::{Duration, Instant};

use igrl::corpus::{
    encode_corpus, generate_synthetic_corpus, tokenize, BigramTable, DialoguePair, EncodedPair, StyleSet,
    SyntheticSpec, Vocabulary, EOS, SOS,
};
use igrl::evalsuite::{a_sar, distinct_n, perplexity, skeleton_retention, ConflictMatrix, StylePredictor};
use igrl::lexicon::{recovery, StyleLexicon, PMI_FLOOR, THRESHOLD_FRACTION};
use igrl::models::{exp_all, sample_categorical, ModelConfig, Seq2SeqModel};
use igrl::objectives::{
    constrained_sample, mle_loss, pair_gradients, rl_loss, smoothing_loss, LossWeights, Mode, RlPositions, RlTerm,
    SamplingTrajectory,
};
use igrl::{Error, Result};
use igrl_cli::{Evaluation, ExperimentManifest, Pipeline};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const PMI_TOL: f64 = 1e-9;
const PMI_CORPORA: usize = 100;
const PMI_BUDGET: Duration = Duration::from_secs(10);
const RECOVERY_MIN: f64 = 0.95;
const RECOVERY_BUDGET: Duration = Duration::from_secs(30);
const TRAJECTORIES: usize = 10_000;
const FD_MAX_REL_ERR: f64 = 1e-3;
const FD_STEP: f64 = 1e-5;
const FD_REL_FLOOR: f64 = 1e-6;
const FD_BUDGET: Duration = Duration::from_secs(60);
const ALPHA: f64 = 0.2;
const BETA: f64 = 0.25;
const BASELINE: f64 = 0.3;
const MC_SAMPLES: usize = 50_000;
const MC_SIGMAS: f64 = 3.0;
/// Absorbs finite-difference noise on coordinates with near-zero gradient.
const MC_ABS_SLACK: f64 = 1e-8;
const UPLIFT_MIN: f64 = 0.15;
const SKELETON_DRIFT_MAX: f64 = 0.05;
const PERPLEXITY_GROWTH_MAX: f64 = 0.15;
const END_TO_END_BUDGET: Duration = Duration::from_secs(15 * 60);
const HACK_FREQUENCY: f64 = 0.25;
const RATIO_TOL: f64 = 1e-9;
const DESK_SEED: u64 = 2024;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

// ---------------------------------------------------------------- 1

fn brute_force_pmi(pairs: &[DialoguePair], token: &str, style: usize) -> Option<f64> {
    let (mut joint, mut marginal, mut mass, mut total) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for p in pairs {
        for t in &p.response {
            total += 1.0;
            let in_style = p.style.id == style;
            if in_style {
                mass += 1.0;
            }
            if t.as_str() == token {
                marginal += 1.0;
                if in_style {
                    joint += 1.0;
                }
            }
        }
    }
    (joint > 0.0).then(|| ((joint / total) / ((marginal / total) * (mass / total))).ln())
}

fn random_corpus(rng: &mut ChaCha8Rng) -> (Vec<DialoguePair>, StyleSet) {
    let n_styles = rng.gen_range(2..=3);
    let styles = StyleSet::new((0..n_styles).map(|s| format!("s{s}"))).unwrap();
    let n_pairs = rng.gen_range(n_styles..=50);
    let pairs = (0..n_pairs)
        .map(|i| {
            let style = if i < n_styles { i } else { rng.gen_range(0..n_styles) };
            let len = rng.gen_range(1..8);
            let text: Vec<String> = (0..len).map(|_| format!("t{}", rng.gen_range(0..30))).collect();
            DialoguePair::new(tokenize("q"), tokenize(&text.join(" ")), styles.label(style).unwrap()).unwrap()
        })
        .collect();
    (pairs, styles)
}

fn pmi_oracle() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (mut worst_pmi, mut worst_threshold) = (0.0f64, 0.0f64);
    for _ in 0..PMI_CORPORA {
        let (pairs, styles) = random_corpus(&mut rng);
        let vocab = Vocabulary::build(&pairs, 1000).unwrap();
        let lex = StyleLexicon::build(&encode_corpus(&pairs, &vocab), &vocab, &styles).unwrap();
        for s in 0..styles.len() {
            let mut max = f64::NEG_INFINITY;
            for x in vocab.content_ids() {
                let expected = brute_force_pmi(&pairs, vocab.surface(x), s);
                worst_pmi = worst_pmi.max((lex.pmi(x, s) - expected.unwrap_or(PMI_FLOOR)).abs());
                let in_responses = pairs.iter().any(|p| p.response.iter().any(|t| t.as_str() == vocab.surface(x)));
                if in_responses {
                    max = max.max(expected.unwrap_or(PMI_FLOOR));
                }
            }
            worst_threshold = worst_threshold.max((lex.threshold(s) - THRESHOLD_FRACTION * max).abs());
        }
    }
    let elapsed = start.elapsed();
    outcome(
        worst_pmi <= PMI_TOL && worst_threshold <= PMI_TOL && elapsed < PMI_BUDGET,
        format!("max |pmi err| {worst_pmi:.2e}, max |threshold err| {worst_threshold:.2e}, {elapsed:.2?}"),
    )
}

// ---------------------------------------------------------------- 2

fn desk_corpus(seed: u64) -> (StyleSet, Vec<DialoguePair>, Vec<Vec<String>>) {
    let styles = StyleSet::new(["male", "female"]).unwrap();
    let (pairs, truth) = generate_synthetic_corpus(&SyntheticSpec::desk_scale(seed), &styles).unwrap();
    (styles, pairs, truth.stylistic)
}

fn lexicon_recovery() -> Outcome {
    let start = Instant::now();
    let (styles, pairs, truth) = desk_corpus(DESK_SEED);
    let vocab = Vocabulary::build(&pairs, 200).unwrap();
    let lex = StyleLexicon::build(&encode_corpus(&pairs, &vocab), &vocab, &styles).unwrap();
    let mut worst = 1.0f64;
    for (s, planted) in truth.iter().enumerate() {
        let ids: Vec<usize> = planted.iter().map(|t| vocab.id(t)).collect();
        let (precision, recall) = recovery(&lex, s, &ids);
        worst = worst.min(precision.unwrap_or(0.0)).min(recall);
    }
    let elapsed = start.elapsed();
    outcome(
        worst >= RECOVERY_MIN && elapsed < RECOVERY_BUDGET && pairs.len() == 2000,
        format!("min precision/recall {worst:.4} over {} pairs, {elapsed:.2?}", pairs.len()),
    )
}

// ---------------------------------------------------------------- 3

fn sampling_invariant() -> Outcome {
    let (styles, pairs, _) = desk_corpus(DESK_SEED);
    let vocab = Vocabulary::build(&pairs, 200).unwrap();
    let corpus = encode_corpus(&pairs, &vocab);
    let lex = StyleLexicon::build(&corpus, &vocab, &styles).unwrap();
    let model = Seq2SeqModel::new(ModelConfig::desk_scale(vocab.len()), 5).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let (mut copy_violations, mut flag_violations, mut freed) = (0usize, 0usize, 0usize);
    let (mut outputs, mut refs, mut ref_styles) = (Vec::new(), Vec::new(), Vec::new());
    for i in 0..TRAJECTORIES {
        let pair = &corpus[i % corpus.len()];
        let t = constrained_sample(&model, &pair.query, &pair.response, pair.style, &lex, &mut rng).unwrap();
        for (k, &y) in pair.response.iter().enumerate() {
            let stylistic = y != EOS && lex.pmi(y, pair.style) >= lex.threshold(pair.style);
            if t.freed_mask[k] != stylistic {
                flag_violations += 1;
            }
            if !t.freed_mask[k] && t.tokens[k] != y {
                copy_violations += 1;
            }
        }
        freed += t.freed_count();
        outputs.push(t.tokens);
        refs.push(pair.response.clone());
        ref_styles.push(pair.style);
    }
    let retention = skeleton_retention(&outputs, &refs, &ref_styles, &lex).unwrap();
    outcome(
        copy_violations == 0 && flag_violations == 0 && retention == 1.0 && freed > 0,
        format!(
            "{TRAJECTORIES} trajectories, {freed} freed positions, copy violations {copy_violations}, \
             flag violations {flag_violations}, skeleton retention {retention}"
        ),
    )
}

// ---------------------------------------------------------------- 4

struct GradientCase {
    model: Seq2SeqModel,
    query: Vec<usize>,
    reference: Vec<usize>,
    trajectory: SamplingTrajectory,
    reward: f64,
    bigrams: BigramTable,
}

fn gradient_case() -> GradientCase {
    let styles = StyleSet::new(["male", "female"]).unwrap();
    let rows = [
        ("what did you do today", "female", "my husband and his friends went out"),
        ("who came over", "female", "my husband and his car"),
        ("what did you do today", "male", "my wife and her friends went out"),
        ("who came over", "male", "my wife and her car"),
    ];
    let pairs: Vec<DialoguePair> = rows
        .iter()
        .map(|(q, s, r)| DialoguePair::new(tokenize(q), tokenize(r), styles.by_name(s).unwrap()).unwrap())
        .collect();
    let vocab = Vocabulary::build(&pairs, 20).unwrap();
    let corpus = encode_corpus(&pairs, &vocab);
    let lex = StyleLexicon::build(&corpus, &vocab, &styles).unwrap();
    let config = ModelConfig {
        embedding_dim: 4,
        hidden_dim: 6,
        encoder_layers: 2,
        decoder_layers: 2,
        vocab_size: vocab.len(),
        max_decode_len: 10,
    };
    let model = Seq2SeqModel::new(config, 17).unwrap();
    let pair = &corpus[0];
    let trajectory =
        constrained_sample(&model, &pair.query, &pair.response, pair.style, &lex, &mut ChaCha8Rng::seed_from_u64(2))
            .unwrap();
    GradientCase {
        query: pair.query.clone(),
        reference: pair.response.clone(),
        trajectory,
        reward: 0.8,
        bigrams: BigramTable::build(&corpus).unwrap(),
        model,
    }
}

fn forward_hybrid(c: &GradientCase, model: &Seq2SeqModel, w: LossWeights) -> f64 {
    let mle = mle_loss(model, &c.query, &c.reference).unwrap();
    let smo = smoothing_loss(model, &c.query, &c.reference, &c.bigrams).unwrap();
    let (_, terms) = model.sequence_log_prob(&c.query, &c.trajectory.tokens).unwrap();
    let t = SamplingTrajectory { step_log_probs: terms, ..c.trajectory.clone() };
    w.mle * mle + w.smo * smo + w.rl * rl_loss(&t, c.reward, BASELINE, RlPositions::All)
}

fn max_rel_error(c: &GradientCase, w: LossWeights) -> f64 {
    let mut grads = c.model.params().zeros_like();
    let term = RlTerm {
        trajectory: &c.trajectory,
        reward: c.reward,
        baseline: BASELINE,
        positions: RlPositions::All,
    };
    pair_gradients(&c.model, &c.query, &c.reference, Some(term), Some(&c.bigrams), w, 1.0, &mut grads).unwrap();
    let mut probe = c.model.clone();
    let mut worst = 0.0f64;
    for id in c.model.params().ids() {
        for j in 0..c.model.params().get(id).data().len() {
            let orig = c.model.params().get(id).data()[j];
            probe.params_mut().get_mut(id).data_mut()[j] = orig + FD_STEP;
            let up = forward_hybrid(c, &probe, w);
            probe.params_mut().get_mut(id).data_mut()[j] = orig - FD_STEP;
            let down = forward_hybrid(c, &probe, w);
            probe.params_mut().get_mut(id).data_mut()[j] = orig;
            let numeric = (up - down) / (2.0 * FD_STEP);
            let analytic = grads.get(id).data()[j];
            worst = worst.max((analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(FD_REL_FLOOR));
        }
    }
    worst
}

fn gradient_check() -> Outcome {
    let start = Instant::now();
    let c = gradient_case();
    let cfg = c.model.config();
    let mut parts = Vec::new();
    let mut worst = 0.0f64;
    for (name, w) in [
        ("mle", LossWeights { mle: 1.0, smo: 0.0, rl: 0.0 }),
        ("smo", LossWeights { mle: 0.0, smo: 1.0, rl: 0.0 }),
        ("rl", LossWeights { mle: 0.0, smo: 0.0, rl: 1.0 }),
        ("hybrid", LossWeights::hybrid(ALPHA, BETA)),
    ] {
        let e = max_rel_error(&c, w);
        worst = worst.max(e);
        parts.push(format!("{name} {e:.2e}"));
    }
    let elapsed = start.elapsed();
    outcome(
        worst <= FD_MAX_REL_ERR && cfg.vocab_size <= 20 && cfg.hidden_dim <= 8 && elapsed < FD_BUDGET,
        format!(
            "vocab {} hidden {}, max relative error {}, {elapsed:.2?}",
            cfg.vocab_size,
            cfg.hidden_dim,
            parts.join(", ")
        ),
    )
}

// ---------------------------------------------------------------- 5

const TOY_REWARD: [f64; 9] = [0.1, 0.9, 0.4, 0.7, 0.2, 0.5, 1.0, 0.0, 0.3];

fn toy_objective(model: &Seq2SeqModel, query: &[usize]) -> f64 {
    let mut j = 0.0;
    for a in 0..3 {
        for b in 0..3 {
            let lp = model.sequence_log_prob(query, &[a, b]).unwrap().0;
            j += lp.exp() * (TOY_REWARD[3 * a + b] - BASELINE);
        }
    }
    j
}

fn reinforce_unbiased() -> Outcome {
    let config = ModelConfig {
        embedding_dim: 1,
        hidden_dim: 1,
        encoder_layers: 1,
        decoder_layers: 1,
        vocab_size: 3,
        max_decode_len: 2,
    };
    let model = Seq2SeqModel::new(config, 23).unwrap();
    let query = [1, 2];

    let mut exact = Vec::new();
    let mut probe = model.clone();
    for id in model.params().ids() {
        for j in 0..model.params().get(id).data().len() {
            let orig = model.params().get(id).data()[j];
            probe.params_mut().get_mut(id).data_mut()[j] = orig + 1e-6;
            let up = toy_objective(&probe, &query);
            probe.params_mut().get_mut(id).data_mut()[j] = orig - 1e-6;
            let down = toy_objective(&probe, &query);
            probe.params_mut().get_mut(id).data_mut()[j] = orig;
            exact.push(-(up - down) / 2e-6);
        }
    }

    let n = exact.len();
    let (mut sum, mut sum_sq) = (vec![0.0; n], vec![0.0; n]);
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let weights = LossWeights { mle: 0.0, smo: 0.0, rl: 1.0 };
    for _ in 0..MC_SAMPLES {
        let mut state = model.start(&query).unwrap();
        let mut prev = SOS;
        let mut tokens = Vec::with_capacity(2);
        for _ in 0..2 {
            let (lp, next) = model.step_log_probs(&state, prev).unwrap();
            prev = sample_categorical(&exp_all(&lp), &mut rng);
            tokens.push(prev);
            state = next;
        }
        let reward = TOY_REWARD[3 * tokens[0] + tokens[1]];
        let trajectory = SamplingTrajectory {
            tokens,
            freed_mask: vec![true; 2],
            step_log_probs: vec![0.0; 2],
            reward: Some(reward),
        };
        let term = RlTerm {
            trajectory: &trajectory,
            reward,
            baseline: BASELINE,
            positions: RlPositions::All,
        };
        let mut g = model.params().zeros_like();
        pair_gradients(&model, &query, &[EOS], Some(term), None, weights, 1.0, &mut g).unwrap();
        for (k, v) in g.flatten().into_iter().enumerate() {
            sum[k] += v;
            sum_sq[k] += v * v;
        }
    }
    let m = MC_SAMPLES as f64;
    let (mut outside, mut worst_z) = (0usize, 0.0f64);
    for k in 0..n {
        let mean = sum[k] / m;
        let var = (sum_sq[k] / m - mean * mean).max(0.0) * m / (m - 1.0);
        let se = (var / m).sqrt();
        let diff = (mean - exact[k]).abs();
        if diff > MC_SIGMAS * se + MC_ABS_SLACK {
            outside += 1;
        }
        if se > 0.0 {
            worst_z = worst_z.max((diff - MC_ABS_SLACK).max(0.0) / se);
        }
    }
    outcome(
        outside == 0,
        format!("{n} coordinates, {outside} outside {MC_SIGMAS} standard errors, largest |z| {worst_z:.2}"),
    )
}

// ---------------------------------------------------------------- 6 & 7

struct DeskRun {
    base: Evaluation,
    ig: Evaluation,
    unconstrained: Evaluation,
    ig_elapsed: Duration,
}

fn desk_run() -> std::result::Result<DeskRun, String> {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let manifest = ExperimentManifest::desk_scale(DESK_SEED);
    let p = Pipeline::new(manifest, dir.path()).map_err(|e| e.to_string())?;
    let start = Instant::now();
    p.synth().map_err(|e| e.to_string())?;
    p.build_lexicon().map_err(|e| e.to_string())?;
    p.train_classifier().map_err(|e| e.to_string())?;
    p.pretrain().map_err(|e| e.to_string())?;
    let base = p.evaluate(None).map_err(|e| e.to_string())?;
    p.train(Mode::IgRl).map_err(|e| e.to_string())?;
    let ig = p.evaluate(Some(Mode::IgRl)).map_err(|e| e.to_string())?;
    let ig_elapsed = start.elapsed();
    p.train(Mode::Unconstrained).map_err(|e| e.to_string())?;
    let unconstrained = p.evaluate(Some(Mode::Unconstrained)).map_err(|e| e.to_string())?;
    Ok(DeskRun {
        base,
        ig,
        unconstrained,
        ig_elapsed,
    })
}

fn content(r: &[usize]) -> Vec<usize> {
    r.iter().copied().take_while(|&t| t != EOS).collect()
}

/// Largest fraction of outputs ending with one and the same n-gram, n >= 2.
fn top_suffix_frequency(outputs: &[Vec<usize>]) -> (f64, Vec<usize>) {
    let mut counts: HashMap<Vec<usize>, usize> = HashMap::new();
    for o in outputs {
        let c = content(o);
        for n in 2..=c.len() {
            *counts.entry(c[c.len() - n..].to_vec()).or_default() += 1;
        }
    }
    top(counts, outputs.len())
}

/// Largest fraction of outputs containing one and the same n-gram, n >= 2.
fn top_ngram_frequency(outputs: &[Vec<usize>]) -> (f64, Vec<usize>) {
    let mut counts: HashMap<Vec<usize>, usize> = HashMap::new();
    for o in outputs {
        let c = content(o);
        let mut seen = HashSet::new();
        for n in 2..=c.len() {
            for w in c.windows(n) {
                seen.insert(w.to_vec());
            }
        }
        for g in seen {
            *counts.entry(g).or_default() += 1;
        }
    }
    top(counts, outputs.len())
}

fn top(counts: HashMap<Vec<usize>, usize>, n: usize) -> (f64, Vec<usize>) {
    counts
        .into_iter()
        .map(|(g, c)| (c as f64 / n as f64, g))
        .max_by(|a, b| a.0.total_cmp(&b.0).then_with(|| b.1.cmp(&a.1)))
        .unwrap_or((0.0, Vec::new()))
}

fn style_uplift(run: &std::result::Result<DeskRun, String>) -> Outcome {
    let run = match run {
        Ok(r) => r,
        Err(e) => return outcome(false, format!("pipeline failed: {e}")),
    };
    let (b, g) = (&run.base, &run.ig);
    let uplift = g.mean_reward - b.mean_reward;
    let drift = (g.overall.skeleton_retention - b.overall.skeleton_retention).abs();
    let growth = g.overall.perplexity / b.overall.perplexity - 1.0;
    outcome(
        uplift >= UPLIFT_MIN
            && drift <= SKELETON_DRIFT_MAX
            && growth <= PERPLEXITY_GROWTH_MAX
            && run.ig_elapsed <= END_TO_END_BUDGET,
        format!(
            "reward {:.4} -> {:.4} (uplift {uplift:+.4}, need >= {UPLIFT_MIN}), skeleton {:.4} -> {:.4} \
             (drift {drift:.4}, max {SKELETON_DRIFT_MAX}), perplexity {:.4} -> {:.4} ({:+.1}%, max +{:.0}%), {:.0?}",
            b.mean_reward,
            g.mean_reward,
            b.overall.skeleton_retention,
            g.overall.skeleton_retention,
            b.overall.perplexity,
            g.overall.perplexity,
            100.0 * growth,
            100.0 * PERPLEXITY_GROWTH_MAX,
            run.ig_elapsed
        ),
    )
}

fn diversity_ordering(run: &std::result::Result<DeskRun, String>) -> Outcome {
    let run = match run {
        Ok(r) => r,
        Err(e) => return outcome(false, format!("pipeline failed: {e}")),
    };
    let d2_ig = distinct_n(&run.ig.responses.iter().map(|r| content(r)).collect::<Vec<_>>(), 2).unwrap_or(0.0);
    let d2_un =
        distinct_n(&run.unconstrained.responses.iter().map(|r| content(r)).collect::<Vec<_>>(), 2).unwrap_or(0.0);
    let (suffix_freq, suffix) = top_suffix_frequency(&run.unconstrained.responses);
    let (ig_freq, ig_gram) = top_ngram_frequency(&run.ig.responses);
    outcome(
        d2_ig > d2_un && suffix_freq > HACK_FREQUENCY && ig_freq <= HACK_FREQUENCY,
        format!(
            "distinct-2 ig-rl {d2_ig:.4} vs unconstrained {d2_un:.4}; top unconstrained suffix {suffix:?} in \
             {:.1}% (need > {:.0}%); top ig-rl n-gram {ig_gram:?} in {:.1}% (max {:.0}%)",
            100.0 * suffix_freq,
            100.0 * HACK_FREQUENCY,
            100.0 * ig_freq,
            100.0 * HACK_FREQUENCY
        ),
    )
}

// ---------------------------------------------------------------- 8

struct StubPredictor {
    names: Vec<String>,
}

impl StylePredictor for StubPredictor {
    fn style_names(&self) -> &[String] {
        &self.names
    }

    fn predict(&self, response: &[usize]) -> Result<usize> {
        response.first().map(|&t| t % 3).ok_or(Error::EmptyInput("response"))
    }
}

fn metric_units() -> Outcome {
    let mut failures = Vec::new();
    let mut check = |name: &str, got: f64, want: f64| {
        if (got - want).abs() > RATIO_TOL {
            failures.push(format!("{name}: {got} != {want}"));
        }
    };
    let lines = |ls: &[&str]| -> Vec<Vec<String>> {
        ls.iter().map(|l| l.split_whitespace().map(String::from).collect()).collect()
    };
    check("distinct-1 [a b, a b]", distinct_n(&lines(&["a b", "a b"]), 1).unwrap(), 0.5);
    check("distinct-1 unique", distinct_n(&lines(&["a b c d e"]), 1).unwrap(), 1.0);
    check("distinct-2 [a b c, b c d]", distinct_n(&lines(&["a b c", "b c d"]), 2).unwrap(), 0.75);
    check("distinct-2 without bigrams errors", f64::from(u8::from(distinct_n(&lines(&["a", "b"]), 2).is_err())), 1.0);

    // styles 0 male, 1 female, 2 neutral; desired male; three female predictions
    let stub = StubPredictor {
        names: vec!["male".into(), "female".into(), "neutral".into()],
    };
    let predicted = [0, 2, 1, 0, 0, 1, 2, 0, 1, 0];
    let responses: Vec<Vec<usize>> = predicted.iter().map(|&s| vec![s + 3]).collect();
    check("a-sar stub", a_sar(&responses, 0, &stub, &ConflictMatrix::gender()).unwrap(), 0.7);
    check("a-sar all desired", a_sar(&vec![vec![3]; 5], 0, &stub, &ConflictMatrix::gender()).unwrap(), 1.0);

    let styles = StyleSet::new(["male", "female"]).unwrap();
    let rows = [
        ("female", "my husband and his friends"),
        ("female", "my husband and his car"),
        ("male", "my wife and her friends"),
        ("male", "my wife and her car"),
    ];
    let pairs: Vec<DialoguePair> = rows
        .iter()
        .map(|(s, r)| DialoguePair::new(tokenize("how are you"), tokenize(r), styles.by_name(s).unwrap()).unwrap())
        .collect();
    let vocab = Vocabulary::build(&pairs, 50).unwrap();
    let corpus: Vec<EncodedPair> = encode_corpus(&pairs, &vocab);
    let lex = StyleLexicon::build(&corpus, &vocab, &styles).unwrap();
    let refs: Vec<Vec<usize>> = corpus.iter().map(|p| p.response.clone()).collect();
    let ref_styles: Vec<usize> = corpus.iter().map(|p| p.style).collect();
    check("skeleton identical", skeleton_retention(&refs, &refs, &ref_styles, &lex).unwrap(), 1.0);
    let partial = vec![vocab.encode(&tokenize("my wife car her friends"))];
    check(
        "skeleton one neutral miss",
        skeleton_retention(&partial, &refs[..1], &ref_styles[..1], &lex).unwrap(),
        2.0 / 3.0,
    );

    let uniform = Seq2SeqModel::zeroed(ModelConfig {
        embedding_dim: 3,
        hidden_dim: 4,
        encoder_layers: 1,
        decoder_layers: 1,
        vocab_size: vocab.len(),
        max_decode_len: 8,
    })
    .unwrap();
    check("perplexity uniform", perplexity(&uniform, &corpus).unwrap(), vocab.len() as f64);

    let pass = failures.is_empty();
    outcome(pass, if pass { "all hand-computed values matched".into() } else { failures.join("; ") })
}

// ---------------------------------------------------------------- 9

fn tiny_manifest() -> ExperimentManifest {
    let mut m = ExperimentManifest::desk_scale(77);
    m.synthetic.corpus_size = 300;
    m.model.embedding_dim = 8;
    m.model.hidden_dim = 12;
    m.model.max_decode_len = 12;
    m.training.rl_epochs = 2;
    m.training.batch_size = 32;
    m
}

fn pipeline_artifacts() -> std::result::Result<Vec<(String, Vec<u8>)>, String> {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let p = Pipeline::new(tiny_manifest(), dir.path()).map_err(|e| e.to_string())?;
    p.synth().map_err(|e| e.to_string())?;
    p.build_lexicon().map_err(|e| e.to_string())?;
    p.train_classifier().map_err(|e| e.to_string())?;
    p.pretrain().map_err(|e| e.to_string())?;
    let queries = dir.path().join("queries.txt");
    std::fs::write(&queries, "w04 w10 w18 w16 w02\nw01 w05 w12 w09 w00\nw07 w05 w10\n").map_err(|e| e.to_string())?;
    let mut files = vec![p.pretrain_log_path()];
    for mode in [Mode::IgRl, Mode::Unconstrained, Mode::RandomMask] {
        p.train(mode).map_err(|e| e.to_string())?;
        p.evaluate(Some(mode)).map_err(|e| e.to_string())?;
        p.generate(Some(mode), &queries).map_err(|e| e.to_string())?;
        files.push(p.epoch_log_path(mode));
        files.push(p.eval_responses_path(Some(mode)));
        files.push(p.generated_path(Some(mode)));
    }
    files
        .into_iter()
        .map(|f| {
            let name = f.file_name().unwrap().to_string_lossy().into_owned();
            std::fs::read(&f).map(|b| (name, b)).map_err(|e| e.to_string())
        })
        .collect()
}

fn determinism() -> Outcome {
    match (pipeline_artifacts(), pipeline_artifacts()) {
        (Ok(a), Ok(b)) => {
            let differing: Vec<&str> =
                a.iter().zip(&b).filter(|(x, y)| x != y).map(|(x, _)| x.0.as_str()).collect();
            outcome(
                differing.is_empty() && a.len() == b.len(),
                format!("{} loss-log and response files compared, differing: {differing:?}", a.len()),
            )
        }
        (Err(e), _) | (_, Err(e)) => outcome(false, format!("pipeline failed: {e}")),
    }
}

fn main() {
    let mut results: Vec<(usize, &str, Outcome)> = Vec::new();
    let mut record = |n: usize, name: &'static str, o: Outcome| {
        println!("criterion {n} {name}: {} ({})", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        results.push((n, name, o));
    };
    record(1, "pmi-oracle-equivalence", pmi_oracle());
    record(2, "lexicon-recovery", lexicon_recovery());
    record(3, "constrained-sampling-invariant", sampling_invariant());
    record(4, "gradient-finite-difference", gradient_check());
    record(5, "reinforce-unbiasedness", reinforce_unbiased());
    let run = desk_run();
    record(6, "end-to-end-style-uplift", style_uplift(&run));
    record(7, "diversity-ordering-and-reward-hacking", diversity_ordering(&run));
    record(8, "metric-unit-values", metric_units());
    record(9, "pipeline-determinism", determinism());

    let failed: Vec<usize> = results.iter().filter(|r| !r.2.pass).map(|r| r.0).collect();
    println!("acceptance: {} of {} criteria passed", results.len() - failed.len(), results.len());
    if !failed.is_empty() {
        println!("acceptance: failing criteria {failed:?}");
        std::process::exit(1);
    }
}

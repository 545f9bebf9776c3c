use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use igrl::autodiff::Adam;
use igrl::corpus::{
    encode_corpus, generate_synthetic_corpus, load_corpus, load_style_set, save_corpus, save_style_set, style_counts,
    tokenize, BigramTable, DialoguePair, EncodedPair, StyleSet, Vocabulary, EOS,
};
use igrl::evalsuite::{a_sar, distinct_n, perplexity, skeleton_retention, EvalReport, MetricRow};
use igrl::lexicon::{recovery, StyleLexicon};
use igrl::models::{Checkpoint, Seq2SeqModel, StyleClassifier};
use igrl::objectives::{pretrain, train_rl, write_epoch_csv, Mode, RlContext};
use log::info;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::artifacts::{ensure_parent, require, stamp};
use crate::manifest::{derive_seed, ExperimentManifest};

/// Result of [`Pipeline::evaluate`]: the written report plus the unrounded
/// overall metrics, the mean target-style reward and the decoded responses.
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub report: EvalReport,
    pub overall: MetricRow,
    pub mean_reward: f64,
    pub responses: Vec<Vec<usize>>,
}

/// Name of the MLE-only generator among checkpoints and reports.
pub const PRETRAINED: &str = "pretrained";
const PROBE_PAIRS: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Synth,
    BuildLexicon,
    TrainClassifier,
    Pretrain,
    Train,
    Generate,
    Evaluate,
}

impl Stage {
    pub fn name(self) -> &'static str {
        match self {
            Stage::Synth => "synth",
            Stage::BuildLexicon => "build-lexicon",
            Stage::TrainClassifier => "train-classifier",
            Stage::Pretrain => "pretrain",
            Stage::Train => "train",
            Stage::Generate => "generate",
            Stage::Evaluate => "evaluate",
        }
    }
}

/// A failed stage. Displays as the one-line `ERROR:<stage>:<reason>`.
#[derive(Debug)]
pub struct StageError {
    pub stage: Stage,
    pub source: anyhow::Error,
}

impl fmt::Display for StageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let reason = format!("{:#}", self.source).replace(['\n', '\r'], " ");
        write!(f, "ERROR:{}:{}", self.stage.name(), reason)
    }
}

impl std::error::Error for StageError {}

fn model_name(mode: Option<Mode>) -> &'static str {
    mode.map(Mode::flag).unwrap_or(PRETRAINED)
}

/// A manifest bound to a run directory.
#[derive(Debug, Clone)]
pub struct Pipeline {
    manifest: ExperimentManifest,
    root: PathBuf,
    hash: String,
}

/// Inputs shared by the training and evaluation stages.
struct Loaded {
    styles: StyleSet,
    vocab: Vocabulary,
    train: Vec<EncodedPair>,
}

impl Pipeline {
    pub fn new(manifest: ExperimentManifest, root: impl Into<PathBuf>) -> Result<Self> {
        manifest.validate()?;
        let hash = manifest.hash();
        Ok(Pipeline {
            manifest,
            root: root.into(),
            hash,
        })
    }

    /// Loads a manifest; artifacts live under `out`, or next to the manifest
    /// when no directory is given.
    pub fn open(path: &Path, seed: Option<u64>, out: Option<PathBuf>) -> Result<Self> {
        let mut manifest = ExperimentManifest::load(path)?;
        if let Some(seed) = seed {
            manifest.seed = seed;
        }
        let root = match out {
            Some(dir) => dir,
            None => path.parent().map(Path::to_path_buf).unwrap_or_default(),
        };
        Self::new(manifest, root)
    }

    pub fn manifest(&self) -> &ExperimentManifest {
        &self.manifest
    }

    pub fn manifest_hash(&self) -> &str {
        &self.hash
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn path(&self, rel: &Path) -> PathBuf {
        self.root.join(rel)
    }

    fn seed(&self, stage: &str) -> u64 {
        derive_seed(self.manifest.seed, stage)
    }

    pub fn checkpoint_path(&self, mode: Option<Mode>) -> PathBuf {
        self.path(&self.manifest.paths.checkpoints).join(format!("{}.json", model_name(mode)))
    }

    pub fn epoch_log_path(&self, mode: Mode) -> PathBuf {
        self.path(&self.manifest.paths.reports).join(format!("{}_epochs.csv", mode.flag()))
    }

    pub fn pretrain_log_path(&self) -> PathBuf {
        self.path(&self.manifest.paths.reports).join("pretrain_loss.csv")
    }

    pub fn report_path(&self, mode: Option<Mode>) -> PathBuf {
        self.path(&self.manifest.paths.reports).join(format!("eval_{}.csv", model_name(mode)))
    }

    pub fn eval_responses_path(&self, mode: Option<Mode>) -> PathBuf {
        self.path(&self.manifest.paths.reports).join(format!("eval_{}_responses.txt", model_name(mode)))
    }

    pub fn generated_path(&self, mode: Option<Mode>) -> PathBuf {
        self.path(&self.manifest.paths.reports).join(format!("generated_{}.txt", model_name(mode)))
    }

    fn run<T>(&self, stage: Stage, body: impl FnOnce() -> Result<T>) -> Result<T, StageError> {
        let out = body().map_err(|source| StageError { stage, source })?;
        info!("{} done (manifest {})", stage.name(), self.hash);
        Ok(out)
    }

    fn write_stamped(&self, path: &Path, stage: Stage, write: impl FnOnce(&Path) -> Result<()>) -> Result<()> {
        ensure_parent(path)?;
        write(path)?;
        stamp(path, stage.name(), &self.hash)
    }

    fn require(&self, path: &Path, what: &str) -> Result<()> {
        require(path, what, &self.hash)
    }

    /// Writes the synthetic corpus split into training and held-out files,
    /// plus the planted ground-truth lexicon.
    pub fn synth(&self) -> Result<(), StageError> {
        self.run(Stage::Synth, || {
            let m = &self.manifest;
            let styles = StyleSet::new(m.styles.iter().cloned())?;
            let mut spec = m.synthetic.clone();
            spec.seed = self.seed("synth");
            let (mut pairs, truth) = generate_synthetic_corpus(&spec, &styles)?;
            for (name, n) in style_counts(&pairs, &styles) {
                info!("synth: {n} pairs of style {name}");
            }
            pairs.shuffle(&mut ChaCha8Rng::seed_from_u64(self.seed("split")));
            let n_held = ((pairs.len() as f64) * m.heldout_fraction).round().max(1.0) as usize;
            let train = pairs.split_off(n_held.min(pairs.len() - 1));
            let held = pairs;

            let p = &m.paths;
            self.write_stamped(&self.path(&p.styles), Stage::Synth, |f| Ok(save_style_set(&styles, f)?))?;
            self.write_stamped(&self.path(&p.train), Stage::Synth, |f| Ok(save_corpus(&train, f)?))?;
            self.write_stamped(&self.path(&p.heldout), Stage::Synth, |f| Ok(save_corpus(&held, f)?))?;
            self.write_stamped(&self.path(&p.ground_truth), Stage::Synth, |f| {
                std::fs::write(f, truth.to_tsv(&styles)).with_context(|| format!("writing {}", f.display()))
            })?;
            info!("synth: {} training and {} held-out pairs", train.len(), held.len());
            Ok(())
        })
    }

    fn load_styles(&self) -> Result<StyleSet> {
        let path = self.path(&self.manifest.paths.styles);
        self.require(&path, "style set")?;
        Ok(load_style_set(&path)?)
    }

    fn load_pairs(&self, styles: &StyleSet, rel: &Path, what: &str) -> Result<Vec<DialoguePair>> {
        let path = self.path(rel);
        self.require(&path, what)?;
        Ok(load_corpus(&path, styles)?)
    }

    fn load_vocab(&self) -> Result<Vocabulary> {
        let path = self.path(&self.manifest.paths.vocab);
        self.require(&path, "vocabulary")?;
        let text = std::fs::read_to_string(&path)?;
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }

    fn load_common(&self) -> Result<Loaded> {
        let styles = self.load_styles()?;
        let vocab = self.load_vocab()?;
        let train = encode_corpus(&self.load_pairs(&styles, &self.manifest.paths.train, "training corpus")?, &vocab);
        Ok(Loaded { styles, vocab, train })
    }

    fn load_lexicon(&self, l: &Loaded) -> Result<StyleLexicon> {
        let (tsv, thr) = (self.path(&self.manifest.paths.lexicon), self.path(&self.manifest.paths.thresholds));
        self.require(&tsv, "lexicon")?;
        self.require(&thr, "lexicon thresholds")?;
        Ok(StyleLexicon::load(&l.vocab, &l.styles, &tsv, &thr)?)
    }

    fn load_classifier(&self) -> Result<StyleClassifier> {
        let path = self.path(&self.manifest.paths.classifier);
        self.require(&path, "reward classifier")?;
        let text = std::fs::read_to_string(&path)?;
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }

    fn load_model(&self, mode: Option<Mode>, vocab: &Vocabulary) -> Result<Seq2SeqModel> {
        let path = self.checkpoint_path(mode);
        let what = match mode {
            None => "pretrained checkpoint".to_string(),
            Some(m) => format!("{} checkpoint", m.flag()),
        };
        self.require(&path, &what)?;
        let ckpt = Checkpoint::load(&path)?;
        if ckpt.manifest_hash.as_deref() != Some(self.hash.as_str()) {
            bail!("{what} ({}) was written under a different manifest", path.display());
        }
        Ok(ckpt.restore(&vocab.hash())?)
    }

    fn save_model(&self, stage: Stage, mode: Option<Mode>, model: &Seq2SeqModel, l: &Loaded, step: u64, seed: u64, opt: &Adam) -> Result<()> {
        let probe: Vec<_> = l.train.iter().take(PROBE_PAIRS).map(|p| (p.query.clone(), p.response.clone())).collect();
        let mut ckpt = Checkpoint::capture(model, &l.vocab.hash(), step, seed, &probe)?;
        ckpt.manifest_hash = Some(self.hash.clone());
        ckpt.optimizer = Some(opt.clone());
        self.write_stamped(&self.checkpoint_path(mode), stage, |f| Ok(ckpt.save(f)?))
    }

    /// Builds the vocabulary from the training corpus and the PMI lexicon.
    pub fn build_lexicon(&self) -> Result<(), StageError> {
        self.run(Stage::BuildLexicon, || {
            let styles = self.load_styles()?;
            let pairs = self.load_pairs(&styles, &self.manifest.paths.train, "training corpus")?;
            let vocab = Vocabulary::build(&pairs, self.manifest.max_vocab)?;
            let lexicon = StyleLexicon::build(&encode_corpus(&pairs, &vocab), &vocab, &styles)?;
            let p = &self.manifest.paths;
            self.write_stamped(&self.path(&p.vocab), Stage::BuildLexicon, |f| {
                std::fs::write(f, serde_json::to_string_pretty(&vocab)? + "\n")?;
                Ok(())
            })?;
            let (tsv, thr) = (self.path(&p.lexicon), self.path(&p.thresholds));
            ensure_parent(&tsv)?;
            ensure_parent(&thr)?;
            lexicon.save(&vocab, &tsv, &thr)?;
            stamp(&tsv, Stage::BuildLexicon.name(), &self.hash)?;
            stamp(&thr, Stage::BuildLexicon.name(), &self.hash)?;

            let truth = self.path(&p.ground_truth);
            let truth_ids = if truth.exists() { ground_truth_ids(&truth, &vocab, &styles)? } else { BTreeMap::new() };
            for label in styles.labels() {
                let ids = lexicon.stylistic_ids(label.id);
                match truth_ids.get(&label.id) {
                    Some(t) => {
                        let (precision, recall) = recovery(&lexicon, label.id, t);
                        info!(
                            "build-lexicon: {} stylistic tokens for {} (precision {:?}, recall {recall:.3})",
                            ids.len(),
                            label.name,
                            precision
                        );
                    }
                    None => info!("build-lexicon: {} stylistic tokens for {}", ids.len(), label.name),
                }
            }
            Ok(())
        })
    }

    pub fn train_classifier(&self) -> Result<(), StageError> {
        self.run(Stage::TrainClassifier, || {
            let l = self.load_common()?;
            let examples: Vec<_> = l.train.iter().map(|p| (p.response.clone(), p.style)).collect();
            let mut config = self.manifest.classifier.clone();
            config.seed = self.seed("train-classifier");
            let clf = StyleClassifier::train(&examples, &l.styles.names(), l.vocab.len(), &config)?;
            if let Some(acc) = clf.held_out_accuracy() {
                info!("train-classifier: held-out accuracy {acc:.4}");
            }
            self.write_stamped(&self.path(&self.manifest.paths.classifier), Stage::TrainClassifier, |f| {
                std::fs::write(f, serde_json::to_string(&clf)?)?;
                Ok(())
            })
        })
    }

    /// Trains the generator on the MLE objective only.
    pub fn pretrain(&self) -> Result<Vec<f64>, StageError> {
        self.run(Stage::Pretrain, || {
            let l = self.load_common()?;
            let m = &self.manifest;
            let mut model = Seq2SeqModel::new(m.model.config(l.vocab.len()), self.seed("init"))?;
            let mut config = m.training.clone();
            config.seed = self.seed("pretrain");
            let mut opt = Adam::new(config.learning_rate);
            let losses = pretrain(&mut model, &mut opt, &l.train, &config)?;
            for (i, loss) in losses.iter().enumerate() {
                info!("pretrain: epoch {} mean mle {loss:.6}", i + 1);
            }
            self.save_model(Stage::Pretrain, None, &model, &l, opt.steps(), config.seed, &opt)?;
            self.write_stamped(&self.pretrain_log_path(), Stage::Pretrain, |f| {
                let mut csv = String::from("epoch,mle\n");
                for (i, loss) in losses.iter().enumerate() {
                    csv.push_str(&format!("{},{loss}\n", i + 1));
                }
                std::fs::write(f, csv)?;
                Ok(())
            })?;
            Ok(losses)
        })
    }

    /// Continues from the pretrained generator with the hybrid objective.
    pub fn train(&self, mode: Mode) -> Result<Vec<igrl::objectives::EpochLog>, StageError> {
        self.run(Stage::Train, || {
            let l = self.load_common()?;
            let mut model = self.load_model(None, &l.vocab)?;
            let lexicon = self.load_lexicon(&l)?;
            let classifier = self.load_classifier()?;
            let bigrams = BigramTable::build(&l.train)?;
            let mut config = self.manifest.training.clone();
            config.mode = mode;
            config.seed = self.seed(&format!("train:{}", mode.flag()));
            let mut opt = Adam::new(config.learning_rate);
            let ctx = RlContext {
                lexicon: &lexicon,
                classifier: &classifier,
                bigrams: &bigrams,
            };
            let logs = train_rl(&mut model, &mut opt, &l.train, ctx, &config)?;
            for e in &logs {
                info!(
                    "train {}: epoch {} mle {:.6} smo {:.6} rl {:.6} hybrid {:.6} reward {:.6}",
                    mode.flag(),
                    e.epoch,
                    e.mle,
                    e.smo,
                    e.rl,
                    e.hybrid,
                    e.mean_reward
                );
            }
            self.save_model(Stage::Train, Some(mode), &model, &l, opt.steps(), config.seed, &opt)?;
            self.write_stamped(&self.epoch_log_path(mode), Stage::Train, |f| Ok(write_epoch_csv(f, &logs)?))?;
            Ok(logs)
        })
    }

    fn decode_all(&self, model: &Seq2SeqModel, queries: &[Vec<usize>], stage_seed: u64) -> Result<Vec<Vec<usize>>> {
        let k = self.manifest.training.top_k.min(model.config().vocab_size);
        queries
            .iter()
            .enumerate()
            .map(|(i, q)| Ok(model.top_k_sample_decode(q, k, model.config().max_decode_len, stage_seed.wrapping_add(i as u64))?))
            .collect()
    }

    /// Samples one response per query line with top-k decoding.
    pub fn generate(&self, mode: Option<Mode>, queries: &Path) -> Result<PathBuf, StageError> {
        self.run(Stage::Generate, || {
            let vocab = self.load_vocab()?;
            let model = self.load_model(mode, &vocab)?;
            let text = std::fs::read_to_string(queries).with_context(|| format!("reading queries {}", queries.display()))?;
            let encoded: Vec<Vec<usize>> = text
                .lines()
                .map(|line| vocab.encode(&tokenize(line)))
                .collect();
            if let Some(i) = encoded.iter().position(Vec::is_empty) {
                bail!("query on line {} is empty", i + 1);
            }
            let outputs = self.decode_all(&model, &encoded, self.seed(&format!("generate:{}", model_name(mode))))?;
            let out = self.generated_path(mode);
            self.write_stamped(&out, Stage::Generate, |f| {
                std::fs::write(f, render_lines(&vocab, &outputs))?;
                Ok(())
            })?;
            info!("generate: {} responses written to {}", outputs.len(), out.display());
            Ok(out)
        })
    }

    /// Decodes every held-out query and reports the metrics per reference
    /// style and overall, judged against the target style.
    pub fn evaluate(&self, mode: Option<Mode>) -> Result<Evaluation, StageError> {
        self.run(Stage::Evaluate, || {
            let l = self.load_common()?;
            let model = self.load_model(mode, &l.vocab)?;
            let lexicon = self.load_lexicon(&l)?;
            let classifier = self.load_classifier()?;
            let held = encode_corpus(&self.load_pairs(&l.styles, &self.manifest.paths.heldout, "held-out corpus")?, &l.vocab);
            let target = l
                .styles
                .by_name(&self.manifest.training.target_style)?
                .id;

            let queries: Vec<Vec<usize>> = held.iter().map(|p| p.query.clone()).collect();
            let outputs = self.decode_all(&model, &queries, self.seed(&format!("evaluate:{}", model_name(mode))))?;

            let mut reward = 0.0;
            for o in &outputs {
                let surface: Vec<usize> = o.iter().copied().filter(|&t| !Vocabulary::is_reserved(t)).collect();
                if !surface.is_empty() {
                    reward += classifier.score(&surface)?[target];
                }
            }
            let mean_reward = reward / outputs.len() as f64;
            info!("evaluate {}: mean {} reward {mean_reward:.4}", model_name(mode), l.styles.names()[target]);

            let metrics = |idx: &[usize]| -> Result<MetricRow> {
                let outs: Vec<Vec<usize>> = idx.iter().map(|&i| outputs[i].clone()).collect();
                let refs: Vec<Vec<usize>> = idx.iter().map(|&i| held[i].response.clone()).collect();
                let styles: Vec<usize> = idx.iter().map(|&i| held[i].style).collect();
                let pairs: Vec<EncodedPair> = idx.iter().map(|&i| held[i].clone()).collect();
                Ok(MetricRow {
                    distinct_1: distinct_n(&outs, 1).unwrap_or(0.0),
                    distinct_2: distinct_n(&outs, 2).unwrap_or(0.0),
                    a_sar: a_sar(&outs, target, &classifier, &self.manifest.conflicts)?,
                    skeleton_retention: skeleton_retention(&outs, &refs, &styles, &lexicon)?,
                    perplexity: perplexity(&model, &pairs)?,
                    samples: idx.len(),
                })
            };
            let mut per_style = Vec::new();
            for label in l.styles.labels() {
                let idx: Vec<usize> = (0..held.len()).filter(|&i| held[i].style == label.id).collect();
                if !idx.is_empty() {
                    per_style.push((label.name.clone(), metrics(&idx)?));
                }
            }
            let all: Vec<usize> = (0..held.len()).collect();
            let digest = format!(
                "{}:k={}:max_len={}",
                model_name(mode),
                self.manifest.training.top_k,
                model.config().max_decode_len
            );
            let overall = metrics(&all)?;
            let report = EvalReport::new(digest, Some(self.hash.clone()), per_style, overall)?;
            let path = self.report_path(mode);
            ensure_parent(&path)?;
            report.emit(&path)?;
            stamp(&path, Stage::Evaluate.name(), &self.hash)?;
            stamp(&path.with_extension("txt"), Stage::Evaluate.name(), &self.hash)?;
            self.write_stamped(&self.eval_responses_path(mode), Stage::Evaluate, |f| {
                std::fs::write(f, render_lines(&l.vocab, &outputs))?;
                Ok(())
            })?;
            info!("evaluate {}:\n{}", model_name(mode), report.to_table());
            Ok(Evaluation {
                report,
                overall,
                mean_reward,
                responses: outputs,
            })
        })
    }
}

fn render_lines(vocab: &Vocabulary, outputs: &[Vec<usize>]) -> String {
    let mut text = String::new();
    for o in outputs {
        let content: Vec<usize> = o.iter().copied().take_while(|&t| t != EOS).collect();
        let tokens = vocab.decode(&content);
        text.push_str(&igrl::corpus::detokenize(&tokens));
        text.push('\n');
    }
    text
}

/// Planted stylistic token ids per style, from the ground-truth TSV.
fn ground_truth_ids(path: &Path, vocab: &Vocabulary, styles: &StyleSet) -> Result<BTreeMap<usize, Vec<usize>>> {
    let text = std::fs::read_to_string(path)?;
    let mut out: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for line in text.lines().skip(1) {
        let mut f = line.split('\t');
        let (Some(token), Some(style)) = (f.next(), f.next()) else { continue };
        if let (Ok(label), true) = (styles.by_name(style), vocab.contains(token)) {
            out.entry(label.id).or_default().push(vocab.id(token));
        }
    }
    Ok(out)
}

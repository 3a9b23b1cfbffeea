//! The pipeline stages behind each subcommand.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use super::audit::{leakage, parse_rotations, rotations_tsv};
use super::report::{MetricReport, ReportRow, FEATURES};
use super::run_config::{FrozenEncoder, RunConfig};
use super::stage::{
    check_upstream, content_hash, create_dir, file_hash, lineage_mismatch, read_stage, record_stage, write_text,
};
use super::svg::{scatter_plot, Series};
use crate::corpus::{
    avg_response_length, load_dataset, scientific_word_rate, CorpusPlan, Dataset, ItemMeta, Lexicon,
};
use crate::error::{Error, Result};
use crate::finetune::{finetune_item, predictions_qwk, Encoders, ItemRecords, ItemRun, PredictionFile};
use crate::nn::{Checkpoint, ModelParams};
use crate::pretrain::{encode_corpus, pretrain_loop, trajectory_tsv};
use crate::seed::derive_seed;
use crate::tokenizer::{build_vocab, Vocab};

const STREAM_INIT: u64 = 0x1717;

pub const CORPUS_SETS: [&str; 3] = ["domain", "generic", "finetune"];
const VOCAB_KEYS: [&str; 4] = ["vocab.", "prompt.directive", "prompt.context", "prompt.label_names"];
const MODEL_KEYS: [&str; 2] = ["model.", "max_len"];

const HINT_CORPUS: &str = "rerun gen-corpus with this configuration or drop the conflicting gen.* settings";
const HINT_VOCAB: &str = "rerun build-vocab on the current corpus";
const HINT_PRETRAIN: &str = "rerun pretrain with the current vocabulary";

fn use_out_dir(cfg: &RunConfig) -> bool {
    cfg.explicit().contains("out_dir")
}

// ---------------------------------------------------------------- gen-corpus

/// Generates the pre-training corpora and fine-tuning items; returns the output directory.
pub fn cmd_gen_corpus(cfg: &RunConfig) -> Result<PathBuf> {
    let seed: u64 = cfg.get_or("gen.seed", cfg.seed()?)?;
    let cfg = cfg.resolved("gen.seed", seed);
    let plan = CorpusPlan::from_config(cfg.effective())?;
    let bundle = plan.build(seed)?;
    let ft: BTreeSet<String> = bundle.finetune.item_ids().into_iter().collect();
    for ds in [&bundle.domain, &bundle.generic] {
        if let Some(id) = ds.item_ids().into_iter().find(|id| ft.contains(id)) {
            return Err(Error::data(format!("item id {id} is in both the pre-training and fine-tuning sets")));
        }
    }
    let dir = if use_out_dir(&cfg) { cfg.out_dir("corpus")? } else { cfg.corpus_dir()? };
    create_dir(&dir)?;
    let mut manifest = String::from("set\titem_id\tnum_labels\trecords\n");
    for (name, ds) in CORPUS_SETS.iter().zip([&bundle.domain, &bundle.generic, &bundle.finetune]) {
        ds.save(dir.join(format!("{name}.tsv")))?;
        for id in ds.item_ids() {
            let n = ds.records.iter().filter(|r| r.item_id == id).count();
            manifest.push_str(&format!("{name}\t{id}\t{}\t{n}\n", ds.labels_for(&id).unwrap_or(0)));
        }
    }
    write_text(&dir.join("manifest.tsv"), &manifest)?;
    bundle.lexicon.save(dir.join("lexicon.txt"))?;
    bundle.science_lexicon.save(dir.join("science_lexicon.txt"))?;
    record_stage(&dir, "gen-corpus", &cfg, &[])?;
    Ok(dir)
}

// ---------------------------------------------------------------- shared inputs

/// Corpus directory contents needed by later stages.
pub struct CorpusFiles {
    pub dir: PathBuf,
    pub lexicon: Lexicon,
    pub science: Lexicon,
    pub hash: String,
}

impl CorpusFiles {
    pub fn open(cfg: &RunConfig) -> Result<Self> {
        let dir = cfg.corpus_dir()?;
        check_upstream(cfg, &dir, "gen-corpus", &["gen."], HINT_CORPUS)?;
        let lexicon = Lexicon::load(cfg.lexicon_path()?)?;
        let science = Lexicon::load(cfg.science_lexicon_path()?)?;
        let mut bytes = Vec::new();
        for name in CORPUS_SETS {
            let p = dir.join(format!("{name}.tsv"));
            if p.exists() {
                bytes.extend_from_slice(file_hash(&p)?.as_bytes());
            }
        }
        Ok(Self {
            hash: content_hash(&bytes),
            dir,
            lexicon,
            science,
        })
    }

    pub fn path(&self, set: &str) -> PathBuf {
        self.dir.join(format!("{set}.tsv"))
    }

    /// Loads `set` with spelling normalised.
    pub fn load(&self, set: &str) -> Result<Dataset> {
        Ok(load_dataset(self.path(set))?.spelling_corrected(&self.lexicon))
    }
}

/// The vocabulary of a run, checked against the corpus it was built from.
pub struct VocabFile {
    pub vocab: Vocab,
    pub hash: String,
}

impl VocabFile {
    pub fn open(cfg: &RunConfig, corpus: &CorpusFiles) -> Result<Self> {
        let path = cfg.vocab_path()?;
        let dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        check_upstream(cfg, &dir, "build-vocab", &VOCAB_KEYS, HINT_VOCAB)?;
        if let Some(rec) = read_stage(&dir)? {
            if let Some(h) = rec.get_str("input.corpus") {
                if h != corpus.hash {
                    return Err(lineage_mismatch(
                        format!("vocabulary {} was built from a different corpus", path.display()),
                        HINT_VOCAB,
                    ));
                }
            }
        }
        Ok(Self {
            vocab: Vocab::load(&path)?,
            hash: file_hash(&path)?,
        })
    }
}

/// Loads a checkpoint and checks it was trained with `vocab`.
pub fn load_checkpoint(cfg: &RunConfig, path: &Path, vocab: &VocabFile) -> Result<Checkpoint> {
    if !path.exists() {
        return Err(Error::data(format!("checkpoint {} not found", path.display())));
    }
    if let Some(dir) = path.parent() {
        check_upstream(cfg, dir, "pretrain", &MODEL_KEYS, "use the model settings the checkpoint was trained with")?;
    }
    let ck = Checkpoint::load(path)?;
    if let Some(h) = ck.meta.get_str("vocab_hash") {
        if h != vocab.hash {
            return Err(lineage_mismatch(
                format!("checkpoint {} was trained with a different vocabulary", path.display()),
                HINT_PRETRAIN,
            ));
        }
    }
    if ck.config.vocab_size != vocab.vocab.len() {
        return Err(lineage_mismatch(
            format!(
                "checkpoint {} expects {} tokens but the vocabulary has {}",
                path.display(),
                ck.config.vocab_size,
                vocab.vocab.len()
            ),
            HINT_PRETRAIN,
        ));
    }
    Ok(ck)
}

// ---------------------------------------------------------------- build-vocab

/// Builds the subword vocabulary over all corpus text and the prompt words.
pub fn cmd_build_vocab(cfg: &RunConfig) -> Result<PathBuf> {
    let corpus = CorpusFiles::open(cfg)?;
    let mut texts = Vec::new();
    let mut found = false;
    for set in CORPUS_SETS {
        if !corpus.path(set).exists() {
            continue;
        }
        found = true;
        for r in corpus.load(set)?.records {
            texts.push(r.task_text);
            texts.push(r.response_text);
        }
    }
    if !found {
        return Err(Error::data(format!("no corpus files in {}", corpus.dir.display())));
    }
    texts.push(cfg.prompt_text()?);
    let vocab = build_vocab(&texts, cfg.get("vocab.size")?)?;
    let path = if use_out_dir(cfg) { cfg.out_dir("vocab")?.join("vocab.txt") } else { cfg.vocab_path()? };
    let dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
    create_dir(&dir)?;
    vocab.save(&path)?;
    record_stage(&dir, "build-vocab", cfg, &[("corpus", corpus.hash.clone())])?;
    Ok(path)
}

// ---------------------------------------------------------------- pretrain

/// MLM pre-training. `pretrain.variant=baseline` trains on the generic corpus
/// from a fresh initialisation; `adapted` continues the baseline checkpoint on
/// the domain corpus. `pretrain.corpus` and `pretrain.init` (`random` or a
/// checkpoint path) override either choice.
pub fn cmd_pretrain(cfg: &RunConfig) -> Result<PathBuf> {
    let variant = cfg.str("pretrain.variant")?.to_string();
    let (default_set, default_init) = match variant.as_str() {
        "baseline" => ("generic", "random".to_string()),
        "adapted" => ("domain", cfg.baseline_checkpoint()?.display().to_string()),
        other => return Err(Error::config(format!("pretrain.variant must be baseline or adapted, got {other:?}"))),
    };
    let hyper = cfg.pretrain_hyper()?;
    let cfg = cfg.resolved("pretrain.seed", hyper.seed);
    let corpus = CorpusFiles::open(&cfg)?;
    let vocab = VocabFile::open(&cfg, &corpus)?;
    let set = cfg.opt_str("pretrain.corpus").unwrap_or(default_set).to_string();
    if !CORPUS_SETS.contains(&set.as_str()) {
        return Err(Error::config(format!("unknown pretrain.corpus {set:?}")));
    }
    let data = corpus.load(&set)?;
    let init_src = cfg.opt_str("pretrain.init").map(String::from).unwrap_or(default_init);

    let mut init = if init_src == "random" {
        let mc = cfg.model_config(vocab.vocab.len())?;
        let mut p = ModelParams::init(&mc, derive_seed(hyper.seed, STREAM_INIT));
        p.quantize_f32();
        Checkpoint::new(mc, p)
    } else {
        load_checkpoint(&cfg, Path::new(&init_src), &vocab)?
    };
    init.meta = crate::config::KvConfig::new();
    init.meta.set("vocab_hash", &vocab.hash);
    init.meta.set("corpus", &set);

    let out = cfg.out_dir(&format!("pretrain-{variant}"))?;
    create_dir(&out)?;
    init.save(out.join("init.ckpt"))?;
    let pairs = encode_corpus(&data, &vocab.vocab, init.config.max_len);
    let outcome = pretrain_loop(&pairs, init, &hyper, |epoch, ck| ck.save(out.join(format!("epoch_{epoch}.ckpt"))))?;
    outcome.checkpoint.save(out.join("model.ckpt"))?;
    write_text(&out.join("trajectory.tsv"), &trajectory_tsv(&outcome.trajectory))?;
    record_stage(
        &out,
        "pretrain",
        &cfg,
        &[("corpus", corpus.hash.clone()), ("vocab", vocab.hash.clone()), ("init", init_src)],
    )?;
    Ok(out)
}

// ---------------------------------------------------------------- finetune

/// Result of fine-tuning one item, or why it was skipped.
#[derive(Debug, Clone)]
pub struct ItemOutcome {
    pub item_id: String,
    pub num_labels: usize,
    pub n_records: usize,
    pub run: Option<ItemRun>,
    pub qwk: Option<f64>,
    pub warnings: Vec<String>,
}

/// Fine-tunes every selected item, writing `<out>/<item>/predictions.tsv`
/// and `<out>/<item>/rotations.tsv`.
pub fn run_items(cfg: &RunConfig, data: &Dataset, enc: &Encoders<'_>, out: &Path) -> Result<Vec<ItemOutcome>> {
    let hyper = cfg.finetune_hyper()?;
    let pooling = cfg.qwk_pooling()?;
    let selected = cfg.id_list("finetune.items");
    let ids: Vec<String> = if selected.is_empty() { data.item_ids() } else { selected };
    create_dir(out)?;
    let mut outcomes = Vec::with_capacity(ids.len());
    for id in ids {
        let records = data.records_for(&id);
        let k = data
            .labels_for(&id)
            .ok_or_else(|| Error::data(format!("unknown item {id}")))?;
        if records.len() < hyper.folds {
            outcomes.push(ItemOutcome {
                warnings: vec![format!("{id}: skipped, {} records for {} folds", records.len(), hyper.folds)],
                item_id: id,
                num_labels: k,
                n_records: records.len(),
                run: None,
                qwk: None,
            });
            continue;
        }
        let spec = cfg.prompt_spec(k)?;
        let item = ItemRecords {
            item_id: &id,
            num_labels: k,
            records: &records,
        };
        let run = finetune_item(&item, enc, &spec, &hyper)?;
        let dir = out.join(&id);
        create_dir(&dir)?;
        PredictionFile::from(&run).save(dir.join("predictions.tsv"))?;
        write_text(&dir.join("rotations.tsv"), &rotations_tsv(&run))?;
        let leaks = run.leakage();
        if !leaks.is_empty() {
            return Err(Error::data(format!("{id}: test records leaked into training: {}", leaks.join(","))));
        }
        outcomes.push(ItemOutcome {
            qwk: Some(run.qwk(pooling)?),
            warnings: run.warnings(),
            item_id: id,
            num_labels: k,
            n_records: records.len(),
            run: Some(run),
        });
    }
    Ok(outcomes)
}

fn summary_tsv(outcomes: &[ItemOutcome], folds: usize) -> String {
    let mut out = String::from("item_id\tn_train\tn_test\tnum_labels\tqwk\n");
    for o in outcomes {
        let m = ItemMeta::for_folds(&o.item_id, o.num_labels, o.n_records, folds);
        let q = o.qwk.map_or("NA".to_string(), |q| q.to_string());
        out.push_str(&format!("{}\t{}\t{}\t{}\t{q}\n", o.item_id, m.n_train, m.n_test, o.num_labels));
    }
    let warnings: Vec<&String> = outcomes.iter().flat_map(|o| &o.warnings).collect();
    if !warnings.is_empty() {
        out.push_str("# warnings\n");
        for w in warnings {
            out.push_str(&format!("warning\t{w}\n"));
        }
    }
    out
}

/// Fine-tunes from `checkpoint` (default: the adapted checkpoint).
pub fn cmd_finetune(cfg: &RunConfig) -> Result<Vec<ItemOutcome>> {
    let corpus = CorpusFiles::open(cfg)?;
    let vocab = VocabFile::open(cfg, &corpus)?;
    let data = corpus.load("finetune")?;
    let base_path = cfg.path_or_work("checkpoint", "pretrain-adapted/model.ckpt")?;
    let base = load_checkpoint(cfg, &base_path, &vocab)?;
    let adapted_path = cfg.adapted_checkpoint()?;
    let frozen_store;
    let frozen = match cfg.frozen_encoder()? {
        FrozenEncoder::Adapted if adapted_path != base_path => {
            frozen_store = load_checkpoint(cfg, &adapted_path, &vocab)?;
            &frozen_store
        }
        _ => &base,
    };
    let enc = Encoders {
        base: &base,
        frozen,
        vocab: &vocab.vocab,
    };
    let out = cfg.out_dir("finetune")?;
    let outcomes = run_items(cfg, &data, &enc, &out)?;
    write_text(&out.join("summary.tsv"), &summary_tsv(&outcomes, cfg.folds()?))?;
    record_stage(
        &out,
        "finetune",
        cfg,
        &[("corpus", corpus.hash.clone()), ("vocab", vocab.hash.clone()), ("checkpoint", file_hash(&base_path)?)],
    )?;
    Ok(outcomes)
}

// ---------------------------------------------------------------- evaluate

#[derive(Debug, Clone, PartialEq)]
pub struct EvalRow {
    /// Predictions file relative to the evaluated path.
    pub source: String,
    pub item_id: String,
    pub num_labels: usize,
    pub n: usize,
    pub qwk: f64,
    /// Leaked record count, `None` without a rotations file.
    pub leakage: Option<usize>,
}

fn find_prediction_files(root: &Path, out: &mut Vec<PathBuf>) -> Result<()> {
    let mut entries: Vec<PathBuf> = std::fs::read_dir(root)
        .map_err(|e| Error::io(root, e))?
        .map(|e| e.map(|e| e.path()).map_err(|err| Error::io(root, err)))
        .collect::<Result<_>>()?;
    entries.sort();
    for p in entries {
        if p.is_dir() {
            find_prediction_files(&p, out)?;
        } else if p.file_name().is_some_and(|n| n == "predictions.tsv") {
            out.push(p);
        }
    }
    Ok(())
}

/// Recomputes agreement (and the leakage audit where membership files exist)
/// from predictions files alone.
pub fn cmd_evaluate(cfg: &RunConfig) -> Result<Vec<EvalRow>> {
    let input = cfg.path_or_work("predictions", "finetune")?;
    let pooling = cfg.qwk_pooling()?;
    let mut files = Vec::new();
    if input.is_dir() {
        find_prediction_files(&input, &mut files)?;
    } else {
        files.push(input.clone());
    }
    if files.is_empty() {
        return Err(Error::data(format!("no predictions files under {}", input.display())));
    }
    let mut rows = Vec::new();
    let mut digest = Vec::new();
    for f in &files {
        let pf = PredictionFile::load(f)?;
        digest.extend_from_slice(file_hash(f)?.as_bytes());
        let rot_path = f.with_file_name("rotations.tsv");
        let leakage_count = if rot_path.exists() {
            let text = std::fs::read_to_string(&rot_path).map_err(|e| Error::io(&rot_path, e))?;
            Some(leakage(&parse_rotations(&text)?).len())
        } else {
            None
        };
        let source = f.strip_prefix(&input).unwrap_or(f).display().to_string();
        rows.push(EvalRow {
            source: if source.is_empty() { f.display().to_string() } else { source },
            qwk: predictions_qwk(&pf.predictions, pf.num_labels, pooling)?,
            n: pf.predictions.len(),
            item_id: pf.item_id,
            num_labels: pf.num_labels,
            leakage: leakage_count,
        });
    }
    let out = cfg.out_dir("evaluate")?;
    create_dir(&out)?;
    let mut text = String::from("source\titem_id\tnum_labels\tn\tqwk\tleakage\n");
    for r in &rows {
        let leak = r.leakage.map_or("NA".to_string(), |l| l.to_string());
        text.push_str(&format!("{}\t{}\t{}\t{}\t{}\t{leak}\n", r.source, r.item_id, r.num_labels, r.n, r.qwk));
    }
    write_text(&out.join("evaluation.tsv"), &text)?;
    record_stage(&out, "evaluate", cfg, &[("predictions", content_hash(&digest))])?;
    Ok(rows)
}

// ---------------------------------------------------------------- compare

/// Fine-tunes every item from both starting checkpoints with identical folds
/// and seeds, then writes `report.tsv`, `length.svg` and `science.svg`.
pub fn cmd_compare(cfg: &RunConfig) -> Result<MetricReport> {
    let corpus = CorpusFiles::open(cfg)?;
    let vocab = VocabFile::open(cfg, &corpus)?;
    let data = corpus.load("finetune")?;
    let baseline_path = cfg.baseline_checkpoint()?;
    let adapted_path = cfg.adapted_checkpoint()?;
    let baseline = load_checkpoint(cfg, &baseline_path, &vocab)?;
    let adapted = load_checkpoint(cfg, &adapted_path, &vocab)?;
    let own = cfg.frozen_encoder()? == FrozenEncoder::Base;
    let out = cfg.out_dir("compare")?;
    create_dir(&out)?;

    let enc_b = Encoders {
        base: &baseline,
        frozen: if own { &baseline } else { &adapted },
        vocab: &vocab.vocab,
    };
    let enc_a = Encoders {
        base: &adapted,
        frozen: &adapted,
        vocab: &vocab.vocab,
    };
    let runs_b = run_items(cfg, &data, &enc_b, &out.join("baseline"))?;
    let runs_a = run_items(cfg, &data, &enc_a, &out.join("adapted"))?;
    let folds = cfg.folds()?;

    let mut rows = Vec::with_capacity(runs_b.len());
    let mut warnings = Vec::new();
    for (b, a) in runs_b.iter().zip(&runs_a) {
        let records = data.records_for(&b.item_id);
        let texts: Vec<&str> = records.iter().map(|r| r.response_text.as_str()).collect();
        let m = ItemMeta::for_folds(&b.item_id, b.num_labels, b.n_records, folds);
        rows.push(ReportRow {
            item_id: b.item_id.clone(),
            n_train: m.n_train,
            n_test: m.n_test,
            num_labels: b.num_labels,
            qwk_baseline: b.qwk,
            qwk_adapted: a.qwk,
            avg_response_length: avg_response_length(&texts)?,
            scientific_word_rate: scientific_word_rate(&texts, &corpus.science)?,
        });
        warnings.extend(b.warnings.iter().map(|w| format!("baseline {w}")));
        warnings.extend(a.warnings.iter().map(|w| format!("adapted {w}")));
    }
    let report = MetricReport::from_rows(rows, warnings);
    write_text(&out.join("report.tsv"), &report.to_tsv())?;
    for (feature, file, title) in [
        (FEATURES[0], "length.svg", "Effect of item-wise response length"),
        (FEATURES[1], "science.svg", "Effect of scientific word rate"),
    ] {
        write_text(&out.join(file), &plot_for(&report, feature, title))?;
    }
    record_stage(
        &out,
        "compare",
        cfg,
        &[
            ("corpus", corpus.hash.clone()),
            ("vocab", vocab.hash.clone()),
            ("baseline", file_hash(&baseline_path)?),
            ("adapted", file_hash(&adapted_path)?),
        ],
    )?;
    Ok(report)
}

/// Scatter of both models' QWK against `feature` with their trend lines.
pub fn plot_for(report: &MetricReport, feature: &str, title: &str) -> String {
    let series: Vec<Series<'_>> = [("baseline", "#c0392b"), ("adapted", "#2471a3")]
        .into_iter()
        .map(|(model, color)| Series {
            name: model,
            color,
            points: report
                .rows
                .iter()
                .filter(|r| r.qwk_baseline.is_some() && r.qwk_adapted.is_some())
                .filter_map(|r| r.qwk(model).map(|q| (r.item_id.as_str(), r.feature(feature), q)))
                .collect(),
            fit: report.regression(model, feature).copied(),
        })
        .collect();
    scatter_plot(title, feature, &series)
}

//! Sense decoding, probability reporting, official-style F-measure
//! scoring, and the ablation runner.

use std::collections::HashMap;
use std::path::Path;

use rayon::prelude::*;

use crate::corpus::{self, DisambiguationInstance};
use crate::embeddings::{self, SenseInventory};
use crate::error::{Error, Result};
use crate::model::{self, ArchMode, ArchVariant, NetworkParams};
use crate::numkit::softmax;
use crate::train::{self, window_for, EpochRecord, HyperParams};

/// Scores for every candidate sense of one instance, the softmax view
/// of them, and the argmax choice (ties resolve to the lowest
/// candidate index).
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub instance_id: String,
    pub lexelt: String,
    pub sense_labels: Vec<String>,
    pub scores: Vec<f64>,
    pub probabilities: Vec<f64>,
    pub chosen: usize,
}

impl Prediction {
    pub fn chosen_label(&self) -> &str {
        &self.sense_labels[self.chosen]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Counts {
    pub attempted: usize,
    pub total: usize,
    pub correct: usize,
}

impl Counts {
    pub fn precision(&self) -> f64 {
        if self.attempted == 0 {
            0.0
        } else {
            self.correct as f64 / self.attempted as f64
        }
    }

    pub fn recall(&self) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            self.correct as f64 / self.total as f64
        }
    }

    pub fn f_measure(&self) -> f64 {
        let p = self.precision();
        let r = self.recall();
        if p + r == 0.0 {
            0.0
        } else {
            2.0 * p * r / (p + r)
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoreReport {
    pub overall: Counts,
    pub per_lexelt: Vec<(String, Counts)>,
    pub per_pos: Vec<(String, Counts)>,
}

/// Score every candidate sense of the instance's lexelt on the same
/// window and pick the argmax.
pub fn disambiguate(params: &NetworkParams, inst: &DisambiguationInstance, seed: u64) -> Result<Prediction> {
    let lex = params
        .inventory
        .lexelt(&inst.lexelt)
        .ok_or_else(|| Error::Config(format!("lexelt {} not in inventory", inst.lexelt)))?;
    let window = window_for(params, inst, seed);
    let mut scores = Vec::with_capacity(lex.global_ids.len());
    for &gid in &lex.global_ids {
        scores.push(model::score_sense(params, gid, &window)?);
    }
    let probabilities = softmax(&scores)?;
    let mut chosen = 0usize;
    for (k, &s) in scores.iter().enumerate() {
        if s > scores[chosen] {
            chosen = k;
        }
    }
    Ok(Prediction {
        instance_id: inst.id.clone(),
        lexelt: inst.lexelt.clone(),
        sense_labels: lex.senses.clone(),
        scores,
        probabilities,
        chosen,
    })
}

/// Disambiguate a whole test set in parallel; output ordered by
/// instance id for determinism.
pub fn disambiguate_all(
    params: &NetworkParams,
    instances: &[DisambiguationInstance],
    seed: u64,
) -> Result<Vec<Prediction>> {
    let mut preds: Vec<Prediction> = instances
        .par_iter()
        .map(|inst| disambiguate(params, inst, seed))
        .collect::<Result<Vec<_>>>()?;
    preds.sort_by(|a, b| a.instance_id.cmp(&b.instance_id));
    Ok(preds)
}

fn lexelt_pos(name: &str) -> String {
    name.rsplit('.').next().unwrap_or("").to_string()
}

/// Official-style scoring: a prediction is correct iff its chosen
/// sense is in the gold set. Every prediction must appear in the key.
pub fn score_answers(
    predictions: &[Prediction],
    gold_key: &HashMap<String, (String, Vec<String>)>,
) -> Result<ScoreReport> {
    let missing: Vec<&str> = predictions
        .iter()
        .filter(|p| !gold_key.contains_key(&p.instance_id))
        .map(|p| p.instance_id.as_str())
        .collect();
    if !missing.is_empty() {
        return Err(Error::Key(format!(
            "no gold entry for instance(s): {}",
            missing.join(", ")
        )));
    }

    let mut overall = Counts::default();
    let mut per_lexelt: Vec<(String, Counts)> = Vec::new();
    let mut per_pos: Vec<(String, Counts)> = Vec::new();

    let bump = |rows: &mut Vec<(String, Counts)>, name: &str| -> usize {
        match rows.iter().position(|(n, _)| n == name) {
            Some(i) => i,
            None => {
                rows.push((name.to_string(), Counts::default()));
                rows.len() - 1
            }
        }
    };

    for (lexelt, _) in gold_key.values() {
        overall.total += 1;
        let li = bump(&mut per_lexelt, lexelt);
        per_lexelt[li].1.total += 1;
        let pi = bump(&mut per_pos, &lexelt_pos(lexelt));
        per_pos[pi].1.total += 1;
    }
    for p in predictions {
        let (lexelt, gold) = &gold_key[&p.instance_id];
        let correct = gold.iter().any(|g| g == p.chosen_label());
        overall.attempted += 1;
        if correct {
            overall.correct += 1;
        }
        let li = bump(&mut per_lexelt, lexelt);
        per_lexelt[li].1.attempted += 1;
        if correct {
            per_lexelt[li].1.correct += 1;
        }
        let pi = bump(&mut per_pos, &lexelt_pos(lexelt));
        per_pos[pi].1.attempted += 1;
        if correct {
            per_pos[pi].1.correct += 1;
        }
    }
    per_lexelt.sort_by(|a, b| a.0.cmp(&b.0));
    per_pos.sort_by(|a, b| a.0.cmp(&b.0));
    Ok(ScoreReport { overall, per_lexelt, per_pos })
}

/// The Table-4 single-change variants.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Ablation {
    Standard,
    ReversedDirections,
    ShuffledContext,
    FcInsteadOfBlstm,
    /// Random word embeddings instead of pre-trained vectors.
    NoGlove,
    NoWordDropout,
    /// Context size 25 left, 25 right.
    Context25,
}

impl std::str::FromStr for Ablation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "standard" => Ablation::Standard,
            "reversed" => Ablation::ReversedDirections,
            "shuffled" => Ablation::ShuffledContext,
            "fc" => Ablation::FcInsteadOfBlstm,
            "no-glove" => Ablation::NoGlove,
            "no-word-dropout" => Ablation::NoWordDropout,
            "context-25" => Ablation::Context25,
            other => {
                return Err(Error::Config(format!(
                    "unknown ablation variant {other:?} \
                     (expected standard, reversed, shuffled, fc, no-glove, no-word-dropout, context-25)"
                )))
            }
        })
    }
}

/// Hyperparameters, architecture mode, and embedding source implied by
/// one ablation.
pub fn ablation_settings(ab: Ablation, base: &HyperParams) -> (HyperParams, ArchMode, bool) {
    let mut hp = base.clone();
    let mut mode = ArchMode::Standard;
    let mut use_glove = true;
    match ab {
        Ablation::Standard => {}
        Ablation::ReversedDirections => mode = ArchMode::ReversedDirections,
        Ablation::ShuffledContext => mode = ArchMode::ShuffledContext,
        Ablation::FcInsteadOfBlstm => mode = ArchMode::FcInsteadOfBlstm,
        Ablation::NoGlove => use_glove = false,
        Ablation::NoWordDropout => hp.word_dropout = 0.0,
        Ablation::Context25 => {
            hp.context_left = 25;
            hp.context_right = 25;
        }
    }
    (hp, mode, use_glove)
}

pub struct RunData<'a> {
    /// Preprocessed training instances with gold labels.
    pub train_instances: &'a [DisambiguationInstance],
    pub inventory: &'a SenseInventory,
    /// Preprocessed test instances (gold may be empty; scoring uses
    /// the key).
    pub test_instances: &'a [DisambiguationInstance],
    pub gold_key: &'a HashMap<String, (String, Vec<String>)>,
    pub glove_path: Option<&'a Path>,
}

pub struct RunOutcome {
    pub report: ScoreReport,
    pub params: NetworkParams,
    pub log: Vec<EpochRecord>,
    pub predictions: Vec<Prediction>,
}

/// Corpus-to-model training: vocabulary, embedding tables, network
/// init, validation split, and the training loop.
pub fn train_network(
    instances: &[DisambiguationInstance],
    inventory: &SenseInventory,
    glove_path: Option<&Path>,
    hp: &HyperParams,
    mode: ArchMode,
    use_glove: bool,
) -> Result<(NetworkParams, Vec<EpochRecord>)> {
    hp.validate()?;
    let mut rng = crate::numkit::SeededRng::new(hp.seed);

    let vocab = corpus::build_vocab(instances);
    let word_table = if use_glove {
        let path = glove_path.ok_or_else(|| {
            Error::Config("this variant needs a GloVe vector file but none was given".into())
        })?;
        embeddings::load_glove(path, &vocab, hp.embedding_size, &mut rng)?
    } else {
        embeddings::init_random_word_table(&vocab, hp.embedding_size, &mut rng)
    };
    let sense_table = embeddings::init_sense_table(inventory, hp.embedding_size, &mut rng)?;
    let variant = ArchVariant {
        mode,
        left_len: hp.context_left,
        right_len: hp.context_right,
    };
    let mut params = model::init_network(
        vocab,
        inventory.clone(),
        word_table,
        sense_table,
        hp.hidden,
        variant,
        &mut rng,
    );

    let (train_split, val_split) = corpus::split_validation(instances, hp.val_fraction, &mut rng)?;
    let log = train::train(&mut params, &train_split, &val_split, hp, &mut rng)?;
    Ok((params, log))
}

/// Build, train, and evaluate a network for one variant. Every
/// ablation retrains from scratch with the shared seed.
pub fn run_ablation(ab: Ablation, data: &RunData, base_hp: &HyperParams) -> Result<RunOutcome> {
    let (hp, mode, use_glove) = ablation_settings(ab, base_hp);
    let (params, log) = train_network(
        data.train_instances,
        data.inventory,
        data.glove_path,
        &hp,
        mode,
        use_glove,
    )?;
    let predictions = disambiguate_all(&params, data.test_instances, hp.seed)?;
    let report = score_answers(&predictions, data.gold_key)?;
    Ok(RunOutcome { report, params, log, predictions })
}

fn fmt_counts(name: &str, c: &Counts) -> String {
    format!(
        "{:<16} {:>9} {:>7} {:>7}  {:>9.4} {:>7.4} {:>7.4}\n",
        name,
        c.attempted,
        c.total,
        c.correct,
        c.precision(),
        c.recall(),
        c.f_measure()
    )
}

fn csv_counts(name: &str, c: &Counts) -> String {
    format!(
        "{},{},{},{},{:.6},{:.6},{:.6}\n",
        name,
        c.attempted,
        c.total,
        c.correct,
        c.precision(),
        c.recall(),
        c.f_measure()
    )
}

/// Write the human-readable table, the machine-readable CSV rows, and
/// the SensEval-style answer lines into `dir`.
pub fn emit_report(report: &ScoreReport, predictions: &[Prediction], dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;

    let mut human = String::new();
    human.push_str(&format!(
        "{:<16} {:>9} {:>7} {:>7}  {:>9} {:>7} {:>7}\n",
        "scope", "attempted", "total", "correct", "precision", "recall", "f"
    ));
    human.push_str(&fmt_counts("ALL", &report.overall));
    for (pos, c) in &report.per_pos {
        human.push_str(&fmt_counts(&format!("pos:{pos}"), c));
    }
    for (lex, c) in &report.per_lexelt {
        human.push_str(&fmt_counts(lex, c));
    }
    std::fs::write(dir.join("report.txt"), human)?;

    let mut csv = String::from("scope,attempted,total,correct,precision,recall,f\n");
    csv.push_str(&csv_counts("ALL", &report.overall));
    for (pos, c) in &report.per_pos {
        csv.push_str(&csv_counts(&format!("pos:{pos}"), c));
    }
    for (lex, c) in &report.per_lexelt {
        csv.push_str(&csv_counts(lex, c));
    }
    std::fs::write(dir.join("report.csv"), csv)?;

    let mut answers = String::new();
    for p in predictions {
        answers.push_str(&format!("{} {} {}\n", p.lexelt, p.instance_id, p.chosen_label()));
    }
    std::fs::write(dir.join("answers.key"), answers)?;
    Ok(())
}

/// Parse an `answers.key` file back into (lexelt, instance, sense)
/// triples (round-trip checks).
pub fn load_answers(path: &Path) -> Result<Vec<(String, String, String)>> {
    let text = std::fs::read_to_string(path)?;
    let mut out = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let parts: Vec<&str> = line.split_whitespace().collect();
        if parts.len() != 3 {
            return Err(Error::Parse {
                line: lineno + 1,
                msg: "answer line must be `lexelt instance-id sense-id`".into(),
            });
        }
        out.push((parts[0].into(), parts[1].into(), parts[2].into()));
    }
    Ok(out)
}

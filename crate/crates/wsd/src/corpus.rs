//! SensEval-3 lexical-sample ingestion: markup parsing, preprocessing,
//! vocabulary construction, and fixed-size context windows.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use crate::embeddings::{SenseInventory, Vocabulary, PAD_ID};
use crate::error::{Error, Result};
use crate::numkit::SeededRng;

/// One labeled occurrence of an ambiguous word.
#[derive(Debug, Clone, PartialEq)]
pub struct DisambiguationInstance {
    pub id: String,
    pub lexelt: String,
    /// Gold sense labels; empty for unlabeled (test) instances.
    pub gold: Vec<String>,
    pub left_tokens: Vec<String>,
    pub right_tokens: Vec<String>,
    /// The target occurrence itself (head element text).
    pub target_tokens: Vec<String>,
}

/// Fixed-length left/right token-id sequences around the target.
/// `left_ids[0]` is the farthest left position, `left_ids[L-1]` is
/// adjacent to the target; `right_ids[0]` is adjacent, `right_ids[R-1]`
/// farthest right. Padding occupies the outermost slots only.
#[derive(Debug, Clone, PartialEq)]
pub struct ContextWindow {
    pub left_ids: Vec<usize>,
    pub right_ids: Vec<usize>,
}

/// Per-POS candidate-sense statistics of an inventory.
#[derive(Debug, Clone, PartialEq)]
pub struct InventoryStats {
    /// (pos tag, word count, mean candidate senses)
    pub per_pos: Vec<(String, usize, f64)>,
    pub total_words: usize,
    pub mean_senses: f64,
}

/// Result of parsing a lexical-sample file. Instances missing target
/// markup are rejected and reported in `diagnostics`.
#[derive(Debug, Clone)]
pub struct ParseOutput {
    pub inventory: SenseInventory,
    pub instances: Vec<DisambiguationInstance>,
    pub diagnostics: Vec<String>,
}

fn decode_entities(s: &str) -> String {
    s.replace("&amp;", "&")
        .replace("&lt;", "<")
        .replace("&gt;", ">")
        .replace("&quot;", "\"")
        .replace("&apos;", "'")
}

fn encode_entities(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Pull `attr="value"` out of a tag body.
fn attr_value(tag: &str, attr: &str) -> Option<String> {
    let needle = format!("{attr}=\"");
    let start = tag.find(&needle)? + needle.len();
    let rest = &tag[start..];
    let end = rest.find('"')?;
    Some(decode_entities(&rest[..end]))
}

/// Whitespace tokenization with edge punctuation stripped; internal
/// hyphens and apostrophes survive.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split_whitespace()
        .filter_map(|raw| {
            let t = raw.trim_matches(|c: char| !c.is_alphanumeric());
            if t.is_empty() {
                None
            } else {
                Some(t.to_string())
            }
        })
        .collect()
}

/// Lowercase everything and drop digit-only tokens (numeric separators
/// `.` and `,` stripped before the digit test). Mixed alphanumerics
/// like "2nd" are kept.
pub fn preprocess(tokens: &[String]) -> Vec<String> {
    tokens
        .iter()
        .filter_map(|t| {
            let stripped: String = t.chars().filter(|&c| c != '.' && c != ',').collect();
            if !stripped.is_empty() && stripped.chars().all(|c| c.is_ascii_digit()) {
                None
            } else {
                Some(t.to_lowercase())
            }
        })
        .collect()
}

/// Parse a SensEval-3 lexical-sample markup file. The inventory is
/// built from the answer records present in the file (training data);
/// for test data it will hold lexelts with empty candidate lists.
pub fn parse_lexical_sample(path: &Path) -> Result<ParseOutput> {
    let text = fs::read_to_string(path)?;
    parse_lexical_sample_str(&text)
}

pub fn parse_lexical_sample_str(text: &str) -> Result<ParseOutput> {
    let mut inventory = SenseInventory::new();
    let mut instances = Vec::new();
    let mut diagnostics = Vec::new();

    let mut cur_lexelt: Option<String> = None;
    let mut cur_instance: Option<String> = None;
    let mut cur_answers: Vec<String> = Vec::new();
    let mut in_context = false;
    let mut in_head = false;
    let mut left_text = String::new();
    let mut head_text = String::new();
    let mut right_text = String::new();
    let mut saw_head = false;

    let mut rest = text;
    let mut line = 1usize;
    while !rest.is_empty() {
        if let Some(lt) = rest.find('<') {
            let (chunk, after) = rest.split_at(lt);
            line += chunk.matches('\n').count();
            if in_context {
                let target = if in_head {
                    &mut head_text
                } else if saw_head {
                    &mut right_text
                } else {
                    &mut left_text
                };
                target.push_str(&decode_entities(chunk));
                target.push(' ');
            }
            let gt = after.find('>').ok_or(Error::Parse {
                line,
                msg: "unterminated tag".into(),
            })?;
            let tag = &after[1..gt];
            line += tag.matches('\n').count();
            rest = &after[gt + 1..];

            let tag_trim = tag.trim().trim_end_matches('/').trim();
            let (closing, name_attrs) = if let Some(stripped) = tag_trim.strip_prefix('/') {
                (true, stripped.trim())
            } else {
                (false, tag_trim)
            };
            let name = name_attrs
                .split_whitespace()
                .next()
                .unwrap_or("")
                .to_ascii_lowercase();

            match (closing, name.as_str()) {
                (false, "lexelt") => {
                    cur_lexelt = attr_value(name_attrs, "item");
                    if cur_lexelt.is_none() {
                        return Err(Error::Parse {
                            line,
                            msg: "lexelt element without item attribute".into(),
                        });
                    }
                }
                (true, "lexelt") => cur_lexelt = None,
                (false, "instance") => {
                    cur_instance = attr_value(name_attrs, "id");
                    cur_answers.clear();
                    left_text.clear();
                    head_text.clear();
                    right_text.clear();
                    saw_head = false;
                    if cur_instance.is_none() {
                        return Err(Error::Parse {
                            line,
                            msg: "instance element without id attribute".into(),
                        });
                    }
                }
                (true, "instance") => {
                    let id = cur_instance.take().unwrap_or_default();
                    let lexelt = match &cur_lexelt {
                        Some(l) => l.clone(),
                        None => {
                            return Err(Error::Parse {
                                line,
                                msg: format!("instance {id} outside a lexelt element"),
                            })
                        }
                    };
                    if !saw_head {
                        diagnostics.push(format!(
                            "instance {id}: no target (head) markup, rejected"
                        ));
                        continue;
                    }
                    for sense in &cur_answers {
                        inventory.add_sense(&lexelt, sense);
                    }
                    instances.push(DisambiguationInstance {
                        id,
                        lexelt,
                        gold: cur_answers.clone(),
                        left_tokens: tokenize(&left_text),
                        right_tokens: tokenize(&right_text),
                        target_tokens: tokenize(&head_text),
                    });
                }
                (false, "answer") => {
                    if let Some(sense) = attr_value(name_attrs, "senseid") {
                        cur_answers.push(sense);
                    }
                }
                (false, "context") => {
                    in_context = true;
                }
                (true, "context") => {
                    in_context = false;
                    in_head = false;
                }
                (false, "head") => {
                    in_head = true;
                    saw_head = true;
                }
                (true, "head") => in_head = false,
                // corpus wrapper, sat elements and anything else: keep text, ignore tag
                _ => {}
            }
        } else {
            if in_context {
                // trailing text without a tag; should not happen in well-formed files
                left_text.push_str(&decode_entities(rest));
            }
            break;
        }
    }

    Ok(ParseOutput { inventory, instances, diagnostics })
}

/// Canonical markup serialization of instances (round-trip support and
/// fixture generation).
pub fn write_lexical_sample(path: &Path, instances: &[DisambiguationInstance]) -> Result<()> {
    use std::io::Write;
    let mut by_lexelt: Vec<(String, Vec<&DisambiguationInstance>)> = Vec::new();
    for inst in instances {
        match by_lexelt.iter_mut().find(|(l, _)| *l == inst.lexelt) {
            Some((_, v)) => v.push(inst),
            None => by_lexelt.push((inst.lexelt.clone(), vec![inst])),
        }
    }
    let mut f = std::io::BufWriter::new(fs::File::create(path)?);
    writeln!(f, "<corpus lang=\"english\">")?;
    for (lexelt, insts) in &by_lexelt {
        writeln!(f, "<lexelt item=\"{}\">", encode_entities(lexelt))?;
        for inst in insts {
            writeln!(f, "<instance id=\"{}\">", encode_entities(&inst.id))?;
            for g in &inst.gold {
                writeln!(
                    f,
                    "<answer instance=\"{}\" senseid=\"{}\"/>",
                    encode_entities(&inst.id),
                    encode_entities(g)
                )?;
            }
            writeln!(f, "<context>")?;
            writeln!(
                f,
                "{} <head>{}</head> {}",
                encode_entities(&inst.left_tokens.join(" ")),
                encode_entities(&inst.target_tokens.join(" ")),
                encode_entities(&inst.right_tokens.join(" "))
            )?;
            writeln!(f, "</context>")?;
            writeln!(f, "</instance>")?;
        }
        writeln!(f, "</lexelt>")?;
    }
    writeln!(f, "</corpus>")?;
    Ok(())
}

/// Answer key lines: `lexelt instance-id sense-id [sense-id...]`.
pub fn load_answer_key(path: &Path) -> Result<HashMap<String, (String, Vec<String>)>> {
    let text = fs::read_to_string(path)?;
    let mut key = HashMap::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let mut parts = line.split_whitespace();
        let lexelt = parts.next();
        let id = parts.next();
        let senses: Vec<String> = parts.map(|s| s.to_string()).collect();
        match (lexelt, id) {
            (Some(l), Some(i)) if !senses.is_empty() => {
                key.insert(i.to_string(), (l.to_string(), senses));
            }
            _ => {
                return Err(Error::Parse {
                    line: lineno + 1,
                    msg: "answer key line needs lexelt, instance-id and >= 1 sense".into(),
                })
            }
        }
    }
    Ok(key)
}

/// Attach gold labels from an answer key to parsed instances. Lexelts
/// in the key must exist in the inventory.
pub fn attach_gold(
    instances: &mut [DisambiguationInstance],
    key: &HashMap<String, (String, Vec<String>)>,
    inventory: &SenseInventory,
) -> Result<()> {
    for (lexelt, _) in key.values() {
        if inventory.lexelt(lexelt).is_none() {
            return Err(Error::Key(format!(
                "answer key references unknown lexelt {lexelt}"
            )));
        }
    }
    for inst in instances.iter_mut() {
        if let Some((_, senses)) = key.get(&inst.id) {
            inst.gold = senses.clone();
        }
    }
    Ok(())
}

/// Apply `preprocess` to both context sides of every instance.
pub fn preprocess_instances(instances: &mut [DisambiguationInstance]) {
    for inst in instances.iter_mut() {
        inst.left_tokens = preprocess(&inst.left_tokens);
        inst.right_tokens = preprocess(&inst.right_tokens);
    }
}

/// Vocabulary over all distinct context tokens of the training set,
/// plus the reserved PAD/UNK slot.
pub fn build_vocab(instances: &[DisambiguationInstance]) -> Vocabulary {
    let mut vocab = Vocabulary::new();
    for inst in instances {
        for t in inst.left_tokens.iter().chain(inst.right_tokens.iter()) {
            vocab.intern(t);
        }
    }
    vocab
}

/// Map the nearest L/R context tokens to ids, padding outward with 0
/// and truncating tokens farthest from the target.
pub fn make_window(
    inst: &DisambiguationInstance,
    vocab: &Vocabulary,
    left_len: usize,
    right_len: usize,
) -> ContextWindow {
    let mut left_ids = vec![PAD_ID; left_len];
    let n = inst.left_tokens.len().min(left_len);
    // nearest-to-target left tokens are the last n; they fill the
    // innermost slots (end of left_ids)
    for (k, tok) in inst.left_tokens[inst.left_tokens.len() - n..].iter().enumerate() {
        left_ids[left_len - n + k] = vocab.id(tok);
    }
    let mut right_ids = vec![PAD_ID; right_len];
    let m = inst.right_tokens.len().min(right_len);
    for (k, tok) in inst.right_tokens[..m].iter().enumerate() {
        right_ids[k] = vocab.id(tok);
    }
    ContextWindow { left_ids, right_ids }
}

/// Per-lexelt stratified validation split. Lexelts with fewer than two
/// instances stay wholly in train.
pub fn split_validation(
    instances: &[DisambiguationInstance],
    fraction: f64,
    rng: &mut SeededRng,
) -> Result<(Vec<DisambiguationInstance>, Vec<DisambiguationInstance>)> {
    if !(0.0..1.0).contains(&fraction) || fraction == 0.0 {
        return Err(Error::Config(format!(
            "validation fraction must be in (0, 1), got {fraction}"
        )));
    }
    // group indices per lexelt in first-appearance order
    let mut groups: Vec<(String, Vec<usize>)> = Vec::new();
    for (i, inst) in instances.iter().enumerate() {
        match groups.iter_mut().find(|(l, _)| *l == inst.lexelt) {
            Some((_, v)) => v.push(i),
            None => groups.push((inst.lexelt.clone(), vec![i])),
        }
    }
    let mut is_val = vec![false; instances.len()];
    for (_, idxs) in &mut groups {
        if idxs.len() < 2 {
            continue;
        }
        let n_val = ((idxs.len() as f64) * fraction).round() as usize;
        let n_val = n_val.min(idxs.len() - 1);
        rng.shuffle(idxs);
        for &i in idxs.iter().take(n_val) {
            is_val[i] = true;
        }
    }
    let mut train = Vec::new();
    let mut val = Vec::new();
    for (i, inst) in instances.iter().enumerate() {
        if is_val[i] {
            val.push(inst.clone());
        } else {
            train.push(inst.clone());
        }
    }
    Ok((train, val))
}

/// Part of speech from the lexelt suffix (`cold.a` -> `a`).
fn lexelt_pos(name: &str) -> &str {
    name.rsplit('.').next().unwrap_or("")
}

/// Table-1 style summary: words and mean candidate senses per POS.
pub fn inventory_stats(inv: &SenseInventory) -> InventoryStats {
    let mut order: Vec<String> = Vec::new();
    let mut counts: HashMap<String, (usize, usize)> = HashMap::new();
    for lex in inv.lexelts() {
        let pos = lexelt_pos(&lex.name).to_string();
        let e = counts.entry(pos.clone()).or_insert_with(|| {
            order.push(pos.clone());
            (0, 0)
        });
        e.0 += 1;
        e.1 += lex.senses.len();
    }
    let per_pos: Vec<(String, usize, f64)> = order
        .iter()
        .map(|pos| {
            let (w, s) = counts[pos];
            (pos.clone(), w, s as f64 / w as f64)
        })
        .collect();
    let total_words = inv.num_lexelts();
    let total_senses: usize = inv.lexelts().iter().map(|l| l.senses.len()).sum();
    InventoryStats {
        per_pos,
        total_words,
        mean_senses: if total_words > 0 {
            total_senses as f64 / total_words as f64
        } else {
            0.0
        },
    }
}

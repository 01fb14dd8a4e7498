//! Sense and word embedding tables with column-lookup semantics, GloVe
//! file ingestion, and random sense initialization.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use crate::error::{Error, Result};
use crate::numkit::{Mat2, SeededRng, Vec1};

/// Reserved id for padding and unknown tokens. Its word embedding is
/// all-zeros and never trained.
pub const PAD_ID: usize = 0;

/// Token <-> id bijection built from training documents. Id 0 is the
/// PAD/UNK token; unseen test-time tokens map to it.
#[derive(Debug, Clone, PartialEq)]
pub struct Vocabulary {
    token_to_id: HashMap<String, usize>,
    id_to_token: Vec<String>,
}

impl Vocabulary {
    pub fn new() -> Self {
        Vocabulary {
            token_to_id: HashMap::new(),
            id_to_token: vec!["<pad>".to_string()],
        }
    }

    /// Insert a token if absent, returning its id.
    pub fn intern(&mut self, token: &str) -> usize {
        if let Some(&id) = self.token_to_id.get(token) {
            return id;
        }
        let id = self.id_to_token.len();
        self.id_to_token.push(token.to_string());
        self.token_to_id.insert(token.to_string(), id);
        id
    }

    /// Id for a token; PAD_ID when unseen.
    pub fn id(&self, token: &str) -> usize {
        self.token_to_id.get(token).copied().unwrap_or(PAD_ID)
    }

    pub fn token(&self, id: usize) -> Option<&str> {
        self.id_to_token.get(id).map(|s| s.as_str())
    }

    /// Total table width including the PAD slot.
    pub fn size(&self) -> usize {
        self.id_to_token.len()
    }

    pub fn contains(&self, token: &str) -> bool {
        self.token_to_id.contains_key(token)
    }

    pub fn tokens(&self) -> impl Iterator<Item = &str> {
        self.id_to_token.iter().map(|s| s.as_str())
    }

    /// Rebuild from an ordered token list (index 0 is the PAD token).
    pub fn from_tokens(tokens: Vec<String>) -> Self {
        let mut token_to_id = HashMap::new();
        for (id, t) in tokens.iter().enumerate().skip(1) {
            token_to_id.insert(t.clone(), id);
        }
        Vocabulary { token_to_id, id_to_token: tokens }
    }
}

impl Default for Vocabulary {
    fn default() -> Self {
        Self::new()
    }
}

/// One lexical item (word.pos) and its ordered candidate senses.
#[derive(Debug, Clone, PartialEq)]
pub struct Lexelt {
    pub name: String,
    /// Sense labels in first-seen order; the order breaks argmax ties.
    pub senses: Vec<String>,
    /// Global sense-table column per candidate, parallel to `senses`.
    pub global_ids: Vec<usize>,
}

/// Lexelt -> candidate senses, with a flat global numbering of all
/// senses across lexelts (the sense-table columns).
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SenseInventory {
    lexelts: Vec<Lexelt>,
    by_name: HashMap<String, usize>,
    /// global sense id -> (lexelt index, label)
    globals: Vec<(usize, String)>,
}

impl SenseInventory {
    pub fn new() -> Self {
        Self::default()
    }

    /// Register a (lexelt, sense) pair, creating entries as needed.
    /// Returns the sense's global id.
    pub fn add_sense(&mut self, lexelt: &str, sense: &str) -> usize {
        let li = match self.by_name.get(lexelt) {
            Some(&i) => i,
            None => {
                let i = self.lexelts.len();
                self.lexelts.push(Lexelt {
                    name: lexelt.to_string(),
                    senses: Vec::new(),
                    global_ids: Vec::new(),
                });
                self.by_name.insert(lexelt.to_string(), i);
                i
            }
        };
        let lex = &mut self.lexelts[li];
        if let Some(pos) = lex.senses.iter().position(|s| s == sense) {
            return lex.global_ids[pos];
        }
        let gid = self.globals.len();
        lex.senses.push(sense.to_string());
        lex.global_ids.push(gid);
        self.globals.push((li, sense.to_string()));
        gid
    }

    pub fn lexelt(&self, name: &str) -> Option<&Lexelt> {
        self.by_name.get(name).map(|&i| &self.lexelts[i])
    }

    pub fn lexelts(&self) -> &[Lexelt] {
        &self.lexelts
    }

    pub fn num_lexelts(&self) -> usize {
        self.lexelts.len()
    }

    pub fn num_senses(&self) -> usize {
        self.globals.len()
    }

    pub fn sense_label(&self, gid: usize) -> Option<&str> {
        self.globals.get(gid).map(|(_, s)| s.as_str())
    }

    pub fn sense_lexelt(&self, gid: usize) -> Option<&str> {
        self.globals.get(gid).map(|&(li, _)| self.lexelts[li].name.as_str())
    }

    /// Global id of a (lexelt, sense) pair if registered.
    pub fn global_id(&self, lexelt: &str, sense: &str) -> Option<usize> {
        let lex = self.lexelt(lexelt)?;
        let pos = lex.senses.iter().position(|s| s == sense)?;
        Some(lex.global_ids[pos])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TableKind {
    Word,
    Sense,
}

/// Dense d x v lookup table; each column is one embedding vector.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    pub matrix: Mat2,
    pub kind: TableKind,
}

impl EmbeddingTable {
    pub fn zeros(kind: TableKind, dim: usize, width: usize) -> Self {
        EmbeddingTable { matrix: Mat2::zeros(dim, width), kind }
    }

    pub fn dim(&self) -> usize {
        self.matrix.rows
    }

    pub fn width(&self) -> usize {
        self.matrix.cols
    }

    pub fn lookup(&self, id: usize) -> Result<Vec1> {
        if id >= self.width() {
            return Err(Error::Index { index: id, size: self.width() });
        }
        Ok(self.matrix.col(id))
    }
}

/// Load GloVe text vectors for the given vocabulary. Tokens absent from
/// the file fall back to unif(-0.1, 0.1); column 0 stays all-zeros.
pub fn load_glove(
    path: &Path,
    vocab: &Vocabulary,
    dim: usize,
    rng: &mut SeededRng,
) -> Result<EmbeddingTable> {
    let mut table = EmbeddingTable::zeros(TableKind::Word, dim, vocab.size());
    let mut found = vec![false; vocab.size()];
    found[PAD_ID] = true;

    let reader = BufReader::new(File::open(path)?);
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        if line.is_empty() {
            continue;
        }
        let mut parts = line.split(' ');
        let token = parts.next().ok_or(Error::Parse {
            line: lineno + 1,
            msg: "empty entry".into(),
        })?;
        if !vocab.contains(token) {
            continue;
        }
        let id = vocab.id(token);
        let mut vec = Vec::with_capacity(dim);
        for p in parts {
            let v: f64 = p.parse().map_err(|_| Error::Parse {
                line: lineno + 1,
                msg: format!("bad float {p:?}"),
            })?;
            vec.push(v);
        }
        if vec.len() != dim {
            return Err(Error::Format(format!(
                "line {}: vector length {} != embedding size {}",
                lineno + 1,
                vec.len(),
                dim
            )));
        }
        table.matrix.set_col(id, &vec);
        found[id] = true;
    }

    // unif(-0.1, 0.1) fallback, matching the sense-init scale
    for id in 1..vocab.size() {
        if !found[id] {
            let vec: Vec1 = (0..dim).map(|_| rng.uniform(-0.1, 0.1)).collect();
            table.matrix.set_col(id, &vec);
        }
    }
    Ok(table)
}

/// Random word table (the no-GloVe ablation): every non-PAD column
/// unif(-0.1, 0.1).
pub fn init_random_word_table(
    vocab: &Vocabulary,
    dim: usize,
    rng: &mut SeededRng,
) -> EmbeddingTable {
    let mut table = EmbeddingTable::zeros(TableKind::Word, dim, vocab.size());
    for id in 1..vocab.size() {
        let vec: Vec1 = (0..dim).map(|_| rng.uniform(-0.1, 0.1)).collect();
        table.matrix.set_col(id, &vec);
    }
    table
}

/// Random sense table: every column i.i.d. unif(-0.1, 0.1).
pub fn init_sense_table(
    inv: &SenseInventory,
    dim: usize,
    rng: &mut SeededRng,
) -> Result<EmbeddingTable> {
    if inv.num_senses() == 0 {
        return Err(Error::Config("empty sense inventory".into()));
    }
    let mut table = EmbeddingTable::zeros(TableKind::Sense, dim, inv.num_senses());
    for c in 0..inv.num_senses() {
        let vec: Vec1 = (0..dim).map(|_| rng.uniform(-0.1, 0.1)).collect();
        table.matrix.set_col(c, &vec);
    }
    Ok(table)
}

pub fn lookup_word(table: &EmbeddingTable, id: usize) -> Result<Vec1> {
    table.lookup(id)
}

pub fn lookup_sense(table: &EmbeddingTable, id: usize) -> Result<Vec1> {
    table.lookup(id)
}

/// Write a word table back to GloVe text format (round-trip support).
pub fn write_glove(path: &Path, vocab: &Vocabulary, table: &EmbeddingTable) -> Result<()> {
    use std::io::Write;
    let mut f = std::io::BufWriter::new(File::create(path)?);
    for id in 1..vocab.size() {
        let tok = vocab.token(id).unwrap();
        write!(f, "{tok}")?;
        for r in 0..table.dim() {
            write!(f, " {}", table.matrix.at(r, id))?;
        }
        writeln!(f)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numkit::matvec;
    use std::io::Write;

    fn glove_fixture(entries: &[(&str, &[f64])]) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        for (tok, vec) in entries {
            let vals: Vec<String> = vec.iter().map(|v| v.to_string()).collect();
            writeln!(f, "{} {}", tok, vals.join(" ")).unwrap();
        }
        f
    }

    #[test]
    fn glove_copies_present_tokens() {
        let mut vocab = Vocabulary::new();
        vocab.intern("cold");
        let f = glove_fixture(&[("cold", &[0.5, -0.25, 1.0])]);
        let mut rng = SeededRng::new(1);
        let table = load_glove(f.path(), &vocab, 3, &mut rng).unwrap();
        assert_eq!(table.lookup(vocab.id("cold")).unwrap(), vec![0.5, -0.25, 1.0]);
    }

    #[test]
    fn glove_absent_token_falls_back_to_uniform() {
        let mut vocab = Vocabulary::new();
        vocab.intern("warm");
        let f = glove_fixture(&[("cold", &[0.5, -0.25, 1.0])]);
        let mut rng = SeededRng::new(1);
        let table = load_glove(f.path(), &vocab, 3, &mut rng).unwrap();
        let col = table.lookup(vocab.id("warm")).unwrap();
        assert!(col.iter().all(|&x| x > -0.1 && x < 0.1));
        assert!(col.iter().any(|&x| x != 0.0));
    }

    #[test]
    fn glove_pad_column_is_zero() {
        let mut vocab = Vocabulary::new();
        vocab.intern("cold");
        let f = glove_fixture(&[("cold", &[1.0, 2.0])]);
        let mut rng = SeededRng::new(1);
        let table = load_glove(f.path(), &vocab, 2, &mut rng).unwrap();
        assert_eq!(table.lookup(PAD_ID).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn glove_dimension_mismatch() {
        let mut vocab = Vocabulary::new();
        vocab.intern("cold");
        let f = glove_fixture(&[("cold", &[1.0, 2.0, 3.0])]);
        let mut rng = SeededRng::new(1);
        assert!(load_glove(f.path(), &vocab, 2, &mut rng).is_err());
    }

    #[test]
    fn glove_malformed_line_reports_line_number() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(f, "cold 0.5 oops").unwrap();
        let mut vocab = Vocabulary::new();
        vocab.intern("cold");
        let mut rng = SeededRng::new(1);
        let err = load_glove(f.path(), &vocab, 2, &mut rng).unwrap_err();
        match err {
            Error::Parse { line, .. } => assert_eq!(line, 1),
            other => panic!("expected parse error, got {other}"),
        }
    }

    #[test]
    fn glove_round_trip() {
        let mut vocab = Vocabulary::new();
        vocab.intern("alpha");
        vocab.intern("beta");
        let f = glove_fixture(&[("alpha", &[0.125, -0.5]), ("beta", &[1.0, 3.0])]);
        let mut rng = SeededRng::new(2);
        let t1 = load_glove(f.path(), &vocab, 2, &mut rng).unwrap();
        let out = tempfile::NamedTempFile::new().unwrap();
        write_glove(out.path(), &vocab, &t1).unwrap();
        let mut rng2 = SeededRng::new(3);
        let t2 = load_glove(out.path(), &vocab, 2, &mut rng2).unwrap();
        assert_eq!(t1.matrix, t2.matrix);
    }

    fn small_inventory() -> SenseInventory {
        let mut inv = SenseInventory::new();
        inv.add_sense("cold.a", "s1");
        inv.add_sense("cold.a", "s2");
        inv.add_sense("bank.n", "s1");
        inv
    }

    #[test]
    fn sense_table_range_and_determinism() {
        let inv = small_inventory();
        let t1 = init_sense_table(&inv, 10, &mut SeededRng::new(4)).unwrap();
        let t2 = init_sense_table(&inv, 10, &mut SeededRng::new(4)).unwrap();
        assert_eq!(t1.matrix, t2.matrix);
        assert!(t1.matrix.data.iter().all(|&x| x > -0.1 && x < 0.1));
    }

    #[test]
    fn sense_table_empty_inventory_is_error() {
        let inv = SenseInventory::new();
        assert!(init_sense_table(&inv, 10, &mut SeededRng::new(0)).is_err());
    }

    #[test]
    fn sense_init_mean_near_zero() {
        let mut inv = SenseInventory::new();
        for i in 0..100 {
            inv.add_sense("w.n", &format!("s{i}"));
        }
        let t = init_sense_table(&inv, 1000, &mut SeededRng::new(5)).unwrap();
        let mean: f64 = t.matrix.data.iter().sum::<f64>() / t.matrix.data.len() as f64;
        assert!(mean.abs() < 0.005, "mean {mean}");
    }

    #[test]
    fn lookup_equals_one_hot_matvec() {
        let inv = small_inventory();
        let table = init_sense_table(&inv, 6, &mut SeededRng::new(9)).unwrap();
        for id in 0..inv.num_senses() {
            let mut one_hot = vec![0.0; table.width()];
            one_hot[id] = 1.0;
            let via_matvec = matvec(&table.matrix, &one_hot).unwrap();
            assert_eq!(lookup_sense(&table, id).unwrap(), via_matvec);
        }
    }

    #[test]
    fn lookup_out_of_range() {
        let inv = small_inventory();
        let table = init_sense_table(&inv, 4, &mut SeededRng::new(0)).unwrap();
        assert!(table.lookup(99).is_err());
    }

    #[test]
    fn distinct_senses_have_distinct_columns() {
        let inv = small_inventory();
        let table = init_sense_table(&inv, 8, &mut SeededRng::new(12)).unwrap();
        assert_ne!(table.lookup(0).unwrap(), table.lookup(1).unwrap());
    }

    #[test]
    fn inventory_global_ids_are_stable() {
        let inv = small_inventory();
        assert_eq!(inv.global_id("cold.a", "s1"), Some(0));
        assert_eq!(inv.global_id("cold.a", "s2"), Some(1));
        assert_eq!(inv.global_id("bank.n", "s1"), Some(2));
        assert_eq!(inv.sense_lexelt(2), Some("bank.n"));
        assert_eq!(inv.num_lexelts(), 2);
    }

    #[test]
    fn vocab_unknown_maps_to_pad() {
        let mut vocab = Vocabulary::new();
        let a = vocab.intern("seen");
        assert_eq!(a, 1);
        assert_eq!(vocab.id("seen"), 1);
        assert_eq!(vocab.id("unseen"), PAD_ID);
        assert_eq!(vocab.intern("seen"), 1);
    }
}

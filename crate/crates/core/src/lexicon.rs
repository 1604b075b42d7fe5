//! Sense lexicon, evaluation datasets and gloss hint handling.
//!
//! The lexicon is a tab-separated file with one synset per line:
//!
//! ```text
//! <synset_id>\t<lemma1,lemma2,...>\t<gloss>
//! ```
//!
//! Lines starting with `#` are comments. Sense order for a lemma is the order
//! in which its synsets appear in the file; index 0 is the first sense.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum LexiconError {
    #[error("failed to read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {reason}")]
    Malformed { line: usize, reason: String },
    #[error("duplicate synset {id} on lines {first} and {second}")]
    DuplicateId {
        id: SynsetId,
        first: usize,
        second: usize,
    },
    #[error("invalid synset id {0:?}: expected 8 digits, '-', and one of n/v/a/r")]
    BadSynsetId(String),
    #[error("invalid part-of-speech tag {0:?}")]
    BadPos(String),
}

/// Errors found while loading an evaluation dataset. Record-level problems are
/// collected so a single load reports every rejected instance.
#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("failed to read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{} rejected record(s): {}", .0.len(), join_errors(.0))]
    Rejected(Vec<RecordError>),
}

fn join_errors(errors: &[RecordError]) -> String {
    errors
        .iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join("; ")
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RecordError {
    #[error("line {line}: malformed record: {reason}")]
    Malformed { line: usize, reason: String },
    #[error("instance {id}: lemma {lemma:?} ({pos}) not in lexicon")]
    UnknownLemma { id: String, lemma: String, pos: Pos },
    #[error("instance {id}: gold sense {sense} is not a candidate sense of {lemma:?}")]
    GoldNotCandidate {
        id: String,
        lemma: String,
        sense: SynsetId,
    },
    #[error("instance {id}: {reason}")]
    Invalid { id: String, reason: String },
    #[error("duplicate instance id {0}")]
    DuplicateId(String),
}

/// Part of speech, restricted to the four WordNet categories.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Pos {
    Noun,
    Verb,
    Adj,
    Adv,
}

impl Pos {
    pub const ALL: [Pos; 4] = [Pos::Noun, Pos::Adj, Pos::Verb, Pos::Adv];

    pub fn as_char(self) -> char {
        match self {
            Pos::Noun => 'n',
            Pos::Verb => 'v',
            Pos::Adj => 'a',
            Pos::Adv => 'r',
        }
    }

    /// Report name used for per-category breakdowns.
    pub fn name(self) -> &'static str {
        match self {
            Pos::Noun => "Noun",
            Pos::Verb => "Verb",
            Pos::Adj => "Adj",
            Pos::Adv => "Adv",
        }
    }

    fn from_id_char(c: char) -> Option<Pos> {
        match c {
            'n' => Some(Pos::Noun),
            'v' => Some(Pos::Verb),
            'a' => Some(Pos::Adj),
            'r' => Some(Pos::Adv),
            _ => None,
        }
    }
}

impl fmt::Display for Pos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.as_char())
    }
}

impl FromStr for Pos {
    type Err = LexiconError;

    /// Accepts WordNet letters (`s` folds into adjectives), universal tags
    /// (`NOUN`, `ADJ`...) and the report names, case-insensitively.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "n" | "noun" => Ok(Pos::Noun),
            "v" | "verb" => Ok(Pos::Verb),
            "a" | "s" | "adj" | "adjective" => Ok(Pos::Adj),
            "r" | "adv" | "adverb" => Ok(Pos::Adv),
            _ => Err(LexiconError::BadPos(s.to_string())),
        }
    }
}

impl Serialize for Pos {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Pos {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// WordNet synset identifier, rendered as `<8-digit offset>-<pos>`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SynsetId {
    offset: u32,
    pos: Pos,
}

impl SynsetId {
    pub const MAX_OFFSET: u32 = 99_999_999;

    pub fn new(offset: u32, pos: Pos) -> Option<Self> {
        (offset <= Self::MAX_OFFSET).then_some(SynsetId { offset, pos })
    }

    pub fn offset(&self) -> u32 {
        self.offset
    }

    pub fn pos(&self) -> Pos {
        self.pos
    }
}

impl fmt::Display for SynsetId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:08}-{}", self.offset, self.pos)
    }
}

impl FromStr for SynsetId {
    type Err = LexiconError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || LexiconError::BadSynsetId(s.to_string());
        let (digits, pos) = s.split_once('-').ok_or_else(bad)?;
        if digits.len() != 8 || !digits.bytes().all(|b| b.is_ascii_digit()) {
            return Err(bad());
        }
        let mut chars = pos.chars();
        let pos = match (chars.next(), chars.next()) {
            (Some(c), None) => Pos::from_id_char(c).ok_or_else(bad)?,
            _ => return Err(bad()),
        };
        let offset = digits.parse().map_err(|_| bad())?;
        Ok(SynsetId { offset, pos })
    }
}

impl Serialize for SynsetId {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for SynsetId {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Synset {
    pub id: SynsetId,
    pub lemmas: Vec<String>,
    pub gloss: String,
}

impl Synset {
    pub fn pos(&self) -> Pos {
        self.id.pos()
    }
}

/// Lowercase and join multiword lemmas with underscores.
pub fn normalize_lemma(lemma: &str) -> String {
    lemma
        .split_whitespace()
        .collect::<Vec<_>>()
        .join("_")
        .to_lowercase()
}

/// In-memory sense lexicon. Immutable once loaded.
#[derive(Debug, Clone, Default)]
pub struct Lexicon {
    synsets: Vec<Synset>,
    by_id: HashMap<SynsetId, usize>,
    by_lemma: HashMap<(String, Pos), Vec<usize>>,
}

impl Lexicon {
    pub fn load(path: impl AsRef<Path>) -> Result<Self, LexiconError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|source| LexiconError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, LexiconError> {
        let mut synsets = Vec::new();
        let mut lines_of = HashMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            if raw.trim().is_empty() || raw.starts_with('#') {
                continue;
            }
            let synset = parse_lexicon_line(raw, line)?;
            if let Some(&first) = lines_of.get(&synset.id) {
                return Err(LexiconError::DuplicateId {
                    id: synset.id,
                    first,
                    second: line,
                });
            }
            lines_of.insert(synset.id, line);
            synsets.push(synset);
        }
        Ok(Self::from_synsets_unchecked(synsets))
    }

    /// Build from synsets already known to have unique ids.
    fn from_synsets_unchecked(synsets: Vec<Synset>) -> Self {
        let mut by_id = HashMap::with_capacity(synsets.len());
        let mut by_lemma: HashMap<(String, Pos), Vec<usize>> = HashMap::new();
        for (i, s) in synsets.iter().enumerate() {
            by_id.insert(s.id, i);
            for lemma in &s.lemmas {
                let senses = by_lemma.entry((lemma.clone(), s.pos())).or_default();
                if !senses.contains(&i) {
                    senses.push(i);
                }
            }
        }
        Lexicon {
            synsets,
            by_id,
            by_lemma,
        }
    }

    pub fn len(&self) -> usize {
        self.synsets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.synsets.is_empty()
    }

    pub fn synsets(&self) -> &[Synset] {
        &self.synsets
    }

    pub fn get(&self, id: &SynsetId) -> Option<&Synset> {
        self.by_id.get(id).map(|&i| &self.synsets[i])
    }

    /// Senses of `lemma` with the given part of speech, in lexicon order.
    /// Unknown lemmas yield an empty list.
    pub fn senses_of(&self, lemma: &str, pos: Pos) -> Vec<&Synset> {
        self.by_lemma
            .get(&(normalize_lemma(lemma), pos))
            .map(|idx| idx.iter().map(|&i| &self.synsets[i]).collect())
            .unwrap_or_default()
    }

    /// Render back to the TSV format, one synset per line in load order.
    pub fn render(&self) -> String {
        let mut out = String::new();
        for s in &self.synsets {
            out.push_str(&format!("{}\t{}\t{}\n", s.id, s.lemmas.join(","), s.gloss));
        }
        out
    }
}

fn parse_lexicon_line(raw: &str, line: usize) -> Result<Synset, LexiconError> {
    let malformed = |reason: &str| LexiconError::Malformed {
        line,
        reason: reason.to_string(),
    };
    let mut fields = raw.splitn(3, '\t');
    let (Some(id), Some(lemmas), Some(gloss)) = (fields.next(), fields.next(), fields.next())
    else {
        return Err(malformed("expected 3 tab-separated fields"));
    };
    let id: SynsetId = id.trim().parse().map_err(|e: LexiconError| LexiconError::Malformed {
        line,
        reason: e.to_string(),
    })?;
    let lemmas: Vec<String> = lemmas
        .split(',')
        .map(normalize_lemma)
        .filter(|l| !l.is_empty())
        .collect();
    if lemmas.is_empty() {
        return Err(malformed("no lemmas"));
    }
    let gloss = gloss.trim_end().to_string();
    if gloss.trim().is_empty() {
        return Err(malformed("empty gloss"));
    }
    Ok(Synset { id, lemmas, gloss })
}

/// Returns true when `s` is a hint: `(` + one or more characters that are
/// neither whitespace nor parentheses + `)`.
fn hint_len(s: &str) -> Option<usize> {
    let rest = s.strip_prefix('(')?;
    let end = rest.find(|c: char| c == ')' || c == '(' || c.is_whitespace())?;
    (end > 0 && rest[end..].starts_with(')')).then_some(end + 2)
}

/// Remove a leading domain hint such as `(biology)` from a gloss.
///
/// A hint is a parenthesised single token at the very start of the gloss. The
/// hint and the whitespace after it are removed. When several hints are
/// stacked (`(law) (biology) ...`) all of them go, so the function is
/// idempotent. A leading parenthetical containing spaces, such as
/// `(of a court)`, is ordinary gloss text and is kept.
pub fn strip_hints(gloss: &str) -> String {
    let mut rest = gloss;
    while let Some(len) = hint_len(rest) {
        rest = rest[len..].trim_start();
    }
    if rest.len() != gloss.len() && rest.starts_with('(') {
        log::warn!("gloss still starts with a parenthetical after hint removal: {rest:?}");
    }
    rest.to_string()
}

/// One target word occurrence to disambiguate.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WsdInstance {
    pub instance_id: String,
    pub lemma: String,
    pub pos: Pos,
    pub context: String,
    /// Character (not byte) offsets of the target surface form in `context`.
    pub target_span: (usize, usize),
    pub gold_senses: Vec<SynsetId>,
    pub candidate_senses: Vec<SynsetId>,
}

impl WsdInstance {
    /// Surface form of the target, sliced from the context by character span.
    pub fn surface(&self) -> String {
        let (start, end) = self.target_span;
        self.context.chars().skip(start).take(end - start).collect()
    }
}

/// Wire record of the WSD JSONL dataset format.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WsdRecord {
    pub id: String,
    pub lemma: String,
    pub pos: String,
    pub context: String,
    pub target_start: usize,
    pub target_end: usize,
    pub gold: Vec<String>,
}

pub fn load_wsd_dataset(
    path: impl AsRef<Path>,
    lexicon: &Lexicon,
) -> Result<Vec<WsdInstance>, DatasetError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| DatasetError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_wsd_dataset(&text, lexicon)
}

pub fn parse_wsd_dataset(text: &str, lexicon: &Lexicon) -> Result<Vec<WsdInstance>, DatasetError> {
    let mut instances = Vec::new();
    let mut errors = Vec::new();
    let mut seen = HashSet::new();
    for (idx, raw) in text.lines().enumerate() {
        if raw.trim().is_empty() {
            continue;
        }
        let record: WsdRecord = match serde_json::from_str(raw) {
            Ok(r) => r,
            Err(e) => {
                errors.push(RecordError::Malformed {
                    line: idx + 1,
                    reason: e.to_string(),
                });
                continue;
            }
        };
        if !seen.insert(record.id.clone()) {
            errors.push(RecordError::DuplicateId(record.id));
            continue;
        }
        match resolve_record(record, lexicon) {
            Ok(inst) => instances.push(inst),
            Err(e) => errors.push(e),
        }
    }
    if errors.is_empty() {
        Ok(instances)
    } else {
        Err(DatasetError::Rejected(errors))
    }
}

fn resolve_record(record: WsdRecord, lexicon: &Lexicon) -> Result<WsdInstance, RecordError> {
    let invalid = |reason: String| RecordError::Invalid {
        id: record.id.clone(),
        reason,
    };
    let pos: Pos = record.pos.parse().map_err(|e: LexiconError| invalid(e.to_string()))?;
    let lemma = normalize_lemma(&record.lemma);
    if lemma.is_empty() {
        return Err(invalid("empty lemma".into()));
    }
    let context_len = record.context.chars().count();
    if record.target_start >= record.target_end || record.target_end > context_len {
        return Err(invalid(format!(
            "target span {}..{} outside context of {} characters",
            record.target_start, record.target_end, context_len
        )));
    }
    if record.gold.is_empty() {
        return Err(invalid("no gold senses".into()));
    }
    let candidate_senses: Vec<SynsetId> =
        lexicon.senses_of(&lemma, pos).iter().map(|s| s.id).collect();
    if candidate_senses.is_empty() {
        return Err(RecordError::UnknownLemma {
            id: record.id,
            lemma,
            pos,
        });
    }
    let mut gold_senses = Vec::with_capacity(record.gold.len());
    for g in &record.gold {
        let sense: SynsetId = g.parse().map_err(|e: LexiconError| invalid(e.to_string()))?;
        if !candidate_senses.contains(&sense) {
            return Err(RecordError::GoldNotCandidate {
                id: record.id,
                lemma,
                sense,
            });
        }
        if !gold_senses.contains(&sense) {
            gold_senses.push(sense);
        }
    }
    Ok(WsdInstance {
        instance_id: record.id,
        lemma,
        pos,
        context: record.context,
        target_span: (record.target_start, record.target_end),
        gold_senses,
        candidate_senses,
    })
}

/// A synset gloss with gold domain labels for one or more inventories.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GlossLabelInstance {
    pub synset: SynsetId,
    pub gloss: String,
    /// Inventory name to gold labels, first label first.
    pub gold: std::collections::BTreeMap<String, Vec<String>>,
}

pub fn load_gloss_dataset(path: impl AsRef<Path>) -> Result<Vec<GlossLabelInstance>, DatasetError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| DatasetError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_gloss_dataset(&text)
}

pub fn parse_gloss_dataset(text: &str) -> Result<Vec<GlossLabelInstance>, DatasetError> {
    let mut out = Vec::new();
    let mut errors = Vec::new();
    let mut seen = HashSet::new();
    for (idx, raw) in text.lines().enumerate() {
        if raw.trim().is_empty() {
            continue;
        }
        match serde_json::from_str::<GlossLabelInstance>(raw) {
            Ok(inst) if inst.gloss.trim().is_empty() => errors.push(RecordError::Invalid {
                id: inst.synset.to_string(),
                reason: "empty gloss".into(),
            }),
            Ok(inst) if inst.gold.values().any(Vec::is_empty) => {
                errors.push(RecordError::Invalid {
                    id: inst.synset.to_string(),
                    reason: "empty gold label set".into(),
                })
            }
            Ok(inst) => {
                if seen.insert(inst.synset) {
                    out.push(inst);
                } else {
                    errors.push(RecordError::DuplicateId(inst.synset.to_string()));
                }
            }
            Err(e) => errors.push(RecordError::Malformed {
                line: idx + 1,
                reason: e.to_string(),
            }),
        }
    }
    if errors.is_empty() {
        Ok(out)
    } else {
        Err(DatasetError::Rejected(errors))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const CELL: &str = "\
# three senses of cell
00006484-n\tcell\tthe basic structural and functional unit of all organisms; they may exist as independent units or make up tissues
02991048-n\tcell,electric_cell\ta device that delivers an electric current as the result of a chemical reaction
02992529-n\tcell,cellular_telephone,cellphone\ta hand-held mobile radiotelephone for use in an area divided into small sections, each with its own short-range transmitter/receiver
";

    #[test]
    fn synset_id_round_trip() {
        let id: SynsetId = "00006484-n".parse().unwrap();
        assert_eq!(id.offset(), 6484);
        assert_eq!(id.pos(), Pos::Noun);
        assert_eq!(id.to_string(), "00006484-n");
        for bad in ["6484-n", "00006484n", "00006484-x", "0000648a-n", "00006484-nn", ""] {
            assert!(bad.parse::<SynsetId>().is_err(), "{bad}");
        }
    }

    #[test]
    fn loads_cell_fixture() {
        let lex = Lexicon::parse(CELL).unwrap();
        assert_eq!(lex.len(), 3);
        let first = &lex.synsets()[0];
        assert_eq!(first.id.to_string(), "00006484-n");
        assert_eq!(first.lemmas, vec!["cell"]);
        assert!(first.gloss.starts_with("the basic structural and functional unit"));

        let senses: Vec<_> = lex
            .senses_of("cell", Pos::Noun)
            .iter()
            .map(|s| s.id.to_string())
            .collect();
        assert_eq!(senses, ["00006484-n", "02991048-n", "02992529-n"]);
        assert_eq!(lex.senses_of("Cell", Pos::Noun).len(), 3);
        assert!(lex.senses_of("zzzz", Pos::Noun).is_empty());
        assert!(lex.senses_of("cell", Pos::Verb).is_empty());
        assert_eq!(lex.senses_of("electric cell", Pos::Noun).len(), 1);
    }

    #[test]
    fn empty_lexicon_is_fine() {
        assert!(Lexicon::parse("").unwrap().is_empty());
    }

    #[test]
    fn duplicate_ids_name_both_lines() {
        let text = "\
00000001-n\ta\tone
00000002-n\tb\ttwo
00000003-n\tc\tthree
00000004-n\td\tfour
00000005-n\te\tfive
00000006-n\tf\tsix
00000003-n\tg\tseven
";
        match Lexicon::parse(text) {
            Err(LexiconError::DuplicateId { first, second, .. }) => {
                assert_eq!((first, second), (3, 7));
            }
            other => panic!("expected duplicate error, got {other:?}"),
        }
    }

    #[test]
    fn malformed_lines_report_line_number() {
        let err = Lexicon::parse("00000001-n\ta\tok\nbroken line\n").unwrap_err();
        assert!(matches!(err, LexiconError::Malformed { line: 2, .. }), "{err}");
        let err = Lexicon::parse("00000001-n\t\tgloss\n").unwrap_err();
        assert!(matches!(err, LexiconError::Malformed { line: 1, .. }));
        let err = Lexicon::parse("00000001-n\ta\t  \n").unwrap_err();
        assert!(matches!(err, LexiconError::Malformed { line: 1, .. }));
    }

    #[test]
    fn strip_hints_examples() {
        assert_eq!(
            strip_hints("(biology) the basic structural and functional unit of all organisms; ..."),
            "the basic structural and functional unit of all organisms; ..."
        );
        assert_eq!(strip_hints("a round shape"), "a round shape");
        assert_eq!(
            strip_hints("(law) (of a court) having authority"),
            "(of a court) having authority"
        );
        assert_eq!(strip_hints("(of a court) having authority"), "(of a court) having authority");
        assert_eq!(strip_hints("(law) (biology) x"), "x");
        assert_eq!(strip_hints("(unclosed gloss"), "(unclosed gloss");
        assert_eq!(strip_hints("() empty"), "() empty");
        assert_eq!(strip_hints(" (biology) leading space"), " (biology) leading space");
    }

    fn wsd_line(id: &str, lemma: &str, gold: &[&str]) -> String {
        serde_json::json!({
            "id": id, "lemma": lemma, "pos": "n",
            "context": "The cell of the prisoner was small.",
            "target_start": 4, "target_end": 8, "gold": gold,
        })
        .to_string()
    }

    #[test]
    fn wsd_dataset_resolves_candidates() {
        let lex = Lexicon::parse(CELL).unwrap();
        let data = parse_wsd_dataset(&wsd_line("d0.s0.t0", "cell", &["00006484-n"]), &lex).unwrap();
        assert_eq!(data.len(), 1);
        let inst = &data[0];
        assert_eq!(inst.candidate_senses.len(), 3);
        let gold_index = inst
            .candidate_senses
            .iter()
            .position(|s| *s == inst.gold_senses[0]);
        assert_eq!(gold_index, Some(0));
        assert_eq!(inst.surface(), "cell");
    }

    #[test]
    fn wsd_dataset_rejections_are_collected() {
        let lex = Lexicon::parse(CELL).unwrap();
        let text = [
            wsd_line("a", "cell", &["09999999-n"]),
            wsd_line("b", "prison", &["00006484-n"]),
            "{not json".to_string(),
            wsd_line("c", "cell", &["02991048-n"]),
        ]
        .join("\n");
        let Err(DatasetError::Rejected(errs)) = parse_wsd_dataset(&text, &lex) else {
            panic!("expected rejection");
        };
        assert_eq!(errs.len(), 3);
        assert!(matches!(&errs[0], RecordError::GoldNotCandidate { id, .. } if id == "a"));
        assert!(matches!(&errs[1], RecordError::UnknownLemma { id, .. } if id == "b"));
        assert!(matches!(&errs[2], RecordError::Malformed { line: 3, .. }));
        assert!(errs[0].to_string().contains("instance a"));
    }

    #[test]
    fn wsd_dataset_span_checks() {
        let lex = Lexicon::parse(CELL).unwrap();
        let line = serde_json::json!({
            "id": "x", "lemma": "cell", "pos": "NOUN", "context": "cell",
            "target_start": 0, "target_end": 5, "gold": ["00006484-n"],
        })
        .to_string();
        assert!(parse_wsd_dataset(&line, &lex).is_err());
        assert!(parse_wsd_dataset("", &lex).unwrap().is_empty());
    }

    #[test]
    fn gloss_dataset_parses() {
        let text = r#"{"synset":"00006484-n","gloss":"(biology) the basic unit","gold":{"csi":["Biology"]}}"#;
        let data = parse_gloss_dataset(text).unwrap();
        assert_eq!(data[0].gold["csi"], vec!["Biology"]);
        let bad = r#"{"synset":"00006484-n","gloss":"x","gold":{"csi":[]}}"#;
        assert!(parse_gloss_dataset(bad).is_err());
    }

    fn arb_synset() -> impl Strategy<Value = Synset> {
        (
            0u32..=SynsetId::MAX_OFFSET,
            prop::sample::select(Pos::ALL.to_vec()),
            prop::collection::vec("[a-z]{1,6}(_[a-z]{1,4})?", 1..4),
            "[a-zA-Z(][a-zA-Z ;,()/-]{0,40}[a-z.]",
        )
            .prop_map(|(offset, pos, lemmas, gloss)| Synset {
                id: SynsetId::new(offset, pos).unwrap(),
                lemmas,
                gloss,
            })
    }

    proptest! {
        #[test]
        fn synset_id_parse_render_identity(offset in 0u32..=SynsetId::MAX_OFFSET, pos in prop::sample::select(Pos::ALL.to_vec())) {
            let id = SynsetId::new(offset, pos).unwrap();
            prop_assert_eq!(id.to_string().parse::<SynsetId>().unwrap(), id);
        }

        #[test]
        fn strip_hints_is_idempotent(g in "[()a-z ;]{0,24}") {
            let once = strip_hints(&g);
            prop_assert_eq!(strip_hints(&once), once.clone());
            prop_assert!(once.len() <= g.len());
            if !g.starts_with('(') {
                prop_assert_eq!(once, g);
            }
        }

        #[test]
        fn lexicon_render_round_trip(synsets in prop::collection::vec(arb_synset(), 0..12)) {
            let mut seen = HashSet::new();
            let synsets: Vec<_> = synsets.into_iter().filter(|s| seen.insert(s.id)).collect();
            let text: String = synsets
                .iter()
                .map(|s| format!("{}\t{}\t{}\n", s.id, s.lemmas.join(","), s.gloss))
                .collect();
            let lex = Lexicon::parse(&text).unwrap();
            prop_assert_eq!(lex.render(), text);
        }
    }
}

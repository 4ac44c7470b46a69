//! Stance-labelled document collections.
//!
//! Corpora are read from JSON Lines (`{"id","text","stance"}` per line) or
//! from CSV with the same header. Text is NFC-normalized on load and never
//! case-folded.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;
use unicode_normalization::UnicodeNormalization;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Stance {
    Left,
    Right,
    Neutral,
}

impl Stance {
    pub const ALL: [Stance; 3] = [Stance::Left, Stance::Right, Stance::Neutral];

    pub fn as_str(self) -> &'static str {
        match self {
            Stance::Left => "left",
            Stance::Right => "right",
            Stance::Neutral => "neutral",
        }
    }

    /// The binary lean, if this stance is opinionated.
    pub fn lean(self) -> Option<Lean> {
        match self {
            Stance::Left => Some(Lean::Left),
            Stance::Right => Some(Lean::Right),
            Stance::Neutral => None,
        }
    }
}

impl fmt::Display for Stance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown stance value {0:?}")]
pub struct UnknownStance(pub String);

impl FromStr for Stance {
    type Err = UnknownStance;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "left" => Ok(Stance::Left),
            "right" => Ok(Stance::Right),
            "neutral" => Ok(Stance::Neutral),
            _ => Err(UnknownStance(s.to_string())),
        }
    }
}

impl Serialize for Stance {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for Stance {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let raw = String::deserialize(deserializer)?;
        raw.parse().map_err(serde::de::Error::custom)
    }
}

/// Binary political lean: the only labels a stance classifier may emit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Lean {
    Left,
    Right,
}

impl Lean {
    pub fn as_str(self) -> &'static str {
        match self {
            Lean::Left => "left",
            Lean::Right => "right",
        }
    }

    pub fn opposite(self) -> Lean {
        match self {
            Lean::Left => Lean::Right,
            Lean::Right => Lean::Left,
        }
    }
}

impl From<Lean> for Stance {
    fn from(lean: Lean) -> Self {
        match lean {
            Lean::Left => Stance::Left,
            Lean::Right => Stance::Right,
        }
    }
}

impl fmt::Display for Lean {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Lean {
    type Err = UnknownStance;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        s.parse::<Stance>()?.lean().ok_or_else(|| UnknownStance(s.to_string()))
    }
}

impl Serialize for Lean {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for Lean {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let raw = String::deserialize(deserializer)?;
        raw.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StanceDocument {
    pub id: String,
    pub text: String,
    pub stance: Stance,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct StanceCounts {
    pub left: usize,
    pub right: usize,
    pub neutral: usize,
}

impl StanceCounts {
    pub fn get(&self, stance: Stance) -> usize {
        match stance {
            Stance::Left => self.left,
            Stance::Right => self.right,
            Stance::Neutral => self.neutral,
        }
    }

    fn bump(&mut self, stance: Stance) {
        match stance {
            Stance::Left => self.left += 1,
            Stance::Right => self.right += 1,
            Stance::Neutral => self.neutral += 1,
        }
    }

    pub fn total(&self) -> usize {
        self.left + self.right + self.neutral
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CorpusFormat {
    Jsonl,
    Csv,
}

impl CorpusFormat {
    /// Guess from the file extension; anything but `.csv` is JSON Lines.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("csv") => CorpusFormat::Csv,
            _ => CorpusFormat::Jsonl,
        }
    }
}

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("cannot read corpus {path}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("corpus is empty")]
    EmptyCorpus,
    #[error("line {line}: malformed record: {message}")]
    MalformedRecord { line: usize, message: String },
    #[error("line {line}: duplicate document id {id:?}")]
    DuplicateId { line: usize, id: String },
    #[error("line {line}: {stance}")]
    UnknownStance { line: usize, stance: UnknownStance },
    #[error("line {line}: document {id:?} has empty text")]
    EmptyText { line: usize, id: String },
    #[error("corpus has no left or right documents")]
    NoOpinionatedDocuments,
}

/// A validated, duplicate-free collection of stance-labelled documents.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Corpus {
    documents: Vec<StanceDocument>,
    counts: StanceCounts,
}

#[derive(Deserialize)]
struct RawRecord {
    id: Option<String>,
    text: Option<String>,
    stance: Option<String>,
}

impl Corpus {
    /// Build a corpus from in-memory documents, applying the same validation
    /// as the file loaders. Line numbers in errors are 1-based positions.
    pub fn from_documents(documents: Vec<StanceDocument>) -> Result<Self, CorpusError> {
        let mut builder = Builder::default();
        for (i, doc) in documents.into_iter().enumerate() {
            builder.push(i + 1, doc.id, doc.text, doc.stance)?;
        }
        builder.finish()
    }

    pub fn documents(&self) -> &[StanceDocument] {
        &self.documents
    }

    pub fn counts(&self) -> StanceCounts {
        self.counts
    }

    pub fn len(&self) -> usize {
        self.documents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.documents.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&StanceDocument> {
        self.documents.iter().find(|d| d.id == id)
    }

    /// Id-keyed lookup table for repeated access.
    pub fn index(&self) -> BTreeMap<&str, &StanceDocument> {
        self.documents.iter().map(|d| (d.id.as_str(), d)).collect()
    }

    pub fn write_jsonl<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for doc in &self.documents {
            serde_json::to_writer(&mut out, doc)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }
}

#[derive(Default)]
struct Builder {
    documents: Vec<StanceDocument>,
    seen: HashSet<String>,
    counts: StanceCounts,
}

impl Builder {
    fn push(&mut self, line: usize, id: String, text: String, stance: Stance) -> Result<(), CorpusError> {
        let text: String = text.nfc().collect();
        if text.trim().is_empty() {
            return Err(CorpusError::EmptyText { line, id });
        }
        if !self.seen.insert(id.clone()) {
            return Err(CorpusError::DuplicateId { line, id });
        }
        self.counts.bump(stance);
        self.documents.push(StanceDocument { id, text, stance });
        Ok(())
    }

    fn push_raw(&mut self, line: usize, raw: RawRecord) -> Result<(), CorpusError> {
        let missing = |field: &str| CorpusError::MalformedRecord {
            line,
            message: format!("missing field `{field}`"),
        };
        let id = raw.id.ok_or_else(|| missing("id"))?;
        let text = raw.text.ok_or_else(|| missing("text"))?;
        let stance = raw.stance.ok_or_else(|| missing("stance"))?;
        let stance = stance
            .parse()
            .map_err(|stance| CorpusError::UnknownStance { line, stance })?;
        self.push(line, id, text, stance)
    }

    fn finish(self) -> Result<Corpus, CorpusError> {
        if self.documents.is_empty() {
            return Err(CorpusError::EmptyCorpus);
        }
        Ok(Corpus {
            documents: self.documents,
            counts: self.counts,
        })
    }
}

pub fn load_corpus(path: &Path, format: CorpusFormat) -> Result<Corpus, CorpusError> {
    let io_err = |source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    };
    let file = File::open(path).map_err(io_err)?;
    match format {
        CorpusFormat::Jsonl => read_jsonl(BufReader::new(file)),
        CorpusFormat::Csv => read_csv(file),
    }
}

pub fn read_jsonl<R: BufRead>(reader: R) -> Result<Corpus, CorpusError> {
    let mut builder = Builder::default();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|e| CorpusError::MalformedRecord {
            line: line_no,
            message: e.to_string(),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let raw: RawRecord = serde_json::from_str(&line).map_err(|e| CorpusError::MalformedRecord {
            line: line_no,
            message: e.to_string(),
        })?;
        builder.push_raw(line_no, raw)?;
    }
    builder.finish()
}

pub fn read_csv<R: std::io::Read>(reader: R) -> Result<Corpus, CorpusError> {
    let mut builder = Builder::default();
    let mut rdr = csv::ReaderBuilder::new().flexible(false).from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| CorpusError::MalformedRecord {
            line: 1,
            message: e.to_string(),
        })?
        .clone();
    for result in rdr.records() {
        let record = result.map_err(|e| CorpusError::MalformedRecord {
            line: e.position().map(|p| p.line() as usize).unwrap_or(0),
            message: e.to_string(),
        })?;
        let line = record.position().map(|p| p.line() as usize).unwrap_or(0);
        let raw: RawRecord = record
            .deserialize(Some(&headers))
            .map_err(|e| CorpusError::MalformedRecord {
                line,
                message: e.to_string(),
            })?;
        builder.push_raw(line, raw)?;
    }
    builder.finish()
}

/// Drop neutral documents, preserving order.
pub fn filter_opinionated(corpus: &Corpus) -> Result<Corpus, CorpusError> {
    let documents: Vec<StanceDocument> = corpus
        .documents
        .iter()
        .filter(|d| d.stance != Stance::Neutral)
        .cloned()
        .collect();
    if documents.is_empty() {
        return Err(CorpusError::NoOpinionatedDocuments);
    }
    let counts = StanceCounts {
        left: corpus.counts.left,
        right: corpus.counts.right,
        neutral: 0,
    };
    Ok(Corpus { documents, counts })
}

/// Document ids grouped by stance. Every stance has an entry, possibly empty.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StancePools {
    pools: BTreeMap<Stance, Vec<String>>,
}

impl StancePools {
    pub fn get(&self, stance: Stance) -> &[String] {
        self.pools.get(&stance).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn iter(&self) -> impl Iterator<Item = (Stance, &[String])> {
        self.pools.iter().map(|(s, ids)| (*s, ids.as_slice()))
    }

    pub fn from_ids(left: Vec<String>, right: Vec<String>) -> Self {
        let mut pools: BTreeMap<Stance, Vec<String>> = Stance::ALL.iter().map(|s| (*s, Vec::new())).collect();
        pools.insert(Stance::Left, left);
        pools.insert(Stance::Right, right);
        StancePools { pools }
    }
}

pub fn stance_pools(corpus: &Corpus) -> StancePools {
    let mut pools: BTreeMap<Stance, Vec<String>> = Stance::ALL.iter().map(|s| (*s, Vec::new())).collect();
    for doc in &corpus.documents {
        pools.entry(doc.stance).or_default().push(doc.id.clone());
    }
    StancePools { pools }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Cursor;

    fn doc(id: &str, stance: Stance) -> StanceDocument {
        StanceDocument {
            id: id.into(),
            text: format!("text of {id}"),
            stance,
        }
    }

    #[test]
    fn stance_parse_is_case_insensitive() {
        assert_eq!("LEFT".parse::<Stance>().unwrap(), Stance::Left);
        assert_eq!(" Neutral ".parse::<Stance>().unwrap(), Stance::Neutral);
        assert!("center".parse::<Stance>().is_err());
        assert_eq!(serde_json::to_string(&Stance::Right).unwrap(), "\"right\"");
    }

    #[test]
    fn empty_jsonl_is_rejected() {
        let err = read_jsonl(Cursor::new("")).unwrap_err();
        assert!(matches!(err, CorpusError::EmptyCorpus));
    }

    #[test]
    fn duplicate_id_names_offending_line() {
        let input = "{\"id\":\"a\",\"text\":\"x\",\"stance\":\"left\"}\n\
                     {\"id\":\"b\",\"text\":\"y\",\"stance\":\"right\"}\n\
                     {\"id\":\"a\",\"text\":\"z\",\"stance\":\"left\"}\n";
        match read_jsonl(Cursor::new(input)).unwrap_err() {
            CorpusError::DuplicateId { line, id } => {
                assert_eq!(line, 3);
                assert_eq!(id, "a");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn malformed_and_invalid_records() {
        let bad_json = "{\"id\":\"a\",\"text\":\"x\",\"stance\":\"left\"}\nnot json\n";
        assert!(matches!(
            read_jsonl(Cursor::new(bad_json)).unwrap_err(),
            CorpusError::MalformedRecord { line: 2, .. }
        ));
        let missing = "{\"id\":\"a\",\"stance\":\"left\"}\n";
        assert!(matches!(
            read_jsonl(Cursor::new(missing)).unwrap_err(),
            CorpusError::MalformedRecord { line: 1, .. }
        ));
        let unknown = "{\"id\":\"a\",\"text\":\"x\",\"stance\":\"centre\"}\n";
        assert!(matches!(
            read_jsonl(Cursor::new(unknown)).unwrap_err(),
            CorpusError::UnknownStance { line: 1, .. }
        ));
        let empty = "{\"id\":\"a\",\"text\":\"   \",\"stance\":\"left\"}\n";
        assert!(matches!(
            read_jsonl(Cursor::new(empty)).unwrap_err(),
            CorpusError::EmptyText { line: 1, .. }
        ));
    }

    #[test]
    fn csv_reader_accepts_same_header() {
        let input = "id,text,stance\nt1,\"Taxes, again\",Left\nt2,Borders,right\n";
        let corpus = read_csv(Cursor::new(input)).unwrap();
        assert_eq!(corpus.len(), 2);
        assert_eq!(corpus.documents()[0].text, "Taxes, again");
        assert_eq!(corpus.counts().left, 1);
        let dup = "id,text,stance\nt1,a,left\nt1,b,right\n";
        assert!(matches!(
            read_csv(Cursor::new(dup)).unwrap_err(),
            CorpusError::DuplicateId { line: 3, .. }
        ));
    }

    #[test]
    fn text_is_nfc_normalized() {
        let decomposed = "cafe\u{0301}";
        let corpus = Corpus::from_documents(vec![StanceDocument {
            id: "a".into(),
            text: decomposed.into(),
            stance: Stance::Left,
        }])
        .unwrap();
        assert_eq!(corpus.documents()[0].text, "caf\u{e9}");
    }

    #[test]
    fn filter_keeps_order_and_drops_neutral() {
        let corpus = Corpus::from_documents(vec![
            doc("n1", Stance::Neutral),
            doc("r1", Stance::Right),
            doc("l1", Stance::Left),
            doc("n2", Stance::Neutral),
        ])
        .unwrap();
        let filtered = filter_opinionated(&corpus).unwrap();
        let ids: Vec<_> = filtered.documents().iter().map(|d| d.id.as_str()).collect();
        assert_eq!(ids, ["r1", "l1"]);
        assert_eq!(
            filtered.counts(),
            StanceCounts {
                left: 1,
                right: 1,
                neutral: 0
            }
        );
    }

    #[test]
    fn filter_without_neutral_is_identity() {
        let corpus = Corpus::from_documents(vec![doc("a", Stance::Left), doc("b", Stance::Right)]).unwrap();
        assert_eq!(filter_opinionated(&corpus).unwrap(), corpus);
    }

    #[test]
    fn filter_all_neutral_fails() {
        let corpus = Corpus::from_documents(vec![doc("a", Stance::Neutral)]).unwrap();
        assert!(matches!(
            filter_opinionated(&corpus).unwrap_err(),
            CorpusError::NoOpinionatedDocuments
        ));
    }

    #[test]
    fn pools_partition_ids() {
        let corpus = Corpus::from_documents(vec![
            doc("a", Stance::Left),
            doc("b", Stance::Right),
            doc("c", Stance::Left),
            doc("d", Stance::Right),
        ])
        .unwrap();
        let pools = stance_pools(&corpus);
        assert_eq!(pools.get(Stance::Left), ["a", "c"]);
        assert_eq!(pools.get(Stance::Right), ["b", "d"]);
        assert!(pools.get(Stance::Neutral).is_empty());

        let single = Corpus::from_documents(vec![doc("x", Stance::Left)]).unwrap();
        let pools = stance_pools(&single);
        assert_eq!(pools.get(Stance::Left), ["x"]);
        assert!(pools.get(Stance::Right).is_empty());
    }
}

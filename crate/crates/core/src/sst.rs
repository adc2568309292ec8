//! Sentiment-treebank ingestion: bracketed five-class trees, binarization,
//! sentence/phrase instance extraction, discourse tagging and corpus
//! statistics.

use std::collections::{BTreeSet, HashSet};
use std::fmt;
use std::io::{BufRead, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Binary sentiment label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Label {
    #[serde(rename = "+")]
    Positive,
    #[serde(rename = "-")]
    Negative,
}

impl Label {
    /// Index into a `[positive, negative]` pair.
    pub fn index(self) -> usize {
        match self {
            Label::Positive => 0,
            Label::Negative => 1,
        }
    }

    pub fn from_index(i: usize) -> Label {
        if i == 0 {
            Label::Positive
        } else {
            Label::Negative
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            Label::Positive => "+",
            Label::Negative => "-",
        }
    }

    /// Accepts `+`/`-`, `positive`/`negative`, `pos`/`neg` and `1`/`0`.
    pub fn parse(s: &str) -> Option<Label> {
        match s.trim().to_ascii_lowercase().as_str() {
            "+" | "positive" | "pos" | "1" => Some(Label::Positive),
            "-" | "negative" | "neg" | "0" => Some(Label::Negative),
            _ => None,
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}

/// A five-class sentiment tree. Internal nodes have exactly two children,
/// leaves carry a token.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabeledTree {
    pub label: u8,
    pub node: TreeNode,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TreeNode {
    Leaf(String),
    Branch(Box<LabeledTree>, Box<LabeledTree>),
}

impl LabeledTree {
    pub fn leaf(label: u8, token: impl Into<String>) -> Self {
        LabeledTree {
            label,
            node: TreeNode::Leaf(token.into()),
        }
    }

    pub fn branch(label: u8, left: LabeledTree, right: LabeledTree) -> Self {
        LabeledTree {
            label,
            node: TreeNode::Branch(Box::new(left), Box::new(right)),
        }
    }

    pub fn leaves(&self) -> Vec<&str> {
        let mut out = Vec::new();
        self.collect_leaves(&mut out);
        out
    }

    fn collect_leaves<'a>(&'a self, out: &mut Vec<&'a str>) {
        match &self.node {
            TreeNode::Leaf(tok) => out.push(tok),
            TreeNode::Branch(l, r) => {
                l.collect_leaves(out);
                r.collect_leaves(out);
            }
        }
    }

    /// Pre-order traversal of every subtree, root first.
    pub fn subtrees(&self) -> Vec<&LabeledTree> {
        let mut out = Vec::new();
        let mut stack = vec![self];
        while let Some(t) = stack.pop() {
            out.push(t);
            if let TreeNode::Branch(l, r) = &t.node {
                stack.push(r);
                stack.push(l);
            }
        }
        out
    }

    /// Serializes back to the single-line bracketed form.
    pub fn to_bracketed(&self) -> String {
        let mut s = String::new();
        self.write_bracketed(&mut s);
        s
    }

    fn write_bracketed(&self, s: &mut String) {
        s.push('(');
        s.push_str(&self.label.to_string());
        s.push(' ');
        match &self.node {
            TreeNode::Leaf(tok) => s.push_str(tok),
            TreeNode::Branch(l, r) => {
                l.write_bracketed(s);
                s.push(' ');
                r.write_bracketed(s);
            }
        }
        s.push(')');
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok<'a> {
    Open,
    Close,
    Atom(&'a str),
}

fn lex(line: &str) -> Vec<Tok<'_>> {
    let mut toks = Vec::new();
    let bytes = line.as_bytes();
    let mut i = 0;
    while i < bytes.len() {
        match bytes[i] {
            b'(' => {
                toks.push(Tok::Open);
                i += 1;
            }
            b')' => {
                toks.push(Tok::Close);
                i += 1;
            }
            c if c.is_ascii_whitespace() => i += 1,
            _ => {
                let start = i;
                while i < bytes.len()
                    && !matches!(bytes[i], b'(' | b')')
                    && !bytes[i].is_ascii_whitespace()
                {
                    i += 1;
                }
                toks.push(Tok::Atom(&line[start..i]));
            }
        }
    }
    toks
}

struct TreeParser<'a> {
    toks: Vec<Tok<'a>>,
    pos: usize,
    line: usize,
}

impl<'a> TreeParser<'a> {
    fn err(&self, message: impl Into<String>) -> Error {
        Error::Parse {
            line: self.line,
            message: message.into(),
        }
    }

    fn next(&mut self) -> Option<Tok<'a>> {
        let t = self.toks.get(self.pos).cloned();
        self.pos += 1;
        t
    }

    fn peek(&self) -> Option<&Tok<'a>> {
        self.toks.get(self.pos)
    }

    fn tree(&mut self) -> Result<LabeledTree> {
        match self.next() {
            Some(Tok::Open) => {}
            other => return Err(self.err(format!("expected `(`, found {other:?}"))),
        }
        let label = match self.next() {
            Some(Tok::Atom(a)) => a
                .parse::<i64>()
                .map_err(|_| self.err(format!("label `{a}` is not an integer")))?,
            other => return Err(self.err(format!("expected label, found {other:?}"))),
        };
        if !(0..=4).contains(&label) {
            return Err(Error::Validation(format!(
                "line {}: label {label} outside 0..4",
                self.line
            )));
        }
        let label = label as u8;
        let node = match self.peek() {
            Some(Tok::Atom(tok)) => {
                let tok = tok.to_string();
                self.pos += 1;
                TreeNode::Leaf(tok)
            }
            Some(Tok::Open) => {
                let left = self.tree()?;
                let right = self.tree()?;
                TreeNode::Branch(Box::new(left), Box::new(right))
            }
            other => return Err(self.err(format!("expected token or subtree, found {other:?}"))),
        };
        match self.next() {
            Some(Tok::Close) => Ok(LabeledTree { label, node }),
            other => Err(self.err(format!("expected `)`, found {other:?}"))),
        }
    }
}

/// Parses one bracketed tree. `line` is only used for error messages.
pub fn parse_tree(text: &str, line: usize) -> Result<LabeledTree> {
    let mut p = TreeParser {
        toks: lex(text),
        pos: 0,
        line,
    };
    let tree = p.tree()?;
    if p.pos != p.toks.len() {
        return Err(p.err("trailing input after tree"));
    }
    Ok(tree)
}

/// Parses newline-separated trees; blank lines are skipped.
pub fn parse_ptb_trees<R: BufRead>(reader: R) -> Result<Vec<LabeledTree>> {
    let mut trees = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::Parse {
            line: i + 1,
            message: e.to_string(),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        trees.push(parse_tree(&line, i + 1)?);
    }
    Ok(trees)
}

pub fn read_ptb_file(path: &Path) -> Result<Vec<LabeledTree>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    parse_ptb_trees(std::io::BufReader::new(file)).map_err(|e| match e {
        Error::Parse { line, message } => Error::Format {
            path: path.display().to_string(),
            line,
            message,
        },
        other => other,
    })
}

/// {0,1} → negative, {3,4} → positive, 2 → dropped.
pub fn binarize_label(five_class: u8) -> Result<Option<Label>> {
    match five_class {
        0 | 1 => Ok(Some(Label::Negative)),
        2 => Ok(None),
        3 | 4 => Ok(Some(Label::Positive)),
        other => Err(Error::Validation(format!("label {other} outside 0..4"))),
    }
}

pub const DEFAULT_NEGATIONS: [&str; 10] = [
    "not", "n't", "no", "never", "nothing", "nobody", "none", "neither", "nor", "nowhere",
];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NegationLexicon {
    words: BTreeSet<String>,
}

impl Default for NegationLexicon {
    fn default() -> Self {
        NegationLexicon {
            words: DEFAULT_NEGATIONS.iter().map(|w| w.to_string()).collect(),
        }
    }
}

impl NegationLexicon {
    pub fn new<I, S>(words: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        NegationLexicon {
            words: words
                .into_iter()
                .map(|w| w.as_ref().trim().to_lowercase())
                .filter(|w| !w.is_empty())
                .collect(),
        }
    }

    /// One word per line; blank lines and `#` comments ignored.
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let lex = NegationLexicon::new(
            text.lines()
                .map(str::trim)
                .filter(|l| !l.is_empty() && !l.starts_with('#')),
        );
        if lex.words.is_empty() {
            return Err(Error::Empty(format!("negation lexicon {}", path.display())));
        }
        Ok(lex)
    }

    pub fn contains(&self, token: &str) -> bool {
        self.words.contains(token)
    }

    pub fn words(&self) -> impl Iterator<Item = &str> {
        self.words.iter().map(String::as_str)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DiscourseTag {
    pub a_but_b: bool,
    pub negation: bool,
}

impl DiscourseTag {
    pub fn discourse(self) -> bool {
        self.a_but_b || self.negation
    }
}

/// Half-open token range `[start, end)`.
pub type Span = (usize, usize);

/// `a_but_b` holds when some "but" has a non-empty clause on each side;
/// B is everything after the first such "but".
pub fn tag_discourse(tokens: &[String], lexicon: &NegationLexicon) -> (DiscourseTag, Option<Span>) {
    let len = tokens.len();
    let b_span = (1..len.saturating_sub(1))
        .find(|&i| tokens[i] == "but")
        .map(|i| (i + 1, len));
    let negation = tokens.iter().any(|t| lexicon.contains(t));
    (
        DiscourseTag {
            a_but_b: b_span.is_some(),
            negation,
        },
        b_span,
    )
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "InstanceRecord", into = "InstanceRecord")]
pub struct LabeledInstance {
    pub tokens: Vec<String>,
    pub label: Label,
    pub discourse: DiscourseTag,
    pub b_span: Option<Span>,
}

/// JSON-lines wire layout.
#[derive(Serialize, Deserialize)]
struct InstanceRecord {
    tokens: Vec<String>,
    label: Label,
    a_but_b: bool,
    negation: bool,
    b_span: Option<Span>,
}

impl TryFrom<InstanceRecord> for LabeledInstance {
    type Error = String;

    fn try_from(r: InstanceRecord) -> std::result::Result<Self, String> {
        let inst = LabeledInstance {
            tokens: r.tokens,
            label: r.label,
            discourse: DiscourseTag {
                a_but_b: r.a_but_b,
                negation: r.negation,
            },
            b_span: r.b_span,
        };
        inst.validate()?;
        Ok(inst)
    }
}

impl From<LabeledInstance> for InstanceRecord {
    fn from(i: LabeledInstance) -> Self {
        InstanceRecord {
            tokens: i.tokens,
            label: i.label,
            a_but_b: i.discourse.a_but_b,
            negation: i.discourse.negation,
            b_span: i.b_span,
        }
    }
}

impl LabeledInstance {
    /// Lowercases and tags `tokens`.
    pub fn new(tokens: Vec<String>, label: Label, lexicon: &NegationLexicon) -> Self {
        let tokens: Vec<String> = tokens.into_iter().map(|t| t.to_lowercase()).collect();
        let (discourse, b_span) = tag_discourse(&tokens, lexicon);
        LabeledInstance {
            tokens,
            label,
            discourse,
            b_span,
        }
    }

    pub fn validate(&self) -> std::result::Result<(), String> {
        if self.tokens.is_empty() {
            return Err("instance has no tokens".into());
        }
        match (self.discourse.a_but_b, self.b_span) {
            (true, Some((s, e))) => {
                if s < 1 || s >= e || e > self.tokens.len() {
                    return Err(format!(
                        "b_span [{s}, {e}) not strictly inside {} tokens",
                        self.tokens.len()
                    ));
                }
            }
            (false, None) => {}
            (true, None) => return Err("a_but_b set without b_span".into()),
            (false, Some(_)) => return Err("b_span set without a_but_b".into()),
        }
        Ok(())
    }

    pub fn b_tokens(&self) -> Option<&[String]> {
        self.b_span.map(|(s, e)| &self.tokens[s..e])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExtractMode {
    Sentence,
    Phrase,
}

/// Sentence mode yields one instance per non-neutral root. Phrase mode yields
/// every non-neutral subtree, deduplicated by (tokens, label) across the whole
/// input in first-seen order.
pub fn extract_instances(
    trees: &[LabeledTree],
    mode: ExtractMode,
    lexicon: &NegationLexicon,
) -> Result<Vec<LabeledInstance>> {
    let mut out = Vec::new();
    match mode {
        ExtractMode::Sentence => {
            for tree in trees {
                if let Some(label) = binarize_label(tree.label)? {
                    let tokens = tree.leaves().into_iter().map(String::from).collect();
                    out.push(LabeledInstance::new(tokens, label, lexicon));
                }
            }
        }
        ExtractMode::Phrase => {
            let mut seen: HashSet<(Vec<String>, Label)> = HashSet::new();
            for tree in trees {
                for sub in tree.subtrees() {
                    let Some(label) = binarize_label(sub.label)? else {
                        continue;
                    };
                    let tokens: Vec<String> =
                        sub.leaves().into_iter().map(|t| t.to_lowercase()).collect();
                    if seen.insert((tokens.clone(), label)) {
                        out.push(LabeledInstance::new(tokens, label, lexicon));
                    }
                }
            }
        }
    }
    Ok(out)
}

pub fn write_instances<W: Write>(mut w: W, instances: &[LabeledInstance]) -> Result<()> {
    for inst in instances {
        serde_json::to_writer(&mut w, inst)?;
        w.write_all(b"\n")
            .map_err(|e| Error::io("<instances>", e))?;
    }
    Ok(())
}

pub fn read_instances<R: BufRead>(reader: R) -> Result<Vec<LabeledInstance>> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::Parse {
            line: i + 1,
            message: e.to_string(),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let inst: LabeledInstance = serde_json::from_str(&line).map_err(|e| Error::Parse {
            line: i + 1,
            message: e.to_string(),
        })?;
        out.push(inst);
    }
    Ok(out)
}

pub fn read_instances_file(path: &Path) -> Result<Vec<LabeledInstance>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_instances(std::io::BufReader::new(file)).map_err(|e| match e {
        Error::Parse { line, message } => Error::Format {
            path: path.display().to_string(),
            line,
            message,
        },
        other => other,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SplitStats {
    pub name: String,
    pub instances: usize,
    pub a_but_b: usize,
    pub negation: usize,
    pub discourse: usize,
}

fn pct(count: usize, total: usize) -> f64 {
    100.0 * count as f64 / total as f64
}

impl SplitStats {
    pub fn a_but_b_pct(&self) -> f64 {
        pct(self.a_but_b, self.instances)
    }

    pub fn negation_pct(&self) -> f64 {
        pct(self.negation, self.instances)
    }

    pub fn discourse_pct(&self) -> f64 {
        pct(self.discourse, self.instances)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CorpusStats {
    pub splits: Vec<SplitStats>,
}

pub fn split_stats(name: &str, instances: &[LabeledInstance]) -> Result<SplitStats> {
    if instances.is_empty() {
        return Err(Error::Empty(format!("split `{name}`")));
    }
    let count = |f: fn(&DiscourseTag) -> bool| instances.iter().filter(|i| f(&i.discourse)).count();
    Ok(SplitStats {
        name: name.to_string(),
        instances: instances.len(),
        a_but_b: count(|d| d.a_but_b),
        negation: count(|d| d.negation),
        discourse: count(|d| d.discourse()),
    })
}

pub fn corpus_stats(splits: &[(&str, &[LabeledInstance])]) -> Result<CorpusStats> {
    Ok(CorpusStats {
        splits: splits
            .iter()
            .map(|(name, insts)| split_stats(name, insts))
            .collect::<Result<_>>()?,
    })
}

impl CorpusStats {
    /// Rows are statistics, columns are splits; percentages to one decimal.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        let mut header = vec!["Number of".to_string()];
        header.extend(self.splits.iter().map(|s| s.name.clone()));
        wr.write_record(&header)?;

        let mut row = vec!["Instances".to_string()];
        row.extend(self.splits.iter().map(|s| s.instances.to_string()));
        wr.write_record(&row)?;

        #[allow(clippy::type_complexity)]
        let rows: [(&str, fn(&SplitStats) -> f64); 3] = [
            ("A-but-B", SplitStats::a_but_b_pct),
            ("Negations", SplitStats::negation_pct),
            ("Discourse", SplitStats::discourse_pct),
        ];
        for (name, f) in rows {
            let mut row = vec![name.to_string()];
            row.extend(self.splits.iter().map(|s| format!("{:.1}", f(s))));
            wr.write_record(&row)?;
        }
        wr.flush().map_err(|e| Error::io("<stats>", e))?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(s: &str) -> Vec<String> {
        s.split_whitespace().map(String::from).collect()
    }

    #[test]
    fn parses_two_leaf_tree() {
        let t = parse_tree("(3 (2 it) (4 works))", 1).unwrap();
        assert_eq!(t.label, 3);
        assert_eq!(t.leaves(), vec!["it", "works"]);
    }

    #[test]
    fn parses_single_leaf() {
        let t = parse_tree("(2 fine)", 1).unwrap();
        assert_eq!(t, LabeledTree::leaf(2, "fine"));
    }

    #[test]
    fn malformed_tree_reports_line() {
        let text = "(3 (2 a) (2 b))\n\n(3 (2 a) (2 b)\n";
        match parse_ptb_trees(text.as_bytes()) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn unary_internal_node_rejected() {
        assert!(matches!(
            parse_tree("(3 (2 a))", 1),
            Err(Error::Parse { .. })
        ));
    }

    #[test]
    fn out_of_range_label_is_validation_error() {
        assert!(matches!(
            parse_tree("(5 (2 a) (2 b))", 7),
            Err(Error::Validation(msg)) if msg.contains("line 7")
        ));
        assert!(matches!(binarize_label(9), Err(Error::Validation(_))));
    }

    #[test]
    fn binarization() {
        assert_eq!(binarize_label(0).unwrap(), Some(Label::Negative));
        assert_eq!(binarize_label(1).unwrap(), Some(Label::Negative));
        assert_eq!(binarize_label(2).unwrap(), None);
        assert_eq!(binarize_label(3).unwrap(), Some(Label::Positive));
        assert_eq!(binarize_label(4).unwrap(), Some(Label::Positive));
    }

    #[test]
    fn neutral_single_leaf_yields_nothing() {
        let t = vec![LabeledTree::leaf(2, "fine")];
        let lex = NegationLexicon::default();
        assert!(extract_instances(&t, ExtractMode::Sentence, &lex)
            .unwrap()
            .is_empty());
        assert!(extract_instances(&t, ExtractMode::Phrase, &lex)
            .unwrap()
            .is_empty());
    }

    #[test]
    fn phrase_mode_dedups_by_tokens_and_label() {
        let lex = NegationLexicon::default();
        let trees = vec![
            parse_tree("(3 (3 Good) (2 film))", 1).unwrap(),
            parse_tree("(4 (3 good) (4 fun))", 2).unwrap(),
        ];
        let phrases = extract_instances(&trees, ExtractMode::Phrase, &lex).unwrap();
        let texts: Vec<String> = phrases.iter().map(|p| p.tokens.join(" ")).collect();
        assert_eq!(texts, vec!["good film", "good", "good fun", "fun"]);
    }

    #[test]
    fn but_needs_both_sides() {
        let lex = NegationLexicon::default();
        let (tag, span) = tag_discourse(&toks("but good"), &lex);
        assert!(!tag.a_but_b);
        assert_eq!(span, None);
        let (tag, _) = tag_discourse(&toks("good but"), &lex);
        assert!(!tag.a_but_b);
    }

    #[test]
    fn but_span_from_example_sentence() {
        let lex = NegationLexicon::default();
        let (tag, span) = tag_discourse(&toks("flat , but with a revelatory performance"), &lex);
        assert!(tag.a_but_b);
        assert!(!tag.negation);
        assert_eq!(span, Some((3, 7)));
    }

    #[test]
    fn first_but_wins() {
        let lex = NegationLexicon::default();
        let (_, span) = tag_discourse(&toks("a but b but c"), &lex);
        assert_eq!(span, Some((2, 5)));
        // a leading "but" has an empty A clause, so the next one is used
        let (_, span) = tag_discourse(&toks("but a but b"), &lex);
        assert_eq!(span, Some((3, 4)));
    }

    #[test]
    fn negation_lexicon_hit() {
        let lex = NegationLexicon::default();
        let (tag, span) = tag_discourse(&toks("not bad"), &lex);
        assert!(tag.negation);
        assert!(!tag.a_but_b);
        assert_eq!(span, None);
        let custom = NegationLexicon::new(["hardly"]);
        assert!(tag_discourse(&toks("hardly bad"), &custom).0.negation);
        assert!(!tag_discourse(&toks("not bad"), &custom).0.negation);
    }

    #[test]
    fn four_instance_split_stats() {
        let lex = NegationLexicon::default();
        let insts: Vec<_> = ["dull but fun", "not fun", "not dull but fun", "fun"]
            .iter()
            .map(|s| LabeledInstance::new(toks(s), Label::Positive, &lex))
            .collect();
        let stats = split_stats("toy", &insts).unwrap();
        assert_eq!(stats.a_but_b_pct(), 50.0);
        assert_eq!(stats.negation_pct(), 50.0);
        assert_eq!(stats.discourse_pct(), 75.0);
    }

    #[test]
    fn empty_split_is_error() {
        assert!(matches!(split_stats("dev", &[]), Err(Error::Empty(_))));
    }

    #[test]
    fn stats_csv_layout() {
        let lex = NegationLexicon::default();
        let insts = vec![
            LabeledInstance::new(toks("dull but fun"), Label::Positive, &lex),
            LabeledInstance::new(toks("fun"), Label::Positive, &lex),
            LabeledInstance::new(toks("fun film"), Label::Positive, &lex),
        ];
        let stats = corpus_stats(&[("Train", &insts)]).unwrap();
        let mut buf = Vec::new();
        stats.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(
            text,
            "Number of,Train\nInstances,3\nA-but-B,33.3\nNegations,0.0\nDiscourse,33.3\n"
        );
    }

    #[test]
    fn instance_json_layout() {
        let lex = NegationLexicon::default();
        let inst = LabeledInstance::new(toks("Dull but fun"), Label::Negative, &lex);
        let json = serde_json::to_string(&inst).unwrap();
        assert_eq!(
            json,
            r#"{"tokens":["dull","but","fun"],"label":"-","a_but_b":true,"negation":false,"b_span":[2,3]}"#
        );
        let back: LabeledInstance = serde_json::from_str(&json).unwrap();
        assert_eq!(back, inst);
    }

    #[test]
    fn inconsistent_instance_json_rejected() {
        let bad = r#"{"tokens":["a"],"label":"+","a_but_b":true,"negation":false,"b_span":null}"#;
        assert!(serde_json::from_str::<LabeledInstance>(bad).is_err());
        let bad =
            r#"{"tokens":["a","b"],"label":"+","a_but_b":true,"negation":false,"b_span":[0,2]}"#;
        assert!(serde_json::from_str::<LabeledInstance>(bad).is_err());
    }
}

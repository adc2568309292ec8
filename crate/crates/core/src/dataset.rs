//! Model-ready examples: labeled instances encoded either as rows of a
//! trainable embedding table or as frozen per-token vectors.

use serde::{Deserialize, Serialize};

use crate::embeddings::{ContextualVectors, EmbeddingTable};
use crate::error::{Error, Result};
use crate::sst::{DiscourseTag, Label, LabeledInstance};

/// Token reserved for explicit padding; it always encodes to a zero vector.
pub const PAD_TOKEN: &str = "<pad>";

#[derive(Debug, Clone, PartialEq)]
pub enum Encoded {
    /// Rows of the model's embedding table; `None` is a zero vector.
    Ids(Vec<Option<usize>>),
    /// Frozen row-major `len × dim` vectors.
    Vectors { dim: usize, data: Vec<f64> },
}

impl Encoded {
    pub fn len(&self) -> usize {
        match self {
            Encoded::Ids(ids) => ids.len(),
            Encoded::Vectors { dim, data } => data.len() / dim,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Token range `[start, end)` of this encoding.
    pub fn slice(&self, start: usize, end: usize) -> Encoded {
        match self {
            Encoded::Ids(ids) => Encoded::Ids(ids[start..end].to_vec()),
            Encoded::Vectors { dim, data } => Encoded::Vectors {
                dim: *dim,
                data: data[start * dim..end * dim].to_vec(),
            },
        }
    }

    /// Appends `n` explicit pad positions.
    pub fn padded(&self, n: usize) -> Encoded {
        match self {
            Encoded::Ids(ids) => {
                let mut ids = ids.clone();
                ids.extend(std::iter::repeat_n(None, n));
                Encoded::Ids(ids)
            }
            Encoded::Vectors { dim, data } => {
                let mut data = data.clone();
                data.extend(std::iter::repeat_n(0.0, n * dim));
                Encoded::Vectors { dim: *dim, data }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Example {
    pub id: String,
    pub input: Encoded,
    pub label: Label,
    pub discourse: DiscourseTag,
    /// Encoding of the B clause for A-but-B sentences.
    pub but_input: Option<Encoded>,
}

impl Example {
    pub fn is_a_but_b(&self) -> bool {
        self.but_input.is_some()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SubsetFilter {
    All,
    But,
    Neg,
    ButOrNeg,
}

impl SubsetFilter {
    pub fn accepts(self, tag: DiscourseTag) -> bool {
        match self {
            SubsetFilter::All => true,
            SubsetFilter::But => tag.a_but_b,
            SubsetFilter::Neg => tag.negation,
            SubsetFilter::ButOrNeg => tag.discourse(),
        }
    }
}

/// Ids of `tokens` in `table`; unknown tokens and [`PAD_TOKEN`] map to `None`.
pub fn encode_ids(table: &EmbeddingTable, tokens: &[String]) -> Encoded {
    Encoded::Ids(
        tokens
            .iter()
            .map(|t| {
                if t == PAD_TOKEN {
                    None
                } else {
                    table.index_of(t)
                }
            })
            .collect(),
    )
}

/// Stable identifier of the `index`-th instance of a split file.
pub fn instance_id(index: usize) -> String {
    index.to_string()
}

pub fn examples_from_table(table: &EmbeddingTable, instances: &[LabeledInstance]) -> Vec<Example> {
    instances
        .iter()
        .enumerate()
        .map(|(i, inst)| {
            let input = encode_ids(table, &inst.tokens);
            let but_input = inst.b_span.map(|(s, e)| input.slice(s, e));
            Example {
                id: instance_id(i),
                input,
                label: inst.label,
                discourse: inst.discourse,
                but_input,
            }
        })
        .collect()
}

/// Joins instances with contextual vectors by positional id. Tokens must
/// match the vector file exactly.
pub fn examples_from_contextual(
    vectors: &ContextualVectors,
    instances: &[LabeledInstance],
) -> Result<Vec<Example>> {
    instances
        .iter()
        .enumerate()
        .map(|(i, inst)| {
            let id = instance_id(i);
            let sent = vectors
                .get(&id)
                .ok_or_else(|| Error::missing("contextual sentence", id.clone()))?;
            if sent.tokens != inst.tokens {
                return Err(Error::Alignment {
                    id,
                    tokens: inst.tokens.len(),
                    vectors: sent.vectors.len(),
                });
            }
            let input = Encoded::Vectors {
                dim: vectors.dim,
                data: sent.vectors.iter().flatten().copied().collect(),
            };
            let but_input = inst.b_span.map(|(s, e)| input.slice(s, e));
            Ok(Example {
                id,
                input,
                label: inst.label,
                discourse: inst.discourse,
                but_input,
            })
        })
        .collect()
}

//! Model checkpoints: a magic line, one JSON header line describing every
//! tensor, then the tensors as little-endian `f64` in header order.

use std::io::{BufRead, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{ConvBank, ModelParams, TrainConfig};
use crate::embeddings::EmbeddingTable;
use crate::error::{Error, Result};

const MAGIC: &str = "LOGICSENT-CNN 1";

#[derive(Serialize, Deserialize)]
struct TensorInfo {
    name: String,
    shape: Vec<usize>,
}

#[derive(Serialize, Deserialize)]
struct Header {
    config: Option<TrainConfig>,
    dim: usize,
    maps: usize,
    widths: Vec<usize>,
    tensors: Vec<TensorInfo>,
    vocab: Option<Vec<String>>,
    embeddings_trainable: bool,
    oov_bound: f64,
}

fn io_err(e: std::io::Error) -> Error {
    Error::io("<checkpoint>", e)
}

pub fn write_checkpoint<W: Write>(
    mut w: W,
    model: &ModelParams,
    config: Option<&TrainConfig>,
) -> Result<()> {
    let tensors = model.tensors();
    let header = Header {
        config: config.cloned(),
        dim: model.dim,
        maps: model.maps,
        widths: model.widths(),
        tensors: tensors
            .iter()
            .map(|(name, shape, _)| TensorInfo {
                name: name.clone(),
                shape: shape.clone(),
            })
            .collect(),
        vocab: model.embeddings.as_ref().map(|t| t.words().to_vec()),
        embeddings_trainable: model.embeddings_trainable(),
        oov_bound: model
            .embeddings
            .as_ref()
            .map_or(crate::embeddings::DEFAULT_OOV_BOUND, |t| t.oov_bound()),
    };
    writeln!(w, "{MAGIC}").map_err(io_err)?;
    serde_json::to_writer(&mut w, &header)?;
    w.write_all(b"\n").map_err(io_err)?;
    for (_, _, data) in tensors {
        let mut buf = Vec::with_capacity(data.len() * 8);
        for v in data {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        w.write_all(&buf).map_err(io_err)?;
    }
    w.flush().map_err(io_err)
}

fn read_tensor<R: Read>(r: &mut R, n: usize) -> Result<Vec<f64>> {
    let mut buf = vec![0u8; n * 8];
    r.read_exact(&mut buf).map_err(io_err)?;
    Ok(buf
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect())
}

pub fn read_checkpoint<R: BufRead>(mut r: R) -> Result<(ModelParams, Option<TrainConfig>)> {
    let bad = |m: String| Error::Format {
        path: "<checkpoint>".into(),
        line: 0,
        message: m,
    };
    let mut magic = String::new();
    r.read_line(&mut magic).map_err(io_err)?;
    if magic.trim_end() != MAGIC {
        return Err(bad(format!(
            "not a checkpoint (magic `{}`)",
            magic.trim_end()
        )));
    }
    let mut line = String::new();
    r.read_line(&mut line).map_err(io_err)?;
    let header: Header = serde_json::from_str(&line)?;

    let expect_len = |i: usize| -> Result<usize> {
        header
            .tensors
            .get(i)
            .map(|t| t.shape.iter().product())
            .ok_or_else(|| {
                bad(format!(
                    "header lists too few tensors ({})",
                    header.tensors.len()
                ))
            })
    };
    let mut i = 0;
    let mut banks = Vec::with_capacity(header.widths.len());
    for &width in &header.widths {
        let weight = read_tensor(&mut r, expect_len(i)?)?;
        let bias = read_tensor(&mut r, expect_len(i + 1)?)?;
        if weight.len() != header.maps * width * header.dim || bias.len() != header.maps {
            return Err(bad(format!("conv{width} has inconsistent shape")));
        }
        banks.push(ConvBank {
            width,
            weight,
            bias,
        });
        i += 2;
    }
    let total = header.maps * header.widths.len();
    let dense_w = read_tensor(&mut r, expect_len(i)?)?;
    let dense_b = read_tensor(&mut r, expect_len(i + 1)?)?;
    if dense_w.len() != 2 * total || dense_b.len() != 2 {
        return Err(bad("dense layer has inconsistent shape".into()));
    }
    i += 2;
    let embeddings = match &header.vocab {
        None => None,
        Some(vocab) => {
            let data = read_tensor(&mut r, expect_len(i)?)?;
            if data.len() != vocab.len() * header.dim {
                return Err(bad("embedding has inconsistent shape".into()));
            }
            let mut t = EmbeddingTable::new(header.dim, header.oov_bound)?;
            for (k, w) in vocab.iter().enumerate() {
                t.insert(w, &data[k * header.dim..(k + 1) * header.dim])?;
            }
            if t.len() != vocab.len() {
                return Err(bad("duplicate words in vocabulary".into()));
            }
            t.trainable = header.embeddings_trainable;
            i += 1;
            Some(t)
        }
    };
    if i != header.tensors.len() {
        return Err(bad(format!(
            "header lists {} tensors, model uses {i}",
            header.tensors.len()
        )));
    }
    let model = ModelParams {
        dim: header.dim,
        maps: header.maps,
        banks,
        dense_w,
        dense_b: [dense_b[0], dense_b[1]],
        embeddings,
        generation: 0,
    };
    Ok((model, header.config))
}

pub fn save_checkpoint(
    path: &Path,
    model: &ModelParams,
    config: Option<&TrainConfig>,
) -> Result<()> {
    let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_checkpoint(std::io::BufWriter::new(f), model, config)
}

pub fn load_checkpoint(path: &Path) -> Result<(ModelParams, Option<TrainConfig>)> {
    let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_checkpoint(std::io::BufReader::new(f))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn round_trip_is_bit_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let table = EmbeddingTable::random(["a", "b", "c"], 5, 0.25, &mut rng).unwrap();
        let mut m = ModelParams::init(5, &[1, 3], 3, Some(table), &mut rng).unwrap();
        m.for_each_param_mut(|_, _, v| *v += rng.gen_range(-1.0..1.0) / 3.0);
        let cfg = TrainConfig {
            widths: vec![1, 3],
            maps: 3,
            ..Default::default()
        };
        let mut buf = Vec::new();
        write_checkpoint(&mut buf, &m, Some(&cfg)).unwrap();
        let (back, back_cfg) = read_checkpoint(buf.as_slice()).unwrap();
        assert_eq!(back_cfg, Some(cfg));
        for ((_, sa, a), (_, sb, b)) in m.tensors().iter().zip(back.tensors().iter()) {
            assert_eq!(sa, sb);
            assert!(a
                .iter()
                .zip(b.iter())
                .all(|(x, y)| x.to_bits() == y.to_bits()));
        }
        assert_eq!(back.embeddings, m.embeddings);
    }

    #[test]
    fn frozen_model_without_table() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let m = ModelParams::init(4, &[2], 2, None, &mut rng).unwrap();
        let mut buf = Vec::new();
        write_checkpoint(&mut buf, &m, None).unwrap();
        let (back, cfg) = read_checkpoint(buf.as_slice()).unwrap();
        assert!(cfg.is_none());
        assert_eq!(back, m);
    }

    #[test]
    fn rejects_truncated_and_foreign_files() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let m = ModelParams::init(4, &[2], 2, None, &mut rng).unwrap();
        let mut buf = Vec::new();
        write_checkpoint(&mut buf, &m, None).unwrap();
        buf.truncate(buf.len() - 4);
        assert!(read_checkpoint(buf.as_slice()).is_err());
        assert!(read_checkpoint("hello\n{}\n".as_bytes()).is_err());
    }
}

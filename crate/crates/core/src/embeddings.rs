//! Vocabulary and word-vector tables.
//!
//! Indices 0..4 are reserved for `<pad>`, `<unk>`, `<bou>` and `<eou>`.
//! Pretrained vectors are read from whitespace-separated text files (the
//! common GloVe distribution format).

use std::collections::HashMap;
use std::io::BufRead;

use rand::Rng;

use crate::error::{NluError, Result};
use crate::numerics::{NodeId, SeedStream, Tape, Tensor};

pub const PAD: usize = 0;
pub const UNK: usize = 1;
pub const BOU: usize = 2;
pub const EOU: usize = 3;
pub const RESERVED: [&str; 4] = ["<pad>", "<unk>", "<bou>", "<eou>"];

/// Default word-vector width.
pub const DEFAULT_DIM: usize = 100;

const RANDOM_ROW_BOUND: f64 = 0.1;

/// Case-folded token ↔ index map.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Vocab {
    index: HashMap<String, usize>,
    tokens: Vec<String>,
}

impl Default for Vocab {
    fn default() -> Self {
        Self::new()
    }
}

impl Vocab {
    pub fn new() -> Self {
        let tokens: Vec<String> = RESERVED.iter().map(|s| s.to_string()).collect();
        let index = tokens.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
        Self { index, tokens }
    }

    /// Rebuilds a vocabulary from its index-ordered token list.
    pub fn from_tokens(tokens: Vec<String>) -> Result<Self> {
        if tokens.len() < RESERVED.len() || tokens[..RESERVED.len()] != RESERVED {
            return Err(NluError::Contract("vocabulary must start with the reserved tokens".into()));
        }
        let mut v = Self::new();
        for t in &tokens[RESERVED.len()..] {
            let before = v.len();
            if v.insert(t) != before {
                return Err(NluError::Contract(format!("duplicate vocabulary entry {t:?}")));
            }
        }
        Ok(v)
    }

    /// Adds a token if absent and returns its index.
    pub fn insert(&mut self, token: &str) -> usize {
        let key = token.to_lowercase();
        if let Some(&i) = self.index.get(&key) {
            return i;
        }
        let i = self.tokens.len();
        self.index.insert(key.clone(), i);
        self.tokens.push(key);
        i
    }

    pub fn get(&self, token: &str) -> Option<usize> {
        match self.index.get(token) {
            Some(&i) => Some(i),
            None => self.index.get(&token.to_lowercase()).copied(),
        }
    }

    /// Case-folded lookup; unknown tokens map to `UNK`.
    pub fn token_to_index(&self, token: &str) -> usize {
        self.get(token).unwrap_or(UNK)
    }

    pub fn encode<S: AsRef<str>>(&self, tokens: &[S]) -> Vec<usize> {
        tokens.iter().map(|t| self.token_to_index(t.as_ref())).collect()
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }
}

pub fn token_to_index(vocab: &Vocab, token: &str) -> usize {
    vocab.token_to_index(token)
}

/// `V × d` lookup table.
#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingMatrix {
    pub matrix: Tensor,
    pub trainable: bool,
}

impl EmbeddingMatrix {
    pub fn new(matrix: Tensor, trainable: bool) -> Result<Self> {
        if matrix.shape().len() != 2 || matrix.rows() < RESERVED.len() {
            return Err(NluError::Contract(format!("bad embedding shape {:?}", matrix.shape())));
        }
        let matrix = matrix.with_grad(trainable);
        Ok(Self { matrix, trainable })
    }

    pub fn dim(&self) -> usize {
        self.matrix.cols()
    }

    pub fn vocab_size(&self) -> usize {
        self.matrix.rows()
    }

    pub fn set_trainable(&mut self, trainable: bool) {
        self.trainable = trainable;
        self.matrix.set_requires_grad(trainable);
    }

    /// Registers the table on a tape as a parameter.
    pub fn bind(&self, tape: &mut Tape) -> NodeId {
        tape.param(&self.matrix)
    }

    /// Gathers rows on a tape.
    pub fn lookup(&self, tape: &mut Tape, table: NodeId, indices: &[usize]) -> Result<NodeId> {
        tape.gather(table, indices)
    }
}

/// Row gather outside any training graph.
pub fn embed(matrix: &EmbeddingMatrix, indices: &[usize]) -> Result<Tensor> {
    let mut tape = Tape::new();
    let table = tape.constant(&matrix.matrix);
    let rows = tape.gather(table, indices)?;
    Ok(tape.tensor(rows))
}

/// Result of [`load_vectors`].
#[derive(Clone, Debug)]
pub struct PretrainedVectors {
    pub vocab: Vocab,
    pub embeddings: EmbeddingMatrix,
    /// Lines skipped because their token was already loaded.
    pub duplicates: usize,
}

fn random_row<R: Rng>(rng: &mut R, dim: usize) -> Vec<f64> {
    (0..dim).map(|_| rng.random_range(-RANDOM_ROW_BOUND..RANDOM_ROW_BOUND)).collect()
}

/// Reads `token v1 … vd` lines. Reserved rows: PAD is zero, UNK is the mean
/// of all loaded vectors, BOU/EOU are random (from `seed`). Duplicate tokens
/// keep their first vector.
pub fn load_vectors<R: BufRead>(reader: R, expected_dim: usize, seed: u64) -> Result<PretrainedVectors> {
    if expected_dim == 0 {
        return Err(NluError::Config("embedding dimension must be positive".into()));
    }
    let mut vocab = Vocab::new();
    let mut rows: Vec<f64> = vec![0.0; RESERVED.len() * expected_dim];
    let mut duplicates = 0;
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line?;
        let mut fields = line.split_whitespace();
        let Some(token) = fields.next() else { continue };
        let values: Vec<f64> = fields
            .map(|f| {
                f.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| NluError::Format {
                        line: line_no,
                        msg: format!("bad number {f:?}"),
                    })
            })
            .collect::<Result<_>>()?;
        if values.len() != expected_dim {
            return Err(NluError::Format {
                line: line_no,
                msg: format!("expected {expected_dim} values, found {}", values.len()),
            });
        }
        let before = vocab.len();
        if vocab.insert(token) != before {
            duplicates += 1;
            continue;
        }
        rows.extend(values);
    }
    let loaded = vocab.len() - RESERVED.len();
    if loaded == 0 {
        return Err(NluError::Format {
            line: 1,
            msg: "no vectors found".into(),
        });
    }
    let d = expected_dim;
    for j in 0..d {
        let mean = (RESERVED.len()..vocab.len()).map(|r| rows[r * d + j]).sum::<f64>() / loaded as f64;
        rows[UNK * d + j] = mean;
    }
    let mut rng = SeedStream::new(seed).derive("reserved_rows", 0).rng();
    for r in [BOU, EOU] {
        rows[r * d..(r + 1) * d].copy_from_slice(&random_row(&mut rng, d));
    }
    let matrix = Tensor::matrix(vocab.len(), d, rows)?;
    Ok(PretrainedVectors {
        vocab,
        embeddings: EmbeddingMatrix::new(matrix, true)?,
        duplicates,
    })
}

/// Builds a model-sized table over `tokens` (first-appearance order).
/// Rows come from `pretrained` where available and are random otherwise.
pub fn build_embeddings<'a, I>(
    tokens: I,
    pretrained: Option<&PretrainedVectors>,
    dim: usize,
    trainable: bool,
    seed: SeedStream,
) -> Result<(Vocab, EmbeddingMatrix)>
where
    I: IntoIterator<Item = &'a str>,
{
    let dim = pretrained.map_or(dim, |p| p.embeddings.dim());
    if dim == 0 {
        return Err(NluError::Config("embedding dimension must be positive".into()));
    }
    let mut vocab = Vocab::new();
    for t in tokens {
        vocab.insert(t);
    }
    let mut rng = seed.derive("embeddings", 0).rng();
    let mut data = vec![0.0; vocab.len() * dim];
    for (r, tok) in vocab.tokens().iter().enumerate().skip(RESERVED.len()) {
        let row = match pretrained.and_then(|p| p.vocab.get(tok)) {
            Some(src) => p_row(pretrained.expect("checked"), src).to_vec(),
            None => random_row(&mut rng, dim),
        };
        data[r * dim..(r + 1) * dim].copy_from_slice(&row);
    }
    match pretrained {
        Some(p) => {
            for r in [UNK, BOU, EOU] {
                data[r * dim..(r + 1) * dim].copy_from_slice(p_row(p, r));
            }
        }
        None => {
            let n = vocab.len() - RESERVED.len();
            if n > 0 {
                for j in 0..dim {
                    data[UNK * dim + j] =
                        (RESERVED.len()..vocab.len()).map(|r| data[r * dim + j]).sum::<f64>() / n as f64;
                }
            }
            for r in [BOU, EOU] {
                data[r * dim..(r + 1) * dim].copy_from_slice(&random_row(&mut rng, dim));
            }
        }
    }
    let matrix = Tensor::matrix(vocab.len(), dim, data)?;
    Ok((vocab, EmbeddingMatrix::new(matrix, trainable)?))
}

fn p_row(p: &PretrainedVectors, r: usize) -> &[f64] {
    p.embeddings.matrix.row(r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::backward;

    const TOY: &str = "stop 0.1 0.2 0.3 0.4\ncar -0.5 0.0 0.5 1.0\ngo 1.0 1.0 1.0 1.0\n";

    #[test]
    fn loads_toy_file() {
        let p = load_vectors(TOY.as_bytes(), 4, 1).unwrap();
        assert_eq!(p.vocab.len(), 7);
        assert_eq!(p.embeddings.matrix.shape(), &[7, 4]);
        assert!(p.embeddings.matrix.row(PAD).iter().all(|&v| v == 0.0));
        let unk = p.embeddings.matrix.row(UNK);
        let expected = [(0.1 - 0.5 + 1.0) / 3.0, 1.2 / 3.0, 1.8 / 3.0, 2.4 / 3.0];
        for (a, b) in unk.iter().zip(expected) {
            assert!((a - b).abs() < 1e-12);
        }
        assert_eq!(p.embeddings.matrix.row(4), &[0.1, 0.2, 0.3, 0.4]);
    }

    #[test]
    fn wrong_width_cites_line() {
        let bad = "stop 0.1 0.2 0.3 0.4\ncar 0.1 0.2 0.3\n";
        match load_vectors(bad.as_bytes(), 4, 1) {
            Err(NluError::Format { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
        assert!(matches!(load_vectors("".as_bytes(), 4, 1), Err(NluError::Format { .. })));
    }

    #[test]
    fn duplicates_first_wins_and_loading_is_stable() {
        let dup = "stop 1 1\nStop 2 2\ngo 3 3\n";
        let p = load_vectors(dup.as_bytes(), 2, 5).unwrap();
        assert_eq!(p.duplicates, 1);
        assert_eq!(p.vocab.len(), 6);
        assert_eq!(p.embeddings.matrix.row(p.vocab.token_to_index("stop")), &[1.0, 1.0]);
        let q = load_vectors(dup.as_bytes(), 2, 5).unwrap();
        assert_eq!(p.vocab, q.vocab);
        assert_eq!(p.embeddings, q.embeddings);
    }

    #[test]
    fn hundred_dim_file_keeps_width() {
        let line: String = std::iter::once("stop".to_string())
            .chain((0..100).map(|i| format!("{}", i as f64 / 100.0)))
            .collect::<Vec<_>>()
            .join(" ");
        let p = load_vectors(line.as_bytes(), DEFAULT_DIM, 1).unwrap();
        assert_eq!(p.embeddings.dim(), 100);
    }

    #[test]
    fn lookup_rules() {
        let p = load_vectors(TOY.as_bytes(), 4, 1).unwrap();
        let stop = token_to_index(&p.vocab, "stop");
        assert_eq!(stop, 4);
        assert_eq!(token_to_index(&p.vocab, "zzqx"), UNK);
        assert_eq!(token_to_index(&p.vocab, "STOP"), stop);
    }

    #[test]
    fn embed_gathers_rows() {
        let p = load_vectors(TOY.as_bytes(), 4, 1).unwrap();
        let pad = embed(&p.embeddings, &[PAD]).unwrap();
        assert_eq!(pad.shape(), &[1, 4]);
        assert!(pad.data().iter().all(|&v| v == 0.0));
        let twice = embed(&p.embeddings, &[5, 5]).unwrap();
        assert_eq!(twice.row(0), twice.row(1));
        assert!(matches!(embed(&p.embeddings, &[7]), Err(NluError::Index { .. })));
    }

    #[test]
    fn gradient_touches_only_gathered_rows() {
        let p = load_vectors(TOY.as_bytes(), 4, 1).unwrap();
        let proj = Tensor::matrix(3, 12, (0..36).map(|i| ((i * 7) % 11) as f64 * 0.1 - 0.5).collect()).unwrap();
        let run = |m: &Tensor| {
            let mut tape = Tape::new();
            let table = tape.leaf(m);
            let rows = tape.gather(table, &[4, 6, 4]).unwrap();
            let parts: Vec<NodeId> = (0..3).map(|r| tape.row(rows, r).unwrap()).collect();
            let flat = tape.concat(&parts).unwrap();
            let hidden = tape.tanh(flat);
            let w = tape.constant(&proj);
            let logits = tape.matvec(w, hidden).unwrap();
            let loss = tape.softmax_cross_entropy(logits, 2).unwrap();
            (tape, table, loss)
        };
        let (tape, table, loss) = run(&p.embeddings.matrix);
        let g = backward(&tape, loss).unwrap();
        let grad = g.get(table).unwrap();
        let h = 1e-5;
        for r in 0..7 {
            for j in 0..4 {
                let idx = r * 4 + j;
                if r != 4 && r != 6 {
                    assert_eq!(grad[idx], 0.0);
                    continue;
                }
                let eval = |delta: f64| {
                    let mut m = p.embeddings.matrix.clone();
                    m.data_mut()[idx] += delta;
                    let (t, _, l) = run(&m);
                    t.scalar(l)
                };
                let fd = (eval(h) - eval(-h)) / (2.0 * h);
                assert!(grad[idx] != 0.0);
                assert!((fd - grad[idx]).abs() < 1e-8, "row {r} col {j}: {fd} vs {}", grad[idx]);
            }
        }
    }

    #[test]
    fn build_embeddings_for_corpus() {
        let p = load_vectors(TOY.as_bytes(), 4, 1).unwrap();
        let (v, e) = build_embeddings(["go", "left", "stop", "go"], Some(&p), 8, true, SeedStream::new(3)).unwrap();
        assert_eq!(v.tokens()[4..], ["go", "left", "stop"]);
        assert_eq!(e.matrix.shape(), &[7, 4]);
        assert_eq!(e.matrix.row(4), p.embeddings.matrix.row(6));
        assert_eq!(e.matrix.row(UNK), p.embeddings.matrix.row(UNK));
        let (v2, e2) = build_embeddings(["a", "b"], None, 3, false, SeedStream::new(3)).unwrap();
        assert_eq!(v2.len(), 6);
        assert!(!e2.matrix.requires_grad());
        for j in 0..3 {
            let mean = (e2.matrix.row(4)[j] + e2.matrix.row(5)[j]) / 2.0;
            assert!((e2.matrix.row(UNK)[j] - mean).abs() < 1e-15);
        }
    }
}

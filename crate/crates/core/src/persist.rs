//! Binary model files and bundle directories.
//!
//! A model file is `NLU1`, a little-endian u16 format version, a
//! little-endian u32 manifest length, the JSON manifest, then the tensor
//! payload as contiguous little-endian f32. The manifest is space-padded so
//! the payload starts on a 4-byte boundary; tensor offsets are byte offsets
//! into the payload.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::{Intent, KeywordLabel, Label, SlotLabel, TokenLabel};
use crate::embeddings::{EmbeddingMatrix, Vocab};
use crate::error::{NluError, Result};
use crate::models::{
    Encoder, FitSummary, FreqTable, HierarchicalPipeline, HybridMode, HybridPipeline, IntentModel, JointModel, Linear,
    ModelSpec, Stage2, System, TaggerModel, TaggerTask, TrainConfig,
};
use crate::numerics::Tensor;
use crate::recurrent::{AttentionParams, CellKind, CellParams};

pub const MAGIC: [u8; 4] = *b"NLU1";
pub const FORMAT_VERSION: u16 = 1;
pub const BUNDLE_INDEX: &str = "bundle.json";
pub const FREQ_TABLE_FILE: &str = "freq_table.json";
const PREAMBLE: usize = 4 + 2 + 4;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Tagger,
    Intent,
    Joint,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TensorEntry {
    pub name: String,
    pub offset: usize,
    pub shape: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub kind: ModelKind,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub task: Option<TaggerTask>,
    pub use_attention: bool,
    pub cell: CellKind,
    pub hidden_dim: usize,
    pub embedding_dim: usize,
    pub trainable_embeddings: bool,
    /// Output label names in output-layer order.
    pub labels: Vec<String>,
    pub config: TrainConfig,
    pub summary: FitSummary,
    pub vocab: Vec<String>,
    pub tensors: Vec<TensorEntry>,
}

/// One single-file model.
#[derive(Clone, Debug, PartialEq)]
pub enum SavedModel {
    Tagger(TaggerModel),
    Intent(IntentModel),
    Joint(JointModel),
}

fn names<L: Label>() -> Vec<String> {
    L::ALL.iter().map(|l| l.name().to_string()).collect()
}

fn encoder_tensors(e: &Encoder) -> Vec<(String, &Tensor)> {
    let mut v = vec![("embedding".to_string(), &e.embeddings.matrix)];
    for (dir, cell) in [("forward", &e.forward), ("backward", &e.backward)] {
        let g = cell.weights.len();
        for (i, t) in cell.tensors().into_iter().enumerate() {
            let name = if i < g { format!("{dir}.weight.{i}") } else { format!("{dir}.bias.{}", i - g) };
            v.push((name, t));
        }
    }
    v
}

impl SavedModel {
    fn parts(&self) -> (Manifest, Vec<(String, &Tensor)>) {
        let (kind, task, encoder, attention, output, config, summary, labels) = match self {
            SavedModel::Tagger(m) => (
                ModelKind::Tagger,
                Some(m.task),
                &m.encoder,
                None,
                &m.output,
                &m.config,
                &m.summary,
                match m.task {
                    TaggerTask::Slot => names::<SlotLabel>(),
                    TaggerTask::Keyword => names::<KeywordLabel>(),
                },
            ),
            SavedModel::Intent(m) => (
                ModelKind::Intent,
                None,
                &m.encoder,
                m.attention.as_ref(),
                &m.output,
                &m.config,
                &m.summary,
                names::<Intent>(),
            ),
            SavedModel::Joint(m) => {
                let mut l = names::<Intent>();
                l.extend(names::<TokenLabel>());
                (ModelKind::Joint, None, &m.encoder, None, &m.output, &m.config, &m.summary, l)
            }
        };
        let mut tensors = encoder_tensors(encoder);
        if let Some(a) = attention {
            tensors.push(("attention.projection".into(), &a.projection));
            tensors.push(("attention.context".into(), &a.context));
        }
        tensors.push(("output.weight".into(), &output.weight));
        tensors.push(("output.bias".into(), &output.bias));
        let mut offset = 0;
        let entries = tensors
            .iter()
            .map(|(name, t)| {
                let e = TensorEntry {
                    name: name.clone(),
                    offset,
                    shape: t.shape().to_vec(),
                };
                offset += 4 * t.len();
                e
            })
            .collect();
        let manifest = Manifest {
            kind,
            task,
            use_attention: attention.is_some(),
            cell: encoder.cell_kind(),
            hidden_dim: encoder.hidden_dim(),
            embedding_dim: encoder.embeddings.dim(),
            trainable_embeddings: encoder.embeddings.trainable,
            labels,
            config: config.clone(),
            summary: summary.clone(),
            vocab: encoder.vocab.tokens().to_vec(),
            tensors: entries,
        };
        (manifest, tensors)
    }

    /// Serializes the model. Parameters are stored as f32.
    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let (manifest, tensors) = self.parts();
        let mut json = serde_json::to_vec(&manifest)?;
        while (PREAMBLE + json.len()) % 4 != 0 {
            json.push(b' ');
        }
        let len = u32::try_from(json.len()).map_err(|_| NluError::ModelFile("manifest too large".into()))?;
        let mut out = Vec::with_capacity(PREAMBLE + json.len() + tensors.iter().map(|(_, t)| 4 * t.len()).sum::<usize>());
        out.extend_from_slice(&MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        out.extend_from_slice(&len.to_le_bytes());
        out.extend_from_slice(&json);
        for (_, t) in tensors {
            for &v in t.data() {
                out.extend_from_slice(&(v as f32).to_le_bytes());
            }
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let bad = |msg: String| NluError::ModelFile(msg);
        if bytes.len() < PREAMBLE || bytes[..4] != MAGIC {
            return Err(bad("bad magic bytes, not a model file".into()));
        }
        let version = u16::from_le_bytes([bytes[4], bytes[5]]);
        if version != FORMAT_VERSION {
            return Err(bad(format!("unsupported format version {version}, expected {FORMAT_VERSION}")));
        }
        let len = u32::from_le_bytes([bytes[6], bytes[7], bytes[8], bytes[9]]) as usize;
        let json = bytes
            .get(PREAMBLE..PREAMBLE + len)
            .ok_or_else(|| bad("truncated manifest".into()))?;
        let manifest: Manifest = serde_json::from_slice(json).map_err(|e| bad(format!("manifest: {e}")))?;
        let payload = &bytes[PREAMBLE + len..];
        let mut tensors: BTreeMap<&str, Tensor> = BTreeMap::new();
        for e in &manifest.tensors {
            let numel: usize = e.shape.iter().product();
            if e.offset % 4 != 0 {
                return Err(bad(format!("tensor {} is misaligned", e.name)));
            }
            let raw = e
                .offset
                .checked_add(4 * numel)
                .and_then(|end| payload.get(e.offset..end))
                .ok_or_else(|| bad(format!("tensor {} lies outside the payload", e.name)))?;
            let data = raw
                .chunks_exact(4)
                .map(|c| f64::from(f32::from_le_bytes([c[0], c[1], c[2], c[3]])))
                .collect();
            tensors.insert(&e.name, Tensor::new(e.shape.clone(), data).map_err(|err| bad(format!("tensor {}: {err}", e.name)))?);
        }
        let mut take = |name: &str| tensors.remove(name).ok_or_else(|| bad(format!("missing tensor {name}")));
        let gates = manifest.cell.gates();
        let cell = |dir: &str, take: &mut dyn FnMut(&str) -> Result<Tensor>| -> Result<CellParams> {
            let mut ts = Vec::with_capacity(2 * gates);
            for i in 0..gates {
                ts.push(take(&format!("{dir}.weight.{i}"))?);
            }
            for i in 0..gates {
                ts.push(take(&format!("{dir}.bias.{i}"))?);
            }
            CellParams::from_tensors(manifest.cell, manifest.embedding_dim, manifest.hidden_dim, ts)
        };
        let embeddings = EmbeddingMatrix::new(take("embedding")?, manifest.trainable_embeddings)?;
        let forward = cell("forward", &mut take)?;
        let backward = cell("backward", &mut take)?;
        let vocab = Vocab::from_tokens(manifest.vocab.clone())?;
        if vocab.len() != embeddings.vocab_size() {
            return Err(bad(format!("vocabulary has {} entries, embedding has {} rows", vocab.len(), embeddings.vocab_size())));
        }
        let encoder = Encoder {
            vocab,
            embeddings,
            forward,
            backward,
        };
        let attention = if manifest.use_attention {
            Some(AttentionParams::from_tensors(take("attention.projection")?, take("attention.context")?)?)
        } else {
            None
        };
        let output = Linear::from_tensors(take("output.weight")?, take("output.bias")?)?;
        if output.in_dim() != encoder.output_dim() || output.out_dim() != manifest.labels.len() {
            return Err(bad(format!("output layer {:?} does not fit the manifest", output.weight.shape())));
        }
        let (config, summary) = (manifest.config.clone(), manifest.summary.clone());
        Ok(match manifest.kind {
            ModelKind::Tagger => {
                let task = manifest.task.ok_or_else(|| bad("tagger manifest without a task".into()))?;
                SavedModel::Tagger(TaggerModel {
                    task,
                    encoder,
                    output,
                    config,
                    summary,
                })
            }
            ModelKind::Intent => SavedModel::Intent(IntentModel {
                encoder,
                attention,
                output,
                config,
                summary,
            }),
            ModelKind::Joint => SavedModel::Joint(JointModel {
                encoder,
                output,
                config,
                summary,
            }),
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        Ok(fs::write(path, self.to_bytes()?)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_bytes(&fs::read(path)?)
    }
}

/// Index of a bundle directory: component role → file name.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BundleIndex {
    pub format_version: u16,
    pub spec: ModelSpec,
    pub components: BTreeMap<String, String>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub freq_table: Option<String>,
}

fn tagger_file(m: &TaggerModel) -> (&'static str, &'static str) {
    match m.task {
        TaggerTask::Slot => ("slot_tagger", "slot_tagger.nlu"),
        TaggerTask::Keyword => ("keyword_tagger", "keyword_tagger.nlu"),
    }
}

/// Writes every component of `system` plus `bundle.json` into `dir`.
pub fn save_bundle(system: &System, dir: &Path) -> Result<BundleIndex> {
    fs::create_dir_all(dir)?;
    let mut files: Vec<(&str, &str, SavedModel)> = Vec::new();
    let mut table = None;
    let push_tagger = |files: &mut Vec<_>, m: &TaggerModel| {
        let (role, file) = tagger_file(m);
        files.push((role, file, SavedModel::Tagger(m.clone())));
    };
    match system {
        System::Tagger(m) => push_tagger(&mut files, m),
        System::Separate(m) => files.push(("intent", "intent.nlu", SavedModel::Intent(m.clone()))),
        System::Joint(m) => files.push(("joint", "joint.nlu", SavedModel::Joint(m.clone()))),
        System::Hybrid(p) => {
            push_tagger(&mut files, &p.keywords);
            if let Some(s) = &p.slots {
                push_tagger(&mut files, s);
            }
            table = Some(&p.table);
        }
        System::Hierarchical(p) => {
            push_tagger(&mut files, &p.slots);
            push_tagger(&mut files, &p.keywords);
            match &p.stage2 {
                Stage2::Separate(m) => files.push(("intent", "intent.nlu", SavedModel::Intent(m.clone()))),
                Stage2::Joint(m) => files.push(("joint", "joint.nlu", SavedModel::Joint(m.clone()))),
            }
        }
    }
    let mut components = BTreeMap::new();
    for (role, file, model) in files {
        model.save(&dir.join(file))?;
        components.insert(role.to_string(), file.to_string());
    }
    let freq_table = match table {
        Some(t) => {
            let mut json = serde_json::to_string_pretty(t)?;
            json.push('\n');
            fs::write(dir.join(FREQ_TABLE_FILE), json)?;
            Some(FREQ_TABLE_FILE.to_string())
        }
        None => None,
    };
    let index = BundleIndex {
        format_version: FORMAT_VERSION,
        spec: system.spec(),
        components,
        freq_table,
    };
    let mut json = serde_json::to_string_pretty(&index)?;
    json.push('\n');
    fs::write(dir.join(BUNDLE_INDEX), json)?;
    Ok(index)
}

/// Loads a bundle written by [`save_bundle`].
pub fn load_bundle(dir: &Path) -> Result<System> {
    let index: BundleIndex = serde_json::from_slice(&fs::read(dir.join(BUNDLE_INDEX))?)
        .map_err(|e| NluError::ModelFile(format!("{BUNDLE_INDEX}: {e}")))?;
    if index.format_version != FORMAT_VERSION {
        return Err(NluError::ModelFile(format!(
            "unsupported bundle version {}, expected {FORMAT_VERSION}",
            index.format_version
        )));
    }
    let load = |role: &str| -> Result<SavedModel> {
        let file = index
            .components
            .get(role)
            .ok_or_else(|| NluError::ModelFile(format!("bundle has no {role} component")))?;
        SavedModel::load(&dir.join(file))
    };
    let wrong = |role: &str| NluError::ModelFile(format!("{role} component has the wrong model kind"));
    let tagger = |role: &str| -> Result<TaggerModel> {
        match load(role)? {
            SavedModel::Tagger(m) => Ok(m),
            _ => Err(wrong(role)),
        }
    };
    let intent = || -> Result<IntentModel> {
        match load("intent")? {
            SavedModel::Intent(m) => Ok(m),
            _ => Err(wrong("intent")),
        }
    };
    let joint = || -> Result<JointModel> {
        match load("joint")? {
            SavedModel::Joint(m) => Ok(m),
            _ => Err(wrong("joint")),
        }
    };
    let table = || -> Result<FreqTable> {
        let file = index
            .freq_table
            .as_ref()
            .ok_or_else(|| NluError::ModelFile("hybrid bundle has no frequency table".into()))?;
        serde_json::from_slice(&fs::read(dir.join(file))?).map_err(|e| NluError::ModelFile(format!("{file}: {e}")))
    };
    let system = match index.spec {
        ModelSpec::SlotTagger => System::Tagger(tagger("slot_tagger")?),
        ModelSpec::KeywordTagger => System::Tagger(tagger("keyword_tagger")?),
        ModelSpec::Separate1 | ModelSpec::Separate2 => System::Separate(intent()?),
        ModelSpec::Joint => System::Joint(joint()?),
        ModelSpec::Hybrid1 | ModelSpec::Hybrid2 => {
            let mode = if index.spec == ModelSpec::Hybrid1 {
                HybridMode::KeywordsOnly
            } else {
                HybridMode::KeywordsAndSlots
            };
            System::Hybrid(HybridPipeline {
                mode,
                keywords: tagger("keyword_tagger")?,
                slots: match mode {
                    HybridMode::KeywordsOnly => None,
                    HybridMode::KeywordsAndSlots => Some(tagger("slot_tagger")?),
                },
                table: table()?,
            })
        }
        ModelSpec::HierSeparate1 | ModelSpec::HierSeparate2 | ModelSpec::HierJoint => System::Hierarchical(HierarchicalPipeline {
            slots: tagger("slot_tagger")?,
            keywords: tagger("keyword_tagger")?,
            stage2: if index.spec == ModelSpec::HierJoint {
                Stage2::Joint(joint()?)
            } else {
                Stage2::Separate(intent()?)
            },
        }),
    };
    if system.spec() != index.spec {
        return Err(NluError::ModelFile(format!("bundle components do not make up a {}", index.spec)));
    }
    Ok(system)
}

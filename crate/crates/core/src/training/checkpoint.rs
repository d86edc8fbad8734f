//! Versioned binary checkpoints. The byte layout is described in
//! `docs/checkpoint-format.md`.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::trainer::{GroupUpdates, StepCounters, Trainer};
use crate::config::RunConfig;
use crate::data::{CenteredRegion, CriticView, DatasetSpec};
use crate::error::{Error, Result};
use crate::optim::AdamState;

pub const MAGIC: &[u8; 8] = b"QPIXCKPT";
pub const VERSION: u32 = 1;

/// FNV-1a, 64-bit.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub shape: Vec<u64>,
    pub data: Vec<f64>,
}

/// Decoded file contents, before they are applied to a trainer.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckpointData {
    pub config_text: String,
    pub tensors: BTreeMap<String, Tensor>,
    pub counters: BTreeMap<String, u64>,
    pub rng_seed: [u8; 32],
    pub rng_stream: u64,
    pub rng_word_pos: u128,
}

fn put_name(out: &mut Vec<u8>, name: &str) {
    out.extend((name.len() as u16).to_le_bytes());
    out.extend(name.as_bytes());
}

impl CheckpointData {
    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend(MAGIC);
        out.extend(VERSION.to_le_bytes());
        out.extend((self.config_text.len() as u32).to_le_bytes());
        out.extend(self.config_text.as_bytes());
        out.extend((self.tensors.len() as u32).to_le_bytes());
        for (name, t) in &self.tensors {
            put_name(&mut out, name);
            out.push(t.shape.len() as u8);
            for d in &t.shape {
                out.extend(d.to_le_bytes());
            }
            for v in &t.data {
                out.extend(v.to_le_bytes());
            }
        }
        out.extend((self.counters.len() as u32).to_le_bytes());
        for (name, v) in &self.counters {
            put_name(&mut out, name);
            out.extend(v.to_le_bytes());
        }
        out.extend(self.rng_seed);
        out.extend(self.rng_stream.to_le_bytes());
        out.extend(self.rng_word_pos.to_le_bytes());
        let sum = fnv1a64(&out);
        out.extend(sum.to_le_bytes());
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < MAGIC.len() + 4 + 8 {
            return Err(Error::Checkpoint(format!("file too short ({} bytes)", bytes.len())));
        }
        if &bytes[..8] != MAGIC {
            return Err(Error::Checkpoint("not a checkpoint file (bad magic)".into()));
        }
        let version = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
        if version != VERSION {
            return Err(Error::Checkpoint(format!(
                "unsupported checkpoint version {version} (this build reads {VERSION})"
            )));
        }
        let (body, tail) = bytes.split_at(bytes.len() - 8);
        let stored = u64::from_le_bytes(tail.try_into().unwrap());
        if fnv1a64(body) != stored {
            return Err(Error::Checkpoint("checksum mismatch; file is corrupted".into()));
        }
        let mut r = Reader { buf: body, pos: 12 };
        let cfg_len = r.u32()? as usize;
        let config_text = String::from_utf8(r.take(cfg_len)?.to_vec())
            .map_err(|_| Error::Checkpoint("config text is not UTF-8".into()))?;
        let mut tensors = BTreeMap::new();
        for _ in 0..r.u32()? {
            let name = r.name()?;
            let ndim = r.take(1)?[0] as usize;
            let shape = (0..ndim).map(|_| r.u64()).collect::<Result<Vec<_>>>()?;
            let n = shape
                .iter()
                .try_fold(1u64, |a, &d| a.checked_mul(d))
                .filter(|&n| n <= (r.remaining() / 8) as u64)
                .ok_or_else(|| Error::Checkpoint(format!("tensor {name} larger than the file")))?;
            let data = (0..n).map(|_| r.u64().map(f64::from_bits)).collect::<Result<Vec<_>>>()?;
            tensors.insert(name, Tensor { shape, data });
        }
        let mut counters = BTreeMap::new();
        for _ in 0..r.u32()? {
            let name = r.name()?;
            counters.insert(name, r.u64()?);
        }
        let rng_seed: [u8; 32] = r.take(32)?.try_into().unwrap();
        let rng_stream = r.u64()?;
        let rng_word_pos = u128::from_le_bytes(r.take(16)?.try_into().unwrap());
        if r.remaining() != 0 {
            return Err(Error::Checkpoint(format!("{} unexpected trailing bytes", r.remaining())));
        }
        Ok(Self {
            config_text,
            tensors,
            counters,
            rng_seed,
            rng_stream,
            rng_word_pos,
        })
    }

    fn tensor(&self, name: &str, len: usize) -> Result<&[f64]> {
        let t = self
            .tensors
            .get(name)
            .ok_or_else(|| Error::Checkpoint(format!("missing tensor {name}")))?;
        if t.shape != [len as u64] {
            return Err(Error::Checkpoint(format!(
                "tensor {name} has shape {:?}, model expects [{len}]",
                t.shape
            )));
        }
        Ok(&t.data)
    }

    fn counter(&self, name: &str) -> Result<u64> {
        self.counters
            .get(name)
            .copied()
            .ok_or_else(|| Error::Checkpoint(format!("missing counter {name}")))
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn remaining(&self) -> usize {
        self.buf.len() - self.pos
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if n > self.remaining() {
            return Err(Error::Checkpoint(format!("truncated at byte {}", self.pos)));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn name(&mut self) -> Result<String> {
        let n = u16::from_le_bytes(self.take(2)?.try_into().unwrap()) as usize;
        String::from_utf8(self.take(n)?.to_vec()).map_err(|_| Error::Checkpoint("name is not UTF-8".into()))
    }
}

fn vec_tensor(v: &[f64]) -> Tensor {
    Tensor {
        shape: vec![v.len() as u64],
        data: v.to_vec(),
    }
}

fn adam_tensors(out: &mut BTreeMap<String, Tensor>, group: &str, s: &AdamState<f64>) {
    out.insert(format!("adam.{group}.m"), vec_tensor(&s.m));
    out.insert(format!("adam.{group}.v"), vec_tensor(&s.v));
}

/// Snapshot of `trainer` plus the dataset spec it was trained against.
pub fn snapshot(trainer: &Trainer, data: &DatasetSpec) -> CheckpointData {
    let run = RunConfig {
        train: trainer.config.clone(),
        data: data.clone(),
    };
    let mut tensors = BTreeMap::new();
    tensors.insert("encoder".into(), vec_tensor(trainer.generator.encoder.params()));
    tensors.insert("circuit".into(), vec_tensor(trainer.generator.circuit.angles()));
    tensors.insert("critic".into(), vec_tensor(trainer.critic.params()));
    adam_tensors(&mut tensors, "critic", &trainer.adam_critic);
    adam_tensors(&mut tensors, "encoder", &trainer.adam_encoder);
    adam_tensors(&mut tensors, "circuit", &trainer.adam_circuit);

    let c = &trainer.counters;
    let mut counters = BTreeMap::new();
    let mut put = |k: &str, v: u64| {
        counters.insert(k.to_string(), v);
    };
    put("epoch", trainer.epoch);
    put("adam.critic.step", trainer.adam_critic.step);
    put("adam.encoder.step", trainer.adam_encoder.step);
    put("adam.circuit.step", trainer.adam_circuit.step);
    put("steps.critic", c.critic_steps);
    put("steps.generator", c.generator_steps);
    for (name, g) in [("critic", c.critic), ("encoder", c.encoder), ("circuit", c.circuit)] {
        put(&format!("updates.{name}.steps"), g.steps);
        put(&format!("updates.{name}.base_lr_bits"), g.base_lr.to_bits());
    }
    put("view.canvas", trainer.view.canvas as u64);
    put("view.height", trainer.view.window.map_or(0, |w| w.height as u64));
    put("view.width", trainer.view.window.map_or(0, |w| w.width as u64));

    CheckpointData {
        config_text: run.to_text(),
        tensors,
        counters,
        rng_seed: trainer.rng.get_seed(),
        rng_stream: trainer.rng.get_stream(),
        rng_word_pos: trainer.rng.get_word_pos(),
    }
}

/// Writes a checkpoint atomically: a temporary sibling file, then a rename.
pub fn save_checkpoint(trainer: &Trainer, data: &DatasetSpec, path: &Path) -> Result<()> {
    let bytes = snapshot(trainer, data).encode();
    let tmp = path.with_extension("tmp");
    {
        let mut f = fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
        f.write_all(&bytes).map_err(|e| Error::io(&tmp, e))?;
        f.sync_all().map_err(|e| Error::io(&tmp, e))?;
    }
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

pub fn read_checkpoint(path: &Path) -> Result<CheckpointData> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    CheckpointData::decode(&bytes).map_err(|e| match e {
        Error::Checkpoint(m) => Error::Checkpoint(format!("{}: {m}", path.display())),
        other => other,
    })
}

fn view_of(ck: &CheckpointData) -> Result<CriticView> {
    let canvas = ck.counter("view.canvas")? as usize;
    let (h, w) = (ck.counter("view.height")? as usize, ck.counter("view.width")? as usize);
    Ok(if h == 0 || w == 0 {
        CriticView::full(canvas)
    } else {
        CriticView {
            canvas,
            window: Some(CenteredRegion::new(canvas, h, w)),
        }
    })
}

/// Builds a trainer from the checkpoint contents, validating every shape.
pub fn trainer_from(ck: &CheckpointData) -> Result<(Trainer, RunConfig)> {
    let run = RunConfig::from_text(&ck.config_text)?;
    let mut t = Trainer::new(run.train.clone(), view_of(ck)?)?;
    let n = t.generator.encoder.params().len();
    t.generator.encoder.params_mut().copy_from_slice(ck.tensor("encoder", n)?);
    t.generator
        .circuit
        .set_angles(ck.tensor("circuit", t.generator.circuit.angles().len())?)?;
    let n = t.critic.params().len();
    t.critic.params_mut().copy_from_slice(ck.tensor("critic", n)?);
    for (group, state) in [
        ("critic", &mut t.adam_critic),
        ("encoder", &mut t.adam_encoder),
        ("circuit", &mut t.adam_circuit),
    ] {
        let len = state.len();
        state.m.copy_from_slice(ck.tensor(&format!("adam.{group}.m"), len)?);
        state.v.copy_from_slice(ck.tensor(&format!("adam.{group}.v"), len)?);
        state.step = ck.counter(&format!("adam.{group}.step"))?;
    }
    let updates = |name: &str| -> Result<GroupUpdates> {
        Ok(GroupUpdates {
            steps: ck.counter(&format!("updates.{name}.steps"))?,
            base_lr: f64::from_bits(ck.counter(&format!("updates.{name}.base_lr_bits"))?),
        })
    };
    t.counters = StepCounters {
        critic_steps: ck.counter("steps.critic")?,
        generator_steps: ck.counter("steps.generator")?,
        critic: updates("critic")?,
        encoder: updates("encoder")?,
        circuit: updates("circuit")?,
    };
    t.epoch = ck.counter("epoch")?;
    let mut rng = ChaCha8Rng::from_seed(ck.rng_seed);
    rng.set_stream(ck.rng_stream);
    rng.set_word_pos(ck.rng_word_pos);
    t.rng = rng;
    Ok((t, run))
}

pub fn load_checkpoint(path: &Path) -> Result<(Trainer, RunConfig)> {
    trainer_from(&read_checkpoint(path)?)
}

/// Replaces `trainer`'s state with the checkpoint at `path`. The checkpoint
/// must describe the same architecture; on any error `trainer` is unchanged.
pub fn restore_checkpoint(trainer: &mut Trainer, path: &Path) -> Result<()> {
    let (loaded, _) = load_checkpoint(path)?;
    let same_shape = loaded.generator.encoder.params().len() == trainer.generator.encoder.params().len()
        && loaded.generator.circuit.angles().len() == trainer.generator.circuit.angles().len()
        && loaded.critic.params().len() == trainer.critic.params().len()
        && loaded.view == trainer.view;
    if !same_shape {
        return Err(Error::Checkpoint(format!(
            "{}: architecture differs from the running model",
            path.display()
        )));
    }
    *trainer = loaded;
    Ok(())
}

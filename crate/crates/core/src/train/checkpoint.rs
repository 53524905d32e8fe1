//! Binary checkpoint format, little-endian throughout:
//!
//! ```text
//! magic        b"GGCK"
//! version      u32            (FORMAT_VERSION)
//! scalar       u8             (32 or 64, bit width of every stored value)
//! config       u32 len + UTF-8 JSON of TrainConfig
//! step         u64            completed steps
//! epoch        u64            data cursor: epoch of the next batch
//! batch_index  u64            data cursor: index of the next batch in that epoch
//! seed         u64            seed of the batch-order streams
//! params       u32 count, then per tensor:
//!                u32 len + UTF-8 name, u8 trainable, u32 ndim, u64 dims…, values
//! g_opt, d_opt each: u64 t, u32 count, then per slot: m tensor, v tensor
//!                (tensors as above, named "m"/"v", trainable = 1)
//! ```
//!
//! The batch order is a pure function of `(seed, epoch, batch_index)`, so the three
//! cursor fields are the whole random state of a run.

use std::io::{Cursor, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian as LE, ReadBytesExt, WriteBytesExt};
use ndarray::{ArrayD, IxDyn};

use super::config::TrainConfig;
use super::optim::Adam;
use super::step::TrainState;
use crate::error::{Error, Result};
use crate::model::Networks;
use crate::nn::Parameterized;
use crate::scalar::Scalar;

pub const MAGIC: &[u8; 4] = b"GGCK";
pub const FORMAT_VERSION: u32 = 1;

fn corrupt(msg: impl Into<String>) -> Error {
    Error::CorruptCheckpoint(msg.into())
}

fn put_str(out: &mut Vec<u8>, s: &str) {
    out.write_u32::<LE>(s.len() as u32).expect("vec write");
    out.extend_from_slice(s.as_bytes());
}

fn put_tensor<T: Scalar>(out: &mut Vec<u8>, name: &str, trainable: bool, a: &ArrayD<T>) {
    put_str(out, name);
    out.push(trainable as u8);
    out.write_u32::<LE>(a.ndim() as u32).expect("vec write");
    for &d in a.shape() {
        out.write_u64::<LE>(d as u64).expect("vec write");
    }
    for &v in a.iter() {
        v.write_le(out);
    }
}

struct Reader<'a>(Cursor<&'a [u8]>);

impl Reader<'_> {
    fn u8(&mut self) -> Result<u8> {
        self.0.read_u8().map_err(|_| corrupt("truncated file"))
    }
    fn u32(&mut self) -> Result<u32> {
        self.0.read_u32::<LE>().map_err(|_| corrupt("truncated file"))
    }
    fn u64(&mut self) -> Result<u64> {
        self.0.read_u64::<LE>().map_err(|_| corrupt("truncated file"))
    }
    fn bytes(&mut self, n: usize) -> Result<Vec<u8>> {
        let remaining = self.0.get_ref().len() - self.0.position() as usize;
        if n > remaining {
            return Err(corrupt("truncated file"));
        }
        let mut buf = vec![0; n];
        self.0.read_exact(&mut buf).map_err(|_| corrupt("truncated file"))?;
        Ok(buf)
    }
    fn string(&mut self) -> Result<String> {
        let n = self.u32()? as usize;
        String::from_utf8(self.bytes(n)?).map_err(|_| corrupt("invalid UTF-8 string"))
    }
    fn tensor<T: Scalar>(&mut self) -> Result<(String, bool, ArrayD<T>)> {
        let name = self.string()?;
        let trainable = self.u8()? != 0;
        let ndim = self.u32()? as usize;
        let dims = (0..ndim).map(|_| self.u64().map(|d| d as usize)).collect::<Result<Vec<_>>>()?;
        let len: usize = dims.iter().product();
        let raw = self.bytes(len * T::BYTES)?;
        let values = raw.chunks_exact(T::BYTES).map(T::read_le).collect();
        let a = ArrayD::from_shape_vec(IxDyn(&dims), values).map_err(|_| corrupt(format!("bad shape for {name}")))?;
        Ok((name, trainable, a))
    }
}

fn put_adam<T: Scalar>(out: &mut Vec<u8>, opt: &Adam<T>) {
    out.write_u64::<LE>(opt.t).expect("vec write");
    out.write_u32::<LE>(opt.m.len() as u32).expect("vec write");
    for (m, v) in opt.m.iter().zip(&opt.v) {
        put_tensor(out, "m", true, m);
        put_tensor(out, "v", true, v);
    }
}

fn read_adam<T: Scalar>(r: &mut Reader, into: &mut Adam<T>) -> Result<()> {
    into.t = r.u64()?;
    let n = r.u32()? as usize;
    if n != into.m.len() {
        return Err(corrupt(format!("optimizer has {n} slots, model needs {}", into.m.len())));
    }
    for i in 0..n {
        for (which, slot) in [("m", &mut into.m[i]), ("v", &mut into.v[i])] {
            let (name, _, a) = r.tensor::<T>()?;
            if name != which || a.shape() != slot.shape() {
                return Err(corrupt(format!("optimizer slot {i} ({which}) mismatch")));
            }
            *slot = a;
        }
    }
    Ok(())
}

/// Serializes the full state.
pub fn encode_checkpoint<T: Scalar>(state: &TrainState<T>) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.write_u32::<LE>(FORMAT_VERSION).expect("vec write");
    out.push(T::TAG);
    put_str(&mut out, &serde_json::to_string(&state.config).expect("config serializes"));
    for v in [state.step, state.epoch, state.batch_index, state.config.seed] {
        out.write_u64::<LE>(v).expect("vec write");
    }
    let mut tensors = Vec::new();
    state.nets.visit("", &mut |name, p| tensors.push((name.to_string(), p.trainable, p.value.clone())));
    out.write_u32::<LE>(tensors.len() as u32).expect("vec write");
    for (name, trainable, a) in &tensors {
        put_tensor(&mut out, name, *trainable, a);
    }
    put_adam(&mut out, &state.g_opt);
    put_adam(&mut out, &state.d_opt);
    out
}

pub fn decode_checkpoint<T: Scalar>(bytes: &[u8]) -> Result<TrainState<T>> {
    let mut r = Reader(Cursor::new(bytes));
    if r.bytes(4).ok().as_deref() != Some(&MAGIC[..]) {
        return Err(corrupt("not a checkpoint file"));
    }
    let version = r.u32()?;
    if version != FORMAT_VERSION {
        return Err(corrupt(format!("format version {version}, expected {FORMAT_VERSION}")));
    }
    let tag = r.u8()?;
    if tag != T::TAG {
        return Err(corrupt(format!("stored as f{tag}, requested f{}", T::TAG)));
    }
    let config: TrainConfig =
        serde_json::from_str(&r.string()?).map_err(|e| corrupt(format!("config echo: {e}")))?;
    let mut state = TrainState::<T>::new(config).map_err(|e| corrupt(format!("config echo: {e}")))?;
    state.step = r.u64()?;
    state.epoch = r.u64()?;
    state.batch_index = r.u64()?;
    if r.u64()? != state.config.seed {
        return Err(corrupt("seed field disagrees with config echo"));
    }
    let n = r.u32()? as usize;
    let mut stored = Vec::with_capacity(n);
    for _ in 0..n {
        stored.push(r.tensor::<T>()?);
    }
    let mut it = stored.into_iter();
    let mut err = None;
    fill(&mut state.nets, &mut |name, trainable, slot| {
        match it.next() {
            Some((n, t, a)) if n == name && t == trainable && a.shape() == slot.shape() => *slot = a,
            Some((n, ..)) => {
                err.get_or_insert_with(|| corrupt(format!("tensor {n} does not match model tensor {name}")));
            }
            None => {
                err.get_or_insert_with(|| corrupt(format!("missing tensor {name}")));
            }
        };
    });
    if let Some(e) = err {
        return Err(e);
    }
    if it.next().is_some() {
        return Err(corrupt("extra tensors"));
    }
    read_adam(&mut r, &mut state.g_opt)?;
    read_adam(&mut r, &mut state.d_opt)?;
    if (r.0.position() as usize) != bytes.len() {
        return Err(corrupt("trailing bytes"));
    }
    Ok(state)
}

fn fill<T: Scalar>(nets: &mut Networks<T>, f: &mut dyn FnMut(&str, bool, &mut ArrayD<T>)) {
    nets.visit_mut("", &mut |name, p| f(name, p.trainable, &mut p.value));
}

/// Writes to a sibling temporary file and renames it over `path`.
pub fn save_checkpoint<T: Scalar>(state: &TrainState<T>, path: &Path) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    let tmp = path.with_extension("tmp");
    {
        let mut f = std::fs::File::create(&tmp)?;
        f.write_all(&encode_checkpoint(state))?;
        f.sync_all()?;
    }
    std::fs::rename(&tmp, path)?;
    Ok(())
}

pub fn load_checkpoint<T: Scalar>(path: &Path) -> Result<TrainState<T>> {
    if !path.is_file() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    decode_checkpoint(&std::fs::read(path)?)
}

//! Reflectance model files.
//!
//! Binary layout, all integers and floats little-endian:
//!
//! ```text
//! magic            8 bytes  "TACSIMNN"
//! version          u32
//! layer count      u32      n, then n x u32 layer widths (input .. output)
//! feature spec     u32 length + UTF-8 text
//! seed             u64
//! tensors          f32:     input mean, input std,
//!                           per hidden layer: weights (out x in), bn mean, var, scale, shift,
//!                           output weights (3 x in), output bias,
//!                           target mean, target std
//! ```
//!
//! A text manifest `<file>.manifest` records provenance of a trained model.

use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::optics::mlp::{
    BatchNormParams, HiddenLayer, OutputLayer, ReflectanceModel, INPUT_FEATURES, OUTPUT_CHANNELS,
};
use crate::optics::TrainReport;

pub const MODEL_MAGIC: &[u8; 8] = b"TACSIMNN";
pub const MODEL_VERSION: u32 = 1;
pub const FEATURE_SPEC: &str = "dHdx,dHdy,x/width,y/height->r,g,b";
const MAX_WIDTH: u32 = 1 << 16;

pub fn encode_model(m: &ReflectanceModel) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MODEL_MAGIC);
    out.extend_from_slice(&MODEL_VERSION.to_le_bytes());
    let sizes = m.layer_sizes();
    out.extend_from_slice(&(sizes.len() as u32).to_le_bytes());
    for s in &sizes {
        out.extend_from_slice(&(*s as u32).to_le_bytes());
    }
    out.extend_from_slice(&(FEATURE_SPEC.len() as u32).to_le_bytes());
    out.extend_from_slice(FEATURE_SPEC.as_bytes());
    out.extend_from_slice(&m.seed.to_le_bytes());
    let mut put = |v: &[f32]| {
        for x in v {
            out.extend_from_slice(&x.to_le_bytes());
        }
    };
    put(&m.input_mean);
    put(&m.input_std);
    for l in &m.hidden {
        put(&l.weights);
        put(&l.norm.mean);
        put(&l.norm.var);
        put(&l.norm.scale);
        put(&l.norm.shift);
    }
    put(&m.output.weights);
    put(&m.output.bias);
    put(&m.target_mean);
    put(&m.target_std);
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|e| *e <= self.bytes.len())
            .ok_or_else(|| Error::Format(format!("model file truncated at byte {} (need {n} more)", self.pos)))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        let b = self.take(4)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }

    fn u64(&mut self) -> Result<u64> {
        let b = self.take(8)?;
        let mut a = [0u8; 8];
        a.copy_from_slice(b);
        Ok(u64::from_le_bytes(a))
    }

    fn f32s(&mut self, n: usize) -> Result<Vec<f32>> {
        let len = n.checked_mul(4).ok_or_else(|| Error::Format("tensor size overflow".into()))?;
        Ok(self.take(len)?.chunks_exact(4).map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]])).collect())
    }

    fn array<const N: usize>(&mut self) -> Result<[f32; N]> {
        let v = self.f32s(N)?;
        let mut a = [0.0; N];
        a.copy_from_slice(&v);
        Ok(a)
    }
}

pub fn decode_model(bytes: &[u8]) -> Result<ReflectanceModel> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(8)? != MODEL_MAGIC {
        return Err(Error::Format("not a reflectance model file (bad magic)".into()));
    }
    let version = r.u32()?;
    if version != MODEL_VERSION {
        return Err(Error::Format(format!("unsupported model version {version}")));
    }
    let n = r.u32()?;
    if !(2..=64).contains(&n) {
        return Err(Error::Format(format!("implausible layer count {n}")));
    }
    let mut sizes = Vec::with_capacity(n as usize);
    for _ in 0..n {
        let s = r.u32()?;
        if s == 0 || s > MAX_WIDTH {
            return Err(Error::Format(format!("implausible layer width {s}")));
        }
        sizes.push(s as usize);
    }
    if sizes[0] != INPUT_FEATURES || *sizes.last().unwrap() != OUTPUT_CHANNELS {
        return Err(Error::Format(format!(
            "layer sizes {sizes:?} do not match {INPUT_FEATURES} inputs and {OUTPUT_CHANNELS} outputs"
        )));
    }
    let spec_len = r.u32()? as usize;
    let spec = std::str::from_utf8(r.take(spec_len)?).map_err(|_| Error::Format("feature spec is not UTF-8".into()))?;
    if spec != FEATURE_SPEC {
        return Err(Error::Format(format!("unsupported feature spec `{spec}`")));
    }
    let seed = r.u64()?;
    let input_mean = r.array::<INPUT_FEATURES>()?;
    let input_std = r.array::<INPUT_FEATURES>()?;
    let mut hidden = Vec::new();
    for w in sizes.windows(2).take(sizes.len() - 2) {
        let (i, o) = (w[0], w[1]);
        hidden.push(HiddenLayer {
            inputs: i,
            outputs: o,
            weights: r.f32s(i * o)?,
            norm: BatchNormParams { mean: r.f32s(o)?, var: r.f32s(o)?, scale: r.f32s(o)?, shift: r.f32s(o)? },
        });
    }
    let last_in = sizes[sizes.len() - 2];
    let output = OutputLayer {
        inputs: last_in,
        weights: r.f32s(last_in * OUTPUT_CHANNELS)?,
        bias: r.array::<OUTPUT_CHANNELS>()?,
    };
    let target_mean = r.array::<OUTPUT_CHANNELS>()?;
    let target_std = r.array::<OUTPUT_CHANNELS>()?;
    if r.pos != bytes.len() {
        return Err(Error::Format(format!("{} trailing bytes after model tensors", bytes.len() - r.pos)));
    }
    ReflectanceModel::new(input_mean, input_std, hidden, output, target_mean, target_std, seed)
}

pub fn manifest_path(model: &Path) -> PathBuf {
    let mut s = model.as_os_str().to_owned();
    s.push(".manifest");
    PathBuf::from(s)
}

pub fn manifest_text(m: &ReflectanceModel, report: Option<&TrainReport>) -> String {
    let sizes: Vec<String> = m.layer_sizes().iter().map(|s| s.to_string()).collect();
    let mut s = format!(
        "format = reflectance-mlp v{MODEL_VERSION}\nfeatures = {FEATURE_SPEC}\nlayer_sizes = {}\nseed = {}\n",
        sizes.join(","),
        m.seed
    );
    if let Some(r) = report {
        s.push_str(&format!(
            "dataset_sha256 = {}\ntrain_count = {}\nvalidation_count = {}\nanchor_count = {}\nepochs = {}\nbest_epoch = {}\nfirst_loss = {}\nfinal_loss = {}\nvalidation_rmse = {},{},{}\n",
            r.dataset_hash,
            r.train_count,
            r.validation_count,
            r.anchor_count,
            r.epoch_losses.len(),
            r.best_epoch,
            r.first_loss(),
            r.final_loss(),
            r.validation_rmse[0],
            r.validation_rmse[1],
            r.validation_rmse[2],
        ));
    }
    s
}

/// Writes the model and its manifest next to it.
pub fn write_model(m: &ReflectanceModel, path: &Path, report: Option<&TrainReport>) -> Result<()> {
    std::fs::write(path, encode_model(m))?;
    std::fs::write(manifest_path(path), manifest_text(m, report))?;
    Ok(())
}

pub fn read_model(path: &Path) -> Result<ReflectanceModel> {
    let bytes = std::fs::read(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::MissingFile {
            path: path.to_path_buf(),
            what: "reflectance model (train one with `tacsim calibrate optics`)".into(),
        },
        _ => Error::Io(e),
    })?;
    decode_model(&bytes)
}

//! Model configuration, weights, and the checkpoint format.
//!
//! Checkpoints are little-endian binary:
//!
//! ```text
//! b"S2VCKPT" version:u8
//! header_len:u32 header:JSON {"epoch":..,"config":{..}}
//! n_tensors:u32
//! repeated: name_len:u16 name rows:u64 cols:u64 data:f64 * rows*cols
//! ```
//!
//! Values are stored as raw IEEE-754 bits, so save/load is bit-exact.

use std::io::{Read, Write};

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{S2vError, MFCC_DIM};
use crate::rng;

pub const CHECKPOINT_MAGIC: &[u8; 7] = b"S2VCKPT";
pub const CHECKPOINT_VERSION: u8 = 1;
pub const INIT_RANGE: f64 = 0.08;

/// How the encoder summarizes a word before projection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pooling {
    /// Concatenate the last forward and last backward hidden states.
    FinalStates,
    /// Average the encoder outputs over valid frames.
    MeanPool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub embedding_dim: usize,
    /// Hidden size of each encoder direction.
    pub encoder_hidden: usize,
    pub window: usize,
    pub pooling: Pooling,
    /// One decoder for all offsets instead of one per offset.
    pub shared_decoder: bool,
    /// Also feed the embedding to the decoder at every step.
    pub feed_embedding: bool,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            embedding_dim: 50,
            encoder_hidden: 50,
            window: 3,
            pooling: Pooling::FinalStates,
            shared_decoder: false,
            feed_embedding: false,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<(), S2vError> {
        if self.embedding_dim == 0 || self.encoder_hidden == 0 {
            return Err(S2vError::InvalidConfig("layer sizes must be positive".into()));
        }
        if self.window == 0 {
            return Err(S2vError::InvalidConfig("window must be at least 1".into()));
        }
        Ok(())
    }

    pub fn n_decoders(&self) -> usize {
        if self.shared_decoder {
            1
        } else {
            2 * self.window
        }
    }

    /// Decoder serving context offset `offset` (nonzero, |offset| <= window).
    pub fn decoder_for(&self, offset: isize) -> usize {
        debug_assert!(offset != 0 && offset.unsigned_abs() <= self.window);
        if self.shared_decoder {
            return 0;
        }
        let w = self.window as isize;
        (if offset < 0 { w + offset } else { w + offset - 1 }) as usize
    }

    pub(crate) fn encoder_out(&self) -> usize {
        2 * self.encoder_hidden
    }

    pub(crate) fn decoder_input(&self) -> usize {
        MFCC_DIM + if self.feed_embedding { self.embedding_dim } else { 0 }
    }
}

/// Dot product with four fixed partial sums; the summation order depends
/// only on the length, so results are reproducible.
#[inline]
fn dot4(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0f64; 4];
    let ca = a.chunks_exact(4);
    let cb = b.chunks_exact(4);
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        for k in 0..4 {
            acc[k] += x[k] * y[k];
        }
    }
    let mut tail = 0.0;
    for (x, y) in ra.iter().zip(rb) {
        tail += x * y;
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Mat {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Mat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    /// `out += self * x`.
    #[inline]
    pub fn matvec_into(&self, x: &[f64], out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.cols);
        for (r, o) in out.iter_mut().enumerate() {
            *o += dot4(self.row(r), x);
        }
    }

    /// `out += selfᵀ * y`.
    #[inline]
    pub fn matvec_t_into(&self, y: &[f64], out: &mut [f64]) {
        debug_assert_eq!(y.len(), self.rows);
        for (r, &yr) in y.iter().enumerate() {
            if yr == 0.0 {
                continue;
            }
            for (o, a) in out.iter_mut().zip(self.row(r)) {
                *o += a * yr;
            }
        }
    }

    /// `self += y xᵀ`.
    #[inline]
    pub fn add_outer(&mut self, y: &[f64], x: &[f64]) {
        debug_assert_eq!(y.len(), self.rows);
        debug_assert_eq!(x.len(), self.cols);
        let cols = self.cols;
        for (r, &yr) in y.iter().enumerate() {
            if yr == 0.0 {
                continue;
            }
            for (w, xv) in self.data[r * cols..(r + 1) * cols].iter_mut().zip(x) {
                *w += yr * xv;
            }
        }
    }
}

/// Combined-gate LSTM: rows are the i, f, g, o blocks; columns are
/// `[input; hidden]`.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmWeights {
    pub w: Mat,
    pub b: Vec<f64>,
}

impl LstmWeights {
    pub fn zeros(input: usize, hidden: usize) -> Self {
        Self {
            w: Mat::zeros(4 * hidden, input + hidden),
            b: vec![0.0; 4 * hidden],
        }
    }

    pub fn hidden(&self) -> usize {
        self.b.len() / 4
    }

    pub fn input(&self) -> usize {
        self.w.cols - self.hidden()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecoderWeights {
    pub lstm: LstmWeights,
    /// Bilinear attention `score_s = hᵀ A e_s`; `embedding_dim × encoder_out`.
    pub attn: Mat,
    /// `13 × (embedding_dim + encoder_out)`.
    pub out_w: Mat,
    pub out_b: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub config: ModelConfig,
    pub enc_fwd: LstmWeights,
    pub enc_bwd: LstmWeights,
    pub proj_w: Mat,
    pub proj_b: Vec<f64>,
    pub decoders: Vec<DecoderWeights>,
}

impl ModelParams {
    pub fn zeros(config: &ModelConfig) -> Result<Self, S2vError> {
        config.validate()?;
        let h = config.encoder_hidden;
        let d = config.embedding_dim;
        let e = config.encoder_out();
        let decoder = DecoderWeights {
            lstm: LstmWeights::zeros(config.decoder_input(), d),
            attn: Mat::zeros(d, e),
            out_w: Mat::zeros(MFCC_DIM, d + e),
            out_b: vec![0.0; MFCC_DIM],
        };
        Ok(Self {
            config: config.clone(),
            enc_fwd: LstmWeights::zeros(MFCC_DIM, h),
            enc_bwd: LstmWeights::zeros(MFCC_DIM, h),
            proj_w: Mat::zeros(d, e),
            proj_b: vec![0.0; d],
            decoders: vec![decoder; config.n_decoders()],
        })
    }

    /// Uniform(-range, range) initialization in tensor order.
    pub fn init_uniform(config: &ModelConfig, range: f64, seed: u64) -> Result<Self, S2vError> {
        let mut p = Self::zeros(config)?;
        let mut r = rng::substream(seed, 0x1417);
        for (_, t) in p.tensors_mut() {
            for v in t.iter_mut() {
                *v = r.random_range(-range..=range);
            }
        }
        Ok(p)
    }

    pub fn init(config: &ModelConfig, seed: u64) -> Result<Self, S2vError> {
        Self::init_uniform(config, INIT_RANGE, seed)
    }

    pub fn zeros_like(&self) -> Self {
        let mut z = self.clone();
        z.fill(0.0);
        z
    }

    pub fn fill(&mut self, value: f64) {
        for (_, t) in self.tensors_mut() {
            t.iter_mut().for_each(|v| *v = value);
        }
    }

    /// `(name, rows, cols)` for every tensor, in canonical order.
    pub fn shapes(&self) -> Vec<(String, usize, usize)> {
        let mut out = Vec::new();
        let mut lstm = |name: &str, l: &LstmWeights| {
            out.push((format!("{name}.w"), l.w.rows, l.w.cols));
            out.push((format!("{name}.b"), l.b.len(), 1));
        };
        lstm("enc_fwd", &self.enc_fwd);
        lstm("enc_bwd", &self.enc_bwd);
        out.push(("proj.w".into(), self.proj_w.rows, self.proj_w.cols));
        out.push(("proj.b".into(), self.proj_b.len(), 1));
        for (k, d) in self.decoders.iter().enumerate() {
            out.push((format!("dec{k}.lstm.w"), d.lstm.w.rows, d.lstm.w.cols));
            out.push((format!("dec{k}.lstm.b"), d.lstm.b.len(), 1));
            out.push((format!("dec{k}.attn"), d.attn.rows, d.attn.cols));
            out.push((format!("dec{k}.out.w"), d.out_w.rows, d.out_w.cols));
            out.push((format!("dec{k}.out.b"), d.out_b.len(), 1));
        }
        out
    }

    pub fn tensors(&self) -> Vec<(String, &[f64])> {
        let mut v: Vec<&[f64]> = vec![
            &self.enc_fwd.w.data,
            &self.enc_fwd.b,
            &self.enc_bwd.w.data,
            &self.enc_bwd.b,
            &self.proj_w.data,
            &self.proj_b,
        ];
        for d in &self.decoders {
            v.extend([
                d.lstm.w.data.as_slice(),
                d.lstm.b.as_slice(),
                d.attn.data.as_slice(),
                d.out_w.data.as_slice(),
                d.out_b.as_slice(),
            ]);
        }
        self.shapes().into_iter().map(|s| s.0).zip(v).collect()
    }

    pub fn tensors_mut(&mut self) -> Vec<(String, &mut [f64])> {
        let names: Vec<String> = self.shapes().into_iter().map(|s| s.0).collect();
        let mut v: Vec<&mut [f64]> = vec![
            &mut self.enc_fwd.w.data,
            &mut self.enc_fwd.b,
            &mut self.enc_bwd.w.data,
            &mut self.enc_bwd.b,
            &mut self.proj_w.data,
            &mut self.proj_b,
        ];
        for d in &mut self.decoders {
            v.extend([
                d.lstm.w.data.as_mut_slice(),
                d.lstm.b.as_mut_slice(),
                d.attn.data.as_mut_slice(),
                d.out_w.data.as_mut_slice(),
                d.out_b.as_mut_slice(),
            ]);
        }
        names.into_iter().zip(v).collect()
    }

    pub fn n_params(&self) -> usize {
        self.tensors().iter().map(|(_, t)| t.len()).sum()
    }

    pub fn flatten(&self) -> Vec<f64> {
        self.tensors()
            .into_iter()
            .flat_map(|(_, t)| t.iter().copied())
            .collect()
    }

    pub fn set_flat(&mut self, flat: &[f64]) {
        let mut off = 0;
        for (_, t) in self.tensors_mut() {
            let n = t.len();
            t.copy_from_slice(&flat[off..off + n]);
            off += n;
        }
        assert_eq!(off, flat.len());
    }

    pub fn add_assign(&mut self, other: &ModelParams) {
        let src = other.tensors();
        for ((_, dst), (_, s)) in self.tensors_mut().into_iter().zip(src) {
            dst.iter_mut().zip(s).for_each(|(a, b)| *a += b);
        }
    }

    pub fn scale(&mut self, k: f64) {
        for (_, t) in self.tensors_mut() {
            t.iter_mut().for_each(|v| *v *= k);
        }
    }

    pub fn all_finite(&self) -> bool {
        self.tensors().iter().all(|(_, t)| t.iter().all(|v| v.is_finite()))
    }

    pub fn save_checkpoint<W: Write>(&self, epoch: usize, mut out: W) -> std::io::Result<()> {
        out.write_all(CHECKPOINT_MAGIC)?;
        out.write_all(&[CHECKPOINT_VERSION])?;
        let header = serde_json::to_vec(&CheckpointHeader {
            epoch,
            config: self.config.clone(),
        })
        .map_err(std::io::Error::other)?;
        out.write_all(&(header.len() as u32).to_le_bytes())?;
        out.write_all(&header)?;
        let shapes = self.shapes();
        out.write_all(&(shapes.len() as u32).to_le_bytes())?;
        for ((name, rows, cols), (_, data)) in shapes.into_iter().zip(self.tensors()) {
            out.write_all(&(name.len() as u16).to_le_bytes())?;
            out.write_all(name.as_bytes())?;
            out.write_all(&(rows as u64).to_le_bytes())?;
            out.write_all(&(cols as u64).to_le_bytes())?;
            for v in data {
                out.write_all(&v.to_le_bytes())?;
            }
        }
        Ok(())
    }

    /// Returns the parameters and the epoch stored in the header.
    pub fn load_checkpoint<R: Read>(mut input: R) -> Result<(Self, usize), S2vError> {
        let bad = |msg: String| S2vError::Format { line: 0, msg };
        let mut magic = [0u8; 8];
        input.read_exact(&mut magic)?;
        if &magic[..7] != CHECKPOINT_MAGIC {
            return Err(bad("not a checkpoint file".into()));
        }
        if magic[7] != CHECKPOINT_VERSION {
            return Err(bad(format!("unsupported checkpoint version {}", magic[7])));
        }
        let mut u32buf = [0u8; 4];
        input.read_exact(&mut u32buf)?;
        let mut header = vec![0u8; u32::from_le_bytes(u32buf) as usize];
        input.read_exact(&mut header)?;
        let header: CheckpointHeader = serde_json::from_slice(&header).map_err(|e| bad(format!("bad header: {e}")))?;
        let mut params = ModelParams::zeros(&header.config)?;
        let shapes = params.shapes();
        input.read_exact(&mut u32buf)?;
        if u32::from_le_bytes(u32buf) as usize != shapes.len() {
            return Err(bad("tensor count does not match configuration".into()));
        }
        for ((name, rows, cols), (_, data)) in shapes.into_iter().zip(params.tensors_mut()) {
            let mut u16buf = [0u8; 2];
            input.read_exact(&mut u16buf)?;
            let mut nbuf = vec![0u8; u16::from_le_bytes(u16buf) as usize];
            input.read_exact(&mut nbuf)?;
            let mut u64buf = [0u8; 8];
            input.read_exact(&mut u64buf)?;
            let r = u64::from_le_bytes(u64buf) as usize;
            input.read_exact(&mut u64buf)?;
            let c = u64::from_le_bytes(u64buf) as usize;
            if nbuf != name.as_bytes() || r != rows || c != cols {
                return Err(bad(format!("tensor `{name}` missing or misshapen")));
            }
            for v in data.iter_mut() {
                input.read_exact(&mut u64buf)?;
                *v = f64::from_le_bytes(u64buf);
            }
        }
        Ok((params, header.epoch))
    }
}

#[derive(Serialize, Deserialize)]
struct CheckpointHeader {
    epoch: usize,
    config: ModelConfig,
}

//! Forward pass, skip-gram reconstruction loss, and reverse-mode gradients.
//!
//! Encoder: forward and backward LSTMs over the valid frames of the center
//! word. Outputs `e_t = [h→_t; h←_t]`; the summary (final states or mean
//! pool) is projected affinely to the embedding.
//!
//! Decoder for context offset `o`: LSTM with `h_0 = embedding`, `c_0 = 0`,
//! input at step `t` the true frame `t-1` (zeros at `t = 0`, optionally
//! concatenated with the embedding). After each step, bilinear attention
//! `softmax_s(hᵀ A e_s)` over the encoder outputs gives a context vector,
//! and the frame estimate is `W [h; ctx] + b`.
//!
//! Per target the loss is the squared error summed over coefficients and
//! valid frames, divided by `13 * valid_len`. A sentence's loss is the mean
//! over its (center, context) targets, and a batch's loss is the mean over
//! sentences.

use rayon::prelude::*;

use super::corpus::{Frame, PaddedWord};
use super::lstm::{accumulate, step_backward, step_forward, StepCache};
use super::params::{DecoderWeights, ModelParams, Pooling};
use super::{S2vError, MFCC_DIM};

/// Sentences per gradient work unit. Fixed so the reduction order does not
/// depend on the thread count.
const GRAD_CHUNK: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossReport {
    pub loss: f64,
    pub n_targets: usize,
}

pub(crate) struct EncoderTrace {
    fwd: Vec<StepCache>,
    /// In processing order: `bwd[0]` consumed the last valid frame.
    bwd: Vec<StepCache>,
    outputs: Vec<Vec<f64>>,
    pooled: Vec<f64>,
    pub(crate) emb: Vec<f64>,
}

fn check_word(word: &PaddedWord) -> Result<(), S2vError> {
    if word.valid_len == 0 || word.valid_len > word.frames.len() {
        return Err(S2vError::Shape(format!(
            "valid_len {} outside 1..={}",
            word.valid_len,
            word.frames.len()
        )));
    }
    Ok(())
}

pub(crate) fn encode_trace(params: &ModelParams, word: &PaddedWord) -> Result<EncoderTrace, S2vError> {
    check_word(word)?;
    let cfg = &params.config;
    let h = cfg.encoder_hidden;
    let frames = word.valid();
    let t_len = frames.len();

    let mut fwd = Vec::with_capacity(t_len);
    let (mut hp, mut cp) = (vec![0.0; h], vec![0.0; h]);
    for x in frames {
        let s = step_forward(&params.enc_fwd, x, &hp, &cp);
        hp.clone_from(&s.h);
        cp.clone_from(&s.c);
        fwd.push(s);
    }
    let mut bwd = Vec::with_capacity(t_len);
    let (mut hp, mut cp) = (vec![0.0; h], vec![0.0; h]);
    for x in frames.iter().rev() {
        let s = step_forward(&params.enc_bwd, x, &hp, &cp);
        hp.clone_from(&s.h);
        cp.clone_from(&s.c);
        bwd.push(s);
    }
    let outputs: Vec<Vec<f64>> = (0..t_len)
        .map(|t| {
            let mut e = fwd[t].h.clone();
            e.extend_from_slice(&bwd[t_len - 1 - t].h);
            e
        })
        .collect();
    let pooled = match cfg.pooling {
        Pooling::FinalStates => {
            let mut s = fwd[t_len - 1].h.clone();
            s.extend_from_slice(&bwd[t_len - 1].h);
            s
        }
        Pooling::MeanPool => {
            let mut s = vec![0.0; 2 * h];
            for e in &outputs {
                s.iter_mut().zip(e).for_each(|(a, b)| *a += b);
            }
            s.iter_mut().for_each(|v| *v /= t_len as f64);
            s
        }
    };
    let mut emb = params.proj_b.clone();
    params.proj_w.matvec_into(&pooled, &mut emb);
    Ok(EncoderTrace {
        fwd,
        bwd,
        outputs,
        pooled,
        emb,
    })
}

/// Embedding of one padded word. Frames past `valid_len` are never read.
pub fn encode(params: &ModelParams, word: &PaddedWord) -> Result<Vec<f64>, S2vError> {
    Ok(encode_trace(params, word)?.emb)
}

fn encoder_backward(
    params: &ModelParams,
    trace: &EncoderTrace,
    d_emb: &[f64],
    mut d_out: Vec<Vec<f64>>,
    grad: &mut ModelParams,
) {
    let h = params.config.encoder_hidden;
    let t_len = trace.outputs.len();
    grad.proj_w.add_outer(d_emb, &trace.pooled);
    grad.proj_b.iter_mut().zip(d_emb).for_each(|(g, d)| *g += d);
    let mut d_pooled = vec![0.0; 2 * h];
    params.proj_w.matvec_t_into(d_emb, &mut d_pooled);

    let mut dh_fwd_last = vec![0.0; h];
    let mut dh_bwd_last = vec![0.0; h];
    match params.config.pooling {
        Pooling::FinalStates => {
            dh_fwd_last.copy_from_slice(&d_pooled[..h]);
            dh_bwd_last.copy_from_slice(&d_pooled[h..]);
        }
        Pooling::MeanPool => {
            let k = 1.0 / t_len as f64;
            for d in d_out.iter_mut() {
                d.iter_mut().zip(&d_pooled).for_each(|(a, b)| *a += b * k);
            }
        }
    }

    // Forward direction: step t produced e_t[..h].
    let mut dh = dh_fwd_last;
    let mut dc = vec![0.0; h];
    let mut dzs = Vec::with_capacity(t_len);
    for t in (0..t_len).rev() {
        dh.iter_mut().zip(&d_out[t][..h]).for_each(|(a, b)| *a += b);
        let (dz, dxh, dc_prev) = step_backward(&params.enc_fwd, &trace.fwd[t], &dh, &dc);
        dzs.push(dz);
        dh = dxh[MFCC_DIM..].to_vec();
        dc = dc_prev;
    }
    let xh: Vec<&[f64]> = trace.fwd.iter().rev().map(|c| c.xh.as_slice()).collect();
    accumulate(&mut grad.enc_fwd, &dzs, &xh);
    // Backward direction: processing step k produced e_{T-1-k}[h..].
    let mut dh = dh_bwd_last;
    let mut dc = vec![0.0; h];
    let mut dzs = Vec::with_capacity(t_len);
    for k in (0..t_len).rev() {
        let t = t_len - 1 - k;
        dh.iter_mut().zip(&d_out[t][h..]).for_each(|(a, b)| *a += b);
        let (dz, dxh, dc_prev) = step_backward(&params.enc_bwd, &trace.bwd[k], &dh, &dc);
        dzs.push(dz);
        dh = dxh[MFCC_DIM..].to_vec();
        dc = dc_prev;
    }
    let xh: Vec<&[f64]> = trace.bwd.iter().rev().map(|c| c.xh.as_slice()).collect();
    accumulate(&mut grad.enc_bwd, &dzs, &xh);
}

struct DecStep {
    lstm: StepCache,
    q: Vec<f64>,
    alpha: Vec<f64>,
    ctx: Vec<f64>,
    err: Vec<f64>,
}

fn decoder_input(prev: &Frame, emb: &[f64], feed: bool) -> Vec<f64> {
    let mut u = prev.to_vec();
    if feed {
        u.extend_from_slice(emb);
    }
    u
}

/// Returns per-step caches and the normalized squared error.
fn decode_forward(
    dec: &DecoderWeights,
    feed_embedding: bool,
    emb: &[f64],
    enc: &[Vec<f64>],
    target: &[Frame],
) -> (Vec<DecStep>, f64) {
    let d = emb.len();
    let mut steps = Vec::with_capacity(target.len());
    let mut h = emb.to_vec();
    let mut c = vec![0.0; d];
    let zero = [0.0; MFCC_DIM];
    let mut sq = 0.0;
    for t in 0..target.len() {
        let prev = if t == 0 { &zero } else { &target[t - 1] };
        let u = decoder_input(prev, emb, feed_embedding);
        let lstm = step_forward(&dec.lstm, &u, &h, &c);

        let mut q = vec![0.0; dec.attn.cols];
        dec.attn.matvec_t_into(&lstm.h, &mut q);
        let scores: Vec<f64> = enc.iter().map(|e| e.iter().zip(&q).map(|(a, b)| a * b).sum()).collect();
        let m = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut alpha: Vec<f64> = scores.iter().map(|s| (s - m).exp()).collect();
        let z: f64 = alpha.iter().sum();
        alpha.iter_mut().for_each(|a| *a /= z);
        let mut ctx = vec![0.0; q.len()];
        for (a, e) in alpha.iter().zip(enc) {
            ctx.iter_mut().zip(e).for_each(|(cv, ev)| *cv += a * ev);
        }

        let mut hc = lstm.h.clone();
        hc.extend_from_slice(&ctx);
        let mut out = dec.out_b.clone();
        dec.out_w.matvec_into(&hc, &mut out);
        let err: Vec<f64> = out.iter().zip(&target[t]).map(|(o, y)| o - y).collect();
        sq += err.iter().map(|e| e * e).sum::<f64>();

        h.clone_from(&lstm.h);
        c.clone_from(&lstm.c);
        steps.push(DecStep {
            lstm,
            q,
            alpha,
            ctx,
            err,
        });
    }
    let loss = sq / (MFCC_DIM * target.len()) as f64;
    (steps, loss)
}

/// Backpropagate `scale * target_loss`; accumulates into `grad`, `d_emb`
/// and `d_enc`.
#[allow(clippy::too_many_arguments)]
fn decode_backward(
    dec: &DecoderWeights,
    grad: &mut DecoderWeights,
    feed_embedding: bool,
    enc: &[Vec<f64>],
    steps: &[DecStep],
    scale: f64,
    d_emb: &mut [f64],
    d_enc: &mut [Vec<f64>],
) {
    let d = d_emb.len();
    let coef = scale * 2.0 / (MFCC_DIM * steps.len()) as f64;
    let mut dh_next = vec![0.0; d];
    let mut dc_next = vec![0.0; d];
    let mut dzs = Vec::with_capacity(steps.len());
    for st in steps.iter().rev() {
        let d_out: Vec<f64> = st.err.iter().map(|e| coef * e).collect();
        let mut hc = st.lstm.h.clone();
        hc.extend_from_slice(&st.ctx);
        grad.out_w.add_outer(&d_out, &hc);
        grad.out_b.iter_mut().zip(&d_out).for_each(|(g, v)| *g += v);
        let mut d_hc = vec![0.0; hc.len()];
        dec.out_w.matvec_t_into(&d_out, &mut d_hc);
        let (d_h_out, d_ctx) = d_hc.split_at(d);

        // ctx = sum_s alpha_s e_s
        let d_alpha: Vec<f64> = enc
            .iter()
            .map(|e| e.iter().zip(d_ctx).map(|(a, b)| a * b).sum())
            .collect();
        let dot: f64 = st.alpha.iter().zip(&d_alpha).map(|(a, b)| a * b).sum();
        let mut d_q = vec![0.0; st.q.len()];
        for (s, e) in enc.iter().enumerate() {
            let a = st.alpha[s];
            let d_score = a * (d_alpha[s] - dot);
            let de = &mut d_enc[s];
            for k in 0..e.len() {
                de[k] += a * d_ctx[k] + d_score * st.q[k];
                d_q[k] += d_score * e[k];
            }
        }
        // q = Aᵀ h
        grad.attn.add_outer(&st.lstm.h, &d_q);
        let mut dh: Vec<f64> = d_h_out.iter().zip(&dh_next).map(|(a, b)| a + b).collect();
        dec.attn.matvec_into(&d_q, &mut dh);

        let (dz, dxh, dc_prev) = step_backward(&dec.lstm, &st.lstm, &dh, &dc_next);
        dzs.push(dz);
        if feed_embedding {
            d_emb
                .iter_mut()
                .zip(&dxh[MFCC_DIM..MFCC_DIM + d])
                .for_each(|(a, b)| *a += b);
        }
        let in_len = dxh.len() - d;
        dh_next = dxh[in_len..].to_vec();
        dc_next = dc_prev;
    }
    let xh: Vec<&[f64]> = steps.iter().rev().map(|s| s.lstm.xh.as_slice()).collect();
    accumulate(&mut grad.lstm, &dzs, &xh);
    // h_0 is the embedding; c_0 is a constant.
    d_emb.iter_mut().zip(&dh_next).for_each(|(a, b)| *a += b);
}

fn targets(n: usize, window: usize) -> Vec<(usize, usize, isize)> {
    let mut out = Vec::new();
    for i in 0..n {
        for o in -(window as isize)..=(window as isize) {
            let j = i as isize + o;
            if o != 0 && j >= 0 && (j as usize) < n {
                out.push((i, j as usize, o));
            }
        }
    }
    out
}

fn check_window(params: &ModelParams, window: usize) -> Result<(), S2vError> {
    if window == 0 {
        return Err(S2vError::InvalidConfig("window must be at least 1".into()));
    }
    if window > params.config.window {
        return Err(S2vError::Shape(format!(
            "window {window} exceeds the model's {} decoders per side",
            params.config.window
        )));
    }
    Ok(())
}

/// Loss of one sentence; when `grad` is given, adds `scale * dLoss/dθ`.
fn sentence_pass(
    params: &ModelParams,
    sentence: &[PaddedWord],
    window: usize,
    scale: f64,
    mut grad: Option<&mut ModelParams>,
) -> Result<LossReport, S2vError> {
    if sentence.is_empty() {
        return Err(S2vError::EmptyInput("sentence has no words".into()));
    }
    let cfg = &params.config;
    let tg = targets(sentence.len(), window);
    if tg.is_empty() {
        sentence.iter().try_for_each(check_word)?;
        return Ok(LossReport {
            loss: 0.0,
            n_targets: 0,
        });
    }
    let traces: Vec<EncoderTrace> = sentence
        .iter()
        .map(|w| encode_trace(params, w))
        .collect::<Result<_, _>>()?;
    let per_target = 1.0 / tg.len() as f64;
    let mut d_emb: Vec<Vec<f64>> = Vec::new();
    let mut d_enc: Vec<Vec<Vec<f64>>> = Vec::new();
    if grad.is_some() {
        d_emb = traces.iter().map(|t| vec![0.0; t.emb.len()]).collect();
        d_enc = traces
            .iter()
            .map(|t| vec![vec![0.0; cfg.encoder_out()]; t.outputs.len()])
            .collect();
    }
    let mut total = 0.0;
    for &(i, j, o) in &tg {
        let k = cfg.decoder_for(o);
        let dec = &params.decoders[k];
        let tr = &traces[i];
        let (steps, loss) = decode_forward(dec, cfg.feed_embedding, &tr.emb, &tr.outputs, sentence[j].valid());
        total += loss;
        if let Some(g) = grad.as_deref_mut() {
            decode_backward(
                dec,
                &mut g.decoders[k],
                cfg.feed_embedding,
                &tr.outputs,
                &steps,
                scale * per_target,
                &mut d_emb[i],
                &mut d_enc[i],
            );
        }
    }
    if let Some(g) = grad {
        for ((tr, de), dx) in traces.iter().zip(d_emb).zip(d_enc) {
            encoder_backward(params, tr, &de, dx, g);
        }
    }
    Ok(LossReport {
        loss: total * per_target,
        n_targets: tg.len(),
    })
}

/// Mean reconstruction loss over every (center, context) pair within
/// `window` of one sentence. A one-word sentence has no targets and loss 0.
pub fn skipgram_loss(params: &ModelParams, sentence: &[PaddedWord], window: usize) -> Result<LossReport, S2vError> {
    check_window(params, window)?;
    sentence_pass(params, sentence, window, 0.0, None)
}

/// Mean of [`skipgram_loss`] over the batch.
pub fn batch_loss(params: &ModelParams, batch: &[Vec<PaddedWord>], window: usize) -> Result<f64, S2vError> {
    check_window(params, window)?;
    if batch.is_empty() {
        return Err(S2vError::EmptyInput("empty batch".into()));
    }
    let mut total = 0.0;
    for s in batch {
        total += sentence_pass(params, s, window, 0.0, None)?.loss;
    }
    Ok(total / batch.len() as f64)
}

/// Exact gradient of the batch-mean loss. Returns `(loss, gradient)`.
/// Work is split into fixed chunks whose partial sums are added in order,
/// so the result is bit-identical for any thread count.
pub fn grad(params: &ModelParams, batch: &[Vec<PaddedWord>], window: usize) -> Result<(f64, ModelParams), S2vError> {
    check_window(params, window)?;
    if batch.is_empty() {
        return Err(S2vError::EmptyInput("empty batch".into()));
    }
    let scale = 1.0 / batch.len() as f64;
    let partials: Vec<Result<(f64, ModelParams), S2vError>> = batch
        .par_chunks(GRAD_CHUNK)
        .map(|chunk| {
            let mut g = params.zeros_like();
            let mut loss = 0.0;
            for s in chunk {
                loss += sentence_pass(params, s, window, scale, Some(&mut g))?.loss;
            }
            Ok((loss, g))
        })
        .collect();
    let mut total = params.zeros_like();
    let mut loss = 0.0;
    for p in partials {
        let (l, g) = p?;
        loss += l;
        total.add_assign(&g);
    }
    let loss = loss * scale;
    if !loss.is_finite() {
        return Err(S2vError::Numerical(format!("batch loss is {loss}")));
    }
    if !total.all_finite() {
        return Err(S2vError::Numerical("gradient has non-finite entries".into()));
    }
    Ok((loss, total))
}

//! Single LSTM step, forward and backward.

use super::params::LstmWeights;

#[inline]
fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Everything the backward pass needs from one step.
#[derive(Debug, Clone)]
pub(crate) struct StepCache {
    /// `[x; h_prev]`
    pub xh: Vec<f64>,
    pub c_prev: Vec<f64>,
    /// Activated gates, i f g o blocks.
    pub gates: Vec<f64>,
    pub tanh_c: Vec<f64>,
    pub c: Vec<f64>,
    pub h: Vec<f64>,
}

pub(crate) fn step_forward(w: &LstmWeights, x: &[f64], h_prev: &[f64], c_prev: &[f64]) -> StepCache {
    let hid = w.hidden();
    debug_assert_eq!(x.len(), w.input());
    let mut xh = Vec::with_capacity(x.len() + hid);
    xh.extend_from_slice(x);
    xh.extend_from_slice(h_prev);

    let mut gates = w.b.clone();
    w.w.matvec_into(&xh, &mut gates);
    for (k, z) in gates.iter_mut().enumerate() {
        *z = if (2 * hid..3 * hid).contains(&k) {
            z.tanh()
        } else {
            sigmoid(*z)
        };
    }
    let (i, rest) = gates.split_at(hid);
    let (f, rest) = rest.split_at(hid);
    let (g, o) = rest.split_at(hid);
    let c: Vec<f64> = (0..hid).map(|k| f[k] * c_prev[k] + i[k] * g[k]).collect();
    let tanh_c: Vec<f64> = c.iter().map(|v| v.tanh()).collect();
    let h: Vec<f64> = (0..hid).map(|k| o[k] * tanh_c[k]).collect();
    StepCache {
        xh,
        c_prev: c_prev.to_vec(),
        gates,
        tanh_c,
        c,
        h,
    }
}

/// Given dL/dh and dL/dc for this step's outputs, return
/// `(dz, d[x; h_prev], dc_prev)` where `dz` is the gradient at the gate
/// pre-activations. Weight gradients are left to [`accumulate`].
pub(crate) fn step_backward(
    w: &LstmWeights,
    cache: &StepCache,
    dh: &[f64],
    dc: &[f64],
) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let hid = w.hidden();
    let g = &cache.gates;
    let mut dz = vec![0.0; 4 * hid];
    let mut dc_prev = vec![0.0; hid];
    for k in 0..hid {
        let (i, f, gg, o) = (g[k], g[hid + k], g[2 * hid + k], g[3 * hid + k]);
        let tc = cache.tanh_c[k];
        let dct = dc[k] + dh[k] * o * (1.0 - tc * tc);
        dz[k] = dct * gg * i * (1.0 - i);
        dz[hid + k] = dct * cache.c_prev[k] * f * (1.0 - f);
        dz[2 * hid + k] = dct * i * (1.0 - gg * gg);
        dz[3 * hid + k] = dh[k] * tc * o * (1.0 - o);
        dc_prev[k] = dct * f;
    }
    let mut dxh = vec![0.0; cache.xh.len()];
    w.w.matvec_t_into(&dz, &mut dxh);
    (dz, dxh, dc_prev)
}

/// `grad.w += Σ_t dz_t [x; h_prev]_tᵀ`, `grad.b += Σ_t dz_t`, summed row by
/// row in the order given so each gradient row stays in cache.
pub(crate) fn accumulate(grad: &mut LstmWeights, dz: &[Vec<f64>], xh: &[&[f64]]) {
    debug_assert_eq!(dz.len(), xh.len());
    let cols = grad.w.cols;
    for r in 0..grad.w.rows {
        let row = &mut grad.w.data[r * cols..(r + 1) * cols];
        let mut db = 0.0;
        for (d, x) in dz.iter().zip(xh) {
            let d = d[r];
            if d == 0.0 {
                continue;
            }
            db += d;
            for (w, xv) in row.iter_mut().zip(x.iter()) {
                *w += d * xv;
            }
        }
        grad.b[r] += db;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::speech2vec::params::Mat;

    #[test]
    fn zero_weights_keep_state_zero() {
        let w = LstmWeights::zeros(3, 2);
        let s = step_forward(&w, &[1.0, -2.0, 0.5], &[0.0; 2], &[0.0; 2]);
        // i = f = o = 0.5, g = 0 -> c = 0, h = 0
        assert_eq!(s.c, [0.0, 0.0]);
        assert_eq!(s.h, [0.0, 0.0]);
        assert_eq!(&s.gates[..2], &[0.5, 0.5]);
    }

    #[test]
    fn backward_matches_finite_difference() {
        let mut w = LstmWeights::zeros(2, 2);
        let vals = [0.3, -0.2, 0.1, 0.5, -0.4, 0.25, 0.2, -0.1];
        for (k, v) in w.w.data.iter_mut().enumerate() {
            *v = vals[k % vals.len()] * (1.0 + k as f64 / 10.0);
        }
        w.b = vec![0.1, -0.1, 0.2, 0.0, 0.05, 0.3, -0.2, 0.15];
        let x = [0.7, -1.1];
        let h0 = [0.2, -0.3];
        let c0 = [0.4, 0.1];
        // L = sum(h) + 0.5 * sum(c)
        let loss = |w: &LstmWeights, x: &[f64], h0: &[f64], c0: &[f64]| {
            let s = step_forward(w, x, h0, c0);
            s.h.iter().sum::<f64>() + 0.5 * s.c.iter().sum::<f64>()
        };
        let s = step_forward(&w, &x, &h0, &c0);
        let mut grad = LstmWeights {
            w: Mat::zeros(8, 4),
            b: vec![0.0; 8],
        };
        let (dz, dxh, dc0) = step_backward(&w, &s, &[1.0, 1.0], &[0.5, 0.5]);
        accumulate(&mut grad, std::slice::from_ref(&dz), &[&s.xh]);
        assert_eq!(grad.b, dz);
        let eps = 1e-6;
        for k in 0..w.w.data.len() {
            let mut p = w.clone();
            p.w.data[k] += eps;
            let mut m = w.clone();
            m.w.data[k] -= eps;
            let fd = (loss(&p, &x, &h0, &c0) - loss(&m, &x, &h0, &c0)) / (2.0 * eps);
            assert!((fd - grad.w.data[k]).abs() < 1e-8, "w[{k}]");
        }
        for k in 0..2 {
            let mut xp = x;
            xp[k] += eps;
            let mut xm = x;
            xm[k] -= eps;
            let fd = (loss(&w, &xp, &h0, &c0) - loss(&w, &xm, &h0, &c0)) / (2.0 * eps);
            assert!((fd - dxh[k]).abs() < 1e-8);
            let mut cp = c0;
            cp[k] += eps;
            let mut cm = c0;
            cm[k] -= eps;
            let fd = (loss(&w, &x, &h0, &cp) - loss(&w, &x, &h0, &cm)) / (2.0 * eps);
            assert!((fd - dc0[k]).abs() < 1e-8);
        }
    }
}

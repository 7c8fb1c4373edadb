//! Forward and hand-derived backward passes for every layer the MLN and
//! the classifier need, plus a finite-difference gradient checker.
//!
//! Everything is a pure function over [`Tensor`]s in 64-bit precision;
//! the networks are tiny, so exactness beats speed and keeps the gradient
//! checks tight.

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// `out[n,o] = Σ_i x[n,i]·w[i,o] + b[o]` for `x: [B,I]`, `w: [I,O]`, `b: [O]`.
pub fn dense_forward(x: &Tensor, w: &Tensor, b: &Tensor) -> Result<Tensor> {
    let (bsz, i) = (x.rows(), x.cols());
    let o = w.cols();
    if w.rows() != i || b.shape() != [o] {
        return Err(Error::Shape(format!(
            "dense: x {:?} w {:?} b {:?}",
            x.shape(),
            w.shape(),
            b.shape()
        )));
    }
    let mut out = Tensor::zeros(vec![bsz, o]);
    for n in 0..bsz {
        let xr = x.row(n);
        let or = &mut out.data_mut()[n * o..(n + 1) * o];
        or.copy_from_slice(b.data());
        for (xi, wr) in xr.iter().zip(w.data().chunks_exact(o)) {
            for (ov, wv) in or.iter_mut().zip(wr) {
                *ov += xi * wv;
            }
        }
    }
    Ok(out)
}

/// Gradients of the dense layer given upstream `d_out: [B,O]`.
///
/// Returns `(dX, dW, dB)` with
/// `dW[i,o] = Σ_n x[n,i]·dOut[n,o]`, `dB[o] = Σ_n dOut[n,o]`,
/// `dX[n,i] = Σ_o dOut[n,o]·w[i,o]`.
pub fn dense_backward(x: &Tensor, w: &Tensor, d_out: &Tensor) -> Result<(Tensor, Tensor, Tensor)> {
    let (bsz, i) = (x.rows(), x.cols());
    let o = w.cols();
    if w.rows() != i || d_out.shape() != [bsz, o] {
        return Err(Error::Shape(format!(
            "dense backward: x {:?} w {:?} dOut {:?}",
            x.shape(),
            w.shape(),
            d_out.shape()
        )));
    }
    let mut dx = Tensor::zeros(vec![bsz, i]);
    let mut dw = Tensor::zeros(vec![i, o]);
    let mut db = Tensor::zeros(vec![o]);
    for n in 0..bsz {
        let dr = d_out.row(n);
        let xr = x.row(n);
        for (dbv, dv) in db.data_mut().iter_mut().zip(dr) {
            *dbv += dv;
        }
        for (ii, &xv) in xr.iter().enumerate() {
            let dwr = &mut dw.data_mut()[ii * o..(ii + 1) * o];
            for (dwv, dv) in dwr.iter_mut().zip(dr) {
                *dwv += xv * dv;
            }
            let wr = &w.data()[ii * o..(ii + 1) * o];
            let mut acc = 0.0;
            for (dv, wv) in dr.iter().zip(wr) {
                acc += dv * wv;
            }
            dx.data_mut()[n * i + ii] = acc;
        }
    }
    Ok((dx, dw, db))
}

/// 1-D convolution over the last axis with zero padding `(K−1)/2`,
/// so the output length equals the input length.
///
/// `x: [B,Cin,L]`, `k: [Cout,Cin,K]`, `b: [Cout]` → `[B,Cout,L]`.
pub fn conv1d_forward(x: &Tensor, k: &Tensor, b: &Tensor) -> Result<Tensor> {
    let (bsz, cin, l) = (x.shape()[0], x.shape()[1], x.shape()[2]);
    let (cout, kcin, kw) = (k.shape()[0], k.shape()[1], k.shape()[2]);
    if kw % 2 == 0 {
        return Err(Error::Shape(format!("conv1d: kernel width {kw} must be odd")));
    }
    if kcin != cin || b.shape() != [cout] {
        return Err(Error::Shape(format!(
            "conv1d: x {:?} k {:?} b {:?}",
            x.shape(),
            k.shape(),
            b.shape()
        )));
    }
    let pad = (kw - 1) / 2;
    let mut out = Tensor::zeros(vec![bsz, cout, l]);
    for n in 0..bsz {
        for co in 0..cout {
            for pos in 0..l {
                let mut acc = b.data()[co];
                for ci in 0..cin {
                    for kk in 0..kw {
                        // x_padded[pos + kk] maps to x[pos + kk - pad]
                        let src = pos + kk;
                        if src >= pad && src - pad < l {
                            acc += x.at3(n, ci, src - pad) * k.at3(co, ci, kk);
                        }
                    }
                }
                let idx = out.idx3(n, co, pos);
                out.data_mut()[idx] = acc;
            }
        }
    }
    Ok(out)
}

/// Adjoint of [`conv1d_forward`] under the same padding.
pub fn conv1d_backward(
    x: &Tensor,
    k: &Tensor,
    d_out: &Tensor,
) -> Result<(Tensor, Tensor, Tensor)> {
    let (bsz, cin, l) = (x.shape()[0], x.shape()[1], x.shape()[2]);
    let (cout, _, kw) = (k.shape()[0], k.shape()[1], k.shape()[2]);
    if d_out.shape() != [bsz, cout, l] {
        return Err(Error::Shape(format!(
            "conv1d backward: x {:?} k {:?} dOut {:?}",
            x.shape(),
            k.shape(),
            d_out.shape()
        )));
    }
    let pad = (kw - 1) / 2;
    let mut dx = Tensor::zeros(vec![bsz, cin, l]);
    let mut dk = Tensor::zeros(vec![cout, cin, kw]);
    let mut db = Tensor::zeros(vec![cout]);
    for n in 0..bsz {
        for co in 0..cout {
            for pos in 0..l {
                let g = d_out.at3(n, co, pos);
                db.data_mut()[co] += g;
                for ci in 0..cin {
                    for kk in 0..kw {
                        let src = pos + kk;
                        if src >= pad && src - pad < l {
                            let xi = src - pad;
                            let dki = dk.idx3(co, ci, kk);
                            dk.data_mut()[dki] += x.at3(n, ci, xi) * g;
                            let dxi = dx.idx3(n, ci, xi);
                            dx.data_mut()[dxi] += k.at3(co, ci, kk) * g;
                        }
                    }
                }
            }
        }
    }
    Ok((dx, dk, db))
}

/// Element-wise `max(z, 0)`.
pub fn relu(z: &Tensor) -> Tensor {
    Tensor::from_fn(z.shape().to_vec(), |i| z.data()[i].max(0.0))
}

/// Derivative of ReLU evaluated at the pre-activation `z`.
pub fn relu_grad(z: &Tensor) -> Tensor {
    Tensor::from_fn(z.shape().to_vec(), |i| if z.data()[i] > 0.0 { 1.0 } else { 0.0 })
}

/// Element-wise ELU: `z` for `z ≥ 0`, `e^z − 1` below.
pub fn elu(z: &Tensor) -> Tensor {
    Tensor::from_fn(z.shape().to_vec(), |i| elu_scalar(z.data()[i]))
}

/// Derivative of ELU evaluated at the pre-activation `z`.
pub fn elu_grad(z: &Tensor) -> Tensor {
    Tensor::from_fn(
        z.shape().to_vec(),
        |i| {
            let v = z.data()[i];
            if v >= 0.0 {
                1.0
            } else {
                v.exp()
            }
        },
    )
}

#[inline]
pub(crate) fn elu_scalar(v: f64) -> f64 {
    if v >= 0.0 {
        v
    } else {
        v.exp() - 1.0
    }
}

/// Row-wise softmax with max-subtraction for stability; rows sum to 1.
pub fn softmax(z: &Tensor) -> Tensor {
    let (bsz, c) = (z.rows(), z.cols());
    let mut out = Tensor::zeros(vec![bsz, c]);
    for n in 0..bsz {
        let zr = z.row(n);
        let m = zr.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let or = &mut out.data_mut()[n * c..(n + 1) * c];
        let mut sum = 0.0;
        for (ov, zv) in or.iter_mut().zip(zr) {
            *ov = (zv - m).exp();
            sum += *ov;
        }
        for ov in or.iter_mut() {
            *ov /= sum;
        }
    }
    out
}

/// Max relative error between `analytic` and central finite differences of
/// `probe` at `point`, with step `h = 1e-5`.
///
/// The per-coordinate error is `|fd − analytic| / max(1e-8, |fd| + |analytic|)`.
/// A non-finite probe value reports as `f64::INFINITY` (a failure).
pub fn grad_check(
    probe: impl Fn(&[f64]) -> f64,
    point: &[f64],
    analytic: &[f64],
) -> f64 {
    const H: f64 = 1e-5;
    let mut buf = point.to_vec();
    let mut worst = 0.0f64;
    for j in 0..point.len() {
        let orig = buf[j];
        buf[j] = orig + H;
        let up = probe(&buf);
        buf[j] = orig - H;
        let down = probe(&buf);
        buf[j] = orig;
        if !up.is_finite() || !down.is_finite() {
            return f64::INFINITY;
        }
        let fd = (up - down) / (2.0 * H);
        let err = (fd - analytic[j]).abs() / (1e-8f64).max(fd.abs() + analytic[j].abs());
        worst = worst.max(err);
    }
    worst
}

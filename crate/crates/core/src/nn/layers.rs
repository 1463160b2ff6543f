use super::optim::LayerGrads;
use super::{shape_err, LayerKind, LayerParams, NnError, Real, Tensor};
use crate::rng::RngStream;

// Wider registers only; no FMA contraction, so results match the portable path
// bit for bit.
macro_rules! simd_dispatch {
    ($portable:expr, $avx2:expr, ($($arg:expr),*)) => {{
        #[cfg(target_arch = "x86_64")]
        {
            if std::arch::is_x86_feature_detected!("avx2") {
                // SAFETY: the CPU supports the enabled feature set.
                unsafe { $avx2($($arg),*) }
            } else {
                $portable($($arg),*)
            }
        }
        #[cfg(not(target_arch = "x86_64"))]
        {
            $portable($($arg),*)
        }
    }};
}

#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "avx2")]
unsafe fn conv_forward_avx2<T: Real, const CIN: usize, const COUT: usize>(
    input: &[T],
    weights: &[T],
    bias: &[T],
    out: &mut [T],
    h: usize,
    w: usize,
) {
    conv_forward_fixed::<T, CIN, COUT>(input, weights, bias, out, h, w)
}

#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "avx2")]
#[allow(clippy::too_many_arguments)]
unsafe fn conv_backward_avx2<T: Real, const CIN: usize, const COUT: usize>(
    input: &[T],
    weights: &[T],
    grad_out: &[T],
    grad_w: &mut [T],
    grad_b: &mut [T],
    grad_in: Option<&mut [T]>,
    h: usize,
    w: usize,
) {
    conv_backward_fixed::<T, CIN, COUT>(input, weights, grad_out, grad_w, grad_b, grad_in, h, w)
}

fn expect_kind<T>(params: &LayerParams<T>, kind: LayerKind, op: &'static str) -> Result<(), NnError> {
    if params.kind != kind {
        return Err(shape_err(op, format!("{kind:?} params"), format!("{:?}", params.kind)));
    }
    Ok(())
}

fn hwc(input: &Tensor<impl Real>, op: &'static str) -> Result<(usize, usize, usize), NnError> {
    match *input.shape() {
        [h, w, c] => Ok((h, w, c)),
        ref s => Err(shape_err(op, "H x W x C", format!("{s:?}"))),
    }
}

/// Same-padded, stride-1 3x3 convolution over an `H x W x Cin` tensor.
pub fn conv_forward<T: Real>(input: &Tensor<T>, params: &LayerParams<T>) -> Result<Tensor<T>, NnError> {
    expect_kind(params, LayerKind::Conv3x3, "conv_forward")?;
    let (h, w, cin) = hwc(input, "conv_forward")?;
    let ws = params.weights.shape();
    if ws[2] != cin {
        return Err(shape_err("conv_forward", format!("{} input channels", ws[2]), cin));
    }
    let cout = ws[3];
    let bias = params.bias.as_ref().expect("conv bias").data();
    let mut out = Tensor::zeros(&[h, w, cout]);
    let (x, wt, o) = (input.data(), params.weights.data(), out.data_mut());
    // Fixed channel counts keep the accumulators in registers.
    match (cin, cout) {
        (3, 8) => simd_dispatch!(conv_forward_fixed::<T, 3, 8>, conv_forward_avx2::<T, 3, 8>, (x, wt, bias, o, h, w)),
        (8, 8) => simd_dispatch!(conv_forward_fixed::<T, 8, 8>, conv_forward_avx2::<T, 8, 8>, (x, wt, bias, o, h, w)),
        _ => conv_forward_any(x, wt, bias, o, h, w, cin, cout),
    }
    Ok(out)
}

/// Valid kernel offsets for output coordinate `p` along an axis of length `n`.
#[inline(always)]
fn taps(p: usize, n: usize) -> std::ops::Range<usize> {
    let lo = usize::from(p == 0);
    let hi = if p + 1 >= n { 2 } else { 3 };
    lo..hi
}

#[inline(always)]
fn conv_forward_fixed<T: Real, const CIN: usize, const COUT: usize>(
    input: &[T],
    weights: &[T],
    bias: &[T],
    out: &mut [T],
    h: usize,
    w: usize,
) {
    let bias: [T; COUT] = bias.try_into().expect("bias length");
    for y in 0..h {
        for x in 0..w {
            let mut acc = bias;
            for ky in taps(y, h) {
                let iy = y + ky - 1;
                for kx in taps(x, w) {
                    let i = (iy * w + x + kx - 1) * CIN;
                    let px: &[T; CIN] = input[i..i + CIN].try_into().unwrap();
                    let k = (ky * 3 + kx) * CIN * COUT;
                    let tap = &weights[k..k + CIN * COUT];
                    for ci in 0..CIN {
                        let v = px[ci];
                        let row: &[T; COUT] = tap[ci * COUT..(ci + 1) * COUT].try_into().unwrap();
                        for co in 0..COUT {
                            acc[co] += v * row[co];
                        }
                    }
                }
            }
            let o = (y * w + x) * COUT;
            out[o..o + COUT].copy_from_slice(&acc);
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn conv_forward_any<T: Real>(
    input: &[T],
    weights: &[T],
    bias: &[T],
    out: &mut [T],
    h: usize,
    w: usize,
    cin: usize,
    cout: usize,
) {
    for y in 0..h {
        for x in 0..w {
            let o = (y * w + x) * cout;
            let out_px = &mut out[o..o + cout];
            out_px.copy_from_slice(bias);
            for ky in taps(y, h) {
                let iy = y + ky - 1;
                for kx in taps(x, w) {
                    let i = (iy * w + x + kx - 1) * cin;
                    let k = (ky * 3 + kx) * cin * cout;
                    for ci in 0..cin {
                        let v = input[i + ci];
                        let row = &weights[k + ci * cout..k + (ci + 1) * cout];
                        for (acc, &wt) in out_px.iter_mut().zip(row) {
                            *acc += v * wt;
                        }
                    }
                }
            }
        }
    }
}

/// Backward pass of [`conv_forward`]. Parameter gradients are accumulated
/// into `grads`; the input gradient is returned when requested.
pub fn conv_backward<T: Real>(
    input: &Tensor<T>,
    params: &LayerParams<T>,
    grad_out: &Tensor<T>,
    grads: &mut LayerGrads<T>,
    need_input_grad: bool,
) -> Result<Option<Tensor<T>>, NnError> {
    expect_kind(params, LayerKind::Conv3x3, "conv_backward")?;
    let (h, w, cin) = hwc(input, "conv_backward")?;
    let cout = params.weights.shape()[3];
    if grad_out.shape() != [h, w, cout] {
        return Err(shape_err("conv_backward", format!("{:?}", [h, w, cout]), format!("{:?}", grad_out.shape())));
    }
    let mut grad_in = need_input_grad.then(|| Tensor::zeros(&[h, w, cin]));
    let gb = grads.bias.as_mut().expect("conv bias grad").data_mut();
    let gw = grads.weights.data_mut();
    let gi = grad_in.as_mut().map(|g| g.data_mut());
    let (x, wt, g) = (input.data(), params.weights.data(), grad_out.data());
    match (cin, cout) {
        (3, 8) => simd_dispatch!(
            conv_backward_fixed::<T, 3, 8>,
            conv_backward_avx2::<T, 3, 8>,
            (x, wt, g, gw, gb, gi, h, w)
        ),
        (8, 8) => simd_dispatch!(
            conv_backward_fixed::<T, 8, 8>,
            conv_backward_avx2::<T, 8, 8>,
            (x, wt, g, gw, gb, gi, h, w)
        ),
        _ => conv_backward_any(x, wt, g, gw, gb, gi, h, w, cin, cout),
    }
    Ok(grad_in)
}

#[inline(always)]
#[allow(clippy::too_many_arguments)]
fn conv_backward_fixed<T: Real, const CIN: usize, const COUT: usize>(
    input: &[T],
    weights: &[T],
    grad_out: &[T],
    grad_w: &mut [T],
    grad_b: &mut [T],
    mut grad_in: Option<&mut [T]>,
    h: usize,
    w: usize,
) {
    for y in 0..h {
        for x in 0..w {
            let o = (y * w + x) * COUT;
            let g: &[T; COUT] = grad_out[o..o + COUT].try_into().unwrap();
            // Pooling and ReLU leave most upstream cells at exactly zero.
            if g.iter().all(|&v| v == T::zero()) {
                continue;
            }
            for co in 0..COUT {
                grad_b[co] += g[co];
            }
            for ky in taps(y, h) {
                let iy = y + ky - 1;
                for kx in taps(x, w) {
                    let i = (iy * w + x + kx - 1) * CIN;
                    let k = (ky * 3 + kx) * CIN * COUT;
                    let px: [T; CIN] = input[i..i + CIN].try_into().unwrap();
                    let gw_tap = &mut grad_w[k..k + CIN * COUT];
                    for ci in 0..CIN {
                        let row: &mut [T; COUT] = (&mut gw_tap[ci * COUT..(ci + 1) * COUT]).try_into().unwrap();
                        for co in 0..COUT {
                            row[co] += px[ci] * g[co];
                        }
                    }
                    if let Some(gi) = grad_in.as_deref_mut() {
                        let tap = &weights[k..k + CIN * COUT];
                        for ci in 0..CIN {
                            let row: &[T; COUT] = tap[ci * COUT..(ci + 1) * COUT].try_into().unwrap();
                            let mut s = T::zero();
                            for co in 0..COUT {
                                s += row[co] * g[co];
                            }
                            gi[i + ci] += s;
                        }
                    }
                }
            }
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn conv_backward_any<T: Real>(
    input: &[T],
    weights: &[T],
    grad_out: &[T],
    grad_w: &mut [T],
    grad_b: &mut [T],
    mut grad_in: Option<&mut [T]>,
    h: usize,
    w: usize,
    cin: usize,
    cout: usize,
) {
    for y in 0..h {
        for x in 0..w {
            let o = (y * w + x) * cout;
            let g = &grad_out[o..o + cout];
            if g.iter().all(|&v| v == T::zero()) {
                continue;
            }
            for (b, &gv) in grad_b.iter_mut().zip(g) {
                *b += gv;
            }
            for ky in taps(y, h) {
                let iy = y + ky - 1;
                for kx in taps(x, w) {
                    let i = (iy * w + x + kx - 1) * cin;
                    let k = (ky * 3 + kx) * cin * cout;
                    for ci in 0..cin {
                        let v = input[i + ci];
                        let row = &mut grad_w[k + ci * cout..k + (ci + 1) * cout];
                        for (acc, &gv) in row.iter_mut().zip(g) {
                            *acc += v * gv;
                        }
                    }
                    if let Some(gi) = grad_in.as_deref_mut() {
                        for ci in 0..cin {
                            let row = &weights[k + ci * cout..k + (ci + 1) * cout];
                            gi[i + ci] += row.iter().zip(g).fold(T::zero(), |s, (&wt, &gv)| s + wt * gv);
                        }
                    }
                }
            }
        }
    }
}

/// Flat input positions selected by each output cell of a max pool.
#[derive(Debug, Clone, PartialEq)]
pub struct PoolIndices {
    pub input_shape: Vec<usize>,
    pub argmax: Vec<usize>,
}

/// 2x2 max pooling with stride 2. Odd trailing rows and columns are dropped.
/// Ties resolve to the first cell in row-major order.
pub fn maxpool_forward<T: Real>(input: &Tensor<T>) -> Result<(Tensor<T>, PoolIndices), NnError> {
    let (h, w, c) = hwc(input, "maxpool_forward")?;
    if h < 2 || w < 2 {
        return Err(shape_err("maxpool_forward", "H >= 2 and W >= 2", format!("{h}x{w}")));
    }
    let (oh, ow) = (h / 2, w / 2);
    let data = input.data();
    let mut out = Vec::with_capacity(oh * ow * c);
    let mut argmax = Vec::with_capacity(oh * ow * c);
    for y in 0..oh {
        for x in 0..ow {
            for ch in 0..c {
                let mut best_i = ((2 * y) * w + 2 * x) * c + ch;
                let mut best = data[best_i];
                for (dy, dx) in [(0, 1), (1, 0), (1, 1)] {
                    let i = ((2 * y + dy) * w + 2 * x + dx) * c + ch;
                    if data[i] > best {
                        best = data[i];
                        best_i = i;
                    }
                }
                out.push(best);
                argmax.push(best_i);
            }
        }
    }
    Ok((
        Tensor::from_vec(vec![oh, ow, c], out)?,
        PoolIndices {
            input_shape: input.shape().to_vec(),
            argmax,
        },
    ))
}

pub fn maxpool_backward<T: Real>(grad_out: &Tensor<T>, indices: &PoolIndices) -> Result<Tensor<T>, NnError> {
    if grad_out.len() != indices.argmax.len() {
        return Err(shape_err("maxpool_backward", indices.argmax.len(), grad_out.len()));
    }
    let mut grad_in = Tensor::zeros(&indices.input_shape);
    let gi = grad_in.data_mut();
    for (&i, &g) in indices.argmax.iter().zip(grad_out.data()) {
        gi[i] += g;
    }
    Ok(grad_in)
}

/// `out[j] = bias[j] + sum_i input[i] * weights[i, j]`.
pub fn dense_forward<T: Real>(input: &[T], params: &LayerParams<T>) -> Result<Vec<T>, NnError> {
    expect_kind(params, LayerKind::Dense, "dense_forward")?;
    let (n_in, n_out) = (params.weights.shape()[0], params.weights.shape()[1]);
    if input.len() != n_in {
        return Err(shape_err("dense_forward", n_in, input.len()));
    }
    let mut out = params.bias.as_ref().expect("dense bias").data().to_vec();
    let wd = params.weights.data();
    for (i, &v) in input.iter().enumerate() {
        if v == T::zero() {
            continue;
        }
        let row = &wd[i * n_out..(i + 1) * n_out];
        for (acc, &wt) in out.iter_mut().zip(row) {
            *acc += v * wt;
        }
    }
    Ok(out)
}

pub fn dense_backward<T: Real>(
    input: &[T],
    params: &LayerParams<T>,
    grad_out: &[T],
    grads: &mut LayerGrads<T>,
    need_input_grad: bool,
) -> Result<Option<Vec<T>>, NnError> {
    expect_kind(params, LayerKind::Dense, "dense_backward")?;
    let (n_in, n_out) = (params.weights.shape()[0], params.weights.shape()[1]);
    if input.len() != n_in || grad_out.len() != n_out {
        return Err(shape_err(
            "dense_backward",
            format!("{n_in} -> {n_out}"),
            format!("{} -> {}", input.len(), grad_out.len()),
        ));
    }
    for (b, &g) in grads.bias.as_mut().expect("dense bias grad").data_mut().iter_mut().zip(grad_out) {
        *b += g;
    }
    let gw = grads.weights.data_mut();
    for (i, &v) in input.iter().enumerate() {
        if v == T::zero() {
            continue;
        }
        for (acc, &g) in gw[i * n_out..(i + 1) * n_out].iter_mut().zip(grad_out) {
            *acc += v * g;
        }
    }
    if !need_input_grad {
        return Ok(None);
    }
    let wd = params.weights.data();
    let grad_in = (0..n_in)
        .map(|i| {
            wd[i * n_out..(i + 1) * n_out]
                .iter()
                .zip(grad_out)
                .fold(T::zero(), |s, (&wt, &g)| s + wt * g)
        })
        .collect();
    Ok(Some(grad_in))
}

pub fn relu<T: Real>(x: &Tensor<T>) -> Tensor<T> {
    let mut out = x.clone();
    relu_in_place(out.data_mut());
    out
}

pub fn relu_in_place<T: Real>(x: &mut [T]) {
    // Select form rather than a branch so the loop vectorizes.
    for v in x {
        *v = if *v < T::zero() { T::zero() } else { *v };
    }
}

/// Zeroes `grad` wherever the ReLU output was not strictly positive.
pub fn relu_backward<T: Real>(activated: &[T], grad: &mut [T]) {
    for (g, &a) in grad.iter_mut().zip(activated) {
        *g = if a <= T::zero() { T::zero() } else { *g };
    }
}

pub fn embedding_forward<T: Real>(index: usize, params: &LayerParams<T>) -> Result<Vec<T>, NnError> {
    expect_kind(params, LayerKind::Embedding, "embedding_forward")?;
    let (rows, dim) = (params.weights.shape()[0], params.weights.shape()[1]);
    if index >= rows {
        return Err(NnError::IndexOutOfRange { index, rows });
    }
    Ok(params.weights.data()[index * dim..(index + 1) * dim].to_vec())
}

/// Accumulates `grad_out` into row `index` of the table gradient only.
pub fn embedding_backward<T: Real>(index: usize, grad_out: &[T], grads: &mut LayerGrads<T>) -> Result<(), NnError> {
    let (rows, dim) = (grads.weights.shape()[0], grads.weights.shape()[1]);
    if index >= rows {
        return Err(NnError::IndexOutOfRange { index, rows });
    }
    if grad_out.len() != dim {
        return Err(shape_err("embedding_backward", dim, grad_out.len()));
    }
    for (acc, &g) in grads.weights.data_mut()[index * dim..(index + 1) * dim].iter_mut().zip(grad_out) {
        *acc += g;
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DropoutMode {
    Train,
    Infer,
}

/// Inverted dropout. Returns the output and, in train mode, the per-element
/// multiplier (0 or `1 / (1 - rate)`) needed for the backward pass.
pub fn dropout<T: Real>(
    x: &[T],
    rate: f64,
    mode: DropoutMode,
    rng: &mut RngStream,
) -> Result<(Vec<T>, Option<Vec<T>>), NnError> {
    if !(0.0..1.0).contains(&rate) {
        return Err(NnError::InvalidArgument(format!("dropout rate {rate} outside [0, 1)")));
    }
    if mode == DropoutMode::Infer || rate == 0.0 {
        return Ok((x.to_vec(), None));
    }
    let keep = T::of(1.0 / (1.0 - rate));
    let mask: Vec<T> = x
        .iter()
        .map(|_| if rng.uniform() < rate { T::zero() } else { keep })
        .collect();
    let out = x.iter().zip(&mask).map(|(&v, &m)| v * m).collect();
    Ok((out, Some(mask)))
}

pub fn dropout_backward<T: Real>(grad: &mut [T], mask: Option<&[T]>) {
    if let Some(mask) = mask {
        for (g, &m) in grad.iter_mut().zip(mask) {
            *g *= m;
        }
    }
}

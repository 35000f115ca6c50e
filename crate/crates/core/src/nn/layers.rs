use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{NnError, Tensor};

/// One layer of a feed-forward stack. Parameterized layers store their
/// weights in the owning network's flat parameter vector, weights first,
/// then bias.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LayerSpec {
    /// Weights `[out, in, k, k]`.
    Conv2d {
        in_channels: usize,
        out_channels: usize,
        kernel: usize,
        stride: usize,
        padding: usize,
    },
    /// Weights `[in, out, k, k]`; output size `(n - 1) * stride - 2 * padding + kernel`.
    ConvTranspose2d {
        in_channels: usize,
        out_channels: usize,
        kernel: usize,
        stride: usize,
        padding: usize,
    },
    /// Weights `[out, in]` over the flattened input.
    Dense { in_features: usize, out_features: usize },
    Flatten,
    Reshape { shape: Vec<usize> },
    LeakyRelu { slope: f64 },
    Tanh,
    Sigmoid,
    /// Clamp to `[0, 1]`; gradient passes only inside the interval.
    Clamp01,
}

impl LayerSpec {
    pub fn param_count(&self) -> usize {
        match *self {
            LayerSpec::Conv2d {
                in_channels,
                out_channels,
                kernel,
                ..
            }
            | LayerSpec::ConvTranspose2d {
                in_channels,
                out_channels,
                kernel,
                ..
            } => in_channels * out_channels * kernel * kernel + out_channels,
            LayerSpec::Dense {
                in_features,
                out_features,
            } => in_features * out_features + out_features,
            _ => 0,
        }
    }

    pub fn output_shape(&self, input: &[usize]) -> Result<Vec<usize>, NnError> {
        let mismatch = |expected: String| NnError::Shape {
            layer: format!("{self:?}"),
            expected,
            got: input.to_vec(),
        };
        match *self {
            LayerSpec::Conv2d {
                in_channels,
                out_channels,
                kernel,
                stride,
                padding,
            } => match *input {
                [c, h, w] if c == in_channels && h + 2 * padding >= kernel && w + 2 * padding >= kernel => Ok(vec![
                    out_channels,
                    (h + 2 * padding - kernel) / stride + 1,
                    (w + 2 * padding - kernel) / stride + 1,
                ]),
                _ => Err(mismatch(format!("[{in_channels}, H, W] with H, W >= {}", kernel.saturating_sub(2 * padding)))),
            },
            LayerSpec::ConvTranspose2d {
                in_channels,
                out_channels,
                kernel,
                stride,
                padding,
            } => match *input {
                [c, h, w] if c == in_channels && h >= 1 && w >= 1 && (h - 1) * stride + kernel > 2 * padding && (w - 1) * stride + kernel > 2 * padding => Ok(vec![
                    out_channels,
                    (h - 1) * stride + kernel - 2 * padding,
                    (w - 1) * stride + kernel - 2 * padding,
                ]),
                _ => Err(mismatch(format!("[{in_channels}, H, W]"))),
            },
            LayerSpec::Dense {
                in_features,
                out_features,
            } => {
                if input.iter().product::<usize>() == in_features {
                    Ok(vec![out_features])
                } else {
                    Err(mismatch(format!("{in_features} features")))
                }
            }
            LayerSpec::Flatten => Ok(vec![input.iter().product()]),
            LayerSpec::Reshape { ref shape } => {
                if shape.iter().product::<usize>() == input.iter().product::<usize>() {
                    Ok(shape.clone())
                } else {
                    Err(mismatch(format!("{} elements", shape.iter().product::<usize>())))
                }
            }
            _ => Ok(input.to_vec()),
        }
    }

    /// Uniform `±1/sqrt(fan_in)` weights, zero bias.
    pub fn init_params<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let (weights, bias, fan_in) = match *self {
            LayerSpec::Conv2d {
                in_channels,
                out_channels,
                kernel,
                ..
            } => (
                in_channels * out_channels * kernel * kernel,
                out_channels,
                in_channels * kernel * kernel,
            ),
            LayerSpec::ConvTranspose2d {
                in_channels,
                out_channels,
                kernel,
                stride,
                ..
            } => (
                in_channels * out_channels * kernel * kernel,
                out_channels,
                (in_channels * kernel * kernel / (stride * stride)).max(1),
            ),
            LayerSpec::Dense {
                in_features,
                out_features,
            } => (in_features * out_features, out_features, in_features),
            _ => return Vec::new(),
        };
        let bound = 1.0 / (fan_in as f64).sqrt();
        let mut params: Vec<f64> = (0..weights).map(|_| rng.random_range(-bound..bound)).collect();
        params.extend(std::iter::repeat_n(0.0, bias));
        params
    }

    pub fn forward(&self, params: &[f64], input: &Tensor, out_shape: &[usize]) -> Tensor {
        match *self {
            LayerSpec::Conv2d {
                in_channels,
                out_channels,
                kernel,
                stride,
                padding,
            } => conv2d_forward(params, input, out_shape, in_channels, out_channels, kernel, stride, padding),
            LayerSpec::ConvTranspose2d {
                in_channels,
                out_channels,
                kernel,
                stride,
                padding,
            } => conv_transpose2d_forward(params, input, out_shape, in_channels, out_channels, kernel, stride, padding),
            LayerSpec::Dense {
                in_features,
                out_features,
            } => {
                let x = input.data();
                let (w, b) = params.split_at(in_features * out_features);
                let out = (0..out_features)
                    .map(|j| {
                        let row = &w[j * in_features..(j + 1) * in_features];
                        b[j] + row.iter().zip(x).map(|(a, v)| a * v).sum::<f64>()
                    })
                    .collect();
                Tensor::new(out_shape.to_vec(), out)
            }
            LayerSpec::Flatten | LayerSpec::Reshape { .. } => input.clone().reshaped(out_shape.to_vec()),
            LayerSpec::LeakyRelu { slope } => map(input, |v| if v > 0.0 { v } else { slope * v }),
            LayerSpec::Tanh => map(input, f64::tanh),
            LayerSpec::Sigmoid => map(input, sigmoid),
            LayerSpec::Clamp01 => map(input, |v| v.clamp(0.0, 1.0)),
        }
    }

    /// Accumulates parameter gradients into `param_grad` and returns the
    /// gradient with respect to `input`.
    pub fn backward(
        &self,
        params: &[f64],
        input: &Tensor,
        output: &Tensor,
        grad_out: &Tensor,
        param_grad: &mut [f64],
    ) -> Tensor {
        match *self {
            LayerSpec::Conv2d {
                in_channels,
                out_channels,
                kernel,
                stride,
                padding,
            } => conv2d_backward(
                params,
                input,
                grad_out,
                param_grad,
                in_channels,
                out_channels,
                kernel,
                stride,
                padding,
            ),
            LayerSpec::ConvTranspose2d {
                in_channels,
                out_channels,
                kernel,
                stride,
                padding,
            } => conv_transpose2d_backward(
                params,
                input,
                grad_out,
                param_grad,
                in_channels,
                out_channels,
                kernel,
                stride,
                padding,
            ),
            LayerSpec::Dense {
                in_features,
                out_features,
            } => {
                let x = input.data();
                let g = grad_out.data();
                let w = &params[..in_features * out_features];
                let mut grad_in = vec![0.0; in_features];
                let (gw, gb) = param_grad.split_at_mut(in_features * out_features);
                for j in 0..out_features {
                    let gj = g[j];
                    gb[j] += gj;
                    if gj == 0.0 {
                        continue;
                    }
                    let row = &w[j * in_features..(j + 1) * in_features];
                    let grow = &mut gw[j * in_features..(j + 1) * in_features];
                    for i in 0..in_features {
                        grow[i] += gj * x[i];
                        grad_in[i] += gj * row[i];
                    }
                }
                Tensor::new(input.shape().to_vec(), grad_in)
            }
            LayerSpec::Flatten | LayerSpec::Reshape { .. } => grad_out.clone().reshaped(input.shape().to_vec()),
            LayerSpec::LeakyRelu { slope } => zip_map(input, grad_out, |x, g| if x > 0.0 { g } else { slope * g }),
            LayerSpec::Tanh => zip_map(output, grad_out, |y, g| g * (1.0 - y * y)),
            LayerSpec::Sigmoid => zip_map(output, grad_out, |y, g| g * y * (1.0 - y)),
            LayerSpec::Clamp01 => zip_map(input, grad_out, |x, g| if (0.0..=1.0).contains(&x) { g } else { 0.0 }),
        }
    }
}

pub fn sigmoid(v: f64) -> f64 {
    if v >= 0.0 {
        1.0 / (1.0 + (-v).exp())
    } else {
        let e = v.exp();
        e / (1.0 + e)
    }
}

fn map(input: &Tensor, f: impl Fn(f64) -> f64) -> Tensor {
    Tensor::new(input.shape().to_vec(), input.data().iter().map(|&v| f(v)).collect())
}

fn zip_map(a: &Tensor, g: &Tensor, f: impl Fn(f64, f64) -> f64) -> Tensor {
    Tensor::new(
        a.shape().to_vec(),
        a.data().iter().zip(g.data()).map(|(&x, &gv)| f(x, gv)).collect(),
    )
}

/// Indices `i` in `[0, n_loop)` whose target `i * stride + offset - padding`
/// lands in `[0, n_target)`.
#[inline]
fn span(n_loop: usize, n_target: usize, stride: usize, offset: usize, padding: usize) -> (usize, usize) {
    let lo = if padding > offset {
        (padding - offset).div_ceil(stride)
    } else {
        0
    };
    let hi = if n_target + padding > offset {
        (n_target + padding - offset).div_ceil(stride)
    } else {
        0
    };
    (lo, hi.min(n_loop))
}

fn dims3(t: &Tensor) -> (usize, usize, usize) {
    match *t.shape() {
        [c, h, w] => (c, h, w),
        ref other => panic!("expected rank-3 tensor, got {other:?}"),
    }
}

#[allow(clippy::too_many_arguments)]
fn conv2d_forward(
    params: &[f64],
    input: &Tensor,
    out_shape: &[usize],
    cin: usize,
    cout: usize,
    k: usize,
    s: usize,
    p: usize,
) -> Tensor {
    let (_, h, w) = dims3(input);
    let (ho, wo) = (out_shape[1], out_shape[2]);
    let x = input.data();
    let (weights, bias) = params.split_at(cin * cout * k * k);
    let mut out = vec![0.0; cout * ho * wo];
    for o in 0..cout {
        let plane = &mut out[o * ho * wo..(o + 1) * ho * wo];
        plane.fill(bias[o]);
        for c in 0..cin {
            for ky in 0..k {
                let (oy_lo, oy_hi) = span(ho, h, s, ky, p);
                for kx in 0..k {
                    let wv = weights[((o * cin + c) * k + ky) * k + kx];
                    let (ox_lo, ox_hi) = span(wo, w, s, kx, p);
                    for oy in oy_lo..oy_hi {
                        let iy = oy * s + ky - p;
                        let in_row = &x[(c * h + iy) * w..(c * h + iy + 1) * w];
                        let out_row = &mut plane[oy * wo..(oy + 1) * wo];
                        for ox in ox_lo..ox_hi {
                            out_row[ox] += wv * in_row[ox * s + kx - p];
                        }
                    }
                }
            }
        }
    }
    Tensor::new(out_shape.to_vec(), out)
}

#[allow(clippy::too_many_arguments)]
fn conv2d_backward(
    params: &[f64],
    input: &Tensor,
    grad_out: &Tensor,
    param_grad: &mut [f64],
    cin: usize,
    cout: usize,
    k: usize,
    s: usize,
    p: usize,
) -> Tensor {
    let (_, h, w) = dims3(input);
    let (_, ho, wo) = dims3(grad_out);
    let x = input.data();
    let g = grad_out.data();
    let weights = &params[..cin * cout * k * k];
    let (gw, gb) = param_grad.split_at_mut(cin * cout * k * k);
    let mut grad_in = vec![0.0; cin * h * w];
    for o in 0..cout {
        let gplane = &g[o * ho * wo..(o + 1) * ho * wo];
        gb[o] += gplane.iter().sum::<f64>();
        for c in 0..cin {
            for ky in 0..k {
                let (oy_lo, oy_hi) = span(ho, h, s, ky, p);
                for kx in 0..k {
                    let widx = ((o * cin + c) * k + ky) * k + kx;
                    let wv = weights[widx];
                    let (ox_lo, ox_hi) = span(wo, w, s, kx, p);
                    let mut acc = 0.0;
                    for oy in oy_lo..oy_hi {
                        let iy = oy * s + ky - p;
                        let row_start = (c * h + iy) * w;
                        let g_row = &gplane[oy * wo..(oy + 1) * wo];
                        for ox in ox_lo..ox_hi {
                            let ix = row_start + ox * s + kx - p;
                            acc += g_row[ox] * x[ix];
                            grad_in[ix] += wv * g_row[ox];
                        }
                    }
                    gw[widx] += acc;
                }
            }
        }
    }
    Tensor::new(input.shape().to_vec(), grad_in)
}

#[allow(clippy::too_many_arguments)]
fn conv_transpose2d_forward(
    params: &[f64],
    input: &Tensor,
    out_shape: &[usize],
    cin: usize,
    cout: usize,
    k: usize,
    s: usize,
    p: usize,
) -> Tensor {
    let (_, h, w) = dims3(input);
    let (ho, wo) = (out_shape[1], out_shape[2]);
    let x = input.data();
    let (weights, bias) = params.split_at(cin * cout * k * k);
    let mut out = vec![0.0; cout * ho * wo];
    for o in 0..cout {
        out[o * ho * wo..(o + 1) * ho * wo].fill(bias[o]);
    }
    for c in 0..cin {
        let in_plane = &x[c * h * w..(c + 1) * h * w];
        for o in 0..cout {
            let plane = &mut out[o * ho * wo..(o + 1) * ho * wo];
            for ky in 0..k {
                let (iy_lo, iy_hi) = span(h, ho, s, ky, p);
                for kx in 0..k {
                    let wv = weights[((c * cout + o) * k + ky) * k + kx];
                    let (ix_lo, ix_hi) = span(w, wo, s, kx, p);
                    for iy in iy_lo..iy_hi {
                        let oy = iy * s + ky - p;
                        let in_row = &in_plane[iy * w..(iy + 1) * w];
                        let out_row = &mut plane[oy * wo..(oy + 1) * wo];
                        for ix in ix_lo..ix_hi {
                            out_row[ix * s + kx - p] += wv * in_row[ix];
                        }
                    }
                }
            }
        }
    }
    Tensor::new(out_shape.to_vec(), out)
}

#[allow(clippy::too_many_arguments)]
fn conv_transpose2d_backward(
    params: &[f64],
    input: &Tensor,
    grad_out: &Tensor,
    param_grad: &mut [f64],
    cin: usize,
    cout: usize,
    k: usize,
    s: usize,
    p: usize,
) -> Tensor {
    let (_, h, w) = dims3(input);
    let (_, ho, wo) = dims3(grad_out);
    let x = input.data();
    let g = grad_out.data();
    let weights = &params[..cin * cout * k * k];
    let (gw, gb) = param_grad.split_at_mut(cin * cout * k * k);
    for o in 0..cout {
        gb[o] += g[o * ho * wo..(o + 1) * ho * wo].iter().sum::<f64>();
    }
    let mut grad_in = vec![0.0; cin * h * w];
    for c in 0..cin {
        let in_plane = &x[c * h * w..(c + 1) * h * w];
        let gin_plane = &mut grad_in[c * h * w..(c + 1) * h * w];
        for o in 0..cout {
            let gplane = &g[o * ho * wo..(o + 1) * ho * wo];
            for ky in 0..k {
                let (iy_lo, iy_hi) = span(h, ho, s, ky, p);
                for kx in 0..k {
                    let widx = ((c * cout + o) * k + ky) * k + kx;
                    let wv = weights[widx];
                    let (ix_lo, ix_hi) = span(w, wo, s, kx, p);
                    let mut acc = 0.0;
                    for iy in iy_lo..iy_hi {
                        let oy = iy * s + ky - p;
                        let g_row = &gplane[oy * wo..(oy + 1) * wo];
                        for ix in ix_lo..ix_hi {
                            let gv = g_row[ix * s + kx - p];
                            acc += gv * in_plane[iy * w + ix];
                            gin_plane[iy * w + ix] += wv * gv;
                        }
                    }
                    gw[widx] += acc;
                }
            }
        }
    }
    Tensor::new(input.shape().to_vec(), grad_in)
}

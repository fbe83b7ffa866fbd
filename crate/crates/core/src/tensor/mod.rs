//! Dense 4-D feature tensors and the shape-preserving kernels the network
//! is built from.
//!
//! Layout is `(batch, channel, row, col)` with the column index varying
//! fastest. Every kernel here keeps the spatial extent of its input.

mod activation;
mod conv;
mod pool;

pub use activation::{relu, relu_backward, sigmoid};
pub use conv::{conv2d_same_backward, conv2d_same_forward, ConvGrads};
pub use pool::{pool3x3_backward, pool3x3_forward, PoolCache, PoolMode};

use crate::error::{Error, Result};

/// Batched feature maps, `n × c × h × w`, col-fastest.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor4 {
    n: usize,
    c: usize,
    h: usize,
    w: usize,
    data: Vec<f32>,
}

impl Tensor4 {
    pub fn zeros(n: usize, c: usize, h: usize, w: usize) -> Self {
        Self::from_vec(n, c, h, w, vec![0.0; n * c * h * w]).expect("zeros: dims must be >= 1")
    }

    pub fn filled(n: usize, c: usize, h: usize, w: usize, value: f32) -> Self {
        let mut t = Self::zeros(n, c, h, w);
        t.data.fill(value);
        t
    }

    pub fn from_vec(n: usize, c: usize, h: usize, w: usize, data: Vec<f32>) -> Result<Self> {
        if n == 0 || c == 0 || h == 0 || w == 0 {
            return Err(Error::contract(format!(
                "tensor dims must all be >= 1, got {n}x{c}x{h}x{w}"
            )));
        }
        if data.len() != n * c * h * w {
            return Err(Error::contract(format!(
                "tensor data length {} does not match {n}x{c}x{h}x{w}",
                data.len()
            )));
        }
        Ok(Self { n, c, h, w, data })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn c(&self) -> usize {
        self.c
    }

    pub fn h(&self) -> usize {
        self.h
    }

    pub fn w(&self) -> usize {
        self.w
    }

    pub fn dims(&self) -> (usize, usize, usize, usize) {
        (self.n, self.c, self.h, self.w)
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f32> {
        self.data
    }

    #[inline]
    pub fn index(&self, n: usize, c: usize, y: usize, x: usize) -> usize {
        ((n * self.c + c) * self.h + y) * self.w + x
    }

    #[inline]
    pub fn get(&self, n: usize, c: usize, y: usize, x: usize) -> f32 {
        self.data[self.index(n, c, y, x)]
    }

    #[inline]
    pub fn set(&mut self, n: usize, c: usize, y: usize, x: usize, value: f32) {
        let i = self.index(n, c, y, x);
        self.data[i] = value;
    }

    /// Elements of one batch item, `c × h × w`.
    pub fn item(&self, n: usize) -> &[f32] {
        let stride = self.c * self.h * self.w;
        &self.data[n * stride..(n + 1) * stride]
    }

    pub fn plane_len(&self) -> usize {
        self.h * self.w
    }

    pub(crate) fn same_dims(&self, other: &Tensor4, what: &str) -> Result<()> {
        if self.dims() != other.dims() {
            return Err(Error::contract(format!(
                "{what}: dims {:?} != {:?}",
                self.dims(),
                other.dims()
            )));
        }
        Ok(())
    }
}

/// Convolution weights `out_c × in_c × kh × kw` plus one bias per output
/// channel. Spatial extents are odd so same padding is symmetric.
#[derive(Clone, Debug, PartialEq)]
pub struct ConvKernel {
    out_c: usize,
    in_c: usize,
    kh: usize,
    kw: usize,
    pub weights: Vec<f32>,
    pub bias: Vec<f32>,
}

impl ConvKernel {
    pub fn zeros(out_c: usize, in_c: usize, kh: usize, kw: usize) -> Result<Self> {
        Self::new(
            out_c,
            in_c,
            kh,
            kw,
            vec![0.0; out_c * in_c * kh * kw],
            vec![0.0; out_c],
        )
    }

    pub fn new(
        out_c: usize,
        in_c: usize,
        kh: usize,
        kw: usize,
        weights: Vec<f32>,
        bias: Vec<f32>,
    ) -> Result<Self> {
        if out_c == 0 || in_c == 0 || kh == 0 || kw == 0 {
            return Err(Error::contract("kernel dims must all be >= 1"));
        }
        if kh % 2 == 0 || kw % 2 == 0 {
            return Err(Error::contract(format!(
                "kernel extent must be odd, got {kh}x{kw}"
            )));
        }
        if weights.len() != out_c * in_c * kh * kw || bias.len() != out_c {
            return Err(Error::contract(format!(
                "kernel buffers ({} weights, {} biases) do not match {out_c}x{in_c}x{kh}x{kw}",
                weights.len(),
                bias.len()
            )));
        }
        Ok(Self { out_c, in_c, kh, kw, weights, bias })
    }

    pub fn out_c(&self) -> usize {
        self.out_c
    }

    pub fn in_c(&self) -> usize {
        self.in_c
    }

    pub fn kh(&self) -> usize {
        self.kh
    }

    pub fn kw(&self) -> usize {
        self.kw
    }

    /// Weights feeding one output unit: `in_c · kh · kw`.
    pub fn fan_in(&self) -> usize {
        self.in_c * self.kh * self.kw
    }

    pub fn param_count(&self) -> usize {
        self.weights.len() + self.bias.len()
    }

    #[inline]
    pub fn weight(&self, o: usize, i: usize, dy: usize, dx: usize) -> f32 {
        self.weights[((o * self.in_c + i) * self.kh + dy) * self.kw + dx]
    }
}

/// Concatenates tensors along the channel axis, parts in argument order.
pub fn concat_channels(parts: &[&Tensor4]) -> Result<Tensor4> {
    let first = parts
        .first()
        .ok_or_else(|| Error::contract("concat_channels needs at least one part"))?;
    let (n, h, w) = (first.n, first.h, first.w);
    for p in parts {
        if p.n != n || p.h != h || p.w != w {
            return Err(Error::contract(format!(
                "concat_channels: part {:?} does not share batch/spatial dims with {:?}",
                p.dims(),
                first.dims()
            )));
        }
    }
    let c_total: usize = parts.iter().map(|p| p.c).sum();
    let plane = h * w;
    let mut data = Vec::with_capacity(n * c_total * plane);
    for b in 0..n {
        for p in parts {
            data.extend_from_slice(p.item(b));
        }
    }
    debug_assert_eq!(data.len(), n * c_total * plane);
    Tensor4::from_vec(n, c_total, h, w, data)
}

/// Inverse of [`concat_channels`]: cuts `grad_out` back into per-part tensors.
pub fn split_channels_grad(grad_out: &Tensor4, part_channels: &[usize]) -> Result<Vec<Tensor4>> {
    if part_channels.iter().sum::<usize>() != grad_out.c || part_channels.contains(&0) {
        return Err(Error::contract(format!(
            "split_channels_grad: parts {part_channels:?} do not partition {} channels",
            grad_out.c
        )));
    }
    let (n, _, h, w) = grad_out.dims();
    let plane = h * w;
    let mut out: Vec<Vec<f32>> = part_channels
        .iter()
        .map(|&c| Vec::with_capacity(n * c * plane))
        .collect();
    for b in 0..n {
        let item = grad_out.item(b);
        let mut offset = 0;
        for (dst, &c) in out.iter_mut().zip(part_channels) {
            dst.extend_from_slice(&item[offset..offset + c * plane]);
            offset += c * plane;
        }
    }
    out.into_iter()
        .zip(part_channels)
        .map(|(data, &c)| Tensor4::from_vec(n, c, h, w, data))
        .collect()
}

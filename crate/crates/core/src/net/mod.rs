//! The modified Inception module and the three-module fully-convolutional
//! network built from it.
//!
//! A module runs five pathways on the same input and concatenates their
//! outputs along channels, in this fixed order:
//!
//! | | pathway |
//! |---|---|
//! | (a) | 1×1 conv |
//! | (b) | 1×1 reduce → 3×3 conv |
//! | (c) | 1×1 reduce → 5×5 conv |
//! | (d) | 3×3 max pool → 1×1 conv |
//! | (e) | 3×3 avg pool → 3×3 conv |
//!
//! Every convolution is followed by a ReLU. Three modules are chained and a
//! 1×1 projection plus sigmoid turns the last feature map into a single
//! membership channel. There are no dense layers, so the parameter count is
//! independent of the input size and any `h × w` slice can be processed.

mod serialize;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::optim::init_weights;
use crate::tensor::{
    concat_channels, conv2d_same_backward, conv2d_same_forward, pool3x3_backward, pool3x3_forward,
    relu, relu_backward, sigmoid, split_channels_grad, ConvKernel, PoolCache, PoolMode, Tensor4,
};

/// Contrasts stacked as input channels: MPRAGE, T2, FLAIR.
pub const INPUT_CHANNELS: usize = 3;
pub const MODULE_COUNT: usize = 3;

/// Filter counts for one modified Inception module.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct InceptionConfig {
    pub c_1x1: usize,
    pub c_3x3_reduce: usize,
    pub c_3x3: usize,
    pub c_5x5_reduce: usize,
    pub c_5x5: usize,
    pub c_pool_proj: usize,
    pub c_avg: usize,
}

impl InceptionConfig {
    pub const AVG_FILTERS: usize = 32;

    /// One filter everywhere; used for gradient checks.
    pub const MINIMAL: Self = Self {
        c_1x1: 1,
        c_3x3_reduce: 1,
        c_3x3: 1,
        c_5x5_reduce: 1,
        c_5x5: 1,
        c_pool_proj: 1,
        c_avg: 1,
    };

    /// The shipped three-module stack. Module 1 uses the first GoogLeNet
    /// inception stage (64, 96→128, 16→32, 32) plus 32 average-pool filters;
    /// the later modules narrow every pathway except the average-pool one,
    /// which keeps the total at about 314k parameters.
    pub const DEFAULT_STACK: [Self; 3] = [
        Self::new(64, 96, 128, 16, 32, 32, Self::AVG_FILTERS),
        Self::new(32, 32, 64, 8, 16, 16, Self::AVG_FILTERS),
        Self::new(16, 16, 32, 4, 8, 8, Self::AVG_FILTERS),
    ];

    pub const fn new(
        c_1x1: usize,
        c_3x3_reduce: usize,
        c_3x3: usize,
        c_5x5_reduce: usize,
        c_5x5: usize,
        c_pool_proj: usize,
        c_avg: usize,
    ) -> Self {
        Self { c_1x1, c_3x3_reduce, c_3x3, c_5x5_reduce, c_5x5, c_pool_proj, c_avg }
    }

    pub fn as_array(&self) -> [usize; 7] {
        [
            self.c_1x1,
            self.c_3x3_reduce,
            self.c_3x3,
            self.c_5x5_reduce,
            self.c_5x5,
            self.c_pool_proj,
            self.c_avg,
        ]
    }

    pub fn from_array(a: [usize; 7]) -> Self {
        Self::new(a[0], a[1], a[2], a[3], a[4], a[5], a[6])
    }

    pub fn out_channels(&self) -> usize {
        self.c_1x1 + self.c_3x3 + self.c_5x5 + self.c_pool_proj + self.c_avg
    }

    pub fn validate(&self) -> Result<()> {
        if self.as_array().contains(&0) {
            return Err(Error::Config(format!("every filter count must be >= 1: {self:?}")));
        }
        Ok(())
    }
}

/// Parameters of one modified Inception module.
#[derive(Clone, Debug, PartialEq)]
pub struct InceptionModule {
    pub config: InceptionConfig,
    pub in_c: usize,
    pub a: ConvKernel,
    pub b_reduce: ConvKernel,
    pub b: ConvKernel,
    pub c_reduce: ConvKernel,
    pub c: ConvKernel,
    pub d: ConvKernel,
    pub e: ConvKernel,
}

impl InceptionModule {
    /// Zero-initialised module; weights are filled by [`build_network`].
    pub fn zeros(config: InceptionConfig, in_c: usize) -> Result<Self> {
        config.validate()?;
        let cfg = config;
        Ok(Self {
            config,
            in_c,
            a: ConvKernel::zeros(cfg.c_1x1, in_c, 1, 1)?,
            b_reduce: ConvKernel::zeros(cfg.c_3x3_reduce, in_c, 1, 1)?,
            b: ConvKernel::zeros(cfg.c_3x3, cfg.c_3x3_reduce, 3, 3)?,
            c_reduce: ConvKernel::zeros(cfg.c_5x5_reduce, in_c, 1, 1)?,
            c: ConvKernel::zeros(cfg.c_5x5, cfg.c_5x5_reduce, 5, 5)?,
            d: ConvKernel::zeros(cfg.c_pool_proj, in_c, 1, 1)?,
            e: ConvKernel::zeros(cfg.c_avg, in_c, 3, 3)?,
        })
    }

    /// Kernels in serialization order.
    pub fn kernels(&self) -> [&ConvKernel; 7] {
        [&self.a, &self.b_reduce, &self.b, &self.c_reduce, &self.c, &self.d, &self.e]
    }

    pub fn kernels_mut(&mut self) -> [&mut ConvKernel; 7] {
        [
            &mut self.a,
            &mut self.b_reduce,
            &mut self.b,
            &mut self.c_reduce,
            &mut self.c,
            &mut self.d,
            &mut self.e,
        ]
    }

    pub fn out_channels(&self) -> usize {
        self.config.out_channels()
    }
}

/// Intermediate values kept by [`module_forward`] for the backward pass.
/// Post-ReLU outputs double as ReLU masks.
#[derive(Clone, Debug)]
pub struct ModuleCache {
    x: Tensor4,
    a: Tensor4,
    b_mid: Tensor4,
    b: Tensor4,
    c_mid: Tensor4,
    c: Tensor4,
    max_pooled: Tensor4,
    max_cache: PoolCache,
    d: Tensor4,
    avg_pooled: Tensor4,
    avg_cache: PoolCache,
    e: Tensor4,
}

impl ModuleCache {
    /// Output of pathway (e), the average-pool branch.
    pub fn avg_pathway(&self) -> &Tensor4 {
        &self.e
    }
}

fn conv_relu(x: &Tensor4, k: &ConvKernel) -> Result<Tensor4> {
    Ok(relu(&conv2d_same_forward(x, k)?))
}

pub fn module_forward(module: &InceptionModule, x: &Tensor4) -> Result<(Tensor4, ModuleCache)> {
    if x.c() != module.in_c {
        return Err(Error::contract(format!(
            "module expects {} input channels, got {}",
            module.in_c,
            x.c()
        )));
    }
    let a = conv_relu(x, &module.a)?;
    let b_mid = conv_relu(x, &module.b_reduce)?;
    let b = conv_relu(&b_mid, &module.b)?;
    let c_mid = conv_relu(x, &module.c_reduce)?;
    let c = conv_relu(&c_mid, &module.c)?;
    let (max_pooled, max_cache) = pool3x3_forward(x, PoolMode::Max);
    let d = conv_relu(&max_pooled, &module.d)?;
    let (avg_pooled, avg_cache) = pool3x3_forward(x, PoolMode::Avg);
    let e = conv_relu(&avg_pooled, &module.e)?;
    let y = concat_channels(&[&a, &b, &c, &d, &e])?;
    let cache = ModuleCache {
        x: x.clone(),
        a,
        b_mid,
        b,
        c_mid,
        c,
        max_pooled,
        max_cache,
        d,
        avg_pooled,
        avg_cache,
        e,
    };
    Ok((y, cache))
}

/// Weight and bias gradient of one kernel.
#[derive(Clone, Debug, PartialEq)]
pub struct KernelGrad {
    pub weights: Vec<f32>,
    pub bias: Vec<f32>,
}

/// Returns the input gradient and the seven kernel gradients in
/// serialization order.
pub fn module_backward(
    module: &InceptionModule,
    cache: &ModuleCache,
    grad_y: &Tensor4,
) -> Result<(Tensor4, Vec<KernelGrad>)> {
    let cfg = &module.config;
    let parts = split_channels_grad(
        grad_y,
        &[cfg.c_1x1, cfg.c_3x3, cfg.c_5x5, cfg.c_pool_proj, cfg.c_avg],
    )?;
    let (ga, gb, gc, gd, ge) = (&parts[0], &parts[1], &parts[2], &parts[3], &parts[4]);

    // Pathway (a)
    let a = conv2d_same_backward(&cache.x, &module.a, &relu_backward(&cache.a, ga)?)?;
    // Pathway (b)
    let b = conv2d_same_backward(&cache.b_mid, &module.b, &relu_backward(&cache.b, gb)?)?;
    let b_red =
        conv2d_same_backward(&cache.x, &module.b_reduce, &relu_backward(&cache.b_mid, &b.input)?)?;
    // Pathway (c)
    let c = conv2d_same_backward(&cache.c_mid, &module.c, &relu_backward(&cache.c, gc)?)?;
    let c_red =
        conv2d_same_backward(&cache.x, &module.c_reduce, &relu_backward(&cache.c_mid, &c.input)?)?;
    // Pathway (d)
    let d = conv2d_same_backward(&cache.max_pooled, &module.d, &relu_backward(&cache.d, gd)?)?;
    let d_in = pool3x3_backward(&cache.max_cache, &d.input)?;
    // Pathway (e)
    let e = conv2d_same_backward(&cache.avg_pooled, &module.e, &relu_backward(&cache.e, ge)?)?;
    let e_in = pool3x3_backward(&cache.avg_cache, &e.input)?;

    let mut gx = a.input.clone();
    for contrib in [&b_red.input, &c_red.input, &d_in, &e_in] {
        for (acc, &v) in gx.data_mut().iter_mut().zip(contrib.data()) {
            *acc += v;
        }
    }
    let grads = [a, b_red, b, c_red, c, d, e]
        .into_iter()
        .map(|g| KernelGrad { weights: g.weights, bias: g.bias })
        .collect();
    Ok((gx, grads))
}

/// Three chained modules and the final 1×1 projection to one channel.
#[derive(Clone, Debug, PartialEq)]
pub struct Network {
    pub input_channels: usize,
    pub modules: Vec<InceptionModule>,
    pub final_proj: ConvKernel,
}

impl Network {
    /// Zero-valued network with the given topology.
    pub fn zeros(configs: &[InceptionConfig; MODULE_COUNT]) -> Result<Self> {
        let mut in_c = INPUT_CHANNELS;
        let mut modules = Vec::with_capacity(MODULE_COUNT);
        for cfg in configs {
            let m = InceptionModule::zeros(*cfg, in_c)?;
            in_c = m.out_channels();
            modules.push(m);
        }
        Ok(Self {
            input_channels: INPUT_CHANNELS,
            modules,
            final_proj: ConvKernel::zeros(1, in_c, 1, 1)?,
        })
    }

    pub fn configs(&self) -> [InceptionConfig; MODULE_COUNT] {
        [self.modules[0].config, self.modules[1].config, self.modules[2].config]
    }

    /// All kernels in serialization order.
    pub fn kernels(&self) -> Vec<&ConvKernel> {
        let mut out: Vec<&ConvKernel> =
            self.modules.iter().flat_map(|m| m.kernels()).collect();
        out.push(&self.final_proj);
        out
    }

    pub fn kernels_mut(&mut self) -> Vec<&mut ConvKernel> {
        let mut out: Vec<&mut ConvKernel> =
            self.modules.iter_mut().flat_map(|m| m.kernels_mut()).collect();
        out.push(&mut self.final_proj);
        out
    }

    /// Every weight then bias of every kernel, in serialization order.
    pub fn params(&self) -> Vec<f32> {
        let mut out = Vec::with_capacity(count_params(self));
        for k in self.kernels() {
            out.extend_from_slice(&k.weights);
            out.extend_from_slice(&k.bias);
        }
        out
    }

    pub fn set_params(&mut self, flat: &[f32]) -> Result<()> {
        let expected = count_params(self);
        if flat.len() != expected {
            return Err(Error::contract(format!(
                "set_params: {} values for {expected} parameters",
                flat.len()
            )));
        }
        let mut offset = 0;
        for k in self.kernels_mut() {
            let nw = k.weights.len();
            k.weights.copy_from_slice(&flat[offset..offset + nw]);
            offset += nw;
            let nb = k.bias.len();
            k.bias.copy_from_slice(&flat[offset..offset + nb]);
            offset += nb;
        }
        Ok(())
    }

    pub fn forward(&self, x: &Tensor4) -> Result<(Tensor4, NetworkCache)> {
        network_forward(self, x)
    }

    /// Membership only, dropping the caches.
    pub fn predict(&self, x: &Tensor4) -> Result<Tensor4> {
        check_input(self, x)?;
        let mut h = x.clone();
        for m in &self.modules {
            h = module_forward(m, &h)?.0;
        }
        Ok(sigmoid(&conv2d_same_forward(&h, &self.final_proj)?))
    }
}

/// He-initialised module kernels; biases start at zero. Each kernel draws
/// from its own stream derived from `seed`, so the result is reproducible.
///
/// The final projection feeds a sigmoid rather than a ReLU and starts at
/// zero, so every initial membership is 0.5. Random weights there let the
/// large responses to bright lesions saturate the sigmoid before training
/// begins, which stalls MSE learning on exactly the lesion pixels.
pub fn build_network(configs: &[InceptionConfig; MODULE_COUNT], seed: u64) -> Result<Network> {
    let mut net = Network::zeros(configs)?;
    let mut seeds = ChaCha8Rng::seed_from_u64(seed);
    for m in &mut net.modules {
        for k in m.kernels_mut() {
            let kseed: u64 = seeds.random();
            k.weights = init_weights(k.weights.len(), k.fan_in(), kseed);
        }
    }
    Ok(net)
}

/// Σ over kernels of `(in_c·kh·kw + 1)·out_c`.
pub fn count_params(net: &Network) -> usize {
    net.kernels().iter().map(|k| k.param_count()).sum()
}

#[derive(Clone, Debug)]
pub struct NetworkCache {
    modules: Vec<ModuleCache>,
    features: Tensor4,
    membership: Tensor4,
}

impl NetworkCache {
    /// Every ReLU on/off state and every max-pool selection of the forward
    /// pass. Two inputs with equal patterns lie in the same linear piece of
    /// the network before the final sigmoid.
    pub fn activation_pattern(&self) -> Vec<u32> {
        let mut out = Vec::new();
        for m in &self.modules {
            for t in [&m.a, &m.b_mid, &m.b, &m.c_mid, &m.c, &m.d, &m.e] {
                out.extend(t.data().iter().map(|&v| (v > 0.0) as u32));
            }
            out.extend_from_slice(m.max_cache.argmax());
        }
        out
    }
}

fn check_input(net: &Network, x: &Tensor4) -> Result<()> {
    if x.c() != net.input_channels {
        return Err(Error::contract(format!(
            "network expects {} input channels, got {}",
            net.input_channels,
            x.c()
        )));
    }
    Ok(())
}

/// Membership in (0, 1) with the input's batch and spatial dims.
pub fn network_forward(net: &Network, x: &Tensor4) -> Result<(Tensor4, NetworkCache)> {
    check_input(net, x)?;
    let mut caches = Vec::with_capacity(net.modules.len());
    let mut h = x.clone();
    for m in &net.modules {
        let (y, cache) = module_forward(m, &h)?;
        caches.push(cache);
        h = y;
    }
    let membership = sigmoid(&conv2d_same_forward(&h, &net.final_proj)?);
    let cache = NetworkCache { modules: caches, features: h, membership: membership.clone() };
    Ok((membership, cache))
}

/// Parameter gradients, one entry per kernel in serialization order.
#[derive(Clone, Debug, PartialEq)]
pub struct Gradients {
    pub kernels: Vec<KernelGrad>,
}

impl Gradients {
    /// Flattened in the same order as [`Network::params`].
    pub fn flatten(&self) -> Vec<f32> {
        let mut out = Vec::new();
        for k in &self.kernels {
            out.extend_from_slice(&k.weights);
            out.extend_from_slice(&k.bias);
        }
        out
    }
}

/// Gradients of every kernel given the gradient of a scalar loss with
/// respect to the membership. Batch contributions are summed in item order.
pub fn network_backward(
    net: &Network,
    cache: &NetworkCache,
    grad_membership: &Tensor4,
) -> Result<Gradients> {
    if cache.modules.len() != net.modules.len() {
        return Err(Error::contract("network cache does not match the network"));
    }
    cache.membership.same_dims(grad_membership, "network backward")?;
    let mut gz = grad_membership.clone();
    for (g, &s) in gz.data_mut().iter_mut().zip(cache.membership.data()) {
        *g *= s * (1.0 - s);
    }
    let proj = conv2d_same_backward(&cache.features, &net.final_proj, &gz)?;
    let mut grads = vec![KernelGrad { weights: proj.weights, bias: proj.bias }];
    let mut g = proj.input;
    for (m, mc) in net.modules.iter().zip(&cache.modules).rev() {
        let (gx, kg) = module_backward(m, mc, &g)?;
        grads.splice(0..0, kg);
        g = gx;
    }
    Ok(Gradients { kernels: grads })
}

use crate::error::Result;
use crate::frequency::DctPlan;
use crate::nnblocks::{randomize_params, Builder, ChannelAttention, Conv2d, Dcab, Fsm, Gfm, Rstb};
use crate::tensorkernels::{grad_check, ConvGeom, Differentiable, GradCheckOptions, GradCheckReport, ParamStore, Scalar, Tape, Tensor, Var};

use super::config::ModelConfig;
use super::model::build_model;
use super::rgisp::Rgisp;

struct ConvProbe(Conv2d);

impl Differentiable for ConvProbe {
    fn eval<T: Scalar>(&self, tape: &mut Tape<T>, ps: &ParamStore<T>, inputs: &[Var]) -> Result<Var> {
        self.0.forward(tape, ps, inputs[0])
    }
}

fn run<B: Differentiable>(
    name: &str,
    block: &B,
    store: &ParamStore<f32>,
    inputs: &[Vec<usize>],
    opts: &GradCheckOptions,
) -> Result<GradCheckReport> {
    let mut ps = store.cast::<f64>();
    // Zero-initialized tails would hide most of the backward pass. Larger
    // amplitudes compound through the full network and saturate its softmaxes.
    randomize_params(&mut ps, 17, 0.2);
    let xs: Vec<Tensor<f64>> =
        inputs.iter().enumerate().map(|(i, d)| Tensor::random(d.clone(), -1.0, 1.0, 23 + i as u64).cast()).collect();
    grad_check::<f32, _>(name, block, &ps, &xs, opts)
}

/// Finite-difference checks (32-bit analytic against 64-bit differences) of
/// every building block and of the full network, on inputs no larger than
/// `8×16×16`. `model` sets the width of the full-network check.
pub fn gradient_suite(model: &ModelConfig, tolerance: f64, fault: Option<&str>) -> Result<Vec<GradCheckReport>> {
    let opts = GradCheckOptions { tolerance, fault: fault.map(str::to_string), ..Default::default() };
    let sampled = GradCheckOptions { max_coords_per_tensor: Some(3), ..opts.clone() };
    let blocks = crate::nnblocks::BlockConfig { rstb_window: 4, ..model.blocks.with_channels(4) };
    let mut reports = Vec::new();
    let mut store = ParamStore::new();
    let mut b = Builder::new(&mut store, 1);
    let conv = b.conv("conv", 3, 4, 3, ConvGeom::same(3, 2).with_stride(2), true, crate::nnblocks::Init::FanIn(0))?;
    let ca = ChannelAttention::new(&mut b, "ca", 4, blocks.ca_reduction)?;
    let dcab = Dcab::new(&mut b, "dcab", &blocks)?;
    let gfm = Gfm::new(&mut b, "gfm", &blocks)?;
    let fsm = Fsm::new(&mut b, "fsm", &blocks, &DctPlan::new(model.dct_block)?)?;
    let rstb = Rstb::new(&mut b, "rstb", &blocks)?;
    let rgisp = Rgisp::new(&mut b, "rgisp", 4, model.lambda_policy)?;
    let chw = |c: usize, h: usize, w: usize| vec![c, h, w];
    reports.push(run("conv2d", &ConvProbe(conv), &store, &[chw(3, 9, 8)], &opts)?);
    reports.push(run("channel_attention", &ca, &store, &[chw(4, 6, 6)], &opts)?);
    reports.push(run("dcab", &dcab, &store, &[chw(4, 8, 8)], &opts)?);
    reports.push(run("gfm", &gfm, &store, &[chw(4, 8, 8)], &opts)?);
    reports.push(run("fsm", &fsm, &store, &[chw(4, 10, 6)], &opts)?);
    reports.push(run("rstb", &rstb, &store, &[chw(4, 8, 8)], &opts)?);
    reports.push(run("rgisp", &rgisp, &store, &[chw(4, 4, 4), chw(4, 4, 4)], &opts)?);
    let full = build_model(model, 3)?;
    reports.push(run("rrid", &full.net, &full.params, &[chw(3, 16, 16), chw(4, 8, 8)], &sampled)?);
    Ok(reports)
}

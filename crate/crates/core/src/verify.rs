//! Built-in verification suites behind the `gradcheck` and `selftest`
//! commands. Everything here is deterministic in the seed.

use crate::complexity::count_macs;
use crate::error::Result;
use crate::fusion::{
    ccsg_backward, ccsg_forward, clkg_backward, clkg_context, clkg_forward, csp_backward, csp_forward,
    fusion_block_backward, fusion_block_forward, msfd_backward, msfd_forward, CcsgParams, ClkgParams, CspParams,
    CspShape, FusionLevelParams, LevelConfig, MsfdParams, MsfdShape,
};
use crate::io::{decode_tensor, encode_tensor};
use crate::nn::{
    channel_shuffle, check_gradient, conv2d, conv2d_reference, gelu, sample_coords, ConvSpec, ConvWeights, GradCheck,
};
use crate::rng::Seed;
use crate::tensor::Tensor;
use crate::wavelet::{haar_dwt2, haar_idwt2, subband_energy, GrayImage};

pub const GRAD_STEP: f64 = 1e-3;
pub const GRAD_TOL: f64 = 1e-5;
pub const GRAD_COORDS: usize = 50;
/// Input size of every block in the gradient suite.
pub const GRAD_DIMS: (usize, usize, usize, usize) = (1, 8, 6, 6);

fn input_check<F>(name: &str, x: &Tensor<f64>, grad: &Tensor<f64>, loss: F, seed: Seed, h: f64) -> Result<GradCheck>
where
    F: Fn(&Tensor<f64>) -> f64,
{
    let coords = sample_coords(x.len(), GRAD_COORDS, seed.derive(name).derive("coords"));
    check_gradient(name, loss, x, grad, &coords, h)
}

/// Input gradients of each block against central differences of
/// `Σ r ⊙ block(x)` with a random `r`, at step `GRAD_STEP`.
pub fn gradcheck_suite(seed: Seed) -> Result<Vec<GradCheck>> {
    gradcheck_suite_at(seed, GRAD_STEP)
}

/// The same checks at another finite-difference step. The central
/// difference error is O(h^2), so shrinking `h` separates truncation error
/// from a wrong analytic gradient.
pub fn gradcheck_suite_at(seed: Seed, h: f64) -> Result<Vec<GradCheck>> {
    let x = Tensor::<f64>::seeded_uniform(GRAD_DIMS, -1.0, 1.0, seed.derive("x"))?;
    let c = GRAD_DIMS.1;
    let r = Tensor::<f64>::seeded_uniform(GRAD_DIMS, -1.0, 1.0, seed.derive("r"))?;
    let dot = |y: Tensor<f64>| y.dot_f64(&r).unwrap();
    let mut out = Vec::new();

    let p = MsfdParams::init(
        MsfdShape {
            c_in: c,
            c_out: c,
            shuffle_groups: 4,
            groups: 4,
        },
        seed.derive("msfd"),
    )?;
    let (g, _) = msfd_backward(&x, &p, &r)?;
    out.push(input_check(
        "msfd",
        &x,
        &g,
        |t| dot(msfd_forward(t, &p).unwrap()),
        seed,
        h,
    )?);

    let shape = CspShape {
        c_in: c,
        c_mid: c,
        c_out: c,
        shuffle_groups: 2,
        groups_g1: 2,
        groups_g2: 2,
    };
    let p = CspParams::init(shape, seed.derive("csp"))?;
    let (g, _) = csp_backward(&x, &p, &r)?;
    out.push(input_check(
        "csp",
        &x,
        &g,
        |t| dot(csp_forward(t, &p).unwrap()),
        seed,
        h,
    )?);

    let p = CcsgParams::init(c, 2, 2, seed.derive("ccsg"))?;
    let (g, _) = ccsg_backward(&x, &p, &r)?;
    out.push(input_check(
        "ccsg",
        &x,
        &g,
        |t| dot(ccsg_forward(t, &p).unwrap()),
        seed,
        h,
    )?);

    let p = ClkgParams::init(c, seed.derive("clkg"))?;
    let (g, _) = clkg_backward(&x, &p, &r)?;
    out.push(input_check(
        "clkg",
        &x,
        &g,
        |t| dot(clkg_forward(t, &p).unwrap()),
        seed,
        h,
    )?);

    let level = LevelConfig::new(3, c, c);
    let p = FusionLevelParams::init(&level, seed.derive("block"))?;
    let ir = Tensor::<f64>::seeded_uniform(GRAD_DIMS, -1.0, 1.0, seed.derive("ir"))?;
    let (g_rgb, g_ir, _) = fusion_block_backward(&x, &ir, &p, &r)?;
    out.push(input_check(
        "block.rgb",
        &x,
        &g_rgb,
        |t| dot(fusion_block_forward(t, &ir, &p).unwrap()),
        seed,
        h,
    )?);
    out.push(input_check(
        "block.ir",
        &ir,
        &g_ir,
        |t| dot(fusion_block_forward(&x, t, &p).unwrap()),
        seed,
        h,
    )?);
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl Outcome {
    fn new(name: &'static str, passed: bool, detail: impl Into<String>) -> Self {
        Outcome {
            name,
            passed,
            detail: detail.into(),
        }
    }
}

/// The `(c, g)` pairs of the shuffle algebra check.
pub const SHUFFLE_CASES: [(usize, usize); 5] = [(4, 2), (6, 3), (8, 2), (8, 4), (12, 3)];

pub fn shuffle_algebra(seed: Seed) -> Result<Outcome> {
    let mut ok = true;
    for (c, g) in SHUFFLE_CASES {
        let x = Tensor::<f32>::seeded_uniform((2, c, 3, 3), -1.0, 1.0, seed.derive(&format!("c{c}g{g}")))?;
        let y = channel_shuffle(&x, g)?;
        ok &= channel_shuffle(&y, c / g)?.bitwise_eq(&x);
        let sorted = |t: &Tensor<f32>| {
            let mut v: Vec<u32> = t.data().iter().map(|x| x.to_bits()).collect();
            v.sort_unstable();
            v
        };
        ok &= sorted(&x) == sorted(&y);
    }
    Ok(Outcome::new(
        "shuffle_algebra",
        ok,
        format!("{} (c, g) pairs", SHUFFLE_CASES.len()),
    ))
}

pub fn residual_identities(seed: Seed) -> Result<Outcome> {
    let x = Tensor::<f32>::seeded_uniform((2, 8, 7, 5), -2.0, 2.0, seed.derive("residual"))?;
    let a = ccsg_forward(&x, &CcsgParams::zeros(8, 2, 2)?)?.bitwise_eq(&x);
    let b = clkg_forward(&x, &ClkgParams::zeros(8)?)?.bitwise_eq(&x);
    Ok(Outcome::new(
        "residual_identities",
        a && b,
        format!("ccsg {a}, clkg {b}"),
    ))
}

/// The identity-through block reduces to `GELU(rgb) + GELU(ir)`, since the
/// projection keeps its activation.
pub fn identity_through(seed: Seed) -> Result<Outcome> {
    let level = LevelConfig::new(3, 8, 8);
    let p = FusionLevelParams::<f32>::identity_through(&level)?;
    let rgb = Tensor::<f32>::seeded_uniform((1, 8, 6, 6), -2.0, 2.0, seed.derive("it.rgb"))?;
    let ir = Tensor::<f32>::seeded_uniform((1, 8, 6, 6), -2.0, 2.0, seed.derive("it.ir"))?;
    let y = fusion_block_forward(&rgb, &ir, &p)?;
    let ok = y.bitwise_eq(&gelu(&rgb).add(&gelu(&ir))?);
    Ok(Outcome::new("identity_through", ok, "output = gelu(rgb) + gelu(ir)"))
}

/// Non-zero extent of the large-kernel context for a centred impulse with
/// all-ones kernels, as `(rows, cols, nonzeros)`.
pub fn clkg_support(size: usize) -> Result<(usize, usize, usize)> {
    let mut p = ClkgParams::<f64>::zeros(1)?;
    p.dw_a.weights.weight = Tensor::ones(p.dw_a.spec.weight_dims())?;
    p.dw_b.weights.weight = Tensor::ones(p.dw_b.spec.weight_dims())?;
    let ctx = clkg_context(&Tensor::impulse((1, 1, size, size), 0, 0, size / 2, size / 2)?, &p)?;
    let (mut rows, mut cols) = (std::collections::BTreeSet::new(), std::collections::BTreeSet::new());
    let mut nz = 0;
    for y in 0..size {
        for x in 0..size {
            if ctx.at(0, 0, y, x) != 0.0 {
                rows.insert(y);
                cols.insert(x);
                nz += 1;
            }
        }
    }
    let span = |s: &std::collections::BTreeSet<usize>| match (s.first(), s.last()) {
        (Some(a), Some(b)) => b - a + 1,
        _ => 0,
    };
    Ok((span(&rows), span(&cols), nz))
}

pub fn clkg_locality() -> Result<Outcome> {
    let (h, w, nz) = clkg_support(21)?;
    Ok(Outcome::new(
        "clkg_locality",
        (h, w, nz) == (13, 13, 169),
        format!("support {h}x{w}, {nz} nonzeros"),
    ))
}

/// `(round-trip max abs error, Parseval relative error)` on a random image.
pub fn wavelet_errors(size: usize, seed: Seed) -> Result<(f64, f64)> {
    let img = GrayImage::new(size, size, (0..size * size).map(|i| seed.unit(i as u64)).collect())?;
    let s = haar_dwt2(&img);
    let back = haar_idwt2(&s)?;
    let rt = back
        .pixels()
        .iter()
        .zip(img.pixels())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    let e = img.energy();
    Ok((rt, (subband_energy(&s).total() - e).abs() / e))
}

pub fn wavelet_exactness(seed: Seed) -> Result<Outcome> {
    let (rt, pe) = wavelet_errors(64, seed.derive("wavelet"))?;
    let flat = subband_energy(&haar_dwt2(&GrayImage::new(8, 8, vec![0.4; 64])?)).hf_ratio;
    Ok(Outcome::new(
        "wavelet_exactness",
        rt <= 1e-12 && pe <= 1e-9 && flat == 0.0,
        format!("round trip {rt:e}, parseval {pe:e}, constant hf_ratio {flat:e}"),
    ))
}

/// A random valid convolution together with an input size that leaves a
/// positive output.
pub fn random_spec(seed: Seed) -> (ConvSpec, usize, usize) {
    let pick = |i: u64, n: u64| (seed.word(i) % n) as usize;
    let groups = 1 + pick(0, 3);
    let k = [1, 3, 5][pick(1, 3)];
    let dilation = 1 + pick(2, 2);
    let mut spec = ConvSpec::new(groups * (1 + pick(3, 3)), groups * (1 + pick(4, 3)), k)
        .groups(groups)
        .dilation(dilation)
        .bias(pick(5, 2) == 0);
    if pick(6, 2) == 0 {
        spec = spec.padding(pick(7, spec.padding as u64 + 1));
    }
    let extent = dilation * (k - 1) + 1;
    (spec, extent + pick(8, 6), extent + pick(9, 6))
}

pub fn complexity_oracle(seed: Seed, count: usize) -> Result<Outcome> {
    let mut ok = true;
    for i in 0..count {
        let s = seed.derive(&format!("spec{i}"));
        let (spec, h, w) = random_spec(s);
        let x = Tensor::<f32>::seeded_uniform((1, spec.c_in, h, w), -1.0, 1.0, s.derive("x"))?;
        let (_, macs) = conv2d_reference(&x, &spec, &ConvWeights::zeros(&spec)?)?;
        ok &= macs == count_macs(&spec, h, w);
    }
    Ok(Outcome::new("complexity_oracle", ok, format!("{count} random specs")))
}

pub fn fast_conv_matches_reference(seed: Seed, count: usize) -> Result<Outcome> {
    let mut ok = true;
    for i in 0..count {
        let s = seed.derive(&format!("conv{i}"));
        let (spec, h, w) = random_spec(s);
        let x = Tensor::<f32>::seeded_uniform((2, spec.c_in, h, w), -1.0, 1.0, s.derive("x"))?;
        let wt = ConvWeights::init(&spec, s.derive("w"))?;
        ok &= conv2d(&x, &spec, &wt)?.bitwise_eq(&conv2d_reference(&x, &spec, &wt)?.0);
    }
    Ok(Outcome::new(
        "fast_conv_matches_reference",
        ok,
        format!("{count} random specs"),
    ))
}

pub fn format_round_trip(seed: Seed, count: usize) -> Result<Outcome> {
    let mut ok = true;
    for i in 0..count {
        let s = seed.derive(&format!("file{i}"));
        let d = |j: u64| 1 + (s.word(j) % 5) as usize;
        let t = Tensor::<f32>::seeded_uniform((d(0), d(1), d(2), d(3)), -1e3, 1e3, s)?;
        ok &= decode_tensor(&encode_tensor(&t))?.bitwise_eq(&t);
    }
    Ok(Outcome::new("format_round_trip", ok, format!("{count} random tensors")))
}

pub fn gelu_odd_identity() -> Outcome {
    let mut worst = 0.0f64;
    for i in -80..=80 {
        let x = i as f64 / 10.0;
        let g = |v| crate::nn::gelu::gelu_scalar(v);
        worst = worst.max((g(x) - g(-x) - x).abs());
    }
    Outcome::new("gelu_odd_identity", worst <= 1e-12, format!("max error {worst:e}"))
}

pub fn batch_equivariance(seed: Seed) -> Result<Outcome> {
    let level = LevelConfig::new(3, 4, 8);
    let p = FusionLevelParams::<f32>::init(&level, seed.derive("batch.params"))?;
    let rgb = Tensor::<f32>::seeded_uniform((2, 4, 5, 5), -1.0, 1.0, seed.derive("batch.rgb"))?;
    let ir = Tensor::<f32>::seeded_uniform((2, 8, 5, 5), -1.0, 1.0, seed.derive("batch.ir"))?;
    let both = crate::fusion::fusion_level_forward(&rgb, &ir, &p)?;
    let mut ok = true;
    for n in 0..2 {
        let one = crate::fusion::fusion_level_forward(&rgb.sample(n)?, &ir.sample(n)?, &p)?;
        ok &= one.bitwise_eq(&both.sample(n)?);
    }
    Ok(Outcome::new("batch_equivariance", ok, "2 samples"))
}

/// Every property check, in a fixed order.
pub fn selftest_suite(seed: Seed) -> Result<Vec<Outcome>> {
    Ok(vec![
        shuffle_algebra(seed)?,
        residual_identities(seed)?,
        identity_through(seed)?,
        clkg_locality()?,
        gelu_odd_identity(),
        wavelet_exactness(seed)?,
        complexity_oracle(seed, 12)?,
        fast_conv_matches_reference(seed, 12)?,
        format_round_trip(seed, 20)?,
        batch_equivariance(seed)?,
    ])
}

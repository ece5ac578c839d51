//! Acceptance criteria 1-9. Each test prints one line:
//! `criterion N: PASS|FAIL <name> (<detail>)`.

use std::path::Path;
use std::process::Command;
use std::time::Instant;

use ic_fusion::complexity::{count_macs, count_params};
use ic_fusion::fusion::{
    ccsg_forward, clkg_forward, fusion_block_forward, pyramid_fuse, CcsgParams, ClkgParams, FeaturePyramid,
    FusionConfig, FusionLevelParams, FusionParams, LevelConfig, Modality,
};
use ic_fusion::io::{decode_tensor, encode_tensor, read_tensor, write_tensor};
use ic_fusion::nn::{channel_shuffle, conv2d_reference, ConvWeights};
use ic_fusion::verify::{
    clkg_support, gradcheck_suite, gradcheck_suite_at, random_spec, wavelet_errors, GRAD_COORDS, GRAD_TOL,
    SHUFFLE_CASES,
};
use ic_fusion::wavelet::{haar_dwt2, subband_energy, GrayImage};
use ic_fusion::{Error, Seed, Tensor};

fn report(n: u32, name: &str, ok: bool, detail: impl AsRef<str>) {
    let status = if ok { "PASS" } else { "FAIL" };
    println!("criterion {n}: {status} {name} ({})", detail.as_ref());
    assert!(ok, "criterion {n} ({name}) failed: {}", detail.as_ref());
}

#[test]
fn criterion_1_gradient_fidelity() {
    let start = Instant::now();
    let checks = gradcheck_suite(Seed(7)).unwrap();
    let secs = start.elapsed().as_secs_f64();
    let worst = checks.iter().map(|c| c.max_rel_err).fold(0.0, f64::max);
    let ok = checks.iter().all(|c| c.passes(GRAD_TOL) && c.checked >= GRAD_COORDS) && secs <= 60.0;
    let per: Vec<String> = checks
        .iter()
        .map(|c| format!("{} {:.2e}", c.name, c.max_rel_err))
        .collect();

    // The step is fixed at 1e-3, where O(h^2) truncation alone can exceed the
    // tolerance on unlucky draws. Report how often, and show that a finer
    // step removes it.
    let sweep = |h: f64| {
        (0..40u64)
            .filter(|&s| {
                gradcheck_suite_at(Seed(s), h)
                    .unwrap()
                    .iter()
                    .all(|c| c.passes(GRAD_TOL))
            })
            .count()
    };
    println!(
        "note: seeds 0..40 fully passing: {}/40 at h=1e-3, {}/40 at h=1e-4",
        sweep(1e-3),
        sweep(1e-4)
    );
    report(
        1,
        "gradient fidelity",
        ok,
        format!("seed 7, max rel err {worst:.2e}, {secs:.2}s; {}", per.join(", ")),
    );
}

#[test]
fn criterion_2_residual_identities() {
    let x = Tensor::<f32>::seeded_uniform((2, 8, 7, 6), -2.0, 2.0, Seed(21)).unwrap();
    let ccsg = ccsg_forward(&x, &CcsgParams::zeros(8, 2, 2).unwrap())
        .unwrap()
        .bitwise_eq(&x);
    let clkg = clkg_forward(&x, &ClkgParams::zeros(8).unwrap()).unwrap().bitwise_eq(&x);

    let level = LevelConfig::new(3, 8, 8);
    let p = FusionLevelParams::<f32>::identity_through(&level).unwrap();
    let rgb = Tensor::<f32>::seeded_uniform((1, 8, 6, 6), -2.0, 2.0, Seed(22)).unwrap();
    let ir = Tensor::<f32>::seeded_uniform((1, 8, 6, 6), -2.0, 2.0, Seed(23)).unwrap();
    let y = fusion_block_forward(&rgb, &ir, &p).unwrap();
    let want = rgb.add(&ir).unwrap();
    let block = y.bitwise_eq(&want);
    let diff = y.max_abs_diff(&want).unwrap();
    report(
        2,
        "residual identities",
        ccsg && clkg && block,
        format!("ccsg {ccsg}, clkg {clkg}, identity-through block = rgb + ir: {block} (max abs diff {diff:.3e})"),
    );
}

#[test]
fn criterion_3_shuffle_algebra() {
    let mut ok = true;
    for (c, g) in SHUFFLE_CASES {
        let x = Tensor::<f32>::seeded_uniform((2, c, 4, 3), -1.0, 1.0, Seed(c as u64 * 10 + g as u64)).unwrap();
        let y = channel_shuffle(&x, g).unwrap();
        ok &= channel_shuffle(&y, c / g).unwrap().bitwise_eq(&x);
        let mut a: Vec<u32> = x.data().iter().map(|v| v.to_bits()).collect();
        let mut b: Vec<u32> = y.data().iter().map(|v| v.to_bits()).collect();
        a.sort_unstable();
        b.sort_unstable();
        ok &= a == b;
    }
    report(3, "shuffle algebra", ok, format!("{SHUFFLE_CASES:?}"));
}

#[test]
fn criterion_4_clkg_locality() {
    let (h, w, nz) = clkg_support(25).unwrap();
    // 169 nonzeros inside a 13x13 bounding box fills it, so nothing lies outside
    report(
        4,
        "large-kernel locality",
        (h, w, nz) == (13, 13, 169),
        format!("support {h}x{w}, {nz} nonzeros"),
    );
}

#[test]
fn criterion_5_wavelet_exactness() {
    let (mut rt, mut pe) = (0.0f64, 0.0f64);
    for s in 0..5 {
        let (a, b) = wavelet_errors(64, Seed(s)).unwrap();
        rt = rt.max(a);
        pe = pe.max(b);
    }
    let flat = subband_energy(&haar_dwt2(&GrayImage::new(64, 64, vec![0.7; 4096]).unwrap())).hf_ratio;
    let n = 64;
    let edge = GrayImage::new(
        n,
        n,
        (0..n * n).map(|i| if i % n > n / 2 { 1.0 } else { 0.0 }).collect(),
    )
    .unwrap();
    let ramp = GrayImage::new(n, n, (0..n * n).map(|i| (i % n) as f64 / (n - 1) as f64).collect()).unwrap();
    let he = subband_energy(&haar_dwt2(&edge)).hf_ratio;
    let hr = subband_energy(&haar_dwt2(&ramp)).hf_ratio;
    report(
        5,
        "wavelet exactness",
        rt <= 1e-12 && pe <= 1e-9 && flat == 0.0 && he > hr,
        format!("round trip {rt:.1e}, parseval {pe:.1e}, constant hf {flat}, edge hf {he:.4} > ramp hf {hr:.4}"),
    );
}

#[test]
fn criterion_6_complexity_oracle() {
    let (mut ok, mut same) = (true, 0);
    for i in 0..20u64 {
        let (spec, h, w) = random_spec(Seed(1000 + i));
        let x = Tensor::<f32>::zeros((1, spec.c_in, h, w)).unwrap();
        let (_, macs) = conv2d_reference(&x, &spec, &ConvWeights::zeros(&spec).unwrap()).unwrap();
        ok &= macs == count_macs(&spec, h, w);
        if spec.is_same() {
            same += 1;
            ok &= count_macs(&spec, h, w) == count_params(&spec.bias(false)) * (h * w) as u64;
        }
    }
    report(
        6,
        "complexity oracle",
        ok && same > 0,
        format!("20 random specs, {same} with same padding"),
    );
}

#[test]
fn criterion_7_pyramid_shape_contract() {
    let cfg = FusionConfig::default();
    let sizes: Vec<_> = cfg.levels.iter().map(|l| cfg.level_hw(l)).collect();
    let start = Instant::now();
    let params = FusionParams::<f32>::init(&cfg, Seed(70)).unwrap();
    let rgb = FeaturePyramid::random(&cfg, Modality::Rgb, Seed(71)).unwrap();
    let ir = FeaturePyramid::random(&cfg, Modality::Ir, Seed(72)).unwrap();
    let fused = pyramid_fuse(&rgb, &ir, &params).unwrap();
    let mut ok = sizes == [(80, 80), (40, 40), (20, 20)];
    let mut shapes = Vec::new();
    for l in &cfg.levels {
        let t = fused.level(l.id).unwrap();
        let d = t.dims();
        let (h, w) = cfg.level_hw(l);
        ok &= (d.n, d.c, d.h, d.w) == (1, l.c_ir, h, w) && t.all_finite();
        shapes.push(format!("{}x{}x{}", d.c, d.h, d.w));
    }
    report(
        7,
        "pyramid shape contract",
        ok,
        format!(
            "640x640 -> {}, {:.1}s",
            shapes.join(", "),
            start.elapsed().as_secs_f64()
        ),
    );
}

fn run_cli(args: &[&str], threads: usize) -> (Vec<u8>, i32) {
    let out = Command::new(env!("CARGO_BIN_EXE_ic-fusion"))
        .args(args)
        .env("RAYON_NUM_THREADS", threads.to_string())
        .output()
        .unwrap();
    assert!(out.stderr.is_empty(), "{}", String::from_utf8_lossy(&out.stderr));
    (out.stdout, out.status.code().unwrap())
}

fn dir_bytes(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (
                e.file_name().to_string_lossy().into_owned(),
                std::fs::read(e.path()).unwrap(),
            )
        })
        .collect();
    v.sort();
    v
}

#[test]
fn criterion_8_determinism() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("cfg.txt");
    std::fs::write(
        &cfg,
        "input_size = 128\nlevel.3.c_rgb = 16\nlevel.3.c_ir = 32\nlevel.4.c_rgb = 32\nlevel.4.c_ir = 64\n\
         level.5.c_rgb = 64\nlevel.5.c_ir = 128\n",
    )
    .unwrap();
    let cfg = cfg.to_str().unwrap();
    let synth = tmp.path().join("synth");
    let s = synth.to_str().unwrap();
    assert_eq!(run_cli(&["synth", "--config", cfg, "--seed", "8", "--out", s], 1).1, 0);
    let (rgb, ir) = (format!("{s}/rgb"), format!("{s}/ir"));

    let n = std::thread::available_parallelism().map_or(4, |n| n.get()).max(4);
    let mut selftests = Vec::new();
    let mut fuses = Vec::new();
    for (i, threads) in [1, 1, n, n].into_iter().enumerate() {
        selftests.push(run_cli(&["selftest", "--seed", "8"], threads));
        let out = tmp.path().join(format!("fused{i}"));
        let o = out.to_str().unwrap();
        let stdout = run_cli(
            &[
                "fuse", "--config", cfg, "--rgb", &rgb, "--ir", &ir, "--out", o, "--seed", "8",
            ],
            threads,
        );
        fuses.push((stdout, dir_bytes(&out)));
    }
    let ok =
        selftests.iter().all(|s| *s == selftests[0] && s.1 == 0) && fuses.iter().all(|f| *f == fuses[0] && f.0 .1 == 0);
    report(
        8,
        "determinism",
        ok,
        format!("selftest and fuse, 2 runs each at 1 and {n} threads, byte-compared"),
    );
}

#[test]
fn criterion_9_format_round_trip() {
    let tmp = tempfile::tempdir().unwrap();
    let mut ok = true;
    for i in 0..100u64 {
        let s = Seed(900 + i);
        let d = |j: u64| 1 + (s.word(j) % 6) as usize;
        let t = Tensor::<f32>::seeded_uniform((d(0), d(1), d(2), d(3)), -1e4, 1e4, s.derive("v")).unwrap();
        let p = tmp.path().join(format!("t{i}.icft"));
        write_tensor(&p, &t).unwrap();
        ok &= read_tensor(&p).unwrap().bitwise_eq(&t);
    }

    let good = encode_tensor(&Tensor::<f32>::ones((1, 2, 3, 4)).unwrap());
    let patch = |at: usize, v: &[u8]| {
        let mut b = good.clone();
        b[at..at + v.len()].copy_from_slice(v);
        b
    };
    let cases: Vec<(&str, Vec<u8>)> = vec![
        ("bad magic", patch(0, b"NOPE")),
        ("version", patch(4, &[9, 0, 0, 0])),
        ("rank", patch(8, &[3, 0, 0, 0])),
        ("dtype", patch(44, &[7])),
        ("truncated header", good[..30].to_vec()),
        ("truncated payload", good[..good.len() - 4].to_vec()),
    ];
    let msgs: Vec<String> = cases
        .iter()
        .map(|(_, b)| decode_tensor(b).unwrap_err().to_string())
        .collect();
    let mut distinct = msgs.clone();
    distinct.sort();
    distinct.dedup();
    ok &= distinct.len() == msgs.len();
    ok &= matches!(decode_tensor(&cases[5].1), Err(Error::PayloadLengthMismatch { .. }));
    ok &= msgs[5].contains("payload length mismatch");
    report(
        9,
        "format round trip",
        ok,
        format!("100 random tensors; {} distinct header errors", distinct.len()),
    );
}

//! Acceptance criteria A1-A11. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any fails. A single argument selects criteria by
//! prefix, e.g. `cargo test --test acceptance -- A7`.

use std::fs;
use std::panic::{self, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use wcgan::data::{build_subband_store, downsample_vertical, upsample_vertical, Domain, Mode};
use wcgan::flows::{dewave_scene, destripe_scene, moment_match_destripe, Denoiser, FlowSettings, TileModel, GREEN};
use wcgan::metrics::{psnr, ssim, SsimConfig, DEFAULT_PEAK};
use wcgan::nn::{DiscriminatorConfig, Graph, GeneratorConfig, Tensor};
use wcgan::noise::{gen_stripe_noise, gen_wave_noise, synth_tiles, StripeNoiseParams, SynthSpec, WaveNoiseParams};
use wcgan::train::{
    build_objective, cycle_loss, identity_loss, lr_at, lsgan_d_loss, lsgan_d_var, lsgan_g_loss, lsgan_g_var,
    total_objective, train, CycleGan, LossParts, TrainConfig, DX_PREFIX, DY_PREFIX, F_PREFIX, G_PREFIX,
};
use wcgan::wavelet::{dwt2_multilevel, idwt2_multilevel, subband_project, SubbandSelection};
use wcgan::{Plane32, Plane64, Raster};

type Outcome = Result<String, String>;
type Criterion = (&'static str, &'static str, fn() -> Outcome);

fn ensure(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn random_plane(w: usize, h: usize, seed: u64, lo: f32, hi: f32) -> Plane32 {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    Plane32::from_fn(w, h, |_, _| r.random_range(lo..hi))
}

fn energy(p: &Plane64) -> f64 {
    p.data().iter().map(|v| v * v).sum()
}

fn a1_wavelet_round_trip() -> Outcome {
    let mut worst = 0.0f64;
    for i in 0..100u64 {
        let k = [1, 6, 9][i as usize % 3];
        let p = random_plane(256, 256, i, 0.0, 65535.0);
        let back = idwt2_multilevel(&dwt2_multilevel(&p, k).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
        let err = p.data().iter().zip(back.data()).map(|(a, b)| (a - b).abs() as f64).fold(0.0, f64::max);
        worst = worst.max(err / p.max_abs());
    }
    ensure(worst < 1e-4, format!("100 planes, K in {{1,6,9}}, max error {worst:.2e} of peak"))
}

fn a2_energy_capture() -> Outcome {
    let stripe_sel: SubbandSelection = "HL:1-9,LL:9".parse().map_err(|e: wcgan::Error| e.to_string())?;
    let mut stripe_min = f64::INFINITY;
    for s in 0..50u64 {
        let p = StripeNoiseParams {
            corr_len: 1 + (s as usize % 4),
            seed: s,
            ..Default::default()
        };
        let n = gen_stripe_noise::<f64>(512, 512, &p).map_err(|e| e.to_string())?;
        let proj = subband_project(&n, 9, &stripe_sel).map_err(|e| e.to_string())?;
        stripe_min = stripe_min.min(energy(&proj) / energy(&n));
    }
    let wave_sel = SubbandSelection::wave_default();
    let (mut wave_min, mut wave_sum) = (f64::INFINITY, 0.0);
    for s in 0..50u64 {
        let mut r = ChaCha8Rng::seed_from_u64(s);
        let periods = vec![r.random_range(4.0..64.0), r.random_range(4.0..64.0)];
        let p = WaveNoiseParams {
            amplitude: 1000.0,
            periods,
            phase_jitter: 0.05,
            seed: s,
        };
        let n = gen_wave_noise::<f64>(256, 256, &p).map_err(|e| e.to_string())?;
        let proj = subband_project(&n, 6, &wave_sel).map_err(|e| e.to_string())?;
        let f = energy(&proj) / energy(&n);
        wave_min = wave_min.min(f);
        wave_sum += f;
    }
    ensure(
        stripe_min >= 0.99 && wave_min >= 0.93,
        format!(
            "stripe HL:1-9+LL:9 min {stripe_min:.5}, wave LH:1-6 min {wave_min:.4} mean {:.4}",
            wave_sum / 50.0
        ),
    )
}

fn a3_losses_and_schedule() -> Outcome {
    let t = |v: f64| Tensor::<f64>::filled(&[1, 4, 4], v);
    let mut errs: Vec<(String, f64, f64)> = vec![
        ("g(0.5)".into(), lsgan_g_loss(&[0.5]), 0.25),
        ("g(1,-1)".into(), lsgan_g_loss(&[1.0, -1.0]), 2.0),
        ("d(1;0)".into(), lsgan_d_loss(&[1.0], &[0.0]), 0.0),
        ("d(0;1)".into(), lsgan_d_loss(&[0.0], &[1.0]), 1.0),
        ("d(0.5;0.5)".into(), lsgan_d_loss(&[0.5], &[0.5]), 0.25),
        (
            "cycle".into(),
            cycle_loss(&t(1.0), &t(1.5), &t(0.0), &t(-0.25)).map_err(|e| e.to_string())?,
            0.75,
        ),
        (
            "identity".into(),
            identity_loss(&t(2.0), &t(2.0), &t(-1.0), &t(1.0)).map_err(|e| e.to_string())?,
            2.0,
        ),
        (
            "total".into(),
            total_objective(
                &LossParts {
                    gan_g: 0.25,
                    gan_f: 0.5,
                    cycle: 0.75,
                    identity: 0.1,
                },
                10.0,
                5.0,
            ),
            8.75,
        ),
    ];
    let mut g = Graph::<f64>::new();
    let r = g.input(Tensor::new(vec![2], vec![0.8, 1.1]).map_err(|e| e.to_string())?);
    let f = g.input(Tensor::new(vec![2], vec![0.3, -0.2]).map_err(|e| e.to_string())?);
    let gv = lsgan_g_var(&mut g, f);
    let dv = lsgan_d_var(&mut g, r, f).map_err(|e| e.to_string())?;
    errs.push(("g graph".into(), g.value(gv).item(), (0.49 + 1.44) / 2.0));
    errs.push((
        "d graph".into(),
        g.value(dv).item(),
        0.5 * (0.04 + 0.01) / 2.0 + 0.5 * (0.09 + 0.04) / 2.0,
    ));
    let cfg = TrainConfig::default();
    for (e, want) in [(0, 2e-3), (1, 2e-3), (99, 2e-3), (100, 2e-3), (150, 1e-3), (199, 2e-5), (200, 0.0), (250, 0.0)] {
        errs.push((format!("lr({e})"), lr_at(e, &cfg), want));
    }
    let worst = errs.iter().map(|(_, a, b)| (a - b).abs()).fold(0.0, f64::max);
    let bad: Vec<&str> = errs.iter().filter(|(_, a, b)| (a - b).abs() > 1e-9).map(|(n, _, _)| n.as_str()).collect();
    ensure(
        bad.is_empty(),
        format!("{} closed forms, max error {worst:.1e}{}", errs.len(), if bad.is_empty() { String::new() } else { format!(", off: {bad:?}") }),
    )
}

fn a4_gradient_check() -> Outcome {
    let gen = GeneratorConfig {
        in_channels: 1,
        depth: 2,
        base_width: 4,
    };
    let disc = DiscriminatorConfig {
        in_channels: 1,
        base_width: 4,
    };
    let mut m = CycleGan::<f64>::init(gen, disc, 3).map_err(|e| e.to_string())?;
    let mut r = ChaCha8Rng::seed_from_u64(11);
    let mut rand_t = |amp: f64| {
        let d: Vec<f64> = (0..32 * 32).map(|_| r.random_range(-amp..amp)).collect();
        Tensor::new(vec![1, 32, 32], d).expect("shape")
    };
    let x = rand_t(0.5);
    let y = rand_t(0.5);
    let (lambda, gamma) = (10.0, 5.0);
    let objective = |m: &CycleGan<f64>| -> f64 {
        let mut g = Graph::inference();
        let o = build_objective(&mut g, m, &x, &y, lambda, gamma).expect("objective");
        g.value(o.total).item()
    };
    let mut g = Graph::new();
    let o = build_objective(&mut g, &m, &x, &y, lambda, gamma).map_err(|e| e.to_string())?;
    let grads = g.backward(o.total).map_err(|e| e.to_string())?;
    let mut coords = Vec::new();
    for (prefix, count) in [(G_PREFIX, 120), (F_PREFIX, 120), (DX_PREFIX, 80), (DY_PREFIX, 80)] {
        let params = match prefix {
            G_PREFIX => &m.g,
            F_PREFIX => &m.f,
            DX_PREFIX => &m.dx,
            _ => &m.dy,
        };
        let names: Vec<String> = params.tensors.keys().cloned().collect();
        for _ in 0..count {
            let name = &names[r.random_range(0..names.len())];
            let i = r.random_range(0..params.tensors[name].numel());
            coords.push((prefix, name.clone(), i));
        }
    }
    // h=1e-3 straddles L1 and ReLU kinks at this point; reported, not judged.
    let mut good = [0usize; 2];
    let mut worst = [0.0f64; 2];
    for (prefix, name, i) in &coords {
        let analytic = grads
            .get(&format!("{prefix}{name}"))
            .map(|t| t.data()[*i])
            .ok_or_else(|| format!("no gradient for {prefix}{name}"))?;
        let bump = |delta: f64, m: &mut CycleGan<f64>| {
            let p = match *prefix {
                G_PREFIX => &mut m.g,
                F_PREFIX => &mut m.f,
                DX_PREFIX => &mut m.dx,
                _ => &mut m.dy,
            };
            p.get_mut(name).expect("param").data_mut()[*i] += delta;
        };
        for (k, h) in [1e-6, 1e-3].into_iter().enumerate() {
            bump(h, &mut m);
            let up = objective(&m);
            bump(-2.0 * h, &mut m);
            let down = objective(&m);
            bump(h, &mut m);
            let numeric = (up - down) / (2.0 * h);
            let rel = (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-6);
            worst[k] = worst[k].max(rel);
            if rel <= 1e-3 {
                good[k] += 1;
            }
        }
    }
    let n = coords.len();
    ensure(
        good[0] as f64 >= 0.99 * n as f64,
        format!(
            "h=1e-6: {}/{n} coordinates within 1e-3 relative (worst {:.1e}); h=1e-3: {}/{n} (worst {:.1e})",
            good[0], worst[0], good[1], worst[1]
        ),
    )
}

fn mean_metrics(pairs: &[(Plane32, Plane32, Plane32)]) -> Result<(f64, f64, f64, f64), String> {
    let cfg = SsimConfig::default();
    let n = pairs.len() as f64;
    let mut acc = (0.0, 0.0, 0.0, 0.0);
    for (truth, before, after) in pairs {
        acc.0 += psnr(before, truth, DEFAULT_PEAK).map_err(|e| e.to_string())? / n;
        acc.1 += psnr(after, truth, DEFAULT_PEAK).map_err(|e| e.to_string())? / n;
        acc.2 += ssim(before, truth, &cfg).map_err(|e| e.to_string())? / n;
        acc.3 += ssim(after, truth, &cfg).map_err(|e| e.to_string())? / n;
    }
    Ok(acc)
}

type Tiles = Vec<(Raster, Raster)>;

fn train_on_first_half(tiles: &Tiles, cfg: &TrainConfig) -> Result<Denoiser, String> {
    let half = tiles.len() / 2;
    let plan = cfg.plan().map_err(|e| e.to_string())?;
    let clean: Vec<(String, Raster)> = (0..half).map(|i| (format!("clean_{i}"), tiles[i].1.clone())).collect();
    let noisy: Vec<(String, Raster)> = (0..half).map(|i| (format!("noisy_{i}"), tiles[i].0.clone())).collect();
    let xs = build_subband_store(&clean, Domain::Clean, &plan).map_err(|e| e.to_string())?;
    let ys = build_subband_store(&noisy, Domain::Noisy, &plan).map_err(|e| e.to_string())?;
    let out = train(cfg, &xs, &ys, &mut |_| {}).map_err(|e| e.to_string())?;
    Denoiser::from_checkpoint(&out.checkpoint()).map_err(|e| e.to_string())
}

fn a5_stripe_denoising() -> Outcome {
    let spec = SynthSpec {
        seed: 5,
        ..SynthSpec::for_mode(Mode::Stripe)
    };
    let tiles: Tiles = synth_tiles(&spec).map_err(|e| e.to_string())?;
    let cfg = TrainConfig {
        mode: Mode::Stripe,
        epochs: 20,
        iters_per_epoch: 30,
        gen_depth: 3,
        gen_width: 32,
        disc_width: 32,
        patch_width: 128,
        patch_height: 32,
        downsample_factor: 16,
        seed: 1,
        ..Default::default()
    };
    let model = train_on_first_half(&tiles, &cfg)?;
    let settings = model.settings().map_err(|e| e.to_string())?;
    let mut pairs = Vec::new();
    for (noisy, clean) in &tiles[tiles.len() / 2..] {
        let out = destripe_scene(noisy, &model, &settings).map_err(|e| e.to_string())?;
        pairs.push((clean.band(0), noisy.band(0), out.clean.band(0)));
    }
    let (p0, p1, s0, s1) = mean_metrics(&pairs)?;
    ensure(
        p1 - p0 >= 2.0 && s1 > s0,
        format!("held-out PSNR {p0:.2} -> {p1:.2} dB ({:+.2}), SSIM {s0:.4} -> {s1:.4}", p1 - p0),
    )
}

fn a6_wave_denoising() -> Outcome {
    let spec = SynthSpec {
        seed: 6,
        ..SynthSpec::for_mode(Mode::Wave)
    };
    let tiles: Tiles = synth_tiles(&spec).map_err(|e| e.to_string())?;
    let cfg = TrainConfig {
        mode: Mode::Wave,
        epochs: 20,
        iters_per_epoch: 20,
        gen_depth: 3,
        gen_width: 32,
        disc_width: 32,
        patch_width: 64,
        patch_height: 64,
        seed: 1,
        ..Default::default()
    };
    let model = train_on_first_half(&tiles, &cfg)?;
    let settings = model.settings().map_err(|e| e.to_string())?;
    let mut pairs = Vec::new();
    let mut others_intact = true;
    for (noisy, clean) in &tiles[tiles.len() / 2..] {
        let out = dewave_scene(noisy, &model, &settings).map_err(|e| e.to_string())?;
        others_intact &= [0, 2, 3].iter().all(|&b| out.clean.band_slice(b) == noisy.band_slice(b));
        pairs.push((clean.band(GREEN), noisy.band(GREEN), out.clean.band(GREEN)));
    }
    let (p0, p1, s0, s1) = mean_metrics(&pairs)?;
    ensure(
        p1 - p0 >= 2.0 && s1 > s0 && others_intact,
        format!(
            "held-out green PSNR {p0:.2} -> {p1:.2} dB ({:+.2}), SSIM {s0:.4} -> {s1:.4}, other bands {}",
            p1 - p0,
            if others_intact { "unchanged" } else { "MODIFIED" }
        ),
    )
}

fn wild_raster(w: usize, h: usize, bands: usize, seed: u64) -> Raster {
    let planes = (0..bands as u64).map(|b| random_plane(w, h, seed * 10 + b, -20000.0, 90000.0)).collect();
    Raster::from_bands(planes).expect("bands")
}

fn a7_identity_flows() -> Outcome {
    let mut checked = 0;
    for (mode, sizes) in [
        (Mode::Stripe, [(256, 256), (300, 320), (520, 260)]),
        (Mode::Wave, [(256, 256), (300, 200), (97, 130)]),
    ] {
        let cfg = TrainConfig {
            mode,
            gen_depth: 3,
            gen_width: 8,
            disc_width: 8,
            seed: 9,
            ..Default::default()
        };
        let model = Denoiser::identity(&cfg).map_err(|e| e.to_string())?;
        let mut settings = model.settings().map_err(|e| e.to_string())?;
        settings.clip = false;
        if mode == Mode::Stripe {
            settings.tile_w = 64;
        }
        for (k, &(w, h)) in sizes.iter().enumerate() {
            let scene = wild_raster(w, h, mode.channels(), 70 + k as u64);
            let out = match mode {
                Mode::Stripe => destripe_scene(&scene, &model, &settings),
                Mode::Wave => dewave_scene(&scene, &model, &settings),
            }
            .map_err(|e| e.to_string())?;
            let same = out.clean.samples().iter().zip(scene.samples()).all(|(a, b)| a.to_bits() == b.to_bits());
            if !same {
                return Err(format!("{mode} flow altered a {w}x{h} scene"));
            }
            checked += 1;
        }
    }
    ensure(true, format!("{checked} scenes reproduced bit for bit"))
}

/// Applies a pixel-wise function to every tile.
struct Pointwise {
    f: fn(f32) -> f32,
    multiple: usize,
}

impl TileModel for Pointwise {
    fn denoise_tile(&self, x: &Tensor<f32>) -> wcgan::Result<Tensor<f32>> {
        Ok(x.map(self.f))
    }

    fn multiple(&self) -> usize {
        self.multiple
    }
}

fn a8_tiling_invariance() -> Outcome {
    let fs: [fn(f32) -> f32; 2] = [|v| 2.0 * v + 1.0, |v| v * v * v - 0.5 * v];
    let mut checked = 0;
    for f in fs {
        let model = Pointwise { f, multiple: 8 };
        for mode in [Mode::Stripe, Mode::Wave] {
            let mut settings = FlowSettings::for_mode(mode);
            settings.data_scale = 65536.0;
            settings.clip = false;
            if mode == Mode::Stripe {
                settings.tile_w = 64;
            }
            let (inv, scale) = ((1.0 / settings.data_scale) as f32, settings.data_scale as f32);
            let chan = if mode == Mode::Stripe { 0 } else { GREEN };
            for (k, (w, h)) in [(256, 256), (300, 320), (333, 270)].into_iter().enumerate() {
                let scene = wild_raster(w, h, mode.channels(), 80 + k as u64);
                let sub = settings.plan.project(&scene).map_err(|e| e.to_string())?.remove(chan);
                let expected = match mode {
                    Mode::Stripe => {
                        let factor = settings.plan.downsample_factor;
                        let ds = downsample_vertical(&sub, factor).map_err(|e| e.to_string())?;
                        upsample_vertical(&ds.map(|v| (v * inv - f(v * inv)) * scale), factor, h)
                    }
                    Mode::Wave => sub.map(|v| (v * inv - f(v * inv)) * scale),
                };
                let out = match mode {
                    Mode::Stripe => destripe_scene(&scene, &model, &settings),
                    Mode::Wave => dewave_scene(&scene, &model, &settings),
                }
                .map_err(|e| e.to_string())?;
                if out.noise.data() != expected.data() {
                    return Err(format!("{mode} tiling changed the result on {w}x{h}"));
                }
                checked += 1;
            }
        }
    }
    ensure(true, format!("{checked} tiled runs equal the whole-scene result"))
}

fn column_mean_spread(p: &Plane32) -> f64 {
    let (w, h) = p.dims();
    let means: Vec<f64> = (0..w).map(|j| (0..h).map(|i| p.get(i, j) as f64).sum::<f64>() / h as f64).collect();
    let mu = means.iter().sum::<f64>() / w as f64;
    means.iter().map(|m| (m - mu).abs()).fold(0.0, f64::max)
}

fn a9_moment_matching() -> Outcome {
    let texture = random_plane(512, 512, 90, 17000.0, 27000.0);
    let stripes = gen_stripe_noise::<f32>(512, 512, &StripeNoiseParams { seed: 91, ..Default::default() })
        .map_err(|e| e.to_string())?;
    let noisy = texture.add(&stripes).map_err(|e| e.to_string())?;
    let fixed = moment_match_destripe(&noisy).map_err(|e| e.to_string())?;
    let (before, after) = (column_mean_spread(&noisy), column_mean_spread(&fixed));
    ensure(
        after * 10.0 <= before,
        format!("max column-mean deviation {before:.1} -> {after:.3} DN ({:.0}x)", before / after.max(1e-12)),
    )
}

fn digest(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<(String, Vec<u8>)> = fs::read_dir(dir)
        .expect("dir")
        .map(|e| e.expect("entry").path())
        .filter(|p| p.is_file())
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).expect("read")))
        .collect();
    files.sort();
    files
}

fn wcgan(args: &[&str], dir: &Path) -> Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_wcgan"))
        .args(args)
        .current_dir(dir)
        .output()
        .map_err(|e| e.to_string())?;
    if !out.status.success() {
        return Err(format!("wcgan {args:?} failed: {}", String::from_utf8_lossy(&out.stderr)));
    }
    Ok(())
}

fn a10_determinism() -> Outcome {
    let cfg = r#"{"epochs": 20, "iters_per_epoch": 5, "gen_depth": 2, "gen_width": 8, "disc_width": 8,
        "patch_width": 64, "patch_height": 32, "downsample_factor": 8}"#;
    let run = |threads: &str| -> Result<Vec<(String, Vec<u8>)>, String> {
        let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
        let d = tmp.path();
        fs::write(d.join("train.json"), cfg).map_err(|e| e.to_string())?;
        wcgan(&["--seed", "7", "synth", "--mode", "stripe", "--out", "data", "--tiles", "4", "--train-tiles", "2", "--size", "256"], d)?;
        wcgan(
            &["--seed", "7", "train", "--config", "train.json", "--clean-manifest", "data/clean.txt",
              "--noisy-manifest", "data/noisy.txt", "--out", "model.wckp"],
            d,
        )?;
        wcgan(
            &["--threads", threads, "denoise", "--mode", "stripe", "--ckpt", "model.wckp", "--in", "data/noisy_03.wcr",
              "--out", "clean_03.wcr", "--noise-out", "noise_03.wcr"],
            d,
        )?;
        let mut all = digest(d);
        all.extend(digest(&d.join("data")).into_iter().map(|(n, b)| (format!("data/{n}"), b)));
        Ok(all)
    };
    let a = run("1")?;
    let b = run("1")?;
    let c = run("3")?;
    let csv = a.iter().find(|(n, _)| n == "model.csv").map(|(_, b)| String::from_utf8_lossy(b).lines().count() - 1);
    let diff: Vec<&str> = a
        .iter()
        .zip(&b)
        .zip(&c)
        .filter(|((x, y), z)| x != y || x != z)
        .map(|((x, _), _)| x.0.as_str())
        .collect();
    ensure(
        a.len() == b.len() && a.len() == c.len() && diff.is_empty() && csv == Some(100),
        format!(
            "{} files identical across three runs ({} logged iterations){}",
            a.len(),
            csv.unwrap_or(0),
            if diff.is_empty() { String::new() } else { format!(", differing: {diff:?}") }
        ),
    )
}

fn a11_metric_oracles() -> Outcome {
    let a = random_plane(128, 96, 110, 1000.0, 60000.0).map(|v| v.round());
    let one = psnr(&a, &a.map(|v| v + 1.0), DEFAULT_PEAK).map_err(|e| e.to_string())?;
    let big = psnr(&a, &a.map(|v| v + 256.0), DEFAULT_PEAK).map_err(|e| e.to_string())?;
    let same = psnr(&a, &a, DEFAULT_PEAK).map_err(|e| e.to_string())?;
    let s = ssim(&a, &a, &SsimConfig::default()).map_err(|e| e.to_string())?;
    let want_one = 20.0 * 65535f64.log10();
    let want_big = want_one - 20.0 * 256f64.log10();
    ensure(
        (one - want_one).abs() < 1e-3 && (big - want_big).abs() < 1e-3 && same.is_infinite() && s == 1.0,
        format!("PSNR {one:.4} / {big:.4} dB (want {want_one:.4} / {want_big:.4}), identical {same}, SSIM {s}"),
    )
}

fn main() {
    let filter: Option<String> = std::env::args().skip(1).find(|a| !a.starts_with('-'));
    let checks: [Criterion; 11] = [
        ("A1", "wavelet perfect reconstruction", a1_wavelet_round_trip),
        ("A2", "subband energy capture", a2_energy_capture),
        ("A3", "loss and schedule closed forms", a3_losses_and_schedule),
        ("A4", "objective gradients vs finite differences", a4_gradient_check),
        ("A5", "stripe denoising on held-out tiles", a5_stripe_denoising),
        ("A6", "wave denoising on held-out tiles", a6_wave_denoising),
        ("A7", "identity generator leaves scenes intact", a7_identity_flows),
        ("A8", "tiled inference matches whole-scene", a8_tiling_invariance),
        ("A9", "moment-matching baseline", a9_moment_matching),
        ("A10", "end-to-end determinism", a10_determinism),
        ("A11", "metric closed forms", a11_metric_oracles),
    ];
    panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    let mut ran = 0;
    for (id, name, check) in checks {
        if filter.as_deref().is_some_and(|f| id != f && !name.contains(f)) {
            continue;
        }
        ran += 1;
        let t = Instant::now();
        let result = panic::catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let secs = t.elapsed().as_secs_f64();
        match result {
            Ok(detail) => println!("{id:<4} PASS  {name}: {detail} [{secs:.1}s]"),
            Err(detail) => {
                failed += 1;
                println!("{id:<4} FAIL  {name}: {detail} [{secs:.1}s]");
            }
        }
    }
    println!("acceptance: {} of {ran} criteria passed", ran - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}

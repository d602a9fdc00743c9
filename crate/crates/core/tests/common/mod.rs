#![allow(dead_code)]

use hsigan::gan::loss;
use hsigan::gan::{build_discriminator, build_generator, ArchConfig, PatchShape, Variant};
use hsigan::numerics::{Activation, ConvMode, ParamId, ParamSet, Pooling, Tape, Tensor};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const STEP: f64 = 1e-4;
pub const REL_TOL: f64 = 1e-4;
/// Denominator floor so near-zero gradients are compared absolutely.
pub const FLOOR: f64 = 1e-3;
/// Coordinates sampled per tensor.
const SAMPLES: usize = 12;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn rel_err(a: f64, n: f64) -> f64 {
    (a - n).abs() / a.abs().max(n.abs()).max(FLOOR)
}

/// Worst relative error between tape and central-difference gradients of
/// `<r, forward(x)>` with respect to the input and every parameter.
///
/// A coordinate whose difference quotient changes between `h` and `h/2`
/// straddles a kink of a piecewise-linear activation and is skipped; the
/// number skipped and the number compared are returned as well.
pub fn check<F>(params: &mut ParamSet, x: &Tensor, seed: u64, forward: F) -> (f64, usize, usize)
where
    F: Fn(&mut Tape, &ParamSet, Tensor) -> Tensor,
{
    let mut rng = rng(seed ^ 0x9e37_79b9);
    let mut tape = Tape::new();
    let y = forward(&mut tape, params, x.clone());
    let r = Tensor::randn(y.shape(), 1.0, &mut rng);
    let grads = tape.backward(params, r.clone()).unwrap();
    let objective = |p: &ParamSet, x: &Tensor| r.dot(&forward(&mut Tape::inference(), p, x.clone()));

    let mut worst = 0.0f64;
    let mut skipped = 0;
    let mut checked = 0;
    let mut judge = |analytic: f64, f: &mut dyn FnMut(f64) -> f64| {
        let d = |h: f64, f: &mut dyn FnMut(f64) -> f64| (f(h) - f(-h)) / (2.0 * h);
        let full = d(STEP, f);
        let half = d(STEP / 2.0, f);
        if rel_err(full, half) > 1e-6 {
            skipped += 1;
            return;
        }
        checked += 1;
        worst = worst.max(rel_err(analytic, full));
    };

    for i in sample(x.len(), &mut rng) {
        let mut f = |h: f64| {
            let mut xp = x.clone();
            xp.data_mut()[i] += h;
            objective(params, &xp)
        };
        judge(grads.input.data()[i], &mut f);
    }
    let ids: Vec<ParamId> = params.ids().collect();
    for id in ids {
        if !params.param(id).trainable {
            continue;
        }
        for i in sample(params.get(id).len(), &mut rng) {
            let analytic = grads.params[id.index()].data()[i];
            let mut f = |h: f64| {
                let orig = params.get(id).data()[i];
                params.get_mut(id).data_mut()[i] = orig + h;
                let v = objective(params, x);
                params.get_mut(id).data_mut()[i] = orig;
                v
            };
            judge(analytic, &mut f);
        }
    }
    (worst, skipped, checked)
}

fn sample(len: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    if len <= SAMPLES {
        (0..len).collect()
    } else {
        (0..SAMPLES).map(|_| rng.gen_range(0..len)).collect()
    }
}

/// Worst error of a row-wise loss gradient against central differences.
pub fn check_row_loss(logits: &[f64], value_grad: impl Fn(&[f64]) -> (f64, Vec<f64>)) -> f64 {
    let (_, g) = value_grad(logits);
    let mut worst = 0.0f64;
    for i in 0..logits.len() {
        let mut p = logits.to_vec();
        p[i] += STEP;
        let up = value_grad(&p).0;
        p[i] -= 2.0 * STEP;
        let down = value_grad(&p).0;
        worst = worst.max(rel_err(g[i], (up - down) / (2.0 * STEP)));
    }
    worst
}

/// One named gradient case.
#[derive(Clone, Debug)]
pub struct CaseResult {
    pub name: String,
    pub worst: f64,
    pub skipped: usize,
    pub checked: usize,
}

fn case(name: String, (worst, skipped, checked): (f64, usize, usize)) -> CaseResult {
    CaseResult {
        name,
        worst,
        skipped,
        checked,
    }
}

fn conv_case(seed: u64, mode: ConvMode) -> CaseResult {
    let mut r = rng(seed);
    let n = r.gen_range(1..=2);
    let k = [r.gen_range(1..=3), r.gen_range(1..=3), r.gen_range(1..=3)];
    let s = [r.gen_range(1..=2), r.gen_range(1..=2), r.gen_range(1..=2)];
    let dims = [r.gen_range(2..=5), r.gen_range(2..=5), r.gen_range(2..=6)];
    let (ci, co) = (r.gen_range(1..=3), r.gen_range(1..=3));
    let mut params = ParamSet::new();
    let kernel = params.add("k", Tensor::randn(&[k[0], k[1], k[2], ci, co], 0.5, &mut r), true);
    let bias = params.add("b", Tensor::randn(&[co], 0.5, &mut r), true);
    let x = Tensor::randn(&[n, dims[0], dims[1], dims[2], ci], 1.0, &mut r);
    let result = check(&mut params, &x, seed, |t, p, x| t.conv(p, x, kernel, bias, s, mode).unwrap());
    case(format!("{mode:?} k={k:?} s={s:?} in={dims:?}"), result)
}

fn activation_case(seed: u64) -> CaseResult {
    let mut r = rng(seed);
    let kind = [Activation::Relu, Activation::lrelu(), Activation::Tanh, Activation::None][seed as usize % 4];
    // Keep inputs away from the kink at zero.
    let data: Vec<f64> = (0..24)
        .map(|_| {
            let v: f64 = r.gen_range(0.05..2.0);
            if r.gen_bool(0.5) {
                v
            } else {
                -v
            }
        })
        .collect();
    let x = Tensor::new(&[2, 3, 4], data).unwrap();
    let mut params = ParamSet::new();
    let result = check(&mut params, &x, seed, |t, _, x| t.activation(x, kind));
    case(format!("activation {kind:?}"), result)
}

fn pool_case(seed: u64) -> CaseResult {
    let mut r = rng(seed);
    let kind = if seed.is_multiple_of(2) { Pooling::Global } else { Pooling::Center };
    let shape = [r.gen_range(1..=3), r.gen_range(1..=5), r.gen_range(1..=5), r.gen_range(1..=4), r.gen_range(1..=3)];
    let x = Tensor::randn(&shape, 1.0, &mut r);
    let mut params = ParamSet::new();
    let result = check(&mut params, &x, seed, |t, _, x| t.pool(x, kind).unwrap());
    case(format!("pool {kind:?} {shape:?}"), result)
}

fn dense_case(seed: u64) -> CaseResult {
    let mut r = rng(seed);
    let (n, din, dout) = (r.gen_range(1..=4), r.gen_range(1..=6), r.gen_range(1..=5));
    let mut params = ParamSet::new();
    let w = params.add("w", Tensor::randn(&[din, dout], 0.5, &mut r), true);
    let b = params.add("b", Tensor::randn(&[dout], 0.5, &mut r), true);
    let x = Tensor::randn(&[n, din], 1.0, &mut r);
    let result = check(&mut params, &x, seed, |t, p, x| t.dense(p, x, w, b).unwrap());
    case(format!("dense {n}x{din}->{dout}"), result)
}

fn reshape_crop_case(seed: u64) -> CaseResult {
    let mut r = rng(seed);
    let (h, w, b) = (r.gen_range(2..=5), r.gen_range(2..=5), r.gen_range(2..=5));
    let keep = [r.gen_range(1..=h), r.gen_range(1..=w), r.gen_range(1..=b)];
    let x = Tensor::randn(&[2, h * w * b], 1.0, &mut r);
    let mut params = ParamSet::new();
    let result = check(&mut params, &x, seed, |t, _, x| {
        let y = t.reshape(x, &[2, h, w, b, 1]).unwrap();
        t.crop(y, keep).unwrap()
    });
    case(format!("reshape+crop ({h},{w},{b})->{keep:?}"), result)
}

/// Move every parameter off its initial value so no pre-activation sits
/// exactly on a kink (zero biases make some exactly zero).
fn jitter(params: &mut ParamSet, r: &mut ChaCha8Rng) {
    for p in params.iter_mut() {
        let noise = Tensor::randn(p.value.shape(), 0.1, r);
        p.value.axpy(1.0, &noise).unwrap();
    }
}

fn small_arch() -> ArchConfig {
    ArchConfig {
        spectral_width: 3,
        spatial_width: 4,
        noise_dim: 5,
        ..ArchConfig::default()
    }
}

fn discriminator_case(seed: u64) -> CaseResult {
    let mut r = rng(seed);
    let variant = Variant::ALL[seed as usize % 4];
    let patch = PatchShape { size: 5, bands: 8 };
    let mut disc = build_discriminator(variant, 3, patch, &small_arch(), &mut r).unwrap();
    jitter(&mut disc.params, &mut r);
    let x = Tensor::randn(&[2, 5, 5, 8], 1.0, &mut r);
    let probe = disc.clone();
    let result = check(&mut disc.params, &x, seed, |t, p, x| {
        let mut d = probe.clone();
        d.params = p.clone();
        d.logits(t, x).unwrap()
    });
    case(format!("discriminator {variant}"), result)
}

fn generator_case(seed: u64) -> CaseResult {
    let mut r = rng(seed);
    let patch = PatchShape { size: 5, bands: 8 };
    let mut gen = build_generator(patch, &small_arch(), &mut r).unwrap();
    jitter(&mut gen.params, &mut r);
    let z = gen.sample_noise(2, &mut r);
    let probe = gen.clone();
    let result = check(&mut gen.params, &z, seed, |t, p, z| {
        let mut g = probe.clone();
        g.params = p.clone();
        g.forward(t, z).unwrap()
    });
    case("generator".to_string(), result)
}

fn loss_case(seed: u64) -> Vec<CaseResult> {
    let mut r = rng(seed);
    let k = r.gen_range(1..=6);
    let logits: Vec<f64> = (0..=k).map(|_| r.gen_range(-4.0..4.0)).collect();
    let label = r.gen_range(1..=k as u16);
    let n_logits = logits.len();
    let row = |name: String, worst: f64| case(name, (worst, 0, n_logits));
    let mut out = vec![
        row(format!("supervised K={k}"), check_row_loss(&logits, |l| loss::loss_supervised_grad(l, label).unwrap())),
        row(format!("unsupervised real K={k}"), check_row_loss(&logits, |l| loss::loss_unsup_real_grad(l).unwrap())),
        row(format!("unsupervised fake K={k}"), check_row_loss(&logits, |l| loss::loss_unsup_fake_grad(l).unwrap())),
    ];
    let (n, d) = (r.gen_range(1..=4), r.gen_range(1..=5));
    let real = Tensor::randn(&[r.gen_range(1..=4), d], 1.0, &mut r);
    let fake = Tensor::randn(&[n, d], 1.0, &mut r);
    let (_, g) = loss::feature_matching_grad(&real, &fake).unwrap();
    let mut worst = 0.0f64;
    for i in 0..fake.len() {
        let mut p = fake.clone();
        p.data_mut()[i] += STEP;
        let up = loss::feature_matching_loss(&real, &p).unwrap();
        p.data_mut()[i] -= 2.0 * STEP;
        let down = loss::feature_matching_loss(&real, &p).unwrap();
        worst = worst.max(rel_err(g.data()[i], (up - down) / (2.0 * STEP)));
    }
    out.push(case(format!("feature matching n={n} d={d}"), (worst, 0, fake.len())));
    out
}

/// Every layer and loss gradient case for `seeds` seeds.
pub fn gradient_suite(seeds: u64) -> Vec<CaseResult> {
    let mut out = Vec::new();
    for seed in 0..seeds {
        out.push(conv_case(seed, ConvMode::Conv));
        out.push(conv_case(seed, ConvMode::Transposed));
        out.push(activation_case(seed));
        out.push(pool_case(seed));
        out.push(dense_case(seed));
        out.push(reshape_crop_case(seed));
        out.push(discriminator_case(seed));
        out.push(generator_case(seed));
        out.extend(loss_case(seed));
    }
    out
}

/// Relative error of `<conv(x), y> = <x, conv^T(y)>` for one random case.
pub fn adjoint_case(seed: u64) -> f64 {
    use hsigan::numerics::{conv_forward, transposed_conv_forward, ConvLayerParams};
    let mut r = rng(seed);
    let k = [r.gen_range(1..=3), r.gen_range(1..=3), r.gen_range(1..=7)];
    let s = [r.gen_range(1..=3), r.gen_range(1..=3), r.gen_range(1..=2)];
    let small = [r.gen_range(1..=4), r.gen_range(1..=4), r.gen_range(1..=5)];
    let big = [small[0] * s[0], small[1] * s[1], small[2] * s[2]];
    let (ci, co) = (r.gen_range(1..=3), r.gen_range(1..=3));
    let kernel = Tensor::randn(&[k[0], k[1], k[2], ci, co], 1.0, &mut r);
    let layer = ConvLayerParams::new(kernel, Tensor::zeros(&[co]), s, ConvMode::Conv).unwrap();
    let x = Tensor::randn(&[big[0], big[1], big[2], ci], 1.0, &mut r);
    let y = Tensor::randn(&[small[0], small[1], small[2], co], 1.0, &mut r);
    let ax = conv_forward(&x, &layer, Activation::None).unwrap();
    let aty = transposed_conv_forward(&y, &layer.adjoint(), Activation::None).unwrap();
    let (lhs, rhs) = (ax.dot(&y), x.dot(&aty));
    (lhs - rhs).abs() / lhs.abs().max(rhs.abs()).max(1e-12)
}

/// Independent literal mean-field update: for every pixel and label, sum the
/// compatibility-weighted kernel over every other pixel and every label.
pub fn brute_force_mean_field(
    probs: &hsigan::crf::ProbabilityMap,
    cube: &hsigan::data::HyperCube,
    params: &hsigan::crf::CrfParams,
) -> Vec<f64> {
    let (h, w, k) = (probs.height(), probs.width(), probs.classes());
    let n = h * w;
    let pos = |i: usize| ((i / w) as f64, (i % w) as f64);
    let kernel = |i: usize, j: usize| {
        let (pi, pj) = (pos(i), pos(j));
        let d2 = (pi.0 - pj.0).powi(2) + (pi.1 - pj.1).powi(2);
        let s2: f64 = cube
            .spectrum_at(i)
            .iter()
            .zip(cube.spectrum_at(j))
            .map(|(a, b)| (a - b).powi(2))
            .sum();
        let appearance = (-d2 / (2.0 * params.theta_alpha.powi(2)) - s2 / (2.0 * params.theta_beta.powi(2))).exp();
        let smooth = (-d2 / (2.0 * params.theta_gamma.powi(2))).exp();
        params.w1 * appearance + params.w2 * smooth
    };
    let unary: Vec<f64> = probs.values().iter().map(|&q| -q.max(params.unary_floor).ln()).collect();
    let mut q = probs.values().to_vec();
    for _ in 0..params.iterations {
        let mut next = vec![0.0; n * k];
        for i in 0..n {
            let mut energies = vec![0.0; k];
            for l in 0..k {
                let mut pair = 0.0;
                for j in 0..n {
                    if j == i {
                        continue;
                    }
                    for l2 in 0..k {
                        pair += params.compat.mu(l, l2) * kernel(i, j) * q[j * k + l2];
                    }
                }
                energies[l] = unary[i * k + l] + pair;
            }
            let m = energies.iter().cloned().fold(f64::INFINITY, f64::min);
            let z: f64 = energies.iter().map(|e| (m - e).exp()).sum();
            for l in 0..k {
                next[i * k + l] = (m - energies[l]).exp() / z;
            }
        }
        q = next;
    }
    q
}

/// Random probability map, cube and CRF parameters for an `h x w`, `k`-class case.
pub fn random_crf_case(
    h: usize,
    w: usize,
    k: usize,
    seed: u64,
) -> (hsigan::crf::ProbabilityMap, hsigan::data::HyperCube, hsigan::crf::CrfParams) {
    use hsigan::crf::{Compatibility, CrfParams, ProbabilityMap};
    let mut r = rng(seed);
    let bands = r.gen_range(1..=3);
    let mut q = Vec::with_capacity(h * w * k);
    for _ in 0..h * w {
        let raw: Vec<f64> = (0..k).map(|_| r.gen_range(0.01..1.0)).collect();
        let s: f64 = raw.iter().sum();
        q.extend(raw.iter().map(|v| v / s));
    }
    let probs = ProbabilityMap::new(h, w, k, q).unwrap();
    let cube = hsigan::data::HyperCube::new(h, w, bands, (0..h * w * bands).map(|_| r.gen_range(0.0..1.0)).collect()).unwrap();
    let compat = if seed.is_multiple_of(2) {
        Compatibility::Potts
    } else {
        let mut values = vec![0.0; k * k];
        for a in 0..k {
            for b in a + 1..k {
                let v = r.gen_range(0.2..2.0);
                values[a * k + b] = v;
                values[b * k + a] = v;
            }
        }
        Compatibility::Matrix { classes: k, values }
    };
    let params = CrfParams {
        w1: r.gen_range(0.0..3.0),
        w2: r.gen_range(0.0..3.0),
        theta_alpha: r.gen_range(0.5..4.0),
        theta_beta: r.gen_range(0.1..1.0),
        theta_gamma: r.gen_range(0.5..4.0),
        compat,
        iterations: r.gen_range(0..=6),
        unary_floor: 1e-6,
    };
    (probs, cube, params)
}

/// Worst per-entry gap between library mean-field and the literal oracle
/// over every grid with at most 12 pixels and every K up to 3.
pub fn crf_oracle_suite(seeds_per_shape: u64) -> (f64, usize) {
    use hsigan::crf::{mean_field_infer, FeatureField};
    let mut worst = 0.0f64;
    let mut cases = 0;
    for h in 1..=12 {
        for w in 1..=12 / h {
            for k in 1..=3 {
                for s in 0..seeds_per_shape {
                    let seed = (h * 1000 + w * 100 + k * 10) as u64 + s;
                    let (probs, cube, params) = random_crf_case(h, w, k, seed);
                    let got = mean_field_infer(&probs, &FeatureField::full_spectrum(&cube), &params).unwrap();
                    let want = brute_force_mean_field(&probs, &cube, &params);
                    for (a, b) in got.values().iter().zip(&want) {
                        worst = worst.max((a - b).abs());
                    }
                    cases += 1;
                }
            }
        }
    }
    (worst, cases)
}

/// Worst relative gap between library energy and enumeration over ordered
/// pairs, for every labeling of random 2x2 images.
pub fn energy_oracle_suite(seeds: u64) -> (f64, usize) {
    use hsigan::crf::{energy, unary_from_probs, FeatureField};
    use hsigan::data::LabelMap;
    let mut worst = 0.0f64;
    let mut cases = 0;
    for seed in 0..seeds {
        let k = 1 + (seed as usize % 3);
        let (probs, cube, params) = random_crf_case(2, 2, k, seed + 77);
        let unary = unary_from_probs(&probs, params.unary_floor).unwrap();
        let features = FeatureField::full_spectrum(&cube);
        for code in 0..k.pow(4) {
            let labels: Vec<usize> = (0..4).map(|i| code / k.pow(i as u32) % k).collect();
            let map = LabelMap::new(2, 2, k, labels.iter().map(|&l| l as u16 + 1).collect()).unwrap();
            let got = energy(&map, &features, &unary, &params).unwrap();
            let mut want = 0.0;
            for i in 0..4 {
                want -= probs.pixel(i)[labels[i]].max(params.unary_floor).ln();
            }
            let mut ordered = 0.0;
            for i in 0..4 {
                for j in 0..4 {
                    if i == j {
                        continue;
                    }
                    let (ri, ci, rj, cj) = ((i / 2) as f64, (i % 2) as f64, (j / 2) as f64, (j % 2) as f64);
                    let d2 = (ri - rj).powi(2) + (ci - cj).powi(2);
                    let s2: f64 = cube.spectrum_at(i).iter().zip(cube.spectrum_at(j)).map(|(a, b)| (a - b).powi(2)).sum();
                    let kij = params.w1 * (-d2 / (2.0 * params.theta_alpha.powi(2)) - s2 / (2.0 * params.theta_beta.powi(2))).exp()
                        + params.w2 * (-d2 / (2.0 * params.theta_gamma.powi(2))).exp();
                    ordered += params.compat.mu(labels[i], labels[j]) * kij;
                }
            }
            want += ordered / 2.0;
            worst = worst.max((got - want).abs() / want.abs().max(1.0));
            cases += 1;
        }
    }
    (worst, cases)
}

//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any failure.

use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::time::Instant;

use infoplane_core::conductance::{
    completeness_gap, gradient_conductance, integrated_gradients_conductance, IgConfig,
};
use infoplane_core::dump::{read_manifest, MANIFEST_FILE};
use infoplane_core::estimators::{
    binned_mi, gaussian_conductance_entropy, kde_mi, ksg_mi, mi_with_labels, Bandwidth,
    BinningConfig, GaussianSpec, LabelEntropyMode, LabelSet,
};
use infoplane_core::ite::{compression, global_efficiency, usefulness};
use infoplane_core::rng::{seeded_rng, uniform};
use infoplane_core::synth::{
    gen_blobs, gen_gaussian, markov_chain_exact_mi, BlobsSpec, MarkovChainCase,
};
use infoplane_core::{
    dpi_check, ite_profile, read_dump, write_dump, Activation, DumpContents, Error, ITEConfig,
    LayerTrace, Network, NetworkSpec, Tensor,
};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn ok<T>(r: infoplane_core::Result<T>) -> Result<T, String> {
    r.map_err(|e| e.to_string())
}

fn random_spec(seed: u64, activation: Activation) -> NetworkSpec {
    let mut rng = seeded_rng(seed);
    let depth = 1 + (uniform(&mut rng, 0.0, 4.0) as usize).min(3);
    let dims = (0..=depth)
        .map(|_| 1 + (uniform(&mut rng, 0.0, 8.0) as usize).min(7))
        .collect();
    NetworkSpec::uniform(dims, activation, seed).unwrap()
}

fn random_input(seed: u64, d: usize, scale: f64) -> Vec<f64> {
    let mut rng = seeded_rng(seed ^ 0x5eed);
    (0..d).map(|_| uniform(&mut rng, -scale, scale)).collect()
}

fn autodiff_correctness() -> Outcome {
    let start = Instant::now();
    let mut worst = 0.0f64;
    for seed in 0..100u64 {
        let act = if seed % 2 == 0 {
            Activation::Tanh
        } else {
            Activation::Sigmoid
        };
        let net = ok(Network::init_with_biases(random_spec(seed, act)))?;
        let x = random_input(seed, net.input_dim(), 2.0);
        for layer in 1..=net.depth() {
            let j = ok(net.jacobian(layer, &x))?;
            let fd = ok(net.finite_diff_jacobian(layer, &x, 1e-5))?;
            let scale = fd
                .data()
                .iter()
                .fold(0.0f64, |m, v| m.max(v.abs()))
                .max(1e-6);
            worst = worst.max(ok(j.max_abs_diff(&fd))? / scale);
        }
    }
    let secs = start.elapsed().as_secs_f64();
    ensure(worst < 1e-4, || format!("max relative error {worst:e}"))?;
    ensure(secs < 10.0, || format!("took {secs:.2}s"))?;
    Ok(format!("max relative error {worst:.2e} in {secs:.2}s"))
}

fn linear_identity() -> Outcome {
    let mut worst = 0.0f64;
    for seed in 0..50u64 {
        let net = ok(Network::init(random_spec(seed, Activation::Identity)))?;
        let x = random_input(seed, net.input_dim(), 2.0);
        for layer in 1..=net.depth() {
            let t = ok(net.layer_output(layer, &x))?;
            let mut candidates = vec![ok(gradient_conductance(&net, layer, &x))?];
            for m in [1, 16, 128] {
                let cfg = IgConfig::zero(x.len()).with_steps(m);
                candidates.push(ok(integrated_gradients_conductance(&net, layer, &x, &cfg))?);
            }
            for c in &candidates {
                for (a, b) in c.iter().zip(&t) {
                    worst = worst.max((a - b).abs());
                }
            }
        }
    }
    ensure(worst <= 1e-10, || format!("max abs error {worst:e}"))?;
    Ok(format!("max abs error {worst:.2e}"))
}

fn ig_convergence() -> Outcome {
    let mut worst = 0.0f64;
    for seed in 0..20u64 {
        let net = ok(Network::init_with_biases(random_spec(
            seed,
            Activation::Tanh,
        )))?;
        let x = random_input(seed, net.input_dim(), 2.0);
        let layer = net.depth();
        let coarse = ok(completeness_gap(
            &net,
            layer,
            &x,
            &IgConfig::zero(x.len()).with_steps(64),
        ))?;
        let fine = ok(completeness_gap(
            &net,
            layer,
            &x,
            &IgConfig::zero(x.len()).with_steps(512),
        ))?;
        ensure(fine <= 0.25 * coarse || fine <= f64::EPSILON, || {
            format!("seed {seed}: gap {fine:e} at 512 vs {coarse:e} at 64")
        })?;
        if coarse > 0.0 {
            worst = worst.max(fine / coarse);
        }
    }
    Ok(format!("worst gap ratio {worst:.4}"))
}

fn gaussian_closed_form() -> Outcome {
    let two_pi_e = 2.0 * std::f64::consts::PI * std::f64::consts::E;
    let h1 = ok(gaussian_conductance_entropy(
        &ok(Tensor::matrix(1, 1, vec![2.0]))?,
        &ok(GaussianSpec::standard(1))?,
        0.0,
    ))?
    .value_nats;
    let h2 = ok(gaussian_conductance_entropy(
        &ok(Tensor::identity(2))?,
        &ok(GaussianSpec::standard(2))?,
        0.0,
    ))?
    .value_nats;
    let exact1 = 0.5 * (two_pi_e * 4.0).ln();
    let exact2 = two_pi_e.ln();
    ensure(
        (h1 - exact1).abs() <= 1e-9 && (h1 - 2.112086).abs() < 5e-7,
        || format!("1-d entropy {h1}"),
    )?;
    ensure(
        (h2 - exact2).abs() <= 1e-9 && (h2 - 2.837877).abs() < 5e-7,
        || format!("2-d entropy {h2}"),
    )?;
    let rank1 = ok(Tensor::matrix(2, 2, vec![1.0, 2.0, 2.0, 4.0]))?;
    let singular = gaussian_conductance_entropy(&rank1, &ok(GaussianSpec::standard(2))?, 0.0);
    ensure(matches!(singular, Err(Error::Singular(_))), || {
        format!("rank-deficient J gave {singular:?}")
    })?;
    Ok(format!("{h1:.9}, {h2:.9}, singular rejected"))
}

fn column(t: &Tensor, j: usize) -> Tensor {
    Tensor::matrix(t.rows(), 1, t.iter_rows().map(|r| r[j]).collect()).unwrap()
}

fn mi_estimator_oracle() -> Outcome {
    let truth = -0.5 * (1.0 - 0.81f64).ln();
    let mut means = Vec::new();
    for rho in [0.9, 0.0] {
        let cov = ok(Tensor::matrix(2, 2, vec![1.0, rho, rho, 1.0]))?;
        let spec = ok(GaussianSpec::new(vec![0.0; 2], cov))?;
        let (mut ksg, mut bin, mut kde) = (0.0, 0.0, 0.0);
        for seed in 0..10u64 {
            let xy = ok(gen_gaussian(&spec, 5000, 1000 + seed))?;
            let (a, b) = (column(&xy, 0), column(&xy, 1));
            ksg += ok(ksg_mi(&a, &b, 5))?.value_nats / 10.0;
            bin += ok(binned_mi(&a, &b, &BinningConfig::with_bins(16)))?.value_nats / 10.0;
            kde += ok(kde_mi(&a, &b, Bandwidth::Silverman))?.value_nats / 10.0;
        }
        means.push((rho, ksg, bin, kde));
    }
    let (_, ksg, bin, kde) = means[0];
    ensure((ksg - truth).abs() <= 0.05, || {
        format!("ksg {ksg} vs {truth}")
    })?;
    ensure((bin - truth).abs() <= 0.15, || {
        format!("binning {bin} vs {truth}")
    })?;
    ensure((kde - truth).abs() <= 0.15, || {
        format!("kde {kde} vs {truth}")
    })?;
    let (_, k0, b0, d0) = means[1];
    for (name, v) in [("ksg", k0), ("binning", b0), ("kde", d0)] {
        ensure(v.abs() <= 0.05, || format!("independent {name} {v}"))?;
    }
    Ok(format!(
        "rho=0.9: ksg {ksg:.4}, binning {bin:.4}, kde {kde:.4}; independent: {k0:.4}, {b0:.4}, {d0:.4}"
    ))
}

fn label_mi_oracle() -> Outcome {
    // Each point's 3 neighbors share its class: posterior (4/6, 1/6, 1/6).
    let oracle = 3f64.ln() + (2.0 / 3.0) * (2.0f64 / 3.0).ln() + (1.0 / 3.0) * (1.0f64 / 6.0).ln();
    let n = 300;
    let labels = ok(LabelSet::new((0..n).map(|i| (i % 3) as u32).collect(), 3))?;
    let c = ok(Tensor::matrix(
        n,
        1,
        (0..n)
            .map(|i| 100.0 * (i % 3) as f64 + i as f64 / n as f64)
            .collect(),
    ))?;
    let sep = ok(mi_with_labels(
        &c,
        &labels,
        3,
        LabelEntropyMode::UniformLogK,
    ))?
    .value_nats;
    ensure((sep - oracle).abs() <= 1e-6, || {
        format!("separating {sep} vs {oracle}")
    })?;
    let n = 2000;
    let mut rng = seeded_rng(77);
    let c = ok(Tensor::matrix(
        n,
        1,
        (0..n).map(|_| uniform(&mut rng, -1.0, 1.0)).collect(),
    ))?;
    let y = ok(LabelSet::new((0..n).map(|i| (i % 2) as u32).collect(), 2))?;
    let ind = ok(mi_with_labels(&c, &y, 10, LabelEntropyMode::UniformLogK))?.value_nats;
    ensure(ind <= 0.05, || format!("independent {ind}"))?;
    Ok(format!(
        "separating {sep:.6} (oracle {oracle:.6}), independent {ind:.4}"
    ))
}

fn ite_gates() -> Outcome {
    let cfg = ITEConfig::default();
    let c = compression(4.0, 3.0).value;
    let u = ok(usefulness(1.0, 0.5, 2.0))?.value;
    let e = ok(global_efficiency(0.25, 1.0, 1.0 / 3.0, &cfg))?;
    ensure((c - 0.25).abs() <= 1e-9, || format!("compression {c}"))?;
    ensure((u - 1.0 / 3.0).abs() <= 1e-9, || format!("usefulness {u}"))?;
    ensure((e - 19.0 / 36.0).abs() <= 1e-9, || {
        format!("efficiency {e}")
    })?;
    let (x, y) = ok(gen_blobs(&BlobsSpec::on_circle(3, 40, 4.0, 1.0, 7)))?;
    let spec = ok(NetworkSpec::uniform(vec![2; 4], Activation::Identity, 0))?;
    let eye = ok(Tensor::identity(2))?;
    let net = ok(Network::from_parts(
        spec,
        vec![eye; 3],
        vec![vec![0.0; 2]; 3],
    ))?;
    let rows = ok(ite_profile(&ok(net.forward_collect(&x))?, &x, &y, &cfg))?;
    for r in &rows {
        let dev = r
            .compression
            .abs()
            .max((r.preservation - 1.0).abs())
            .max(r.usefulness.abs());
        ensure(dev <= 1e-9, || {
            format!("identity layer {} row {r:?}", r.layer_index)
        })?;
    }
    Ok(format!(
        "{c}, {u:.9}, {e:.9}; {} identity rows (0,1,0)",
        rows.len()
    ))
}

fn dpi_controls() -> Outcome {
    let mi = ok(markov_chain_exact_mi(&MarkovChainCase::mod_floor_example()))?;
    let ln2 = 2f64.ln();
    let expect = [ln2, ln2, 0.0];
    ensure(
        mi.len() == 3 && mi.iter().zip(&expect).all(|(a, b)| (a - b).abs() <= 1e-12),
        || format!("exact chain {mi:?}"),
    )?;
    let exact = ok(dpi_check(&mi, None, 0.0))?;
    ensure(exact.violations.is_empty(), || {
        format!("exact chain violations {:?}", exact.violations)
    })?;
    let injected = ok(dpi_check(&[2.0, 1.0, 1.5], None, 0.1))?;
    let v = &injected.violations;
    ensure(
        v.len() == 1 && (v[0].l, v[0].k) == (2, 3) && (v[0].delta_nats - 0.5).abs() <= 1e-12,
        || format!("injected violations {v:?}"),
    )?;
    Ok(format!(
        "exact chain {:.6?}; injected ({}, {}, {})",
        mi, v[0].l, v[0].k, v[0].delta_nats
    ))
}

fn cli(args: &[&str]) -> Result<(), String> {
    let code = infoplane_cli::run(std::iter::once("infoplane").chain(args.iter().copied()));
    ensure(code == 0, || {
        format!("`{}` exited with {code}", args.join(" "))
    })
}

fn numeric_close(a: &str, b: &str, tol: f64) -> bool {
    let split = |s: &str| -> Vec<String> {
        s.split(|c: char| {
            c == ',' || c == '\n' || c.is_whitespace() || c == ':' || c == '[' || c == ']'
        })
        .filter(|t| !t.is_empty())
        .map(str::to_string)
        .collect()
    };
    let (ta, tb) = (split(a), split(b));
    ta.len() == tb.len()
        && ta
            .iter()
            .zip(&tb)
            .all(|(x, y)| match (x.parse::<f64>(), y.parse::<f64>()) {
                (Ok(p), Ok(q)) => (p - q).abs() <= tol * (1.0 + q.abs()),
                _ => x == y,
            })
}

fn end_to_end_determinism() -> Outcome {
    let root = tempfile::tempdir().map_err(|e| e.to_string())?;
    let p = |name: &str| root.path().join(name).to_str().unwrap().to_string();
    cli(&[
        "gen",
        "--kind",
        "blobs",
        "--seed",
        "42",
        "--out",
        &p("data"),
    ])?;
    cli(&["conduct", "--data", &p("data"), "--out", &p("dump")])?;
    for out in ["a", "b"] {
        cli(&[
            "analyze",
            "--dump",
            &p("dump"),
            "--out",
            &p(out),
            "--seed",
            "42",
            "--bootstrap",
            "20",
        ])?;
    }
    let golden = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden");
    for f in ["plane.csv", "ite.csv", "dpi.json"] {
        let a = fs::read(root.path().join("a").join(f)).map_err(|e| e.to_string())?;
        let b = fs::read(root.path().join("b").join(f)).map_err(|e| e.to_string())?;
        ensure(a == b, || format!("{f} differs between runs"))?;
        let g = fs::read_to_string(golden.join(f)).map_err(|e| format!("golden {f}: {e}"))?;
        ensure(
            numeric_close(&String::from_utf8_lossy(&a), &g, 2e-6),
            || format!("{f} deviates from golden"),
        )?;
    }
    Ok("byte-identical reruns, golden files match".into())
}

fn dump_format() -> Outcome {
    let root = tempfile::tempdir().map_err(|e| e.to_string())?;
    let dir = root.path().join("dump");
    let mut rng = seeded_rng(3);
    let n = 9;
    let x = ok(Tensor::matrix(
        n,
        3,
        (0..3 * n).map(|_| uniform(&mut rng, -5.0, 5.0)).collect(),
    ))?;
    let net = ok(Network::init_with_biases(ok(NetworkSpec::uniform(
        vec![3, 4, 2],
        Activation::Tanh,
        3,
    ))?))?;
    let traces = ok(net.forward_collect(&x))?;
    let cond: Vec<LayerTrace> = traces
        .iter()
        .cloned()
        .map(|mut t| {
            t.activations = t.activations.map(|v| -v).expect("finite");
            t
        })
        .collect();
    let labels = ok(LabelSet::new((0..n as u32).map(|i| i % 2).collect(), 2))?;
    ok(write_dump(
        &dir,
        &DumpContents {
            model_name: "mlp",
            input: Some(&x),
            activations: &traces,
            conductances: &cond,
            labels: &labels,
        },
    ))?;
    let back = ok(read_dump(&dir))?;
    let f32_eq = |a: &Tensor, b: &Tensor| {
        a.shape() == b.shape()
            && a.data()
                .iter()
                .zip(b.data())
                .all(|(p, q)| *p == *q as f32 as f64)
    };
    ensure(f32_eq(back.input.as_ref().unwrap(), &x), || {
        "input differs".into()
    })?;
    for (got, want) in back
        .activations
        .iter()
        .zip(&traces)
        .chain(back.conductances.iter().zip(&cond))
    {
        ensure(
            got.layer_index == want.layer_index && f32_eq(&got.activations, &want.activations),
            || format!("layer {} differs", want.layer_index),
        )?;
    }
    ensure(back.labels == labels, || "labels differ".into())?;

    let m = ok(read_manifest(&dir))?;
    let file = dir.join(&m.layers[1].file);
    let bytes = fs::read(&file).map_err(|e| e.to_string())?;
    fs::write(&file, &bytes[..bytes.len() - 1]).map_err(|e| e.to_string())?;
    let truncated = read_dump(&dir);
    ensure(matches!(truncated, Err(Error::Corrupt { .. })), || {
        format!("truncated file gave {truncated:?}")
    })?;
    fs::write(&file, &bytes).map_err(|e| e.to_string())?;

    let manifest = dir.join(MANIFEST_FILE);
    let text = fs::read_to_string(&manifest).map_err(|e| e.to_string())?;
    fs::write(&manifest, text.replace("\"version\": 1", "\"version\": 7"))
        .map_err(|e| e.to_string())?;
    let bad = read_dump(&dir);
    ensure(matches!(bad, Err(Error::UnsupportedVersion(7))), || {
        format!("bad version gave {bad:?}")
    })?;
    Ok("f32 round trip lossless; truncated -> corrupt, version 7 -> unsupported".into())
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("autodiff correctness", autodiff_correctness),
        ("conductance linear identity", linear_identity),
        ("integrated-gradients convergence", ig_convergence),
        ("gaussian closed form", gaussian_closed_form),
        ("MI estimator oracle", mi_estimator_oracle),
        ("label-MI oracle", label_mi_oracle),
        ("ITE formula gates", ite_gates),
        ("DPI controls", dpi_controls),
        ("end-to-end determinism", end_to_end_determinism),
        ("dump format", dump_format),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        match outcome {
            Ok(detail) => println!("PASS {:>2} {name}: {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL {:>2} {name}: {why}", i + 1);
            }
        }
    }
    println!(
        "acceptance: {} passed, {failed} failed",
        criteria.len() - failed
    );
    if failed > 0 {
        std::process::exit(1);
    }
}

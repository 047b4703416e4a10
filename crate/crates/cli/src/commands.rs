use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use combnet::comb::{discretize_for_inference, iir_comb, magnitude_response, measure_gain, CombChannelConfig};
use combnet::data::{generate_dataset, load_split, read_labels_csv, wav_write, Clip, DatasetManifest, DatasetSpec, Split};
use combnet::experiments::{
    count_costs, dominance_summary, evaluate_f1, load_network, plan_sweep, render_line_svg, sweep_pareto, train_model,
    write_pareto_csv, ExperimentError, F1Counts, ModelSpec, RunConfig, RunOutputs, Schedule, Series, TrainOutcome,
};
use combnet::layer::{comb_layer_forward, BankHyperparams, CombBankParams, Mode};
use combnet::nn::TrainConfig;
use combnet::{AudioSignal, ScalingConfig};

use crate::error::{io_err, CliError};
use crate::{BenchArgs, EvalArgs, InspectArgs, ModeArg, RespondArgs, SweepArgs, SynthArgs, TrainArgs};

fn manifest_path(dataset_dir: &Path, split: Split) -> PathBuf {
    dataset_dir.join(DatasetManifest::file_name(split))
}

fn load(dataset_dir: &Path, split: Split) -> Result<(DatasetManifest, Vec<Clip>), CliError> {
    let path = manifest_path(dataset_dir, split);
    if !path.exists() {
        return Err(CliError::Data(format!("missing manifest {}", path.display())));
    }
    Ok(load_split(&path)?)
}

/// The network and the dataset must agree on sample rate and frame grid.
fn check_compatible(data: &DatasetSpec, model: &ModelSpec) -> Result<(), CliError> {
    if data.sample_rate_hz != model.sample_rate_hz
        || data.frame_window_samples != model.pool_window_samples
        || data.frame_stride_samples != model.pool_stride_samples
    {
        return Err(CliError::Usage(format!(
            "dataset frames ({} Hz, window {}, hop {}) do not match the model ({} Hz, window {}, hop {})",
            data.sample_rate_hz,
            data.frame_window_samples,
            data.frame_stride_samples,
            model.sample_rate_hz,
            model.pool_window_samples,
            model.pool_stride_samples
        )));
    }
    Ok(())
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    }
    fs::write(path, text).map_err(|e| io_err(path, e))
}

pub fn synth(out_root: &Path, a: SynthArgs) -> Result<(), CliError> {
    let out = a.out.unwrap_or_else(|| out_root.join("data"));
    let spec = DatasetSpec {
        base_seed: a.seed,
        train: a.train,
        valid: a.valid,
        test: a.test,
        ..DatasetSpec::default()
    };
    let manifests = generate_dataset(&spec, &out)?;
    out!(
        "wrote {}/{}/{} clips (seed {}) to {}",
        a.train,
        a.valid,
        a.test,
        a.seed,
        out.display()
    );
    for m in manifests {
        out!("  {}", m.display());
    }
    Ok(())
}

fn trajectory_svg(outcome: &TrainOutcome, title: &str) -> Option<String> {
    let t = outcome.trajectory.as_ref()?;
    let m = t.rows.first()?.f0_hz.len();
    let series: Vec<Series> = (0..m)
        .map(|c| Series {
            name: format!("f0_{}", c + 1),
            points: t.rows.iter().map(|r| (r.step as f64, r.f0_hz[c])).collect(),
        })
        .collect();
    Some(render_line_svg(title, "step", "f0 (Hz)", &series))
}

fn write_outputs(cfg: &RunConfig, outcome: &TrainOutcome, diverged: Option<usize>) -> Result<RunOutputs, CliError> {
    let name = cfg.run_name();
    let outputs = RunOutputs::write(&cfg.output_dir, &name, outcome, diverged)?;
    if let Some(svg) = trajectory_svg(outcome, &format!("{name}: comb f0 trajectories")) {
        write_text(&cfg.output_dir.join(format!("trajectory_{name}.svg")), &svg)?;
    }
    Ok(outputs)
}

pub fn train(a: TrainArgs) -> Result<(), CliError> {
    let mut cfg = RunConfig::load(&a.config)?;
    cfg.schedule.verbose |= a.verbose;
    let (manifest, train) = load(&cfg.dataset_dir, Split::Train)?;
    check_compatible(&manifest.spec, &cfg.model)?;
    let (_, valid) = load(&cfg.dataset_dir, Split::Valid)?;
    fs::create_dir_all(&cfg.output_dir).map_err(|e| io_err(&cfg.output_dir, e))?;
    write_text(&cfg.output_dir.join("config.toml"), &cfg.to_toml())?;

    match train_model(&cfg.model, &train, &valid, &cfg.train, &cfg.schedule) {
        Ok(outcome) => {
            let outputs = write_outputs(&cfg, &outcome, None)?;
            out!(
                "{}: {} steps{}",
                cfg.run_name(),
                outcome.steps_run,
                if outcome.stopped_early { " (early stop)" } else { "" }
            );
            out!("best validation F1: {:.4} (step {})", outcome.best_valid_f1, outcome.best_step);
            if let Some(t) = &outcome.trajectory {
                out!("f0 range violations: {}", t.range_violations());
            }
            if manifest_path(&cfg.dataset_dir, Split::Test).exists() {
                let (_, test) = load(&cfg.dataset_dir, Split::Test)?;
                let f1 = evaluate_f1(&outcome.network, &test, Mode::Training)?;
                out!("test F1: {:.4}", f1.f1());
            }
            out!("checkpoint: {}", outputs.checkpoint_dir.display());
            Ok(())
        }
        Err(ExperimentError::Diverged { step, reason, partial }) => {
            let outputs = write_outputs(&cfg, &partial, Some(step))?;
            Err(CliError::Numerical(format!(
                "training diverged at step {step} ({reason}); last good checkpoint written to {}",
                outputs.checkpoint_dir.display()
            )))
        }
        Err(e) => Err(e.into()),
    }
}

fn report(counts: &F1Counts) {
    out!("F1: {:.6}", counts.f1());
    out!("precision: {:.6}", counts.precision());
    out!("recall: {:.6}", counts.recall());
    out!(
        "cells: {} true positive, {} false positive, {} false negative",
        counts.true_pos, counts.false_pos, counts.false_neg
    );
}

pub fn eval(a: EvalArgs) -> Result<(), CliError> {
    if !a.manifest.exists() {
        return Err(CliError::Data(format!("missing manifest {}", a.manifest.display())));
    }
    if let Some(dir) = &a.predictions {
        let manifest = DatasetManifest::load(&a.manifest)?;
        let root = a.manifest.parent().unwrap_or(Path::new("."));
        let rate = manifest.spec.frame_rate();
        let mut counts = F1Counts::default();
        for entry in &manifest.clips {
            let truth = read_labels_csv(&root.join(&entry.labels), rate)?;
            let pred = read_labels_csv(&dir.join(&entry.labels), rate)?;
            if pred.frames() != truth.frames() {
                return Err(CliError::Data(format!(
                    "{}: {} frames, labels have {}",
                    dir.join(&entry.labels).display(),
                    pred.frames(),
                    truth.frames()
                )));
            }
            counts = counts.merge(F1Counts::from_predictions(&pred.binary(), &truth));
        }
        report(&counts);
        return Ok(());
    }
    let dir = a.checkpoint.expect("clap requires a source");
    let net = load_network(&dir)?;
    let (manifest, clips) = load_split(&a.manifest)?;
    check_compatible(&manifest.spec, net.spec())?;
    let mode = match a.mode {
        ModeArg::Training => Mode::Training,
        ModeArg::Inference => Mode::Inference,
    };
    out!("{} on {} clips ({} split)", net.spec().label(), clips.len(), manifest.split);
    report(&evaluate_f1(&net, &clips, mode)?);
    Ok(())
}

fn read_model_spec(path: &Path) -> Result<ModelSpec, CliError> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let spec: ModelSpec = toml::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
    spec.validate().map_err(CliError::from)?;
    Ok(spec)
}

/// A deterministic broadband test signal: a few inharmonic partials.
fn bench_signal(seconds: f64, fs: u32) -> AudioSignal {
    let n = (seconds * f64::from(fs)).round().max(1.0) as usize;
    let partials = [(211.0, 0.3), (347.5, 0.25), (1234.5, 0.2), (3001.0, 0.1)];
    let x = (0..n)
        .map(|i| {
            let t = i as f64 / f64::from(fs);
            partials.iter().map(|(f, a)| a * (2.0 * PI * f * t).sin()).sum::<f64>() as f32
        })
        .collect();
    AudioSignal::new(x, fs).expect("finite test signal")
}

pub fn bench(a: BenchArgs) -> Result<(), CliError> {
    let spec = read_model_spec(&a.spec)?;
    let cost = count_costs(&spec);
    let first = cost.first_layer();
    out!(
        "first layer: {} MACs/sample, {} params",
        fmt_num(first.macs_per_sample()),
        first.params
    );
    out!("{:<8} {:>10} {:>16}", "layer", "params", "MACs/sample");
    for l in &cost.layers {
        out!("{:<8} {:>10} {:>16}", l.name, l.params, fmt_num(l.macs_per_sample()));
    }
    out!("{:<8} {:>10} {:>16}", "total", cost.total_params(), fmt_num(cost.total_macs_per_sample()));

    let Some(hyper) = (spec.frontend == combnet::experiments::Frontend::Comb).then(|| spec.bank_hyper()) else {
        out!("throughput: measured for comb frontends only");
        return Ok(());
    };
    let params = CombBankParams::init(spec.channels, hyper, 0)?;
    let x = bench_signal(a.seconds, spec.sample_rate_hz);
    let env = spec.envelope();
    let repeats = a.repeats.max(1);
    let mut rates = Vec::new();
    for (name, mode) in [("inference (recursive)", Mode::Inference), ("training (sparse)", Mode::Training)] {
        let start = Instant::now();
        for _ in 0..repeats {
            comb_layer_forward(&x, &params, &env, mode)?;
        }
        let rate = (x.len() * repeats) as f64 / start.elapsed().as_secs_f64();
        out!("throughput {name}: {rate:.0} samples/s");
        rates.push(rate);
    }
    out!("recursive / sparse throughput ratio: {:.2}", rates[0] / rates[1]);
    Ok(())
}

fn fmt_num(v: f64) -> String {
    if v.fract() == 0.0 {
        format!("{v:.0}")
    } else {
        format!("{v:.4}")
    }
}

pub fn respond(a: RespondArgs) -> Result<(), CliError> {
    let cfg = CombChannelConfig::new(a.f0, a.alpha, 10, a.fs)?;
    let nyquist = f64::from(a.fs) / 2.0;

    let mut probes: Vec<(f64, f64)> = Vec::new();
    if let Some(wav) = &a.measure {
        let delay = cfg.delay();
        let k = discretize_for_inference(delay);
        if (delay - k as f64).abs() > 1e-9 {
            out!(
                "note: fs/f0 = {delay:.4} is not an integer; the recursive filter runs with K = {k}, so measured \
                 and analytic gains can differ"
            );
        }
        let freqs: Vec<f64> = (1..=5)
            .flat_map(|h| [(h as f64 - 0.5) * a.f0, h as f64 * a.f0])
            .filter(|&f| f > 0.0 && f < nyquist)
            .collect();
        out!("{:>12} {:>12} {:>12} {:>9}", "probe_hz", "analytic", "measured", "rel_err");
        let mut recording = Vec::new();
        let probe_len = (a.fs / 4) as usize;
        for f in freqs {
            let measured = measure_gain(&cfg, f)?;
            let analytic = magnitude_response(&cfg, f);
            out!(
                "{f:>12.3} {analytic:>12.6} {measured:>12.6} {:>8.3}%",
                100.0 * (measured - analytic).abs() / analytic
            );
            probes.push((f, measured));
            let tone: Vec<f32> = (0..probe_len)
                .map(|i| (2.0 * PI * f * i as f64 / f64::from(a.fs)).sin() as f32)
                .collect();
            let y = iir_comb(&tone, k, a.alpha)?;
            recording.extend(y.iter().map(|&v| v * (1.0 - a.alpha) as f32 * 0.9));
        }
        let signal = AudioSignal::new(recording, a.fs).map_err(CliError::from)?;
        wav_write(wav, &signal)?;
    }

    let mut w = csv::Writer::from_path(&a.out).map_err(|e| CliError::Data(format!("{}: {e}", a.out.display())))?;
    let mut header = vec!["frequency_hz", "analytic_gain"];
    if a.measure.is_some() {
        header.push("measured_gain");
    }
    w.write_record(&header)?;
    let rows = nyquist.floor() as usize;
    let mut curve = Vec::with_capacity(rows + 1);
    for f in 0..=rows {
        let g = magnitude_response(&cfg, f as f64);
        curve.push((f as f64, g));
        let mut rec = vec![f.to_string(), format!("{g:.6}")];
        if a.measure.is_some() {
            let m = probes.iter().find(|(p, _)| p.round() as usize == f);
            rec.push(m.map_or_else(String::new, |(_, m)| format!("{m:.6}")));
        }
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| io_err(&a.out, e))?;

    out!("gain at f0 ({} Hz): {:.5}", a.f0, magnitude_response(&cfg, a.f0));
    out!("gain at f0/2: {:.5}", magnitude_response(&cfg, a.f0 / 2.0));
    out!("wrote {}", a.out.display());
    if let Some(svg) = &a.svg {
        let title = format!("comb response, f0 = {} Hz, alpha = {}", a.f0, a.alpha);
        let series = [Series {
            name: "analytic".into(),
            points: curve,
        }];
        write_text(svg, &render_line_svg(&title, "frequency (Hz)", "gain", &series))?;
    }
    Ok(())
}

pub fn sweep(out_root: &Path, a: SweepArgs) -> Result<(), CliError> {
    if a.channels.is_empty() || a.channels.contains(&0) {
        return Err(CliError::Usage("channel counts must be positive".into()));
    }
    let specs = plan_sweep(&a.channels);
    out!("{} configurations:", specs.len());
    for s in &specs {
        let c = count_costs(s);
        out!(
            "  {:<12} params {:>7}  first-layer MACs/sample {:>7}",
            s.label(),
            c.total_params(),
            fmt_num(c.first_layer().macs_per_sample())
        );
    }
    if a.dry_run {
        return Ok(());
    }
    let out = a.out.unwrap_or_else(|| out_root.join("sweep"));
    let (manifest, train) = load(&a.dataset, Split::Train)?;
    for s in &specs {
        check_compatible(&manifest.spec, s)?;
    }
    let (_, valid) = load(&a.dataset, Split::Valid)?;
    let (_, test) = load(&a.dataset, Split::Test)?;
    let cfg = TrainConfig {
        lr: a.lr,
        max_steps: a.steps,
        batch_size: a.batch_size,
        seed: a.seed,
        ..TrainConfig::default()
    };
    let schedule = Schedule {
        crop_samples: a.crop_samples,
        eval_interval_steps: a.eval_interval,
        max_valid_clips: a.max_valid_clips,
        ..Schedule::default()
    };
    let rows = sweep_pareto(&specs, &train, &valid, &test, &cfg, &schedule, a.parallel);
    fs::create_dir_all(&out).map_err(|e| io_err(&out, e))?;
    let pareto = out.join("pareto.csv");
    write_pareto_csv(&rows, &pareto)?;

    let dominance = dominance_summary(&rows);
    let path = out.join("dominance.csv");
    let mut w = csv::Writer::from_path(&path)?;
    w.write_record(["budget_params", "comb_f1", "conv_f1", "winner"])?;
    let opt = |v: Option<f64>| v.map_or_else(String::new, |f| format!("{f:.6}"));
    for d in &dominance {
        w.write_record([d.budget_params.to_string(), opt(d.comb_f1), opt(d.conv_f1), d.winner.to_string()])?;
    }
    w.flush().map_err(|e| io_err(&path, e))?;

    out!("{:<10} {:>8} {:>8} {:>12} {:>8}", "frontend", "channels", "params", "MACs/sample", "test F1");
    for r in &rows {
        let f1 = r.f1.map_or_else(|| "failed".to_string(), |f| format!("{f:.4}"));
        out!(
            "{:<10} {:>8} {:>8} {:>12} {:>8}",
            r.frontend.name(),
            r.channels,
            r.params,
            fmt_num(r.macs_per_sample),
            f1
        );
        if let Some(e) = &r.error {
            out!("  error: {e}");
        }
    }
    out!("best F1 within each parameter budget:");
    for d in &dominance {
        out!(
            "  <= {:>7} params: comb {:>8}  conv {:>8}  -> {}",
            d.budget_params,
            opt(d.comb_f1),
            opt(d.conv_f1),
            d.winner
        );
    }
    out!("wrote {} and {}", pareto.display(), path.display());
    Ok(())
}

fn print_bank(params: &CombBankParams) -> Result<(), CliError> {
    let delays = params.delays()?;
    out!("channel,w,f0_hz,delay_samples,inference_delay_samples");
    for (i, ((w, f0), d)) in params.w.iter().zip(params.f0s()).zip(delays).enumerate() {
        out!("{i},{w:.9},{f0:.6},{d:.6},{}", discretize_for_inference(d));
    }
    Ok(())
}

pub fn inspect(a: InspectArgs) -> Result<(), CliError> {
    if let Some(m) = a.init_channels {
        if m == 0 {
            return Err(CliError::Usage("--init-channels must be positive".into()));
        }
        let hyper = BankHyperparams {
            scaling: ScalingConfig::new(a.f_min_hz, a.f_max_hz)?,
            sample_rate: a.fs,
            ..BankHyperparams::default()
        };
        return print_bank(&CombBankParams::init(m, hyper, a.seed)?);
    }
    let dir = a.checkpoint.expect("clap requires a source");
    let net = load_network(&dir)?;
    eprintln!("{} ({} parameters)", net.spec().label(), net.param_count());
    if let Some(p) = net.comb_params() {
        return print_bank(&p);
    }
    out!("tensor,shape,l2_norm");
    for t in net.tensors() {
        let norm = t.data.iter().map(|&v| f64::from(v).powi(2)).sum::<f64>().sqrt();
        let shape: Vec<String> = t.shape.iter().map(ToString::to_string).collect();
        out!("{},{},{norm:.6}", t.name, shape.join("x"));
    }
    Ok(())
}

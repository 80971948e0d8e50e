use std::fs;
use std::path::{Path, PathBuf};

use picm::codec::{rate_report, EncodeOptions};
use picm::controller::adaptive::{stop_on_levels, write_trace, AdaptiveOutcome, TraceRow};
use picm::controller::filter::{train_filter, TrainOptions};
use picm::controller::{
    adaptive_decode, bd_accuracy, bd_rate, build_training_set, ece as ece_of, level_budgets,
    CurvePoint, FEATURE_NAMES,
};
use picm::priority::{classifier_group_ranks, Strategy};
use picm::task::{group_by_sample, load_logits, TaskOracle};
use picm::{
    build_order_for_grid, decode as decode_stream, encode as encode_grid, load_grid, save_grid,
    synth_grid, Dims, FilterModel, LatentGrid, Sample, SyntheticClassifier,
};
use rayon::prelude::*;

use crate::args::*;
use crate::error::{CliError, CliResult, Context};

fn show(p: &Path) -> String {
    p.display().to_string()
}

fn read_grid(p: &Path) -> CliResult<LatentGrid> {
    load_grid(p).ctx(|| format!("reading {}", show(p)))
}

fn csv_writer(p: &Path) -> CliResult<csv::Writer<fs::File>> {
    csv::Writer::from_path(p).ctx(|| format!("creating {}", show(p)))
}

fn classifier(args: &ClassifierArgs, dim: usize) -> CliResult<SyntheticClassifier> {
    SyntheticClassifier::new(args.classifier_seed, args.classes, dim)
        .ctx(|| "building classifier".into())
}

fn encode_options(
    strategy: Strategy,
    c: &CodecArgs,
    grid: &LatentGrid,
    what: &str,
) -> CliResult<EncodeOptions> {
    let group_ranks = match strategy.grouping() {
        None => None,
        Some(g) => {
            if !c.transmit_order {
                return Err(CliError::usage(format!(
                    "strategy {strategy} is evaluation-only; pass --transmit-order to store its order in the stream"
                )));
            }
            let clf = classifier(&c.classifier, grid.len())?;
            Some(
                classifier_group_ranks(g, grid, &clf)
                    .ctx(|| format!("ranking groups of {what}"))?,
            )
        }
    };
    Ok(EncodeOptions {
        strategy,
        seed: c.seed,
        checkpoints: c.checkpoints,
        clamp: c.clamp_range,
        group_ranks,
    })
}

fn flush(w: &mut csv::Writer<fs::File>, p: &Path) -> CliResult {
    w.flush().ctx(|| format!("writing {}", show(p)))
}

pub fn gen(a: GenArgs) -> CliResult {
    let Shape(h, w, c) = a.shape;
    let dims = Dims::new(h, w, c).ctx(|| "shape".into())?;
    let jobs: Vec<(u64, PathBuf)> = match (&a.out, &a.out_dir) {
        (Some(p), _) => vec![(a.seed, p.clone())],
        (None, Some(dir)) => {
            fs::create_dir_all(dir).ctx(|| format!("creating {}", show(dir)))?;
            (0..a.count.unwrap_or(0))
                .map(|i| (a.seed + i as u64, dir.join(format!("grid_{i:05}.picl"))))
                .collect()
        }
        (None, None) => return Err(CliError::usage("need --out or --out-dir")),
    };
    jobs.par_iter().try_for_each(|(seed, p)| {
        let g = synth_grid(*seed, dims, a.scale_law).ctx(|| format!("generating seed {seed}"))?;
        save_grid(&g, p).ctx(|| format!("writing {}", show(p)))
    })?;
    println!(
        "wrote {} grid(s) of shape {h}x{w}x{c}, scale law {:?}",
        jobs.len(),
        a.scale_law
    );
    Ok(())
}

pub fn encode(a: EncodeArgs) -> CliResult {
    let grid = read_grid(&a.input)?;
    let opts = encode_options(a.coding.strategy, &a.coding.codec, &grid, &show(&a.input))?;
    let (stream, s) = encode_grid(&grid, &opts).ctx(|| format!("encoding {}", show(&a.input)))?;
    fs::write(&a.out, stream.as_bytes()).ctx(|| format!("writing {}", show(&a.out)))?;
    let d = grid.dims();
    println!(
        "input              {} ({}x{}x{})",
        show(&a.input),
        d.height,
        d.width,
        d.channels
    );
    println!("strategy           {}", opts.strategy);
    println!("header+side bytes  {}", s.header_bytes);
    println!("payload bytes      {}", s.payload_bytes);
    println!("total bytes        {}", s.total_bytes);
    println!("bpp                {:.6}", s.bpp());
    println!("symbols            {}", s.symbols);
    println!("ideal payload bits {:.1}", s.ideal_bits);
    println!("gaussian estimate  {:.1}", s.estimated_bits);
    println!(
        "quantization mse   {:.9e}",
        s.quantization_sse / grid.len() as f64
    );
    println!("order hash         {:016x}", s.permutation_hash);
    let r = rate_report(&stream);
    for (name, points) in [("plane", &r.planes), ("checkpoint", &r.checkpoints)] {
        for p in points {
            println!(
                "{name:<10} {:>3}  offset {:>9}  bits {:>10}  bpp {:.6}",
                p.index, p.offset, p.bits, p.cumulative_bpp
            );
        }
    }
    Ok(())
}

pub fn decode(a: DecodeArgs) -> CliResult {
    let bytes = fs::read(&a.input).ctx(|| format!("reading {}", show(&a.input)))?;
    let d = decode_stream(&bytes, a.budget).ctx(|| format!("decoding {}", show(&a.input)))?;
    let scales: Vec<f32> = d.header.scales().iter().map(|&s| s as f32).collect();
    let means: Vec<f32> = d.header.means().iter().map(|&m| m as f32).collect();
    let values: Vec<f32> = d.centered.iter().map(|&v| v as f32).collect();
    let out =
        LatentGrid::new(d.header.dims, values, means, scales).ctx(|| "assembling output".into())?;
    save_grid(&out, &a.out).ctx(|| format!("writing {}", show(&a.out)))?;
    let r = &d.report;
    println!("budget bytes       {}", r.budget_bytes);
    println!("bytes consumed     {}", r.bytes_consumed);
    println!("symbols            {}", r.symbols);
    println!("complete           {}", r.complete);
    let planes: Vec<String> = r
        .plane_completion
        .iter()
        .map(|(k, n)| format!("{k}/{n}"))
        .collect();
    println!("planes             {}", planes.join(" "));
    println!("order hash         {:016x}", r.permutation_hash);
    if let Some(refp) = &a.reference {
        let g = read_grid(refp)?;
        if g.len() != d.centered.len() {
            return Err(CliError::new(
                format!("comparing with {}", show(refp)),
                picm::Error::DimensionMismatch {
                    expected: d.centered.len(),
                    got: g.len(),
                },
            ));
        }
        println!("mse                {:.9e}", d.mse_against(g.values()));
    }
    Ok(())
}

pub fn priority(a: PriorityArgs) -> CliResult {
    let grid = read_grid(&a.input)?;
    let ranks = match a.strategy.grouping() {
        None => None,
        Some(g) => {
            let clf = classifier(&a.classifier, grid.len())?;
            Some(classifier_group_ranks(g, &grid, &clf).ctx(|| "ranking groups".into())?)
        }
    };
    let q = grid
        .quantize()
        .ctx(|| format!("quantizing {}", show(&a.input)))?;
    let order =
        build_order_for_grid(a.strategy, a.seed, &q, ranks.as_deref()).ctx(|| "ordering".into())?;
    let dims = grid.dims();
    let mut w = csv_writer(&a.out)?;
    let ctx = || format!("writing {}", show(&a.out));
    w.write_record([
        "plane",
        "rank",
        "flat_index",
        "h",
        "w",
        "c",
        "score",
        "coded",
    ])
    .ctx(ctx)?;
    for p in &order.planes {
        let coded = p
            .slots
            .iter()
            .zip(p.scores.iter().map(|s| format!("{s:.12e}")));
        let free = p.skipped.iter().map(|i| (i, String::new()));
        for (rank, (i, score)) in coded.chain(free).enumerate() {
            let (h, ww, c) = dims.unflat(*i);
            let coded = if score.is_empty() { "0" } else { "1" };
            w.write_record([
                p.plane.to_string(),
                rank.to_string(),
                i.0.to_string(),
                h.to_string(),
                ww.to_string(),
                c.to_string(),
                score,
                coded.to_string(),
            ])
            .ctx(ctx)?;
        }
    }
    flush(&mut w, &a.out)?;
    println!("strategy           {}", a.strategy);
    println!("planes             {}", order.planes.len());
    println!("side info needed   {}", order.requires_side_info);
    println!("order hash         {:016x}", order.permutation_hash());
    Ok(())
}

pub fn rate_curve(a: RateCurveArgs) -> CliResult {
    struct Row {
        sample: String,
        strategy: Strategy,
        level: u32,
        bytes: usize,
        bpp: f64,
        mse: f64,
        pred: usize,
        label: usize,
    }
    let jobs: Vec<(&PathBuf, Strategy)> = a
        .inputs
        .iter()
        .flat_map(|p| a.strategy.iter().map(move |&s| (p, s)))
        .collect();
    let rows: Vec<Vec<Row>> = jobs
        .par_iter()
        .map(|&(p, strategy)| -> CliResult<Vec<Row>> {
            let grid = read_grid(p)?;
            let opts = encode_options(strategy, &a.codec, &grid, &show(p))?;
            let (stream, _) = encode_grid(&grid, &opts).ctx(|| format!("encoding {}", show(p)))?;
            let clf = classifier(&a.codec.classifier, grid.len())?;
            let full = stream
                .decode(picm::Budget::Full)
                .ctx(|| "decoding".into())?;
            let label = clf.predict(&full.latent).ctx(|| "classifying".into())?;
            let pixels = grid.dims().nominal_pixels() as f64;
            let mut budgets = vec![picm::Budget::Level(0)];
            budgets.extend(level_budgets(stream.header(), a.levels));
            budgets
                .into_iter()
                .enumerate()
                .map(|(level, b)| {
                    let d = stream
                        .decode(b)
                        .ctx(|| format!("decoding {} at {b:?}", show(p)))?;
                    let pred = clf.predict(&d.latent).ctx(|| "classifying".into())?;
                    Ok(Row {
                        sample: show(p),
                        strategy,
                        level: level as u32,
                        bytes: d.report.budget_bytes,
                        bpp: d.report.budget_bytes as f64 * 8.0 / pixels,
                        mse: d.mse_against(grid.values()),
                        pred,
                        label,
                    })
                })
                .collect()
        })
        .collect::<CliResult<_>>()?;
    let mut w = csv_writer(&a.out)?;
    let ctx = || format!("writing {}", show(&a.out));
    w.write_record([
        "sample", "strategy", "level", "bytes", "bpp", "mse", "pred", "label", "correct",
    ])
    .ctx(ctx)?;
    for r in rows.iter().flatten() {
        w.write_record([
            r.sample.clone(),
            r.strategy.to_string(),
            r.level.to_string(),
            r.bytes.to_string(),
            format!("{:.6}", r.bpp),
            format!("{:.9e}", r.mse),
            r.pred.to_string(),
            r.label.to_string(),
            ((r.pred == r.label) as u8).to_string(),
        ])
        .ctx(ctx)?;
    }
    flush(&mut w, &a.out)?;
    for s in &a.strategy {
        let mine: Vec<&Row> = rows.iter().flatten().filter(|r| r.strategy == *s).collect();
        let top = mine.iter().map(|r| r.level).max().unwrap_or(0);
        let at = |l: u32| -> (f64, f64, f64) {
            let sel: Vec<&&Row> = mine.iter().filter(|r| r.level == l).collect();
            let n = sel.len().max(1) as f64;
            (
                sel.iter().map(|r| r.bpp).sum::<f64>() / n,
                sel.iter().map(|r| r.mse).sum::<f64>() / n,
                sel.iter().filter(|r| r.pred == r.label).count() as f64 / n,
            )
        };
        let (b0, m0, a0) = at(0);
        let (b1, m1, a1) = at(top);
        println!("{s}: level 0 bpp {b0:.4} mse {m0:.4} acc {a0:.3}; level {top} bpp {b1:.4} mse {m1:.3e} acc {a1:.3}");
    }
    Ok(())
}

fn prepare_samples(
    inputs: &[PathBuf],
    coding: &CodingArgs,
) -> CliResult<(Vec<Sample>, SyntheticClassifier)> {
    let first = read_grid(inputs.first().ok_or_else(|| CliError::usage("no inputs"))?)?;
    let clf = classifier(&coding.codec.classifier, first.len())?;
    let samples = inputs
        .par_iter()
        .map(|p| {
            let grid = read_grid(p)?;
            let opts = encode_options(coding.strategy, &coding.codec, &grid, &show(p))?;
            Sample::prepare(show(p), &grid, &clf, &opts).ctx(|| format!("preparing {}", show(p)))
        })
        .collect::<CliResult<Vec<_>>>()?;
    Ok((samples, clf))
}

pub fn filter_train(a: FilterTrainArgs) -> CliResult {
    // (sample id, level, bytes, features, correct)
    let rows: Vec<(String, u32, Option<u64>, picm::FeatureVector, bool)> = match &a.logits_csv {
        Some(p) => {
            let recs = load_logits(p).ctx(|| format!("reading {}", show(p)))?;
            recs.iter()
                .map(|r| {
                    let f = picm::controller::extract_features(&r.logits)
                        .ctx(|| format!("sample {} level {}", r.sample_id, r.level))?;
                    Ok((r.sample_id.clone(), r.level, None, f, r.correct()))
                })
                .collect::<CliResult<_>>()?
        }
        None => {
            let (samples, clf) = prepare_samples(&a.inputs, &a.coding)?;
            build_training_set(&samples, &clf, a.levels)
                .ctx(|| "building training set".into())?
                .into_iter()
                .map(|r| (r.sample_id, r.level, Some(r.bytes), r.features, r.correct))
                .collect()
        }
    };
    let data: Vec<_> = rows.iter().map(|r| (r.3, r.4)).collect();
    let opts = TrainOptions {
        lambda: a.lambda,
        seed: a.coding.codec.seed,
        ..TrainOptions::default()
    };
    let model = train_filter(&data, &opts).ctx(|| "training filter".into())?;
    model
        .save(&a.out)
        .ctx(|| format!("writing {}", show(&a.out)))?;
    if let Some(p) = &a.rows_out {
        let mut w = csv_writer(p)?;
        let ctx = || format!("writing {}", show(p));
        let mut header = vec!["sample_id", "level", "bytes", "correct"];
        header.extend(FEATURE_NAMES);
        w.write_record(&header).ctx(ctx)?;
        for r in &rows {
            let mut rec = vec![
                r.0.clone(),
                r.1.to_string(),
                r.2.map_or(String::new(), |b| b.to_string()),
                (r.4 as u8).to_string(),
            ];
            rec.extend(r.3.iter().map(|v| format!("{v:.12e}")));
            w.write_record(&rec).ctx(ctx)?;
        }
        flush(&mut w, p)?;
    }
    let positives = data.iter().filter(|d| d.1).count();
    let train_acc = data
        .iter()
        .filter(|(f, y)| (model.predict(f) >= 0.5) == *y)
        .count() as f64
        / data.len() as f64;
    println!("rows               {}", data.len());
    println!("correct rows       {positives}");
    println!("iterations         {}", model.iterations);
    println!("gradient norm      {:.3e}", model.grad_norm);
    println!("training accuracy  {train_acc:.4}");
    if model.degenerate {
        println!("warning            single-class training set; filter predicts a constant");
    }
    Ok(())
}

struct Decision {
    sample: String,
    label: usize,
    outcome: AdaptiveOutcome,
}

/// Optional byte count and logits at one decoding level.
type Level = (Option<u64>, Vec<f64>);

pub fn adaptive(a: AdaptiveArgs) -> CliResult {
    let model = FilterModel::load(&a.model).ctx(|| format!("reading {}", show(&a.model)))?;
    fs::create_dir_all(&a.out_dir).ctx(|| format!("creating {}", show(&a.out_dir)))?;
    enum Source {
        Streams(Vec<Sample>, SyntheticClassifier),
        Logits(Vec<(String, usize, Vec<Level>)>),
    }
    let source = match &a.logits_csv {
        Some(p) => {
            let recs = load_logits(p).ctx(|| format!("reading {}", show(p)))?;
            Source::Logits(
                group_by_sample(recs)
                    .into_iter()
                    .map(|g| {
                        (
                            g[0].sample_id.clone(),
                            g[0].label,
                            g.into_iter().map(|r| (None, r.logits)).collect(),
                        )
                    })
                    .collect(),
            )
        }
        None => {
            let (s, clf) = prepare_samples(&a.inputs, &a.coding)?;
            Source::Streams(s, clf)
        }
    };
    for &tau in &a.tau {
        let decisions: Vec<Decision> = match &source {
            Source::Streams(samples, clf) => samples
                .par_iter()
                .map(|s| {
                    let levels = level_budgets(s.stream.header(), a.levels);
                    let outcome =
                        adaptive_decode(&s.stream, clf as &dyn TaskOracle, &model, tau, &levels)
                            .ctx(|| format!("adaptive decoding {}", s.id))?;
                    Ok(Decision {
                        sample: s.id.clone(),
                        label: s.label,
                        outcome,
                    })
                })
                .collect::<CliResult<_>>()?,
            Source::Logits(groups) => groups
                .iter()
                .map(|(id, label, levels)| {
                    let outcome =
                        stop_on_levels(levels, &model, tau).ctx(|| format!("sample {id}"))?;
                    Ok(Decision {
                        sample: id.clone(),
                        label: *label,
                        outcome,
                    })
                })
                .collect::<CliResult<_>>()?,
        };
        let tag = format!("{tau}");
        let trace_path = a.out_dir.join(format!("trace_tau{tag}.csv"));
        let traces: Vec<(String, Vec<TraceRow>)> = decisions
            .iter()
            .map(|d| (d.sample.clone(), d.outcome.trace.clone()))
            .collect();
        let f = fs::File::create(&trace_path).ctx(|| format!("creating {}", show(&trace_path)))?;
        write_trace(f, &traces).ctx(|| format!("writing {}", show(&trace_path)))?;

        let dec_path = a.out_dir.join(format!("decisions_tau{tag}.csv"));
        let mut w = csv_writer(&dec_path)?;
        let ctx = || format!("writing {}", show(&dec_path));
        w.write_record([
            "sample_id",
            "level",
            "bytes",
            "p",
            "pred",
            "label",
            "correct",
        ])
        .ctx(ctx)?;
        for d in &decisions {
            let last = d.outcome.trace.last().unwrap();
            w.write_record([
                d.sample.clone(),
                d.outcome.level.to_string(),
                d.outcome.bytes.map_or(String::new(), |b| b.to_string()),
                format!("{:.9}", last.p),
                d.outcome.prediction.to_string(),
                d.label.to_string(),
                ((d.outcome.prediction == d.label) as u8).to_string(),
            ])
            .ctx(ctx)?;
        }
        flush(&mut w, &dec_path)?;

        let n = decisions.len().max(1) as f64;
        let pairs: Vec<(f64, bool)> = decisions
            .iter()
            .map(|d| {
                (
                    d.outcome.trace.last().unwrap().p,
                    d.outcome.prediction == d.label,
                )
            })
            .collect();
        let acc = pairs.iter().filter(|p| p.1).count() as f64 / n;
        let level = decisions
            .iter()
            .map(|d| d.outcome.level as f64)
            .sum::<f64>()
            / n;
        let bytes: Vec<u64> = decisions.iter().filter_map(|d| d.outcome.bytes).collect();
        let mean_bytes = if bytes.is_empty() {
            "n/a".to_string()
        } else {
            format!(
                "{:.1}",
                bytes.iter().sum::<u64>() as f64 / bytes.len() as f64
            )
        };
        let e = ece_of(&pairs, 10).ctx(|| "calibration".into())?;
        println!("tau {tau}: samples {} mean level {level:.2} mean bytes {mean_bytes} accuracy {acc:.4} ece {e:.4}", decisions.len());
    }
    Ok(())
}

fn parse_bool(s: &str) -> Option<bool> {
    match s.trim() {
        "1" | "true" | "True" => Some(true),
        "0" | "false" | "False" => Some(false),
        _ => None,
    }
}

fn column(headers: &csv::StringRecord, name: &str, p: &Path) -> CliResult<usize> {
    headers
        .iter()
        .position(|h| h.trim() == name)
        .ok_or_else(|| {
            CliError::new(
                show(p),
                picm::Error::Schema(format!("missing column {name:?}")),
            )
        })
}

pub fn ece(a: EceArgs) -> CliResult {
    let mut r = csv::Reader::from_path(&a.input).ctx(|| format!("reading {}", show(&a.input)))?;
    let headers = r
        .headers()
        .ctx(|| format!("reading {}", show(&a.input)))?
        .clone();
    let (pi, ci) = (
        column(&headers, "p", &a.input)?,
        column(&headers, "correct", &a.input)?,
    );
    let mut pairs = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec.ctx(|| format!("reading {}", show(&a.input)))?;
        let bad = || {
            CliError::new(
                format!("{} line {}", show(&a.input), line + 2),
                picm::Error::Schema("bad p or correct field".into()),
            )
        };
        let p: f64 = rec
            .get(pi)
            .and_then(|v| v.trim().parse().ok())
            .ok_or_else(bad)?;
        let c = rec.get(ci).and_then(parse_bool).ok_or_else(bad)?;
        pairs.push((p, c));
    }
    let e = ece_of(&pairs, a.bins).ctx(|| "calibration".into())?;
    if let Some(out) = &a.out {
        let mut w = csv_writer(out)?;
        let ctx = || format!("writing {}", show(out));
        w.write_record(["bin", "lo", "hi", "count", "confidence", "accuracy"])
            .ctx(ctx)?;
        for b in 0..a.bins {
            let lo = b as f64 / a.bins as f64;
            let hi = (b + 1) as f64 / a.bins as f64;
            let sel: Vec<&(f64, bool)> = pairs
                .iter()
                .filter(|(p, _)| ((p * a.bins as f64) as usize).min(a.bins - 1) == b)
                .collect();
            let n = sel.len();
            let (conf, acc) = if n == 0 {
                (String::new(), String::new())
            } else {
                (
                    format!("{:.6}", sel.iter().map(|x| x.0).sum::<f64>() / n as f64),
                    format!(
                        "{:.6}",
                        sel.iter().filter(|x| x.1).count() as f64 / n as f64
                    ),
                )
            };
            w.write_record([
                b.to_string(),
                format!("{lo:.4}"),
                format!("{hi:.4}"),
                n.to_string(),
                conf,
                acc,
            ])
            .ctx(ctx)?;
        }
        flush(&mut w, out)?;
    }
    println!("predictions        {}", pairs.len());
    println!("bins               {}", a.bins);
    println!("ece                {e:.6}");
    Ok(())
}

fn read_curve(p: &Path) -> CliResult<Vec<CurvePoint>> {
    let mut r = csv::Reader::from_path(p).ctx(|| format!("reading {}", show(p)))?;
    let headers = r.headers().ctx(|| format!("reading {}", show(p)))?.clone();
    let (ri, ai) = (
        column(&headers, "rate", p)?,
        column(&headers, "accuracy", p)?,
    );
    r.records()
        .enumerate()
        .map(|(line, rec)| {
            let rec = rec.ctx(|| format!("reading {}", show(p)))?;
            let get = |i: usize| rec.get(i).and_then(|v| v.trim().parse::<f64>().ok());
            match (get(ri), get(ai)) {
                (Some(rate), Some(acc)) => Ok(CurvePoint::new(rate, acc)),
                _ => Err(CliError::new(
                    format!("{} line {}", show(p), line + 2),
                    picm::Error::Schema("bad rate or accuracy".into()),
                )),
            }
        })
        .collect()
}

pub fn bd(a: BdArgs) -> CliResult {
    let ca = read_curve(&a.a)?;
    let cb = read_curve(&a.b)?;
    let r = bd_rate(&ca, &cb).ctx(|| "BD-rate".into())?;
    let acc = bd_accuracy(&ca, &cb).ctx(|| "BD-accuracy".into())?;
    println!("bd_rate_percent,bd_accuracy");
    println!("{r:.6},{acc:.6}");
    Ok(())
}

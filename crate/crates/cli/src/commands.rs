use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use glyphgan::data::glyph::{read_codepoint_list, write_codepoint_list};
use glyphgan::data::{
    load_font_dir, make_split, make_synthetic_font_pair, rasterize_font, save_font_dir, FewShotStrategy, GlyphDataset,
    GlyphImage,
};
use glyphgan::metrics::{
    evaluate as evaluate_pairs, generate as generate_glyphs, image_grid, FeatureEmbedder, MetricReport,
    PrecomputedEmbedder, RandomConvEmbedder,
};
use glyphgan::model::Generator;
use glyphgan::stroke::{format_codepoint, parse_codepoint, StrokeTable};
use glyphgan::train::run::{LATEST_CHECKPOINT, LOSSES_FILE};
use glyphgan::train::{load_checkpoint, resume_run, train_run, RunOutput, StepLosses, TrainConfig};
use glyphgan::TrainState32;

use crate::{AblateArgs, AblateMode, BuildDataArgs, ConfigArgs, DataArgs, EncodeArgs, EvaluateArgs, GenerateArgs, TrainArgs};

const STROKES_FILE: &str = "strokes.txt";
const MANIFEST_FILE: &str = "manifest.txt";
const REPORT_FILE: &str = "report.json";
const SAMPLES_DIR: &str = "samples";
const ABLATION_FILE: &str = "ablation.csv";
const EVAL_BATCH: usize = 16;
/// Steps averaged for the "final" losses of an ablation row.
const FINAL_WINDOW: usize = 20;

pub fn build_data(a: BuildDataArgs) -> Result<()> {
    std::fs::create_dir_all(&a.out)?;
    if let Some(n) = a.synthetic {
        let pair = make_synthetic_font_pair(n, a.seed, a.resolution);
        save_font_dir(&a.out, &pair.source)?;
        save_font_dir(&a.out, &pair.target)?;
        pair.table.save(a.out.join(STROKES_FILE))?;
        println!("wrote {n} synthetic glyph pairs and {} to {}", STROKES_FILE, a.out.display());
        return Ok(());
    }
    let (Some(font), Some(font_id), Some(list)) = (&a.font, &a.font_id, &a.codepoints) else {
        bail!("--font needs --font-id and --codepoints");
    };
    let chars = read_codepoint_list(list)?;
    let report = rasterize_font(font, font_id, &chars, a.resolution)?;
    save_font_dir(&a.out, &report.images)?;
    if !report.missing.is_empty() {
        let path = a.out.join(format!("{font_id}.missing.txt"));
        write_codepoint_list(&path, &report.missing)?;
        log::warn!("{} characters missing from {}; listed in {}", report.missing.len(), font.display(), path.display());
    }
    println!("rendered {} of {} characters into {}", report.images.len(), chars.len(), a.out.join(font_id).display());
    Ok(())
}

/// Characters given literally or as `U+XXXX`, separated by commas or whitespace.
fn parse_chars(items: &[String]) -> Result<Vec<char>> {
    let mut out = Vec::new();
    for item in items {
        for tok in item.split(|c: char| c == ',' || c.is_whitespace()).filter(|t| !t.is_empty()) {
            if tok.starts_with("U+") {
                out.push(parse_codepoint(tok).with_context(|| format!("bad codepoint {tok:?}"))?);
            } else {
                out.extend(tok.chars());
            }
        }
    }
    Ok(out)
}

pub fn encode(a: EncodeArgs) -> Result<()> {
    let table = StrokeTable::load(&a.strokes)?;
    let chars = if a.chars.is_empty() {
        table.characters().collect()
    } else {
        parse_chars(&a.chars)?
    };
    for c in chars {
        let enc = table.encode(c)?;
        let bits: String = enc.bits().iter().map(|b| char::from(b'0' + b)).collect();
        println!("{}\t{bits}\t{}", format_codepoint(c), enc.popcount());
    }
    if a.collisions {
        for group in table.encoding_collisions() {
            let names: Vec<String> = group.iter().map(|c| format_codepoint(*c)).collect();
            println!("collision\t{}", names.join(","));
        }
    }
    Ok(())
}

fn resolve_config(args: &ConfigArgs) -> Result<TrainConfig> {
    let mut config = match &args.config {
        Some(path) => TrainConfig::load(path)?,
        None => TrainConfig::default(),
    };
    for kv in &args.overrides {
        let (k, v) = kv.split_once('=').with_context(|| format!("--set expects KEY=VALUE, got {kv:?}"))?;
        config.set(k, v)?;
    }
    if let Some(s) = args.seed {
        config.seed = s;
    }
    if let Some(s) = args.max_steps {
        config.max_steps = s;
    }
    config.validate()?;
    Ok(config)
}

fn strokes_path(d: &DataArgs) -> PathBuf {
    d.strokes.clone().unwrap_or_else(|| d.data_root.join(STROKES_FILE))
}

fn load_dataset(d: &DataArgs, resolution: usize) -> Result<GlyphDataset> {
    let table = StrokeTable::load(strokes_path(d))?;
    let source = load_font_dir(&d.data_root, &d.source_font, resolution)?;
    let target = load_font_dir(&d.data_root, &d.target_font, resolution)?;
    Ok(GlyphDataset::new(
        source.into_values().collect(),
        target.into_values().collect(),
        table,
    )?)
}

/// The resolved config preceded by `#` lines naming the data; it loads back as a
/// config file.
fn manifest(command: &str, d: &DataArgs, config: &TrainConfig, table_version: &str) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# glyphgan {command} manifest");
    let _ = writeln!(out, "# version: {}", env!("CARGO_PKG_VERSION"));
    let _ = writeln!(out, "# data_root: {}", d.data_root.display());
    let _ = writeln!(out, "# source_font: {}", d.source_font);
    let _ = writeln!(out, "# target_font: {}", d.target_font);
    let _ = writeln!(out, "# strokes: {}", strokes_path(d).display());
    let _ = writeln!(out, "# stroke_table_version: {table_version}");
    let _ = writeln!(out, "# precision: f32");
    out.push_str(&config.to_text());
    out
}

fn write_manifest(dir: &Path, command: &str, d: &DataArgs, config: &TrainConfig, data: &GlyphDataset) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join(MANIFEST_FILE), manifest(command, d, config, &data.table.version))?;
    Ok(())
}

pub fn train(a: TrainArgs) -> Result<()> {
    let config = resolve_config(&a.config)?;
    let data = load_dataset(&a.data, config.resolution)?;
    let out = if a.resume {
        let path = a.out.join(LATEST_CHECKPOINT);
        let mut state: TrainState32 = load_checkpoint(&path)?;
        state.config.max_steps = config.max_steps;
        state.config.epochs = config.epochs;
        log::info!("resuming from {} at step {}", path.display(), state.step);
        write_manifest(&a.out, "train", &a.data, &state.config, &data)?;
        resume_run(state, &data, Some(&a.out))?
    } else {
        write_manifest(&a.out, "train", &a.data, &config, &data)?;
        train_run::<f32>(&config, &data, Some(&a.out))?
    };
    println!(
        "trained to step {}; {} checkpoint file(s), losses in {}",
        out.state.step,
        out.checkpoints.len(),
        a.out.join(LOSSES_FILE).display()
    );
    Ok(())
}

fn load_generator(path: &Path) -> Result<(Generator<f32>, TrainConfig)> {
    let state: TrainState32 = load_checkpoint(path)?;
    Ok((state.nets.generator, state.config))
}

pub fn generate(a: GenerateArgs) -> Result<()> {
    let chars = match (&a.chars, &a.codepoints) {
        (Some(s), _) => parse_chars(std::slice::from_ref(s))?,
        (None, Some(p)) => read_codepoint_list(p)?,
        (None, None) => Vec::new(),
    };
    std::fs::create_dir_all(&a.out)?;
    if chars.is_empty() {
        log::warn!("no characters requested; nothing generated");
        return Ok(());
    }
    let (mut generator, config) = load_generator(&a.checkpoint)?;
    let sources: Vec<GlyphImage> = match (&a.font, &a.data_root) {
        (Some(font), _) => {
            let report = rasterize_font(font, "source", &chars, config.resolution)?;
            if !report.missing.is_empty() {
                let names: Vec<String> = report.missing.iter().map(|c| format_codepoint(*c)).collect();
                bail!(glyphgan::Error::UnrenderableFont(format!(
                    "{} has no glyph for {}",
                    font.display(),
                    names.join(", ")
                )));
            }
            report.images
        }
        (None, Some(root)) => {
            let mut glyphs = load_font_dir(root, &a.source_font, config.resolution)?;
            chars
                .iter()
                .map(|c| {
                    glyphs.remove(c).with_context(|| {
                        format!("{} has no glyph {} (pass --font to render it)", a.source_font, format_codepoint(*c))
                    })
                })
                .collect::<Result<_>>()?
        }
        (None, None) => bail!("source glyphs need --data-root or --font"),
    };
    let refs: Vec<&GlyphImage> = sources.iter().collect();
    let generated = generate_glyphs(&mut generator, &refs, EVAL_BATCH)?;
    for g in &generated {
        g.save_png(a.out.join(format!("{}.png", format_codepoint(g.codepoint))))?;
    }
    println!("wrote {} glyphs to {}", generated.len(), a.out.display());
    Ok(())
}

fn embedder(features: Option<&Path>, seed: u64) -> Result<Box<dyn FeatureEmbedder>> {
    Ok(match features {
        Some(p) => Box::new(PrecomputedEmbedder::load(p)?),
        None => Box::new(RandomConvEmbedder::new(seed)),
    })
}

fn config_echo(config: &TrainConfig) -> BTreeMap<String, String> {
    TrainConfig::KEYS
        .iter()
        .map(|k| (k.to_string(), config.get(k).expect("known key")))
        .collect()
}

fn score(
    generator: &Generator<f32>,
    data: &GlyphDataset,
    chars: &[char],
    embedder: &dyn FeatureEmbedder,
) -> Result<(MetricReport, Vec<GlyphImage>)> {
    let pairs: Vec<_> = chars
        .iter()
        .filter_map(|c| Some((data.source.get(c)?, data.target.get(c)?)))
        .collect();
    if pairs.len() < chars.len() {
        log::warn!("{} requested characters lack a source/target pair", chars.len() - pairs.len());
    }
    let mut g = generator.clone();
    let ev = evaluate_pairs(&mut g, &pairs, embedder, EVAL_BATCH)?;
    Ok((ev.report, ev.generated))
}

pub fn evaluate(a: EvaluateArgs) -> Result<()> {
    let (generator, config) = load_generator(&a.checkpoint)?;
    let data = load_dataset(&a.data, config.resolution)?;
    let chars = match &a.codepoints {
        Some(p) => read_codepoint_list(p)?,
        None => make_split(&data.shared_characters(), config.seed)?.test,
    };
    let emb = embedder(a.features.as_deref(), a.embed_seed)?;
    let (mut report, generated) = score(&generator, &data, &chars, emb.as_ref())?;
    report.config = config_echo(&config);
    report.config.insert("checkpoint".into(), a.checkpoint.display().to_string());
    std::fs::create_dir_all(a.out.join(SAMPLES_DIR))?;
    report.save(&a.out.join(REPORT_FILE))?;
    let rows: Vec<[&GlyphImage; 3]> = generated
        .iter()
        .take(a.samples)
        .map(|g| [&data.source[&g.codepoint], g, &data.target[&g.codepoint]])
        .collect();
    image_grid(&rows).save(a.out.join(SAMPLES_DIR).join("grid.png"))?;
    println!(
        "{} pairs: FID {:.4}  perceptual {:.4}  PSNR {:.2} dB  SSIM {:.4}",
        report.n_pairs, report.fid, report.perceptual, report.psnr_db, report.ssim
    );
    Ok(())
}

/// Mean of the last [`FINAL_WINDOW`] non-zero values of a loss term.
fn final_loss(history: &[StepLosses], term: fn(&StepLosses) -> f64) -> f64 {
    let v: Vec<f64> = history.iter().map(term).filter(|v| *v != 0.0).collect();
    let tail = &v[v.len().saturating_sub(FINAL_WINDOW)..];
    tail.iter().sum::<f64>() / tail.len().max(1) as f64
}

pub const ABLATION_HEADER: &str =
    "variant,paired_fraction,copy_augment,n_paired,lambda_fs3_effective,steps,L_adv_D,L_adv_G,L_cyc,L_stroke,L_FS3,fid,perceptual,psnr_db,ssim";

fn ablation_row(name: &str, config: &TrainConfig, run: &RunOutput<f32>, report: &MetricReport) -> String {
    let fraction = match config.fewshot {
        FewShotStrategy::Random { fraction } => fraction.to_string(),
        FewShotStrategy::Deterministic { .. } => config.fewshot.to_string(),
    };
    let n_paired = if config.copy_augment > 0.0 { 0 } else { run.data.plan.paired.len() };
    let lambda = if n_paired == 0 { 0.0 } else { config.weights.lambda_fs3 };
    let h = &run.history;
    format!(
        "{name},{fraction},{},{n_paired},{lambda},{},{},{},{},{},{},{},{},{},{}",
        config.copy_augment,
        h.len(),
        final_loss(h, |r| r.adv_d),
        final_loss(h, |r| r.adv_g),
        final_loss(h, |r| r.cyc),
        final_loss(h, |r| r.stroke),
        final_loss(h, |r| r.fs3),
        report.fid,
        report.perceptual,
        report.psnr_db,
        report.ssim
    )
}

pub fn ablate(a: AblateArgs) -> Result<()> {
    let base = resolve_config(&a.config)?;
    let data = load_dataset(&a.data, base.resolution)?;
    let emb = embedder(None, a.embed_seed)?;
    let mut variants: Vec<(String, TrainConfig)> = Vec::new();
    match a.mode {
        AblateMode::FewshotSweep => {
            for &p in &a.percentages {
                let mut c = base.clone();
                c.fewshot = FewShotStrategy::Random { fraction: p };
                c.copy_augment = 0.0;
                variants.push((format!("fewshot-{}", (p * 100.0).round()), c));
            }
        }
        AblateMode::CopyAugment => {
            let mut unpaired = base.clone();
            unpaired.fewshot = FewShotStrategy::Random { fraction: 0.0 };
            unpaired.copy_augment = 0.0;
            let mut copied = unpaired.clone();
            copied.copy_augment = a.copy_fraction;
            variants.push(("unpaired".into(), unpaired));
            variants.push(("copy-augment".into(), copied));
            variants.push(("fewshot".into(), base.clone()));
        }
    }
    std::fs::create_dir_all(&a.out)?;
    let mut table = format!("{ABLATION_HEADER}\n");
    println!("{ABLATION_HEADER}");
    for (name, config) in &variants {
        config.validate()?;
        let dir = a.out.join(name);
        write_manifest(&dir, "ablate", &a.data, config, &data)?;
        let run = train_run::<f32>(config, &data, Some(&dir))?;
        let (report, _) = score(&run.state.nets.generator, &data, &run.data.split.test, emb.as_ref())?;
        let row = ablation_row(name, config, &run, &report);
        println!("{row}");
        table.push_str(&row);
        table.push('\n');
    }
    std::fs::write(a.out.join(ABLATION_FILE), table)?;
    Ok(())
}

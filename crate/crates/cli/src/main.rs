use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};

use rdbench_core::analytics::{
    aggregate, classify_failure, gaming_signature, video_aux_stats, AuxStats, Classification,
    SequenceRecord, SliceSpec,
};
use rdbench_core::bd::BdOptions;
use rdbench_core::harness::{
    read_manifest, FfmpegPatchEncoder, Harness, HarnessOptions, SweepOutcome, Toolchain,
    VariantSpec, BASELINE_ID,
};
use rdbench_core::rate_proxy::{
    calibrate, extract_patches, read_measurements_csv, run_calibration, write_fit_csv,
    write_measurements_csv, CalibrationFit,
};
use rdbench_core::report::csvio::write_aux;
use rdbench_core::report::{
    curves_from_rows, load_slice_file, parse_slice_list, read_aux, read_per_qp, read_summary,
    records_from_summary, render_classifications, render_slices, render_summary, rows_from_curves,
    summarize, svg, variant_ids, write_per_qp, write_summary, ColumnAliases, Config,
};
use rdbench_core::yuv::{resolve_geometry, RawVideo};
use rdbench_core::{Error, Geometry, MetricKind, RDCurve};

const EXIT_USAGE: u8 = 2;
const EXIT_PARTIAL: u8 = 3;

/// Frames sampled per sequence when aux statistics come from raw video.
const AUX_SAMPLE_FRAMES: u64 = 30;

#[derive(Parser)]
#[command(
    name = "rdbench",
    version,
    about = "Rate-distortion benchmarking toolkit"
)]
struct Cli {
    /// TOML run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Encode and score every sequence of a manifest for the baseline and each variant.
    Sweep(SweepArgs),
    /// BD deltas of each variant against the baseline from a per-QP CSV.
    Bdrate(BdrateArgs),
    /// Corpus slices and optional failure labels from a summary CSV.
    Report(ReportArgs),
    /// RD curves as SVG.
    Plot(PlotArgs),
    /// Correlate the DCT rate proxy with real encoder cost.
    Calibrate(CalibrateArgs),
    /// Failure labels and gaming check for a summary CSV.
    Classify(ClassifyArgs),
}

#[derive(Args)]
struct SweepArgs {
    /// CSV with sequence,path,width,height,fps,frames[,pix_fmt].
    #[arg(long)]
    manifest: PathBuf,
    /// `[id=]<encoder>` or `[id=]pre:<command>`; repeatable.
    #[arg(long = "variant")]
    variants: Vec<VariantSpec>,
    /// Per-QP CSV to write.
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    cache_dir: Option<PathBuf>,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    keep_intermediates: bool,
    #[arg(long)]
    ffmpeg: Option<PathBuf>,
    /// Comma-separated QP grid.
    #[arg(long, value_delimiter = ',')]
    qps: Option<Vec<u32>>,
}

#[derive(Args)]
struct BdrateArgs {
    per_qp: PathBuf,
    #[arg(long, default_value = BASELINE_ID)]
    baseline: String,
    /// Only this variant; default is every non-baseline variant.
    #[arg(long)]
    variant: Option<String>,
    /// Summary CSV. With several variants each gets `<stem>_<variant>.csv`.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct AuxSource {
    /// CSV with sequence,smooth_fraction[,chroma_spread].
    #[arg(long)]
    aux: Option<PathBuf>,
    /// Compute aux statistics from the raw sequences of this manifest.
    #[arg(long, conflicts_with = "aux")]
    manifest: Option<PathBuf>,
    /// Per-QP CSV supplying each sequence's baseline VMAF at the lowest QP.
    #[arg(long)]
    per_qp: Option<PathBuf>,
    #[arg(long, default_value = BASELINE_ID)]
    baseline: String,
}

#[derive(Args)]
struct ReportArgs {
    summary: PathBuf,
    /// `name=ID,ID;name2=ID` or a TOML file with `[[slices]]`.
    #[arg(long)]
    slices: Option<String>,
    #[command(flatten)]
    source: AuxSource,
}

#[derive(Args)]
struct ClassifyArgs {
    summary: PathBuf,
    #[command(flatten)]
    source: AuxSource,
    /// Also write the aux statistics used.
    #[arg(long)]
    write_aux: Option<PathBuf>,
}

#[derive(Args)]
struct PlotArgs {
    per_qp: PathBuf,
    /// vmaf, vmaf_neg, psnr_y or ms_ssim.
    #[arg(long, default_value = "vmaf")]
    metric: MetricKind,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value = BASELINE_ID)]
    baseline: String,
    /// Summary CSV for a BD-VMAF vs BD-VMAF-NEG scatter.
    #[arg(long)]
    scatter: Option<PathBuf>,
}

#[derive(Args)]
struct CalibrateArgs {
    /// Raw yuv420p video to cut patches from.
    #[arg(long, required_unless_present = "measurements")]
    source: Option<PathBuf>,
    /// `WxH` of the source when neither a sidecar nor the file name gives it.
    #[arg(long)]
    size: Option<String>,
    /// Refit an existing measurements CSV instead of encoding.
    #[arg(long, conflicts_with = "source")]
    measurements: Option<PathBuf>,
    #[arg(long)]
    out_dir: PathBuf,
    #[arg(long)]
    patches: Option<usize>,
    #[arg(long)]
    patch_size: Option<u32>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_delimiter = ',')]
    qps: Option<Vec<u32>>,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    ffmpeg: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {}", describe(&e));
            ExitCode::from(exit_code(&e))
        }
    }
}

/// The error chain, skipping causes already spelled out by their parent.
fn describe(e: &anyhow::Error) -> String {
    let mut out = String::new();
    for cause in e.chain() {
        let text = cause.to_string();
        if !out.contains(&text) {
            if !out.is_empty() {
                out.push_str(": ");
            }
            out.push_str(&text);
        }
    }
    out
}

fn exit_code(e: &anyhow::Error) -> u8 {
    match e.downcast_ref::<Error>() {
        Some(
            Error::Parse { .. }
            | Error::Config(_)
            | Error::InvalidInput(_)
            | Error::InvalidSlice(_)
            | Error::Geometry { .. },
        ) => EXIT_USAGE,
        _ => 1,
    }
}

fn run(cli: Cli) -> anyhow::Result<u8> {
    let cfg = match &cli.config {
        Some(p) => Config::load(p)?,
        None => Config::default(),
    };
    let aliases = ColumnAliases::default().with(&cfg.aliases);
    match cli.command {
        Command::Sweep(a) => sweep(&cfg, a),
        Command::Bdrate(a) => bdrate(a, &aliases),
        Command::Report(a) => report(&cfg, a, &aliases),
        Command::Plot(a) => plot(a, &aliases),
        Command::Calibrate(a) => calibrate_cmd(&cfg, a),
        Command::Classify(a) => classify(&cfg, a, &aliases),
    }
}

fn toolchain(cli: Option<&Path>, cfg: &Config) -> anyhow::Result<Toolchain> {
    Ok(Toolchain::discover(cli.or(cfg.tools.ffmpeg.as_deref()))?)
}

fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    path.with_file_name(format!("{stem}{suffix}"))
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> anyhow::Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    rdbench_core::fsutil::atomic_write(path, text.as_bytes())?;
    Ok(())
}

fn sweep(cfg: &Config, a: SweepArgs) -> anyhow::Result<u8> {
    let sequences = read_manifest(&a.manifest)?;
    let mut ids: Vec<&str> = vec![BASELINE_ID];
    for v in &a.variants {
        if ids.contains(&v.id.as_str()) {
            return Err(Error::Config(format!("variant id '{}' used twice", v.id)).into());
        }
        ids.push(&v.id);
    }
    let mut opts = HarnessOptions::new(
        a.cache_dir
            .clone()
            .unwrap_or_else(|| cfg.harness.cache_dir.clone()),
    );
    opts.qps = a.qps.clone().unwrap_or_else(|| cfg.harness.qps.clone());
    if let Some(w) = a.workers.or(cfg.harness.workers) {
        if w == 0 {
            return Err(Error::Config("workers must be at least 1".into()).into());
        }
        opts.workers = w;
    }
    opts.keep_intermediates = a.keep_intermediates || cfg.harness.keep_intermediates;
    let harness = Harness::new(toolchain(a.ffmpeg.as_deref(), cfg)?, opts)?;

    eprintln!(
        "sweep: {} sequence(s) x {} leg(s) x {} QP(s) with {}",
        sequences.len(),
        a.variants.len() + 1,
        harness.options().qps.len(),
        harness.tools().version
    );
    let SweepOutcome { encodes, failures } = harness.sweep(&sequences, &a.variants);
    let mut curves: Vec<RDCurve> = Vec::new();
    let by_key = rdbench_core::harness::curves_from_encodes(&encodes);
    for s in &sequences {
        for id in &ids {
            if let Some(c) = by_key.get(&(s.id.clone(), id.to_string())) {
                curves.push(c.clone());
            }
        }
    }
    write_per_qp(&a.out, &rows_from_curves(&curves))?;
    write_json(
        &sibling(&a.out, ".metadata.json"),
        &harness.metadata(&a.variants),
    )?;
    let failure_path = sibling(&a.out, ".failures.json");
    eprintln!("wrote {} row(s) to {}", encodes.len(), a.out.display());
    if failures.is_empty() {
        if failure_path.exists() {
            std::fs::remove_file(&failure_path)
                .with_context(|| format!("remove stale {}", failure_path.display()))?;
        }
        return Ok(0);
    }
    write_json(&failure_path, &failures)?;
    for f in &failures {
        let qp = f.qp.map(|q| format!(" qp {q}")).unwrap_or_default();
        eprintln!("failed: {} / {}{qp}: {}", f.sequence, f.variant, f.message);
    }
    eprintln!(
        "{} job(s) failed; see {}",
        failures.len(),
        failure_path.display()
    );
    if encodes.is_empty() {
        bail!("every job failed");
    }
    Ok(EXIT_PARTIAL)
}

fn bdrate(a: BdrateArgs, aliases: &ColumnAliases) -> anyhow::Result<u8> {
    let curves = curves_from_rows(&read_per_qp(&a.per_qp, aliases)?);
    let variants = match &a.variant {
        Some(v) => vec![v.clone()],
        None => variant_ids(&curves, &a.baseline),
    };
    if variants.is_empty() {
        return Err(Error::Config(format!(
            "{} has no variant besides '{}'",
            a.per_qp.display(),
            a.baseline
        ))
        .into());
    }
    let mut partial = false;
    for v in &variants {
        let s = summarize(&curves, &a.baseline, v, &BdOptions::default())?;
        println!("{v} vs {}", a.baseline);
        print!("{}", render_summary(&s.rows));
        let vmaf: Vec<(f64, f64)> = s
            .records
            .iter()
            .filter_map(|r| {
                Some((
                    *r.bd.get(&MetricKind::Vmaf)?,
                    *r.bd.get(&MetricKind::VmafNeg)?,
                ))
            })
            .collect();
        if !vmaf.is_empty() {
            let (x, y): (Vec<f64>, Vec<f64>) = vmaf.into_iter().unzip();
            let g = gaming_signature(&x, &y, rdbench_core::analytics::DEFAULT_GAMING_MARGIN)?;
            println!(
                "gaming signature: {} (NEG sign pattern {}, positive on {}/{})",
                if g.flagged { "FLAGGED" } else { "clear" },
                g.neg_sign_pattern,
                g.neg_positive,
                g.n
            );
        }
        for (seq, m, msg) in &s.errors {
            let m = m.map(|m| format!(" {}", m.label())).unwrap_or_default();
            eprintln!("error: {seq}{m}: {msg}");
        }
        println!();
        partial |= s.is_partial();
        if let Some(out) = &a.out {
            let path = if variants.len() == 1 {
                out.clone()
            } else {
                sibling(out, &format!("_{}.csv", svg::file_stem(v)))
            };
            write_summary(&path, &s.rows)?;
            eprintln!("wrote {}", path.display());
        }
    }
    Ok(if partial { EXIT_PARTIAL } else { 0 })
}

/// Parses `WxH`.
fn parse_size(s: &str) -> anyhow::Result<Geometry> {
    let (w, h) = s
        .split_once('x')
        .ok_or_else(|| Error::Config(format!("size '{s}' is not WxH")))?;
    let parse = |v: &str| {
        v.parse::<u32>()
            .map_err(|_| Error::Config(format!("size '{s}' is not WxH")))
    };
    Ok(Geometry::new(parse(w)?, parse(h)?)?)
}

/// Summary records with aux statistics and top quality attached from
/// whichever sources were given.
fn enriched_records(
    cfg: &Config,
    summary: &Path,
    src: &AuxSource,
    aliases: &ColumnAliases,
) -> anyhow::Result<(Vec<SequenceRecord>, Option<BTreeMap<String, AuxStats>>)> {
    let mut records = records_from_summary(&read_summary(summary, aliases)?);
    let aux = if let Some(p) = &src.aux {
        Some(read_aux(p, aliases)?)
    } else if let Some(m) = &src.manifest {
        let mut out = BTreeMap::new();
        for s in read_manifest(m)? {
            s.verify()?;
            let video = RawVideo::open(&s.path, s.geometry)?;
            let stats = video_aux_stats(&video, cfg.analytics.smooth_variance, AUX_SAMPLE_FRAMES)?;
            out.insert(s.id.clone(), stats);
        }
        Some(out)
    } else {
        None
    };
    if let Some(aux) = &aux {
        for r in &mut records {
            r.aux = aux.get(&r.sequence_id).copied();
            if r.aux.is_none() {
                eprintln!("warning: no aux statistics for {}", r.sequence_id);
            }
        }
    }
    if let Some(p) = &src.per_qp {
        let curves = curves_from_rows(&read_per_qp(p, aliases)?);
        for r in &mut records {
            r.baseline_top_quality = curves
                .iter()
                .find(|c| c.sequence_id == r.sequence_id && c.variant_id == src.baseline)
                .and_then(|c| c.lowest_qp_point())
                .and_then(|p| p.score(MetricKind::Vmaf));
        }
    }
    Ok((records, aux))
}

fn classify_all(cfg: &Config, records: &[SequenceRecord]) -> Vec<Classification> {
    records
        .iter()
        .map(|r| classify_failure(r, &cfg.analytics.thresholds))
        .collect()
}

fn report(cfg: &Config, a: ReportArgs, aliases: &ColumnAliases) -> anyhow::Result<u8> {
    let slices: Vec<SliceSpec> = match &a.slices {
        Some(s) if Path::new(s).is_file() => load_slice_file(Path::new(s))?,
        Some(s) => parse_slice_list(s)?,
        None if !cfg.slices.is_empty() => cfg.slices.clone(),
        None => vec![SliceSpec::all()],
    };
    let (records, aux) = enriched_records(cfg, &a.summary, &a.source, aliases)?;
    let mut computed = Vec::new();
    for s in &slices {
        let c = aggregate(&records, s)?;
        for id in &c.unmatched_exclusions {
            eprintln!(
                "warning: slice '{}' excludes unknown sequence '{id}'",
                c.name
            );
        }
        computed.push(c);
    }
    print!("{}", render_slices(&computed));
    if aux.is_some() {
        println!();
        print!("{}", render_classifications(&classify_all(cfg, &records)));
    }
    Ok(0)
}

fn classify(cfg: &Config, a: ClassifyArgs, aliases: &ColumnAliases) -> anyhow::Result<u8> {
    let (records, aux) = enriched_records(cfg, &a.summary, &a.source, aliases)?;
    if records.is_empty() {
        return Err(Error::invalid("summary has no sequence rows").into());
    }
    print!("{}", render_classifications(&classify_all(cfg, &records)));
    let pairs: Vec<(f64, f64)> = records
        .iter()
        .filter_map(|r| {
            Some((
                *r.bd.get(&MetricKind::Vmaf)?,
                *r.bd.get(&MetricKind::VmafNeg)?,
            ))
        })
        .collect();
    if !pairs.is_empty() {
        let (x, y): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
        let g = gaming_signature(&x, &y, cfg.analytics.gaming_margin)?;
        println!(
            "gaming signature: {} (mean BD-VMAF {:+.2}%, mean BD-VMAF-NEG {:+.2}%, NEG positive on {}/{}: {})",
            if g.flagged { "FLAGGED" } else { "clear" },
            g.mean_vmaf,
            g.mean_vmaf_neg,
            g.neg_positive,
            g.n,
            g.neg_sign_pattern
        );
    }
    if let (Some(path), Some(aux)) = (&a.write_aux, &aux) {
        let rows: Vec<(String, AuxStats)> = aux.iter().map(|(k, v)| (k.clone(), *v)).collect();
        write_aux(path, &rows)?;
        eprintln!("wrote {}", path.display());
    }
    Ok(0)
}

fn plot(a: PlotArgs, aliases: &ColumnAliases) -> anyhow::Result<u8> {
    let curves = curves_from_rows(&read_per_qp(&a.per_qp, aliases)?);
    if curves.is_empty() {
        return Err(Error::invalid(format!("{} has no rows", a.per_qp.display())).into());
    }
    std::fs::create_dir_all(&a.out).with_context(|| format!("create {}", a.out.display()))?;
    let key = a.metric.key();
    let write = |name: String, body: String| -> anyhow::Result<()> {
        let path = a.out.join(name);
        rdbench_core::fsutil::atomic_write(&path, body.as_bytes())?;
        eprintln!("wrote {}", path.display());
        Ok(())
    };
    let mut sequences: Vec<&str> = Vec::new();
    for c in &curves {
        if !sequences.contains(&c.sequence_id.as_str()) {
            sequences.push(&c.sequence_id);
        }
    }
    let panel_title = |seq: &str| format!("{seq}: {}", a.metric.label());
    // a single-sequence combined plot is that sequence's panel
    let combined_title = match sequences.as_slice() {
        [only] => panel_title(only),
        _ => format!("{} vs bitrate", a.metric.label()),
    };
    write(
        format!("rd_{key}_combined.svg"),
        svg::rd_plot(&curves, a.metric, &a.baseline, &combined_title),
    )?;
    for seq in &sequences {
        let mine: Vec<RDCurve> = curves
            .iter()
            .filter(|c| c.sequence_id == *seq)
            .cloned()
            .collect();
        write(
            format!("rd_{key}_{}.svg", svg::file_stem(seq)),
            svg::rd_plot(&mine, a.metric, &a.baseline, &panel_title(seq)),
        )?;
    }
    if let Some(summary) = &a.scatter {
        let points: Vec<(String, f64, f64)> =
            records_from_summary(&read_summary(summary, aliases)?)
                .into_iter()
                .filter_map(|r| {
                    let x = *r.bd.get(&MetricKind::Vmaf)?;
                    let y = *r.bd.get(&MetricKind::VmafNeg)?;
                    Some((r.sequence_id, x, y))
                })
                .collect();
        if points.is_empty() {
            return Err(
                Error::invalid("summary has no rows with both BD-VMAF and BD-VMAF-NEG").into(),
            );
        }
        write(
            "bd_vmaf_vs_vmaf_neg.svg".into(),
            svg::bd_scatter(&points, "BD-VMAF vs BD-VMAF-NEG"),
        )?;
    }
    Ok(0)
}

fn calibrate_cmd(cfg: &Config, a: CalibrateArgs) -> anyhow::Result<u8> {
    std::fs::create_dir_all(&a.out_dir)
        .with_context(|| format!("create {}", a.out_dir.display()))?;
    let measurements = match (&a.measurements, &a.source) {
        (Some(m), _) => read_measurements_csv(m)?,
        (None, Some(src)) => {
            let rp = &cfg.rate_proxy;
            let g = match &a.size {
                Some(s) => parse_size(s)?,
                None => resolve_geometry(src)?,
            };
            let video = RawVideo::open(src, g)?;
            let patches = extract_patches(
                &video,
                a.patches.unwrap_or(rp.patches),
                a.patch_size.unwrap_or(rp.patch_size),
                a.seed.unwrap_or(rp.seed),
            )?;
            let qps = a.qps.clone().unwrap_or_else(|| cfg.harness.qps.clone());
            let workers = a
                .workers
                .or(cfg.harness.workers)
                .unwrap_or_else(rdbench_core::pool::default_workers);
            let encoder = FfmpegPatchEncoder::new(toolchain(a.ffmpeg.as_deref(), cfg)?)?;
            eprintln!(
                "calibrate: {} patch(es) x {} QP(s) on {workers} worker(s)",
                patches.len(),
                qps.len()
            );
            let rows = run_calibration(&patches, &qps, &rp.qp_to_quality, &encoder, workers)?;
            let path = a.out_dir.join("calibration_measurements.csv");
            write_measurements_csv(&path, &rows)?;
            eprintln!("wrote {}", path.display());
            rows
        }
        (None, None) => bail!("either --source or --measurements is required"),
    };
    let fit = calibrate(&measurements)?;
    let path = a.out_dir.join("calibration_fit.csv");
    write_fit_csv(&path, &fit)?;
    eprintln!("wrote {}", path.display());
    print_fit(&fit);
    Ok(0)
}

fn print_fit(fit: &CalibrationFit) {
    println!("patches            {}", fit.patches);
    println!("measurements       {}", fit.report.n);
    println!("spearman rho       {:.4}", fit.report.spearman_rho);
    println!("pearson r          {:.4}", fit.report.pearson_r);
    println!("mae (bpp)          {:.4}", fit.report.mae);
    println!(
        "fit                bpp = {:.4} * proxy + {:.4}",
        fit.slope, fit.intercept
    );
    for (qp, rho) in &fit.per_qp_rho {
        println!("rho at qp {qp:<8} {rho:.4}");
    }
    println!("monotone fraction  {:.4}", fit.monotone_fraction);
    if !fit.excluded_patches.is_empty() {
        println!("excluded patches   {}", fit.excluded_patches.join(","));
    }
}

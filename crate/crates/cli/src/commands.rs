//! Subcommand implementations.

use std::fs;
use std::io::Write as _;
use std::path::Path;

use anyhow::{anyhow, Context};
use ndarray::Array2;

use pmp_multipath::mtf::{estimate_envelope, normalize, MtfEnvelope};
use pmp_multipath::patterns::{default_sweep, generate_stack, SweepPlan};
use pmp_multipath::phasor::{
    default_shadow_threshold, extract_field, shadow_mask, sweep_from_field,
};
use pmp_multipath::scanset::{
    export_sweep_csv_file, load_stack, save_pfm, save_stack, ImageStack, PhasorField,
    ProjectorGeometry,
};
use pmp_multipath::separator::{Separator, SeparatorParams};
use pmp_multipath::simulator::{
    make_flat_scene, make_screen_scene, make_step_edge_scene, render_scene, EnvelopeModel,
    SceneModel,
};
use pmp_multipath::unwrap::{unwrap_chain, wrapped_phase_image};

use crate::config::{pick, pick_opt, PipelineConfig};
use crate::report::{residual_medians, truth_metrics, Report};
use crate::{
    CalibrateArgs, ExportPointsArgs, ExportSweepArgs, GenPatternsArgs, RunArgs, SimulateArgs,
};

/// Usage errors exit 1, data errors exit 2.
pub enum CmdError {
    Usage(String),
    Data(anyhow::Error),
}

impl<E: Into<anyhow::Error>> From<E> for CmdError {
    fn from(e: E) -> Self {
        CmdError::Data(e.into())
    }
}

fn usage(msg: impl Into<String>) -> CmdError {
    CmdError::Usage(msg.into())
}

pub type CmdResult = Result<(), CmdError>;

const DEFAULT_ROWS: u32 = 480;
const DEFAULT_COLS: u32 = 640;
const DEFAULT_SHIFTS: u32 = 8;
const DEFAULT_CAMERA_ROWS: usize = 96;
const DEFAULT_CAMERA_COLS: usize = 128;
const DEFAULT_NOISE: f64 = 0.002;
const DEFAULT_ALBEDO: f64 = 0.85;
const DEFAULT_Y_FG: f64 = 0.3647;
const DEFAULT_Y_BG: f64 = 0.3917;
const DEFAULT_Y_OBJECT: f64 = 0.3917;
/// Screen sits 1.5 mid-frequency wavelengths above the object, squarely in
/// the regime where the traditional chain drops a wavelength.
const DEFAULT_SCREEN_OFFSET: f64 = 0.125;
const DEFAULT_MESH_PERIOD: f64 = 6.0;
const DEFAULT_MESH_DUTY: f64 = 0.4;
const DEFAULT_RELIEF: f64 = 0.003;
const DEFAULT_CHAIN: [u32; 3] = [1, 12, 60];
const DEFAULT_BASELINE: f64 = 100.0;
const DEFAULT_PITCH: f64 = 1.0;

fn build_plan(
    rows: u32,
    cols: u32,
    shifts: u32,
    frequencies: Option<Vec<u32>>,
    zero: bool,
    strict: bool,
) -> Result<SweepPlan, CmdError> {
    if shifts < 3 {
        return Err(usage(format!("shifts must be ≥ 3, got {shifts}")));
    }
    let geometry = ProjectorGeometry::new(rows, cols).map_err(|e| usage(e.to_string()))?;
    match frequencies {
        Some(mut freqs) => {
            freqs.sort_unstable();
            let mut plan = SweepPlan::new(geometry, shifts, freqs, zero)
                .map_err(|e| usage(e.to_string()))?;
            plan.strict_quantization = strict;
            plan.validate().map_err(|e| usage(e.to_string()))?;
            Ok(plan)
        }
        None => {
            let mut plan = default_sweep(geometry, shifts).map_err(|e| usage(e.to_string()))?;
            plan.strict_quantization = strict;
            Ok(plan)
        }
    }
}

fn parse_envelope(spec: &str, k_max: u32) -> Result<EnvelopeModel, CmdError> {
    let model = match spec {
        "identity" => EnvelopeModel::Identity,
        "gaussian" => EnvelopeModel::gaussian_half_at(k_max),
        other => {
            if let Some(k0) = other.strip_prefix("gaussian:") {
                let k0: f64 = k0
                    .parse()
                    .map_err(|_| usage(format!("bad envelope spec '{other}'")))?;
                EnvelopeModel::Gaussian { k0 }
            } else {
                return Err(usage(format!(
                    "unknown envelope '{other}' (expected identity, gaussian, or gaussian:<k0>)"
                )));
            }
        }
    };
    model.validate().map_err(|e| usage(e.to_string()))?;
    Ok(model)
}

pub fn gen_patterns(args: GenPatternsArgs) -> CmdResult {
    let cfg = PipelineConfig::load_optional(args.config.as_deref())?;
    let rows = pick(args.rows, cfg.rows, DEFAULT_ROWS);
    let cols = pick(args.cols, cfg.cols, DEFAULT_COLS);
    let shifts = pick(args.shifts, cfg.shifts, DEFAULT_SHIFTS);
    let freqs = pick_opt(args.frequencies, cfg.frequencies);
    let zero = if args.zero { Some(true) } else { None };
    let zero = pick(zero, cfg.zero, freqs.is_none());
    let strict = pick(
        if args.no_strict { Some(false) } else { None },
        cfg.strict_quantization,
        true,
    );
    let plan = build_plan(rows, cols, shifts, freqs, zero, strict)?;
    let stack = generate_stack(&plan)?;
    save_stack(&stack, &args.out)?;
    println!(
        "wrote {} images ({} frequencies x {} shifts) to {}",
        stack.manifest().image_count(),
        stack.manifest().frequencies.len(),
        shifts,
        args.out.display()
    );
    Ok(())
}

pub fn simulate(args: SimulateArgs) -> CmdResult {
    let cfg = PipelineConfig::load_optional(args.config.as_deref())?;
    let rows = pick(args.rows, cfg.rows, DEFAULT_ROWS);
    let cols = pick(args.cols, cfg.cols, DEFAULT_COLS);
    let shifts = pick(args.shifts, cfg.shifts, DEFAULT_SHIFTS);
    let cam_rows = pick(args.camera_rows, cfg.camera_rows, DEFAULT_CAMERA_ROWS);
    let cam_cols = pick(args.camera_cols, cfg.camera_cols, DEFAULT_CAMERA_COLS);
    let seed = pick(args.seed, cfg.seed, 1);
    let noise = pick(args.noise_sigma, cfg.noise_sigma, DEFAULT_NOISE);
    let albedo = pick(args.albedo, cfg.albedo, DEFAULT_ALBEDO);
    let freqs = pick_opt(args.frequencies, cfg.frequencies);
    let zero = pick(
        if args.zero { Some(true) } else { None },
        cfg.zero,
        true,
    );
    let plan = build_plan(rows, cols, shifts, freqs, zero, true)?;
    let k_max = plan.frequencies.last().copied().unwrap_or(1);
    let envelope_spec = pick(args.envelope.clone(), cfg.envelope.clone(), "gaussian".into());
    let envelope = parse_envelope(&envelope_spec, k_max)?;

    let scene_name = pick(args.scene.clone(), cfg.scene.clone(), "step-edge".into());
    let mut builtin = true;
    let mut scene = match scene_name.as_str() {
        "step-edge" => {
            let y_fg = pick(args.y_fg, cfg.y_fg, DEFAULT_Y_FG);
            let y_bg = pick(args.y_bg, cfg.y_bg, DEFAULT_Y_BG);
            let edge_col = pick(args.edge_col, cfg.edge_col, cam_cols / 2);
            let band = pick(args.edge_band, cfg.edge_band, 1);
            make_step_edge_scene(cam_rows, cam_cols, y_fg, y_bg, edge_col, band)
                .map_err(|e| usage(e.to_string()))?
        }
        "screen" => {
            let y_object = pick(args.y_object, cfg.y_object, DEFAULT_Y_OBJECT);
            let y_screen = pick(args.y_screen, cfg.y_screen, y_object + DEFAULT_SCREEN_OFFSET);
            let period = pick(args.mesh_period, cfg.mesh_period, DEFAULT_MESH_PERIOD);
            let duty = pick(args.mesh_duty, cfg.mesh_duty, DEFAULT_MESH_DUTY);
            let relief = pick(args.object_relief, cfg.object_relief, DEFAULT_RELIEF);
            make_screen_scene(cam_rows, cam_cols, period, duty, y_screen, |r, c| {
                y_object
                    + relief
                        * (std::f64::consts::PI * r as f64 / cam_rows as f64).sin()
                        * (std::f64::consts::PI * c as f64 / cam_cols as f64).sin()
            })
            .map_err(|e| usage(e.to_string()))?
        }
        "flat" => {
            let y = pick(args.flat_y, cfg.flat_y, 0.5);
            make_flat_scene(cam_rows, cam_cols, y, albedo).map_err(|e| usage(e.to_string()))?
        }
        path => {
            builtin = false;
            SceneModel::load_json(Path::new(path))
                .with_context(|| format!("loading scene file {path}"))?
        }
    };
    // Built-in scenes take the imaging parameters from flags; scene files
    // carry their own.
    if builtin {
        scene.noise_sigma = noise;
        scene.envelope = envelope;
    }

    let scan = render_scene(&scene, &plan, seed)?;
    save_stack(&scan.stack, &args.out)?;
    scan.truth.save_json(&args.out.join("truth.json"))?;
    println!(
        "rendered '{scene_name}' ({cam_rows}x{cam_cols}) with seed {seed}: {} images in {}",
        scan.stack.manifest().image_count(),
        args.out.display()
    );
    Ok(())
}

pub fn calibrate(args: CalibrateArgs) -> CmdResult {
    let cfg = PipelineConfig::load_optional(args.config.as_deref())?;
    let stack = load_stack(&args.scan)?;
    let field = extract_field(&stack)?;
    let threshold = pick(
        args.shadow_threshold,
        cfg.shadow_threshold,
        default_shadow_threshold(stack.manifest().shifts),
    );
    let mask = shadow_mask(&field, threshold);
    let env = estimate_envelope(&field, &mask)?;
    let meta = args.out.with_extension("json");
    env.save(&args.out, &meta)?;
    for (k, g) in env.frequencies.iter().zip(&env.gains) {
        println!("K={k}: gain {g:.4}");
    }
    println!("envelope written to {} (+ {})", args.out.display(), meta.display());
    Ok(())
}

fn load_envelope(path: &Path) -> anyhow::Result<MtfEnvelope> {
    MtfEnvelope::load(path, &path.with_extension("json"))
        .with_context(|| format!("loading envelope {}", path.display()))
}

struct RunProducts {
    field: PhasorField,
    mask: Array2<bool>,
    separation: pmp_multipath::separator::SeparationField,
    traditional_rows: Array2<f64>,
}

fn run_pipeline(
    stack: &ImageStack,
    env: &MtfEnvelope,
    params: SeparatorParams,
    shadow_threshold: f64,
    chain: &[u32],
    out: &Path,
) -> Result<RunProducts, CmdError> {
    let manifest = stack.manifest();
    let field = extract_field(stack)?;
    let mask = shadow_mask(&field, shadow_threshold);

    fs::create_dir_all(out.join("phasors")).map_err(|e| anyhow!(e))?;
    fs::create_dir_all(out.join("sweeps")).map_err(|e| anyhow!(e))?;
    for (ki, &k) in manifest.frequencies.iter().enumerate() {
        let a = field.a.index_axis(ndarray::Axis(0), ki).to_owned();
        let re = field.b_re.index_axis(ndarray::Axis(0), ki).to_owned();
        let im = field.b_im.index_axis(ndarray::Axis(0), ki).to_owned();
        save_pfm(&out.join(format!("phasors/phasor_K{k}_a.pfm")), &a)?;
        save_pfm(&out.join(format!("phasors/phasor_K{k}_bre.pfm")), &re)?;
        save_pfm(&out.join(format!("phasors/phasor_K{k}_bim.pfm")), &im)?;
    }

    let sweep = sweep_from_field(&field)?;
    let norm = normalize(&sweep, env, Some(&mask))?;
    save_pfm(&out.join("sweeps/ab0.pfm"), &sweep.ab0)?;
    for (ki, &k) in manifest.nonzero_frequencies().iter().enumerate() {
        let raw = sweep.magnitudes.index_axis(ndarray::Axis(0), ki).to_owned();
        let nrm = norm.magnitudes.index_axis(ndarray::Axis(0), ki).to_owned();
        save_pfm(&out.join(format!("sweeps/raw_K{k}.pfm")), &raw)?;
        save_pfm(&out.join(format!("sweeps/norm_K{k}.pfm")), &nrm)?;
    }

    let solver = Separator::new(params, manifest.nonzero_frequencies())?;
    let separation = solver.separate_field(&field, env, &mask)?;
    save_pfm(&out.join("primary_magnitude.pfm"), &separation.primary_magnitude_image())?;
    save_pfm(&out.join("secondary_magnitude.pfm"), &separation.secondary_magnitude_image())?;
    save_pfm(&out.join("primary_phase.pfm"), &separation.primary_phase_image())?;
    save_pfm(&out.join("secondary_phase.pfm"), &separation.secondary_phase_image())?;

    for &k in chain {
        if manifest.index_of(k).is_none() {
            return Err(usage(format!(
                "unwrap chain frequency K={k} is not in the scan (available: {:?})",
                manifest.frequencies
            )));
        }
    }
    let images: Vec<_> = chain
        .iter()
        .map(|&k| wrapped_phase_image(&field, k, Some(&mask)))
        .collect::<Result<_, _>>()?;
    let resolved = unwrap_chain(&images)?;
    let traditional_rows = resolved.to_rows()?;
    save_pfm(&out.join("traditional_phase.pfm"), &traditional_rows)?;

    let mask_img = mask.mapv(|m| if m { 1.0 } else { 0.0 });
    save_pfm(&out.join("mask.pfm"), &mask_img)?;

    Ok(RunProducts {
        field,
        mask,
        separation,
        traditional_rows,
    })
}

fn write_estimates_csv(
    separation: &pmp_multipath::separator::SeparationField,
    path: &Path,
) -> anyhow::Result<()> {
    let mut out = Vec::new();
    writeln!(
        out,
        "row,col,magA,magB,y_a,y_b,dy,residual1,residual2,is_multipath"
    )?;
    for (idx, est) in separation.estimates.iter().enumerate() {
        if let Some(e) = est {
            let (r, c) = (idx / separation.width, idx % separation.width);
            writeln!(
                out,
                "{r},{c},{:.6e},{:.6e},{:.6e},{:.6e},{:.6e},{:.6e},{:.6e},{}",
                e.mag_a, e.mag_b, e.y_a, e.y_b, e.dy, e.stage1_residual, e.stage2_residual,
                e.is_multipath
            )?;
        }
    }
    fs::write(path, out).with_context(|| format!("writing {}", path.display()))
}

pub fn run(args: RunArgs) -> CmdResult {
    let cfg = PipelineConfig::load_optional(args.config.as_deref())?;
    let stack = load_stack(&args.scan)?;
    let manifest = stack.manifest().clone();
    if !manifest.includes_zero_frequency {
        return Err(CmdError::Data(anyhow!(
            "scan has no zero-frequency data; the separator constraint needs it"
        )));
    }

    let env = match &args.envelope {
        Some(p) => load_envelope(p)?,
        None => {
            log::warn!("no envelope given; assuming ideal optics (identity gains)");
            MtfEnvelope::identity(&manifest.frequencies)
        }
    };

    let mut params = SeparatorParams::for_rows(manifest.geometry.rows);
    params.mag_step = pick(args.mag_step, cfg.mag_step, params.mag_step);
    params.row_step = pick(args.row_step, cfg.row_step, params.row_step);
    params.multipath_threshold = pick(
        args.multipath_threshold,
        cfg.multipath_threshold,
        params.multipath_threshold,
    );
    params.stage1_reject_threshold = pick(
        args.stage1_reject_threshold,
        cfg.stage1_reject_threshold,
        params.stage1_reject_threshold,
    );
    let shadow_threshold = pick(
        args.shadow_threshold,
        cfg.shadow_threshold,
        default_shadow_threshold(manifest.shifts),
    );
    let chain = pick(args.chain, cfg.chain, DEFAULT_CHAIN.to_vec());

    fs::create_dir_all(&args.out).map_err(|e| anyhow!(e))?;
    let products = run_pipeline(&stack, &env, params, shadow_threshold, &chain, &args.out)?;
    write_estimates_csv(&products.separation, &args.out.join("estimates.csv"))?;

    // Ground truth: explicit flag, else truth.json next to the scan.
    let truth_path = args
        .truth
        .clone()
        .or_else(|| {
            let p = args.scan.join("truth.json");
            p.exists().then_some(p)
        });
    let truth = truth_path
        .as_ref()
        .map(|p| SceneModel::load_json(p))
        .transpose()?;
    if let Some(t) = &truth {
        if t.rows != products.field.height() || t.cols != products.field.width() {
            return Err(CmdError::Data(anyhow!(
                "truth grid {}x{} does not match scan {}x{}",
                t.rows,
                t.cols,
                products.field.height(),
                products.field.width()
            )));
        }
    }

    let masked = products.mask.iter().filter(|&&m| m).count();
    let estimated = products.separation.estimates.iter().flatten().count();
    let multipath = products
        .separation
        .estimates
        .iter()
        .flatten()
        .filter(|e| e.is_multipath)
        .count();
    let (s1, s2) = residual_medians(&products.separation);
    let report = Report {
        scan: args.scan.display().to_string(),
        envelope: args.envelope.map(|p| p.display().to_string()),
        truth: truth_path.map(|p| p.display().to_string()),
        pixels_total: products.field.height() * products.field.width(),
        pixels_masked: masked,
        pixels_estimated: estimated,
        pixels_multipath: multipath,
        median_stage1_residual: s1,
        median_stage2_residual: s2,
        truth_metrics: truth.as_ref().map(|t| {
            truth_metrics(
                t,
                &products.separation,
                &products.traditional_rows,
                params.multipath_threshold,
            )
        }),
    };
    let json = serde_json::to_string_pretty(&report).map_err(|e| anyhow!(e))?;
    fs::write(args.out.join("report.json"), &json).map_err(|e| anyhow!(e))?;

    println!(
        "{} pixels: {} masked, {} estimated, {} multipath",
        report.pixels_total, report.pixels_masked, report.pixels_estimated, report.pixels_multipath
    );
    if let Some(tm) = &report.truth_metrics {
        println!(
            "mixed pixels ({}): separator row err median {:.2e} (dominant) / {:.2e} (nearest surface)",
            tm.mixed.count,
            tm.mixed.separator_dominant_row_error_median,
            tm.mixed.separator_nearest_row_error_median,
        );
        println!(
            "                   traditional row err median {:.2e} (dominant) / {:.2e} (nearest surface)",
            tm.mixed.traditional_dominant_row_error_median,
            tm.mixed.traditional_nearest_row_error_median,
        );
    }
    println!("report written to {}", args.out.join("report.json").display());
    Ok(())
}

pub fn export_sweep(args: ExportSweepArgs) -> CmdResult {
    let cfg = PipelineConfig::load_optional(args.config.as_deref())?;
    let _ = &cfg;
    let stack = load_stack(&args.scan)?;
    let field = extract_field(&stack)?;
    let sweep = sweep_from_field(&field)?;
    let sweep = if args.normalized {
        let env = match &args.envelope {
            Some(p) => load_envelope(p)?,
            None => MtfEnvelope::identity(&stack.manifest().frequencies),
        };
        let threshold = pick(
            args.shadow_threshold,
            cfg.shadow_threshold,
            default_shadow_threshold(stack.manifest().shifts),
        );
        let mask = shadow_mask(&field, threshold);
        normalize(&sweep, &env, Some(&mask))?
    } else {
        sweep
    };

    let mut pixels = Vec::new();
    for spec in &args.pixels {
        let (r, c) = spec
            .split_once(',')
            .and_then(|(r, c)| Some((r.trim().parse().ok()?, c.trim().parse().ok()?)))
            .ok_or_else(|| usage(format!("bad pixel spec '{spec}', expected row,col")))?;
        pixels.push((r, c));
    }
    export_sweep_csv_file(&sweep, &pixels, &args.out)?;
    println!(
        "wrote {} rows to {}",
        pixels.len() * stack.manifest().nonzero_frequencies().len(),
        args.out.display()
    );
    Ok(())
}

pub fn export_points(args: ExportPointsArgs) -> CmdResult {
    let cfg = PipelineConfig::load_optional(args.config.as_deref())?;
    let baseline = pick(args.baseline, cfg.baseline, DEFAULT_BASELINE);
    let pitch = pick(args.pitch, cfg.pitch, DEFAULT_PITCH);
    let csv_path = args.run_dir.join("estimates.csv");
    let text = fs::read_to_string(&csv_path)
        .with_context(|| format!("reading {} (run `run` first)", csv_path.display()))?;

    let mut out = Vec::new();
    writeln!(out, "# point export with declared synthetic geometry (non-metric)").map_err(anyhow::Error::from)?;
    writeln!(out, "# x = col*pitch, y = row*pitch, z = baseline*row_fraction").map_err(anyhow::Error::from)?;
    writeln!(out, "# pitch = {pitch}, baseline = {baseline}").map_err(anyhow::Error::from)?;
    let mut points = 0usize;
    for (i, line) in text.lines().enumerate() {
        if i == 0 {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 10 {
            return Err(CmdError::Data(anyhow!("malformed estimates row: {line}")));
        }
        let row: f64 = f[0].parse().map_err(anyhow::Error::from)?;
        let col: f64 = f[1].parse().map_err(anyhow::Error::from)?;
        let y_a: f64 = f[4].parse().map_err(anyhow::Error::from)?;
        let y_b: f64 = f[5].parse().map_err(anyhow::Error::from)?;
        let is_multipath = f[9] == "true";
        writeln!(out, "{:.4} {:.4} {:.4}", col * pitch, row * pitch, baseline * y_a)
            .map_err(anyhow::Error::from)?;
        points += 1;
        if is_multipath {
            writeln!(out, "{:.4} {:.4} {:.4}", col * pitch, row * pitch, baseline * y_b)
                .map_err(anyhow::Error::from)?;
            points += 1;
        }
    }
    fs::write(&args.out, out).map_err(anyhow::Error::from)?;
    println!("wrote {points} points to {}", args.out.display());
    Ok(())
}

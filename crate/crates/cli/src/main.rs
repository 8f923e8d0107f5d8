//! `wlrd`: low-rank inpainting, blind impulse removal and destriping for
//! 8-bit grayscale PGM/PNG images.
//!
//! Exit status: 0 on success, 1 on usage or input errors, 2 when a solver
//! did not converge (the best-effort output is still written).

mod report;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use report::Report;
use wlrd::image::{
    gen_mask, psnr, read_image, read_mask, ssim, write_image, write_mask, LineOrientation,
    MaskRecipe,
};
use wlrd::parallel::Workers;
use wlrd::{
    blind_inpaint, destripe, inpaint, ncwlrd_decompose, nnm_complete, ImageGrid, InpaintResult,
    MaskGrid, Mode, PartitionSpec, PartitionStrategy, PipelineConfig, SolverConfig,
};

const EXIT_USAGE: u8 = 1;
const EXIT_NOT_CONVERGED: u8 = 2;
/// SSIM needs at least one full 11x11 window.
const SSIM_MIN_SIDE: usize = 11;

#[derive(Parser)]
#[command(name = "wlrd", version, about = "Adaptive low-rank image inpainting")]
struct Cli {
    /// Print the report as a single JSON object.
    #[arg(long, global = true)]
    json: bool,

    /// Worker threads (default: machine parallelism).
    #[arg(long, global = true, value_parser = clap::value_parser!(u64).range(1..))]
    threads: Option<u64>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Whole-image matrix completion.
    Complete(CompleteArgs),
    /// Patch-group inpainting of known missing pixels.
    Inpaint(InpaintArgs),
    /// Impulse removal at unknown locations, optionally with a known mask.
    Blind(BlindArgs),
    /// Stripe removal by a single whole-image decomposition.
    Destripe(DestripeArgs),
    /// PSNR and SSIM of two images.
    Metrics { a: PathBuf, b: PathBuf },
    /// Write a synthetic mask (0 = missing, 255 = observed).
    Genmask(GenmaskArgs),
}

#[derive(Args, Clone)]
struct SolverArgs {
    /// Sparse-term weight (default depends on the mode).
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long, default_value_t = 0.1)]
    eta: f64,
    /// Penalty growth factor.
    #[arg(long, default_value_t = 1.2)]
    rho: f64,
    /// Initial penalty (default 1.25 / largest singular value).
    #[arg(long)]
    mu0: Option<f64>,
    /// Relative residual tolerance.
    #[arg(long, default_value_t = 1e-7)]
    tol: f64,
    #[arg(long, default_value_t = 500)]
    max_iter: usize,
}

impl SolverArgs {
    fn config(&self, lambda: f64) -> SolverConfig {
        SolverConfig {
            lambda,
            eta: self.eta,
            rho: self.rho,
            mu0: self.mu0,
            tol: self.tol,
            max_iter: self.max_iter,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum SolverKind {
    Ncwlrd,
    Nnm,
}

#[derive(Args)]
struct CompleteArgs {
    input: PathBuf,
    mask: PathBuf,
    output: PathBuf,
    #[arg(long, value_enum, default_value = "ncwlrd")]
    solver: SolverKind,
    #[command(flatten)]
    solve: SolverArgs,
    /// Ground truth for PSNR/SSIM reporting.
    #[arg(long)]
    reference: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Partition {
    Sectors,
    Grids,
    None,
}

impl From<Partition> for PartitionStrategy {
    fn from(p: Partition) -> Self {
        match p {
            Partition::Sectors => PartitionStrategy::Sectors,
            Partition::Grids => PartitionStrategy::Grids,
            Partition::None => PartitionStrategy::Exhaustive,
        }
    }
}

#[derive(Args, Clone)]
struct PatchArgs {
    #[arg(long, default_value_t = 8)]
    patch_side: usize,
    /// Search radius in pixels.
    #[arg(long, default_value_t = 90)]
    radius: usize,
    /// Number of subregions (matches per target).
    #[arg(long, default_value_t = 60)]
    regions: usize,
    #[arg(long, value_enum, default_value = "sectors")]
    partition: Partition,
    #[arg(long, default_value_t = 4)]
    stride: usize,
    #[arg(long, default_value_t = 10)]
    max_outer: usize,
    /// Relative image change that ends the outer loop.
    #[arg(long, default_value_t = 1e-3)]
    outer_tol: f64,
    #[command(flatten)]
    solve: SolverArgs,
    /// Ground truth; switches to the PSNR-based outer stop and adds metrics.
    #[arg(long)]
    reference: Option<PathBuf>,
}

#[derive(Args)]
struct InpaintArgs {
    input: PathBuf,
    mask: PathBuf,
    output: PathBuf,
    #[command(flatten)]
    patch: PatchArgs,
}

#[derive(Args)]
struct BlindArgs {
    input: PathBuf,
    output: PathBuf,
    /// Known missing pixels, if any.
    #[arg(long)]
    mask: Option<PathBuf>,
    #[command(flatten)]
    patch: PatchArgs,
}

#[derive(Args)]
struct DestripeArgs {
    input: PathBuf,
    output: PathBuf,
    /// Also write the stripe field, offset by 128.
    #[arg(long)]
    stripes: Option<PathBuf>,
    #[command(flatten)]
    solve: SolverArgs,
    #[arg(long)]
    reference: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum MaskKind {
    #[value(name = "random_pixels", alias = "random-pixels")]
    RandomPixels,
    #[value(name = "random_blocks", alias = "random-blocks")]
    RandomBlocks,
    Lines,
}

#[derive(Clone, Copy, ValueEnum)]
enum Orientation {
    Horizontal,
    Vertical,
}

#[derive(Args)]
struct GenmaskArgs {
    #[arg(long, value_enum)]
    kind: MaskKind,
    /// Missing fraction for random_pixels.
    #[arg(long)]
    rate: Option<f64>,
    /// Number of blocks or lines.
    #[arg(long)]
    count: Option<usize>,
    #[arg(long, value_enum)]
    orient: Option<Orientation>,
    #[arg(long)]
    seed: u64,
    /// HEIGHTxWIDTH, e.g. 64x64.
    #[arg(long, value_parser = parse_size)]
    size: (usize, usize),
    output: PathBuf,
}

fn parse_size(s: &str) -> std::result::Result<(usize, usize), String> {
    let (h, w) = s
        .split_once(['x', 'X'])
        .ok_or_else(|| format!("expected HEIGHTxWIDTH, got {s:?}"))?;
    let parse = |v: &str| {
        v.trim()
            .parse::<usize>()
            .ok()
            .filter(|&n| n > 0)
            .ok_or_else(|| format!("invalid dimension {v:?}"))
    };
    Ok((parse(h)?, parse(w)?))
}

struct Outcome {
    report: Report,
    converged: bool,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_USAGE)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let started = Instant::now();
    match dispatch(&cli) {
        Ok(mut out) => {
            out.report.float("seconds", started.elapsed().as_secs_f64());
            if cli.json {
                println!("{}", out.report.to_json());
            } else {
                print!("{}", out.report.to_lines());
            }
            if out.converged {
                ExitCode::SUCCESS
            } else {
                eprintln!("warning: solver did not converge; best-effort output written");
                ExitCode::from(EXIT_NOT_CONVERGED)
            }
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_USAGE)
        }
    }
}

fn dispatch(cli: &Cli) -> Result<Outcome> {
    let threads = cli.threads.map(|t| t as usize);
    match &cli.command {
        Command::Complete(a) => complete(a),
        Command::Inpaint(a) => {
            let image = load(&a.input)?;
            let mask = load_mask(&a.mask)?;
            run_patch(
                Mode::Inpaint,
                &a.input,
                &a.output,
                &image,
                Some((&a.mask, &mask)),
                &a.patch,
                threads,
            )
        }
        Command::Blind(a) => {
            let image = load(&a.input)?;
            let mask = a
                .mask
                .as_ref()
                .map(|p| load_mask(p).map(|m| (p, m)))
                .transpose()?;
            let mask_ref = mask.as_ref().map(|(p, m)| (p.as_path(), m));
            run_patch(
                Mode::Blind,
                &a.input,
                &a.output,
                &image,
                mask_ref,
                &a.patch,
                threads,
            )
        }
        Command::Destripe(a) => run_destripe(a),
        Command::Metrics { a, b } => metrics(a, b),
        Command::Genmask(a) => genmask(a),
    }
}

fn load(path: &Path) -> Result<ImageGrid> {
    read_image(path).with_context(|| format!("reading {}", path.display()))
}

fn load_mask(path: &Path) -> Result<MaskGrid> {
    read_mask(path).with_context(|| format!("reading mask {}", path.display()))
}

fn save(path: &Path, image: &ImageGrid) -> Result<()> {
    write_image(path, image).with_context(|| format!("writing {}", path.display()))
}

fn load_reference(path: Option<&PathBuf>, shape: (usize, usize)) -> Result<Option<ImageGrid>> {
    let Some(p) = path else { return Ok(None) };
    let r = load(p)?;
    if r.shape() != shape {
        bail!(
            "reference {} is {:?}, input is {:?}",
            p.display(),
            r.shape(),
            shape
        );
    }
    Ok(Some(r))
}

fn check_mask(mask: &MaskGrid, image: &ImageGrid) -> Result<()> {
    if mask.shape() != image.shape() {
        bail!(
            "mask is {}x{}, image is {}x{}",
            mask.height(),
            mask.width(),
            image.height(),
            image.width()
        );
    }
    Ok(())
}

fn echo_solver(r: &mut Report, cfg: &SolverConfig) {
    r.float("lambda", cfg.lambda)
        .float("eta", cfg.eta)
        .float("rho", cfg.rho);
    match cfg.mu0 {
        Some(m) => r.float("mu0", m),
        None => r.text("mu0", "auto"),
    };
    r.float("tol", cfg.tol).int("max_iter", cfg.max_iter);
}

fn quality(r: &mut Report, out: &ImageGrid, reference: Option<&ImageGrid>) -> Result<()> {
    if let Some(truth) = reference {
        r.float("psnr", psnr(out, truth)?);
        if out.height().min(out.width()) >= SSIM_MIN_SIDE {
            r.float("ssim", ssim(out, truth)?);
        }
    }
    Ok(())
}

fn complete(a: &CompleteArgs) -> Result<Outcome> {
    let image = load(&a.input)?;
    let mask = load_mask(&a.mask)?;
    check_mask(&mask, &image)?;
    let reference = load_reference(a.reference.as_ref(), image.shape())?;
    let cfg = a.solve.config(a.solve.lambda.unwrap_or(1.0));
    let y = mask.apply(&image)?.to_matrix();
    let (name, dec) = match a.solver {
        SolverKind::Ncwlrd => ("ncwlrd", ncwlrd_decompose(&y, &mask, &cfg)?),
        SolverKind::Nnm => ("nnm", nnm_complete(&y, &mask, cfg.lambda, &cfg)?),
    };
    let out = ImageGrid::from_matrix(&dec.low_rank)?;
    save(&a.output, &out)?;

    let mut r = Report::default();
    r.text("mode", "complete")
        .text("solver", name)
        .text("input", a.input.display().to_string())
        .text("mask", a.mask.display().to_string())
        .text("output", a.output.display().to_string());
    if let Some(p) = &a.reference {
        r.text("reference", p.display().to_string());
    }
    r.int("height", image.height())
        .int("width", image.width())
        .float("missing_fraction", mask.missing_fraction());
    echo_solver(&mut r, &cfg);
    if let Some(g) = dec.gamma {
        r.float("gamma", g.gamma).float("sigma1", g.sigma1);
    }
    r.int("iterations", dec.iterations)
        .float("relative_residual", dec.relative_residual())
        .flag("converged", dec.converged);
    quality(&mut r, &out, reference.as_ref())?;
    Ok(Outcome {
        report: r,
        converged: dec.converged,
    })
}

fn run_patch(
    mode: Mode,
    input: &Path,
    output: &Path,
    image: &ImageGrid,
    mask: Option<(&Path, &MaskGrid)>,
    a: &PatchArgs,
    threads: Option<usize>,
) -> Result<Outcome> {
    if let Some((_, m)) = mask {
        check_mask(m, image)?;
    }
    let reference = load_reference(a.reference.as_ref(), image.shape())?;
    let partition = PartitionSpec::new(a.partition.into(), a.regions, a.radius)?;
    let (h, w) = image.shape();
    let cfg = PipelineConfig {
        mode,
        patch_side: a.patch_side,
        stride: a.stride,
        partition,
        solver: a.solve.config(1.0),
        lambda: a.solve.lambda,
        outer_tol: a.outer_tol,
        max_outer: a.max_outer,
        threads,
    };
    let result: InpaintResult = match mode {
        Mode::Inpaint => {
            let (_, m) = mask.context("inpainting needs a mask")?;
            inpaint(image, m, &cfg, reference.as_ref())?
        }
        _ => blind_inpaint(image, mask.map(|(_, m)| m), &cfg, reference.as_ref())?,
    };
    save(output, &result.image)?;

    let mut r = Report::default();
    r.text("mode", mode.to_string())
        .text("input", input.display().to_string());
    if let Some((p, m)) = mask {
        r.text("mask", p.display().to_string())
            .float("missing_fraction", m.missing_fraction());
    }
    r.text("output", output.display().to_string());
    if let Some(p) = &a.reference {
        r.text("reference", p.display().to_string());
    }
    r.int("height", h)
        .int("width", w)
        .int("patch_side", cfg.patch_side)
        .int("stride", cfg.stride)
        .text("partition", cfg.partition.strategy().to_string())
        .int("regions", cfg.partition.regions())
        .int("radius", cfg.partition.radius())
        .float("outer_tol", cfg.outer_tol)
        .int("max_outer", cfg.max_outer)
        .text(
            "outer_stop",
            if reference.is_some() {
                "psnr"
            } else {
                "change"
            },
        )
        .int("threads", Workers::new(threads)?.count());
    echo_solver(&mut r, &cfg.effective_solver(h, w));
    r.int("outer_iterations", result.outer_iterations)
        .int("groups_per_iteration", result.groups_per_iteration)
        .floats("per_iteration_change", &result.per_iteration_change)
        .ints("unconverged_groups", &result.unconverged_groups);
    if reference.is_some() {
        r.floats("per_iteration_psnr", &result.per_iteration_psnr);
    }
    r.flag("converged", result.converged());
    quality(&mut r, &result.image, reference.as_ref())?;
    Ok(Outcome {
        report: r,
        converged: result.converged(),
    })
}

fn run_destripe(a: &DestripeArgs) -> Result<Outcome> {
    let image = load(&a.input)?;
    let reference = load_reference(a.reference.as_ref(), image.shape())?;
    let (h, w) = image.shape();
    let cfg = PipelineConfig {
        mode: Mode::Destripe,
        solver: a.solve.config(1.0),
        lambda: a.solve.lambda,
        ..PipelineConfig::default()
    };
    let out = destripe(&image, &cfg)?;
    save(&a.output, &out.clean)?;
    if let Some(p) = &a.stripes {
        let shown = ImageGrid::from_fn(h, w, |r, c| out.stripes.get(r, c) + 128.0);
        save(p, &shown)?;
    }

    let mut r = Report::default();
    r.text("mode", "destripe")
        .text("input", a.input.display().to_string())
        .text("output", a.output.display().to_string());
    if let Some(p) = &a.stripes {
        r.text("stripes", p.display().to_string());
    }
    if let Some(p) = &a.reference {
        r.text("reference", p.display().to_string());
    }
    r.int("height", h).int("width", w);
    echo_solver(&mut r, &cfg.effective_solver(h, w));
    r.int("iterations", out.iterations)
        .float("relative_residual", out.relative_residual)
        .flag("converged", out.converged);
    quality(&mut r, &out.clean, reference.as_ref())?;
    Ok(Outcome {
        report: r,
        converged: out.converged,
    })
}

fn metrics(a: &Path, b: &Path) -> Result<Outcome> {
    let x = load(a)?;
    let y = load(b)?;
    if x.shape() != y.shape() {
        bail!(
            "{} is {:?}, {} is {:?}",
            a.display(),
            x.shape(),
            b.display(),
            y.shape()
        );
    }
    let mut r = Report::default();
    r.text("mode", "metrics")
        .text("a", a.display().to_string())
        .text("b", b.display().to_string())
        .int("height", x.height())
        .int("width", x.width())
        .float("psnr", psnr(&x, &y)?);
    if x.height().min(x.width()) >= SSIM_MIN_SIDE {
        r.float("ssim", ssim(&x, &y)?);
    } else {
        r.text("ssim", "unavailable");
    }
    Ok(Outcome {
        report: r,
        converged: true,
    })
}

fn genmask(a: &GenmaskArgs) -> Result<Outcome> {
    let (h, w) = a.size;
    let recipe = match a.kind {
        MaskKind::RandomPixels => MaskRecipe::RandomPixels {
            rate: a.rate.context("random_pixels needs --rate")?,
            seed: a.seed,
        },
        MaskKind::RandomBlocks => MaskRecipe::RandomBlocks {
            count: a.count.context("random_blocks needs --count")?,
            seed: a.seed,
        },
        MaskKind::Lines => MaskRecipe::Lines {
            count: a.count.context("lines needs --count")?,
            orientation: match a.orient.context("lines needs --orient")? {
                Orientation::Horizontal => LineOrientation::Horizontal,
                Orientation::Vertical => LineOrientation::Vertical,
            },
            seed: a.seed,
        },
    };
    let mask = gen_mask(&recipe, h, w)?;
    write_mask(&a.output, &mask).with_context(|| format!("writing {}", a.output.display()))?;

    let mut r = Report::default();
    r.text("mode", "genmask")
        .text(
            "kind",
            a.kind
                .to_possible_value()
                .map_or("?".into(), |v| v.get_name().to_string()),
        )
        .int("height", h)
        .int("width", w)
        .int("seed", a.seed as usize);
    if let Some(rate) = a.rate {
        r.float("rate", rate);
    }
    if let Some(count) = a.count {
        r.int("count", count);
    }
    if let Some(o) = a.orient {
        r.text(
            "orient",
            if matches!(o, Orientation::Vertical) {
                "vertical"
            } else {
                "horizontal"
            },
        );
    }
    r.text("output", a.output.display().to_string())
        .int("missing", mask.missing_count());
    Ok(Outcome {
        report: r,
        converged: true,
    })
}

use std::fs;
use std::path::Path;

use serde::Serialize;
use spdmd_core::analysis::{mode_table, mode_table_csv, ModeReport};
use spdmd_core::dmd::{DecompositionSummary, DmdDecomposition, DmdOptions};
use spdmd_core::snapshot::{
    load_snapshots, velocity_magnitude, vorticity_magnitude, write_snpb, Grid, SnapshotFormat, SnapshotMatrix,
};
use spdmd_core::sparse::{gamma_kill, gamma_sweep, order_amplitudes, AdmmConfig, SparseSolution, SweepResult};
use spdmd_core::synthetic::{generate, FixtureSpec};
use spdmd_core::{Error, Result};

use crate::{AdmmArgs, InputArgs, Observable, Outcome, OutputFormat};

/// Effective parameters of one run, echoed into every report.
#[derive(Debug, Clone, Serialize)]
struct RunManifest {
    inputs: Vec<String>,
    observable: Observable,
    rank: String,
    mode_kind: spdmd_core::dmd::ModeKind,
    #[serde(skip_serializing_if = "Option::is_none")]
    admm: Option<AdmmConfig>,
}

impl RunManifest {
    fn new(args: &InputArgs, admm: Option<AdmmConfig>) -> Self {
        let inputs = [&args.input, &args.input_vy, &args.input_vz]
            .into_iter()
            .flatten()
            .map(|p| p.display().to_string())
            .collect();
        RunManifest {
            inputs,
            observable: args.observable,
            rank: match args.rank {
                spdmd_core::dmd::RankPolicy::Auto => "auto".into(),
                spdmd_core::dmd::RankPolicy::Fixed(r) => r.to_string(),
            },
            mode_kind: args.mode_kind.into(),
            admm,
        }
    }
}

fn load_any(path: &Path) -> Result<SnapshotMatrix> {
    let bytes = fs::read(path)?;
    let fmt = SnapshotFormat::sniff(&bytes)?;
    load_snapshots(path, fmt)
}

fn ingest(args: &InputArgs) -> Result<SnapshotMatrix> {
    match (&args.input, &args.input_vy, &args.input_vz, args.observable) {
        (Some(path), None, None, Observable::Raw) => load_any(path),
        (Some(_), _, _, obs) => Err(Error::Format(format!(
            "observable {obs:?} needs two velocity components (--input-vy/--input-vz)"
        ))),
        (None, Some(vy), Some(vz), obs) => {
            let vy = load_any(vy)?.to_series()?;
            let vz = load_any(vz)?.to_series()?;
            match obs {
                Observable::VelocityMagnitude => velocity_magnitude(&vy, &vz)?.to_snapshot_matrix("velocity_magnitude"),
                Observable::VorticityMagnitude => {
                    vorticity_magnitude(&vy, &vz)?.to_snapshot_matrix("vorticity_magnitude")
                }
                Observable::Raw => Err(Error::Format(
                    "two-component input needs --observable velocity_magnitude or vorticity_magnitude".into(),
                )),
            }
        }
        _ => Err(Error::Format("no input given (use --input or --input-vy/--input-vz)".into())),
    }
}

fn decompose_input(args: &InputArgs) -> Result<(SnapshotMatrix, DmdDecomposition)> {
    let snaps = ingest(args)?;
    let opts = DmdOptions {
        rank: args.rank,
        mode_kind: args.mode_kind.into(),
    };
    let dec = DmdDecomposition::compute(&snaps, opts)?;
    Ok((snaps, dec))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

fn write_table(out: &Path, stem: &str, rows: &[ModeReport], fmt: OutputFormat) -> Result<()> {
    match fmt {
        OutputFormat::Csv => fs::write(out.join(format!("{stem}.csv")), mode_table_csv(rows))?,
        OutputFormat::Json => write_json(&out.join(format!("{stem}.json")), &rows)?,
    }
    Ok(())
}

fn admm_config(a: &AdmmArgs) -> AdmmConfig {
    AdmmConfig {
        rho: a.rho,
        eps_primal: a.eps_primal,
        eps_dual: a.eps_dual,
        k_max: a.kmax,
    }
}

#[derive(Serialize)]
struct DecomposeReport<'a> {
    manifest: RunManifest,
    field: &'a str,
    grid: Grid,
    n_snapshots: usize,
    energy: f64,
    #[serde(flatten)]
    summary: DecompositionSummary,
}

pub fn decompose(args: &InputArgs) -> Result<Outcome> {
    let (snaps, dec) = decompose_input(args)?;
    fs::create_dir_all(&args.out)?;
    let report = DecomposeReport {
        manifest: RunManifest::new(args, None),
        field: snaps.field_name(),
        grid: dec.grid,
        n_snapshots: dec.n_snapshots(),
        energy: dec.qp.eta,
        summary: dec.summary(),
    };
    write_json(&args.out.join("decomposition.json"), &report)?;
    let (re, im) = dec.mode_parts();
    write_snpb(fs::File::create(args.out.join("modes_re.snpb"))?, &dec.grid, "mode_re", &re)?;
    write_snpb(fs::File::create(args.out.join("modes_im.snpb"))?, &dec.grid, "mode_im", &im)?;
    let order = order_amplitudes(&dec.amplitudes);
    let rows = mode_table(&dec.lambda, &dec.amplitudes, &order, dec.grid.h)?;
    write_table(&args.out, "modes", &rows, args.format)?;
    Ok(Outcome::Done)
}

#[derive(Serialize)]
struct SpdmdReport<'a> {
    manifest: RunManifest,
    field: &'a str,
    rank: usize,
    energy: f64,
    cardinality: usize,
    /// 1-based DMD indices ordered by descending polished amplitude.
    ordered_labels: Vec<usize>,
    polished_loss_percent: f64,
    solution: SparseSolution,
}

pub fn spdmd(args: &InputArgs, gamma: f64, admm: &AdmmArgs) -> Result<Outcome> {
    let cfg = admm_config(admm);
    cfg.validate()?;
    let (snaps, dec) = decompose_input(args)?;
    let sol = SparseSolution::solve(&dec.qp, gamma, &cfg)?;
    fs::create_dir_all(&args.out)?;
    let order = order_amplitudes(&sol.b_polished);
    let rows = mode_table(&dec.lambda, &sol.b_polished, &order, dec.grid.h)?;
    let report = SpdmdReport {
        manifest: RunManifest::new(args, Some(cfg)),
        field: snaps.field_name(),
        rank: dec.rank(),
        energy: dec.qp.eta,
        cardinality: sol.cardinality(),
        ordered_labels: order.iter().map(|j| j + 1).collect(),
        polished_loss_percent: sol.polished_loss_percent(dec.qp.eta)?,
        solution: sol.clone(),
    };
    write_json(&args.out.join("spdmd.json"), &report)?;
    write_table(&args.out, "spdmd_modes", &rows, args.format)?;
    Ok(if sol.converged { Outcome::Done } else { Outcome::NotConverged })
}

#[derive(Serialize)]
struct SweepReport {
    manifest: RunManifest,
    rank: usize,
    gamma_kill: f64,
    #[serde(flatten)]
    sweep: SweepResult,
}

fn thread_cap() -> Result<Option<usize>> {
    match std::env::var("SPDMD_THREADS") {
        Err(_) => Ok(None),
        Ok(s) => match s.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(Error::Format(format!("SPDMD_THREADS must be a positive integer, got '{s}'"))),
        },
    }
}

pub fn sweep(args: &InputArgs, lo: Option<f64>, hi: Option<f64>, n: usize, admm: &AdmmArgs) -> Result<Outcome> {
    let cfg = admm_config(admm);
    cfg.validate()?;
    let threads = thread_cap()?;
    let (_, dec) = decompose_input(args)?;
    let kill = gamma_kill(&dec.qp.d);
    let hi = hi.unwrap_or(kill);
    let lo = lo.unwrap_or(1e-6 * hi);
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(t) = threads {
        builder = builder.num_threads(t);
    }
    let pool = builder
        .build()
        .map_err(|e| Error::Numeric(format!("cannot start worker pool: {e}")))?;
    let result = pool.install(|| gamma_sweep(&dec.qp, lo, hi, n, &cfg))?;
    fs::create_dir_all(&args.out)?;
    match args.format {
        OutputFormat::Csv => fs::write(args.out.join("sweep.csv"), result.to_csv())?,
        OutputFormat::Json => write_json(
            &args.out.join("sweep.json"),
            &SweepReport {
                manifest: RunManifest::new(args, Some(cfg)),
                rank: dec.rank(),
                gamma_kill: kill,
                sweep: result.clone(),
            },
        )?,
    }
    if let Some(p) = result.points.iter().find(|p| p.error.is_some()) {
        return Err(Error::Numeric(format!(
            "sweep point gamma={} failed: {}",
            p.gamma,
            p.error.as_deref().unwrap_or_default()
        )));
    }
    Ok(if result.all_converged() { Outcome::Done } else { Outcome::NotConverged })
}

#[derive(Serialize)]
struct GroundTruthReport<'a> {
    steps: usize,
    fixture: &'a FixtureSpec,
}

pub fn synth(spec_path: &Path, steps: usize, seed: Option<u64>, out: &Path) -> Result<Outcome> {
    let text = fs::read_to_string(spec_path)?;
    let mut spec = FixtureSpec::from_json(&text)?;
    if let Some(s) = seed {
        spec.seed = s;
    }
    let gt = spec.ground_truth()?;
    let snaps = generate(&gt, steps)?;
    fs::create_dir_all(out)?;
    write_snpb(fs::File::create(out.join("fixture.snpb"))?, snaps.grid(), snaps.field_name(), snaps.data())?;
    write_json(&out.join("ground_truth.json"), &GroundTruthReport { steps, fixture: &spec })?;
    Ok(Outcome::Done)
}

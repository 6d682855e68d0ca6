use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use cobev_core::scenario::{criticality_histogram, generate_candidates, CriticalityReport, Scenario};
use cobev_harness::config::{ExperimentConfig, Source};
use cobev_harness::error::{HarnessError, Result};
use cobev_harness::eval::prepare;
use cobev_harness::experiment::{
    assess_all, augment_all, load_tracks, manifests, run_experiment, scenarios, seed_scenarios, thread_pool, to_json,
    render_scenario,
};
use cobev_harness::render::{histogram_png, write_file};
use serde::Serialize;

#[derive(Parser)]
#[command(name = "cobev", about = "Collaborative BEV planning experiments", version)]
struct Cli {
    /// Experiment config (JSON); built-in defaults when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Worker threads; all cores when omitted.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate synthetic seed traffic as a track CSV.
    Synth,
    /// Cut tracks into scenarios; writes manifests and candidate sets.
    Slice,
    /// Flag candidates that hit actors the ego never saw.
    Assess,
    /// Inject adversarial occluders and pedestrians.
    Augment,
    /// Run every configured policy and write metrics and logs.
    Evaluate,
    /// Render one scenario's observation, forecast and costmaps.
    Render {
        /// Scenario id.
        #[arg(long, default_value_t = 0)]
        scenario: usize,
    },
    /// Colliding-candidate histograms before and after augmentation.
    Histogram,
}

#[derive(Serialize)]
struct Assessment<'a> {
    scenario_id: usize,
    #[serde(flatten)]
    report: &'a CriticalityReport,
}

fn write_assessment(scns: &[Scenario], reports: &[CriticalityReport], path: &Path) -> Result<()> {
    let rows: Vec<Assessment> =
        scns.iter().zip(reports).map(|(s, report)| Assessment { scenario_id: s.id, report }).collect();
    write_file(path, &to_json(&rows)?)
}

fn write_histogram(reports: &[CriticalityReport], n: usize, stem: &Path) -> Result<()> {
    let h = criticality_histogram(reports, n);
    write_file(&stem.with_extension("csv"), h.to_csv().as_bytes())?;
    write_file(&stem.with_extension("png"), &histogram_png(&h)?)
}

fn run(cli: Cli) -> Result<()> {
    let mut cfg = match &cli.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    let out = cli.out.as_path();
    if let Command::Evaluate = cli.command {
        let outcome = run_experiment(&cfg, out, cli.jobs)?;
        eprintln!("evaluated {} scenarios, metrics in {}", outcome.scenarios, out.join("metrics.csv").display());
        return Ok(());
    }
    let pool = thread_pool(cli.jobs)?;
    pool.install(|| match cli.command {
        Command::Synth => {
            if let Source::Tracks(_) | Source::Suite(_) = cfg.source() {
                return Err(HarnessError::Config("synth needs a synth section, not tracks or suite".into()));
            }
            let (tracks, _) = load_tracks(&cfg)?;
            write_file(&out.join("tracks.csv"), tracks.to_csv_string()?.as_bytes())?;
            eprintln!("{} frames written", tracks.len());
            Ok(())
        }
        Command::Slice => {
            let (scns, source) = seed_scenarios(&cfg)?;
            write_file(&out.join("scenarios.json"), &to_json(&manifests(&scns, source.as_deref()))?)?;
            for s in &scns {
                let ego = s.ego_at_t0()?;
                let cands = generate_candidates(ego.speed, s.tracks.dt, s.horizon(), &cfg.candidate_config())?;
                let mut csv = Vec::new();
                cands.write_csv(&mut csv)?;
                write_file(&out.join("candidates").join(format!("scenario_{}.csv", s.id)), &csv)?;
            }
            eprintln!("{} scenarios", scns.len());
            Ok(())
        }
        Command::Assess => {
            let (scns, _) = seed_scenarios(&cfg)?;
            let reports = assess_all(&scns, &cfg)?;
            write_assessment(&scns, &reports, &out.join("criticality.json"))?;
            write_histogram(&reports, cfg.candidates.n, &out.join("histogram"))?;
            let critical = reports.iter().filter(|r| r.colliding_count > 0).count();
            eprintln!("{critical} of {} scenarios critical", scns.len());
            Ok(())
        }
        Command::Augment => {
            let (scns, source) = seed_scenarios(&cfg)?;
            let augmented = augment_all(&scns, &cfg)?;
            write_file(&out.join("augmented.json"), &to_json(&manifests(&augmented, source.as_deref()))?)?;
            for s in &augmented {
                write_file(&out.join("tracks").join(format!("scenario_{}.csv", s.id)), s.tracks.to_csv_string()?.as_bytes())?;
            }
            eprintln!("{} of {} scenarios augmented", augmented.len(), scns.len());
            Ok(())
        }
        Command::Render { scenario } => {
            let (scns, _) = scenarios(&cfg)?;
            let scn = scns
                .into_iter()
                .find(|s| s.id == scenario)
                .ok_or_else(|| HarnessError::Config(format!("no scenario with id {scenario}")))?;
            let p = prepare(scn, &cfg.eval_context()?, 0, false)?;
            render_scenario(&p, &cfg, &out.join("render"))
        }
        Command::Histogram => {
            let (seeds, _) = seed_scenarios(&cfg)?;
            let before = assess_all(&seeds, &cfg)?;
            write_histogram(&before, cfg.candidates.n, &out.join("histogram_seed"))?;
            if matches!(cfg.source(), Source::Suite(_)) {
                return Ok(());
            }
            // augmented scenarios replace their seeds, the rest are kept
            let mut mixed = seeds;
            for aug in augment_all(&mixed, &cfg)? {
                let i = mixed.iter().position(|s| s.id == aug.id).expect("augmentation keeps the id");
                mixed[i] = aug;
            }
            let after = assess_all(&mixed, &cfg)?;
            write_histogram(&after, cfg.candidates.n, &out.join("histogram_augmented"))?;
            let mass = |r: &[CriticalityReport]| r.iter().filter(|x| x.colliding_count > 0).count();
            eprintln!("mass above zero: {} seed, {} augmented", mass(&before), mass(&after));
            Ok(())
        }
        Command::Evaluate => unreachable!("handled above"),
    })
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

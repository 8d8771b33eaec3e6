use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use phystrack::harness::{
    builtin_scenarios, compare_traces, export_frames, resolve_scenario, run_scenario_observed, sweep_voxel_size,
    HarnessError, Metric, Scenario, Summary, SweepRow, Table, Trace,
};
use phystrack::hypotheses::StrategyKind;
use phystrack::sensor::{DepthSequenceWriter, GroundTruth, GroundTruthFrame};

#[derive(Parser)]
#[command(name = "phystrack", version, about = "Physics-based hand tracking on synthetic depth scenarios")]
struct Cli {
    /// Override the scenario's noise seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Where outputs go.
    #[arg(long, global = true, default_value = "out")]
    out_dir: PathBuf,
    /// Worker threads for running hypotheses (1 runs them inline).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Comma-separated strategies, e.g. normal,gross-motion.
    #[arg(long, global = true, value_delimiter = ',')]
    strategies: Option<Vec<StrategyKind>>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Track a scenario and write trace.json, summary.json and trace.csv.
    Run {
        /// Builtin name or scenario file.
        scenario: String,
        /// Also write the rendered depth sequence and ground truth.
        #[arg(long)]
        depth: bool,
        /// Exit with code 3 if fingertip RMS exceeds this many mm.
        #[arg(long)]
        max_fingertip_rms: Option<f64>,
    },
    /// Tabulate one metric across traces.
    Compare {
        #[arg(required = true)]
        traces: Vec<PathBuf>,
        #[arg(long, default_value = "fingertip-rms")]
        metric: Metric,
    },
    /// Run a scenario once per voxel size.
    Sweep {
        scenario: String,
        /// Voxel sizes in mm.
        #[arg(long, value_delimiter = ',', default_value = "5,7.5,10,12.5,15")]
        sizes: Vec<f64>,
    },
    /// Write overlay stills for every n-th frame of a trace.
    Export {
        trace: PathBuf,
        scenario: String,
        #[arg(long, default_value_t = 60)]
        every_n: usize,
    },
    /// Print the builtin scenarios.
    ListScenarios,
}

fn load_scenario(cli: &Cli, arg: &str) -> Result<Scenario, HarnessError> {
    let mut s = resolve_scenario(arg)?;
    if let Some(seed) = cli.seed {
        s = s.with_seed(seed);
    }
    if let Some(k) = &cli.strategies {
        s = s.with_strategies(k);
    }
    s.validate()?;
    Ok(s)
}

fn write(path: &Path, text: &str) -> Result<(), HarnessError> {
    std::fs::write(path, text).map_err(|e| HarnessError::io(path, e))
}

fn read_trace(path: &Path) -> Result<Trace, HarnessError> {
    let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
    Trace::from_json(&text)
}

fn trace_csv(trace: &Trace) -> Table {
    let mut header = vec!["frame", "time", "hand", "winner", "err_total_mm", "fingertip_rms_mm", "points", "constraints", "frame_ms"];
    let names: Vec<String> = trace.strategies.iter().map(|s| format!("{s}_mm")).collect();
    header.extend(names.iter().map(String::as_str));
    let mut table = Table::new(&header);
    for f in &trace.frames {
        for h in &f.hands {
            let tips = h.tip_errors();
            let rms = (tips.iter().map(|e| e * e).sum::<f64>() / tips.len().max(1) as f64).sqrt();
            let mut row = vec![
                f.frame.to_string(),
                format!("{:.6}", f.time),
                format!("{:?}", h.hand).to_lowercase(),
                h.winner.to_string(),
                h.best_total().map_or(String::new(), |v| format!("{:.4}", v * 1e3)),
                format!("{:.4}", rms * 1e3),
                h.points.to_string(),
                h.constraints.to_string(),
                format!("{:.3}", f.frame_time * 1e3),
            ];
            row.extend(trace.strategies.iter().map(|&s| h.total_of(s).map_or(String::new(), |v| format!("{:.4}", v * 1e3))));
            table.rows.push(row);
        }
    }
    table
}

fn print_summary(s: &Summary) {
    println!("{} seed {}: {} frames", s.scenario, s.seed, s.frames);
    println!("  fingertip rms     {:.3} mm", s.fingertip_rms_mm);
    println!("  joint error       mean {:.3} mm, p95 {:.3} mm", s.joint_error_mm.mean, s.joint_error_mm.p95);
    println!("  errTotal mean     {:.3} mm", s.err_total_mean_mm);
    println!("  constraints       {:.1} (points {:.1})", s.mean_constraints, s.mean_points);
    println!("  frame time        median {:.3} ms, p95 {:.3} ms", s.timing.frame_ms.median, s.timing.frame_ms.p95);
    let winners: Vec<String> = s.winners.iter().map(|(k, n)| format!("{k} {n}")).collect();
    println!("  winners           {}", winners.join(", "));
}

fn run(cli: &Cli, arg: &str, depth: bool, max_rms: Option<f64>) -> Result<(), HarnessError> {
    let scenario = load_scenario(cli, arg)?;
    let out = &cli.out_dir;
    std::fs::create_dir_all(out).map_err(|e| HarnessError::io(out, e))?;
    let models = scenario.models()?;
    let mut writer = None;
    let mut truth: Vec<GroundTruth> = Vec::new();
    if depth {
        let path = out.join("depth.seq");
        let file = File::create(&path).map_err(|e| HarnessError::io(&path, e))?;
        let w = DepthSequenceWriter::new(BufWriter::new(file), scenario.camera, scenario.frame_rate)
            .map_err(|e| HarnessError::io(&path, e))?;
        writer = Some((path, w));
        truth = models
            .iter()
            .map(|m| GroundTruth {
                schema: GroundTruth::SCHEMA.into(),
                model: m.name.clone(),
                bodies: m.bodies.iter().map(|b| b.name.clone()).collect(),
                frame_rate: scenario.frame_rate,
                frames: Vec::new(),
            })
            .collect();
    }
    let (trace, summary) = run_scenario_observed(&scenario, |frame, _| {
        if let Some((path, w)) = writer.as_mut() {
            w.write_frame(&frame.image).map_err(|e| HarnessError::io(path, e))?;
            for (gt, poses) in truth.iter_mut().zip(&frame.truth) {
                gt.frames.push(GroundTruthFrame { frame: frame.frame, poses: poses.iter().map(GroundTruth::encode_pose).collect() });
            }
        }
        Ok(())
    })?;
    if let Some((path, w)) = writer {
        w.finish().map_err(|e| HarnessError::io(&path, e))?;
        for (gt, script) in truth.iter().zip(&scenario.hands) {
            let name = format!("truth_{:?}.json", script.hand).to_lowercase();
            write(&out.join(name), &serde_json::to_string_pretty(gt).expect("truth serializes"))?;
        }
    }
    write(&out.join("trace.json"), &trace.to_json())?;
    write(&out.join("summary.json"), &serde_json::to_string_pretty(&summary).expect("summary serializes"))?;
    trace_csv(&trace).write_csv(&out.join("trace.csv"))?;
    print_summary(&summary);
    if let Some(limit) = max_rms {
        if !(summary.fingertip_rms_mm <= limit) {
            return Err(HarnessError::Threshold(format!(
                "fingertip rms {:.3} mm exceeds {limit} mm",
                summary.fingertip_rms_mm
            )));
        }
    }
    Ok(())
}

fn execute(cli: &Cli) -> Result<(), HarnessError> {
    match &cli.command {
        Command::Run { scenario, depth, max_fingertip_rms } => run(cli, scenario, *depth, *max_fingertip_rms),
        Command::Compare { traces, metric } => {
            let loaded = traces.iter().map(|p| read_trace(p)).collect::<Result<Vec<_>, _>>()?;
            let labelled: Vec<(String, &Trace)> = traces
                .iter()
                .zip(&loaded)
                .map(|(p, t)| (p.display().to_string(), t))
                .collect();
            let table = compare_traces(&labelled, *metric)?;
            print!("{}", table.to_text());
            std::fs::create_dir_all(&cli.out_dir).map_err(|e| HarnessError::io(&cli.out_dir, e))?;
            table.write_csv(&cli.out_dir.join("compare.csv"))
        }
        Command::Sweep { scenario, sizes } => {
            let scenario = load_scenario(cli, scenario)?;
            let meters: Vec<f64> = sizes.iter().map(|mm| mm * 1e-3).collect();
            let rows = sweep_voxel_size(&scenario, &meters)?;
            let table = SweepRow::table(&rows);
            print!("{}", table.to_text());
            std::fs::create_dir_all(&cli.out_dir).map_err(|e| HarnessError::io(&cli.out_dir, e))?;
            table.write_csv(&cli.out_dir.join("sweep.csv"))
        }
        Command::Export { trace, scenario, every_n } => {
            let trace = read_trace(trace)?;
            let mut scenario = load_scenario(cli, scenario)?;
            if cli.seed.is_none() {
                scenario = scenario.with_seed(trace.seed);
            }
            let files = export_frames(&trace, &scenario, *every_n, &cli.out_dir)?;
            println!("wrote {} frames to {}", files.len(), cli.out_dir.display());
            Ok(())
        }
        Command::ListScenarios => {
            let mut table = Table::new(&["name", "frames", "hands", "description"]);
            for s in builtin_scenarios() {
                table.rows.push(vec![s.name.clone(), s.frame_count().to_string(), s.hands.len().to_string(), s.description.clone()]);
            }
            print!("{}", table.to_text());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.threads {
        Some(0) => Err(HarnessError::Config("--threads must be at least 1".into())),
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => pool.install(|| execute(&cli)),
            Err(e) => Err(HarnessError::Config(format!("thread pool: {e}"))),
        },
        None => execute(&cli),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("phystrack: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

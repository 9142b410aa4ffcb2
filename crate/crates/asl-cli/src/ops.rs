//! Command implementations. Every artifact-writing command also writes a
//! manifest whose digest covers the parsed inputs (content, not paths), so
//! reruns of one configuration are byte-identical regardless of where the
//! files live or how many worker threads ran.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use asl_core::env::{
    enumerate_actions, equivalence_classes, gen_scenarios, load_scenario, observe_task,
    perturb, save_scenario, solve, Action, Family, PerturbationKind, PerturbationSpec,
    Scenario, Task,
};
use asl_core::evaluate::{compare_agents, eval_ssr, eval_tsr, perturb_suite, EvalMode};
use asl_core::policy::{load_policy, save_policy};
use asl_core::report::{read_table, summarize, summary_to_svg, table_to_csv_string, Table};
use asl_core::rngs::stream;
use asl_core::runlog::{config_digest, manifest_for, write_manifest, Cell, RunLog};
use asl_core::see::SeeContext;
use asl_core::train::{annotate_dataset, rl_train, train_supervised};

use crate::config::{PerturbFile, TrainConfig, TrainPlan};
use crate::CliError;

fn read_text(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text)
        .map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", path.display())))
}

fn ensure_dir(path: &Path) -> Result<(), CliError> {
    fs::create_dir_all(path)
        .map_err(|e| CliError::Runtime(format!("cannot create {}: {e}", path.display())))
}

/// Loads scenario files; a directory contributes every `.json` inside it in
/// file-name order.
fn load_suite(paths: &[PathBuf]) -> Result<Vec<Scenario>, CliError> {
    let mut suite = Vec::new();
    for path in paths {
        if path.is_dir() {
            let mut files: Vec<PathBuf> = fs::read_dir(path)
                .map_err(|e| CliError::Runtime(format!("cannot list {}: {e}", path.display())))?
                .filter_map(|entry| entry.ok().map(|e| e.path()))
                .filter(|p| p.extension().is_some_and(|ext| ext == "json"))
                .collect();
            files.sort();
            for file in files {
                suite.push(load_scenario(&file)?);
            }
        } else {
            suite.push(load_scenario(path)?);
        }
    }
    if suite.is_empty() {
        return Err(CliError::Config("no scenario files found".to_string()));
    }
    Ok(suite)
}

fn suite_name(paths: &[PathBuf], flag: Option<String>) -> String {
    flag.unwrap_or_else(|| {
        paths[0]
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "suite".to_string())
    })
}

fn find_task<'a>(scenario: &'a Scenario, task_id: &str) -> Result<&'a Task, CliError> {
    scenario
        .tasks
        .iter()
        .find(|t| t.id == task_id)
        .ok_or_else(|| CliError::Config(format!("task '{task_id}' does not exist")))
}

fn parse_kinds(perturb_file: Option<&Path>) -> Result<Option<Vec<PerturbationKind>>, CliError> {
    let Some(path) = perturb_file else { return Ok(None) };
    let text = read_text(path)?;
    let file: PerturbFile = serde_json::from_str(&text)
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    Ok(Some(file.parsed_kinds()?))
}

fn parse_mode(mode: &str) -> Result<bool, CliError> {
    match mode {
        "greedy" => Ok(true),
        "sampled" => Ok(false),
        other => Err(CliError::Config(format!("unknown mode '{other}'; use greedy or sampled"))),
    }
}

/// Content digests of the evaluated inputs, for eval/compare manifests.
#[derive(Serialize)]
struct EvalRecord {
    command: &'static str,
    suite: String,
    params: Vec<String>,
    scenarios: Vec<String>,
    kinds: Vec<String>,
    seeds: Vec<u64>,
    mode: String,
}

pub fn cmd_gen_scenario(family: &str, count: usize, seed: u64, out: &Path) -> Result<(), CliError> {
    let family: Family = family.parse().map_err(CliError::from)?;
    let scenarios = gen_scenarios(family, count, seed)?;
    ensure_dir(out)?;
    for scenario in &scenarios {
        let path = out.join(format!("{}.json", scenario.name));
        save_scenario(&path, scenario)?;
        println!("wrote {}", path.display());
    }
    Ok(())
}

pub fn cmd_perturb(scenario: &Path, kind: &str, seed: u64, out: &Path) -> Result<(), CliError> {
    let kind: PerturbationKind = kind.parse().map_err(CliError::from)?;
    let base = load_scenario(scenario)?;
    let (mutated, report) = perturb(&base, &PerturbationSpec { kind, seed })?;
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        ensure_dir(dir)?;
    }
    save_scenario(out, &mutated)?;
    for task in &report.tasks {
        println!(
            "task {}: changed steps {:?} of {}",
            task.task_id, task.changed_steps, task.solution_len
        );
    }
    println!("wrote {}", out.display());
    Ok(())
}

pub fn cmd_equiv(scenario: &Path, task_id: &str, step: usize) -> Result<(), CliError> {
    let scenario = load_scenario(scenario)?;
    let task = find_task(&scenario, task_id)?;
    let solution = solve(&scenario, task)?;
    if step >= solution.states.len() {
        return Err(CliError::Config(format!(
            "step {step} out of range; the annotated solution has {} states",
            solution.states.len()
        )));
    }
    let state = &solution.states[step];
    let history: Vec<String> = solution.actions[..step].iter().map(Action::canonical).collect();
    let obs = observe_task(&scenario, task, state, &history)?;
    let classes = equivalence_classes(&scenario, state, &obs)?;
    let canonical: Vec<Vec<String>> = classes
        .iter()
        .map(|class| class.iter().map(Action::canonical).collect())
        .collect();
    let doc = serde_json::json!({
        "scenario": scenario.name,
        "task": task.id,
        "step": step,
        "classes": classes,
        "canonical": canonical,
    });
    println!("{}", serde_json::to_string_pretty(&doc).expect("classes serialize"));
    Ok(())
}

pub fn cmd_train(config: &Path, out: Option<PathBuf>, threads: usize) -> Result<(), CliError> {
    let text = read_text(config)?;
    let cfg: TrainConfig = serde_json::from_str(&text)
        .map_err(|e| CliError::Config(format!("{}: {e}", config.display())))?;
    let out_dir = out.or_else(|| cfg.out_dir.clone()).ok_or_else(|| {
        CliError::Config("output directory required: pass --out or set out_dir".to_string())
    })?;
    let suite = load_suite(&cfg.scenarios)?;
    let see = SeeContext::new(
        cfg.world_model.clone().unwrap_or_default(),
        cfg.embedding.unwrap_or_default(),
    );
    let (params, log) = match cfg.plan()? {
        TrainPlan::Supervised(sc) => {
            let dataset = annotate_dataset(&suite)?;
            train_supervised(&suite, &dataset, &sc, &see)?
        }
        TrainPlan::Rl(mut rc) => {
            if let Some(init) = &cfg.init_params {
                rc.init = Some(load_policy(init)?);
            }
            rl_train(&suite, &rc, &see, threads)?
        }
    };
    ensure_dir(&out_dir)?;
    let csv_path = out_dir.join("train.csv");
    log.write_csv(&csv_path)
        .map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", csv_path.display())))?;
    let params_path = out_dir.join("params.json");
    save_policy(&params_path, &params)?;
    let manifest_path = out_dir.join("manifest.json");
    write_manifest(&manifest_path, &manifest_for(&cfg))
        .map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", manifest_path.display())))?;
    println!("wrote {}", csv_path.display());
    println!("wrote {}", params_path.display());
    println!("wrote {}", manifest_path.display());
    Ok(())
}

#[allow(clippy::too_many_arguments)]
pub fn cmd_eval(
    params_path: &Path,
    scenario_paths: &[PathBuf],
    perturb_file: Option<&Path>,
    seeds: u64,
    out: &Path,
    mode: &str,
    suite_flag: Option<String>,
    threads: usize,
) -> Result<(), CliError> {
    let greedy = parse_mode(mode)?;
    if seeds == 0 {
        return Err(CliError::Config("--seeds must be at least 1".to_string()));
    }
    let params = load_policy(params_path)?;
    let suite = load_suite(scenario_paths)?;
    let name = suite_name(scenario_paths, suite_flag);
    let kinds = parse_kinds(perturb_file)?;
    let seed_list: Vec<u64> = (0..seeds).collect();
    let eval_mode = |seed: u64| {
        if greedy {
            EvalMode::Greedy
        } else {
            EvalMode::Sampled { seed }
        }
    };

    let mut log = RunLog::new(&[
        "suite",
        "perturbation",
        "seed",
        "tsr",
        "ssr_exact",
        "ssr_class",
        "delta",
    ]);
    let mut push_row = |perturbation: &str,
                        seed: u64,
                        target: &[Scenario],
                        clean_tsr: f64|
     -> Result<(), CliError> {
        let tsr = eval_tsr(target, &params, eval_mode(seed), threads)?.tsr;
        let dataset = annotate_dataset(target)?;
        let ssr = eval_ssr(target, &dataset, &params, threads)?;
        log.push(vec![
            Cell::Text(name.clone()),
            Cell::Text(perturbation.to_string()),
            Cell::Int(seed as i64),
            Cell::Float(tsr),
            Cell::Float(ssr.exact),
            Cell::Float(ssr.class),
            Cell::Float(clean_tsr - tsr),
        ]);
        Ok(())
    };

    match &kinds {
        None => {
            for &seed in &seed_list {
                let clean = eval_tsr(&suite, &params, eval_mode(seed), threads)?.tsr;
                push_row("none", seed, &suite, clean)?;
            }
        }
        Some(kinds) => {
            for kind in kinds {
                for &seed in &seed_list {
                    let clean = eval_tsr(&suite, &params, eval_mode(seed), threads)?.tsr;
                    let perturbed = perturb_suite(&suite, *kind, seed)?;
                    push_row(kind.name(), seed, &perturbed, clean)?;
                }
            }
        }
    }

    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        ensure_dir(dir)?;
    }
    log.write_csv(out)
        .map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", out.display())))?;
    let record = EvalRecord {
        command: "eval",
        suite: name,
        params: vec![config_digest(&params)],
        scenarios: suite.iter().map(config_digest).collect(),
        kinds: kinds
            .map(|ks| ks.iter().map(|k| k.name().to_string()).collect())
            .unwrap_or_default(),
        seeds: seed_list,
        mode: mode.to_string(),
    };
    let manifest_path = out.with_extension("manifest.json");
    write_manifest(&manifest_path, &manifest_for(&record))
        .map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", manifest_path.display())))?;
    println!("wrote {}", out.display());
    println!("wrote {}", manifest_path.display());
    Ok(())
}

#[allow(clippy::too_many_arguments)]
pub fn cmd_compare(
    sft_path: &Path,
    asl_path: &Path,
    scenario_paths: &[PathBuf],
    perturb_file: Option<&Path>,
    seeds: u64,
    out: &Path,
    suite_flag: Option<String>,
    threads: usize,
) -> Result<(), CliError> {
    if seeds == 0 {
        return Err(CliError::Config("--seeds must be at least 1".to_string()));
    }
    let params_sft = load_policy(sft_path)?;
    let params_asl = load_policy(asl_path)?;
    let suite = load_suite(scenario_paths)?;
    let name = suite_name(scenario_paths, suite_flag);
    let kinds = parse_kinds(perturb_file)?.unwrap_or_else(|| PerturbationKind::ALL.to_vec());
    let seed_list: Vec<u64> = (0..seeds).collect();

    let report = compare_agents(
        &name,
        &suite,
        &params_sft,
        &params_asl,
        &kinds,
        &seed_list,
        EvalMode::Greedy,
        threads,
    )?;

    let mut rows = RunLog::new(&["suite", "perturbation", "seed", "tsr_sft", "tsr_asl", "difference"]);
    for row in &report.rows {
        rows.push(vec![
            Cell::Text(row.suite.clone()),
            Cell::Text(row.perturbation.clone()),
            Cell::Int(row.seed as i64),
            Cell::Float(row.tsr_sft),
            Cell::Float(row.tsr_asl),
            Cell::Float(row.difference),
        ]);
    }
    let mut summary =
        RunLog::new(&["suite", "perturbation", "n", "mean_sft", "mean_asl", "mean_difference"]);
    for row in &report.summary {
        summary.push(vec![
            Cell::Text(row.suite.clone()),
            Cell::Text(row.perturbation.clone()),
            Cell::Int(row.n as i64),
            Cell::Float(row.mean_sft),
            Cell::Float(row.mean_asl),
            Cell::Float(row.mean_difference),
        ]);
    }

    ensure_dir(out)?;
    let rows_path = out.join("compare.csv");
    rows.write_csv(&rows_path)
        .map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", rows_path.display())))?;
    let summary_path = out.join("compare_summary.csv");
    summary
        .write_csv(&summary_path)
        .map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", summary_path.display())))?;
    let record = EvalRecord {
        command: "compare",
        suite: name,
        params: vec![config_digest(&params_sft), config_digest(&params_asl)],
        scenarios: suite.iter().map(config_digest).collect(),
        kinds: kinds.iter().map(|k| k.name().to_string()).collect(),
        seeds: seed_list,
        mode: "greedy".to_string(),
    };
    let manifest_path = out.join("manifest.json");
    write_manifest(&manifest_path, &manifest_for(&record))
        .map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", manifest_path.display())))?;
    for row in &report.summary {
        println!(
            "{}: sft {:.3} asl {:.3} difference {:+.3}",
            row.perturbation, row.mean_sft, row.mean_asl, row.mean_difference
        );
    }
    println!("wrote {}", rows_path.display());
    println!("wrote {}", summary_path.display());
    println!("wrote {}", manifest_path.display());
    Ok(())
}

pub fn cmd_score(
    scenario: &Path,
    task_id: &str,
    step: usize,
    pred: &str,
    tau: f64,
    world_model: Option<&Path>,
) -> Result<(), CliError> {
    let scenario = load_scenario(scenario)?;
    let task = find_task(&scenario, task_id)?;
    let solution = solve(&scenario, task)?;
    if step >= solution.actions.len() {
        return Err(CliError::Config(format!(
            "step {step} out of range; the annotated solution has {} steps",
            solution.actions.len()
        )));
    }
    let pred: Action = serde_json::from_str(pred)
        .map_err(|e| CliError::Config(format!("action json: {e}")))?;
    let wm: asl_core::see::WorldModelSpec = match world_model {
        Some(path) => {
            let text = read_text(path)?;
            serde_json::from_str(&text)
                .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?
        }
        None => Default::default(),
    };
    let see = SeeContext::new(wm, Default::default());
    let state = &solution.states[step];
    let history: Vec<String> = solution.actions[..step].iter().map(Action::canonical).collect();
    let obs = observe_task(&scenario, task, state, &history)?;
    if !enumerate_actions(&obs).iter().any(|a| a.canonical() == pred.canonical()) {
        return Err(CliError::Config(format!(
            "action {} is not available at step {step}",
            pred.canonical()
        )));
    }
    let teacher = &solution.actions[step];
    let score = see.reward(&scenario, state, &obs, &pred, teacher, tau)?;
    let doc = serde_json::json!({
        "raw": score.raw,
        "thresholded": score.thresholded,
        "tau": score.tau,
        "reference": teacher.canonical(),
    });
    println!("{doc}");
    Ok(())
}

pub fn cmd_rollout(
    scenario: &Path,
    params_path: &Path,
    task_id: &str,
    seed: u64,
    greedy: bool,
    out: Option<&Path>,
) -> Result<(), CliError> {
    let scenario = load_scenario(scenario)?;
    let task = find_task(&scenario, task_id)?;
    let params = load_policy(params_path)?;
    let rollout = if greedy {
        asl_core::evaluate::run_policy(&scenario, task, &params, None)?
    } else {
        let mut rng = stream(seed, "rollout", 0);
        asl_core::evaluate::run_policy(&scenario, task, &params, Some(&mut rng))?
    };
    let canonical: Vec<String> = rollout.actions.iter().map(Action::canonical).collect();
    let doc = serde_json::json!({
        "scenario": scenario.name,
        "task": task.id,
        "seed": seed,
        "greedy": greedy,
        "success": rollout.success,
        "steps": rollout.actions.len(),
        "actions": rollout.actions,
        "canonical": canonical,
        "states": rollout.states,
    });
    let text = serde_json::to_string_pretty(&doc).expect("rollout serializes");
    match out {
        Some(path) => {
            write_text(path, &format!("{text}\n"))?;
            println!("wrote {}", path.display());
        }
        None => println!("{text}"),
    }
    Ok(())
}

pub fn cmd_report(inputs: &[PathBuf], out: &Path, svg: Option<&Path>) -> Result<(), CliError> {
    let tables: Vec<Table> =
        inputs.iter().map(|p| read_table(p)).collect::<Result<_, _>>().map_err(CliError::from)?;
    let summary = summarize(&tables)?;
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        ensure_dir(dir)?;
    }
    write_text(out, &table_to_csv_string(&summary))?;
    let record = serde_json::json!({
        "command": "report",
        "inputs": tables.iter().map(|t| config_digest(&(&t.columns, &t.rows))).collect::<Vec<_>>(),
    });
    let manifest_path = out.with_extension("manifest.json");
    write_manifest(&manifest_path, &manifest_for(&record))
        .map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", manifest_path.display())))?;
    println!("wrote {}", out.display());
    println!("wrote {}", manifest_path.display());
    if let Some(svg_path) = svg {
        let svg_text = summary_to_svg(&summary)?;
        write_text(svg_path, &svg_text)?;
        println!("wrote {}", svg_path.display());
    }
    Ok(())
}

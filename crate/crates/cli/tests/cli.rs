//! End-to-end tests driving the `react` binary.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn react() -> Command {
    Command::new(env!("CARGO_BIN_EXE_react"))
}

fn run_ok(cmd: &mut Command) -> Output {
    let out = cmd.output().expect("spawn react");
    assert!(
        out.status.success(),
        "command failed\nstdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn stdout_field(out: &Output, key: &str) -> String {
    let text = String::from_utf8_lossy(&out.stdout).into_owned();
    text.lines()
        .flat_map(|l| l.split_whitespace())
        .find_map(|tok| tok.strip_prefix(&format!("{key}=")).map(str::to_string))
        .unwrap_or_else(|| panic!("no `{key}=` in output:\n{text}"))
}

fn write_flat_grid(dir: &Path) -> PathBuf {
    let path = dir.join("flatgrid11.toml");
    fs::write(
        &path,
        "kind = \"grid\"\nwidth = 11\nheight = 11\ngoal = [9, 9]\ntraining_start = [1, 1]\n",
    )
    .unwrap();
    path
}

fn train_policy(dir: &Path, env_path: &Path, episodes: usize, seed: u64) -> PathBuf {
    let path = dir.join(format!("policy_{episodes}_{seed}.json"));
    run_ok(
        react()
            .arg("train")
            .arg("--env")
            .arg(env_path)
            .arg("--out")
            .arg(&path)
            .arg("--episodes")
            .arg(episodes.to_string())
            .arg("--seed")
            .arg(seed.to_string()),
    );
    path
}

#[allow(clippy::too_many_arguments)]
fn write_run_config(
    dir: &Path,
    env_path: &Path,
    policy_path: &Path,
    modes: &str,
    seeds: &str,
    out: &Path,
    generations: u32,
    population: usize,
) -> PathBuf {
    let path = dir.join("run.toml");
    fs::write(
        &path,
        format!(
            "env = {:?}\npolicy = {:?}\nmodes = [{modes}]\nseeds = [{seeds}]\nout = {:?}\n\n\
             [evolve]\npopulation_size = {population}\ngenerations = {generations}\n",
            env_path.display().to_string(),
            policy_path.display().to_string(),
            out.display().to_string(),
        ),
    )
    .unwrap();
    path
}

fn snapshot_tree(root: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut files = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in fs::read_dir(&dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                files.insert(
                    path.strip_prefix(root).unwrap().to_path_buf(),
                    fs::read(&path).unwrap(),
                );
            }
        }
    }
    files
}

#[test]
fn train_is_deterministic_and_reports_the_optimal_greedy_return() {
    let dir = tempfile::tempdir().unwrap();
    let env_path = write_flat_grid(dir.path());
    let a = train_policy(dir.path(), &env_path, 6000, 7);
    let b = dir.path().join("again.json");
    let out = run_ok(
        react()
            .arg("train")
            .arg("--env")
            .arg(&env_path)
            .arg("--out")
            .arg(&b)
            .arg("--episodes")
            .arg("6000")
            .arg("--seed")
            .arg("7"),
    );
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());

    // the fully trained greedy return equals the shortest-path return
    let greedy: f64 = stdout_field(&out, "greedy_return").parse().unwrap();
    let env = react_core::env::Env::Grid(react_core::env::GridSpec::flat11());
    let optimal = react_core::metrics::optimal_return(&env, &env.training_start());
    assert_eq!(greedy, optimal);
}

#[test]
fn zero_episode_training_still_writes_a_uniform_policy() {
    let dir = tempfile::tempdir().unwrap();
    let env_path = write_flat_grid(dir.path());
    let path = train_policy(dir.path(), &env_path, 0, 1);
    let policy = react_core::policy::TabularPolicy::load(&path).unwrap();
    assert_eq!(policy.states_seen(), 0);
}

#[test]
fn optimize_is_byte_identical_across_invocations() {
    let dir = tempfile::tempdir().unwrap();
    let env_path = write_flat_grid(dir.path());
    let policy = train_policy(dir.path(), &env_path, 300, 3);

    let out_a = dir.path().join("a");
    let out_b = dir.path().join("b");
    for out in [&out_a, &out_b] {
        let config = write_run_config(
            dir.path(),
            &env_path,
            &policy,
            "\"joint\", \"random\", \"training\"",
            "1, 2",
            out,
            4,
            6,
        );
        run_ok(react().arg("optimize").arg("--config").arg(&config));
    }
    let a = snapshot_tree(&out_a);
    let b = snapshot_tree(&out_b);
    assert_eq!(a.keys().collect::<Vec<_>>(), b.keys().collect::<Vec<_>>());
    for (path, bytes) in &a {
        assert_eq!(Some(bytes), b.get(path), "{path:?} differs between runs");
    }
    // expected layout: <mode>/seed_<n>/ with logs and artifacts
    assert!(out_a.join("joint/seed_1/run_log.jsonl").exists());
    assert!(out_a.join("random/seed_2/heatmap.pgm").exists());
    assert!(out_a.join("training/seed_1/summary.tsv").exists());
}

#[test]
fn optimize_training_mode_prints_zero_fidelity() {
    let dir = tempfile::tempdir().unwrap();
    let env_path = write_flat_grid(dir.path());
    let policy = train_policy(dir.path(), &env_path, 6000, 5);
    let out_dir = dir.path().join("out");
    let config = write_run_config(
        dir.path(),
        &env_path,
        &policy,
        "\"training\"",
        "1, 2, 3",
        &out_dir,
        2,
        4,
    );
    let out = run_ok(react().arg("optimize").arg("--config").arg(&config));
    let text = String::from_utf8_lossy(&out.stdout).into_owned();
    assert!(
        text.contains("mode=training fidelity_iqm=0.000"),
        "unexpected output:\n{text}"
    );
}

#[test]
fn optimize_rejects_unknown_modes_with_the_valid_list() {
    let dir = tempfile::tempdir().unwrap();
    let env_path = write_flat_grid(dir.path());
    let policy = train_policy(dir.path(), &env_path, 50, 5);
    let out_dir = dir.path().join("out");
    let config = write_run_config(
        dir.path(),
        &env_path,
        &policy,
        "\"joint\"",
        "1",
        &out_dir,
        1,
        4,
    );
    let out = react()
        .arg("optimize")
        .arg("--config")
        .arg(&config)
        .arg("--modes")
        .arg("galaxy")
        .output()
        .unwrap();
    assert!(!out.status.success());
    let stderr = String::from_utf8_lossy(&out.stderr).into_owned();
    assert!(stderr.contains("unknown mode `galaxy`"), "stderr: {stderr}");
    assert!(
        stderr.contains("joint"),
        "stderr should list valid modes: {stderr}"
    );
    assert!(
        stderr.lines().count() == 1,
        "error should be a single line: {stderr}"
    );
}

#[test]
fn encoding_study_reproduces_the_skew_ladder() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("study");
    let out = run_ok(
        react()
            .arg("encoding-study")
            .arg("--bits")
            .arg("4,5,6")
            .arg("--values")
            .arg("9")
            .arg("--dims")
            .arg("2")
            .arg("--out")
            .arg(&out_dir),
    );
    let text = String::from_utf8_lossy(&out.stdout).into_owned();
    assert!(text.contains("m=4 ratio=2.000 warn=yes"), "{text}");
    assert!(text.contains("m=5 ratio=1.333 warn=yes"), "{text}");
    assert!(text.contains("m=6 ratio=1.143 warn=no"), "{text}");
    assert!(out_dir.join("study.tsv").exists());
    // 2-dim discrete study exports per-m occupancy matrices
    for m in [4, 5, 6] {
        let matrix = fs::read_to_string(out_dir.join(format!("occupancy_m{m}.tsv"))).unwrap();
        assert_eq!(matrix.lines().count(), 10, "9 value rows plus header");
    }
}

#[test]
fn sweep_degenerates_to_optimize_for_a_single_point() {
    let dir = tempfile::tempdir().unwrap();
    let env_path = write_flat_grid(dir.path());
    let policy = train_policy(dir.path(), &env_path, 300, 3);

    let opt_out = dir.path().join("opt");
    let config = write_run_config(
        dir.path(),
        &env_path,
        &policy,
        "\"joint\"",
        "1, 2",
        &opt_out,
        3,
        5,
    );
    run_ok(react().arg("optimize").arg("--config").arg(&config));

    let sweep_out = dir.path().join("sweep");
    let sweep_config = dir.path().join("sweep.toml");
    fs::write(
        &sweep_config,
        format!(
            "out = {:?}\n\n[base]\nenv = {:?}\npolicy = {:?}\nmodes = [\"joint\"]\nseeds = [1, 2]\n\n\
             [base.evolve]\npopulation_size = 5\ngenerations = 3\n\n\
             [grid]\npopulation_size = [5]\n",
            sweep_out.display().to_string(),
            env_path.display().to_string(),
            policy.display().to_string(),
        ),
    )
    .unwrap();
    run_ok(react().arg("sweep").arg("--config").arg(&sweep_config));

    for seed in [1, 2] {
        let a = fs::read(opt_out.join(format!("joint/seed_{seed}/run_log.jsonl"))).unwrap();
        let b =
            fs::read(sweep_out.join(format!("point_0/joint/seed_{seed}/run_log.jsonl"))).unwrap();
        assert_eq!(
            a, b,
            "sweep point should reproduce the optimize run for seed {seed}"
        );
    }
    let summary = fs::read_to_string(sweep_out.join("sweep.tsv")).unwrap();
    assert_eq!(
        summary.lines().count(),
        2,
        "header plus one point row:\n{summary}"
    );
    let survival = fs::read_to_string(sweep_out.join("survival.tsv")).unwrap();
    assert_eq!(
        survival.lines().count(),
        1 + 3,
        "one row per generation:\n{survival}"
    );
}

#[test]
fn sweep_emits_survival_series_per_population_size() {
    let dir = tempfile::tempdir().unwrap();
    let env_path = write_flat_grid(dir.path());
    let policy = train_policy(dir.path(), &env_path, 300, 3);
    let sweep_out = dir.path().join("sweep");
    let sweep_config = dir.path().join("sweep.toml");
    fs::write(
        &sweep_config,
        format!(
            "out = {:?}\n\n[base]\nenv = {:?}\npolicy = {:?}\nmodes = [\"joint\"]\nseeds = [1]\n\n\
             [base.evolve]\ngenerations = 2\n\n[grid]\npopulation_size = [4, 6, 8]\n",
            sweep_out.display().to_string(),
            env_path.display().to_string(),
            policy.display().to_string(),
        ),
    )
    .unwrap();
    run_ok(react().arg("sweep").arg("--config").arg(&sweep_config));
    let survival = fs::read_to_string(sweep_out.join("survival.tsv")).unwrap();
    for point in 0..3 {
        let rows = survival
            .lines()
            .filter(|l| l.starts_with(&format!("{point}\t")))
            .count();
        assert_eq!(rows, 2, "two generations per point:\n{survival}");
    }
    let summary = fs::read_to_string(sweep_out.join("sweep.tsv")).unwrap();
    assert!(summary.contains("population_size=6"), "{summary}");
}

#[test]
fn sweep_rejects_grids_above_the_cap() {
    let dir = tempfile::tempdir().unwrap();
    let env_path = write_flat_grid(dir.path());
    let policy = train_policy(dir.path(), &env_path, 50, 3);
    let sweep_config = dir.path().join("sweep.toml");
    fs::write(
        &sweep_config,
        format!(
            "max_points = 2\n\n[base]\nenv = {:?}\npolicy = {:?}\nseeds = [1]\n\n\
             [grid]\npopulation_size = [4, 6, 8]\n",
            env_path.display().to_string(),
            policy.display().to_string(),
        ),
    )
    .unwrap();
    let out = react()
        .arg("sweep")
        .arg("--config")
        .arg(&sweep_config)
        .output()
        .unwrap();
    assert!(!out.status.success());
    let stderr = String::from_utf8_lossy(&out.stderr).into_owned();
    assert!(stderr.contains("max_points"), "stderr: {stderr}");
}

#[test]
fn report_regenerates_byte_identical_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let env_path = write_flat_grid(dir.path());
    let policy = train_policy(dir.path(), &env_path, 300, 3);
    let out_dir = dir.path().join("out");
    let config = write_run_config(
        dir.path(),
        &env_path,
        &policy,
        "\"joint\"",
        "4",
        &out_dir,
        3,
        5,
    );
    run_ok(react().arg("optimize").arg("--config").arg(&config));

    let run_dir = out_dir.join("joint/seed_4");
    let before = snapshot_tree(&run_dir);
    run_ok(react().arg("report").arg("--run-dir").arg(&run_dir));
    let after = snapshot_tree(&run_dir);
    assert_eq!(before, after);
}

#[test]
fn report_rejects_corrupt_and_versioned_logs() {
    let dir = tempfile::tempdir().unwrap();
    let run_dir = dir.path().join("run");
    fs::create_dir_all(&run_dir).unwrap();

    // missing log
    let out = react()
        .arg("report")
        .arg("--run-dir")
        .arg(&run_dir)
        .output()
        .unwrap();
    assert!(!out.status.success());

    // corrupt log reports the line
    fs::write(
        run_dir.join("run_log.jsonl"),
        "{\"record\":\"meta\", broken\n",
    )
    .unwrap();
    let out = react()
        .arg("report")
        .arg("--run-dir")
        .arg(&run_dir)
        .output()
        .unwrap();
    assert!(!out.status.success());
    let stderr = String::from_utf8_lossy(&out.stderr).into_owned();
    assert!(stderr.contains("line 1"), "stderr: {stderr}");

    // other schema versions are called out explicitly
    let env_path = write_flat_grid(dir.path());
    let policy = train_policy(dir.path(), &env_path, 50, 3);
    let out_dir = dir.path().join("out");
    let config = write_run_config(
        dir.path(),
        &env_path,
        &policy,
        "\"random\"",
        "1",
        &out_dir,
        1,
        4,
    );
    run_ok(react().arg("optimize").arg("--config").arg(&config));
    let log_path = out_dir.join("random/seed_1/run_log.jsonl");
    let bumped = fs::read_to_string(&log_path)
        .unwrap()
        .replace("\"schema_version\":1", "\"schema_version\":2");
    fs::write(&log_path, bumped).unwrap();
    let out = react()
        .arg("report")
        .arg("--run-dir")
        .arg(out_dir.join("random/seed_1"))
        .output()
        .unwrap();
    assert!(!out.status.success());
    let stderr = String::from_utf8_lossy(&out.stderr).into_owned();
    assert!(stderr.contains("schema version 2"), "stderr: {stderr}");
}

#[test]
fn out_root_env_var_provides_the_default_output_dir() {
    let dir = tempfile::tempdir().unwrap();
    let env_path = write_flat_grid(dir.path());
    let policy = train_policy(dir.path(), &env_path, 50, 3);
    let config = dir.path().join("run.toml");
    fs::write(
        &config,
        format!(
            "env = {:?}\npolicy = {:?}\nmodes = [\"random\"]\nseeds = [1]\n\n\
             [evolve]\npopulation_size = 4\ngenerations = 1\n",
            env_path.display().to_string(),
            policy.display().to_string(),
        ),
    )
    .unwrap();
    let root = dir.path().join("root");
    run_ok(
        react()
            .arg("optimize")
            .arg("--config")
            .arg(&config)
            .env("REACT_OUT_ROOT", &root),
    );
    assert!(root.join("random/seed_1/run_log.jsonl").exists());
}

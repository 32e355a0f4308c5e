use std::path::{Path, PathBuf};
use std::process::Command;

use surfloss_cli::{parse_config, Command as Cmd};

const COARSE: &str = "\n[mesh]\nh_max = 20um\ncorner_h_min = 20nm\ngrading_ratio = 1.5\nrefine_passes = 0\n";

fn fixture(name: &str) -> String {
    std::fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)).unwrap()
}

fn surfloss(args: &[&str], config: &str, out: &Path) -> std::process::Output {
    let dir = out.parent().unwrap();
    let path = dir.join(format!("{}.ini", out.file_name().unwrap().to_string_lossy()));
    std::fs::write(&path, config).unwrap();
    Command::new(env!("CARGO_BIN_EXE_surfloss"))
        .args(args)
        .arg("--config")
        .arg(&path)
        .arg("--out")
        .arg(out)
        .output()
        .unwrap()
}

fn read(dir: &Path, name: &str) -> String {
    std::fs::read_to_string(dir.join(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

fn value(summary: &str, quantity: &str) -> f64 {
    summary
        .lines()
        .find_map(|l| l.strip_prefix(&format!("{quantity},")))
        .and_then(|rest| rest.split(',').next())
        .unwrap_or_else(|| panic!("{quantity} missing from\n{summary}"))
        .parse()
        .unwrap()
}

#[test]
fn minimal_simulate_config_parses() {
    let cfg = parse_config(&fixture("simulate.ini")).unwrap();
    assert_eq!(cfg.command, Cmd::Simulate);
    assert_eq!(cfg.design.unwrap().name, "mod_c");
    assert!((cfg.trench.unwrap() - 300e-9).abs() < 1e-21);
}

#[test]
fn missing_unit_names_the_key() {
    let errs = parse_config("command = simulate\n[geometry]\ndesign = mod_c\ntrench = 300\n").unwrap_err();
    assert_eq!(errs.len(), 1);
    assert_eq!(errs[0].key.as_deref(), Some("trench"));
    assert_eq!(errs[0].line, Some(4));
    assert!(errs[0].to_string().contains("trench"));
}

#[test]
fn sweep_depths_are_sorted_in_metres() {
    let cfg = parse_config(&fixture("sweep.ini")).unwrap();
    let s = cfg.sweep.unwrap();
    let nm: Vec<f64> = s.depths.iter().map(|d| (d * 1e9).round()).collect();
    assert_eq!(nm, vec![300.0, 400.0, 600.0, 1000.0]);
    assert_eq!(s.target_depth, Some(50e-9));
}

#[test]
fn budget_runs_need_explicit_materials() {
    let text = fixture("budget_given.ini").replace("thickness_sa = 3nm\n", "").replace("tan_substrate = 0\n", "");
    let errs = parse_config(&text).unwrap_err();
    let keys: Vec<_> = errs.iter().filter_map(|e| e.key.as_deref()).collect();
    assert!(keys.contains(&"thickness_sa") && keys.contains(&"tan_substrate"), "{keys:?}");
}

#[test]
fn unknown_keys_and_sections_are_rejected() {
    let errs = parse_config("command = simulate\n[geometry]\ndesign = mod_c\ntrench = 3nm\nfoo = 1\n[extras]\nbar = 2\n").unwrap_err();
    assert_eq!(errs.iter().map(|e| e.line).collect::<Vec<_>>(), vec![Some(5), Some(6)]);
}

#[test]
fn budget_reports_substrate_bound() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("budget");
    let run = surfloss(&["budget"], &fixture("budget_given.ini"), &out);
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    let summary = read(&out, "budget_summary.csv");
    let bound = value(&summary, "tan_delta_substrate_bound");
    assert!((bound - 5.4e-7).abs() < 0.05e-7, "{bound}");
    let kappa = 2.0 * std::f64::consts::PI * 7e9 / 2e4;
    let purcell = 1.0 / ((50e6 / 2.2e9f64).powi(2) * kappa);
    assert!((value(&summary, "purcell_t1") - purcell).abs() < 1e-8 * purcell);
    let budget = read(&out, "budget.csv");
    assert!(budget.lines().last().unwrap().starts_with("total,"));
}

#[test]
fn compare_all_designs_gives_five_rows() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("compare");
    let run = surfloss(&["compare", "--jobs", "4"], &fixture("compare_all.ini"), &out);
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    let csv = read(&out, "comparison.csv");
    let rows: Vec<&str> = csv.lines().skip(1).collect();
    assert_eq!(rows.len(), 5);
    let names: Vec<&str> = rows.iter().map(|r| r.split(',').next().unwrap()).collect();
    assert_eq!(names, ["mod_a", "mod_b", "mod_c", "mod_d", "mod_e"]);
    assert_eq!(read(&out, "comparison_fits.csv").lines().count(), 1 + 15);
}

#[test]
fn invalid_config_exits_2_without_artifacts() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("bad");
    let run = surfloss(&["simulate"], "[geometry]\ndesign = mod_c\ntrench = 300\n", &out);
    assert_eq!(run.status.code(), Some(2));
    assert!(!out.exists());
    let stderr = String::from_utf8_lossy(&run.stderr);
    let json: serde_json::Value = serde_json::from_str(stderr.lines().last().unwrap()).unwrap();
    assert_eq!(json["error"], "invalid-config");
    assert_eq!(json["problems"][0]["key"], "trench");
    assert_eq!(json["problems"][0]["line"], 3);
}

#[test]
fn command_must_match_config() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("mismatch");
    let run = surfloss(&["sweep"], &fixture("simulate.ini"), &out);
    assert_eq!(run.status.code(), Some(2));
    assert!(!out.exists());
}

fn files(dir: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut out: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let p = e.unwrap().path();
            (PathBuf::from(p.file_name().unwrap()), std::fs::read(&p).unwrap())
        })
        .collect();
    out.sort();
    out
}

#[test]
fn identical_configs_give_identical_bytes() {
    let tmp = tempfile::tempdir().unwrap();
    let config = format!("{}{COARSE}[output]\nmesh_dump = true\nfield_dump = true\n", fixture("simulate.ini"));
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    assert!(surfloss(&["simulate"], &config, &a).status.success());
    assert!(surfloss(&["simulate", "--jobs", "1"], &config, &b).status.success());
    let (fa, fb) = (files(&a), files(&b));
    let names: Vec<_> = fa.iter().map(|f| f.0.to_string_lossy().into_owned()).collect();
    assert_eq!(names, ["field.txt", "manifest.txt", "mesh.txt", "participation.csv", "simulation.csv"]);
    assert_eq!(fa, fb);

    let manifest = read(&a, "manifest.txt");
    assert_eq!(manifest.lines().count(), 4);
    assert!(manifest.lines().all(|l| l.split("  ").next().unwrap().len() == 64));
}

#[test]
fn sweep_writes_fit_and_plot_data() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("sweep");
    let run = surfloss(&["sweep"], &fixture("sweep.ini"), &out);
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    let sweep = read(&out, "sweep.csv");
    let depths: Vec<&str> = sweep.lines().skip(1).map(|l| l.split(',').nth(1).unwrap()).collect();
    assert_eq!(depths, ["3.00000000e2", "4.00000000e2", "6.00000000e2", "1.00000000e3"]);
    assert_eq!(read(&out, "fit.csv").lines().count(), 4);
    assert_eq!(read(&out, "sweep_plot.txt").lines().count(), 5);
}

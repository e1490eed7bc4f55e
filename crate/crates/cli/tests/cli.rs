use std::path::Path;
use std::process::{Command, Output};

use csl_optomech::geometry::lambda_sphere;
use csl_optomech::model::GAMMA_ADLER;

fn cslopt(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cslopt"))
        .args(args)
        .env_remove("CSLOPT_PRESET_DIR")
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn read_csv(path: &Path) -> Vec<Vec<String>> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

fn column(rows: &[Vec<String>], i: usize) -> Vec<f64> {
    rows.iter().map(|r| r[i].parse().unwrap()).collect()
}

fn meta(csv: &Path) -> serde_json::Value {
    let mut p = csv.as_os_str().to_owned();
    p.push(".meta.json");
    serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap()
}

fn lambda_row(o: &Output) -> Vec<String> {
    let text = stdout(o);
    let mut lines = text.lines();
    assert_eq!(
        lines.next(),
        Some("method,mass_kg,lambda_per_m2_s,est_rel_error,Lambda_rad_per_s")
    );
    lines.next().unwrap().split(',').map(str::to_string).collect()
}

#[test]
fn lambda_sphere_prints_closed_form() {
    let o = cslopt(&["lambda", "--sphere", "R=1e-7", "m=15e-12", "--gamma", "adler"]);
    assert_eq!(code(&o), 0);
    let row = lambda_row(&o);
    assert_eq!(row[0], "closed_form_sphere");
    let expected = lambda_sphere(1e-7, 15e-12, GAMMA_ADLER, 1e-7).unwrap().lambda_rate;
    assert_eq!(row[2].parse::<f64>().unwrap(), expected);
    assert_eq!(row[4], "");
}

#[test]
fn lambda_gamma_zero_is_zero() {
    let o = cslopt(&["lambda", "--cube", "a=1e-6", "m=15e-12", "--gamma", "0", "--omega-m", "1.7e6"]);
    assert_eq!(code(&o), 0);
    let row = lambda_row(&o);
    assert_eq!(row[2].parse::<f64>().unwrap(), 0.0);
    assert_eq!(row[4].parse::<f64>().unwrap(), 0.0);
}

#[test]
fn lambda_reports_big_lambda_for_preset_cube() {
    let o = cslopt(&[
        "lambda", "--cube", "a=1e-6", "m=15e-12", "--omega-m", "1727875.9594743862",
    ]);
    assert_eq!(code(&o), 0);
    let big: f64 = lambda_row(&o)[4].parse().unwrap();
    assert!((big / 1.4743e5 - 1.0).abs() < 1e-3, "{big}");
}

#[test]
fn lambda_voxel_methods_agree() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("blob.vox");
    let mut text = String::from("voxelgrid 1\ndims 8 8 8\nspacing_m 2.5e-8\norigin_m 0 0 0\ndata\n");
    for ix in 0..8 {
        for iy in 0..8 {
            for iz in 0..8 {
                let inside = [ix, iy, iz].iter().all(|i| (2..6).contains(i));
                text.push_str(if inside { "2000 " } else { "0 " });
            }
        }
    }
    std::fs::write(&path, text).unwrap();
    let p = path.to_str().unwrap();
    let direct = cslopt(&["lambda", "--voxel", p]);
    let conv = cslopt(&["lambda", "--voxel", p, "--method", "convolution"]);
    assert_eq!((code(&direct), code(&conv)), (0, 0));
    let a: f64 = lambda_row(&direct)[2].parse().unwrap();
    let b: f64 = lambda_row(&conv)[2].parse().unwrap();
    assert!(a > 0.0 && ((a - b) / a).abs() < 1e-10);
}

#[test]
fn lambda_voxel_touching_boundary_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("edge.vox");
    let mut text = String::from("voxelgrid 1\ndims 6 6 6\nspacing_m 2.5e-8\norigin_m 0 0 0\ndata\n");
    for i in 0..216 {
        text.push_str(if i == 0 { "1000\n" } else { "0\n" });
    }
    std::fs::write(&path, text).unwrap();
    let o = cslopt(&["lambda", "--voxel", path.to_str().unwrap()]);
    assert_eq!(code(&o), 3);
    assert!(String::from_utf8_lossy(&o.stderr).contains("padding"));
}

#[test]
fn lambda_missing_key_exits_2() {
    assert_eq!(code(&cslopt(&["lambda", "--sphere", "R=1e-7"])), 2);
    assert_eq!(code(&cslopt(&["lambda", "--sphere", "R=1e-7", "m=1", "--gamma", "nope"])), 2);
}

#[test]
fn spectrum_pair_with_and_without_collapse() {
    let dir = tempfile::tempdir().unwrap();
    let on = dir.path().join("on.csv");
    let off = dir.path().join("off.csv");
    let grid = ["--omega-min", "1.5e6", "--omega-max", "2e6", "--n-points", "2001"];
    let mut a = vec!["spectrum", "--preset", "fig2a_15ng", "-o", on.to_str().unwrap()];
    a.extend(grid);
    assert_eq!(code(&cslopt(&a)), 0);
    let mut b = vec!["spectrum", "--preset", "fig2a_15ng", "--no-csl", "-o", off.to_str().unwrap()];
    b.extend(grid);
    assert_eq!(code(&cslopt(&b)), 0);

    let (ron, roff) = (read_csv(&on), read_csv(&off));
    assert_eq!(column(&ron, 0), column(&roff, 0));
    assert!(column(&ron, 1).iter().zip(column(&roff, 1)).all(|(x, y)| *x > y));

    let (mon, moff) = (meta(&on), meta(&off));
    assert_eq!(mon["base_fingerprint"], moff["base_fingerprint"]);
    assert_ne!(mon["params_fingerprint"], moff["params_fingerprint"]);
    assert_eq!(moff["Lambda_rad_per_s"], 0.0);
}

#[test]
fn spectrum_grid_through_zero_has_finite_first_row() {
    let o = cslopt(&[
        "spectrum", "--preset", "fig2a_15ng", "--omega-min", "0", "--omega-max", "1e6", "--n-points", "3",
    ]);
    assert_eq!(code(&o), 0);
    let text = stdout(&o);
    let first: Vec<&str> = text.lines().nth(1).unwrap().split(',').collect();
    assert_eq!(first[0].parse::<f64>().unwrap(), 0.0);
    let v: f64 = first[1].parse().unwrap();
    assert!(v.is_finite() && v > 0.0);
}

#[test]
fn spectrum_output_field_and_gnuplot() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("y.csv");
    let o = cslopt(&[
        "spectrum", "--preset", "fig2a_15ng", "--output-field", "--n-points", "11", "-o",
        out.to_str().unwrap(), "--gnuplot",
    ]);
    assert_eq!(code(&o), 0);
    assert!(column(&read_csv(&out), 1).iter().all(|v| *v >= 1.0));
    assert_eq!(meta(&out)["kind"], "output_quadrature");
    let script = std::fs::read_to_string(dir.path().join("y.csv.gp")).unwrap();
    assert!(script.contains("'y.csv' using 1:2"));
}

#[test]
fn unstable_parameters_exit_4_unless_forced() {
    let base = ["spectrum", "--preset", "fig2a_15ng", "--set", "cavity.detuning_over_kappa=-4", "--n-points", "3"];
    assert_eq!(code(&cslopt(&base)), 4);
    let mut forced = base.to_vec();
    forced.push("--force");
    assert_eq!(code(&cslopt(&forced)), 0);
    let sim = ["simulate", "--preset", "fig2a_15ng", "--set", "cavity.detuning_over_kappa=-4"];
    assert_eq!(code(&cslopt(&sim)), 4);
}

#[test]
fn area_ratio_fig2b_exceeds_one() {
    let o = cslopt(&["area-ratio", "--preset", "fig2b", "--mass", "15e-12"]);
    assert_eq!(code(&o), 0);
    let text = stdout(&o);
    let i: f64 = text.lines().nth(1).unwrap().split(',').next().unwrap().parse().unwrap();
    assert!(i > 1.0, "{i}");
    let off = cslopt(&["area-ratio", "--preset", "fig2b", "--no-csl"]);
    let i0: f64 = stdout(&off).lines().nth(1).unwrap().split(',').next().unwrap().parse().unwrap();
    assert_eq!(i0, 1.0);
}

#[test]
fn sweep_lambda_zero_gives_unit_ratio() {
    let o = cslopt(&["sweep", "--preset", "fig2a_15ng", "--param", "Lambda", "--values", "0"]);
    assert_eq!(code(&o), 0);
    let text = stdout(&o);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "param_value,Lambda_rad_per_s,area_ratio,peak_value,err");
    assert_eq!(lines.len(), 2);
    let row: Vec<&str> = lines[1].split(',').collect();
    assert_eq!(row[2].parse::<f64>().unwrap(), 1.0);
}

#[test]
fn sweep_empty_values_gives_empty_table() {
    let o = cslopt(&["sweep", "--preset", "fig2a_15ng", "--param", "mass", "--values", ""]);
    assert_eq!(code(&o), 0);
    assert_eq!(stdout(&o).lines().count(), 1);
}

#[test]
fn sweep_uses_preset_table_and_records_row_errors() {
    let o = cslopt(&["sweep", "--preset", "fig2b"]);
    assert_eq!(code(&o), 0);
    let text = stdout(&o);
    let rows: Vec<Vec<&str>> = text.lines().skip(1).map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 10);
    assert!(rows.iter().all(|r| r[2].parse::<f64>().unwrap() > 1.0));

    // a blue-detuned row is unstable; it is reported, not fatal
    let o = cslopt(&[
        "sweep", "--preset", "fig2a_15ng", "--param", "detuning_over_kappa", "--values", "4,-4",
    ]);
    assert_eq!(code(&o), 0);
    let text = stdout(&o);
    let rows: Vec<&str> = text.lines().skip(1).collect();
    assert!(rows[0].ends_with(','));
    assert!(rows[1].contains("unstable"));
}

#[test]
fn simulate_validates_against_analytic_spectrum() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("psd.csv");
    let o = cslopt(&[
        "simulate", "--preset", "fig2a_15ng", "--no-csl", "--validate", "--tol", "0.10", "-o",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let m = meta(&out);
    assert_eq!(m["validation"]["pass"], true);
    assert_eq!(m["sim_config"]["n_realizations"], 200);
}

#[test]
fn simulate_tolerance_failure_exits_5() {
    let o = cslopt(&[
        "simulate", "--preset", "fig2a_15ng", "--n-realizations", "2", "--validate", "--tol", "1e-3",
    ]);
    assert_eq!(code(&o), 5);
}

#[test]
fn simulate_is_deterministic_and_thread_independent() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str, extra: &[&str]| {
        let path = dir.path().join(name);
        let mut a = vec![
            "simulate", "--preset", "fig2a_15ng", "--n-realizations", "3", "--seed", "9",
            "--duration", "1e-4", "--trace", path.to_str().unwrap(), "--trace-realization", "2",
        ];
        a.extend(extra);
        assert_eq!(code(&cslopt(&a)), 0);
        std::fs::read_to_string(path).unwrap()
    };
    let a = run("a.csv", &[]);
    let b = run("b.csv", &["--threads", "1"]);
    let c = run("c.csv", &["--threads", "2"]);
    assert!(a.lines().count() > 100);
    assert_eq!(a, b);
    assert_eq!(a, c);
}

#[test]
fn config_file_and_preset_directory() {
    let dir = tempfile::tempdir().unwrap();
    let show = cslopt(&["presets", "show", "fig2a_15ng"]);
    assert_eq!(code(&show), 0);
    let text = stdout(&show);
    let file = dir.path().join("mine.toml");
    std::fs::write(&file, &text).unwrap();
    let from_file = cslopt(&["area-ratio", "--config", file.to_str().unwrap()]);
    let from_preset = cslopt(&["area-ratio", "--preset", "fig2a_15ng"]);
    assert_eq!(stdout(&from_file), stdout(&from_preset));

    // a preset directory shadows built-ins of the same name
    let edited = text.replace("power_w = 4e-3", "power_w = 0.0");
    assert_ne!(edited, text);
    std::fs::write(dir.path().join("fig2a_15ng.toml"), edited).unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_cslopt"))
        .args(["spectrum", "--preset", "fig2a_15ng", "--output-field", "--n-points", "5"])
        .env("CSLOPT_PRESET_DIR", dir.path())
        .output()
        .unwrap();
    assert_eq!(code(&o), 0);
    assert!(stdout(&o).lines().skip(1).all(|l| l.ends_with(",1e0")));

    assert_eq!(code(&cslopt(&["area-ratio", "--preset", "nope"])), 2);
    assert_eq!(code(&cslopt(&["area-ratio", "--preset", "fig2a_15ng", "--set", "mirror.colour=1"])), 2);
}

#[test]
fn help_documents_units() {
    let cases: [(&str, &[&str]); 5] = [
        ("lambda", &["m³/s", "rad/s", "kg", "r_C, m"]),
        ("spectrum", &["rad/s", "m²·s"]),
        ("area-ratio", &["kg", "dimensionless"]),
        ("sweep", &["kg", "rad/s", "m³/s", "K", "W"]),
        ("simulate", &["duration per realization, s", "step, s", "rad/s", "count", "dimensionless"]),
    ];
    for (cmd, units) in cases {
        let o = cslopt(&[cmd, "--help"]);
        assert_eq!(code(&o), 0);
        let text = stdout(&o);
        for u in units {
            assert!(text.contains(u), "`{cmd} --help` lacks `{u}`:\n{text}");
        }
    }
}

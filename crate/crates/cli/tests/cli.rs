use std::fs;
use std::path::Path;
use std::process::Command as Process;

use nhgeom::dynamics::{evolve, read_csv, GeneratorSchedule, IntegratorConfig};
use nhgeom::geodesic::GeodesicPlan;
use nhgeom::linalg::{cr, identity, pauli_x, pauli_z};
use nhgeom::state::{DensityOperator, NonHermitianGenerator};
use nhgeom_cli::{emit_csv, parse_config, resolve_output_dir, run, CliError, Command, ConfigError, ExperimentConfig};

const RHO: &str = r#"{"rows":2,"cols":2,"re":[0.6,0.0,0.0,0.4],"im":[0.0,0.0,0.0,0.0]}"#;

fn evolve_config(extra: &str) -> String {
    format!(r#"{{"command":"evolve","rho0":{RHO},"horizon":0.5,"dt":0.01{extra}}}"#)
}

fn field_of(err: ConfigError) -> &'static str {
    match err {
        ConfigError::Field { field, .. } => field,
        other => panic!("expected a field error, got {other}"),
    }
}

fn read_table(path: &Path) -> nhgeom::dynamics::CsvTable {
    read_csv(std::io::BufReader::new(fs::File::open(path).unwrap())).unwrap()
}

#[test]
fn minimal_config_round_trips() {
    let text = evolve_config("");
    let config = parse_config(text.as_bytes()).unwrap();
    let back = serde_json::to_value(&config).unwrap();
    assert_eq!(back, serde_json::from_str::<serde_json::Value>(&text).unwrap());
    assert_eq!(parse_config(serde_json::to_string(&config).unwrap().as_bytes()).unwrap(), config);
}

#[test]
fn rejects_bad_fields_by_name() {
    let err = parse_config(evolve_config("").replace("\"dt\":0.01", "\"dt\":-0.1").as_bytes()).unwrap_err();
    assert_eq!(field_of(err), "dt");
    let h = r#","h":{"rows":2,"cols":2,"re":[0.0,1.0,0.0,0.0],"im":[0.0,0.0,0.0,0.0]}"#;
    let err = parse_config(evolve_config(h).as_bytes()).unwrap_err();
    assert_eq!(field_of(err), "h");
    // within the Hermiticity tolerance is accepted
    let h = r#","h":{"rows":2,"cols":2,"re":[0.0,1.0,1.00000000001,0.0],"im":[0.0,0.0,0.0,0.0]}"#;
    parse_config(evolve_config(h).as_bytes()).unwrap();
    let err = parse_config(br#"{"command":"evolve","horizon":1}"#).unwrap_err();
    assert_eq!(field_of(err), "rho0");
    let err = parse_config(br#"{"command":"geodesic"}"#).unwrap_err();
    assert_eq!(field_of(err), "rho1");
    let g3 = r#","gamma":{"rows":3,"cols":3,"re":[1,0,0,0,1,0,0,0,1],"im":[0,0,0,0,0,0,0,0,0]}"#;
    assert_eq!(field_of(parse_config(evolve_config(g3).as_bytes()).unwrap_err()), "gamma");
}

#[test]
fn reports_syntax_position() {
    let err = parse_config(b"{\n  \"command\": \"evolve\",\n  \"extra\": 1\n}").unwrap_err();
    match err {
        ConfigError::Syntax { line, message, .. } => {
            assert_eq!(line, 3);
            assert!(message.contains("extra"));
        }
        other => panic!("unexpected {other}"),
    }
    assert!(matches!(parse_config(br#"{"command":"fly"}"#), Err(ConfigError::Syntax { .. })));
}

#[test]
fn zero_generator_keeps_unit_norm() {
    let dir = tempfile::tempdir().unwrap();
    let config = parse_config(evolve_config("").as_bytes()).unwrap();
    let report = run(&config, dir.path()).unwrap();
    let table = read_table(&report.files[0]);
    assert_eq!(table.rows.len(), 51);
    assert!(table.column("norm").unwrap().iter().all(|&n| n == 1.0));
}

#[test]
fn csv_has_header_and_round_trips_exactly() {
    let rho = DensityOperator::diagonal(&[0.7, 0.3]).unwrap();
    let gen = NonHermitianGenerator::new(pauli_x() * cr(0.3), pauli_z() * cr(0.2)).unwrap();
    let schedule = GeneratorSchedule::constant(gen, 0.0, 0.2).unwrap();
    let record = evolve(&rho, &schedule, &IntegratorConfig::with_step(0.1)).unwrap();
    assert_eq!(record.len(), 3);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("t.csv");
    emit_csv(&record, &path, true).unwrap();
    let text = fs::read_to_string(&path).unwrap();
    assert!(text.starts_with("# columns: t,norm,gamma,speed,re_0_0,im_0_0"));
    assert_eq!(text.lines().count(), 4);
    let table = read_table(&path);
    assert_eq!(table.column("norm").unwrap(), record.norms);
    assert_eq!(table.column("speed").unwrap(), record.speeds);
    assert_eq!(table.column("re_0_1").unwrap()[2], record.states[2].matrix()[(0, 1)].re);
}

#[test]
fn reproduce_qubit_outputs_grid() {
    let dir = tempfile::tempdir().unwrap();
    let config = ExperimentConfig::new(Command::ReproduceQubit);
    let report = run(&config, dir.path()).unwrap();
    let norms = read_table(&dir.path().join("qubit_norms.csv"));
    let rates = read_table(&dir.path().join("qubit_rates.csv"));
    assert_eq!(norms.columns, ["t", "norm_baseline", "norm_opt", "rel_diff"]);
    assert_eq!(rates.columns, ["t", "gamma", "gamma_opt", "rate", "rate_opt"]);
    let rho1 = DensityOperator::new((identity(2) + pauli_z() * cr(0.2)) * cr(0.5), 1e-10).unwrap();
    let rho2 = DensityOperator::new((identity(2) - pauli_x() * cr(0.5) - pauli_z() * cr(0.5)) * cr(0.5), 1e-10).unwrap();
    let theta = GeodesicPlan::from_states(&rho1, &rho2, 1.0).unwrap().theta();
    let dt = theta / 2000.0;
    assert_eq!(norms.rows.len(), (theta / dt).round() as usize + 1);
    assert_eq!(rates.rows.len(), norms.rows.len());
    let t = norms.column("t").unwrap();
    assert!((t.last().unwrap() - theta).abs() < 1e-12);
    assert!(report.lines.iter().any(|l| l.contains("relative difference")));
}

#[test]
fn reproduce_qutrit_reports_failure() {
    let dir = tempfile::tempdir().unwrap();
    let report = run(&ExperimentConfig::new(Command::ReproduceQutrit), dir.path()).unwrap();
    assert!(report.lines.iter().any(|l| l.contains("fails")));
    let json: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("qutrit.json")).unwrap()).unwrap();
    assert_eq!(json["verdict"], "fails");
}

#[test]
fn outputs_are_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let mut config = ExperimentConfig::new(Command::Decompose);
    config.rho0 = Some(serde_json::from_str(RHO).unwrap());
    config.seed = Some(11);
    run(&config, a.path()).unwrap();
    run(&config, b.path()).unwrap();
    let geo = parse_config(
        format!(r#"{{"command":"geodesic","rho1":{RHO},"rho2":{{"rows":2,"cols":2,"re":[0.3,0.1,0.1,0.7],"im":[0,0.05,-0.05,0]}}}}"#)
            .as_bytes(),
    )
    .unwrap();
    run(&geo, a.path()).unwrap();
    run(&geo, b.path()).unwrap();
    for name in ["decompose.json", "geodesic.csv", "geodesic_plan.json", "speedlimit.json"] {
        assert_eq!(fs::read(a.path().join(name)).unwrap(), fs::read(b.path().join(name)).unwrap(), "{name}");
    }
}

#[test]
fn numerical_failures_map_to_status_three() {
    let dir = tempfile::tempdir().unwrap();
    // equal states: no geodesic to plan
    let config = parse_config(format!(r#"{{"command":"geodesic","rho1":{RHO},"rho2":{RHO}}}"#).as_bytes()).unwrap();
    let err = run(&config, dir.path()).unwrap_err();
    assert!(matches!(err, CliError::Numerical { op: "geodesic_plan", .. }));
    assert_eq!(err.exit_code(), 3);
    // degenerate H₀ at t = 0
    let zero = r#"{"rows":2,"cols":2,"re":[0,0,0,0],"im":[0,0,0,0]}"#;
    let z = r#"{"rows":2,"cols":2,"re":[1,0,0,-1],"im":[0,0,0,0]}"#;
    let config = parse_config(format!(r#"{{"command":"sta","h0_offset":{zero},"h0_slope":{z}}}"#).as_bytes()).unwrap();
    let err = run(&config, dir.path()).unwrap_err();
    assert_eq!(err.exit_code(), 3);
}

#[test]
fn output_directory_precedence() {
    let mut config = ExperimentConfig::new(Command::ReproduceQutrit);
    assert_eq!(resolve_output_dir(&config, None, None), Path::new("."));
    config.output = Some("cfg".into());
    assert_eq!(resolve_output_dir(&config, None, None), Path::new("cfg"));
    assert_eq!(resolve_output_dir(&config, None, Some("env")), Path::new("env"));
    assert_eq!(resolve_output_dir(&config, Some(Path::new("flag")), Some("env")), Path::new("flag"));
}

#[test]
fn binary_exit_codes() {
    let exe = env!("CARGO_BIN_EXE_nhgeom");
    let dir = tempfile::tempdir().unwrap();
    let write = |name: &str, text: &str| {
        let p = dir.path().join(name);
        fs::write(&p, text).unwrap();
        p
    };
    let ok = write("ok.json", &evolve_config(""));
    let status = Process::new(exe)
        .arg(&ok)
        .env("NHGEOM_OUTPUT_DIR", dir.path().join("out"))
        .output()
        .unwrap();
    assert_eq!(status.status.code(), Some(0));
    assert!(dir.path().join("out/trajectory.csv").exists());

    let bad = write("bad.json", &evolve_config("").replace("0.01", "0"));
    let out = Process::new(exe).arg(&bad).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("dt"));

    let same = write("same.json", &format!(r#"{{"command":"geodesic","rho1":{RHO},"rho2":{RHO}}}"#));
    let out = Process::new(exe).arg(&same).arg("-o").arg(dir.path()).output().unwrap();
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("geodesic_plan"));
}

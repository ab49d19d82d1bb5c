mod common;

use std::fs;
use std::path::Path;

use distsom_core::io::{
    aggregate_samples, load_artifacts, load_table, write_table, TableFile, TableFormat, MAP_FILE,
    PROTOTYPES_FILE, REPORT_FILE, WEIGHTS_FILE,
};
use distsom_core::pipeline::{evaluate, export_svg, run_table};
use distsom_core::{Algorithm, Error, RunConfig, Scheme, Topology};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

fn schema(name: &str) -> jsonschema::Validator {
    let path = Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("schemas")
        .join(name);
    let schema: Value = serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap();
    jsonschema::validator_for(&schema).unwrap()
}

fn assert_valid(schema_name: &str, file: &Path) {
    let v = schema(schema_name);
    let instance: Value = serde_json::from_str(&fs::read_to_string(file).unwrap()).unwrap();
    let errors: Vec<String> = v.iter_errors(&instance).map(|e| e.to_string()).collect();
    assert!(
        errors.is_empty(),
        "{} violates {schema_name}: {errors:?}",
        file.display()
    );
}

fn small_config(algorithm: Algorithm, scheme: Option<Scheme>) -> RunConfig {
    RunConfig {
        algorithm,
        scheme,
        rows: Some(2),
        cols: Some(4),
        topology: Topology::Toroidal,
        n_iter: 10,
        restarts: 3,
        seed: 11,
        svg: true,
        ..RunConfig::default()
    }
}

#[test]
fn table_round_trip_is_bit_exact() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let t = common::random_table(&mut rng, 25, 3);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("t.json");
    write_table(&path, &t).unwrap();
    assert_valid("table.schema.json", &path);
    let back = load_table(&path, TableFormat::Json).unwrap();
    for i in 0..t.n_objects() {
        for j in 0..t.n_variables() {
            let (a, b) = (t.cell(i, j), back.cell(i, j));
            assert!(a
                .probs()
                .iter()
                .zip(b.probs())
                .all(|(x, y)| x.to_bits() == y.to_bits()));
            assert!(a
                .values()
                .iter()
                .zip(b.values())
                .all(|(x, y)| x.to_bits() == y.to_bits()));
        }
    }
    assert_eq!(t, back);
}

#[test]
fn jumps_survive_the_round_trip() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let cells: Vec<_> = (0..40)
        .map(|_| common::random_quantile_with_jumps(&mut rng, 7))
        .collect();
    let t = distsom_core::DistributionalTable::new(
        (0..40).map(|i| format!("o{i}")).collect(),
        vec!["x".into()],
        cells,
        None,
    )
    .unwrap();
    let text = serde_json::to_string(&TableFile::from_table(&t)).unwrap();
    let back = serde_json::from_str::<TableFile>(&text)
        .unwrap()
        .into_table()
        .unwrap();
    assert_eq!(t, back);
}

#[test]
fn invalid_cells_name_object_and_variable() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    fs::write(
        &path,
        r#"{"variables":["x","y"],"objects":[{"id":"a","cells":[{"breaks":[0,1],"weights":[1]},{"breaks":[0,1,2],"weights":[0.5,0.6]}]}]}"#,
    )
    .unwrap();
    match load_table(&path, TableFormat::Json).unwrap_err() {
        Error::InvariantViolation {
            object,
            variable,
            source,
        } => {
            assert_eq!(object, "a");
            assert_eq!(variable, "y");
            assert!(matches!(*source, Error::WeightsNotNormalized { .. }));
        }
        e => panic!("unexpected error {e:?}"),
    }
    fs::write(&path, "{\"variables\": [\"x\"],\n \"objects\": [}").unwrap();
    match load_table(&path, TableFormat::Json).unwrap_err() {
        Error::Parse { location, .. } => assert!(location.ends_with(":2:14"), "{location}"),
        e => panic!("unexpected error {e:?}"),
    }
}

#[test]
fn raw_samples_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("raw.csv");
    let mut s = String::from("subject,activity,label,variable,value\n");
    for k in 0..260 {
        s.push_str(&format!(
            "s1,walk,walking,acc,{}\n",
            (k * 37 % 101) as f64 / 10.0
        ));
        s.push_str(&format!("s1,walk,walking,gyro,{}\n", (k * 13 % 17) as f64));
    }
    fs::write(&path, s).unwrap();
    let agg = aggregate_samples(&path, 125, 10).unwrap();
    assert_eq!(agg.table.n_objects(), 2);
    assert_eq!(agg.table.variables(), ["acc", "gyro"]);
    assert_eq!(agg.table.labels().unwrap(), ["walking", "walking"]);
    assert_eq!(agg.dropped, vec![("s1/walk".to_string(), 10)]);
    // Equi-depth: every bin holds a tenth of the mass.
    let q = agg.table.cell(0, 0);
    assert_eq!(q.probs().len(), 11);
}

#[test]
fn artifacts_validate_and_reload() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let t = common::three_clusters(&mut rng, 30);
    for (alg, scheme) in [
        (Algorithm::Dbsom, None),
        (Algorithm::Adbsom, Some(Scheme::GlobalVariable)),
        (Algorithm::Adbsom, Some(Scheme::ClusterComponent)),
    ] {
        let dir = tempfile::tempdir().unwrap();
        let out = run_table(&small_config(alg, scheme), &t, dir.path()).unwrap();
        assert_valid("map.schema.json", &dir.path().join(MAP_FILE));
        assert_valid("prototypes.schema.json", &dir.path().join(PROTOTYPES_FILE));
        assert_valid("weights.schema.json", &dir.path().join(WEIGHTS_FILE));
        assert_valid("report.schema.json", &dir.path().join(REPORT_FILE));
        let art = load_artifacts(dir.path()).unwrap();
        assert_eq!(art.prototypes, out.map.prototypes);
        assert_eq!(art.weights, out.map.weights);
        assert_eq!(art.map.bmu, out.map.assignment.0);
        let map_text = fs::read_to_string(dir.path().join(MAP_FILE)).unwrap();
        assert!(!map_text.contains(&dir.path().display().to_string()));
        let names: Vec<String> = out
            .written
            .iter()
            .map(|p| p.file_name().unwrap().to_string_lossy().into_owned())
            .collect();
        assert!(names.contains(&"counts.svg".to_string()));
        match scheme {
            None => {
                let w: Value = serde_json::from_str(
                    &fs::read_to_string(dir.path().join(WEIGHTS_FILE)).unwrap(),
                )
                .unwrap();
                assert_eq!(w["scheme"], "none");
                assert!(w["rows"][0]
                    .as_array()
                    .unwrap()
                    .iter()
                    .all(|v| v.as_f64() == Some(1.0)));
            }
            Some(Scheme::ClusterComponent) => {
                assert!(names.contains(&"weights-x-mean.svg".to_string()));
                assert!(names.contains(&"weights-y-dispersion.svg".to_string()));
            }
            Some(_) => assert!(names.contains(&"weights-x.svg".to_string())),
        }
    }
}

#[test]
fn same_seed_gives_identical_files() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let t = common::three_clusters(&mut rng, 30);
    let cfg = small_config(Algorithm::Adbsom, Some(Scheme::ClusterVariable));
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    run_table(&cfg, &t, a.path()).unwrap();
    run_table(&cfg, &t, b.path()).unwrap();
    for f in [
        MAP_FILE,
        PROTOTYPES_FILE,
        WEIGHTS_FILE,
        REPORT_FILE,
        "counts.svg",
        "weights-x.svg",
    ] {
        assert_eq!(
            fs::read(a.path().join(f)).unwrap(),
            fs::read(b.path().join(f)).unwrap(),
            "{f}"
        );
    }
}

#[test]
fn evaluate_against_label_files() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let t = common::three_clusters(&mut rng, 30);
    let dir = tempfile::tempdir().unwrap();
    let out = run_table(&small_config(Algorithm::Dbsom, None), &t, dir.path()).unwrap();
    let labels = dir.path().join("labels.csv");

    // Labels equal to the BMU partition.
    let mut s = String::from("id,label\n");
    for (id, m) in t.objects().iter().zip(&out.map.assignment.0) {
        s.push_str(&format!("{id},n{m}\n"));
    }
    fs::write(&labels, &s).unwrap();
    let r = evaluate(dir.path(), &labels, None).unwrap();
    assert_eq!((r.ari, r.purity), (Some(1.0), Some(1.0)));
    assert!((r.nmi.unwrap() - 1.0).abs() < 1e-12);
    assert_eq!(r.topographic_error, out.report.topographic_error);

    // Relabelled classes leave ARI unchanged.
    let permuted = s.replace(",n", ",class-");
    fs::write(&labels, permuted).unwrap();
    assert_eq!(evaluate(dir.path(), &labels, None).unwrap().ari, Some(1.0));

    // Recomputing internal indexes from the table gives the stored values.
    let table_path = dir.path().join("table.json");
    write_table(&table_path, &t).unwrap();
    let again = evaluate(dir.path(), &labels, Some(&table_path)).unwrap();
    assert_eq!(again.silhouette, out.report.silhouette);

    s.push_str("ghost,n0\n");
    fs::write(&labels, &s).unwrap();
    assert!(
        matches!(evaluate(dir.path(), &labels, None), Err(Error::UnknownObjectId(id)) if id == "ghost")
    );
}

#[test]
fn svg_export_is_deterministic() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let t = common::three_clusters(&mut rng, 30);
    let dir = tempfile::tempdir().unwrap();
    run_table(
        &small_config(Algorithm::Adbsom, Some(Scheme::GlobalComponent)),
        &t,
        dir.path(),
    )
    .unwrap();
    let out = dir.path().join("svg");
    let files = export_svg(dir.path(), &out).unwrap();
    assert_eq!(files.len(), 1 + 4);
    for f in files {
        let name = f.file_name().unwrap();
        assert_eq!(
            fs::read(&f).unwrap(),
            fs::read(dir.path().join(name)).unwrap()
        );
    }
}

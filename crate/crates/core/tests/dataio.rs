use wgain_core::Error;
use wgain_core::dataio::{
    LabelColumn, Scaler, gen_ringnorm, gen_twonorm, load_csv, read_incomplete_csv, split_70_30, write_csv,
    write_matrix_csv,
};
use wgain_core::matrix::Matrix;

#[test]
fn csv_round_trip_is_exact() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("ring.csv");
    let ds = gen_ringnorm(40, 4, 8).unwrap();
    write_csv(&ds, &path).unwrap();
    let back = load_csv(&path, &LabelColumn::default()).unwrap();
    assert_eq!(back.features, ds.features);
    assert_eq!(back.labels, ds.labels);
    assert_eq!(back.feature_names, ds.feature_names);
    assert_eq!(back.class_names, ds.class_names);
    assert_eq!(back.name, "ring");
}

#[test]
fn label_column_by_index_and_text_classes() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("t.csv");
    std::fs::write(&path, "class,a,b\nyes,1,2\nno,3,4\nyes,5,6\n").unwrap();
    let ds = load_csv(&path, &LabelColumn::Index(0)).unwrap();
    assert_eq!(ds.class_names, ["no", "yes"]);
    assert_eq!(ds.labels, [1, 0, 1]);
    assert_eq!(ds.features, Matrix::from_rows(&[[1.0, 2.0], [3.0, 4.0], [5.0, 6.0]]).unwrap());
}

#[test]
fn empty_cell_reports_line_and_column() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.csv");
    std::fs::write(&path, "a,b,label\n1,2,0\n3,,1\n").unwrap();
    match load_csv(&path, &LabelColumn::default()) {
        Err(Error::Csv { line, column, .. }) => assert_eq!((line, column), (3, 2)),
        other => panic!("expected a CSV error, got {other:?}"),
    }
    std::fs::write(&path, "a,b,label\n1,x,0\n").unwrap();
    let msg = load_csv(&path, &LabelColumn::default()).unwrap_err().to_string();
    assert!(msg.contains("line 2, column 2"), "{msg}");
}

#[test]
fn incomplete_tables_mark_empty_cells() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("gaps.csv");
    std::fs::write(&path, "x,y\n1.5,\n,2\n3,4\n").unwrap();
    let t = read_incomplete_csv(&path).unwrap();
    assert_eq!(t.column_names, ["x", "y"]);
    assert_eq!(t.mask.missing_count(), 2);
    assert!(!t.mask.is_observed(0, 1) && !t.mask.is_observed(1, 0));
    assert_eq!(t.values.get(2, 1), 4.0);

    let out = dir.path().join("out.csv");
    let x = Matrix::from_rows(&[[0.1, 1.0 / 3.0], [-2e-300, 7.0]]).unwrap();
    write_matrix_csv(&out, &t.column_names, &x).unwrap();
    assert_eq!(read_incomplete_csv(&out).unwrap().values, x);
}

#[test]
fn stratified_split_keeps_class_balance() {
    let ds = gen_twonorm(1000, 5, 1).unwrap();
    let split = split_70_30(&ds, 4, true).unwrap();
    assert_eq!(split.train.n_rows(), 700);
    assert_eq!(split.test.n_rows(), 300);
    let ones = split.train.labels.iter().filter(|&&l| l == 1).count();
    assert_eq!(ones, 350);
    assert!(split.warnings.is_empty());
}

#[test]
fn scaler_round_trips_and_floors_constant_columns() {
    let x = Matrix::from_fn(30, 3, |r, c| if c == 2 { 5.0 } else { (r * (c + 1)) as f64 * 0.7 - 3.0 });
    let s = Scaler::fit(&x).unwrap();
    assert_eq!(s.warnings.len(), 1);
    let z = s.transform(&x).unwrap();
    for c in 0..2 {
        let col = z.column(c);
        let mean = col.iter().sum::<f64>() / 30.0;
        let var = col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / 30.0;
        assert!(mean.abs() < 1e-12 && (var - 1.0).abs() < 1e-12);
    }
    let back = s.inverse_transform(&z).unwrap();
    for (a, b) in back.as_slice().iter().zip(x.as_slice()) {
        assert!((a - b).abs() < 1e-12);
    }
}

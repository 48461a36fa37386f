use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

use ptree_core::render::{RenderConfig, EXPORT_SIZE};
use ptree_core::sweep::{
    export_dataset, run_sweep, Axis, ImageFormat, Manifest, SweepSpec, MANIFEST_FILE,
};

fn small(dir: &Path) -> SweepSpec {
    SweepSpec {
        e: vec![2.0, 3.0, 4.0],
        b: vec![1.0, 2.0],
        depth: 5,
        out_dir: dir.to_path_buf(),
        render: RenderConfig {
            width: 48,
            height: 48,
            ..RenderConfig::default()
        },
        ..SweepSpec::default()
    }
}

fn dir_files(dir: &Path) -> BTreeSet<String> {
    fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .filter(|n| n != MANIFEST_FILE)
        .collect()
}

#[test]
fn manifest_lists_exactly_what_was_written() {
    let tmp = tempfile::tempdir().unwrap();
    let spec = SweepSpec {
        formats: vec![ImageFormat::Png, ImageFormat::Svg],
        montage: true,
        repetitions: 2,
        ..small(tmp.path())
    };
    let m = run_sweep(&spec).unwrap();
    assert!(m.is_success());
    assert_eq!(m.entries.len(), 12);
    assert_eq!(m.files(), dir_files(tmp.path()));
    assert_eq!(m.files().len(), 12 * 2 + 1);
    assert_eq!(Manifest::load(&tmp.path().join(MANIFEST_FILE)).unwrap(), m);
}

#[test]
fn montage_rows_follow_e_and_columns_follow_b() {
    let tmp = tempfile::tempdir().unwrap();
    let spec = SweepSpec {
        montage: true,
        ..small(tmp.path())
    };
    let m = run_sweep(&spec).unwrap();
    assert_eq!(m.montages.len(), 1);
    let page = &m.montages[0];
    assert_eq!((page.rows, page.cols), (Axis::E, Axis::B));
    assert_eq!(page.row_values, spec.e);
    assert_eq!(page.col_values, spec.b);
    for (r, row) in page.grid.iter().enumerate() {
        for (c, &cell) in row.iter().enumerate() {
            let entry = m.entries.iter().find(|x| x.cell == cell).unwrap();
            assert_eq!((entry.e, entry.b), (spec.e[r], spec.b[c]));
        }
    }
    let img = image::open(tmp.path().join(&page.file)).unwrap();
    assert!(img.height() > img.width(), "3 rows by 2 columns");
}

#[test]
fn failed_cells_are_recorded_not_fatal() {
    let tmp = tempfile::tempdir().unwrap();
    let spec = SweepSpec {
        angle: vec![90.0, 200.0],
        ..small(tmp.path())
    };
    let m = run_sweep(&spec).unwrap();
    assert_eq!(m.failures, 6);
    assert!(!m.is_success());
    for e in &m.entries {
        assert_eq!(e.error.is_some(), e.angle == 200.0);
        assert_eq!(e.files.is_empty(), e.error.is_some());
    }
    assert_eq!(m.files(), dir_files(tmp.path()));
}

#[test]
fn export_writes_224_images_and_labels() {
    let tmp = tempfile::tempdir().unwrap();
    let spec = SweepSpec {
        v: vec![0.9, 1.1],
        base_seed: 17,
        ..small(tmp.path())
    };
    let m = export_dataset(&spec).unwrap();
    assert!(m.is_success());
    let labels = fs::read_to_string(tmp.path().join("labels.csv")).unwrap();
    let rows: Vec<&str> = labels.lines().collect();
    assert_eq!(rows[0], "file,e,b,angle,v,seed");
    assert_eq!(rows.len(), 1 + 12);
    for row in &rows[1..] {
        let cols: Vec<&str> = row.split(',').collect();
        assert_eq!(cols.len(), 6);
        let entry = m.entries.iter().find(|e| e.files == [cols[0]]).unwrap();
        assert_eq!(cols[1].parse::<f64>().unwrap(), entry.e);
        assert_eq!(cols[4].parse::<f64>().unwrap(), entry.v);
        assert_eq!(cols[5].parse::<u64>().unwrap(), entry.seed);
        let img = image::open(tmp.path().join(cols[0])).unwrap();
        assert_eq!((img.width(), img.height()), (EXPORT_SIZE, EXPORT_SIZE));
    }
    assert_eq!(m.files(), dir_files(tmp.path()));
}

#[test]
fn reruns_are_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for dir in [a.path(), b.path()] {
        let spec = SweepSpec {
            formats: vec![ImageFormat::Png, ImageFormat::Svg],
            montage: true,
            repetitions: 2,
            base_seed: 5,
            ..small(dir)
        };
        run_sweep(&spec).unwrap();
    }
    let files = dir_files(a.path());
    assert_eq!(files, dir_files(b.path()));
    for f in &files {
        assert_eq!(
            fs::read(a.path().join(f)).unwrap(),
            fs::read(b.path().join(f)).unwrap(),
            "{f}"
        );
    }
}

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use corruptbench_core::benchgen::{build_benchmark, BenchError};
use corruptbench_core::datamodel::{load_manifest, DatasetManifest, Modality, Split};
use corruptbench_core::synth::write_fixture_dataset;
use corruptbench_core::{BenchmarkLayout, BenchmarkOptions, CorruptionKind, Severity};

fn tree(root: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    fn walk(root: &Path, dir: &Path, out: &mut BTreeMap<PathBuf, Vec<u8>>) {
        for entry in fs::read_dir(dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                walk(root, &path, out);
            } else {
                out.insert(path.strip_prefix(root).unwrap().to_path_buf(), fs::read(&path).unwrap());
            }
        }
    }
    let mut out = BTreeMap::new();
    walk(root, root, &mut out);
    out
}

fn fixtures(dir: &Path, count: usize) -> Vec<DatasetManifest> {
    Modality::ALL
        .iter()
        .enumerate()
        .map(|(i, &m)| {
            let name = format!("ds{i}");
            write_fixture_dataset(&dir.join(&name), &name, m, 3, count, 16, 1 + 2 * (i % 2), i as u64).unwrap()
        })
        .collect()
}

fn build_with(workers: usize, manifests: &[DatasetManifest], out: &Path, seed: u64) -> BenchmarkLayout {
    let pool = rayon::ThreadPoolBuilder::new().num_threads(workers).build().unwrap();
    pool.install(|| build_benchmark(manifests, seed, out, &BenchmarkOptions::default()))
        .unwrap()
}

#[test]
fn full_grid_is_reproducible_across_runs_and_workers() {
    let tmp = tempfile::tempdir().unwrap();
    let manifests = fixtures(&tmp.path().join("src"), 6);

    let a = tmp.path().join("a");
    let layout = build_with(1, &manifests, &a, 11);
    assert_eq!(layout.entries.len(), 175);
    assert!(layout.failures.is_empty());

    for entry in &layout.entries {
        let set = load_manifest(a.join(&entry.manifest)).unwrap();
        let src = manifests.iter().find(|m| m.dataset_name == entry.dataset).unwrap();
        assert_eq!(set.items.len(), src.items.len());
        assert_eq!(entry.items, src.items.len());
        for (x, y) in set.items.iter().zip(&src.items) {
            assert_eq!((&x.id, x.label), (&y.id, y.label));
        }
        assert_eq!(set.split, Some(Split::Test));
        assert_eq!(set.corruption.unwrap().kind, entry.kind);
    }

    let b = tmp.path().join("b");
    build_with(1, &manifests, &b, 11);
    let c = tmp.path().join("c");
    build_with(8, &manifests, &c, 11);
    let ta = tree(&a);
    assert_eq!(ta.len(), 175 * 6 + 175 + 1);
    assert_eq!(ta, tree(&b));
    assert_eq!(ta, tree(&c));

    let d = tmp.path().join("d");
    build_with(2, &manifests, &d, 12);
    assert_ne!(ta, tree(&d));

    let reloaded = BenchmarkLayout::load(a.join("layout.json")).unwrap();
    let path = reloaded
        .get("ds0", CorruptionKind::Pixelate, Severity::new(4).unwrap())
        .unwrap();
    assert!(path.ends_with("ds0/pixelate/4/manifest.json"));
}

#[test]
fn keep_going_isolates_a_broken_dataset() {
    let tmp = tempfile::tempdir().unwrap();
    let mut manifests = fixtures(&tmp.path().join("src"), 2);
    fs::remove_file(manifests[1].resolve(&manifests[1].items[0])).unwrap();
    manifests.truncate(3);
    let options = BenchmarkOptions {
        kinds: vec![CorruptionKind::Contrast],
        severities: vec![Severity::new(1).unwrap()],
        keep_going: true,
        cache: None,
    };
    let out = tmp.path().join("out");
    match build_benchmark(&manifests, 0, &out, &options) {
        Err(BenchError::DatasetsFailed(failures)) => {
            assert_eq!(failures.len(), 1);
            assert_eq!(failures[0].dataset, "ds1");
        }
        other => panic!("unexpected {other:?}"),
    }
    let layout = BenchmarkLayout::load(out.join("layout.json")).unwrap();
    assert_eq!(layout.entries.len(), 2);

    let strict = BenchmarkOptions {
        keep_going: false,
        ..options
    };
    assert!(build_benchmark(&manifests, 0, &tmp.path().join("strict"), &strict).is_err());
}

#[test]
fn refuses_to_overwrite_sources() {
    let tmp = tempfile::tempdir().unwrap();
    let root = tmp.path();
    let manifests = fixtures(&root.join("src"), 1);
    let mut m = manifests[0].clone();
    // point the item at where the output for gaussian_noise/1 will land
    let target = root.join("out").join(&m.dataset_name).join("gaussian_noise").join("1");
    fs::create_dir_all(&target).unwrap();
    fs::copy(m.resolve(&m.items[0]), target.join(format!("{}.png", m.items[0].id))).unwrap();
    m.root = target.clone();
    m.items[0].path = format!("{}.png", m.items[0].id);
    let options = BenchmarkOptions {
        kinds: vec![CorruptionKind::GaussianNoise],
        severities: vec![Severity::new(1).unwrap()],
        ..Default::default()
    };
    assert!(matches!(
        build_benchmark(&[m], 0, &root.join("out"), &options),
        Err(BenchError::PathCollision(_))
    ));
}

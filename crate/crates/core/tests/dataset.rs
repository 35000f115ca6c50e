use scenemorph_core::dataset::{
    extract_frames, filter_frames, load_stream, normalize_frame, DatasetManifest, Domain, DomainTag, ManifestEntry, FRAME_HEIGHT, FRAME_WIDTH,
};
use scenemorph_core::raster::Image;

fn big_manifest(n: usize) -> DatasetManifest {
    let mut m = DatasetManifest::new("udacity-like", DomainTag::new(Domain::S1, "fine"), "/data/frames");
    for i in 0..n {
        let label = if i % 7 == 0 { None } else { Some((i as f64 * 0.37).sin() * 25.0) };
        m.entries.push(ManifestEntry::new(format!("center/{i:06}.jpg"), label));
    }
    m
}

#[test]
fn full_size_manifest_round_trips() {
    let m = big_manifest(5614);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("fine.tsv");
    m.write(&path).unwrap();
    let back = DatasetManifest::read(&path).unwrap();
    assert_eq!(back.entries, m.entries);
    assert_eq!(back.included_count(), 5614);
    assert_eq!(back.domain, m.domain);
    let ids = back.frame_ids();
    assert_eq!(ids.len(), 5614);
    assert_eq!(ids[5613], "005613");
}

#[test]
fn exclusions_mark_entries_without_dropping_them() {
    let m = big_manifest(5614);
    let excluded = ["000003", "000100", "004000", "005613", "000000"];
    let out = filter_frames(&m, &excluded);
    assert!(out.unknown_ids.is_empty());
    assert_eq!(out.manifest.entries.len(), 5614);
    assert_eq!(out.manifest.entries.iter().filter(|e| !e.include).count(), 5);
    assert_eq!(out.manifest.included_count(), 5609);
    let unknown = filter_frames(&m, &["nope"]);
    assert_eq!(unknown.unknown_ids, vec!["nope".to_string()]);
}

#[test]
fn directory_ingest_normalizes_and_loads() {
    let dir = tempfile::tempdir().unwrap();
    let raw = dir.path().join("raw");
    std::fs::create_dir(&raw).unwrap();
    for i in 0..12 {
        Image::filled(30, 60, 3, i as f32 / 12.0).save_png(&raw.join(format!("{i:03}.png"))).unwrap();
    }
    let frames = extract_frames(&raw, 4).unwrap();
    assert_eq!(frames.iter().map(|f| f.index).collect::<Vec<_>>(), vec![0, 4, 8]);

    let out = dir.path().join("prepared");
    std::fs::create_dir(&out).unwrap();
    let mut m = DatasetManifest::new("demo", DomainTag::new(Domain::S2, "night"), &out);
    for f in &frames {
        let img = normalize_frame(&f.image).unwrap();
        assert_eq!((img.height(), img.width()), (FRAME_HEIGHT, FRAME_WIDTH));
        let name = format!("frame_{:05}.png", f.index);
        img.save_png(&out.join(&name)).unwrap();
        m.entries.push(ManifestEntry::new(name, Some(f.index as f64)));
    }
    m.write(&out.join("manifest.tsv")).unwrap();

    let stream = load_stream(&DatasetManifest::read(&out.join("manifest.tsv")).unwrap()).unwrap();
    assert_eq!(stream.len(), 3);
    assert_eq!(stream[1].frame_id, "frame_00004");
    assert_eq!(stream[1].steering_label, Some(4.0));
    assert!(stream.iter().all(|r| r.source_path.as_ref().is_some_and(|p| p.is_absolute())));
}

#[test]
fn missing_frame_is_named() {
    let dir = tempfile::tempdir().unwrap();
    let mut m = DatasetManifest::new("demo", DomainTag::new(Domain::S1, "fine"), dir.path());
    m.entries.push(ManifestEntry::new("ghost.png", None));
    let err = load_stream(&m).unwrap_err().to_string();
    assert!(err.contains("ghost"), "{err}");
}

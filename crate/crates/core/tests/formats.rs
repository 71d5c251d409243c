//! On-disk round trips for every file format the crate reads or writes.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use smartaug::data::{gen_synthetic, idx, load_idx, load_image_dir, pnm, read_image, write_image_dir, Dataset, Sample, SyntheticSpec};
use smartaug::engine::{checkpoint, Tensor};
use smartaug::trainer::{metrics_csv, parse_metrics_csv, MetricsRecord};

fn byte_image(rng: &mut ChaCha8Rng, shape: [usize; 3]) -> (Vec<u8>, Tensor) {
    let bytes: Vec<u8> = (0..shape.iter().product::<usize>()).map(|_| rng.gen()).collect();
    let t = Tensor::new(shape.to_vec(), bytes.iter().map(|&b| b as f64 / 255.0).collect()).unwrap();
    (bytes, t)
}

#[test]
fn idx_files_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let pixels: Vec<u8> = (0..6 * 5 * 4).map(|_| rng.gen()).collect();
    let labels = [3u8, 7, 3, 9, 7, 3];
    let (ip, lp) = (dir.path().join("img.idx3"), dir.path().join("lbl.idx1"));
    std::fs::write(&ip, idx::encode_images(5, 4, &pixels)).unwrap();
    std::fs::write(&lp, idx::encode_labels(&labels)).unwrap();
    let ds = load_idx(&ip, &lp).unwrap();
    assert_eq!(ds.len(), 6);
    assert_eq!(ds.class_names(), ["3", "7", "9"]);
    assert_eq!(ds.labels(), [0, 1, 0, 2, 1, 0]);
    let back: Vec<u8> = ds
        .samples()
        .iter()
        .flat_map(|s| s.image.data().iter().map(|&v| pnm::quantize(v)))
        .collect();
    assert_eq!(back, pixels);
}

#[test]
fn pgm_and_ppm_files_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for (c, name) in [(1, "a.pgm"), (3, "b.ppm")] {
        let (_, t) = byte_image(&mut rng, [c, 7, 5]);
        let path = dir.path().join(name);
        pnm::write(&path, &t).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        assert_eq!(&bytes[..2], if c == 1 { b"P5" } else { b"P6" });
        let back = pnm::read(&path).unwrap();
        assert_eq!(back, t);
        assert_eq!(pnm::encode(&back).unwrap(), bytes);
    }
}

#[test]
fn quantization_clips_out_of_range_values() {
    let t = Tensor::new(vec![1, 1, 4], vec![-0.5, 0.0, 0.5, 1.7]).unwrap();
    let bytes = pnm::encode(&t).unwrap();
    assert_eq!(&bytes[bytes.len() - 4..], &[0, 0, 128, 255]);
}

#[test]
fn image_directory_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let ds = gen_synthetic(3, &SyntheticSpec::new(8, 8), 4).unwrap();
    let quantized = ds.map_images(|img| {
        Tensor::new(img.shape().to_vec(), img.data().iter().map(|&v| pnm::quantize(v) as f64 / 255.0).collect()).unwrap()
    })
    .unwrap();
    let written = write_image_dir(dir.path(), &quantized).unwrap();
    assert_eq!(written.len(), 6);
    let back = load_image_dir(dir.path()).unwrap();
    assert_eq!(back.len(), 6);
    let mut expected: Vec<(usize, Vec<f64>)> = quantized.samples().iter().map(|s| (s.label, s.image.data().to_vec())).collect();
    let mut got: Vec<(usize, Vec<f64>)> = back
        .samples()
        .iter()
        .map(|s| {
            let name = &back.class_names()[s.label];
            let original = quantized.class_names().iter().position(|c| c == name).unwrap();
            (original, s.image.data().to_vec())
        })
        .collect();
    let key = |a: &(usize, Vec<f64>), b: &(usize, Vec<f64>)| a.0.cmp(&b.0).then(a.1.partial_cmp(&b.1).unwrap());
    expected.sort_by(key);
    got.sort_by(key);
    assert_eq!(got, expected);
}

#[test]
fn subjects_survive_the_directory_layout() {
    let dir = tempfile::tempdir().unwrap();
    let img = Tensor::full(&[1, 2, 2], 0.2);
    let samples = (0..4)
        .map(|i| Sample {
            image: img.clone(),
            label: i % 2,
            subject: Some(format!("s{}", i / 2)),
        })
        .collect();
    let ds = Dataset::new(samples, vec!["x".into(), "y".into()]).unwrap();
    write_image_dir(dir.path(), &ds).unwrap();
    let back = load_image_dir(dir.path()).unwrap();
    let mut subjects: Vec<String> = back.samples().iter().filter_map(|s| s.subject.clone()).collect();
    subjects.sort();
    assert_eq!(subjects, ["s0", "s0", "s1", "s1"]);
}

#[test]
fn png_reads_as_unit_range() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("g.png");
    image::GrayImage::from_raw(3, 2, vec![0, 51, 102, 153, 204, 255]).unwrap().save(&path).unwrap();
    let t = read_image(&path).unwrap();
    assert_eq!(t.shape(), &[1, 2, 3]);
    assert_eq!(t.data(), &[0.0, 0.2, 0.4, 0.6, 0.8, 1.0]);
}

#[test]
fn checkpoint_file_round_trips_bit_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("p.saug");
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let entries: Vec<checkpoint::NamedTensor> = vec![
        ("conv.w".into(), Tensor::new(vec![2, 1, 3, 3], (0..18).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap()),
        ("bn.running_var".into(), Tensor::new(vec![2], vec![f64::MIN_POSITIVE, 1e300]).unwrap()),
        ("é".into(), Tensor::scalar(-0.0)),
    ];
    checkpoint::save(&path, &entries).unwrap();
    let back = checkpoint::load(&path).unwrap();
    assert_eq!(back.len(), 3);
    for ((n1, t1), (n2, t2)) in entries.iter().zip(&back) {
        assert_eq!(n1, n2);
        assert_eq!(t1.shape(), t2.shape());
        let bits = |t: &Tensor| t.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(t1), bits(t2));
    }
    assert_eq!(checkpoint::encode(&back), std::fs::read(&path).unwrap());
}

#[test]
fn metrics_file_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.csv");
    let records: Vec<MetricsRecord> = (1..=3)
        .map(|e| MetricsRecord {
            epoch: e,
            train_loss_total: 1.0 / (e as f64 + 0.1),
            train_loss_a: None,
            train_loss_b: 1.0 / (e as f64 + 0.1),
            val_loss_b: std::f64::consts::PI / e as f64,
            val_accuracy: e as f64 / 7.0,
            test_accuracy_at_best: None,
        })
        .collect();
    let text = metrics_csv(&records, Some(61.0 / 86.0));
    std::fs::write(&path, &text).unwrap();
    let (back, acc) = parse_metrics_csv(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(back, records);
    assert_eq!(acc, Some(61.0 / 86.0));
}

mod common;

use std::io::Cursor;

use lfdk::io::{
    export_sai_grid, import_sai_grid, payload_bytes, read_lft, read_lft_from, write_lft, write_lft_to, TrainConfig,
    WeightArchive, LFT_MAGIC,
};
use lfdk::{DKNet, DKNetConfig, Dims5, Error, KernelKind, LightField};

fn sample_lf(seed: u64, d: Dims5) -> LightField<f32> {
    common::random_lf32(d, &mut common::rng(seed))
}

fn lft_bytes(lf: &LightField<f32>) -> Vec<u8> {
    let mut buf = Vec::new();
    write_lft_to(&mut buf, lf).unwrap();
    buf
}

#[test]
fn lft_round_trip_is_bitwise() {
    let dir = tempfile::tempdir().unwrap();
    for (i, d) in [Dims5::new(1, 1, 1, 1, 1), Dims5::new(2, 3, 3, 7, 5), Dims5::new(5, 5, 1, 16, 9)].into_iter().enumerate() {
        let mut lf = sample_lf(i as u64, d);
        lf.data_mut()[0] = -0.0;
        let p = dir.path().join(format!("{i}.lft"));
        write_lft(&p, &lf).unwrap();
        let back = read_lft(&p).unwrap();
        assert_eq!(back.dims(), d);
        let bits = |l: &LightField<f32>| l.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&back), bits(&lf));
        assert_eq!(std::fs::metadata(&p).unwrap().len(), 28 + payload_bytes(d));
    }
}

#[test]
fn payload_size_of_a_full_light_field() {
    assert_eq!(payload_bytes(Dims5::new(8, 8, 3, 346, 510)), 4 * 8 * 8 * 3 * 346 * 510);
}

#[test]
fn lft_rejects_corrupt_files() {
    let lf = sample_lf(1, Dims5::new(2, 2, 3, 4, 4));
    let good = lft_bytes(&lf);

    let mut bad = good.clone();
    bad[0] = b'X';
    assert!(matches!(read_lft_from(Cursor::new(&bad)), Err(Error::BadMagic { expected, .. }) if expected == LFT_MAGIC));

    let cut = &good[..good.len() - 10];
    match read_lft_from(Cursor::new(cut)) {
        Err(Error::TruncatedPayload { expected, found }) => {
            assert_eq!(expected, payload_bytes(lf.dims()));
            assert_eq!(found, expected - 10);
        }
        other => panic!("{other:?}"),
    }

    let mut dtype = good.clone();
    dtype[24..28].copy_from_slice(&7u32.to_le_bytes());
    assert!(matches!(read_lft_from(Cursor::new(&dtype)), Err(Error::UnsupportedDtype(7))));

    assert!(read_lft_from(Cursor::new(&good[..12])).is_err());
    let mut long = good.clone();
    long.push(0);
    assert!(read_lft_from(Cursor::new(&long)).is_err());
    assert!(read_lft_from(Cursor::new(&good)).unwrap() == lf);
}

#[test]
fn weight_archive_round_trip() {
    let mut a = WeightArchive::default();
    a.push_metadata("kernels", "gamma");
    a.push("w", &[2, 3], vec![1.0, 2.0, 3.0, 4.0, 5.0, -0.5]).unwrap();
    a.push("b", &[2], vec![0.25, f32::MIN_POSITIVE]).unwrap();
    assert!(a.push("bad", &[2, 2], vec![1.0]).is_err());
    let mut buf = Vec::new();
    a.write_to(&mut buf).unwrap();
    let back = WeightArchive::read_from(Cursor::new(&buf)).unwrap();
    assert_eq!(back, a);
    assert_eq!(back.metadata(), vec![("kernels".to_string(), "gamma".to_string())]);
    let mut dst = vec![0f64; 6];
    back.load_into("w", &[2, 3], &mut dst).unwrap();
    assert_eq!(dst, vec![1.0, 2.0, 3.0, 4.0, 5.0, -0.5]);
    assert!(back.load_into("w", &[3, 2], &mut dst).is_err());
    assert!(back.load_into("missing", &[1], &mut dst[..1]).is_err());

    assert!(WeightArchive::read_from(Cursor::new(&buf[..buf.len() - 3])).is_err());
    let mut bad = buf.clone();
    bad[1] = b'?';
    assert!(matches!(WeightArchive::read_from(Cursor::new(&bad)), Err(Error::BadMagic { .. })));
}

#[test]
fn saved_model_reproduces_forward_output() {
    let dir = tempfile::tempdir().unwrap();
    for kind in [KernelKind::Gamma, KernelKind::Sas] {
        let cfg = DKNetConfig { scale: 2, angular: (3, 3), feat_ch: 4, depth: 2, kind, ..DKNetConfig::default() };
        let net = DKNet::<f32>::build(cfg, 11).unwrap();
        let p = dir.path().join("m.lfw");
        net.save(&p).unwrap();
        let back = DKNet::<f32>::load(&p).unwrap();
        assert_eq!(back.config, cfg);
        let x = sample_lf(3, Dims5::new(3, 3, 3, 6, 7));
        let (a, b) = (net.forward(&x).unwrap(), back.forward(&x).unwrap());
        assert!(a.data().iter().zip(b.data()).all(|(p, q)| p.to_bits() == q.to_bits()));
    }
}

#[test]
fn archive_with_missing_layer_is_rejected() {
    let cfg = DKNetConfig { scale: 2, angular: (2, 2), feat_ch: 4, depth: 1, kind: KernelKind::Sas, ..DKNetConfig::default() };
    let net = DKNet::<f32>::build(cfg, 1).unwrap();
    let full = net.to_archive();
    let mut partial = WeightArchive::default();
    for (k, v) in full.metadata() {
        partial.push_metadata(&k, &v);
    }
    for e in full.parameter_entries().skip(1) {
        let dims: Vec<usize> = e.dims.iter().map(|&d| d as usize).collect();
        partial.push(e.name.clone(), &dims, e.data.clone()).unwrap();
    }
    assert!(DKNet::<f32>::from_archive(&partial).is_err());
}

#[test]
fn grid_import_of_full_size_light_field() {
    let d = Dims5::new(8, 8, 3, 346, 510);
    let lf = LightField::<f32>::from_fn(d, |u, v, c, y, x| ((u * 31 + v * 17 + c * 7 + y + 2 * x) % 256) as f32 / 255.0);
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("grid.png");
    export_sai_grid(&lf, &p, false).unwrap();
    let back = import_sai_grid(&p, 8, 8).unwrap();
    assert_eq!(back.dims(), d);
    let worst = lf.data().iter().zip(back.data()).map(|(a, b)| (a - b).abs()).fold(0f32, f32::max);
    assert!(worst < 1e-6, "{worst}");
    assert!(import_sai_grid(&p, 7, 8).is_err());
}

#[test]
fn config_text_round_trip() {
    let mut c = TrainConfig::default();
    c.net.kind = KernelKind::Dup2(2);
    c.lr = 3e-4;
    c.steps = 17;
    let back = TrainConfig::parse(&c.to_text()).unwrap();
    assert_eq!(back, c);
    assert!(matches!(TrainConfig::parse("bogus = 1"), Err(Error::Parse { line: 1, .. })));
}

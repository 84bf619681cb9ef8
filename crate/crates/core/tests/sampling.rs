use lfdk::patches::{sample_patches, valid_positions};
use lfdk::{Dims5, LightField};

fn ramp(d: Dims5) -> LightField<f64> {
    LightField::from_fn(d, |u, v, c, y, x| (u + v + c) as f64 + y as f64 * 1000.0 + x as f64)
}

#[test]
fn positions_are_uniform() {
    // 5×6 = 30 cells, 6000 draws; 0.1% critical value of χ² with 29 dof is 58.3.
    let d = Dims5::new(1, 1, 1, 12, 13);
    let lf = ramp(d);
    let (ny, nx) = valid_positions(12, 13, 2, 4).unwrap();
    assert_eq!((ny, nx), (5, 6));
    let draws = 6000;
    let mut counts = vec![0usize; ny * nx];
    for p in sample_patches(&lf, 2, 4, draws, 42).unwrap() {
        counts[p.y0 * nx + p.x0] += 1;
    }
    let expect = draws as f64 / counts.len() as f64;
    let chi2: f64 = counts.iter().map(|&c| (c as f64 - expect).powi(2) / expect).sum();
    assert!(chi2 < 58.3, "chi2 = {chi2}");
}

#[test]
fn patches_are_aligned_crops() {
    let d = Dims5::new(2, 2, 3, 20, 24);
    let lf = ramp(d);
    for p in sample_patches(&lf, 2, 5, 16, 7).unwrap() {
        assert_eq!(p.hr.dims(), Dims5::new(2, 2, 3, 10, 10));
        assert_eq!(p.lr.dims(), Dims5::new(2, 2, 3, 5, 5));
        assert_eq!(p.hr.at(1, 0, 2, 3, 4), lf.at(1, 0, 2, p.y0 + 3, p.x0 + 4));
        assert_eq!(p.lr, p.hr.downsample_bilinear(2).unwrap());
    }
    assert_eq!(sample_patches(&lf, 2, 5, 4, 9).unwrap(), sample_patches(&lf, 2, 5, 4, 9).unwrap());
    assert!(sample_patches(&lf, 4, 6, 1, 0).is_err());
}

use lfdk::nn::{Adam, AdamConfig};

/// Minimizes `Σ (θ_i − t_i)²` and compares against the textbook recurrence.
#[test]
fn matches_scalar_recurrence() {
    let cfg = AdamConfig { lr: 0.05, ..AdamConfig::default() };
    let mut adam = Adam::<f64>::new(cfg);
    let target = [3.0, -1.0, 0.5];
    let mut theta = vec![0.0, 2.0, 0.5];
    let (mut m, mut v) = ([0.0; 3], [0.0; 3]);
    let mut oracle = theta.clone();
    for t in 1..=200 {
        let g: Vec<f64> = theta.iter().zip(&target).map(|(p, q)| 2.0 * (p - q)).collect();
        adam.step(&mut [&mut theta], &[&g]).unwrap();
        for i in 0..3 {
            let gi = 2.0 * (oracle[i] - target[i]);
            m[i] = 0.9 * m[i] + 0.1 * gi;
            v[i] = 0.999 * v[i] + 0.001 * gi * gi;
            let mh = m[i] / (1.0 - 0.9f64.powi(t));
            let vh = v[i] / (1.0 - 0.999f64.powi(t));
            oracle[i] -= 0.05 * mh / (vh.sqrt() + 1e-8);
        }
        for i in 0..3 {
            assert!((theta[i] - oracle[i]).abs() < 1e-12, "step {t}");
        }
    }
    assert!((theta[0] - 3.0).abs() < 0.1);
}

#[test]
fn first_step_moves_by_learning_rate() {
    let mut adam = Adam::<f64>::new(AdamConfig::default());
    let mut p = vec![1.0, 1.0];
    adam.step(&mut [&mut p], &[&[10.0, -0.001]]).unwrap();
    assert!((p[0] - (1.0 - 1e-4)).abs() < 1e-9);
    assert!((p[1] - (1.0 + 1e-4)).abs() < 1e-8);
    assert_eq!(adam.steps(), 1);
}

#[test]
fn group_shape_changes_are_rejected() {
    let mut adam = Adam::<f32>::new(AdamConfig::default());
    let mut a = vec![0.0f32; 2];
    adam.step(&mut [&mut a], &[&[1.0, 1.0]]).unwrap();
    let mut b = vec![0.0f32; 3];
    assert!(adam.step(&mut [&mut b], &[&[1.0, 1.0, 1.0]]).is_err());
    assert!(adam.step(&mut [&mut a], &[&[1.0]]).is_err());
}

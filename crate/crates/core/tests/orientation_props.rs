use mtscene_core::orientation::{
    angular_error, decode_biternion, encode_biternion, instance_orientation, paint_biternions, von_mises_loss, Angle,
    Biternion,
};
use mtscene_tensor::Tensor;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn biternion_round_trip_on_1000_angles() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..1000 {
        let a = Angle::from_degrees(rng.random_range(-720.0..720.0));
        let back = decode_biternion(encode_biternion(a)).unwrap();
        assert!(angular_error(a, back) < 1e-6, "{a:?} -> {back:?}");
    }
    assert!(decode_biternion(Biternion { cos: 0.0, sin: 0.0 }).is_err());
}

#[test]
fn von_mises_increases_with_error() {
    for kappa in [0.5, 1.0, 2.0] {
        let gt = Angle::from_degrees(37.0);
        let mut prev = -1.0;
        for d in 0..=180 {
            let pred = encode_biternion(Angle::from_degrees(37.0 + d as f64));
            let loss = von_mises_loss(pred, gt, kappa).unwrap();
            assert!(loss > prev, "kappa {kappa} at {d} degrees");
            prev = loss;
        }
        assert!(prev <= 1.0 - (-2.0 * kappa).exp() + 1e-12);
        let zero = von_mises_loss(encode_biternion(gt), gt, kappa).unwrap();
        assert!(zero.abs() < 1e-12);
    }
    assert!(von_mises_loss(encode_biternion(Angle::from_degrees(0.0)), Angle::from_degrees(0.0), 0.0).is_err());
}

#[test]
fn angular_error_is_a_metric_on_the_circle() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..1000 {
        let [a, b, c] = [0; 3].map(|_| Angle::from_degrees(rng.random_range(0.0..360.0)));
        let (ab, bc, ac) = (angular_error(a, b), angular_error(b, c), angular_error(a, c));
        assert!((0.0..=180.0).contains(&ab));
        assert_eq!(angular_error(a, a), 0.0);
        assert!((ab - angular_error(b, a)).abs() < 1e-12);
        assert!(ac <= ab + bc + 1e-9);
    }
    assert_eq!(angular_error(Angle::from_degrees(359.0), Angle::from_degrees(1.0)), 2.0);
}

fn field_with(hw: (usize, usize), angles: &[f64]) -> (Tensor, Vec<u32>) {
    let (h, w) = hw;
    let mut field = Tensor::zeros(&[2, h, w]).unwrap();
    let pixels: Vec<u32> = (0..angles.len() as u32).collect();
    for (p, &deg) in angles.iter().enumerate() {
        paint_biternions(&mut field, &[p as u32], Angle::from_degrees(deg));
    }
    (field, pixels)
}

proptest! {
    #[test]
    fn circular_mean_is_rotation_equivariant(
        base in prop::collection::vec(-40.0f64..40.0, 1..30),
        center in 0.0f64..360.0,
        shift in 0.0f64..360.0,
    ) {
        let a: Vec<f64> = base.iter().map(|d| center + d).collect();
        let b: Vec<f64> = a.iter().map(|d| d + shift).collect();
        let (fa, px) = field_with((4, 8), &a);
        let (fb, _) = field_with((4, 8), &b);
        let ma = instance_orientation(&fa, &px).unwrap();
        let mb = instance_orientation(&fb, &px).unwrap();
        prop_assert!(angular_error(Angle::from_degrees(ma.degrees() + shift), mb) < 1e-3);
    }

    #[test]
    fn constant_field_recovers_its_angle(deg in 0.0f64..360.0, n in 1usize..32) {
        let (f, px) = field_with((4, 8), &vec![deg; n]);
        prop_assert!(angular_error(instance_orientation(&f, &px).unwrap(), Angle::from_degrees(deg)) < 1e-4);
    }
}

#[test]
fn opposing_directions_have_no_mean() {
    let (f, px) = field_with((1, 2), &[10.0, 190.0]);
    assert!(instance_orientation(&f, &px).is_err());
    assert!(instance_orientation(&f, &[]).is_err());
}

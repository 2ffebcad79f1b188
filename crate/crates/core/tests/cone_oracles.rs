mod common;

use common::*;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use shadowcone::cones::{ConeFamily, ConeSpec};
use shadowcone::manifold;

fn specs() -> Vec<ConeSpec> {
    vec![
        ConeSpec::umbral_infinity(1.0, 0.1),
        ConeSpec::umbral_origin(1.0, 0.1),
        ConeSpec::penumbral_ball(1.0, 0.1),
        ConeSpec::penumbral_horosphere(1.0, 0.0).with_source_height(20.0),
        ConeSpec::umbral_infinity(2.5, 0.3),
        ConeSpec::umbral_origin(0.5, 0.3),
        ConeSpec::penumbral_ball(2.0, 0.4),
        ConeSpec::penumbral_horosphere(0.7, 0.0).with_source_height(5.0),
    ]
}

#[test]
fn signed_distance_matches_brute_force_boundary() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for spec in specs() {
        let spec = spec.with_gamma3(0.0);
        let mut worst = 0.0f64;
        for i in 0..40 {
            let u = random_apex(&mut rng, &spec, 2);
            let v = if i % 2 == 0 {
                random_towards_cone(&mut rng, &spec, &u, 3.0)
            } else {
                random_near(&mut rng, &spec, &u, 3.0)
            };
            let e = spec.signed_cone_distance(&u, &v).unwrap();
            let oracle = oracle_boundary_distance(&spec, [u[0], u[1]], [v[0], v[1]]);
            worst = worst.max((e.abs() - oracle).abs());
        }
        assert!(worst < 1e-3, "{:?} k={}: worst {worst}", spec.family, spec.k);
    }
}

#[test]
fn membership_agrees_with_angle_test() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for spec in specs().into_iter().filter(|s| s.family != ConeFamily::UmbralOrigin) {
        for _ in 0..2000 {
            let u = random_apex(&mut rng, &spec, 3);
            let v = random_towards_cone(&mut rng, &spec, &u, 4.0);
            let q = spec.query(&u, &v).unwrap();
            let by_angle = spec.is_member_by_angle(&u, &v).unwrap();
            let band = (spec.axis_angle(&u, &v).unwrap() - spec.half_aperture(&u).unwrap()).abs();
            if band > 1e-9 {
                assert_eq!(q.member, by_angle, "{:?} u={u:?} v={v:?} q={q:?}", spec.family);
            }
        }
    }
}

#[test]
fn penumbral_sign_matches_temperature() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for spec in specs().into_iter().filter(|s| !s.family.is_umbral()) {
        for _ in 0..2000 {
            let u = random_apex(&mut rng, &spec, 3);
            let v = random_towards_cone(&mut rng, &spec, &u, 4.0);
            let q = spec.query(&u, &v).unwrap();
            if q.altitude <= 0.0 && q.t.abs() > 1e-12 {
                assert_eq!(q.signed_dist < 0.0, q.t < 0.0);
            }
        }
    }
}

#[test]
fn umbral_infinity_aperture_is_constant() {
    let spec = ConeSpec::umbral_infinity(1.3, 0.2);
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let first = spec.half_aperture(&random_apex(&mut rng, &spec, 4)).unwrap();
    for _ in 0..1000 {
        assert_eq!(spec.half_aperture(&random_apex(&mut rng, &spec, 4)).unwrap(), first);
    }
}

#[test]
fn penumbral_aperture_shrinks_away_from_source() {
    let ball = ConeSpec::penumbral_ball(1.0, 0.2);
    let mut last = f64::INFINITY;
    for i in 1..20 {
        let m = ball.hole_norm() + i as f64 * 0.045;
        let a = ball.half_aperture(&[m, 0.0]).unwrap();
        assert!(a < last);
        last = a;
    }
    let horo = ConeSpec::penumbral_horosphere(1.0, 0.0).with_source_height(20.0);
    let mut last = f64::INFINITY;
    for i in (1..20).rev() {
        let a = horo.half_aperture(&[0.0, i as f64]).unwrap();
        assert!(a < last);
        last = a;
    }
}

#[test]
fn off_origin_source_is_isometric() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for family in [ConeFamily::UmbralOrigin, ConeFamily::PenumbralBall] {
        let plain = ConeSpec::new(family, 1.0, 0.2);
        for _ in 0..200 {
            let s = random_point(&mut rng, &plain.geometry(), 3, 0.0, 1.0);
            let spec = plain.clone().with_source(s.clone());
            // place points relative to the moved source
            let u0 = random_apex(&mut rng, &plain, 3);
            let v0 = random_towards_cone(&mut rng, &plain, &u0, 3.0);
            let u = manifold::translate_coords(&s.iter().map(|c| -c).collect::<Vec<_>>(), &u0, 1.0);
            let v = manifold::translate_coords(&s.iter().map(|c| -c).collect::<Vec<_>>(), &v0, 1.0);
            let a = spec.signed_cone_distance(&u, &v).unwrap();
            let b = plain.signed_cone_distance(&u0, &v0).unwrap();
            assert!((a - b).abs() < 1e-9, "{a} vs {b}");
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn reflexive_membership(seed in any::<u64>(), fam in 0usize..4) {
        let spec = specs()[fam].clone();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let u = random_apex(&mut rng, &spec, 3);
        prop_assert!(spec.is_member(&u, &u).unwrap());
    }

    #[test]
    fn energy_continuous_across_apex_branch(seed in any::<u64>(), fam in 0usize..4) {
        let spec = specs()[fam].clone().with_gamma3(0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let u = random_apex(&mut rng, &spec, 2);
        let v = random_near(&mut rng, &spec, &u, 2.0);
        // walk along the segment u -> v and watch for jumps where H changes sign
        let geom = spec.geometry();
        let log = geom.log(&u, &v);
        let mut prev: Option<(f64, f64)> = None;
        for i in 0..=400 {
            let lam = i as f64 / 400.0;
            let p = geom.exp(&u, &log.iter().map(|c| c * lam).collect::<Vec<_>>());
            let q = spec.query(&u, &p).unwrap();
            if let Some((e, h)) = prev {
                if (h > 0.0) != (q.altitude > 0.0) {
                    let step = geom.dist(&u, &v) / 400.0;
                    prop_assert!((q.signed_dist - e).abs() <= step + 1e-6,
                        "jump {} -> {} at step {}", e, q.signed_dist, step);
                }
            }
            prev = Some((q.signed_dist, q.altitude));
        }
    }
}

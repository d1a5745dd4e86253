use ndarray::Array2;
use proptest::prelude::*;

use geoknit::assignment::hungarian;
use geoknit::diffusion::NoiseSchedule;
use geoknit::fgw::{box_features, fgw_distance, marginal_error};
use geoknit::geometry::face::{FaceGrid, FaceKind};
use geoknit::geometry::mesh::Triangle;
use geoknit::geometry::{BoundingBox, PartModel, Point3};
use geoknit::guidance::d_geo;
use geoknit::metrics::{chamfer, intersection_volume};
use geoknit::pipeline::synth_dataset;
use geoknit::synth::{normalize, Family};

fn point() -> impl Strategy<Value = Point3> {
    (-5.0..5.0f64, -5.0..5.0f64, -5.0..5.0f64).prop_map(|(x, y, z)| Point3::new(x, y, z))
}

fn boxes(max: usize) -> impl Strategy<Value = Vec<BoundingBox>> {
    prop::collection::vec((point(), 0.05..2.0f64, 0.05..2.0f64, 0.05..2.0f64), 1..max).prop_map(|v| {
        v.into_iter()
            .map(|(c, a, b, d)| {
                let h = Point3::new(a, b, d);
                BoundingBox::new(c - h, c + h).unwrap()
            })
            .collect()
    })
}

fn rows(max: usize) -> impl Strategy<Value = Array2<f64>> {
    prop::collection::vec(prop::array::uniform6(-3.0..3.0f64), 1..max).prop_map(|v| {
        Array2::from_shape_vec((v.len(), 6), v.into_iter().flatten().collect()).unwrap()
    })
}

fn unit_cube(offset: Point3) -> PartModel {
    let q = |o: Point3, du: Point3, dv: Point3, s: i8| {
        FaceGrid::from_fn(FaceKind::Planar, s, |u, v| o + offset + du * u + dv * v).unwrap()
    };
    let (x, y, z) = (Point3::unit_axis(0), Point3::unit_axis(1), Point3::unit_axis(2));
    let o = Point3::ZERO;
    PartModel::from_grids(
        vec![q(o, x, y, -1), q(z, x, y, 1), q(o, x, z, -1), q(y, x, z, 1), q(o, y, z, 1), q(x, y, z, -1)],
        vec![],
        "",
    )
    .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn chamfer_is_symmetric_and_zero_on_itself(
        a in prop::collection::vec(point(), 1..40),
        b in prop::collection::vec(point(), 1..40),
    ) {
        prop_assert_eq!(chamfer(&a, &a).unwrap(), 0.0);
        prop_assert!((chamfer(&a, &b).unwrap() - chamfer(&b, &a).unwrap()).abs() < 1e-12);
        prop_assert!(chamfer(&a, &b).unwrap() >= 0.0);
    }

    #[test]
    fn d_geo_is_zero_on_itself(x in rows(12), y in rows(12)) {
        prop_assert_eq!(d_geo(&x, &x).unwrap(), 0.0);
        prop_assert!(d_geo(&x, &y).unwrap() >= 0.0);
    }

    #[test]
    fn hungarian_pairs_are_a_matching_no_worse_than_diagonal(
        n in 1usize..9,
        m in 1usize..9,
        vals in prop::collection::vec(-10.0..10.0f64, 64),
    ) {
        let c = Array2::from_shape_fn((n, m), |(i, j)| vals[i * 8 + j]);
        let h = hungarian(&c).unwrap();
        prop_assert_eq!(h.pairs.len(), n.min(m));
        let mut seen_r = vec![false; n];
        let mut seen_c = vec![false; m];
        for &(i, j) in &h.pairs {
            prop_assert!(!seen_r[i] && !seen_c[j]);
            seen_r[i] = true;
            seen_c[j] = true;
        }
        let diagonal: f64 = (0..n.min(m)).map(|k| c[[k, k]]).sum();
        prop_assert!(h.total_cost <= diagonal + 1e-9);
    }

    #[test]
    fn fgw_self_distance_vanishes_and_plans_stay_feasible(a in boxes(10), b in boxes(10), l in 0.0..=1.0f64) {
        let fa = box_features(&a).unwrap();
        let fb = box_features(&b).unwrap();
        prop_assert!(fgw_distance(&fa, &fa, l).unwrap().distance.abs() < 1e-9);
        let r = fgw_distance(&fa, &fb, l).unwrap();
        prop_assert!(r.distance >= -1e-12);
        prop_assert!(marginal_error(&r.plan) < 1e-9);
        prop_assert!(r.plan.iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn triangle_closest_point_beats_vertices(a in point(), b in point(), c in point(), p in point()) {
        let t = Triangle::new(a, b, c);
        let q = t.closest_point(p);
        let d = q.distance(p);
        prop_assert!(d <= p.distance(a) + 1e-9 && d <= p.distance(b) + 1e-9 && d <= p.distance(c) + 1e-9);
    }

    #[test]
    fn forward_diffusion_without_noise_scales_the_data(x in rows(8), t in 0usize..1000) {
        let s = NoiseSchedule::default();
        let out = s.forward_diffuse(&x, t, &Array2::zeros(x.dim())).unwrap();
        let k = s.alpha_bar(t).sqrt();
        prop_assert!(out.iter().zip(x.iter()).all(|(o, v)| (o - k * v).abs() < 1e-12));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn flipping_a_face_negates_its_normals(seed in 0u64..1000) {
        let s = synth_dataset(&Family::ALL, 1, seed).unwrap().remove(0);
        for g in s.target.grids() {
            let n = g.normals().unwrap();
            let f = g.flipped().normals().unwrap();
            prop_assert!(n.iter().zip(&f).all(|(a, b)| (*a + *b).norm() < 1e-9));
        }
    }

    #[test]
    fn normalization_is_idempotent(seed in 0u64..1000) {
        let s = synth_dataset(&Family::ALL, 1, seed).unwrap().remove(0);
        let (once, _) = normalize(&s).unwrap();
        let (twice, xf) = normalize(&once).unwrap();
        prop_assert!(xf.translation.norm() < 1e-9 && (xf.scale - 1.0).abs() < 1e-9);
        for (a, b) in once.target.grids().zip(twice.target.grids()) {
            prop_assert!(a.points().iter().zip(b.points()).all(|(p, q)| p.distance(*q) < 1e-9));
        }
    }

    #[test]
    fn cube_overlaps_itself_completely(x in -3.0..3.0f64, y in -3.0..3.0f64, z in -3.0..3.0f64) {
        let c = unit_cube(Point3::new(x, y, z));
        prop_assert!((intersection_volume(&c, &c, 32).unwrap() - 100.0).abs() < 1e-9);
    }
}

use proptest::prelude::*;
use ringlab::cloud::{mirror_z, normalize, scale, Cloud, Particle, Tag};
use ringlab::diagnostics::{
    barycenter_z, diam_z, energy_e, energy_e1, find_center, moments, pair_concentration, weighted_axial_moment, TagFilter,
};
use ringlab::kernels::KernelConfig;

fn cloud_strategy() -> impl Strategy<Value = Cloud> {
    prop::collection::vec((0.3f64..2.0, -1.0f64..1.0, 0.01f64..1.0, any::<bool>()), 2..40).prop_map(|v| {
        let ps: Vec<Particle> = v
            .into_iter()
            .map(|(r, z, g, t)| Particle { r, z, gamma: g, xi0: g / r, tag: if t { Tag::CoreM } else { Tag::DiffuseD } })
            .collect();
        let mu = ps.iter().map(|p| p.gamma).sum();
        Cloud::new(ps, 0.05, mu, 1.0)
    })
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1e-300)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn scaling_is_a_semigroup(c in cloud_strategy(), l1 in 0.2f64..5.0, g1 in 0.2f64..5.0, l2 in 0.2f64..5.0, g2 in 0.2f64..5.0) {
        let twice = scale(&scale(&c, l1, g1).unwrap(), l2, g2).unwrap();
        let once = scale(&c, l1 * l2, g1 * g2).unwrap();
        for (a, b) in twice.particles.iter().zip(&once.particles) {
            prop_assert!(close(a.r, b.r, 1e-14) && close(a.z, b.z, 1e-14));
            prop_assert!(close(a.gamma, b.gamma, 1e-14) && close(a.xi0, b.xi0, 1e-14));
            prop_assert_eq!(a.tag, b.tag);
        }
        prop_assert!(close(twice.r0, once.r0, 1e-14) && close(twice.mu, once.mu, 1e-14));
    }

    #[test]
    fn normalization_is_idempotent(c in cloud_strategy()) {
        let (n, _, _) = normalize(&c).unwrap();
        let (m0, m2) = moments(&n);
        prop_assert!((m0 - 1.0).abs() <= 1e-12 && (m2 - 1.0).abs() <= 1e-12);
        let (nn, l, g) = normalize(&n).unwrap();
        prop_assert!((l - 1.0).abs() <= 1e-12 && (g - 1.0).abs() <= 1e-12);
        for (a, b) in nn.particles.iter().zip(&n.particles) {
            prop_assert!(close(a.r, b.r, 1e-12) && close(a.gamma, b.gamma, 1e-12));
        }
    }

    #[test]
    fn mirror_is_an_involution_preserving_weights(c in cloud_strategy()) {
        let m = mirror_z(&c);
        prop_assert_eq!(&mirror_z(&m), &c);
        for (a, b) in m.particles.iter().zip(&c.particles) {
            prop_assert_eq!(a.gamma, b.gamma);
            prop_assert_eq!(a.xi0, b.xi0);
            prop_assert_eq!(a.tag, b.tag);
        }
    }

    #[test]
    fn diagnostics_are_translation_equivariant(c in cloud_strategy(), shift in -3.0f64..3.0) {
        let mut t = c.clone();
        for p in &mut t.particles {
            p.z += shift;
        }
        let k = KernelConfig::with_delta(0.01);
        prop_assert!(close(energy_e(&t, &k).unwrap(), energy_e(&c, &k).unwrap(), 1e-11));
        prop_assert!(close(energy_e1(&t, &k).unwrap(), energy_e1(&c, &k).unwrap(), 1e-11));
        prop_assert!((diam_z(&t, TagFilter::All).unwrap() - diam_z(&c, TagFilter::All).unwrap()).abs() < 1e-12);
        let zb = barycenter_z(&c, TagFilter::All).unwrap();
        prop_assert!((barycenter_z(&t, TagFilter::All).unwrap() - zb - shift).abs() < 1e-12);
        // pair separations move only by roundoff; keep the threshold off the data
        let pc = pair_concentration(&c, 3.0).unwrap();
        let pt = pair_concentration(&t, 3.0).unwrap();
        let gap = c.particles.iter().enumerate().flat_map(|(j, a)| c.particles[j + 1..].iter().map(move |b| ((a.r - b.r).hypot(a.z - b.z) - 0.15).abs())).fold(f64::INFINITY, f64::min);
        if gap > 1e-12 {
            prop_assert!(close(pt, pc, 1e-12));
        }
    }

    #[test]
    fn center_is_translation_and_mirror_equivariant(c in cloud_strategy(), shift in -3.0f64..3.0) {
        let rho = 0.3;
        let x = find_center(&c, rho).unwrap();
        let m = find_center(&mirror_z(&c), rho).unwrap();
        // the random clouds carry no exact candidate ties
        prop_assert_eq!(m.x.r, x.x.r);
        prop_assert_eq!(m.x.z, -x.x.z);
        prop_assert_eq!(m.leak_plain, x.leak_plain);
        let mut t = c.clone();
        for p in &mut t.particles {
            p.z += shift;
        }
        let y = find_center(&t, rho).unwrap();
        prop_assert!((y.x.z - x.x.z - shift).abs() < 1e-12);
        prop_assert_eq!(y.x.r, x.x.r);
    }

    #[test]
    fn scalars_are_mirror_invariant(c in cloud_strategy()) {
        let m = mirror_z(&c);
        let k = KernelConfig::with_delta(0.01);
        prop_assert_eq!(energy_e(&m, &k).unwrap(), energy_e(&c, &k).unwrap());
        prop_assert_eq!(energy_e1(&m, &k).unwrap(), energy_e1(&c, &k).unwrap());
        prop_assert_eq!(weighted_axial_moment(&m, 0.0), weighted_axial_moment(&c, 0.0));
        prop_assert_eq!(diam_z(&m, TagFilter::All).unwrap(), diam_z(&c, TagFilter::All).unwrap());
        prop_assert_eq!(barycenter_z(&m, TagFilter::Diffuse).ok().map(|z| -z), barycenter_z(&c, TagFilter::Diffuse).ok());
    }

    #[test]
    fn energy_scales_with_the_symmetry(c in cloud_strategy(), l in 0.5f64..2.0, g in 0.5f64..2.0) {
        let s = scale(&c, l, g).unwrap();
        let e = energy_e(&c, &KernelConfig::with_delta(0.01)).unwrap();
        let es = energy_e(&s, &KernelConfig::with_delta(0.01 / l)).unwrap();
        prop_assert!(close(es, e * g * g / l.powi(5), 1e-11));
    }
}

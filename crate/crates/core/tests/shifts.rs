use proptest::prelude::*;
use shiftlens::datagen::generate_sprites;
use shiftlens::shifts::*;

fn spec(kind: ShiftKind, intensity: Intensity, delta: f64, seed: u64) -> ShiftSpec {
    ShiftSpec::new(kind, intensity, delta).with_seed(seed)
}

#[test]
fn gaussian_noise_has_the_requested_spread() {
    // mid-gray canvas keeps clamping out of the picture for sigma = 10
    let mut ds = generate_sprites(40, 1).unwrap();
    ds.images.iter_mut().for_each(|p| *p = 128);
    let out = apply_shift(&ds, &spec(ShiftKind::Gaussian, Intensity::Medium, 1.0, 3)).unwrap();
    let diffs: Vec<f64> = out.images.iter().map(|&p| f64::from(p) - 128.0).collect();
    let n = diffs.len() as f64;
    let mean = diffs.iter().sum::<f64>() / n;
    let sd = (diffs.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / n).sqrt();
    assert!(mean.abs() < 0.1, "mean {mean}");
    // rounding adds variance 1/12
    let expected = (100.0f64 + 1.0 / 12.0).sqrt();
    assert!((sd - expected).abs() / expected < 0.02, "sd {sd}");
}

#[test]
fn gaussian_delta_perturbs_exactly_that_share() {
    let ds = generate_sprites(200, 2).unwrap();
    let out = apply_shift_traced(&ds, &spec(ShiftKind::Gaussian, Intensity::Large, 0.5, 4)).unwrap();
    assert_eq!(out.perturbed.len(), 100);
    for i in 0..ds.len() {
        let changed = out.dataset.image(i) != ds.image(i);
        if !out.perturbed.contains(&i) {
            assert!(!changed, "sample {i} changed but was not chosen");
        }
    }
    assert_eq!(out.dataset.concept_labels, ds.concept_labels);
}

#[test]
fn knockout_removes_the_delta_share_of_the_class() {
    let ds = generate_sprites(600, 3).unwrap();
    let class = majority_class(&ds.task_labels, ds.num_task_classes());
    let before = ds.task_labels.iter().filter(|&&l| l == class).count();
    let out = apply_shift(&ds, &spec(ShiftKind::Knockout { class: None }, Intensity::Small, 0.5, 0)).unwrap();
    let after = out.task_labels.iter().filter(|&&l| l == class).count();
    assert_eq!(after, before - (before as f64 * 0.5).round() as usize);
    assert_eq!(out.len(), ds.len() - (before - after));
}

#[test]
fn large_concept_shift_removes_half_the_values() {
    let ds = generate_sprites(600, 5).unwrap();
    let target = ConceptTarget { concept: "scale".into(), values: None, mode: ConceptMode::Remove };
    let out = apply_shift(&ds, &spec(ShiftKind::Concept { targets: vec![target] }, Intensity::Large, 1.0, 0)).unwrap();
    assert!((0..out.len()).all(|i| out.concept_label(i, 1) >= 3));
    let keep = (0..ds.len()).filter(|&i| ds.concept_label(i, 1) >= 3).count();
    assert_eq!(out.len(), keep);
}

#[test]
fn quarter_turns_compose_to_identity() {
    let ds = generate_sprites(3, 6).unwrap();
    let (h, w, c) = (ds.height, ds.width, ds.channels);
    let turn = Affine::rotation(std::f64::consts::FRAC_PI_2);
    for i in 0..ds.len() {
        let mut img = ds.image(i).to_vec();
        let mut tmp = vec![0u8; img.len()];
        for _ in 0..4 {
            transform_image(&img, &mut tmp, h, w, c, &turn);
            std::mem::swap(&mut img, &mut tmp);
        }
        assert_eq!(img, ds.image(i));
    }
}

#[test]
fn shifts_are_seeded() {
    let ds = generate_sprites(100, 7).unwrap();
    let s = spec(ShiftKind::Image { ops: vec![ImageOp::Rotate, ImageOp::Zoom] }, Intensity::Medium, 0.5, 11);
    assert_eq!(apply_shift(&ds, &s).unwrap(), apply_shift(&ds, &s).unwrap());
    assert_ne!(apply_shift(&ds, &s).unwrap(), apply_shift(&ds, &s.clone().with_seed(12)).unwrap());
}

#[test]
fn combination_applies_children_in_order() {
    let ds = generate_sprites(300, 8).unwrap();
    let children = vec![
        ShiftSpec::new(ShiftKind::Knockout { class: Some(0) }, Intensity::Medium, 1.0),
        ShiftSpec::new(ShiftKind::Gaussian, Intensity::Small, 1.0),
    ];
    let out = apply_shift_traced(&ds, &spec(ShiftKind::Combination { shifts: children }, Intensity::Medium, 1.0, 2)).unwrap();
    assert!(out.dataset.task_labels.iter().all(|&l| l != 0));
    assert_eq!(out.perturbed.len(), out.dataset.len());
}

proptest! {
    #[test]
    fn affected_sets_are_nested(n in 1usize..500, seed in any::<u64>(), salt in any::<u64>()) {
        let sets: Vec<Vec<usize>> = DELTAS.iter().map(|&d| affected(n, d, seed, salt)).collect();
        for pair in sets.windows(2) {
            prop_assert!(pair[1].starts_with(&pair[0]));
        }
        prop_assert_eq!(sets[2].len(), n);
        let mut all = sets[2].clone();
        all.sort_unstable();
        prop_assert_eq!(all, (0..n).collect::<Vec<_>>());
    }

    #[test]
    fn affine_inverse_round_trips(
        tx in -20.0f64..20.0, ty in -20.0f64..20.0, theta in -3.0f64..3.0,
        s in 0.5f64..2.0, phi in -0.7f64..0.7, x in -40.0f64..40.0, y in -40.0f64..40.0,
    ) {
        let t = Affine::translation(tx, ty)
            .then_after(&Affine::rotation(theta))
            .then_after(&Affine::scaling(s))
            .then_after(&Affine::shear(phi));
        let (u, v) = t.apply(x, y);
        let (bx, by) = t.inverse().unwrap().apply(u, v);
        prop_assert!((bx - x).abs() < 1e-9 && (by - y).abs() < 1e-9);
    }

    #[test]
    fn shift_specs_survive_json(seed in any::<u64>(), d in 0usize..3, class in proptest::option::of(0u32..3)) {
        let s = spec(ShiftKind::Knockout { class }, Intensity::Large, DELTAS[d], seed);
        let text = serde_json::to_string(&s).unwrap();
        prop_assert_eq!(serde_json::from_str::<ShiftSpec>(&text).unwrap(), s);
    }
}

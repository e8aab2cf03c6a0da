use proptest::prelude::*;
use vesseltree::io;
use vesseltree::landmarks::{extract_landmarks, heatmap_targets, match_and_score, DetectionParams};
use vesseltree::types::{Landmark, LandmarkClass, LandmarkSource, LiftedLandmark};

fn class_strategy() -> impl Strategy<Value = LandmarkClass> {
    prop_oneof![
        Just(LandmarkClass::Endpoint),
        Just(LandmarkClass::Bifurcation),
        Just(LandmarkClass::Crossing)
    ]
}

fn landmarks(max: usize) -> impl Strategy<Value = Vec<Landmark>> {
    proptest::collection::vec((0u32..40, 0u32..30, class_strategy()), 0..max)
        .prop_map(|v| v.into_iter().map(|(x, y, c)| Landmark::new(x as f64, y as f64, c)).collect())
}

#[test]
fn heatmap_files_round_trip_through_extraction() {
    let dir = tempfile::tempdir().unwrap();
    let truth = vec![
        Landmark::new(10.0, 12.0, LandmarkClass::Bifurcation),
        Landmark::new(30.0, 5.0, LandmarkClass::Endpoint),
        Landmark::new(20.0, 20.0, LandmarkClass::Crossing),
    ];
    let p = DetectionParams::default();
    let hm = heatmap_targets(&truth, 40, 30, &p).unwrap();
    io::write_heatmap_tiff(dir.path().join("hm.tiff"), &hm).unwrap();
    io::write_heatmap_pngs(dir.path().join("hm"), &hm).unwrap();
    for path in [dir.path().join("hm.tiff"), dir.path().join("hm")] {
        let back = io::read_heatmap(&path).unwrap();
        let mut got = extract_landmarks(&back, &p).unwrap();
        got.sort_by(|a, b| a.class.cmp(&b.class));
        let mut want = truth.clone();
        want.sort_by(|a, b| a.class.cmp(&b.class));
        let pos = |v: &[Landmark]| v.iter().map(|l| (l.class, l.x, l.y)).collect::<Vec<_>>();
        assert_eq!(pos(&got), pos(&want));
        assert_eq!(match_and_score(&got, &truth, &p).aggregate.f1, 1.0);
    }
}

#[test]
fn landmark_json_shapes() {
    let l: Vec<Landmark> = serde_json::from_str(r#"[{"x": 1.5, "y": 2, "class": "crossing"}]"#).unwrap();
    assert_eq!(l[0].confidence, 1.0);
    assert!(serde_json::from_str::<Landmark>(r#"{"x": 1, "y": 2, "class": "vein"}"#).is_err());
    assert!(serde_json::from_str::<Landmark>(r#"{"x": 1, "y": 2, "class": "endpoint", "z": 0}"#).is_err());

    let mut lifted = LiftedLandmark::new(l[0], 0.3, LandmarkSource::CrossingSecondary);
    lifted.low_confidence = true;
    let text = serde_json::to_string(&lifted).unwrap();
    assert!(text.contains(r#""source":"crossing-secondary""#), "{text}");
    assert!(text.contains(r#""class":"crossing""#), "{text}");
    let back: LiftedLandmark = serde_json::from_str(&text).unwrap();
    assert_eq!(back, lifted);
}

#[test]
fn report_json_uses_fn_key() {
    let p = DetectionParams::default();
    let truth = [Landmark::new(3.0, 3.0, LandmarkClass::Endpoint)];
    let rep = match_and_score(&[], &truth, &p);
    let v = serde_json::to_value(&rep).unwrap();
    assert_eq!(v["aggregate"]["fn"], 1);
    assert_eq!(v["per_class"]["endpoint"]["recall"], 0.0);
}

proptest! {
    #[test]
    fn swapping_roles_swaps_precision_and_recall(a in landmarks(12), b in landmarks(12)) {
        let p = DetectionParams::default();
        let ab = match_and_score(&a, &b, &p);
        let ba = match_and_score(&b, &a, &p);
        prop_assert_eq!(ab.aggregate.precision, ba.aggregate.recall);
        prop_assert_eq!(ab.aggregate.recall, ba.aggregate.precision);
        prop_assert_eq!(ab.aggregate.f1, ba.aggregate.f1);
        prop_assert_eq!(ab.class_agnostic.f1, ba.class_agnostic.f1);
    }

    #[test]
    fn f1_ignores_list_order(a in landmarks(12), b in landmarks(12), rot in 0usize..12) {
        let p = DetectionParams::default();
        let mut a2 = a.clone();
        if !a2.is_empty() {
            let k = rot % a2.len();
            a2.rotate_left(k);
        }
        let mut b2 = b.clone();
        b2.reverse();
        prop_assert_eq!(match_and_score(&a, &b, &p).aggregate.f1, match_and_score(&a2, &b2, &p).aggregate.f1);
    }

    #[test]
    fn extraction_count_monotone_in_threshold(a in landmarks(10), r1 in 0.05f64..0.95, dr in 0.0f64..0.5) {
        let base = DetectionParams::default();
        let hm = heatmap_targets(&a, 40, 30, &base).unwrap();
        let lo = DetectionParams { r: r1, ..base };
        let hi = DetectionParams { r: (r1 + dr).min(1.0), ..base };
        let n_lo = extract_landmarks(&hm, &lo).unwrap().len();
        let n_hi = extract_landmarks(&hm, &hi).unwrap().len();
        prop_assert!(n_hi <= n_lo);
    }
}
